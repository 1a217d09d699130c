//! Iterative receiver: suppression, soft detection, demapping and LDPC
//! decoding for every user of a block.
//!
//! * `Idd` runs the decoder inside the loop and feeds its extrinsic LLRs
//!   back as priors; the hard decision comes from the last decode.
//! * `Id` feeds the demapper LLRs straight back and decodes once at the end.
//! * `Lmmse` detects once without priors and decodes once.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::detector::{self, Detection, DetectorState, SoftBlock};
use crate::error::{Error, Result};
use crate::numerics::ComplexMatrix;
use crate::softmaps::{demap_soft, soft_symbol_stats, DemapMode, LlrBlock, SigmoidLut, LLR_CLAMP};
use crate::suppression::{apply_suppression, SuppressionSet};
use crate::system_model::{LinkSetup, SystemConfig};

pub const DEFAULT_BP_ITERS: usize = 25;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Lmmse,
    Id,
    Idd,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Lmmse => "lmmse",
            Scheme::Id => "id",
            Scheme::Idd => "idd",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lmmse" => Ok(Scheme::Lmmse),
            "id" => Ok(Scheme::Id),
            "idd" => Ok(Scheme::Idd),
            other => Err(Error::Config(format!("unknown scheme {other:?}"))),
        }
    }
}

fn default_bp_iters() -> usize {
    DEFAULT_BP_ITERS
}

fn default_iterations() -> usize {
    1
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IterationPlan {
    pub scheme: Scheme,
    /// Detector passes.
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    /// Belief-propagation iterations per decoder call.
    #[serde(default = "default_bp_iters")]
    pub bp_iters: usize,
}

impl IterationPlan {
    pub fn lmmse() -> Self {
        Self {
            scheme: Scheme::Lmmse,
            iterations: 1,
            bp_iters: DEFAULT_BP_ITERS,
        }
    }

    pub fn idd(iterations: usize) -> Self {
        Self {
            scheme: Scheme::Idd,
            iterations,
            bp_iters: DEFAULT_BP_ITERS,
        }
    }

    pub fn id(iterations: usize) -> Self {
        Self {
            scheme: Scheme::Id,
            iterations,
            bp_iters: DEFAULT_BP_ITERS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be at least 1".into()));
        }
        if self.scheme == Scheme::Lmmse && self.iterations != 1 {
            return Err(Error::Config(
                "the LMMSE baseline runs exactly one iteration".into(),
            ));
        }
        if self.bp_iters == 0 {
            return Err(Error::Config("bp_iters must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IterationDiagnostics {
    /// Mean prior variance entering this detector pass.
    pub mean_nu: f64,
    /// Mean `|L|` at the demapper output.
    pub mean_abs_llr: f64,
    /// Detector inversions spent in this pass.
    pub inversions: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct UserResult {
    pub decoded_bits: Vec<u8>,
    /// Any info-bit mismatch or unsatisfied parity check.
    pub block_error: bool,
    pub parity_ok: bool,
    pub diagnostics: Vec<IterationDiagnostics>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReceiveResult {
    pub users: Vec<UserResult>,
}

impl ReceiveResult {
    pub fn block_errors(&self) -> usize {
        self.users.iter().filter(|u| u.block_error).count()
    }

    pub fn inversion_count(&self) -> u64 {
        self.users
            .iter()
            .flat_map(|u| &u.diagnostics)
            .map(|d| d.inversions)
            .sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Path {
    Evd,
    Naive,
}

fn lut() -> &'static SigmoidLut {
    static LUT: OnceLock<SigmoidLut> = OnceLock::new();
    LUT.get_or_init(SigmoidLut::default)
}

/// Receives one block with the eigendecomposition detector. `truth` holds
/// the transmitted info bits and only feeds the block-error flags.
pub fn receive_block(
    cfg: &SystemConfig,
    link: &LinkSetup,
    supp: &SuppressionSet,
    y: &ComplexMatrix,
    truth: &[Vec<u8>],
    plan: &IterationPlan,
) -> Result<ReceiveResult> {
    receive(cfg, link, supp, y, truth, plan, Path::Evd)
}

/// As [`receive_block`], with the per-column reference detector that keeps
/// the full diagonal of prior variances.
pub fn receive_block_naive(
    cfg: &SystemConfig,
    link: &LinkSetup,
    supp: &SuppressionSet,
    y: &ComplexMatrix,
    truth: &[Vec<u8>],
    plan: &IterationPlan,
) -> Result<ReceiveResult> {
    receive(cfg, link, supp, y, truth, plan, Path::Naive)
}

fn receive(
    cfg: &SystemConfig,
    link: &LinkSetup,
    supp: &SuppressionSet,
    y: &ComplexMatrix,
    truth: &[Vec<u8>],
    plan: &IterationPlan,
    path: Path,
) -> Result<ReceiveResult> {
    plan.validate()?;
    if supp.w.len() != cfg.users || truth.len() != cfg.users {
        return Err(Error::Dimension {
            what: "users",
            expected: (cfg.users, cfg.users),
            found: (supp.w.len(), truth.len()),
        });
    }
    let users = (0..cfg.users)
        .map(|k| {
            let y_k = apply_suppression(&supp.w[k], y)?;
            let state = detector::prepare(&supp.h_eff[k], &supp.sigma[k])?;
            receive_user(link, k, &state, &y_k, &truth[k], plan, path)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ReceiveResult { users })
}

fn receive_user(
    link: &LinkSetup,
    user: usize,
    state: &DetectorState,
    y_k: &ComplexMatrix,
    truth: &[u8],
    plan: &IterationPlan,
    path: Path,
) -> Result<UserResult> {
    let streams = state.streams();
    let len = y_k.cols();
    let c = &link.constellation;
    let mut soft = SoftBlock::uninformed(streams, len);
    let mut llr = LlrBlock::zeros(streams, len, c.order_bits());
    let mut decoded: Option<DecodedBlock> = None;
    let mut diagnostics = Vec::with_capacity(plan.iterations);
    for it in 0..plan.iterations {
        let before = state.inversion_count();
        let det = match (plan.scheme, path) {
            (Scheme::Lmmse, _) => lmmse_unbiased(state, y_k)?,
            (_, Path::Evd) => detector::detect_evd(state, y_k, &soft)?,
            (_, Path::Naive) => detector::detect_naive(state, y_k, &soft)?,
        };
        for l in 0..len {
            for j in 0..streams {
                let g = det.gamma[j * len + l];
                demap_soft(
                    det.s_hat[(j, l)],
                    g,
                    c,
                    DemapMode::MaxLog,
                    llr.symbol_mut(j, l),
                );
            }
        }
        diagnostics.push(IterationDiagnostics {
            mean_nu: soft.mean_nu(),
            mean_abs_llr: llr.mean_abs(),
            inversions: state.inversion_count() - before,
        });
        let last = it + 1 == plan.iterations;
        match plan.scheme {
            Scheme::Idd => {
                let d = decode(link, user, &llr.values, plan.bp_iters)?;
                if !last {
                    soft = soft_priors(link, streams, len, &d.extrinsic)?;
                }
                decoded = Some(d);
            }
            Scheme::Id if !last => soft = soft_priors(link, streams, len, &llr.values)?,
            _ => {}
        }
    }
    let d = match decoded {
        Some(d) => d,
        None => decode(link, user, &llr.values, plan.bp_iters)?,
    };
    let block_error = !d.parity_ok || d.info_bits != truth;
    Ok(UserResult {
        decoded_bits: d.info_bits,
        block_error,
        parity_ok: d.parity_ok,
        diagnostics,
    })
}

/// Biased LMMSE output rescaled by `rho(nu = 1)`; identical in exact
/// arithmetic to the soft detector without priors.
fn lmmse_unbiased(state: &DetectorState, y_k: &ComplexMatrix) -> Result<Detection> {
    let mut s_hat = detector::lmmse_detect(state, y_k)?;
    let rho = detector::compute_rho(state, 1.0);
    let snr = detector::post_detection_snr(state, 1.0);
    let len = y_k.cols();
    let mut gamma = vec![0.0; rho.len() * len];
    for (j, &r) in rho.iter().enumerate() {
        if r > 0.0 {
            for v in s_hat.row_mut(j) {
                *v /= r;
            }
        }
        gamma[j * len..(j + 1) * len].fill(snr[j]);
    }
    Ok(Detection { s_hat, gamma })
}

struct DecodedBlock {
    info_bits: Vec<u8>,
    parity_ok: bool,
    /// Decoder extrinsic LLRs, interleaved back into symbol order.
    extrinsic: Vec<f64>,
}

fn decode(link: &LinkSetup, user: usize, llrs: &[f64], bp_iters: usize) -> Result<DecodedBlock> {
    let ilv = &link.interleavers[user];
    let code = &link.code;
    let prior = ilv.deinterleave(llrs)?;
    let mut info_bits = Vec::with_capacity(link.info_bits_per_block(user));
    let mut extrinsic = Vec::with_capacity(prior.len());
    let mut parity_ok = true;
    for chunk in prior.chunks_exact(code.n()) {
        let out = code.decode_siso(chunk, bp_iters)?;
        parity_ok &= out.parity_ok;
        info_bits.extend(code.extract_info(&out.hard_bits));
        extrinsic.extend(out.extrinsic.iter().map(|e| e.clamp(-LLR_CLAMP, LLR_CLAMP)));
    }
    Ok(DecodedBlock {
        info_bits,
        parity_ok,
        extrinsic: ilv.interleave(&extrinsic)?,
    })
}

fn soft_priors(link: &LinkSetup, streams: usize, len: usize, llrs: &[f64]) -> Result<SoftBlock> {
    let c = &link.constellation;
    let mc = c.order_bits();
    let mut s_bar = ComplexMatrix::zeros(streams, len);
    let mut v = vec![0.0; streams * len];
    for l in 0..len {
        for j in 0..streams {
            let o = (l * streams + j) * mc;
            let (mean, var) = soft_symbol_stats(&llrs[o..o + mc], c, Some(lut()))?;
            s_bar[(j, l)] = mean;
            v[j * len + l] = var;
        }
    }
    SoftBlock::new(s_bar, v)
}
