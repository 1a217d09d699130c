//! Self-contained oracle suite. Every check compares a production path with
//! an independent evaluation (LU solves, brute-force enumeration, direct
//! products) on seeded random instances.

use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::detector::{
    compute_rho, evd_columns, isdic_detect_naive, lmmse_detect, prepare, SoftBlock,
};
use crate::numerics::{complex_gaussian, ComplexMatrix, LuFactors};
use crate::rng::{self, SimRng};
use crate::softmaps::{soft_symbol_stats, symbol_prob, Constellation, SigmoidLut, LLR_CLAMP};
use crate::suppression::{build_suppression, noise_covariance};
use crate::system_model::{draw_channel, ChannelRealization, RowSelection, SystemConfig};

const SEED: u64 = 0x5eed;

/// Deliberate defects used to show that the checks can fail.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Faults {
    /// Add the prior term in the eigendecomposition detector instead of
    /// subtracting it.
    pub flip_cancellation: bool,
    /// Build the noise covariance with the user antenna count as its
    /// dimension.
    pub sigma_user_dimension: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConformanceReport {
    pub checks: Vec<CheckResult>,
}

impl ConformanceReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for ConformanceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{}\t{}\t{}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.detail
            )?;
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        write!(
            f,
            "{}\t{} checks, {} failed",
            if failed == 0 { "PASS" } else { "FAIL" },
            self.checks.len(),
            failed
        )
    }
}

pub fn run_conformance() -> ConformanceReport {
    run_conformance_with(Faults::default())
}

pub fn run_conformance_with(faults: Faults) -> ConformanceReport {
    let checks = vec![
        evd_naive_equivalence(faults),
        first_iteration_collapse(),
        unbiasedness(),
        block_diagonalization(),
        noise_whiteness(),
        soft_stats_enumeration(),
        llr_probabilities_sum_to_one(),
        inversion_accounting(),
        sigma_dimension(faults),
    ];
    ConformanceReport { checks }
}

fn check(name: &'static str, value: f64, bound: f64) -> CheckResult {
    CheckResult {
        name,
        passed: value <= bound,
        detail: format!("max error {value:.3e} (bound {bound:.0e})"),
    }
}

fn failure(name: &'static str, detail: String) -> CheckResult {
    CheckResult {
        name,
        passed: false,
        detail,
    }
}

/// `B B^H + 0.1 I` for a random square `B`.
pub(crate) fn random_pd(n: usize, rng: &mut SimRng) -> ComplexMatrix {
    let b = complex_gaussian(n, n, 1.0, rng);
    &(&b * &b.adjoint()) + &ComplexMatrix::identity(n).scale(0.1)
}

fn max_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    (a - b).max_abs()
}

fn evd_naive_equivalence(faults: Faults) -> CheckResult {
    let name = "evd_naive_equivalence";
    let mut r = rng::stream(SEED, &[1]);
    let mut worst = 0.0f64;
    for i in 0..200 {
        let streams = [2, 4, 8][i % 3];
        let rows = if streams > 4 { 8 } else { [4, 8][(i / 3) % 2] };
        let len = [8, 64][(i / 6) % 2];
        let h = complex_gaussian(rows, streams, 1.0, &mut r);
        let sigma = random_pd(rows, &mut r);
        let st = match prepare(&h, &sigma) {
            Ok(s) => s,
            Err(e) => return failure(name, e.to_string()),
        };
        let y = complex_gaussian(rows, len, 1.0, &mut r);
        let s_bar = complex_gaussian(streams, len, 0.5, &mut r);
        let nu: Vec<f64> = (0..len).map(|_| r.random_range(0.0..1.0)).collect();
        let soft = SoftBlock::uniform(s_bar, nu).expect("valid priors");
        let fast = evd_columns(&st, &y, &soft, faults.flip_cancellation).map(|d| d.s_hat);
        let slow = isdic_detect_naive(&st, &y, &soft);
        match (fast, slow) {
            (Ok(a), Ok(b)) => worst = worst.max(max_diff(&a, &b)),
            (Err(e), _) | (_, Err(e)) => return failure(name, e.to_string()),
        }
    }
    check(name, worst, 1e-9)
}

fn first_iteration_collapse() -> CheckResult {
    let name = "first_iteration_collapse";
    let mut r = rng::stream(SEED, &[2]);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let streams = [2, 4][i % 2];
        let h = complex_gaussian(4, streams, 1.0, &mut r);
        let sigma = random_pd(4, &mut r);
        let st = prepare(&h, &sigma).expect("PD covariance");
        let y = complex_gaussian(4, 16, 1.0, &mut r);
        let soft = SoftBlock::uninformed(streams, 16);
        let evd = evd_columns(&st, &y, &soft, false)
            .expect("shapes match")
            .s_hat;
        // (A + I)^{-1} F y, rescaled by rho = diag((A + I)^{-1} A), all by LU.
        let m = &st.a + &ComplexMatrix::identity(streams);
        let lu = LuFactors::new(&m).expect("A + I is nonsingular");
        let mut lmmse = lu.solve(&(&st.f * &y));
        let gain = lu.solve(&st.a);
        for j in 0..streams {
            let rho = gain[(j, j)].re;
            for v in lmmse.row_mut(j) {
                *v /= rho;
            }
        }
        worst = worst.max(max_diff(&evd, &lmmse));
        let mut biased = lmmse_detect(&st, &y).expect("shapes match");
        for j in 0..streams {
            let rho = gain[(j, j)].re;
            for v in biased.row_mut(j) {
                *v /= rho;
            }
        }
        worst = worst.max(max_diff(&biased, &lmmse));
    }
    check(name, worst, 1e-10)
}

fn unbiasedness() -> CheckResult {
    let name = "unbiasedness";
    let mut r = rng::stream(SEED, &[3]);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let n = [2, 4, 8][i % 3];
        let h = complex_gaussian(8, n, 1.0, &mut r);
        let st = prepare(&h, &random_pd(8, &mut r)).expect("PD covariance");
        let nu: f64 = r.random_range(0.0..1.0);
        let rho = compute_rho(&st, nu);
        let m = &st.a.scale(nu) + &ComplexMatrix::identity(n);
        let g = LuFactors::new(&m).expect("nonsingular").solve(&st.a);
        for j in 0..n {
            worst = worst.max((g[(j, j)] / rho[j] - Complex64::new(1.0, 0.0)).norm());
        }
    }
    check(name, worst, 1e-10)
}

fn desk_channels(tag: u64) -> impl Iterator<Item = ChannelRealization> {
    let cfg = SystemConfig::desk();
    let mut r = rng::stream(SEED, &[tag]);
    (0..100).map(move |_| draw_channel(&cfg, &mut r).expect("desk preset is valid"))
}

fn block_diagonalization() -> CheckResult {
    let name = "block_diagonalization";
    let (mut leak, mut ortho) = (0.0f64, 0.0f64);
    for chan in desk_channels(4) {
        let supp = match build_suppression(&chan, 4, RowSelection::First, 1.0) {
            Ok(s) => s,
            Err(e) => return failure(name, e.to_string()),
        };
        for (k, w) in supp.w.iter().enumerate() {
            for (l, g) in chan.g.iter().enumerate() {
                if l != k {
                    leak = leak.max((w * g).frobenius_norm() / g.frobenius_norm());
                }
            }
            ortho = ortho.max(max_diff(
                &(w * &w.adjoint()),
                &ComplexMatrix::identity(w.rows()),
            ));
        }
    }
    CheckResult {
        name,
        passed: leak <= 1e-9 && ortho <= 1e-10,
        detail: format!("relative leakage {leak:.3e} (bound 1e-9), row orthonormality {ortho:.3e} (bound 1e-10)"),
    }
}

fn noise_whiteness() -> CheckResult {
    let name = "noise_whiteness";
    let sigma2 = 0.25;
    let mut worst = 0.0f64;
    for chan in desk_channels(5) {
        let supp =
            build_suppression(&chan, 4, RowSelection::First, sigma2).expect("desk preset is valid");
        for s in &supp.sigma {
            let white = ComplexMatrix::identity(s.rows()).scale(sigma2);
            worst = worst.max((s - &white).frobenius_norm() / sigma2);
        }
    }
    check(name, worst, 1e-9)
}

fn random_llrs(n: usize, r: &mut SimRng) -> Vec<f64> {
    (0..n)
        .map(|_| r.random_range(-LLR_CLAMP..LLR_CLAMP) * r.random::<f64>().powi(2))
        .collect()
}

/// `P(d) = prod_i exp(d_i L_i) / (1 + exp(L_i))`, summed over the points.
fn brute_force_stats(llrs: &[f64], c: &Constellation) -> (Complex64, f64, f64) {
    let m = c.order_bits();
    let (mut mean, mut second, mut total) = (Complex64::new(0.0, 0.0), 0.0, 0.0);
    for (label, &p) in c.points().iter().enumerate() {
        let prob: f64 = (0..m)
            .map(|i| {
                let bit = (label >> (m - 1 - i)) & 1;
                let l = llrs[i];
                // Stable exp(b l) / (1 + exp(l)).
                if l >= 0.0 {
                    if bit == 1 {
                        1.0 / (1.0 + (-l).exp())
                    } else {
                        (-l).exp() / (1.0 + (-l).exp())
                    }
                } else if bit == 1 {
                    l.exp() / (1.0 + l.exp())
                } else {
                    1.0 / (1.0 + l.exp())
                }
            })
            .product();
        mean += p * prob;
        second += p.norm_sqr() * prob;
        total += prob;
    }
    (mean, second - mean.norm_sqr(), total)
}

fn soft_stats_enumeration() -> CheckResult {
    let name = "soft_stats_enumeration";
    let mut r = rng::stream(SEED, &[6]);
    let lut = SigmoidLut::default();
    let (mut exact, mut tab) = (0.0f64, 0.0f64);
    for order in [2, 4, 6] {
        let c = Constellation::new(order).expect("supported order");
        for _ in 0..1000 {
            let llrs = random_llrs(order, &mut r);
            let (bm, bv, _) = brute_force_stats(&llrs, &c);
            let (m, v) = soft_symbol_stats(&llrs, &c, None).expect("length matches");
            exact = exact.max((m - bm).norm()).max((v - bv).abs());
            let (lm, lv) = soft_symbol_stats(&llrs, &c, Some(&lut)).expect("length matches");
            tab = tab.max((lm - bm).norm()).max((lv - bv).abs());
        }
    }
    CheckResult {
        name,
        passed: exact <= 1e-12 && tab <= 1e-3,
        detail: format!("exact {exact:.3e} (bound 1e-12), lookup table {tab:.3e} (bound 1e-3)"),
    }
}

fn llr_probabilities_sum_to_one() -> CheckResult {
    let name = "llr_probabilities_sum_to_one";
    let mut r = rng::stream(SEED, &[7]);
    let lut = SigmoidLut::default();
    let mut worst = 0.0f64;
    for order in [2, 4, 6] {
        let c = Constellation::new(order).expect("supported order");
        for _ in 0..1000 {
            let llrs = random_llrs(order, &mut r);
            for table in [None, Some(&lut)] {
                let total: f64 = (0..c.points().len())
                    .map(|label| {
                        let d: Vec<u8> = (0..order).map(|i| c.bit(label, i)).collect();
                        symbol_prob(&llrs, &d, table)
                    })
                    .sum();
                worst = worst.max((total - 1.0).abs());
            }
        }
    }
    check(name, worst, 1e-9)
}

fn inversion_accounting() -> CheckResult {
    let name = "inversion_accounting";
    let mut r = rng::stream(SEED, &[8]);
    let len = 64;
    let h = complex_gaussian(8, 8, 1.0, &mut r);
    let st = prepare(&h, &random_pd(8, &mut r)).expect("PD covariance");
    let y = complex_gaussian(8, len, 1.0, &mut r);
    let soft = SoftBlock::uninformed(8, len);
    evd_columns(&st, &y, &soft, false).expect("shapes match");
    let evd = st.inversion_count();
    st.reset_inversion_count();
    isdic_detect_naive(&st, &y, &soft).expect("shapes match");
    let naive = st.inversion_count();
    CheckResult {
        name,
        passed: evd == 1 && naive == len as u64,
        detail: format!(
            "eigendecomposition path {evd} (expected 1), naive path {naive} (expected {len})"
        ),
    }
}

fn sigma_dimension(faults: Faults) -> CheckResult {
    let name = "sigma_dimension";
    // Four combiner outputs and three user antennas, so the two candidate
    // dimensions differ.
    let cfg = SystemConfig {
        antennas_per_user: 3,
        streams_per_user: vec![2, 2],
        ..SystemConfig::desk()
    };
    let mut r = rng::stream(SEED, &[9]);
    let chan = match draw_channel(&cfg, &mut r) {
        Ok(c) => c,
        Err(e) => return failure(name, e.to_string()),
    };
    let supp = build_suppression(&chan, cfg.antennas_per_rau, RowSelection::First, 0.5)
        .expect("valid channel");
    let sigma = if faults.sigma_user_dimension {
        ComplexMatrix::identity(cfg.antennas_per_user).scale(0.5)
    } else {
        noise_covariance(&chan, 0, &supp.w[0], 0.5).expect("positive noise variance")
    };
    match prepare(&supp.h_eff[0], &sigma) {
        Ok(_) => CheckResult {
            name,
            passed: true,
            detail: format!("{}x{} covariance accepted", sigma.rows(), sigma.cols()),
        },
        Err(e) => failure(name, e.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_build_passes() {
        let report = run_conformance();
        assert!(report.passed(), "{report}");
    }

    #[test]
    fn flipped_cancellation_is_caught() {
        let report = run_conformance_with(Faults {
            flip_cancellation: true,
            ..Faults::default()
        });
        assert!(!report.check("evd_naive_equivalence").unwrap().passed);
        assert!(report.check("first_iteration_collapse").unwrap().passed);
    }

    #[test]
    fn wrong_covariance_dimension_is_caught() {
        let report = run_conformance_with(Faults {
            sigma_user_dimension: true,
            ..Faults::default()
        });
        let c = report.check("sigma_dimension").unwrap();
        assert!(!c.passed);
        assert!(c.detail.contains("noise covariance"), "{}", c.detail);
    }
}
