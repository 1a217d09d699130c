//! Uplink system model: configuration, channel draws, precoding and the
//! stacked received signal `y = sum_k G_k P_k S_k + N`.
//!
//! SNR convention: `snr_db` is the average received SNR per RAU antenna with
//! unit-energy constellations and unit-variance channel taps, so
//! `noise_variance = total_streams / 10^(snr_db / 10)` where `total_streams`
//! sums the stream counts of all users. The per-RAU log-normal model keeps
//! its gains at zero mean in dB and does not renormalize.

use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::coding::{Interleaver, LdpcCode};
use crate::error::{Error, Result};
use crate::numerics::{complex_gaussian, svd, ComplexMatrix};
use crate::rng::{self, SimRng};
use crate::softmaps::{modulate, Constellation};

/// Small-scale and large-scale fading model of the per-RAU channel blocks.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelModel {
    /// Every tap i.i.d. CN(0, 1).
    #[default]
    IidRayleigh,
    /// Rayleigh taps with each `(RAU, user)` block scaled by a log-normal
    /// amplitude, 8 dB standard deviation.
    PerRauLargeScale,
}

/// How a user maps its streams onto its antennas.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrecoderMode {
    /// The first `streams` columns of the identity.
    #[default]
    Columns,
    /// The dominant right singular vectors of the user's channel.
    RightSingular,
}

/// Which rows of the interferer null space form a user's suppression matrix.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum RowSelection {
    #[default]
    First,
    Random {
        seed: u64,
    },
}

pub const LOG_NORMAL_STD_DB: f64 = 8.0;

/// One experiment point. Fields missing from a config file take their
/// values from [`SystemConfig::desk`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    /// Number of remote antenna units.
    pub raus: usize,
    pub users: usize,
    pub antennas_per_rau: usize,
    pub antennas_per_user: usize,
    /// Spatial streams of each user.
    pub streams_per_user: Vec<usize>,
    /// Bits per QAM symbol (2, 4 or 6).
    pub bits_per_symbol: usize,
    /// Built-in code name or path to an alist file.
    pub code: String,
    /// Symbols per stream per block.
    pub block_len: usize,
    pub snr_db: f64,
    pub seed: u64,
    pub channel_model: ChannelModel,
    pub precoder: PrecoderMode,
    pub row_selection: RowSelection,
    /// Overrides the SNR-derived noise variance when set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_variance: Option<f64>,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl SystemConfig {
    /// Two RAUs, two users, four antennas each, two 16-QAM streams per user,
    /// rate-1/2 n=648 LDPC, 162 symbols per stream (two codewords per user).
    pub fn desk() -> Self {
        Self {
            raus: 2,
            users: 2,
            antennas_per_rau: 4,
            antennas_per_user: 4,
            streams_per_user: vec![2, 2],
            bits_per_symbol: 4,
            code: "wifi_648_r12".into(),
            block_len: 162,
            snr_db: 10.0,
            seed: 1,
            channel_model: ChannelModel::IidRayleigh,
            precoder: PrecoderMode::Columns,
            row_selection: RowSelection::First,
            noise_variance: None,
        }
    }

    /// 32x32: four RAUs and four users with eight antennas each, four
    /// 16-QAM streams per user at rate 3/4.
    pub fn cqi6_32x32() -> Self {
        Self {
            raus: 4,
            users: 4,
            antennas_per_rau: 8,
            antennas_per_user: 8,
            streams_per_user: vec![4; 4],
            bits_per_symbol: 4,
            code: "wifi_648_r34".into(),
            block_len: 162,
            ..Self::desk()
        }
    }

    /// 32x32 with four 64-QAM streams per user at rate 2/3.
    pub fn cqi7_32x32() -> Self {
        Self {
            bits_per_symbol: 6,
            code: "wifi_648_r23".into(),
            ..Self::cqi6_32x32()
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "desk" => Some(Self::desk()),
            "cqi6_32x32" => Some(Self::cqi6_32x32()),
            "cqi7_32x32" => Some(Self::cqi7_32x32()),
            _ => None,
        }
    }

    pub fn receive_antennas(&self) -> usize {
        self.raus * self.antennas_per_rau
    }

    pub fn total_streams(&self) -> usize {
        self.streams_per_user.iter().sum()
    }

    pub fn coded_bits(&self, user: usize) -> usize {
        self.streams_per_user[user] * self.block_len * self.bits_per_symbol
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
            .unwrap_or_else(|| self.total_streams() as f64 / 10f64.powf(self.snr_db / 10.0))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.raus == 0
            || self.users == 0
            || self.antennas_per_rau == 0
            || self.antennas_per_user == 0
        {
            return bad("RAU, user and antenna counts must be positive".into());
        }
        if self.block_len == 0 {
            return bad("block_len must be positive".into());
        }
        if self.streams_per_user.len() != self.users {
            return bad(format!(
                "streams_per_user has {} entries for {} users",
                self.streams_per_user.len(),
                self.users
            ));
        }
        for (k, &s) in self.streams_per_user.iter().enumerate() {
            if s == 0 || s > self.antennas_per_user {
                return bad(format!(
                    "user {k}: {s} streams outside 1..={}",
                    self.antennas_per_user
                ));
            }
            if s > self.antennas_per_rau {
                return bad(format!(
                    "user {k}: {s} streams exceed the {} rows of the suppressed channel",
                    self.antennas_per_rau
                ));
            }
        }
        let interferer_dims = (self.users - 1) * self.antennas_per_user;
        if self.receive_antennas() < interferer_dims + self.antennas_per_rau {
            return bad(format!(
                "{} receive antennas cannot null {interferer_dims} interferer dimensions and keep {}",
                self.receive_antennas(),
                self.antennas_per_rau
            ));
        }
        if let Some(nv) = self.noise_variance {
            if !(nv > 0.0 && nv.is_finite()) {
                return Err(Error::NoiseVariance(nv));
            }
        }
        if !self.snr_db.is_finite() {
            return bad("snr_db must be finite".into());
        }
        Constellation::new(self.bits_per_symbol)?;
        Ok(())
    }
}

/// Channel of every user plus the precoders and effective channels.
#[derive(Clone, Debug)]
pub struct ChannelRealization {
    /// `G_k`: `(raus * antennas_per_rau) x antennas_per_user`, RAU blocks
    /// stacked vertically.
    pub g: Vec<ComplexMatrix>,
    /// `P_k`: `antennas_per_user x streams`, orthonormal columns.
    pub precoders: Vec<ComplexMatrix>,
    /// `H_k = G_k P_k`.
    pub effective: Vec<ComplexMatrix>,
}

impl ChannelRealization {
    /// Assembles a realization from explicit channels, deriving precoders
    /// and effective channels.
    pub fn from_channels(
        g: Vec<ComplexMatrix>,
        streams: &[usize],
        mode: PrecoderMode,
    ) -> Result<Self> {
        let precoders = g
            .iter()
            .zip(streams)
            .map(|(gk, &s)| build_precoder(gk, s, mode))
            .collect::<Result<Vec<_>>>()?;
        let effective = g.iter().zip(&precoders).map(|(gk, pk)| gk * pk).collect();
        Ok(Self {
            g,
            precoders,
            effective,
        })
    }

    pub fn users(&self) -> usize {
        self.g.len()
    }

    /// `G = [G_1 ... G_K]`.
    pub fn stacked(&self) -> ComplexMatrix {
        let rows = self.g[0].rows();
        let blocks: Vec<&ComplexMatrix> = self.g.iter().collect();
        ComplexMatrix::hstack(rows, &blocks).expect("channels share the row count")
    }

    /// `[G_1 ... G_{k-1} G_{k+1} ... G_K]`.
    pub fn interferers(&self, user: usize) -> ComplexMatrix {
        let rows = self.g[0].rows();
        let blocks: Vec<&ComplexMatrix> = self
            .g
            .iter()
            .enumerate()
            .filter(|(l, _)| *l != user)
            .map(|(_, b)| b)
            .collect();
        ComplexMatrix::hstack(rows, &blocks).expect("channels share the row count")
    }
}

/// Draws a channel for `cfg`. Deterministic in the RNG state.
pub fn draw_channel(cfg: &SystemConfig, rng: &mut SimRng) -> Result<ChannelRealization> {
    cfg.validate()?;
    let nr = cfg.antennas_per_rau;
    let nu = cfg.antennas_per_user;
    let mut g = Vec::with_capacity(cfg.users);
    let shadow = Normal::new(0.0, LOG_NORMAL_STD_DB).expect("finite std");
    for _ in 0..cfg.users {
        let mut gk = ComplexMatrix::zeros(cfg.receive_antennas(), nu);
        for m in 0..cfg.raus {
            let mut block = complex_gaussian(nr, nu, 1.0, rng);
            if cfg.channel_model == ChannelModel::PerRauLargeScale {
                let gain_db: f64 = shadow.sample(rng);
                block = block.scale(10f64.powf(gain_db / 20.0));
            }
            gk.set_block(m * nr, 0, &block);
        }
        g.push(gk);
    }
    ChannelRealization::from_channels(g, &cfg.streams_per_user, cfg.precoder)
}

/// `antennas x streams` precoder with orthonormal columns.
pub fn build_precoder(
    g_k: &ComplexMatrix,
    streams: usize,
    mode: PrecoderMode,
) -> Result<ComplexMatrix> {
    let nu = g_k.cols();
    if streams == 0 || streams > nu {
        return Err(Error::Config(format!(
            "{streams} streams for {nu} user antennas"
        )));
    }
    match mode {
        PrecoderMode::Columns => Ok(ComplexMatrix::identity(nu).block(0, 0, nu, streams)),
        PrecoderMode::RightSingular => {
            let d = svd(g_k, None)?;
            if d.rank < streams {
                return Err(Error::PrecoderRank {
                    rank: d.rank,
                    required: streams,
                });
            }
            Ok(d.vh.block(0, 0, streams, nu).adjoint())
        }
    }
}

/// Code, constellation and per-user interleavers shared by every block of
/// an experiment.
#[derive(Clone, Debug)]
pub struct LinkSetup {
    pub code: Arc<LdpcCode>,
    pub constellation: Constellation,
    pub interleavers: Vec<Interleaver>,
}

impl LinkSetup {
    pub fn new(cfg: &SystemConfig) -> Result<Self> {
        cfg.validate()?;
        let code = load_code(&cfg.code)?;
        Self::with_code(cfg, Arc::new(code))
    }

    pub fn with_code(cfg: &SystemConfig, code: Arc<LdpcCode>) -> Result<Self> {
        let constellation = Constellation::new(cfg.bits_per_symbol)?;
        let mut interleavers = Vec::with_capacity(cfg.users);
        for k in 0..cfg.users {
            let len = cfg.coded_bits(k);
            if !len.is_multiple_of(code.n()) {
                return Err(Error::Config(format!(
                    "user {k}: {len} coded bits per block is not a multiple of the code length {}",
                    code.n()
                )));
            }
            let seed = rng::derive_seed(cfg.seed, &[rng::purpose::INTERLEAVER, k as u64]);
            interleavers.push(Interleaver::new(len, seed));
        }
        Ok(Self {
            code,
            constellation,
            interleavers,
        })
    }

    pub fn codewords_per_block(&self, user: usize) -> usize {
        self.interleavers[user].len() / self.code.n()
    }

    pub fn info_bits_per_block(&self, user: usize) -> usize {
        self.codewords_per_block(user) * self.code.k()
    }
}

/// Loads a built-in code by name, or an alist file by path.
pub fn load_code(name_or_path: &str) -> Result<LdpcCode> {
    if crate::coding::builtin_codes().any(|n| n == name_or_path) {
        return Ok(LdpcCode::builtin(name_or_path)?);
    }
    let text = std::fs::read_to_string(name_or_path).map_err(|source| Error::Io {
        path: name_or_path.to_string(),
        source,
    })?;
    Ok(LdpcCode::from_alist(&text)?)
}

/// Everything sent and received in one block.
#[derive(Clone, Debug)]
pub struct TransmitBlock {
    pub info_bits: Vec<Vec<u8>>,
    /// Interleaved codeword bits, in symbol order.
    pub coded_bits: Vec<Vec<u8>>,
    /// `S_k`: `streams x block_len`.
    pub symbols: Vec<ComplexMatrix>,
    /// `y`: `receive_antennas x block_len`.
    pub received: ComplexMatrix,
}

/// Uniform random information bits for every user.
pub fn random_payload(link: &LinkSetup, rng: &mut SimRng) -> Vec<Vec<u8>> {
    (0..link.interleavers.len())
        .map(|k| {
            (0..link.info_bits_per_block(k))
                .map(|_| rng.random_range(0..2u8))
                .collect()
        })
        .collect()
}

/// Encodes, interleaves and maps each user's payload, then forms the
/// received block with i.i.d. CN(0, `noise_variance`) noise. A zero noise
/// variance gives the noiseless signal.
pub fn transmit(
    cfg: &SystemConfig,
    link: &LinkSetup,
    chan: &ChannelRealization,
    payload: &[Vec<u8>],
    noise_variance: f64,
    rng: &mut SimRng,
) -> Result<TransmitBlock> {
    if payload.len() != cfg.users || chan.users() != cfg.users {
        return Err(Error::Dimension {
            what: "payload users",
            expected: (cfg.users, 1),
            found: (payload.len(), chan.users()),
        });
    }
    if !(noise_variance >= 0.0 && noise_variance.is_finite()) {
        return Err(Error::NoiseVariance(noise_variance));
    }
    let code = &link.code;
    let mut coded_bits = Vec::with_capacity(cfg.users);
    let mut symbols = Vec::with_capacity(cfg.users);
    let mut received = ComplexMatrix::zeros(cfg.receive_antennas(), cfg.block_len);
    for (k, user_bits) in payload.iter().enumerate() {
        let expected = link.info_bits_per_block(k);
        if user_bits.len() != expected {
            return Err(Error::Dimension {
                what: "payload bits",
                expected: (expected, 1),
                found: (user_bits.len(), 1),
            });
        }
        let mut codeword_bits = Vec::with_capacity(cfg.coded_bits(k));
        for chunk in user_bits.chunks_exact(code.k()) {
            codeword_bits.extend(code.encode(chunk)?);
        }
        let bits = link.interleavers[k].interleave(&codeword_bits)?;
        let points = modulate(&bits, &link.constellation)?;
        let streams = cfg.streams_per_user[k];
        // Symbol t sits on stream t % streams at column t / streams.
        let mut s = ComplexMatrix::zeros(streams, cfg.block_len);
        for (t, &p) in points.iter().enumerate() {
            s[(t % streams, t / streams)] = p;
        }
        let h = &chan.effective[k];
        if h.shape() != (cfg.receive_antennas(), streams) {
            return Err(Error::Dimension {
                what: "effective channel",
                expected: (cfg.receive_antennas(), streams),
                found: h.shape(),
            });
        }
        received = &received + &(h * &s);
        coded_bits.push(bits);
        symbols.push(s);
    }
    if noise_variance > 0.0 {
        let sd = (noise_variance / 2.0).sqrt();
        for i in 0..received.rows() {
            for z in received.row_mut(i) {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                *z += Complex64::new(re * sd, im * sd);
            }
        }
    }
    Ok(TransmitBlock {
        info_bits: payload.to_vec(),
        coded_bits,
        symbols,
        received,
    })
}
