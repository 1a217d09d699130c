//! Constellations, soft demapping and the conversion of a-priori LLRs into
//! symbol means and variances.
//!
//! LLR sign convention: `L = ln P(bit = 1) / P(bit = 0)`. A positive LLR
//! favours a one. Many codebases use the opposite sign; everything in this
//! crate, including the LDPC decoder, follows this one.
//!
//! Labeling: square QAM with `M_c` bits per symbol. The first `M_c / 2` bits
//! (most significant first) select the in-phase level and the remaining
//! bits the quadrature level. Each axis is a reflected-Gray PAM where the
//! all-zero label sits on the most positive level, so QPSK maps `00` to
//! `(1 + j) / sqrt(2)`.

use std::io::{self, Write};

use num_complex::Complex64;
use thiserror::Error;

/// Saturation bound applied to every LLR that leaves a demapper or decoder.
pub const LLR_CLAMP: f64 = 30.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SoftmapError {
    #[error("unsupported constellation order {0} bits (must be even and in 2..=10)")]
    UnsupportedOrder(usize),
    #[error("bit count {bits} is not a multiple of {order} bits per symbol")]
    BitCount { bits: usize, order: usize },
    #[error("expected {expected} LLRs per symbol, got {found}")]
    LlrLength { expected: usize, found: usize },
}

/// Gray-labeled square QAM with unit average energy.
#[derive(Clone, Debug, PartialEq)]
pub struct Constellation {
    order_bits: usize,
    points: Vec<Complex64>,
}

impl Constellation {
    pub fn new(order_bits: usize) -> Result<Self, SoftmapError> {
        if order_bits < 2 || !order_bits.is_multiple_of(2) || order_bits > 10 {
            return Err(SoftmapError::UnsupportedOrder(order_bits));
        }
        let half = order_bits / 2;
        let levels = 1usize << half;
        let energy = 2.0 * ((levels * levels) as f64 - 1.0) / 3.0;
        let norm = energy.sqrt();
        let points = (0..1usize << order_bits)
            .map(|label| {
                let i_bits = label >> half;
                let q_bits = label & (levels - 1);
                Complex64::new(
                    pam_level(i_bits, levels) / norm,
                    pam_level(q_bits, levels) / norm,
                )
            })
            .collect();
        Ok(Self { order_bits, points })
    }

    pub fn qpsk() -> Self {
        Self::new(2).expect("valid order")
    }

    pub fn qam16() -> Self {
        Self::new(4).expect("valid order")
    }

    pub fn qam64() -> Self {
        Self::new(6).expect("valid order")
    }

    /// Bits per symbol.
    pub fn order_bits(&self) -> usize {
        self.order_bits
    }

    /// Points indexed by label; bit `i` of the label vector is bit
    /// `order_bits - 1 - i` of the index.
    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn point(&self, bits: &[u8]) -> Complex64 {
        self.points[label_of(bits)]
    }

    /// Bit `i` (0 = first, most significant) of `label`.
    #[inline]
    pub fn bit(&self, label: usize, i: usize) -> u8 {
        ((label >> (self.order_bits - 1 - i)) & 1) as u8
    }

    pub fn max_magnitude(&self) -> f64 {
        self.points.iter().map(|p| p.norm()).fold(0.0, f64::max)
    }

    /// Writes one line per point: the bit pattern, then real and imaginary
    /// parts with 12 significant digits.
    pub fn write_label_table<W: Write>(&self, mut out: W) -> io::Result<()> {
        for (label, p) in self.points.iter().enumerate() {
            let bits: String = (0..self.order_bits)
                .map(|i| if self.bit(label, i) == 1 { '1' } else { '0' })
                .collect();
            writeln!(out, "{bits} {:.11e} {:.11e}", p.re, p.im)?;
        }
        Ok(())
    }
}

fn pam_level(gray: usize, levels: usize) -> f64 {
    let mut binary = gray;
    let mut shift = gray >> 1;
    while shift != 0 {
        binary ^= shift;
        shift >>= 1;
    }
    (levels as f64 - 1.0) - 2.0 * binary as f64
}

fn label_of(bits: &[u8]) -> usize {
    bits.iter().fold(0, |acc, &b| (acc << 1) | (b & 1) as usize)
}

/// Maps groups of `order_bits` bits onto constellation points.
pub fn modulate(
    bits: &[u8],
    constellation: &Constellation,
) -> Result<Vec<Complex64>, SoftmapError> {
    let order = constellation.order_bits();
    if !bits.len().is_multiple_of(order) {
        return Err(SoftmapError::BitCount {
            bits: bits.len(),
            order,
        });
    }
    Ok(bits
        .chunks_exact(order)
        .map(|d| constellation.point(d))
        .collect())
}

/// Tabulated `1 / (1 + exp(x))` on a uniform grid with linear interpolation.
#[derive(Clone, Debug)]
pub struct SigmoidLut {
    x_max: f64,
    inv_step: f64,
    table: Vec<f64>,
}

impl Default for SigmoidLut {
    fn default() -> Self {
        Self::new(LLR_CLAMP, 1.0 / 64.0)
    }
}

impl SigmoidLut {
    pub fn new(x_max: f64, step: f64) -> Self {
        let n = (2.0 * x_max / step).round() as usize;
        let mut table = vec![0.0; n + 1];
        // Fill the left half directly and mirror it so that
        // f(x) + f(-x) = 1 holds to rounding at every node.
        for (i, t) in table.iter_mut().enumerate().take(n / 2 + 1) {
            *t = logistic_neg(-x_max + i as f64 * step);
        }
        for i in n / 2 + 1..=n {
            table[i] = 1.0 - table[n - i];
        }
        Self {
            x_max,
            inv_step: 1.0 / step,
            table,
        }
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    /// Interpolated `1 / (1 + exp(x))`; exactly 1 below the range and 0 above.
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        if x <= -self.x_max {
            return 1.0;
        }
        if x >= self.x_max {
            return 0.0;
        }
        let pos = (x + self.x_max) * self.inv_step;
        let i = (pos as usize).min(self.table.len() - 2);
        let frac = pos - i as f64;
        self.table[i] + (self.table[i + 1] - self.table[i]) * frac
    }
}

#[inline]
fn logistic_neg(x: f64) -> f64 {
    1.0 / (1.0 + x.exp())
}

/// `1 / (1 + exp(x))`, exact or tabulated.
#[inline]
fn sigmoid_neg(x: f64, lut: Option<&SigmoidLut>) -> f64 {
    match lut {
        Some(t) => t.eval(x),
        None => logistic_neg(x),
    }
}

/// Probability of the symbol labeled `d` given per-bit LLRs:
/// `prod_i 1 / (1 + exp(-d~_i L_i))` with `d~_i = +1` for a one bit and
/// `-1` for a zero bit.
pub fn symbol_prob(llrs: &[f64], d: &[u8], lut: Option<&SigmoidLut>) -> f64 {
    debug_assert_eq!(llrs.len(), d.len());
    llrs.iter()
        .zip(d)
        .map(|(&l, &b)| {
            let signed = if b == 1 { l } else { -l };
            sigmoid_neg(-signed, lut)
        })
        .product()
}

/// Mean and variance of a symbol under the a-priori distribution implied by
/// its bit LLRs.
pub fn soft_symbol_stats(
    llrs: &[f64],
    constellation: &Constellation,
    lut: Option<&SigmoidLut>,
) -> Result<(Complex64, f64), SoftmapError> {
    let order = constellation.order_bits();
    if llrs.len() != order {
        return Err(SoftmapError::LlrLength {
            expected: order,
            found: llrs.len(),
        });
    }
    // P(bit i = 1) and P(bit i = 0), each evaluated from its own sigmoid.
    let mut p = [[0.0f64; 2]; 10];
    for (i, &l) in llrs.iter().enumerate() {
        p[i][1] = sigmoid_neg(-l, lut);
        p[i][0] = sigmoid_neg(l, lut);
    }
    let mut mean = Complex64::new(0.0, 0.0);
    let mut second = 0.0;
    for (label, point) in constellation.points().iter().enumerate() {
        let mut prob = 1.0;
        for (i, pi) in p.iter().enumerate().take(order) {
            prob *= pi[constellation.bit(label, i) as usize];
        }
        mean += point * prob;
        second += point.norm_sqr() * prob;
    }
    let var = (second - mean.norm_sqr()).max(0.0);
    Ok((mean, var))
}

/// Soft demapping rule for [`demap_soft`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DemapMode {
    /// `L_i = gamma (min_{d_i=0} |s - a|^2 - min_{d_i=1} |s - a|^2)`.
    #[default]
    MaxLog,
    /// Log-sum-exp over each bit subset.
    Exact,
}

/// Extrinsic bit LLRs of an unbiased estimate `s_hat = s + eta`,
/// `Var(eta) = 1 / gamma`. Output is clamped to `LLR_CLAMP`.
pub fn demap_soft(
    s_hat: Complex64,
    gamma: f64,
    constellation: &Constellation,
    mode: DemapMode,
    out: &mut [f64],
) {
    let order = constellation.order_bits();
    debug_assert_eq!(out.len(), order);
    let mut dist = [0.0f64; 1024];
    let points = constellation.points();
    for (d, p) in dist.iter_mut().zip(points) {
        *d = (s_hat - p).norm_sqr();
    }
    let dist = &dist[..points.len()];
    for (i, o) in out.iter_mut().enumerate() {
        let llr = match mode {
            DemapMode::MaxLog => {
                let mut best = [f64::INFINITY; 2];
                for (label, &d) in dist.iter().enumerate() {
                    let b = constellation.bit(label, i) as usize;
                    if d < best[b] {
                        best[b] = d;
                    }
                }
                gamma * (best[0] - best[1])
            }
            DemapMode::Exact => {
                let mut lo = [f64::INFINITY; 2];
                for (label, &d) in dist.iter().enumerate() {
                    let b = constellation.bit(label, i) as usize;
                    lo[b] = lo[b].min(gamma * d);
                }
                let mut acc = [0.0f64; 2];
                for (label, &d) in dist.iter().enumerate() {
                    let b = constellation.bit(label, i) as usize;
                    acc[b] += (-(gamma * d) + lo[b]).exp();
                }
                (acc[1].ln() - lo[1]) - (acc[0].ln() - lo[0])
            }
        };
        *o = llr.clamp(-LLR_CLAMP, LLR_CLAMP);
    }
}

/// LLRs of one user's block: `n_symbols` columns of `n_streams` symbols with
/// `bits_per_symbol` bits each.
///
/// Bit `i` of the symbol on stream `j` at column `l` lives at
/// `((l * n_streams + j) * bits_per_symbol + i)`, which is also the coded-bit
/// order used by the transmitter.
#[derive(Clone, Debug, PartialEq)]
pub struct LlrBlock {
    pub n_streams: usize,
    pub n_symbols: usize,
    pub bits_per_symbol: usize,
    pub values: Vec<f64>,
}

impl LlrBlock {
    pub fn zeros(n_streams: usize, n_symbols: usize, bits_per_symbol: usize) -> Self {
        Self {
            n_streams,
            n_symbols,
            bits_per_symbol,
            values: vec![0.0; n_streams * n_symbols * bits_per_symbol],
        }
    }

    #[inline]
    pub fn offset(&self, stream: usize, symbol: usize) -> usize {
        (symbol * self.n_streams + stream) * self.bits_per_symbol
    }

    pub fn symbol(&self, stream: usize, symbol: usize) -> &[f64] {
        let o = self.offset(stream, symbol);
        &self.values[o..o + self.bits_per_symbol]
    }

    pub fn symbol_mut(&mut self, stream: usize, symbol: usize) -> &mut [f64] {
        let o = self.offset(stream, symbol);
        &mut self.values[o..o + self.bits_per_symbol]
    }

    pub fn saturate(&mut self, clamp: f64) {
        for v in &mut self.values {
            *v = if v.is_nan() {
                0.0
            } else {
                v.clamp(-clamp, clamp)
            };
        }
    }

    pub fn mean_abs(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        self.values.iter().map(|v| v.abs()).sum::<f64>() / self.values.len() as f64
    }
}
