//! LDPC codes: alist I/O, systematic encoding, sum-product decoding, and the
//! bit interleaver used between the demapper and the decoder.
//!
//! LLRs follow the crate-wide convention `ln P(1) / P(0)`.

use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CodingError {
    #[error("alist line {line}: {msg}")]
    Alist { line: usize, msg: String },
    #[error("length mismatch: expected {expected}, found {found}")]
    Length { expected: usize, found: usize },
    #[error("unknown code {0:?}")]
    UnknownCode(String),
}

const BUILTIN: &[(&str, &str)] = &[
    ("wifi_648_r12", include_str!("../codes/wifi_648_r12.alist")),
    ("wifi_648_r23", include_str!("../codes/wifi_648_r23.alist")),
    ("wifi_648_r34", include_str!("../codes/wifi_648_r34.alist")),
];

/// Names of the parity-check matrices shipped with the crate.
pub fn builtin_codes() -> impl Iterator<Item = &'static str> {
    BUILTIN.iter().map(|(name, _)| *name)
}

/// Binary LDPC code with a systematic encoder derived from its parity-check
/// matrix by Gaussian elimination.
#[derive(Clone)]
pub struct LdpcCode {
    name: String,
    n: usize,
    m: usize,
    /// Variable indices of each check, CSR by check.
    check_ptr: Vec<usize>,
    edge_var: Vec<usize>,
    /// Edge indices incident to each variable.
    var_edges: Vec<Vec<usize>>,
    info_positions: Vec<usize>,
    /// `(parity position, packed mask over info indices)`.
    parity_rows: Vec<(usize, Vec<u64>)>,
}

impl fmt::Debug for LdpcCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LdpcCode")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("k", &self.k())
            .field("checks", &self.m)
            .finish()
    }
}

impl LdpcCode {
    pub fn builtin(name: &str) -> Result<Self, CodingError> {
        let text = BUILTIN
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, t)| *t)
            .ok_or_else(|| CodingError::UnknownCode(name.to_string()))?;
        let mut code = Self::from_alist(text)?;
        code.name = name.to_string();
        Ok(code)
    }

    /// Parses the alist format: `n m`, the maximum column and row degrees,
    /// the column degrees, the row degrees, `n` column adjacency lines and
    /// `m` row adjacency lines, all 1-indexed. Zero entries are padding.
    pub fn from_alist(text: &str) -> Result<Self, CodingError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let mut next_ints = |what: &str| -> Result<(usize, Vec<usize>), CodingError> {
            let (no, line) = lines.next().ok_or_else(|| CodingError::Alist {
                line: 0,
                msg: format!("unexpected end of input, expected {what}"),
            })?;
            let vals = line
                .split_whitespace()
                .map(|t| {
                    t.parse::<usize>().map_err(|e| CodingError::Alist {
                        line: no,
                        msg: format!("{what}: {e}"),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok((no, vals))
        };
        let (no, dims) = next_ints("dimensions")?;
        let [n, m] = dims[..] else {
            return Err(CodingError::Alist {
                line: no,
                msg: "expected \"n m\"".into(),
            });
        };
        if n == 0 || m == 0 || m >= n {
            return Err(CodingError::Alist {
                line: no,
                msg: format!("invalid dimensions n={n} m={m}"),
            });
        }
        next_ints("maximum degrees")?;
        let (no_cd, col_deg) = next_ints("column degrees")?;
        if col_deg.len() != n {
            return Err(CodingError::Alist {
                line: no_cd,
                msg: format!("{} column degrees for n={n}", col_deg.len()),
            });
        }
        let (no_rd, row_deg) = next_ints("row degrees")?;
        if row_deg.len() != m {
            return Err(CodingError::Alist {
                line: no_rd,
                msg: format!("{} row degrees for m={m}", row_deg.len()),
            });
        }
        let mut rows_from_cols: Vec<Vec<usize>> = vec![Vec::new(); m];
        for (j, &deg) in col_deg.iter().enumerate() {
            let (no, entries) = next_ints("column adjacency")?;
            let checks: Vec<usize> = entries.into_iter().filter(|&c| c != 0).collect();
            if checks.len() != deg || checks.iter().any(|&c| c > m) {
                return Err(CodingError::Alist {
                    line: no,
                    msg: format!("column {} does not match its degree {deg}", j + 1),
                });
            }
            for c in checks {
                rows_from_cols[c - 1].push(j);
            }
        }
        for (i, &deg) in row_deg.iter().enumerate() {
            let (no, entries) = next_ints("row adjacency")?;
            let mut vars: Vec<usize> = entries
                .into_iter()
                .filter(|&v| v != 0)
                .map(|v| v - 1)
                .collect();
            vars.sort_unstable();
            let mut expected = rows_from_cols[i].clone();
            expected.sort_unstable();
            if vars.len() != deg || vars != expected {
                return Err(CodingError::Alist {
                    line: no,
                    msg: format!("row {} disagrees with the column lists", i + 1),
                });
            }
        }
        Ok(Self::from_check_lists("alist".into(), n, rows_from_cols))
    }

    /// Builds a code from the variable lists of each check.
    pub fn from_check_lists(name: String, n: usize, mut checks: Vec<Vec<usize>>) -> Self {
        let m = checks.len();
        let mut check_ptr = Vec::with_capacity(m + 1);
        let mut edge_var = Vec::new();
        let mut var_edges = vec![Vec::new(); n];
        check_ptr.push(0);
        for vars in &mut checks {
            vars.sort_unstable();
            vars.dedup();
            for &v in vars.iter() {
                var_edges[v].push(edge_var.len());
                edge_var.push(v);
            }
            check_ptr.push(edge_var.len());
        }
        let (info_positions, parity_rows) = systematic_encoder(n, &checks);
        Self {
            name,
            n,
            m,
            check_ptr,
            edge_var,
            var_edges,
            info_positions,
            parity_rows,
        }
    }

    pub fn to_alist(&self) -> String {
        let cols: Vec<Vec<usize>> = (0..self.n)
            .map(|v| {
                self.var_edges[v]
                    .iter()
                    .map(|&e| self.check_of_edge(e) + 1)
                    .collect()
            })
            .collect();
        let rows: Vec<Vec<usize>> = (0..self.m)
            .map(|c| self.check_vars(c).iter().map(|&v| v + 1).collect())
            .collect();
        let join = |v: &[usize]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        };
        let mut out = format!("{} {}\n", self.n, self.m);
        out += &format!(
            "{} {}\n",
            cols.iter().map(Vec::len).max().unwrap_or(0),
            rows.iter().map(Vec::len).max().unwrap_or(0)
        );
        out += &join(&cols.iter().map(Vec::len).collect::<Vec<_>>());
        out.push('\n');
        out += &join(&rows.iter().map(Vec::len).collect::<Vec<_>>());
        out.push('\n');
        for c in cols.iter().chain(rows.iter()) {
            out += &join(c);
            out.push('\n');
        }
        out
    }

    fn check_of_edge(&self, e: usize) -> usize {
        self.check_ptr.partition_point(|&p| p <= e) - 1
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Codeword length.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Information bits per codeword.
    pub fn k(&self) -> usize {
        self.info_positions.len()
    }

    pub fn num_checks(&self) -> usize {
        self.m
    }

    pub fn rate(&self) -> f64 {
        self.k() as f64 / self.n as f64
    }

    /// Codeword positions that carry the information bits, in order.
    pub fn info_positions(&self) -> &[usize] {
        &self.info_positions
    }

    pub fn check_vars(&self, c: usize) -> &[usize] {
        &self.edge_var[self.check_ptr[c]..self.check_ptr[c + 1]]
    }

    /// Returns true when every parity check is satisfied.
    pub fn syndrome_ok(&self, bits: &[u8]) -> bool {
        (0..self.m).all(|c| self.check_vars(c).iter().fold(0u8, |acc, &v| acc ^ bits[v]) == 0)
    }

    pub fn extract_info(&self, codeword: &[u8]) -> Vec<u8> {
        self.info_positions.iter().map(|&p| codeword[p]).collect()
    }

    pub fn encode(&self, info: &[u8]) -> Result<Vec<u8>, CodingError> {
        if info.len() != self.k() {
            return Err(CodingError::Length {
                expected: self.k(),
                found: info.len(),
            });
        }
        let mut packed = vec![0u64; self.k().div_ceil(64)];
        for (i, &b) in info.iter().enumerate() {
            packed[i / 64] |= ((b & 1) as u64) << (i % 64);
        }
        let mut cw = vec![0u8; self.n];
        for (&p, &b) in self.info_positions.iter().zip(info) {
            cw[p] = b & 1;
        }
        for (pos, mask) in &self.parity_rows {
            let ones: u32 = mask
                .iter()
                .zip(&packed)
                .map(|(a, b)| (a & b).count_ones())
                .sum();
            cw[*pos] = (ones & 1) as u8;
        }
        Ok(cw)
    }

    /// Flooding sum-product decoding with tanh-rule check updates.
    ///
    /// Runs at least one iteration and stops early once the hard decision
    /// satisfies every check. `extrinsic = posterior - prior`, and
    /// `posterior` is formed as `prior + extrinsic` so the identity holds
    /// bit-exactly.
    pub fn decode_siso(
        &self,
        prior: &[f64],
        max_iters: usize,
    ) -> Result<DecodeOutput, CodingError> {
        if prior.len() != self.n {
            return Err(CodingError::Length {
                expected: self.n,
                found: prior.len(),
            });
        }
        // Internally messages use the ln P(0)/P(1) sign so that the tanh rule
        // has its textbook form.
        let n_edges = self.edge_var.len();
        let mut v2c: Vec<f64> = self.edge_var.iter().map(|&v| -prior[v]).collect();
        let mut c2v = vec![0.0f64; n_edges];
        let mut tanh_buf = Vec::new();
        let mut hard = vec![0u8; self.n];
        let mut iterations = 0;
        let mut parity_ok = false;
        let max_iters = max_iters.max(1);
        while iterations < max_iters {
            iterations += 1;
            for c in 0..self.m {
                let (lo, hi) = (self.check_ptr[c], self.check_ptr[c + 1]);
                tanh_buf.clear();
                tanh_buf.extend(v2c[lo..hi].iter().map(|&x| (0.5 * x).tanh()));
                let deg = hi - lo;
                // Exclusive products via prefix/suffix sweeps.
                let mut prefix = 1.0;
                for t in 0..deg {
                    c2v[lo + t] = prefix;
                    prefix *= tanh_buf[t];
                }
                let mut suffix = 1.0;
                for t in (0..deg).rev() {
                    let p = (c2v[lo + t] * suffix).clamp(-MAX_TANH, MAX_TANH);
                    c2v[lo + t] = 2.0 * p.atanh();
                    suffix *= tanh_buf[t];
                }
            }
            for v in 0..self.n {
                let edges = &self.var_edges[v];
                let total: f64 = -prior[v] + edges.iter().map(|&e| c2v[e]).sum::<f64>();
                for &e in edges {
                    v2c[e] = total - c2v[e];
                }
                hard[v] = (total < 0.0) as u8;
            }
            if self.syndrome_ok(&hard) {
                parity_ok = true;
                break;
            }
        }
        let extrinsic: Vec<f64> = (0..self.n)
            .map(|v| -self.var_edges[v].iter().map(|&e| c2v[e]).sum::<f64>())
            .collect();
        let posterior: Vec<f64> = prior.iter().zip(&extrinsic).map(|(p, e)| p + e).collect();
        let hard_bits: Vec<u8> = posterior.iter().map(|&l| (l > 0.0) as u8).collect();
        if parity_ok {
            parity_ok = self.syndrome_ok(&hard_bits);
        }
        Ok(DecodeOutput {
            hard_bits,
            posterior,
            extrinsic,
            iterations,
            parity_ok,
        })
    }
}

const MAX_TANH: f64 = 1.0 - 1e-15;

#[derive(Clone, Debug)]
pub struct DecodeOutput {
    pub hard_bits: Vec<u8>,
    pub posterior: Vec<f64>,
    pub extrinsic: Vec<f64>,
    pub iterations: usize,
    /// All checks satisfied by `hard_bits`.
    pub parity_ok: bool,
}

/// Reduces the parity-check matrix over GF(2), choosing pivots from the
/// right so that codes with a full-rank trailing parity block come out with
/// the information bits in the leading positions.
fn systematic_encoder(n: usize, checks: &[Vec<usize>]) -> (Vec<usize>, Vec<(usize, Vec<u64>)>) {
    let words = n.div_ceil(64);
    let mut rows: Vec<Vec<u64>> = checks
        .iter()
        .map(|vars| {
            let mut r = vec![0u64; words];
            for &v in vars {
                r[v / 64] ^= 1 << (v % 64);
            }
            r
        })
        .collect();
    let get = |r: &[u64], c: usize| (r[c / 64] >> (c % 64)) & 1 == 1;
    let mut pivots: Vec<usize> = Vec::new();
    let mut rank = 0;
    for col in (0..n).rev() {
        if rank == rows.len() {
            break;
        }
        let Some(p) = (rank..rows.len()).find(|&i| get(&rows[i], col)) else {
            continue;
        };
        rows.swap(rank, p);
        let pivot_row = rows[rank].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i != rank && get(row, col) {
                for (a, b) in row.iter_mut().zip(&pivot_row) {
                    *a ^= b;
                }
            }
        }
        pivots.push(col);
        rank += 1;
    }
    let mut is_pivot = vec![false; n];
    for &p in &pivots {
        is_pivot[p] = true;
    }
    let info_positions: Vec<usize> = (0..n).filter(|&c| !is_pivot[c]).collect();
    let k = info_positions.len();
    let parity_rows = pivots
        .iter()
        .enumerate()
        .map(|(r, &pos)| {
            let mut mask = vec![0u64; k.div_ceil(64)];
            for (idx, &c) in info_positions.iter().enumerate() {
                if get(&rows[r], c) {
                    mask[idx / 64] |= 1 << (idx % 64);
                }
            }
            (pos, mask)
        })
        .collect();
    (info_positions, parity_rows)
}

/// Seeded pseudo-random permutation of a coded block.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Interleaver {
    perm: Vec<usize>,
    seed: u64,
}

impl Interleaver {
    pub fn new(len: usize, seed: u64) -> Self {
        let mut perm: Vec<usize> = (0..len).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        Self { perm, seed }
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    /// `out[i] = x[perm[i]]`.
    pub fn interleave<T: Copy>(&self, x: &[T]) -> Result<Vec<T>, CodingError> {
        self.check_len(x.len())?;
        Ok(self.perm.iter().map(|&p| x[p]).collect())
    }

    /// Inverse of [`Interleaver::interleave`].
    pub fn deinterleave<T: Copy + Default>(&self, y: &[T]) -> Result<Vec<T>, CodingError> {
        self.check_len(y.len())?;
        let mut out = vec![T::default(); y.len()];
        for (i, &p) in self.perm.iter().enumerate() {
            out[p] = y[i];
        }
        Ok(out)
    }

    fn check_len(&self, found: usize) -> Result<(), CodingError> {
        if found != self.perm.len() {
            return Err(CodingError::Length {
                expected: self.perm.len(),
                found,
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn code() -> LdpcCode {
        LdpcCode::builtin("wifi_648_r12").unwrap()
    }

    /// Direct `H c` over GF(2) from the alist row lists, independent of
    /// the decoder's syndrome routine.
    fn parity_from_alist(text: &str, c: &[u8]) -> bool {
        let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
        let dims: Vec<usize> = lines[0]
            .split_whitespace()
            .map(|t| t.parse().unwrap())
            .collect();
        let (n, m) = (dims[0], dims[1]);
        lines[4 + n..4 + n + m].iter().all(|row| {
            row.split_whitespace()
                .map(|t| t.parse::<usize>().unwrap())
                .filter(|&v| v != 0)
                .fold(0u8, |acc, v| acc ^ c[v - 1])
                == 0
        })
    }

    #[test]
    fn builtin_rates() {
        for (name, rate) in [
            ("wifi_648_r12", 0.5),
            ("wifi_648_r23", 2.0 / 3.0),
            ("wifi_648_r34", 0.75),
        ] {
            let c = LdpcCode::builtin(name).unwrap();
            assert_eq!(c.n(), 648);
            assert!((c.rate() - rate).abs() < 1e-12, "{name}");
            // Right-to-left pivoting leaves the info bits in front.
            assert_eq!(
                c.info_positions(),
                (0..c.k()).collect::<Vec<_>>().as_slice()
            );
        }
        assert!(matches!(
            LdpcCode::builtin("nope"),
            Err(CodingError::UnknownCode(_))
        ));
    }

    #[test]
    fn zero_info_gives_zero_codeword() {
        let c = code();
        assert!(c.encode(&vec![0; c.k()]).unwrap().iter().all(|&b| b == 0));
    }

    #[test]
    fn encoder_rejects_wrong_length() {
        let c = code();
        assert_eq!(
            c.encode(&[0; 3]).unwrap_err(),
            CodingError::Length {
                expected: 324,
                found: 3
            }
        );
    }

    #[test]
    fn random_codewords_satisfy_parity_and_linearity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (name, text) in BUILTIN {
            let c = LdpcCode::builtin(name).unwrap();
            let a: Vec<u8> = (0..c.k()).map(|_| rng.random_range(0..2)).collect();
            let b: Vec<u8> = (0..c.k()).map(|_| rng.random_range(0..2)).collect();
            let ca = c.encode(&a).unwrap();
            let cb = c.encode(&b).unwrap();
            assert!(parity_from_alist(text, &ca));
            let sum: Vec<u8> = ca.iter().zip(&cb).map(|(x, y)| x ^ y).collect();
            assert!(parity_from_alist(text, &sum));
            assert_eq!(c.extract_info(&ca), a);
        }
    }

    #[test]
    fn alist_round_trip() {
        let c = code();
        let again = LdpcCode::from_alist(&c.to_alist()).unwrap();
        assert_eq!(again.to_alist(), c.to_alist());
        assert_eq!(again.info_positions(), c.info_positions());
    }

    #[test]
    fn alist_accepts_zero_padding_and_rejects_inconsistency() {
        // Hamming(7,4)-like toy code with zero padding on short lines.
        let text = "7 3\n3 4\n1 1 2 1 2 2 3\n4 4 4\n1 0 0\n2 0 0\n1 2 0\n3 0 0\n1 3 0\n2 3 0\n1 2 3\n1 3 5 7\n2 3 6 7\n4 5 6 7\n";
        let c = LdpcCode::from_alist(text).unwrap();
        assert_eq!((c.n(), c.k()), (7, 4));
        let bad = text.replace("1 3 5 7", "1 3 5 6");
        assert!(matches!(
            LdpcCode::from_alist(&bad),
            Err(CodingError::Alist { .. })
        ));
        assert!(LdpcCode::from_alist("7\n").is_err());
    }

    #[test]
    fn saturated_priors_converge_immediately() {
        let c = code();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let info: Vec<u8> = (0..c.k()).map(|_| rng.random_range(0..2)).collect();
        let cw = c.encode(&info).unwrap();
        let prior: Vec<f64> = cw
            .iter()
            .map(|&b| if b == 1 { 30.0 } else { -30.0 })
            .collect();
        let out = c.decode_siso(&prior, 25).unwrap();
        assert!(out.iterations <= 1);
        assert!(out.parity_ok);
        assert_eq!(out.hard_bits, cw);
        assert!(out.extrinsic.iter().all(|e| e.is_finite()));
    }

    #[test]
    fn zero_priors_stay_symmetric() {
        let c = code();
        let out = c.decode_siso(&vec![0.0; c.n()], 5).unwrap();
        assert!(out.extrinsic.iter().all(|&e| e == 0.0));
        // All-zero is a codeword and ties resolve to zero.
        assert!(out.parity_ok);
    }

    #[test]
    fn decoder_fixes_a_few_flipped_bits() {
        let c = code();
        let mut prior = vec![-4.0; c.n()];
        for i in [3, 100, 250, 400, 600] {
            prior[i] = 1.0;
        }
        let out = c.decode_siso(&prior, 25).unwrap();
        assert!(out.parity_ok);
        assert!(out.hard_bits.iter().all(|&b| b == 0));
        for (i, p) in prior.iter().enumerate() {
            assert_eq!(p + out.extrinsic[i], out.posterior[i]);
        }
    }

    #[test]
    fn interleaver_round_trip_and_seeds() {
        let ilv = Interleaver::new(4, 0);
        let x = [10, 20, 30, 40];
        assert_eq!(ilv.deinterleave(&ilv.interleave(&x).unwrap()).unwrap(), x);
        let a = Interleaver::new(64, 1);
        let b = Interleaver::new(64, 2);
        assert_ne!(a.permutation(), b.permutation());
        assert!(a.interleave(&[1u8; 3]).is_err());
    }

    proptest! {
        #[test]
        fn interleave_is_a_permutation(len in 1usize..300, seed in any::<u64>()) {
            let ilv = Interleaver::new(len, seed);
            let x: Vec<u32> = (0..len as u32).map(|v| v.wrapping_mul(2654435761)).collect();
            let y = ilv.interleave(&x).unwrap();
            let mut xs = x.clone();
            let mut ys = y.clone();
            xs.sort_unstable();
            ys.sort_unstable();
            prop_assert_eq!(xs, ys);
            prop_assert_eq!(ilv.deinterleave(&y).unwrap(), x);
        }
    }
}
