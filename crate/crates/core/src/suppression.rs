//! Null-space interference suppression.
//!
//! For user `k` the combiner `W_k` takes `antennas_per_rau` orthonormal
//! vectors from the left null space of the interferer channel
//! `[G_1 .. G_{k-1} G_{k+1} .. G_K]`, so `W_k G_l = 0` for every `l != k`
//! and the multi-user problem splits into `K` independent single-user ones.

use rand::seq::index::sample;

use crate::error::{Error, Result};
use crate::numerics::{svd, ComplexMatrix};
use crate::rng;
use crate::system_model::{ChannelRealization, RowSelection};

#[derive(Clone, Debug)]
pub struct SuppressionSet {
    /// `W_k`: `rows x receive_antennas`, orthonormal rows.
    pub w: Vec<ComplexMatrix>,
    /// `W_k H_k`.
    pub h_eff: Vec<ComplexMatrix>,
    /// Covariance of the suppressed noise plus residual interference.
    pub sigma: Vec<ComplexMatrix>,
    /// `max_{l != k} ||W_k G_l||_F`.
    pub residual_leakage: Vec<f64>,
    /// Numerical rank of each interferer channel.
    pub interferer_rank: Vec<usize>,
}

/// Builds `W_k`, `W_k H_k` and the noise covariances for every user.
/// `rows` is the number of combiner outputs per user (the per-RAU antenna
/// count in the standard configuration).
pub fn build_suppression(
    chan: &ChannelRealization,
    rows: usize,
    selection: RowSelection,
    noise_variance: f64,
) -> Result<SuppressionSet> {
    let users = chan.users();
    if users == 0 {
        return Err(Error::Config("no users".into()));
    }
    let n_rx = chan.g[0].rows();
    let mut set = SuppressionSet {
        w: Vec::with_capacity(users),
        h_eff: Vec::with_capacity(users),
        sigma: Vec::with_capacity(users),
        residual_leakage: Vec::with_capacity(users),
        interferer_rank: Vec::with_capacity(users),
    };
    for k in 0..users {
        let (null, rank) = if users == 1 {
            (ComplexMatrix::identity(n_rx), 0)
        } else {
            let d = svd(&chan.interferers(k), None)?;
            (d.left_null_space(), d.rank)
        };
        let available = null.cols();
        if available < rows {
            return Err(Error::InsufficientNullSpace {
                user: k,
                rank,
                available,
                required: rows,
            });
        }
        let picked: Vec<usize> = match selection {
            RowSelection::First => (0..rows).collect(),
            RowSelection::Random { seed } => {
                let mut r = rng::stream(seed, &[rng::purpose::ROW_SELECTION, k as u64]);
                let mut idx = sample(&mut r, available, rows).into_vec();
                idx.sort_unstable();
                idx
            }
        };
        let w = null.select_cols(&picked).adjoint();
        let leakage = (0..users)
            .filter(|&l| l != k)
            .map(|l| (&w * &chan.g[l]).frobenius_norm())
            .fold(0.0, f64::max);
        set.sigma
            .push(noise_covariance(chan, k, &w, noise_variance)?);
        set.h_eff.push(&w * &chan.effective[k]);
        set.w.push(w);
        set.residual_leakage.push(leakage);
        set.interferer_rank.push(rank);
    }
    Ok(set)
}

/// `W_k (sum_{l != k} H_l H_l^H) W_k^H + sigma2 I`, Hermitian-symmetrized.
/// The interference term vanishes under perfect channel knowledge but is
/// kept so the covariance stays right for any combiner.
pub fn noise_covariance(
    chan: &ChannelRealization,
    user: usize,
    w: &ComplexMatrix,
    noise_variance: f64,
) -> Result<ComplexMatrix> {
    if !(noise_variance > 0.0 && noise_variance.is_finite()) {
        return Err(Error::NoiseVariance(noise_variance));
    }
    if w.cols() != chan.g[0].rows() {
        return Err(Error::Dimension {
            what: "suppression matrix",
            expected: (w.rows(), chan.g[0].rows()),
            found: w.shape(),
        });
    }
    let mut sigma = ComplexMatrix::identity(w.rows()).scale(noise_variance);
    for (l, h) in chan.effective.iter().enumerate() {
        if l == user {
            continue;
        }
        let wh = w * h;
        sigma = &sigma + &(&wh * &wh.adjoint());
    }
    Ok(sigma.hermitian_part())
}

/// `W_k y`.
pub fn apply_suppression(w: &ComplexMatrix, y: &ComplexMatrix) -> Result<ComplexMatrix> {
    if w.cols() != y.rows() {
        return Err(Error::Dimension {
            what: "received block",
            expected: (w.cols(), y.cols()),
            found: y.shape(),
        });
    }
    Ok(w * y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{complex_gaussian, hermitian_evd};
    use crate::system_model::{draw_channel, PrecoderMode, SystemConfig};

    fn small_cfg() -> SystemConfig {
        SystemConfig {
            antennas_per_rau: 2,
            antennas_per_user: 2,
            streams_per_user: vec![2, 2],
            block_len: 324,
            ..SystemConfig::desk()
        }
    }

    fn assert_orthonormal_rows(w: &ComplexMatrix) {
        let gram = w * &w.adjoint();
        assert!((&gram - &ComplexMatrix::identity(w.rows())).max_abs() < 1e-10);
    }

    #[test]
    fn single_user_takes_identity_rows() {
        let g = complex_gaussian(4, 2, 1.0, &mut rng::stream(1, &[]));
        let chan = ChannelRealization::from_channels(vec![g], &[2], PrecoderMode::Columns).unwrap();
        let set = build_suppression(&chan, 2, RowSelection::First, 1.0).unwrap();
        assert_eq!(set.w[0], ComplexMatrix::identity(4).block(0, 0, 2, 4));
        assert_eq!(set.sigma[0], ComplexMatrix::identity(2));
    }

    #[test]
    fn interferers_are_nulled() {
        let cfg = small_cfg();
        let mut r = rng::stream(2, &[]);
        for selection in [RowSelection::First, RowSelection::Random { seed: 7 }] {
            let chan = draw_channel(&cfg, &mut r).unwrap();
            let set = build_suppression(&chan, 2, selection, 0.1).unwrap();
            for k in 0..2 {
                assert_orthonormal_rows(&set.w[k]);
                let other = &chan.g[1 - k];
                assert!((&set.w[k] * other).frobenius_norm() < 1e-10);
                assert!(set.residual_leakage[k] < 1e-10);
                assert_eq!(set.interferer_rank[k], 2);
            }
        }
    }

    #[test]
    fn perfect_suppression_leaves_white_noise() {
        let cfg = SystemConfig::desk();
        let chan = draw_channel(&cfg, &mut rng::stream(3, &[])).unwrap();
        let sigma2 = 0.3;
        let set = build_suppression(&chan, 4, RowSelection::First, sigma2).unwrap();
        for s in &set.sigma {
            let white = ComplexMatrix::identity(4).scale(sigma2);
            assert!((s - &white).frobenius_norm() <= 1e-9 * sigma2);
            assert_eq!(s.hermitian_defect(), 0.0);
        }
    }

    #[test]
    fn covariance_is_pd_for_arbitrary_combiners() {
        let cfg = SystemConfig::desk();
        let mut r = rng::stream(4, &[]);
        let chan = draw_channel(&cfg, &mut r).unwrap();
        let w = complex_gaussian(4, 8, 1.0, &mut r);
        let sigma2 = 0.5;
        let s = noise_covariance(&chan, 0, &w, sigma2).unwrap();
        assert!(s.hermitian_defect() < 1e-12);
        let e = hermitian_evd(&s).unwrap();
        assert!(e.lambda.iter().all(|&l| l >= sigma2 * (1.0 - 1e-9)));
        assert!(noise_covariance(&chan, 0, &w, 0.0).is_err());
    }

    #[test]
    fn other_user_signal_vanishes() {
        let cfg = SystemConfig::desk();
        let mut r = rng::stream(5, &[]);
        let chan = draw_channel(&cfg, &mut r).unwrap();
        let set = build_suppression(&chan, 4, RowSelection::First, 1.0).unwrap();
        let s1 = complex_gaussian(2, 16, 1.0, &mut r);
        let y = &chan.effective[1] * &s1;
        let yt = apply_suppression(&set.w[0], &y).unwrap();
        assert!(yt.frobenius_norm() < 1e-9 * y.frobenius_norm());
        let own = apply_suppression(&set.w[1], &y).unwrap();
        assert!((&own - &(&set.h_eff[1] * &s1)).max_abs() < 1e-12);
        assert!(apply_suppression(&set.w[0], &ComplexMatrix::zeros(3, 2)).is_err());
    }

    #[test]
    fn too_small_null_space_is_reported() {
        let mut r = rng::stream(6, &[]);
        let g = vec![
            complex_gaussian(4, 3, 1.0, &mut r),
            complex_gaussian(4, 3, 1.0, &mut r),
        ];
        let chan = ChannelRealization::from_channels(g, &[2, 2], PrecoderMode::Columns).unwrap();
        let err = build_suppression(&chan, 2, RowSelection::First, 1.0).unwrap_err();
        assert!(matches!(
            err,
            Error::InsufficientNullSpace {
                user: 0,
                rank: 3,
                available: 1,
                required: 2
            }
        ));
    }

    #[test]
    fn relabeling_users_permutes_combiners() {
        let cfg = SystemConfig::desk();
        let chan = draw_channel(&cfg, &mut rng::stream(8, &[])).unwrap();
        let swapped = ChannelRealization::from_channels(
            vec![chan.g[1].clone(), chan.g[0].clone()],
            &[2, 2],
            PrecoderMode::Columns,
        )
        .unwrap();
        let a = build_suppression(&chan, 4, RowSelection::First, 1.0).unwrap();
        let b = build_suppression(&swapped, 4, RowSelection::First, 1.0).unwrap();
        assert!((&a.w[0] - &b.w[1]).max_abs() < 1e-12);
        assert!((&a.w[1] - &b.w[0]).max_abs() < 1e-12);
    }
}
