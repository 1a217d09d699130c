//! SVD, Hermitian EVD and the linear solvers.
//!
//! The SVD runs a Householder QR first and then a one-sided (Hestenes)
//! Jacobi iteration on the square triangular factor, so the full left basis
//! comes out directly: the trailing `m - n` columns of the QR factor already
//! span the orthogonal complement of the column space. The Hermitian EVD is
//! a cyclic two-sided Jacobi sweep. Both are accurate to a few ulps relative
//! to the Frobenius norm, which the null-space construction depends on.

use num_complex::Complex64;

use super::{ComplexMatrix, NumericsError};

const MAX_SWEEPS: usize = 100;

/// Full singular value decomposition `A = U diag(S) Vh`.
#[derive(Clone, Debug)]
pub struct SvdResult {
    /// `rows x rows`, unitary.
    pub u: ComplexMatrix,
    /// `min(rows, cols)` singular values, descending.
    pub s: Vec<f64>,
    /// `cols x cols`, unitary; rows are conjugated right singular vectors.
    pub vh: ComplexMatrix,
    /// Number of singular values above the rank tolerance.
    pub rank: usize,
}

impl SvdResult {
    /// Columns `rank..` of `U`: an orthonormal basis of the left null space.
    pub fn left_null_space(&self) -> ComplexMatrix {
        let cols: Vec<usize> = (self.rank..self.u.cols()).collect();
        self.u.select_cols(&cols)
    }

    /// `U diag(S) Vh` restricted to the economy blocks.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let (m, n) = (self.u.rows(), self.vh.cols());
        let mut out = ComplexMatrix::zeros(m, n);
        for (k, &sk) in self.s.iter().enumerate() {
            if sk == 0.0 {
                continue;
            }
            for i in 0..m {
                let uik = self.u[(i, k)] * sk;
                for j in 0..n {
                    out[(i, j)] += uik * self.vh[(k, j)];
                }
            }
        }
        out
    }
}

/// Eigendecomposition `A = Q diag(lambda) Q^H` of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct EvdResult {
    /// Eigenvectors as columns; unitary.
    pub q: ComplexMatrix,
    /// Eigenvalues, descending.
    pub lambda: Vec<f64>,
}

impl EvdResult {
    pub fn reconstruct(&self) -> ComplexMatrix {
        let n = self.q.rows();
        ComplexMatrix::from_fn(n, n, |i, j| {
            (0..n)
                .map(|k| self.q[(i, k)] * self.lambda[k] * self.q[(j, k)].conj())
                .sum()
        })
    }
}

/// The default numerical-rank threshold `max(m, n) * eps * s_max`.
pub fn default_rank_tol(rows: usize, cols: usize, s_max: f64) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON * s_max
}

/// Full SVD. `rank_tol = None` selects [`default_rank_tol`].
pub fn svd(a: &ComplexMatrix, rank_tol: Option<f64>) -> Result<SvdResult, NumericsError> {
    if a.is_empty() {
        return Err(NumericsError::Empty { op: "svd" });
    }
    a.ensure_finite("svd")?;
    let (m, n) = a.shape();
    if m < n {
        // A^H = U' S Vh'  =>  A = Vh'^H S U'^H
        let t = svd_tall(&a.adjoint())?;
        let (u_t, s, vh_t) = t;
        return Ok(finish(vh_t.adjoint(), s, u_t.adjoint(), m, n, rank_tol));
    }
    let (u, s, vh) = svd_tall(a)?;
    Ok(finish(u, s, vh, m, n, rank_tol))
}

fn finish(
    u: ComplexMatrix,
    s: Vec<f64>,
    vh: ComplexMatrix,
    m: usize,
    n: usize,
    rank_tol: Option<f64>,
) -> SvdResult {
    let s_max = s.first().copied().unwrap_or(0.0);
    let tol = rank_tol.unwrap_or_else(|| default_rank_tol(m, n, s_max));
    let rank = s.iter().filter(|&&x| x > tol).count();
    SvdResult { u, s, vh, rank }
}

/// SVD of a matrix with `rows >= cols`. Returns `(U, S, Vh)`.
fn svd_tall(a: &ComplexMatrix) -> Result<(ComplexMatrix, Vec<f64>, ComplexMatrix), NumericsError> {
    let (m, n) = a.shape();
    let (q, r) = householder_qr(a);

    // One-sided Jacobi on the n x n triangular factor, columns stored as rows
    // of `w` for contiguous access.
    let mut w = r.transpose();
    let mut v = ComplexMatrix::identity(n);
    let tol = f64::EPSILON * n as f64;
    let mut converged = n < 2;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for p in 0..n - 1 {
            for q_idx in p + 1..n {
                let (alpha, beta, gamma) = {
                    let wp = w.row(p);
                    let wq = w.row(q_idx);
                    let mut alpha = 0.0;
                    let mut beta = 0.0;
                    let mut gamma = Complex64::new(0.0, 0.0);
                    for (x, y) in wp.iter().zip(wq) {
                        alpha += x.norm_sqr();
                        beta += y.norm_sqr();
                        gamma += x.conj() * y;
                    }
                    (alpha, beta, gamma)
                };
                let g = gamma.norm();
                if g == 0.0 || g <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let (c, s, phase) = jacobi_rotation(alpha, beta, gamma);
                rotate_rows(&mut w, p, q_idx, c, s, phase);
                rotate_rows_of_cols(&mut v, p, q_idx, c, s, phase);
            }
        }
        if !rotated {
            converged = true;
        }
    }
    if !converged {
        return Err(NumericsError::NoConvergence {
            op: "svd",
            rows: m,
            cols: n,
        });
    }

    let norms: Vec<f64> = (0..n)
        .map(|j| w.row(j).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let s: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let s_max = s[0];

    // Left singular vectors of R; columns with negligible singular value are
    // completed to an orthonormal basis.
    let negligible = n as f64 * f64::EPSILON * s_max;
    let mut ur: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    for &j in &order {
        if norms[j] > negligible && norms[j] > 0.0 {
            ur.push(w.row(j).iter().map(|z| z / norms[j]).collect());
        } else {
            ur.push(Vec::new());
        }
    }
    orthonormal_completion(&mut ur, n);

    let mut u_small = ComplexMatrix::identity(m);
    for (k, col) in ur.iter().enumerate() {
        for i in 0..n {
            u_small[(i, k)] = col[i];
        }
    }
    let u = &q * &u_small;

    let mut vh = ComplexMatrix::zeros(n, n);
    for (k, &j) in order.iter().enumerate() {
        for i in 0..n {
            vh[(k, i)] = v[(i, j)].conj();
        }
    }
    Ok((u, s, vh))
}

/// Re-orthonormalizes `cols` by two passes of modified Gram-Schmidt. Empty
/// entries are filled with the canonical basis vector that keeps the largest
/// residual after projection.
fn orthonormal_completion(cols: &mut [Vec<Complex64>], dim: usize) {
    fn project_out(x: &mut [Complex64], basis: &[Vec<Complex64>]) -> f64 {
        for _ in 0..2 {
            for b in basis {
                let proj: Complex64 = b.iter().zip(x.iter()).map(|(p, xi)| p.conj() * xi).sum();
                for (xi, p) in x.iter_mut().zip(b) {
                    *xi -= proj * p;
                }
            }
        }
        x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    for k in 0..cols.len() {
        let (done, rest) = cols.split_at_mut(k);
        let current = &mut rest[0];
        if !current.is_empty() {
            let mut x = current.clone();
            let norm = project_out(&mut x, done);
            if norm > 1e-8 {
                *current = x.into_iter().map(|z| z / norm).collect();
                continue;
            }
        }
        let mut best: Option<(f64, Vec<Complex64>)> = None;
        for c in 0..dim {
            let mut e = vec![Complex64::new(0.0, 0.0); dim];
            e[c] = Complex64::new(1.0, 0.0);
            let norm = project_out(&mut e, done);
            if best.as_ref().is_none_or(|(b, _)| norm > *b) {
                best = Some((norm, e));
            }
        }
        let (norm, e) = best.expect("dim >= 1");
        *current = e.into_iter().map(|z| z / norm).collect();
    }
}

/// Rotation parameters that zero the off-diagonal of the 2x2 Hermitian
/// `[[alpha, gamma], [conj(gamma), beta]]` under `R^H G R` with
/// `R = [[c, s e^{i phi}], [-s e^{-i phi}, c]]`.
fn jacobi_rotation(alpha: f64, beta: f64, gamma: Complex64) -> (f64, f64, Complex64) {
    let g = gamma.norm();
    let phase = gamma / g;
    let zeta = (beta - alpha) / (2.0 * g);
    let t = if zeta >= 0.0 {
        1.0 / (zeta + (1.0 + zeta * zeta).sqrt())
    } else {
        -1.0 / (-zeta + (1.0 + zeta * zeta).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    (c, c * t, phase)
}

/// Applies `[x_p, x_q] <- [x_p, x_q] R` where `x_p, x_q` are rows `p, q` of
/// `w` viewed as vectors.
fn rotate_rows(w: &mut ComplexMatrix, p: usize, q: usize, c: f64, s: f64, phase: Complex64) {
    let n = w.cols();
    for k in 0..n {
        let xp = w[(p, k)];
        let xq = w[(q, k)];
        w[(p, k)] = xp * c - phase.conj() * xq * s;
        w[(q, k)] = phase * xp * s + xq * c;
    }
}

/// Applies `V <- V R` on columns `p, q`.
fn rotate_rows_of_cols(
    v: &mut ComplexMatrix,
    p: usize,
    q: usize,
    c: f64,
    s: f64,
    phase: Complex64,
) {
    for i in 0..v.rows() {
        let xp = v[(i, p)];
        let xq = v[(i, q)];
        v[(i, p)] = xp * c - phase.conj() * xq * s;
        v[(i, q)] = phase * xp * s + xq * c;
    }
}

/// Householder QR with full `Q` (`m x m`) and square `R` (`n x n`, the top
/// block of the triangular factor). Requires `m >= n`.
fn householder_qr(a: &ComplexMatrix) -> (ComplexMatrix, ComplexMatrix) {
    let (m, n) = a.shape();
    let mut r = a.clone();
    let mut reflectors: Vec<(usize, Vec<Complex64>)> = Vec::with_capacity(n);
    debug_assert!(m >= n);
    for k in 0..n {
        let norm_x = (k..m).map(|i| r[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        if norm_x == 0.0 {
            continue;
        }
        let x0 = r[(k, k)];
        let phase = if x0.norm() == 0.0 {
            Complex64::new(1.0, 0.0)
        } else {
            x0 / x0.norm()
        };
        let alpha = -phase * norm_x;
        let mut v: Vec<Complex64> = (k..m).map(|i| r[(i, k)]).collect();
        v[0] -= alpha;
        let vnorm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            continue;
        }
        for z in &mut v {
            *z /= vnorm;
        }
        // R <- (I - 2 v v^H) R on rows k.., columns k..
        for j in k..n {
            let dot: Complex64 = v
                .iter()
                .enumerate()
                .map(|(t, vi)| vi.conj() * r[(k + t, j)])
                .sum();
            for (t, vi) in v.iter().enumerate() {
                r[(k + t, j)] -= vi * dot * 2.0;
            }
        }
        for i in k + 1..m {
            r[(i, k)] = Complex64::new(0.0, 0.0);
        }
        reflectors.push((k, v));
    }
    // Q = H_0 H_1 ... applied to the identity from the right-most reflector.
    let mut q = ComplexMatrix::identity(m);
    for (k, v) in reflectors.iter().rev() {
        for j in 0..m {
            let dot: Complex64 = v
                .iter()
                .enumerate()
                .map(|(t, vi)| vi.conj() * q[(k + t, j)])
                .sum();
            if dot.re == 0.0 && dot.im == 0.0 {
                continue;
            }
            for (t, vi) in v.iter().enumerate() {
                q[(k + t, j)] -= vi * dot * 2.0;
            }
        }
    }
    (q, r.block(0, 0, n, n))
}

/// Hermitian eigendecomposition by cyclic Jacobi.
///
/// The input is symmetrized as `(A + A^H) / 2` after checking that the
/// Hermitian defect is within `1e-10` of `||A||_F`.
pub fn hermitian_evd(a: &ComplexMatrix) -> Result<EvdResult, NumericsError> {
    if a.is_empty() {
        return Err(NumericsError::Empty {
            op: "hermitian_evd",
        });
    }
    if !a.is_square() {
        return Err(NumericsError::NotSquare {
            op: "hermitian_evd",
            shape: a.shape(),
        });
    }
    a.ensure_finite("hermitian_evd")?;
    let fro = a.frobenius_norm();
    let defect = a.hermitian_defect();
    let tol = 1e-10 * fro;
    if defect > tol {
        return Err(NumericsError::NotHermitian { defect, tol });
    }
    let n = a.rows();
    let mut h = a.hermitian_part();
    for i in 0..n {
        h[(i, i)] = Complex64::new(h[(i, i)].re, 0.0);
    }
    let mut v = ComplexMatrix::identity(n);
    let threshold = f64::EPSILON * fro / n as f64;
    let mut converged = n < 2;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let gamma = h[(p, q)];
                if gamma.norm() <= threshold {
                    continue;
                }
                rotated = true;
                let (c, s, phase) = jacobi_rotation(h[(p, p)].re, h[(q, q)].re, gamma);
                // H <- H R (columns p, q)
                rotate_rows_of_cols(&mut h, p, q, c, s, phase);
                // H <- R^H H (rows p, q)
                for k in 0..n {
                    let xp = h[(p, k)];
                    let xq = h[(q, k)];
                    h[(p, k)] = xp * c - phase * xq * s;
                    h[(q, k)] = phase.conj() * xp * s + xq * c;
                }
                h[(p, q)] = Complex64::new(0.0, 0.0);
                h[(q, p)] = Complex64::new(0.0, 0.0);
                h[(p, p)] = Complex64::new(h[(p, p)].re, 0.0);
                h[(q, q)] = Complex64::new(h[(q, q)].re, 0.0);
                rotate_rows_of_cols(&mut v, p, q, c, s, phase);
            }
        }
        if !rotated {
            converged = true;
        }
    }
    if !converged {
        return Err(NumericsError::NoConvergence {
            op: "hermitian_evd",
            rows: n,
            cols: n,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| h[(j, j)].re.total_cmp(&h[(i, i)].re));
    let lambda = order.iter().map(|&j| h[(j, j)].re).collect();
    let q = v.select_cols(&order);
    Ok(EvdResult { q, lambda })
}

/// Solves `A X = B` for Hermitian positive definite `A` by Cholesky.
///
/// Fails when a pivot drops to `1e-12 * trace(A) / n` or below; Cholesky
/// pivots bound the smallest eigenvalue from above, so this rejects every
/// matrix whose minimum eigenvalue is under that threshold and no more.
pub fn hermitian_solve(
    a: &ComplexMatrix,
    b: &ComplexMatrix,
) -> Result<ComplexMatrix, NumericsError> {
    let l = cholesky(a)?;
    if b.rows() != a.rows() {
        return Err(NumericsError::DimensionMismatch {
            op: "hermitian_solve",
            expected: (a.rows(), b.cols()),
            found: b.shape(),
        });
    }
    b.ensure_finite("hermitian_solve")?;
    let n = a.rows();
    let mut x = b.clone();
    for col in 0..b.cols() {
        // L y = b
        for i in 0..n {
            let mut acc = x[(i, col)];
            for k in 0..i {
                acc -= l[(i, k)] * x[(k, col)];
            }
            x[(i, col)] = acc / l[(i, i)].re;
        }
        // L^H x = y
        for i in (0..n).rev() {
            let mut acc = x[(i, col)];
            for k in i + 1..n {
                acc -= l[(k, i)].conj() * x[(k, col)];
            }
            x[(i, col)] = acc / l[(i, i)].re;
        }
    }
    Ok(x)
}

fn cholesky(a: &ComplexMatrix) -> Result<ComplexMatrix, NumericsError> {
    if a.is_empty() {
        return Err(NumericsError::Empty { op: "cholesky" });
    }
    if !a.is_square() {
        return Err(NumericsError::NotSquare {
            op: "cholesky",
            shape: a.shape(),
        });
    }
    a.ensure_finite("cholesky")?;
    let n = a.rows();
    let trace = a.trace().re;
    let threshold = 1e-12 * trace / n as f64;
    if trace <= 0.0 {
        return Err(NumericsError::NotPositiveDefinite {
            pivot: 0,
            value: a[(0, 0)].re,
            threshold,
        });
    }
    let mut l = ComplexMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if d <= threshold || !d.is_finite() {
            return Err(NumericsError::NotPositiveDefinite {
                pivot: j,
                value: d,
                threshold,
            });
        }
        let djj = d.sqrt();
        l[(j, j)] = Complex64::new(djj, 0.0);
        for i in j + 1..n {
            let mut acc = a[(i, j)];
            for k in 0..j {
                acc -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = acc / djj;
        }
    }
    Ok(l)
}

/// LU factorization with partial pivoting for general square systems.
#[derive(Clone, Debug)]
pub struct LuFactors {
    lu: ComplexMatrix,
    perm: Vec<usize>,
}

impl LuFactors {
    pub fn new(a: &ComplexMatrix) -> Result<Self, NumericsError> {
        if !a.is_square() || a.is_empty() {
            return Err(NumericsError::NotSquare {
                op: "lu",
                shape: a.shape(),
            });
        }
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.max_abs();
        for k in 0..n {
            let mut piv = k;
            let mut best = lu[(k, k)].norm();
            for i in k + 1..n {
                let mag = lu[(i, k)].norm();
                if mag > best {
                    best = mag;
                    piv = i;
                }
            }
            if best <= f64::EPSILON * scale * 1e-3 || best == 0.0 {
                return Err(NumericsError::Singular { pivot: k });
            }
            if piv != k {
                perm.swap(piv, k);
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(piv, j)];
                    lu[(piv, j)] = tmp;
                }
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / pivot;
                lu[(i, k)] = f;
                if f.re == 0.0 && f.im == 0.0 {
                    continue;
                }
                for j in k + 1..n {
                    let u = lu[(k, j)];
                    lu[(i, j)] -= f * u;
                }
            }
        }
        Ok(Self { lu, perm })
    }

    /// Solves `A x = b` in place.
    pub fn solve_vec(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.lu.rows();
        let mut x: Vec<Complex64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = self.lu.row(i);
            let mut acc = x[i];
            for k in 0..i {
                acc -= row[k] * x[k];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let row = self.lu.row(i);
            let mut acc = x[i];
            for k in i + 1..n {
                acc -= row[k] * x[k];
            }
            x[i] = acc / row[i];
        }
        x
    }

    pub fn solve(&self, b: &ComplexMatrix) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(b.rows(), b.cols());
        for j in 0..b.cols() {
            out.set_col(j, &self.solve_vec(&b.col(j)));
        }
        out
    }
}
