//! One-sided Jacobi singular value decomposition.
//!
//! The factorization is the compact form `a = u * diag(sigma) * v^T` with
//! `k = min(m, n)` columns in both `u` and `v`, singular values sorted
//! descending. Values below `1e-12 * sigma[0]` are clamped to exactly zero so
//! that downstream rank decisions are deterministic; the corresponding
//! columns are completed to an orthonormal set.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Relative off-diagonal tolerance for Jacobi convergence.
const JACOBI_TOL: f64 = 1e-12;
/// Sweep budget; exceeded means a convergence error.
const MAX_SWEEPS: usize = 60;
/// Singular values below this fraction of the largest are clamped to zero.
const SIGMA_CLAMP_REL: f64 = 1e-12;

/// Compact SVD triple with descending, non-negative singular values.
#[derive(Debug, Clone)]
pub struct SvdFactorization {
    u: Tensor,
    sigma: Vec<f64>,
    v: Tensor,
}

impl SvdFactorization {
    /// Left singular vectors, `m x k`.
    pub fn u(&self) -> &Tensor {
        &self.u
    }

    /// Singular values, descending.
    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    /// Right singular vectors, `n x k`.
    pub fn v(&self) -> &Tensor {
        &self.v
    }

    /// Number of singular values, `min(m, n)`.
    pub fn k(&self) -> usize {
        self.sigma.len()
    }

    /// `u * diag(sigma) * v^T`.
    pub fn reconstruct(&self) -> Tensor {
        let (m, k) = (self.u.rows(), self.k());
        let n = self.v.rows();
        let mut us = Tensor::zeros([m, k]);
        for i in 0..m {
            for j in 0..k {
                us.set2(i, j, self.u.get2(i, j) * self.sigma[j]);
            }
        }
        us.matmul(&self.v.transpose()).unwrap_or_else(|_| Tensor::zeros([m, n]))
    }

    /// Split into the rank-`r` factor pair `(w1, w2)` with
    /// `w1 = diag(sigma[..r]) * v[:, ..r]^T` (r x n) and `w2 = u[:, ..r]`
    /// (m x r). Their product `w2 * w1` is the Frobenius-optimal rank-`r`
    /// approximation of the original matrix.
    pub fn truncate(&self, r: usize) -> Result<(Tensor, Tensor)> {
        let k = self.k();
        if r == 0 || r > k {
            return Err(Error::arg(format!(
                "truncation rank {r} outside 1..={k}"
            )));
        }
        let n = self.v.rows();
        let m = self.u.rows();
        let mut w1 = Tensor::zeros([r, n]);
        for i in 0..r {
            for j in 0..n {
                w1.set2(i, j, self.sigma[i] * self.v.get2(j, i));
            }
        }
        let mut w2 = Tensor::zeros([m, r]);
        for i in 0..m {
            for j in 0..r {
                w2.set2(i, j, self.u.get2(i, j));
            }
        }
        Ok((w1, w2))
    }
}

impl Tensor {
    /// Compact SVD of a 2-D tensor via one-sided Jacobi rotations.
    pub fn svd(&self) -> Result<SvdFactorization> {
        if self.rank() != 2 {
            return Err(Error::shape(format!(
                "svd needs a 2-D tensor, got shape {:?}",
                self.shape()
            )));
        }
        if !self.all_finite() {
            return Err(Error::NonFinite("svd input".into()));
        }
        let (m, n) = (self.rows(), self.cols());
        // Jacobi works on the taller orientation; swap factors back after.
        if m < n {
            let f = self.transpose().jacobi_svd()?;
            return Ok(SvdFactorization {
                u: f.v,
                sigma: f.sigma,
                v: f.u,
            });
        }
        self.jacobi_svd()
    }

    /// One-sided Jacobi for m >= n: orthogonalize the columns of a working
    /// copy by plane rotations, accumulating them into V.
    fn jacobi_svd(&self) -> Result<SvdFactorization> {
        let (m, n) = (self.rows(), self.cols());
        let mut a = self.clone();
        let mut v = Tensor::eye(n);

        let mut converged = false;
        for _sweep in 0..MAX_SWEEPS {
            let mut rotated = false;
            for p in 0..n {
                for q in (p + 1)..n {
                    let mut alpha = 0.0;
                    let mut beta = 0.0;
                    let mut gamma = 0.0;
                    for i in 0..m {
                        let ap = a.get2(i, p);
                        let aq = a.get2(i, q);
                        alpha += ap * ap;
                        beta += aq * aq;
                        gamma += ap * aq;
                    }
                    if gamma == 0.0 || alpha == 0.0 || beta == 0.0 {
                        continue;
                    }
                    if gamma.abs() <= JACOBI_TOL * (alpha * beta).sqrt() {
                        continue;
                    }
                    let zeta = (beta - alpha) / (2.0 * gamma);
                    let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = c * t;
                    for i in 0..m {
                        let ap = a.get2(i, p);
                        let aq = a.get2(i, q);
                        a.set2(i, p, c * ap - s * aq);
                        a.set2(i, q, s * ap + c * aq);
                    }
                    for i in 0..n {
                        let vp = v.get2(i, p);
                        let vq = v.get2(i, q);
                        v.set2(i, p, c * vp - s * vq);
                        v.set2(i, q, s * vp + c * vq);
                    }
                    rotated = true;
                }
            }
            if !rotated {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::SvdNoConvergence { sweeps: MAX_SWEEPS });
        }

        // Column norms are the singular values; sort descending.
        let mut order: Vec<usize> = (0..n).collect();
        let norms: Vec<f64> = (0..n)
            .map(|j| (0..m).map(|i| a.get2(i, j).powi(2)).sum::<f64>().sqrt())
            .collect();
        order.sort_by(|&x, &y| norms[y].partial_cmp(&norms[x]).unwrap());

        let clamp = norms[order[0]] * SIGMA_CLAMP_REL;
        let mut sigma = Vec::with_capacity(n);
        let mut u = Tensor::zeros([m, n]);
        let mut v_sorted = Tensor::zeros([n, n]);
        let mut zero_cols = Vec::new();
        for (dst, &src) in order.iter().enumerate() {
            let s = if norms[src] <= clamp { 0.0 } else { norms[src] };
            sigma.push(s);
            for i in 0..n {
                v_sorted.set2(i, dst, v.get2(i, src));
            }
            if s > 0.0 {
                for i in 0..m {
                    u.set2(i, dst, a.get2(i, src) / s);
                }
            } else {
                zero_cols.push(dst);
            }
        }
        if !zero_cols.is_empty() {
            complete_orthonormal(&mut u, &zero_cols);
        }

        Ok(SvdFactorization {
            u,
            sigma,
            v: v_sorted,
        })
    }
}

/// Fill the listed columns of `u` with unit vectors orthogonal to all other
/// columns: project each standard basis vector against the filled columns and
/// keep the one with the largest residual. Keeps the factorization valid when
/// singular values were clamped to zero.
fn complete_orthonormal(u: &mut Tensor, cols: &[usize]) {
    let (m, k) = (u.rows(), u.cols());
    for &col in cols {
        let mut best: Option<(f64, Vec<f64>)> = None;
        for e in 0..m {
            let mut cand = vec![0.0; m];
            cand[e] = 1.0;
            for j in 0..k {
                if j == col {
                    continue;
                }
                // Unfilled columns are all-zero and contribute nothing here.
                let dot: f64 = (0..m).map(|i| cand[i] * u.get2(i, j)).sum();
                if dot != 0.0 {
                    for (i, c) in cand.iter_mut().enumerate() {
                        *c -= dot * u.get2(i, j);
                    }
                }
            }
            let norm2: f64 = cand.iter().map(|x| x * x).sum();
            if best.as_ref().is_none_or(|(b, _)| norm2 > *b) {
                best = Some((norm2, cand));
            }
        }
        let (norm2, cand) = best.expect("m >= 1");
        let norm = norm2.sqrt();
        for (i, c) in cand.iter().enumerate() {
            u.set2(i, col, c / norm);
        }
    }
}
