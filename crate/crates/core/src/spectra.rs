//! Laplacian spectra: a dense cyclic Jacobi eigensolver, the spectral
//! summary consumed by the bounds, and the random-graph asymptotics
//! (Erdős–Rényi algebraic connectivity, Barabási–Albert hub scaling).

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobiOptions {
    /// Stop once the off-diagonal Frobenius norm drops below `tol * ||M||_F`.
    pub tol: f64,
    /// Inputs with `|m_ij - m_ji|` above this are rejected.
    pub symmetry_tol: f64,
    pub max_sweeps: usize,
}

impl Default for JacobiOptions {
    fn default() -> Self {
        Self { tol: 1e-12, symmetry_tol: 1e-12, max_sweeps: 100 }
    }
}

pub fn eigenvalues_symmetric(m: &Matrix) -> Result<Vec<f64>> {
    eigenvalues_symmetric_with(m, JacobiOptions::default())
}

/// All eigenvalues of a real symmetric matrix, ascending, by cyclic Jacobi
/// rotations.
pub fn eigenvalues_symmetric_with(m: &Matrix, opts: JacobiOptions) -> Result<Vec<f64>> {
    if !m.is_square() {
        return Err(Error::InvalidParameter(format!("matrix is {}x{}, not square", m.rows(), m.cols())));
    }
    let asym = m.max_asymmetry();
    if asym > opts.symmetry_tol {
        return Err(Error::NotSymmetric(asym));
    }
    let n = m.rows();
    let mut a = m.as_slice().to_vec();
    let scale = m.norm_frobenius();
    let target = opts.tol * scale;

    for _ in 0..opts.max_sweeps {
        if off_diagonal_norm(&a, n) <= target {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                a[p * n + p] = app - t * apq;
                a[q * n + q] = aqq + t * apq;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for r in 0..n {
                    if r == p || r == q {
                        continue;
                    }
                    let arp = a[r * n + p];
                    let arq = a[r * n + q];
                    let new_rp = c * arp - s * arq;
                    let new_rq = s * arp + c * arq;
                    a[r * n + p] = new_rp;
                    a[p * n + r] = new_rp;
                    a[r * n + q] = new_rq;
                    a[q * n + r] = new_rq;
                }
            }
        }
    }

    let mut eig: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

fn off_diagonal_norm(a: &[f64], n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[i * n + j] * a[i * n + j];
            }
        }
    }
    s.sqrt()
}

/// Spectral quantities of a connected graph's Laplacian.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSummary {
    pub n: usize,
    /// Ascending; the first entry is zero up to round-off.
    pub eigenvalues: Vec<f64>,
    /// Algebraic connectivity.
    pub lambda2: f64,
    /// Max-row-sum norm of `L`, equal to `2 g_max` for simple graphs.
    pub opnorm: f64,
    pub g_min: usize,
    pub g_max: usize,
}

impl SpectralSummary {
    pub fn lambda_max(&self) -> f64 {
        *self.eigenvalues.last().unwrap_or(&0.0)
    }

    /// `(n / (n - 1)) g_min`, an upper bound on `lambda2`.
    pub fn fiedler_bound(&self) -> f64 {
        self.n as f64 / (self.n as f64 - 1.0) * self.g_min as f64
    }
}

pub fn summarize(g: &Graph) -> Result<SpectralSummary> {
    if g.n() < 2 || !g.is_connected() {
        return Err(Error::Lambda2Undefined);
    }
    let l = g.laplacian();
    let eigenvalues = eigenvalues_symmetric(&l)?;
    let lambda2 = eigenvalues[1];
    if lambda2 <= 0.0 {
        return Err(Error::Lambda2Undefined);
    }
    Ok(SpectralSummary {
        n: g.n(),
        lambda2,
        opnorm: l.norm_inf(),
        g_min: g.min_degree(),
        g_max: g.max_degree(),
        eigenvalues,
    })
}

/// Solves `p0 - 1 = a p0 (1 - ln a)` for `a` in `(0, 1)` by bisection.
///
/// The map `a -> a (1 - ln a)` increases from 0 to 1 on `(0, 1]`, so the
/// root is unique and bracketed by `(0, 1)` whenever `p0 > 1`.
pub fn er_a_of_p0(p0: f64) -> Result<f64> {
    if !(p0 > 1.0) || !p0.is_finite() {
        return Err(Error::InvalidParameter(format!("p0 must be > 1, got {p0}")));
    }
    let residual = |a: f64| a * p0 * (1.0 - a.ln()) - (p0 - 1.0);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut mid = 0.5;
    for _ in 0..2000 {
        mid = 0.5 * (lo + hi);
        let r = residual(mid);
        if r == 0.0 || (hi - lo) <= f64::EPSILON * mid {
            break;
        }
        if r < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(mid)
}

/// Predicted `lambda2 / (n p)` for an Erdős–Rényi graph, i.e. `a(p0)` with
/// `p = p0 ln(n) / n`. Returns 0 below the connectivity regime (`p0 <= 1`).
pub fn predicted_ratio_er(n: usize, p: f64) -> f64 {
    let nf = n as f64;
    let p0 = p * nf / nf.ln();
    er_a_of_p0(p0).unwrap_or(0.0)
}

/// `n^{-1/2}`, the size dependence of the tolerable mismatch on
/// Barabási–Albert graphs (hub degree grows like `sqrt(n)`).
pub fn predicted_delta_scale_ba(n: usize) -> f64 {
    (n as f64).powf(-0.5)
}
