//! Closed-form persistence thresholds.
//!
//! For coupling strength `alpha` and mismatch amplitude `delta` the
//! synchronization manifold persists when
//!
//! ```text
//! alpha > eta / (lambda2 gamma)
//! delta < (lambda2 gamma - eta / alpha) / (K ||L||)
//! ```
//!
//! with transverse decay rate `nu = alpha (lambda2 gamma - delta K ||L||) - eta`.
//! The mismatch enters the vector field multiplied by `alpha`, so `nu`
//! vanishes exactly on the `delta` threshold.
//! The constants `eta` and `K` have no constructive formula; they are
//! either supplied or fitted from a measured tongue boundary
//! `delta* = c1 - c2 / alpha`.

use crate::error::{Error, Result};
use crate::spectra::SpectralSummary;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConstantsSource {
    Config,
    Fitted { residual_rms: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DichotomyConstants {
    pub eta: f64,
    pub k: f64,
    pub source: ConstantsSource,
}

impl DichotomyConstants {
    pub fn new(eta: f64, k: f64) -> Result<Self> {
        let c = Self { eta, k, source: ConstantsSource::Config };
        c.validate()?;
        Ok(c)
    }

    fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) || !(self.k > 0.0 && self.k.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "eta and K must be positive, got eta = {}, K = {}",
                self.eta, self.k
            )));
        }
        Ok(())
    }

    pub fn source_label(&self) -> &'static str {
        match self.source {
            ConstantsSource::Config => "config",
            ConstantsSource::Fitted { .. } => "fitted",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport {
    pub lambda2: f64,
    pub opnorm: f64,
    pub gamma: f64,
    pub constants: DichotomyConstants,
    /// `eta / (lambda2 gamma)`.
    pub alpha_threshold: f64,
}

impl BoundReport {
    /// `(lambda2 gamma - eta / alpha) / (K ||L||)`; negative below the
    /// coupling threshold.
    pub fn delta_threshold(&self, alpha: f64) -> f64 {
        (self.lambda2 * self.gamma - self.constants.eta / alpha) / (self.constants.k * self.opnorm)
    }

    pub fn nu(&self, alpha: f64, delta: f64) -> f64 {
        alpha * (self.lambda2 * self.gamma - delta * self.constants.k * self.opnorm) - self.constants.eta
    }

    /// Asymptote of the boundary, `lambda2 gamma / (K ||L||)`.
    pub fn c1(&self) -> f64 {
        self.lambda2 * self.gamma / (self.constants.k * self.opnorm)
    }

    /// `eta / (K ||L||)`.
    pub fn c2(&self) -> f64 {
        self.constants.eta / (self.constants.k * self.opnorm)
    }
}

pub fn evaluate_bounds(lambda2: f64, opnorm: f64, gamma: f64, constants: DichotomyConstants) -> Result<BoundReport> {
    for (name, v) in [("lambda2", lambda2), ("opnorm", opnorm), ("gamma", gamma)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
        }
    }
    constants.validate()?;
    Ok(BoundReport { lambda2, opnorm, gamma, constants, alpha_threshold: constants.eta / (lambda2 * gamma) })
}

pub fn evaluate_for_summary(
    summary: &SpectralSummary,
    gamma: f64,
    constants: DichotomyConstants,
) -> Result<BoundReport> {
    evaluate_bounds(summary.lambda2, summary.opnorm, gamma, constants)
}

/// Least-squares fit of `delta* = c1 - c2 / alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryFit {
    pub c1: f64,
    pub c2: f64,
    pub residual_rms: f64,
    /// Coefficient of determination of the fit.
    pub r_squared: f64,
    pub points: usize,
}

impl BoundaryFit {
    /// Zero crossing `alpha = c2 / c1` of the fitted boundary.
    pub fn alpha_zero(&self) -> f64 {
        self.c2 / self.c1
    }

    /// Backs out `K = lambda2 gamma / (c1 ||L||)` and `eta = c2 K ||L||`.
    pub fn constants(&self, lambda2: f64, opnorm: f64, gamma: f64) -> Result<DichotomyConstants> {
        if !(self.c1 > 0.0) || !(self.c2 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "fitted boundary must have c1, c2 > 0 to imply constants, got c1 = {}, c2 = {}",
                self.c1, self.c2
            )));
        }
        let k = lambda2 * gamma / (self.c1 * opnorm);
        let eta = self.c2 * k * opnorm;
        let c = DichotomyConstants { eta, k, source: ConstantsSource::Fitted { residual_rms: self.residual_rms } };
        c.validate()?;
        Ok(c)
    }
}

/// Fits `(alpha, delta*)` boundary points; needs at least two distinct
/// `alpha` values (two points interpolate exactly).
pub fn fit_boundary(points: &[(f64, f64)]) -> Result<BoundaryFit> {
    if points.len() < 2 {
        return Err(Error::RankDeficient(format!("need at least 2 boundary points, got {}", points.len())));
    }
    if points.iter().any(|&(a, d)| !(a > 0.0) || !a.is_finite() || !d.is_finite()) {
        return Err(Error::InvalidParameter("boundary points need finite delta and alpha > 0".into()));
    }
    // regress delta on u = 1/alpha: delta = c1 + s u, c2 = -s
    let m = points.len() as f64;
    let mean_u = points.iter().map(|&(a, _)| 1.0 / a).sum::<f64>() / m;
    let mean_d = points.iter().map(|&(_, d)| d).sum::<f64>() / m;
    let (mut suu, mut sud, mut sdd) = (0.0, 0.0, 0.0);
    for &(a, d) in points {
        let du = 1.0 / a - mean_u;
        let dd = d - mean_d;
        suu += du * du;
        sud += du * dd;
        sdd += dd * dd;
    }
    if suu <= 1e-14 * mean_u.abs().max(1.0).powi(2) * m {
        return Err(Error::RankDeficient("all boundary points share the same alpha".into()));
    }
    let slope = sud / suu;
    let c1 = mean_d - slope * mean_u;
    let c2 = -slope;
    let sse: f64 = points.iter().map(|&(a, d)| (d - (c1 - c2 / a)).powi(2)).sum();
    let r_squared = if sdd > 0.0 { 1.0 - sse / sdd } else { 1.0 };
    Ok(BoundaryFit { c1, c2, residual_rms: (sse / m).sqrt(), r_squared, points: points.len() })
}

/// Fits the boundary and converts it to dichotomy constants in one go.
pub fn fit_constants(
    points: &[(f64, f64)],
    lambda2: f64,
    opnorm: f64,
    gamma: f64,
) -> Result<(DichotomyConstants, BoundaryFit)> {
    let fit = fit_boundary(points)?;
    Ok((fit.constants(lambda2, opnorm, gamma)?, fit))
}

/// Large-`alpha`, large-`n` reductions of the persistence condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CorollaryInputs {
    /// Homogeneous (Erdős–Rényi): `delta < gamma / K`.
    ErdosRenyi { gamma: f64, k: f64 },
    /// Heterogeneous (Barabási–Albert): `delta < K1 n^{-1/2}` with
    /// `K1 = gamma m / (2 mu K)`, `mu` the limit of `g_max / sqrt(n)` and
    /// `m` a bound on `lambda2`.
    BarabasiAlbert { n: usize, mu: f64, gamma: f64, k: f64, m_tilde: f64 },
}

pub fn corollary_bound(inputs: CorollaryInputs) -> Result<f64> {
    let positive = |name: &str, v: f64| {
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
        }
    };
    match inputs {
        CorollaryInputs::ErdosRenyi { gamma, k } => Ok(positive("gamma", gamma)? / positive("K", k)?),
        CorollaryInputs::BarabasiAlbert { n, mu, gamma, k, m_tilde } => {
            if n == 0 {
                return Err(Error::InvalidParameter("n must be >= 1".into()));
            }
            let k1 = positive("gamma", gamma)? * positive("m_tilde", m_tilde)?
                / (2.0 * positive("mu", mu)? * positive("K", k)?);
            Ok(k1 / (n as f64).sqrt())
        }
    }
}

/// Default `m` for the Barabási–Albert bound: the Fiedler value
/// `(n / (n - 1)) m0`, since the minimum degree of the graph is `m0`.
pub fn default_m_tilde(n: usize, m0: usize) -> f64 {
    n as f64 / (n as f64 - 1.0) * m0 as f64
}

/// Frequency above which `|| int P(omega t) dt || <= c` for
/// `P = delta cos(omega t) R`, `||R|| = 1`: `omega0 = 2 delta / c`.
pub fn fast_omega0(delta: f64, c: f64) -> Result<f64> {
    if !(c > 0.0) {
        return Err(Error::InvalidParameter(format!("c must be > 0, got {c}")));
    }
    if !(delta >= 0.0) {
        return Err(Error::InvalidParameter(format!("delta must be >= 0, got {delta}")));
    }
    Ok(2.0 * delta / c)
}

/// `2 |delta| / omega`, bounding the window integral of the oscillating
/// perturbation over any `[t1, t2]`.
pub fn fast_integral_bound(delta: f64, omega: f64, t1: f64, t2: f64) -> Result<f64> {
    if !(omega > 0.0) {
        return Err(Error::InvalidParameter(format!("omega must be > 0, got {omega}")));
    }
    if !(t2 >= t1) {
        return Err(Error::InvalidParameter(format!("need t2 >= t1, got [{t1}, {t2}]")));
    }
    Ok(2.0 * delta.abs() / omega)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper_like_report() -> BoundReport {
        // lambda2 = ||L|| = 2 for a single edge; c1 = 8, c2 = 4
        let fit = fit_boundary(&[(1.0, 4.0), (2.0, 6.0), (4.0, 7.0)]).unwrap();
        let consts = fit.constants(2.0, 2.0, 1.0).unwrap();
        evaluate_bounds(2.0, 2.0, 1.0, consts).unwrap()
    }

    #[test]
    fn implied_constants_for_two_node_boundary() {
        let r = paper_like_report();
        assert!((r.constants.k - 0.125).abs() < 1e-12);
        assert!((r.constants.eta - 1.0).abs() < 1e-12);
        assert!((r.alpha_threshold - 0.5).abs() < 1e-12);
        assert!((r.delta_threshold(1.0) - 4.0).abs() < 1e-12);
        assert!(r.delta_threshold(r.alpha_threshold).abs() < 1e-12);
        assert_eq!(r.constants.source_label(), "fitted");
    }

    #[test]
    fn noiseless_fit_recovers_coefficients() {
        let pts: Vec<_> = [0.6, 0.8, 1.0, 1.5, 2.0, 3.0].iter().map(|&a| (a, 8.0 - 4.0 / a)).collect();
        let f = fit_boundary(&pts).unwrap();
        assert!((f.c1 - 8.0).abs() < 1e-10 && (f.c2 - 4.0).abs() < 1e-10);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        assert!((f.alpha_zero() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn two_points_interpolate() {
        let f = fit_boundary(&[(1.0, 4.0), (2.0, 6.0)]).unwrap();
        assert!((f.c1 - 8.0).abs() < 1e-12 && (f.c2 - 4.0).abs() < 1e-12);
        assert!(f.residual_rms < 1e-12);
    }

    #[test]
    fn equal_alphas_are_rank_deficient() {
        assert!(matches!(fit_boundary(&[(1.0, 4.0), (1.0, 5.0), (1.0, 6.0)]), Err(Error::RankDeficient(_))));
        assert!(fit_boundary(&[(1.0, 4.0)]).is_err());
    }

    #[test]
    fn rejects_nonpositive_inputs() {
        let c = DichotomyConstants::new(1.0, 0.5).unwrap();
        assert!(evaluate_bounds(0.0, 2.0, 1.0, c).is_err());
        assert!(evaluate_bounds(2.0, -1.0, 1.0, c).is_err());
        assert!(evaluate_bounds(2.0, 2.0, 0.0, c).is_err());
        assert!(DichotomyConstants::new(0.0, 1.0).is_err());
        assert!(DichotomyConstants::new(1.0, -1.0).is_err());
    }

    #[test]
    fn corollary_values() {
        let er = corollary_bound(CorollaryInputs::ErdosRenyi { gamma: 1.0, k: 0.125 }).unwrap();
        assert!((er - 8.0).abs() < 1e-12);
        let ba = |n| {
            corollary_bound(CorollaryInputs::BarabasiAlbert { n, mu: 1.3, gamma: 1.0, k: 0.125, m_tilde: 2.0 }).unwrap()
        };
        assert_eq!(ba(100) / ba(400), 2.0);
        assert!(corollary_bound(CorollaryInputs::ErdosRenyi { gamma: 1.0, k: 0.0 }).is_err());
        assert!((default_m_tilde(101, 2) - 2.02).abs() < 1e-12);
    }

    #[test]
    fn fast_oscillation_formulas() {
        assert!((fast_omega0(5.0, 0.01).unwrap() - 1000.0).abs() < 1e-9);
        assert_eq!(fast_omega0(0.0, 0.3).unwrap(), 0.0);
        assert!(fast_omega0(1.0, 0.0).is_err());
        assert_eq!(fast_integral_bound(5.0, 1000.0, 0.0, 1.0).unwrap(), 0.01);
        assert!(fast_integral_bound(5.0, 0.0, 0.0, 1.0).is_err());
    }
}
