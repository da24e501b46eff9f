use crate::error::{Error, Result};
use crate::integrate::Trajectory;

/// Time-averaged synchronization error settings and ensemble protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct SyncErrorConfig {
    /// Transient discarded before averaging.
    pub tau: f64,
    /// End of the averaging window.
    pub horizon: f64,
    pub ensemble_size: usize,
    /// Common initial state; each component gets uniform jitter in `(0, ic_jitter)`.
    pub ic_base: Vec<f64>,
    pub ic_jitter: f64,
    /// `E_a` above this counts as synchronization loss.
    pub loss_threshold: f64,
}

impl SyncErrorConfig {
    pub fn desk_scale() -> Self {
        Self {
            tau: 100.0,
            horizon: 300.0,
            ensemble_size: 5,
            ic_base: vec![-7.0, -10.0, 5.0],
            ic_jitter: 0.1,
            loss_threshold: 10.0,
        }
    }

    pub fn paper_scale() -> Self {
        Self { tau: 1000.0, horizon: 2000.0, ensemble_size: 20, ..Self::desk_scale() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau < self.horizon) || !self.horizon.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "need 0 < tau < T, got tau = {}, T = {}",
                self.tau, self.horizon
            )));
        }
        if self.ensemble_size == 0 {
            return Err(Error::InvalidParameter("ensemble_size must be >= 1".into()));
        }
        if !(self.ic_jitter >= 0.0) {
            return Err(Error::InvalidParameter("ic_jitter must be >= 0".into()));
        }
        if !(self.loss_threshold > 0.0) {
            return Err(Error::InvalidParameter("loss_threshold must be > 0".into()));
        }
        Ok(())
    }

    /// Value recorded for a trajectory that blew up.
    pub fn blow_up_sentinel(&self, attained: f64) -> f64 {
        (10.0 * self.loss_threshold).max(attained)
    }
}

impl Default for SyncErrorConfig {
    fn default() -> Self {
        Self::desk_scale()
    }
}

/// Instantaneous synchronization error of a stacked state of `n` nodes.
///
/// Two nodes: `||x_2 - x_1||_inf`. Larger networks: the node average of
/// `||x_i - xbar||_inf`, with `xbar` the instantaneous mean state.
pub fn instantaneous_error(x: &[f64], n: usize, q: usize) -> f64 {
    if n == 2 {
        return (0..q).map(|a| (x[q + a] - x[a]).abs()).fold(0.0, f64::max);
    }
    let mut mean = vec![0.0; q];
    for i in 0..n {
        for a in 0..q {
            mean[a] += x[i * q + a];
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let total: f64 = (0..n).map(|i| (0..q).map(|a| (x[i * q + a] - mean[a]).abs()).fold(0.0, f64::max)).sum();
    total / n as f64
}

/// Online left-rectangle average of the instantaneous error over
/// `[tau, horizon]`.
#[derive(Debug, Clone)]
pub struct SyncErrorAccumulator {
    n: usize,
    q: usize,
    tau: f64,
    horizon: f64,
    integral: f64,
    prev: Option<(f64, f64)>,
}

impl SyncErrorAccumulator {
    pub fn new(n: usize, q: usize, tau: f64, horizon: f64) -> Result<Self> {
        if !(tau < horizon) {
            return Err(Error::InvalidParameter(format!("need tau < T, got tau = {tau}, T = {horizon}")));
        }
        Ok(Self { n, q, tau, horizon, integral: 0.0, prev: None })
    }

    pub fn observe(&mut self, t: f64, x: &[f64]) {
        self.observe_value(t, instantaneous_error(x, self.n, self.q));
    }

    pub fn observe_value(&mut self, t: f64, e: f64) {
        if let Some((tp, ep)) = self.prev {
            let lo = tp.max(self.tau);
            let hi = t.min(self.horizon);
            if hi > lo {
                self.integral += ep * (hi - lo);
            }
        }
        self.prev = Some((t, e));
    }

    /// Error accumulated so far, normalised by the full window length; a
    /// lower bound on the final value.
    pub fn partial(&self) -> f64 {
        self.integral / (self.horizon - self.tau)
    }
}

/// Time-averaged error of a stored trajectory; blow-ups map to the sentinel.
pub fn sync_error(traj: &Trajectory, n: usize, q: usize, cfg: &SyncErrorConfig) -> Result<f64> {
    let mut acc = SyncErrorAccumulator::new(n, q, cfg.tau, cfg.horizon)?;
    for (t, x) in traj.times.iter().zip(&traj.states) {
        acc.observe(*t, x);
    }
    Ok(match traj.terminated_early {
        Some(_) => cfg.blow_up_sentinel(acc.partial()),
        None => acc.partial(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traj(f: impl Fn(f64) -> Vec<f64>) -> Trajectory {
        let times: Vec<f64> = (0..=3000).map(|k| k as f64 * 0.1).collect();
        let states = times.iter().map(|&t| f(t)).collect();
        Trajectory { times, states, terminated_early: None }
    }

    #[test]
    fn synchronous_run_has_zero_error() {
        let tr = traj(|t| vec![t.sin(), t.cos(), 1.0, t.sin(), t.cos(), 1.0]);
        assert_eq!(sync_error(&tr, 2, 3, &SyncErrorConfig::default()).unwrap(), 0.0);
    }

    #[test]
    fn constant_offset_gives_unit_error() {
        let tr = traj(|t| vec![t.sin(), t.cos(), 1.0, t.sin() + 1.0, t.cos(), 1.0]);
        let e = sync_error(&tr, 2, 3, &SyncErrorConfig::default()).unwrap();
        assert!((e - 1.0).abs() < 1e-12, "{e}");
    }

    #[test]
    fn blow_up_uses_sentinel() {
        let mut tr = traj(|_| vec![0.0, 0.0, 0.0, 2.0, 0.0, 0.0]);
        tr.terminated_early = Some(300.0);
        let e = sync_error(&tr, 2, 3, &SyncErrorConfig::default()).unwrap();
        assert_eq!(e, 100.0);
    }

    #[test]
    fn network_error_is_mean_deviation() {
        // three nodes on a line at 0, 1, 2: mean 1, deviations 1, 0, 1
        let e = instantaneous_error(&[0.0, 1.0, 2.0], 3, 1);
        assert!((e - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_inverted_window() {
        let cfg = SyncErrorConfig { tau: 300.0, horizon: 300.0, ..Default::default() };
        assert!(cfg.validate().is_err());
        assert!(SyncErrorAccumulator::new(2, 3, 5.0, 1.0).is_err());
    }
}
