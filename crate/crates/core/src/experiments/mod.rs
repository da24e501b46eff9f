//! Numerical studies: synchronization tongues (slow and fast mismatch
//! oscillation), the tolerable-mismatch search, and its network-size
//! scaling.
//!
//! Every random draw is derived from a master seed and the position of the
//! run inside the study (see [`crate::seeds`]), so results do not depend
//! on worker count or scheduling.

mod scaling;
mod sweep;
mod sync_error;

pub use scaling::{
    bracket_delta_max, delta_max_search, fit_power_law, scaling_study, scan_delta_max, DeltaMaxOutcome, DeltaSearch,
    NetworkKind, PowerLawFit, ScalingConfig, ScalingResult, ScalingRow,
};
pub use sweep::{
    compute_cells, fast_limit_sweep, finish_sweep, parse_existing_cells, partial_csv, run_sweep, tongue_sweep,
    CellResult, SweepPlan, SweepResult,
};
pub use sync_error::{instantaneous_error, sync_error, SyncErrorAccumulator, SyncErrorConfig};

use std::ops::ControlFlow;

use rand::Rng;

use crate::dynamics::{CouplingSpec, Lorenz, NetworkSystem, OscillatorModel};
use crate::error::Result;
use crate::graph::Graph;
use crate::integrate::{integrate_until, IntegratorConfig, Method};
use crate::seeds::{derive_seed, rng_for, stream};

/// How mismatch directions are shared across the cells of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MismatchSampling {
    /// Fresh draw for every `(cell, member)`.
    #[default]
    PerCellMember,
    /// One draw per ensemble member, reused by every cell.
    PerMember,
}

impl std::str::FromStr for MismatchSampling {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-cell-member" => Ok(Self::PerCellMember),
            "per-member" => Ok(Self::PerMember),
            other => Err(crate::error::Error::Parse(format!("unknown mismatch sampling {other:?}"))),
        }
    }
}

impl std::fmt::Display for MismatchSampling {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::PerCellMember => "per-cell-member",
            Self::PerMember => "per-member",
        })
    }
}

/// Caps on the base step so the explicit scheme stays stable under strong
/// coupling and resolves fast mismatch oscillation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepPolicy {
    pub enabled: bool,
    /// Minimum integration steps per period `2 pi / omega`.
    pub steps_per_period: f64,
    /// Fraction of the method's real stability interval allowed for
    /// `h * ||J_coupling||_2`.
    pub stability_safety: f64,
}

impl Default for StepPolicy {
    fn default() -> Self {
        Self { enabled: true, steps_per_period: 32.0, stability_safety: 0.5 }
    }
}

/// Everything a single trajectory needs besides the graph and `(alpha, delta, omega)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSettings {
    pub sync: SyncErrorConfig,
    pub integrator: IntegratorConfig,
    pub step_policy: StepPolicy,
    pub mismatch_sampling: MismatchSampling,
    pub symmetric_mismatch: bool,
    /// Cells with `E_a` below this are synchronized (tongue boundary,
    /// unperturbed precheck of the mismatch search).
    pub sync_threshold: f64,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        Self {
            sync: SyncErrorConfig::desk_scale(),
            integrator: IntegratorConfig::default(),
            step_policy: StepPolicy::default(),
            mismatch_sampling: MismatchSampling::default(),
            symmetric_mismatch: false,
            sync_threshold: 1.0,
        }
    }
}

impl SimulationSettings {
    pub fn paper_scale() -> Self {
        Self { sync: SyncErrorConfig::paper_scale(), ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        self.sync.validate()?;
        self.integrator.validate()
    }
}

/// Step actually used for one system under the step policy.
pub fn effective_step<M: OscillatorModel>(sys: &NetworkSystem<'_, M>, settings: &SimulationSettings) -> f64 {
    let mut h = settings.integrator.h;
    let policy = &settings.step_policy;
    if !policy.enabled {
        return h;
    }
    let c = sys.coupling();
    if c.delta > 0.0 {
        h = h.min(2.0 * std::f64::consts::PI / (c.omega * policy.steps_per_period));
    }
    let norm = if c.delta > 0.0 {
        sys.coupling_norm_estimate(c.delta, 40).max(sys.coupling_norm_estimate(-c.delta, 40))
    } else {
        sys.coupling_norm_estimate(0.0, 40)
    };
    if norm > 0.0 {
        h = h.min(policy.stability_safety * stability_limit(settings.integrator.method) / norm);
    }
    h
}

fn stability_limit(method: Method) -> f64 {
    static RK6: std::sync::OnceLock<f64> = std::sync::OnceLock::new();
    static RK4: std::sync::OnceLock<f64> = std::sync::OnceLock::new();
    match method {
        Method::Rk6 => *RK6.get_or_init(|| method.real_stability_limit()),
        Method::Rk4 => *RK4.get_or_init(|| method.real_stability_limit()),
    }
}

/// Jittered initial state for `n` nodes.
pub fn initial_conditions(n: usize, cfg: &SyncErrorConfig, seed: u64) -> Vec<f64> {
    let mut rng = rng_for(seed, &[stream::INITIAL_CONDITIONS]);
    let mut x = Vec::with_capacity(n * cfg.ic_base.len());
    for _ in 0..n {
        for &b in &cfg.ic_base {
            x.push(b + cfg.ic_jitter * rng.random::<f64>());
        }
    }
    x
}

/// One ensemble member's outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MemberOutcome {
    pub error: f64,
    pub blow_up: bool,
    /// Stopped once the error budget was exceeded; `error` is then a lower bound.
    pub stopped: bool,
}

/// Seeds of one ensemble member: initial conditions and mismatch draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemberSeeds {
    pub ic: u64,
    pub mismatch: u64,
}

impl MemberSeeds {
    pub fn derive(master: u64, path: &[u64]) -> Self {
        let mut p = path.to_vec();
        p.push(stream::INITIAL_CONDITIONS);
        let ic = derive_seed(master, &p);
        *p.last_mut().unwrap() = stream::MISMATCH;
        Self { ic, mismatch: derive_seed(master, &p) }
    }
}

/// Runs one Lorenz network trajectory over `[0, T]` and returns its
/// time-averaged synchronization error. With `stop_above`, integration
/// halts as soon as the accumulated error exceeds it.
pub fn run_member(
    graph: &Graph,
    alpha: f64,
    delta: f64,
    omega: f64,
    seeds: MemberSeeds,
    settings: &SimulationSettings,
    stop_above: Option<f64>,
) -> Result<MemberOutcome> {
    let model = Lorenz::default();
    let q = model.dim();
    let coupling = CouplingSpec::with_options(graph, q, delta, omega, seeds.mismatch, settings.symmetric_mismatch)?;
    let sys = NetworkSystem::new(graph, model, coupling, alpha)?;
    let x0 = initial_conditions(graph.n(), &settings.sync, seeds.ic);
    run_system(&sys, &x0, settings, stop_above)
}

pub fn run_system<M: OscillatorModel>(
    sys: &NetworkSystem<'_, M>,
    x0: &[f64],
    settings: &SimulationSettings,
    stop_above: Option<f64>,
) -> Result<MemberOutcome> {
    let cfg = &settings.sync;
    let icfg = IntegratorConfig { h: effective_step(sys, settings), ..settings.integrator };
    let mut acc = SyncErrorAccumulator::new(sys.graph().n(), sys.q(), cfg.tau, cfg.horizon)?;
    let end = integrate_until(sys, x0, 0.0, cfg.horizon, &icfg, |t, x| {
        acc.observe(t, x);
        match stop_above {
            Some(limit) if acc.partial() > limit => ControlFlow::Break(()),
            _ => ControlFlow::Continue(()),
        }
    })?;
    Ok(match end.blow_up {
        Some(_) => MemberOutcome { error: cfg.blow_up_sentinel(acc.partial()), blow_up: true, stopped: false },
        None => MemberOutcome { error: acc.partial(), blow_up: false, stopped: end.stopped },
    })
}

/// Ensemble mean error of one `(alpha, delta, omega)` point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleOutcome {
    pub mean_error: f64,
    pub blowups: usize,
    /// The loss threshold was already exceeded and remaining work skipped;
    /// `mean_error` is then a lower bound.
    pub truncated: bool,
}

/// Averages `ensemble_size` members. Member `m` uses seeds derived from
/// `member_path(m)`. With `decide_above`, stops as soon as the mean is
/// guaranteed to exceed that value (errors are nonnegative).
#[allow(clippy::too_many_arguments)]
pub fn ensemble_error(
    graph: &Graph,
    alpha: f64,
    delta: f64,
    omega: f64,
    settings: &SimulationSettings,
    master: u64,
    member_path: impl Fn(usize) -> Vec<u64>,
    decide_above: Option<f64>,
) -> Result<EnsembleOutcome> {
    let size = settings.sync.ensemble_size;
    let mut sum = 0.0;
    let mut blowups = 0;
    for m in 0..size {
        let seeds = MemberSeeds::derive(master, &member_path(m));
        let budget = decide_above.map(|thr| thr * size as f64 - sum);
        let out = run_member(graph, alpha, delta, omega, seeds, settings, budget)?;
        sum += out.error;
        blowups += out.blow_up as usize;
        if let Some(thr) = decide_above {
            if sum / size as f64 > thr {
                return Ok(EnsembleOutcome {
                    mean_error: sum / size as f64,
                    blowups,
                    truncated: m + 1 < size || out.stopped,
                });
            }
        }
    }
    Ok(EnsembleOutcome { mean_error: sum / size as f64, blowups, truncated: false })
}

/// Least-squares slope of `ln ||x_2 - x_1||_inf` over `[0, window]`,
/// a measured transverse decay rate for two-node runs. Samples below
/// `floor` are dropped so round-off does not flatten the fit.
#[allow(clippy::too_many_arguments)]
pub fn transient_decay_slope(
    graph: &Graph,
    alpha: f64,
    delta: f64,
    omega: f64,
    seeds: MemberSeeds,
    settings: &SimulationSettings,
    window: f64,
    floor: f64,
) -> Result<f64> {
    let model = Lorenz::default();
    let q = model.dim();
    let coupling = CouplingSpec::with_options(graph, q, delta, omega, seeds.mismatch, settings.symmetric_mismatch)?;
    let sys = NetworkSystem::new(graph, model, coupling, alpha)?;
    let x0 = initial_conditions(graph.n(), &settings.sync, seeds.ic);
    let icfg = IntegratorConfig { h: effective_step(&sys, settings), ..settings.integrator };
    let mut pts = Vec::new();
    integrate_until(&sys, &x0, 0.0, window, &icfg, |t, x| {
        let e = instantaneous_error(x, graph.n(), q);
        if e > floor {
            pts.push((t, e.ln()));
            ControlFlow::Continue(())
        } else {
            ControlFlow::Break(())
        }
    })?;
    Ok(linear_slope(&pts))
}

fn linear_slope(pts: &[(f64, f64)]) -> f64 {
    let m = pts.len() as f64;
    if pts.len() < 2 {
        return 0.0;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Median of a non-empty slice (mean of the two middle values for even length).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}
