use std::fmt::Write as _;

use rayon::prelude::*;

use super::{ensemble_error, median, SimulationSettings};
use crate::error::{Error, Result};
use crate::graph::{generate, Graph, GraphKind, GraphRecipe};
use crate::seeds::{derive_seed, experiment, stream};

/// Result of scanning `delta = k * step` upward until synchronization is lost.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaMaxOutcome {
    /// Largest grid value before the first loss (or the last scanned value
    /// when `censored`).
    pub delta_max: f64,
    /// First grid value with `E_a > loss_threshold`.
    pub crossing: Option<f64>,
    /// No loss up to the scan limit.
    pub censored: bool,
    /// `(delta, E_a)` for every evaluated grid point; `E_a` is a lower
    /// bound at the crossing.
    pub evaluated: Vec<(f64, f64)>,
}

/// Linear scan from `step` upward; `ea(delta)` is compared against
/// `threshold`. Returns the smallest crossing minus one step.
pub fn scan_delta_max(
    step: f64,
    max_delta: f64,
    threshold: f64,
    mut ea: impl FnMut(f64) -> Result<f64>,
) -> Result<DeltaMaxOutcome> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::InvalidParameter(format!("delta step must be > 0, got {step}")));
    }
    let mut evaluated = Vec::new();
    let mut k = 1u64;
    loop {
        let delta = k as f64 * step;
        if delta > max_delta + 1e-9 * step {
            let last = (k - 1) as f64 * step;
            return Ok(DeltaMaxOutcome { delta_max: last, crossing: None, censored: true, evaluated });
        }
        let e = ea(delta)?;
        evaluated.push((delta, e));
        if e > threshold {
            let delta_max = (k - 1) as f64 * step;
            return Ok(DeltaMaxOutcome { delta_max, crossing: Some(delta), censored: false, evaluated });
        }
        k += 1;
    }
}

/// How the amplitude grid `k * step` is searched for the first loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DeltaSearch {
    /// Every grid point from `step` upward until the first loss.
    #[default]
    Linear,
    /// Doubling `k` until a loss, then bisection between the last
    /// synchronized and the first lost grid point. Agrees with `Linear`
    /// whenever loss persists above the crossing, at logarithmic cost.
    Bracket,
}

impl std::str::FromStr for DeltaSearch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Self::Linear),
            "bracket" => Ok(Self::Bracket),
            other => Err(Error::Parse(format!("unknown delta search {other:?}"))),
        }
    }
}

impl std::fmt::Display for DeltaSearch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Linear => "linear",
            Self::Bracket => "bracket",
        })
    }
}

/// Doubling-then-bisection variant of [`scan_delta_max`] on the same grid.
pub fn bracket_delta_max(
    step: f64,
    max_delta: f64,
    threshold: f64,
    mut ea: impl FnMut(f64) -> Result<f64>,
) -> Result<DeltaMaxOutcome> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::InvalidParameter(format!("delta step must be > 0, got {step}")));
    }
    let kmax = (max_delta / step + 1e-9).floor().max(0.0) as u64;
    let mut evaluated = Vec::new();
    let mut lost = |k: u64, evaluated: &mut Vec<(f64, f64)>| -> Result<bool> {
        let delta = k as f64 * step;
        let e = ea(delta)?;
        evaluated.push((delta, e));
        Ok(e > threshold)
    };
    let mut lo = 0u64;
    let mut hi = None;
    let mut k = 1u64;
    while hi.is_none() && lo < kmax {
        let probe = k.min(kmax);
        if lost(probe, &mut evaluated)? {
            hi = Some(probe);
        } else {
            lo = probe;
            k = k.saturating_mul(2);
        }
    }
    let Some(mut hi) = hi else {
        evaluated.sort_by(|a, b| a.0.total_cmp(&b.0));
        return Ok(DeltaMaxOutcome { delta_max: lo as f64 * step, crossing: None, censored: true, evaluated });
    };
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if lost(mid, &mut evaluated)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    evaluated.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(DeltaMaxOutcome { delta_max: lo as f64 * step, crossing: Some(hi as f64 * step), censored: false, evaluated })
}

/// Largest tolerable mismatch amplitude on `graph` at coupling `alpha`.
///
/// Member `m` keeps its initial conditions and mismatch directions for the
/// whole scan; only the amplitude changes. The unperturbed run must
/// synchronize (`E_a < sync_threshold`), otherwise `AlphaBelowThreshold`.
#[allow(clippy::too_many_arguments)]
pub fn delta_max_search(
    graph: &Graph,
    alpha: f64,
    step: f64,
    max_delta: f64,
    search: DeltaSearch,
    settings: &SimulationSettings,
    master: u64,
    path: &[u64],
) -> Result<DeltaMaxOutcome> {
    settings.validate()?;
    let omega = 1.0;
    let member = |m: usize| {
        let mut p = path.to_vec();
        p.push(m as u64);
        p
    };
    let base = ensemble_error(graph, alpha, 0.0, omega, settings, master, member, None)?;
    if !(base.mean_error < settings.sync_threshold) {
        return Err(Error::AlphaBelowThreshold(base.mean_error));
    }
    let thr = settings.sync.loss_threshold;
    let ea = |delta| Ok(ensemble_error(graph, alpha, delta, omega, settings, master, member, Some(thr))?.mean_error);
    let mut out = match search {
        DeltaSearch::Linear => scan_delta_max(step, max_delta, thr, ea)?,
        DeltaSearch::Bracket => bracket_delta_max(step, max_delta, thr, ea)?,
    };
    out.evaluated.insert(0, (0.0, base.mean_error));
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NetworkKind {
    ErdosRenyi { p: f64 },
    BarabasiAlbert { m0: usize },
}

impl NetworkKind {
    pub fn graph_kind(self) -> GraphKind {
        match self {
            NetworkKind::ErdosRenyi { p } => GraphKind::ErdosRenyi { p },
            NetworkKind::BarabasiAlbert { m0 } => GraphKind::BarabasiAlbert { m0 },
        }
    }

    pub fn label(self) -> String {
        match self {
            NetworkKind::ErdosRenyi { p } => format!("er(p={p})"),
            NetworkKind::BarabasiAlbert { m0 } => format!("ba(m0={m0})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingConfig {
    pub kind: NetworkKind,
    pub n_list: Vec<usize>,
    pub alpha: f64,
    pub delta_step: f64,
    pub max_delta: f64,
    pub search: DeltaSearch,
    pub graph_seeds: usize,
    pub settings: SimulationSettings,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRow {
    pub n: usize,
    pub graph_seed: u64,
    /// `None` when the unperturbed precheck failed.
    pub delta_max: Option<f64>,
    pub censored: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit {
    /// `delta_max ~ n^{-beta}`.
    pub beta: f64,
    pub stderr: f64,
    pub intercept: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingResult {
    pub rows: Vec<ScalingRow>,
    /// Per-`n` median over the graph seeds that passed the precheck.
    pub medians: Vec<(usize, f64)>,
    /// Sizes excluded from the fit (precheck failure or zero median).
    pub flagged: Vec<usize>,
    pub fit: Option<PowerLawFit>,
}

impl ScalingResult {
    /// `n,graph_seed,delta_max`; failed prechecks are written as `nan`.
    pub fn rows_csv(&self) -> String {
        let mut out = String::from("n,graph_seed,delta_max\n");
        for r in &self.rows {
            let d = r.delta_max.map_or("nan".to_string(), |d| d.to_string());
            let _ = writeln!(out, "{},{},{}", r.n, r.graph_seed, d);
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from("n,delta_max_median\n");
        for (n, m) in &self.medians {
            let _ = writeln!(out, "{n},{m}");
        }
        out
    }

    pub fn fit_csv(&self) -> String {
        match self.fit {
            Some(f) => format!("beta,stderr\n{},{}\n", f.beta, f.stderr),
            None => "beta,stderr\nnan,nan\n".to_string(),
        }
    }
}

/// Least squares of `log10 delta` against `log10 n`; `beta` is minus the
/// slope. Needs two distinct sizes with positive values.
pub fn fit_power_law(points: &[(usize, f64)]) -> Result<PowerLawFit> {
    let pts: Vec<(f64, f64)> =
        points.iter().filter(|(_, d)| *d > 0.0).map(|&(n, d)| ((n as f64).log10(), d.log10())).collect();
    if pts.len() < 2 {
        return Err(Error::RankDeficient("need two positive points for a power-law fit".into()));
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::RankDeficient("all sizes are equal".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let stderr = if pts.len() > 2 {
        let sse: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
        (sse / (m - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(PowerLawFit { beta: -slope, stderr, intercept })
}

/// Tolerable mismatch versus network size: for every `n` and graph seed a
/// fresh graph, a precheck at `delta = 0` and a linear amplitude scan.
pub fn scaling_study(cfg: &ScalingConfig, master: u64, workers: usize) -> Result<ScalingResult> {
    cfg.settings.validate()?;
    if cfg.graph_seeds == 0 || cfg.n_list.is_empty() {
        return Err(Error::InvalidParameter("need at least one size and one graph seed".into()));
    }
    let tasks: Vec<(usize, u64)> =
        cfg.n_list.iter().flat_map(|&n| (0..cfg.graph_seeds as u64).map(move |g| (n, g))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))?;
    let rows: Vec<ScalingRow> =
        pool.install(|| tasks.par_iter().map(|&(n, g)| scaling_task(cfg, master, n, g)).collect::<Result<Vec<_>>>())?;

    let mut medians = Vec::new();
    let mut flagged = Vec::new();
    for &n in &cfg.n_list {
        let vals: Vec<f64> = rows.iter().filter(|r| r.n == n).filter_map(|r| r.delta_max).collect();
        if vals.len() < cfg.graph_seeds {
            flagged.push(n);
            continue;
        }
        let m = median(&vals);
        if m <= 0.0 {
            flagged.push(n);
        }
        medians.push((n, m));
    }
    let usable: Vec<(usize, f64)> = medians.iter().copied().filter(|(n, _)| !flagged.contains(n)).collect();
    let fit = fit_power_law(&usable).ok();
    Ok(ScalingResult { rows, medians, flagged, fit })
}

fn scaling_task(cfg: &ScalingConfig, master: u64, n: usize, g: u64) -> Result<ScalingRow> {
    let graph_seed = derive_seed(master, &[experiment::SCALING, n as u64, g, stream::GRAPH]);
    let graph = generate(&GraphRecipe::new(cfg.kind.graph_kind(), n, graph_seed))?;
    let path = [experiment::SCALING, n as u64, g];
    match delta_max_search(&graph, cfg.alpha, cfg.delta_step, cfg.max_delta, cfg.search, &cfg.settings, master, &path) {
        Ok(out) => Ok(ScalingRow { n, graph_seed, delta_max: Some(out.delta_max), censored: out.censored }),
        Err(Error::AlphaBelowThreshold(_)) => Ok(ScalingRow { n, graph_seed, delta_max: None, censored: false }),
        Err(e) => Err(e),
    }
}
