use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use syncpersist::bounds::{evaluate_bounds, fit_boundary, ConstantsSource, DichotomyConstants};
use syncpersist::experiments::{
    compute_cells, finish_sweep, parse_existing_cells, partial_csv, scaling_study, DeltaSearch, NetworkKind,
    ScalingConfig, SimulationSettings, SweepPlan, SweepResult,
};
use syncpersist::graph::{generate, Graph, GraphKind, GraphRecipe};
use syncpersist::integrate::Method;
use syncpersist::seeds::experiment;
use syncpersist::spectra::summarize;

use crate::config::{load_config, usage, write_atomic, Grid, Resolver, SizeList};

const SEED_ENV: &str = "SYNCPERSIST_SEED";
const DEFAULT_SEED: u64 = 1;

#[derive(Parser, Debug)]
#[command(name = "syncpersist", version, about = "Synchronization persistence under coupling mismatch")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a graph and write it as an edge list.
    GenGraph(GenGraphArgs),
    /// Print `n lambda2 ||L|| g_min g_max` for an edge-list graph.
    Spectra(SpectraArgs),
    /// Evaluate the coupling and mismatch thresholds.
    Bounds(BoundsArgs),
    /// Synchronization tongue over an (alpha, delta) grid, omega = 1.
    Tongue(SweepArgs),
    /// Tongue with fast mismatch oscillation.
    Fastlimit(SweepArgs),
    /// Tolerable mismatch versus network size.
    Scaling(ScalingArgs),
    /// Fit delta* = c1 - c2/alpha to a tongue CSV.
    FitBoundary(FitArgs),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// `key = value` file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed (falls back to the config file, then SYNCPERSIST_SEED).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args, Debug)]
struct GenGraphArgs {
    #[command(flatten)]
    common: Common,
    /// er, ba, complete, path or star.
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    m0: Option<usize>,
    /// Output file (stdout if absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SpectraArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    graph: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BoundsArgs {
    #[command(flatten)]
    common: Common,
    /// Take lambda2 and ||L|| from this graph.
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long)]
    lambda2: Option<f64>,
    #[arg(long)]
    opnorm: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    k: Option<f64>,
    /// Boundary asymptote; with --c2 implies eta and K.
    #[arg(long)]
    c1: Option<f64>,
    #[arg(long)]
    c2: Option<f64>,
    /// Fit file written by fit-boundary.
    #[arg(long)]
    fit: Option<PathBuf>,
    /// Coupling values for the table.
    #[arg(long)]
    alpha: Option<Grid>,
    /// Mismatch amplitude at which nu is evaluated.
    #[arg(long)]
    delta: Option<f64>,
}

#[derive(Args, Debug, Clone)]
struct SimArgs {
    /// tau = 1000, T = 2000, ensemble 20 and the 201x101 grid.
    #[arg(long)]
    paper_scale: bool,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    ensemble: Option<usize>,
    #[arg(long)]
    ic_jitter: Option<f64>,
    #[arg(long)]
    loss_threshold: Option<f64>,
    #[arg(long)]
    sync_threshold: Option<f64>,
    /// Base integration step.
    #[arg(long)]
    h: Option<f64>,
    /// rk6 or rk4.
    #[arg(long)]
    method: Option<Method>,
    /// Use the base step as is, without stability and resolution caps.
    #[arg(long)]
    fixed_step: bool,
    #[arg(long)]
    steps_per_period: Option<f64>,
    #[arg(long)]
    stability_safety: Option<f64>,
    /// per-cell-member or per-member.
    #[arg(long)]
    mismatch_sampling: Option<String>,
    /// Force R_ji = R_ij.
    #[arg(long)]
    symmetric_mismatch: bool,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    sim: SimArgs,
    /// Edge-list graph; otherwise the complete graph on --n nodes.
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    /// start:stop:count, a comma list or one value.
    #[arg(long)]
    alpha: Option<Grid>,
    #[arg(long)]
    delta: Option<Grid>,
    /// Mismatch frequency (fastlimit only).
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Defaults to `<out>.manifest`.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Keep cells already present in the output file.
    #[arg(long)]
    resume: bool,
}

#[derive(Args, Debug)]
struct ScalingArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    sim: SimArgs,
    /// er or ba.
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    m0: Option<usize>,
    /// Comma-separated network sizes.
    #[arg(long)]
    n_list: Option<SizeList>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    delta_step: Option<f64>,
    /// Scan limit; runs still synchronized there are reported censored.
    #[arg(long)]
    max_delta: Option<f64>,
    #[arg(long)]
    graph_seeds: Option<usize>,
    /// Threshold search: linear (every grid point) or bracket (doubling then bisection).
    #[arg(long)]
    search: Option<DeltaSearch>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    common: Common,
    /// Tongue CSV.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    lambda2: Option<f64>,
    #[arg(long)]
    opnorm: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    sync_threshold: Option<f64>,
    /// Fit file (stdout only if absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenGraph(a) => gen_graph(a),
        Command::Spectra(a) => spectra(a),
        Command::Bounds(a) => bounds(a),
        Command::Tongue(a) => sweep(a, false),
        Command::Fastlimit(a) => sweep(a, true),
        Command::Scaling(a) => scaling(a),
        Command::FitBoundary(a) => fit(a),
    }
}

fn resolver(common: &Common) -> Result<Resolver> {
    Ok(Resolver::new(load_config(common.config.as_deref())?))
}

fn warn_unused(r: &Resolver) {
    for k in r.unused() {
        eprintln!("warning: config key `{k}` is not used by this command");
    }
}

fn resolve_seed(r: &mut Resolver, flag: Option<u64>) -> Result<u64> {
    let env = match std::env::var(SEED_ENV) {
        Ok(s) => Some(s.trim().parse::<u64>().map_err(|e| usage(format!("{SEED_ENV}: {e}")))?),
        Err(_) => None,
    };
    r.get("seed", flag, env.unwrap_or(DEFAULT_SEED))
}

fn resolve_workers(r: &mut Resolver, flag: Option<usize>) -> Result<usize> {
    let default = std::thread::available_parallelism().map_or(1, |n| n.get());
    let w = r.get("workers", flag, default)?;
    if w == 0 {
        return Err(usage("workers must be >= 1"));
    }
    Ok(w)
}

fn required<T>(v: Option<T>, name: &str) -> Result<T> {
    v.ok_or_else(|| usage(format!("missing --{name}")))
}

fn read_graph(path: &Path) -> Result<Graph> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading graph {}", path.display()))?;
    Ok(Graph::from_edge_list(&text)?)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_atomic(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn gen_graph(a: GenGraphArgs) -> Result<()> {
    let mut r = resolver(&a.common)?;
    let seed = resolve_seed(&mut r, a.common.seed)?;
    let kind_name = r.get("kind", a.kind, "er".to_string())?;
    let n = r.get("n", a.n, 100)?;
    let kind = match kind_name.as_str() {
        "er" => GraphKind::ErdosRenyi { p: r.get("p", a.p, 0.3)? },
        "ba" => GraphKind::BarabasiAlbert { m0: r.get("m0", a.m0, 2)? },
        "complete" => GraphKind::Complete,
        "path" => GraphKind::Path,
        "star" => GraphKind::Star,
        other => return Err(usage(format!("unknown graph kind {other:?}"))),
    };
    let out = r.get_opt("out", a.out.map(|p| p.display().to_string()))?;
    warn_unused(&r);
    let g = generate(&GraphRecipe::new(kind, n, seed))?;
    emit(out.as_deref().map(Path::new), &g.to_edge_list())
}

fn spectra(a: SpectraArgs) -> Result<()> {
    let mut r = resolver(&a.common)?;
    let path = required(r.get_opt("graph", a.graph.map(|p| p.display().to_string()))?, "graph")?;
    warn_unused(&r);
    let s = summarize(&read_graph(Path::new(&path))?)?;
    println!("{} {:.6} {} {} {}", s.n, s.lambda2, s.opnorm, s.g_min, s.g_max);
    Ok(())
}

/// Reads a `key,...` header plus one value row into a map.
fn read_fit_file(path: &Path) -> Result<BTreeMap<String, f64>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading fit file {}", path.display()))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
    let (Some(head), Some(row)) = (lines.next(), lines.next()) else {
        return Err(usage(format!("{}: expected a header and a value row", path.display())));
    };
    let mut out = BTreeMap::new();
    for (k, v) in head.split(',').zip(row.split(',')) {
        let v = v.trim().parse::<f64>().map_err(|e| usage(format!("{}: {k}: {e}", path.display())))?;
        out.insert(k.trim().to_string(), v);
    }
    Ok(out)
}

fn bounds(a: BoundsArgs) -> Result<()> {
    let mut r = resolver(&a.common)?;
    let graph = r.get_opt("graph", a.graph.map(|p| p.display().to_string()))?;
    let (l2_default, norm_default) = match &graph {
        Some(p) => {
            let s = summarize(&read_graph(Path::new(p))?)?;
            (Some(s.lambda2), Some(s.opnorm))
        }
        None => (None, None),
    };
    let lambda2 = required(r.get_opt("lambda2", a.lambda2.or(l2_default))?, "lambda2")?;
    let opnorm = required(r.get_opt("opnorm", a.opnorm.or(norm_default))?, "opnorm")?;
    let gamma = r.get("gamma", a.gamma, 1.0)?;
    let fit = r.get_opt("fit", a.fit.map(|p| p.display().to_string()))?;
    let eta = r.get_opt("eta", a.eta)?;
    let k = r.get_opt("k", a.k)?;
    let c1 = r.get_opt("c1", a.c1)?;
    let c2 = r.get_opt("c2", a.c2)?;
    let alphas = r.get("alpha", a.alpha, "0.5:2:7".parse::<Grid>().map_err(usage)?)?;
    let delta = r.get("delta", a.delta, 0.0)?;
    warn_unused(&r);

    let boundary_constants = |c1: f64, c2: f64| -> Result<(f64, f64)> {
        if !(c1 > 0.0 && c2 > 0.0) {
            return Err(usage(format!("need c1, c2 > 0, got {c1}, {c2}")));
        }
        let k = lambda2 * gamma / (c1 * opnorm);
        Ok((c2 * k * opnorm, k))
    };
    let constants = match (fit, eta, k, c1, c2) {
        (Some(f), None, None, None, None) => {
            let m = read_fit_file(Path::new(&f))?;
            let get = |key: &str| m.get(key).copied().ok_or_else(|| usage(format!("{f}: no `{key}` column")));
            let (eta, k) = boundary_constants(get("c1")?, get("c2")?)?;
            let rms = m.get("residual_rms").copied().unwrap_or(f64::NAN);
            DichotomyConstants { eta, k, source: ConstantsSource::Fitted { residual_rms: rms } }
        }
        (None, Some(eta), Some(k), None, None) => DichotomyConstants::new(eta, k)?,
        (None, None, None, Some(c1), Some(c2)) => {
            let (eta, k) = boundary_constants(c1, c2)?;
            DichotomyConstants::new(eta, k)?
        }
        _ => return Err(usage("give exactly one of --eta/--k, --c1/--c2 or --fit")),
    };
    let report = evaluate_bounds(lambda2, opnorm, gamma, constants)?;

    let mut out = String::new();
    let _ = writeln!(out, "# constants: {}", constants.source_label());
    let _ = writeln!(
        out,
        "# lambda2 = {lambda2}, opnorm = {opnorm}, gamma = {gamma}, eta = {}, K = {}",
        constants.eta, constants.k
    );
    let _ = writeln!(out, "alpha_threshold,{}", report.alpha_threshold);
    let _ = writeln!(out, "alpha,delta_threshold,nu");
    for &alpha in &alphas.values {
        let _ = writeln!(out, "{alpha},{},{}", report.delta_threshold(alpha), report.nu(alpha, delta));
    }
    print!("{out}");
    Ok(())
}

fn resolve_sim(r: &mut Resolver, a: &SimArgs) -> Result<(SimulationSettings, bool)> {
    let paper = r.switch("paper-scale", a.paper_scale)?;
    let base = if paper { SimulationSettings::paper_scale() } else { SimulationSettings::default() };
    let mut s = base.clone();
    s.sync.tau = r.get("tau", a.tau, base.sync.tau)?;
    s.sync.horizon = r.get("horizon", a.horizon, base.sync.horizon)?;
    s.sync.ensemble_size = r.get("ensemble", a.ensemble, base.sync.ensemble_size)?;
    s.sync.ic_jitter = r.get("ic-jitter", a.ic_jitter, base.sync.ic_jitter)?;
    s.sync.loss_threshold = r.get("loss-threshold", a.loss_threshold, base.sync.loss_threshold)?;
    s.sync_threshold = r.get("sync-threshold", a.sync_threshold, base.sync_threshold)?;
    s.integrator.h = r.get("h", a.h, base.integrator.h)?;
    s.integrator.method = r.get("method", a.method, base.integrator.method)?;
    s.step_policy.enabled = !r.switch("fixed-step", a.fixed_step)?;
    s.step_policy.steps_per_period =
        r.get("steps-per-period", a.steps_per_period, base.step_policy.steps_per_period)?;
    s.step_policy.stability_safety =
        r.get("stability-safety", a.stability_safety, base.step_policy.stability_safety)?;
    let sampling = r.get("mismatch-sampling", a.mismatch_sampling.clone(), base.mismatch_sampling.to_string())?;
    s.mismatch_sampling = sampling.parse()?;
    s.symmetric_mismatch = r.switch("symmetric-mismatch", a.symmetric_mismatch)?;
    s.validate()?;
    Ok((s, paper))
}

fn sweep(a: SweepArgs, fast: bool) -> Result<()> {
    let name = if fast { "fastlimit" } else { "tongue" };
    let mut r = resolver(&a.common)?;
    let seed = resolve_seed(&mut r, a.common.seed)?;
    let workers = resolve_workers(&mut r, a.common.workers)?;
    let (settings, paper) = resolve_sim(&mut r, &a.sim)?;
    let graph_path = r.get_opt("graph", a.graph.map(|p| p.display().to_string()))?;
    let graph = match &graph_path {
        Some(p) => read_graph(Path::new(p))?,
        None => generate(&GraphRecipe::new(GraphKind::Complete, r.get("n", a.n, 2)?, 0))?,
    };
    let (na, nd) = if paper { (201, 101) } else { (41, 26) };
    let alphas = r.get("alpha", a.alpha, format!("0.05:2.05:{na}").parse::<Grid>().map_err(usage)?)?;
    let deltas = r.get("delta", a.delta, format!("0:5:{nd}").parse::<Grid>().map_err(usage)?)?;
    let omega = if fast {
        r.get("omega", a.omega, 1000.0)?
    } else {
        if a.omega.is_some() {
            return Err(usage("tongue runs at omega = 1; use fastlimit for other frequencies"));
        }
        1.0
    };
    let out = PathBuf::from(r.get("out", a.out.map(|p| p.display().to_string()), format!("{name}.csv"))?);
    let manifest = a.manifest.unwrap_or_else(|| PathBuf::from(format!("{}.manifest", out.display())));
    let resume = a.resume;
    warn_unused(&r);
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(usage(format!("omega must be positive, got {omega}")));
    }

    let plan = SweepPlan {
        graph: &graph,
        alpha_grid: alphas.values.clone(),
        delta_grid: deltas.values.clone(),
        omega,
        settings,
        master_seed: seed,
        experiment: if fast { experiment::FAST_LIMIT } else { experiment::TONGUE },
    };
    write_atomic(&manifest, &r.manifest_text(name))?;

    let mut cells = BTreeMap::new();
    if resume && out.exists() {
        let text = std::fs::read_to_string(&out).with_context(|| format!("reading {}", out.display()))?;
        cells = parse_existing_cells(&plan, &text)?;
        eprintln!("resuming: {} of {} cells present", cells.len(), plan.cell_count());
    }
    let todo: Vec<usize> = (0..plan.cell_count()).filter(|i| !cells.contains_key(i)).collect();
    let batch = (workers * 8).max(plan.delta_grid.len());
    for chunk in todo.chunks(batch) {
        cells.extend(compute_cells(&plan, workers, chunk)?);
        write_atomic(&out, &partial_csv(&plan, &cells))?;
        eprintln!("{name}: {}/{} cells", cells.len(), plan.cell_count());
    }
    let result = finish_sweep(&plan, &cells)?;
    write_atomic(&out, &result.to_csv())?;
    eprintln!("wrote {} ({} cells)", out.display(), result.cells.len());
    Ok(())
}

fn scaling(a: ScalingArgs) -> Result<()> {
    let mut r = resolver(&a.common)?;
    let seed = resolve_seed(&mut r, a.common.seed)?;
    let workers = resolve_workers(&mut r, a.common.workers)?;
    let (settings, _) = resolve_sim(&mut r, &a.sim)?;
    let kind = match r.get("kind", a.kind, "ba".to_string())?.as_str() {
        "er" => NetworkKind::ErdosRenyi { p: r.get("p", a.p, 0.3)? },
        "ba" => NetworkKind::BarabasiAlbert { m0: r.get("m0", a.m0, 2)? },
        other => return Err(usage(format!("unknown network kind {other:?}; use er or ba"))),
    };
    let cfg = ScalingConfig {
        kind,
        n_list: r.get("n-list", a.n_list, SizeList(vec![50, 100, 200, 400, 800]))?.0,
        alpha: r.get("alpha", a.alpha, 5.0)?,
        delta_step: r.get("delta-step", a.delta_step, 0.05)?,
        max_delta: r.get("max-delta", a.max_delta, 20.0)?,
        graph_seeds: r.get("graph-seeds", a.graph_seeds, 5)?,
        search: r.get("search", a.search, DeltaSearch::Linear)?,
        settings,
    };
    let dir = PathBuf::from(r.get("out-dir", a.out_dir.map(|p| p.display().to_string()), "scaling".to_string())?);
    warn_unused(&r);
    write_atomic(&dir.join("manifest.txt"), &r.manifest_text("scaling"))?;

    let res = scaling_study(&cfg, seed, workers)?;
    write_atomic(&dir.join("delta_max.csv"), &res.rows_csv())?;
    write_atomic(&dir.join("summary.csv"), &res.summary_csv())?;
    write_atomic(&dir.join("fit.csv"), &res.fit_csv())?;
    for n in &res.flagged {
        eprintln!("warning: n = {n} excluded from the fit (failed synchronization precheck)");
    }
    let censored = res.rows.iter().filter(|row| row.censored).count();
    if censored > 0 {
        eprintln!("warning: {censored} runs still synchronized at max-delta = {}", cfg.max_delta);
    }
    match res.fit {
        Some(f) => println!("{}: beta = {} (stderr {})", kind.label(), f.beta, f.stderr),
        None => println!("{}: no fit (fewer than two usable sizes)", kind.label()),
    }
    Ok(())
}

fn fit(a: FitArgs) -> Result<()> {
    let mut r = resolver(&a.common)?;
    let input = required(r.get_opt("input", a.input.map(|p| p.display().to_string()))?, "input")?;
    let lambda2 = r.get("lambda2", a.lambda2, 2.0)?;
    let opnorm = r.get("opnorm", a.opnorm, 2.0)?;
    let gamma = r.get("gamma", a.gamma, 1.0)?;
    let threshold = r.get("sync-threshold", a.sync_threshold, 1.0)?;
    let out = r.get_opt("out", a.out.map(|p| p.display().to_string()))?;
    warn_unused(&r);

    let text = std::fs::read_to_string(&input).with_context(|| format!("reading {input}"))?;
    let sweep = SweepResult::from_csv(&text, 1.0)?;
    let points = sweep.boundary_points(threshold);
    let f = fit_boundary(&points)?;
    let mut file = String::from("c1,c2,r_squared,residual_rms,points,eta,k\n");
    let (eta, k) = match f.constants(lambda2, opnorm, gamma) {
        Ok(c) => (c.eta, c.k),
        Err(_) => (f64::NAN, f64::NAN),
    };
    let _ = writeln!(file, "{},{},{},{},{},{eta},{k}", f.c1, f.c2, f.r_squared, f.residual_rms, f.points);
    println!("# constants: fitted");
    print!("{file}");
    if let Some(p) = out {
        write_atomic(Path::new(&p), &file)?;
    }
    Ok(())
}
