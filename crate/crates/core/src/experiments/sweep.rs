use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;

use super::{ensemble_error, MismatchSampling, SimulationSettings};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::seeds::{derive_seed, experiment};

/// A rectangular `(alpha, delta)` grid and everything needed to compute
/// any cell of it independently.
#[derive(Debug, Clone)]
pub struct SweepPlan<'g> {
    pub graph: &'g Graph,
    pub alpha_grid: Vec<f64>,
    pub delta_grid: Vec<f64>,
    pub omega: f64,
    pub settings: SimulationSettings,
    pub master_seed: u64,
    pub experiment: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellResult {
    pub ea: f64,
    pub blowups: usize,
    pub seed: u64,
}

impl<'g> SweepPlan<'g> {
    pub fn cell_count(&self) -> usize {
        self.alpha_grid.len() * self.delta_grid.len()
    }

    /// Cells are numbered alpha-major: `ia * delta_grid.len() + id`.
    pub fn cell_coords(&self, index: usize) -> (usize, usize) {
        (index / self.delta_grid.len(), index % self.delta_grid.len())
    }

    pub fn cell_seed(&self, index: usize) -> u64 {
        derive_seed(self.master_seed, &[self.experiment, index as u64])
    }

    fn validate(&self) -> Result<()> {
        self.settings.validate()?;
        if self.alpha_grid.is_empty() || self.delta_grid.is_empty() {
            return Err(Error::InvalidParameter("sweep grids must be non-empty".into()));
        }
        if !self.graph.is_connected() {
            return Err(Error::InvalidGraph("sweep graph must be connected".into()));
        }
        Ok(())
    }

    /// Computes one cell from scratch; the result depends only on the plan
    /// and `index`.
    pub fn compute_cell(&self, index: usize) -> Result<CellResult> {
        let (ia, id) = self.cell_coords(index);
        let seed = self.cell_seed(index);
        let (exp, sampling) = (self.experiment, self.settings.mismatch_sampling);
        let out = ensemble_error(
            self.graph,
            self.alpha_grid[ia],
            self.delta_grid[id],
            self.omega,
            &self.settings,
            self.master_seed,
            |m| match sampling {
                MismatchSampling::PerCellMember => vec![exp, index as u64, m as u64],
                MismatchSampling::PerMember => vec![exp, u64::MAX, m as u64],
            },
            None,
        )?;
        Ok(CellResult { ea: out.mean_error, blowups: out.blowups, seed })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub alpha_grid: Vec<f64>,
    pub delta_grid: Vec<f64>,
    pub omega: f64,
    /// Alpha-major, `alpha_grid.len() * delta_grid.len()` entries.
    pub cells: Vec<CellResult>,
}

impl SweepResult {
    pub fn ea(&self, ia: usize, id: usize) -> f64 {
        self.cells[ia * self.delta_grid.len() + id].ea
    }

    /// `alpha,delta,Ea,blowups` with one row per cell.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("alpha,delta,Ea,blowups\n");
        for (ia, a) in self.alpha_grid.iter().enumerate() {
            for (id, d) in self.delta_grid.iter().enumerate() {
                let c = &self.cells[ia * self.delta_grid.len() + id];
                let _ = writeln!(out, "{a},{d},{},{}", c.ea, c.blowups);
            }
        }
        out
    }

    /// Reads the `alpha,delta,Ea,blowups` layout back. Every grid cell must
    /// be present exactly once; `omega` is not stored in the file.
    pub fn from_csv(csv: &str, omega: f64) -> Result<Self> {
        let mut rows = Vec::new();
        for (lineno, line) in csv.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            let err = |m: String| Error::Parse(format!("line {}: {m}", lineno + 1));
            if f.len() != 4 {
                return Err(err("expected 4 fields".into()));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| err(e.to_string()));
            let blowups = f[3].parse::<usize>().map_err(|e| err(e.to_string()))?;
            rows.push((num(f[0])?, num(f[1])?, num(f[2])?, blowups));
        }
        let mut alpha_grid: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let mut delta_grid: Vec<f64> = rows.iter().map(|r| r.1).collect();
        for g in [&mut alpha_grid, &mut delta_grid] {
            g.sort_by(f64::total_cmp);
            g.dedup();
        }
        if rows.is_empty() || rows.len() != alpha_grid.len() * delta_grid.len() {
            return Err(Error::Parse(format!(
                "{} rows do not form a {}x{} grid",
                rows.len(),
                alpha_grid.len(),
                delta_grid.len()
            )));
        }
        let mut cells = vec![None; rows.len()];
        for (a, d, ea, blowups) in rows {
            let ia = alpha_grid.partition_point(|&x| x < a);
            let id = delta_grid.partition_point(|&x| x < d);
            let slot = &mut cells[ia * delta_grid.len() + id];
            if slot.is_some() {
                return Err(Error::Parse(format!("duplicate cell alpha = {a}, delta = {d}")));
            }
            *slot = Some(CellResult { ea, blowups, seed: 0 });
        }
        let cells =
            cells.into_iter().collect::<Option<Vec<_>>>().ok_or_else(|| Error::Parse("grid has gaps".into()))?;
        Ok(SweepResult { alpha_grid, delta_grid, omega, cells })
    }

    /// For each alpha column with a transition: the midpoint between the
    /// last synchronized cell (`E_a < sync_threshold`) and the first
    /// desynchronized one. Columns that never desynchronize in range, or
    /// are desynchronized already at the lowest delta, contribute nothing.
    pub fn boundary_points(&self, sync_threshold: f64) -> Vec<(f64, f64)> {
        let mut pts = Vec::new();
        for (ia, &a) in self.alpha_grid.iter().enumerate() {
            let first_loss = (0..self.delta_grid.len()).find(|&id| !(self.ea(ia, id) < sync_threshold));
            if let Some(k) = first_loss {
                if k > 0 {
                    pts.push((a, 0.5 * (self.delta_grid[k - 1] + self.delta_grid[k])));
                }
            }
        }
        pts
    }
}

/// Parses `alpha,delta,Ea,blowups` rows into cells of `plan`, keyed by
/// cell index. Rows that do not sit on the plan's grid are ignored.
pub fn parse_existing_cells(plan: &SweepPlan<'_>, csv: &str) -> Result<BTreeMap<usize, CellResult>> {
    let mut out = BTreeMap::new();
    for (lineno, line) in csv.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(Error::Parse(format!("line {}: expected 4 fields", lineno + 1)));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)));
        let (a, d, ea) = (num(f[0])?, num(f[1])?, num(f[2])?);
        let blowups = f[3].parse::<usize>().map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
        let ia = plan.alpha_grid.iter().position(|&x| x == a);
        let id = plan.delta_grid.iter().position(|&x| x == d);
        if let (Some(ia), Some(id)) = (ia, id) {
            let index = ia * plan.delta_grid.len() + id;
            out.insert(index, CellResult { ea, blowups, seed: plan.cell_seed(index) });
        }
    }
    Ok(out)
}

/// Computes the listed cells on a pool of `workers` threads, in the
/// order given.
pub fn compute_cells(plan: &SweepPlan<'_>, workers: usize, indices: &[usize]) -> Result<Vec<(usize, CellResult)>> {
    plan.validate()?;
    if let Some(&bad) = indices.iter().find(|&&i| i >= plan.cell_count()) {
        return Err(Error::InvalidParameter(format!("cell index {bad} out of range")));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))?;
    pool.install(|| indices.par_iter().map(|&i| plan.compute_cell(i).map(|c| (i, c))).collect::<Result<Vec<_>>>())
}

/// CSV of the cells computed so far, in cell order; same layout as
/// [`SweepResult::to_csv`].
pub fn partial_csv(plan: &SweepPlan<'_>, cells: &BTreeMap<usize, CellResult>) -> String {
    let mut out = String::from("alpha,delta,Ea,blowups\n");
    for (&i, c) in cells {
        let (ia, id) = plan.cell_coords(i);
        let _ = writeln!(out, "{},{},{},{}", plan.alpha_grid[ia], plan.delta_grid[id], c.ea, c.blowups);
    }
    out
}

/// Computes every cell not already in `existing`. Output is identical
/// for any worker count.
pub fn run_sweep(plan: &SweepPlan<'_>, workers: usize, existing: &BTreeMap<usize, CellResult>) -> Result<SweepResult> {
    let todo: Vec<usize> = (0..plan.cell_count()).filter(|i| !existing.contains_key(i)).collect();
    let computed = compute_cells(plan, workers, &todo)?;
    let mut all = existing.clone();
    all.extend(computed);
    finish_sweep(plan, &all)
}

/// Assembles a full result; every cell of the plan must be present.
pub fn finish_sweep(plan: &SweepPlan<'_>, cells: &BTreeMap<usize, CellResult>) -> Result<SweepResult> {
    let cells = (0..plan.cell_count())
        .map(|i| cells.get(&i).copied().ok_or_else(|| Error::InvalidParameter(format!("cell {i} missing"))))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        alpha_grid: plan.alpha_grid.clone(),
        delta_grid: plan.delta_grid.clone(),
        omega: plan.omega,
        cells,
    })
}

/// Synchronization tongue with slowly oscillating mismatch (`omega = 1`).
pub fn tongue_sweep(
    graph: &Graph,
    alpha_grid: &[f64],
    delta_grid: &[f64],
    settings: &SimulationSettings,
    seed: u64,
    workers: usize,
) -> Result<SweepResult> {
    let plan = SweepPlan {
        graph,
        alpha_grid: alpha_grid.to_vec(),
        delta_grid: delta_grid.to_vec(),
        omega: 1.0,
        settings: settings.clone(),
        master_seed: seed,
        experiment: experiment::TONGUE,
    };
    run_sweep(&plan, workers, &BTreeMap::new())
}

/// Same grid with mismatch oscillating at `omega`.
pub fn fast_limit_sweep(
    graph: &Graph,
    alpha_grid: &[f64],
    delta_grid: &[f64],
    omega: f64,
    settings: &SimulationSettings,
    seed: u64,
    workers: usize,
) -> Result<SweepResult> {
    let plan = SweepPlan {
        graph,
        alpha_grid: alpha_grid.to_vec(),
        delta_grid: delta_grid.to_vec(),
        omega,
        settings: settings.clone(),
        master_seed: seed,
        experiment: experiment::FAST_LIMIT,
    };
    run_sweep(&plan, workers, &BTreeMap::new())
}
