//! Grid sweeps of the indicators, region extraction and ensemble studies.

use std::collections::VecDeque;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::UncertaintyBox;
use crate::error::{Result, SdiError};
use crate::indicators::{compute, IndicatorConfig, IndicatorResult, Selection};
use crate::odeint::{integrate_observed, IntegratorConfig};
use crate::pce::{PceSpace, Sampling};
use crate::systems::{cr3bp_vy_from_energy, er3bp_vy_from_energy, DynamicalSystem, GuardStatus};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Axis {
    pub fn new(name: impl Into<String>, lo: f64, hi: f64, count: usize) -> Self {
        Self { name: name.into(), lo, hi, count }
    }

    /// Center of cell `i`; mirrored cells of a symmetric axis are exact negatives.
    pub fn center(&self, i: usize) -> f64 {
        let mid = 0.5 * (self.lo + self.hi);
        let half = 0.5 * (self.hi - self.lo);
        mid + half * ((2 * i + 1) as f64 - self.count as f64) / self.count as f64
    }

    fn validate(&self) -> Result<()> {
        if !(self.lo < self.hi) || !self.lo.is_finite() || !self.hi.is_finite() {
            return Err(SdiError::invalid(format!("axis {} needs finite lo < hi", self.name)));
        }
        if self.count < 2 {
            return Err(SdiError::invalid(format!("axis {} needs at least 2 cells", self.name)));
        }
        Ok(())
    }
}

/// How a grid point `(u, v)` becomes a full initial state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Embedding {
    /// `(u, v)` is the state.
    Direct,
    /// `(x, 0, v_x, v_y)` with `v_y < 0` from the Jacobi energy.
    Cr3bpEnergy { energy: f64, mu: f64 },
    /// As above with the pseudo-energy at true anomaly zero.
    Er3bpEnergy { energy: f64, e: f64, mu: f64 },
    /// `(x, y, 0, 0)`.
    PlanarRest,
}

impl Embedding {
    pub fn state_dim(&self) -> usize {
        match self {
            Embedding::Direct => 2,
            _ => 4,
        }
    }

    pub fn embed(&self, u: f64, v: f64) -> std::result::Result<Vec<f64>, GuardStatus> {
        match *self {
            Embedding::Direct => Ok(vec![u, v]),
            Embedding::Cr3bpEnergy { energy, mu } => Ok(vec![u, 0.0, v, cr3bp_vy_from_energy(u, v, energy, mu)?]),
            Embedding::Er3bpEnergy { energy, e, mu } => Ok(vec![u, 0.0, v, er3bp_vy_from_energy(u, v, energy, e, mu)?]),
            Embedding::PlanarRest => Ok(vec![u, v, 0.0, 0.0]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub axis1: Axis,
    pub axis2: Axis,
    pub embedding: Embedding,
}

impl GridSpec {
    pub fn new(axis1: Axis, axis2: Axis, embedding: Embedding) -> Self {
        Self { axis1, axis2, embedding }
    }

    pub fn n_cells(&self) -> usize {
        self.axis1.count * self.axis2.count
    }

    /// Cell `(ix, iy)` of flat index `iy · count1 + ix`.
    pub fn cell(&self, index: usize) -> (usize, usize) {
        (index % self.axis1.count, index / self.axis1.count)
    }

    pub fn coords(&self, index: usize) -> (f64, f64) {
        let (ix, iy) = self.cell(index);
        (self.axis1.center(ix), self.axis2.center(iy))
    }

    pub fn validate(&self) -> Result<()> {
        self.axis1.validate()?;
        self.axis2.validate()
    }
}

/// What the polynomial expansion is taken over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UncertaintyMode {
    Parameters { bounds: Vec<(f64, f64)> },
    /// A cube of side `edge` around each initial state, parameters fixed.
    InitialState { params: Vec<f64>, edge: f64 },
}

impl UncertaintyMode {
    pub fn parameters(b: &UncertaintyBox) -> Self {
        UncertaintyMode::Parameters { bounds: b.dims().iter().map(|d| (d.lo, d.hi)).collect() }
    }

    pub fn sampling(&self) -> Sampling {
        match self {
            UncertaintyMode::Parameters { .. } => Sampling::Parameters,
            UncertaintyMode::InitialState { params, .. } => Sampling::InitialState { params: params.clone() },
        }
    }

    /// Nominal parameters: box center, or the fixed values.
    pub fn nominal_params(&self) -> Vec<f64> {
        match self {
            UncertaintyMode::Parameters { bounds } => bounds.iter().map(|(a, b)| 0.5 * (a + b)).collect(),
            UncertaintyMode::InitialState { params, .. } => params.clone(),
        }
    }
}

/// Box of side `edge` centered on `z`.
pub fn ic_box(z: &[f64], edge: f64) -> Result<UncertaintyBox> {
    let bounds: Vec<(f64, f64)> = z.iter().map(|&c| (c - 0.5 * edge, c + 0.5 * edge)).collect();
    UncertaintyBox::from_bounds(&bounds)
}

/// Seed of cell `index`, independent of scheduling.
pub fn cell_seed(global: u64, index: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    mix(global ^ mix(index))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub ix: usize,
    pub iy: usize,
    pub u: f64,
    pub v: f64,
    pub result: IndicatorResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldResult {
    pub grid: GridSpec,
    pub selection: Selection,
    pub component_names: Vec<String>,
    pub n_terms: usize,
    /// Row-major by `iy`, then `ix`.
    pub cells: Vec<Cell>,
    pub elapsed_secs: f64,
}

impl FieldResult {
    pub fn columns(&self) -> Vec<String> {
        let mut cols = Vec::new();
        let s = self.selection;
        if s.ftle {
            cols.push("ftle".to_string());
        }
        if s.sftle1 {
            cols.extend(["sftle1_mean", "sftle1_var", "sftle1_skew"].map(String::from));
        }
        if s.sftle2 {
            cols.extend((0..self.n_terms).map(|i| format!("sftle2_{i}")));
        }
        if s.alpha {
            cols.push("alpha".to_string());
            cols.extend(self.component_names.iter().map(|c| format!("alpha_{c}")));
        }
        if s.expectation {
            cols.push("expectation".to_string());
        }
        cols
    }

    fn row(&self, r: &IndicatorResult) -> Vec<f64> {
        let mut row = Vec::new();
        let s = self.selection;
        if s.ftle {
            row.push(r.ftle);
        }
        if s.sftle1 {
            row.extend(r.sftle1);
        }
        if s.sftle2 {
            row.extend(&r.sftle2);
        }
        if s.alpha {
            row.push(r.alpha_tilde);
            row.extend(&r.alpha_tilde_components);
        }
        if s.expectation {
            row.push(r.expectation);
        }
        row
    }

    pub fn table(&self) -> FieldTable {
        FieldTable {
            nx: self.grid.axis1.count,
            ny: self.grid.axis2.count,
            columns: self.columns(),
            u: self.cells.iter().map(|c| c.u).collect(),
            v: self.cells.iter().map(|c| c.v).collect(),
            rows: self.cells.iter().map(|c| self.row(&c.result)).collect(),
            status: self.cells.iter().map(|c| c.result.status).collect(),
        }
    }
}

/// Flat tabular view of a field, as written to and read from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldTable {
    pub nx: usize,
    pub ny: usize,
    pub columns: Vec<String>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub status: Vec<GuardStatus>,
}

impl FieldTable {
    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| SdiError::invalid(format!("no column '{name}' (have {})", self.columns.join(", "))))
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let k = self.column_index(name)?;
        Ok(self.rows.iter().map(|r| r[k]).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub indicators: IndicatorConfig,
    pub selection: Selection,
    pub mode: UncertaintyMode,
    pub workers: usize,
}

fn compute_cell(
    system: &dyn DynamicalSystem,
    grid: &GridSpec,
    space: &PceSpace,
    sampling: &Sampling,
    cfg: &SweepConfig,
    index: usize,
) -> Cell {
    let (ix, iy) = grid.cell(index);
    let (u, v) = grid.coords(index);
    let n_terms = if cfg.selection.sftle2 { space.n_terms() } else { 0 };
    let result = match grid.embedding.embed(u, v) {
        Err(status) => IndicatorResult::empty(system.state_dim(), n_terms, status),
        Ok(z0) => {
            let seed = cell_seed(cfg.indicators.seed, index as u64);
            match &cfg.mode {
                UncertaintyMode::Parameters { .. } => compute(system, space, sampling, &z0, cfg.selection, &cfg.indicators, seed),
                UncertaintyMode::InitialState { edge, .. } => match ic_box(&z0, *edge).and_then(|b| space.with_domain(b)) {
                    Ok(local) => compute(system, &local, sampling, &z0, cfg.selection, &cfg.indicators, seed),
                    Err(_) => IndicatorResult::empty(system.state_dim(), n_terms, GuardStatus::NonFinite),
                },
            }
        }
    };
    Cell { ix, iy, u, v, result }
}

/// Space the sweep expands over. In initial-state mode its box is a
/// placeholder that every cell re-centers.
pub fn sweep_space(system: &dyn DynamicalSystem, cfg: &SweepConfig) -> Result<PceSpace> {
    let b = match &cfg.mode {
        UncertaintyMode::Parameters { bounds } => {
            if bounds.len() != system.param_dim() {
                return Err(SdiError::invalid(format!(
                    "{} takes {} parameters, box has {}",
                    system.name(),
                    system.param_dim(),
                    bounds.len()
                )));
            }
            UncertaintyBox::from_bounds(bounds)?
        }
        UncertaintyMode::InitialState { params, edge } => {
            if params.len() != system.param_dim() {
                return Err(SdiError::invalid("wrong number of fixed parameters"));
            }
            if !(*edge > 0.0) {
                return Err(SdiError::invalid("initial-state box edge must be positive"));
            }
            ic_box(&vec![0.0; system.state_dim()], *edge)?
        }
    };
    PceSpace::build(cfg.indicators.degree, cfg.indicators.n_per_dim, b)
}

/// Computes the selected indicators on every grid cell.
///
/// Cells are independent tasks with pre-assigned seeds, so the output does
/// not depend on the worker count.
pub fn sweep(system: &dyn DynamicalSystem, grid: &GridSpec, cfg: &SweepConfig) -> Result<FieldResult> {
    grid.validate()?;
    cfg.indicators.validate()?;
    if grid.embedding.state_dim() != system.state_dim() {
        return Err(SdiError::invalid(format!(
            "grid embedding yields {} states but {} has {}",
            grid.embedding.state_dim(),
            system.name(),
            system.state_dim()
        )));
    }
    if cfg.selection == Selection::NONE {
        return Err(SdiError::invalid("no indicator selected"));
    }
    if cfg.selection.alpha && cfg.indicators.horizon() <= crate::indicators::MIN_ALPHA_HORIZON {
        return Err(SdiError::invalid("pseudo-diffusion exponent needs tf - t0 > 1.05"));
    }
    let space = sweep_space(system, cfg)?;
    let sampling = cfg.mode.sampling();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.max(1))
        .build()
        .map_err(|e| SdiError::Config(e.to_string()))?;
    let start = Instant::now();
    let cells: Vec<Cell> = pool.install(|| {
        (0..grid.n_cells())
            .into_par_iter()
            .map(|i| compute_cell(system, grid, &space, &sampling, cfg, i))
            .collect()
    });
    Ok(FieldResult {
        grid: grid.clone(),
        selection: cfg.selection,
        component_names: system.component_names(),
        n_terms: space.n_terms(),
        cells,
        elapsed_secs: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Predicate {
    /// `value < threshold`
    Below { threshold: f64 },
    /// `lo ≤ value ≤ hi`
    Band { lo: f64, hi: f64 },
}

impl Predicate {
    pub fn holds(&self, x: f64) -> bool {
        match *self {
            Predicate::Below { threshold } => x < threshold,
            Predicate::Band { lo, hi } => lo <= x && x <= hi,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub id: usize,
    pub area: usize,
    /// `(ix_min, iy_min, ix_max, iy_max)`
    pub bbox: (usize, usize, usize, usize),
    /// `(ix, iy, u, v)` of the first cell found.
    pub sample: (usize, usize, f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionMask {
    pub column: String,
    pub predicate: Predicate,
    pub nx: usize,
    pub ny: usize,
    pub mask: Vec<bool>,
    /// Component id per cell, 0 where the mask is false.
    pub labels: Vec<usize>,
    pub components: Vec<Component>,
}

impl RegionMask {
    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

/// Cells of `column` satisfying `predicate` (ok-status cells only), grouped
/// into 4-neighbour connected components.
pub fn extract_regions(table: &FieldTable, column: &str, predicate: Predicate) -> Result<RegionMask> {
    let values = table.column(column)?;
    let (nx, ny) = (table.nx, table.ny);
    if values.len() != nx * ny {
        return Err(SdiError::invalid("field size does not match its grid"));
    }
    let mask: Vec<bool> = values
        .iter()
        .zip(&table.status)
        .map(|(&x, s)| s.is_ok() && x.is_finite() && predicate.holds(x))
        .collect();

    let mut labels = vec![0usize; nx * ny];
    let mut components = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..nx * ny {
        if !mask[start] || labels[start] != 0 {
            continue;
        }
        let id = components.len() + 1;
        let (sx, sy) = (start % nx, start / nx);
        let mut comp = Component { id, area: 0, bbox: (sx, sy, sx, sy), sample: (sx, sy, table.u[start], table.v[start]) };
        labels[start] = id;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            let (x, y) = (i % nx, i / nx);
            comp.area += 1;
            comp.bbox = (comp.bbox.0.min(x), comp.bbox.1.min(y), comp.bbox.2.max(x), comp.bbox.3.max(y));
            let mut visit = |j: usize| {
                if mask[j] && labels[j] == 0 {
                    labels[j] = id;
                    queue.push_back(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < nx {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - nx);
            }
            if y + 1 < ny {
                visit(i + nx);
            }
        }
        components.push(comp);
    }
    Ok(RegionMask { column: column.to_string(), predicate, nx, ny, mask, labels, components })
}

/// Longest exported time series per realization.
pub const MAX_SERIES_LEN: usize = 2000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Realization {
    pub id: usize,
    pub params: Vec<f64>,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub status: GuardStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStudy {
    pub realizations: Vec<Realization>,
    /// Largest pairwise distance between final states of ok realizations.
    pub terminal_spread: f64,
}

fn decimate<T: Clone>(v: &[T], max_len: usize) -> Vec<T> {
    if v.len() <= max_len {
        return v.to_vec();
    }
    let last = v.len() - 1;
    (0..max_len).map(|k| v[k * last / (max_len - 1)].clone()).collect()
}

/// Propagates `n` trajectories from `z0` with parameters drawn uniformly
/// from `params_box`.
pub fn ensemble_study(
    system: &dyn DynamicalSystem,
    z0: &[f64],
    params_box: &UncertaintyBox,
    n: usize,
    t0: f64,
    tf: f64,
    integrator: &IntegratorConfig,
    seed: u64,
) -> Result<EnsembleStudy> {
    if z0.len() != system.state_dim() || params_box.n_dims() != system.param_dim() {
        return Err(SdiError::invalid("initial state or parameter box has the wrong dimension"));
    }
    if n == 0 || !(tf > t0) {
        return Err(SdiError::invalid("need at least one realization and tf > t0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let xi: Vec<f64> = (0..params_box.n_dims()).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            params_box.map_to_box(&xi)
        })
        .collect();
    let realizations: Vec<Realization> = draws
        .into_par_iter()
        .enumerate()
        .map(|(id, p)| {
            let mut times = Vec::new();
            let mut states = Vec::new();
            let r = integrate_observed(
                |t, z, dz| {
                    system.rhs(t, &p, z, dz);
                    Ok(())
                },
                |_, z| {
                    if z.iter().all(|v| v.is_finite()) {
                        system.guard(&p, z)
                    } else {
                        GuardStatus::NonFinite
                    }
                },
                |t, z| {
                    times.push(t);
                    states.push(z.to_vec());
                },
                z0,
                t0,
                tf,
                integrator,
            );
            Realization { id, params: p, times: decimate(&times, MAX_SERIES_LEN), states: decimate(&states, MAX_SERIES_LEN), status: r.status }
        })
        .collect();

    let finals: Vec<&Vec<f64>> =
        realizations.iter().filter(|r| r.status.is_ok()).filter_map(|r| r.states.last()).collect();
    let mut spread = 0.0f64;
    for (i, a) in finals.iter().enumerate() {
        for b in &finals[i + 1..] {
            let d = a.iter().zip(b.iter()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            spread = spread.max(d);
        }
    }
    Ok(EnsembleStudy { realizations, terminal_spread: spread })
}
