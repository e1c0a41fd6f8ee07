//! Shape-set statistics and the parameter-grid experiment runner.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::inference::{hill_climb, InferenceError, InferenceParams, SearchOps, ShapeSet};
use crate::shape::{match_classes, ShapeSpec};
use crate::voxel::VoxelModel;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("statistics of an empty shape set are undefined")]
    EmptySet,
    #[error("the corpus or the parameter grid is empty")]
    EmptyGrid,
    #[error("inference failed on {model} (spec {spec}, alpha {alpha}, ops {ops}, overlap {overlap}): {source}")]
    Cell {
        model: String,
        spec: ShapeSpec,
        alpha: f64,
        ops: SearchOps,
        overlap: bool,
        source: InferenceError,
    },
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShapeSetStats {
    /// #S
    pub num_shapes: usize,
    /// %M: percentage of shapes with at least one matching partner.
    pub pct_matching: f64,
    /// Mean blocks per shape.
    pub mean_size: f64,
    /// C: mean over shapes of distinct block types per block.
    pub complexity: f64,
}

pub fn stats(s: &ShapeSet) -> Result<ShapeSetStats, MetricsError> {
    let shapes = s.shapes();
    if shapes.is_empty() {
        return Err(MetricsError::EmptySet);
    }
    let n = shapes.len() as f64;
    let matching: usize = match_classes(shapes)
        .iter()
        .filter(|c| c.len() >= 2)
        .map(|c| c.len())
        .sum();
    Ok(ShapeSetStats {
        num_shapes: shapes.len(),
        pct_matching: 100.0 * matching as f64 / n,
        mean_size: shapes.iter().map(|s| s.len() as f64).sum::<f64>() / n,
        complexity: shapes
            .iter()
            .map(|s| s.distinct_types() as f64 / s.len() as f64)
            .sum::<f64>()
            / n,
    })
}

/// Parameter combinations to sweep; cells run in the nested order
/// model, spec, alpha, ops, overlap.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub specs: Vec<ShapeSpec>,
    pub alphas: Vec<f64>,
    pub ops: Vec<SearchOps>,
    pub overlaps: Vec<bool>,
    /// Record wall-clock time per cell. Off makes the CSV reproducible.
    pub timing: bool,
}

impl Default for Grid {
    fn default() -> Self {
        Self {
            specs: ShapeSpec::ALL.to_vec(),
            alphas: vec![0.0, 0.5, 1.0, 2.0, 5.0, 100.0],
            ops: SearchOps::ALL.to_vec(),
            overlaps: vec![false, true],
            timing: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridRow {
    pub model: String,
    pub spec: ShapeSpec,
    pub alpha: f64,
    pub ops: SearchOps,
    pub overlap: bool,
    #[serde(rename = "#S")]
    pub num_shapes: f64,
    #[serde(rename = "%M")]
    pub pct_matching: f64,
    pub mean_size: f64,
    #[serde(rename = "C")]
    pub complexity: f64,
    pub cost: f64,
    pub wall_time_ms: f64,
}

#[derive(Debug, Clone)]
pub struct GridReport {
    /// One row per (model, parameter combination), in grid order.
    pub rows: Vec<GridRow>,
    /// The inferred set behind each row.
    pub sets: Vec<ShapeSet>,
    /// Per combination, a `mean` and a `median` row pooled over all models.
    pub aggregates: Vec<GridRow>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Cell {
    spec: ShapeSpec,
    alpha: f64,
    ops: SearchOps,
    overlap: bool,
}

impl Grid {
    fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &spec in &self.specs {
            for &alpha in &self.alphas {
                for &ops in &self.ops {
                    for &overlap in &self.overlaps {
                        out.push(Cell { spec, alpha, ops, overlap });
                    }
                }
            }
        }
        out
    }
}

/// Runs inference on every (model, combination) cell in parallel. Rows come
/// back in grid order regardless of scheduling.
pub fn run_grid(models: &[VoxelModel], grid: &Grid) -> Result<GridReport, MetricsError> {
    let cells = grid.cells();
    if models.is_empty() || cells.is_empty() {
        return Err(MetricsError::EmptyGrid);
    }
    let jobs: Vec<(&VoxelModel, Cell)> = models
        .iter()
        .flat_map(|m| cells.iter().map(move |c| (m, *c)))
        .collect();
    let results: Vec<(GridRow, ShapeSet)> = jobs
        .par_iter()
        .map(|(m, c)| run_cell(m, *c, grid.timing))
        .collect::<Result<_, _>>()?;
    let (rows, sets): (Vec<GridRow>, Vec<ShapeSet>) = results.into_iter().unzip();
    let mut aggregates = Vec::new();
    for (k, c) in cells.iter().enumerate() {
        let group: Vec<&GridRow> = rows.iter().skip(k).step_by(cells.len()).collect();
        aggregates.push(aggregate("mean", *c, &group, mean));
        aggregates.push(aggregate("median", *c, &group, median));
    }
    Ok(GridReport { rows, sets, aggregates })
}

fn run_cell(m: &VoxelModel, c: Cell, timing: bool) -> Result<(GridRow, ShapeSet), MetricsError> {
    let params = InferenceParams::new(c.spec, c.alpha, c.ops).with_overlap(c.overlap);
    let started = Instant::now();
    let set = hill_climb(m, &params).map_err(|source| MetricsError::Cell {
        model: m.name().to_string(),
        spec: c.spec,
        alpha: c.alpha,
        ops: c.ops,
        overlap: c.overlap,
        source,
    })?;
    let elapsed = started.elapsed().as_secs_f64() * 1000.0;
    let st = stats(&set)?;
    let row = GridRow {
        model: m.name().to_string(),
        spec: c.spec,
        alpha: c.alpha,
        ops: c.ops,
        overlap: c.overlap,
        num_shapes: st.num_shapes as f64,
        pct_matching: st.pct_matching,
        mean_size: st.mean_size,
        complexity: st.complexity,
        cost: set.cost(c.alpha),
        wall_time_ms: if timing { elapsed } else { 0.0 },
    };
    Ok((row, set))
}

fn aggregate(label: &str, c: Cell, rows: &[&GridRow], f: fn(Vec<f64>) -> f64) -> GridRow {
    let col = |g: fn(&GridRow) -> f64| f(rows.iter().map(|r| g(r)).collect());
    GridRow {
        model: label.to_string(),
        spec: c.spec,
        alpha: c.alpha,
        ops: c.ops,
        overlap: c.overlap,
        num_shapes: col(|r| r.num_shapes),
        pct_matching: col(|r| r.pct_matching),
        mean_size: col(|r| r.mean_size),
        complexity: col(|r| r.complexity),
        cost: col(|r| r.cost),
        wall_time_ms: col(|r| r.wall_time_ms),
    }
}

pub fn mean(xs: Vec<f64>) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn median(mut xs: Vec<f64>) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

impl GridReport {
    /// Data rows followed by aggregate rows, with a header.
    pub fn to_csv(&self) -> Result<String, MetricsError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in self.rows.iter().chain(&self.aggregates) {
            w.serialize(row)?;
        }
        let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Mean of `column` over the data rows selected by `keep`.
    pub fn pooled_mean(&self, keep: impl Fn(&GridRow) -> bool, column: fn(&GridRow) -> f64) -> f64 {
        mean(self.rows.iter().filter(|r| keep(r)).map(column).collect())
    }
}
