//! Table rows, curve data and parameter sweeps.

use serde::{Deserialize, Serialize};

use crate::compressor::{
    Compressor, CompressorModel, ModelKind, OptimalCompressor, QuadraticPiece,
};
use crate::design::{build_segment_grid, Design, DesignConfig};
use crate::distortion::DistortionReport;
use crate::error::{Error, Result};

/// Level counts the tables are computed for.
pub const TABLE_LEVELS: [usize; 4] = [16, 32, 64, 128];

/// Published SQNR (dB) of the reference piecewise-uniform quantizer with
/// equidistant segment thresholds, keyed by N. Carried for comparison only;
/// that design is not implemented here.
pub const REFERENCE_PIECEWISE_UNIFORM_SQNR_DB: [(usize, f64); 4] =
    [(16, 19.36), (32, 25.33), (64, 31.08), (128, 36.82)];

/// Knots, knot values and slopes of the first-degree spline for one N.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearSplineRow {
    pub levels: usize,
    pub x1: f64,
    pub x_max: f64,
    pub c_x1: f64,
    pub c_x2: f64,
    pub m1: f64,
    pub m2: f64,
}

/// Signed coefficients of the quadratic spline for one N.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticSplineRow {
    pub levels: usize,
    pub x1: f64,
    pub x_max: f64,
    pub pieces: [QuadraticPiece; 2],
}

impl QuadraticSplineRow {
    /// `(a1, b1, d1, a2, b2, d2)`.
    pub fn coefficients(&self) -> [f64; 6] {
        let [p, q] = self.pieces;
        [p.a, p.b, p.d, q.a, q.b, q.d]
    }
}

/// SQNR of the three compressor kinds for one N, next to the published
/// reference quantizer value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqnrRow {
    pub levels: usize,
    pub reference_published_db: f64,
    pub linear_db: f64,
    pub quadratic_db: f64,
    pub optimal_db: f64,
}

pub fn linear_spline_table(levels: &[usize]) -> Result<Vec<LinearSplineRow>> {
    levels
        .iter()
        .map(|&n| {
            let design = Design::build(DesignConfig::new(n, ModelKind::LinearSpline))?;
            let CompressorModel::LinearSpline(m) = &design.model else {
                return Err(Error::Internal("expected a linear spline".into()));
            };
            let g = &design.grid;
            Ok(LinearSplineRow {
                levels: n,
                x1: g.knots()[1],
                x_max: g.x_max(),
                c_x1: g.values()[1],
                c_x2: g.values()[2],
                m1: m.slopes()[0],
                m2: m.slopes()[1],
            })
        })
        .collect()
}

pub fn quadratic_spline_table(levels: &[usize]) -> Result<Vec<QuadraticSplineRow>> {
    levels
        .iter()
        .map(|&n| {
            let design = Design::build(DesignConfig::new(n, ModelKind::QuadraticSpline))?;
            let CompressorModel::QuadraticSpline(m) = &design.model else {
                return Err(Error::Internal("expected a quadratic spline".into()));
            };
            Ok(QuadraticSplineRow {
                levels: n,
                x1: design.grid.knots()[1],
                x_max: design.grid.x_max(),
                pieces: *m.pieces(),
            })
        })
        .collect()
}

pub fn sqnr_table(levels: &[usize]) -> Result<Vec<SqnrRow>> {
    levels
        .iter()
        .map(|&n| {
            let db = |kind| -> Result<f64> {
                Ok(Design::build(DesignConfig::new(n, kind))?
                    .distortion()?
                    .sqnr_db)
            };
            Ok(SqnrRow {
                levels: n,
                reference_published_db: reference_sqnr_db(n).unwrap_or(f64::NAN),
                linear_db: db(ModelKind::LinearSpline)?,
                quadratic_db: db(ModelKind::QuadraticSpline)?,
                optimal_db: db(ModelKind::Optimal)?,
            })
        })
        .collect()
}

pub fn reference_sqnr_db(levels: usize) -> Option<f64> {
    REFERENCE_PIECEWISE_UNIFORM_SQNR_DB
        .iter()
        .find(|(n, _)| *n == levels)
        .map(|(_, v)| *v)
}

/// Rows `(x, c(x), g_linear(x), g_quadratic(x))` on `samples` uniform points of `[0, x_max]`.
pub fn compressor_curves(levels: usize, samples: usize) -> Result<Vec<[f64; 4]>> {
    if samples < 2 {
        return Err(Error::Config(format!(
            "need at least 2 curve samples, got {samples}"
        )));
    }
    let grid = build_segment_grid(&DesignConfig::new(levels, ModelKind::Optimal))?;
    let x_max = grid.x_max();
    let optimal = OptimalCompressor::new(1.0, x_max)?;
    let linear = CompressorModel::fit(ModelKind::LinearSpline, &grid, 1.0)?;
    let quadratic = CompressorModel::fit(ModelKind::QuadraticSpline, &grid, 1.0)?;
    (0..samples)
        .map(|i| {
            let x = if i + 1 == samples {
                x_max
            } else {
                x_max * i as f64 / (samples - 1) as f64
            };
            Ok([
                x,
                optimal.evaluate(x)?,
                linear.evaluate(x)?,
                quadratic.evaluate(x)?,
            ])
        })
        .collect()
}

/// Rows `(log2 N, SQNR linear, SQNR quadratic, SQNR optimal)`.
pub fn sqnr_vs_bits(levels: &[usize]) -> Result<Vec<[f64; 4]>> {
    Ok(sqnr_table(levels)?
        .into_iter()
        .map(|r| {
            [
                (r.levels as f64).log2(),
                r.linear_db,
                r.quadratic_db,
                r.optimal_db,
            ]
        })
        .collect())
}

/// Largest `|g(x) - c(x)|` over `samples` uniform points of `[0, x_max]`.
pub fn sup_norm_error(
    model: &CompressorModel,
    optimal: &OptimalCompressor,
    samples: usize,
) -> Result<f64> {
    let x_max = optimal.x_max();
    let mut worst = 0.0f64;
    for i in 0..samples {
        let x = x_max * i as f64 / (samples - 1).max(1) as f64;
        worst = worst.max((model.evaluate(x)? - optimal.evaluate(x)?).abs());
    }
    Ok(worst)
}

/// One cell of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub levels: usize,
    pub model: ModelKind,
    pub sigma: f64,
    pub outcome: std::result::Result<(f64, DistortionReport), Error>,
}

/// Result of [`sweep`]: rows ordered by `(N, model)` and the duplicate N values dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub rows: Vec<SweepRow>,
    pub duplicates: Vec<usize>,
}

impl Sweep {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.outcome.is_err()).count()
    }
}

/// Evaluates every `(N, model)` pair. Each cell carries `x_max` with its report,
/// or the error that stopped it.
pub fn sweep(levels: &[usize], models: &[ModelKind], sigma: f64) -> Result<Sweep> {
    if levels.is_empty() {
        return Err(Error::Config("sweep needs at least one level count".into()));
    }
    if models.is_empty() {
        return Err(Error::Config("sweep needs at least one model".into()));
    }
    let mut ns = levels.to_vec();
    ns.sort_unstable();
    let mut duplicates = Vec::new();
    ns.dedup_by(|a, b| {
        let dup = a == b;
        if dup {
            duplicates.push(*a);
        }
        dup
    });
    let mut kinds = models.to_vec();
    kinds.sort_unstable();
    kinds.dedup();
    let rows = ns
        .iter()
        .flat_map(|&n| kinds.iter().map(move |&k| (n, k)))
        .map(|(n, model)| {
            let outcome = Design::build(DesignConfig::new(n, model).with_sigma(sigma))
                .and_then(|d| Ok((d.codebook.x_max, d.distortion()?)));
            SweepRow {
                levels: n,
                model,
                sigma,
                outcome,
            }
        })
        .collect();
    Ok(Sweep { rows, duplicates })
}
