//! Companding quantizer construction.
//!
//! A design fixes the support threshold `x_max`, splits `[0, x_max]` into `L`
//! equal segments, fits a compressor through the segment knots, and places the
//! `(N - 2) / 2` positive inner levels at the midpoints of a uniform grid of
//! step `Delta = 2 x_max / (N - 2)` in the compressed domain. The outermost
//! level `y_max` is the centroid of the Gaussian tail beyond `x_max`, giving
//! `N` levels in total.

use serde::{Deserialize, Serialize};

use crate::compressor::{
    Compressor, CompressorModel, ModelDump, ModelKind, OptimalCompressor, SegmentGrid,
};
use crate::error::{Error, Result};
use crate::special::{gaussian_tail_moment, GaussianParams};

/// Parameters of one quantizer design.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignConfig {
    /// Total number of reproduction levels `N`.
    pub levels: usize,
    /// Segments per half-axis `L`.
    pub segments: usize,
    pub sigma: f64,
    pub model: ModelKind,
}

impl DesignConfig {
    pub fn new(levels: usize, model: ModelKind) -> Self {
        Self {
            levels,
            segments: 2,
            sigma: 1.0,
            model,
        }
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn with_segments(mut self, segments: usize) -> Self {
        self.segments = segments;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels < 8 || !self.levels.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "number of levels must be even and at least 8, got {}",
                self.levels
            )));
        }
        if self.segments == 0 {
            return Err(Error::Config(
                "need at least one segment per half-axis".into(),
            ));
        }
        if self.model == ModelKind::QuadraticSpline && self.segments != 2 {
            return Err(Error::Config(format!(
                "the quadratic spline is defined for 2 segments per half-axis, got {}",
                self.segments
            )));
        }
        GaussianParams::new(self.sigma)?;
        Ok(())
    }

    pub fn params(&self) -> Result<GaussianParams> {
        GaussianParams::new(self.sigma)
    }

    /// Number of positive inner levels, `(N - 2) / 2`.
    pub fn inner_per_side(&self) -> usize {
        (self.levels - 2) / 2
    }
}

/// Support region threshold of the optimal Gaussian compandor with `n` levels:
///
/// ```text
/// x_max = sigma sqrt(6 ln N) [1 - ln ln N / (4 ln N) - ln(3 sqrt(pi)) / (2 ln N)]
/// ```
pub fn support_threshold(n: usize, sigma: f64) -> Result<f64> {
    if n < 4 {
        return Err(Error::Config(format!(
            "support threshold needs N >= 4, got {n}"
        )));
    }
    GaussianParams::new(sigma)?;
    let ln_n = (n as f64).ln();
    let correction =
        1.0 - ln_n.ln() / (4.0 * ln_n) - (3.0 * std::f64::consts::PI.sqrt()).ln() / (2.0 * ln_n);
    Ok(sigma * (6.0 * ln_n).sqrt() * correction)
}

/// Equal-width knots on `[0, x_max]` carrying optimal-compressor values.
pub fn build_segment_grid(config: &DesignConfig) -> Result<SegmentGrid> {
    config.validate()?;
    let x_max = support_threshold(config.levels, config.sigma)?;
    let optimal = OptimalCompressor::new(config.sigma, x_max)?;
    let l = config.segments;
    let mut knots: Vec<f64> = (0..=l).map(|i| i as f64 * x_max / l as f64).collect();
    knots[l] = x_max;
    let values = knots.iter().map(|&x| optimal.eval_half(x)).collect();
    SegmentGrid::new(knots, values)
}

/// Distribution of the positive inner levels over the segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelAllocation {
    /// `((N - 2) / 2) (c(x_i) - c(x_{i-1})) / c(x_L)` per segment, before rounding.
    pub exact_shares: Vec<f64>,
    /// Levels actually placed in each segment.
    pub counts: Vec<usize>,
}

/// Splits the `(N - 2) / 2` positive levels among segments.
///
/// Integer counts come from the compressed-domain grid itself: a segment gets
/// every midpoint `(2k - 1) Delta / 2` lying in `(c(x_{i-1}), c(x_i)]`.
pub fn allocate_levels(grid: &SegmentGrid, levels: usize) -> Result<LevelAllocation> {
    if levels < 4 || !levels.is_multiple_of(2) {
        return Err(Error::Config(format!(
            "number of levels must be even, got {levels}"
        )));
    }
    let per_side = (levels - 2) / 2;
    let values = grid.values();
    let top = values[values.len() - 1];
    let exact_shares = values
        .windows(2)
        .map(|w| per_side as f64 * (w[1] - w[0]) / top)
        .collect();
    let step = grid.x_max() / per_side as f64;
    let mut counts = vec![0; grid.segments()];
    for k in 1..=per_side {
        counts[grid.piece_of_value(midpoint(k, step))] += 1;
    }
    Ok(LevelAllocation {
        exact_shares,
        counts,
    })
}

#[inline]
fn midpoint(k: usize, step: f64) -> f64 {
    (2 * k - 1) as f64 * step / 2.0
}

/// Reproduction levels and cell geometry of a companding quantizer.
///
/// All vectors describe the positive half; the negative half mirrors it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codebook {
    /// Total number of levels `N`, including `+-y_max`.
    pub levels_total: usize,
    /// Compressed-domain step `Delta`.
    pub step: f64,
    /// Inner levels `y_1 < ... < y_{(N-2)/2}`.
    pub levels: Vec<f64>,
    /// 1-based segment of each inner level.
    pub segments: Vec<usize>,
    /// Cell edges `t_0 = 0 < t_1 < ... < t_{(N-2)/2} = x_max`.
    pub edges: Vec<f64>,
    /// First-order cell lengths `Delta / g'(y_k)`.
    pub cell_lengths: Vec<f64>,
    pub x_max: f64,
    pub y_max: f64,
    pub counts: Vec<usize>,
    pub shares: Vec<f64>,
}

impl Codebook {
    /// Inner levels per side.
    pub fn inner_per_side(&self) -> usize {
        self.levels.len()
    }

    /// All `N` levels in increasing order.
    pub fn all_levels(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.levels_total);
        out.push(-self.y_max);
        out.extend(self.levels.iter().rev().map(|y| -y));
        out.extend_from_slice(&self.levels);
        out.push(self.y_max);
        out
    }

    /// Exact cell widths `t_k - t_{k-1}`.
    pub fn edge_widths(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

/// Places levels and edges for `model`, which must be fitted on the grid of `config`.
pub fn build_codebook(
    config: &DesignConfig,
    grid: &SegmentGrid,
    model: &CompressorModel,
) -> Result<Codebook> {
    config.validate()?;
    let per_side = config.inner_per_side();
    let x_max = grid.x_max();
    if (model.x_max() - x_max).abs() > 1e-12 * x_max {
        return Err(Error::Internal("model and grid disagree on x_max".into()));
    }
    let step = 2.0 * x_max / (config.levels - 2) as f64;
    let alloc = allocate_levels(grid, config.levels)?;

    let mut levels = Vec::with_capacity(per_side);
    let mut segments = Vec::with_capacity(per_side);
    let mut cell_lengths = Vec::with_capacity(per_side);
    for k in 1..=per_side {
        let u = midpoint(k, step);
        let y = model.inverse(u)?;
        let slope = model.derivative(y)?;
        if !(slope > 0.0) {
            return Err(Error::Internal(format!(
                "non-positive compressor slope {slope} at level {y}"
            )));
        }
        levels.push(y);
        segments.push(grid.piece_of_value(u) + 1);
        cell_lengths.push(step / slope);
    }

    let mut edges = Vec::with_capacity(per_side + 1);
    edges.push(0.0);
    for k in 1..per_side {
        edges.push(model.inverse(k as f64 * step)?);
    }
    edges.push(x_max);

    let y_max = centroid_overload_level(x_max, config.params()?)?;
    Ok(Codebook {
        levels_total: config.levels,
        step,
        levels,
        segments,
        edges,
        cell_lengths,
        x_max,
        y_max,
        counts: alloc.counts,
        shares: alloc.exact_shares,
    })
}

/// Conditional mean of the source beyond `x_max`.
pub fn centroid_overload_level(x_max: f64, params: GaussianParams) -> Result<f64> {
    if !(x_max >= 0.0 && x_max.is_finite()) {
        return Err(Error::Domain(format!(
            "x_max must be non-negative, got {x_max}"
        )));
    }
    let mass = gaussian_tail_moment(0, x_max, params)?;
    let first = gaussian_tail_moment(1, x_max, params)?;
    let y = first / mass;
    if mass <= f64::MIN_POSITIVE || !y.is_finite() || (x_max > 0.0 && y <= x_max) {
        return Err(Error::Numeric {
            message: format!("tail beyond x_max = {x_max} is too thin to locate its centroid"),
            estimate: y,
            achieved: mass,
        });
    }
    Ok(y)
}

/// A complete companding quantizer: grid, fitted compressor and codebook.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub config: DesignConfig,
    pub grid: SegmentGrid,
    pub model: CompressorModel,
    pub codebook: Codebook,
}

impl Design {
    pub fn build(config: DesignConfig) -> Result<Self> {
        let grid = build_segment_grid(&config)?;
        let model = CompressorModel::fit(config.model, &grid, config.sigma)?;
        let codebook = build_codebook(&config, &grid, &model)?;
        Ok(Self {
            config,
            grid,
            model,
            codebook,
        })
    }

    pub fn params(&self) -> GaussianParams {
        GaussianParams::new(self.config.sigma).expect("validated at build time")
    }

    pub fn model_dump(&self) -> ModelDump {
        ModelDump::new(&self.model, &self.grid, self.config.sigma)
    }

    /// Maps `x` to its reproduction level.
    ///
    /// Inputs beyond the support go to `+-y_max`. Otherwise the compressed
    /// value selects cell `k = min(floor(c(|x|) / Delta) + 1, (N - 2) / 2)`,
    /// whose level is `c^{-1}((2k - 1) Delta / 2)`. Zero maps to the smallest
    /// positive level.
    pub fn quantize(&self, x: f64) -> f64 {
        quantize_with(&self.codebook, &self.model, x)
    }
}

pub(crate) fn quantize_with(codebook: &Codebook, model: &CompressorModel, x: f64) -> f64 {
    let a = x.abs();
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    if a > codebook.x_max {
        return sign * codebook.y_max;
    }
    let u = model.eval_half(a);
    let per_side = codebook.levels.len();
    let k = ((u / codebook.step).floor() as usize).min(per_side - 1);
    sign * codebook.levels[k]
}
