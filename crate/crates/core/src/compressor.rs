//! Compressor functions on `[-x_max, x_max]`.
//!
//! Three kinds share the [`Compressor`] interface: the optimal Gaussian
//! compressor and its first-degree and quadratic spline approximations fitted
//! through a [`SegmentGrid`]. Each kind is defined on the positive half-axis
//! and extended oddly, `c(-x) = -c(x)`.
//!
//! The optimal compressor is normalized so that `c(x_max) = x_max`:
//!
//! ```text
//! c(x) = x_max * erf(|x| / (sqrt(6) sigma)) / erf(x_max / (sqrt(6) sigma)) * sgn(x)
//! ```
//!
//! The frequently quoted form without the leading `x_max` maps the support onto
//! `[-1, 1]` instead, which does not match the knot values the spline fits are
//! built from.

use nalgebra::{Matrix6, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::special::{find_root_monotone, FRAC_2_SQRT_PI, SQRT_6};

/// Relative slack allowed when an argument lands a rounding error past `x_max`.
const EDGE_SLACK: f64 = 1e-12;

/// Below this magnitude a quadratic piece is inverted as a straight line.
const LINEAR_CURVATURE: f64 = 1e-12;

/// Knots `0 = x_0 < ... < x_L = x_max` with compressor values at each knot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentGrid {
    knots: Vec<f64>,
    values: Vec<f64>,
}

impl SegmentGrid {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if knots.len() < 2 || knots.len() != values.len() {
            return Err(Error::Fit(format!(
                "grid needs matching knot/value lists of length >= 2, got {} and {}",
                knots.len(),
                values.len()
            )));
        }
        if knots.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::Fit("grid contains non-finite entries".into()));
        }
        if knots[0] != 0.0 || values[0] != 0.0 {
            return Err(Error::Fit("grid must start at the origin".into()));
        }
        if knots.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Fit("knots must be strictly increasing".into()));
        }
        if values.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Fit("knot values must be strictly increasing".into()));
        }
        let x_max = knots[knots.len() - 1];
        let top = values[values.len() - 1];
        if (top - x_max).abs() > EDGE_SLACK * x_max {
            return Err(Error::Fit(format!(
                "grid must map x_max onto itself, got c({x_max}) = {top}"
            )));
        }
        Ok(Self { knots, values })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn x_max(&self) -> f64 {
        self.knots[self.knots.len() - 1]
    }

    /// Number of pieces on the positive half-axis.
    pub fn segments(&self) -> usize {
        self.knots.len() - 1
    }

    /// Piece containing `x` in `[0, x_max]`; a knot belongs to the piece on its left.
    pub fn piece_of(&self, x: f64) -> usize {
        locate(&self.knots, x)
    }

    /// Piece whose compressed range `(c(x_{i-1}), c(x_i)]` contains `u`.
    pub fn piece_of_value(&self, u: f64) -> usize {
        locate(&self.values, u)
    }
}

fn locate(edges: &[f64], v: f64) -> usize {
    // First piece i (0-based) with v <= edges[i + 1].
    let pieces = edges.len() - 1;
    edges[1..].partition_point(|&e| e < v).min(pieces - 1)
}

/// Common interface of the three compressor kinds.
///
/// Implementors supply the positive half-axis maps; the provided methods add
/// range checks and the odd extension.
pub trait Compressor {
    fn x_max(&self) -> f64;

    /// `c(x)` for `x` in `[0, x_max]`.
    fn eval_half(&self, x: f64) -> f64;

    /// `c'(x)` for `x` in `[0, x_max]`.
    fn derivative_half(&self, x: f64) -> f64;

    /// `c^{-1}(u)` for `u` in `[0, x_max]`.
    fn inverse_half(&self, u: f64) -> Result<f64>;

    fn evaluate(&self, x: f64) -> Result<f64> {
        ensure_finite("compressor argument", x)?;
        let a = clamp_to_support(x.abs(), self.x_max(), "compressor argument")?;
        Ok(self.eval_half(a).copysign(x))
    }

    /// Slope at `x`; even in `x`.
    fn derivative(&self, x: f64) -> Result<f64> {
        ensure_finite("compressor argument", x)?;
        let a = clamp_to_support(x.abs(), self.x_max(), "compressor argument")?;
        Ok(self.derivative_half(a))
    }

    fn inverse(&self, u: f64) -> Result<f64> {
        ensure_finite("compressed value", u)?;
        let a = clamp_to_support(u.abs(), self.x_max(), "compressed value")?;
        Ok(self.inverse_half(a)?.copysign(u))
    }
}

fn clamp_to_support(a: f64, x_max: f64, what: &str) -> Result<f64> {
    if a <= x_max {
        Ok(a)
    } else if a <= x_max * (1.0 + EDGE_SLACK) {
        Ok(x_max)
    } else {
        Err(Error::Domain(format!(
            "{what} {a} lies outside [-{x_max}, {x_max}]"
        )))
    }
}

/// The SQNR-optimal compressor for a Gaussian source, normalized to `c(x_max) = x_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimalCompressor {
    sigma: f64,
    x_max: f64,
    normalizer: f64,
}

impl OptimalCompressor {
    pub fn new(sigma: f64, x_max: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Config(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        if !(x_max > 0.0 && x_max.is_finite()) {
            return Err(Error::Config(format!(
                "x_max must be positive, got {x_max}"
            )));
        }
        let normalizer = libm::erf(x_max / (SQRT_6 * sigma));
        Ok(Self {
            sigma,
            x_max,
            normalizer,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Like [`Compressor::evaluate`], but inputs beyond the support saturate at `+-x_max`.
    pub fn evaluate_saturating(&self, x: f64) -> Result<f64> {
        ensure_finite("compressor argument", x)?;
        Ok(self.eval_half(x.abs().min(self.x_max)).copysign(x))
    }
}

impl Compressor for OptimalCompressor {
    fn x_max(&self) -> f64 {
        self.x_max
    }

    fn eval_half(&self, x: f64) -> f64 {
        if x >= self.x_max {
            return self.x_max;
        }
        self.x_max * libm::erf(x / (SQRT_6 * self.sigma)) / self.normalizer
    }

    fn derivative_half(&self, x: f64) -> f64 {
        let s = SQRT_6 * self.sigma;
        let z = x / s;
        self.x_max * FRAC_2_SQRT_PI * (-z * z).exp() / (s * self.normalizer)
    }

    fn inverse_half(&self, u: f64) -> Result<f64> {
        if u == 0.0 {
            return Ok(0.0);
        }
        if u >= self.x_max {
            return Ok(self.x_max);
        }
        find_root_monotone(
            |x| self.eval_half(x) - u,
            0.0,
            self.x_max,
            1e-15 * self.x_max,
        )
    }
}

/// Continuous piecewise-linear interpolant of the grid values.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSplineCompressor {
    grid: SegmentGrid,
    slopes: Vec<f64>,
}

/// Fits the first-degree spline through every knot of `grid`.
pub fn fit_linear_spline(grid: &SegmentGrid) -> Result<LinearSplineCompressor> {
    let slopes: Vec<f64> = grid
        .knots
        .windows(2)
        .zip(grid.values.windows(2))
        .map(|(x, c)| (c[1] - c[0]) / (x[1] - x[0]))
        .collect();
    if slopes.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
        return Err(Error::Fit(format!(
            "degenerate grid produces slopes {slopes:?}"
        )));
    }
    Ok(LinearSplineCompressor {
        grid: grid.clone(),
        slopes,
    })
}

impl LinearSplineCompressor {
    pub fn grid(&self) -> &SegmentGrid {
        &self.grid
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    /// Value mismatch between neighbouring pieces at each interior knot.
    pub fn continuity_residuals(&self) -> Vec<f64> {
        let k = &self.grid.knots;
        let v = &self.grid.values;
        (1..self.grid.segments())
            .map(|i| {
                // The left piece is anchored at knot i itself, the right one at knot i + 1.
                let right = v[i + 1] + self.slopes[i] * (k[i] - k[i + 1]);
                (v[i] - right).abs()
            })
            .collect()
    }
}

impl Compressor for LinearSplineCompressor {
    fn x_max(&self) -> f64 {
        self.grid.x_max()
    }

    fn eval_half(&self, x: f64) -> f64 {
        let i = self.grid.piece_of(x);
        self.grid.values[i + 1] + self.slopes[i] * (x - self.grid.knots[i + 1])
    }

    fn derivative_half(&self, x: f64) -> f64 {
        self.slopes[self.grid.piece_of(x)]
    }

    fn inverse_half(&self, u: f64) -> Result<f64> {
        let i = self.grid.piece_of_value(u);
        let x = self.grid.knots[i + 1] + (u - self.grid.values[i + 1]) / self.slopes[i];
        Ok(x.clamp(self.grid.knots[i], self.grid.knots[i + 1]))
    }
}

/// Coefficients of one parabola `a + b x + d x^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticPiece {
    pub a: f64,
    pub b: f64,
    pub d: f64,
}

impl QuadraticPiece {
    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        self.a + x * (self.b + self.d * x)
    }

    #[inline]
    pub fn slope(&self, x: f64) -> f64 {
        self.b + 2.0 * self.d * x
    }
}

/// C1 piecewise-quadratic approximation with two pieces and a flat end at `x_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticSplineCompressor {
    grid: SegmentGrid,
    pieces: [QuadraticPiece; 2],
}

fn require_two_pieces(grid: &SegmentGrid) -> Result<(f64, f64, f64, f64)> {
    if grid.segments() != 2 {
        return Err(Error::Fit(format!(
            "the quadratic spline system is defined for two pieces, grid has {}",
            grid.segments()
        )));
    }
    Ok((grid.knots[1], grid.knots[2], grid.values[1], grid.values[2]))
}

/// Fits the quadratic spline by the closed-form elimination of its six
/// conditions: `g(0) = 0`, interpolation at `x_1` from both sides and at
/// `x_2`, slope continuity at `x_1`, and zero slope at `x_2`.
pub fn fit_quadratic_spline(grid: &SegmentGrid) -> Result<QuadraticSplineCompressor> {
    let (x1, x2, c1, c2) = require_two_pieces(grid)?;
    let h = x2 - x1;
    let d2 = (c1 - c2) / (h * h);
    let b2 = -2.0 * d2 * x2;
    let a2 = c2 + d2 * x2 * x2;
    let s = b2 + 2.0 * d2 * x1;
    let d1 = (s * x1 - c1) / (x1 * x1);
    let b1 = s - 2.0 * d1 * x1;
    let pieces = [
        QuadraticPiece {
            a: 0.0,
            b: b1,
            d: d1,
        },
        QuadraticPiece {
            a: a2,
            b: b2,
            d: d2,
        },
    ];
    QuadraticSplineCompressor::from_pieces(grid.clone(), pieces)
}

/// The same six conditions assembled as a dense linear system and solved by LU
/// with partial pivoting. Unknowns are ordered `(a1, b1, d1, a2, b2, d2)`.
pub fn solve_quadratic_system(grid: &SegmentGrid) -> Result<[QuadraticPiece; 2]> {
    let (x1, x2, c1, c2) = require_two_pieces(grid)?;
    #[rustfmt::skip]
    let m = Matrix6::new(
        1.0, 0.0, 0.0,     0.0, 0.0, 0.0,
        1.0, x1,  x1 * x1, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.0,     1.0, x1,  x1 * x1,
        0.0, 0.0, 0.0,     1.0, x2,  x2 * x2,
        0.0, 1.0, 2.0 * x1, 0.0, -1.0, -2.0 * x1,
        0.0, 0.0, 0.0,     0.0, 1.0, 2.0 * x2,
    );
    let rhs = Vector6::new(0.0, c1, c1, c2, 0.0, 0.0);
    let sol = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Fit("quadratic spline system is singular".into()))?;
    Ok([
        QuadraticPiece {
            a: sol[0],
            b: sol[1],
            d: sol[2],
        },
        QuadraticPiece {
            a: sol[3],
            b: sol[4],
            d: sol[5],
        },
    ])
}

/// Residuals of the six defining conditions, in the order listed on
/// [`fit_quadratic_spline`].
pub fn quadratic_system_residuals(
    grid: &SegmentGrid,
    pieces: &[QuadraticPiece; 2],
) -> Result<[f64; 6]> {
    let (x1, x2, c1, c2) = require_two_pieces(grid)?;
    let [p1, p2] = pieces;
    Ok([
        p1.value(0.0),
        p1.value(x1) - c1,
        p2.value(x1) - c1,
        p2.value(x2) - c2,
        p1.slope(x1) - p2.slope(x1),
        p2.slope(x2),
    ])
}

impl QuadraticSplineCompressor {
    /// Wraps already-solved coefficients, rejecting any set whose slope is not
    /// positive on `[0, x_max)`.
    pub fn from_pieces(grid: SegmentGrid, pieces: [QuadraticPiece; 2]) -> Result<Self> {
        let (x1, x2, _, _) = require_two_pieces(&grid)?;
        if pieces
            .iter()
            .flat_map(|p| [p.a, p.b, p.d])
            .any(|v| !v.is_finite())
        {
            return Err(Error::Fit("singular quadratic spline system".into()));
        }
        // Slopes are linear on each piece, so the endpoints bound them.
        let tol = 1e-12 * (1.0 + pieces[1].b.abs());
        let ok = pieces[0].slope(0.0) > 0.0
            && pieces[0].slope(x1) > 0.0
            && pieces[1].slope(x1) > 0.0
            && pieces[1].slope(x2) > -tol;
        if !ok {
            return Err(Error::Fit(format!(
                "quadratic spline is not increasing on [0, {x2}): {pieces:?}"
            )));
        }
        Ok(Self { grid, pieces })
    }

    pub fn grid(&self) -> &SegmentGrid {
        &self.grid
    }

    pub fn pieces(&self) -> &[QuadraticPiece; 2] {
        &self.pieces
    }

    pub fn residuals(&self) -> [f64; 6] {
        quadratic_system_residuals(&self.grid, &self.pieces).expect("grid has two pieces")
    }

    /// Piece `i` re-expanded about its right knot: `(x_r, c(x_r), slope at x_r, d)`.
    ///
    /// Evaluating `c(x_r) + s w + d w^2` with `w = x - x_r` keeps the flat end
    /// at `x_max` exact, where the raw `a + b x + d x^2` form loses about half
    /// its digits on inversion.
    fn anchor(&self, i: usize) -> (f64, f64, f64, f64) {
        let x_r = self.grid.knots[i + 1];
        let p = self.pieces[i];
        (x_r, self.grid.values[i + 1], p.slope(x_r), p.d)
    }
}

impl Compressor for QuadraticSplineCompressor {
    fn x_max(&self) -> f64 {
        self.grid.x_max()
    }

    fn eval_half(&self, x: f64) -> f64 {
        let i = self.grid.piece_of(x);
        let (x_r, c_r, s_r, d) = self.anchor(i);
        let w = x - x_r;
        c_r + w * (s_r + d * w)
    }

    fn derivative_half(&self, x: f64) -> f64 {
        let i = self.grid.piece_of(x);
        let (x_r, _, s_r, d) = self.anchor(i);
        s_r + 2.0 * d * (x - x_r)
    }

    fn inverse_half(&self, u: f64) -> Result<f64> {
        let i = self.grid.piece_of_value(u);
        let (lo, hi) = (self.grid.knots[i], self.grid.knots[i + 1]);
        let (_, c_r, s_r, d) = self.anchor(i);
        // d w^2 + s_r w + (c_r - u) = 0 with w = x - hi in [lo - hi, 0].
        let c = c_r - u;
        let roots = if d.abs() < LINEAR_CURVATURE {
            [-c / s_r, f64::NAN]
        } else {
            let disc = s_r * s_r - 4.0 * d * c;
            if disc < 0.0 {
                return Err(Error::Internal(format!(
                    "no real preimage of {u} on piece {i}"
                )));
            }
            let q = -0.5 * (s_r + s_r.signum() * disc.sqrt());
            [q / d, if q != 0.0 { c / q } else { f64::NAN }]
        };
        let slack = 1e-9 * (hi - lo);
        roots
            .into_iter()
            .map(|w| hi + w)
            .filter(|r| r.is_finite() && *r >= lo - slack && *r <= hi + slack)
            .min_by(|r, s| {
                let mid = 0.5 * (lo + hi);
                (r - mid).abs().total_cmp(&(s - mid).abs())
            })
            .map(|r| r.clamp(lo, hi))
            .ok_or_else(|| {
                Error::Internal(format!(
                    "no preimage of {u} inside [{lo}, {hi}] on piece {i}"
                ))
            })
    }
}

/// Which compressor a design uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    LinearSpline,
    QuadraticSpline,
    Optimal,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [
        ModelKind::LinearSpline,
        ModelKind::QuadraticSpline,
        ModelKind::Optimal,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::LinearSpline => "linear_spline",
            ModelKind::QuadraticSpline => "quadratic_spline",
            ModelKind::Optimal => "optimal",
        }
    }

    /// Short name used on the command line.
    pub fn short_name(&self) -> &'static str {
        match self {
            ModelKind::LinearSpline => "linear",
            ModelKind::QuadraticSpline => "quadratic",
            ModelKind::Optimal => "optimal",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.short_name())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "linear" | "linear_spline" | "fds" => Ok(ModelKind::LinearSpline),
            "quadratic" | "quadratic_spline" | "qs" => Ok(ModelKind::QuadraticSpline),
            "optimal" | "oc" => Ok(ModelKind::Optimal),
            other => Err(Error::Config(format!(
                "unknown model '{other}', expected linear, quadratic or optimal"
            ))),
        }
    }
}

/// Any of the three compressor kinds.
#[derive(Debug, Clone, PartialEq)]
pub enum CompressorModel {
    Optimal(OptimalCompressor),
    LinearSpline(LinearSplineCompressor),
    QuadraticSpline(QuadraticSplineCompressor),
}

impl CompressorModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            CompressorModel::Optimal(_) => ModelKind::Optimal,
            CompressorModel::LinearSpline(_) => ModelKind::LinearSpline,
            CompressorModel::QuadraticSpline(_) => ModelKind::QuadraticSpline,
        }
    }

    /// Builds the model of `kind` on `grid`, whose values must come from the
    /// optimal compressor with the given `sigma`.
    pub fn fit(kind: ModelKind, grid: &SegmentGrid, sigma: f64) -> Result<Self> {
        Ok(match kind {
            ModelKind::Optimal => {
                CompressorModel::Optimal(OptimalCompressor::new(sigma, grid.x_max())?)
            }
            ModelKind::LinearSpline => CompressorModel::LinearSpline(fit_linear_spline(grid)?),
            ModelKind::QuadraticSpline => {
                CompressorModel::QuadraticSpline(fit_quadratic_spline(grid)?)
            }
        })
    }

    fn inner(&self) -> &dyn Compressor {
        match self {
            CompressorModel::Optimal(m) => m,
            CompressorModel::LinearSpline(m) => m,
            CompressorModel::QuadraticSpline(m) => m,
        }
    }
}

impl Compressor for CompressorModel {
    fn x_max(&self) -> f64 {
        self.inner().x_max()
    }

    fn eval_half(&self, x: f64) -> f64 {
        self.inner().eval_half(x)
    }

    fn derivative_half(&self, x: f64) -> f64 {
        self.inner().derivative_half(x)
    }

    fn inverse_half(&self, u: f64) -> Result<f64> {
        self.inner().inverse_half(u)
    }
}

/// JSON form of a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDump {
    pub kind: ModelKind,
    pub sigma: f64,
    pub x_max: f64,
    pub knots: Vec<f64>,
    pub values: Vec<f64>,
    pub slopes: Option<Vec<f64>>,
    pub pieces: Option<Vec<QuadraticPiece>>,
}

impl ModelDump {
    /// `grid` is the design grid; for the optimal model it records where the
    /// spline models would be anchored.
    pub fn new(model: &CompressorModel, grid: &SegmentGrid, sigma: f64) -> Self {
        let (slopes, pieces) = match model {
            CompressorModel::Optimal(_) => (None, None),
            CompressorModel::LinearSpline(m) => (Some(m.slopes.clone()), None),
            CompressorModel::QuadraticSpline(m) => (None, Some(m.pieces.to_vec())),
        };
        Self {
            kind: model.kind(),
            sigma,
            x_max: model.x_max(),
            knots: grid.knots.clone(),
            values: grid.values.clone(),
            slopes,
            pieces,
        }
    }
}
