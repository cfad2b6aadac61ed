//! Granular, overload and total distortion of a companding quantizer.
//!
//! The analytic path uses the high-resolution (Bennett) sum over reproduction
//! levels for the granular part and the tail moments of the Gaussian for the
//! overload part. Two independent checks sit alongside: exact per-cell
//! integration of the squared error, and a seeded Monte Carlo run of the
//! quantizer itself.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compressor::{Compressor, CompressorModel};
use crate::design::{quantize_with, Codebook, Design, DesignConfig};
use crate::error::{ensure_finite, Error, Result};
use crate::special::{
    adaptive_quadrature, gaussian_tail_moment, pdf, GaussianParams, QuadratureSpec,
};

/// Name of the generator behind [`monte_carlo_sqnr`], recorded in every report.
pub const GENERATOR: &str =
    "ChaCha8Rng(seed_from_u64(seed), stream = shard) + Ziggurat StandardNormal";

/// Analytic distortion of one design.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistortionReport {
    /// Granular distortion from the Bennett sum.
    pub d_g: f64,
    /// Overload distortion from the Gaussian tail moments at the centroid level.
    pub d_o_exact: f64,
    /// Asymptotic closed-form overload distortion, reported for comparison.
    pub d_o_closed: f64,
    /// `d_g + d_o_exact`.
    pub d_total: f64,
    pub sqnr_db: f64,
    /// SQNR with `d_o_closed` substituted for `d_o_exact`.
    pub sqnr_db_closed_overload: f64,
}

/// Bennett-integral granular distortion
///
/// ```text
/// D_g = 2 x_max^2 / (3 (N - 2)^2) * sum_k p(y_k) / g'(y_k)^2 * Delta_k
/// ```
///
/// with `Delta_k = Delta / g'(y_k)` the first-order cell length. The leading
/// factor 2 accounts for the negative half-axis.
pub fn granular_distortion(
    codebook: &Codebook,
    model: &CompressorModel,
    params: GaussianParams,
) -> Result<f64> {
    let n = codebook.levels_total as f64;
    let scale = 2.0 * codebook.x_max * codebook.x_max / (3.0 * (n - 2.0) * (n - 2.0));
    let mut sum = 0.0;
    for (&y, &len) in codebook.levels.iter().zip(&codebook.cell_lengths) {
        let slope = model.derivative(y)?;
        if !(slope > 0.0) {
            return Err(Error::Internal(format!(
                "zero compressor slope at level {y}"
            )));
        }
        sum += pdf(y, params.sigma()) / (slope * slope) * len;
    }
    Ok(scale * sum)
}

/// Mean squared error over `[t_{k-1}, t_k]` cells with reproduction `y_k`,
/// `sum_k int (x - y_k)^2 p(x) dx`, one side only.
pub fn cell_squared_error(
    edges: &[f64],
    levels: &[f64],
    params: GaussianParams,
    spec: QuadratureSpec,
) -> Result<f64> {
    if edges.len() != levels.len() + 1 {
        return Err(Error::Domain(format!(
            "{} edges cannot bound {} cells",
            edges.len(),
            levels.len()
        )));
    }
    let s = params.sigma();
    edges
        .windows(2)
        .zip(levels)
        .map(|(w, &y)| adaptive_quadrature(|x| (x - y) * (x - y) * pdf(x, s), w[0], w[1], spec))
        .sum()
}

/// Exact granular distortion of the constructed quantizer by per-cell quadrature.
pub fn granular_distortion_oracle(codebook: &Codebook, params: GaussianParams) -> Result<f64> {
    Ok(2.0
        * cell_squared_error(
            &codebook.edges,
            &codebook.levels,
            params,
            QuadratureSpec::default(),
        )?)
}

/// Overload distortion `2 int_{x_max}^inf (x - y_max)^2 p(x) dx`, expanded
/// into the tail moments of order 0, 1 and 2.
pub fn overload_distortion_exact(x_max: f64, y_max: f64, params: GaussianParams) -> Result<f64> {
    ensure_finite("x_max", x_max)?;
    ensure_finite("y_max", y_max)?;
    if !(x_max > 0.0 && y_max > x_max) {
        return Err(Error::Domain(format!(
            "need y_max > x_max > 0, got x_max = {x_max}, y_max = {y_max}"
        )));
    }
    let m0 = gaussian_tail_moment(0, x_max, params)?;
    let m1 = gaussian_tail_moment(1, x_max, params)?;
    let m2 = gaussian_tail_moment(2, x_max, params)?;
    Ok((2.0 * (m2 - 2.0 * y_max * m1 + y_max * y_max * m0)).max(0.0))
}

/// Asymptotic overload distortion of a unit-variance source,
/// `sqrt(2 / pi) exp(-x_max^2 / 2) / x_max^3`.
pub fn overload_distortion_closed(x_max: f64) -> Result<f64> {
    ensure_finite("x_max", x_max)?;
    if !(x_max > 0.0) {
        return Err(Error::Domain(format!(
            "x_max must be positive, got {x_max}"
        )));
    }
    Ok((2.0 / std::f64::consts::PI).sqrt() * (-0.5 * x_max * x_max).exp() / x_max.powi(3))
}

/// [`overload_distortion_closed`] for a source of standard deviation `sigma`,
/// obtained by scaling: `sigma^2 * D(x_max / sigma)`.
pub fn overload_distortion_closed_scaled(x_max: f64, params: GaussianParams) -> Result<f64> {
    Ok(params.variance() * overload_distortion_closed(x_max / params.sigma())?)
}

/// `10 log10(sigma^2 / D)` in dB.
pub fn sqnr(d_total: f64, params: GaussianParams) -> Result<f64> {
    if !(d_total > 0.0) || d_total.is_nan() {
        return Err(Error::Domain(format!(
            "distortion must be positive, got {d_total}"
        )));
    }
    Ok(10.0 * (params.variance() / d_total).log10())
}

impl Design {
    /// Analytic distortion report for this design.
    pub fn distortion(&self) -> Result<DistortionReport> {
        let params = self.params();
        let cb = &self.codebook;
        let d_g = granular_distortion(cb, &self.model, params)?;
        let d_o_exact = overload_distortion_exact(cb.x_max, cb.y_max, params)?;
        let d_o_closed = overload_distortion_closed_scaled(cb.x_max, params)?;
        let d_total = d_g + d_o_exact;
        Ok(DistortionReport {
            d_g,
            d_o_exact,
            d_o_closed,
            d_total,
            sqnr_db: sqnr(d_total, params)?,
            sqnr_db_closed_overload: sqnr(d_g + d_o_closed, params)?,
        })
    }
}

/// Builds the design for `config` and evaluates it analytically.
pub fn evaluate_design(config: &DesignConfig) -> Result<DistortionReport> {
    Design::build(*config)?.distortion()
}

/// Runs one sample through compressor, uniform quantizer and expander.
pub fn quantize_sample(x: f64, codebook: &Codebook, model: &CompressorModel) -> Result<f64> {
    ensure_finite("sample", x)?;
    Ok(quantize_with(codebook, model, x))
}

/// Outcome of a seeded simulation of the quantizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub samples: u64,
    pub seed: u64,
    pub shards: u32,
    pub generator: String,
    /// `10 log10(sigma^2 / mse)`; `+inf` (serialized as `"inf"`) when every
    /// sample was reproduced exactly.
    #[serde(with = "float_or_token")]
    pub empirical_sqnr_db: f64,
    pub mse: f64,
    /// Delta-method standard error of `empirical_sqnr_db`; `NaN` when `mse = 0`.
    #[serde(with = "float_or_token")]
    pub std_error_db: f64,
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct ShardMoments {
    sq: CompensatedSum,
    quad: CompensatedSum,
}

fn run_shard(design: &Design, seed: u64, shard: u32, count: u64) -> ShardMoments {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(shard as u64);
    let sigma = design.config.sigma;
    let mut m = ShardMoments::default();
    for _ in 0..count {
        let z: f64 = StandardNormal.sample(&mut rng);
        let x = sigma * z;
        let e = x - quantize_with(&design.codebook, &design.model, x);
        let e2 = e * e;
        m.sq.add(e2);
        m.quad.add(e2 * e2);
    }
    m
}

fn summarize(samples: u64, sq_sum: f64, quad_sum: f64, variance: f64) -> (f64, f64, f64) {
    let n = samples as f64;
    let mse = sq_sum / n;
    if mse == 0.0 {
        return (mse, f64::INFINITY, f64::NAN);
    }
    let var_e2 = (quad_sum / n - mse * mse).max(0.0);
    let se_mse = (var_e2 / n).sqrt();
    let sqnr_db = 10.0 * (variance / mse).log10();
    let se_db = 10.0 / std::f64::consts::LN_10 * se_mse / mse;
    (mse, sqnr_db, se_db)
}

/// Empirical SQNR of `design` over `samples` Gaussian draws.
///
/// Samples are split over `shards` independent ChaCha streams (stream index =
/// shard index, shards `0..samples % shards` take one extra sample). Shards run
/// in parallel and are merged in index order, so the report depends only on
/// `(design, samples, seed, shards)`.
pub fn monte_carlo_sqnr(
    design: &Design,
    samples: u64,
    seed: u64,
    shards: u32,
) -> Result<MonteCarloReport> {
    if samples == 0 {
        return Err(Error::Config(
            "Monte Carlo needs at least one sample".into(),
        ));
    }
    if shards == 0 {
        return Err(Error::Config("Monte Carlo needs at least one shard".into()));
    }
    let per = samples / shards as u64;
    let extra = samples % shards as u64;
    let parts: Vec<ShardMoments> = (0..shards)
        .into_par_iter()
        .map(|s| run_shard(design, seed, s, per + u64::from((s as u64) < extra)))
        .collect();
    let mut sq = CompensatedSum::default();
    let mut quad = CompensatedSum::default();
    for p in &parts {
        sq.add(p.sq.value());
        quad.add(p.quad.value());
    }
    let (mse, empirical_sqnr_db, std_error_db) = summarize(
        samples,
        sq.value(),
        quad.value(),
        design.params().variance(),
    );
    Ok(MonteCarloReport {
        samples,
        seed,
        shards,
        generator: GENERATOR.to_string(),
        empirical_sqnr_db,
        mse,
        std_error_db,
    })
}

/// Serializes non-finite floats as the strings `"inf"`, `"-inf"` and `"nan"`.
mod float_or_token {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Token(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Token(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(D::Error::custom(format!(
                    "unexpected float token '{other}'"
                ))),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compressor::ModelKind;
    use approx::assert_abs_diff_eq;

    #[test]
    fn sqnr_examples() {
        let p = GaussianParams::unit();
        assert_abs_diff_eq!(sqnr(1.0, p).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(sqnr(0.01, p).unwrap(), 20.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sqnr(1.660e-4, p).unwrap(), 37.80, epsilon = 0.005);
        assert!(sqnr(0.0, p).is_err());
        assert!(sqnr(-1.0, p).is_err());
    }

    #[test]
    fn closed_overload_examples() {
        let d128 = overload_distortion_closed(4.0274).unwrap();
        assert!((d128 / 3.66e-6 - 1.0).abs() < 0.02, "{d128}");
        let d16 = overload_distortion_closed(2.4746).unwrap();
        assert!((d16 / 2.47e-3 - 1.0).abs() < 0.02, "{d16}");
        let xs = [2.4746, 3.0519, 3.5638, 4.0274];
        let vals: Vec<f64> = xs
            .iter()
            .map(|&x| overload_distortion_closed(x).unwrap())
            .collect();
        assert!(vals.windows(2).all(|w| w[1] < w[0]));
        assert!(overload_distortion_closed(0.0).is_err());
    }

    #[test]
    fn centroid_minimizes_exact_overload() {
        let p = GaussianParams::unit();
        for x in [2.4746, 4.0274] {
            let y = crate::design::centroid_overload_level(x, p).unwrap();
            let best = overload_distortion_exact(x, y, p).unwrap();
            assert!(overload_distortion_exact(x, y * 1.01, p).unwrap() > best);
            assert!(overload_distortion_exact(x, y * 0.99, p).unwrap() > best);
        }
    }

    #[test]
    fn exact_overload_matches_quadrature() {
        let p = GaussianParams::unit();
        let x = 3.0519;
        let y = crate::design::centroid_overload_level(x, p).unwrap();
        let direct = 2.0
            * adaptive_quadrature(
                |t| (t - y) * (t - y) * pdf(t, 1.0),
                x,
                x + 12.0,
                QuadratureSpec::default(),
            )
            .unwrap();
        let via_moments = overload_distortion_exact(x, y, p).unwrap();
        assert!(
            (direct - via_moments).abs() < 1e-12,
            "{direct} vs {via_moments}"
        );
        assert!(overload_distortion_exact(x, x, p).is_err());
    }

    #[test]
    fn single_cell_oracle_matches_direct_integral() {
        let p = GaussianParams::new(0.1).unwrap();
        let spec = QuadratureSpec::default();
        let v = cell_squared_error(&[0.0, 1.0], &[0.5], p, spec).unwrap();
        let direct =
            adaptive_quadrature(|x| (x - 0.5) * (x - 0.5) * pdf(x, 0.1), 0.0, 1.0, spec).unwrap();
        assert_abs_diff_eq!(v, direct, epsilon = 1e-14);
        assert!(cell_squared_error(&[0.0, 1.0], &[0.5, 0.7], p, spec).is_err());
    }

    #[test]
    fn oracle_ignores_segment_tags() {
        let d = Design::build(DesignConfig::new(32, ModelKind::LinearSpline)).unwrap();
        let mut cb = d.codebook.clone();
        let before = granular_distortion_oracle(&cb, d.params()).unwrap();
        cb.segments.iter_mut().for_each(|s| *s = 1);
        cb.counts = vec![cb.levels.len(), 0];
        assert_eq!(granular_distortion_oracle(&cb, d.params()).unwrap(), before);
    }

    #[test]
    fn report_parts_are_consistent() {
        let d = Design::build(DesignConfig::new(64, ModelKind::QuadraticSpline)).unwrap();
        let r = d.distortion().unwrap();
        assert!(r.d_g > 0.0 && r.d_o_exact > 0.0 && r.d_o_closed > 0.0);
        assert_eq!(r.d_total, r.d_g + r.d_o_exact);
        assert_abs_diff_eq!(r.sqnr_db, 10.0 * (1.0 / r.d_total).log10(), epsilon = 1e-12);
    }

    #[test]
    fn quantize_sample_is_odd() {
        let d = Design::build(DesignConfig::new(16, ModelKind::LinearSpline)).unwrap();
        for i in 1..200 {
            let x = i as f64 * 0.02;
            let q = quantize_sample(x, &d.codebook, &d.model).unwrap();
            assert_eq!(quantize_sample(-x, &d.codebook, &d.model).unwrap(), -q);
        }
        assert!(quantize_sample(f64::NAN, &d.codebook, &d.model).is_err());
    }

    #[test]
    fn compensated_sum_keeps_small_terms() {
        let mut s = CompensatedSum::default();
        s.add(1.0);
        for _ in 0..10_000 {
            s.add(1e-17);
        }
        s.add(-1.0);
        assert_abs_diff_eq!(s.value(), 1e-13, epsilon = 1e-25);
    }

    #[test]
    fn zero_error_run_reports_infinite_sqnr() {
        let (mse, db, se) = summarize(1, 0.0, 0.0, 1.0);
        assert_eq!(mse, 0.0);
        assert_eq!(db, f64::INFINITY);
        assert!(se.is_nan());
        let rep = MonteCarloReport {
            samples: 1,
            seed: 0,
            shards: 1,
            generator: GENERATOR.into(),
            empirical_sqnr_db: db,
            mse,
            std_error_db: se,
        };
        let text = serde_json::to_string(&rep).unwrap();
        assert!(text.contains("\"empirical_sqnr_db\":\"inf\""));
        let back: MonteCarloReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back.empirical_sqnr_db, f64::INFINITY);
        assert!(back.std_error_db.is_nan());
    }

    #[test]
    fn monte_carlo_is_deterministic_and_validates() {
        let d = Design::build(DesignConfig::new(16, ModelKind::QuadraticSpline)).unwrap();
        let a = monte_carlo_sqnr(&d, 20_000, 7, 3).unwrap();
        let b = monte_carlo_sqnr(&d, 20_000, 7, 3).unwrap();
        assert_eq!(a, b);
        let c = monte_carlo_sqnr(&d, 20_000, 8, 3).unwrap();
        assert_ne!(a.mse, c.mse);
        assert!(monte_carlo_sqnr(&d, 0, 7, 1).is_err());
        assert!(monte_carlo_sqnr(&d, 10, 7, 0).is_err());
        let one = monte_carlo_sqnr(&d, 1, 7, 4).unwrap();
        assert_eq!(one.samples, 1);
    }
}
