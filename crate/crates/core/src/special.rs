//! Special functions, quadrature and root finding.
//!
//! Everything here is a pure function of its arguments. The error function is
//! backed by `libm` (a port of the FreeBSD `s_erf.c` rational approximations,
//! accurate to about one ulp); the Gaussian helpers, Gauss-Kronrod quadrature
//! and the bracketing root finder are implemented locally.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{ensure_finite, Error, Result};

/// `1/sqrt(2*pi)`.
pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Gauss error function.
pub fn erf(u: f64) -> Result<f64> {
    ensure_finite("erf argument", u)?;
    Ok(libm::erf(u))
}

/// Complementary error function, `1 - erf(u)` without cancellation in the tail.
pub fn erfc(u: f64) -> Result<f64> {
    ensure_finite("erfc argument", u)?;
    Ok(libm::erfc(u))
}

/// Parameters of the zero-mean Gaussian source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianParams {
    sigma: f64,
}

impl GaussianParams {
    pub fn new(sigma: f64) -> Result<Self> {
        if sigma.is_finite() && sigma > 0.0 {
            Ok(Self { sigma })
        } else {
            Err(Error::Config(format!(
                "sigma must be positive and finite, got {sigma}"
            )))
        }
    }

    pub fn unit() -> Self {
        Self { sigma: 1.0 }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn variance(&self) -> f64 {
        self.sigma * self.sigma
    }
}

impl Default for GaussianParams {
    fn default() -> Self {
        Self::unit()
    }
}

/// Gaussian density `exp(-t^2 / (2 sigma^2)) / (sqrt(2 pi) sigma)`.
pub fn gaussian_pdf(t: f64, params: GaussianParams) -> Result<f64> {
    ensure_finite("density argument", t)?;
    Ok(pdf(t, params.sigma))
}

#[inline]
pub(crate) fn pdf(t: f64, sigma: f64) -> f64 {
    let z = t / sigma;
    INV_SQRT_2PI / sigma * (-0.5 * z * z).exp()
}

/// Standard normal upper-tail probability `Q(z) = P(Z > z)`.
pub fn normal_upper_tail(z: f64) -> Result<f64> {
    ensure_finite("tail argument", z)?;
    Ok(0.5 * libm::erfc(z * FRAC_1_SQRT_2))
}

/// Truncated moment `int_a^inf t^k p(t) dt` of the Gaussian source, `k` in `0..=2`.
///
/// Evaluated through the standardized closed forms `Q(z)`, `phi(z)` and
/// `z phi(z) + Q(z)` with `z = a / sigma`, scaled by `sigma^k`.
pub fn gaussian_tail_moment(k: u32, a: f64, params: GaussianParams) -> Result<f64> {
    ensure_finite("tail moment lower limit", a)?;
    let s = params.sigma;
    let z = a / s;
    let q = 0.5 * libm::erfc(z * FRAC_1_SQRT_2);
    let phi = INV_SQRT_2PI * (-0.5 * z * z).exp();
    match k {
        0 => Ok(q),
        1 => Ok(s * phi),
        2 => Ok(s * s * (z * phi + q)),
        _ => Err(Error::Domain(format!(
            "tail moment order must be 0, 1 or 2, got {k}"
        ))),
    }
}

/// Same moment as [`gaussian_tail_moment`] by adaptive quadrature on `[a, a + 12 sigma]`.
///
/// The neglected tail beyond `a + 12 sigma` is below `1e-30` relative.
pub fn gaussian_tail_moment_quadrature(
    k: u32,
    a: f64,
    params: GaussianParams,
    spec: QuadratureSpec,
) -> Result<f64> {
    ensure_finite("tail moment lower limit", a)?;
    if k > 2 {
        return Err(Error::Domain(format!(
            "tail moment order must be 0, 1 or 2, got {k}"
        )));
    }
    let s = params.sigma;
    adaptive_quadrature(|t| t.powi(k as i32) * pdf(t, s), a, a + 12.0 * s, spec)
}

/// Settings for [`adaptive_quadrature`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub absolute_tolerance: f64,
    pub max_subdivisions: usize,
}

impl QuadratureSpec {
    pub fn new(absolute_tolerance: f64, max_subdivisions: usize) -> Result<Self> {
        if !(absolute_tolerance > 0.0 && absolute_tolerance.is_finite()) {
            return Err(Error::Config(format!(
                "quadrature tolerance must be positive, got {absolute_tolerance}"
            )));
        }
        if max_subdivisions == 0 {
            return Err(Error::Config("max_subdivisions must be at least 1".into()));
        }
        Ok(Self {
            absolute_tolerance,
            max_subdivisions,
        })
    }
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            absolute_tolerance: 1e-12,
            max_subdivisions: 60,
        }
    }
}

// 15-point Kronrod nodes on [0, 1] (symmetric half) and weights; the 7-point
// Gauss rule uses every other node.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One G7-K15 panel: (Kronrod estimate, |Kronrod - Gauss|).
fn gauss_kronrod_15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kronrod += w * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Globally adaptive Gauss-Kronrod (7/15) integration of `f` over `[a, b]`.
///
/// The panel with the largest error estimate is bisected until the summed
/// estimate drops below `spec.absolute_tolerance`. Exhausting
/// `spec.max_subdivisions` bisections returns [`Error::Numeric`] carrying the
/// best estimate.
pub fn adaptive_quadrature<F>(f: F, a: f64, b: f64, spec: QuadratureSpec) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    ensure_finite("lower limit", a)?;
    ensure_finite("upper limit", b)?;
    if !(a < b) {
        return Err(Error::Domain(format!(
            "integration limits must satisfy a < b, got [{a}, {b}]"
        )));
    }
    let (v, e) = gauss_kronrod_15(&f, a, b);
    if !v.is_finite() {
        return Err(Error::Domain(format!("integrand not finite on [{a}, {b}]")));
    }
    let mut panels = vec![(a, b, v, e)];
    let mut subdivisions = 0;
    loop {
        let total: f64 = panels.iter().map(|p| p.2).sum();
        let err: f64 = panels.iter().map(|p| p.3).sum();
        if err <= spec.absolute_tolerance {
            return Ok(total);
        }
        if subdivisions >= spec.max_subdivisions {
            return Err(Error::Numeric {
                message: format!(
                    "quadrature on [{a}, {b}] exceeded {} subdivisions",
                    spec.max_subdivisions
                ),
                estimate: total,
                achieved: err,
            });
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .expect("panel list is never empty");
        let (lo, hi, _, _) = panels.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        if !(lo < mid && mid < hi) {
            // Panel is at the floating-point resolution limit; nothing more to gain.
            let total: f64 =
                panels.iter().map(|p| p.2).sum::<f64>() + gauss_kronrod_15(&f, lo, hi).0;
            return Err(Error::Numeric {
                message: format!("quadrature panel [{lo}, {hi}] cannot be split further"),
                estimate: total,
                achieved: err,
            });
        }
        let (v1, e1) = gauss_kronrod_15(&f, lo, mid);
        let (v2, e2) = gauss_kronrod_15(&f, mid, hi);
        panels.push((lo, mid, v1, e1));
        panels.push((mid, hi, v2, e2));
        subdivisions += 1;
    }
}

/// Root of a strictly monotone `f` bracketed by `[lo, hi]`.
///
/// Illinois-modified regula falsi, with a bisection step whenever three
/// consecutive steps fail to halve the bracket. Stops once the bracket is no
/// wider than `tol` (or cannot shrink further) and returns the endpoint with
/// the smaller residual.
pub fn find_root_monotone<F>(f: F, lo: f64, hi: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    ensure_finite("bracket lower end", lo)?;
    ensure_finite("bracket upper end", hi)?;
    if !(lo <= hi) {
        return Err(Error::Domain(format!(
            "bracket must satisfy lo <= hi, got [{lo}, {hi}]"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::Domain(format!(
            "root tolerance must be positive, got {tol}"
        )));
    }
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if !(fa.is_finite() && fb.is_finite()) || fa.signum() == fb.signum() {
        return Err(Error::Bracket {
            lo,
            hi,
            f_lo: fa,
            f_hi: fb,
        });
    }

    let mut last_side = 0i8;
    let mut stalled = 0u32;
    for _ in 0..400 {
        let width = b - a;
        if width <= tol {
            break;
        }
        let mid = a + 0.5 * width;
        let x = if stalled >= 3 {
            mid
        } else {
            let c = (a * fb - b * fa) / (fb - fa);
            if c > a && c < b {
                c
            } else {
                mid
            }
        };
        if !(x > a && x < b) {
            break;
        }
        let fx = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if fx.signum() == fa.signum() {
            a = x;
            fa = fx;
            if last_side == -1 {
                fb *= 0.5;
            }
            last_side = -1;
        } else {
            b = x;
            fb = fx;
            if last_side == 1 {
                fa *= 0.5;
            }
            last_side = 1;
        }
        if b - a > 0.5 * width {
            stalled += 1;
        } else {
            stalled = 0;
        }
    }
    // fa/fb may carry Illinois scaling, so re-evaluate before choosing.
    Ok(if f(a).abs() <= f(b).abs() { a } else { b })
}

/// `sqrt(6)`, the scale in the optimal Gaussian compressor's erf argument.
pub(crate) const SQRT_6: f64 = 2.449_489_742_783_178;

/// `2/sqrt(pi)`.
pub(crate) const FRAC_2_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;
