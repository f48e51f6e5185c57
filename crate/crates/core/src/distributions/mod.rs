//! Valuation distributions on the unit interval.
//!
//! Every family is normalised to carry all of its mass on `[0,1]`. Truncated
//! families divide the raw density by the raw mass of `[0,1]`.
//!
//! Two sets of evaluators exist. The checked ones (`pdf`, `cdf`, `dpdf`,
//! `d2pdf`, `sample`) reject arguments outside `[0,1]`. The clamped ones
//! (`density`, `cumulative`, `density_slope`) extend the distribution to the
//! whole real line with `F = 0` below zero and `F = 1` above one, which is the
//! form the demand integrands need.

mod conditions;

pub use conditions::{check_conditions, Condition, ConditionEntry, ConditionReport, DEFAULT_GRID};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Parametric family and its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Family {
    Uniform,
    /// `f(v) = 2v`.
    TriangularIncreasing,
    /// `f(v) = min{k v, k - sqrt(k^2 - 2k)}` for `k > 2`.
    Trapezoidal {
        k: f64,
    },
    /// Exponential with rate `rate` (any nonzero real) truncated to `[0,1]`.
    TruncatedExponential {
        rate: f64,
    },
    TruncatedNormal {
        mean: f64,
        sd: f64,
    },
    /// Lomax (Pareto II) with location `location <= 0`, truncated to `[0,1]`.
    TruncatedPareto {
        location: f64,
        scale: f64,
        shape: f64,
    },
    /// Linear interpolation between `(x, y)` knots spanning `[0,1]`; the
    /// heights are rescaled to unit mass.
    PiecewiseLinear {
        knots: Vec<(f64, f64)>,
    },
}

/// Derivative value together with a flag telling whether `v` sits on a kink
/// of the density, in which case the value is the left derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derivative {
    pub value: f64,
    pub kink: bool,
}

#[derive(Debug, Clone, PartialEq)]
enum Shape {
    Uniform,
    Triangular,
    Trapezoid {
        k: f64,
        height: f64,
        corner: f64,
    },
    Exponential {
        rate: f64,
        denom: f64,
    },
    Normal {
        mean: f64,
        sd: f64,
        lo: f64,
        mass: f64,
    },
    Pareto {
        location: f64,
        scale: f64,
        shape: f64,
        lo: f64,
        mass: f64,
    },
    Piecewise {
        xs: Vec<f64>,
        ys: Vec<f64>,
        slopes: Vec<f64>,
        cum: Vec<f64>,
    },
}

/// A valuation distribution with support `[0,1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValuationDistribution {
    family: Family,
    shape: Shape,
}

fn check_unit(v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::Domain(v))
    }
}

fn std_normal_cdf(t: f64) -> f64 {
    0.5 * erfc(-t / std::f64::consts::SQRT_2)
}

fn std_normal_pdf(t: f64) -> f64 {
    (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

impl ValuationDistribution {
    pub fn new(family: Family) -> Result<Self> {
        let bad = |msg: String| Err(Error::Distribution(msg));
        let shape = match &family {
            Family::Uniform => Shape::Uniform,
            Family::TriangularIncreasing => Shape::Triangular,
            &Family::Trapezoidal { k } => {
                if !(k > 2.0 && k.is_finite()) {
                    return bad(format!("trapezoidal slope k = {k} must exceed 2"));
                }
                let height = k - (k * k - 2.0 * k).sqrt();
                Shape::Trapezoid {
                    k,
                    height,
                    corner: height / k,
                }
            }
            &Family::TruncatedExponential { rate } => {
                if !(rate.is_finite() && rate.abs() > 1e-8) {
                    return bad(format!("exponential rate {rate} must be finite and nonzero"));
                }
                Shape::Exponential {
                    rate,
                    denom: (-rate).exp_m1(),
                }
            }
            &Family::TruncatedNormal { mean, sd } => {
                if !(mean.is_finite() && sd.is_finite() && sd > 0.0) {
                    return bad(format!("normal needs finite mean and sd > 0, got ({mean}, {sd})"));
                }
                let lo = std_normal_cdf(-mean / sd);
                let mass = std_normal_cdf((1.0 - mean) / sd) - lo;
                if mass < 1e-12 {
                    return bad("normal puts no mass on [0,1]".into());
                }
                Shape::Normal { mean, sd, lo, mass }
            }
            &Family::TruncatedPareto { location, scale, shape } => {
                if !(location <= 0.0 && scale > 0.0 && shape > 0.0 && scale.is_finite() && shape.is_finite()) {
                    return bad(format!(
                        "pareto needs location <= 0, scale > 0, shape > 0, got ({location}, {scale}, {shape})"
                    ));
                }
                let raw = |x: f64| 1.0 - (1.0 + (x - location) / scale).powf(-shape);
                let lo = raw(0.0);
                let mass = raw(1.0) - lo;
                if mass < 1e-12 {
                    return bad("pareto puts no mass on [0,1]".into());
                }
                Shape::Pareto {
                    location,
                    scale,
                    shape,
                    lo,
                    mass,
                }
            }
            Family::PiecewiseLinear { knots } => piecewise_shape(knots)?,
        };
        Ok(Self { family, shape })
    }

    pub fn uniform() -> Self {
        Self {
            family: Family::Uniform,
            shape: Shape::Uniform,
        }
    }

    pub fn triangular_increasing() -> Self {
        Self {
            family: Family::TriangularIncreasing,
            shape: Shape::Triangular,
        }
    }

    /// Builds a distribution from the family name and positional parameter
    /// list used in scenario files.
    pub fn from_params(name: &str, params: &[f64]) -> Result<Self> {
        let want = |n: usize| -> Result<()> {
            if params.len() == n {
                Ok(())
            } else {
                Err(Error::Distribution(format!(
                    "{name} takes {n} parameters, got {}",
                    params.len()
                )))
            }
        };
        let family = match name {
            "uniform" => {
                want(0)?;
                Family::Uniform
            }
            "triangular-increasing" => {
                want(0)?;
                Family::TriangularIncreasing
            }
            "trapezoidal" => {
                want(1)?;
                Family::Trapezoidal { k: params[0] }
            }
            "truncated-exponential" => {
                want(1)?;
                Family::TruncatedExponential { rate: params[0] }
            }
            "truncated-normal" => {
                want(2)?;
                Family::TruncatedNormal {
                    mean: params[0],
                    sd: params[1],
                }
            }
            "truncated-pareto" => {
                want(3)?;
                Family::TruncatedPareto {
                    location: params[0],
                    scale: params[1],
                    shape: params[2],
                }
            }
            "piecewise-linear" => {
                if params.len() < 4 || !params.len().is_multiple_of(2) {
                    return Err(Error::Distribution(
                        "piecewise-linear takes pairs x0,y0,x1,y1,... (at least two knots)".into(),
                    ));
                }
                Family::PiecewiseLinear {
                    knots: params.chunks(2).map(|c| (c[0], c[1])).collect(),
                }
            }
            other => return Err(Error::Distribution(format!("unknown family '{other}'"))),
        };
        Self::new(family)
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    /// Family name and positional parameters, inverse of [`Self::from_params`].
    pub fn to_params(&self) -> (&'static str, Vec<f64>) {
        match &self.family {
            Family::Uniform => ("uniform", vec![]),
            Family::TriangularIncreasing => ("triangular-increasing", vec![]),
            Family::Trapezoidal { k } => ("trapezoidal", vec![*k]),
            Family::TruncatedExponential { rate } => ("truncated-exponential", vec![*rate]),
            Family::TruncatedNormal { mean, sd } => ("truncated-normal", vec![*mean, *sd]),
            Family::TruncatedPareto { location, scale, shape } => ("truncated-pareto", vec![*location, *scale, *shape]),
            Family::PiecewiseLinear { knots } => {
                ("piecewise-linear", knots.iter().flat_map(|&(x, y)| [x, y]).collect())
            }
        }
    }

    pub fn pdf(&self, v: f64) -> Result<f64> {
        check_unit(v)?;
        Ok(self.raw_pdf(v))
    }

    pub fn cdf(&self, v: f64) -> Result<f64> {
        check_unit(v)?;
        Ok(self.raw_cdf(v))
    }

    pub fn dpdf(&self, v: f64) -> Result<Derivative> {
        check_unit(v)?;
        Ok(Derivative {
            value: self.raw_dpdf(v),
            kink: self.is_kink(v),
        })
    }

    pub fn d2pdf(&self, v: f64) -> Result<Derivative> {
        check_unit(v)?;
        Ok(Derivative {
            value: self.raw_d2pdf(v),
            kink: self.is_kink(v),
        })
    }

    /// Inverse-cdf transform of a uniform draw `u` in `(0,1)`.
    pub fn sample(&self, u: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::Domain(u));
        }
        Ok(self.quantile(u))
    }

    /// Interior points where the density is not differentiable.
    pub fn kinks(&self) -> Vec<f64> {
        match &self.shape {
            Shape::Trapezoid { corner, .. } => vec![*corner],
            Shape::Piecewise { xs, .. } => xs[1..xs.len() - 1].to_vec(),
            _ => Vec::new(),
        }
    }

    pub fn has_kinks(&self) -> bool {
        !self.kinks().is_empty()
    }

    /// Jumps `(x, f(x+) - f(x-))` of the density extended by zero outside
    /// `[0,1]`. Only the support edges can jump for the families offered.
    pub fn jumps(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(2);
        let at0 = self.raw_pdf(0.0);
        if at0 != 0.0 {
            out.push((0.0, at0));
        }
        let at1 = self.raw_pdf(1.0);
        if at1 != 0.0 {
            out.push((1.0, -at1));
        }
        out
    }

    fn is_kink(&self, v: f64) -> bool {
        self.kinks().iter().any(|&k| (k - v).abs() <= 1e-12)
    }

    /// Density extended by zero outside `[0,1)`.
    #[inline]
    pub fn density(&self, x: f64) -> f64 {
        if (0.0..1.0).contains(&x) {
            self.raw_pdf(x)
        } else {
            0.0
        }
    }

    /// Cdf extended by `0` below the support and `1` above it.
    #[inline]
    pub fn cumulative(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else if x >= 1.0 {
            1.0
        } else {
            self.raw_cdf(x)
        }
    }

    /// Regular part of the density derivative; zero outside `(0,1)`. Jumps
    /// at the support edges are reported separately by [`Self::jumps`].
    #[inline]
    pub fn density_slope(&self, x: f64) -> f64 {
        if x > 0.0 && x < 1.0 {
            self.raw_dpdf(x)
        } else {
            0.0
        }
    }

    fn raw_pdf(&self, v: f64) -> f64 {
        match &self.shape {
            Shape::Uniform => 1.0,
            Shape::Triangular => 2.0 * v,
            &Shape::Trapezoid { k, height, .. } => (k * v).min(height),
            &Shape::Exponential { rate, denom } => -rate * (-rate * v).exp() / denom,
            &Shape::Normal { mean, sd, mass, .. } => std_normal_pdf((v - mean) / sd) / (sd * mass),
            &Shape::Pareto {
                location,
                scale,
                shape,
                mass,
                ..
            } => {
                let t = 1.0 + (v - location) / scale;
                shape / scale * t.powf(-shape - 1.0) / mass
            }
            Shape::Piecewise { xs, ys, slopes, .. } => {
                let a = segment(xs, v);
                ys[a] + slopes[a] * (v - xs[a])
            }
        }
    }

    fn raw_cdf(&self, v: f64) -> f64 {
        match &self.shape {
            Shape::Uniform => v,
            Shape::Triangular => v * v,
            &Shape::Trapezoid { k, height, corner } => {
                if v <= corner {
                    0.5 * k * v * v
                } else {
                    0.5 * k * corner * corner + height * (v - corner)
                }
            }
            &Shape::Exponential { rate, denom } => (-rate * v).exp_m1() / denom,
            &Shape::Normal { mean, sd, lo, mass } => ((std_normal_cdf((v - mean) / sd) - lo) / mass).clamp(0.0, 1.0),
            &Shape::Pareto {
                location,
                scale,
                shape,
                lo,
                mass,
            } => {
                let t = 1.0 + (v - location) / scale;
                ((1.0 - t.powf(-shape) - lo) / mass).clamp(0.0, 1.0)
            }
            Shape::Piecewise { xs, ys, slopes, cum } => {
                let a = segment(xs, v);
                let d = v - xs[a];
                cum[a] + ys[a] * d + 0.5 * slopes[a] * d * d
            }
        }
    }

    fn raw_dpdf(&self, v: f64) -> f64 {
        match &self.shape {
            Shape::Uniform => 0.0,
            Shape::Triangular => 2.0,
            &Shape::Trapezoid { k, corner, .. } => {
                if v <= corner {
                    k
                } else {
                    0.0
                }
            }
            &Shape::Exponential { rate, .. } => -rate * self.raw_pdf(v),
            &Shape::Normal { mean, sd, .. } => -(v - mean) / (sd * sd) * self.raw_pdf(v),
            &Shape::Pareto {
                location, scale, shape, ..
            } => {
                let t = 1.0 + (v - location) / scale;
                -(shape + 1.0) / (scale * t) * self.raw_pdf(v)
            }
            Shape::Piecewise { xs, slopes, .. } => slopes[segment_left(xs, v)],
        }
    }

    fn raw_d2pdf(&self, v: f64) -> f64 {
        match &self.shape {
            Shape::Uniform | Shape::Triangular | Shape::Trapezoid { .. } | Shape::Piecewise { .. } => 0.0,
            &Shape::Exponential { rate, .. } => rate * rate * self.raw_pdf(v),
            &Shape::Normal { mean, sd, .. } => {
                let z = (v - mean) / sd;
                (z * z - 1.0) / (sd * sd) * self.raw_pdf(v)
            }
            &Shape::Pareto {
                location, scale, shape, ..
            } => {
                let t = 1.0 + (v - location) / scale;
                (shape + 1.0) * (shape + 2.0) / (scale * scale * t * t) * self.raw_pdf(v)
            }
        }
    }

    fn quantile(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        if u >= 1.0 {
            return 1.0;
        }
        match &self.shape {
            Shape::Uniform => u,
            Shape::Triangular => u.sqrt(),
            &Shape::Trapezoid { k, height, corner } => {
                let knee = 0.5 * k * corner * corner;
                if u <= knee {
                    (2.0 * u / k).sqrt()
                } else {
                    corner + (u - knee) / height
                }
            }
            &Shape::Exponential { rate, denom } => -(u * denom).ln_1p() / rate,
            &Shape::Normal { mean, sd, lo, mass } => {
                let guess = Normal::new(mean, sd)
                    .map(|n| n.inverse_cdf(lo + u * mass))
                    .unwrap_or(0.5);
                self.polish_quantile(u, guess)
            }
            &Shape::Pareto {
                location,
                scale,
                shape,
                lo,
                mass,
            } => {
                let t = (1.0 - lo - u * mass).powf(-1.0 / shape);
                self.polish_quantile(u, location + scale * (t - 1.0))
            }
            Shape::Piecewise { xs, ys, slopes, cum } => {
                let a = match cum.iter().rposition(|&c| c < u) {
                    Some(a) => a.min(xs.len() - 2),
                    None => 0,
                };
                let r = u - cum[a];
                let (y, m) = (ys[a], slopes[a]);
                let disc = (y * y + 2.0 * m * r).max(0.0);
                let t = 2.0 * r / (y + disc.sqrt());
                (xs[a] + t).clamp(0.0, 1.0)
            }
        }
    }

    /// Safeguarded Newton iteration on `cdf(x) = u`, bracketed in `[0,1]`.
    fn polish_quantile(&self, u: f64, guess: f64) -> f64 {
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        let mut x = if guess.is_finite() { guess.clamp(0.0, 1.0) } else { 0.5 };
        for _ in 0..100 {
            let r = self.raw_cdf(x) - u;
            if r.abs() <= 1e-15 {
                break;
            }
            if r > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let step = r / self.raw_pdf(x);
            let mut next = x - step;
            if !(next > lo && next < hi) || !next.is_finite() {
                next = 0.5 * (lo + hi);
            }
            if (next - x).abs() <= 1e-17 || hi - lo <= 1e-16 {
                x = next;
                break;
            }
            x = next;
        }
        x
    }
}

fn piecewise_shape(knots: &[(f64, f64)]) -> Result<Shape> {
    let bad = |msg: &str| Err(Error::Distribution(format!("piecewise-linear: {msg}")));
    if knots.len() < 2 {
        return bad("needs at least two knots");
    }
    if knots[0].0 != 0.0 || knots[knots.len() - 1].0 != 1.0 {
        return bad("knots must start at 0 and end at 1");
    }
    if knots.windows(2).any(|w| w[1].0 <= w[0].0) {
        return bad("knot positions must be strictly increasing");
    }
    if knots.iter().any(|&(_, y)| !(y >= 0.0 && y.is_finite())) {
        return bad("heights must be finite and nonnegative");
    }
    let area: f64 = knots
        .windows(2)
        .map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0))
        .sum();
    if area <= 0.0 {
        return bad("density has zero mass");
    }
    let xs: Vec<f64> = knots.iter().map(|k| k.0).collect();
    let ys: Vec<f64> = knots.iter().map(|k| k.1 / area).collect();
    let slopes: Vec<f64> = (0..xs.len() - 1)
        .map(|a| (ys[a + 1] - ys[a]) / (xs[a + 1] - xs[a]))
        .collect();
    let mut cum = vec![0.0; xs.len()];
    for a in 0..xs.len() - 1 {
        cum[a + 1] = cum[a] + 0.5 * (ys[a] + ys[a + 1]) * (xs[a + 1] - xs[a]);
    }
    Ok(Shape::Piecewise { xs, ys, slopes, cum })
}

/// Index of the piece containing `v` (right-continuous at knots).
fn segment(xs: &[f64], v: f64) -> usize {
    let last = xs.len() - 2;
    match xs[1..].iter().position(|&x| v < x) {
        Some(a) => a.min(last),
        None => last,
    }
}

/// Index of the piece to the left of `v` (left-continuous at knots).
fn segment_left(xs: &[f64], v: f64) -> usize {
    let last = xs.len() - 2;
    match xs[1..].iter().position(|&x| v <= x) {
        Some(a) => a.min(last),
        None => last,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_families() -> Vec<ValuationDistribution> {
        [
            Family::Uniform,
            Family::TriangularIncreasing,
            Family::Trapezoidal { k: 4.0 },
            Family::Trapezoidal { k: 2.5 },
            Family::TruncatedExponential { rate: 1.5 },
            Family::TruncatedExponential { rate: -2.0 },
            Family::TruncatedNormal { mean: 0.6, sd: 0.25 },
            Family::TruncatedNormal { mean: -0.2, sd: 0.4 },
            Family::TruncatedPareto {
                location: -0.5,
                scale: 1.0,
                shape: 2.0,
            },
            Family::PiecewiseLinear {
                knots: vec![(0.0, 2.0), (1.0, 0.0)],
            },
            Family::PiecewiseLinear {
                knots: vec![(0.0, 0.5), (0.3, 1.5), (0.7, 0.8), (1.0, 1.2)],
            },
        ]
        .into_iter()
        .map(|f| ValuationDistribution::new(f).unwrap())
        .collect()
    }

    #[test]
    fn point_values() {
        let u = ValuationDistribution::uniform();
        assert_eq!(u.pdf(0.3).unwrap(), 1.0);
        assert_eq!(u.cdf(0.7).unwrap(), 0.7);
        assert_eq!(u.dpdf(0.5).unwrap().value, 0.0);
        assert_eq!(u.d2pdf(0.5).unwrap().value, 0.0);
        assert_eq!(u.sample(0.42).unwrap(), 0.42);

        let t = ValuationDistribution::triangular_increasing();
        assert_eq!(t.pdf(0.5).unwrap(), 1.0);
        assert_eq!(t.cdf(0.5).unwrap(), 0.25);
        assert_eq!(t.dpdf(0.5).unwrap().value, 2.0);

        let z = ValuationDistribution::new(Family::Trapezoidal { k: 4.0 }).unwrap();
        assert!((z.pdf(0.9).unwrap() - (4.0 - 8f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn domain_errors() {
        let u = ValuationDistribution::uniform();
        assert!(matches!(u.pdf(1.2), Err(Error::Domain(_))));
        assert!(matches!(u.cdf(-0.1), Err(Error::Domain(_))));
        assert!(u.dpdf(f64::NAN).is_err());
        assert!(u.sample(1.5).is_err());
    }

    #[test]
    fn bad_parameters() {
        assert!(ValuationDistribution::new(Family::Trapezoidal { k: 2.0 }).is_err());
        assert!(ValuationDistribution::new(Family::TruncatedExponential { rate: 0.0 }).is_err());
        assert!(ValuationDistribution::new(Family::TruncatedPareto {
            location: 0.2,
            scale: 1.0,
            shape: 1.0
        })
        .is_err());
        assert!(ValuationDistribution::from_params("piecewise-linear", &[0.0, 1.0, 0.5]).is_err());
        assert!(ValuationDistribution::from_params("beta", &[]).is_err());
    }

    #[test]
    fn trapezoid_kink_takes_left_derivative() {
        let z = ValuationDistribution::new(Family::Trapezoidal { k: 4.0 }).unwrap();
        let corner = z.kinks()[0];
        let d = z.dpdf(corner).unwrap();
        assert!(d.kink);
        assert_eq!(d.value, 4.0);
        assert!(!z.dpdf(0.9).unwrap().kink);
    }

    #[test]
    fn cdf_edges_and_monotone() {
        for d in all_families() {
            assert!(d.cdf(0.0).unwrap().abs() < 1e-15);
            assert!((d.cdf(1.0).unwrap() - 1.0).abs() < 1e-12, "{:?}", d.family());
            let mut prev = 0.0;
            for i in 0..=1000 {
                let c = d.cdf(i as f64 / 1000.0).unwrap();
                assert!(c >= prev - 1e-15);
                prev = c;
            }
        }
    }

    #[test]
    fn params_round_trip() {
        for d in all_families() {
            let (name, params) = d.to_params();
            let back = ValuationDistribution::from_params(name, &params).unwrap();
            assert_eq!(back.family(), d.family());
        }
    }

    #[test]
    fn jumps_at_edges() {
        assert_eq!(ValuationDistribution::uniform().jumps(), vec![(0.0, 1.0), (1.0, -1.0)]);
        assert_eq!(
            ValuationDistribution::triangular_increasing().jumps(),
            vec![(1.0, -2.0)]
        );
    }
}
