//! One-dimensional input laws: parametric families, truncation to a bounded
//! support, and the affine map to standard parameters.
//!
//! A [`Marginal`] is always a proper probability density on its support: when
//! bounds cut away tail mass, the density is divided by the retained mass.

use serde::{Deserialize, Serialize};
use statrs::function::{beta, erf, gamma};

use crate::error::{Error, Result};

/// Tail probability cut from each unbounded side by [`truncate`].
pub const TAIL_PROBABILITY: f64 = 1e-6;

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const SQRT_2PI: f64 = 2.506_628_274_631_000_2;

/// Parametric families. Parameters are in model units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Family {
    Uniform { lower: f64, upper: f64 },
    Gaussian { mean: f64, std: f64 },
    /// Maximum-value Gumbel law.
    Gumbel { location: f64, scale: f64 },
    /// Minimum-value Gumbel law.
    GumbelMin { location: f64, scale: f64 },
    Triangular { lower: f64, mode: f64, upper: f64 },
    /// Beta law with shapes `alpha`, `beta`, stretched onto `[lower, upper]`.
    Beta { alpha: f64, beta: f64, lower: f64, upper: f64 },
    Gamma { shape: f64, scale: f64 },
    Exponential { rate: f64 },
    Weibull { scale: f64, shape: f64 },
    /// `ln X ~ N(mu, sigma^2)`.
    Lognormal { mu: f64, sigma: f64 },
    Logistic { location: f64, scale: f64 },
    /// Parsed so it can be rejected explicitly: the Poincaré spectrum of the
    /// Laplace law is not discrete.
    Laplace { location: f64, scale: f64 },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Uniform { .. } => "uniform",
            Family::Gaussian { .. } => "gaussian",
            Family::Gumbel { .. } => "gumbel",
            Family::GumbelMin { .. } => "gumbel-min",
            Family::Triangular { .. } => "triangular",
            Family::Beta { .. } => "beta",
            Family::Gamma { .. } => "gamma",
            Family::Exponential { .. } => "exponential",
            Family::Weibull { .. } => "weibull",
            Family::Lognormal { .. } => "lognormal",
            Family::Logistic { .. } => "logistic",
            Family::Laplace { .. } => "laplace",
        }
    }

    /// Builds a family from its name and positional parameter list.
    ///
    /// A two-parameter triangular law is taken as symmetric.
    pub fn from_params(name: &str, p: &[f64]) -> Result<Self> {
        let need = |n: usize| -> Result<()> {
            if p.len() == n {
                Ok(())
            } else {
                Err(Error::InvalidParameters {
                    family: name.to_string(),
                    reason: format!("expected {n} parameters, got {}", p.len()),
                })
            }
        };
        let fam = match name.to_ascii_lowercase().as_str() {
            "uniform" => {
                need(2)?;
                Family::Uniform { lower: p[0], upper: p[1] }
            }
            "gaussian" | "normal" => {
                need(2)?;
                Family::Gaussian { mean: p[0], std: p[1] }
            }
            "gumbel" => {
                need(2)?;
                Family::Gumbel { location: p[0], scale: p[1] }
            }
            "gumbel-min" | "gumbelmin" => {
                need(2)?;
                Family::GumbelMin { location: p[0], scale: p[1] }
            }
            "triangular" => match p.len() {
                2 => Family::Triangular {
                    lower: p[0],
                    mode: 0.5 * (p[0] + p[1]),
                    upper: p[1],
                },
                _ => {
                    need(3)?;
                    Family::Triangular { lower: p[0], mode: p[1], upper: p[2] }
                }
            },
            "beta" => match p.len() {
                2 => Family::Beta { alpha: p[0], beta: p[1], lower: 0.0, upper: 1.0 },
                _ => {
                    need(4)?;
                    Family::Beta { alpha: p[0], beta: p[1], lower: p[2], upper: p[3] }
                }
            },
            "gamma" => {
                need(2)?;
                Family::Gamma { shape: p[0], scale: p[1] }
            }
            "exponential" => {
                need(1)?;
                Family::Exponential { rate: p[0] }
            }
            "weibull" => {
                need(2)?;
                Family::Weibull { scale: p[0], shape: p[1] }
            }
            "lognormal" => {
                need(2)?;
                Family::Lognormal { mu: p[0], sigma: p[1] }
            }
            "logistic" => {
                need(2)?;
                Family::Logistic { location: p[0], scale: p[1] }
            }
            "laplace" => {
                need(2)?;
                Family::Laplace { location: p[0], scale: p[1] }
            }
            other => return Err(Error::UnsupportedFamily(other.to_string())),
        };
        fam.validate()?;
        Ok(fam)
    }

    fn validate(&self) -> Result<()> {
        let bad = |reason: &str| {
            Err(Error::InvalidParameters {
                family: self.name().to_string(),
                reason: reason.to_string(),
            })
        };
        let all_finite = match *self {
            Family::Uniform { lower, upper } => lower.is_finite() && upper.is_finite(),
            Family::Gaussian { mean, std } => mean.is_finite() && std.is_finite(),
            Family::Gumbel { location, scale }
            | Family::GumbelMin { location, scale }
            | Family::Logistic { location, scale }
            | Family::Laplace { location, scale } => location.is_finite() && scale.is_finite(),
            Family::Triangular { lower, mode, upper } => {
                lower.is_finite() && mode.is_finite() && upper.is_finite()
            }
            Family::Beta { alpha, beta, lower, upper } => {
                alpha.is_finite() && beta.is_finite() && lower.is_finite() && upper.is_finite()
            }
            Family::Gamma { shape, scale } => shape.is_finite() && scale.is_finite(),
            Family::Exponential { rate } => rate.is_finite(),
            Family::Weibull { scale, shape } => scale.is_finite() && shape.is_finite(),
            Family::Lognormal { mu, sigma } => mu.is_finite() && sigma.is_finite(),
        };
        if !all_finite {
            return bad("parameters must be finite");
        }
        match *self {
            Family::Uniform { lower, upper } if lower >= upper => bad("lower must be below upper"),
            Family::Triangular { lower, mode, upper } if !(lower < upper && lower <= mode && mode <= upper) => {
                bad("need lower <= mode <= upper and lower < upper")
            }
            Family::Beta { alpha, beta, lower, upper } if alpha <= 0.0 || beta <= 0.0 || lower >= upper => {
                bad("shapes must be positive and lower below upper")
            }
            Family::Gaussian { std: s, .. }
            | Family::Gumbel { scale: s, .. }
            | Family::GumbelMin { scale: s, .. }
            | Family::Logistic { scale: s, .. }
            | Family::Laplace { scale: s, .. }
            | Family::Lognormal { sigma: s, .. }
                if s <= 0.0 =>
            {
                bad("scale must be positive")
            }
            Family::Gamma { shape, scale } if shape <= 0.0 || scale <= 0.0 => bad("shape and scale must be positive"),
            Family::Exponential { rate } if rate <= 0.0 => bad("rate must be positive"),
            Family::Weibull { scale, shape } if scale <= 0.0 || shape <= 0.0 => bad("shape and scale must be positive"),
            _ => Ok(()),
        }
    }

    /// Natural support of the untruncated law.
    pub fn natural_support(&self) -> (f64, f64) {
        match *self {
            Family::Uniform { lower, upper }
            | Family::Triangular { lower, upper, .. }
            | Family::Beta { lower, upper, .. } => (lower, upper),
            Family::Gamma { .. } | Family::Exponential { .. } | Family::Weibull { .. } | Family::Lognormal { .. } => {
                (0.0, f64::INFINITY)
            }
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    /// Untruncated density.
    pub fn pdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.natural_support();
        if x < lo || x > hi {
            return 0.0;
        }
        match *self {
            Family::Uniform { lower, upper } => 1.0 / (upper - lower),
            Family::Gaussian { mean, std } => {
                let z = (x - mean) / std;
                (-0.5 * z * z).exp() / (std * SQRT_2PI)
            }
            Family::Gumbel { location, scale } => {
                let z = (x - location) / scale;
                (-(z + (-z).exp())).exp() / scale
            }
            Family::GumbelMin { location, scale } => {
                let z = (x - location) / scale;
                (z - z.exp()).exp() / scale
            }
            Family::Logistic { location, scale } => {
                let z = -((x - location) / scale).abs();
                let e = z.exp();
                e / (scale * (1.0 + e) * (1.0 + e))
            }
            Family::Laplace { location, scale } => (-((x - location) / scale).abs()).exp() / (2.0 * scale),
            Family::Triangular { lower, mode, upper } => {
                if x < mode {
                    2.0 * (x - lower) / ((upper - lower) * (mode - lower))
                } else if x > mode {
                    2.0 * (upper - x) / ((upper - lower) * (upper - mode))
                } else {
                    2.0 / (upper - lower)
                }
            }
            Family::Beta { alpha, beta: b, lower, upper } => {
                let w = upper - lower;
                let t = (x - lower) / w;
                ((alpha - 1.0) * t.ln() + (b - 1.0) * (1.0 - t).ln() - beta::ln_beta(alpha, b)).exp() / w
            }
            Family::Gamma { shape, scale } => {
                let t = x / scale;
                ((shape - 1.0) * t.ln() - t - gamma::ln_gamma(shape)).exp() / scale
            }
            Family::Exponential { rate } => rate * (-rate * x).exp(),
            Family::Weibull { scale, shape } => {
                let t = x / scale;
                shape / scale * t.powf(shape - 1.0) * (-t.powf(shape)).exp()
            }
            Family::Lognormal { mu, sigma } => {
                if x <= 0.0 {
                    return 0.0;
                }
                let z = (x.ln() - mu) / sigma;
                (-0.5 * z * z).exp() / (x * sigma * SQRT_2PI)
            }
        }
    }

    /// Untruncated cumulative distribution function.
    pub fn cdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.natural_support();
        if x <= lo {
            return 0.0;
        }
        if x >= hi {
            return 1.0;
        }
        match *self {
            Family::Uniform { lower, upper } => (x - lower) / (upper - lower),
            Family::Gaussian { mean, std } => std_normal_cdf((x - mean) / std),
            Family::Gumbel { location, scale } => (-(-(x - location) / scale).exp()).exp(),
            Family::GumbelMin { location, scale } => -(-((x - location) / scale).exp()).exp_m1(),
            Family::Logistic { location, scale } => 1.0 / (1.0 + (-(x - location) / scale).exp()),
            Family::Laplace { location, scale } => {
                let z = (x - location) / scale;
                if z < 0.0 {
                    0.5 * z.exp()
                } else {
                    1.0 - 0.5 * (-z).exp()
                }
            }
            Family::Triangular { lower, mode, upper } => {
                if x <= mode {
                    (x - lower).powi(2) / ((upper - lower) * (mode - lower))
                } else {
                    1.0 - (upper - x).powi(2) / ((upper - lower) * (upper - mode))
                }
            }
            Family::Beta { alpha, beta: b, lower, upper } => beta::beta_reg(alpha, b, (x - lower) / (upper - lower)),
            Family::Gamma { shape, scale } => gamma::gamma_lr(shape, x / scale),
            Family::Exponential { rate } => -(-rate * x).exp_m1(),
            Family::Weibull { scale, shape } => -(-(x / scale).powf(shape)).exp_m1(),
            Family::Lognormal { mu, sigma } => std_normal_cdf((x.ln() - mu) / sigma),
        }
    }

    /// Untruncated quantile function for `p` in `[0, 1]`.
    pub fn quantile(&self, p: f64) -> f64 {
        let (lo, hi) = self.natural_support();
        if p <= 0.0 {
            return lo;
        }
        if p >= 1.0 {
            return hi;
        }
        match *self {
            Family::Uniform { lower, upper } => lower + p * (upper - lower),
            Family::Gaussian { mean, std } => mean + std * std_normal_quantile(p),
            Family::Gumbel { location, scale } => location - scale * (-p.ln()).ln(),
            Family::GumbelMin { location, scale } => location + scale * (-(-p).ln_1p()).ln(),
            Family::Logistic { location, scale } => location + scale * (p / (1.0 - p)).ln(),
            Family::Laplace { location, scale } => {
                if p < 0.5 {
                    location + scale * (2.0 * p).ln()
                } else {
                    location - scale * (2.0 * (1.0 - p)).ln()
                }
            }
            Family::Triangular { lower, mode, upper } => {
                let split = (mode - lower) / (upper - lower);
                if p <= split {
                    lower + (p * (upper - lower) * (mode - lower)).sqrt()
                } else {
                    upper - ((1.0 - p) * (upper - lower) * (upper - mode)).sqrt()
                }
            }
            Family::Exponential { rate } => -(-p).ln_1p() / rate,
            Family::Weibull { scale, shape } => scale * (-(-p).ln_1p()).powf(1.0 / shape),
            Family::Lognormal { mu, sigma } => (mu + sigma * std_normal_quantile(p)).exp(),
            Family::Beta { .. } | Family::Gamma { .. } => self.quantile_by_bisection(p),
        }
    }

    fn quantile_by_bisection(&self, p: f64) -> f64 {
        let (mut lo, mut hi) = self.natural_support();
        if !hi.is_finite() {
            hi = lo.max(0.0) + 1.0;
            while self.cdf(hi) < p {
                hi = 2.0 * hi + 1.0;
            }
        }
        if !lo.is_finite() {
            lo = hi.min(0.0) - 1.0;
            while self.cdf(lo) > p {
                lo = 2.0 * lo - 1.0;
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-12 * (1.0 + mid.abs()) {
                break;
            }
        }
        0.5 * (lo + hi)
    }
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erf::erfc(-z / SQRT_2)
}

fn std_normal_quantile(p: f64) -> f64 {
    -SQRT_2 * erf::erfc_inv(2.0 * p)
}

/// A family restricted to `[lower, upper]`, renormalized to unit mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "MarginalRecord", try_from = "MarginalRecord")]
pub struct Marginal {
    pub family: Family,
    lower: f64,
    upper: f64,
    cdf_lower: f64,
    mass: f64,
}

/// Serialized form; an open side is `null` since JSON has no infinities.
#[derive(Serialize, Deserialize)]
struct MarginalRecord {
    family: Family,
    lower: Option<f64>,
    upper: Option<f64>,
}

impl From<Marginal> for MarginalRecord {
    fn from(m: Marginal) -> Self {
        let finite = |v: f64| v.is_finite().then_some(v);
        Self { family: m.family, lower: finite(m.lower), upper: finite(m.upper) }
    }
}

impl TryFrom<MarginalRecord> for Marginal {
    type Error = Error;

    fn try_from(r: MarginalRecord) -> Result<Self> {
        Marginal::with_bounds(r.family, r.lower.unwrap_or(f64::NEG_INFINITY), r.upper.unwrap_or(f64::INFINITY))
    }
}

impl Marginal {
    /// The untruncated law on its natural support.
    pub fn new(family: Family) -> Result<Self> {
        let (lo, hi) = family.natural_support();
        Self::with_bounds(family, lo, hi)
    }

    /// The law restricted to `[lower, upper]` intersected with the natural support.
    /// Infinite bounds leave that side untouched.
    pub fn with_bounds(family: Family, lower: f64, upper: f64) -> Result<Self> {
        family.validate()?;
        let (nlo, nhi) = family.natural_support();
        let lower = lower.max(nlo);
        let upper = upper.min(nhi);
        if lower.is_nan() || upper.is_nan() || lower >= upper {
            return Err(Error::InvalidParameters {
                family: family.name().into(),
                reason: format!("empty support [{lower}, {upper}]"),
            });
        }
        let cdf_lower = family.cdf(lower);
        let mass = family.cdf(upper) - cdf_lower;
        if mass <= 0.0 {
            return Err(Error::InvalidParameters {
                family: family.name().into(),
                reason: format!("no probability mass on [{lower}, {upper}]"),
            });
        }
        Ok(Self { family, lower, upper, cdf_lower, mass })
    }

    pub fn support(&self) -> (f64, f64) {
        (self.lower, self.upper)
    }

    pub fn is_bounded(&self) -> bool {
        self.lower.is_finite() && self.upper.is_finite()
    }

    /// Probability mass of the underlying family retained by the bounds.
    pub fn retained_mass(&self) -> f64 {
        self.mass
    }

    /// True for a Gaussian law that has not been truncated.
    pub fn is_untruncated_gaussian(&self) -> bool {
        matches!(self.family, Family::Gaussian { .. }) && !self.lower.is_finite() && !self.upper.is_finite()
    }

    fn check(&self, x: f64) -> Result<()> {
        if x >= self.lower && x <= self.upper {
            Ok(())
        } else {
            Err(Error::OutOfSupport { value: x, lower: self.lower, upper: self.upper })
        }
    }

    /// Normalized density; the caller guarantees `x` lies in the support.
    #[inline]
    pub(crate) fn density_unchecked(&self, x: f64) -> f64 {
        self.family.pdf(x) / self.mass
    }

    pub fn density(&self, x: f64) -> Result<f64> {
        self.check(x)?;
        Ok(self.density_unchecked(x))
    }

    /// `V = -ln(density)`.
    pub fn potential(&self, x: f64) -> Result<f64> {
        Ok(-self.density(x)?.ln())
    }

    /// Piecewise derivative of the potential, by central differences of `ln(density)`
    /// kept inside the support.
    pub fn potential_prime(&self, x: f64) -> Result<f64> {
        self.check(x)?;
        let width = if self.is_bounded() { self.upper - self.lower } else { 1.0 + x.abs() };
        let h = 1e-6 * width;
        let lo = (x - h).max(self.lower);
        let hi = (x + h).min(self.upper);
        let v = |t: f64| -self.density_unchecked(t).ln();
        Ok((v(hi) - v(lo)) / (hi - lo))
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.lower {
            return 0.0;
        }
        if x >= self.upper {
            return 1.0;
        }
        ((self.family.cdf(x) - self.cdf_lower) / self.mass).clamp(0.0, 1.0)
    }

    pub fn quantile(&self, p: f64) -> f64 {
        if p <= 0.0 {
            return self.lower;
        }
        if p >= 1.0 {
            return self.upper;
        }
        self.family
            .quantile(self.cdf_lower + p * self.mass)
            .clamp(self.lower, self.upper)
    }
}

/// Cuts every unbounded side at the untruncated `1e-6` / `1 - 1e-6` quantile.
///
/// Finite bounds are kept. Laplace laws are rejected.
pub fn truncate(marginal: &Marginal) -> Result<Marginal> {
    if let Family::Laplace { .. } = marginal.family {
        return Err(Error::UnsupportedFamily(
            "laplace (no discrete Poincaré spectrum)".into(),
        ));
    }
    if marginal.is_bounded() {
        return Ok(*marginal);
    }
    let (lo, hi) = marginal.support();
    let lower = if lo.is_finite() { lo } else { marginal.family.quantile(TAIL_PROBABILITY) };
    let upper = if hi.is_finite() { hi } else { marginal.family.quantile(1.0 - TAIL_PROBABILITY) };
    Marginal::with_bounds(marginal.family, lower, upper)
}

/// Affine change of variables `u = (x - shift) / scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StandardizationMap {
    pub shift: f64,
    pub scale: f64,
}

impl StandardizationMap {
    pub const IDENTITY: Self = Self { shift: 0.0, scale: 1.0 };

    #[inline]
    pub fn forward(&self, x: f64) -> f64 {
        (x - self.shift) / self.scale
    }

    #[inline]
    pub fn inverse(&self, u: f64) -> f64 {
        self.shift + self.scale * u
    }
}

/// Maps a law to standard parameters: bounds for uniform, beta and triangular;
/// location and scale for the Gaussian, Gumbel, logistic and Laplace laws; the
/// scale alone for exponential, gamma, Weibull and lognormal.
pub fn standardize(marginal: &Marginal) -> (Marginal, StandardizationMap) {
    use Family::*;
    let (family, map) = match marginal.family {
        Uniform { lower, upper } => (
            Uniform { lower: -0.5, upper: 0.5 },
            bounds_map(lower, upper),
        ),
        Triangular { lower, mode, upper } => {
            let map = bounds_map(lower, upper);
            (Triangular { lower: -0.5, mode: map.forward(mode), upper: 0.5 }, map)
        }
        Beta { alpha, beta, lower, upper } => (
            Beta { alpha, beta, lower: -0.5, upper: 0.5 },
            bounds_map(lower, upper),
        ),
        Gaussian { mean, std } => (Gaussian { mean: 0.0, std: 1.0 }, StandardizationMap { shift: mean, scale: std }),
        Gumbel { location, scale } => (
            Gumbel { location: 0.0, scale: 1.0 },
            StandardizationMap { shift: location, scale },
        ),
        GumbelMin { location, scale } => (
            GumbelMin { location: 0.0, scale: 1.0 },
            StandardizationMap { shift: location, scale },
        ),
        Logistic { location, scale } => (
            Logistic { location: 0.0, scale: 1.0 },
            StandardizationMap { shift: location, scale },
        ),
        Laplace { location, scale } => (
            Laplace { location: 0.0, scale: 1.0 },
            StandardizationMap { shift: location, scale },
        ),
        Exponential { rate } => (Exponential { rate: 1.0 }, StandardizationMap { shift: 0.0, scale: 1.0 / rate }),
        Gamma { shape, scale } => (Gamma { shape, scale: 1.0 }, StandardizationMap { shift: 0.0, scale }),
        Weibull { scale, shape } => (Weibull { scale: 1.0, shape }, StandardizationMap { shift: 0.0, scale }),
        Lognormal { mu, sigma } => (
            Lognormal { mu: 0.0, sigma },
            StandardizationMap { shift: 0.0, scale: mu.exp() },
        ),
    };
    let (lo, hi) = marginal.support();
    let standardized = Marginal {
        family,
        lower: map_bound(&map, lo),
        upper: map_bound(&map, hi),
        cdf_lower: marginal.cdf_lower,
        mass: marginal.mass,
    };
    (standardized, map)
}

fn bounds_map(lower: f64, upper: f64) -> StandardizationMap {
    StandardizationMap { shift: 0.5 * (lower + upper), scale: upper - lower }
}

fn map_bound(map: &StandardizationMap, x: f64) -> f64 {
    if x.is_finite() {
        map.forward(x)
    } else {
        x
    }
}

/// Declarative marginal description used by configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalSpec {
    #[serde(default)]
    pub name: Option<String>,
    pub family: String,
    pub params: Vec<f64>,
    /// Optional `[lower, upper]`; `null` leaves a side unbounded.
    #[serde(default)]
    pub bounds: Option<[Option<f64>; 2]>,
}

impl MarginalSpec {
    pub fn build(&self) -> Result<Marginal> {
        let family = Family::from_params(&self.family, &self.params)?;
        let (lo, hi) = match self.bounds {
            Some([lo, hi]) => (lo.unwrap_or(f64::NEG_INFINITY), hi.unwrap_or(f64::INFINITY)),
            None => (f64::NEG_INFINITY, f64::INFINITY),
        };
        Marginal::with_bounds(family, lo, hi)
    }
}

/// A marginal ready for basis construction: bounded (unless it is an untruncated
/// Gaussian) and expressed in standard coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreparedInput {
    /// Support in model units, after truncation.
    pub model: Marginal,
    pub standard: Marginal,
    pub map: StandardizationMap,
}

/// Truncates (except for an untruncated Gaussian) and standardizes.
pub fn prepare(marginal: &Marginal) -> Result<PreparedInput> {
    let model = if marginal.is_untruncated_gaussian() { *marginal } else { truncate(marginal)? };
    let (standard, map) = standardize(&model);
    Ok(PreparedInput { model, standard, map })
}
