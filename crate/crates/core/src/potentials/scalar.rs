use serde::{Deserialize, Serialize};

use crate::bridge::norm;
use crate::error::{invalid, Error, Result};

/// Which summand of `V = V₁ + V₂` a catalog term belongs to: `V₁` is the
/// locally regular Kato-decomposable part, `V₂` the sub-quadratic part that
/// may be unbounded below.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Part {
    V1,
    V2,
}

fn default_v1() -> Part {
    Part::V1
}

fn default_v2() -> Part {
    Part::V2
}

/// Declarative scalar potential.
///
/// Evaluation always goes through the split `eval = eval_v1 + eval_v2`, so a
/// truncated spec evaluates bit-identically to its inner spec wherever the
/// truncation is inactive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalarPotentialSpec {
    Zero,
    Constant {
        value: f64,
        #[serde(default = "default_v1")]
        part: Part,
    },
    /// `½ Σ_k ω_k² x_k²`.
    Harmonic {
        omega: Vec<f64>,
        #[serde(default = "default_v1")]
        part: Part,
    },
    /// `sign · coefficient · |x|^exponent`.
    PowerLaw {
        sign: f64,
        exponent: f64,
        coefficient: f64,
        #[serde(default = "default_v2")]
        part: Part,
    },
    Sum { terms: Vec<ScalarPotentialSpec> },
    /// `V₁(x) + Θ(R − |x|) V₂(x)` with `Θ(0) = 0`.
    Truncated { inner: Box<ScalarPotentialSpec>, radius: f64 },
    /// A sampled realization on a regular grid, multilinearly interpolated
    /// and clamped to the grid outside it.
    FieldSample(FieldSample),
}

/// Values of a field on the grid `origin + i·spacing`, `i ∈ Π [0, shape_k)`,
/// row-major with the last axis fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSample {
    pub origin: Vec<f64>,
    pub spacing: f64,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
    #[serde(default = "default_v1")]
    pub part: Part,
}

impl FieldSample {
    pub fn new(origin: Vec<f64>, spacing: f64, shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let s = Self { origin, spacing, shape, values, part: Part::V1 };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<()> {
        if self.origin.len() != self.shape.len() || self.origin.is_empty() {
            return Err(invalid("field sample origin and shape must have equal, nonzero length"));
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(invalid("field sample spacing must be positive"));
        }
        if self.shape.contains(&0) {
            return Err(invalid("field sample shape entries must be positive"));
        }
        let n: usize = self.shape.iter().product();
        if n != self.values.len() {
            return Err(Error::DimensionMismatch { expected: n, found: self.values.len() });
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("field sample values must be finite"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        let mut base = vec![0usize; d];
        let mut frac = vec![0.0; d];
        for k in 0..d {
            let last = self.shape[k] - 1;
            let u = ((x[k] - self.origin[k]) / self.spacing).clamp(0.0, last as f64);
            let i = (u.floor() as usize).min(last.saturating_sub(1));
            base[k] = i;
            frac[k] = if last == 0 { 0.0 } else { u - i as f64 };
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << d) {
            let mut weight = 1.0;
            let mut flat = 0usize;
            for k in 0..d {
                let up = (corner >> k) & 1 == 1;
                let w = if up { frac[k] } else { 1.0 - frac[k] };
                if w == 0.0 {
                    weight = 0.0;
                    break;
                }
                weight *= w;
                let idx = (base[k] + usize::from(up)).min(self.shape[k] - 1);
                flat = flat * self.shape[k] + idx;
            }
            if weight != 0.0 {
                acc += weight * self.values[flat];
            }
        }
        acc
    }
}

impl ScalarPotentialSpec {
    pub fn constant(value: f64) -> Self {
        Self::Constant { value, part: Part::V1 }
    }

    /// `½|x|²` in `d` dimensions.
    pub fn harmonic(dim: usize, omega: f64) -> Self {
        Self::Harmonic { omega: vec![omega; dim], part: Part::V1 }
    }

    pub fn power_law(sign: f64, exponent: f64, coefficient: f64, part: Part) -> Self {
        Self::PowerLaw { sign, exponent, coefficient, part }
    }

    pub fn plus(self, other: ScalarPotentialSpec) -> Self {
        Self::Sum { terms: vec![self, other] }
    }

    /// Check parameters. Called by constructors of everything that consumes
    /// a spec deserialized from user input.
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Zero => Ok(()),
            Self::Constant { value, .. } => finite(*value, "constant value"),
            Self::Harmonic { omega, .. } => {
                if omega.is_empty() {
                    return Err(invalid("harmonic potential needs at least one frequency"));
                }
                omega.iter().try_for_each(|w| finite(*w, "harmonic frequency"))
            }
            Self::PowerLaw { sign, exponent, coefficient, .. } => {
                finite(*sign, "power-law sign")?;
                finite(*coefficient, "power-law coefficient")?;
                if !(exponent.is_finite() && *exponent >= 0.0) {
                    return Err(invalid("power-law exponent must be finite and non-negative"));
                }
                Ok(())
            }
            Self::Sum { terms } => terms.iter().try_for_each(Self::validate),
            Self::Truncated { inner, radius } => {
                if radius.is_nan() || *radius <= 0.0 {
                    return Err(invalid(format!("truncation radius must be positive, got {radius}")));
                }
                inner.validate()
            }
            Self::FieldSample(f) => f.validate(),
        }
    }

    /// Spatial dimension if the potential fixes one.
    pub fn dimension(&self) -> Option<usize> {
        match self {
            Self::Harmonic { omega, .. } => Some(omega.len()),
            Self::FieldSample(f) => Some(f.dim()),
            Self::Sum { terms } => terms.iter().find_map(Self::dimension),
            Self::Truncated { inner, .. } => inner.dimension(),
            _ => None,
        }
    }

    pub fn check_dimension(&self, dim: usize) -> Result<()> {
        match self.dimension() {
            Some(d) if d != dim => Err(Error::DimensionMismatch { expected: dim, found: d }),
            _ => Ok(()),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.eval_v1(x) + self.eval_v2(x)
    }

    pub fn eval_v1(&self, x: &[f64]) -> f64 {
        self.eval_part(x, Part::V1)
    }

    pub fn eval_v2(&self, x: &[f64]) -> f64 {
        self.eval_part(x, Part::V2)
    }

    fn eval_part(&self, x: &[f64], which: Part) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Constant { value, part } => select(*part, which, || *value),
            Self::Harmonic { omega, part } => select(*part, which, || {
                0.5 * omega.iter().zip(x).map(|(w, v)| w * w * v * v).sum::<f64>()
            }),
            Self::PowerLaw { sign, exponent, coefficient, part } => {
                select(*part, which, || sign * coefficient * norm(x).powf(*exponent))
            }
            Self::Sum { terms } => terms.iter().map(|s| s.eval_part(x, which)).sum(),
            Self::Truncated { inner, radius } => match which {
                Part::V1 => inner.eval_v1(x),
                Part::V2 => {
                    if heaviside(radius - norm(x)) {
                        inner.eval_v2(x)
                    } else {
                        0.0
                    }
                }
            },
            Self::FieldSample(f) => select(f.part, which, || f.eval(x)),
        }
    }

    /// True if the declared `V₂` part is identically zero.
    pub fn has_v2(&self) -> bool {
        match self {
            Self::Zero => false,
            Self::Constant { part, .. } | Self::Harmonic { part, .. } | Self::PowerLaw { part, .. } => {
                *part == Part::V2
            }
            Self::Sum { terms } => terms.iter().any(Self::has_v2),
            Self::Truncated { inner, .. } => inner.has_v2(),
            Self::FieldSample(f) => f.part == Part::V2,
        }
    }
}

fn select(part: Part, which: Part, f: impl FnOnce() -> f64) -> f64 {
    if part == which {
        f()
    } else {
        0.0
    }
}

fn finite(v: f64, what: &str) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{what} must be finite")))
    }
}

/// Left-continuous step `Θ = 1_{]0,∞[}`.
fn heaviside(v: f64) -> bool {
    v > 0.0
}

/// `V_R = V₁ + Θ(R − |x|) V₂`.
pub fn truncate(spec: &ScalarPotentialSpec, radius: f64) -> Result<ScalarPotentialSpec> {
    if radius.is_nan() || radius <= 0.0 {
        return Err(invalid(format!("truncation radius must be positive, got {radius}")));
    }
    Ok(ScalarPotentialSpec::Truncated { inner: Box::new(spec.clone()), radius })
}
