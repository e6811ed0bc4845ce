//! Trapping potentials.

use std::fmt;
use std::str::FromStr;

use crate::error::{AfError, Result};
use crate::field::ScalarField;
use crate::grid::Grid2D;

/// External potential `V ≥ 0`.
///
/// `Homogeneous` is `V(x, y) = (a x² + b y²)^{s/2}`, homogeneous of degree `s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PotentialSpec {
    Zero,
    Homogeneous { s: f64, a: f64, b: f64 },
}

impl PotentialSpec {
    pub fn harmonic(a: f64, b: f64) -> Result<Self> {
        Self::homogeneous(2.0, a, b)
    }

    pub fn power(s: f64) -> Result<Self> {
        Self::homogeneous(s, 1.0, 1.0)
    }

    pub fn homogeneous(s: f64, a: f64, b: f64) -> Result<Self> {
        if !(s > 1.0) || !s.is_finite() {
            return Err(AfError::Config(format!("potential degree must satisfy s > 1, got {s}")));
        }
        if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
            return Err(AfError::Config(format!(
                "potential coefficients must be positive, got a={a}, b={b}"
            )));
        }
        Ok(PotentialSpec::Homogeneous { s, a, b })
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, PotentialSpec::Zero)
    }

    pub fn degree(&self) -> Option<f64> {
        match self {
            PotentialSpec::Zero => None,
            PotentialSpec::Homogeneous { s, .. } => Some(*s),
        }
    }

    #[inline]
    pub fn eval(&self, r: [f64; 2]) -> f64 {
        match *self {
            PotentialSpec::Zero => 0.0,
            PotentialSpec::Homogeneous { s, a, b } => {
                let q = a * r[0] * r[0] + b * r[1] * r[1];
                if s == 2.0 {
                    q
                } else {
                    q.powf(0.5 * s)
                }
            }
        }
    }

    /// `V` on the unit circle, `V(cos θ, sin θ)`.
    pub fn angular(&self, theta: f64) -> f64 {
        self.eval([theta.cos(), theta.sin()])
    }

    /// Node values of `V`.
    pub fn sample(&self, grid: &Grid2D) -> ScalarField {
        ScalarField::from_fn(*grid, |r| self.eval(r))
    }

    /// Node values, or `None` when `V` vanishes identically.
    pub(crate) fn sample_values(&self, grid: &Grid2D) -> Option<Vec<f64>> {
        match self {
            PotentialSpec::Zero => None,
            _ => Some(self.sample(grid).values().to_vec()),
        }
    }
}

impl fmt::Display for PotentialSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            PotentialSpec::Zero => write!(f, "none"),
            PotentialSpec::Homogeneous { s: 2.0, a, b } => write!(f, "harmonic:{a},{b}"),
            PotentialSpec::Homogeneous { s, a, b } if a == 1.0 && b == 1.0 => write!(f, "power:{s}"),
            PotentialSpec::Homogeneous { s, a, b } => write!(f, "homogeneous:{s},{a},{b}"),
        }
    }
}

impl FromStr for PotentialSpec {
    type Err = AfError;

    /// Accepts `none`, `harmonic`, `harmonic:a,b`, `power:s` and
    /// `homogeneous:s,a,b`.
    fn from_str(text: &str) -> Result<Self> {
        let text = text.trim();
        let (kind, args) = match text.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (text, None),
        };
        let numbers = |args: Option<&str>, want: usize| -> Result<Vec<f64>> {
            let args = args.ok_or_else(|| AfError::Config(format!("potential `{text}` needs {want} parameter(s)")))?;
            let parsed = args
                .split(',')
                .map(|p| p.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| AfError::Config(format!("potential `{text}`: {e}")))?;
            if parsed.len() != want {
                return Err(AfError::Config(format!(
                    "potential `{text}` needs {want} parameter(s), got {}",
                    parsed.len()
                )));
            }
            Ok(parsed)
        };
        match kind.to_ascii_lowercase().as_str() {
            "none" | "zero" if args.is_none() => Ok(PotentialSpec::Zero),
            "harmonic" if args.is_none() => Self::harmonic(1.0, 1.0),
            "harmonic" => {
                let p = numbers(args, 2)?;
                Self::harmonic(p[0], p[1])
            }
            "power" => Self::power(numbers(args, 1)?[0]),
            "homogeneous" => {
                let p = numbers(args, 3)?;
                Self::homogeneous(p[0], p[1], p[2])
            }
            _ => Err(AfError::Config(format!(
                "unknown potential `{text}` (expected none, harmonic:a,b or power:s)"
            ))),
        }
    }
}
