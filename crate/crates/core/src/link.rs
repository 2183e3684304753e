//! Error-distribution kernels: CDF `G`, density `g` and density derivative `g'`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Distribution of the latent error term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LinkFamily {
    Probit,
    Logit,
    /// Uniform on `[lo, hi]`.
    Uniform {
        lo: f64,
        hi: f64,
    },
}

impl LinkFamily {
    /// Uniform link on the default support `(-0.5, 0.5)`.
    pub const UNIFORM: LinkFamily = LinkFamily::Uniform { lo: -0.5, hi: 0.5 };

    #[inline]
    pub fn cdf(&self, z: f64) -> f64 {
        match *self {
            LinkFamily::Probit => 0.5 * libm::erfc(-z * std::f64::consts::FRAC_1_SQRT_2),
            LinkFamily::Logit => logistic(z),
            LinkFamily::Uniform { lo, hi } => ((z - lo) / (hi - lo)).clamp(0.0, 1.0),
        }
    }

    /// `1 - G(z)`, evaluated without cancellation in the upper tail.
    #[inline]
    pub fn sf(&self, z: f64) -> f64 {
        match *self {
            LinkFamily::Probit => 0.5 * libm::erfc(z * std::f64::consts::FRAC_1_SQRT_2),
            LinkFamily::Logit => logistic(-z),
            LinkFamily::Uniform { lo, hi } => ((hi - z) / (hi - lo)).clamp(0.0, 1.0),
        }
    }

    /// `(G(z), 1 - G(z))`. The smaller tail is evaluated directly and the
    /// other taken as its complement, which loses nothing since it is at
    /// least one half.
    #[inline]
    pub fn tails(&self, z: f64) -> (f64, f64) {
        match *self {
            LinkFamily::Uniform { .. } => (self.cdf(z), self.sf(z)),
            _ if z >= 0.0 => {
                let s = self.sf(z);
                (1.0 - s, s)
            }
            _ => {
                let c = self.cdf(z);
                (c, 1.0 - c)
            }
        }
    }

    #[inline]
    pub fn pdf(&self, z: f64) -> f64 {
        match *self {
            LinkFamily::Probit => INV_SQRT_2PI * (-0.5 * z * z).exp(),
            LinkFamily::Logit => {
                let e = (-z.abs()).exp();
                e / ((1.0 + e) * (1.0 + e))
            }
            LinkFamily::Uniform { lo, hi } => {
                if z >= lo && z <= hi {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
        }
    }

    #[inline]
    pub fn pdf_deriv(&self, z: f64) -> f64 {
        match *self {
            LinkFamily::Probit => -z * self.pdf(z),
            // g' = g (1 - 2G) = g (sf - cdf)
            LinkFamily::Logit => self.pdf(z) * (logistic(-z) - logistic(z)),
            LinkFamily::Uniform { .. } => 0.0,
        }
    }

    /// Whether `G(-z) = 1 - G(z)`.
    pub fn is_symmetric(&self) -> bool {
        match *self {
            LinkFamily::Uniform { lo, hi } => lo == -hi,
            _ => true,
        }
    }
}

#[inline]
fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl fmt::Display for LinkFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LinkFamily::Probit => write!(f, "probit"),
            LinkFamily::Logit => write!(f, "logit"),
            LinkFamily::Uniform { lo, hi } => write!(f, "uniform:{lo}:{hi}"),
        }
    }
}

impl FromStr for LinkFamily {
    type Err = Error;

    /// Accepts `probit`, `logit`, `uniform` and `uniform:lo:hi`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        match s.to_ascii_lowercase().as_str() {
            "probit" => return Ok(LinkFamily::Probit),
            "logit" => return Ok(LinkFamily::Logit),
            "uniform" => return Ok(LinkFamily::UNIFORM),
            _ => {}
        }
        let bad = || Error::InvalidArgument(format!("unknown link {s:?}; expected probit, logit or uniform:lo:hi"));
        let mut parts = s.split(':');
        if !parts.next().is_some_and(|p| p.eq_ignore_ascii_case("uniform")) {
            return Err(bad());
        }
        let lo: f64 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let hi: f64 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        if parts.next().is_some() || !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(bad());
        }
        Ok(LinkFamily::Uniform { lo, hi })
    }
}
