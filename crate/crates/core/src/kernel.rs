use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Symmetric smoothing kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    /// `3/4 (1 - u²)` on `|u| < 1`, zero elsewhere.
    Epanechnikov,
    /// Standard normal density.
    Gaussian,
}

impl Kernel {
    #[inline]
    pub fn weight<F: Scalar>(self, u: F) -> F {
        match self {
            Kernel::Epanechnikov => {
                let u2 = u * u;
                if u2 < F::one() {
                    F::lit(0.75) * (F::one() - u2)
                } else {
                    F::zero()
                }
            }
            Kernel::Gaussian => {
                F::lit(0.398_942_280_401_432_7) * (F::lit(-0.5) * u * u).exp()
            }
        }
    }

    pub fn is_compact(self) -> bool {
        matches!(self, Kernel::Epanechnikov)
    }
}

impl FromStr for Kernel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "epanechnikov" | "epa" => Ok(Kernel::Epanechnikov),
            "gaussian" | "normal" => Ok(Kernel::Gaussian),
            other => Err(format!("unknown kernel `{other}` (epanechnikov, gaussian)")),
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kernel::Epanechnikov => "epanechnikov",
            Kernel::Gaussian => "gaussian",
        })
    }
}
