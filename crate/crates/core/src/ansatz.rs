//! Named constant-field families with a handful of free amplitudes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::liealg::{AlgebraElement, GroupId};
use crate::strata::ConstantField;

/// Field families used for classification, closed forms and scans.
///
/// Amplitudes are coefficients on the basis `t_a` (equivalently on the
/// hermitian `lambda_a / 2`), indices one-based in the names below.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Ansatz {
    /// su(2): `A_1 = a1 t1`, `A_2 = a2 t2`, `A_3 = a3 t3`.
    #[serde(rename = "SU2_DIAG")]
    Su2Diag,
    /// su(3) copy of the su(2) family inside the I-spin subalgebra.
    #[serde(rename = "SU3_I")]
    Su3I,
    /// su(3): `A_1 = a1 t1`, `A_2 = a2 t2`, `A_3 = a8 t8`.
    #[serde(rename = "SU3_II")]
    Su3II,
    /// su(3): `A_1 = a4 t4`, `A_2 = a5 t5`, `A_3 = a8 t8`.
    #[serde(rename = "SU3_III")]
    Su3III,
    /// su(3): `A_1 = 0`, `A_2 = a2 (t1 + sqrt2 t4)`, `A_3 = a3 (t2 - sqrt2 t5)`.
    #[serde(rename = "SU3_IV")]
    Su3IV,
}

impl Ansatz {
    pub const ALL: [Ansatz; 5] = [
        Ansatz::Su2Diag,
        Ansatz::Su3I,
        Ansatz::Su3II,
        Ansatz::Su3III,
        Ansatz::Su3IV,
    ];

    pub fn group(self) -> GroupId {
        match self {
            Ansatz::Su2Diag => GroupId::Su2,
            _ => GroupId::Su3,
        }
    }

    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            Ansatz::Su2Diag | Ansatz::Su3I => &["a1", "a2", "a3"],
            Ansatz::Su3II => &["a1", "a2", "a8"],
            Ansatz::Su3III => &["a4", "a5", "a8"],
            Ansatz::Su3IV => &["a2", "a3"],
        }
    }

    pub fn arity(self) -> usize {
        self.param_names().len()
    }

    pub fn label(self) -> &'static str {
        match self {
            Ansatz::Su2Diag => "SU2_DIAG",
            Ansatz::Su3I => "SU3_I",
            Ansatz::Su3II => "SU3_II",
            Ansatz::Su3III => "SU3_III",
            Ansatz::Su3IV => "SU3_IV",
        }
    }

    /// Builds the field at unit coupling and volume.
    pub fn field(self, params: &[f64]) -> Result<ConstantField> {
        if params.len() != self.arity() {
            return Err(Error::invalid(format!(
                "{} takes {} parameters ({}), got {}",
                self.label(),
                self.arity(),
                self.param_names().join(", "),
                params.len()
            )));
        }
        let group = self.group();
        let dim = group.dim();
        let mut a = [
            AlgebraElement::zeros(dim),
            AlgebraElement::zeros(dim),
            AlgebraElement::zeros(dim),
        ];
        match self {
            Ansatz::Su2Diag | Ansatz::Su3I => {
                for i in 0..3 {
                    a[i].coeffs[i] = params[i];
                }
            }
            Ansatz::Su3II => {
                a[0].coeffs[0] = params[0];
                a[1].coeffs[1] = params[1];
                a[2].coeffs[7] = params[2];
            }
            Ansatz::Su3III => {
                a[0].coeffs[3] = params[0];
                a[1].coeffs[4] = params[1];
                a[2].coeffs[7] = params[2];
            }
            Ansatz::Su3IV => {
                let s2 = std::f64::consts::SQRT_2;
                a[1].coeffs[0] = params[0];
                a[1].coeffs[3] = s2 * params[0];
                a[2].coeffs[1] = params[1];
                a[2].coeffs[4] = -s2 * params[1];
            }
        }
        ConstantField::new(group, a)
    }
}

impl fmt::Display for Ansatz {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Ansatz {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ansatz::ALL
            .into_iter()
            .find(|a| a.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown ansatz '{s}'")))
    }
}
