use serde::{Deserialize, Serialize};

use super::element::Matrix6;

pub const VOIGT_ORDER: &str = "11,22,33,12,23,31";

/// Homogenized stiffness in Voigt order (11, 22, 33, 12, 23, 31), GPa.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElasticityTensor6(pub Matrix6);

impl ElasticityTensor6 {
    pub fn zeros() -> Self {
        Self(Matrix6::zeros())
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.0[(a, b)]
    }

    pub fn matrix(&self) -> &Matrix6 {
        &self.0
    }

    pub fn max_abs(&self) -> f64 {
        self.0.amax()
    }

    /// `max|E − Eᵀ|`.
    pub fn asymmetry(&self) -> f64 {
        (self.0 - self.0.transpose()).amax()
    }

    pub fn entries(&self) -> [[f64; 6]; 6] {
        let mut out = [[0.0; 6]; 6];
        for (a, row) in out.iter_mut().enumerate() {
            for (b, v) in row.iter_mut().enumerate() {
                *v = self.0[(a, b)];
            }
        }
        out
    }

    pub fn bulk_objective(&self) -> f64 {
        Objective::Bulk.evaluate(self)
    }

    pub fn shear_objective(&self) -> f64 {
        Objective::Shear.evaluate(self)
    }

    pub fn to_json(&self) -> TensorJson {
        TensorJson {
            voigt_order: VOIGT_ORDER.to_string(),
            entries: self.entries(),
            units: "GPa".to_string(),
        }
    }
}

/// Serialized tensor layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorJson {
    pub voigt_order: String,
    pub entries: [[f64; 6]; 6],
    pub units: String,
}

/// Effective property being maximized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Objective {
    /// Sum of the upper-left 3×3 (normal) block, i.e. 9× the bulk modulus.
    Bulk,
    /// `E_1212 + E_2323 + E_3131`.
    Shear,
}

impl Objective {
    /// Dataset identifier: 1 for bulk, 2 for shear.
    pub fn id(self) -> u8 {
        match self {
            Objective::Bulk => 1,
            Objective::Shear => 2,
        }
    }

    pub fn from_id(id: u8) -> Option<Self> {
        match id {
            1 => Some(Objective::Bulk),
            2 => Some(Objective::Shear),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Objective::Bulk => "bulk",
            Objective::Shear => "shear",
        }
    }

    /// The objective is `Σ_ab w_ab E_ab` with these weights.
    pub fn weights(self) -> Matrix6 {
        let mut w = Matrix6::zeros();
        match self {
            Objective::Bulk => {
                for a in 0..3 {
                    for b in 0..3 {
                        w[(a, b)] = 1.0;
                    }
                }
            }
            Objective::Shear => {
                for a in 3..6 {
                    w[(a, a)] = 1.0;
                }
            }
        }
        w
    }

    pub fn evaluate(self, t: &ElasticityTensor6) -> f64 {
        t.0.component_mul(&self.weights()).sum()
    }
}

impl std::str::FromStr for Objective {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bulk" | "1" => Ok(Objective::Bulk),
            "shear" | "2" => Ok(Objective::Shear),
            other => Err(format!("unknown objective '{other}' (expected bulk or shear)")),
        }
    }
}
