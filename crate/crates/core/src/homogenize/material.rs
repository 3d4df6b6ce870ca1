use crate::error::{invalid, Result};

/// Base material plus the SIMP interpolation `E(ρ) = E_min + ρ^p (E_0 − E_min)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialModel {
    /// Solid Young's modulus (GPa).
    pub e0: f64,
    /// Void Young's modulus (GPa), keeps the stiffness matrix non-singular.
    pub e_min: f64,
    pub nu: f64,
    pub penalty: f64,
}

impl Default for MaterialModel {
    fn default() -> Self {
        Self {
            e0: 1.0,
            e_min: 1e-9,
            nu: 0.3,
            penalty: 5.0,
        }
    }
}

impl MaterialModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.e_min > 0.0 && self.e_min < self.e0) || !self.e0.is_finite() {
            return Err(invalid(format!(
                "need 0 < E_min < E_0, got E_min={} E_0={}",
                self.e_min, self.e0
            )));
        }
        if !(0.0..0.5).contains(&self.nu) {
            return Err(invalid(format!("Poisson ratio must lie in [0, 0.5), got {}", self.nu)));
        }
        if !(self.penalty >= 1.0) {
            return Err(invalid(format!("penalty must be >= 1, got {}", self.penalty)));
        }
        Ok(())
    }

    pub fn modulus(&self, rho: f64) -> f64 {
        self.e_min + rho.powf(self.penalty) * (self.e0 - self.e_min)
    }

    /// `dE/dρ = p ρ^{p−1} (E_0 − E_min)`.
    pub fn modulus_derivative(&self, rho: f64) -> f64 {
        self.penalty * rho.powf(self.penalty - 1.0) * (self.e0 - self.e_min)
    }
}
