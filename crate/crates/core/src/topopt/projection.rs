/// Heaviside projection `ρ^H = 1 − e^{−βρ} + ρ e^{−β}`.
pub fn project(rho: f64, beta: f64) -> f64 {
    1.0 - (-beta * rho).exp() + rho * (-beta).exp()
}

/// `dρ^H/dρ = β e^{−βρ} + e^{−β}`.
pub fn project_derivative(rho: f64, beta: f64) -> f64 {
    beta * (-beta * rho).exp() + (-beta).exp()
}

pub fn heaviside_project(rho: &[f64], beta: f64) -> Vec<f64> {
    // clamp guards the last ulp so physical densities stay inside [0, 1]
    rho.iter().map(|&r| project(r, beta).clamp(0.0, 1.0)).collect()
}

pub fn heaviside_derivative(rho: &[f64], beta: f64) -> Vec<f64> {
    rho.iter().map(|&r| project_derivative(r, beta)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_beta_is_identity() {
        for r in [0.0, 0.13, 0.5, 0.999, 1.0] {
            assert!((project(r, 0.0) - r).abs() <= 1e-12);
            assert_eq!(project_derivative(r, 0.0), 1.0);
        }
    }

    #[test]
    fn end_points_fixed() {
        let mut beta = 1.0;
        while beta <= 512.0 {
            assert!((project(1.0, beta) - 1.0).abs() <= 1e-12);
            assert!(project(0.0, beta).abs() <= 1e-12);
            beta *= 2.0;
        }
        assert!((project(0.5, 512.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn derivative_at_origin() {
        assert!((project_derivative(0.0, 8.0) - (8.0 + (-8f64).exp())).abs() < 1e-15);
        assert!((project_derivative(0.0, 8.0) - 8.000335).abs() < 1e-6);
    }

    #[test]
    fn derivative_matches_central_difference() {
        for &beta in &[1.0, 8.0, 64.0] {
            for &r in &[0.1, 0.5, 0.9] {
                let h = 1e-6;
                let fd = (project(r + h, beta) - project(r - h, beta)) / (2.0 * h);
                assert!((fd - project_derivative(r, beta)).abs() <= 1e-6, "beta {beta} rho {r}");
            }
        }
    }
}
