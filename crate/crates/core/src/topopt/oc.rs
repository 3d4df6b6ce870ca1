use super::filter::FilterOperator;
use super::projection::project;
use crate::error::{Error, Result};

pub const LAMBDA_BOUNDS: (f64, f64) = (1e-9, 1e9);
pub const MAX_BISECTION_STEPS: usize = 200;
/// Accepted distance between the physical volume and its target.
pub const VOLUME_TOLERANCE: f64 = 1e-4;
/// Floor applied to objective sensitivities inside the update ratio.
pub const SENSITIVITY_FLOOR: f64 = 1e-10;

fn physical_volume(eta: &[f64], filter: &FilterOperator, beta: f64) -> f64 {
    let rho = filter.apply(eta);
    rho.iter().map(|&r| project(r, beta).clamp(0.0, 1.0)).sum::<f64>() / rho.len() as f64
}

fn candidate(eta: &[f64], df: &[f64], dv: &[f64], lambda: f64, move_limit: f64, out: &mut [f64]) {
    for i in 0..eta.len() {
        let ratio = df[i].max(SENSITIVITY_FLOOR) / (lambda * dv[i]);
        let lo = (eta[i] - move_limit).max(0.0);
        let hi = (eta[i] + move_limit).min(1.0);
        out[i] = (eta[i] * ratio.sqrt()).clamp(lo, hi);
    }
}

/// Optimality-criteria step for a maximization problem.
///
/// `η' = clamp(η √(max(dF, floor) / (λ dV)), η ± move, [0, 1])`, with the
/// multiplier `λ` bisected (in log space) until the projected physical volume
/// `mean(ρ^H(W̄η'))` equals `target`.
pub fn oc_update(
    eta: &[f64],
    df: &[f64],
    dv: &[f64],
    target: f64,
    move_limit: f64,
    filter: &FilterOperator,
    beta: f64,
) -> Result<Vec<f64>> {
    let n = eta.len();
    assert!(df.len() == n && dv.len() == n);
    let mut next = vec![0.0; n];
    let (mut lo, mut hi) = (LAMBDA_BOUNDS.0.ln(), LAMBDA_BOUNDS.1.ln());

    // volume decreases monotonically in λ
    candidate(eta, df, dv, lo.exp(), move_limit, &mut next);
    let v_max = physical_volume(&next, filter, beta);
    candidate(eta, df, dv, hi.exp(), move_limit, &mut next);
    let v_min = physical_volume(&next, filter, beta);
    if v_max < target - VOLUME_TOLERANCE || v_min > target + VOLUME_TOLERANCE {
        return Err(Error::BisectionFailed {
            target,
            min: v_min,
            max: v_max,
        });
    }

    let mut best = (f64::INFINITY, Vec::new());
    for _ in 0..MAX_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        candidate(eta, df, dv, mid.exp(), move_limit, &mut next);
        let v = physical_volume(&next, filter, beta);
        let gap = (v - target).abs();
        if gap < best.0 {
            best = (gap, next.clone());
        }
        if gap <= 1e-3 * VOLUME_TOLERANCE || hi - lo < 1e-14 {
            break;
        }
        if v > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if best.0 > VOLUME_TOLERANCE {
        return Err(Error::BisectionFailed {
            target,
            min: v_min,
            max: v_max,
        });
    }
    Ok(best.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topopt::filter::build_filter;

    #[test]
    fn uniform_design_at_target_is_fixed_point() {
        let f = build_filter([4, 4, 4], 1.5).unwrap();
        let eta = vec![0.4; 64];
        let target = physical_volume(&eta, &f, 2.0);
        let next = oc_update(&eta, &vec![3.0; 64], &vec![1.0; 64], target, 0.2, &f, 2.0).unwrap();
        for v in next {
            assert!((v - 0.4).abs() < 1e-6);
        }
    }

    #[test]
    fn unreachable_target_fails() {
        let f = build_filter([3, 3, 3], 1.0).unwrap();
        let eta = vec![0.5; 27];
        let err = oc_update(&eta, &vec![1.0; 27], &vec![1.0; 27], 0.05, 0.1, &f, 1.0).unwrap_err();
        assert!(matches!(err, Error::BisectionFailed { .. }));
    }
}
