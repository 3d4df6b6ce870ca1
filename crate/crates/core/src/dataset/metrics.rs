use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::DensityGrid;

pub const DICE_THRESHOLD: f64 = 0.5;

fn check_pairs(pred: &[DensityGrid], truth: &[DensityGrid]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} predictions for {} ground truths",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::ShapeMismatch("no grids to compare".into()));
    }
    for (i, (p, t)) in pred.iter().zip(truth).enumerate() {
        if !p.same_shape(t) {
            return Err(Error::ShapeMismatch(format!(
                "record {i}: {:?} vs {:?}",
                p.resolution(),
                t.resolution()
            )));
        }
    }
    Ok(())
}

/// Mean squared voxel error, averaged over voxels and then over records.
pub fn mse(pred: &[DensityGrid], truth: &[DensityGrid]) -> Result<f64> {
    check_pairs(pred, truth)?;
    let total: f64 = pred
        .iter()
        .zip(truth)
        .map(|(p, t)| {
            let sq: f64 = p.densities().iter().zip(t.densities()).map(|(a, b)| (a - b) * (a - b)).sum();
            sq / p.len() as f64
        })
        .sum();
    Ok(total / pred.len() as f64)
}

fn dice_one(p: &DensityGrid, t: &DensityGrid, threshold: f64) -> f64 {
    let (mut both, mut np, mut nt) = (0usize, 0usize, 0usize);
    for (&a, &b) in p.densities().iter().zip(t.densities()) {
        let (sa, sb) = (a >= threshold, b >= threshold);
        np += sa as usize;
        nt += sb as usize;
        both += (sa && sb) as usize;
    }
    if np + nt == 0 {
        1.0
    } else {
        2.0 * both as f64 / (np + nt) as f64
    }
}

/// Mean Dice coefficient of the solid sets (density ≥ `threshold`).
pub fn dice(pred: &[DensityGrid], truth: &[DensityGrid], threshold: f64) -> Result<f64> {
    check_pairs(pred, truth)?;
    let total: f64 = pred.iter().zip(truth).map(|(p, t)| dice_one(p, t, threshold)).sum();
    Ok(total / pred.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeDeviation {
    /// Mean absolute volume error, percentage points.
    pub mean_percent: f64,
    pub max_percent: f64,
    /// Record with the largest error (first one on ties).
    pub argmax: usize,
}

pub fn volume_deviation(pred: &[DensityGrid], truth: &[DensityGrid]) -> Result<VolumeDeviation> {
    check_pairs(pred, truth)?;
    let devs: Vec<f64> = pred
        .iter()
        .zip(truth)
        .map(|(p, t)| (p.relative_density() - t.relative_density()).abs() * 100.0)
        .collect();
    let mut argmax = 0;
    for (i, &d) in devs.iter().enumerate() {
        if d > devs[argmax] {
            argmax = i;
        }
    }
    Ok(VolumeDeviation {
        mean_percent: devs.iter().sum::<f64>() / devs.len() as f64,
        max_percent: devs[argmax],
        argmax,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub count: usize,
    pub mse: f64,
    pub dsc: f64,
    pub volume_deviation_mean: f64,
    pub volume_deviation_max: f64,
    /// Name (or index) of the record with the largest volume error.
    pub volume_deviation_argmax: String,
}

/// All metrics over paired records; `names` label the records in the report.
pub fn evaluate(pred: &[DensityGrid], truth: &[DensityGrid], names: &[String]) -> Result<EvalReport> {
    let vd = volume_deviation(pred, truth)?;
    Ok(EvalReport {
        count: pred.len(),
        mse: mse(pred, truth)?,
        dsc: dice(pred, truth, DICE_THRESHOLD)?,
        volume_deviation_mean: vd.mean_percent,
        volume_deviation_max: vd.max_percent,
        volume_deviation_argmax: names.get(vd.argmax).cloned().unwrap_or_else(|| vd.argmax.to_string()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, f: impl Fn(usize) -> f64) -> DensityGrid {
        DensityGrid::new([n; 3], (0..n * n * n).map(f).collect(), [1.0; 3]).unwrap()
    }

    #[test]
    fn ones_vs_zeros() {
        let a = [DensityGrid::cube(4, 1.0).unwrap()];
        let b = [DensityGrid::cube(4, 0.0).unwrap()];
        assert_eq!(mse(&a, &b).unwrap(), 1.0);
        assert_eq!(dice(&a, &b, 0.5).unwrap(), 0.0);
        assert_eq!(dice(&b, &b, 0.5).unwrap(), 1.0);
    }

    #[test]
    fn volume_deviation_mean_and_max() {
        let t = [DensityGrid::cube(2, 0.5).unwrap(), DensityGrid::cube(2, 0.5).unwrap()];
        let p = [DensityGrid::cube(2, 0.5).unwrap(), DensityGrid::cube(2, 0.52).unwrap()];
        let vd = volume_deviation(&p, &t).unwrap();
        assert!((vd.mean_percent - 1.0).abs() < 1e-12);
        assert!((vd.max_percent - 2.0).abs() < 1e-12);
        assert_eq!(vd.argmax, 1);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let a = [DensityGrid::cube(2, 1.0).unwrap()];
        let b = [DensityGrid::cube(3, 1.0).unwrap()];
        assert!(matches!(mse(&a, &b), Err(Error::ShapeMismatch(_))));
        assert!(matches!(dice(&a, &[], 0.5), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn report_names_worst_record() {
        let t = vec![grid(2, |_| 0.0), grid(2, |i| (i < 4) as u8 as f64)];
        let p = vec![grid(2, |_| 0.0), grid(2, |_| 0.0)];
        let r = evaluate(&p, &t, &["a".into(), "b".into()]).unwrap();
        assert_eq!(r.volume_deviation_argmax, "b");
        assert_eq!(r.count, 2);
    }
}
