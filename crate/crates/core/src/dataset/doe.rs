use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::homogenize::Objective;

/// Evenly spaced values `start, start + step, …` up to `stop`.
///
/// `stop` itself is included when `(stop − start) / step` is an integer to
/// within 1e-9.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl ParamRange {
    pub fn new(start: f64, stop: f64, step: f64) -> Result<Self> {
        if ![start, stop, step].iter().all(|v| v.is_finite()) {
            return Err(invalid("range bounds must be finite"));
        }
        if stop < start {
            return Err(invalid(format!("range end {stop} is below its start {start}")));
        }
        if !(step > 0.0) && stop > start {
            return Err(invalid(format!("range step must be positive, got {step}")));
        }
        Ok(Self { start, stop, step })
    }

    pub fn single(value: f64) -> Self {
        Self {
            start: value,
            stop: value,
            step: 1.0,
        }
    }

    pub fn len(&self) -> usize {
        if self.stop == self.start {
            return 1;
        }
        let spans = (self.stop - self.start) / self.step;
        (spans + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Values rounded to 12 decimals so that `0.25 + 7 · 0.01` prints as `0.32`.
    pub fn values(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| ((self.start + i as f64 * self.step) * 1e12).round() / 1e12)
            .collect()
    }
}

impl FromStr for ParamRange {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |p: &str| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| invalid(format!("bad number '{p}' in range '{s}'")))
        };
        match parts.as_slice() {
            [v] => Ok(Self::single(num(v)?)),
            [a, b, step] => Self::new(num(a)?, num(b)?, num(step)?),
            _ => Err(invalid(format!("expected a:b:step, got '{s}'"))),
        }
    }
}

impl fmt::Display for ParamRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.start, self.stop, self.step)
    }
}

/// Full-factorial design over (objective, V_f, r_min).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoeSpec {
    pub vf: ParamRange,
    pub rmin: ParamRange,
    pub objectives: Vec<Objective>,
}

impl Default for DoeSpec {
    fn default() -> Self {
        Self {
            vf: ParamRange {
                start: 0.25,
                stop: 0.45,
                step: 0.01,
            },
            rmin: ParamRange {
                start: 1.20,
                stop: 2.50,
                step: 0.01,
            },
            objectives: vec![Objective::Bulk, Objective::Shear],
        }
    }
}

/// One design point. `index` is 1-based within its objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoePoint {
    pub objective: Objective,
    pub index: usize,
    pub vf: f64,
    pub rmin: f64,
}

impl DoePoint {
    /// File stem used for this point's record, e.g. `bulk_0001`.
    pub fn record_id(&self) -> String {
        format!("{}_{:04}", self.objective.name(), self.index)
    }
}

/// Row-major enumeration: objective, then V_f (outer), then r_min (inner).
pub fn enumerate_doe(spec: &DoeSpec) -> Vec<DoePoint> {
    let vfs = spec.vf.values();
    let rmins = spec.rmin.values();
    let mut out = Vec::with_capacity(spec.objectives.len() * vfs.len() * rmins.len());
    for &objective in &spec.objectives {
        let mut index = 0;
        for &vf in &vfs {
            for &rmin in &rmins {
                index += 1;
                out.push(DoePoint {
                    objective,
                    index,
                    vf,
                    rmin,
                });
            }
        }
    }
    out
}
