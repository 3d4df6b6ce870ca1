use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::doe::DoePoint;
use crate::error::{invalid, Error, Result};
use crate::grid::DensityGrid;
use crate::topopt::{optimize, ResultSidecar, TopOptConfig};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const RECORDS_DIR: &str = "records";
/// Wall-clock times live outside the records so those stay reproducible.
pub const TIMINGS_FILE: &str = "timings.csv";
pub const DEFAULT_SPLIT: [f64; 3] = [0.9, 0.05, 0.05];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordStatus {
    Converged,
    /// Hit the iteration cap; kept for auditing, never used for training.
    Discarded,
    /// The run raised an error.
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

/// One optimized design point.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord {
    pub point: DoePoint,
    pub status: RecordStatus,
    /// Present for converged records only.
    pub grid: Option<DensityGrid>,
    pub sidecar: Option<ResultSidecar>,
    pub error: Option<String>,
    pub run_seconds: f64,
}

impl DatasetRecord {
    pub fn converged(&self) -> bool {
        self.status == RecordStatus::Converged
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub objective_id: u8,
    pub index: usize,
    pub vf: f64,
    pub rmin: f64,
    pub status: RecordStatus,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub objective_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub achieved_volume: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub grid_file: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sidecar_file: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub split: Option<Split>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveCounts {
    pub total: usize,
    pub converged: usize,
    pub discarded: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub schema_version: u32,
    pub resolution: [usize; 3],
    pub cell_lengths: [f64; 3],
    /// Keyed by objective name.
    pub counts: BTreeMap<String, ObjectiveCounts>,
    pub total: usize,
    pub converged: usize,
    /// Non-converged plus failed runs.
    pub discarded: usize,
    pub split_seed: u64,
    pub split_fractions: [f64; 3],
    pub records: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        let manifest: Self = serde_json::from_str(&text)?;
        if manifest.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(Error::Format {
                path: path.to_path_buf(),
                reason: format!("unsupported manifest schema version {}", manifest.schema_version),
            });
        }
        Ok(manifest)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOptions {
    pub out_dir: PathBuf,
    /// Number of concurrent optimization runs.
    pub jobs: usize,
    pub seed: u64,
    /// Reuse valid records already present in `out_dir`.
    pub resume: bool,
    pub split_fractions: [f64; 3],
}

impl SweepOptions {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        Self {
            out_dir: out_dir.into(),
            jobs: 1,
            seed: 0,
            resume: false,
            split_fractions: DEFAULT_SPLIT,
        }
    }
}

/// Writes `bytes` to `path` through a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn config_for(point: &DoePoint, base: &TopOptConfig) -> TopOptConfig {
    TopOptConfig {
        objective: point.objective,
        vf: point.vf,
        rmin: point.rmin,
        ..base.clone()
    }
}

fn sidecar_path(dir: &Path, point: &DoePoint) -> PathBuf {
    dir.join(format!("{}.json", point.record_id()))
}

fn grid_path(dir: &Path, point: &DoePoint) -> PathBuf {
    dir.join(format!("{}.dgrid", point.record_id()))
}

/// A finished record from an earlier (interrupted) sweep, if it is complete
/// and belongs to this design point.
fn load_existing(dir: &Path, point: &DoePoint) -> Option<DatasetRecord> {
    let text = fs::read_to_string(sidecar_path(dir, point)).ok()?;
    let sidecar: ResultSidecar = serde_json::from_str(&text).ok()?;
    if sidecar.objective_id != point.objective.id() || sidecar.vf != point.vf || sidecar.rmin != point.rmin {
        return None;
    }
    let grid = if sidecar.converged {
        Some(DensityGrid::load(grid_path(dir, point)).ok()?)
    } else {
        None
    };
    Some(DatasetRecord {
        point: *point,
        status: if sidecar.converged {
            RecordStatus::Converged
        } else {
            RecordStatus::Discarded
        },
        grid,
        sidecar: Some(sidecar),
        error: None,
        run_seconds: 0.0,
    })
}

fn run_point(point: &DoePoint, base: &TopOptConfig, initial: &DensityGrid, dir: &Path, resume: bool) -> DatasetRecord {
    if resume {
        if let Some(rec) = load_existing(dir, point) {
            log::debug!("{}: reusing existing record", point.record_id());
            return rec;
        }
    }
    let started = Instant::now();
    let outcome = optimize(&config_for(point, base), initial).and_then(|result| {
        let sidecar = result.sidecar();
        let grid = result.final_grid.quantized();
        if result.converged {
            write_atomic(&grid_path(dir, point), &grid.to_dgrid_bytes())?;
        }
        write_atomic(&sidecar_path(dir, point), (serde_json::to_string_pretty(&sidecar)? + "\n").as_bytes())?;
        Ok((sidecar, grid))
    });
    let run_seconds = started.elapsed().as_secs_f64();
    match outcome {
        Ok((sidecar, grid)) => {
            let converged = sidecar.converged;
            log::info!(
                "{}: objective={:.6} volume={:.4} converged={} iters={}",
                point.record_id(),
                sidecar.objective_value,
                sidecar.achieved_volume,
                converged,
                sidecar.iterations
            );
            DatasetRecord {
                point: *point,
                status: if converged {
                    RecordStatus::Converged
                } else {
                    RecordStatus::Discarded
                },
                grid: converged.then_some(grid),
                sidecar: Some(sidecar),
                error: None,
                run_seconds,
            }
        }
        Err(e) => {
            log::warn!("{}: run failed: {e}", point.record_id());
            DatasetRecord {
                point: *point,
                status: RecordStatus::Failed,
                grid: None,
                sidecar: None,
                error: Some(e.to_string()),
                run_seconds,
            }
        }
    }
}

/// Runs every design point, writes one record per point under
/// `out_dir/records`, then a split-labelled manifest. Output is independent of
/// `jobs`; records come back in `points` order.
pub fn run_dataset(
    points: &[DoePoint],
    base: &TopOptConfig,
    initial: &DensityGrid,
    options: &SweepOptions,
) -> Result<(Vec<DatasetRecord>, DatasetManifest)> {
    if initial.resolution() != base.resolution {
        return Err(Error::ShapeMismatch(format!(
            "initial grid is {:?}, sweep expects {:?}",
            initial.resolution(),
            base.resolution
        )));
    }
    check_fractions(&options.split_fractions)?;
    let records_dir = options.out_dir.join(RECORDS_DIR);
    fs::create_dir_all(&records_dir)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.jobs.max(1))
        .build()
        .map_err(|e| invalid(format!("cannot start {} workers: {e}", options.jobs)))?;
    let records: Vec<DatasetRecord> = pool.install(|| {
        points
            .par_iter()
            .map(|p| run_point(p, base, initial, &records_dir, options.resume))
            .collect()
    });

    let manifest = build_manifest(&records, initial)?;
    let manifest = split_dataset(&manifest, options.split_fractions, options.seed)?;
    write_atomic(&options.out_dir.join(MANIFEST_FILE), manifest.to_json()?.as_bytes())?;

    let mut timings = String::from("id,status,run_seconds\n");
    for r in &records {
        timings.push_str(&format!("{},{:?},{:.3}\n", r.point.record_id(), r.status, r.run_seconds));
    }
    write_atomic(&options.out_dir.join(TIMINGS_FILE), timings.as_bytes())?;
    Ok((records, manifest))
}

fn build_manifest(records: &[DatasetRecord], initial: &DensityGrid) -> Result<DatasetManifest> {
    let mut counts: BTreeMap<String, ObjectiveCounts> = BTreeMap::new();
    let mut entries = Vec::with_capacity(records.len());
    for r in records {
        let c = counts.entry(r.point.objective.name().to_string()).or_insert(ObjectiveCounts {
            total: 0,
            converged: 0,
            discarded: 0,
            failed: 0,
        });
        c.total += 1;
        match r.status {
            RecordStatus::Converged => c.converged += 1,
            RecordStatus::Discarded => c.discarded += 1,
            RecordStatus::Failed => {
                c.discarded += 1;
                c.failed += 1;
            }
        }
        let id = r.point.record_id();
        entries.push(ManifestEntry {
            objective_id: r.point.objective.id(),
            index: r.point.index,
            vf: r.point.vf,
            rmin: r.point.rmin,
            status: r.status,
            objective_value: r.sidecar.as_ref().map(|s| s.objective_value),
            achieved_volume: r.sidecar.as_ref().map(|s| s.achieved_volume),
            iterations: r.sidecar.as_ref().map(|s| s.iterations),
            grid_file: r.converged().then(|| format!("{RECORDS_DIR}/{id}.dgrid")),
            sidecar_file: r.sidecar.as_ref().map(|_| format!("{RECORDS_DIR}/{id}.json")),
            error: r.error.clone(),
            split: None,
            id,
        });
    }
    let converged = entries.iter().filter(|e| e.status == RecordStatus::Converged).count();
    Ok(DatasetManifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        resolution: initial.resolution(),
        cell_lengths: initial.cell_lengths(),
        counts,
        total: entries.len(),
        converged,
        discarded: entries.len() - converged,
        split_seed: 0,
        split_fractions: DEFAULT_SPLIT,
        records: entries,
    })
}

fn check_fractions(fractions: &[f64; 3]) -> Result<()> {
    if fractions.iter().any(|f| !(*f >= 0.0)) || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(invalid(format!("split fractions must be non-negative and sum to 1, got {fractions:?}")));
    }
    Ok(())
}

/// Shuffles the converged records (both objectives together) with `seed` and
/// labels them train/val/test by `fractions`. Other records get no label.
pub fn split_dataset(manifest: &DatasetManifest, fractions: [f64; 3], seed: u64) -> Result<DatasetManifest> {
    check_fractions(&fractions)?;
    let mut out = manifest.clone();
    let mut usable: Vec<usize> = out
        .records
        .iter()
        .enumerate()
        .filter(|(_, e)| e.status == RecordStatus::Converged)
        .map(|(i, _)| i)
        .collect();
    usable.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n = usable.len();
    let n_train = ((fractions[0] * n as f64).round() as usize).min(n);
    let n_val = ((fractions[1] * n as f64).round() as usize).min(n - n_train);
    for e in &mut out.records {
        e.split = None;
    }
    for (rank, &i) in usable.iter().enumerate() {
        out.records[i].split = Some(if rank < n_train {
            Split::Train
        } else if rank < n_train + n_val {
            Split::Val
        } else {
            Split::Test
        });
    }
    out.split_seed = seed;
    out.split_fractions = fractions;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fake_manifest(n: usize) -> DatasetManifest {
        let records = (0..n)
            .map(|i| ManifestEntry {
                id: format!("bulk_{:04}", i + 1),
                objective_id: 1,
                index: i + 1,
                vf: 0.3,
                rmin: 1.5,
                status: RecordStatus::Converged,
                objective_value: None,
                achieved_volume: None,
                iterations: None,
                grid_file: None,
                sidecar_file: None,
                error: None,
                split: None,
            })
            .collect();
        DatasetManifest {
            schema_version: MANIFEST_SCHEMA_VERSION,
            resolution: [4; 3],
            cell_lengths: [1.0; 3],
            counts: BTreeMap::new(),
            total: n,
            converged: n,
            discarded: 0,
            split_seed: 0,
            split_fractions: DEFAULT_SPLIT,
            records,
        }
    }

    fn labels(m: &DatasetManifest) -> Vec<Option<Split>> {
        m.records.iter().map(|e| e.split).collect()
    }

    #[test]
    fn split_counts_and_determinism() {
        let m = fake_manifest(100);
        let a = split_dataset(&m, [0.9, 0.05, 0.05], 7).unwrap();
        let count = |s| a.records.iter().filter(|e| e.split == Some(s)).count();
        assert_eq!((count(Split::Train), count(Split::Val), count(Split::Test)), (90, 5, 5));
        let b = split_dataset(&m, [0.9, 0.05, 0.05], 7).unwrap();
        assert_eq!(labels(&a), labels(&b));
        let c = split_dataset(&m, [0.9, 0.05, 0.05], 8).unwrap();
        assert_ne!(labels(&a), labels(&c));
    }

    #[test]
    fn split_rejects_bad_fractions() {
        let m = fake_manifest(10);
        assert!(split_dataset(&m, [0.9, 0.05, 0.06], 1).is_err());
        assert!(split_dataset(&m, [1.1, -0.05, -0.05], 1).is_err());
    }

    #[test]
    fn unusable_records_stay_unlabelled() {
        let mut m = fake_manifest(10);
        m.records[3].status = RecordStatus::Discarded;
        let s = split_dataset(&m, [0.5, 0.25, 0.25], 3).unwrap();
        assert_eq!(s.records[3].split, None);
        assert_eq!(s.records.iter().filter(|e| e.split.is_some()).count(), 9);
    }

    #[test]
    fn atomic_write_leaves_no_temp_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.json");
        write_atomic(&p, b"{}").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"{}");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn manifest_schema_version_is_checked() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = fake_manifest(2);
        m.schema_version = 99;
        let p = dir.path().join(MANIFEST_FILE);
        fs::write(&p, m.to_json().unwrap()).unwrap();
        assert!(matches!(DatasetManifest::load(&p), Err(Error::Format { .. })));
    }
}
