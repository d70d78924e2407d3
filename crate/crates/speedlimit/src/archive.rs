//! On-disk checkpoint archives.
//!
//! An archive is a directory holding three files:
//!
//! * `manifest.toml` with `dimension`, `checkpoints`, a free-text
//!   `time_unit`, and optionally `learning_rate` and `warm_start`;
//! * `metrics.csv` with header `time,loss`, or `epoch,loss` in which case
//!   time is `epoch * learning_rate`;
//! * `weights.bin`: the magic bytes `TSLW0001` followed by
//!   `checkpoints × dimension` little-endian `f64`, row-major.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use speedlimit_core::nalgebra::DVector;
use speedlimit_core::Trajectory;

use crate::error::{HarnessError, Result};

pub const MAGIC: &[u8; 8] = b"TSLW0001";
pub const MANIFEST: &str = "manifest.toml";
pub const METRICS: &str = "metrics.csv";
pub const WEIGHTS: &str = "weights.bin";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub dimension: usize,
    pub checkpoints: usize,
    #[serde(default = "default_time_unit")]
    pub time_unit: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warm_start: Option<usize>,
}

fn default_time_unit() -> String {
    "continuum training time".to_string()
}

impl Manifest {
    pub fn for_trajectory(traj: &Trajectory) -> Self {
        Self {
            dimension: traj.dim(),
            checkpoints: traj.len(),
            time_unit: default_time_unit(),
            learning_rate: None,
            warm_start: None,
        }
    }
}

/// Writes `traj` as an archive in `dir`, creating the directory if needed.
/// Times are written in the shortest decimal form that parses back to the
/// same bits, so finite data round-trips exactly.
pub fn serialize_trajectory(traj: &Trajectory, manifest: &Manifest, dir: &Path) -> Result<()> {
    if manifest.dimension != traj.dim() || manifest.checkpoints != traj.len() {
        return Err(HarnessError::archive(
            dir.join(MANIFEST),
            format!(
                "manifest says {}x{}, trajectory is {}x{}",
                manifest.checkpoints,
                manifest.dimension,
                traj.len(),
                traj.dim()
            ),
        ));
    }
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;

    let text = toml::to_string(manifest).expect("manifest serializes");
    let path = dir.join(MANIFEST);
    fs::write(&path, text).map_err(|e| HarnessError::io(&path, e))?;

    let mut metrics = String::from("time,loss\n");
    for (t, l) in traj.times().iter().zip(traj.losses()) {
        metrics.push_str(&format!("{t},{l}\n"));
    }
    let path = dir.join(METRICS);
    fs::write(&path, metrics).map_err(|e| HarnessError::io(&path, e))?;

    let mut bytes = Vec::with_capacity(MAGIC.len() + 8 * traj.len() * traj.dim());
    bytes.extend_from_slice(MAGIC);
    for w in traj.weights() {
        for v in w.iter() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    let path = dir.join(WEIGHTS);
    fs::write(&path, bytes).map_err(|e| HarnessError::io(&path, e))
}

/// Reads an archive. The returned trajectory has no gradient norms.
pub fn ingest_trajectory(dir: &Path) -> Result<(Trajectory, Manifest)> {
    let manifest = read_manifest(&dir.join(MANIFEST))?;
    let (times, losses) = read_metrics(&dir.join(METRICS), &manifest)?;
    let weights = read_weights(&dir.join(WEIGHTS), &manifest)?;
    if let Some(w) = manifest.warm_start {
        if w >= manifest.checkpoints {
            return Err(HarnessError::archive(
                dir.join(MANIFEST),
                format!(
                    "warm_start {w} out of range for {} checkpoints",
                    manifest.checkpoints
                ),
            ));
        }
    }
    let traj = Trajectory::new(times, weights, losses, None)
        .map_err(|e| HarnessError::archive(dir, format!("inconsistent archive: {e}")))?;
    Ok((traj, manifest))
}

fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let manifest: Manifest = toml::from_str(&text).map_err(|e| {
        let at = e
            .span()
            .map(|s| format!(" at byte offset {}", s.start))
            .unwrap_or_default();
        HarnessError::archive(path, format!("malformed manifest{at}: {}", e.message()))
    })?;
    if manifest.dimension == 0 || manifest.checkpoints == 0 {
        return Err(HarnessError::archive(
            path,
            "dimension and checkpoints must be >= 1",
        ));
    }
    if let Some(lr) = manifest.learning_rate {
        if !(lr.is_finite() && lr > 0.0) {
            return Err(HarnessError::archive(
                path,
                "learning_rate must be finite and > 0",
            ));
        }
    }
    Ok(manifest)
}

fn read_metrics(path: &Path, manifest: &Manifest) -> Result<(Vec<f64>, Vec<f64>)> {
    let bytes = fs::read(path).map_err(|e| HarnessError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(bytes.as_slice());
    let header = reader
        .headers()
        .map_err(|e| HarnessError::archive(path, format!("unreadable header: {e}")))?
        .clone();
    let names: Vec<&str> = header.iter().collect();
    let scale = match names.as_slice() {
        ["time", "loss"] => 1.0,
        ["epoch", "loss"] => manifest.learning_rate.ok_or_else(|| {
            HarnessError::archive(path, "epoch column needs learning_rate in the manifest")
        })?,
        _ => {
            return Err(HarnessError::archive(
                path,
                format!(
                    "header must be `time,loss` or `epoch,loss`, found `{}`",
                    names.join(",")
                ),
            ))
        }
    };

    let mut times = Vec::with_capacity(manifest.checkpoints);
    let mut losses = Vec::with_capacity(manifest.checkpoints);
    for record in reader.records() {
        let record = record.map_err(|e| {
            let at = e
                .position()
                .map(|p| format!(" at byte offset {}", p.byte()))
                .unwrap_or_default();
            HarnessError::archive(path, format!("malformed row{at}: {e}"))
        })?;
        let offset = record.position().map(|p| p.byte()).unwrap_or(0);
        let field = |i: usize| -> Result<f64> {
            let raw = record.get(i).unwrap_or("");
            raw.parse::<f64>().map_err(|_| {
                HarnessError::archive(
                    path,
                    format!("not a number `{raw}` at byte offset {offset}"),
                )
            })
        };
        times.push(field(0)? * scale);
        losses.push(field(1)?);
    }
    if times.len() != manifest.checkpoints {
        return Err(HarnessError::archive(
            path,
            format!(
                "expected {} rows, found {}",
                manifest.checkpoints,
                times.len()
            ),
        ));
    }
    Ok((times, losses))
}

fn read_weights(path: &Path, manifest: &Manifest) -> Result<Vec<DVector<f64>>> {
    let bytes = fs::read(path).map_err(|e| HarnessError::io(path, e))?;
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(HarnessError::archive(
            path,
            "bad magic at byte offset 0: expected `TSLW0001`",
        ));
    }
    let (m, d) = (manifest.checkpoints, manifest.dimension);
    let expected = MAGIC.len() + 8 * m * d;
    if bytes.len() != expected {
        let kind = if bytes.len() < expected {
            "truncated"
        } else {
            "oversized"
        };
        return Err(HarnessError::archive(
            path,
            format!(
                "{kind} weights block: expected {expected} bytes ({m} x {d} f64 after the magic), found {}",
                bytes.len()
            ),
        ));
    }
    let body = &bytes[MAGIC.len()..];
    Ok((0..m)
        .map(|i| {
            DVector::from_fn(d, |j, _| {
                let at = 8 * (i * d + j);
                f64::from_le_bytes(body[at..at + 8].try_into().expect("8-byte chunk"))
            })
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> Trajectory {
        Trajectory::new(
            vec![0.0, 1.0, 2.0],
            vec![
                DVector::from_vec(vec![0.0, 0.0]),
                DVector::from_vec(vec![1.0, 0.0]),
                DVector::from_vec(vec![1.0, 1.0]),
            ],
            vec![2.0, 1.0, 0.5],
            None,
        )
        .unwrap()
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let traj = fixture();
        serialize_trajectory(&traj, &Manifest::for_trajectory(&traj), dir.path()).unwrap();
        let (back, manifest) = ingest_trajectory(dir.path()).unwrap();
        assert_eq!(back, traj);
        assert_eq!(manifest.checkpoints, 3);
    }

    #[test]
    fn epoch_column_scales_by_learning_rate() {
        let dir = tempfile::tempdir().unwrap();
        let traj = fixture();
        let mut manifest = Manifest::for_trajectory(&traj);
        manifest.learning_rate = Some(0.5);
        serialize_trajectory(&traj, &manifest, dir.path()).unwrap();
        fs::write(dir.path().join(METRICS), "epoch,loss\n0,2\n1,1\n2,0.5\n").unwrap();
        let (back, _) = ingest_trajectory(dir.path()).unwrap();
        assert_eq!(back.times(), &[0.0, 0.5, 1.0]);

        manifest.learning_rate = None;
        fs::write(
            dir.path().join(MANIFEST),
            toml::to_string(&manifest).unwrap(),
        )
        .unwrap();
        assert!(ingest_trajectory(dir.path()).is_err());
    }

    #[test]
    fn truncated_weights_report_byte_counts() {
        let dir = tempfile::tempdir().unwrap();
        let traj = fixture();
        serialize_trajectory(&traj, &Manifest::for_trajectory(&traj), dir.path()).unwrap();
        let path = dir.path().join(WEIGHTS);
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
        let msg = ingest_trajectory(dir.path()).unwrap_err().to_string();
        assert!(
            msg.contains("expected 56 bytes") && msg.contains("found 51"),
            "{msg}"
        );
    }

    #[test]
    fn bad_magic_and_bad_rows() {
        let dir = tempfile::tempdir().unwrap();
        let traj = fixture();
        serialize_trajectory(&traj, &Manifest::for_trajectory(&traj), dir.path()).unwrap();

        fs::write(dir.path().join(METRICS), "time,loss\n0,2\n1,x\n2,0.5\n").unwrap();
        let msg = ingest_trajectory(dir.path()).unwrap_err().to_string();
        assert!(msg.contains("byte offset 14"), "{msg}");

        fs::write(dir.path().join(METRICS), "time,loss\n0,2\n1,1\n2,0.5\n").unwrap();
        let path = dir.path().join(WEIGHTS);
        let mut bytes = fs::read(&path).unwrap();
        bytes[4] = b'X';
        fs::write(&path, bytes).unwrap();
        let err = ingest_trajectory(dir.path()).unwrap_err();
        assert!(err.to_string().contains("magic"));
        assert_eq!(err.exit_code(), 4);
    }

    #[test]
    fn manifest_errors_carry_offsets() {
        let dir = tempfile::tempdir().unwrap();
        let traj = fixture();
        serialize_trajectory(&traj, &Manifest::for_trajectory(&traj), dir.path()).unwrap();
        fs::write(
            dir.path().join(MANIFEST),
            "dimension = 2\ncheckpoints = \"three\"\n",
        )
        .unwrap();
        let msg = ingest_trajectory(dir.path()).unwrap_err().to_string();
        assert!(msg.contains("byte offset"), "{msg}");
    }
}
