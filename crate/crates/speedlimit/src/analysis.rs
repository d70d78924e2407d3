//! Speed-limit analysis of recorded checkpoints.
//!
//! The weights are treated as point masses, so `W2` is the squared distance
//! between checkpoints and the entropy is the loss drop. Path length is the
//! polygonal chord sum, a lower bound on the continuous arc length.

use speedlimit_core::thermo::{entropy_ntk, w2_dirac};
use speedlimit_core::{SpeedLimitReport, Trajectory};

use crate::error::{HarnessError, Result};
use crate::plot::{column, PlotTable};

/// Report for the segment from checkpoint `origin` to checkpoint `end`.
///
/// A loss increase leaves `t_sl` empty and sets `entropy_invalid`; an
/// inefficiency below one is kept and flagged `sub_unity`.
pub fn segment_report(traj: &Trajectory, origin: usize, end: usize) -> Result<SpeedLimitReport> {
    if origin > end || end >= traj.len() {
        return Err(HarnessError::Config(format!(
            "segment {origin}..={end} out of range for {} checkpoints",
            traj.len()
        )));
    }
    let w = traj.weights();
    let losses = traj.losses();
    let w2 = w2_dirac(&w[origin], &w[end])?;
    let path: f64 = (origin..end).map(|i| (&w[i + 1] - &w[i]).norm()).sum();
    let horizon = traj.times()[end] - traj.times()[origin];

    let entropy = match entropy_ntk(losses[origin], losses[end]) {
        Ok(e) => e.value,
        Err(_) => losses[origin] - losses[end],
    };
    let mut report = SpeedLimitReport::assemble(Some(horizon), w2, entropy, Some(path));
    if entropy < 0.0 {
        report.flags.entropy_invalid = true;
        report.t_sl = None;
        report.inefficiency = None;
        report.flags.sub_unity = false;
    }
    if report.flags.sub_unity {
        log::warn!(
            "inefficiency {:.4} below one on checkpoints {origin}..={end}; the path is not a gradient flow",
            report.inefficiency.unwrap_or(f64::NAN)
        );
    }
    Ok(report)
}

/// Cold-start report (origin at checkpoint 0) and, when requested, the
/// warm-start report from `warm_start`, both ending at the last checkpoint.
pub fn analyze_trajectory(
    traj: &Trajectory,
    warm_start: Option<usize>,
) -> Result<(SpeedLimitReport, Option<SpeedLimitReport>)> {
    if traj.len() < 2 {
        return Err(HarnessError::Config(
            "analysis needs at least 2 checkpoints".into(),
        ));
    }
    let last = traj.len() - 1;
    let cold = segment_report(traj, 0, last)?;
    let warm = match warm_start {
        None => None,
        Some(w) if w <= last => Some(segment_report(traj, w, last)?),
        Some(w) => {
            return Err(HarnessError::Config(format!(
                "warm_start {w} out of range for {} checkpoints",
                traj.len()
            )))
        }
    };
    Ok((cold, warm))
}

/// Reports from `origin` to every later checkpoint, keyed by checkpoint time.
pub fn report_series(traj: &Trajectory, origin: usize) -> Result<Vec<(f64, SpeedLimitReport)>> {
    ((origin + 1)..traj.len())
        .map(|end| Ok((traj.times()[end], segment_report(traj, origin, end)?)))
        .collect()
}

/// Coordinates `(w_i, w_j, w_k)` at each checkpoint. Exactly three indices
/// are required.
pub fn weight_triplet_trace(traj: &Trajectory, indices: &[usize]) -> Result<PlotTable> {
    let &[i, j, k] = indices else {
        return Err(HarnessError::Config(format!(
            "a weight triplet needs exactly 3 indices, got {}",
            indices.len()
        )));
    };
    if let Some(bad) = [i, j, k].into_iter().find(|&x| x >= traj.dim()) {
        return Err(HarnessError::Config(format!(
            "weight index {bad} out of range for dimension {}",
            traj.dim()
        )));
    }
    let mut table = PlotTable::new(
        format!("weight triplet ({i}, {j}, {k})"),
        vec![
            column("t", "time"),
            column("w_i", "weight"),
            column("w_j", "weight"),
            column("w_k", "weight"),
        ],
    );
    for (t, w) in traj.times().iter().zip(traj.weights()) {
        table.push(vec![*t, w[i], w[j], w[k]]);
    }
    Ok(table)
}

/// Parses `"i,j,k;i,j,k;..."`.
pub fn parse_triplets(spec: &str) -> Result<Vec<Vec<usize>>> {
    spec.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|group| {
            group
                .split(',')
                .map(|x| {
                    x.trim().parse::<usize>().map_err(|_| {
                        HarnessError::Config(format!("triplets: `{}` is not an index", x.trim()))
                    })
                })
                .collect()
        })
        .collect()
}
