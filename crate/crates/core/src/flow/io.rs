use std::path::Path;

use super::FlowTrajectory;
use crate::error::Result;
use crate::metric::io::write_curvature;

/// `t,sup_rm,sup_ric,sup_dric,sup_d2ric,equivalence`, one row per step.
pub fn write_series_csv(traj: &FlowTrajectory, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in &traj.series {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// One curvature CSV per warped snapshot, named `fields_<k>.csv`.
pub fn write_snapshot_fields(traj: &FlowTrajectory, dir: &Path) -> Result<usize> {
    std::fs::create_dir_all(dir)?;
    let mut count = 0;
    for (k, snap) in traj.snapshots.iter().enumerate() {
        if let Some((_, field)) = snap.warped() {
            let file = std::fs::File::create(dir.join(format!("fields_{k:05}.csv")))?;
            write_curvature(std::io::BufWriter::new(file), field)?;
            count += 1;
        }
    }
    Ok(count)
}
