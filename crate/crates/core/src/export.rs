//! CSV and binary writers. Every file is written to a temporary sibling and
//! renamed into place.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::corrector::CapacityMeasure;
use crate::covering::RandomCovering;
use crate::error::{Error, Result};
use crate::partition::HolePartition;
use crate::process::MarkedConfiguration;

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidSpec(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn finish(w: csv::Writer<Vec<u8>>, path: &Path) -> Result<()> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    write_atomic(path, &bytes)
}

/// Rows `replicate, x1..xd, rho` with physical coordinates.
pub fn write_configuration(config: &MarkedConfiguration, path: &Path) -> Result<()> {
    let d = config.d();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut head = vec!["replicate".to_string()];
    head.extend((1..=d).map(|i| format!("x{i}")));
    head.push("rho".into());
    w.write_record(&head)?;
    let eps = config.epsilon();
    for i in 0..config.len() {
        let mut row = vec![config.replicate.to_string()];
        row.extend(config.point(i).iter().map(|z| format!("{:e}", eps * z)));
        row.push(format!("{:e}", config.rho()[i]));
        w.write_record(&row)?;
    }
    finish(w, path)
}

/// Rows `index, class, rho, R`.
pub fn write_partition(config: &MarkedConfiguration, partition: &HolePartition, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["index", "class", "rho", "R"])?;
    let r = config.min_distances();
    for (i, c) in partition.class.iter().enumerate() {
        w.write_record([
            i.to_string(),
            c.label().to_string(),
            format!("{:e}", config.rho()[i]),
            format!("{:e}", r[i]),
        ])?;
    }
    finish(w, path)
}

/// Rows `cx, cy, cz, R, weight` (one centre column per dimension).
pub fn write_measure(mu: &CapacityMeasure, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let names = ["cx", "cy", "cz"];
    let mut head: Vec<String> = (0..mu.d)
        .map(|i| names.get(i).map_or_else(|| format!("c{}", i + 1), |s| s.to_string()))
        .collect();
    head.push("R".into());
    head.push("weight".into());
    w.write_record(&head)?;
    for a in &mu.atoms {
        let mut row: Vec<String> = a.centre.iter().map(|v| format!("{v:e}")).collect();
        row.push(format!("{:e}", a.radius));
        row.push(format!("{:e}", a.weight));
        w.write_record(&row)?;
    }
    finish(w, path)
}

/// Rows `cell_id, anchor, volume, n_points, is_interior`; the anchor is
/// written as space-separated integers.
pub fn write_covering(cov: &RandomCovering, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["cell_id", "anchor", "volume", "n_points", "is_interior"])?;
    for (i, (base, cell)) in cov.base.cells.iter().zip(&cov.cells).enumerate() {
        let anchor: Vec<String> = base.anchor.iter().map(i64::to_string).collect();
        w.write_record([
            i.to_string(),
            anchor.join(" "),
            format!("{:e}", cell.volume),
            base.points.len().to_string(),
            base.interior.to_string(),
        ])?;
    }
    finish(w, path)
}
