//! Output writers: field dumps for external plotting, grayscale rasters,
//! an append-only metrics table, and per-task loss traces.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Result, VekuaError};
use crate::mat::Mat;

/// Write one field as comma-separated text: one row per point, the point's
/// coordinates followed by the field value.
pub fn write_field_csv(path: &Path, x: &Mat, values: &[f64], value_name: &str) -> Result<()> {
    if values.len() != x.rows {
        return Err(VekuaError::ShapeMismatch(format!(
            "{} values for {} points",
            values.len(),
            x.rows
        )));
    }
    let mut out = String::new();
    for c in 0..x.cols {
        out.push_str(&format!("x{c},"));
    }
    out.push_str(value_name);
    out.push('\n');
    for (i, v) in values.iter().enumerate() {
        for &c in x.row(i) {
            out.push_str(&format!("{c},"));
        }
        out.push_str(&format!("{v}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Write a 2-D field as a binary portable graymap (P5), row-major, with the
/// linear intensity mapping recorded as a `min=... max=...` comment.
pub fn write_pgm(path: &Path, width: usize, height: usize, values: &[f64]) -> Result<()> {
    if values.len() != width * height {
        return Err(VekuaError::ShapeMismatch(format!(
            "{} values for a {width}x{height} raster",
            values.len()
        )));
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let span = hi - lo;
    let mut bytes = Vec::with_capacity(64 + values.len());
    write!(bytes, "P5\n# min={lo} max={hi}\n{width} {height}\n255\n")?;
    for &v in values {
        let p = if span > 0.0 {
            ((v - lo) / span * 255.0).round() as u8
        } else {
            0
        };
        bytes.push(p);
    }
    fs::write(path, bytes)?;
    Ok(())
}

/// One row of the metrics table. `None` metric fields are written as empty
/// cells (used when a task fails before producing them).
#[derive(Debug, Clone)]
pub struct MetricsRow {
    pub task_id: String,
    pub seed: u64,
    pub param_count: usize,
    pub train_mse: Option<f64>,
    pub eval_mse: Option<f64>,
    pub wall_time_seconds: f64,
    /// Final fit loss of each block, padded/truncated to three columns.
    pub block_final_losses: Vec<f64>,
    pub error: Option<String>,
}

const METRICS_HEADER: &str = "task_id,seed,param_count,train_mse,eval_mse,wall_time_seconds,\
block1_final_loss,block2_final_loss,block3_final_loss,error";

fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Append one row to `metrics.csv`, creating the file with a header first if
/// needed. Existing rows are never rewritten.
pub fn append_metrics(path: &Path, row: &MetricsRow) -> Result<()> {
    let mut line = format!(
        "{},{},{},{},{},{}",
        csv_escape(&row.task_id),
        row.seed,
        row.param_count,
        opt(row.train_mse),
        opt(row.eval_mse),
        row.wall_time_seconds,
    );
    for i in 0..3 {
        line.push(',');
        if let Some(v) = row.block_final_losses.get(i) {
            line.push_str(&v.to_string());
        }
    }
    line.push(',');
    line.push_str(&csv_escape(row.error.as_deref().unwrap_or("")));
    line.push('\n');

    let needs_header = !path.exists();
    let mut fh = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)?;
    if needs_header {
        writeln!(fh, "{METRICS_HEADER}")?;
    }
    fh.write_all(line.as_bytes())?;
    Ok(())
}

/// Write per-iteration training losses as `iteration,block,loss` rows. The
/// last entry of each block's trace comes from its final freezing solve.
pub fn write_loss_trace(path: &Path, block_traces: &[Vec<f64>]) -> Result<()> {
    let mut out = String::from("iteration,block,loss\n");
    for (b, trace) in block_traces.iter().enumerate() {
        for (i, loss) in trace.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", i, b + 1, loss));
        }
    }
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn tmp(name: &str) -> PathBuf {
        std::env::temp_dir().join(format!("vekua-export-{}-{name}", std::process::id()))
    }

    #[test]
    fn field_csv_has_coordinates_then_value() {
        let x = Mat::from_vec(2, 2, vec![0.0, 1.0, 0.5, -1.0]).unwrap();
        let path = tmp("field.csv");
        write_field_csv(&path, &x, &[3.0, 4.5], "pred").unwrap();
        let text = fs::read_to_string(&path).unwrap();
        fs::remove_file(&path).ok();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines, vec!["x0,x1,pred", "0,1,3", "0.5,-1,4.5"]);
    }

    #[test]
    fn field_csv_rejects_length_mismatch() {
        let x = Mat::zeros(2, 1);
        assert!(write_field_csv(&tmp("bad.csv"), &x, &[1.0], "v").is_err());
    }

    #[test]
    fn pgm_is_valid_and_records_range() {
        let path = tmp("img.pgm");
        write_pgm(&path, 3, 2, &[0.0, 0.5, 1.0, 1.0, 0.5, 0.0]).unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::remove_file(&path).ok();
        let text = String::from_utf8_lossy(&bytes[..bytes.len() - 6]);
        assert!(text.starts_with("P5\n"));
        assert!(text.contains("min=0 max=1"));
        assert!(text.contains("3 2\n255\n"));
        let pixels = &bytes[bytes.len() - 6..];
        assert_eq!(pixels, &[0u8, 128, 255, 255, 128, 0]);
    }

    #[test]
    fn pgm_constant_field_is_black() {
        let path = tmp("flat.pgm");
        write_pgm(&path, 2, 1, &[7.0, 7.0]).unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::remove_file(&path).ok();
        assert_eq!(&bytes[bytes.len() - 2..], &[0u8, 0]);
    }

    #[test]
    fn metrics_append_keeps_header_and_rows() {
        let path = tmp("metrics.csv");
        fs::remove_file(&path).ok();
        let row = MetricsRow {
            task_id: "A".into(),
            seed: 0,
            param_count: 912,
            train_mse: Some(0.5),
            eval_mse: Some(0.25),
            wall_time_seconds: 1.5,
            block_final_losses: vec![0.3, 0.2, 0.1],
            error: None,
        };
        append_metrics(&path, &row).unwrap();
        let failed = MetricsRow {
            task_id: "C".into(),
            seed: 0,
            param_count: 0,
            train_mse: None,
            eval_mse: None,
            wall_time_seconds: 0.1,
            block_final_losses: vec![],
            error: Some("solver, singular".into()),
        };
        append_metrics(&path, &failed).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        fs::remove_file(&path).ok();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0].matches("task_id").count(), 1);
        assert_eq!(lines[1], "A,0,912,0.5,0.25,1.5,0.3,0.2,0.1,");
        // Error text with a comma is quoted, metric cells stay empty.
        assert_eq!(lines[2], "C,0,0,,,0.1,,,,\"solver, singular\"");
    }

    #[test]
    fn loss_trace_rows_per_iteration() {
        let path = tmp("trace.csv");
        write_loss_trace(&path, &[vec![1.0, 0.5], vec![0.25]]).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        fs::remove_file(&path).ok();
        assert_eq!(
            text.lines().collect::<Vec<_>>(),
            vec!["iteration,block,loss", "0,1,1", "1,1,0.5", "0,2,0.25"]
        );
    }
}
