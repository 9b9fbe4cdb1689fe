//! Output records and their CSV/JSON serialization.
//!
//! CSV files carry a fixed header naming every column with its unit and
//! rows printed at 17 significant digits, so a parse of the written file
//! reproduces the values bit-identically. Every run also writes a JSON
//! sidecar with the tool version, the normalized config, and a summary.

use serde::Serialize;
use std::io::Write;
use std::path::Path;

/// One row of a simulated or optimized trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeSeriesRecord {
    pub t: f64,
    /// scalar-first unit quaternion
    pub quat: [f64; 4],
    pub omega: [f64; 3],
    pub torque: [f64; 3],
    pub error_angle: f64,
    pub velocity_error_norm: f64,
}

/// One row of the per-iteration solver record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRecord {
    pub iteration: usize,
    pub total_cost: f64,
    /// `|U_i - U_{i-1}|` (zero for the initial row)
    pub control_change: f64,
    /// `|U_i - U_final|`, filled retrospectively
    pub distance_to_final: f64,
}

pub trait CsvRecord {
    fn header() -> &'static str;
    fn row(&self) -> String;
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

impl CsvRecord for TimeSeriesRecord {
    fn header() -> &'static str {
        "t_s,qw,qx,qy,qz,wx_rad_per_s,wy_rad_per_s,wz_rad_per_s,\
         ux_Nm,uy_Nm,uz_Nm,error_angle_rad,velocity_error_norm_rad_per_s"
    }

    fn row(&self) -> String {
        let mut cols = Vec::with_capacity(13);
        cols.push(fmt(self.t));
        cols.extend(self.quat.iter().map(|&x| fmt(x)));
        cols.extend(self.omega.iter().map(|&x| fmt(x)));
        cols.extend(self.torque.iter().map(|&x| fmt(x)));
        cols.push(fmt(self.error_angle));
        cols.push(fmt(self.velocity_error_norm));
        cols.join(",")
    }
}

impl CsvRecord for ConvergenceRecord {
    fn header() -> &'static str {
        "iteration,total_cost,control_change_Nm,distance_to_final_Nm"
    }

    fn row(&self) -> String {
        format!(
            "{},{},{},{}",
            self.iteration,
            fmt(self.total_cost),
            fmt(self.control_change),
            fmt(self.distance_to_final)
        )
    }
}

pub fn write_csv<R: CsvRecord>(records: &[R], path: &Path) -> std::io::Result<()> {
    let file = std::fs::File::create(path)?;
    let mut out = std::io::BufWriter::new(file);
    writeln!(out, "{}", R::header())?;
    for record in records {
        writeln!(out, "{}", record.row())?;
    }
    out.flush()
}

/// Sidecar metadata written next to every CSV set.
#[derive(Debug, Clone, Serialize)]
pub struct Sidecar<S: Serialize> {
    pub tool_version: &'static str,
    pub seed: u64,
    pub config: crate::scenario::ScenarioConfig,
    pub summary: S,
}

pub fn write_sidecar<S: Serialize>(sidecar: &Sidecar<S>, path: &Path) -> std::io::Result<()> {
    let text = serde_json::to_string_pretty(sidecar).expect("sidecar serializes");
    std::fs::write(path, text + "\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_only_for_empty_stream() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        write_csv::<TimeSeriesRecord>(&[], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("t_s,qw"));
        assert!(lines.next().is_none());
    }

    #[test]
    fn rows_roundtrip_bit_exactly() {
        let record = TimeSeriesRecord {
            t: 0.12345678901234568,
            quat: [1.0 / 3.0, -2.0f64.sqrt() / 2.0, 0.0, 1e-17],
            omega: [std::f64::consts::PI, -1e300, 5e-324],
            torque: [0.1, 0.2, 0.3],
            error_angle: 2.0_f64.powi(-40),
            velocity_error_norm: 17.0,
        };
        let row = record.row();
        let parsed: Vec<f64> = row.split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(parsed[0].to_bits(), record.t.to_bits());
        assert_eq!(parsed[1].to_bits(), record.quat[0].to_bits());
        assert_eq!(parsed[2].to_bits(), record.quat[1].to_bits());
        assert_eq!(parsed[6].to_bits(), record.omega[1].to_bits());
        assert_eq!(parsed[7].to_bits(), record.omega[2].to_bits());
        assert_eq!(parsed[11].to_bits(), record.error_angle.to_bits());
    }
}
