//! Pd / RMSE aggregation and the metrics CSV.
//!
//! Floats are written with Rust's shortest round-trip formatting, so parsing
//! an emitted file gives back bit-identical records. RMSE of a target that
//! was never validly detected is written as `NaN`.

use std::io::Write;
use std::path::Path;

use super::HarnessError;

pub const CSV_HEADER: &str = "algorithm,snr_db,target,pd,rmse_x_m,rmse_y_m,g_hat_mean,trials";

/// Aggregates for one (algorithm, SNR, target). `target` is 1-based.
#[derive(Debug, Clone)]
pub struct MetricsRecord {
    pub algorithm: String,
    pub snr_db: f64,
    pub target: usize,
    pub pd: f64,
    pub rmse_x_m: f64,
    pub rmse_y_m: f64,
    pub g_hat_mean: f64,
    pub trials: usize,
}

/// Bitwise equality, so records with `NaN` RMSE compare equal to themselves.
impl PartialEq for MetricsRecord {
    fn eq(&self, o: &Self) -> bool {
        self.algorithm == o.algorithm
            && self.snr_db.to_bits() == o.snr_db.to_bits()
            && self.target == o.target
            && self.pd.to_bits() == o.pd.to_bits()
            && self.rmse_x_m.to_bits() == o.rmse_x_m.to_bits()
            && self.rmse_y_m.to_bits() == o.rmse_y_m.to_bits()
            && self.g_hat_mean.to_bits() == o.g_hat_mean.to_bits()
            && self.trials == o.trials
    }
}

/// Summarise per-trial results for one target.
///
/// `trials` yields `(g_hat, valid, dx, dy)` in a fixed order; sums are
/// accumulated in that order.
pub fn aggregate<I>(algorithm: &str, snr_db: f64, target: usize, trials: I) -> MetricsRecord
where
    I: IntoIterator<Item = (usize, bool, f64, f64)>,
{
    let (mut n, mut hits, mut sx, mut sy, mut sg) = (0usize, 0usize, 0.0, 0.0, 0.0);
    for (g_hat, valid, dx, dy) in trials {
        n += 1;
        sg += g_hat as f64;
        if valid {
            hits += 1;
            sx += dx * dx;
            sy += dy * dy;
        }
    }
    let rmse = |s: f64| if hits == 0 { f64::NAN } else { (s / hits as f64).sqrt() };
    MetricsRecord {
        algorithm: algorithm.to_string(),
        snr_db,
        target,
        pd: if n == 0 { 0.0 } else { hits as f64 / n as f64 },
        rmse_x_m: rmse(sx),
        rmse_y_m: rmse(sy),
        g_hat_mean: if n == 0 { 0.0 } else { sg / n as f64 },
        trials: n,
    }
}

pub fn write_csv<W: Write>(mut out: W, records: &[MetricsRecord]) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.algorithm, r.snr_db, r.target, r.pd, r.rmse_x_m, r.rmse_y_m, r.g_hat_mean, r.trials
        )?;
    }
    Ok(())
}

/// Write `records` to `path`, replacing it atomically.
pub fn export_csv(path: &Path, records: &[MetricsRecord]) -> Result<(), HarnessError> {
    let io = |source| HarnessError::Io { context: format!("writing {}", path.display()), source };
    let tmp = path.with_extension("csv.tmp");
    let mut buf = Vec::new();
    write_csv(&mut buf, records).map_err(io)?;
    std::fs::write(&tmp, &buf).map_err(io)?;
    std::fs::rename(&tmp, path).map_err(io)
}

pub fn parse_csv(text: &str) -> Result<Vec<MetricsRecord>, HarnessError> {
    let bad = |line: usize, message: String| HarnessError::Format {
        what: "metrics CSV".into(),
        message: format!("line {line}: {message}"),
    };
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => return Err(bad(1, format!("expected header, found {other:?}"))),
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let n = i + 2;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(bad(n, format!("expected 8 fields, found {}", f.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| bad(n, format!("{s:?}: {e}")));
        let int = |s: &str| s.parse::<usize>().map_err(|e| bad(n, format!("{s:?}: {e}")));
        out.push(MetricsRecord {
            algorithm: f[0].to_string(),
            snr_db: num(f[1])?,
            target: int(f[2])?,
            pd: num(f[3])?,
            rmse_x_m: num(f[4])?,
            rmse_y_m: num(f[5])?,
            g_hat_mean: num(f[6])?,
            trials: int(f[7])?,
        });
    }
    Ok(out)
}
