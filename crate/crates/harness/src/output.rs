use std::fs;
use std::path::Path;

use crate::error::{HarnessError, Result};

pub const COUNTS_HEADER: [&str; 6] = ["seed", "algo", "env", "h", "state", "visits"];
pub const CURVES_HEADER: [&str; 5] = ["seed", "algo", "episode", "metric", "value"];
pub const METRICS_HEADER: [&str; 4] = ["seed", "algo", "metric", "value"];
pub const SUMMARY_HEADER: [&str; 6] = ["algo", "metric", "mean", "ci_lo", "ci_hi", "n_seeds"];

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes through a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = Path::new(&tmp);
    fs::write(tmp, contents).map_err(|e| HarnessError::io(tmp, e))?;
    fs::rename(tmp, path).map_err(|e| HarnessError::io(path, e))
}

/// Builds a CSV in memory.
pub fn csv_bytes<I, R>(header: &[&str], rows: I) -> Vec<u8>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("writing to memory");
    for row in rows {
        w.write_record(row).expect("writing to memory");
    }
    w.into_inner().expect("writing to memory")
}

/// Reads a CSV, checking that its header matches `header`.
pub fn read_csv(path: &Path, header: &[&str]) -> Result<Vec<Vec<String>>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| HarnessError::data(path, e.to_string()))?;
    let got = r.headers().map_err(|e| HarnessError::data(path, e.to_string()))?.clone();
    if got.iter().ne(header.iter().copied()) {
        return Err(HarnessError::data(
            path,
            format!("header {:?}, expected {:?}", got.iter().collect::<Vec<_>>(), header),
        ));
    }
    r.records()
        .map(|rec| {
            rec.map(|rec| rec.iter().map(str::to_string).collect())
                .map_err(|e| HarnessError::data(path, e.to_string()))
        })
        .collect()
}

/// Mean and normal-approximation 95% interval; no interval from one sample.
pub fn mean_ci(xs: &[f64]) -> (f64, Option<(f64, f64)>) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, None);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let half = 1.959963984540054 * (var / n).sqrt();
    (mean, Some((mean - half, mean + half)))
}

/// `mean, ci_lo, ci_hi, n` cells for a summary row.
pub fn summary_cells(xs: &[f64]) -> [String; 4] {
    let (mean, ci) = mean_ci(xs);
    let (lo, hi) = ci.map(|(l, h)| (fmt_float(l), fmt_float(h))).unwrap_or_default();
    [fmt_float(mean), lo, hi, xs.len().to_string()]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, 1e-300, 12345.678, 0.0, -2.5] {
            let s = fmt_float(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            let digits = s.split('e').next().unwrap().chars().filter(|c| c.is_ascii_digit()).count();
            assert_eq!(digits, 17, "{s}");
        }
    }

    #[test]
    fn interval_matches_hand_computation() {
        let (m, ci) = mean_ci(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        let half = 1.959963984540054 * (5.0f64 / 3.0 / 4.0).sqrt();
        let (lo, hi) = ci.unwrap();
        assert!((lo - (2.5 - half)).abs() < 1e-15 && (hi - (2.5 + half)).abs() < 1e-15);
        assert_eq!(mean_ci(&[7.0]), (7.0, None));
        let cells = summary_cells(&[7.0]);
        assert_eq!(cells[1], "");
        assert_eq!(cells[3], "1");
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a/b.csv");
        write_atomic(&p, b"x").unwrap();
        write_atomic(&p, b"y").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"y");
        assert_eq!(fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }
}
