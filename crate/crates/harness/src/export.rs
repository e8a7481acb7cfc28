use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{HarnessError, Result};
use crate::output::{csv_bytes, read_csv, summary_cells, COUNTS_HEADER, CURVES_HEADER};

pub const FIG1_HEADER: [&str; 6] = ["algo", "state", "mean", "ci_lo", "ci_hi", "n_seeds"];
pub const CURVES_EXPORT_HEADER: [&str; 7] = ["algo", "metric", "episode", "mean", "ci_lo", "ci_hi", "n_seeds"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    /// Visits per state summed over steps, mean over seeds.
    StateVisits,
    /// Logged learning curves, mean over seeds at each logged episode.
    Curves,
}

impl FromStr for Figure {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig1" | "state-visits" => Ok(Figure::StateVisits),
            "curves" => Ok(Figure::Curves),
            _ => Err(HarnessError::Config(format!("unknown figure {s:?} (expected fig1, state-visits or curves)"))),
        }
    }
}

fn parse<T: FromStr>(path: &Path, field: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| HarnessError::data(path, format!("bad {field} {v:?}")))
}

/// Keeps first-seen order of algorithm labels.
fn push_label(order: &mut Vec<String>, label: &str) {
    if !order.iter().any(|l| l == label) {
        order.push(label.to_string());
    }
}

/// Plot-ready CSV built from the combined files of a run directory.
pub fn export_figure(results: &Path, figure: Figure) -> Result<Vec<u8>> {
    match figure {
        Figure::StateVisits => state_visits(results),
        Figure::Curves => curves(results),
    }
}

fn state_visits(results: &Path) -> Result<Vec<u8>> {
    let path = results.join("counts.csv");
    let rows = read_csv(&path, &COUNTS_HEADER)?;
    let mut order = Vec::new();
    // (algo) -> state -> seed -> visits
    let mut totals: BTreeMap<String, BTreeMap<usize, BTreeMap<u64, u64>>> = BTreeMap::new();
    let mut seeds: BTreeMap<String, Vec<u64>> = BTreeMap::new();
    for row in &rows {
        let seed: u64 = parse(&path, "seed", &row[0])?;
        let state: usize = parse(&path, "state", &row[4])?;
        let visits: u64 = parse(&path, "visits", &row[5])?;
        push_label(&mut order, &row[1]);
        let algo_seeds = seeds.entry(row[1].clone()).or_default();
        if !algo_seeds.contains(&seed) {
            algo_seeds.push(seed);
        }
        *totals.entry(row[1].clone()).or_default().entry(state).or_default().entry(seed).or_default() += visits;
    }
    let mut out = Vec::new();
    for algo in &order {
        let algo_seeds = &seeds[algo];
        for (state, by_seed) in &totals[algo] {
            let xs: Vec<f64> = algo_seeds.iter().map(|s| by_seed.get(s).copied().unwrap_or(0) as f64).collect();
            let mut row = vec![algo.clone(), state.to_string()];
            row.extend(summary_cells(&xs));
            out.push(row);
        }
    }
    Ok(csv_bytes(&FIG1_HEADER, out))
}

fn curves(results: &Path) -> Result<Vec<u8>> {
    let path = results.join("curves.csv");
    let rows = read_csv(&path, &CURVES_HEADER)?;
    let mut order = Vec::new();
    let mut series: BTreeMap<(String, String, u64), Vec<f64>> = BTreeMap::new();
    for row in &rows {
        let episode: u64 = parse(&path, "episode", &row[2])?;
        let value: f64 = parse(&path, "value", &row[4])?;
        push_label(&mut order, &row[1]);
        series.entry((row[1].clone(), row[3].clone(), episode)).or_default().push(value);
    }
    let mut out = Vec::new();
    for algo in &order {
        for ((a, metric, episode), xs) in &series {
            if a == algo {
                let mut row = vec![a.clone(), metric.clone(), episode.to_string()];
                row.extend(summary_cells(xs));
                out.push(row);
            }
        }
    }
    Ok(csv_bytes(&CURVES_EXPORT_HEADER, out))
}
