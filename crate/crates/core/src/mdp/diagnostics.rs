use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRecord {
    pub episode: u64,
    pub metrics: Vec<(String, f64)>,
}

impl DiagnosticRecord {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
    }
}

/// Per-episode scalar metrics with strictly increasing episode indices.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsLog {
    records: Vec<DiagnosticRecord>,
}

impl DiagnosticsLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, episode: u64, metrics: Vec<(String, f64)>) -> Result<()> {
        if let Some(last) = self.records.last() {
            if episode <= last.episode {
                return Err(Error::param(
                    "episode",
                    format!("{episode} does not follow {}", last.episode),
                ));
            }
        }
        self.records.push(DiagnosticRecord { episode, metrics });
        Ok(())
    }

    pub fn records(&self) -> &[DiagnosticRecord] {
        &self.records
    }

    pub fn last(&self) -> Option<&DiagnosticRecord> {
        self.records.last()
    }

    /// `(episode, value)` series of one metric.
    pub fn series(&self, name: &str) -> Vec<(u64, f64)> {
        self.records
            .iter()
            .filter_map(|r| r.get(name).map(|v| (r.episode, v)))
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn episodes_must_increase() {
        let mut log = DiagnosticsLog::new();
        log.push(1, vec![("x".into(), 1.0)]).unwrap();
        log.push(3, vec![("x".into(), 2.0)]).unwrap();
        assert!(log.push(3, vec![]).is_err());
        assert_eq!(log.series("x"), vec![(1, 1.0), (3, 2.0)]);
    }
}
