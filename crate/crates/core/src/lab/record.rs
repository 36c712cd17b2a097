use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::scattering::Pair;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub hbar: f64,
    pub energy: f64,
    pub pair: Option<Pair>,
    pub quantity: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub code_version: String,
}

impl Provenance {
    pub fn new(config_hash: impl Into<String>) -> Self {
        Provenance {
            config_hash: config_hash.into(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

/// Long-format table of measured quantities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub rows: Vec<Row>,
    pub provenance: Provenance,
}

impl SweepRecord {
    pub fn new(provenance: Provenance) -> Self {
        SweepRecord {
            rows: Vec::new(),
            provenance,
        }
    }

    pub fn push(&mut self, hbar: f64, energy: f64, pair: Option<Pair>, quantity: &str, value: f64) {
        self.rows.push(Row {
            hbar,
            energy,
            pair,
            quantity: quantity.to_string(),
            value,
        });
    }

    /// Rows ordered by quantity, then decreasing hbar, then energy.
    pub fn sort(&mut self) {
        self.rows.sort_by(|a, b| {
            a.quantity
                .cmp(&b.quantity)
                .then(b.hbar.total_cmp(&a.hbar))
                .then(a.energy.total_cmp(&b.energy))
                .then(
                    a.pair
                        .map(|p| p.to_string())
                        .cmp(&b.pair.map(|p| p.to_string())),
                )
        });
    }

    /// (hbar, value) of every row of one quantity.
    pub fn points(&self, quantity: &str) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.quantity == quantity)
            .map(|r| (r.hbar, r.value))
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut sorted = self.clone();
        sorted.sort();
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "hbar",
            "E",
            "pair",
            "quantity",
            "value",
            "config_hash",
            "code_version",
        ])?;
        for r in &sorted.rows {
            w.write_record([
                format!("{:.17e}", r.hbar),
                format!("{:.17e}", r.energy),
                r.pair.map(|p| p.to_string()).unwrap_or_default(),
                r.quantity.clone(),
                format!("{:.17e}", r.value),
                self.provenance.config_hash.clone(),
                self.provenance.code_version.clone(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let mut sorted = self.clone();
        sorted.sort();
        Ok(serde_json::to_string_pretty(&sorted)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_is_sorted_and_repeatable() {
        let mut r = SweepRecord::new(Provenance::new("abc"));
        r.push(0.1, 1.0, Some(Pair::HH0), "b", 2.0);
        r.push(0.2, 1.0, None, "b", 1.0);
        r.push(0.2, 0.5, None, "a", 3.0);
        let mut one = Vec::new();
        r.write_csv(&mut one).unwrap();
        let mut two = Vec::new();
        r.write_csv(&mut two).unwrap();
        assert_eq!(one, two);
        let text = String::from_utf8(one).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[1].contains(",a,"));
        assert!(lines[2].starts_with("2.00000000000000011e-1"));
        assert!(lines[3].contains("H,H0"));
        assert_eq!(r.points("b"), vec![(0.1, 2.0), (0.2, 1.0)]);
    }
}
