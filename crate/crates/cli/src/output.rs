//! JSON and CSV writers. Every file carries the config hash and master seed:
//! JSON documents as fields, CSV files as a leading `#` comment line.

use std::fs;
use std::path::Path;

use serde::Serialize;

use rblab_core::analysis::DecayFit;
use rblab_core::rbengine::RbDataset;

use crate::Failure;

/// Provenance stamp shared by all outputs of one invocation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Stamp {
    pub config_hash: String,
    pub seed: Option<u64>,
}

impl Stamp {
    pub fn comment(&self) -> String {
        match self.seed {
            Some(s) => format!("# config_hash={} seed={s}\n", self.config_hash),
            None => format!("# config_hash={}\n", self.config_hash),
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Failure::config(format!("writing {}: {e}", path.display())))
}

/// A CSV table, written after the stamp comment.
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Table {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self, stamp: &Stamp) -> Result<String, Failure> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let body = w
            .into_inner()
            .map_err(|e| Failure::config(format!("csv: {e}")))?;
        let mut out = stamp.comment();
        out.push_str(&String::from_utf8(body).expect("csv output is utf-8"));
        Ok(out)
    }

    pub fn write(&self, path: &Path, stamp: &Stamp) -> Result<(), Failure> {
        fs::write(path, self.render(stamp)?)
            .map_err(|e| Failure::config(format!("writing {}: {e}", path.display())))
    }
}

/// Shortest round-trip decimal form, so reruns compare byte-for-byte.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn summary_table(ds: &RbDataset) -> Table {
    let mut t = Table::new(&["m", "mean_survival", "std_err", "n_circuits"]);
    for l in &ds.lengths {
        t.push(vec![
            l.m.to_string(),
            num(l.mean),
            num(l.std_err),
            l.n_circuits().to_string(),
        ]);
    }
    t
}

pub fn circuits_table(ds: &RbDataset) -> Table {
    let mut t = Table::new(&["m", "circuit", "survival"]);
    for l in &ds.lengths {
        for (i, p) in l.survival.iter().enumerate() {
            t.push(vec![l.m.to_string(), i.to_string(), num(*p)]);
        }
    }
    t
}

pub fn curve_table(points: &[(f64, f64)], fit: &DecayFit) -> Table {
    let mut t = Table::new(&["m", "observed", "fitted"]);
    for &(m, p) in points {
        t.push(vec![num(m), num(p), num(fit.predict(m))]);
    }
    t
}
