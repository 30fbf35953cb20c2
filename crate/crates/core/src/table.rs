//! Per-zone feature table.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};

/// Rows keyed by zone id, named numeric columns, and zone centroids.
/// Missing values are stored as `NaN` and written as `NA`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureTable {
    zone_ids: Vec<i64>,
    centroids: Vec<(f64, f64)>,
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl FeatureTable {
    pub fn new(zone_ids: Vec<i64>, centroids: Vec<(f64, f64)>) -> Result<Self> {
        if zone_ids.len() != centroids.len() {
            return Err(Error::Structure(format!(
                "{} zone ids but {} centroids",
                zone_ids.len(),
                centroids.len()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for id in &zone_ids {
            if !seen.insert(*id) {
                return Err(Error::Validation(format!("duplicate zone_id {id}")));
            }
        }
        if centroids.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::Validation("centroids must be finite".into()));
        }
        Ok(FeatureTable {
            zone_ids,
            centroids,
            names: Vec::new(),
            columns: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.zone_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zone_ids.is_empty()
    }

    pub fn zone_ids(&self) -> &[i64] {
        &self.zone_ids
    }

    pub fn centroids(&self) -> &[(f64, f64)] {
        &self.centroids
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn row_of(&self, zone_id: i64) -> Option<usize> {
        self.zone_ids.iter().position(|z| *z == zone_id)
    }

    /// Adds or replaces a column.
    pub fn set_column(&mut self, name: &str, values: Vec<f64>) -> Result<()> {
        if values.len() != self.len() {
            return Err(Error::Structure(format!(
                "column '{name}' has {} values for {} rows",
                values.len(),
                self.len()
            )));
        }
        match self.names.iter().position(|n| n == name) {
            Some(i) => self.columns[i] = values,
            None => {
                self.names.push(name.to_string());
                self.columns.push(values);
            }
        }
        Ok(())
    }

    /// Sets a column from a map keyed by zone id; absent zones become missing.
    pub fn set_column_by_zone(&mut self, name: &str, values: &HashMap<i64, f64>) -> Result<()> {
        let col = self
            .zone_ids
            .iter()
            .map(|z| values.get(z).copied().unwrap_or(f64::NAN))
            .collect();
        self.set_column(name, col)
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
            .ok_or_else(|| Error::Validation(format!("missing column: {name}")))
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.names.iter().any(|n| n == name)
    }

    /// Row indices where every listed column is present.
    pub fn complete_rows(&self, names: &[String]) -> Result<Vec<usize>> {
        let cols: Vec<&[f64]> = names.iter().map(|n| self.column(n)).collect::<Result<_>>()?;
        Ok((0..self.len())
            .filter(|&i| cols.iter().all(|c| c[i].is_finite()))
            .collect())
    }

    /// Row-major matrix of the listed columns restricted to `rows`.
    pub fn matrix(&self, names: &[String], rows: &[usize]) -> Result<Vec<Vec<f64>>> {
        let cols: Vec<&[f64]> = names.iter().map(|n| self.column(n)).collect::<Result<_>>()?;
        Ok(rows
            .iter()
            .map(|&i| cols.iter().map(|c| c[i]).collect())
            .collect())
    }

    /// Left join: copies `other`'s columns onto matching zone ids.
    pub fn join(&mut self, other: &FeatureTable) -> Result<()> {
        for (k, name) in other.names.iter().enumerate() {
            let map: HashMap<i64, f64> = other
                .zone_ids
                .iter()
                .copied()
                .zip(other.columns[k].iter().copied())
                .collect();
            self.set_column_by_zone(name, &map)?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut s = String::from("zone_id,centroid_x,centroid_y");
        for n in &self.names {
            s.push(',');
            s.push_str(n);
        }
        s.push('\n');
        for i in 0..self.len() {
            s.push_str(&format!("{},{},{}", self.zone_ids[i], self.centroids[i].0, self.centroids[i].1));
            for c in &self.columns {
                s.push(',');
                s.push_str(&fmt_value(c[i]));
            }
            s.push('\n');
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_str(&text)
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let headers: Vec<String> = rdr
            .headers()
            .map_err(|e| Error::Parse { line: 1, message: e.to_string() })?
            .iter()
            .map(str::to_string)
            .collect();
        let pos = |k: &str| headers.iter().position(|h| h == k);
        let zi = pos("zone_id").ok_or_else(|| Error::Parse { line: 1, message: "missing zone_id column".into() })?;
        let xi = pos("centroid_x");
        let yi = pos("centroid_y");
        let data_cols: Vec<usize> = (0..headers.len()).filter(|&i| i != zi && Some(i) != xi && Some(i) != yi).collect();
        let mut ids = Vec::new();
        let mut cents = Vec::new();
        let mut cols: Vec<Vec<f64>> = vec![Vec::new(); data_cols.len()];
        for (ln, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Parse { line: ln + 2, message: e.to_string() })?;
            let id: i64 = rec[zi].parse().map_err(|_| Error::Parse {
                line: ln + 2,
                message: format!("invalid zone_id '{}'", &rec[zi]),
            })?;
            ids.push(id);
            let x = xi.map(|i| parse_value(&rec[i], ln + 2)).transpose()?.unwrap_or(0.0);
            let y = yi.map(|i| parse_value(&rec[i], ln + 2)).transpose()?.unwrap_or(0.0);
            cents.push((x, y));
            for (k, &ci) in data_cols.iter().enumerate() {
                cols[k].push(parse_value(&rec[ci], ln + 2)?);
            }
        }
        let mut t = FeatureTable::new(ids, cents)?;
        for (k, &ci) in data_cols.iter().enumerate() {
            t.set_column(&headers[ci], std::mem::take(&mut cols[k]))?;
        }
        Ok(t)
    }
}

pub fn fmt_value(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        "NA".to_string()
    }
}

fn parse_value(s: &str, line: usize) -> Result<f64> {
    if s.is_empty() || s.eq_ignore_ascii_case("na") || s.eq_ignore_ascii_case("nan") {
        return Ok(f64::NAN);
    }
    s.parse::<f64>().map_err(|_| Error::Parse {
        line,
        message: format!("invalid number '{s}'"),
    })
}
