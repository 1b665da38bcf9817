//! Minimal in-memory CSV table for the `weight` command.

use std::path::Path;

use anyhow::{Context, Result};
use csv::StringRecord;
use momentbal::nalgebra::DMatrix;
use momentbal::Error;

pub struct InputTable {
    pub headers: StringRecord,
    pub rows: Vec<StringRecord>,
}

impl InputTable {
    pub fn read(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
        let headers = r.headers().with_context(|| format!("cannot read header of {}", path.display()))?.clone();
        let rows = r
            .records()
            .collect::<std::result::Result<Vec<_>, _>>()
            .with_context(|| format!("malformed CSV in {}", path.display()))?;
        Ok(InputTable { headers, rows })
    }

    fn index(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    /// Fails with a schema error listing every name that is not a column.
    pub fn require(&self, names: &[&str]) -> Result<()> {
        let missing: Vec<String> = names.iter().filter(|n| self.index(n).is_none()).map(|n| n.to_string()).collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::Schema { missing }.into())
        }
    }

    fn parsed<T>(&self, name: &str, parse: impl Fn(&str) -> std::result::Result<T, String>) -> Result<Vec<T>> {
        self.require(&[name])?;
        let j = self.index(name).expect("checked by require");
        self.rows
            .iter()
            .enumerate()
            .map(|(i, rec)| {
                let raw = rec.get(j).unwrap_or("").trim();
                parse(raw).map_err(|message| Error::Data { row: i + 1, column: name.to_string(), message }.into())
            })
            .collect()
    }

    pub fn numeric(&self, name: &str) -> Result<Vec<f64>> {
        self.parsed(name, |raw| match raw.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(format!("`{raw}` is not a finite number")),
        })
    }

    /// A 0/1 column.
    pub fn binary(&self, name: &str) -> Result<Vec<bool>> {
        self.parsed(name, |raw| match raw.parse::<f64>() {
            Ok(0.0) => Ok(false),
            Ok(1.0) => Ok(true),
            _ => Err(format!("treatment must be 0 or 1, found `{raw}`")),
        })
    }

    pub fn matrix(&self, names: &[String]) -> Result<DMatrix<f64>> {
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        self.require(&refs)?;
        let cols = names.iter().map(|n| self.numeric(n)).collect::<Result<Vec<_>>>()?;
        Ok(DMatrix::from_fn(self.rows.len(), cols.len(), |i, j| cols[j][i]))
    }
}
