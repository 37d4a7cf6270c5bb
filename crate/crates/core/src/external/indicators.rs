use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Country-level indicator values keyed by `(country, indicator, year)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IndicatorTable {
    entries: BTreeMap<(String, String, i32), f64>,
}

#[derive(Debug, Deserialize, Serialize)]
struct Row {
    country: String,
    indicator: String,
    year: i32,
    value: String,
}

impl IndicatorTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds one value; duplicates and non-finite values are rejected.
    pub fn insert(&mut self, country: &str, indicator: &str, year: i32, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "non-finite value for ({country}, {indicator}, {year})"
            )));
        }
        let key = (country.to_string(), indicator.to_string(), year);
        if self.entries.contains_key(&key) {
            return Err(Error::InvalidArgument(format!(
                "duplicate indicator entry ({country}, {indicator}, {year})"
            )));
        }
        self.entries.insert(key, value);
        Ok(())
    }

    pub fn get(&self, country: &str, indicator: &str, year: i32) -> Option<f64> {
        self.entries
            .get(&(country.to_string(), indicator.to_string(), year))
            .copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, i32, f64)> {
        self.entries
            .iter()
            .map(|((c, i, y), v)| (c.as_str(), i.as_str(), *y, *v))
    }

    pub fn countries(&self) -> BTreeSet<&str> {
        self.entries.keys().map(|(c, _, _)| c.as_str()).collect()
    }

    pub fn indicators(&self) -> BTreeSet<&str> {
        self.entries.keys().map(|(_, i, _)| i.as_str()).collect()
    }

    /// Adds all entries of `other`; overlapping keys are an error.
    pub fn merge(&mut self, other: IndicatorTable) -> Result<()> {
        for ((c, i, y), v) in other.entries {
            self.insert(&c, &i, y, v)?;
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["country", "indicator", "year", "value"])?;
        for (c, i, y, v) in self.iter() {
            w.write_record([c, i, &y.to_string(), &v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn load_indicators(path: &Path) -> Result<IndicatorTable> {
    read_indicators(std::fs::File::open(path)?)
}

/// Parses `country,indicator,year,value` CSV. An empty input is an empty table.
pub fn read_indicators<R: Read>(mut reader: R) -> Result<IndicatorTable> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    let mut table = IndicatorTable::new();
    if text.trim().is_empty() {
        return Ok(table);
    }
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = rdr.headers()?.clone();
    for col in ["country", "indicator", "year", "value"] {
        if !headers.iter().any(|h| h == col) {
            return Err(Error::Schema(format!("indicator file lacks column `{col}`")));
        }
    }
    for (idx, rec) in rdr.deserialize::<Row>().enumerate() {
        let row = rec.map_err(|e| Error::Parse {
            row: idx + 1,
            column: "year".into(),
            message: e.to_string(),
        })?;
        let value: f64 = row.value.parse().map_err(|_| Error::Parse {
            row: idx + 1,
            column: "value".into(),
            message: format!("`{}` is not a number", row.value),
        })?;
        table.insert(&row.country, &row.indicator, row.year, value)?;
    }
    Ok(table)
}
