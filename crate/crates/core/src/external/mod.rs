//! Country-level indicators and their correlation with belief influence.

mod indicators;
pub mod worldbank;

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

pub use indicators::{load_indicators, read_indicators, IndicatorTable};
pub use worldbank::{FixtureTransport, HttpTransport, Transport, WorldBankClient};

use crate::error::{Error, Result};
use crate::influence::NodeInfluence;
use crate::stats::{pearson, CorrelationResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InfluenceMetric {
    #[default]
    Gic,
    Gsm,
}

impl InfluenceMetric {
    fn of(&self, n: &NodeInfluence) -> f64 {
        match self {
            InfluenceMetric::Gic => n.gic,
            InfluenceMetric::Gsm => n.gsm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceIndicatorCorrelation {
    pub belief: String,
    pub indicator: String,
    pub lag_years: i32,
    pub metric: InfluenceMetric,
    /// Countries with both values present.
    pub n: usize,
    pub result: Option<CorrelationResult>,
    /// Why no correlation was computed.
    pub skipped: Option<String>,
}

/// Correlates a belief's influence across countries with an indicator at
/// `base_year - lag`, for every `(belief, indicator)` pair and lag.
///
/// Countries missing either value are dropped per correlation. Fewer than
/// three pairs, or a constant series, produce a skip entry rather than an error.
pub fn correlate_influence(
    per_country: &BTreeMap<String, Vec<NodeInfluence>>,
    indicators: &IndicatorTable,
    pairs: &[(String, String)],
    base_year: i32,
    lags: &[i32],
    metric: InfluenceMetric,
) -> Vec<InfluenceIndicatorCorrelation> {
    let mut out = Vec::new();
    for (belief, indicator) in pairs {
        for &lag in lags {
            let year = base_year - lag;
            let (x, y): (Vec<f64>, Vec<f64>) = per_country
                .iter()
                .filter_map(|(country, rows)| {
                    let inf = rows.iter().find(|r| &r.node == belief).map(|r| metric.of(r))?;
                    let v = indicators.get(country, indicator, year)?;
                    Some((inf, v))
                })
                .unzip();
            let n = x.len();
            let (result, skipped) = if n < 3 {
                (None, Some(format!("only {n} countries with both values")))
            } else {
                match pearson(&x, &y) {
                    Ok(r) => (Some(r), None),
                    Err(Error::UndefinedCorrelation(msg)) => (None, Some(format!("undefined correlation: {msg}"))),
                    Err(e) => (None, Some(e.to_string())),
                }
            };
            out.push(InfluenceIndicatorCorrelation {
                belief: belief.clone(),
                indicator: indicator.clone(),
                lag_years: lag,
                metric,
                n,
                result,
                skipped,
            });
        }
    }
    out
}

/// CSV with columns `belief,indicator,lag,r,p,n`; skipped entries show `NA`.
pub fn write_correlations<W: Write>(writer: W, rows: &[InfluenceIndicatorCorrelation]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["belief", "indicator", "lag", "r", "p", "n"])?;
    for row in rows {
        let (r, p) = match &row.result {
            Some(c) => (c.r.to_string(), c.p.to_string()),
            None => ("NA".to_string(), "NA".to_string()),
        };
        w.write_record([
            row.belief.as_str(),
            row.indicator.as_str(),
            &row.lag_years.to_string(),
            &r,
            &p,
            &row.n.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
