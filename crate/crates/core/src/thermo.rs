//! Respondent energies and network temperature of a fitted belief network.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ggm::GGMModel;
use crate::ingest::SurveyDataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermoReport {
    /// Energies of the complete rows, in row order.
    pub per_respondent_energy: Vec<f64>,
    pub mean_energy: f64,
    pub abs_mean_energy: f64,
    /// Mean of the scaling diagonal.
    pub temperature: f64,
    pub skipped_incomplete: usize,
}

/// `H = -sum_{i<j} omega_ij b_i b_j` for one respondent.
pub fn respondent_energy(m: &GGMModel, b: &[Option<f64>]) -> Result<f64> {
    let p = m.p();
    if b.len() != p {
        return Err(Error::InvalidArgument(format!(
            "belief vector has {} values, model has {p} nodes",
            b.len()
        )));
    }
    let mut vals = Vec::with_capacity(p);
    for (i, v) in b.iter().enumerate() {
        let v = v.ok_or_else(|| {
            Error::InvalidArgument(format!("missing value for `{}`: energy undefined", m.nodes[i]))
        })?;
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Range {
                item: m.nodes[i].clone(),
                value: v,
                min: 0.0,
                max: 1.0,
            });
        }
        vals.push(v);
    }
    let mut h = 0.0;
    for i in 0..p {
        for j in (i + 1)..p {
            h -= m.omega.get(i, j) * vals[i] * vals[j];
        }
    }
    Ok(h)
}

pub fn temperature(m: &GGMModel) -> f64 {
    m.delta.iter().sum::<f64>() / m.delta.len() as f64
}

/// Energies over the complete rows of `ds` (matched to the model by item name).
pub fn thermo_report(m: &GGMModel, ds: &SurveyDataset) -> Result<ThermoReport> {
    let ds = ds.select_items(&m.nodes)?;
    let complete: Vec<&Vec<Option<f64>>> = ds.rows().iter().filter(|r| r.iter().all(Option::is_some)).collect();
    if complete.is_empty() {
        return Err(Error::InsufficientData("no complete rows for energy".into()));
    }
    let energies: Vec<f64> = complete
        .par_iter()
        .map(|r| respondent_energy(m, r))
        .collect::<Result<_>>()?;
    let mean = energies.iter().sum::<f64>() / energies.len() as f64;
    Ok(ThermoReport {
        skipped_incomplete: ds.n_rows() - energies.len(),
        per_respondent_energy: energies,
        mean_energy: mean,
        abs_mean_energy: mean.abs(),
        temperature: temperature(m),
    })
}
