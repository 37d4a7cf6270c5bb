//! Self-contained synthetic demo: a survey with six "countries", each drawn
//! from its own random belief network, plus a matching indicator file and a
//! ready-to-run config.

use std::fmt::Write as _;
use std::path::Path;

use beliefnet::synth::{random_ggm, sample_matrix, stream_seed, SynthSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::CliError;

pub const COUNTRIES: [&str; 6] = ["C1", "C2", "C3", "C4", "C5", "C6"];
pub const ROWS_PER_COUNTRY: usize = 300;
pub const ITEMS: usize = 6;
pub const SURVEY_FILE: &str = "survey.csv";
pub const INDICATOR_FILE: &str = "indicators.csv";
pub const CONFIG_FILE: &str = "demo.toml";

const CONFIG: &str = r#"# Synthetic demo pipeline. Run each stage in order:
#   beliefnet --config demo.toml ingest   (then uva, fit, thermo, influence, correlate, report)
output = "results"

[data]
survey = "survey.csv"
label_columns = ["cntry"]

[[items]]
name = "B1"
scale = { min = 0.0, max = 10.0 }
support_group = "regime_performance"

[[items]]
name = "B2"
scale = { min = 0.0, max = 10.0 }
support_group = "regime_performance"

[[items]]
name = "B3"
scale = { min = 0.0, max = 10.0 }
support_group = "regime_principles"

[[items]]
name = "B4"
scale = { min = 0.0, max = 10.0 }
support_group = "regime_institutions"

[[items]]
name = "B5"
scale = { min = 0.0, max = 10.0 }
support_group = "regime_institutions"

[[items]]
name = "B6"
scale = { min = 0.0, max = 10.0 }
support_group = "political_figures"

[[items]]
name = "news"
support_group = "grouping"

[[groupings]]
variable = "news"
kind = "fixed_bins"
bin_edges = [0.0, 30.0, 60.0, 90.0]

[fit]
alpha = 0.0001

[correlate]
country_grouping = "cntry"
indicator_files = ["indicators.csv"]
pairs = [["B1", "GDP"], ["B4", "TRUST"]]
base_year = 2018
lags = [0, 5, 10]

[report]
scatter = [{ x = "temperature", y = "abs_mean_energy" }, { x = "mean_gic", y = "mean_gsm" }]
correlation_scatter = true
correlation_metric = "gic"
"#;

fn spec(seed: u64) -> SynthSpec {
    SynthSpec {
        p: ITEMS,
        density: 0.5,
        weight_range: (0.15, 0.35),
        negative_fraction: 0.2,
        n: ROWS_PER_COUNTRY,
        seed,
        edge_count: Some(6),
    }
}

fn fmt(v: f64) -> String {
    // Three decimals keep the files small; parsing back is exact for these strings.
    format!("{v:.3}")
}

/// Writes the demo survey, indicators and config into `dir`; returns the file names.
pub fn write_demo(dir: &Path, seed: u64) -> Result<Vec<String>, CliError> {
    const STAGE: &str = "synth";
    std::fs::create_dir_all(dir).map_err(|e| CliError::stage(STAGE, format!("{}: {e}", dir.display())))?;
    let mut survey = String::from("cntry,B1,B2,B3,B4,B5,B6,news\n");
    let mut indicators = String::from("country,indicator,year,value\n");
    for (c, name) in COUNTRIES.iter().enumerate() {
        let c = c as u64;
        let model = random_ggm(&spec(stream_seed(seed, 3 * c))).map_err(|e| CliError::stage(STAGE, e))?;
        let x = sample_matrix(&model, ROWS_PER_COUNTRY, stream_seed(seed, 3 * c + 1))
            .map_err(|e| CliError::stage(STAGE, e))?;
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, 3 * c + 2));
        for r in 0..ROWS_PER_COUNTRY {
            let _ = write!(survey, "{name}");
            for j in 0..ITEMS {
                let v = (5.0 + 1.2 * x[(r, j)]).clamp(0.0, 10.0);
                let _ = write!(survey, ",{}", fmt(v));
            }
            let minutes: u32 = rng.random_range(0..=120);
            let _ = writeln!(survey, ",{minutes}");
        }
        for year in [2008, 2013, 2018] {
            let gdp = 20_000.0 + 30_000.0 * rng.random::<f64>();
            let trust = rng.random::<f64>();
            let _ = writeln!(indicators, "{name},GDP,{year},{}", fmt(gdp));
            let _ = writeln!(indicators, "{name},TRUST,{year},{}", fmt(trust));
        }
    }
    let files = [(SURVEY_FILE, survey), (INDICATOR_FILE, indicators), (CONFIG_FILE, CONFIG.to_string())];
    for (name, body) in &files {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| CliError::stage(STAGE, format!("{}: {e}", path.display())))?;
    }
    Ok(files.iter().map(|(n, _)| n.to_string()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{load_config, validate};

    #[test]
    fn demo_config_validates() {
        let dir = tempfile::tempdir().unwrap();
        write_demo(dir.path(), 1).unwrap();
        let loaded = load_config(&dir.path().join(CONFIG_FILE)).unwrap();
        validate(&loaded).unwrap();
        let survey = std::fs::read_to_string(dir.path().join(SURVEY_FILE)).unwrap();
        assert_eq!(survey.lines().count(), 1 + COUNTRIES.len() * ROWS_PER_COUNTRY);
    }

    #[test]
    fn seed_changes_data() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        write_demo(a.path(), 1).unwrap();
        write_demo(b.path(), 2).unwrap();
        let read = |d: &Path| std::fs::read(d.join(SURVEY_FILE)).unwrap();
        assert_ne!(read(a.path()), read(b.path()));
    }
}
