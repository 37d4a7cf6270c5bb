//! Pipeline stages. Each stage reads its inputs from files written by earlier
//! stages under the output directory, so any stage can be rerun on its own.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use beliefnet::external::{
    correlate_influence, load_indicators, read_indicators, write_correlations, HttpTransport,
    InfluenceIndicatorCorrelation, InfluenceMetric, IndicatorTable, WorldBankClient,
};
use beliefnet::ggm::{
    fit_model_suite, select_best, stepup_search_traced, Constraint, GGMModel, GroupData, MultigroupFit, StepRecord,
};
use beliefnet::influence::{influence_table, NodeInfluence};
use beliefnet::ingest::{
    derive_groups, group_label_column, load_survey_with_labels, read_survey, rescale_unit, split_by_group,
    GroupColumn, GroupSplit, ItemMeta, SurveyDataset,
};
use beliefnet::thermo::{thermo_report, ThermoReport};
use beliefnet::uva::uva_iterate;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::{fit_groupings, LoadedConfig};
use crate::error::CliError;
use crate::manifest::record_stage;
use crate::svg::scatter_svg;

pub struct Ctx {
    pub loaded: LoadedConfig,
    pub out: PathBuf,
    pub seed: u64,
}

/// Files written by one stage, relative to the output directory.
type Outputs = Vec<String>;

fn io_err(stage: &'static str, path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::stage(stage, format!("{}: {e}", path.display()))
}

fn write_bytes(ctx: &Ctx, stage: &'static str, rel: &str, bytes: &[u8], outputs: &mut Outputs) -> Result<(), CliError> {
    let path = ctx.out.join(rel);
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| io_err(stage, dir, e))?;
    }
    std::fs::write(&path, bytes).map_err(|e| io_err(stage, &path, e))?;
    outputs.push(rel.to_string());
    Ok(())
}

fn write_json<T: Serialize + ?Sized>(
    ctx: &Ctx,
    stage: &'static str,
    rel: &str,
    value: &T,
    outputs: &mut Outputs,
) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::stage(stage, e))?;
    text.push('\n');
    write_bytes(ctx, stage, rel, text.as_bytes(), outputs)
}

fn write_table(
    ctx: &Ctx,
    stage: &'static str,
    rel: &str,
    header: &[&str],
    rows: &[Vec<String>],
    outputs: &mut Outputs,
) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(|e| CliError::stage(stage, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| CliError::stage(stage, e))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::stage(stage, e))?;
    write_bytes(ctx, stage, rel, &bytes, outputs)
}

/// Reads an upstream artifact, naming the stage that produces it when absent.
fn read_json<T: DeserializeOwned>(ctx: &Ctx, stage: &'static str, rel: &str, producer: &str) -> Result<T, CliError> {
    let path = ctx.out.join(rel);
    let bytes = std::fs::read(&path).map_err(|_| {
        CliError::stage(
            stage,
            format!("missing {}; run `beliefnet {producer}` first", path.display()),
        )
    })?;
    serde_json::from_slice(&bytes).map_err(|e| io_err(stage, &path, e))
}

fn num(v: f64) -> String {
    if v.is_finite() {
        v.to_string()
    } else {
        "NA".into()
    }
}

/// Directory-safe name of a grouping variable.
pub fn slug(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn finish(ctx: &Ctx, stage: &'static str, inputs: &[(String, PathBuf)], outputs: &Outputs) -> Result<(), CliError> {
    record_stage(&ctx.out, Some(&ctx.loaded), ctx.seed, stage, inputs, outputs)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GroupMeta {
    variable: String,
    levels: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct DatasetMeta {
    items: Vec<ItemMeta>,
    groups: Vec<GroupMeta>,
    n_rows: usize,
}

fn save_dataset(
    ctx: &Ctx,
    stage: &'static str,
    stem: &str,
    ds: &SurveyDataset,
    outputs: &mut Outputs,
) -> Result<(), CliError> {
    let mut buf = Vec::new();
    ds.write_csv(&mut buf).map_err(|e| CliError::stage(stage, e))?;
    write_bytes(ctx, stage, &format!("{stem}.csv"), &buf, outputs)?;
    let meta = DatasetMeta {
        items: ds.items().to_vec(),
        groups: ds
            .groups()
            .iter()
            .map(|(k, g)| GroupMeta {
                variable: k.clone(),
                levels: g.levels.clone(),
            })
            .collect(),
        n_rows: ds.n_rows(),
    };
    write_json(ctx, stage, &format!("{stem}_meta.json"), &meta, outputs)
}

fn load_dataset(ctx: &Ctx, stage: &'static str, stem: &str, producer: &str) -> Result<SurveyDataset, CliError> {
    let meta: DatasetMeta = read_json(ctx, stage, &format!("{stem}_meta.json"), producer)?;
    let path = ctx.out.join(format!("{stem}.csv"));
    let file = std::fs::File::open(&path).map_err(|_| {
        CliError::stage(stage, format!("missing {}; run `beliefnet {producer}` first", path.display()))
    })?;
    let label_cols: Vec<String> = meta.groups.iter().map(|g| group_label_column(&g.variable)).collect();
    let raw = read_survey(file, &meta.items, &[], &label_cols).map_err(|e| io_err(stage, &path, e))?;
    let mut ds = SurveyDataset::new(meta.items.clone(), raw.rows().to_vec()).map_err(|e| CliError::stage(stage, e))?;
    for (g, col) in meta.groups.iter().zip(&label_cols) {
        let read = &raw.groups()[col];
        let assignment = (0..raw.n_rows())
            .map(|r| read.label(r).and_then(|l| g.levels.iter().position(|x| x == l)))
            .collect();
        let column = GroupColumn {
            levels: g.levels.clone(),
            assignment,
        };
        ds = ds
            .with_group_column(g.variable.clone(), column)
            .map_err(|e| CliError::stage(stage, e))?;
    }
    Ok(ds)
}

pub fn run_ingest(ctx: &Ctx) -> Result<(), CliError> {
    const STAGE: &str = "ingest";
    let c = &ctx.loaded.config;
    let survey = ctx.loaded.resolve(&c.data.survey);
    let mut ds = load_survey_with_labels(&survey, &c.items, &c.data.missing_codes, &c.data.label_columns)
        .map_err(|e| io_err(STAGE, &survey, e))?;
    ds = rescale_unit(&ds).map_err(|e| CliError::stage(STAGE, e))?;
    for g in &c.groupings {
        ds = derive_groups(&ds, g).map_err(|e| CliError::stage(STAGE, e))?;
    }
    let mut outputs = Vec::new();
    save_dataset(ctx, STAGE, "ingest/dataset", &ds, &mut outputs)?;
    let inputs = vec![(c.data.survey.display().to_string(), survey)];
    finish(ctx, STAGE, &inputs, &outputs)
}

pub fn run_uva(ctx: &Ctx) -> Result<(), CliError> {
    const STAGE: &str = "uva";
    let ds = load_dataset(ctx, STAGE, "ingest/dataset", "ingest")?;
    let (reduced, report) = uva_iterate(&ds, &ctx.loaded.config.uva).map_err(|e| CliError::stage(STAGE, e))?;
    for r in &report.removed {
        log::info!("uva removed `{}` in round {}: {}", r.item, r.round, r.reason);
    }
    let mut outputs = Vec::new();
    write_json(ctx, STAGE, "uva/report.json", &report, &mut outputs)?;
    save_dataset(ctx, STAGE, "uva/reduced", &reduced, &mut outputs)?;
    finish(ctx, STAGE, &[], &outputs)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupModel {
    pub label: String,
    pub n: usize,
    pub unstable: bool,
    pub dropped_incomplete: usize,
    pub model: GGMModel,
}

/// The per-group networks used downstream of `fit`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectedModels {
    pub grouping: String,
    /// Suite model id; 0 when only one group was present.
    pub model_id: u8,
    pub constraint: Option<Constraint>,
    pub empty: bool,
    pub groups: Vec<GroupModel>,
}

#[derive(Debug, Serialize)]
struct ModelOutcome<'a> {
    model_id: u8,
    constraint: Constraint,
    empty: bool,
    fit: Option<&'a MultigroupFit>,
    error: Option<String>,
}

#[derive(Debug, Serialize)]
struct SingleGroupFit<'a> {
    group: &'a str,
    model: &'a GGMModel,
    steps: &'a [StepRecord],
}

fn group_split(ds: &SurveyDataset, var: &str, stage: &'static str) -> Result<GroupSplit, CliError> {
    let split = split_by_group(ds, var).map_err(|e| CliError::stage(stage, e))?;
    if split.groups.is_empty() {
        return Err(CliError::stage(stage, format!("grouping `{var}` has no complete respondents")));
    }
    Ok(split)
}

pub fn run_fit(ctx: &Ctx) -> Result<(), CliError> {
    const STAGE: &str = "fit";
    let c = &ctx.loaded.config;
    let ds = load_dataset(ctx, STAGE, "uva/reduced", "uva")?;
    let mut outputs = Vec::new();
    for var in fit_groupings(c) {
        let split = group_split(&ds, &var, STAGE)?;
        let dir = format!("fit/{}", slug(&var));
        let data: Vec<GroupData> = split
            .groups
            .iter()
            .map(|g| GroupData::from_dataset(g.label.clone(), &g.data))
            .collect::<beliefnet::Result<_>>()
            .map_err(|e| CliError::stage(STAGE, format!("grouping `{var}`: {e}")))?;
        let group_models = |models: &[GGMModel]| -> Vec<GroupModel> {
            split
                .groups
                .iter()
                .zip(models)
                .map(|(g, m)| GroupModel {
                    label: g.label.clone(),
                    n: g.data.n_rows(),
                    unstable: g.unstable,
                    dropped_incomplete: g.dropped_incomplete,
                    model: m.clone(),
                })
                .collect()
        };
        let header = ["model_id", "constraint", "empty", "loglik", "n_params", "bic", "rank", "selected", "status"];
        if data.len() < 2 {
            log::warn!("grouping `{var}` has a single group; fitting one step-up model");
            let g = &data[0];
            let (model, steps) = stepup_search_traced(&g.cov, g.n, c.fit.alpha, &g.nodes)
                .map_err(|e| CliError::stage(STAGE, format!("grouping `{var}`: {e}")))?;
            let fit = model.fit.expect("fitted model");
            let row = vec![
                "0".into(),
                "single_group".into(),
                "false".into(),
                num(fit.loglik),
                fit.n_params.to_string(),
                num(fit.bic),
                "1".into(),
                "true".into(),
                "ok".into(),
            ];
            write_table(ctx, STAGE, &format!("{dir}/comparison.csv"), &header, &[row], &mut outputs)?;
            let single = SingleGroupFit {
                group: &g.label,
                model: &model,
                steps: &steps,
            };
            write_json(ctx, STAGE, &format!("{dir}/models.json"), &[single], &mut outputs)?;
            let selected = SelectedModels {
                grouping: var.clone(),
                model_id: 0,
                constraint: None,
                empty: false,
                groups: group_models(std::slice::from_ref(&model)),
            };
            write_json(ctx, STAGE, &format!("{dir}/selected.json"), &selected, &mut outputs)?;
            continue;
        }
        let results = fit_model_suite(&data, &c.fit.models, c.fit.alpha);
        let fits: Vec<MultigroupFit> = results.iter().filter_map(|(_, r)| r.as_ref().ok().cloned()).collect();
        for (id, r) in &results {
            if let Err(e) = r {
                log::warn!("grouping `{var}`: model {id} failed: {e}");
            }
        }
        if fits.is_empty() {
            let reasons: Vec<String> = results
                .iter()
                .filter_map(|(id, r)| r.as_ref().err().map(|e| format!("model {id}: {e}")))
                .collect();
            return Err(CliError::stage(STAGE, format!("grouping `{var}`: {}", reasons.join("; "))));
        }
        let ranked = select_best(&fits).map_err(|e| CliError::stage(STAGE, e))?;
        let chosen_id = c.fit.use_model.unwrap_or(ranked[0].model_id);
        let chosen = fits.iter().find(|f| f.model_id == chosen_id).ok_or_else(|| {
            CliError::stage(STAGE, format!("grouping `{var}`: configured model {chosen_id} failed to fit"))
        })?;
        let rows: Vec<Vec<String>> = results
            .iter()
            .map(|(id, r)| {
                let (constraint, empty) = Constraint::from_model_id(*id).expect("validated id");
                match r {
                    Ok(f) => vec![
                        id.to_string(),
                        constraint.as_str().into(),
                        empty.to_string(),
                        num(f.joint_fit.loglik),
                        f.joint_fit.n_params.to_string(),
                        num(f.joint_fit.bic),
                        (ranked.iter().position(|x| x.model_id == *id).expect("ranked") + 1).to_string(),
                        (*id == chosen_id).to_string(),
                        "ok".into(),
                    ],
                    Err(e) => vec![
                        id.to_string(),
                        constraint.as_str().into(),
                        empty.to_string(),
                        "NA".into(),
                        "NA".into(),
                        "NA".into(),
                        "NA".into(),
                        "false".into(),
                        format!("error: {e}"),
                    ],
                }
            })
            .collect();
        write_table(ctx, STAGE, &format!("{dir}/comparison.csv"), &header, &rows, &mut outputs)?;
        let outcomes: Vec<ModelOutcome> = results
            .iter()
            .map(|(id, r)| {
                let (constraint, empty) = Constraint::from_model_id(*id).expect("validated id");
                ModelOutcome {
                    model_id: *id,
                    constraint,
                    empty,
                    fit: r.as_ref().ok(),
                    error: r.as_ref().err().map(|e| e.to_string()),
                }
            })
            .collect();
        write_json(ctx, STAGE, &format!("{dir}/models.json"), &outcomes, &mut outputs)?;
        let selected = SelectedModels {
            grouping: var.clone(),
            model_id: chosen.model_id,
            constraint: Some(chosen.constraint),
            empty: chosen.empty,
            groups: group_models(&chosen.models),
        };
        write_json(ctx, STAGE, &format!("{dir}/selected.json"), &selected, &mut outputs)?;
    }
    finish(ctx, STAGE, &[], &outputs)
}

fn load_selected(ctx: &Ctx, stage: &'static str, var: &str) -> Result<SelectedModels, CliError> {
    read_json(ctx, stage, &format!("fit/{}/selected.json", slug(var)), "fit")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupThermo {
    pub group: String,
    pub report: ThermoReport,
}

pub fn run_thermo(ctx: &Ctx) -> Result<(), CliError> {
    const STAGE: &str = "thermo";
    let c = &ctx.loaded.config;
    let ds = load_dataset(ctx, STAGE, "uva/reduced", "uva")?;
    let mut outputs = Vec::new();
    for var in fit_groupings(c) {
        let selected = load_selected(ctx, STAGE, &var)?;
        let split = group_split(&ds, &var, STAGE)?;
        let mut reports = Vec::new();
        for gm in &selected.groups {
            let sample = split
                .groups
                .iter()
                .find(|g| g.label == gm.label)
                .ok_or_else(|| CliError::stage(STAGE, format!("group `{}` of `{var}` has no data", gm.label)))?;
            let report = thermo_report(&gm.model, &sample.data)
                .map_err(|e| CliError::stage(STAGE, format!("group `{}`: {e}", gm.label)))?;
            reports.push(GroupThermo {
                group: gm.label.clone(),
                report,
            });
        }
        let rows: Vec<Vec<String>> = reports
            .iter()
            .map(|r| {
                vec![
                    r.group.clone(),
                    num(r.report.mean_energy),
                    num(r.report.abs_mean_energy),
                    num(r.report.temperature),
                    r.report.per_respondent_energy.len().to_string(),
                ]
            })
            .collect();
        let stem = format!("thermo/{}", slug(&var));
        write_table(
            ctx,
            STAGE,
            &format!("{stem}.csv"),
            &["group", "mean_energy", "abs_mean_energy", "temperature", "n"],
            &rows,
            &mut outputs,
        )?;
        write_json(ctx, STAGE, &format!("{stem}.json"), &reports, &mut outputs)?;
    }
    finish(ctx, STAGE, &[], &outputs)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupInfluence {
    pub group: String,
    pub nodes: Vec<NodeInfluence>,
}

const INFLUENCE_HEADER: [&str; 9] = [
    "group",
    "node",
    "weighted_degree",
    "kshell",
    "strength",
    "gic",
    "gsm_self",
    "gsm_global",
    "gsm",
];

fn influence_rows(tables: &[GroupInfluence]) -> Vec<Vec<String>> {
    tables
        .iter()
        .flat_map(|t| {
            t.nodes.iter().map(move |n| {
                vec![
                    t.group.clone(),
                    n.node.clone(),
                    num(n.weighted_degree),
                    n.kshell.to_string(),
                    num(n.strength),
                    num(n.gic),
                    num(n.gsm_self),
                    num(n.gsm_global),
                    num(n.gsm),
                ]
            })
        })
        .collect()
}

pub fn run_influence(ctx: &Ctx) -> Result<(), CliError> {
    const STAGE: &str = "influence";
    let c = &ctx.loaded.config;
    let mut outputs = Vec::new();
    for var in fit_groupings(c) {
        let selected = load_selected(ctx, STAGE, &var)?;
        let tables: Vec<GroupInfluence> = selected
            .groups
            .iter()
            .map(|gm| {
                influence_table(&gm.model, &c.influence)
                    .map(|nodes| GroupInfluence {
                        group: gm.label.clone(),
                        nodes,
                    })
                    .map_err(|e| CliError::stage(STAGE, format!("group `{}`: {e}", gm.label)))
            })
            .collect::<Result<_, _>>()?;
        let stem = format!("influence/{}", slug(&var));
        write_table(ctx, STAGE, &format!("{stem}.csv"), &INFLUENCE_HEADER, &influence_rows(&tables), &mut outputs)?;
        write_json(ctx, STAGE, &format!("{stem}.json"), &tables, &mut outputs)?;
    }
    finish(ctx, STAGE, &[], &outputs)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CorrelationOutput {
    gic: Vec<InfluenceIndicatorCorrelation>,
    gsm: Vec<InfluenceIndicatorCorrelation>,
}

fn per_country(tables: Vec<GroupInfluence>) -> BTreeMap<String, Vec<NodeInfluence>> {
    tables.into_iter().map(|t| (t.group, t.nodes)).collect()
}

pub fn run_correlate(ctx: &Ctx) -> Result<(), CliError> {
    const STAGE: &str = "correlate";
    let c = &ctx.loaded.config;
    let cc = c
        .correlate
        .as_ref()
        .ok_or_else(|| CliError::Config("the config has no [correlate] section".into()))?;
    let tables: Vec<GroupInfluence> = read_json(
        ctx,
        STAGE,
        &format!("influence/{}.json", slug(&cc.country_grouping)),
        "influence",
    )?;
    let countries = per_country(tables);
    let mut indicators = IndicatorTable::new();
    let mut inputs = Vec::new();
    for f in &cc.indicator_files {
        let path = ctx.loaded.resolve(f);
        let t = load_indicators(&path).map_err(|e| io_err(STAGE, &path, e))?;
        indicators.merge(t).map_err(|e| CliError::stage(STAGE, e))?;
        inputs.push((f.display().to_string(), path));
    }
    if !cc.worldbank.is_empty() {
        let transport =
            HttpTransport::new(std::time::Duration::from_secs(30)).map_err(|e| CliError::stage(STAGE, e))?;
        let client = WorldBankClient::new(transport);
        for w in &cc.worldbank {
            let t = client
                .fetch(&w.indicator, &w.countries, w.first_year..=w.last_year)
                .map_err(|e| CliError::stage(STAGE, format!("World Bank `{}`: {e}", w.indicator)))?;
            indicators.merge(t).map_err(|e| CliError::stage(STAGE, e))?;
        }
    }
    let mut outputs = Vec::new();
    let mut buf = Vec::new();
    indicators.write_csv(&mut buf).map_err(|e| CliError::stage(STAGE, e))?;
    write_bytes(ctx, STAGE, "correlate/indicators.csv", &buf, &mut outputs)?;
    let run = |m| correlate_influence(&countries, &indicators, &cc.pairs, cc.base_year, &cc.lags, m);
    let result = CorrelationOutput {
        gic: run(InfluenceMetric::Gic),
        gsm: run(InfluenceMetric::Gsm),
    };
    for (rel, rows) in [
        ("correlate/correlations.csv", &result.gic),
        ("correlate/correlations_gsm.csv", &result.gsm),
    ] {
        let mut buf = Vec::new();
        write_correlations(&mut buf, rows).map_err(|e| CliError::stage(STAGE, e))?;
        write_bytes(ctx, STAGE, rel, &buf, &mut outputs)?;
    }
    write_json(ctx, STAGE, "correlate/correlations.json", &result, &mut outputs)?;
    finish(ctx, STAGE, &inputs, &outputs)
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = if v.len() > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        f64::NAN
    };
    (mean, sd)
}

pub fn run_report(ctx: &Ctx) -> Result<(), CliError> {
    const STAGE: &str = "report";
    let c = &ctx.loaded.config;
    let mut outputs = Vec::new();
    let mut summary: Vec<(String, [f64; 6])> = Vec::new();
    let mut summary_rows = Vec::new();
    for var in fit_groupings(c) {
        let s = slug(&var);
        let thermo: Vec<GroupThermo> = read_json(ctx, STAGE, &format!("thermo/{s}.json"), "thermo")?;
        let influence: Vec<GroupInfluence> = read_json(ctx, STAGE, &format!("influence/{s}.json"), "influence")?;
        for t in &thermo {
            let inf = influence
                .iter()
                .find(|i| i.group == t.group)
                .ok_or_else(|| CliError::stage(STAGE, format!("no influence table for group `{}`", t.group)))?;
            let gic: Vec<f64> = inf.nodes.iter().map(|n| n.gic).collect();
            let gsm: Vec<f64> = inf.nodes.iter().map(|n| n.gsm).collect();
            let (mean_gsm, sd_gsm) = mean_sd(&gsm);
            let vals = [
                t.report.mean_energy,
                t.report.abs_mean_energy,
                t.report.temperature,
                mean_sd(&gic).0,
                mean_gsm,
                sd_gsm,
            ];
            let mut row = vec![var.clone(), t.group.clone()];
            row.extend(vals.iter().map(|v| num(*v)));
            summary_rows.push(row);
            summary.push((format!("{var}:{}", t.group), vals));
        }
        write_table(
            ctx,
            STAGE,
            &format!("report/influence_{s}.csv"),
            &INFLUENCE_HEADER,
            &influence_rows(&influence),
            &mut outputs,
        )?;
    }
    let mut header = vec!["grouping", "group"];
    header.extend(crate::config::SUMMARY_COLUMNS);
    write_table(ctx, STAGE, "report/summary.csv", &header, &summary_rows, &mut outputs)?;

    for sc in &c.report.scatter {
        let col = |name: &str| crate::config::SUMMARY_COLUMNS.iter().position(|c| *c == name).expect("validated");
        let (xi, yi) = (col(&sc.x), col(&sc.y));
        let points: Vec<(f64, f64)> = summary.iter().map(|(_, v)| (v[xi], v[yi])).collect();
        let labels: Vec<String> = summary.iter().map(|(l, _)| l.clone()).collect();
        let stem = format!("report/scatter_{}_vs_{}", sc.y, sc.x);
        write_scatter(ctx, &stem, &format!("{} vs {}", sc.y, sc.x), &sc.x, &sc.y, &points, &labels, &mut outputs)?;
    }

    if let Some(cc) = c.correlate.as_ref().filter(|cc| !cc.pairs.is_empty()) {
        let corr: CorrelationOutput = read_json(ctx, STAGE, "correlate/correlations.json", "correlate")?;
        let rows: Vec<Vec<String>> = [("gic", &corr.gic), ("gsm", &corr.gsm)]
            .iter()
            .flat_map(|(metric, list)| {
                list.iter().map(move |r| {
                    let (rv, pv) = r
                        .result
                        .as_ref()
                        .map_or(("NA".to_string(), "NA".to_string()), |x| (num(x.r), num(x.p)));
                    vec![
                        metric.to_string(),
                        r.belief.clone(),
                        r.indicator.clone(),
                        r.lag_years.to_string(),
                        rv,
                        pv,
                        r.n.to_string(),
                        r.skipped.clone().unwrap_or_default(),
                    ]
                })
            })
            .collect();
        write_table(
            ctx,
            STAGE,
            "report/correlations.csv",
            &["metric", "belief", "indicator", "lag", "r", "p", "n", "note"],
            &rows,
            &mut outputs,
        )?;
        if c.report.correlation_scatter {
            let path = ctx.out.join("correlate/indicators.csv");
            let file = std::fs::File::open(&path).map_err(|_| {
                CliError::stage(STAGE, format!("missing {}; run `beliefnet correlate` first", path.display()))
            })?;
            let indicators = read_indicators(file).map_err(|e| io_err(STAGE, &path, e))?;
            let tables: Vec<GroupInfluence> = read_json(
                ctx,
                STAGE,
                &format!("influence/{}.json", slug(&cc.country_grouping)),
                "influence",
            )?;
            let metric = c.report.correlation_metric;
            for (belief, indicator) in &cc.pairs {
                for &lag in &cc.lags {
                    let year = cc.base_year - lag;
                    let mut points = Vec::new();
                    let mut labels = Vec::new();
                    for t in &tables {
                        let Some(node) = t.nodes.iter().find(|n| &n.node == belief) else { continue };
                        let Some(y) = indicators.get(&t.group, indicator, year) else { continue };
                        let x = match metric {
                            InfluenceMetric::Gic => node.gic,
                            InfluenceMetric::Gsm => node.gsm,
                        };
                        points.push((x, y));
                        labels.push(t.group.clone());
                    }
                    let mname = match metric {
                        InfluenceMetric::Gic => "GIC",
                        InfluenceMetric::Gsm => "GSM",
                    };
                    let stem = format!("report/scatter_{}_{}_lag{lag}", slug(belief), slug(indicator));
                    let title = format!("{belief} {mname} vs {indicator} ({year})");
                    write_scatter(
                        ctx,
                        &stem,
                        &title,
                        &format!("{belief} {mname}"),
                        indicator,
                        &points,
                        &labels,
                        &mut outputs,
                    )?;
                }
            }
        }
    }
    finish(ctx, STAGE, &[], &outputs)
}

#[allow(clippy::too_many_arguments)]
fn write_scatter(
    ctx: &Ctx,
    stem: &str,
    title: &str,
    x_label: &str,
    y_label: &str,
    points: &[(f64, f64)],
    labels: &[String],
    outputs: &mut Outputs,
) -> Result<(), CliError> {
    const STAGE: &str = "report";
    let rows: Vec<Vec<String>> = points
        .iter()
        .zip(labels)
        .map(|((x, y), l)| vec![l.clone(), num(*x), num(*y)])
        .collect();
    write_table(ctx, STAGE, &format!("{stem}.csv"), &["label", "x", "y"], &rows, outputs)?;
    let svg = scatter_svg(title, x_label, y_label, points, labels);
    write_bytes(ctx, STAGE, &format!("{stem}.svg"), svg.as_bytes(), outputs)
}
