//! Survey ingestion: loading delimited files, rescaling belief items to the
//! unit interval, deriving grouping labels and partitioning respondents.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which part of the belief system an item measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupportGroup {
    RegimePerformance,
    RegimePrinciples,
    RegimeInstitutions,
    PoliticalFigures,
    Grouping,
}

/// Theoretical bounds of a response scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleBounds {
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemMeta {
    pub name: String,
    /// `None` for items without a theoretical scale (e.g. simulated data).
    #[serde(default)]
    pub scale: Option<ScaleBounds>,
    pub support_group: SupportGroup,
}

impl ItemMeta {
    pub fn belief(name: impl Into<String>, min: f64, max: f64, group: SupportGroup) -> Self {
        ItemMeta {
            name: name.into(),
            scale: Some(ScaleBounds { min, max }),
            support_group: group,
        }
    }

    pub fn grouping(name: impl Into<String>) -> Self {
        ItemMeta {
            name: name.into(),
            scale: None,
            support_group: SupportGroup::Grouping,
        }
    }

    pub fn is_belief(&self) -> bool {
        self.support_group != SupportGroup::Grouping
    }
}

fn validate_schema(items: &[ItemMeta]) -> Result<()> {
    let mut seen = std::collections::BTreeSet::new();
    for it in items {
        if !seen.insert(it.name.as_str()) {
            return Err(Error::Schema(format!("duplicate item name `{}`", it.name)));
        }
        if let Some(b) = it.scale {
            if !(b.min < b.max) {
                return Err(Error::Schema(format!(
                    "item `{}` has scale_min {} >= scale_max {}",
                    it.name, b.min, b.max
                )));
            }
        }
    }
    Ok(())
}

/// Per-respondent labels for one grouping variable; `levels` fixes label order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupColumn {
    pub levels: Vec<String>,
    pub assignment: Vec<Option<usize>>,
}

impl GroupColumn {
    /// Builds a column from raw text labels; levels are sorted, empty text is unlabeled.
    pub fn from_labels(labels: &[Option<String>]) -> Self {
        let levels: Vec<String> = labels
            .iter()
            .flatten()
            .cloned()
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        let assignment = labels
            .iter()
            .map(|l| l.as_ref().map(|l| levels.binary_search(l).expect("level present")))
            .collect();
        GroupColumn { levels, assignment }
    }

    pub fn label(&self, row: usize) -> Option<&str> {
        self.assignment[row].map(|k| self.levels[k].as_str())
    }
}

/// Respondents x items matrix with item metadata and grouping labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SurveyDataset {
    items: Vec<ItemMeta>,
    rows: Vec<Vec<Option<f64>>>,
    groups: BTreeMap<String, GroupColumn>,
}

impl SurveyDataset {
    pub fn new(items: Vec<ItemMeta>, rows: Vec<Vec<Option<f64>>>) -> Result<Self> {
        validate_schema(&items)?;
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != items.len()) {
            return Err(Error::Schema(format!(
                "row {i} has {} values but the schema lists {} items",
                r.len(),
                items.len()
            )));
        }
        Ok(SurveyDataset {
            items,
            rows,
            groups: BTreeMap::new(),
        })
    }

    /// Builds a dataset of complete rows from a dense matrix.
    pub fn from_matrix(items: Vec<ItemMeta>, data: &DMatrix<f64>) -> Result<Self> {
        let rows = data
            .row_iter()
            .map(|r| r.iter().map(|&v| Some(v)).collect())
            .collect();
        Self::new(items, rows)
    }

    pub fn items(&self) -> &[ItemMeta] {
        &self.items
    }

    pub fn item_names(&self) -> Vec<String> {
        self.items.iter().map(|i| i.name.clone()).collect()
    }

    pub fn rows(&self) -> &[Vec<Option<f64>>] {
        &self.rows
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn groups(&self) -> &BTreeMap<String, GroupColumn> {
        &self.groups
    }

    pub fn item_index(&self, name: &str) -> Option<usize> {
        self.items.iter().position(|i| i.name == name)
    }

    pub fn belief_indices(&self) -> Vec<usize> {
        (0..self.items.len()).filter(|&i| self.items[i].is_belief()).collect()
    }

    pub fn with_group_column(mut self, name: impl Into<String>, column: GroupColumn) -> Result<Self> {
        if column.assignment.len() != self.rows.len() {
            return Err(Error::Schema(format!(
                "group column has {} labels for {} rows",
                column.assignment.len(),
                self.rows.len()
            )));
        }
        if column.assignment.iter().flatten().any(|&k| k >= column.levels.len()) {
            return Err(Error::Schema("group column refers to an unknown level".into()));
        }
        self.groups.insert(name.into(), column);
        Ok(self)
    }

    /// Dataset restricted to the named items (in the given order); group columns kept.
    pub fn select_items(&self, names: &[String]) -> Result<Self> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| {
                self.item_index(n)
                    .ok_or_else(|| Error::Schema(format!("unknown item `{n}`")))
            })
            .collect::<Result<_>>()?;
        let items = idx.iter().map(|&i| self.items[i].clone()).collect();
        let rows = self
            .rows
            .iter()
            .map(|r| idx.iter().map(|&i| r[i]).collect())
            .collect();
        let mut ds = SurveyDataset::new(items, rows)?;
        ds.groups = self.groups.clone();
        Ok(ds)
    }

    /// Dataset restricted to belief items, dropping group columns.
    pub fn beliefs_only(&self) -> Self {
        let idx = self.belief_indices();
        SurveyDataset {
            items: idx.iter().map(|&i| self.items[i].clone()).collect(),
            rows: self
                .rows
                .iter()
                .map(|r| idx.iter().map(|&i| r[i]).collect())
                .collect(),
            groups: BTreeMap::new(),
        }
    }

    /// Dense matrix of the rows with no missing value (listwise deletion).
    pub fn complete_matrix(&self) -> DMatrix<f64> {
        let complete: Vec<&Vec<Option<f64>>> =
            self.rows.iter().filter(|r| r.iter().all(Option::is_some)).collect();
        DMatrix::from_fn(complete.len(), self.items.len(), |i, j| {
            complete[i][j].expect("complete row")
        })
    }

    /// Writes the dataset as CSV: item columns followed by one column per grouping label set.
    /// Missing values are written as empty cells.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = self.item_names();
        header.extend(self.groups.keys().map(|k| group_label_column(k)));
        w.write_record(&header)?;
        for (r, row) in self.rows.iter().enumerate() {
            let mut rec: Vec<String> = row
                .iter()
                .map(|v| v.map(|x| format!("{x}")).unwrap_or_default())
                .collect();
            rec.extend(
                self.groups
                    .values()
                    .map(|g| g.label(r).unwrap_or_default().to_string()),
            );
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Name of the CSV column carrying derived labels of a grouping variable.
pub fn group_label_column(variable: &str) -> String {
    format!("group:{variable}")
}

/// Loads a comma-separated file with a header row. Cells equal to one of
/// `missing_codes` (or empty) become missing.
pub fn load_survey(path: &Path, schema: &[ItemMeta], missing_codes: &[f64]) -> Result<SurveyDataset> {
    let file = std::fs::File::open(path)?;
    read_survey(file, schema, missing_codes, &[])
}

/// Like [`load_survey`], additionally reading `label_columns` as text grouping
/// labels (e.g. a country code column).
pub fn load_survey_with_labels(
    path: &Path,
    schema: &[ItemMeta],
    missing_codes: &[f64],
    label_columns: &[String],
) -> Result<SurveyDataset> {
    let file = std::fs::File::open(path)?;
    read_survey(file, schema, missing_codes, label_columns)
}

pub fn read_survey<R: Read>(
    reader: R,
    schema: &[ItemMeta],
    missing_codes: &[f64],
    label_columns: &[String],
) -> Result<SurveyDataset> {
    validate_schema(schema)?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = match rdr.headers() {
        Ok(h) => h.clone(),
        Err(e) if matches!(e.kind(), csv::ErrorKind::Io(_)) => return Err(e.into()),
        Err(_) => return Err(Error::NoData),
    };
    if header.is_empty() {
        return Err(Error::NoData);
    }
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Schema(format!("missing column `{name}`")))
    };
    let item_cols: Vec<usize> = schema.iter().map(|it| find(&it.name)).collect::<Result<_>>()?;
    let label_cols: Vec<usize> = label_columns.iter().map(|n| find(n)).collect::<Result<_>>()?;

    let mut rows = Vec::new();
    let mut labels: Vec<Vec<Option<String>>> = vec![Vec::new(); label_cols.len()];
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let mut row = Vec::with_capacity(schema.len());
        for (it, &c) in schema.iter().zip(&item_cols) {
            let cell = rec.get(c).unwrap_or("").trim();
            if cell.is_empty() {
                row.push(None);
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row: r + 1,
                column: it.name.clone(),
                message: format!("cannot parse {cell:?} as a number"),
            })?;
            row.push(if missing_codes.contains(&v) { None } else { Some(v) });
        }
        rows.push(row);
        for (k, &c) in label_cols.iter().enumerate() {
            let cell = rec.get(c).unwrap_or("").trim();
            labels[k].push((!cell.is_empty()).then(|| cell.to_string()));
        }
    }
    if rows.is_empty() {
        return Err(Error::NoData);
    }
    let mut ds = SurveyDataset::new(schema.to_vec(), rows)?;
    for (name, labs) in label_columns.iter().zip(&labels) {
        ds = ds.with_group_column(name.clone(), GroupColumn::from_labels(labs))?;
    }
    Ok(ds)
}

/// Maps every belief item onto [0, 1] using its theoretical bounds.
pub fn rescale_unit(ds: &SurveyDataset) -> Result<SurveyDataset> {
    let mut out = ds.clone();
    for (j, it) in ds.items.iter().enumerate() {
        if !it.is_belief() {
            continue;
        }
        let b = it
            .scale
            .ok_or_else(|| Error::Schema(format!("belief item `{}` has no scale bounds", it.name)))?;
        let span = b.max - b.min;
        for row in out.rows.iter_mut() {
            if let Some(v) = row[j] {
                if v < b.min || v > b.max {
                    return Err(Error::Range {
                        item: it.name.clone(),
                        value: v,
                        min: b.min,
                        max: b.max,
                    });
                }
                row[j] = Some((v - b.min) / span);
            }
        }
        out.items[j].scale = Some(ScaleBounds { min: 0.0, max: 1.0 });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupingKind {
    /// Each distinct code is its own group; `bin_edges` optionally lists codes
    /// matched one-to-one with `labels`.
    CategoricalPassthrough,
    /// Half-open bins labelled from their edges (`0-30`, ..., `90+`).
    FixedBins,
    /// Half-open bins with user-supplied labels.
    LabeledBins,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupingSpec {
    pub variable: String,
    pub kind: GroupingKind,
    #[serde(default)]
    pub bin_edges: Vec<f64>,
    #[serde(default)]
    pub labels: Vec<String>,
}

fn fmt_edge(x: f64) -> String {
    format!("{x}")
}

impl GroupingSpec {
    /// Five ideological groups on an 11-point left-right scale.
    pub fn lr_scale_default(variable: impl Into<String>) -> Self {
        GroupingSpec {
            variable: variable.into(),
            kind: GroupingKind::LabeledBins,
            bin_edges: vec![0.0, 2.0, 5.0, 6.0, 9.0],
            labels: ["Far Left", "Left", "Center", "Right", "Far Right"]
                .map(String::from)
                .to_vec(),
        }
    }

    pub fn fixed_bins(variable: impl Into<String>, edges: Vec<f64>) -> Self {
        GroupingSpec {
            variable: variable.into(),
            kind: GroupingKind::FixedBins,
            bin_edges: edges,
            labels: Vec::new(),
        }
    }

    pub fn passthrough(variable: impl Into<String>) -> Self {
        GroupingSpec {
            variable: variable.into(),
            kind: GroupingKind::CategoricalPassthrough,
            bin_edges: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let strictly_increasing = self.bin_edges.windows(2).all(|w| w[0] < w[1]);
        match self.kind {
            GroupingKind::FixedBins | GroupingKind::LabeledBins => {
                if self.bin_edges.is_empty() {
                    return Err(Error::InvalidArgument(format!(
                        "grouping `{}` needs at least one bin edge",
                        self.variable
                    )));
                }
                if !strictly_increasing {
                    return Err(Error::InvalidArgument(format!(
                        "bin edges of `{}` must be strictly increasing",
                        self.variable
                    )));
                }
                if self.kind == GroupingKind::LabeledBins && self.labels.len() != self.bin_edges.len() {
                    return Err(Error::InvalidArgument(format!(
                        "grouping `{}` has {} labels for {} bins",
                        self.variable,
                        self.labels.len(),
                        self.bin_edges.len()
                    )));
                }
            }
            GroupingKind::CategoricalPassthrough => {
                if !self.labels.is_empty() && self.labels.len() != self.bin_edges.len() {
                    return Err(Error::InvalidArgument(format!(
                        "grouping `{}` has {} labels for {} codes",
                        self.variable,
                        self.labels.len(),
                        self.bin_edges.len()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Ordered labels of all groups this spec can produce (for bins and mapped codes).
    pub fn levels(&self) -> Vec<String> {
        match self.kind {
            GroupingKind::LabeledBins => self.labels.clone(),
            GroupingKind::FixedBins => {
                let e = &self.bin_edges;
                (0..e.len())
                    .map(|k| match e.get(k + 1) {
                        Some(hi) => format!("{}-{}", fmt_edge(e[k]), fmt_edge(*hi)),
                        None => format!("{}+", fmt_edge(e[k])),
                    })
                    .collect()
            }
            GroupingKind::CategoricalPassthrough => self.labels.clone(),
        }
    }

    fn bin_of(&self, v: f64) -> Option<usize> {
        let e = &self.bin_edges;
        if v < e[0] {
            return None;
        }
        Some(e.iter().rposition(|&edge| v >= edge).expect("v >= first edge"))
    }
}

/// Adds (or replaces) the group column named after `spec.variable`.
pub fn derive_groups(ds: &SurveyDataset, spec: &GroupingSpec) -> Result<SurveyDataset> {
    spec.validate()?;
    let j = ds
        .item_index(&spec.variable)
        .ok_or_else(|| Error::Schema(format!("unknown grouping variable `{}`", spec.variable)))?;
    let values: Vec<Option<f64>> = ds.rows.iter().map(|r| r[j]).collect();
    let column = match spec.kind {
        GroupingKind::FixedBins | GroupingKind::LabeledBins => GroupColumn {
            levels: spec.levels(),
            assignment: values.iter().map(|v| v.and_then(|v| spec.bin_of(v))).collect(),
        },
        GroupingKind::CategoricalPassthrough if !spec.labels.is_empty() => GroupColumn {
            levels: spec.labels.clone(),
            assignment: values
                .iter()
                .map(|v| v.and_then(|v| spec.bin_edges.iter().position(|&c| c == v)))
                .collect(),
        },
        GroupingKind::CategoricalPassthrough => {
            let mut codes: Vec<f64> = values.iter().flatten().copied().collect();
            codes.sort_by(f64::total_cmp);
            codes.dedup();
            GroupColumn {
                levels: codes.iter().map(|&c| fmt_edge(c)).collect(),
                assignment: values
                    .iter()
                    .map(|v| v.map(|v| codes.iter().position(|&c| c == v).expect("code present")))
                    .collect(),
            }
        }
    };
    ds.clone().with_group_column(spec.variable.clone(), column)
}

/// One group's analysis sample.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSample {
    pub label: String,
    /// Belief items only, complete rows only.
    pub data: SurveyDataset,
    /// Set when the sample has fewer rows than ten times its item count.
    pub unstable: bool,
    /// Labelled rows dropped for missing belief values.
    pub dropped_incomplete: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupSplit {
    pub variable: String,
    /// Groups in level order; levels with no respondents are omitted.
    pub groups: Vec<GroupSample>,
    pub unlabeled: usize,
}

impl GroupSplit {
    pub fn total_rows(&self) -> usize {
        self.groups
            .iter()
            .map(|g| g.data.n_rows() + g.dropped_incomplete)
            .sum::<usize>()
            + self.unlabeled
    }
}

/// Partitions respondents by a group column, keeping belief items and
/// applying listwise deletion inside each group.
pub fn split_by_group(ds: &SurveyDataset, variable: &str) -> Result<GroupSplit> {
    let column = ds
        .groups
        .get(variable)
        .ok_or_else(|| Error::Schema(format!("no group column `{variable}`")))?;
    let beliefs = ds.belief_indices();
    let mut per_level: Vec<(Vec<Vec<Option<f64>>>, usize)> = vec![(Vec::new(), 0); column.levels.len()];
    let mut unlabeled = 0;
    for (r, row) in ds.rows.iter().enumerate() {
        match column.assignment[r] {
            None => unlabeled += 1,
            Some(k) => {
                let vals: Vec<Option<f64>> = beliefs.iter().map(|&i| row[i]).collect();
                if vals.iter().all(Option::is_some) {
                    per_level[k].0.push(vals);
                } else {
                    per_level[k].1 += 1;
                }
            }
        }
    }
    let items: Vec<ItemMeta> = beliefs.iter().map(|&i| ds.items[i].clone()).collect();
    let mut groups = Vec::new();
    for (k, (rows, dropped)) in per_level.into_iter().enumerate() {
        if rows.is_empty() && dropped == 0 {
            continue;
        }
        let unstable = rows.len() < 10 * items.len();
        let label = column.levels[k].clone();
        if unstable {
            log::warn!(
                "group `{label}` of `{variable}` has {} complete rows for {} items; estimates may be unstable",
                rows.len(),
                items.len()
            );
        }
        groups.push(GroupSample {
            label,
            data: SurveyDataset::new(items.clone(), rows)?,
            unstable,
            dropped_incomplete: dropped,
        });
    }
    Ok(GroupSplit {
        variable: variable.to_string(),
        groups,
        unlabeled,
    })
}
