//! Tabular ingestion: CSV + schema to a normalized feature matrix with
//! binary labels, binary sensitive attributes and a seeded train/test split.
//!
//! Numeric columns are min-max scaled to `[0, 1]` with training-split
//! statistics (test rows are clipped after scaling); categorical columns are
//! one-hot encoded with levels sorted lexicographically.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::info;
use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSchema {
    pub target_column: String,
    /// Value of the target column that maps to label 1.
    pub target_positive: String,
    pub sensitive_column: String,
    /// Value of the sensitive column that maps to group a = 1.
    pub sensitive_advantaged: String,
    pub categorical_columns: Vec<String>,
    pub numeric_columns: Vec<String>,
    pub drop_columns: Vec<String>,
    /// Keep only rows whose `filter_column` value is in `filter_values`.
    pub filter_column: Option<String>,
    pub filter_values: Vec<String>,
    /// Cell values treated as missing; rows containing one are rejected.
    pub missing_markers: Vec<String>,
    /// CSV location, resolved relative to the schema file.
    pub data_file: Option<PathBuf>,
}

impl DatasetSchema {
    pub fn new(
        target_column: &str,
        target_positive: &str,
        sensitive_column: &str,
        sensitive_advantaged: &str,
    ) -> Self {
        Self {
            target_column: target_column.into(),
            target_positive: target_positive.into(),
            sensitive_column: sensitive_column.into(),
            sensitive_advantaged: sensitive_advantaged.into(),
            categorical_columns: Vec::new(),
            numeric_columns: Vec::new(),
            drop_columns: Vec::new(),
            filter_column: None,
            filter_values: Vec::new(),
            missing_markers: vec!["?".into(), String::new()],
            data_file: None,
        }
    }

    /// Parses the flat `key = value` format; lists are comma separated and
    /// `#` starts a comment line.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut kv: HashMap<&str, &str> = HashMap::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::parse(origin, format!("line {}: expected `key = value`", no + 1))
            })?;
            if kv.insert(k.trim(), v.trim()).is_some() {
                return Err(Error::parse(origin, format!("duplicate key `{}`", k.trim())));
            }
        }
        let required = |key: &str| -> Result<String> {
            kv.get(key)
                .map(|v| v.to_string())
                .ok_or_else(|| Error::Schema(format!("{}: missing key `{key}`", origin.display())))
        };
        let list = |key: &str| -> Vec<String> {
            kv.get(key)
                .map(|v| {
                    v.split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(String::from)
                        .collect()
                })
                .unwrap_or_default()
        };
        let known = [
            "target_column",
            "target_positive",
            "sensitive_column",
            "sensitive_advantaged",
            "categorical_columns",
            "numeric_columns",
            "drop_columns",
            "filter_column",
            "filter_values",
            "missing_markers",
            "data_file",
        ];
        if let Some(k) = kv.keys().find(|k| !known.contains(k)) {
            return Err(Error::Schema(format!("{}: unknown key `{k}`", origin.display())));
        }
        let mut schema = Self::new(
            &required("target_column")?,
            &required("target_positive")?,
            &required("sensitive_column")?,
            &required("sensitive_advantaged")?,
        );
        schema.categorical_columns = list("categorical_columns");
        schema.numeric_columns = list("numeric_columns");
        schema.drop_columns = list("drop_columns");
        schema.filter_column = kv.get("filter_column").map(|s| s.to_string());
        schema.filter_values = list("filter_values");
        if kv.contains_key("missing_markers") {
            schema.missing_markers = list("missing_markers");
            schema.missing_markers.push(String::new());
        }
        schema.data_file = kv.get("data_file").map(|f| {
            let p = PathBuf::from(f);
            match origin.parent() {
                Some(dir) if p.is_relative() => dir.join(p),
                _ => p,
            }
        });
        schema.validate_self()?;
        Ok(schema)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    fn validate_self(&self) -> Result<()> {
        if self.target_column == self.sensitive_column {
            return Err(Error::Schema("target and sensitive columns must differ".into()));
        }
        for c in self.categorical_columns.iter().chain(&self.numeric_columns) {
            if *c == self.target_column {
                return Err(Error::Schema(format!("target column `{c}` listed as a feature")));
            }
        }
        if let Some(c) = self
            .categorical_columns
            .iter()
            .find(|c| self.numeric_columns.contains(c))
        {
            return Err(Error::Schema(format!("`{c}` is both categorical and numeric")));
        }
        if self.filter_column.is_some() && self.filter_values.is_empty() {
            return Err(Error::Schema("filter_column given without filter_values".into()));
        }
        Ok(())
    }

    fn referenced_columns(&self) -> impl Iterator<Item = &String> {
        [&self.target_column, &self.sensitive_column]
            .into_iter()
            .chain(&self.categorical_columns)
            .chain(&self.numeric_columns)
            .chain(&self.drop_columns)
            .chain(self.filter_column.iter())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!("unknown split `{other}`"))),
        }
    }
}

/// Min/max of each numeric feature over the training split.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    /// `(feature index, column name, min, max)`.
    pub numeric: Vec<(usize, String, f64, f64)>,
}

impl NormStats {
    pub fn scale(min: f64, max: f64, raw: f64) -> f64 {
        if max > min {
            ((raw - min) / (max - min)).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }

    pub fn to_text(&self, seed: u64, split_fraction: f64, report: &LoadReport) -> String {
        let mut out = String::from("# min-max statistics over the training split\n");
        writeln!(out, "seed\t{seed}").unwrap();
        writeln!(out, "split_fraction\t{split_fraction}").unwrap();
        writeln!(out, "rows_kept\t{}", report.rows_kept).unwrap();
        writeln!(out, "rows_filtered\t{}", report.rows_filtered).unwrap();
        writeln!(out, "rows_rejected\t{}", report.rows_rejected).unwrap();
        for (idx, name, min, max) in &self.numeric {
            writeln!(out, "numeric\t{idx}\t{name}\t{min}\t{max}").unwrap();
        }
        out
    }
}

/// Row accounting for one ingestion.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub rows_read: usize,
    pub rows_filtered: usize,
    pub rows_rejected: usize,
    pub rows_kept: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub features: Array2<f64>,
    pub labels: Vec<u8>,
    pub sensitive: Vec<u8>,
    pub split: Vec<Split>,
    pub column_names: Vec<String>,
    /// True for one-hot coordinates.
    pub categorical_mask: Vec<bool>,
    pub stats: NormStats,
    pub report: LoadReport,
    pub seed: u64,
    pub split_fraction: f64,
}

/// Rows of one split, materialized for attacks and training.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSlice {
    pub features: Array2<f64>,
    pub labels: Vec<u8>,
    pub sensitive: Vec<u8>,
    /// Row indices into the parent dataset.
    pub rows: Vec<usize>,
}

impl DataSlice {
    pub fn new(features: Array2<f64>, labels: Vec<u8>, sensitive: Vec<u8>) -> Result<Self> {
        let n = features.nrows();
        if labels.len() != n || sensitive.len() != n {
            return Err(Error::Shape(format!(
                "{} rows, {} labels, {} sensitive values",
                n,
                labels.len(),
                sensitive.len()
            )));
        }
        if labels.iter().chain(&sensitive).any(|&v| v > 1) {
            return Err(Error::Domain("labels and sensitive values must be 0 or 1".into()));
        }
        Ok(Self {
            features,
            labels,
            sensitive,
            rows: (0..n).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels_f64(&self) -> ndarray::Array1<f64> {
        self.labels.iter().map(|&y| f64::from(y)).collect()
    }

    /// Sub-slice by positions within this slice.
    pub fn select(&self, positions: &[usize]) -> DataSlice {
        DataSlice {
            features: self.features.select(Axis(0), positions),
            labels: positions.iter().map(|&i| self.labels[i]).collect(),
            sensitive: positions.iter().map(|&i| self.sensitive[i]).collect(),
            rows: positions.iter().map(|&i| self.rows[i]).collect(),
        }
    }

    pub fn with_features(&self, features: Array2<f64>) -> DataSlice {
        assert_eq!(features.dim(), self.features.dim());
        DataSlice {
            features,
            labels: self.labels.clone(),
            sensitive: self.sensitive.clone(),
            rows: self.rows.clone(),
        }
    }

    pub fn group_counts(&self) -> GroupCounts {
        let mut cells = [[0usize; 2]; 2];
        for (&y, &a) in self.labels.iter().zip(&self.sensitive) {
            cells[y as usize][a as usize] += 1;
        }
        GroupCounts { cells }
    }
}

/// Row counts per `(y, a)` cell, indexed `cells[y][a]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroupCounts {
    pub cells: [[usize; 2]; 2],
}

impl GroupCounts {
    pub fn get(&self, y: u8, a: u8) -> usize {
        self.cells[y as usize][a as usize]
    }

    pub fn total(&self) -> usize {
        self.cells.iter().flatten().sum()
    }

    pub fn group(&self, a: u8) -> usize {
        self.get(0, a) + self.get(1, a)
    }
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn indices(&self, split: Split) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.split[i] == split).collect()
    }

    pub fn slice(&self, split: Split) -> DataSlice {
        let rows = self.indices(split);
        DataSlice {
            features: self.features.select(Axis(0), &rows),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            sensitive: rows.iter().map(|&i| self.sensitive[i]).collect(),
            rows,
        }
    }

    pub fn group_counts(&self, split: Split) -> GroupCounts {
        let mut cells = [[0usize; 2]; 2];
        for i in (0..self.len()).filter(|&i| self.split[i] == split) {
            cells[self.labels[i] as usize][self.sensitive[i] as usize] += 1;
        }
        GroupCounts { cells }
    }

    /// Dataset text format: CSV with `split,label,sensitive,<features...>`
    /// and shortest round-trip decimal values.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(path)
            .map_err(|e| csv_io(path, e))?;
        let mut header = vec!["split".to_string(), "label".into(), "sensitive".into()];
        header.extend(self.column_names.iter().cloned());
        w.write_record(&header)?;
        let mut record = Vec::with_capacity(header.len());
        for i in 0..self.len() {
            record.clear();
            record.push(self.split[i].name().to_string());
            record.push(self.labels[i].to_string());
            record.push(self.sensitive[i].to_string());
            record.extend(self.features.row(i).iter().map(|v| v.to_string()));
            w.write_record(&record)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    /// Ingestion sidecar with the normalization statistics.
    pub fn write_stats(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = self.stats.to_text(self.seed, self.split_fraction, &self.report);
        for (name, &cat) in self.column_names.iter().zip(&self.categorical_mask) {
            if cat {
                writeln!(text, "categorical\t{name}").unwrap();
            }
        }
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Reads a file written by [`LabeledDataset::write_csv`]. When the
    /// conventional `<stem>.stats.tsv` sidecar exists next to it, the
    /// categorical mask, seed and split fraction are restored from it.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut r = csv::ReaderBuilder::new()
            .from_path(path)
            .map_err(|e| csv_io(path, e))?;
        let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
        if header.len() < 4 || header[..3] != ["split", "label", "sensitive"] {
            return Err(Error::parse(path, "not a dataset file (bad header)"));
        }
        let column_names = header[3..].to_vec();
        let width = column_names.len();
        let mut values = Vec::new();
        let (mut labels, mut sensitive, mut split) = (Vec::new(), Vec::new(), Vec::new());
        for (no, rec) in r.records().enumerate() {
            let rec = rec?;
            let bad = |m: &str| Error::parse(path, format!("row {}: {m}", no + 2));
            split.push(rec[0].parse::<Split>().map_err(|_| bad("bad split"))?);
            labels.push(parse_bit(&rec[1]).ok_or_else(|| bad("bad label"))?);
            sensitive.push(parse_bit(&rec[2]).ok_or_else(|| bad("bad sensitive value"))?);
            for cell in rec.iter().skip(3) {
                let v: f64 = cell.parse().map_err(|_| bad("bad feature value"))?;
                if !v.is_finite() {
                    return Err(bad("non-finite feature value"));
                }
                values.push(v);
            }
        }
        let n = labels.len();
        let features = Array2::from_shape_vec((n, width), values)
            .map_err(|e| Error::parse(path, e.to_string()))?;
        let mut ds = LabeledDataset {
            features,
            labels,
            sensitive,
            split,
            column_names,
            categorical_mask: vec![false; width],
            stats: NormStats { numeric: Vec::new() },
            report: LoadReport {
                rows_read: n,
                rows_kept: n,
                ..Default::default()
            },
            seed: 0,
            split_fraction: 0.0,
        };
        let sidecar = stats_sidecar_path(path);
        if sidecar.exists() {
            ds.apply_sidecar(&sidecar)?;
        } else {
            let n_train = ds.split.iter().filter(|&&s| s == Split::Train).count();
            ds.split_fraction = n_train as f64 / n.max(1) as f64;
        }
        Ok(ds)
    }

    fn apply_sidecar(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let bad = |m: &str| Error::parse(path, m.to_string());
        for line in text.lines().filter(|l| !l.starts_with('#') && !l.is_empty()) {
            let f: Vec<&str> = line.split('\t').collect();
            match f[0] {
                "seed" => self.seed = f.get(1).and_then(|v| v.parse().ok()).ok_or_else(|| bad("bad seed"))?,
                "split_fraction" => {
                    self.split_fraction =
                        f.get(1).and_then(|v| v.parse().ok()).ok_or_else(|| bad("bad split fraction"))?
                }
                "rows_filtered" => self.report.rows_filtered = f.get(1).and_then(|v| v.parse().ok()).unwrap_or(0),
                "rows_rejected" => self.report.rows_rejected = f.get(1).and_then(|v| v.parse().ok()).unwrap_or(0),
                "numeric" if f.len() == 5 => {
                    let idx = f[1].parse().map_err(|_| bad("bad feature index"))?;
                    let min = f[3].parse().map_err(|_| bad("bad min"))?;
                    let max = f[4].parse().map_err(|_| bad("bad max"))?;
                    self.stats.numeric.push((idx, f[2].to_string(), min, max));
                }
                "categorical" if f.len() == 2 => {
                    if let Some(i) = self.column_names.iter().position(|c| c == f[1]) {
                        self.categorical_mask[i] = true;
                    }
                }
                _ => {}
            }
        }
        self.report.rows_read = self.report.rows_kept + self.report.rows_filtered + self.report.rows_rejected;
        Ok(())
    }
}

pub fn stats_sidecar_path(dataset_path: &Path) -> PathBuf {
    let stem = dataset_path
        .file_name()
        .and_then(|s| s.to_str())
        .map(|s| s.strip_suffix(".csv").unwrap_or(s))
        .unwrap_or("dataset");
    dataset_path.with_file_name(format!("{stem}.stats.tsv"))
}

fn parse_bit(s: &str) -> Option<u8> {
    match s {
        "0" => Some(0),
        "1" => Some(1),
        _ => None,
    }
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path, format!("{other:?}")),
    }
}

/// Raw cells of the kept rows, one entry per row.
struct ParsedRow {
    label: u8,
    sensitive: u8,
    numeric: Vec<f64>,
    categorical: Vec<String>,
}

/// Loads a CSV with a header row, encodes it per `schema`, and assigns a
/// seeded shuffled train/test split with `split_fraction` of the rows in
/// the training split.
pub fn load_csv(
    path: impl AsRef<Path>,
    schema: &DatasetSchema,
    split_fraction: f64,
    seed: u64,
) -> Result<LabeledDataset> {
    let path = path.as_ref();
    if !(split_fraction > 0.0 && split_fraction < 1.0) {
        return Err(Error::Config(format!(
            "split fraction must lie in (0, 1), got {split_fraction}"
        )));
    }
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_io(path, e))?;
    let header: Vec<String> = reader.headers()?.iter().map(String::from).collect();
    let col = |name: &str| -> Result<usize> {
        header.iter().position(|h| h == name).ok_or_else(|| {
            Error::Schema(format!("column `{name}` not found in {}", path.display()))
        })
    };
    for c in schema.referenced_columns() {
        col(c)?;
    }
    let target = col(&schema.target_column)?;
    let sensitive = col(&schema.sensitive_column)?;
    let filter = schema.filter_column.as_deref().map(col).transpose()?;
    // Feature columns in source order.
    let mut feature_cols: Vec<(usize, bool)> = schema
        .numeric_columns
        .iter()
        .map(|c| Ok((col(c)?, false)))
        .chain(schema.categorical_columns.iter().map(|c| Ok((col(c)?, true))))
        .collect::<Result<_>>()?;
    feature_cols.sort();

    let is_missing = |cell: &str| schema.missing_markers.iter().any(|m| m == cell);
    let mut report = LoadReport::default();
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        report.rows_read += 1;
        if let Some(fc) = filter {
            match rec.get(fc) {
                Some(v) if schema.filter_values.iter().any(|k| k == v) => {}
                _ => {
                    report.rows_filtered += 1;
                    continue;
                }
            }
        }
        let parsed = (|| {
            let get = |i: usize| rec.get(i).filter(|c| !is_missing(c));
            let label = u8::from(get(target)? == schema.target_positive);
            let a = u8::from(get(sensitive)? == schema.sensitive_advantaged);
            let mut numeric = Vec::new();
            let mut categorical = Vec::new();
            for &(c, is_cat) in &feature_cols {
                let cell = get(c)?;
                if is_cat {
                    categorical.push(cell.to_string());
                } else {
                    let v: f64 = cell.parse().ok()?;
                    if !v.is_finite() {
                        return None;
                    }
                    numeric.push(v);
                }
            }
            Some(ParsedRow {
                label,
                sensitive: a,
                numeric,
                categorical,
            })
        })();
        match parsed {
            Some(row) => rows.push(row),
            None => report.rows_rejected += 1,
        }
    }
    report.rows_kept = rows.len();
    info!(
        "{}: read {} rows, filtered {}, rejected {}, kept {}",
        path.display(),
        report.rows_read,
        report.rows_filtered,
        report.rows_rejected,
        report.rows_kept
    );
    if rows.is_empty() {
        return Err(Error::DegenerateData(format!("no usable rows in {}", path.display())));
    }

    let n = rows.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((n as f64) * split_fraction).round() as usize;
    let mut split = vec![Split::Test; n];
    for &i in &order[..n_train] {
        split[i] = Split::Train;
    }

    // Levels per categorical column, sorted.
    let n_cat = schema.categorical_columns.len();
    let mut levels: Vec<BTreeSet<&str>> = vec![BTreeSet::new(); n_cat];
    for r in &rows {
        for (k, v) in r.categorical.iter().enumerate() {
            levels[k].insert(v);
        }
    }
    let levels: Vec<Vec<String>> = levels
        .into_iter()
        .map(|s| s.into_iter().map(String::from).collect())
        .collect();

    let mut column_names = Vec::new();
    let mut categorical_mask = Vec::new();
    // (is_categorical, index into numeric/categorical vectors, first feature column)
    let mut layout = Vec::new();
    let (mut num_k, mut cat_k) = (0, 0);
    for &(c, is_cat) in &feature_cols {
        if is_cat {
            layout.push((true, cat_k, column_names.len()));
            for level in &levels[cat_k] {
                column_names.push(format!("{}={}", header[c], level));
                categorical_mask.push(true);
            }
            cat_k += 1;
        } else {
            layout.push((false, num_k, column_names.len()));
            column_names.push(header[c].clone());
            categorical_mask.push(false);
            num_k += 1;
        }
    }

    let mut numeric_stats = Vec::new();
    for &(is_cat, k, feat) in &layout {
        if is_cat {
            continue;
        }
        let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
        for (r, s) in rows.iter().zip(&split) {
            if *s == Split::Train {
                min = min.min(r.numeric[k]);
                max = max.max(r.numeric[k]);
            }
        }
        numeric_stats.push((feat, column_names[feat].clone(), min, max));
    }
    let stats = NormStats {
        numeric: numeric_stats,
    };

    let features = encode(&rows, &layout, &levels, &stats, column_names.len());
    let labels: Vec<u8> = rows.iter().map(|r| r.label).collect();
    let sensitive: Vec<u8> = rows.iter().map(|r| r.sensitive).collect();

    let ds = LabeledDataset {
        features,
        labels,
        sensitive,
        split,
        column_names,
        categorical_mask,
        stats,
        report,
        seed,
        split_fraction,
    };
    for s in [Split::Train, Split::Test] {
        let c = ds.group_counts(s);
        if c.group(0) == 0 || c.group(1) == 0 {
            return Err(Error::DegenerateData(format!(
                "{} split lacks one sensitive group ({} / {} rows in a=0 / a=1)",
                s.name(),
                c.group(0),
                c.group(1)
            )));
        }
    }
    Ok(ds)
}

fn encode(
    rows: &[ParsedRow],
    layout: &[(bool, usize, usize)],
    levels: &[Vec<String>],
    stats: &NormStats,
    width: usize,
) -> Array2<f64> {
    let mut features = Array2::zeros((rows.len(), width));
    let mut num_stat = stats.numeric.iter();
    let ranges: Vec<Option<(f64, f64)>> = layout
        .iter()
        .map(|&(is_cat, _, _)| {
            if is_cat {
                None
            } else {
                num_stat.next().map(|s| (s.2, s.3))
            }
        })
        .collect();
    for (i, r) in rows.iter().enumerate() {
        let mut row = features.row_mut(i);
        for (&(is_cat, k, feat), range) in layout.iter().zip(&ranges) {
            if is_cat {
                let pos = levels[k]
                    .binary_search(&r.categorical[k])
                    .expect("level collected from the same rows");
                row[feat + pos] = 1.0;
            } else {
                let (min, max) = range.expect("numeric column has statistics");
                row[feat] = NormStats::scale(min, max, r.numeric[k]);
            }
        }
    }
    features
}

/// Counts per `(y, a)` cell of one split.
pub fn group_counts(ds: &LabeledDataset, split: Split) -> GroupCounts {
    ds.group_counts(split)
}

/// Locates a checked-in schema by dataset id: `<dir>/<id>.schema` under the
/// given directory, `./schemas`, or the repository's `schemas/` directory.
pub fn find_schema(id: &str, schema_dir: Option<&Path>) -> Result<PathBuf> {
    let file = format!("{id}.schema");
    let mut candidates = Vec::new();
    if let Some(dir) = schema_dir {
        candidates.push(dir.join(&file));
    } else {
        candidates.push(PathBuf::from("schemas").join(&file));
        candidates.push(
            Path::new(env!("CARGO_MANIFEST_DIR"))
                .join("../../schemas")
                .join(&file),
        );
    }
    candidates
        .iter()
        .find(|p| p.is_file())
        .cloned()
        .ok_or_else(|| Error::Schema(format!("no schema file for dataset `{id}` ({file})")))
}

/// Ingests a checked-in dataset by id using its schema's `data_file`.
pub fn load_builtin(id: &str, split_fraction: f64, seed: u64) -> Result<LabeledDataset> {
    let schema_path = find_schema(id, None)?;
    let schema = DatasetSchema::load(&schema_path)?;
    let data = schema
        .data_file
        .clone()
        .ok_or_else(|| Error::Schema(format!("{} has no data_file", schema_path.display())))?;
    load_csv(data, &schema, split_fraction, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(".csv").tempfile().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    fn toy_schema() -> DatasetSchema {
        let mut s = DatasetSchema::new("y", "yes", "grp", "A");
        s.numeric_columns = vec!["num".into(), "flat".into()];
        s.categorical_columns = vec!["color".into()];
        s
    }

    const TOY: &str = "num,color,flat,grp,y\n\
        1.0,red,5,A,yes\n\
        3.0,blue,5,B,no\n\
        2.0,red,5,A,no\n\
        4.0,blue,5,B,yes\n";

    #[test]
    fn one_hot_width_and_constant_column() {
        let f = write_tmp(TOY);
        let ds = load_csv(f.path(), &toy_schema(), 0.5, 1).unwrap();
        // two numeric + two levels
        assert_eq!(ds.n_features(), 4);
        assert_eq!(ds.column_names, vec!["num", "color=blue", "color=red", "flat"]);
        let flat = ds.features.column(3);
        assert!(flat.iter().all(|&v| v == 0.0));
        for row in ds.features.rows() {
            assert_eq!(row[1] + row[2], 1.0);
        }
        assert_eq!(ds.labels, vec![1, 0, 0, 1]);
        assert_eq!(ds.sensitive, vec![1, 0, 1, 0]);
    }

    #[test]
    fn three_row_toy_width() {
        let f = write_tmp("x,c,g,y\n0.1,p,A,yes\n0.5,q,B,no\n0.9,p,A,no\n");
        let mut s = DatasetSchema::new("y", "yes", "g", "A");
        s.numeric_columns = vec!["x".into()];
        s.categorical_columns = vec!["c".into()];
        // 3 rows cannot give both groups in both splits; only the width matters here
        match load_csv(f.path(), &s, 0.5, 0) {
            Ok(ds) => assert_eq!(ds.n_features(), 1 + 2),
            Err(Error::DegenerateData(_)) => {}
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn training_split_in_unit_box_and_deterministic() {
        let mut csv = String::from("num,color,flat,grp,y\n");
        for i in 0..40 {
            let color = if i % 3 == 0 { "red" } else { "blue" };
            let grp = if i % 2 == 0 { "A" } else { "B" };
            let y = if i % 5 < 2 { "yes" } else { "no" };
            writeln!(csv, "{},{color},7,{grp},{y}", (i * 37 % 23) as f64 - 4.5).unwrap();
        }
        let f = write_tmp(&csv);
        let a = load_csv(f.path(), &toy_schema(), 0.8, 9).unwrap();
        let b = load_csv(f.path(), &toy_schema(), 0.8, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.indices(Split::Train).len(), 32);
        assert!(a.features.iter().all(|&v| (0.0..=1.0).contains(&v)));
        let c = load_csv(f.path(), &toy_schema(), 0.8, 10).unwrap();
        assert_ne!(a.split, c.split);
    }

    #[test]
    fn stored_stats_reproduce_training_features() {
        let mut csv = String::from("num,color,flat,grp,y\n");
        for i in 0..30 {
            writeln!(csv, "{},red,1,{},{}", i as f64 * 0.7, ["A", "B"][i % 2], ["yes", "no"][i % 3 % 2]).unwrap();
        }
        let f = write_tmp(&csv);
        let ds = load_csv(f.path(), &toy_schema(), 0.7, 3).unwrap();
        let (_, _, min, max) = ds.stats.numeric[0].clone();
        for i in ds.indices(Split::Train) {
            let raw = i as f64 * 0.7;
            assert_eq!(NormStats::scale(min, max, raw), ds.features[[i, 0]]);
        }
    }

    #[test]
    fn missing_and_unparseable_rows_are_rejected() {
        let f = write_tmp(
            "num,color,flat,grp,y\n1,red,1,A,yes\n?,red,1,A,no\nabc,red,1,B,no\n2,red,1,B,no\n3,,1,A,no\n4,blue,1,B,yes\n5,red,1,A,no\n6,red,1,B,yes\n",
        );
        let ds = load_csv(f.path(), &toy_schema(), 0.5, 0).unwrap();
        assert_eq!(ds.report.rows_rejected, 3);
        assert_eq!(ds.report.rows_kept, 5);
        assert_eq!(ds.len(), 5);
    }

    #[test]
    fn filter_keeps_listed_values_only() {
        let f = write_tmp(TOY.to_string().as_str().replace("4.0,blue,5,B,yes", "4.0,blue,5,C,yes").as_str());
        let mut s = toy_schema();
        s.filter_column = Some("grp".into());
        s.filter_values = vec!["A".into(), "B".into()];
        let r = load_csv(f.path(), &s, 0.5, 0);
        match r {
            Ok(ds) => assert_eq!(ds.report.rows_filtered, 1),
            Err(Error::DegenerateData(_)) => {}
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn missing_column_is_a_schema_error() {
        let f = write_tmp(TOY);
        let mut s = toy_schema();
        s.numeric_columns.push("nope".into());
        assert!(matches!(load_csv(f.path(), &s, 0.5, 0), Err(Error::Schema(_))));
    }

    #[test]
    fn single_group_is_degenerate() {
        let f = write_tmp("num,color,flat,grp,y\n1,red,1,A,yes\n2,red,1,A,no\n3,red,1,A,no\n");
        assert!(matches!(
            load_csv(f.path(), &toy_schema(), 0.5, 0),
            Err(Error::DegenerateData(_))
        ));
    }

    #[test]
    fn schema_parse_and_validation() {
        let text = "# toy\ntarget_column = y\ntarget_positive = yes\nsensitive_column = grp\n\
                    sensitive_advantaged = A\nnumeric_columns = num, flat\ncategorical_columns = color\n\
                    data_file = toy.csv\n";
        let s = DatasetSchema::parse(text, Path::new("/tmp/x/toy.schema")).unwrap();
        assert_eq!(s.numeric_columns, vec!["num", "flat"]);
        assert_eq!(s.data_file.unwrap(), PathBuf::from("/tmp/x/toy.csv"));
        let same = text.replace("sensitive_column = grp", "sensitive_column = y");
        assert!(DatasetSchema::parse(&same, Path::new("s")).is_err());
        assert!(DatasetSchema::parse("target_column = y\n", Path::new("s")).is_err());
        assert!(DatasetSchema::parse(&format!("{text}bogus = 1\n"), Path::new("s")).is_err());
    }

    #[test]
    fn group_counts_cells() {
        let slice = DataSlice::new(
            Array2::zeros((8, 1)),
            vec![0, 0, 1, 1, 0, 0, 1, 1],
            vec![0, 1, 0, 1, 0, 1, 0, 1],
        )
        .unwrap();
        assert_eq!(slice.group_counts().cells, [[2, 2], [2, 2]]);
        let all = DataSlice::new(Array2::zeros((5, 1)), vec![1; 5], vec![1; 5]).unwrap();
        let c = all.group_counts();
        assert_eq!(c.get(1, 1), 5);
        assert_eq!(c.total(), 5);
        assert_eq!(c.get(0, 0) + c.get(0, 1) + c.get(1, 0), 0);
    }

    #[test]
    fn dataset_file_round_trip() {
        let f = write_tmp(TOY);
        let ds = load_csv(f.path(), &toy_schema(), 0.5, 4).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("toy.csv");
        ds.write_csv(&p).unwrap();
        ds.write_stats(stats_sidecar_path(&p)).unwrap();
        let back = LabeledDataset::read_csv(&p).unwrap();
        assert_eq!(back.features, ds.features);
        assert_eq!(back.labels, ds.labels);
        assert_eq!(back.split, ds.split);
        assert_eq!(back.categorical_mask, ds.categorical_mask);
        assert_eq!(back.stats, ds.stats);
        assert_eq!(back.seed, 4);
    }
}
