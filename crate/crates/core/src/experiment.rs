//! Epsilon sweeps over trained models, seed aggregation and plotting.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;

use crate::attack::{attack, AttackConfig, Objective};
use crate::data::{load_builtin, DataSlice, LabeledDataset, Split};
use crate::error::{Error, Result};
use crate::fairness::{format_num, FairnessReport};
use crate::train::{evaluate, train_dataset, TrainConfig, TrainMode, TrainedModel};

/// Grid `0.00, 0.05, ..., 0.50`.
pub fn default_epsilons() -> Vec<f64> {
    (0..=10).map(|k| k as f64 * 0.05).collect()
}

/// Loads a dataset by builtin id or from a file written by `ingest`.
/// Returns the dataset and the id used in reports.
pub fn resolve_dataset(name: &str, split_fraction: f64, seed: u64) -> Result<(LabeledDataset, String)> {
    let path = Path::new(name);
    if path.extension().is_some_and(|e| e == "csv") {
        if !path.is_file() {
            return Err(Error::MissingArtifact(path.to_path_buf()));
        }
        let id = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("dataset")
            .to_string();
        Ok((LabeledDataset::read_csv(path)?, id))
    } else {
        Ok((load_builtin(name, split_fraction, seed)?, name.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub dataset: String,
    pub modes: Vec<TrainMode>,
    pub objective: Objective,
    pub epsilons: Vec<f64>,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    pub iterations: usize,
    /// Attack step as a fraction of epsilon.
    pub step_ratio: f64,
    /// Template for every trained model; mode and seed are overwritten.
    pub train: TrainConfig,
    /// Load `<dir>/<mode>_s<seed>.model` instead of training.
    pub models_dir: Option<PathBuf>,
    pub plot: bool,
}

impl SweepSpec {
    pub fn new(dataset: impl Into<String>, out_dir: impl Into<PathBuf>) -> Self {
        let dataset = dataset.into();
        let train = TrainConfig::for_dataset(TrainMode::Erm, &dataset);
        Self {
            dataset,
            modes: vec![TrainMode::Erm, TrainMode::FairAdvIn],
            objective: Objective::Di,
            epsilons: default_epsilons(),
            seeds: vec![0, 1, 2],
            out_dir: out_dir.into(),
            iterations: 20,
            step_ratio: 0.1,
            train,
            models_dir: None,
            plot: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.modes.is_empty() {
            return Err(Error::Config("sweep needs at least one mode".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("sweep needs at least one seed".into()));
        }
        if self.epsilons.first() != Some(&0.0) {
            return Err(Error::Config("epsilon grid must start at 0".into()));
        }
        if self.epsilons.windows(2).any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less)) {
            return Err(Error::Config("epsilon grid must be strictly ascending".into()));
        }
        if self.iterations == 0 || !(self.step_ratio > 0.0 && self.step_ratio.is_finite()) {
            return Err(Error::Config("attack budget must be positive".into()));
        }
        Ok(())
    }

    pub fn attack_config(&self, epsilon: f64) -> AttackConfig {
        AttackConfig::new(self.objective, epsilon).with_budget(epsilon * self.step_ratio, self.iterations)
    }

    fn model_path(dir: &Path, mode: TrainMode, seed: u64) -> PathBuf {
        dir.join(format!("{}_s{seed}.model", mode.name()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub dataset: String,
    pub mode: String,
    pub seed: u64,
    pub epsilon: f64,
    /// `None` when the attack could not be evaluated; see `flag`.
    pub report: Option<FairnessReport>,
    pub flag: Option<String>,
}

/// Metric columns shared by sweep and report files.
pub const METRICS: [&str; 9] = [
    "accuracy", "di", "eod", "tpr_g0", "tpr_g1", "tnr_g0", "tnr_g1", "di_relaxed", "eod_relaxed",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub dataset: String,
    pub mode: String,
    pub epsilon: f64,
    pub n: usize,
    pub mean: [f64; 9],
    pub min: [f64; 9],
    pub max: [f64; 9],
    /// Population standard deviation across seeds.
    pub spread: [f64; 9],
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub objective: Objective,
    pub iterations: usize,
    pub step_ratio: f64,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn header() -> String {
        format!("dataset,mode,seed,{},flag", FairnessReport::CSV_HEADER)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "# attack={} iterations={} step_ratio={}",
            self.objective.name(),
            self.iterations,
            format_num(self.step_ratio)
        )
        .unwrap();
        writeln!(out, "{}", Self::header()).unwrap();
        for r in &self.rows {
            let body = match &r.report {
                Some(rep) => rep.csv_row(r.epsilon),
                None => format!("{}{}", format_num(r.epsilon), ",".repeat(METRICS.len())),
            };
            writeln!(out, "{},{},{},{},{}", r.dataset, r.mode, r.seed, body, r.flag.as_deref().unwrap_or("")).unwrap();
        }
        out
    }

    pub fn aggregates(&self) -> Vec<Aggregate> {
        aggregate_rows(&self.rows)
    }

    /// One curve file per mode: `epsilon` then mean/min/max per metric.
    pub fn curve_csv(&self, mode: &str) -> String {
        let mut out = String::from("dataset,epsilon,n");
        for m in METRICS {
            write!(out, ",{m}_mean,{m}_min,{m}_max").unwrap();
        }
        out.push('\n');
        for a in self.aggregates().iter().filter(|a| a.mode == mode) {
            write!(out, "{},{},{}", a.dataset, format_num(a.epsilon), a.n).unwrap();
            for k in 0..METRICS.len() {
                write!(out, ",{},{},{}", format_num(a.mean[k]), format_num(a.min[k]), format_num(a.max[k])).unwrap();
            }
            out.push('\n');
        }
        out
    }

    /// Mean value of a metric per (mode, epsilon), in ascending epsilon.
    pub fn curve(&self, mode: &str, metric: usize) -> Vec<(f64, f64)> {
        self.aggregates()
            .into_iter()
            .filter(|a| a.mode == mode)
            .map(|a| (a.epsilon, a.mean[metric]))
            .collect()
    }
}

fn aggregate_rows(rows: &[SweepRow]) -> Vec<Aggregate> {
    let mut groups: BTreeMap<(String, String, u64), Vec<[f64; 9]>> = BTreeMap::new();
    for r in rows {
        if let Some(rep) = &r.report {
            groups
                .entry((r.dataset.clone(), r.mode.clone(), r.epsilon.to_bits()))
                .or_default()
                .push(rep.csv_fields());
        }
    }
    let mut out: Vec<Aggregate> = groups
        .into_iter()
        .map(|((dataset, mode, eps), vals)| {
            let n = vals.len();
            let mut mean = [0.0; 9];
            let mut min = [f64::INFINITY; 9];
            let mut max = [f64::NEG_INFINITY; 9];
            let mut spread = [0.0; 9];
            for k in 0..9 {
                mean[k] = vals.iter().map(|v| v[k]).sum::<f64>() / n as f64;
                for v in &vals {
                    min[k] = min[k].min(v[k]);
                    max[k] = max[k].max(v[k]);
                }
                spread[k] = (vals.iter().map(|v| (v[k] - mean[k]).powi(2)).sum::<f64>() / n as f64).sqrt();
            }
            Aggregate { dataset, mode, epsilon: f64::from_bits(eps), n, mean, min, max, spread }
        })
        .collect();
    // bit order equals numeric order for non-negative epsilons, but be explicit
    out.sort_by(|a, b| {
        (a.dataset.as_str(), a.mode.as_str())
            .cmp(&(b.dataset.as_str(), b.mode.as_str()))
            .then(a.epsilon.total_cmp(&b.epsilon))
    });
    out
}

/// Evaluates one trained model over the epsilon grid.
pub fn sweep_model(
    trained: &TrainedModel,
    test: &DataSlice,
    spec: &SweepSpec,
    dataset: &str,
    mode: &str,
    seed: u64,
) -> Vec<SweepRow> {
    spec.epsilons
        .iter()
        .map(|&eps| {
            let outcome = if eps == 0.0 {
                evaluate(trained, test)
            } else {
                let cfg = spec.attack_config(eps).with_snapshots(trained.decision_thresholds());
                attack(&trained.model, test, &cfg).map(|r| r.final_report().cloned().expect("snapshots recorded"))
            };
            let (report, flag) = match outcome {
                Ok(r) => (Some(r), None),
                Err(e @ Error::DegenerateData(_)) => {
                    warn!("{mode} seed {seed} eps {eps}: {e}");
                    (None, Some("degenerate".to_string()))
                }
                Err(e) => {
                    warn!("{mode} seed {seed} eps {eps}: {e}");
                    (None, Some("failed".to_string()))
                }
            };
            SweepRow { dataset: dataset.to_string(), mode: mode.to_string(), seed, epsilon: eps, report, flag }
        })
        .collect()
}

/// Trains (or loads) each (mode, seed) model, attacks the test split at
/// every epsilon and writes the report files into `spec.out_dir`.
pub fn sweep(spec: &SweepSpec, data_seed: u64) -> Result<SweepReport> {
    spec.validate()?;
    let (ds, id) = resolve_dataset(&spec.dataset, 0.8, data_seed)?;
    let test = ds.slice(Split::Test);
    let jobs: Vec<(TrainMode, u64)> = spec
        .modes
        .iter()
        .flat_map(|&m| spec.seeds.iter().map(move |&s| (m, s)))
        .collect();
    if let Some(dir) = &spec.models_dir {
        for &(m, s) in &jobs {
            let p = SweepSpec::model_path(dir, m, s);
            if !p.is_file() {
                return Err(Error::MissingArtifact(p));
            }
        }
    }
    let results: Vec<Result<Vec<SweepRow>>> = jobs
        .par_iter()
        .map(|&(mode, seed)| {
            let trained = match &spec.models_dir {
                Some(dir) => TrainedModel::load(SweepSpec::model_path(dir, mode, seed))?,
                None => {
                    let mut cfg = spec.train.clone();
                    cfg.mode = mode;
                    cfg.seed = seed;
                    if mode.inner_objective().is_none() {
                        cfg.train_epsilon = 0.0;
                    }
                    info!("sweep: training {mode} seed {seed}");
                    train_dataset(&ds, &cfg)?
                }
            };
            Ok(sweep_model(&trained, &test, spec, &id, mode.name(), seed))
        })
        .collect();
    let mut rows = Vec::new();
    for r in results {
        rows.extend(r?);
    }
    let report = SweepReport {
        objective: spec.objective,
        iterations: spec.iterations,
        step_ratio: spec.step_ratio,
        rows,
    };
    write_sweep_outputs(&report, spec, &id)?;
    Ok(report)
}

pub fn write_sweep_outputs(report: &SweepReport, spec: &SweepSpec, id: &str) -> Result<Vec<PathBuf>> {
    let dir = &spec.out_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let mut put = |name: String, body: String| -> Result<()> {
        let p = dir.join(name);
        std::fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
        written.push(p);
        Ok(())
    };
    put(format!("sweep_{id}.csv"), report.to_csv())?;
    for m in &spec.modes {
        put(format!("curve_{id}_{}.csv", m.name()), report.curve_csv(m.name()))?;
    }
    if spec.plot {
        for (k, metric) in [(0, "accuracy"), (1, "di"), (2, "eod")] {
            let series: Vec<(String, Vec<(f64, f64)>)> = spec
                .modes
                .iter()
                .map(|m| (m.name().to_string(), report.curve(m.name(), k)))
                .collect();
            let title = format!("{id}: {metric} under {} attack", report.objective.name());
            put(format!("plot_{id}_{metric}.svg"), svg_plot(&title, "epsilon", metric, &series))?;
        }
    }
    Ok(written)
}

/// Parses a file written by [`SweepReport::to_csv`].
pub fn read_sweep_csv(path: &Path) -> Result<Vec<SweepRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Config(format!("{} is empty", path.display())))?;
    if header != SweepReport::header() {
        return Err(Error::Config(format!("{} does not have the sweep column layout", path.display())));
    }
    let mut rows = Vec::new();
    for (no, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        let bad = || Error::parse(path, format!("data row {}", no + 1));
        if f.len() != 3 + 1 + METRICS.len() + 1 {
            return Err(bad());
        }
        let seed = f[2].parse().map_err(|_| bad())?;
        let epsilon = f[3].parse().map_err(|_| bad())?;
        let report = if f[4].is_empty() {
            None
        } else {
            let v: Vec<f64> = f[4..4 + METRICS.len()]
                .iter()
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad())?;
            Some(FairnessReport {
                accuracy: v[0],
                di_hard: v[1],
                eod_hard: v[2],
                tpr: [v[3], v[4]],
                tnr: [v[5], v[6]],
                di_relaxed: v[7],
                eod_relaxed: v[8],
                thresholds: crate::fairness::Thresholds::DEFAULT,
            })
        };
        let flag = f[4 + METRICS.len()];
        rows.push(SweepRow {
            dataset: f[0].to_string(),
            mode: f[1].to_string(),
            seed,
            epsilon,
            report,
            flag: (!flag.is_empty()).then(|| flag.to_string()),
        });
    }
    Ok(rows)
}

/// Merged table keyed by (dataset, mode, epsilon) with mean and spread per metric.
pub fn merge_reports(inputs: &[PathBuf]) -> Result<String> {
    if inputs.is_empty() {
        return Err(Error::Config("report needs at least one sweep file".into()));
    }
    let mut rows = Vec::new();
    for p in inputs {
        rows.extend(read_sweep_csv(p)?);
    }
    let mut out = String::from("dataset,mode,epsilon,n");
    for m in METRICS {
        write!(out, ",{m}_mean,{m}_spread").unwrap();
    }
    out.push('\n');
    for a in aggregate_rows(&rows) {
        write!(out, "{},{},{},{}", a.dataset, a.mode, format_num(a.epsilon), a.n).unwrap();
        for k in 0..METRICS.len() {
            write!(out, ",{},{}", format_num(a.mean[k]), format_num(a.spread[k])).unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Static line chart: one polyline per series with axes, ticks and a legend.
pub fn svg_plot(title: &str, x_label: &str, y_label: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    let (w, h) = (640.0, 420.0);
    let (left, right, top, bottom) = (70.0, 150.0, 40.0, 55.0);
    let pts = series.iter().flat_map(|(_, s)| s.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y1) = (0.0, 1.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let pw = w - left - right;
    let ph = h - top - bottom;
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| top + ph - (y - y0) / (y1 - y0) * ph;
    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#).unwrap();
    writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#).unwrap();
    writeln!(s, r#"<text x="{}" y="22" font-family="sans-serif" font-size="15" text-anchor="middle">{}</text>"#, left + pw / 2.0, xml_escape(title)).unwrap();
    writeln!(
        s,
        r#"<polyline points="{:.2},{:.2} {:.2},{:.2} {:.2},{:.2}" fill="none" stroke="black"/>"#,
        left, top, left, top + ph, left + pw, top + ph
    )
    .unwrap();
    for k in 0..=5 {
        let fx = x0 + (x1 - x0) * k as f64 / 5.0;
        let fy = y0 + (y1 - y0) * k as f64 / 5.0;
        writeln!(s, r#"<line x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}" stroke="black"/>"#, sx(fx), top + ph, top + ph + 5.0).unwrap();
        writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="middle">{:.2}</text>"#, sx(fx), top + ph + 18.0, fx).unwrap();
        writeln!(s, r#"<line x1="{0:.2}" y1="{1:.2}" x2="{2:.2}" y2="{1:.2}" stroke="black"/>"#, left - 5.0, sy(fy), left).unwrap();
        writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="end">{:.2}</text>"#, left - 8.0, sy(fy) + 4.0, fy).unwrap();
    }
    writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="13" text-anchor="middle">{}</text>"#, left + pw / 2.0, h - 14.0, xml_escape(x_label)).unwrap();
    writeln!(
        s,
        r#"<text x="18" y="{0:.2}" font-family="sans-serif" font-size="13" text-anchor="middle" transform="rotate(-90 18 {0:.2})">{1}</text>"#,
        top + ph / 2.0,
        xml_escape(y_label)
    )
    .unwrap();
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, coords.join(" ")).unwrap();
        let ly = top + 14.0 + 20.0 * i as f64;
        writeln!(s, r#"<line x1="{0:.2}" y1="{1:.2}" x2="{2:.2}" y2="{1:.2}" stroke="{color}" stroke-width="2"/>"#, left + pw + 12.0, ly, left + pw + 36.0).unwrap();
        writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12">{}</text>"#, left + pw + 42.0, ly + 4.0, xml_escape(name)).unwrap();
    }
    s.push_str("</svg>\n");
    s
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fairness::Thresholds;

    fn row(mode: &str, seed: u64, eps: f64, acc: f64) -> SweepRow {
        SweepRow {
            dataset: "toy".into(),
            mode: mode.into(),
            seed,
            epsilon: eps,
            report: Some(FairnessReport {
                accuracy: acc,
                di_relaxed: 0.1,
                di_hard: 0.2,
                eod_relaxed: 0.3,
                eod_hard: 0.4,
                tpr: [0.5, 0.6],
                tnr: [0.7, 0.8],
                thresholds: Thresholds::DEFAULT,
            }),
            flag: None,
        }
    }

    #[test]
    fn default_grid() {
        let g = default_epsilons();
        assert_eq!(g.len(), 11);
        assert_eq!(g[0], 0.0);
        assert!((g[10] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn aggregation_mean_and_spread() {
        let rows = vec![row("erm", 0, 0.1, 0.6), row("erm", 1, 0.1, 0.8)];
        let a = aggregate_rows(&rows);
        assert_eq!(a.len(), 1);
        assert!((a[0].mean[0] - 0.7).abs() < 1e-15);
        assert!((a[0].spread[0] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn spec_rejects_bad_grids() {
        let mut s = SweepSpec::new("toy", "/tmp/x");
        s.epsilons = vec![0.1, 0.2];
        assert!(s.validate().is_err());
        s.epsilons = vec![0.0, 0.2, 0.1];
        assert!(s.validate().is_err());
        s.epsilons = vec![0.0];
        s.seeds.clear();
        assert!(s.validate().is_err());
    }

    #[test]
    fn svg_has_one_polyline_per_series() {
        let svg = svg_plot("t", "x", "y", &[("a".into(), vec![(0.0, 0.0), (1.0, 1.0)]), ("b".into(), vec![(0.0, 1.0)])]);
        assert_eq!(svg.matches("<polyline").count(), 3);
        assert!(svg.starts_with("<svg"));
    }
}
