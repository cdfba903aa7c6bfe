//! Minibatch SGD in six modes: clean ERM, PGD adversarial training against
//! the accuracy or DI attack, and three fair adversarial variants that add a
//! reweighing pass, an EOd penalty or per-group thresholds on top of
//! accuracy-adversarial training.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use log::{debug, info};
use ndarray::{Array1, Zip};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::attack::{attack, AttackConfig, Objective};
use crate::data::{DataSlice, LabeledDataset, Split};
use crate::error::{Error, Result};
use crate::fairness::{format_num, relaxed_eod, relaxed_eod_soft_grad, report_from_scores, Thresholds};
use crate::model::{cross_entropy, Activation, MlpModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TrainMode {
    Erm,
    AdvAcc,
    AdvDi,
    FairAdvPre,
    FairAdvIn,
    FairAdvPost,
}

impl TrainMode {
    pub const ALL: [TrainMode; 6] = [
        TrainMode::Erm,
        TrainMode::AdvAcc,
        TrainMode::AdvDi,
        TrainMode::FairAdvPre,
        TrainMode::FairAdvIn,
        TrainMode::FairAdvPost,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TrainMode::Erm => "erm",
            TrainMode::AdvAcc => "adv_acc",
            TrainMode::AdvDi => "adv_di",
            TrainMode::FairAdvPre => "fair_adv_pre",
            TrainMode::FairAdvIn => "fair_adv_in",
            TrainMode::FairAdvPost => "fair_adv_post",
        }
    }

    /// Objective of the inner attack, if the mode perturbs its batches.
    pub fn inner_objective(self) -> Option<Objective> {
        match self {
            TrainMode::Erm => None,
            TrainMode::AdvDi => Some(Objective::Di),
            _ => Some(Objective::Accuracy),
        }
    }
}

impl std::fmt::Display for TrainMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TrainMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TrainMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown training mode `{s}`")))
    }
}

/// Per-group decision thresholds fitted after training.
pub type PostprocessThresholds = Thresholds;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub mode: TrainMode,
    /// Hidden layer widths; input and output widths come from the data.
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub train_epsilon: f64,
    /// Inner attack step; `None` means `train_epsilon / 4`.
    pub inner_step: Option<f64>,
    pub inner_iterations: usize,
    /// Weight of the relaxed EOd penalty in `fair_adv_in`.
    pub lambda: f64,
    /// Reweighing rounds for `fair_adv_pre`.
    pub pre_iterations: usize,
    /// Epochs of each short ERM fit inside reweighing.
    pub pre_epochs: usize,
    pub pre_rate: f64,
    /// Share of the training rows held out for `fair_adv_post` thresholds.
    pub validation_fraction: f64,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(mode: TrainMode) -> Self {
        Self {
            mode,
            hidden: vec![32, 16],
            activation: Activation::Relu,
            epochs: 12,
            batch_size: 128,
            lr: 0.1,
            train_epsilon: 0.0,
            inner_step: None,
            inner_iterations: 7,
            lambda: 1.0,
            pre_iterations: 5,
            pre_epochs: 3,
            pre_rate: 2.0,
            validation_fraction: 0.2,
            seed: 0,
        }
    }

    /// Mode defaults plus the training epsilon used for a known dataset id.
    pub fn for_dataset(mode: TrainMode, dataset: &str) -> Self {
        let mut cfg = Self::new(mode);
        if mode.inner_objective().is_some() {
            cfg.train_epsilon = default_train_epsilon(dataset).unwrap_or(0.0);
        }
        cfg
    }

    pub fn inner_step(&self) -> f64 {
        self.inner_step.unwrap_or(self.train_epsilon / 4.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.train_epsilon >= 0.0 && self.train_epsilon.is_finite()) {
            return Err(Error::Config(format!("train epsilon must be >= 0, got {}", self.train_epsilon)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate must be > 0, got {}", self.lr)));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config("epochs and batch size must be positive".into()));
        }
        if self.inner_iterations == 0 {
            return Err(Error::Config("inner attack needs at least one iteration".into()));
        }
        if self.mode == TrainMode::FairAdvPre && self.pre_iterations == 0 {
            return Err(Error::Config("reweighing needs at least one iteration".into()));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::Config("validation fraction must be in (0, 1)".into()));
        }
        if self.hidden.contains(&0) {
            return Err(Error::Config("hidden layers must be non-empty".into()));
        }
        Ok(())
    }

    fn inner_attack(&self, objective: Objective) -> AttackConfig {
        AttackConfig::new(objective, self.train_epsilon)
            .with_budget(self.inner_step(), self.inner_iterations)
    }

    fn dims(&self, n_features: usize) -> Vec<usize> {
        let mut dims = vec![n_features];
        dims.extend(&self.hidden);
        dims.push(1);
        dims
    }
}

/// Training perturbation levels used for the bundled datasets.
pub fn default_train_epsilon(dataset: &str) -> Option<f64> {
    match dataset {
        "adult" => Some(0.2),
        "compas" => Some(0.005),
        "german" => Some(0.01),
        _ => None,
    }
}

/// Non-negative per-row weights with mean 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleWeights(Vec<f64>);

impl SampleWeights {
    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0; n])
    }

    /// Rescales `raw` to mean 1.
    pub fn normalized(raw: Vec<f64>) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::DegenerateData("no rows to weight".into()));
        }
        if raw.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Numeric("sample weights must be finite and >= 0".into()));
        }
        let mean = raw.iter().sum::<f64>() / raw.len() as f64;
        if mean <= 0.0 {
            return Err(Error::Numeric("sample weights sum to zero".into()));
        }
        Ok(Self(raw.into_iter().map(|w| w / mean).collect()))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.0.iter().sum::<f64>() / self.0.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub ce: f64,
    pub fair_term: f64,
    pub train_acc: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingLog {
    pub epochs: Vec<EpochLog>,
}

impl TrainingLog {
    pub const CSV_HEADER: &'static str = "epoch,loss,ce,fair_term,train_acc";

    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::CSV_HEADER);
        for e in &self.epochs {
            writeln!(
                out,
                "{},{},{},{},{}",
                e.epoch,
                format_num(e.loss),
                format_num(e.ce),
                format_num(e.fair_term),
                format_num(e.train_acc)
            )
            .unwrap();
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn last(&self) -> Option<&EpochLog> {
        self.epochs.last()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub model: MlpModel,
    pub thresholds: Option<PostprocessThresholds>,
    pub log: TrainingLog,
}

impl TrainedModel {
    pub fn new(model: MlpModel) -> Self {
        Self { model, thresholds: None, log: TrainingLog::default() }
    }

    /// Thresholds used for hard metrics: the fitted ones or 0.5 for both groups.
    pub fn decision_thresholds(&self) -> Thresholds {
        self.thresholds.unwrap_or(Thresholds::DEFAULT)
    }

    /// Model text followed by a `thresholds g0 g1` line when thresholds exist.
    pub fn to_text(&self) -> String {
        let mut out = self.model.to_text();
        if let Some(t) = self.thresholds {
            writeln!(out, "thresholds {:.16e} {:.16e}", t.group[0], t.group[1]).unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines: Vec<&str> = text.lines().collect();
        while lines.last().is_some_and(|l| l.trim().is_empty()) {
            lines.pop();
        }
        let mut thresholds = None;
        if let Some(last) = lines.last() {
            if let Some(rest) = last.trim().strip_prefix("thresholds") {
                let vals: Vec<f64> = rest
                    .split_whitespace()
                    .map(|v| v.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| Error::Domain(format!("bad thresholds line: {e}")))?;
                if vals.len() != 2 || vals.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
                    return Err(Error::Domain(format!("bad thresholds line `{last}`")));
                }
                thresholds = Some(Thresholds::new(vals[0], vals[1]));
                lines.pop();
            }
        }
        let model = MlpModel::from_text(&lines.join("\n"))?;
        Ok(Self { model, thresholds, log: TrainingLog::default() })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text).map_err(|e| match e {
            Error::Domain(m) | Error::Shape(m) | Error::Parse { message: m, .. } => Error::parse(path, m),
            other => other,
        })
    }
}

/// Trains on the training split of `ds`.
pub fn train_dataset(ds: &LabeledDataset, cfg: &TrainConfig) -> Result<TrainedModel> {
    train(&ds.slice(Split::Train), cfg)
}

pub fn train(slice: &DataSlice, cfg: &TrainConfig) -> Result<TrainedModel> {
    cfg.validate()?;
    if slice.is_empty() {
        return Err(Error::DegenerateData("empty training slice".into()));
    }
    let counts = slice.group_counts();
    if cfg.mode != TrainMode::Erm && counts.cells.iter().flatten().any(|&n| n == 0) {
        return Err(Error::DegenerateData(format!(
            "{} training needs all four (y, a) cells, got {:?}",
            cfg.mode, counts.cells
        )));
    }
    info!(
        "training {} on {} rows: eps {}, inner step {} x {}, lambda {}",
        cfg.mode,
        slice.len(),
        cfg.train_epsilon,
        cfg.inner_step(),
        cfg.inner_iterations,
        cfg.lambda
    );
    match cfg.mode {
        TrainMode::Erm | TrainMode::AdvAcc | TrainMode::AdvDi | TrainMode::FairAdvIn => {
            let (model, log) = fit(slice, None, cfg, cfg.mode)?;
            Ok(TrainedModel { model, thresholds: None, log })
        }
        TrainMode::FairAdvPre => {
            let mut short = cfg.clone();
            short.epochs = cfg.pre_epochs.max(1);
            let weights = reweigh_labels(slice, cfg.pre_iterations, cfg.pre_rate, |w| {
                fit(slice, Some(w), &short, TrainMode::Erm).map(|(m, _)| m)
            })?;
            let (model, log) = fit(slice, Some(&weights), cfg, TrainMode::AdvAcc)?;
            Ok(TrainedModel { model, thresholds: None, log })
        }
        TrainMode::FairAdvPost => {
            let (fit_rows, val_rows) =
                stratified_holdout(slice, cfg.validation_fraction, cfg.seed);
            let fit_slice = slice.select(&fit_rows);
            let val_slice = slice.select(&val_rows);
            let (model, log) = fit(&fit_slice, None, cfg, TrainMode::AdvAcc)?;
            let thresholds = fit_group_thresholds(&model, &val_slice)?;
            info!("post-processing thresholds {:?}", thresholds.group);
            Ok(TrainedModel { model, thresholds: Some(thresholds), log })
        }
    }
}

/// Splits positions into (fit, holdout), taking `fraction` of every
/// `(y, a)` cell (at least one row, never all of it) into the holdout.
pub fn stratified_holdout(slice: &DataSlice, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(3);
    let mut fit_rows = Vec::new();
    let mut hold = Vec::new();
    for mut cell in cell_positions(slice).into_iter().flatten() {
        cell.shuffle(&mut rng);
        let k = ((cell.len() as f64 * fraction).round() as usize)
            .max(1)
            .min(cell.len().saturating_sub(1));
        hold.extend_from_slice(&cell[..k]);
        fit_rows.extend_from_slice(&cell[k..]);
    }
    fit_rows.sort_unstable();
    hold.sort_unstable();
    (fit_rows, hold)
}

fn cell_positions(slice: &DataSlice) -> [[Vec<usize>; 2]; 2] {
    let mut cells: [[Vec<usize>; 2]; 2] = Default::default();
    for (i, (&y, &a)) in slice.labels.iter().zip(&slice.sensitive).enumerate() {
        cells[y as usize][a as usize].push(i);
    }
    cells
}

/// One epoch's minibatches with every `(y, a)` cell spread evenly: rows are
/// shuffled within their cell, keyed by fractional rank `(j + 0.5) / n_cell`
/// and cut into consecutive batches in key order.
pub fn stratified_batches(slice: &DataSlice, batch_size: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut keyed: Vec<(f64, usize)> = Vec::with_capacity(slice.len());
    for mut cell in cell_positions(slice).into_iter().flatten() {
        cell.shuffle(rng);
        let n = cell.len() as f64;
        keyed.extend(cell.into_iter().enumerate().map(|(j, i)| ((j as f64 + 0.5) / n, i)));
    }
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let order: Vec<usize> = keyed.into_iter().map(|(_, i)| i).collect();
    order.chunks(batch_size.max(1)).map(<[usize]>::to_vec).collect()
}

fn fit(
    slice: &DataSlice,
    weights: Option<&SampleWeights>,
    cfg: &TrainConfig,
    mode: TrainMode,
) -> Result<(MlpModel, TrainingLog)> {
    if let Some(w) = weights {
        if w.len() != slice.len() {
            return Err(Error::Shape(format!("{} weights for {} rows", w.len(), slice.len())));
        }
    }
    let mut model = MlpModel::new_seeded(&cfg.dims(slice.features.ncols()), cfg.activation, cfg.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let objective = mode.inner_objective().filter(|_| cfg.train_epsilon > 0.0);
    let inner = objective.map(|o| cfg.inner_attack(o));
    let penalty = if mode == TrainMode::FairAdvIn { cfg.lambda } else { 0.0 };
    let mut log = TrainingLog::default();

    for epoch in 0..cfg.epochs {
        let batches = stratified_batches(slice, cfg.batch_size, &mut rng);
        let (mut loss_sum, mut ce_sum, mut fair_sum) = (0.0, 0.0, 0.0);
        for rows in &batches {
            let mut batch = slice.select(rows);
            if let Some(acfg) = &inner {
                let counts = batch.group_counts();
                let usable = acfg.objective != Objective::Di || (counts.group(0) > 0 && counts.group(1) > 0);
                if usable {
                    batch.features = attack(&model, &batch, acfg)?.adversarial;
                } else {
                    debug!("batch without both groups left unperturbed");
                }
            }
            let b = batch.len() as f64;
            let trace = model.forward(batch.features.view())?;
            let soft = trace.soft_labels();
            let w_row = |i: usize| weights.map_or(1.0, |w| w.as_slice()[rows[i]]);
            let mut ce = 0.0;
            let mut logit_grad = Array1::zeros(batch.len());
            for (i, (&f, &y)) in soft.iter().zip(&batch.labels).enumerate() {
                let y = f64::from(y);
                let w = w_row(i);
                ce += w * cross_entropy(f, y);
                logit_grad[i] = w * (f - y) / b;
            }
            ce /= b;
            let mut fair = 0.0;
            if penalty > 0.0 && batch.group_counts().cells.iter().flatten().all(|&n| n > 0) {
                fair = relaxed_eod(soft, &batch.labels, &batch.sensitive)?;
                let g = relaxed_eod_soft_grad(soft, &batch.labels, &batch.sensitive)?;
                Zip::from(&mut logit_grad)
                    .and(&g)
                    .and(soft)
                    .for_each(|lg, &gi, &f| *lg += penalty * gi * f * (1.0 - f));
            }
            let loss = ce + penalty * fair;
            if !loss.is_finite() {
                return Err(Error::Training { epoch, message: format!("non-finite loss {loss}") });
            }
            let (gw, gb) = model.parameter_gradient(&trace, logit_grad.view())?;
            model.apply_update(&gw, &gb, cfg.lr).map_err(|e| match e {
                Error::Numeric(message) => Error::Training { epoch, message },
                other => other,
            })?;
            loss_sum += loss * b;
            ce_sum += ce * b;
            fair_sum += fair * b;
        }
        let n = slice.len() as f64;
        let soft = model.predict(slice.features.view())?;
        let correct = soft
            .iter()
            .zip(&slice.labels)
            .filter(|(&f, &y)| u8::from(f >= 0.5) == y)
            .count();
        let entry = EpochLog {
            epoch,
            loss: loss_sum / n,
            ce: ce_sum / n,
            fair_term: fair_sum / n,
            train_acc: correct as f64 / n,
        };
        debug!("{} epoch {epoch}: loss {:.5} acc {:.4}", mode, entry.loss, entry.train_acc);
        log.epochs.push(entry);
    }
    Ok((model, log))
}

/// Iterative label reweighing toward demographic parity.
///
/// Each round fits a model with `fit_weighted`, measures
/// `v = mean f | a=1 - mean f | a=0` on `slice`, and multiplies the weights of
/// the two `(y, a)` cells whose up-weighting shrinks `v` by `exp(rate * |v|)`:
/// `(1, 0)` and `(0, 1)` when `v > 0`, `(1, 1)` and `(0, 0)` when `v < 0`.
pub fn reweigh_labels(
    slice: &DataSlice,
    iterations: usize,
    rate: f64,
    mut fit_weighted: impl FnMut(&SampleWeights) -> Result<MlpModel>,
) -> Result<SampleWeights> {
    if iterations == 0 {
        return Err(Error::Config("reweighing needs at least one iteration".into()));
    }
    if !(rate >= 0.0 && rate.is_finite()) {
        return Err(Error::Config(format!("reweighing rate must be >= 0, got {rate}")));
    }
    let mut weights = SampleWeights::uniform(slice.len());
    if rate == 0.0 {
        return Ok(weights);
    }
    for round in 0..iterations {
        let model = fit_weighted(&weights)?;
        let soft = model.predict(slice.features.view())?;
        let mut sum = [0.0; 2];
        let mut n = [0usize; 2];
        for (&f, &a) in soft.iter().zip(&slice.sensitive) {
            sum[a as usize] += f;
            n[a as usize] += 1;
        }
        if n[0] == 0 || n[1] == 0 {
            return Err(Error::DegenerateData("reweighing needs both groups".into()));
        }
        let v = sum[1] / n[1] as f64 - sum[0] / n[0] as f64;
        if !v.is_finite() {
            return Err(Error::Numeric(format!("reweighing round {round}: parity gap is {v}")));
        }
        let factor = (rate * v.abs()).exp();
        let mut raw = weights.as_slice().to_vec();
        for (w, (&y, &a)) in raw.iter_mut().zip(slice.labels.iter().zip(&slice.sensitive)) {
            let boost = if v > 0.0 { y != a } else if v < 0.0 { y == a } else { false };
            if boost {
                *w *= factor;
            }
        }
        weights = SampleWeights::normalized(raw)?;
        debug!("reweighing round {round}: v = {v:.5}");
    }
    Ok(weights)
}

/// Threshold pair on the 0.01 grid minimizing hard EOd on `validation`.
/// Ties prefer higher accuracy, then the pair closest to (0.5, 0.5).
pub fn fit_group_thresholds(model: &MlpModel, validation: &DataSlice) -> Result<PostprocessThresholds> {
    let soft = model.predict(validation.features.view())?;
    fit_thresholds_from_scores(soft.view(), &validation.labels, &validation.sensitive)
}

pub fn fit_thresholds_from_scores(
    soft: ndarray::ArrayView1<'_, f64>,
    labels: &[u8],
    sensitive: &[u8],
) -> Result<PostprocessThresholds> {
    const GRID: usize = 99;
    let grid = |k: usize| (k + 1) as f64 / 100.0;
    let mut cell_n = [[0usize; 2]; 2];
    // predicted_pos[a][y][k]: rows of cell (y, a) with f >= grid(k)
    let mut predicted_pos = [[[0usize; GRID]; 2]; 2];
    for ((&f, &y), &a) in soft.iter().zip(labels).zip(sensitive) {
        cell_n[y as usize][a as usize] += 1;
        for (k, slot) in predicted_pos[a as usize][y as usize].iter_mut().enumerate() {
            if f >= grid(k) {
                *slot += 1;
            }
        }
    }
    if cell_n.iter().flatten().any(|&n| n == 0) {
        return Err(Error::DegenerateData(format!(
            "threshold fitting needs all four (y, a) cells, got {cell_n:?}"
        )));
    }
    let total = soft.len() as f64;
    let rates = |a: usize, k: usize| {
        let tp = predicted_pos[a][1][k];
        let fp = predicted_pos[a][0][k];
        let tpr = tp as f64 / cell_n[1][a] as f64;
        let fpr = fp as f64 / cell_n[0][a] as f64;
        let correct = tp + (cell_n[0][a] - fp);
        (tpr, fpr, correct)
    };
    let mut best: Option<(f64, f64, f64, [usize; 2])> = None;
    for k0 in 0..GRID {
        let (tpr0, fpr0, c0) = rates(0, k0);
        for k1 in 0..GRID {
            let (tpr1, fpr1, c1) = rates(1, k1);
            let eod = (tpr0 - tpr1).abs() + (fpr0 - fpr1).abs();
            let acc = (c0 + c1) as f64 / total;
            let dist = (grid(k0) - 0.5).abs() + (grid(k1) - 0.5).abs();
            let better = match best {
                None => true,
                Some((be, ba, bd, _)) => {
                    if (eod - be).abs() > 1e-12 {
                        eod < be
                    } else if (acc - ba).abs() > 1e-12 {
                        acc > ba
                    } else {
                        dist < bd - 1e-12
                    }
                }
            };
            if better {
                best = Some((eod, acc, dist, [k0, k1]));
            }
        }
    }
    let [k0, k1] = best.expect("grid is non-empty").3;
    Ok(Thresholds::new(grid(k0), grid(k1)))
}

/// Hard metrics of a trained model on `slice` with its own thresholds.
pub fn evaluate(trained: &TrainedModel, slice: &DataSlice) -> Result<crate::fairness::FairnessReport> {
    let soft = trained.model.predict(slice.features.view())?;
    report_from_scores(soft.view(), &slice.labels, &slice.sensitive, trained.decision_thresholds())
}
