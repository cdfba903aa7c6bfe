//! Signed-gradient PGD attacks under an L-infinity budget.
//!
//! Three objectives share one loop: cross-entropy (accuracy attack), relaxed
//! DI and relaxed EOd. For the fairness objectives the batch loss couples rows
//! only through group means, so each row's gradient is `s_i * grad f(x_i)`
//! up to a positive constant; `s_i` is +1 for rows whose soft label the
//! objective wants to raise and -1 otherwise. Only the sign of the input
//! gradient enters the update, so the positive constants are dropped.
//!
//! Each step is `x <- clip_box(clip_ball(x + step * sign(g)))`, where the ball is
//! centred on the clean input. Both sets are axis-aligned boxes, so clamping
//! in that order is the exact projection onto their intersection.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use log::warn;
use ndarray::{s, Array1, Array2, ArrayView1, Axis, Zip};

use crate::data::DataSlice;
use crate::error::{Error, Result};
use crate::fairness::{
    cell_means, format_num, relaxed_di, relaxed_eod, report_from_scores, sign, FairnessReport,
    Thresholds,
};
use crate::model::{ce_logit_grad, cross_entropy, MlpModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Objective {
    Accuracy,
    Di,
    Eod,
}

impl Objective {
    pub fn name(self) -> &'static str {
        match self {
            Objective::Accuracy => "accuracy",
            Objective::Di => "di",
            Objective::Eod => "eod",
        }
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "accuracy" | "acc" => Ok(Objective::Accuracy),
            "di" => Ok(Objective::Di),
            "eod" => Ok(Objective::Eod),
            other => Err(Error::Config(format!("unknown attack objective `{other}`"))),
        }
    }
}

/// How the fairness attacks decide which group to push up.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupSignPolicy {
    /// Re-evaluate the group means at every iterate.
    DynamicPerIteration,
    /// Decide once from the clean inputs.
    FixedInitial,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackConfig {
    pub objective: Objective,
    /// L-infinity radius in normalized feature units.
    pub epsilon: f64,
    pub step: f64,
    pub iterations: usize,
    /// Clamp every coordinate to `[0, 1]` after the ball projection.
    pub clip_box: bool,
    pub group_sign_policy: GroupSignPolicy,
    /// Coordinates marked `true` are never perturbed.
    pub frozen: Option<Vec<bool>>,
    /// Evaluate gradients in row chunks of this size; results are identical.
    pub chunk_rows: Option<usize>,
    /// Record a [`FairnessReport`] at every iterate (needs all four cells).
    pub record_snapshots: bool,
    pub thresholds: Thresholds,
}

impl AttackConfig {
    /// Evaluation defaults: `step = epsilon / 10`, 20 iterations.
    pub fn new(objective: Objective, epsilon: f64) -> Self {
        Self {
            objective,
            epsilon,
            step: epsilon / 10.0,
            iterations: 20,
            clip_box: true,
            group_sign_policy: GroupSignPolicy::DynamicPerIteration,
            frozen: None,
            chunk_rows: None,
            record_snapshots: false,
            thresholds: Thresholds::DEFAULT,
        }
    }

    pub fn with_budget(mut self, step: f64, iterations: usize) -> Self {
        self.step = step;
        self.iterations = iterations;
        self
    }

    pub fn with_snapshots(mut self, thresholds: Thresholds) -> Self {
        self.record_snapshots = true;
        self.thresholds = thresholds;
        self
    }

    pub fn validate(&self, n_features: usize) -> Result<()> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!("epsilon must be finite and >= 0, got {}", self.epsilon)));
        }
        if !(self.step >= 0.0 && self.step.is_finite()) {
            return Err(Error::Config(format!("step must be finite and >= 0, got {}", self.step)));
        }
        if self.iterations == 0 {
            return Err(Error::Config("attack needs at least one iteration".into()));
        }
        if matches!(self.chunk_rows, Some(0)) {
            return Err(Error::Config("chunk size must be positive".into()));
        }
        if let Some(f) = &self.frozen {
            if f.len() != n_features {
                return Err(Error::Shape(format!(
                    "frozen mask has {} entries for {} features",
                    f.len(),
                    n_features
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackResult {
    pub objective: Objective,
    pub epsilon: f64,
    pub adversarial: Array2<f64>,
    /// Objective value at iterates `0..=T`.
    pub objective_trace: Vec<f64>,
    /// Hard/relaxed metrics at iterates `0..=T`, when requested.
    pub snapshots: Vec<FairnessReport>,
    pub clean_soft: Array1<f64>,
    pub adversarial_soft: Array1<f64>,
}

impl AttackResult {
    /// Attack trace in CSV form: `iter,objective_value,accuracy,di,eod`.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iter,objective_value,accuracy,di,eod\n");
        for (t, v) in self.objective_trace.iter().enumerate() {
            let (acc, di, eod) = match self.snapshots.get(t) {
                Some(r) => (format_num(r.accuracy), format_num(r.di_hard), format_num(r.eod_hard)),
                None => (String::new(), String::new(), String::new()),
            };
            writeln!(out, "{t},{},{acc},{di},{eod}", format_num(*v)).unwrap();
        }
        out
    }

    pub fn write_trace(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.trace_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn final_report(&self) -> Option<&FairnessReport> {
        self.snapshots.last()
    }
}

/// `|f(x^T) - f(x^0)|` per row: the soft-label change under the attack.
pub fn soft_label_delta(result: &AttackResult) -> Array1<f64> {
    Zip::from(&result.adversarial_soft)
        .and(&result.clean_soft)
        .map_collect(|&a, &c| (a - c).abs())
}

pub fn pgd_accuracy(model: &MlpModel, slice: &DataSlice, cfg: &AttackConfig) -> Result<AttackResult> {
    expect_objective(cfg, Objective::Accuracy)?;
    run(model, slice, cfg, None).map(|(r, _)| r)
}

pub fn pgd_di(model: &MlpModel, slice: &DataSlice, cfg: &AttackConfig) -> Result<AttackResult> {
    expect_objective(cfg, Objective::Di)?;
    run(model, slice, cfg, None).map(|(r, _)| r)
}

pub fn pgd_eod(model: &MlpModel, slice: &DataSlice, cfg: &AttackConfig) -> Result<AttackResult> {
    expect_objective(cfg, Objective::Eod)?;
    run(model, slice, cfg, None).map(|(r, _)| r)
}

/// Runs whichever objective `cfg` names.
pub fn attack(model: &MlpModel, slice: &DataSlice, cfg: &AttackConfig) -> Result<AttackResult> {
    run(model, slice, cfg, None).map(|(r, _)| r)
}

/// Like [`attack`], additionally returning the iterates `x^0..=x^T` of the
/// rows at `tracked` (positions within the slice).
pub fn attack_tracked(
    model: &MlpModel,
    slice: &DataSlice,
    cfg: &AttackConfig,
    tracked: &[usize],
) -> Result<(AttackResult, Vec<Array2<f64>>)> {
    if let Some(&bad) = tracked.iter().find(|&&i| i >= slice.len()) {
        return Err(Error::Shape(format!("tracked row {bad} outside a slice of {}", slice.len())));
    }
    run(model, slice, cfg, Some(tracked)).map(|(r, t)| (r, t.expect("tracking requested")))
}

fn expect_objective(cfg: &AttackConfig, want: Objective) -> Result<()> {
    if cfg.objective == want {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "attack configured for `{}`, called as `{}`",
            cfg.objective.name(),
            want.name()
        )))
    }
}

fn check_populations(objective: Objective, slice: &DataSlice) -> Result<()> {
    let c = slice.group_counts();
    match objective {
        Objective::Accuracy => Ok(()),
        Objective::Di if c.group(0) == 0 || c.group(1) == 0 => Err(Error::DegenerateData(
            "DI attack needs both sensitive groups".into(),
        )),
        Objective::Eod if c.cells.iter().flatten().any(|&n| n == 0) => Err(Error::DegenerateData(
            format!("EOd attack needs all four (y, a) cells, got {:?}", c.cells),
        )),
        _ => Ok(()),
    }
}

/// +1 for rows of the group whose mean soft label is higher (ties: a = 1),
/// -1 for the others.
pub fn di_signs(soft: ArrayView1<'_, f64>, sensitive: &[u8]) -> Result<Array1<f64>> {
    let up = crate::fairness::advantaged_group(soft, sensitive)?;
    Ok(sensitive.iter().map(|&a| if a == up { 1.0 } else { -1.0 }).collect())
}

/// Per `(y, a)` cell: +1 for the group with the larger mean within label `y`
/// (ties: a = 1), -1 for the other.
pub fn eod_signs(soft: ArrayView1<'_, f64>, labels: &[u8], sensitive: &[u8]) -> Result<Array1<f64>> {
    let m = cell_means(soft, labels, sensitive)?;
    let up = [
        if m[0][1] >= m[0][0] { 1u8 } else { 0 },
        if m[1][1] >= m[1][0] { 1u8 } else { 0 },
    ];
    Ok(labels
        .iter()
        .zip(sensitive)
        .map(|(&y, &a)| if a == up[y as usize] { 1.0 } else { -1.0 })
        .collect())
}

fn objective_value(objective: Objective, soft: ArrayView1<'_, f64>, slice: &DataSlice) -> Result<f64> {
    match objective {
        Objective::Accuracy => {
            let total: f64 = soft
                .iter()
                .zip(&slice.labels)
                .map(|(&f, &y)| cross_entropy(f, f64::from(y)))
                .sum();
            Ok(total / soft.len().max(1) as f64)
        }
        Objective::Di => relaxed_di(soft, &slice.sensitive),
        Objective::Eod => relaxed_eod(soft, &slice.labels, &slice.sensitive),
    }
}

#[allow(clippy::type_complexity)]
fn run(
    model: &MlpModel,
    slice: &DataSlice,
    cfg: &AttackConfig,
    tracked: Option<&[usize]>,
) -> Result<(AttackResult, Option<Vec<Array2<f64>>>)> {
    cfg.validate(slice.features.ncols())?;
    if slice.features.ncols() != model.input_dim() {
        return Err(Error::Shape(format!(
            "model expects {} features, slice has {}",
            model.input_dim(),
            slice.features.ncols()
        )));
    }
    check_populations(cfg.objective, slice)?;
    if cfg.epsilon > 0.0 && cfg.step * cfg.iterations as f64 + 1e-12 < cfg.epsilon {
        warn!(
            "step {} x {} iterations cannot reach the epsilon = {} boundary",
            cfg.step, cfg.iterations, cfg.epsilon
        );
    }
    let clean = &slice.features;
    let labels = slice.labels_f64();
    let n = clean.nrows();
    let chunk = cfg.chunk_rows.unwrap_or(n.max(1));

    let (lower, upper) = {
        let mut lo = clean.mapv(|v| v - cfg.epsilon);
        let mut hi = clean.mapv(|v| v + cfg.epsilon);
        if cfg.clip_box {
            lo.mapv_inplace(|v| v.max(0.0));
            hi.mapv_inplace(|v| v.min(1.0));
        }
        // Inputs already outside the box keep their clean value as a bound.
        Zip::from(&mut lo).and(&mut hi).and(clean).for_each(|l, h, &c| {
            *l = l.min(c);
            *h = h.max(c);
        });
        (lo, hi)
    };

    let mut x = clean.clone();
    let mut objective_trace = Vec::with_capacity(cfg.iterations + 1);
    let mut snapshots = Vec::new();
    let mut trajectory = tracked.map(|rows| {
        let mut v = Vec::with_capacity(cfg.iterations + 1);
        v.push(clean.select(Axis(0), rows));
        v
    });
    let mut fixed_signs: Option<Array1<f64>> = None;
    let mut clean_soft = None;

    for t in 0..=cfg.iterations {
        let last = t == cfg.iterations;
        // Full-batch soft labels at the current iterate.
        let soft = if chunk >= n {
            None
        } else {
            let mut f = Array1::zeros(n);
            for start in (0..n).step_by(chunk) {
                let end = (start + chunk).min(n);
                f.slice_mut(s![start..end])
                    .assign(&model.predict(x.slice(s![start..end, ..]))?);
            }
            Some(f)
        };
        let full_trace = if soft.is_none() {
            Some(model.forward(x.view())?)
        } else {
            None
        };
        let soft: Array1<f64> = match (&soft, &full_trace) {
            (Some(f), _) => f.clone(),
            (None, Some(tr)) => tr.soft_labels().to_owned(),
            _ => unreachable!(),
        };
        if clean_soft.is_none() {
            clean_soft = Some(soft.clone());
        }
        objective_trace.push(objective_value(cfg.objective, soft.view(), slice)?);
        if cfg.record_snapshots {
            snapshots.push(report_from_scores(
                soft.view(),
                &slice.labels,
                &slice.sensitive,
                cfg.thresholds,
            )?);
        }
        if last {
            let result = AttackResult {
                objective: cfg.objective,
                epsilon: cfg.epsilon,
                adversarial: x,
                objective_trace,
                snapshots,
                clean_soft: clean_soft.expect("set at t = 0"),
                adversarial_soft: soft,
            };
            return Ok((result, trajectory));
        }

        let logit_grad = match cfg.objective {
            Objective::Accuracy => ce_logit_grad(soft.view(), labels.view()),
            Objective::Di | Objective::Eod => {
                let signs = match (cfg.group_sign_policy, &fixed_signs) {
                    (GroupSignPolicy::FixedInitial, Some(s)) => s.clone(),
                    _ => {
                        let s = if cfg.objective == Objective::Di {
                            di_signs(soft.view(), &slice.sensitive)?
                        } else {
                            eod_signs(soft.view(), &slice.labels, &slice.sensitive)?
                        };
                        if cfg.group_sign_policy == GroupSignPolicy::FixedInitial {
                            fixed_signs = Some(s.clone());
                        }
                        s
                    }
                };
                Zip::from(&signs)
                    .and(&soft)
                    .map_collect(|&s, &f| s * f * (1.0 - f))
            }
        };

        let grad = match full_trace {
            Some(tr) => model.input_gradient(&tr, logit_grad.view())?,
            None => {
                let mut g = Array2::zeros(x.dim());
                for start in (0..n).step_by(chunk) {
                    let end = (start + chunk).min(n);
                    let tr = model.forward(x.slice(s![start..end, ..]))?;
                    g.slice_mut(s![start..end, ..]).assign(
                        &model.input_gradient(&tr, logit_grad.slice(s![start..end]))?,
                    );
                }
                g
            }
        };

        let step = cfg.step;
        match &cfg.frozen {
            None => Zip::from(&mut x).and(&grad).and(&lower).and(&upper).for_each(
                |v, &g, &lo, &hi| {
                    *v = (*v + step * sign(g)).clamp(lo, hi);
                },
            ),
            Some(frozen) => {
                for (mut row, ((g_row, lo_row), hi_row)) in x
                    .rows_mut()
                    .into_iter()
                    .zip(grad.rows().into_iter().zip(lower.rows()).zip(upper.rows()))
                {
                    for j in 0..row.len() {
                        if !frozen[j] {
                            row[j] = (row[j] + step * sign(g_row[j])).clamp(lo_row[j], hi_row[j]);
                        }
                    }
                }
            }
        }
        if let (Some(traj), Some(rows)) = (trajectory.as_mut(), tracked) {
            traj.push(x.select(Axis(0), rows));
        }
    }
    unreachable!("loop returns at the final iterate")
}
