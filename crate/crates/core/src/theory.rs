//! Checks for the formal results relating fairness and accuracy attacks.
//!
//! The hard checks (`check_corollary1`, `check_corollary2`, `eq6_check`) are
//! exact identities or triangle inequalities and should never fail. The
//! theorem diagnostics compare measured robustness gaps against first-order
//! bounds built from a sampled Lipschitz estimate; they report slack and
//! violations but assert nothing.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{concatenate, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::attack::{attack_tracked, AttackConfig, Objective};
use crate::data::DataSlice;
use crate::error::{Error, Result};
use crate::fairness::{
    alignment_for, cell_means, format_num, relaxed_di, relaxed_eod, Alignment, Outcome,
    SubgroupPartition, Thresholds,
};
use crate::model::{cross_entropy, MlpModel};

/// Tolerance on the inequality in [`check_corollary1`].
pub const COR1_TOL: f64 = 1e-12;
/// Tolerance on the inequality in [`eq6_check`].
pub const EQ6_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Relaxed EOd against the weighted-DI lower bound
/// `|m00 - m01 + m10 - m11|` (cell means `m_ya`).
pub fn check_corollary1(soft: ArrayView1<'_, f64>, labels: &[u8], sensitive: &[u8]) -> Result<BoundCheck> {
    let m = cell_means(soft, labels, sensitive)?;
    let lhs = relaxed_eod(soft, labels, sensitive)?;
    let rhs = (m[0][0] - m[0][1] + m[1][0] - m[1][1]).abs();
    Ok(BoundCheck { lhs, rhs, holds: lhs >= rhs - COR1_TOL })
}

/// Sign agreement between the accuracy-attack and DI-attack step directions
/// in one `(outcome, group)` subgroup.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentCell {
    pub outcome: Outcome,
    pub group: u8,
    pub expected: Alignment,
    pub samples: usize,
    /// Coordinates audited (nonzero gradient in both directions).
    pub coordinates: usize,
    /// Coordinates whose sign relation matches `expected`.
    pub agreeing: usize,
}

impl AlignmentCell {
    /// `None` for an empty subgroup.
    pub fn fraction(&self) -> Option<f64> {
        (self.coordinates > 0).then(|| self.agreeing as f64 / self.coordinates as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentAudit {
    pub advantaged: u8,
    pub cells: Vec<AlignmentCell>,
}

impl AlignmentAudit {
    pub fn holds(&self) -> bool {
        self.cells.iter().all(|c| c.fraction().is_none_or(|f| f == 1.0))
    }

    pub fn cell(&self, outcome: Outcome, group: u8) -> &AlignmentCell {
        self.cells
            .iter()
            .find(|c| c.outcome == outcome && c.group == group)
            .expect("audit covers all eight subgroups")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("subgroup,expected,samples,coordinates,fraction\n");
        for c in &self.cells {
            writeln!(
                out,
                "{}{},{},{},{},{}",
                c.outcome.short(),
                c.group,
                match c.expected {
                    Alignment::Aligned => "aligned",
                    Alignment::Misaligned => "misaligned",
                },
                c.samples,
                c.coordinates,
                c.fraction().map(format_num).unwrap_or_default()
            )
            .unwrap();
        }
        out
    }
}

/// Alignment audit with a = 1 as the advantaged group.
pub fn check_corollary2(model: &MlpModel, slice: &DataSlice, thresholds: Thresholds) -> Result<AlignmentAudit> {
    check_corollary2_with(model, slice, thresholds, 1)
}

/// For every sample, compares coordinatewise `sign(d CE / dx)` with the DI
/// step direction `sign(s * df/dx)`, `s = +1` on the `advantaged` group.
/// Coordinates where either gradient is exactly zero are skipped.
pub fn check_corollary2_with(
    model: &MlpModel,
    slice: &DataSlice,
    thresholds: Thresholds,
    advantaged: u8,
) -> Result<AlignmentAudit> {
    let trace = model.forward(slice.features.view())?;
    let soft = trace.soft_labels().to_owned();
    let partition = SubgroupPartition::from_scores(soft.view(), &slice.labels, &slice.sensitive, thresholds)?;
    let labels = slice.labels_f64();
    let ce_logit = &soft - &labels;
    let di_logit: Array1<f64> = soft
        .iter()
        .zip(&slice.sensitive)
        .map(|(&f, &a)| if a == advantaged { f * (1.0 - f) } else { -f * (1.0 - f) })
        .collect();
    let ce_grad = model.input_gradient(&trace, ce_logit.view())?;
    let di_grad = model.input_gradient(&trace, di_logit.view())?;
    let mut cells = Vec::with_capacity(8);
    for (outcome, group, rows, _) in partition.iter() {
        let expected = alignment_for(outcome.label(), group, advantaged);
        let mut coordinates = 0;
        let mut agreeing = 0;
        for &i in rows {
            for (&c, &d) in ce_grad.row(i).iter().zip(di_grad.row(i)) {
                if c == 0.0 || d == 0.0 {
                    continue;
                }
                coordinates += 1;
                let same = (c > 0.0) == (d > 0.0);
                if same == (expected == Alignment::Aligned) {
                    agreeing += 1;
                }
            }
        }
        cells.push(AlignmentCell { outcome, group, expected, samples: rows.len(), coordinates, agreeing });
    }
    Ok(AlignmentAudit { advantaged, cells })
}

/// `df/dx` for each row.
pub fn soft_label_gradient(model: &MlpModel, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let trace = model.forward(x)?;
    let scale = trace.soft_labels().mapv(|f| f * (1.0 - f));
    model.input_gradient(&trace, scale.view())
}

/// Largest `||grad f(x) - grad f(x')|| / ||x - x'||` over `n_pairs` random
/// row pairs of `points`. Coincident pairs are skipped. The pair sequence
/// for a seed is a prefix of the sequence for any larger `n_pairs`.
pub fn estimate_lipschitz(model: &MlpModel, points: ArrayView2<'_, f64>, n_pairs: usize, seed: u64) -> Result<f64> {
    if n_pairs == 0 {
        return Err(Error::Config("need at least one pair".into()));
    }
    let n = points.nrows();
    if n < 2 {
        return Ok(0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs: Vec<(usize, usize)> = (0..n_pairs).map(|_| (rng.gen_range(0..n), rng.gen_range(0..n))).collect();
    let mut used: Vec<usize> = pairs.iter().flat_map(|&(i, j)| [i, j]).collect();
    used.sort_unstable();
    used.dedup();
    let grads = soft_label_gradient(model, points.select(Axis(0), &used).view())?;
    let pos = |r: usize| used.binary_search(&r).expect("row was selected");
    let mut best = 0.0f64;
    for (i, j) in pairs {
        let dx = euclidean(points.row(i), points.row(j));
        if dx == 0.0 {
            continue;
        }
        let dg = euclidean(grads.row(pos(i)), grads.row(pos(j)));
        best = best.max(dg / dx);
    }
    Ok(best)
}

pub fn euclidean(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Budget and sampling knobs shared by the theorem diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticConfig {
    pub epsilon: f64,
    pub step: f64,
    pub iterations: usize,
    pub lipschitz_pairs: usize,
    /// Outer samples kept per family (seeded subsample beyond this).
    pub max_outer: usize,
    /// Candidate inner samples kept per family.
    pub max_inner: usize,
    pub thresholds: Thresholds,
    pub seed: u64,
}

impl DiagnosticConfig {
    pub fn new(epsilon: f64) -> Self {
        Self {
            epsilon,
            step: epsilon / 10.0,
            iterations: 20,
            lipschitz_pairs: 2000,
            max_outer: 200,
            max_inner: 800,
            thresholds: Thresholds::DEFAULT,
            seed: 0,
        }
    }

    fn attack(&self, objective: Objective) -> AttackConfig {
        AttackConfig::new(objective, self.epsilon).with_budget(self.step, self.iterations)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairFamily {
    /// Outer FN1 against inner FN0.
    FalseNegative,
    /// Outer FP0 against inner FP1.
    FalsePositive,
    /// Outer TP1 against inner TP0.
    TruePositive,
    /// Outer TN0 against inner TN1.
    TrueNegative,
}

impl PairFamily {
    pub fn name(self) -> &'static str {
        match self {
            PairFamily::FalseNegative => "fn",
            PairFamily::FalsePositive => "fp",
            PairFamily::TruePositive => "tp",
            PairFamily::TrueNegative => "tn",
        }
    }

    /// `(outcome, outer group, inner group)`.
    fn cells(self) -> (Outcome, u8, u8) {
        match self {
            PairFamily::FalseNegative => (Outcome::FalseNegative, 1, 0),
            PairFamily::FalsePositive => (Outcome::FalsePositive, 0, 1),
            PairFamily::TruePositive => (Outcome::TruePositive, 1, 0),
            PairFamily::TrueNegative => (Outcome::TrueNegative, 0, 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairRecord {
    pub family: PairFamily,
    /// Row positions within the diagnosed slice.
    pub outer: usize,
    pub inner: usize,
    /// D (first theorem) or F (second theorem) of the outer sample.
    pub outer_value: f64,
    /// D of the inner sample, or its DI-attack soft-label change.
    pub inner_value: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// Per-iteration bound terms (`G_t`/`H_t`, or the distance terms).
    pub terms: Vec<f64>,
    /// `eta_t`/`rho_t`; empty for the second theorem.
    pub eta: Vec<f64>,
    /// Per-step soft-label change of the inner sample: under the accuracy
    /// attack (first theorem) or the DI attack (second theorem).
    pub inner_series: Vec<f64>,
}

impl PairRecord {
    pub fn slack(&self) -> f64 {
        self.rhs - self.lhs
    }

    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs + COR1_TOL
    }

    pub fn id(&self) -> String {
        format!("{}:{}:{}", self.family.name(), self.outer, self.inner)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FamilyReport {
    pub family: PairFamily,
    pub outer_population: usize,
    pub inner_population: usize,
    /// Why the family produced no pairs, when it did not.
    pub skipped: Option<String>,
    pub pairs: Vec<PairRecord>,
}

impl FamilyReport {
    pub fn violations(&self) -> usize {
        self.pairs.iter().filter(|p| !p.holds()).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TheoremDiagnostics {
    pub lipschitz: f64,
    pub iterations: usize,
    pub step: f64,
    pub epsilon: f64,
    pub n_features: usize,
    pub families: Vec<FamilyReport>,
}

impl TheoremDiagnostics {
    pub fn pairs(&self) -> impl Iterator<Item = &PairRecord> {
        self.families.iter().flat_map(|f| f.pairs.iter())
    }

    pub fn violations(&self) -> usize {
        self.families.iter().map(FamilyReport::violations).sum()
    }

    pub fn family(&self, family: PairFamily) -> Option<&FamilyReport> {
        self.families.iter().find(|f| f.family == family)
    }

    /// `#`-prefixed summary lines, then `pair_id,lhs,rhs,slack,holds`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# k_hat={}", format_num(self.lipschitz)).unwrap();
        writeln!(out, "# iterations={}", self.iterations).unwrap();
        writeln!(out, "# step={}", format_num(self.step)).unwrap();
        writeln!(out, "# epsilon={}", format_num(self.epsilon)).unwrap();
        for f in &self.families {
            write!(
                out,
                "# family={} outer={} inner={} pairs={} violations={}",
                f.family.name(),
                f.outer_population,
                f.inner_population,
                f.pairs.len(),
                f.violations()
            )
            .unwrap();
            if let Some(why) = &f.skipped {
                write!(out, " skipped={why}").unwrap();
            }
            out.push('\n');
        }
        out.push_str("pair_id,lhs,rhs,slack,holds\n");
        for p in self.pairs() {
            writeln!(
                out,
                "{},{},{},{},{}",
                p.id(),
                format_num(p.lhs),
                format_num(p.rhs),
                format_num(p.slack()),
                p.holds()
            )
            .unwrap();
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Attack trajectories of selected rows: `soft[t][k]` and `x[t]` for the
/// k-th tracked row at iterate t.
struct Tracked {
    x: Vec<Array2<f64>>,
    soft: Vec<Array1<f64>>,
}

fn run_tracked(
    model: &MlpModel,
    slice: &DataSlice,
    cfg: &AttackConfig,
    rows: &[usize],
) -> Result<(crate::attack::AttackResult, Tracked)> {
    let (result, x) = attack_tracked(model, slice, cfg, rows)?;
    let soft = x.iter().map(|xt| model.predict(xt.view())).collect::<Result<Vec<_>>>()?;
    Ok((result, Tracked { x, soft }))
}

/// Seeded subsample of at most `cap` entries, kept in ascending order.
fn capped(rows: &[usize], cap: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    if rows.len() <= cap {
        return rows.to_vec();
    }
    let mut picked: Vec<usize> = sample(rng, rows.len(), cap).into_iter().map(|k| rows[k]).collect();
    picked.sort_unstable();
    picked
}

struct Families {
    partition: SubgroupPartition,
    chosen: Vec<(PairFamily, Vec<usize>, Vec<usize>)>,
    tracked: Vec<usize>,
}

fn select_families(
    model: &MlpModel,
    slice: &DataSlice,
    cfg: &DiagnosticConfig,
    families: [PairFamily; 2],
) -> Result<Families> {
    let soft = model.predict(slice.features.view())?;
    let partition = SubgroupPartition::from_scores(soft.view(), &slice.labels, &slice.sensitive, cfg.thresholds)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(7);
    let mut chosen = Vec::new();
    let mut tracked = Vec::new();
    for fam in families {
        let (outcome, g_out, g_in) = fam.cells();
        let outer = capped(partition.get(outcome, g_out), cfg.max_outer, &mut rng);
        let inner = capped(partition.get(outcome, g_in), cfg.max_inner, &mut rng);
        tracked.extend(&outer);
        tracked.extend(&inner);
        chosen.push((fam, outer, inner));
    }
    tracked.sort_unstable();
    tracked.dedup();
    Ok(Families { partition, chosen, tracked })
}

fn lipschitz_points(clean: &Array2<f64>, extra: &[&Array2<f64>]) -> Array2<f64> {
    let mut views = vec![clean.view()];
    views.extend(extra.iter().map(|a| a.view()));
    concatenate(Axis(0), &views).expect("matching widths")
}

fn skipped_family(fam: PairFamily, outer: &[usize], inner: &[usize], p: &SubgroupPartition) -> Option<FamilyReport> {
    let (outcome, g_out, g_in) = fam.cells();
    let (no, ni) = (p.get(outcome, g_out).len(), p.get(outcome, g_in).len());
    if outer.is_empty() || inner.is_empty() {
        Some(FamilyReport {
            family: fam,
            outer_population: no,
            inner_population: ni,
            skipped: Some(format!("{}{}={} {}{}={}", outcome.short(), g_out, no, outcome.short(), g_in, ni)),
            pairs: Vec::new(),
        })
    } else {
        None
    }
}

fn step_changes(soft: &[Array1<f64>], k: usize) -> Vec<f64> {
    soft.windows(2).map(|w| (w[1][k] - w[0][k]).abs()).collect()
}

/// Compares the CE change under the DI attack between advantaged and
/// disadvantaged false negatives (and, symmetrically, false positives)
/// with the bound built from the accuracy-attack robustness of the inner
/// sample. Each outer sample pairs with the inner sample minimizing the bound.
pub fn theorem1_diagnostic(model: &MlpModel, slice: &DataSlice, cfg: &DiagnosticConfig) -> Result<TheoremDiagnostics> {
    let fams = select_families(model, slice, cfg, [PairFamily::FalseNegative, PairFamily::FalsePositive])?;
    let rows = &fams.tracked;
    let di_cfg = cfg.attack(Objective::Di);
    let acc_cfg = cfg.attack(Objective::Accuracy);
    let (di_res, di) = run_tracked(model, slice, &di_cfg, rows)?;
    let (acc_res, acc) = run_tracked(model, slice, &acc_cfg, rows)?;
    let lipschitz = estimate_lipschitz(
        model,
        lipschitz_points(&slice.features, &[&di_res.adversarial, &acc_res.adversarial]).view(),
        cfg.lipschitz_pairs,
        cfg.seed,
    )?;
    let n = slice.features.ncols();
    let root_n = (n as f64).sqrt();
    let t_max = cfg.iterations;
    let k_of = |r: usize| rows.binary_search(&r).expect("tracked");
    let d_value = |r: usize| {
        let y = f64::from(slice.labels[r]);
        (cross_entropy(di_res.adversarial_soft[r], y) - cross_entropy(di_res.clean_soft[r], y)).abs()
    };

    let mut families = Vec::new();
    for (fam, outer, inner) in &fams.chosen {
        if let Some(r) = skipped_family(*fam, outer, inner, &fams.partition) {
            families.push(r);
            continue;
        }
        let inner_delta: Vec<Vec<f64>> = inner.iter().map(|&j| step_changes(&acc.soft, k_of(j))).collect();
        let terms_for = |o: usize, ji: usize| -> (Vec<f64>, Vec<f64>) {
            let (ko, kj) = (k_of(o), k_of(inner[ji]));
            let mut terms = Vec::with_capacity(t_max);
            let mut eta = Vec::with_capacity(t_max);
            for (t, &step) in inner_delta[ji].iter().enumerate().take(t_max) {
                let fo = di.soft[t][ko];
                let fj = di.soft[t][kj];
                let d = euclidean(di.x[t].row(ko), di.x[t].row(kj));
                let e = ((fj - fo) / (fo * fj)).abs();
                eta.push(e);
                terms.push(root_n * lipschitz * d / fo + e * step);
            }
            (terms, eta)
        };
        let pairs: Vec<PairRecord> = outer
            .par_iter()
            .map(|&o| {
                let mut best = (f64::INFINITY, 0usize);
                for ji in 0..inner.len() {
                    let (terms, _) = terms_for(o, ji);
                    let rhs = cfg.step * terms.iter().sum::<f64>();
                    if rhs < best.0 {
                        best = (rhs, ji);
                    }
                }
                let (rhs, ji) = best;
                let (terms, eta) = terms_for(o, ji);
                let j = inner[ji];
                let (dout, din) = (d_value(o), d_value(j));
                PairRecord {
                    family: *fam,
                    outer: o,
                    inner: j,
                    outer_value: dout,
                    inner_value: din,
                    lhs: (dout - din).abs(),
                    rhs,
                    terms,
                    eta,
                    inner_series: inner_delta[ji].clone(),
                }
            })
            .collect();
        let (outcome, g_out, g_in) = fam.cells();
        families.push(FamilyReport {
            family: *fam,
            outer_population: fams.partition.get(outcome, g_out).len(),
            inner_population: fams.partition.get(outcome, g_in).len(),
            skipped: None,
            pairs,
        });
    }
    Ok(TheoremDiagnostics {
        lipschitz,
        iterations: t_max,
        step: cfg.step,
        epsilon: cfg.epsilon,
        n_features: n,
        families,
    })
}

/// Compares the soft-label change under the accuracy attack of advantaged
/// true positives (and disadvantaged true negatives) with the DI-attack
/// robustness of the opposite group's sample plus a distance term.
pub fn theorem2_diagnostic(model: &MlpModel, slice: &DataSlice, cfg: &DiagnosticConfig) -> Result<TheoremDiagnostics> {
    let fams = select_families(model, slice, cfg, [PairFamily::TruePositive, PairFamily::TrueNegative])?;
    let rows = &fams.tracked;
    let di_cfg = cfg.attack(Objective::Di);
    let acc_cfg = cfg.attack(Objective::Accuracy);
    let (di_res, di) = run_tracked(model, slice, &di_cfg, rows)?;
    let (acc_res, acc) = run_tracked(model, slice, &acc_cfg, rows)?;
    let lipschitz = estimate_lipschitz(
        model,
        lipschitz_points(&slice.features, &[&di_res.adversarial, &acc_res.adversarial]).view(),
        cfg.lipschitz_pairs,
        cfg.seed,
    )?;
    let n = slice.features.ncols();
    let root_n = (n as f64).sqrt();
    let t_max = cfg.iterations;
    let k_of = |r: usize| rows.binary_search(&r).expect("tracked");

    let mut families = Vec::new();
    for (fam, outer, inner) in &fams.chosen {
        if let Some(r) = skipped_family(*fam, outer, inner, &fams.partition) {
            families.push(r);
            continue;
        }
        let xi: Vec<f64> = inner
            .iter()
            .map(|&j| (di_res.adversarial_soft[j] - di_res.clean_soft[j]).abs())
            .collect();
        let terms_for = |o: usize, ji: usize| -> Vec<f64> {
            let (ko, kj) = (k_of(o), k_of(inner[ji]));
            (0..t_max)
                .map(|t| root_n * cfg.step * lipschitz * euclidean(acc.x[t].row(ko), acc.x[t].row(kj)))
                .collect()
        };
        let pairs: Vec<PairRecord> = outer
            .par_iter()
            .map(|&o| {
                let mut best = (f64::INFINITY, 0usize);
                for (ji, &x) in xi.iter().enumerate() {
                    let rhs = x + terms_for(o, ji).iter().sum::<f64>();
                    if rhs < best.0 {
                        best = (rhs, ji);
                    }
                }
                let (rhs, ji) = best;
                let f_out = (acc_res.adversarial_soft[o] - acc_res.clean_soft[o]).abs();
                PairRecord {
                    family: *fam,
                    outer: o,
                    inner: inner[ji],
                    outer_value: f_out,
                    inner_value: xi[ji],
                    lhs: f_out,
                    rhs,
                    terms: terms_for(o, ji),
                    eta: Vec::new(),
                    inner_series: step_changes(&di.soft, k_of(inner[ji])),
                }
            })
            .collect();
        let (outcome, g_out, g_in) = fam.cells();
        families.push(FamilyReport {
            family: *fam,
            outer_population: fams.partition.get(outcome, g_out).len(),
            inner_population: fams.partition.get(outcome, g_in).len(),
            skipped: None,
            pairs,
        });
    }
    Ok(TheoremDiagnostics {
        lipschitz,
        iterations: t_max,
        step: cfg.step,
        epsilon: cfg.epsilon,
        n_features: n,
        families,
    })
}

/// Total per-step soft-label movement `sum_t |f(x^t) - f(x^{t-1})|` of the
/// rows at `rows` under the attack `cfg`.
pub fn attack_path_length(model: &MlpModel, slice: &DataSlice, cfg: &AttackConfig, rows: &[usize]) -> Result<Vec<f64>> {
    let mut sorted = rows.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let (_, tr) = run_tracked(model, slice, cfg, &sorted)?;
    Ok(rows
        .iter()
        .map(|r| {
            let k = sorted.binary_search(r).expect("tracked");
            step_changes(&tr.soft, k).iter().sum()
        })
        .collect())
}

/// Share of positions where `candidate[i] <= reference[i]`.
pub fn fraction_not_greater(candidate: &[f64], reference: &[f64]) -> f64 {
    assert_eq!(candidate.len(), reference.len());
    if candidate.is_empty() {
        return 0.0;
    }
    let hits = candidate.iter().zip(reference).filter(|(c, r)| c <= r).count();
    hits as f64 / candidate.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct Eq6Check {
    pub lhs: f64,
    pub rhs: f64,
    pub clean_di: f64,
    /// `sum_a mean_{i in group a} xi_i`.
    pub xi_term: f64,
    pub holds: bool,
}

/// Relaxed DI after the DI attack against clean relaxed DI plus the mean
/// soft-label change of each group.
pub fn eq6_check(model: &MlpModel, slice: &DataSlice, cfg: &AttackConfig) -> Result<Eq6Check> {
    if cfg.objective != Objective::Di {
        return Err(Error::Config("the perturbed-DI bound is stated for the DI attack".into()));
    }
    let result = crate::attack::attack(model, slice, cfg)?;
    eq6_from_scores(result.clean_soft.view(), result.adversarial_soft.view(), &slice.sensitive)
}

pub fn eq6_from_scores(clean: ArrayView1<'_, f64>, perturbed: ArrayView1<'_, f64>, sensitive: &[u8]) -> Result<Eq6Check> {
    let lhs = relaxed_di(perturbed, sensitive)?;
    let clean_di = relaxed_di(clean, sensitive)?;
    let mut sum = [0.0; 2];
    let mut n = [0usize; 2];
    for ((&c, &p), &a) in clean.iter().zip(perturbed).zip(sensitive) {
        sum[a as usize] += (p - c).abs();
        n[a as usize] += 1;
    }
    let xi_term = sum[0] / n[0] as f64 + sum[1] / n[1] as f64;
    let rhs = clean_di + xi_term;
    Ok(Eq6Check { lhs, rhs, clean_di, xi_term, holds: lhs <= rhs + EQ6_TOL })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Activation;
    use ndarray::array;

    #[test]
    fn corollary1_successful_di_limit() {
        let soft = array![1.0, 1.0, 0.0, 0.0, 1.0, 0.0];
        let y = [0, 1, 0, 1, 1, 0];
        let a = [1, 1, 0, 0, 1, 0];
        let c = check_corollary1(soft.view(), &y, &a).unwrap();
        assert_eq!((c.lhs, c.rhs, c.holds), (2.0, 2.0, true));
        assert_eq!(relaxed_di(soft.view(), &a).unwrap(), 1.0);
    }

    #[test]
    fn lipschitz_skips_duplicates() {
        let m = MlpModel::new_seeded(&[2, 3, 1], Activation::Tanh, 0).unwrap();
        let x = array![[0.3, 0.3], [0.3, 0.3]];
        assert_eq!(estimate_lipschitz(&m, x.view(), 10, 0).unwrap(), 0.0);
    }

    #[test]
    fn eq6_zero_change_is_equality() {
        let f = array![0.2, 0.7, 0.4];
        let c = eq6_from_scores(f.view(), f.view(), &[0, 1, 1]).unwrap();
        assert_eq!(c.lhs, c.rhs);
        assert_eq!(c.xi_term, 0.0);
    }
}
