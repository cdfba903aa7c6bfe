//! Group fairness quantities: relaxed (soft-label) and hard (thresholded)
//! disparate impact and equalized odds, per-group rates, and the
//! confusion-cell by group partition used for alignment analysis.
//!
//! DI is reported as a gap in mean positive prediction between groups, not as
//! a ratio. EOd is the sum of the TPR gap and the FPR gap, so it ranges over
//! `[0, 2]`.

use ndarray::{Array1, ArrayView1};

use crate::data::DataSlice;
use crate::error::{Error, Result};
use crate::model::MlpModel;

/// Decision thresholds per sensitive group; a row is predicted positive when
/// its soft label is `>=` its group's threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub group: [f64; 2],
}

impl Thresholds {
    pub const DEFAULT: Thresholds = Thresholds { group: [0.5, 0.5] };

    pub fn uniform(t: f64) -> Self {
        Thresholds { group: [t, t] }
    }

    pub fn new(g0: f64, g1: f64) -> Self {
        Thresholds { group: [g0, g1] }
    }

    pub fn predict(&self, soft: f64, a: u8) -> u8 {
        u8::from(soft >= self.group[a as usize])
    }
}

impl Default for Thresholds {
    fn default() -> Self {
        Self::DEFAULT
    }
}

fn group_means(soft: ArrayView1<'_, f64>, sensitive: &[u8]) -> Result<[f64; 2]> {
    if soft.len() != sensitive.len() {
        return Err(Error::Shape(format!(
            "{} soft labels for {} sensitive values",
            soft.len(),
            sensitive.len()
        )));
    }
    let mut sum = [0.0; 2];
    let mut count = [0usize; 2];
    for (&f, &a) in soft.iter().zip(sensitive) {
        sum[a as usize] += f;
        count[a as usize] += 1;
    }
    if count.contains(&0) {
        return Err(Error::DegenerateData(format!(
            "sensitive group sizes {count:?}: both groups must be non-empty"
        )));
    }
    Ok([sum[0] / count[0] as f64, sum[1] / count[1] as f64])
}

/// Mean soft label per `(y, a)` cell, indexed `[y][a]`.
pub fn cell_means(
    soft: ArrayView1<'_, f64>,
    labels: &[u8],
    sensitive: &[u8],
) -> Result<[[f64; 2]; 2]> {
    if soft.len() != labels.len() || soft.len() != sensitive.len() {
        return Err(Error::Shape("soft labels, labels and groups differ in length".into()));
    }
    let mut sum = [[0.0; 2]; 2];
    let mut count = [[0usize; 2]; 2];
    for ((&f, &y), &a) in soft.iter().zip(labels).zip(sensitive) {
        sum[y as usize][a as usize] += f;
        count[y as usize][a as usize] += 1;
    }
    if count.iter().flatten().any(|&c| c == 0) {
        return Err(Error::DegenerateData(format!(
            "(y, a) cell sizes {count:?}: every cell must be non-empty"
        )));
    }
    let mut means = [[0.0; 2]; 2];
    for y in 0..2 {
        for a in 0..2 {
            means[y][a] = sum[y][a] / count[y][a] as f64;
        }
    }
    Ok(means)
}

/// `|mean f over a=1 - mean f over a=0|`.
pub fn relaxed_di(soft: ArrayView1<'_, f64>, sensitive: &[u8]) -> Result<f64> {
    let m = group_means(soft, sensitive)?;
    Ok((m[1] - m[0]).abs())
}

/// `sum_y |mean f over (y, 0) - mean f over (y, 1)|`.
pub fn relaxed_eod(soft: ArrayView1<'_, f64>, labels: &[u8], sensitive: &[u8]) -> Result<f64> {
    let m = cell_means(soft, labels, sensitive)?;
    Ok((m[0][0] - m[0][1]).abs() + (m[1][0] - m[1][1]).abs())
}

/// Group with the higher mean soft label; ties go to a = 1.
pub fn advantaged_group(soft: ArrayView1<'_, f64>, sensitive: &[u8]) -> Result<u8> {
    let m = group_means(soft, sensitive)?;
    Ok(if m[1] >= m[0] { 1 } else { 0 })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FairnessReport {
    pub accuracy: f64,
    pub di_relaxed: f64,
    pub di_hard: f64,
    pub eod_relaxed: f64,
    pub eod_hard: f64,
    pub tpr: [f64; 2],
    pub tnr: [f64; 2],
    pub thresholds: Thresholds,
}

impl FairnessReport {
    pub fn fpr(&self, a: usize) -> f64 {
        1.0 - self.tnr[a]
    }

    pub const CSV_HEADER: &'static str =
        "epsilon,accuracy,di,eod,tpr_g0,tpr_g1,tnr_g0,tnr_g1,di_relaxed,eod_relaxed";

    pub fn csv_fields(&self) -> [f64; 9] {
        [
            self.accuracy,
            self.di_hard,
            self.eod_hard,
            self.tpr[0],
            self.tpr[1],
            self.tnr[0],
            self.tnr[1],
            self.di_relaxed,
            self.eod_relaxed,
        ]
    }

    pub fn csv_row(&self, epsilon: f64) -> String {
        let mut s = format_num(epsilon);
        for v in self.csv_fields() {
            s.push(',');
            s.push_str(&format_num(v));
        }
        s
    }
}

/// Fixed-precision decimal used in every report CSV.
pub fn format_num(v: f64) -> String {
    format!("{v:.6}")
}

/// Thresholded metrics from precomputed soft labels.
pub fn report_from_scores(
    soft: ArrayView1<'_, f64>,
    labels: &[u8],
    sensitive: &[u8],
    thresholds: Thresholds,
) -> Result<FairnessReport> {
    let means = cell_means(soft, labels, sensitive)?;
    let eod_relaxed = (means[0][0] - means[0][1]).abs() + (means[1][0] - means[1][1]).abs();
    let di_relaxed = relaxed_di(soft, sensitive)?;
    // confusion[a][y][pred]
    let mut confusion = [[[0usize; 2]; 2]; 2];
    for ((&f, &y), &a) in soft.iter().zip(labels).zip(sensitive) {
        let p = thresholds.predict(f, a);
        confusion[a as usize][y as usize][p as usize] += 1;
    }
    let mut correct = 0;
    let mut tpr = [0.0; 2];
    let mut tnr = [0.0; 2];
    let mut pos_rate = [0.0; 2];
    for a in 0..2 {
        let c = &confusion[a];
        correct += c[1][1] + c[0][0];
        tpr[a] = c[1][1] as f64 / (c[1][1] + c[1][0]) as f64;
        tnr[a] = c[0][0] as f64 / (c[0][0] + c[0][1]) as f64;
        let n_a = c[0][0] + c[0][1] + c[1][0] + c[1][1];
        pos_rate[a] = (c[1][1] + c[0][1]) as f64 / n_a as f64;
    }
    let fpr = [1.0 - tnr[0], 1.0 - tnr[1]];
    Ok(FairnessReport {
        accuracy: correct as f64 / soft.len() as f64,
        di_relaxed,
        di_hard: (pos_rate[1] - pos_rate[0]).abs(),
        eod_relaxed,
        eod_hard: (tpr[0] - tpr[1]).abs() + (fpr[0] - fpr[1]).abs(),
        tpr,
        tnr,
        thresholds,
    })
}

pub fn hard_report(model: &MlpModel, slice: &DataSlice, thresholds: Thresholds) -> Result<FairnessReport> {
    let soft = model.predict(slice.features.view())?;
    report_from_scores(soft.view(), &slice.labels, &slice.sensitive, thresholds)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Outcome {
    TruePositive,
    FalseNegative,
    TrueNegative,
    FalsePositive,
}

impl Outcome {
    pub const ALL: [Outcome; 4] = [
        Outcome::TruePositive,
        Outcome::FalseNegative,
        Outcome::TrueNegative,
        Outcome::FalsePositive,
    ];

    pub fn of(label: u8, prediction: u8) -> Outcome {
        match (label, prediction) {
            (1, 1) => Outcome::TruePositive,
            (1, _) => Outcome::FalseNegative,
            (_, 0) => Outcome::TrueNegative,
            _ => Outcome::FalsePositive,
        }
    }

    pub fn label(self) -> u8 {
        match self {
            Outcome::TruePositive | Outcome::FalseNegative => 1,
            Outcome::TrueNegative | Outcome::FalsePositive => 0,
        }
    }

    pub fn short(self) -> &'static str {
        match self {
            Outcome::TruePositive => "TP",
            Outcome::FalseNegative => "FN",
            Outcome::TrueNegative => "TN",
            Outcome::FalsePositive => "FP",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Alignment {
    Aligned,
    Misaligned,
}

/// Whether the accuracy attack and the DI attack push a row's soft label in
/// the same direction. Accuracy pushes positives down and negatives up; DI
/// pushes the advantaged group up and the other down.
pub fn alignment_for(label: u8, group: u8, advantaged: u8) -> Alignment {
    let accuracy_pushes_up = label == 0;
    let di_pushes_up = group == advantaged;
    if accuracy_pushes_up == di_pushes_up {
        Alignment::Aligned
    } else {
        Alignment::Misaligned
    }
}

/// Table of alignment with `a = 1` as the advantaged group:
/// aligned TP0, FN0, TN1, FP1; misaligned TN0, FP0, TP1, FN1.
pub fn table_alignment(outcome: Outcome, group: u8) -> Alignment {
    alignment_for(outcome.label(), group, 1)
}

/// Eight disjoint index sets `{TP, FN, TN, FP} x {a=0, a=1}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubgroupPartition {
    cells: [[Vec<usize>; 2]; 4],
}

impl SubgroupPartition {
    pub fn from_scores(
        soft: ArrayView1<'_, f64>,
        labels: &[u8],
        sensitive: &[u8],
        thresholds: Thresholds,
    ) -> Result<Self> {
        if soft.len() != labels.len() || soft.len() != sensitive.len() {
            return Err(Error::Shape("soft labels, labels and groups differ in length".into()));
        }
        let mut cells: [[Vec<usize>; 2]; 4] = Default::default();
        for (i, ((&f, &y), &a)) in soft.iter().zip(labels).zip(sensitive).enumerate() {
            let o = Outcome::of(y, thresholds.predict(f, a));
            cells[o.index()][a as usize].push(i);
        }
        Ok(Self { cells })
    }

    pub fn get(&self, outcome: Outcome, group: u8) -> &[usize] {
        &self.cells[outcome.index()][group as usize]
    }

    pub fn tag(&self, outcome: Outcome, group: u8) -> Alignment {
        table_alignment(outcome, group)
    }

    /// `(outcome, group, rows, tag)` for all eight cells.
    pub fn iter(&self) -> impl Iterator<Item = (Outcome, u8, &[usize], Alignment)> + '_ {
        Outcome::ALL.into_iter().flat_map(move |o| {
            (0..2u8).map(move |a| (o, a, self.get(o, a), table_alignment(o, a)))
        })
    }

    pub fn total(&self) -> usize {
        self.cells.iter().flatten().map(Vec::len).sum()
    }
}

/// Partition of a slice's rows (positions within the slice) by confusion
/// cell and group. Requires every `(y, a)` cell to be populated.
pub fn partition_subgroups(
    model: &MlpModel,
    slice: &DataSlice,
    thresholds: Thresholds,
) -> Result<SubgroupPartition> {
    let soft = model.predict(slice.features.view())?;
    cell_means(soft.view(), &slice.labels, &slice.sensitive)?;
    SubgroupPartition::from_scores(soft.view(), &slice.labels, &slice.sensitive, thresholds)
}

/// `d relaxed_eod / d f_i`, using sign(0) = 0 on an exactly balanced cell pair.
pub fn relaxed_eod_soft_grad(
    soft: ArrayView1<'_, f64>,
    labels: &[u8],
    sensitive: &[u8],
) -> Result<Array1<f64>> {
    let m = cell_means(soft, labels, sensitive)?;
    let mut count = [[0usize; 2]; 2];
    for (&y, &a) in labels.iter().zip(sensitive) {
        count[y as usize][a as usize] += 1;
    }
    let direction = [
        sign(m[0][0] - m[0][1]),
        sign(m[1][0] - m[1][1]),
    ];
    Ok(labels
        .iter()
        .zip(sensitive)
        .map(|(&y, &a)| {
            let (y, a) = (y as usize, a as usize);
            let s = if a == 0 { direction[y] } else { -direction[y] };
            s / count[y][a] as f64
        })
        .collect())
}

pub(crate) fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn di_examples() {
        let s = [0u8, 0, 1];
        assert_eq!(relaxed_di(array![0.5, 0.5, 0.5].view(), &s).unwrap(), 0.0);
        let di = relaxed_di(array![0.2, 0.4, 0.8].view(), &s).unwrap();
        assert!((di - 0.5).abs() < 1e-15);
        assert_eq!(relaxed_di(array![0.0, 0.0, 1.0].view(), &s).unwrap(), 1.0);
        assert!(matches!(
            relaxed_di(array![0.1, 0.2].view(), &[1, 1]),
            Err(Error::DegenerateData(_))
        ));
    }

    #[test]
    fn eod_examples() {
        let y = [0u8, 0, 1, 1];
        let a = [0u8, 1, 0, 1];
        assert_eq!(relaxed_eod(array![0.3, 0.3, 0.7, 0.7].view(), &y, &a).unwrap(), 0.0);
        assert_eq!(relaxed_eod(array![1.0, 0.0, 1.0, 0.0].view(), &y, &a).unwrap(), 2.0);
        assert!(matches!(
            relaxed_eod(array![0.1, 0.2, 0.3].view(), &[0, 0, 1], &[0, 1, 0]),
            Err(Error::DegenerateData(_))
        ));
    }

    #[test]
    fn perfect_and_constant_classifiers() {
        let y = [0u8, 1, 0, 1, 0, 1, 0, 1];
        let a = [0u8, 0, 1, 1, 0, 0, 1, 1];
        let perfect: Array1<f64> = y.iter().map(|&v| if v == 1 { 0.9 } else { 0.1 }).collect();
        let r = report_from_scores(perfect.view(), &y, &a, Thresholds::DEFAULT).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.eod_hard, 0.0);
        let constant = Array1::from_elem(8, 0.9);
        let r = report_from_scores(constant.view(), &y, &a, Thresholds::DEFAULT).unwrap();
        assert_eq!(r.accuracy, 0.5);
        assert_eq!(r.di_hard, 0.0);
        assert_eq!(r.tpr, [1.0, 1.0]);
        assert_eq!(r.tnr, [0.0, 0.0]);
    }

    #[test]
    fn twelve_row_confusion_layout() {
        // group 0: TP TP FN TN FP FP ; group 1: TP FN FN TN TN FP
        let y = [1u8, 1, 1, 0, 0, 0, 1, 1, 1, 0, 0, 0];
        let a = [0u8, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1];
        let f = array![0.9, 0.8, 0.2, 0.1, 0.7, 0.6, 0.95, 0.3, 0.4, 0.2, 0.1, 0.55];
        let r = report_from_scores(f.view(), &y, &a, Thresholds::DEFAULT).unwrap();
        assert_eq!(r.tpr, [2.0 / 3.0, 1.0 / 3.0]);
        assert_eq!(r.tnr, [1.0 / 3.0, 2.0 / 3.0]);
        assert!((r.accuracy - 6.0 / 12.0).abs() < 1e-15);
        // positive rates 4/6 and 2/6
        assert!((r.di_hard - 2.0 / 6.0).abs() < 1e-15);
        assert!((r.eod_hard - (1.0 / 3.0 + 1.0 / 3.0)).abs() < 1e-15);
        let p = SubgroupPartition::from_scores(f.view(), &y, &a, Thresholds::DEFAULT).unwrap();
        assert_eq!(p.get(Outcome::TruePositive, 0), &[0, 1]);
        assert_eq!(p.get(Outcome::FalsePositive, 1), &[11]);
        assert_eq!(p.total(), 12);
    }

    #[test]
    fn table_tags() {
        use Alignment::*;
        // TP0 aligned, TP1 misaligned
        assert_eq!(table_alignment(Outcome::TruePositive, 0), Aligned);
        assert_eq!(table_alignment(Outcome::TruePositive, 1), Misaligned);
        assert_eq!(table_alignment(Outcome::FalseNegative, 0), Aligned);
        assert_eq!(table_alignment(Outcome::TrueNegative, 1), Aligned);
        assert_eq!(table_alignment(Outcome::FalsePositive, 1), Aligned);
        assert_eq!(table_alignment(Outcome::TrueNegative, 0), Misaligned);
        assert_eq!(table_alignment(Outcome::FalsePositive, 0), Misaligned);
        assert_eq!(table_alignment(Outcome::FalseNegative, 1), Misaligned);
    }

    #[test]
    fn partition_covers_all_rows() {
        let y = [1u8, 1, 0, 0, 1, 0];
        let a = [0u8, 1, 0, 1, 1, 0];
        let f = array![0.6, 0.7, 0.2, 0.9, 0.1, 0.5];
        let p = SubgroupPartition::from_scores(f.view(), &y, &a, Thresholds::DEFAULT).unwrap();
        let mut all: Vec<usize> = p.iter().flat_map(|(_, _, rows, _)| rows.to_vec()).collect();
        all.sort();
        assert_eq!(all, (0..6).collect::<Vec<_>>());
        // y=1, pred 1, a=0 -> TP0
        assert_eq!(p.get(Outcome::TruePositive, 0), &[0]);
        assert_eq!(p.get(Outcome::TruePositive, 1), &[1]);
    }

    #[test]
    fn per_group_thresholds_change_predictions() {
        let y = [1u8, 0, 1, 0];
        let a = [0u8, 0, 1, 1];
        let f = array![0.45, 0.3, 0.6, 0.55];
        let r = report_from_scores(f.view(), &y, &a, Thresholds::new(0.4, 0.58)).unwrap();
        assert_eq!(r.accuracy, 1.0);
    }

    #[test]
    fn eod_gradient_matches_difference_quotient() {
        let y = [0u8, 0, 1, 1, 0, 1, 1];
        let a = [0u8, 1, 0, 1, 1, 1, 0];
        let f = array![0.2, 0.5, 0.6, 0.4, 0.7, 0.1, 0.9];
        let g = relaxed_eod_soft_grad(f.view(), &y, &a).unwrap();
        let h = 1e-7;
        for i in 0..f.len() {
            let mut up = f.clone();
            up[i] += h;
            let mut dn = f.clone();
            dn[i] -= h;
            let fd = (relaxed_eod(up.view(), &y, &a).unwrap() - relaxed_eod(dn.view(), &y, &a).unwrap()) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-6, "{i}: {fd} vs {}", g[i]);
        }
    }
}
