//! End-to-end gate: one PASS/FAIL line per criterion on stderr, then a
//! single assertion over all of them.

mod common;

use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

use common::*;
use fairadv::attack::{attack, AttackConfig, AttackResult, Objective};
use fairadv::data::{load_builtin, DataSlice, LabeledDataset, Split};
use fairadv::fairness::{report_from_scores, FairnessReport, Outcome, SubgroupPartition, Thresholds};
use fairadv::model::{Activation, LossKind};
use fairadv::theory::*;
use fairadv::train::{train_dataset, TrainConfig, TrainMode, TrainedModel};
use ndarray::Array1;
use rand::Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn announce(n: usize, v: &Verdict) {
    let tag = if v.pass { "PASS" } else { "FAIL" };
    // direct write so the line survives output capture
    let _ = writeln!(std::io::stderr(), "criterion {n}: {tag}  {}", v.detail);
}

fn gradient_oracle() -> Verdict {
    let start = Instant::now();
    let (mut done, mut failed, mut seed, mut worst) = (0, 0, 0u64, 0.0f64);
    while done < 200 {
        seed += 1;
        let act = if seed.is_multiple_of(2) { Activation::Relu } else { Activation::Tanh };
        let kind = if seed.is_multiple_of(3) { LossKind::SignedSoftLabel } else { LossKind::CrossEntropy };
        let Some((a, n)) = probe(seed, act, kind, seed % 4 < 2) else { continue };
        let e = relative_error(a, n);
        worst = worst.max(e);
        if e > TOL {
            failed += 1;
        }
        done += 1;
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(failed == 0 && secs < 10.0, format!("{done} checks, {failed} over tol, worst rel err {worst:.2e}, {secs:.2}s"))
}

fn metric_oracle() -> Verdict {
    let mut worst = 0.0f64;
    for seed in 0..100 {
        let (f, y, a, t) = random_instance(seed);
        let r = report_from_scores(f.view(), &y, &a, t).unwrap();
        let b = brute_metrics(f.as_slice().unwrap(), &y, &a, t.group);
        let pairs = [
            (r.accuracy, b.accuracy),
            (r.di_hard, b.di),
            (r.eod_hard, b.eod),
            (r.di_relaxed, b.di_relaxed),
            (r.eod_relaxed, b.eod_relaxed),
            (r.tpr[0], b.tpr[0]),
            (r.tpr[1], b.tpr[1]),
            (r.tnr[0], b.tnr[0]),
            (r.tnr[1], b.tnr[1]),
        ];
        for (x, z) in pairs {
            worst = worst.max((x - z).abs());
        }
    }
    verdict(worst <= 1e-12, format!("100 instances, max abs diff {worst:.1e}"))
}

fn corollary1_suite() -> Verdict {
    let mut r = rng(101);
    let mut held = 0;
    for _ in 0..1000 {
        let n = r.gen_range(4..40);
        let s = random_slice(&mut r, n, 1);
        let soft: Array1<f64> = (0..n).map(|_| r.gen::<f64>()).collect();
        if check_corollary1(soft.view(), &s.labels, &s.sensitive).unwrap().holds {
            held += 1;
        }
    }
    let soft = Array1::from(vec![1.0, 1.0, 1.0, 0.0, 0.0, 0.0]);
    let (y, a) = ([1, 0, 1, 1, 0, 0], [1, 1, 1, 0, 0, 0]);
    let lim = check_corollary1(soft.view(), &y, &a).unwrap();
    let di = fairadv::fairness::relaxed_di(soft.view(), &a).unwrap();
    let limit_ok = (lim.lhs - 2.0).abs() <= 1e-12 && (di - 1.0).abs() <= 1e-12;
    // full EOd gap in both label cells, opposite directions: DI stays low
    let w = Array1::from(vec![1.0, 0.0, 0.0, 1.0]);
    let (wy, wa) = ([1, 1, 0, 0], [1, 0, 1, 0]);
    let wc = check_corollary1(w.view(), &wy, &wa).unwrap();
    let wdi = fairadv::fairness::relaxed_di(w.view(), &wa).unwrap();
    let witness_ok = wc.holds && wc.lhs == 2.0 && wdi < 1.0;
    verdict(
        held == 1000 && limit_ok && witness_ok,
        format!("{held}/1000 hold; limit EOd {} DI {di}; witness EOd {} DI {wdi}", lim.lhs, wc.lhs),
    )
}

fn corollary2_suite() -> Verdict {
    let mut r = rng(102);
    let (mut cells, mut exact, mut coords) = (0, 0, 0);
    for k in 0..100 {
        let d = r.gen_range(1..6);
        let s = random_slice(&mut r, 24, d);
        let act = if k % 2 == 0 { Activation::Relu } else { Activation::Tanh };
        let m = random_model(&mut r, d, act);
        let audit = check_corollary2(&m, &s, Thresholds::DEFAULT).unwrap();
        for c in &audit.cells {
            if let Some(f) = c.fraction() {
                cells += 1;
                coords += c.coordinates;
                if f == 1.0 {
                    exact += 1;
                }
            }
        }
    }
    verdict(cells > 0 && exact == cells, format!("{exact}/{cells} populated cells at fraction 1.0 over {coords} coordinates"))
}

fn eq6_over(model: &fairadv::model::MlpModel, slice: &DataSlice, eps: &[f64], tally: &mut (usize, usize)) {
    for &e in eps {
        let c = eq6_check(model, slice, &AttackConfig::new(Objective::Di, e)).unwrap();
        tally.0 += 1;
        if c.holds {
            tally.1 += 1;
        }
    }
}

const ATTACK_EPS: f64 = 0.5;
const ACC_EPS: f64 = 0.2;
const MODES: [TrainMode; 4] = [TrainMode::Erm, TrainMode::FairAdvIn, TrainMode::AdvDi, TrainMode::AdvAcc];

struct AdultRun {
    models: Vec<(TrainMode, TrainedModel)>,
    /// DI attack at `ATTACK_EPS` per mode.
    di: Vec<FairnessReport>,
    /// Accuracy attack at `ACC_EPS` per mode.
    acc: Vec<FairnessReport>,
    /// Training plus the DI attack, per mode.
    secs: Vec<f64>,
}

impl AdultRun {
    fn model(&self, mode: TrainMode) -> &TrainedModel {
        &self.models.iter().find(|(m, _)| *m == mode).unwrap().1
    }

    fn index(mode: TrainMode) -> usize {
        MODES.iter().position(|&m| m == mode).unwrap()
    }
}

fn attack_report(t: &TrainedModel, test: &DataSlice, cfg: &AttackConfig) -> (AttackResult, FairnessReport) {
    let res = attack(&t.model, test, cfg).unwrap();
    let rep = report_from_scores(res.adversarial_soft.view(), &test.labels, &test.sensitive, t.decision_thresholds()).unwrap();
    (res, rep)
}

/// Trains every compared mode on Adult, attacks each one and writes the
/// model files, attack traces and a summary table into `dir`.
fn adult_run(ds: &LabeledDataset, dir: &Path) -> AdultRun {
    let test = ds.slice(Split::Test);
    let mut summary = format!("mode,objective,{}\n", FairnessReport::CSV_HEADER);
    let (mut models, mut di, mut acc, mut secs) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for mode in MODES {
        let start = Instant::now();
        let t = train_dataset(ds, &TrainConfig::for_dataset(mode, "adult")).unwrap();
        let mut elapsed = start.elapsed().as_secs_f64();
        t.save(dir.join(format!("{}.model", mode.name()))).unwrap();
        for (obj, eps) in [(Objective::Di, ATTACK_EPS), (Objective::Accuracy, ACC_EPS)] {
            let start = Instant::now();
            let (res, rep) = attack_report(&t, &test, &AttackConfig::new(obj, eps));
            if obj == Objective::Di {
                elapsed += start.elapsed().as_secs_f64();
            }
            res.write_trace(dir.join(format!("attack_{}_{}.csv", mode.name(), obj.name()))).unwrap();
            summary.push_str(&format!("{},{},{}\n", mode.name(), obj.name(), rep.csv_row(eps)));
            if obj == Objective::Di { di.push(rep) } else { acc.push(rep) }
        }
        secs.push(elapsed);
        models.push((mode, t));
    }
    std::fs::write(dir.join("summary.csv"), summary).unwrap();
    AdultRun { models, di, acc, secs }
}

fn reproduction(run: &AdultRun) -> Verdict {
    let k = AdultRun::index(TrainMode::FairAdvIn);
    let (r, secs) = (&run.di[k], run.secs[k]);
    verdict(
        r.accuracy >= 0.74 && r.eod_hard <= 0.30 && r.di_hard <= 0.12 && secs <= 600.0,
        format!(
            "fair_adv_in under DI attack eps {ATTACK_EPS}: accuracy {:.4} (>= 0.74), EOd {:.4} (<= 0.30), DI {:.4} (<= 0.12); {secs:.1}s",
            r.accuracy, r.eod_hard, r.di_hard
        ),
    )
}

fn separation(run: &AdultRun) -> Verdict {
    let erm = run.di[AdultRun::index(TrainMode::Erm)].eod_hard;
    let fair = run.di[AdultRun::index(TrainMode::FairAdvIn)].eod_hard;
    verdict(
        erm >= 3.0 * fair && erm >= 1.0,
        format!("EOd under DI attack eps {ATTACK_EPS}: erm {erm:.4}, fair_adv_in {fair:.4}"),
    )
}

fn accuracy_direction(run: &AdultRun) -> Verdict {
    let erm = run.acc[AdultRun::index(TrainMode::Erm)].accuracy;
    let adv = run.acc[AdultRun::index(TrainMode::AdvDi)].accuracy;
    verdict(adv - erm >= 0.05, format!("accuracy under accuracy attack eps {ACC_EPS}: adv_di {adv:.4}, erm {erm:.4}"))
}

fn theorem_checks(run: &AdultRun, test: &DataSlice, dir: &Path) -> Verdict {
    let erm = run.model(TrainMode::Erm);
    let cfg = DiagnosticConfig::new(ACC_EPS);
    let (d1, d2) = match (theorem1_diagnostic(&erm.model, test, &cfg), theorem2_diagnostic(&erm.model, test, &cfg)) {
        (Ok(a), Ok(b)) => (a, b),
        (a, b) => return verdict(false, format!("diagnostic error: {:?} {:?}", a.err(), b.err())),
    };
    d1.write(dir.join("thm1.csv")).unwrap();
    d2.write(dir.join("thm2.csv")).unwrap();
    let rows = |d: &TheoremDiagnostics| d.to_csv().lines().filter(|l| !l.starts_with('#')).count() - 1;
    let emitted = rows(&d1) == d1.pairs().count() && rows(&d2) == d2.pairs().count() && d1.pairs().count() > 0;

    let clean = erm.model.predict(test.features.view()).unwrap();
    let part = SubgroupPartition::from_scores(clean.view(), &test.labels, &test.sensitive, erm.decision_thresholds()).unwrap();
    let fn0 = part.get(Outcome::FalseNegative, 0).to_vec();
    let tp0 = part.get(Outcome::TruePositive, 0).to_vec();
    let acc_cfg = AttackConfig::new(Objective::Accuracy, ACC_EPS);
    let delta = |t: &TrainedModel| attack_path_length(&t.model, test, &acc_cfg, &fn0).unwrap();
    let delta_frac = fraction_not_greater(&delta(run.model(TrainMode::AdvAcc)), &delta(erm));
    let di_cfg = AttackConfig::new(Objective::Di, ACC_EPS);
    let xi = |t: &TrainedModel| {
        let r = attack(&t.model, test, &di_cfg).unwrap();
        tp0.iter().map(|&i| (r.adversarial_soft[i] - r.clean_soft[i]).abs()).collect::<Vec<_>>()
    };
    let xi_frac = fraction_not_greater(&xi(run.model(TrainMode::AdvDi)), &xi(erm));
    verdict(
        emitted && !fn0.is_empty() && !tp0.is_empty() && delta_frac >= 0.8 && xi_frac >= 0.8,
        format!(
            "pairs {}+{} ({} bound violations reported), k_hat {:.3}; delta smaller on {:.3} of {} FN0 rows, xi smaller on {:.3} of {} TP0 rows",
            d1.pairs().count(),
            d2.pairs().count(),
            d1.violations() + d2.violations(),
            d1.lipschitz,
            delta_frac,
            fn0.len(),
            xi_frac,
            tp0.len()
        ),
    )
}

fn identical_dirs(a: &Path, b: &Path) -> (usize, Vec<String>) {
    let mut names: Vec<_> = std::fs::read_dir(a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    let mut differing = Vec::new();
    for n in &names {
        let (x, y) = (std::fs::read(a.join(n)).unwrap(), std::fs::read(b.join(n)).ok());
        if y.as_deref() != Some(x.as_slice()) {
            differing.push(n.to_string_lossy().into_owned());
        }
    }
    (names.len(), differing)
}

#[test]
fn acceptance() {
    let mut verdicts: Vec<(usize, Verdict)> = Vec::new();
    let mut record = |n: usize, v: Verdict| {
        announce(n, &v);
        verdicts.push((n, v));
    };
    record(1, gradient_oracle());
    record(2, metric_oracle());
    record(3, corollary1_suite());
    record(4, corollary2_suite());

    let ds = load_builtin("adult", 0.8, 0).unwrap();
    let test = ds.slice(Split::Test);
    let (da, db) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (run, _) = std::thread::scope(|s| {
        let h = s.spawn(|| adult_run(&ds, db.path()));
        (adult_run(&ds, da.path()), h.join().unwrap())
    });

    // every attacked model: random networks, the Adult models, German and COMPAS baselines
    let mut tally = (0, 0);
    let mut r = rng(103);
    for _ in 0..100 {
        let s = random_slice(&mut r, 30, 4);
        let m = random_model(&mut r, 4, Activation::Relu);
        eq6_over(&m, &s, &[0.05, 0.2, 0.5], &mut tally);
    }
    for (_, t) in &run.models {
        eq6_over(&t.model, &test, &[0.05, 0.1, 0.2, 0.3, 0.5], &mut tally);
    }
    for id in ["german", "compas"] {
        let d = load_builtin(id, 0.8, 0).unwrap();
        for mode in [TrainMode::Erm, TrainMode::FairAdvIn] {
            let t = train_dataset(&d, &TrainConfig::for_dataset(mode, id)).unwrap();
            eq6_over(&t.model, &d.slice(Split::Test), &[0.01, 0.1, 0.5], &mut tally);
        }
    }
    record(5, verdict(tally.0 == tally.1, format!("{}/{} attacked combinations", tally.1, tally.0)));

    record(6, reproduction(&run));
    record(7, separation(&run));
    record(8, accuracy_direction(&run));

    let trend: Vec<String> = [0.1, 0.2, 0.3, 0.4, 0.5]
        .iter()
        .map(|&e| {
            let cfg = AttackConfig::new(Objective::Di, e);
            let erm = attack_report(run.model(TrainMode::Erm), &test, &cfg).1.eod_hard;
            let fair = attack_report(run.model(TrainMode::FairAdvIn), &test, &cfg).1.eod_hard;
            format!("{e}: {erm:.3}/{fair:.3}")
        })
        .collect();
    let _ = writeln!(std::io::stderr(), "  EOd under DI attack, erm/fair_adv_in by eps: {}", trend.join(", "));

    record(9, theorem_checks(&run, &test, da.path()));

    let (files, differing) = identical_dirs(db.path(), da.path());
    record(
        10,
        verdict(files >= 13 && differing.is_empty(), format!("{files} report files compared, differing: {differing:?}")),
    );

    let failed: Vec<usize> = verdicts.iter().filter(|(_, v)| !v.pass).map(|(n, _)| *n).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
