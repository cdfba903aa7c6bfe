// Accuracy, DI and EOd attacks against a baseline model on German credit.

use fairadv::attack::{attack, soft_label_delta, AttackConfig, Objective};
use fairadv::data::{load_builtin, Split};
use fairadv::fairness::Thresholds;
use fairadv::train::{train_dataset, TrainConfig, TrainMode};

pub fn run_example() -> fairadv::Result<()> {
    let ds = load_builtin("german", 0.8, 0)?;
    let test = ds.slice(Split::Test);
    let mut cfg = TrainConfig::new(TrainMode::Erm);
    cfg.epochs = 40;
    let model = train_dataset(&ds, &cfg)?.model;

    for objective in [Objective::Accuracy, Objective::Di, Objective::Eod] {
        for eps in [0.05, 0.2] {
            let acfg = AttackConfig::new(objective, eps).with_snapshots(Thresholds::DEFAULT);
            let r = attack(&model, &test, &acfg)?;
            let (first, last) = (&r.snapshots[0], r.final_report().unwrap());
            let delta = soft_label_delta(&r);
            println!(
                "{:>8} eps {eps:.2}: objective {:.4} -> {:.4}, accuracy {:.3} -> {:.3}, DI {:.3} -> {:.3}, EOd {:.3} -> {:.3}, mean |df| {:.4}",
                objective.name(),
                r.objective_trace[0],
                r.objective_trace[acfg.iterations],
                first.accuracy,
                last.accuracy,
                first.di_hard,
                last.di_hard,
                first.eod_hard,
                last.eod_hard,
                delta.mean().unwrap_or(0.0)
            );
            let worst = (&r.adversarial - &test.features).iter().fold(0.0f64, |m, d| m.max(d.abs()));
            assert!(worst <= eps + 1e-12);
        }
    }

    let frozen = AttackConfig {
        frozen: Some(ds.categorical_mask.clone()),
        ..AttackConfig::new(Objective::Di, 0.2)
    };
    let r = attack(&model, &test, &frozen)?;
    println!("DI attack with one-hot columns frozen: relaxed DI {:.4} -> {:.4}", r.objective_trace[0], r.objective_trace[20]);
    print!("{}", r.trace_csv().lines().take(3).collect::<Vec<_>>().join("\n"));
    println!();
    Ok(())
}

#[allow(dead_code)]
fn main() -> fairadv::Result<()> {
    run_example()
}
