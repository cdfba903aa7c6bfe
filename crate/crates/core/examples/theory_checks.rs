// Lower bound on relaxed EOd, attack alignment audit, Lipschitz estimate,
// robustness-bound diagnostics and the perturbed-DI bound.

use fairadv::attack::{AttackConfig, Objective};
use fairadv::data::{load_builtin, Split};
use fairadv::fairness::{relaxed_di, Thresholds};
use fairadv::theory::{
    check_corollary1, check_corollary2, eq6_check, estimate_lipschitz, theorem1_diagnostic, theorem2_diagnostic,
    DiagnosticConfig,
};
use fairadv::train::{train_dataset, TrainConfig, TrainMode};
use ndarray::array;

pub fn run_example() -> fairadv::Result<()> {
    // group 0 predicted perfectly, group 1 perfectly wrong
    let soft = array![0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0];
    let y = [0, 1, 0, 1, 0, 1, 0, 1];
    let a = [0, 0, 0, 0, 1, 1, 1, 1];
    let c = check_corollary1(soft.view(), &y, &a)?;
    println!("EOd {:.3} >= {:.3}, DI {:.3}", c.lhs, c.rhs, relaxed_di(soft.view(), &a)?);

    let ds = load_builtin("german", 0.8, 0)?;
    let test = ds.slice(Split::Test);
    let mut cfg = TrainConfig::new(TrainMode::Erm);
    cfg.epochs = 40;
    let model = train_dataset(&ds, &cfg)?.model;

    let audit = check_corollary2(&model, &test, Thresholds::DEFAULT)?;
    for cell in &audit.cells {
        println!(
            "{}{} {:?}: {} samples, {} coordinates, fraction {:?}",
            cell.outcome.short(),
            cell.group,
            cell.expected,
            cell.samples,
            cell.coordinates,
            cell.fraction()
        );
    }
    assert!(audit.holds());

    for n in [100, 1000, 4000] {
        println!("K estimate from {n} pairs: {:.4}", estimate_lipschitz(&model, test.features.view(), n, 1)?);
    }

    let dcfg = DiagnosticConfig::new(0.1);
    for (name, d) in [
        ("CE change under DI attack", theorem1_diagnostic(&model, &test, &dcfg)?),
        ("soft-label change under accuracy attack", theorem2_diagnostic(&model, &test, &dcfg)?),
    ] {
        for fam in &d.families {
            let worst = fam.pairs.iter().map(|p| p.slack()).fold(f64::INFINITY, f64::min);
            println!(
                "{name}, {}: {} pairs, {} violations, min slack {:.4}{}",
                fam.family.name(),
                fam.pairs.len(),
                fam.violations(),
                worst,
                fam.skipped.as_deref().map(|s| format!(" (skipped: {s})")).unwrap_or_default()
            );
        }
    }

    let e = eq6_check(&model, &test, &AttackConfig::new(Objective::Di, 0.1))?;
    println!("perturbed DI {:.4} <= clean {:.4} + xi {:.4}: {}", e.lhs, e.clean_di, e.xi_term, e.holds);
    Ok(())
}

#[allow(dead_code)]
fn main() -> fairadv::Result<()> {
    run_example()
}
