// The six training modes on German credit, evaluated clean and under a DI attack.

use fairadv::attack::{attack, AttackConfig, Objective};
use fairadv::data::{load_builtin, Split};
use fairadv::train::{evaluate, train_dataset, TrainConfig, TrainMode};

pub fn run_example() -> fairadv::Result<()> {
    let ds = load_builtin("german", 0.8, 0)?;
    let test = ds.slice(Split::Test);
    println!("{:<14} {:>8} {:>8} {:>8} {:>10} {:>8}", "mode", "acc", "DI", "EOd", "acc@DI.1", "EOd@DI.1");
    for mode in TrainMode::ALL {
        let mut cfg = TrainConfig::for_dataset(mode, "german");
        cfg.epochs = 30;
        let trained = train_dataset(&ds, &cfg)?;
        let clean = evaluate(&trained, &test)?;
        let acfg = AttackConfig::new(Objective::Di, 0.1).with_snapshots(trained.decision_thresholds());
        let adv = attack(&trained.model, &test, &acfg)?;
        let adv = adv.final_report().unwrap();
        println!(
            "{:<14} {:>8.3} {:>8.3} {:>8.3} {:>10.3} {:>8.3}",
            mode.name(),
            clean.accuracy,
            clean.di_hard,
            clean.eod_hard,
            adv.accuracy,
            adv.eod_hard
        );
        if let Some(t) = trained.thresholds {
            println!("{:<14} thresholds {:?}", "", t.group);
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> fairadv::Result<()> {
    run_example()
}
