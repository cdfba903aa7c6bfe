// A small epsilon sweep on German credit with curve files, SVG plots and a merged report.

use fairadv::experiment::{merge_reports, sweep, SweepSpec};
use fairadv::train::TrainMode;

pub fn run_example() -> fairadv::Result<()> {
    let dir = tempfile::tempdir().map_err(|e| fairadv::Error::Config(e.to_string()))?;
    let mut spec = SweepSpec::new("german", dir.path());
    spec.modes = vec![TrainMode::Erm, TrainMode::AdvDi];
    spec.epsilons = vec![0.0, 0.05, 0.1, 0.2];
    spec.seeds = vec![0, 1];
    spec.train.epochs = 20;
    spec.train.train_epsilon = 0.05;
    spec.plot = true;
    let report = sweep(&spec, 0)?;
    for a in report.aggregates() {
        println!(
            "{:<7} eps {:.2}: accuracy {:.3}, DI {:.3}, EOd {:.3} (n={})",
            a.mode, a.epsilon, a.mean[0], a.mean[1], a.mean[2], a.n
        );
    }
    let mut files: Vec<String> = std::fs::read_dir(dir.path())
        .map_err(|e| fairadv::Error::Config(e.to_string()))?
        .filter_map(|e| e.ok().map(|e| e.file_name().to_string_lossy().into_owned()))
        .collect();
    files.sort();
    println!("files: {}", files.join(", "));
    let merged = merge_reports(&[dir.path().join("sweep_german.csv")])?;
    println!("{}", merged.lines().next().unwrap_or(""));
    Ok(())
}

#[allow(dead_code)]
fn main() -> fairadv::Result<()> {
    run_example()
}
