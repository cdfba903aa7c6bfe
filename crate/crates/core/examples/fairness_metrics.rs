// Relaxed and thresholded group metrics on a hand-made score vector.

use fairadv::fairness::{
    advantaged_group, relaxed_di, relaxed_eod, report_from_scores, Outcome, SubgroupPartition, Thresholds,
};
use ndarray::array;

pub fn run_example() -> fairadv::Result<()> {
    let soft = array![0.9, 0.8, 0.2, 0.1, 0.7, 0.6, 0.95, 0.3, 0.4, 0.2, 0.1, 0.55];
    let labels = [1, 1, 1, 0, 0, 0, 1, 1, 1, 0, 0, 0];
    let sensitive = [0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1];

    println!("relaxed DI  {:.4}", relaxed_di(soft.view(), &sensitive)?);
    println!("relaxed EOd {:.4}", relaxed_eod(soft.view(), &labels, &sensitive)?);
    println!("advantaged group: a={}", advantaged_group(soft.view(), &sensitive)?);

    for t in [Thresholds::DEFAULT, Thresholds::new(0.65, 0.35)] {
        let r = report_from_scores(soft.view(), &labels, &sensitive, t)?;
        println!(
            "thresholds {:?}: accuracy {:.3}, DI {:.3}, EOd {:.3}, TPR {:?}, FPR [{:.3}, {:.3}]",
            t.group,
            r.accuracy,
            r.di_hard,
            r.eod_hard,
            r.tpr,
            r.fpr(0),
            r.fpr(1)
        );
    }

    let part = SubgroupPartition::from_scores(soft.view(), &labels, &sensitive, Thresholds::DEFAULT)?;
    for (outcome, group, rows, tag) in part.iter() {
        println!("{}{} {:?}: rows {:?}", outcome.short(), group, tag, rows);
    }
    assert_eq!(part.get(Outcome::FalsePositive, 1), &[11]);
    Ok(())
}

#[allow(dead_code)]
fn main() -> fairadv::Result<()> {
    run_example()
}
