// Ingest the German credit data, persist it and read it back.

use fairadv::data::{load_builtin, stats_sidecar_path, LabeledDataset, Split};

pub fn run_example() -> fairadv::Result<()> {
    let ds = load_builtin("german", 0.8, 7)?;
    println!(
        "{} rows kept of {} read, {} features",
        ds.report.rows_kept,
        ds.report.rows_read,
        ds.n_features()
    );
    for split in [Split::Train, Split::Test] {
        let c = ds.group_counts(split);
        println!(
            "{:>5}: {} rows, female {} / male {}, positive rate {:.3}",
            split.name(),
            c.total(),
            c.group(0),
            c.group(1),
            (c.get(1, 0) + c.get(1, 1)) as f64 / c.total() as f64
        );
    }
    let numeric: Vec<&str> = ds.stats.numeric.iter().map(|(_, n, _, _)| n.as_str()).collect();
    println!("min-max scaled columns: {}", numeric.join(", "));

    let dir = tempfile::tempdir().map_err(|e| fairadv::Error::Config(e.to_string()))?;
    let path = dir.path().join("german.csv");
    ds.write_csv(&path)?;
    ds.write_stats(stats_sidecar_path(&path))?;
    let back = LabeledDataset::read_csv(&path)?;
    assert_eq!(back.features, ds.features);
    assert_eq!(back.categorical_mask, ds.categorical_mask);
    println!("round trip through {} ok", path.display());
    Ok(())
}

#[allow(dead_code)]
fn main() -> fairadv::Result<()> {
    run_example()
}
