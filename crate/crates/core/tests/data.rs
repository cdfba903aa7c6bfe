use fairadv::data::{load_builtin, load_csv, DatasetSchema, LabeledDataset, Split};
use fairadv::Error;
use std::io::Write;

fn check_invariants(ds: &LabeledDataset) {
    let n = ds.len();
    let r = ds.report;
    assert_eq!(r.rows_read, r.rows_filtered + r.rows_rejected + r.rows_kept);
    assert_eq!(r.rows_kept, n);
    assert_eq!(ds.column_names.len(), ds.n_features());
    assert_eq!(ds.categorical_mask.len(), ds.n_features());
    let train = ds.indices(Split::Train).len();
    assert_eq!(train, (n as f64 * ds.split_fraction).round() as usize);
    assert_eq!(train + ds.indices(Split::Test).len(), n);
    let tr = ds.slice(Split::Train);
    assert!(ds.features.iter().all(|v| (0.0..=1.0).contains(v)));
    for (j, &cat) in ds.categorical_mask.iter().enumerate() {
        let col = tr.features.column(j);
        if cat {
            assert!(col.iter().all(|&v| v == 0.0 || v == 1.0));
        } else {
            let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert!(lo == 0.0 && (hi == 1.0 || hi == 0.0), "{}: [{lo}, {hi}]", ds.column_names[j]);
        }
    }
    for split in [Split::Train, Split::Test] {
        let c = ds.group_counts(split);
        for y in 0..2 {
            for a in 0..2 {
                assert!(c.get(y, a) > 0, "empty cell y={y} a={a} in {}", split.name());
            }
        }
    }
}

#[test]
fn builtin_datasets_ingest_cleanly() {
    for id in ["adult", "compas", "german"] {
        let ds = load_builtin(id, 0.8, 0).unwrap();
        check_invariants(&ds);
    }
}

#[test]
fn german_split_counts() {
    let ds = load_builtin("german", 0.8, 7).unwrap();
    assert_eq!(ds.len(), 1000);
    assert_eq!(ds.indices(Split::Train).len(), 800);
    assert_eq!(ds.indices(Split::Test).len(), 200);
    let other = load_builtin("german", 0.8, 8).unwrap();
    assert_ne!(ds.split, other.split);
    assert_eq!(ds, load_builtin("german", 0.8, 7).unwrap());
}

#[test]
fn sensitive_and_target_columns_are_not_features() {
    for id in ["adult", "compas", "german"] {
        let ds = load_builtin(id, 0.8, 0).unwrap();
        let schema = DatasetSchema::load(fairadv::data::find_schema(id, None).unwrap()).unwrap();
        for name in &ds.column_names {
            let base = name.split('=').next().unwrap();
            assert_ne!(base, schema.sensitive_column, "{id}");
            assert_ne!(base, schema.target_column, "{id}");
        }
    }
}

#[test]
fn adult_keeps_two_races() {
    let ds = load_builtin("adult", 0.8, 0).unwrap();
    assert!(ds.report.rows_filtered > 0);
    assert!(ds.len() > 40_000);
}

#[test]
fn file_round_trip_preserves_everything_numeric() {
    let ds = load_builtin("german", 0.7, 3).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("german.csv");
    ds.write_csv(&p).unwrap();
    let back = LabeledDataset::read_csv(&p).unwrap();
    assert_eq!(back.features, ds.features);
    assert_eq!(back.labels, ds.labels);
    assert_eq!(back.sensitive, ds.sensitive);
    assert_eq!(back.split, ds.split);
    assert_eq!(back.column_names, ds.column_names);
}

fn write(dir: &std::path::Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::File::create(&p).unwrap().write_all(text.as_bytes()).unwrap();
    p
}

#[test]
fn split_fraction_out_of_range_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "t.csv", "x,g,y\n1,A,1\n2,B,0\n3,A,0\n4,B,1\n");
    let mut s = DatasetSchema::new("y", "1", "g", "A");
    s.numeric_columns = vec!["x".into()];
    for f in [0.0, 1.0, -0.5, 1.5] {
        assert!(matches!(load_csv(&p, &s, f, 0), Err(Error::Config(_))));
    }
    assert!(load_csv(&p, &s, 0.5, 0).is_ok());
}

#[test]
fn missing_csv_is_a_missing_artifact() {
    let s = DatasetSchema::new("y", "1", "g", "A");
    assert!(matches!(load_csv("/nonexistent/x.csv", &s, 0.5, 0), Err(Error::MissingArtifact(_))));
}
