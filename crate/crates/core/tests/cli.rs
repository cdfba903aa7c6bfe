use std::path::Path;
use std::process::{Command, Output};

fn fairadv(out: &Path, args: &[&str]) -> Output {
    let mut full = vec!["--out", out.to_str().unwrap()];
    full.extend(args);
    raw(&full)
}

fn raw(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fairadv"))
        .args(args)
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn ok(o: Output) -> Output {
    assert_eq!(code(&o), 0, "stderr: {}", String::from_utf8_lossy(&o.stderr));
    o
}

fn read(p: impl AsRef<Path>) -> String {
    std::fs::read_to_string(p.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", p.as_ref().display()))
}

fn data_rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn ingest_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let o = ok(fairadv(a.path(), &["--seed", "7", "ingest", "german"]));
    assert!(String::from_utf8_lossy(&o.stdout).contains("800"));
    ok(fairadv(b.path(), &["--seed", "7", "ingest", "german"]));
    let first = read(a.path().join("german.csv"));
    assert_eq!(first, read(b.path().join("german.csv")));
    let train = first.lines().filter(|l| l.starts_with("train,")).count();
    let test = first.lines().filter(|l| l.starts_with("test,")).count();
    assert_eq!((train, test), (800, 200));
    let stats: Vec<_> = std::fs::read_dir(a.path()).unwrap().collect();
    assert_eq!(stats.len(), 2);
}

#[test]
fn ingest_usage_errors() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&fairadv(d.path(), &["ingest", "--schema", "/nonexistent.schema"])), 2);
    assert_eq!(code(&fairadv(d.path(), &["ingest", "nosuchdataset"])), 2);
    assert_eq!(code(&fairadv(d.path(), &["ingest"])), 2);
    assert_eq!(code(&fairadv(d.path(), &["--version"])), 0);
    assert_eq!(code(&fairadv(d.path(), &["frobnicate"])), 2);
}

#[test]
fn train_attack_verify_round() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path();
    assert_eq!(code(&fairadv(out, &["train", "german", "nonsense"])), 2);
    ok(fairadv(out, &["train", "german", "erm", "--epochs", "3"]));
    ok(fairadv(out, &["train", "german", "adv_acc", "--eps", "0", "--epochs", "3", "--name", "zero.model"]));
    assert_eq!(read(out.join("german_erm.model")), read(out.join("zero.model")));
    let log = read(out.join("german_erm.log.csv"));
    assert!(log.starts_with("# mode=erm"));
    assert_eq!(log.lines().count(), 5);

    let model = out.join("german_erm.model");
    let m = model.to_str().unwrap();
    ok(fairadv(out, &["attack", "german", m, "--objective", "eod", "--eps", "0.1"]));
    let trace = read(out.join("attack_german_eod_eps0.100000.csv"));
    assert_eq!(trace.lines().filter(|l| !l.starts_with('#')).count(), 22);
    assert!(out.join("adversarial_german_eod_eps0.100000.csv").is_file());

    ok(fairadv(out, &["verify", "german", m, "--suite", "all", "--lipschitz-pairs", "200"]));
    for f in ["cor1.csv", "cor2.csv", "thm1.csv", "thm2.csv", "eq6.csv"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    assert_eq!(code(&fairadv(out, &["verify", "german", out.join("absent.model").to_str().unwrap()])), 3);
    std::fs::write(out.join("bad.model"), "not a model\n").unwrap();
    assert_eq!(code(&fairadv(out, &["verify", "german", out.join("bad.model").to_str().unwrap()])), 2);
    assert_eq!(code(&fairadv(out, &["attack", "/nonexistent/data.csv", m])), 3);
}

#[test]
fn train_from_an_ingested_file() {
    let d = tempfile::tempdir().unwrap();
    ok(fairadv(d.path(), &["--seed", "3", "ingest", "german"]));
    let file = d.path().join("german.csv");
    ok(fairadv(d.path(), &["train", file.to_str().unwrap(), "erm", "--epochs", "1"]));
    assert!(d.path().join("german_erm.model").is_file());
}

fn column(header: &str, name: &str) -> usize {
    header.split(',').position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

#[test]
fn sweep_and_report() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path();
    let g = out.join("g");
    let c = out.join("c");
    let common = ["--modes", "erm", "--eps-grid", "0,0.1", "--epochs", "1", "--iterations", "5"];
    let mut args = vec!["--out", g.to_str().unwrap(), "--plot", "sweep", "german", "--seeds", "0,1"];
    args.extend(common);
    ok(raw(&args));
    assert!(g.join("plot_german_eod.svg").is_file());
    let mut args = vec!["--out", c.to_str().unwrap(), "sweep", "compas", "--seeds", "5"];
    args.extend(common);
    ok(raw(&args));

    let gs = g.join("sweep_german.csv");
    let cs = c.join("sweep_compas.csv");
    let sweep = read(&gs);
    let rows = data_rows(&sweep);
    assert_eq!(rows.len(), 4);
    let header = sweep.lines().find(|l| !l.starts_with('#')).unwrap();
    let acc = column(header, "accuracy");

    // one seed: mean equals the value, spread is zero
    ok(fairadv(out, &["report", cs.to_str().unwrap(), "--name", "single.csv"]));
    let single = read(out.join("single.csv"));
    let sh = single.lines().next().unwrap();
    for r in data_rows(&single) {
        assert_eq!(r[column(sh, "n")], "1");
        assert_eq!(r[column(sh, "eod_spread")].parse::<f64>().unwrap(), 0.0);
    }

    // two seeds: mean of the two rows
    ok(fairadv(out, &["report", gs.to_str().unwrap(), cs.to_str().unwrap()]));
    let merged = read(out.join("report.csv"));
    let mh = merged.lines().next().unwrap();
    let mrows = data_rows(&merged);
    assert_eq!(mrows.len(), 4);
    assert!(mrows.iter().any(|r| r[0] == "compas") && mrows.iter().any(|r| r[0] == "german"));
    let eps_col = column(header, "epsilon");
    let num = |v: &str| v.parse::<f64>().unwrap();
    for eps in [0.0, 0.1] {
        let vals: Vec<f64> = rows.iter().filter(|r| num(&r[eps_col]) == eps).map(|r| r[acc].parse().unwrap()).collect();
        assert_eq!(vals.len(), 2);
        let m = mrows.iter().find(|r| r[0] == "german" && num(&r[2]) == eps).unwrap();
        let mean: f64 = m[column(mh, "accuracy_mean")].parse().unwrap();
        assert!((mean - (vals[0] + vals[1]) / 2.0).abs() < 1e-12);
        assert_eq!(m[column(mh, "n")], "2");
    }

    std::fs::write(out.join("wrong.csv"), "a,b,c\n1,2,3\n").unwrap();
    assert_eq!(code(&fairadv(out, &["report", out.join("wrong.csv").to_str().unwrap()])), 2);
    assert_eq!(code(&fairadv(out, &["report", out.join("none.csv").to_str().unwrap()])), 3);
}
