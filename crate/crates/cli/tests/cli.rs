use std::path::Path;
use std::process::{Command, Output};

fn abacoc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_abacoc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn run_reports_final_accuracy() {
    let out = abacoc(&[
        "run",
        "--data",
        "synth:uniform_threshold",
        "--variant",
        "base",
        "--rate",
        "1.0",
        "--seed",
        "7",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("# spec: "));
    let r = rows(&text);
    assert_eq!(r.len(), 1);
    let acc: f64 = r[0][5].parse().unwrap();
    assert!((0.0..=1.0).contains(&acc));
}

#[test]
fn budget_bounds_model_size() {
    let out = abacoc(&[
        "run",
        "--data",
        "synth:rotating_hyperplane",
        "--n",
        "20000",
        "--variant",
        "auto-adj",
        "--budget",
        "100",
    ]);
    assert!(out.status.success());
    let r = rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(r[0][3], "100");
    assert!(r[0][6].parse::<usize>().unwrap() <= 100);
}

#[test]
fn identical_runs_write_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let out = abacoc(&[
            "run",
            "--data",
            "synth:two_moons_like",
            "--n",
            "3000",
            "--variant",
            "base-adj",
            "--rate",
            "0.3",
            "--seed",
            "11",
            "--out",
            p.to_str().unwrap(),
        ]);
        assert!(out.status.success());
    }
    assert_eq!(read(&a), read(&b));
    assert!(read(&a.with_extension("json")).contains("\"trace\""));

    // the embedded spec reproduces the file
    let c = dir.path().join("c.csv");
    let out = abacoc(&["replay", a.to_str().unwrap(), "--out", c.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(read(&a), read(&c));
}

#[test]
fn sweep_grid_has_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("s.csv");
    let out = abacoc(&[
        "sweep",
        "--data",
        "synth:two_moons_like",
        "--n",
        "2000",
        "--variants",
        "base,auto-adj",
        "--rates",
        "0.01,0.03,0.05,0.1",
        "--seeds",
        "5",
        "--out",
        p.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r = rows(&read(&p));
    assert_eq!(r.len(), 8);
    assert!(r.iter().all(|row| row[4] == "5"));
}

#[test]
fn missing_dataset_is_a_usage_error_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("none.csv");
    let out = abacoc(&[
        "sweep",
        "--data",
        "libsvm:/definitely/not/here.svm",
        "--variants",
        "base",
        "--out",
        p.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!p.exists());
    assert_eq!(abacoc(&["run", "--variant", "base"]).status.code(), Some(1));
    assert_eq!(abacoc(&["run", "--data", "synth:x"]).status.code(), Some(1));
    assert_eq!(
        abacoc(&[
            "run",
            "--data",
            "synth:two_moons_like",
            "--variant",
            "auto",
            "--budget",
            "5"
        ])
        .status
        .code(),
        Some(1)
    );
}

#[test]
fn corrupt_file_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.libsvm");
    std::fs::write(&p, "1 1:1\n1 2:1 1:1\n0 1:0.5\n").unwrap();
    let out = abacoc(&["run", "--data", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn generated_stream_runs_through_the_libsvm_reader() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("blobs.libsvm");
    let out = abacoc(&[
        "gen",
        "--data",
        "synth:multiclass_blobs",
        "--n",
        "1000",
        "--seed",
        "3",
        "--out",
        data.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert_eq!(read(&data).lines().count(), 1000);

    let dump = dir.path().join("balls.jsonl");
    let out = abacoc(&[
        "run",
        "--data",
        &format!("libsvm:{}", data.display()),
        "--variant",
        "auto-adj",
        "--dump-model",
        dump.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let r = rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(r[0][0], "blobs");
    let balls = read(&dump);
    assert_eq!(balls.lines().count(), r[0][6].parse::<usize>().unwrap());
    assert!(balls
        .lines()
        .all(|l| l.starts_with('{') && l.contains("\"radius\"")));
}

#[test]
fn csv_with_categorical_columns() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("d.csv");
    let mut text = String::from("x,color,label\n");
    for i in 0..200 {
        let red = i % 2 == 0;
        text += &format!(
            "{},{},{}\n",
            (i % 7) as f64 / 7.0,
            if red { "red" } else { "blue" },
            if red { "r" } else { "b" }
        );
    }
    std::fs::write(&p, text).unwrap();
    let out = abacoc(&[
        "run",
        "--data",
        p.to_str().unwrap(),
        "--label-column",
        "label",
        "--categorical",
        "color",
        "--variant",
        "auto-adj",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r = rows(&String::from_utf8(out.stdout).unwrap());
    assert!(r[0][5].parse::<f64>().unwrap() > 0.9);
}
