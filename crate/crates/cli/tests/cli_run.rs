use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use spinbath_cli::run::{read_columns, METRICS_FILE, PAIR_FILE};
use spinbath_cli::validate::validate;
use spinbath_cli::RunConfig;

const SMALL: &str = r#"
[system]
topology = "ring"
family = "Heisenberg"
J = -5.0
n_S = 2
initial_state = "UD"

[environment]
topology = "ring"
family = "HeisenbergType"
Omega = 0.15
n = 6
initial_state = "RANDOM"

[interaction]
family = "Heisenberg"
Delta = -0.075

[run]
n_steps = 20
seed = 3
checkpoint_every = 5
"#;

fn spinbath(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spinbath"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out_dir = dir.path().join("out");
    let out = out_dir.to_str().unwrap();

    assert_eq!(code(&spinbath(&["validate", "--config", &cfg])), 0);
    assert_eq!(code(&spinbath(&["run"])), 2);

    let bad = write_config(
        dir.path(),
        &SMALL.replace("Delta = -0.075", "Delta = -0.075\nfoo = 1"),
    );
    let o = spinbath(&["run", "--config", &bad, "--out", out]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line"));

    let big = write_config(dir.path(), &SMALL.replace("n = 6", "n = 30"));
    assert_eq!(code(&spinbath(&["run", "--config", &big, "--out", out])), 4);

    let cfg = write_config(dir.path(), SMALL);
    assert_eq!(
        code(&spinbath(&[
            "validate",
            "--config",
            &cfg,
            "--corrupt-bounds"
        ])),
        3
    );
}

#[test]
fn resume_matches_uninterrupted_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let o = spinbath(&["run", "--config", &cfg, "--out", a.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let b_str = b.to_str().unwrap();
    assert_eq!(
        code(&spinbath(&[
            "run",
            "--config",
            &cfg,
            "--out",
            b_str,
            "--stop-after",
            "7"
        ])),
        0
    );
    assert!(b.join("checkpoint.bin").exists());
    assert_eq!(
        code(&spinbath(&[
            "run", "--config", &cfg, "--out", b_str, "--resume"
        ])),
        0
    );
    assert!(!b.join("checkpoint.bin").exists());

    for name in [METRICS_FILE, PAIR_FILE] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn resume_rejects_a_different_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("o");
    let out = out.to_str().unwrap();
    assert_eq!(
        code(&spinbath(&[
            "run",
            "--config",
            &cfg,
            "--out",
            out,
            "--stop-after",
            "3"
        ])),
        0
    );
    assert_eq!(
        code(&spinbath(&[
            "run", "--config", &cfg, "--out", out, "--resume", "--seed", "4"
        ])),
        2
    );
}

#[test]
fn populations_sum_to_one_and_times_are_uniform() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::parse(SMALL).unwrap();
    spinbath_cli::run(&cfg, 3, dir.path(), Default::default()).unwrap();
    let cols = read_columns(&dir.path().join(METRICS_FILE)).unwrap();
    let t = &cols[0].1;
    assert_eq!(t.len(), 21);
    for (k, tk) in t.iter().enumerate() {
        assert!((tk.unwrap() - k as f64 * cfg.run.tau).abs() < 1e-12);
    }
    let rho: Vec<_> = cols.iter().filter(|(n, _)| n.starts_with("rho_")).collect();
    assert_eq!(rho.len(), 4);
    for row in 0..t.len() {
        let total: f64 = rho.iter().map(|(_, c)| c[row].unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-10);
    }
}

#[test]
fn zero_steps_writes_the_initial_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::parse(&SMALL.replace("n_steps = 20", "n_steps = 0")).unwrap();
    let summary = spinbath_cli::run(&cfg, 3, dir.path(), Default::default()).unwrap();
    assert!(summary.completed);
    let cols = read_columns(&dir.path().join(METRICS_FILE)).unwrap();
    assert_eq!(cols[0].1, vec![Some(0.0)]);
}

#[test]
fn spectrum_lists_the_two_spin_levels() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let o = spinbath(&["spectrum", "--config", &cfg]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let energies: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    let want = [-3.75, 1.25, 1.25, 1.25];
    assert_eq!(energies.len(), 4);
    for (e, w) in energies.iter().zip(want) {
        assert!((e - w).abs() < 1e-12, "{text}");
    }
}

#[test]
fn batch_seeds_get_their_own_directories() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL.replace("n_steps = 20", "n_steps = 3"));
    let out = dir.path().join("batch");
    let o = spinbath(&[
        "run",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--seeds",
        "1-2,5",
        "--jobs",
        "2",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for s in [1, 2, 5] {
        assert!(out.join(format!("seed_{s}")).join(METRICS_FILE).exists());
    }
    let a = fs::read(out.join("seed_1").join(METRICS_FILE)).unwrap();
    let b = fs::read(out.join("seed_2").join(METRICS_FILE)).unwrap();
    assert_ne!(a, b);
}

#[test]
fn fit_writes_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL.replace("n_steps = 20", "n_steps = 60"));
    let out = dir.path().join("o");
    let out = out.to_str().unwrap();
    assert_eq!(code(&spinbath(&["run", "--config", &cfg, "--out", out])), 0);
    let o = spinbath(&["fit", "--config", &cfg, "--out", out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: toml::Table = fs::read_to_string(Path::new(out).join("fit.toml"))
        .unwrap()
        .parse()
        .unwrap();
    assert!(report.contains_key("sigma"));
}

#[test]
fn commutators_follow_the_coupling_family() {
    let iso = RunConfig::parse(SMALL).unwrap();
    let r = validate(&iso, 3, false).unwrap();
    assert!(r.passed(), "{}", r.render());
    assert!(r.commutator_s_se < 1e-12);

    let ising = RunConfig::parse(&SMALL.replace(
        "family = \"Heisenberg\"\nDelta",
        "family = \"IsingType\"\nDelta",
    ))
    .unwrap();
    let r = validate(&ising, 3, false).unwrap();
    assert!(r.passed());
    assert!(r.commutator_s_se > 1e-3);
}
