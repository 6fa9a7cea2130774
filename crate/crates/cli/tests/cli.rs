use std::collections::BTreeMap;
use std::fs;
use std::process::Command;

use alloc_dichotomy::harness::{ExperimentResult, RegretTrace, SeedRun};
use alloc_dichotomy::{build_tree, Algorithm};
use alloc_dichotomy_cli::config::{ConfigError, RunConfig};
use alloc_dichotomy_cli::{
    build_instance, emit_csv, execute, format_number, output_path, parse_config, parse_config_text,
    summary_path, Algorithms, CliError,
};
use proptest::prelude::*;

const BIN: &str = env!("CARGO_BIN_EXE_alloc-dichotomy");

fn parse(args: &[&str]) -> Result<RunConfig, CliError> {
    parse_config(std::iter::once("alloc-dichotomy").chain(args.iter().copied()))
}

fn config_error(args: &[&str]) -> ConfigError {
    match parse(args) {
        Err(CliError::Config(e)) => e,
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn preset_with_default_delta() {
    let c = parse(&[
        "--preset",
        "appendix-e-beta2",
        "--horizon",
        "1000000",
        "--seeds",
        "10",
    ])
    .unwrap();
    assert_eq!(c.delta, 2e-12);
    assert_eq!(c.horizon, 1_000_000);
    assert_eq!(c.seed_list(), (0..10).collect::<Vec<_>>());
    assert_eq!(c.k, 2);
}

#[test]
fn beta_below_one_is_rejected() {
    let e = config_error(&["--preset", "appendix-e-beta2", "--beta", "0.5"]);
    assert_eq!(e.key(), Some("beta"));
    assert!(e.to_string().contains("beta must be ≥ 1"), "{e}");
}

#[test]
fn three_quadratics_build_a_padded_tree() {
    let c = parse(&["--k", "3", "--family", "quadratic", "--a", "1", "--b", "2"]).unwrap();
    let inst = build_instance(&c).unwrap();
    assert_eq!(inst.k(), 3);
    let tree = build_tree(&inst.functions).unwrap();
    assert_eq!(tree.leaf_count(), 4);
    assert!(tree.leaf(3).is_zero_pad());
    assert_eq!(c.algorithm, Algorithms::One(Algorithm::Tree));
}

#[test]
fn diagnostics_name_the_key() {
    assert_eq!(
        config_error(&["--family", "quadratic", "--a", "1"]),
        ConfigError::Missing("b".into())
    );
    assert_eq!(
        config_error(&["--horizon", "10"]),
        ConfigError::Missing("preset".into())
    );
    assert_eq!(
        config_error(&["--preset", "linear-gap", "--sigma", "2"]).key(),
        Some("sigma")
    );
    assert_eq!(
        config_error(&["--preset", "linear-gap", "--gap", "1.5"]).key(),
        Some("gap")
    );
    assert_eq!(config_error(&["--preset", "nope"]).key(), Some("preset"));
    assert_eq!(
        config_error(&["--preset", "linear-gap", "--a", "1"]).key(),
        Some("a")
    );
    assert_eq!(
        config_error(&["--preset", "quadratic-k4", "--k", "3"]).key(),
        Some("k")
    );
    assert_eq!(
        config_error(&["--preset", "linear-gap", "--horizon", "ten"]).key(),
        Some("horizon")
    );
    assert_eq!(
        config_error(&[
            "--family",
            "linear",
            "--slope",
            "1",
            "--k",
            "3",
            "--algorithm",
            "k2"
        ])
        .key(),
        Some("algorithm")
    );
    assert!(
        matches!(config_error(&["--frobnicate", "1"]), ConfigError::Conflict(m) if m.contains("--frobnicate"))
    );
    assert_eq!(
        parse_config_text("colour = red\n"),
        Err(ConfigError::UnknownKey("colour".into()))
    );
}

#[test]
fn config_file_with_comments_and_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.conf");
    fs::write(
        &path,
        "# beta = 2 experiment\npreset = c-alpha   # boundary pair\nalpha = 4\nhorizon = 1e5\n\nseeds = 3\n",
    )
    .unwrap();
    let p = path.to_str().unwrap();
    let c = parse(&["--config", p, "--seeds", "5"]).unwrap();
    assert_eq!(c.horizon, 100_000);
    assert_eq!(c.seeds, 5);
    assert_eq!(build_instance(&c).unwrap().beta_label, Some(4.0 / 3.0));
    fs::write(&path, "preset = c-alpha\nhorizon\n").unwrap();
    assert!(matches!(
        config_error(&["--config", p]),
        ConfigError::Syntax { line: 2, .. }
    ));
}

#[test]
fn canonical_text_round_trips() {
    let cases: [&[&str]; 5] = [
        &[
            "--preset",
            "appendix-e-beta2",
            "--horizon",
            "1000000",
            "--seeds",
            "10",
        ],
        &[
            "--preset",
            "lower-bound-pair",
            "--beta",
            "1.25",
            "--lb-pair",
            "2",
            "--algorithm",
            "all",
        ],
        &[
            "--family",
            "c_alpha",
            "--theta",
            "-0.3",
            "--gamma",
            "1.7",
            "--alpha",
            "2.5",
            "--k",
            "5",
            "--algorithm",
            "tree",
        ],
        &[
            "--preset",
            "linear-gap",
            "--gap",
            "0.1",
            "--noise",
            "rademacher",
            "--sigma",
            "0.5",
            "--delta",
            "0.001",
        ],
        &[
            "--preset",
            "quadratic-k4",
            "--noise",
            "zero",
            "--checkpoint-ratio",
            "1.5",
            "--output",
            "out/x.csv",
        ],
    ];
    for args in cases {
        let c = parse(args).unwrap();
        let text = c.canonical_text();
        let again = RunConfig::from_map(&parse_config_text(&text).unwrap()).unwrap();
        assert_eq!(again, c, "{text}");
        assert_eq!(again.canonical_text(), text);
    }
}

proptest! {
    #[test]
    fn random_family_configs_round_trip(
        a in 0.0f64..3.0,
        extra in 0.0f64..3.0,
        k in 2usize..9,
        horizon in 1u64..10_000_000,
        sigma in 0.0f64..=1.0,
        seeds in 1u64..50,
        ratio in 1.01f64..3.0,
    ) {
        let mut map = BTreeMap::new();
        for (key, value) in [
            ("family", "quadratic".to_string()),
            ("a", a.to_string()),
            ("b", (2.0 * a + extra).to_string()),
            ("k", k.to_string()),
            ("horizon", horizon.to_string()),
            ("sigma", sigma.to_string()),
            ("seeds", seeds.to_string()),
            ("checkpoint_ratio", ratio.to_string()),
            ("algorithm", "tree".to_string()),
        ] {
            map.insert(key.to_string(), value);
        }
        let c = RunConfig::from_map(&map).unwrap();
        let text = c.canonical_text();
        let again = RunConfig::from_map(&parse_config_text(&text).unwrap()).unwrap();
        prop_assert_eq!(&again, &c);
        prop_assert_eq!(again.canonical_text(), text);
    }

    #[test]
    fn numbers_keep_twelve_significant_digits(x in -1e12f64..1e12, e in -30i32..30) {
        let v = x * 10f64.powi(e);
        let s = format_number(v);
        prop_assert!(!s.contains('e') && !s.contains(','));
        let back: f64 = s.parse().unwrap();
        prop_assert_eq!(format!("{back:.11e}"), format!("{v:.11e}"));
        prop_assert_eq!(format_number(back), s);
    }
}

fn result_with(checkpoints: Vec<u64>, average: Vec<f64>) -> ExperimentResult {
    let trace = RegretTrace {
        horizon: checkpoints.last().copied().unwrap_or(0),
        checkpoints: checkpoints.clone(),
        cumulative: checkpoints
            .iter()
            .zip(&average)
            .map(|(&t, r)| t as f64 * r)
            .collect(),
        average: average.clone(),
        final_allocation: vec![0.5, 0.5],
    };
    ExperimentResult {
        instance: "test".into(),
        algorithm: Algorithm::K2,
        k: 2,
        horizon: trace.horizon,
        beta: Some(2.0),
        runs: vec![SeedRun {
            seed: 0,
            outcome: Ok(trace),
        }],
        checkpoints,
        mean_final: average.last().copied().unwrap_or(f64::NAN),
        mean_average: average,
        std_final: 0.0,
        slope: None,
    }
}

const HEADER: &str =
    "t,avg_regret,ref_lower,ref_upper,log10_t,log10_avg_regret,log10_ref_lower,log10_ref_upper";

#[test]
fn empty_checkpoints_give_a_header_only_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    emit_csv(&result_with(vec![], vec![]), &path).unwrap();
    assert_eq!(fs::read_to_string(&path).unwrap(), format!("{HEADER}\n"));
    let summary = fs::read_to_string(dir.path().join("r.summary.csv")).unwrap();
    assert!(summary.starts_with("seed,final_avg_regret,loglog_slope\n"));
}

#[test]
fn single_checkpoint_row() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    emit_csv(&result_with(vec![10], vec![0.1]), &path).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], HEADER);
    let upper = 10f64.ln().powi(2) / 10.0;
    let expected = format!(
        "10,0.1,0.1,{},1,-1,-1,{}",
        format_number(upper),
        format_number(upper.log10())
    );
    assert_eq!(lines[1], expected);
    assert_eq!(lines.len(), 2);
    // ln^2(10) / 10 = 0.5301898110478... printed with 12 significant digits.
    assert_eq!(format_number(upper), "0.530189811048");
    let summary = fs::read_to_string(summary_path(&path)).unwrap();
    assert_eq!(summary, "seed,final_avg_regret,loglog_slope\n0,0.1,\n");
}

#[test]
fn output_paths() {
    let c = parse(&[
        "--preset",
        "appendix-e-beta2",
        "--algorithm",
        "all",
        "--output",
        "runs/beta2.csv",
    ])
    .unwrap();
    assert_eq!(c.algorithm, Algorithms::All);
    assert_eq!(
        output_path(&c, Algorithm::Sgd).to_str(),
        Some("runs/beta2.sgd.csv")
    );
    assert_eq!(
        summary_path(std::path::Path::new("runs/beta2.sgd.csv")).to_str(),
        Some("runs/beta2.sgd.summary.csv")
    );
    assert_eq!(
        summary_path(std::path::Path::new("out")).to_str(),
        Some("out.summary.csv")
    );
    let k3 = parse(&[
        "--family",
        "linear",
        "--slope",
        "1",
        "--k",
        "3",
        "--algorithm",
        "all",
    ])
    .unwrap();
    assert_eq!(
        k3.algorithm.list(k3.k),
        vec![Algorithm::Tree, Algorithm::Sgd]
    );
}

#[test]
fn execution_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a.csv");
    let args = [
        "--preset",
        "quadratic-k4",
        "--algorithm",
        "all",
        "--horizon",
        "20000",
        "--seeds",
        "3",
        "--output",
        out.to_str().unwrap(),
    ];
    let read_all = || {
        ["tree", "sgd"]
            .iter()
            .flat_map(|alg| {
                let main = dir.path().join(format!("a.{alg}.csv"));
                [
                    fs::read(&main).unwrap(),
                    fs::read(summary_path(&main)).unwrap(),
                ]
            })
            .collect::<Vec<_>>()
    };
    let runs = execute(&parse(&args).unwrap()).unwrap();
    assert_eq!(runs.len(), 2);
    let first = read_all();
    execute(&parse(&args).unwrap()).unwrap();
    assert_eq!(first, read_all());
    let text = String::from_utf8(first[0].clone()).unwrap();
    let ts: Vec<u64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert!(ts.windows(2).all(|w| w[0] < w[1]));
    assert_eq!(*ts.last().unwrap(), 20_000);
}

#[test]
fn binary_exit_codes_and_thread_cap() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b.csv");
    let run = |threads: &str| {
        Command::new(BIN)
            .args([
                "--preset",
                "linear-gap",
                "--horizon",
                "50000",
                "--seeds",
                "4",
                "--output",
            ])
            .arg(&out)
            .env("ALLOC_DICHOTOMY_THREADS", threads)
            .output()
            .unwrap()
    };
    let a = run("1");
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let first = fs::read(&out).unwrap();
    let b = run("3");
    assert!(b.status.success());
    assert_eq!(fs::read(&out).unwrap(), first);

    let bad = Command::new(BIN)
        .args(["--preset", "appendix-e-beta2", "--beta", "0.5"])
        .output()
        .unwrap();
    assert!(!bad.status.success());
    let stderr = String::from_utf8_lossy(&bad.stderr);
    assert_eq!(stderr.lines().count(), 1, "{stderr}");
    assert!(stderr.contains("beta must be ≥ 1"));

    let unknown = Command::new(BIN)
        .args(["--colour", "red"])
        .output()
        .unwrap();
    assert!(!unknown.status.success());

    let printed = Command::new(BIN)
        .args([
            "--preset",
            "appendix-e-beta2",
            "--horizon",
            "1000000",
            "--print-config",
        ])
        .output()
        .unwrap();
    let text = String::from_utf8(printed.stdout).unwrap();
    assert!(text.contains("delta = 0.000000000002\n"), "{text}");
}

#[test]
fn unwritable_output_reports_the_path() {
    let c = parse(&[
        "--preset",
        "linear-gap",
        "--horizon",
        "1000",
        "--output",
        "/nonexistent-dir/x.csv",
    ])
    .unwrap();
    let err = execute(&c).err().unwrap();
    assert!(err.to_string().contains("/nonexistent-dir/x.csv"), "{err}");
}
