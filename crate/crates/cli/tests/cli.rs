use std::path::Path;

use ordreg_cli::{
    cmd_test, parse_xy, read_xy, resolve, run, CliError, CommandKind, FileConfig, Flags,
    TestOptions,
};
use ordreg_core::rng::derive_stream;
use ordreg_core::{
    generate_sample, ols_fit, BaseNoise, DistributionSpec, NoiseModel, OlsFit, RegressionConfig,
};

fn flags() -> Flags {
    Flags::default()
}

fn run_args(args: &[&str]) -> i32 {
    run(std::iter::once("ordreg").chain(args.iter().copied()))
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn flags_resolve_with_defaults() {
    let f = Flags {
        dist: Some("uniform(0,1)".into()),
        n: Some(2000),
        seed: Some(7),
        ..flags()
    };
    let run = resolve(CommandKind::Simulate, f, FileConfig::default()).unwrap();
    let s = &run.settings;
    assert_eq!((s.n, s.seed, s.dist.as_str()), (2000, 7, "uniform(0,1)"));
    assert_eq!((s.reps, s.grid, s.a, s.b), (2000, 256, 0.0, 1.0));
    assert_eq!(s.sigmas, vec![1.0]);
    assert_eq!(run.regression.noise.chain().state_count(), 1);
}

#[test]
fn reversed_uniform_bounds_are_rejected() {
    let f = Flags {
        dist: Some("uniform(1,0)".into()),
        ..flags()
    };
    let err = resolve(CommandKind::Simulate, f, FileConfig::default()).unwrap_err();
    assert!(matches!(err, CliError::Config { key: "dist", .. }), "{err}");
    assert!(err.to_string().contains("lo < hi"));
    assert_eq!(run_args(&["simulate", "--dist", "uniform(1,0)"]), 2);
}

#[test]
fn flags_override_file_values() {
    let file = FileConfig::parse("n = 500\nseed = 3\n").unwrap();
    let f = Flags {
        n: Some(2000),
        ..flags()
    };
    let run = resolve(CommandKind::Simulate, f, file).unwrap();
    assert_eq!(run.settings.n, 2000);
    assert_eq!(run.settings.seed, 3);
}

#[test]
fn unknown_file_keys_are_rejected() {
    let err = FileConfig::parse("n = 500\nsamples = 3\n").unwrap_err();
    assert!(err.to_string().contains("samples"), "{err}");
}

#[test]
fn invalid_values_name_the_key() {
    let cases: [(Flags, &str); 5] = [
        (
            Flags {
                transition: Some("0.5,0.4;0.2,0.8".into()),
                ..flags()
            },
            "transition",
        ),
        (
            Flags {
                transition: Some("0,1;1,0".into()),
                ..flags()
            },
            "transition",
        ),
        (
            Flags {
                sigmas: Some("1,x".into()),
                ..flags()
            },
            "sigmas",
        ),
        (
            Flags {
                probes: Some("0.5,1.0".into()),
                ..flags()
            },
            "probes",
        ),
        (
            Flags {
                noise: Some("cauchy".into()),
                ..flags()
            },
            "noise",
        ),
    ];
    for (f, key) in cases {
        let err = resolve(CommandKind::Validate, f, FileConfig::default()).unwrap_err();
        match err {
            CliError::Config { key: k, .. } => assert_eq!(k, key),
            other => panic!("expected config error for {key}, got {other}"),
        }
    }
}

#[test]
fn kernel_command_writes_grid_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("k");
    let code = run_args(&[
        "kernel",
        "--dist",
        "uniform(0,1)",
        "--grid",
        "4",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let csv = read(&out.join("kernel.csv"));
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| r.len() == 5));
    assert!((rows[2][2] - 0.0625).abs() < 1e-12);
}

#[test]
fn bridge_command_pins_endpoints() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b");
    let code = run_args(&[
        "bridge",
        "--dist",
        "exp(1)",
        "--n",
        "3",
        "--seed",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let csv = read(&out.join("bridge.csv"));
    let values: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(values.len(), 4);
    assert_eq!(values[0], 0.0);
    assert_eq!(values[3], 0.0);
}

#[test]
fn rerunning_the_echoed_config_reproduces_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    let cases: [(&str, &str, &[&str]); 4] = [
        (
            "simulate",
            "sample.csv",
            &[
                "--transition",
                "0.9,0.1;0.2,0.8",
                "--sigmas",
                "1,2",
                "--n",
                "50",
            ],
        ),
        (
            "bridge",
            "bridge.csv",
            &[
                "--dist",
                "normal(1,2)",
                "--n",
                "40",
                "--noise",
                "rademacher",
            ],
        ),
        ("kernel", "kernel.csv", &["--dist", "exp(2)", "--grid", "8"]),
        (
            "limit",
            "critical_values.csv",
            &["--grid", "16", "--reps", "1000"],
        ),
    ];
    for (cmd, file, extra) in cases {
        let mut args = vec![cmd, "--seed", "99", "--out", first.to_str().unwrap()];
        args.extend_from_slice(extra);
        assert_eq!(run_args(&args), 0, "{cmd}");
        let config = first.join("config.toml");
        let echoed = read(&config);
        assert!(echoed.contains("seed = 99"));
        let config_str = config.to_str().unwrap().to_string();
        assert_eq!(
            run_args(&[
                cmd,
                "--config",
                &config_str,
                "--out",
                second.to_str().unwrap()
            ]),
            0,
            "{cmd} rerun"
        );
        assert_eq!(read(&first.join(file)), read(&second.join(file)), "{cmd}");
    }
}

#[test]
fn simulated_csv_reproduces_the_internal_fit() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim");
    let code = run_args(&[
        "simulate",
        "--dist",
        "exp(1)",
        "--n",
        "300",
        "--a",
        "-1.5",
        "--b",
        "0.7",
        "--seed",
        "5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let (x, y) = read_xy(&out.join("sample.csv")).unwrap();
    let from_csv = OlsFit::from_xy(&x, &y).unwrap();

    let config = FileConfig::load(&out.join("config.toml")).unwrap();
    let run = resolve(CommandKind::Simulate, Flags::default(), config).unwrap();
    let sample = generate_sample(
        &run.regression,
        &mut derive_stream(5, &[ordreg_core::rng::label("sample")]),
    );
    let internal = ols_fit(&sample).unwrap();
    assert!((from_csv.a_hat - internal.a_hat).abs() <= 1e-12);
    assert!((from_csv.b_hat - internal.b_hat).abs() <= 1e-12);

    let opts = TestOptions {
        reps: 1000,
        grid: 32,
        seed: 1,
        levels: vec![0.95],
        alpha: 0.05,
    };
    let (report, _) = cmd_test(&x, &y, &opts).unwrap();
    assert!((report.b_hat - internal.b_hat).abs() <= 1e-12);
}

#[test]
fn test_command_reports_and_writes_bridge() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t");
    let data = dir.path().join("data.csv");
    let mut text = String::from("y,x\n");
    for i in 0..60 {
        let x = (i * 37 % 60) as f64 / 60.0;
        let y = 2.0 + 0.5 * x + if i % 2 == 0 { 0.1 } else { -0.1 } * (1.0 + x);
        text.push_str(&format!("{y},{x}\n"));
    }
    std::fs::write(&data, text).unwrap();
    let code = run_args(&[
        "test",
        "--data",
        data.to_str().unwrap(),
        "--grid",
        "32",
        "--reps",
        "1000",
        "--json",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(code == 0 || code == 1);
    let report: serde_json::Value =
        serde_json::from_str(&read(&out.join("test_report.json"))).unwrap();
    assert_eq!(report["n"], 60);
    let p = report["p_value"].as_f64().unwrap();
    assert!(p > 0.0 && p <= 1.0);
    assert_eq!(
        code,
        if report["reject"].as_bool().unwrap() {
            1
        } else {
            0
        }
    );
    assert_eq!(read(&out.join("bridge.csv")).lines().count(), 62);
    assert!(read(&out.join("test_report.txt")).contains("plug-in approximation"));
}

#[test]
fn perfectly_linear_data_is_reported_as_undefined() {
    let x: Vec<f64> = (0..20).map(|i| i as f64).collect();
    let y: Vec<f64> = x.iter().map(|v| 3.0 - 2.0 * v).collect();
    let opts = TestOptions {
        reps: 1000,
        grid: 16,
        seed: 0,
        levels: vec![0.95],
        alpha: 0.05,
    };
    let err = cmd_test(&x, &y, &opts).unwrap_err();
    assert!(
        matches!(err, CliError::Core(ordreg_core::Error::DegenerateBridge)),
        "{err}"
    );
    let flat = vec![1.0; 20];
    let err = cmd_test(&flat, &y, &opts).unwrap_err();
    assert!(
        matches!(err, CliError::Core(ordreg_core::Error::DegenerateDesign)),
        "{err}"
    );
}

#[test]
fn malformed_rows_carry_line_numbers() {
    let err = parse_xy("x,y\n1,2\n2,abc\n".as_bytes(), "d.csv").unwrap_err();
    match err {
        CliError::Data { line, .. } => assert_eq!(line, 3),
        other => panic!("{other}"),
    }
    let err = parse_xy("a,b\n1,2\n".as_bytes(), "d.csv").unwrap_err();
    assert!(err.to_string().contains("missing `x` column"));
}

fn in_model(n: usize) -> RegressionConfig {
    RegressionConfig::new(
        0.0,
        1.0,
        n,
        DistributionSpec::uniform(0.0, 1.0).unwrap(),
        NoiseModel::iid(1.0, BaseNoise::Gaussian).unwrap(),
    )
    .unwrap()
}

fn options(seed: u64) -> TestOptions {
    TestOptions {
        reps: 1000,
        grid: 256,
        seed,
        levels: vec![0.95],
        alpha: 0.05,
    }
}

#[test]
fn in_model_p_values_have_nominal_size() {
    let cfg = in_model(2000);
    let rejections = (0..200u64)
        .filter(|&s| {
            let sample = generate_sample(&cfg, &mut derive_stream(s, &[1]));
            cmd_test(&sample.x, &sample.y, &options(s))
                .unwrap()
                .0
                .p_value
                < 0.05
        })
        .count();
    let rate = rejections as f64 / 200.0;
    assert!((0.02..=0.09).contains(&rate), "rejection rate {rate}");
}

#[test]
fn slope_change_at_the_median_is_detected() {
    let cfg = in_model(2000);
    let rejections = (0..200u64)
        .filter(|&s| {
            let sample = generate_sample(&cfg, &mut derive_stream(s, &[2]));
            let median = sample.x[1000];
            let y: Vec<f64> = sample
                .x
                .iter()
                .zip(&sample.y)
                .map(|(x, y)| y + 2.0 * (x - median).max(0.0))
                .collect();
            cmd_test(&sample.x, &y, &options(s)).unwrap().0.p_value < 0.05
        })
        .count();
    let rate = rejections as f64 / 200.0;
    assert!(rate >= 0.5, "rejection rate {rate}");
}

#[test]
fn validate_exit_code_follows_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v");
    let code = run_args(&[
        "validate",
        "--profile",
        "quick",
        "--checks",
        "covariance,sigma_hat,degenerate_chain",
        "--seed",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]);
    let csv = read(&out.join("report.csv"));
    let all_pass = csv.lines().skip(1).all(|l| l.ends_with(",true"));
    assert_eq!(code, if all_pass { 0 } else { 1 });
    assert!(csv.starts_with("name,estimate,target,se,tol,pass\n"));
    assert!(read(&out.join("config.toml")).contains("profile = \"quick\""));
}
