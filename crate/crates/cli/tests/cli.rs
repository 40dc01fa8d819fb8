use std::fs;
use std::process::Command;

use aoi_cli::{run, EXIT_DIVERGED, EXIT_OK, EXIT_USAGE};

fn aoi(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("aoi").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn data_lines(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

fn tmp_path(name: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("aoi-cli-test-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn age_same_rational() {
    let (code, out, _) = aoi(&["age", "same", "--eps", "0.5", "--lambda", "1", "--mu", "1", "--rational", "1/1"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(data_lines(&out), ["eps,lambda,mu,rho,age", "0.5,1,1,1/1,1.5"]);
}

#[test]
fn age_same_reads_decimal_rates_exactly() {
    let (code, out, _) = aoi(&["age", "same", "--eps", "0.2", "--lambda", "2", "--mu", "3"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(data_lines(&out)[1], "0.2,2,3,2/3,0.416666666667");
}

#[test]
fn age_same_irrational() {
    let pi = std::f64::consts::PI;
    let rho = (1.0 / pi).to_string();
    let mu = pi.to_string();
    let (code, out, err) = aoi(&["age", "same", "--eps", "0", "--lambda", "1", "--mu", &mu, "--irrational", &rho]);
    assert_eq!(code, EXIT_OK, "{err}");
    let age: f64 = data_lines(&out)[1].rsplit(',').next().unwrap().parse().unwrap();
    assert!((age - (0.5 + 1.0 / (2.0 * pi))).abs() < 1e-11);
}

#[test]
fn age_same_rejects_mismatched_utilization() {
    let (code, _, err) = aoi(&["age", "same", "--eps", "0", "--lambda", "1", "--mu", "2", "--rational", "1/3"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("--rational"), "{err}");
}

#[test]
fn age_coded_hand_value() {
    let (code, out, _) = aoi(&["age", "coded", "--eps", "0", "--q", "2", "--k", "2", "--n", "3"]);
    assert_eq!(code, EXIT_OK);
    let lines = data_lines(&out);
    assert_eq!(lines[0], "n,k,q,eps,exact,lb,ub,star,hat,eps_p,mean_t");
    assert!(lines[1].starts_with("3,2,2,0,3.125,2.5,"), "{}", lines[1]);
    assert!(lines[1].contains(",3.525,"));

    let (_, out, _) = aoi(&["age", "coded", "--eps", "0", "--q", "2", "--k", "2", "--n", "3", "--metric", "exact", "--time-scale", "2"]);
    assert_eq!(data_lines(&out), ["n,k,q,eps,exact", "3,2,2,0,6.25"]);
}

#[test]
fn sweep_structure() {
    let (code, out, _) = aoi(&["sweep", "--eps", "0.3", "--q", "5", "--k", "3", "--n-min", "3", "--n-max", "40"]);
    assert_eq!(code, EXIT_OK);
    let lines = data_lines(&out);
    assert_eq!(lines[0], "n,exact,lb,ub,star,hat,eps_p");
    assert_eq!(lines.len(), 39);
    let ns: Vec<usize> = lines[1..].iter().map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(ns, (3..=40).collect::<Vec<_>>());
}

#[test]
fn frontier_minima() {
    let (code, out, _) = aoi(&["frontier", "--q", "2", "--k", "2", "--eps-grid", "0,0.5"]);
    assert_eq!(code, EXIT_OK);
    let lines = data_lines(&out);
    assert_eq!(lines[0], "eps,n_exact,exact_min,n_lb,lb_min");
    assert!(lines[1].starts_with("0,2,3,2,"), "{}", lines[1]);
    assert_eq!(lines.len(), 3);
}

#[test]
fn divergence_exit_code() {
    let (code, _, err) = aoi(&["age", "coded", "--eps", "1", "--q", "2", "--k", "2", "--n", "3"]);
    assert_eq!(code, EXIT_DIVERGED);
    assert!(err.contains("--eps"));
    let (code, _, _) = aoi(&["age", "coded", "--eps", "0.99999999", "--q", "2", "--k", "3", "--n", "3"]);
    assert_eq!(code, EXIT_DIVERGED);
    let (code, _, _) = aoi(&["age", "same", "--eps", "1", "--lambda", "1", "--mu", "1"]);
    assert_eq!(code, EXIT_DIVERGED);
}

#[test]
fn argument_errors_name_the_parameter() {
    for (args, param) in [
        (vec!["age", "coded", "--eps", "0.3", "--q", "6", "--k", "2", "--n", "3"], "--q"),
        (vec!["age", "coded", "--eps", "0.3", "--q", "4", "--k", "3", "--n", "2"], "--n"),
        (vec!["age", "coded", "--eps", "-0.1", "--q", "4", "--k", "3", "--n", "4"], "--eps"),
        (vec!["sim", "coded", "--eps", "0.3", "--q", "4", "--k", "2", "--n", "4", "--mode", "fast"], "--mode"),
        (vec!["sim", "coded", "--eps", "0.3", "--q", "4", "--k", "2", "--n", "4", "--cycles", "0"], "--cycles"),
        (vec!["check", "qgap", "--n", "5", "--k", "3", "--eps", "0.3", "--q-list", "2,6"], "--q-list"),
        (vec!["age", "coded", "--eps", "0.3", "--q", "4", "--k", "2"], "--n"),
        (vec!["sweep", "--eps", "0.3", "--q", "4", "--k", "2", "--bogus", "1"], "--bogus"),
    ] {
        let (code, _, err) = aoi(&args);
        assert_eq!(code, EXIT_USAGE, "{args:?}");
        assert!(err.contains(param), "{args:?}: {err}");
    }
}

#[test]
fn help_and_version_succeed() {
    let (code, out, _) = aoi(&["--help"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("sweep"));
    let (code, out, _) = aoi(&["--version"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains(env!("CARGO_PKG_VERSION")));
}

#[test]
fn header_records_version_command_and_params() {
    let (_, out, _) = aoi(&["check", "qgap", "--n", "5", "--k", "3", "--eps", "0.3", "--q-list", "256,2,16,4"]);
    let header: Vec<&str> = out.lines().take_while(|l| l.starts_with('#')).collect();
    assert_eq!(header[0], format!("# aoi {}", env!("CARGO_PKG_VERSION")));
    assert_eq!(header[1], "# command: aoi check qgap --n 5 --k 3 --eps 0.3 --q-list 256,2,16,4");
    assert!(header[2].starts_with("# params: {"));
    let qs: Vec<&str> = data_lines(&out)[1..].iter().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(qs, ["2", "4", "16", "256"]);
}

#[test]
fn random_seed_is_echoed_and_reproducible() {
    let (code, first, _) = aoi(&["sim", "coded", "--eps", "0.3", "--q", "5", "--k", "3", "--n", "6", "--cycles", "3000"]);
    assert_eq!(code, EXIT_OK);
    let command = first.lines().find_map(|l| l.strip_prefix("# command: ")).unwrap().to_string();
    assert!(command.contains("--seed "));
    let args: Vec<&str> = command.split(' ').skip(1).collect();
    let (_, second, _) = aoi(&args);
    assert_eq!(first, second);
}

#[test]
fn seeded_runs_are_byte_identical() {
    let args = ["sim", "same", "--eps", "0.3", "--lambda", "1", "--mu", "1", "--horizon", "50000", "--seed", "42"];
    assert_eq!(aoi(&args).1, aoi(&args).1);
    let other = ["sim", "same", "--eps", "0.3", "--lambda", "1", "--mu", "1", "--horizon", "50000", "--seed", "43"];
    assert_ne!(aoi(&args).1, aoi(&other).1);
}

#[test]
fn json_lines_parse() {
    let (code, out, _) = aoi(&["--format", "json", "sweep", "--eps", "0.5", "--q", "4", "--k", "2", "--n-max", "6"]);
    assert_eq!(code, EXIT_OK);
    let rows: Vec<serde_json::Value> = out.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(rows[0]["aoi_version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(rows.len(), 1 + 5);
    assert_eq!(rows[1]["n"], 2);
    assert!(rows[1]["exact"].is_number());

    let (_, out, _) = aoi(&["--format", "json", "sim", "coded", "--eps", "0.2", "--q", "2", "--k", "1", "--n", "1", "--cycles", "100", "--seed", "1"]);
    let stats: serde_json::Value = serde_json::from_str(out.lines().nth(1).unwrap()).unwrap();
    for key in ["mean_age", "std_error", "cycle_count", "eps_p_hat", "seed", "mode"] {
        assert!(stats.get(key).is_some(), "{key}");
    }
    assert_eq!(stats["mode"], "matrix");
}

#[test]
fn output_trace_and_records_files() {
    let output = tmp_path("stats.csv");
    let trace = tmp_path("trace.csv");
    let records = tmp_path("records.csv");
    let (code, out, err) = aoi(&[
        "sim", "coded", "--eps", "0.3", "--q", "4", "--k", "2", "--n", "4", "--cycles", "200", "--seed", "5",
        "--mode", "chain",
        "--output", output.to_str().unwrap(),
        "--trace", trace.to_str().unwrap(),
        "--records", records.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(out.is_empty());
    let stats = fs::read_to_string(&output).unwrap();
    assert!(!stats.contains("--output"));
    let trace_text = fs::read_to_string(&trace).unwrap();
    assert_eq!(data_lines(&trace_text)[0], "t,age");
    assert_eq!(data_lines(&trace_text).len(), 1 + 1 + 3 * 200);
    let rec_text = fs::read_to_string(&records).unwrap();
    let recs = data_lines(&rec_text);
    assert_eq!(recs[0], "h,t,y,q");
    assert_eq!(recs.len(), 201);
    for r in &recs[1..] {
        let f: Vec<u64> = r.split(',').take(3).map(|x| x.parse().unwrap()).collect();
        assert_eq!(f[2], 4 * (f[0] + 1));
    }
}

#[test]
fn equidist_check() {
    let (code, out, _) = aoi(&["check", "equidist", "--alpha", "3/7", "--terms", "700"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(data_lines(&out)[1], "3/7,700,0.428571428571,0.428571428571,0,0.01");
    let (code, out, _) = aoi(&["check", "equidist", "--alpha", "1.4142135623730951", "--terms", "100000"]);
    assert_eq!(code, EXIT_OK);
    let err: f64 = data_lines(&out)[1].split(',').nth(4).unwrap().parse().unwrap();
    assert!(err < 2e-3);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_aoi");
    let ok = Command::new(bin).args(["age", "same", "--eps", "0", "--lambda", "1", "--mu", "1"]).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    let bad = Command::new(bin).args(["age", "same", "--eps", "x"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
    assert!(!bad.stderr.is_empty());
    let div = Command::new(bin)
        .args(["sim", "coded", "--eps", "1", "--q", "2", "--k", "1", "--n", "1"])
        .output()
        .unwrap();
    assert_eq!(div.status.code(), Some(3));
}
