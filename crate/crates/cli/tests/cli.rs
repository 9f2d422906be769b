//! Command-line behavior: output structure, formats, and error paths.

use std::process::Command;

fn parvi(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_parvi"))
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn elbo_curve_csv_structure() {
    let out = parvi(&[
        "elbo-curve",
        "--mu-min",
        "0.0",
        "--mu-max",
        "0.2",
        "--mu-step",
        "0.1",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# {\"command\":\"elbo-curve\""), "{}", lines[0]);
    assert!(lines[0].contains("\"seed\":0"));
    assert!(lines[0].contains("\"version\":"));
    assert_eq!(lines[1], "mu,elbo,kl,log_evidence");
    assert_eq!(lines.len(), 5);
    // every row satisfies elbo + kl = log evidence to the stated tolerance
    for row in &lines[2..] {
        let v: Vec<f64> = row.split(',').map(|c| c.parse().unwrap()).collect();
        assert!((v[1] + v[2] - v[3]).abs() < 1e-5, "{row}");
    }
    assert!(!text.contains('\r'));
}

#[test]
fn elbo_curve_jsonl_records_parse() {
    let out = parvi(&[
        "elbo-curve",
        "--mu-min",
        "0.5",
        "--mu-max",
        "0.6",
        "--mu-step",
        "0.05",
        "--format",
        "jsonl",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    let meta: serde_json::Value = serde_json::from_str(lines.next().unwrap()).unwrap();
    assert_eq!(meta["command"], "elbo-curve");
    assert_eq!(meta["seed"], 0);
    assert!(meta["config"]["sigma"].is_number());
    for line in lines {
        let rec: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(rec["record"], "point");
        assert!(rec["elbo"].is_number());
    }
}

#[test]
fn elbo_curve_single_point_at_the_optimum() {
    let out = parvi(&[
        "elbo-curve",
        "--mu-min",
        "0.568147",
        "--mu-max",
        "0.568147",
        "--mu-step",
        "0.05",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let row = text.lines().nth(2).unwrap();
    let kl: f64 = row.split(',').nth(2).unwrap().parse().unwrap();
    assert!((kl - 0.020_791).abs() < 1e-4, "kl {kl}");
}

#[test]
fn elbo_curve_rejects_bad_sigma() {
    let out = parvi(&["elbo-curve", "--sigma", "0"]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("scale"), "{stderr}");

    let out = parvi(&["elbo-curve", "--sigma", "-1"]);
    assert!(!out.status.success());
}

#[test]
fn fit_summary_and_trace() {
    let out = parvi(&[
        "fit",
        "--estimator",
        "closed-form",
        "--seed",
        "3",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let summary = text
        .lines()
        .find(|l| l.starts_with("# summary"))
        .expect("summary line present");
    assert!(summary.contains("mu=5.681471"), "{summary}");
    assert!(summary.contains("sigma=5.0000"), "{summary}");
    assert!(summary.contains("stop=converged"), "{summary}");
    assert!(summary.contains("seed=3"), "{summary}");
    let header = text.lines().nth(1).unwrap();
    assert_eq!(
        header,
        "step,mu,sigma,elbo,elbo_se,grad_mu,grad_sigma,grad_se_mu,grad_se_sigma"
    );
}

#[test]
fn fit_with_default_reparam_settings_lands_near_the_optimum() {
    let out = parvi(&["fit", "--seed", "1", "--format", "jsonl"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let summary: serde_json::Value = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .find(|v: &serde_json::Value| v["record"] == "summary")
        .expect("summary record");
    let mu = summary["mu"].as_f64().unwrap();
    let sigma = summary["sigma"].as_f64().unwrap();
    assert!((mu - 0.568_147).abs() < 0.02, "mu {mu}");
    assert!((sigma - 0.5).abs() < 0.02, "sigma {sigma}");
}

#[test]
fn fit_rejects_normal_family_with_the_support_rule() {
    let out = parvi(&["fit", "--family", "normal"]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("q(z) needs to be zero whenever p(z|x) is zero"),
        "{stderr}"
    );
}

#[test]
fn gradcheck_orders_variances_and_reports_truth() {
    let out = parvi(&["gradcheck", "--reps", "40", "--samples", "500", "--seed", "5"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<Vec<&str>> = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("estimator"))
        .map(|l| l.split(',').collect())
        .collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][0], "score-function");
    assert_eq!(rows[1][0], "reparameterized");
    let var = |row: &[&str], c: usize| -> f64 { row[7 + c].parse().unwrap() };
    assert!(var(&rows[1], 0) < var(&rows[0], 0));
    assert!(var(&rows[1], 1) < var(&rows[0], 1));
    let truth_mu: f64 = rows[0][9].parse().unwrap();
    assert!((truth_mu - 1.733_703).abs() < 1e-5);
}

#[test]
fn amortize_missing_file_names_the_path() {
    let out = parvi(&["amortize", "--data", "/nonexistent/observations.txt"]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("/nonexistent/observations.txt"), "{stderr}");
}

#[test]
fn amortize_bad_observation_names_the_line() {
    let dir = std::env::temp_dir().join("parvi-cli-tests");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("bad.txt");
    std::fs::write(&path, "1.5\n0.0\n2.0\n").unwrap();
    let out = parvi(&["amortize", "--data", path.to_str().unwrap()]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 2"), "{stderr}");
}

#[test]
fn amortize_requires_exactly_one_data_source() {
    let out = parvi(&["amortize"]);
    assert!(!out.status.success());
    let out = parvi(&["amortize", "--data", "x.txt", "--generate", "10"]);
    assert!(!out.status.success());
}

#[test]
fn amortize_reads_a_dataset_file() {
    let dir = std::env::temp_dir().join("parvi-cli-tests");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("small.txt");
    std::fs::write(&path, "0.4\n1.2\n0.9\n2.5\n0.7\n1.8\n").unwrap();
    let out = parvi(&[
        "amortize",
        "--data",
        path.to_str().unwrap(),
        "--epochs",
        "3",
        "--batch-size",
        "2",
        "--hidden",
        "4",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(
        text.lines().filter(|l| !l.starts_with('#')).count(),
        7,
        "header plus one row per observation"
    );
    assert!(text.contains("# amortization_gap gap="));
}

#[test]
fn nine_significant_digits_everywhere() {
    let out = parvi(&[
        "elbo-curve",
        "--mu-min",
        "0.5",
        "--mu-max",
        "0.5",
        "--mu-step",
        "0.1",
    ]);
    let text = String::from_utf8(out.stdout).unwrap();
    let row = text.lines().nth(2).unwrap();
    for cell in row.split(',') {
        let mantissa = cell
            .trim_start_matches('-')
            .split('e')
            .next()
            .unwrap()
            .replace('.', "");
        assert_eq!(mantissa.len(), 9, "cell {cell}");
    }
}
