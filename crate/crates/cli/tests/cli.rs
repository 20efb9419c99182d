use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use brse_cli::error::CliError;
use brse_cli::ingest::{ingest_reader, Formula};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_brse"));
    c.env_remove("BRSE_WORKERS");
    c
}

fn synthetic() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/nhanes_synthetic.csv")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const QUICK: [&str; 6] = ["--chains", "2", "--iter", "2000", "--burnin", "500"];

fn fit_args<'a>(extra: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec!["fit", "--outcome", "sbp", "--covariates", "male,age"];
    v.extend_from_slice(&QUICK);
    v.extend_from_slice(extra);
    v
}

#[test]
fn three_row_file_gives_full_design() {
    let f = Formula::regression("sbp", &["male", "age"]);
    let got = ingest_reader("sbp,male,age\n120,1,40\n130,0,55\n118,1,33\n".as_bytes(), &f, false).unwrap();
    assert_eq!(got.data.n(), 3);
    assert_eq!(got.data.p(), 3);
    assert_eq!(got.terms, ["(Intercept)", "male", "age"]);
    assert!(got.dropped.is_empty());
}

#[test]
fn non_numeric_cell_drops_the_row_with_a_warning() {
    let f = Formula::regression("sbp", &["male", "age"]);
    let text = "sbp,male,age\n120,1,40\n130,0,old\n118,1,33\n";
    let got = ingest_reader(text.as_bytes(), &f, false).unwrap();
    assert_eq!(got.data.n(), 2);
    assert_eq!(got.warnings().len(), 1);
    assert_eq!(got.dropped[0].row, 2);
    assert!(got.dropped[0].reason.contains("'old'"));

    let strict = ingest_reader(text.as_bytes(), &f, true).unwrap_err();
    assert!(matches!(&strict, CliError::Data(m) if m.contains("row 2")), "{strict}");
}

#[test]
fn missing_cells_are_listwise_deleted() {
    let f = Formula::regression("sbp", &["age"]);
    let got = ingest_reader("sbp,age,unused\n120,NA,x\n,50,1\n121,51,\n".as_bytes(), &f, true).unwrap();
    assert_eq!(got.data.n(), 1);
    assert_eq!(got.dropped.len(), 2);
}

#[test]
fn ingest_errors() {
    let f = Formula::regression("sbp", &["height"]);
    assert!(matches!(
        ingest_reader("sbp,age\n1,2\n".as_bytes(), &f, false),
        Err(CliError::Data(m)) if m.contains("height")
    ));
    let f = Formula::regression("sbp", &["age"]);
    assert!(ingest_reader("sbp,age\nNA,2\n".as_bytes(), &f, false).is_err());
    let o = bin().args(["fit", "--data", "/nonexistent.csv", "--outcome", "y"]).output().unwrap();
    assert_eq!(o.status.code(), Some(brse_cli::EXIT_DATA));
}

#[test]
fn fit_report_layout_and_determinism() {
    let data = synthetic();
    let mut args = fit_args(&[]);
    args.extend(["--data", data.to_str().unwrap(), "--seed", "5"]);
    let a = bin().args(&args).output().unwrap();
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let b = bin().args(&args).env("BRSE_WORKERS", "1").output().unwrap();
    assert_eq!(a.stdout, b.stdout);

    let text = stdout(&a);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("term,estimate,se,robust_se,post_mean,post_sd,brse"));
    let rows: Vec<Vec<&str>> = lines.by_ref().take(3).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows[2][0], "age");
    for row in &rows {
        assert_eq!(row.len(), 7);
        for cell in &row[1..] {
            let (_, decimals) = cell.split_once('.').unwrap();
            assert_eq!(decimals.len(), 3, "{cell}");
        }
    }
    assert!(lines.all(|l| l.starts_with('#')));
    assert!(text.contains("# rhat:"));
}

#[test]
fn json_and_quantile_output() {
    let data = synthetic();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fit.json");
    let draws = dir.path().join("draws.csv");
    let mut args = fit_args(&["--format", "json", "--quantile-credible"]);
    args.extend([
        "--data",
        data.to_str().unwrap(),
        "--output",
        out.to_str().unwrap(),
        "--dump-draws",
        draws.to_str().unwrap(),
    ]);
    let o = bin().args(&args).output().unwrap();
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    let terms = v["terms"].as_array().unwrap();
    assert_eq!(terms.len(), 3);
    assert!(terms[2]["quantile_credible"].is_array());
    assert!(v["sigma2_post_mean"].as_f64().unwrap() > 0.0);
    let dumped = std::fs::read_to_string(&draws).unwrap();
    assert!(dumped.starts_with("chain,iter,beta_0,beta_1,beta_2,sigma2\n"));
    assert_eq!(dumped.lines().count(), 1 + 2 * 1500);
}

#[test]
fn average_flag_matches_precomputed_outcome() {
    let data = synthetic();
    let mut pre = fit_args(&[]);
    pre.extend(["--data", data.to_str().unwrap()]);
    let mut avg = vec!["fit", "--average", "sbp1,sbp2", "--covariates", "male,age"];
    avg.extend_from_slice(&QUICK);
    avg.extend(["--data", data.to_str().unwrap()]);
    let a = stdout(&bin().args(&pre).output().unwrap());
    let b = stdout(&bin().args(&avg).output().unwrap());
    let table = |s: &str| s.lines().take(4).collect::<Vec<_>>().join("\n");
    assert_eq!(table(&a), table(&b));
}

#[test]
fn config_file_supplies_flags() {
    let data = synthetic();
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(
        &cfg,
        format!(
            "# fit settings\ndata = {}\noutcome = sbp\ncovariates = male,age\nchains = 2\niter = 2000\nburnin = 500\nformat = markdown\nseed = 9\n",
            data.display()
        ),
    )
    .unwrap();
    let o = bin().args(["fit", "--config", cfg.to_str().unwrap()]).output().unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.starts_with("|        Term |"));
    assert!(text.contains("seed 9"));
    // command-line flags win over the file
    let o = bin()
        .args(["fit", "--config", cfg.to_str().unwrap(), "--format", "csv"])
        .output()
        .unwrap();
    assert!(stdout(&o).starts_with("term,"));
}

#[test]
fn exit_codes() {
    let o = bin().args(["fit", "--bogus"]).output().unwrap();
    assert_eq!(o.status.code(), Some(brse_cli::EXIT_USAGE));
    let o = bin().args(["simulate", "--grid", "table9", "--reps", "1"]).output().unwrap();
    assert_eq!(o.status.code(), Some(brse_cli::EXIT_USAGE));
    assert!(o.stdout.is_empty());

    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("collinear.csv");
    let rows: String = (0..30).map(|i| format!("{},{},{}\n", i % 7, i, 2 * i)).collect();
    std::fs::write(&csv, format!("y,x1,x2\n{rows}")).unwrap();
    let o = bin()
        .args(["fit", "--outcome", "y", "--covariates", "x1,x2", "--data", csv.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(brse_cli::EXIT_NUMERIC), "{}", String::from_utf8_lossy(&o.stderr));
    let o = bin().arg("--help").output().unwrap();
    assert_eq!(o.status.code(), Some(brse_cli::EXIT_OK));
}

#[test]
fn simulate_smoke_run() {
    let start = std::time::Instant::now();
    let o = bin()
        .args(["simulate", "--grid", "table1", "--reps", "10", "--seed", "7", "--quiet"])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(start.elapsed().as_secs() < 60);
    let text = stdout(&o);
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let head = rdr.headers().unwrap().clone();
    assert!(head.iter().any(|h| h == "cov_bayes_robust"));
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 10);
    assert_eq!(&rows[0][0], "table1/linear/n=50/a=-2");
}

#[test]
fn inline_scenario_and_kl_point() {
    let o = bin()
        .args(["kl-point", "--scenario", "linear", "--a", "2"])
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(stdout(&o), "parameter,value,mc_se\nintercept,-3.000000,NA\nslope,7.000000,NA\n");

    let o = bin()
        .args(["simulate", "--scenario", "exp-ph", "--kappa", "1", "--beta", "-0.5", "--n", "60"])
        .args(["--covariates", "normal", "--reps", "4", "--iter", "1500", "--burnin", "500", "--quiet"])
        .args(["--format", "json"])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v[0]["scenario_id"], "inline/exp-ph/n=60/kappa=1/beta=-0.5");
    assert_eq!(v[0]["correctly_specified"], true);
    let o = bin().args(["kl-point", "--scenario", "poisson"]).output().unwrap();
    assert_eq!(o.status.code(), Some(brse_cli::EXIT_USAGE));
}
