use std::process::{Command, Output};

fn logva(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_logva")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).expect("utf8")
}

#[test]
fn basis_degree_one_has_two_monomials() {
    let o = logva(&["basis", "--degree", "1"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().collect::<Vec<_>>(), ["wb[-1] |0>", "w[-1] |0>"]);
}

#[test]
fn act_on_vacuum_and_anchor() {
    let o = logva(&["act", "w", "-1"]);
    assert_eq!(stdout(&o).trim(), "w[-1] |0>");
    let o = logva(&["act", "w", "-1", "w[-1] |0>"]);
    assert_eq!(stdout(&o).trim(), "0");
}

#[test]
fn bracket_uu_matches_expansion() {
    let o = logva(&["bracket", "u", "u", "--order", "5"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        stdout(&o).trim(),
        "v*v * lambda^-1 - v*v' * lambda^-2 + v*v'' * lambda^-3 - v*v''' * lambda^-4 + v*v^(4) * lambda^-5"
    );
}

#[test]
fn bracket_json_is_machine_readable() {
    let o = logva(&["--format", "json", "bracket", "u", "v", "--order", "3"]);
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["bracket"]["order"], 3);
    assert_eq!(v["bracket"]["terms"][0], serde_json::json!([-1, "-u*v"]));
}

#[test]
fn table_axioms() {
    let o = logva(&["bracket", "u", "v", "--axioms", "--order", "4"]);
    assert_eq!(o.status.code(), Some(0));
    let o = logva(&["bracket", "u", "v", "--axioms", "--order", "3", "--table", "transposed"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).lines().any(|l| l.starts_with("{\"check\":\"jacobi\"")));
}

#[test]
fn verify_borcherds_passes_on_nls() {
    let o = logva(&["verify", "borcherds", "--instance", "nls", "--degree", "3", "--window", "3"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).ends_with("PASS\n"));
}

#[test]
fn verify_reports_witnesses_on_defects() {
    let o = logva(&["verify", "borcherds", "--instance", "nls-eps-printed", "--degree", "1", "--window", "2"]);
    assert_eq!(o.status.code(), Some(1));
    let witnesses: Vec<serde_json::Value> = stdout(&o)
        .lines()
        .filter(|l| l.starts_with('{'))
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert!(!witnesses.is_empty());
    assert!(witnesses.iter().all(|w| w["check"] == "borcherds" && !w["defect"].is_null()));
}

#[test]
fn verify_commutative_instance() {
    let o = logva(&["verify", "vacuum", "--instance", "commutative", "--degree", "2", "--window", "2"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn output_is_deterministic() {
    let args = ["--format", "json", "verify", "hexagon", "--instance", "nls-eps", "--degree", "2", "--window", "2", "--seed", "7"];
    let (a, b) = (logva(&args), logva(&args));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.status.code(), Some(0));
}

#[test]
fn limit_reports_single_placement() {
    let o = logva(&["limit", "--order", "6"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("passing placement: first-factor"));
    assert!(out.contains("second-factor: mismatch on (u,v) (v,u)"));
    let o = logva(&["limit", "--order", "4", "--placement", "second-factor"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn gva_synthetic_matrix() {
    let o = logva(&["--format", "json", "gva", "--matrix", "1/2,1/2;1/2,1/2", "--labels", "a,b"]);
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["classes"], serde_json::json!([[0, 1]]));
    assert_eq!(v["eta"], serde_json::json!([[1]]));
    let o = logva(&["gva", "--matrix", "1/2,1/2;1/2,1/2"]);
    assert!(stdout(&o).contains("Delta(I0, I0) = 1/2 mod Z"));
}

#[test]
fn oracle_check_small() {
    let o = logva(&["oracle-check", "--degree", "3", "--window", "3", "--instance", "nls-eps"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(logva(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(logva(&["bracket", "u", "q"]).status.code(), Some(2));
    assert_eq!(logva(&["gva", "--matrix", "1,2;3,4"]).status.code(), Some(2));
    assert_eq!(logva(&["basis", "--instance", "commutative"]).status.code(), Some(2));
}

#[test]
fn budget_env_override() {
    let o = Command::new(env!("CARGO_BIN_EXE_logva"))
        .args(["act", "w", "-1", "w[-3] wb[-2] |0>"])
        .env("LOGVA_BUDGET", "1")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("budget"));
}
