use std::path::Path;
use std::process::{Command, Output};

fn lobatto(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lobatto")).args(args).output().expect("binary runs")
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(path).unwrap();
    assert!(!text.contains('\r'), "CRLF in output");
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn num(s: &str) -> f64 {
    s.parse().unwrap_or_else(|_| panic!("not a number: '{s}'"))
}

#[test]
fn nodes_command() {
    let out = lobatto(&["nodes", "--n", "4"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "tau,weight,is_exceptional");
    assert_eq!(lines.len(), 6);
    let exceptional: Vec<&str> = lines.iter().filter(|l| l.ends_with(",true")).copied().collect();
    assert_eq!(exceptional, vec!["0.0000000000000000e0,,true"]);

    let out = lobatto(&["nodes", "--n", "5"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut weight_sum = 0.0;
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if f[2] == "true" {
            assert!((num(f[0]) - 0.3399810435848563).abs() <= 1e-10);
        } else {
            weight_sum += num(f[1]);
        }
    }
    assert!((weight_sum - 2.0).abs() <= 1e-14);

    let out = lobatto(&["nodes", "--n", "2"]);
    assert!(!out.status.success());
}

#[test]
fn diffmat_command() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    let out = lobatto(&["diffmat", "--n", "6", "--check", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    let table = rows(&path);
    assert_eq!(table.len(), 6);
    assert!(table.iter().all(|r| r.len() == 8));
    for r in &table {
        let sum: f64 = r[1..].iter().map(|s| num(s)).sum();
        assert!(sum.abs() <= 1e-11);
    }
    let report = String::from_utf8(out.stderr).unwrap();
    assert!(report.contains("numerical rank 6"), "{report}");

    let out = lobatto(&["diffmat", "--n", "6", "--kind", "standard", "--check", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(rows(&path)[0].len(), 7);
    assert!(String::from_utf8(out.stderr).unwrap().contains("numerical rank 5"));

    let out = lobatto(&["diffmat", "--n", "6", "--kind", "dual", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(rows(&path).len(), 6);
}

#[test]
fn solve_nonlinear_ivp() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.csv");
    let out = lobatto(&["solve", "--problem", "nonlinear-ivp", "--n", "25", "--out", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let header = std::fs::read_to_string(&path).unwrap().lines().next().unwrap().to_string();
    assert_eq!(header, "t,x_1,u_1,lambda_1");
    let table = rows(&path);
    assert_eq!(table.len(), 26);
    let first = &table[0];
    assert_eq!(num(&first[0]), 0.0);
    assert!((num(&first[1]) - 1.0).abs() <= 1e-10);
    assert!((num(&first[3]) + 0.011924945852769532).abs() <= 1e-6);
    let last = table.last().unwrap();
    assert!((num(&last[0]) - 2.0).abs() <= 1e-15);
    assert!((num(&last[3]) + 1.0).abs() <= 1e-6);
    let blanks: Vec<_> = table.iter().filter(|r| r[2].is_empty()).collect();
    assert_eq!(blanks.len(), 1);
    assert!(blanks[0][3].is_empty());
}

#[test]
fn solve_orbit_raising_and_failures() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("o.csv");
    let p = path.to_str().unwrap();
    let out = lobatto(&["solve", "--problem", "orbit-raising", "--n", "25", "--out", p]);
    assert!(out.status.success());
    let table = rows(&path);
    assert_eq!(table.len(), 26);
    assert!(table.iter().all(|r| r.len() == 1 + 5 + 1 + 5));

    assert!(!lobatto(&["solve", "--problem", "moon-landing", "--n", "10", "--out", p]).status.success());
    assert!(!lobatto(&["solve", "--problem", "orbit-raising", "--n", "10", "--method", "gauss", "--out", p]).status.success());
    let out = lobatto(&["solve", "--problem", "orbit-raising", "--n", "25", "--max-iter", "2", "--out", p]);
    assert!(!out.status.success());
    assert!(String::from_utf8(out.stderr).unwrap().contains("no convergence"));
}

#[test]
fn converge_command() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.csv");
    let p = path.to_str().unwrap();
    let args = ["converge", "--problem", "nonlinear-ivp", "--n-min", "8", "--n-max", "25", "--out", p];
    let out = lobatto(&args);
    assert!(out.status.success());
    let first = std::fs::read(&path).unwrap();
    let table = rows(&path);
    assert_eq!(table.len(), 2 * 18);

    let get = |method: &str, n: usize, col: usize| -> Option<f64> {
        table
            .iter()
            .find(|r| r[1] == method && r[0] == n.to_string())
            .and_then(|r| (!r[col].is_empty()).then(|| num(&r[col])))
    };
    assert!(get("new-lobatto", 20, 2).unwrap() * 1e3 <= get("new-lobatto", 8, 2).unwrap());
    assert!(get("new-lobatto", 25, 4).unwrap() <= 1e-6);
    let standard_min = table
        .iter()
        .filter(|r| r[1] == "standard-lobatto" && !r[4].is_empty())
        .map(|r| num(&r[4]))
        .fold(f64::INFINITY, f64::min);
    assert!(standard_min >= 1e-3);

    // deterministic output
    assert!(lobatto(&args).status.success());
    assert_eq!(std::fs::read(&path).unwrap(), first);

    assert!(!lobatto(&["converge", "--problem", "orbit-raising", "--n-min", "5", "--n-max", "6", "--out", p]).status.success());
}
