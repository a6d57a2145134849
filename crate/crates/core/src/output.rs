//! CSV serialisation: header row, LF line endings, 17 significant digits,
//! empty fields for missing values.

use std::io::Write;

use crate::convergence::ConvergenceRecord;
use crate::discretization::DiffMatrix;
use crate::error::Result;
use crate::orthopoly::NodeSet;
use crate::transcribe::Solution;

/// Round-trip exact representation of `x`.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_real).unwrap_or_default()
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

/// `tau,weight,is_exceptional` sorted by `tau`.
pub fn write_nodes<W: Write>(ns: &NodeSet, w: W) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["tau", "weight", "is_exceptional"])?;
    let mut rows: Vec<(f64, Option<f64>)> = ns
        .collocation()
        .iter()
        .zip(ns.weights())
        .map(|(&t, &w)| (t, Some(w)))
        .collect();
    rows.push((ns.exceptional(), None));
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (tau, weight) in rows {
        let flag = if weight.is_none() { "true" } else { "false" };
        out.write_record([fmt_real(tau), fmt_opt(weight), flag.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

/// Matrix entries, one row per row node. The first field is the row node,
/// the header lists the column nodes.
pub fn write_matrix<W: Write>(d: &DiffMatrix, w: W) -> Result<()> {
    let mut out = writer(w);
    let mut header = vec!["tau".to_string()];
    header.extend(d.col_nodes.iter().map(|&c| fmt_real(c)));
    out.write_record(&header)?;
    for (i, &tau) in d.row_nodes.iter().enumerate() {
        let mut rec = vec![fmt_real(tau)];
        rec.extend(d.entries.row(i).iter().map(|&v| fmt_real(v)));
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

/// `t,x_1..,u_1..,lambda_1..` sorted by time; control and costate fields
/// are empty at the exceptional time.
pub fn write_solution<W: Write>(sol: &Solution, w: W) -> Result<()> {
    let (n_x, n_u) = (sol.states.ncols(), sol.controls.ncols());
    let mut out = writer(w);
    let mut header = vec!["t".to_string()];
    header.extend((1..=n_x).map(|i| format!("x_{i}")));
    header.extend((1..=n_u).map(|i| format!("u_{i}")));
    header.extend((1..=n_x).map(|i| format!("lambda_{i}")));
    out.write_record(&header)?;
    for row in sol.rows_by_time() {
        let mut rec = vec![fmt_real(row.t)];
        rec.extend(row.state.iter().map(|&v| fmt_real(v)));
        match &row.control {
            Some(u) => rec.extend(u.iter().map(|&v| fmt_real(v))),
            None => rec.extend(std::iter::repeat_n(String::new(), n_u)),
        }
        match &row.costate {
            Some(l) => rec.extend(l.iter().map(|&v| fmt_real(v))),
            None => rec.extend(std::iter::repeat_n(String::new(), n_x)),
        }
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

/// `n,method,E_x,E_u,E_lambda,converged`.
pub fn write_convergence<W: Write>(records: &[ConvergenceRecord], w: W) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["n", "method", "E_x", "E_u", "E_lambda", "converged"])?;
    for r in records {
        out.write_record([
            r.n.to_string(),
            r.method.to_string(),
            fmt_opt(r.e_x),
            fmt_opt(r.e_u),
            fmt_opt(r.e_lambda),
            r.converged.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orthopoly::lobatto_nodes;

    #[test]
    fn reals_round_trip() {
        for x in [0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, std::f64::consts::PI] {
            assert_eq!(fmt_real(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn nodes_csv_layout() {
        let mut buf = Vec::new();
        write_nodes(&lobatto_nodes(4).unwrap(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(!text.contains('\r'));
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "tau,weight,is_exceptional");
        assert_eq!(lines.len(), 6);
        let exceptional: Vec<&str> = lines.iter().filter(|l| l.ends_with("true")).copied().collect();
        assert_eq!(exceptional.len(), 1);
        let fields: Vec<&str> = exceptional[0].split(',').collect();
        assert_eq!(fields[0].parse::<f64>().unwrap(), 0.0);
        assert_eq!(fields[1], "");
        let taus: Vec<f64> = lines[1..].iter().map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
        assert!(taus.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn missing_errors_are_empty() {
        let rec = ConvergenceRecord {
            n: 7,
            method: crate::transcribe::Method::StandardLobatto,
            e_x: None,
            e_u: None,
            e_lambda: None,
            converged: false,
        };
        let mut buf = Vec::new();
        write_convergence(&[rec], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "n,method,E_x,E_u,E_lambda,converged\n7,standard-lobatto,,,,false\n"
        );
    }
}
