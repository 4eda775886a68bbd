use std::fmt::Write as _;
use std::path::Path;

use crate::error::Error;
use crate::mms::observed_order;
use crate::Method;

pub const CSV_HEADER: &str = "n,h,err_u1_h1,err_u2_h1,err_p_l2,err_c_l2,err_c_h1,\
ord_u1_h1,ord_u2_h1,ord_p_l2,ord_c_l2,ord_c_h1,div_u_l2,solve_seconds";

/// Errors of one mesh in a ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub n: usize,
    pub h: f64,
    pub err_u1_h1: f64,
    pub err_u2_h1: f64,
    pub err_p_l2: f64,
    pub err_c_l2: f64,
    pub err_c_h1: f64,
    pub div_u_l2: f64,
    pub solve_seconds: f64,
    pub iterations: usize,
}

impl ReportRow {
    fn errors(&self) -> [f64; 5] {
        [self.err_u1_h1, self.err_u2_h1, self.err_p_l2, self.err_c_l2, self.err_c_h1]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub case: String,
    pub method: Method,
    pub solver: String,
    pub c1: f64,
    pub c2: f64,
    pub rows: Vec<ReportRow>,
}

/// Six significant digits.
fn sig6(v: f64) -> String {
    format!("{v:.5e}")
}

impl ConvergenceReport {
    /// Observed orders of `(u1 H1, u2 H1, p L2, c L2, c H1)` per row; `None`
    /// on the first row or when an error is too small to be meaningful.
    pub fn orders(&self) -> Vec<[Option<f64>; 5]> {
        let mut out = vec![[None; 5]; self.rows.len()];
        for i in 1..self.rows.len() {
            let (c, f) = (&self.rows[i - 1], &self.rows[i]);
            let ratio = (f.n as f64 / c.n as f64).log2();
            let (ec, ef) = (c.errors(), f.errors());
            for j in 0..5 {
                if ec[j] > 1e-14 && ef[j] > 1e-14 {
                    out[i][j] = observed_order(ec[j], ef[j]).ok().map(|o| o / ratio);
                }
            }
        }
        out
    }

    /// Order sequence of the concentration H1 error.
    pub fn c_h1_orders(&self) -> Vec<f64> {
        self.orders().iter().filter_map(|o| o[4]).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{CSV_HEADER}");
        for (row, ord) in self.rows.iter().zip(self.orders()) {
            let mut fields = vec![row.n.to_string(), sig6(row.h)];
            fields.extend(row.errors().iter().map(|&e| sig6(e)));
            fields.extend(ord.iter().map(|o| o.map(sig6).unwrap_or_default()));
            fields.push(sig6(row.div_u_l2));
            fields.push(sig6(row.solve_seconds));
            let _ = writeln!(s, "{}", fields.join(","));
        }
        s
    }

    /// CSV without the timing column, for reproducibility checks.
    pub fn to_csv_untimed(&self) -> String {
        self.to_csv()
            .lines()
            .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head))
            .collect::<Vec<_>>()
            .join("\n")
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "### {} / {} (c1 = {}, c2 = {}, solver = {}, stabfem {})\n",
            self.case,
            self.method,
            self.c1,
            self.c2,
            self.solver,
            env!("CARGO_PKG_VERSION")
        );
        let _ = writeln!(
            s,
            "| Mesh size | h | u1 H1 error | Order | u2 H1 error | Order | p L2 error | Order | c L2 error | Order | c H1 error | Order | div u L2 |"
        );
        let _ = writeln!(s, "|{}", "---|".repeat(13));
        for (row, ord) in self.rows.iter().zip(self.orders()) {
            let mut cells = vec![row.n.to_string(), sig6(row.h)];
            for (e, o) in row.errors().iter().zip(ord) {
                cells.push(sig6(*e));
                cells.push(o.map(sig6).unwrap_or_default());
            }
            cells.push(sig6(row.div_u_l2));
            let _ = writeln!(s, "| {} |", cells.join(" | "));
        }
        s
    }

    /// Side-by-side concentration H1 errors of two methods on one ladder.
    pub fn comparison_markdown(galerkin: &ConvergenceReport, sgs: &ConvergenceReport) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "### {}: concentration H1 error\n", galerkin.case);
        let _ = writeln!(
            s,
            "| Mesh size | {a} error | {a} order | {b} error | {b} order |",
            a = galerkin.method,
            b = sgs.method
        );
        let _ = writeln!(s, "|---|---|---|---|---|");
        let (og, os) = (galerkin.orders(), sgs.orders());
        for i in 0..galerkin.rows.len().min(sgs.rows.len()) {
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} | {} |",
                galerkin.rows[i].n,
                sig6(galerkin.rows[i].err_c_h1),
                og[i][4].map(sig6).unwrap_or_default(),
                sig6(sgs.rows[i].err_c_h1),
                os[i][4].map(sig6).unwrap_or_default()
            );
        }
        s
    }

    pub fn emit_csv(&self, path: &Path) -> Result<(), Error> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn emit_markdown(&self, path: &Path) -> Result<(), Error> {
        std::fs::write(path, self.to_markdown()).map_err(|e| Error::io(path, e))
    }
}
