//! CSV tables. Numbers use Rust's shortest round-trip formatting, so output is bitwise stable.

use std::fmt::Write as _;

use crate::lp::RegularityReport;
use crate::solvers::NormRecord;

/// `j, block_sup, weighted_block_sup`.
pub fn norm_table_csv(rows: &[(i32, f64, f64)]) -> String {
    let mut s = String::from("j,block_sup,weighted_block_sup\n");
    for (j, a, b) in rows {
        let _ = writeln!(s, "{j},{a:?},{b:?}");
    }
    s
}

/// `j, log2_mean, fit_slope, stderr`; the fit is repeated on every row.
pub fn regularity_csv(r: &RegularityReport) -> String {
    let mut s = String::from("j,log2_mean,fit_slope,stderr\n");
    for (j, m) in &r.levels {
        let _ = writeln!(s, "{j},{m:?},{:?},{:?}", r.slope, r.stderr);
    }
    s
}

/// `t, sup_norm, weighted_sup, besov_alpha`.
pub fn series_csv(rows: &[NormRecord]) -> String {
    let mut s = String::from("t,sup_norm,weighted_sup,besov_alpha\n");
    for r in rows {
        let _ = writeln!(s, "{:?},{:?},{:?},{:?}", r.t, r.sup_norm, r.weighted_sup, r.besov_alpha);
    }
    s
}

/// A generic table with the given header.
pub fn table_csv(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn headers_and_rows() {
        assert_eq!(norm_table_csv(&[(-1, 1.0, 0.5)]), "j,block_sup,weighted_block_sup\n-1,1.0,0.5\n");
        let r = RegularityReport { levels: vec![(1, -2.0), (2, -3.5)], slope: -1.5, stderr: 0.0 };
        assert_eq!(regularity_csv(&r), "j,log2_mean,fit_slope,stderr\n1,-2.0,-1.5,0.0\n2,-3.5,-1.5,0.0\n");
        let rec = NormRecord { t: 0.1, sup_norm: 2.0, weighted_sup: 1.0, besov_alpha: 3.0 };
        assert_eq!(series_csv(&[rec]), "t,sup_norm,weighted_sup,besov_alpha\n0.1,2.0,1.0,3.0\n");
        assert_eq!(table_csv(&["a", "b"], &[vec![1.0, 1e-20]]), "a,b\n1.0,1e-20\n");
    }
}
