use std::collections::BTreeMap;

use super::exact::{QuadNum, Rat};
use super::{AlgebraicTag, ProjectionMatrix};
use crate::error::{Error, Result};

pub const BUILTIN_NAMES: [&str; 4] = ["fibonacci", "silver-mean", "octagonal", "counterexample-1-2"];

fn q(a: (i128, i128), b: (i128, i128), d: i64) -> QuadNum {
    QuadNum::new(Rat::new(a.0, a.1), Rat::new(b.0, b.1), d)
}

/// Line of slope `1 + b√d`-type in the unit square: column (1, slope).
fn slope_line(slope: QuadNum) -> Result<ProjectionMatrix> {
    let d = slope.d;
    let tag = AlgebraicTag::Quadratic { radicand: d, columns: vec![vec![QuadNum::from_int(1, d), slope]] };
    ProjectionMatrix::orthonormalized(2, 1, vec![1.0, slope.to_f64()], tag)
}

pub fn builtin_matrix(name: &str) -> Result<ProjectionMatrix> {
    match name {
        // slope φ = (1 + √5)/2
        "fibonacci" => slope_line(q((1, 2), (1, 2), 5)),
        // slope 1 + √2
        "silver-mean" => slope_line(q((1, 1), (1, 1), 2)),
        // rows (cos jπ/4, sin jπ/4), j = 0..3
        "octagonal" => {
            let d = 2;
            let h = |s: i128| q((0, 1), (s, 2), d);
            let zero = QuadNum::from_int(0, d);
            let one = QuadNum::from_int(1, d);
            let rows = [[one, zero], [h(1), h(1)], [zero, one], [h(-1), h(1)]];
            let entries: Vec<f64> = rows.iter().flat_map(|r| r.iter().map(|v| v.to_f64())).collect();
            let columns = (0..2).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
            ProjectionMatrix::orthonormalized(4, 2, entries, AlgebraicTag::Quadratic { radicand: d, columns })
        }
        // rational slope 2: fails the criterion with k = (2, −1)
        "counterexample-1-2" => {
            let tag = AlgebraicTag::Rational { columns: vec![vec![Rat::from_integer(1), Rat::from_integer(2)]] };
            ProjectionMatrix::orthonormalized(2, 1, vec![1.0, 2.0], tag)
        }
        other => Err(Error::UnknownMatrix(other.to_string())),
    }
}

/// All catalogue matrices that satisfy the criterion.
pub fn builtin_matrices() -> BTreeMap<String, ProjectionMatrix> {
    ["fibonacci", "silver-mean", "octagonal"]
        .iter()
        .map(|&n| (n.to_string(), builtin_matrix(n).expect("catalogue entries are valid")))
        .collect()
}
