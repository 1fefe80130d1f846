use std::fmt::{self, Write};

use serde::Serialize;

use super::mwu::{mann_whitney_u, UMethod};

pub const DEFAULT_ALPHA: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Class 1 tends to score higher.
    Higher,
    Lower,
    None,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Higher => "higher",
            Direction::Lower => "lower",
            Direction::None => "none",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub feature: String,
    pub n_class0: usize,
    pub n_class1: usize,
    pub median_class0: Option<f64>,
    pub median_class1: Option<f64>,
    /// U of class 1 against class 0.
    pub u: Option<f64>,
    pub p_value: Option<f64>,
    pub method: Option<UMethod>,
    pub direction: Direction,
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    })
}

/// One row per feature. The direction is set only when `p < alpha`, from the
/// sign of `U - n0*n1/2`. Features where either class has no scores get no
/// test and direction `none`.
pub fn class_comparison_report(
    features: &[String],
    class0: &[Vec<f64>],
    class1: &[Vec<f64>],
    alpha: f64,
) -> Vec<ComparisonRow> {
    features
        .iter()
        .zip(class0.iter().zip(class1))
        .map(|(name, (a, b))| {
            let test = mann_whitney_u(b, a).ok();
            let direction = match test {
                Some(t) if t.p_value < alpha => {
                    let centre = (a.len() * b.len()) as f64 / 2.0;
                    if t.u_a > centre {
                        Direction::Higher
                    } else if t.u_a < centre {
                        Direction::Lower
                    } else {
                        Direction::None
                    }
                }
                _ => Direction::None,
            };
            ComparisonRow {
                feature: name.clone(),
                n_class0: a.len(),
                n_class1: b.len(),
                median_class0: median(a),
                median_class1: median(b),
                u: test.map(|t| t.u_a),
                p_value: test.map(|t| t.p_value),
                method: test.map(|t| t.method),
                direction,
            }
        })
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x}"))
}

pub const COMPARISON_COLUMNS: [&str; 8] = [
    "feature",
    "n_class0",
    "n_class1",
    "median_class0",
    "median_class1",
    "u",
    "p_value",
    "direction",
];

/// Delimited table; `sep` is `,` for CSV or `\t` for text output.
pub fn comparison_table(rows: &[ComparisonRow], sep: char) -> String {
    let mut out = COMPARISON_COLUMNS.join(&sep.to_string());
    out.push('\n');
    for r in rows {
        let cells = [
            r.feature.clone(),
            r.n_class0.to_string(),
            r.n_class1.to_string(),
            opt(r.median_class0),
            opt(r.median_class1),
            opt(r.u),
            r.p_value.map_or_else(|| "NA".to_string(), |p| format!("{p:e}")),
            r.direction.to_string(),
        ];
        writeln!(out, "{}", cells.join(&sep.to_string())).unwrap();
    }
    out
}
