use std::fmt::Write;

use super::metrics::MetricsReport;
use super::threshold::ThresholdCurve;

pub const WINDOW_TABLE_COLUMNS: [&str; 7] = [
    "Test Data Gap",
    "Not Anti-vaccine Samples",
    "Anti-vaccine Samples",
    "Accuracy",
    "F1-Score",
    "ROC-AUC",
    "PRC-AUC",
];

const NA: &str = "NA";

fn fixed4(v: Option<f64>) -> String {
    v.map_or_else(|| NA.to_string(), |x| format!("{x:.4}"))
}

fn full(v: Option<f64>) -> String {
    v.map_or_else(|| NA.to_string(), |x| format!("{x:.6}"))
}

fn window_cells(r: &MetricsReport, num: fn(Option<f64>) -> String) -> [String; 7] {
    [
        r.slice_id.clone(),
        r.n_class0.to_string(),
        r.n_class1.to_string(),
        num(r.accuracy),
        num(r.f1),
        num(r.roc_auc),
        num(r.prc_auc),
    ]
}

/// Left-aligned first column, right-aligned others, dashed rule under the header.
pub fn text_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let line = |cells: Vec<&str>, out: &mut String| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        writeln!(out, "{}", padded.join("  ").trim_end()).unwrap();
    };
    line(header.to_vec(), &mut out);
    let rule: usize = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
    writeln!(out, "{}", "-".repeat(rule)).unwrap();
    for row in rows {
        line(row.iter().map(String::as_str).collect(), &mut out);
    }
    out
}

fn csv_escape(cell: &str) -> String {
    if cell.contains([',', '"', '\n']) {
        format!("\"{}\"", cell.replace('"', "\"\""))
    } else {
        cell.to_string()
    }
}

pub fn csv_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "{}",
        header.iter().map(|h| csv_escape(h)).collect::<Vec<_>>().join(",")
    )
    .unwrap();
    for row in rows {
        writeln!(
            out,
            "{}",
            row.iter().map(|c| csv_escape(c)).collect::<Vec<_>>().join(",")
        )
        .unwrap();
    }
    out
}

/// Per-window table: gap, class counts, accuracy, F1, ROC-AUC, PRC-AUC.
pub fn window_table_text(rows: &[MetricsReport]) -> String {
    let cells: Vec<Vec<String>> = rows.iter().map(|r| window_cells(r, fixed4).to_vec()).collect();
    text_table(&WINDOW_TABLE_COLUMNS, &cells)
}

pub fn window_table_csv(rows: &[MetricsReport]) -> String {
    let cells: Vec<Vec<String>> = rows.iter().map(|r| window_cells(r, full).to_vec()).collect();
    csv_table(&WINDOW_TABLE_COLUMNS, &cells)
}

fn overall_rows(r: &MetricsReport, num: fn(Option<f64>) -> String) -> Vec<Vec<String>> {
    let c = r.confusion;
    vec![
        vec!["Accuracy".into(), num(r.accuracy)],
        vec!["ROC-AUC".into(), num(r.roc_auc)],
        vec!["PRC-AUC".into(), num(r.prc_auc)],
        vec!["Precision".into(), num(r.precision)],
        vec!["Recall".into(), num(r.recall)],
        vec!["F1".into(), num(r.f1)],
        vec!["Threshold".into(), format!("{:.6}", r.threshold_used)],
        vec!["TN".into(), c.tn.to_string()],
        vec!["FP".into(), c.fp.to_string()],
        vec!["FN".into(), c.fn_.to_string()],
        vec!["TP".into(), c.tp.to_string()],
    ]
}

/// Single-slice summary: metric name and value, plus the confusion counts.
pub fn overall_table_text(r: &MetricsReport) -> String {
    text_table(&["Metric", &r.slice_id], &overall_rows(r, fixed4))
}

pub fn overall_table_csv(r: &MetricsReport) -> String {
    csv_table(&["metric", "value"], &overall_rows(r, full))
}

/// Two columns, `threshold,f1`, one row per evaluated threshold.
pub fn threshold_curve_csv(curve: &ThresholdCurve) -> String {
    let mut out = String::with_capacity(curve.grid.len() * 24);
    out.push_str("threshold,f1\n");
    for (t, f) in curve.grid.iter().zip(&curve.f1_at) {
        writeln!(out, "{t:.10},{f:.10}").unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::WindowSpec;
    use crate::eval::{evaluate_windows, WindowedScore};

    #[test]
    fn window_table_shape() {
        let w = WindowSpec::all();
        let scores = vec![
            WindowedScore {
                window: w[0],
                score: 0.8,
                label: 1,
            },
            WindowedScore {
                window: w[0],
                score: 0.3,
                label: 0,
            },
        ];
        let rows = evaluate_windows(&scores, 0.5).unwrap();
        let text = window_table_text(&rows);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 10);
        assert!(lines[0].starts_with("Test Data Gap"));
        assert!(lines[2].starts_with("All Windows"));
        assert!(lines[3].starts_with("[0-90)"));
        assert!(lines[9].starts_with("[360-450)"));
        assert!(lines[4].contains("NA"));

        let csv = window_table_csv(&rows);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 9);
        assert!(lines.iter().all(|l| l.split(',').count() == 7));
        assert_eq!(lines[2], "[0-90),1,1,1.000000,1.000000,1.000000,1.000000");
    }
}
