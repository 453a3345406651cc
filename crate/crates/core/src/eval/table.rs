use serde::{Deserialize, Serialize};

use super::AblationReport;

pub const TABLE_HEADER: [&str; 5] = ["Model", "Liquidity Features", "MAE", "MSE", "R² Score"];

/// The published LSTM-with-liquidity row; the rendered table mirrors its
/// layout. It is a format reference, not a target for these data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRow {
    pub model: String,
    pub liquidity_features: String,
    pub mae: f64,
    pub mse: f64,
    pub r2: f64,
}

impl ReferenceRow {
    pub fn published() -> Self {
        ReferenceRow {
            model: "LSTM".into(),
            liquidity_features: "Included".into(),
            mae: 0.0212,
            mse: 0.000911,
            r2: 0.9295,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub model: String,
    pub liquidity_features: String,
    pub mae: String,
    pub mse: String,
    pub r2: String,
}

impl TableRow {
    fn cells(&self) -> [&str; 5] {
        [&self.model, &self.liquidity_features, &self.mae, &self.mse, &self.r2]
    }
}

pub fn liquidity_label(included: bool) -> &'static str {
    if included {
        "Included"
    } else {
        "Not Included"
    }
}

/// Two rows per family, with-liquidity first.
pub fn table_rows(report: &AblationReport) -> Vec<TableRow> {
    let mut rows = Vec::new();
    for fam in &report.families {
        for run in [&fam.with_liquidity, &fam.without_liquidity] {
            let (mae, mse, r2) = match &run.report {
                Some(r) => (
                    format!("{:.4}", r.mae),
                    format!("{:.6}", r.mse),
                    r.r2.map_or_else(|| "undefined".to_string(), |v| format!("{v:.4}")),
                ),
                None => ("failed".into(), "failed".into(), "failed".into()),
            };
            rows.push(TableRow {
                model: fam.family.display_name().to_string(),
                liquidity_features: liquidity_label(run.liquidity_included).to_string(),
                mae,
                mse,
                r2,
            });
        }
    }
    rows
}

/// Aligned text table with a header rule.
pub fn render_table(rows: &[TableRow]) -> String {
    let mut widths: Vec<usize> = TABLE_HEADER.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r.cells()) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: [&str; 5]| {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, &w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
            .collect();
        parts.join(" | ").trim_end().to_string()
    };
    let mut out = line(TABLE_HEADER);
    out.push('\n');
    out.push_str(&widths.iter().map(|&w| "-".repeat(w)).collect::<Vec<_>>().join("-+-"));
    out.push('\n');
    for r in rows {
        out.push_str(&line(r.cells()));
        out.push('\n');
    }
    out
}
