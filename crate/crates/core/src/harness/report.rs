//! Convergence reports with reproducible CSV/JSON serialization.

use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct ReportRow {
    /// Measured mesh size (not the requested target).
    pub size: f64,
    pub error: f64,
}

/// One convergence ladder: rows sorted by descending mesh size plus the
/// pairwise experimental orders of convergence.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub study: String,
    pub model: String,
    pub metric: String,
    pub degree: Option<usize>,
    pub ring: u32,
    pub rows: Vec<ReportRow>,
    /// length = rows - 1; pairs of adjacent rows
    pub eoc: Vec<f64>,
}

impl ConvergenceReport {
    /// CSV with columns size, error, eoc; the first row has no EOC entry.
    /// Formatting is fixed so identical runs produce identical bytes.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("size,error,eoc\n");
        for (i, row) in self.rows.iter().enumerate() {
            let eoc = if i == 0 {
                String::new()
            } else {
                format_eoc(self.eoc[i - 1])
            };
            out.push_str(&format!("{:.12e},{:.12e},{}\n", row.size, row.error, eoc));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// True when the finest rung attains the smallest error of the ladder.
    pub fn finest_error_is_min(&self) -> bool {
        match self.rows.last() {
            Some(last) => self.rows.iter().all(|r| r.error >= last.error),
            None => true,
        }
    }
}

fn format_eoc(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".to_string() } else { "-inf".to_string() }
    } else {
        format!("{v:.12e}")
    }
}
