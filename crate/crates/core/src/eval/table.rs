use serde::{Deserialize, Serialize};

use crate::io::ArtifactMeta;

/// Method-per-row result table. Values are fractions; they are rendered as
/// percentages with two decimals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub title: String,
    pub columns: Vec<String>,
    pub rows: Vec<(String, Vec<f64>)>,
}

impl ResultTable {
    pub fn new(title: impl Into<String>, columns: &[&str]) -> Self {
        Self {
            title: title.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, method: impl Into<String>, values: Vec<f64>) {
        assert_eq!(values.len(), self.columns.len(), "row width");
        self.rows.push((method.into(), values));
    }

    pub fn value(&self, method: &str, column: &str) -> Option<f64> {
        let c = self.columns.iter().position(|x| x == column)?;
        self.rows.iter().find(|(m, _)| m == method).map(|(_, v)| v[c])
    }

    fn cell(v: f64) -> String {
        format!("{:.2}", v * 100.0)
    }

    pub fn to_csv(&self, meta: &ArtifactMeta) -> String {
        let mut s = meta.csv_comment();
        s.push('\n');
        s.push_str("Method");
        for c in &self.columns {
            s.push(',');
            s.push_str(c);
        }
        s.push('\n');
        for (m, vals) in &self.rows {
            s.push_str(m);
            for v in vals {
                s.push(',');
                s.push_str(&Self::cell(*v));
            }
            s.push('\n');
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut grid: Vec<Vec<String>> = Vec::with_capacity(self.rows.len() + 1);
        grid.push(
            std::iter::once("Method".to_string())
                .chain(self.columns.iter().cloned())
                .collect(),
        );
        for (m, vals) in &self.rows {
            grid.push(
                std::iter::once(m.clone())
                    .chain(vals.iter().map(|v| Self::cell(*v)))
                    .collect(),
            );
        }
        let widths: Vec<usize> = (0..grid[0].len())
            .map(|c| grid.iter().map(|r| r[c].len()).max().unwrap_or(0))
            .collect();
        let mut s = format!("{}\n", self.title);
        for (i, row) in grid.iter().enumerate() {
            let cells: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(c, v)| {
                    if c == 0 {
                        format!("{v:<w$}", w = widths[c])
                    } else {
                        format!("{v:>w$}", w = widths[c])
                    }
                })
                .collect();
            s.push_str(cells.join(" | ").trim_end());
            s.push('\n');
            if i == 0 {
                let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
                s.push_str(&rule.join("-+-"));
                s.push('\n');
            }
        }
        s
    }
}
