//! Tabular experiment output with stable ordering, for CSV and JSON
//! serialization.

use serde::Serialize;

/// One (estimator, n, metric) cell.
#[derive(Clone, Debug, Serialize)]
pub struct ResultRow {
    pub estimator: String,
    pub n: usize,
    pub metric: String,
    pub value: f64,
    pub mc_stderr: f64,
}

/// Replicate-failure bookkeeping for one cell. A cell is invalid when
/// more than 1% of its replicates failed to fit.
#[derive(Clone, Debug, Serialize)]
pub struct DroppedCell {
    pub estimator: String,
    pub n: usize,
    pub failures: usize,
    pub replicates: usize,
    pub invalid: bool,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
    pub dropped: Vec<DroppedCell>,
}

impl ResultTable {
    pub(crate) fn note_failures(
        &mut self,
        estimator: &str,
        n: usize,
        failures: usize,
        replicates: usize,
        invalid: bool,
    ) {
        if failures > 0 {
            self.dropped.push(DroppedCell {
                estimator: estimator.to_string(),
                n,
                failures,
                replicates,
                invalid,
            });
        }
    }

    pub fn any_invalid(&self) -> bool {
        self.dropped.iter().any(|d| d.invalid)
    }

    /// Metric names present, in first-appearance order.
    pub fn metric_names(&self) -> Vec<String> {
        let mut names: Vec<String> = Vec::new();
        for row in &self.rows {
            if !names.contains(&row.metric) {
                names.push(row.metric.clone());
            }
        }
        names
    }

    pub fn value(&self, estimator: &str, n: usize, metric: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.estimator == estimator && r.n == n && r.metric == metric)
            .map(|r| r.value)
    }

    /// CSV for one metric, columns `(estimator, n, value, mc_stderr)`.
    /// Floats use the shortest representation that round-trips exactly.
    pub fn to_csv(&self, metric: &str) -> String {
        let mut out = String::from("estimator,n,value,mc_stderr\n");
        for row in self.rows.iter().filter(|r| r.metric == metric) {
            out.push_str(&format!(
                "{},{},{},{}\n",
                row.estimator, row.n, row.value, row.mc_stderr
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_filters_by_metric_and_roundtrips_floats() {
        let mut t = ResultTable::default();
        t.rows.push(ResultRow {
            estimator: "ols".into(),
            n: 10,
            metric: "sgv".into(),
            value: 0.1 + 0.2,
            mc_stderr: 0.0,
        });
        t.rows.push(ResultRow {
            estimator: "ols".into(),
            n: 10,
            metric: "mse".into(),
            value: 1.0,
            mc_stderr: 0.5,
        });
        let csv = t.to_csv("sgv");
        assert_eq!(csv.lines().count(), 2);
        let val: f64 = csv.lines().nth(1).unwrap().split(',').nth(2).unwrap().parse().unwrap();
        assert_eq!(val, 0.1 + 0.2);
    }

    #[test]
    fn invalid_flag_propagates() {
        let mut t = ResultTable::default();
        t.note_failures("huber", 50, 2, 100, true);
        assert!(t.any_invalid());
    }
}
