use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

/// Which algorithm produced a trace row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    /// lRCPA iterations run to warm-start Newton.
    Prestep,
    Newton,
    /// lRCPA run as a solver in its own right.
    Lrcpa,
}

/// One evaluated iterate. Column order matches the CSV header
/// `iter,stage,x_norm,eps_rel,cost,resid_norm,dist_ref,cpu_seconds`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub stage: Stage,
    /// `‖X‖` at the iterate.
    pub x_norm: f64,
    pub eps_rel: f64,
    pub cost: f64,
    /// Achieved linear residual of the Newton step leading to this iterate.
    pub resid_norm: Option<f64>,
    /// Product-manifold distance to a reference solution.
    pub dist_ref: Option<f64>,
    /// Seconds since the start of the run.
    pub cpu_seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverTrace {
    pub rows: Vec<TraceRow>,
}

impl SolverTrace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    /// `‖X‖` of the rows of `stage`, or of all rows.
    pub fn x_norms(&self, stage: Option<Stage>) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| stage.is_none_or(|s| r.stage == s))
            .map(|r| r.x_norm)
            .collect()
    }

    /// Relative errors recomputed from the stored norms.
    pub fn eps_rel(&self) -> Vec<f64> {
        eps_rel(&self.x_norms(None))
    }

    /// Convergence-order estimates over the rows of `stage`.
    pub fn q_rate(&self, stage: Option<Stage>) -> Vec<Option<f64>> {
        q_rate(&self.x_norms(stage))
    }

    pub fn count(&self, stage: Stage) -> usize {
        self.rows.iter().filter(|r| r.stage == stage).count()
    }

    /// First row of `stage` with `eps_rel ≤ target`.
    pub fn first_reaching(&self, target: f64, stage: Stage) -> Option<&TraceRow> {
        self.rows
            .iter()
            .find(|r| r.stage == stage && r.eps_rel <= target)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut wr = csv::Writer::from_writer(w);
        for row in &self.rows {
            wr.serialize(row)?;
        }
        if self.rows.is_empty() {
            wr.write_record([
                "iter",
                "stage",
                "x_norm",
                "eps_rel",
                "cost",
                "resid_norm",
                "dist_ref",
                "cpu_seconds",
            ])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self, csv::Error> {
        let mut rd = csv::Reader::from_reader(r);
        let rows = rd.deserialize().collect::<Result<Vec<TraceRow>, _>>()?;
        Ok(SolverTrace { rows })
    }
}

/// `‖Xᵏ‖ / ‖X⁰‖`. The first entry is 1; a zero initial norm gives zeros
/// afterwards.
pub fn eps_rel(x_norms: &[f64]) -> Vec<f64> {
    let Some(&x0) = x_norms.first() else {
        return Vec::new();
    };
    x_norms
        .iter()
        .enumerate()
        .map(|(k, &x)| {
            if k == 0 {
                1.0
            } else if x0 > 0.0 {
                x / x0
            } else {
                0.0
            }
        })
        .collect()
}

/// `qᵏ = log(‖Xᵏ‖/‖Xᵏ⁻¹‖) / log(‖Xᵏ⁻¹‖/‖Xᵏ⁻²‖)`, aligned with the input.
/// Entries are `None` for `k < 2`, when a norm is zero or non-finite, or
/// when the denominator ratio is 1.
pub fn q_rate(x_norms: &[f64]) -> Vec<Option<f64>> {
    (0..x_norms.len())
        .map(|k| {
            if k < 2 {
                return None;
            }
            let (a, b, c) = (x_norms[k - 2], x_norms[k - 1], x_norms[k]);
            if [a, b, c].iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return None;
            }
            let den = (b / a).ln();
            if den == 0.0 {
                return None;
            }
            Some((c / b).ln() / den)
        })
        .collect()
}
