//! Residual reports shared by every verification operation.
//!
//! Reports are plain data, serialized to JSON with a stable field order.
//! Samples that violate domain guards are skipped and counted; a report
//! whose skip fraction exceeds 20% is marked inconclusive rather than
//! passed or failed.

use serde::{Deserialize, Serialize};

/// Outcome of a single check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleResidual {
    pub sample: Vec<f64>,
    pub norm: f64,
}

/// Max-norm residual summary over a set of samples.
#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    pub op: String,
    pub tolerance: f64,
    pub n_samples: usize,
    pub n_skipped: usize,
    pub max_norm: f64,
    pub argmax_sample: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_sample: Option<Vec<SampleResidual>>,
}

impl ResidualReport {
    pub fn status(&self) -> Status {
        if self.n_samples == 0 || self.n_skipped * 5 > self.n_samples {
            Status::Inconclusive
        } else if self.max_norm <= self.tolerance {
            Status::Pass
        } else {
            Status::Fail
        }
    }

    pub fn passed(&self) -> bool {
        self.status() == Status::Pass
    }

    /// Fold another report over the same check into this one, keeping the
    /// worst defect and accumulating sample counts.
    pub fn merge(&mut self, other: &ResidualReport) {
        self.n_samples += other.n_samples;
        self.n_skipped += other.n_skipped;
        if other.max_norm > self.max_norm {
            self.max_norm = other.max_norm;
            self.argmax_sample = other.argmax_sample.clone();
        }
        if let (Some(mine), Some(theirs)) = (self.per_sample.as_mut(), other.per_sample.as_ref()) {
            mine.extend(theirs.iter().cloned());
        }
    }
}

/// Incremental builder preserving sample order.
#[derive(Debug)]
pub struct ResidualAccumulator {
    op: String,
    tolerance: f64,
    n_samples: usize,
    n_skipped: usize,
    max_norm: f64,
    argmax_sample: Option<Vec<f64>>,
    per_sample: Vec<SampleResidual>,
}

impl ResidualAccumulator {
    pub fn new(op: &str, tolerance: f64) -> Self {
        ResidualAccumulator {
            op: op.to_string(),
            tolerance,
            n_samples: 0,
            n_skipped: 0,
            max_norm: 0.0,
            argmax_sample: None,
            per_sample: Vec::new(),
        }
    }

    pub fn add(&mut self, sample: &[f64], norm: f64) {
        self.n_samples += 1;
        if !norm.is_finite() {
            self.n_skipped += 1;
            return;
        }
        self.per_sample.push(SampleResidual {
            sample: sample.to_vec(),
            norm,
        });
        if norm >= self.max_norm {
            self.max_norm = norm;
            self.argmax_sample = Some(sample.to_vec());
        }
    }

    pub fn skip(&mut self, _sample: &[f64]) {
        self.n_samples += 1;
        self.n_skipped += 1;
    }

    pub fn finish(self) -> ResidualReport {
        ResidualReport {
            op: self.op,
            tolerance: self.tolerance,
            n_samples: self.n_samples,
            n_skipped: self.n_skipped,
            max_norm: self.max_norm,
            argmax_sample: self.argmax_sample,
            per_sample: Some(self.per_sample),
        }
    }
}

/// Rectangular sampling lattice, iterated row-major (last axis fastest).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSpec {
    pub axes: Vec<GridAxis>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridAxis {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl GridAxis {
    pub fn points(&self) -> Vec<f64> {
        match self.count {
            0 => Vec::new(),
            1 => vec![0.5 * (self.min + self.max)],
            n => (0..n)
                .map(|i| self.min + (self.max - self.min) * i as f64 / (n - 1) as f64)
                .collect(),
        }
    }
}

impl GridSpec {
    pub fn new(axes: Vec<GridAxis>) -> Self {
        GridSpec { axes }
    }

    /// Uniform lattice: every axis spans `[min, max]` with `count` points.
    pub fn uniform(dim: usize, min: f64, max: f64, count: usize) -> Self {
        GridSpec {
            axes: (0..dim).map(|_| GridAxis { min, max, count }).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.count.max(1)).product()
    }

    pub fn is_empty(&self) -> bool {
        self.axes.iter().any(|a| a.count == 0)
    }

    pub fn nodes(&self) -> Vec<Vec<f64>> {
        let per_axis: Vec<Vec<f64>> = self.axes.iter().map(GridAxis::points).collect();
        let mut out = vec![Vec::new()];
        for axis in &per_axis {
            let mut next = Vec::with_capacity(out.len() * axis.len());
            for node in &out {
                for &x in axis {
                    let mut n = node.clone();
                    n.push(x);
                    next.push(n);
                }
            }
            out = next;
        }
        out
    }
}

pub fn max_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_nodes_row_major() {
        let g = GridSpec::new(vec![
            GridAxis {
                min: 0.0,
                max: 1.0,
                count: 2,
            },
            GridAxis {
                min: 5.0,
                max: 6.0,
                count: 2,
            },
        ]);
        assert_eq!(
            g.nodes(),
            vec![
                vec![0.0, 5.0],
                vec![0.0, 6.0],
                vec![1.0, 5.0],
                vec![1.0, 6.0]
            ]
        );
    }

    #[test]
    fn skip_fraction_marks_inconclusive() {
        let mut acc = ResidualAccumulator::new("test", 1e-8);
        for i in 0..10 {
            if i < 3 {
                acc.skip(&[i as f64]);
            } else {
                acc.add(&[i as f64], 0.0);
            }
        }
        let r = acc.finish();
        assert_eq!(r.status(), Status::Inconclusive);
    }

    #[test]
    fn residual_report_json_shape() {
        let mut acc = ResidualAccumulator::new("slicing_residual", 1e-9);
        acc.add(&[0.5], 2.5e-10);
        let mut rep = acc.finish();
        rep.per_sample = None;
        let json = serde_json::to_string(&rep).unwrap();
        assert_eq!(
            json,
            "{\"op\":\"slicing_residual\",\"tolerance\":1e-9,\"n_samples\":1,\
             \"n_skipped\":0,\"max_norm\":2.5e-10,\"argmax_sample\":[0.5]}"
        );
    }

    #[test]
    fn pass_fail_by_tolerance() {
        let mut acc = ResidualAccumulator::new("test", 1e-8);
        acc.add(&[0.0], 1e-9);
        let r = acc.finish();
        assert_eq!(r.status(), Status::Pass);

        let mut acc = ResidualAccumulator::new("test", 1e-8);
        acc.add(&[0.0], 1e-3);
        acc.add(&[1.0], 0.5);
        let r = acc.finish();
        assert_eq!(r.status(), Status::Fail);
        assert_eq!(r.argmax_sample, Some(vec![1.0]));
    }
}
