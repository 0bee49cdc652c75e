//! The report written next to every run: one entry per executed check,
//! serialized as JSON with a stable field order. Two runs with the same
//! config and seed produce byte-identical files; wall-clock timing is
//! printed to the console only, never serialized.

use hjtk_core::report::{ResidualReport, Status};
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct Report {
    pub verb: String,
    pub config_digest: String,
    pub prng: &'static str,
    pub seed: u64,
    pub checks: Vec<CheckResult>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub max_defect: f64,
    pub tolerance: f64,
    pub status: Status,
    pub n_samples: usize,
    pub n_skipped: usize,
}

impl CheckResult {
    pub fn from_residual(r: &ResidualReport) -> CheckResult {
        CheckResult {
            name: r.op.clone(),
            max_defect: r.max_norm,
            tolerance: r.tolerance,
            status: r.status(),
            n_samples: r.n_samples,
            n_skipped: r.n_skipped,
        }
    }

    pub fn scalar(name: &str, defect: f64, tolerance: f64) -> CheckResult {
        CheckResult {
            name: name.to_string(),
            max_defect: defect,
            tolerance,
            status: if defect <= tolerance {
                Status::Pass
            } else {
                Status::Fail
            },
            n_samples: 1,
            n_skipped: 0,
        }
    }
}

impl Report {
    pub fn new(verb: &str, digest: String, seed: u64) -> Report {
        Report {
            verb: verb.to_string(),
            config_digest: digest,
            prng: "splitmix64",
            seed,
            checks: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn push_residual(&mut self, r: &ResidualReport) {
        self.checks.push(CheckResult::from_residual(r));
    }

    pub fn overall(&self) -> Status {
        let mut status = Status::Pass;
        for c in &self.checks {
            match c.status {
                Status::Fail => return Status::Fail,
                Status::Inconclusive => status = Status::Inconclusive,
                Status::Pass => {}
            }
        }
        status
    }

    pub fn exit_code(&self) -> i32 {
        match self.overall() {
            Status::Pass => 0,
            Status::Fail => 1,
            Status::Inconclusive => 2,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// FNV-1a digest of the raw config bytes, hex encoded.
pub fn config_digest(bytes: &[u8]) -> String {
    let mut hash: u64 = 0xcbf29ce484222325;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x100000001b3);
    }
    format!("fnv1a:{hash:016x}")
}
