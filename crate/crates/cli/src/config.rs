//! TOML run configuration.

use serde::Deserialize;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemBlock,
    #[serde(default)]
    pub solution: SolutionBlock,
    #[serde(default)]
    pub check: CheckBlock,
    #[serde(default)]
    pub canonical: Option<CanonicalBlock>,
    #[serde(default)]
    pub reconstruct: Option<ReconstructBlock>,
    #[serde(default)]
    pub evolve: Option<EvolveBlock>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemBlock {
    #[serde(rename = "type")]
    pub kind: String,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub m: Option<usize>,
    #[serde(default, rename = "H")]
    pub hamiltonian: Option<String>,
    #[serde(default, rename = "L")]
    pub lagrangian: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionBlock {
    #[serde(default)]
    pub alpha: Option<Vec<String>>,
    #[serde(default, rename = "X")]
    pub x: Option<Vec<String>>,
    #[serde(default, rename = "S")]
    pub generating: Option<String>,
    #[serde(default)]
    pub s: Option<Vec<String>>,
    #[serde(default, rename = "W")]
    pub w: Option<Vec<String>>,
    #[serde(default)]
    pub psi: Option<Vec<String>>,
    #[serde(default)]
    pub params: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckBlock {
    /// One `[min, max, count]` triple per axis: base coordinates first,
    /// then the declared parameters.
    #[serde(default)]
    pub grid: Vec<[f64; 3]>,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default, rename = "T")]
    pub t_end: Option<f64>,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub seed: u64,
    /// Extra uniform random samples drawn from the grid box.
    #[serde(default)]
    pub samples: usize,
    /// Optional full jet start for higher-order flow diagnostics.
    #[serde(default)]
    pub start: Option<Vec<f64>>,
}

impl Default for CheckBlock {
    fn default() -> Self {
        CheckBlock {
            grid: Vec::new(),
            tolerance: default_tolerance(),
            t_end: None,
            dt: default_dt(),
            seed: 0,
            samples: 0,
            start: None,
        }
    }
}

fn default_tolerance() -> f64 {
    1e-8
}

fn default_dt() -> f64 {
    1e-3
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CanonicalBlock {
    #[serde(rename = "S2")]
    pub s2: Option<String>,
    /// Family scalar S(q, params); mapped onto a two-point generator.
    #[serde(default, rename = "S")]
    pub family: Option<String>,
    #[serde(rename = "H")]
    pub hamiltonian: Option<String>,
    /// Newton seeds for the transformed positions, over (q, p).
    #[serde(default)]
    pub guess: Option<Vec<String>>,
    /// Which transformed blocks must stay constant: "both" (default),
    /// "momenta" or "positions".
    #[serde(default)]
    pub assert: Option<String>,
    /// Flow starts in phase space.
    #[serde(default)]
    pub starts: Vec<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconstructBlock {
    pub q0: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveBlock {
    pub grid_points: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub y0: Vec<String>,
    pub pt0: Vec<String>,
    pub px0: Vec<String>,
    #[serde(rename = "T")]
    pub t_end: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_save_every")]
    pub save_every: usize,
}

fn default_save_every() -> usize {
    1000
}
