//! Verb runners: translate a parsed config into core checks and collect
//! the results into a [`Report`].

use std::fs;
use std::path::Path;

use hjtk_core::canonical::{
    complete_to_canonical, equilibrium_defect, symplectomorphism_defect, AssertedBlocks,
    CanonicalMap, EquilibriumStart, GeneratingFunction2Point,
};
use hjtk_core::dynamics::{ParamFamily, VectorFieldSection};
use hjtk_core::error::{CoreError, Result as CoreResult};
use hjtk_core::expr::{names, ScalarField};
use hjtk_core::field_theory::{
    ddw_evolve, field_legendre, field_legendre_inverse, lag_field_hj_residual,
    ham_field_hj_residual, basefiber_vars, sample_profile, velocity_vars, DdwInitial,
    FieldHJCandidate, FieldTheory,
};
use hjtk_core::hamiltonian::{
    complete_solution_check, generalized_hj_residual, invariance_defect, reconstruct,
    standard_hj_residual, HamiltonianSystem, OneFormSection,
};
use hjtk_core::higher_order::{
    higher_el_flow, higher_energy, higher_hj_residuals, jet_vars, HigherLagrangian, JetSection,
};
use hjtk_core::lagrangian::{
    lag_hj_residuals, legendre, legendre_inverse, LagrangianSystem,
};
use hjtk_core::report::{GridAxis, GridSpec, ResidualReport, Status};
use hjtk_core::rng::SplitMix64;

use crate::config::RunConfig;
use crate::report::{CheckResult, Report};

pub struct RunOptions {
    pub tolerance: Option<f64>,
    pub seed: Option<u64>,
    pub samples: Option<usize>,
}

#[derive(Debug)]
pub enum RunError {
    Config(String),
    Core(CoreError),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(msg) => write!(f, "config error: {msg}"),
            RunError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<CoreError> for RunError {
    fn from(e: CoreError) -> Self {
        RunError::Core(e)
    }
}

type RunResult<T> = std::result::Result<T, RunError>;

fn config_err(msg: impl Into<String>) -> RunError {
    RunError::Config(msg.into())
}

struct Sampling {
    base_grid: GridSpec,
    param_grid: GridSpec,
    base_samples: Vec<Vec<f64>>,
    param_nodes: Vec<Vec<f64>>,
    tolerance: f64,
    t_end: Option<f64>,
    dt: f64,
}

/// Split the configured grid into base and parameter axes and materialize
/// the sample points, appending seeded random draws when requested.
fn sampling(cfg: &RunConfig, opts: &RunOptions, base_dim: usize) -> RunResult<Sampling> {
    let n_params = cfg.solution.params.len();
    let axes = &cfg.check.grid;
    if axes.len() != base_dim + n_params {
        return Err(config_err(format!(
            "grid must list {} axes ({} base + {} parameters), got {}",
            base_dim + n_params,
            base_dim,
            n_params,
            axes.len()
        )));
    }
    let to_axis = |a: &[f64; 3]| -> RunResult<GridAxis> {
        let count = a[2] as usize;
        if a[2].fract() != 0.0 || count == 0 {
            return Err(config_err("grid axis count must be a positive integer"));
        }
        Ok(GridAxis {
            min: a[0],
            max: a[1],
            count,
        })
    };
    let base_grid = GridSpec::new(axes[..base_dim].iter().map(to_axis).collect::<RunResult<_>>()?);
    let param_grid = GridSpec::new(axes[base_dim..].iter().map(to_axis).collect::<RunResult<_>>()?);

    let seed = opts.seed.unwrap_or(cfg.check.seed);
    let extra = opts.samples.unwrap_or(cfg.check.samples);
    let mut base_samples = base_grid.nodes();
    if extra > 0 {
        let mut rng = SplitMix64::new(seed);
        for _ in 0..extra {
            base_samples.push(
                base_grid
                    .axes
                    .iter()
                    .map(|a| rng.in_range(a.min, a.max))
                    .collect(),
            );
        }
    }
    let param_nodes = if n_params == 0 {
        vec![Vec::new()]
    } else {
        param_grid.nodes()
    };
    Ok(Sampling {
        base_grid,
        param_grid,
        base_samples,
        param_nodes,
        tolerance: opts.tolerance.unwrap_or(cfg.check.tolerance),
        t_end: cfg.check.t_end,
        dt: cfg.check.dt,
    })
}

/// Compile texts over `base_vars ++ params`.
fn compile_family(
    texts: &[String],
    base_vars: &[String],
    params: &[String],
    aliases: &[(String, usize)],
) -> CoreResult<Vec<ScalarField>> {
    let mut vars = base_vars.to_vec();
    vars.extend(params.iter().cloned());
    texts
        .iter()
        .map(|t| ScalarField::compile_with_aliases(t, &vars, aliases))
        .collect()
}

/// Bind the trailing parameter variables of a family component.
fn bind_params(f: &ScalarField, base_dim: usize, lambda: &[f64]) -> ScalarField {
    let keep: Vec<usize> = (0..base_dim).collect();
    let fixed: Vec<(usize, f64)> = lambda
        .iter()
        .enumerate()
        .map(|(i, &v)| (base_dim + i, v))
        .collect();
    f.bind(&keep, &fixed)
}

fn merge_into(slot: &mut Option<ResidualReport>, rep: ResidualReport) {
    match slot {
        Some(acc) => acc.merge(&rep),
        None => *slot = Some(rep),
    }
}

fn push_all(report: &mut Report, reps: &[Option<ResidualReport>]) {
    for rep in reps.iter().flatten() {
        report.push_residual(rep);
    }
}

pub fn run_check_hj(cfg: &RunConfig, opts: &RunOptions, report: &mut Report) -> RunResult<()> {
    let n = cfg.system.n.ok_or_else(|| config_err("system.n is required"))?;
    let h = cfg
        .system
        .hamiltonian
        .as_ref()
        .ok_or_else(|| config_err("system.H is required"))?;
    let sys = HamiltonianSystem::new(n, h)?;
    let s = sampling(cfg, opts, n)?;
    let params = &cfg.solution.params;
    let q_vars = names("q", n);

    let fam_alpha: Option<Vec<ScalarField>> = match &cfg.solution.alpha {
        Some(texts) => {
            if texts.len() != n {
                return Err(config_err(format!("solution.alpha needs {n} components")));
            }
            Some(compile_family(texts, &q_vars, params, &[])?)
        }
        None => None,
    };
    let fam_s: Option<ScalarField> = match &cfg.solution.generating {
        Some(text) => Some(compile_family(std::slice::from_ref(text), &q_vars, params, &[])?.remove(0)),
        None => None,
    };
    if fam_alpha.is_none() && fam_s.is_none() {
        return Err(config_err("solution.alpha or solution.S is required"));
    }

    let mut closed = None;
    let mut dh = None;
    let mut gen = None;
    let mut inv = None;
    for lambda in &s.param_nodes {
        let alpha = match (&fam_alpha, &fam_s) {
            (Some(comps), _) => OneFormSection::new(
                comps.iter().map(|c| bind_params(c, n, lambda)).collect(),
            )?,
            (None, Some(sf)) => OneFormSection::from_generating(&bind_params(sf, n, lambda)),
            (None, None) => unreachable!(),
        };
        let std_rep = standard_hj_residual(&sys, &alpha, &s.base_samples, s.tolerance)?;
        merge_into(&mut closed, std_rep.closedness);
        merge_into(&mut dh, std_rep.dh);
        merge_into(
            &mut gen,
            generalized_hj_residual(&sys, &alpha, None, &s.base_samples, s.tolerance)?,
        );
        if let Some(t_end) = s.t_end {
            merge_into(
                &mut inv,
                invariance_defect(&sys, &alpha, &s.base_grid.nodes(), t_end, s.dt, s.tolerance)?,
            );
        }
    }
    push_all(report, &[closed, dh, gen, inv]);
    Ok(())
}

pub fn run_check_lag_hj(cfg: &RunConfig, opts: &RunOptions, report: &mut Report) -> RunResult<()> {
    let n = cfg.system.n.ok_or_else(|| config_err("system.n is required"))?;
    let l = cfg
        .system
        .lagrangian
        .as_ref()
        .ok_or_else(|| config_err("system.L is required"))?;
    let sys = LagrangianSystem::new(n, l)?;
    let s = sampling(cfg, opts, n)?;
    let params = &cfg.solution.params;
    let q_vars = names("q", n);

    let x_texts = cfg
        .solution
        .x
        .as_ref()
        .ok_or_else(|| config_err("solution.X is required"))?;
    if x_texts.len() != n {
        return Err(config_err(format!("solution.X needs {n} components")));
    }
    let fam_x = compile_family(x_texts, &q_vars, params, &[])?;
    let fam_s: Option<ScalarField> = match &cfg.solution.generating {
        Some(text) => Some(compile_family(std::slice::from_ref(text), &q_vars, params, &[])?.remove(0)),
        None => None,
    };

    let mut omega = None;
    let mut de = None;
    let mut gen = None;
    let mut eqs = None;
    for lambda in &s.param_nodes {
        let x = VectorFieldSection::from_components(
            fam_x.iter().map(|c| bind_params(c, n, lambda)).collect(),
        )?;
        let gen_scalar = fam_s.as_ref().map(|f| bind_params(f, n, lambda));
        let rep = lag_hj_residuals(&sys, &x, gen_scalar.as_ref(), &s.base_samples, s.tolerance)?;
        merge_into(&mut omega, rep.pullback_omega);
        merge_into(&mut de, rep.de);
        merge_into(&mut gen, rep.generalized);
        if let Some(e) = rep.eq_s {
            merge_into(&mut eqs, e);
        }
    }
    push_all(report, &[omega, de, gen, eqs]);
    Ok(())
}

pub fn run_reconstruct(
    cfg: &RunConfig,
    opts: &RunOptions,
    out_dir: &Path,
    report: &mut Report,
) -> RunResult<()> {
    let n = cfg.system.n.ok_or_else(|| config_err("system.n is required"))?;
    let h = cfg
        .system
        .hamiltonian
        .as_ref()
        .ok_or_else(|| config_err("system.H is required"))?;
    let sys = HamiltonianSystem::new(n, h)?;
    let s = sampling(cfg, opts, n)?;
    let q0 = &cfg
        .reconstruct
        .as_ref()
        .ok_or_else(|| config_err("[reconstruct] block with q0 is required"))?
        .q0;
    if q0.len() != n {
        return Err(config_err(format!("reconstruct.q0 needs {n} entries")));
    }
    let t_end = s
        .t_end
        .ok_or_else(|| config_err("check.T is required for reconstruct"))?;
    let alpha_texts = cfg
        .solution
        .alpha
        .as_ref()
        .ok_or_else(|| config_err("solution.alpha is required"))?;
    let fam = compile_family(alpha_texts, &names("q", n), &cfg.solution.params, &[])?;

    let mut worst_gap: f64 = 0.0;
    let mut all_complete = true;
    let mut wrote_csv = false;
    for lambda in &s.param_nodes {
        let alpha = OneFormSection::new(fam.iter().map(|c| bind_params(c, n, lambda)).collect())?;
        let rec = reconstruct(&sys, &alpha, q0, t_end, s.dt)?;
        worst_gap = worst_gap.max(rec.max_gap);
        all_complete &= rec.complete;
        if !wrote_csv {
            write_curve_csv(out_dir, "base.csv", &rec.base_curve.times, &rec.base_curve.states)?;
            let lift_times = &rec.base_curve.times[..rec.lifted_curve.len()];
            write_curve_csv(out_dir, "lifted.csv", lift_times, &rec.lifted_curve)?;
            write_curve_csv(
                out_dir,
                "direct.csv",
                &rec.direct_curve.times,
                &rec.direct_curve.states,
            )?;
            wrote_csv = true;
        }
    }
    let mut check = CheckResult::scalar("reconstruct_max_gap", worst_gap, s.tolerance);
    if !all_complete {
        check.status = Status::Inconclusive;
        report
            .notes
            .push("a trajectory left the guarded domain; comparison truncated".to_string());
    }
    report.checks.push(check);
    Ok(())
}

pub fn run_complete(cfg: &RunConfig, opts: &RunOptions, report: &mut Report) -> RunResult<()> {
    let n = cfg.system.n.ok_or_else(|| config_err("system.n is required"))?;
    let h = cfg
        .system
        .hamiltonian
        .as_ref()
        .ok_or_else(|| config_err("system.H is required"))?;
    let sys = HamiltonianSystem::new(n, h)?;
    if cfg.solution.params.len() != n {
        return Err(config_err(format!(
            "a complete solution needs exactly {n} parameters"
        )));
    }
    let s = sampling(cfg, opts, n)?;
    let alpha_texts = cfg
        .solution
        .alpha
        .as_ref()
        .ok_or_else(|| config_err("solution.alpha is required"))?;
    let comps = compile_family(alpha_texts, &names("q", n), &cfg.solution.params, &[])?;
    let fam = ParamFamily::new(names("q", n), cfg.solution.params.clone(), comps)?;
    let t_end = s.t_end.unwrap_or(1.0);
    let rep = complete_solution_check(
        &sys,
        &fam,
        &s.base_grid,
        &s.param_grid,
        s.tolerance,
        t_end,
        s.dt,
    )?;
    report.push_residual(&rep.standard.closedness);
    report.push_residual(&rep.standard.dh);
    report
        .checks
        .push(CheckResult::scalar("singular_nodes", rep.n_singular as f64, 0.0));
    report.push_residual(&rep.constants_drift);
    report
        .notes
        .push(format!("min |det| of the joint Jacobian: {:e}", rep.min_abs_det));
    if rep.n_inversion_failures > 0 {
        report.notes.push(format!(
            "{} parameter inversions failed along flows (off-branch samples)",
            rep.n_inversion_failures
        ));
    }
    report.notes.push(rep.note);
    Ok(())
}

pub fn run_canonical(cfg: &RunConfig, opts: &RunOptions, report: &mut Report) -> RunResult<()> {
    let block = cfg
        .canonical
        .as_ref()
        .ok_or_else(|| config_err("[canonical] block is required"))?;
    let n = cfg.system.n.ok_or_else(|| config_err("system.n is required"))?;
    let s = sampling(cfg, opts, 2 * n).or_else(|_| {
        // The canonical verb may omit the grid entirely and rely on starts.
        if cfg.check.grid.is_empty() {
            Ok(Sampling {
                base_grid: GridSpec::new(Vec::new()),
                param_grid: GridSpec::new(Vec::new()),
                base_samples: Vec::new(),
                param_nodes: vec![Vec::new()],
                tolerance: opts.tolerance.unwrap_or(cfg.check.tolerance),
                t_end: cfg.check.t_end,
                dt: cfg.check.dt,

            })
        } else {
            Err(config_err("grid axes must cover (q, p) plus parameters"))
        }
    })?;

    let generator = match (&block.s2, &block.family) {
        (Some(text), _) => GeneratingFunction2Point::new(n, text)?,
        (None, Some(fam_text)) => {
            if cfg.solution.params.len() != n {
                return Err(config_err(format!(
                    "canonical.S needs exactly {n} parameters declared in solution.params"
                )));
            }
            let mut vars = names("q", n);
            vars.extend(cfg.solution.params.iter().cloned());
            let sf = ScalarField::compile(fam_text, &vars)?;
            complete_to_canonical(&sf, n)?
        }
        (None, None) => return Err(config_err("canonical.S2 or canonical.S is required")),
    };
    let h_text = block
        .hamiltonian
        .as_ref()
        .or(cfg.system.hamiltonian.as_ref())
        .ok_or_else(|| config_err("a Hamiltonian is required (canonical.H or system.H)"))?;
    let sys = HamiltonianSystem::new(n, h_text)?;

    let guess_fields: Option<Vec<ScalarField>> = match &block.guess {
        Some(texts) => {
            if texts.len() != n {
                return Err(config_err(format!("canonical.guess needs {n} components")));
            }
            Some(
                texts
                    .iter()
                    .map(|t| ScalarField::compile(t, &hjtk_core::hamiltonian::phase_vars(n)))
                    .collect::<CoreResult<Vec<_>>>()?,
            )
        }
        None => None,
    };

    let mut samples: Vec<Vec<f64>> = block.starts.clone();
    samples.extend(s.base_samples.iter().cloned());
    if samples.is_empty() {
        return Err(config_err("canonical.starts or a grid is required"));
    }
    for st in &samples {
        if st.len() != 2 * n {
            return Err(config_err("each start must list 2n phase coordinates"));
        }
    }

    let map = CanonicalMap::from_generator(&generator, guess_fields.clone());
    let sympl = symplectomorphism_defect(&map, &samples, s.tolerance)?;
    report.push_residual(&sympl);

    let asserted = match block.assert.as_deref() {
        None | Some("both") => AssertedBlocks::Both,
        Some("momenta") => AssertedBlocks::MomentaOnly,
        Some("positions") => AssertedBlocks::PositionsOnly,
        Some(other) => {
            return Err(config_err(format!(
                "canonical.assert must be both|momenta|positions, got `{other}`"
            )))
        }
    };
    if let Some(t_end) = s.t_end {
        let starts: Vec<EquilibriumStart> = samples
            .iter()
            .map(|st| -> CoreResult<EquilibriumStart> {
                let qt_guess = match &guess_fields {
                    Some(fields) => Some(
                        fields
                            .iter()
                            .map(|f| f.eval(st))
                            .collect::<CoreResult<Vec<f64>>>()?,
                    ),
                    None => None,
                };
                Ok(EquilibriumStart {
                    state: st.clone(),
                    qt_guess,
                })
            })
            .collect::<CoreResult<_>>()?;
        let eq = equilibrium_defect(&generator, &sys, &starts, t_end, s.dt, asserted, s.tolerance)?;
        match asserted {
            AssertedBlocks::Both => {
                report.push_residual(&eq.position_drift);
                report.push_residual(&eq.momentum_drift);
            }
            AssertedBlocks::MomentaOnly => {
                report.push_residual(&eq.momentum_drift);
                report.notes.push(format!(
                    "transformed_position_drift not asserted (observed {:e})",
                    eq.position_drift.max_norm
                ));
            }
            AssertedBlocks::PositionsOnly => {
                report.push_residual(&eq.position_drift);
                report.notes.push(format!(
                    "transformed_momentum_drift not asserted (observed {:e})",
                    eq.momentum_drift.max_norm
                ));
            }
        }
        if eq.n_transform_failures > 0 {
            report.notes.push(format!(
                "{} transform solves failed along flows",
                eq.n_transform_failures
            ));
        }
    }
    Ok(())
}

pub fn run_higher(cfg: &RunConfig, opts: &RunOptions, report: &mut Report) -> RunResult<()> {
    let n = cfg.system.n.ok_or_else(|| config_err("system.n is required"))?;
    let k = cfg.system.k.ok_or_else(|| config_err("system.k is required"))?;
    let l = cfg
        .system
        .lagrangian
        .as_ref()
        .ok_or_else(|| config_err("system.L is required"))?;
    let lag = HigherLagrangian::new(n, k, l)?;
    let base_dim = k * n;
    let s = sampling(cfg, opts, base_dim)?;
    let params = &cfg.solution.params;
    let base_vars = jet_vars(n, k - 1);

    let sec_texts = cfg
        .solution
        .s
        .as_ref()
        .ok_or_else(|| config_err("solution.s (jet section components) is required"))?;
    if sec_texts.len() != k * n {
        return Err(config_err(format!(
            "solution.s needs {} components",
            k * n
        )));
    }
    let fam_sec = compile_family(sec_texts, &base_vars, params, &[])?;
    let fam_gen: Option<ScalarField> = match &cfg.solution.generating {
        Some(t) => Some(compile_family(std::slice::from_ref(t), &base_vars, params, &[])?.remove(0)),
        None => None,
    };

    let mut tang = None;
    let mut closed = None;
    let mut pde = None;
    for lambda in &s.param_nodes {
        let section = JetSection::new(
            n,
            k,
            fam_sec
                .iter()
                .map(|c| bind_params(c, base_dim, lambda))
                .collect(),
        )?;
        let gen_scalar = fam_gen.as_ref().map(|f| bind_params(f, base_dim, lambda));
        let rep =
            higher_hj_residuals(&lag, &section, gen_scalar.as_ref(), &s.base_samples, s.tolerance)?;
        merge_into(&mut tang, rep.tangency);
        merge_into(&mut closed, rep.closedness);
        if let Some(p) = rep.pde {
            merge_into(&mut pde, p);
        }
    }
    push_all(report, &[tang, closed, pde]);

    if let (Some(start), Some(t_end)) = (&cfg.check.start, s.t_end) {
        if start.len() != 2 * k * n {
            return Err(config_err(format!(
                "check.start needs {} jet coordinates",
                2 * k * n
            )));
        }
        let e = higher_energy(&lag)?;
        let flow = higher_el_flow(&lag, start, t_end, s.dt)?;
        let e0 = e.eval(&flow.states[0])?;
        let mut drift: f64 = 0.0;
        for st in &flow.states {
            drift = drift.max((e.eval(st)? - e0).abs());
        }
        report
            .checks
            .push(CheckResult::scalar("energy_drift", drift, s.tolerance));
    }
    Ok(())
}

pub fn run_field_check(cfg: &RunConfig, opts: &RunOptions, report: &mut Report) -> RunResult<()> {
    let m = cfg.system.m.ok_or_else(|| config_err("system.m is required"))?;
    let n = cfg.system.n.ok_or_else(|| config_err("system.n is required"))?;
    let theory = match (&cfg.system.lagrangian, &cfg.system.hamiltonian) {
        (Some(l), Some(h)) => FieldTheory::from_lagrangian(m, n, l)?.with_hamiltonian(h)?,
        (Some(l), None) => FieldTheory::from_lagrangian(m, n, l)?,
        (None, Some(h)) => FieldTheory::from_hamiltonian(m, n, h)?,
        (None, None) => return Err(config_err("system.L or system.H is required")),
    };
    let base_dim = m + n;
    let s = sampling(cfg, opts, base_dim)?;
    let params = &cfg.solution.params;
    let base_vars = basefiber_vars(m, n);

    let w_texts = cfg
        .solution
        .w
        .as_ref()
        .ok_or_else(|| config_err("solution.W is required"))?;
    if w_texts.len() != m {
        return Err(config_err(format!("solution.W needs {m} components")));
    }
    let fam_w = compile_family(w_texts, &base_vars, params, &[])?;
    let fam_psi: Option<Vec<ScalarField>> = match &cfg.solution.psi {
        Some(texts) => {
            if texts.len() != m * n {
                return Err(config_err(format!("solution.psi needs {} components", m * n)));
            }
            Some(compile_family(texts, &base_vars, params, &[])?)
        }
        None => None,
    };

    let mut lag_rep = None;
    let mut ham_rep = None;
    for lambda in &s.param_nodes {
        let cand = FieldHJCandidate {
            w: fam_w.iter().map(|c| bind_params(c, base_dim, lambda)).collect(),
            psi: fam_psi
                .as_ref()
                .map(|psi| psi.iter().map(|c| bind_params(c, base_dim, lambda)).collect()),
        };
        if theory.lagrangian().is_ok() && cand.psi.is_some() {
            merge_into(
                &mut lag_rep,
                lag_field_hj_residual(&theory, &cand, &s.base_samples, s.tolerance)?,
            );
        }
        if theory.hamiltonian().is_ok() {
            merge_into(
                &mut ham_rep,
                ham_field_hj_residual(&theory, &cand, &s.base_samples, s.tolerance)?,
            );
        }
    }
    if lag_rep.is_none() && ham_rep.is_none() {
        return Err(config_err(
            "nothing to check: need L with psi for the Lagrangian side or H for the Hamiltonian side",
        ));
    }
    push_all(report, &[lag_rep, ham_rep]);
    Ok(())
}

pub fn run_field_evolve(
    cfg: &RunConfig,
    opts: &RunOptions,
    out_dir: &Path,
    report: &mut Report,
) -> RunResult<()> {
    let m = cfg.system.m.ok_or_else(|| config_err("system.m is required"))?;
    let n = cfg.system.n.ok_or_else(|| config_err("system.n is required"))?;
    let h = cfg
        .system
        .hamiltonian
        .as_ref()
        .ok_or_else(|| config_err("system.H is required for evolution"))?;
    let theory = FieldTheory::from_hamiltonian(m, n, h)?;
    let ev = cfg
        .evolve
        .as_ref()
        .ok_or_else(|| config_err("[evolve] block is required"))?;
    if ev.y0.len() != n || ev.pt0.len() != n || ev.px0.len() != n {
        return Err(config_err(format!("initial profiles need {n} components each")));
    }
    let tolerance = opts.tolerance.unwrap_or(cfg.check.tolerance);

    let xvar = vec!["x".to_string()];
    let profile = |texts: &[String]| -> CoreResult<Vec<Vec<f64>>> {
        texts
            .iter()
            .map(|t| {
                let f = ScalarField::compile(t, &xvar)?;
                sample_profile(&f, ev.x_min, ev.x_max, ev.grid_points)
            })
            .collect()
    };
    let init = DdwInitial {
        x_min: ev.x_min,
        x_max: ev.x_max,
        y: profile(&ev.y0)?,
        p_t: profile(&ev.pt0)?,
        p_x: profile(&ev.px0)?,
    };
    let out = ddw_evolve(&theory, &init, ev.t_end, ev.dt, ev.save_every)?;

    if out.cfl_warning {
        report
            .notes
            .push("time step exceeds the grid spacing (dt > dx)".to_string());
    }
    if out.initial_constraint > 1e-6 {
        report.notes.push(format!(
            "initial data violates the spatial-derivative relation by {:e}",
            out.initial_constraint
        ));
    }
    report.checks.push(CheckResult::scalar(
        "energy_drift",
        out.max_energy_drift(),
        tolerance,
    ));
    report.notes.push(format!(
        "constraint drift over the run: {:e}",
        out.max_constraint_drift()
    ));

    // One CSV per saved snapshot plus a diagnostics series.
    for (idx, snap) in out.snapshots.iter().enumerate() {
        let mut csv = String::from("x");
        for a in 1..=n {
            csv.push_str(&format!(",y{a}"));
        }
        csv.push('\n');
        for j in 0..out.xs.len() {
            csv.push_str(&format!("{}", out.xs[j]));
            for a in 0..n {
                csv.push_str(&format!(",{}", snap.y[a][j]));
            }
            csv.push('\n');
        }
        fs::write(out_dir.join(format!("snapshot_{idx:04}.csv")), csv)
            .map_err(|e| config_err(format!("cannot write snapshot: {e}")))?;
    }
    let mut diag = String::from("t,energy,constraint\n");
    for (i, snap) in out.snapshots.iter().enumerate() {
        diag.push_str(&format!(
            "{},{},{}\n",
            snap.t, out.energy[i], out.constraint_drift[i]
        ));
    }
    fs::write(out_dir.join("diagnostics.csv"), diag)
        .map_err(|e| config_err(format!("cannot write diagnostics: {e}")))?;
    Ok(())
}

pub fn run_legendre(cfg: &RunConfig, opts: &RunOptions, report: &mut Report) -> RunResult<()> {
    match cfg.system.kind.as_str() {
        "lagrangian" => {
            let n = cfg.system.n.ok_or_else(|| config_err("system.n is required"))?;
            let l = cfg
                .system
                .lagrangian
                .as_ref()
                .ok_or_else(|| config_err("system.L is required"))?;
            let sys = LagrangianSystem::new(n, l)?;
            let s = sampling(cfg, opts, 2 * n)?;
            let mut acc = hjtk_core::report::ResidualAccumulator::new("legendre_round_trip", s.tolerance);
            let mut worst_cond: f64 = 0.0;
            for qv in &s.base_samples {
                let run = (|| -> CoreResult<f64> {
                    worst_cond = worst_cond.max(sys.regularity(qv)?);
                    let qp = legendre(&sys, qv)?;
                    let back = legendre_inverse(&sys, &qp, None)?;
                    let mut err: f64 = 0.0;
                    for i in 0..n {
                        err = err.max((back[n + i] - qv[n + i]).abs());
                    }
                    Ok(err)
                })();
                match run {
                    Ok(e) => acc.add(qv, e),
                    Err(CoreError::DomainViolation { .. })
                    | Err(CoreError::SingularLegendre { .. })
                    | Err(CoreError::NewtonDivergence { .. }) => acc.skip(qv),
                    Err(e) => return Err(e.into()),
                }
            }
            report.push_residual(&acc.finish());
            report
                .notes
                .push(format!("worst fiber-Hessian condition number: {worst_cond:e}"));
        }
        "field" => {
            let m = cfg.system.m.ok_or_else(|| config_err("system.m is required"))?;
            let n = cfg.system.n.ok_or_else(|| config_err("system.n is required"))?;
            let l = cfg
                .system
                .lagrangian
                .as_ref()
                .ok_or_else(|| config_err("system.L is required"))?;
            let theory = FieldTheory::from_lagrangian(m, n, l)?;
            let dim = velocity_vars(m, n).len();
            let s = sampling(cfg, opts, dim)?;
            let mut acc = hjtk_core::report::ResidualAccumulator::new("legendre_round_trip", s.tolerance);
            for point in &s.base_samples {
                let run = (|| -> CoreResult<f64> {
                    let p = field_legendre(&theory, point)?;
                    let v = field_legendre_inverse(&theory, &point[..m + n], &p, None)?;
                    let mut err: f64 = 0.0;
                    for i in 0..m * n {
                        err = err.max((v[i] - point[m + n + i]).abs());
                    }
                    Ok(err)
                })();
                match run {
                    Ok(e) => acc.add(point, e),
                    Err(CoreError::DomainViolation { .. })
                    | Err(CoreError::SingularLegendre { .. })
                    | Err(CoreError::NewtonDivergence { .. }) => acc.skip(point),
                    Err(e) => return Err(e.into()),
                }
            }
            report.push_residual(&acc.finish());
        }
        other => {
            return Err(config_err(format!(
                "legendre supports lagrangian or field systems, got `{other}`"
            )))
        }
    }
    Ok(())
}

fn write_curve_csv(
    dir: &Path,
    name: &str,
    times: &[f64],
    states: &[Vec<f64>],
) -> RunResult<()> {
    let mut csv = String::from("t");
    let width = states.first().map_or(0, Vec::len);
    for i in 1..=width {
        csv.push_str(&format!(",x{i}"));
    }
    csv.push('\n');
    for (t, s) in times.iter().zip(states) {
        csv.push_str(&format!("{t}"));
        for v in s {
            csv.push_str(&format!(",{v}"));
        }
        csv.push('\n');
    }
    fs::write(dir.join(name), csv).map_err(|e| config_err(format!("cannot write {name}: {e}")))?;
    Ok(())
}
