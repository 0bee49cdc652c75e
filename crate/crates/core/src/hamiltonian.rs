//! Hamiltonian systems on the chart (q^1..q^n, p_1..p_n) and the residual
//! checks for their Hamilton-Jacobi structures: candidate 1-form sections,
//! invariance of their images under the canonical flow, reconstruction of
//! phase-space trajectories from base trajectories, and parameter families
//! acting as complete solutions with conserved quantities.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::dynamics::{
    flow_midpoint, flow_rk4, ChartMap, FlowResult, ParamFamily, VectorFieldSection,
    SINGULAR_DET_TOL,
};
use crate::error::{CoreError, Result};
use crate::expr::{names, Expr, ScalarField};
use crate::report::{max_abs, GridSpec, ResidualAccumulator, ResidualReport};
use crate::solve::newton_solve;

/// A Hamiltonian over exactly 2n coordinates: positions first, momenta after.
#[derive(Debug, Clone)]
pub struct HamiltonianSystem {
    n: usize,
    h: ScalarField,
}

/// Chart variable names `q1..qn, p1..pn`.
pub fn phase_vars(n: usize) -> Vec<String> {
    let mut v = names("q", n);
    v.extend(names("p", n));
    v
}

impl HamiltonianSystem {
    pub fn new(n: usize, h_text: &str) -> Result<HamiltonianSystem> {
        let h = ScalarField::compile(h_text, &phase_vars(n))?;
        Ok(HamiltonianSystem { n, h })
    }

    pub fn from_field(n: usize, h: ScalarField) -> Result<HamiltonianSystem> {
        if h.dim() != 2 * n {
            return Err(CoreError::Dimension(format!(
                "Hamiltonian over {} variables for n = {n}",
                h.dim()
            )));
        }
        Ok(HamiltonianSystem { n, h })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn hamiltonian(&self) -> &ScalarField {
        &self.h
    }

    pub fn energy(&self, state: &[f64]) -> Result<f64> {
        self.h.eval(state)
    }
}

/// A 1-form on the base chart, one component per position coordinate.
/// When built from a generating scalar the closedness check runs through
/// the (exactly symmetric) Hessian of the generator.
#[derive(Debug, Clone)]
pub struct OneFormSection {
    components: Vec<ScalarField>,
    generator: Option<ScalarField>,
}

impl OneFormSection {
    pub fn new(components: Vec<ScalarField>) -> Result<OneFormSection> {
        let first = components
            .first()
            .ok_or_else(|| CoreError::Dimension("1-form needs components".into()))?;
        let vars = first.vars().to_vec();
        if components.len() != vars.len() {
            return Err(CoreError::Dimension(format!(
                "{} components over a base of dimension {}",
                components.len(),
                vars.len()
            )));
        }
        for c in &components {
            if c.vars() != vars {
                return Err(CoreError::Dimension(
                    "1-form components use different charts".into(),
                ));
            }
        }
        Ok(OneFormSection {
            components,
            generator: None,
        })
    }

    pub fn compile(texts: &[String], n: usize) -> Result<OneFormSection> {
        let vars = names("q", n);
        let components = texts
            .iter()
            .map(|t| ScalarField::compile(t, &vars))
            .collect::<Result<Vec<_>>>()?;
        OneFormSection::new(components)
    }

    /// The exact differential of a generating scalar S over the base chart.
    pub fn from_generating(s: &ScalarField) -> OneFormSection {
        let components = (0..s.dim()).map(|i| s.diff(i)).collect();
        OneFormSection {
            components,
            generator: Some(s.clone()),
        }
    }

    pub fn n(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.components
    }

    pub fn generator(&self) -> Option<&ScalarField> {
        self.generator.as_ref()
    }

    pub fn eval(&self, q: &[f64]) -> Result<Vec<f64>> {
        self.components.iter().map(|c| c.eval(q)).collect()
    }

    /// `A[i][j] = d alpha_j / d q^i`.
    pub fn jacobian(&self, q: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.n();
        let mut a = DMatrix::zeros(n, n);
        for (j, c) in self.components.iter().enumerate() {
            let g = c.grad(q)?;
            for (i, v) in g.iter().enumerate() {
                a[(i, j)] = *v;
            }
        }
        Ok(a)
    }

    /// The section `q -> (q, alpha(q))` as a chart map into phase space.
    pub fn to_chart_map(&self) -> Result<ChartMap> {
        let base = self.components[0].vars().to_vec();
        let mut comps: Vec<ScalarField> = (0..self.n())
            .map(|i| ScalarField::from_expr(Expr::var(i), base.clone()))
            .collect();
        comps.extend(self.components.iter().cloned());
        ChartMap::new(comps)
    }

    /// Largest antisymmetry `|dA_ij - dA_ji|` of the component Jacobian at
    /// one point; identically zero for exact differentials.
    pub fn closedness_at(&self, q: &[f64]) -> Result<f64> {
        if let Some(s) = &self.generator {
            let h = s.hessian(q)?;
            let n = self.n();
            let mut worst: f64 = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    worst = worst.max((h[(i, j)] - h[(j, i)]).abs());
                }
            }
            return Ok(worst);
        }
        let a = self.jacobian(q)?;
        let n = self.n();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
            }
        }
        Ok(worst)
    }
}

/// The canonical field (dH/dp_i, -dH/dq^i), tagged for implicit midpoint.
pub fn hamiltonian_vector_field(sys: &HamiltonianSystem) -> VectorFieldSection {
    VectorFieldSection::canonical_from_hamiltonian(sys.h.clone(), sys.n)
        .expect("system dimensions are checked at construction")
}

/// The base vector field determined by a section: the momentum-gradient of
/// H evaluated along `(q, alpha(q))`.
pub fn associated_vector_field(
    sys: &HamiltonianSystem,
    alpha: &OneFormSection,
) -> Result<VectorFieldSection> {
    if alpha.n() != sys.n {
        return Err(CoreError::Dimension(format!(
            "1-form with {} components for n = {}",
            alpha.n(),
            sys.n
        )));
    }
    let n = sys.n;
    let h = sys.h.clone();
    let alpha = alpha.clone();
    let base_vars = alpha.components()[0].vars().to_vec();
    Ok(VectorFieldSection::from_fn(
        base_vars,
        "associated",
        Arc::new(move |q: &[f64]| {
            let mut state = q.to_vec();
            state.extend(alpha.eval(q)?);
            let g = h.grad(&state)?;
            Ok(g[n..].to_vec())
        }),
    ))
}

/// Gradient of `H` composed with the section, by the chain rule through the
/// section Jacobian: `d_i (H o alpha) = H_q_i + sum_j H_p_j dA[i][j]`.
fn grad_h_along(sys: &HamiltonianSystem, alpha: &OneFormSection, q: &[f64]) -> Result<Vec<f64>> {
    let n = sys.n;
    let mut state = q.to_vec();
    state.extend(alpha.eval(q)?);
    let gh = sys.h.grad(&state)?;
    let a = alpha.jacobian(q)?;
    let mut out = vec![0.0; n];
    for i in 0..n {
        let mut acc = gh[i];
        for j in 0..n {
            acc += gh[n + j] * a[(i, j)];
        }
        out[i] = acc;
    }
    Ok(out)
}

/// Residual of the generalized problem: `i(X) d alpha + d(alpha* H)`,
/// componentwise `r_j = sum_i X^i (dA_ij - dA_ji) + d_j(H o alpha)`.
/// `x_field` defaults to the associated field when absent.
pub fn generalized_hj_residual(
    sys: &HamiltonianSystem,
    alpha: &OneFormSection,
    x_field: Option<&VectorFieldSection>,
    samples: &[Vec<f64>],
    tolerance: f64,
) -> Result<ResidualReport> {
    let associated;
    let x_field = match x_field {
        Some(x) => x,
        None => {
            associated = associated_vector_field(sys, alpha)?;
            &associated
        }
    };
    let n = sys.n;
    let mut acc = ResidualAccumulator::new("generalized_hj_residual", tolerance);
    for q in samples {
        let result = (|| -> Result<f64> {
            let a = alpha.jacobian(q)?;
            let x = x_field.eval(q)?;
            let dh = grad_h_along(sys, alpha, q)?;
            let mut worst: f64 = 0.0;
            for j in 0..n {
                let mut r = dh[j];
                for i in 0..n {
                    r += x[i] * (a[(i, j)] - a[(j, i)]);
                }
                worst = worst.max(r.abs());
            }
            Ok(worst)
        })();
        match result {
            Ok(r) => acc.add(q, r),
            Err(CoreError::DomainViolation { .. }) | Err(CoreError::NonFinite { .. }) => {
                acc.skip(q)
            }
            Err(e) => return Err(e),
        }
    }
    Ok(acc.finish())
}

/// The two defects of the standard problem: closedness of the candidate
/// form and flatness of `H` along its image.
#[derive(Debug, Clone, serde::Serialize)]
pub struct StandardHjReport {
    pub closedness: ResidualReport,
    pub dh: ResidualReport,
}

impl StandardHjReport {
    pub fn passed(&self) -> bool {
        self.closedness.passed() && self.dh.passed()
    }
}

pub fn standard_hj_residual(
    sys: &HamiltonianSystem,
    alpha: &OneFormSection,
    samples: &[Vec<f64>],
    tolerance: f64,
) -> Result<StandardHjReport> {
    let mut closed = ResidualAccumulator::new("closedness_defect", tolerance);
    let mut dh = ResidualAccumulator::new("dh_defect", tolerance);
    for q in samples {
        match alpha.closedness_at(q) {
            Ok(c) => closed.add(q, c),
            Err(CoreError::DomainViolation { .. }) | Err(CoreError::NonFinite { .. }) => {
                closed.skip(q)
            }
            Err(e) => return Err(e),
        }
        match grad_h_along(sys, alpha, q) {
            Ok(g) => dh.add(q, max_abs(&g)),
            Err(CoreError::DomainViolation { .. }) | Err(CoreError::NonFinite { .. }) => {
                dh.skip(q)
            }
            Err(e) => return Err(e),
        }
    }
    Ok(StandardHjReport {
        closedness: closed.finish(),
        dh: dh.finish(),
    })
}

/// Integrate the canonical flow from starts on the section image and
/// measure how far the momenta wander off the section.
pub fn invariance_defect(
    sys: &HamiltonianSystem,
    alpha: &OneFormSection,
    starts: &[Vec<f64>],
    t_end: f64,
    dt: f64,
    tolerance: f64,
) -> Result<ResidualReport> {
    let z = hamiltonian_vector_field(sys);
    let n = sys.n;
    let mut acc = ResidualAccumulator::new("invariance_defect", tolerance);
    for q0 in starts {
        let run = (|| -> Result<f64> {
            let mut state = q0.clone();
            state.extend(alpha.eval(q0)?);
            let flow = flow_rk4(&z, &state, t_end, dt)?;
            let mut worst: f64 = 0.0;
            for s in &flow.states {
                let on_section = alpha.eval(&s[..n])?;
                for j in 0..n {
                    worst = worst.max((s[n + j] - on_section[j]).abs());
                }
            }
            Ok(worst)
        })();
        match run {
            Ok(d) => acc.add(q0, d),
            Err(CoreError::DomainViolation { .. })
            | Err(CoreError::FlowFailure { .. })
            | Err(CoreError::NonFinite { .. }) => acc.skip(q0),
            Err(e) => return Err(e),
        }
    }
    Ok(acc.finish())
}

/// Outcome of reconstructing the phase-space trajectory from the base one.
#[derive(Debug)]
pub struct ReconstructResult {
    pub base_curve: FlowResult,
    pub lifted_curve: Vec<Vec<f64>>,
    pub direct_curve: FlowResult,
    pub max_gap: f64,
    /// False when a domain violation ended the comparison early.
    pub complete: bool,
}

/// Flow the associated field on the base, lift through the section, and
/// compare with the direct canonical flow started at `(q0, alpha(q0))`.
pub fn reconstruct(
    sys: &HamiltonianSystem,
    alpha: &OneFormSection,
    q0: &[f64],
    t_end: f64,
    dt: f64,
) -> Result<ReconstructResult> {
    let x = associated_vector_field(sys, alpha)?;
    let z = hamiltonian_vector_field(sys);
    let mut start = q0.to_vec();
    start.extend(alpha.eval(q0)?);

    let (base_curve, base_err) = run_capped(&x, q0, t_end, dt)?;
    let (direct_curve, direct_err) = run_capped(&z, &start, t_end, dt)?;
    let complete = base_err.is_none() && direct_err.is_none();

    let mut lifted = Vec::new();
    let mut max_gap: f64 = 0.0;
    let n = sys.n;
    let common = base_curve.states.len().min(direct_curve.states.len());
    for k in 0..common {
        let q = &base_curve.states[k];
        let lift = match alpha.eval(q) {
            Ok(p) => {
                let mut s = q.clone();
                s.extend(p);
                s
            }
            Err(CoreError::DomainViolation { .. }) => break,
            Err(e) => return Err(e),
        };
        let direct = &direct_curve.states[k];
        for j in 0..2 * n {
            max_gap = max_gap.max((lift[j] - direct[j]).abs());
        }
        lifted.push(lift);
    }
    Ok(ReconstructResult {
        base_curve,
        lifted_curve: lifted,
        direct_curve,
        max_gap,
        complete,
    })
}

/// RK4 flow that keeps the partial trajectory when a sample fails.
fn run_capped(
    z: &VectorFieldSection,
    x0: &[f64],
    t_end: f64,
    dt: f64,
) -> Result<(FlowResult, Option<CoreError>)> {
    match flow_rk4(z, x0, t_end, dt) {
        Ok(f) => Ok((f, None)),
        Err(e @ CoreError::FlowFailure { .. }) | Err(e @ CoreError::NonFinite { .. }) => {
            // Rerun up to the failure time; the prefix is still useful.
            let t_fail = match &e {
                CoreError::FlowFailure { t, .. } => *t,
                CoreError::NonFinite { t } => *t,
                _ => unreachable!(),
            };
            let safe = (t_fail - dt).max(0.0);
            let f = flow_rk4(z, x0, safe, dt)?;
            Ok((f, Some(e)))
        }
        Err(e) => Err(e),
    }
}

/// Report for an n-parameter family of candidate solutions.
#[derive(Debug, serde::Serialize)]
pub struct CompleteSolutionReport {
    pub standard: StandardHjReport,
    pub min_abs_det: f64,
    pub argmin_node: Option<Vec<f64>>,
    pub n_singular: usize,
    pub constants_drift: ResidualReport,
    pub n_inversion_failures: usize,
    pub note: String,
}

impl CompleteSolutionReport {
    pub fn passed(&self) -> bool {
        self.standard.passed() && self.n_singular == 0 && self.constants_drift.passed()
    }
}

/// Check a family `alpha_lambda` as a complete solution: per-parameter
/// standard residuals, nonsingularity of `(q, lambda) -> (q, alpha)`, and
/// conservation of the parameters recovered by Newton inversion along
/// canonical flows of length `t_end`.
pub fn complete_solution_check(
    sys: &HamiltonianSystem,
    fam: &ParamFamily,
    base_grid: &GridSpec,
    param_grid: &GridSpec,
    tolerance: f64,
    t_end: f64,
    dt: f64,
) -> Result<CompleteSolutionReport> {
    let n = sys.n;
    if fam.base_dim() != n || fam.fiber_dim() != n || fam.n_params() != n {
        return Err(CoreError::Dimension(format!(
            "family must have {n} base coordinates, {n} components and {n} parameters"
        )));
    }
    let base_nodes = base_grid.nodes();
    let param_nodes = param_grid.nodes();

    let mut closed = ResidualAccumulator::new("closedness_defect", tolerance);
    let mut dh = ResidualAccumulator::new("dh_defect", tolerance);
    let mut min_abs_det = f64::INFINITY;
    let mut argmin = None;
    let mut n_singular = 0;
    let mut drift = ResidualAccumulator::new("constants_drift", tolerance);
    let mut n_inversion_failures = 0;
    let z = hamiltonian_vector_field(sys);

    for lambda in &param_nodes {
        let alpha = OneFormSection::new(fam.fiber_at(lambda))?;
        for q in &base_nodes {
            let mut node = q.clone();
            node.extend_from_slice(lambda);

            match alpha.closedness_at(q) {
                Ok(c) => closed.add(&node, c),
                Err(CoreError::DomainViolation { .. }) => closed.skip(&node),
                Err(e) => return Err(e),
            }
            match grad_h_along(sys, &alpha, q) {
                Ok(g) => dh.add(&node, max_abs(&g)),
                Err(CoreError::DomainViolation { .. }) => dh.skip(&node),
                Err(e) => return Err(e),
            }
            match fam.joint_jacobian_det(&node) {
                Ok(det) => {
                    if det.abs() < min_abs_det {
                        min_abs_det = det.abs();
                        argmin = Some(node.clone());
                    }
                    if det.abs() < SINGULAR_DET_TOL {
                        n_singular += 1;
                    }
                }
                Err(CoreError::DomainViolation { .. }) => {}
                Err(e) => return Err(e),
            }

            // Constants of motion: flow from the leaf and re-solve lambda.
            match constants_drift_along_flow(sys, fam, &z, q, lambda, t_end, dt) {
                Ok((d, failures)) => {
                    n_inversion_failures += failures;
                    drift.add(&node, d);
                }
                Err(CoreError::DomainViolation { .. })
                | Err(CoreError::FlowFailure { .. })
                | Err(CoreError::NonFinite { .. })
                | Err(CoreError::NewtonDivergence { .. })
                | Err(CoreError::SingularFamily { .. }) => drift.skip(&node),
                Err(e) => return Err(e),
            }
        }
    }

    Ok(CompleteSolutionReport {
        standard: StandardHjReport {
            closedness: closed.finish(),
            dh: dh.finish(),
        },
        min_abs_det: if min_abs_det.is_finite() {
            min_abs_det
        } else {
            0.0
        },
        argmin_node: argmin,
        n_singular,
        constants_drift: drift.finish(),
        n_inversion_failures,
        note: "surjectivity of the joint map is not checked; the Jacobian determinant grid \
               provides local-diffeomorphism evidence only"
            .to_string(),
    })
}

/// Invert `lambda -> alpha(q, lambda) = p` at a phase-space point, warm
/// started from `lambda0`. Fails with `SingularFamily` where the
/// parameter Jacobian degenerates.
pub fn invert_parameters(
    fam: &ParamFamily,
    q: &[f64],
    p: &[f64],
    lambda0: &[f64],
) -> Result<Vec<f64>> {
    let nb = fam.base_dim();
    newton_solve(
        |lambda: &[f64]| {
            let mut point = q.to_vec();
            point.extend_from_slice(lambda);
            let mut r = DVector::zeros(p.len());
            let mut j = DMatrix::zeros(p.len(), lambda.len());
            for (i, c) in fam.components().iter().enumerate() {
                let (v, g) = c.value_and_grad(&point)?;
                r[i] = v - p[i];
                for k in 0..lambda.len() {
                    j[(i, k)] = g[nb + k];
                }
            }
            let det = j.clone().lu().determinant();
            if det.abs() < SINGULAR_DET_TOL {
                return Err(CoreError::SingularFamily { node: point, det });
            }
            Ok((r, j))
        },
        lambda0,
    )
}

fn constants_drift_along_flow(
    sys: &HamiltonianSystem,
    fam: &ParamFamily,
    z: &VectorFieldSection,
    q: &[f64],
    lambda: &[f64],
    t_end: f64,
    dt: f64,
) -> Result<(f64, usize)> {
    let n = sys.n;
    let alpha = fam.fiber_at(lambda);
    let mut state = q.to_vec();
    for c in &alpha {
        state.push(c.eval(q)?);
    }
    let flow = flow_midpoint(z, &state, t_end, dt)?;
    // Subsample the trajectory so long flows stay cheap.
    let stride = (flow.states.len() / 50).max(1);
    let mut worst: f64 = 0.0;
    let mut failures = 0usize;
    let mut guess = lambda.to_vec();
    for s in flow.states.iter().step_by(stride) {
        match invert_parameters(fam, &s[..n], &s[n..], &guess) {
            Ok(l) => {
                for k in 0..n {
                    worst = worst.max((l[k] - lambda[k]).abs());
                }
                guess = l;
            }
            Err(CoreError::NewtonDivergence { .. })
            | Err(CoreError::DomainViolation { .. })
            | Err(CoreError::SingularFamily { .. }) => {
                failures += 1;
            }
            Err(e) => return Err(e),
        }
    }
    Ok((worst, failures))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::GridAxis;
    use crate::rng::SplitMix64;

    #[test]
    fn canonical_field_free_particle() {
        let sys = HamiltonianSystem::new(1, "p1^2/2").unwrap();
        let z = hamiltonian_vector_field(&sys);
        assert_eq!(z.eval(&[0.3, 1.7]).unwrap(), vec![1.7, 0.0]);
        assert!(z.is_canonical());
    }

    #[test]
    fn canonical_field_oscillator() {
        let sys = HamiltonianSystem::new(1, "(p1^2 + q1^2)/2").unwrap();
        let z = hamiltonian_vector_field(&sys);
        assert_eq!(z.eval(&[0.5, -0.25]).unwrap(), vec![-0.25, -0.5]);
    }

    #[test]
    fn canonical_field_coupled_two_dof() {
        // H = p1 p2 + q1^2 has Z = (p2, p1, -2 q1, 0).
        let sys = HamiltonianSystem::new(2, "p1*p2 + q1^2").unwrap();
        let z = hamiltonian_vector_field(&sys);
        let mut rng = SplitMix64::new(3);
        for _ in 0..10 {
            let s: Vec<f64> = (0..4).map(|_| rng.in_range(-2.0, 2.0)).collect();
            let v = z.eval(&s).unwrap();
            let expect = [s[3], s[2], -2.0 * s[0], 0.0];
            for (a, b) in v.iter().zip(expect.iter()) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn associated_field_constant_section() {
        let sys = HamiltonianSystem::new(1, "p1^2/2").unwrap();
        let alpha = OneFormSection::compile(&["0.8".into()], 1).unwrap();
        let x = associated_vector_field(&sys, &alpha).unwrap();
        assert!((x.eval(&[2.0]).unwrap()[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn associated_field_oscillator_section() {
        let sys = HamiltonianSystem::new(1, "(p1^2 + q1^2)/2").unwrap();
        let alpha = OneFormSection::compile(&["sqrt(2*1.5 - q1^2)".into()], 1).unwrap();
        let x = associated_vector_field(&sys, &alpha).unwrap();
        let q: f64 = 0.4;
        let expect = (2.0 * 1.5 - q * q).sqrt();
        assert!((x.eval(&[q]).unwrap()[0] - expect).abs() < 1e-14);
    }

    #[test]
    fn associated_field_from_generating_scalar() {
        // H = p1^2/2 + p2^2/2 + q1 q2 with S = q1 q2: X = (q2, q1).
        let sys = HamiltonianSystem::new(2, "p1^2/2 + p2^2/2 + q1*q2").unwrap();
        let s = ScalarField::compile("q1*q2", &names("q", 2)).unwrap();
        let alpha = OneFormSection::from_generating(&s);
        let x = associated_vector_field(&sys, &alpha).unwrap();
        let v = x.eval(&[0.3, -1.2]).unwrap();
        assert!((v[0] + 1.2).abs() < 1e-14);
        assert!((v[1] - 0.3).abs() < 1e-14);
    }

    fn line_samples(lo: f64, hi: f64, count: usize) -> Vec<Vec<f64>> {
        (0..count)
            .map(|i| vec![lo + (hi - lo) * i as f64 / (count - 1) as f64])
            .collect()
    }

    #[test]
    fn generalized_residual_zero_on_solutions() {
        let sys = HamiltonianSystem::new(1, "p1^2/2").unwrap();
        let alpha = OneFormSection::compile(&["1.3".into()], 1).unwrap();
        let rep =
            generalized_hj_residual(&sys, &alpha, None, &line_samples(-1.0, 1.0, 25), 1e-9)
                .unwrap();
        assert!(rep.max_norm <= 1e-12);
    }

    #[test]
    fn generalized_residual_quartic_growth() {
        // alpha = q^2 for H = p^2/2: d alpha = 0 in one dof, so the
        // residual is d/dq (q^4/2) = 2 q^3, peaking at 2 on [0, 1].
        let sys = HamiltonianSystem::new(1, "p1^2/2").unwrap();
        let alpha = OneFormSection::compile(&["q1^2".into()], 1).unwrap();
        let rep = generalized_hj_residual(&sys, &alpha, None, &line_samples(0.0, 1.0, 21), 1e-9)
            .unwrap();
        assert!((rep.max_norm - 2.0).abs() <= 1e-9, "max {}", rep.max_norm);
    }

    /// Independent oracle: curl and gradient by central differences on the
    /// raw component evaluators.
    fn generalized_residual_fd(
        sys: &HamiltonianSystem,
        alpha: &OneFormSection,
        x: &[f64],
        q: &[f64],
    ) -> f64 {
        let n = sys.n();
        let h = 1e-6;
        let comp = |j: usize, q: &[f64]| alpha.components()[j].eval(q).unwrap();
        let da = |i: usize, j: usize| {
            let mut qp = q.to_vec();
            let mut qm = q.to_vec();
            qp[i] += h;
            qm[i] -= h;
            (comp(j, &qp) - comp(j, &qm)) / (2.0 * h)
        };
        let h_along = |q: &[f64]| {
            let mut s = q.to_vec();
            s.extend(alpha.eval(q).unwrap());
            sys.hamiltonian().eval(&s).unwrap()
        };
        let mut worst: f64 = 0.0;
        for j in 0..n {
            let mut r = {
                let mut qp = q.to_vec();
                let mut qm = q.to_vec();
                qp[j] += h;
                qm[j] -= h;
                (h_along(&qp) - h_along(&qm)) / (2.0 * h)
            };
            for (i, xi) in x.iter().enumerate().take(n) {
                r += xi * (da(i, j) - da(j, i));
            }
            worst = worst.max(r.abs());
        }
        worst
    }

    #[test]
    fn generalized_residual_two_dof_against_fd_oracle() {
        // H = p1 with alpha = (q2^2, 0): a genuine solution (independent
        // of q1), residual vanishes and matches the finite-difference
        // assembly of the same expression.
        let sys = HamiltonianSystem::new(2, "p1").unwrap();
        let alpha = OneFormSection::compile(&["q2^2".into(), "0".into()], 2).unwrap();
        let samples = vec![vec![0.3, 0.8], vec![-1.0, 0.5], vec![0.0, -0.7]];
        let rep = generalized_hj_residual(&sys, &alpha, None, &samples, 1e-9).unwrap();
        assert!(rep.max_norm <= 1e-12, "max {}", rep.max_norm);
        for q in &samples {
            let oracle = generalized_residual_fd(&sys, &alpha, &[1.0, 0.0], q);
            assert!(oracle.abs() < 1e-6);
        }

        // alpha = (q1^2, 0) is not a solution: residual 2 q1, and the
        // implementation agrees with the oracle to FD accuracy.
        let alpha = OneFormSection::compile(&["q1^2".into(), "0".into()], 2).unwrap();
        for q in &samples {
            let rep = generalized_hj_residual(&sys, &alpha, None, std::slice::from_ref(q), 1e-9).unwrap();
            let oracle = generalized_residual_fd(&sys, &alpha, &[1.0, 0.0], q);
            assert!((rep.max_norm - oracle).abs() < 1e-6);
            assert!((rep.max_norm - 2.0 * q[0].abs()).abs() < 1e-9);
        }
    }

    #[test]
    fn standard_residual_oscillator_energy_section() {
        let sys = HamiltonianSystem::new(1, "(p1^2 + q1^2)/2").unwrap();
        let alpha = OneFormSection::compile(&["sqrt(2*1 - q1^2)".into()], 1).unwrap();
        let rep =
            standard_hj_residual(&sys, &alpha, &line_samples(-0.9, 0.9, 37), 1e-9).unwrap();
        assert!(rep.closedness.max_norm <= 1e-12);
        assert!(rep.dh.max_norm <= 1e-9, "dh {}", rep.dh.max_norm);
        assert!(rep.passed());
    }

    #[test]
    fn standard_residual_two_dof_swap_section() {
        // alpha = (q2, q1) is closed; H = p1 p2 gives H o alpha = q1 q2.
        let sys = HamiltonianSystem::new(2, "p1*p2").unwrap();
        let alpha = OneFormSection::compile(&["q2".into(), "q1".into()], 2).unwrap();
        let samples = vec![vec![0.5, 0.25], vec![1.0, -1.0], vec![0.0, 0.0]];
        let rep = standard_hj_residual(&sys, &alpha, &samples, 1e-9).unwrap();
        assert!(rep.closedness.max_norm <= 1e-15);
        // max over samples of max(|q2|, |q1|) = 1.
        assert!((rep.dh.max_norm - 1.0).abs() < 1e-12);
        assert!(!rep.passed());
    }

    #[test]
    fn standard_residual_momentum_free_hamiltonian() {
        // H = q1^2 ignores every alpha: dH defect is max |2q| = 2 on [-1, 1].
        let sys = HamiltonianSystem::new(1, "q1^2").unwrap();
        let s = ScalarField::compile("sin(q1)", &names("q", 1)).unwrap();
        let alpha = OneFormSection::from_generating(&s);
        let rep =
            standard_hj_residual(&sys, &alpha, &line_samples(-1.0, 1.0, 41), 1e-9).unwrap();
        assert_eq!(rep.closedness.max_norm, 0.0);
        assert!((rep.dh.max_norm - 2.0).abs() < 1e-12);
    }

    #[test]
    fn invariance_free_particle_exact() {
        let sys = HamiltonianSystem::new(1, "p1^2/2").unwrap();
        let alpha = OneFormSection::compile(&["0.7".into()], 1).unwrap();
        let rep = invariance_defect(&sys, &alpha, &line_samples(-1.0, 1.0, 5), 1.0, 1e-2, 1e-6)
            .unwrap();
        assert!(rep.max_norm <= 1e-12);
    }

    #[test]
    fn invariance_oscillator_energy_section() {
        let sys = HamiltonianSystem::new(1, "(p1^2 + q1^2)/2").unwrap();
        let alpha = OneFormSection::compile(&["sqrt(2*1 - q1^2)".into()], 1).unwrap();
        let rep =
            invariance_defect(&sys, &alpha, &[vec![0.5]], 1.0, 1e-3, 1e-6).unwrap();
        assert_eq!(rep.n_skipped, 0);
        assert!(rep.max_norm <= 1e-6, "defect {}", rep.max_norm);
    }

    #[test]
    fn invariance_detects_non_solution() {
        // alpha = 1 for the oscillator from q0 = 0: p(t) = cos t while the
        // section stays at 1, so the defect reaches 1 - cos(1) = 0.4597.
        let sys = HamiltonianSystem::new(1, "(p1^2 + q1^2)/2").unwrap();
        let alpha = OneFormSection::compile(&["1".into()], 1).unwrap();
        let rep = invariance_defect(&sys, &alpha, &[vec![0.0]], 1.0, 1e-3, 1e-6).unwrap();
        assert!(rep.max_norm >= 0.4, "defect {}", rep.max_norm);
        assert!((rep.max_norm - (1.0 - 1.0f64.cos())).abs() < 1e-6);
    }

    #[test]
    fn reconstruct_free_particle() {
        let sys = HamiltonianSystem::new(1, "p1^2/2").unwrap();
        let alpha = OneFormSection::compile(&["1".into()], 1).unwrap();
        let rec = reconstruct(&sys, &alpha, &[0.0], 2.0, 1e-3).unwrap();
        assert!(rec.complete);
        assert!(rec.max_gap <= 1e-10, "gap {}", rec.max_gap);
    }

    #[test]
    fn reconstruct_oscillator() {
        let sys = HamiltonianSystem::new(1, "(p1^2 + q1^2)/2").unwrap();
        let alpha = OneFormSection::compile(&["sqrt(2*1 - q1^2)".into()], 1).unwrap();
        let rec = reconstruct(&sys, &alpha, &[0.3], 0.8, 1e-3).unwrap();
        assert!(rec.max_gap <= 1e-6, "gap {}", rec.max_gap);
    }

    #[test]
    fn reconstruct_uniform_gravity_matches_parabola() {
        // H = p^2/2 + q with alpha = sqrt(2 (2 - q)): the base curve is the
        // parabola q(t) = 2t - t^2/2.
        let sys = HamiltonianSystem::new(1, "p1^2/2 + q1").unwrap();
        let alpha = OneFormSection::compile(&["sqrt(2*(2 - q1))".into()], 1).unwrap();
        let rec = reconstruct(&sys, &alpha, &[0.0], 0.5, 1e-3).unwrap();
        assert!(rec.max_gap <= 1e-6, "gap {}", rec.max_gap);
        for (t, s) in rec.base_curve.times.iter().zip(&rec.base_curve.states) {
            let exact = 2.0 * t - t * t / 2.0;
            assert!((s[0] - exact).abs() <= 1e-6);
        }
    }

    fn grid1(min: f64, max: f64, count: usize) -> GridSpec {
        GridSpec::new(vec![GridAxis { min, max, count }])
    }

    #[test]
    fn complete_solution_free_particle_momentum_conserved() {
        let sys = HamiltonianSystem::new(1, "p1^2/2").unwrap();
        let fam_vars = vec!["q1".to_string(), "l1".to_string()];
        let fam = ParamFamily::new(
            names("q", 1),
            vec!["l1".to_string()],
            vec![ScalarField::compile("l1", &fam_vars).unwrap()],
        )
        .unwrap();
        let rep = complete_solution_check(
            &sys,
            &fam,
            &grid1(-1.0, 1.0, 5),
            &grid1(0.5, 1.5, 3),
            1e-8,
            10.0,
            0.05,
        )
        .unwrap();
        assert!(rep.passed());
        assert!(rep.constants_drift.max_norm <= 1e-12);
        assert!((rep.min_abs_det - 1.0).abs() < 1e-14);
    }

    #[test]
    fn complete_solution_oscillator_energy_conserved() {
        let sys = HamiltonianSystem::new(1, "(p1^2 + q1^2)/2").unwrap();
        let fam_vars = vec!["q1".to_string(), "l1".to_string()];
        let fam = ParamFamily::new(
            names("q", 1),
            vec!["l1".to_string()],
            vec![ScalarField::compile("sqrt(2*l1 - q1^2)", &fam_vars).unwrap()],
        )
        .unwrap();
        let rep = complete_solution_check(
            &sys,
            &fam,
            &grid1(-0.6, 0.6, 5),
            &grid1(1.0, 2.0, 3),
            1e-8,
            10.0,
            0.05,
        )
        .unwrap();
        // Inversions fail while the momentum is on the negative branch;
        // wherever the parameter is recoverable it must match.
        assert!(
            rep.constants_drift.max_norm <= 1e-7,
            "drift {}",
            rep.constants_drift.max_norm
        );
        assert!(rep.standard.passed());
        assert_eq!(rep.n_singular, 0);
    }

    #[test]
    fn complete_solution_gravity_energy_conserved() {
        let sys = HamiltonianSystem::new(1, "p1^2/2 + q1").unwrap();
        let fam_vars = vec!["q1".to_string(), "l1".to_string()];
        let fam = ParamFamily::new(
            names("q", 1),
            vec!["l1".to_string()],
            vec![ScalarField::compile("sqrt(2*(l1 - q1))", &fam_vars).unwrap()],
        )
        .unwrap();
        let rep = complete_solution_check(
            &sys,
            &fam,
            &grid1(-0.5, 0.0, 4),
            &grid1(1.0, 2.0, 3),
            1e-8,
            1.0,
            0.01,
        )
        .unwrap();
        assert!(rep.passed(), "drift {}", rep.constants_drift.max_norm);
        assert!(rep.constants_drift.max_norm <= 1e-7);
    }

    #[test]
    fn inversion_rejects_singular_family() {
        // The collapsed family alpha_lambda = 0 has a rank-zero parameter
        // Jacobian everywhere.
        let fam_vars = vec!["q1".to_string(), "l1".to_string()];
        let fam = ParamFamily::new(
            names("q", 1),
            vec!["l1".to_string()],
            vec![ScalarField::compile("0*l1", &fam_vars).unwrap()],
        )
        .unwrap();
        let err = invert_parameters(&fam, &[0.3], &[0.0], &[1.0]).unwrap_err();
        assert!(matches!(err, CoreError::SingularFamily { .. }));
    }

    #[test]
    fn systems_are_shareable_across_threads() {
        fn assert_send_sync<T: Send + Sync>() {}
        assert_send_sync::<ScalarField>();
        assert_send_sync::<VectorFieldSection>();
        assert_send_sync::<HamiltonianSystem>();
        assert_send_sync::<OneFormSection>();
        assert_send_sync::<ParamFamily>();

        let sys = std::sync::Arc::new(HamiltonianSystem::new(1, "(p1^2 + q1^2)/2").unwrap());
        let handles: Vec<_> = (0..4)
            .map(|i| {
                let sys = sys.clone();
                std::thread::spawn(move || {
                    let z = hamiltonian_vector_field(&sys);
                    z.eval(&[0.1 * i as f64, 1.0]).unwrap()
                })
            })
            .collect();
        for (i, h) in handles.into_iter().enumerate() {
            let v = h.join().unwrap();
            assert!((v[0] - 1.0).abs() < 1e-15);
            assert!((v[1] + 0.1 * i as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn omega_pullback_matches_closedness() {
        // The pullback of dq ^ dp under q -> (q, alpha(q)) is the
        // antisymmetric part of the component Jacobian, so its max norm is
        // the closedness defect.
        let alpha = OneFormSection::compile(&["q1*q2".into(), "q1^2".into()], 2).unwrap();
        let q = [0.7, -0.4];
        let a = alpha.jacobian(&q).unwrap();
        let pullback = (a[(0, 1)] - a[(1, 0)]).abs();
        assert!((pullback - alpha.closedness_at(&q).unwrap()).abs() < 1e-15);
    }
}
