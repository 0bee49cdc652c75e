//! Generic dynamical systems on Euclidean charts: vector fields, flow
//! integration, and slicing checks relating a partial dynamics on a small
//! chart to the full dynamics upstairs.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{CoreError, Result};
use crate::expr::{Expr, ScalarField};
use crate::report::{max_abs, GridSpec, ResidualAccumulator, ResidualReport};

/// Newton stopping tolerance used by every implicit solve in the toolkit.
pub const NEWTON_TOL: f64 = 1e-12;
/// Newton iteration cap used by every implicit solve in the toolkit.
pub const NEWTON_MAX_ITER: usize = 50;

type FieldFn = dyn Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync;

enum Backend {
    /// One compiled expression per component.
    Explicit(Vec<ScalarField>),
    /// Hamiltonian field (dH/dp, -dH/dq) evaluated through autodiff of H.
    Canonical { h: ScalarField, n: usize },
    /// Pointwise evaluator for fields defined by solves or compositions.
    Custom { name: String, f: Arc<FieldFn> },
}

/// A vector field on a chart: as many components as coordinates.
pub struct VectorFieldSection {
    vars: Vec<String>,
    backend: Backend,
    canonical: bool,
}

impl fmt::Debug for VectorFieldSection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.backend {
            Backend::Explicit(_) => "explicit".to_string(),
            Backend::Canonical { .. } => "canonical".to_string(),
            Backend::Custom { name, .. } => format!("custom:{name}"),
        };
        f.debug_struct("VectorFieldSection")
            .field("vars", &self.vars)
            .field("backend", &kind)
            .field("canonical", &self.canonical)
            .finish()
    }
}

impl VectorFieldSection {
    /// Build from component expressions; all must share one variable list
    /// with exactly one component per coordinate.
    pub fn from_components(components: Vec<ScalarField>) -> Result<VectorFieldSection> {
        let vars = components
            .first()
            .ok_or_else(|| CoreError::Dimension("vector field needs components".into()))?
            .vars()
            .to_vec();
        if components.len() != vars.len() {
            return Err(CoreError::Dimension(format!(
                "{} components for a chart of dimension {}",
                components.len(),
                vars.len()
            )));
        }
        for c in &components {
            if c.vars() != vars {
                return Err(CoreError::Dimension(
                    "vector field components use different charts".into(),
                ));
            }
        }
        Ok(VectorFieldSection {
            vars,
            backend: Backend::Explicit(components),
            canonical: false,
        })
    }

    /// The Hamiltonian field (dH/dp_i, -dH/dq^i) on the chart of `h`, which
    /// must list the n position coordinates before the n momenta.
    pub fn canonical_from_hamiltonian(h: ScalarField, n: usize) -> Result<VectorFieldSection> {
        if h.dim() != 2 * n {
            return Err(CoreError::Dimension(format!(
                "Hamiltonian over {} variables cannot define a canonical field with n = {n}",
                h.dim()
            )));
        }
        Ok(VectorFieldSection {
            vars: h.vars().to_vec(),
            backend: Backend::Canonical { h, n },
            canonical: true,
        })
    }

    /// Wrap a pointwise evaluator (fields obtained from per-point solves).
    pub fn from_fn(
        vars: Vec<String>,
        name: &str,
        f: Arc<FieldFn>,
    ) -> VectorFieldSection {
        VectorFieldSection {
            vars,
            backend: Backend::Custom {
                name: name.to_string(),
                f,
            },
            canonical: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.vars.len()
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    /// True for fields produced by the canonical Hamiltonian construction;
    /// the implicit midpoint integrator is reserved for these.
    pub fn is_canonical(&self) -> bool {
        self.canonical
    }

    /// Component expressions when the field is explicit.
    pub fn components(&self) -> Option<&[ScalarField]> {
        match &self.backend {
            Backend::Explicit(c) => Some(c),
            _ => None,
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        match &self.backend {
            Backend::Explicit(comps) => comps.iter().map(|c| c.eval(x)).collect(),
            Backend::Canonical { h, n } => {
                let g = h.grad(x)?;
                let mut z = Vec::with_capacity(2 * n);
                z.extend_from_slice(&g[*n..]);
                z.extend(g[..*n].iter().map(|v| -v));
                Ok(z)
            }
            Backend::Custom { f, .. } => f(x),
        }
    }

    /// Jacobian of the field. Available for explicit components (autodiff
    /// per component) and canonical fields (rearranged Hessian of H).
    pub fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        match &self.backend {
            Backend::Explicit(comps) => {
                let d = self.dim();
                let mut j = DMatrix::zeros(d, d);
                for (i, c) in comps.iter().enumerate() {
                    let g = c.grad(x)?;
                    for (k, v) in g.iter().enumerate() {
                        j[(i, k)] = *v;
                    }
                }
                Ok(j)
            }
            Backend::Canonical { h, n } => {
                let hess = h.hessian(x)?;
                let d = 2 * n;
                let mut j = DMatrix::zeros(d, d);
                for i in 0..*n {
                    for k in 0..d {
                        j[(i, k)] = hess[(n + i, k)];
                        j[(n + i, k)] = -hess[(i, k)];
                    }
                }
                Ok(j)
            }
            Backend::Custom { name, .. } => Err(CoreError::Unsupported(format!(
                "jacobian of pointwise field `{name}`"
            ))),
        }
    }
}

/// A map between charts, one compiled expression per output coordinate.
#[derive(Debug, Clone)]
pub struct ChartMap {
    components: Vec<ScalarField>,
}

impl ChartMap {
    pub fn new(components: Vec<ScalarField>) -> Result<ChartMap> {
        let first = components
            .first()
            .ok_or_else(|| CoreError::Dimension("chart map needs components".into()))?;
        let vars = first.vars().to_vec();
        for c in &components {
            if c.vars() != vars {
                return Err(CoreError::Dimension(
                    "chart map components use different charts".into(),
                ));
            }
        }
        Ok(ChartMap { components })
    }

    pub fn in_dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn out_dim(&self) -> usize {
        self.components.len()
    }

    pub fn in_vars(&self) -> &[String] {
        self.components[0].vars()
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.components
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.components.iter().map(|c| c.eval(x)).collect()
    }

    /// out_dim x in_dim matrix of component gradients.
    pub fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let mut j = DMatrix::zeros(self.out_dim(), self.in_dim());
        for (i, c) in self.components.iter().enumerate() {
            let g = c.grad(x)?;
            for (k, v) in g.iter().enumerate() {
                j[(i, k)] = *v;
            }
        }
        Ok(j)
    }
}

/// A sampled integral curve with per-step error estimates from step
/// doubling. `times` and `states` have equal length; `step_errors[k]`
/// estimates the error committed between samples `k` and `k+1`.
#[derive(Debug, Clone)]
pub struct FlowResult {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub step_errors: Vec<f64>,
}

impl FlowResult {
    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("flow has at least one sample")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("flow has at least one sample")
    }

    pub fn total_step_error(&self) -> f64 {
        self.step_errors.iter().sum()
    }
}

fn check_finite(x: &[f64], t: f64) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(CoreError::NonFinite { t })
    }
}

fn rk4_step(z: &VectorFieldSection, x: &[f64], h: f64) -> Result<Vec<f64>> {
    let k1 = z.eval(x)?;
    let mid1: Vec<f64> = x.iter().zip(&k1).map(|(a, k)| a + 0.5 * h * k).collect();
    let k2 = z.eval(&mid1)?;
    let mid2: Vec<f64> = x.iter().zip(&k2).map(|(a, k)| a + 0.5 * h * k).collect();
    let k3 = z.eval(&mid2)?;
    let end: Vec<f64> = x.iter().zip(&k3).map(|(a, k)| a + h * k).collect();
    let k4 = z.eval(&end)?;
    Ok(x.iter()
        .enumerate()
        .map(|(i, a)| a + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

/// Classical fixed-step 4th-order trajectory. Each recorded step advances
/// by two half steps; the discrepancy against a single full step gives the
/// step-doubling error estimate.
pub fn flow_rk4(z: &VectorFieldSection, x0: &[f64], t_end: f64, dt: f64) -> Result<FlowResult> {
    flow_fixed_step(z, x0, t_end, dt, &rk4_step, 4)
}

/// Implicit-midpoint trajectory for canonical fields; each step solves the
/// midpoint equation by Newton iteration at tolerance [`NEWTON_TOL`].
pub fn flow_midpoint(z: &VectorFieldSection, x0: &[f64], t_end: f64, dt: f64) -> Result<FlowResult> {
    if !z.is_canonical() {
        return Err(CoreError::Unsupported(
            "implicit midpoint integration requires a canonical field".into(),
        ));
    }
    flow_fixed_step(z, x0, t_end, dt, &midpoint_step, 2)
}

type StepFn = dyn Fn(&VectorFieldSection, &[f64], f64) -> Result<Vec<f64>>;

fn flow_fixed_step(
    z: &VectorFieldSection,
    x0: &[f64],
    t_end: f64,
    dt: f64,
    step: &StepFn,
    order: u32,
) -> Result<FlowResult> {
    // `!(dt > 0)` also rejects NaN steps.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(dt > 0.0) || !t_end.is_finite() || t_end < 0.0 {
        return Err(CoreError::Dimension(
            "flow requires dt > 0 and t_end >= 0".into(),
        ));
    }
    if x0.len() != z.dim() {
        return Err(CoreError::Dimension(format!(
            "initial state of length {} for a field of dimension {}",
            x0.len(),
            z.dim()
        )));
    }
    // Step boundaries are k*dt with the last step clamped onto t_end, so
    // trajectories that are affine in t stay exact in floating point.
    let ratio = t_end / dt;
    let n_steps = if (ratio - ratio.round()).abs() < 1e-9 {
        ratio.round() as usize
    } else {
        ratio.ceil() as usize
    }
    .max(if t_end > 0.0 { 1 } else { 0 });
    // The recorded trajectory is the plain fixed-step one; the two
    // half-steps only feed the Richardson error estimate.
    let est_factor = f64::from(2u32.pow(order)) / f64::from(2u32.pow(order) - 1);
    let mut times = vec![0.0];
    let mut states = vec![x0.to_vec()];
    let mut step_errors = Vec::new();
    let mut t = 0.0;
    let mut x = x0.to_vec();
    for k in 1..=n_steps {
        let t_next = if k == n_steps {
            t_end
        } else {
            k as f64 * dt
        };
        let h = t_next - t;
        let wrap = |e: CoreError| match e {
            e @ CoreError::NonFinite { .. } => e,
            e => CoreError::FlowFailure {
                t,
                source: Box::new(e),
            },
        };
        let full = step(z, &x, h).map_err(wrap)?;
        let half = step(z, &x, 0.5 * h).map_err(wrap)?;
        let fine = step(z, &half, 0.5 * h).map_err(wrap)?;
        let err = full
            .iter()
            .zip(&fine)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
            * est_factor;
        x = full;
        t = t_next;
        check_finite(&x, t)?;
        times.push(t);
        states.push(x.clone());
        step_errors.push(err);
    }
    Ok(FlowResult {
        times,
        states,
        step_errors,
    })
}

fn midpoint_step(z: &VectorFieldSection, x: &[f64], h: f64) -> Result<Vec<f64>> {
    let d = x.len();
    // Explicit Euler predictor.
    let fx = z.eval(x)?;
    let mut w: Vec<f64> = x.iter().zip(&fx).map(|(a, k)| a + h * k).collect();
    for iter in 0..=NEWTON_MAX_ITER {
        let mid: Vec<f64> = x.iter().zip(&w).map(|(a, b)| 0.5 * (a + b)).collect();
        let fm = z.eval(&mid)?;
        let residual: Vec<f64> = (0..d).map(|i| w[i] - x[i] - h * fm[i]).collect();
        let rnorm = max_abs(&residual);
        if rnorm <= NEWTON_TOL {
            return Ok(w);
        }
        if iter == NEWTON_MAX_ITER {
            return Err(CoreError::NewtonDivergence {
                step: iter,
                residual: rnorm,
            });
        }
        let jz = z.jacobian(&mid)?;
        let mut jac = DMatrix::identity(d, d);
        jac -= jz * (0.5 * h);
        let rhs = DVector::from_vec(residual);
        let delta = jac
            .lu()
            .solve(&rhs)
            .ok_or(CoreError::NewtonDivergence {
                step: iter,
                residual: rnorm,
            })?;
        for i in 0..d {
            w[i] -= delta[i];
        }
    }
    unreachable!("newton loop returns or errors");
}

/// Residual of the slicing equation at each sample x: the vector
/// `J_alpha(x) X(x) - Z(alpha(x))`. Samples that violate a domain guard are
/// skipped and counted.
pub fn slicing_residual(
    alpha: &ChartMap,
    x_field: &VectorFieldSection,
    z_field: &VectorFieldSection,
    samples: &[Vec<f64>],
    tolerance: f64,
) -> Result<ResidualReport> {
    if alpha.in_dim() != x_field.dim() || alpha.out_dim() != z_field.dim() {
        return Err(CoreError::Dimension(format!(
            "slicing dims: alpha {}->{}, X dim {}, Z dim {}",
            alpha.in_dim(),
            alpha.out_dim(),
            x_field.dim(),
            z_field.dim()
        )));
    }
    let mut acc = ResidualAccumulator::new("slicing_residual", tolerance);
    for s in samples {
        match slicing_residual_at(alpha, x_field, z_field, s) {
            Ok(r) => acc.add(s, max_abs(&r)),
            Err(CoreError::DomainViolation { .. }) | Err(CoreError::NonFinite { .. }) => {
                acc.skip(s)
            }
            Err(e) => return Err(e),
        }
    }
    Ok(acc.finish())
}

fn slicing_residual_at(
    alpha: &ChartMap,
    x_field: &VectorFieldSection,
    z_field: &VectorFieldSection,
    s: &[f64],
) -> Result<Vec<f64>> {
    let ja = alpha.jacobian(s)?;
    let xv = DVector::from_vec(x_field.eval(s)?);
    let up = alpha.eval(s)?;
    let zv = z_field.eval(&up)?;
    let push = ja * xv;
    Ok((0..zv.len()).map(|i| push[i] - zv[i]).collect())
}

/// A family of sections over a base chart, indexed by named parameters.
/// Component fields live over `base ++ params`; fixing the parameters gives
/// the fiber block of a section of the trivial bundle `base x fiber`.
#[derive(Debug, Clone)]
pub struct ParamFamily {
    base_vars: Vec<String>,
    param_names: Vec<String>,
    components: Vec<ScalarField>,
}

impl ParamFamily {
    pub fn new(
        base_vars: Vec<String>,
        param_names: Vec<String>,
        components: Vec<ScalarField>,
    ) -> Result<ParamFamily> {
        let mut all = base_vars.clone();
        all.extend(param_names.iter().cloned());
        for c in &components {
            if c.vars() != all {
                return Err(CoreError::Dimension(format!(
                    "family component over {:?}, expected {:?}",
                    c.vars(),
                    all
                )));
            }
        }
        if components.is_empty() {
            return Err(CoreError::Dimension("family needs components".into()));
        }
        Ok(ParamFamily {
            base_vars,
            param_names,
            components,
        })
    }

    pub fn base_dim(&self) -> usize {
        self.base_vars.len()
    }

    pub fn n_params(&self) -> usize {
        self.param_names.len()
    }

    pub fn fiber_dim(&self) -> usize {
        self.components.len()
    }

    pub fn base_vars(&self) -> &[String] {
        &self.base_vars
    }

    pub fn param_names(&self) -> &[String] {
        &self.param_names
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.components
    }

    /// Fiber block with parameters frozen, as fields over the base chart.
    pub fn fiber_at(&self, lambda: &[f64]) -> Vec<ScalarField> {
        let nb = self.base_dim();
        let keep: Vec<usize> = (0..nb).collect();
        let fixed: Vec<(usize, f64)> = lambda
            .iter()
            .enumerate()
            .map(|(i, &v)| (nb + i, v))
            .collect();
        self.components
            .iter()
            .map(|c| c.bind(&keep, &fixed))
            .collect()
    }

    /// The full section q -> (q, fiber(q, lambda)) as a chart map.
    pub fn section_at(&self, lambda: &[f64]) -> Result<ChartMap> {
        let mut comps: Vec<ScalarField> = (0..self.base_dim())
            .map(|i| ScalarField::from_expr(Expr::var(i), self.base_vars.clone()))
            .collect();
        comps.extend(self.fiber_at(lambda));
        ChartMap::new(comps)
    }

    /// Determinant of the Jacobian of `(q, lambda) -> (q, fiber(q, lambda))`
    /// at a combined node. The map is square only when the parameter count
    /// equals the fiber dimension.
    pub fn joint_jacobian_det(&self, node: &[f64]) -> Result<f64> {
        let nb = self.base_dim();
        let np = self.n_params();
        let nf = self.fiber_dim();
        if np != nf {
            return Err(CoreError::Dimension(format!(
                "family with {nf} fiber components and {np} parameters has no square Jacobian"
            )));
        }
        let dim = nb + np;
        let mut j = DMatrix::zeros(dim, dim);
        for i in 0..nb {
            j[(i, i)] = 1.0;
        }
        for (i, c) in self.components.iter().enumerate() {
            let g = c.grad(node)?;
            for (k, v) in g.iter().enumerate() {
                j[(nb + i, k)] = *v;
            }
        }
        Ok(j.lu().determinant())
    }
}

/// Threshold below which a family Jacobian is reported singular.
pub const SINGULAR_DET_TOL: f64 = 1e-10;

/// Evidence report for a complete slicing: Jacobian nonsingularity of the
/// joint map on a grid plus per-parameter slicing residuals. Surjectivity
/// of the joint map is not finitely checkable and is recorded as a caveat.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CompleteSlicingReport {
    pub min_abs_det: f64,
    pub argmin_node: Option<Vec<f64>>,
    pub n_nodes: usize,
    pub n_singular: usize,
    pub singular_nodes: Vec<Vec<f64>>,
    pub n_det_skipped: usize,
    pub slicing: ResidualReport,
    pub note: String,
}

impl CompleteSlicingReport {
    pub fn passed(&self) -> bool {
        self.n_singular == 0 && self.n_det_skipped == 0 && self.slicing.passed()
    }
}

/// Check a family against the dynamics `z` over a base grid times a
/// parameter grid: (a) the joint Jacobian must be nonsingular at every
/// node, (b) each frozen-parameter section must satisfy the slicing
/// equation within `tolerance`.
pub fn complete_slicing_check(
    fam: &ParamFamily,
    z: &VectorFieldSection,
    base_grid: &GridSpec,
    param_grid: &GridSpec,
    tolerance: f64,
) -> Result<CompleteSlicingReport> {
    if fam.base_dim() + fam.n_params() != z.dim() {
        return Err(CoreError::Dimension(format!(
            "base dim {} + params {} must equal ambient dim {}",
            fam.base_dim(),
            fam.n_params(),
            z.dim()
        )));
    }
    let base_nodes = base_grid.nodes();
    let param_nodes = param_grid.nodes();

    let mut min_abs_det = f64::INFINITY;
    let mut argmin = None;
    let mut singular_nodes = Vec::new();
    let mut n_nodes = 0;
    let mut n_det_skipped = 0;
    let mut acc = ResidualAccumulator::new("complete_slicing", tolerance);

    for lambda in &param_nodes {
        let section = fam.section_at(lambda)?;
        for q in &base_nodes {
            n_nodes += 1;
            let mut node = q.clone();
            node.extend_from_slice(lambda);
            match fam.joint_jacobian_det(&node) {
                Ok(det) => {
                    if det.abs() < min_abs_det {
                        min_abs_det = det.abs();
                        argmin = Some(node.clone());
                    }
                    if det.abs() < SINGULAR_DET_TOL {
                        singular_nodes.push(node.clone());
                    }
                }
                Err(CoreError::DomainViolation { .. }) => n_det_skipped += 1,
                Err(e) => return Err(e),
            }
            // X_lambda is the base block of Z along the section (the field
            // determined by the section when it is an embedding).
            match section_slicing_residual(&section, z, q) {
                Ok(r) => acc.add(&node, max_abs(&r)),
                Err(CoreError::DomainViolation { .. }) | Err(CoreError::NonFinite { .. }) => {
                    acc.skip(&node)
                }
                Err(e) => return Err(e),
            }
        }
    }

    Ok(CompleteSlicingReport {
        min_abs_det: if min_abs_det.is_finite() {
            min_abs_det
        } else {
            0.0
        },
        argmin_node: argmin,
        n_nodes,
        n_singular: singular_nodes.len(),
        singular_nodes,
        n_det_skipped,
        slicing: acc.finish(),
        note: "surjectivity of the joint map is not checked; the Jacobian determinant grid \
               provides local-diffeomorphism evidence only"
            .to_string(),
    })
}

fn section_slicing_residual(
    section: &ChartMap,
    z: &VectorFieldSection,
    q: &[f64],
) -> Result<Vec<f64>> {
    let up = section.eval(q)?;
    let zv = z.eval(&up)?;
    let x_base = &zv[..section.in_dim()];
    let ja = section.jacobian(q)?;
    let push = ja * DVector::from_vec(x_base.to_vec());
    Ok((0..zv.len()).map(|i| push[i] - zv[i]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::names;

    fn oscillator_field() -> VectorFieldSection {
        let vars = vec!["q1".to_string(), "p1".to_string()];
        VectorFieldSection::from_components(vec![
            ScalarField::compile("p1", &vars).unwrap(),
            ScalarField::compile("-q1", &vars).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn rk4_oscillator_full_period() {
        let z = oscillator_field();
        let flow = flow_rk4(&z, &[1.0, 0.0], 2.0 * std::f64::consts::PI, 1e-3).unwrap();
        let end = flow.final_state();
        assert!((end[0] - 1.0).abs() < 1e-8, "q(2pi) = {}", end[0]);
        assert!(end[1].abs() < 1e-8, "p(2pi) = {}", end[1]);
    }

    #[test]
    fn rk4_zero_field_is_constant() {
        let vars = vec!["q1".to_string(), "p1".to_string()];
        let z = VectorFieldSection::from_components(vec![
            ScalarField::compile("0", &vars).unwrap(),
            ScalarField::compile("0", &vars).unwrap(),
        ])
        .unwrap();
        let flow = flow_rk4(&z, &[0.3, -0.7], 1.0, 0.1).unwrap();
        for s in &flow.states {
            assert_eq!(s, &vec![0.3, -0.7]);
        }
    }

    #[test]
    fn rk4_constant_field_exact() {
        let z = VectorFieldSection::from_components(vec![ScalarField::compile(
            "1",
            &names("x", 1),
        )
        .unwrap()])
        .unwrap();
        let flow = flow_rk4(&z, &[0.0], 1.0, 0.1).unwrap();
        assert_eq!(flow.final_state()[0], 1.0);
    }

    #[test]
    fn rk4_semigroup_property() {
        let z = oscillator_field();
        let whole = flow_rk4(&z, &[0.8, 0.2], 2.0, 1e-2).unwrap();
        let first = flow_rk4(&z, &[0.8, 0.2], 1.2, 1e-2).unwrap();
        let second = flow_rk4(&z, first.final_state(), 0.8, 1e-2).unwrap();
        let budget = 10.0 * (whole.total_step_error() + first.total_step_error()
            + second.total_step_error())
        .max(1e-14);
        for (a, b) in whole.final_state().iter().zip(second.final_state()) {
            assert!((a - b).abs() <= budget, "|{a} - {b}| > {budget}");
        }
    }

    #[test]
    fn midpoint_requires_canonical_tag() {
        let z = oscillator_field();
        assert!(matches!(
            flow_midpoint(&z, &[1.0, 0.0], 1.0, 0.1),
            Err(CoreError::Unsupported(_))
        ));
    }

    fn canonical_oscillator() -> VectorFieldSection {
        let h = ScalarField::compile(
            "(q1^2 + p1^2)/2",
            &["q1".to_string(), "p1".to_string()],
        )
        .unwrap();
        VectorFieldSection::canonical_from_hamiltonian(h, 1).unwrap()
    }

    #[test]
    fn midpoint_oscillator_energy_drift() {
        let z = canonical_oscillator();
        let flow = flow_midpoint(&z, &[1.0, 0.0], 100.0, 0.05).unwrap();
        let h = |s: &[f64]| 0.5 * (s[0] * s[0] + s[1] * s[1]);
        let h0 = h(&flow.states[0]);
        let hend = h(flow.final_state());
        assert!((hend - h0).abs() <= 1e-6, "drift {}", (hend - h0).abs());
    }

    #[test]
    fn midpoint_quadratic_invariant_many_steps() {
        // Linear canonical field: energy error stays at rounding level
        // over 1e4 steps because each Newton solve is exact.
        let z = canonical_oscillator();
        let flow = flow_midpoint(&z, &[1.0, 0.0], 100.0, 0.01).unwrap();
        let h = |s: &[f64]| 0.5 * (s[0] * s[0] + s[1] * s[1]);
        let mut worst: f64 = 0.0;
        for s in &flow.states {
            worst = worst.max((h(s) - 0.5).abs());
        }
        assert!(worst <= 1e-10, "energy error {worst}");
    }

    #[test]
    fn midpoint_zero_field_fixed_point() {
        let h = ScalarField::compile("0", &["q1".to_string(), "p1".to_string()]).unwrap();
        let z = VectorFieldSection::canonical_from_hamiltonian(h, 1).unwrap();
        let flow = flow_midpoint(&z, &[0.4, -0.2], 2.0, 0.1).unwrap();
        for s in &flow.states {
            assert_eq!(s, &vec![0.4, -0.2]);
        }
    }

    #[test]
    fn midpoint_free_particle_exact() {
        let h = ScalarField::compile("p1^2/2", &["q1".to_string(), "p1".to_string()])
            .unwrap();
        let z = VectorFieldSection::canonical_from_hamiltonian(h, 1).unwrap();
        let flow = flow_midpoint(&z, &[0.0, 1.0], 3.0, 0.05).unwrap();
        assert!((flow.final_state()[0] - 3.0).abs() <= 1e-10);
        assert!((flow.final_state()[1] - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn slicing_constant_section_free_particle() {
        // P = T*R, H = p^2/2, alpha(q) = (q, c), X = c.
        let qp = vec!["q1".to_string(), "p1".to_string()];
        let q = names("q", 1);
        let c = 1.7;
        let z = VectorFieldSection::from_components(vec![
            ScalarField::compile("p1", &qp).unwrap(),
            ScalarField::compile("0", &qp).unwrap(),
        ])
        .unwrap();
        let alpha = ChartMap::new(vec![
            ScalarField::compile("q1", &q).unwrap(),
            ScalarField::constant(c, q.clone()),
        ])
        .unwrap();
        let x = VectorFieldSection::from_components(vec![ScalarField::constant(c, q.clone())])
            .unwrap();
        let samples: Vec<Vec<f64>> = (0..20).map(|i| vec![-1.0 + 0.1 * i as f64]).collect();
        let rep = slicing_residual(&alpha, &x, &z, &samples, 1e-9).unwrap();
        assert!(rep.max_norm <= 1e-12, "max {}", rep.max_norm);
    }

    #[test]
    fn slicing_oscillator_energy_section() {
        // alpha(q) = (q, sqrt(2l - q^2)), X = sqrt(2l - q^2), l = 1.
        let qp = vec!["q1".to_string(), "p1".to_string()];
        let q = names("q", 1);
        let z = VectorFieldSection::from_components(vec![
            ScalarField::compile("p1", &qp).unwrap(),
            ScalarField::compile("-q1", &qp).unwrap(),
        ])
        .unwrap();
        let alpha = ChartMap::new(vec![
            ScalarField::compile("q1", &q).unwrap(),
            ScalarField::compile("sqrt(2*1 - q1^2)", &q).unwrap(),
        ])
        .unwrap();
        let x = VectorFieldSection::from_components(vec![ScalarField::compile(
            "sqrt(2*1 - q1^2)",
            &q,
        )
        .unwrap()])
        .unwrap();
        let samples: Vec<Vec<f64>> = (0..100)
            .map(|i| vec![-1.3 + 2.6 * i as f64 / 99.0])
            .collect();
        let rep = slicing_residual(&alpha, &x, &z, &samples, 1e-9).unwrap();
        assert!(rep.max_norm <= 1e-9, "max {}", rep.max_norm);
        assert_eq!(rep.n_skipped, 0);
    }

    #[test]
    fn slicing_non_solution_reports_nonzero() {
        // alpha(q) = (q, q), X = 1, Z from H = p^2/2: r = (1 - q, 1).
        let qp = vec!["q1".to_string(), "p1".to_string()];
        let q = names("q", 1);
        let z = VectorFieldSection::from_components(vec![
            ScalarField::compile("p1", &qp).unwrap(),
            ScalarField::compile("0", &qp).unwrap(),
        ])
        .unwrap();
        let alpha = ChartMap::new(vec![
            ScalarField::compile("q1", &q).unwrap(),
            ScalarField::compile("q1", &q).unwrap(),
        ])
        .unwrap();
        let x = VectorFieldSection::from_components(vec![ScalarField::constant(1.0, q.clone())])
            .unwrap();
        let samples: Vec<Vec<f64>> = (0..11).map(|i| vec![2.0 + 0.1 * i as f64]).collect();
        let rep = slicing_residual(&alpha, &x, &z, &samples, 1e-9).unwrap();
        assert!(rep.max_norm > 0.5, "max {}", rep.max_norm);
        // Hand value at q = 3: r = (1 - 3, 1), norm 2.
        assert!((rep.max_norm - 2.0).abs() < 1e-12);
    }

    fn grid1(min: f64, max: f64, count: usize) -> GridSpec {
        GridSpec::new(vec![crate::report::GridAxis { min, max, count }])
    }

    #[test]
    fn complete_slicing_free_particle() {
        let qp = vec!["q1".to_string(), "p1".to_string()];
        let z = VectorFieldSection::from_components(vec![
            ScalarField::compile("p1", &qp).unwrap(),
            ScalarField::compile("0", &qp).unwrap(),
        ])
        .unwrap();
        let fam_vars = vec!["q1".to_string(), "l".to_string()];
        let fam = ParamFamily::new(
            names("q", 1),
            vec!["l".to_string()],
            vec![ScalarField::compile("l", &fam_vars).unwrap()],
        )
        .unwrap();
        let rep = complete_slicing_check(&fam, &z, &grid1(-1.0, 1.0, 11), &grid1(0.5, 1.5, 5), 1e-10)
            .unwrap();
        assert!(rep.passed());
        assert!((rep.min_abs_det - 1.0).abs() < 1e-14);
        assert!(rep.slicing.max_norm <= 1e-14);
    }

    #[test]
    fn complete_slicing_oscillator_family_determinant() {
        let qp = vec!["q1".to_string(), "p1".to_string()];
        let z = VectorFieldSection::from_components(vec![
            ScalarField::compile("p1", &qp).unwrap(),
            ScalarField::compile("-q1", &qp).unwrap(),
        ])
        .unwrap();
        let fam_vars = vec!["q1".to_string(), "l".to_string()];
        let fam = ParamFamily::new(
            names("q", 1),
            vec!["l".to_string()],
            vec![ScalarField::compile("sqrt(2*l - q1^2)", &fam_vars).unwrap()],
        )
        .unwrap();
        let base = grid1(-0.9, 0.9, 13);
        let params = grid1(1.0, 2.0, 5);
        let rep = complete_slicing_check(&fam, &z, &base, &params, 1e-9).unwrap();
        assert!(rep.passed(), "singular: {}", rep.n_singular);
        // Determinant oracle: d p / d l = 1 / sqrt(2 l - q^2), minimized at
        // the largest momentum, i.e. q = 0, l = 2.
        let oracle = 1.0 / (2.0f64 * 2.0).sqrt();
        assert!(
            (rep.min_abs_det - oracle).abs() < 1e-12,
            "min det {} vs oracle {}",
            rep.min_abs_det,
            oracle
        );
    }

    #[test]
    fn complete_slicing_collapsed_family_singular() {
        let qp = vec!["q1".to_string(), "p1".to_string()];
        let z = VectorFieldSection::from_components(vec![
            ScalarField::compile("p1", &qp).unwrap(),
            ScalarField::compile("0", &qp).unwrap(),
        ])
        .unwrap();
        let fam_vars = vec!["q1".to_string(), "l".to_string()];
        let fam = ParamFamily::new(
            names("q", 1),
            vec!["l".to_string()],
            vec![ScalarField::compile("0", &fam_vars).unwrap()],
        )
        .unwrap();
        let rep = complete_slicing_check(&fam, &z, &grid1(-1.0, 1.0, 5), &grid1(0.0, 1.0, 3), 1e-9)
            .unwrap();
        assert_eq!(rep.n_singular, rep.n_nodes);
        assert!(!rep.passed());
    }

    #[test]
    fn slicing_trajectory_correspondence() {
        // Z(z1, z2) = (z2, z2) with alpha(x) = (x, x) and X(x) = x: a zero
        // residual slicing whose lifted X-curves must follow Z-curves.
        let zv = vec!["z1".to_string(), "z2".to_string()];
        let xv = names("x", 1);
        let z = VectorFieldSection::from_components(vec![
            ScalarField::compile("z2", &zv).unwrap(),
            ScalarField::compile("z2", &zv).unwrap(),
        ])
        .unwrap();
        let alpha = ChartMap::new(vec![
            ScalarField::compile("x1", &xv).unwrap(),
            ScalarField::compile("x1", &xv).unwrap(),
        ])
        .unwrap();
        let x = VectorFieldSection::from_components(vec![ScalarField::compile("x1", &xv)
            .unwrap()])
        .unwrap();
        let samples: Vec<Vec<f64>> = (0..100)
            .map(|i| vec![-1.0 + 2.0 * i as f64 / 99.0])
            .collect();
        let rep = slicing_residual(&alpha, &x, &z, &samples, 1e-9).unwrap();
        assert!(rep.max_norm <= 1e-12);

        let mut rng = crate::rng::SplitMix64::new(7);
        for _ in 0..10 {
            let x0 = rng.in_range(-1.0, 1.0);
            let base = flow_rk4(&x, &[x0], 5.0, 1e-3).unwrap();
            let direct = flow_rk4(&z, &[x0, x0], 5.0, 1e-3).unwrap();
            let mut gap: f64 = 0.0;
            for (b, d) in base.states.iter().zip(&direct.states) {
                let lifted = alpha.eval(b).unwrap();
                gap = gap.max((lifted[0] - d[0]).abs().max((lifted[1] - d[1]).abs()));
            }
            assert!(gap <= 1e-6, "gap {gap}");
        }
    }
}
