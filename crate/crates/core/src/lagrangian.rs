//! Lagrangian systems on the chart (q^1..q^n, v^1..v^n): the fiber
//! derivative (Legendre transform) and its Newton inverse, the
//! Euler-Lagrange flow field, candidate base fields for the variational
//! Hamilton-Jacobi conditions, and the pointwise-Legendre bridge to the
//! momentum picture.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::dynamics::VectorFieldSection;
use crate::error::{CoreError, Result};
use crate::expr::{names, Expr, ScalarField};
use crate::hamiltonian::OneFormSection;
use crate::report::{max_abs, ResidualAccumulator, ResidualReport};
use crate::solve::{condition_number, newton_solve};

/// Condition-number threshold beyond which the fiber Hessian counts as
/// singular.
pub const SINGULAR_COND_TOL: f64 = 1e12;

/// Chart variable names `q1..qn, v1..vn`.
pub fn tangent_vars(n: usize) -> Vec<String> {
    let mut v = names("q", n);
    v.extend(names("v", n));
    v
}

/// A Lagrangian over exactly 2n coordinates: positions then velocities.
#[derive(Debug, Clone)]
pub struct LagrangianSystem {
    n: usize,
    l: ScalarField,
}

impl LagrangianSystem {
    pub fn new(n: usize, l_text: &str) -> Result<LagrangianSystem> {
        let l = ScalarField::compile(l_text, &tangent_vars(n))?;
        Ok(LagrangianSystem { n, l })
    }

    pub fn from_field(n: usize, l: ScalarField) -> Result<LagrangianSystem> {
        if l.dim() != 2 * n {
            return Err(CoreError::Dimension(format!(
                "Lagrangian over {} variables for n = {n}",
                l.dim()
            )));
        }
        Ok(LagrangianSystem { n, l })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lagrangian(&self) -> &ScalarField {
        &self.l
    }

    /// Components of the Lagrangian 1-form: `theta_i = dL/dv^i`, symbolic
    /// fields over the full (q, v) chart.
    pub fn theta_components(&self) -> Vec<ScalarField> {
        (0..self.n).map(|i| self.l.diff(self.n + i)).collect()
    }

    /// The Lagrangian energy `E = v^i dL/dv^i - L` as a symbolic field.
    pub fn energy_field(&self) -> ScalarField {
        let n = self.n;
        let mut expr = Expr::num(0.0);
        for i in 0..n {
            expr = crate::expr::add(
                expr,
                crate::expr::mul(Expr::var(n + i), self.l.diff(n + i).expr().clone()),
            );
        }
        expr = crate::expr::sub(expr, self.l.expr().clone());
        ScalarField::from_expr(expr, tangent_vars(n))
    }

    /// Velocity-block Hessian `d2L/dv dv` at a point.
    pub fn fiber_hessian(&self, qv: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.n;
        let h = self.l.hessian(qv)?;
        Ok(h.view((n, n), (n, n)).into_owned())
    }

    /// Condition number of the fiber Hessian; the regularity measure.
    pub fn regularity(&self, qv: &[f64]) -> Result<f64> {
        Ok(condition_number(&self.fiber_hessian(qv)?))
    }
}

/// Fiber derivative: `(q, v) -> (q, p)` with `p = dL/dv`.
pub fn legendre(sys: &LagrangianSystem, qv: &[f64]) -> Result<Vec<f64>> {
    let n = sys.n;
    let g = sys.l.grad(qv)?;
    let mut out = qv[..n].to_vec();
    out.extend_from_slice(&g[n..]);
    Ok(out)
}

/// Newton inverse of the fiber derivative: solve `dL/dv(q, v) = p` for v.
/// The seed defaults to `v0 = p`.
pub fn legendre_inverse(
    sys: &LagrangianSystem,
    qp: &[f64],
    seed: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let n = sys.n;
    let (q, p) = qp.split_at(n);
    let v0 = seed.map(<[f64]>::to_vec).unwrap_or_else(|| p.to_vec());
    let v = newton_solve(
        |v: &[f64]| {
            let mut qv = q.to_vec();
            qv.extend_from_slice(v);
            let g = sys.l.grad(&qv)?;
            let hvv = sys.fiber_hessian(&qv)?;
            let cond = condition_number(&hvv);
            if cond > SINGULAR_COND_TOL {
                return Err(CoreError::SingularLegendre { cond });
            }
            let r = DVector::from_iterator(n, (0..n).map(|i| g[n + i] - p[i]));
            Ok((r, hvv))
        },
        &v0,
    )?;
    let mut out = q.to_vec();
    out.extend(v);
    Ok(out)
}

/// The Euler-Lagrange flow field on (q, v): `qdot = v` and the
/// accelerations solve the fiber-Hessian linear system
/// `(d2L/dvdv) a = dL/dq - (d2L/dvdq) v` at each point.
pub fn euler_lagrange_field(sys: &LagrangianSystem) -> VectorFieldSection {
    let sys = sys.clone();
    let n = sys.n;
    VectorFieldSection::from_fn(
        tangent_vars(n),
        "euler_lagrange",
        Arc::new(move |qv: &[f64]| {
            let a = accelerations(&sys, qv)?;
            let mut out = qv[n..].to_vec();
            out.extend(a);
            Ok(out)
        }),
    )
}

fn accelerations(sys: &LagrangianSystem, qv: &[f64]) -> Result<Vec<f64>> {
    let n = sys.n;
    let g = sys.l.grad(qv)?;
    let h = sys.l.hessian(qv)?;
    let hvv = h.view((n, n), (n, n)).into_owned();
    let cond = condition_number(&hvv);
    if cond > SINGULAR_COND_TOL {
        return Err(CoreError::SingularLegendre { cond });
    }
    let mut rhs = DVector::zeros(n);
    for i in 0..n {
        let mut acc = g[i];
        for j in 0..n {
            acc -= h[(n + i, j)] * qv[n + j];
        }
        rhs[i] = acc;
    }
    let a = hvv
        .lu()
        .solve(&rhs)
        .ok_or(CoreError::SingularLegendre { cond })?;
    Ok(a.iter().copied().collect())
}

/// The four residuals of the variational Hamilton-Jacobi conditions for a
/// candidate base field X, all computed through the embedding
/// `q -> (q, X(q))` with exact chain rules.
#[derive(Debug, serde::Serialize)]
pub struct LagHjReport {
    /// Antisymmetric pullback of the Lagrangian 2-form onto the base.
    pub pullback_omega: ResidualReport,
    /// Gradient of the pulled-back energy.
    pub de: ResidualReport,
    /// Contraction residual `i(X)(X* omega_L) - d(X* E_L)`.
    pub generalized: ResidualReport,
    /// When a generating scalar is supplied: `dS/dq^i - dL/dv^i(q, X)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eq_s: Option<ResidualReport>,
}

impl LagHjReport {
    pub fn passed(&self) -> bool {
        self.pullback_omega.passed()
            && self.de.passed()
            && self.generalized.passed()
            && self.eq_s.as_ref().is_none_or(ResidualReport::passed)
    }
}

pub fn lag_hj_residuals(
    sys: &LagrangianSystem,
    x_field: &VectorFieldSection,
    generating: Option<&ScalarField>,
    samples: &[Vec<f64>],
    tolerance: f64,
) -> Result<LagHjReport> {
    let n = sys.n;
    if x_field.dim() != n {
        return Err(CoreError::Dimension(format!(
            "candidate field of dimension {} for n = {n}",
            x_field.dim()
        )));
    }
    if x_field.components().is_none() {
        return Err(CoreError::Unsupported(
            "variational residuals need an explicit candidate field".into(),
        ));
    }
    let energy = sys.energy_field();
    let mut omega_acc = ResidualAccumulator::new("pullback_omega_defect", tolerance);
    let mut de_acc = ResidualAccumulator::new("de_defect", tolerance);
    let mut gen_acc = ResidualAccumulator::new("generalized_defect", tolerance);
    let mut eqs_acc = generating.map(|_| ResidualAccumulator::new("generating_pde_defect", tolerance));

    for q in samples {
        let step = (|| -> Result<(f64, f64, f64, Option<f64>)> {
            let x = x_field.eval(q)?;
            let jx = x_field.jacobian(q)?;
            let mut qv = q.clone();
            qv.extend_from_slice(&x);
            let h = sys.l.hessian(&qv)?;

            // d beta_i / d q_k for beta = dL/dv along the embedding.
            let mut c = DMatrix::zeros(n, n);
            for i in 0..n {
                for k in 0..n {
                    let mut acc = h[(n + i, k)];
                    for j in 0..n {
                        acc += h[(n + i, n + j)] * jx[(j, k)];
                    }
                    c[(i, k)] = acc;
                }
            }

            let mut omega_defect: f64 = 0.0;
            for i in 0..n {
                for k in (i + 1)..n {
                    omega_defect = omega_defect.max((c[(i, k)] - c[(k, i)]).abs());
                }
            }

            // Gradient of the pulled-back energy by the chain rule.
            let ge = energy.grad(&qv)?;
            let mut de = vec![0.0; n];
            for k in 0..n {
                let mut acc = ge[k];
                for j in 0..n {
                    acc += ge[n + j] * jx[(j, k)];
                }
                de[k] = acc;
            }

            let mut gen_defect: f64 = 0.0;
            for k in 0..n {
                let mut r = -de[k];
                for i in 0..n {
                    r += x[i] * (c[(i, k)] - c[(k, i)]);
                }
                gen_defect = gen_defect.max(r.abs());
            }

            let eqs = match generating {
                Some(s) => {
                    let ds = s.grad(q)?;
                    let gl = sys.l.grad(&qv)?;
                    let mut worst: f64 = 0.0;
                    for i in 0..n {
                        worst = worst.max((ds[i] - gl[n + i]).abs());
                    }
                    Some(worst)
                }
                None => None,
            };
            Ok((omega_defect, max_abs(&de), gen_defect, eqs))
        })();
        match step {
            Ok((omega, de, gen, eqs)) => {
                omega_acc.add(q, omega);
                de_acc.add(q, de);
                gen_acc.add(q, gen);
                if let (Some(acc), Some(v)) = (eqs_acc.as_mut(), eqs) {
                    acc.add(q, v);
                }
            }
            Err(CoreError::DomainViolation { .. }) | Err(CoreError::NonFinite { .. }) => {
                omega_acc.skip(q);
                de_acc.skip(q);
                gen_acc.skip(q);
                if let Some(acc) = eqs_acc.as_mut() {
                    acc.skip(q);
                }
            }
            Err(e) => return Err(e),
        }
    }
    Ok(LagHjReport {
        pullback_omega: omega_acc.finish(),
        de: de_acc.finish(),
        generalized: gen_acc.finish(),
        eq_s: eqs_acc.map(ResidualAccumulator::finish),
    })
}

/// Push an explicit base field through the fiber derivative:
/// `alpha_i(q) = dL/dv^i(q, X(q))`, assembled symbolically.
pub fn field_to_section(
    sys: &LagrangianSystem,
    x_field: &VectorFieldSection,
) -> Result<OneFormSection> {
    let n = sys.n;
    let comps = x_field.components().ok_or_else(|| {
        CoreError::Unsupported("symbolic composition needs an explicit field".into())
    })?;
    let base_vars = names("q", n);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let theta = sys.l.diff(n + i);
        let subs: Vec<Expr> = (0..2 * n)
            .map(|j| {
                if j < n {
                    Expr::var(j)
                } else {
                    comps[j - n].expr().clone()
                }
            })
            .collect();
        out.push(theta.compose(&subs, base_vars.clone()));
    }
    OneFormSection::new(out)
}

/// Pull a 1-form back to a velocity field through the inverse fiber
/// derivative, solved pointwise by Newton iteration.
pub fn section_to_field(sys: &LagrangianSystem, alpha: &OneFormSection) -> VectorFieldSection {
    let sys = sys.clone();
    let alpha = alpha.clone();
    let n = sys.n;
    VectorFieldSection::from_fn(
        names("q", n),
        "legendre_inverse",
        Arc::new(move |q: &[f64]| {
            let mut qp = q.to_vec();
            qp.extend(alpha.eval(q)?);
            let qv = legendre_inverse(&sys, &qp, None)?;
            Ok(qv[n..].to_vec())
        }),
    )
}

/// Momenta along an arbitrary velocity field, evaluated pointwise.
pub fn momenta_at(sys: &LagrangianSystem, q: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    let mut qv = q.to_vec();
    qv.extend_from_slice(v);
    let g = sys.l.grad(&qv)?;
    Ok(g[sys.n..].to_vec())
}

/// Value of the derived Hamiltonian `E_L o FL^{-1}` at a phase-space point.
pub fn derived_hamiltonian(sys: &LagrangianSystem, qp: &[f64]) -> Result<f64> {
    let qv = legendre_inverse(sys, qp, None)?;
    sys.energy_field().eval(&qv)
}

/// The canonical field of the derived Hamiltonian, evaluated pointwise as
/// `(v, dL/dq(q, v))` with `v = FL^{-1}(q, p)`.
pub fn derived_hamiltonian_field(sys: &LagrangianSystem) -> VectorFieldSection {
    let sys = sys.clone();
    let n = sys.n;
    let mut vars = names("q", n);
    vars.extend(names("p", n));
    VectorFieldSection::from_fn(
        vars,
        "derived_hamiltonian",
        Arc::new(move |qp: &[f64]| {
            let qv = legendre_inverse(&sys, qp, None)?;
            let g = sys.lagrangian().grad(&qv)?;
            let mut out = qv[n..].to_vec();
            out.extend_from_slice(&g[..n]);
            Ok(out)
        }),
    )
}

/// Standard-problem defects for a 1-form against the derived Hamiltonian:
/// closedness of alpha plus the gradient of `E_L o FL^{-1} o alpha`,
/// computed with the implicit-function chain rule
/// `d_k (H o alpha) = sum_i V_i dalpha_i/dq^k - dL/dq^k(q, V)`.
pub fn derived_standard_residual(
    sys: &LagrangianSystem,
    alpha: &OneFormSection,
    samples: &[Vec<f64>],
    tolerance: f64,
) -> Result<crate::hamiltonian::StandardHjReport> {
    let n = sys.n;
    let mut closed = ResidualAccumulator::new("closedness_defect", tolerance);
    let mut dh = ResidualAccumulator::new("dh_defect", tolerance);
    for q in samples {
        match alpha.closedness_at(q) {
            Ok(c) => closed.add(q, c),
            Err(CoreError::DomainViolation { .. }) => closed.skip(q),
            Err(e) => return Err(e),
        }
        let run = (|| -> Result<f64> {
            let mut qp = q.to_vec();
            qp.extend(alpha.eval(q)?);
            let qv = legendre_inverse(sys, &qp, None)?;
            let gl = sys.l.grad(&qv)?;
            let a = alpha.jacobian(q)?;
            let mut worst: f64 = 0.0;
            for k in 0..n {
                let mut acc = -gl[k];
                for i in 0..n {
                    acc += qv[n + i] * a[(k, i)];
                }
                worst = worst.max(acc.abs());
            }
            Ok(worst)
        })();
        match run {
            Ok(d) => dh.add(q, d),
            Err(CoreError::DomainViolation { .. })
            | Err(CoreError::NewtonDivergence { .. })
            | Err(CoreError::SingularLegendre { .. }) => dh.skip(q),
            Err(e) => return Err(e),
        }
    }
    Ok(crate::hamiltonian::StandardHjReport {
        closedness: closed.finish(),
        dh: dh.finish(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    #[test]
    fn legendre_identity_for_quadratic() {
        let sys = LagrangianSystem::new(1, "v1^2/2").unwrap();
        assert_eq!(legendre(&sys, &[0.3, 1.7]).unwrap(), vec![0.3, 1.7]);
        let back = legendre_inverse(&sys, &[0.3, 1.7], None).unwrap();
        assert!((back[1] - 1.7).abs() < 1e-12);
    }

    #[test]
    fn legendre_quartic_cube() {
        let sys = LagrangianSystem::new(1, "v1^4/4").unwrap();
        let fwd = legendre(&sys, &[0.0, 2.0]).unwrap();
        assert!((fwd[1] - 8.0).abs() < 1e-12);
        let back = legendre_inverse(&sys, &[0.0, 8.0], None).unwrap();
        assert!((back[1] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn legendre_logarithmic() {
        // L = ln v: p = 1/v, inverse v = 1/p.
        let sys = LagrangianSystem::new(1, "ln(v1)").unwrap();
        let fwd = legendre(&sys, &[0.0, 2.0]).unwrap();
        assert!((fwd[1] - 0.5).abs() < 1e-14);
        let back = legendre_inverse(&sys, &[0.0, 0.5], None).unwrap();
        assert!((back[1] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn legendre_singular_at_quartic_origin() {
        let sys = LagrangianSystem::new(1, "v1^4/4").unwrap();
        let err = legendre_inverse(&sys, &[0.0, 0.0], Some(&[0.0])).unwrap_err();
        assert!(matches!(err, CoreError::SingularLegendre { .. }));
    }

    #[test]
    fn euler_lagrange_oscillator() {
        let sys = LagrangianSystem::new(1, "v1^2/2 - q1^2/2").unwrap();
        let gamma = euler_lagrange_field(&sys);
        let v = gamma.eval(&[0.7, 0.2]).unwrap();
        assert!((v[0] - 0.2).abs() < 1e-14);
        assert!((v[1] + 0.7).abs() < 1e-12);
    }

    #[test]
    fn euler_lagrange_quartic_potential() {
        let sys = LagrangianSystem::new(1, "v1^2/2 - q1^4/4").unwrap();
        let gamma = euler_lagrange_field(&sys);
        let v = gamma.eval(&[0.9, -0.3]).unwrap();
        assert!((v[1] + 0.9f64.powi(3)).abs() < 1e-12);
    }

    #[test]
    fn euler_lagrange_pure_quartic_kinetic() {
        // L = v^4/4 has no q dependence: d/dt v^3 = 0, so the acceleration
        // vanishes wherever the fiber Hessian is regular.
        let sys = LagrangianSystem::new(1, "v1^4/4").unwrap();
        let gamma = euler_lagrange_field(&sys);
        let v = gamma.eval(&[0.4, 1.0]).unwrap();
        assert_eq!(v[0], 1.0);
        assert!(v[1].abs() < 1e-12);
    }

    #[test]
    fn energy_field_quadratic_is_kinetic_plus_potential() {
        let sys = LagrangianSystem::new(1, "v1^2/2 - cos(q1)").unwrap();
        let e = sys.energy_field();
        let mut rng = SplitMix64::new(11);
        for _ in 0..20 {
            let q = rng.in_range(-2.0, 2.0);
            let v = rng.in_range(-2.0, 2.0);
            let expect = v * v / 2.0 + q.cos();
            assert!((e.eval(&[q, v]).unwrap() - expect).abs() < 1e-13);
        }
    }

    fn line_samples(lo: f64, hi: f64, count: usize) -> Vec<Vec<f64>> {
        (0..count)
            .map(|i| vec![lo + (hi - lo) * i as f64 / (count - 1) as f64])
            .collect()
    }

    fn explicit_field(texts: &[&str], n: usize) -> VectorFieldSection {
        let vars = names("q", n);
        VectorFieldSection::from_components(
            texts
                .iter()
                .map(|t| ScalarField::compile(t, &vars).unwrap())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn lag_residuals_free_particle_constant_field() {
        let sys = LagrangianSystem::new(1, "v1^2/2").unwrap();
        let x = explicit_field(&["1.4"], 1);
        let s = ScalarField::compile("1.4*q1", &names("q", 1)).unwrap();
        let rep = lag_hj_residuals(&sys, &x, Some(&s), &line_samples(-1.0, 1.0, 21), 1e-9)
            .unwrap();
        assert!(rep.passed());
        assert!(rep.pullback_omega.max_norm == 0.0);
        assert!(rep.de.max_norm <= 1e-12);
        assert!(rep.generalized.max_norm <= 1e-12);
        assert!(rep.eq_s.unwrap().max_norm <= 1e-12);
    }

    #[test]
    fn lag_residuals_oscillator_energy_level() {
        let sys = LagrangianSystem::new(1, "v1^2/2 - q1^2/2").unwrap();
        let x = explicit_field(&["sqrt(2*1 - q1^2)"], 1);
        let rep = lag_hj_residuals(&sys, &x, None, &line_samples(-0.9, 0.9, 31), 1e-9).unwrap();
        assert!(rep.de.max_norm <= 1e-9, "de {}", rep.de.max_norm);
        assert!(rep.generalized.max_norm <= 1e-9);
    }

    #[test]
    fn lag_residuals_non_solution_grows_with_q() {
        // X = 1: the pulled-back energy is 1/2 + q^2/2, so the defect is
        // max |q| over the sampled window.
        let sys = LagrangianSystem::new(1, "v1^2/2 - q1^2/2").unwrap();
        let x = explicit_field(&["1"], 1);
        let rep = lag_hj_residuals(&sys, &x, None, &line_samples(-1.0, 1.0, 41), 1e-9).unwrap();
        assert!((rep.de.max_norm - 1.0).abs() < 1e-12);
        assert!(!rep.passed());
    }

    #[test]
    fn equivalence_identity_legendre() {
        let sys = LagrangianSystem::new(1, "v1^2/2").unwrap();
        let x = explicit_field(&["0.9"], 1);
        let alpha = field_to_section(&sys, &x).unwrap();
        assert!((alpha.eval(&[0.3]).unwrap()[0] - 0.9).abs() < 1e-14);
    }

    #[test]
    fn equivalence_cubic_momentum() {
        let sys = LagrangianSystem::new(1, "v1^4/4").unwrap();
        let x = explicit_field(&["2"], 1);
        let alpha = field_to_section(&sys, &x).unwrap();
        assert!((alpha.eval(&[0.0]).unwrap()[0] - 8.0).abs() < 1e-12);
        let back = section_to_field(&sys, &alpha);
        assert!((back.eval(&[0.0]).unwrap()[0] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn equivalence_round_trip_random_points() {
        let sys = LagrangianSystem::new(1, "v1^4/4").unwrap();
        let alpha = OneFormSection::compile(&["1 + q1^2".into()], 1).unwrap();
        let x = section_to_field(&sys, &alpha);
        let mut rng = SplitMix64::new(5);
        for _ in 0..100 {
            let q = rng.in_range(-1.0, 1.0);
            let v = x.eval(&[q]).unwrap();
            let p = momenta_at(&sys, &[q], &v).unwrap();
            assert!((p[0] - (1.0 + q * q)).abs() <= 1e-10);
        }
    }

    #[test]
    fn derived_hamiltonian_matches_closed_form() {
        // L = v^2/2 - q^2/2 gives H = p^2/2 + q^2/2 after the fiber
        // transform.
        let sys = LagrangianSystem::new(1, "v1^2/2 - q1^2/2").unwrap();
        let mut rng = SplitMix64::new(9);
        for _ in 0..20 {
            let q = rng.in_range(-1.0, 1.0);
            let p = rng.in_range(-1.0, 1.0);
            let h = derived_hamiltonian(&sys, &[q, p]).unwrap();
            assert!((h - (p * p + q * q) / 2.0).abs() < 1e-11);
        }
    }

    #[test]
    fn conjugacy_of_flows_at_random_points() {
        // T(FL) o Gamma_L = Z_H o FL for the derived Hamiltonian field,
        // checked pointwise: the fiber part of T(FL) Gamma_L is
        // Hvq v + Hvv a.
        let sys = LagrangianSystem::new(1, "v1^2/2 - q1^4/4").unwrap();
        let gamma = euler_lagrange_field(&sys);
        let zh = derived_hamiltonian_field(&sys);
        let mut rng = SplitMix64::new(13);
        for _ in 0..100 {
            let q = rng.in_range(-1.0, 1.0);
            let v = rng.in_range(0.5, 2.0);
            let el = gamma.eval(&[q, v]).unwrap();
            let h = sys.lagrangian().hessian(&[q, v]).unwrap();
            let lifted = [v, h[(1, 0)] * el[0] + h[(1, 1)] * el[1]];
            let fl = legendre(&sys, &[q, v]).unwrap();
            let z = zh.eval(&fl).unwrap();
            assert!((lifted[0] - z[0]).abs() <= 1e-8);
            assert!((lifted[1] - z[1]).abs() <= 1e-8);
        }
    }

    #[test]
    fn pullback_omega_equals_closedness_of_pushed_section() {
        // Both routes measure the same submanifold condition: the hessian
        // chain rule on L and autodiff of the composed section.
        let sys = LagrangianSystem::new(2, "v1^2/2 + v2^2/2 + v1*v2/4 - q1^2*q2").unwrap();
        let vars = names("q", 2);
        let x = VectorFieldSection::from_components(vec![
            ScalarField::compile("q2^2", &vars).unwrap(),
            ScalarField::compile("q1*q2", &vars).unwrap(),
        ])
        .unwrap();
        let alpha = field_to_section(&sys, &x).unwrap();
        let samples = vec![vec![0.4, -0.8], vec![1.1, 0.3], vec![-0.5, 0.9]];
        let rep = lag_hj_residuals(&sys, &x, None, &samples, 1e-9).unwrap();
        let mut worst: f64 = 0.0;
        for q in &samples {
            worst = worst.max(alpha.closedness_at(q).unwrap());
        }
        assert!(
            (rep.pullback_omega.max_norm - worst).abs() <= 1e-9,
            "pullback {} vs closedness {}",
            rep.pullback_omega.max_norm,
            worst
        );
    }

    #[test]
    fn relation_theorem_oscillator_and_quartic() {
        // A base field passing the variational residuals pushes to a
        // 1-form passing the standard residuals of the derived Hamiltonian.
        for (l_text, x_text, window) in [
            ("v1^2/2 - q1^2/2", "sqrt(2*1 - q1^2)", 0.9),
            ("v1^2/2 - q1^4/4", "sqrt(2*1 - q1^4/2)", 0.9),
        ] {
            let sys = LagrangianSystem::new(1, l_text).unwrap();
            let x = explicit_field(&[x_text], 1);
            let samples = line_samples(-window, window, 31);
            let lag = lag_hj_residuals(&sys, &x, None, &samples, 1e-8).unwrap();
            assert!(lag.passed(), "{l_text}: lag defects too big");
            let alpha = field_to_section(&sys, &x).unwrap();
            let ham = derived_standard_residual(&sys, &alpha, &samples, 1e-7).unwrap();
            assert!(
                ham.passed(),
                "{l_text}: dh {} closed {}",
                ham.dh.max_norm,
                ham.closedness.max_norm
            );
        }
    }
}
