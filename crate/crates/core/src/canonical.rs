//! Canonical transformations of phase space built from two-point
//! generating functions S(q, qt), and the checks that go with them:
//! symplecticity of the induced map, equilibration of a Hamiltonian along
//! transformed flows, and the two-way bridge between parameter families of
//! generating scalars and generating functions.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::dynamics::{flow_midpoint, ParamFamily};
use crate::error::{CoreError, Result};
use crate::expr::{names, ScalarField};
use crate::hamiltonian::{hamiltonian_vector_field, HamiltonianSystem};
use crate::report::{ResidualAccumulator, ResidualReport};
use crate::solve::{condition_number, newton_solve};

/// Condition-number threshold for the mixed Hessian of a generator.
pub const DEGENERATE_COND_TOL: f64 = 1e12;

/// Names `qt1..qtn` for the transformed positions.
pub fn transformed_vars(n: usize) -> Vec<String> {
    names("qt", n)
}

/// A two-point generating function over (q1..qn, qt1..qtn). The induced
/// transform solves `dS/dq(q, qt) = p` for qt and sets `pt = -dS/dqt`.
#[derive(Debug, Clone)]
pub struct GeneratingFunction2Point {
    n: usize,
    s2: ScalarField,
}

impl GeneratingFunction2Point {
    pub fn new(n: usize, text: &str) -> Result<GeneratingFunction2Point> {
        let mut vars = names("q", n);
        vars.extend(transformed_vars(n));
        let s2 = ScalarField::compile(text, &vars)?;
        Ok(GeneratingFunction2Point { n, s2 })
    }

    pub fn from_field(n: usize, s2: ScalarField) -> Result<GeneratingFunction2Point> {
        if s2.dim() != 2 * n {
            return Err(CoreError::Dimension(format!(
                "generating function over {} variables for n = {n}",
                s2.dim()
            )));
        }
        Ok(GeneratingFunction2Point { n, s2 })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn field(&self) -> &ScalarField {
        &self.s2
    }

    /// Mixed second-derivative block `d2S/dq dqt` at a joint point.
    pub fn mixed_hessian(&self, joint: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.n;
        let h = self.s2.hessian(joint)?;
        Ok(h.view((0, n), (n, n)).into_owned())
    }

    /// Solve the implicit relations at (q, p): returns `(qt, pt)`.
    /// `guess` seeds the Newton solve for qt and defaults to q itself.
    pub fn induced_transform(&self, qp: &[f64], guess: Option<&[f64]>) -> Result<Vec<f64>> {
        let n = self.n;
        let (q, p) = qp.split_at(n);
        let qt0 = guess.map(<[f64]>::to_vec).unwrap_or_else(|| q.to_vec());
        let qt = newton_solve(
            |qt: &[f64]| {
                let mut joint = q.to_vec();
                joint.extend_from_slice(qt);
                let g = self.s2.grad(&joint)?;
                let m = self.mixed_hessian(&joint)?;
                let cond = condition_number(&m);
                if cond > DEGENERATE_COND_TOL {
                    return Err(CoreError::DegenerateGenerator { cond });
                }
                let r = DVector::from_iterator(n, (0..n).map(|i| g[i] - p[i]));
                Ok((r, m))
            },
            &qt0,
        )?;
        let mut joint = q.to_vec();
        joint.extend_from_slice(&qt);
        let g = self.s2.grad(&joint)?;
        let mut out = qt;
        out.extend((0..n).map(|i| -g[n + i]));
        Ok(out)
    }
}

type MapFn = dyn Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync;

/// A phase-space map `(q, p) -> (qt, pt)` with a pointwise evaluator.
pub struct CanonicalMap {
    n: usize,
    f: Arc<MapFn>,
}

impl CanonicalMap {
    pub fn from_fn(n: usize, f: Arc<MapFn>) -> CanonicalMap {
        CanonicalMap { n, f }
    }

    /// The transform induced by a generator. `guess_fields`, when given,
    /// supply the Newton seed for qt as functions of (q, p); useful when
    /// the default seed `qt = q` starts outside a guarded domain.
    pub fn from_generator(
        g: &GeneratingFunction2Point,
        guess_fields: Option<Vec<ScalarField>>,
    ) -> CanonicalMap {
        let g = g.clone();
        let n = g.n();
        CanonicalMap {
            n,
            f: Arc::new(move |qp: &[f64]| {
                let guess = match &guess_fields {
                    Some(fields) => {
                        let mut out = Vec::with_capacity(fields.len());
                        for f in fields {
                            out.push(f.eval(qp)?);
                        }
                        Some(out)
                    }
                    None => None,
                };
                g.induced_transform(qp, guess.as_deref())
            }),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn eval(&self, qp: &[f64]) -> Result<Vec<f64>> {
        (self.f)(qp)
    }
}

/// Largest entry of `J^T Omega J - Omega` over the samples, with J taken
/// by central finite differences (step 1e-6) of the forward evaluator.
/// This is deliberately independent of how the map was built.
pub fn symplectomorphism_defect(
    map: &CanonicalMap,
    samples: &[Vec<f64>],
    tolerance: f64,
) -> Result<ResidualReport> {
    let n = map.n();
    let dim = 2 * n;
    let h = 1e-6;
    let mut acc = ResidualAccumulator::new("symplectomorphism_defect", tolerance);
    for s in samples {
        let run = (|| -> Result<f64> {
            let mut j = DMatrix::zeros(dim, dim);
            for k in 0..dim {
                let mut plus = s.clone();
                let mut minus = s.clone();
                plus[k] += h;
                minus[k] -= h;
                let fp = map.eval(&plus)?;
                let fm = map.eval(&minus)?;
                for i in 0..dim {
                    j[(i, k)] = (fp[i] - fm[i]) / (2.0 * h);
                }
            }
            // Omega pairs dq^i with dp_i.
            let mut omega = DMatrix::zeros(dim, dim);
            for i in 0..n {
                omega[(i, n + i)] = 1.0;
                omega[(n + i, i)] = -1.0;
            }
            let defect = j.transpose() * &omega * &j - omega;
            Ok(defect.iter().fold(0.0f64, |m, v| m.max(v.abs())))
        })();
        match run {
            Ok(d) => acc.add(s, d),
            Err(CoreError::DomainViolation { .. })
            | Err(CoreError::NewtonDivergence { .. })
            | Err(CoreError::DegenerateGenerator { .. }) => acc.skip(s),
            Err(e) => return Err(e),
        }
    }
    Ok(acc.finish())
}

/// Which transformed blocks an equilibrium check asserts constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AssertedBlocks {
    Both,
    MomentaOnly,
    PositionsOnly,
}

/// Flow drift of the transformed coordinates. The non-asserted block is
/// reported but labelled not asserted.
#[derive(Debug, serde::Serialize)]
pub struct EquilibriumReport {
    pub position_drift: ResidualReport,
    pub momentum_drift: ResidualReport,
    pub asserted: AssertedBlocks,
    pub n_transform_failures: usize,
}

impl EquilibriumReport {
    pub fn passed(&self) -> bool {
        match self.asserted {
            AssertedBlocks::Both => self.position_drift.passed() && self.momentum_drift.passed(),
            AssertedBlocks::MomentaOnly => self.momentum_drift.passed(),
            AssertedBlocks::PositionsOnly => self.position_drift.passed(),
        }
    }

    /// Largest asserted drift.
    pub fn defect(&self) -> f64 {
        match self.asserted {
            AssertedBlocks::Both => self.position_drift.max_norm.max(self.momentum_drift.max_norm),
            AssertedBlocks::MomentaOnly => self.momentum_drift.max_norm,
            AssertedBlocks::PositionsOnly => self.position_drift.max_norm,
        }
    }
}

/// A start for an equilibrium check: a phase-space point plus an optional
/// seed for the first transform solve.
#[derive(Debug, Clone)]
pub struct EquilibriumStart {
    pub state: Vec<f64>,
    pub qt_guess: Option<Vec<f64>>,
}

/// Verify equilibration dynamically: integrate the canonical flow of H
/// from each start, push every sample through the induced transform (warm
/// starting each Newton solve from the previous solution), and report how
/// far the transformed blocks drift from their initial values.
pub fn equilibrium_defect(
    g: &GeneratingFunction2Point,
    sys: &HamiltonianSystem,
    starts: &[EquilibriumStart],
    t_end: f64,
    dt: f64,
    asserted: AssertedBlocks,
    tolerance: f64,
) -> Result<EquilibriumReport> {
    let n = g.n();
    if sys.n() != n {
        return Err(CoreError::Dimension(format!(
            "generator with n = {n} against a system with n = {}",
            sys.n()
        )));
    }
    let z = hamiltonian_vector_field(sys);
    let mut qdrift = ResidualAccumulator::new("transformed_position_drift", tolerance);
    let mut pdrift = ResidualAccumulator::new("transformed_momentum_drift", tolerance);
    let mut n_failures = 0usize;

    for start in starts {
        let run = (|| -> Result<Option<(f64, f64, usize)>> {
            let flow = flow_midpoint(&z, &start.state, t_end, dt)?;
            let first = match g.induced_transform(&start.state, start.qt_guess.as_deref()) {
                Ok(t) => t,
                Err(CoreError::NewtonDivergence { .. })
                | Err(CoreError::DomainViolation { .. }) => return Ok(None),
                Err(e) => return Err(e),
            };
            let mut guess = first[..n].to_vec();
            let mut dq: f64 = 0.0;
            let mut dp: f64 = 0.0;
            let mut failures = 0usize;
            for s in &flow.states {
                match g.induced_transform(s, Some(&guess)) {
                    Ok(t) => {
                        for i in 0..n {
                            dq = dq.max((t[i] - first[i]).abs());
                            dp = dp.max((t[n + i] - first[n + i]).abs());
                        }
                        guess = t[..n].to_vec();
                    }
                    Err(CoreError::NewtonDivergence { .. })
                    | Err(CoreError::DomainViolation { .. }) => failures += 1,
                    Err(e) => return Err(e),
                }
            }
            Ok(Some((dq, dp, failures)))
        })();
        match run {
            Ok(Some((dq, dp, failures))) => {
                n_failures += failures;
                qdrift.add(&start.state, dq);
                pdrift.add(&start.state, dp);
            }
            Ok(None) => {
                qdrift.skip(&start.state);
                pdrift.skip(&start.state);
            }
            Err(CoreError::FlowFailure { .. })
            | Err(CoreError::NonFinite { .. })
            | Err(CoreError::NewtonDivergence { .. }) => {
                qdrift.skip(&start.state);
                pdrift.skip(&start.state);
            }
            Err(e) => return Err(e),
        }
    }
    Ok(EquilibriumReport {
        position_drift: qdrift.finish(),
        momentum_drift: pdrift.finish(),
        asserted,
        n_transform_failures: n_failures,
    })
}

/// Rename the parameters of a generating-scalar family into transformed
/// positions, producing the associated two-point generator.
pub fn complete_to_canonical(
    s_family: &ScalarField,
    n: usize,
) -> Result<GeneratingFunction2Point> {
    if s_family.dim() != 2 * n {
        return Err(CoreError::Dimension(format!(
            "family scalar over {} variables for n = {n} (expected positions plus parameters)",
            s_family.dim()
        )));
    }
    let mut vars = names("q", n);
    vars.extend(transformed_vars(n));
    GeneratingFunction2Point::from_field(n, s_family.rename_vars(vars))
}

/// Freeze the transformed positions back into parameters; the family of
/// position-differentials `alpha_lambda = d_q S(., lambda)`.
pub fn canonical_to_complete(g: &GeneratingFunction2Point) -> Result<ParamFamily> {
    let n = g.n();
    let components: Vec<ScalarField> = (0..n).map(|i| g.field().diff(i)).collect();
    ParamFamily::new(names("q", n), transformed_vars(n), components)
}
