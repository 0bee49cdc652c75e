//! Higher-order Lagrangian dynamics on jet charts: the total-derivative
//! operator, Ostrogradsky momenta and energy, the order-2k Euler-Lagrange
//! flow, and the residuals of the kth-order Hamilton-Jacobi conditions for
//! candidate jet sections.
//!
//! Chart coordinates are named `q{i}_{A}` where `i` is the derivative
//! order and `A` in `1..=n` the configuration component; index `(i, A)`
//! maps to position `i*n + A - 1`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::dynamics::{flow_rk4, FlowResult, VectorFieldSection};
use crate::error::{CoreError, Result};
use crate::expr::{self, Expr, ScalarField};
use crate::lagrangian::SINGULAR_COND_TOL;
use crate::report::{ResidualAccumulator, ResidualReport};
use crate::solve::condition_number;

/// Coordinate names of the order-`r` jet chart over an `n`-dimensional base.
pub fn jet_vars(n: usize, order: usize) -> Vec<String> {
    let mut out = Vec::with_capacity((order + 1) * n);
    for i in 0..=order {
        for a in 1..=n {
            out.push(format!("q{i}_{a}"));
        }
    }
    out
}

/// Flat index of `q{i}_{A}` (`a` is 1-based).
pub fn jet_index(n: usize, i: usize, a: usize) -> usize {
    i * n + (a - 1)
}

/// Lift a field on the order-r chart to the order-(r+1) chart of the same
/// base dimension; indices are unchanged, the chart just grows.
fn pad_to_order(f: &ScalarField, n: usize, order: usize) -> ScalarField {
    let target = jet_vars(n, order);
    assert!(f.dim() <= target.len());
    ScalarField::from_expr(f.expr().clone(), target)
}

/// The total derivative along prolonged curves:
/// `d_T f = sum_{i,A} q_{i+1}^A df/dq_i^A`, one order higher than `f`.
pub fn total_derivative(f: &ScalarField, n: usize) -> Result<ScalarField> {
    if n == 0 || !f.dim().is_multiple_of(n) || f.dim() == 0 {
        return Err(CoreError::Dimension(format!(
            "field over {} variables is not a jet chart over a base of dimension {n}",
            f.dim()
        )));
    }
    let order = f.dim() / n - 1;
    let out_vars = jet_vars(n, order + 1);
    let mut acc = Expr::num(0.0);
    for i in 0..=order {
        for a in 1..=n {
            let partial = f.expr().diff(jet_index(n, i, a));
            acc = expr::add(
                acc,
                expr::mul(Expr::var(jet_index(n, i + 1, a)), partial),
            );
        }
    }
    Ok(ScalarField::from_expr(acc, out_vars))
}

/// A kth-order Lagrangian over the order-k jet chart.
#[derive(Debug, Clone)]
pub struct HigherLagrangian {
    n: usize,
    k: usize,
    l: ScalarField,
}

impl HigherLagrangian {
    pub fn new(n: usize, k: usize, text: &str) -> Result<HigherLagrangian> {
        if !(1..=3).contains(&k) {
            return Err(CoreError::UnsupportedOrder { k });
        }
        let l = ScalarField::compile(text, &jet_vars(n, k))?;
        Ok(HigherLagrangian { n, k, l })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn lagrangian(&self) -> &ScalarField {
        &self.l
    }
}

/// The conjugate momenta
/// `p_A^i = sum_{l=0}^{k-i-1} (-1)^l d_T^l (dL/dq_{i+1+l}^A)`,
/// returned as `momenta[i][A-1]` over the order-(2k-1) chart.
pub fn ostrogradsky_momenta(lag: &HigherLagrangian) -> Result<Vec<Vec<ScalarField>>> {
    let (n, k) = (lag.n, lag.k);
    let top = 2 * k - 1;
    let mut out = Vec::with_capacity(k);
    for i in 0..k {
        let mut row = Vec::with_capacity(n);
        for a in 1..=n {
            let mut acc = Expr::num(0.0);
            for l in 0..=(k - i - 1) {
                let mut term = lag.l.diff(jet_index(n, i + 1 + l, a));
                for _ in 0..l {
                    term = total_derivative(&term, n)?;
                }
                let term = pad_to_order(&term, n, top);
                acc = if l % 2 == 0 {
                    expr::add(acc, term.expr().clone())
                } else {
                    expr::sub(acc, term.expr().clone())
                };
            }
            row.push(ScalarField::from_expr(acc, jet_vars(n, top)));
        }
        out.push(row);
    }
    Ok(out)
}

/// The Ostrogradsky energy `E = sum_{r=1}^{k} q_r^A p_A^{r-1} - L` over
/// the order-(2k-1) chart.
pub fn higher_energy(lag: &HigherLagrangian) -> Result<ScalarField> {
    let (n, k) = (lag.n, lag.k);
    let top = 2 * k - 1;
    let momenta = ostrogradsky_momenta(lag)?;
    let mut acc = Expr::num(0.0);
    for r in 1..=k {
        for a in 1..=n {
            acc = expr::add(
                acc,
                expr::mul(
                    Expr::var(jet_index(n, r, a)),
                    momenta[r - 1][a - 1].expr().clone(),
                ),
            );
        }
    }
    acc = expr::sub(acc, pad_to_order(&lag.l, n, top).expr().clone());
    Ok(ScalarField::from_expr(acc, jet_vars(n, top)))
}

/// Euler-Lagrange expressions `sum_{i=0}^{k} (-1)^i d_T^i (dL/dq_i^A)`
/// over the order-2k chart; affine in the top jet block.
fn euler_lagrange_exprs(lag: &HigherLagrangian) -> Result<Vec<ScalarField>> {
    let (n, k) = (lag.n, lag.k);
    let mut out = Vec::with_capacity(n);
    for a in 1..=n {
        let mut acc = Expr::num(0.0);
        for i in 0..=k {
            let mut term = lag.l.diff(jet_index(n, i, a));
            for _ in 0..i {
                term = total_derivative(&term, n)?;
            }
            let term = pad_to_order(&term, n, 2 * k);
            acc = if i % 2 == 0 {
                expr::add(acc, term.expr().clone())
            } else {
                expr::sub(acc, term.expr().clone())
            };
        }
        out.push(ScalarField::from_expr(acc, jet_vars(n, 2 * k)));
    }
    Ok(out)
}

/// The flow field of the higher-order Euler-Lagrange equations on the
/// order-(2k-1) chart: each jet block advances to the next, and the top
/// derivatives come from solving the (affine) Euler-Lagrange system for
/// `q_{2k}` against its top-order coefficient matrix.
pub fn higher_el_field(lag: &HigherLagrangian) -> Result<VectorFieldSection> {
    let (n, k) = (lag.n, lag.k);
    let el = euler_lagrange_exprs(lag)?;
    let state_dim = 2 * k * n;
    Ok(VectorFieldSection::from_fn(
        jet_vars(n, 2 * k - 1),
        "higher_euler_lagrange",
        Arc::new(move |state: &[f64]| {
            let mut padded = state.to_vec();
            padded.extend(std::iter::repeat_n(0.0, n));
            let mut c = DVector::zeros(n);
            let mut m = DMatrix::zeros(n, n);
            for (a, e) in el.iter().enumerate() {
                let (value, grad) = e.value_and_grad(&padded)?;
                c[a] = value;
                for b in 0..n {
                    m[(a, b)] = grad[state_dim + b];
                }
            }
            let cond = condition_number(&m);
            if cond > SINGULAR_COND_TOL {
                return Err(CoreError::SingularLegendre { cond });
            }
            let accel = m
                .lu()
                .solve(&(-c))
                .ok_or(CoreError::SingularLegendre { cond })?;
            let mut out = state[n..].to_vec();
            out.extend(accel.iter().copied());
            Ok(out)
        }),
    ))
}

/// Integrate the Euler-Lagrange flow from a full jet state of length 2kn.
pub fn higher_el_flow(
    lag: &HigherLagrangian,
    start: &[f64],
    t_end: f64,
    dt: f64,
) -> Result<FlowResult> {
    let field = higher_el_field(lag)?;
    flow_rk4(&field, start, t_end, dt)
}

/// A section of the projection from the order-(2k-1) chart onto the
/// order-(k-1) chart: kn fields over the base giving the jet blocks of
/// order k..2k-1.
#[derive(Debug, Clone)]
pub struct JetSection {
    n: usize,
    k: usize,
    components: Vec<ScalarField>,
}

impl JetSection {
    pub fn new(n: usize, k: usize, components: Vec<ScalarField>) -> Result<JetSection> {
        if !(1..=3).contains(&k) {
            return Err(CoreError::UnsupportedOrder { k });
        }
        if components.len() != k * n {
            return Err(CoreError::Dimension(format!(
                "jet section needs {} components, got {}",
                k * n,
                components.len()
            )));
        }
        let base = jet_vars(n, k - 1);
        for c in &components {
            if c.vars() != base {
                return Err(CoreError::Dimension(
                    "jet section components must live on the order-(k-1) chart".into(),
                ));
            }
        }
        Ok(JetSection { n, k, components })
    }

    pub fn compile(n: usize, k: usize, texts: &[String]) -> Result<JetSection> {
        let base = jet_vars(n, k - 1);
        let components = texts
            .iter()
            .map(|t| ScalarField::compile(t, &base))
            .collect::<Result<Vec<_>>>()?;
        JetSection::new(n, k, components)
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.components
    }

    /// Lift a base point to the full order-(2k-1) state.
    pub fn lift(&self, base: &[f64]) -> Result<Vec<f64>> {
        let mut out = base.to_vec();
        for c in &self.components {
            out.push(c.eval(base)?);
        }
        Ok(out)
    }
}

/// Residuals of the kth-order conditions for a candidate section.
#[derive(Debug, serde::Serialize)]
pub struct HigherHjReport {
    /// Mismatch between the flow's fiber components on the section image
    /// and the chain-rule derivative of the section along the base flow.
    pub tangency: ResidualReport,
    /// Antisymmetry of the pulled-back momentum form on the base.
    pub closedness: ResidualReport,
    /// When a generating scalar is supplied: `dS/dq_i^A - p_A^i o s`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pde: Option<ResidualReport>,
}

impl HigherHjReport {
    pub fn passed(&self) -> bool {
        self.tangency.passed()
            && self.closedness.passed()
            && self.pde.as_ref().is_none_or(ResidualReport::passed)
    }
}

pub fn higher_hj_residuals(
    lag: &HigherLagrangian,
    section: &JetSection,
    generating: Option<&ScalarField>,
    samples: &[Vec<f64>],
    tolerance: f64,
) -> Result<HigherHjReport> {
    let (n, k) = (lag.n, lag.k);
    if section.n != n || section.k != k {
        return Err(CoreError::Dimension(
            "section and Lagrangian orders disagree".into(),
        ));
    }
    if let Some(s) = generating {
        if s.dim() != k * n {
            return Err(CoreError::Dimension(format!(
                "generating scalar over {} variables, expected the order-(k-1) chart of {}",
                s.dim(),
                k * n
            )));
        }
    }
    let field = higher_el_field(lag)?;
    let momenta = ostrogradsky_momenta(lag)?;
    let base_dim = k * n;

    let mut tang = ResidualAccumulator::new("tangency_defect", tolerance);
    let mut closed = ResidualAccumulator::new("pullback_closedness_defect", tolerance);
    let mut pde = generating.map(|_| ResidualAccumulator::new("generating_pde_defect", tolerance));

    for b in samples {
        let run = (|| -> Result<(f64, f64, Option<f64>)> {
            let z = section.lift(b)?;
            let f = field.eval(&z)?;
            let x_base = &f[..base_dim];

            // Section Jacobian on the base.
            let mut js = DMatrix::zeros(base_dim, base_dim);
            for (i, c) in section.components.iter().enumerate() {
                let g = c.grad(b)?;
                for (w, v) in g.iter().enumerate() {
                    js[(i, w)] = *v;
                }
            }

            let mut tangency: f64 = 0.0;
            for i in 0..base_dim {
                let mut chain = 0.0;
                for w in 0..base_dim {
                    chain += js[(i, w)] * x_base[w];
                }
                tangency = tangency.max((f[base_dim + i] - chain).abs());
            }

            // Pullback of the momentum form: beta_u(b) = p_u(lift(b)).
            let mut dbeta = DMatrix::zeros(base_dim, base_dim);
            for (i, row) in momenta.iter().enumerate() {
                for a in 1..=n {
                    let u = jet_index(n, i, a);
                    let g = row[a - 1].grad(&z)?;
                    for w in 0..base_dim {
                        let mut acc = g[w];
                        for j in 0..base_dim {
                            acc += g[base_dim + j] * js[(j, w)];
                        }
                        dbeta[(u, w)] = acc;
                    }
                }
            }
            let mut closedness: f64 = 0.0;
            for u in 0..base_dim {
                for w in (u + 1)..base_dim {
                    closedness = closedness.max((dbeta[(u, w)] - dbeta[(w, u)]).abs());
                }
            }

            let pde_defect = match generating {
                Some(s) => {
                    let ds = s.grad(b)?;
                    let mut worst: f64 = 0.0;
                    for (i, row) in momenta.iter().enumerate() {
                        for a in 1..=n {
                            let u = jet_index(n, i, a);
                            let pv = row[a - 1].eval(&z)?;
                            worst = worst.max((ds[u] - pv).abs());
                        }
                    }
                    Some(worst)
                }
                None => None,
            };
            Ok((tangency, closedness, pde_defect))
        })();
        match run {
            Ok((t, c, p)) => {
                tang.add(b, t);
                closed.add(b, c);
                if let (Some(acc), Some(v)) = (pde.as_mut(), p) {
                    acc.add(b, v);
                }
            }
            Err(CoreError::DomainViolation { .. })
            | Err(CoreError::SingularLegendre { .. })
            | Err(CoreError::NonFinite { .. }) => {
                tang.skip(b);
                closed.skip(b);
                if let Some(acc) = pde.as_mut() {
                    acc.skip(b);
                }
            }
            Err(e) => return Err(e),
        }
    }
    Ok(HigherHjReport {
        tangency: tang.finish(),
        closedness: closed.finish(),
        pde: pde.map(ResidualAccumulator::finish),
    })
}
