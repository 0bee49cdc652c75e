//! First-order scalar field theories in covariant momentum form: the field
//! Legendre map, the two Hamilton-Jacobi PDE residuals on (x, y) grids, and
//! a method-of-lines evolver for the covariant field equations of
//! 1+1-dimensional theories on a periodic spatial domain.
//!
//! Charts: base `x1..xm`, fiber `y1..yn`, velocities `y{a}_{i}` and
//! momenta `p{a}_{i}` (component-major). For m = 2, n = 1 the spellings
//! `t, x, y, yt, yx, pt, px` are accepted as aliases.

use nalgebra::{DMatrix, DVector};

use crate::error::{CoreError, Result};
use crate::expr::ScalarField;
use crate::lagrangian::SINGULAR_COND_TOL;
use crate::report::{ResidualAccumulator, ResidualReport};
use crate::solve::{condition_number, newton_solve};

fn check_dims(m: usize, n: usize) -> Result<()> {
    if !(1..=2).contains(&m) || !(1..=2).contains(&n) {
        return Err(CoreError::Dimension(format!(
            "supported base and fiber dimensions are 1 and 2, got m = {m}, n = {n}"
        )));
    }
    Ok(())
}

/// Base-plus-fiber chart `x1..xm, y1..yn` for W and jet-field components.
pub fn basefiber_vars(m: usize, n: usize) -> Vec<String> {
    let mut v: Vec<String> = (1..=m).map(|i| format!("x{i}")).collect();
    v.extend((1..=n).map(|a| format!("y{a}")));
    v
}

fn full_vars(m: usize, n: usize, fiber_prefix: &str) -> Vec<String> {
    let mut v = basefiber_vars(m, n);
    for a in 1..=n {
        for i in 1..=m {
            v.push(format!("{fiber_prefix}{a}_{i}"));
        }
    }
    v
}

/// Chart of a field Lagrangian: `x, y, y{a}_{i}`.
pub fn velocity_vars(m: usize, n: usize) -> Vec<String> {
    full_vars(m, n, "y")
}

/// Chart of a field Hamiltonian: `x, y, p{a}_{i}`.
pub fn momentum_vars(m: usize, n: usize) -> Vec<String> {
    full_vars(m, n, "p")
}

fn fiber_index(m: usize, n: usize, a: usize, i: usize) -> usize {
    m + n + (a - 1) * m + (i - 1)
}

fn aliases(m: usize, n: usize, fiber_prefix: &str) -> Vec<(String, usize)> {
    let mut out = Vec::new();
    if m == 2 {
        out.push(("t".to_string(), 0));
        out.push(("x".to_string(), 1));
    }
    if n == 1 {
        out.push(("y".to_string(), m));
    }
    if m == 2 && n == 1 {
        out.push((format!("{fiber_prefix}t"), fiber_index(m, n, 1, 1)));
        out.push((format!("{fiber_prefix}x"), fiber_index(m, n, 1, 2)));
    }
    out
}

/// A field theory over an m-dimensional base with n field components,
/// described by a Lagrangian density, a covariant Hamiltonian, or both.
#[derive(Debug, Clone)]
pub struct FieldTheory {
    m: usize,
    n: usize,
    lagrangian: Option<ScalarField>,
    hamiltonian: Option<ScalarField>,
}

impl FieldTheory {
    pub fn from_lagrangian(m: usize, n: usize, text: &str) -> Result<FieldTheory> {
        check_dims(m, n)?;
        let l = ScalarField::compile_with_aliases(text, &velocity_vars(m, n), &aliases(m, n, "y"))?;
        Ok(FieldTheory {
            m,
            n,
            lagrangian: Some(l),
            hamiltonian: None,
        })
    }

    pub fn from_hamiltonian(m: usize, n: usize, text: &str) -> Result<FieldTheory> {
        check_dims(m, n)?;
        let h = ScalarField::compile_with_aliases(text, &momentum_vars(m, n), &aliases(m, n, "p"))?;
        Ok(FieldTheory {
            m,
            n,
            lagrangian: None,
            hamiltonian: Some(h),
        })
    }

    pub fn with_hamiltonian(mut self, text: &str) -> Result<FieldTheory> {
        let h = ScalarField::compile_with_aliases(
            text,
            &momentum_vars(self.m, self.n),
            &aliases(self.m, self.n, "p"),
        )?;
        self.hamiltonian = Some(h);
        Ok(self)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lagrangian(&self) -> Result<&ScalarField> {
        self.lagrangian
            .as_ref()
            .ok_or_else(|| CoreError::Unsupported("theory has no Lagrangian".into()))
    }

    pub fn hamiltonian(&self) -> Result<&ScalarField> {
        self.hamiltonian
            .as_ref()
            .ok_or_else(|| CoreError::Unsupported("theory has no Hamiltonian".into()))
    }
}

/// Momenta `p_a^i = dL/dy^a_i` at a full point `(x, y, v)`.
pub fn field_legendre(theory: &FieldTheory, point: &[f64]) -> Result<Vec<f64>> {
    let l = theory.lagrangian()?;
    let g = l.grad(point)?;
    Ok(g[theory.m + theory.n..].to_vec())
}

/// Velocity-block Hessian of the Lagrangian at a full point.
pub fn field_fiber_hessian(theory: &FieldTheory, point: &[f64]) -> Result<DMatrix<f64>> {
    let l = theory.lagrangian()?;
    let mn = theory.m * theory.n;
    let off = theory.m + theory.n;
    let h = l.hessian(point)?;
    Ok(h.view((off, off), (mn, mn)).into_owned())
}

/// Newton inverse of the field Legendre map: velocities with
/// `dL/dy^a_i(x, y, v) = p`, seeded from `p` by default.
pub fn field_legendre_inverse(
    theory: &FieldTheory,
    xy: &[f64],
    p: &[f64],
    seed: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let l = theory.lagrangian()?.clone();
    let mn = theory.m * theory.n;
    let off = theory.m + theory.n;
    if xy.len() != off || p.len() != mn {
        return Err(CoreError::Dimension("legendre inverse point sizes".into()));
    }
    let v0 = seed.map(<[f64]>::to_vec).unwrap_or_else(|| p.to_vec());
    newton_solve(
        |v: &[f64]| {
            let mut point = xy.to_vec();
            point.extend_from_slice(v);
            let g = l.grad(&point)?;
            let hvv = field_fiber_hessian(theory, &point)?;
            let cond = condition_number(&hvv);
            if cond > SINGULAR_COND_TOL {
                return Err(CoreError::SingularLegendre { cond });
            }
            let r = DVector::from_iterator(mn, (0..mn).map(|i| g[off + i] - p[i]));
            Ok((r, hvv))
        },
        &v0,
    )
}

/// Covariant Hamiltonian derived pointwise from the Lagrangian:
/// `H(x, y, p) = p . v - L(x, y, v)` with `v` the inverse Legendre image.
pub fn derived_field_hamiltonian(theory: &FieldTheory, xy: &[f64], p: &[f64]) -> Result<f64> {
    let v = field_legendre_inverse(theory, xy, p, None)?;
    let mut point = xy.to_vec();
    point.extend_from_slice(&v);
    let l = theory.lagrangian()?.eval(&point)?;
    let dot: f64 = p.iter().zip(&v).map(|(a, b)| a * b).sum();
    Ok(dot - l)
}

/// A Hamilton-Jacobi candidate: the m potential components W^i over
/// (x, y), optionally with a jet field psi^a_i over (x, y).
#[derive(Debug, Clone)]
pub struct FieldHJCandidate {
    pub w: Vec<ScalarField>,
    pub psi: Option<Vec<ScalarField>>,
}

impl FieldHJCandidate {
    pub fn compile(m: usize, n: usize, w: &[String], psi: Option<&[String]>) -> Result<Self> {
        check_dims(m, n)?;
        let vars = basefiber_vars(m, n);
        let al = aliases(m, n, "y")
            .into_iter()
            .filter(|(_, i)| *i < vars.len())
            .collect::<Vec<_>>();
        if w.len() != m {
            return Err(CoreError::Dimension(format!(
                "candidate needs {m} potential components, got {}",
                w.len()
            )));
        }
        let w = w
            .iter()
            .map(|t| ScalarField::compile_with_aliases(t, &vars, &al))
            .collect::<Result<Vec<_>>>()?;
        let psi = match psi {
            Some(texts) => {
                if texts.len() != m * n {
                    return Err(CoreError::Dimension(format!(
                        "jet field needs {} components, got {}",
                        m * n,
                        texts.len()
                    )));
                }
                Some(
                    texts
                        .iter()
                        .map(|t| ScalarField::compile_with_aliases(t, &vars, &al))
                        .collect::<Result<Vec<_>>>()?,
                )
            }
            None => None,
        };
        Ok(FieldHJCandidate { w, psi })
    }
}

/// Lagrangian-side PDE residual on a grid of (x, y) points:
/// `sum_i dW^i/dx^i + sum_{a,i} psi^a_i dW^i/dy^a - L(x, y, psi)`.
pub fn lag_field_hj_residual(
    theory: &FieldTheory,
    cand: &FieldHJCandidate,
    samples: &[Vec<f64>],
    tolerance: f64,
) -> Result<ResidualReport> {
    let l = theory.lagrangian()?;
    let (m, n) = (theory.m, theory.n);
    let psi = cand
        .psi
        .as_ref()
        .ok_or_else(|| CoreError::Unsupported("Lagrangian residual needs a jet field".into()))?;
    let mut acc = ResidualAccumulator::new("lag_field_hj_residual", tolerance);
    for s in samples {
        let run = (|| -> Result<f64> {
            let mut psi_vals = Vec::with_capacity(m * n);
            for f in psi {
                psi_vals.push(f.eval(s)?);
            }
            let mut r = 0.0;
            for (idx, wi) in cand.w.iter().enumerate() {
                let g = wi.grad(s)?;
                r += g[idx];
                for a in 1..=n {
                    r += psi_vals[(a - 1) * m + idx] * g[m + a - 1];
                }
            }
            let mut point = s.clone();
            point.extend_from_slice(&psi_vals);
            r -= l.eval(&point)?;
            Ok(r.abs())
        })();
        match run {
            Ok(v) => acc.add(s, v),
            Err(CoreError::DomainViolation { .. }) | Err(CoreError::NonFinite { .. }) => {
                acc.skip(s)
            }
            Err(e) => return Err(e),
        }
    }
    Ok(acc.finish())
}

/// The section induced by a potential: `s_a^i = dW^i/dy^a` at one point,
/// in momentum component order.
pub fn induced_section(cand: &FieldHJCandidate, m: usize, n: usize, xy: &[f64]) -> Result<Vec<f64>> {
    let mut out = vec![0.0; m * n];
    for (idx, wi) in cand.w.iter().enumerate() {
        let g = wi.grad(xy)?;
        for a in 1..=n {
            out[(a - 1) * m + idx] = g[m + a - 1];
        }
    }
    Ok(out)
}

/// Hamiltonian-side PDE residual:
/// `sum_i dW^i/dx^i + H(x, y, dW/dy)` with the induced section substituted.
pub fn ham_field_hj_residual(
    theory: &FieldTheory,
    cand: &FieldHJCandidate,
    samples: &[Vec<f64>],
    tolerance: f64,
) -> Result<ResidualReport> {
    let h = theory.hamiltonian()?;
    let (m, n) = (theory.m, theory.n);
    let mut acc = ResidualAccumulator::new("ham_field_hj_residual", tolerance);
    for s in samples {
        let run = (|| -> Result<f64> {
            let sec = induced_section(cand, m, n, s)?;
            let mut r = 0.0;
            for (idx, wi) in cand.w.iter().enumerate() {
                r += wi.grad(s)?[idx];
            }
            let mut point = s.clone();
            point.extend_from_slice(&sec);
            r += h.eval(&point)?;
            Ok(r.abs())
        })();
        match run {
            Ok(v) => acc.add(s, v),
            Err(CoreError::DomainViolation { .. }) | Err(CoreError::NonFinite { .. }) => {
                acc.skip(s)
            }
            Err(e) => return Err(e),
        }
    }
    Ok(acc.finish())
}

/// Initial data for the 1+1-dimensional evolver on the periodic domain
/// `[x_min, x_max)`, sampled on `len` equidistant nodes per component.
#[derive(Debug, Clone)]
pub struct DdwInitial {
    pub x_min: f64,
    pub x_max: f64,
    /// Field values per component: `y[a][node]`.
    pub y: Vec<Vec<f64>>,
    /// Temporal momenta `p{a}_1` per component.
    pub p_t: Vec<Vec<f64>>,
    /// Spatial momenta `p{a}_2` per component.
    pub p_x: Vec<Vec<f64>>,
}

/// A saved snapshot of the evolving fields.
#[derive(Debug, Clone)]
pub struct DdwState {
    pub t: f64,
    pub y: Vec<Vec<f64>>,
    pub p_t: Vec<Vec<f64>>,
    pub p_x: Vec<Vec<f64>>,
}

#[derive(Debug)]
pub struct DdwResult {
    pub xs: Vec<f64>,
    pub snapshots: Vec<DdwState>,
    /// Max-norm of the spatial-derivative constraint at each snapshot.
    pub constraint_drift: Vec<f64>,
    /// Total field energy at each snapshot.
    pub energy: Vec<f64>,
    pub initial_constraint: f64,
    pub cfl_warning: bool,
}

impl DdwResult {
    pub fn max_constraint_drift(&self) -> f64 {
        self.constraint_drift.iter().fold(0.0f64, |m, v| m.max(*v))
    }

    pub fn max_energy_drift(&self) -> f64 {
        let e0 = self.energy.first().copied().unwrap_or(0.0);
        self.energy
            .iter()
            .fold(0.0f64, |m, v| m.max((v - e0).abs()))
    }
}

/// Precompiled partial derivatives of H used by the evolver.
struct HamPartials {
    h: ScalarField,
    h_y: Vec<ScalarField>,
    h_pt: Vec<ScalarField>,
    h_px: Vec<ScalarField>,
    h_px_px: Vec<Vec<ScalarField>>,
    h_px_y: Vec<Vec<ScalarField>>,
    h_px_pt: Vec<Vec<ScalarField>>,
    h_px_x1: Vec<ScalarField>,
}

impl HamPartials {
    fn build(h: &ScalarField, m: usize, n: usize) -> HamPartials {
        let y = |a: usize| m + (a - 1);
        let pt = |a: usize| fiber_index(m, n, a, 1);
        let px = |a: usize| fiber_index(m, n, a, 2);
        let h_px: Vec<ScalarField> = (1..=n).map(|a| h.diff(px(a))).collect();
        HamPartials {
            h: h.clone(),
            h_y: (1..=n).map(|a| h.diff(y(a))).collect(),
            h_pt: (1..=n).map(|a| h.diff(pt(a))).collect(),
            h_px_px: (1..=n)
                .map(|a| (1..=n).map(|b| h_px[a - 1].diff(px(b))).collect())
                .collect(),
            h_px_y: (1..=n)
                .map(|a| (1..=n).map(|b| h_px[a - 1].diff(y(b))).collect())
                .collect(),
            h_px_pt: (1..=n)
                .map(|a| (1..=n).map(|b| h_px[a - 1].diff(pt(b))).collect())
                .collect(),
            h_px_x1: (1..=n).map(|a| h_px[a - 1].diff(0)).collect(),
            h_px,
        }
    }
}

/// Centered periodic difference of one nodal array.
fn dx_periodic(f: &[f64], dx: f64) -> Vec<f64> {
    let len = f.len();
    (0..len)
        .map(|j| (f[(j + 1) % len] - f[(j + len - 1) % len]) / (2.0 * dx))
        .collect()
}

struct Mesh {
    n: usize,
    nodes: usize,
    xs: Vec<f64>,
    dx: f64,
}

type Fields = Vec<Vec<f64>>; // [component][node]

struct DdwFields {
    y: Fields,
    p_t: Fields,
    p_x: Fields,
}

fn ddw_derivative(
    partials: &HamPartials,
    mesh: &Mesh,
    t: f64,
    f: &DdwFields,
) -> Result<DdwFields> {
    let n = mesh.n;
    let nodes = mesh.nodes;
    let point = |j: usize, f: &DdwFields| {
        let mut p = vec![t, mesh.xs[j]];
        for a in 0..n {
            p.push(f.y[a][j]);
        }
        for a in 0..n {
            p.push(f.p_t[a][j]);
            p.push(f.p_x[a][j]);
        }
        p
    };

    // Nodal values of H_pt feed the spatial derivative below.
    let mut hpt_vals = vec![vec![0.0; nodes]; n];
    let mut dy = vec![vec![0.0; nodes]; n];
    let mut dpt = vec![vec![0.0; nodes]; n];
    for a in 0..n {
        let dpx_dx = dx_periodic(&f.p_x[a], mesh.dx);
        for j in 0..nodes {
            let p = point(j, f);
            let hpt = partials.h_pt[a].eval(&p)?;
            hpt_vals[a][j] = hpt;
            dy[a][j] = hpt;
            dpt[a][j] = -partials.h_y[a].eval(&p)? - dpx_dx[j];
        }
    }

    // Differentiated constraint closes the spatial momenta:
    // H_px_px * dpx = Dx(H_pt) - H_px_y dy - H_px_pt dpt - H_px_x1.
    let mut dpx = vec![vec![0.0; nodes]; n];
    let hpt_dx: Vec<Vec<f64>> = (0..n).map(|a| dx_periodic(&hpt_vals[a], mesh.dx)).collect();
    for j in 0..nodes {
        let p = point(j, f);
        let mut mat = DMatrix::zeros(n, n);
        let mut rhs = DVector::zeros(n);
        for a in 0..n {
            let mut acc = hpt_dx[a][j] - partials.h_px_x1[a].eval(&p)?;
            for b in 0..n {
                mat[(a, b)] = partials.h_px_px[a][b].eval(&p)?;
                acc -= partials.h_px_y[a][b].eval(&p)? * dy[b][j];
                acc -= partials.h_px_pt[a][b].eval(&p)? * dpt[b][j];
            }
            rhs[a] = acc;
        }
        let cond = condition_number(&mat);
        if cond > SINGULAR_COND_TOL {
            return Err(CoreError::SingularLegendre { cond });
        }
        let sol = mat
            .lu()
            .solve(&rhs)
            .ok_or(CoreError::SingularLegendre { cond })?;
        for a in 0..n {
            dpx[a][j] = sol[a];
        }
    }
    Ok(DdwFields {
        y: dy,
        p_t: dpt,
        p_x: dpx,
    })
}

fn axpy(f: &DdwFields, k: &DdwFields, c: f64) -> DdwFields {
    let comb = |a: &Fields, b: &Fields| {
        a.iter()
            .zip(b)
            .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x + c * y).collect())
            .collect()
    };
    DdwFields {
        y: comb(&f.y, &k.y),
        p_t: comb(&f.p_t, &k.p_t),
        p_x: comb(&f.p_x, &k.p_x),
    }
}

fn constraint_norm(partials: &HamPartials, mesh: &Mesh, t: f64, f: &DdwFields) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for a in 0..mesh.n {
        let ydx = dx_periodic(&f.y[a], mesh.dx);
        for (j, ydx_j) in ydx.iter().enumerate() {
            let mut p = vec![t, mesh.xs[j]];
            for b in 0..mesh.n {
                p.push(f.y[b][j]);
            }
            for b in 0..mesh.n {
                p.push(f.p_t[b][j]);
                p.push(f.p_x[b][j]);
            }
            worst = worst.max((ydx_j - partials.h_px[a].eval(&p)?).abs());
        }
    }
    Ok(worst)
}

/// Total energy, with density `H - p_x . dH/dp_x` summed over the nodes.
fn total_energy(partials: &HamPartials, mesh: &Mesh, t: f64, f: &DdwFields) -> Result<f64> {
    let mut e = 0.0;
    for j in 0..mesh.nodes {
        let mut p = vec![t, mesh.xs[j]];
        for b in 0..mesh.n {
            p.push(f.y[b][j]);
        }
        for b in 0..mesh.n {
            p.push(f.p_t[b][j]);
            p.push(f.p_x[b][j]);
        }
        let mut density = partials.h.eval(&p)?;
        for a in 0..mesh.n {
            density -= f.p_x[a][j] * partials.h_px[a].eval(&p)?;
        }
        e += density;
    }
    Ok(e * mesh.dx)
}

/// Evolve a 1+1-dimensional theory by the method of lines: centered
/// spatial differences on the periodic grid, classical RK4 in time. The
/// state carries (y, p_t, p_x); the spatial-momentum equation comes from
/// differentiating the constraint `dy/dx = dH/dp_x` in time, and the
/// constraint itself is monitored as a drift diagnostic. Snapshots are
/// kept every `save_every` steps (and at the final time).
pub fn ddw_evolve(
    theory: &FieldTheory,
    init: &DdwInitial,
    t_end: f64,
    dt: f64,
    save_every: usize,
) -> Result<DdwResult> {
    if theory.m != 2 {
        return Err(CoreError::Unsupported(
            "field evolution requires a 1+1-dimensional theory".into(),
        ));
    }
    let h = theory.hamiltonian()?;
    let n = theory.n;
    if init.y.len() != n || init.p_t.len() != n || init.p_x.len() != n {
        return Err(CoreError::Dimension("initial data component count".into()));
    }
    let nodes = init.y[0].len();
    if nodes < 4 {
        return Err(CoreError::Dimension("need at least 4 grid nodes".into()));
    }
    for arr in init.y.iter().chain(&init.p_t).chain(&init.p_x) {
        if arr.len() != nodes {
            return Err(CoreError::Dimension("ragged initial data".into()));
        }
    }
    let dx = (init.x_max - init.x_min) / nodes as f64;
    let mesh = Mesh {
        n,
        nodes,
        xs: (0..nodes).map(|j| init.x_min + j as f64 * dx).collect(),
        dx,
    };
    let partials = HamPartials::build(h, 2, n);
    let cfl_warning = dt > dx;

    let mut state = DdwFields {
        y: init.y.clone(),
        p_t: init.p_t.clone(),
        p_x: init.p_x.clone(),
    };
    let initial_constraint = constraint_norm(&partials, &mesh, 0.0, &state)?;

    let ratio = t_end / dt;
    let n_steps = if (ratio - ratio.round()).abs() < 1e-9 {
        ratio.round() as usize
    } else {
        ratio.ceil() as usize
    }
    .max(1);
    let save_every = save_every.max(1);

    let mut snapshots = Vec::new();
    let mut constraint_drift = Vec::new();
    let mut energy = Vec::new();
    let mut save = |t: f64, f: &DdwFields| -> Result<()> {
        snapshots.push(DdwState {
            t,
            y: f.y.clone(),
            p_t: f.p_t.clone(),
            p_x: f.p_x.clone(),
        });
        constraint_drift.push(constraint_norm(&partials, &mesh, t, f)?);
        energy.push(total_energy(&partials, &mesh, t, f)?);
        Ok(())
    };
    save(0.0, &state)?;

    let mut t = 0.0;
    for step in 1..=n_steps {
        let t_next = if step == n_steps {
            t_end
        } else {
            step as f64 * dt
        };
        let h_step = t_next - t;
        let k1 = ddw_derivative(&partials, &mesh, t, &state)?;
        let k2 = ddw_derivative(&partials, &mesh, t + 0.5 * h_step, &axpy(&state, &k1, 0.5 * h_step))?;
        let k3 = ddw_derivative(&partials, &mesh, t + 0.5 * h_step, &axpy(&state, &k2, 0.5 * h_step))?;
        let k4 = ddw_derivative(&partials, &mesh, t_next, &axpy(&state, &k3, h_step))?;
        let mut next = axpy(&state, &k1, h_step / 6.0);
        next = axpy(&next, &k2, h_step / 3.0);
        next = axpy(&next, &k3, h_step / 3.0);
        next = axpy(&next, &k4, h_step / 6.0);
        for arr in next.y.iter().chain(&next.p_t).chain(&next.p_x) {
            if arr.iter().any(|v| !v.is_finite()) {
                return Err(CoreError::NonFinite { t: t_next });
            }
        }
        state = next;
        t = t_next;
        if step % save_every == 0 || step == n_steps {
            save(t, &state)?;
        }
    }

    Ok(DdwResult {
        xs: mesh.xs,
        snapshots,
        constraint_drift,
        energy,
        initial_constraint,
        cfl_warning,
    })
}

/// Sample a single-variable profile on equidistant nodes of `[lo, hi)`.
pub fn sample_profile(f: &ScalarField, lo: f64, hi: f64, nodes: usize) -> Result<Vec<f64>> {
    if f.dim() != 1 {
        return Err(CoreError::Dimension(
            "initial profiles are functions of one spatial variable".into(),
        ));
    }
    let dx = (hi - lo) / nodes as f64;
    (0..nodes).map(|j| f.eval(&[lo + j as f64 * dx])).collect()
}
