//! Compiled real-valued functions of named coordinates.

use nalgebra::DMatrix;

use super::dual::{Dual, Hyper};
use super::parse::parse_with_aliases;
use super::Expr;
use crate::error::{CoreError, Result};

/// A compiled scalar function of an ordered list of named coordinates,
/// differentiable to second order.
///
/// Immutable after compilation; safe to share and evaluate from multiple
/// threads. Domain guards (arguments of `sqrt`/`ln`, bases of non-integer
/// powers) are checked on every evaluation and must be strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    vars: Vec<String>,
    expr: Expr,
    guards: Vec<Expr>,
}

impl ScalarField {
    /// Parse and compile `text` over the given coordinate names.
    pub fn compile(text: &str, vars: &[String]) -> Result<ScalarField> {
        Self::compile_with_aliases(text, vars, &[])
    }

    /// Compile accepting alternative spellings for some coordinates.
    pub fn compile_with_aliases(
        text: &str,
        vars: &[String],
        aliases: &[(String, usize)],
    ) -> Result<ScalarField> {
        let expr = parse_with_aliases(text, vars, aliases)?;
        Ok(Self::from_expr(expr, vars.to_vec()))
    }

    /// Wrap an already-built expression. Guards are derived from the tree.
    pub fn from_expr(expr: Expr, vars: Vec<String>) -> ScalarField {
        if let Some(m) = expr.max_var() {
            assert!(
                m < vars.len(),
                "expression references variable {m} outside the declared list"
            );
        }
        let mut guards = Vec::new();
        expr.collect_guards(&mut guards);
        ScalarField { vars, expr, guards }
    }

    /// A constant field over the given coordinates.
    pub fn constant(value: f64, vars: Vec<String>) -> ScalarField {
        ScalarField::from_expr(Expr::Num(value), vars)
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn dim(&self) -> usize {
        self.vars.len()
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    /// Canonical text form; reparsing it reproduces the same tree.
    pub fn to_text(&self) -> String {
        self.expr.to_text(&self.vars)
    }

    fn check_point(&self, point: &[f64]) -> Result<()> {
        if point.len() != self.vars.len() {
            return Err(CoreError::Dimension(format!(
                "field over {} variables evaluated at a point of length {}",
                self.vars.len(),
                point.len()
            )));
        }
        for (idx, g) in self.guards.iter().enumerate() {
            let v = g.eval::<f64>(point);
            // `!(v > 0)` also catches NaN guard values.
            #[allow(clippy::neg_cmp_op_on_partial_ord)]
            if !(v > 0.0) {
                return Err(CoreError::DomainViolation {
                    guard: idx,
                    value: v,
                });
            }
        }
        Ok(())
    }

    /// Value at a point inside the guarded domain.
    pub fn eval(&self, point: &[f64]) -> Result<f64> {
        self.check_point(point)?;
        Ok(self.expr.eval::<f64>(point))
    }

    /// Exact gradient by one dual-number sweep per coordinate.
    pub fn grad(&self, point: &[f64]) -> Result<Vec<f64>> {
        Ok(self.value_and_grad(point)?.1)
    }

    pub fn value_and_grad(&self, point: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check_point(point)?;
        let n = self.vars.len();
        let mut seeds: Vec<Dual> = point.iter().map(|&x| Dual { re: x, eps: 0.0 }).collect();
        let mut grad = vec![0.0; n];
        let mut value = self.expr.eval::<f64>(point);
        for i in 0..n {
            seeds[i].eps = 1.0;
            let r = self.expr.eval::<Dual>(&seeds);
            seeds[i].eps = 0.0;
            grad[i] = r.eps;
            value = r.re;
        }
        if n == 0 {
            value = self.expr.eval::<f64>(point);
        }
        Ok((value, grad))
    }

    /// Exact Hessian by hyper-dual sweeps; symmetric by construction.
    pub fn hessian(&self, point: &[f64]) -> Result<DMatrix<f64>> {
        self.check_point(point)?;
        let n = self.vars.len();
        let mut h = DMatrix::zeros(n, n);
        let mut seeds: Vec<Hyper> = point.iter().map(|&x| Hyper::seed(x, 0.0, 0.0)).collect();
        for i in 0..n {
            for j in i..n {
                seeds[i].d1 = 1.0;
                seeds[j].d2 = 1.0;
                let r = self.expr.eval::<Hyper>(&seeds);
                seeds[i].d1 = 0.0;
                seeds[j].d2 = 0.0;
                h[(i, j)] = r.d12;
                h[(j, i)] = r.d12;
            }
        }
        Ok(h)
    }

    /// Symbolic partial derivative, as a new field over the same chart.
    pub fn diff(&self, var: usize) -> ScalarField {
        ScalarField::from_expr(self.expr.diff(var), self.vars.clone())
    }

    /// Same expression over renamed coordinates.
    pub fn rename_vars(&self, vars: Vec<String>) -> ScalarField {
        assert_eq!(vars.len(), self.vars.len());
        ScalarField {
            vars,
            expr: self.expr.clone(),
            guards: self.guards.clone(),
        }
    }

    /// Fix a suffix or subset of coordinates to constants, producing a field
    /// over the remaining ones. `keep` lists the indices that survive, in
    /// the order of the new chart; every other variable must have a value in
    /// `fixed` (pairs of old index and value).
    pub fn bind(&self, keep: &[usize], fixed: &[(usize, f64)]) -> ScalarField {
        let vars: Vec<String> = keep.iter().map(|&i| self.vars[i].clone()).collect();
        let expr = self.expr.substitute(&|i| {
            if let Some(pos) = keep.iter().position(|&k| k == i) {
                Expr::Var(pos)
            } else {
                let (_, v) = fixed
                    .iter()
                    .find(|(j, _)| *j == i)
                    .expect("bound variable has a value");
                Expr::Num(*v)
            }
        });
        ScalarField::from_expr(expr, vars)
    }

    /// Compose: replace each coordinate by an expression over a new chart.
    /// `subs[i]` is the replacement for variable `i`, already indexed
    /// against `new_vars`.
    pub fn compose(&self, subs: &[Expr], new_vars: Vec<String>) -> ScalarField {
        assert_eq!(subs.len(), self.vars.len());
        let expr = self.expr.substitute(&|i| subs[i].clone());
        ScalarField::from_expr(expr, new_vars)
    }
}
