//! Property tests for the expression layer.

use hjtk_core::expr::{parse, BinOp, Expr, Func, ScalarField};
use proptest::prelude::*;

fn arb_expr(n_vars: usize) -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (0..n_vars).prop_map(Expr::var),
        (-800i32..800).prop_map(|c| Expr::Num(f64::from(c) / 8.0)),
    ];
    leaf.prop_recursive(5, 48, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| Expr::Bin(BinOp::Add, Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| Expr::Bin(BinOp::Sub, Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| Expr::Bin(BinOp::Mul, Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| Expr::Bin(BinOp::Div, Box::new(a), Box::new(b))),
            (inner.clone(), 0u8..4).prop_map(|(a, p)| Expr::Bin(
                BinOp::Pow,
                Box::new(a),
                Box::new(Expr::Num(f64::from(p)))
            )),
            inner.clone().prop_map(|a| Expr::Neg(Box::new(a))),
            (
                inner,
                prop_oneof![
                    Just(Func::Sin),
                    Just(Func::Cos),
                    Just(Func::Exp),
                    Just(Func::Ln),
                    Just(Func::Sqrt),
                    Just(Func::Tanh),
                    Just(Func::Abs)
                ]
            )
                .prop_map(|(a, f)| Expr::Call(f, Box::new(a))),
        ]
    })
}

fn vars3() -> Vec<String> {
    vec!["a1".to_string(), "b2".to_string(), "c3".to_string()]
}

proptest! {
    /// parse . print . parse = parse on the canonical printer.
    #[test]
    fn print_parse_round_trip(raw in arb_expr(3)) {
        let vars = vars3();
        let source = raw.to_text(&vars);
        let parsed = parse(&source, &vars).unwrap();
        let reparsed = parse(&parsed.to_text(&vars), &vars).unwrap();
        prop_assert_eq!(parsed, reparsed);
    }

    /// Hessians are exactly symmetric wherever they evaluate at all.
    #[test]
    fn hessian_exactly_symmetric(
        raw in arb_expr(3),
        x in -2.0f64..2.0,
        y in -2.0f64..2.0,
        z in -2.0f64..2.0,
    ) {
        let field = ScalarField::from_expr(raw, vars3());
        if let Ok(h) = field.hessian(&[x, y, z]) {
            for i in 0..3 {
                for j in 0..3 {
                    prop_assert_eq!(h[(i, j)].to_bits(), h[(j, i)].to_bits());
                }
            }
        }
    }

    /// On polynomials of degree <= 4 with bounded coefficients, gradients
    /// agree with central finite differences of eval componentwise.
    #[test]
    fn gradient_matches_finite_differences(
        monomials in prop::collection::vec(
            (-2.0f64..2.0, prop::collection::vec(0usize..2, 0..5)),
            1..8,
        ),
        x in -1.5f64..1.5,
        y in -1.5f64..1.5,
    ) {
        let vars = vec!["a1".to_string(), "b2".to_string()];
        let mut tree = Expr::num(0.0);
        for (coeff, factors) in &monomials {
            let mut mono = Expr::num(*coeff);
            for v in factors {
                mono = Expr::Bin(BinOp::Mul, Box::new(mono), Box::new(Expr::var(*v)));
            }
            tree = Expr::Bin(BinOp::Add, Box::new(tree), Box::new(mono));
        }
        let field = ScalarField::from_expr(tree, vars);
        let p = [x, y];
        let h = 1e-5;
        let g = field.grad(&p).unwrap();
        for i in 0..2 {
            let mut plus = p;
            let mut minus = p;
            plus[i] += h;
            minus[i] -= h;
            let fd = (field.eval(&plus).unwrap() - field.eval(&minus).unwrap()) / (2.0 * h);
            prop_assert!(
                (g[i] - fd).abs() <= 1e-6 * (1.0 + g[i].abs()),
                "component {}: ad {} vs fd {}",
                i,
                g[i],
                fd
            );
        }
    }
}
