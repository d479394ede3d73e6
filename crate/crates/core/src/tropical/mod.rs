//! The (max,+) expression calculus: parsing, exact evaluation and the
//! difference-of-max-plus-polynomials normal form.

mod expr;
mod rational;

pub use expr::{TropicalExpr, VarNames};
pub use rational::{normalize, tropical_product, TropicalMonomial, TropicalRational};

/// Expression text of the max-plus Lyness map `max(max(0, y) - x, -x)`.
pub const LYNESS: &str = "max(max(0,y)-x, -x)";


#[cfg(test)]
mod properties {
    use super::strategies::{expr, point};
    use super::*;
    use crate::exact::Q;
    use num_bigint::BigInt;
    use proptest::prelude::*;

    const ARITY: usize = 3;

    proptest! {
        #[test]
        fn normal_form_agrees_with_direct_evaluation(
            e in expr(ARITY),
            pts in prop::collection::vec(point(ARITY), 100),
        ) {
            let nf = normalize(&e, ARITY).unwrap();
            for p in &pts {
                prop_assert_eq!(nf.eval(p).unwrap(), e.eval(p).unwrap());
            }
        }

        #[test]
        fn printing_then_parsing_is_identity(e in expr(ARITY)) {
            let names = VarNames::default_for(ARITY);
            let text = e.to_text(&names);
            prop_assert_eq!(TropicalExpr::parse_with(&text, &names).unwrap(), e);
        }

        #[test]
        fn numerator_and_denominator_are_convex(e in expr(ARITY), a in point(ARITY), b in point(ARITY)) {
            let nf = normalize(&e, ARITY).unwrap();
            let half = Q::new(BigInt::from(1), BigInt::from(2));
            let mid: Vec<Q> = a.iter().zip(&b).map(|(x, y)| (x + y) * &half).collect();
            for side in [TropicalRational::eval_numerator, TropicalRational::eval_denominator] {
                let fa = side(&nf, &a).unwrap();
                let fb = side(&nf, &b).unwrap();
                let fm = side(&nf, &mid).unwrap();
                prop_assert!(fm <= (fa + fb) * &half);
            }
        }
    }
}
