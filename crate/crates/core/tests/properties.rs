use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stiefel_laplace::ambient::{format_matrix, parse_matrix};
use stiefel_laplace::functions::parse_expression;
use stiefel_laplace::functions::random::{random_field, FieldKind};
use stiefel_laplace::laplace::{laplace_closed, laplace_frame_oracle, rel_err};
use stiefel_laplace::tangent::{apply_projector, tangency_residual};
use stiefel_laplace::{random_stiefel_with, unvec, vec, DenseMatrix, ExpressionField, ScalarField};

fn dims() -> impl Strategy<Value = (usize, usize)> {
    (1usize..=6).prop_flat_map(|n| (Just(n), 1..=n))
}

fn kind() -> impl Strategy<Value = FieldKind> {
    prop::sample::select(FieldKind::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn closed_matches_frame((n, p) in dims(), kind in kind(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_stiefel_with(n, p, &mut rng).unwrap();
        let f = random_field(kind, n, p, &mut rng).unwrap();
        let closed = laplace_closed(&f, &u).unwrap().value;
        let frame = laplace_frame_oracle(&f, &u).unwrap().value;
        prop_assert!(rel_err(closed, frame) <= 1e-9, "{closed} vs {frame}");
    }

    #[test]
    fn projection_is_tangent_and_idempotent((n, p) in dims(), seed in any::<u64>(),
                                            w in prop::collection::vec(-10.0f64..10.0, 36)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_stiefel_with(n, p, &mut rng).unwrap();
        let w = nalgebra::DMatrix::from_column_slice(n, p, &w[..n * p]);
        let v = apply_projector(&u, &w).unwrap();
        prop_assert!(tangency_residual(&u, &v) <= 1e-12 * (1.0 + w.amax()));
        let vv = apply_projector(&u, &v).unwrap();
        prop_assert!((vv - &v).amax() <= 1e-12 * (1.0 + w.amax()));
    }

    #[test]
    fn vec_unvec_round_trip(rows in 1usize..6, cols in 1usize..6, data in prop::collection::vec(-1e6f64..1e6, 25)) {
        let m = nalgebra::DMatrix::from_column_slice(rows, cols, &data[..rows * cols]);
        prop_assert_eq!(unvec(&vec(&m), rows, cols).unwrap(), m);
    }

    #[test]
    fn matrix_text_round_trip(rows in 1usize..6, cols in 1usize..6, data in prop::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), 25)) {
        let m = nalgebra::DMatrix::from_column_slice(rows, cols, &data[..rows * cols]);
        let parsed = parse_matrix(&format_matrix(&m)).unwrap();
        prop_assert_eq!(parsed, DenseMatrix::new(m).unwrap());
    }

    #[test]
    fn expression_display_reparses((n, p) in dims(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let src = stiefel_laplace::functions::random::random_transcendental_source(n, p, &mut rng);
        let e = parse_expression(&src, n, p).unwrap();
        let again = parse_expression(&e.to_string(), n, p).unwrap();
        prop_assert_eq!(&again, &e);
        let u = random_stiefel_with(n, p, &mut rng).unwrap();
        let a = ExpressionField::from_expr(e, n, p).unwrap().value(u.as_matrix()).unwrap();
        let b = ExpressionField::from_expr(again, n, p).unwrap().value(u.as_matrix()).unwrap();
        prop_assert_eq!(a, b);
    }
}
