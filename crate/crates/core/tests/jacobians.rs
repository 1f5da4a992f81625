mod common;

use csx_core::model::MatrixKind;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn finite_difference(model: &csx_core::ModelSpec, x: &[f64]) -> DMatrix<f64> {
    let n = x.len();
    let mut j = DMatrix::zeros(n, n);
    for k in 0..n {
        let h = 1e-6 * x[k].abs().max(1.0);
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[k] += h;
        xm[k] -= h;
        let fp = model.apply_map(&xp).unwrap();
        let fm = model.apply_map(&xm).unwrap();
        for i in 0..n {
            j[(i, k)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    j
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn map_jacobian_factorises(seed in any::<u64>(), family in 0usize..5, n in 2usize..5) {
        let mut rng = common::rng(seed);
        let model = common::model_of(family, &mut rng, n);
        let x = common::point_in_box(&mut rng, model.box_corner());
        let dt = model.jacobian_map(&x).unwrap();
        let f = model.growth(&x).unwrap();
        let m = model.matrix_m(&x, MatrixKind::M).unwrap();
        let rhs = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(f)) * (DMatrix::identity(n, n) - m);
        for (a, b) in dt.iter().zip(rhs.iter()) {
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn analytic_jacobian_matches_differences(seed in any::<u64>(), family in 0usize..5, n in 2usize..5) {
        let mut rng = common::rng(seed);
        let model = common::model_of(family, &mut rng, n);
        // keep central differences inside the orthant
        let x: Vec<f64> = common::point_in_box(&mut rng, model.box_corner())
            .into_iter()
            .map(|v| v + 1e-3)
            .collect();
        let an = model.jacobian_map(&x).unwrap();
        let fd = finite_difference(&model, &x);
        let scale = an.amax();
        for (a, b) in an.iter().zip(fd.iter()) {
            prop_assert!((a - b).abs() <= 1e-6 * a.abs().max(scale), "{a} vs {b}");
        }
    }

    #[test]
    fn tilde_matrix_is_a_column_rescaling(seed in any::<u64>(), family in 0usize..5) {
        let mut rng = common::rng(seed);
        let model = common::model_of(family, &mut rng, 3);
        let x: Vec<f64> = common::point_in_box(&mut rng, model.box_corner())
            .into_iter()
            .map(|v| v + 1e-2)
            .collect();
        let m = model.matrix_m(&x, MatrixKind::M).unwrap();
        let mt = model.matrix_m(&x, MatrixKind::Mtilde).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expect = m[(i, j)] * x[j] / x[i];
                prop_assert!((mt[(i, j)] - expect).abs() <= 1e-12 * expect.abs().max(1.0));
            }
        }
    }

    #[test]
    fn map_preserves_faces(seed in any::<u64>(), family in 0usize..5, n in 2usize..5) {
        let mut rng = common::rng(seed);
        let model = common::model_of(family, &mut rng, n);
        let mut x = common::point_in_box(&mut rng, model.box_corner());
        let zero = seed as usize % n;
        x[zero] = 0.0;
        let y = model.apply_map(&x).unwrap();
        prop_assert_eq!(y[zero], 0.0);
        prop_assert!(y.iter().all(|v| *v >= 0.0));
        prop_assert_eq!(csx_core::model::support(&y), csx_core::model::support(&x));
    }
}
