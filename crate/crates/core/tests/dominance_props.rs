mod common;

use csx_core::dominance::{
    analyze_dominance, closed_form_check, nullcline_plane, plane_relation, sampled_relation, thm31_dominant,
    thm31_vanishing, thm32_cascade, ClosedForm, FaceRestriction, Relation, SpeciesVerdict,
};
use csx_core::model::{Family, ModelSpec};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;

/// Plane-family model whose interaction matrix is drawn from a few discrete
/// levels, so that the closed-form systems hold with fair probability.
fn structured(rng: &mut impl Rng, family: usize, n: usize) -> ModelSpec {
    let levels: [f64; 7] = [0.0, 0.1, 0.3, 0.6, 1.0, 1.5, 2.5];
    let a = DMatrix::from_fn(n, n, |i, j| {
        let v = levels[rng.gen_range(0..levels.len())];
        if i == j {
            v.max(0.2)
        } else {
            v
        }
    });
    match family {
        0 => ModelSpec::leslie_gower(a, (0..n).map(|_| rng.gen_range(1.5..3.0)).collect(), None).unwrap(),
        1 => ModelSpec::atkinson_allen(
            a,
            (0..n).map(|_| rng.gen_range(0.1..0.9)).collect(),
            (0..n).map(|_| rng.gen_range(0.5..2.0)).collect(),
            None,
        )
        .unwrap(),
        _ => ModelSpec::ricker(a, (0..n).map(|_| rng.gen_range(0.05..0.3)).collect(), None).unwrap(),
    }
}

type TagFn = fn(usize) -> ClosedForm;

fn tags(family: Family, n: usize) -> Vec<ClosedForm> {
    let (van, dom, cas): (TagFn, TagFn, ClosedForm) = match family {
        Family::LeslieGower => (ClosedForm::E20, ClosedForm::E21, ClosedForm::E23),
        Family::Ricker => (ClosedForm::E31, ClosedForm::E32, ClosedForm::E33),
        _ => (ClosedForm::E25, ClosedForm::E26, ClosedForm::E27),
    };
    let mut out: Vec<ClosedForm> = (0..n).flat_map(|i| [van(i), dom(i)]).collect();
    out.push(cas);
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn closed_forms_imply_geometric_verdicts(seed in any::<u64>(), family in 0usize..3, n in 2usize..5) {
        let mut rng = common::rng(seed);
        let model = structured(&mut rng, family, n);
        let r = model.box_corner().to_vec();
        for tag in tags(model.family(), n) {
            if !closed_form_check(&model, tag).unwrap() {
                continue;
            }
            let geometric = match tag {
                ClosedForm::E20(i) | ClosedForm::E25(i) | ClosedForm::E31(i) => thm31_vanishing(&model, i, &r).unwrap().0,
                ClosedForm::E21(i) | ClosedForm::E26(i) | ClosedForm::E32(i) => thm31_dominant(&model, i, &r).unwrap().0,
                _ => thm32_cascade(&model, n - 1, &r).unwrap().dominant() == Some(n - 1),
            };
            prop_assert!(geometric, "{tag} holds but the geometric test failed");
        }
    }

    #[test]
    fn plane_and_sampled_relations_agree(seed in any::<u64>(), family in 0usize..3, n in 2usize..5) {
        let mut rng = common::rng(seed);
        let model = structured(&mut rng, family, n);
        let r = model.box_corner().to_vec();
        let i = rng.gen_range(0..n);
        let j = (i + rng.gen_range(1..n)) % n;
        let face: Vec<usize> = (0..n).filter(|k| *k != i && *k != j && rng.gen_bool(0.4)).collect();
        let face = FaceRestriction::new(face);
        let p = nullcline_plane(&model, i).unwrap();
        let q = nullcline_plane(&model, j).unwrap();
        let exact = plane_relation(&p, &q, &r, &face).unwrap();
        let sampled = sampled_relation(&model, i, j, &r, &face, 32).unwrap();
        prop_assert_eq!(exact.relation, sampled.relation);
    }

    #[test]
    fn at_most_one_dominant(seed in any::<u64>(), family in 0usize..3, n in 2usize..5) {
        let mut rng = common::rng(seed);
        let model = structured(&mut rng, family, n);
        let v = analyze_dominance(&model, model.box_corner()).unwrap();
        let dominant = v.per_species.iter().filter(|s| **s == SpeciesVerdict::Dominant).count();
        prop_assert!(dominant <= 1);
        if dominant == 1 {
            prop_assert!(v.per_species.iter().all(|s| *s != SpeciesVerdict::Undetermined));
        }
    }

    #[test]
    fn relations_are_antisymmetric(seed in any::<u64>(), family in 0usize..3) {
        let mut rng = common::rng(seed);
        let model = structured(&mut rng, family, 3);
        let r = model.box_corner().to_vec();
        let p = nullcline_plane(&model, 0).unwrap();
        let q = nullcline_plane(&model, 1).unwrap();
        let ab = plane_relation(&p, &q, &r, &FaceRestriction::none()).unwrap().relation;
        let ba = plane_relation(&q, &p, &r, &FaceRestriction::none()).unwrap().relation;
        if ab == Relation::StrictlyBelow {
            prop_assert_eq!(ba, Relation::StrictlyAbove);
        }
        if ab == Relation::StrictlyAbove {
            prop_assert_eq!(ba, Relation::StrictlyBelow);
        }
    }
}
