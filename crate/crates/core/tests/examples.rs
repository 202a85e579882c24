use pptdisc::cone::{self, Classification};
use pptdisc::discrimination::{
    corollary1_check, corollary2_classify, dual_qppt, optimal_global, optimal_ppt, theorem3_witness_check,
    theorem4_classify, verify_joint_optimality, Evidence, Measurement, Outcome,
};
use pptdisc::ensembles::{
    example1, example1_labels, example1_value, example2, example2_dual, example3, example3_threshold,
    example3_value,
};
use pptdisc::operator::{state_family, BipartiteOperator, Family};

fn weighted_sum(e: &pptdisc::discrimination::Ensemble, m: &Measurement) -> BipartiteOperator {
    let mut acc = nalgebra::DMatrix::zeros(e.dims().total(), e.dims().total());
    for (i, mi) in m.elements().iter().enumerate() {
        acc += e.weighted(i).matrix() * mi.matrix();
    }
    BipartiteOperator::hermitize(e.dims(), &acc).unwrap()
}

#[test]
fn example1_witness_values() {
    for d in [2, 3] {
        for lambda in [0.25, 1.0] {
            let (e, m) = example1(d, lambda, None).unwrap();
            let h = weighted_sum(&e, &m);
            let expected = -lambda / (12.0 * d as f64 * (d as f64 - 1.0));
            for (idx, &(i, j, k, l)) in example1_labels(d).iter().enumerate() {
                if l != 1 {
                    continue;
                }
                let psi = state_family(e.dims(), Family::Psi { k, i, j }).unwrap();
                let v = (&h - &e.weighted(idx)).trace_inner(&psi).unwrap();
                assert!((v - expected).abs() < 1e-12, "d={d} ({i},{j},{k}): {v} vs {expected}");
            }
        }
    }
}

#[test]
fn example1_identity_chain() {
    for d in [2, 3] {
        for lambda in [0.25, 1.0] {
            let (e, m) = example1(d, lambda, None).unwrap();
            let dims = e.dims();
            let h = weighted_sum(&e, &m);
            let f = |fam| state_family(dims, fam).unwrap();
            let c = lambda / (4.0 * d as f64 * (d as f64 - 1.0));
            for (idx, &(i, j, k, l)) in example1_labels(d).iter().enumerate() {
                let hats = &f(Family::PiHat { l: 1, i, j }) + &f(Family::PiHat { l: 2, i, j }).scale(2.0 / 3.0);
                let w = &h - &e.weighted(idx);
                let (lhs, rhs) = if l == 1 {
                    let rhs = &(&f(Family::Psi { k: 5 - k, i, j }) + &f(Family::Psi { k: k + 2, i, j }).scale(1.0 / 3.0)) + &hats;
                    (w.partial_transpose(), rhs.scale(c))
                } else {
                    let rhs = &(&f(Family::Psi { k: 3 - k, i, j }) + &f(Family::Psi { k, i, j }).scale(1.0 / 3.0)) + &hats;
                    (w, rhs.scale(c))
                };
                assert!(lhs.max_abs_diff(&rhs) < 1e-12, "d={d} λ={lambda} ({i},{j},{k},{l})");
                assert!(rhs.is_psd().unwrap());
            }
        }
    }
}

#[test]
fn example1_closed_form_and_gap() {
    let (e, m) = example1(2, 1.0, None).unwrap();
    let t3 = theorem3_witness_check(&e, &m).unwrap();
    assert!(t3.condition_holds);
    assert!(t3.hermitization_residual < 1e-12);
    assert!((t3.p_ppt.unwrap() - 10.0 / 24.0).abs() < 1e-12);

    let p = optimal_ppt(&e).unwrap();
    assert!((p.value - example1_value(2, 1.0)).abs() < 1e-6);
    let g = optimal_global(&e).unwrap();
    assert!(g.value - p.value >= 1e-4, "gap {}", g.value - p.value);
}

#[test]
fn example2_values_and_dual_family() {
    let e = example2();
    for v in [optimal_global(&e).unwrap().value, optimal_ppt(&e).unwrap().value, dual_qppt(&e).unwrap().value] {
        assert!((v - 1.0).abs() < 1e-6);
    }
    let psi_plus = state_family(e.dims(), Family::PsiPlus).unwrap();
    for t in [0.0, 0.5, 0.99] {
        let h = example2_dual(t).unwrap();
        assert!((h.trace() - 1.0).abs() < 1e-15);
        for i in 0..3 {
            let w = &h - &e.weighted(i);
            let cert = cone::check_decomposable(&w).unwrap();
            assert!(cert.is_member(), "t={t} i={i}");
        }
        let w = &h - &e.weighted(2);
        let pairing = w.trace_inner(&psi_plus).unwrap();
        assert!((pairing + (1.0 - t) / 6.0).abs() < 1e-15);
        let class = cone::classify_witness(&w).unwrap();
        assert_eq!(class.classification, Classification::Dew, "t={t}");
    }
    let h = example2_dual(1.0).unwrap();
    for i in 0..3 {
        assert!((&h - &e.weighted(i)).is_psd().unwrap());
    }
}

#[test]
fn example3_pivot_condition() {
    for d in [2, 3] {
        let e = example3(d, 0.5).unwrap();
        let c1 = corollary1_check(&e, 0).unwrap();
        assert!(c1.holds);
        assert!((c1.value - example3_value(d)).abs() < 1e-15);

        let m = Measurement::trivial(e.dims(), e.len(), 0).unwrap();
        let j = verify_joint_optimality(&e, &m, &e.weighted(0)).unwrap();
        assert!(j.optimal_pair);
        assert!(j.max_residual < 1e-15);

        let bad = verify_joint_optimality(&e, &m, &e.weighted(0).scale(1.01)).unwrap();
        assert!(!bad.optimal_pair);
    }
}

#[test]
fn example3_threshold_sides() {
    for d in [2, 3] {
        let star = example3_threshold(d);
        for (lambda, equal) in [(star - 0.05, false), (star + 0.05, true)] {
            let e = example3(d, lambda).unwrap();
            let c2 = corollary2_classify(&e, 0).unwrap();
            assert_eq!(c2.equal, equal, "d={d} λ={lambda}");
            if !equal {
                assert!(matches!(c2.evidence, Evidence::DewObstruction { .. }));
            }
            let t4 = theorem4_classify(&e).unwrap();
            let expected = if equal { Outcome::Equal } else { Outcome::NotEqual };
            assert_eq!(t4.verdict.outcome, expected, "d={d} λ={lambda}: margin {}", t4.verdict.margin);
            assert!((t4.q_ppt - example3_value(d)).abs() < 1e-6);
        }
    }
}

#[test]
fn example3_boundary_is_equal() {
    let e = example3(3, 9.0 / 16.0).unwrap();
    let c2 = corollary2_classify(&e, 0).unwrap();
    assert_eq!(c2.outcome, Outcome::Equal);
}

#[test]
fn trivial_measurement_on_psd_regime_fails_witness_condition() {
    let e = example3(2, 0.8).unwrap();
    let m = Measurement::trivial(e.dims(), e.len(), 0).unwrap();
    let t3 = theorem3_witness_check(&e, &m).unwrap();
    assert!(!t3.condition_holds);
    assert!(t3.dew_indices.is_empty());
}
