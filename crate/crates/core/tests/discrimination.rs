mod common;

use pptdisc::discrimination::{
    dual_qppt, optimal_global, optimal_ppt, psd_restricted_dual, verify_joint_optimality_with, Ensemble,
};
use pptdisc::ensembles::{example2, example3};
use pptdisc::operator::{state_family, BipartiteOperator, Family, SystemDims};

use common::{helstrom, random_ensemble, rng};

fn bell(n: usize) -> Ensemble {
    let dims = SystemDims::square(2).unwrap();
    let states = [Family::PhiPlus, Family::PhiMinus, Family::PsiPlus, Family::PsiMinus];
    let pairs = states[..n]
        .iter()
        .map(|&f| (1.0 / n as f64, state_family(dims, f).unwrap()))
        .collect();
    Ensemble::from_pairs(dims, pairs).unwrap()
}

#[test]
fn helstrom_two_states() {
    let mut r = rng(7);
    let dims = SystemDims::square(2).unwrap();
    for _ in 0..5 {
        let e = random_ensemble(&mut r, dims, 2);
        let g = optimal_global(&e).unwrap();
        let oracle = helstrom(&e);
        assert!((g.value - oracle).abs() < 1e-6, "{} vs {}", g.value, oracle);
        assert!((g.dual_value - oracle).abs() < 1e-6);
        let p = optimal_ppt(&e).unwrap();
        assert!(p.value <= g.value + 1e-7);
    }
}

#[test]
fn bell_states_under_ppt() {
    // two Bell states are LOCC-distinguishable; three give 2/3, four 1/2
    for (n, expected) in [(2, 1.0), (3, 2.0 / 3.0), (4, 0.5)] {
        let e = bell(n);
        let p = optimal_ppt(&e).unwrap();
        assert!((p.value - expected).abs() < 1e-6, "n = {n}: {}", p.value);
        let q = dual_qppt(&e).unwrap();
        assert!((q.value - expected).abs() < 1e-6, "n = {n}: {}", q.value);
        let g = optimal_global(&e).unwrap();
        assert!((g.value - 1.0).abs() < 1e-6);
    }
}

#[test]
fn orthogonal_pure_states_are_perfectly_distinguishable() {
    let e = example2();
    for v in [
        optimal_global(&e).unwrap().value,
        optimal_ppt(&e).unwrap().value,
        dual_qppt(&e).unwrap().value,
        psd_restricted_dual(&e).unwrap().value,
    ] {
        assert!((v - 1.0).abs() < 1e-6, "{v}");
    }
}

#[test]
fn single_item_and_zero_priors() {
    let dims = SystemDims::new(2, 3).unwrap();
    let rho = BipartiteOperator::maximally_mixed(dims);
    let e = Ensemble::from_pairs(dims, vec![(1.0, rho.clone())]).unwrap();
    let p = optimal_ppt(&e).unwrap();
    assert!((p.value - 1.0).abs() < 1e-12);
    assert!((p.dual_value - 1.0).abs() < 1e-12);

    let other = BipartiteOperator::basis_projector(dims, 0, 1);
    let e = Ensemble::from_pairs(dims, vec![(0.0, other), (1.0, rho)]).unwrap();
    let p = optimal_ppt(&e).unwrap();
    assert!((p.value - 1.0).abs() < 1e-12);
    assert!(p.certificates.iter().all(|c| c.is_member()));
}

#[test]
fn example3_value_small() {
    let e = example3(2, 0.5).unwrap();
    let p = optimal_ppt(&e).unwrap();
    assert!((p.value - 1.0 / 3.0).abs() < 1e-6, "{}", p.value);
    let g = optimal_global(&e).unwrap();
    assert!(g.value > p.value + 1e-4);
}

#[test]
fn random_duality_and_slackness() {
    let mut r = rng(11);
    for (d1, d2, n) in [(2, 2, 3), (2, 3, 2)] {
        let dims = SystemDims::new(d1, d2).unwrap();
        let e = random_ensemble(&mut r, dims, n);
        let p = optimal_ppt(&e).unwrap();
        let q = dual_qppt(&e).unwrap();
        assert!((p.value - q.value).abs() <= 2e-7 * (1.0 + p.value), "{} vs {}", p.value, q.value);
        let m = p.measurement.as_ref().unwrap();
        let j = verify_joint_optimality_with(&e, m, &p.dual_h, Some(&p.certificates)).unwrap();
        assert!(j.optimal_pair, "{:?} {:?} {:?}", j.residuals, j.precondition_failures, p.slackness);
    }
}
