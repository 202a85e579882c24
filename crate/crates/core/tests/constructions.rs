use pptdisc::discrimination::{corollary1_check, optimal_global, optimal_ppt, theorem4_classify, Outcome};
use pptdisc::ensembles::{
    construct_from_dew, construct_from_dews, example3, load_ensemble, load_operator, save_ensemble, save_operator,
};
use pptdisc::operator::BipartiteOperator;
use pptdisc::Error;

// Regression values from the first verified run.
const SINGLE_GAP: f64 = 0.1;
const MULTI_P_GLOBAL: f64 = 0.353_260_869_5;
const MULTI_P_PPT: f64 = 8.0 / 23.0;

fn example3_difference(index: usize) -> BipartiteOperator {
    let e = example3(2, 0.5).unwrap();
    &e.weighted(0) - &e.weighted(index)
}

#[test]
fn single_witness_construction() {
    let w = example3_difference(1);
    let c = construct_from_dew(&w, None).unwrap();
    let e = &c.ensemble;
    assert_eq!(e.len(), 2);
    assert!((e.eta(0) + e.eta(1) - 1.0).abs() < 1e-15);
    let diff = &e.weighted(0) - &e.weighted(1);
    assert!(diff.max_abs_diff(&w.scale(c.scales[0])) < 1e-12);
    assert!(corollary1_check(e, 0).unwrap().holds);

    let t4 = theorem4_classify(e).unwrap();
    assert_eq!(t4.verdict.outcome, Outcome::NotEqual);
    assert!(t4.verdict.margin >= 1e-5, "margin {}", t4.verdict.margin);
    let g = optimal_global(e).unwrap().value;
    let p = optimal_ppt(e).unwrap().value;
    assert!(g - p >= 1e-5);
    assert!((g - p - SINGLE_GAP).abs() < 1e-6, "gap {}", g - p);
}

#[test]
fn multi_witness_construction() {
    let ws = vec![example3_difference(1), example3_difference(3)];
    let c = construct_from_dews(&ws, &[1.0, 2.0]).unwrap();
    let e = &c.ensemble;
    assert_eq!(e.len(), 3);
    let total: f64 = (0..3).map(|i| e.eta(i)).sum();
    assert!((total - 1.0).abs() < 1e-15);
    for (i, w) in ws.iter().enumerate() {
        let diff = &e.weighted(0) - &e.weighted(i + 1);
        assert!(diff.max_abs_diff(&w.scale(c.scales[i])) < 1e-12);
    }
    let t4 = theorem4_classify(e).unwrap();
    assert_eq!(t4.verdict.outcome, Outcome::NotEqual);
    assert!(t4.verdict.margin >= 1e-5);
    assert!((t4.p_global - MULTI_P_GLOBAL).abs() < 1e-6, "{}", t4.p_global);
    assert!((t4.q_ppt - MULTI_P_PPT).abs() < 1e-6, "{}", t4.q_ppt);
}

#[test]
fn construction_preconditions() {
    let psd = BipartiteOperator::identity(example3_difference(1).dims());
    assert!(matches!(construct_from_dew(&psd, None), Err(Error::NotDew { .. })));
    let w = example3_difference(1);
    let err = construct_from_dews(&[w], &[1e6]).unwrap_err();
    assert!(err.to_string().contains("eigenvalue"), "{err}");
}

#[test]
fn json_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let e = example3(2, 0.5).unwrap();
    let path = dir.path().join("e.json");
    save_ensemble(&e, &path).unwrap();
    let back = load_ensemble(&path).unwrap();
    for i in 0..e.len() {
        assert_eq!(e.eta(i).to_bits(), back.eta(i).to_bits());
        assert!(e.rho(i).max_abs_diff(back.rho(i)) <= 1e-15);
    }
    let w = example3_difference(2);
    save_operator(&w, dir.path().join("w.json")).unwrap();
    assert_eq!(load_operator(dir.path().join("w.json")).unwrap(), w);
}

#[test]
fn loader_rejects_invalid_ensembles() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    let write = |text: &str| std::fs::write(&path, text).unwrap();

    let rho_ok = "[[[0.5,0],[0,0],[0,0],[0,0]],[[0,0],[0.5,0],[0,0],[0,0]],[[0,0],[0,0],[0,0],[0,0]],[[0,0],[0,0],[0,0],[0,0]]]";
    let rho_neg = "[[[1.5,0],[0,0],[0,0],[0,0]],[[0,0],[-0.5,0],[0,0],[0,0]],[[0,0],[0,0],[0,0],[0,0]],[[0,0],[0,0],[0,0],[0,0]]]";
    let item = |eta: f64, m: &str| format!(r#"{{"eta":{eta},"rho":{{"dims":[2,2],"matrix":{m}}}}}"#);

    write(&format!(r#"{{"dims":[2,2],"items":[{},{}]}}"#, item(0.5, rho_ok), item(0.499, rho_ok)));
    let err = load_ensemble(&path).unwrap_err().to_string();
    assert!(err.contains("priors sum"), "{err}");

    write(&format!(r#"{{"dims":[2,2],"items":[{},{}]}}"#, item(0.5, rho_ok), item(0.5, rho_neg)));
    let err = load_ensemble(&path).unwrap_err().to_string();
    assert!(err.contains("items[1].rho") && err.contains("eigenvalue"), "{err}");

    write(r#"{"dims":[2,2],"items":[]}"#);
    assert!(load_ensemble(&path).is_err());
}
