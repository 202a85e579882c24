//! Concrete ensembles, measurements and dual operators, the witness-driven
//! constructions, and JSON persistence.
//!
//! Pair families are enumerated lexicographically: `(i, j)` with `i < j`,
//! then `k`, then `l`. [`example1_labels`] and [`example3_labels`] give the
//! flat index map. Indices are zero-based; the uniform state of Example 3 is
//! item 0.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::cone::{self, Classification, WitnessClass};
use crate::discrimination::{Ensemble, Measurement};
use crate::error::{Error, Result};
use crate::operator::{state_family, BipartiteOperator, Family, SystemDims};
use crate::tolerances;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExampleKind {
    Ex1,
    Ex2,
    Ex3,
}

/// Parameters of one of the three worked examples. Example 2 ignores `d`
/// and `lambda`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExampleSpec {
    pub example: ExampleKind,
    pub d: usize,
    pub lambda: f64,
    /// Background state of Example 1, `𝟙/d²` when absent.
    pub sigma: Option<BipartiteOperator>,
    /// Dual family parameter of Example 2.
    pub t: Option<f64>,
}

/// A built example: the ensemble, its reference measurement and dual where
/// the example has them, and the closed-form optimal PPT value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuiltExample {
    pub spec: ExampleSpec,
    pub ensemble: Ensemble,
    pub measurement: Option<Measurement>,
    pub dual: Option<BipartiteOperator>,
    pub closed_form: f64,
    /// The reference measurement is LOCC by construction (recorded, not verified).
    pub locc_by_construction: bool,
}

impl ExampleSpec {
    pub fn ex1(d: usize, lambda: f64) -> Self {
        Self { example: ExampleKind::Ex1, d, lambda, sigma: None, t: None }
    }

    pub fn ex2(t: Option<f64>) -> Self {
        Self { example: ExampleKind::Ex2, d: 2, lambda: 0.0, sigma: None, t }
    }

    pub fn ex3(d: usize, lambda: f64) -> Self {
        Self { example: ExampleKind::Ex3, d, lambda, sigma: None, t: None }
    }

    pub fn build(&self) -> Result<BuiltExample> {
        let (ensemble, measurement, dual, closed_form, locc) = match self.example {
            ExampleKind::Ex1 => {
                let (e, m) = example1(self.d, self.lambda, self.sigma.as_ref())?;
                (e, Some(m), None, example1_value(self.d, self.lambda), true)
            }
            ExampleKind::Ex2 => {
                let dual = self.t.map(example2_dual).transpose()?;
                (example2(), None, dual, 1.0, false)
            }
            ExampleKind::Ex3 => {
                let e = example3(self.d, self.lambda)?;
                let m = Measurement::trivial(e.dims(), e.len(), 0)?;
                let h = e.weighted(0);
                (e, Some(m), Some(h), example3_value(self.d), true)
            }
        };
        Ok(BuiltExample {
            spec: self.clone(),
            ensemble,
            measurement,
            dual,
            closed_form,
            locc_by_construction: locc,
        })
    }
}

fn pairs(d: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..d).flat_map(move |i| ((i + 1)..d).map(move |j| (i, j)))
}

fn check_d(d: usize) -> Result<SystemDims> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("local dimension must be at least 2, got {d}")));
    }
    SystemDims::square(d)
}

/// `(6 + λ(2d−3)(d+2)) / (12d(d−1))`.
pub fn example1_value(d: usize, lambda: f64) -> f64 {
    let d = d as f64;
    (6.0 + lambda * (2.0 * d - 3.0) * (d + 2.0)) / (12.0 * d * (d - 1.0))
}

/// `d / (5d − 4)`.
pub fn example3_value(d: usize) -> f64 {
    let d = d as f64;
    d / (5.0 * d - 4.0)
}

/// `λ* = d² / (2(d² − 1))`: Example 3 has `p_PPT = p_G` iff `λ ≥ λ*`.
pub fn example3_threshold(d: usize) -> f64 {
    let d2 = (d * d) as f64;
    d2 / (2.0 * (d2 - 1.0))
}

/// `(i, j, k, l)` of each Example 1 item, in item order.
pub fn example1_labels(d: usize) -> Vec<(usize, usize, u8, u8)> {
    let mut out = Vec::new();
    for (i, j) in pairs(d) {
        for k in 1..=2 {
            for l in 1..=2 {
                out.push((i, j, k, l));
            }
        }
    }
    out
}

/// `(i, j, k)` of Example 3 items `1..`; item 0 is `𝟙/d²`.
pub fn example3_labels(d: usize) -> Vec<(usize, usize, u8)> {
    let mut out = Vec::new();
    for (i, j) in pairs(d) {
        for k in 1..=4 {
            out.push((i, j, k));
        }
    }
    out
}

/// `ρ^{(k,l)}_{i,j} = λ/3 (Ψ^{(k)}_{i,j} + Π^{(l)}_{i,j}) + (1−λ)σ` with equal
/// priors, and the local measurement `M^{(k,1)} = Π^{(1)}/(2(d−1))`,
/// `M^{(k,2)} = Π^{(2)}/2`.
pub fn example1(d: usize, lambda: f64, sigma: Option<&BipartiteOperator>) -> Result<(Ensemble, Measurement)> {
    let dims = check_d(d)?;
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::InvalidArgument(format!("Example 1 needs 0 < λ ≤ 1, got {lambda}")));
    }
    let sigma = match sigma {
        Some(s) => {
            check_density(s, dims, "σ")?;
            s.clone()
        }
        None => BipartiteOperator::maximally_mixed(dims),
    };
    let labels = example1_labels(d);
    let eta = 1.0 / labels.len() as f64;
    let mut items = Vec::with_capacity(labels.len());
    let mut elements = Vec::with_capacity(labels.len());
    for &(i, j, k, l) in &labels {
        let psi = state_family(dims, Family::Psi { k, i, j })?;
        let pi = state_family(dims, Family::Pi { l, i, j })?;
        let rho = &(&psi + &pi).scale(lambda / 3.0) + &sigma.scale(1.0 - lambda);
        items.push((eta, rho));
        let weight = if l == 1 { 1.0 / (2.0 * (d as f64 - 1.0)) } else { 0.5 };
        elements.push(pi.scale(weight));
    }
    let e = Ensemble::from_pairs(dims, items)?;
    let m = Measurement::new(dims, elements)?;
    if !m.is_ppt()? {
        return Err(Error::InvalidMeasurement("Example 1 measurement is not PPT".into()));
    }
    Ok((e, m))
}

fn check_density(rho: &BipartiteOperator, dims: SystemDims, name: &str) -> Result<()> {
    if rho.dims() != dims {
        return Err(Error::InvalidArgument(format!("{name} has dims {}, expected {dims}", rho.dims())));
    }
    let tr = rho.trace();
    if (tr - 1.0).abs() > tolerances::UNIT_TRACE {
        return Err(Error::InvalidArgument(format!("{name} has trace {tr}, expected 1")));
    }
    let lmin = rho.min_eigenvalue()?;
    if lmin < -tolerances::PSD {
        return Err(Error::InvalidArgument(format!("{name} has eigenvalue {lmin:.6e}")));
    }
    Ok(())
}

/// `{⅓, |00⟩⟨00|}, {⅓, |11⟩⟨11|}, {⅓, Ψ₊}` on `2⊗2`.
pub fn example2() -> Ensemble {
    let dims = SystemDims::square(2).expect("2⊗2");
    let third = 1.0 / 3.0;
    let items = vec![
        (third, BipartiteOperator::basis_projector(dims, 0, 0)),
        (third, BipartiteOperator::basis_projector(dims, 1, 1)),
        (third, state_family(dims, Family::PsiPlus).expect("2⊗2")),
    ];
    // thirds sum to 1 within one ulp
    Ensemble::from_pairs(dims, items).expect("Example 2 is a valid ensemble")
}

/// `H(t) = ⅓(Φ₊ + Φ₋) + (1+t)/6 Ψ₊ + (1−t)/6 Ψ₋`, `0 ≤ t ≤ 1`; `Tr H(t) = 1`.
pub fn example2_dual(t: f64) -> Result<BipartiteOperator> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidArgument(format!("t must lie in [0, 1], got {t}")));
    }
    let dims = SystemDims::square(2)?;
    let f = |fam| state_family(dims, fam);
    let phis = &f(Family::PhiPlus)? + &f(Family::PhiMinus)?;
    let h = &(&phis.scale(1.0 / 3.0) + &f(Family::PsiPlus)?.scale((1.0 + t) / 6.0))
        + &f(Family::PsiMinus)?.scale((1.0 - t) / 6.0);
    Ok(h)
}

/// `η₀ = d/(5d−4)`, `ρ₀ = 𝟙/d²`, and for each `(i, j, k)`
/// `η = 2/(d(5d−4))`, `ρ = (1−λ)Ψ^{(k)}_{i,j} + λ𝟙/d²`, `0 ≤ λ < 1`.
pub fn example3(d: usize, lambda: f64) -> Result<Ensemble> {
    let dims = check_d(d)?;
    if !(0.0..1.0).contains(&lambda) {
        return Err(Error::InvalidArgument(format!("Example 3 needs 0 ≤ λ < 1, got {lambda}")));
    }
    let df = d as f64;
    let uniform = BipartiteOperator::maximally_mixed(dims);
    let eta = 2.0 / (df * (5.0 * df - 4.0));
    let mut items = vec![(example3_value(d), uniform.clone())];
    for (i, j, k) in example3_labels(d) {
        let psi = state_family(dims, Family::Psi { k, i, j })?;
        items.push((eta, &psi.scale(1.0 - lambda) + &uniform.scale(lambda)));
    }
    renormalize_priors(&mut items);
    Ensemble::from_pairs(dims, items)
}

/// Absorbs floating-point drift in `Σ η_i` into the largest prior.
fn renormalize_priors(items: &mut [(f64, BipartiteOperator)]) {
    let total: f64 = items.iter().map(|x| x.0).sum();
    let big = (0..items.len())
        .max_by(|&a, &b| items[a].0.total_cmp(&items[b].0))
        .expect("nonempty");
    items[big].0 += 1.0 - total;
}

/// An ensemble built from witnesses, with the property it was built to have.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Construction {
    pub ensemble: Ensemble,
    /// `η_0 ρ_0 − η_i ρ_i = c_i W_i` with these `c_i > 0`.
    pub scales: Vec<f64>,
    /// Expected: `p_PPT < p_G`. Checkable with the discrimination module.
    pub claim_ppt_below_global: bool,
    /// Item whose differences against every other item are the witnesses.
    pub pivot: usize,
    pub witnesses: Vec<WitnessClass>,
}

fn require_dew(index: usize, w: &BipartiteOperator) -> Result<WitnessClass> {
    let class = cone::classify_witness(w)?;
    if class.classification != Classification::Dew {
        return Err(Error::NotDew {
            index,
            classification: class.classification,
            certificate: Box::new(class.certificate),
        });
    }
    Ok(class)
}

/// `|λ_min(W)| Π_neg(W)`: the smallest multiple of the negative-eigenspace
/// projector that makes `P + W ⪰ 0`.
pub fn negative_part_compensator(w: &BipartiteOperator) -> Result<BipartiteOperator> {
    let spec = w.spectrum()?;
    let lmin = spec.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let scale = (-lmin).max(0.0);
    Ok(spec.map_eigenvalues(w.dims(), |x| if x < 0.0 { scale } else { 0.0 }))
}

/// Two-state ensemble `η_0 = Tr(P+W)/Tr(2P+W)`, `ρ_0 = (P+W)/Tr(P+W)`,
/// `η_1 = Tr P/Tr(2P+W)`, `ρ_1 = P/Tr P`, so `η_0ρ_0 − η_1ρ_1 = W/Tr(2P+W)`.
/// `P` defaults to [`negative_part_compensator`].
pub fn construct_from_dew(w: &BipartiteOperator, p: Option<&BipartiteOperator>) -> Result<Construction> {
    let class = require_dew(0, w)?;
    let dims = w.dims();
    let p = match p {
        Some(p) => {
            if p.dims() != dims {
                return Err(Error::Dimension(format!("P has dims {}, W has {dims}", p.dims())));
            }
            p.clone()
        }
        None => negative_part_compensator(w)?,
    };
    let lp = p.min_eigenvalue()?;
    if lp < -tolerances::PSD {
        return Err(Error::Precondition(format!("P is not PSD (eigenvalue {lp:.6e})")));
    }
    let pw = &p + w;
    let lpw = pw.min_eigenvalue()?;
    if lpw < -tolerances::PSD {
        return Err(Error::Precondition(format!("P + W is not PSD (eigenvalue {lpw:.6e})")));
    }
    let (tp, tpw) = (p.trace(), pw.trace());
    let total = tp + tpw;
    if tp <= 0.0 || tpw <= 0.0 {
        return Err(Error::Precondition(format!("Tr P = {tp:.6e} and Tr(P+W) = {tpw:.6e} must be positive")));
    }
    // clipping drift below τ_psd keeps both states valid
    let rho0 = pw.clip_negative()?.scale(1.0 / tpw);
    let rho1 = p.clip_negative()?.scale(1.0 / tp);
    let eta0 = tpw / total;
    let ensemble = Ensemble::from_pairs(dims, vec![(eta0, rho0), (1.0 - eta0, rho1)])?;
    Ok(Construction {
        ensemble,
        scales: vec![1.0 / total],
        claim_ppt_below_global: true,
        pivot: 0,
        witnesses: vec![class],
    })
}

/// `(n)`-state ensemble from `n−1` DEWs: `ρ_0 = 𝟙/Tr 𝟙`,
/// `ρ_i = (𝟙 − λ_iW_i)/Tr(𝟙 − λ_iW_i)`, priors proportional to the traces,
/// so `η_0ρ_0 − η_iρ_i = λ_iW_i / Tr(n𝟙 − Σλ_jW_j)`.
pub fn construct_from_dews(ws: &[BipartiteOperator], lambdas: &[f64]) -> Result<Construction> {
    if ws.is_empty() {
        return Err(Error::InvalidArgument("at least one witness is required".into()));
    }
    if ws.len() != lambdas.len() {
        return Err(Error::InvalidArgument(format!("{} witnesses but {} weights", ws.len(), lambdas.len())));
    }
    let dims = ws[0].dims();
    let id = BipartiteOperator::identity(dims);
    let mut witnesses = Vec::with_capacity(ws.len());
    let mut unnormalized = vec![id.clone()];
    for (idx, (w, &lambda)) in ws.iter().zip(lambdas).enumerate() {
        if w.dims() != dims {
            return Err(Error::Dimension(format!("witness {idx} has dims {}, expected {dims}", w.dims())));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("weight {idx} must be positive, got {lambda}")));
        }
        witnesses.push(require_dew(idx, w)?);
        let a = &id - &w.scale(lambda);
        let lmin = a.min_eigenvalue()?;
        if lmin < -tolerances::PSD {
            return Err(Error::Precondition(format!(
                "𝟙 − λ_{idx} W_{idx} is not PSD (eigenvalue {lmin:.6e})"
            )));
        }
        unnormalized.push(a);
    }
    let total: f64 = unnormalized.iter().map(|a| a.trace()).sum();
    let mut items = Vec::with_capacity(unnormalized.len());
    for (idx, a) in unnormalized.iter().enumerate() {
        let tr = a.trace();
        if tr <= 0.0 {
            return Err(Error::Precondition(format!("state {idx} has nonpositive trace {tr:.6e}")));
        }
        items.push((tr / total, a.clip_negative()?.scale(1.0 / tr)));
    }
    renormalize_priors(&mut items);
    let ensemble = Ensemble::from_pairs(dims, items)?;
    Ok(Construction {
        ensemble,
        scales: lambdas.iter().map(|l| l / total).collect(),
        claim_ppt_below_global: true,
        pivot: 0,
        witnesses,
    })
}

/// Reads any of the JSON types; loaders enforce the type invariants.
pub fn load_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
}

pub fn save_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn load_ensemble(path: impl AsRef<Path>) -> Result<Ensemble> {
    load_json(path)
}

pub fn save_ensemble(e: &Ensemble, path: impl AsRef<Path>) -> Result<()> {
    save_json(e, path)
}

pub fn load_measurement(path: impl AsRef<Path>) -> Result<Measurement> {
    load_json(path)
}

pub fn save_measurement(m: &Measurement, path: impl AsRef<Path>) -> Result<()> {
    save_json(m, path)
}

pub fn load_operator(path: impl AsRef<Path>) -> Result<BipartiteOperator> {
    load_json(path)
}

pub fn save_operator(a: &BipartiteOperator, path: impl AsRef<Path>) -> Result<()> {
    save_json(a, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_sizes_and_priors() {
        for d in 2..=4 {
            let (e, m) = example1(d, 0.5, None).unwrap();
            assert_eq!(e.len(), 2 * d * (d - 1));
            assert_eq!(m.len(), e.len());
            assert!(m.completeness_residual() < 1e-14);
            let e3 = example3(d, 0.5).unwrap();
            assert_eq!(e3.len(), 1 + 2 * d * (d - 1));
        }
        assert_eq!(example2().len(), 3);
    }

    #[test]
    fn example2_dual_has_unit_trace() {
        for t in [0.0, 0.3, 1.0] {
            assert!((example2_dual(t).unwrap().trace() - 1.0).abs() < 1e-15);
        }
        assert!(example2_dual(1.5).is_err());
    }

    #[test]
    fn parameter_ranges() {
        assert!(example1(2, 0.0, None).is_err());
        assert!(example1(2, 1.0, None).is_ok());
        assert!(example3(2, 1.0).is_err());
        assert!(example3(2, 0.0).is_ok());
        assert!(example3(1, 0.5).is_err());
    }

    #[test]
    fn threshold_values() {
        assert!((example3_threshold(2) - 2.0 / 3.0).abs() < 1e-15);
        assert!((example3_threshold(3) - 9.0 / 16.0).abs() < 1e-15);
        assert!((example1_value(2, 1.0) - 10.0 / 24.0).abs() < 1e-15);
    }
}
