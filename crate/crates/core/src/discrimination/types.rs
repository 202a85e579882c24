use serde::{Deserialize, Serialize};

use crate::cone::ConeCertificate;
use crate::error::{Error, Result};
use crate::operator::{BipartiteOperator, SystemDims};
use crate::solver::SolverStats;
use crate::tolerances;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleItem {
    pub eta: f64,
    pub rho: BipartiteOperator,
}

/// Prior probabilities and density operators `{η_i, ρ_i}`.
///
/// Invariants: `Σ η_i = 1` to [`tolerances::PRIOR_SUM`], each `η_i ∈ [0, 1]`,
/// each `ρ_i ⪰ -τ_psd` with unit trace to [`tolerances::UNIT_TRACE`], and
/// all operators share `dims`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EnsembleJson", into = "EnsembleJson")]
pub struct Ensemble {
    dims: SystemDims,
    items: Vec<EnsembleItem>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnsembleJson {
    dims: SystemDims,
    items: Vec<EnsembleItem>,
}

impl TryFrom<EnsembleJson> for Ensemble {
    type Error = Error;

    fn try_from(j: EnsembleJson) -> Result<Self> {
        Self::new(j.dims, j.items)
    }
}

impl From<Ensemble> for EnsembleJson {
    fn from(e: Ensemble) -> Self {
        Self {
            dims: e.dims,
            items: e.items,
        }
    }
}

impl Ensemble {
    pub fn new(dims: SystemDims, items: Vec<EnsembleItem>) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::InvalidEnsemble("ensemble has no items".into()));
        }
        let mut total = 0.0;
        for (i, item) in items.iter().enumerate() {
            if !item.eta.is_finite() || !(0.0..=1.0).contains(&item.eta) {
                return Err(Error::InvalidEnsemble(format!("items[{i}].eta = {} is not in [0, 1]", item.eta)));
            }
            total += item.eta;
            if item.rho.dims() != dims {
                return Err(Error::InvalidEnsemble(format!(
                    "items[{i}].rho has dims {}, ensemble dims are {dims}",
                    item.rho.dims()
                )));
            }
            let tr = item.rho.trace();
            if (tr - 1.0).abs() > tolerances::UNIT_TRACE {
                return Err(Error::InvalidEnsemble(format!("items[{i}].rho has trace {tr}, expected 1")));
            }
            let lmin = item.rho.min_eigenvalue()?;
            if lmin < -tolerances::PSD {
                return Err(Error::InvalidEnsemble(format!(
                    "items[{i}].rho has eigenvalue {lmin:.6e} below -{:.0e}",
                    tolerances::PSD
                )));
            }
        }
        if (total - 1.0).abs() > tolerances::PRIOR_SUM {
            return Err(Error::InvalidEnsemble(format!("priors sum to {total}, expected 1")));
        }
        Ok(Self { dims, items })
    }

    /// Builds from `(η_i, ρ_i)` pairs.
    pub fn from_pairs(dims: SystemDims, pairs: Vec<(f64, BipartiteOperator)>) -> Result<Self> {
        Self::new(dims, pairs.into_iter().map(|(eta, rho)| EnsembleItem { eta, rho }).collect())
    }

    pub fn dims(&self) -> SystemDims {
        self.dims
    }

    pub fn items(&self) -> &[EnsembleItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn eta(&self, i: usize) -> f64 {
        self.items[i].eta
    }

    pub fn rho(&self, i: usize) -> &BipartiteOperator {
        &self.items[i].rho
    }

    /// `η_i ρ_i`.
    pub fn weighted(&self, i: usize) -> BipartiteOperator {
        self.items[i].rho.scale(self.items[i].eta)
    }

    /// Index of the largest prior, lowest index among ties.
    pub fn largest_prior(&self) -> usize {
        let mut best = 0;
        for i in 1..self.items.len() {
            if self.items[i].eta > self.items[best].eta {
                best = i;
            }
        }
        best
    }

    /// The ensemble with items reordered as `perm[new] = old`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.len()];
        if perm.len() != self.len() || perm.iter().any(|&p| p >= self.len() || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::InvalidArgument("not a permutation of the item indices".into()));
        }
        Ok(Self {
            dims: self.dims,
            items: perm.iter().map(|&p| self.items[p].clone()).collect(),
        })
    }
}

/// POVM `{M_i}`: each `M_i ⪰ -τ_psd` and `‖Σ M_i − 𝟙‖_F ≤` [`tolerances::COMPLETENESS`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeasurementJson", into = "MeasurementJson")]
pub struct Measurement {
    dims: SystemDims,
    elements: Vec<BipartiteOperator>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeasurementJson {
    dims: SystemDims,
    elements: Vec<BipartiteOperator>,
}

impl TryFrom<MeasurementJson> for Measurement {
    type Error = Error;

    fn try_from(j: MeasurementJson) -> Result<Self> {
        Self::new(j.dims, j.elements)
    }
}

impl From<Measurement> for MeasurementJson {
    fn from(m: Measurement) -> Self {
        Self {
            dims: m.dims,
            elements: m.elements,
        }
    }
}

impl Measurement {
    pub fn new(dims: SystemDims, elements: Vec<BipartiteOperator>) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::InvalidMeasurement("measurement has no elements".into()));
        }
        let mut sum = BipartiteOperator::zeros(dims);
        for (i, m) in elements.iter().enumerate() {
            if m.dims() != dims {
                return Err(Error::InvalidMeasurement(format!(
                    "elements[{i}] has dims {}, measurement dims are {dims}",
                    m.dims()
                )));
            }
            let lmin = m.min_eigenvalue()?;
            if lmin < -tolerances::PSD {
                return Err(Error::InvalidMeasurement(format!("elements[{i}] has eigenvalue {lmin:.6e}")));
            }
            sum += m;
        }
        let dev = (&sum - &BipartiteOperator::identity(dims)).frobenius_norm();
        if dev > tolerances::COMPLETENESS {
            return Err(Error::InvalidMeasurement(format!(
                "elements sum to the identity only within {dev:.3e}"
            )));
        }
        Ok(Self { dims, elements })
    }

    pub fn dims(&self) -> SystemDims {
        self.dims
    }

    pub fn elements(&self) -> &[BipartiteOperator] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// `(M_0 = 𝟙, 0, …, 0)` with `n` elements, `𝟙` at `index`.
    pub fn trivial(dims: SystemDims, n: usize, index: usize) -> Result<Self> {
        if index >= n {
            return Err(Error::InvalidArgument(format!("index {index} out of range for {n} elements")));
        }
        let elements = (0..n)
            .map(|i| if i == index { BipartiteOperator::identity(dims) } else { BipartiteOperator::zeros(dims) })
            .collect();
        Self::new(dims, elements)
    }

    /// Smallest eigenvalue over all `M_i^Γ`.
    pub fn min_pt_eigenvalue(&self) -> Result<f64> {
        let mut lmin = f64::INFINITY;
        for m in &self.elements {
            lmin = lmin.min(m.partial_transpose().min_eigenvalue()?);
        }
        Ok(lmin)
    }

    /// Every `M_i^Γ ⪰ -τ_psd`.
    pub fn is_ppt(&self) -> Result<bool> {
        Ok(self.min_pt_eigenvalue()? >= -tolerances::PSD)
    }

    /// `‖Σ M_i − 𝟙‖_F`.
    pub fn completeness_residual(&self) -> f64 {
        let mut sum = BipartiteOperator::zeros(self.dims);
        for m in &self.elements {
            sum += m;
        }
        (&sum - &BipartiteOperator::identity(self.dims)).frobenius_norm()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Global,
    Ppt,
    DualOnly,
}

/// Optimal value with its measurement (primal modes), the dual operator `H`
/// and certificates for `H − η_i ρ_i` in the relevant cone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscriminationResult {
    pub mode: Mode,
    /// `Σ η_i Tr(ρ_i M_i)` for primal modes, `Tr H` for `DualOnly`.
    pub value: f64,
    pub measurement: Option<Measurement>,
    pub dual_h: BipartiteOperator,
    /// `Tr H`.
    pub dual_value: f64,
    /// `Tr[M_i (H − η_i ρ_i)]`, empty without a measurement.
    pub slackness: Vec<f64>,
    /// One certificate per item: PSD decomposition `(W, 0)` for `Global`,
    /// `(P_i, Q_i)` otherwise.
    pub certificates: Vec<ConeCertificate>,
    /// Identity shift added to the solver's `H` to make every certificate exact.
    pub dual_shift: f64,
    pub solver: Option<SolverStats>,
    pub wall_ms: f64,
}

impl DiscriminationResult {
    pub fn iterations(&self) -> usize {
        self.solver.map(|s| s.iterations).unwrap_or(0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Equal,
    NotEqual,
    Indeterminate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Evidence {
    /// An `H` attaining `q_PPT` with all differences PSD exists.
    NoDewDualFound,
    /// `H − η_i ρ_i` is a DEW at this index.
    DewObstruction { index: usize },
    /// The PSD-restricted dual exceeds `q_PPT`.
    NumericGap,
}

/// `p_PPT` versus `p_G`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EqualityVerdict {
    pub p_ppt: f64,
    /// Absent when the verdict path does not determine `p_G`.
    pub p_g: Option<f64>,
    pub outcome: Outcome,
    pub equal: bool,
    /// Nonnegative distance from equality in the verdict's own measure.
    pub margin: f64,
    pub evidence: Evidence,
}

impl EqualityVerdict {
    pub(crate) fn from_margin(p_ppt: f64, p_g: Option<f64>, margin: f64, obstruction: Evidence) -> Self {
        let outcome = if margin <= tolerances::CERT {
            Outcome::Equal
        } else if margin >= tolerances::VERDICT {
            Outcome::NotEqual
        } else {
            Outcome::Indeterminate
        };
        let evidence = match outcome {
            Outcome::Equal => Evidence::NoDewDualFound,
            _ => obstruction,
        };
        Self {
            p_ppt,
            p_g,
            outcome,
            equal: outcome == Outcome::Equal,
            margin,
            evidence,
        }
    }
}
