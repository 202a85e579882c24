use anyhow::{bail, Context, Result};

use pptdisc::cone::decomposability_options;
use pptdisc::discrimination::discrimination_options;
use pptdisc::solver::SolverOptions;

pub const EPS_ENV: &str = "PPTDISC_EPS_OVERRIDE";

/// Solver overrides from the command line. Precedence: flag, then the
/// environment override, then the library default of each program family.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub eps_feas: Option<f64>,
    pub eps_gap: Option<f64>,
    pub max_iter: Option<usize>,
    pub seed: Option<u64>,
}

/// `"feas,gap"`, both positive.
pub fn parse_eps_pair(text: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        bail!("{EPS_ENV} must be \"feas,gap\", got {text:?}");
    }
    let feas: f64 = parts[0].parse().with_context(|| format!("{EPS_ENV}: bad feasibility tolerance {:?}", parts[0]))?;
    let gap: f64 = parts[1].parse().with_context(|| format!("{EPS_ENV}: bad gap tolerance {:?}", parts[1]))?;
    if !(feas > 0.0 && gap > 0.0 && feas.is_finite() && gap.is_finite()) {
        bail!("{EPS_ENV}: tolerances must be positive and finite, got {feas}, {gap}");
    }
    Ok((feas, gap))
}

impl Overrides {
    fn apply(&self, mut base: SolverOptions, env: Option<(f64, f64)>) -> Result<SolverOptions> {
        if let Some((feas, gap)) = env {
            base.eps_feas = feas;
            base.eps_gap = gap;
        }
        if let Some(v) = self.eps_feas {
            base.eps_feas = v;
        }
        if let Some(v) = self.eps_gap {
            base.eps_gap = v;
        }
        if let Some(v) = self.max_iter {
            base.max_iter = v;
        }
        base.seed = self.seed.or(base.seed);
        base.validate()?;
        Ok(base)
    }

    /// `(discrimination, decomposability)` options.
    pub fn resolve(&self) -> Result<(SolverOptions, SolverOptions)> {
        let env = match std::env::var(EPS_ENV) {
            Ok(text) if !text.trim().is_empty() => Some(parse_eps_pair(&text)?),
            _ => None,
        };
        Ok((self.apply(discrimination_options(), env)?, self.apply(decomposability_options(), env)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eps_pair() {
        assert_eq!(parse_eps_pair("1e-9, 2e-9").unwrap(), (1e-9, 2e-9));
        assert!(parse_eps_pair("1e-9").is_err());
        assert!(parse_eps_pair("0,1e-9").is_err());
        assert!(parse_eps_pair("a,b").is_err());
    }

    #[test]
    fn flags_beat_environment() {
        let o = Overrides {
            eps_feas: Some(1e-6),
            ..Default::default()
        };
        let r = o.apply(SolverOptions::default(), Some((1e-10, 1e-11))).unwrap();
        assert_eq!((r.eps_feas, r.eps_gap), (1e-6, 1e-11));
    }
}
