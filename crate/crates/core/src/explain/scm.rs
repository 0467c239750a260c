//! Exact PNS on a toy structural model with a binary cause.
//!
//! Each latent state fixes the outcome under the explanation event `ξ` and
//! under its complement. PNS is the mass of states where the explanation
//! yields ŷ and the complement does not; the lower bound only sees the two
//! marginals.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScmState {
    pub prob: f64,
    /// `Y_ξ = ŷ` in this state.
    pub y_xi_is_yhat: bool,
    /// `Y_{ξ^c} = ŷ` in this state.
    pub y_comp_is_yhat: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScmPns {
    pub exact: f64,
    /// `max(0, P(Y_{ξ^c} ≠ ŷ) + P(Y_ξ = ŷ) - 1)`.
    pub bound: f64,
    /// No positive-mass state has `Y_ξ ≠ ŷ` together with `Y_{ξ^c} = ŷ`.
    pub monotone: bool,
}

pub fn toy_scm_pns(states: &[ScmState]) -> Result<ScmPns> {
    if states.is_empty() {
        return Err(Error::Empty("outcome table has no states"));
    }
    if let Some(s) = states.iter().find(|s| !(s.prob >= 0.0 && s.prob.is_finite())) {
        return Err(Error::Config(format!("state probability {} is not a probability", s.prob)));
    }
    let total: f64 = states.iter().map(|s| s.prob).sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("state probabilities sum to {total}, not 1")));
    }
    let mass = |pred: &dyn Fn(&ScmState) -> bool| -> f64 { states.iter().filter(|s| pred(s)).map(|s| s.prob).sum() };
    let exact = mass(&|s| s.y_xi_is_yhat && !s.y_comp_is_yhat);
    let p_comp_not = mass(&|s| !s.y_comp_is_yhat);
    let p_xi = mass(&|s| s.y_xi_is_yhat);
    let bound = (p_comp_not + p_xi - 1.0).max(0.0);
    let monotone = !states.iter().any(|s| s.prob > 0.0 && !s.y_xi_is_yhat && s.y_comp_is_yhat);
    Ok(ScmPns { exact, bound, monotone })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(prob: f64, xi: bool, comp: bool) -> ScmState {
        ScmState { prob, y_xi_is_yhat: xi, y_comp_is_yhat: comp }
    }

    #[test]
    fn deterministic_monotone_table_is_one() {
        let r = toy_scm_pns(&[st(1.0, true, false)]).unwrap();
        assert_eq!((r.exact, r.bound, r.monotone), (1.0, 1.0, true));
    }

    #[test]
    fn anti_correlated_table_has_loose_bound() {
        let r = toy_scm_pns(&[st(0.5, true, false), st(0.5, false, true)]).unwrap();
        assert!(!r.monotone);
        assert_eq!(r.exact, 0.5);
        assert_eq!(r.bound, 0.0);
    }

    #[test]
    fn independent_outcome_collapses_bound() {
        // Y does not depend on ξ: Y_ξ and Y_{ξ^c} coincide in every state.
        let p = 0.3;
        let r = toy_scm_pns(&[st(p, true, true), st(1.0 - p, false, false)]).unwrap();
        assert_eq!(r.bound, 0.0);
        assert_eq!(r.exact, 0.0);
    }

    #[test]
    fn malformed_tables_rejected() {
        assert!(toy_scm_pns(&[]).is_err());
        assert!(toy_scm_pns(&[st(0.4, true, true)]).is_err());
        assert!(toy_scm_pns(&[st(-0.5, true, true), st(1.5, false, false)]).is_err());
    }
}
