//! Closed-form limit quantities: the free-compression norm formula for flat
//! projections, optimal output spectra, von Neumann entropies, the
//! Hayden-Winter entropy bound and the violation gap.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sorted probability vector (eigenvalue profile).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumVector {
    probs: Vec<f64>,
}

impl SpectrumVector {
    pub fn new(mut probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Shape("empty spectrum".into()));
        }
        for p in probs.iter_mut() {
            if *p < -1e-10 || *p > 1.0 + 1e-10 {
                return Err(Error::Domain(format!("spectrum entry {p} outside [0, 1]")));
            }
            *p = p.clamp(0.0, 1.0);
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!("spectrum sums to {sum}, not 1")));
        }
        probs.sort_by(|a, b| b.partial_cmp(a).unwrap());
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn l1_distance(&self, other: &Self) -> f64 {
        self.probs
            .iter()
            .zip(other.probs.iter())
            .map(|(a, b)| (a - b).abs())
            .sum()
    }
}

/// Audit record for the additivity-violation gap at (k, t).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GapReport {
    pub k: u32,
    pub t: f64,
    /// t-norm of the rank-1 flat projection e_1, i.e. phi(1/k, t).
    pub phi1: f64,
    /// Limit minimum output entropy S_{k,t}, in nats.
    pub s_limit: f64,
    /// Half the Hayden-Winter entropy bound, in nats.
    pub hw_half: f64,
    /// Violation gap: s_limit - hw_half.
    pub delta: f64,
}

/// t-norm of a flat projection of normalized trace u:
/// t + u - 2tu + 2 sqrt(tu(1-t)(1-u)) below the seam u + t = 1, and 1 above.
pub fn phi(u: f64, t: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&u) || !(0.0..=1.0).contains(&t) {
        return Err(Error::Domain(format!("phi({u}, {t}): arguments outside [0, 1]")));
    }
    if t + u >= 1.0 {
        return Ok(1.0);
    }
    Ok(t + u - 2.0 * (t * u) + 2.0 * ((t * u) * ((1.0 - t) * (1.0 - u))).sqrt())
}

/// t-norm of the two-level operator lo·I + (hi-lo)·Q, Q a flat projection of
/// normalized trace u, via the spectral shift ‖A‖_(t) = lo + (hi-lo)·phi(u,t).
///
/// The reduction is validated against the Monte Carlo oracle
/// (`montecarlo::empirical_t_norm`) in the test suite.
pub fn t_norm_two_level(lo: f64, hi: f64, u: f64, t: f64) -> Result<f64> {
    if lo < 0.0 || hi < lo {
        return Err(Error::Domain(format!(
            "t_norm_two_level: need hi >= lo >= 0, got lo={lo}, hi={hi}"
        )));
    }
    Ok(lo + (hi - lo) * phi(u, t)?)
}

/// The entropy-minimizing spectrum x_t* on K_{k,t}:
/// (phi(1/k,t), (1-phi)/(k-1), ..., (1-phi)/(k-1)).
pub fn x_star(k: u32, t: f64) -> Result<SpectrumVector> {
    if k < 2 {
        return Err(Error::Domain(format!("x_star requires k >= 2, got {k}")));
    }
    let p = phi(1.0 / k as f64, t)?;
    let mut probs = vec![(1.0 - p) / (k - 1) as f64; k as usize];
    probs[0] = p;
    SpectrumVector::new(probs)
}

/// Von Neumann entropy -Σ p ln p in nats, with 0·ln 0 = 0.
pub fn entropy(p: &SpectrumVector) -> f64 {
    entropy_of_probs(p.probs())
}

pub(crate) fn entropy_of_probs(probs: &[f64]) -> f64 {
    -probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum::<f64>()
}

/// Entropy of the length-k² profile (r, (1-r)/(k²-1), ...), the Hayden-Winter
/// upper bound on H_min(Φ⊗Φ̄) when the top Bell eigenvalue is r. Closed form.
pub fn hw_upper_bound(k: u32, r: f64) -> Result<f64> {
    if k < 2 {
        return Err(Error::Domain(format!("hw_upper_bound requires k >= 2, got {k}")));
    }
    if !(0.0..1.0).contains(&r) || r == 0.0 {
        return Err(Error::Domain(format!("hw_upper_bound: r = {r} outside (0, 1)")));
    }
    let rest = (1.0 - r) / (k as f64 * k as f64 - 1.0);
    let tail = if rest > 0.0 { -(1.0 - r) * rest.ln() } else { 0.0 };
    Ok(-r * r.ln() + tail)
}

/// The limiting Bell output spectrum (t + (1-t)/k², (1-t)/k², ...).
pub fn gamma_star(k: u32, t: f64) -> Result<SpectrumVector> {
    if k == 0 {
        return Err(Error::Domain("gamma_star requires k >= 1".into()));
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Domain(format!("gamma_star: t = {t} outside [0, 1]")));
    }
    let k2 = (k as usize) * (k as usize);
    let rest = (1.0 - t) / k2 as f64;
    let mut probs = vec![rest; k2];
    probs[0] = t + rest;
    SpectrumVector::new(probs)
}

/// Gap between the limit MOE and half the Hayden-Winter bound; positivity
/// certifies additivity violation at (k, t).
pub fn violation_gap(k: u32, t: f64) -> Result<GapReport> {
    if k < 2 {
        return Err(Error::Domain(format!("violation_gap requires k >= 2, got {k}")));
    }
    if !(0.0..1.0).contains(&t) || t == 0.0 {
        return Err(Error::Domain(format!("violation_gap: t = {t} outside (0, 1)")));
    }
    let phi1 = phi(1.0 / k as f64, t)?;
    let s_limit = entropy(&x_star(k, t)?);
    let hw_half = hw_upper_bound(k, t)? / 2.0;
    Ok(GapReport {
        k,
        t,
        phi1,
        s_limit,
        hw_half,
        delta: s_limit - hw_half,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    // Frozen oracle values (50-digit evaluation of the closed forms).
    const PHI_HALF_QUARTER: f64 = 0.93301270189221932;
    const PHI1_184: f64 = 0.14846005192978918;
    const S_184: f64 = 4.8561141342071584;
    const HW_184_TENTH: f64 = 9.7119407535192194;
    const HW_500_HALF: f64 = 6.907753278978137;
    const DELTA_184: f64 = 0.00014375744754868442;
    const DELTA_183: f64 = -0.00011349606397223275;
    const DELTA_500_HALF: f64 = 0.064018044185448352;
    const DELTA_500_TENTH: f64 = 0.042528659317501945;

    #[test]
    fn phi_saturated_branch() {
        assert_eq!(phi(0.6, 0.6).unwrap(), 1.0);
        assert_eq!(phi(0.5, 0.5).unwrap(), 1.0);
    }

    #[test]
    fn phi_at_zero_u_is_t() {
        assert_abs_diff_eq!(phi(0.0, 0.37).unwrap(), 0.37, epsilon = 1e-15);
    }

    #[test]
    fn phi_hand_value() {
        // 0.18 + 2*sqrt(0.0081)
        assert_abs_diff_eq!(phi(0.1, 0.1).unwrap(), 0.36, epsilon = 1e-15);
        assert_abs_diff_eq!(phi(0.5, 0.25).unwrap(), PHI_HALF_QUARTER, epsilon = 1e-15);
    }

    #[test]
    fn phi_rejects_out_of_range() {
        assert!(phi(-0.1, 0.5).is_err());
        assert!(phi(0.5, 1.1).is_err());
    }

    #[test]
    fn phi_continuous_at_seam() {
        for &u in &[0.1, 0.3, 0.5, 0.7, 0.9] {
            let t = 1.0 - u - 1e-13;
            assert!((phi(u, t).unwrap() - 1.0).abs() <= 1e-12);
        }
    }

    proptest! {
        #[test]
        fn phi_symmetric_exactly(u in 0.0..1.0f64, t in 0.0..1.0f64) {
            // same floating expression ordering on both sides
            prop_assert_eq!(phi(u, t).unwrap(), phi(t, u).unwrap());
        }

        #[test]
        fn phi_monotone_in_u(u in 0.0..0.99f64, t in 0.0..1.0f64) {
            let lo = phi(u, t).unwrap();
            let hi = phi((u + 0.01).min(1.0), t).unwrap();
            prop_assert!(hi >= lo - 1e-12);
        }

        #[test]
        fn simplex_output_is_feasible(v in proptest::collection::vec(-5.0..5.0f64, 1..12)) {
            let p = crate::matops::simplex_project(&v).unwrap();
            let sum: f64 = p.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-9);
            prop_assert!(p.iter().all(|&x| x >= 0.0));
            // idempotence
            let q = crate::matops::simplex_project(&p).unwrap();
            for (a, b) in p.iter().zip(q.iter()) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn t_norm_two_level_examples() {
        assert_abs_diff_eq!(t_norm_two_level(0.7, 0.7, 0.5, 0.25).unwrap(), 0.7, epsilon = 1e-15);
        assert_abs_diff_eq!(
            t_norm_two_level(0.0, 1.0, 0.5, 0.25).unwrap(),
            PHI_HALF_QUARTER,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            t_norm_two_level(0.2, 1.0, 0.5, 0.25).unwrap(),
            0.2 + 0.8 * PHI_HALF_QUARTER,
            epsilon = 1e-15
        );
        assert!(t_norm_two_level(0.5, 0.2, 0.5, 0.25).is_err());
        assert!(t_norm_two_level(-0.1, 0.2, 0.5, 0.25).is_err());
    }

    #[test]
    fn x_star_values() {
        let x = x_star(184, 0.1).unwrap();
        assert_abs_diff_eq!(x.probs()[0], PHI1_184, epsilon = 1e-14);
        let sum: f64 = x.probs().iter().sum();
        assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-12);

        // saturated branch: t + 1/k >= 1
        let x = x_star(2, 0.6).unwrap();
        assert_eq!(x.probs()[0], 1.0);
        assert_eq!(x.probs()[1], 0.0);

        assert!(x_star(1, 0.5).is_err());
    }

    #[test]
    fn entropy_basics() {
        let uniform = SpectrumVector::new(vec![0.25; 4]).unwrap();
        assert_abs_diff_eq!(entropy(&uniform), 4.0f64.ln(), epsilon = 1e-12);
        let pure = SpectrumVector::new(vec![1.0, 0.0, 0.0]).unwrap();
        assert_eq!(entropy(&pure), 0.0);
        let x = x_star(184, 0.1).unwrap();
        assert_abs_diff_eq!(entropy(&x), S_184, epsilon = 1e-11);
    }

    #[test]
    fn hw_values() {
        assert_abs_diff_eq!(hw_upper_bound(184, 0.1).unwrap(), HW_184_TENTH, epsilon = 1e-11);
        assert_abs_diff_eq!(hw_upper_bound(500, 0.5).unwrap(), HW_500_HALF, epsilon = 1e-11);
        // uniform case r = 1/k^2
        let k = 7u32;
        let r = 1.0 / (k as f64 * k as f64);
        assert_abs_diff_eq!(
            hw_upper_bound(k, r).unwrap(),
            (k as f64 * k as f64).ln(),
            epsilon = 1e-9
        );
        assert!(hw_upper_bound(184, 0.0).is_err());
        assert!(hw_upper_bound(184, 1.0).is_err());
    }

    #[test]
    fn gap_values() {
        let g = violation_gap(184, 0.1).unwrap();
        assert!(g.delta > 0.0);
        assert_abs_diff_eq!(g.delta, DELTA_184, epsilon = 1e-11);
        assert_abs_diff_eq!(g.delta, g.s_limit - g.hw_half, epsilon = 1e-12);

        let g = violation_gap(183, 0.1).unwrap();
        assert!(g.delta <= 0.0);
        assert_abs_diff_eq!(g.delta, DELTA_183, epsilon = 1e-11);

        let half = violation_gap(500, 0.5).unwrap();
        let tenth = violation_gap(500, 0.1).unwrap();
        assert!(half.delta > tenth.delta);
        assert_abs_diff_eq!(half.delta, DELTA_500_HALF, epsilon = 1e-11);
        assert_abs_diff_eq!(tenth.delta, DELTA_500_TENTH, epsilon = 1e-11);
    }

    #[test]
    fn gamma_star_values() {
        let g = gamma_star(2, 0.5).unwrap();
        assert_eq!(g.probs(), &[0.625, 0.125, 0.125, 0.125]);
        let g = gamma_star(1, 0.3).unwrap();
        assert_eq!(g.probs(), &[1.0]);
        let g = gamma_star(5, 0.2).unwrap();
        let sum: f64 = g.probs().iter().sum();
        assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn x_star_minimizes_entropy_over_two_level_family() {
        // Spot check at k=2, t=1/4: over feasible two-level spectra
        // (a, 1-a) in K_{k,t} (i.e. a <= phi(1/2, 1/4)), none beats x*.
        let k = 2u32;
        let t = 0.25;
        let s_star = entropy(&x_star(k, t).unwrap());
        let cap = phi(0.5, t).unwrap();
        for i in 0..=1000 {
            let a = 0.5 + (cap - 0.5) * i as f64 / 1000.0;
            let sv = SpectrumVector::new(vec![a, 1.0 - a]).unwrap();
            assert!(entropy(&sv) >= s_star - 1e-9);
        }
    }
}
