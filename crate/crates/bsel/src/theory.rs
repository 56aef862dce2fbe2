//! Asymptotic front-speed theory for the branching-selection system.
//!
//! The displacement law of one child is Bernoulli(p) on {0, 1}; its Cramer
//! rate function is the binary relative entropy
//!
//! ```text
//! Lambda(x) = x ln(x/p) + (1 - x) ln((1 - x)/(1 - p)),   x in [0, 1],
//! ```
//!
//! with the 0 ln 0 = 0 endpoint conventions. For p < 1/2 the limiting front
//! speed is the unique root v in (p, 1) of Lambda(v) = ln 2 (two children per
//! particle); for p >= 1/2 the limit is 1. Derived from v are the integer
//! horizon q = ceil(v/(1-v)) and the tilt ratio
//! gamma = (p/(1-p)) / (v/(1-v)) < 1, which satisfy the change-of-measure
//! identity ln 2 + ln((1-p)/(1-v)) = -v ln gamma exactly at the root.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TheoryError {
    #[error("rate function argument must lie in [0, 1], got {0}")]
    XOutOfRange(f64),
    #[error("step probability must lie strictly inside (0, 1), got {0}")]
    POutOfRange(f64),
    #[error("derived constants exist only for p < 1/2, got p = {0}")]
    NotSubcritical(f64),
    #[error("gap model with regime {0:?} needs N >= {1}, got {2}")]
    GapModelSize(Regime, u64, u64),
}

/// Which side of the exact-sampling threshold p = 1/2 the model sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Subcritical,
    Critical,
    Supercritical,
}

impl Regime {
    /// Classifies by comparison with 1/2 (exact at the representable 0.5).
    pub fn classify(p: f64) -> Result<Self, TheoryError> {
        check_p(p)?;
        Ok(if p < 0.5 {
            Regime::Subcritical
        } else if p == 0.5 {
            Regime::Critical
        } else {
            Regime::Supercritical
        })
    }
}

impl std::str::FromStr for Regime {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "subcritical" => Ok(Regime::Subcritical),
            "critical" => Ok(Regime::Critical),
            "supercritical" => Ok(Regime::Supercritical),
            other => Err(format!(
                "unknown regime '{other}' (expected subcritical|critical|supercritical)"
            )),
        }
    }
}

/// Constants derived from the rate-function root, defined for p < 1/2.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TheoryConstants {
    pub p: f64,
    /// Limiting front speed: the root of Lambda(v) = ln 2 in (p, 1).
    pub v: f64,
    /// Smallest integer q >= v/(1-v).
    pub q: u64,
    /// Tilt ratio (p/(1-p))/(v/(1-v)), strictly inside (0, 1).
    pub gamma: f64,
    /// The branching entropy ln 2 the root is matched against.
    pub log2: f64,
}

fn check_p(p: f64) -> Result<(), TheoryError> {
    if !p.is_finite() || p <= 0.0 || p >= 1.0 {
        return Err(TheoryError::POutOfRange(p));
    }
    Ok(())
}

/// Binary relative entropy `Lambda(x)` of Bernoulli(x) against Bernoulli(p).
///
/// Finite on all of [0, 1]: the endpoints evaluate to -ln(1-p) and -ln(p).
pub fn rate_function(x: f64, p: f64) -> Result<f64, TheoryError> {
    check_p(p)?;
    if !x.is_finite() || !(0.0..=1.0).contains(&x) {
        return Err(TheoryError::XOutOfRange(x));
    }
    let up = if x == 0.0 { 0.0 } else { x * (x / p).ln() };
    let down = if x == 1.0 {
        0.0
    } else {
        (1.0 - x) * ((1.0 - x) / (1.0 - p)).ln()
    };
    Ok(up + down)
}

/// d/dx Lambda(x) on (0, 1); used to polish the root.
fn rate_function_prime(x: f64, p: f64) -> f64 {
    (x * (1.0 - p) / (p * (1.0 - x))).ln()
}

/// Limiting front speed v(p): root of Lambda(v) = ln 2 for p < 1/2, else 1.
///
/// Bisection to 1e-12 followed by Newton polish to machine precision, so the
/// change-of-measure identity holds to ~1e-13 even over long horizons.
pub fn critical_speed(p: f64) -> Result<f64, TheoryError> {
    check_p(p)?;
    if p >= 0.5 {
        return Ok(1.0);
    }
    let target = std::f64::consts::LN_2;
    // Lambda - ln 2 is negative at p (value -ln 2) and positive at 1
    // (value ln(1/(2p)) > 0), and strictly increasing on (p, 1).
    let mut lo = p;
    let mut hi = 1.0;
    let f = |x: f64| rate_function(x, p).expect("x in (p, 1)") - target;
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut v = 0.5 * (lo + hi);
    for _ in 0..4 {
        let step = f(v) / rate_function_prime(v, p);
        let next = v - step;
        if next > p && next < 1.0 {
            v = next;
        }
    }
    Ok(v)
}

/// Derived constants for the subcritical regime (errors for p >= 1/2).
pub fn derived_constants(p: f64) -> Result<TheoryConstants, TheoryError> {
    check_p(p)?;
    if p >= 0.5 {
        return Err(TheoryError::NotSubcritical(p));
    }
    let v = critical_speed(p)?;
    let ratio = v / (1.0 - v);
    let q = ratio.ceil() as u64;
    let gamma = (p / (1.0 - p)) / ratio;
    Ok(TheoryConstants {
        p,
        v,
        q,
        gamma,
        log2: std::f64::consts::LN_2,
    })
}

/// Reference finite-size gap scale for each regime:
/// `1/ln(N)^2` (subcritical, N >= 2), `1/N` (critical), `exp(-N)` (supercritical).
pub fn gap_model(regime: Regime, n: u64) -> Result<f64, TheoryError> {
    match regime {
        Regime::Subcritical => {
            if n < 2 {
                return Err(TheoryError::GapModelSize(regime, 2, n));
            }
            let ln = (n as f64).ln();
            Ok(1.0 / (ln * ln))
        }
        Regime::Critical => {
            if n < 1 {
                return Err(TheoryError::GapModelSize(regime, 1, n));
            }
            Ok(1.0 / n as f64)
        }
        Regime::Supercritical => {
            if n < 1 {
                return Err(TheoryError::GapModelSize(regime, 1, n));
            }
            Ok((-(n as f64)).exp())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LN_2: f64 = std::f64::consts::LN_2;

    // Frozen against a 50-digit independent computation of the root of
    // Lambda(v) = ln 2 (residual ~1e-51) and the exact formulas for q, gamma.
    const V_QUARTER: f64 = 0.810710375084768237;
    const GAMMA_QUARTER: f64 = 0.077828708719575946;

    #[test]
    fn rate_function_values() {
        let r = rate_function(0.5, 0.25).unwrap();
        assert!((r - 0.143841036225890464).abs() < 1e-14, "{r}");
        let r1 = rate_function(1.0, 0.25).unwrap();
        assert!((r1 - 4.0f64.ln()).abs() < 1e-14);
        let r0 = rate_function(0.0, 0.25).unwrap();
        assert!((r0 - (4.0f64 / 3.0).ln()).abs() < 1e-14);
        assert_eq!(rate_function(0.25, 0.25).unwrap(), 0.0);
    }

    #[test]
    fn rate_function_domain() {
        assert!(rate_function(-0.1, 0.25).is_err());
        assert!(rate_function(1.1, 0.25).is_err());
        assert!(rate_function(f64::NAN, 0.25).is_err());
        assert!(rate_function(0.5, 0.0).is_err());
        assert!(rate_function(0.5, 1.0).is_err());
    }

    #[test]
    fn rate_function_zero_only_at_p_and_convex() {
        for &p in &[0.1, 0.25, 0.4, 0.6] {
            let mut prev_slope = f64::NEG_INFINITY;
            for i in 0..=200 {
                let x = i as f64 / 200.0;
                let l = rate_function(x, p).unwrap();
                assert!(l.is_finite());
                if (x - p).abs() > 1e-9 {
                    assert!(l > 0.0, "Lambda({x},{p}) = {l}");
                }
                if i > 0 {
                    let xp = (i - 1) as f64 / 200.0;
                    let slope = (l - rate_function(xp, p).unwrap()) / (x - xp);
                    assert!(slope > prev_slope, "secant slopes must increase");
                    prev_slope = slope;
                }
            }
        }
    }

    #[test]
    fn critical_speed_root_and_regimes() {
        let v = critical_speed(0.25).unwrap();
        assert!((v - V_QUARTER).abs() < 1e-12, "{v}");
        assert_eq!(critical_speed(0.5).unwrap(), 1.0);
        assert_eq!(critical_speed(0.75).unwrap(), 1.0);

        // frozen roots on a grid (50-digit oracle)
        for (p, want) in [
            (0.1, 0.577490271326076156),
            (0.3, 0.864756537479001835),
            (0.4, 0.948694636308642572),
            (0.45, 0.979187632953840448),
        ] {
            let v = critical_speed(p).unwrap();
            assert!((v - want).abs() < 1e-12, "v({p}) = {v}");
        }
    }

    #[test]
    fn critical_speed_satisfies_level_equation_on_grid() {
        let mut p = 0.05;
        let mut prev_v = 0.0;
        while p <= 0.4501 {
            let v = critical_speed(p).unwrap();
            let resid = (rate_function(v, p).unwrap() - LN_2).abs();
            assert!(resid <= 1e-10, "residual {resid} at p={p}");
            assert!(v > p && v < 1.0);
            assert!(v > prev_v, "v(p) must increase in p");
            prev_v = v;
            p += 0.05;
        }
    }

    #[test]
    fn derived_constants_quarter() {
        let c = derived_constants(0.25).unwrap();
        assert_eq!(c.q, 5);
        assert!((c.gamma - GAMMA_QUARTER).abs() < 1e-12, "{}", c.gamma);
        assert!((c.v - V_QUARTER).abs() < 1e-12);
        assert_eq!(c.log2, LN_2);
        assert!(derived_constants(0.5).is_err());
        assert!(derived_constants(0.75).is_err());
    }

    #[test]
    fn change_of_measure_identity_on_grid() {
        let mut p = 0.05;
        while p <= 0.4501 {
            let c = derived_constants(p).unwrap();
            assert!(c.gamma > 0.0 && c.gamma < 1.0);
            assert!(c.q >= 1);
            assert!(c.q as f64 >= c.v / (1.0 - c.v));
            assert!((c.q as f64) < c.v / (1.0 - c.v) + 1.0);
            let resid = LN_2 + ((1.0 - p) / (1.0 - c.v)).ln() + c.v * c.gamma.ln();
            assert!(resid.abs() <= 1e-10, "identity residual {resid} at p={p}");
            p += 0.05;
        }
    }

    #[test]
    fn regime_classification() {
        assert_eq!(Regime::classify(0.25).unwrap(), Regime::Subcritical);
        assert_eq!(Regime::classify(0.5).unwrap(), Regime::Critical);
        assert_eq!(Regime::classify(0.75).unwrap(), Regime::Supercritical);
        assert!(Regime::classify(0.0).is_err());
        assert!(Regime::classify(1.0).is_err());
    }

    #[test]
    fn gap_model_scales() {
        let g = gap_model(Regime::Subcritical, 100).unwrap();
        let ln100 = 100f64.ln();
        assert!((g - 1.0 / (ln100 * ln100)).abs() < 1e-15);
        assert_eq!(gap_model(Regime::Critical, 8).unwrap(), 0.125);
        assert!((gap_model(Regime::Supercritical, 3).unwrap() - (-3.0f64).exp()).abs() < 1e-18);
        assert!(gap_model(Regime::Subcritical, 1).is_err());
    }
}
