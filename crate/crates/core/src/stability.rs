//! Monodromy matrices of periodic orbits and their trace/determinant
//! classification.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::map::{jacobian_f, Jacobian2, MapParams, Point2};
use crate::theory::{compute_delta, TheoryError};

/// Distance to the stability-triangle edges treated as non-hyperbolic.
pub const CLASSIFY_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StabilityError {
    #[error("negative discriminant (Delta = {0}); no real asymptotic trace")]
    NegativeDiscriminant(f64),
    #[error(transparent)]
    Theory(#[from] TheoryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StabilityClass {
    AsymptoticallyStable,
    Saddle,
    Source,
    NonHyperbolic,
}

impl StabilityClass {
    pub fn as_str(self) -> &'static str {
        match self {
            StabilityClass::AsymptoticallyStable => "AsymptoticallyStable",
            StabilityClass::Saddle => "Saddle",
            StabilityClass::Source => "Source",
            StabilityClass::NonHyperbolic => "NonHyperbolic",
        }
    }
}

impl fmt::Display for StabilityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StabilityClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "AsymptoticallyStable" => Ok(StabilityClass::AsymptoticallyStable),
            "Saddle" => Ok(StabilityClass::Saddle),
            "Source" => Ok(StabilityClass::Source),
            "NonHyperbolic" => Ok(StabilityClass::NonHyperbolic),
            other => Err(format!("unknown stability class {other:?}")),
        }
    }
}

/// Limiting trace and determinant of the two single-round branches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticPrediction {
    pub tau_inf_minus: f64,
    pub tau_inf_plus: f64,
    pub delta_inf: f64,
}

/// Ordered product `Df(p_{n-1}) ⋯ Df(p_0)` over one period.
///
/// An empty orbit gives the identity.
pub fn orbit_jacobian(params: &MapParams, points: &[Point2]) -> Jacobian2 {
    points
        .iter()
        .fold(Jacobian2::IDENTITY, |acc, &p| jacobian_f(params, p).matmul(&acc))
}

/// Classifies a period-n orbit from the trace and determinant of `Df^n`.
///
/// Uses the characteristic polynomial `p(μ) = μ² − τμ + δ` at `μ = ±1`:
/// the interior of the triangle `|τ| − 1 < δ < 1` is asymptotically
/// stable, a sign change between `p(1)` and `p(−1)` is a saddle.
pub fn classify(tau: f64, delta: f64) -> StabilityClass {
    classify_with_tol(tau, delta, CLASSIFY_TOL)
}

pub fn classify_with_tol(tau: f64, delta: f64, tol: f64) -> StabilityClass {
    let p_plus = 1.0 - tau + delta;
    let p_minus = 1.0 + tau + delta;
    if p_plus.abs() <= tol || p_minus.abs() <= tol {
        return StabilityClass::NonHyperbolic;
    }
    if tau * tau < 4.0 * delta {
        // complex pair with modulus sqrt(δ)
        return if (delta - 1.0).abs() <= tol {
            StabilityClass::NonHyperbolic
        } else if delta < 1.0 {
            StabilityClass::AsymptoticallyStable
        } else {
            StabilityClass::Source
        };
    }
    if delta < 1.0 - tol && p_plus > tol && p_minus > tol {
        StabilityClass::AsymptoticallyStable
    } else if p_plus * p_minus < 0.0 {
        StabilityClass::Saddle
    } else {
        StabilityClass::Source
    }
}

/// Limits `τ∞± = 1 − c2 y*/x* ± √Δ` and `δ∞ = −c2 y*/x*`, valid in both
/// orientation cases.
pub fn predict_asymptotics(params: &MapParams) -> Result<AsymptoticPrediction, StabilityError> {
    let delta = compute_delta(params)?;
    if delta < 0.0 {
        return Err(StabilityError::NegativeDiscriminant(delta));
    }
    let ratio = params.c2 * params.y_star / params.x_star;
    let root = delta.sqrt();
    Ok(AsymptoticPrediction {
        tau_inf_minus: 1.0 - ratio - root,
        tau_inf_plus: 1.0 - ratio + root,
        delta_inf: -ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::ParamSet;

    /// Eigenvalue-based reference classification (independent of the
    /// triangle test).
    fn classify_by_eigenvalues(tau: f64, delta: f64, tol: f64) -> StabilityClass {
        let disc = tau * tau - 4.0 * delta;
        let moduli = if disc >= 0.0 {
            let s = disc.sqrt();
            [((tau + s) / 2.0).abs(), ((tau - s) / 2.0).abs()]
        } else {
            let m = delta.sqrt();
            [m, m]
        };
        if moduli.iter().any(|m| (m - 1.0).abs() <= tol) {
            StabilityClass::NonHyperbolic
        } else {
            match moduli.iter().filter(|m| **m > 1.0).count() {
                0 => StabilityClass::AsymptoticallyStable,
                1 => StabilityClass::Saddle,
                _ => StabilityClass::Source,
            }
        }
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify(0.0, 0.5), StabilityClass::AsymptoticallyStable);
        assert_eq!(classify(3.0, 0.5), StabilityClass::Saddle);
        assert_eq!(classify(2.0, 1.0), StabilityClass::NonHyperbolic);
        assert_eq!(classify(0.0, 2.0), StabilityClass::Source);
        assert_eq!(classify(5.0, 6.0), StabilityClass::Source);
        assert_eq!(classify(-1.5, -2.0), StabilityClass::Saddle);
    }

    #[test]
    fn classify_agrees_with_eigenvalues_on_grid() {
        let n = 100;
        let mut checked = [0usize; 4];
        for i in 0..n {
            for j in 0..n {
                let tau = -4.0 + 8.0 * i as f64 / (n - 1) as f64;
                let delta = -2.0 + 4.0 * j as f64 / (n - 1) as f64;
                let expected = classify_by_eigenvalues(tau, delta, 1e-7);
                assert_eq!(classify(tau, delta), expected, "tau = {tau}, delta = {delta}");
                checked[expected as usize] += 1;
            }
        }
        // stable, saddle and source cells are all represented
        assert!(checked[0] > 0 && checked[1] > 0 && checked[2] > 0);
    }

    #[test]
    fn nonhyperbolic_cases() {
        // eigenvalue -1
        assert_eq!(classify(-1.5, 0.5), StabilityClass::NonHyperbolic);
        // complex pair on the unit circle
        assert_eq!(classify(0.3, 1.0), StabilityClass::NonHyperbolic);
        assert_eq!(classify(0.3, 1.0 + 1e-10), StabilityClass::NonHyperbolic);
    }

    #[test]
    fn orbit_jacobian_of_fixed_point_and_empty_orbit() {
        let p = MapParams::example(ParamSet::Set20);
        assert_eq!(orbit_jacobian(&p, &[]), Jacobian2::IDENTITY);
        assert_eq!(
            orbit_jacobian(&p, &[Point2::new(1.0, 1.0)]),
            Jacobian2::new(0.0, -0.5, 1.0, 0.0)
        );
    }

    #[test]
    fn orbit_jacobian_of_sr3() {
        let p = MapParams::example(ParamSet::Set20);
        let pts = [
            Point2::new(0.512, 1.0),
            Point2::new(1.0, 0.512),
            Point2::new(0.8, 0.64),
            Point2::new(0.64, 0.8),
        ];
        let j = orbit_jacobian(&p, &pts);
        let expect = Jacobian2::new(0.0, -0.256, 1.953125, 0.0);
        for r in 0..2 {
            for c in 0..2 {
                assert!((j.0[r][c] - expect.0[r][c]).abs() < 1e-12);
            }
        }
        assert!(j.trace().abs() < 1e-12);
        assert!((j.det() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn asymptotic_predictions() {
        for set in ParamSet::ALL {
            let a = predict_asymptotics(&MapParams::example(set)).unwrap();
            assert!(a.tau_inf_minus.abs() < 1e-15);
            assert!((a.tau_inf_plus - 3.0).abs() < 1e-15);
            assert!((a.delta_inf - 0.5).abs() < 1e-15);
        }
        let p = MapParams::new(0.8, 1.25, 0.0, 1.0, 1.0);
        let a = predict_asymptotics(&p).unwrap();
        assert_eq!((a.tau_inf_minus, a.tau_inf_plus, a.delta_inf), (0.0, 2.0, 0.0));
        let p = MapParams::new(0.8, 1.25, -1.0, 1.0, 1.0);
        let a = predict_asymptotics(&p).unwrap();
        assert_eq!((a.tau_inf_minus, a.tau_inf_plus, a.delta_inf), (0.0, 4.0, 1.0));
        assert_eq!(classify(a.tau_inf_minus, a.delta_inf), StabilityClass::NonHyperbolic);

        let mut neg = MapParams::new(0.8, 1.25, 0.0, 1.0, 1.0);
        neg.c1 = 1.0;
        neg.d3 = 1.0;
        assert!(matches!(
            predict_asymptotics(&neg),
            Err(StabilityError::NegativeDiscriminant(_))
        ));
    }
}
