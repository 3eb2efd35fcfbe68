//! Hypotheses and conclusions of the coexistence theorems, evaluated for a
//! concrete parameter set.
//!
//! All checks compare user-supplied coefficients against exact identities
//! with an absolute tolerance of [`PARAM_TOL`].

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::exec::Execution;
use crate::map::{MapParams, PARAM_TOL};
use crate::orbit::{assemble_orbit, srk_quadratic, Branch, OrbitOptions, RootPair};
use crate::stability::{predict_asymptotics, AsymptoticPrediction};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TheoryError {
    #[error("d1 = 0: the discriminant is undefined")]
    DivisionByZero,
    #[error("negative discriminant (Delta = {0})")]
    NegativeDiscriminant(f64),
    #[error("only {found} orbits in range; at least 4 are needed for a growth fit")]
    InsufficientData { found: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Pass,
    Fail,
    NotApplicable,
}

impl Verdict {
    fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "FAIL",
            Verdict::NotApplicable => "n/a",
        })
    }
}

/// A single evaluated condition with the quantity it was decided on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Check {
    pub value: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SignCase {
    /// `λσ = 1`
    Preserving,
    /// `λσ = −1`
    Reversing,
    Neither,
}

/// Which `k` the sufficient conditions promise single-round orbits for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Parity {
    AllK,
    EvenK,
    OddK,
    None,
}

impl Parity {
    pub fn admits(self, k: u32) -> bool {
        match self {
            Parity::AllK => true,
            Parity::EvenK => k.is_multiple_of(2),
            Parity::OddK => k % 2 == 1,
            Parity::None => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Ineq13 {
    Pass,
    /// `c2 y*/x* ≤ −1`
    FailLeft,
    /// `c2 y*/x* ≥ 1 − √Δ/2`
    FailRight,
}

impl Ineq13 {
    pub fn verdict(self) -> Verdict {
        Verdict::from_bool(self == Ineq13::Pass)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoryReport {
    /// Tangency `d2 = 0`.
    pub d2_zero: Check,
    /// Quadratic tangency `d5 ≠ 0`.
    pub d5_nonzero: Check,
    /// `|λσ| = 1`; value is `λσ`.
    pub det_one: Check,
    /// `|d1| = y*/x*` (with `d1 > 0` when `λσ = 1`); value is `d1 x*/y*`.
    pub global_resonance: Check,
    pub sign_case: SignCase,
    /// `a1 + b1 = 0`, only required when `λσ = 1`.
    pub a1_plus_b1: Check,
    /// `Δ > 0`.
    pub delta: Check,
    pub ineq13: Option<Ineq13>,
    pub parity: Parity,
    pub predicted: Option<AsymptoticPrediction>,
}

impl TheoryReport {
    /// Name of the sufficient-condition theorem that applies.
    pub fn applicable_theorem(&self) -> &'static str {
        match self.sign_case {
            SignCase::Preserving => "orientation-preserving (lambda*sigma = 1)",
            SignCase::Reversing => "orientation-reversing (lambda*sigma = -1)",
            SignCase::Neither => "none (|lambda*sigma| != 1)",
        }
    }

    /// Conditions that failed, by field name.
    pub fn failed_conditions(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        let checks = [
            ("d2_zero", self.d2_zero.verdict),
            ("d5_nonzero", self.d5_nonzero.verdict),
            ("det_one", self.det_one.verdict),
            ("global_resonance", self.global_resonance.verdict),
            ("a1_plus_b1", self.a1_plus_b1.verdict),
            ("delta", self.delta.verdict),
        ];
        for (name, v) in checks {
            if v == Verdict::Fail {
                out.push(name);
            }
        }
        if matches!(self.ineq13, Some(Ineq13::FailLeft | Ineq13::FailRight)) {
            out.push("ineq13");
        }
        out
    }

    /// True when every hypothesis of the applicable sufficiency theorem holds.
    pub fn all_hypotheses_pass(&self) -> bool {
        self.failed_conditions().is_empty() && self.ineq13 == Some(Ineq13::Pass) && self.sign_case != SignCase::Neither
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

impl fmt::Display for TheoryReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "theory report")?;
        writeln!(f, "  applicable theorem : {}", self.applicable_theorem())?;
        writeln!(
            f,
            "  d2 = 0             : {} (d2 = {})",
            self.d2_zero.verdict, self.d2_zero.value
        )?;
        writeln!(
            f,
            "  d5 != 0            : {} (d5 = {})",
            self.d5_nonzero.verdict, self.d5_nonzero.value
        )?;
        writeln!(
            f,
            "  |lambda*sigma| = 1 : {} (lambda*sigma = {})",
            self.det_one.verdict, self.det_one.value
        )?;
        writeln!(
            f,
            "  global resonance   : {} (d1*x*/y* = {})",
            self.global_resonance.verdict, self.global_resonance.value
        )?;
        writeln!(f, "  sign case          : {:?}", self.sign_case)?;
        writeln!(
            f,
            "  a1 + b1 = 0        : {} (a1 + b1 = {})",
            self.a1_plus_b1.verdict, self.a1_plus_b1.value
        )?;
        writeln!(
            f,
            "  Delta > 0          : {} (Delta = {})",
            self.delta.verdict, self.delta.value
        )?;
        match self.ineq13 {
            Some(i) => writeln!(f, "  stability ineq.    : {} ({:?})", i.verdict(), i)?,
            None => writeln!(f, "  stability ineq.    : n/a (Delta < 0)")?,
        }
        writeln!(f, "  parity             : {:?}", self.parity)?;
        if let Some(p) = self.predicted {
            writeln!(
                f,
                "  predicted limits   : tau- = {}, tau+ = {}, delta = {}",
                p.tau_inf_minus, p.tau_inf_plus, p.delta_inf
            )?;
        }
        write!(
            f,
            "  verdict            : {}",
            if self.all_hypotheses_pass() {
                "all hypotheses pass"
            } else {
                "hypotheses violated"
            }
        )
    }
}

fn is_zero(v: f64) -> bool {
    v.abs() <= PARAM_TOL
}

/// `Δ = (1 − c2 y*/x* − d4 y*/d1)² − 4 d5 (d3 x*² + c1 d1 x*)`.
pub fn compute_delta(params: &MapParams) -> Result<f64, TheoryError> {
    if params.d1 == 0.0 {
        return Err(TheoryError::DivisionByZero);
    }
    let p = params;
    let lead = 1.0 - p.c2 * p.y_star / p.x_star - p.d4 * p.y_star / p.d1;
    Ok(lead * lead - 4.0 * p.d5 * (p.d3 * p.x_star * p.x_star + p.c1 * p.d1 * p.x_star))
}

/// `−1 < c2 y*/x* < 1 − √Δ/2`, both strict.
pub fn check_ineq13(params: &MapParams) -> Result<Ineq13, TheoryError> {
    let delta = compute_delta(params)?;
    ineq13_with_delta(params.c2 * params.y_star / params.x_star, delta)
}

fn ineq13_with_delta(ratio: f64, delta: f64) -> Result<Ineq13, TheoryError> {
    if delta < 0.0 {
        return Err(TheoryError::NegativeDiscriminant(delta));
    }
    Ok(if !(ratio > -1.0) {
        Ineq13::FailLeft
    } else if !(ratio < 1.0 - delta.sqrt() / 2.0) {
        Ineq13::FailRight
    } else {
        Ineq13::Pass
    })
}

pub fn sign_case(params: &MapParams) -> SignCase {
    let prod = params.eigen_product();
    if is_zero(prod - 1.0) {
        SignCase::Preserving
    } else if is_zero(prod + 1.0) {
        SignCase::Reversing
    } else {
        SignCase::Neither
    }
}

pub fn parity(params: &MapParams) -> Parity {
    let ratio = params.y_star / params.x_star;
    match sign_case(params) {
        SignCase::Preserving if is_zero(params.d1 - ratio) => Parity::AllK,
        SignCase::Reversing if is_zero(params.d1 - ratio) => Parity::EvenK,
        SignCase::Reversing if is_zero(params.d1 + ratio) => Parity::OddK,
        _ => Parity::None,
    }
}

/// Evaluates every condition; failures are verdicts, never errors.
pub fn full_report(params: &MapParams) -> TheoryReport {
    let case = sign_case(params);
    let prod = params.eigen_product();
    let resonance = params.d1 * params.x_star / params.y_star;
    let resonance_ok = match case {
        SignCase::Preserving => is_zero(resonance - 1.0),
        _ => is_zero(resonance.abs() - 1.0),
    };
    let a1b1 = params.a1 + params.b1;
    let a1b1_verdict = match case {
        SignCase::Preserving => Verdict::from_bool(is_zero(a1b1)),
        _ => Verdict::NotApplicable,
    };
    let delta = compute_delta(params).ok();
    let ratio = params.c2 * params.y_star / params.x_star;
    let ineq13 = delta.and_then(|d| ineq13_with_delta(ratio, d).ok());
    let predicted = match delta {
        Some(d) if d >= 0.0 => predict_asymptotics(params).ok(),
        _ => None,
    };
    TheoryReport {
        d2_zero: Check {
            value: params.d2,
            verdict: Verdict::from_bool(is_zero(params.d2)),
        },
        d5_nonzero: Check {
            value: params.d5,
            verdict: Verdict::from_bool(!is_zero(params.d5)),
        },
        det_one: Check {
            value: prod,
            verdict: Verdict::from_bool(is_zero(prod.abs() - 1.0)),
        },
        global_resonance: Check {
            value: resonance,
            verdict: Verdict::from_bool(resonance_ok),
        },
        sign_case: case,
        a1_plus_b1: Check {
            value: a1b1,
            verdict: a1b1_verdict,
        },
        delta: Check {
            value: delta.unwrap_or(f64::NAN),
            verdict: Verdict::from_bool(delta.is_some_and(|d| d > 0.0)),
        },
        ineq13,
        parity: parity(params),
        predicted,
    }
}

/// `τ_k` along one branch of single-round orbits and its fitted growth.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthDiagnostic {
    pub k_values: Vec<u32>,
    pub tau_values: Vec<f64>,
    /// `exp(slope)` of the least-squares line through `log|τ_k|`.
    pub fitted_ratio: f64,
    /// All `|τ_k|` vanished, so no growth could be fitted.
    pub degenerate: bool,
}

/// Below this every `|τ_k|` counts as zero.
const FLAT_TAU: f64 = 1e-9;

/// Follows one branch of single-round orbits over `k_range` and fits the
/// geometric growth rate of `|τ_k|`.
///
/// The branch starts on the `u_minus` root at the first `k` with real roots
/// and is then continued by picking, at each `k`, the root whose rescaled
/// offset `u·|σ|^k` is closest to the previous one on the same parity. This
/// keeps the branch identity through root crossings, where the `∓` labels
/// swap. Only orbits whose itinerary is valid are used; the fit runs over
/// the parity class with more orbits.
pub fn tau_growth_experiment(
    params: &MapParams,
    k_range: std::ops::RangeInclusive<u32>,
) -> Result<GrowthDiagnostic, TheoryError> {
    let opts = OrbitOptions::default();
    let abs_sigma = params.sigma.abs();
    let mut last_scaled: [Option<f64>; 2] = [None, None];
    let mut ks = Vec::new();
    let mut taus = Vec::new();
    for k in k_range {
        let Ok(roots) = srk_quadratic(params, k) else { continue };
        let RootPair { u_minus, u_plus } = roots;
        let scale = abs_sigma.powi(k as i32);
        let parity = (k % 2) as usize;
        let chosen = match (u_minus, u_plus, last_scaled[parity]) {
            (Some(m), Some(p), Some(prev)) => {
                if (p * scale - prev).abs() < (m * scale - prev).abs() {
                    (p, Branch::Plus)
                } else {
                    (m, Branch::Minus)
                }
            }
            (Some(m), _, _) => (m, Branch::Minus),
            (None, Some(p), _) => (p, Branch::Plus),
            (None, None, _) => continue,
        };
        last_scaled[parity] = Some(chosen.0 * scale);
        if let Ok(orbit) = assemble_orbit(params, k, chosen.0, chosen.1, &opts) {
            ks.push(k);
            taus.push(orbit.trace);
        }
    }
    if ks.len() < 4 {
        return Err(TheoryError::InsufficientData { found: ks.len() });
    }
    let even: Vec<usize> = (0..ks.len()).filter(|&i| ks[i] % 2 == 0).collect();
    let odd: Vec<usize> = (0..ks.len()).filter(|&i| ks[i] % 2 == 1).collect();
    let class = if odd.len() > even.len() { odd } else { even };
    let samples: Vec<(f64, f64)> = class
        .iter()
        .filter(|&&i| taus[i].abs() > FLAT_TAU)
        .map(|&i| (f64::from(ks[i]), taus[i].abs().ln()))
        .collect();
    let (fitted_ratio, degenerate) = if samples.len() < 2 {
        (1.0, true)
    } else {
        (least_squares_slope(&samples).exp(), false)
    };
    Ok(GrowthDiagnostic {
        k_values: ks,
        tau_values: taus,
        fitted_ratio,
        degenerate,
    })
}

fn least_squares_slope(samples: &[(f64, f64)]) -> f64 {
    let n = samples.len() as f64;
    let mx = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let my = samples.iter().map(|s| s.1).sum::<f64>() / n;
    let sxy: f64 = samples.iter().map(|s| (s.0 - mx) * (s.1 - my)).sum();
    let sxx: f64 = samples.iter().map(|s| (s.0 - mx) * (s.0 - mx)).sum();
    sxy / sxx
}

/// Runs the growth experiment for several parameter sets concurrently.
pub fn tau_growth_batch(
    cases: &[MapParams],
    k_range: std::ops::RangeInclusive<u32>,
    exec: Execution,
) -> Vec<Result<GrowthDiagnostic, TheoryError>> {
    exec.map(cases, |p| tau_growth_experiment(p, k_range.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::ParamSet;

    #[test]
    fn delta_examples() {
        for set in ParamSet::ALL {
            assert_eq!(compute_delta(&MapParams::example(set)).unwrap(), 2.25);
        }
        let p = MapParams::new(0.8, 1.25, 0.0, 1.0, 3.7);
        assert_eq!(compute_delta(&p).unwrap(), 1.0);
        let mut p = MapParams::new(0.8, 1.25, 0.0, 1.0, 1.0);
        p.c1 = 1.0;
        p.d3 = 1.0;
        assert_eq!(compute_delta(&p).unwrap(), -7.0);
        let p = MapParams::new(0.8, 1.25, 0.0, 0.0, 1.0);
        assert_eq!(compute_delta(&p), Err(TheoryError::DivisionByZero));
    }

    #[test]
    fn ineq13_examples() {
        for set in ParamSet::ALL {
            assert_eq!(check_ineq13(&MapParams::example(set)).unwrap(), Ineq13::Pass);
        }
        // c2 = 0.3 with d4 chosen so that Delta = (1 - 0.3 + 0.8)^2 = 2.25
        let mut p = MapParams::new(0.8, 1.25, 0.3, 1.0, 1.0);
        p.d4 = -0.8;
        assert!((compute_delta(&p).unwrap() - 2.25).abs() < 1e-12);
        assert_eq!(check_ineq13(&p).unwrap(), Ineq13::FailRight);
        let p = MapParams::new(0.8, 1.25, -1.0, 1.0, 1.0);
        assert_eq!(check_ineq13(&p).unwrap(), Ineq13::FailLeft);
        let mut p = MapParams::new(0.8, 1.25, 0.0, 1.0, 1.0);
        p.c1 = 1.0;
        p.d3 = 1.0;
        assert!(matches!(check_ineq13(&p), Err(TheoryError::NegativeDiscriminant(_))));
    }

    #[test]
    fn ineq13_reduces_to_abs_c2_below_one() {
        for i in -300..=300 {
            let c2 = i as f64 / 100.0 + 0.005;
            let p = MapParams::new(0.8, 1.25, c2, 1.0, 1.0);
            assert_eq!(check_ineq13(&p).unwrap() == Ineq13::Pass, c2.abs() < 1.0, "c2 = {c2}");
        }
    }

    #[test]
    fn reports_for_the_example_sets() {
        let r = full_report(&MapParams::example(ParamSet::Set20));
        assert!(r.all_hypotheses_pass());
        assert_eq!(r.sign_case, SignCase::Preserving);
        assert_eq!(r.parity, Parity::AllK);
        let r = full_report(&MapParams::example(ParamSet::Set21));
        assert_eq!((r.sign_case, r.parity), (SignCase::Preserving, Parity::AllK));
        assert!(r.all_hypotheses_pass());
        let r = full_report(&MapParams::example(ParamSet::Set22));
        assert_eq!((r.sign_case, r.parity), (SignCase::Reversing, Parity::EvenK));
        assert!(r.all_hypotheses_pass());
        assert_eq!(r.a1_plus_b1.verdict, Verdict::NotApplicable);
        let r = full_report(&MapParams::example(ParamSet::Set23));
        assert_eq!((r.sign_case, r.parity), (SignCase::Reversing, Parity::OddK));
        assert!(r.all_hypotheses_pass());
    }

    #[test]
    fn single_violations_are_isolated() {
        let base = MapParams::example(ParamSet::Set20);
        let mut p = base;
        p.sigma = 1.3;
        let r = full_report(&p);
        assert_eq!(r.failed_conditions(), vec!["det_one"]);
        assert!((r.det_one.value - 1.04).abs() < 1e-12);
        assert_eq!(r.parity, Parity::None);

        let mut p = base;
        p.a1 = 0.2;
        assert_eq!(full_report(&p).failed_conditions(), vec!["a1_plus_b1"]);
        p.b1 = -0.2;
        assert!(full_report(&p).all_hypotheses_pass());

        let mut p = base;
        p.d2 = 0.05;
        assert_eq!(full_report(&p).failed_conditions(), vec!["d2_zero"]);
    }

    #[test]
    fn negative_orientation_ignores_a1_b1() {
        let mut p = MapParams::example(ParamSet::Set22);
        p.a1 = 0.4;
        assert!(full_report(&p).all_hypotheses_pass());
    }

    #[test]
    fn text_and_json_forms() {
        let r = full_report(&MapParams::example(ParamSet::Set20));
        let text = r.to_string();
        assert!(text.contains("all hypotheses pass"));
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["parity"], "AllK");
        assert_eq!(v["delta"]["value"], 2.25);
    }

    #[test]
    fn flat_growth_for_the_unperturbed_family() {
        let g = tau_growth_experiment(&MapParams::example(ParamSet::Set20), 4..=14).unwrap();
        assert!(g.degenerate);
        assert_eq!(g.fitted_ratio, 1.0);
        assert_eq!(g.k_values.len(), 11);
        assert!(g.tau_values.iter().all(|t| t.abs() < 1e-12));
    }

    #[test]
    fn tangency_violation_grows_like_sigma() {
        let mut p = MapParams::example(ParamSet::Set20);
        p.d2 = 0.05;
        let g = tau_growth_experiment(&p, 6..=16).unwrap();
        assert!(!g.degenerate);
        assert!((g.fitted_ratio - 1.25).abs() < 0.1 * 1.25, "{}", g.fitted_ratio);
    }

    #[test]
    fn too_few_orbits() {
        let p = MapParams::example(ParamSet::Set22);
        // only k = 2 and k = 4 admit orbits here
        assert_eq!(
            tau_growth_experiment(&p, 1..=4),
            Err(TheoryError::InsufficientData { found: 2 })
        );
    }
}
