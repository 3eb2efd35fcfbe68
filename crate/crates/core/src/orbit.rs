//! Single-round periodic orbits: one excursion point above `h1` followed by
//! `k` points below `h0`, with period `k + 1`.
//!
//! Where the itinerary stays out of the blend strip the orbit solves a
//! quadratic in `u = y − y*` at the excursion point. Otherwise a Newton
//! iteration on `f^{k+1}(p) − p` takes over.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::exec::Execution;
use crate::map::{
    eval_f, eval_u0, eval_u1, iterate_with_jacobian, region_of, Jacobian2, MapError, MapParams, Point2, Region,
    DEFAULT_ESCAPE_RADIUS,
};
use crate::stability::{classify, orbit_jacobian, StabilityClass};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OrbitError {
    #[error("leading coefficient of the SR_{k} quadratic vanishes")]
    DegenerateQuadratic { k: u32 },
    #[error("itinerary invalid: point {step} lies in the {region} region")]
    ItineraryInvalid { step: usize, region: Region },
    #[error("closed-form orbit has residual {residual:e} under the full map")]
    ResidualTooLarge { residual: f64 },
    #[error("Newton did not converge after {iterations} iterations (residual {last_residual:e})")]
    NoConvergence { iterations: usize, last_residual: f64 },
    #[error("singular Newton matrix at iterate {at_iterate}")]
    SingularJacobian { at_iterate: usize },
    #[error("orbit escaped at step {at_step}")]
    Escaped { at_step: usize },
    #[error("orbit is not minimal: it repeats after {divisor} steps")]
    NotMinimal { divisor: usize },
    #[error("period must be at least 1")]
    InvalidPeriod,
}

impl From<MapError> for OrbitError {
    fn from(e: MapError) -> Self {
        match e {
            MapError::Escaped { at_step, .. } => OrbitError::Escaped { at_step },
            // iteration only produces escapes
            other => unreachable!("unexpected map error {other}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitOptions {
    pub newton_tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    pub min_det: f64,
    pub minimality_tol: f64,
    pub escape_radius: f64,
}

impl Default for OrbitOptions {
    fn default() -> Self {
        Self {
            newton_tol: 1e-12,
            max_iter: 50,
            max_halvings: 20,
            min_det: 1e-14,
            minimality_tol: 1e-8,
            escape_radius: DEFAULT_ESCAPE_RADIUS,
        }
    }
}

/// Which root of the single-round quadratic an orbit comes from. `Minus`
/// is the branch that is asymptotically stable for large `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Branch {
    Minus,
    Plus,
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Branch::Minus => "minus",
            Branch::Plus => "plus",
        })
    }
}

impl std::str::FromStr for Branch {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "minus" => Ok(Branch::Minus),
            "plus" => Ok(Branch::Plus),
            other => Err(format!("unknown branch {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OrbitSource {
    ClosedForm,
    Newton,
}

/// Real roots `u = y_k − y*` of the single-round fixed-point quadratic.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct RootPair {
    pub u_minus: Option<f64>,
    pub u_plus: Option<f64>,
}

impl RootPair {
    pub fn get(&self, branch: Branch) -> Option<f64> {
        match branch {
            Branch::Minus => self.u_minus,
            Branch::Plus => self.u_plus,
        }
    }

    pub fn exists(&self) -> bool {
        self.u_minus.is_some() || self.u_plus.is_some()
    }
}

/// Excursion point as an affine function of `u`: `x = alpha + beta·u`.
#[derive(Debug, Clone, Copy)]
struct ExcursionLine {
    alpha: f64,
    beta: f64,
}

fn excursion_line(params: &MapParams, k: u32) -> ExcursionLine {
    // x = λ^k (x* + c1 x + c2 u)  =>  x = λ^k (x* + c2 u) / (1 − c1 λ^k)
    let lk = params.lambda.powi(k as i32);
    let denom = 1.0 - params.c1 * lk;
    ExcursionLine {
        alpha: lk * params.x_star / denom,
        beta: lk * params.c2 / denom,
    }
}

/// Coefficients `(A, B, C)` of `A u² + B u + C = 0`.
///
/// Substituting `x = alpha + beta·u` into
/// `y* + u = σ^k (d1 x + d2 u + d3 x² + d4 x u + d5 u²)`. For the example
/// family this is `σ^k d5 u² + ((λσ)^k d1 c2 − 1) u + ((λσ)^k d1 − 1) = 0`.
pub fn srk_coefficients(params: &MapParams, k: u32) -> (f64, f64, f64) {
    let ExcursionLine { alpha, beta } = excursion_line(params, k);
    let sk = params.sigma.powi(k as i32);
    let p = params;
    let a = sk * (p.d3 * beta * beta + p.d4 * beta + p.d5);
    let b = sk * (p.d1 * beta + p.d2 + 2.0 * p.d3 * alpha * beta + p.d4 * alpha) - 1.0;
    let c = sk * (p.d1 * alpha + p.d3 * alpha * alpha) - p.y_star;
    (a, b, c)
}

/// Real roots of the single-round quadratic for index `k`.
///
/// `u_minus = (−B − √D)/(2A)` and `u_plus = (−B + √D)/(2A)` literally, which
/// matches the `ψ∓` labelling in both orientation cases. Both are absent
/// when the discriminant is negative.
pub fn srk_quadratic(params: &MapParams, k: u32) -> Result<RootPair, OrbitError> {
    let (a, b, c) = srk_coefficients(params, k);
    if a == 0.0 || !a.is_finite() {
        return Err(OrbitError::DegenerateQuadratic { k });
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Ok(RootPair::default());
    }
    let sq = disc.sqrt();
    // avoid cancellation: one root from the quadratic formula, the other
    // from Vieta's product C/A
    let (u_minus, u_plus) = if b <= 0.0 {
        let direct = (-b + sq) / (2.0 * a);
        let vieta = if -b + sq == 0.0 { 0.0 } else { 2.0 * c / (-b + sq) };
        (vieta, direct)
    } else {
        let direct = (-b - sq) / (2.0 * a);
        let vieta = 2.0 * c / (-b - sq);
        (direct, vieta)
    };
    Ok(RootPair {
        u_minus: Some(u_minus),
        u_plus: Some(u_plus),
    })
}

/// The excursion point `(x_k, y* + u)` for root `u`.
pub fn excursion_point(params: &MapParams, k: u32, u: f64) -> Point2 {
    let line = excursion_line(params, k);
    Point2::new(line.alpha + line.beta * u, params.y_star + u)
}

/// Orbit points generated by `U1` once then `U0` `k` times, ignoring
/// which region each point is in.
pub fn closed_form_points(params: &MapParams, k: u32, u: f64) -> Vec<Point2> {
    let mut pts = Vec::with_capacity(k as usize + 1);
    let p0 = excursion_point(params, k, u);
    pts.push(p0);
    if k > 0 {
        let mut q = eval_u1(params, p0);
        pts.push(q);
        for _ in 1..k {
            q = eval_u0(params, q);
            pts.push(q);
        }
    }
    pts
}

/// A periodic orbit of the full map.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodicOrbit {
    pub period: usize,
    pub points: Vec<Point2>,
    /// `‖f^period(p0) − p0‖∞`
    pub residual: f64,
    pub trace: f64,
    pub det: f64,
    pub stability: StabilityClass,
    pub iterations: usize,
}

impl PeriodicOrbit {
    fn from_points(params: &MapParams, points: Vec<Point2>, residual: f64, iterations: usize) -> Self {
        let jac = orbit_jacobian(params, &points);
        let (trace, det) = (jac.trace(), jac.det());
        Self {
            period: points.len(),
            points,
            residual,
            trace,
            det,
            stability: classify(trace, det),
            iterations,
        }
    }

    pub fn itinerary(&self, params: &MapParams) -> Vec<Region> {
        self.points.iter().map(|p| region_of(params, p.y)).collect()
    }
}

/// A single-round periodic solution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SrkOrbit {
    pub k: u32,
    pub period: usize,
    /// Starts at the excursion point (the only point above `h1`).
    pub points: Vec<Point2>,
    pub branch: Branch,
    pub residual: f64,
    pub trace: f64,
    pub det: f64,
    pub stability: StabilityClass,
    pub itinerary: Vec<Region>,
    pub source: OrbitSource,
}

impl SrkOrbit {
    /// Point with the smallest `|y|`.
    pub fn min_abs_y(&self) -> f64 {
        self.points.iter().map(|p| p.y.abs()).fold(f64::INFINITY, f64::min)
    }

    pub fn blend_points(&self) -> usize {
        self.itinerary.iter().filter(|r| **r == Region::Blend).count()
    }

    /// Sup-distance between two orbits as point sets in the same order.
    pub fn distance(&self, other: &SrkOrbit) -> f64 {
        if self.points.len() != other.points.len() {
            return f64::INFINITY;
        }
        self.points
            .iter()
            .zip(&other.points)
            .map(|(a, b)| a.dist_sup(*b))
            .fold(0.0, f64::max)
    }
}

fn residual_after(params: &MapParams, p0: Point2, period: usize) -> f64 {
    let mut q = p0;
    for _ in 0..period {
        q = eval_f(params, q);
    }
    q.dist_sup(p0)
}

fn check_minimal(params: &MapParams, p0: Point2, period: usize, tol: f64) -> Result<(), OrbitError> {
    for d in 1..period {
        if period.is_multiple_of(d) && residual_after(params, p0, d) <= tol {
            return Err(OrbitError::NotMinimal { divisor: d });
        }
    }
    Ok(())
}

/// Builds and validates the closed-form single-round orbit for root `u`.
///
/// The excursion point must lie in `Upper` and the `k` following points
/// in `Lower`; the residual is measured under the full piecewise map.
pub fn assemble_orbit(
    params: &MapParams,
    k: u32,
    u: f64,
    branch: Branch,
    opts: &OrbitOptions,
) -> Result<SrkOrbit, OrbitError> {
    let points = closed_form_points(params, k, u);
    let itinerary: Vec<Region> = points.iter().map(|p| region_of(params, p.y)).collect();
    for (step, &region) in itinerary.iter().enumerate() {
        let expected = if step == 0 { Region::Upper } else { Region::Lower };
        if region != expected {
            return Err(OrbitError::ItineraryInvalid { step, region });
        }
    }
    let period = points.len();
    let residual = residual_after(params, points[0], period);
    if !(residual <= opts.newton_tol) {
        return Err(OrbitError::ResidualTooLarge { residual });
    }
    check_minimal(params, points[0], period, opts.minimality_tol)?;
    let orbit = PeriodicOrbit::from_points(params, points, residual, 0);
    Ok(SrkOrbit {
        k,
        period,
        points: orbit.points,
        branch,
        residual,
        trace: orbit.trace,
        det: orbit.det,
        stability: orbit.stability,
        itinerary,
        source: OrbitSource::ClosedForm,
    })
}

/// Newton iteration on `g(p) = f^period(p) − p` with step halving.
pub fn find_periodic_newton(
    params: &MapParams,
    seed: Point2,
    period: usize,
    opts: &OrbitOptions,
) -> Result<PeriodicOrbit, OrbitError> {
    if period == 0 {
        return Err(OrbitError::InvalidPeriod);
    }
    let eval = |p: Point2| -> Result<(Point2, Jacobian2), OrbitError> {
        let (q, jac) = iterate_with_jacobian(params, p, period, opts.escape_radius)?;
        Ok((q - p, jac))
    };
    let mut p = seed;
    let (mut g, mut jac) = eval(p)?;
    let mut res = g.sup_norm();
    let mut iterations = 0;
    while !(res <= opts.newton_tol) {
        if iterations >= opts.max_iter {
            return Err(OrbitError::NoConvergence {
                iterations,
                last_residual: res,
            });
        }
        let dg = jac.add(&Jacobian2::IDENTITY.scale(-1.0));
        let step = dg
            .solve(g, opts.min_det)
            .ok_or(OrbitError::SingularJacobian { at_iterate: iterations })?;
        let mut scale = 1.0;
        let mut accepted = None;
        let mut last_escape = None;
        for _ in 0..=opts.max_halvings {
            let trial = p - scale * step;
            match eval(trial) {
                Ok((tg, tj)) if tg.sup_norm() < res || tg.sup_norm() <= opts.newton_tol => {
                    accepted = Some((trial, tg, tj));
                    break;
                }
                Ok(_) => {}
                Err(e) => last_escape = Some(e),
            }
            scale *= 0.5;
        }
        iterations += 1;
        match accepted {
            Some((np, ng, nj)) => {
                p = np;
                g = ng;
                jac = nj;
                res = g.sup_norm();
            }
            None => {
                return Err(last_escape.unwrap_or(OrbitError::NoConvergence {
                    iterations,
                    last_residual: res,
                }))
            }
        }
    }
    check_minimal(params, p, period, opts.minimality_tol)?;
    let mut points = Vec::with_capacity(period);
    let mut q = p;
    for _ in 0..period {
        points.push(q);
        q = eval_f(params, q);
    }
    Ok(PeriodicOrbit::from_points(params, points, res, iterations))
}

/// Converts a Newton orbit into a single-round orbit, rotating it to start
/// at its only `Upper` point. The other points may lie in `Lower` or
/// `Blend`.
pub fn srk_from_periodic(params: &MapParams, orbit: PeriodicOrbit, branch: Branch) -> Result<SrkOrbit, OrbitError> {
    let itinerary = orbit.itinerary(params);
    let uppers: Vec<usize> = (0..itinerary.len())
        .filter(|&i| itinerary[i] == Region::Upper)
        .collect();
    if uppers.len() != 1 {
        let step = match uppers.get(1) {
            Some(&second) => second,
            None => 0,
        };
        let region = if uppers.is_empty() { itinerary[0] } else { Region::Upper };
        return Err(OrbitError::ItineraryInvalid { step, region });
    }
    let start = uppers[0];
    let n = orbit.points.len();
    let points: Vec<Point2> = (0..n).map(|i| orbit.points[(start + i) % n]).collect();
    let itinerary: Vec<Region> = (0..n).map(|i| itinerary[(start + i) % n]).collect();
    let jac = orbit_jacobian(params, &points);
    let (trace, det) = (jac.trace(), jac.det());
    Ok(SrkOrbit {
        k: (n - 1) as u32,
        period: n,
        residual: residual_after(params, points[0], n).max(orbit.residual),
        points,
        branch,
        trace,
        det,
        stability: classify(trace, det),
        itinerary,
        source: OrbitSource::Newton,
    })
}

/// Outcome of one branch at one `k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum BranchOutcome {
    Found(SrkOrbit),
    /// The quadratic has no real root.
    NoRoot,
    /// A root exists but no valid orbit was obtained from it.
    Failed(String),
}

impl BranchOutcome {
    pub fn orbit(&self) -> Option<&SrkOrbit> {
        match self {
            BranchOutcome::Found(o) => Some(o),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanEntry {
    pub k: u32,
    pub roots: RootPair,
    pub minus: BranchOutcome,
    pub plus: BranchOutcome,
}

impl ScanEntry {
    pub fn outcome(&self, branch: Branch) -> &BranchOutcome {
        match branch {
            Branch::Minus => &self.minus,
            Branch::Plus => &self.plus,
        }
    }

    pub fn orbits(&self) -> impl Iterator<Item = &SrkOrbit> {
        self.minus.orbit().into_iter().chain(self.plus.orbit())
    }

    /// The asymptotically stable orbit at this `k`, if any.
    pub fn stable(&self) -> Option<&SrkOrbit> {
        self.orbits()
            .find(|o| o.stability == StabilityClass::AsymptoticallyStable)
    }
}

/// Relative offsets of the extra root guesses tried when the closed-form
/// points themselves do not seed Newton onto a new orbit.
const SEED_OFFSETS: [f64; 8] = [-0.125, 0.125, -0.25, -0.375, -0.5, 0.25, 0.5, -0.75];

/// Newton continuation of a root whose closed-form orbit leaves its
/// itinerary, typically through the blend strip. Every closed-form point is tried as a seed, first for `u` and
/// then for nearby guesses; orbits matching `avoid` are skipped.
fn newton_fallback(
    params: &MapParams,
    k: u32,
    u: f64,
    branch: Branch,
    opts: &OrbitOptions,
    avoid: Option<&SrkOrbit>,
) -> Result<SrkOrbit, OrbitError> {
    let period = k as usize + 1;
    let scale = u.abs().max(0.1);
    let guesses = std::iter::once(u).chain(SEED_OFFSETS.iter().map(|d| u + d * scale));
    let mut last_err = OrbitError::NoConvergence {
        iterations: 0,
        last_residual: f64::NAN,
    };
    for guess in guesses {
        for seed in closed_form_points(params, k, guess) {
            let found =
                find_periodic_newton(params, seed, period, opts).and_then(|o| srk_from_periodic(params, o, branch));
            match found {
                Ok(orbit) if !(orbit.residual <= opts.newton_tol) => {
                    last_err = OrbitError::ResidualTooLarge {
                        residual: orbit.residual,
                    };
                }
                Ok(orbit) if avoid.is_some_and(|a| a.distance(&orbit) <= DUPLICATE_TOL) => {}
                Ok(orbit) => return Ok(orbit),
                Err(e) => last_err = e,
            }
        }
    }
    Err(last_err)
}

/// Orbits closer than this (sup norm, aligned points) are the same orbit.
const DUPLICATE_TOL: f64 = 1e-8;

fn solve_branch(
    params: &MapParams,
    k: u32,
    u: f64,
    branch: Branch,
    opts: &OrbitOptions,
    avoid: Option<&SrkOrbit>,
) -> BranchOutcome {
    match assemble_orbit(params, k, u, branch, opts) {
        Ok(orbit) if avoid.is_some_and(|a| a.distance(&orbit) <= DUPLICATE_TOL) => {
            BranchOutcome::Failed("coincides with the other branch".into())
        }
        Ok(orbit) => BranchOutcome::Found(orbit),
        Err(OrbitError::ItineraryInvalid { step, region }) => {
            match newton_fallback(params, k, u, branch, opts, avoid) {
                Ok(orbit) => BranchOutcome::Found(orbit),
                Err(e) => BranchOutcome::Failed(format!("point {step} lies in the {region} region; Newton: {e}")),
            }
        }
        Err(e) => BranchOutcome::Failed(e.to_string()),
    }
}

/// Scans `k_min..=k_max` for single-round orbits on both branches.
///
/// Each `k` is independent; results are ordered by `k` whatever the
/// execution mode.
pub fn scan_srk(params: &MapParams, k_min: u32, k_max: u32, opts: &OrbitOptions, exec: Execution) -> Vec<ScanEntry> {
    let ks: Vec<u32> = (k_min..=k_max).collect();
    exec.map(&ks, |&k| scan_one(params, k, opts))
}

fn scan_one(params: &MapParams, k: u32, opts: &OrbitOptions) -> ScanEntry {
    let roots = match srk_quadratic(params, k) {
        Ok(r) => r,
        Err(e) => {
            return ScanEntry {
                k,
                roots: RootPair::default(),
                minus: BranchOutcome::Failed(e.to_string()),
                plus: BranchOutcome::Failed(e.to_string()),
            }
        }
    };
    let minus = match roots.u_minus {
        Some(u) => solve_branch(params, k, u, Branch::Minus, opts, None),
        None => BranchOutcome::NoRoot,
    };
    // a Newton fallback may land on the other branch's orbit
    let plus = match roots.u_plus {
        Some(u) => solve_branch(params, k, u, Branch::Plus, opts, minus.orbit()),
        None => BranchOutcome::NoRoot,
    };
    ScanEntry { k, roots, minus, plus }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::ParamSet;

    fn set(s: ParamSet) -> MapParams {
        MapParams::example(s)
    }

    #[test]
    fn quadratic_roots_for_set20() {
        let p = set(ParamSet::Set20);
        for k in 0..20 {
            let r = srk_quadratic(&p, k).unwrap();
            assert!(r.u_minus.unwrap().abs() < 1e-14);
            let expect = 1.5 * 0.8f64.powi(k as i32);
            assert!((r.u_plus.unwrap() - expect).abs() < 1e-14 * expect.max(1.0));
        }
        let r = srk_quadratic(&p, 3).unwrap();
        assert!((r.u_plus.unwrap() - 0.768).abs() < 1e-14);
    }

    #[test]
    fn quadratic_roots_vanish_past_the_cutoff() {
        let mut p = set(ParamSet::Set20);
        p.d1 = 1.01;
        assert!(srk_quadratic(&p, 18).unwrap().exists());
        assert_eq!(srk_quadratic(&p, 19).unwrap(), RootPair::default());
    }

    #[test]
    fn quadratic_roots_for_set22() {
        let p = set(ParamSet::Set22);
        let r = srk_quadratic(&p, 4).unwrap();
        assert!(r.u_minus.unwrap().abs() < 1e-15);
        assert!((r.u_plus.unwrap() - 1.5 / 1.25f64.powi(4)).abs() < 1e-14);
        // odd k: constant term is -2 and there is no real root
        let (_, _, c) = srk_coefficients(&p, 3);
        assert!((c + 2.0).abs() < 1e-14);
        assert!(!srk_quadratic(&p, 3).unwrap().exists());
    }

    #[test]
    fn roots_satisfy_their_quadratic() {
        for s in ParamSet::ALL {
            let p = set(s);
            for k in 0..25 {
                let (a, b, c) = srk_coefficients(&p, k);
                let r = srk_quadratic(&p, k).unwrap();
                for u in [r.u_minus, r.u_plus].into_iter().flatten() {
                    let scale = a.abs() * u * u + b.abs() * u.abs() + c.abs() + 1.0;
                    assert!((a * u * u + b * u + c).abs() < 1e-13 * scale);
                }
            }
        }
    }

    #[test]
    fn degenerate_quadratic() {
        let mut p = set(ParamSet::Set20);
        p.d5 = 0.0;
        assert_eq!(srk_quadratic(&p, 3), Err(OrbitError::DegenerateQuadratic { k: 3 }));
    }

    #[test]
    fn sr3_stable_orbit() {
        let p = set(ParamSet::Set20);
        let o = assemble_orbit(&p, 3, 0.0, Branch::Minus, &OrbitOptions::default()).unwrap();
        let expect = [(0.512, 1.0), (1.0, 0.512), (0.8, 0.64), (0.64, 0.8)];
        assert_eq!(o.period, 4);
        for (q, (x, y)) in o.points.iter().zip(expect) {
            assert!((q.x - x).abs() < 1e-15 && (q.y - y).abs() < 1e-15);
        }
        assert!(o.residual <= 1e-15);
        assert!(o.trace.abs() < 1e-12);
        assert!((o.det - 0.5).abs() < 1e-12);
        assert_eq!(o.stability, StabilityClass::AsymptoticallyStable);
    }

    #[test]
    fn k0_is_the_fixed_point() {
        let p = set(ParamSet::Set20);
        let o = assemble_orbit(&p, 0, 0.0, Branch::Minus, &OrbitOptions::default()).unwrap();
        assert_eq!(o.points, vec![Point2::new(1.0, 1.0)]);
        assert_eq!((o.trace, o.det), (0.0, 0.5));
        assert_eq!(o.stability, StabilityClass::AsymptoticallyStable);
    }

    #[test]
    fn sr3_saddle_root_enters_the_blend_strip() {
        let p = set(ParamSet::Set20);
        let u = srk_quadratic(&p, 3).unwrap().u_plus.unwrap();
        let pts = closed_form_points(&p, 3, u);
        assert!((pts[0].x - 0.315392).abs() < 1e-14 && (pts[0].y - 1.768).abs() < 1e-14);
        // with U0/U1 alone the candidate is a saddle (tau = 3, delta = 0.5) ...
        let ideal =
            crate::map::Jacobian2::diag(0.8f64.powi(3), 1.25f64.powi(3)).matmul(&crate::map::jacobian_u1(&p, pts[0]));
        assert!((ideal.trace() - 3.0).abs() < 1e-12 && (ideal.det() - 0.5).abs() < 1e-12);
        assert_eq!(classify(ideal.trace(), ideal.det()), StabilityClass::Saddle);
        // ... but its second point is in the blend strip, so the closed form does not apply
        assert_eq!(
            assemble_orbit(&p, 3, u, Branch::Plus, &OrbitOptions::default()),
            Err(OrbitError::ItineraryInvalid {
                step: 1,
                region: Region::Blend
            })
        );
    }

    #[test]
    fn newton_recovers_sr3_from_a_perturbed_seed() {
        let p = set(ParamSet::Set20);
        let seed = Point2::new(0.512 + 1e-3, 1.0 - 1e-3);
        let o = find_periodic_newton(&p, seed, 4, &OrbitOptions::default()).unwrap();
        assert!(o.points[0].dist_sup(Point2::new(0.512, 1.0)) < 1e-12);
        assert!(o.residual <= 1e-12);
    }

    #[test]
    fn newton_on_a_fixed_point_needs_no_iterations() {
        let p = set(ParamSet::Set20);
        let o = find_periodic_newton(&p, Point2::new(1.0, 1.0), 1, &OrbitOptions::default()).unwrap();
        assert!(o.iterations <= 1);
        assert_eq!(o.points, vec![Point2::new(1.0, 1.0)]);
    }

    #[test]
    fn newton_from_far_away_fails() {
        let p = set(ParamSet::Set20);
        let e = find_periodic_newton(&p, Point2::new(5.0, 5.0), 2, &OrbitOptions::default()).unwrap_err();
        assert!(
            matches!(e, OrbitError::NoConvergence { .. } | OrbitError::Escaped { .. }),
            "{e:?}"
        );
    }

    #[test]
    fn newton_rejects_non_minimal_period() {
        let p = set(ParamSet::Set20);
        let e = find_periodic_newton(&p, Point2::new(1.0, 1.0), 4, &OrbitOptions::default()).unwrap_err();
        assert_eq!(e, OrbitError::NotMinimal { divisor: 1 });
        assert_eq!(
            find_periodic_newton(&p, Point2::new(1.0, 1.0), 0, &OrbitOptions::default()),
            Err(OrbitError::InvalidPeriod)
        );
    }

    #[test]
    fn scan_orders_by_k_in_both_modes() {
        let p = set(ParamSet::Set21);
        let a = scan_srk(&p, 0, 15, &OrbitOptions::default(), Execution::Sequential);
        let b = scan_srk(&p, 0, 15, &OrbitOptions::default(), Execution::Parallel);
        assert_eq!(a, b);
        assert_eq!(a.iter().map(|e| e.k).collect::<Vec<_>>(), (0..=15).collect::<Vec<_>>());
    }
}
