//! The piecewise-smooth map family and its building blocks.
//!
//! The map is linear (`U0`) below the switching line `y = h0`, quadratic
//! (`U1`) above `y = h1`, and a `C¹` convex blend of the two in between.
//! The origin is a saddle fixed point whose local stable and unstable
//! manifolds are the coordinate axes, and `(0, y*) -> (x*, 0)` is a
//! quadratic homoclinic tangency when `d2 = 0`.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default escape radius (sup norm) for forward iteration.
pub const DEFAULT_ESCAPE_RADIUS: f64 = 10.0;

/// Tolerance for "exact" parameter identities such as `λσ = 1`.
pub const PARAM_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MapError {
    #[error("invalid map parameters: {0}")]
    InvalidParams(String),
    #[error("orbit escaped the radius {radius} at step {at_step}")]
    Escaped { at_step: usize, radius: f64 },
    #[error("resonant T0^k expansion needs lambda*sigma = 1 (got {product})")]
    ResonanceFormUnavailable { product: f64 },
}

/// A point of the phase plane.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const ORIGIN: Point2 = Point2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn sup_norm(self) -> f64 {
        self.x.abs().max(self.y.abs())
    }

    pub fn dist_sup(self, other: Point2) -> f64 {
        (self - other).sup_norm()
    }

    pub fn dist(self, other: Point2) -> f64 {
        let d = self - other;
        d.x.hypot(d.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn lerp(self, other: Point2, t: f64) -> Point2 {
        Point2::new(self.x + t * (other.x - self.x), self.y + t * (other.y - self.y))
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<Point2> for f64 {
    type Output = Point2;
    fn mul(self, rhs: Point2) -> Point2 {
        Point2::new(self * rhs.x, self * rhs.y)
    }
}

impl fmt::Display for Point2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// A 2×2 matrix stored row-major.
/// Axis-aligned rectangle `[x_min, x_max] × [y_min, y_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Window {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Window {
    pub const fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        Self {
            x_min,
            x_max,
            y_min,
            y_max,
        }
    }

    /// Square `[lo, hi]²`.
    pub const fn square(lo: f64, hi: f64) -> Self {
        Self::new(lo, hi, lo, hi)
    }

    /// Square of half-width `radius` around `c`.
    pub fn around(c: Point2, radius: f64) -> Self {
        Self::new(c.x - radius, c.x + radius, c.y - radius, c.y + radius)
    }

    /// Finite bounds with positive width and height.
    pub fn is_valid(&self) -> bool {
        [self.x_min, self.x_max, self.y_min, self.y_max]
            .iter()
            .all(|v| v.is_finite())
            && self.x_max > self.x_min
            && self.y_max > self.y_min
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }

    /// Whether the bounding box of the segment `ab` meets the window.
    pub fn meets_box_of(&self, a: Point2, b: Point2) -> bool {
        a.x.max(b.x) >= self.x_min
            && a.x.min(b.x) <= self.x_max
            && a.y.max(b.y) >= self.y_min
            && a.y.min(b.y) <= self.y_max
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jacobian2(pub [[f64; 2]; 2]);

impl Jacobian2 {
    pub const IDENTITY: Jacobian2 = Jacobian2([[1.0, 0.0], [0.0, 1.0]]);

    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Jacobian2([[a, b], [c, d]])
    }

    pub fn diag(a: f64, d: f64) -> Self {
        Self::new(a, 0.0, 0.0, d)
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn det(&self) -> f64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    /// Matrix product `self · rhs`.
    pub fn matmul(&self, rhs: &Jacobian2) -> Jacobian2 {
        let a = &self.0;
        let b = &rhs.0;
        Jacobian2([
            [
                a[0][0] * b[0][0] + a[0][1] * b[1][0],
                a[0][0] * b[0][1] + a[0][1] * b[1][1],
            ],
            [
                a[1][0] * b[0][0] + a[1][1] * b[1][0],
                a[1][0] * b[0][1] + a[1][1] * b[1][1],
            ],
        ])
    }

    pub fn apply(&self, v: Point2) -> Point2 {
        Point2::new(
            self.0[0][0] * v.x + self.0[0][1] * v.y,
            self.0[1][0] * v.x + self.0[1][1] * v.y,
        )
    }

    pub fn scale(&self, s: f64) -> Jacobian2 {
        let m = &self.0;
        Jacobian2::new(s * m[0][0], s * m[0][1], s * m[1][0], s * m[1][1])
    }

    pub fn add(&self, rhs: &Jacobian2) -> Jacobian2 {
        let a = &self.0;
        let b = &rhs.0;
        Jacobian2::new(
            a[0][0] + b[0][0],
            a[0][1] + b[0][1],
            a[1][0] + b[1][0],
            a[1][1] + b[1][1],
        )
    }

    /// Solves `self · v = rhs`, returning `None` when `|det| < min_det`.
    pub fn solve(&self, rhs: Point2, min_det: f64) -> Option<Point2> {
        let det = self.det();
        if !(det.abs() >= min_det) {
            return None;
        }
        let m = &self.0;
        Some(Point2::new(
            (m[1][1] * rhs.x - m[0][1] * rhs.y) / det,
            (m[0][0] * rhs.y - m[1][0] * rhs.x) / det,
        ))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|v| v.is_finite())
    }
}

/// Which formula of the piecewise map is active at a given `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    /// `y ≤ h0`: `f = U0`.
    Lower,
    /// `h0 < y < h1`: convex blend.
    Blend,
    /// `y ≥ h1`: `f = U1`.
    Upper,
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Region::Lower => "Lower",
            Region::Blend => "Blend",
            Region::Upper => "Upper",
        };
        f.write_str(s)
    }
}

/// The four reference parameter combinations of the example family.
///
/// All share `c2 = -1/2`, `d5 = 1`, `x* = y* = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamSet {
    /// `λ = 4/5, σ = 5/4, d1 = 1` (orientation preserving).
    Set20,
    /// `λ = -4/5, σ = -5/4, d1 = 1` (orientation preserving).
    Set21,
    /// `λ = 4/5, σ = -5/4, d1 = 1` (orientation reversing, even k).
    Set22,
    /// `λ = -4/5, σ = 5/4, d1 = -1` (orientation reversing, odd k).
    Set23,
}

impl ParamSet {
    pub const ALL: [ParamSet; 4] = [ParamSet::Set20, ParamSet::Set21, ParamSet::Set22, ParamSet::Set23];

    pub fn name(self) -> &'static str {
        match self {
            ParamSet::Set20 => "set20",
            ParamSet::Set21 => "set21",
            ParamSet::Set22 => "set22",
            ParamSet::Set23 => "set23",
        }
    }
}

/// Parameters of the map family plus the remaining normal-form coefficients.
///
/// `U1(x, y) = (x* + c1 x + c2 (y - y*),
///              d1 x + d2 (y - y*) + d3 x² + d4 x (y - y*) + d5 (y - y*)²)`
/// which reduces to the example-family quadratic when `c1 = d2 = d3 = d4 = 0`
/// and `x* = y* = 1`. `a1`, `b1` only enter the resonant `T0^k` expansion and
/// the theory checks; the map itself uses the diagonal linear `U0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MapParams {
    pub lambda: f64,
    pub sigma: f64,
    pub c2: f64,
    pub d1: f64,
    pub d5: f64,
    pub h0: f64,
    pub h1: f64,
    pub x_star: f64,
    pub y_star: f64,
    pub a1: f64,
    pub b1: f64,
    pub c1: f64,
    pub d2: f64,
    pub d3: f64,
    pub d4: f64,
}

/// Default switching thresholds `h0 = (2|λ|+1)/3`, `h1 = (|λ|+2)/3`.
pub fn default_thresholds(lambda: f64) -> (f64, f64) {
    let l = lambda.abs();
    ((2.0 * l + 1.0) / 3.0, (l + 2.0) / 3.0)
}

impl MapParams {
    /// Example-family parameters with default thresholds and zero extra
    /// coefficients.
    pub fn new(lambda: f64, sigma: f64, c2: f64, d1: f64, d5: f64) -> Self {
        let (h0, h1) = default_thresholds(lambda);
        Self {
            lambda,
            sigma,
            c2,
            d1,
            d5,
            h0,
            h1,
            x_star: 1.0,
            y_star: 1.0,
            a1: 0.0,
            b1: 0.0,
            c1: 0.0,
            d2: 0.0,
            d3: 0.0,
            d4: 0.0,
        }
    }

    pub fn example(set: ParamSet) -> Self {
        let (lambda, sigma, d1) = match set {
            ParamSet::Set20 => (0.8, 1.25, 1.0),
            ParamSet::Set21 => (-0.8, -1.25, 1.0),
            ParamSet::Set22 => (0.8, -1.25, 1.0),
            ParamSet::Set23 => (-0.8, 1.25, -1.0),
        };
        Self::new(lambda, sigma, -0.5, d1, 1.0)
    }

    /// Recomputes `h0`, `h1` from `λ`.
    pub fn with_default_thresholds(mut self) -> Self {
        let (h0, h1) = default_thresholds(self.lambda);
        self.h0 = h0;
        self.h1 = h1;
        self
    }

    /// Checks the structural invariants every operation relies on.
    pub fn validate(&self) -> Result<(), MapError> {
        let all = [
            self.lambda,
            self.sigma,
            self.c2,
            self.d1,
            self.d5,
            self.h0,
            self.h1,
            self.x_star,
            self.y_star,
            self.a1,
            self.b1,
            self.c1,
            self.d2,
            self.d3,
            self.d4,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(MapError::InvalidParams("all parameters must be finite".into()));
        }
        let (l, s) = (self.lambda.abs(), self.sigma.abs());
        if !(l > 0.0 && l < 1.0 && s > 1.0) {
            return Err(MapError::InvalidParams(format!(
                "need 0 < |lambda| < 1 < |sigma|, got lambda = {}, sigma = {}",
                self.lambda, self.sigma
            )));
        }
        if !(self.h0 < self.h1) {
            return Err(MapError::InvalidParams(format!(
                "need h0 < h1, got h0 = {}, h1 = {}",
                self.h0, self.h1
            )));
        }
        if !(self.x_star > 0.0 && self.y_star > 0.0) {
            return Err(MapError::InvalidParams("x_star and y_star must be positive".into()));
        }
        Ok(())
    }

    /// `λσ`.
    pub fn eigen_product(&self) -> f64 {
        self.lambda * self.sigma
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    lambda: f64,
    sigma: f64,
    c2: f64,
    d1: f64,
    d5: f64,
    h0: Option<f64>,
    h1: Option<f64>,
    #[serde(default = "one")]
    x_star: f64,
    #[serde(default = "one")]
    y_star: f64,
    #[serde(default)]
    a1: f64,
    #[serde(default)]
    b1: f64,
    #[serde(default)]
    c1: f64,
    #[serde(default)]
    d2: f64,
    #[serde(default)]
    d3: f64,
    #[serde(default)]
    d4: f64,
}

fn one() -> f64 {
    1.0
}

impl<'de> Deserialize<'de> for MapParams {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = RawParams::deserialize(d)?;
        let (h0, h1) = default_thresholds(raw.lambda);
        Ok(MapParams {
            lambda: raw.lambda,
            sigma: raw.sigma,
            c2: raw.c2,
            d1: raw.d1,
            d5: raw.d5,
            h0: raw.h0.unwrap_or(h0),
            h1: raw.h1.unwrap_or(h1),
            x_star: raw.x_star,
            y_star: raw.y_star,
            a1: raw.a1,
            b1: raw.b1,
            c1: raw.c1,
            d2: raw.d2,
            d3: raw.d3,
            d4: raw.d4,
        })
    }
}

/// The cubic smoothstep `s(z) = 3z² − 2z³`.
pub fn eval_s(z: f64) -> f64 {
    3.0 * z * z - 2.0 * z * z * z
}

fn eval_s_prime(z: f64) -> f64 {
    6.0 * z * (1.0 - z)
}

/// Blend weight `r(y) = s((y − h0)/(h1 − h0))`, unclamped.
pub fn eval_r(params: &MapParams, y: f64) -> f64 {
    eval_s((y - params.h0) / (params.h1 - params.h0))
}

/// `r'(y)`, unclamped.
pub fn eval_r_prime(params: &MapParams, y: f64) -> f64 {
    let w = params.h1 - params.h0;
    eval_s_prime((y - params.h0) / w) / w
}

pub fn eval_u0(params: &MapParams, p: Point2) -> Point2 {
    Point2::new(params.lambda * p.x, params.sigma * p.y)
}

pub fn eval_u1(params: &MapParams, p: Point2) -> Point2 {
    let u = p.y - params.y_star;
    let x = p.x;
    Point2::new(
        params.x_star + params.c1 * x + params.c2 * u,
        params.d1 * x + params.d2 * u + params.d3 * x * x + params.d4 * x * u + params.d5 * u * u,
    )
}

pub fn jacobian_u0(params: &MapParams) -> Jacobian2 {
    Jacobian2::diag(params.lambda, params.sigma)
}

pub fn jacobian_u1(params: &MapParams, p: Point2) -> Jacobian2 {
    let u = p.y - params.y_star;
    let x = p.x;
    Jacobian2::new(
        params.c1,
        params.c2,
        params.d1 + 2.0 * params.d3 * x + params.d4 * u,
        params.d2 + params.d4 * x + 2.0 * params.d5 * u,
    )
}

/// Region tag; the switching lines belong to the non-blend pieces.
pub fn region_of(params: &MapParams, y: f64) -> Region {
    if y <= params.h0 {
        Region::Lower
    } else if y >= params.h1 {
        Region::Upper
    } else {
        Region::Blend
    }
}

/// The blend formula `(1 − r) U0 + r U1` evaluated regardless of region.
pub fn eval_blend(params: &MapParams, p: Point2) -> Point2 {
    let r = eval_r(params, p.y);
    let a = eval_u0(params, p);
    let b = eval_u1(params, p);
    a + r * (b - a)
}

/// Jacobian of the blend formula regardless of region.
pub fn jacobian_blend(params: &MapParams, p: Point2) -> Jacobian2 {
    let r = eval_r(params, p.y);
    let dr = eval_r_prime(params, p.y);
    let diff = eval_u1(params, p) - eval_u0(params, p);
    let mixed = jacobian_u0(params).scale(1.0 - r).add(&jacobian_u1(params, p).scale(r));
    mixed.add(&Jacobian2::new(0.0, dr * diff.x, 0.0, dr * diff.y))
}

/// The piecewise map `f`.
pub fn eval_f(params: &MapParams, p: Point2) -> Point2 {
    match region_of(params, p.y) {
        Region::Lower => eval_u0(params, p),
        Region::Upper => eval_u1(params, p),
        Region::Blend => eval_blend(params, p),
    }
}

/// Analytic Jacobian `Df(p)` of the active branch.
pub fn jacobian_f(params: &MapParams, p: Point2) -> Jacobian2 {
    match region_of(params, p.y) {
        Region::Lower => jacobian_u0(params),
        Region::Upper => jacobian_u1(params, p),
        Region::Blend => jacobian_blend(params, p),
    }
}

/// `[p, f(p), …, f^n(p)]`, failing once the sup norm exceeds `escape_radius`.
pub fn iterate_n(params: &MapParams, p: Point2, n: usize, escape_radius: f64) -> Result<Vec<Point2>, MapError> {
    let mut out = Vec::with_capacity(n + 1);
    let mut q = p;
    for step in 0..=n {
        if !(q.sup_norm() <= escape_radius) {
            return Err(MapError::Escaped {
                at_step: step,
                radius: escape_radius,
            });
        }
        out.push(q);
        if step < n {
            q = eval_f(params, q);
        }
    }
    Ok(out)
}

/// `f^n(p)` with its Jacobian `Df^n(p)`, computed by the chain rule.
pub fn iterate_with_jacobian(
    params: &MapParams,
    p: Point2,
    n: usize,
    escape_radius: f64,
) -> Result<(Point2, Jacobian2), MapError> {
    let mut q = p;
    let mut jac = Jacobian2::IDENTITY;
    for step in 0..n {
        if !(q.sup_norm() <= escape_radius) {
            return Err(MapError::Escaped {
                at_step: step,
                radius: escape_radius,
            });
        }
        jac = jacobian_f(params, q).matmul(&jac);
        q = eval_f(params, q);
    }
    if !(q.sup_norm() <= escape_radius) {
        return Err(MapError::Escaped {
            at_step: n,
            radius: escape_radius,
        });
    }
    Ok((q, jac))
}

/// One step of the resonant normal form
/// `T0(x, y) = (λx(1 + a1 xy), y/λ (1 + b1 xy))`.
pub fn eval_t0_resonant(params: &MapParams, p: Point2) -> Point2 {
    let w = p.x * p.y;
    Point2::new(
        params.lambda * p.x * (1.0 + params.a1 * w),
        p.y / params.lambda * (1.0 + params.b1 * w),
    )
}

/// First-order expansion of `T0^k` for `λσ = 1`:
/// `(λ^k x (1 + k a1 xy), λ^{-k} y (1 + k b1 xy))`.
pub fn eval_t0k_expansion(params: &MapParams, p: Point2, k: u32) -> Result<Point2, MapError> {
    let product = params.eigen_product();
    if (product - 1.0).abs() > PARAM_TOL {
        return Err(MapError::ResonanceFormUnavailable { product });
    }
    if k == 0 {
        return Ok(p);
    }
    let kf = f64::from(k);
    let w = p.x * p.y;
    let lk = params.lambda.powi(k as i32);
    Ok(Point2::new(
        lk * p.x * (1.0 + kf * params.a1 * w),
        p.y / lk * (1.0 + kf * params.b1 * w),
    ))
}
