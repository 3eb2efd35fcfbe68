//! Stable and unstable sets of the saddle at the origin.
//!
//! Both are sampled as parametrized curves: every vertex is recomputed from
//! its parameter, so refinement never interpolates between images and
//! tangency refinement can re-evaluate the curve anywhere.
//!
//! * Unstable: parameter `s ≥ 0` is `f^⌊s⌋` applied to the y-axis point
//!   `(0, y0·|σ|^{s − ⌊s⌋})`; negative `s` traces the lower half-axis when
//!   `σ < 0`. The seed side alternates with the generation so that the
//!   parametrization is continuous.
//! * Stable: a tree of preimages of the x-axis. A branch is a path of
//!   inverse steps (`Lower`, `Upper`, or the `j`-th preimage in the blend
//!   strip) and its parameter is the abscissa on the axis.

use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;
use crate::map::{
    eval_blend, eval_f, eval_r, jacobian_blend, region_of, MapParams, Point2, Region, Window, DEFAULT_ESCAPE_RADIUS,
};

/// Residual below which a blend-strip preimage is accepted.
pub const PREIMAGE_TOL: f64 = 1e-10;

/// Sign changes searched per blend-strip preimage scan.
const BLEND_SCAN_STEPS: usize = 48;

/// Parameter resolution when locating where a branch stops being defined.
const BOUNDARY_STEP: f64 = 1e-9;

/// Parameter tolerance for tangency refinement.
const HIT_PARAM_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ManifoldError {
    #[error("the unstable trace needs at least one image")]
    NoImages,
    #[error("clip window must be finite with positive width and height")]
    InvalidWindow,
    #[error("U1 has no closed-form inverse: {0}")]
    DegenerateCoefficients(String),
    #[error("invalid refinement options: {0}")]
    InvalidOptions(String),
}

/// Curve growing settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefineOptions {
    /// Largest allowed distance between consecutive vertices in the window.
    pub max_gap: f64,
    /// Largest allowed turning angle (radians) at a vertex in the window.
    pub max_angle: f64,
    /// Total vertex budget for one trace call.
    pub point_budget: usize,
    /// Parameter intervals this short are never split.
    pub min_step: f64,
    /// Distance of the seed segment from the origin.
    pub seed_size: f64,
    /// Points beyond this sup-norm radius are dropped.
    pub escape_radius: f64,
    /// Initial samples per unit of curve parameter.
    pub samples_per_unit: usize,
}

impl Default for RefineOptions {
    fn default() -> Self {
        Self {
            max_gap: 1e-2,
            max_angle: 0.2,
            point_budget: 2_000_000,
            min_step: 1e-12,
            seed_size: 1e-4,
            escape_radius: DEFAULT_ESCAPE_RADIUS,
            samples_per_unit: 16,
        }
    }
}

impl RefineOptions {
    fn validate(&self) -> Result<(), ManifoldError> {
        let bad = |what: &str| Err(ManifoldError::InvalidOptions(what.to_string()));
        if !(self.max_gap > 0.0) {
            return bad("max_gap must be positive");
        }
        if !(self.max_angle > 0.0) {
            return bad("max_angle must be positive");
        }
        if !(self.min_step > 0.0) {
            return bad("min_step must be positive");
        }
        if !(self.seed_size > 0.0) {
            return bad("seed_size must be positive");
        }
        if !(self.escape_radius > 0.0) {
            return bad("escape_radius must be positive");
        }
        if self.samples_per_unit == 0 || self.point_budget == 0 {
            return bad("samples_per_unit and point_budget must be positive");
        }
        Ok(())
    }
}

/// One inverse step of the stable preimage tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum PreimageStep {
    /// `U0⁻¹`, preimage below `h0`.
    Lower,
    /// `U1⁻¹`, preimage above `h1`.
    Upper,
    /// The `j`-th preimage inside the blend strip, ordered by `y`.
    Blend(usize),
}

impl fmt::Display for PreimageStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PreimageStep::Lower => f.write_str("L"),
            PreimageStep::Upper => f.write_str("U"),
            PreimageStep::Blend(j) => write!(f, "B{j}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CurveKind {
    Unstable,
    /// Index of the branch in the list returned by [`trace_stable`].
    StableBranch(usize),
}

/// Recomputes a curve vertex from its parameter.
#[derive(Debug, Clone, PartialEq)]
pub enum CurveGenerator {
    Unstable {
        params: MapParams,
        seed_size: f64,
        escape_radius: f64,
    },
    Stable {
        params: MapParams,
        path: Vec<PreimageStep>,
        escape_radius: f64,
    },
}

impl CurveGenerator {
    /// The curve point at parameter `s`, or `None` where the branch is
    /// undefined or has left the escape radius.
    pub fn eval(&self, s: f64) -> Option<Point2> {
        match self {
            CurveGenerator::Unstable {
                params,
                seed_size,
                escape_radius,
            } => unstable_point(params, *seed_size, *escape_radius, s),
            CurveGenerator::Stable {
                params,
                path,
                escape_radius,
            } => {
                let mut q = Point2::new(s, 0.0);
                for step in path {
                    q = preimage(params, *step, q)?;
                    if !(q.sup_norm() <= *escape_radius) {
                        return None;
                    }
                }
                Some(q)
            }
        }
    }
}

fn unstable_point(params: &MapParams, y0: f64, escape: f64, s: f64) -> Option<Point2> {
    let side = if s.is_sign_negative() { -1.0 } else { 1.0 };
    let m = s.abs();
    let n = m.floor();
    let frac = m - n;
    let n = n as u64;
    // f^n of the seed lands on the requested side of the axis only if the
    // seed starts on side·sign(σ)^n
    let flips = if params.sigma < 0.0 && n % 2 == 1 { -1.0 } else { 1.0 };
    let mut p = Point2::new(0.0, side * flips * y0 * params.sigma.abs().powf(frac));
    for _ in 0..n {
        p = eval_f(params, p);
        if !(p.sup_norm() <= escape) {
            return None;
        }
    }
    Some(p)
}

/// Vertex counters of a traced curve.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct RefinementStats {
    /// Vertices added by refinement beyond the initial samples.
    pub inserted_points: usize,
    /// Largest distance between consecutive vertices of the same piece.
    pub max_gap: f64,
}

/// A sampled curve, clipped to a window.
///
/// The clipped curve is a sequence of polyline pieces; `piece_starts`
/// holds the index of the first vertex of each piece.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldCurve {
    pub kind: CurveKind,
    /// Short description of the branch, such as `U.L` for a stable
    /// branch reached by `U1⁻¹` then `U0⁻¹`.
    pub label: String,
    pub points: Vec<Point2>,
    /// Curve parameter of each vertex.
    pub params: Vec<f64>,
    pub piece_starts: Vec<usize>,
    pub arc_length: f64,
    pub refinement_stats: RefinementStats,
    /// The point budget ran out and the curve is incomplete.
    pub truncated: bool,
    pub generator: Option<CurveGenerator>,
}

impl ManifoldCurve {
    /// A generator-less curve made of a single piece.
    pub fn from_points(kind: CurveKind, points: Vec<Point2>) -> Self {
        let params = (0..points.len()).map(|i| i as f64).collect();
        let piece_starts = if points.is_empty() { vec![] } else { vec![0] };
        let mut curve = ManifoldCurve {
            kind,
            label: String::new(),
            points,
            params,
            piece_starts,
            arc_length: 0.0,
            refinement_stats: RefinementStats::default(),
            truncated: false,
            generator: None,
        };
        curve.update_lengths();
        curve
    }

    pub fn pieces(&self) -> impl Iterator<Item = std::ops::Range<usize>> + '_ {
        self.piece_starts.iter().enumerate().map(|(i, &start)| {
            let end = self.piece_starts.get(i + 1).copied().unwrap_or(self.points.len());
            start..end
        })
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn update_lengths(&mut self) {
        let mut length = 0.0;
        let mut max_gap: f64 = 0.0;
        for range in self.pieces().collect::<Vec<_>>() {
            for w in self.points[range].windows(2) {
                let d = w[0].dist(w[1]);
                length += d;
                max_gap = max_gap.max(d);
            }
        }
        self.arc_length = length;
        self.refinement_stats.max_gap = max_gap;
    }

    /// Euclidean distance from `p` to the polyline.
    pub fn distance_to(&self, p: Point2) -> f64 {
        let mut best = f64::INFINITY;
        for range in self.pieces() {
            let pts = &self.points[range];
            if pts.len() == 1 {
                best = best.min(pts[0].dist(p));
            }
            for w in pts.windows(2) {
                best = best.min(segment_distance(w[0], w[1], p));
            }
        }
        best
    }
}

fn segment_distance(a: Point2, b: Point2, p: Point2) -> f64 {
    let d = b - a;
    let len2 = d.x * d.x + d.y * d.y;
    if len2 == 0.0 {
        return a.dist(p);
    }
    let t = (((p.x - a.x) * d.x + (p.y - a.y) * d.y) / len2).clamp(0.0, 1.0);
    a.lerp(b, t).dist(p)
}

/// Shared vertex budget of one trace call.
struct Budget {
    left: AtomicUsize,
}

impl Budget {
    fn new(total: usize) -> Self {
        Self {
            left: AtomicUsize::new(total),
        }
    }

    /// Reserves `n` vertices; false once the budget cannot cover them.
    fn take(&self, n: usize) -> bool {
        self.left
            .fetch_update(Ordering::Relaxed, Ordering::Relaxed, |left| left.checked_sub(n))
            .is_ok()
    }
}

fn turning_angle(a: Point2, b: Point2, c: Point2) -> f64 {
    let u = b - a;
    let v = c - b;
    let cross = u.x * v.y - u.y * v.x;
    let dot = u.x * v.x + u.y * v.y;
    cross.abs().atan2(dot)
}

struct Samples {
    params: Vec<f64>,
    points: Vec<Option<Point2>>,
    inserted: usize,
    truncated: bool,
}

/// Samples `gen` on `[s0, s1]` and bisects intervals until the gap and
/// angle criteria hold inside the window.
fn sample_refined(
    gen: &CurveGenerator,
    s0: f64,
    s1: f64,
    window: &Window,
    opts: &RefineOptions,
    budget: &Budget,
) -> Samples {
    let n0 = (((s1 - s0) * opts.samples_per_unit as f64).ceil() as usize).max(1);
    let mut truncated = !budget.take(n0 + 1);
    let mut params: Vec<f64> = (0..=n0)
        .map(|i| {
            if i == n0 {
                s1
            } else {
                s0 + (s1 - s0) * i as f64 / n0 as f64
            }
        })
        .collect();
    let mut points: Vec<Option<Point2>> = params.iter().map(|&s| gen.eval(s)).collect();
    let mut inserted = 0;
    let inside = |p: Option<Point2>| p.is_some_and(|p| window.contains(p));

    while !truncated {
        let n = params.len();
        let mut split = vec![false; n - 1];
        for i in 0..n - 1 {
            let ds = params[i + 1] - params[i];
            if ds <= opts.min_step {
                continue;
            }
            split[i] = match (points[i], points[i + 1]) {
                (Some(a), Some(b)) => window.meets_box_of(a, b) && a.dist(b) > opts.max_gap,
                (Some(a), None) | (None, Some(a)) => window.contains(a) && ds > BOUNDARY_STEP,
                (None, None) => false,
            };
        }
        for i in 1..n - 1 {
            if let (Some(a), Some(b), Some(c)) = (points[i - 1], points[i], points[i + 1]) {
                if inside(Some(b)) && turning_angle(a, b, c) > opts.max_angle {
                    if params[i] - params[i - 1] > opts.min_step {
                        split[i - 1] = true;
                    }
                    if params[i + 1] - params[i] > opts.min_step {
                        split[i] = true;
                    }
                }
            }
        }
        let count = split.iter().filter(|s| **s).count();
        if count == 0 {
            break;
        }
        if !budget.take(count) {
            truncated = true;
            break;
        }
        let mut new_params = Vec::with_capacity(n + count);
        let mut new_points = Vec::with_capacity(n + count);
        for i in 0..n {
            new_params.push(params[i]);
            new_points.push(points[i]);
            if i < n - 1 && split[i] {
                let mid = 0.5 * (params[i] + params[i + 1]);
                new_params.push(mid);
                new_points.push(gen.eval(mid));
            }
        }
        inserted += count;
        params = new_params;
        points = new_points;
    }
    Samples {
        params,
        points,
        inserted,
        truncated,
    }
}

/// Keeps the in-window runs of one or more sample sets as curve pieces.
fn clip_samples(
    kind: CurveKind,
    label: String,
    samples: Vec<Samples>,
    window: &Window,
    generator: CurveGenerator,
) -> ManifoldCurve {
    let mut curve = ManifoldCurve {
        kind,
        label,
        points: Vec::new(),
        params: Vec::new(),
        piece_starts: Vec::new(),
        arc_length: 0.0,
        refinement_stats: RefinementStats::default(),
        truncated: false,
        generator: Some(generator),
    };
    for set in samples {
        curve.refinement_stats.inserted_points += set.inserted;
        curve.truncated |= set.truncated;
        let mut open = false;
        for (s, p) in set.params.iter().zip(&set.points) {
            match p {
                Some(p) if window.contains(*p) => {
                    if !open {
                        curve.piece_starts.push(curve.points.len());
                        open = true;
                    }
                    curve.points.push(*p);
                    curve.params.push(*s);
                }
                _ => open = false,
            }
        }
    }
    curve.update_lengths();
    curve
}

/// Number of forward images after which the seed segment has reached
/// the homoclinic point `(0, y*)` and been mapped once more.
pub fn default_image_count(params: &MapParams, seed_size: f64) -> u32 {
    let growth = (params.y_star / seed_size).ln() / params.sigma.abs().ln();
    (growth.ceil().max(0.0) as u32) + 3
}

/// Grows the unstable set of the origin from the y-axis seed segment.
///
/// The curve covers generations `0..=n_images`; when `σ < 0` both
/// half-axes are traced and form separate pieces. The budget-exhausted
/// case returns a partial curve with `truncated` set.
pub fn trace_unstable(
    params: &MapParams,
    n_images: u32,
    clip: Window,
    opts: &RefineOptions,
) -> Result<ManifoldCurve, ManifoldError> {
    if n_images == 0 {
        return Err(ManifoldError::NoImages);
    }
    if !clip.is_valid() {
        return Err(ManifoldError::InvalidWindow);
    }
    opts.validate()?;
    let generator = CurveGenerator::Unstable {
        params: *params,
        seed_size: opts.seed_size,
        escape_radius: opts.escape_radius,
    };
    let budget = Budget::new(opts.point_budget);
    let end = n_images as f64 + 1.0;
    let mut samples = vec![sample_refined(&generator, 0.0, end, &clip, opts, &budget)];
    if params.sigma < 0.0 {
        samples.push(sample_refined(&generator, -end, -0.0, &clip, opts, &budget));
    }
    Ok(clip_samples(
        CurveKind::Unstable,
        "unstable".to_string(),
        samples,
        &clip,
        generator,
    ))
}

/// `U0⁻¹`.
pub fn invert_u0(params: &MapParams, q: Point2) -> Point2 {
    Point2::new(q.x / params.lambda, q.y / params.sigma)
}

/// Preimage under the `U1` formula, ignoring regions.
///
/// Closed form when `c1 = d3 = 0`: the first component fixes `y`, the
/// second is then linear in `x`.
pub fn invert_u1(params: &MapParams, q: Point2) -> Result<Point2, ManifoldError> {
    if params.c1 != 0.0 || params.d3 != 0.0 {
        return Err(ManifoldError::DegenerateCoefficients(
            "closed form needs c1 = d3 = 0".into(),
        ));
    }
    if params.c2 == 0.0 {
        return Err(ManifoldError::DegenerateCoefficients("c2 = 0".into()));
    }
    let u = (q.x - params.x_star) / params.c2;
    let slope = params.d1 + params.d4 * u;
    if slope == 0.0 {
        return Err(ManifoldError::DegenerateCoefficients(format!(
            "d1 + d4 (y - y*) vanishes at y = {}",
            params.y_star + u
        )));
    }
    let x = (q.y - params.d2 * u - params.d5 * u * u) / slope;
    Ok(Point2::new(x, params.y_star + u))
}

/// Newton iteration for `eval_blend(p) = q` from one guess. Returns the
/// root and the number of iterations used.
pub fn blend_newton(params: &MapParams, q: Point2, guess: Point2) -> Option<(Point2, usize)> {
    const MAX_ITER: usize = 50;
    let mut p = guess;
    for it in 0..=MAX_ITER {
        let g = eval_blend(params, p) - q;
        if !g.is_finite() {
            return None;
        }
        if g.sup_norm() <= PREIMAGE_TOL * 1e-2 {
            return Some((p, it));
        }
        if it == MAX_ITER {
            break;
        }
        let step = jacobian_blend(params, p).solve(g, 1e-300)?;
        p = p - step;
    }
    let res = (eval_blend(params, p) - q).sup_norm();
    (res <= PREIMAGE_TOL).then_some((p, MAX_ITER))
}

/// Blend-strip preimages of `q` reached by Newton from `guesses` (the two
/// closed-form branch inverses when empty). Solutions are deduplicated,
/// lie strictly inside the strip and have residual `≤ 1e−10`.
pub fn invert_blend(params: &MapParams, q: Point2, guesses: &[Point2]) -> Vec<Point2> {
    let defaults;
    let guesses = if guesses.is_empty() {
        defaults = [Some(invert_u0(params, q)), invert_u1(params, q).ok()]
            .into_iter()
            .flatten()
            .collect::<Vec<_>>();
        &defaults[..]
    } else {
        guesses
    };
    let mut found: Vec<Point2> = Vec::new();
    for &g in guesses {
        if let Some((p, _)) = blend_newton(params, q, g) {
            let ok = region_of(params, p.y) == Region::Blend && (eval_f(params, p) - q).sup_norm() <= PREIMAGE_TOL;
            if ok && !found.iter().any(|f| f.dist_sup(p) <= 1e-9) {
                found.push(p);
            }
        }
    }
    found.sort_by(|a, b| a.y.total_cmp(&b.y));
    found
}

/// The abscissa that makes the first blend component equal `qx` at
/// height `y`; the first component is linear in `x` for fixed `y`.
fn blend_abscissa(params: &MapParams, qx: f64, y: f64) -> Option<f64> {
    let r = eval_r(params, y);
    let slope = (1.0 - r) * params.lambda + r * params.c1;
    let offset = r * (params.x_star + params.c2 * (y - params.y_star));
    let x = (qx - offset) / slope;
    x.is_finite().then_some(x)
}

/// All blend-strip preimages of `q` found by scanning the strip height.
///
/// Sign changes of the second component along `x(y)` are bracketed and
/// bisected, then polished by [`invert_blend`]. Ordered by `y`.
pub fn blend_preimages(params: &MapParams, q: Point2) -> Vec<Point2> {
    let (h0, h1) = (params.h0, params.h1);
    let g = |y: f64| -> Option<f64> {
        let x = blend_abscissa(params, q.x, y)?;
        let v = eval_blend(params, Point2::new(x, y)).y - q.y;
        v.is_finite().then_some(v)
    };
    let mut guesses = Vec::new();
    let ys: Vec<f64> = (0..=BLEND_SCAN_STEPS)
        .map(|i| h0 + (h1 - h0) * i as f64 / BLEND_SCAN_STEPS as f64)
        .collect();
    let vals: Vec<Option<f64>> = ys.iter().map(|&y| g(y)).collect();
    for i in 0..BLEND_SCAN_STEPS {
        let (Some(va), Some(vb)) = (vals[i], vals[i + 1]) else {
            continue;
        };
        if va == 0.0 || va.signum() != vb.signum() {
            let (mut a, mut b, mut fa) = (ys[i], ys[i + 1], va);
            for _ in 0..60 {
                let m = 0.5 * (a + b);
                let Some(fm) = g(m) else { break };
                if fm == 0.0 {
                    a = m;
                    b = m;
                    break;
                }
                if fm.signum() == fa.signum() {
                    a = m;
                    fa = fm;
                } else {
                    b = m;
                }
            }
            let y = 0.5 * (a + b);
            if let Some(x) = blend_abscissa(params, q.x, y) {
                guesses.push(Point2::new(x, y));
            }
        }
    }
    if guesses.is_empty() {
        return Vec::new();
    }
    invert_blend(params, q, &guesses)
}

/// One inverse step, `None` when the preimage does not exist or lies in
/// another region.
pub fn preimage(params: &MapParams, step: PreimageStep, q: Point2) -> Option<Point2> {
    match step {
        PreimageStep::Lower => {
            let p = invert_u0(params, q);
            (region_of(params, p.y) == Region::Lower).then_some(p)
        }
        PreimageStep::Upper => {
            let p = invert_u1(params, q).ok()?;
            (region_of(params, p.y) == Region::Upper && p.is_finite()).then_some(p)
        }
        PreimageStep::Blend(j) => blend_preimages(params, q).get(j).copied(),
    }
}

fn path_label(path: &[PreimageStep]) -> String {
    if path.is_empty() {
        return "axis".to_string();
    }
    path.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(".")
}

struct StableNode {
    path: Vec<PreimageStep>,
    samples: Samples,
}

/// Preimage tree of the x-axis up to `depth` inverse steps.
///
/// The root is the part of the x-axis within the escape radius (the
/// positive half when `λ > 0`): the fundamental segment together with all
/// its `U0` preimages, so pure `U0⁻¹` paths are never expanded. Children
/// use `U0⁻¹`, `U1⁻¹` and every blend-strip preimage. Branches with no
/// defined point are pruned; the result holds the branches with at least
/// one vertex inside `clip`, in breadth-first order. Siblings are traced
/// concurrently under `exec`.
pub fn trace_stable(
    params: &MapParams,
    depth: u32,
    clip: Window,
    opts: &RefineOptions,
    exec: Execution,
) -> Result<Vec<ManifoldCurve>, ManifoldError> {
    if !clip.is_valid() {
        return Err(ManifoldError::InvalidWindow);
    }
    opts.validate()?;
    let (s0, s1) = stable_range(params, opts);
    let stable_opts = RefineOptions {
        samples_per_unit: opts.samples_per_unit.next_power_of_two().max(64),
        ..*opts
    };
    let budget = Budget::new(opts.point_budget);
    let generator = |path: &[PreimageStep]| CurveGenerator::Stable {
        params: *params,
        path: path.to_vec(),
        escape_radius: opts.escape_radius,
    };
    let trace = |path: Vec<PreimageStep>| StableNode {
        samples: sample_refined(&generator(&path), s0, s1, &clip, &stable_opts, &budget),
        path,
    };

    let mut level = vec![trace(Vec::new())];
    let mut all = Vec::new();
    for _ in 0..depth {
        let candidates: Vec<Vec<PreimageStep>> = level.iter().flat_map(|node| child_paths(params, node)).collect();
        let children = exec.map(&candidates, |path| trace(path.clone()));
        all.append(&mut level);
        level = children
            .into_iter()
            .filter(|n| n.samples.points.iter().any(Option::is_some))
            .collect();
        if level.is_empty() {
            break;
        }
    }
    all.append(&mut level);

    let mut curves = Vec::new();
    for node in all {
        let curve = clip_samples(
            CurveKind::StableBranch(curves.len()),
            path_label(&node.path),
            vec![node.samples],
            &clip,
            generator(&node.path),
        );
        if !curve.is_empty() {
            curves.push(curve);
        }
    }
    Ok(curves)
}

fn stable_range(params: &MapParams, opts: &RefineOptions) -> (f64, f64) {
    let r = opts.escape_radius;
    if params.lambda < 0.0 {
        (-r, r)
    } else {
        (0.0, r)
    }
}

fn child_paths(params: &MapParams, node: &StableNode) -> Vec<Vec<PreimageStep>> {
    let mut steps = Vec::new();
    if !node.path.is_empty() {
        steps.push(PreimageStep::Lower);
    }
    steps.push(PreimageStep::Upper);
    let blend_count = node
        .samples
        .points
        .iter()
        .flatten()
        .map(|q| blend_preimages(params, *q).len())
        .max()
        .unwrap_or(0);
    steps.extend((0..blend_count).map(PreimageStep::Blend));
    steps
        .into_iter()
        .map(|s| {
            let mut p = node.path.clone();
            p.push(s);
            p
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Contact {
    Transversal,
    Tangential,
}

impl fmt::Display for Contact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Contact::Transversal => "Transversal",
            Contact::Tangential => "Tangential",
        })
    }
}

/// A point where a curve meets the x-axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TangencyHit {
    pub location: Point2,
    pub contact: Contact,
    /// Side of the axis the curve touches from (`+1` above, `−1` below);
    /// zero for crossings.
    pub curvature_sign: f64,
    /// Curve parameter of the hit.
    pub param: f64,
}

/// Finds crossings of and touches with the x-axis.
///
/// Sign changes of `y` between consecutive vertices are crossings; local
/// minima of `|y|` below `axis_tol` with both neighbours on the same side
/// are touches. With a generator, crossings are bisected to the float
/// resolution of the parameter and touches golden-section minimized to
/// `1e−10`; a touch whose refined minimum changes side becomes two
/// crossings.
pub fn detect_tangencies(curve: &ManifoldCurve, axis_tol: f64) -> Vec<TangencyHit> {
    let mut hits = Vec::new();
    for range in curve.pieces() {
        let pts = &curve.points[range.clone()];
        let ss = &curve.params[range];
        for i in 0..pts.len().saturating_sub(1) {
            let (a, b) = (pts[i].y, pts[i + 1].y);
            if a * b < 0.0 {
                hits.push(crossing(curve, ss[i], ss[i + 1], pts[i], pts[i + 1]));
            }
        }
        for i in 1..pts.len().saturating_sub(1) {
            let (ya, y, yb) = (pts[i - 1].y, pts[i].y, pts[i + 1].y);
            if y == 0.0 && ya * yb < 0.0 {
                hits.push(TangencyHit {
                    location: pts[i],
                    contact: Contact::Transversal,
                    curvature_sign: 0.0,
                    param: ss[i],
                });
                continue;
            }
            let local_min = y.abs() <= ya.abs() && y.abs() < yb.abs();
            let same_side = ya * yb > 0.0 && y * ya >= 0.0;
            if local_min && same_side && y.abs() <= axis_tol {
                hits.extend(touch(curve, [ss[i - 1], ss[i], ss[i + 1]], pts[i], ya.signum()));
            }
        }
    }
    hits.sort_by(|a, b| a.param.total_cmp(&b.param));
    hits
}

fn crossing(curve: &ManifoldCurve, s_a: f64, s_b: f64, a: Point2, b: Point2) -> TangencyHit {
    let fallback = |a: Point2, b: Point2| a.lerp(b, a.y / (a.y - b.y));
    let (location, param) = match &curve.generator {
        Some(gen) => bisect_crossing(gen, s_a, s_b, a.y).unwrap_or((fallback(a, b), 0.5 * (s_a + s_b))),
        None => (fallback(a, b), s_a + (s_b - s_a) * a.y / (a.y - b.y)),
    };
    TangencyHit {
        location,
        contact: Contact::Transversal,
        curvature_sign: 0.0,
        param,
    }
}

/// Bisects to the resolution of `f64` in the parameter, since late
/// generations move fast along the curve; returns the closest evaluated
/// point to the axis.
fn bisect_crossing(gen: &CurveGenerator, mut a: f64, mut b: f64, ya: f64) -> Option<(Point2, f64)> {
    let side = ya.signum();
    let mut best: Option<(Point2, f64)> = None;
    loop {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let p = gen.eval(m)?;
        if best.is_none_or(|(q, _)| p.y.abs() < q.y.abs()) {
            best = Some((p, m));
        }
        if p.y == 0.0 {
            break;
        }
        if p.y * side > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    best
}

fn touch(curve: &ManifoldCurve, s: [f64; 3], p: Point2, side: f64) -> Vec<TangencyHit> {
    let Some(gen) = &curve.generator else {
        return vec![TangencyHit {
            location: p,
            contact: Contact::Tangential,
            curvature_sign: side,
            param: s[1],
        }];
    };
    // golden-section search for the minimum of side·y
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let h = |t: f64| gen.eval(t).map_or(f64::INFINITY, |q| side * q.y);
    let (mut a, mut b) = (s[0], s[2]);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut hc, mut hd) = (h(c), h(d));
    while b - a > HIT_PARAM_TOL {
        if hc < hd {
            b = d;
            d = c;
            hd = hc;
            c = b - inv_phi * (b - a);
            hc = h(c);
        } else {
            a = c;
            c = d;
            hc = hd;
            d = a + inv_phi * (b - a);
            hd = h(d);
        }
        if c >= d {
            break;
        }
    }
    let s_min = 0.5 * (a + b);
    let Some(q) = gen.eval(s_min) else {
        return Vec::new();
    };
    if side * q.y < 0.0 {
        // the curve dips across the axis: two crossings
        let ya = side;
        return [(s[0], s_min), (s_min, s[2])]
            .into_iter()
            .enumerate()
            .filter_map(|(i, (l, r))| {
                let start = if i == 0 { ya } else { -ya };
                bisect_crossing(gen, l, r, start).map(|(location, param)| TangencyHit {
                    location,
                    contact: Contact::Transversal,
                    curvature_sign: 0.0,
                    param,
                })
            })
            .collect();
    }
    vec![TangencyHit {
        location: q,
        contact: Contact::Tangential,
        curvature_sign: side,
        param: s_min,
    }]
}
