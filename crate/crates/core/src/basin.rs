//! Basins of attraction: which registered attractor the forward orbit of
//! each grid cell settles on.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;
use crate::map::{eval_f, MapParams, Point2, Window, DEFAULT_ESCAPE_RADIUS};
use crate::orbit::{find_periodic_newton, OrbitOptions, PeriodicOrbit, SrkOrbit};
use crate::stability::StabilityClass;

/// Largest `|f(p_i) − p_{i+1}|` accepted for a registered orbit.
pub const REGISTRATION_TOL: f64 = 1e-10;

pub type Rgb = [u8; 3];

const BLACK: Rgb = [0, 0, 0];
const WHITE: Rgb = [255, 255, 255];

#[derive(Debug, Error)]
pub enum BasinError {
    #[error("window must be finite with positive width and height")]
    InvalidWindow,
    #[error("resolution must be at least 2x2 (got {nx}x{ny})")]
    InvalidResolution { nx: usize, ny: usize },
    #[error("attractor registry is empty")]
    EmptyRegistry,
    #[error("attractor {label:?} is not periodic (residual {residual:e})")]
    NotPeriodic { label: String, residual: f64 },
    #[error("attractor id {0} is already registered")]
    DuplicateId(u32),
    #[error("colour {0:?} is reserved or already used")]
    InvalidColor(Rgb),
    #[error("no unclassified cell to start from")]
    NoUnknownCell,
    #[error("no new stable orbit found from {attempts} unclassified cells")]
    NothingNew { attempts: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Attractor {
    pub id: u32,
    pub label: String,
    pub points: Vec<Point2>,
    pub period: usize,
    pub color: Rgb,
}

/// Registered periodic attractors with a proximity lookup sorted by `x`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AttractorRegistry {
    entries: Vec<Attractor>,
    /// `(x, y, entry index)` of every attractor point, sorted by `x`.
    lookup: Vec<(f64, f64, usize)>,
}

/// Deterministic colour for the `i`-th attractor: hues spaced by the
/// golden angle at fixed saturation and value.
pub fn palette_color(i: usize) -> Rgb {
    let hue = (i as f64 * 0.618_033_988_749_895).fract() * 6.0;
    let (s, v) = (0.8, if i.is_multiple_of(2) { 0.95 } else { 0.75 });
    let c = v * s;
    let x = c * (1.0 - (hue % 2.0 - 1.0).abs());
    let (r, g, b) = match hue as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    let to_u8 = |t: f64| ((t + m) * 255.0).round() as u8;
    [to_u8(r), to_u8(g), to_u8(b)]
}

impl AttractorRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers every asymptotically stable orbit, with id `k` and
    /// label `SR_k`.
    pub fn from_srk_orbits<'a>(
        params: &MapParams,
        orbits: impl IntoIterator<Item = &'a SrkOrbit>,
    ) -> Result<Self, BasinError> {
        let mut reg = Self::new();
        for o in orbits {
            if o.stability == StabilityClass::AsymptoticallyStable {
                reg.register(params, o.k, format!("SR_{}", o.k), o.points.clone(), None)?;
            }
        }
        Ok(reg)
    }

    pub fn entries(&self) -> &[Attractor] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: u32) -> Option<&Attractor> {
        self.entries.iter().find(|a| a.id == id)
    }

    /// Smallest id above every registered id.
    pub fn next_id(&self) -> u32 {
        self.entries.iter().map(|a| a.id + 1).max().unwrap_or(0)
    }

    /// Adds an orbit after checking that it is periodic under `f`. A
    /// missing colour is taken from [`palette_color`], skipping colours
    /// already in use.
    pub fn register(
        &mut self,
        params: &MapParams,
        id: u32,
        label: String,
        points: Vec<Point2>,
        color: Option<Rgb>,
    ) -> Result<u32, BasinError> {
        let n = points.len();
        let residual = (0..n)
            .map(|i| eval_f(params, points[i]).dist_sup(points[(i + 1) % n]))
            .fold(if n == 0 { f64::INFINITY } else { 0.0 }, f64::max);
        if !(residual <= REGISTRATION_TOL) {
            return Err(BasinError::NotPeriodic { label, residual });
        }
        if self.get(id).is_some() {
            return Err(BasinError::DuplicateId(id));
        }
        let used = |c: Rgb| c == BLACK || c == WHITE || self.entries.iter().any(|a| a.color == c);
        let color = match color {
            Some(c) if used(c) => return Err(BasinError::InvalidColor(c)),
            Some(c) => c,
            None => (self.entries.len()..)
                .map(palette_color)
                .find(|c| !used(*c))
                .expect("palette is unbounded"),
        };
        let index = self.entries.len();
        self.lookup.extend(points.iter().map(|p| (p.x, p.y, index)));
        self.lookup.sort_by(|a, b| a.0.total_cmp(&b.0));
        self.entries.push(Attractor {
            id,
            label,
            period: n,
            points,
            color,
        });
        Ok(id)
    }

    /// Entry index of the attractor point nearest to `q` in sup norm, if
    /// within `tol`.
    fn nearest(&self, q: Point2, tol: f64) -> Option<usize> {
        let start = self.lookup.partition_point(|e| e.0 < q.x - tol);
        let mut best: Option<(f64, usize)> = None;
        for &(x, y, idx) in &self.lookup[start..] {
            if x > q.x + tol {
                break;
            }
            let d = (x - q.x).abs().max((y - q.y).abs());
            if d <= tol && best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, idx));
            }
        }
        best.map(|(_, idx)| idx)
    }
}

/// Iteration limits of the basin classifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BasinLimits {
    pub max_iter: usize,
    pub escape_radius: f64,
    pub prox_tol: f64,
}

impl Default for BasinLimits {
    fn default() -> Self {
        Self {
            max_iter: 20_000,
            escape_radius: DEFAULT_ESCAPE_RADIUS,
            prox_tol: 1e-5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum BasinLabel {
    Attractor(u32),
    Unknown,
    Divergent,
}

impl fmt::Display for BasinLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BasinLabel::Attractor(id) => write!(f, "{id}"),
            BasinLabel::Unknown => f.write_str("unknown"),
            BasinLabel::Divergent => f.write_str("divergent"),
        }
    }
}

/// Label of a start point and the iterations spent on it.
pub fn classify_point_counted(
    params: &MapParams,
    registry: &AttractorRegistry,
    p: Point2,
    limits: &BasinLimits,
) -> (BasinLabel, usize) {
    let mut q = p;
    let mut streak: Option<(usize, usize)> = None;
    for it in 0..=limits.max_iter {
        if !(q.sup_norm() <= limits.escape_radius) {
            return (BasinLabel::Divergent, it);
        }
        streak = match (registry.nearest(q, limits.prox_tol), streak) {
            (Some(idx), Some((cur, n))) if idx == cur => Some((idx, n + 1)),
            (Some(idx), _) => Some((idx, 1)),
            (None, _) => None,
        };
        if let Some((idx, n)) = streak {
            let a = &registry.entries[idx];
            if n >= a.period {
                return (BasinLabel::Attractor(a.id), it);
            }
        }
        if it < limits.max_iter {
            q = eval_f(params, q);
        }
    }
    (BasinLabel::Unknown, limits.max_iter)
}

/// Iterates `p` until it escapes (`Divergent`), stays within `prox_tol`
/// of one attractor's points for a full period of that attractor, or
/// exhausts `max_iter` (`Unknown`).
pub fn classify_point(params: &MapParams, registry: &AttractorRegistry, p: Point2, limits: &BasinLimits) -> BasinLabel {
    classify_point_counted(params, registry, p, limits).0
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct IterationStats {
    pub total: u64,
    pub max: usize,
    pub mean: f64,
}

/// Labels of an `nx × ny` grid of cell centres, row-major with row 0 at
/// the top of the window.
#[derive(Debug, Clone, PartialEq)]
pub struct BasinGrid {
    pub window: Window,
    pub nx: usize,
    pub ny: usize,
    pub labels: Vec<BasinLabel>,
    pub iterations_used: IterationStats,
}

impl BasinGrid {
    /// Centre of cell `(col, row)`.
    pub fn cell_center(window: &Window, nx: usize, ny: usize, col: usize, row: usize) -> Point2 {
        Point2::new(
            window.x_min + (col as f64 + 0.5) * window.width() / nx as f64,
            window.y_max - (row as f64 + 0.5) * window.height() / ny as f64,
        )
    }

    pub fn label(&self, col: usize, row: usize) -> BasinLabel {
        self.labels[row * self.nx + col]
    }

    /// Cell containing `p`, if inside the window.
    pub fn cell_of(&self, p: Point2) -> Option<(usize, usize)> {
        if !self.window.contains(p) {
            return None;
        }
        let fx = (p.x - self.window.x_min) / self.window.width();
        let fy = (self.window.y_max - p.y) / self.window.height();
        let col = ((fx * self.nx as f64) as usize).min(self.nx - 1);
        let row = ((fy * self.ny as f64) as usize).min(self.ny - 1);
        Some((col, row))
    }

    /// Cell count per label, ordered by label.
    pub fn counts(&self) -> BTreeMap<BasinLabel, usize> {
        let mut m = BTreeMap::new();
        for l in &self.labels {
            *m.entry(*l).or_insert(0) += 1;
        }
        m
    }

    pub fn fraction(&self, label: BasinLabel) -> f64 {
        self.labels.iter().filter(|l| **l == label).count() as f64 / self.labels.len() as f64
    }
}

/// Classifies every cell centre. Rows are independent and run under
/// `exec`; the result does not depend on the schedule.
pub fn raster(
    params: &MapParams,
    registry: &AttractorRegistry,
    window: Window,
    resolution: (usize, usize),
    limits: &BasinLimits,
    exec: Execution,
) -> Result<BasinGrid, BasinError> {
    let (nx, ny) = resolution;
    if !window.is_valid() {
        return Err(BasinError::InvalidWindow);
    }
    if nx < 2 || ny < 2 {
        return Err(BasinError::InvalidResolution { nx, ny });
    }
    if registry.is_empty() {
        return Err(BasinError::EmptyRegistry);
    }
    let mut cells = vec![(BasinLabel::Unknown, 0usize); nx * ny];
    exec.for_each_chunk(&mut cells, nx, |row, out| {
        for (col, cell) in out.iter_mut().enumerate() {
            let p = BasinGrid::cell_center(&window, nx, ny, col, row);
            *cell = classify_point_counted(params, registry, p, limits);
        }
    });
    let total: u64 = cells.iter().map(|c| c.1 as u64).sum();
    let iterations_used = IterationStats {
        total,
        max: cells.iter().map(|c| c.1).max().unwrap_or(0),
        mean: total as f64 / cells.len() as f64,
    };
    Ok(BasinGrid {
        window,
        nx,
        ny,
        labels: cells.into_iter().map(|c| c.0).collect(),
        iterations_used,
    })
}

fn label_color(registry: &AttractorRegistry, label: BasinLabel) -> Rgb {
    match label {
        BasinLabel::Attractor(id) => registry.get(id).map_or(BLACK, |a| a.color),
        BasinLabel::Unknown => BLACK,
        BasinLabel::Divergent => WHITE,
    }
}

/// Binary P6 pixmap bytes: `P6\n<nx> <ny>\n255\n` then RGB rows, top row
/// first.
pub fn encode_ppm(grid: &BasinGrid, registry: &AttractorRegistry) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", grid.nx, grid.ny).into_bytes();
    out.reserve(3 * grid.labels.len());
    for l in &grid.labels {
        out.extend_from_slice(&label_color(registry, *l));
    }
    out
}

pub fn write_ppm(grid: &BasinGrid, registry: &AttractorRegistry, path: &Path) -> Result<(), BasinError> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(&encode_ppm(grid, registry))?;
    f.flush()?;
    Ok(())
}

/// Unclassified cells tried by [`discover_attractor`].
const DISCOVERY_ATTEMPTS: usize = 32;

/// Looks for an attractor missing from the registry.
///
/// Up to 32 `Unknown` cells, spread evenly over the unclassified ones in
/// raster order, are iterated `settle` times and a period-`period` orbit is
/// solved for from there. The first asymptotically stable orbit that is not
/// already registered is returned.
pub fn discover_attractor(
    params: &MapParams,
    grid: &BasinGrid,
    registry: &AttractorRegistry,
    period: usize,
    settle: usize,
    opts: &OrbitOptions,
) -> Result<PeriodicOrbit, BasinError> {
    let unknown: Vec<usize> = (0..grid.labels.len())
        .filter(|&i| grid.labels[i] == BasinLabel::Unknown)
        .collect();
    if unknown.is_empty() {
        return Err(BasinError::NoUnknownCell);
    }
    let stride = unknown.len().div_ceil(DISCOVERY_ATTEMPTS);
    let tried = unknown.iter().step_by(stride);
    let attempts = tried.len();
    for &idx in tried {
        let mut q = BasinGrid::cell_center(&grid.window, grid.nx, grid.ny, idx % grid.nx, idx / grid.nx);
        for _ in 0..settle {
            q = eval_f(params, q);
        }
        let Ok(orbit) = find_periodic_newton(params, q, period, opts) else {
            continue;
        };
        let known = orbit
            .points
            .iter()
            .any(|p| registry.nearest(*p, REGISTRATION_TOL.sqrt()).is_some());
        if orbit.stability == StabilityClass::AsymptoticallyStable && !known {
            return Ok(orbit);
        }
    }
    Err(BasinError::NothingNew { attempts })
}
