//! Arcs of the unit circle, the two shifted dyadic grids and Carleson boxes.
//!
//! Arc lengths are normalized fractions of the circle, so a level-`j` dyadic
//! arc has length `2^-j`, and box areas are normalized so the whole disk has
//! area one. With these units the full box over an arc of length `l` has area
//! `l^2 (2 - l)` and its top half has area `l (1 - (1 - l/2)^2)`.
//!
//! The standard grid starts at angle zero; the shifted grid is the same
//! partition rotated by a third of the circle. Any arc is contained in an
//! arc of one of the two grids that is at most six times longer
//! ([`mei_cover`]), which is what makes a two-grid sum dominate the
//! continuous kernels.

use std::f64::consts::{PI, TAU};
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default finest level: arcs down to `2^-24`.
pub const DEFAULT_MAX_DEPTH: u32 = 24;

/// Levels above this cannot be represented exactly in `f64` angles.
pub const HARD_MAX_DEPTH: u32 = 52;

const ANGLE_EPS: f64 = 1e-12;

/// Reduces an angle to `[0, 2π)`.
pub fn normalize_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    if t >= TAU {
        0.0
    } else {
        t
    }
}

/// Argument of a point in `[0, 2π)`; the origin has angle zero.
pub fn angle_of(z: Complex64) -> f64 {
    if z.re == 0.0 && z.im == 0.0 {
        0.0
    } else {
        normalize_angle(z.im.atan2(z.re))
    }
}

/// One of the two dyadic grids on the circle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Grid {
    /// Breakpoints at `2πm / 2^j`.
    #[serde(rename = "0")]
    Standard,
    /// Breakpoints at `2πm / 2^j + 2π/3`.
    #[serde(rename = "1/3")]
    Shifted,
}

impl Grid {
    pub const BOTH: [Grid; 2] = [Grid::Standard, Grid::Shifted];

    /// Rotation of the grid, in radians.
    pub fn shift(self) -> f64 {
        match self {
            Grid::Standard => 0.0,
            Grid::Shifted => TAU / 3.0,
        }
    }

    /// Rotation as a fraction of the circle.
    pub fn offset(self) -> f64 {
        match self {
            Grid::Standard => 0.0,
            Grid::Shifted => 1.0 / 3.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Grid::Standard => "0",
            Grid::Shifted => "1/3",
        }
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// A half-open arc `[start, start + 2π len)` taken mod 2π.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    start: f64,
    len: f64,
}

impl Arc {
    pub fn new(start: f64, len: f64) -> Result<Self> {
        if !start.is_finite() {
            return Err(Error::Argument(format!("arc start {start} is not finite")));
        }
        if !(len > 0.0 && len <= 1.0) {
            return Err(Error::Argument(format!("arc length {len} outside (0, 1]")));
        }
        Ok(Arc {
            start: normalize_angle(start),
            len,
        })
    }

    pub fn full() -> Self {
        Arc { start: 0.0, len: 1.0 }
    }

    /// Start angle in `[0, 2π)`.
    pub fn start(&self) -> f64 {
        self.start
    }

    /// Normalized length in `(0, 1]`.
    pub fn len(&self) -> f64 {
        self.len
    }

    /// Angular width in radians.
    pub fn width(&self) -> f64 {
        TAU * self.len
    }

    pub fn is_full(&self) -> bool {
        self.len >= 1.0
    }

    /// True when the arc runs past angle 2π.
    pub fn wraps(&self) -> bool {
        !self.is_full() && self.start + self.width() > TAU
    }

    pub fn contains_angle(&self, theta: f64) -> bool {
        if self.is_full() {
            return true;
        }
        (theta - self.start).rem_euclid(TAU) < self.width()
    }

    /// Whether `other ⊆ self`, up to a tiny angular tolerance.
    pub fn contains_arc(&self, other: &Arc) -> bool {
        if self.is_full() {
            return true;
        }
        let mut d = (other.start - self.start).rem_euclid(TAU);
        if d > TAU - ANGLE_EPS {
            d -= TAU;
        }
        d >= -ANGLE_EPS && d + other.width() <= self.width() + ANGLE_EPS
    }

    /// Midpoint angle in `[0, 2π)`.
    pub fn center(&self) -> f64 {
        normalize_angle(self.start + 0.5 * self.width())
    }
}

/// Address of an arc in one of the dyadic grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DyadicIndex {
    pub grid: Grid,
    pub level: u32,
    pub position: u64,
}

impl DyadicIndex {
    pub fn new(grid: Grid, level: u32, position: u64) -> Result<Self> {
        if level > HARD_MAX_DEPTH {
            return Err(Error::Depth {
                level,
                max: HARD_MAX_DEPTH,
            });
        }
        if position >= 1u64 << level {
            return Err(Error::Argument(format!(
                "position {position} out of range for level {level}"
            )));
        }
        Ok(DyadicIndex {
            grid,
            level,
            position,
        })
    }

    pub fn root(grid: Grid) -> Self {
        DyadicIndex {
            grid,
            level: 0,
            position: 0,
        }
    }

    /// The member of `grid` at `level` whose arc contains `theta`.
    pub fn containing(grid: Grid, level: u32, theta: f64) -> Self {
        let n = 1u64 << level;
        let frac = (theta - grid.shift()).rem_euclid(TAU) / TAU;
        let position = ((frac * n as f64).floor() as u64).min(n - 1);
        DyadicIndex {
            grid,
            level,
            position,
        }
    }

    /// Normalized arc length `2^-level`.
    pub fn len(&self) -> f64 {
        (-(self.level as f64)).exp2()
    }

    pub fn arc(&self) -> Arc {
        let len = self.len();
        Arc {
            start: normalize_angle(TAU * self.position as f64 * len + self.grid.shift()),
            len,
        }
    }

    pub fn parent(&self) -> Option<Self> {
        (self.level > 0).then(|| DyadicIndex {
            grid: self.grid,
            level: self.level - 1,
            position: self.position / 2,
        })
    }

    /// Whether `other` is `self` or one of its descendants.
    pub fn is_ancestor_of(&self, other: &DyadicIndex) -> bool {
        self.grid == other.grid
            && other.level >= self.level
            && other.position >> (other.level - self.level) == self.position
    }

    pub fn full_box(&self) -> CarlesonBox {
        CarlesonBox::full(self.arc())
    }

    pub fn top_half(&self) -> CarlesonBox {
        CarlesonBox::top_half(self.arc())
    }
}

impl fmt::Display for DyadicIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.grid, self.level, self.position)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoxKind {
    /// `Q_I = {1 - l <= |z| < 1, z/|z| in I}`
    Full,
    /// `B_I = {1 - l/2 < |z| < 1, z/|z| in I}`
    TopHalf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarlesonBox {
    pub arc: Arc,
    pub kind: BoxKind,
}

impl CarlesonBox {
    pub fn full(arc: Arc) -> Self {
        CarlesonBox {
            arc,
            kind: BoxKind::Full,
        }
    }

    pub fn top_half(arc: Arc) -> Self {
        CarlesonBox {
            arc,
            kind: BoxKind::TopHalf,
        }
    }

    /// Radial extent `(inner, outer)`; the outer radius is always 1.
    pub fn radii(&self) -> (f64, f64) {
        let l = self.arc.len();
        match self.kind {
            BoxKind::Full => (1.0 - l, 1.0),
            BoxKind::TopHalf => (1.0 - 0.5 * l, 1.0),
        }
    }

    pub fn area(&self) -> f64 {
        box_area(self)
    }

    pub fn contains(&self, z: Complex64) -> bool {
        let r = z.norm();
        if r >= 1.0 {
            return false;
        }
        let (inner, _) = self.radii();
        let radial = match self.kind {
            BoxKind::Full => r >= inner,
            BoxKind::TopHalf => r > inner,
        };
        radial && self.arc.contains_angle(angle_of(z))
    }
}

/// Arc of the dyadic grid member `(grid, level, position)`.
pub fn dyadic_interval(grid: Grid, level: u32, position: u64) -> Result<Arc> {
    Ok(DyadicIndex::new(grid, level, position)?.arc())
}

/// Normalized area of a box, in closed form.
pub fn box_area(b: &CarlesonBox) -> f64 {
    let l = b.arc.len();
    match b.kind {
        BoxKind::Full => l * l * (2.0 - l),
        BoxKind::TopHalf => {
            let inner = 1.0 - 0.5 * l;
            l * (1.0 - inner * inner)
        }
    }
}

/// The two halves of a dyadic arc, one level down.
pub fn box_children(index: &DyadicIndex, max_depth: u32) -> Result<(DyadicIndex, DyadicIndex)> {
    let max = max_depth.min(HARD_MAX_DEPTH);
    if index.level >= max {
        return Err(Error::Depth {
            level: index.level + 1,
            max,
        });
    }
    let child = |offset| DyadicIndex {
        grid: index.grid,
        level: index.level + 1,
        position: 2 * index.position + offset,
    };
    Ok((child(0), child(1)))
}

/// Finest level whose arcs are at least as long as `len`.
fn coarsest_fit_level(len: f64, max_depth: u32) -> u32 {
    let mut level = (-len.log2()).floor().clamp(0.0, max_depth as f64) as u32;
    while level > 0 && (-(level as f64)).exp2() < len {
        level -= 1;
    }
    while level < max_depth && (-((level + 1) as f64)).exp2() >= len {
        level += 1;
    }
    level
}

/// A dyadic arc `L` from either grid with `J ⊆ L` and `|L| <= 6|J|`.
///
/// Scans from the finest level that can hold `J` towards level 0, trying the
/// standard grid before the shifted one at each level, so the result is the
/// shortest such arc.
pub fn mei_cover(j: &Arc) -> DyadicIndex {
    mei_cover_to_depth(j, DEFAULT_MAX_DEPTH)
}

/// [`mei_cover`] with an explicit finest level. Arcs shorter than
/// `2^-max_depth / 6` cannot meet the length bound; for those the shortest
/// containing arc is returned.
pub fn mei_cover_to_depth(j: &Arc, max_depth: u32) -> DyadicIndex {
    let max_depth = max_depth.min(HARD_MAX_DEPTH);
    let bound = 6.0 * j.len() * (1.0 + 1e-12);
    let mut fallback = None;
    for level in (0..=coarsest_fit_level(j.len(), max_depth)).rev() {
        for grid in Grid::BOTH {
            let candidate = DyadicIndex::containing(grid, level, j.start());
            if candidate.arc().contains_arc(j) {
                if candidate.len() <= bound {
                    return candidate;
                }
                fallback.get_or_insert(candidate);
            }
        }
    }
    fallback.unwrap_or(DyadicIndex::root(Grid::Standard))
}

/// Result of [`bridge_box`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bridge {
    pub index: DyadicIndex,
    /// `|1 - z conj(w)| / area(Q_L)^(1/2)`
    pub ratio: f64,
}

/// A dyadic box holding both points whose size is comparable to
/// `|1 - z conj(w)|`.
///
/// Takes the shorter arc between the two angles, widens it symmetrically to
/// at least `1 - min(|z|, |w|)`, and covers the result with [`mei_cover`].
/// The hull is treated as closed, so an endpoint that lands exactly on a
/// grid breakpoint forces the next coarser arc.
pub fn bridge_box(z: Complex64, w: Complex64) -> Result<Bridge> {
    let (rz, rw) = (z.norm(), w.norm());
    if !(rz < 1.0 && rw < 1.0) {
        return Err(Error::Argument("bridge_box points must lie in the open disk".into()));
    }
    let (tz, tw) = (angle_of(z), angle_of(w));
    let d = (tw - tz).rem_euclid(TAU);
    let (hull_start, hull_width) = if d <= PI { (tz, d) } else { (tw, TAU - d) };
    let hull_len = hull_width / TAU;
    let target = hull_len.max(1.0 - rz.min(rw));
    let padded = (target * (1.0 + 1e-9)).min(1.0);
    let start = hull_start - 0.5 * (padded - hull_len) * TAU;
    let arc = Arc::new(start, padded)?;
    let mut index = mei_cover_to_depth(&arc, HARD_MAX_DEPTH);
    let holds = |idx: &DyadicIndex| {
        let b = idx.full_box();
        b.contains(z) && b.contains(w)
    };
    while !holds(&index) {
        index = index.parent().unwrap_or(DyadicIndex::root(Grid::Standard));
        if index.level == 0 {
            break;
        }
    }
    let ratio = (Complex64::new(1.0, 0.0) - z * w.conj()).norm() / box_area(&index.full_box()).sqrt();
    Ok(Bridge { index, ratio })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn level_zero_is_full_circle() {
        let arc = dyadic_interval(Grid::Standard, 0, 0).unwrap();
        assert_eq!(arc.start(), 0.0);
        assert_eq!(arc.len(), 1.0);
        assert!(arc.is_full());
    }

    #[test]
    fn eighth_of_standard_grid() {
        let arc = dyadic_interval(Grid::Standard, 3, 0).unwrap();
        assert_eq!(arc.start(), 0.0);
        assert_eq!(arc.len(), 0.125);
        assert!(close(arc.width(), TAU / 8.0, 1e-15));
    }

    #[test]
    fn shifted_grid_wraps() {
        let arc = dyadic_interval(Grid::Shifted, 1, 1).unwrap();
        assert!(close(arc.start(), 5.0 * PI / 3.0, 1e-14));
        assert_eq!(arc.len(), 0.5);
        assert!(arc.wraps());
        assert!(arc.contains_angle(0.0));
        assert!(arc.contains_angle(TAU / 3.0 - 1e-9));
        assert!(!arc.contains_angle(TAU / 3.0 + 1e-9));
    }

    #[test]
    fn out_of_range_position() {
        assert!(matches!(
            dyadic_interval(Grid::Standard, 2, 4),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn areas() {
        assert_eq!(box_area(&CarlesonBox::full(Arc::full())), 1.0);
        let half = Arc::new(0.0, 0.5).unwrap();
        assert!(close(box_area(&CarlesonBox::full(half)), 3.0 / 8.0, 1e-15));
        assert!(close(box_area(&CarlesonBox::top_half(half)), 7.0 / 32.0, 1e-15));
    }

    #[test]
    fn children() {
        let r = DyadicIndex::root(Grid::Standard);
        let (a, b) = box_children(&r, 24).unwrap();
        assert_eq!((a.level, a.position, b.position), (1, 0, 1));
        let (c, d) = box_children(&b, 24).unwrap();
        assert_eq!((c.level, c.position, d.position), (2, 2, 3));
        let (e, f) = box_children(&DyadicIndex::root(Grid::Shifted), 24).unwrap();
        assert_eq!((e.grid, e.position, f.position), (Grid::Shifted, 0, 1));
        let deep = DyadicIndex::new(Grid::Standard, 24, 0).unwrap();
        assert!(matches!(box_children(&deep, 24), Err(Error::Depth { .. })));
    }

    #[test]
    fn mei_cover_dyadic_arc_is_itself() {
        let j = dyadic_interval(Grid::Standard, 3, 0).unwrap();
        let l = mei_cover(&j);
        assert_eq!(l, DyadicIndex::new(Grid::Standard, 3, 0).unwrap());
    }

    #[test]
    fn mei_cover_long_arc_falls_back_to_root() {
        // [0.32, 0.52] of the circle holds the level-1 breakpoints 1/3 and 1/2
        let j = Arc::new(0.32 * TAU, 0.2).unwrap();
        let l = mei_cover(&j);
        assert_eq!(l.level, 0);
        assert_eq!(l.grid, Grid::Standard);
    }

    #[test]
    fn mei_cover_straddling_pi() {
        let j = Arc::new(PI - TAU / 64.0, 1.0 / 32.0).unwrap();
        let l = mei_cover(&j);
        assert_eq!(l.grid, Grid::Shifted);
        assert!(l.len() <= 6.0 / 32.0);
        assert!(l.arc().contains_arc(&j));
    }

    #[test]
    fn bridge_origin() {
        let b = bridge_box(Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)).unwrap();
        assert_eq!(b.index.level, 0);
        assert!(close(b.ratio, 1.0, 1e-15));
    }

    #[test]
    fn bridge_antipodal() {
        let b = bridge_box(Complex64::new(0.9, 0.0), Complex64::new(-0.9, 0.0)).unwrap();
        assert_eq!(b.index.level, 0);
        assert!(close(b.ratio, 1.81, 1e-14));
    }

    #[test]
    fn bridge_same_point() {
        let z = Complex64::new(0.75, 0.0);
        let b = bridge_box(z, z).unwrap();
        assert!(b.index.len() >= 0.25);
        assert!(b.index.full_box().contains(z));
    }

    #[test]
    fn box_membership() {
        let q = DyadicIndex::new(Grid::Standard, 2, 0).unwrap().full_box();
        assert!(q.contains(Complex64::from_polar(0.75, 0.1)));
        assert!(!q.contains(Complex64::from_polar(0.7499, 0.1)));
        assert!(!q.contains(Complex64::from_polar(0.9, PI / 2.0 + 1e-9)));
        let b = DyadicIndex::new(Grid::Standard, 2, 0).unwrap().top_half();
        assert!(!b.contains(Complex64::from_polar(0.8749, 0.1)));
        assert!(b.contains(Complex64::from_polar(0.876, 0.1)));
    }
}
