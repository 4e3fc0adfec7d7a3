//! Weights on the disk, box masses and the doubling / reverse-doubling testers.

pub mod quadrature;
pub mod weight;

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

pub use quadrature::{build_quadrature, Alignment, Cell, DiskQuadrature, QuadratureSpec};
pub use weight::{dual_weight, radial_power_mass, GridDensity, Weight};

use crate::error::{Error, Result};
use crate::geometry::{Arc, BoxKind, CarlesonBox, DyadicIndex, Grid};

/// Per-box sums over one grid, levels `0..=depth`.
///
/// Entry `(j, m)` is the sum of a cell quantity over the full box `Q_I` of
/// the grid member `(j, m)`. Cells in strata deeper than `depth` are charged
/// to their level-`depth` box, so every entry is a sum over the whole box.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxTree {
    grid: Grid,
    levels: Vec<Vec<f64>>,
}

impl BoxTree {
    pub fn from_cells(quad: &DiskQuadrature, grid: Grid, depth: u32, values: &[f64]) -> Result<Self> {
        if depth > quad.depth() {
            return Err(Error::Resolution {
                level: depth,
                depth: quad.depth(),
            });
        }
        assert_eq!(values.len(), quad.len(), "one value per cell");
        let mut levels: Vec<Vec<f64>> = (0..=depth).map(|j| vec![0.0; 1usize << j]).collect();
        for (cell, v) in quad.cells().iter().zip(values) {
            let level = cell.stratum.min(depth);
            let idx = DyadicIndex::containing(grid, level, cell.angle);
            levels[level as usize][idx.position as usize] += v;
        }
        for j in (0..depth as usize).rev() {
            let (upper, lower) = levels.split_at_mut(j + 1);
            let child = &lower[0];
            for (m, v) in upper[j].iter_mut().enumerate() {
                *v += child[2 * m] + child[2 * m + 1];
            }
        }
        Ok(BoxTree { grid, levels })
    }

    /// A tree whose entries depend only on the level.
    pub fn from_level_values(grid: Grid, per_level: &[f64]) -> Self {
        let levels = per_level
            .iter()
            .enumerate()
            .map(|(j, v)| vec![*v; 1usize << j])
            .collect();
        BoxTree { grid, levels }
    }

    /// A tree from explicit rows; row `j` must hold `2^j` entries.
    pub fn from_rows(grid: Grid, levels: Vec<Vec<f64>>) -> Self {
        debug_assert!(levels.iter().enumerate().all(|(j, row)| row.len() == 1usize << j));
        BoxTree { grid, levels }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn depth(&self) -> u32 {
        self.levels.len() as u32 - 1
    }

    pub fn level(&self, j: u32) -> &[f64] {
        &self.levels[j as usize]
    }

    pub fn get(&self, idx: &DyadicIndex) -> f64 {
        debug_assert_eq!(idx.grid, self.grid);
        self.levels[idx.level as usize][idx.position as usize]
    }

    pub fn iter(&self) -> impl Iterator<Item = (DyadicIndex, f64)> + '_ {
        let grid = self.grid;
        self.levels.iter().enumerate().flat_map(move |(j, row)| {
            row.iter().enumerate().map(move |(m, v)| {
                (
                    DyadicIndex {
                        grid,
                        level: j as u32,
                        position: m as u64,
                    },
                    *v,
                )
            })
        })
    }
}

/// Masses of all boxes of one grid under a fixed weight.
#[derive(Debug, Clone)]
pub struct BoxMassTable {
    weight: String,
    tree: BoxTree,
}

impl BoxMassTable {
    /// Closed form for radial weights, otherwise summed over the quadrature.
    pub fn build(w: &Weight, grid: Grid, depth: u32, quad: Option<&DiskQuadrature>) -> Result<Self> {
        if !w.is_finite() {
            return Err(Error::InfiniteMass(w.to_string()));
        }
        let tree = if w.is_radial() {
            let per_level: Vec<f64> = (0..=depth)
                .map(|j| {
                    let l = (-(j as f64)).exp2();
                    l * w.radial_mass(1.0 - l, 1.0)
                })
                .collect();
            BoxTree::from_level_values(grid, &per_level)
        } else {
            let quad = quad.ok_or_else(|| {
                Error::Argument(format!("weight `{w}` needs a quadrature for box masses"))
            })?;
            BoxTree::from_cells(quad, grid, depth, &quad.cell_masses(w))?
        };
        Ok(BoxMassTable {
            weight: w.to_string(),
            tree,
        })
    }

    pub fn weight(&self) -> &str {
        &self.weight
    }

    pub fn tree(&self) -> &BoxTree {
        &self.tree
    }

    pub fn depth(&self) -> u32 {
        self.tree.depth()
    }

    pub fn mass(&self, idx: &DyadicIndex) -> f64 {
        self.tree.get(idx)
    }

    /// `mass(B_I)`, the sum of the two child boxes.
    pub fn top_half_mass(&self, idx: &DyadicIndex) -> Result<f64> {
        if idx.level >= self.depth() {
            return Err(Error::Resolution {
                level: idx.level + 1,
                depth: self.depth(),
            });
        }
        let level = self.tree.level(idx.level + 1);
        let m = 2 * idx.position as usize;
        Ok(level[m] + level[m + 1])
    }
}

/// Mass of a box under `w`: exact for radial weights, otherwise the sum over
/// cells whose centers lie in the box.
pub fn box_mass(w: &Weight, b: &CarlesonBox, quad: Option<&DiskQuadrature>) -> Result<f64> {
    if !w.is_finite() {
        return Err(Error::InfiniteMass(w.to_string()));
    }
    let (inner, outer) = b.radii();
    if w.is_radial() {
        return Ok(b.arc.len() * w.radial_mass(inner, outer));
    }
    let quad = quad.ok_or_else(|| Error::Argument(format!("weight `{w}` needs a quadrature")))?;
    let level = (-b.arc.len().log2()).ceil().max(0.0) as u32;
    let level = if b.kind == BoxKind::TopHalf { level + 1 } else { level };
    if level > quad.depth() {
        return Err(Error::Resolution {
            level,
            depth: quad.depth(),
        });
    }
    let masses = quad.cell_masses(w);
    Ok(sum_in_box(quad, &masses, b))
}

fn sum_in_box(quad: &DiskQuadrature, values: &[f64], b: &CarlesonBox) -> f64 {
    quad.cells()
        .iter()
        .zip(values)
        .filter(|(c, _)| b.contains(c.center))
        .map(|(_, v)| *v)
        .sum()
}

#[derive(Debug, Clone, Serialize)]
pub struct ReverseDoublingReport {
    pub delta_hat: f64,
    pub worst_arc: Arc,
    pub worst_index: Option<DyadicIndex>,
    pub verdict: bool,
    pub margin: f64,
    pub dyadic_boxes: usize,
    pub random_arcs: usize,
}

pub const DEFAULT_REVERSE_DOUBLING_MARGIN: f64 = 1e-6;

/// Largest observed `mass(B_I) / mass(Q_I)` over every dyadic arc of both
/// grids up to `depth` plus `random_arcs` uniformly placed arcs.
///
/// Non-radial weights need a quadrature at least one level deeper than
/// `depth`, since `B_I` is the union of the two child boxes.
pub fn reverse_doubling_report<R: Rng + ?Sized>(
    w: &Weight,
    depth: u32,
    random_arcs: usize,
    quad: Option<&DiskQuadrature>,
    margin: f64,
    rng: &mut R,
) -> Result<ReverseDoublingReport> {
    if !w.is_finite() {
        return Err(Error::InfiniteMass(w.to_string()));
    }
    let mut best: Option<(f64, Arc, Option<DyadicIndex>)> = None;
    let mut consider = |ratio: f64, arc: Arc, idx: Option<DyadicIndex>| {
        if best.as_ref().is_none_or(|(r, _, _)| ratio > *r) {
            best = Some((ratio, arc, idx));
        }
    };
    let degenerate = |arc: &Arc| Error::DegenerateWeight(format!("box over arc {arc:?} has zero mass"));
    let mut dyadic_boxes = 0;

    let arc_lengths: Vec<(f64, f64)> = (0..random_arcs)
        .map(|_| {
            let start = rng.random::<f64>() * TAU;
            let u: f64 = rng.random();
            (start, (-(u * depth as f64)).exp2())
        })
        .collect();

    if w.is_radial() {
        let ratio_at = |l: f64| -> Result<f64> {
            let full = w.radial_mass(1.0 - l, 1.0);
            if full <= 0.0 {
                return Err(degenerate(&Arc::new(0.0, l)?));
            }
            Ok(w.radial_mass(1.0 - 0.5 * l, 1.0) / full)
        };
        for j in 0..=depth {
            let idx = DyadicIndex::root(Grid::Standard);
            let idx = DyadicIndex { level: j, ..idx };
            consider(ratio_at(idx.len())?, idx.arc(), Some(idx));
            dyadic_boxes += 2usize << j;
        }
        for (start, l) in arc_lengths {
            consider(ratio_at(l)?, Arc::new(start, l)?, None);
        }
    } else {
        let quad = quad.ok_or_else(|| Error::Argument(format!("weight `{w}` needs a quadrature")))?;
        if depth + 1 > quad.depth() {
            return Err(Error::Resolution {
                level: depth + 1,
                depth: quad.depth(),
            });
        }
        let masses = quad.cell_masses(w);
        for grid in Grid::BOTH {
            let tree = BoxTree::from_cells(quad, grid, depth + 1, &masses)?;
            for j in 0..=depth {
                let below = tree.level(j + 1);
                for (m, full) in tree.level(j).iter().enumerate() {
                    let idx = DyadicIndex {
                        grid,
                        level: j,
                        position: m as u64,
                    };
                    if *full <= 0.0 {
                        return Err(degenerate(&idx.arc()));
                    }
                    consider((below[2 * m] + below[2 * m + 1]) / full, idx.arc(), Some(idx));
                    dyadic_boxes += 1;
                }
            }
        }
        let ratios: Vec<Result<(f64, Arc)>> = arc_lengths
            .par_iter()
            .map(|&(start, l)| {
                let arc = Arc::new(start, l)?;
                let full = sum_in_box(quad, &masses, &CarlesonBox::full(arc));
                if full <= 0.0 {
                    return Err(degenerate(&arc));
                }
                Ok((sum_in_box(quad, &masses, &CarlesonBox::top_half(arc)) / full, arc))
            })
            .collect();
        for r in ratios {
            let (ratio, arc) = r?;
            consider(ratio, arc, None);
        }
    }
    let (delta_hat, worst_arc, worst_index) = best.expect("level 0 is always tested");
    Ok(ReverseDoublingReport {
        delta_hat,
        worst_arc,
        worst_index,
        verdict: delta_hat < 1.0 - margin,
        margin,
        dyadic_boxes,
        random_arcs,
    })
}

/// Normalized area of `B(center, r) ∩ D`.
pub fn disk_ball_area(center: Complex64, r: f64) -> f64 {
    let d = center.norm();
    if r <= 0.0 {
        return 0.0;
    }
    if d + r <= 1.0 {
        return r * r;
    }
    if r >= 1.0 + d {
        return 1.0;
    }
    if d >= 1.0 + r {
        return 0.0;
    }
    let a1 = ((d * d + r * r - 1.0) / (2.0 * d * r)).clamp(-1.0, 1.0).acos();
    let a2 = ((d * d + 1.0 - r * r) / (2.0 * d)).clamp(-1.0, 1.0).acos();
    let k = ((-d + r + 1.0) * (d + r - 1.0) * (d - r + 1.0) * (d + r + 1.0)).max(0.0);
    (r * r * a1 + a2 - 0.5 * k.sqrt()) / PI
}

#[derive(Debug, Clone, Serialize)]
pub struct DoublingReport {
    pub c_hat: f64,
    pub worst_center: [f64; 2],
    pub worst_radius: f64,
    pub samples: usize,
    pub exact_areas: bool,
}

/// Sampled doubling constant `max mass(B(z,2r) ∩ D) / mass(B(z,r) ∩ D)`.
///
/// Lebesgue masses use the exact lens area; other weights sum cell masses,
/// and radii are kept above four local cell diameters.
pub fn doubling_report<R: Rng + ?Sized>(
    w: &Weight,
    samples: usize,
    quad: &DiskQuadrature,
    rng: &mut R,
) -> Result<DoublingReport> {
    if !w.is_finite() {
        return Err(Error::InfiniteMass(w.to_string()));
    }
    let exact = *w == Weight::Lebesgue;
    let mut draws = Vec::with_capacity(samples);
    let mut attempts = 0usize;
    while draws.len() < samples {
        attempts += 1;
        if attempts > 1000 * samples.max(16) {
            return Err(Error::Argument(format!(
                "quadrature of depth {} is too coarse to resolve doubling balls",
                quad.depth()
            )));
        }
        let u: f64 = rng.random();
        let rho = if draws.len() % 2 == 0 {
            u.sqrt()
        } else {
            1.0 - 10f64.powf(-3.0 * u)
        };
        let z = Complex64::from_polar(rho.min(1.0 - 1e-9), rng.random::<f64>() * TAU);
        let lo = if exact { 1e-3 } else { 4.0 * quad.local_scale(rho) };
        if lo >= 1.0 {
            continue;
        }
        let r = lo * (1.0 / lo).powf(rng.random::<f64>());
        if !exact && r < 4.0 * quad.local_scale((rho - r).max(0.0)) {
            continue;
        }
        draws.push((z, r));
    }
    let masses = if exact { Vec::new() } else { quad.cell_masses(w) };
    let ball = |z: Complex64, r: f64| -> f64 {
        if exact {
            disk_ball_area(z, r)
        } else {
            quad.cells()
                .iter()
                .zip(&masses)
                .filter(|(c, _)| (c.center - z).norm() < r)
                .map(|(_, m)| *m)
                .sum()
        }
    };
    let ratios: Vec<Result<f64>> = draws
        .par_iter()
        .map(|&(z, r)| {
            let inner = ball(z, r);
            if inner <= 0.0 {
                return Err(Error::DegenerateWeight(format!(
                    "ball at {z} of radius {r} has zero mass"
                )));
            }
            Ok(ball(z, 2.0 * r) / inner)
        })
        .collect();
    let mut best = (f64::NEG_INFINITY, Complex64::new(0.0, 0.0), 0.0);
    for (ratio, (z, r)) in ratios.into_iter().zip(&draws) {
        let ratio = ratio?;
        if ratio > best.0 {
            best = (ratio, *z, *r);
        }
    }
    Ok(DoublingReport {
        c_hat: best.0,
        worst_center: [best.1.re, best.1.im],
        worst_radius: best.2,
        samples,
        exact_areas: exact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    #[test]
    fn lebesgue_box_masses() {
        let half = CarlesonBox::full(Arc::new(0.3, 0.5).unwrap());
        assert!((box_mass(&Weight::Lebesgue, &half, None).unwrap() - 3.0 / 8.0).abs() < 1e-15);
        let all = CarlesonBox::full(Arc::full());
        assert_eq!(box_mass(&Weight::Lebesgue, &all, None).unwrap(), 1.0);
    }

    #[test]
    fn radial_power_box_masses() {
        let w = Weight::RadialPower(1.0);
        let q = box_mass(&w, &CarlesonBox::full(Arc::full()), None).unwrap();
        let b = box_mass(&w, &CarlesonBox::top_half(Arc::full()), None).unwrap();
        assert!((q - 1.0 / 3.0).abs() < 1e-15);
        // 2 ∫_{1/2}^1 (1 - r) r dr
        assert!((b - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn box_mass_needs_resolution() {
        let g = GridDensity::from_fn(8, 8, "g", |_, _| 1.0).unwrap();
        let w = Weight::sampled(g);
        let quad = build_quadrature(4, 8).unwrap();
        let fine = DyadicIndex::new(Grid::Standard, 6, 0).unwrap().full_box();
        assert!(matches!(box_mass(&w, &fine, Some(&quad)), Err(Error::Resolution { .. })));
        let ok = DyadicIndex::new(Grid::Standard, 3, 2).unwrap().full_box();
        assert!((box_mass(&w, &ok, Some(&quad)).unwrap() - ok.area()).abs() < 1e-14);
    }

    #[test]
    fn table_additivity() {
        let quad = DiskQuadrature::new(QuadratureSpec::new(8, 8).both_grids()).unwrap();
        let g = GridDensity::from_fn(16, 32, "bumpy", |r, t| 1.0 + r * (3.0 * t).sin().abs()).unwrap();
        let w = Weight::product(Weight::RadialPower(0.5), Weight::sampled(g));
        let masses = quad.cell_masses(&w);
        for grid in Grid::BOTH {
            let table = BoxMassTable::build(&w, grid, 8, Some(&quad)).unwrap();
            for (idx, m) in table.tree().iter().filter(|(i, _)| i.level < 8) {
                let top = table.top_half_mass(&idx).unwrap();
                let ring: f64 = quad
                    .cells()
                    .iter()
                    .zip(&masses)
                    .filter(|(c, _)| c.stratum == idx.level && idx.arc().contains_angle(c.angle))
                    .map(|(_, v)| *v)
                    .sum();
                assert!(top >= 0.0 && ring >= 0.0);
                assert!((m - (top + ring)).abs() <= 1e-12 * m, "{idx}");
            }
        }
    }

    #[test]
    fn lebesgue_reverse_doubling() {
        let r = reverse_doubling_report(&Weight::Lebesgue, 16, 1000, None, 1e-6, &mut rng()).unwrap();
        assert!((r.delta_hat - 0.75).abs() < 1e-12);
        assert_eq!(r.worst_index.unwrap().level, 0);
        assert!(r.verdict);
    }

    #[test]
    fn radial_power_reverse_doubling() {
        // (3 - l) / (12 - 8 l) increases from 1/4 to 1/2 on (0, 1]
        let oracle = |l: f64| (3.0 - l) / (12.0 - 8.0 * l);
        let r = reverse_doubling_report(&Weight::RadialPower(1.0), 12, 500, None, 1e-6, &mut rng()).unwrap();
        assert!((r.delta_hat - oracle(1.0)).abs() < 1e-12);
        assert!((r.delta_hat - 0.5).abs() < 1e-12);
        let w = Weight::RadialPower(1.0);
        let tiny = 2f64.powi(-30);
        let ratio = w.radial_mass(1.0 - tiny / 2.0, 1.0) / w.radial_mass(1.0 - tiny, 1.0);
        assert!((ratio - 0.25).abs() < 1e-6);
    }

    #[test]
    fn thin_shell_fails_reverse_doubling() {
        let eps = 1.0 / 64.0;
        let g = GridDensity::from_fn(128, 4, "shell", |r, _| if r >= 1.0 - eps { 1.0 } else { 0.0 }).unwrap();
        let w = Weight::sampled(g);
        let quad = DiskQuadrature::new(QuadratureSpec::new(9, 8).both_grids()).unwrap();
        let r = reverse_doubling_report(&w, 8, 50, Some(&quad), 1e-6, &mut rng()).unwrap();
        assert!(!r.verdict);
        assert!((r.delta_hat - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reverse_doubling_errors() {
        let quad = build_quadrature(4, 8).unwrap();
        let zero = Weight::sampled(GridDensity::empty("nothing"));
        assert!(matches!(
            reverse_doubling_report(&zero, 3, 0, Some(&quad), 1e-6, &mut rng()),
            Err(Error::DegenerateWeight(_))
        ));
        assert!(matches!(
            reverse_doubling_report(&Weight::RadialPower(-1.0), 3, 0, None, 1e-6, &mut rng()),
            Err(Error::InfiniteMass(_))
        ));
    }

    #[test]
    fn lens_area() {
        assert!((disk_ball_area(Complex64::new(0.2, 0.1), 0.3) - 0.09).abs() < 1e-15);
        assert_eq!(disk_ball_area(Complex64::new(0.5, 0.0), 2.0), 1.0);
        // two unit circles at distance 1
        let lens = (2.0 * PI / 3.0 - 3f64.sqrt() / 2.0) / PI;
        assert!((disk_ball_area(Complex64::new(1.0 - 1e-15, 0.0), 1.0) - lens).abs() < 1e-7);
        let inside = Complex64::new(0.1, -0.2);
        assert!((disk_ball_area(inside, 0.4) / disk_ball_area(inside, 0.2) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn lebesgue_doubling() {
        let quad = build_quadrature(4, 8).unwrap();
        let r = doubling_report(&Weight::Lebesgue, 4000, &quad, &mut rng()).unwrap();
        assert!(r.exact_areas);
        assert!(r.c_hat <= 4.0 + 1e-9, "{}", r.c_hat);
        assert!(r.c_hat > 3.9);
    }

    #[test]
    fn radial_power_doubling_is_finite() {
        let quad = build_quadrature(8, 32).unwrap();
        let r = doubling_report(&Weight::RadialPower(1.0), 200, &quad, &mut rng()).unwrap();
        assert!(r.c_hat.is_finite() && r.c_hat > 1.0);
    }

    #[test]
    fn doubling_rejects_a_coarse_quadrature() {
        let quad = build_quadrature(4, 4).unwrap();
        let err = doubling_report(&Weight::RadialPower(1.0), 16, &quad, &mut rng()).unwrap_err();
        assert!(err.to_string().contains("too coarse"), "{err}");
    }
}
