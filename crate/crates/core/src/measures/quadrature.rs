//! Polar quadrature on the disk aligned with the dyadic box structure.
//!
//! Stratum `k < J` is the annulus `[1 - 2^-k, 1 - 2^-(k+1))`, stratum `J`
//! is `[1 - 2^-J, 1)`. Stratum `k` is cut into `angular_base * 2^(max(k,1)-1)`
//! equal angular sectors, which is a multiple of `2^k`, so every level-`k`
//! box of the standard grid is a union of cells. With
//! [`Alignment::BothGrids`] the shifted-grid breakpoints are merged in as
//! well. Inner strata are also split radially into rings no wider than
//! `2^-(radial_level + 1)`.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::weight::Weight;
use crate::error::{Error, Result};
use crate::geometry::Grid;

pub const MAX_CELLS_ENV: &str = "CARLESON_LAB_MAX_CELLS";
pub const DEFAULT_MAX_CELLS: usize = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Alignment {
    /// Cells align with the standard grid only.
    Standard,
    /// Cells align with both the standard and the shifted grid.
    BothGrids,
}

impl Alignment {
    pub fn aligns(self, grid: Grid) -> bool {
        matches!((self, grid), (_, Grid::Standard) | (Alignment::BothGrids, Grid::Shifted))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub depth: u32,
    pub angular_base: u32,
    pub radial_level: u32,
    pub alignment: Alignment,
}

impl QuadratureSpec {
    /// Standard alignment with `radial_level = depth / 2`.
    pub fn new(depth: u32, angular_base: u32) -> Self {
        QuadratureSpec {
            depth,
            angular_base,
            radial_level: depth / 2,
            alignment: Alignment::Standard,
        }
    }

    pub fn both_grids(mut self) -> Self {
        self.alignment = Alignment::BothGrids;
        self
    }

    pub fn with_radial_level(mut self, level: u32) -> Self {
        self.radial_level = level;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.depth < 1 || self.depth > 40 {
            return Err(Error::Argument(format!("quadrature depth {} outside [1, 40]", self.depth)));
        }
        if self.angular_base < 4 || !self.angular_base.is_power_of_two() {
            return Err(Error::Argument(format!(
                "angular base {} must be a power of two >= 4",
                self.angular_base
            )));
        }
        if self.radial_level > 30 {
            return Err(Error::Argument(format!("radial level {} above 30", self.radial_level)));
        }
        Ok(())
    }

    pub fn sectors(&self, stratum: u32) -> u64 {
        self.angular_base as u64 * (1u64 << (stratum.max(1) - 1))
    }

    pub fn rings(&self, stratum: u32) -> u64 {
        1u64 << self.radial_level.saturating_sub(stratum)
    }

    pub fn cell_count(&self) -> usize {
        let per_sector = match self.alignment {
            Alignment::Standard => 1,
            Alignment::BothGrids => 2,
        };
        (0..=self.depth)
            .map(|k| (self.sectors(k) * self.rings(k) * per_sector) as usize)
            .sum()
    }

    pub fn stratum_radii(&self, stratum: u32) -> (f64, f64) {
        let inner = 1.0 - (-(stratum as f64)).exp2();
        let outer = if stratum == self.depth {
            1.0
        } else {
            1.0 - (-((stratum + 1) as f64)).exp2()
        };
        (inner, outer)
    }
}

/// One polar cell `[r0, r1) x [a0, a1)`; angles as fractions of the circle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub center: Complex64,
    pub angle: f64,
    pub area: f64,
    pub stratum: u32,
    pub r0: f64,
    pub r1: f64,
    pub a0: f64,
    pub a1: f64,
}

impl Cell {
    pub fn radius(&self) -> f64 {
        0.5 * (self.r0 + self.r1)
    }
}

#[derive(Debug, Clone)]
pub struct DiskQuadrature {
    spec: QuadratureSpec,
    cells: Vec<Cell>,
}

fn max_cells() -> usize {
    std::env::var(MAX_CELLS_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_MAX_CELLS)
}

/// Standard-aligned quadrature with the default radial refinement.
pub fn build_quadrature(depth: u32, angular_base: u32) -> Result<DiskQuadrature> {
    DiskQuadrature::new(QuadratureSpec::new(depth, angular_base))
}

impl DiskQuadrature {
    pub fn new(spec: QuadratureSpec) -> Result<Self> {
        Self::with_cap(spec, max_cells())
    }

    pub fn with_cap(spec: QuadratureSpec, cap: usize) -> Result<Self> {
        spec.validate()?;
        let count = spec.cell_count();
        if count > cap {
            return Err(Error::CellCap { cells: count, cap });
        }
        let mut cells = Vec::with_capacity(count);
        for k in 0..=spec.depth {
            let (inner, outer) = spec.stratum_radii(k);
            let rings = spec.rings(k);
            let breaks = angular_breaks(spec.sectors(k), spec.alignment);
            for ring in 0..rings {
                let r0 = inner + (outer - inner) * ring as f64 / rings as f64;
                let r1 = if ring + 1 == rings {
                    outer
                } else {
                    inner + (outer - inner) * (ring + 1) as f64 / rings as f64
                };
                let rm = 0.5 * (r0 + r1);
                for w in breaks.windows(2) {
                    let (a0, a1) = (w[0], w[1]);
                    let am = 0.5 * (a0 + a1);
                    cells.push(Cell {
                        center: Complex64::from_polar(rm, TAU * am),
                        angle: TAU * am,
                        area: (a1 - a0) * (r1 * r1 - r0 * r0),
                        stratum: k,
                        r0,
                        r1,
                        a0,
                        a1,
                    });
                }
            }
        }
        Ok(DiskQuadrature { spec, cells })
    }

    pub fn spec(&self) -> &QuadratureSpec {
        &self.spec
    }

    pub fn depth(&self) -> u32 {
        self.spec.depth
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn nodes(&self) -> impl Iterator<Item = Complex64> + '_ {
        self.cells.iter().map(|c| c.center)
    }

    pub fn areas(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.area).collect()
    }

    /// Mass of each cell under `w`. Radial factors are integrated exactly;
    /// sampled factors are evaluated at the cell center.
    pub fn cell_masses(&self, w: &Weight) -> Vec<f64> {
        let a = w.radial_exponent();
        let radial = w.is_radial();
        self.cells
            .iter()
            .map(|c| {
                let base = (c.a1 - c.a0) * super::weight::radial_power_mass(a, c.r0, c.r1);
                if radial {
                    base
                } else {
                    base * w.angular_factor(c.center)
                }
            })
            .collect()
    }

    /// Samples a function at the cell centers.
    pub fn sample<T>(&self, f: impl Fn(Complex64) -> T) -> Vec<T> {
        self.cells.iter().map(|c| f(c.center)).collect()
    }

    /// Largest cell diameter among cells meeting the radius `r`.
    pub fn local_scale(&self, r: f64) -> f64 {
        let k = (0..=self.spec.depth)
            .find(|&k| r < self.spec.stratum_radii(k).1)
            .unwrap_or(self.spec.depth);
        let (inner, outer) = self.spec.stratum_radii(k);
        let radial = (outer - inner) / self.spec.rings(k) as f64;
        let angular = TAU * outer / self.spec.sectors(k) as f64;
        radial.hypot(angular)
    }
}

fn angular_breaks(sectors: u64, alignment: Alignment) -> Vec<f64> {
    let mut b: Vec<f64> = (0..=sectors).map(|i| i as f64 / sectors as f64).collect();
    if alignment == Alignment::BothGrids {
        let step = 1.0 / sectors as f64;
        let first = (1.0 / 3.0) % step;
        b.extend((0..sectors).map(|i| first + i as f64 * step));
        b.sort_by(f64::total_cmp);
    }
    b
}
