//! Dyadic model operators, sparse domination and tree embeddings.
//!
//! `K^β_α f(z) = Σ_{Q ∋ z} area(Q)^(-α/2) ∫_Q f dA` sums over the Carleson
//! boxes of one grid. Box integrals come from a single bottom-up pass over
//! the quadrature cells and the per-node sums from a top-down pass, so an
//! application costs `O(cells)`.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{angle_of, bridge_box, Arc, CarlesonBox, DyadicIndex, Grid};
use crate::measures::{box_mass, dual_weight, BoxMassTable, BoxTree, DiskQuadrature, QuadratureSpec, Weight};
use crate::operators::{power_norm, NormEstimate, PowerOptions};

/// Exponents of a two-weight inequality `L^p(μ) → L^q(ν)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentConfig {
    pub p: f64,
    pub q: f64,
    pub alpha: f64,
}

impl ExponentConfig {
    pub fn new(p: f64, q: f64, alpha: f64) -> Result<Self> {
        if !(p > 1.0 && p <= q && q.is_finite()) {
            return Err(Error::Argument(format!("exponents need 1 < p <= q < ∞, got p = {p}, q = {q}")));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Argument(format!("alpha = {alpha} must be positive")));
        }
        Ok(ExponentConfig { p, q, alpha })
    }

    pub fn p_prime(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    pub fn q_prime(&self) -> f64 {
        self.q / (self.q - 1.0)
    }

    pub fn t(&self) -> f64 {
        self.q / self.p
    }
}

/// A value per box of one grid, levels `0..=depth`.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeFunction {
    tree: BoxTree,
}

impl TreeFunction {
    pub fn grid(&self) -> Grid {
        self.tree.grid()
    }

    pub fn depth(&self) -> u32 {
        self.tree.depth()
    }

    pub fn get(&self, idx: &DyadicIndex) -> f64 {
        self.tree.get(idx)
    }

    pub fn iter(&self) -> impl Iterator<Item = (DyadicIndex, f64)> + '_ {
        self.tree.iter()
    }
}

/// Normalized area of a level-`j` box, `ℓ²(2 - ℓ)` with `ℓ = 2^-j`.
pub fn level_area(j: u32) -> f64 {
    let l = (-(j as f64)).exp2();
    l * l * (2.0 - l)
}

/// Deepest level whose boxes can contain a point at radius `r`.
fn radial_level(r: f64) -> u32 {
    if r <= 0.0 {
        return 0;
    }
    let s = 1.0 - r;
    if s <= 0.0 {
        return u32::MAX;
    }
    let mut k = (-s.log2()).floor().max(0.0) as u32;
    // correct floating error at exact powers of two
    while k > 0 && 1.0 - (-(k as f64)).exp2() > r {
        k -= 1;
    }
    while 1.0 - (-((k + 1) as f64)).exp2() <= r {
        k += 1;
    }
    k
}

/// Cumulative sums `acc[j][m] = Σ_{i <= j} area_i^(-α/2) I[i][ancestor]`.
fn accumulate(integrals: &BoxTree, alpha: f64) -> Vec<Vec<f64>> {
    let depth = integrals.depth();
    let mut acc: Vec<Vec<f64>> = Vec::with_capacity(depth as usize + 1);
    for j in 0..=depth {
        let scale = level_area(j).powf(-0.5 * alpha);
        let row: Vec<f64> = integrals
            .level(j)
            .iter()
            .enumerate()
            .map(|(m, v)| scale * v + if j == 0 { 0.0 } else { acc[j as usize - 1][m / 2] })
            .collect();
        acc.push(row);
    }
    acc
}

fn check_depth(depth: u32, quad: &DiskQuadrature) -> Result<()> {
    if depth > quad.depth() {
        return Err(Error::Resolution {
            level: depth,
            depth: quad.depth(),
        });
    }
    Ok(())
}

/// `K^β_α f` at every quadrature node.
pub fn dyadic_apply(grid: Grid, alpha: f64, f: &[f64], quad: &DiskQuadrature, depth: u32) -> Result<Vec<f64>> {
    check_depth(depth, quad)?;
    let weighted: Vec<f64> = quad.cells().iter().zip(f).map(|(c, v)| v * c.area).collect();
    let acc = accumulate(&BoxTree::from_cells(quad, grid, depth, &weighted)?, alpha);
    Ok(quad
        .cells()
        .iter()
        .map(|c| {
            let k = c.stratum.min(depth);
            acc[k as usize][DyadicIndex::containing(grid, k, c.angle).position as usize]
        })
        .collect())
}

/// `K^β_α f` at arbitrary points of the disk.
pub fn dyadic_apply_at(
    grid: Grid,
    alpha: f64,
    f: &[f64],
    quad: &DiskQuadrature,
    depth: u32,
    points: &[Complex64],
) -> Result<Vec<f64>> {
    check_depth(depth, quad)?;
    let weighted: Vec<f64> = quad.cells().iter().zip(f).map(|(c, v)| v * c.area).collect();
    let acc = accumulate(&BoxTree::from_cells(quad, grid, depth, &weighted)?, alpha);
    Ok(points
        .iter()
        .map(|z| {
            let k = radial_level(z.norm()).min(depth);
            acc[k as usize][DyadicIndex::containing(grid, k, angle_of(*z)).position as usize]
        })
        .collect())
}

/// `K_α f(z) = ∫ f(w) / |1 - z w̄|^α dA(w)` at each point.
pub fn kernel_abs_apply(alpha: f64, f: &[f64], quad: &DiskQuadrature, points: &[Complex64]) -> Vec<f64> {
    let weighted: Vec<(Complex64, f64)> = quad
        .cells()
        .iter()
        .zip(f)
        .map(|(c, v)| (c.center.conj(), v * c.area))
        .collect();
    points
        .par_iter()
        .map(|&z| {
            weighted
                .iter()
                .map(|&(wc, v)| v * (Complex64::new(1.0, 0.0) - z * wc).norm().powf(-alpha))
                .sum()
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct DominationReport {
    pub alpha: f64,
    pub c_hat: f64,
    pub failures: usize,
    pub samples: usize,
    pub worst_pair: [[f64; 2]; 2],
    pub worst_box: Option<DyadicIndex>,
}

/// Constant needed for one pair, using the bridging box or, when that lies
/// below `depth`, its level-`depth` ancestor. The flag marks the second case.
fn pair_constant(alpha: f64, z: Complex64, w: Complex64, depth: u32) -> Result<(f64, DyadicIndex, bool)> {
    let bridge = bridge_box(z, w)?;
    let mut idx = bridge.index;
    let deep = idx.level > depth;
    while idx.level > depth {
        idx = idx.parent().expect("level above zero has a parent");
    }
    let dist = (Complex64::new(1.0, 0.0) - z * w.conj()).norm();
    Ok(((level_area(idx.level).sqrt() / dist).powf(alpha), idx, deep))
}

/// Samples pairs in the disk and measures the smallest `c` with
/// `|1 - z w̄|^(-α) <= c area(Q_L)^(-α/2)` for the box `Q_L` bridging each pair.
pub fn domination_check<R: Rng + ?Sized>(alpha: f64, samples: usize, depth: u32, rng: &mut R) -> Result<DominationReport> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Argument(format!("alpha = {alpha} must be positive")));
    }
    domination_over_pairs(alpha, &domination_pairs(samples, depth, rng), depth)
}

/// Test pairs for [`domination_check`]. Half are uniform in area. The other
/// half sit at distance `s` from the circle, `s` log-uniform in
/// `[2^-depth, 1]`, next to a second point at a comparable scale, which
/// exercises the deep boxes.
pub fn domination_pairs<R: Rng + ?Sized>(samples: usize, depth: u32, rng: &mut R) -> Vec<(Complex64, Complex64)> {
    (0..samples)
        .map(|i| {
            if i % 2 == 0 {
                let mut uniform = || Complex64::from_polar(rng.random::<f64>().sqrt(), TAU * rng.random::<f64>());
                (uniform(), uniform())
            } else {
                let s = (-(depth as f64) * rng.random::<f64>()).exp2();
                let theta = TAU * rng.random::<f64>();
                let sw = (s * (2.0 * rng.random::<f64>()).exp2()).min(1.0);
                let gap = s * (4.0 * rng.random::<f64>()).exp2();
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                (
                    Complex64::from_polar(1.0 - s, theta),
                    Complex64::from_polar(1.0 - sw, theta + sign * TAU * gap.min(0.5)),
                )
            }
        })
        .collect()
}

/// The domination constant over an explicit list of pairs.
pub fn domination_over_pairs(alpha: f64, pairs: &[(Complex64, Complex64)], depth: u32) -> Result<DominationReport> {
    let results: Vec<Result<(f64, DyadicIndex, bool)>> = pairs
        .par_iter()
        .map(|&(z, w)| pair_constant(alpha, z, w, depth))
        .collect();
    let mut report = DominationReport {
        alpha,
        c_hat: 0.0,
        failures: 0,
        samples: pairs.len(),
        worst_pair: [[0.0; 2]; 2],
        worst_box: None,
    };
    for (r, (z, w)) in results.into_iter().zip(pairs) {
        let (c, idx, deep) = r?;
        if deep {
            report.failures += 1;
        }
        if c > report.c_hat {
            report.c_hat = c;
            report.worst_pair = [[z.re, z.im], [w.re, w.im]];
            report.worst_box = Some(idx);
        }
    }
    Ok(report)
}

/// Box means `E^σ_Q f = ∫_Q f σ / σ(Q)` for every box of one grid.
pub fn expectation_tree(
    w: &Weight,
    f: &[f64],
    grid: Grid,
    depth: u32,
    quad: &DiskQuadrature,
) -> Result<(TreeFunction, TreeFunction)> {
    check_depth(depth, quad)?;
    if !w.is_finite() {
        return Err(Error::InfiniteMass(w.to_string()));
    }
    let masses = quad.cell_masses(w);
    let fm: Vec<f64> = f.iter().zip(&masses).map(|(a, b)| a * b).collect();
    let mass_tree = BoxTree::from_cells(quad, grid, depth, &masses)?;
    let int_tree = BoxTree::from_cells(quad, grid, depth, &fm)?;
    let mut per_level = Vec::with_capacity(depth as usize + 1);
    for j in 0..=depth {
        let row: Result<Vec<f64>> = mass_tree
            .level(j)
            .iter()
            .zip(int_tree.level(j))
            .enumerate()
            .map(|(m, (mass, int))| {
                if *mass <= 0.0 {
                    return Err(Error::DegenerateWeight(format!("box ({grid}, {j}, {m}) has zero mass")));
                }
                Ok(int / mass)
            })
            .collect();
        per_level.push(row?);
    }
    Ok((
        TreeFunction {
            tree: BoxTree::from_rows(grid, per_level),
        },
        TreeFunction { tree: mass_tree },
    ))
}

/// `E^σ_Q f` for one box, summed over the cells whose centers lie in it.
pub fn tree_expectation(w: &Weight, f: &[f64], index: &DyadicIndex, quad: &DiskQuadrature) -> Result<f64> {
    check_depth(index.level, quad)?;
    let b = index.full_box();
    let masses = quad.cell_masses(w);
    let (mut mass, mut int) = (0.0, 0.0);
    for ((c, m), v) in quad.cells().iter().zip(&masses).zip(f) {
        if b.contains(c.center) {
            mass += m;
            int += v * m;
        }
    }
    if mass <= 0.0 {
        return Err(Error::DegenerateWeight(format!("box {index} has zero mass")));
    }
    Ok(int / mass)
}

#[derive(Debug, Clone, Serialize)]
pub struct EmbeddingReport {
    pub c1_hat: f64,
    pub worst_box: DyadicIndex,
    /// Estimated relative contribution of levels below `depth` at the worst box.
    pub tail_estimate: f64,
    pub per_grid: [f64; 2],
}

/// `max_K Σ_{Q ⊆ Q_K} σ(Q)^t / σ(Q_K)^t` over boxes `K` of level at most
/// `depth / 2`, sums truncated at `depth`.
pub fn carleson_embedding_constant(
    w: &Weight,
    t: f64,
    depth: u32,
    quad: Option<&DiskQuadrature>,
) -> Result<EmbeddingReport> {
    if !(t >= 1.0 && t.is_finite()) {
        return Err(Error::Argument(format!("t = {t} must be at least 1")));
    }
    let mut best: Option<(f64, DyadicIndex, f64)> = None;
    let mut per_grid = [0.0; 2];
    for (g, grid) in Grid::BOTH.into_iter().enumerate() {
        let table = BoxMassTable::build(w, grid, depth, quad)?;
        let tree = table.tree();
        // sums[j][m] over descendants of all levels; last[j][m] over the deepest level only
        let mut sums: Vec<f64> = tree.level(depth).iter().map(|m| m.powf(t)).collect();
        let mut last = sums.clone();
        let mut prev = vec![0.0; sums.len()];
        for j in (0..=depth).rev() {
            if j < depth {
                let masses = tree.level(j);
                let next_sums: Vec<f64> = (0..masses.len())
                    .map(|m| masses[m].powf(t) + sums[2 * m] + sums[2 * m + 1])
                    .collect();
                let next_last: Vec<f64> = (0..masses.len()).map(|m| last[2 * m] + last[2 * m + 1]).collect();
                let next_prev: Vec<f64> = (0..masses.len())
                    .map(|m| {
                        if j + 1 == depth {
                            masses[m].powf(t)
                        } else {
                            prev[2 * m] + prev[2 * m + 1]
                        }
                    })
                    .collect();
                sums = next_sums;
                last = next_last;
                prev = next_prev;
            }
            if j > depth / 2 {
                continue;
            }
            for (m, mass) in tree.level(j).iter().enumerate() {
                let idx = DyadicIndex {
                    grid,
                    level: j,
                    position: m as u64,
                };
                if *mass <= 0.0 {
                    return Err(Error::DegenerateWeight(format!("box {idx} has zero mass")));
                }
                let ratio = sums[m] / mass.powf(t);
                per_grid[g] = f64::max(per_grid[g], ratio);
                // geometric tail from the decay between the last two levels
                let tail = if j < depth && prev[m] > 0.0 {
                    let rho = last[m] / prev[m];
                    if rho < 1.0 {
                        last[m] * rho / (1.0 - rho) / sums[m]
                    } else {
                        f64::INFINITY
                    }
                } else {
                    0.0
                };
                if best.as_ref().is_none_or(|(r, _, _)| ratio > *r) {
                    best = Some((ratio, idx, tail));
                }
            }
        }
    }
    let (c1_hat, worst_box, tail_estimate) = best.expect("level 0 is always present");
    Ok(EmbeddingReport {
        c1_hat,
        worst_box,
        tail_estimate,
        per_grid,
    })
}

fn check_nonnegative(f: &[f64]) -> Result<()> {
    if f.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::Argument("function must be finite and nonnegative".into()));
    }
    Ok(())
}

/// `sup_λ λ (Σ_{E^σ_Q f > λ} σ(Q)^t)^(1/t)`, the largest value over both grids.
///
/// The supremum over `λ` is approached from below each attained value `v`,
/// where the level set is `{E >= v}`.
pub fn weak_type_norm(w: &Weight, t: f64, f: &[f64], depth: u32, quad: &DiskQuadrature) -> Result<f64> {
    check_nonnegative(f)?;
    if !(t >= 1.0) {
        return Err(Error::Argument(format!("t = {t} must be at least 1")));
    }
    let mut best = 0.0f64;
    for grid in Grid::BOTH {
        let (e, m) = expectation_tree(w, f, grid, depth, quad)?;
        let mut pairs: Vec<(f64, f64)> = e.iter().zip(m.iter()).map(|((_, e), (_, m))| (e, m.powf(t))).collect();
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut cumulative = 0.0;
        let mut i = 0;
        while i < pairs.len() {
            let v = pairs[i].0;
            while i < pairs.len() && pairs[i].0 == v {
                cumulative += pairs[i].1;
                i += 1;
            }
            best = best.max(v * cumulative.powf(1.0 / t));
        }
    }
    Ok(best)
}

/// `(Σ_Q σ(Q)^t (E^σ_Q f)^q)^(1/q) / (∫ f^p σ)^(1/p)`, the largest value over
/// both grids; 0 for `f = 0`.
pub fn strong_embedding_check(
    w: &Weight,
    cfg: &ExponentConfig,
    f: &[f64],
    depth: u32,
    quad: &DiskQuadrature,
) -> Result<f64> {
    check_nonnegative(f)?;
    let masses = quad.cell_masses(w);
    let norm = f
        .iter()
        .zip(&masses)
        .map(|(v, m)| v.powf(cfg.p) * m)
        .sum::<f64>()
        .powf(1.0 / cfg.p);
    if norm == 0.0 {
        return Ok(0.0);
    }
    let t = cfg.t();
    let mut best = 0.0f64;
    for grid in Grid::BOTH {
        let (e, m) = expectation_tree(w, f, grid, depth, quad)?;
        let left: f64 = e.iter().zip(m.iter()).map(|((_, e), (_, m))| m.powf(t) * e.powf(cfg.q)).sum();
        best = best.max(left.powf(1.0 / cfg.q) / norm);
    }
    Ok(best)
}

#[derive(Debug, Clone, Serialize)]
pub struct TestingReport {
    pub sup_value: f64,
    pub worst_box: Option<DyadicIndex>,
    pub worst_arc: Arc,
    pub per_grid: [f64; 2],
    pub random_arcs: usize,
}

/// `sup_Q ν(Q)^(1/q) σ(Q)^(1/p') / area(Q)^(α/2)` with `σ = μ^(1-p')`, over
/// every box of both grids up to `depth` and `random_arcs` random arcs.
pub fn two_weight_testing_constant<R: Rng + ?Sized>(
    nu: &Weight,
    mu: &Weight,
    cfg: &ExponentConfig,
    depth: u32,
    quad: Option<&DiskQuadrature>,
    random_arcs: usize,
    rng: &mut R,
) -> Result<TestingReport> {
    let sigma = dual_weight(mu, cfg.p)?;
    if !sigma.is_finite() {
        return Err(Error::InfiniteMass(format!("dual weight {sigma} of {mu}")));
    }
    let (aq, ap) = (1.0 / cfg.q, 1.0 / cfg.p_prime());
    let ratio = |n: f64, s: f64, area: f64| n.powf(aq) * s.powf(ap) / area.powf(0.5 * cfg.alpha);
    let mut report = TestingReport {
        sup_value: f64::NEG_INFINITY,
        worst_box: None,
        worst_arc: Arc::full(),
        per_grid: [f64::NEG_INFINITY; 2],
        random_arcs,
    };
    for (g, grid) in Grid::BOTH.into_iter().enumerate() {
        let nt = BoxMassTable::build(nu, grid, depth, quad)?;
        let st = BoxMassTable::build(&sigma, grid, depth, quad)?;
        for ((idx, n), (_, s)) in nt.tree().iter().zip(st.tree().iter()) {
            let r = ratio(n, s, level_area(idx.level));
            report.per_grid[g] = report.per_grid[g].max(r);
            if r > report.sup_value {
                report.sup_value = r;
                report.worst_box = Some(idx);
                report.worst_arc = idx.arc();
            }
        }
    }
    let floor = (-(depth as f64)).exp2();
    for _ in 0..random_arcs {
        let start = TAU * rng.random::<f64>();
        let l = floor.powf(rng.random::<f64>());
        let arc = Arc::new(start, l)?;
        let b = CarlesonBox::full(arc);
        let r = ratio(box_mass(nu, &b, quad)?, box_mass(&sigma, &b, quad)?, b.area());
        if r > report.sup_value {
            report.sup_value = r;
            report.worst_box = None;
            report.worst_arc = arc;
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct NormLevel {
    pub depth: u32,
    pub cells: usize,
    pub dense: NormEstimate,
    pub dyadic: [NormEstimate; 2],
}

#[derive(Debug, Clone, Serialize)]
pub struct TwoWeightNormReport {
    pub levels: Vec<NormLevel>,
    /// True when the estimates are sampled lower bounds (`p != q`).
    pub lower_bound: bool,
    pub verdict: bool,
}

/// Relative change between the last two entries is within `tol`.
pub fn stabilized(values: &[f64], tol: f64) -> bool {
    match values {
        [.., a, b] => {
            let scale = a.abs().max(b.abs());
            scale == 0.0 || (a - b).abs() <= tol * scale
        }
        _ => false,
    }
}

/// Measured norms of `K_α` (analytic kernel `(1 - z w̄)^-α`, dense) and of
/// both dyadic models `K^β_α` as maps `L^p(μ) → L^q(ν)` on successive
/// quadratures.
///
/// For `p = q = 2` the norms come from power iteration. Otherwise the best
/// ratio over `samples` random functions is reported as a lower bound.
#[allow(clippy::too_many_arguments)]
pub fn two_weight_norm_check(
    nu: &Weight,
    mu: &Weight,
    cfg: &ExponentConfig,
    depths: &[u32],
    angular_base: u32,
    samples: usize,
    seed: u64,
) -> Result<TwoWeightNormReport> {
    if !nu.is_finite() {
        return Err(Error::InfiniteMass(nu.to_string()));
    }
    if !mu.is_strictly_positive() {
        return Err(Error::Domain(format!("`{mu}` must be positive on the domain side")));
    }
    let hilbert = cfg.p == 2.0 && cfg.q == 2.0;
    let mut levels = Vec::with_capacity(depths.len());
    for &d in depths {
        let quad = DiskQuadrature::new(QuadratureSpec::new(d, angular_base))?;
        let op = DiscretizedPair::new(nu, mu, &quad, cfg.alpha);
        let opts = PowerOptions {
            tol: 1e-7,
            max_iter: 2000,
            seed,
        };
        let estimate = |which: Option<Grid>| -> Result<NormEstimate> {
            if hilbert {
                Ok(power_norm(op.dim(), |v| op.apply(which, v), |v| op.adjoint(which, v), opts))
            } else {
                op.sampled_norm(which, cfg, samples, seed)
            }
        };
        levels.push(NormLevel {
            depth: d,
            cells: quad.len(),
            dense: estimate(None)?,
            dyadic: [estimate(Some(Grid::Standard))?, estimate(Some(Grid::Shifted))?],
        });
    }
    let dense: Vec<f64> = levels.iter().map(|l| l.dense.value).collect();
    let dyadic: Vec<f64> = levels.iter().map(|l| l.dyadic[0].value + l.dyadic[1].value).collect();
    Ok(TwoWeightNormReport {
        verdict: stabilized(&dense, 0.05) && stabilized(&dyadic, 0.05),
        lower_bound: !hilbert,
        levels,
    })
}

/// `K_α` and `K^β_α` from `L²(μ)` to `L²(ν)` in the coordinates `g = μ^(1/2) f`.
struct DiscretizedPair<'a> {
    quad: &'a DiskQuadrature,
    alpha: f64,
    nu: Vec<f64>,
    mu: Vec<f64>,
    areas: Vec<f64>,
}

impl<'a> DiscretizedPair<'a> {
    fn new(nu: &Weight, mu: &Weight, quad: &'a DiskQuadrature, alpha: f64) -> Self {
        DiscretizedPair {
            quad,
            alpha,
            nu: quad.cell_masses(nu),
            mu: quad.cell_masses(mu),
            areas: quad.areas(),
        }
    }

    fn dim(&self) -> usize {
        self.areas.len()
    }

    /// `K f` at the nodes for `f` given at the nodes.
    fn kernel(&self, which: Option<Grid>, f: &[Complex64]) -> Vec<Complex64> {
        match which {
            None => crate::operators::apply_k_alpha_at(
                self.alpha,
                f,
                self.quad,
                &self.quad.nodes().collect::<Vec<_>>(),
            ),
            Some(grid) => {
                let re: Vec<f64> = f.iter().map(|v| v.re).collect();
                let im: Vec<f64> = f.iter().map(|v| v.im).collect();
                let d = self.quad.depth();
                let a = dyadic_apply(grid, self.alpha, &re, self.quad, d).expect("depth fits");
                let b = dyadic_apply(grid, self.alpha, &im, self.quad, d).expect("depth fits");
                a.into_iter().zip(b).map(|(x, y)| Complex64::new(x, y)).collect()
            }
        }
    }

    /// `g ↦ ν^(1/2) K (μ^(-1/2) g)`
    fn apply(&self, which: Option<Grid>, g: &[Complex64]) -> Vec<Complex64> {
        let f: Vec<Complex64> = g.iter().zip(&self.mu).map(|(v, m)| v / m.sqrt()).collect();
        self.kernel(which, &f)
            .into_iter()
            .zip(&self.nu)
            .map(|(v, n)| v * n.sqrt())
            .collect()
    }

    /// Adjoint of [`Self::apply`]; both kernels are hermitian against area.
    fn adjoint(&self, which: Option<Grid>, h: &[Complex64]) -> Vec<Complex64> {
        let f: Vec<Complex64> = h
            .iter()
            .zip(&self.nu)
            .zip(&self.areas)
            .map(|((v, n), a)| v * n.sqrt() / a)
            .collect();
        self.kernel(which, &f)
            .into_iter()
            .zip(self.mu.iter().zip(&self.areas))
            .map(|(v, (m, a))| v * a / m.sqrt())
            .collect()
    }

    /// Best `‖K f‖_{L^q(ν)} / ‖f‖_{L^p(μ)}` over random nonnegative `f`.
    fn sampled_norm(&self, which: Option<Grid>, cfg: &ExponentConfig, samples: usize, seed: u64) -> Result<NormEstimate> {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut best = 0.0f64;
        for s in 0..samples.max(1) {
            let f: Vec<Complex64> = if s == 0 {
                vec![Complex64::new(1.0, 0.0); self.dim()]
            } else {
                (0..self.dim()).map(|_| Complex64::new(rng.random::<f64>(), 0.0)).collect()
            };
            let norm_in: f64 = f
                .iter()
                .zip(&self.mu)
                .map(|(v, m)| v.norm().powf(cfg.p) * m)
                .sum::<f64>()
                .powf(1.0 / cfg.p);
            let kf = self.kernel(which, &f);
            let norm_out: f64 = kf
                .iter()
                .zip(&self.nu)
                .map(|(v, n)| v.norm().powf(cfg.q) * n)
                .sum::<f64>()
                .powf(1.0 / cfg.q);
            if norm_in > 0.0 {
                best = best.max(norm_out / norm_in);
            }
        }
        Ok(NormEstimate {
            value: best,
            iterations: samples.max(1),
            residual: f64::NAN,
            converged: true,
        })
    }
}

/// A seeded nonnegative test function on the quadrature nodes. The family
/// cycles with `draw`: cubed uniform noise, the indicator of a random box of
/// either grid, and a Gaussian bump.
pub fn random_nonnegative<R: Rng + ?Sized>(quad: &DiskQuadrature, draw: usize, rng: &mut R) -> Vec<f64> {
    match draw % 3 {
        0 => (0..quad.len()).map(|_| rng.random::<f64>().powi(3)).collect(),
        1 => {
            let grid = if rng.random::<bool>() { Grid::Standard } else { Grid::Shifted };
            let level = rng.random_range(0..=quad.depth().min(8));
            let idx = DyadicIndex::containing(grid, level, TAU * rng.random::<f64>());
            let b = idx.full_box();
            quad.sample(|z| if b.contains(z) { 1.0 } else { 0.0 })
        }
        _ => {
            let center = Complex64::from_polar(rng.random::<f64>().sqrt(), TAU * rng.random::<f64>());
            let width = 0.02 + 0.5 * rng.random::<f64>();
            quad.sample(|z| (-(z - center).norm_sqr() / (width * width)).exp())
        }
    }
}

/// Dense `K^β_α` on the nodes, `[i][j] = Σ_{Q ∋ z_i, z_j} area(Q)^(-α/2) area_j`,
/// for checking the fast path on small quadratures.
pub fn dyadic_dense_apply(grid: Grid, alpha: f64, f: &[f64], quad: &DiskQuadrature, depth: u32) -> Vec<f64> {
    let boxes: Vec<CarlesonBox> = (0..=depth)
        .flat_map(|j| (0..1u64 << j).map(move |m| DyadicIndex { grid, level: j, position: m }.full_box()))
        .collect();
    let cells = quad.cells();
    let mut out = vec![0.0; cells.len()];
    for b in &boxes {
        let scale = b.area().powf(-0.5 * alpha);
        let integral: f64 = cells
            .iter()
            .zip(f)
            .filter(|(c, _)| b.contains(c.center))
            .map(|(c, v)| v * c.area)
            .sum();
        for (o, c) in out.iter_mut().zip(cells) {
            if b.contains(c.center) {
                *o += scale * integral;
            }
        }
    }
    out
}

/// Largest `K_α f / (K⁰_α f + K^{1/3}_α f)` over the nodes.
pub fn pointwise_domination_ratio(alpha: f64, f: &[f64], quad: &DiskQuadrature, depth: u32) -> Result<f64> {
    let nodes: Vec<Complex64> = quad.nodes().collect();
    let k = kernel_abs_apply(alpha, f, quad, &nodes);
    let a = dyadic_apply(Grid::Standard, alpha, f, quad, depth)?;
    let b = dyadic_apply(Grid::Shifted, alpha, f, quad, depth)?;
    Ok(k.iter()
        .zip(a.iter().zip(&b))
        .filter(|(kv, _)| **kv > 0.0)
        .map(|(kv, (x, y))| kv / (x + y))
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::build_quadrature;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn exponent_config() {
        let e = ExponentConfig::new(2.0, 4.0, 1.0).unwrap();
        assert_eq!((e.p_prime(), e.q_prime(), e.t()), (2.0, 4.0 / 3.0, 2.0));
        assert!(ExponentConfig::new(3.0, 2.0, 1.0).is_err());
        assert!(ExponentConfig::new(1.0, 2.0, 1.0).is_err());
        assert!(ExponentConfig::new(2.0, 2.0, 0.0).is_err());
    }

    #[test]
    fn radial_levels() {
        assert_eq!(radial_level(0.0), 0);
        assert_eq!(radial_level(0.49), 0);
        assert_eq!(radial_level(0.5), 1);
        assert_eq!(radial_level(0.75), 2);
        assert_eq!(radial_level(0.8), 2);
    }

    #[test]
    fn apply_on_constants() {
        let quad = build_quadrature(8, 8).unwrap();
        let ones = vec![1.0; quad.len()];
        let v = dyadic_apply_at(Grid::Standard, 2.0, &ones, &quad, 8, &[c(0.75, 0.0), c(0.0, 0.0)]).unwrap();
        assert!((v[0] - 3.0).abs() < 1e-12, "{}", v[0]);
        assert!((v[1] - 1.0).abs() < 1e-12);
        let v = dyadic_apply_at(Grid::Standard, 1.0, &ones, &quad, 8, &[c(0.0, 0.0)]).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-12);
        assert!(matches!(
            dyadic_apply(Grid::Standard, 1.0, &ones, &quad, 9),
            Err(Error::Resolution { .. })
        ));
    }

    #[test]
    fn fast_apply_matches_double_loop() {
        let quad = DiskQuadrature::new(QuadratureSpec::new(6, 8).both_grids()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f: Vec<f64> = (0..quad.len()).map(|_| rng.random()).collect();
        for grid in Grid::BOTH {
            for depth in [3, 6] {
                let fast = dyadic_apply(grid, 1.5, &f, &quad, depth).unwrap();
                let slow = dyadic_dense_apply(grid, 1.5, &f, &quad, depth);
                for (a, b) in fast.iter().zip(&slow) {
                    assert!((a - b).abs() <= 1e-12 * b.abs(), "{a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn domination_examples() {
        let r = domination_over_pairs(1.0, &[(c(0.0, 0.0), c(0.0, 0.0))], 8).unwrap();
        assert!((r.c_hat - 1.0).abs() < 1e-12);
        let r = domination_over_pairs(1.0, &[(c(0.9, 0.0), c(-0.9, 0.0))], 8).unwrap();
        assert!((r.c_hat - 1.0 / 1.81).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let r = domination_check(1.0, 2000, 16, &mut rng).unwrap();
        assert_eq!(r.failures, 0);
        assert!(r.c_hat.is_finite() && r.c_hat > 1.0);
    }

    #[test]
    fn expectations() {
        let quad = build_quadrature(8, 8).unwrap();
        let ones = vec![1.0; quad.len()];
        let idx = DyadicIndex::new(Grid::Standard, 2, 1).unwrap();
        for w in [Weight::Lebesgue, Weight::RadialPower(1.0)] {
            assert!((tree_expectation(&w, &ones, &idx, &quad).unwrap() - 1.0).abs() < 1e-14);
        }
        let top = idx.top_half();
        let ind = quad.sample(|z| if top.contains(z) { 1.0 } else { 0.0 });
        let l = idx.len();
        let e = tree_expectation(&Weight::Lebesgue, &ind, &idx, &quad).unwrap();
        assert!((e - (1.0 - l / 4.0) / (2.0 - l)).abs() < 1e-12);
        let (e, _) = expectation_tree(&Weight::Lebesgue, &ind, Grid::Standard, 8, &quad).unwrap();
        assert!((e.get(&idx) - (1.0 - l / 4.0) / (2.0 - l)).abs() < 1e-12);
    }

    #[test]
    fn embedding_lebesgue() {
        let r = carleson_embedding_constant(&Weight::Lebesgue, 1.0, 14, None).unwrap();
        assert!((r.c1_hat - 8.0 / 3.0).abs() < 1e-3, "{}", r.c1_hat);
        assert_eq!(r.worst_box.level, 0);
        assert!(r.tail_estimate < 1e-3);
        // deep boxes approach the small-box limit 2 when not truncated
        let closed = |l: f64| (4.0 - 4.0 * l / 3.0) / (2.0 - l);
        assert!((closed(1e-9) - 2.0).abs() < 1e-8);
    }

    #[test]
    fn weak_norm_trivial() {
        let quad = build_quadrature(6, 8).unwrap();
        let zeros = vec![0.0; quad.len()];
        assert_eq!(weak_type_norm(&Weight::Lebesgue, 1.0, &zeros, 6, &quad).unwrap(), 0.0);
        let ones = vec![1.0; quad.len()];
        let v = weak_type_norm(&Weight::Lebesgue, 1.0, &ones, 6, &quad).unwrap();
        let sum: f64 = (0..=6).map(|j| (1u64 << j) as f64 * level_area(j)).sum();
        assert!((v - sum).abs() < 1e-9, "{v} vs {sum}");
    }

    #[test]
    fn strong_lebesgue_constant() {
        let quad = build_quadrature(10, 8).unwrap();
        let cfg = ExponentConfig::new(2.0, 2.0, 1.0).unwrap();
        let ones = vec![1.0; quad.len()];
        let v = strong_embedding_check(&Weight::Lebesgue, &cfg, &ones, 10, &quad).unwrap();
        assert!((v - (8.0f64 / 3.0).sqrt()).abs() < 2e-3, "{v}");
        let zeros = vec![0.0; quad.len()];
        assert_eq!(strong_embedding_check(&Weight::Lebesgue, &cfg, &zeros, 10, &quad).unwrap(), 0.0);
    }

    #[test]
    fn testing_constant_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = ExponentConfig::new(2.0, 2.0, 1.0).unwrap();
        let r = two_weight_testing_constant(&Weight::RadialPower(1.0), &Weight::Lebesgue, &cfg, 10, None, 64, &mut rng).unwrap();
        assert!((r.sup_value - (1.0f64 / 3.0).sqrt()).abs() < 1e-12);
        let cfg = ExponentConfig::new(2.0, 2.0, 2.0).unwrap();
        let r = two_weight_testing_constant(&Weight::Lebesgue, &Weight::Lebesgue, &cfg, 10, None, 64, &mut rng).unwrap();
        assert!((r.sup_value - 1.0).abs() < 1e-12);
        assert!((r.per_grid[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_nu_has_zero_norm() {
        let nu = Weight::sampled(crate::measures::GridDensity::empty("empty"));
        let cfg = ExponentConfig::new(2.0, 2.0, 1.0).unwrap();
        let r = two_weight_norm_check(&nu, &Weight::Lebesgue, &cfg, &[3, 4], 8, 0, 1).unwrap();
        for l in &r.levels {
            assert_eq!(l.dense.value, 0.0);
        }
    }

    #[test]
    fn stabilization() {
        assert!(stabilized(&[3.0, 1.0, 1.04], 0.05));
        assert!(!stabilized(&[1.0, 1.2], 0.05));
        assert!(!stabilized(&[1.0], 0.05));
    }
}
