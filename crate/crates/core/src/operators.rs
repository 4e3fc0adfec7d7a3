//! Reproducing kernels, discretized integral operators and norm estimation.
//!
//! A discrete measure `m = Σ m_j δ_{z_j}` turns a kernel into the operator
//! `(T f)_i = Σ_j k(z_i, z_j) m_j f_j` on the weighted space with
//! `‖f‖² = Σ m_i |f_i|²`. Conjugating by `diag(m)^(1/2)` gives a plain matrix
//! with the same norm, which is what every estimator here works on.
//!
//! All integrals against area use the normalized measure (disk area 1), so
//! `K_1 z^n = z^n / (n + 1)` and `K_1 K_1^*` has the Dirichlet kernel
//! `Σ (z conj(w))^n / (n + 1)` exactly.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dirichlet::AnalyticPolynomial;
use crate::error::{Error, Result};
use crate::measures::{DiskQuadrature, Weight};

const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// Terms allowed in a custom power-series kernel.
pub const MAX_SERIES_TERMS: usize = 10_000;

/// Matrices up to this size get an exact dense norm instead of power iteration.
pub const DENSE_ORACLE_LIMIT: usize = 200;

/// Degree cap for Bergman projections and polynomial test functions.
pub const DEFAULT_MAX_DEGREE: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum KernelSpec {
    /// `1 / (1 - z conj(w))^alpha`, principal branch.
    KAlpha { alpha: f64 },
    /// `(1 / x) log(1 / (1 - x))` with `x = z conj(w)`, equal to 1 at `x = 0`.
    Dirichlet,
    /// `Σ c_n (z conj(w))^n`.
    CustomSeries { coefficients: Vec<f64> },
}

impl KernelSpec {
    pub fn k_alpha(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Argument(format!("kernel exponent {alpha} must be positive")));
        }
        Ok(KernelSpec::KAlpha { alpha })
    }

    pub fn custom(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() > MAX_SERIES_TERMS {
            return Err(Error::Argument(format!(
                "{} series terms exceed the cap of {MAX_SERIES_TERMS}",
                coefficients.len()
            )));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::Argument("series coefficients must be finite".into()));
        }
        Ok(KernelSpec::CustomSeries { coefficients })
    }

    pub fn eval(&self, z: Complex64, w: Complex64) -> Complex64 {
        let x = z * w.conj();
        match self {
            KernelSpec::KAlpha { alpha } => k_alpha_of(*alpha, x),
            KernelSpec::Dirichlet => dirichlet_kernel_of(x),
            KernelSpec::CustomSeries { coefficients } => coefficients
                .iter()
                .rev()
                .fold(Complex64::new(0.0, 0.0), |acc, c| acc * x + c),
        }
    }

    /// `k(z, w) = conj(k(w, z))` holds for every family here, since each is a
    /// real-coefficient series in `z conj(w)`.
    pub fn is_hermitian(&self) -> bool {
        true
    }

    /// Whether the kernel is a reproducing kernel (positive definite).
    pub fn is_reproducing(&self) -> bool {
        match self {
            KernelSpec::KAlpha { alpha } => *alpha > 0.0 && *alpha <= 2.0,
            KernelSpec::Dirichlet => true,
            KernelSpec::CustomSeries { coefficients } => coefficients.iter().all(|c| *c >= 0.0),
        }
    }

    /// Truncation bound `max|c| |x|^(N+1) / (1 - |x|)` for a custom series.
    pub fn series_tail_bound(&self, x_abs: f64) -> f64 {
        match self {
            KernelSpec::CustomSeries { coefficients } if x_abs < 1.0 => {
                let cmax = coefficients.iter().fold(0.0f64, |a, c| a.max(c.abs()));
                cmax * x_abs.powi(coefficients.len() as i32) / (1.0 - x_abs)
            }
            KernelSpec::CustomSeries { .. } => f64::INFINITY,
            _ => 0.0,
        }
    }
}

/// `(1 - x)^-alpha`, with integer exponents done by repeated division.
pub fn k_alpha_of(alpha: f64, x: Complex64) -> Complex64 {
    let d = ONE - x;
    if alpha == 1.0 {
        d.inv()
    } else if alpha.fract() == 0.0 && alpha <= 16.0 {
        d.powi(alpha as i32).inv()
    } else {
        (-alpha * d.ln()).exp()
    }
}

/// `(1/x) log(1/(1-x))`; a short series near `x = 0` avoids cancellation.
pub fn dirichlet_kernel_of(x: Complex64) -> Complex64 {
    if x.norm() < 1e-3 {
        (0..8)
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, n| acc * x + 1.0 / (n as f64 + 1.0))
    } else {
        -(ONE - x).ln() / x
    }
}

pub fn eval_kernel(spec: &KernelSpec, z: Complex64, w: Complex64) -> Result<Complex64> {
    if !(z.norm() < 1.0 && w.norm() < 1.0) {
        return Err(Error::Argument("kernel arguments must lie in the open disk".into()));
    }
    Ok(spec.eval(z, w))
}

/// Point masses strictly inside the disk.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteMeasure {
    atoms: Vec<(Complex64, f64)>,
}

impl DiscreteMeasure {
    pub fn new(atoms: Vec<(Complex64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Argument("a discrete measure needs at least one atom".into()));
        }
        for (z, m) in &atoms {
            if !(z.norm() < 1.0) {
                return Err(Error::Argument(format!("atom {z} is not inside the disk")));
            }
            if !(*m > 0.0 && m.is_finite()) {
                return Err(Error::Argument(format!("atom mass {m} must be positive")));
            }
        }
        Ok(DiscreteMeasure { atoms })
    }

    /// Cell centers carrying the cell masses of `w`; zero-mass cells are dropped.
    pub fn from_quadrature(quad: &DiskQuadrature, w: &Weight) -> Result<Self> {
        let atoms = quad
            .nodes()
            .zip(quad.cell_masses(w))
            .filter(|(_, m)| *m > 0.0)
            .collect();
        Self::new(atoms)
    }

    pub fn atoms(&self) -> &[(Complex64, f64)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn points(&self) -> Vec<Complex64> {
        self.atoms.iter().map(|a| a.0).collect()
    }

    pub fn masses(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.1).collect()
    }
}

/// `A[i][j] = k(z_i, z_j)` together with the atom masses.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    pub entries: DMatrix<Complex64>,
    pub masses: Vec<f64>,
    pub hermitian: bool,
}

impl OperatorMatrix {
    pub fn new(entries: DMatrix<Complex64>, masses: Vec<f64>) -> Result<Self> {
        if !entries.is_square() || entries.nrows() != masses.len() {
            return Err(Error::Argument(format!(
                "{}x{} matrix with {} masses",
                entries.nrows(),
                entries.ncols(),
                masses.len()
            )));
        }
        let hermitian = is_hermitian(&entries, 1e-12);
        Ok(OperatorMatrix {
            entries,
            masses,
            hermitian,
        })
    }

    pub fn dim(&self) -> usize {
        self.masses.len()
    }

    /// `diag(m)^(1/2) A diag(m)^(1/2)`, unitarily equivalent to the weighted operator.
    pub fn symmetrized(&self) -> DMatrix<Complex64> {
        let s: Vec<f64> = self.masses.iter().map(|m| m.sqrt()).collect();
        DMatrix::from_fn(self.dim(), self.dim(), |i, j| self.entries[(i, j)] * (s[i] * s[j]))
    }

    /// `f ↦ Σ_j A[i][j] m_j f_j`
    pub fn apply(&self, f: &[Complex64]) -> Vec<Complex64> {
        let g = DVector::from_iterator(self.dim(), f.iter().zip(&self.masses).map(|(v, m)| v * m));
        (&self.entries * g).iter().copied().collect()
    }
}

fn is_hermitian(a: &DMatrix<Complex64>, tol: f64) -> bool {
    let n = a.nrows();
    (0..n).all(|i| (i..n).all(|j| (a[(i, j)] - a[(j, i)].conj()).norm() <= tol * (1.0 + a[(i, j)].norm())))
}

pub fn assemble_operator(spec: &KernelSpec, m: &DiscreteMeasure) -> OperatorMatrix {
    let pts = m.points();
    let n = pts.len();
    let rows: Vec<Vec<Complex64>> = pts
        .par_iter()
        .map(|&z| pts.iter().map(|&w| spec.eval(z, w)).collect())
        .collect();
    let entries = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    OperatorMatrix {
        entries,
        masses: m.masses(),
        hermitian: spec.is_hermitian(),
    }
}

/// Entrywise real part.
pub fn real_part_operator(a: &OperatorMatrix) -> OperatorMatrix {
    OperatorMatrix {
        entries: a.entries.map(|v| Complex64::new(v.re, 0.0)),
        masses: a.masses.clone(),
        hermitian: a.hermitian,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormEstimate {
    pub value: f64,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for PowerOptions {
    fn default() -> Self {
        PowerOptions {
            tol: 1e-8,
            max_iter: 10_000,
            seed: 0x5eed,
        }
    }
}

/// Largest singular value of a linear map given by its action and adjoint
/// action, by power iteration on `A^* A`.
///
/// Stops when `‖A^*A v - λ v‖ / λ <= tol`. A zero operator reports 0.
pub fn power_norm<F, G>(dim: usize, apply: F, adjoint: G, opts: PowerOptions) -> NormEstimate
where
    F: Fn(&[Complex64]) -> Vec<Complex64>,
    G: Fn(&[Complex64]) -> Vec<Complex64>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut v: Vec<Complex64> = (0..dim)
        .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    normalize(&mut v);
    let mut lambda = 0.0;
    let mut residual = f64::INFINITY;
    for it in 1..=opts.max_iter {
        let u = apply(&v);
        lambda = norm_sq(&u);
        if lambda == 0.0 || !lambda.is_finite() {
            return NormEstimate {
                value: lambda.sqrt(),
                iterations: it,
                residual: 0.0,
                converged: lambda.is_finite(),
            };
        }
        let mut w = adjoint(&u);
        residual = w
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b * lambda).norm_sqr())
            .sum::<f64>()
            .sqrt()
            / lambda;
        if residual <= opts.tol {
            return NormEstimate {
                value: lambda.sqrt(),
                iterations: it,
                residual,
                converged: true,
            };
        }
        normalize(&mut w);
        v = w;
    }
    NormEstimate {
        value: lambda.sqrt(),
        iterations: opts.max_iter,
        residual,
        converged: false,
    }
}

fn norm_sq(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum()
}

fn normalize(v: &mut [Complex64]) {
    let n = norm_sq(v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

/// Norm of the weighted operator by power iteration.
pub fn operator_norm(a: &OperatorMatrix) -> NormEstimate {
    operator_norm_with(a, PowerOptions::default())
}

pub fn operator_norm_with(a: &OperatorMatrix, opts: PowerOptions) -> NormEstimate {
    let b = a.symmetrized();
    let bh = b.adjoint();
    let n = a.dim();
    power_norm(
        n,
        |v| (&b * DVector::from_column_slice(v)).iter().copied().collect(),
        |v| (&bh * DVector::from_column_slice(v)).iter().copied().collect(),
        opts,
    )
}

/// Exact norm of the weighted operator from a dense singular value decomposition.
pub fn dense_operator_norm(a: &OperatorMatrix) -> f64 {
    a.symmetrized()
        .singular_values()
        .iter()
        .fold(0.0f64, |m, s| m.max(*s))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SandwichReport {
    pub norm_k: f64,
    pub norm_re: f64,
    /// `‖T_Re(k)‖ / ‖T_k‖`, at most 1.
    pub lower_ratio: f64,
    /// `‖T_k‖ / ‖T_Re(k)‖`, at most 2.
    pub upper_ratio: f64,
    pub lower_ok: bool,
    pub upper_ok: bool,
    pub dense: bool,
}

pub const SANDWICH_SLACK: f64 = 1e-9;

/// Checks `‖T_Re(k)‖ <= ‖T_k‖ <= 2 ‖T_Re(k)‖` on a discrete measure.
pub fn norm_sandwich_check(spec: &KernelSpec, m: &DiscreteMeasure) -> Result<SandwichReport> {
    if !spec.is_hermitian() {
        return Err(Error::Argument("the norm sandwich needs a hermitian kernel".into()));
    }
    let a = assemble_operator(spec, m);
    let re = real_part_operator(&a);
    let dense = a.dim() <= DENSE_ORACLE_LIMIT;
    let (norm_k, norm_re) = if dense {
        (dense_operator_norm(&a), dense_operator_norm(&re))
    } else {
        let (x, y) = (operator_norm(&a), operator_norm(&re));
        for e in [x, y] {
            if !e.converged {
                return Err(Error::NoConvergence {
                    iterations: e.iterations,
                    residual: e.residual,
                });
            }
        }
        (x.value, y.value)
    };
    let slack = 1.0 + SANDWICH_SLACK;
    Ok(SandwichReport {
        norm_k,
        norm_re,
        lower_ratio: norm_re / norm_k,
        upper_ratio: norm_k / norm_re,
        lower_ok: norm_re <= slack * norm_k,
        upper_ok: norm_k <= 2.0 * slack * norm_re,
        dense,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GramReport {
    pub min_eigenvalue: f64,
    pub trace: f64,
    pub ok: bool,
}

/// Smallest eigenvalue of the Gram matrix `[k(z_i, z_j)]`, which must be
/// nonnegative up to `1e-10 * trace`.
pub fn gram_psd_check(points: &[Complex64], spec: &KernelSpec) -> Result<GramReport> {
    if !spec.is_reproducing() {
        return Err(Error::Argument(format!("{spec:?} is not a reproducing kernel")));
    }
    if points.is_empty() {
        return Err(Error::Argument("no points".into()));
    }
    if points.iter().any(|z| !(z.norm() < 1.0)) {
        return Err(Error::Argument("Gram points must lie in the open disk".into()));
    }
    let n = points.len();
    let g = DMatrix::from_fn(n, n, |i, j| spec.eval(points[i], points[j]));
    let trace: f64 = (0..n).map(|i| g[(i, i)].re).sum();
    let min_eigenvalue = hermitian_eigenvalues(g).into_iter().fold(f64::INFINITY, f64::min);
    Ok(GramReport {
        min_eigenvalue,
        trace,
        ok: min_eigenvalue >= -1e-10 * trace,
    })
}

/// Eigenvalues of a hermitian matrix.
pub fn hermitian_eigenvalues(a: DMatrix<Complex64>) -> Vec<f64> {
    nalgebra::SymmetricEigen::new(a).eigenvalues.iter().copied().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RealRestrictionReport {
    /// `sup ‖T f‖` over complex unit vectors.
    pub complex_sup: f64,
    /// `sup ‖T f‖` over real unit vectors.
    pub real_sup: f64,
    pub ok: bool,
}

/// Compares the norm of the weighted operator with its supremum over
/// real-valued vectors; the first is at most `√2` times the second.
///
/// For real `x`, `‖Bx‖² = xᵀ Re(B^*B) x`, so the real supremum is the top
/// eigenvalue of `Re(B^*B)`.
pub fn real_restriction_check(a: &OperatorMatrix) -> RealRestrictionReport {
    let b = a.symmetrized();
    let gram = b.adjoint() * &b;
    let complex_sup = hermitian_eigenvalues(gram.clone())
        .into_iter()
        .fold(0.0f64, f64::max)
        .sqrt();
    let real_sup = hermitian_eigenvalues(gram.map(|v| Complex64::new(v.re, 0.0)))
        .into_iter()
        .fold(0.0f64, f64::max)
        .sqrt();
    RealRestrictionReport {
        complex_sup,
        real_sup,
        ok: complex_sup <= std::f64::consts::SQRT_2 * real_sup * (1.0 + 1e-9),
    }
}

/// `(K_alpha f)(z) = Σ_j f_j area_j / (1 - z conj(w_j))^alpha` at each point.
pub fn apply_k_alpha_at(alpha: f64, f: &[Complex64], quad: &DiskQuadrature, points: &[Complex64]) -> Vec<Complex64> {
    let spec = KernelSpec::KAlpha { alpha };
    kernel_apply(&spec, f, quad, points)
}

fn kernel_apply(spec: &KernelSpec, f: &[Complex64], quad: &DiskQuadrature, points: &[Complex64]) -> Vec<Complex64> {
    assert_eq!(f.len(), quad.len(), "one sample per cell");
    let weighted: Vec<(Complex64, Complex64)> = quad
        .cells()
        .iter()
        .zip(f)
        .map(|(c, v)| (c.center, v * c.area))
        .collect();
    points
        .par_iter()
        .map(|&z| weighted.iter().map(|&(w, v)| v * spec.eval(z, w)).sum())
        .collect()
}

/// `K_1 f` at every quadrature node.
pub fn apply_k1(f: &[Complex64], quad: &DiskQuadrature) -> Vec<Complex64> {
    let nodes: Vec<Complex64> = quad.nodes().collect();
    apply_k1_at(f, quad, &nodes)
}

pub fn apply_k1_at(f: &[Complex64], quad: &DiskQuadrature, points: &[Complex64]) -> Vec<Complex64> {
    assert_eq!(f.len(), quad.len(), "one sample per cell");
    let weighted: Vec<(Complex64, Complex64)> = quad
        .cells()
        .iter()
        .zip(f)
        .map(|(c, v)| (c.center.conj(), v * c.area))
        .collect();
    points
        .par_iter()
        .map(|&z| weighted.iter().map(|&(wc, v)| v / (ONE - z * wc)).sum())
        .collect()
}

/// Orthogonal projection onto analytic polynomials of degree at most
/// `degree`: `c_n = (n + 1) <f, z^n>`.
pub fn bergman_project(f: &[Complex64], quad: &DiskQuadrature, degree: usize) -> Result<AnalyticPolynomial> {
    if degree > DEFAULT_MAX_DEGREE {
        return Err(Error::Argument(format!(
            "degree {degree} exceeds the cap of {DEFAULT_MAX_DEGREE}"
        )));
    }
    assert_eq!(f.len(), quad.len(), "one sample per cell");
    let partials: Vec<Vec<Complex64>> = quad
        .cells()
        .par_chunks(4096)
        .zip(f.par_chunks(4096))
        .map(|(cells, vals)| {
            let mut acc = vec![Complex64::new(0.0, 0.0); degree + 1];
            for (c, v) in cells.iter().zip(vals) {
                let wc = c.center.conj();
                let mut term = v * c.area;
                for a in acc.iter_mut() {
                    *a += term;
                    term *= wc;
                }
            }
            acc
        })
        .collect();
    let mut coeffs = vec![Complex64::new(0.0, 0.0); degree + 1];
    for p in partials {
        for (c, v) in coeffs.iter_mut().zip(p) {
            *c += v;
        }
    }
    for (n, c) in coeffs.iter_mut().enumerate() {
        *c *= (n + 1) as f64;
    }
    AnalyticPolynomial::with_cap(coeffs, DEFAULT_MAX_DEGREE)
}

/// Largest `|K_1 f - K_1(P f)|` over `points`.
pub fn k1_projection_discrepancy(
    f: &[Complex64],
    quad: &DiskQuadrature,
    points: &[Complex64],
    degree: usize,
) -> Result<f64> {
    let p = bergman_project(f, quad, degree)?;
    let pf = quad.sample(|z| p.eval(z));
    let a = apply_k1_at(f, quad, points);
    let b = apply_k1_at(&pf, quad, points);
    Ok(a.iter().zip(&b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorizationReport {
    pub max_error: f64,
    pub atoms: usize,
    pub cells: usize,
}

/// Compares `∫ dA(u) / ((1 - z ū)(1 - u w̄))`, integrated on the quadrature,
/// with the Dirichlet kernel at every pair of atoms.
pub fn factorization_check(m: &DiscreteMeasure, quad: &DiskQuadrature) -> FactorizationReport {
    let pts = m.points();
    let areas = quad.areas();
    let cols: Vec<Vec<Complex64>> = pts
        .par_iter()
        .map(|&z| quad.nodes().map(|u| ONE / (ONE - z * u.conj())).collect())
        .collect();
    let mut max_error = 0.0f64;
    for (i, &z) in pts.iter().enumerate() {
        for (j, &w) in pts.iter().enumerate() {
            let numeric: Complex64 = cols[i]
                .iter()
                .zip(&cols[j])
                .zip(&areas)
                .map(|((a, b), s)| a * b.conj() * s)
                .sum();
            max_error = max_error.max((numeric - KernelSpec::Dirichlet.eval(z, w)).norm());
        }
    }
    FactorizationReport {
        max_error,
        atoms: pts.len(),
        cells: quad.len(),
    }
}

/// Largest `|T z^n - z^n / (n+1)²|` over `points`, where `T` integrates the
/// Dirichlet kernel against normalized area on the quadrature.
pub fn monomial_diagonalization_error(n: u32, quad: &DiskQuadrature, points: &[Complex64]) -> f64 {
    let f = quad.sample(|w| w.powu(n));
    let tf = kernel_apply(&KernelSpec::Dirichlet, &f, quad, points);
    let scale = 1.0 / ((n + 1) as f64).powi(2);
    points
        .iter()
        .zip(tf)
        .map(|(z, v)| (v - z.powu(n) * scale).norm())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{DiskQuadrature, QuadratureSpec};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn dirichlet_values() {
        let k = KernelSpec::Dirichlet;
        assert_eq!(k.eval(c(0.0, 0.0), c(0.7, 0.1)), c(1.0, 0.0));
        let v = k.eval(c(0.5, 0.0), c(1.0 - 1e-16, 0.0));
        assert!((v.re - 2.0 * 2f64.ln()).abs() < 1e-12 && v.im.abs() < 1e-15);
        // z conj(w) = i/2
        let v = k.eval(c(0.0, 0.5), c(1.0 - 1e-16, 0.0));
        assert!((v.re - 2.0 * 0.5f64.atan()).abs() < 1e-12);
        // partial sums of Σ x^n/(n+1)
        let x = c(0.0, 0.5);
        let series: Complex64 = (0..200).map(|n| x.powu(n) / (n as f64 + 1.0)).sum();
        assert!((dirichlet_kernel_of(x) - series).norm() < 1e-14);
        let small = c(3e-4, -2e-4);
        let series: Complex64 = (0..30).map(|n| small.powu(n) / (n as f64 + 1.0)).sum();
        assert!((dirichlet_kernel_of(small) - series).norm() < 1e-16);
    }

    #[test]
    fn kernel_argument_checks() {
        assert!(eval_kernel(&KernelSpec::Dirichlet, c(1.0, 0.0), c(0.0, 0.0)).is_err());
        assert!(KernelSpec::k_alpha(0.0).is_err());
        assert!(KernelSpec::custom(vec![1.0; MAX_SERIES_TERMS + 1]).is_err());
    }

    #[test]
    fn custom_series_matches_k_alpha() {
        // 1/(1-x) = Σ x^n
        let geo = KernelSpec::custom(vec![1.0; 400]).unwrap();
        let (z, w) = (c(0.3, 0.4), c(-0.5, 0.2));
        assert!((geo.eval(z, w) - KernelSpec::KAlpha { alpha: 1.0 }.eval(z, w)).norm() < 1e-14);
        assert!(geo.series_tail_bound(0.5) < 1e-100);
    }

    #[test]
    fn assemble_examples() {
        let one = DiscreteMeasure::new(vec![(c(0.0, 0.0), 1.0)]).unwrap();
        let a = assemble_operator(&KernelSpec::Dirichlet, &one);
        assert_eq!(a.entries[(0, 0)], c(1.0, 0.0));

        let r: f64 = 0.6;
        let two = DiscreteMeasure::new(vec![(c(0.0, 0.0), 0.5), (c(r, 0.0), 0.5)]).unwrap();
        let a = assemble_operator(&KernelSpec::Dirichlet, &two);
        let krr = (1.0 / (r * r)) * (1.0 / (1.0 - r * r)).ln();
        for (i, j, v) in [(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, krr)] {
            assert!((a.entries[(i, j)] - c(v, 0.0)).norm() < 1e-14);
        }
        assert_eq!(real_part_operator(&a), a);

        let half = DiscreteMeasure::new(vec![(c(0.0, 0.0), 1.0), (c(0.5, 0.0), 1.0)]).unwrap();
        let a = assemble_operator(&KernelSpec::KAlpha { alpha: 1.0 }, &half);
        assert!((a.entries[(1, 1)] - c(4.0 / 3.0, 0.0)).norm() < 1e-15);
        assert!(a.hermitian);
    }

    #[test]
    fn real_part_of_hermitian() {
        let e = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(1.0, 0.0)]);
        let a = OperatorMatrix::new(e, vec![1.0, 1.0]).unwrap();
        assert!(a.hermitian);
        let re = real_part_operator(&a);
        assert_eq!(re.entries, DMatrix::identity(2, 2).map(|v: f64| c(v, 0.0)));
    }

    #[test]
    fn norm_examples() {
        // the identity operator has kernel δ_ij / m_j against the masses
        let masses = [0.2, 0.3, 0.5];
        let id = OperatorMatrix::new(
            DMatrix::from_fn(3, 3, |i, j| if i == j { c(1.0 / masses[i], 0.0) } else { c(0.0, 0.0) }),
            masses.to_vec(),
        )
        .unwrap();
        assert!((operator_norm(&id).value - 1.0).abs() < 1e-12);

        let ones = OperatorMatrix::new(DMatrix::from_element(2, 2, c(1.0, 0.0)), vec![0.5, 0.5]).unwrap();
        let e = operator_norm(&ones);
        assert!(e.converged && (e.value - 1.0).abs() < 1e-12);

        let diag = OperatorMatrix::new(
            DMatrix::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(3.0, 0.0)]),
            vec![1.0, 1.0],
        )
        .unwrap();
        assert!((operator_norm(&diag).value - 3.0).abs() < 1e-7);
        assert!((dense_operator_norm(&diag) - 3.0).abs() < 1e-14);

        let zero = OperatorMatrix::new(DMatrix::zeros(3, 3), vec![1.0; 3]).unwrap();
        assert_eq!(operator_norm(&zero).value, 0.0);
    }

    #[test]
    fn non_convergence_is_flagged() {
        let diag = OperatorMatrix::new(
            DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.999, 0.0)]),
            vec![1.0, 1.0],
        )
        .unwrap();
        let e = operator_norm_with(&diag, PowerOptions { max_iter: 3, ..Default::default() });
        assert!(!e.converged);
        assert_eq!(e.iterations, 3);
    }

    #[test]
    fn single_atom_sandwich() {
        let z0 = c(0.3, -0.4);
        let m = DiscreteMeasure::new(vec![(z0, 0.7)]).unwrap();
        let r = norm_sandwich_check(&KernelSpec::Dirichlet, &m).unwrap();
        let expect = KernelSpec::Dirichlet.eval(z0, z0).re * 0.7;
        assert!((r.norm_k - expect).abs() < 1e-14 && (r.norm_re - expect).abs() < 1e-14);
        assert!(r.lower_ok && r.upper_ok);
    }

    #[test]
    fn gram_examples() {
        let g = gram_psd_check(&[c(0.0, 0.0)], &KernelSpec::Dirichlet).unwrap();
        assert!((g.min_eigenvalue - 1.0).abs() < 1e-15);
        let r: f64 = 0.8;
        let krr = (1.0 / (r * r)) * (1.0 / (1.0 - r * r)).ln();
        // eigenvalues of [[1,1],[1,k]]
        let tr = 1.0 + krr;
        let oracle = 0.5 * (tr - (tr * tr - 4.0 * (krr - 1.0)).sqrt());
        let g = gram_psd_check(&[c(0.0, 0.0), c(r, 0.0)], &KernelSpec::Dirichlet).unwrap();
        assert!((g.min_eigenvalue - oracle).abs() < 1e-12);
        assert!(g.ok && oracle >= 0.0);
        assert!(gram_psd_check(&[c(0.1, 0.0)], &KernelSpec::KAlpha { alpha: 3.0 }).is_err());
    }

    #[test]
    fn k1_on_constants_and_conjugates() {
        let quad = DiskQuadrature::new(QuadratureSpec::new(6, 64)).unwrap();
        let pts = [c(0.0, 0.0), c(0.3, 0.2), c(-0.6, 0.1)];
        let ones = vec![c(1.0, 0.0); quad.len()];
        for v in apply_k1_at(&ones, &quad, &pts) {
            assert!((v - c(1.0, 0.0)).norm() < 1e-12);
        }
        let conj = quad.sample(|w| w.conj());
        for v in apply_k1_at(&conj, &quad, &pts) {
            assert!(v.norm() < 1e-12);
        }
        let cube = quad.sample(|w| w.powu(3));
        for (z, v) in pts.iter().zip(apply_k1_at(&cube, &quad, &pts)) {
            assert!((v - z.powu(3) / 4.0).norm() < 2e-3, "{v} vs {}", z.powu(3) / 4.0);
        }
    }

    #[test]
    fn projection_examples() {
        let quad = DiskQuadrature::new(QuadratureSpec::new(6, 64).with_radial_level(8)).unwrap();
        let p = bergman_project(&quad.sample(|z| z.conj()), &quad, 8).unwrap();
        assert!(p.coefficients().iter().all(|a| a.norm() < 1e-12));
        let p = bergman_project(&quad.sample(|z| z.powu(2)), &quad, 8).unwrap();
        for (n, a) in p.coefficients().iter().enumerate() {
            let expect = if n == 2 { 1.0 } else { 0.0 };
            assert!((a - c(expect, 0.0)).norm() < 1e-4, "{n}: {a}");
        }
        let p = bergman_project(&quad.sample(|z| c(z.norm_sqr(), 0.0)), &quad, 8).unwrap();
        assert!((p.coefficients()[0] - c(0.5, 0.0)).norm() < 1e-5);
        assert!(bergman_project(&quad.sample(|_| c(1.0, 0.0)), &quad, 65).is_err());
    }

    #[test]
    fn factorization_at_origin() {
        let quad = DiskQuadrature::new(QuadratureSpec::new(6, 32)).unwrap();
        let m = DiscreteMeasure::new(vec![(c(0.0, 0.0), 1.0)]).unwrap();
        assert!(factorization_check(&m, &quad).max_error < 1e-14);
        let m = DiscreteMeasure::new(vec![(c(0.0, 0.0), 1.0), (c(0.5, 0.0), 1.0)]).unwrap();
        assert!(factorization_check(&m, &quad).max_error < 1e-3);
    }
}
