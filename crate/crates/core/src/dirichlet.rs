//! Dirichlet-space norms, Carleson constants of weights and the end-to-end
//! certification pipeline.
//!
//! With normalized area, `k_D(z, w) = Σ φ_n(z) conj(φ_n(w))` for
//! `φ_n = z^n / √(n+1)`. So `T_{k_D, μ} = A A^*` with `A e_n = φ_n` in
//! `L²(μ)`, and its norm is the top eigenvalue of the Gram matrix
//! `G_{mn} = <φ_n, φ_m>_μ`, which is cheap to form for any weight.

use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dyadic::{stabilized, two_weight_norm_check, two_weight_testing_constant, ExponentConfig};
use crate::error::{Error, Result};
use crate::measures::{
    reverse_doubling_report, DiskQuadrature, QuadratureSpec, Weight, DEFAULT_REVERSE_DOUBLING_MARGIN,
};
use crate::operators::{hermitian_eigenvalues, DEFAULT_MAX_DEGREE};
use crate::report::Stage;

/// `Σ a_n z^n` with at most `cap + 1` coefficients.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalyticPolynomial {
    coeffs: Vec<Complex64>,
}

impl AnalyticPolynomial {
    pub fn new(coeffs: Vec<Complex64>) -> Result<Self> {
        Self::with_cap(coeffs, DEFAULT_MAX_DEGREE)
    }

    pub fn with_cap(coeffs: Vec<Complex64>, cap: usize) -> Result<Self> {
        if coeffs.len() > cap + 1 {
            return Err(Error::Argument(format!(
                "degree {} exceeds the cap of {cap}",
                coeffs.len() - 1
            )));
        }
        if coeffs.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(Error::Argument("coefficients must be finite".into()));
        }
        Ok(AnalyticPolynomial { coeffs })
    }

    pub fn monomial(n: usize) -> Result<Self> {
        let mut coeffs = vec![Complex64::new(0.0, 0.0); n + 1];
        coeffs[n] = Complex64::new(1.0, 0.0);
        Self::new(coeffs)
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c)
    }

    /// `|a_0|² + Σ_{n>=1} n |a_n|²`
    pub fn dirichlet_norm(&self) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(n, c)| n.max(1) as f64 * c.norm_sqr())
            .sum()
    }

    /// `Σ (n + 1) |a_n|²`, the norm reproduced by `k_D`.
    pub fn kernel_norm(&self) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(n, c)| (n + 1) as f64 * c.norm_sqr())
            .sum()
    }
}

pub fn dirichlet_norm(f: &AnalyticPolynomial) -> f64 {
    f.dirichlet_norm()
}

/// Complex Gaussian coefficients scaled by `1 / √(n+1)`.
pub fn random_polynomial<R: Rng + ?Sized>(degree: usize, rng: &mut R) -> Result<AnalyticPolynomial> {
    let coeffs = (0..=degree)
        .map(|n| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re, im) / ((n + 1) as f64).sqrt()
        })
        .collect();
    AnalyticPolynomial::new(coeffs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CarlesonMethod {
    /// `‖T_{k_D, w}‖` from the truncated monomial Gram matrix.
    OperatorNorm,
    /// Largest `∫ |f|² w / dirichlet_norm(f)` over random polynomials; a lower bound.
    PolynomialSampling,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefinementStep {
    pub depth: u32,
    pub cells: usize,
    pub estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CarlesonVerdict {
    pub constant_estimate: f64,
    pub method: CarlesonMethod,
    pub trace: Vec<RefinementStep>,
    pub verdict: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CarlesonOptions {
    pub depths: Vec<u32>,
    pub angular_base: u32,
    pub degree_cap: usize,
    pub samples: usize,
    pub seed: u64,
}

impl Default for CarlesonOptions {
    fn default() -> Self {
        CarlesonOptions {
            depths: vec![8, 10, 12],
            angular_base: 8,
            degree_cap: DEFAULT_MAX_DEGREE,
            samples: 256,
            seed: 7,
        }
    }
}

pub const STABILIZATION_TOL: f64 = 0.05;

/// Gram matrix `G_{mn} = Σ_c mass_c φ_n(z_c) conj(φ_m(z_c))` of the scaled
/// monomials up to `degree`.
pub fn monomial_gram(w: &Weight, quad: &DiskQuadrature, degree: usize) -> DMatrix<Complex64> {
    let masses = quad.cell_masses(w);
    let cells = quad.len();
    let phi = DMatrix::from_fn(cells, degree + 1, |c, n| {
        let z = quad.cells()[c].center;
        z.powu(n as u32) * (masses[c] / (n + 1) as f64).sqrt()
    });
    phi.adjoint() * phi
}

/// Estimates the Carleson constant of `w` for the Dirichlet space on each
/// quadrature depth in `opts.depths`.
pub fn carleson_constant(w: &Weight, method: CarlesonMethod, opts: &CarlesonOptions) -> Result<CarlesonVerdict> {
    if !w.is_finite() {
        return Err(Error::InfiniteMass(w.to_string()));
    }
    if opts.degree_cap > DEFAULT_MAX_DEGREE {
        return Err(Error::Argument(format!(
            "degree cap {} above {DEFAULT_MAX_DEGREE}",
            opts.degree_cap
        )));
    }
    let mut trace = Vec::with_capacity(opts.depths.len());
    for &depth in &opts.depths {
        let quad = DiskQuadrature::new(QuadratureSpec::new(depth, opts.angular_base))?;
        let estimate = match method {
            CarlesonMethod::OperatorNorm => hermitian_eigenvalues(monomial_gram(w, &quad, opts.degree_cap))
                .into_iter()
                .fold(0.0f64, f64::max),
            CarlesonMethod::PolynomialSampling => sampled_ratio(w, &quad, opts)?,
        };
        if estimate <= 0.0 {
            return Err(Error::DegenerateWeight(format!("`{w}` has no mass at depth {depth}")));
        }
        trace.push(RefinementStep {
            depth,
            cells: quad.len(),
            estimate,
        });
    }
    let values: Vec<f64> = trace.iter().map(|s| s.estimate).collect();
    Ok(CarlesonVerdict {
        constant_estimate: *values.last().ok_or_else(|| Error::Argument("no refinement depths".into()))?,
        method,
        verdict: stabilized(&values, STABILIZATION_TOL),
        trace,
    })
}

fn sampled_ratio(w: &Weight, quad: &DiskQuadrature, opts: &CarlesonOptions) -> Result<f64> {
    let masses = quad.cell_masses(w);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut polys = vec![AnalyticPolynomial::new(vec![Complex64::new(1.0, 0.0)])?];
    for _ in 1..opts.samples.max(1) {
        polys.push(random_polynomial(opts.degree_cap, &mut rng)?);
    }
    Ok(polys
        .par_iter()
        .map(|f| l2_mass(f, quad, &masses) / f.dirichlet_norm())
        .collect::<Vec<f64>>()
        .into_iter()
        .fold(0.0, f64::max))
}

/// `∫ |f|² w dA` on the quadrature, given the cell masses of `w`.
pub fn l2_mass(f: &AnalyticPolynomial, quad: &DiskQuadrature, masses: &[f64]) -> f64 {
    quad.nodes().zip(masses).map(|(z, m)| f.eval(z).norm_sqr() * m).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOptions {
    pub depth: u32,
    pub quad_depth: u32,
    pub random_arcs: usize,
    pub norm_depths: Vec<u32>,
    pub carleson: CarlesonOptions,
    pub seed: u64,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            depth: 12,
            quad_depth: 13,
            random_arcs: 256,
            norm_depths: vec![6, 8, 10],
            carleson: CarlesonOptions::default(),
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineReport {
    pub weight: String,
    pub stages: Vec<Stage>,
    pub hypotheses_hold: bool,
    pub conclusions_hold: bool,
    pub verdict: bool,
    /// Wall-clock time per stage; excluded from the deterministic part of reports.
    #[serde(skip)]
    pub timings_ms: BTreeMap<String, f64>,
}

/// Runs finiteness, reverse doubling, the two-weight testing constant against
/// Lebesgue measure with `p = q = 2, α = 1`, the two-weight norm check and the
/// Carleson constant, in that order. Stage errors become failed stages.
pub fn theorem_pipeline(w: &Weight, opts: &PipelineOptions) -> PipelineReport {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut log = StageLog::new();

    let total = w.radial_mass(0.0, 1.0);
    log.push(
        Stage::new("finiteness")
            .constant("radial_exponent", w.radial_exponent())
            .constant("radial_mass", total)
            .verdict(w.is_finite()),
    );

    let quad = if w.is_radial() {
        None
    } else {
        match DiskQuadrature::new(QuadratureSpec::new(opts.quad_depth, 8)) {
            Ok(q) => Some(q),
            Err(e) => {
                log.push(Stage::failed("quadrature", e));
                None
            }
        }
    };

    log.push(
        match reverse_doubling_report(
            w,
            opts.depth,
            opts.random_arcs,
            quad.as_ref(),
            DEFAULT_REVERSE_DOUBLING_MARGIN,
            &mut rng,
        ) {
            Ok(r) => Stage::new("reverse-doubling")
                .constant("delta_hat", r.delta_hat)
                .verdict(r.verdict)
                .witness(&r),
            Err(e) => Stage::failed("reverse-doubling", e),
        },
    );

    let cfg = ExponentConfig::new(2.0, 2.0, 1.0).expect("valid exponents");
    log.push(
        match two_weight_testing_constant(w, &Weight::Lebesgue, &cfg, opts.depth, quad.as_ref(), opts.random_arcs, &mut rng)
        {
            Ok(r) => Stage::new("two-weight-testing")
                .constant("sup_value", r.sup_value)
                .verdict(r.sup_value.is_finite())
                .witness(&r),
            Err(e) => Stage::failed("two-weight-testing", e),
        },
    );

    log.push(
        match two_weight_norm_check(w, &Weight::Lebesgue, &cfg, &opts.norm_depths, 8, 0, opts.seed) {
            Ok(r) => {
                let last = r.levels.last();
                Stage::new("two-weight-norm")
                    .constant("dense_norm", last.map_or(f64::NAN, |l| l.dense.value))
                    .constant("dyadic_norm_0", last.map_or(f64::NAN, |l| l.dyadic[0].value))
                    .constant("dyadic_norm_1_3", last.map_or(f64::NAN, |l| l.dyadic[1].value))
                    .verdict(r.verdict)
                    .witness(&r)
            }
            Err(e) => Stage::failed("two-weight-norm", e),
        },
    );

    for (name, method) in [
        ("carleson-constant", CarlesonMethod::OperatorNorm),
        ("carleson-sampling", CarlesonMethod::PolynomialSampling),
    ] {
        log.push(match carleson_constant(w, method, &opts.carleson) {
            Ok(r) => Stage::new(name)
                .constant("estimate", r.constant_estimate)
                .verdict(r.verdict)
                .witness(&r),
            Err(e) => Stage::failed(name, e),
        });
    }

    let StageLog { stages, timings_ms, .. } = log;
    let passed = |name: &str| stages.iter().filter(|s| s.name == name).all(|s| s.verdict);
    let hypotheses_hold = passed("finiteness") && passed("reverse-doubling") && passed("quadrature");
    let conclusions_hold = ["two-weight-testing", "two-weight-norm", "carleson-constant", "carleson-sampling"]
        .iter()
        .all(|n| passed(n));
    PipelineReport {
        weight: w.to_string(),
        verdict: hypotheses_hold && conclusions_hold,
        hypotheses_hold,
        conclusions_hold,
        stages,
        timings_ms,
    }
}

/// Collects stages and the time spent on each since the previous one.
struct StageLog {
    stages: Vec<Stage>,
    timings_ms: BTreeMap<String, f64>,
    clock: Instant,
}

impl StageLog {
    fn new() -> Self {
        StageLog {
            stages: Vec::new(),
            timings_ms: BTreeMap::new(),
            clock: Instant::now(),
        }
    }

    fn push(&mut self, stage: Stage) {
        self.timings_ms
            .insert(stage.name.clone(), self.clock.elapsed().as_secs_f64() * 1e3);
        self.stages.push(stage);
        self.clock = Instant::now();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::build_quadrature;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn norm_examples() {
        assert_eq!(dirichlet_norm(&AnalyticPolynomial::new(vec![c(1.0)]).unwrap()), 1.0);
        for n in 1..10 {
            assert_eq!(dirichlet_norm(&AnalyticPolynomial::monomial(n).unwrap()), n as f64);
        }
        assert_eq!(dirichlet_norm(&AnalyticPolynomial::new(vec![c(1.0), c(1.0)]).unwrap()), 2.0);
        assert!(AnalyticPolynomial::new(vec![c(0.0); 66]).is_err());
    }

    #[test]
    fn horner() {
        let p = AnalyticPolynomial::new(vec![c(1.0), c(-2.0), c(3.0)]).unwrap();
        let z = Complex64::new(0.3, -0.2);
        assert!((p.eval(z) - (c(1.0) - 2.0 * z + 3.0 * z * z)).norm() < 1e-15);
    }

    #[test]
    fn lebesgue_gram_is_nearly_diagonal() {
        let quad = build_quadrature(10, 8).unwrap();
        let g = monomial_gram(&Weight::Lebesgue, &quad, 8);
        assert!((g[(0, 0)].re - 1.0).abs() < 1e-13);
        for n in 1..=8 {
            let expect = 1.0 / ((n + 1) as f64).powi(2);
            assert!((g[(n, n)].re - expect).abs() < 5e-3 * expect, "{n}: {}", g[(n, n)]);
        }
    }

    #[test]
    fn lebesgue_constant() {
        let opts = CarlesonOptions {
            depths: vec![6, 8],
            samples: 16,
            ..Default::default()
        };
        let r = carleson_constant(&Weight::Lebesgue, CarlesonMethod::OperatorNorm, &opts).unwrap();
        assert!((r.constant_estimate - 1.0).abs() < 1e-4 && r.verdict, "{r:?}");
        let r = carleson_constant(&Weight::Lebesgue, CarlesonMethod::PolynomialSampling, &opts).unwrap();
        assert!((r.constant_estimate - 1.0).abs() < 1e-9);
        let r = carleson_constant(&Weight::RadialPower(1.0), CarlesonMethod::OperatorNorm, &opts).unwrap();
        assert!((r.constant_estimate - 1.0 / 3.0).abs() < 1e-4);
    }

    #[test]
    fn infinite_weight_rejected() {
        let opts = CarlesonOptions::default();
        assert!(matches!(
            carleson_constant(&Weight::RadialPower(-1.5), CarlesonMethod::OperatorNorm, &opts),
            Err(Error::InfiniteMass(_))
        ));
    }
}
