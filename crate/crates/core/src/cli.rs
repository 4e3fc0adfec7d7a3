//! Command-line front end: configuration, report schema and dispatch.
//!
//! Every run produces a [`Report`] whose only nondeterministic part is
//! `timings_ms`. Exit codes: 0 when every stage verdict holds, 1 when a
//! numerical verdict fails, 2 for usage errors.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dirichlet::{theorem_pipeline, CarlesonOptions, PipelineOptions};
use crate::dyadic::{
    carleson_embedding_constant, domination_check, dyadic_apply, random_nonnegative, strong_embedding_check,
    two_weight_norm_check, two_weight_testing_constant, weak_type_norm, ExponentConfig,
};
use crate::error::{Error, Result};
use crate::geometry::{mei_cover, Arc, Grid};
use crate::measures::{
    doubling_report, reverse_doubling_report, DiskQuadrature, QuadratureSpec, Weight, DEFAULT_REVERSE_DOUBLING_MARGIN,
};
use crate::operators::{
    apply_k_alpha_at, factorization_check, gram_psd_check, k1_projection_discrepancy, norm_sandwich_check,
    DiscreteMeasure, KernelSpec,
};
use crate::report::Stage;

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_SEED: u64 = 20_240_601;
pub const BENCH_HEADER: &str = "n,dense_ms,dyadic_ms,ratio";

#[derive(Debug, Parser)]
#[command(name = "carleson-lab", version, about = "Numerical checks for Carleson measures of the Dirichlet space")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub options: Options,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Doubling and reverse-doubling reports for a weight.
    TestWeight,
    /// Carleson embedding constant and weak/strong tree embedding norms.
    Embedding,
    /// Two-weight testing constant and measured operator norms.
    TwoWeight,
    /// Full pipeline from hypotheses to the Carleson constant.
    Certify,
    /// Runs the invariant suite of one lemma.
    VerifyLemma { name: Lemma },
    /// Dense versus dyadic application timings.
    Bench,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Lemma {
    MeiCover,
    Sandwich,
    GramPsd,
    Domination,
    K1Projection,
    Factorization,
    WeakType,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct Options {
    #[arg(long, global = true, default_value = "lebesgue")]
    pub weight: String,
    #[arg(long, global = true, default_value = "lebesgue")]
    pub mu: String,
    #[arg(long, global = true, default_value = "lebesgue")]
    pub nu: String,
    #[arg(long, global = true, default_value_t = 2.0)]
    pub p: f64,
    #[arg(long, global = true, default_value_t = 2.0)]
    pub q: f64,
    #[arg(long, global = true, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, global = true, default_value_t = 12)]
    pub depth: u32,
    /// Quadrature depth; defaults to one more than `--depth`.
    #[arg(long, global = true)]
    pub quad_depth: Option<u32>,
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Node counts for `bench`; powers of two, at least 8.
    #[arg(long, global = true, value_delimiter = ',', default_values_t = [1024usize, 4096, 16384])]
    pub sizes: Vec<usize>,
}

/// Everything a run depends on, echoed into the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub lemma: Option<Lemma>,
    pub weight: String,
    pub mu: String,
    pub nu: String,
    pub p: f64,
    pub q: f64,
    pub alpha: f64,
    pub depth: u32,
    pub quad_depth: u32,
    pub samples: usize,
    pub seed: u64,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub sizes: Vec<usize>,
}

impl RunConfig {
    pub fn from_cli(cli: &Cli) -> Self {
        let o = &cli.options;
        let (command, lemma) = match &cli.command {
            Command::TestWeight => ("test-weight", None),
            Command::Embedding => ("embedding", None),
            Command::TwoWeight => ("two-weight", None),
            Command::Certify => ("certify", None),
            Command::VerifyLemma { name } => ("verify-lemma", Some(*name)),
            Command::Bench => ("bench", None),
        };
        let default_samples = match (command, lemma) {
            ("verify-lemma", Some(Lemma::MeiCover)) | ("verify-lemma", Some(Lemma::Domination)) => 10_000,
            ("verify-lemma", Some(Lemma::Sandwich)) => 50,
            ("verify-lemma", Some(Lemma::Factorization)) => 5,
            ("verify-lemma", _) | ("embedding", _) => 100,
            _ => 256,
        };
        RunConfig {
            command: command.to_string(),
            lemma,
            weight: o.weight.clone(),
            mu: o.mu.clone(),
            nu: o.nu.clone(),
            p: o.p,
            q: o.q,
            alpha: o.alpha,
            depth: o.depth,
            quad_depth: o.quad_depth.unwrap_or(o.depth + 1),
            samples: o.samples.unwrap_or(default_samples),
            seed: o.seed,
            format: o.format.unwrap_or(if command == "bench" { Format::Csv } else { Format::Json }),
            out: o.out.clone(),
            sizes: o.sizes.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: String,
    pub config: RunConfig,
    pub stages: Vec<Stage>,
    pub timings_ms: BTreeMap<String, f64>,
}

impl Report {
    pub fn verdict(&self) -> bool {
        self.stages.iter().all(|s| s.verdict)
    }

    pub fn exit_code(&self) -> i32 {
        if self.verdict() {
            0
        } else {
            1
        }
    }

    /// The report with timings cleared, for determinism checks.
    pub fn without_timings(&self) -> Report {
        Report {
            timings_ms: BTreeMap::new(),
            ..self.clone()
        }
    }
}

struct Timed {
    stages: Vec<Stage>,
    timings: BTreeMap<String, f64>,
    clock: Instant,
}

impl Timed {
    fn new() -> Self {
        Timed {
            stages: Vec::new(),
            timings: BTreeMap::new(),
            clock: Instant::now(),
        }
    }

    fn push(&mut self, stage: Stage) {
        self.timings
            .insert(stage.name.clone(), self.clock.elapsed().as_secs_f64() * 1e3);
        self.stages.push(stage);
        self.clock = Instant::now();
    }

    fn push_result(&mut self, name: &str, r: Result<Stage>) {
        self.push(r.unwrap_or_else(|e| Stage::failed(name, e)));
    }
}

fn parse_weight(spec: &str) -> Result<Weight> {
    spec.parse()
}

/// Validates the configuration; errors here are usage errors.
fn validate(cfg: &RunConfig) -> Result<()> {
    for s in [&cfg.weight, &cfg.mu, &cfg.nu] {
        parse_weight(s)?;
    }
    ExponentConfig::new(cfg.p, cfg.q, cfg.alpha)?;
    if cfg.depth == 0 || cfg.depth > 30 {
        return Err(Error::Argument(format!("depth {} outside [1, 30]", cfg.depth)));
    }
    if cfg.quad_depth == 0 || cfg.quad_depth > 40 {
        return Err(Error::Argument(format!("quadrature depth {} outside [1, 40]", cfg.quad_depth)));
    }
    if cfg.format == Format::Csv && cfg.command != "bench" {
        return Err(Error::Argument("csv output is only available for bench".into()));
    }
    if cfg.command == "bench" {
        if cfg.sizes.iter().any(|n| !n.is_power_of_two() || *n < 8) {
            return Err(Error::Argument("bench sizes must be powers of two, at least 8".into()));
        }
        if cfg.sizes.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Argument("bench sizes must be ascending".into()));
        }
    }
    Ok(())
}

/// Runs one configured command. `Err` means the configuration was unusable.
pub fn run(cfg: &RunConfig) -> Result<Report> {
    validate(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut t = Timed::new();
    match cfg.command.as_str() {
        "test-weight" => test_weight(cfg, &mut rng, &mut t)?,
        "embedding" => embedding(cfg, &mut rng, &mut t)?,
        "two-weight" => two_weight(cfg, &mut rng, &mut t)?,
        "certify" => {
            let w = parse_weight(&cfg.weight)?;
            let opts = PipelineOptions {
                depth: cfg.depth,
                quad_depth: cfg.quad_depth,
                random_arcs: cfg.samples,
                carleson: CarlesonOptions {
                    seed: cfg.seed,
                    ..Default::default()
                },
                seed: cfg.seed,
                ..Default::default()
            };
            let r = theorem_pipeline(&w, &opts);
            t.stages = r.stages;
            t.timings = r.timings_ms;
        }
        "verify-lemma" => {
            let lemma = cfg.lemma.ok_or_else(|| Error::Argument("verify-lemma needs a name".into()))?;
            verify_lemma(lemma, cfg, &mut rng, &mut t)?;
        }
        "bench" => {
            for &n in &cfg.sizes {
                let row = bench_size(n, cfg.alpha)?;
                t.push(
                    Stage::new(format!("bench-{n}"))
                        .constant("n", n as f64)
                        .witness(serde_json::json!({ "dense_ms": row.dense_ms, "dyadic_ms": row.dyadic_ms })),
                );
            }
        }
        other => return Err(Error::Argument(format!("unknown command `{other}`"))),
    }
    Ok(Report {
        schema_version: SCHEMA_VERSION,
        command: cfg.command.clone(),
        config: cfg.clone(),
        stages: t.stages,
        timings_ms: t.timings,
    })
}

fn quadrature(depth: u32) -> Result<DiskQuadrature> {
    DiskQuadrature::new(QuadratureSpec::new(depth, 8))
}

/// Checks that integrate analytic kernels need many sectors in the inner
/// strata, where 8 sectors would alias `(z ū)^8` into the result.
pub const KERNEL_ANGULAR_BASE: u32 = 64;

fn kernel_quadrature(depth: u32) -> Result<DiskQuadrature> {
    DiskQuadrature::new(QuadratureSpec::new(depth, KERNEL_ANGULAR_BASE))
}

fn test_weight(cfg: &RunConfig, rng: &mut ChaCha8Rng, t: &mut Timed) -> Result<()> {
    let w = parse_weight(&cfg.weight)?;
    let quad = match quadrature(cfg.quad_depth) {
        Ok(q) => q,
        Err(e) => {
            t.push(Stage::failed("quadrature", e));
            return Ok(());
        }
    };
    t.push_result(
        "doubling",
        doubling_report(&w, cfg.samples, &quad, rng).map(|r| {
            Stage::new("doubling")
                .constant("c_hat", r.c_hat)
                .verdict(r.c_hat.is_finite())
                .witness(&r)
        }),
    );
    t.push_result(
        "reverse-doubling",
        reverse_doubling_report(&w, cfg.depth, cfg.samples, Some(&quad), DEFAULT_REVERSE_DOUBLING_MARGIN, rng).map(
            |r| {
                Stage::new("reverse-doubling")
                    .constant("delta_hat", r.delta_hat)
                    .verdict(r.verdict)
                    .witness(&r)
            },
        ),
    );
    Ok(())
}

fn embedding(cfg: &RunConfig, rng: &mut ChaCha8Rng, t: &mut Timed) -> Result<()> {
    let w = parse_weight(&cfg.weight)?;
    let exps = ExponentConfig::new(cfg.p, cfg.q, cfg.alpha)?;
    let tt = exps.t();
    let depth = cfg.depth.min(cfg.quad_depth);
    let quad = match quadrature(cfg.quad_depth) {
        Ok(q) => q,
        Err(e) => {
            t.push(Stage::failed("quadrature", e));
            return Ok(());
        }
    };
    let c1 = carleson_embedding_constant(&w, tt, depth, Some(&quad));
    let c1_hat = c1.as_ref().map(|r| r.c1_hat).unwrap_or(f64::NAN);
    t.push_result(
        "carleson-embedding",
        c1.map(|r| {
            Stage::new("carleson-embedding")
                .constant("c1_hat", r.c1_hat)
                .constant("tail_estimate", r.tail_estimate)
                .verdict(r.c1_hat.is_finite())
                .witness(&r)
        }),
    );
    let masses = quad.cell_masses(&w);
    let draws: Vec<Vec<f64>> = (0..cfg.samples).map(|i| random_nonnegative(&quad, i, rng)).collect();
    let weak = || -> Result<Stage> {
        let bound = c1_hat.powf(1.0 / tt);
        let (mut worst, mut violations) = (0.0f64, 0usize);
        for f in &draws {
            let l1: f64 = f.iter().zip(&masses).map(|(a, b)| a * b).sum();
            let v = weak_type_norm(&w, tt, f, depth, &quad)?;
            if l1 > 0.0 {
                worst = worst.max(v / l1);
            }
            if v > bound * l1 * (1.0 + 1e-9) {
                violations += 1;
            }
        }
        Ok(Stage::new("weak-type")
            .constant("max_ratio", worst)
            .constant("bound", bound)
            .constant("violations", violations as f64)
            .verdict(violations == 0))
    };
    t.push_result("weak-type", weak());
    let strong = || -> Result<Stage> {
        let mut worst = 0.0f64;
        for f in &draws {
            worst = worst.max(strong_embedding_check(&w, &exps, f, depth, &quad)?);
        }
        Ok(Stage::new("strong-embedding")
            .constant("max_ratio", worst)
            .verdict(worst.is_finite()))
    };
    t.push_result("strong-embedding", strong());
    Ok(())
}

fn two_weight(cfg: &RunConfig, rng: &mut ChaCha8Rng, t: &mut Timed) -> Result<()> {
    let nu = parse_weight(&cfg.nu)?;
    let mu = parse_weight(&cfg.mu)?;
    let exps = ExponentConfig::new(cfg.p, cfg.q, cfg.alpha)?;
    let quad = if nu.is_radial() && mu.is_radial() {
        None
    } else {
        match quadrature(cfg.quad_depth) {
            Ok(q) => Some(q),
            Err(e) => {
                t.push(Stage::failed("quadrature", e));
                return Ok(());
            }
        }
    };
    let depth = cfg.depth.min(cfg.quad_depth);
    t.push_result(
        "two-weight-testing",
        two_weight_testing_constant(&nu, &mu, &exps, depth, quad.as_ref(), cfg.samples, rng).map(|r| {
            Stage::new("two-weight-testing")
                .constant("sup_value", r.sup_value)
                .verdict(r.sup_value.is_finite())
                .witness(&r)
        }),
    );
    let top = cfg.quad_depth.min(10);
    let depths: Vec<u32> = [top.saturating_sub(4), top.saturating_sub(2), top]
        .into_iter()
        .filter(|d| *d >= 1)
        .collect();
    t.push_result(
        "two-weight-norm",
        two_weight_norm_check(&nu, &mu, &exps, &depths, 8, cfg.samples, cfg.seed).map(|r| {
            let last = r.levels.last();
            Stage::new("two-weight-norm")
                .constant("dense_norm", last.map_or(f64::NAN, |l| l.dense.value))
                .constant("dyadic_norm_0", last.map_or(f64::NAN, |l| l.dyadic[0].value))
                .constant("dyadic_norm_1_3", last.map_or(f64::NAN, |l| l.dyadic[1].value))
                .verdict(r.verdict)
                .witness(&r)
        }),
    );
    Ok(())
}

fn random_point<R: Rng + ?Sized>(rng: &mut R, max_radius: f64) -> Complex64 {
    Complex64::from_polar(max_radius * rng.random::<f64>().sqrt(), TAU * rng.random::<f64>())
}

fn verify_lemma(lemma: Lemma, cfg: &RunConfig, rng: &mut ChaCha8Rng, t: &mut Timed) -> Result<()> {
    match lemma {
        Lemma::MeiCover => {
            let mut failures = 0usize;
            let mut worst = 0.0f64;
            for _ in 0..cfg.samples {
                let len = (-20.0 * rng.random::<f64>()).exp2();
                let arc = Arc::new(TAU * rng.random::<f64>(), len)?;
                let cover = mei_cover(&arc).arc();
                worst = worst.max(cover.len() / len);
                if !cover.contains_arc(&arc) || cover.len() > 6.0 * len * (1.0 + 1e-12) {
                    failures += 1;
                }
            }
            // the fallback: any arc longer than 1/6 is covered by the full circle
            let long = Arc::new(1.0, 0.2)?;
            let fallback_ok = mei_cover(&long).arc().contains_arc(&long);
            t.push(
                Stage::new("mei-cover")
                    .constant("failures", failures as f64)
                    .constant("max_length_ratio", worst)
                    .verdict(failures == 0 && fallback_ok),
            );
        }
        Lemma::Sandwich => {
            let mut failures = 0usize;
            let (mut max_lower, mut max_upper) = (0.0f64, 0.0f64);
            for i in 0..cfg.samples {
                let n = rng.random_range(1..=60);
                let atoms = (0..n)
                    .map(|_| (random_point(rng, 0.98), 0.05 + rng.random::<f64>()))
                    .collect();
                let m = DiscreteMeasure::new(atoms)?;
                let spec = if i % 2 == 0 {
                    KernelSpec::Dirichlet
                } else {
                    KernelSpec::KAlpha { alpha: 1.0 }
                };
                let r = norm_sandwich_check(&spec, &m)?;
                max_lower = max_lower.max(r.lower_ratio);
                max_upper = max_upper.max(r.upper_ratio);
                if !(r.lower_ok && r.upper_ok) {
                    failures += 1;
                }
            }
            t.push(
                Stage::new("sandwich")
                    .constant("failures", failures as f64)
                    .constant("max_lower_ratio", max_lower)
                    .constant("max_upper_ratio", max_upper)
                    .verdict(failures == 0),
            );
        }
        Lemma::GramPsd => {
            let mut failures = 0usize;
            let mut worst = f64::INFINITY;
            for _ in 0..cfg.samples {
                let n = rng.random_range(1..=100);
                let pts: Vec<Complex64> = (0..n).map(|_| random_point(rng, 0.99)).collect();
                let r = gram_psd_check(&pts, &KernelSpec::Dirichlet)?;
                worst = worst.min(r.min_eigenvalue / r.trace);
                if !r.ok {
                    failures += 1;
                }
            }
            t.push(
                Stage::new("gram-psd")
                    .constant("failures", failures as f64)
                    .constant("min_relative_eigenvalue", worst)
                    .verdict(failures == 0),
            );
        }
        Lemma::Domination => {
            let r = domination_check(cfg.alpha, cfg.samples, cfg.depth, rng)?;
            t.push(
                Stage::new("domination")
                    .constant("c_hat", r.c_hat)
                    .constant("failures", r.failures as f64)
                    .verdict(r.failures == 0 && r.c_hat.is_finite())
                    .witness(&r),
            );
        }
        Lemma::K1Projection => {
            let quad = kernel_quadrature(cfg.quad_depth.min(12))?;
            let points: Vec<Complex64> = (0..cfg.samples.min(64)).map(|_| random_point(rng, 0.9)).collect();
            let tests: [(&str, fn(Complex64) -> Complex64); 3] = [
                ("conj", |z| z.conj()),
                ("abs2", |z| Complex64::new(z.norm_sqr(), 0.0)),
                ("conj_z2", |z| z.conj() * z * z),
            ];
            let mut stage = Stage::new("k1-projection");
            let mut worst = 0.0f64;
            for (name, f) in tests {
                let d = k1_projection_discrepancy(&quad.sample(f), &quad, &points, 8)?;
                worst = worst.max(d);
                stage = stage.constant(name, d);
            }
            t.push(stage.constant("max_discrepancy", worst).verdict(worst <= 1e-4));
        }
        Lemma::Factorization => {
            let quad = kernel_quadrature(cfg.quad_depth.min(12))?;
            let mut worst = 0.0f64;
            for _ in 0..cfg.samples {
                let atoms = (0..5).map(|_| (random_point(rng, 0.9), 1.0)).collect();
                worst = worst.max(factorization_check(&DiscreteMeasure::new(atoms)?, &quad).max_error);
            }
            t.push(
                Stage::new("factorization")
                    .constant("max_error", worst)
                    .verdict(worst <= 1e-3),
            );
        }
        Lemma::WeakType => {
            let w = parse_weight(&cfg.weight)?;
            let tt = cfg.q / cfg.p;
            let depth = cfg.depth.min(cfg.quad_depth).min(10);
            let quad = quadrature(depth)?;
            let c1 = carleson_embedding_constant(&w, tt, depth, Some(&quad))?;
            let masses = quad.cell_masses(&w);
            let bound = c1.c1_hat.powf(1.0 / tt);
            let (mut violations, mut worst) = (0usize, 0.0f64);
            for i in 0..cfg.samples {
                let f = random_nonnegative(&quad, i, rng);
                let l1: f64 = f.iter().zip(&masses).map(|(a, b)| a * b).sum();
                let v = weak_type_norm(&w, tt, &f, depth, &quad)?;
                if l1 > 0.0 {
                    worst = worst.max(v / (bound * l1));
                }
                if v > bound * l1 * (1.0 + 1e-9) {
                    violations += 1;
                }
            }
            t.push(
                Stage::new("weak-type")
                    .constant("c1_hat", c1.c1_hat)
                    .constant("violations", violations as f64)
                    .constant("max_ratio_to_bound", worst)
                    .verdict(violations == 0),
            );
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BenchRow {
    pub n: usize,
    pub dense_ms: f64,
    pub dyadic_ms: f64,
}

impl BenchRow {
    pub fn ratio(&self) -> f64 {
        self.dense_ms / self.dyadic_ms
    }

    pub fn csv(&self) -> String {
        format!("{},{:.3},{:.3},{:.3}", self.n, self.dense_ms, self.dyadic_ms, self.ratio())
    }
}

/// Times one dense `K_α` application and one pair of dyadic applications on a
/// quadrature with exactly `n` nodes.
pub fn bench_size(n: usize, alpha: f64) -> Result<BenchRow> {
    if !n.is_power_of_two() || n < 8 {
        return Err(Error::Argument(format!("bench size {n} must be a power of two >= 8")));
    }
    let depth = n.trailing_zeros() - 2;
    let quad = DiskQuadrature::new(QuadratureSpec::new(depth, 4).with_radial_level(0))?;
    debug_assert_eq!(quad.len(), n);
    let f: Vec<f64> = quad.nodes().map(|z| 1.0 + z.re * z.re).collect();
    let fc: Vec<Complex64> = f.iter().map(|v| Complex64::new(*v, 0.0)).collect();
    let nodes: Vec<Complex64> = quad.nodes().collect();

    let start = Instant::now();
    let dense = apply_k_alpha_at(alpha, &fc, &quad, &nodes);
    let dense_ms = start.elapsed().as_secs_f64() * 1e3;
    std::hint::black_box(dense);

    let start = Instant::now();
    for grid in Grid::BOTH {
        std::hint::black_box(dyadic_apply(grid, alpha, &f, &quad, depth)?);
    }
    let dyadic_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(BenchRow { n, dense_ms, dyadic_ms })
}

/// Renders the bench stages of a report as CSV with [`BENCH_HEADER`].
pub fn bench_csv(report: &Report) -> String {
    let mut out = String::from(BENCH_HEADER);
    out.push('\n');
    for s in &report.stages {
        let n = s.constants.get("n").copied().unwrap_or(0.0) as usize;
        let ms = |k: &str| s.witness.get(k).and_then(|v| v.as_f64()).unwrap_or(f64::NAN);
        let row = BenchRow {
            n,
            dense_ms: ms("dense_ms"),
            dyadic_ms: ms("dyadic_ms"),
        };
        out.push_str(&row.csv());
        out.push('\n');
    }
    out
}

pub fn render(report: &Report) -> String {
    match report.config.format {
        Format::Json => serde_json::to_string_pretty(report).expect("reports serialize") + "\n",
        Format::Csv => bench_csv(report),
    }
}

/// Parses arguments, runs, writes the output and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Some(n) = cli.options.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return 2;
        }
    }
    let cfg = RunConfig::from_cli(&cli);
    let report = match run(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let text = render(&report);
    let written = match &cfg.out {
        Some(path) => std::fs::write(path, &text),
        None => std::io::stdout().write_all(text.as_bytes()),
    };
    if let Err(e) = written {
        eprintln!("error: cannot write output: {e}");
        return 2;
    }
    report.exit_code()
}
