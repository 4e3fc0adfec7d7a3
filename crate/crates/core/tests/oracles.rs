use carleson_core::dirichlet::{monomial_gram, theorem_pipeline, PipelineOptions};
use carleson_core::geometry::Grid;
use carleson_core::measures::{BoxTree, DiskQuadrature, GridDensity, QuadratureSpec, Weight};
use carleson_core::operators::monomial_diagonalization_error;
use carleson_core::Complex64;

/// `∫_{1-s}^1 (1-r)^a 2r dr`
fn radial_power_shell(a: f64, s: f64) -> f64 {
    2.0 * (s.powf(a + 1.0) / (a + 1.0) - s.powf(a + 2.0) / (a + 2.0))
}

#[test]
fn dirichlet_operator_diagonalizes_monomials() {
    let quad = DiskQuadrature::new(QuadratureSpec::new(12, 64).with_radial_level(12)).unwrap();
    let points: Vec<Complex64> = (0..12)
        .map(|k| Complex64::from_polar(0.1 + 0.07 * k as f64, 0.9 * k as f64))
        .collect();
    for n in 0..=16 {
        let err = monomial_diagonalization_error(n, &quad, &points);
        assert!(err <= 1e-6, "n = {n}: {err:e}");
    }
}

#[test]
fn quadrature_box_masses_match_closed_forms() {
    let depth = 12;
    let quad = DiskQuadrature::new(QuadratureSpec::new(depth, 8).both_grids()).unwrap();
    for w in [Weight::Lebesgue, Weight::RadialPower(1.0), Weight::RadialPower(2.5)] {
        let a = w.radial_exponent();
        let masses = quad.cell_masses(&w);
        for grid in Grid::BOTH {
            let tree = BoxTree::from_cells(&quad, grid, depth, &masses).unwrap();
            for j in 0..=depth {
                let l = (-(j as f64)).exp2();
                let exact = l * radial_power_shell(a, l);
                for (k, v) in tree.level(j).iter().enumerate() {
                    assert!(
                        (v - exact).abs() <= 1e-9 * exact,
                        "{w} {grid} level {j} box {k}: {v} vs {exact}"
                    );
                }
            }
        }
    }
}

#[test]
fn monomial_gram_is_diagonal_for_radial_weights() {
    // ∫ |z|^{2n} (1 - |z|) dA / (n + 1) = (1/(n+1) - 2/(2n+3)) / (n + 1)
    let quad = DiskQuadrature::new(QuadratureSpec::new(10, 64).with_radial_level(10)).unwrap();
    let g = monomial_gram(&Weight::RadialPower(1.0), &quad, 12);
    for m in 0..=12 {
        for n in 0..=12 {
            let v = g[(m, n)];
            if m == n {
                let k = n as f64;
                let exact = (1.0 / (k + 1.0) - 2.0 / (2.0 * k + 3.0)) / (k + 1.0);
                assert!((v.re - exact).abs() <= 1e-3 * exact, "({m},{n}) {v} vs {exact}");
            } else {
                assert!(v.norm() <= 1e-12, "({m},{n}) {v}");
            }
        }
    }
}

#[test]
fn pipeline_rejects_a_thin_shell() {
    let shell = GridDensity::from_fn(64, 16, "shell", |r, _| if r > 0.97 { 1.0 } else { 0.0 }).unwrap();
    let opts = PipelineOptions {
        depth: 6,
        quad_depth: 8,
        random_arcs: 32,
        norm_depths: vec![4, 6],
        ..PipelineOptions::default()
    };
    let report = theorem_pipeline(&Weight::sampled(shell), &opts);
    assert!(!report.verdict);
    assert!(!report.hypotheses_hold);
    let reverse = report.stages.iter().find(|s| s.name == "reverse-doubling").unwrap();
    assert!(!reverse.verdict);
    assert!(reverse.constants["delta_hat"] > 0.99);
}

#[test]
fn lebesgue_quadrature_reproduces_unit_area() {
    let quad = DiskQuadrature::new(QuadratureSpec::new(10, 8)).unwrap();
    let total: f64 = quad.areas().iter().sum();
    assert!((total - 1.0).abs() < 1e-12);
    let angular: f64 = quad.cells().iter().map(|c| (c.a1 - c.a0) * (c.r1 * c.r1 - c.r0 * c.r0)).sum();
    assert!((angular - 1.0).abs() < 1e-12, "{angular}");
}
