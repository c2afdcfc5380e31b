use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use vem_bc::basis::{BasisMode, EdgePolyBasis};
use vem_bc::curved::{correction_blocks, delta, tau_report, CorrectionConfig, LevelSet, LevelSetDomain, SigmaStrategy};
use vem_bc::element::{ElementOptions, Stabilization, VemSpace};
use vem_bc::geometry::{
    build_disk_approx_mesh, build_squares_approx_mesh, build_structured_mesh, build_voronoi_mesh, edge_quadrature,
    ConvexPolygon, Rectangle,
};
use vem_bc::linalg::schur_condense_bh;
use vem_bc::study::Manufactured;
use vem_bc::weak_bc::{assemble_bh, assemble_nitsche, BoundaryNorms, MultiplierOrder, MultiplierSpace, WeakBcConfig};
use vem_bc::Point;

fn square_space(n: usize, k: usize) -> VemSpace {
    let m = build_structured_mesh(Rectangle::unit_square(), n, n).unwrap();
    VemSpace::new(m, ElementOptions::new(k, Stabilization::DRecipe)).unwrap()
}

fn disk_space(n: usize, k: usize) -> VemSpace {
    let m = build_disk_approx_mesh(&LevelSetDomain::unit_circle(), n, 2).unwrap();
    VemSpace::new(m, ElementOptions::new(k, Stabilization::DRecipe)).unwrap()
}

fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    a.clone().symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

#[test]
fn nitsche_definiteness_grows_with_gamma() {
    for k in 1..=2 {
        let space = square_space(2, k);
        let ones = space.interpolate(&|_| 1.0);
        let v = &ones / ones.norm();
        let n = v.len();
        let p = DMatrix::identity(n, n) - &v * v.transpose();
        let mut prev = f64::NEG_INFINITY;
        for gamma in [10.0, 100.0, 1000.0] {
            let sys = assemble_nitsche(&space, &WeakBcConfig::nitsche(k, gamma), &|_| 0.0, &|_| 0.0).unwrap();
            let a = sys.matrix.to_dense();
            // the constant direction is shifted away from the bottom of the spectrum
            let restricted = &p * a * &p + &v * v.transpose() * 1e12;
            let lmin = min_eigenvalue(&restricted);
            assert!(lmin >= prev * (1.0 - 1e-12), "k={k} gamma={gamma}: {lmin} < {prev}");
            prev = lmin;
        }
        assert!(prev > 0.0);
    }
}

#[test]
fn condensation_with_lower_multiplier_order_runs() {
    let space = square_space(3, 2);
    let f = |x: Point| x.x + 1.0;
    let g = |x: Point| (2.0 * x.y).sin();
    let bh = WeakBcConfig::barbosa_hughes(2, 1e-3, MultiplierOrder::KMinus1);
    let mult = MultiplierSpace::new(space.mesh(), bh.multiplier_order());
    let a = assemble_bh(&space, &mult, &bh, &f, &g).unwrap();
    let c = schur_condense_bh(&a).unwrap();
    let n = assemble_nitsche(&space, &WeakBcConfig::nitsche(2, 1e3), &f, &g).unwrap();
    let diff = c.matrix.max_abs_diff(&n.matrix) / n.matrix.max_abs();
    println!("k'=k-1 condensed BH vs Nitsche: relative max difference {diff:.3e}");
    assert!(diff.is_finite() && diff > 1e-8);
}

#[test]
fn delta_is_continuous_along_edges() {
    let space = disk_space(24, 3);
    let circle = LevelSetDomain::unit_circle();
    for strategy in [SigmaStrategy::EdgeNormal, SigmaStrategy::DistanceGradient] {
        let cfg = CorrectionConfig::with_kstar(1, strategy);
        let blocks = correction_blocks(&space, &circle, &cfg, 8).unwrap();
        let mut c_est = 0.0f64;
        for b in &blocks {
            for i in 1..b.points.len() {
                let jump = (b.deltas[i] - b.deltas[i - 1]).abs();
                c_est = c_est.max(jump / (b.points[i] - b.points[i - 1]).norm());
            }
        }
        println!("delta continuity constant ({strategy:?}): {c_est:.3}");
        assert!(c_est <= 1.0);
    }
}

#[test]
fn correction_reproduces_taylor_sums_of_polynomials() {
    let circle = LevelSetDomain::unit_circle();
    for k in 1..=4 {
        let space = disk_space(16, k);
        let p = Manufactured::polynomial(k);
        let u = space.interpolate(&|x| (p.u)(x));
        let cfg = CorrectionConfig::with_kstar(k, SigmaStrategy::EdgeNormal);
        for b in correction_blocks(&space, &circle, &cfg, 2 * k + 2).unwrap() {
            let local = space.dofs().local(b.cell, &u);
            let cu = &b.operator * local;
            for (q, &x) in b.points.iter().enumerate() {
                // exact oracle: a polynomial of degree k equals its Taylor sum
                let exact = (p.u)(x + b.sigma * b.deltas[q]) - (p.u)(x);
                assert!((cu[q] - exact).abs() <= 1e-10, "k={k}: {} vs {exact}", cu[q]);
            }
        }
    }
}

#[test]
fn correction_consistency_slope() {
    // u = exp(x + 2y): d_sigma^j u = (sigma . (1, 2))^j u
    let circle = LevelSetDomain::unit_circle();
    let cfg = CorrectionConfig::default();
    let u = |x: Point| (x.x + 2.0 * x.y).exp();
    for kstar in 0..=3usize {
        let mut pts = Vec::new();
        for n in [8usize, 16, 32, 64] {
            let t = std::f64::consts::PI / n as f64;
            let x = Point::new(t.cos(), 0.3 * t.sin());
            let sigma = Point::new(1.0, 0.0);
            let d = delta(&circle, 0, x, sigma, 1.0, &cfg).unwrap();
            let s = sigma.dot(&Point::new(1.0, 2.0));
            let mut taylor = 0.0;
            let mut fact = 1.0;
            for j in 0..=kstar {
                if j > 0 {
                    fact *= j as f64;
                }
                taylor += d.powi(j as i32) / fact * s.powi(j as i32) * u(x);
            }
            pts.push((d, (u(x + sigma * d) - taylor).abs()));
        }
        let (d0, e0) = pts[pts.len() - 2];
        let (d1, e1) = pts[pts.len() - 1];
        let slope = (e0 / e1).ln() / (d0 / d1).ln();
        assert!((slope - (kstar as f64 + 1.0)).abs() <= 0.2, "k*={kstar}: slope {slope}");
    }
}

#[test]
fn tau_decreases_with_boundary_refinement() {
    let quarter = LevelSetDomain::unit_quarter_disk();
    let cfg = CorrectionConfig::with_kstar(2, SigmaStrategy::DistanceGradient);
    for base in [4usize, 8] {
        let mut prev = f64::INFINITY;
        for steps in 0..5 {
            let m = build_squares_approx_mesh(&quarter, base, steps).unwrap().mesh;
            let t = tau_report(&quarter, &m, &cfg, 6).unwrap().tau;
            assert!(t < prev, "base {base} steps {steps}: {t} vs {prev}");
            prev = t;
        }
    }
}

#[test]
fn inscribed_vertices_are_inside() {
    let circle = LevelSetDomain::unit_circle();
    let m = build_disk_approx_mesh(&circle, 40, 4).unwrap();
    assert!(m.vertices().iter().all(|&x| circle.value(x) < 1e-12));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn duality_bound(seed in 0u64..1000, k in 0usize..4) {
        let sq = ConvexPolygon { vertices: vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]] };
        let mesh = build_voronoi_mesh(&sq, 12, 1, seed).unwrap();
        let edges = mesh.boundary_edges().to_vec();
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let dim = k + 1;
        let bases: Vec<EdgePolyBasis> = edges.iter().map(|&e| EdgePolyBasis::for_edge(&mesh, e, k, BasisMode::Orthonormal)).collect();
        let lam: Vec<DVector<f64>> = edges.iter().map(|_| DVector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0))).collect();
        let phi: Vec<DVector<f64>> = edges.iter().map(|_| DVector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0))).collect();
        let idx = |e: usize| edges.iter().position(|&f| f == e).unwrap();
        let lv = |e: usize, x: Point| bases[idx(e)].eval_at(x).dot(&lam[idx(e)]);
        let pv = |e: usize, x: Point| bases[idx(e)].eval_at(x).dot(&phi[idx(e)]);
        let pairing: f64 = edges.iter().map(|&e| edge_quadrature(&mesh, e, 2 * k + 2).integrate(|x| lv(e, x) * pv(e, x))).sum();
        let norms = BoundaryNorms::new(&mesh, 2 * k + 2);
        let bound = norms.minus_half(&mesh, &lv) * norms.plus_half(&mesh, &pv);
        prop_assert!(pairing.abs() <= bound * (1.0 + 1e-12));
        prop_assert!(norms.minus_half(&mesh, &lv) > 0.0 && norms.plus_half(&mesh, &pv) > 0.0);
    }

    #[test]
    fn condensation_matches_nitsche(seed in 0u64..1000, k in 1usize..=3, log_alpha in -4.0f64..-1.0) {
        let sq = ConvexPolygon { vertices: vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]] };
        let mesh = build_voronoi_mesh(&sq, 8, 1, seed).unwrap();
        let space = VemSpace::new(mesh, ElementOptions::new(k, Stabilization::Euclidean)).unwrap();
        let alpha = 10f64.powf(log_alpha);
        let f = |x: Point| x.x * x.y;
        let g = |x: Point| (x.x - 2.0 * x.y).cos();
        let mult = MultiplierSpace::new(space.mesh(), k);
        let a = assemble_bh(&space, &mult, &WeakBcConfig::barbosa_hughes(k, alpha, MultiplierOrder::K), &f, &g).unwrap();
        let c = schur_condense_bh(&a).unwrap();
        let n = assemble_nitsche(&space, &WeakBcConfig::nitsche(k, 1.0 / alpha), &f, &g).unwrap();
        prop_assert!(c.matrix.max_abs_diff(&n.matrix) <= 1e-10 * n.matrix.max_abs());
        prop_assert!((&c.rhs - &n.rhs).amax() <= 1e-10 * n.rhs.amax().max(1.0));
    }
}
