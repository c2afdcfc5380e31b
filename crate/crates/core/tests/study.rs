use vem_bc::element::{ElementOptions, Stabilization, VemSpace};
use vem_bc::geometry::{build_structured_mesh, cell_quadrature, Rectangle};
use vem_bc::study::cli::cli_main;
use vem_bc::study::{
    compute_errors, estimate_rates, run_study, Manufactured, MeshFamily, ProblemName, ProblemSpec, E0_NOTE,
};
use vem_bc::weak_bc::{MultiplierOrder, WeakBcConfig};
use vem_bc::Point;

#[test]
fn reference_rates_are_reproduced() {
    // (error pair, mean-diameter pair, reference rate)
    let cases = [([4.185013e-04, 2.072005e-05], [5.614744e-01, 2.720203e-01], 4.147400)];
    for (e, h, r) in cases {
        let got = estimate_rates(&e, &h).unwrap()[0].unwrap();
        assert!((got - r).abs() <= 1e-5, "{got} vs {r}");
    }
}

#[test]
fn error_metric_matches_direct_quadrature() {
    let k = 2;
    let mesh = build_structured_mesh(Rectangle::unit_square(), 3, 3).unwrap();
    let space = VemSpace::new(mesh, ElementOptions::new(k, Stabilization::DRecipe)).unwrap();
    let p = Manufactured::polynomial(k);
    let uh = space.interpolate(&|x| (p.u)(x));
    let u = |x: Point| (p.u)(x) + 0.1 * (x.x * 3.0).sin();
    let grad = |x: Point| (p.grad)(x) + Point::new(0.3 * (x.x * 3.0).cos(), 0.0);
    let e = compute_errors(&space, &uh, &u, &grad).unwrap();
    let (mut d0, mut n0) = (0.0, 0.0);
    for c in 0..space.mesh().num_cells() {
        let q = cell_quadrature(space.mesh(), c, 2 * k + 2).unwrap();
        d0 += q.integrate(|x| (u(x) - (p.u)(x)).powi(2));
        n0 += q.integrate(|x| u(x).powi(2));
    }
    assert!((e.e0 - (d0 / n0).sqrt()).abs() <= 1e-10);
}

fn small_spec() -> ProblemSpec {
    let m = WeakBcConfig::barbosa_hughes(2, 1e-3, MultiplierOrder::KMinus1);
    ProblemSpec::new(ProblemName::Test1, m, MeshFamily::Voronoi { base_seeds: 8, lloyd_iters: 3 })
}

#[test]
fn reports_are_reproducible() {
    let a = run_study(&small_spec(), 3).unwrap().without_timings().to_json().unwrap();
    let b = run_study(&small_spec(), 3).unwrap().without_timings().to_json().unwrap();
    assert_eq!(a, b);
}

#[test]
fn csv_has_the_table_layout() {
    let r = run_study(&small_spec(), 2).unwrap();
    let csv = r.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "mesh,N_P,h,hbar,e1,ecr,e0,ecr");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].ends_with(",-") && !lines[2].ends_with(",-"));
}

#[test]
fn cli_writes_a_json_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let code = cli_main([
        "vem-study",
        "--problem",
        "disk",
        "--order",
        "2",
        "--correction",
        "on",
        "--levels",
        "4",
        "--condest",
        "--export-matrix",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let levels = v["levels"].as_array().unwrap();
    assert_eq!(levels.len(), 4);
    assert!(levels.iter().all(|l| l["error"].is_null() && l["condest"].as_f64().unwrap() > 1.0));
    assert_eq!(v["rates"]["e1"].as_array().unwrap().len(), 3);
    assert_eq!(v["config"]["correction"]["kstar"], 1);
    assert_eq!(v["notes"][0], E0_NOTE);
    for l in 0..4 {
        assert!(dir.path().join(format!("report_level{l}.mtx")).exists());
    }
}

#[test]
fn cli_usage_errors() {
    assert_eq!(cli_main(["vem-study", "--method", "bh", "--gamma", "10"]), 2);
    assert_eq!(cli_main(["vem-study", "--method", "bh", "--kprime", "k-1", "--order", "1"]), 2);
    assert_eq!(cli_main(["vem-study", "--mesh", "squares"]), 2);
    assert_eq!(cli_main(["vem-study", "--refine-steps", "2"]), 2);
    assert_eq!(cli_main(["vem-study", "--levels", "0"]), 2);
}
