use std::process::Command;
use std::sync::{Arc, OnceLock};

use polydiv::catalog::lookup;
use polydiv::elements::{assemble_transfer, classify_degenerate, dof_set, dof_set_unchecked, tune_basis, Config, ElementConfig};
use polydiv::geometry::{Point2, Polygon};
use polydiv::harness::{cmd_element, run_study, ElementRequest, StudyConfig};
use polydiv::hdiv_basis::{canonical_basis, edge_samples, CanonicalBasis, HdivSpaceKind, Role, SpaceFamily};
use polydiv::poisson::{triangulate, BoundaryData, CornerRule, FeDegree, PoissonSolver, Source};
use polydiv::polyfam::{space_dimension, SpaceSpec};
use polydiv::quadrature::{gauss_legendre, interval_integral, triangle_rule};
use polydiv::rt_classical::{in_rt_space, piola, rt_basis, ElementMap, PolyVec2, RtShape, RtVariant};
use proptest::prelude::*;

fn polygon(key: &str) -> Polygon {
    lookup(key).unwrap().polygon()
}

fn build(key: &str, family: SpaceFamily, k: usize, divisions: f64) -> CanonicalBasis {
    let p = polygon(key);
    let mesh = Arc::new(triangulate(&p, p.diameter / divisions).unwrap());
    canonical_basis(&p, HdivSpaceKind::new(family, k), mesh).unwrap()
}

fn hexagon_solver() -> &'static (Polygon, PoissonSolver) {
    static S: OnceLock<(Polygon, PoissonSolver)> = OnceLock::new();
    S.get_or_init(|| {
        let p = polygon("fig165");
        let mesh = Arc::new(triangulate(&p, p.diameter / 10.0).unwrap());
        let s = PoissonSolver::new(mesh, FeDegree::Quadratic, CornerRule::Average).unwrap();
        (p, s)
    })
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gauss_legendre_exact_to_its_degree(n in 1usize..12, m in 0u32..23, a in -2.0f64..2.0, w in 0.1f64..3.0) {
        prop_assume!(m as usize <= 2 * n - 1);
        let b = a + w;
        let got = interval_integral(|x| x.powi(m as i32), a, b, n);
        let want = (b.powi(m as i32 + 1) - a.powi(m as i32 + 1)) / (m as f64 + 1.0);
        prop_assert!((got - want).abs() <= 1e-11 * want.abs().max(1.0));
    }

    #[test]
    fn triangle_rule_exact_on_monomials(deg in 1usize..12, a in 0u32..12, b in 0u32..12) {
        prop_assume!((a + b) as usize <= deg);
        let r = triangle_rule(deg);
        let got: f64 = r.points.iter().zip(&r.weights).map(|(&(x, y), w)| w * x.powi(a as i32) * y.powi(b as i32)).sum();
        let want = factorial(a) * factorial(b) / factorial(a + b + 2);
        prop_assert!((got - want).abs() < 1e-13);
    }

    #[test]
    fn reduced_and_classical_dimensions(n in 3usize..16, k in 0usize..6) {
        let classical = space_dimension(SpaceSpec::HkClassical { n, k }).unwrap();
        let reduced = space_dimension(SpaceSpec::HkReduced { n, k }).unwrap();
        prop_assert_eq!(classical - reduced, 2 * n);
        prop_assert_eq!(HdivSpaceKind::new(SpaceFamily::ReducedNatural, k).dimension(n), reduced);
    }

    #[test]
    fn rt_combinations_stay_in_space(k in 0usize..4, quad in any::<bool>(), seed in prop::collection::vec(-1.0f64..1.0, 40)) {
        let shape = if quad { RtShape::Quad } else { RtShape::Triangle };
        let basis = rt_basis(shape, k, RtVariant::Global);
        prop_assert_eq!(basis.len(), shape.dimension(k));
        let mut q = PolyVec2::new(Default::default(), Default::default());
        for (f, &c) in basis.functions().iter().zip(seed.iter().cycle()) {
            q = q.add(f, c);
        }
        prop_assert!(in_rt_space(shape, k, &q, 1e-9));
    }

    #[test]
    fn piola_evaluates_consistently(b00 in -2.0f64..2.0, b01 in -2.0f64..2.0, b10 in -2.0f64..2.0, b11 in -2.0f64..2.0,
                                    rx in 0.0f64..0.5, ry in 0.0f64..0.5) {
        prop_assume!((b00 * b11 - b01 * b10).abs() > 0.1);
        let map = ElementMap::Affine { b: [[b00, b01], [b10, b11]], c: Point2::new(0.3, -0.2) };
        let f = rt_basis(RtShape::Triangle, 1, RtVariant::Global).functions()[2].clone();
        let pf = piola(map, f).unwrap();
        let r = Point2::new(rx, ry);
        let d = pf.eval(map.forward(r)).unwrap() - pf.eval_ref(r);
        prop_assert!(d.norm() < 1e-9 * (1.0 + pf.eval_ref(r).norm()));
    }

    #[test]
    fn poisson_reproduces_affine_data(a in -3.0f64..3.0, bx in -3.0f64..3.0, by in -3.0f64..3.0, px in 0.0f64..1.0, py in 0.0f64..1.0) {
        let (p, solver) = hexagon_solver();
        let u = move |q: Point2| a + bx * q.x + by * q.y;
        let sol = solver.solve(Source::Zero, BoundaryData::from_fn(p, Arc::new(u))).unwrap();
        let c = p.centroid();
        let x = c + (Point2::new(px, py) - Point2::new(0.5, 0.5)) * (0.2 * p.diameter);
        prop_assume!(p.contains(x));
        let (v, g) = sol.field_eval(x).unwrap();
        prop_assert!((v - u(x)).abs() < 1e-10);
        prop_assert!((g - Point2::new(bx, by)).norm() < 1e-8);
    }
}

#[test]
fn gauss_legendre_weights_sum_to_two() {
    for n in 1..20 {
        let s: f64 = gauss_legendre(n).weights.iter().sum();
        assert!((s - 2.0).abs() < 1e-13);
    }
}

#[test]
fn canonical_traces_follow_the_offset_law() {
    let b = build("fig165", SpaceFamily::Classical, 0, 32.0);
    let p = b.polygon();
    for (i, e) in p.edges.iter().enumerate() {
        let xn = e.a.dot(e.normal);
        let main = &b.normal[i][0];
        for s in edge_samples(e.length, 10) {
            let own = main.trace_value(i, s).dot(e.normal);
            assert!((own - xn - 2.0).abs() < 1e-10, "edge {i}: {own} vs x·n + 2 = {}", xn + 2.0);
            for (j, o) in p.edges.iter().enumerate() {
                if j != i {
                    let t = o.length * s / e.length;
                    assert!(main.trace_value(j, t).dot(o.normal).abs() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn internal_functions_have_no_boundary_flux() {
    let b = build("fig167", SpaceFamily::Classical, 2, 24.0);
    let p = b.polygon();
    assert_eq!(b.internal.len(), 11);
    for f in &b.internal {
        for (i, e) in p.edges.iter().enumerate() {
            for s in edge_samples(e.length, 8) {
                assert!(f.trace_value(i, s).dot(e.normal).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn roles_line_up_with_functions() {
    let b = build("fig152", SpaceFamily::Classical, 1, 16.0);
    assert_eq!(b.roles.len(), b.len());
    let per_edge = |e| b.roles.iter().filter(|r| r.edge() == Some(e)).count();
    for e in 0..4 {
        assert_eq!(per_edge(e), 4);
    }
    assert!(b.roles.iter().any(|r| matches!(r, Role::MiscX { .. })));
    assert_eq!(b.roles.iter().filter(|r| r.is_internal()).count(), 3);
}

#[test]
fn hexagon_element_has_27_dofs() {
    let p = polygon("fig165");
    let spec = HdivSpaceKind::new(SpaceFamily::Classical, 1);
    for c in Config::ALL {
        assert_eq!(dof_set_unchecked(&p, &ElementConfig::new(c, spec)).len(), 27, "{c:?}");
    }
    assert_eq!(spec.dimension(6), 27);
}

#[test]
fn five_boundary_dofs_per_edge_at_order_two() {
    let p = polygon("fig167");
    let spec = HdivSpaceKind::new(SpaceFamily::Classical, 2);
    let dofs = dof_set(&p, &ElementConfig::new(Config::IIb, spec)).unwrap();
    for e in 0..p.n() {
        assert_eq!(dofs.iter().filter(|d| d.edge() == Some(e)).count(), 5);
    }
    assert_eq!(SpaceFamily::ReducedLagrangeBC.per_edge(2), 3);
}

#[test]
fn shifted_point_dofs_help_conditioning_and_remove_degeneration() {
    let b = build("fig165", SpaceFamily::Classical, 0, 48.0);
    let plain = assemble_transfer(&dof_set(b.polygon(), &ElementConfig::new(Config::Ib, b.spec)).unwrap(), &b).unwrap();
    let shifted = assemble_transfer(&dof_set(b.polygon(), &ElementConfig::new(Config::IbShifted, b.spec)).unwrap(), &b).unwrap();
    assert!(plain.cond2 < shifted.cond2, "{} vs {}", plain.cond2, shifted.cond2);
    let plain_deg = classify_degenerate(&tune_basis(&plain, &b).unwrap());
    let shifted_deg = classify_degenerate(&tune_basis(&shifted, &b).unwrap());
    assert_eq!(plain_deg.degenerated, 6);
    assert_eq!(shifted_deg.degenerated, 0);
}

fn scratch_dir(tag: &str) -> std::path::PathBuf {
    let d = std::env::temp_dir().join(format!("polydiv-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    d
}

#[test]
fn study_output_is_deterministic() {
    let cfg = StudyConfig {
        shapes: vec!["fig151".into(), "fig165".into()],
        orders: vec![0, 1],
        configs: vec![Config::Ib, Config::IIb],
        spaces: vec![SpaceFamily::Classical],
        bproj: vec![3],
        iproj: vec![3, 4],
        bcons: vec![1],
        icons: vec![2],
        h: Some(0.05),
        expect_fail: vec![],
        out: None,
        svg: false,
    };
    let a = run_study(&cfg).unwrap().to_csv();
    let b = run_study(&cfg).unwrap().to_csv();
    assert_eq!(a, b);
    assert_eq!(a.lines().count(), 1 + 2 * 2 * 2 * 2);
}

#[test]
fn element_command_writes_its_files() {
    let dir = scratch_dir("element");
    let mut req = ElementRequest::new("fig151", SpaceFamily::Classical, Config::IIb, 1);
    req.h = Some(0.05);
    let s = cmd_element(&req, &dir).unwrap();
    assert_eq!(s.dimension, 15);
    for f in ["lambda.csv", "traces.csv", "interior.csv", "summary.json"] {
        assert!(dir.join(f).metadata().unwrap().len() > 0, "{f}");
    }
    let lambda = std::fs::read_to_string(dir.join("lambda.csv")).unwrap();
    assert_eq!(lambda.lines().count(), 16);
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn cli_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_polydiv");
    let run = |args: &[&str]| Command::new(bin).args(args).output().unwrap();
    let good = run(&["validate", "--shape", "fig165", "--config", "IIb"]);
    assert_eq!(good.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&good.stdout).contains("pass"));
    let bad = run(&["validate", "--shape", "fig74", "--config", "Ia"]);
    assert_eq!(bad.status.code(), Some(1));
    let missing = run(&["validate", "--shape", "no-such-shape"]);
    assert_eq!(missing.status.code(), Some(2));
}
