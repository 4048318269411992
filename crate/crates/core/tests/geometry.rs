use feynknot::diagram::KnotGraph;
use feynknot::geometry::{
    gauss_map, gauss_map_points, line_class, rotate, sample_collapsed, sample_configuration, td_normalize, CauchyShell,
    Configuration, KnotCurve, Point, RigidMotion,
};
use feynknot::strata::EdgeOrdering;
use nalgebra::Rotation3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tripod() -> KnotGraph {
    KnotGraph::new(&["b1", "b2", "b3"], &["y"], &[("b1", "y"), ("b2", "y"), ("b3", "y")]).unwrap()
}

#[test]
fn named_curves() {
    assert_eq!(KnotCurve::named("Trefoil").unwrap(), KnotCurve::Trefoil);
    assert_eq!(KnotCurve::named("figure-8").unwrap(), KnotCurve::Figure8);
    assert_eq!(KnotCurve::named("torus(2, 5)").unwrap(), KnotCurve::Torus { p: 2, q: 5 });
    assert!(KnotCurve::named("torus(0,3)").is_err());
    assert!(KnotCurve::named("granny").is_err());
}

#[test]
fn knot_files() {
    let k = KnotCurve::from_json(r#"{"polygon":[[0,0,0],[1,0,0],[0,1,0.5]]}"#).unwrap();
    assert!((k.point(0.0) - Point::zeros()).norm() < 1e-15);
    assert!(KnotCurve::from_json(r#"{"polygon":[[0,0,0],[1,0,0]]}"#).is_err());
    assert!(KnotCurve::from_json(r#"{"named":"trefoil","polygon":[[0,0,0],[1,0,0],[0,1,0]]}"#).is_err());
    assert_eq!(KnotCurve::from_json(r#"{"named":"unknot"}"#).unwrap(), KnotCurve::Unknot);
}

#[test]
fn standard_curves_are_embedded_and_closed() {
    let moved = KnotCurve::Trefoil.moved(
        RigidMotion { rotation: Rotation3::from_euler_angles(0.2, 0.9, -0.4), translation: Point::new(3.0, 0.0, -1.0) },
        0.5,
    );
    for k in [KnotCurve::Unknot, KnotCurve::Trefoil, KnotCurve::Figure8, KnotCurve::Torus { p: 2, q: 3 }, moved] {
        k.check_embedding().unwrap();
        assert!((k.point(0.0) - k.point(1.0)).norm() < 1e-12);
        assert!(k.diameter() > 0.0);
    }
    let pinched = KnotCurve::Polygon(vec![Point::zeros(), Point::x(), Point::zeros(), Point::y()]);
    assert!(pinched.check_embedding().is_err());
}

#[test]
fn rigid_motion_preserves_shape() {
    let r = Rotation3::from_euler_angles(1.0, -0.3, 0.7);
    let k = KnotCurve::Figure8.moved(RigidMotion { rotation: r, translation: Point::new(0.5, 0.5, 0.5) }, 0.0);
    for i in 0..20 {
        let (s, t) = (i as f64 / 20.0, (i as f64 + 7.3) / 20.0);
        let d0 = (KnotCurve::Figure8.point(s) - KnotCurve::Figure8.point(t)).norm();
        let d1 = (k.point(s) - k.point(t)).norm();
        assert!((d0 - d1).abs() < 1e-12);
    }
}

#[test]
fn line_classes() {
    let v = Point::new(-1.0, 2.0, 0.0);
    assert!((line_class(&v) - line_class(&-v)).norm() < 1e-15);
    assert!(line_class(&v).x > 0.0);
    assert!((line_class(&Point::new(0.0, 0.0, -2.0)) - Point::z()).norm() < 1e-15);
}

#[test]
fn tripod_gauss_map() {
    let g = tripod();
    let c = Configuration {
        base_params: vec![0.0, 1.0, 2.0],
        inner_points: vec![Point::new(1.0, 1.0, 0.0)],
        frame: Some(Point::x()),
    };
    let img = gauss_map(&g, &EdgeOrdering::identity(3), None, &c).unwrap();
    let s = 0.5f64.sqrt();
    let expected = [Point::new(s, s, 0.0), Point::y(), Point::new(-s, s, 0.0)];
    for (d, e) in img.directions.iter().zip(&expected) {
        assert!((d - e).norm() < 1e-15);
    }
    let flat = Configuration { inner_points: vec![Point::x()], ..c.clone() };
    assert!(gauss_map(&g, &EdgeOrdering::identity(3), None, &flat).is_err());
    assert!(gauss_map(&g, &EdgeOrdering::identity(3), None, &Configuration { frame: None, ..c }).is_err());
}

#[test]
fn rotation_and_normalization_act_on_line_configurations() {
    let g = tripod();
    let o = EdgeOrdering::identity(3);
    let c = Configuration {
        base_params: vec![-1.0, 0.5, 3.0],
        inner_points: vec![Point::new(0.3, -0.2, 0.9)],
        frame: Some(Point::z()),
    };
    let img = gauss_map(&g, &o, None, &c).unwrap();

    let n = td_normalize(&c).unwrap();
    assert_eq!(n.base_params[0], 0.0);
    let pts = n.positions(&g, None).unwrap();
    let extent =
        (0..4).flat_map(|i| (0..4).map(move |j| (i, j))).map(|(i, j)| (pts[i] - pts[j]).norm()).fold(0.0, f64::max);
    assert!((extent - 1.0).abs() < 1e-15);
    assert!(img.class_multiset_distance(&gauss_map(&g, &o, None, &n).unwrap()) < 1e-15);
    let nn = td_normalize(&n).unwrap();
    assert!(nn.inner_points[0].relative_eq(&n.inner_points[0], 1e-15, 1e-15));

    let r = rotate(&c, 0.8).unwrap();
    let rot = Rotation3::from_axis_angle(&Point::z_axis(), 0.8);
    let turned = gauss_map(&g, &o, None, &r).unwrap();
    for (a, b) in img.directions.iter().zip(&turned.directions) {
        assert!((rot * a - b).norm() < 1e-15);
    }
    assert!(rotate(&Configuration { frame: Some(Point::x()), ..c }, 0.1).is_err());
}

#[test]
fn cauchy_shell_density_is_normalized() {
    let shell = CauchyShell { scale: 0.7 };
    // ∫ density(r) 4πr² dr over r = a tan(θ), θ in (0, π/2).
    let n = 20_000;
    let mut total = 0.0;
    for i in 0..n {
        let th = (i as f64 + 0.5) / n as f64 * std::f64::consts::FRAC_PI_2;
        let r = shell.scale * th.tan();
        let dr = shell.scale / th.cos().powi(2);
        total += shell.density(r) * 4.0 * std::f64::consts::PI * r * r * dr;
    }
    total *= std::f64::consts::FRAC_PI_2 / n as f64;
    assert!((total - 1.0).abs() < 1e-8, "{total}");
}

#[test]
fn samplers() {
    let g = tripod();
    let (c, p) = sample_configuration(&g, &KnotCurve::Trefoil, 17);
    assert!(c.base_params.windows(2).all(|w| w[0] <= w[1]));
    assert!(p > 0.0 && p.is_finite());
    assert_eq!(sample_configuration(&g, &KnotCurve::Trefoil, 17), (c, p));

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (c, p) = sample_collapsed(&g, &mut rng).unwrap();
    assert_eq!(c.base_params.first(), Some(&0.0));
    assert_eq!(c.base_params.last(), Some(&1.0));
    assert!((c.frame.unwrap().norm() - 1.0).abs() < 1e-15);
    assert!(p > 0.0);

    let one =
        KnotGraph::new(&["b1"], &["y1", "y2"], &[("b1", "y1"), ("y1", "y2"), ("y1", "y2"), ("y2", "y1")]).unwrap();
    let (c, _) = sample_collapsed(&one, &mut rng).unwrap();
    assert!((c.inner_points[0].norm() - 1.0).abs() < 1e-15);
    let free = KnotGraph::new(&[], &["y1", "y2"], &[("y1", "y2")]).unwrap();
    assert!(sample_collapsed(&free, &mut rng).is_err());
}

#[test]
fn gauss_map_on_knot_configuration() {
    let g = KnotGraph::new(&["b1", "b2"], &[], &[("b1", "b2")]).unwrap();
    let c = Configuration { base_params: vec![0.0, 0.25], inner_points: vec![], frame: None };
    let img = gauss_map(&g, &EdgeOrdering::identity(1), Some(&KnotCurve::Unknot), &c).unwrap();
    let s = 0.5f64.sqrt();
    assert!((img.directions[0] - Point::new(-s, s, 0.0)).norm() < 1e-15);
    assert!(gauss_map_points(&g, &EdgeOrdering::identity(2), &[Point::zeros(), Point::x()]).is_err());
}
