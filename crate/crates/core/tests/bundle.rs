mod common;

use common::diagrams_up_to;
use feynknot::bundle::{
    basis_matrix, blended_basis, boundary_family, check_injective, check_raw, column_norms, gram_determinant,
    ground_basis, group_checks, h_metric, hyperoctahedral_order, isotopy_check, isotopy_suite, limit_errors, metric,
    modified_basis, normalize, psi, random_height, smallest_singular_value, structure_group, transition,
    transition_type1, transition_type2, transition_type3, trivialization_suite, BundleError, GroundFunction,
    HeightFunction, SignedPerm, BLEND_POINTS, RHO_BOUND,
};
use feynknot::diagram::{enumerate_diagrams, KnotGraph};
use feynknot::strata::{all_strata, make_stratum, EdgeOrdering, StratumType};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tripod() -> KnotGraph {
    KnotGraph::new(&["b1", "b2", "b3"], &["y"], &[("b1", "y"), ("b2", "y"), ("b3", "y")]).unwrap()
}

fn tripod_height() -> HeightFunction {
    HeightFunction::new(&tripod(), vec![0.0, 1.0, 2.0, 0.5]).unwrap()
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[test]
fn height_validation() {
    let g = tripod();
    assert!(matches!(HeightFunction::new(&g, vec![1.0, 0.0, 2.0, 0.5]), Err(BundleError::NotHeight(_))));
    assert!(matches!(HeightFunction::new(&g, vec![0.0, 1.0, 2.0, 1.0]), Err(BundleError::FlatEdge(1))));
    assert!(HeightFunction::new(&g, vec![0.0, 1.0]).is_err());
}

#[test]
fn metric_examples() {
    let path = KnotGraph::new(&[], &["v", "y", "w"], &[("v", "y"), ("y", "w")]).unwrap();
    let h = HeightFunction::new(&path, vec![0.0, 1.0, 3.0]).unwrap();
    assert_eq!(h_metric(&path, &h, 0, 2).unwrap(), 3.0);

    let tri = KnotGraph::new(&[], &["a", "b", "c"], &[("a", "b"), ("b", "c"), ("a", "c")]).unwrap();
    let h = HeightFunction::new(&tri, vec![0.0, 5.0, 1.0]).unwrap();
    assert_eq!(h_metric(&tri, &h, 0, 1).unwrap(), 5.0);

    let split = KnotGraph::new(&[], &["a", "b", "c", "d"], &[("a", "b"), ("c", "d")]).unwrap();
    let h = HeightFunction::new(&split, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
    assert!(matches!(h_metric(&split, &h, 0, 3), Err(BundleError::Disconnected(0, 3))));
}

#[test]
fn metric_properties() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for g in diagrams_up_to(2) {
        let h = random_height(&g, &mut rng);
        let d = metric(&g, &h);
        let n = g.n_vertices();
        for a in 0..n {
            for b in 0..n {
                for m in 0..n {
                    assert!(!(d[a][b] > d[a][m] + d[m][b] + 1e-12));
                }
            }
            for &(v, w) in g.edges() {
                if d[a][v].is_infinite() {
                    continue;
                }
                assert!((d[a][v] - d[a][w]).abs() <= (h.values[v] - h.values[w]).abs() + 1e-12);
            }
        }
    }
}

#[test]
fn tripod_basis() {
    let g = tripod();
    let gb = ground_basis(&g, &tripod_height()).unwrap();
    assert_eq!(gb.basis.len(), 1);
    let vals: Vec<f64> = gb.basis[0].values.iter().map(|z| z.re).collect();
    assert_eq!(vals, vec![0.0, 0.0, 0.0, 0.5]);
    let col: Vec<Complex64> = gb.theta.column(0).iter().copied().collect();
    let want = [c(1.0, 0.0), c(-1.0, 0.0), c(-1.0 / 3.0, 0.0)];
    for (a, b) in col.iter().zip(&want) {
        assert!((a - b).norm() < 1e-15);
    }
    let norm = column_norms(&gb.theta)[0];
    assert!((norm - (1.0f64 + 1.0 + 1.0 / 9.0).sqrt()).abs() < 1e-15);
    assert!((norm - 1.453).abs() < 5e-4);
    assert!(norm <= 3f64.sqrt());
    let sv = check_injective(&gb);
    assert!(sv > 0.0);
    assert!((sv * sv - gram_determinant(&gb.theta)).abs() < 1e-12);
}

#[test]
fn isolated_inner_vertex_is_rejected() {
    let g = KnotGraph::new(
        &["b1", "b2"],
        &["y1", "y2", "y3", "y4"],
        &[("b1", "b2"), ("y1", "y2"), ("y1", "y3"), ("y1", "y4"), ("y2", "y3"), ("y2", "y4"), ("y3", "y4")],
    )
    .unwrap();
    let h = HeightFunction::new(&g, vec![0.0, 1.0, 0.1, 0.2, 0.3, 0.4]).unwrap();
    assert!(matches!(ground_basis(&g, &h), Err(BundleError::Isolated(_))));
}

#[test]
fn psi_examples() {
    let g = tripod();
    let h = tripod_height();
    let o = EdgeOrdering::identity(3);
    let gf = GroundFunction { values: vec![c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 1.0)] };
    let z = psi(&g, &o, &gf, &h).unwrap();
    let want = [c(0.0, 2.0), c(0.0, -2.0), c(0.0, -2.0 / 3.0)];
    for (a, b) in z.iter().zip(&want) {
        assert!((a - b).norm() < 1e-15);
    }
    let zero = psi(&g, &o, &GroundFunction::real(&[0.0; 4]), &h).unwrap();
    assert!(zero.iter().all(|z| z.norm() == 0.0));
}

#[test]
fn psi_linearity_and_symmetries() {
    let g = tripod();
    let h = tripod_height();
    let o = EdgeOrdering::identity(3);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut random_ground = || GroundFunction { values: (0..4).map(|_| c(rng.gen(), rng.gen())).collect() };
    let (g1, g2) = (random_ground(), random_ground());
    let (c1, c2) = (c(0.3, -1.2), c(2.0, 0.5));
    let sum = GroundFunction { values: g1.values.iter().zip(&g2.values).map(|(a, b)| c1 * a + c2 * b).collect() };
    let (p1, p2, ps) = (psi(&g, &o, &g1, &h).unwrap(), psi(&g, &o, &g2, &h).unwrap(), psi(&g, &o, &sum, &h).unwrap());
    for i in 0..3 {
        assert!((ps[i] - (c1 * p1[i] + c2 * p2[i])).norm() < 1e-12);
    }
    // Translation-dilation (g, h) -> (λg, λh + t).
    let lambda = 3.7;
    let scaled_g = GroundFunction { values: g1.values.iter().map(|z| z * lambda).collect() };
    let scaled_h = HeightFunction::new(&g, h.values.iter().map(|x| lambda * x - 2.0).collect()).unwrap();
    let pt = psi(&g, &o, &scaled_g, &scaled_h).unwrap();
    for i in 0..3 {
        assert!((pt[i] - p1[i]).norm() < 1e-12);
    }
    // Rotation about the line multiplies the ground function by a phase.
    let phase = Complex64::from_polar(1.0, 0.9);
    let turned = GroundFunction { values: g1.values.iter().map(|z| z * phase).collect() };
    let pr = psi(&g, &o, &turned, &h).unwrap();
    for i in 0..3 {
        assert!((pr[i] - phase * p1[i]).norm() < 1e-12);
    }
}

#[test]
fn duplicated_column_is_not_injective() {
    let col = [c(1.0, 0.0), c(-1.0, 0.0), c(-1.0 / 3.0, 0.0)];
    let m = DMatrix::from_fn(3, 2, |i, _| col[i]);
    assert!(smallest_singular_value(&m) < 1e-15);
}

#[test]
fn isotopy_examples() {
    let g = tripod();
    let m = basis_matrix(&g, &tripod_height(), &[3]).unwrap();
    assert_eq!(m[(0, 0)], 0.5);
    assert!(isotopy_check(&g, &tripod_height(), 0).is_err());

    let g = KnotGraph::new(
        &["b1", "b2", "b3", "b4"],
        &["y", "z"],
        &[("b1", "y"), ("b2", "y"), ("y", "z"), ("b3", "z"), ("b4", "z")],
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let h = random_height(&g, &mut rng);
        let rep = isotopy_check(&g, &h, 0).unwrap();
        assert_eq!(rep.det.len(), BLEND_POINTS.len());
        assert!(rep.worst() > 0.0);
        assert!(rep.closed_form_gap() < 1e-9);
        let start = blended_basis(&g, &h, 0, 1.0, false).unwrap();
        assert_eq!(start, basis_matrix(&g, &h, &[4, 5]).unwrap());
        let end = blended_basis(&g, &h, 0, 1.0, true).unwrap();
        let other = basis_matrix(&g, &h, &[5, 4]).unwrap();
        assert_eq!(end, DMatrix::from_fn(2, 2, |i, j| other[(1 - i, 1 - j)]));
    }
}

#[test]
fn transition_examples() {
    let g = tripod();
    let mut rng = ChaCha8Rng::seed_from_u64(6);

    // Type III: the sign of h(y) - h(b).
    let s = make_stratum(&g, &[0, 3]).unwrap();
    let up = HeightFunction::new(&s.collapsed, vec![0.0, 0.7]).unwrap();
    let down = HeightFunction::new(&s.collapsed, vec![0.7, 0.0]).unwrap();
    assert_eq!(transition_type3(&s, &up).unwrap().raw[(0, 0)], 1.0);
    assert_eq!(transition_type3(&s, &down).unwrap().raw[(0, 0)], -1.0);

    // Type II: first column -e₁, bounded ρ′, normalized to diag(-1, 1, ...).
    for g in diagrams_up_to(3) {
        for s in all_strata(&g) {
            if s.classify() != StratumType::TypeII || !s.collapsed.is_connected() {
                continue;
            }
            let h = random_height(&s.collapsed, &mut rng);
            let t = transition_type2(&s, &h).unwrap();
            let n = t.raw.nrows();
            assert!((t.raw[(0, 0)] + 1.0).abs() < 1e-9);
            for i in 1..n {
                assert!(t.raw[(i, 0)].abs() < 1e-9);
            }
            let rc = check_raw(&t);
            assert!(rc.exact_error < 1e-9 && rc.rho_max <= RHO_BOUND + 1e-9);
            let mut signs = vec![1; n];
            signs[0] = -1;
            assert_eq!(t.normalized, Some(SignedPerm::diagonal(signs)));
        }
    }

    // Type I: b₁ fixed, normalized identity.
    let mut seen = 0;
    for g in diagrams_up_to(3) {
        for s in all_strata(&g) {
            if s.classify() != StratumType::TypeI || !s.collapsed.is_connected() {
                continue;
            }
            let h = random_height(&s.collapsed, &mut rng);
            let t = transition_type1(&s, &h).unwrap();
            let n = t.raw.nrows();
            assert!((t.raw[(0, 0)] - 1.0).abs() < 1e-9);
            assert_eq!(t.normalized, Some(SignedPerm::identity(n)));
            seen += 1;
        }
    }
    assert!(seen > 0);
}

#[test]
fn normalization_of_raw_matrices() {
    let m = DMatrix::from_row_slice(3, 3, &[-1.0, 1.5, -0.2, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
    assert_eq!(normalize(&m), Some(SignedPerm::diagonal(vec![-1, 1, 1])));
    let p = SignedPerm { perm: vec![2, 0, 1], signs: vec![1, -1, 1] };
    assert_eq!(SignedPerm::from_matrix(&p.matrix()), Some(p.clone()));
    let id = p.then(&p).then(&p);
    assert_eq!(id.perm, vec![0, 1, 2]);
    assert_eq!(hyperoctahedral_order(3), 48);
}

#[test]
fn order_two_structure_group() {
    let ds = enumerate_diagrams(2, 6).unwrap();
    let cert = structure_group(&ds, 200, 7, &[]);
    assert!(cert.passed(), "{:?}", cert.violations);
    for g in &cert.groups {
        assert_eq!(hyperoctahedral_order(g.s) % g.order, 0);
    }
    assert!(group_checks(&cert).iter().all(|p| p.passed()));

    let injected = vec![(ds.iter().position(|g| g.n_inner() > 0).unwrap(), DMatrix::from_row_slice(1, 1, &[2.0]))];
    let bad = structure_group(&ds, 10, 7, &injected);
    assert!(!bad.passed());
}

#[test]
fn certificates_are_deterministic() {
    let ds = enumerate_diagrams(2, 6).unwrap();
    let a = serde_json::to_string(&structure_group(&ds, 100, 3, &[])).unwrap();
    let b = serde_json::to_string(&structure_group(&ds, 100, 3, &[])).unwrap();
    assert_eq!(a, b);
}

#[test]
fn small_suites_pass() {
    let ds = diagrams_up_to(2);
    for p in trivialization_suite(&ds, 50, 1).into_iter().chain(isotopy_suite(&ds, 10, 1)) {
        assert!(p.passed(), "{p:?}");
    }
}

#[test]
fn boundary_family_limits_on_the_tripod_edge() {
    let g = KnotGraph::new(
        &["b1", "b2", "b3", "b4"],
        &["y", "z"],
        &[("b1", "y"), ("b2", "y"), ("y", "z"), ("b3", "z"), ("b4", "z")],
    )
    .unwrap();
    let s = make_stratum(&g, &[4, 5]).unwrap();
    let h1 = HeightFunction::new(&s.quotient, vec![0.0, 0.3, 0.6, 1.0, 0.45]).unwrap();
    let h2 = HeightFunction::new(&s.collapsed, vec![0.0, 1.0]).unwrap();
    let mut last = f64::INFINITY;
    for lambda in [1e-2, 1e-4, 1e-6] {
        let h = boundary_family(&s, &h1, &h2, lambda).unwrap();
        assert!((h.values[4] - 0.45).abs() <= lambda);
        let e = limit_errors(&s, &h1, &h2, lambda).unwrap();
        assert!(e.modified_off_a <= last.max(1e-15));
        last = e.modified_off_a;
        let mb = modified_basis(&s, &h, lambda).unwrap();
        assert!(check_injective(&mb) > 0.0);
    }
    assert!(boundary_family(&s, &h1, &h2, 0.0).is_err());
}

#[test]
fn transition_dispatch() {
    let x = KnotGraph::new(&["b1", "b2", "b3", "b4"], &[], &[("b1", "b3"), ("b2", "b4")]).unwrap();
    let s = make_stratum(&x, &[0, 1, 2]).unwrap();
    assert_eq!(s.classify(), StratumType::Type0);
    let h = random_height(&s.collapsed, &mut ChaCha8Rng::seed_from_u64(0));
    assert_eq!(transition(&s, &h).unwrap().raw.nrows(), 0);

    let chord = KnotGraph::new(&["b1", "b2"], &[], &[("b1", "b2")]).unwrap();
    let s = make_stratum(&chord, &[0, 1]).unwrap();
    assert_eq!(s.classify(), StratumType::Plain);
    let h = HeightFunction::new(&s.collapsed, vec![0.0, 1.0]).unwrap();
    assert!(matches!(transition(&s, &h), Err(BundleError::Unsupported(_))));
}
