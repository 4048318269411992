#![allow(dead_code)]

use feynknot::diagram::{enumerate_diagrams, KnotGraph};
use feynknot::geometry::{gauss_map_points, tangent_frame, Configuration, KnotCurve, Point};
use feynknot::integrator::integrand;
use feynknot::strata::{all_strata, collar_gauss_error, tau1, tau2, tau_y, EdgeOrdering, StratumType};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

pub fn diagrams_up_to(n: i64) -> Vec<KnotGraph> {
    (1..=n).flat_map(|i| enumerate_diagrams(i, 3 * i as usize).unwrap()).collect()
}

pub fn random_points<R: Rng>(n: usize, rng: &mut R) -> Vec<Point> {
    (0..n).map(|_| Point::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
}

fn max_dist(a: &[Point], b: &[Point]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max)
}

/// Worst cases of the identification-map properties over random placements
/// of A(Γ) and Γ/A.
#[derive(Debug, Default)]
pub struct IdentificationReport {
    pub tau2_involution: f64,
    pub tau2_gauss: f64,
    pub tau2_checks: usize,
    pub tau_y_involution: f64,
    pub tau_y_gauss: f64,
    pub tau_y_checks: usize,
    pub tau1_idempotent: f64,
    pub tau1_checks: usize,
    pub collar: f64,
    pub collar_checks: usize,
    pub errors: usize,
}

pub fn identification_report(diagrams: &[KnotGraph], draws: usize, t: f64, seed: u64) -> IdentificationReport {
    let mut r = IdentificationReport::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for g in diagrams {
        for s in all_strata(g) {
            let c = &s.collapsed;
            let id = EdgeOrdering::identity(c.n_edges());
            for _ in 0..draws {
                let pts = random_points(c.n_vertices(), &mut rng);
                match s.classify() {
                    StratumType::TypeII => {
                        let (Ok(once), Ok(img)) = (tau2(&s, &pts), gauss_map_points(c, &id, &pts)) else {
                            r.errors += 1;
                            continue;
                        };
                        let twice = tau2(&s, &once).unwrap();
                        r.tau2_involution = r.tau2_involution.max(max_dist(&twice, &pts));
                        let moved = gauss_map_points(c, &id, &once).unwrap();
                        r.tau2_gauss = r.tau2_gauss.max(img.class_multiset_distance(&moved));
                        r.tau2_checks += 1;
                    }
                    StratumType::TypeY => {
                        let (Ok(once), Ok(img)) = (tau_y(&s, &pts), gauss_map_points(c, &id, &pts)) else {
                            r.errors += 1;
                            continue;
                        };
                        let twice = tau_y(&s, &once).unwrap();
                        r.tau_y_involution = r.tau_y_involution.max(max_dist(&twice, &pts));
                        let moved = gauss_map_points(c, &id, &once).unwrap();
                        r.tau_y_gauss = r.tau_y_gauss.max(img.class_multiset_distance(&moved));
                        r.tau_y_checks += 1;
                    }
                    StratumType::TypeI => {
                        let Ok(once) = tau1(&s, &pts) else {
                            r.errors += 1;
                            continue;
                        };
                        let twice = tau1(&s, &once).unwrap();
                        let scale = once.iter().map(|p| p.norm()).fold(1.0, f64::max);
                        r.tau1_idempotent = r.tau1_idempotent.max(max_dist(&twice, &once) / scale);
                        r.tau1_checks += 1;
                    }
                    _ => {}
                }
                let alpha = random_points(s.quotient.n_vertices(), &mut rng);
                match collar_gauss_error(&s, &alpha, &pts, t) {
                    Ok(e) => r.collar = r.collar.max(e),
                    Err(_) => r.errors += 1,
                }
                r.collar_checks += 1;
            }
        }
    }
    r
}

/// Exhaustive Σ-equivariance of `relabel` and of the Gauss map on every
/// diagram in `diagrams`. Returns (checks, violations).
pub fn relabel_equivariance(diagrams: &[KnotGraph], seed: u64) -> (usize, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut checks, mut bad) = (0, 0);
    for g in diagrams {
        let k = g.n_edges();
        let orderings = EdgeOrdering::all(k);
        let pts = random_points(g.n_vertices(), &mut rng);
        let strata = all_strata(g);
        for o in &orderings {
            let img = gauss_map_points(g, o, &pts).unwrap();
            for sigma in &orderings {
                let sigma = sigma.as_slice();
                let moved = gauss_map_points(g, &o.act(sigma), &pts).unwrap();
                checks += 1;
                if (0..k).any(|p| moved.directions[sigma[p]] != img.directions[p]) {
                    bad += 1;
                }
                for s in &strata {
                    checks += 1;
                    if s.relabel(&o.act(sigma)) != s.relabel(o).act(sigma) {
                        bad += 1;
                    }
                }
            }
        }
    }
    (checks, bad)
}

/// Edge directions of `g` with base points at `k(t)` and inner vertices
/// read from the chart coordinates `q`.
fn knot_directions(g: &KnotGraph, o: &EdgeOrdering, k: &KnotCurve, q: &[f64]) -> Vec<Point> {
    let m = g.n_base();
    let c = Configuration {
        base_params: q[..m].to_vec(),
        inner_points: (0..g.n_inner()).map(|j| Point::new(q[m + 3 * j], q[m + 3 * j + 1], q[m + 3 * j + 2])).collect(),
        frame: None,
    };
    let pts = c.positions(g, Some(k)).unwrap();
    gauss_map_points(g, o, &pts).unwrap().directions
}

/// Relative error between the integrand and the same density built from a
/// central-difference Jacobian of the edge directions.
pub fn fd_relative_error(g: &KnotGraph, o: &EdgeOrdering, k: &KnotCurve, c: &Configuration, h: f64) -> f64 {
    let mut q = c.base_params.clone();
    for p in &c.inner_points {
        q.extend([p.x, p.y, p.z]);
    }
    let u0 = knot_directions(g, o, k, &q);
    let frames: Vec<(Point, Point)> = u0.iter().map(tangent_frame).collect();
    let n = q.len();
    let mut j = DMatrix::zeros(2 * u0.len(), n);
    for col in 0..n {
        let mut plus = q.clone();
        let mut minus = q.clone();
        plus[col] += h;
        minus[col] -= h;
        let (up, um) = (knot_directions(g, o, k, &plus), knot_directions(g, o, k, &minus));
        for p in 0..u0.len() {
            let d = (up[p] - um[p]) / (2.0 * h);
            j[(2 * p, col)] = frames[p].0.dot(&d);
            j[(2 * p + 1, col)] = frames[p].1.dot(&d);
        }
    }
    let fd = j.determinant() / (4.0 * PI).powi(u0.len() as i32);
    let f = integrand(g, o, k, c).unwrap();
    (f - fd).abs() / f.abs()
}
