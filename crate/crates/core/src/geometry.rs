//! Knot curves, placements of knot graphs, and the edge-direction map.

use std::f64::consts::PI;

use nalgebra::{Rotation3, Vector3};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagram::KnotGraph;
use crate::strata::EdgeOrdering;

pub type Point = Vector3<f64>;

/// Edges shorter than this are treated as collapsed.
pub const DEGENERATE_EDGE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("curve derivative vanishes at t = {0}")]
    ZeroDerivative(f64),
    #[error("edge {0} has coincident endpoints")]
    DegenerateEdge(usize),
    #[error("curve is not embedded: {0}")]
    NotEmbedded(String),
    #[error("configuration does not match the diagram: {0}")]
    Mismatch(String),
    #[error("configuration is not on the z-axis line")]
    NotOnAxis,
    #[error("all placed vertices coincide")]
    Collapsed,
    #[error("unknown knot {0:?}")]
    UnknownKnot(String),
    #[error("malformed knot file: {0}")]
    Parse(String),
}

/// A rotation followed by a translation.
#[derive(Clone, Debug, PartialEq)]
pub struct RigidMotion {
    pub rotation: Rotation3<f64>,
    pub translation: Point,
}

#[derive(Clone, Debug, PartialEq)]
pub enum KnotCurve {
    Unknot,
    Trefoil,
    Figure8,
    /// Winds `p` times around the z-axis and `q` times through the hole.
    Torus {
        p: u32,
        q: u32,
    },
    /// Closed polygon, traversed at constant parameter speed per segment.
    Polygon(Vec<Point>),
    /// `motion(base(t + a sin(2πt)/2π))`, a reparametrized rigid copy. Needs |a| < 1.
    Moved {
        base: Box<KnotCurve>,
        motion: RigidMotion,
        warp: f64,
    },
}

/// Knot file: `{"named":"trefoil"}` or `{"polygon":[[x,y,z],...]}`.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct KnotFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub named: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polygon: Option<Vec<[f64; 3]>>,
}

impl KnotCurve {
    /// `unknot`, `trefoil`, `figure8`, or `torus(p,q)`.
    pub fn named(name: &str) -> Result<Self, GeometryError> {
        let n = name.trim().to_ascii_lowercase();
        match n.as_str() {
            "unknot" => Ok(KnotCurve::Unknot),
            "trefoil" => Ok(KnotCurve::Trefoil),
            "figure8" | "figure-8" | "figure_eight" => Ok(KnotCurve::Figure8),
            _ => {
                let inner = n
                    .strip_prefix("torus(")
                    .and_then(|r| r.strip_suffix(')'))
                    .ok_or_else(|| GeometryError::UnknownKnot(name.to_string()))?;
                let mut parts = inner.split(',').map(|x| x.trim().parse::<u32>());
                match (parts.next(), parts.next(), parts.next()) {
                    (Some(Ok(p)), Some(Ok(q)), None) if p > 0 && q > 0 => Ok(KnotCurve::Torus { p, q }),
                    _ => Err(GeometryError::UnknownKnot(name.to_string())),
                }
            }
        }
    }

    pub fn from_file(f: &KnotFile) -> Result<Self, GeometryError> {
        match (&f.named, &f.polygon) {
            (Some(name), None) => KnotCurve::named(name),
            (None, Some(pts)) => {
                if pts.len() < 3 {
                    return Err(GeometryError::Parse("a polygon needs at least 3 vertices".into()));
                }
                Ok(KnotCurve::Polygon(pts.iter().map(|p| Point::new(p[0], p[1], p[2])).collect()))
            }
            _ => Err(GeometryError::Parse("expected exactly one of \"named\" or \"polygon\"".into())),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, GeometryError> {
        let f: KnotFile = serde_json::from_str(text).map_err(|e| GeometryError::Parse(e.to_string()))?;
        KnotCurve::from_file(&f)
    }

    pub fn moved(self, motion: RigidMotion, warp: f64) -> Self {
        assert!(warp.abs() < 1.0, "warp must keep the reparametrization monotone");
        KnotCurve::Moved { base: Box::new(self), motion, warp }
    }

    pub fn point(&self, t: f64) -> Point {
        let s = 2.0 * PI * t;
        match self {
            KnotCurve::Unknot => Point::new(s.cos(), s.sin(), 0.0),
            KnotCurve::Trefoil => {
                Point::new(s.sin() + 2.0 * (2.0 * s).sin(), s.cos() - 2.0 * (2.0 * s).cos(), -(3.0 * s).sin())
            }
            KnotCurve::Figure8 => {
                let r = 2.0 + (2.0 * s).cos();
                Point::new(r * (3.0 * s).cos(), r * (3.0 * s).sin(), (4.0 * s).sin())
            }
            KnotCurve::Torus { p, q } => {
                let (p, q) = (*p as f64, *q as f64);
                let r = 2.0 + (q * s).cos();
                Point::new(r * (p * s).cos(), r * (p * s).sin(), (q * s).sin())
            }
            KnotCurve::Polygon(v) => {
                let (i, f) = polygon_segment(v.len(), t);
                v[i] * (1.0 - f) + v[(i + 1) % v.len()] * f
            }
            KnotCurve::Moved { base, motion, warp } => {
                motion.rotation * base.point(t + warp * s.sin() / (2.0 * PI)) + motion.translation
            }
        }
    }

    /// d/dt of `point`, with t in units of full turns.
    pub fn derivative(&self, t: f64) -> Point {
        let s = 2.0 * PI * t;
        let w = 2.0 * PI;
        match self {
            KnotCurve::Unknot => Point::new(-s.sin(), s.cos(), 0.0) * w,
            KnotCurve::Trefoil => {
                Point::new(s.cos() + 4.0 * (2.0 * s).cos(), -s.sin() + 4.0 * (2.0 * s).sin(), -3.0 * (3.0 * s).cos())
                    * w
            }
            KnotCurve::Figure8 => {
                let r = 2.0 + (2.0 * s).cos();
                let dr = -2.0 * (2.0 * s).sin();
                Point::new(
                    dr * (3.0 * s).cos() - 3.0 * r * (3.0 * s).sin(),
                    dr * (3.0 * s).sin() + 3.0 * r * (3.0 * s).cos(),
                    4.0 * (4.0 * s).cos(),
                ) * w
            }
            KnotCurve::Torus { p, q } => {
                let (p, q) = (*p as f64, *q as f64);
                let r = 2.0 + (q * s).cos();
                let dr = -q * (q * s).sin();
                Point::new(
                    dr * (p * s).cos() - p * r * (p * s).sin(),
                    dr * (p * s).sin() + p * r * (p * s).cos(),
                    q * (q * s).cos(),
                ) * w
            }
            KnotCurve::Polygon(v) => {
                let (i, _) = polygon_segment(v.len(), t);
                (v[(i + 1) % v.len()] - v[i]) * v.len() as f64
            }
            KnotCurve::Moved { base, motion, warp } => {
                let phi = t + warp * s.sin() / (2.0 * PI);
                motion.rotation * base.derivative(phi) * (1.0 + warp * s.cos())
            }
        }
    }

    /// Unit tangent. Polygons use a central difference, which is the edge
    /// direction away from corners.
    pub fn tangent(&self, t: f64) -> Result<Point, GeometryError> {
        let d = match self {
            KnotCurve::Polygon(_) => {
                let h = 1e-7;
                (self.point(t + h) - self.point(t - h)) / (2.0 * h)
            }
            _ => self.derivative(t),
        };
        let n = d.norm();
        if n < 1e-12 {
            return Err(GeometryError::ZeroDerivative(t));
        }
        Ok(d / n)
    }

    /// Largest distance between points of a 512-sample grid.
    pub fn diameter(&self) -> f64 {
        let pts: Vec<Point> = (0..512).map(|i| self.point(i as f64 / 512.0)).collect();
        let mut d: f64 = 0.0;
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                d = d.max((pts[i] - pts[j]).norm());
            }
        }
        d
    }

    /// Polygons: non-adjacent segments must keep positive distance.
    /// Parametric curves: speed must not vanish on a 4096-point grid.
    pub fn check_embedding(&self) -> Result<(), GeometryError> {
        match self {
            KnotCurve::Polygon(v) => {
                let n = v.len();
                for i in 0..n {
                    if (v[(i + 1) % n] - v[i]).norm() < DEGENERATE_EDGE {
                        return Err(GeometryError::NotEmbedded(format!("segment {i} has zero length")));
                    }
                    for j in (i + 2)..n {
                        if i == 0 && j == n - 1 {
                            continue;
                        }
                        let d = segment_distance(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n]);
                        if d < DEGENERATE_EDGE {
                            return Err(GeometryError::NotEmbedded(format!("segments {i} and {j} meet")));
                        }
                    }
                }
                Ok(())
            }
            _ => {
                for i in 0..4096 {
                    let t = i as f64 / 4096.0;
                    if self.derivative(t).norm() < 1e-9 {
                        return Err(GeometryError::ZeroDerivative(t));
                    }
                }
                Ok(())
            }
        }
    }
}

fn polygon_segment(n: usize, t: f64) -> (usize, f64) {
    let u = t.rem_euclid(1.0) * n as f64;
    let i = (u.floor() as usize).min(n - 1);
    (i, u - i as f64)
}

/// Distance between segments [p0,p1] and [q0,q1].
pub fn segment_distance(p0: Point, p1: Point, q0: Point, q1: Point) -> f64 {
    let d1 = p1 - p0;
    let d2 = q1 - q0;
    let r = p0 - q0;
    let a = d1.dot(&d1);
    let e = d2.dot(&d2);
    let f = d2.dot(&r);
    let c = d1.dot(&r);
    let b = d1.dot(&d2);
    let denom = a * e - b * b;
    let mut s = if denom > 1e-300 { ((b * f - c * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
    let mut t = (b * s + f) / e;
    if t < 0.0 {
        t = 0.0;
        s = (-c / a).clamp(0.0, 1.0);
    } else if t > 1.0 {
        t = 1.0;
        s = ((b - c) / a).clamp(0.0, 1.0);
    }
    ((p0 + d1 * s) - (q0 + d2 * t)).norm()
}

/// Placement of a knot graph. Base points sit at curve parameters, or at
/// heights along the line through the origin in direction `frame`.
#[derive(Clone, Debug, PartialEq)]
pub struct Configuration {
    pub base_params: Vec<f64>,
    pub inner_points: Vec<Point>,
    pub frame: Option<Point>,
}

impl Configuration {
    /// Position of every vertex, in the graph's vertex order.
    pub fn positions(&self, g: &KnotGraph, k: Option<&KnotCurve>) -> Result<Vec<Point>, GeometryError> {
        if self.base_params.len() != g.n_base() || self.inner_points.len() != g.n_inner() {
            return Err(GeometryError::Mismatch(format!(
                "expected {} base and {} inner vertices, got {} and {}",
                g.n_base(),
                g.n_inner(),
                self.base_params.len(),
                self.inner_points.len()
            )));
        }
        let mut out = Vec::with_capacity(g.n_vertices());
        match (self.frame, k) {
            (Some(x), _) => out.extend(self.base_params.iter().map(|&h| x * h)),
            (None, Some(k)) => out.extend(self.base_params.iter().map(|&t| k.point(t))),
            (None, None) => return Err(GeometryError::Mismatch("knot configuration without a curve".into())),
        }
        out.extend(self.inner_points.iter().copied());
        Ok(out)
    }
}

/// Canonical representative of the line through `v`: unit length, first
/// nonzero coordinate positive.
pub fn line_class(v: &Point) -> Point {
    let u = v.normalize();
    let flip = if u.x.abs() > 1e-15 {
        u.x < 0.0
    } else if u.y.abs() > 1e-15 {
        u.y < 0.0
    } else {
        u.z < 0.0
    };
    if flip {
        -u
    } else {
        u
    }
}

/// Per-position unit edge directions under an edge ordering.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussImage {
    pub directions: Vec<Point>,
}

impl GaussImage {
    pub fn classes(&self) -> Vec<Point> {
        self.directions.iter().map(line_class).collect()
    }

    /// Largest distance under the best matching of the two class multisets,
    /// found greedily after sorting (exact for well-separated classes).
    pub fn class_multiset_distance(&self, other: &GaussImage) -> f64 {
        if self.directions.len() != other.directions.len() {
            return f64::INFINITY;
        }
        let mut a = self.classes();
        let mut b = other.classes();
        let key = |p: &Point| (p.x, p.y, p.z);
        a.sort_by(|p, q| key(p).partial_cmp(&key(q)).unwrap());
        b.sort_by(|p, q| key(p).partial_cmp(&key(q)).unwrap());
        let mut used = vec![false; b.len()];
        let mut worst: f64 = 0.0;
        for p in &a {
            let (j, d) = b
                .iter()
                .enumerate()
                .filter(|(j, _)| !used[*j])
                .map(|(j, q)| (j, (p - q).norm().min((p + q).norm())))
                .min_by(|x, y| x.1.partial_cmp(&y.1).unwrap())
                .expect("same length");
            used[j] = true;
            worst = worst.max(d);
        }
        worst
    }
}

/// Direction of edge `(a, b)`, `a < b`, pointing from `a` to `b`.
pub fn edge_direction(points: &[Point], a: usize, b: usize) -> Option<Point> {
    let d = points[b] - points[a];
    let n = d.norm();
    if n < DEGENERATE_EDGE {
        None
    } else {
        Some(d / n)
    }
}

pub fn gauss_map_points(g: &KnotGraph, o: &EdgeOrdering, points: &[Point]) -> Result<GaussImage, GeometryError> {
    if o.len() != g.n_edges() {
        return Err(GeometryError::Mismatch("edge ordering length".into()));
    }
    let mut directions = Vec::with_capacity(o.len());
    for p in 0..o.len() {
        let e = o.edge_at(p);
        let (a, b) = g.edges()[e];
        directions.push(edge_direction(points, a, b).ok_or(GeometryError::DegenerateEdge(e))?);
    }
    Ok(GaussImage { directions })
}

pub fn gauss_map(
    g: &KnotGraph,
    o: &EdgeOrdering,
    k: Option<&KnotCurve>,
    c: &Configuration,
) -> Result<GaussImage, GeometryError> {
    gauss_map_points(g, o, &c.positions(g, k)?)
}

/// Rotation by `angle` about the z-axis of a configuration on that axis.
pub fn rotate(c: &Configuration, angle: f64) -> Result<Configuration, GeometryError> {
    let z = Point::z();
    match c.frame {
        Some(x) if (x - z).norm() < 1e-12 => {}
        _ => return Err(GeometryError::NotOnAxis),
    }
    let r = Rotation3::from_axis_angle(&Vector3::z_axis(), angle);
    Ok(Configuration {
        base_params: c.base_params.clone(),
        inner_points: c.inner_points.iter().map(|p| r * p).collect(),
        frame: c.frame,
    })
}

/// Translation-dilation representative of a line configuration: lowest base
/// height 0 (centroid at the origin without base points), extent 1.
pub fn td_normalize(c: &Configuration) -> Result<Configuration, GeometryError> {
    let x = c.frame.ok_or_else(|| GeometryError::Mismatch("td_normalize needs a line configuration".into()))?;
    let mut pts: Vec<Point> = c.base_params.iter().map(|&h| x * h).collect();
    pts.extend(c.inner_points.iter().copied());
    if pts.is_empty() {
        return Err(GeometryError::Collapsed);
    }
    let shift = match c.base_params.first() {
        Some(&h0) => x * h0,
        None => pts.iter().sum::<Point>() / pts.len() as f64,
    };
    let mut extent: f64 = 0.0;
    for i in 0..pts.len() {
        for j in (i + 1)..pts.len() {
            extent = extent.max((pts[i] - pts[j]).norm());
        }
    }
    if extent < 1e-300 {
        return Err(GeometryError::Collapsed);
    }
    let h0 = c.base_params.first().copied().unwrap_or(0.0);
    Ok(Configuration {
        base_params: c.base_params.iter().map(|&h| (h - h0) / extent).collect(),
        inner_points: c.inner_points.iter().map(|p| (p - shift) / extent).collect(),
        frame: c.frame,
    })
}

/// Isotropic heavy-tailed law around a center: uniform direction, radius
/// with half-Cauchy density 2a / (π (a² + r²)).
#[derive(Clone, Copy, Debug)]
pub struct CauchyShell {
    pub scale: f64,
}

impl CauchyShell {
    pub fn sample<R: Rng>(&self, rng: &mut R, center: Point) -> Point {
        let r = self.scale * (0.5 * PI * rng.gen::<f64>()).tan();
        center + unit_vector(rng) * r
    }

    /// Density in R³ at distance `r` from the center.
    pub fn density(&self, r: f64) -> f64 {
        let a = self.scale;
        2.0 * a / (PI * (a * a + r * r)) / (4.0 * PI * r * r)
    }

    /// Equal-weight mixture over `centers`.
    pub fn mixture_density(&self, centers: &[Point], y: &Point) -> f64 {
        centers.iter().map(|c| self.density((y - c).norm())).sum::<f64>() / centers.len() as f64
    }
}

pub fn unit_vector<R: Rng>(rng: &mut R) -> Point {
    let z = 2.0 * rng.gen::<f64>() - 1.0;
    let phi = 2.0 * PI * rng.gen::<f64>();
    let r = (1.0 - z * z).max(0.0).sqrt();
    Point::new(r * phi.cos(), r * phi.sin(), z)
}

/// Proposal for configurations of a diagram on a knot.
///
/// Base parameters are uniform on the ordered simplex (density m!). Each
/// inner vertex is drawn from a `CauchyShell` of scale 0.2 x diameter around
/// a uniformly chosen base point; the f/p ratio then stays bounded near the
/// 1/r² singularities. Without base points the centers are eight fixed knot
/// points.
#[derive(Clone, Debug)]
pub struct ConfigurationSampler {
    pub shell: CauchyShell,
}

impl ConfigurationSampler {
    pub fn new(k: &KnotCurve) -> Self {
        ConfigurationSampler { shell: CauchyShell { scale: 0.2 * k.diameter() } }
    }

    pub fn sample<R: Rng>(&self, g: &KnotGraph, k: &KnotCurve, rng: &mut R) -> (Configuration, f64) {
        let m = g.n_base();
        let mut base: Vec<f64> = (0..m).map(|_| rng.gen::<f64>()).collect();
        base.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut density = factorial(m);
        let centers: Vec<Point> = if m > 0 {
            base.iter().map(|&t| k.point(t)).collect()
        } else {
            (0..8).map(|i| k.point(i as f64 / 8.0)).collect()
        };
        let mut inner = Vec::with_capacity(g.n_inner());
        for _ in 0..g.n_inner() {
            let c = centers[rng.gen_range(0..centers.len())];
            let y = self.shell.sample(rng, c);
            density *= self.shell.mixture_density(&centers, &y);
            inner.push(y);
        }
        (Configuration { base_params: base, inner_points: inner, frame: None }, density)
    }
}

pub fn sample_configuration(g: &KnotGraph, k: &KnotCurve, seed: u64) -> (Configuration, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ConfigurationSampler::new(k).sample(g, k, &mut rng)
}

/// Scale of the inner-vertex shell for collapsed configurations, whose base
/// points span unit length.
pub const COLLAPSED_SHELL_SCALE: f64 = 0.5;

/// Proposal on the space of collapsed configurations: direction x uniform on
/// S² (density 1/4π), base points on the line through x with the first at 0.
///
/// With two or more base points the last sits at 1 and the middle heights are
/// uniform on the ordered simplex. With one base point the scale is fixed by
/// putting the first inner vertex on the unit sphere around it instead.
pub fn sample_collapsed<R: Rng>(g: &KnotGraph, rng: &mut R) -> Result<(Configuration, f64), GeometryError> {
    let m = g.n_base();
    if m == 0 {
        return Err(GeometryError::Mismatch("collapsed configurations need a base point".into()));
    }
    let x = unit_vector(rng);
    let mut density = 1.0 / (4.0 * PI);
    let mut heights = vec![0.0];
    if m >= 2 {
        let mut mid: Vec<f64> = (0..m - 2).map(|_| rng.gen::<f64>()).collect();
        mid.sort_by(|a, b| a.partial_cmp(b).unwrap());
        heights.extend(mid);
        heights.push(1.0);
        density *= factorial(m - 2);
    }
    let centers: Vec<Point> = heights.iter().map(|&h| x * h).collect();
    let shell = CauchyShell { scale: COLLAPSED_SHELL_SCALE };
    let mut inner = Vec::with_capacity(g.n_inner());
    for j in 0..g.n_inner() {
        if m == 1 && j == 0 {
            inner.push(unit_vector(rng));
            density *= 1.0 / (4.0 * PI);
            continue;
        }
        let c = centers[rng.gen_range(0..centers.len())];
        let y = shell.sample(rng, c);
        density *= shell.mixture_density(&centers, &y);
        inner.push(y);
    }
    Ok((Configuration { base_params: heights, inner_points: inner, frame: Some(x) }, density))
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Orthonormal tangent frame (e1, e2) at the unit vector `u`, e1 x e2 = u.
/// Seeds e1 from the coordinate axis least aligned with u.
pub fn tangent_frame(u: &Point) -> (Point, Point) {
    let a = u.iamin();
    let mut seed = Point::zeros();
    seed[a] = 1.0;
    let e1 = (seed - u * u.dot(&seed)).normalize();
    let e2 = u.cross(&e1);
    (e1, e2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_is_right_handed() {
        for u in [Point::x(), Point::y(), Point::z(), Point::new(0.3, -0.4, 0.866).normalize()] {
            let (e1, e2) = tangent_frame(&u);
            assert!((e1.cross(&e2) - u).norm() < 1e-14);
            assert!(e1.dot(&u).abs() < 1e-14);
        }
    }

    #[test]
    fn derivatives_match_differences() {
        let curves = [
            KnotCurve::Unknot,
            KnotCurve::Trefoil,
            KnotCurve::Figure8,
            KnotCurve::Torus { p: 2, q: 5 },
            KnotCurve::Trefoil.moved(
                RigidMotion {
                    rotation: Rotation3::from_euler_angles(0.3, -1.1, 2.0),
                    translation: Point::new(1.0, -2.0, 0.5),
                },
                0.4,
            ),
        ];
        for k in &curves {
            for i in 0..50 {
                let t = i as f64 / 50.0 + 0.0037;
                let h = 1e-6;
                let fd = (k.point(t + h) - k.point(t - h)) / (2.0 * h);
                assert!((fd - k.derivative(t)).norm() < 1e-5 * (1.0 + fd.norm()), "{k:?} at {t}");
            }
        }
    }

    #[test]
    fn segment_distance_cases() {
        let o = Point::zeros();
        assert!(
            (segment_distance(o, Point::x(), Point::new(0.5, 1.0, 1.0), Point::new(0.5, -1.0, 1.0)) - 1.0).abs()
                < 1e-12
        );
        assert!(
            (segment_distance(o, Point::x(), Point::new(2.0, 0.0, 0.0), Point::new(3.0, 0.0, 0.0)) - 1.0).abs() < 1e-12
        );
    }
}
