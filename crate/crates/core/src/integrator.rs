//! Monte-Carlo evaluation of configuration-space integrals on a knot and of
//! the anomaly integrals over collapsed configurations.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::diagram::{enumerate_diagrams, DiagramError, KnotGraph};
use crate::geometry::{
    sample_collapsed, tangent_frame, Configuration, ConfigurationSampler, GeometryError, KnotCurve, Point,
    DEGENERATE_EDGE,
};
use crate::strata::EdgeOrdering;

/// Draws per chunk. Chunk `i` draws from ChaCha stream `i` of the seed, so
/// nearby seeds share no chunks.
pub const CHUNK: u64 = 4096;

/// Integrands that vanish identically leave estimates at roundoff level with
/// a stderr of the same size; below this they count as 0.
pub const ROUNDOFF: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum IntegratorError {
    #[error("dimension mismatch: {coords} coordinates for {edges} edges (need 2 per edge)")]
    Dimension { coords: usize, edges: usize },
    #[error("edge {0} is degenerate")]
    DegenerateEdge(usize),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("sample count must be positive")]
    NoSamples,
    #[error("thread pool: {0}")]
    Threads(String),
    #[error(transparent)]
    Diagram(#[from] DiagramError),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntegralEstimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: u64,
    pub rejected: u64,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct McOptions {
    pub samples: u64,
    pub seed: u64,
    pub threads: usize,
}

impl McOptions {
    pub fn new(samples: u64, seed: u64) -> Self {
        McOptions { samples, seed, threads: 1 }
    }

    pub fn threads(self, threads: usize) -> Self {
        McOptions { threads: threads.max(1), ..self }
    }
}

/// Top-degree condition: m + 3s = 2k.
pub fn check_dimension(g: &KnotGraph) -> bool {
    g.n_base() + 3 * g.n_inner() == 2 * g.n_edges()
}

/// Vertex positions with their partial derivatives in sampling coordinates.
#[derive(Clone, Debug)]
pub struct Chart {
    pub points: Vec<Point>,
    /// For each vertex, the nonzero columns `(coordinate, ∂position)`.
    pub partials: Vec<Vec<(usize, Point)>>,
    pub coords: usize,
}

/// Chart for a configuration on a knot: coordinates t₁..t_m, then x, y, z of
/// each inner vertex in inner order.
pub fn knot_chart(g: &KnotGraph, k: &KnotCurve, c: &Configuration) -> Result<Chart, IntegratorError> {
    let points = c.positions(g, Some(k))?;
    let m = g.n_base();
    let mut partials = Vec::with_capacity(g.n_vertices());
    for (i, &t) in c.base_params.iter().enumerate() {
        partials.push(vec![(i, k.derivative(t))]);
    }
    for j in 0..g.n_inner() {
        let col = m + 3 * j;
        partials.push(vec![(col, Point::x()), (col + 1, Point::y()), (col + 2, Point::z())]);
    }
    Ok(Chart { points, partials, coords: m + 3 * g.n_inner() })
}

/// Chart for a collapsed configuration: two tangent coordinates of the line
/// direction x, then the free base heights, then the inner vertices. With a
/// single base point the first inner vertex is on the unit sphere around it
/// and contributes two tangent coordinates.
pub fn collapsed_chart(g: &KnotGraph, c: &Configuration) -> Result<Chart, IntegratorError> {
    let x = c.frame.ok_or_else(|| GeometryError::Mismatch("collapsed chart needs a frame".into()))?;
    let points = c.positions(g, None)?;
    let m = g.n_base();
    let (e1, e2) = tangent_frame(&x);
    let mut partials = Vec::with_capacity(g.n_vertices());
    let free_heights = m.saturating_sub(2);
    for (i, &h) in c.base_params.iter().enumerate() {
        let mut p = vec![(0, e1 * h), (1, e2 * h)];
        if i > 0 && i + 1 < m {
            p.push((1 + i, x));
        }
        partials.push(p);
    }
    let mut col = 2 + free_heights;
    for j in 0..g.n_inner() {
        if m == 1 && j == 0 {
            let w = c.inner_points[0] - points[0];
            let (f1, f2) = tangent_frame(&w.normalize());
            partials.push(vec![(col, f1), (col + 1, f2)]);
            col += 2;
        } else {
            partials.push(vec![(col, Point::x()), (col + 1, Point::y()), (col + 2, Point::z())]);
            col += 3;
        }
    }
    Ok(Chart { points, partials, coords: col })
}

/// Rows of the direction derivative for every edge position: for edge (a, b)
/// with unit direction u, the tangent components e1·∂u and e2·∂u.
pub fn direction_jacobian(g: &KnotGraph, o: &EdgeOrdering, chart: &Chart) -> Result<DMatrix<f64>, IntegratorError> {
    let k = o.len();
    let mut j = DMatrix::zeros(2 * k, chart.coords);
    for p in 0..k {
        let e = o.edge_at(p);
        let (a, b) = g.edges()[e];
        let d = chart.points[b] - chart.points[a];
        let r = d.norm();
        if r < DEGENERATE_EDGE {
            return Err(IntegratorError::DegenerateEdge(e));
        }
        let u = d / r;
        let (e1, e2) = tangent_frame(&u);
        // e·∂u = e·∂d / r because e ⟂ u.
        for &(col, dp) in &chart.partials[b] {
            j[(2 * p, col)] += e1.dot(&dp) / r;
            j[(2 * p + 1, col)] += e2.dot(&dp) / r;
        }
        for &(col, dp) in &chart.partials[a] {
            j[(2 * p, col)] -= e1.dot(&dp) / r;
            j[(2 * p + 1, col)] -= e2.dot(&dp) / r;
        }
    }
    Ok(j)
}

/// Density of the pulled-back product of unit area forms, det J / (4π)^k.
pub fn pullback_density(g: &KnotGraph, o: &EdgeOrdering, chart: &Chart) -> Result<f64, IntegratorError> {
    let k = o.len();
    if chart.coords != 2 * k {
        return Err(IntegratorError::Dimension { coords: chart.coords, edges: k });
    }
    let j = direction_jacobian(g, o, chart)?;
    Ok(j.determinant() / (4.0 * PI).powi(k as i32))
}

pub fn integrand(g: &KnotGraph, o: &EdgeOrdering, k: &KnotCurve, c: &Configuration) -> Result<f64, IntegratorError> {
    pullback_density(g, o, &knot_chart(g, k, c)?)
}

pub fn anomaly_integrand(g: &KnotGraph, o: &EdgeOrdering, c: &Configuration) -> Result<f64, IntegratorError> {
    pullback_density(g, o, &collapsed_chart(g, c)?)
}

#[derive(Clone, Copy, Debug, Default)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
    rejected: u64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, o: Moments) -> Moments {
        if self.n == 0 {
            return Moments { rejected: self.rejected + o.rejected, ..o };
        }
        if o.n == 0 {
            return Moments { rejected: self.rejected + o.rejected, ..self };
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        Moments {
            n,
            mean: self.mean + d * o.n as f64 / n as f64,
            m2: self.m2 + o.m2 + d * d * (self.n as f64) * (o.n as f64) / n as f64,
            rejected: self.rejected + o.rejected,
        }
    }
}

/// Runs `draw` `opts.samples` times in seeded chunks and reduces the chunk
/// statistics in chunk order, so the result is independent of `threads`.
/// `draw` returns `None` for a rejected (degenerate) sample.
pub fn monte_carlo<F>(opts: &McOptions, draw: F) -> Result<IntegralEstimate, IntegratorError>
where
    F: Fn(&mut ChaCha8Rng) -> Option<f64> + Sync,
{
    if opts.samples == 0 {
        return Err(IntegratorError::NoSamples);
    }
    let n_chunks = opts.samples.div_ceil(CHUNK);
    let run_chunk = |i: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        rng.set_stream(i);
        let count = CHUNK.min(opts.samples - i * CHUNK);
        let mut m = Moments::default();
        for _ in 0..count {
            match draw(&mut rng) {
                Some(x) if x.is_finite() => m.push(x),
                _ => m.rejected += 1,
            }
        }
        m
    };
    let chunks: Vec<Moments> = if opts.threads <= 1 {
        (0..n_chunks).map(run_chunk).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.threads)
            .build()
            .map_err(|e| IntegratorError::Threads(e.to_string()))?;
        pool.install(|| (0..n_chunks).into_par_iter().map(run_chunk).collect())
    };
    let total = chunks.into_iter().fold(Moments::default(), Moments::merge);
    let stderr = if total.n > 1 { (total.m2 / (total.n - 1) as f64 / total.n as f64).sqrt() } else { 0.0 };
    Ok(IntegralEstimate { value: total.mean, stderr, samples: opts.samples, rejected: total.rejected, seed: opts.seed })
}

/// Importance-sampled I(Γ, K).
pub fn integrate_diagram(
    g: &KnotGraph,
    o: &EdgeOrdering,
    k: &KnotCurve,
    opts: &McOptions,
) -> Result<IntegralEstimate, IntegratorError> {
    if !check_dimension(g) {
        return Err(IntegratorError::Dimension { coords: g.n_base() + 3 * g.n_inner(), edges: g.n_edges() });
    }
    let sampler = ConfigurationSampler::new(k);
    monte_carlo(opts, |rng| {
        let (c, density) = sampler.sample(g, k, rng);
        integrand(g, o, k, &c).ok().map(|f| f / density)
    })
}

/// Importance-sampled anomaly integral over collapsed configurations.
pub fn integrate_anomaly(
    g: &KnotGraph,
    o: &EdgeOrdering,
    opts: &McOptions,
) -> Result<IntegralEstimate, IntegratorError> {
    if !check_dimension(g) {
        return Err(IntegratorError::Dimension { coords: g.n_base() + 3 * g.n_inner(), edges: g.n_edges() });
    }
    if g.n_base() == 0 {
        return Err(GeometryError::Mismatch("the anomaly needs a base point".into()).into());
    }
    monte_carlo(opts, |rng| {
        let (c, density) = sample_collapsed(g, rng).ok()?;
        anomaly_integrand(g, o, &c).ok().map(|f| f / density)
    })
}

/// |value| ≤ `bound` and value within 3 stderr (plus `ROUNDOFF`) of 0.
pub fn consistent_with_zero(e: &IntegralEstimate, bound: f64) -> bool {
    e.value.abs() <= bound && e.value.abs() <= 3.0 * e.stderr + ROUNDOFF
}

/// Seed of the class at `index` in the enumeration order. Each class draws
/// from its own stream, the same for every knot.
pub fn class_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_add((index as u64) << 32)
}

/// The anomaly integral of every top-degree order-`n` class with a base
/// point, class `i` seeded by `class_seed(opts.seed, i)`.
pub fn anomaly_classes(n: i64, opts: &McOptions) -> Result<Vec<(KnotGraph, IntegralEstimate)>, IntegratorError> {
    let mut out = Vec::new();
    for (i, g) in enumerate_diagrams(n, 3 * n.max(0) as usize)?.into_iter().enumerate() {
        if !check_dimension(&g) || g.n_base() == 0 {
            continue;
        }
        let o = EdgeOrdering::identity(g.n_edges());
        let e = integrate_anomaly(&g, &o, &McOptions { seed: class_seed(opts.seed, i), ..*opts })?;
        out.push((g, e));
    }
    Ok(out)
}
