//! Height and ground functions of line configurations, the graph metric,
//! the ground-basis trivialization with its boundary and isotopy behaviour,
//! and the transition maps of the identifications.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use nalgebra::DMatrix;
use num_complex::Complex64;
use petgraph::algo::dijkstra;
use petgraph::graph::{NodeIndex, UnGraph};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::diagram::KnotGraph;
use crate::strata::{all_strata, EdgeOrdering, StrataError, Stratum, StratumType};

/// Tolerance for entries that are exact in real arithmetic: unit diagonals,
/// vanishing off-triangle entries, signs.
pub const EXACT: f64 = 1e-9;

/// Smallest edge height difference accepted by `random_height`.
const MIN_GAP: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BundleError {
    #[error("vertices {0} and {1} are not connected")]
    Disconnected(usize, usize),
    #[error("inner vertex {0} is not connected to the reference set")]
    Isolated(String),
    #[error("not a height function: {0}")]
    NotHeight(String),
    #[error("edge {0} has zero height difference")]
    FlatEdge(usize),
    #[error("transposition index {r} out of range for {s} inner vertices")]
    BadTransposition { r: usize, s: usize },
    #[error("λ = {0} is too large for a valid height function")]
    LambdaTooLarge(f64),
    #[error("{0}")]
    Unsupported(String),
    #[error(transparent)]
    Strata(#[from] StrataError),
}

/// Real height h: V(Γ) → ℝ, increasing on base points, nonconstant on edges.
#[derive(Clone, Debug, PartialEq)]
pub struct HeightFunction {
    pub values: Vec<f64>,
}

impl HeightFunction {
    pub fn new(g: &KnotGraph, values: Vec<f64>) -> Result<Self, BundleError> {
        if values.len() != g.n_vertices() {
            return Err(BundleError::NotHeight(format!("{} values for {} vertices", values.len(), g.n_vertices())));
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(BundleError::NotHeight("non-finite value".into()));
        }
        for b in 1..g.n_base() {
            if values[b] <= values[b - 1] {
                return Err(BundleError::NotHeight(format!("base points {} and {} out of order", b - 1, b)));
            }
        }
        for (e, &(v, w)) in g.edges().iter().enumerate() {
            if values[v] == values[w] {
                return Err(BundleError::FlatEdge(e));
            }
        }
        Ok(HeightFunction { values })
    }

    /// Smallest edge height difference, ε(h).
    pub fn epsilon(&self, g: &KnotGraph) -> f64 {
        g.edges().iter().map(|&(v, w)| (self.values[v] - self.values[w]).abs()).fold(f64::INFINITY, f64::min)
    }

    /// Largest pairwise difference, |h|.
    pub fn extent(&self) -> f64 {
        let lo = self.values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        hi - lo
    }
}

/// Uniform heights in [0, 1), base points sorted, resampled until every edge
/// differs by at least 1e-6.
pub fn random_height<R: Rng>(g: &KnotGraph, rng: &mut R) -> HeightFunction {
    random_height_separated(g, MIN_GAP, rng)
}

/// As `random_height`, with base points and edge endpoints at least `gap` apart.
pub fn random_height_separated<R: Rng>(g: &KnotGraph, gap: f64, rng: &mut R) -> HeightFunction {
    loop {
        let mut values: Vec<f64> = (0..g.n_vertices()).map(|_| rng.gen::<f64>()).collect();
        values[..g.n_base()].sort_by(|a, b| a.partial_cmp(b).unwrap());
        let ok = (1..g.n_base()).all(|b| values[b] - values[b - 1] >= gap)
            && g.edges().iter().all(|&(v, w)| (values[v] - values[w]).abs() >= gap);
        if ok {
            return HeightFunction { values };
        }
    }
}

/// Complex ground function g: V(Γ) → ℂ.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundFunction {
    pub values: Vec<Complex64>,
}

impl GroundFunction {
    pub fn real(values: &[f64]) -> Self {
        GroundFunction { values: values.iter().map(|&x| Complex64::new(x, 0.0)).collect() }
    }

    pub fn vanishes_on_base(&self, g: &KnotGraph) -> bool {
        g.base_points().all(|b| self.values[b] == Complex64::new(0.0, 0.0))
    }
}

/// All-pairs h-length metric d(h, v, w); unreachable pairs are +∞.
pub fn metric(g: &KnotGraph, h: &HeightFunction) -> Vec<Vec<f64>> {
    let mut graph: UnGraph<(), f64> = UnGraph::with_capacity(g.n_vertices(), g.n_edges());
    let nodes: Vec<NodeIndex> = (0..g.n_vertices()).map(|_| graph.add_node(())).collect();
    for &(v, w) in g.edges() {
        graph.add_edge(nodes[v], nodes[w], (h.values[v] - h.values[w]).abs());
    }
    (0..g.n_vertices())
        .map(|v| {
            let reach = dijkstra(&graph, nodes[v], None, |e| *e.weight());
            (0..g.n_vertices()).map(|w| reach.get(&nodes[w]).copied().unwrap_or(f64::INFINITY)).collect()
        })
        .collect()
}

pub fn h_metric(g: &KnotGraph, h: &HeightFunction, v: usize, w: usize) -> Result<f64, BundleError> {
    let d = metric(g, h)[v][w];
    if d.is_finite() {
        Ok(d)
    } else {
        Err(BundleError::Disconnected(v, w))
    }
}

/// g(v) = max(0, r − d(y, v)) with r = `radius`.
fn bump(dist: &[Vec<f64>], y: usize, radius: f64) -> Vec<f64> {
    dist[y].iter().map(|&d| (radius - d).max(0.0)).collect()
}

/// min over `set` of d(h, y, ·).
fn radius(g: &KnotGraph, dist: &[Vec<f64>], y: usize, set: &[usize]) -> Result<f64, BundleError> {
    let r = set.iter().map(|&u| dist[y][u]).fold(f64::INFINITY, f64::min);
    if r.is_finite() {
        Ok(r)
    } else {
        Err(BundleError::Isolated(g.label(y).to_string()))
    }
}

/// V(yᵢ): the base points together with the inner vertices after yᵢ.
fn reference_set(g: &KnotGraph, order: &[usize], i: usize) -> Vec<usize> {
    g.base_points().chain(order[i + 1..].iter().copied()).collect()
}

pub fn default_order(g: &KnotGraph) -> Vec<usize> {
    g.inner_vertices().collect()
}

/// The basis b(h, yᵢ) = (g(h, yᵢ), h) and its image θ(h) under Ψ.
///
/// Without base points ground functions are taken modulo constants: the
/// basis omits the last inner vertex y_r and `theta` is unchanged by the
/// shift.
#[derive(Clone, Debug)]
pub struct GroundBasis {
    pub height: HeightFunction,
    /// Inner vertices indexing the basis, in order.
    pub order: Vec<usize>,
    pub basis: Vec<GroundFunction>,
    /// k × s, column i is Ψ(bᵢ) in identity edge order.
    pub theta: DMatrix<Complex64>,
}

pub fn ground_basis(g: &KnotGraph, h: &HeightFunction) -> Result<GroundBasis, BundleError> {
    ground_basis_in(g, h, &default_order(g))
}

/// Ground basis for an explicit inner order.
pub fn ground_basis_in(g: &KnotGraph, h: &HeightFunction, order: &[usize]) -> Result<GroundBasis, BundleError> {
    let dist = metric(g, h);
    let n_basis = if g.n_base() == 0 { order.len().saturating_sub(1) } else { order.len() };
    let mut basis = Vec::with_capacity(n_basis);
    for i in 0..n_basis {
        let y = order[i];
        let r = radius(g, &dist, y, &reference_set(g, order, i))?;
        basis.push(GroundFunction::real(&bump(&dist, y, r)));
    }
    // Every inner vertex must reach the reference set of the last one too.
    if g.n_base() > 0 {
        for &y in order {
            radius(g, &dist, y, &g.base_points().collect::<Vec<_>>())?;
        }
    } else if let Some(&last) = order.last() {
        for &y in order {
            if !dist[y][last].is_finite() {
                return Err(BundleError::Isolated(g.label(y).to_string()));
            }
        }
    }
    let theta = theta_of(g, &EdgeOrdering::identity(g.n_edges()), &basis, h)?;
    Ok(GroundBasis { height: h.clone(), order: order.to_vec(), basis, theta })
}

fn theta_of(
    g: &KnotGraph,
    o: &EdgeOrdering,
    basis: &[GroundFunction],
    h: &HeightFunction,
) -> Result<DMatrix<Complex64>, BundleError> {
    let mut theta = DMatrix::zeros(o.len(), basis.len());
    for (i, b) in basis.iter().enumerate() {
        for (p, z) in psi(g, o, b, h)?.into_iter().enumerate() {
            theta[(p, i)] = z;
        }
    }
    Ok(theta)
}

/// Ψ(g, h): the ratios (g(v) − g(w)) / (h(v) − h(w)) in edge order.
pub fn psi(
    g: &KnotGraph,
    o: &EdgeOrdering,
    gf: &GroundFunction,
    h: &HeightFunction,
) -> Result<Vec<Complex64>, BundleError> {
    (0..o.len())
        .map(|p| {
            let e = o.edge_at(p);
            let (v, w) = g.edges()[e];
            let dh = h.values[v] - h.values[w];
            if dh == 0.0 {
                return Err(BundleError::FlatEdge(e));
            }
            Ok((gf.values[v] - gf.values[w]) / dh)
        })
        .collect()
}

/// σ_min(θ(h)). An empty basis is trivially injective and reports +∞.
pub fn check_injective(gb: &GroundBasis) -> f64 {
    smallest_singular_value(&gb.theta)
}

pub fn smallest_singular_value(m: &DMatrix<Complex64>) -> f64 {
    if m.ncols() == 0 {
        return f64::INFINITY;
    }
    m.clone().svd(false, false).singular_values.iter().copied().fold(f64::INFINITY, f64::min)
}

/// det(θᴴθ), the product of squared singular values.
pub fn gram_determinant(m: &DMatrix<Complex64>) -> f64 {
    (m.adjoint() * m).determinant().re
}

pub fn column_norms(m: &DMatrix<Complex64>) -> Vec<f64> {
    m.column_iter().map(|c| c.norm()).collect()
}

/// G_ij = g(h, yᵢ)(y_j) for the ground basis in `order`.
pub fn basis_matrix(g: &KnotGraph, h: &HeightFunction, order: &[usize]) -> Result<DMatrix<f64>, BundleError> {
    let gb = ground_basis_in(g, h, order)?;
    let s = gb.basis.len();
    Ok(DMatrix::from_fn(s, s, |i, j| gb.basis[i].values[order[j]].re))
}

/// Determinants along the blend between the bases for the inner order and
/// for the order with positions r and r+1 (0-based) swapped.
#[derive(Clone, Debug, Serialize)]
pub struct IsotopyReport {
    pub r: usize,
    pub t: Vec<f64>,
    /// det G for b_t.
    pub det: Vec<f64>,
    /// The block-triangular closed form for b_t.
    pub det_closed: Vec<f64>,
    /// det G for b′_t.
    pub det_swapped: Vec<f64>,
    pub det_swapped_closed: Vec<f64>,
}

impl IsotopyReport {
    pub fn worst(&self) -> f64 {
        self.det.iter().chain(&self.det_swapped).copied().fold(f64::INFINITY, f64::min)
    }

    /// Largest relative gap between a determinant and its closed form.
    pub fn closed_form_gap(&self) -> f64 {
        self.det
            .iter()
            .zip(&self.det_closed)
            .chain(self.det_swapped.iter().zip(&self.det_swapped_closed))
            .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max)
    }
}

pub const BLEND_POINTS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

/// Blended radii d_t = t·d + (1 − t)·d̄ and the matrix G_ij = g_t(h, yᵢ)(y_j).
/// `order` is the ordering whose radii d are blended; `bar` gives V̄(yᵢ).
fn blend_matrix(
    g: &KnotGraph,
    dist: &[Vec<f64>],
    order: &[usize],
    bar: &[Vec<usize>],
    t: f64,
) -> Result<DMatrix<f64>, BundleError> {
    let s = order.len();
    let mut m = DMatrix::zeros(s, s);
    for i in 0..s {
        let y = order[i];
        let d = radius(g, dist, y, &reference_set(g, order, i))?;
        let dbar = radius(g, dist, y, &bar[i])?;
        let f = bump(dist, y, t * d + (1.0 - t) * dbar);
        for j in 0..s {
            m[(i, j)] = f[order[j]];
        }
    }
    Ok(m)
}

fn closed_form(m: &DMatrix<f64>, r: usize) -> f64 {
    let mut p = 1.0;
    for i in 0..m.nrows() {
        if i != r && i != r + 1 {
            p *= m[(i, i)];
        }
    }
    p * (m[(r, r)] * m[(r + 1, r + 1)] - m[(r, r + 1)] * m[(r + 1, r)])
}

/// Blend determinants for the adjacent transposition at `r` (0-based). Rows
/// of both matrices list the vertices in the original order.
pub fn isotopy_check(g: &KnotGraph, h: &HeightFunction, r: usize) -> Result<IsotopyReport, BundleError> {
    let order = default_order(g);
    let s = order.len();
    if g.n_base() == 0 || r + 1 >= s {
        return Err(BundleError::BadTransposition { r, s });
    }
    let dist = metric(g, h);
    let mut swapped = order.clone();
    swapped.swap(r, r + 1);
    // V̄(y_r) = V̄(y_{r+1}) = V₀ ∪ {y_{r+2}, …}; other sets as in the order.
    let bar: Vec<Vec<usize>> = (0..s).map(|i| reference_set(g, &order, if i == r { r + 1 } else { i })).collect();
    let mut bar_swapped = bar.clone();
    bar_swapped.swap(r, r + 1);
    let mut rep = IsotopyReport {
        r,
        t: BLEND_POINTS.to_vec(),
        det: vec![],
        det_closed: vec![],
        det_swapped: vec![],
        det_swapped_closed: vec![],
    };
    let back: Vec<usize> = (0..s)
        .map(|i| {
            if i == r {
                r + 1
            } else if i == r + 1 {
                r
            } else {
                i
            }
        })
        .collect();
    for &t in &BLEND_POINTS {
        let m = blend_matrix(g, &dist, &order, &bar, t)?;
        rep.det.push(m.determinant());
        rep.det_closed.push(closed_form(&m, r));
        let ms = blend_matrix(g, &dist, &swapped, &bar_swapped, t)?;
        // Back to the original vertex order: a simultaneous row and column
        // swap leaves the determinant unchanged.
        let ms = DMatrix::from_fn(s, s, |i, j| ms[(back[i], back[j])]);
        rep.det_swapped.push(ms.determinant());
        rep.det_swapped_closed.push(closed_form(&ms, r));
    }
    Ok(rep)
}

/// The blended ground basis b_t itself, for comparing endpoints.
pub fn blended_basis(
    g: &KnotGraph,
    h: &HeightFunction,
    r: usize,
    t: f64,
    swapped: bool,
) -> Result<DMatrix<f64>, BundleError> {
    let order = default_order(g);
    let s = order.len();
    if g.n_base() == 0 || r + 1 >= s {
        return Err(BundleError::BadTransposition { r, s });
    }
    let dist = metric(g, h);
    let mut bar: Vec<Vec<usize>> = (0..s).map(|i| reference_set(g, &order, if i == r { r + 1 } else { i })).collect();
    let m = if swapped {
        let mut sw = order.clone();
        sw.swap(r, r + 1);
        bar.swap(r, r + 1);
        let back: Vec<usize> = (0..s)
            .map(|i| {
                if i == r {
                    r + 1
                } else if i == r + 1 {
                    r
                } else {
                    i
                }
            })
            .collect();
        let ms = blend_matrix(g, &dist, &sw, &bar, t)?;
        DMatrix::from_fn(s, s, |i, j| ms[(back[i], back[j])])
    } else {
        blend_matrix(g, &dist, &order, &bar, t)?
    };
    Ok(m)
}

/// Signed permutation: basis vector i goes to `signs[i]` times basis vector
/// `perm[i]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct SignedPerm {
    pub perm: Vec<usize>,
    pub signs: Vec<i8>,
}

impl SignedPerm {
    pub fn identity(s: usize) -> Self {
        SignedPerm { perm: (0..s).collect(), signs: vec![1; s] }
    }

    pub fn diagonal(signs: Vec<i8>) -> Self {
        SignedPerm { perm: (0..signs.len()).collect(), signs }
    }

    pub fn permutation(perm: Vec<usize>) -> Self {
        let n = perm.len();
        SignedPerm { perm, signs: vec![1; n] }
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    /// `other` after `self`.
    pub fn then(&self, other: &SignedPerm) -> SignedPerm {
        let perm = self.perm.iter().map(|&j| other.perm[j]).collect();
        let signs = self.perm.iter().zip(&self.signs).map(|(&j, &s)| s * other.signs[j]).collect();
        SignedPerm { perm, signs }
    }

    /// Column i holds the image of basis vector i.
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(self.perm[i], i)] = f64::from(self.signs[i]);
        }
        m
    }

    /// Reads a matrix as a signed permutation, if every column has a single
    /// entry within `EXACT` of ±1 and zeros elsewhere.
    pub fn from_matrix(m: &DMatrix<f64>) -> Option<SignedPerm> {
        if m.nrows() != m.ncols() {
            return None;
        }
        let n = m.ncols();
        let mut perm = Vec::with_capacity(n);
        let mut signs = Vec::with_capacity(n);
        let mut used = vec![false; n];
        for i in 0..n {
            let mut hit = None;
            for j in 0..n {
                let x = m[(j, i)];
                if (x.abs() - 1.0).abs() <= EXACT {
                    if hit.is_some() {
                        return None;
                    }
                    hit = Some((j, if x > 0.0 { 1 } else { -1 }));
                } else if x.abs() > EXACT {
                    return None;
                }
            }
            let (j, s) = hit?;
            if used[j] {
                return None;
            }
            used[j] = true;
            perm.push(j);
            signs.push(s);
        }
        Some(SignedPerm { perm, signs })
    }
}

/// Homotopy normalization: a triangular matrix with diagonal entries ±1 is
/// joined to diag(±1) by scaling its off-diagonal part to zero.
pub fn normalize(raw: &DMatrix<f64>) -> Option<SignedPerm> {
    if let Some(p) = SignedPerm::from_matrix(raw) {
        return Some(p);
    }
    let n = raw.nrows();
    if n != raw.ncols() {
        return None;
    }
    let upper = (0..n).all(|i| (0..i).all(|j| raw[(i, j)].abs() <= EXACT));
    let lower = (0..n).all(|i| (i + 1..n).all(|j| raw[(i, j)].abs() <= EXACT));
    if !(upper || lower) {
        return None;
    }
    let mut signs = Vec::with_capacity(n);
    for i in 0..n {
        let d = raw[(i, i)];
        if (d.abs() - 1.0).abs() > EXACT {
            return None;
        }
        signs.push(if d > 0.0 { 1 } else { -1 });
    }
    Some(SignedPerm::diagonal(signs))
}

/// Transition map of one identification on the fibre over A(Γ), in the
/// ground basis of A(Γ) with the distinguished vertex first.
#[derive(Clone, Debug)]
pub struct TransitionMap {
    pub kind: StratumType,
    /// Parent vertices indexing the basis, in order.
    pub basis: Vec<usize>,
    /// Column i holds τ(bᵢ) in the basis at the image height.
    pub raw: DMatrix<f64>,
    pub normalized: Option<SignedPerm>,
}

impl TransitionMap {
    /// The normalized map on the whole inner basis of Γ, acting as the
    /// identity off A.
    pub fn embed(&self, parent: &KnotGraph) -> Option<SignedPerm> {
        let p = self.normalized.as_ref()?;
        let slot = |v: usize| v - parent.n_base();
        let mut out = SignedPerm::identity(parent.n_inner());
        for (i, &v) in self.basis.iter().enumerate() {
            out.perm[slot(v)] = slot(self.basis[p.perm[i]]);
            out.signs[slot(v)] = p.signs[i];
        }
        Some(out)
    }
}

/// A fibre over A(Γ): the collapsed graph with its basis order.
struct Fibre<'a> {
    c: &'a KnotGraph,
    /// Inner vertices of A(Γ) in basis order, distinguished vertex first.
    order: Vec<usize>,
}

impl Fibre<'_> {
    /// `lead` are placed first, in the given order.
    fn new<'a>(c: &'a KnotGraph, lead: &[usize]) -> Fibre<'a> {
        let mut order = lead.to_vec();
        order.extend(c.inner_vertices().filter(|w| !lead.contains(w)));
        Fibre { c, order }
    }

    fn basis(&self, h: &HeightFunction) -> Result<Vec<Vec<f64>>, BundleError> {
        Ok(ground_basis_in(self.c, h, &self.order)?
            .basis
            .into_iter()
            .map(|b| b.values.iter().map(|z| z.re).collect())
            .collect())
    }

    /// Basis slots: the order, minus the anchor y_r when A(Γ) has no base point.
    fn slots(&self) -> &[usize] {
        if self.c.n_base() == 0 {
            &self.order[..self.order.len() - 1]
        } else {
            &self.order
        }
    }

    /// Value of g at `v` relative to the anchor.
    fn value(&self, f: &[f64], v: usize) -> f64 {
        if self.c.n_base() == 0 {
            f[v] - f[*self.order.last().unwrap()]
        } else {
            f[v]
        }
    }

    /// Coordinates of τ(bᵢ) in the basis at τ(h).
    fn raw_matrix<F>(&self, h: &HeightFunction, h_image: &HeightFunction, tau: F) -> Result<DMatrix<f64>, BundleError>
    where
        F: Fn(&[f64]) -> Vec<f64>,
    {
        let before = self.basis(h)?;
        let after = self.basis(h_image)?;
        let slots = self.slots();
        let n = slots.len();
        let b = DMatrix::from_fn(n, n, |j, i| self.value(&after[i], slots[j]));
        let mut raw = DMatrix::zeros(n, n);
        let lu = b.lu();
        for (i, f) in before.iter().enumerate() {
            let image = tau(f);
            let rhs = DMatrix::from_fn(n, 1, |j, _| self.value(&image, slots[j]));
            let c = lu.solve(&rhs).ok_or_else(|| BundleError::Unsupported("singular image basis".into()))?;
            raw.set_column(i, &c.column(0));
        }
        Ok(raw)
    }
}

fn parent_basis(s: &Stratum, f: &Fibre) -> Vec<usize> {
    let kept: Vec<usize> = s.a.clone();
    f.slots().iter().map(|&v| kept[v]).collect()
}

fn require(s: &Stratum, t: StratumType) -> Result<(), BundleError> {
    let found = s.classify();
    if found != t {
        return Err(StrataError::WrongType { expected: t, found }.into());
    }
    if !s.collapsed.is_connected() {
        return Err(BundleError::Unsupported("A(Γ) must be connected".into()));
    }
    Ok(())
}

fn finish(kind: StratumType, basis: Vec<usize>, raw: DMatrix<f64>) -> TransitionMap {
    let normalized = normalize(&raw);
    TransitionMap { kind, basis, raw, normalized }
}

/// τ′₁ on D(A(Γ)): the univalent vertex v moves to h(v₁) ± 2‖h₁‖, and g(v)
/// to g(v₁) + 2‖h₁‖ (g(v) − g(v₁)) / |h(v) − h(v₁)|. `h` lives on A(Γ).
pub fn transition_type1(s: &Stratum, h: &HeightFunction) -> Result<TransitionMap, BundleError> {
    require(s, StratumType::TypeI)?;
    let u = s.univalent().expect("type I has a univalent vertex");
    let c = &s.collapsed;
    let norm = {
        let rest: Vec<f64> = (0..c.n_vertices()).filter(|&w| w != u.v).map(|w| h.values[w]).collect();
        rest.iter().copied().fold(f64::NEG_INFINITY, f64::max) - rest.iter().copied().fold(f64::INFINITY, f64::min)
    };
    let dh = h.values[u.v] - h.values[u.v1];
    let mut image = h.values.clone();
    image[u.v] = h.values[u.v1] + 2.0 * norm * dh.signum();
    let h_image = HeightFunction::new(c, image)?;
    let f = Fibre::new(c, &[u.v]);
    let raw = f.raw_matrix(h, &h_image, |g| {
        let mut out = g.to_vec();
        out[u.v] = g[u.v1] + 2.0 * norm * (g[u.v] - g[u.v1]) / dh.abs();
        out
    })?;
    Ok(finish(StratumType::TypeI, parent_basis(s, &f), raw))
}

/// τ′₂: the bivalent vertex reflects through its neighbours in g and h.
pub fn transition_type2(s: &Stratum, h: &HeightFunction) -> Result<TransitionMap, BundleError> {
    require(s, StratumType::TypeII)?;
    let b = s.bivalent().expect("type II has a bivalent vertex");
    let reflect = |g: &[f64]| {
        let mut out = g.to_vec();
        out[b.v] = g[b.w1] + g[b.w2] - g[b.v];
        out
    };
    let h_image = HeightFunction::new(&s.collapsed, reflect(&h.values))?;
    let f = Fibre::new(&s.collapsed, &[b.v]);
    let raw = f.raw_matrix(h, &h_image, reflect)?;
    Ok(finish(StratumType::TypeII, parent_basis(s, &f), raw))
}

/// Edge collapse: the basis vector of the inner endpoint v goes to
/// (g(v) − g(w)) / (h(v) − h(w)) = ±1 in ℂ.
pub fn transition_type3(s: &Stratum, h: &HeightFunction) -> Result<TransitionMap, BundleError> {
    require(s, StratumType::TypeIII)?;
    let c = &s.collapsed;
    let v = c.inner_vertices().next().expect("type III has an inner endpoint");
    let w = 1 - v;
    let f = Fibre::new(c, &[v]);
    let b = f.basis(h)?;
    let ratio = (b[0][v] - b[0][w]) / (h.values[v] - h.values[w]);
    let raw = DMatrix::from_element(1, 1, ratio);
    Ok(finish(StratumType::TypeIII, vec![s.a[v]], raw))
}

/// Two non-adjacent vertices: the identity on the inner vertices of A.
pub fn transition_type4(s: &Stratum) -> Result<TransitionMap, BundleError> {
    let found = s.classify();
    if found != StratumType::TypeIV {
        return Err(StrataError::WrongType { expected: StratumType::TypeIV, found }.into());
    }
    let basis: Vec<usize> = s.a.iter().copied().filter(|&v| !s.parent.is_base(v)).collect();
    let n = basis.len();
    Ok(finish(StratumType::TypeIV, basis, DMatrix::identity(n, n)))
}

/// Type Y: v and its trivalent neighbour v₁ both reflect through v₁'s other
/// neighbours w₁, w₂.
pub fn transition_type_y(s: &Stratum, h: &HeightFunction) -> Result<TransitionMap, BundleError> {
    require(s, StratumType::TypeY)?;
    let (v, v1, w1, w2) = s.tripod().expect("type Y has a tripod");
    let reflect = |g: &[f64]| {
        let mut out = g.to_vec();
        out[v] = g[w1] + g[w2] - g[v];
        out[v1] = g[w1] + g[w2] - g[v1];
        out
    };
    let h_image = HeightFunction::new(&s.collapsed, reflect(&h.values))?;
    let f = Fibre::new(&s.collapsed, &[v, v1]);
    let raw = f.raw_matrix(h, &h_image, reflect)?;
    Ok(finish(StratumType::TypeY, parent_basis(s, &f), raw))
}

/// Dispatches on the stratum type. Type 0 is absorbed by the extended T.D.
/// relation and acts as the identity.
pub fn transition(s: &Stratum, h: &HeightFunction) -> Result<TransitionMap, BundleError> {
    match s.classify() {
        StratumType::TypeI => transition_type1(s, h),
        StratumType::TypeII => transition_type2(s, h),
        StratumType::TypeIII => transition_type3(s, h),
        StratumType::TypeIV => transition_type4(s),
        StratumType::TypeY => transition_type_y(s, h),
        StratumType::Type0 => {
            let basis: Vec<usize> = s.a.iter().copied().filter(|&v| !s.parent.is_base(v)).collect();
            let n = basis.len();
            Ok(finish(StratumType::Type0, basis, DMatrix::identity(n, n)))
        }
        StratumType::Plain => Err(BundleError::Unsupported("plain strata carry no identification".into())),
    }
}

/// Shape checks on a raw transition matrix: unitriangular for type I, first
/// column −e₁ with bounded ρ′ for type II, a ±1 corner for type III.
#[derive(Clone, Debug, Default, Serialize)]
pub struct RawCheck {
    /// Largest deviation from the expected exact entries.
    pub exact_error: f64,
    /// Largest |ρ′ᵢ| (type II only).
    pub rho_max: f64,
}

pub fn check_raw(t: &TransitionMap) -> RawCheck {
    let m = &t.raw;
    let n = m.nrows();
    let mut out = RawCheck::default();
    match t.kind {
        StratumType::TypeI | StratumType::TypeII => {
            let d0 = if t.kind == StratumType::TypeI { 1.0 } else { -1.0 };
            for i in 0..n {
                for j in 0..n {
                    let want = if i == j {
                        if i == 0 {
                            d0
                        } else {
                            1.0
                        }
                    } else {
                        0.0
                    };
                    // Row 0 off the diagonal holds ρᵢ, free in type I and
                    // bounded by 2 in type II.
                    if i == 0 && j > 0 {
                        out.rho_max = out.rho_max.max(m[(i, j)].abs());
                        continue;
                    }
                    out.exact_error = out.exact_error.max((m[(i, j)] - want).abs());
                }
            }
        }
        StratumType::TypeIII => {
            out.exact_error = (m[(0, 0)].abs() - 1.0).abs();
        }
        _ => {}
    }
    out
}

/// Bound on the type II entries |ρ′ᵢ|.
pub const RHO_BOUND: f64 = 2.0;

/// Closure of the generators under composition, capped at `limit` elements.
pub fn group_closure(gens: &[SignedPerm], s: usize, limit: usize) -> BTreeSet<SignedPerm> {
    let mut seen = BTreeSet::new();
    let id = SignedPerm::identity(s);
    seen.insert(id.clone());
    let mut queue = VecDeque::from([id]);
    while let Some(x) = queue.pop_front() {
        for g in gens {
            let y = x.then(g);
            if seen.len() >= limit {
                return seen;
            }
            if seen.insert(y.clone()) {
                queue.push_back(y);
            }
        }
    }
    seen
}

pub fn hyperoctahedral_order(s: usize) -> u64 {
    (1..=s as u64).product::<u64>() << s
}

#[derive(Clone, Debug, Serialize)]
pub struct DiagramGroup {
    pub diagram: String,
    pub s: usize,
    pub generators: Vec<SignedPerm>,
    pub order: u64,
    pub divides: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Violation {
    pub diagram: String,
    pub kind: String,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct GroupCertificate {
    pub trials: usize,
    pub groups: Vec<DiagramGroup>,
    pub violations: Vec<Violation>,
    /// Largest deviation of a raw matrix from its exact form.
    pub worst_raw_error: f64,
    pub worst_rho: f64,
}

impl GroupCertificate {
    pub fn passed(&self) -> bool {
        self.violations.is_empty() && self.groups.iter().all(|g| g.divides)
    }
}

/// Strata that carry an identification and satisfy the codimension-one
/// hypothesis.
pub fn transition_strata(g: &KnotGraph) -> Vec<Stratum> {
    all_strata(g)
        .into_iter()
        .filter(|s| match s.classify() {
            StratumType::Plain => false,
            StratumType::TypeI | StratumType::TypeII | StratumType::TypeY => s.collapsed.is_connected(),
            _ => true,
        })
        .collect()
}

/// Seed for stream `stream` derived from `base`.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    base.wrapping_add(stream << 32)
}

struct Trial {
    diagram: usize,
    generator: Option<SignedPerm>,
    raw: RawCheck,
    violation: Option<Violation>,
}

/// Samples `trials` (diagram, stratum, height) triples, normalizes every
/// transition map, and closes the generators of each diagram together with
/// its automorphisms. `extra` injects raw matrices for a diagram index.
pub fn structure_group(
    diagrams: &[KnotGraph],
    trials: usize,
    seed: u64,
    extra: &[(usize, DMatrix<f64>)],
) -> GroupCertificate {
    let strata: Vec<(usize, Stratum)> =
        diagrams.iter().enumerate().flat_map(|(d, g)| transition_strata(g).into_iter().map(move |s| (d, s))).collect();
    let keys: Vec<String> = diagrams.iter().map(KnotGraph::canonical_key).collect();
    let run = |t: usize| -> Option<Trial> {
        if strata.is_empty() {
            return None;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, t as u64));
        let (d, s) = &strata[rng.gen_range(0..strata.len())];
        let h = random_height(&s.collapsed, &mut rng);
        let mut trial = Trial { diagram: *d, generator: None, raw: RawCheck::default(), violation: None };
        match transition(s, &h) {
            Ok(tm) => {
                trial.raw = check_raw(&tm);
                let bad_raw = trial.raw.exact_error > EXACT || trial.raw.rho_max > RHO_BOUND + EXACT;
                match tm.embed(&s.parent) {
                    Some(p) if !bad_raw => trial.generator = Some(p),
                    _ => {
                        trial.violation = Some(Violation {
                            diagram: keys[*d].clone(),
                            kind: format!("{:?}", tm.kind),
                            detail: format!("A = {:?}, raw = {:?}", s.a, tm.raw.as_slice()),
                        })
                    }
                }
            }
            Err(e) => {
                trial.violation = Some(Violation {
                    diagram: keys[*d].clone(),
                    kind: format!("{:?}", s.classify()),
                    detail: e.to_string(),
                })
            }
        }
        Some(trial)
    };
    let results: Vec<Trial> = (0..trials).into_par_iter().filter_map(run).collect();

    let mut gens: BTreeMap<usize, BTreeSet<SignedPerm>> = BTreeMap::new();
    let mut violations = Vec::new();
    let mut worst_raw_error: f64 = 0.0;
    let mut worst_rho: f64 = 0.0;
    for r in results {
        worst_raw_error = worst_raw_error.max(r.raw.exact_error);
        worst_rho = worst_rho.max(r.raw.rho_max);
        if let Some(v) = r.violation {
            violations.push(v);
        }
        if let Some(p) = r.generator {
            gens.entry(r.diagram).or_default().insert(p);
        }
    }
    for (d, m) in extra {
        match normalize(m) {
            Some(p) if p.len() == diagrams[*d].n_inner() => {
                gens.entry(*d).or_default().insert(p);
            }
            _ => violations.push(Violation {
                diagram: keys[*d].clone(),
                kind: "injected".into(),
                detail: format!("not a signed permutation up to homotopy: {:?}", m.as_slice()),
            }),
        }
    }
    let mut groups = Vec::new();
    for (d, g) in diagrams.iter().enumerate() {
        let s = g.n_inner();
        let set = gens.entry(d).or_default();
        for auto in g.automorphisms() {
            let perm = g.inner_vertices().map(|v| auto.vertex_map[v] - g.n_base()).collect();
            set.insert(SignedPerm::permutation(perm));
        }
        let generators: Vec<SignedPerm> = set.iter().cloned().collect();
        let bound = hyperoctahedral_order(s);
        let order = group_closure(&generators, s, bound as usize + 1).len() as u64;
        groups.push(DiagramGroup {
            diagram: keys[d].clone(),
            s,
            generators,
            order,
            divides: bound.is_multiple_of(order),
        });
    }
    GroupCertificate { trials, groups, violations, worst_raw_error, worst_rho }
}

/// The height family h_λ on Γ interpolating h₁ on Γ/A and h₂ on A(Γ):
/// h₁ off A, and h₁(a) + λ ε(h₁)/|h₂| (h₂(v) − h₂(a₀)) on A. The anchor a₀
/// is A's first base point, or its largest inner vertex y_r.
pub fn boundary_family(
    s: &Stratum,
    h1: &HeightFunction,
    h2: &HeightFunction,
    lambda: f64,
) -> Result<HeightFunction, BundleError> {
    if !(lambda > 0.0) {
        return Err(BundleError::LambdaTooLarge(lambda));
    }
    let eps = h1.epsilon(&s.quotient);
    if !eps.is_finite() {
        return Err(BundleError::Unsupported("Γ/A has no edges".into()));
    }
    let c = &s.collapsed;
    let a0 = if c.n_base() > 0 { 0 } else { c.n_vertices() - 1 };
    let scale = lambda * eps / h2.extent();
    let center = h1.values[s.new_vertex];
    let values = (0..s.parent.n_vertices())
        .map(|v| match s.collapsed_vertex[v] {
            Some(i) => center + scale * (h2.values[i] - h2.values[a0]),
            None => h1.values[s.quotient_vertex[v]],
        })
        .collect();
    HeightFunction::new(&s.parent, values).map_err(|_| BundleError::LambdaTooLarge(lambda))
}

/// ḡ: differences along edges of A(Γ) shrink by λ, the rest of g is kept.
/// Realised as ḡ(v) = g(a*) + λ (g(v) − g(a*)) on A with a* the anchor of
/// `boundary_family`; edges with both ends off A keep their differences
/// exactly, edges leaving A change by at most the spread of g over A.
pub fn modify_ground(s: &Stratum, g: &[f64], lambda: f64) -> Vec<f64> {
    let c = &s.collapsed;
    let anchor = if c.n_base() > 0 { s.a[0] } else { *s.a.last().unwrap() };
    let ga = g[anchor];
    (0..g.len()).map(|v| if s.collapsed_vertex[v].is_some() { ga + lambda * (g[v] - ga) } else { g[v] }).collect()
}

/// Ground basis of Γ at h_λ with ḡ for the inner vertices off A.
pub fn modified_basis(s: &Stratum, h_lambda: &HeightFunction, lambda: f64) -> Result<GroundBasis, BundleError> {
    let g = &s.parent;
    let mut gb = ground_basis(g, h_lambda)?;
    for (i, &y) in gb.order.iter().enumerate() {
        if s.collapsed_vertex[y].is_none() {
            let re: Vec<f64> = gb.basis[i].values.iter().map(|z| z.re).collect();
            gb.basis[i] = GroundFunction::real(&modify_ground(s, &re, lambda));
        }
    }
    gb.theta = theta_of(g, &EdgeOrdering::identity(g.n_edges()), &gb.basis, h_lambda)?;
    Ok(gb)
}

/// Worst-case errors of the boundary limits at one λ. `None` marks a limit
/// that does not apply to the stratum.
#[derive(Clone, Debug, Default, Serialize)]
pub struct LimitErrors {
    pub lambda: f64,
    /// g(h_λ, y) against g(h₁, y) for y off A (and y_r against ȳ_r).
    pub quotient: f64,
    /// g(h_λ, y)|_A / c against g(h₂, y), for y ∈ A (y ≠ y_r), in units of |h₂|.
    pub restriction: Option<f64>,
    /// |g(h_λ, y)(v)| for y ∈ A (y ≠ y_r), v ∉ A.
    pub zeros: Option<f64>,
    /// Largest |Ψ| ratio of ḡ(h_λ, y) on edges of A(Γ), for y off A.
    pub modified_restriction: Option<f64>,
    /// σ_min of the modified basis.
    pub modified_sigma_min: f64,
    /// Largest change of ḡ − g on edges with both ends off A.
    pub modified_off_a: f64,
    /// Ratios of g(h_λ, y_r) on A(Γ) edges against those of −d(h₂, y_r, ·).
    pub top: Option<f64>,
}

fn max_opt(a: Option<f64>, b: f64) -> Option<f64> {
    Some(a.map_or(b, |x| x.max(b)))
}

/// Evaluates every boundary limit for the stratum at `lambda`.
pub fn limit_errors(
    s: &Stratum,
    h1: &HeightFunction,
    h2: &HeightFunction,
    lambda: f64,
) -> Result<LimitErrors, BundleError> {
    let g = &s.parent;
    let c = &s.collapsed;
    let q = &s.quotient;
    let hl = boundary_family(s, h1, h2, lambda)?;
    let inner_only = c.n_base() == 0;
    let y_r = if inner_only { s.a.last().copied() } else { None };

    let full = ground_basis(g, &hl)?;
    let quot = ground_basis(q, h1)?;
    let coll = ground_basis(c, h2)?;
    let coeff = lambda * h1.epsilon(q) / h2.extent();
    let col = |y: usize| full.order.iter().position(|&w| w == y).unwrap();
    let quot_col = |y: usize| quot.order.iter().position(|&w| w == y).unwrap();

    let mut out = LimitErrors { lambda, ..Default::default() };
    for &y in &full.order {
        let gy: Vec<f64> = full.basis[col(y)].values.iter().map(|z| z.re).collect();
        let in_a = s.collapsed_vertex[y].is_some();
        if !in_a || Some(y) == y_r {
            let qy = quot_col(s.quotient_vertex[y]);
            for v in 0..g.n_vertices() {
                let want = quot.basis[qy].values[s.quotient_vertex[v]].re;
                out.quotient = out.quotient.max((gy[v] - want).abs());
            }
        } else {
            let cy = s.collapsed_vertex[y].unwrap();
            let ci = coll.order.iter().position(|&w| w == cy).expect("y ≠ y_r has a basis vector on A(Γ)");
            for v in 0..g.n_vertices() {
                match s.collapsed_vertex[v] {
                    Some(cv) => {
                        let err = (gy[v] / coeff - coll.basis[ci].values[cv].re).abs() / h2.extent();
                        out.restriction = max_opt(out.restriction, err);
                    }
                    None => out.zeros = max_opt(out.zeros, gy[v].abs()),
                }
            }
        }
    }

    let modified = modified_basis(s, &hl, lambda)?;
    out.modified_sigma_min = check_injective(&modified);
    for (i, &y) in full.order.iter().enumerate() {
        if s.collapsed_vertex[y].is_some() {
            continue;
        }
        for &(v, w) in g.edges() {
            let gv = modified.basis[i].values[v].re;
            let gw = modified.basis[i].values[w].re;
            match (s.collapsed_vertex[v].is_some(), s.collapsed_vertex[w].is_some()) {
                (true, true) => {
                    // ḡ differs by λ(g(v) − g(w)) along A(Γ) by definition.
                    // Taken in that form: the stored values sit near g(a*)
                    // and their difference would cancel.
                    let dg = lambda * (full.basis[i].values[v].re - full.basis[i].values[w].re);
                    let ratio = dg / (hl.values[v] - hl.values[w]);
                    out.modified_restriction = max_opt(out.modified_restriction, ratio.abs());
                }
                (false, false) => {
                    let before = full.basis[i].values[v].re - full.basis[i].values[w].re;
                    out.modified_off_a = out.modified_off_a.max((gv - gw - before).abs());
                }
                _ => {}
            }
        }
    }

    if let Some(yr) = y_r {
        let gy: Vec<f64> = full.basis[col(yr)].values.iter().map(|z| z.re).collect();
        let d2 = metric(c, h2);
        let cyr = s.collapsed_vertex[yr].unwrap();
        let mut worst: f64 = 0.0;
        for &(v, w) in g.edges() {
            if let (Some(cv), Some(cw)) = (s.collapsed_vertex[v], s.collapsed_vertex[w]) {
                let near = (gy[v] - gy[w]) / (hl.values[v] - hl.values[w]);
                let limit = -(d2[cyr][cv] - d2[cyr][cw]) / (h2.values[cv] - h2.values[cw]);
                worst = worst.max((near - limit).abs());
            }
        }
        out.top = Some(worst);
    }
    Ok(out)
}

/// Strata of Γ satisfying the hypotheses of the boundary limits: A(Γ)
/// connected, Γ/A with at least one edge and every inner vertex of Γ/A
/// reaching a base point.
pub fn limit_strata(g: &KnotGraph) -> Vec<Stratum> {
    all_strata(g)
        .into_iter()
        .filter(|s| {
            s.collapsed.is_connected()
                && s.quotient.n_edges() > 0
                && s.quotient.components().iter().all(|comp| comp.iter().any(|&v| s.quotient.is_base(v)))
        })
        .collect()
}

/// Separation of the heights drawn by `random_limit_heights`. Ratios on
/// edges of A(Γ) lose about u / (λ ε(h₁) ε(h₂)) to roundoff; at λ = 1e-6 this
/// gap keeps that below 1e-7.
pub const LIMIT_SEPARATION: f64 = 0.05;

/// Draws h₁ on Γ/A and h₂ on A(Γ) with extents 1, resampling until h_λ is
/// a height function at `lambda_max`. h₁ is translated so that h₁(a) = 0:
/// the cluster of A then carries full relative precision down to small λ.
pub fn random_limit_heights<R: Rng>(s: &Stratum, lambda_max: f64, rng: &mut R) -> (HeightFunction, HeightFunction) {
    loop {
        let h1 = random_height_separated(&s.quotient, LIMIT_SEPARATION, rng);
        let h2 = random_height_separated(&s.collapsed, LIMIT_SEPARATION, rng);
        let (e1, e2) = (h1.extent(), h2.extent());
        let a = h1.values[s.new_vertex];
        let h1 = HeightFunction { values: h1.values.iter().map(|x| (x - a) / e1).collect() };
        let lo = h2.values.iter().copied().fold(f64::INFINITY, f64::min);
        let h2 = HeightFunction { values: h2.values.iter().map(|x| (x - lo) / e2).collect() };
        if boundary_family(s, &h1, &h2, lambda_max).is_ok() {
            return (h1, h2);
        }
    }
}

/// Bound and worst case of one property over a suite.
#[derive(Clone, Debug, Serialize)]
pub struct PropertyCheck {
    pub property: String,
    /// `pass` or `fail`.
    pub status: String,
    pub worst_case: f64,
    pub tolerance: f64,
    pub checks: usize,
    pub violations: usize,
}

impl PropertyCheck {
    pub fn new(property: &str, worst_case: f64, tolerance: f64, checks: usize, violations: usize) -> Self {
        let status = if violations == 0 { "pass" } else { "fail" };
        PropertyCheck { property: property.into(), status: status.into(), worst_case, tolerance, checks, violations }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Multiple of f64::EPSILON in the roundoff estimate of a difference
/// quotient Δg/Δh: relative error about ROUNDOFF_FACTOR·ε·|h|/|Δh|.
pub const ROUNDOFF_FACTOR: f64 = 32.0;

/// σ_min(θ(h)) > 0 and column norms ≤ √k for `draws` random heights per
/// diagram. Diagrams use the streams `derive_seed(seed, index)`.
pub fn trivialization_suite(diagrams: &[KnotGraph], draws: usize, seed: u64) -> Vec<PropertyCheck> {
    let per: Vec<(f64, f64, usize, usize, usize)> = diagrams
        .par_iter()
        .enumerate()
        .map(|(d, g)| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, d as u64));
            let bound = (g.n_edges() as f64).sqrt();
            // Columns with every slope ±1 sit on the bound, so compare with
            // the roundoff of the slopes.
            let (mut sigma, mut ratio, mut n, mut bad_sigma, mut bad_norm) = (f64::INFINITY, 0.0f64, 0, 0, 0);
            for _ in 0..draws {
                n += 1;
                let h = random_height(g, &mut rng);
                let slack = ROUNDOFF_FACTOR * f64::EPSILON * h.extent() / h.epsilon(g);
                match ground_basis(g, &h) {
                    Ok(gb) => {
                        let sv = check_injective(&gb);
                        sigma = sigma.min(sv);
                        if sv.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
                            bad_sigma += 1;
                        }
                        for c in column_norms(&gb.theta) {
                            ratio = ratio.max(c / bound);
                            if c > bound * (1.0 + slack) {
                                bad_norm += 1;
                            }
                        }
                    }
                    Err(_) => {
                        bad_sigma += 1;
                        sigma = sigma.min(0.0);
                    }
                }
            }
            (sigma, ratio, n, bad_sigma, bad_norm)
        })
        .collect();
    let sigma = per.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let ratio = per.iter().map(|p| p.1).fold(0.0, f64::max);
    let n = per.iter().map(|p| p.2).sum();
    vec![
        PropertyCheck::new("trivialization.sigma_min_positive", sigma, 0.0, n, per.iter().map(|p| p.3).sum()),
        PropertyCheck::new("trivialization.column_norm_over_sqrt_k", ratio, 1.0, n, per.iter().map(|p| p.4).sum()),
    ]
}

/// det G > 0 along the blend for every adjacent transposition, `draws`
/// heights per diagram, at `BLEND_POINTS`. Also compares each determinant
/// with its block-triangular closed form.
pub fn isotopy_suite(diagrams: &[KnotGraph], draws: usize, seed: u64) -> Vec<PropertyCheck> {
    let per: Vec<(f64, f64, usize, usize, usize)> = diagrams
        .par_iter()
        .enumerate()
        .map(|(d, g)| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, d as u64));
            let s = g.n_inner();
            let (mut worst, mut gap, mut n, mut bad, mut bad_gap) = (f64::INFINITY, 0.0f64, 0, 0, 0);
            if g.n_base() == 0 || s < 2 {
                return (worst, gap, n, bad, bad_gap);
            }
            for _ in 0..draws {
                let h = random_height(g, &mut rng);
                for r in 0..s - 1 {
                    n += 2 * BLEND_POINTS.len();
                    match isotopy_check(g, &h, r) {
                        Ok(rep) => {
                            worst = worst.min(rep.worst());
                            bad += rep.det.iter().chain(&rep.det_swapped).filter(|&&x| x.is_nan() || x <= 0.0).count();
                            let cg = rep.closed_form_gap();
                            gap = gap.max(cg);
                            if cg > EXACT {
                                bad_gap += 1;
                            }
                        }
                        Err(_) => bad += 1,
                    }
                }
            }
            (worst, gap, n, bad, bad_gap)
        })
        .collect();
    let worst = per.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let gap = per.iter().map(|p| p.1).fold(0.0, f64::max);
    let n = per.iter().map(|p| p.2).sum();
    vec![
        PropertyCheck::new("isotopy.det_positive", worst, 0.0, n, per.iter().map(|p| p.3).sum()),
        PropertyCheck::new("isotopy.det_closed_form", gap, EXACT, n, per.iter().map(|p| p.4).sum()),
    ]
}

/// Properties of a structure-group certificate.
pub fn group_checks(cert: &GroupCertificate) -> Vec<PropertyCheck> {
    let raw_bad = cert.violations.iter().filter(|v| v.kind != "injected").count();
    let injected = cert.violations.len() - raw_bad;
    let not_dividing = cert.groups.iter().filter(|g| !g.divides).count();
    let largest = cert.groups.iter().map(|g| g.order).max().unwrap_or(1);
    vec![
        PropertyCheck::new("transition.raw_exact", cert.worst_raw_error, EXACT, cert.trials, raw_bad),
        PropertyCheck::new(
            "transition.rho_bound",
            cert.worst_rho,
            RHO_BOUND,
            cert.trials,
            usize::from(cert.worst_rho > RHO_BOUND + EXACT),
        ),
        PropertyCheck::new(
            "transition.signed_permutation",
            (raw_bad + injected) as f64,
            0.0,
            cert.trials,
            raw_bad + injected,
        ),
        PropertyCheck::new("structure_group.order_divides", largest as f64, 0.0, cert.groups.len(), not_dividing),
    ]
}

/// Limit tolerance at λ = 1e-6.
pub const LIMIT_TOLERANCE: f64 = 1e-6;
pub const LIMIT_LAMBDAS: [f64; 3] = [1e-2, 1e-4, 1e-6];

/// Roundoff of the slopes on edges of A(Γ) at `lambda`, for the unit-extent
/// heights of `random_limit_heights`: those edges have |Δh| ≳ λ·LIMIT_SEPARATION.
pub fn limit_roundoff(lambda: f64) -> f64 {
    ROUNDOFF_FACTOR * f64::EPSILON / (lambda * LIMIT_SEPARATION)
}

/// Every boundary limit at the smallest λ of `LIMIT_LAMBDAS` within
/// `LIMIT_TOLERANCE`, and non-increasing errors across `LIMIT_LAMBDAS` up to
/// `limit_roundoff`, for `draws` height pairs per limit stratum.
///
/// The ḡ restriction is λ times a slope of at most 1 and so sits on the
/// tolerance; it gets the relative allowance `limit_roundoff`.
pub fn limit_suite(diagrams: &[KnotGraph], draws: usize, seed: u64) -> Vec<PropertyCheck> {
    #[derive(Clone, Copy)]
    struct Acc {
        worst: f64,
        n: usize,
        bad: usize,
    }
    impl Acc {
        const EMPTY: Acc = Acc { worst: f64::NEG_INFINITY, n: 0, bad: 0 };
        fn push(&mut self, x: f64, ok: bool) {
            self.worst = self.worst.max(x);
            self.n += 1;
            if !ok {
                self.bad += 1;
            }
        }
        fn merge(self, o: Acc) -> Acc {
            Acc { worst: self.worst.max(o.worst), n: self.n + o.n, bad: self.bad + o.bad }
        }
    }
    const SERIES: [&str; 6] =
        ["quotient", "restriction", "zeros_off_a", "modified_restriction", "modified_off_a", "top_vertex"];
    fn series(e: &LimitErrors) -> [Option<f64>; 6] {
        [Some(e.quotient), e.restriction, e.zeros, e.modified_restriction, Some(e.modified_off_a), e.top]
    }
    const N: usize = 2 * SERIES.len() + 1;
    let small = LIMIT_LAMBDAS[LIMIT_LAMBDAS.len() - 1];
    let tol = |i: usize| if i == 3 { LIMIT_TOLERANCE * (1.0 + limit_roundoff(small)) } else { LIMIT_TOLERANCE };
    let per: Vec<[Acc; N]> = diagrams
        .par_iter()
        .enumerate()
        .map(|(d, g)| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, d as u64));
            let mut acc = [Acc::EMPTY; N];
            for s in limit_strata(g) {
                for _ in 0..draws {
                    let (h1, h2) = random_limit_heights(&s, LIMIT_LAMBDAS[0], &mut rng);
                    let errs: Result<Vec<LimitErrors>, _> =
                        LIMIT_LAMBDAS.iter().map(|&l| limit_errors(&s, &h1, &h2, l)).collect();
                    let Ok(errs) = errs else {
                        for a in acc.iter_mut() {
                            a.push(f64::INFINITY, false);
                        }
                        continue;
                    };
                    let rows: Vec<[Option<f64>; 6]> = errs.iter().map(series).collect();
                    for i in 0..SERIES.len() {
                        if let Some(x) = rows[rows.len() - 1][i] {
                            acc[2 * i].push(x, x <= tol(i));
                        }
                        let vals: Vec<(f64, f64)> =
                            rows.iter().zip(&LIMIT_LAMBDAS).filter_map(|(r, &l)| r[i].map(|x| (x, l))).collect();
                        if vals.len() > 1 {
                            let mut rise = 0.0f64;
                            let mut ok = true;
                            for w in vals.windows(2) {
                                let up = w[1].0 - w[0].0;
                                rise = rise.max(up);
                                ok &= up <= limit_roundoff(w[1].1);
                            }
                            acc[2 * i + 1].push(rise, ok);
                        }
                    }
                    let sm = errs[errs.len() - 1].modified_sigma_min;
                    acc[N - 1].push(-sm, sm > 0.0);
                }
            }
            acc
        })
        .collect();
    let total = per.into_iter().fold([Acc::EMPTY; N], |a, b| std::array::from_fn(|i| a[i].merge(b[i])));
    let worst = |a: Acc| if a.n == 0 { 0.0 } else { a.worst };
    let mut out = Vec::with_capacity(N);
    for (i, name) in SERIES.iter().enumerate() {
        let (a, m) = (total[2 * i], total[2 * i + 1]);
        out.push(PropertyCheck::new(&format!("limits.{name}"), worst(a), tol(i), a.n, a.bad));
        out.push(PropertyCheck::new(&format!("limits.{name}.monotone"), worst(m), limit_roundoff(small), m.n, m.bad));
    }
    let a = total[N - 1];
    out.push(PropertyCheck::new("limits.modified_sigma_min_positive", -worst(a), 0.0, a.n, a.bad));
    out
}
