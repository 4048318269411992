//! Codimension-one boundary strata: the collapse of a vertex set A, the
//! quotient Γ/A, the collapsed subgraph A(Γ), and the identification maps.

use thiserror::Error;

use crate::diagram::KnotGraph;
use crate::geometry::{edge_direction, line_class, Point, DEGENERATE_EDGE};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StrataError {
    #[error("a stratum needs at least two collapsing vertices")]
    TooSmall,
    #[error("vertex {0} is not in the diagram")]
    UnknownVertex(usize),
    #[error("the base points of A are not an interval of the base order")]
    NotInterval,
    #[error("expected a {expected:?} stratum, found {found:?}")]
    WrongType { expected: StratumType, found: StratumType },
    #[error("degenerate configuration: {0}")]
    Degenerate(String),
    #[error("invalid edge ordering: {0}")]
    BadOrdering(String),
    #[error("collar parameter must be positive, got {0}")]
    BadParameter(f64),
}

/// Assignment of edge positions `0..k` to edge indices of a diagram.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct EdgeOrdering {
    positions: Vec<usize>,
}

impl EdgeOrdering {
    pub fn identity(k: usize) -> Self {
        EdgeOrdering { positions: (0..k).collect() }
    }

    /// `positions[p]` is the edge placed at position `p`.
    pub fn new(positions: Vec<usize>) -> Result<Self, StrataError> {
        let mut seen = vec![false; positions.len()];
        for &e in &positions {
            if e >= positions.len() || seen[e] {
                return Err(StrataError::BadOrdering(format!("{positions:?} is not a permutation")));
            }
            seen[e] = true;
        }
        Ok(EdgeOrdering { positions })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn edge_at(&self, p: usize) -> usize {
        self.positions[p]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.positions
    }

    /// σ·o: the edge at position p moves to position σ(p).
    pub fn act(&self, sigma: &[usize]) -> Self {
        EdgeOrdering { positions: act_on(&self.positions, sigma) }
    }

    /// Every ordering of `k` edges.
    pub fn all(k: usize) -> Vec<Self> {
        let mut p: Vec<usize> = (0..k).collect();
        let mut out = vec![EdgeOrdering { positions: p.clone() }];
        while crate::diagram::next_permutation(&mut p) {
            out.push(EdgeOrdering { positions: p.clone() });
        }
        out
    }
}

fn act_on<T: Clone>(items: &[T], sigma: &[usize]) -> Vec<T> {
    let mut out = items.to_vec();
    for (p, item) in items.iter().enumerate() {
        out[sigma[p]] = item.clone();
    }
    out
}

/// Where a parent edge lands in a stratum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StratumEdge {
    Quotient(usize),
    Collapsed(usize),
}

/// Edge ordering of the stratum: positions of the parent ordering, each now
/// naming an edge of Γ/A or of A(Γ).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StratumOrdering {
    pub positions: Vec<StratumEdge>,
}

impl StratumOrdering {
    pub fn act(&self, sigma: &[usize]) -> Self {
        StratumOrdering { positions: act_on(&self.positions, sigma) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StratumType {
    Type0,
    TypeI,
    TypeII,
    TypeIII,
    TypeIV,
    TypeY,
    Plain,
}

#[derive(Clone, Debug)]
pub struct Stratum {
    pub parent: KnotGraph,
    /// Collapsing vertices, sorted.
    pub a: Vec<usize>,
    pub quotient: KnotGraph,
    pub collapsed: KnotGraph,
    pub edge_partition: Vec<StratumEdge>,
    /// Parent vertex -> vertex of Γ/A; members of A go to `new_vertex`.
    pub quotient_vertex: Vec<usize>,
    /// Parent vertex -> vertex of A(Γ).
    pub collapsed_vertex: Vec<Option<usize>>,
    /// The vertex of Γ/A that A collapses to.
    pub new_vertex: usize,
}

pub fn make_stratum(g: &KnotGraph, a: &[usize]) -> Result<Stratum, StrataError> {
    let mut a = a.to_vec();
    a.sort_unstable();
    a.dedup();
    if let Some(&v) = a.iter().find(|&&v| v >= g.n_vertices()) {
        return Err(StrataError::UnknownVertex(v));
    }
    if a.len() < 2 {
        return Err(StrataError::TooSmall);
    }
    let base_in_a: Vec<usize> = a.iter().copied().filter(|&v| g.is_base(v)).collect();
    if let (Some(&lo), Some(&hi)) = (base_in_a.first(), base_in_a.last()) {
        if hi - lo + 1 != base_in_a.len() {
            return Err(StrataError::NotInterval);
        }
    }
    let in_a = |v: usize| a.binary_search(&v).is_ok();

    // Vertex list of Γ/A in its global order. The new vertex takes the place
    // of A's first base point, or of A's largest inner vertex.
    let anchor = base_in_a.first().copied().unwrap_or(*a.last().unwrap());
    let mut order: Vec<Option<usize>> = Vec::new();
    for v in 0..g.n_vertices() {
        if v == anchor {
            order.push(None);
        } else if !in_a(v) {
            order.push(Some(v));
        }
    }
    let mut quotient_vertex = vec![0; g.n_vertices()];
    let mut new_vertex = 0;
    let mut labels = Vec::with_capacity(order.len());
    for (i, slot) in order.iter().enumerate() {
        match slot {
            Some(v) => {
                quotient_vertex[*v] = i;
                labels.push(g.label(*v).to_string());
            }
            None => {
                new_vertex = i;
                let mut name = "a".to_string();
                while g.vertex(&name).is_some() {
                    name.push('\'');
                }
                labels.push(name);
            }
        }
    }
    for &v in &a {
        quotient_vertex[v] = new_vertex;
    }
    let n_base_q = g.n_base() - base_in_a.len() + usize::from(!base_in_a.is_empty());

    let (collapsed, kept) = g.induced(&a);
    let mut collapsed_vertex = vec![None; g.n_vertices()];
    for (i, &v) in kept.iter().enumerate() {
        collapsed_vertex[v] = Some(i);
    }

    let mut q_edges = Vec::new();
    let mut partition = Vec::with_capacity(g.n_edges());
    let mut n_collapsed = 0;
    for &(x, y) in g.edges() {
        if in_a(x) && in_a(y) {
            partition.push(StratumEdge::Collapsed(n_collapsed));
            n_collapsed += 1;
        } else {
            partition.push(StratumEdge::Quotient(q_edges.len()));
            q_edges.push((quotient_vertex[x], quotient_vertex[y]));
        }
    }
    let label_refs: Vec<&str> = labels.iter().map(String::as_str).collect();
    let edge_refs: Vec<(&str, &str)> = q_edges.iter().map(|&(x, y)| (label_refs[x], label_refs[y])).collect();
    let quotient = KnotGraph::new(&label_refs[..n_base_q], &label_refs[n_base_q..], &edge_refs)
        .expect("quotient labels are distinct and edges join distinct vertices");
    Ok(Stratum {
        parent: g.clone(),
        a,
        quotient,
        collapsed,
        edge_partition: partition,
        quotient_vertex,
        collapsed_vertex,
        new_vertex,
    })
}

/// A univalent inner vertex of A(Γ) with its neighbour, both as A(Γ) indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Univalent {
    pub v: usize,
    pub v1: usize,
}

/// A bivalent inner vertex of A(Γ) with its two neighbours.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Bivalent {
    pub v: usize,
    pub w1: usize,
    pub w2: usize,
}

impl Stratum {
    pub fn classify(&self) -> StratumType {
        let c = &self.collapsed;
        if self.a.len() >= 3 {
            if (0..c.n_vertices()).any(|v| c.degree(v) == 0) {
                return StratumType::Type0;
            }
            if let Some(u) = self.univalent() {
                return if c.is_base(u.v1) {
                    StratumType::Plain
                } else {
                    match c.degree(u.v1) {
                        1 => StratumType::Plain,
                        3 => StratumType::TypeY,
                        _ => StratumType::TypeI,
                    }
                };
            }
            if self.bivalent().is_some() {
                return StratumType::TypeII;
            }
            return StratumType::Plain;
        }
        let (x, y) = (0, 1);
        if c.multiplicity(x, y) == 0 {
            StratumType::TypeIV
        } else if c.n_inner() > 0 {
            StratumType::TypeIII
        } else {
            StratumType::Plain
        }
    }

    /// The least univalent inner vertex of A(Γ) in inner order.
    pub fn univalent(&self) -> Option<Univalent> {
        let c = &self.collapsed;
        c.inner_vertices().find(|&v| c.degree(v) == 1).map(|v| Univalent { v, v1: c.neighbors(v)[0] })
    }

    /// The least bivalent inner vertex of A(Γ) in inner order.
    pub fn bivalent(&self) -> Option<Bivalent> {
        let c = &self.collapsed;
        c.inner_vertices().find(|&v| c.degree(v) == 2).map(|v| {
            let n = c.neighbors(v);
            Bivalent { v, w1: n[0], w2: n[1] }
        })
    }

    /// For a type Y stratum: the univalent v, its trivalent neighbour v1,
    /// and v1's two other neighbours.
    pub fn tripod(&self) -> Option<(usize, usize, usize, usize)> {
        let u = self.univalent()?;
        let c = &self.collapsed;
        if c.is_base(u.v1) || c.degree(u.v1) != 3 {
            return None;
        }
        let mut others = c.neighbors(u.v1);
        let pos = others.iter().position(|&w| w == u.v)?;
        others.remove(pos);
        Some((u.v, u.v1, others[0], others[1]))
    }

    fn expect(&self, t: StratumType) -> Result<(), StrataError> {
        let found = self.classify();
        if found == t {
            Ok(())
        } else {
            Err(StrataError::WrongType { expected: t, found })
        }
    }

    /// Places the collapse point `a` of Γ/A at the anchor of A.
    fn quotient_points(&self, c: &[Point]) -> Vec<Point> {
        let mut out = vec![Point::zeros(); self.quotient.n_vertices()];
        for v in 0..self.parent.n_vertices() {
            if self.collapsed_vertex[v].is_none() {
                out[self.quotient_vertex[v]] = c[v];
            }
        }
        out[self.new_vertex] = c[self.a[0]];
        out
    }

    /// Which parent edges sit at each position under the induced ordering.
    pub fn relabel(&self, o: &EdgeOrdering) -> StratumOrdering {
        StratumOrdering { positions: o.as_slice().iter().map(|&e| self.edge_partition[e]).collect() }
    }
}

/// Reflection of the bivalent vertex through its two neighbours.
pub fn tau2(s: &Stratum, c: &[Point]) -> Result<Vec<Point>, StrataError> {
    s.expect(StratumType::TypeII)?;
    let b = s.bivalent().expect("type II has a bivalent vertex");
    let mut out = c.to_vec();
    out[b.v] = c[b.w1] + c[b.w2] - c[b.v];
    Ok(out)
}

/// Reflection of the univalent vertex and its trivalent neighbour through
/// the neighbour's other two neighbours.
pub fn tau_y(s: &Stratum, c: &[Point]) -> Result<Vec<Point>, StrataError> {
    s.expect(StratumType::TypeY)?;
    let (v, v1, w1, w2) = s.tripod().expect("type Y has a tripod");
    let mut out = c.to_vec();
    out[v] = c[w1] + c[w2] - c[v];
    out[v1] = c[w1] + c[w2] - c[v1];
    Ok(out)
}

/// Largest pairwise distance among the points of `c` other than `skip`.
pub fn spread_without(c: &[Point], skip: usize) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..c.len() {
        for j in (i + 1)..c.len() {
            if i != skip && j != skip {
                m = m.max((c[i] - c[j]).norm());
            }
        }
    }
    m
}

/// Pushes the univalent vertex out to distance 2‖g₁‖ from its neighbour,
/// keeping its direction.
pub fn tau1(s: &Stratum, c: &[Point]) -> Result<Vec<Point>, StrataError> {
    s.expect(StratumType::TypeI)?;
    let u = s.univalent().expect("type I has a univalent vertex");
    let norm = spread_without(c, u.v);
    if norm < DEGENERATE_EDGE {
        return Err(StrataError::Degenerate("the rest of A is a single point".into()));
    }
    let d = c[u.v] - c[u.v1];
    let len = d.norm();
    if len < DEGENERATE_EDGE {
        return Err(StrataError::Degenerate("univalent vertex sits on its neighbour".into()));
    }
    let mut out = c.to_vec();
    out[u.v] = c[u.v1] + d * (2.0 * norm / len);
    Ok(out)
}

/// Edge collapse: the Γ/A configuration and the line of the collapsed edge.
/// `c` places the parent diagram.
pub fn tau3(s: &Stratum, c: &[Point]) -> Result<(Vec<Point>, Point), StrataError> {
    s.expect(StratumType::TypeIII)?;
    let d = c[s.a[1]] - c[s.a[0]];
    if d.norm() < DEGENERATE_EDGE {
        return Err(StrataError::Degenerate("collapsed edge has zero length".into()));
    }
    Ok((s.quotient_points(c), line_class(&d)))
}

/// Two non-adjacent vertices meeting: the bundle projection to Γ/A.
pub fn tau4(s: &Stratum, c: &[Point]) -> Result<Vec<Point>, StrataError> {
    s.expect(StratumType::TypeIV)?;
    Ok(s.quotient_points(c))
}

/// The collar: Γ/A placed by `alpha`, A(Γ) shrunk by `t` around the point of `a`.
///
/// Vertices of A go to alpha(a) + (t/|β|)(β(v) - β(a₀)), where |β| is the
/// spread of β and a₀ is the first vertex of A(Γ) (its least base point, or
/// its least inner vertex).
pub fn collar(s: &Stratum, alpha: &[Point], beta: &[Point], t: f64) -> Result<Vec<Point>, StrataError> {
    if !(t > 0.0) {
        return Err(StrataError::BadParameter(t));
    }
    let spread = spread_without(beta, usize::MAX);
    if spread < DEGENERATE_EDGE {
        return Err(StrataError::Degenerate("A(Γ) placement is a point".into()));
    }
    let center = alpha[s.new_vertex];
    let out = (0..s.parent.n_vertices())
        .map(|v| match s.collapsed_vertex[v] {
            Some(i) => center + (beta[i] - beta[0]) * (t / spread),
            None => alpha[s.quotient_vertex[v]],
        })
        .collect();
    Ok(out)
}

/// Worst distance between the edge lines of the collar placement and the
/// lines of (Φ(α), Φ(β)) edge by edge.
pub fn collar_gauss_error(s: &Stratum, alpha: &[Point], beta: &[Point], t: f64) -> Result<f64, StrataError> {
    let g = collar(s, alpha, beta, t)?;
    let mut worst: f64 = 0.0;
    for (e, &(x, y)) in s.parent.edges().iter().enumerate() {
        let near = edge_direction(&g, x, y).ok_or_else(|| StrataError::Degenerate(format!("edge {e}")))?;
        let limit = match s.edge_partition[e] {
            StratumEdge::Quotient(j) => {
                let (p, q) = s.quotient.edges()[j];
                alpha[q] - alpha[p]
            }
            StratumEdge::Collapsed(j) => {
                let (p, q) = s.collapsed.edges()[j];
                beta[q] - beta[p]
            }
        };
        if limit.norm() < DEGENERATE_EDGE {
            return Err(StrataError::Degenerate(format!("limit edge {e}")));
        }
        worst = worst.max((line_class(&near) - line_class(&limit)).norm());
    }
    Ok(worst)
}

/// Every admissible A: at least two vertices, base part an interval.
pub fn all_strata(g: &KnotGraph) -> Vec<Stratum> {
    let n = g.n_vertices();
    let mut out = Vec::new();
    if n >= 31 {
        return out;
    }
    for mask in 1u32..(1u32 << n) {
        if mask.count_ones() < 2 {
            continue;
        }
        let a: Vec<usize> = (0..n).filter(|&v| mask & (1 << v) != 0).collect();
        if let Ok(s) = make_stratum(g, &a) {
            out.push(s);
        }
    }
    out
}
