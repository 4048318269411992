//! Knot graphs: ordered base points on the knot, free inner vertices, and a
//! multiset of edges between them.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagramError {
    #[error("duplicate vertex label {0:?}")]
    DuplicateLabel(String),
    #[error("edge endpoint {0:?} is not a declared vertex")]
    UnknownVertex(String),
    #[error("edge joins {0:?} to itself")]
    SelfLoop(String),
    #[error("vertex index {0} out of range")]
    BadIndex(usize),
    #[error("order must be at least 1, got {0}")]
    BadOrder(i64),
    #[error("malformed diagram file: {0}")]
    Parse(String),
}

/// A knot graph.
///
/// Vertices are stored by index in the global label order: base points in
/// their linear order first, then inner vertices in `inner_order`. Every edge
/// is stored as `(a, b)` with `a < b`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KnotGraph {
    labels: Vec<String>,
    n_base: usize,
    edges: Vec<(usize, usize)>,
}

/// A vertex bijection between two knot graphs, `vertex_map[v]` is the image of `v`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Equivalence {
    pub vertex_map: Vec<usize>,
}

impl Equivalence {
    pub fn identity(n: usize) -> Self {
        Equivalence { vertex_map: (0..n).collect() }
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.vertex_map.len()];
        for (v, &w) in self.vertex_map.iter().enumerate() {
            inv[w] = v;
        }
        Equivalence { vertex_map: inv }
    }

    /// `self` followed by `other`.
    pub fn then(&self, other: &Equivalence) -> Self {
        Equivalence { vertex_map: self.vertex_map.iter().map(|&v| other.vertex_map[v]).collect() }
    }
}

/// On-disk diagram format. `inner` lists the inner vertices in inner order.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiagramFile {
    pub base_points: Vec<String>,
    pub inner: Vec<String>,
    pub edges: Vec<[String; 2]>,
}

/// Which classes `enumerate_with` keeps, on top of normality.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnumerationFilter {
    /// Every connected component contains a base point.
    KnotConnected,
    /// No decomposition into two pieces meeting in nothing or one base point.
    NonSplittable,
}

impl KnotGraph {
    pub fn new(base: &[&str], inner: &[&str], edges: &[(&str, &str)]) -> Result<Self, DiagramError> {
        let mut labels: Vec<String> = base.iter().map(|s| s.to_string()).collect();
        labels.extend(inner.iter().map(|s| s.to_string()));
        let mut index = HashMap::new();
        for (i, l) in labels.iter().enumerate() {
            if index.insert(l.clone(), i).is_some() {
                return Err(DiagramError::DuplicateLabel(l.clone()));
            }
        }
        let mut out = Vec::with_capacity(edges.len());
        for (a, b) in edges {
            let ia = *index.get(*a).ok_or_else(|| DiagramError::UnknownVertex(a.to_string()))?;
            let ib = *index.get(*b).ok_or_else(|| DiagramError::UnknownVertex(b.to_string()))?;
            if ia == ib {
                return Err(DiagramError::SelfLoop(a.to_string()));
            }
            out.push((ia.min(ib), ia.max(ib)));
        }
        Ok(KnotGraph { labels, n_base: base.len(), edges: out })
    }

    /// Builds a graph with canonical labels `b1..bm`, `y1..ys`.
    pub fn from_indices(n_base: usize, n_inner: usize, edges: &[(usize, usize)]) -> Result<Self, DiagramError> {
        let n = n_base + n_inner;
        let mut out = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            if a >= n {
                return Err(DiagramError::BadIndex(a));
            }
            if b >= n {
                return Err(DiagramError::BadIndex(b));
            }
            if a == b {
                return Err(DiagramError::SelfLoop(canonical_label(n_base, a)));
            }
            out.push((a.min(b), a.max(b)));
        }
        let labels = (0..n).map(|v| canonical_label(n_base, v)).collect();
        Ok(KnotGraph { labels, n_base, edges: out })
    }

    pub fn from_file(f: &DiagramFile) -> Result<Self, DiagramError> {
        let base: Vec<&str> = f.base_points.iter().map(String::as_str).collect();
        let inner: Vec<&str> = f.inner.iter().map(String::as_str).collect();
        let edges: Vec<(&str, &str)> = f.edges.iter().map(|[a, b]| (a.as_str(), b.as_str())).collect();
        KnotGraph::new(&base, &inner, &edges)
    }

    pub fn from_json(text: &str) -> Result<Self, DiagramError> {
        let f: DiagramFile = serde_json::from_str(text).map_err(|e| DiagramError::Parse(e.to_string()))?;
        KnotGraph::from_file(&f)
    }

    pub fn to_file(&self) -> DiagramFile {
        DiagramFile {
            base_points: self.labels[..self.n_base].to_vec(),
            inner: self.labels[self.n_base..].to_vec(),
            edges: self.edges.iter().map(|&(a, b)| [self.labels[a].clone(), self.labels[b].clone()]).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_file()).expect("diagram serializes")
    }

    pub fn n_base(&self) -> usize {
        self.n_base
    }

    pub fn n_inner(&self) -> usize {
        self.labels.len() - self.n_base
    }

    pub fn n_vertices(&self) -> usize {
        self.labels.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, v: usize) -> &str {
        &self.labels[v]
    }

    pub fn vertex(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn is_base(&self, v: usize) -> bool {
        v < self.n_base
    }

    pub fn base_points(&self) -> std::ops::Range<usize> {
        0..self.n_base
    }

    pub fn inner_vertices(&self) -> std::ops::Range<usize> {
        self.n_base..self.labels.len()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.edges.iter().filter(|&&(a, b)| a == v || b == v).count()
    }

    /// Neighbours of `v`, repeated once per parallel edge.
    pub fn neighbors(&self, v: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter_map(|&(a, b)| {
                if a == v {
                    Some(b)
                } else if b == v {
                    Some(a)
                } else {
                    None
                }
            })
            .collect()
    }

    /// Number of edges joining `a` and `b`.
    pub fn multiplicity(&self, a: usize, b: usize) -> usize {
        let key = (a.min(b), a.max(b));
        self.edges.iter().filter(|&&e| e == key).count()
    }

    /// |E| - |V₁|.
    pub fn order(&self) -> i64 {
        self.edges.len() as i64 - self.n_inner() as i64
    }

    pub fn is_normal(&self) -> bool {
        (0..self.n_vertices()).all(|v| {
            let d = self.degree(v);
            d > 0 && (self.is_base(v) || d >= 3)
        })
    }

    /// Connected components as sorted vertex lists; isolated vertices count.
    pub fn components(&self) -> Vec<Vec<usize>> {
        components_without(self, None)
    }

    pub fn is_connected(&self) -> bool {
        self.components().len() <= 1
    }

    /// Every component reaches the knot through a base point.
    pub fn is_knot_connected(&self) -> bool {
        self.n_base > 0 && self.components().iter().all(|c| c[0] < self.n_base)
    }

    /// A decomposition into two subgraphs meeting in nothing or in exactly one
    /// base point, if one exists.
    pub fn is_splittable(&self) -> Option<(KnotGraph, KnotGraph)> {
        let comps = self.components();
        if comps.len() >= 2 {
            let first = comps[0].clone();
            let rest: Vec<usize> = comps[1..].iter().flatten().copied().collect();
            return Some((self.induced(&first).0, self.induced(&rest).0));
        }
        for b in self.base_points() {
            let comps = components_without(self, Some(b));
            if comps.len() >= 2 {
                let mut first = comps[0].clone();
                first.push(b);
                let mut rest: Vec<usize> = comps[1..].iter().flatten().copied().collect();
                rest.push(b);
                return Some((self.induced(&first).0, self.induced(&rest).0));
            }
        }
        None
    }

    /// Subgraph on `vertices` with every edge whose endpoints both lie in it.
    /// Returns the subgraph and, for each of its vertices, the parent index.
    pub fn induced(&self, vertices: &[usize]) -> (KnotGraph, Vec<usize>) {
        let mut keep: Vec<usize> = vertices.to_vec();
        keep.sort_unstable();
        keep.dedup();
        let mut new_index = vec![usize::MAX; self.n_vertices()];
        for (i, &v) in keep.iter().enumerate() {
            new_index[v] = i;
        }
        let labels = keep.iter().map(|&v| self.labels[v].clone()).collect();
        let n_base = keep.iter().filter(|&&v| self.is_base(v)).count();
        let edges = self
            .edges
            .iter()
            .filter(|&&(a, b)| new_index[a] != usize::MAX && new_index[b] != usize::MAX)
            .map(|&(a, b)| (new_index[a], new_index[b]))
            .collect();
        (KnotGraph { labels, n_base, edges }, keep)
    }

    /// Same graph with the inner vertices re-sorted. `order` lists the current
    /// inner vertex indices in their new order. Also returns old -> new indices.
    pub fn reorder_inner(&self, order: &[usize]) -> (KnotGraph, Vec<usize>) {
        assert_eq!(order.len(), self.n_inner(), "inner order must cover every inner vertex");
        let mut map: Vec<usize> = (0..self.n_vertices()).collect();
        for (pos, &v) in order.iter().enumerate() {
            assert!(!self.is_base(v), "inner order may only list inner vertices");
            map[v] = self.n_base + pos;
        }
        let mut labels = self.labels.clone();
        for v in self.inner_vertices() {
            labels[map[v]] = self.labels[v].clone();
        }
        let edges = self.edges.iter().map(|&(a, b)| (map[a].min(map[b]), map[a].max(map[b]))).collect();
        (KnotGraph { labels, n_base: self.n_base, edges }, map)
    }

    /// Makes `v` the minimal inner vertex, keeping the others in order.
    pub fn with_inner_first(&self, v: usize) -> (KnotGraph, Vec<usize>) {
        let mut order = vec![v];
        order.extend(self.inner_vertices().filter(|&w| w != v));
        self.reorder_inner(&order)
    }

    pub fn relabeled_canonically(&self) -> KnotGraph {
        KnotGraph::from_indices(self.n_base, self.n_inner(), &self.edges).expect("indices already valid")
    }

    /// An equivalence `self -> other`, if one exists. Base points map in
    /// order, so only the inner vertices are searched.
    pub fn are_equivalent(&self, other: &KnotGraph) -> Option<Equivalence> {
        let mut found = None;
        self.search_equivalences(other, &mut |e| {
            found = Some(e.clone());
            false
        });
        found
    }

    /// All self-equivalences; their number is |Γ|.
    pub fn automorphisms(&self) -> Vec<Equivalence> {
        let mut all = Vec::new();
        self.search_equivalences(self, &mut |e| {
            all.push(e.clone());
            true
        });
        all
    }

    fn search_equivalences(&self, other: &KnotGraph, visit: &mut dyn FnMut(&Equivalence) -> bool) {
        if self.n_base != other.n_base || self.n_inner() != other.n_inner() || self.n_edges() != other.n_edges() {
            return;
        }
        let n = self.n_vertices();
        let ma = multiplicity_matrix(self);
        let mb = multiplicity_matrix(other);
        for b in 0..self.n_base {
            for c in 0..self.n_base {
                if ma[b][c] != mb[b][c] {
                    return;
                }
            }
        }
        let ctx = Search {
            n,
            ma: &ma,
            mb: &mb,
            deg_a: (0..n).map(|v| self.degree(v)).collect(),
            deg_b: (0..n).map(|v| other.degree(v)).collect(),
        };
        let mut map: Vec<usize> = (0..n).collect();
        // Base points are pinned to themselves; only inner targets stay free.
        let mut used: Vec<bool> = (0..n).map(|v| v < self.n_base).collect();
        ctx.extend(self.n_base, &mut map, &mut used, visit);
    }

    /// Representative of the equivalence class with canonical labels: the
    /// inner relabeling whose sorted edge list is lexicographically least.
    pub fn canonical_form(&self) -> KnotGraph {
        let m = self.n_base;
        let s = self.n_inner();
        let mut best: Option<Vec<(usize, usize)>> = None;
        let mut perm: Vec<usize> = (0..s).collect();
        let mut edges = Vec::with_capacity(self.edges.len());
        loop {
            edges.clear();
            let image = |v: usize| if v < m { v } else { m + perm[v - m] };
            for &(a, b) in &self.edges {
                let (x, y) = (image(a), image(b));
                edges.push((x.min(y), x.max(y)));
            }
            edges.sort_unstable();
            if best.as_ref().is_none_or(|b| edges < *b) {
                best = Some(edges.clone());
            }
            if !next_permutation(&mut perm) {
                break;
            }
        }
        KnotGraph::from_indices(m, s, &best.unwrap_or_default()).expect("canonical edges are valid")
    }

    /// Stable text key of the equivalence class, e.g. `4/0:b1-b3,b2-b4`.
    pub fn canonical_key(&self) -> String {
        let c = self.canonical_form();
        let edges: Vec<String> = c.edges.iter().map(|&(a, b)| format!("{}-{}", c.labels[a], c.labels[b])).collect();
        format!("{}/{}:{}", c.n_base, c.n_inner(), edges.join(","))
    }
}

struct Search<'a> {
    n: usize,
    ma: &'a [Vec<usize>],
    mb: &'a [Vec<usize>],
    deg_a: Vec<usize>,
    deg_b: Vec<usize>,
}

impl Search<'_> {
    /// Assigns vertex `v` and recurses; returns false once `visit` asks to stop.
    fn extend(
        &self,
        v: usize,
        map: &mut Vec<usize>,
        used: &mut Vec<bool>,
        visit: &mut dyn FnMut(&Equivalence) -> bool,
    ) -> bool {
        if v == self.n {
            return visit(&Equivalence { vertex_map: map.clone() });
        }
        for w in 0..self.n {
            if used[w] || self.deg_a[v] != self.deg_b[w] {
                continue;
            }
            map[v] = w;
            if (0..=v).all(|u| self.ma[v][u] == self.mb[w][map[u]]) {
                used[w] = true;
                let go_on = self.extend(v + 1, map, used, visit);
                used[w] = false;
                if !go_on {
                    return false;
                }
            }
        }
        true
    }
}

fn canonical_label(n_base: usize, v: usize) -> String {
    if v < n_base {
        format!("b{}", v + 1)
    } else {
        format!("y{}", v - n_base + 1)
    }
}

fn multiplicity_matrix(g: &KnotGraph) -> Vec<Vec<usize>> {
    let n = g.n_vertices();
    let mut m = vec![vec![0; n]; n];
    for &(a, b) in &g.edges {
        m[a][b] += 1;
        m[b][a] += 1;
    }
    m
}

fn components_without(g: &KnotGraph, removed: Option<usize>) -> Vec<Vec<usize>> {
    let n = g.n_vertices();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        let mut y = x;
        while p[y] != r {
            let next = p[y];
            p[y] = r;
            y = next;
        }
        r
    }
    for &(a, b) in &g.edges {
        if Some(a) == removed || Some(b) == removed {
            continue;
        }
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for v in 0..n {
        if Some(v) == removed {
            continue;
        }
        let r = find(&mut parent, v);
        groups.entry(r).or_default().push(v);
    }
    groups.into_values().collect()
}

/// Lexicographic successor; false once `p` is the last permutation.
pub(crate) fn next_permutation(p: &mut [usize]) -> bool {
    if p.len() < 2 {
        return false;
    }
    let mut i = p.len() - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = p.len() - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// One representative per equivalence class of normal, knot-connected knot
/// graphs of order `n` with at most `max_edges` edges.
pub fn enumerate_diagrams(n: i64, max_edges: usize) -> Result<Vec<KnotGraph>, DiagramError> {
    enumerate_with(n, max_edges, EnumerationFilter::KnotConnected)
}

pub fn enumerate_with(n: i64, max_edges: usize, filter: EnumerationFilter) -> Result<Vec<KnotGraph>, DiagramError> {
    if n <= 0 {
        return Err(DiagramError::BadOrder(n));
    }
    let mut classes: BTreeMap<(usize, usize, String), KnotGraph> = BTreeMap::new();
    for e in 1..=max_edges {
        let s = e as i64 - n;
        if s < 0 {
            continue;
        }
        let s = s as usize;
        // Degree budget: base points need 1, inner vertices need 3.
        if 3 * s >= 2 * e {
            continue;
        }
        for m in 1..=(2 * e - 3 * s) {
            let nv = m + s;
            if nv > 2 * e || nv < 2 {
                continue;
            }
            let pairs: Vec<(usize, usize)> = (0..nv).flat_map(|a| ((a + 1)..nv).map(move |b| (a, b))).collect();
            let need: Vec<usize> = (0..nv).map(|v| if v < m { 1 } else { 3 }).collect();
            let mut deg = vec![0usize; nv];
            let mut chosen = Vec::with_capacity(e);
            let mut emit = |edges: &[(usize, usize)]| {
                let g = KnotGraph::from_indices(m, s, edges).expect("generated edges are valid");
                let keep = match filter {
                    EnumerationFilter::KnotConnected => g.is_knot_connected(),
                    EnumerationFilter::NonSplittable => g.is_splittable().is_none(),
                };
                if keep && g.is_normal() {
                    let c = g.canonical_form();
                    let key = c.canonical_key();
                    classes.entry((e, m, key)).or_insert(c);
                }
            };
            multisets(&pairs, 0, e, &need, &mut deg, &mut chosen, &mut emit);
        }
    }
    Ok(classes.into_values().collect())
}

fn multisets(
    pairs: &[(usize, usize)],
    start: usize,
    remaining: usize,
    need: &[usize],
    deg: &mut Vec<usize>,
    chosen: &mut Vec<(usize, usize)>,
    emit: &mut dyn FnMut(&[(usize, usize)]),
) {
    let deficit: usize = need.iter().zip(deg.iter()).map(|(&n, &d)| n.saturating_sub(d)).sum();
    if deficit > 2 * remaining {
        return;
    }
    if remaining == 0 {
        emit(chosen);
        return;
    }
    for i in start..pairs.len() {
        let (a, b) = pairs[i];
        deg[a] += 1;
        deg[b] += 1;
        chosen.push((a, b));
        multisets(pairs, i, remaining - 1, need, deg, chosen, emit);
        chosen.pop();
        deg[a] -= 1;
        deg[b] -= 1;
    }
}
