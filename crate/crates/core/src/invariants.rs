//! Weight systems, the weighted sums ω(Z(K)), a normalized order-2 invariant,
//! and a Gauss-diagram oracle for v₂.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::diagram::{enumerate_diagrams, DiagramError, KnotGraph};
use crate::geometry::{tangent_frame, KnotCurve, Point};
use crate::integrator::{check_dimension, class_seed, integrate_diagram, IntegralEstimate, IntegratorError, McOptions};
use crate::strata::EdgeOrdering;

/// Canonical key of the chord diagram X (two crossing chords).
pub const X_KEY: &str = "4/0:b1-b3,b2-b4";
/// Canonical key of the tripod T.
pub const T_KEY: &str = "3/1:b1-y1,b2-y1,b3-y1";

#[derive(Debug, Error)]
pub enum InvariantError {
    #[error("order {0} is not supported (use 1 or 2)")]
    UnsupportedOrder(i64),
    #[error("no component for class {0}")]
    MissingClass(String),
    #[error("class {0} is not an enumerated diagram of order {1}")]
    UnknownClass(String, i64),
    #[error("weight systems of orders {0} and {1} cannot be combined")]
    OrderMismatch(i64, i64),
    #[error("normalization denominator {value} is within 3 stderr ({stderr}) of zero")]
    DegenerateDenominator { value: f64, stderr: f64 },
    #[error("weight system: {0}")]
    Parse(String),
    #[error("gauss code: {0}")]
    Gauss(String),
    #[error(transparent)]
    Diagram(#[from] DiagramError),
    #[error(transparent)]
    Integrator(#[from] IntegratorError),
}

/// Integer weights on the diagram classes of one order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeightSystem {
    pub order: i64,
    pub weights: BTreeMap<String, i64>,
}

/// Order of a class key `m/s:edges`, which is e − s.
fn key_order(key: &str) -> Result<i64, InvariantError> {
    let bad = || InvariantError::Parse(format!("malformed class key {key:?}"));
    let (counts, edges) = key.split_once(':').ok_or_else(bad)?;
    let (_, s) = counts.split_once('/').ok_or_else(bad)?;
    let s: i64 = s.parse().map_err(|_| bad())?;
    let e = if edges.is_empty() { 0 } else { edges.split(',').count() as i64 };
    Ok(e - s)
}

fn classes(order: i64) -> Result<Vec<KnotGraph>, InvariantError> {
    if !(1..=2).contains(&order) {
        return Err(InvariantError::UnsupportedOrder(order));
    }
    Ok(enumerate_diagrams(order, 3 * order as usize)?)
}

impl WeightSystem {
    /// Every enumerated class of `order` with weight 0.
    pub fn zero(order: i64) -> Result<Self, InvariantError> {
        let weights = classes(order)?.iter().map(|g| (g.canonical_key(), 0)).collect();
        Ok(WeightSystem { order, weights })
    }

    /// ω(X) = 1, ω(T) = −1, every other order-2 class 0.
    pub fn default_order2() -> Self {
        let mut w = WeightSystem::zero(2).expect("order 2 enumerates");
        w.weights.insert(X_KEY.into(), 1);
        w.weights.insert(T_KEY.into(), -1);
        w
    }

    /// The weight-system file format: a JSON map from class key to integer.
    /// Keys may use any labelling; they are canonicalized against the
    /// enumeration, and classes left out get weight 0.
    pub fn from_json(text: &str) -> Result<Self, InvariantError> {
        let raw: BTreeMap<String, i64> =
            serde_json::from_str(text).map_err(|e| InvariantError::Parse(e.to_string()))?;
        let first = raw.keys().next().ok_or_else(|| InvariantError::Parse("empty weight system".into()))?;
        let order = key_order(first)?;
        let mut w = WeightSystem::zero(order)?;
        for (key, value) in raw {
            let k = key_order(&key)?;
            if k != order {
                return Err(InvariantError::OrderMismatch(order, k));
            }
            let canonical = canonicalize_key(&key)?;
            let slot = w.weights.get_mut(&canonical).ok_or(InvariantError::UnknownClass(key, order))?;
            *slot = value;
        }
        Ok(w)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.weights).expect("string keys serialize")
    }

    pub fn weight(&self, key: &str) -> i64 {
        self.weights.get(key).copied().unwrap_or(0)
    }

    pub fn support(&self) -> impl Iterator<Item = (&str, i64)> {
        self.weights.iter().filter(|(_, &w)| w != 0).map(|(k, &w)| (k.as_str(), w))
    }

    pub fn add(&self, other: &WeightSystem) -> Result<WeightSystem, InvariantError> {
        if self.order != other.order {
            return Err(InvariantError::OrderMismatch(self.order, other.order));
        }
        let mut w = self.clone();
        for (k, v) in &other.weights {
            *w.weights.entry(k.clone()).or_insert(0) += v;
        }
        Ok(w)
    }
}

/// Parses `m/s:b1-y1,...` and returns the canonical key of that graph.
pub fn canonicalize_key(key: &str) -> Result<String, InvariantError> {
    let bad = || InvariantError::Parse(format!("malformed class key {key:?}"));
    let (counts, edges) = key.split_once(':').ok_or_else(bad)?;
    let (m, s) = counts.split_once('/').ok_or_else(bad)?;
    let m: usize = m.parse().map_err(|_| bad())?;
    let s: usize = s.parse().map_err(|_| bad())?;
    let base: Vec<String> = (1..=m).map(|i| format!("b{i}")).collect();
    let inner: Vec<String> = (1..=s).map(|i| format!("y{i}")).collect();
    let mut pairs = Vec::new();
    for e in edges.split(',').filter(|e| !e.is_empty()) {
        pairs.push(e.split_once('-').ok_or_else(bad)?);
    }
    let base: Vec<&str> = base.iter().map(String::as_str).collect();
    let inner: Vec<&str> = inner.iter().map(String::as_str).collect();
    Ok(KnotGraph::new(&base, &inner, &pairs)?.canonical_key())
}

/// One term I(Γ, K)/|Γ| of Z(K).
#[derive(Clone, Debug, Serialize)]
pub struct Component {
    pub key: String,
    pub automorphisms: usize,
    pub top_degree: bool,
    /// Already divided by |Γ|. Classes whose form degree does not match the
    /// configuration space dimension integrate to exactly 0 with no samples.
    pub estimate: IntegralEstimate,
}

fn component(g: &KnotGraph, index: usize, k: &KnotCurve, opts: &McOptions) -> Result<Component, InvariantError> {
    let auts = g.automorphisms().len();
    let seed = class_seed(opts.seed, index);
    let top = check_dimension(g);
    let estimate = if top {
        let e = integrate_diagram(g, &EdgeOrdering::identity(g.n_edges()), k, &McOptions { seed, ..*opts })?;
        IntegralEstimate { value: e.value / auts as f64, stderr: e.stderr / auts as f64, ..e }
    } else {
        IntegralEstimate { value: 0.0, stderr: 0.0, samples: 0, rejected: 0, seed }
    };
    Ok(Component { key: g.canonical_key(), automorphisms: auts, top_degree: top, estimate })
}

/// I(Γ, K)/|Γ| for every enumerated class of order `n`.
pub fn z_components(n: i64, k: &KnotCurve, opts: &McOptions) -> Result<BTreeMap<String, Component>, InvariantError> {
    let mut out = BTreeMap::new();
    for (i, g) in classes(n)?.iter().enumerate() {
        let c = component(g, i, k, opts)?;
        out.insert(c.key.clone(), c);
    }
    Ok(out)
}

/// Only the classes with nonzero weight. Seeds match `z_components`.
pub fn z_components_for(
    w: &WeightSystem,
    k: &KnotCurve,
    opts: &McOptions,
) -> Result<BTreeMap<String, Component>, InvariantError> {
    let mut out = BTreeMap::new();
    for (i, g) in classes(w.order)?.iter().enumerate() {
        let key = g.canonical_key();
        if w.weight(&key) != 0 {
            out.insert(key, component(g, i, k, opts)?);
        }
    }
    Ok(out)
}

/// Σ ω(Γ)·comp(Γ), stderr in quadrature. A class with weight 0 may be absent.
pub fn weighted_sum(w: &WeightSystem, comps: &BTreeMap<String, Component>) -> Result<IntegralEstimate, InvariantError> {
    let mut value = 0.0;
    let mut var = 0.0;
    let mut samples = 0;
    let mut rejected = 0;
    for (key, weight) in w.support() {
        let c = comps.get(key).ok_or_else(|| InvariantError::MissingClass(key.to_string()))?;
        let o = key_order(key)?;
        if o != w.order {
            return Err(InvariantError::OrderMismatch(w.order, o));
        }
        let e = &c.estimate;
        value += weight as f64 * e.value;
        var += (weight as f64 * e.stderr).powi(2);
        samples += e.samples;
        rejected += e.rejected;
    }
    let seed = comps.values().next().map_or(0, |c| c.estimate.seed);
    Ok(IntegralEstimate { value, stderr: var.sqrt(), samples, rejected, seed })
}

/// F(K) for the default order-2 weight system.
pub fn order2_functional(k: &KnotCurve, opts: &McOptions) -> Result<IntegralEstimate, InvariantError> {
    let w = WeightSystem::default_order2();
    weighted_sum(&w, &z_components_for(&w, k, opts)?)
}

#[derive(Clone, Debug, Serialize)]
pub struct V2Estimate {
    pub value: f64,
    /// First-order propagation, treating F(K), F(unknot), F(trefoil) as
    /// independent.
    pub stderr: f64,
    pub numerator: f64,
    pub denominator: f64,
    pub denominator_stderr: f64,
}

/// (F(K) − F(unknot)) / (F(trefoil) − F(unknot)).
pub fn normalize(
    f_k: &IntegralEstimate,
    f_unknot: &IntegralEstimate,
    f_trefoil: &IntegralEstimate,
) -> Result<V2Estimate, InvariantError> {
    let num = f_k.value - f_unknot.value;
    let den = f_trefoil.value - f_unknot.value;
    let s_num = f_k.stderr.hypot(f_unknot.stderr);
    let s_den = f_trefoil.stderr.hypot(f_unknot.stderr);
    if den.abs() < 3.0 * s_den || den == 0.0 {
        return Err(InvariantError::DegenerateDenominator { value: den, stderr: s_den });
    }
    // + 0.0 turns the unknot's −0 into 0.
    let value = num / den + 0.0;
    let stderr = s_num.hypot(value * s_den) / den.abs();
    Ok(V2Estimate { value, stderr, numerator: num, denominator: den, denominator_stderr: s_den })
}

/// Normalized order-2 invariant. All three knots use the same seeds.
pub fn normalized_v2(k: &KnotCurve, opts: &McOptions) -> Result<V2Estimate, InvariantError> {
    let f_k = order2_functional(k, opts)?;
    let f_u = order2_functional(&KnotCurve::Unknot, opts)?;
    let f_t = order2_functional(&KnotCurve::Trefoil, opts)?;
    normalize(&f_k, &f_u, &f_t)
}

/// One visit of the knot to a crossing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Passage {
    pub label: u32,
    pub over: bool,
    /// +1 or −1, the sign of the crossing.
    pub sign: i8,
}

/// Signed Gauss code: the crossings in the order the knot meets them.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct GaussCode {
    pub passages: Vec<Passage>,
}

impl fmt::Display for GaussCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.passages {
            write!(f, "{}{}{}", if p.over { 'O' } else { 'U' }, p.label, if p.sign > 0 { '+' } else { '-' })?;
        }
        Ok(())
    }
}

impl std::str::FromStr for GaussCode {
    type Err = InvariantError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        GaussCode::parse(s)
    }
}

impl GaussCode {
    /// Parses `O1+U2+O3+U1+O2+U3+`. Whitespace is ignored; the empty
    /// string is the unknot.
    pub fn parse(s: &str) -> Result<Self, InvariantError> {
        let chars: Vec<char> = s.chars().filter(|c| !c.is_whitespace()).collect();
        let mut passages = Vec::new();
        let mut i = 0;
        while i < chars.len() {
            let over = match chars[i].to_ascii_uppercase() {
                'O' => true,
                'U' => false,
                c => return Err(InvariantError::Gauss(format!("expected O or U, found {c:?}"))),
            };
            i += 1;
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let label: u32 = chars[start..i]
                .iter()
                .collect::<String>()
                .parse()
                .map_err(|_| InvariantError::Gauss(format!("missing crossing label at {start}")))?;
            let sign = match chars.get(i) {
                Some('+') => 1,
                Some('-') => -1,
                _ => return Err(InvariantError::Gauss(format!("missing sign after crossing {label}"))),
            };
            i += 1;
            passages.push(Passage { label, over, sign });
        }
        let code = GaussCode { passages };
        code.validate()?;
        Ok(code)
    }

    /// Each label twice, once over and once under, with one sign.
    pub fn validate(&self) -> Result<(), InvariantError> {
        let mut seen: HashMap<u32, (usize, usize, i8)> = HashMap::new();
        for p in &self.passages {
            let e = seen.entry(p.label).or_insert((0, 0, p.sign));
            if p.over {
                e.0 += 1;
            } else {
                e.1 += 1;
            }
            if e.2 != p.sign {
                return Err(InvariantError::Gauss(format!("crossing {} has inconsistent signs", p.label)));
            }
        }
        for (label, (o, u, _)) in seen {
            if o != 1 || u != 1 {
                return Err(InvariantError::Gauss(format!("crossing {label} must appear once over and once under")));
            }
        }
        Ok(())
    }

    pub fn n_crossings(&self) -> usize {
        self.passages.len() / 2
    }

    /// (over position, under position, sign) per crossing, sorted by label.
    pub fn chords(&self) -> Vec<(usize, usize, i8)> {
        let mut by_label: BTreeMap<u32, (usize, usize, i8)> = BTreeMap::new();
        for (i, p) in self.passages.iter().enumerate() {
            let e = by_label.entry(p.label).or_insert((0, 0, p.sign));
            if p.over {
                e.0 = i;
            } else {
                e.1 = i;
            }
        }
        by_label.into_values().collect()
    }

    /// Labels renumbered 1, 2, ... by first appearance.
    pub fn canonical(&self) -> GaussCode {
        let mut map = HashMap::new();
        let passages = self
            .passages
            .iter()
            .map(|p| {
                let n = map.len() as u32 + 1;
                let label = *map.entry(p.label).or_insert(n);
                Passage { label, ..*p }
            })
            .collect();
        GaussCode { passages }
    }

    /// Same diagram read from a different base point.
    pub fn rotated(&self, shift: usize) -> GaussCode {
        let mut passages = self.passages.clone();
        if !passages.is_empty() {
            let n = passages.len();
            passages.rotate_left(shift % n);
        }
        GaussCode { passages }
    }

    /// Diagram of the mirror image: overs and unders swap, signs flip.
    pub fn mirror(&self) -> GaussCode {
        let passages = self.passages.iter().map(|p| Passage { over: !p.over, sign: -p.sign, ..*p }).collect();
        GaussCode { passages }
    }

    fn fresh_label(&self) -> u32 {
        self.passages.iter().map(|p| p.label).max().unwrap_or(0) + 1
    }

    /// Connected sum, joining the second code in at the base point.
    pub fn connected_sum(&self, other: &GaussCode) -> GaussCode {
        let offset = self.fresh_label() - 1;
        let mut passages = self.passages.clone();
        passages.extend(other.passages.iter().map(|p| Passage { label: p.label + offset, ..*p }));
        GaussCode { passages }
    }

    /// Reidemeister I: a kink inserted before position `pos`.
    pub fn r1(&self, pos: usize, over_first: bool, sign: i8) -> GaussCode {
        let label = self.fresh_label();
        let mut passages = self.passages.clone();
        let pos = pos.min(passages.len());
        passages.insert(pos, Passage { label, over: !over_first, sign });
        passages.insert(pos, Passage { label, over: over_first, sign });
        GaussCode { passages }
    }

    /// Reidemeister II: the strand before position `p` slides over the strand
    /// before position `q`, creating two crossings of opposite sign. With
    /// `parallel` the lower strand meets them in the same order.
    pub fn r2(&self, p: usize, q: usize, parallel: bool, sign: i8) -> GaussCode {
        let a = self.fresh_label();
        let b = a + 1;
        let over = [Passage { label: a, over: true, sign }, Passage { label: b, over: true, sign: -sign }];
        let mut under = [Passage { label: a, over: false, sign }, Passage { label: b, over: false, sign: -sign }];
        if !parallel {
            under.swap(0, 1);
        }
        let n = self.passages.len();
        let (p, q) = (p.min(n), q.min(n));
        let mut passages = Vec::with_capacity(n + 4);
        for i in 0..=n {
            // At a shared slot the over pair comes first.
            if i == p {
                passages.extend_from_slice(&over);
            }
            if i == q {
                passages.extend_from_slice(&under);
            }
            if i < n {
                passages.push(self.passages[i]);
            }
        }
        GaussCode { passages }
    }

    /// Reidemeister III on the triangle of crossings `top` (top strand over
    /// middle), `side` (top over bottom) and `low` (middle over bottom). Each
    /// strand must meet its two triangle crossings consecutively; the move
    /// reverses the order on all three strands.
    pub fn r3(&self, top: u32, side: u32, low: u32) -> Result<GaussCode, InvariantError> {
        let n = self.passages.len();
        let find = |label: u32, over: bool| self.passages.iter().position(|p| p.label == label && p.over == over);
        let pos = |label, over| find(label, over).ok_or_else(|| InvariantError::Gauss(format!("no crossing {label}")));
        let strands = [
            (pos(top, true)?, pos(side, true)?),
            (pos(top, false)?, pos(low, true)?),
            (pos(side, false)?, pos(low, false)?),
        ];
        let mut passages = self.passages.clone();
        for (i, j) in strands {
            let adjacent = n > 1 && ((i + 1) % n == j || (j + 1) % n == i);
            if !adjacent {
                return Err(InvariantError::Gauss("crossings do not form a Reidemeister III triangle".into()));
            }
            passages.swap(i, j);
        }
        Ok(GaussCode { passages })
    }

    /// Closure of a braid on `strands` strands. Letter `i` is σ_i, letter −i
    /// its inverse; in σ_i the strand in position i crosses over the strand in
    /// position i + 1, a positive crossing. Crossing labels are letter
    /// indices from 1. Errors if the closure is a link.
    pub fn from_braid(strands: usize, word: &[i32]) -> Result<GaussCode, InvariantError> {
        for &l in word {
            if l == 0 || l.unsigned_abs() as usize >= strands {
                return Err(InvariantError::Gauss(format!("letter {l} is not a generator on {strands} strands")));
            }
        }
        let mut passages = Vec::with_capacity(2 * word.len());
        let mut pos = 0usize;
        let mut laps = 0;
        loop {
            for (j, &l) in word.iter().enumerate() {
                let left = l.unsigned_abs() as usize - 1;
                if pos == left || pos == left + 1 {
                    let from_left = pos == left;
                    passages.push(Passage { label: j as u32 + 1, over: from_left == (l > 0), sign: l.signum() as i8 });
                    pos = if from_left { left + 1 } else { left };
                }
            }
            laps += 1;
            if pos == 0 {
                break;
            }
        }
        if laps != strands {
            return Err(InvariantError::Gauss("braid closure has more than one component".into()));
        }
        let code = GaussCode { passages };
        code.validate()?;
        Ok(code)
    }

    /// Gauss code of the projection of `k` along `direction`, from a closed
    /// polygon with `samples` vertices. The viewer looks from +direction, so
    /// the strand with the larger height along it is over. The base point is
    /// the knot's t = 0.
    pub fn from_projection(k: &KnotCurve, direction: Point, samples: usize) -> Result<GaussCode, InvariantError> {
        let d = direction.normalize();
        let (e1, e2) = tangent_frame(&d);
        let pts: Vec<Point> = (0..samples).map(|i| k.point(i as f64 / samples as f64)).collect();
        let flat: Vec<[f64; 2]> = pts.iter().map(|p| [p.dot(&e1), p.dot(&e2)]).collect();
        let height: Vec<f64> = pts.iter().map(|p| p.dot(&d)).collect();
        let seg = |i: usize| (flat[i], flat[(i + 1) % samples]);
        let cross = |a: [f64; 2], b: [f64; 2]| a[0] * b[1] - a[1] * b[0];
        let sub = |a: [f64; 2], b: [f64; 2]| [a[0] - b[0], a[1] - b[1]];
        // (curve parameter, crossing index, over, sign)
        let mut events: Vec<(f64, u32, bool, i8)> = Vec::new();
        let mut label = 0u32;
        for i in 0..samples {
            for j in i + 2..samples {
                if i == 0 && j == samples - 1 {
                    continue;
                }
                let (p0, p1) = seg(i);
                let (q0, q1) = seg(j);
                let r = sub(p1, p0);
                let s = sub(q1, q0);
                let denom = cross(r, s);
                let scale = (r[0].hypot(r[1])) * (s[0].hypot(s[1]));
                if denom.abs() <= 1e-9 * scale {
                    continue;
                }
                let w = sub(q0, p0);
                let a = cross(w, s) / denom;
                let b = cross(w, r) / denom;
                if !(0.0..1.0).contains(&a) || !(0.0..1.0).contains(&b) {
                    continue;
                }
                let hi = height[i] + a * (height[(i + 1) % samples] - height[i]);
                let hj = height[j] + b * (height[(j + 1) % samples] - height[j]);
                if (hi - hj).abs() < 1e-9 {
                    return Err(InvariantError::Gauss("projection direction is not generic".into()));
                }
                let i_over = hi > hj;
                // Sign of (over tangent × under tangent) along the view direction.
                let sign = if (if i_over { denom } else { -denom }) > 0.0 { 1 } else { -1 };
                label += 1;
                events.push((i as f64 + a, label, i_over, sign));
                events.push((j as f64 + b, label, !i_over, sign));
            }
        }
        events.sort_by(|x, y| x.0.total_cmp(&y.0));
        let code = GaussCode {
            passages: events.into_iter().map(|(_, label, over, sign)| Passage { label, over, sign }).collect(),
        };
        code.validate()?;
        Ok(code.canonical())
    }
}

/// v₂ by the Polyak–Viro pairing: the sum of ε₁ε₂ over pairs of crossings
/// whose passages interleave as p₁ < p₂ < p₃ < p₄, with one crossing at
/// {p₁, p₃} passed over at p₁ and the other at {p₂, p₄} passed over at p₄.
/// Brute force over all pairs.
pub fn v2_oracle(code: &GaussCode) -> Result<i64, InvariantError> {
    code.validate()?;
    let chords = code.chords();
    let mut total = 0i64;
    for (i, &(oa, ua, sa)) in chords.iter().enumerate() {
        for &(ob, ub, sb) in &chords[i + 1..] {
            for ((o1, u1), (o2, u2)) in [((oa, ua), (ob, ub)), ((ob, ub), (oa, ua))] {
                // First chord starts over at p₁ and ends at p₃; the second is
                // under at p₂ and over at p₄.
                if o1 < u2 && u2 < u1 && u1 < o2 {
                    total += (sa * sb) as i64;
                }
            }
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_orders() {
        assert_eq!(key_order(X_KEY).unwrap(), 2);
        assert_eq!(key_order(T_KEY).unwrap(), 2);
        assert_eq!(key_order("2/0:b1-b2").unwrap(), 1);
    }

    #[test]
    fn roundtrip_display() {
        let s = "O1+U2-O3+U1+O2+U3+";
        assert!(GaussCode::parse(s).is_err());
        let s = "O1+U2+O3+U1+O2+U3+";
        assert_eq!(GaussCode::parse(s).unwrap().to_string(), s);
    }
}
