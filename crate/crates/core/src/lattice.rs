//! Z^d geometry, the per-vertex neighbor-choice field and the four edge rules.

use std::fmt;
use std::str::FromStr;

use num_traits::{One, Zero};
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::rational::{binomial, from_uints, pow, ratio, Rational};
use crate::rng::{site_key, CounterStream};

/// Choice sets are bitmasks over the `2d` directions, so `2d <= 32`.
pub const MAX_DIM: usize = 16;

const CHOICE_SALT: u64 = 0x6b6e_6368_6f69_6365;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// k-DnG: every choice is a directed edge.
    #[serde(rename = "dng")]
    Directed,
    /// k-UnG: an edge is open if either endpoint chose the other.
    #[serde(rename = "ung")]
    Undirected,
    /// k-BnG: both endpoints must choose each other.
    #[serde(rename = "bng")]
    Bidirectional,
    /// k-XnG: exactly one endpoint chose the other.
    #[serde(rename = "xng")]
    Xor,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Directed,
        Variant::Undirected,
        Variant::Bidirectional,
        Variant::Xor,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Variant::Directed => "dng",
            Variant::Undirected => "ung",
            Variant::Bidirectional => "bng",
            Variant::Xor => "xng",
        }
    }

    pub fn is_directed(self) -> bool {
        self == Variant::Directed
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dng" | "d" | "directed" => Ok(Variant::Directed),
            "ung" | "u" | "undirected" => Ok(Variant::Undirected),
            "bng" | "b" | "bidirectional" => Ok(Variant::Bidirectional),
            "xng" | "x" | "xor" => Ok(Variant::Xor),
            other => Err(Error::InvalidArgument(format!("unknown variant {other:?}"))),
        }
    }
}

/// `(d, k, variant)` plus the master seed that drives every random choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelSpec {
    d: usize,
    k: usize,
    variant: Variant,
    master_seed: u64,
}

impl ModelSpec {
    pub fn new(d: usize, k: usize, variant: Variant, master_seed: u64) -> Result<Self> {
        if d == 0 || d > MAX_DIM {
            return Err(Error::InvalidSpec(format!("d = {d} must lie in 1..={MAX_DIM}")));
        }
        if k == 0 || k > 2 * d {
            return Err(Error::InvalidSpec(format!("k = {k} must lie in 1..={}", 2 * d)));
        }
        Ok(Self {
            d,
            k,
            variant,
            master_seed,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn with_k(&self, k: usize) -> Result<Self> {
        Self::new(self.d, k, self.variant, self.master_seed)
    }

    pub fn with_variant(&self, variant: Variant) -> Self {
        Self { variant, ..*self }
    }

    pub fn with_seed(&self, master_seed: u64) -> Self {
        Self {
            master_seed,
            ..*self
        }
    }

    /// Number of equally likely choice sets, `C(2d, k)`.
    pub fn choice_count(&self) -> u64 {
        crate::rational::binomial_u128(2 * self.d as u64, self.k as u64) as u64
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{} (d={})", self.k, self.variant, self.d)
    }
}

/// A unit vector `±e_axis`. Index `2*axis` is the positive one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Direction {
    pub axis: u8,
    pub negative: bool,
}

impl Direction {
    pub fn positive(axis: usize) -> Self {
        Self {
            axis: axis as u8,
            negative: false,
        }
    }

    pub fn negative(axis: usize) -> Self {
        Self {
            axis: axis as u8,
            negative: true,
        }
    }

    #[inline]
    pub fn index(self) -> usize {
        2 * self.axis as usize + self.negative as usize
    }

    #[inline]
    pub fn from_index(i: usize) -> Self {
        Self {
            axis: (i / 2) as u8,
            negative: i % 2 == 1,
        }
    }

    #[inline]
    pub fn opposite(self) -> Self {
        Self {
            axis: self.axis,
            negative: !self.negative,
        }
    }

    #[inline]
    pub fn sign(self) -> i32 {
        if self.negative {
            -1
        } else {
            1
        }
    }

    /// All `2d` directions in traversal order `(axis, +, -)`.
    pub fn all(d: usize) -> impl Iterator<Item = Direction> {
        (0..2 * d).map(Direction::from_index)
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}e{}", if self.negative { '-' } else { '+' }, self.axis)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vertex(pub SmallVec<[i32; 8]>);

impl Vertex {
    pub fn origin(d: usize) -> Self {
        Vertex(SmallVec::from_elem(0, d))
    }

    pub fn from_coords(coords: &[i32]) -> Self {
        Vertex(SmallVec::from_slice(coords))
    }

    #[inline]
    pub fn coords(&self) -> &[i32] {
        &self.0
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn l1_norm(&self) -> i64 {
        self.0.iter().map(|&c| (c as i64).abs()).sum()
    }

    pub fn max_norm(&self) -> i64 {
        self.0.iter().map(|&c| (c as i64).abs()).max().unwrap_or(0)
    }

    #[inline]
    pub fn step(&self, dir: Direction) -> Vertex {
        let mut out = self.clone();
        let c = &mut out.0[dir.axis as usize];
        *c = c
            .checked_add(dir.sign())
            .expect("vertex coordinate left the signed 32-bit range");
        out
    }

    /// Step on the torus `(Z / side Z)^d`, coordinates kept in `0..side`.
    #[inline]
    pub fn step_torus(&self, dir: Direction, side: i32) -> Vertex {
        let mut out = self.clone();
        let c = &mut out.0[dir.axis as usize];
        *c = (*c + dir.sign()).rem_euclid(side);
        out
    }

    pub fn is_neighbor(&self, other: &Vertex) -> bool {
        self.dim() == other.dim()
            && self
                .0
                .iter()
                .zip(other.0.iter())
                .map(|(a, b)| (*a as i64 - *b as i64).abs())
                .sum::<i64>()
                == 1
    }

    /// The direction leading from `self` to a neighbor.
    pub fn direction_to(&self, other: &Vertex) -> Option<Direction> {
        if !self.is_neighbor(other) {
            return None;
        }
        let axis = (0..self.dim()).find(|&i| self.0[i] != other.0[i])?;
        Some(if other.0[axis] > self.0[axis] {
            Direction::positive(axis)
        } else {
            Direction::negative(axis)
        })
    }
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// The set of directions a vertex chose, as a bitmask over direction indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct ChoiceSet {
    mask: u32,
}

impl ChoiceSet {
    pub fn from_mask(mask: u32) -> Self {
        Self { mask }
    }

    pub fn from_directions<I: IntoIterator<Item = Direction>>(dirs: I) -> Self {
        let mut mask = 0;
        for d in dirs {
            mask |= 1 << d.index();
        }
        Self { mask }
    }

    #[inline]
    pub fn mask(self) -> u32 {
        self.mask
    }

    #[inline]
    pub fn len(self) -> usize {
        self.mask.count_ones() as usize
    }

    #[inline]
    pub fn is_empty(self) -> bool {
        self.mask == 0
    }

    #[inline]
    pub fn contains(self, dir: Direction) -> bool {
        self.mask & (1 << dir.index()) != 0
    }

    pub fn iter(self) -> impl Iterator<Item = Direction> {
        let mask = self.mask;
        (0..32).filter(move |i| mask & (1 << i) != 0).map(Direction::from_index)
    }

    /// Every `k`-subset of the `2d` directions, in increasing mask order.
    pub fn all_subsets(d: usize, k: usize) -> Vec<ChoiceSet> {
        let n = 2 * d;
        if k > n {
            return Vec::new();
        }
        if k == 0 {
            return vec![ChoiceSet::default()];
        }
        let limit = 1u64 << n;
        let mut m: u64 = (1 << k) - 1;
        let mut out = Vec::new();
        // Gosper's hack: next larger mask with the same popcount.
        while m < limit {
            out.push(ChoiceSet::from_mask(m as u32));
            let c = m & m.wrapping_neg();
            let r = m + c;
            m = (((r ^ m) >> 2) / c) | r;
        }
        out
    }
}

impl fmt::Display for ChoiceSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, d) in self.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{d}")?;
        }
        write!(f, "}}")
    }
}

/// Pseudorandom order of the `2d` directions at one site.
///
/// Runs a partial Fisher-Yates shuffle for `len` positions. The first `k`
/// entries do not depend on `len >= k`, which is what couples the k- and
/// (k+1)-models site by site.
pub fn shuffled_directions(seed: u64, d: usize, coords: &[i32], len: usize) -> SmallVec<[u8; 32]> {
    let n = 2 * d;
    let mut dirs: SmallVec<[u8; 32]> = (0..n as u8).collect();
    let mut stream = CounterStream::new(site_key(seed, CHOICE_SALT, coords));
    for i in 0..len.min(n) {
        let j = i + stream.below((n - i) as u32) as usize;
        dirs.swap(i, j);
    }
    dirs
}

/// The choice set of one site, without memoization.
pub fn sample_choice_at(seed: u64, d: usize, k: usize, coords: &[i32]) -> ChoiceSet {
    let dirs = shuffled_directions(seed, d, coords, k);
    ChoiceSet::from_mask(dirs[..k].iter().fold(0, |m, &i| m | (1u32 << i)))
}

/// The configuration `omega`: a lazy, memoized map vertex -> k-subset.
///
/// Scoped to one trial; the cache only grows.
#[derive(Debug, Clone)]
pub struct ChoiceField {
    d: usize,
    k: usize,
    seed: u64,
    cache: FxHashMap<Vertex, ChoiceSet>,
}

impl ChoiceField {
    pub fn new(d: usize, k: usize, seed: u64) -> Self {
        assert!((1..=MAX_DIM).contains(&d) && k <= 2 * d, "invalid (d, k) = ({d}, {k})");
        Self {
            d,
            k,
            seed,
            cache: FxHashMap::default(),
        }
    }

    pub fn for_spec(spec: &ModelSpec) -> Self {
        Self::new(spec.d, spec.k, spec.master_seed)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn cached_sites(&self) -> usize {
        self.cache.len()
    }

    #[inline]
    pub fn choice(&mut self, v: &Vertex) -> ChoiceSet {
        debug_assert_eq!(v.dim(), self.d);
        if let Some(c) = self.cache.get(v) {
            return *c;
        }
        let c = sample_choice_at(self.seed, self.d, self.k, v.coords());
        self.cache.insert(v.clone(), c);
        c
    }
}

pub fn sample_choice(field: &mut ChoiceField, v: &Vertex) -> ChoiceSet {
    field.choice(v)
}

/// Whether the edge from `u` in direction `dir` is open.
///
/// For the directed variant this is the directed edge `(u, u + dir)`,
/// otherwise the undirected edge `{u, u + dir}`.
#[inline]
pub fn edge_open(field: &mut ChoiceField, variant: Variant, u: &Vertex, dir: Direction) -> bool {
    let out = field.choice(u).contains(dir);
    if variant == Variant::Directed {
        return out;
    }
    let back = field.choice(&u.step(dir)).contains(dir.opposite());
    combine(variant, out, back)
}

/// Edge rule given whether each endpoint chose the other.
#[inline]
pub fn combine(variant: Variant, forward: bool, backward: bool) -> bool {
    match variant {
        Variant::Directed => forward,
        Variant::Undirected => forward || backward,
        Variant::Bidirectional => forward && backward,
        Variant::Xor => forward != backward,
    }
}

/// Exact probability that a single (directed or undirected) edge is open.
pub fn edge_open_probability(spec: &ModelSpec) -> Rational {
    let (d, k) = (spec.d as i64, spec.k as i64);
    match spec.variant {
        Variant::Directed => ratio(k, 2 * d),
        Variant::Undirected => ratio(k * (4 * d - k), 4 * d * d),
        Variant::Bidirectional => ratio(k * k, 4 * d * d),
        Variant::Xor => ratio(k * (2 * d - k), 2 * d * d),
    }
}

/// How two edges sit relative to each other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairRelation {
    /// Two distinct directed edges out of the same vertex (directed variant).
    SameSource,
    /// Two distinct undirected edges sharing one endpoint. For the directed
    /// variant this is read as [`PairRelation::SameSource`].
    Adjacent,
    /// Edges with no common endpoint; independent.
    Disjoint,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairProbability {
    #[serde(serialize_with = "crate::rational::serialize_fraction")]
    pub joint: Rational,
    /// `P(first open | second open)`, absent when the edge is never open.
    #[serde(serialize_with = "crate::rational::serialize_opt_fraction")]
    pub conditional: Option<Rational>,
    #[serde(serialize_with = "crate::rational::serialize_fraction")]
    pub marginal: Rational,
}

pub fn pair_probability(spec: &ModelSpec, relation: PairRelation) -> Result<PairProbability> {
    let (d, k) = (spec.d as i64, spec.k as i64);
    let marginal = edge_open_probability(spec);
    let a = ratio(k, 2 * d);
    let one = Rational::one();
    let joint = match (relation, spec.variant) {
        (PairRelation::Disjoint, _) => &marginal * &marginal,
        (PairRelation::SameSource, Variant::Directed) | (PairRelation::Adjacent, Variant::Directed) => {
            ratio(k * (k - 1), 2 * d * (2 * d - 1))
        }
        (PairRelation::SameSource, v) => {
            return Err(Error::Unsupported(format!(
                "same-source pairs are directed edges; {v} edges are undirected"
            )))
        }
        (PairRelation::Adjacent, Variant::Bidirectional) => {
            ratio(k * (k - 1), 2 * d * (2 * d - 1)) * &a * &a
        }
        (PairRelation::Adjacent, Variant::Undirected) => {
            let closed = pow(&(&one - &a), 2);
            let avoid_both = from_uints(
                &binomial(2 * d as u64 - 2, k as u64),
                &binomial(2 * d as u64, k as u64),
            );
            &one - ratio(2, 1) * &closed + avoid_both * &closed
        }
        (PairRelation::Adjacent, Variant::Xor) => ratio(
            (2 * d - k) * (k * (4 * k - 1) * (2 * d - k) - k * k),
            8 * d * d * d * (2 * d - 1),
        ),
    };
    let conditional = if marginal.is_zero() {
        None
    } else {
        Some(&joint / &marginal)
    };
    Ok(PairProbability {
        joint,
        conditional,
        marginal,
    })
}

/// Exact degree distribution on `0..=2d` (out-degree for the directed variant).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegreePmf {
    #[serde(serialize_with = "crate::rational::serialize_fractions")]
    pub probs: Vec<Rational>,
}

impl DegreePmf {
    pub fn mean(&self) -> Rational {
        self.probs
            .iter()
            .enumerate()
            .fold(Rational::zero(), |acc, (i, p)| acc + p * ratio(i as i64, 1))
    }

    pub fn total(&self) -> Rational {
        self.probs.iter().fold(Rational::zero(), |acc, p| acc + p)
    }
}

fn binomial_pmf(trials: u64, p: &Rational) -> Vec<Rational> {
    let q = Rational::one() - p;
    (0..=trials)
        .map(|i| {
            from_uints(&binomial(trials, i), &num_bigint::BigUint::one())
                * pow(p, i as u32)
                * pow(&q, (trials - i) as u32)
        })
        .collect()
}

fn convolve(a: &[Rational], b: &[Rational]) -> Vec<Rational> {
    let mut out = vec![Rational::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

pub fn degree_pmf(spec: &ModelSpec) -> DegreePmf {
    let (d, k) = (spec.d as u64, spec.k as u64);
    let n = (2 * d) as usize;
    let a = ratio(k as i64, 2 * d as i64);
    let mut probs = match spec.variant {
        Variant::Directed => {
            let mut v = vec![Rational::zero(); n + 1];
            v[k as usize] = Rational::one();
            v
        }
        Variant::Bidirectional => binomial_pmf(k, &a),
        Variant::Undirected => {
            let mut v = vec![Rational::zero(); k as usize];
            v.extend(binomial_pmf(2 * d - k, &a));
            v
        }
        // Chosen neighbors count unless they choose back; the others count
        // when they choose us.
        Variant::Xor => convolve(&binomial_pmf(k, &(Rational::one() - &a)), &binomial_pmf(2 * d - k, &a)),
    };
    probs.resize(n + 1, Rational::zero());
    DegreePmf { probs }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(d: usize, k: usize, v: Variant) -> ModelSpec {
        ModelSpec::new(d, k, v, 1).unwrap()
    }

    #[test]
    fn spec_validation() {
        assert!(ModelSpec::new(2, 0, Variant::Directed, 0).is_err());
        assert!(ModelSpec::new(2, 5, Variant::Directed, 0).is_err());
        assert!(ModelSpec::new(0, 1, Variant::Directed, 0).is_err());
        assert!(ModelSpec::new(2, 4, Variant::Xor, 0).is_ok());
    }

    #[test]
    fn directions_are_distinct_and_opposite_is_involution() {
        for d in 1..=4 {
            let all: Vec<_> = Direction::all(d).collect();
            assert_eq!(all.len(), 2 * d);
            let set: std::collections::HashSet<_> = all.iter().collect();
            assert_eq!(set.len(), 2 * d);
            for dir in all {
                assert_eq!(dir.opposite().opposite(), dir);
                assert_ne!(dir.opposite(), dir);
                assert_eq!(Direction::from_index(dir.index()), dir);
            }
        }
    }

    #[test]
    fn vertex_geometry() {
        let v = Vertex::from_coords(&[2, -3, 0]);
        assert_eq!(v.l1_norm(), 5);
        assert_eq!(v.max_norm(), 3);
        let w = v.step(Direction::negative(1));
        assert_eq!(w.coords(), &[2, -4, 0]);
        assert!(v.is_neighbor(&w));
        assert_eq!(v.direction_to(&w), Some(Direction::negative(1)));
        assert!(!v.is_neighbor(&w.step(Direction::positive(0))));
        let t = Vertex::from_coords(&[0, 4]).step_torus(Direction::positive(1), 5);
        assert_eq!(t.coords(), &[0, 0]);
    }

    #[test]
    fn subsets_enumerated_once_each() {
        for d in 1..=3 {
            for k in 0..=2 * d {
                let subs = ChoiceSet::all_subsets(d, k);
                assert_eq!(subs.len() as u128, crate::rational::binomial_u128(2 * d as u64, k as u64));
                assert!(subs.iter().all(|s| s.len() == k));
                let mut dedup = subs.clone();
                dedup.dedup();
                assert_eq!(dedup.len(), subs.len());
            }
        }
    }

    #[test]
    fn full_choice_when_k_is_2d() {
        let mut f = ChoiceField::new(1, 2, 99);
        for x in -50..50 {
            let c = f.choice(&Vertex::from_coords(&[x]));
            assert!(c.contains(Direction::positive(0)) && c.contains(Direction::negative(0)));
        }
    }

    #[test]
    fn choices_are_deterministic_and_sized() {
        let mut a = ChoiceField::new(3, 2, 5);
        let mut b = ChoiceField::new(3, 2, 5);
        for x in -5..5 {
            for y in -5..5 {
                let v = Vertex::from_coords(&[x, y, x - y]);
                let c = a.choice(&v);
                assert_eq!(c, a.choice(&v));
                assert_eq!(c, b.choice(&v));
                assert_eq!(c.len(), 2);
            }
        }
    }

    #[test]
    fn k_choice_is_prefix_of_k_plus_one_choice() {
        for x in -20..20 {
            let coords = [x, 3 * x];
            for k in 1..4 {
                let small = sample_choice_at(11, 2, k, &coords);
                let big = sample_choice_at(11, 2, k + 1, &coords);
                assert_eq!(small.mask() & !big.mask(), 0);
            }
        }
    }

    #[test]
    fn closed_forms_cited_values() {
        assert_eq!(edge_open_probability(&spec(2, 2, Variant::Undirected)), ratio(3, 4));
        assert_eq!(edge_open_probability(&spec(3, 3, Variant::Undirected)), ratio(3, 4));
        assert_eq!(edge_open_probability(&spec(5, 3, Variant::Directed)), ratio(3, 10));
        assert_eq!(edge_open_probability(&spec(2, 2, Variant::Xor)), ratio(1, 2));
        assert_eq!(edge_open_probability(&spec(2, 2, Variant::Bidirectional)), ratio(1, 4));
    }

    /// Brute force over the two endpoints' choice sets.
    fn edge_oracle(s: &ModelSpec) -> Rational {
        let subs = ChoiceSet::all_subsets(s.d(), s.k());
        let dir = Direction::positive(0);
        let mut hits = 0i64;
        for u in &subs {
            for v in &subs {
                if combine(s.variant(), u.contains(dir), v.contains(dir.opposite())) {
                    hits += 1;
                }
            }
        }
        ratio(hits, (subs.len() * subs.len()) as i64)
    }

    #[test]
    fn edge_probability_matches_two_site_enumeration() {
        for d in 1..=3 {
            for k in 1..=2 * d {
                for v in Variant::ALL {
                    let s = spec(d, k, v);
                    assert_eq!(edge_open_probability(&s), edge_oracle(&s), "{s}");
                }
            }
        }
    }

    #[test]
    fn pair_relations() {
        let p = pair_probability(&spec(2, 2, Variant::Directed), PairRelation::SameSource).unwrap();
        assert_eq!(p.conditional, Some(ratio(1, 3)));
        assert!(pair_probability(&spec(2, 2, Variant::Undirected), PairRelation::SameSource).is_err());
        for d in 1..=4 {
            for k in 1..=2 * d {
                for v in Variant::ALL {
                    let s = spec(d, k, v);
                    let m = edge_open_probability(&s);
                    let disjoint = pair_probability(&s, PairRelation::Disjoint).unwrap();
                    assert_eq!(disjoint.joint, &m * &m);
                    let adj = pair_probability(&s, PairRelation::Adjacent).unwrap();
                    assert!(adj.joint <= &m * &m, "{s}");
                    if v == Variant::Xor {
                        assert_eq!(adj.joint == &m * &m, k == d || k == 2 * d, "{s}");
                    }
                }
            }
        }
    }

    /// Three sites x, y1 = x + e0, y2 = x + e1 with all their choice sets.
    #[test]
    fn xor_adjacent_joint_matches_three_site_enumeration() {
        let s = spec(3, 2, Variant::Xor);
        let subs = ChoiceSet::all_subsets(3, 2);
        let (e0, e1) = (Direction::positive(0), Direction::positive(1));
        let mut hits = 0i64;
        for x in &subs {
            for y1 in &subs {
                for y2 in &subs {
                    let a = x.contains(e0) != y1.contains(e0.opposite());
                    let b = x.contains(e1) != y2.contains(e1.opposite());
                    hits += (a && b) as i64;
                }
            }
        }
        assert_eq!(subs.len().pow(3), 3375);
        let got = pair_probability(&s, PairRelation::Adjacent).unwrap().joint;
        assert_eq!(got, ratio(hits, 3375));
        assert_eq!(got, ratio(26, 135));
    }

    #[test]
    fn degree_means_and_totals() {
        let b = degree_pmf(&spec(2, 2, Variant::Bidirectional));
        assert_eq!(b.total(), Rational::one());
        assert_eq!(b.mean(), ratio(1, 1));
        let u = degree_pmf(&spec(2, 2, Variant::Undirected));
        assert_eq!(u.mean(), ratio(3, 1));
        let dn = degree_pmf(&spec(3, 4, Variant::Directed));
        assert_eq!(dn.probs[4], Rational::one());
        for d in 1..=4 {
            for k in 1..=2 * d {
                for v in Variant::ALL {
                    let s = spec(d, k, v);
                    let pmf = degree_pmf(&s);
                    assert_eq!(pmf.probs.len(), 2 * d + 1);
                    assert_eq!(pmf.total(), Rational::one(), "{s}");
                    if v != Variant::Directed {
                        // Mean degree is 2d times the edge probability.
                        assert_eq!(pmf.mean(), edge_open_probability(&s) * ratio(2 * d as i64, 1));
                    }
                }
            }
        }
    }

    #[test]
    fn xor_law_symmetric_in_k() {
        for d in 1..=4 {
            for k in 1..2 * d {
                let a = spec(d, k, Variant::Xor);
                let b = spec(d, 2 * d - k, Variant::Xor);
                assert_eq!(edge_open_probability(&a), edge_open_probability(&b));
                assert_eq!(degree_pmf(&a), degree_pmf(&b));
                assert_eq!(
                    pair_probability(&a, PairRelation::Adjacent).unwrap().joint,
                    pair_probability(&b, PairRelation::Adjacent).unwrap().joint
                );
            }
        }
    }
}
