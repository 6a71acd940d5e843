//! Exact joint laws of a few primal edges, and of the dual edges crossing them.
//!
//! Only the choices of the endpoints matter, and of each endpoint's choice
//! only its restriction to the listed directions. A vertex with `r` relevant
//! directions has classes `m` (subsets of those directions) of multiplicity
//! `C(2d - r, k - |m|)`; the enumeration runs over classes, not full subsets,
//! and splits the edge set into vertex-disjoint components first.
//!
//! The dual lattice is the planar lattice spanned by axes 0 and 1, shifted by
//! `(1/2, 1/2)`. Dual label `p` denotes the point `p + (1/2, 1/2)`. A dual
//! edge is closed exactly when the primal edge it crosses is closed.

use num_bigint::BigUint;
use num_traits::{One, Zero};
use rustc_hash::FxHashMap;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::{map_slice, Execution};
use crate::lattice::{combine, ChoiceSet, Direction, ModelSpec, Variant, Vertex};
use crate::rational::{binomial, from_uints, pow, to_f64, Rational};

/// A primal edge `base -> base + dir`; undirected unless the variant is directed.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct PrimalEdge {
    pub base: Vertex,
    pub dir: Direction,
}

impl PrimalEdge {
    pub fn new(base: Vertex, dir: Direction) -> Self {
        Self { base, dir }
    }

    pub fn head(&self) -> Vertex {
        self.base.step(self.dir)
    }

    /// Same undirected edge written from its lower endpoint.
    pub fn normalized(&self) -> Self {
        if self.dir.negative {
            Self::new(self.head(), self.dir.opposite())
        } else {
            self.clone()
        }
    }
}

/// Required state of every listed edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeState {
    Open,
    Closed,
}

/// Exhaustive local state space: the endpoints of a set of edges, each with
/// its choice classes and their multiplicities.
#[derive(Debug, Clone)]
pub struct LocalConfigSpace {
    pub d: usize,
    pub k: usize,
    pub vertices: Vec<Vertex>,
    /// Relevant directions per vertex.
    pub relevant: Vec<ChoiceSet>,
    /// `(class, multiplicity)` per vertex; multiplicities sum to `C(2d, k)`.
    pub classes: Vec<Vec<(ChoiceSet, BigUint)>>,
}

impl LocalConfigSpace {
    pub fn new(d: usize, k: usize, variant: Variant, edges: &[PrimalEdge]) -> Result<Self> {
        let mut index: FxHashMap<Vertex, usize> = FxHashMap::default();
        let mut vertices = Vec::new();
        let mut relevant: Vec<u32> = Vec::new();
        let mut touch = |v: Vertex, dir: Direction, vertices: &mut Vec<Vertex>, relevant: &mut Vec<u32>| {
            let i = *index.entry(v.clone()).or_insert_with(|| {
                vertices.push(v);
                relevant.push(0);
                vertices.len() - 1
            });
            relevant[i] |= 1 << dir.index();
        };
        for e in edges {
            if e.base.dim() != d || e.dir.axis as usize >= d {
                return Err(Error::InvalidArgument(format!("edge {} {} is not in Z^{d}", e.base, e.dir)));
            }
            touch(e.base.clone(), e.dir, &mut vertices, &mut relevant);
            if variant != Variant::Directed {
                touch(e.head(), e.dir.opposite(), &mut vertices, &mut relevant);
            }
        }
        let classes = relevant
            .iter()
            .map(|&mask| {
                let r = mask.count_ones() as usize;
                (0..=r.min(k))
                    .filter(|&j| k - j <= 2 * d - r)
                    .flat_map(|j| {
                        let mult = binomial((2 * d - r) as u64, (k - j) as u64);
                        subsets_of(mask, j).into_iter().map(move |m| (ChoiceSet::from_mask(m), mult.clone()))
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            d,
            k,
            vertices,
            relevant: relevant.into_iter().map(ChoiceSet::from_mask).collect(),
            classes,
        })
    }

    /// `C(2d, k)^{|vertices|}`
    pub fn total_cases(&self) -> BigUint {
        binomial(2 * self.d as u64, self.k as u64).pow(self.vertices.len() as u32)
    }

    /// Number of class combinations a plain enumeration would visit.
    pub fn class_cases(&self) -> u128 {
        self.classes.iter().fold(1u128, |a, c| a.saturating_mul(c.len() as u128))
    }
}

fn subsets_of(mask: u32, size: usize) -> Vec<u32> {
    let bits: Vec<u32> = (0..32).filter(|b| mask >> b & 1 == 1).collect();
    (0u32..1 << bits.len())
        .filter(|s| s.count_ones() as usize == size)
        .map(|s| bits.iter().enumerate().filter(|(i, _)| s >> i & 1 == 1).map(|(_, b)| 1 << b).sum())
        .collect()
}

#[derive(Clone, Copy)]
struct Constraint {
    tail: usize,
    head: usize,
    dir: Direction,
    want_open: bool,
}

fn edge_is_open(variant: Variant, tail: ChoiceSet, head: Option<ChoiceSet>, dir: Direction) -> bool {
    let fwd = tail.contains(dir);
    match head {
        Some(h) => combine(variant, fwd, h.contains(dir.opposite())),
        None => fwd,
    }
}

/// Weighted count of class assignments satisfying every constraint, by DFS
/// over vertices; a constraint is checked as soon as both ends are assigned.
fn count_component(
    space: &LocalConfigSpace,
    variant: Variant,
    order: &[usize],
    constraints: &[Constraint],
    budget: u128,
) -> Result<BigUint> {
    let pos: FxHashMap<usize, usize> = order.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    // Constraints decided once the vertex at position i is assigned.
    let mut due: Vec<Vec<&Constraint>> = vec![Vec::new(); order.len()];
    for c in constraints {
        let at = if variant == Variant::Directed {
            pos[&c.tail]
        } else {
            pos[&c.tail].max(pos[&c.head])
        };
        due[at].push(c);
    }
    let mut assigned = vec![ChoiceSet::from_mask(0); space.vertices.len()];
    let mut nodes = 0u128;
    #[allow(clippy::too_many_arguments)]
    fn go(
        i: usize,
        space: &LocalConfigSpace,
        variant: Variant,
        order: &[usize],
        due: &[Vec<&Constraint>],
        assigned: &mut Vec<ChoiceSet>,
        nodes: &mut u128,
        budget: u128,
    ) -> Result<BigUint> {
        if i == order.len() {
            return Ok(BigUint::one());
        }
        let v = order[i];
        let mut total = BigUint::zero();
        for (class, mult) in &space.classes[v] {
            *nodes += 1;
            if *nodes > budget {
                return Err(Error::Budget {
                    what: "local configuration classes",
                    needed: *nodes,
                    budget,
                });
            }
            assigned[v] = *class;
            let ok = due[i].iter().all(|c| {
                let head = (variant != Variant::Directed).then(|| assigned[c.head]);
                edge_is_open(variant, assigned[c.tail], head, c.dir) == c.want_open
            });
            if ok {
                total += mult * go(i + 1, space, variant, order, due, assigned, nodes, budget)?;
            }
        }
        Ok(total)
    }
    go(0, space, variant, order, &due, &mut assigned, &mut nodes, budget)
}

/// Exact probability that each listed edge is in its required state.
pub fn joint_edge_probability(spec: &ModelSpec, edges: &[(PrimalEdge, EdgeState)]) -> Result<Rational> {
    joint_edge_probability_with(spec, edges, crate::budget_from_env())
}

pub fn joint_edge_probability_with(
    spec: &ModelSpec,
    edges: &[(PrimalEdge, EdgeState)],
    budget: u128,
) -> Result<Rational> {
    let variant = spec.variant();
    let plain: Vec<PrimalEdge> = edges.iter().map(|(e, _)| e.clone()).collect();
    let space = LocalConfigSpace::new(spec.d(), spec.k(), variant, &plain)?;
    let index: FxHashMap<&Vertex, usize> = space.vertices.iter().enumerate().map(|(i, v)| (v, i)).collect();
    let constraints: Vec<Constraint> = edges
        .iter()
        .map(|(e, s)| Constraint {
            tail: index[&e.base],
            head: if variant == Variant::Directed { index[&e.base] } else { index[&e.head()] },
            dir: e.dir,
            want_open: *s == EdgeState::Open,
        })
        .collect();

    // Union-find over vertices linked by an edge.
    let n = space.vertices.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        p[x] = r;
        r
    }
    for c in &constraints {
        let (a, b) = (find(&mut parent, c.tail), find(&mut parent, c.head));
        parent[a] = b;
    }
    let mut groups: FxHashMap<usize, Vec<usize>> = FxHashMap::default();
    for v in 0..n {
        let r = find(&mut parent, v);
        groups.entry(r).or_default().push(v);
    }
    let mut groups: Vec<Vec<usize>> = groups.into_values().collect();
    groups.sort();

    let per_vertex = binomial(2 * spec.d() as u64, spec.k() as u64);
    let mut prob = Rational::one();
    for group in groups {
        let members: rustc_hash::FxHashSet<usize> = group.iter().copied().collect();
        let local: Vec<Constraint> = constraints
            .iter()
            .filter(|c| members.contains(&c.tail))
            .copied()
            .collect();
        let order = bfs_order(&group, &local);
        let count = count_component(&space, variant, &order, &local, budget)?;
        prob *= from_uints(&count, &per_vertex.pow(group.len() as u32));
        if prob.is_zero() {
            break;
        }
    }
    Ok(prob)
}

/// Vertices in an order where each one (after the first) touches an earlier one.
fn bfs_order(group: &[usize], constraints: &[Constraint]) -> Vec<usize> {
    let mut order = vec![group[0]];
    let mut seen: rustc_hash::FxHashSet<usize> = order.iter().copied().collect();
    let mut i = 0;
    while i < order.len() {
        let v = order[i];
        for c in constraints {
            for (a, b) in [(c.tail, c.head), (c.head, c.tail)] {
                if a == v && seen.insert(b) {
                    order.push(b);
                }
            }
        }
        i += 1;
    }
    debug_assert_eq!(order.len(), group.len());
    order
}

/// A dual edge from label `from` along `+e0` (`axis = 0`) or `+e1` (`axis = 1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct DualEdge {
    pub from: (i32, i32),
    pub axis: u8,
}

impl DualEdge {
    pub fn between(a: (i32, i32), b: (i32, i32)) -> Option<Self> {
        let (lo, hi) = if (a.1, a.0) <= (b.1, b.0) { (a, b) } else { (b, a) };
        match (hi.0 - lo.0, hi.1 - lo.1) {
            (1, 0) => Some(Self { from: lo, axis: 0 }),
            (0, 1) => Some(Self { from: lo, axis: 1 }),
            _ => None,
        }
    }

    /// The primal edge this dual edge crosses, embedded in `Z^d` (`d >= 2`).
    pub fn primal(&self, d: usize) -> PrimalEdge {
        let mut c = vec![0i32; d];
        let (x, y) = self.from;
        let (base, dir) = if self.axis == 0 {
            ((x + 1, y), Direction::positive(1))
        } else {
            ((x, y + 1), Direction::positive(0))
        };
        c[0] = base.0;
        c[1] = base.1;
        PrimalEdge::new(Vertex::from_coords(&c), dir)
    }
}

/// Relative position of two dual edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DualGeometry {
    /// Perpendicular, sharing a dual vertex (a bent path of length 2).
    Orthogonal,
    /// Collinear, sharing a dual vertex (a straight path of length 2).
    Straight,
    /// Parallel neighbors across a unit dual square; their primal edges are
    /// collinear and share a vertex.
    Parallel,
    /// Far apart.
    Disjoint,
}

impl DualGeometry {
    pub const ALL: [DualGeometry; 4] = [
        DualGeometry::Orthogonal,
        DualGeometry::Straight,
        DualGeometry::Parallel,
        DualGeometry::Disjoint,
    ];

    pub fn edges(self) -> [DualEdge; 2] {
        let first = DualEdge { from: (0, 0), axis: 0 };
        let second = match self {
            DualGeometry::Orthogonal => DualEdge { from: (0, 0), axis: 1 },
            DualGeometry::Straight => DualEdge { from: (1, 0), axis: 0 },
            DualGeometry::Parallel => DualEdge { from: (0, 1), axis: 0 },
            DualGeometry::Disjoint => DualEdge { from: (5, 5), axis: 0 },
        };
        [first, second]
    }
}

impl std::str::FromStr for DualGeometry {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "orthogonal" | "bent" => Ok(DualGeometry::Orthogonal),
            "straight" | "collinear" => Ok(DualGeometry::Straight),
            "parallel" | "parallel-adjacent" => Ok(DualGeometry::Parallel),
            "disjoint" => Ok(DualGeometry::Disjoint),
            other => Err(Error::Unsupported(format!("unknown dual geometry '{other}'"))),
        }
    }
}

fn check_planar(spec: &ModelSpec) -> Result<()> {
    if spec.d() < 2 {
        return Err(Error::Unsupported("dual edges need d >= 2".into()));
    }
    if spec.variant() == Variant::Directed {
        return Err(Error::Unsupported("dual edges cross undirected primal edges; use ung, bng or xng".into()));
    }
    Ok(())
}

/// Probability that one dual edge in the plane of axes 0, 1 is closed.
pub fn dual_closed_marginal(spec: &ModelSpec) -> Result<Rational> {
    check_planar(spec)?;
    Ok(Rational::one() - crate::lattice::edge_open_probability(spec))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualPairReport {
    pub geometry: DualGeometry,
    #[serde(serialize_with = "crate::rational::serialize_fraction")]
    pub joint: Rational,
    #[serde(serialize_with = "crate::rational::serialize_fraction")]
    pub marginal: Rational,
    /// `marginal^2`
    #[serde(serialize_with = "crate::rational::serialize_fraction")]
    pub product: Rational,
    pub joint_f64: f64,
    pub negatively_correlated: bool,
}

/// Exact probability that both dual edges of the given geometry are closed.
pub fn joint_dual_closed(spec: &ModelSpec, geometry: DualGeometry) -> Result<DualPairReport> {
    check_planar(spec)?;
    let d = spec.d();
    let edges: Vec<_> = geometry.edges().iter().map(|e| (e.primal(d), EdgeState::Closed)).collect();
    let joint = joint_edge_probability(spec, &edges)?;
    let marginal = dual_closed_marginal(spec)?;
    let product = &marginal * &marginal;
    Ok(DualPairReport {
        geometry,
        joint_f64: to_f64(&joint),
        negatively_correlated: joint <= product,
        joint,
        marginal,
        product,
    })
}

/// Probability that every edge of a dual path (given by its labels) is closed.
pub fn path_closed_probability(spec: &ModelSpec, path: &[(i32, i32)]) -> Result<Rational> {
    check_planar(spec)?;
    let edges = path
        .windows(2)
        .map(|w| {
            DualEdge::between(w[0], w[1])
                .map(|e| (e.primal(spec.d()), EdgeState::Closed))
                .ok_or_else(|| Error::InvalidArgument(format!("{:?} and {:?} are not dual neighbors", w[0], w[1])))
        })
        .collect::<Result<Vec<_>>>()?;
    joint_edge_probability(spec, &edges)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathBoundReport {
    pub length: usize,
    pub paths: usize,
    #[serde(serialize_with = "crate::rational::serialize_fraction")]
    pub marginal: Rational,
    /// `marginal^length`
    #[serde(serialize_with = "crate::rational::serialize_fraction")]
    pub marginal_power: Rational,
    /// Largest closed probability over all self-avoiding dual paths.
    #[serde(serialize_with = "crate::rational::serialize_fraction")]
    pub max_probability: Rational,
    pub max_path: Vec<(i32, i32)>,
    /// Closed probability of the straight path.
    #[serde(serialize_with = "crate::rational::serialize_fraction")]
    pub straight: Rational,
    pub all_within_bound: bool,
}

/// Every self-avoiding dual path of the given length from the dual origin
/// whose first step is `+e0` (the other three are rotations or reflections).
pub fn dual_paths(length: usize) -> Vec<Vec<(i32, i32)>> {
    fn extend(path: &mut Vec<(i32, i32)>, left: usize, out: &mut Vec<Vec<(i32, i32)>>) {
        if left == 0 {
            out.push(path.clone());
            return;
        }
        let (x, y) = *path.last().unwrap();
        for next in [(x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)] {
            if !path.contains(&next) {
                path.push(next);
                extend(path, left - 1, out);
                path.pop();
            }
        }
    }
    let mut out = Vec::new();
    if length == 0 {
        return vec![vec![(0, 0)]];
    }
    extend(&mut vec![(0, 0), (1, 0)], length - 1, &mut out);
    out
}

pub const MAX_PATH_LENGTH: usize = 10;

/// Exact closed probability of every dual path of length `length`, checked
/// against `marginal^length`.
pub fn path_closed_bound(spec: &ModelSpec, length: usize, exec: Execution) -> Result<PathBoundReport> {
    check_planar(spec)?;
    if length == 0 || length > MAX_PATH_LENGTH {
        return Err(Error::Budget {
            what: "dual path length",
            needed: length as u128,
            budget: MAX_PATH_LENGTH as u128,
        });
    }
    let paths = dual_paths(length);
    let probs = map_slice(&paths, exec, |p| path_closed_probability(spec, p));
    let probs = probs.into_iter().collect::<Result<Vec<_>>>()?;
    let marginal = dual_closed_marginal(spec)?;
    let marginal_power = pow(&marginal, length as u32);
    let (imax, max_probability) = probs
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(i, p)| (i, p.clone()))
        .unwrap();
    let straight_path: Vec<_> = (0..=length as i32).map(|x| (x, 0)).collect();
    Ok(PathBoundReport {
        length,
        paths: paths.len(),
        all_within_bound: max_probability <= marginal_power,
        straight: path_closed_probability(spec, &straight_path)?,
        max_path: paths[imax].clone(),
        max_probability,
        marginal,
        marginal_power,
    })
}
