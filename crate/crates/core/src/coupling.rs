//! Pathwise couplings between directed models.
//!
//! Two couplings are provided:
//!
//! - `k -> k+1` at fixed `d`: the `k` choices of a site are a prefix of its
//!   `k + 1` choices under the same seed, so every open path survives.
//! - `(k+1, d+1) -> (k, d)`: each site `x'` of `Z^d` derives its `k` choices
//!   from the column `{(x', n) : n in Z}` of a `(k+1)`-choice directed graph
//!   on `Z^{d+1}`. At the start level, if at least `k` of the source choices
//!   are planar, keep `k` of them uniformly. Otherwise exactly `k - 1` are
//!   planar and both vertical arrows are present: keep those `k - 1`, flip a
//!   fair coin for up or down and follow the vertical arrows until a level
//!   offers a planar direction not yet kept, then pick one such direction
//!   uniformly. Every derived edge lifts to a directed source path, so a
//!   derived path to the boundary of `[-n, n]^d` certifies a source path to
//!   the boundary of `[-n, n]^{d+1}`.

use std::collections::VecDeque;

use rustc_hash::FxHashMap;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::explorer::{explore, trial_seed, BoxRegion, ClusterResult, EstimateWithCI, Explore, StopRule};
use crate::lattice::{ChoiceField, ChoiceSet, Direction, ModelSpec, Variant, Vertex, MAX_DIM};
use crate::rng::{site_key, CounterStream};

const KERNEL_SALT: u64 = 0x636f_6c75_6d6e_6b72;

/// Default cap on vertical steps in one derived choice.
pub const DEFAULT_LEVEL_BUDGET: u64 = 1 << 20;

/// The source `(k+1)`-choice configuration on `Z^{d+1}`, read column by column.
pub struct ColumnField {
    d: usize,
    k: usize,
    seed: u64,
    source: ChoiceField,
    level_budget: u64,
}

impl ColumnField {
    /// Derived model: `k` choices in `Z^d`; the source has `k + 1` in `Z^{d+1}`.
    pub fn new(k: usize, d: usize, seed: u64) -> Result<Self> {
        if d == 0 || d + 1 > MAX_DIM || k == 0 || k > 2 * d {
            return Err(Error::InvalidSpec(format!("no coupling for k = {k}, d = {d}")));
        }
        Ok(Self {
            d,
            k,
            seed,
            source: ChoiceField::new(d + 1, k + 1, seed),
            level_budget: DEFAULT_LEVEL_BUDGET,
        })
    }

    pub fn with_level_budget(mut self, budget: u64) -> Self {
        self.level_budget = budget;
        self
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

    /// Source choice at `(x', level)`.
    pub fn source_choice(&mut self, x: &Vertex, level: i32) -> ChoiceSet {
        self.source.choice(&lift(x, level))
    }

    fn planar(&self, c: ChoiceSet) -> ChoiceSet {
        ChoiceSet::from_mask(c.mask() & ((1u32 << (2 * self.d)) - 1))
    }
}

/// `(x', level)` as a vertex of `Z^{d+1}`.
pub fn lift(x: &Vertex, level: i32) -> Vertex {
    let mut c: Vec<i32> = x.coords().to_vec();
    c.push(level);
    Vertex::from_coords(&c)
}

/// Result of the kernel at one site: `k` planar directions, each tagged with
/// the level where it was found.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DerivedChoice {
    pub vertex: Vertex,
    pub start_level: i32,
    pub picks: Vec<(Direction, i32)>,
    /// Vertical steps taken; 0 when the start level had enough planar arrows.
    pub depth: u32,
    /// `+1` or `-1` when vertical steps were taken.
    pub vertical: i32,
}

impl DerivedChoice {
    /// Forget the levels.
    pub fn choice(&self) -> ChoiceSet {
        ChoiceSet::from_directions(self.picks.iter().map(|p| p.0))
    }

    pub fn level_of(&self, dir: Direction) -> Option<i32> {
        self.picks.iter().find(|p| p.0 == dir).map(|p| p.1)
    }
}

/// Uniform `m`-subset of the members of `set`, in direction order.
fn uniform_subset(stream: &mut CounterStream, set: ChoiceSet, m: usize) -> Vec<Direction> {
    let mut members: Vec<Direction> = set.iter().collect();
    for i in 0..m {
        let j = i + stream.below((members.len() - i) as u32) as usize;
        members.swap(i, j);
    }
    let mut out = members[..m].to_vec();
    out.sort();
    out
}

/// The kernel at `x'` started at `start_level`.
pub fn derive_choice(col: &mut ColumnField, x: &Vertex, start_level: i32) -> Result<DerivedChoice> {
    let (d, k) = (col.d, col.k);
    if x.dim() != d {
        return Err(Error::InvalidArgument(format!("vertex {x} is not in Z^{d}")));
    }
    let mut stream = CounterStream::new(site_key(col.seed, KERNEL_SALT, x.coords()));
    let up = Direction::positive(d);
    let down = Direction::negative(d);
    let c0 = col.source_choice(x, start_level);
    let p0 = col.planar(c0);
    if p0.len() >= k {
        let picks = uniform_subset(&mut stream, p0, k).into_iter().map(|a| (a, start_level)).collect();
        return Ok(DerivedChoice {
            vertex: x.clone(),
            start_level,
            picks,
            depth: 0,
            vertical: 0,
        });
    }
    // k + 1 choices with at most two vertical: exactly k - 1 planar, both vertical.
    assert!(
        p0.len() == k - 1 && c0.contains(up) && c0.contains(down),
        "source choice {c0} at level {start_level} violates the column invariant"
    );
    let step = if stream.below(2) == 0 { 1 } else { -1 };
    let dir = if step == 1 { up } else { down };
    let mut level = start_level;
    let mut depth = 0u32;
    loop {
        depth += 1;
        if depth as u64 > col.level_budget {
            return Err(Error::Budget {
                what: "vertical steps in one derived choice",
                needed: depth as u128,
                budget: col.level_budget as u128,
            });
        }
        level = level
            .checked_add(step)
            .ok_or_else(|| Error::InvalidArgument("level left the 32-bit range".into()))?;
        let c = col.source_choice(x, level);
        let fresh = ChoiceSet::from_mask(col.planar(c).mask() & !p0.mask());
        if !fresh.is_empty() {
            let last = uniform_subset(&mut stream, fresh, 1)[0];
            let mut picks: Vec<(Direction, i32)> = p0.iter().map(|a| (a, start_level)).collect();
            picks.push((last, level));
            picks.sort();
            return Ok(DerivedChoice {
                vertex: x.clone(),
                start_level,
                picks,
                depth,
                vertical: step,
            });
        }
        // Nothing new: this level repeats the k - 1 planar arrows and carries both vertical ones.
        assert!(c.contains(dir), "no vertical arrow to follow at level {level}");
    }
}

/// Source path realizing the derived edge `x -> x + dir`.
fn lift_edge(x: &Vertex, from_level: i32, dir: Direction, to_level: i32) -> Vec<Vertex> {
    let step = if to_level >= from_level { 1 } else { -1 };
    let mut path: Vec<Vertex> = Vec::new();
    let mut level = from_level;
    while level != to_level {
        level += step;
        path.push(lift(x, level));
    }
    path.push(lift(&x.step(dir), to_level));
    path
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoupledResult {
    pub source: ClusterResult,
    pub derived: ClusterResult,
    /// Source path from the origin to the boundary of `[-n, n]^{d+1}`, present
    /// whenever the derived cluster reached the boundary of `[-n, n]^d`.
    pub certificate: Option<Vec<Vertex>>,
    pub certificate_valid: bool,
    pub max_depth: u32,
}

impl CoupledResult {
    /// Derived reach implies source reach, with a valid certificate.
    pub fn dominated(&self) -> bool {
        !self.derived.reached_boundary || (self.source.reached_boundary && self.certificate_valid)
    }
}

/// Checks that `path` is a directed open path of the source from the origin
/// to the boundary of the `(d+1)`-dimensional box, staying inside it.
pub fn validate_certificate(col: &mut ColumnField, path: &[Vertex], n: u32) -> bool {
    let region = match BoxRegion::new(n) {
        Ok(r) => r,
        Err(_) => return false,
    };
    let d1 = col.d + 1;
    if path.first() != Some(&Vertex::origin(d1)) || !path.last().is_some_and(|v| region.on_boundary(v)) {
        return false;
    }
    path.windows(2).all(|w| {
        region.contains(&w[1])
            && w[0]
                .direction_to(&w[1])
                .is_some_and(|dir| col.source.choice(&w[0]).contains(dir))
    })
}

/// Explores the derived cluster of the origin in `[-n, n]^d` and the source
/// cluster in `[-n, n]^{d+1}` for one seed.
pub fn explore_coupled(k: usize, d: usize, n: u32, seed: u64, stop: StopRule) -> Result<CoupledResult> {
    let region = BoxRegion::new(n)?;
    let mut col = ColumnField::new(k, d, seed)?;
    let origin = Vertex::origin(d);
    // Discovery level and parent edge of each derived vertex.
    let mut level: FxHashMap<Vertex, i32> = FxHashMap::default();
    let mut parent: FxHashMap<Vertex, (Vertex, Direction, i32)> = FxHashMap::default();
    level.insert(origin.clone(), 0);
    let mut queue = VecDeque::from([origin.clone()]);
    let mut hit: Option<Vertex> = None;
    let mut max_depth = 0;
    'bfs: while let Some(x) = queue.pop_front() {
        let lx = level[&x];
        let dc = derive_choice(&mut col, &x, lx)?;
        max_depth = max_depth.max(dc.depth);
        for &(dir, l) in &dc.picks {
            let y = x.step(dir);
            if !region.contains(&y) || level.contains_key(&y) {
                continue;
            }
            level.insert(y.clone(), l);
            parent.insert(y.clone(), (x.clone(), dir, l));
            if region.on_boundary(&y) {
                hit.get_or_insert_with(|| y.clone());
                if stop == StopRule::FirstContact {
                    break 'bfs;
                }
            }
            queue.push_back(y);
        }
    }
    let derived = ClusterResult {
        visited_count: level.len() as u64,
        reached_boundary: hit.is_some(),
        frontier_exhausted: hit.is_none(),
        visited_sample: None,
    };
    let mut certificate = None;
    let mut certificate_valid = false;
    if let Some(end) = hit {
        let mut edges = Vec::new();
        let mut y = end;
        while let Some((x, dir, l)) = parent.get(&y) {
            edges.push((x.clone(), *dir, *l));
            y = x.clone();
        }
        edges.reverse();
        let mut path = vec![Vertex::origin(d + 1)];
        for (x, dir, l) in edges {
            path.extend(lift_edge(&x, level[&x], dir, l));
        }
        let source_box = BoxRegion::new(n)?;
        if let Some(cut) = path.iter().position(|v| source_box.on_boundary(v)) {
            path.truncate(cut + 1);
        }
        certificate_valid = validate_certificate(&mut col, &path, n);
        certificate = Some(path);
    }
    let source_spec = ModelSpec::new(d + 1, k + 1, Variant::Directed, seed)?;
    let opts = Explore {
        stop,
        ..Explore::reach(Variant::Directed)
    };
    let source = explore(&source_spec, seed, region, opts)?;
    Ok(CoupledResult {
        source,
        derived,
        certificate,
        certificate_valid,
        max_depth,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoupledEstimate {
    pub k: usize,
    pub d: usize,
    pub n: u32,
    pub derived: EstimateWithCI,
    pub source: EstimateWithCI,
    /// Trials where the derived cluster reached the boundary but the source
    /// did not, or the certificate failed.
    pub violations: u64,
    pub certificates: u64,
    pub max_depth: u32,
}

/// Boundary reach of the derived and source clusters over seeded trials.
pub fn estimate_coupled(
    k: usize,
    d: usize,
    n: u32,
    trials: u64,
    master_seed: u64,
    exec: Execution,
) -> Result<CoupledEstimate> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    ColumnField::new(k, d, 0)?;
    let results = map_indexed(trials, exec, |t| {
        explore_coupled(k, d, n, trial_seed(master_seed, t), StopRule::FirstContact)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let count = |f: &dyn Fn(&CoupledResult) -> bool| results.iter().filter(|r| f(r)).count() as u64;
    Ok(CoupledEstimate {
        k,
        d,
        n,
        derived: EstimateWithCI::bernoulli(count(&|r| r.derived.reached_boundary), trials, master_seed),
        source: EstimateWithCI::bernoulli(count(&|r| r.source.reached_boundary), trials, master_seed),
        violations: count(&|r| !r.dominated()),
        certificates: count(&|r| r.certificate_valid),
        max_depth: results.iter().map(|r| r.max_depth).max().unwrap_or(0),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub d: usize,
    pub k: usize,
    pub variant: Variant,
    pub n: u32,
    pub reach_k: EstimateWithCI,
    pub reach_k_plus_one: EstimateWithCI,
    /// Trials where the `k` cluster reached the boundary and the `k+1` cluster did not.
    pub violations: u64,
}

/// Runs `k` and `k + 1` on the same seeds. Monotone for the directed,
/// undirected and bidirectional variants.
pub fn k_monotonicity(spec: &ModelSpec, n: u32, trials: u64, exec: Execution) -> Result<MonotonicityReport> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let (d, k, variant) = (spec.d(), spec.k(), spec.variant());
    let bigger = spec.with_k(k + 1)?;
    let region = BoxRegion::new(n)?;
    let opts = Explore::reach(variant);
    let master = spec.master_seed();
    let pairs = map_indexed(trials, exec, |t| {
        let s = trial_seed(master, t);
        Ok::<_, Error>((
            explore(spec, s, region, opts)?.reached_boundary,
            explore(&bigger, s, region, opts)?.reached_boundary,
        ))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let a = pairs.iter().filter(|p| p.0).count() as u64;
    let b = pairs.iter().filter(|p| p.1).count() as u64;
    Ok(MonotonicityReport {
        d,
        k,
        variant,
        n,
        reach_k: EstimateWithCI::bernoulli(a, trials, master),
        reach_k_plus_one: EstimateWithCI::bernoulli(b, trials, master),
        violations: pairs.iter().filter(|p| p.0 && !p.1).count() as u64,
    })
}

/// `P(depth >= 2) = C(2d, k-1) / C(2d+2, k+1)^2`: the start level has only
/// `k - 1` planar arrows and the next level repeats them exactly.
pub fn depth_two_probability(k: usize, d: usize) -> crate::Rational {
    use crate::rational::{binomial, from_uints};
    let total = binomial(2 * d as u64 + 2, k as u64 + 1);
    from_uints(&binomial(2 * d as u64, k as u64 - 1), &(&total * &total))
}
