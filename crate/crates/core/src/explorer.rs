//! Cluster exploration from the origin, Monte Carlo estimates over seeded
//! trials, the generation process of the directed graph and the
//! out/in-component balance on the torus.

use std::collections::VecDeque;

use rustc_hash::FxHashMap;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::lattice::{combine, sample_choice_at, ChoiceSet, Direction, ModelSpec, Variant, Vertex};
use crate::rng::derive_seed;
use crate::walk_enum::mean_and_stderr;

/// The centered box `[-n, n]^d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BoxRegion {
    pub n: u32,
}

impl BoxRegion {
    pub fn new(n: u32) -> Result<Self> {
        if n == 0 || n > i32::MAX as u32 / 2 {
            return Err(Error::InvalidArgument(format!("box half-side {n} out of range")));
        }
        Ok(Self { n })
    }

    pub fn contains(&self, v: &Vertex) -> bool {
        v.max_norm() <= self.n as i64
    }

    pub fn on_boundary(&self, v: &Vertex) -> bool {
        v.max_norm() == self.n as i64
    }

    /// `(2n + 1)^d`, saturating.
    pub fn volume(&self, d: usize) -> u128 {
        (2 * self.n as u128 + 1).saturating_pow(d as u32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ExploreMode {
    /// Along directed edges away from the origin (directed variant).
    Out,
    /// Against directed edges, towards the origin (directed variant, torus only).
    In,
    /// Along open undirected edges (UnG, BnG, XnG).
    Undirected,
}

impl ExploreMode {
    pub fn default_for(variant: Variant) -> Self {
        if variant.is_directed() {
            ExploreMode::Out
        } else {
            ExploreMode::Undirected
        }
    }

    fn check(self, variant: Variant) -> Result<()> {
        let ok = match self {
            ExploreMode::Out | ExploreMode::In => variant.is_directed(),
            ExploreMode::Undirected => !variant.is_directed(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::ModeMismatch {
                mode: format!("{self:?}").to_lowercase(),
                variant: variant.tag().to_string(),
            })
        }
    }
}

/// When a box exploration stops.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopRule {
    /// At the first boundary vertex (boundary-reach estimates).
    FirstContact,
    /// Only when the frontier is empty (component sizes).
    Exhaust,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterResult {
    pub visited_count: u64,
    pub reached_boundary: bool,
    /// The frontier emptied without touching the boundary. Exactly one of
    /// this and `reached_boundary` holds.
    pub frontier_exhausted: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub visited_sample: Option<Vec<Vertex>>,
}

/// Choice and visit state for the sites of one box, one trial.
struct Sites {
    d: usize,
    k: usize,
    seed: u64,
    store: Store,
}

enum Store {
    Dense { n: i32, strides: Vec<usize>, choice: Vec<u32>, seen: Vec<bool> },
    Sparse { choice: FxHashMap<Vertex, ChoiceSet>, seen: rustc_hash::FxHashSet<Vertex> },
}

const DENSE_CELLS: u128 = 1 << 22;
const UNSET: u32 = u32::MAX;

impl Sites {
    fn new(d: usize, k: usize, seed: u64, region: BoxRegion) -> Self {
        let cells = region.volume(d);
        let store = if cells <= DENSE_CELLS {
            let side = 2 * region.n as usize + 1;
            Store::Dense {
                n: region.n as i32,
                strides: (0..d).map(|a| side.pow(a as u32)).collect(),
                choice: vec![UNSET; cells as usize],
                seen: vec![false; cells as usize],
            }
        } else {
            Store::Sparse {
                choice: FxHashMap::default(),
                seen: Default::default(),
            }
        };
        Self { d, k, seed, store }
    }

    #[inline]
    fn index(n: i32, strides: &[usize], v: &Vertex) -> usize {
        v.coords().iter().zip(strides).map(|(&c, s)| (c + n) as usize * s).sum()
    }

    fn choice(&mut self, v: &Vertex) -> ChoiceSet {
        let (d, k, seed) = (self.d, self.k, self.seed);
        match &mut self.store {
            Store::Dense { n, strides, choice, .. } => {
                let i = Self::index(*n, strides, v);
                if choice[i] == UNSET {
                    choice[i] = sample_choice_at(seed, d, k, v.coords()).mask();
                }
                ChoiceSet::from_mask(choice[i])
            }
            Store::Sparse { choice, .. } => *choice
                .entry(v.clone())
                .or_insert_with(|| sample_choice_at(seed, d, k, v.coords())),
        }
    }

    /// Marks `v` visited; true when it was not visited before.
    fn visit(&mut self, v: &Vertex) -> bool {
        match &mut self.store {
            Store::Dense { n, strides, seen, .. } => {
                let i = Self::index(*n, strides, v);
                !std::mem::replace(&mut seen[i], true)
            }
            Store::Sparse { seen, .. } => seen.insert(v.clone()),
        }
    }
}

/// Options for a single exploration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Explore {
    pub mode: ExploreMode,
    pub stop: StopRule,
    /// Keep the visited vertices, in visiting order.
    pub record: bool,
}

impl Explore {
    pub fn reach(variant: Variant) -> Self {
        Self {
            mode: ExploreMode::default_for(variant),
            stop: StopRule::FirstContact,
            record: false,
        }
    }

    pub fn exhaust(variant: Variant) -> Self {
        Self {
            stop: StopRule::Exhaust,
            ..Self::reach(variant)
        }
    }

    pub fn recorded(self) -> Self {
        Self { record: true, ..self }
    }
}

/// Breadth-first search from the origin inside `region`, neighbors taken in
/// direction-index order. Deterministic in `(spec, trial_seed)`.
pub fn explore(spec: &ModelSpec, trial_seed: u64, region: BoxRegion, opts: Explore) -> Result<ClusterResult> {
    opts.mode.check(spec.variant())?;
    if opts.mode == ExploreMode::In {
        return Err(Error::Unsupported(
            "in-components need a finite lattice; use the torus balance check".into(),
        ));
    }
    let (d, variant) = (spec.d(), spec.variant());
    let mut sites = Sites::new(d, spec.k(), trial_seed, region);
    let origin = Vertex::origin(d);
    sites.visit(&origin);
    let mut queue = VecDeque::from([origin.clone()]);
    let mut sample = opts.record.then(|| vec![origin]);
    let mut visited = 1u64;
    let mut reached = false;
    'bfs: while let Some(u) = queue.pop_front() {
        let cu = sites.choice(&u);
        for dir in Direction::all(d) {
            let fwd = cu.contains(dir);
            if variant == Variant::Directed && !fwd {
                continue;
            }
            let v = u.step(dir);
            if !region.contains(&v) {
                continue;
            }
            if variant != Variant::Directed {
                let back = sites.choice(&v).contains(dir.opposite());
                if !combine(variant, fwd, back) {
                    continue;
                }
            }
            if !sites.visit(&v) {
                continue;
            }
            visited += 1;
            if let Some(s) = sample.as_mut() {
                s.push(v.clone());
            }
            if region.on_boundary(&v) {
                reached = true;
                if opts.stop == StopRule::FirstContact {
                    break 'bfs;
                }
            }
            queue.push_back(v);
        }
    }
    Ok(ClusterResult {
        visited_count: visited,
        reached_boundary: reached,
        frontier_exhausted: !reached,
        visited_sample: sample,
    })
}

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimateWithCI {
    pub point: f64,
    pub stderr: f64,
    pub trials: u64,
    pub master_seed: u64,
}

impl EstimateWithCI {
    pub fn bernoulli(successes: u64, trials: u64, master_seed: u64) -> Self {
        let point = successes as f64 / trials as f64;
        Self {
            point,
            stderr: (point * (1.0 - point) / trials as f64).sqrt(),
            trials,
            master_seed,
        }
    }

    /// `point - z stderr`
    pub fn lower(&self, z: f64) -> f64 {
        self.point - z * self.stderr
    }

    /// `point + z stderr`
    pub fn upper(&self, z: f64) -> f64 {
        self.point + z * self.stderr
    }
}

fn check_trials(trials: u64) -> Result<()> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    Ok(())
}

/// Seed of trial `t` under `master`.
pub fn trial_seed(master: u64, t: u64) -> u64 {
    derive_seed(master, t)
}

/// Fraction of trials whose cluster touches the boundary of `[-n, n]^d`.
pub fn estimate_boundary_reach(spec: &ModelSpec, n: u32, trials: u64, exec: Execution) -> Result<EstimateWithCI> {
    check_trials(trials)?;
    let region = BoxRegion::new(n)?;
    let opts = Explore::reach(spec.variant());
    opts.mode.check(spec.variant())?;
    let master = spec.master_seed();
    let hits = map_indexed(trials, exec, |t| {
        explore(spec, trial_seed(master, t), region, opts).map(|r| r.reached_boundary)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(EstimateWithCI::bernoulli(
        hits.iter().filter(|&&h| h).count() as u64,
        trials,
        master,
    ))
}

/// Mean fraction of the box in the origin's cluster.
pub fn estimate_proportion(spec: &ModelSpec, n: u32, trials: u64, exec: Execution) -> Result<EstimateWithCI> {
    check_trials(trials)?;
    let region = BoxRegion::new(n)?;
    let opts = Explore::exhaust(spec.variant());
    opts.mode.check(spec.variant())?;
    let master = spec.master_seed();
    let volume = region.volume(spec.d()) as f64;
    let fracs = map_indexed(trials, exec, |t| {
        explore(spec, trial_seed(master, t), region, opts).map(|r| r.visited_count as f64 / volume)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let (point, stderr) = mean_and_stderr(fracs.iter().copied());
    Ok(EstimateWithCI {
        point,
        stderr,
        trials,
        master_seed: master,
    })
}

/// Generation maxima of `||x||_1` and generation sizes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerationTrace {
    /// `max ||x||_1` over `G_1, G_2, ...`
    pub maxima: Vec<i64>,
    /// `|G_0|, |G_1|, ...`
    pub sizes: Vec<usize>,
    /// Generations `n >= 0` with `max G_{n+1} <= max G_n`.
    pub violations: Vec<usize>,
}

impl GenerationTrace {
    pub fn strictly_increasing(&self) -> bool {
        self.violations.is_empty()
    }
}

/// The directed generation process: `G_0 = {o}`, `G_{n+1}` the successors of
/// `G_n` not seen in earlier generations.
pub fn growth_trace(spec: &ModelSpec, generations: usize, seed: u64) -> Result<GenerationTrace> {
    if spec.variant() != Variant::Directed {
        return Err(Error::ModeMismatch {
            mode: "growth".into(),
            variant: spec.variant().tag().into(),
        });
    }
    let (d, k) = (spec.d(), spec.k());
    if k <= d {
        return Err(Error::InvalidArgument(format!(
            "the growth property needs k >= d + 1; got k = {k}, d = {d}"
        )));
    }
    let mut seen: rustc_hash::FxHashSet<Vertex> = Default::default();
    let origin = Vertex::origin(d);
    seen.insert(origin.clone());
    let mut current = vec![origin];
    let mut maxima = Vec::with_capacity(generations);
    let mut sizes = vec![1];
    let mut violations = Vec::new();
    let mut previous_max = 0i64;
    for g in 0..generations {
        let mut next = Vec::new();
        for u in &current {
            let c = sample_choice_at(seed, d, k, u.coords());
            for dir in c.iter() {
                let v = u.step(dir);
                if seen.insert(v.clone()) {
                    next.push(v);
                }
            }
        }
        let m = next.iter().map(Vertex::l1_norm).max().unwrap_or(-1);
        if m <= previous_max {
            violations.push(g);
        }
        previous_max = m;
        maxima.push(m);
        sizes.push(next.len());
        current = next;
    }
    Ok(GenerationTrace {
        maxima,
        sizes,
        violations,
    })
}

/// A sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub trials: u64,
    pub master_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MassTransportReport {
    pub side: u32,
    pub out_component: MeanEstimate,
    pub in_component: MeanEstimate,
    pub difference: f64,
    pub combined_stderr: f64,
}

impl MassTransportReport {
    /// `|mean_out - mean_in| <= z (stderr_out + stderr_in)`
    pub fn balanced(&self, z: f64) -> bool {
        self.difference.abs() <= z * self.combined_stderr
    }
}

/// Size of the out- or in-component of the origin of the directed graph on
/// the torus `(Z / L Z)^d`.
pub fn torus_component(spec: &ModelSpec, side: u32, seed: u64, mode: ExploreMode) -> Result<u64> {
    mode.check(spec.variant())?;
    if side < 3 {
        return Err(Error::InvalidArgument(format!("torus side {side} < 3 wraps onto itself")));
    }
    let (d, k) = (spec.d(), spec.k());
    let cells = (side as u128).checked_pow(d as u32).filter(|&c| c <= 1 << 28).ok_or_else(|| {
        Error::Budget {
            what: "torus sites",
            needed: (side as u128).saturating_pow(d as u32),
            budget: 1 << 28,
        }
    })? as usize;
    let l = side as i32;
    let strides: Vec<usize> = (0..d).map(|a| (side as usize).pow(a as u32)).collect();
    let index = |v: &Vertex| -> usize { v.coords().iter().zip(&strides).map(|(&c, s)| c as usize * s).sum() };
    let mut choice = vec![UNSET; cells];
    let mut get = |v: &Vertex| -> ChoiceSet {
        let i = index(v);
        if choice[i] == UNSET {
            choice[i] = sample_choice_at(seed, d, k, v.coords()).mask();
        }
        ChoiceSet::from_mask(choice[i])
    };
    let mut seen = vec![false; cells];
    let origin = Vertex::origin(d);
    seen[index(&origin)] = true;
    let mut queue = VecDeque::from([origin]);
    let mut count = 1u64;
    while let Some(u) = queue.pop_front() {
        let cu = (mode == ExploreMode::Out).then(|| get(&u));
        for dir in Direction::all(d) {
            let v = u.step_torus(dir, l);
            let linked = match cu {
                Some(c) => c.contains(dir),
                // v -> u is an edge when v chose the direction back to u.
                None => get(&v).contains(dir.opposite()),
            };
            let i = index(&v);
            if linked && !seen[i] {
                seen[i] = true;
                count += 1;
                queue.push_back(v);
            }
        }
    }
    Ok(count)
}

/// Estimates `E|out-component|` and `E|in-component|` of the origin on the
/// torus from independent streams (`2t` and `2t + 1` under the master seed).
pub fn mass_transport_check(spec: &ModelSpec, side: u32, trials: u64, exec: Execution) -> Result<MassTransportReport> {
    check_trials(trials)?;
    ExploreMode::Out.check(spec.variant())?;
    let master = spec.master_seed();
    let sizes = map_indexed(trials, exec, |t| {
        let out = torus_component(spec, side, derive_seed(master, 2 * t), ExploreMode::Out)?;
        let inn = torus_component(spec, side, derive_seed(master, 2 * t + 1), ExploreMode::In)?;
        Ok::<_, Error>((out as f64, inn as f64))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let est = |xs: Vec<f64>| {
        let (mean, stderr) = mean_and_stderr(xs.iter().copied());
        MeanEstimate {
            mean,
            stderr,
            trials,
            master_seed: master,
        }
    };
    let out_component = est(sizes.iter().map(|s| s.0).collect());
    let in_component = est(sizes.iter().map(|s| s.1).collect());
    Ok(MassTransportReport {
        side,
        difference: out_component.mean - in_component.mean,
        combined_stderr: out_component.stderr + in_component.stderr,
        out_component,
        in_component,
    })
}
