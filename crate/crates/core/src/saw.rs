//! Self-avoiding walks, dual circuits around the origin and Peierls sums.

use rustc_hash::FxHashSet;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::{map_slice, Execution};
use crate::rational::{pow, to_f64, Rational};

/// `c_n(d)` for `n = 1..=n_max`; `counts[n - 1] = c_n(d)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SawCounts {
    pub d: usize,
    pub counts: Vec<u128>,
}

impl SawCounts {
    pub fn n_max(&self) -> usize {
        self.counts.len()
    }

    /// `c_n(d)`, with `c_0 = 1`.
    pub fn get(&self, n: usize) -> Option<u128> {
        if n == 0 {
            Some(1)
        } else {
            self.counts.get(n - 1).copied()
        }
    }

    /// `c_n^{1/n}` for each enumerated `n`.
    pub fn roots(&self) -> Vec<f64> {
        self.counts
            .iter()
            .enumerate()
            .map(|(i, &c)| (c as f64).powf(1.0 / (i + 1) as f64))
            .collect()
    }
}

/// Node count of the unpruned walk tree, an upper bound on the DFS work.
fn saw_work(d: usize, n_max: usize) -> u128 {
    let branch = (2 * d as u128).saturating_sub(1).max(1);
    let mut level = 2 * d as u128;
    let mut total = 0u128;
    for _ in 0..n_max {
        total = total.saturating_add(level);
        level = level.saturating_mul(branch);
    }
    total
}

pub fn count_saw(d: usize, n_max: usize) -> Result<SawCounts> {
    count_saw_with(d, n_max, crate::budget_from_env(), Execution::Parallel)
}

enum Visited {
    Dense(Vec<bool>),
    Sparse(FxHashSet<u128>),
}

impl Visited {
    fn new(cells: Option<usize>) -> Self {
        match cells {
            Some(c) => Visited::Dense(vec![false; c]),
            None => Visited::Sparse(FxHashSet::default()),
        }
    }

    fn insert(&mut self, idx: u128) -> bool {
        match self {
            Visited::Dense(v) => !std::mem::replace(&mut v[idx as usize], true),
            Visited::Sparse(s) => s.insert(idx),
        }
    }

    fn remove(&mut self, idx: u128) {
        match self {
            Visited::Dense(v) => v[idx as usize] = false,
            Visited::Sparse(s) => {
                s.remove(&idx);
            }
        }
    }
}

struct SawSearch {
    d: usize,
    n_max: usize,
    strides: Vec<u128>,
    counts: Vec<u128>,
}

impl SawSearch {
    fn dfs(&mut self, visited: &mut Visited, idx: u128, depth: usize) {
        self.counts[depth - 1] += 1;
        if depth == self.n_max {
            return;
        }
        for axis in 0..self.d {
            let s = self.strides[axis];
            for next in [idx + s, idx - s] {
                if visited.insert(next) {
                    self.dfs(visited, next, depth + 1);
                    visited.remove(next);
                }
            }
        }
    }
}

/// Exact `c_n(d)` by depth-first search with a visited set.
///
/// The first step is fixed to `+e_0` and counts are multiplied by `2d`; the
/// subtrees below each length-3 prefix are searched independently.
pub fn count_saw_with(d: usize, n_max: usize, budget: u128, exec: Execution) -> Result<SawCounts> {
    if d == 0 || d > crate::lattice::MAX_DIM {
        return Err(Error::InvalidArgument(format!("d = {d} out of range")));
    }
    if n_max == 0 {
        return Err(Error::InvalidArgument("n_max must be at least 1".into()));
    }
    let needed = saw_work(d, n_max);
    if needed > budget {
        return Err(Error::Budget {
            what: "self-avoiding walk tree nodes",
            needed,
            budget,
        });
    }
    // Coordinates shifted by n_max so every index is nonnegative.
    let side = 2 * n_max as u128 + 1;
    let strides: Vec<u128> = (0..d).map(|a| side.pow(a as u32)).collect();
    let cells = side.checked_pow(d as u32).filter(|&c| c <= 1 << 24).map(|c| c as usize);
    let origin: u128 = strides.iter().map(|s| s * n_max as u128).sum();

    // Prefixes of up to three steps, all starting with +e_0.
    let prefix_len = n_max.min(3);
    let mut prefixes: Vec<Vec<u128>> = vec![vec![origin, origin + strides[0]]];
    for _ in 1..prefix_len {
        let mut next = Vec::new();
        for p in &prefixes {
            let last = *p.last().unwrap();
            for s in &strides {
                for v in [last + s, last - s] {
                    if !p.contains(&v) {
                        let mut q = p.clone();
                        q.push(v);
                        next.push(q);
                    }
                }
            }
        }
        prefixes = next;
    }
    let partials = map_slice(&prefixes, exec, |p| {
        let mut search = SawSearch {
            d,
            n_max,
            strides: strides.clone(),
            counts: vec![0; n_max],
        };
        let mut visited = Visited::new(cells);
        for &v in p {
            visited.insert(v);
        }
        search.dfs(&mut visited, *p.last().unwrap(), p.len() - 1);
        // Shorter lengths are shared by many prefixes; keep only this prefix's own subtree.
        for c in search.counts.iter_mut().take(p.len() - 2) {
            *c = 0;
        }
        search.counts
    });
    let mut counts = vec![0u128; n_max];
    for part in &partials {
        for (c, p) in counts.iter_mut().zip(part) {
            *c += p;
        }
    }
    // Lengths shorter than the prefix were counted once per extension.
    for (n, c) in counts.iter_mut().enumerate().take(prefix_len - 1) {
        *c = prefix_count(&prefixes, n + 1);
    }
    for c in counts.iter_mut() {
        *c *= 2 * d as u128;
    }
    Ok(SawCounts { d, counts })
}

fn prefix_count(prefixes: &[Vec<u128>], len: usize) -> u128 {
    let mut seen: FxHashSet<&[u128]> = FxHashSet::default();
    for p in prefixes {
        seen.insert(&p[..=len]);
    }
    seen.len() as u128
}

/// Dual circuits of length `n` around the origin, with the first-moment bound.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CircuitCount {
    pub n: usize,
    pub count: u128,
    /// `n c_{n-1}(2)`
    pub bound: u128,
}

/// Dual vertex labels: label `(x, y)` is the point `(x + 1/2, y + 1/2)`, so
/// the primal origin sits at `(-1/2, -1/2)` in label coordinates.
fn circuits_from(start: (i32, i32), n: usize) -> u128 {
    struct Walk {
        n: usize,
        start: (i32, i32),
        half: i32,
        visited: Vec<bool>,
        side: i32,
        count: u128,
    }
    impl Walk {
        fn cell(&self, p: (i32, i32)) -> Option<usize> {
            let dx = p.0 - self.start.0 + self.half;
            let dy = p.1 - self.start.1;
            if dy < 0 || (dy == 0 && dx < self.half) || dx < 0 || dx >= self.side || dy > self.half {
                return None;
            }
            Some((dy * self.side + dx) as usize)
        }

        // Lower bound on steps still needed on one axis: visit `lo`/`hi`
        // (when not yet reached) and end at `home`.
        fn axis_need(pos: i32, home: i32, lo: Option<i32>, hi: Option<i32>) -> i32 {
            let a = lo.map_or(pos.min(home), |l| l.min(pos).min(home));
            let b = hi.map_or(pos.max(home), |h| h.max(pos).max(home));
            (b - a) + ((pos - a).abs() + (b - home).abs()).min((pos - b).abs() + (a - home).abs())
        }

        fn dfs(&mut self, pos: (i32, i32), len: usize, ext: [i32; 3], crossings: u32) {
            let rem = (self.n - len) as i32;
            let need_x = Self::axis_need(
                pos.0,
                self.start.0,
                (ext[0] > -1).then_some(-1),
                (ext[1] < 0).then_some(0),
            );
            let need_y = Self::axis_need(pos.1, self.start.1, None, (ext[2] < 0).then_some(0));
            if need_x + need_y > rem {
                return;
            }
            for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                let next = (pos.0 + dx, pos.1 + dy);
                // Ray from the origin towards +x crosses the dual edge (x,-1)-(x,0) for x >= 0.
                let cross = u32::from(dx == 0 && pos.0 >= 0 && pos.1.min(next.1) == -1);
                if next == self.start {
                    if len + 1 == self.n && (crossings + cross) % 2 == 1 {
                        self.count += 1;
                    }
                    continue;
                }
                let Some(c) = self.cell(next) else { continue };
                if self.visited[c] || len + 1 >= self.n {
                    continue;
                }
                self.visited[c] = true;
                let ext = [ext[0].min(next.0), ext[1].max(next.0), ext[2].max(next.1)];
                self.dfs(next, len + 1, ext, crossings + cross);
                self.visited[c] = false;
            }
        }
    }
    let half = (n / 2) as i32;
    let side = 2 * half + 1;
    let mut w = Walk {
        n,
        start,
        half,
        visited: vec![false; (side * (half + 1)) as usize],
        side,
        count: 0,
    };
    // Fixed orientation: leave the lowest-leftmost vertex along +x, return from +y.
    let first = (start.0 + 1, start.1);
    let Some(c) = w.cell(first) else { return 0 };
    w.visited[c] = true;
    let ext = [start.0, first.0.max(start.0), start.1];
    w.dfs(first, 1, ext, 0);
    // Orientation is fixed by the first step, but the closing step must come from +y.
    w.count
}

/// Exact number of dual self-avoiding circuits of length `n` that surround
/// the origin, and the bound `n c_{n-1}(2)`.
pub fn count_circuits(n: usize) -> Result<CircuitCount> {
    count_circuits_with(n, crate::budget_from_env(), Execution::Parallel)
}

pub fn count_circuits_with(n: usize, budget: u128, exec: Execution) -> Result<CircuitCount> {
    if n < 4 || n % 2 == 1 {
        return Err(Error::InvalidArgument(format!(
            "circuit length {n} is not an even number >= 4"
        )));
    }
    let saw = count_saw_with(2, n - 1, budget, exec)?;
    let count = circuit_count_only(n, exec);
    let bound = n as u128 * saw.get(n - 1).unwrap();
    debug_assert!(count <= bound);
    Ok(CircuitCount { n, count, bound })
}

fn circuit_count_only(n: usize, exec: Execution) -> u128 {
    let half = (n / 2) as i32;
    // The lowest row must lie below the origin and the box must reach x >= 0 and x <= -1.
    let starts: Vec<(i32, i32)> = (1 - half..=-1)
        .flat_map(|y| (-half..half).map(move |x| (x, y)))
        .filter(|&(x, y)| (x.abs() + (-1 - y).abs()) < half + 1 || x.abs() <= half)
        .collect();
    map_slice(&starts, exec, |&s| circuits_from(s, n)).iter().sum()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeierlsTerm {
    pub n: usize,
    pub circuits: u128,
    /// `n c_{n-1}(2)`
    pub circuit_bound: u128,
    /// `circuits * closed_prob^n`
    pub contribution: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeierlsReport {
    #[serde(serialize_with = "crate::rational::serialize_fraction")]
    pub closed_prob: Rational,
    pub growth_upper: f64,
    pub n_start: usize,
    pub n_exact: usize,
    pub terms: Vec<PeierlsTerm>,
    /// Exact-count partial sum, as a fraction.
    #[serde(serialize_with = "crate::rational::serialize_fraction")]
    pub partial_sum_exact: Rational,
    pub partial_sum: f64,
    /// The same head with `n c_{n-1}(2)` in place of the exact counts.
    pub partial_sum_bound: f64,
    /// `sum_{n > n_exact} n growth^{n-1} closed_prob^n`
    pub tail_bound: f64,
    pub total_bound: f64,
    /// Smallest `m` for which the sum over circuits of length `>= 4m` is below 1.
    pub m_star: usize,
    pub m_star_bound: f64,
}

/// `sum_{n > big_n} n g^{n-1} p^n` in closed form; requires `g p < 1`.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn geometric_tail(p: f64, growth: f64, big_n: usize) -> Result<f64> {
    let x = growth * p;
    if !(x < 1.0) || !(p >= 0.0) {
        return Err(Error::Divergent(format!(
            "growth * closed_prob = {x} >= 1, the circuit sum diverges"
        )));
    }
    let nf = big_n as f64;
    Ok(p * ((nf + 1.0) * x.powi(big_n as i32) - nf * x.powi(big_n as i32 + 1)) / ((1.0 - x) * (1.0 - x)))
}

/// Peierls sum `sum_{n >= n_start} (#circuits of length n) closed_prob^n`,
/// exact through `n_exact` and bounded geometrically beyond.
pub fn peierls_bound(
    closed_prob: &Rational,
    saw: &SawCounts,
    n_start: usize,
    n_exact: usize,
    growth_upper: f64,
) -> Result<PeierlsReport> {
    let p = to_f64(closed_prob);
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("closed_prob = {p} is not a probability")));
    }
    if saw.d != 2 {
        return Err(Error::InvalidArgument("circuit bounds need planar walk counts".into()));
    }
    if n_exact >= 4 && saw.n_max() + 1 < n_exact {
        return Err(Error::InvalidArgument(format!(
            "walk counts reach n = {}, need {}",
            saw.n_max(),
            n_exact - 1
        )));
    }
    // Fail early on divergence, before any enumeration.
    geometric_tail(p, growth_upper, n_exact)?;
    let exact_counts: Vec<(usize, u128)> = (4..=n_exact)
        .step_by(2)
        .map(|n| (n, circuit_count_only(n, Execution::Parallel)))
        .collect();
    let sum_from = |n0: usize| -> Result<f64> {
        let head: f64 = exact_counts
            .iter()
            .filter(|(n, _)| *n >= n0)
            .map(|&(n, c)| c as f64 * p.powi(n as i32))
            .sum();
        Ok(head + geometric_tail(p, growth_upper, n_exact.max(n0.saturating_sub(1)))?)
    };
    let mut terms = Vec::new();
    let mut partial_sum_exact = Rational::from_integer(0.into());
    let mut partial_sum_bound = 0.0;
    for &(n, c) in exact_counts.iter().filter(|(n, _)| *n >= n_start) {
        let bound = n as u128 * saw.get(n - 1).unwrap();
        let exact = pow(closed_prob, n as u32) * Rational::from_integer(c.into());
        partial_sum_bound += bound as f64 * p.powi(n as i32);
        terms.push(PeierlsTerm {
            n,
            circuits: c,
            circuit_bound: bound,
            contribution: to_f64(&exact),
        });
        partial_sum_exact += exact;
    }
    let partial_sum = to_f64(&partial_sum_exact);
    let tail_bound = geometric_tail(p, growth_upper, n_exact.max(n_start.saturating_sub(1)))?;
    let mut m_star = 1;
    let mut m_star_bound = sum_from(4)?;
    while m_star_bound >= 1.0 {
        m_star += 1;
        if m_star > 1_000_000 {
            return Err(Error::Divergent("no m with a Peierls sum below 1".into()));
        }
        m_star_bound = sum_from(4 * m_star)?;
    }
    Ok(PeierlsReport {
        closed_prob: closed_prob.clone(),
        growth_upper,
        n_start,
        n_exact,
        terms,
        partial_sum_exact,
        partial_sum,
        partial_sum_bound,
        tail_bound,
        total_bound: partial_sum + tail_bound,
        m_star,
        m_star_bound,
    })
}
