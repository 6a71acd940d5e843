//! Exact enumeration behind the second-moment (oriented percolation) criterion.
//!
//! Two independent monotone walks start at the origin and at each step add a
//! uniformly chosen unit vector `e_i`, `i < d`. `tau_d` is the first time `m`
//! at which they sit on the same site and then take the same step. Its law is
//! enumerated exactly through the difference process of the two walks.

use std::collections::BTreeMap;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Zero};
use rustc_hash::FxHashMap;
use serde::Serialize;
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::exec::{map_indexed, map_slice, Execution};
use crate::lattice::{ChoiceField, Direction, Vertex};
use crate::rational::{binomial, from_uints, pow, ratio, Rational};
use crate::rng::derive_seed;

type Diff = SmallVec<[i8; 16]>;

/// Exact `P(tau_d = l)` for `0 <= l <= cutoff`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TauPmf {
    pub d: usize,
    #[serde(serialize_with = "crate::rational::serialize_fractions")]
    pub values: Vec<Rational>,
}

impl TauPmf {
    pub fn cutoff(&self) -> usize {
        self.values.len() - 1
    }

    pub fn get(&self, l: usize) -> Option<&Rational> {
        self.values.get(l)
    }

    /// `P(tau_d <= cutoff)`.
    pub fn partial_sum(&self) -> Rational {
        self.values.iter().fold(Rational::zero(), |a, b| a + b)
    }
}

/// How difference vectors are keyed during the enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TauMethod {
    /// One state per difference vector.
    Naive,
    /// One state per coordinate-permutation class (sorted difference vector).
    Symmetric,
}

pub fn enumerate_tau(d: usize, cutoff: usize) -> Result<TauPmf> {
    enumerate_tau_with(d, cutoff, TauMethod::Symmetric, crate::budget_from_env(), Execution::Parallel)
}

pub fn enumerate_tau_with(
    d: usize,
    cutoff: usize,
    method: TauMethod,
    budget: u128,
    exec: Execution,
) -> Result<TauPmf> {
    if !(2..=16).contains(&d) {
        return Err(Error::InvalidArgument(format!("tau enumeration needs 2 <= d <= 16, got {d}")));
    }
    if cutoff > 60 || (2.0 * (cutoff as f64 + 1.0)) * (d as f64).log2() > 120.0 {
        return Err(Error::Budget {
            what: "tau enumeration (trajectory-pair counts overflow u128)",
            needed: u128::MAX,
            budget,
        });
    }
    let canon = |mut v: Diff| -> Diff {
        if method == TauMethod::Symmetric {
            v.sort_unstable();
        }
        v
    };
    let zero: Diff = SmallVec::from_elem(0, d);
    let d128 = d as u128;
    let mut values = Vec::with_capacity(cutoff + 1);
    let mut states: Vec<(Diff, u128)> = vec![(zero.clone(), 1)];

    for m in 0..=cutoff {
        // Pairs with equal next steps out of the zero state end the walk at m.
        let at_zero = states.iter().find(|(v, _)| *v == zero).map_or(0, |(_, c)| *c);
        let den = BigUint::from(d).pow(2 * (m as u32 + 1));
        values.push(from_uints(&(BigUint::from(at_zero) * d), &den));
        if m == cutoff {
            break;
        }
        let work = states.len() as u128 * d128 * d128;
        if work > budget {
            return Err(Error::Budget {
                what: "tau enumeration",
                needed: work,
                budget,
            });
        }
        // A state must still be able to return to zero by `cutoff`.
        let reach = 2 * (cutoff - m - 1) as i32;
        let chunk = 4096.max(states.len() / 64 + 1);
        let chunks: Vec<&[(Diff, u128)]> = states.chunks(chunk).collect();
        let partial = map_slice(&chunks, exec, |chunk| {
            let mut next: FxHashMap<Diff, u128> = FxHashMap::default();
            for (v, c) in chunk.iter() {
                let is_zero = *v == zero;
                let norm: i32 = v.iter().map(|x| (*x as i32).abs()).sum();
                for i in 0..d {
                    for j in 0..d {
                        if i == j {
                            if is_zero {
                                continue;
                            }
                            if norm <= reach {
                                *next.entry(canon(v.clone())).or_insert(0) += c;
                            }
                            continue;
                        }
                        let mut w = v.clone();
                        w[i] += 1;
                        w[j] -= 1;
                        let wn = norm - (v[i] as i32).abs() - (v[j] as i32).abs()
                            + (w[i] as i32).abs()
                            + (w[j] as i32).abs();
                        if wn <= reach {
                            *next.entry(canon(w)).or_insert(0) += c;
                        }
                    }
                }
            }
            next
        });
        let mut merged: FxHashMap<Diff, u128> = FxHashMap::default();
        for part in partial {
            for (k, c) in part {
                *merged.entry(k).or_insert(0) += c;
            }
        }
        states = merged.into_iter().collect();
        states.sort_unstable_by(|a, b| a.0.cmp(&b.0));
    }
    Ok(TauPmf { d, values })
}

/// `sum_l l C(d,l) C(d,k-l) / C(2d,k)`, the mean number of
/// distance-increasing choices among `k`.
pub fn hypergeometric_mean(k: usize, d: usize) -> Rational {
    let (k64, d64) = (k as u64, d as u64);
    let num = (0..=k64).fold(BigUint::zero(), |acc, l| {
        acc + BigUint::from(l) * binomial(d64, l) * binomial(d64, k64 - l)
    });
    from_uints(&num, &binomial(2 * d64, k64))
}

fn check_monotone_regime(k: usize, d: usize) -> Result<()> {
    if d == 0 || k == 0 || k > d {
        return Err(Error::InvalidArgument(format!(
            "monotone-path moments need 1 <= k <= d, got k = {k}, d = {d}"
        )));
    }
    Ok(())
}

/// Number of monotone paths from the origin to level `n`, counted site by site.
pub fn monotone_path_count(d: usize, n: usize, budget: u128) -> Result<BigUint> {
    let mut level: FxHashMap<Diff, BigUint> = FxHashMap::default();
    level.insert(SmallVec::from_elem(0, d), BigUint::one());
    for _ in 0..n {
        if (level.len() as u128) * d as u128 > budget {
            return Err(Error::Budget {
                what: "monotone path count",
                needed: level.len() as u128 * d as u128,
                budget,
            });
        }
        let mut next: FxHashMap<Diff, BigUint> = FxHashMap::default();
        for (v, c) in &level {
            for i in 0..d {
                let mut w = v.clone();
                w[i] = w[i].checked_add(1).ok_or_else(|| {
                    Error::InvalidArgument("path level too large for the site encoding".into())
                })?;
                *next.entry(w).or_insert_with(BigUint::zero) += c;
            }
        }
        level = next;
    }
    Ok(level.into_values().fold(BigUint::zero(), |a, b| a + b))
}

/// `E[N_n]` for the k-DnG, by the martingale closed form `(k/2)^n` and by
/// counting monotone paths times `(k/2d)^n`. The two must agree exactly.
pub fn expected_open_paths(k: usize, d: usize, n: usize) -> Result<Rational> {
    check_monotone_regime(k, d)?;
    let closed = pow(&ratio(k as i64, 2), n as u32);
    let paths = monotone_path_count(d, n, crate::budget_from_env())?;
    let counted = Rational::from_integer(BigInt::from(paths)) * pow(&ratio(k as i64, 2 * d as i64), n as u32);
    if closed != counted {
        return Err(Error::CrossCheck(format!(
            "E[N_{n}] closed form {closed} != path count route {counted}"
        )));
    }
    Ok(closed)
}

/// Joint table over `(K, L)` for all ordered pairs of monotone paths of length `n`.
///
/// `K` counts shared edges; `L` counts shared sites where the two paths
/// leave along different edges.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathPairStats {
    pub d: usize,
    pub n: usize,
    pub table: BTreeMap<(u32, u32), u128>,
}

impl PathPairStats {
    pub fn total(&self) -> u128 {
        self.table.values().sum()
    }
}

pub fn path_pair_stats(d: usize, n: usize, budget: u128) -> Result<PathPairStats> {
    if d == 0 || d > 16 || n > 60 || (2.0 * n as f64) * (d as f64).log2() > 120.0 {
        return Err(Error::Budget {
            what: "path pair enumeration",
            needed: u128::MAX,
            budget,
        });
    }
    // State: difference of the two paths' positions plus running (K, L).
    let mut states: FxHashMap<(Diff, u32, u32), u128> = FxHashMap::default();
    states.insert((SmallVec::from_elem(0, d), 0, 0), 1);
    for _ in 0..n {
        let work = states.len() as u128 * (d * d) as u128;
        if work > budget {
            return Err(Error::Budget {
                what: "path pair enumeration",
                needed: work,
                budget,
            });
        }
        let mut next: FxHashMap<(Diff, u32, u32), u128> = FxHashMap::default();
        for ((v, kk, ll), c) in &states {
            let together = v.iter().all(|x| *x == 0);
            for i in 0..d {
                for j in 0..d {
                    let mut w = v.clone();
                    w[i] += 1;
                    w[j] -= 1;
                    let (nk, nl) = match (together, i == j) {
                        (true, true) => (kk + 1, *ll),
                        (true, false) => (*kk, ll + 1),
                        _ => (*kk, *ll),
                    };
                    *next.entry((w, nk, nl)).or_insert(0) += c;
                }
            }
        }
        states = next;
    }
    let mut table = BTreeMap::new();
    for ((_, kk, ll), c) in states {
        *table.entry((kk, ll)).or_insert(0) += c;
    }
    Ok(PathPairStats { d, n, table })
}

/// `p = k/(2d)` and `q = k(k-1)/(2d(2d-1))`.
pub fn edge_and_fork_probabilities(k: usize, d: usize) -> (Rational, Rational) {
    let (k, d) = (k as i64, d as i64);
    (ratio(k, 2 * d), ratio(k * (k - 1), 2 * d * (2 * d - 1)))
}

/// Exact `E[N_n^2] = sum_{s,t} p^K q^L p^{2(n-K-L)}`.
pub fn second_moment_exact(k: usize, d: usize, n: usize) -> Result<Rational> {
    check_monotone_regime(k, d)?;
    let stats = path_pair_stats(d, n, crate::budget_from_env())?;
    Ok(second_moment_from_stats(k, &stats))
}

pub fn second_moment_from_stats(k: usize, stats: &PathPairStats) -> Rational {
    let (p, q) = edge_and_fork_probabilities(k, stats.d);
    let n = stats.n as u32;
    stats.table.iter().fold(Rational::zero(), |acc, (&(kk, ll), &c)| {
        let term = pow(&p, kk) * pow(&q, ll) * pow(&p, 2 * (n - kk - ll));
        acc + term * Rational::from_integer(BigInt::from(c))
    })
}

/// Sample moments of the open monotone path count `N_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathCountMoments {
    pub trials: u64,
    pub mean: f64,
    pub mean_stderr: f64,
    pub mean_square: f64,
    pub mean_square_stderr: f64,
}

/// Number of open monotone paths from the origin to level `n` in one sample.
pub fn open_path_count(field: &mut ChoiceField, n: usize) -> u128 {
    let d = field.d();
    let mut level: FxHashMap<Vertex, u128> = FxHashMap::default();
    level.insert(Vertex::origin(d), 1);
    for _ in 0..n {
        let mut next: FxHashMap<Vertex, u128> = FxHashMap::default();
        let mut sites: Vec<(Vertex, u128)> = level.into_iter().collect();
        sites.sort_unstable();
        for (v, c) in sites {
            let choice = field.choice(&v);
            for axis in 0..d {
                let dir = Direction::positive(axis);
                if choice.contains(dir) {
                    *next.entry(v.step(dir)).or_insert(0) += c;
                }
            }
        }
        level = next;
    }
    level.values().sum()
}

pub fn mc_path_count(k: usize, d: usize, n: usize, trials: u64, seed: u64, exec: Execution) -> Result<PathCountMoments> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be >= 1".into()));
    }
    crate::lattice::ModelSpec::new(d, k, crate::lattice::Variant::Directed, seed)?;
    let samples = map_indexed(trials, exec, |t| {
        let mut field = ChoiceField::new(d, k, derive_seed(seed, t));
        open_path_count(&mut field, n) as f64
    });
    let (mean, mean_stderr) = mean_and_stderr(samples.iter().copied());
    let (mean_square, mean_square_stderr) = mean_and_stderr(samples.iter().map(|x| x * x));
    Ok(PathCountMoments {
        trials,
        mean,
        mean_stderr,
        mean_square,
        mean_square_stderr,
    })
}

pub(crate) fn mean_and_stderr(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count() as f64;
    let mean = xs.clone().sum::<f64>() / n;
    if n < 2.0 {
        return (mean, 0.0);
    }
    let var = xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
