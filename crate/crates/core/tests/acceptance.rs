//! Acceptance suite. Runs without the libtest harness so that every
//! criterion prints exactly one PASS/FAIL line; exits non-zero on any FAIL.

use std::collections::{BTreeMap, HashSet};
use std::time::{Duration, Instant};

use knperc::bounds::{self, Verdict};
use knperc::coupling::{self, ColumnField};
use knperc::dual::{self, DualGeometry};
use knperc::explorer;
use knperc::lattice::{combine, edge_open_probability, pair_probability, PairRelation};
use knperc::rational::{binomial, from_uints, pow, ratio, to_f64};
use knperc::walk_enum;
use knperc::{saw, ChoiceSet, Direction, Execution, ModelSpec, Rational, Variant, Vertex};
use num_traits::Zero;
use statrs::distribution::{ChiSquared, ContinuousCDF};

const PAR: Execution = Execution::Parallel;

type Outcome = Result<String, String>;
type Fractions = &'static [(i64, i64)];
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(x: f64, target: f64, tol: f64, what: &str) -> Result<(), String> {
    check((x - target).abs() <= tol, format!("{what} = {x:.9}, expected {target} +- {tol:e}"))
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

fn spec(d: usize, k: usize, v: Variant, seed: u64) -> ModelSpec {
    ModelSpec::new(d, k, v, seed).expect("valid model")
}

fn time_limit(start: Instant, limit: Duration) -> Result<(), String> {
    let t = start.elapsed();
    check(t <= limit, format!("took {t:.1?}, limit {limit:?}"))
}

fn tau_fractions() -> Outcome {
    let start = Instant::now();
    let cases: [(usize, usize, Fractions); 3] = [
        (4, 5, &[(3, 512), (279, 65536), (831, 262144)]),
        (5, 5, &[(44, 15625), (712, 390625), (12136, 9765625)]),
        (6, 3, &[(35, 23328)]),
    ];
    for (d, cutoff, want) in cases {
        let tau = walk_enum::enumerate_tau(d, cutoff).map_err(e)?;
        for (i, &(num, den)) in want.iter().enumerate() {
            let got = &tau.values[3 + i];
            check(*got == ratio(num, den), format!("P(tau_{d}={}) = {got}, expected {num}/{den}", 3 + i))?;
        }
    }
    for d in 2..=6usize {
        let tau = walk_enum::enumerate_tau(d, 2).map_err(e)?;
        let di = d as i64;
        let p2 = ratio(1, di.pow(3)) - ratio(1, di.pow(4));
        check(tau.values[0] == ratio(1, di), format!("P(tau_{d}=0) = {}", tau.values[0]))?;
        check(tau.values[1].is_zero(), format!("P(tau_{d}=1) = {}", tau.values[1]))?;
        check(tau.values[2] == p2, format!("P(tau_{d}=2) = {}", tau.values[2]))?;
    }
    time_limit(start, Duration::from_secs(60))?;
    Ok(format!("7 fractions bit-exact, first three terms for d=2..6, {:.1?}", start.elapsed()))
}

fn cdub_table() -> Outcome {
    let want = [(4, 0.693093), (5, 0.394622), (6, 0.268615), (7, 0.199707)];
    for (d, v) in want {
        within(bounds::cdub(d).map_err(e)?, v, 1e-5, &format!("cdub({d})"))?;
    }
    let ks: Vec<Option<usize>> = (4..=7).map(bounds::smallest_k).collect::<Result<_, _>>().map_err(e)?;
    check(ks == [Some(6), Some(4), Some(4), Some(3)], format!("smallest k = {ks:?}"))?;
    Ok("cdub(4..7) within 1e-5, smallest k = 6,4,4,3".into())
}

fn refined_bounds() -> Outcome {
    for (d, cutoff, want, k) in [(4, 5, 0.495542, 4), (5, 5, 0.275703, 3), (6, 3, 0.242338, 3)] {
        let tau = walk_enum::enumerate_tau(d, cutoff).map_err(e)?;
        let r = bounds::refined_rho_bound(d, &tau, cutoff).map_err(e)?;
        within(r.value, want, 1e-5, &format!("refined bound d={d}"))?;
        let threshold = k as f64 / (2 * d) as f64;
        check(r.value < threshold, format!("d={d}: {} >= {threshold}", r.value))?;
        let rep = bounds::bound_report(k, d, Some((&tau, cutoff))).map_err(e)?;
        check(rep.verdict == Verdict::Percolates, format!("(k,d)=({k},{d}) verdict {:?}", rep.verdict))?;
    }
    Ok("0.495542, 0.275703, 0.242338 within 1e-5; each below k/(2d)".into())
}

fn large_d_numerics() -> Outcome {
    let want = [(8, -0.0292277), (9, -0.0350912), (10, -0.0367514), (11, -0.0364418)];
    for (d, v) in want {
        within(bounds::r_margin(3, d).map_err(e)?, v, 1e-5, &format!("R at d={d}"))?;
    }
    let t = bounds::largedmon_check(50).map_err(e)?;
    within(t.growth_constant, 0.385831, 1e-6, "growth constant")?;
    check(t.steps.len() == 39 && t.steps.first().map(|s| s.d) == Some(11), "induction must cover d = 11..=49 -> 50")?;
    for s in &t.steps {
        check(s.new_term_ok, format!("new-term bound fails at d={}", s.d))?;
        check(s.contraction_ok && s.slack_margin_ok, format!("good bound fails at d={}", s.d))?;
    }
    check(t.holds && t.all_negative, "induction does not close")?;
    Ok("R(8..11) within 1e-5, inequalities hold for d=11..50, constant within 1e-6".into())
}

fn dual_probabilities() -> Outcome {
    let start = Instant::now();
    let r = dual::joint_dual_closed(&spec(2, 2, Variant::Undirected, 0), DualGeometry::Orthogonal).map_err(e)?;
    check(r.joint == ratio(1, 24), format!("2-UnG d=2 joint = {}", r.joint))?;
    let r = dual::joint_dual_closed(&spec(3, 3, Variant::Undirected, 0), DualGeometry::Orthogonal).map_err(e)?;
    check(r.joint == ratio(1, 20), format!("3-UnG d=3 joint = {}", r.joint))?;
    let mut cases = 0;
    for d in 2..=3 {
        for k in 1..=2 * d {
            for v in [Variant::Undirected, Variant::Bidirectional, Variant::Xor] {
                for g in DualGeometry::ALL {
                    let r = dual::joint_dual_closed(&spec(d, k, v, 0), g).map_err(e)?;
                    check(r.joint <= r.product, format!("{v} d={d} k={k} {g:?}: {} > {}", r.joint, r.product))?;
                    cases += 1;
                }
            }
        }
    }
    time_limit(start, Duration::from_secs(1))?;
    Ok(format!("1/24 and 1/20 exact; joint <= marginal^2 in {cases} cases, {:.1?}", start.elapsed()))
}

/// Brute-force probabilities over every choice at the endpoints involved.
fn local_enumeration(d: usize, k: usize, v: Variant, dirs: &[Direction]) -> (Rational, Rational) {
    let subsets = ChoiceSet::all_subsets(d, k);
    let n = subsets.len() as i64;
    let open = |cu: ChoiceSet, cv: ChoiceSet, dir: Direction| combine(v, cu.contains(dir), cv.contains(dir.opposite()));
    // Single edge: choices at the base and the head.
    let mut single = 0i64;
    for a in &subsets {
        for b in &subsets {
            single += open(*a, *b, dirs[0]) as i64;
        }
    }
    // Two edges from a common vertex to distinct heads.
    let mut both = 0i64;
    for c in &subsets {
        for h0 in &subsets {
            for h1 in &subsets {
                both += (open(*c, *h0, dirs[0]) && open(*c, *h1, dirs[1])) as i64;
            }
        }
    }
    (ratio(single, n * n), ratio(both, n * n * n))
}

fn closed_form_suite() -> Outcome {
    let start = Instant::now();
    let mut cases = 0;
    for d in 1..=3usize {
        for k in 1..=2 * d {
            for v in [Variant::Directed, Variant::Undirected, Variant::Bidirectional, Variant::Xor] {
                let s = spec(d, k, v, 0);
                let pairs: Vec<[Direction; 2]> = if d >= 2 {
                    vec![
                        [Direction::positive(0), Direction::positive(1)],
                        [Direction::positive(0), Direction::negative(0)],
                        [Direction::negative(1), Direction::positive(0)],
                    ]
                } else {
                    vec![[Direction::positive(0), Direction::negative(0)]]
                };
                for dirs in pairs {
                    let (single, both) = local_enumeration(d, k, v, &dirs);
                    let p = edge_open_probability(&s);
                    check(p == single, format!("{v} d={d} k={k}: edge {p} vs {single}"))?;
                    let pp = pair_probability(&s, PairRelation::Adjacent).map_err(e)?;
                    check(pp.joint == both, format!("{v} d={d} k={k} {dirs:?}: pair {} vs {both}", pp.joint))?;
                    let dj = pair_probability(&s, PairRelation::Disjoint).map_err(e)?;
                    check(dj.joint == &single * &single, format!("{v} d={d} k={k}: disjoint pair"))?;
                    if v == Variant::Directed {
                        let ss = pair_probability(&s, PairRelation::SameSource).map_err(e)?;
                        check(ss.joint == both, format!("d={d} k={k}: same-source pair"))?;
                    }
                    cases += 1;
                }
            }
        }
    }
    time_limit(start, Duration::from_secs(10))?;
    Ok(format!("{cases} (variant, d, k, geometry) cases exact, {:.1?}", start.elapsed()))
}

fn hypergeometric_and_moments() -> Outcome {
    for d in 1..=8u64 {
        for k in 1..=d {
            let total = binomial(2 * d, k);
            let sum = (0..=k).fold(Rational::zero(), |acc, l| {
                acc + ratio(l as i64, 1) * from_uints(&(binomial(d, l) * binomial(d, k - l)), &total)
            });
            check(sum == ratio(k as i64, 2), format!("identity fails at k={k} d={d}: {sum}"))?;
            check(walk_enum::hypergeometric_mean(k as usize, d as usize) == sum, format!("library mean k={k} d={d}"))?;
        }
    }
    for d in 1..=4usize {
        for k in 1..=d {
            for n in 0..=6usize {
                let got = walk_enum::expected_open_paths(k, d, n).map_err(e)?;
                let want = pow(&ratio(k as i64, 2), n as u32);
                check(got == want, format!("E[N_{n}] at k={k} d={d}: {got} vs {want}"))?;
            }
        }
    }
    let mut worst: f64 = 0.0;
    for n in 2..=4 {
        let exact = to_f64(&walk_enum::second_moment_exact(2, 2, n).map_err(e)?);
        let mc = walk_enum::mc_path_count(2, 2, n, 100_000, 20 + n as u64, PAR).map_err(e)?;
        let z = (mc.mean_square - exact).abs() / mc.mean_square_stderr;
        worst = worst.max(z);
        check(z <= 4.0, format!("n={n}: MC {} vs exact {exact}, {z:.2} sigma", mc.mean_square))?;
    }
    Ok(format!("identity for k<=d<=8, E[N_n]=(k/2)^n, MC second moment within {worst:.2} sigma"))
}

fn growth_property() -> Outcome {
    let mut runs = 0;
    for (k, d) in [(2, 1), (3, 2), (4, 3)] {
        let s = spec(d, k, Variant::Directed, 0);
        for seed in 0..100 {
            let t = explorer::growth_trace(&s, 50, seed).map_err(e)?;
            check(t.maxima.len() >= 50, format!("(k,d)=({k},{d}) seed {seed}: {} generations", t.maxima.len()))?;
            check(t.strictly_increasing(), format!("(k,d)=({k},{d}) seed {seed}: violations {:?}", t.violations))?;
            runs += 1;
        }
    }
    Ok(format!("{runs} runs x 50 generations, zero violations"))
}

fn uniform_chi_square(k: usize, d: usize, samples: u64) -> Result<f64, String> {
    let mut counts: BTreeMap<u32, u64> = BTreeMap::new();
    for s in 0..samples {
        let mut col = ColumnField::new(k, d, s).map_err(e)?;
        let x = Vertex::from_coords(&vec![(s % 7) as i32; d]);
        let c = coupling::derive_choice(&mut col, &x, 0).map_err(e)?.choice();
        *counts.entry(c.mask()).or_insert(0) += 1;
    }
    let cells = ChoiceSet::all_subsets(d, k);
    check(counts.keys().all(|m| cells.iter().any(|c| c.mask() == *m)), "derived choice outside the k-subsets")?;
    let expect = samples as f64 / cells.len() as f64;
    let stat: f64 = cells
        .iter()
        .map(|c| {
            let o = *counts.get(&c.mask()).unwrap_or(&0) as f64;
            (o - expect).powi(2) / expect
        })
        .sum();
    let dist = ChiSquared::new((cells.len() - 1) as f64).map_err(e)?;
    Ok(1.0 - dist.cdf(stat))
}

fn pathwise_couplings() -> Outcome {
    let mut mono = 0;
    for v in [Variant::Directed, Variant::Undirected, Variant::Bidirectional] {
        for k in 1..=3 {
            let r = coupling::k_monotonicity(&spec(2, k, v, 31), 20, 10_000, PAR).map_err(e)?;
            check(r.violations == 0, format!("{v} k={k}: {} monotonicity violations", r.violations))?;
            mono += 1;
        }
    }
    let c = coupling::estimate_coupled(2, 2, 20, 1000, 5, PAR).map_err(e)?;
    check(c.violations == 0, format!("{} domination violations", c.violations))?;
    let reached = (c.derived.point * 1000.0).round() as u64;
    check(c.certificates == reached, format!("{} certificates for {reached} crossings", c.certificates))?;
    let mut pvals = Vec::new();
    for (k, d) in [(1, 1), (2, 2), (2, 3)] {
        let p = uniform_chi_square(k, d, 1_000_000)?;
        check(p > 1e-3, format!("chi-square rejects (k,d)=({k},{d}): p = {p:.2e}"))?;
        pvals.push(format!("{p:.3}"));
    }
    Ok(format!(
        "{mono}x10^4 monotone trials, {} valid certificates of 1000, chi-square p = {}",
        c.certificates,
        pvals.join("/")
    ))
}

fn mass_transport() -> Outcome {
    let r = explorer::mass_transport_check(&spec(2, 2, Variant::Directed, 17), 11, 20_000, PAR).map_err(e)?;
    check(
        r.difference.abs() <= 5.0 * r.combined_stderr,
        format!("|{:.3} - {:.3}| > 5 x {:.3}", r.out_component.mean, r.in_component.mean, r.combined_stderr),
    )?;
    Ok(format!(
        "out {:.2}, in {:.2}, |diff| {:.3} <= 5 x {:.3}",
        r.out_component.mean,
        r.in_component.mean,
        r.difference.abs(),
        r.combined_stderr
    ))
}

/// Plain recursive count of planar self-avoiding walks.
fn saw_oracle(n_max: usize) -> Vec<u64> {
    fn walk(pos: (i32, i32), left: usize, len: usize, seen: &mut HashSet<(i32, i32)>, out: &mut [u64]) {
        if len > 0 {
            out[len - 1] += 1;
        }
        if left == 0 {
            return;
        }
        for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
            let next = (pos.0 + dx, pos.1 + dy);
            if seen.insert(next) {
                walk(next, left - 1, len + 1, seen, out);
                seen.remove(&next);
            }
        }
    }
    let mut out = vec![0; n_max];
    let mut seen = HashSet::from([(0, 0)]);
    walk((0, 0), n_max, 0, &mut seen, &mut out);
    out
}

fn saw_peierls() -> Outcome {
    let counts = saw::count_saw(2, 12).map_err(e)?;
    let oracle = saw_oracle(12);
    let got: Vec<u64> = counts.counts.iter().map(|&c| c as u64).collect();
    check(got == oracle, format!("c_n(2) = {got:?}, oracle {oracle:?}"))?;
    let c4 = saw::count_circuits(4).map_err(e)?;
    check(c4.count == 1, format!("circuits(4) = {}", c4.count))?;
    let walks = saw::count_saw(2, 11).map_err(e)?;
    let p = saw::peierls_bound(&ratio(1, 4), &walks, 4, 12, 3.0).map_err(e)?;
    check(p.total_bound.is_finite(), "Peierls sum not finite")?;
    check(p.m_star_bound < 1.0, format!("m* = {} has bound {}", p.m_star, p.m_star_bound))?;
    Ok(format!("c_1..12(2) match oracle (c_12 = {}), circuits(4) = 1, m* = {} with bound {:.4}", oracle[11], p.m_star, p.m_star_bound))
}

fn simulation_trends() -> Outcome {
    let start = Instant::now();
    let trials = 10_000;
    let ung = explorer::estimate_boundary_reach(&spec(2, 2, Variant::Undirected, 101), 50, trials, PAR).map_err(e)?;
    check(ung.lower(5.0) > 0.1, format!("(2,2,UnG) n=50: {} - 5 x {}", ung.point, ung.stderr))?;
    let bng = explorer::estimate_boundary_reach(&spec(2, 2, Variant::Bidirectional, 102), 30, trials, PAR).map_err(e)?;
    check(bng.upper(5.0) < 0.05, format!("(2,2,BnG) n=30: {} + 5 x {}", bng.point, bng.stderr))?;
    let mut ones = Vec::new();
    for d in [2, 3] {
        for v in [Variant::Undirected, Variant::Directed] {
            let r = explorer::estimate_boundary_reach(&spec(d, 1, v, 103), 10, trials, PAR).map_err(e)?;
            check(r.point < 0.01, format!("(1,{d},{v}) n=10: {}", r.point))?;
            ones.push(format!("{:.4}", r.point));
        }
    }
    time_limit(start, Duration::from_secs(300))?;
    Ok(format!(
        "UnG {:.4}, BnG {:.4}, k=1 {}, {:.1?}",
        ung.point,
        bng.point,
        ones.join("/"),
        start.elapsed()
    ))
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("exact tau fractions", tau_fractions),
        ("cdub table and smallest k", cdub_table),
        ("refined bounds", refined_bounds),
        ("large-d induction numerics", large_d_numerics),
        ("dual probabilities", dual_probabilities),
        ("closed-form probability suite", closed_form_suite),
        ("hypergeometric identity and moments", hypergeometric_and_moments),
        ("growth property", growth_property),
        ("pathwise couplings", pathwise_couplings),
        ("mass-transport balance", mass_transport),
        ("self-avoiding walks and Peierls", saw_peierls),
        ("simulation trends", simulation_trends),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail} [{:.1?}]", start.elapsed()),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why} [{:.1?}]", start.elapsed());
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 12 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
