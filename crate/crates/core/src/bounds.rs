//! Closed-form percolation criteria.
//!
//! The directed criterion compares `rho(d) = P(tau_d < inf)` with `k/(2d)`.
//! `rho(d)` is bounded above by
//!
//! ```text
//! U(d) = 1/d + d^-3 - d^-4 + sum_{l=3}^{d} d^-l l! + sqrt(2 pi d) (e^{-1/13}/sqrt(2 pi))^d zeta((d-1)/2)
//! ```
//!
//! and the refined bound replaces the head of that sum with exact values of
//! `P(tau_d = l)`. The bidirectional criteria compare edge probabilities with
//! the connective constant.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::rational::{ratio, to_f64, to_fraction_string, Rational};
use crate::walk_enum::TauPmf;

/// Published upper bound on the connective constant of Z^2.
pub const C2_UPPER: f64 = 2.679192495;
/// Limit of `p_sup(Z^d)` for 1-dependent bond percolation, as `d -> inf`.
pub const ONE_DEP_PSUP_LIMIT: f64 = 0.5847;
/// `p_sup(Z^2)` for 1-dependent bond percolation.
pub const ONE_DEP_PSUP_Z2: f64 = 0.8457;

const ZETA_TOL: f64 = 1e-13;

// B_2, B_4, ..., B_30.
const BERNOULLI_EVEN: [f64; 15] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
    854513.0 / 138.0,
    -236364091.0 / 2730.0,
    8553103.0 / 6.0,
    -23749461029.0 / 870.0,
    8615841276005.0 / 14322.0,
];

#[allow(clippy::neg_cmp_op_on_partial_ord)] // rejects NaN too
/// Riemann zeta on the real axis, `s > 1`, with absolute error at most `tol`.
///
/// Direct summation up to `N`, then the Euler-Maclaurin tail. For real `s`
/// the remainder is bounded by the first omitted correction term, and the
/// loop only stops once that term is below `tol`.
pub fn zeta(s: f64, tol: f64) -> Result<f64> {
    if !(s > 1.0) || !s.is_finite() {
        return Err(Error::InvalidArgument(format!("zeta({s}) diverges; need s > 1")));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("zeta tolerance must be positive".into()));
    }
    let mut n = 16usize;
    loop {
        if let Some(v) = zeta_euler_maclaurin(s, n, tol) {
            return Ok(v);
        }
        n *= 2;
        if n > 1 << 22 {
            return Err(Error::InvalidArgument(format!("zeta({s}) cannot reach tolerance {tol}")));
        }
    }
}

fn zeta_euler_maclaurin(s: f64, n: usize, tol: f64) -> Option<f64> {
    let nf = n as f64;
    // Small terms first.
    let head: f64 = (1..n).rev().map(|j| (j as f64).powf(-s)).sum();
    let mut sum = head + nf.powf(1.0 - s) / (s - 1.0) + 0.5 * nf.powf(-s);
    // term_m = B_2m / (2m)! * s(s+1)...(s+2m-2) * n^(-s-2m+1)
    let mut rising = s;
    let mut fact = 2.0;
    let mut power = nf.powf(-s - 1.0);
    for (m, b) in BERNOULLI_EVEN.iter().enumerate() {
        let term = b / fact * rising * power;
        if term.abs() <= tol * 0.5 {
            return Some(sum);
        }
        if m + 1 == BERNOULLI_EVEN.len() {
            break;
        }
        sum += term;
        let k = 2.0 * (m as f64 + 1.0);
        rising *= (s + k - 1.0) * (s + k);
        fact *= (k + 1.0) * (k + 2.0);
        power /= nf * nf;
    }
    None
}

/// `sqrt(2 pi d) (e^{-1/13}/sqrt(2 pi))^d`, the prefactor of the zeta tail.
pub fn tail_prefactor(d: usize) -> f64 {
    let c = (-1.0f64 / 13.0).exp() / (2.0 * PI).sqrt();
    (2.0 * PI * d as f64).sqrt() * c.powi(d as i32)
}

/// `d^-l l!` computed as a product of ratios.
pub fn factorial_term(d: usize, l: usize) -> f64 {
    (1..=l).map(|i| i as f64 / d as f64).product()
}

/// One summand of a bound, kept for auditing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Term {
    pub label: String,
    pub value: f64,
    /// Exact value as `"num/den"` when the summand is rational.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact: Option<String>,
}

impl Term {
    fn float(label: impl Into<String>, value: f64) -> Self {
        Self {
            label: label.into(),
            value,
            exact: None,
        }
    }

    fn exact(label: impl Into<String>, r: &Rational) -> Self {
        Self {
            label: label.into(),
            value: to_f64(r),
            exact: Some(to_fraction_string(r)),
        }
    }
}

fn check_cdub_dim(d: usize) -> Result<()> {
    if d < 4 {
        return Err(Error::InvalidArgument(format!(
            "the zeta tail zeta((d-1)/2) diverges for d = {d}; need d >= 4"
        )));
    }
    if d > 170 {
        return Err(Error::InvalidArgument(format!("d = {d} is out of range")));
    }
    Ok(())
}

/// Itemized summands of `U(d)`.
pub fn cdub_terms(d: usize) -> Result<Vec<Term>> {
    check_cdub_dim(d)?;
    let di = d as i64;
    let zeta_arg = (d as f64 - 1.0) / 2.0;
    let mut terms = vec![
        Term::exact("P(tau=0) = 1/d", &ratio(1, di)),
        Term::exact("P(tau=2) = d^-3 - d^-4", &(ratio(1, di.pow(3)) - ratio(1, di.pow(4)))),
    ];
    for l in 3..=d {
        terms.push(Term::float(format!("d^-{l} {l}!"), factorial_term(d, l)));
    }
    terms.push(Term::float(
        format!("sqrt(2 pi d) (e^(-1/13)/sqrt(2 pi))^d zeta({zeta_arg})"),
        tail_prefactor(d) * zeta(zeta_arg, ZETA_TOL)?,
    ));
    Ok(terms)
}

/// `U(d)`, the closed-form upper bound on `rho(d)`.
pub fn cdub(d: usize) -> Result<f64> {
    Ok(cdub_terms(d)?.iter().map(|t| t.value).sum())
}

/// `R(k, d) = U(d) - k/(2d)`; negative means the criterion certifies percolation.
pub fn r_margin(k: usize, d: usize) -> Result<f64> {
    Ok(cdub(d)? - k as f64 / (2.0 * d as f64))
}

/// Smallest `k` with `U(d) < k/(2d)`, if any `k <= 2d` works.
pub fn smallest_k(d: usize) -> Result<Option<usize>> {
    let u = cdub(d)?;
    Ok((1..=2 * d).find(|&k| u < k as f64 / (2.0 * d as f64)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefinedBound {
    pub d: usize,
    pub cutoff: usize,
    /// `P(tau_d <= cutoff)`, exact.
    #[serde(serialize_with = "crate::rational::serialize_fraction")]
    pub head: Rational,
    pub terms: Vec<Term>,
    pub value: f64,
}

/// Upper bound on `rho(d)` from exact `P(tau_d = l)`, `l <= cutoff`, plus
/// the analytic bounds for every larger `l`.
///
/// For `cutoff < l <= d` the factorial bound is used. Beyond `d`, block `j`
/// collects `jd < l <= (j+1)d`; each such `l` contributes at most
/// `d^-1 A j^{-(d-1)/2}`, so a block that is only partly covered by the exact
/// head contributes the matching fraction of `A j^{-(d-1)/2}`.
pub fn refined_rho_bound(d: usize, tau: &TauPmf, cutoff: usize) -> Result<RefinedBound> {
    check_cdub_dim(d)?;
    if cutoff < 2 {
        return Err(Error::InvalidArgument(format!("cutoff {cutoff} < 2")));
    }
    if tau.d != d {
        return Err(Error::InvalidArgument(format!("tau law is for d = {}, not {d}", tau.d)));
    }
    if tau.cutoff() < cutoff {
        return Err(Error::InvalidArgument(format!(
            "tau law only known up to {}, cutoff is {cutoff}",
            tau.cutoff()
        )));
    }
    let mut terms = Vec::new();
    let mut head = Rational::from_integer(0.into());
    for l in 0..=cutoff {
        let p = &tau.values[l];
        head += p;
        terms.push(Term::exact(format!("P(tau={l})"), p));
    }
    for l in cutoff + 1..=d {
        terms.push(Term::float(format!("d^-{l} {l}!"), factorial_term(d, l)));
    }
    let a = tail_prefactor(d);
    let s = (d as f64 - 1.0) / 2.0;
    let first_full = cutoff.div_ceil(d).max(1);
    let mut covered = 0.0;
    for j in 1..first_full {
        let lo = (j * d).max(cutoff);
        let remaining = (j + 1) * d - lo.min((j + 1) * d);
        let jf = j as f64;
        covered += jf.powf(-s);
        if remaining > 0 {
            terms.push(Term::float(
                format!("{remaining}/{d} A(d) * {j}^-{s}"),
                remaining as f64 / d as f64 * a * jf.powf(-s),
            ));
        }
    }
    let z = zeta(s, ZETA_TOL)?;
    terms.push(Term::float(
        format!("A(d) * sum_(j>={first_full}) j^-{s}"),
        a * (z - covered),
    ));
    let value = terms.iter().map(|t| t.value).sum();
    Ok(RefinedBound {
        d,
        cutoff,
        head,
        terms,
        value,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Percolates,
    NoPercolation,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub d: usize,
    pub k: usize,
    pub cdub_value: f64,
    pub refined_value: Option<f64>,
    pub threshold: f64,
    pub verdict: Verdict,
    pub terms: Vec<Term>,
}

/// Directed second-moment criterion for `(k, d)`, optionally sharpened by an
/// exact head of the tau law.
pub fn bound_report(k: usize, d: usize, refined: Option<(&TauPmf, usize)>) -> Result<BoundReport> {
    let terms = cdub_terms(d)?;
    let cdub_value = terms.iter().map(|t| t.value).sum();
    let (refined_value, terms) = match refined {
        Some((tau, cutoff)) => {
            let r = refined_rho_bound(d, tau, cutoff)?;
            (Some(r.value), r.terms)
        }
        None => (None, terms),
    };
    let threshold = k as f64 / (2.0 * d as f64);
    let best = refined_value.unwrap_or(cdub_value);
    Ok(BoundReport {
        d,
        k,
        cdub_value,
        refined_value,
        threshold,
        verdict: if best < threshold {
            Verdict::Percolates
        } else {
            Verdict::Inconclusive
        },
        terms,
    })
}

/// Per-dimension checks of the induction that extends `R(3, d) < 0` to all `d`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InductionStep {
    pub d: usize,
    /// `(d+1)^-(d+1) (d+1)!`
    pub new_term: f64,
    /// `d/(d+1) (d^-3 - d^-4) - ((d+1)^-3 - (d+1)^-4)`
    pub slack: f64,
    pub new_term_ok: bool,
    pub r_d: f64,
    pub r_next: f64,
    /// `R(3, d+1) <= d/(d+1) R(3, d)`
    pub contraction_ok: bool,
    /// `12!/(12^8 (d+1)^4) < 1.115/(d+1)^4`
    pub factorial_constant_ok: bool,
    /// The slack equals `(2d^3 - 2d - 1)/(d^3 (d+1)^4)`, checked in exact arithmetic.
    pub slack_identity_ok: bool,
    /// `(2d^3 - 2d - 1)/(d^3 (d+1)^4) > 1.99/(d+1)^4`. False for `d <= 14`;
    /// the induction does not need it.
    pub slack_constant_ok: bool,
    /// `slack > 1.115/(d+1)^4`, which is what closes the induction step.
    pub slack_margin_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InductionTrace {
    pub d_max: usize,
    /// `sqrt(12/11) e^{-1/13}/sqrt(2 pi)`, which must stay below `11/12`.
    pub growth_constant: f64,
    pub growth_constant_ok: bool,
    /// `(d, R(3, d))` for `7 <= d <= 11`, evaluated directly.
    pub base: Vec<(usize, f64)>,
    pub steps: Vec<InductionStep>,
    /// `R(3, d) < 0` for every `7 <= d <= d_max`, evaluated directly.
    pub all_negative: bool,
    pub holds: bool,
}

pub fn largedmon_check(d_max: usize) -> Result<InductionTrace> {
    if d_max < 11 {
        return Err(Error::InvalidArgument(format!("d_max = {d_max} < 11")));
    }
    let growth_constant = (12.0f64 / 11.0).sqrt() * (-1.0f64 / 13.0).exp() / (2.0 * PI).sqrt();
    let growth_constant_ok = growth_constant < 11.0 / 12.0;
    let base = (7..=11)
        .map(|d| Ok((d, r_margin(3, d)?)))
        .collect::<Result<Vec<_>>>()?;
    let twelve_fact_over: f64 = factorial_term(12, 12) * 12f64.powi(4); // 12!/12^8
    let mut steps = Vec::new();
    for d in 11..d_max {
        let df = d as f64;
        let new_term = factorial_term(d + 1, d + 1);
        let slack = df / (df + 1.0) * (df.powi(-3) - df.powi(-4)) - ((df + 1.0).powi(-3) - (df + 1.0).powi(-4));
        let di = d as i64;
        let exact_slack = ratio(di, di + 1) * (ratio(1, di.pow(3)) - ratio(1, di.pow(4)))
            - (ratio(1, (di + 1).pow(3)) - ratio(1, (di + 1).pow(4)));
        let closed = ratio(2 * di.pow(3) - 2 * di - 1, di.pow(3) * (di + 1).pow(4));
        let p4 = (df + 1.0).powi(4);
        let r_d = r_margin(3, d)?;
        let r_next = r_margin(3, d + 1)?;
        // The chain (d+1)^-(d+1) (d+1)! <= 12!/(d+1)^12 <= 12!/12^8 (d+1)^-4.
        let chain_ok = new_term <= factorial_term(d + 1, 12) && factorial_term(d + 1, 12) <= twelve_fact_over / p4;
        steps.push(InductionStep {
            d,
            new_term,
            slack,
            new_term_ok: new_term <= slack && chain_ok,
            r_d,
            r_next,
            contraction_ok: r_next <= df / (df + 1.0) * r_d,
            factorial_constant_ok: twelve_fact_over / p4 < 1.115 / p4,
            slack_identity_ok: exact_slack == closed,
            slack_constant_ok: to_f64(&closed) > 1.99 / p4,
            slack_margin_ok: to_f64(&closed) > 1.115 / p4,
        });
    }
    let all_negative = (7..=d_max).map(|d| r_margin(3, d)).collect::<Result<Vec<_>>>()?.iter().all(|r| *r < 0.0);
    let holds = growth_constant_ok
        && all_negative
        && base.iter().all(|(_, r)| *r < 0.0)
        && steps
            .iter()
            .all(|s| s.new_term_ok && s.contraction_ok && s.factorial_constant_ok && s.slack_identity_ok && s.slack_margin_ok);
    Ok(InductionTrace {
        d_max,
        growth_constant,
        growth_constant_ok,
        base,
        steps,
        all_negative,
        holds,
    })
}

/// Bracket on the connective constant `c(d)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConnectiveConstantBound {
    pub d: usize,
    pub lower: f64,
    pub upper: f64,
    pub source: String,
}

impl ConnectiveConstantBound {
    pub fn new(d: usize, lower: f64, upper: f64, source: impl Into<String>) -> Result<Self> {
        let b = Self {
            d,
            lower,
            upper,
            source: source.into(),
        };
        b.validate()?;
        Ok(b)
    }

    /// `d <= c(d) <= 2d - 1`.
    pub fn generic(d: usize) -> Self {
        Self {
            d,
            lower: d as f64,
            upper: (2 * d).saturating_sub(1).max(1) as f64,
            source: "trivial bounds d <= c(d) <= 2d-1".into(),
        }
    }

    pub fn square_lattice() -> Self {
        Self {
            d: 2,
            lower: 2.0,
            upper: C2_UPPER,
            source: "published upper bound c(2) <= 2.679192495".into(),
        }
    }

    /// Default bracket: the published value for `d = 2`, trivial otherwise.
    pub fn default_for(d: usize) -> Self {
        if d == 2 {
            Self::square_lattice()
        } else {
            Self::generic(d)
        }
    }

    /// `c(d) <= c_n(d)^{1/n}` for every `n`, by submultiplicativity.
    pub fn from_saw_counts(counts: &crate::saw::SawCounts) -> Self {
        let upper = counts
            .counts
            .iter()
            .enumerate()
            .map(|(i, &c)| (c as f64).powf(1.0 / (i + 1) as f64))
            .fold(f64::INFINITY, f64::min)
            .min((2 * counts.d - 1).max(1) as f64);
        Self {
            d: counts.d,
            lower: counts.d as f64,
            upper,
            source: format!("self-avoiding walk counts up to n = {}", counts.counts.len()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.d as f64;
        let top = (2.0 * d - 1.0).max(1.0);
        if !(d <= self.lower && self.lower <= self.upper && self.upper <= top) {
            return Err(Error::InvalidArgument(format!(
                "connective constant bracket [{}, {}] violates d <= lower <= upper <= 2d-1 for d = {}",
                self.lower, self.upper, self.d
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionReport {
    pub k: usize,
    pub d: usize,
    pub verdict: Verdict,
    pub lhs: f64,
    pub rhs: f64,
    pub detail: String,
}

/// First-moment criterion: no BnG percolation when `k(k-1) c(d) < 2d(2d-1)`.
pub fn bng_subcritical(k: usize, d: usize, c: &ConnectiveConstantBound) -> Result<CriterionReport> {
    c.validate()?;
    if c.d != d {
        return Err(Error::InvalidArgument(format!("bound is for d = {}, not {d}", c.d)));
    }
    let lhs = (k * k.saturating_sub(1)) as f64 * c.upper;
    let rhs = (2 * d * (2 * d - 1)) as f64;
    let verdict = if d >= 2 && lhs < rhs {
        Verdict::NoPercolation
    } else {
        Verdict::Inconclusive
    };
    Ok(CriterionReport {
        k,
        d,
        verdict,
        lhs,
        rhs,
        detail: format!("k(k-1) c_upper vs 2d(2d-1), c_upper = {} ({})", c.upper, c.source),
    })
}

/// `sqrt(4 (1 - 1/c(2)))`.
pub fn bng_supercritical_slope(c2_upper: f64) -> f64 {
    (4.0 * (1.0 - 1.0 / c2_upper)).sqrt()
}

/// Planar dual criterion: BnG percolates when `k > d sqrt(4(1 - 1/c(2)))`.
pub fn bng_supercritical(k: usize, d: usize) -> CriterionReport {
    bng_supercritical_with(k, d, C2_UPPER)
}

pub fn bng_supercritical_with(k: usize, d: usize, c2_upper: f64) -> CriterionReport {
    let rhs = d as f64 * bng_supercritical_slope(c2_upper);
    let lhs = k as f64;
    CriterionReport {
        k,
        d,
        verdict: if d >= 2 && lhs > rhs {
            Verdict::Percolates
        } else {
            Verdict::Inconclusive
        },
        lhs,
        rhs,
        detail: format!("k vs d sqrt(4(1 - 1/c(2))), c(2) <= {c2_upper}"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OneDependentReport {
    pub alpha: f64,
    pub verdict: Verdict,
    /// `2 sqrt(0.5847)`
    pub threshold: f64,
    /// `2 sqrt(0.8457)`, the weaker planar constant.
    pub weaker_threshold: f64,
}

/// Asymptotic criterion for the `floor(alpha d)`-BnG via 1-dependent percolation.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn one_dependent_criterion(alpha: f64) -> Result<OneDependentReport> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument(format!("alpha = {alpha} must be positive")));
    }
    Ok(OneDependentReport {
        alpha,
        verdict: if alpha * alpha / 4.0 > ONE_DEP_PSUP_LIMIT {
            Verdict::Percolates
        } else {
            Verdict::Inconclusive
        },
        threshold: 2.0 * ONE_DEP_PSUP_LIMIT.sqrt(),
        weaker_threshold: 2.0 * ONE_DEP_PSUP_Z2.sqrt(),
    })
}
