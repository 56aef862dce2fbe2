//! Barrier-constrained walk measures and the speed-certificate machinery.
//!
//! A three-piece barrier corridor (pinned diagonal, then a band of slope `v`
//! just under the diagonal, then a band dropped `A * a_m` below it) confines
//! a Bernoulli(p) walk doubled by branching. The measures
//!
//! ```text
//! nu_i(x) = 2^i P[ walk respects the corridor through step i, S_i = x ]
//! ```
//!
//! are built by one linear DP pass. They witness a lower bound for the
//! finite-population front speed: if the sequence is (epsilon, alpha, beta)-
//! admissible, the probability that the population's minimum falls below the
//! line (v - alpha) i for m consecutive steps is at most
//! `2 K exp(-N epsilon p delta^2 / beta)`, which turns into the certified
//! bound `v_N >= (v - alpha)(1 - m P(B))`.
//!
//! Every measure is cross-checked through a second, analytically equivalent
//! route: a DP under the step law `v delta_1 + (1-v) delta_0` reweighted by
//! `gamma^(x - v i)`. The two routes agree exactly when `v` solves
//! `Lambda(v) = ln 2`, so their relative difference doubles as an end-to-end
//! test of the root, the tilt ratio, and the DP itself.

use crate::dynamics::{ChainRunner, DynamicsError, RngStream};
use crate::population::ModelParams;
use crate::theory::{derived_constants, TheoryConstants, TheoryError};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AdmissibleError {
    #[error("invalid barrier parameters: {0}")]
    Parameters(String),
    #[error("infeasible barriers at step {step}: {reason}")]
    InfeasibleBarriers { step: u64, reason: String },
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("sequence is not admissible: {failures:?}")]
    NotAdmissible { failures: Vec<String> },
    #[error("invalid path parameters: {0}")]
    InvalidPath(String),
    #[error("internal consistency violation: {0}")]
    Internal(String),
    #[error(transparent)]
    Theory(#[from] TheoryError),
    #[error(transparent)]
    Dynamics(Box<DynamicsError>),
}

impl From<DynamicsError> for AdmissibleError {
    fn from(e: DynamicsError) -> Self {
        AdmissibleError::Dynamics(Box::new(e))
    }
}

/// Exact integer cube root: the largest `x` with `x^3 <= n`.
pub fn icbrt(n: u64) -> u64 {
    let mut x = (n as f64).cbrt().round() as u64;
    while x > 0 && (x as u128).pow(3) > n as u128 {
        x -= 1;
    }
    while ((x + 1) as u128).pow(3) <= n as u128 {
        x += 1;
    }
    x
}

/// `m^(2/3)` as a real number, exact when `m` is a perfect cube.
pub(crate) fn two_thirds_power(m: u64) -> f64 {
    let t = icbrt(m);
    if t * t * t == m {
        (t * t) as f64
    } else {
        (m as f64).powf(2.0 / 3.0)
    }
}

/// The three-piece barrier corridor for horizon `m`.
///
/// With `a_m = floor(m^(1/3))`, `c_m = floor(m^(2/3))` and
/// `s_m = floor(a_m / (2 (1 - v)))`:
///
/// ```text
/// upper(k) = k            for k <= s_m       lower(k) = k
/// upper(k) = v k + a_m    for k >  s_m       lower(k) = v (k+1)   for k <= m - c_m
///                                            lower(k) = v k - A a_m  beyond
/// ```
///
/// The pinned piece takes precedence where the ranges overlap (degenerate
/// only at very small m).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BarrierSpec {
    constants: TheoryConstants,
    m: u64,
    a_m: u64,
    c_m: u64,
    s_m: u64,
    /// The integer `A >= 4` scaling the tail window's depth `A * a_m`.
    tail_factor: u64,
}

impl BarrierSpec {
    /// Validates `A >= 4`, `m >= q`, `s_m >= 1` and the subcritical `p`.
    pub fn new(p: f64, m: u64, tail_factor: u64) -> Result<Self, AdmissibleError> {
        let constants = derived_constants(p)?;
        if tail_factor < 4 {
            return Err(AdmissibleError::Parameters(format!(
                "tail factor A must be an integer >= 4, got {tail_factor}"
            )));
        }
        if m < constants.q {
            return Err(AdmissibleError::Parameters(format!(
                "horizon m = {m} is below the minimum q = {} for p = {p}",
                constants.q
            )));
        }
        let a_m = icbrt(m);
        let c_m = icbrt(m * m);
        let s_m = (a_m as f64 / (2.0 * (1.0 - constants.v))).floor() as u64;
        if s_m < 1 {
            return Err(AdmissibleError::Parameters(format!(
                "pinned segment is empty (s_m = 0) for m = {m}, p = {p}"
            )));
        }
        Ok(Self {
            constants,
            m,
            a_m,
            c_m,
            s_m,
            tail_factor,
        })
    }

    pub fn constants(&self) -> &TheoryConstants {
        &self.constants
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn a_m(&self) -> u64 {
        self.a_m
    }

    pub fn c_m(&self) -> u64 {
        self.c_m
    }

    pub fn s_m(&self) -> u64 {
        self.s_m
    }

    pub fn tail_factor(&self) -> u64 {
        self.tail_factor
    }

    /// Support-shrink rate `alpha = 2 A m^(-2/3)` paired with this corridor.
    pub fn alpha(&self) -> f64 {
        2.0 * self.tail_factor as f64 / two_thirds_power(self.m)
    }

    /// Upper barrier `d_m(k)`.
    pub fn upper(&self, k: u64) -> f64 {
        if k <= self.s_m {
            k as f64
        } else {
            self.constants.v * k as f64 + self.a_m as f64
        }
    }

    /// Lower barrier `g_m(k)`.
    pub fn lower(&self, k: u64) -> f64 {
        if k <= self.s_m {
            k as f64
        } else if k <= self.m - self.c_m {
            self.constants.v * (k + 1) as f64
        } else {
            self.constants.v * k as f64 - (self.tail_factor * self.a_m) as f64
        }
    }

    /// Integer sites admitted at step `k`: `[ceil(lower), floor(upper)]`.
    pub fn window(&self, k: u64) -> Result<(i64, i64), AdmissibleError> {
        let lo = self.lower(k).ceil() as i64;
        let hi = self.upper(k).floor() as i64;
        if lo > hi {
            return Err(AdmissibleError::InfeasibleBarriers {
                step: k,
                reason: format!(
                    "integer window [{lo}, {hi}] is empty (barriers {:.6}..{:.6})",
                    self.lower(k),
                    self.upper(k)
                ),
            });
        }
        Ok((lo, hi))
    }
}

/// Nonnegative real-valued measure on a contiguous run of sites.
///
/// Trimmed: the first and last stored values are strictly positive, and for
/// DP-built measures every interior value is too (corridor supports stay
/// contiguous).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RealMeasure {
    offset: i64,
    values: Vec<f64>,
}

impl RealMeasure {
    /// Unit mass at one site.
    pub fn delta(x: i64) -> Self {
        Self {
            offset: x,
            values: vec![1.0],
        }
    }

    /// Trims zero edges; `None` when nothing positive remains.
    fn from_window(lo: i64, values: Vec<f64>) -> Option<Self> {
        let first = values.iter().position(|&v| v > 0.0)?;
        let last = values.iter().rposition(|&v| v > 0.0).unwrap();
        Some(Self {
            offset: lo + first as i64,
            values: values[first..=last].to_vec(),
        })
    }

    pub fn min(&self) -> i64 {
        self.offset
    }

    pub fn max(&self) -> i64 {
        self.offset + self.values.len() as i64 - 1
    }

    pub fn get(&self, x: i64) -> f64 {
        if x < self.offset {
            return 0.0;
        }
        let i = (x - self.offset) as usize;
        self.values.get(i).copied().unwrap_or(0.0)
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Number of sites carrying strictly positive mass.
    pub fn support_len(&self) -> u64 {
        self.values.iter().filter(|&&v| v > 0.0).count() as u64
    }

    pub fn min_positive(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .filter(|&v| v > 0.0)
            .fold(f64::INFINITY, f64::min)
    }

    /// `(site, value)` pairs over positive cells, ascending.
    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 0.0)
            .map(move |(i, &v)| (self.offset + i as i64, v))
    }
}

/// The corridor-constrained measure sequence `nu_0 .. nu_m` with its derived
/// admissibility quantities.
#[derive(Debug, Clone)]
pub struct AdmissibleSequence {
    spec: BarrierSpec,
    p: f64,
    measures: Vec<RealMeasure>,
    epsilon: f64,
    support_cells: u64,
}

impl AdmissibleSequence {
    pub fn spec(&self) -> &BarrierSpec {
        &self.spec
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// `nu_0 ..= nu_m` in step order.
    pub fn measures(&self) -> &[RealMeasure] {
        &self.measures
    }

    /// Smallest positive cell value over `nu_0 .. nu_{m-1}`.
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// `alpha = 2 A m^(-2/3)`.
    pub fn alpha(&self) -> f64 {
        self.spec.alpha()
    }

    /// Total positive cells over `nu_0 .. nu_{m-1}` (the K of the tail bound).
    pub fn support_cells(&self) -> u64 {
        self.support_cells
    }
}

/// One DP transition: push `prev` through a doubled Bernoulli step and crop
/// to `[lo, hi]`, guarding against silent underflow.
fn dp_step(
    prev: &RealMeasure,
    up: f64,
    stay: f64,
    lo: i64,
    hi: i64,
    step: u64,
) -> Result<RealMeasure, AdmissibleError> {
    let mut values = Vec::with_capacity((hi - lo + 1) as usize);
    for x in lo..=hi {
        let from_below = prev.get(x - 1);
        let in_place = prev.get(x);
        let val = up * from_below + stay * in_place;
        if !val.is_finite() {
            return Err(AdmissibleError::Numeric(format!(
                "measure cell overflowed at step {step}, site {x}"
            )));
        }
        if val == 0.0 && (from_below > 0.0 || in_place > 0.0) {
            return Err(AdmissibleError::Numeric(format!(
                "measure cell underflowed to zero at step {step}, site {x}; \
                 the sequence leaves double precision"
            )));
        }
        values.push(val);
    }
    RealMeasure::from_window(lo, values).ok_or(AdmissibleError::InfeasibleBarriers {
        step,
        reason: "barriers leave no reachable mass".into(),
    })
}

/// Builds the corridor measures by the doubled-walk DP
/// `nu_i(x) = [2p nu_{i-1}(x-1) + 2(1-p) nu_{i-1}(x)] 1{window}`.
pub fn build_sequence(
    p: f64,
    m: u64,
    tail_factor: u64,
) -> Result<AdmissibleSequence, AdmissibleError> {
    let spec = BarrierSpec::new(p, m, tail_factor)?;
    let mut measures = Vec::with_capacity(m as usize + 1);
    measures.push(RealMeasure::delta(0));
    for i in 1..=m {
        let (lo, hi) = spec.window(i)?;
        let next = dp_step(
            &measures[i as usize - 1],
            2.0 * p,
            2.0 * (1.0 - p),
            lo,
            hi,
            i,
        )?;
        measures.push(next);
    }
    let epsilon = measures[..m as usize]
        .iter()
        .map(RealMeasure::min_positive)
        .fold(f64::INFINITY, f64::min);
    let support_cells = measures[..m as usize]
        .iter()
        .map(RealMeasure::support_len)
        .sum();
    Ok(AdmissibleSequence {
        spec,
        p,
        measures,
        epsilon,
        support_cells,
    })
}

/// The second route: corridor DP under the step law `v delta_1 + (1-v)
/// delta_0` (probabilities, not doubled). Cell `t_i(x)` is the probability
/// that the drift-v walk respects the corridor through step i and sits at x.
fn drift_walk_measures(seq: &AdmissibleSequence) -> Result<Vec<RealMeasure>, AdmissibleError> {
    let v = seq.spec.constants().v;
    let mut out = Vec::with_capacity(seq.measures.len());
    out.push(RealMeasure::delta(0));
    for i in 1..=seq.spec.m() {
        let (lo, hi) = seq.spec.window(i)?;
        let next = dp_step(&out[i as usize - 1], v, 1.0 - v, lo, hi, i)?;
        out.push(next);
    }
    Ok(out)
}

/// Recomputes every `nu_i(x)` as `gamma^(x - v i) t_i(x)` through the
/// drift-v walk and returns the worst relative disagreement with the direct
/// DP. Agreement certifies the speed root, the tilt ratio and both DP
/// routes simultaneously; the artifact-wide contract is `<= 1e-9`.
pub fn tilted_cross_check(seq: &AdmissibleSequence) -> Result<f64, AdmissibleError> {
    let c = seq.spec.constants();
    let (v, ln_gamma) = (c.v, c.gamma.ln());
    let drift = drift_walk_measures(seq)?;
    let mut worst = 0f64;
    for (i, (direct, tilted)) in seq.measures.iter().zip(drift.iter()).enumerate() {
        if (direct.min(), direct.max()) != (tilted.min(), tilted.max()) {
            return Err(AdmissibleError::Internal(format!(
                "route supports diverge at step {i}"
            )));
        }
        for (x, val) in direct.iter() {
            let reweighted = ((x as f64 - v * i as f64) * ln_gamma).exp() * tilted.get(x);
            worst = worst.max((reweighted - val).abs() / val);
        }
    }
    Ok(worst)
}

/// One property's verdict inside an admissibility report.
#[derive(Debug, Clone, Serialize)]
pub struct PropertyCheck {
    pub passed: bool,
    /// First violation, human-readable; `None` when passed.
    pub witness: Option<String>,
}

impl PropertyCheck {
    fn pass() -> Self {
        Self {
            passed: true,
            witness: None,
        }
    }

    fn fail(witness: String) -> Self {
        Self {
            passed: false,
            witness: Some(witness),
        }
    }
}

/// Outcome of the five admissibility properties for one `beta`.
#[derive(Debug, Clone, Serialize)]
pub struct AdmissibilityReport {
    /// (i) `nu_i = (2p)^i delta_i` on the pinned prefix `i <= q`.
    pub pinned_prefix: PropertyCheck,
    /// (ii) `nu_i <= 2 nu_{i-1} * (p delta_1 + (1-p) delta_0)` pointwise.
    pub branching_dominated: PropertyCheck,
    /// (iii) every positive cell of `nu_0 .. nu_{m-1}` is `>= epsilon`.
    pub mass_floor: PropertyCheck,
    /// (iv) `supp(nu_i)` within `[(v - alpha)(i + 1), inf)` for `q <= i < m`.
    pub support_window: PropertyCheck,
    /// (v) terminal mass `nu_m(Z) >= beta + 1`.
    pub terminal_mass: PropertyCheck,
    pub epsilon: f64,
    pub alpha: f64,
    pub beta: f64,
    pub terminal_mass_value: f64,
    pub support_cells: u64,
    pub admissible: bool,
}

impl AdmissibilityReport {
    /// Names of failed properties, for error reporting.
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (name, check) in [
            ("pinned_prefix", &self.pinned_prefix),
            ("branching_dominated", &self.branching_dominated),
            ("mass_floor", &self.mass_floor),
            ("support_window", &self.support_window),
            ("terminal_mass", &self.terminal_mass),
        ] {
            if !check.passed {
                let witness = check.witness.as_deref().unwrap_or("");
                out.push(format!("{name}: {witness}"));
            }
        }
        out
    }
}

/// Checks the five admissibility properties against margin `beta`.
pub fn check_admissibility(seq: &AdmissibleSequence, beta: f64) -> AdmissibilityReport {
    let m = seq.spec.m() as usize;
    let q = seq.spec.constants().q as usize;
    let p = seq.p;
    let v = seq.spec.constants().v;
    let alpha = seq.alpha();

    // (i) pinned prefix: single site at i carrying (2p)^i
    let mut pinned = PropertyCheck::pass();
    let mut expect = 1.0f64;
    for i in 0..=q.min(m) {
        let nu = &seq.measures[i];
        let ok = nu.min() == i as i64
            && nu.max() == i as i64
            && (nu.get(i as i64) - expect).abs() <= 1e-12 * expect;
        if !ok {
            pinned = PropertyCheck::fail(format!(
                "step {i}: expected point mass {expect:.6e} at site {i}, found \
                 support [{}, {}]",
                nu.min(),
                nu.max()
            ));
            break;
        }
        expect *= 2.0 * p;
    }

    // (ii) one-step branching domination, rechecked on every step
    let mut dominated = PropertyCheck::pass();
    'outer: for i in 1..=m {
        let (prev, cur) = (&seq.measures[i - 1], &seq.measures[i]);
        for (x, val) in cur.iter() {
            let cap = 2.0 * p * prev.get(x - 1) + 2.0 * (1.0 - p) * prev.get(x);
            if val > cap * (1.0 + 1e-12) {
                dominated = PropertyCheck::fail(format!(
                    "step {i}, site {x}: {val:.6e} exceeds branching image {cap:.6e}"
                ));
                break 'outer;
            }
        }
    }

    // (iii) cell floor; epsilon is the minimum by construction, so this
    // reduces to positivity plus the recorded value
    let mut floor = PropertyCheck::pass();
    'floor: for (i, nu) in seq.measures[..m].iter().enumerate() {
        for (x, val) in nu.iter() {
            if val < seq.epsilon {
                floor = PropertyCheck::fail(format!(
                    "step {i}, site {x}: {val:.6e} below epsilon {:.6e}",
                    seq.epsilon
                ));
                break 'floor;
            }
        }
    }

    // (iv) support window
    let mut window = PropertyCheck::pass();
    for i in q..m {
        let lowest = seq.measures[i].min() as f64;
        let needed = (v - alpha) * (i + 1) as f64;
        if lowest < needed {
            window = PropertyCheck::fail(format!(
                "step {i}: support reaches {lowest} below (v - alpha)(i+1) = {needed:.6}"
            ));
            break;
        }
    }

    // (v) terminal mass
    let terminal_mass_value = seq.measures[m].mass();
    let terminal = if terminal_mass_value >= beta + 1.0 {
        PropertyCheck::pass()
    } else {
        PropertyCheck::fail(format!(
            "terminal mass {terminal_mass_value:.6e} below beta + 1 = {:.6e}",
            beta + 1.0
        ))
    };

    let admissible =
        pinned.passed && dominated.passed && floor.passed && window.passed && terminal.passed;
    AdmissibilityReport {
        pinned_prefix: pinned,
        branching_dominated: dominated,
        mass_floor: floor,
        support_window: window,
        terminal_mass: terminal,
        epsilon: seq.epsilon,
        alpha,
        beta,
        terminal_mass_value,
        support_cells: seq.support_cells,
        admissible,
    }
}

/// The certified tail bound and where it starts to bite.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TailBound {
    /// `2 K exp(-N epsilon p delta^2 / beta)`; may exceed 1 for small N.
    pub bound: f64,
    /// Exponent rate `epsilon p delta^2 / beta` per particle.
    pub rate: f64,
    /// `delta = 1 - exp(-ln(beta) / m)`.
    pub delta: f64,
    /// Population size at which the bound first drops below 1.
    pub n_star: f64,
    pub support_cells: u64,
    pub epsilon: f64,
}

/// Evaluates the tail bound `P(B) <= 2 K exp(-N epsilon p delta^2 / beta)`
/// at population size `n`. The sequence must be admissible for this `beta`.
pub fn lemma_bound(
    seq: &AdmissibleSequence,
    n: u64,
    beta: f64,
) -> Result<TailBound, AdmissibleError> {
    if !(beta > 1.0) || !beta.is_finite() {
        return Err(AdmissibleError::Parameters(format!(
            "beta must be finite and > 1, got {beta}"
        )));
    }
    let report = check_admissibility(seq, beta);
    if !report.admissible {
        return Err(AdmissibleError::NotAdmissible {
            failures: report.failures(),
        });
    }
    let delta = 1.0 - (-(beta.ln()) / seq.spec.m() as f64).exp();
    let rate = seq.epsilon * seq.p * delta * delta / beta;
    let k2 = 2.0 * seq.support_cells as f64;
    Ok(TailBound {
        bound: k2 * (-(n as f64) * rate).exp(),
        rate,
        delta,
        n_star: k2.ln() / rate,
        support_cells: seq.support_cells,
        epsilon: seq.epsilon,
    })
}

/// Monte Carlo estimate of the dip event probability.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EventBEstimate {
    pub p_hat: f64,
    /// Binomial standard error `sqrt(p_hat (1 - p_hat) / trials)`.
    pub stderr: f64,
    pub trials: u64,
    pub successes: u64,
}

/// Estimates `P[min X_i < (v - alpha) i for every i in 1..=m]` over
/// independent runs from `N delta_0`.
///
/// Trials are independently substreamed from `seed`, so the count is
/// reproducible and scheduling-independent; a trial exits at the first step
/// whose minimum reaches the line.
pub fn event_b_probability(
    params: ModelParams,
    seq: &AdmissibleSequence,
    trials: u64,
    seed: u64,
) -> Result<EventBEstimate, AdmissibleError> {
    if trials == 0 {
        return Err(AdmissibleError::Parameters(
            "trials must be at least 1".into(),
        ));
    }
    let m = seq.spec.m();
    let line = seq.spec.constants().v - seq.alpha();
    let successes = (0..trials)
        .into_par_iter()
        .map(|trial| -> Result<u64, AdmissibleError> {
            let mut runner = ChainRunner::with_rng(params, RngStream::substream(seed, trial));
            for i in 1..=m {
                runner.step()?;
                if runner.pop().min() as f64 >= line * i as f64 {
                    return Ok(0);
                }
            }
            Ok(1)
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    let p_hat = successes as f64 / trials as f64;
    Ok(EventBEstimate {
        p_hat,
        stderr: (p_hat * (1.0 - p_hat) / trials as f64).sqrt(),
        trials,
        successes,
    })
}

/// A certified finite-N speed lower bound.
#[derive(Debug, Clone, Serialize)]
pub struct Certificate {
    /// `(v - alpha)(1 - m * bound)`; a true lower bound on `v_N(p)`.
    pub value: f64,
    /// Set when `value <= 0` (the bound says nothing at this N).
    pub vacuous: bool,
    pub p: f64,
    pub n: u64,
    pub m: u64,
    pub tail_factor: u64,
    pub beta: f64,
    pub speed_limit: f64,
    pub alpha: f64,
    pub tail: TailBound,
}

/// Builds the sequence, verifies admissibility, and assembles the certified
/// lower bound `v_N(p) >= (v - alpha)(1 - m * bound)` at population size `n`.
pub fn certificate_lower_bound(
    p: f64,
    n: u64,
    m: u64,
    tail_factor: u64,
    beta: f64,
) -> Result<Certificate, AdmissibleError> {
    let seq = build_sequence(p, m, tail_factor)?;
    let tail = lemma_bound(&seq, n, beta)?;
    let v = seq.spec.constants().v;
    let alpha = seq.alpha();
    let value = (v - alpha) * (1.0 - m as f64 * tail.bound);
    Ok(Certificate {
        value,
        vacuous: value <= 0.0,
        p,
        n,
        m,
        tail_factor,
        beta,
        speed_limit: v,
        alpha,
        tail,
    })
}

/// Builds a nondecreasing 0/1-increment path from `x` to `y` inside the
/// drifting corridor `rho + v i <= x_i <= sigma + v i`.
///
/// Preconditions (all strict): `rho + 1 < sigma`, `sigma + l v < rho + l`,
/// `rho + l v > sigma`, `x` an integer in `[rho, sigma]`, `y` an integer in
/// `[rho + l v, sigma + l v]`, `v` in (0, 1). Under these a path always
/// exists; failure to construct one is an internal error.
pub fn monotone_path(
    rho: f64,
    sigma: f64,
    v: f64,
    ell: u64,
    x: i64,
    y: i64,
) -> Result<Vec<i64>, AdmissibleError> {
    let bad = |msg: String| Err(AdmissibleError::InvalidPath(msg));
    if !rho.is_finite() || !sigma.is_finite() {
        return bad(format!(
            "corridor bounds must be finite, got [{rho}, {sigma}]"
        ));
    }
    if !(v > 0.0 && v < 1.0) {
        return bad(format!("drift v must lie strictly inside (0, 1), got {v}"));
    }
    if !(rho + 1.0 < sigma) {
        return bad(format!(
            "need rho + 1 < sigma, got rho = {rho}, sigma = {sigma}"
        ));
    }
    let lf = ell as f64;
    if !(sigma + lf * v < rho + lf) {
        return bad(format!(
            "horizon too short to descend the corridor: sigma + l v = {} >= rho + l = {}",
            sigma + lf * v,
            rho + lf
        ));
    }
    if !(rho + lf * v > sigma) {
        return bad(format!(
            "horizon too short to clear the start window: rho + l v = {} <= sigma = {sigma}",
            rho + lf * v
        ));
    }
    let xf = x as f64;
    if !(rho <= xf && xf <= sigma) {
        return bad(format!("start {x} outside [{rho}, {sigma}]"));
    }
    let yf = y as f64;
    if !(rho + lf * v <= yf && yf <= sigma + lf * v) {
        return bad(format!(
            "target {y} outside [{}, {}]",
            rho + lf * v,
            sigma + lf * v
        ));
    }

    // forward pass: reachable-position intervals step by step
    let window = |i: u64| -> (i64, i64) {
        let t = v * i as f64;
        ((rho + t).ceil() as i64, (sigma + t).floor() as i64)
    };
    let steps = ell as usize;
    let mut reach: Vec<(i64, i64)> = Vec::with_capacity(steps + 1);
    reach.push((x, x));
    for i in 1..=ell {
        let (lo, hi) = window(i);
        let (prev_lo, prev_hi) = reach[i as usize - 1];
        let (next_lo, next_hi) = (prev_lo.max(lo), (prev_hi + 1).min(hi));
        if next_lo > next_hi {
            return Err(AdmissibleError::Internal(format!(
                "reachable set died at step {i} of a corridor that guarantees a path \
                 (rho = {rho}, sigma = {sigma}, v = {v}, l = {ell}, x = {x}, y = {y})"
            )));
        }
        reach.push((next_lo, next_hi));
    }
    if y < reach[steps].0 || y > reach[steps].1 {
        return Err(AdmissibleError::Internal(format!(
            "target {y} unreachable in a corridor that guarantees a path \
             (reachable [{}, {}])",
            reach[steps].0, reach[steps].1
        )));
    }

    // backward pass: walk the target down through the reachable intervals
    let mut path = vec![0i64; steps + 1];
    path[steps] = y;
    for i in (0..steps).rev() {
        let z = path[i + 1];
        let (lo, hi) = reach[i];
        path[i] = if z >= lo && z <= hi { z } else { z - 1 };
        debug_assert!(path[i] >= lo && path[i] <= hi);
    }
    Ok(path)
}
