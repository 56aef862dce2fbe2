//! Exact finite-N front speeds via the translation-quotient chain.
//!
//! Modulo translations, the selected population is a positive-recurrent
//! Markov chain on canonical classes (count vectors anchored at 0). For small
//! N the class space is enumerated exhaustively from `[N]`: every transition
//! row is built by summing, over all per-site up-mover counts, the product of
//! binomial weights `C(2k, u) p^u (1-p)^(2k-u)`. The front speed is then the
//! stationary average of the expected one-step increment of the maximum,
//!
//! ```text
//! v_N = sum_s pi(s) * drift(s),   drift(s) = E[max X_{n+1} - max X_n | s].
//! ```

use crate::dynamics::select_step;
use crate::population::{CanonicalClass, ModelParams, Population, PopulationError};
use std::collections::HashMap;
use thiserror::Error;

/// Class-count budget for `build_chain`; covers N well past the default CLI
/// limit of 8 while stopping runaway enumerations early.
pub const DEFAULT_MAX_STATES: usize = 32_768;

/// Per-state cap on the number of branching outcomes enumerated.
const MAX_OUTCOMES_PER_STATE: u64 = 1 << 24;

#[derive(Debug, Error)]
pub enum ChainError {
    #[error("class space exceeds the configured budget of {budget} states")]
    StateBudget { budget: usize },
    #[error("branching enumeration for class {class} needs {outcomes} outcomes (cap {cap})")]
    EnumerationBudget {
        class: String,
        outcomes: u64,
        cap: u64,
    },
    #[error("stationary solve failed: {0}")]
    Numeric(String),
    #[error(transparent)]
    Population(#[from] PopulationError),
    #[error(transparent)]
    Dynamics(#[from] Box<crate::dynamics::DynamicsError>),
}

impl From<crate::dynamics::DynamicsError> for ChainError {
    fn from(e: crate::dynamics::DynamicsError) -> Self {
        ChainError::Dynamics(Box::new(e))
    }
}

/// The quotient chain: discovered classes, dense transition matrix, drifts.
#[derive(Debug, Clone)]
pub struct QuotientChain {
    params: ModelParams,
    states: Vec<CanonicalClass>,
    rows: Vec<Vec<f64>>,
    drift: Vec<f64>,
}

impl QuotientChain {
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// Classes in discovery order; index 0 is the start class `[N]`.
    pub fn states(&self) -> &[CanonicalClass] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Transition probability between class indices.
    pub fn transition(&self, from: usize, to: usize) -> f64 {
        self.rows[from][to]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// Expected one-step increment of the maximum out of each class.
    pub fn drift(&self) -> &[f64] {
        &self.drift
    }

    pub fn index_of(&self, class: &CanonicalClass) -> Option<usize> {
        self.states.iter().position(|s| s == class)
    }
}

/// Enumerates the class space reachable from `[N]` with the default budget.
pub fn build_chain(params: ModelParams) -> Result<QuotientChain, ChainError> {
    build_chain_with_budget(params, DEFAULT_MAX_STATES)
}

/// Exact binomial coefficient as f64 (exact for the small windows used here).
fn binom(n: u64, k: u64) -> f64 {
    let k = k.min(n - k.min(n));
    let mut c = 1f64;
    for j in 0..k {
        c = c * (n - j) as f64 / (j + 1) as f64;
    }
    c
}

/// Per-site law of the up-mover count: `w[u] = C(2k, u) p^u (1-p)^(2k-u)`.
fn site_weights(k: u64, p: f64) -> Vec<f64> {
    let n = 2 * k;
    (0..=n)
        .map(|u| binom(n, u) * p.powi(u as i32) * (1.0 - p).powi((n - u) as i32))
        .collect()
}

pub fn build_chain_with_budget(
    params: ModelParams,
    max_states: usize,
) -> Result<QuotientChain, ChainError> {
    let n = params.n();
    let p = params.p();
    let start = Population::delta(n, 0)?.canonicalize();
    let mut states = vec![start.clone()];
    let mut index: HashMap<CanonicalClass, usize> = HashMap::new();
    index.insert(start, 0);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut drift: Vec<f64> = Vec::new();

    let mut s = 0usize;
    while s < states.len() {
        let class = states[s].clone();
        let counts = class.counts().to_vec();
        let top = counts.len() as i64 - 1;

        // odometer over occupied sites
        let occupied: Vec<(usize, u64)> = counts
            .iter()
            .enumerate()
            .filter(|(_, &k)| k > 0)
            .map(|(i, &k)| (i, k))
            .collect();
        let mut outcomes = 1u64;
        for &(_, k) in &occupied {
            outcomes = outcomes.saturating_mul(2 * k + 1);
        }
        if outcomes > MAX_OUTCOMES_PER_STATE {
            return Err(ChainError::EnumerationBudget {
                class: class.to_string(),
                outcomes,
                cap: MAX_OUTCOMES_PER_STATE,
            });
        }
        let weights: Vec<Vec<f64>> = occupied.iter().map(|&(_, k)| site_weights(k, p)).collect();

        let mut row: HashMap<usize, f64> = HashMap::new();
        let mut d = 0f64;
        let mut ups = vec![0u64; occupied.len()];
        loop {
            // branched counts for this up-mover combination
            let mut b = vec![0u64; counts.len() + 1];
            let mut prob = 1f64;
            for (j, &(i, k)) in occupied.iter().enumerate() {
                let u = ups[j];
                b[i + 1] += u;
                b[i] += 2 * k - u;
                prob *= weights[j][u as usize];
            }
            if prob > 0.0 {
                let branched = Population::from_untrimmed(0, b)?;
                let selected = select_step(&branched, n)?;
                let inc = selected.max() - top;
                debug_assert!(inc == 0 || inc == 1);
                d += prob * inc as f64;
                let next = selected
                    .translate(-selected.min())
                    .expect("re-anchoring cannot overflow")
                    .canonicalize();
                let id = match index.get(&next) {
                    Some(&id) => id,
                    None => {
                        let id = states.len();
                        if id >= max_states {
                            return Err(ChainError::StateBudget { budget: max_states });
                        }
                        states.push(next.clone());
                        index.insert(next, id);
                        id
                    }
                };
                *row.entry(id).or_insert(0.0) += prob;
            }
            // advance odometer
            let mut j = 0;
            loop {
                if j == ups.len() {
                    break;
                }
                ups[j] += 1;
                if ups[j] <= 2 * occupied[j].1 {
                    break;
                }
                ups[j] = 0;
                j += 1;
            }
            if j == ups.len() {
                break;
            }
        }
        rows.push(row.into_iter().collect::<Vec<_>>().into_iter().fold(
            Vec::new(),
            |mut acc, (id, pr)| {
                if acc.len() <= id {
                    acc.resize(id + 1, 0.0);
                }
                acc[id] += pr;
                acc
            },
        ));
        drift.push(d);
        s += 1;
    }

    // square up the rows now that the full state count is known
    let m = states.len();
    for row in &mut rows {
        row.resize(m, 0.0);
    }
    Ok(QuotientChain {
        params,
        states,
        rows,
        drift,
    })
}

/// Solves `pi P = pi`, `sum pi = 1` by dense elimination with partial
/// pivoting; falls back to power iteration if the residual is poor.
pub fn stationary_distribution(chain: &QuotientChain) -> Result<Vec<f64>, ChainError> {
    let m = chain.len();
    let rows = chain.rows();
    if m == 1 {
        return Ok(vec![1.0]);
    }

    let residual = |pi: &[f64]| -> f64 {
        let mut worst = 0f64;
        for j in 0..m {
            let mut acc = 0.0;
            for i in 0..m {
                acc += pi[i] * rows[i][j];
            }
            worst = worst.max((acc - pi[j]).abs());
        }
        worst
    };

    // A x = b with A = P^T - I, last equation replaced by normalization
    let mut a: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| rows[j][i] - if i == j { 1.0 } else { 0.0 })
                .collect()
        })
        .collect();
    a[m - 1] = vec![1.0; m];
    let mut b = vec![0.0; m];
    b[m - 1] = 1.0;

    let mut singular = false;
    for col in 0..m {
        let piv = (col..m)
            .max_by(|&r1, &r2| a[r1][col].abs().total_cmp(&a[r2][col].abs()))
            .unwrap();
        if a[piv][col].abs() < 1e-14 {
            singular = true;
            break;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        let inv = 1.0 / a[col][col];
        let pivot_row: Vec<f64> = a[col][col..].to_vec();
        let pivot_b = b[col];
        for r in 0..m {
            if r == col {
                continue;
            }
            let f = a[r][col] * inv;
            if f == 0.0 {
                continue;
            }
            for (rc, pc) in a[r][col..].iter_mut().zip(&pivot_row) {
                *rc -= f * pc;
            }
            b[r] -= f * pivot_b;
        }
    }

    let mut pi: Vec<f64> = if singular {
        vec![f64::NAN; m]
    } else {
        (0..m).map(|i| b[i] / a[i][i]).collect()
    };

    let acceptable =
        |pi: &[f64]| pi.iter().all(|x| x.is_finite() && *x >= -1e-12) && residual(pi) <= 1e-12;

    if !acceptable(&pi) {
        // power iteration fallback: rows are stochastic, so mass stays put
        pi = vec![1.0 / m as f64; m];
        let mut next = vec![0.0; m];
        for _ in 0..2_000_000 {
            for x in next.iter_mut() {
                *x = 0.0;
            }
            for i in 0..m {
                let w = pi[i];
                if w == 0.0 {
                    continue;
                }
                for j in 0..m {
                    next[j] += w * rows[i][j];
                }
            }
            let diff = pi
                .iter()
                .zip(next.iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0f64, f64::max);
            std::mem::swap(&mut pi, &mut next);
            if diff < 1e-16 {
                break;
            }
        }
        if !acceptable(&pi) {
            return Err(ChainError::Numeric(format!(
                "stationary residual {} above 1e-12",
                residual(&pi)
            )));
        }
    }

    // clear infinitesimal negatives and renormalize
    for x in pi.iter_mut() {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    let total: f64 = pi.iter().sum();
    for x in pi.iter_mut() {
        *x /= total;
    }
    Ok(pi)
}

/// Exact front speed `v_N(p)` of the quotient chain.
pub fn exact_speed(params: ModelParams) -> Result<f64, ChainError> {
    let chain = build_chain(params)?;
    let pi = stationary_distribution(&chain)?;
    Ok(pi
        .iter()
        .zip(chain.drift().iter())
        .map(|(w, d)| w * d)
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(p: f64, n: u64) -> ModelParams {
        ModelParams::new(p, n).unwrap()
    }

    fn class(counts: &[u64]) -> CanonicalClass {
        CanonicalClass::new(counts.to_vec()).unwrap()
    }

    // Frozen against an independent exhaustive enumeration over particle
    // lists with exact rational arithmetic (all 2^(2N) Bernoulli patterns,
    // stationary vector solved over fractions).
    const V_EXACT: &[(f64, [f64; 5])] = &[
        (
            0.25,
            [
                0.4375,
                0.584421641791044776,
                0.639800708574588647,
                0.670283366106481101,
                0.688878563412915961,
            ],
        ),
        (
            0.5,
            [
                0.75,
                0.875,
                0.9168,
                0.937875975664240099,
                0.950441739726271698,
            ],
        ),
        (
            0.75,
            [
                0.9375,
                0.992005813953488372,
                0.998954534181331570,
                0.999871746240514080,
                0.999984877112467903,
            ],
        ),
    ];

    #[test]
    fn single_particle_chain_is_closed_form() {
        for &p in &[0.1, 0.25, 0.5, 0.75, 0.9] {
            let chain = build_chain(params(p, 1)).unwrap();
            assert_eq!(chain.len(), 1);
            let v = exact_speed(params(p, 1)).unwrap();
            let want = 1.0 - (1.0 - p) * (1.0 - p);
            assert!((v - want).abs() < 1e-15, "v_1({p}) = {v}, want {want}");
        }
    }

    #[test]
    fn two_particle_class_space_is_stack_and_split() {
        // the split class can only be one site wide: a child at x+1 always
        // keeps its sibling at >= x, so the runner-up is never 2 below
        let chain = build_chain(params(0.25, 2)).unwrap();
        let mut got: Vec<CanonicalClass> = chain.states().to_vec();
        got.sort();
        let mut want = vec![class(&[2]), class(&[1, 1])];
        want.sort();
        assert_eq!(got, want);
    }

    #[test]
    fn two_particle_transition_row_at_half() {
        let chain = build_chain(params(0.5, 2)).unwrap();
        let stack = chain.index_of(&class(&[2])).unwrap();
        let split = chain.index_of(&class(&[1, 1])).unwrap();
        // from the stack, the split appears iff exactly one of 4 children
        // moves: 4 * (1/2)^4 = 1/4
        assert!((chain.transition(stack, split) - 0.25).abs() < 1e-15);
        assert!((chain.transition(stack, stack) - 0.75).abs() < 1e-15);
        // from the split, the top pair decides: stays split iff its two
        // children split, probability 1/2
        assert!((chain.transition(split, split) - 0.5).abs() < 1e-15);
        assert!((chain.drift()[stack] - 15.0 / 16.0).abs() < 1e-15);
        assert!((chain.drift()[split] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn two_particle_stationary_at_quarter() {
        let chain = build_chain(params(0.25, 2)).unwrap();
        let pi = stationary_distribution(&chain).unwrap();
        let stack = chain.index_of(&class(&[2])).unwrap();
        let split = chain.index_of(&class(&[1, 1])).unwrap();
        assert!((pi[stack] - 40.0 / 67.0).abs() < 1e-13);
        assert!((pi[split] - 27.0 / 67.0).abs() < 1e-13);
    }

    #[test]
    fn class_space_sizes() {
        for (n, want) in [(1u64, 1usize), (2, 2), (3, 5), (4, 8), (5, 21)] {
            let chain = build_chain(params(0.25, n)).unwrap();
            assert_eq!(chain.len(), want, "N={n}");
        }
        // membership spot checks at N=3 (counts anchored at the lowest site)
        let chain = build_chain(params(0.25, 3)).unwrap();
        for c in [
            class(&[3]),
            class(&[2, 1]),
            class(&[1, 2]),
            class(&[1, 1, 1]),
            class(&[1, 0, 2]),
        ] {
            assert!(chain.index_of(&c).is_some(), "missing {c}");
        }
    }

    #[test]
    fn rows_are_stochastic_and_drift_bounded() {
        for n in 1..=5 {
            let chain = build_chain(params(0.3, n)).unwrap();
            for (i, row) in chain.rows().iter().enumerate() {
                let sum: f64 = row.iter().sum();
                assert!((sum - 1.0).abs() < 1e-12, "row {i} sums to {sum}");
                assert!(row.iter().all(|&x| (0.0..=1.0 + 1e-12).contains(&x)));
            }
            for &d in chain.drift() {
                assert!((0.0..=1.0).contains(&d));
            }
            // every class respects the diameter bound
            let bound = crate::dynamics::diameter_bound(n);
            for s in chain.states() {
                assert!(s.diameter() <= bound);
            }
        }
    }

    #[test]
    fn exact_speeds_match_independent_enumeration() {
        for &(p, speeds) in V_EXACT {
            for (i, &want) in speeds.iter().enumerate() {
                let n = i as u64 + 1;
                let v = exact_speed(params(p, n)).unwrap();
                assert!(
                    (v - want).abs() < 1e-12,
                    "v_{n}({p}) = {v:.15}, frozen {want:.15}"
                );
            }
        }
    }

    #[test]
    fn speeds_increase_in_n_and_stay_below_limit() {
        let v_inf = crate::theory::critical_speed(0.25).unwrap();
        let mut prev = 0.0;
        for n in 1..=5 {
            let v = exact_speed(params(0.25, n)).unwrap();
            assert!(v > prev + 1e-12);
            assert!(v < v_inf);
            prev = v;
        }
    }

    #[test]
    fn supercritical_gap_dominates_closed_form_bound() {
        for n in 1..=5u64 {
            let v = exact_speed(params(0.75, n)).unwrap();
            let gap = 1.0 - v;
            let bound = 0.25f64.powi(2 * n as i32);
            assert!(gap >= bound, "N={n}: gap {gap} < bound {bound}");
        }
    }

    #[test]
    fn state_budget_is_enforced() {
        match build_chain_with_budget(params(0.25, 5), 3) {
            Err(ChainError::StateBudget { budget: 3 }) => {}
            other => panic!("expected StateBudget, got {other:?}"),
        }
    }

    /// Stationary weights vs 10^6-step simulated class frequencies. The chain
    /// mixes fast at N=2 (second eigenvalue 1/4), so 5 sigma of the iid
    /// multinomial is a safe band.
    #[test]
    fn stationary_matches_simulation_frequencies() {
        use crate::dynamics::ChainRunner;
        let pr = params(0.5, 2);
        let chain = build_chain(pr).unwrap();
        let pi = stationary_distribution(&chain).unwrap();
        let mut counts = vec![0u64; chain.len()];
        let mut runner = ChainRunner::new(pr, 0xE5717);
        let steps = 1_000_000u64;
        for _ in 0..steps {
            runner.step().unwrap();
            let class = runner
                .pop()
                .translate(-runner.pop().min())
                .unwrap()
                .canonicalize();
            counts[chain.index_of(&class).unwrap()] += 1;
        }
        for (i, &c) in counts.iter().enumerate() {
            let freq = c as f64 / steps as f64;
            let sigma = (pi[i] * (1.0 - pi[i]) / steps as f64).sqrt();
            assert!(
                (freq - pi[i]).abs() < 5.0 * sigma,
                "class {}: freq {freq} vs pi {}",
                chain.states()[i],
                pi[i]
            );
        }
    }
}
