//! One-step dynamics and trajectory simulation.
//!
//! A step has two phases: every particle branches into two children, each
//! child independently moving +1 with probability p (so a site holding k
//! particles sends Binomial(2k, p) children up and the rest stay), then only
//! the N rightmost of the 2N children survive. Both phases act on site counts,
//! so a step costs O(diameter), not O(N); populations of astronomical size
//! remain cheap to evolve.
//!
//! After selection the diameter never exceeds `ceil(log2 N) + 1`. That bound
//! is asserted after every step; a violation is reported as a fatal
//! internal-consistency error, never silently repaired.

use crate::population::{ModelParams, Population, PopulationError};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use serde::Serialize;
use std::io::{self, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("binomial success probability must lie in [0, 1], got {0}")]
    InvalidQ(f64),
    #[error("count arithmetic overflows u64 (population too large to branch)")]
    CountOverflow,
    #[error("cannot keep {keep} particles out of mass {mass}")]
    InsufficientMass { mass: u64, keep: u64 },
    #[error("population mass {mass} does not match configured N = {n}")]
    MassMismatch { mass: u64, n: u64 },
    #[error(
        "diameter invariant violated at step {step}: diameter {diameter} > bound {bound} \
         (implementation bug)"
    )]
    DiameterInvariant {
        step: u64,
        diameter: u64,
        bound: u64,
    },
    #[error("record_every must be at least 1")]
    InvalidRecordEvery,
    #[error(transparent)]
    Population(#[from] PopulationError),
}

/// Deterministic, seedable random stream with cheap independent substreams.
///
/// Built on ChaCha8: counter-based, 2^64 independent streams per seed. Child
/// streams for parallel tasks come from `substream(master_seed, task_index)`,
/// so results are reproducible regardless of scheduling.
#[derive(Debug, Clone)]
pub struct RngStream(ChaCha8Rng);

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed))
    }

    /// Independent stream for task `task_index` under one master seed.
    pub fn substream(master_seed: u64, task_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(task_index.wrapping_add(1));
        Self(rng)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.0.gen_bool(p)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.0.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.0.try_fill_bytes(dest)
    }
}

/// Maximum possible diameter after a selection step: `ceil(log2 N) + 1`.
pub fn diameter_bound(n: u64) -> u64 {
    let ceil_log2 = if n <= 1 {
        0
    } else {
        64 - (n - 1).leading_zeros() as u64
    };
    ceil_log2 + 1
}

/// Draws Binomial(n, q). Exact inversion at small expected counts, a
/// numerically stable rejection sampler above (both via `rand_distr`).
pub fn sample_binomial(n: u64, q: f64, rng: &mut RngStream) -> Result<u64, DynamicsError> {
    if !q.is_finite() || !(0.0..=1.0).contains(&q) {
        return Err(DynamicsError::InvalidQ(q));
    }
    if n == 0 || q == 0.0 {
        return Ok(0);
    }
    if q == 1.0 {
        return Ok(n);
    }
    let d = rand_distr::Binomial::new(n, q).map_err(|_| DynamicsError::InvalidQ(q))?;
    Ok(d.sample(&mut rng.0))
}

/// Branching phase: every particle emits two children, each up with
/// probability `p`. Mass exactly doubles; support stays within
/// `[min, max + 1]`.
pub fn branch_step(
    pop: &Population,
    p: f64,
    rng: &mut RngStream,
) -> Result<Population, DynamicsError> {
    let counts = pop.counts();
    let mut out = vec![0u64; counts.len() + 1];
    for (i, &k) in counts.iter().enumerate() {
        if k == 0 {
            continue;
        }
        let children = k.checked_mul(2).ok_or(DynamicsError::CountOverflow)?;
        let up = sample_binomial(children, p, rng)?;
        out[i + 1] += up;
        out[i] += children - up;
    }
    trim_to_population(pop.offset(), out)
}

fn trim_to_population(offset: i64, counts: Vec<u64>) -> Result<Population, DynamicsError> {
    Ok(Population::from_untrimmed(offset, counts)?)
}

/// Selection phase: keep exactly the `keep` rightmost particles.
pub fn select_step(pop: &Population, keep: u64) -> Result<Population, DynamicsError> {
    let mass = pop.mass();
    if keep == 0 || keep > mass {
        return Err(DynamicsError::InsufficientMass { mass, keep });
    }
    let counts = pop.counts();
    let mut kept = vec![0u64; counts.len()];
    let mut remaining = keep;
    let mut lowest = counts.len() - 1;
    for i in (0..counts.len()).rev() {
        let take = counts[i].min(remaining);
        kept[i] = take;
        remaining -= take;
        if remaining == 0 {
            lowest = i;
            break;
        }
    }
    kept.drain(..lowest);
    trim_to_population(pop.offset() + lowest as i64, kept)
}

/// One full chain step: branch, then select back down to `params.n()`.
pub fn chain_step(
    pop: &Population,
    params: &ModelParams,
    rng: &mut RngStream,
) -> Result<Population, DynamicsError> {
    let mass = pop.mass();
    if mass != params.n() {
        return Err(DynamicsError::MassMismatch {
            mass,
            n: params.n(),
        });
    }
    let branched = branch_step(pop, params.p(), rng)?;
    select_step(&branched, params.n())
}

/// Rank-indexed Bernoulli pairs driving one coupled step.
///
/// `draws[r]` holds the two child up-moves of the rank-`r` particle (ranks
/// count from the rightmost particle down). Sharing the same draws between
/// two populations is the monotone coupling: it preserves the stochastic
/// order between them.
pub type RankDraws = Vec<(bool, bool)>;

pub fn draw_ranked(count: u64, p: f64, rng: &mut RngStream) -> Result<RankDraws, DynamicsError> {
    if !p.is_finite() || !(0.0..=1.0).contains(&p) {
        return Err(DynamicsError::InvalidQ(p));
    }
    Ok((0..count)
        .map(|_| (rng.bernoulli(p), rng.bernoulli(p)))
        .collect())
}

/// One synchronized step of two populations under shared rank draws.
///
/// Requires `low.mass() <= high.mass()`; keeps each population's own mass.
/// If `high.dominates(&low)` before the step, it still does after.
pub fn coupled_step(
    low: &Population,
    high: &Population,
    p: f64,
    rng: &mut RngStream,
) -> Result<(Population, Population), DynamicsError> {
    if low.mass() > high.mass() {
        return Err(DynamicsError::InsufficientMass {
            mass: high.mass(),
            keep: low.mass(),
        });
    }
    let draws = draw_ranked(high.mass(), p, rng)?;
    coupled_step_with_draws(low, high, &draws)
}

/// Deterministic core of `coupled_step`, exposed for exhaustive tests.
pub fn coupled_step_with_draws(
    low: &Population,
    high: &Population,
    draws: &RankDraws,
) -> Result<(Population, Population), DynamicsError> {
    let low_next = branch_with_draws(low, draws)?;
    let high_next = branch_with_draws(high, draws)?;
    Ok((
        select_step(&low_next, low.mass())?,
        select_step(&high_next, high.mass())?,
    ))
}

fn branch_with_draws(pop: &Population, draws: &RankDraws) -> Result<Population, DynamicsError> {
    let mass = pop.mass();
    assert!(
        draws.len() as u64 >= mass,
        "need one draw pair per particle of the larger population"
    );
    let counts = pop.counts();
    let mut out = vec![0u64; counts.len() + 1];
    let mut rank = 0usize;
    // ranks are assigned from the rightmost particle down
    for i in (0..counts.len()).rev() {
        for _ in 0..counts[i] {
            let (y1, y2) = draws[rank];
            rank += 1;
            out[i + y1 as usize] += 1;
            out[i + y2 as usize] += 1;
        }
    }
    trim_to_population(pop.offset(), out)
}

/// One sampled point of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TrajectoryRecord {
    pub step: u64,
    pub min: i64,
    pub max: i64,
    pub diameter: u64,
}

/// A recorded run of the chain from `N * delta_0`.
#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub params: ModelParams,
    pub seed: u64,
    pub steps: u64,
    pub record_every: u64,
    pub records: Vec<TrajectoryRecord>,
}

/// Live chain state: population, RNG, step counter, diameter monitoring.
#[derive(Debug, Clone)]
pub struct ChainRunner {
    params: ModelParams,
    pop: Population,
    rng: RngStream,
    bound: u64,
    max_diameter_seen: u64,
    step: u64,
}

impl ChainRunner {
    /// Fresh chain at `N * delta_0` with its own seeded stream.
    pub fn new(params: ModelParams, seed: u64) -> Self {
        Self::with_rng(params, RngStream::new(seed))
    }

    pub fn with_rng(params: ModelParams, rng: RngStream) -> Self {
        let pop = Population::delta(params.n(), 0).expect("params.n() >= 1");
        Self {
            params,
            bound: diameter_bound(params.n()),
            max_diameter_seen: 0,
            pop,
            rng,
            step: 0,
        }
    }

    pub fn pop(&self) -> &Population {
        &self.pop
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn max_diameter_seen(&self) -> u64 {
        self.max_diameter_seen
    }

    /// Advances one step, asserting the post-selection diameter bound.
    pub fn step(&mut self) -> Result<(), DynamicsError> {
        self.pop = chain_step(&self.pop, &self.params, &mut self.rng)?;
        self.step += 1;
        let d = self.pop.diameter();
        self.max_diameter_seen = self.max_diameter_seen.max(d);
        if d > self.bound {
            return Err(DynamicsError::DiameterInvariant {
                step: self.step,
                diameter: d,
                bound: self.bound,
            });
        }
        Ok(())
    }

    pub fn run(&mut self, steps: u64) -> Result<(), DynamicsError> {
        for _ in 0..steps {
            self.step()?;
        }
        Ok(())
    }
}

/// Runs the chain from `N * delta_0` for `steps` steps, recording front
/// geometry at step 0, every `record_every` steps, and the final step.
pub fn evolve(
    params: ModelParams,
    steps: u64,
    record_every: u64,
    seed: u64,
) -> Result<Trajectory, DynamicsError> {
    if record_every == 0 {
        return Err(DynamicsError::InvalidRecordEvery);
    }
    let mut runner = ChainRunner::new(params, seed);
    let record = |r: &ChainRunner| {
        let fs = r.pop().front_stats();
        TrajectoryRecord {
            step: r.step_count(),
            min: fs.min,
            max: fs.max,
            diameter: fs.diameter,
        }
    };
    let mut records = vec![record(&runner)];
    for s in 1..=steps {
        runner.step()?;
        if s % record_every == 0 || s == steps {
            records.push(record(&runner));
        }
    }
    Ok(Trajectory {
        params,
        seed,
        steps,
        record_every,
        records,
    })
}

/// Writes a trajectory as CSV: `#`-prefixed parameter header, column names,
/// one row per record.
pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, mut w: W) -> io::Result<()> {
    writeln!(w, "# bsel trajectory")?;
    writeln!(w, "# p: {}", traj.params.p())?;
    writeln!(w, "# N: {}", traj.params.n())?;
    writeln!(w, "# steps: {}", traj.steps)?;
    writeln!(w, "# record_every: {}", traj.record_every)?;
    writeln!(w, "# seed: {}", traj.seed)?;
    writeln!(w, "step,min,max,diameter")?;
    for r in &traj.records {
        writeln!(w, "{},{},{},{}", r.step, r.min, r.max, r.diameter)?;
    }
    Ok(())
}
