//! Particle populations on the integer lattice.
//!
//! A population is a finite multiset of integer positions stored as a dense
//! count vector over its occupied window `[offset, offset + counts.len())`.
//! Both window edges hold at least one particle, so `counts.len() - 1` is the
//! diameter. Populations are compared in the stochastic order on tail masses:
//! `mu` is below `nu` iff `mu([x, +inf)) <= nu([x, +inf))` for every `x`.

use serde::Serialize;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Errors from parameter validation, population construction, and parsing.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum PopulationError {
    #[error("population must contain at least one particle")]
    Empty,
    #[error("window edges must each hold at least one particle")]
    BareEdge,
    #[error("total mass overflows u64")]
    MassOverflow,
    #[error("position arithmetic overflows i64")]
    PositionOverflow,
    #[error("step probability must lie strictly inside (0, 1), got {0}")]
    InvalidStepProbability(String),
    #[error("population size must be at least 1")]
    InvalidPopulationSize,
    #[error("invalid population literal: {0}")]
    Parse(String),
}

/// Model parameters: per-child up-step probability `p` and population size `N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParams {
    p: f64,
    n: u64,
}

impl ModelParams {
    /// Validates `0 < p < 1` (finite) and `n >= 1`.
    pub fn new(p: f64, n: u64) -> Result<Self, PopulationError> {
        if !p.is_finite() || p <= 0.0 || p >= 1.0 {
            return Err(PopulationError::InvalidStepProbability(format!("{p}")));
        }
        if n == 0 {
            return Err(PopulationError::InvalidPopulationSize);
        }
        Ok(Self { p, n })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn n(&self) -> u64 {
        self.n
    }
}

/// Snapshot of the front geometry of a population.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FrontStats {
    pub min: i64,
    pub max: i64,
    pub diameter: u64,
    pub mass: u64,
}

/// A population of particles with at least one particle at each window edge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Population {
    offset: i64,
    counts: Vec<u64>,
}

impl Population {
    /// Builds a population from its lowest occupied site and per-site counts.
    ///
    /// `counts[i]` is the number of particles at `offset + i`. The first and
    /// last entries must be positive so the window is tight.
    pub fn new(offset: i64, counts: Vec<u64>) -> Result<Self, PopulationError> {
        if counts.is_empty() {
            return Err(PopulationError::Empty);
        }
        if counts[0] == 0 || *counts.last().unwrap() == 0 {
            return Err(PopulationError::BareEdge);
        }
        counts
            .iter()
            .try_fold(0u64, |acc, &c| acc.checked_add(c))
            .ok_or(PopulationError::MassOverflow)?;
        offset
            .checked_add(counts.len() as i64 - 1)
            .ok_or(PopulationError::PositionOverflow)?;
        Ok(Self { offset, counts })
    }

    /// `n` particles stacked on the single site `x`.
    pub fn delta(n: u64, x: i64) -> Result<Self, PopulationError> {
        if n == 0 {
            return Err(PopulationError::Empty);
        }
        Self::new(x, vec![n])
    }

    /// Builds from a count vector that may carry zero edges: trims both ends
    /// and adjusts the offset. Errors only if every count is zero.
    pub fn from_untrimmed(offset: i64, mut counts: Vec<u64>) -> Result<Self, PopulationError> {
        let lead = counts.iter().take_while(|&&c| c == 0).count();
        counts.drain(..lead);
        while counts.last() == Some(&0) {
            counts.pop();
        }
        let offset = offset
            .checked_add(lead as i64)
            .ok_or(PopulationError::PositionOverflow)?;
        Self::new(offset, counts)
    }

    /// Reconstructs a population from a canonical class placed at `offset`.
    pub fn from_class(class: &CanonicalClass, offset: i64) -> Result<Self, PopulationError> {
        Self::new(offset, class.0.clone())
    }

    pub fn offset(&self) -> i64 {
        self.offset
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn min(&self) -> i64 {
        self.offset
    }

    pub fn max(&self) -> i64 {
        self.offset + self.counts.len() as i64 - 1
    }

    pub fn diameter(&self) -> u64 {
        self.counts.len() as u64 - 1
    }

    pub fn mass(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn front_stats(&self) -> FrontStats {
        FrontStats {
            min: self.min(),
            max: self.max(),
            diameter: self.diameter(),
            mass: self.mass(),
        }
    }

    /// Count at absolute position `x` (zero outside the window).
    pub fn site_count(&self, x: i64) -> u64 {
        if x < self.offset {
            return 0;
        }
        let i = (x - self.offset) as usize;
        self.counts.get(i).copied().unwrap_or(0)
    }

    /// Occupied sites as `(position, count)`, lowest first, zero counts skipped.
    pub fn occupied_sites(&self) -> impl Iterator<Item = (i64, u64)> + '_ {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(move |(i, &c)| (self.offset + i as i64, c))
    }

    /// The same population shifted by `dx`.
    pub fn translate(&self, dx: i64) -> Result<Self, PopulationError> {
        let offset = self
            .offset
            .checked_add(dx)
            .ok_or(PopulationError::PositionOverflow)?;
        Self::new(offset, self.counts.clone())
    }

    /// Translation-quotient representative: the count vector anchored at 0.
    pub fn canonicalize(&self) -> CanonicalClass {
        CanonicalClass(self.counts.clone())
    }

    /// Stochastic-order comparison: does `self` sit above `other`?
    ///
    /// True iff `self([x, +inf)) >= other([x, +inf))` for every `x`. Defined
    /// for unequal masses; the comparison at the bottom of the joint window
    /// enforces `self.mass() >= other.mass()`.
    pub fn dominates(&self, other: &Self) -> bool {
        // Tail masses are step functions that jump only at support points, so
        // it suffices to compare after each event position, descending.
        let mut hi_tail = 0u64; // running tail of self
        let mut lo_tail = 0u64; // running tail of other
        let mut x = self.max().max(other.max());
        let stop = self.min().min(other.min());
        loop {
            hi_tail += self.site_count(x);
            lo_tail += other.site_count(x);
            if hi_tail < lo_tail {
                return false;
            }
            if x == stop {
                return true;
            }
            x -= 1;
        }
    }
}

impl fmt::Display for Population {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:[", self.offset)?;
        for (i, c) in self.counts.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, "]")
    }
}

impl FromStr for Population {
    type Err = PopulationError;

    /// Parses the textual form `offset:[c0,c1,...]`, e.g. `0:[3,0,1]`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || PopulationError::Parse(s.to_string());
        let (off_str, rest) = s.split_once(':').ok_or_else(bad)?;
        let offset: i64 = off_str.trim().parse().map_err(|_| bad())?;
        let body = rest
            .trim()
            .strip_prefix('[')
            .and_then(|r| r.strip_suffix(']'))
            .ok_or_else(bad)?;
        let counts = body
            .split(',')
            .map(|t| t.trim().parse::<u64>().map_err(|_| bad()))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(offset, counts)
    }
}

/// A translation class of populations: the count vector anchored at site 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CanonicalClass(Vec<u64>);

impl CanonicalClass {
    /// Validates like `Population::new` with the anchor fixed at 0.
    pub fn new(counts: Vec<u64>) -> Result<Self, PopulationError> {
        Ok(Population::new(0, counts)?.canonicalize())
    }

    pub fn counts(&self) -> &[u64] {
        &self.0
    }

    pub fn mass(&self) -> u64 {
        self.0.iter().sum()
    }

    pub fn diameter(&self) -> u64 {
        self.0.len() as u64 - 1
    }
}

impl fmt::Display for CanonicalClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, "]")
    }
}
