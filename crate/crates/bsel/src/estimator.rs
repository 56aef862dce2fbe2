//! Monte Carlo front-speed estimation and scaling fits.
//!
//! A single run estimates the speed as the mean displacement of the maximum
//! over a post-burn-in window, with a batch-means standard error. Sweeps fan
//! runs over an N-grid with replicates, deterministically seeded so the
//! output is byte-identical regardless of worker count. Fits regress the
//! measured gap `v_inf(p) - v_hat` on the scale appropriate to the regime:
//!
//! ```text
//! subcritical   log(gap) ~ slope * log(log N)   (expected slope -2)
//! critical      log(gap) ~ slope * log(N)       (expected slope -1)
//! supercritical -log(gap) ~ slope * N           (expected slope > 0)
//! ```

use crate::dynamics::{diameter_bound, ChainRunner, DynamicsError};
use crate::population::ModelParams;
use crate::theory::{critical_speed, Regime, TheoryError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error("invalid run controls: {0}")]
    RunControls(String),
    #[error("population grid must be nonempty and strictly ascending")]
    Grid,
    #[error("sweep row (N = {n}, replicate {replicate}) failed: {source}")]
    RowFailed {
        n: u64,
        replicate: u32,
        #[source]
        source: Box<EstimatorError>,
    },
    #[error(
        "gap below noise floor: {} resolvable N values {list:?}, need at least {needed}",
        list.len()
    )]
    NoiseFloor { needed: usize, list: Vec<u64> },
    #[error("worker pool: {0}")]
    Pool(String),
    #[error("sweep CSV: {0}")]
    Csv(String),
    #[error(transparent)]
    Theory(#[from] TheoryError),
    #[error(transparent)]
    Dynamics(Box<DynamicsError>),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<DynamicsError> for EstimatorError {
    fn from(e: DynamicsError) -> Self {
        EstimatorError::Dynamics(Box::new(e))
    }
}

/// One run's speed estimate with its batch-means error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpeedEstimate {
    /// Mean per-step displacement of the maximum after burn-in; in [0, 1].
    pub v_hat: f64,
    /// Standard error of `v_hat` from the batch means.
    pub stderr: f64,
    pub steps: u64,
    pub burnin: u64,
    pub batches: u32,
    pub seed: u64,
    pub max_diameter_seen: u64,
}

/// One (N, replicate) cell of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub p: f64,
    pub n: u64,
    pub replicate: u32,
    pub seed: u64,
    pub steps: u64,
    pub burnin: u64,
    pub batches: u32,
    pub v_hat: f64,
    pub stderr: f64,
    /// Distance to the large-N limit: `critical_speed(p) - v_hat`.
    pub gap_hat: f64,
    pub max_diameter: u64,
}

/// Run controls for a multi-N sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepConfig {
    pub p: f64,
    /// Strictly ascending, nonempty.
    pub n_list: Vec<u64>,
    /// Total steps per run, burn-in included.
    pub steps: u64,
    /// Burn-in override; `None` picks `default_burnin` per N.
    pub burnin: Option<u64>,
    pub batches: u32,
    pub replicates: u32,
    pub master_seed: u64,
    /// Worker threads; 0 lets the pool pick.
    pub jobs: usize,
}

/// One pooled point of a scaling fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitPoint {
    pub n: u64,
    /// Regression abscissa (log log N, log N, or N by regime).
    pub x: f64,
    /// Regression ordinate (log gap or -log gap by regime).
    pub y: f64,
    /// Replicate-pooled gap estimate.
    pub gap: f64,
    /// Standard error of the pooled gap.
    pub stderr: f64,
}

/// Least-squares summary of gap-vs-scale on the regime's natural axes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub regime: Regime,
    pub slope: f64,
    pub intercept: f64,
    /// Squared correlation of the transformed points; in [0, 1].
    pub r2: f64,
    pub points_used: usize,
    /// max/min over N of gap divided by the regime's model scale.
    pub band_ratio: f64,
    pub points: Vec<FitPoint>,
}

/// `ceil(log2 n)` for `n >= 1`.
fn ceil_log2(n: u64) -> u64 {
    diameter_bound(n) - 1
}

/// Default burn-in: `10 * ceil(log2 N)^3`, nudged up so the remaining span
/// divides evenly into `batches`.
pub fn default_burnin(n: u64, steps: u64, batches: u32) -> u64 {
    let c = ceil_log2(n);
    let base = 10 * c * c * c;
    if steps <= base || batches == 0 {
        return base;
    }
    base + (steps - base) % u64::from(batches)
}

/// Runs one chain and estimates the speed by batch means.
///
/// The window `[burnin, steps]` splits into `batches` equal blocks; `v_hat`
/// is the overall mean displacement of the maximum per step, and `stderr` is
/// the sample standard deviation of the per-block means divided by
/// `sqrt(batches)`.
pub fn estimate_speed(
    params: ModelParams,
    steps: u64,
    burnin: u64,
    batches: u32,
    seed: u64,
) -> Result<SpeedEstimate, EstimatorError> {
    if batches < 8 {
        return Err(EstimatorError::RunControls(format!(
            "need at least 8 batches for a usable error bar, got {batches}"
        )));
    }
    if steps <= burnin {
        return Err(EstimatorError::RunControls(format!(
            "steps ({steps}) must exceed burnin ({burnin})"
        )));
    }
    let span = steps - burnin;
    if !span.is_multiple_of(u64::from(batches)) {
        return Err(EstimatorError::RunControls(format!(
            "measurement span {span} does not divide into {batches} batches"
        )));
    }
    let len = span / u64::from(batches);
    let mut runner = ChainRunner::new(params, seed);
    for _ in 0..burnin {
        runner.step()?;
    }
    let start = runner.pop().max();
    let mut means = Vec::with_capacity(batches as usize);
    let mut prev = start;
    for _ in 0..batches {
        for _ in 0..len {
            runner.step()?;
        }
        let now = runner.pop().max();
        means.push((now - prev) as f64 / len as f64);
        prev = now;
    }
    // the mean of the batch means telescopes to the overall mean
    let v_hat = (prev - start) as f64 / span as f64;
    let var = means.iter().map(|m| (m - v_hat).powi(2)).sum::<f64>() / (f64::from(batches) - 1.0);
    let stderr = (var / f64::from(batches)).sqrt();
    Ok(SpeedEstimate {
        v_hat,
        stderr,
        steps,
        burnin,
        batches,
        seed,
        max_diameter_seen: runner.max_diameter_seen(),
    })
}

/// SplitMix64 output at `index` of the stream seeded by `master`.
fn child_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add((index + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs the full (N, replicate) grid on a worker pool.
///
/// Child seeds depend only on `(master_seed, row index)`, and rows come back
/// sorted by `(N, replicate)`, so the output is byte-identical for any `jobs`.
pub fn sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>, EstimatorError> {
    if cfg.n_list.is_empty() || cfg.n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(EstimatorError::Grid);
    }
    if cfg.replicates == 0 {
        return Err(EstimatorError::RunControls(
            "replicates must be at least 1".into(),
        ));
    }
    // validates p once up front; every per-row construction then succeeds
    ModelParams::new(cfg.p, cfg.n_list[0])
        .map_err(|e| EstimatorError::RunControls(e.to_string()))?;
    let v_inf = critical_speed(cfg.p)?;

    struct Task {
        n: u64,
        replicate: u32,
        seed: u64,
        burnin: u64,
    }
    let tasks: Vec<Task> = cfg
        .n_list
        .iter()
        .enumerate()
        .flat_map(|(i, &n)| {
            (0..cfg.replicates).map(move |rep| {
                let index = i as u64 * u64::from(cfg.replicates) + u64::from(rep);
                Task {
                    n,
                    replicate: rep,
                    seed: child_seed(cfg.master_seed, index),
                    burnin: cfg
                        .burnin
                        .unwrap_or_else(|| default_burnin(n, cfg.steps, cfg.batches)),
                }
            })
        })
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| EstimatorError::Pool(e.to_string()))?;
    let mut rows: Vec<SweepRow> = pool.install(|| {
        tasks
            .par_iter()
            .map(|t| {
                let run = || -> Result<SweepRow, EstimatorError> {
                    let params = ModelParams::new(cfg.p, t.n)
                        .map_err(|e| EstimatorError::RunControls(e.to_string()))?;
                    let est = estimate_speed(params, cfg.steps, t.burnin, cfg.batches, t.seed)?;
                    Ok(SweepRow {
                        p: cfg.p,
                        n: t.n,
                        replicate: t.replicate,
                        seed: t.seed,
                        steps: cfg.steps,
                        burnin: t.burnin,
                        batches: cfg.batches,
                        v_hat: est.v_hat,
                        stderr: est.stderr,
                        gap_hat: v_inf - est.v_hat,
                        max_diameter: est.max_diameter_seen,
                    })
                };
                run().map_err(|e| EstimatorError::RowFailed {
                    n: t.n,
                    replicate: t.replicate,
                    source: Box::new(e),
                })
            })
            .collect::<Result<Vec<_>, _>>()
    })?;
    rows.sort_by_key(|r| (r.n, r.replicate));
    Ok(rows)
}

/// Pools each N's replicates by inverse-variance weighting.
///
/// Rows with zero standard error carry infinite weight: if any are present
/// for an N, the pooled value is their plain mean with zero pooled error.
fn pool_by_n(rows: &[SweepRow]) -> Vec<(u64, f64, f64)> {
    let mut by_n: BTreeMap<u64, Vec<&SweepRow>> = BTreeMap::new();
    for row in rows {
        by_n.entry(row.n).or_default().push(row);
    }
    by_n.into_iter()
        .map(|(n, group)| {
            let exact: Vec<&&SweepRow> = group.iter().filter(|r| r.stderr == 0.0).collect();
            if !exact.is_empty() {
                let gap = exact.iter().map(|r| r.gap_hat).sum::<f64>() / exact.len() as f64;
                (n, gap, 0.0)
            } else {
                let wsum: f64 = group.iter().map(|r| (r.stderr * r.stderr).recip()).sum();
                let gap = group
                    .iter()
                    .map(|r| r.gap_hat / (r.stderr * r.stderr))
                    .sum::<f64>()
                    / wsum;
                (n, gap, wsum.recip().sqrt())
            }
        })
        .collect()
}

/// Regression axes for one pooled point.
fn transform(regime: Regime, n: u64, gap: f64) -> (f64, f64) {
    let nf = n as f64;
    match regime {
        Regime::Subcritical => (nf.ln().ln(), gap.ln()),
        Regime::Critical => (nf.ln(), gap.ln()),
        Regime::Supercritical => (nf, -gap.ln()),
    }
}

/// log(gap / model-scale) for the band-ratio diagnostic.
fn log_scale_ratio(regime: Regime, n: u64, gap: f64) -> f64 {
    let nf = n as f64;
    match regime {
        Regime::Subcritical => gap.ln() + 2.0 * nf.ln().ln(),
        Regime::Critical => gap.ln() + nf.ln(),
        Regime::Supercritical => gap.ln() + nf,
    }
}

/// Fits the pooled gaps against the regime's scale.
///
/// Points must resolve the gap (`gap > 3 * stderr`) and lie in the
/// transform's domain (`N >= 2` for the subcritical double log); at least 4
/// distinct N must survive.
pub fn fit_scaling(rows: &[SweepRow], regime: Regime) -> Result<FitReport, EstimatorError> {
    const NEEDED: usize = 4;
    let usable: Vec<(u64, f64, f64)> = pool_by_n(rows)
        .into_iter()
        .filter(|&(n, gap, stderr)| gap > 3.0 * stderr && (regime != Regime::Subcritical || n >= 2))
        .collect();
    if usable.len() < NEEDED {
        return Err(EstimatorError::NoiseFloor {
            needed: NEEDED,
            list: usable.iter().map(|&(n, _, _)| n).collect(),
        });
    }
    let points: Vec<FitPoint> = usable
        .iter()
        .map(|&(n, gap, stderr)| {
            let (x, y) = transform(regime, n, gap);
            FitPoint {
                n,
                x,
                y,
                gap,
                stderr,
            }
        })
        .collect();

    let m = points.len() as f64;
    let xm = points.iter().map(|pt| pt.x).sum::<f64>() / m;
    let ym = points.iter().map(|pt| pt.y).sum::<f64>() / m;
    let sxx: f64 = points.iter().map(|pt| (pt.x - xm).powi(2)).sum();
    let sxy: f64 = points.iter().map(|pt| (pt.x - xm) * (pt.y - ym)).sum();
    let syy: f64 = points.iter().map(|pt| (pt.y - ym).powi(2)).sum();
    if sxx == 0.0 {
        return Err(EstimatorError::RunControls(
            "degenerate fit: all abscissa values coincide".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };

    let ratios: Vec<f64> = usable
        .iter()
        .map(|&(n, gap, _)| log_scale_ratio(regime, n, gap))
        .collect();
    let band_ratio = (ratios.iter().copied().fold(f64::MIN, f64::max)
        - ratios.iter().copied().fold(f64::MAX, f64::min))
    .exp();

    Ok(FitReport {
        regime,
        slope,
        intercept,
        r2,
        points_used: points.len(),
        band_ratio,
        points,
    })
}

pub const SWEEP_CSV_HEADER: &str =
    "p,N,replicate,seed,steps,burnin,batches,v_hat,stderr,gap_hat,max_diameter";

/// Writes `# key = value` metadata lines, the header, then one line per row.
///
/// Floats use the shortest round-tripping decimal form, so equal rows always
/// produce equal bytes.
pub fn write_sweep_csv<W: Write>(
    out: &mut W,
    rows: &[SweepRow],
    meta: &[(&str, String)],
) -> std::io::Result<()> {
    for (key, value) in meta {
        writeln!(out, "# {key} = {value}")?;
    }
    writeln!(out, "{SWEEP_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.p,
            r.n,
            r.replicate,
            r.seed,
            r.steps,
            r.burnin,
            r.batches,
            r.v_hat,
            r.stderr,
            r.gap_hat,
            r.max_diameter
        )?;
    }
    Ok(())
}

/// Reads a sweep CSV produced by [`write_sweep_csv`]: metadata and blank
/// lines are skipped, the header is checked, floats round-trip exactly.
pub fn read_sweep_csv<R: BufRead>(input: R) -> Result<Vec<SweepRow>, EstimatorError> {
    fn field<T: std::str::FromStr>(
        raw: &str,
        line: usize,
        name: &str,
    ) -> Result<T, EstimatorError> {
        raw.parse()
            .map_err(|_| EstimatorError::Csv(format!("line {line}: bad {name} field {raw:?}")))
    }

    let mut rows = Vec::new();
    let mut saw_header = false;
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let lineno = i + 1;
        if !saw_header {
            if text != SWEEP_CSV_HEADER {
                return Err(EstimatorError::Csv(format!(
                    "line {lineno}: unexpected header {text:?}"
                )));
            }
            saw_header = true;
            continue;
        }
        let f: Vec<&str> = text.split(',').collect();
        if f.len() != 11 {
            return Err(EstimatorError::Csv(format!(
                "line {lineno}: expected 11 fields, got {}",
                f.len()
            )));
        }
        rows.push(SweepRow {
            p: field(f[0], lineno, "p")?,
            n: field(f[1], lineno, "N")?,
            replicate: field(f[2], lineno, "replicate")?,
            seed: field(f[3], lineno, "seed")?,
            steps: field(f[4], lineno, "steps")?,
            burnin: field(f[5], lineno, "burnin")?,
            batches: field(f[6], lineno, "batches")?,
            v_hat: field(f[7], lineno, "v_hat")?,
            stderr: field(f[8], lineno, "stderr")?,
            gap_hat: field(f[9], lineno, "gap_hat")?,
            max_diameter: field(f[10], lineno, "max_diameter")?,
        });
    }
    if !saw_header {
        return Err(EstimatorError::Csv("missing header line".into()));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact_chain::exact_speed;

    fn params(p: f64, n: u64) -> ModelParams {
        ModelParams::new(p, n).unwrap()
    }

    /// Synthetic replicate-free rows with a planted gap law.
    fn planted_rows(p: f64, ns: &[u64], gap: impl Fn(u64) -> f64) -> Vec<SweepRow> {
        ns.iter()
            .map(|&n| SweepRow {
                p,
                n,
                replicate: 0,
                seed: 0,
                steps: 0,
                burnin: 0,
                batches: 8,
                v_hat: 0.0,
                stderr: 1e-9,
                gap_hat: gap(n),
                max_diameter: 0,
            })
            .collect()
    }

    #[test]
    fn run_controls_are_validated() {
        let pr = params(0.25, 4);
        assert!(matches!(
            estimate_speed(pr, 1000, 0, 7, 1),
            Err(EstimatorError::RunControls(_))
        ));
        assert!(matches!(
            estimate_speed(pr, 100, 100, 8, 1),
            Err(EstimatorError::RunControls(_))
        ));
        assert!(matches!(
            estimate_speed(pr, 109, 0, 8, 1),
            Err(EstimatorError::RunControls(_))
        ));
    }

    #[test]
    fn default_burnin_divides_the_span() {
        for n in [1u64, 2, 5, 32, 1000] {
            for batches in [8u32, 16, 24] {
                let steps = 100_000;
                let burnin = default_burnin(n, steps, batches);
                let c = ceil_log2(n);
                assert!(burnin >= 10 * c * c * c);
                assert!(burnin - 10 * c * c * c < u64::from(batches));
                assert_eq!((steps - burnin) % u64::from(batches), 0, "n={n}");
            }
        }
        assert_eq!(default_burnin(1, 1_000, 8), 0);
        assert_eq!(default_burnin(32, 2_000, 8), 1250 + (2_000 - 1250) % 8);
    }

    #[test]
    fn single_particle_speed_matches_closed_form() {
        // v_1(p) = P(at least one of two children steps) = 1 - (1-p)^2
        let est = estimate_speed(params(0.25, 1), 1_000_000, 0, 16, 0xBEE5).unwrap();
        assert!(est.stderr > 0.0 && est.stderr < 2e-3);
        assert!(
            (est.v_hat - 0.4375).abs() < 3.0 * est.stderr,
            "v_hat {} err {}",
            est.v_hat,
            est.stderr
        );
        assert!((0.0..=1.0).contains(&est.v_hat));
        assert_eq!(est.max_diameter_seen, 0);
    }

    #[test]
    fn saturated_step_probability_pins_the_speed() {
        // advance fails only if both children of the top particle stay, so
        // with p this close to 1 a run of 2000 steps advances every step
        let est = estimate_speed(params(1.0 - 1e-12, 3), 2_000, 0, 8, 7).unwrap();
        assert_eq!(est.v_hat, 1.0);
        assert_eq!(est.stderr, 0.0);
        // mirrored at the bottom: moves are ~1e-12 rare, none in 2000 steps
        let est = estimate_speed(params(1e-12, 3), 2_000, 0, 8, 7).unwrap();
        assert_eq!(est.v_hat, 0.0);
        assert_eq!(est.stderr, 0.0);
    }

    #[test]
    fn batch_error_shrinks_with_run_length() {
        // pooled (rms over seeds) batch-means stderr should fall like
        // 1/sqrt(steps): the four-doubling geometric mean ratio sits near
        // 1/sqrt(2), well inside [0.6, 0.85]
        let pr = params(0.25, 32);
        let base = 24_000u64;
        let mut pooled = Vec::new();
        for level in 0..5 {
            let steps = base << level;
            let burnin = default_burnin(32, steps, 16);
            let mut acc = 0.0;
            for seed in 0..6u64 {
                let est = estimate_speed(pr, steps, burnin, 16, 0xA5 + seed).unwrap();
                acc += est.stderr * est.stderr;
            }
            pooled.push((acc / 6.0).sqrt());
        }
        for w in pooled.windows(2) {
            assert!(w[1] < w[0], "pooled stderr not decreasing: {pooled:?}");
        }
        let overall = (pooled[4] / pooled[0]).powf(0.25);
        assert!(
            (0.6..=0.85).contains(&overall),
            "per-doubling ratio {overall} from {pooled:?}"
        );
    }

    #[test]
    fn planted_subcritical_law_is_recovered() {
        let rows = planted_rows(0.25, &[16, 64, 256, 1024, 4096], |n| {
            4.0 / (n as f64).ln().powi(2)
        });
        let fit = fit_scaling(&rows, Regime::Subcritical).unwrap();
        assert!((fit.slope + 2.0).abs() < 1e-6, "slope {}", fit.slope);
        assert!(fit.r2 > 0.999_999);
        assert!((fit.intercept - 4f64.ln()).abs() < 1e-6);
        assert!(fit.band_ratio >= 1.0 && fit.band_ratio < 1.0 + 1e-9);
        assert_eq!(fit.points_used, 5);
    }

    #[test]
    fn planted_critical_law_is_recovered() {
        let rows = planted_rows(0.5, &[8, 16, 32, 64, 128], |n| 3.0 / n as f64);
        let fit = fit_scaling(&rows, Regime::Critical).unwrap();
        assert!((fit.slope + 1.0).abs() < 1e-6);
        assert!(fit.r2 > 0.999_999);
        assert!(fit.band_ratio < 1.0 + 1e-9);
    }

    #[test]
    fn planted_supercritical_law_is_recovered() {
        let rows = planted_rows(0.75, &[4, 8, 12, 16, 20], |n| (-0.7 * n as f64).exp());
        let fit = fit_scaling(&rows, Regime::Supercritical).unwrap();
        assert!((fit.slope - 0.7).abs() < 1e-6);
        assert!(fit.r2 > 0.999_999);
    }

    #[test]
    fn fit_pools_replicates_by_inverse_variance() {
        let mut rows = planted_rows(0.25, &[16, 64, 256, 1024], |n| {
            1.0 / (n as f64).ln().powi(2)
        });
        for r in &mut rows {
            r.stderr = 1e-4;
        }
        // second replicate at N=16 with double the error: weight 1/4
        let mut extra = rows[0];
        extra.replicate = 1;
        extra.stderr = 2e-4;
        extra.gap_hat = rows[0].gap_hat + 0.05;
        rows.push(extra);
        let fit = fit_scaling(&rows, Regime::Subcritical).unwrap();
        let pooled = fit.points.iter().find(|pt| pt.n == 16).unwrap();
        let want = rows[0].gap_hat + 0.05 / 5.0;
        assert!((pooled.gap - want).abs() < 1e-12);
        assert!((pooled.stderr - (1.0f64 / (1e8 + 0.25e8)).sqrt()).abs() < 1e-12);

        // a zero-error replicate takes over entirely
        let mut exact = rows[0];
        exact.replicate = 2;
        exact.stderr = 0.0;
        exact.gap_hat = 0.123;
        rows.push(exact);
        let fit = fit_scaling(&rows, Regime::Subcritical).unwrap();
        let pooled = fit.points.iter().find(|pt| pt.n == 16).unwrap();
        assert_eq!(pooled.gap, 0.123);
        assert_eq!(pooled.stderr, 0.0);
    }

    #[test]
    fn unresolved_gaps_fail_with_the_usable_subset() {
        let mut rows = planted_rows(0.25, &[16, 64, 256, 1024], |_| 1e-3);
        rows[0].stderr = 1e-2; // N=16 drowned in noise
        match fit_scaling(&rows, Regime::Subcritical) {
            Err(EstimatorError::NoiseFloor { needed: 4, list }) => {
                assert_eq!(list, vec![64, 256, 1024]);
            }
            other => panic!("expected NoiseFloor, got {other:?}"),
        }
    }

    #[test]
    fn sweep_output_is_independent_of_worker_count() {
        let mut cfg = SweepConfig {
            p: 0.25,
            n_list: vec![1, 2, 4],
            steps: 12_000,
            burnin: None,
            batches: 8,
            replicates: 2,
            master_seed: 99,
            jobs: 1,
        };
        let serial = sweep(&cfg).unwrap();
        cfg.jobs = 4;
        let parallel = sweep(&cfg).unwrap();
        assert_eq!(serial, parallel);

        let mut a = Vec::new();
        let meta = [("p", "0.25".to_string()), ("master_seed", "99".to_string())];
        write_sweep_csv(&mut a, &serial, &meta).unwrap();
        let mut b = Vec::new();
        write_sweep_csv(&mut b, &parallel, &meta).unwrap();
        assert_eq!(a, b, "CSV bytes differ between jobs=1 and jobs=4");

        // sorted rows, distinct per-row seeds
        for w in serial.windows(2) {
            assert!((w[0].n, w[0].replicate) < (w[1].n, w[1].replicate));
        }
        for (i, r) in serial.iter().enumerate() {
            for other in &serial[i + 1..] {
                assert_ne!(r.seed, other.seed);
            }
        }
    }

    #[test]
    fn sweep_rejects_bad_grids() {
        let cfg = SweepConfig {
            p: 0.25,
            n_list: vec![],
            steps: 1_000,
            burnin: Some(0),
            batches: 8,
            replicates: 1,
            master_seed: 0,
            jobs: 1,
        };
        assert!(matches!(sweep(&cfg), Err(EstimatorError::Grid)));
        let cfg = SweepConfig {
            n_list: vec![4, 4],
            ..cfg
        };
        assert!(matches!(sweep(&cfg), Err(EstimatorError::Grid)));
    }

    #[test]
    fn sweep_failures_identify_the_row() {
        let cfg = SweepConfig {
            p: 0.25,
            n_list: vec![1, 2],
            steps: 100,
            burnin: Some(100), // steps <= burnin: every row fails
            batches: 8,
            replicates: 1,
            master_seed: 0,
            jobs: 1,
        };
        match sweep(&cfg) {
            Err(EstimatorError::RowFailed { n, replicate, .. }) => {
                assert!(n == 1 || n == 2);
                assert_eq!(replicate, 0);
            }
            other => panic!("expected RowFailed, got {other:?}"),
        }
    }

    #[test]
    fn gap_shrinks_between_small_and_large_populations() {
        let cfg = SweepConfig {
            p: 0.25,
            n_list: vec![16, 64],
            steps: 200_000,
            burnin: None,
            batches: 16,
            replicates: 4,
            master_seed: 0xF00D,
            jobs: 1,
        };
        let rows = sweep(&cfg).unwrap();
        for r in &rows {
            assert!(
                r.gap_hat >= -3.0 * r.stderr,
                "gap {} below noise",
                r.gap_hat
            );
        }
        let pooled = pool_by_n(&rows);
        let (_, gap16, s16) = pooled[0];
        let (_, gap64, s64) = pooled[1];
        let joint = (s16 * s16 + s64 * s64).sqrt();
        assert!(
            gap16 - gap64 > 3.0 * joint,
            "gap(16) = {gap16} +- {s16}, gap(64) = {gap64} +- {s64}"
        );
    }

    #[test]
    fn sweep_agrees_with_exact_speed_at_small_n() {
        let cfg = SweepConfig {
            p: 0.5,
            n_list: vec![8],
            steps: 150_000,
            burnin: None,
            batches: 16,
            replicates: 4,
            master_seed: 0xACE,
            jobs: 1,
        };
        let rows = sweep(&cfg).unwrap();
        let (_, gap, stderr) = pool_by_n(&rows)[0];
        let exact_gap = 1.0 - exact_speed(params(0.5, 8)).unwrap();
        assert!(
            (gap - exact_gap).abs() < 3.0 * stderr,
            "pooled gap {gap} +- {stderr}, exact {exact_gap}"
        );
    }

    #[test]
    fn csv_round_trips_exactly() {
        let cfg = SweepConfig {
            p: 0.3,
            n_list: vec![2, 4],
            steps: 10_000,
            burnin: None,
            batches: 8,
            replicates: 2,
            master_seed: 5,
            jobs: 1,
        };
        let rows = sweep(&cfg).unwrap();
        let mut buf = Vec::new();
        let meta = [("note", "round trip".to_string())];
        write_sweep_csv(&mut buf, &rows, &meta).unwrap();
        let back = read_sweep_csv(buf.as_slice()).unwrap();
        assert_eq!(rows, back);

        assert!(matches!(
            read_sweep_csv("a,b\n1,2\n".as_bytes()),
            Err(EstimatorError::Csv(_))
        ));
        let truncated = format!("{SWEEP_CSV_HEADER}\n1,2,3\n");
        assert!(matches!(
            read_sweep_csv(truncated.as_bytes()),
            Err(EstimatorError::Csv(_))
        ));
    }
}
