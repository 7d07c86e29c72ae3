//! Monte-Carlo shot generation and the measurement estimator.
//!
//! Shots are drawn from the exact joint outcome table rather than by
//! re-simulating the circuit per shot; the two are statistically identical
//! and the table is O(1) per draw. Draws are chunked into fixed blocks of
//! [`SHOT_CHUNK`], each running its own counter-indexed RNG substream, so
//! the record sequence is a pure function of the seed no matter how many
//! worker threads participate.
//!
//! The copy ledger follows the reuse rule: a shot that lands on branch `j`
//! consumes `j` fresh copies and hands the register's remaining
//! `max_power − j` copies back. A pessimistic accounting mode, used for
//! complexity-table comparisons, instead charges every shot the full
//! register.

use std::fmt::Write as _;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::circuit::JointDistribution;
use crate::coefficients::PolySpec;
use crate::error::{Error, Result};
use crate::states::{trace_power, DensityMatrix};

/// Fixed number of shots per RNG substream.
pub const SHOT_CHUNK: u64 = 4096;

/// One measurement shot: the branch outcome, the signal readout, and the
/// fresh copies it cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShotRecord {
    /// Branch outcome `j` in `1..=n`.
    pub j_outcome: usize,
    /// X readout on the signal qubit, `+1` or `-1`.
    pub x_outcome: i8,
    /// Always equals `j_outcome`: the `max_power − j` untouched copies
    /// are reclaimed.
    pub copies_consumed: usize,
}

/// Aggregate copy-consumption bookkeeping for a batch of shots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CopyLedger {
    pub shots: u64,
    pub fresh_copies_total: u64,
    pub reclaimed_total: u64,
    /// Analytic `Σ_j j·P(j)` under the sampled branch distribution (or the
    /// flat register size in pessimistic mode).
    pub expected_per_shot: f64,
}

/// Estimator output with its uncertainty and cost accounting.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    pub estimate: f64,
    /// Plug-in binomial standard error, `scale·sqrt(1 − mean²)/sqrt(shots)`,
    /// computed on the ±1 readout before the constant shift.
    pub std_error: f64,
    pub shots: u64,
    pub copies: CopyLedger,
    /// Reference value attached by higher layers for reporting; sampling
    /// itself never fills this in.
    pub exact_value: Option<f64>,
    pub spec_degree: usize,
}

/// How the ledger charges copies to each shot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CopyAccounting {
    /// Charge `j` per shot, reclaim the rest (Algorithm 1 step 4).
    Reuse,
    /// Charge the full register (`max_power`) per shot, reclaim nothing.
    Pessimistic,
}

/// Running totals over a batch of shots: everything the estimator and the
/// ledger need, without holding per-shot records. Large shot plans (the
/// Hoeffding bound grows as 1/ε²) stream through this form in constant
/// memory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShotTally {
    pub shots: u64,
    /// Count of `+1` readouts.
    pub plus: u64,
    /// Shots that landed on each branch, indexed by `j − 1`.
    pub branch_counts: Vec<u64>,
}

impl ShotTally {
    /// Folds materialized records into totals, checking each outcome
    /// against the `n` branches.
    pub fn from_records(records: &[ShotRecord], n: usize) -> Result<Self> {
        let mut plus = 0u64;
        let mut branch_counts = vec![0u64; n];
        for r in records {
            if r.j_outcome == 0 || r.j_outcome > n {
                return Err(Error::InvalidArgument(format!(
                    "shot branch {} outside 1..={n}",
                    r.j_outcome
                )));
            }
            if r.x_outcome != 1 && r.x_outcome != -1 {
                return Err(Error::InvalidArgument(format!(
                    "shot readout {} is not ±1",
                    r.x_outcome
                )));
            }
            if r.x_outcome == 1 {
                plus += 1;
            }
            branch_counts[r.j_outcome - 1] += 1;
        }
        Ok(ShotTally {
            shots: records.len() as u64,
            plus,
            branch_counts,
        })
    }
}

/// Inverse-CDF tables for drawing from a joint distribution: cumulative
/// branch marginals, per-branch `P(+1 | j)`, and the highest branch with
/// any mass (the fallback when rounding pushes a uniform draw past the
/// last edge).
struct DrawTables {
    cumulative: Vec<f64>,
    conditionals: Vec<f64>,
    last_reachable: usize,
}

impl DrawTables {
    fn new(dist: &JointDistribution) -> Self {
        let n = dist.branches();
        let mut cumulative = Vec::with_capacity(n);
        let mut acc = 0.0;
        for j in 1..=n {
            acc += dist.marginal(j);
            cumulative.push(acc);
        }
        let conditionals: Vec<f64> = (1..=n).map(|j| dist.conditional_plus(j)).collect();
        let last_reachable = (1..=n)
            .rev()
            .find(|&j| dist.marginal(j) > 0.0)
            .expect("joint table has unit mass");
        DrawTables {
            cumulative,
            conditionals,
            last_reachable,
        }
    }

    /// One shot: two uniform draws, branch then readout.
    fn draw(&self, rng: &mut ChaCha8Rng) -> (usize, i8) {
        let u: f64 = rng.gen();
        let mut j = self.last_reachable;
        for (idx, &edge) in self.cumulative.iter().enumerate() {
            if u < edge {
                j = idx + 1;
                break;
            }
        }
        let x = if rng.gen::<f64>() < self.conditionals[j - 1] {
            1
        } else {
            -1
        };
        (j, x)
    }
}

/// Draws `n_shots` i.i.d. outcomes from the joint table: branch first from
/// the marginal, then the readout from the conditional. Deterministic for
/// a given seed, independent of thread count.
pub fn sample_shots(
    dist: &JointDistribution,
    n_shots: u64,
    seed: u64,
) -> Result<Vec<ShotRecord>> {
    if n_shots == 0 {
        return Err(Error::InvalidArgument("need at least one shot".into()));
    }
    let tables = DrawTables::new(dist);
    let chunks = n_shots.div_ceil(SHOT_CHUNK);
    let blocks: Vec<Vec<ShotRecord>> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk);
            let count = SHOT_CHUNK.min(n_shots - chunk * SHOT_CHUNK);
            let mut block = Vec::with_capacity(count as usize);
            for _ in 0..count {
                let (j, x) = tables.draw(&mut rng);
                block.push(ShotRecord {
                    j_outcome: j,
                    x_outcome: x,
                    copies_consumed: j,
                });
            }
            block
        })
        .collect();
    Ok(blocks.concat())
}

/// [`sample_shots`] reduced to totals on the fly. The draw stream is
/// identical shot for shot (same seed, same chunked substreams), so the
/// tally equals what folding the records would give, at O(1) memory.
pub fn sample_tally(dist: &JointDistribution, n_shots: u64, seed: u64) -> Result<ShotTally> {
    if n_shots == 0 {
        return Err(Error::InvalidArgument("need at least one shot".into()));
    }
    let n = dist.branches();
    let tables = DrawTables::new(dist);
    let chunks = n_shots.div_ceil(SHOT_CHUNK);
    let (plus, branch_counts) = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk);
            let count = SHOT_CHUNK.min(n_shots - chunk * SHOT_CHUNK);
            let mut plus = 0u64;
            let mut counts = vec![0u64; n];
            for _ in 0..count {
                let (j, x) = tables.draw(&mut rng);
                if x == 1 {
                    plus += 1;
                }
                counts[j - 1] += 1;
            }
            (plus, counts)
        })
        .reduce(
            || (0u64, vec![0u64; n]),
            |(pa, mut ca), (pb, cb)| {
                for (a, b) in ca.iter_mut().zip(cb) {
                    *a += b;
                }
                (pa + pb, ca)
            },
        );
    Ok(ShotTally {
        shots: n_shots,
        plus,
        branch_counts,
    })
}

/// Folds a batch of shots into the estimator
/// `const_term + scale·(P₊ − P₋)/N`, where the scale is `γ` in standard
/// mode and `n·γ` in variant mode, with reuse accounting.
pub fn estimate(records: &[ShotRecord], spec: &PolySpec) -> Result<EstimateReport> {
    estimate_with_accounting(records, spec, CopyAccounting::Reuse)
}

/// [`estimate`] with an explicit copy-accounting mode.
pub fn estimate_with_accounting(
    records: &[ShotRecord],
    spec: &PolySpec,
    accounting: CopyAccounting,
) -> Result<EstimateReport> {
    if records.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot estimate from zero shots".into(),
        ));
    }
    let tally = ShotTally::from_records(records, spec.degree())?;
    estimate_from_tally(&tally, spec, accounting)
}

/// The estimator on pre-reduced totals. Per-branch counts stand in for the
/// record stream: the reuse ledger only ever needed how many shots hit
/// each branch.
pub fn estimate_from_tally(
    tally: &ShotTally,
    spec: &PolySpec,
    accounting: CopyAccounting,
) -> Result<EstimateReport> {
    if tally.shots == 0 {
        return Err(Error::InvalidArgument(
            "cannot estimate from zero shots".into(),
        ));
    }
    let n = spec.degree();
    if tally.branch_counts.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "tally covers {} branches, spec has {n}",
            tally.branch_counts.len()
        )));
    }
    let counted: u64 = tally.branch_counts.iter().sum();
    if counted != tally.shots || tally.plus > tally.shots {
        return Err(Error::InvalidArgument(format!(
            "inconsistent tally: {} branch counts and {} plus readouts over {} shots",
            counted, tally.plus, tally.shots
        )));
    }
    let shots = tally.shots;
    let mean = (2.0 * tally.plus as f64 - shots as f64) / shots as f64;
    let scale = spec.estimator_scale();
    let register = spec.max_power();
    let copies = match accounting {
        CopyAccounting::Reuse => {
            let fresh: u64 = tally
                .branch_counts
                .iter()
                .enumerate()
                .map(|(idx, &c)| (idx + 1) as u64 * c)
                .sum();
            let reclaimed: u64 = tally
                .branch_counts
                .iter()
                .enumerate()
                .map(|(idx, &c)| register.saturating_sub(idx + 1) as u64 * c)
                .sum();
            let expected: f64 = spec
                .branch_distribution()
                .iter()
                .enumerate()
                .map(|(idx, p)| (idx + 1) as f64 * p)
                .sum();
            CopyLedger {
                shots,
                fresh_copies_total: fresh,
                reclaimed_total: reclaimed,
                expected_per_shot: expected,
            }
        }
        CopyAccounting::Pessimistic => CopyLedger {
            shots,
            fresh_copies_total: shots * register as u64,
            reclaimed_total: 0,
            expected_per_shot: register as f64,
        },
    };
    Ok(EstimateReport {
        estimate: spec.const_term() + scale * mean,
        std_error: scale * (1.0 - mean * mean).max(0.0).sqrt() / (shots as f64).sqrt(),
        shots,
        copies,
        exact_value: None,
        spec_degree: n,
    })
}

/// Term-by-term baseline: each power gets its own plain SWAP-test-style
/// Bernoulli sample of `tr(ρ^j)`, and the results combine classically as
/// `Σ_j α_j·t̂_j + const`. No copy reuse: every shot of the power-`j` term
/// costs `j` fresh copies.
pub fn baseline_generalized_swap(
    spec: &PolySpec,
    rho: &DensityMatrix,
    shots_per_term: u64,
    seed: u64,
) -> Result<EstimateReport> {
    if shots_per_term == 0 {
        return Err(Error::InvalidArgument(
            "need at least one shot per term".into(),
        ));
    }
    let mut total = spec.const_term();
    let mut variance = 0.0;
    let mut fresh = 0u64;
    let mut copy_weight = 0u64;
    let mut terms = 0u64;
    for (stream, (j, alpha)) in spec
        .powers()
        .filter(|&(_, a)| a != 0.0)
        .enumerate()
    {
        let t = trace_power(rho, j)?;
        let p_plus = (1.0 + t) / 2.0;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream as u64);
        let mut plus = 0u64;
        for _ in 0..shots_per_term {
            if rng.gen::<f64>() < p_plus {
                plus += 1;
            }
        }
        let t_hat = 2.0 * plus as f64 / shots_per_term as f64 - 1.0;
        total += alpha * t_hat;
        variance += alpha * alpha * (1.0 - t_hat * t_hat).max(0.0) / shots_per_term as f64;
        fresh += j as u64 * shots_per_term;
        copy_weight += j as u64;
        terms += 1;
    }
    let shots = terms * shots_per_term;
    Ok(EstimateReport {
        estimate: total,
        std_error: variance.sqrt(),
        shots,
        copies: CopyLedger {
            shots,
            fresh_copies_total: fresh,
            reclaimed_total: 0,
            expected_per_shot: copy_weight as f64 / terms as f64,
        },
        exact_value: None,
        spec_degree: spec.degree(),
    })
}

/// Renders shots as a text stream, one `j x` pair per line.
pub fn dump_shots(records: &[ShotRecord]) -> String {
    let mut out = String::with_capacity(records.len() * 5);
    for r in records {
        let _ = writeln!(out, "{} {:+}", r.j_outcome, r.x_outcome);
    }
    out
}
