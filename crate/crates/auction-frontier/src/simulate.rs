//! Monte Carlo execution of mechanisms, used as an oracle for the analytic evaluators.
//!
//! Trials are split into blocks of [`BLOCK`] draws. Block `j` uses its own ChaCha8 stream
//! (`seed`, stream `j`), so results do not depend on how blocks are scheduled.

use alloc::vec::Vec;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::Serialize;

use crate::allocations::{BidSpace, MechanismSpec};
use crate::distributions::ValueCurve;
use crate::error::{Error, Result};
use crate::invalid;

/// Trials per random stream.
pub const BLOCK: u64 = 4096;

/// Name of the generator, recorded in output metadata.
pub const GENERATOR: &str = "chacha8-stream-per-4096-trials";

/// Sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub stderr: f64,
}

/// Result of a simulation run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub trials: u64,
    pub seed: u64,
    pub revenue: MeanEstimate,
    pub surplus: MeanEstimate,
    pub sale_probability: MeanEstimate,
}

/// Streaming mean and variance (Welford), mergeable across blocks.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    count: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.count += 1.0;
        let d = x - self.mean;
        self.mean += d / self.count;
        self.m2 += d * (x - self.mean);
    }

    fn merge(&mut self, o: &Moments) {
        if o.count == 0.0 {
            return;
        }
        let total = self.count + o.count;
        let d = o.mean - self.mean;
        self.mean += d * o.count / total;
        self.m2 += o.m2 + d * d * self.count * o.count / total;
        self.count = total;
    }

    fn estimate(&self) -> MeanEstimate {
        let stderr = if self.count > 1.0 {
            libm::sqrt(self.m2 / (self.count - 1.0) / self.count)
        } else {
            0.0
        };
        MeanEstimate { mean: self.mean, stderr }
    }
}

/// Uniform draw in the open interval (0, 1).
fn open_unit(rng: &mut ChaCha8Rng) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Outcome of one run of a mechanism: winner index, payment.
struct Outcome {
    winner: Option<usize>,
    payment: f64,
}

fn run_once(spec: &MechanismSpec, values: &[f64], rng: &mut ChaCha8Rng, bids: &mut Vec<Option<f64>>) -> Outcome {
    match spec {
        MechanismSpec::PostedPrice { price } => {
            if values[0] >= *price {
                Outcome {
                    winner: Some(0),
                    payment: *price,
                }
            } else {
                Outcome { winner: None, payment: 0.0 }
            }
        }
        MechanismSpec::Lottery => Outcome {
            winner: Some((rng.next_u64() % values.len() as u64) as usize),
            payment: 0.0,
        },
        MechanismSpec::Mixture { alpha, first, second } => {
            if open_unit(rng) < *alpha {
                run_once(first, values, rng, bids)
            } else {
                run_once(second, values, rng, bids)
            }
        }
        MechanismSpec::SpaWithReserve { reserve } => vickrey_once(&BidSpace::Continuous, *reserve, values, rng, bids),
        MechanismSpec::IndirectVickrey { bids: space, reserve } => vickrey_once(space, *reserve, values, rng, bids),
    }
}

/// Second-price auction over a restricted bid space with uniform tie-breaking and
/// critical-bid payments.
fn vickrey_once(space: &BidSpace, reserve: f64, values: &[f64], rng: &mut ChaCha8Rng, bids: &mut Vec<Option<f64>>) -> Outcome {
    let Some(floor) = space.lowest_at_least(reserve) else {
        return Outcome { winner: None, payment: 0.0 };
    };
    bids.clear();
    bids.extend(values.iter().map(|&v| if v >= floor { space.effective_bid(v).filter(|&b| b >= reserve) } else { None }));
    let top = bids.iter().flatten().cloned().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return Outcome { winner: None, payment: 0.0 };
    }
    let tied = bids.iter().filter(|b| **b == Some(top)).count();
    let pick = (rng.next_u64() % tied as u64) as usize;
    let winner = bids
        .iter()
        .enumerate()
        .filter(|(_, b)| **b == Some(top))
        .nth(pick)
        .map(|(i, _)| i)
        .unwrap_or(0);
    if tied > 1 {
        return Outcome {
            winner: Some(winner),
            payment: top,
        };
    }
    // Unique top bid: the critical bid averages the tie threshold and the next bid above it.
    let second = bids
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != winner)
        .filter_map(|(_, b)| *b)
        .fold(f64::NEG_INFINITY, f64::max);
    let (t, k) = if second == f64::NEG_INFINITY {
        (floor, 0usize)
    } else {
        (second, bids.iter().filter(|b| **b == Some(second)).count())
    };
    let payment = if k == 0 {
        t
    } else {
        let next = space.next_above(t).unwrap_or(t).min(top);
        (t + k as f64 * next) / (k as f64 + 1.0)
    };
    Outcome {
        winner: Some(winner),
        payment,
    }
}

fn check(spec: &MechanismSpec, n: u32, trials: u64) -> Result<()> {
    spec.validate()?;
    if trials == 0 {
        return Err(invalid!("need at least one trial"));
    }
    if n == 0 {
        return Err(invalid!("need at least one buyer"));
    }
    if n > 1 && contains_posted_price(spec) {
        return Err(Error::Unsupported("posted prices are defined for a single buyer".into()));
    }
    Ok(())
}

fn contains_posted_price(spec: &MechanismSpec) -> bool {
    match spec {
        MechanismSpec::PostedPrice { .. } => true,
        MechanismSpec::Mixture { first, second, .. } => contains_posted_price(first) || contains_posted_price(second),
        _ => false,
    }
}

/// Run `trials` independent auctions among `n` buyers with values drawn from `curve`.
pub fn simulate(spec: &MechanismSpec, curve: &ValueCurve, n: u32, trials: u64, seed: u64) -> Result<SimulationReport> {
    check(spec, n, trials)?;
    let mut rev = Moments::default();
    let mut sur = Moments::default();
    let mut sold = Moments::default();
    let mut values = alloc::vec![0.0; n as usize];
    let mut bids = Vec::with_capacity(n as usize);
    let blocks = trials.div_ceil(BLOCK);
    for block in 0..blocks {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(block);
        let count = BLOCK.min(trials - block * BLOCK);
        let (mut r, mut s, mut a) = (Moments::default(), Moments::default(), Moments::default());
        for _ in 0..count {
            for v in values.iter_mut() {
                *v = curve.v(open_unit(&mut rng));
            }
            let out = run_once(spec, &values, &mut rng, &mut bids);
            let (pay, util, won) = match out.winner {
                Some(w) => (out.payment, values[w] - out.payment, 1.0),
                None => (0.0, 0.0, 0.0),
            };
            r.push(pay);
            s.push(util);
            a.push(won);
        }
        rev.merge(&r);
        sur.merge(&s);
        sold.merge(&a);
    }
    Ok(SimulationReport {
        trials,
        seed,
        revenue: rev.estimate(),
        surplus: sur.estimate(),
        sale_probability: sold.estimate(),
    })
}

/// Estimated winning probability of buyer 0 given that her quantile lies in `(lo, hi]`.
pub fn win_rate_in_band(spec: &MechanismSpec, curve: &ValueCurve, n: u32, trials: u64, seed: u64, lo: f64, hi: f64) -> Result<MeanEstimate> {
    check(spec, n, trials)?;
    if !(0.0..=1.0).contains(&lo) || !(lo < hi && hi <= 1.0) {
        return Err(invalid!("band must satisfy 0 <= lo < hi <= 1"));
    }
    let mut wins = Moments::default();
    let mut values = alloc::vec![0.0; n as usize];
    let mut bids = Vec::with_capacity(n as usize);
    let blocks = trials.div_ceil(BLOCK);
    for block in 0..blocks {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(block);
        let count = BLOCK.min(trials - block * BLOCK);
        for _ in 0..count {
            // Buyer 0's quantile is drawn inside the band; the rest are unconditioned.
            let q0 = lo + (hi - lo) * open_unit(&mut rng);
            values[0] = curve.v(q0);
            for v in values.iter_mut().skip(1) {
                *v = curve.v(open_unit(&mut rng));
            }
            let out = run_once(spec, &values, &mut rng, &mut bids);
            wins.push(if out.winner == Some(0) { 1.0 } else { 0.0 });
        }
    }
    Ok(wins.estimate())
}
