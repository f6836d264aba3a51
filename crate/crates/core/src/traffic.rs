//! Seeded traffic generation and high/low load calibration.
//!
//! Random numbers come from a counter-based SplitMix64 stream: draw `i` of
//! stream `s` under seed `x` is `mix64(key(x, s) + i * 0x9E3779B97F4A7C15)`
//! with `key(x, s) = mix64(x ^ mix64(s + 0x9E3779B97F4A7C15))`. Request `i`
//! uses draws `2i` (node pair) and `2i + 1` (rate). Integers in `[0, n)` are
//! taken as the high 64 bits of `draw * n`. The scheme is stateless, so the
//! first `n` requests of a seed never depend on how many are generated.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmt::{ReachTable, ScenarioKind};
use crate::provision::{provision_request, Planner, Request};
use crate::spp::ProtectionMode;
use crate::state::NetworkState;
use crate::topology::{NodeId, Topology};

pub const RATES_GBPS: [u32; 3] = [100, 200, 300];
const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const REQUEST_STREAM: u64 = 1;

pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stateless counter-based generator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CounterRng {
    key: u64,
}

impl CounterRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        CounterRng {
            key: mix64(seed ^ mix64(stream.wrapping_add(GOLDEN))),
        }
    }

    pub fn at(&self, counter: u64) -> u64 {
        mix64(self.key.wrapping_add(counter.wrapping_mul(GOLDEN)))
    }

    /// Integer in `[0, n)`.
    pub fn below(&self, counter: u64, n: u64) -> u64 {
        ((self.at(counter) as u128 * n as u128) >> 64) as u64
    }

    /// Float in `[0, 1)` with 53 random bits.
    pub fn unit(&self, counter: u64) -> f64 {
        (self.at(counter) >> 11) as f64 / (1u64 << 53) as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrafficConfig {
    pub seed: u64,
    pub count: usize,
}

/// Request `index` of the stream for `seed`. Uniform over ordered distinct
/// node pairs, rate uniform over [`RATES_GBPS`].
pub fn request_at(seed: u64, index: usize, node_count: usize) -> Request {
    let rng = CounterRng::new(seed, REQUEST_STREAM);
    let n = node_count as u64;
    let pair = rng.below(2 * index as u64, n * (n - 1));
    let src = pair / (n - 1);
    let d = pair % (n - 1);
    let dst = if d < src { d } else { d + 1 };
    let rate = RATES_GBPS[rng.below(2 * index as u64 + 1, RATES_GBPS.len() as u64) as usize];
    Request {
        id: index as u32,
        src: NodeId(src as usize),
        dst: NodeId(dst as usize),
        rate_gbps: rate,
    }
}

pub fn generate(config: &TrafficConfig, topology: &Topology) -> Vec<Request> {
    (0..config.count)
        .map(|i| request_at(config.seed, i, topology.node_count()))
        .collect()
}

/// Seed of replica `r` in calibration runs.
pub fn replica_seed(seed: u64, replica: usize) -> u64 {
    seed.wrapping_add(replica as u64)
}

#[derive(Clone, Debug)]
pub struct CalibrationParams<'a> {
    pub topology: &'a Topology,
    pub table: &'a ReachTable,
    pub scenario: ScenarioKind,
    pub mode: ProtectionMode,
    pub wavelengths: usize,
    pub k: usize,
    pub target_rejection: f64,
    pub seed: u64,
    pub replicas: usize,
    pub max_requests: usize,
}

impl<'a> CalibrationParams<'a> {
    /// SMT with dedicated protection at 1% rejection over 10 replicas.
    pub fn high_load(topology: &'a Topology, table: &'a ReachTable, wavelengths: usize, k: usize, seed: u64) -> Self {
        CalibrationParams {
            topology,
            table,
            scenario: ScenarioKind::Smt,
            mode: ProtectionMode::Dpp,
            wavelengths,
            k,
            target_rejection: 0.01,
            seed,
            replicas: 10,
            max_requests: 1 << 16,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub high: usize,
    pub low: usize,
    pub mean_rejection_at_high: f64,
    /// Every (count, mean rejection) the search evaluated, in order.
    pub evaluations: Vec<(usize, f64)>,
}

/// One replica simulated incrementally; rejection of the first `n` requests
/// is read off the cumulative record.
struct Replica<'a> {
    planner: Planner<'a>,
    mode: ProtectionMode,
    seed: u64,
    state: NetworkState,
    rejected_prefix: Vec<usize>,
}

impl Replica<'_> {
    fn extend_to(&mut self, n: usize) {
        let nodes = self.planner.topology.node_count();
        while self.rejected_prefix.len() < n {
            let i = self.rejected_prefix.len();
            let r = request_at(self.seed, i, nodes);
            let rejected = provision_request(&mut self.state, &self.planner, &r, self.mode).is_none();
            let before = self.rejected_prefix.last().copied().unwrap_or(0);
            self.rejected_prefix.push(before + rejected as usize);
        }
    }

    fn rejection(&self, n: usize) -> f64 {
        self.rejected_prefix[n - 1] as f64 / n as f64
    }
}

/// Smallest request count whose mean rejection over the replicas reaches the
/// target. Low load is half of it, rounded up.
pub fn calibrate_high_load(params: &CalibrationParams<'_>) -> Result<Calibration> {
    if !(params.target_rejection > 0.0 && params.target_rejection <= 1.0) {
        return Err(Error::InvalidArgument("target rejection must be in (0, 1]".into()));
    }
    if params.replicas == 0 {
        return Err(Error::InvalidArgument("at least one replica is needed".into()));
    }
    let planner = Planner::new(params.topology, params.table, params.scenario, params.k);
    let mut replicas: Vec<Replica<'_>> = (0..params.replicas)
        .map(|r| Replica {
            planner,
            mode: params.mode,
            seed: replica_seed(params.seed, r),
            state: planner.new_state(params.wavelengths),
            rejected_prefix: Vec::new(),
        })
        .collect();
    let mut evaluations = Vec::new();
    let mut mean_at = |n: usize, evaluations: &mut Vec<(usize, f64)>| -> f64 {
        replicas.par_iter_mut().for_each(|r| r.extend_to(n));
        let m = replicas.iter().map(|r| r.rejection(n)).sum::<f64>() / replicas.len() as f64;
        evaluations.push((n, m));
        m
    };

    let target = params.target_rejection;
    let first = mean_at(1, &mut evaluations);
    let (high, at_high) = if first >= target {
        (1, first)
    } else {
        let mut lo = 1;
        let mut hi = 2;
        let mut at_hi = loop {
            if hi > params.max_requests {
                return Err(Error::Calibration(format!(
                    "rejection stayed below {target} up to {} requests",
                    params.max_requests
                )));
            }
            let m = mean_at(hi, &mut evaluations);
            if m >= target {
                break m;
            }
            lo = hi;
            hi *= 2;
        };
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            let m = mean_at(mid, &mut evaluations);
            if m >= target {
                hi = mid;
                at_hi = m;
            } else {
                lo = mid;
            }
        }
        let below = evaluations.iter().find(|e| e.0 == lo).map(|e| e.1);
        assert!(below.is_some_and(|m| m < target) && at_hi >= target, "calibration lost its bracket");
        (hi, at_hi)
    };
    Ok(Calibration {
        high,
        low: high.div_ceil(2),
        mean_rejection_at_high: at_high,
        evaluations,
    })
}
