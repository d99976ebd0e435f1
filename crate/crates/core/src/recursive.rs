//! Scalable blocking evaluation by truncated convolution.
//!
//! `C(n, M)` is the total product-form weight of the states with exactly `n`
//! sessions, `R(n, M)` the weight of the states with fewer than `n`. Both
//! come out of the occupancy distribution of the pool, which is the
//! convolution of the per-VBS weight vectors truncated at the compute
//! capacity. Peeling one VBS of class `v` off the product is the
//! `C(n, M) = sum_j w_v[j] C(n - j, M - e_v)` recursion run forwards.
//!
//! Weight vectors are renormalized to unit sum after every step and carry
//! the accumulated logarithm of the discarded scale, so pools with hundreds
//! of VBSs neither overflow nor underflow.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::PoolConfig;
use crate::report::{BlockingReport, Method};

/// Unit-sum total-occupancy weights of a multiset of VBSs, truncated at a
/// cap. The raw weight at `n` is `weights[n] * exp(log_scale)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OccupancyDistribution {
    weights: Vec<f64>,
    log_scale: f64,
    included: Vec<usize>,
}

impl OccupancyDistribution {
    fn empty(num_classes: usize) -> Self {
        Self {
            weights: vec![1.0],
            log_scale: 0.0,
            included: vec![0; num_classes],
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    /// Number of VBSs of each class in the multiset.
    pub fn included(&self) -> &[usize] {
        &self.included
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `ln C(n)`; `-inf` beyond the support.
    pub fn ln_exactly(&self, n: usize) -> f64 {
        match self.weights.get(n) {
            Some(&w) => w.ln() + self.log_scale,
            None => f64::NEG_INFINITY,
        }
    }

    /// `ln R(n)`, the weight strictly below `n`.
    pub fn ln_below(&self, n: usize) -> f64 {
        let upto = n.min(self.weights.len());
        let s: f64 = self.weights[..upto].iter().sum();
        s.ln() + self.log_scale
    }

    /// Multiplies in one VBS with unit-sum weights `w` and log scale
    /// `w_scale`, truncating at `cap`.
    fn convolve(&mut self, class: usize, w: &[f64], w_scale: f64, cap: usize, ops: &mut u64) {
        let len = (self.weights.len() - 1 + w.len() - 1).min(cap) + 1;
        let mut out = vec![0.0; len];
        for (j, &q) in self.weights.iter().enumerate() {
            let reach = (len - j).min(w.len());
            for (k, &wk) in w[..reach].iter().enumerate() {
                out[j + k] += q * wk;
            }
            *ops += reach as u64;
        }
        let sum: f64 = out.iter().sum();
        *ops += len as u64;
        for x in &mut out {
            *x /= sum;
        }
        self.weights = out;
        self.log_scale += w_scale + sum.ln();
        self.included[class] += 1;
    }
}

/// Per-class weights truncated at the cap and renormalized over what is left.
struct TruncatedWeights {
    scaled: Vec<Vec<f64>>,
    log_scale: Vec<f64>,
}

impl TruncatedWeights {
    fn new(config: &PoolConfig, cap: usize) -> Self {
        let mut scaled = Vec::new();
        let mut log_scale = Vec::new();
        for class in config.classes() {
            let w = class.weights();
            let top = class.radio_servers.min(cap);
            let ln: Vec<f64> = (0..=top).map(|n| w.ln_weight(n)).collect();
            let ls = crate::numeric::log_sum_exp(&ln);
            scaled.push(ln.iter().map(|x| (x - ls).exp()).collect());
            log_scale.push(ls);
        }
        Self { scaled, log_scale }
    }

    fn multiply(&self, dist: &mut OccupancyDistribution, class: usize, cap: usize, ops: &mut u64) {
        dist.convolve(class, &self.scaled[class], self.log_scale[class], cap, ops);
    }
}

fn check_class(config: &PoolConfig, class: Option<usize>) -> Result<()> {
    match class {
        Some(v) if v >= config.num_classes() => Err(Error::Precondition(format!(
            "class index {} out of range 1..={}",
            v + 1,
            config.num_classes()
        ))),
        _ => Ok(()),
    }
}

/// Occupancy distribution of the whole pool, or of the pool minus one VBS
/// of class `exclude` (0-based), truncated at `cap` sessions.
pub fn occupancy_distribution(
    config: &PoolConfig,
    exclude: Option<usize>,
    cap: usize,
) -> Result<OccupancyDistribution> {
    let mut ops = 0;
    occupancy_distribution_counted(config, exclude, cap, &mut ops)
}

fn occupancy_distribution_counted(
    config: &PoolConfig,
    exclude: Option<usize>,
    cap: usize,
    ops: &mut u64,
) -> Result<OccupancyDistribution> {
    check_class(config, exclude)?;
    let weights = TruncatedWeights::new(config, cap);
    let mut dist = OccupancyDistribution::empty(config.num_classes());
    for (v, class) in config.classes().iter().enumerate() {
        let copies = class.count - usize::from(exclude == Some(v));
        for _ in 0..copies {
            weights.multiply(&mut dist, v, cap, ops);
        }
    }
    Ok(dist)
}

/// `ln C(n, M)` or `ln C(n, M - e_v)`, relative to a zero-state weight of one.
pub fn compute_c(config: &PoolConfig, n: usize, exclude: Option<usize>) -> Result<f64> {
    Ok(occupancy_distribution(config, exclude, n)?.ln_exactly(n))
}

/// `ln R(n, M)` or `ln R(n, M - e_v)`; `R(0) = 0` so the result is `-inf`.
pub fn compute_r(config: &PoolConfig, n: usize, exclude: Option<usize>) -> Result<f64> {
    if n == 0 {
        check_class(config, exclude)?;
        return Ok(f64::NEG_INFINITY);
    }
    Ok(occupancy_distribution(config, exclude, n - 1)?.ln_below(n))
}

/// Leave-one-out products: `out[v]` receives `base` times every spare
/// except the one of class `v`.
fn leave_one_out(
    base: OccupancyDistribution,
    spares: &[usize],
    weights: &TruncatedWeights,
    cap: usize,
    out: &mut [Option<OccupancyDistribution>],
    ops: &mut u64,
) {
    if let [only] = spares {
        out[*only] = Some(base);
        return;
    }
    let (left, right) = spares.split_at(spares.len() / 2);
    let mut with_right = base.clone();
    for &v in right {
        weights.multiply(&mut with_right, v, cap, ops);
    }
    leave_one_out(with_right, left, weights, cap, out, ops);
    let mut with_left = base;
    for &v in left {
        weights.multiply(&mut with_left, v, cap, ops);
    }
    leave_one_out(with_left, right, weights, cap, out, ops);
}

fn blocking_counted(config: &PoolConfig) -> (BlockingReport, u64) {
    let mut ops = 0u64;
    let n = config.compute_servers();
    let cap = n.min(config.radio_capacity());
    let weights = TruncatedWeights::new(config, cap);
    let v_count = config.num_classes();

    // everything except one spare VBS per class
    let mut base = OccupancyDistribution::empty(v_count);
    for (v, class) in config.classes().iter().enumerate() {
        for _ in 1..class.count {
            weights.multiply(&mut base, v, cap, &mut ops);
        }
    }
    let spares: Vec<usize> = (0..v_count).collect();
    let mut excluded = vec![None; v_count];
    leave_one_out(base, &spares, &weights, cap, &mut excluded, &mut ops);
    let excluded: Vec<OccupancyDistribution> = excluded.into_iter().map(Option::unwrap).collect();

    let mut full = excluded[0].clone();
    weights.multiply(&mut full, 0, cap, &mut ops);

    // full is truncated at N and normalized, so R(N + 1, M) = exp(log_scale)
    let ln_norm = full.log_scale;
    let computational = full.weights.get(n).copied().unwrap_or(0.0);
    let per_class_radio = config
        .classes()
        .iter()
        .zip(&excluded)
        .map(|(class, rest)| {
            let k = class.radio_servers;
            if n <= k {
                return 0.0;
            }
            ops += (n - k).min(rest.len()) as u64;
            let ln = class.weights().ln_weight(k) + rest.ln_below(n - k) - ln_norm;
            ln.exp()
        })
        .collect();
    (
        BlockingReport::from_parts(per_class_radio, computational, Method::Recursive),
        ops,
    )
}

/// Blocking probabilities from the auxiliary functions:
/// `P0 = 1 / R(N + 1, M)`, `P_bc = P0 C(N, M)` and
/// `P_br_v = P0 w_v[K_v] R(N - K_v, M - e_v)`.
pub fn blocking_recursive(config: &PoolConfig) -> BlockingReport {
    blocking_counted(config).0
}

/// Multiply-add steps (convolution updates, normalization sums and the
/// cumulative sums behind `R`) executed by [`blocking_recursive`].
pub fn operation_count(config: &PoolConfig) -> u64 {
    blocking_counted(config).1
}

/// `[(max K)^2 + max K] |M|^2`.
pub fn complexity_bound(config: &PoolConfig) -> u64 {
    let k = config.max_radio_servers() as u64;
    let m = config.pool_size() as u64;
    (k * k + k) * m * m
}
