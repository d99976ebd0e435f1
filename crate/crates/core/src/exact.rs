//! Brute-force ground truth over the enumerated state space.
//!
//! Everything here is exponential in the pool size and exists to check the
//! scalable engines on small pools. Sums run in log-sum-exp form.

use std::collections::HashMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{PoolConfig, SingleVbsWeights, StateVector};
use crate::numeric::LogAccumulator;
use crate::report::{BlockingReport, Method};

pub const DEFAULT_ENUMERATION_CAP: u128 = 10_000_000;

/// Lexicographic walk over the admissible states of a pool.
#[derive(Debug, Clone)]
pub struct StateIter {
    bounds: Vec<u32>,
    limit: usize,
    current: Vec<u32>,
    total: usize,
    started: bool,
    done: bool,
}

impl StateIter {
    fn new(config: &PoolConfig) -> Self {
        let bounds: Vec<u32> = config
            .vbs_classes()
            .into_iter()
            .map(|v| config.class(v).radio_servers as u32)
            .collect();
        let len = bounds.len();
        Self {
            bounds,
            limit: config.compute_servers(),
            current: vec![0; len],
            total: 0,
            started: false,
            done: false,
        }
    }

    fn advance(&mut self) -> bool {
        let mut suffix = 0usize;
        for i in (0..self.current.len()).rev() {
            if self.current[i] < self.bounds[i] && self.total - suffix < self.limit {
                self.current[i] += 1;
                for u in &mut self.current[i + 1..] {
                    *u = 0;
                }
                self.total = self.total - suffix + 1;
                return true;
            }
            suffix += self.current[i] as usize;
        }
        false
    }
}

impl Iterator for StateIter {
    type Item = StateVector;

    fn next(&mut self) -> Option<StateVector> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
        } else if !self.advance() {
            self.done = true;
            return None;
        }
        Some(StateVector(self.current.clone()))
    }
}

/// All admissible states, refusing pools larger than `cap`.
pub fn enumerate_states(config: &PoolConfig, cap: u128) -> Result<StateIter> {
    let size = config.state_space_size();
    if size > cap {
        return Err(Error::StateSpaceTooLarge { size, cap });
    }
    Ok(StateIter::new(config))
}

/// Per-VBS log weights laid out in state-vector order.
struct LogWeigher {
    per_vbs: Vec<usize>,
    weights: Vec<SingleVbsWeights>,
}

impl LogWeigher {
    fn new(config: &PoolConfig) -> Self {
        Self {
            per_vbs: config.vbs_classes(),
            weights: config.classes().iter().map(|c| c.weights()).collect(),
        }
    }

    /// Summed by occupancy level, so permuting VBSs within a class gives a
    /// bit-identical result.
    fn ln_weight(&self, state: &[u32]) -> f64 {
        let mut tally: Vec<Vec<u32>> = self.weights.iter().map(|w| vec![0; w.len()]).collect();
        for (&u, &v) in state.iter().zip(&self.per_vbs) {
            tally[v][u as usize] += 1;
        }
        tally
            .iter()
            .zip(&self.weights)
            .flat_map(|(t, w)| t.iter().enumerate().map(move |(n, &c)| c as f64 * w.ln_weight(n)))
            .sum()
    }
}

fn check_admissible(config: &PoolConfig, state: &StateVector) -> Result<()> {
    let classes = config.vbs_classes();
    if state.0.len() != classes.len() {
        return Err(Error::Mismatch(format!(
            "state has {} entries, pool has {} VBSs",
            state.0.len(),
            classes.len()
        )));
    }
    for (&u, &v) in state.0.iter().zip(&classes) {
        if u as usize > config.class(v).radio_servers {
            return Err(Error::Precondition(format!("entry {u} exceeds K of class {}", v + 1)));
        }
    }
    if state.total() > config.compute_servers() {
        return Err(Error::Precondition("state total exceeds N".into()));
    }
    Ok(())
}

/// Natural log of the product-form weight of an admissible state
/// (the zero state has weight one).
pub fn unnormalized_weight(config: &PoolConfig, state: &StateVector) -> Result<f64> {
    check_admissible(config, state)?;
    Ok(LogWeigher::new(config).ln_weight(&state.0))
}

/// Normalized product-form distribution over the enumerated states.
#[derive(Debug, Clone)]
pub struct StationaryDistribution {
    states: Vec<StateVector>,
    probabilities: Vec<f64>,
    index: HashMap<StateVector, usize>,
    zero_state_prob: f64,
    compute_servers: usize,
}

impl StationaryDistribution {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[StateVector] {
        &self.states
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    /// Direct write access, for building perturbed distributions.
    pub fn probabilities_mut(&mut self) -> &mut [f64] {
        &mut self.probabilities
    }

    pub fn get(&self, state: &StateVector) -> Option<f64> {
        self.index.get(state).map(|&i| self.probabilities[i])
    }

    pub fn position(&self, state: &StateVector) -> Option<usize> {
        self.index.get(state).copied()
    }

    /// `P0`, the probability of the empty pool.
    pub fn zero_state_prob(&self) -> f64 {
        self.zero_state_prob
    }

    pub fn iter(&self) -> impl Iterator<Item = (&StateVector, f64)> {
        self.states.iter().zip(self.probabilities.iter().copied())
    }

    /// Distribution of the total number of sessions, indices `0..=max total`.
    pub fn total_occupancy_marginal(&self) -> Vec<f64> {
        let max_total = self.states.iter().map(|s| s.total()).max().unwrap_or(0);
        let mut marginal = vec![0.0; max_total.min(self.compute_servers) + 1];
        for (s, p) in self.iter() {
            marginal[s.total()] += p;
        }
        marginal
    }
}

pub fn stationary_distribution(config: &PoolConfig) -> Result<StationaryDistribution> {
    stationary_distribution_with_cap(config, DEFAULT_ENUMERATION_CAP)
}

pub fn stationary_distribution_with_cap(
    config: &PoolConfig,
    cap: u128,
) -> Result<StationaryDistribution> {
    let weigher = LogWeigher::new(config);
    let states: Vec<StateVector> = enumerate_states(config, cap)?.collect();
    let ln_weights: Vec<f64> = states.iter().map(|s| weigher.ln_weight(&s.0)).collect();
    let mut norm = LogAccumulator::new();
    for &lw in &ln_weights {
        norm.add(lw);
    }
    let ln_norm = norm.value();
    let probabilities: Vec<f64> = ln_weights.iter().map(|lw| (lw - ln_norm).exp()).collect();
    let index = states
        .iter()
        .enumerate()
        .map(|(i, s)| (s.clone(), i))
        .collect();
    Ok(StationaryDistribution {
        states,
        probabilities,
        index,
        zero_state_prob: (-ln_norm).exp(),
        compute_servers: config.compute_servers(),
    })
}

pub fn blocking_exact(config: &PoolConfig) -> Result<BlockingReport> {
    blocking_exact_with_cap(config, DEFAULT_ENUMERATION_CAP)
}

/// Blocking by direct summation over the state space.
///
/// Radio blocking of class `v` sums the states where the first VBS of the
/// class is full and the pool is not; by within-class symmetry this equals
/// the average over all VBSs of the class.
pub fn blocking_exact_with_cap(config: &PoolConfig, cap: u128) -> Result<BlockingReport> {
    let weigher = LogWeigher::new(config);
    let n = config.compute_servers();
    let offsets: Vec<usize> = (0..config.num_classes()).map(|v| config.class_offset(v)).collect();
    let mut norm = LogAccumulator::new();
    let mut compute = LogAccumulator::new();
    let mut radio = vec![LogAccumulator::new(); config.num_classes()];
    for state in enumerate_states(config, cap)? {
        let lw = weigher.ln_weight(&state.0);
        norm.add(lw);
        let total = state.total();
        if total == n {
            compute.add(lw);
        } else {
            for (v, &offset) in offsets.iter().enumerate() {
                if state.0[offset] as usize == config.class(v).radio_servers {
                    radio[v].add(lw);
                }
            }
        }
    }
    let ln_norm = norm.value();
    let per_class_radio = radio.iter().map(|acc| (acc.value() - ln_norm).exp()).collect();
    let computational = (compute.value() - ln_norm).exp();
    Ok(BlockingReport::from_parts(per_class_radio, computational, Method::Exact))
}

/// Outcome of a local balance check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalBalance {
    pub holds: bool,
    pub worst_residual: f64,
    pub pairs_checked: usize,
}

/// Checks `Pr{u} lambda_v = Pr{u + e} f_v(u_{v,m} + 1)` on every admissible
/// neighbor pair of `dist`.
pub fn check_local_balance_of(
    config: &PoolConfig,
    dist: &StationaryDistribution,
    tolerance: f64,
) -> Result<LocalBalance> {
    let classes = config.vbs_classes();
    let n = config.compute_servers();
    let mut worst: f64 = 0.0;
    let mut pairs = 0;
    for (state, p) in dist.iter() {
        if state.0.len() != classes.len() {
            return Err(Error::Mismatch("distribution does not match the pool".into()));
        }
        if state.total() >= n {
            continue;
        }
        for (i, &v) in classes.iter().enumerate() {
            let spec = config.class(v);
            let u = state.0[i] as usize;
            if u >= spec.radio_servers {
                continue;
            }
            let mut up = state.clone();
            up.0[i] += 1;
            let p_up = dist
                .get(&up)
                .ok_or_else(|| Error::Mismatch("distribution is missing an admissible state".into()))?;
            let residual = (p * spec.arrival_rate - p_up * spec.service_rate_at(u + 1)?).abs();
            worst = worst.max(residual);
            pairs += 1;
        }
    }
    Ok(LocalBalance {
        holds: worst <= tolerance,
        worst_residual: worst,
        pairs_checked: pairs,
    })
}

pub fn check_local_balance(config: &PoolConfig, tolerance: f64) -> Result<LocalBalance> {
    let dist = stationary_distribution(config)?;
    check_local_balance_of(config, &dist, tolerance)
}

/// Transition rates of a chain on the pool's state set.
pub trait TransitionRates {
    fn rate(&self, from: &[u32], to: &[u32]) -> f64;
}

impl<F: Fn(&[u32], &[u32]) -> f64> TransitionRates for F {
    fn rate(&self, from: &[u32], to: &[u32]) -> f64 {
        self(from, to)
    }
}

/// The admission-controlled pool: arrivals at `lambda_v`, departures at
/// `f_v(u)`, zero for anything that is not a single-entry step between
/// admissible states.
pub struct PoolRates<'a> {
    config: &'a PoolConfig,
    classes: Vec<usize>,
}

impl<'a> PoolRates<'a> {
    pub fn new(config: &'a PoolConfig) -> Self {
        Self {
            config,
            classes: config.vbs_classes(),
        }
    }

    fn admissible(&self, state: &[u32]) -> bool {
        let total: usize = state.iter().map(|&u| u as usize).sum();
        total <= self.config.compute_servers()
            && state
                .iter()
                .zip(&self.classes)
                .all(|(&u, &v)| u as usize <= self.config.class(v).radio_servers)
    }
}

impl TransitionRates for PoolRates<'_> {
    fn rate(&self, from: &[u32], to: &[u32]) -> f64 {
        if from.len() != to.len() || !self.admissible(from) || !self.admissible(to) {
            return 0.0;
        }
        let mut changed = None;
        for (i, (&a, &b)) in from.iter().zip(to).enumerate() {
            if a != b {
                if changed.is_some() {
                    return 0.0;
                }
                changed = Some(i);
            }
        }
        let Some(i) = changed else { return 0.0 };
        let spec = self.config.class(self.classes[i]);
        if to[i] == from[i] + 1 {
            spec.arrival_rate
        } else if to[i] + 1 == from[i] {
            spec.service_rate_at(from[i] as usize).unwrap_or(0.0)
        } else {
            0.0
        }
    }
}

/// Products of rates around a closed loop, forward and reversed. The last
/// state is implicitly connected back to the first.
pub fn cycle_rate_products<R: TransitionRates + ?Sized>(rates: &R, cycle: &[StateVector]) -> (f64, f64) {
    let (f, r) = cycle_log_products(rates, cycle);
    (f.exp(), r.exp())
}

fn cycle_log_products<R: TransitionRates + ?Sized>(rates: &R, cycle: &[StateVector]) -> (f64, f64) {
    let mut forward = 0.0;
    let mut reverse = 0.0;
    for j in 0..cycle.len() {
        let a = &cycle[j].0;
        let b = &cycle[(j + 1) % cycle.len()].0;
        forward += rates.rate(a, b).ln();
        reverse += rates.rate(b, a).ln();
    }
    (forward, reverse)
}

/// Outcome of sampling closed loops for Kolmogorov's criterion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KolmogorovCheck {
    pub passed: bool,
    pub cycles_checked: usize,
    pub failures: usize,
    pub worst_relative: f64,
}

const CYCLE_TOLERANCE: f64 = 1e-10;

pub fn check_kolmogorov_cycles(
    config: &PoolConfig,
    num_cycles: usize,
    seed: u64,
) -> Result<KolmogorovCheck> {
    check_kolmogorov_cycles_with(config, &PoolRates::new(config), num_cycles, seed)
}

/// Samples `num_cycles` random loops in the state graph of `config` and
/// compares forward and reverse rate products under `rates`.
///
/// Each loop is a random walk of 2 to 8 admissible steps followed by a
/// return path that first lowers, then raises, the entries that differ
/// from the start, each group in shuffled order.
pub fn check_kolmogorov_cycles_with<R: TransitionRates + ?Sized>(
    config: &PoolConfig,
    rates: &R,
    num_cycles: usize,
    seed: u64,
) -> Result<KolmogorovCheck> {
    let states: Vec<StateVector> = enumerate_states(config, DEFAULT_ENUMERATION_CAP)?.collect();
    let bounds: Vec<u32> = config
        .vbs_classes()
        .into_iter()
        .map(|v| config.class(v).radio_servers as u32)
        .collect();
    let n = config.compute_servers();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut failures = 0;

    for _ in 0..num_cycles {
        let start = states[rng.random_range(0..states.len())].clone();
        let mut cycle = vec![start.clone()];
        let mut current = start.clone();
        let steps = rng.random_range(2..=8);
        for _ in 0..steps {
            let total = current.total();
            let mut moves = Vec::new();
            for i in 0..current.0.len() {
                if current.0[i] < bounds[i] && total < n {
                    moves.push((i, true));
                }
                if current.0[i] > 0 {
                    moves.push((i, false));
                }
            }
            let &(i, up) = moves.choose(&mut rng).expect("every state has a neighbor");
            if up {
                current.0[i] += 1;
            } else {
                current.0[i] -= 1;
            }
            cycle.push(current.clone());
        }
        let mut lower = Vec::new();
        let mut raise = Vec::new();
        for i in 0..current.0.len() {
            let (now, goal) = (current.0[i], start.0[i]);
            if now > goal {
                lower.extend(std::iter::repeat_n(i, (now - goal) as usize));
            } else {
                raise.extend(std::iter::repeat_n(i, (goal - now) as usize));
            }
        }
        lower.shuffle(&mut rng);
        raise.shuffle(&mut rng);
        for i in lower {
            current.0[i] -= 1;
            cycle.push(current.clone());
        }
        for i in raise {
            current.0[i] += 1;
            cycle.push(current.clone());
        }
        // the walk ends back at the start; drop the duplicate
        debug_assert_eq!(cycle.last(), Some(&start));
        cycle.pop();
        if cycle.len() < 2 {
            continue;
        }
        let (f, r) = cycle_log_products(rates, &cycle);
        let rel = if f == r {
            0.0
        } else if f.is_finite() && r.is_finite() {
            (f - r).exp_m1().abs()
        } else {
            f64::INFINITY
        };
        worst = worst.max(rel);
        if !(rel <= CYCLE_TOLERANCE) {
            failures += 1;
        }
    }
    Ok(KolmogorovCheck {
        passed: failures == 0,
        cycles_checked: num_cycles,
        failures,
        worst_relative: worst,
    })
}
