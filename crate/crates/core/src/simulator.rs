//! Event-by-event simulation of the pool's Markov chain.
//!
//! One aggregate exponential clock drives all arrivals and service-phase
//! completions; the firing event is drawn in proportion to its rate.
//! Blocking is counted on arrivals, so by PASTA the estimates target the
//! stationary blocking probabilities.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::model::{Discipline, PoolConfig};
use crate::recursive::occupancy_distribution;
use crate::report::{BlockingReport, Method};

/// Name recorded in the output metadata.
pub const GENERATOR: &str = "ChaCha8Rng (rand_chacha 0.9), seed_from_u64(seed), stream = replication index";

/// Session service requirement, always with mean `1 / service_rate`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ServiceDistribution {
    #[default]
    Exponential,
    /// Two exponential phases in series.
    Erlang2,
    /// Balanced-means two-branch hyperexponential with squared coefficient
    /// of variation 4.
    HyperExponential,
}

/// Phase-type representation scaled to unit mean.
struct PhaseType {
    /// Completion rate of each phase.
    rates: Vec<f64>,
    /// Phase entered after completing each phase, `None` for exit.
    next: Vec<Option<usize>>,
    /// Probability of starting in phase 0; the rest start in phase 1.
    first_phase_prob: f64,
}

impl ServiceDistribution {
    fn phase_type(self) -> PhaseType {
        match self {
            ServiceDistribution::Exponential => PhaseType {
                rates: vec![1.0],
                next: vec![None],
                first_phase_prob: 1.0,
            },
            ServiceDistribution::Erlang2 => PhaseType {
                rates: vec![2.0, 2.0],
                next: vec![Some(1), None],
                first_phase_prob: 1.0,
            },
            ServiceDistribution::HyperExponential => {
                let scv = 4.0f64;
                let p = 0.5 * (1.0 + ((scv - 1.0) / (scv + 1.0)).sqrt());
                PhaseType {
                    rates: vec![2.0 * p, 2.0 * (1.0 - p)],
                    next: vec![None, None],
                    first_phase_prob: p,
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub pool: PoolConfig,
    /// Simulated time discarded before measuring.
    pub warmup_time: f64,
    /// Measured simulated time per replication.
    pub horizon_time: f64,
    pub seed: u64,
    pub replications: usize,
    pub service: ServiceDistribution,
}

impl SimConfig {
    /// Exponential service, one replication, warmup of ten times the slowest
    /// mean service time.
    pub fn new(pool: PoolConfig, horizon_time: f64, seed: u64) -> Self {
        let warmup_time = default_warmup(&pool);
        Self {
            pool,
            warmup_time,
            horizon_time,
            seed,
            replications: 1,
            service: ServiceDistribution::Exponential,
        }
    }

    /// Horizon chosen so that about `sessions` arrivals are offered in total
    /// across `replications`.
    pub fn for_offered_sessions(pool: PoolConfig, sessions: f64, replications: usize, seed: u64) -> Self {
        let rate = offered_rate(&pool);
        let mut cfg = Self::new(pool, sessions / (rate * replications.max(1) as f64), seed);
        cfg.replications = replications;
        cfg
    }

    pub fn with_service(mut self, service: ServiceDistribution) -> Self {
        self.service = service;
        self
    }
}

pub fn default_warmup(pool: &PoolConfig) -> f64 {
    10.0 * pool
        .classes()
        .iter()
        .map(|c| 1.0 / c.service_rate)
        .fold(0.0, f64::max)
}

/// Total arrival rate `sum_v M_v lambda_v`.
pub fn offered_rate(pool: &PoolConfig) -> f64 {
    pool.classes()
        .iter()
        .map(|c| c.count as f64 * c.arrival_rate)
        .sum()
}

/// Counters of one replication.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationStats {
    pub stream: u64,
    /// Measured window only.
    pub offered: Vec<u64>,
    pub blocked_radio: Vec<u64>,
    pub blocked_compute: Vec<u64>,
    /// Whole run, warmup included, starting from the empty pool.
    pub admitted: Vec<u64>,
    pub departed: Vec<u64>,
    pub final_occupancy: Vec<u64>,
    /// Time average of total sessions over `N`.
    pub utilization: f64,
    /// Time spent at each total occupancy `0..=N` in the measured window.
    pub occupancy_time: Vec<f64>,
    pub events: u64,
}

/// Rate estimate with a 95% normal-approximation binomial half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub half_width: f64,
}

impl Estimate {
    fn binomial(hits: u64, trials: u64) -> Self {
        if trials == 0 {
            return Self {
                value: f64::NAN,
                half_width: f64::NAN,
            };
        }
        let p = hits as f64 / trials as f64;
        Self {
            value: p,
            half_width: 1.96 * (p * (1.0 - p) / trials as f64).sqrt(),
        }
    }

    /// Binomial standard error at `p`, for checking a reference value.
    pub fn sigma_at(p: f64, trials: u64) -> f64 {
        (p * (1.0 - p) / trials as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassEstimates {
    pub radio: Estimate,
    pub compute: Estimate,
    pub overall: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimStats {
    pub offered: Vec<u64>,
    pub blocked_radio: Vec<u64>,
    pub blocked_compute: Vec<u64>,
    pub blocking_estimates: Vec<ClassEstimates>,
    pub mean_utilization: f64,
    /// Time-weighted distribution of total sessions, indices `0..=N`.
    pub occupancy_histogram: Vec<f64>,
    pub measured_time: f64,
    pub replications: Vec<ReplicationStats>,
    pub seed: u64,
    pub generator: String,
}

impl SimStats {
    pub fn total_offered(&self) -> u64 {
        self.offered.iter().sum()
    }

    /// Point estimates as a report. The computational rate is pooled over
    /// classes, which all see the same full-pool probability.
    pub fn blocking_report(&self) -> BlockingReport {
        let offered = self.total_offered();
        let computational = if offered == 0 {
            f64::NAN
        } else {
            self.blocked_compute.iter().sum::<u64>() as f64 / offered as f64
        };
        BlockingReport {
            per_class_radio: self.blocking_estimates.iter().map(|e| e.radio.value).collect(),
            computational,
            per_class_overall: self.blocking_estimates.iter().map(|e| e.overall.value).collect(),
            method: Method::Simulated,
        }
    }
}

struct Vbs {
    class: usize,
    sessions: u32,
    phases: Vec<u32>,
    rate: f64,
}

struct Replica<'a> {
    pool: &'a PoolConfig,
    phase: &'a PhaseType,
    vbs: Vec<Vbs>,
    class_offsets: Vec<usize>,
    arrival_rates: Vec<f64>,
    total: usize,
    rng: ChaCha8Rng,
}

impl<'a> Replica<'a> {
    fn vbs_rate(&self, i: usize) -> f64 {
        let v = &self.vbs[i];
        if v.sessions == 0 {
            return 0.0;
        }
        let class = self.pool.class(v.class);
        let share = match class.discipline {
            Discipline::PerSession => 1.0,
            Discipline::SharedCapacity => 1.0 / v.sessions as f64,
        };
        let work: f64 = v
            .phases
            .iter()
            .zip(&self.phase.rates)
            .map(|(&c, &r)| c as f64 * r)
            .sum();
        work * share * class.service_rate
    }

    fn refresh(&mut self, i: usize) {
        self.vbs[i].rate = self.vbs_rate(i);
    }

    fn pick<F: Fn(usize) -> f64>(&mut self, len: usize, weight: F, total: f64) -> usize {
        let mut target = self.rng.random::<f64>() * total;
        for i in 0..len {
            let w = weight(i);
            if target < w {
                return i;
            }
            target -= w;
        }
        // rounding: last index with positive weight
        (0..len).rev().find(|&i| weight(i) > 0.0).unwrap_or(len - 1)
    }

    fn run(mut self, warmup: f64, horizon: f64, stream: u64) -> ReplicationStats {
        let v = self.pool.num_classes();
        let n = self.pool.compute_servers();
        let mut stats = ReplicationStats {
            stream,
            offered: vec![0; v],
            blocked_radio: vec![0; v],
            blocked_compute: vec![0; v],
            admitted: vec![0; v],
            departed: vec![0; v],
            final_occupancy: vec![0; v],
            utilization: 0.0,
            occupancy_time: vec![0.0; n + 1],
            events: 0,
        };
        let arrival_total: f64 = self.arrival_rates.iter().sum();
        let end = warmup + horizon;
        let mut now = 0.0;
        loop {
            let departure_total: f64 = self.vbs.iter().map(|b| b.rate).sum();
            let rate = arrival_total + departure_total;
            let dt: f64 = self.rng.sample::<f64, _>(Exp1) / rate;
            let next = now + dt;
            // time-weighted occupancy over the part of [now, next) inside the window
            let lo = now.max(warmup);
            let hi = next.min(end);
            if hi > lo {
                stats.occupancy_time[self.total] += hi - lo;
            }
            if next >= end {
                break;
            }
            now = next;
            stats.events += 1;
            let measuring = now >= warmup;
            if self.rng.random::<f64>() * rate < arrival_total {
                let rates = self.arrival_rates.clone();
                let class = self.pick(v, |c| rates[c], arrival_total);
                let count = self.pool.class(class).count;
                let i = self.class_offsets[class] + self.rng.random_range(0..count);
                let k = self.pool.class(class).radio_servers as u32;
                if measuring {
                    stats.offered[class] += 1;
                }
                if self.total == n {
                    if measuring {
                        stats.blocked_compute[class] += 1;
                    }
                } else if self.vbs[i].sessions == k {
                    if measuring {
                        stats.blocked_radio[class] += 1;
                    }
                } else {
                    let start = if self.rng.random::<f64>() < self.phase.first_phase_prob { 0 } else { 1 };
                    self.vbs[i].sessions += 1;
                    self.vbs[i].phases[start] += 1;
                    self.total += 1;
                    stats.admitted[class] += 1;
                    self.refresh(i);
                }
            } else {
                let rates: Vec<f64> = self.vbs.iter().map(|b| b.rate).collect();
                let i = self.pick(rates.len(), |j| rates[j], departure_total);
                let phase = self.phase;
                let counts = self.vbs[i].phases.clone();
                let work: f64 = counts.iter().zip(&phase.rates).map(|(&c, &r)| c as f64 * r).sum();
                let j = self.pick(counts.len(), |p| counts[p] as f64 * phase.rates[p], work);
                self.vbs[i].phases[j] -= 1;
                match phase.next[j] {
                    Some(to) => self.vbs[i].phases[to] += 1,
                    None => {
                        self.vbs[i].sessions -= 1;
                        self.total -= 1;
                        stats.departed[self.vbs[i].class] += 1;
                    }
                }
                self.refresh(i);
            }
        }
        for b in &self.vbs {
            stats.final_occupancy[b.class] += b.sessions as u64;
        }
        let measured: f64 = stats.occupancy_time.iter().sum();
        if measured > 0.0 {
            let busy: f64 = stats
                .occupancy_time
                .iter()
                .enumerate()
                .map(|(t, w)| t as f64 * w)
                .sum();
            stats.utilization = busy / measured / n as f64;
        } else {
            stats.utilization = f64::NAN;
        }
        stats
    }
}

fn run_replication(cfg: &SimConfig, phase: &PhaseType, stream: u64) -> ReplicationStats {
    let pool = &cfg.pool;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream);
    let vbs = pool
        .vbs_classes()
        .into_iter()
        .map(|class| Vbs {
            class,
            sessions: 0,
            phases: vec![0; phase.rates.len()],
            rate: 0.0,
        })
        .collect();
    let replica = Replica {
        pool,
        phase,
        vbs,
        class_offsets: (0..pool.num_classes()).map(|v| pool.class_offset(v)).collect(),
        arrival_rates: pool
            .classes()
            .iter()
            .map(|c| c.count as f64 * c.arrival_rate)
            .collect(),
        total: 0,
        rng,
    };
    replica.run(cfg.warmup_time, cfg.horizon_time, stream)
}

/// Runs all replications (in parallel) and pools their counters.
pub fn simulate(cfg: &SimConfig) -> Result<SimStats> {
    if !(cfg.horizon_time >= 0.0) || !cfg.horizon_time.is_finite() {
        return Err(Error::Precondition(format!("horizon must be non-negative, got {}", cfg.horizon_time)));
    }
    if !(cfg.warmup_time >= 0.0) || !cfg.warmup_time.is_finite() {
        return Err(Error::Precondition(format!("warmup must be non-negative, got {}", cfg.warmup_time)));
    }
    if cfg.replications == 0 {
        return Err(Error::Precondition("at least one replication required".into()));
    }
    let phase = cfg.service.phase_type();
    let reps: Vec<ReplicationStats> = (0..cfg.replications as u64)
        .into_par_iter()
        .map(|stream| run_replication(cfg, &phase, stream))
        .collect();

    let v = cfg.pool.num_classes();
    let n = cfg.pool.compute_servers();
    let sum = |f: &dyn Fn(&ReplicationStats) -> &Vec<u64>| -> Vec<u64> {
        (0..v).map(|c| reps.iter().map(|r| f(r)[c]).sum()).collect()
    };
    let offered = sum(&|r| &r.offered);
    let blocked_radio = sum(&|r| &r.blocked_radio);
    let blocked_compute = sum(&|r| &r.blocked_compute);
    let blocking_estimates = (0..v)
        .map(|c| ClassEstimates {
            radio: Estimate::binomial(blocked_radio[c], offered[c]),
            compute: Estimate::binomial(blocked_compute[c], offered[c]),
            overall: Estimate::binomial(blocked_radio[c] + blocked_compute[c], offered[c]),
        })
        .collect();
    let mut time = vec![0.0; n + 1];
    for r in &reps {
        for (t, w) in time.iter_mut().zip(&r.occupancy_time) {
            *t += w;
        }
    }
    let measured_time: f64 = time.iter().sum();
    let occupancy_histogram = if measured_time > 0.0 {
        time.iter().map(|t| t / measured_time).collect()
    } else {
        vec![0.0; n + 1]
    };
    let mean_utilization = reps.iter().map(|r| r.utilization).sum::<f64>() / reps.len() as f64;
    Ok(SimStats {
        offered,
        blocked_radio,
        blocked_compute,
        blocking_estimates,
        mean_utilization,
        occupancy_histogram,
        measured_time,
        replications: reps,
        seed: cfg.seed,
        generator: GENERATOR.to_string(),
    })
}

/// Stationary law of the total number of sessions, indices `0..=N`.
pub fn analytic_total_marginal(config: &PoolConfig) -> Result<Vec<f64>> {
    let n = config.compute_servers();
    let dist = occupancy_distribution(config, None, n)?;
    let mut marginal = vec![0.0; n + 1];
    for (m, w) in marginal.iter_mut().zip(dist.weights()) {
        *m = *w;
    }
    let total: f64 = marginal.iter().sum();
    Ok(marginal.into_iter().map(|w| w / total).collect())
}

/// Total-variation distance between two distributions over `0..=N`.
pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Total-variation distance between the simulated occupancy histogram and
/// an analytic marginal over `0..=N`.
pub fn occupancy_check(stats: &SimStats, marginal: &[f64]) -> Result<f64> {
    if stats.measured_time <= 0.0 {
        return Err(Error::NoSamples);
    }
    if marginal.len() != stats.occupancy_histogram.len() {
        return Err(Error::Mismatch(format!(
            "marginal has {} entries, histogram has {}",
            marginal.len(),
            stats.occupancy_histogram.len()
        )));
    }
    Ok(total_variation(&stats.occupancy_histogram, marginal))
}

/// Replication mean of the utilization with a 95% Student-t half-width
/// (infinite with a single replication).
pub fn utilization_estimate(stats: &SimStats) -> (f64, f64) {
    let values: Vec<f64> = stats.replications.iter().map(|r| r.utilization).collect();
    let r = values.len();
    let mean = values.iter().sum::<f64>() / r as f64;
    if r < 2 {
        return (mean, f64::INFINITY);
    }
    let var = values.iter().map(|u| (u - mean).powi(2)).sum::<f64>() / (r - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (r - 1) as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975);
    (mean, t * (var / r as f64).sqrt())
}
