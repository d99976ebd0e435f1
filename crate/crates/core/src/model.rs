//! Pool configuration, per-class departure law and single-VBS weights.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::log_sum_exp;

/// How the service capacity of one VBS is divided among its sessions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Discipline {
    /// Every session is served at its own rate: `f(i) = i * mu`.
    #[serde(rename = "per_session")]
    PerSession,
    /// The VBS serves at a constant rate shared by its sessions: `f(i) = mu`.
    #[serde(rename = "shared")]
    SharedCapacity,
}

/// One class of identical VBSs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSpec {
    pub count: usize,
    pub radio_servers: usize,
    pub arrival_rate: f64,
    pub service_rate: f64,
    pub discipline: Discipline,
}

impl ClassSpec {
    pub fn new(
        count: usize,
        radio_servers: usize,
        arrival_rate: f64,
        service_rate: f64,
        discipline: Discipline,
    ) -> Self {
        Self {
            count,
            radio_servers,
            arrival_rate,
            service_rate,
            discipline,
        }
    }

    /// Class specified by its offered load, with unit service rate.
    pub fn with_load(count: usize, radio_servers: usize, load: f64, discipline: Discipline) -> Self {
        Self::new(count, radio_servers, load, 1.0, discipline)
    }

    /// Traffic load `a = lambda / mu`.
    pub fn load(&self) -> f64 {
        self.arrival_rate / self.service_rate
    }

    fn check(&self, index: usize) -> Result<()> {
        let fail = |message: &str| {
            Err(Error::InvalidClass {
                class: index + 1,
                message: message.to_string(),
            })
        };
        if self.count < 1 {
            return fail("count must be ≥ 1");
        }
        if self.radio_servers < 1 {
            return fail("radio_servers must be ≥ 1");
        }
        if !(self.arrival_rate.is_finite() && self.arrival_rate > 0.0) {
            return fail("arrival_rate must be positive and finite");
        }
        if !(self.service_rate.is_finite() && self.service_rate > 0.0) {
            return fail("service_rate must be positive and finite");
        }
        let load = self.load();
        if !(load.is_finite() && load > 0.0) {
            return fail("traffic load must be positive and finite");
        }
        Ok(())
    }

    /// Total departure rate of a VBS holding `n` sessions, `1 <= n <= K`.
    pub fn service_rate_at(&self, n: usize) -> Result<f64> {
        if n == 0 || n > self.radio_servers {
            return Err(Error::Precondition(format!(
                "departure rate defined for 1 ≤ n ≤ {}, got {n}",
                self.radio_servers
            )));
        }
        Ok(match self.discipline {
            Discipline::PerSession => n as f64 * self.service_rate,
            Discipline::SharedCapacity => self.service_rate,
        })
    }

    /// Stationary weights `lambda^n / prod f(i)` of one VBS in isolation.
    pub fn weights(&self) -> SingleVbsWeights {
        let k = self.radio_servers;
        let ln_lambda = self.arrival_rate.ln();
        let mut ln_weights = Vec::with_capacity(k + 1);
        ln_weights.push(0.0);
        let mut acc = 0.0;
        for n in 1..=k {
            let f = match self.discipline {
                Discipline::PerSession => n as f64 * self.service_rate,
                Discipline::SharedCapacity => self.service_rate,
            };
            acc += ln_lambda - f.ln();
            ln_weights.push(acc);
        }
        SingleVbsWeights::from_ln_weights(ln_weights)
    }
}

/// Per-VBS occupancy weights, kept both as exact logarithms and as a
/// unit-sum vector with its log normalizer: `w[n] = scaled[n] * exp(log_scale)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleVbsWeights {
    ln_weights: Vec<f64>,
    scaled: Vec<f64>,
    log_scale: f64,
}

impl SingleVbsWeights {
    fn from_ln_weights(ln_weights: Vec<f64>) -> Self {
        let log_scale = log_sum_exp(&ln_weights);
        let scaled = ln_weights.iter().map(|lw| (lw - log_scale).exp()).collect();
        Self {
            ln_weights,
            scaled,
            log_scale,
        }
    }

    pub fn len(&self) -> usize {
        self.scaled.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scaled.is_empty()
    }

    /// `ln w[n]`.
    pub fn ln_weight(&self, n: usize) -> f64 {
        self.ln_weights[n]
    }

    /// Unscaled weight `w[n]`; overflows to infinity for extreme loads.
    pub fn weight(&self, n: usize) -> f64 {
        self.ln_weights[n].exp()
    }

    /// Weights normalized to sum to one: the isolated occupancy distribution.
    pub fn scaled(&self) -> &[f64] {
        &self.scaled
    }

    /// `ln sum_n w[n]`.
    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    /// Probability that an isolated VBS is full.
    pub fn isolated_blocking(&self) -> f64 {
        *self.scaled.last().expect("weights are never empty")
    }

    pub fn mean(&self) -> f64 {
        self.scaled.iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }

    pub fn second_moment(&self) -> f64 {
        self.scaled
            .iter()
            .enumerate()
            .map(|(n, p)| (n * n) as f64 * p)
            .sum()
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        self.scaled
            .iter()
            .enumerate()
            .map(|(n, p)| (n as f64 - mean).powi(2) * p)
            .sum()
    }
}

/// Per-VBS session counts in class-major order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateVector(pub Vec<u32>);

impl StateVector {
    pub fn total(&self) -> usize {
        self.0.iter().map(|&u| u as usize).sum()
    }
}

/// A validated heterogeneous pool.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoolConfig {
    classes: Vec<ClassSpec>,
    compute_servers: usize,
}

impl PoolConfig {
    /// Validates and builds a pool. Class order is preserved.
    pub fn new(classes: Vec<ClassSpec>, compute_servers: usize) -> Result<Self> {
        if classes.is_empty() {
            return Err(Error::InvalidPool("at least one class is required".into()));
        }
        for (index, class) in classes.iter().enumerate() {
            class.check(index)?;
        }
        if compute_servers < 1 {
            return Err(Error::InvalidPool("compute_servers must be ≥ 1".into()));
        }
        Ok(Self {
            classes,
            compute_servers,
        })
    }

    /// Single-class pool.
    pub fn homogeneous(class: ClassSpec, compute_servers: usize) -> Result<Self> {
        Self::new(vec![class], compute_servers)
    }

    pub fn classes(&self) -> &[ClassSpec] {
        &self.classes
    }

    pub fn class(&self, v: usize) -> &ClassSpec {
        &self.classes[v]
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    /// `N`.
    pub fn compute_servers(&self) -> usize {
        self.compute_servers
    }

    /// `|M|`, the number of VBSs.
    pub fn pool_size(&self) -> usize {
        self.classes.iter().map(|c| c.count).sum()
    }

    /// `M^T K`, the compute servers needed without pooling.
    pub fn radio_capacity(&self) -> usize {
        self.classes.iter().map(|c| c.count * c.radio_servers).sum()
    }

    pub fn max_radio_servers(&self) -> usize {
        self.classes.iter().map(|c| c.radio_servers).max().unwrap_or(0)
    }

    pub fn min_radio_servers(&self) -> usize {
        self.classes.iter().map(|c| c.radio_servers).min().unwrap_or(0)
    }

    /// True when `N >= M^T K`, so no compute blocking can occur.
    pub fn is_decoupled(&self) -> bool {
        self.compute_servers >= self.radio_capacity()
    }

    /// Same pool with a different number of compute servers.
    pub fn with_compute_servers(&self, compute_servers: usize) -> Result<Self> {
        Self::new(self.classes.clone(), compute_servers)
    }

    /// Same pool with every class count replaced.
    pub fn with_counts(&self, counts: &[usize], compute_servers: usize) -> Result<Self> {
        if counts.len() != self.classes.len() {
            return Err(Error::InvalidPool(format!(
                "expected {} class counts, got {}",
                self.classes.len(),
                counts.len()
            )));
        }
        let classes = self
            .classes
            .iter()
            .zip(counts)
            .map(|(c, &count)| ClassSpec { count, ..c.clone() })
            .collect();
        Self::new(classes, compute_servers)
    }

    /// Class index of every VBS, class-major.
    pub fn vbs_classes(&self) -> Vec<usize> {
        self.classes
            .iter()
            .enumerate()
            .flat_map(|(v, c)| std::iter::repeat_n(v, c.count))
            .collect()
    }

    /// Index of the first VBS of class `v` within a state vector.
    pub fn class_offset(&self, v: usize) -> usize {
        self.classes[..v].iter().map(|c| c.count).sum()
    }

    /// Number of admissible states, by convolution counting. Saturates at
    /// `u128::MAX`.
    pub fn state_space_size(&self) -> u128 {
        let n = self.compute_servers;
        let mut counts: Vec<u128> = vec![1];
        for class in &self.classes {
            let k = class.radio_servers;
            for _ in 0..class.count {
                let len = (counts.len() + k).min(n + 1);
                let mut next = vec![0u128; len];
                // sliding window sum of width k + 1
                let mut window: u128 = 0;
                for (t, slot) in next.iter_mut().enumerate() {
                    if t < counts.len() {
                        window = match window.checked_add(counts[t]) {
                            Some(w) => w,
                            None => return u128::MAX,
                        };
                    }
                    if t > k && t - k - 1 < counts.len() {
                        window -= counts[t - k - 1];
                    }
                    *slot = window;
                }
                counts = next;
            }
        }
        counts
            .iter()
            .try_fold(0u128, |acc, &c| acc.checked_add(c))
            .unwrap_or(u128::MAX)
    }
}
