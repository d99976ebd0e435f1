#![allow(dead_code)]

use rand::Rng;
use vbspool::{ClassSpec, Discipline, PoolConfig};

pub fn per_session(count: usize, k: usize, load: f64) -> ClassSpec {
    ClassSpec::with_load(count, k, load, Discipline::PerSession)
}

pub fn shared(count: usize, k: usize, load: f64) -> ClassSpec {
    ClassSpec::with_load(count, k, load, Discipline::SharedCapacity)
}

pub fn fig2() -> PoolConfig {
    PoolConfig::new(vec![per_session(2, 3, 1.0)], 4).unwrap()
}

pub fn fig3(n: usize) -> PoolConfig {
    PoolConfig::new(vec![per_session(40, 30, 20.0)], n).unwrap()
}

/// Up to three classes of up to four VBSs with up to five radio servers,
/// rejecting draws whose state space exceeds `max_states`.
pub fn random_small_config<R: Rng>(rng: &mut R, max_states: u128) -> PoolConfig {
    loop {
        let v = rng.random_range(1..=3);
        let classes: Vec<ClassSpec> = (0..v)
            .map(|_| {
                let count = rng.random_range(1..=4);
                let k = rng.random_range(1..=5);
                let lambda = rng.random_range(0.1..5.0);
                let mu = rng.random_range(0.5..2.0);
                let disc = if rng.random_bool(0.5) {
                    Discipline::PerSession
                } else {
                    Discipline::SharedCapacity
                };
                ClassSpec::new(count, k, lambda * mu, mu, disc)
            })
            .collect();
        let capacity: usize = classes.iter().map(|c| c.count * c.radio_servers).sum();
        let n = rng.random_range(1..=capacity + 2);
        let cfg = PoolConfig::new(classes, n).unwrap();
        if cfg.state_space_size() <= max_states {
            return cfg;
        }
    }
}

/// `a^K / K!` over `sum_{i<=K} a^i / i!`, summed in log space.
pub fn erlang_b_direct(a: f64, k: usize) -> f64 {
    let logs: Vec<f64> = (0..=k)
        .map(|i| i as f64 * a.ln() - (1..=i).map(|j| (j as f64).ln()).sum::<f64>())
        .collect();
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let norm: f64 = logs.iter().map(|l| (l - max).exp()).sum();
    (logs[k] - max).exp() / norm
}

/// `a^K / sum_{i<=K} a^i`.
pub fn geometric_blocking_direct(a: f64, k: usize) -> f64 {
    let norm: f64 = (0..=k).map(|i| a.powi(i as i32 - k as i32)).sum();
    1.0 / norm
}
