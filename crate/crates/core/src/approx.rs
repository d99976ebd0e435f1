//! Large-pool closed forms: Gaussian blocking, utilization limit, residual
//! pooling gain and the knee point of the blocking curve.
//!
//! All of it is driven by the mean and variance of the occupancy of one VBS
//! when compute servers are unlimited (see [`crate::scenarios`]).

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::PoolConfig;
use crate::recursive::blocking_recursive;
use crate::report::{BlockingReport, Method};
use crate::scenarios::class_moments;

/// Occupancy statistics of one isolated VBS of a class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassMoments {
    pub mean: f64,
    pub variance: f64,
    pub isolated_radio_blocking: f64,
}

/// Exact per-class moments of a pool, in class order.
pub fn exact_class_moments(config: &PoolConfig) -> Result<Vec<ClassMoments>> {
    config
        .classes()
        .iter()
        .map(|c| class_moments(c).map(|m| m.exact))
        .collect()
}

/// Pool-level statistics at a given number of compute servers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoolMoments {
    /// `M_w / |M|`.
    pub class_fractions: Vec<f64>,
    pub pooled_mean: f64,
    /// Sum of the class variances.
    pub pooled_variance: f64,
    /// `alpha = (N - |M| mu) / (sqrt(|M|) sigma)`.
    pub normalized_compute: f64,
    pub pool_size: usize,
    pub compute_servers: usize,
}

pub fn pool_moments(config: &PoolConfig, moments: &[ClassMoments], n: usize) -> Result<PoolMoments> {
    if moments.len() != config.num_classes() {
        return Err(Error::Mismatch(format!(
            "{} class moments for {} classes",
            moments.len(),
            config.num_classes()
        )));
    }
    if n < 1 {
        return Err(Error::Precondition("compute servers must be ≥ 1".into()));
    }
    let size = config.pool_size();
    let class_fractions: Vec<f64> = config
        .classes()
        .iter()
        .map(|c| c.count as f64 / size as f64)
        .collect();
    let pooled_mean = class_fractions.iter().zip(moments).map(|(b, m)| b * m.mean).sum::<f64>();
    let pooled_variance: f64 = moments.iter().map(|m| m.variance).sum();
    if !(pooled_variance > 0.0) {
        return Err(Error::DegenerateVariance);
    }
    let sizef = size as f64;
    let normalized_compute = (n as f64 - sizef * pooled_mean) / (sizef.sqrt() * pooled_variance.sqrt());
    Ok(PoolMoments {
        class_fractions,
        pooled_mean,
        pooled_variance,
        normalized_compute,
        pool_size: size,
        compute_servers: n,
    })
}

/// The computational term `1 / (sqrt(2 pi |M| sigma^2) (exp(alpha^2/2) - 1))`.
pub fn computational_term(pool_size: usize, sigma_sq: f64, alpha: f64) -> f64 {
    1.0 / ((2.0 * PI * pool_size as f64 * sigma_sq).sqrt() * (alpha * alpha / 2.0).exp_m1())
}

/// Large-pool blocking. The computational part is shared by every class;
/// values are capped at one.
pub fn blocking_approx(
    config: &PoolConfig,
    pm: &PoolMoments,
    moments: &[ClassMoments],
) -> Result<BlockingReport> {
    if moments.len() != config.num_classes() {
        return Err(Error::Mismatch("one ClassMoments per class required".into()));
    }
    let alpha = pm.normalized_compute;
    if !(alpha > 0.0) {
        return Err(Error::ApproximationOutOfRange { alpha });
    }
    let computational = computational_term(pm.pool_size, pm.pooled_variance, alpha).min(1.0);
    let per_class_radio: Vec<f64> = moments.iter().map(|m| m.isolated_radio_blocking).collect();
    let per_class_overall = per_class_radio
        .iter()
        .map(|r| (r + computational).min(1.0))
        .collect();
    Ok(BlockingReport {
        per_class_radio,
        computational,
        per_class_overall,
        method: Method::Approximate,
    })
}

/// Convenience: exact moments, then [`blocking_approx`] at the pool's `N`.
pub fn blocking_approx_for(config: &PoolConfig) -> Result<BlockingReport> {
    let moments = exact_class_moments(config)?;
    let pm = pool_moments(config, &moments, config.compute_servers())?;
    blocking_approx(config, &pm, &moments)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UtilizationLimit {
    /// `|M| mu / N`.
    pub value: f64,
    /// Whether `N >= M^T K`, where the limit theorem applies.
    pub sufficiently_provisioned: bool,
}

pub fn utilization_limit(config: &PoolConfig, pm: &PoolMoments) -> UtilizationLimit {
    let value = pm.pool_size as f64 * pm.pooled_mean / pm.compute_servers as f64;
    let sufficiently_provisioned = pm.compute_servers >= config.radio_capacity();
    if sufficiently_provisioned {
        debug_assert!(value < 1.0);
    }
    UtilizationLimit {
        value,
        sufficiently_provisioned,
    }
}

/// Smallest normalized compute `alpha*` keeping the computational term at
/// or below `delta`.
pub fn knee_alpha(pool_size: usize, sigma_sq: f64, delta: f64) -> f64 {
    let x = (2.0 * PI * pool_size as f64 * sigma_sq * delta * delta).sqrt();
    (2.0 * (1.0 / x).ln_1p()).sqrt()
}

/// Knee point from the closed forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KneePoint {
    pub alpha: f64,
    /// `ceil(|M| mu + alpha* sqrt(|M|) sigma)`.
    pub servers: usize,
    /// Residual pooling gain at the knee, `sigma alpha* sqrt(|M|) / M^T K`
    /// (before rounding the server count up).
    pub gain: f64,
    /// `alpha* / sqrt(|M|) * [sigma / max K, sigma / min K]`.
    pub gain_bracket: (f64, f64),
}

pub fn knee_servers_approx(config: &PoolConfig, pm: &PoolMoments, delta: f64) -> KneePoint {
    let size = pm.pool_size as f64;
    let sigma = pm.pooled_variance.sqrt();
    let alpha = knee_alpha(pm.pool_size, pm.pooled_variance, delta);
    let excess = alpha * size.sqrt() * sigma;
    let servers = (size * pm.pooled_mean + excess).ceil() as usize;
    let gain = excess / config.radio_capacity() as f64;
    let scale = alpha / size.sqrt() * sigma;
    let gain_bracket = (
        scale / config.max_radio_servers() as f64,
        scale / config.min_radio_servers() as f64,
    );
    KneePoint {
        alpha,
        servers,
        gain,
        gain_bracket,
    }
}

/// Smallest `N` whose exact blocking stays within `delta` of the isolated
/// radio blocking for every class, by bisection on `1..=M^T K`.
pub fn knee_servers_exact(config: &PoolConfig, delta: f64) -> Result<usize> {
    let floors = exact_class_moments(config)?;
    let meets = |n: usize| -> Result<bool> {
        let report = blocking_recursive(&config.with_compute_servers(n)?);
        Ok(report
            .per_class_overall
            .iter()
            .zip(&floors)
            .all(|(p, m)| *p <= m.isolated_radio_blocking + delta))
    };
    let (mut lo, mut hi) = (1usize, config.radio_capacity());
    if meets(lo)? {
        return Ok(lo);
    }
    // invariant: !meets(lo), meets(hi)
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if meets(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    SmallPool,
    Transitional,
    LargePool,
}

/// Regime by `sqrt(2 pi |M| sigma^2 delta^2)` (below 0.1, above 10), and the
/// local slope of `ln g_r*` against `ln |M|` between `|M|` and `2|M|`.
pub fn scaling_regime(pool_size: usize, sigma_sq: f64, delta: f64) -> (Regime, f64) {
    let x = (2.0 * PI * pool_size as f64 * sigma_sq * delta * delta).sqrt();
    let regime = if x < 0.1 {
        Regime::SmallPool
    } else if x > 10.0 {
        Regime::LargePool
    } else {
        Regime::Transitional
    };
    // g_r* = sigma alpha* sqrt|M| / M^T K and M^T K is proportional to |M|
    let gain = |m: usize| knee_alpha(m, sigma_sq, delta) / (m as f64).sqrt();
    let exponent = (gain(2 * pool_size) / gain(pool_size)).ln() / 2f64.ln();
    (regime, exponent)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KneeMethod {
    ExactSearch,
    Approx,
}

/// Multiplexing-gain summary of a pool.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GainReport {
    /// Large-pool utilization `|M| mu / M^T K` once compute is sufficient.
    pub utilization_limit: f64,
    /// `(N - |M| mu) / M^T K` at the configured `N`.
    pub residual_gain: f64,
    pub knee_alpha: f64,
    pub knee_servers: usize,
    /// `N* / M^T K`.
    pub knee_normalized: f64,
    pub knee_gain: f64,
    pub knee_gain_bracket: (f64, f64),
    /// `(1 - N*/M^T K) / (1 - eta)`.
    pub achieved_gain_fraction: f64,
    pub regime: Regime,
    pub scaling_exponent: f64,
    pub delta: f64,
    pub method: KneeMethod,
}

pub fn gain_report(config: &PoolConfig, delta: f64, method: KneeMethod) -> Result<GainReport> {
    if !(delta > 0.0) {
        return Err(Error::Precondition(format!("delta must be positive, got {delta}")));
    }
    let moments = exact_class_moments(config)?;
    let pm = pool_moments(config, &moments, config.compute_servers())?;
    let capacity = config.radio_capacity() as f64;
    let load = pm.pool_size as f64 * pm.pooled_mean;
    let eta = load / capacity;
    let knee = knee_servers_approx(config, &pm, delta);
    let knee_servers = match method {
        KneeMethod::Approx => knee.servers,
        KneeMethod::ExactSearch => knee_servers_exact(config, delta)?,
    };
    let knee_normalized = knee_servers as f64 / capacity;
    let (regime, scaling_exponent) = scaling_regime(pm.pool_size, pm.pooled_variance, delta);
    Ok(GainReport {
        utilization_limit: eta,
        residual_gain: (config.compute_servers() as f64 - load) / capacity,
        knee_alpha: knee.alpha,
        knee_servers,
        knee_normalized,
        knee_gain: knee.gain,
        knee_gain_bracket: knee.gain_bracket,
        achieved_gain_fraction: (1.0 - knee_normalized) / (1.0 - eta),
        regime,
        scaling_exponent,
        delta,
        method,
    })
}
