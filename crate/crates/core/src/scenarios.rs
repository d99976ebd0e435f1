//! Single-VBS statistics for the two traffic scenarios.
//!
//! Real-time traffic holds one server per session (`f(i) = i mu`), so an
//! isolated VBS is an Erlang loss system. Delay-tolerant traffic shares a
//! constant service rate (`f(i) = mu`), giving truncated geometric occupancy.

use serde::Serialize;

use crate::approx::ClassMoments;
use crate::error::{Error, Result};
use crate::model::{ClassSpec, Discipline};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    RealTime,
    DelayTolerant,
}

impl From<Discipline> for Scenario {
    fn from(d: Discipline) -> Self {
        match d {
            Discipline::PerSession => Scenario::RealTime,
            Discipline::SharedCapacity => Scenario::DelayTolerant,
        }
    }
}

/// Moments of the occupancy of one VBS with unlimited compute servers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioMoments {
    /// From the truncated distribution itself.
    pub exact: ClassMoments,
    /// Closed-form large-`K` approximations; `None` outside their regime.
    pub approximate: Option<ClassMoments>,
    pub scenario: Scenario,
}

/// Erlang-B blocking via `B(k) = a B(k-1) / (k + a B(k-1))`.
pub fn erlang_b(a: f64, k: usize) -> f64 {
    let mut b = 1.0;
    for i in 1..=k {
        b = a * b / (i as f64 + a * b);
    }
    b
}

fn exact_moments(class: &ClassSpec) -> ClassMoments {
    let w = class.weights();
    ClassMoments {
        mean: w.mean(),
        variance: w.variance(),
        isolated_radio_blocking: w.isolated_blocking(),
    }
}

fn check_load(a: f64) -> Result<()> {
    if a.is_finite() && a > 0.0 {
        Ok(())
    } else {
        Err(Error::Precondition(format!("traffic load must be positive, got {a}")))
    }
}

/// Real-time moments: exact from `a^n / n!` on `0..=K`, approximate
/// `mu = sigma^2 = a`.
pub fn realtime_moments(a: f64, k: usize) -> Result<ScenarioMoments> {
    check_load(a)?;
    let exact = exact_moments(&ClassSpec::with_load(1, k.max(1), a, Discipline::PerSession));
    Ok(ScenarioMoments {
        approximate: Some(ClassMoments {
            mean: a,
            variance: a,
            isolated_radio_blocking: exact.isolated_radio_blocking,
        }),
        exact,
        scenario: Scenario::RealTime,
    })
}

/// `A(a, K) = sum_{i<=K} a^i` and its first two derivatives in `a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometricSums {
    pub a: f64,
    pub d1: f64,
    pub d2: f64,
}

/// Distance from `a = 1` below which the sums are added term by term.
const CLOSED_FORM_MARGIN: f64 = 1e-2;

pub fn aux_a(a: f64, k: usize) -> GeometricSums {
    if (1.0 - a).abs() > CLOSED_FORM_MARGIN {
        aux_a_closed(a, k)
    } else {
        aux_a_direct(a, k)
    }
}

fn aux_a_closed(a: f64, k: usize) -> GeometricSums {
    let kf = k as f64;
    let one_minus = 1.0 - a;
    let a_k = a.powi(k as i32);
    let sum = (1.0 - a * a_k) / one_minus;
    let d1 = (1.0 - (kf + 1.0) * a_k + kf * a * a_k) / (one_minus * one_minus);
    // (1 - a) A = 1 - a^(K+1), differentiated twice
    let d2 = if k < 2 {
        0.0
    } else {
        (2.0 * d1 - kf * (kf + 1.0) * a.powi(k as i32 - 1)) / one_minus
    };
    GeometricSums { a: sum, d1, d2 }
}

fn aux_a_direct(a: f64, k: usize) -> GeometricSums {
    let mut s = GeometricSums {
        a: 0.0,
        d1: 0.0,
        d2: 0.0,
    };
    for i in 0..=k {
        let fi = i as f64;
        s.a += a.powi(i as i32);
        if i >= 1 {
            s.d1 += fi * a.powi(i as i32 - 1);
        }
        if i >= 2 {
            s.d2 += fi * (fi - 1.0) * a.powi(i as i32 - 2);
        }
    }
    s
}

/// Large-`K` geometric moments `mu = a/(1-a)`,
/// `sigma^2 = a/(1-a) + a^2/(1-a)^2`. Requires `a < 1`.
pub fn geometric_approx_moments(a: f64, k: usize) -> Result<ClassMoments> {
    check_load(a)?;
    if a >= 1.0 {
        return Err(Error::Precondition(format!(
            "geometric approximation needs a < 1, got {a}"
        )));
    }
    let r = a / (1.0 - a);
    let s = aux_a(a, k);
    Ok(ClassMoments {
        mean: r,
        variance: r + r * r,
        isolated_radio_blocking: a.powi(k as i32) / s.a,
    })
}

/// Largest `K^2 a^K` for which the geometric approximation is reported.
pub const GEOMETRIC_TAIL_LIMIT: f64 = 1e-3;

/// Delay-tolerant moments. The approximate forms are withheld when
/// `a >= 1` or `K^2 a^K > 1e-3`; use [`geometric_approx_moments`] to force them.
pub fn delaytolerant_moments(a: f64, k: usize) -> Result<ScenarioMoments> {
    check_load(a)?;
    let exact = exact_moments(&ClassSpec::with_load(1, k.max(1), a, Discipline::SharedCapacity));
    let tail = (k * k) as f64 * a.powi(k as i32);
    let approximate = if a < 1.0 && tail <= GEOMETRIC_TAIL_LIMIT {
        Some(geometric_approx_moments(a, k)?)
    } else {
        None
    };
    Ok(ScenarioMoments {
        exact,
        approximate,
        scenario: Scenario::DelayTolerant,
    })
}

/// Moments of a class, by the scenario its discipline selects.
pub fn class_moments(class: &ClassSpec) -> Result<ScenarioMoments> {
    match class.discipline {
        Discipline::PerSession => realtime_moments(class.load(), class.radio_servers),
        Discipline::SharedCapacity => delaytolerant_moments(class.load(), class.radio_servers),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn erlang_b_direct(a: f64, k: usize) -> f64 {
        // sum in log space to reach K = 100
        let ln: Vec<f64> = (0..=k)
            .map(|i| i as f64 * a.ln() - (1..=i).map(|j| (j as f64).ln()).sum::<f64>())
            .collect();
        (ln[k] - crate::numeric::log_sum_exp(&ln)).exp()
    }

    #[test]
    fn erlang_b_values() {
        assert_relative_eq!(erlang_b(2.0, 2), 0.4, max_relative = 1e-15);
        assert_eq!(erlang_b(3.3, 0), 1.0);
        let b = erlang_b(20.0, 30);
        assert!(b > 5e-3 && b < 1.5e-2, "{b}");
        assert_relative_eq!(b, erlang_b_direct(20.0, 30), max_relative = 1e-12);
    }

    #[test]
    fn realtime_examples() {
        let m = realtime_moments(20.0, 30).unwrap();
        assert_relative_eq!(m.exact.mean, 20.0 * (1.0 - erlang_b(20.0, 30)), max_relative = 1e-12);
        assert_eq!(m.approximate.as_ref().unwrap().mean, 20.0);
        assert_eq!(m.approximate.as_ref().unwrap().variance, 20.0);

        let wide = realtime_moments(20.0, 200).unwrap();
        assert!((wide.exact.mean - 20.0).abs() < 1e-9);
        assert!((wide.exact.variance - 20.0).abs() < 1e-9);

        let tiny = realtime_moments(1.0, 1).unwrap();
        assert_relative_eq!(tiny.exact.mean, 0.5, max_relative = 1e-15);
    }

    #[test]
    fn realtime_mean_error_bounded_by_blocking() {
        for (a, k) in [(5.0, 15), (20.0, 35), (50.0, 75)] {
            let b = erlang_b(a, k);
            if b <= 1e-2 {
                let m = realtime_moments(a, k).unwrap();
                assert!((m.exact.mean - a).abs() <= a * 1e-2);
            }
        }
    }

    #[test]
    fn aux_a_examples() {
        let s = aux_a(0.5, 2);
        assert_relative_eq!(s.a, 1.75, max_relative = 1e-14);
        assert_relative_eq!(s.d1, 2.0, max_relative = 1e-14);
        assert_relative_eq!(s.d2, 2.0, max_relative = 1e-14);
        let z = aux_a(0.7, 0);
        assert_eq!((z.a, z.d1, z.d2), (1.0, 0.0, 0.0));
        let one = aux_a(1.0, 4);
        assert_eq!((one.a, one.d1, one.d2), (5.0, 10.0, 20.0));
    }

    #[test]
    fn delaytolerant_examples() {
        let approx = geometric_approx_moments(0.5, 10).unwrap();
        assert_relative_eq!(approx.mean, 1.0, max_relative = 1e-15);
        assert_relative_eq!(approx.variance, 2.0, max_relative = 1e-15);

        let m = delaytolerant_moments(0.5, 10).unwrap();
        // K^2 a^K is about 0.098 here, above the reporting limit
        assert!(m.approximate.is_none());
        let expected = 0.5f64.powi(10) / aux_a(0.5, 10).a;
        assert_relative_eq!(m.exact.isolated_radio_blocking, expected, max_relative = 1e-13);
        assert!((m.exact.isolated_radio_blocking - 4.9e-4).abs() < 1e-5);
        assert!((m.exact.mean - approx.mean).abs() <= 10.0 * 0.098);

        let small = delaytolerant_moments(1e-4, 5).unwrap();
        assert!((small.exact.mean - 1e-4).abs() < 2e-8);
        assert_relative_eq!(small.exact.isolated_radio_blocking, 1e-20, max_relative = 1e-3);

        let deep = delaytolerant_moments(0.3, 30).unwrap();
        assert!(deep.approximate.is_some());
        assert!(geometric_approx_moments(1.2, 10).is_err());
        assert!(delaytolerant_moments(1.2, 10).unwrap().approximate.is_none());
    }

    #[test]
    fn delaytolerant_exact_matches_aux_formulas() {
        for (a, k) in [(0.5, 10), (0.2, 4), (1.5, 7), (0.999, 12)] {
            let s = aux_a(a, k);
            let m = delaytolerant_moments(a, k).unwrap();
            let mean = a * s.d1 / s.a;
            let second = (a * s.d1 + a * a * s.d2) / s.a;
            assert_relative_eq!(m.exact.mean, mean, max_relative = 1e-12);
            assert_relative_eq!(m.exact.variance, second - mean * mean, max_relative = 1e-10);
        }
    }

    proptest! {
        #[test]
        fn closed_forms_match_direct_sums(
            a in prop_oneof![0.05f64..0.95, 1.05f64..3.0],
            k in 0usize..60,
        ) {
            let c = aux_a_closed(a, k);
            let d = aux_a_direct(a, k);
            let rel = |x: f64, y: f64| crate::numeric::relative_difference(x, y);
            prop_assert!(rel(c.a, d.a) <= 1e-10);
            prop_assert!(rel(c.d1, d.d1) <= 1e-10);
            prop_assert!(rel(c.d2, d.d2) <= 1e-10);
        }

        #[test]
        fn erlang_b_recurrence_matches_direct_sum(a in 0.5f64..50.0, k in 0usize..=100) {
            let r = erlang_b(a, k);
            let d = erlang_b_direct(a, k);
            prop_assert!(crate::numeric::relative_difference(r, d) <= 1e-12);
        }

        #[test]
        fn erlang_b_monotone(a in 0.1f64..40.0, k in 1usize..60) {
            prop_assert!(erlang_b(a * 1.1, k) > erlang_b(a, k));
            prop_assert!(erlang_b(a, k + 1) < erlang_b(a, k));
        }

        #[test]
        fn geometric_mean_error_order(a in 0.1f64..0.9, k in 10usize..=50) {
            let exact = delaytolerant_moments(a, k).unwrap().exact.mean;
            let approx = geometric_approx_moments(a, k).unwrap().mean;
            let tail = (k * k) as f64 * a.powi(k as i32);
            prop_assert!((approx - exact).abs() <= 10.0 * tail + 1e-13 * exact);
        }
    }
}
