//! The series and integral constants `W_α`, `S_α`, `K_α`.
//!
//! Both series are summed to a cut-off `J` and closed with an integral tail.
//! For a convex decreasing summand `f`, `f(j) ≤ ∫_{j-1/2}^{j+1/2} f`, so
//! `Σ_{j>J} f(j) ≤ ∫_{J+1/2}^∞ f` and the returned values are upper bounds.
//! The slack of that tail bound is about `|f'(J)|/24`, and `J` is raised until
//! the slack is below `1e-13` of the partial sum.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::util::GaussLegendre;

const TARGET_SLACK: f64 = 1e-13;
const MIN_TERMS: u64 = 64;
const MAX_TERMS: u64 = 10_000_000;

/// `W_α = 2 Σ_{j≥1} j^{-α}` for `α > 1`, as a certified upper value.
pub fn constant_w(alpha: f64) -> Result<f64> {
    if !(alpha > 1.0) {
        return Err(Error::Divergent { constant: "W", alpha });
    }
    let mut terms = MIN_TERMS;
    loop {
        let partial = w_partial(alpha, terms);
        let slack = alpha * (terms as f64 + 0.5).powf(-alpha - 1.0) / 24.0;
        if slack <= TARGET_SLACK * partial || terms >= MAX_TERMS {
            return Ok(2.0 * (partial + w_tail(alpha, terms)));
        }
        terms = (terms * 4).min(MAX_TERMS);
    }
}

/// `W_α` with an explicit cut-off, for convergence studies.
pub fn constant_w_with_terms(alpha: f64, terms: u64) -> Result<f64> {
    if !(alpha > 1.0) {
        return Err(Error::Divergent { constant: "W", alpha });
    }
    Ok(2.0 * (w_partial(alpha, terms) + w_tail(alpha, terms)))
}

fn w_partial(alpha: f64, terms: u64) -> f64 {
    // smallest terms first
    (1..=terms).rev().map(|j| (j as f64).powf(-alpha)).sum()
}

fn w_tail(alpha: f64, terms: u64) -> f64 {
    (terms as f64 + 0.5).powf(1.0 - alpha) / (alpha - 1.0)
}

/// `S_α = (Σ_k k² (1+|k|)^{-2α})^{1/2}` for `α > 3/2`, as a certified upper value.
pub fn constant_s(alpha: f64) -> Result<f64> {
    if !(alpha > 1.5) {
        return Err(Error::Divergent { constant: "S", alpha });
    }
    let mut terms = MIN_TERMS.max(s_convexity_start(alpha));
    loop {
        let partial = s_partial(alpha, terms);
        let x = terms as f64 + 0.5;
        let slack = (2.0 * alpha - 2.0) * (1.0 + x).powf(1.0 - 2.0 * alpha) / 24.0;
        if slack <= TARGET_SLACK * partial || terms >= MAX_TERMS {
            return Ok((2.0 * (partial + s_tail(alpha, terms))).sqrt());
        }
        terms = (terms * 4).min(MAX_TERMS);
    }
}

/// `S_α` with an explicit cut-off (raised to the convexity threshold).
pub fn constant_s_with_terms(alpha: f64, terms: u64) -> Result<f64> {
    if !(alpha > 1.5) {
        return Err(Error::Divergent { constant: "S", alpha });
    }
    let terms = terms.max(s_convexity_start(alpha));
    Ok((2.0 * (s_partial(alpha, terms) + s_tail(alpha, terms))).sqrt())
}

/// `x² (1+x)^{-2α}` is convex for `x ≥ (α+1)/(α-1)`.
fn s_convexity_start(alpha: f64) -> u64 {
    ((alpha + 1.0) / (alpha - 1.0)).ceil() as u64 + 1
}

fn s_term(alpha: f64, k: f64) -> f64 {
    k * k * (1.0 + k).powf(-2.0 * alpha)
}

fn s_partial(alpha: f64, terms: u64) -> f64 {
    (1..=terms).rev().map(|k| s_term(alpha, k as f64)).sum()
}

/// `∫_{J+1/2}^∞ x²(1+x)^{-2α} dx` in closed form, `u = 1 + x`.
fn s_tail(alpha: f64, terms: u64) -> f64 {
    let u = terms as f64 + 1.5;
    let a2 = 2.0 * alpha;
    u.powf(3.0 - a2) / (a2 - 3.0) - 2.0 * u.powf(2.0 - a2) / (a2 - 2.0)
        + u.powf(1.0 - a2) / (a2 - 1.0)
}

/// `K_α`: the certified closed bound and an informational numeric estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KConstant {
    /// `(1 + 2^α) ∫ (1+|s|)^{-α} ds = (1 + 2^α) · 2/(α−1)`.
    pub certified: f64,
    /// `min(certified, 1.001 · sup over a log-spaced x grid)`; not certified.
    pub sharpened: f64,
}

/// Closed bound on `K_α` for `α > 1`.
pub fn constant_k(alpha: f64) -> Result<f64> {
    if !(alpha > 1.0) {
        return Err(Error::Divergent { constant: "K", alpha });
    }
    Ok((1.0 + 2f64.powf(alpha)) * 2.0 / (alpha - 1.0))
}

/// [`constant_k`] together with the numeric sharpening.
pub fn constant_k_detailed(alpha: f64) -> Result<KConstant> {
    let certified = constant_k(alpha)?;
    let numeric = std::iter::once(0.0)
        .chain((0..=120).map(|i| 10f64.powf(-3.0 + 7.0 * i as f64 / 120.0)))
        .map(|x| (1.0 + x).powf(alpha) * k_integral(alpha, x))
        .fold(0.0, f64::max);
    Ok(KConstant {
        certified,
        sharpened: certified.min(numeric * (1.0 + 1e-3)),
    })
}

/// `∫_R (1+|s|)^{-α} (1+|x-s|)^{-α} ds` for `x ≥ 0`.
fn k_integral(alpha: f64, x: f64) -> f64 {
    let rule = GaussLegendre::sixteen();
    // Both half-lines outside [0, x] contribute the same amount.
    let outer = half_line(alpha, |t| (1.0 + t).powf(-alpha) * (1.0 + x + t).powf(-alpha), rule);
    let inner: f64 = if x > 0.0 {
        let mut acc = 0.0;
        let mut a = 0.0;
        let mut b = (x / 2.0).min(1.0);
        while a < x / 2.0 {
            acc += rule.integrate(a, b, |s: f64| {
                (1.0 + s).powf(-alpha) * (1.0 + x - s).powf(-alpha)
            });
            a = b;
            b = (2.0 * b).min(x / 2.0);
        }
        2.0 * acc
    } else {
        0.0
    };
    2.0 * outer + inner
}

/// `∫_0^∞ f` over dyadic pieces, for `f` decaying at least like `t^{-α}`.
fn half_line<F: Fn(f64) -> f64>(alpha: f64, f: F, rule: &GaussLegendre) -> f64 {
    let mut acc = rule.integrate(0.0, 1.0, &f);
    let mut a = 1.0;
    for _ in 0..80 {
        acc += rule.integrate(a, 2.0 * a, &f);
        a *= 2.0;
    }
    // remaining tail ≤ ∫_a^∞ t^{-2α}
    acc + a.powf(1.0 - 2.0 * alpha) / (2.0 * alpha - 1.0)
}

/// `W_α`, `K_α`, `S_α` for one decay exponent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LocalizationConstants {
    pub alpha: f64,
    pub w: f64,
    pub k: f64,
    pub s: f64,
}

impl LocalizationConstants {
    pub fn for_alpha(alpha: f64) -> Result<Self> {
        Ok(LocalizationConstants {
            alpha,
            w: constant_w(alpha)?,
            k: constant_k(alpha)?,
            s: constant_s(alpha)?,
        })
    }
}

/// `π/√3 = (Σ_{k≠0} k^{-2})^{1/2}`.
pub(crate) fn pi_over_sqrt3() -> f64 {
    PI / 3f64.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn w_at_even_integers() {
        let w2 = constant_w(2.0).unwrap();
        assert!(w2 >= PI * PI / 3.0 - 1e-15);
        assert!((w2 - PI * PI / 3.0).abs() < 1e-11);
        let w4 = constant_w(4.0).unwrap();
        assert!((w4 - PI.powi(4) / 45.0).abs() < 1e-11);
    }

    #[test]
    fn w_near_divergence() {
        let w = constant_w(1.0001).unwrap();
        assert!(w.is_finite() && w > 1e4);
        assert!(matches!(constant_w(1.0), Err(Error::Divergent { .. })));
        assert!(matches!(constant_w(0.5), Err(Error::Divergent { .. })));
    }

    #[test]
    fn w_upper_value_is_stable_under_more_terms() {
        for alpha in [1.2, 2.0, 3.5] {
            let base = constant_w(alpha).unwrap();
            let more = constant_w_with_terms(alpha, 2_000_000).unwrap();
            assert!(more <= base * (1.0 + 1e-9), "alpha = {alpha}");
        }
    }

    #[test]
    fn s_limits_and_divergence() {
        // dominated by the k = ±1 terms for large alpha
        let s10 = constant_s(10.0).unwrap();
        let lead = 2f64.sqrt() * 2f64.powi(-10);
        assert!(s10 > lead && (s10 / lead - 1.0) < 1e-3);
        assert!(matches!(constant_s(1.5), Err(Error::Divergent { .. })));
        let more = constant_s_with_terms(2.0, 5_000_000).unwrap();
        assert!(more <= constant_s(2.0).unwrap() * (1.0 + 1e-9));
    }

    #[test]
    fn s_convexity_threshold_holds() {
        for alpha in [1.6, 2.0, 3.0, 8.0] {
            let start = s_convexity_start(alpha) as f64;
            for i in 0..200 {
                let x = start + i as f64 * 0.37;
                let h = 1e-3;
                let second = s_term(alpha, x + h) - 2.0 * s_term(alpha, x) + s_term(alpha, x - h);
                assert!(second > -1e-18, "alpha {alpha} x {x}");
            }
        }
    }

    #[test]
    fn k_closed_bounds() {
        assert_eq!(constant_k(2.0).unwrap(), 10.0);
        assert_eq!(constant_k(3.0).unwrap(), 9.0);
        for alpha in [1.5, 2.0, 3.0, 5.0] {
            let k = constant_k_detailed(alpha).unwrap();
            assert!(k.sharpened <= k.certified);
            assert!(k.sharpened > 0.0);
        }
    }

    #[test]
    fn k_integral_at_zero_is_closed_form() {
        // ∫ (1+|s|)^{-2α} ds = 2/(2α-1)
        let v = k_integral(2.0, 0.0);
        assert!((v - 2.0 / 3.0).abs() < 1e-12);
    }
}
