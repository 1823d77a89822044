//! Explicit a-priori bounds for convolutive inverses and their applications.
//!
//! Everything here is plain arithmetic on externally supplied inputs: the
//! lower symbol bound `A` may come from [`crate::symbol::SymbolGrid::certify_range`],
//! from a gramian, or from an analytic formula.
//!
//! The central quantities of the spline-space bounds share the factor
//!
//! ```text
//! D = 1/A + π/(A²√3) · C² K_α S_α = (A + κ)/A²,   κ = (π/√3) C² K_α S_α,
//! ```
//!
//! which bounds `‖b‖₁` for the inverse `b` of the autocorrelation of a
//! generator with decay certificate `(C, α)`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::constants::{pi_over_sqrt3, LocalizationConstants};
use crate::error::{Error, Result};
use crate::sequence::MultiIndex;
use crate::util::reciprocal_exponent;

/// Pointwise decay `|φ(x)| ≤ C (1+|x|)^{-α}` with `α > 3/2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayCertificate {
    pub c: f64,
    pub alpha: f64,
}

impl DecayCertificate {
    pub fn new(c: f64, alpha: f64) -> Result<Self> {
        let cert = DecayCertificate { c, alpha };
        cert.validate()?;
        Ok(cert)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::HypothesisFailed(format!(
                "decay amplitude C must be positive, got {}",
                self.c
            )));
        }
        if !(self.alpha > 1.5 && self.alpha.is_finite()) {
            return Err(Error::HypothesisFailed(format!(
                "decay exponent must exceed 3/2, got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    /// `C (1+|x|)^{-α}`.
    pub fn envelope(&self, x: f64) -> f64 {
        self.c * (1.0 + x.abs()).powf(-self.alpha)
    }
}

/// A bound value together with the inputs it was computed from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub name: String,
    pub inputs: BTreeMap<String, f64>,
    pub value: f64,
    /// True only if every hypothesis of the bound was checked and holds.
    pub valid: bool,
}

impl BoundReport {
    pub fn new(name: impl Into<String>, inputs: &[(&str, f64)], value: f64, valid: bool) -> Self {
        BoundReport {
            name: name.into(),
            inputs: inputs.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            value,
            valid,
        }
    }
}

fn require_positive_a(a: f64) -> Result<()> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::HypothesisFailed(format!(
            "lower symbol bound A must be positive, got {a}"
        )));
    }
    Ok(())
}

/// Upper bounds on `M^γ_op(b)` for all `γ ≤ α`, where `b` is the inverse of
/// a sequence `a` with `|â| ≥ A` and `momenta_a[β] ≥ M^β_op(a)`.
///
/// `m_b[0] = 1/A` and, for `γ ≠ 0`,
/// `m_b[γ] = (1/A) Σ_{β<γ} binom(γ,β) m_b[β] momenta_a[γ−β]`.
/// Only strictly smaller indices enter, so the traversal order of
/// [`MultiIndex::lower_set`] suffices.
pub fn bound_recursive_op(
    momenta_a: &BTreeMap<MultiIndex, f64>,
    a: f64,
    alpha: &MultiIndex,
) -> Result<BTreeMap<MultiIndex, f64>> {
    require_positive_a(a)?;
    let order = alpha.lower_set();
    for gamma in &order {
        if !gamma.is_zero() && !momenta_a.contains_key(gamma) {
            return Err(Error::MissingMomentum(gamma.clone()));
        }
    }
    let mut m_b: BTreeMap<MultiIndex, f64> = BTreeMap::new();
    for gamma in order {
        let value = if gamma.is_zero() {
            1.0 / a
        } else {
            let sum: f64 = gamma
                .lower_set()
                .into_iter()
                .filter(|beta| beta != &gamma)
                .map(|beta| {
                    let diff = gamma.checked_sub(&beta).expect("beta ≤ gamma");
                    gamma.binomial(&beta) * m_b[&beta] * momenta_a[&diff]
                })
                .sum();
            sum / a
        };
        m_b.insert(gamma, value);
    }
    Ok(m_b)
}

/// One-dimensional symmetric bounds `(M¹₂(b), ‖b‖₁)`:
/// `M¹₂(b) ≤ M¹₂(a)/A²` and `‖b‖₁ ≤ 1/A + π M¹₂(a)/(A²√3)`.
pub fn bound_one_dim(m12_a: f64, a: f64) -> Result<(f64, f64)> {
    require_positive_a(a)?;
    if !(m12_a >= 0.0) {
        return Err(Error::HypothesisFailed(format!(
            "momentum must be non-negative, got {m12_a}"
        )));
    }
    let m12_b = m12_a / (a * a);
    Ok((m12_b, 1.0 / a + pi_over_sqrt3() * m12_b))
}

/// Factors shared by the spline-space bounds for one `(C, α, A)` triple.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DualWindowFactors {
    pub constants: LocalizationConstants,
    pub c: f64,
    pub a: f64,
    /// `κ = (π/√3) C² K_α S_α`, also a bound on `(π/√3) M¹₂(a)`.
    pub kappa: f64,
    /// `D = 1/A + κ/A²`, the bound on `‖b‖₁`.
    pub inverse_l1: f64,
    /// `C W_α`, the bound on `‖φ‖_{W(L^∞,ℓ¹)}`.
    pub phi_w: f64,
}

impl DualWindowFactors {
    pub fn new(cert: &DecayCertificate, a: f64) -> Result<Self> {
        cert.validate()?;
        require_positive_a(a)?;
        let constants = LocalizationConstants::for_alpha(cert.alpha)?;
        let kappa = pi_over_sqrt3() * cert.c * cert.c * constants.k * constants.s;
        Ok(DualWindowFactors {
            constants,
            c: cert.c,
            a,
            kappa,
            inverse_l1: 1.0 / a + kappa / (a * a),
            phi_w: cert.c * constants.w,
        })
    }

    /// `‖ψ‖_{W(L^∞,ℓ¹)} ≤ D · C W_α`.
    pub fn psi_w(&self) -> f64 {
        self.inverse_l1 * self.phi_w
    }
}

/// `(‖φ‖_W bound, ‖ψ‖_W bound) = (C W_α, (1/A + π C² K_α S_α/(A²√3)) C W_α)`.
pub fn bound_dual_window(cert: &DecayCertificate, a: f64) -> Result<(f64, f64)> {
    let f = DualWindowFactors::new(cert, a)?;
    Ok((f.phi_w, f.psi_w()))
}

/// `p`-Riesz bounds valid for every `1 ≤ p ≤ ∞`:
/// `r = A² / (C W_α (A + κ))` and `R = C W_α`.
pub fn bound_riesz(cert: &DecayCertificate, a: f64) -> Result<(f64, f64)> {
    let f = DualWindowFactors::new(cert, a)?;
    Ok((1.0 / f.psi_w(), f.phi_w))
}

fn check_q(q: f64) -> Result<()> {
    if !(q > 1.0) {
        return Err(Error::HypothesisFailed(format!(
            "derivative integrability exponent q must exceed 1, got {q}"
        )));
    }
    Ok(())
}

/// Contraction factor of the sampling scheme for a `δ`-dense set:
/// `ρ = C³W_α³ D² (2⌈δ⌉+1) ‖φ'‖_{W(L^q,ℓ¹)} δ^{1−1/q}`.
pub fn sampling_rho(
    cert: &DecayCertificate,
    a: f64,
    deriv_norm: f64,
    q: f64,
    delta: f64,
) -> Result<f64> {
    let f = DualWindowFactors::new(cert, a)?;
    rho_from_factors(&f, deriv_norm, q, delta)
}

pub(crate) fn rho_from_factors(
    f: &DualWindowFactors,
    deriv_norm: f64,
    q: f64,
    delta: f64,
) -> Result<f64> {
    check_q(q)?;
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::HypothesisFailed(format!(
            "density radius must be positive, got {delta}"
        )));
    }
    if !(deriv_norm >= 0.0) {
        return Err(Error::HypothesisFailed(format!(
            "derivative norm must be non-negative, got {deriv_norm}"
        )));
    }
    let lead = f.phi_w.powi(3) * f.inverse_l1 * f.inverse_l1;
    let cells = 2.0 * delta.ceil() + 1.0;
    Ok(lead * cells * deriv_norm * delta.powf(1.0 - reciprocal_exponent(q)))
}

const MAX_CEILING_SCAN: u64 = 1_000_000;
const DELTA_REL_PRECISION: f64 = 1e-12;

/// Largest `δ` with `sampling_rho(δ) ≤ rho_target`.
///
/// `ρ` is continuous and increasing between integer breakpoints and jumps up
/// at each of them, so the breakpoints are scanned first and the answer is
/// refined by bisection inside the last admissible piece. Returns `+∞` when
/// `ρ` vanishes identically.
pub fn solve_max_delta(
    cert: &DecayCertificate,
    a: f64,
    deriv_norm: f64,
    q: f64,
    rho_target: f64,
) -> Result<f64> {
    if !(rho_target > 0.0 && rho_target < 1.0) {
        return Err(Error::HypothesisFailed(format!(
            "rho target must lie in (0, 1), got {rho_target}"
        )));
    }
    let f = DualWindowFactors::new(cert, a)?;
    let rho = |d: f64| rho_from_factors(&f, deriv_norm, q, d);
    if deriv_norm == 0.0 {
        check_q(q)?;
        return Ok(f64::INFINITY);
    }
    for m in 1..=MAX_CEILING_SCAN {
        let right = m as f64;
        if rho(right)? <= rho_target {
            continue;
        }
        // ρ > target at the right end of (m−1, m]; bisect the continuous piece.
        let left = right - 1.0;
        let mut lo = left;
        let mut hi = right;
        if left == 0.0 {
            // ρ → 0 as δ → 0: find a positive admissible point.
            lo = right;
            while rho(lo)? > rho_target {
                lo *= 0.5;
                if lo < f64::MIN_POSITIVE {
                    return Err(Error::Infeasible("no positive delta reaches the target".into()));
                }
            }
            hi = (2.0 * lo).min(right);
        } else if rho(left + (right - left) * 1e-15)? > rho_target {
            // the jump at δ = m−1 already overshoots
            return Ok(left);
        }
        while hi - lo > DELTA_REL_PRECISION * lo {
            let mid = 0.5 * (lo + hi);
            if rho(mid)? <= rho_target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        return Ok(lo);
    }
    Ok(f64::INFINITY)
}

/// Sampling constants `(c_p, C_p)` with `c_p ‖f‖_p ≤ ‖(f(x_k))‖_p ≤ C_p ‖f‖_p`:
/// `C_p = N(X)^{1/p} C² W_α² D` and
/// `c_p = (1−ρ)(2δ)^{−1/p} C^{−2} W_α^{−2} A²/(A + κ)`.
pub fn sampling_bounds(
    cert: &DecayCertificate,
    a: f64,
    n_x: u64,
    delta: f64,
    rho: f64,
    p: f64,
) -> Result<(f64, f64)> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::HypothesisFailed(format!(
            "contraction factor must lie in [0, 1), got {rho}"
        )));
    }
    if n_x == 0 {
        return Err(Error::HypothesisFailed("relative separation must be at least 1".into()));
    }
    if !(p >= 1.0) {
        return Err(Error::HypothesisFailed(format!("p must be in [1, ∞], got {p}")));
    }
    if !(delta > 0.0) {
        return Err(Error::HypothesisFailed(format!(
            "density radius must be positive, got {delta}"
        )));
    }
    let f = DualWindowFactors::new(cert, a)?;
    let inv_p = reciprocal_exponent(p);
    let upper = (n_x as f64).powf(inv_p) * f.phi_w * f.psi_w();
    let lower = (1.0 - rho) * (2.0 * delta).powf(-inv_p) / (f.phi_w * f.psi_w());
    Ok((lower, upper))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::{constant_s, constant_w};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn mi(v: &[u32]) -> MultiIndex {
        MultiIndex::new(v.to_vec())
    }

    #[test]
    fn recursion_for_scaled_delta() {
        let c = 2.5;
        let alpha = mi(&[2, 1]);
        let momenta: BTreeMap<_, _> = alpha
            .lower_set()
            .into_iter()
            .map(|b| {
                let v = if b.is_zero() { c } else { 0.0 };
                (b, v)
            })
            .collect();
        let m = bound_recursive_op(&momenta, c, &alpha).unwrap();
        for (g, v) in &m {
            if g.is_zero() {
                assert_eq!(*v, 1.0 / c);
            } else {
                assert_eq!(*v, 0.0);
            }
        }
    }

    #[test]
    fn recursion_first_order_matches_one_dim_shape() {
        let momenta: BTreeMap<_, _> = [(mi(&[0]), 1.0), (mi(&[1]), 0.7)].into_iter().collect();
        let m = bound_recursive_op(&momenta, 0.4, &mi(&[1])).unwrap();
        assert_relative_eq!(m[&mi(&[1])], 0.7 / 0.16, max_relative = 1e-15);
        let (m12, _) = bound_one_dim(0.7, 0.4).unwrap();
        assert_relative_eq!(m12, m[&mi(&[1])], max_relative = 1e-15);
    }

    #[test]
    fn recursion_mixed_index_by_hand() {
        let (b0, b1, b2, b3) = (1.3, 0.2, 0.45, 0.11);
        let momenta: BTreeMap<_, _> = [
            (mi(&[0, 0]), b0),
            (mi(&[1, 0]), b1),
            (mi(&[0, 1]), b2),
            (mi(&[1, 1]), b3),
        ]
        .into_iter()
        .collect();
        let m = bound_recursive_op(&momenta, 1.0, &mi(&[1, 1])).unwrap();
        // m[(1,0)] = B1, m[(0,1)] = B2,
        // m[(1,1)] = m0 B3 + m[(1,0)] B2 + m[(0,1)] B1 = B3 + 2 B1 B2
        assert_relative_eq!(m[&mi(&[1, 0])], b1, max_relative = 1e-15);
        assert_relative_eq!(m[&mi(&[0, 1])], b2, max_relative = 1e-15);
        assert_relative_eq!(m[&mi(&[1, 1])], b3 + 2.0 * b1 * b2, max_relative = 1e-15);
    }

    #[test]
    fn recursion_errors() {
        let momenta: BTreeMap<_, _> = [(mi(&[0]), 1.0)].into_iter().collect();
        assert!(matches!(
            bound_recursive_op(&momenta, 1.0, &mi(&[1])),
            Err(Error::MissingMomentum(_))
        ));
        assert!(matches!(
            bound_recursive_op(&momenta, 0.0, &mi(&[0])),
            Err(Error::HypothesisFailed(_))
        ));
    }

    #[test]
    fn one_dim_examples() {
        assert_eq!(bound_one_dim(0.0, 1.0).unwrap(), (0.0, 1.0));
        let (m, l1) = bound_one_dim(2f64.sqrt() / 6.0, 1.0 / 3.0).unwrap();
        assert_relative_eq!(m, 3.0 * 2f64.sqrt() / 2.0, max_relative = 1e-14);
        assert_relative_eq!(l1, 3.0 + PI * 6f64.sqrt() / 2.0, max_relative = 1e-14);
        let (m, l1) = bound_one_dim(1.0, 0.5).unwrap();
        assert_relative_eq!(m, 4.0, max_relative = 1e-15);
        assert_relative_eq!(l1, 2.0 + 4.0 * PI / 3f64.sqrt(), max_relative = 1e-14);
        assert!(bound_one_dim(1.0, -1.0).is_err());
    }

    #[test]
    fn dual_window_formal_values() {
        let cert = DecayCertificate::new(1.0, 2.0).unwrap();
        let (phi, psi) = bound_dual_window(&cert, 1.0).unwrap();
        let w2 = PI * PI / 3.0;
        assert_relative_eq!(phi, w2, max_relative = 1e-10);
        let s2 = constant_s(2.0).unwrap();
        assert_relative_eq!(psi, (1.0 + PI * 10.0 * s2 / 3f64.sqrt()) * w2, max_relative = 1e-10);
        let mut prev = f64::INFINITY;
        for a in [0.01, 0.1, 1.0, 10.0, 100.0] {
            let (_, psi) = bound_dual_window(&cert, a).unwrap();
            assert!(psi < prev);
            prev = psi;
        }
        assert!(bound_dual_window(&cert, 0.0).is_err());
        assert!(DecayCertificate::new(1.0, 1.5).is_err());
    }

    #[test]
    fn riesz_product_identity_and_monotonicity() {
        let cert = DecayCertificate::new(1.2, 2.5).unwrap();
        let f = DualWindowFactors::new(&cert, 0.3).unwrap();
        let (r, big_r) = bound_riesz(&cert, 0.3).unwrap();
        assert_relative_eq!(r * big_r, 0.09 / (0.3 + f.kappa), max_relative = 1e-13);
        let mut prev = 0.0;
        for i in 0..=100 {
            let a = 0.01 * 1000f64.powf(i as f64 / 100.0);
            let (r, big_r) = bound_riesz(&cert, a).unwrap();
            assert!(r > prev && r <= big_r);
            let scaled = r / (a * a / (a + f.kappa));
            assert_relative_eq!(scaled, 1.0 / (1.2 * constant_w(2.5).unwrap()), max_relative = 1e-12);
            prev = r;
        }
    }

    #[test]
    fn rho_structure() {
        let cert = DecayCertificate::new(1.0, 2.0).unwrap();
        assert_eq!(sampling_rho(&cert, 0.5, 0.0, 4.0, 0.3).unwrap(), 0.0);
        let r1 = sampling_rho(&cert, 0.5, 2.0, f64::INFINITY, 0.4).unwrap();
        let r2 = sampling_rho(&cert, 0.5, 2.0, f64::INFINITY, 0.2).unwrap();
        assert!((r2 / r1 - 0.5).abs() < 1e-12);
        assert!(sampling_rho(&cert, 0.5, 2.0, 1.0, 0.2).is_err());
        assert!(sampling_rho(&cert, 0.5, 2.0, 2.0, 0.0).is_err());
    }

    #[test]
    fn max_delta_bisection_invariant() {
        let cert = DecayCertificate::new(32.0 / 27.0, 2.0).unwrap();
        let rho = |d: f64| sampling_rho(&cert, 1.0 / 3.0, 2.0, f64::INFINITY, d).unwrap();
        let d = solve_max_delta(&cert, 1.0 / 3.0, 2.0, f64::INFINITY, 0.5).unwrap();
        assert!(d > 0.0 && rho(d) <= 0.5 && rho(d * 1.01) > 0.5);
        let d99 = solve_max_delta(&cert, 1.0 / 3.0, 2.0, f64::INFINITY, 0.999).unwrap();
        assert!((0.99..1.0).contains(&rho(d99)));
        let half = solve_max_delta(&cert, 1.0 / 3.0, 4.0, f64::INFINITY, 0.5).unwrap();
        assert_relative_eq!(half, d / 2.0, max_relative = 1e-9);
        let q2 = solve_max_delta(&cert, 1.0 / 3.0, 2.0, 2.0, 0.5).unwrap();
        assert!(q2 > 0.0 && q2.is_finite());
        assert!(solve_max_delta(&cert, 1.0 / 3.0, 2.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn max_delta_across_ceiling_breakpoints() {
        // tiny prefactor so that the answer lies beyond δ = 1
        let cert = DecayCertificate::new(0.05, 4.0).unwrap();
        let a = 1.0;
        let d = solve_max_delta(&cert, a, 1e-4, f64::INFINITY, 0.5).unwrap();
        let rho = |x: f64| sampling_rho(&cert, a, 1e-4, f64::INFINITY, x).unwrap();
        assert!(d > 1.0, "{d}");
        assert!(rho(d) <= 0.5);
        assert!(rho(d * (1.0 + 1e-6)) > 0.5 || d.fract() == 0.0);
    }

    #[test]
    fn sampling_constants() {
        let cert = DecayCertificate::new(1.0, 2.0).unwrap();
        let (lo, hi) = sampling_bounds(&cert, 0.5, 3, 0.2, 0.4, f64::INFINITY).unwrap();
        let f = DualWindowFactors::new(&cert, 0.5).unwrap();
        assert_relative_eq!(hi, f.phi_w * f.psi_w(), max_relative = 1e-15);
        assert_relative_eq!(lo, 0.6 / (f.phi_w * f.psi_w()), max_relative = 1e-15);
        for p in [1.0, 2.0, 4.0, f64::INFINITY] {
            for rho in [0.0, 0.5, 0.99] {
                let (lo, hi) = sampling_bounds(&cert, 0.5, 2, 0.3, rho, p).unwrap();
                assert!(lo < hi);
            }
        }
        let (l1, _) = sampling_bounds(&cert, 0.5, 2, 0.3, 0.9, 2.0).unwrap();
        let (l2, _) = sampling_bounds(&cert, 0.5, 2, 0.3, 0.95, 2.0).unwrap();
        assert_relative_eq!(l2 / l1, 0.5, max_relative = 1e-12);
        assert!(sampling_bounds(&cert, 0.5, 2, 0.3, 1.0, 2.0).is_err());
    }
}
