//! Concrete generators `φ: R → R` with decay certificates.
//!
//! Three kinds are available: centered B-splines of order `m` (support
//! `[-m/2, m/2]`, degree `m - 1`), two-sided exponentials `e^{-λ|x|}`, and
//! piecewise-linear interpolants of user samples. Every generator carries a
//! [`DecayCertificate`] `(C, α)` with `|φ(x)| ≤ C (1+|x|)^{-α}`; unless given
//! explicitly, `C` is fitted as the smallest amplitude for the chosen `α`.
//!
//! ```
//! use wiener::generator::Generator;
//!
//! let hat = Generator::bspline(2).unwrap();
//! assert_eq!(hat.eval(0.0), 1.0);
//! assert_eq!(hat.eval(0.5), 0.5);
//! // max of (1 - x)(1 + x)^2 is 32/27 at x = 1/3
//! assert!((hat.cert().c / (32.0 / 27.0) - 1.0).abs() < 1e-8);
//! ```

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::bounds::DecayCertificate;
use crate::error::{Error, Result};

/// Decay exponent used when none is requested.
pub const DEFAULT_ALPHA: f64 = 2.0;

/// Beyond `42/λ` the exponential generator is below `e^{-42} ≈ 5.7e-19` and is
/// treated as zero by quadrature.
const EXP_CUTOFF: f64 = 42.0;

/// Relative slack of the pointwise certificate check.
const CERT_SLACK: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum GeneratorKind {
    BSpline { order: u32 },
    Exponential { rate: f64 },
    /// Linear interpolation of `values` at `start + i·step`, zero outside.
    Sampled { start: f64, step: f64, values: Vec<f64> },
}

/// JSON description of a generator.
///
/// ```json
/// {"kind": "bspline", "order": 2, "alpha": 3.0}
/// {"kind": "exp", "rate": 1.0}
/// {"kind": "sampled", "start": -1.0, "step": 0.5, "values": [0, 0.5, 1, 0.5, 0]}
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum GeneratorSpec {
    Bspline {
        order: u32,
        #[serde(default)]
        alpha: Option<f64>,
    },
    Exp {
        rate: f64,
        #[serde(default)]
        alpha: Option<f64>,
    },
    Sampled {
        start: f64,
        step: f64,
        values: Vec<f64>,
        #[serde(default)]
        alpha: Option<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Generator {
    kind: GeneratorKind,
    cert: DecayCertificate,
}

impl Generator {
    /// Centered B-spline of order `m ≥ 1` with the default decay exponent.
    pub fn bspline(order: u32) -> Result<Self> {
        Self::bspline_with_alpha(order, DEFAULT_ALPHA)
    }

    pub fn bspline_with_alpha(order: u32, alpha: f64) -> Result<Self> {
        if !(1..=20).contains(&order) {
            return Err(Error::InvalidInput(format!(
                "B-spline order must lie in [1, 20], got {order}"
            )));
        }
        Self::fitted(GeneratorKind::BSpline { order }, alpha)
    }

    /// `e^{-λ|x|}` with `λ > 0`.
    pub fn exponential(rate: f64, alpha: f64) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::InvalidInput(format!("rate must be positive, got {rate}")));
        }
        Self::fitted(GeneratorKind::Exponential { rate }, alpha)
    }

    pub fn sampled(start: f64, step: f64, values: Vec<f64>, alpha: f64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite() && start.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "sample grid needs finite start and positive step, got {start}, {step}"
            )));
        }
        if values.len() < 2 || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "need at least two finite generator samples".into(),
            ));
        }
        Self::fitted(GeneratorKind::Sampled { start, step, values }, alpha)
    }

    pub fn from_spec(spec: &GeneratorSpec) -> Result<Self> {
        match spec {
            GeneratorSpec::Bspline { order, alpha } => {
                Self::bspline_with_alpha(*order, alpha.unwrap_or(DEFAULT_ALPHA))
            }
            GeneratorSpec::Exp { rate, alpha } => {
                Self::exponential(*rate, alpha.unwrap_or(DEFAULT_ALPHA))
            }
            GeneratorSpec::Sampled {
                start,
                step,
                values,
                alpha,
            } => Self::sampled(*start, *step, values.clone(), alpha.unwrap_or(DEFAULT_ALPHA)),
        }
    }

    /// Replaces the fitted certificate by `cert` after checking it pointwise.
    pub fn with_certificate(mut self, cert: DecayCertificate) -> Result<Self> {
        cert.validate()?;
        self.cert = cert;
        self.verify_certificate()?;
        Ok(self)
    }

    fn fitted(kind: GeneratorKind, alpha: f64) -> Result<Self> {
        let mut gen = Generator {
            kind,
            cert: DecayCertificate { c: 1.0, alpha },
        };
        gen.cert = DecayCertificate::new(gen.fit_amplitude(alpha), alpha)?;
        gen.verify_certificate()?;
        Ok(gen)
    }

    pub fn kind(&self) -> &GeneratorKind {
        &self.kind
    }

    pub fn cert(&self) -> DecayCertificate {
        self.cert
    }

    pub fn name(&self) -> String {
        match &self.kind {
            GeneratorKind::BSpline { order } => format!("bspline({order})"),
            GeneratorKind::Exponential { rate } => format!("exp({rate})"),
            GeneratorKind::Sampled { values, .. } => format!("sampled({})", values.len()),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match &self.kind {
            GeneratorKind::BSpline { order } => bspline_value(*order, x),
            GeneratorKind::Exponential { rate } => (-rate * x.abs()).exp(),
            GeneratorKind::Sampled {
                start,
                step,
                values,
            } => {
                let u = (x - start) / step;
                let last = (values.len() - 1) as f64;
                if !(0.0..=last).contains(&u) {
                    return 0.0;
                }
                let i = (u.floor() as usize).min(values.len() - 2);
                let t = u - i as f64;
                values[i] * (1.0 - t) + values[i + 1] * t
            }
        }
    }

    /// Whether `φ'` exists as a function (everything except the box).
    pub fn deriv_available(&self) -> bool {
        !matches!(self.kind, GeneratorKind::BSpline { order: 1 })
    }

    /// `φ'(x)`, right-continuous at kinks.
    pub fn deriv(&self, x: f64) -> Result<f64> {
        match &self.kind {
            GeneratorKind::BSpline { order: 1 } => Err(Error::MissingDerivative),
            GeneratorKind::BSpline { order } => {
                Ok(bspline_value(order - 1, x + 0.5) - bspline_value(order - 1, x - 0.5))
            }
            GeneratorKind::Exponential { rate } => {
                let s = if x >= 0.0 { -1.0 } else { 1.0 };
                Ok(s * rate * (-rate * x.abs()).exp())
            }
            GeneratorKind::Sampled {
                start,
                step,
                values,
            } => {
                let u = (x - start) / step;
                if u < 0.0 || u >= (values.len() - 1) as f64 {
                    return Ok(0.0);
                }
                let i = u.floor() as usize;
                Ok((values[i + 1] - values[i]) / step)
            }
        }
    }

    /// Interval outside of which `φ` vanishes (or is below `e^{-42}`).
    pub fn support(&self) -> (f64, f64) {
        match &self.kind {
            GeneratorKind::BSpline { order } => {
                let h = *order as f64 / 2.0;
                (-h, h)
            }
            GeneratorKind::Exponential { rate } => {
                let r = (EXP_CUTOFF / rate).ceil();
                (-r, r)
            }
            GeneratorKind::Sampled {
                start,
                step,
                values,
            } => (*start, start + step * (values.len() - 1) as f64),
        }
    }

    pub fn is_compact(&self) -> bool {
        !matches!(self.kind, GeneratorKind::Exponential { .. })
    }

    /// Polynomial degree of the pieces, `None` for the exponential.
    pub fn degree(&self) -> Option<usize> {
        match &self.kind {
            GeneratorKind::BSpline { order } => Some(*order as usize - 1),
            GeneratorKind::Exponential { .. } => None,
            GeneratorKind::Sampled { .. } => Some(1),
        }
    }

    /// Knots of `φ` inside its support, sorted.
    pub fn knots(&self) -> Vec<f64> {
        match &self.kind {
            GeneratorKind::BSpline { order } => {
                let h = *order as f64 / 2.0;
                (0..=*order).map(|j| -h + j as f64).collect()
            }
            GeneratorKind::Exponential { .. } => vec![0.0],
            GeneratorKind::Sampled {
                start,
                step,
                values,
            } => (0..values.len()).map(|i| start + step * i as f64).collect(),
        }
    }

    /// Knot positions modulo 1, sorted in `[0, 1)` and always containing 0.
    ///
    /// Integer translates of `φ` are smooth between consecutive points of
    /// `j + pattern`.
    pub fn cell_pattern(&self) -> Vec<f64> {
        let mut p: Vec<f64> = self
            .knots()
            .into_iter()
            .map(|k| k.rem_euclid(1.0))
            .map(|f| if f > 1.0 - 1e-12 { 0.0 } else { f })
            .collect();
        p.push(0.0);
        p.sort_by(f64::total_cmp);
        p.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        p
    }

    /// `φ̂(w) = ∫ φ(x) e^{-2πixw} dx` where a closed form is known.
    pub fn fourier(&self, w: f64) -> Option<f64> {
        match &self.kind {
            GeneratorKind::BSpline { order } => {
                let s = if w == 0.0 {
                    1.0
                } else {
                    (PI * w).sin() / (PI * w)
                };
                Some(s.powi(*order as i32))
            }
            GeneratorKind::Exponential { rate } => {
                Some(2.0 * rate / (rate * rate + 4.0 * PI * PI * w * w))
            }
            GeneratorKind::Sampled { .. } => None,
        }
    }

    /// Sample points for fitting and checking the certificate.
    fn certificate_grid(&self, shift: f64) -> impl Iterator<Item = f64> + '_ {
        let (lo, hi) = self.support();
        let n = (((hi - lo) / 1e-3).ceil() as usize).clamp(1000, 2_000_000);
        let h = (hi - lo) / n as f64;
        (0..=n).map(move |i| lo + (i as f64 + shift) * h).filter(move |x| *x <= hi)
    }

    fn fit_amplitude(&self, alpha: f64) -> f64 {
        let g = |x: f64| self.eval(x).abs() * (1.0 + x.abs()).powf(alpha);
        let xs: Vec<f64> = self.certificate_grid(0.0).chain(self.knots()).collect();
        let (lo, hi) = self.support();
        let h = (hi - lo) / ((hi - lo) / 1e-3).ceil().clamp(1000.0, 2e6);
        let mut best = 0.0f64;
        let mut best_x = 0.0;
        for &x in &xs {
            let v = g(x);
            if v > best {
                best = v;
                best_x = x;
            }
        }
        // golden-section refinement around the best sample
        let (mut a, mut b) = ((best_x - h).max(lo), (best_x + h).min(hi));
        let ratio = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..100 {
            let x1 = b - ratio * (b - a);
            let x2 = a + ratio * (b - a);
            let (g1, g2) = (g(x1), g(x2));
            best = best.max(g1).max(g2);
            if g1 < g2 {
                a = x1;
            } else {
                b = x2;
            }
        }
        best * (1.0 + CERT_SLACK)
    }

    /// Checks `|φ(x)| ≤ C(1+|x|)^{-α}` on a grid offset from the fitting grid.
    fn verify_certificate(&self) -> Result<()> {
        for x in self.certificate_grid(0.5).chain(self.knots()) {
            let bound = self.cert.envelope(x) * (1.0 + CERT_SLACK);
            if self.eval(x).abs() > bound {
                return Err(Error::HypothesisFailed(format!(
                    "decay certificate C = {}, alpha = {} violated at x = {x}",
                    self.cert.c, self.cert.alpha
                )));
            }
        }
        Ok(())
    }
}

/// Centered B-spline `β_m(x)`, support `[-m/2, m/2)`, for `m ≤ 64`.
///
/// Evaluated through the cardinal recursion
/// `N_{j+1}(u) = (u N_j(u) + (j+1-u) N_j(u-1)) / j` at `u = x + m/2`.
pub fn bspline_value(order: u32, x: f64) -> f64 {
    let m = order as usize;
    let u = x + m as f64 / 2.0;
    if !(u >= 0.0 && u < m as f64) {
        return 0.0;
    }
    let i0 = u.floor() as usize;
    // n[s] = N_j(u - (i0 - s))
    let mut n = [0.0f64; 64];
    n[0] = 1.0;
    for j in 1..m {
        for s in (0..=j.min(i0)).rev() {
            let v = u - (i0 - s) as f64;
            let here = if s < j { n[s] } else { 0.0 };
            let below = if s >= 1 { n[s - 1] } else { 0.0 };
            n[s] = (v * here + (j as f64 + 1.0 - v) * below) / j as f64;
        }
    }
    n[i0]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bspline_values() {
        // quadratic: 3/4 − x² on |x| ≤ 1/2
        assert!((bspline_value(3, 0.25) - (0.75 - 0.0625)).abs() < 1e-15);
        assert!((bspline_value(3, 1.0) - 0.125).abs() < 1e-15);
        // cubic: 2/3 at 0, 1/6 at ±1
        assert!((bspline_value(4, 0.0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((bspline_value(4, -1.0) - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(bspline_value(1, -0.5), 1.0);
        assert_eq!(bspline_value(1, 0.5), 0.0);
        assert_eq!(bspline_value(2, 1.0), 0.0);
    }

    #[test]
    fn bspline_partition_of_unity() {
        for m in 1..=7 {
            for i in 0..50 {
                let x = -0.37 + i as f64 * 0.0213;
                let s: f64 = (-10..=10).map(|k| bspline_value(m, x - k as f64)).sum();
                assert!((s - 1.0).abs() < 1e-13, "order {m}");
            }
        }
    }

    #[test]
    fn derivatives_match_differences() {
        let g = Generator::bspline(4).unwrap();
        let h = 1e-6;
        for x in [-1.7, -0.3, 0.2, 1.1] {
            let fd = (g.eval(x + h) - g.eval(x - h)) / (2.0 * h);
            assert!((g.deriv(x).unwrap() - fd).abs() < 1e-8);
        }
        let hat = Generator::bspline(2).unwrap();
        assert_eq!(hat.deriv(-0.5).unwrap(), 1.0);
        assert_eq!(hat.deriv(0.0).unwrap(), -1.0);
        assert!(matches!(
            Generator::bspline(1).unwrap().deriv(0.0),
            Err(Error::MissingDerivative)
        ));
    }

    #[test]
    fn certificates() {
        let hat3 = Generator::bspline_with_alpha(2, 3.0).unwrap();
        assert!((hat3.cert().c / (27.0 / 16.0) - 1.0).abs() < 1e-8);
        // e^{-x}(1+x)^2 peaks at x = 1
        let e = Generator::exponential(1.0, 2.0).unwrap();
        assert!((e.cert().c / (4.0 * (-1f64).exp()) - 1.0).abs() < 1e-8);
        let box1 = Generator::bspline(1).unwrap();
        assert!((box1.cert().c / 2.25 - 1.0).abs() < 1e-8);
        let bad = Generator::bspline(2)
            .unwrap()
            .with_certificate(DecayCertificate::new(1.0, 2.0).unwrap());
        assert!(matches!(bad, Err(Error::HypothesisFailed(_))));
    }

    #[test]
    fn spec_parsing() {
        let s: GeneratorSpec = serde_json::from_str(r#"{"kind":"bspline","order":3}"#).unwrap();
        assert_eq!(Generator::from_spec(&s).unwrap().name(), "bspline(3)");
        let s: GeneratorSpec =
            serde_json::from_str(r#"{"kind":"exp","rate":2.0,"alpha":3.0}"#).unwrap();
        assert_eq!(Generator::from_spec(&s).unwrap().cert().alpha, 3.0);
        let s: GeneratorSpec = serde_json::from_str(
            r#"{"kind":"sampled","start":-1,"step":0.5,"values":[0,0.5,1,0.5,0]}"#,
        )
        .unwrap();
        let g = Generator::from_spec(&s).unwrap();
        assert!((g.eval(0.25) - 0.75).abs() < 1e-15);
        assert!(serde_json::from_str::<GeneratorSpec>(r#"{"kind":"gauss"}"#).is_err());
    }

    #[test]
    fn cell_patterns() {
        assert_eq!(Generator::bspline(2).unwrap().cell_pattern(), vec![0.0]);
        assert_eq!(Generator::bspline(3).unwrap().cell_pattern(), vec![0.0, 0.5]);
        let s = Generator::sampled(-1.0, 0.25, vec![0.0, 1.0, 2.0, 1.0, 0.0], 2.0).unwrap();
        assert_eq!(s.cell_pattern(), vec![0.0, 0.25, 0.5, 0.75]);
    }

    #[test]
    fn fourier_transforms() {
        let hat = Generator::bspline(2).unwrap();
        assert_eq!(hat.fourier(0.0), Some(1.0));
        assert!(hat.fourier(1.0).unwrap().abs() < 1e-30);
        let e = Generator::exponential(1.0, 2.0).unwrap();
        assert_eq!(e.fourier(0.0), Some(2.0));
    }
}
