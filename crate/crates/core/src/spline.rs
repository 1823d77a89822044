//! Spline-type spaces spanned by the integer translates of a generator.
//!
//! A [`SplineModel`] holds the autocorrelation `a_k = ⟨φ, φ(·+k)⟩`, the
//! certified range `[A, B]` of its symbol (the gramian `Σ_k |φ̂(·−k)|²`) and,
//! once [`SplineModel::dual_window`] has run, the inverse `b` of `a`. The dual
//! window is kept as the coefficient sequence `b`: `ψ(x) = Σ_k b_k φ(x+k)`.
//!
//! ```
//! use wiener::generator::Generator;
//! use wiener::spline::{ModelSettings, SplineModel};
//!
//! let model = SplineModel::build(Generator::bspline(2).unwrap(), &ModelSettings::default()).unwrap();
//! let a = model.autocorrelation();
//! assert!((a.get(&[0]).re - 2.0 / 3.0).abs() < 1e-15);
//! assert!((a.get(&[1]).re - 1.0 / 6.0).abs() < 1e-15);
//! assert!(model.dual().unwrap().biorthogonality_defect < 1e-8);
//! ```
//!
//! Integrals are split at the knots of all integer translates, so for
//! piecewise-polynomial generators the Gauss–Legendre rule on each piece is
//! exact for products of two translates.

use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::generator::{bspline_value, Generator, GeneratorKind};
use crate::sequence::WeightedSequence;
use crate::symbol::{build_symbol, deconvolve_auto, DEFAULT_GRID_1D};
use crate::util::{integrate_adaptive, lp_norm, GaussLegendre, NeumaierSum};

/// Construction parameters of a [`SplineModel`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModelSettings {
    /// Grid for the gramian range certificate.
    pub gram_grid: usize,
    /// Starting grid for the deconvolution of `a`.
    pub deconv_grid: usize,
    /// Relative `ℓ²` truncation tolerance of `b`.
    pub trunc_tol: f64,
    /// Autocorrelation entries are computed while `C² K_α (1+|k|)^{-α}`
    /// exceeds this tolerance (and the supports still overlap).
    pub autocorr_tol: f64,
    /// Agreement required between successive quadrature refinements.
    pub quad_tol: f64,
    /// Biorthogonality is checked for `|k| ≤ defect_range`.
    pub defect_range: i64,
}

impl Default for ModelSettings {
    fn default() -> Self {
        ModelSettings {
            gram_grid: 1 << 14,
            deconv_grid: DEFAULT_GRID_1D,
            trunc_tol: 1e-13,
            autocorr_tol: 1e-16,
            quad_tol: 1e-11,
            defect_range: 20,
        }
    }
}

impl ModelSettings {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| {
            Err(Error::InvalidInput(format!("{what} must lie in (0, 1), got {v}")))
        };
        for (what, v) in [
            ("trunc_tol", self.trunc_tol),
            ("autocorr_tol", self.autocorr_tol),
            ("quad_tol", self.quad_tol),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return bad(what, v);
            }
        }
        if self.defect_range < 0 {
            return Err(Error::InvalidInput("defect_range must be non-negative".into()));
        }
        Ok(())
    }
}

/// Dual window data filled in by [`SplineModel::dual_window`].
#[derive(Clone, Debug, Serialize)]
pub struct DualWindow {
    /// Truncated inverse of the autocorrelation.
    pub b: WeightedSequence,
    pub residual_l2: f64,
    pub deconv_grid: usize,
    /// `max_{|k| ≤ range} |⟨φ, ψ(·−k)⟩ − δ_{0k}|`, by quadrature.
    pub biorthogonality_defect: f64,
    pub defect_range: i64,
}

/// Integer translates of a generator, their gramian and dual window.
#[derive(Clone, Debug, Serialize)]
pub struct SplineModel {
    gen: Generator,
    settings: ModelSettings,
    a: WeightedSequence,
    a_gram: f64,
    b_gram: f64,
    dual: Option<DualWindow>,
    #[serde(skip)]
    rule: GaussLegendre,
    #[serde(skip)]
    pattern: Vec<f64>,
}

impl SplineModel {
    /// Autocorrelation and gramian range; the dual window is left empty.
    pub fn new(gen: Generator, settings: &ModelSettings) -> Result<Self> {
        settings.validate()?;
        let nodes = gen.degree().map_or(16, |d| (d + 2).max(4));
        let mut model = SplineModel {
            pattern: gen.cell_pattern(),
            gen,
            settings: settings.clone(),
            a: WeightedSequence::delta(1),
            a_gram: 0.0,
            b_gram: 0.0,
            dual: None,
            rule: GaussLegendre::new(nodes),
        };
        model.a = model.compute_autocorrelation()?;
        let (lo, hi) = gramian_check(&model.a, settings.gram_grid)?;
        model.a_gram = lo;
        model.b_gram = hi;
        Ok(model)
    }

    /// [`SplineModel::new`] followed by [`SplineModel::dual_window`].
    pub fn build(gen: Generator, settings: &ModelSettings) -> Result<Self> {
        Self::new(gen, settings)?.dual_window()
    }

    pub fn generator(&self) -> &Generator {
        &self.gen
    }

    pub fn settings(&self) -> &ModelSettings {
        &self.settings
    }

    pub fn autocorrelation(&self) -> &WeightedSequence {
        &self.a
    }

    /// Certified `(A, B)` of the gramian.
    pub fn gram_bounds(&self) -> (f64, f64) {
        (self.a_gram, self.b_gram)
    }

    pub fn dual(&self) -> Result<&DualWindow> {
        self.dual
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("dual window has not been computed".into()))
    }

    /// Inverts the autocorrelation and measures biorthogonality.
    pub fn dual_window(mut self) -> Result<Self> {
        let res = deconvolve_auto(&self.a, self.settings.deconv_grid, self.settings.trunc_tol)?;
        self.dual = Some(DualWindow {
            b: res.b,
            residual_l2: res.residual_l2,
            deconv_grid: res.grid_size,
            biorthogonality_defect: 0.0,
            defect_range: self.settings.defect_range,
        });
        let range = self.settings.defect_range;
        let mut defect: f64 = 0.0;
        for k in -range..=range {
            let (lo, hi) = self.gen.support();
            let v = self.integrate(lo, hi, |x| {
                Complex64::new(self.gen.eval(x) * self.psi_unchecked(x - k as f64), 0.0)
            })?;
            let target = if k == 0 { 1.0 } else { 0.0 };
            defect = defect.max((v - target).norm());
        }
        if let Some(d) = self.dual.as_mut() {
            d.biorthogonality_defect = defect;
        }
        Ok(self)
    }

    fn compute_autocorrelation(&self) -> Result<WeightedSequence> {
        let (lo, hi) = self.gen.support();
        let cert = self.gen.cert();
        let k_constant = crate::constants::constant_k(cert.alpha)?;
        let width = (hi - lo).ceil() as i64;
        // C² K_α (1+k)^{-α} ≤ tol
        let decay = (cert.c * cert.c * k_constant / self.settings.autocorr_tol)
            .powf(1.0 / cert.alpha);
        let k_max = width.min(decay.ceil() as i64).max(0);
        let mut values = vec![0.0; (2 * k_max + 1) as usize];
        if let GeneratorKind::BSpline { order } = self.gen.kind() {
            // ⟨β_m, β_m(·+k)⟩ = β_{2m}(k)
            for k in -k_max..=k_max {
                values[(k_max + k) as usize] = bspline_value(2 * order, k as f64);
            }
            return Ok(WeightedSequence::from_slice_1d(-k_max, &values).trim());
        }
        for k in 0..=k_max {
            // ∫ φ(x) φ(x+k) over supp φ ∩ (supp φ − k)
            let (a, b) = (lo.max(lo - k as f64), hi.min(hi - k as f64));
            let v = if a < b {
                self.integrate(a, b, |x| {
                    Complex64::new(self.gen.eval(x) * self.gen.eval(x + k as f64), 0.0)
                })?
                .re
            } else {
                0.0
            };
            values[(k_max + k) as usize] = v;
            values[(k_max - k) as usize] = v;
        }
        Ok(WeightedSequence::from_slice_1d(-k_max, &values).trim())
    }

    /// Sorted breakpoints of all translates inside `[lo, hi]`, endpoints included.
    pub fn breakpoints(&self, lo: f64, hi: f64) -> Vec<f64> {
        let mut pts = vec![lo];
        let mut cell = lo.floor();
        while cell < hi {
            for &p in &self.pattern {
                let x = cell + p;
                if x > lo && x < hi {
                    pts.push(x);
                }
            }
            cell += 1.0;
        }
        pts.push(hi);
        pts
    }

    /// `∫_lo^hi f`, split at the knots of the translates and refined adaptively.
    pub fn integrate<F: FnMut(f64) -> Complex64>(&self, lo: f64, hi: f64, mut f: F) -> Result<Complex64> {
        if !(hi > lo) {
            return Ok(Complex64::default());
        }
        let pts = self.breakpoints(lo, hi);
        let mut total = Complex64::default();
        for w in pts.windows(2) {
            let (v, ok) = integrate_adaptive(&self.rule, w[0], w[1], self.settings.quad_tol, &mut f);
            if !ok {
                return Err(Error::QuadratureNoConvergence(format!(
                    "piece [{}, {}] did not reach tolerance {}",
                    w[0], w[1], self.settings.quad_tol
                )));
            }
            total += v;
        }
        Ok(total)
    }

    /// `ψ(x) = Σ_k b_k φ(x+k)`.
    pub fn psi(&self, x: f64) -> Result<f64> {
        self.dual()?;
        Ok(self.psi_unchecked(x))
    }

    fn psi_unchecked(&self, x: f64) -> f64 {
        let Some(dual) = self.dual.as_ref() else {
            return 0.0;
        };
        let b = &dual.b;
        let k0 = b.offset()[0];
        let (lo, hi) = self.gen.support();
        // φ(x+k) ≠ 0 needs lo ≤ x+k ≤ hi
        let first = ((lo - x).floor() as i64).max(k0);
        let last = ((hi - x).ceil() as i64).min(k0 + b.len() as i64 - 1);
        let mut acc = 0.0;
        for k in first..=last {
            acc += b.values()[(k - k0) as usize].re * self.gen.eval(x + k as f64);
        }
        acc
    }

    /// Interval containing the support of `ψ`.
    pub fn psi_support(&self) -> Result<(f64, f64)> {
        let b = &self.dual()?.b;
        let (lo, hi) = self.gen.support();
        let k0 = b.offset()[0];
        let k1 = k0 + b.len() as i64 - 1;
        Ok((lo - k1 as f64, hi - k0 as f64))
    }

    /// `f(x) = Σ_k c_k φ(x−k)`.
    pub fn synthesis_eval(&self, c: &WeightedSequence, x: f64) -> Complex64 {
        let k0 = c.offset()[0];
        let (lo, hi) = self.gen.support();
        // φ(x−k) ≠ 0 needs x−hi ≤ k ≤ x−lo
        let first = ((x - hi).floor() as i64).max(k0);
        let last = ((x - lo).ceil() as i64).min(k0 + c.len() as i64 - 1);
        let mut acc = Complex64::default();
        for k in first..=last {
            acc += c.values()[(k - k0) as usize] * self.gen.eval(x - k as f64);
        }
        acc
    }

    /// Interval containing the support of `Σ_k c_k φ(·−k)`.
    pub fn synthesis_support(&self, c: &WeightedSequence) -> (f64, f64) {
        let (lo, hi) = self.gen.support();
        let k0 = c.offset()[0] as f64;
        (k0 + lo, k0 + (c.len() - 1) as f64 + hi)
    }

    /// Samples of `Σ_k c_k φ(·−k)` on `grid`.
    pub fn synthesize(&self, c: &WeightedSequence, grid: &UniformGrid) -> SampledFunction {
        SampledFunction::from_fn(grid.clone(), |x| self.synthesis_eval(c, x))
    }

    /// `c_k = ⟨f, ψ(·−k)⟩` for `k ∈ k_range`, with `f` given on `[lo, hi]`.
    pub fn analyze_fn<F>(&self, f: F, lo: f64, hi: f64, k_range: (i64, i64)) -> Result<WeightedSequence>
    where
        F: Fn(f64) -> Complex64,
    {
        let (plo, phi) = self.psi_support()?;
        let mut out = Vec::new();
        for k in k_range.0..=k_range.1 {
            let a = lo.max(plo + k as f64);
            let b = hi.min(phi + k as f64);
            out.push(self.integrate(a, b, |x| f(x) * self.psi_unchecked(x - k as f64))?);
        }
        Ok(WeightedSequence::from_complex_1d(k_range.0, out))
    }

    /// [`SplineModel::analyze_fn`] applied to the piecewise-linear interpolant
    /// of grid samples.
    pub fn analyze(&self, f: &SampledFunction, k_range: (i64, i64)) -> Result<WeightedSequence> {
        let (lo, hi) = f.grid().range();
        self.analyze_fn(|x| f.interpolate(x), lo, hi, k_range)
    }

    /// `‖Σ_k c_k φ(·−k)‖_{L^p}`.
    ///
    /// `p = 2` integrates `|f|²` piecewise; `p = 1` integrates `|f|`
    /// adaptively; `p = ∞` takes the maximum over 64 sub-samples of every
    /// knot piece, which is exact for piecewise-linear generators.
    pub fn synthesis_lp_norm(&self, c: &WeightedSequence, p: f64) -> Result<f64> {
        let (lo, hi) = self.synthesis_support(c);
        if p.is_infinite() {
            let pts = self.breakpoints(lo, hi);
            let mut m: f64 = 0.0;
            for w in pts.windows(2) {
                for i in 0..=64 {
                    let x = w[0] + (w[1] - w[0]) * i as f64 / 64.0;
                    // one-sided values at the piece ends
                    let x = x.clamp(w[0] + 1e-13 * (w[1] - w[0]), w[1] - 1e-13 * (w[1] - w[0]));
                    m = m.max(self.synthesis_eval(c, x).norm());
                }
            }
            return Ok(m);
        }
        let real = c.values().iter().all(|v| v.im == 0.0);
        let pts = self.breakpoints(lo, hi);
        let mut total = 0.0;
        for w in pts.windows(2) {
            let mut cuts = vec![w[0]];
            if real {
                // zeros of f are kinks of |f|^p
                let f = |x: f64| self.synthesis_eval(c, x).re;
                let n = 64;
                let mut prev = (w[0], f(w[0]));
                for i in 1..=n {
                    let x = w[0] + (w[1] - w[0]) * i as f64 / n as f64;
                    let fx = f(x);
                    if prev.1 * fx < 0.0 {
                        let (mut a, mut b, fa) = (prev.0, x, prev.1);
                        for _ in 0..60 {
                            let m = 0.5 * (a + b);
                            if f(m) * fa > 0.0 {
                                a = m;
                            } else {
                                b = m;
                            }
                        }
                        cuts.push(0.5 * (a + b));
                    }
                    prev = (x, fx);
                }
            }
            cuts.push(w[1]);
            for seg in cuts.windows(2) {
                let (v, ok) = integrate_adaptive(&self.rule, seg[0], seg[1], self.settings.quad_tol, |x| {
                    Complex64::new(self.synthesis_eval(c, x).norm().powf(p), 0.0)
                });
                if !ok {
                    return Err(Error::QuadratureNoConvergence(format!(
                        "piece [{}, {}] did not reach tolerance {}",
                        seg[0], seg[1], self.settings.quad_tol
                    )));
                }
                total += v.re;
            }
        }
        Ok(total.max(0.0).powf(1.0 / p))
    }

    /// Extreme ratios `‖Σ c_k φ(·−k)‖_p / ‖c‖_p` over `trials` random `c`
    /// with i.i.d. standard complex Gaussian entries on `width` indices.
    pub fn riesz_ratio_empirical<R: Rng>(
        &self,
        p: f64,
        trials: usize,
        width: usize,
        rng: &mut R,
    ) -> Result<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for _ in 0..trials {
            let c = random_complex_coefficients(rng, 0, width);
            let ratio = self.synthesis_lp_norm(&c, p)? / lp_norm(c.values().iter().map(|v| v.norm()), p);
            lo = lo.min(ratio);
            hi = hi.max(ratio);
        }
        Ok((lo, hi))
    }

    /// Numeric `‖ψ‖_{W(L^∞,ℓ¹)}` from samples with the given resolution.
    pub fn psi_amalgam_norm(&self, per_cell: usize) -> Result<f64> {
        let (lo, hi) = self.psi_support()?;
        let grid = UniformGrid::covering(lo, hi, per_cell);
        let f = SampledFunction::from_fn(grid, |x| Complex64::new(self.psi_unchecked(x), 0.0));
        Ok(f.amalgam_norm(f64::INFINITY, 1.0))
    }

    /// Numeric `‖φ‖_{W(L^∞,ℓ¹)}` from samples with the given resolution.
    pub fn phi_amalgam_norm(&self, per_cell: usize) -> f64 {
        let (lo, hi) = self.gen.support();
        let grid = UniformGrid::covering(lo, hi, per_cell);
        SampledFunction::from_fn(grid, |x| Complex64::new(self.gen.eval(x), 0.0))
            .amalgam_norm(f64::INFINITY, 1.0)
    }
}

/// I.i.d. standard complex Gaussian coefficients on `[offset, offset + width)`.
pub fn random_complex_coefficients<R: Rng>(rng: &mut R, offset: i64, width: usize) -> WeightedSequence {
    let values = (0..width)
        .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    WeightedSequence::from_complex_1d(offset, values)
}

/// I.i.d. standard real Gaussian coefficients on `[offset, offset + width)`.
pub fn random_real_coefficients<R: Rng>(rng: &mut R, offset: i64, width: usize) -> WeightedSequence {
    let values = (0..width)
        .map(|_| Complex64::new(rng.sample(StandardNormal), 0.0))
        .collect();
    WeightedSequence::from_complex_1d(offset, values)
}

/// Range `(A, B)` of the gramian `â` certified on an `N`-point grid.
///
/// The symbol of an autocorrelation is real; an imaginary part above `1e-10`
/// signals a broken autocorrelation.
pub fn gramian_check(a: &WeightedSequence, n: usize) -> Result<(f64, f64)> {
    let grid = build_symbol(a, n)?;
    let worst_imag = grid.values().iter().map(|v| v.im.abs()).fold(0.0, f64::max);
    if worst_imag > 1e-10 {
        return Err(Error::HypothesisFailed(format!(
            "gramian symbol has imaginary part {worst_imag:e}"
        )));
    }
    let min_re = grid.values().iter().map(|v| v.re).fold(f64::INFINITY, f64::min);
    let (lo, hi) = grid.certify_range();
    if lo <= 0.0 || min_re <= 0.0 {
        return Err(Error::NotRieszBasis { a_gram: lo });
    }
    Ok((lo, hi))
}

/// Uniform grid `start + i/per_cell`, `i = 0..=cells·per_cell`, aligned with
/// the unit cells `[j, j+1]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UniformGrid {
    pub start: i64,
    pub cells: usize,
    pub per_cell: usize,
}

impl UniformGrid {
    pub fn new(start: i64, cells: usize, per_cell: usize) -> Self {
        assert!(cells >= 1 && per_cell >= 1);
        UniformGrid {
            start,
            cells,
            per_cell,
        }
    }

    /// Smallest aligned grid containing `[lo, hi]`.
    pub fn covering(lo: f64, hi: f64, per_cell: usize) -> Self {
        let start = lo.floor() as i64;
        let end = (hi.ceil() as i64).max(start + 1);
        Self::new(start, (end - start) as usize, per_cell)
    }

    pub fn len(&self) -> usize {
        self.cells * self.per_cell + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        1.0 / self.per_cell as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.start as f64 + (i / self.per_cell) as f64 + (i % self.per_cell) as f64 * self.step()
    }

    pub fn range(&self) -> (f64, f64) {
        (self.start as f64, (self.start + self.cells as i64) as f64)
    }
}

/// Complex samples of a function on a [`UniformGrid`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampledFunction {
    grid: UniformGrid,
    values: Vec<Complex64>,
}

impl SampledFunction {
    pub fn new(grid: UniformGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "grid has {} nodes but {} values were given",
                grid.len(),
                values.len()
            )));
        }
        Ok(SampledFunction { grid, values })
    }

    pub fn from_fn<F: FnMut(f64) -> Complex64>(grid: UniformGrid, mut f: F) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.x(i))).collect();
        SampledFunction { grid, values }
    }

    pub fn grid(&self) -> &UniformGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Piecewise-linear interpolation, zero outside the grid.
    pub fn interpolate(&self, x: f64) -> Complex64 {
        let (lo, hi) = self.grid.range();
        if !(x >= lo && x <= hi) {
            return Complex64::default();
        }
        let u = (x - lo) * self.grid.per_cell as f64;
        let i = (u.floor() as usize).min(self.values.len() - 2);
        let t = u - i as f64;
        self.values[i] * (1.0 - t) + self.values[i + 1] * t
    }

    /// `‖f‖_{L^p([j, j+1])}` for the `j`-th cell of the grid; samples on both
    /// cell ends are used, and the trapezoid rule is applied to `|f|^p`.
    pub fn cell_norm(&self, cell: usize, p: f64) -> f64 {
        let n = self.grid.per_cell;
        let slice = &self.values[cell * n..=(cell + 1) * n];
        if p.is_infinite() {
            return slice.iter().map(|v| v.norm()).fold(0.0, f64::max);
        }
        let h = self.grid.step();
        let mut s = NeumaierSum::default();
        for (i, v) in slice.iter().enumerate() {
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            s.add(w * v.norm().powf(p));
        }
        (h * s.total()).powf(1.0 / p)
    }

    /// `‖f‖_{W(L^p, ℓ^q)}`: per-cell `L^p` norms followed by the outer `ℓ^q` norm.
    pub fn amalgam_norm(&self, p: f64, q: f64) -> f64 {
        lp_norm((0..self.grid.cells).map(|j| self.cell_norm(j, p)), q)
    }

    /// `‖f‖_{L^p}` on the grid range (trapezoid rule, sup of samples for `p = ∞`).
    pub fn lp_norm(&self, p: f64) -> f64 {
        if p.is_infinite() {
            return self.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        }
        let per_cell: Vec<f64> = (0..self.grid.cells).map(|j| self.cell_norm(j, p).powf(p)).collect();
        let s: NeumaierSum = per_cell.into_iter().collect();
        s.total().powf(1.0 / p)
    }

    /// CSV rows `x,re,im`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x,re,im")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(out, "{},{},{}", self.grid.x(i), v.re, v.im)?;
        }
        Ok(())
    }
}
