//! Nonuniform sampling and iterative reconstruction in spline-type spaces.
//!
//! A sampling set `X` lives in a window `[lo, hi]`. It is `δ`-dense there when
//! consecutive gaps are below `2δ` and both window edges are closer than `δ`
//! to the nearest point. Around each point sits a piecewise-linear bump
//! `g_j`; the bumps form a partition of unity on the window.
//!
//! The reconstruction operator is `P I Z`: sample (`Z`), quasi-interpolate
//! (`I c = Σ_j c_j g_j`) and project (`P f = Σ_k ⟨f, ψ(·−k)⟩ φ(·−k)`). In
//! coefficient space it is the matrix `Q = B M` with
//! `M_{n,i} = Σ_j ⟨g_j, φ_n⟩ φ_i(x_j)` and `B_{k,n} = b_{k−n}`, and the
//! iteration `c_{n+1} = c_n + d − Q c_n` converges to the coefficients of the
//! sampled function whenever `‖I − Q‖ < 1`.
//!
//! ```
//! use wiener::sampling::validate_set;
//!
//! let points: Vec<f64> = (0..=100).map(|k| k as f64).collect();
//! let set = validate_set(points, 0.5 + 1e-9, (0.0, 100.0)).unwrap();
//! assert_eq!(set.n_x(), 1);
//! ```

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::generator::Generator;
use crate::sequence::WeightedSequence;
use crate::spline::{SampledFunction, SplineModel, UniformGrid};
use crate::util::{reciprocal_exponent, GaussLegendre};

/// A validated, strictly increasing, `δ`-dense point set on a window.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SamplingSet {
    points: Vec<f64>,
    delta: f64,
    n_x: u64,
    window: (f64, f64),
    max_gap: f64,
}

impl SamplingSet {
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Relative separation `max_k #{j : x_j ∈ [k, k+1)}`.
    pub fn n_x(&self) -> u64 {
        self.n_x
    }

    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    pub fn max_gap(&self) -> f64 {
        self.max_gap
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Checks ordering, window membership and `δ`-density, and computes `N(X)`.
pub fn validate_set(points: Vec<f64>, delta: f64, window: (f64, f64)) -> Result<SamplingSet> {
    let (lo, hi) = window;
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidInput(format!("delta must be positive, got {delta}")));
    }
    if !(lo < hi) {
        return Err(Error::InvalidInput(format!("empty window [{lo}, {hi}]")));
    }
    if points.is_empty() {
        return Err(Error::NotDense {
            left: lo,
            right: hi,
            gap: hi - lo,
            limit: 2.0 * delta,
        });
    }
    for (i, &x) in points.iter().enumerate() {
        if !(x >= lo && x <= hi) {
            return Err(Error::OutsideWindow { x, lo, hi });
        }
        if i > 0 && !(x > points[i - 1]) {
            return Err(Error::Unsorted { index: i });
        }
    }
    let first = points[0];
    let last = points[points.len() - 1];
    if first - lo >= delta {
        return Err(Error::NotDense {
            left: lo,
            right: first,
            gap: first - lo,
            limit: delta,
        });
    }
    let mut max_gap: f64 = 0.0;
    for w in points.windows(2) {
        let gap = w[1] - w[0];
        if gap >= 2.0 * delta {
            return Err(Error::NotDense {
                left: w[0],
                right: w[1],
                gap,
                limit: 2.0 * delta,
            });
        }
        max_gap = max_gap.max(gap);
    }
    if hi - last >= delta {
        return Err(Error::NotDense {
            left: last,
            right: hi,
            gap: hi - last,
            limit: delta,
        });
    }
    let mut n_x = 0u64;
    let mut run = 0u64;
    let mut cell = f64::NAN;
    for &x in &points {
        let c = x.floor();
        if c == cell {
            run += 1;
        } else {
            cell = c;
            run = 1;
        }
        n_x = n_x.max(run);
    }
    Ok(SamplingSet {
        points,
        delta,
        n_x,
        window,
        max_gap,
    })
}

/// Reads a sampling set from CSV text with one point per line; blank lines,
/// `#` comments and a non-numeric header line are skipped.
pub fn parse_points_csv(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let field = line.split(',').next().unwrap_or("").trim();
        if field.is_empty() || field.starts_with('#') {
            continue;
        }
        match field.parse::<f64>() {
            Ok(v) => out.push(v),
            Err(_) if n == 0 => continue,
            Err(_) => {
                return Err(Error::InvalidInput(format!(
                    "line {}: cannot parse {field:?} as a number",
                    n + 1
                )))
            }
        }
    }
    Ok(out)
}

/// Half-width of the linear ramp at a Voronoi midpoint between points at
/// distance `gap`: `½ min(gap/2, δ − gap/2)`.
fn ramp_half_width(gap: f64, delta: f64) -> f64 {
    0.5 * (0.5 * gap).min(delta - 0.5 * gap)
}

/// Trapezoid `0` at `rise_start`, `1` on `[rise_end, fall_start]`, `0` at
/// `fall_end`. A zero-width ramp is a jump.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Bump {
    pub rise_start: f64,
    pub rise_end: f64,
    pub fall_start: f64,
    pub fall_end: f64,
}

impl Bump {
    fn from_ramps(left_mid: f64, left_w: f64, right_mid: f64, right_w: f64) -> Self {
        Bump {
            rise_start: left_mid - left_w,
            rise_end: left_mid + left_w,
            fall_start: right_mid - right_w,
            fall_end: right_mid + right_w,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x < self.rise_start || x > self.fall_end {
            0.0
        } else if x < self.rise_end {
            (x - self.rise_start) / (self.rise_end - self.rise_start)
        } else if x <= self.fall_start {
            1.0
        } else {
            (self.fall_end - x) / (self.fall_end - self.fall_start)
        }
    }

    /// `∫ g`.
    pub fn mass(&self) -> f64 {
        0.5 * (self.fall_start + self.fall_end) - 0.5 * (self.rise_start + self.rise_end)
    }

    /// Linear pieces `(x0, x1, g(x0), g(x1))` of positive length.
    pub fn pieces(&self) -> impl Iterator<Item = (f64, f64, f64, f64)> {
        [
            (self.rise_start, self.rise_end, 0.0, 1.0),
            (self.rise_end, self.fall_start, 1.0, 1.0),
            (self.fall_start, self.fall_end, 1.0, 0.0),
        ]
        .into_iter()
        .filter(|p| p.1 > p.0)
    }
}

/// Nonnegative piecewise-linear partition of unity subordinate to the
/// intervals `(x_j − δ, x_j + δ)`, cut off at the window edges.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PartitionOfUnity {
    bumps: Vec<Bump>,
    window: (f64, f64),
}

impl PartitionOfUnity {
    pub fn new(set: &SamplingSet) -> Self {
        let x = set.points();
        let (lo, hi) = set.window();
        let n = x.len();
        let mids: Vec<(f64, f64)> = x
            .windows(2)
            .map(|w| (0.5 * (w[0] + w[1]), ramp_half_width(w[1] - w[0], set.delta())))
            .collect();
        let bumps = (0..n)
            .map(|j| {
                let (l, wl) = if j == 0 { (lo, 0.0) } else { mids[j - 1] };
                let (r, wr) = if j + 1 == n { (hi, 0.0) } else { mids[j] };
                Bump::from_ramps(l, wl, r, wr)
            })
            .collect();
        PartitionOfUnity {
            bumps,
            window: (lo, hi),
        }
    }

    pub fn bumps(&self) -> &[Bump] {
        &self.bumps
    }

    /// `max |Σ_j g_j − 1|` over `samples` equispaced window points.
    pub fn defect(&self, samples: usize) -> f64 {
        let (lo, hi) = self.window;
        let mut worst: f64 = 0.0;
        let mut j0 = 0;
        for i in 0..=samples {
            let x = (lo + (hi - lo) * i as f64 / samples as f64).min(hi);
            while j0 + 1 < self.bumps.len() && self.bumps[j0].fall_end < x {
                j0 += 1;
            }
            let s: f64 = self.bumps[j0..].iter().take(3).map(|b| b.eval(x)).sum();
            worst = worst.max((s - 1.0).abs());
        }
        worst
    }

    /// `I(c) = Σ_j c_j g_j` at `x`.
    pub fn quasi_interpolant(&self, c: &[Complex64], x: f64) -> Complex64 {
        let j = self.bumps.partition_point(|b| b.fall_end < x);
        (j..self.bumps.len().min(j + 3))
            .map(|k| c[k] * self.bumps[k].eval(x))
            .sum()
    }

    /// Sorted breakpoints of `I(c)` together with its values there.
    fn interpolant_nodes(&self, c: &[Complex64]) -> Vec<(f64, Complex64)> {
        let mut xs: Vec<f64> = Vec::with_capacity(4 * self.bumps.len());
        for b in &self.bumps {
            xs.extend([b.rise_start, b.rise_end, b.fall_start, b.fall_end]);
        }
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        xs.into_iter().map(|x| (x, self.quasi_interpolant(c, x))).collect()
    }

    /// `‖I(c)‖_{L^p}`, integrating the piecewise-linear interpolant piece by
    /// piece (exact for `p ∈ {2, ∞}` and for real `c` at `p = 1`).
    pub fn quasi_interpolant_norm(&self, c: &[Complex64], p: f64) -> f64 {
        let nodes = self.interpolant_nodes(c);
        if p.is_infinite() {
            return nodes.iter().map(|(_, v)| v.norm()).fold(0.0, f64::max);
        }
        let rule = GaussLegendre::sixteen();
        let mut acc = 0.0;
        for w in nodes.windows(2) {
            let ((x0, y0), (x1, y1)) = (w[0], w[1]);
            let len = x1 - x0;
            if len <= 0.0 {
                continue;
            }
            acc += if p == 2.0 {
                len * (y0.norm_sqr() + (y0 * y1.conj()).re + y1.norm_sqr()) / 3.0
            } else if p == 1.0 && y0.im == 0.0 && y1.im == 0.0 {
                abs_linear_integral(y0.re, y1.re) * len
            } else {
                rule.integrate(0.0, 1.0, |t: f64| (y0 * (1.0 - t) + y1 * t).norm().powf(p)) * len
            };
        }
        acc.powf(1.0 / p)
    }
}

/// `∫_0^1 |y0 (1−t) + y1 t| dt`.
fn abs_linear_integral(y0: f64, y1: f64) -> f64 {
    if y0 * y1 >= 0.0 {
        0.5 * (y0 + y1).abs()
    } else {
        let t0 = y0 / (y0 - y1);
        0.5 * (y0.abs() * t0 + y1.abs() * (1.0 - t0))
    }
}

/// `Z(f) = (f(x_j))_j` for `f = Σ_k c_k φ(·−k)`, evaluated exactly.
pub fn operator_z(model: &SplineModel, set: &SamplingSet, c: &WeightedSequence) -> Result<Vec<Complex64>> {
    let (lo, hi) = set.window();
    set.points()
        .iter()
        .map(|&x| {
            if x < lo || x > hi {
                Err(Error::OutsideWindow { x, lo, hi })
            } else {
                Ok(model.synthesis_eval(c, x))
            }
        })
        .collect()
}

/// Grid samples of `I(c) = Σ_j c_j g_j`.
pub fn operator_i(pou: &PartitionOfUnity, c: &[Complex64], grid: &UniformGrid) -> Result<SampledFunction> {
    if c.len() != pou.bumps().len() {
        return Err(Error::DimensionMismatch {
            expected: pou.bumps().len(),
            found: c.len(),
        });
    }
    Ok(SampledFunction::from_fn(grid.clone(), |x| pou.quasi_interpolant(c, x)))
}

/// Coefficients `⟨f, ψ(·−k)⟩` of the projection `P f`, for `k ∈ k_range`.
pub fn operator_p(model: &SplineModel, f: &SampledFunction, k_range: (i64, i64)) -> Result<WeightedSequence> {
    model.analyze(f, k_range)
}

/// Indices `n` for which `φ(·−n)` meets the window, inclusive.
pub fn overlapping_indices(gen: &Generator, window: (f64, f64)) -> (i64, i64) {
    let (s_lo, s_hi) = gen.support();
    ((window.0 - s_hi).ceil() as i64, (window.1 - s_lo).floor() as i64)
}

/// Indices `i` for which `supp φ(·−i)` lies inside the window, inclusive.
pub fn interior_indices(gen: &Generator, window: (f64, f64)) -> (i64, i64) {
    let (s_lo, s_hi) = gen.support();
    ((window.0 - s_lo).ceil() as i64, (window.1 - s_hi).floor() as i64)
}

/// The coefficient-space operator `Q = B M` of `P I Z`.
#[derive(Clone, Debug)]
pub struct SamplingSystem {
    rows: (i64, i64),
    cols: (i64, i64),
    m: DMatrix<f64>,
    q: DMatrix<f64>,
    b: WeightedSequence,
}

impl SamplingSystem {
    /// `m` has one row per `n ∈ rows` and one column per `i ∈ cols`.
    pub fn new(model: &SplineModel, rows: (i64, i64), cols: (i64, i64), m: DMatrix<f64>) -> Result<Self> {
        let nr = (rows.1 - rows.0 + 1) as usize;
        let nc = (cols.1 - cols.0 + 1) as usize;
        if m.nrows() != nr || m.ncols() != nc {
            return Err(Error::InvalidInput(format!(
                "moment matrix is {}x{}, expected {nr}x{nc}",
                m.nrows(),
                m.ncols()
            )));
        }
        let b = model.dual()?.b.clone();
        let mut bm = DMatrix::<f64>::zeros(nc, nr);
        for k in cols.0..=cols.1 {
            for n in rows.0..=rows.1 {
                bm[((k - cols.0) as usize, (n - rows.0) as usize)] = b.get(&[k - n]).re;
            }
        }
        let q = &bm * &m;
        Ok(SamplingSystem { rows, cols, m, q, b })
    }

    /// Explicit construction from a validated set and its partition of unity.
    pub fn explicit(model: &SplineModel, set: &SamplingSet, pou: &PartitionOfUnity, cols: (i64, i64)) -> Result<Self> {
        let rows = overlapping_indices(model.generator(), set.window());
        let weights = analysis_weights(model, pou, rows)?;
        let nc = (cols.1 - cols.0 + 1) as usize;
        let mut m = DMatrix::<f64>::zeros((rows.1 - rows.0 + 1) as usize, nc);
        let gen = model.generator();
        for (j, &x) in set.points().iter().enumerate() {
            for i in cols.0..=cols.1 {
                let phi = gen.eval(x - i as f64);
                if phi == 0.0 {
                    continue;
                }
                for &(n, w) in &weights[j] {
                    m[((n - rows.0) as usize, (i - cols.0) as usize)] += w * phi;
                }
            }
        }
        Self::new(model, rows, cols, m)
    }

    pub fn rows(&self) -> (i64, i64) {
        self.rows
    }

    pub fn cols(&self) -> (i64, i64) {
        self.cols
    }

    pub fn moment_matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn dim(&self) -> usize {
        self.q.nrows()
    }

    /// `Q c` for coefficients indexed by `cols`.
    pub fn apply(&self, c: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim();
        let mut out = vec![Complex64::default(); n];
        for (j, &cj) in c.iter().enumerate().take(n) {
            if cj == Complex64::default() {
                continue;
            }
            for (i, o) in out.iter_mut().enumerate() {
                *o += cj * self.q[(i, j)];
            }
        }
        out
    }

    /// `d = B G` for moments `G_n = ⟨I Z f, φ_n⟩`, `n ∈ rows`.
    pub fn project_moments(&self, g: &[Complex64]) -> Vec<Complex64> {
        (self.cols.0..=self.cols.1)
            .map(|k| {
                (self.rows.0..=self.rows.1)
                    .map(|n| g[(n - self.rows.0) as usize] * self.b.get(&[k - n]).re)
                    .sum()
            })
            .collect()
    }

    /// Coefficient vector over `cols` from a sequence (missing entries are 0).
    pub fn coefficients_of(&self, c: &WeightedSequence) -> Vec<Complex64> {
        (self.cols.0..=self.cols.1).map(|k| c.get(&[k])).collect()
    }

    pub fn to_sequence(&self, c: &[Complex64]) -> WeightedSequence {
        WeightedSequence::from_complex_1d(self.cols.0, c.to_vec())
    }

    /// Non-certified estimate of `‖I − Q‖₂` by power iteration on
    /// `(I − Q)^T (I − Q)`.
    pub fn gamma_empirical(&self, iterations: usize) -> f64 {
        let n = self.dim();
        let e = DMatrix::<f64>::identity(n, n) - &self.q;
        let et = e.transpose();
        let mut v = nalgebra::DVector::<f64>::from_fn(n, |i, _| 1.0 + (i % 7) as f64 * 0.1);
        v /= v.norm();
        let mut sigma = 0.0;
        for _ in 0..iterations {
            let w = &et * (&e * &v);
            let norm = w.norm();
            if norm == 0.0 {
                return 0.0;
            }
            sigma = norm.sqrt();
            v = w / norm;
        }
        sigma
    }
}

/// `⟨g_j, φ(·−n)⟩` for every bump and every `n ∈ rows` where it is nonzero.
pub fn analysis_weights(model: &SplineModel, pou: &PartitionOfUnity, rows: (i64, i64)) -> Result<Vec<Vec<(i64, f64)>>> {
    let gen = model.generator();
    let (s_lo, s_hi) = gen.support();
    pou.bumps()
        .iter()
        .map(|bump| {
            let first = ((bump.rise_start - s_hi).floor() as i64).max(rows.0);
            let last = ((bump.fall_end - s_lo).ceil() as i64).min(rows.1);
            let mut row = Vec::new();
            for n in first..=last {
                let mut acc = 0.0;
                for (x0, x1, g0, g1) in bump.pieces() {
                    let a = x0.max(n as f64 + s_lo);
                    let b = x1.min(n as f64 + s_hi);
                    if a < b {
                        acc += model
                            .integrate(a, b, |x| {
                                let g = g0 + (g1 - g0) * (x - x0) / (x1 - x0);
                                Complex64::new(g * gen.eval(x - n as f64), 0.0)
                            })?
                            .re;
                    }
                }
                if acc != 0.0 {
                    row.push((n, acc));
                }
            }
            Ok(row)
        })
        .collect()
}

/// Moments `G_n = Σ_j ⟨g_j, φ_n⟩ y_j` of the quasi-interpolant of samples `y`.
pub fn moments_from_samples(weights: &[Vec<(i64, f64)>], rows: (i64, i64), samples: &[Complex64]) -> Vec<Complex64> {
    let mut g = vec![Complex64::default(); (rows.1 - rows.0 + 1) as usize];
    for (row, y) in weights.iter().zip(samples) {
        for &(n, w) in row {
            g[(n - rows.0) as usize] += *y * w;
        }
    }
    g
}

/// Outcome of [`reconstruct`].
#[derive(Clone, Debug, Serialize)]
pub struct Reconstruction {
    /// Final coefficients over the system's column range.
    pub coefficients: Vec<Complex64>,
    pub iterations: usize,
    /// `‖c_{n+1} − c_n‖₂` per step.
    pub error_history: Vec<f64>,
    /// Largest ratio `‖Δc_{n+1}‖/‖Δc_n‖` over steps whose `‖Δc_n‖` lies above
    /// the rounding floor.
    pub gamma_observed: f64,
}

/// Ratios below this multiple of `‖d‖₂` measure rounding, not contraction.
const RATIO_FLOOR: f64 = 1e-11;

/// Consecutive non-decreasing steps tolerated before giving up.
const DIVERGENCE_RUN: usize = 5;

/// Richardson iteration `c_{n+1} = c_n + d − Q c_n` from `c_0 = 0`.
pub fn reconstruct(system: &SamplingSystem, d: &[Complex64], tol: f64, max_iter: usize) -> Result<Reconstruction> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }
    if d.len() != system.dim() {
        return Err(Error::DimensionMismatch {
            expected: system.dim(),
            found: d.len(),
        });
    }
    let norm = |v: &[Complex64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let floor = RATIO_FLOOR * norm(d);
    let mut c = vec![Complex64::default(); d.len()];
    let mut history = Vec::new();
    let mut gamma: f64 = 0.0;
    let mut rising = 0;
    for it in 1..=max_iter {
        let qc = system.apply(&c);
        let step: Vec<Complex64> = d.iter().zip(&qc).map(|(a, b)| a - b).collect();
        for (ci, s) in c.iter_mut().zip(&step) {
            *ci += s;
        }
        let diff = norm(&step);
        if let Some(&prev) = history.last() {
            if prev > floor {
                let ratio = diff / prev;
                gamma = gamma.max(ratio);
                if ratio >= 1.0 {
                    rising += 1;
                    if rising >= DIVERGENCE_RUN {
                        return Err(Error::NotContracting { ratio });
                    }
                } else {
                    rising = 0;
                }
            }
        }
        history.push(diff);
        if diff <= tol {
            return Ok(Reconstruction {
                coefficients: c,
                iterations: it,
                error_history: history,
                gamma_observed: gamma,
            });
        }
    }
    Ok(Reconstruction {
        coefficients: c,
        iterations: max_iter,
        error_history: history,
        gamma_observed: gamma,
    })
}

/// Oscillation estimates for a generator at one `δ`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OscillationReport {
    pub delta: f64,
    pub q: f64,
    /// `‖φ'‖_{W(L^q,ℓ¹)}`, numeric.
    pub deriv_norm: f64,
    /// `(2⌈δ⌉+1) ‖φ'‖_{W(L^q,ℓ¹)} δ^{1−1/q}`.
    pub bound: f64,
    /// Grid estimate of `‖osc_δ(φ)‖_{W(L^∞,ℓ¹)}`.
    pub direct: f64,
    /// Grid points per unit cell of the direct estimate.
    pub resolution: usize,
}

/// `‖φ'‖_{W(L^q,ℓ¹)}`: per unit cell, `L^q` norms of `φ'` on the knot pieces
/// (sup over interior sub-samples for `q = ∞`), summed over cells.
pub fn derivative_amalgam_norm(gen: &Generator, q: f64) -> Result<f64> {
    if !gen.deriv_available() {
        return Err(Error::MissingDerivative);
    }
    let (lo, hi) = gen.support();
    let mut pattern = gen.cell_pattern();
    pattern.push(1.0);
    let rule = GaussLegendre::new(24);
    let mut total = 0.0;
    let mut cell = lo.floor();
    while cell < hi {
        let mut sup: f64 = 0.0;
        let mut integral = 0.0;
        for w in pattern.windows(2) {
            let (a, b) = (cell + w[0], cell + w[1]);
            if q.is_infinite() {
                for i in 0..64 {
                    let x = a + (b - a) * (i as f64 + 0.5) / 64.0;
                    sup = sup.max(gen.deriv(x)?.abs());
                }
                // one-sided limits at the piece ends
                for x in [a + 1e-12 * (b - a), b - 1e-12 * (b - a)] {
                    sup = sup.max(gen.deriv(x)?.abs());
                }
            } else {
                for k in 0..8 {
                    let (u, v) = (a + (b - a) * k as f64 / 8.0, a + (b - a) * (k + 1) as f64 / 8.0);
                    integral += rule.integrate(u, v, |x: f64| gen.deriv(x).unwrap_or(0.0).abs().powf(q));
                }
            }
        }
        total += if q.is_infinite() { sup } else { integral.powf(1.0 / q) };
        cell += 1.0;
    }
    Ok(total)
}

/// The oscillation bound `(2⌈δ⌉+1) ‖φ'‖_{W(L^q,ℓ¹)} δ^{1−1/q}` and a direct grid estimate
/// of `‖osc_δ(φ)‖_{W(L^∞,ℓ¹)}` with `osc_δ(φ)(x) = sup_{|x−y|≤δ} |φ(x) − φ(y)|`.
pub fn oscillation_bound(gen: &Generator, delta: f64, q: f64) -> Result<OscillationReport> {
    if !(q > 1.0) {
        return Err(Error::HypothesisFailed(format!("q must exceed 1, got {q}")));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::HypothesisFailed(format!("delta must be positive, got {delta}")));
    }
    let deriv_norm = derivative_amalgam_norm(gen, q)?;
    let bound = (2.0 * delta.ceil() + 1.0) * deriv_norm * delta.powf(1.0 - reciprocal_exponent(q));

    // δ spans `reach` grid steps
    let reach = 64usize;
    let per_cell = ((reach as f64 / delta).ceil() as usize).max(1);
    let (lo, hi) = gen.support();
    let grid = UniformGrid::covering(lo - delta, hi + delta, per_cell);
    let values: Vec<f64> = (0..grid.len()).map(|i| gen.eval(grid.x(i))).collect();
    let h = grid.step();
    let span = (delta / h).floor() as usize;
    let mut osc = vec![0.0f64; values.len()];
    for (i, o) in osc.iter_mut().enumerate() {
        let a = i.saturating_sub(span);
        let b = (i + span).min(values.len() - 1);
        let (mut mn, mut mx) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in &values[a..=b] {
            mn = mn.min(*v);
            mx = mx.max(*v);
        }
        *o = (mx - values[i]).max(values[i] - mn);
    }
    let sampled = SampledFunction::new(grid, osc.into_iter().map(|v| Complex64::new(v, 0.0)).collect())?;
    Ok(OscillationReport {
        delta,
        q,
        deriv_norm,
        bound,
        direct: sampled.amalgam_norm(f64::INFINITY, 1.0),
        resolution: per_cell,
    })
}

/// Per-cell sufficient statistics of a point set for the hat generator.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct CellStats {
    pub count: u64,
    pub sum_t: f64,
    pub sum_t2: f64,
    pub first_t: f64,
    pub last_t: f64,
}

/// Jittered lattice on `[0, cells]`: in every unit cell `k` the points
/// `k + (i + ½)h + η h (2U − 1)`, `i < per_cell`, `h = 1/per_cell`, with
/// `U ∈ [0, 1)` drawn from a ChaCha8 stream keyed by `(seed, k)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct JitteredLattice {
    pub cells: usize,
    pub per_cell: u64,
    pub jitter: f64,
    pub seed: u64,
}

impl JitteredLattice {
    pub fn new(cells: usize, per_cell: u64, jitter: f64, seed: u64) -> Result<Self> {
        if cells == 0 || per_cell == 0 {
            return Err(Error::InvalidInput("lattice needs at least one cell and point".into()));
        }
        if !(0.0..0.5).contains(&jitter) {
            return Err(Error::InvalidInput(format!("jitter must lie in [0, 1/2), got {jitter}")));
        }
        Ok(JitteredLattice {
            cells,
            per_cell,
            jitter,
            seed,
        })
    }

    /// Coarsest lattice whose gaps stay below `2δ`: at most `h(1 + 2η) < 2δ`.
    pub fn for_delta(cells: usize, delta: f64, jitter: f64, seed: u64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidInput(format!("delta must be positive, got {delta}")));
        }
        let per = ((1.0 + 2.0 * jitter) / (2.0 * delta)).floor() + 1.0;
        if per > 1e12 {
            return Err(Error::Infeasible(format!("delta {delta} needs {per:e} points per cell")));
        }
        Self::new(cells, per as u64, jitter, seed)
    }

    pub fn step(&self) -> f64 {
        1.0 / self.per_cell as f64
    }

    pub fn len(&self) -> u64 {
        self.cells as u64 * self.per_cell
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn stream(&self, cell: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(cell as u64);
        rng
    }

    fn offset(&self, i: u64, u: u32) -> f64 {
        let h = 1.0 / self.per_cell as f64;
        let unit = u as f64 * (1.0 / 4294967296.0);
        (i as f64 + 0.5) * h + self.jitter * h * (2.0 * unit - 1.0)
    }

    /// Local offsets `t ∈ (0, 1)` of the points of one cell.
    fn fill_cell(&self, cell: usize, raw: &mut Vec<u32>, t: &mut Vec<f64>) {
        raw.resize(self.per_cell as usize, 0);
        self.stream(cell).fill(&mut raw[..]);
        t.clear();
        t.extend(raw.iter().enumerate().map(|(i, &u)| self.offset(i as u64, u)));
    }

    /// The `i`-th point of cell `cell`, by random access into its stream.
    pub fn point(&self, cell: usize, i: u64) -> f64 {
        let mut rng = self.stream(cell);
        rng.set_word_pos(i as u128);
        cell as f64 + self.offset(i, rng.next_u32())
    }

    /// All points, in order.
    pub fn points(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len() as usize);
        let (mut raw, mut t) = (Vec::new(), Vec::new());
        for k in 0..self.cells {
            self.fill_cell(k, &mut raw, &mut t);
            out.extend(t.iter().map(|v| k as f64 + v));
        }
        out
    }

    /// One pass over all points collecting everything the hat model needs.
    ///
    /// Bumps strictly inside a cell only meet `φ_k` and `φ_{k+1}`, and their
    /// contributions to `M` reduce to four running sums per cell. The first
    /// and last bump of every cell go through [`hat_bump_products`].
    ///
    /// Returns [`Error::NotDense`] if the lattice is not `δ`-dense.
    pub fn hat_statistics(&self, delta: f64) -> Result<HatStatistics> {
        let cells = self.cells;
        let n = self.per_cell as usize;
        let rows = (-1i64, cells as i64 + 1);
        let mut m = DMatrix::<f64>::zeros(cells + 3, cells + 1);
        let mut stats = Vec::with_capacity(cells);
        let mut max_gap: f64 = 0.0;
        let (mut raw, mut t) = (Vec::new(), Vec::new());
        let mut prev_last: Option<f64> = None;

        for k in 0..cells {
            self.fill_cell(k, &mut raw, &mut t);
            let next_first = (k + 1 < cells).then(|| 1.0 + self.offset(0, self.first_word(k + 1)));
            let neighbor = |i: usize, dir: i64| -> Option<f64> {
                let j = i as i64 + dir;
                if j < 0 {
                    prev_last.map(|v| v - 1.0)
                } else if j as usize >= n {
                    next_first
                } else {
                    Some(t[j as usize])
                }
            };
            let mut edges = vec![0];
            if n > 1 {
                edges.push(n - 1);
            }
            for &i in &edges {
                let bump = edge_bump(k, neighbor(i, -1), t[i], neighbor(i, 1), delta, cells)?;
                for (n_rel, w) in hat_bump_products(&bump) {
                    let row = (k as i64 + n_rel - rows.0) as usize;
                    m[(row, k)] += w * (1.0 - t[i]);
                    m[(row, k + 1)] += w * t[i];
                }
            }
            if let Some(nf) = next_first {
                max_gap = max_gap.max(nf - t[n - 1]);
            }

            let mut sums = InteriorSums::default();
            let (mut min_g, mut max_g) = (f64::INFINITY, 0.0f64);
            if n > 1 {
                let g0 = t[1] - t[0];
                min_g = g0;
                max_g = g0;
            }
            if n > 2 {
                let mut l = 0.5 * (t[0] + t[1]);
                let mut wl = ramp_half_width(t[1] - t[0], delta);
                for chunk_start in (1..n - 1).step_by(BLOCK) {
                    let chunk_end = (chunk_start + BLOCK).min(n - 1);
                    let mut block = InteriorSums::default();
                    for i in chunk_start..chunk_end {
                        let ti = t[i];
                        let g = t[i + 1] - ti;
                        min_g = min_g.min(g);
                        max_g = max_g.max(g);
                        let r = 0.5 * (ti + t[i + 1]);
                        let wr = 0.5 * (0.5 * g).min(delta - 0.5 * g);
                        let mass = r - l;
                        let first = 0.5 * (r * r - l * l) + (wr * wr - wl * wl) / 6.0;
                        block.mass += mass;
                        block.mass_t += mass * ti;
                        block.first += first;
                        block.first_t += first * ti;
                        l = r;
                        wl = wr;
                    }
                    sums.add(&block);
                }
            }
            if n > 1 && (!(min_g > 0.0) || max_g >= 2.0 * delta) {
                // locate the offending pair for the error message
                for i in 0..n - 1 {
                    check_gap(k, t[i], t[i + 1], t[i + 1] - t[i], delta)?;
                }
            }
            max_gap = max_gap.max(max_g);

            let rk = (k as i64 - rows.0) as usize;
            let left = sums.mass - sums.first;
            let left_t = sums.mass_t - sums.first_t;
            m[(rk, k)] += left - left_t;
            m[(rk, k + 1)] += left_t;
            m[(rk + 1, k)] += sums.first - sums.first_t;
            m[(rk + 1, k + 1)] += sums.first_t;

            let (mut sum_t, mut sum_t2) = (0.0, 0.0);
            for chunk in t.chunks(BLOCK) {
                let (mut a, mut b) = (0.0, 0.0);
                for &v in chunk {
                    a += v;
                    b += v * v;
                }
                sum_t += a;
                sum_t2 += b;
            }
            stats.push(CellStats {
                count: n as u64,
                sum_t,
                sum_t2,
                first_t: t[0],
                last_t: t[n - 1],
            });
            prev_last = Some(t[n - 1]);
        }

        Ok(HatStatistics {
            lattice: *self,
            delta,
            n_x: self.per_cell,
            max_gap,
            rows,
            m,
            cells: stats,
        })
    }

    fn first_word(&self, cell: usize) -> u32 {
        self.stream(cell).next_u32()
    }
}

/// Block length of the partial sums in [`JitteredLattice::hat_statistics`].
const BLOCK: usize = 4096;

#[derive(Clone, Copy, Debug, Default)]
struct InteriorSums {
    /// `Σ ∫ g_j`.
    mass: f64,
    mass_t: f64,
    /// `Σ ∫ g_j(x) (x − k) dx`.
    first: f64,
    first_t: f64,
}

impl InteriorSums {
    fn add(&mut self, o: &InteriorSums) {
        self.mass += o.mass;
        self.mass_t += o.mass_t;
        self.first += o.first;
        self.first_t += o.first_t;
    }
}

/// Bump of a point at local offset `t` in cell `k`, with neighbours given in
/// the same local coordinates; `None` marks a window edge.
fn edge_bump(k: usize, prev: Option<f64>, t: f64, next: Option<f64>, delta: f64, cells: usize) -> Result<Bump> {
    let (l, wl) = match prev {
        None => {
            if t >= delta {
                return Err(Error::NotDense { left: 0.0, right: t, gap: t, limit: delta });
            }
            (0.0, 0.0)
        }
        Some(pt) => {
            check_gap(k, pt, t, t - pt, delta)?;
            (0.5 * (pt + t), ramp_half_width(t - pt, delta))
        }
    };
    let (r, wr) = match next {
        None => {
            debug_assert_eq!(k + 1, cells);
            if 1.0 - t >= delta {
                return Err(Error::NotDense {
                    left: k as f64 + t,
                    right: (k + 1) as f64,
                    gap: 1.0 - t,
                    limit: delta,
                });
            }
            (1.0, 0.0)
        }
        Some(nt) => {
            check_gap(k, t, nt, nt - t, delta)?;
            (0.5 * (t + nt), ramp_half_width(nt - t, delta))
        }
    };
    Ok(Bump::from_ramps(l, wl, r, wr))
}

fn check_gap(k: usize, pt: f64, t: f64, gap: f64, delta: f64) -> Result<()> {
    if !(gap > 0.0) || gap >= 2.0 * delta {
        return Err(Error::NotDense {
            left: k as f64 + pt,
            right: k as f64 + t,
            gap,
            limit: 2.0 * delta,
        });
    }
    Ok(())
}

/// `(n, ⟨g, φ_n⟩)` for the hat `φ_n(x) = max(0, 1 − |x − n|)`, exact.
///
/// Every linear piece of the bump is split at the integers; on each sub-piece
/// the integrand is quadratic and Simpson's rule is exact.
pub fn hat_bump_products(bump: &Bump) -> Vec<(i64, f64)> {
    let mut out: Vec<(i64, f64)> = Vec::new();
    let mut add = |n: i64, v: f64| match out.iter_mut().find(|(m, _)| *m == n) {
        Some(e) => e.1 += v,
        None => out.push((n, v)),
    };
    for (x0, x1, g0, g1) in bump.pieces() {
        let g = |x: f64| g0 + (g1 - g0) * (x - x0) / (x1 - x0);
        let mut a = x0;
        while a < x1 {
            let cell = a.floor();
            let b = x1.min(cell + 1.0);
            if b > a {
                let mid = 0.5 * (a + b);
                let simpson = |f: &dyn Fn(f64) -> f64| (b - a) / 6.0 * (f(a) + 4.0 * f(mid) + f(b));
                // φ_cell = 1 − (x − cell), φ_{cell+1} = x − cell on [cell, cell+1]
                add(cell as i64, simpson(&|x| g(x) * (1.0 - (x - cell))));
                add(cell as i64 + 1, simpson(&|x| g(x) * (x - cell)));
            }
            a = b;
        }
    }
    out
}

/// Everything a hat-spline experiment needs from one pass over a jittered lattice.
#[derive(Clone, Debug)]
pub struct HatStatistics {
    pub lattice: JitteredLattice,
    pub delta: f64,
    /// Largest number of points in a unit cell.
    pub n_x: u64,
    pub max_gap: f64,
    /// Row range of `m` (`n` indices); columns are `0..=cells`.
    pub rows: (i64, i64),
    /// `M_{n,i} = Σ_j ⟨g_j, φ_n⟩ φ_i(x_j)`.
    pub m: DMatrix<f64>,
    pub cells: Vec<CellStats>,
}

impl HatStatistics {
    /// The system restricted to the coefficient range `cols ⊆ [0, cells]`.
    pub fn system(&self, model: &SplineModel, cols: (i64, i64)) -> Result<SamplingSystem> {
        if cols.0 < 0 || cols.1 > self.lattice.cells as i64 || cols.0 > cols.1 {
            return Err(Error::InvalidInput(format!("column range {cols:?} outside the window")));
        }
        let sub = self
            .m
            .columns(cols.0 as usize, (cols.1 - cols.0 + 1) as usize)
            .into_owned();
        SamplingSystem::new(model, self.rows, cols, sub)
    }

    /// Enclosure `(lo, hi)` of `‖(f(x_j))_j‖_p` for the real hat spline
    /// `f = Σ_k c_k φ(·−k)`, `c` indexed by `0..=cells`.
    ///
    /// Exact for `p ∈ {2, ∞}`; for `p = 1` each point is replaced by its
    /// lattice site and the jitter `|t − s| ≤ ηh` is added as slack.
    pub fn sample_norm(&self, c: &[f64], p: f64) -> (f64, f64) {
        assert_eq!(c.len(), self.lattice.cells + 1);
        let mut lo = 0.0;
        let mut hi = 0.0;
        let mut sup: f64 = 0.0;
        let n = self.lattice.per_cell;
        let h = self.lattice.step();
        for (k, s) in self.cells.iter().enumerate() {
            let alpha = c[k];
            let beta = c[k + 1] - c[k];
            if alpha == 0.0 && beta == 0.0 {
                continue;
            }
            if p.is_infinite() {
                sup = sup
                    .max((alpha + beta * s.first_t).abs())
                    .max((alpha + beta * s.last_t).abs());
            } else if p == 2.0 {
                let v = s.count as f64 * alpha * alpha + 2.0 * alpha * beta * s.sum_t + beta * beta * s.sum_t2;
                lo += v;
                hi += v;
            } else if p == 1.0 {
                let lattice = lattice_abs_sum(alpha, beta, n, h);
                let slack = n as f64 * beta.abs() * self.lattice.jitter * h;
                lo += lattice - slack;
                hi += lattice + slack;
            } else {
                panic!("sample_norm supports p in {{1, 2, inf}}");
            }
        }
        if p.is_infinite() {
            (sup, sup)
        } else if p == 2.0 {
            (lo.sqrt(), hi.sqrt())
        } else {
            // widen by rounding of the closed-form sums
            ((lo * (1.0 - 1e-12)).max(0.0), hi * (1.0 + 1e-12))
        }
    }
}

/// `Σ_{i<n} |α + β s_i|` with `s_i = (i + ½) h`.
fn lattice_abs_sum(alpha: f64, beta: f64, n: u64, h: f64) -> f64 {
    let partial = |p: u64, q: u64| {
        let (p, q) = (p as f64, q as f64);
        (q - p) * alpha + beta * h * 0.5 * (q * q - p * p)
    };
    if beta == 0.0 {
        return n as f64 * alpha.abs();
    }
    let root = -alpha / beta;
    let split = ((root / h - 0.5).floor() + 1.0).clamp(0.0, n as f64) as u64;
    partial(0, split).abs() + partial(split, n).abs()
}

/// `‖Σ_k c_k φ(·−k)‖_{L^p}` for the hat and real `c` indexed from 0, exact.
pub fn hat_lp_norm(c: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        return c.iter().fold(0.0, |m, v| m.max(v.abs()));
    }
    // the pieces on the two outer cells vanish at one end
    let mut padded = Vec::with_capacity(c.len() + 2);
    padded.push(0.0);
    padded.extend_from_slice(c);
    padded.push(0.0);
    let mut acc = 0.0;
    for w in padded.windows(2) {
        let (y0, y1) = (w[0], w[1]);
        acc += if p == 2.0 {
            (y0 * y0 + y0 * y1 + y1 * y1) / 3.0
        } else if p == 1.0 {
            abs_linear_integral(y0, y1)
        } else {
            GaussLegendre::sixteen().integrate(0.0, 1.0, |t: f64| (y0 * (1.0 - t) + y1 * t).abs().powf(p))
        };
    }
    acc.powf(1.0 / p)
}

/// Where the sampling set of an experiment comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum SetSource {
    /// Explicit points on a window; `delta = None` takes the smallest radius
    /// the set supports.
    Points {
        points: Vec<f64>,
        window: Option<(f64, f64)>,
        delta: Option<f64>,
    },
    /// A [`JitteredLattice`] on `[0, cells]`; `delta = None` uses `δ*`.
    Jitter {
        cells: usize,
        jitter: f64,
        delta: Option<f64>,
        seed: u64,
    },
}

/// Parameters of [`sampling_experiment`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub p: f64,
    /// Integrability exponent of `φ'` in the oscillation bound.
    pub q: f64,
    /// Target contraction for `δ*`.
    pub rho_target: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Unit cells kept free of the random test functions at each edge.
    pub margin: usize,
    /// Random functions used for the sampling inequality.
    pub trials: usize,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            p: 2.0,
            q: f64::INFINITY,
            rho_target: 0.9,
            tol: 1e-12,
            max_iter: 500,
            margin: 1,
            trials: 20,
            seed: 0,
        }
    }
}

/// Outcome of [`sampling_experiment`].
#[derive(Clone, Debug, Serialize)]
pub struct ReconstructionReport {
    pub seed: u64,
    pub generator: String,
    pub p: f64,
    pub window: (f64, f64),
    pub points: u64,
    pub delta: f64,
    pub n_x: u64,
    pub max_gap: f64,
    /// Largest `δ` with certified `ρ ≤ rho_target`, if `φ'` exists.
    pub delta_star: Option<f64>,
    pub rho_certified: Option<f64>,
    /// True when `rho_certified < 1`, i.e. `c_p` below is a certified bound.
    pub certified: bool,
    pub c_p: Option<f64>,
    #[serde(rename = "C_p")]
    pub upper_c_p: Option<f64>,
    pub trials: usize,
    pub violations: usize,
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub iterations: usize,
    pub error_history: Vec<f64>,
    pub gamma_observed: f64,
    /// Power-iteration estimate of `‖I − Q‖₂`; not certified.
    pub gamma_empirical: f64,
    pub max_coefficient_error: f64,
    /// `max_j |f_rec(x_j) − f(x_j)|`, when the samples were materialised.
    pub max_sample_residual: Option<f64>,
    pub coefficient_range: (i64, i64),
    pub boundary_margin: String,
}

/// Sampling experiment on one set: density check, certified constants,
/// sampling inequality on random interior `f` and reconstruction of one of
/// them from its samples.
///
/// Jittered sets with the hat generator and `p ∈ {1, 2, ∞}` are streamed;
/// everything else is built explicitly.
pub fn sampling_experiment(model: &SplineModel, source: &SetSource, cfg: &ExperimentConfig) -> Result<ReconstructionReport> {
    if !(cfg.p >= 1.0) {
        return Err(Error::InvalidInput(format!("p must be in [1, inf], got {}", cfg.p)));
    }
    if !(cfg.tol > 0.0) || cfg.max_iter == 0 {
        return Err(Error::InvalidInput("tolerance and iteration cap must be positive".into()));
    }
    let gen = model.generator();
    let cert = gen.cert();
    let (a, _) = model.gram_bounds();
    let deriv = if gen.deriv_available() {
        Some(derivative_amalgam_norm(gen, cfg.q)?)
    } else {
        None
    };
    let delta_star = match deriv {
        Some(d) => Some(crate::bounds::solve_max_delta(&cert, a, d, cfg.q, cfg.rho_target)?),
        None => None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let is_hat = matches!(gen.kind(), crate::generator::GeneratorKind::BSpline { order: 2 });
    let streamable = is_hat && (cfg.p == 1.0 || cfg.p == 2.0 || cfg.p.is_infinite());

    enum Built {
        Explicit(SamplingSet, Vec<Vec<(i64, f64)>>),
        Streamed(HatStatistics),
    }
    let (built, system, window, delta) = match source {
        SetSource::Jitter { cells, jitter, delta, seed } if streamable => {
            let delta = delta.or(delta_star).ok_or(Error::MissingDerivative)?;
            let lattice = JitteredLattice::for_delta(*cells, delta, *jitter, *seed)?;
            let stats = lattice.hat_statistics(delta)?;
            let window = (0.0, *cells as f64);
            let cols = interior_indices(gen, window);
            let system = stats.system(model, cols)?;
            (Built::Streamed(stats), system, window, delta)
        }
        _ => {
            let (points, window, delta) = match source {
                SetSource::Points { points, window, delta } => {
                    if points.is_empty() {
                        let (lo, hi) = window.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
                        let limit = delta.map_or(0.0, |d| 2.0 * d);
                        return Err(Error::NotDense { left: lo, right: hi, gap: hi - lo, limit });
                    }
                    let window = window.unwrap_or((points[0], points[points.len() - 1]));
                    let delta = match delta {
                        Some(d) => *d,
                        None => minimal_delta(points, window),
                    };
                    (points.clone(), window, delta)
                }
                SetSource::Jitter { cells, jitter, delta, seed } => {
                    let delta = delta.or(delta_star).ok_or(Error::MissingDerivative)?;
                    let lattice = JitteredLattice::for_delta(*cells, delta, *jitter, *seed)?;
                    if lattice.len() > MAX_EXPLICIT_POINTS {
                        return Err(Error::Infeasible(format!(
                            "{} points exceed the explicit limit {MAX_EXPLICIT_POINTS}; use the hat generator or a larger delta",
                            lattice.len()
                        )));
                    }
                    (lattice.points(), (0.0, *cells as f64), delta)
                }
            };
            let set = validate_set(points, delta, window)?;
            let pou = PartitionOfUnity::new(&set);
            let cols = interior_indices(gen, window);
            if cols.0 > cols.1 {
                return Err(Error::InvalidInput(format!(
                    "window [{}, {}] is shorter than the generator support",
                    window.0, window.1
                )));
            }
            let system = SamplingSystem::explicit(model, &set, &pou, cols)?;
            let weights = analysis_weights(model, &pou, system.rows())?;
            (Built::Explicit(set, weights), system, window, delta)
        }
    };

    let (n_x, max_gap, points) = match &built {
        Built::Explicit(set, _) => (set.n_x(), set.max_gap(), set.len() as u64),
        Built::Streamed(stats) => (stats.n_x, stats.max_gap, stats.lattice.len()),
    };
    let rho = match deriv {
        Some(d) => Some(crate::bounds::sampling_rho(&cert, a, d, cfg.q, delta)?),
        None => None,
    };
    let certified = rho.is_some_and(|r| r < 1.0);
    let (c_p, upper_c_p) = match rho {
        Some(r) if r < 1.0 => {
            let (lo, hi) = crate::bounds::sampling_bounds(&cert, a, n_x, delta, r, cfg.p)?;
            (Some(lo), Some(hi))
        }
        _ => {
            let f = crate::bounds::DualWindowFactors::new(&cert, a)?;
            (None, Some((n_x as f64).powf(reciprocal_exponent(cfg.p)) * f.phi_w * f.psi_w()))
        }
    };

    let cols = system.cols();
    let lo_k = cols.0 + cfg.margin as i64;
    let hi_k = cols.1 - cfg.margin as i64;
    if lo_k > hi_k {
        return Err(Error::InvalidInput(format!("margin {} leaves no interior coefficients", cfg.margin)));
    }
    let width = (hi_k - lo_k + 1) as usize;
    let boundary_margin = format!(
        "test functions use coefficients {lo_k}..={hi_k}: translates supported inside the window, {} extra cells free at each edge",
        cfg.margin
    );

    let sample_norm = |c: &WeightedSequence| -> Result<(f64, f64, Option<Vec<Complex64>>)> {
        match &built {
            Built::Explicit(set, _) => {
                let z = operator_z(model, set, c)?;
                let n = crate::util::lp_norm(z.iter().map(|v| v.norm()), cfg.p);
                Ok((n, n, Some(z)))
            }
            Built::Streamed(stats) => {
                let cells = stats.lattice.cells;
                let full: Vec<f64> = (0..=cells as i64).map(|k| c.get(&[k]).re).collect();
                let (lo, hi) = stats.sample_norm(&full, cfg.p);
                Ok((lo, hi, None))
            }
        }
    };
    let f_norm = |c: &WeightedSequence| -> Result<f64> {
        if is_hat && c.offset()[0] >= 0 {
            let mut full = vec![0.0; (c.offset()[0] as usize) + c.len()];
            for (k, v) in c.values().iter().enumerate() {
                full[c.offset()[0] as usize + k] = v.re;
            }
            Ok(hat_lp_norm(&full, cfg.p))
        } else {
            model.synthesis_lp_norm(c, cfg.p)
        }
    };

    let mut violations = 0;
    let (mut ratio_min, mut ratio_max) = (f64::INFINITY, 0.0f64);
    for _ in 0..cfg.trials {
        let c = crate::spline::random_real_coefficients(&mut rng, lo_k, width);
        let (lo, hi, _) = sample_norm(&c)?;
        let norm = f_norm(&c)?;
        let (rlo, rhi) = (lo / norm, hi / norm);
        ratio_min = ratio_min.min(rlo);
        ratio_max = ratio_max.max(rhi);
        if c_p.is_some_and(|b| rlo < b) || upper_c_p.is_some_and(|b| rhi > b) {
            violations += 1;
        }
    }

    let truth = crate::spline::random_real_coefficients(&mut rng, lo_k, width);
    let c_true = system.coefficients_of(&truth);
    let (d, samples) = match &built {
        Built::Explicit(set, weights) => {
            let z = operator_z(model, set, &truth)?;
            let g = moments_from_samples(weights, system.rows(), &z);
            (system.project_moments(&g), Some((set, z)))
        }
        Built::Streamed(_) => (system.apply(&c_true), None),
    };
    let rec = reconstruct(&system, &d, cfg.tol, cfg.max_iter)?;
    let max_coefficient_error = rec
        .coefficients
        .iter()
        .zip(&c_true)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max);
    let max_sample_residual = match samples {
        Some((set, z)) => {
            let back = system.to_sequence(&rec.coefficients);
            let rz = operator_z(model, set, &back)?;
            Some(rz.iter().zip(&z).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max))
        }
        None => None,
    };

    Ok(ReconstructionReport {
        seed: cfg.seed,
        generator: gen.name(),
        p: cfg.p,
        window,
        points,
        delta,
        n_x,
        max_gap,
        delta_star,
        rho_certified: rho,
        certified,
        c_p,
        upper_c_p,
        trials: cfg.trials,
        violations,
        ratio_min,
        ratio_max,
        iterations: rec.iterations,
        gamma_observed: rec.gamma_observed,
        error_history: rec.error_history,
        gamma_empirical: system.gamma_empirical(100),
        max_coefficient_error,
        max_sample_residual,
        coefficient_range: (lo_k, hi_k),
        boundary_margin,
    })
}

/// Largest set materialised by [`sampling_experiment`].
pub const MAX_EXPLICIT_POINTS: u64 = 2_000_000;

/// Smallest `δ` (up to a relative `1e-9`) for which `points` is `δ`-dense on `window`.
pub fn minimal_delta(points: &[f64], window: (f64, f64)) -> f64 {
    let mut need: f64 = 0.0;
    if let (Some(first), Some(last)) = (points.first(), points.last()) {
        need = need.max(first - window.0).max(window.1 - last);
    }
    for w in points.windows(2) {
        need = need.max(0.5 * (w[1] - w[0]));
    }
    if need == 0.0 {
        f64::MIN_POSITIVE
    } else {
        need * (1.0 + 1e-9)
    }
}
