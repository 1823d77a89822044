//! Fourier symbols on the torus and deconvolution by symbol inversion.
//!
//! The symbol of a sequence is `â(w) = Σ_k a_k e^{2πi k·w}`. A
//! [`SymbolGrid`] holds `â` on the uniform grid `j/N`, together with a
//! Lipschitz margin that bounds how far `|â|` can move between grid nodes.
//! The margin comes from `‖∂_j â‖_∞ ≤ 2π M^{e_j}_1(a)` and turns grid extrema
//! into certified bounds for the continuous symbol:
//!
//! ```
//! use wiener::sequence::WeightedSequence;
//! use wiener::symbol::build_symbol;
//!
//! let a = WeightedSequence::from_slice_1d(-1, &[1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0]);
//! let grid = build_symbol(&a, 1024).unwrap();
//! let (lo, hi) = grid.certify_range();
//! assert!(lo <= 1.0 / 3.0 && hi >= 1.0);
//! assert!(1.0 / 3.0 - lo < 2e-3);
//! ```
//!
//! The convolutive inverse is read off from `1/â` by an inverse transform and
//! truncated to the smallest centered box that keeps all but a `trunc_tol`
//! fraction of its `ℓ²` mass. Invertibility is decided by the certified lower
//! bound only.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::sequence::{MultiIndex, Momentum, NormTag, WeightedSequence};

/// Default grid sizes per dimension.
pub const DEFAULT_GRID_1D: usize = 1024;
pub const DEFAULT_GRID_2D: usize = 256;
/// Smallest admissible grid size.
pub const MIN_GRID: usize = 64;

pub fn default_grid(dim: usize) -> usize {
    if dim == 1 {
        DEFAULT_GRID_1D
    } else {
        DEFAULT_GRID_2D
    }
}

/// Samples of a trigonometric polynomial on `{j/N : j ∈ [0, N)^d}`.
#[derive(Clone, Debug)]
pub struct SymbolGrid {
    dim: usize,
    grid_size: usize,
    values: Vec<Complex64>,
    lipschitz_margin: f64,
}

impl SymbolGrid {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    /// Row-major samples; axis 0 is slowest.
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn lipschitz_margin(&self) -> f64 {
        self.lipschitz_margin
    }

    pub fn min_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `(A_certified, B_certified)` valid for the continuous symbol.
    ///
    /// `A_certified = 0` signals possible non-invertibility.
    pub fn certify_range(&self) -> (f64, f64) {
        let lo = (self.min_abs() - self.lipschitz_margin).max(0.0);
        let hi = self.max_abs() + self.lipschitz_margin;
        (lo, hi)
    }

    /// Torus coordinates of the flat grid position `flat`.
    pub fn node(&self, flat: usize) -> Vec<f64> {
        let n = self.grid_size;
        let mut w = vec![0.0; self.dim];
        let mut rest = flat;
        for axis in (0..self.dim).rev() {
            w[axis] = (rest % n) as f64 / n as f64;
            rest /= n;
        }
        w
    }

    /// Central finite-difference check of `(1/â)' = -â'/â²` along every axis.
    ///
    /// Returns `max_j max_grid |FD_j(1/â) + FD_j(â)/â²|`, which is `O(N^{-2})`.
    pub fn check_derivative_identity(&self) -> Result<f64> {
        let (a_cert, _) = self.certify_range();
        if a_cert <= 0.0 {
            return Err(Error::NotInvertible { a_certified: a_cert });
        }
        let n = self.grid_size;
        let h = 1.0 / n as f64;
        let inv: Vec<Complex64> = self.values.iter().map(|v| v.inv()).collect();
        let mut defect: f64 = 0.0;
        let mut stride = 1;
        for _axis in (0..self.dim).rev() {
            for flat in 0..self.values.len() {
                let pos = (flat / stride) % n;
                let up = flat - pos * stride + ((pos + 1) % n) * stride;
                let down = flat - pos * stride + ((pos + n - 1) % n) * stride;
                let fd_inv = (inv[up] - inv[down]) / (2.0 * h);
                let fd_f = (self.values[up] - self.values[down]) / (2.0 * h);
                let f = self.values[flat];
                defect = defect.max((fd_inv + fd_f / (f * f)).norm());
            }
            stride *= n;
        }
        Ok(defect)
    }

    /// CSV rows `w[,w2...], re, im, abs`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let header: Vec<String> = if self.dim == 1 {
            vec!["w".into()]
        } else {
            (1..=self.dim).map(|j| format!("w{j}")).collect()
        };
        writeln!(out, "{},re,im,abs", header.join(","))?;
        for (flat, v) in self.values.iter().enumerate() {
            let w: Vec<String> = self.node(flat).iter().map(|x| format!("{x}")).collect();
            writeln!(out, "{},{},{},{}", w.join(","), v.re, v.im, v.norm())?;
        }
        Ok(())
    }

    pub fn to_export(&self) -> SymbolExport {
        SymbolExport {
            dim: self.dim,
            grid_size: self.grid_size,
            lipschitz_margin: self.lipschitz_margin,
            w: (0..self.values.len()).map(|f| self.node(f)).collect(),
            re: self.values.iter().map(|v| v.re).collect(),
            im: self.values.iter().map(|v| v.im).collect(),
            abs: self.values.iter().map(|v| v.norm()).collect(),
        }
    }
}

/// JSON export layout of a [`SymbolGrid`].
#[derive(Clone, Debug, Serialize)]
pub struct SymbolExport {
    pub dim: usize,
    pub grid_size: usize,
    pub lipschitz_margin: f64,
    pub w: Vec<Vec<f64>>,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
    pub abs: Vec<f64>,
}

/// Smallest admissible grid size for a sequence with the given box widths.
pub fn required_grid(widths: &[usize]) -> usize {
    let w = widths.iter().copied().max().unwrap_or(1);
    (2 * w).next_power_of_two().max(MIN_GRID)
}

fn check_grid(a: &WeightedSequence, n: usize) -> Result<()> {
    let required = required_grid(a.shape());
    if !n.is_power_of_two() || n < required {
        return Err(Error::Aliasing { given: n, required });
    }
    Ok(())
}

/// In-place d-dimensional DFT of an `n^d` row-major array.
fn fft_nd(data: &mut [Complex64], n: usize, dim: usize, direction: FftDirection) {
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft(n, direction);
    let mut line = vec![Complex64::default(); n];
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    let mut stride = 1;
    for _ in 0..dim {
        let block = stride * n;
        for base in (0..data.len()).step_by(block) {
            for inner in 0..stride {
                let start = base + inner;
                for (i, slot) in line.iter_mut().enumerate() {
                    *slot = data[start + i * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (i, v) in line.iter().enumerate() {
                    data[start + i * stride] = *v;
                }
            }
        }
        stride *= n;
    }
}

fn wrap(k: i64, n: usize) -> usize {
    k.rem_euclid(n as i64) as usize
}

/// `Σ_j (π √d / N) M^{e_j}_1(a)`.
fn lipschitz_margin(a: &WeightedSequence, n: usize) -> f64 {
    let d = a.dim();
    let total: f64 = (0..d)
        .map(|j| {
            a.momentum(&MultiIndex::unit(d, j), NormTag::L1)
                .map(|m| m.value)
                .unwrap_or(0.0)
        })
        .sum();
    PI * (d as f64).sqrt() / n as f64 * total
}

/// Evaluates `â` on the `N^d` grid by zero-embedding and a fast transform.
pub fn build_symbol(a: &WeightedSequence, n: usize) -> Result<SymbolGrid> {
    check_grid(a, n)?;
    let d = a.dim();
    let mut data = vec![Complex64::default(); n.pow(d as u32)];
    for (k, v) in a.iter_indexed() {
        let flat = k.iter().fold(0usize, |acc, &kj| acc * n + wrap(kj, n));
        data[flat] += v;
    }
    // e^{+2πi k j/N} is the unnormalized inverse direction.
    fft_nd(&mut data, n, d, FftDirection::Inverse);
    Ok(SymbolGrid {
        dim: d,
        grid_size: n,
        values: data,
        lipschitz_margin: lipschitz_margin(a, n),
    })
}

/// Convenience wrapper around [`SymbolGrid::certify_range`].
pub fn certify_range(grid: &SymbolGrid) -> (f64, f64) {
    grid.certify_range()
}

/// Coefficients of `1/â` from grid samples, indexed over the centered box
/// `[-N/2, N/2)^d`.
fn inverse_coefficients(grid: &SymbolGrid) -> WeightedSequence {
    let n = grid.grid_size;
    let d = grid.dim;
    let mut data: Vec<Complex64> = grid.values.iter().map(|v| v.inv()).collect();
    fft_nd(&mut data, n, d, FftDirection::Forward);
    let scale = 1.0 / data.len() as f64;
    let half = (n / 2) as i64;
    let mut out = WeightedSequence::zeros(vec![-half; d], vec![n; d]);
    for p in 0..out.len() {
        let k = out.lattice_point(p);
        let flat = k.iter().fold(0usize, |acc, &kj| acc * n + wrap(kj, n));
        out.values_mut()[p] = data[flat] * scale;
    }
    out
}

/// Chebyshev radius `max_j |k_j|`.
fn cheb_radius(k: &[i64]) -> usize {
    k.iter().map(|x| x.unsigned_abs() as usize).max().unwrap_or(0)
}

/// Smallest `r` such that the `ℓ²` norm outside `[-r, r]^d` is at most
/// `tol · ‖b‖₂`.
fn truncation_radius(b: &WeightedSequence, tol: f64) -> usize {
    let rmax = b.radius().into_iter().max().unwrap_or(0) as usize;
    let mut shells = vec![0.0; rmax + 1];
    for (k, v) in b.iter_indexed() {
        shells[cheb_radius(&k)] += v.norm_sqr();
    }
    let total: f64 = shells.iter().sum();
    let budget = tol * tol * total;
    let mut tail = 0.0;
    for r in (0..=rmax).rev() {
        if tail + shells[r] > budget {
            return r;
        }
        tail += shells[r];
    }
    0
}

fn centered_box(b: &WeightedSequence, r: usize) -> WeightedSequence {
    let d = b.dim();
    b.restrict_to(&vec![-(r as i64); d], &vec![2 * r + 1; d])
}

/// Outcome of [`deconvolve`].
#[derive(Clone, Debug, Serialize)]
pub struct DeconvResult {
    /// Truncated convolutive inverse.
    pub b: WeightedSequence,
    pub a_certified: f64,
    pub b_certified: f64,
    /// `‖a∗b − δ‖₂`, recomputed by exact convolution.
    pub residual_l2: f64,
    pub truncation_radius: Vec<usize>,
    pub grid_size: usize,
}

/// Smallest relative change tolerated by the grid-doubling check; below this
/// the comparison measures rounding, not aliasing.
const ALIASING_FLOOR: f64 = 1e-12;

/// Convolutive inverse of `a` by inverting its symbol on an `N^d` grid.
///
/// The result is cross-checked against the inverse computed on a `2N` grid;
/// if the truncated inverses differ by more than `trunc_tol` (relative, in
/// `ℓ²`) the grid is reported as too small.
pub fn deconvolve(a: &WeightedSequence, n: usize, trunc_tol: f64) -> Result<DeconvResult> {
    if !(trunc_tol > 0.0 && trunc_tol < 1.0) {
        return Err(Error::InvalidInput(format!(
            "trunc_tol must lie in (0, 1), got {trunc_tol}"
        )));
    }
    let grid = build_symbol(a, n)?;
    let (a_cert, b_cert) = grid.certify_range();
    if a_cert <= 0.0 {
        return Err(Error::NotInvertible { a_certified: a_cert });
    }
    let b_grid = inverse_coefficients(&grid);
    let r = truncation_radius(&b_grid, trunc_tol);
    let b = centered_box(&b_grid, r).trim();

    let fine = inverse_coefficients(&build_symbol(a, 2 * n)?);
    let fine_box = centered_box(&fine, r);
    let change = centered_box(&b_grid, r).sub(&fine_box)?.l2_norm() / fine.l2_norm();
    if change > trunc_tol.max(ALIASING_FLOOR) {
        return Err(Error::GridTooSmall {
            grid: n,
            change,
            suggested: 4 * n,
        });
    }

    let residual = a
        .convolve(&b)?
        .sub(&WeightedSequence::delta(a.dim()))?
        .l2_norm();
    Ok(DeconvResult {
        b,
        a_certified: a_cert,
        b_certified: b_cert,
        residual_l2: residual,
        truncation_radius: vec![r; a.dim()],
        grid_size: n,
    })
}

/// Largest grid tried by [`deconvolve_auto`].
pub const MAX_AUTO_GRID_1D: usize = 1 << 18;
pub const MAX_AUTO_GRID_2D: usize = 1 << 11;

/// [`deconvolve`] starting at `n` (raised to the aliasing minimum) and
/// doubling on [`Error::GridTooSmall`], or on [`Error::NotInvertible`] when the
/// grid minimum is positive and only the Lipschitz margin blocks certification.
pub fn deconvolve_auto(a: &WeightedSequence, n: usize, trunc_tol: f64) -> Result<DeconvResult> {
    let cap = if a.dim() == 1 {
        MAX_AUTO_GRID_1D
    } else {
        MAX_AUTO_GRID_2D
    };
    let mut n = n.max(required_grid(a.shape())).next_power_of_two();
    loop {
        match deconvolve(a, n, trunc_tol) {
            Err(Error::GridTooSmall { .. }) if 2 * n <= cap => n *= 2,
            Err(Error::NotInvertible { .. })
                if 2 * n <= cap && build_symbol(a, n)?.min_abs() > 0.0 =>
            {
                n *= 2
            }
            other => return other,
        }
    }
}

/// Two-sided estimate of `M^α_op(a) = ‖(X^α a)^‖_∞`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OpMomentumEstimate {
    pub index: MultiIndex,
    /// Plain grid maximum.
    pub lower: f64,
    /// Grid maximum plus the Lipschitz margin of the weighted sequence.
    pub upper: f64,
}

impl OpMomentumEstimate {
    pub fn as_momentum(&self) -> Momentum {
        Momentum {
            index: self.index.clone(),
            norm_tag: NormTag::Op,
            value: self.upper,
        }
    }
}

/// Sandwich `lower ≤ M^α_op(a) ≤ upper` from the symbol of `X^α a`.
pub fn momentum_op(a: &WeightedSequence, alpha: &MultiIndex, n: usize) -> Result<OpMomentumEstimate> {
    let weighted = a.apply_weight(alpha)?;
    let grid = build_symbol(&weighted, n)?;
    let lower = grid.max_abs();
    Ok(OpMomentumEstimate {
        index: alpha.clone(),
        lower,
        upper: lower + grid.lipschitz_margin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn hat_autocorrelation() -> WeightedSequence {
        WeightedSequence::from_slice_1d(-1, &[1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0])
    }

    #[test]
    fn delta_symbol_is_one() {
        let g = build_symbol(&WeightedSequence::delta(1), 64).unwrap();
        assert!(g.values().iter().all(|v| (*v - 1.0).norm() < 1e-15));
        assert_eq!(g.lipschitz_margin(), 0.0);
        assert_eq!(g.certify_range(), (1.0, 1.0));
    }

    #[test]
    fn cosine_symbol_matches_closed_form() {
        let g = build_symbol(&hat_autocorrelation(), 256).unwrap();
        for (j, v) in g.values().iter().enumerate() {
            let w = j as f64 / 256.0;
            let exact = 2.0 / 3.0 + (2.0 * PI * w).cos() / 3.0;
            assert!((v.re - exact).abs() < 1e-14 && v.im.abs() < 1e-14);
        }
    }

    #[test]
    fn certified_range_sandwiches_cosine_extrema() {
        let mut prev_gap = f64::INFINITY;
        for n in [64, 128, 256, 1024, 4096] {
            let (lo, hi) = build_symbol(&hat_autocorrelation(), n).unwrap().certify_range();
            assert!(lo <= 1.0 / 3.0 && hi >= 1.0, "N = {n}");
            let gap = (1.0 / 3.0 - lo) + (hi - 1.0);
            assert!(gap < prev_gap);
            prev_gap = gap;
        }
        assert!(prev_gap < 1e-3);
    }

    #[test]
    fn difference_filter_is_not_invertible() {
        let a = WeightedSequence::from_slice_1d(0, &[1.0, -1.0]);
        for n in [64, 1024] {
            let g = build_symbol(&a, n).unwrap();
            assert_eq!(g.certify_range().0, 0.0);
            assert!(g.values()[0].norm() < 1e-15);
        }
        assert!(matches!(
            deconvolve(&a, 1024, 1e-12),
            Err(Error::NotInvertible { .. })
        ));
    }

    #[test]
    fn aliasing_error_names_minimal_grid() {
        let a = WeightedSequence::from_slice_1d(-20, &[1.0; 41]);
        match build_symbol(&a, 64) {
            Err(Error::Aliasing { given, required }) => {
                assert_eq!(given, 64);
                assert_eq!(required, 128);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(build_symbol(&a, 100), Err(Error::Aliasing { .. })));
    }

    #[test]
    fn shifted_symbol_inverse_transform_recovers_sequence() {
        let a = WeightedSequence::from_slice_1d(3, &[0.5, -1.0, 2.0]);
        let g = build_symbol(&a, 64).unwrap();
        // |â| is not constant, check one node against direct evaluation.
        let w = 5.0 / 64.0;
        let direct: Complex64 = a
            .iter_indexed()
            .map(|(k, v)| v * Complex64::from_polar(1.0, 2.0 * PI * k[0] as f64 * w))
            .sum();
        assert!((g.values()[5] - direct).norm() < 1e-14);
    }

    #[test]
    fn deconvolve_delta() {
        let r = deconvolve(&WeightedSequence::delta(1), 64, 1e-12).unwrap();
        assert_eq!(r.b.len(), 1);
        assert!((r.b.values()[0] - 1.0).norm() < 1e-15);
        assert!(r.residual_l2 < 1e-15);
    }

    #[test]
    fn deconvolve_hat_closed_form() {
        // 1/((2 + cos 2πw)/3) has coefficients √3 (√3 − 2)^{|k|}.
        let r = deconvolve(&hat_autocorrelation(), 1024, 1e-13).unwrap();
        let q = 3f64.sqrt() - 2.0;
        for k in -15..=15i64 {
            let exact = 3f64.sqrt() * q.powi(k.abs() as i32);
            assert!((r.b.get(&[k]).re - exact).abs() < 1e-13, "k = {k}");
        }
        assert!(r.residual_l2 < 1e-12);
        assert_relative_eq!(r.b.get(&[0]).re, 1.7320508075688772, max_relative = 1e-12);
    }

    #[test]
    fn shifted_delta_inverts_to_opposite_shift() {
        let a = WeightedSequence::from_slice_1d(5, &[2.0]);
        let r = deconvolve(&a, 64, 1e-12).unwrap();
        assert!((r.b.get(&[-5]) - 0.5).norm() < 1e-14);
        assert!(r.residual_l2 < 1e-14);
    }

    #[test]
    fn slow_decay_needs_bigger_grid() {
        // zeros of the symbol close to the unit circle
        let a = WeightedSequence::from_slice_1d(0, &[1.0, -0.9]);
        assert!(matches!(
            deconvolve(&a, 64, 1e-10),
            Err(Error::GridTooSmall { .. })
        ));
        let r = deconvolve_auto(&a, 64, 1e-10).unwrap();
        assert!(r.grid_size > 64);
        let near = WeightedSequence::from_slice_1d(0, &[1.0, -0.999]);
        assert!(matches!(
            deconvolve(&near, 64, 1e-10),
            Err(Error::NotInvertible { .. })
        ));
        assert!(deconvolve_auto(&near, 64, 1e-6).is_ok());
        assert!(r.residual_l2 < 1e-8);
    }

    #[test]
    fn op_momentum_of_delta_and_hat() {
        let e = momentum_op(&WeightedSequence::delta(1), &MultiIndex::zero(1), 64).unwrap();
        assert_eq!((e.lower, e.upper), (1.0, 1.0));
        let h = momentum_op(&hat_autocorrelation(), &MultiIndex::zero(1), 1024).unwrap();
        assert!(h.lower <= 1.0 + 1e-15 && h.upper >= 1.0);
    }

    #[test]
    fn derivative_identity_on_constant_symbol() {
        let a = WeightedSequence::delta(1).scale(Complex64::new(2.5, -1.0));
        let g = build_symbol(&a, 64).unwrap();
        assert!(g.check_derivative_identity().unwrap() < 1e-14);
    }

    #[test]
    fn derivative_identity_is_second_order() {
        let a = hat_autocorrelation();
        let d1 = build_symbol(&a, 256).unwrap().check_derivative_identity().unwrap();
        let d2 = build_symbol(&a, 512).unwrap().check_derivative_identity().unwrap();
        let ratio = d1 / d2;
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn two_dimensional_symbol_and_inverse() {
        let mut a = WeightedSequence::zeros(vec![-1, -1], vec![3, 3]);
        a.values_mut()[4] = Complex64::new(1.0, 0.0);
        a.values_mut()[1] = Complex64::new(0.1, 0.05);
        a.values_mut()[5] = Complex64::new(-0.2, 0.0);
        let r = deconvolve(&a, 64, 1e-12).unwrap();
        assert!(r.residual_l2 < 1e-11);
    }

    #[test]
    fn csv_export_has_header_and_rows() {
        let g = build_symbol(&hat_autocorrelation(), 64).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("w,re,im,abs\n"));
        assert_eq!(text.lines().count(), 65);
        let json = serde_json::to_value(g.to_export()).unwrap();
        assert_eq!(json["abs"].as_array().unwrap().len(), 64);
    }
}
