//! Finitely supported sequences on `Z^d`, multi-indices and momenta.
//!
//! A [`WeightedSequence`] stores its values densely over a bounding box: the
//! entry at array position `p` belongs to the lattice point `offset + p`.
//! Everything outside the box is zero.
//!
//! The weight operator multiplies an entry by the monomial `k^α`, using the
//! literal signed value of `k` and the convention `0^0 = 1`, so that `α = 0`
//! is the identity. Momenta are norms of weighted sequences:
//!
//! ```
//! use wiener::sequence::{MultiIndex, NormTag, WeightedSequence};
//!
//! let a = WeightedSequence::from_slice_1d(-1, &[1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0]);
//! let m = a.momentum(&MultiIndex::new(vec![1]), NormTag::L2).unwrap();
//! assert!((m.value - 2f64.sqrt() / 6.0).abs() < 1e-15);
//! ```

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::NeumaierSum;

/// Exponent vector `α ∈ N_0^d`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        MultiIndex(exponents)
    }

    pub fn zero(dim: usize) -> Self {
        MultiIndex(vec![0; dim])
    }

    /// The `j`-th unit multi-index `e_j`.
    pub fn unit(dim: usize, j: usize) -> Self {
        let mut e = vec![0; dim];
        e[j] = 1;
        MultiIndex(e)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    /// `|α| = Σ_j α_j`.
    pub fn size(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    /// Componentwise order `self ≤ other`.
    pub fn le(&self, other: &MultiIndex) -> bool {
        self.dim() == other.dim() && self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    /// Strict componentwise order: `self ≤ other` and `self ≠ other`.
    pub fn lt(&self, other: &MultiIndex) -> bool {
        self.le(other) && self != other
    }

    pub fn checked_sub(&self, other: &MultiIndex) -> Option<MultiIndex> {
        if !other.le(self) {
            return None;
        }
        Some(MultiIndex(
            self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect(),
        ))
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        assert_eq!(self.dim(), other.dim());
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// Multi-index binomial `∏_j binom(α_j, β_j)`; zero unless `β ≤ α`.
    pub fn binomial(&self, beta: &MultiIndex) -> f64 {
        if !beta.le(self) {
            return 0.0;
        }
        self.0
            .iter()
            .zip(&beta.0)
            .map(|(&n, &k)| binomial(n, k))
            .product()
    }

    /// All `β ≤ self`, ordered by size and then lexicographically.
    ///
    /// This is a linear extension of the componentwise order: every `β` is
    /// listed after all of its strict predecessors.
    pub fn lower_set(&self) -> Vec<MultiIndex> {
        let mut out = vec![Vec::with_capacity(self.dim())];
        for &bound in &self.0 {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    (0..=bound).map(move |e| {
                        let mut p = prefix.clone();
                        p.push(e);
                        p
                    })
                })
                .collect();
        }
        let mut out: Vec<MultiIndex> = out.into_iter().map(MultiIndex).collect();
        out.sort_by(|a, b| a.size().cmp(&b.size()).then_with(|| a.0.cmp(&b.0)));
        out
    }

    /// The monomial `k^α` with the `0^0 = 1` convention.
    pub fn monomial(&self, k: &[i64]) -> f64 {
        self.0
            .iter()
            .zip(k)
            .map(|(&e, &kj)| (kj as f64).powi(e as i32))
            .product()
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, ")")
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}

/// Which norm a momentum is measured in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormTag {
    L1,
    L2,
    /// Sup norm of the Fourier symbol (see [`crate::symbol::momentum_op`]).
    Op,
}

/// `M^α_B(a)` together with the multi-index and norm it was taken in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Momentum {
    pub index: MultiIndex,
    pub norm_tag: NormTag,
    pub value: f64,
}

/// A finitely supported complex sequence on `Z^d`, stored over a box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SequenceFile", into = "SequenceFile")]
pub struct WeightedSequence {
    offset: Vec<i64>,
    shape: Vec<usize>,
    values: Vec<Complex64>,
}

/// On-disk JSON layout shared by every tool in this crate.
///
/// `re` and `im` are row-major over `shape` (last axis fastest).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SequenceFile {
    pub dim: usize,
    pub offset: Vec<i64>,
    pub shape: Vec<usize>,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl TryFrom<SequenceFile> for WeightedSequence {
    type Error = Error;

    fn try_from(file: SequenceFile) -> Result<Self> {
        if file.offset.len() != file.dim || file.shape.len() != file.dim {
            return Err(Error::InvalidInput(format!(
                "dim = {} but offset has {} and shape {} entries",
                file.dim,
                file.offset.len(),
                file.shape.len()
            )));
        }
        if file.re.len() != file.im.len() {
            return Err(Error::InvalidInput(
                "re and im have different lengths".into(),
            ));
        }
        let values = file
            .re
            .iter()
            .zip(&file.im)
            .map(|(&re, &im)| Complex64::new(re, im))
            .collect();
        WeightedSequence::new(file.offset, file.shape, values)
    }
}

impl From<WeightedSequence> for SequenceFile {
    fn from(seq: WeightedSequence) -> Self {
        SequenceFile {
            dim: seq.dim(),
            re: seq.values.iter().map(|v| v.re).collect(),
            im: seq.values.iter().map(|v| v.im).collect(),
            offset: seq.offset,
            shape: seq.shape,
        }
    }
}

impl WeightedSequence {
    pub fn new(offset: Vec<i64>, shape: Vec<usize>, values: Vec<Complex64>) -> Result<Self> {
        if offset.is_empty() {
            return Err(Error::InvalidInput("dimension must be positive".into()));
        }
        if offset.len() != shape.len() {
            return Err(Error::DimensionMismatch {
                expected: offset.len(),
                found: shape.len(),
            });
        }
        let len: usize = shape.iter().product();
        if len != values.len() {
            return Err(Error::InvalidInput(format!(
                "shape {shape:?} needs {len} values, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite value at position {i}")));
        }
        Ok(WeightedSequence {
            offset,
            shape,
            values,
        })
    }

    /// One-dimensional sequence with real entries starting at `offset`.
    pub fn from_slice_1d(offset: i64, values: &[f64]) -> Self {
        Self::from_complex_1d(offset, values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn from_complex_1d(offset: i64, values: Vec<Complex64>) -> Self {
        let n = values.len();
        Self::new(vec![offset], vec![n], values).expect("valid 1-d sequence")
    }

    /// The Kronecker unit `δ` in dimension `dim`.
    pub fn delta(dim: usize) -> Self {
        Self::new(vec![0; dim], vec![1; dim], vec![Complex64::new(1.0, 0.0)]).unwrap()
    }

    /// All-zero sequence over the given box.
    pub fn zeros(offset: Vec<i64>, shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Self::new(offset, shape, vec![Complex64::new(0.0, 0.0); len]).unwrap()
    }

    pub fn dim(&self) -> usize {
        self.offset.len()
    }

    pub fn offset(&self) -> &[i64] {
        &self.offset
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Lattice point of the flat (row-major) position `flat`.
    pub fn lattice_point(&self, flat: usize) -> Vec<i64> {
        let mut k = vec![0; self.dim()];
        let mut rest = flat;
        for axis in (0..self.dim()).rev() {
            let n = self.shape[axis];
            k[axis] = self.offset[axis] + (rest % n) as i64;
            rest /= n;
        }
        k
    }

    fn flat_position(&self, k: &[i64]) -> Option<usize> {
        debug_assert_eq!(k.len(), self.shape.len());
        let mut flat = 0usize;
        for ((&kj, &o), &w) in k.iter().zip(&self.offset).zip(&self.shape) {
            let p = kj - o;
            if p < 0 || p as usize >= w {
                return None;
            }
            flat = flat * w + p as usize;
        }
        Some(flat)
    }

    /// Value at lattice point `k`; zero outside the stored box.
    pub fn get(&self, k: &[i64]) -> Complex64 {
        self.flat_position(k)
            .map(|p| self.values[p])
            .unwrap_or_default()
    }

    /// `(k, a_k)` in lexicographic order over the box.
    pub fn iter_indexed(&self) -> impl Iterator<Item = (Vec<i64>, Complex64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(|(p, &v)| (self.lattice_point(p), v))
    }

    /// Largest `|k_j|` over the stored box, per axis.
    pub fn radius(&self) -> Vec<i64> {
        self.offset
            .iter()
            .zip(&self.shape)
            .map(|(&o, &n)| o.abs().max((o + n as i64 - 1).abs()))
            .collect()
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    pub fn conj(&self) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v = v.conj());
        out
    }

    /// The reflected sequence `k ↦ a_{-k}`.
    pub fn reflect(&self) -> Self {
        let offset = self
            .offset
            .iter()
            .zip(&self.shape)
            .map(|(&o, &n)| -(o + n as i64 - 1))
            .collect();
        let mut values = self.values.clone();
        values.reverse();
        WeightedSequence {
            offset,
            shape: self.shape.clone(),
            values,
        }
    }

    /// Copy of `self` re-embedded over the box `[offset, offset + shape)`.
    pub fn restrict_to(&self, offset: &[i64], shape: &[usize]) -> Self {
        let mut out = WeightedSequence::zeros(offset.to_vec(), shape.to_vec());
        for p in 0..out.len() {
            let k = out.lattice_point(p);
            out.values[p] = self.get(&k);
        }
        out
    }

    /// Difference `self - other` over the union of both boxes.
    pub fn sub(&self, other: &WeightedSequence) -> Result<Self> {
        self.check_dim(other.dim())?;
        let (offset, shape) = union_box(self, other);
        let mut out = self.restrict_to(&offset, &shape);
        for p in 0..out.len() {
            let k = out.lattice_point(p);
            out.values[p] -= other.get(&k);
        }
        Ok(out)
    }

    /// Removes boundary slabs that are exactly zero. An all-zero sequence
    /// collapses to a single zero entry at the origin.
    pub fn trim(&self) -> Self {
        let d = self.dim();
        let mut lo = vec![i64::MAX; d];
        let mut hi = vec![i64::MIN; d];
        let mut any = false;
        for (k, v) in self.iter_indexed() {
            if v != Complex64::new(0.0, 0.0) {
                any = true;
                for j in 0..d {
                    lo[j] = lo[j].min(k[j]);
                    hi[j] = hi[j].max(k[j]);
                }
            }
        }
        if !any {
            return WeightedSequence::zeros(vec![0; d], vec![1; d]);
        }
        let shape: Vec<usize> = lo.iter().zip(&hi).map(|(l, h)| (h - l + 1) as usize).collect();
        self.restrict_to(&lo, &shape)
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        if self.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: d,
            });
        }
        Ok(())
    }

    /// `X^α(a)_k = k^α a_k` on the same box.
    pub fn apply_weight(&self, alpha: &MultiIndex) -> Result<Self> {
        self.check_dim(alpha.dim())?;
        let mut out = self.clone();
        for (p, v) in out.values.iter_mut().enumerate() {
            let k = self.lattice_point(p);
            *v *= alpha.monomial(&k);
        }
        Ok(out)
    }

    /// `M^α_B(a)` for `B ∈ {ℓ¹, ℓ²}`; summed in box order with compensation.
    ///
    /// The `Op` tag needs a symbol grid and is served by
    /// [`crate::symbol::momentum_op`].
    pub fn momentum(&self, alpha: &MultiIndex, tag: NormTag) -> Result<Momentum> {
        let weighted = self.apply_weight(alpha)?;
        let value = match tag {
            NormTag::L1 => weighted.l1_norm(),
            NormTag::L2 => weighted.l2_norm(),
            NormTag::Op => {
                return Err(Error::InvalidInput(
                    "OP momenta are computed from the symbol grid".into(),
                ))
            }
        };
        Ok(Momentum {
            index: alpha.clone(),
            norm_tag: tag,
            value,
        })
    }

    pub fn l1_norm(&self) -> f64 {
        let mut s = NeumaierSum::default();
        self.values.iter().for_each(|v| s.add(v.norm()));
        s.total()
    }

    pub fn l2_norm(&self) -> f64 {
        let mut s = NeumaierSum::default();
        self.values.iter().for_each(|v| s.add(v.norm_sqr()));
        s.total().sqrt()
    }

    pub fn linf_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Exact direct convolution; the output box is the Minkowski sum of the
    /// input boxes.
    pub fn convolve(&self, other: &WeightedSequence) -> Result<Self> {
        self.check_dim(other.dim())?;
        let d = self.dim();
        let offset: Vec<i64> = (0..d).map(|j| self.offset[j] + other.offset[j]).collect();
        let shape: Vec<usize> = (0..d).map(|j| self.shape[j] + other.shape[j] - 1).collect();
        let mut out = WeightedSequence::zeros(offset, shape);
        let strides = row_major_strides(&out.shape);
        let other_pos: Vec<(usize, Complex64)> = other
            .values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != Complex64::new(0.0, 0.0))
            .map(|(q, &v)| (relative_flat(&other.shape, q, &strides), v))
            .collect();
        for (p, &u) in self.values.iter().enumerate() {
            if u == Complex64::new(0.0, 0.0) {
                continue;
            }
            let base = relative_flat(&self.shape, p, &strides);
            for &(q, v) in &other_pos {
                out.values[base + q] += u * v;
            }
        }
        Ok(out)
    }
}

/// Offset of a position of a box with `shape` when re-expressed in a larger
/// row-major array with the given `strides` (both anchored at the origin).
fn relative_flat(shape: &[usize], flat: usize, strides: &[usize]) -> usize {
    let mut rest = flat;
    let mut out = 0;
    for axis in (0..shape.len()).rev() {
        out += (rest % shape[axis]) * strides[axis];
        rest /= shape[axis];
    }
    out
}

pub(crate) fn row_major_strides(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; shape.len()];
    for axis in (0..shape.len().saturating_sub(1)).rev() {
        strides[axis] = strides[axis + 1] * shape[axis + 1];
    }
    strides
}

fn union_box(a: &WeightedSequence, b: &WeightedSequence) -> (Vec<i64>, Vec<usize>) {
    let d = a.dim();
    let mut offset = vec![0; d];
    let mut shape = vec![0; d];
    for j in 0..d {
        let lo = a.offset[j].min(b.offset[j]);
        let hi = (a.offset[j] + a.shape[j] as i64).max(b.offset[j] + b.shape[j] as i64);
        offset[j] = lo;
        shape[j] = (hi - lo) as usize;
    }
    (offset, shape)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn weight_of_delta() {
        let d = WeightedSequence::delta(1);
        let w = d.apply_weight(&MultiIndex::new(vec![1])).unwrap();
        assert_eq!(w.values(), &[c(0.0)]);
        let w0 = d.apply_weight(&MultiIndex::new(vec![0])).unwrap();
        assert_eq!(w0, d);
    }

    #[test]
    fn weight_squares_indices() {
        let a = WeightedSequence::from_slice_1d(-1, &[1.0, 2.0, 3.0]);
        let w = a.apply_weight(&MultiIndex::new(vec![2])).unwrap();
        assert_eq!(w.values(), &[c(1.0), c(0.0), c(3.0)]);
    }

    #[test]
    fn odd_weights_keep_sign() {
        let a = WeightedSequence::from_slice_1d(-2, &[1.0, 1.0, 1.0, 1.0, 1.0]);
        let w = a.apply_weight(&MultiIndex::new(vec![3])).unwrap();
        assert_eq!(w.get(&[-2]), c(-8.0));
        assert_eq!(w.get(&[2]), c(8.0));
    }

    #[test]
    fn weight_dimension_mismatch() {
        let a = WeightedSequence::delta(2);
        assert!(matches!(
            a.apply_weight(&MultiIndex::new(vec![1])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn momenta_of_hat_autocorrelation() {
        let a = WeightedSequence::from_slice_1d(-1, &[1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0]);
        let m2 = a.momentum(&MultiIndex::new(vec![1]), NormTag::L2).unwrap();
        assert_relative_eq!(m2.value, 2f64.sqrt() / 6.0, max_relative = 1e-15);
        let m1 = a.momentum(&MultiIndex::new(vec![1]), NormTag::L1).unwrap();
        assert_relative_eq!(m1.value, 1.0 / 3.0, max_relative = 1e-15);
        let d = WeightedSequence::delta(1);
        assert_eq!(d.momentum(&MultiIndex::new(vec![2]), NormTag::L1).unwrap().value, 0.0);
        let d2 = WeightedSequence::delta(2);
        assert_eq!(d2.momentum(&MultiIndex::zero(2), NormTag::L1).unwrap().value, 1.0);
    }

    #[test]
    fn binomials_and_lower_set() {
        let a = MultiIndex::new(vec![2, 1]);
        assert_eq!(a.binomial(&MultiIndex::new(vec![1, 0])), 2.0);
        assert_eq!(a.binomial(&MultiIndex::new(vec![1, 1])), 2.0);
        assert_eq!(a.binomial(&MultiIndex::new(vec![0, 2])), 0.0);
        let set = a.lower_set();
        assert_eq!(set.len(), 6);
        assert!(set[0].is_zero());
        assert_eq!(set.last().unwrap(), &a);
        for (i, g) in set.iter().enumerate() {
            for h in &set[i + 1..] {
                assert!(!h.lt(g), "{h} listed after {g}");
            }
        }
        assert_eq!(a.to_string(), "(2,1)");
    }

    #[test]
    fn convolve_small() {
        let a = WeightedSequence::from_slice_1d(0, &[1.0, 1.0]);
        let b = a.convolve(&a).unwrap();
        assert_eq!(b.values(), &[c(1.0), c(2.0), c(1.0)]);
        assert_eq!(b.offset(), &[0]);
    }

    #[test]
    fn convolve_2d_offsets() {
        let a = WeightedSequence::new(vec![-1, 2], vec![2, 1], vec![c(1.0), c(2.0)]).unwrap();
        let b = WeightedSequence::new(vec![3, 0], vec![1, 2], vec![c(1.0), c(-1.0)]).unwrap();
        let ab = a.convolve(&b).unwrap();
        assert_eq!(ab.offset(), &[2, 2]);
        assert_eq!(ab.get(&[2, 2]), c(1.0));
        assert_eq!(ab.get(&[2, 3]), c(-1.0));
        assert_eq!(ab.get(&[3, 2]), c(2.0));
        assert_eq!(ab.get(&[3, 3]), c(-2.0));
    }

    #[test]
    fn trim_and_reflect() {
        let a = WeightedSequence::from_slice_1d(-2, &[0.0, 1.0, 2.0, 0.0, 0.0]);
        let t = a.trim();
        assert_eq!(t.offset(), &[-1]);
        assert_eq!(t.values(), &[c(1.0), c(2.0)]);
        let r = t.reflect();
        assert_eq!(r.get(&[1]), c(1.0));
        assert_eq!(r.get(&[0]), c(2.0));
    }

    #[test]
    fn json_round_trip_and_rejection() {
        let a = WeightedSequence::new(
            vec![-1, 0],
            vec![2, 2],
            vec![c(1.0), Complex64::new(0.5, -2.0), c(3.0), c(4.0)],
        )
        .unwrap();
        let text = serde_json::to_string(&a).unwrap();
        assert!(text.contains("\"dim\":2"));
        let back: WeightedSequence = serde_json::from_str(&text).unwrap();
        assert_eq!(back, a);
        let bad = r#"{"dim":1,"offset":[0],"shape":[2],"re":[1.0],"im":[0.0]}"#;
        assert!(serde_json::from_str::<WeightedSequence>(bad).is_err());
    }

    fn arb_seq(dim: usize) -> impl Strategy<Value = WeightedSequence> {
        (
            prop::collection::vec(-3i64..3, dim),
            prop::collection::vec(1usize..4, dim),
        )
            .prop_flat_map(move |(offset, shape)| {
                let n: usize = shape.iter().product();
                prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n).prop_map(move |v| {
                    WeightedSequence::new(
                        offset.clone(),
                        shape.clone(),
                        v.into_iter().map(|(r, i)| Complex64::new(r, i)).collect(),
                    )
                    .unwrap()
                })
            })
    }

    fn max_diff(a: &WeightedSequence, b: &WeightedSequence) -> f64 {
        a.sub(b).unwrap().linf_norm()
    }

    proptest! {
        #[test]
        fn weights_compose(a in arb_seq(2), e in prop::collection::vec(0u32..3, 4)) {
            let al = MultiIndex::new(e[..2].to_vec());
            let be = MultiIndex::new(e[2..].to_vec());
            let lhs = a.apply_weight(&al).unwrap().apply_weight(&be).unwrap();
            let rhs = a.apply_weight(&al.add(&be)).unwrap();
            let scale = rhs.linf_norm().max(1e-300);
            prop_assert!(max_diff(&lhs, &rhs) <= 1e-12 * scale);
        }

        #[test]
        fn l2_momentum_below_l1(a in arb_seq(2), e in prop::collection::vec(0u32..3, 2)) {
            let al = MultiIndex::new(e);
            let m1 = a.momentum(&al, NormTag::L1).unwrap().value;
            let m2 = a.momentum(&al, NormTag::L2).unwrap().value;
            prop_assert!(m2 <= m1 * (1.0 + 1e-12));
        }

        #[test]
        fn convolution_commutes_and_associates(
            a in arb_seq(2), b in arb_seq(2), c3 in arb_seq(2)
        ) {
            let ab = a.convolve(&b).unwrap();
            let ba = b.convolve(&a).unwrap();
            let scale = ab.linf_norm().max(1e-300);
            prop_assert!(max_diff(&ab, &ba) <= 1e-10 * scale);
            let l = ab.convolve(&c3).unwrap();
            let r = a.convolve(&b.convolve(&c3).unwrap()).unwrap();
            let scale = l.linf_norm().max(1e-300);
            prop_assert!(max_diff(&l, &r) <= 1e-10 * scale);
        }

        #[test]
        fn delta_is_unit(a in arb_seq(1)) {
            let ad = a.convolve(&WeightedSequence::delta(1)).unwrap();
            prop_assert_eq!(ad.trim(), a.trim());
        }
    }
}
