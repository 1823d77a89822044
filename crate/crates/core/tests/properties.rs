use num_complex::Complex64;
use proptest::prelude::*;

use wiener::bounds::{bound_one_dim, bound_riesz, DecayCertificate};
use wiener::constants::{constant_s, constant_w};
use wiener::sampling::{validate_set, PartitionOfUnity};
use wiener::sequence::{MultiIndex, NormTag, WeightedSequence};
use wiener::symbol::deconvolve_auto;

/// 1-D sequences with `|a_0|` larger than the rest of the `ℓ¹` mass.
fn dominant() -> impl Strategy<Value = WeightedSequence> {
    (
        0usize..8,
        prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 1..9),
        0.1..0.9f64,
    )
        .prop_map(|(pick, raw, ratio)| {
            let mut values: Vec<Complex64> = raw.iter().map(|&(re, im)| Complex64::new(re, im)).collect();
            let centre = pick % values.len();
            values[centre] = Complex64::new(0.0, 0.0);
            let mass: f64 = values.iter().map(|v| v.norm()).sum();
            let scale = if mass > 0.0 { ratio / mass } else { 0.0 };
            for v in values.iter_mut() {
                *v *= scale;
            }
            values[centre] = Complex64::new(1.0, 0.0);
            WeightedSequence::from_complex_1d(-(centre as i64), values)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn inverse_meets_one_dim_bounds(a in dominant()) {
        let res = deconvolve_auto(&a, 256, 1e-13).unwrap();
        prop_assert!(res.residual_l2 < 1e-10);
        let m12 = a.momentum(&MultiIndex::new(vec![1]), NormTag::L2).unwrap().value;
        let (m12_b, l1_b) = bound_one_dim(m12, res.a_certified).unwrap();
        let observed = res.b.momentum(&MultiIndex::new(vec![1]), NormTag::L2).unwrap().value;
        prop_assert!(observed <= m12_b * (1.0 + 1e-9) + 1e-12);
        prop_assert!(res.b.l1_norm() <= l1_b * (1.0 + 1e-9));
    }

    #[test]
    fn sequence_json_round_trip(a in dominant()) {
        let text = serde_json::to_string(&a).unwrap();
        let back: WeightedSequence = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, a);
    }

    #[test]
    fn convolution_commutes(a in dominant(), b in dominant()) {
        let ab = a.convolve(&b).unwrap();
        let ba = b.convolve(&a).unwrap();
        prop_assert!(ab.sub(&ba).unwrap().linf_norm() < 1e-14);
    }

    #[test]
    fn partition_of_unity_on_random_sets(
        gaps in prop::collection::vec(0.05..1.5f64, 2..60),
    ) {
        let mut points = vec![0.0];
        for g in &gaps {
            points.push(points.last().unwrap() + g);
        }
        let window = (0.0, *points.last().unwrap());
        let set = validate_set(points, 0.8, window).unwrap();
        let pou = PartitionOfUnity::new(&set);
        prop_assert!(pou.defect(4000) < 1e-12);
    }

    #[test]
    fn riesz_bounds_are_ordered(alpha in 1.6..8.0f64, c in 0.5..4.0f64, a in 0.01..1.0f64) {
        let cert = DecayCertificate::new(c, alpha).unwrap();
        let (r, big_r) = bound_riesz(&cert, a).unwrap();
        prop_assert!(0.0 < r && r <= big_r);
        prop_assert!((big_r - c * constant_w(alpha).unwrap()).abs() <= 1e-12 * big_r);
    }

    #[test]
    fn constants_decrease_in_alpha(alpha in 1.6..8.0f64, step in 0.05..2.0f64) {
        prop_assert!(constant_w(alpha + step).unwrap() < constant_w(alpha).unwrap());
        prop_assert!(constant_s(alpha + step).unwrap() < constant_s(alpha).unwrap());
    }
}

#[test]
fn sparse_set_is_rejected() {
    let err = validate_set(vec![0.0, 1.0, 3.5], 1.0, (0.0, 3.5)).unwrap_err();
    assert_eq!(err.kind(), "NotDense");
}
