//! Property tests for the library-wide invariants.

use proptest::prelude::*;
use srmap::casal::{dissimilarity, patch_dissimilarity, Patch};
use srmap::lrp::{lrp_linear, lrp_maxpool};
use srmap::metrics::{ssim, SsimConfig};
use srmap::netrt::MaxPool2D;
use srmap::tensor::{normalize_minmax, resize_bilinear, rgb_to_lab, Image, Tensor};

fn finite_vec(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1e3..1e3f64, len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn normalize_lands_in_unit_interval(data in finite_vec(16)) {
        let t = Tensor::new(vec![16], data).unwrap();
        let n = normalize_minmax(&t);
        for &v in n.data() {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        let again = normalize_minmax(&n);
        prop_assert_eq!(n.data(), again.data());
    }

    #[test]
    fn resize_to_same_size_is_identity(
        data in prop::collection::vec(0.0..=1.0f64, 12),
        h in 1usize..5,
    ) {
        let w = 12 / h;
        prop_assume!(h * w == 12);
        let img = Image::new(h, w, 1, data).unwrap();
        let out = resize_bilinear(&img, h, w).unwrap();
        prop_assert_eq!(img.tensor().data(), out.tensor().data());
    }

    #[test]
    fn gray_pixels_have_no_chroma(v in 0.0..=1.0f64) {
        let img = Image::constant(1, 1, 3, v).unwrap();
        let lab = rgb_to_lab(&img).unwrap();
        prop_assert!(lab.pixel(0, 0, 1).abs() < 1e-6);
        prop_assert!(lab.pixel(0, 0, 2).abs() < 1e-6);
    }

    #[test]
    fn dissimilarity_monotone_in_position_weight(
        d_color in 0.0..100.0f64,
        d_pos in 0.0..2.0f64,
        c in 0.0..10.0f64,
        bump in 0.0..5.0f64,
    ) {
        let base = dissimilarity(d_color, d_pos, c);
        let more = dissimilarity(d_color, d_pos, c + bump);
        prop_assert!(more <= base + 1e-12);
    }

    #[test]
    fn patch_dissimilarity_symmetric_nonnegative(
        a in finite_vec(27),
        b in finite_vec(27),
        ay in -1.0..1.0f64, ax in -1.0..1.0f64,
        by in -1.0..1.0f64, bx in -1.0..1.0f64,
    ) {
        let pa = Patch { values: a, center: (ay, ax) };
        let pb = Patch { values: b, center: (by, bx) };
        let ab = patch_dissimilarity(&pa, &pb, 3.0).unwrap();
        let ba = patch_dissimilarity(&pb, &pa, 3.0).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert_eq!(patch_dissimilarity(&pa, &pa, 3.0).unwrap(), 0.0);
    }

    #[test]
    fn ssim_self_is_one_and_range_holds(
        data in prop::collection::vec(0.0..=1.0f64, 144),
        other in prop::collection::vec(0.0..=1.0f64, 144),
    ) {
        let cfg = SsimConfig::default();
        let a = Tensor::new(vec![12, 12], data).unwrap();
        let b = Tensor::new(vec![12, 12], other).unwrap();
        prop_assert_eq!(ssim(&a, &a, &cfg).unwrap(), 1.0);
        let v = ssim(&a, &b, &cfg).unwrap();
        prop_assert!((-1.0..=1.0).contains(&v), "ssim out of range: {}", v);
        let sym = ssim(&b, &a, &cfg).unwrap();
        prop_assert!((v - sym).abs() < 1e-12);
    }

    #[test]
    fn lrp_linear_scale_covariance(
        w in finite_vec(12),
        x in prop::collection::vec(-2.0..2.0f64, 4),
        r in prop::collection::vec(0.0..2.0f64, 3),
    ) {
        let weights = Tensor::new(vec![3, 4], w).unwrap();
        let base = lrp_linear(&weights, &x, &r, 1e-9).unwrap();
        let doubled: Vec<f64> = r.iter().map(|v| v * 2.0).collect();
        let scaled = lrp_linear(&weights, &x, &doubled, 1e-9).unwrap();
        for (a, b) in base.iter().zip(&scaled) {
            prop_assert_eq!(a * 2.0, *b);
        }
    }

    #[test]
    fn maxpool_relevance_total_is_preserved(
        data in prop::collection::vec(-5.0..5.0f64, 16),
        rel in prop::collection::vec(0.0..3.0f64, 4),
    ) {
        let p = MaxPool2D { kh: 2, kw: 2, stride: 2 };
        let input = Tensor::new(vec![4, 4, 1], data).unwrap();
        let r_out = Tensor::new(vec![2, 2, 1], rel).unwrap();
        let r_in = lrp_maxpool(&p, &input, &r_out).unwrap();
        prop_assert!((r_in.sum() - r_out.sum()).abs() < 1e-12);
    }
}
