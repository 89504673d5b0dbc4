use proptest::prelude::*;

use veason_core::geometry::{box_iou, mask_iou, rle_decode, rle_encode, BinaryMask, BoundingBox};
use veason_core::grpo::{advantages, kl_estimator};
use veason_core::response::{parse_response, snap_timestamp};
use veason_core::rewards::{
    hungarian, spatial_reward, total_reward, GroundTruthSample, GtObject, OraclePropagator, RewardWeights,
    SceneFrames,
};

fn arb_box() -> impl Strategy<Value = BoundingBox> {
    (0.0..60.0f64, 0.0..60.0f64, 0.0..30.0f64, 0.0..30.0f64)
        .prop_map(|(x, y, w, h)| BoundingBox::new(x, y, x + w, y + h).unwrap())
}

fn arb_mask(w: usize, h: usize) -> impl Strategy<Value = BinaryMask> {
    proptest::collection::vec(any::<bool>(), w * h).prop_map(move |bits| BinaryMask::from_bits(w, h, &bits).unwrap())
}

fn arb_scene() -> impl Strategy<Value = GroundTruthSample> {
    proptest::collection::vec(proptest::collection::vec(arb_mask(8, 8), 3), 0..3).prop_map(|objs| {
        let objects = objs
            .into_iter()
            .enumerate()
            .map(|(i, masks)| GtObject::from_masks(i as u32 + 1, masks))
            .collect();
        GroundTruthSample::new(vec![0.0, 1.0, 2.0], 8, 8, objects).unwrap()
    })
}

proptest! {
    #[test]
    fn box_iou_bounded_and_symmetric(a in arb_box(), b in arb_box()) {
        let (ab, ba) = (box_iou(&a, &b), box_iou(&b, &a));
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(ab, ba);
    }

    #[test]
    fn mask_iou_bounded(a in arb_mask(6, 5), b in arb_mask(6, 5)) {
        let v = mask_iou(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&v));
        prop_assert_eq!(mask_iou(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn rle_round_trip(m in arb_mask(7, 9)) {
        prop_assert_eq!(rle_decode(&rle_encode(&m)).unwrap(), m);
    }

    #[test]
    fn advantages_centered(rewards in proptest::collection::vec(0.0..4.0f64, 2..16)) {
        let a = advantages(&rewards, 1e-6).unwrap();
        let mean = a.iter().sum::<f64>() / a.len() as f64;
        prop_assert!(mean.abs() < 1e-9);
        // ranking is preserved
        for i in 0..a.len() {
            for j in 0..a.len() {
                if rewards[i] < rewards[j] {
                    prop_assert!(a[i] < a[j]);
                }
            }
        }
    }

    #[test]
    fn kl_estimator_non_negative(pairs in proptest::collection::vec((-20.0..0.0f64, -20.0..0.0f64), 1..10)) {
        let (new, reference): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        prop_assert!(kl_estimator(&new, &reference) >= 0.0);
        prop_assert_eq!(kl_estimator(&new, &new), 0.0);
    }

    #[test]
    fn hungarian_is_a_matching(cost in proptest::collection::vec(proptest::collection::vec(0.0..1.0f64, 1..6), 1..6)) {
        let m = cost.iter().map(Vec::len).min().unwrap();
        let cost: Vec<Vec<f64>> = cost.into_iter().map(|r| r[..m].to_vec()).collect();
        let a = hungarian(&cost);
        prop_assert_eq!(a.matched_pairs.len(), cost.len().min(m));
        let mut rows: Vec<usize> = a.matched_pairs.iter().map(|p| p.0).collect();
        let mut cols: Vec<usize> = a.matched_pairs.iter().map(|p| p.1).collect();
        rows.sort_unstable();
        rows.dedup();
        cols.sort_unstable();
        cols.dedup();
        prop_assert_eq!(rows.len(), a.matched_pairs.len());
        prop_assert_eq!(cols.len(), a.matched_pairs.len());
    }

    #[test]
    fn spatial_reward_order_invariant(pred in proptest::collection::vec(arb_box(), 0..5), gt in proptest::collection::vec(arb_box(), 0..5)) {
        let r = spatial_reward(&pred, &gt);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&r));
        let mut rev = pred.clone();
        rev.reverse();
        prop_assert!((spatial_reward(&rev, &gt) - r).abs() < 1e-12);
    }

    #[test]
    fn snap_picks_a_nearest_frame(t in -5.0..20.0f64) {
        let times = [0.0, 1.0, 2.5, 4.0];
        let k = snap_timestamp(t, &times);
        let best = times.iter().map(|s| (s - t).abs()).fold(f64::INFINITY, f64::min);
        prop_assert_eq!((times[k] - t).abs(), best);
    }

    #[test]
    fn parser_total(text in ".{0,200}") {
        let _ = parse_response(&text);
    }

    #[test]
    fn rewards_bounded(gt in arb_scene(), t in 0.0..3.0f64, boxes in proptest::collection::vec(
        (0.0..8.0f64, 0.0..8.0f64, 0.0..8.0f64, 0.0..8.0f64), 0..4)
    ) {
        let list: Vec<String> = boxes
            .iter()
            .map(|(x, y, w, h)| format!("[{x}, {y}, {}, {}]", x + w, y + h))
            .collect();
        let text = format!(
            r#"<think>t</think><answer>{{"keyframe_timestamp": {t}, "bbox_2d_list": [{}]}}</answer>"#,
            list.join(", ")
        );
        let w = RewardWeights::default();
        let b = total_reward(&text, &SceneFrames::new(&gt, None), &w, &OraclePropagator).unwrap();
        for r in [b.r_format, b.r_temporal, b.r_spatial, b.r_unified] {
            prop_assert!((0.0..=1.0 + 1e-12).contains(&r));
        }
        prop_assert_eq!(b.r_format, 1.0);
        prop_assert!(b.r_total <= w.sum() + 1e-12);
    }
}
