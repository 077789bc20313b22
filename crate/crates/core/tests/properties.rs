use proptest::prelude::*;

use vos_cascade::drsn::merge_objects;
use vos_cascade::eval::{auc_success, contour_accuracy, region_similarity, Tolerance};
use vos_cascade::geometry::{
    crop_resize, gaussian_box_samples, iou, BinaryMask, BoundingBox, Frame, GaussianSampleConfig, ProbabilityMap,
};
use vos_cascade::opn::{filter_proposals, recall_at, Proposal, ProposalFilterConfig};
use vos_cascade::otn::{select_top_k, ScoredCandidate};
use vos_cascade::rng;

fn boxes() -> impl Strategy<Value = BoundingBox> {
    (-50.0..150.0f64, -50.0..150.0f64, 0.5..80.0f64, 0.5..80.0f64).prop_map(|(x, y, w, h)| BoundingBox::new(x, y, w, h))
}

fn int_boxes() -> impl Strategy<Value = (usize, usize, usize, usize)> {
    (0usize..30, 0usize..30, 1usize..10, 1usize..10)
}

fn masks(w: usize, h: usize) -> impl Strategy<Value = BinaryMask> {
    prop::collection::vec(any::<bool>(), w * h).prop_map(move |bits| BinaryMask::from_bits(w, h, bits).unwrap())
}

proptest! {
    #[test]
    fn iou_is_symmetric_and_bounded(a in boxes(), b in boxes()) {
        let ab = iou(&a, &b);
        prop_assert_eq!(ab, iou(&b, &a));
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert!((iou(&a, &a) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn filtering_is_idempotent(prev in boxes(), props in prop::collection::vec(boxes(), 0..60), alpha in 0.0..0.9f64) {
        let cfg = ProposalFilterConfig { alpha, ..ProposalFilterConfig::default() };
        let props: Vec<Proposal> = props.into_iter().map(|b| Proposal::new(b, 0.5)).collect();
        let once = filter_proposals(&props, &prev, &cfg);
        let again: Vec<Proposal> = once.iter().map(|&b| Proposal::new(b, 0.5)).collect();
        prop_assert_eq!(filter_proposals(&again, &prev, &cfg), once.clone());
        prop_assert!(once.iter().all(|b| iou(b, &prev) > alpha));
    }

    #[test]
    fn recall_falls_as_the_threshold_rises(
        frames in prop::collection::vec((boxes(), prop::collection::vec(boxes(), 0..8)), 1..20),
        t1 in 0.0..1.0f64,
        t2 in 0.0..1.0f64,
    ) {
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let gt: Vec<_> = frames.iter().map(|f| f.0).collect();
        let props: Vec<Vec<Proposal>> = frames.iter().map(|f| f.1.iter().map(|&b| Proposal::new(b, 1.0)).collect()).collect();
        prop_assert!(recall_at(&props, &gt, lo).unwrap() >= recall_at(&props, &gt, hi).unwrap());
    }

    #[test]
    fn top_k_is_a_sorted_prefix(scores in prop::collection::vec(-3i32..3, 1..50), k in 1usize..10) {
        let scored: Vec<ScoredCandidate> = scores.iter().enumerate().map(|(i, &s)| ScoredCandidate {
            bbox: BoundingBox::new(i as f64, 0.0, 1.0, 1.0),
            score: s as f64,
            source_index: i,
        }).collect();
        let top = select_top_k(&scored, k).unwrap();
        prop_assert_eq!(top.len(), k.min(scored.len()));
        prop_assert!(top.windows(2).all(|w| w[0].score > w[1].score || (w[0].score == w[1].score && w[0].source_index < w[1].source_index)));
        let worst = top.last().unwrap().score;
        let better_outside = scored.iter().filter(|c| c.score > worst).count();
        prop_assert!(better_outside <= top.len());
    }

    #[test]
    fn contour_accuracy_is_symmetric_and_grows_with_tolerance(a in masks(12, 10), b in masks(12, 10), t in 0.0..3.0f64) {
        let f = contour_accuracy(&a, &b, Tolerance::Pixels(t)).unwrap();
        prop_assert!((f - contour_accuracy(&b, &a, Tolerance::Pixels(t)).unwrap()).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&f));
        prop_assert!(contour_accuracy(&a, &b, Tolerance::Pixels(t + 1.0)).unwrap() >= f - 1e-12);
        prop_assert_eq!(contour_accuracy(&a, &a, Tolerance::Pixels(t)).unwrap(), 1.0);
    }

    #[test]
    fn auc_ignores_frame_order(pairs in prop::collection::vec((boxes(), boxes()), 1..30), seed in any::<u64>()) {
        let (p, g): (Vec<_>, Vec<_>) = pairs.iter().cloned().unzip();
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng::stream(seed, &[]));
        let p2: Vec<_> = order.iter().map(|&i| p[i]).collect();
        let g2: Vec<_> = order.iter().map(|&i| g[i]).collect();
        prop_assert!((auc_success(&p, &g).unwrap() - auc_success(&p2, &g2).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn region_similarity_of_filled_boxes_is_their_iou(a in int_boxes(), b in int_boxes()) {
        let to_box = |(x, y, w, h): (usize, usize, usize, usize)| BoundingBox::new(x as f64, y as f64, w as f64, h as f64);
        let (ba, bb) = (to_box(a), to_box(b));
        let j = region_similarity(&BinaryMask::from_box(40, 40, &ba), &BinaryMask::from_box(40, 40, &bb)).unwrap();
        prop_assert!((j - iou(&ba, &bb)).abs() < 1e-12);
    }

    #[test]
    fn gaussian_samples_respect_the_scale_clip(b in boxes(), seed in any::<u64>()) {
        let cfg = GaussianSampleConfig::default();
        let lo = cfg.scale_base.powf(-cfg.max_scale_steps) - 1e-9;
        let hi = cfg.scale_base.powf(cfg.max_scale_steps) + 1e-9;
        for s in gaussian_box_samples(&b, 64, &cfg, &mut rng::stream(seed, &[])) {
            prop_assert!((lo..=hi).contains(&(s.w / b.w)) && (lo..=hi).contains(&(s.h / b.h)));
            prop_assert!(((s.w / b.w) - (s.h / b.h)).abs() < 1e-9);
        }
    }

    #[test]
    fn crops_of_a_constant_frame_are_constant(b in boxes(), side in 2usize..40, c in any::<[u8; 3]>()) {
        let frame = Frame::filled(64, 48, c);
        let inside = BoundingBox::new(b.x.clamp(0.0, 40.0), b.y.clamp(0.0, 30.0), b.w.min(20.0), b.h.min(15.0));
        let patch = crop_resize(&frame, &inside, side);
        prop_assert!(patch.pixels().all(|p| p == c));
    }

    #[test]
    fn merged_labels_come_from_confident_objects(data in prop::collection::vec(prop::collection::vec(0.0f32..1.0, 48), 1..4)) {
        let maps: Vec<ProbabilityMap> = data.into_iter().map(|d| ProbabilityMap::from_data(8, 6, d).unwrap()).collect();
        let per: Vec<(u8, &ProbabilityMap)> = maps.iter().enumerate().map(|(i, m)| (i as u8 + 1, m)).collect();
        let merged = merge_objects(&per, 0.5).unwrap();
        for y in 0..6 {
            for x in 0..8 {
                let best = maps.iter().map(|m| m.get(x, y)).fold(0.0f32, f32::max);
                let label = merged.get(x, y);
                if best < 0.5 {
                    prop_assert_eq!(label, 0);
                } else {
                    prop_assert!(label >= 1 && maps[label as usize - 1].get(x, y) == best);
                }
            }
        }
    }
}
