use fragvqa_core::chunking::plan_chunks;
use fragvqa_core::fragmentation::{
    assemble_fragment, fragment_pair, patch_scores, select_top_patches, top_t_count, FragConfig,
};
use fragvqa_core::frame_io::Frame;
use fragvqa_core::metrics::{krcc, plcc, srcc};
use fragvqa_core::RgbBuffer;
use proptest::prelude::*;

fn image(w: usize, h: usize) -> impl Strategy<Value = RgbBuffer> {
    proptest::collection::vec(any::<u8>(), w * h * 3).prop_map(move |d| RgbBuffer::new(w, h, d).unwrap())
}

fn sized_image() -> impl Strategy<Value = RgbBuffer> {
    (1usize..40, 1usize..40).prop_flat_map(|(w, h)| image(w, h))
}

fn distinct(n: usize) -> impl Strategy<Value = Vec<f64>> {
    // Permutations of 0..n, so no ties.
    Just((0..n).map(|i| i as f64).collect::<Vec<_>>()).prop_shuffle()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn selection_is_a_ranked_prefix(img in sized_image(), p in 1usize..9, t in 1usize..60) {
        prop_assume!(p <= img.width() && p <= img.height());
        let grid = patch_scores(&img, p).unwrap();
        let n = grid.scores.len();
        let coords = select_top_patches(&grid, t).unwrap();
        prop_assert_eq!(coords.len(), t);
        let raster = |c: &fragvqa_core::fragmentation::PatchCoord| c.row * grid.cols + c.col;
        let head = &coords[..t.min(n)];
        for w in head.windows(2) {
            let (a, b) = (grid.score_at(w[0]), grid.score_at(w[1]));
            prop_assert!(a > b || (a == b && raster(&w[0]) < raster(&w[1])));
        }
        if t <= n {
            // Nothing left out beats the weakest selected patch.
            let last = *head.last().unwrap();
            for s in &grid.scores {
                if !head.contains(&s.coord) {
                    let ls = grid.score_at(last);
                    prop_assert!(s.score < ls || (s.score == ls && raster(&s.coord) > raster(&last)));
                }
            }
        } else {
            for k in 0..t {
                prop_assert_eq!(coords[k], coords[k % n]);
            }
        }
    }

    #[test]
    fn every_mosaic_pixel_comes_from_its_slot(
        img in sized_image(),
        p in 1usize..9,
        s in 1usize..30,
        seed in any::<u64>(),
    ) {
        prop_assume!(p <= img.width() && p <= img.height());
        let grid = patch_scores(&img, p).unwrap();
        let t = top_t_count(s, p);
        // Arbitrary valid coords rather than the ranked ones.
        let coords: Vec<_> = (0..t)
            .map(|k| grid.scores[(seed as usize).wrapping_add(k * 7919) % grid.scores.len()].coord)
            .collect();
        let out = assemble_fragment(&img, &coords, p, s).unwrap();
        prop_assert_eq!((out.width(), out.height()), (s, s));
        let per_row = s.div_ceil(p);
        for y in 0..s {
            for x in 0..s {
                let c = coords[((y / p) * per_row + x / p) % t];
                prop_assert_eq!(out.pixel(x, y), img.pixel(c.col * p + x % p, c.row * p + y % p));
            }
        }
    }

    #[test]
    fn still_pair_has_black_residual_mosaic(img in image(24, 20), p in 1usize..8, s in 8usize..24) {
        let cfg = FragConfig { patch_size: p, target_size: s, ..FragConfig::default() };
        let prev = Frame::from_image(0, img.clone());
        let cur = Frame::from_image(1, img);
        let t = fragment_pair(&prev, &cur, &cfg).unwrap();
        prop_assert!(t.frag_residual.as_bytes().iter().all(|&v| v == 0));
        prop_assert_eq!(t.coords.len(), top_t_count(s, p));
        prop_assert!(t.scores.iter().all(|&v| v == 0));
        prop_assert_eq!((t.resized_frame.width(), t.frag_frame.width()), (s, s));
    }

    #[test]
    fn chunk_plan_laws(available in 1usize..500, stride in 1usize..70, length in 1usize..70) {
        let plan = plan_chunks(available, stride, length);
        prop_assert_eq!(plan.len(), (available / stride).max(1));
        for (i, c) in plan.iter().enumerate() {
            prop_assert_eq!(c.index, i);
            prop_assert_eq!(c.start, i * stride);
            prop_assert!(c.real >= 1);
            prop_assert_eq!(c.real + c.pad, length);
            prop_assert!(c.start + c.real <= available);
            prop_assert_eq!(c.pad == 0, c.start + length <= available);
        }
    }

    #[test]
    fn rank_metrics_ignore_monotone_maps(pred in distinct(12), truth in distinct(12)) {
        let warped: Vec<f64> = pred.iter().map(|v| (v * 0.3).exp() - 7.0).collect();
        prop_assert!((srcc(&pred, &truth).unwrap() - srcc(&warped, &truth).unwrap()).abs() < 1e-12);
        prop_assert_eq!(krcc(&pred, &truth).unwrap(), krcc(&warped, &truth).unwrap());
        let flipped: Vec<f64> = truth.iter().map(|v| -v).collect();
        prop_assert!((srcc(&pred, &truth).unwrap() + srcc(&pred, &flipped).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn correlations_are_bounded_and_symmetric(
        pairs in proptest::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 3..40),
    ) {
        let a: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let b: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        for f in [srcc, plcc, krcc] {
            let (ab, ba) = (f(&a, &b).unwrap(), f(&b, &a).unwrap());
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&ab));
            prop_assert!((ab - ba).abs() < 1e-12);
        }
    }
}
