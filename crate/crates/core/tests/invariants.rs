use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use pixgan::constraint::{
    apply_mask, constraint_count, decode_conditioning, encode_for_generator, sample_constraint_map, ConstraintMap,
};
use pixgan::data::{parse_pixcon, to_pixcon};
use pixgan::experiment::{median, ExperimentConfig};
use pixgan::image::ImageTensor;
use pixgan::metrics::{chi2_distance, hog_descriptor, lbp_descriptor, Split};
use pixgan::model::{pac_stack, pac_unstack};
use pixgan::objectives::{discriminator_loss, reconstruction_loss};
use pixgan::tensor::Tensor;
use pixgan::train::{select_best_epoch, EpochRecord, MetricsHistory, TrainConfig};

fn image(h: usize, w: usize, c: usize, seed: u64) -> ImageTensor<f64> {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ImageTensor::new(h, w, c, (0..h * w * c).map(|_| rng.random_range(-1.0..=1.0)).collect()).unwrap()
}

fn shape() -> impl Strategy<Value = (usize, usize, usize)> {
    (4usize..24, 4usize..24, prop_oneof![Just(1usize), Just(3usize)])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sampled_maps_agree_with_their_source((h, w, c) in shape(), density in 0.001f64..0.05, seed in any::<u64>()) {
        let img = image(h, w, c, seed);
        let map = sample_constraint_map(&img, density, &mut ChaCha8Rng::seed_from_u64(seed ^ 1)).unwrap();
        prop_assert_eq!(map.count(), constraint_count(h, w, density));
        prop_assert!(map.count() >= 1);
        prop_assert_eq!(reconstruction_loss(&map, &img).unwrap(), 0.0);
        prop_assert_eq!(apply_mask(&map, &img).unwrap(), map.dense());
    }

    #[test]
    fn reconstruction_loss_is_nonnegative((h, w, c) in shape(), seed in any::<u64>()) {
        let a = image(h, w, c, seed);
        let b = image(h, w, c, seed.wrapping_add(7));
        let map = sample_constraint_map(&a, 0.05, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert!(reconstruction_loss(&map, &b).unwrap() >= 0.0);
    }

    #[test]
    fn generator_encoding_round_trips((h, w, c) in shape(), seed in any::<u64>()) {
        let img = image(h, w, c, seed);
        let map = sample_constraint_map(&img, 0.04, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(decode_conditioning(&encode_for_generator(&map)).unwrap(), map);
    }

    #[test]
    fn pixcon_round_trips((h, w, c) in shape(), seed in any::<u64>()) {
        let img = image(h, w, c, seed);
        let map = sample_constraint_map(&img, 0.04, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let text = to_pixcon(&map);
        let back: ConstraintMap<f64> = parse_pixcon(&text, "prop").unwrap();
        prop_assert_eq!(back.mask(), map.mask());
        for (a, b) in back.values().iter().zip(map.values()) {
            prop_assert!((a - b).abs() <= 5e-7);
        }
        prop_assert_eq!(to_pixcon(&back), text);
    }

    #[test]
    fn pac_stack_inverts(c in 1usize..4, n in 1usize..4, seed in any::<u64>()) {
        let a = Tensor::from_vec([c, n, 3, 2], image(3 * c, 2 * n, 1, seed).data().to_vec()).unwrap();
        let b = a.map(|v| -v * 0.5);
        let packed = pac_stack(&a, &b).unwrap();
        prop_assert_eq!(packed.channels(), 2 * c);
        prop_assert_eq!(pac_unstack(&packed).unwrap(), (a, b));
    }

    #[test]
    fn discriminator_loss_is_nonnegative(real in prop::collection::vec(0.0f64..=1.0, 1..16),
                                         fake in prop::collection::vec(0.0f64..=1.0, 1..16)) {
        let l = discriminator_loss(&real, &fake).unwrap();
        prop_assert!(l.is_finite() && l >= 0.0);
    }

    #[test]
    fn chi2_is_a_symmetric_premetric(s1 in any::<u64>(), s2 in any::<u64>()) {
        let (a, b) = (image(12, 12, 1, s1), image(12, 12, 1, s2));
        for (x, y) in [
            (lbp_descriptor(&a, 1).unwrap(), lbp_descriptor(&b, 1).unwrap()),
            (hog_descriptor(&a, 4, 9).unwrap(), hog_descriptor(&b, 4, 9).unwrap()),
        ] {
            prop_assert!((x.values.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            let d = chi2_distance(&x, &y).unwrap();
            prop_assert!(d >= 0.0);
            prop_assert!((d - chi2_distance(&y, &x).unwrap()).abs() < 1e-12);
            prop_assert_eq!(chi2_distance(&x, &x).unwrap(), 0.0);
        }
    }

    #[test]
    fn selection_ignores_affine_fid_rescaling(fids in prop::collection::vec(0.0f64..100.0, 1..12),
                                              scale in 0.01f64..100.0, shift in -50.0f64..50.0,
                                              mse_seed in any::<u64>()) {
        let mses: Vec<f64> = image(1, fids.len(), 1, mse_seed).data().iter().map(|v| v.abs()).collect();
        let build = |f: &dyn Fn(f64) -> f64| {
            let mut h = MetricsHistory::new(Split::Validation, "prop");
            for (i, (&fd, &m)) in fids.iter().zip(&mses).enumerate() {
                h.push(EpochRecord::new(i + 1, f(fd), m)).unwrap();
            }
            h
        };
        let base = select_best_epoch(&build(&|f| f)).unwrap();
        prop_assert_eq!(base, select_best_epoch(&build(&|f| scale * f + shift)).unwrap());
    }

    #[test]
    fn median_ignores_order(mut v in prop::collection::vec(-1e3f64..1e3, 1..20), seed in any::<u64>()) {
        let m = median(&v);
        use rand::seq::SliceRandom;
        v.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(m, median(&v));
    }

    #[test]
    fn config_text_round_trips(lambda in 0.0f64..100.0, m in 1usize..256, seed in any::<u64>(), pac in 1usize..=2) {
        let mut cfg = ExperimentConfig::default();
        cfg.train = TrainConfig { lambda, batch_size: m, seed, pac, ..Default::default() };
        cfg.lambdas = vec![0.0, lambda];
        prop_assert_eq!(ExperimentConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }
}
