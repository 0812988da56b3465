//! Property suites for the augmentation arithmetic: allocation exactness,
//! threshold monotonicity, and filter soundness under re-prediction.

use proptest::prelude::*;

use qaug::augment::{
    allocate_counts, class_thresholds, filter_samples, AugmentConfig, Classifier, ErrorProfile,
    THRESHOLD_CEIL, THRESHOLD_FLOOR,
};
use qaug::nn::Tensor;

fn simplex(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, dim).prop_map(|raw| {
        let sum: f64 = raw.iter().sum();
        if sum == 0.0 {
            vec![1.0 / raw.len() as f64; raw.len()]
        } else {
            raw.iter().map(|v| v / sum).collect()
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn allocation_total_is_exact(
        n_gen in 0usize..5000,
        r in (1usize..8).prop_flat_map(simplex),
    ) {
        let counts = allocate_counts(n_gen, &r).unwrap();
        prop_assert_eq!(counts.iter().sum::<usize>(), n_gen);
        prop_assert_eq!(counts.len(), r.len());
        // No class drifts more than one unit from its exact share.
        for (c, share) in counts.iter().zip(&r) {
            let exact = n_gen as f64 * share;
            prop_assert!((*c as f64 - exact).abs() <= 1.0 + 1e-9);
        }
    }
}

proptest! {
    #[test]
    fn threshold_adjustments_are_monotone(
        e in prop::collection::vec(0usize..200, 2..6),
        tau in 0.1f64..0.9,
        alpha in 0.0f64..0.5,
        beta in 0.0f64..0.5,
        bump in 0.01f64..0.3,
    ) {
        prop_assume!(e.iter().sum::<usize>() > 0);
        let profile = ErrorProfile::from_errors(e.clone());
        let base = AugmentConfig { tau, alpha, beta, ..AugmentConfig::default() };
        let taus = class_thresholds(&base, &profile);
        let more_alpha = AugmentConfig { alpha: alpha + bump, ..base };
        let taus_a = class_thresholds(&more_alpha, &profile);
        let more_beta = AugmentConfig { beta: beta + bump, ..base };
        let taus_b = class_thresholds(&more_beta, &profile);
        let uniform = 1.0 / profile.r.len() as f64;
        for (i, &r) in profile.r.iter().enumerate() {
            prop_assert!((THRESHOLD_FLOOR..=THRESHOLD_CEIL).contains(&taus[i]));
            if r > uniform {
                // Raising alpha weakly lowers high-error thresholds.
                prop_assert!(taus_a[i] <= taus[i] + 1e-12);
                prop_assert!(taus_b[i] == taus[i]);
            } else {
                // Raising beta weakly raises low-error thresholds.
                prop_assert!(taus_b[i] >= taus[i] - 1e-12);
                prop_assert!(taus_a[i] == taus[i]);
            }
        }
    }
}

/// Classifier steered entirely by the sample's own pixels.
struct PixelClassifier {
    n_classes: usize,
}

impl Classifier for PixelClassifier {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict_class(&self, image: &Tensor) -> qaug::Result<(usize, f64)> {
        let class = ((image.data()[0] * self.n_classes as f64) as usize).min(self.n_classes - 1);
        Ok((class, image.data()[1]))
    }
}

proptest! {
    #[test]
    fn accepted_samples_survive_re_prediction(
        raw in prop::collection::vec((0usize..4, 0.0f64..1.0), 1..60),
        class_i in 0usize..4,
        tau in 0.05f64..0.95,
    ) {
        let model = PixelClassifier { n_classes: 4 };
        let samples: Vec<Tensor> = raw
            .iter()
            .map(|&(class, conf)| {
                let mut t = Tensor::zeros(vec![2]);
                t.data_mut()[0] = (class as f64 + 0.5) / 4.0;
                t.data_mut()[1] = conf;
                t
            })
            .collect();
        let kept = filter_samples(&model, &samples, class_i, tau).unwrap();
        // Re-prediction must reproduce both acceptance conditions.
        for (image, conf) in &kept {
            let (c2, p2) = model.predict_class(image).unwrap();
            prop_assert_eq!(c2, class_i);
            prop_assert!(p2 >= tau);
            prop_assert_eq!(p2, *conf);
        }
        // Nothing eligible was dropped.
        let eligible = raw
            .iter()
            .filter(|&&(class, conf)| class == class_i && conf >= tau)
            .count();
        prop_assert_eq!(kept.len(), eligible);
    }
}
