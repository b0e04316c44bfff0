//! Clip sampling invariants over arbitrary valid specs.

use orbitpcqa_core::rng::Rng;
use orbitpcqa_core::sampling::{sample_eval_clip, sample_training_clip, ClipSpec};
use proptest::prelude::*;

fn valid_spec() -> impl Strategy<Value = ClipSpec> {
    (1usize..12, 1usize..40, 0usize..50).prop_map(|(stride, clip_length, slack)| ClipSpec {
        sequence_length: stride * (clip_length - 1) + 1 + slack,
        stride,
        clip_length,
    })
}

proptest! {
    #[test]
    fn training_clips_fit_and_keep_stride(spec in valid_spec(), seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        for _ in 0..20 {
            let clip = sample_training_clip(&spec, &mut rng).unwrap();
            prop_assert_eq!(clip.len(), spec.clip_length);
            prop_assert!(clip[0] < spec.stride);
            prop_assert!(*clip.last().unwrap() < spec.sequence_length);
            prop_assert!(clip.windows(2).all(|w| w[1] - w[0] == spec.stride));
        }
    }

    #[test]
    fn eval_clip_starts_at_zero(spec in valid_spec()) {
        let clip = sample_eval_clip(&spec).unwrap();
        prop_assert_eq!(clip, (0..spec.clip_length).map(|i| i * spec.stride).collect::<Vec<_>>());
    }

    #[test]
    fn overlong_clips_are_rejected(stride in 1usize..10, clip_length in 2usize..40) {
        let spec = ClipSpec { sequence_length: stride * (clip_length - 1), stride, clip_length };
        prop_assert!(sample_eval_clip(&spec).is_err());
    }
}

#[test]
fn hundred_epochs_of_default_sampling_touch_every_frame() {
    let spec = ClipSpec::default();
    let mut rng = Rng::new(100);
    let mut seen = vec![false; spec.sequence_length];
    for _ in 0..100 {
        for i in sample_training_clip(&spec, &mut rng).unwrap() {
            seen[i] = true;
        }
    }
    assert!(seen.iter().all(|&s| s));
}
