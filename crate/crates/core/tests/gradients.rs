mod common;

use common::checks::{base_gradients, baseline_gradients, mapper_gradients};

#[test]
fn encoder_and_head_gradients_match_finite_differences() {
    for seed in [1, 2, 3] {
        let (enc, head) = mapper_gradients(12, 10, None, seed);
        assert!(enc.passes(), "encoder seed {seed}: {enc:?}");
        assert!(head.passes(), "head seed {seed}: {head:?}");
    }
}

#[test]
fn full_size_mapper_gradients_spot_check() {
    let (enc, head) = mapper_gradients(100, 128, Some(150), 9);
    assert!(enc.passes(), "{enc:?}");
    assert!(head.passes(), "{head:?}");
}

#[test]
fn base_model_gradients_match_finite_differences() {
    for seed in [4, 5] {
        let s = base_gradients(10, &[12, 8], 16, None, seed);
        assert!(s.passes(), "seed {seed}: {s:?}");
    }
    let full = base_gradients(300, &[256, 128], 100, Some(150), 6);
    assert!(full.passes(), "{full:?}");
}

#[test]
fn baseline_gradients_match_finite_differences() {
    let s = baseline_gradients(10, &[12, 8], 7);
    assert!(s.passes(), "{s:?}");
}
