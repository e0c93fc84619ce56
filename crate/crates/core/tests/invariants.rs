//! Algebraic patterns the scoring functions must reproduce exactly.

mod common;

use common::*;

const SAMPLES: usize = 200;

#[test]
fn distmult_is_symmetric() {
    assert!(distmult_symmetry(SAMPLES, 1) <= 1e-9);
}

#[test]
fn transe_is_translation_invariant() {
    assert!(transe_translation_invariance(SAMPLES, 2) <= 1e-9);
}

#[test]
fn rotate_identity_relation_is_maximal() {
    assert!(rotate_identity_maximum(SAMPLES, 3) <= 1e-9);
}

#[test]
fn rescal_symmetric_matrix_gives_symmetric_scores() {
    assert!(rescal_symmetric_relation(SAMPLES, 4) <= 1e-9);
}
