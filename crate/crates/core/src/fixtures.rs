//! Reference parameter sets shared by the test-suite, the acceptance
//! gate, and documentation examples.

use crate::mass::{canonicalize_bivariate, validate_mass, FragmentationParams};

/// All three erosion mechanisms plus one non-binary atom of each
/// dislocation measure.
pub fn mixed() -> FragmentationParams {
    FragmentationParams::new(
        0.5,
        0.3,
        0.2,
        vec![(1.0, validate_mass(&[0.5, 0.3]).unwrap())],
        vec![(
            1.0,
            canonicalize_bivariate(vec![0.5], vec![vec![0.5]], 0.5, vec![0.5]).unwrap(),
        )],
    )
    .unwrap()
}

/// Erosion plus one atom of each binary dislocation shape: an outer split,
/// an inner split that stays put, a wholesale departure that may split, and
/// a mother/new straddle.
pub fn binary() -> FragmentationParams {
    FragmentationParams::new(
        0.5,
        0.3,
        0.2,
        vec![(1.0, validate_mass(&[0.5, 0.5]).unwrap())],
        vec![
            (
                1.0,
                canonicalize_bivariate(vec![0.7, 0.3], vec![], 1.0, vec![]).unwrap(),
            ),
            (
                1.0,
                canonicalize_bivariate(vec![], vec![vec![0.6, 0.4]], 0.0, vec![1.0]).unwrap(),
            ),
            (
                1.0,
                canonicalize_bivariate(vec![0.4], vec![vec![0.6]], 0.4, vec![0.6]).unwrap(),
            ),
        ],
    )
    .unwrap()
}
