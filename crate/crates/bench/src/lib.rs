//! Shared fixtures for the criterion benchmarks.

use formation_rigidity::{
    henneberg::random_construction, AnchorFamily, ConstraintTargets, Dim, Framework, Graph,
};

/// Signed-Henneberg chain of `n` vertices, distance-anchored.
pub fn chain(n: usize) -> Framework {
    random_construction(Dim::Two, AnchorFamily::Distance, n, 7)
}

/// Five-agent triangular bipyramid with unit-3 edges and two signed volumes.
pub fn bipyramid() -> (Framework, ConstraintTargets) {
    let s3 = 3.0_f64.sqrt();
    let s6 = 6.0_f64.sqrt();
    let g = Graph::new(
        5,
        vec![
            (1, 2),
            (1, 3),
            (2, 3),
            (0, 1),
            (0, 2),
            (0, 3),
            (4, 1),
            (4, 2),
            (4, 3),
        ],
        vec![],
        vec![],
        vec![(1, 0, 2, 3), (1, 4, 2, 3)],
    )
    .unwrap();
    let fw = Framework::new(
        g,
        Dim::Three,
        &[
            vec![1.5, s3 / 2.0, s6],
            vec![0.0, 0.0, 0.0],
            vec![3.0, 0.0, 0.0],
            vec![1.5, 1.5 * s3, 0.0],
            vec![1.5, s3 / 2.0, -s6],
        ],
    )
    .unwrap();
    let targets = ConstraintTargets::from_framework(&fw, 10.0).unwrap();
    (fw, targets)
}
