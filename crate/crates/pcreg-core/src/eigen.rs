//! Symmetric 3x3 eigendecomposition with a deterministic ordering.

use nalgebra::{Matrix3, Vector3};

/// Eigenpairs of a symmetric matrix sorted by ascending eigenvalue.
/// Ties keep the decomposition's own order, so results are reproducible.
pub(crate) fn eigen_ascending(m: &Matrix3<f64>) -> ([f64; 3], [Vector3<f64>; 3]) {
    let eig = m.symmetric_eigen();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .expect("symmetric eigenvalues are finite")
    });
    let values = [
        eig.eigenvalues[order[0]],
        eig.eigenvalues[order[1]],
        eig.eigenvalues[order[2]],
    ];
    let vectors = [
        eig.eigenvectors.column(order[0]).into_owned(),
        eig.eigenvectors.column(order[1]).into_owned(),
        eig.eigenvectors.column(order[2]).into_owned(),
    ];
    (values, vectors)
}
