//! Classical (Torgerson) multidimensional scaling.

use nalgebra::{DMatrix, SymmetricEigen};

pub const DEFAULT_MDS_CAP: usize = 2000;

/// Indices of at most `cap` items, evenly spaced in rev_id order.
pub fn mds_subsample(rev_ids: &[u64], cap: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..rev_ids.len()).collect();
    order.sort_by_key(|&i| rev_ids[i]);
    let n = order.len();
    if n <= cap {
        return order;
    }
    (0..cap).map(|i| order[i * n / cap]).collect()
}

/// Embed points into `target_dim` dimensions from their Euclidean distances.
pub fn classical_mds(points: &[Vec<f64>], target_dim: usize) -> Vec<Vec<f64>> {
    let n = points.len();
    let d = DMatrix::from_fn(n, n, |i, j| {
        points[i].iter().zip(&points[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    });
    classical_mds_from_distances(&d, target_dim)
}

/// Double-center the squared distances and scale the top eigenvectors.
/// Each axis is oriented so its largest-magnitude coordinate is positive.
pub fn classical_mds_from_distances(distances: &DMatrix<f64>, target_dim: usize) -> Vec<Vec<f64>> {
    let n = distances.nrows();
    if n == 0 {
        return Vec::new();
    }
    let sq = distances.map(|v| v * v);
    let row_means: Vec<f64> = (0..n).map(|i| sq.row(i).sum() / n as f64).collect();
    let total_mean = row_means.iter().sum::<f64>() / n as f64;
    let b = DMatrix::from_fn(n, n, |i, j| -0.5 * (sq[(i, j)] - row_means[i] - row_means[j] + total_mean));
    let eig = SymmetricEigen::new(b);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &c| eig.eigenvalues[c].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&c)));
    let mut coords = vec![vec![0.0; target_dim]; n];
    for (axis, &k) in order.iter().take(target_dim).enumerate() {
        let scale = eig.eigenvalues[k].max(0.0).sqrt();
        let v = eig.eigenvectors.column(k);
        let pivot = (0..n).fold(0, |best, i| if v[i].abs() > v[best].abs() { i } else { best });
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        let mean = v.iter().sum::<f64>() / n as f64;
        for i in 0..n {
            coords[i][axis] = sign * (v[i] - mean) * scale;
        }
    }
    coords
}
