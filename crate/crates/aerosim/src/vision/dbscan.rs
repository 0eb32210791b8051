//! Density-based clustering over sampled pixel features.
//!
//! Semantics pinned for determinism: points are scanned in input order;
//! each unvisited core point seeds a breadth-first expansion; border
//! points belong to the first cluster that reaches them. Noise is -1.

/// Cluster labels for 3-D points; -1 marks noise.
pub fn dbscan_labels(points: &[[f64; 3]], eps: f64, min_pts: usize) -> Vec<i64> {
    assert!(eps > 0.0, "eps must be positive");
    assert!(min_pts >= 1, "min_pts must be at least 1");
    let n = points.len();
    let eps2 = eps * eps;
    let neighbors = |i: usize| -> Vec<usize> {
        (0..n)
            .filter(|&j| {
                let d2: f64 = (0..3).map(|c| (points[i][c] - points[j][c]).powi(2)).sum();
                d2 <= eps2
            })
            .collect()
    };

    let mut labels = vec![-1i64; n];
    let mut visited = vec![false; n];
    let mut cluster = 0i64;
    for i in 0..n {
        if visited[i] {
            continue;
        }
        visited[i] = true;
        let seed_neighbors = neighbors(i);
        if seed_neighbors.len() < min_pts {
            continue; // noise unless later claimed as a border point
        }
        labels[i] = cluster;
        let mut queue: std::collections::VecDeque<usize> = seed_neighbors.into();
        while let Some(j) = queue.pop_front() {
            if labels[j] == -1 {
                labels[j] = cluster; // border or core of this cluster
            }
            if visited[j] {
                continue;
            }
            visited[j] = true;
            let nn = neighbors(j);
            if nn.len() >= min_pts {
                queue.extend(nn);
            }
        }
        cluster += 1;
    }
    labels
}
