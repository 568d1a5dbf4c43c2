//! Graph Laplacians over the training instances of one modality: k-NN
//! proximity, within-cluster cohesion and between-cluster scatter.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape, Result};

const KMEANS_MAX_ITER: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphKind {
    Knn,
    WithinCluster,
    BetweenCluster,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphLaplacian {
    pub kind: GraphKind,
    pub k: usize,
    pub matrix: DMatrix<f64>,
}

/// Laplacian of the symmetrized k-nearest-neighbour graph over the columns of
/// `x`. Equal distances are broken by the lower index.
pub fn knn_laplacian(x: &DMatrix<f64>, k: usize) -> Result<GraphLaplacian> {
    let n = x.ncols();
    if k == 0 || k >= n {
        return invalid(format!("k-NN graph needs 1 <= k <= N-1, got k={k}, N={n}"));
    }
    let mut adj = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let mut dists: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| ((x.column(i) - x.column(j)).norm_squared(), j))
            .collect();
        dists.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, j) in dists.iter().take(k) {
            adj[(i, j)] = 1.0;
            adj[(j, i)] = 1.0;
        }
    }
    let mut lap = -adj.clone();
    for i in 0..n {
        lap[(i, i)] = adj.row(i).sum();
    }
    Ok(GraphLaplacian {
        kind: GraphKind::Knn,
        k,
        matrix: lap,
    })
}

/// k-means++ seeding followed by Lloyd iterations until the assignment stops
/// changing (at most 100 rounds). Clusters that empty out are reseeded with
/// the point farthest from its centroid.
pub fn kmeans(x: &DMatrix<f64>, k: usize, seed: u64) -> Result<Vec<usize>> {
    let n = x.ncols();
    if k == 0 || k > n {
        return invalid(format!("k-means needs 1 <= k <= N, got k={k}, N={n}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist2 = |a: &DVector<f64>, j: usize| (a - x.column(j)).norm_squared();

    let mut centroids: Vec<DVector<f64>> = vec![x.column(rng.random_range(0..n)).into_owned()];
    let mut nearest: Vec<f64> = (0..n).map(|j| dist2(&centroids[0], j)).collect();
    while centroids.len() < k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut chosen = n - 1;
            for (j, &d) in nearest.iter().enumerate() {
                if target < d {
                    chosen = j;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            // all remaining mass is zero: take the first point not yet a centroid
            (0..n)
                .find(|&j| centroids.iter().all(|c| c != &x.column(j).into_owned()))
                .unwrap_or(0)
        };
        let c = x.column(pick).into_owned();
        for (j, d) in nearest.iter_mut().enumerate() {
            *d = d.min(dist2(&c, j));
        }
        centroids.push(c);
    }

    let mut assignment = vec![usize::MAX; n];
    for _ in 0..KMEANS_MAX_ITER {
        let mut next: Vec<usize> = (0..n)
            .map(|j| {
                let mut best = 0;
                let mut best_d = f64::INFINITY;
                for (c, cen) in centroids.iter().enumerate() {
                    let d = dist2(cen, j);
                    if d < best_d {
                        best_d = d;
                        best = c;
                    }
                }
                best
            })
            .collect();
        reseed_empty(x, &mut next, &centroids, k);
        if next == assignment {
            break;
        }
        assignment = next;
        centroids = (0..k)
            .map(|c| {
                let members: Vec<usize> = (0..n).filter(|&j| assignment[j] == c).collect();
                let mut sum = DVector::zeros(x.nrows());
                for &j in &members {
                    sum += x.column(j);
                }
                sum / members.len() as f64
            })
            .collect();
    }
    Ok(assignment)
}

fn reseed_empty(x: &DMatrix<f64>, assignment: &mut [usize], centroids: &[DVector<f64>], k: usize) {
    let n = assignment.len();
    loop {
        let mut counts = vec![0usize; k];
        for &a in assignment.iter() {
            counts[a] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return;
        };
        // farthest point from its own centroid, among clusters that can spare one
        let mut far = None;
        let mut far_d = -1.0;
        for j in 0..n {
            if counts[assignment[j]] < 2 {
                continue;
            }
            let d = (x.column(j) - &centroids[assignment[j]]).norm_squared();
            if d > far_d {
                far_d = d;
                far = Some(j);
            }
        }
        match far {
            Some(j) => assignment[j] = empty,
            None => return,
        }
    }
}

fn cluster_members(assignment: &[usize]) -> Vec<Vec<usize>> {
    let k = assignment.iter().max().map_or(0, |&m| m + 1);
    let mut members = vec![Vec::new(); k];
    for (i, &c) in assignment.iter().enumerate() {
        members[c].push(i);
    }
    members.retain(|m| !m.is_empty());
    members
}

/// `I - sum_c (1/N_c) 1_c 1_c^T`.
pub fn within_cluster_laplacian(assignment: &[usize], n: usize) -> Result<GraphLaplacian> {
    if assignment.len() != n {
        return shape(format!("assignment has {} entries for N={n}", assignment.len()));
    }
    let members = cluster_members(assignment);
    let mut lap = DMatrix::<f64>::identity(n, n);
    for group in &members {
        let w = 1.0 / group.len() as f64;
        for &i in group {
            for &j in group {
                lap[(i, j)] -= w;
            }
        }
    }
    Ok(GraphLaplacian {
        kind: GraphKind::WithinCluster,
        k: members.len(),
        matrix: lap,
    })
}

/// `sum_c N_c (m_c - g)(m_c - g)^T` with `m_c` the cluster indicator mean and
/// `g` the global mean vector `1/N`.
pub fn between_cluster_laplacian(assignment: &[usize], n: usize) -> Result<GraphLaplacian> {
    if assignment.len() != n {
        return shape(format!("assignment has {} entries for N={n}", assignment.len()));
    }
    let members = cluster_members(assignment);
    let mut lap = DMatrix::<f64>::zeros(n, n);
    for group in &members {
        let nc = group.len() as f64;
        let mut diff = DVector::from_element(n, -1.0 / n as f64);
        for &i in group {
            diff[i] += 1.0 / nc;
        }
        lap += &diff * diff.transpose() * nc;
    }
    Ok(GraphLaplacian {
        kind: GraphKind::BetweenCluster,
        k: members.len(),
        matrix: lap,
    })
}

/// Laplacian for a training run. `k = 0` yields the zero matrix for k-NN and
/// a single cluster for the cluster graphs.
pub fn build_laplacian(kind: GraphKind, x: &DMatrix<f64>, k: usize, seed: u64) -> Result<GraphLaplacian> {
    let n = x.ncols();
    match kind {
        GraphKind::Knn if k == 0 => Ok(GraphLaplacian {
            kind,
            k,
            matrix: DMatrix::zeros(n, n),
        }),
        GraphKind::Knn => knn_laplacian(x, k),
        GraphKind::WithinCluster | GraphKind::BetweenCluster => {
            let assignment = kmeans(x, k.max(1), seed)?;
            let mut lap = if kind == GraphKind::WithinCluster {
                within_cluster_laplacian(&assignment, n)?
            } else {
                between_cluster_laplacian(&assignment, n)?
            };
            lap.k = k;
            Ok(lap)
        }
    }
}
