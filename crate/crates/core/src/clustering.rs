//! Density-based grouping of canonical-space points into sequence-consistent
//! part instances.
//!
//! Things points from every frame are shifted by their predicted offsets and
//! clustered jointly, so one clustering pass covers the whole sequence and
//! temporal consistency holds by construction. Neighborhood queries are an
//! exact O(N²) scan, which is plenty at desk scale.

use std::collections::VecDeque;

use nalgebra::Vector3;

use crate::scenegen::SemanticClass;

/// Raw clustering outcome before noise resolution: instance 0 means
/// unassigned, and `noise` flags points no core cluster reached.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    pub instance: Vec<u32>,
    pub noise: Vec<bool>,
}

/// Per-point semantic class and sequence-consistent instance id. Instance 0
/// is reserved for stuff; things ids are dense from 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationResult {
    pub semantic: Vec<SemanticClass>,
    pub instance: Vec<u32>,
    pub frames: usize,
    pub points_per_frame: usize,
}

fn neighbors(points: &[Vector3<f64>], i: usize, eps_sq: f64) -> Vec<usize> {
    let p = points[i];
    points
        .iter()
        .enumerate()
        .filter(|(_, q)| (p - *q).norm_squared() <= eps_sq)
        .map(|(j, _)| j)
        .collect()
}

/// Classic density-reachability clustering. Points are visited in index
/// order and expansion uses a FIFO queue, so border points always join the
/// first core cluster that reaches them. Cluster ids follow discovery order,
/// starting at 1.
pub fn dbscan(points: &[Vector3<f64>], eps: f64, min_pts: usize) -> ClusterAssignment {
    assert!(eps > 0.0 && min_pts >= 1);
    let n = points.len();
    let eps_sq = eps * eps;
    let mut instance = vec![0u32; n];
    let mut noise = vec![false; n];
    let mut visited = vec![false; n];
    let mut next_id = 0u32;

    for i in 0..n {
        if visited[i] {
            continue;
        }
        visited[i] = true;
        let nb = neighbors(points, i, eps_sq);
        if nb.len() < min_pts {
            noise[i] = true;
            continue;
        }
        next_id += 1;
        instance[i] = next_id;
        let mut queue: VecDeque<usize> = nb.into();
        while let Some(j) = queue.pop_front() {
            if instance[j] == 0 {
                instance[j] = next_id;
                noise[j] = false;
            } else if instance[j] != next_id {
                continue;
            }
            if !visited[j] {
                visited[j] = true;
                let nbj = neighbors(points, j, eps_sq);
                if nbj.len() >= min_pts {
                    queue.extend(nbj);
                }
            }
        }
    }
    ClusterAssignment { instance, noise }
}

/// Clusters things points of the whole sequence in canonical space and
/// produces a total point-to-instance map.
///
/// Ids are renumbered by cluster size (largest first, ties to the smallest
/// member index); noise points adopt the nearest cluster centroid. Stuff
/// points always get id 0. If density clustering finds no core cluster at
/// all, every things point falls into one shared instance.
pub fn segment_instances(
    offsets: &[Vector3<f64>],
    positions: &[Vector3<f64>],
    semantics: &[SemanticClass],
    frames: usize,
    points_per_frame: usize,
    eps: f64,
    min_pts: usize,
) -> SegmentationResult {
    let total = frames * points_per_frame;
    assert_eq!(offsets.len(), total);
    assert_eq!(positions.len(), total);
    assert_eq!(semantics.len(), total);

    let things: Vec<usize> = (0..total).filter(|&i| semantics[i].is_things()).collect();
    let shifted: Vec<Vector3<f64>> = things.iter().map(|&i| positions[i] + offsets[i]).collect();

    let mut instance = vec![0u32; total];
    if !things.is_empty() {
        let raw = dbscan(&shifted, eps, min_pts);
        let n_clusters = raw.instance.iter().copied().max().unwrap_or(0) as usize;
        if n_clusters == 0 {
            for &i in &things {
                instance[i] = 1;
            }
        } else {
            // Order clusters by size descending, ties by smallest member.
            let mut size = vec![0usize; n_clusters];
            let mut first_member = vec![usize::MAX; n_clusters];
            for (k, &id) in raw.instance.iter().enumerate() {
                if id > 0 {
                    let c = (id - 1) as usize;
                    size[c] += 1;
                    first_member[c] = first_member[c].min(k);
                }
            }
            let mut order: Vec<usize> = (0..n_clusters).collect();
            order.sort_by_key(|&c| (std::cmp::Reverse(size[c]), first_member[c]));
            let mut new_id = vec![0u32; n_clusters];
            for (rank, &c) in order.iter().enumerate() {
                new_id[c] = rank as u32 + 1;
            }

            let mut centroids = vec![Vector3::zeros(); n_clusters];
            for (k, &id) in raw.instance.iter().enumerate() {
                if id > 0 {
                    centroids[(id - 1) as usize] += shifted[k];
                }
            }
            for c in 0..n_clusters {
                centroids[c] /= size[c] as f64;
            }

            for (k, &i) in things.iter().enumerate() {
                instance[i] = if raw.instance[k] > 0 {
                    new_id[(raw.instance[k] - 1) as usize]
                } else {
                    // Nearest centroid adoption keeps the map total.
                    let mut best = (f64::INFINITY, u32::MAX);
                    for c in 0..n_clusters {
                        let d = (shifted[k] - centroids[c]).norm_squared();
                        if d < best.0 || (d == best.0 && new_id[c] < best.1) {
                            best = (d, new_id[c]);
                        }
                    }
                    best.1
                };
            }
        }
    }

    SegmentationResult {
        semantic: semantics.to_vec(),
        instance,
        frames,
        points_per_frame,
    }
}
