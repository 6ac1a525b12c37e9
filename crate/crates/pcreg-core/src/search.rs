//! k-d tree for exact nearest-neighbor and radius queries.
//!
//! Queries are exact: results are identical to a brute-force scan, including
//! ordering. Entries sort by distance, then by point index; a far subtree is
//! pruned only when the splitting plane is strictly farther than the current
//! bound, so boundary ties never change the outcome.

use alloc::collections::BinaryHeap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::Point3;
#[allow(unused_imports)]
use num_traits::Float;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};

const LEAF_SIZE: usize = 16;

/// Neighbor indices into the indexed cloud with their Euclidean distances,
/// sorted by `(distance, index)` ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborQueryResult {
    pub indices: Vec<usize>,
    pub distances: Vec<f64>,
}

impl NeighborQueryResult {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

#[inline]
pub(crate) fn euclidean(p: &Point3<f64>, q: &Point3<f64>) -> f64 {
    let dx = p.x - q.x;
    let dy = p.y - q.y;
    let dz = p.z - q.z;
    (dx * dx + dy * dy + dz * dz).sqrt()
}

enum Node {
    Leaf {
        start: u32,
        end: u32,
    },
    Split {
        axis: usize,
        value: f64,
        left: u32,
        right: u32,
    },
}

/// Spatial index over a snapshot of a cloud's points.
pub struct SpatialIndex {
    points: Vec<Point3<f64>>,
    /// Permutation of point indices; leaves own contiguous ranges.
    order: Vec<u32>,
    nodes: Vec<Node>,
    root: u32,
}

/// Max-heap entry; `Ord` is `(distance, index)` so the heap root is the
/// current worst candidate. Distances are always finite here.
#[derive(PartialEq)]
struct Candidate {
    distance: f64,
    index: u32,
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<core::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> core::cmp::Ordering {
        self.distance
            .partial_cmp(&other.distance)
            .expect("distances are finite")
            .then(self.index.cmp(&other.index))
    }
}

impl SpatialIndex {
    /// Builds an index over the cloud's points. Errors on an empty cloud.
    pub fn build(cloud: &PointCloud) -> Result<Self> {
        if cloud.is_empty() {
            return Err(Error::InvalidInput(String::from(
                "cannot index an empty point cloud",
            )));
        }
        let points = cloud.points().to_vec();
        let mut order: Vec<u32> = (0..points.len() as u32).collect();
        let mut nodes = Vec::new();
        let n = points.len();
        let root = build_node(&points, &mut order, 0, n, &mut nodes);
        Ok(Self {
            points,
            order,
            nodes,
            root,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// The `k` nearest neighbors of `query` (fewer when the cloud is smaller
    /// than `k`), sorted by `(distance, index)`.
    pub fn knn(&self, query: &Point3<f64>, k: usize) -> Result<NeighborQueryResult> {
        if k == 0 {
            return Err(Error::InvalidInput(String::from(
                "neighbor count must be at least 1",
            )));
        }
        check_query(query)?;
        let k = k.min(self.points.len());
        let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);
        self.knn_node(self.root, query, k, &mut heap);
        let sorted = heap.into_sorted_vec();
        Ok(NeighborQueryResult {
            indices: sorted.iter().map(|c| c.index as usize).collect(),
            distances: sorted.iter().map(|c| c.distance).collect(),
        })
    }

    fn knn_node(&self, node: u32, query: &Point3<f64>, k: usize, heap: &mut BinaryHeap<Candidate>) {
        match self.nodes[node as usize] {
            Node::Leaf { start, end } => {
                for &index in &self.order[start as usize..end as usize] {
                    let distance = euclidean(&self.points[index as usize], query);
                    let candidate = Candidate { distance, index };
                    if heap.len() < k {
                        heap.push(candidate);
                    } else if candidate < *heap.peek().expect("heap is non-empty") {
                        heap.pop();
                        heap.push(candidate);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let delta = query.coords[axis] - value;
                let (near, far) = if delta <= 0.0 { (left, right) } else { (right, left) };
                self.knn_node(near, query, k, heap);
                // Every far-side point is at least |delta| away along this
                // axis, so skipping is only safe when that alone exceeds the
                // current worst distance.
                let prune = heap.len() == k
                    && delta.abs() > heap.peek().expect("heap is non-empty").distance;
                if !prune {
                    self.knn_node(far, query, k, heap);
                }
            }
        }
    }

    /// All points within `radius` of `query` (inclusive), sorted by
    /// `(distance, index)`.
    pub fn radius(&self, query: &Point3<f64>, radius: f64) -> Result<NeighborQueryResult> {
        if !radius.is_finite() || radius < 0.0 {
            return Err(Error::InvalidInput(format!(
                "search radius must be finite and non-negative, got {radius}"
            )));
        }
        check_query(query)?;
        let mut found: Vec<Candidate> = Vec::new();
        self.radius_node(self.root, query, radius, &mut found);
        found.sort_unstable();
        Ok(NeighborQueryResult {
            indices: found.iter().map(|c| c.index as usize).collect(),
            distances: found.iter().map(|c| c.distance).collect(),
        })
    }

    fn radius_node(&self, node: u32, query: &Point3<f64>, radius: f64, out: &mut Vec<Candidate>) {
        match self.nodes[node as usize] {
            Node::Leaf { start, end } => {
                for &index in &self.order[start as usize..end as usize] {
                    let distance = euclidean(&self.points[index as usize], query);
                    if distance <= radius {
                        out.push(Candidate { distance, index });
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let delta = query.coords[axis] - value;
                if delta <= radius {
                    self.radius_node(left, query, radius, out);
                }
                if -delta <= radius {
                    self.radius_node(right, query, radius, out);
                }
            }
        }
    }
}

fn check_query(query: &Point3<f64>) -> Result<()> {
    if !query.coords.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidInput(String::from(
            "query point has a non-finite coordinate",
        )));
    }
    Ok(())
}

fn build_node(
    points: &[Point3<f64>],
    order: &mut [u32],
    offset: usize,
    len: usize,
    nodes: &mut Vec<Node>,
) -> u32 {
    let slice = &mut order[offset..offset + len];
    if len <= LEAF_SIZE {
        nodes.push(Node::Leaf {
            start: offset as u32,
            end: (offset + len) as u32,
        });
        return (nodes.len() - 1) as u32;
    }

    // Split the widest extent; ties fall to the lower axis index.
    let mut lo = points[slice[0] as usize].coords;
    let mut hi = lo;
    for &i in slice.iter().skip(1) {
        let c = points[i as usize].coords;
        for a in 0..3 {
            lo[a] = lo[a].min(c[a]);
            hi[a] = hi[a].max(c[a]);
        }
    }
    let mut axis = 0;
    for a in 1..3 {
        if hi[a] - lo[a] > hi[axis] - lo[axis] {
            axis = a;
        }
    }

    let mid = len / 2;
    slice.select_nth_unstable_by(mid, |&a, &b| {
        points[a as usize].coords[axis]
            .partial_cmp(&points[b as usize].coords[axis])
            .expect("coordinates are finite")
            .then(a.cmp(&b))
    });
    let value = points[slice[mid] as usize].coords[axis];

    let left = build_node(points, order, offset, mid, nodes);
    let right = build_node(points, order, offset + mid, len - mid, nodes);
    nodes.push(Node::Split {
        axis,
        value,
        left,
        right,
    });
    (nodes.len() - 1) as u32
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    /// Reference implementation: full scan, sorted by `(distance, index)`.
    fn brute_force(points: &[Point3<f64>], query: &Point3<f64>) -> Vec<(usize, f64)> {
        let mut all: Vec<(usize, f64)> = points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let dx = p.x - query.x;
                let dy = p.y - query.y;
                let dz = p.z - query.z;
                (i, (dx * dx + dy * dy + dz * dz).sqrt())
            })
            .collect();
        all.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
        all
    }

    fn brute_knn(points: &[Point3<f64>], query: &Point3<f64>, k: usize) -> Vec<(usize, f64)> {
        let mut all = brute_force(points, query);
        all.truncate(k);
        all
    }

    fn brute_radius(points: &[Point3<f64>], query: &Point3<f64>, r: f64) -> Vec<(usize, f64)> {
        brute_force(points, query)
            .into_iter()
            .filter(|&(_, d)| d <= r)
            .collect()
    }

    fn assert_same(result: &NeighborQueryResult, expect: &[(usize, f64)]) {
        let got: Vec<(usize, f64)> = result
            .indices
            .iter()
            .copied()
            .zip(result.distances.iter().copied())
            .collect();
        assert_eq!(got, expect);
    }

    fn cloud_from(points: Vec<Point3<f64>>) -> PointCloud {
        PointCloud::new(points).unwrap()
    }

    #[test]
    fn empty_cloud_cannot_be_indexed() {
        let cloud = cloud_from(vec![]);
        assert!(SpatialIndex::build(&cloud).is_err());
    }

    #[test]
    fn zero_k_is_rejected() {
        let cloud = cloud_from(vec![Point3::origin()]);
        let index = SpatialIndex::build(&cloud).unwrap();
        assert!(index.knn(&Point3::origin(), 0).is_err());
        assert!(index.radius(&Point3::origin(), -0.5).is_err());
    }

    #[test]
    fn knn_larger_than_cloud_returns_everything() {
        let pts = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 2.0, 0.0),
        ];
        let index = SpatialIndex::build(&cloud_from(pts.clone())).unwrap();
        let r = index.knn(&Point3::origin(), 10).unwrap();
        assert_same(&r, &brute_knn(&pts, &Point3::origin(), 10));
        assert_eq!(r.len(), 3);
    }

    #[test]
    fn equidistant_neighbors_sort_by_index() {
        // Four points on a unit circle around the query, plus the query
        // itself at index 4.
        let pts = vec![
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(-1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(0.0, -1.0, 0.0),
            Point3::origin(),
        ];
        let index = SpatialIndex::build(&cloud_from(pts)).unwrap();
        let r = index.knn(&Point3::origin(), 3).unwrap();
        assert_eq!(r.indices, vec![4, 0, 1]);
        assert_eq!(r.distances, vec![0.0, 1.0, 1.0]);

        let all = index.radius(&Point3::origin(), 1.0).unwrap();
        assert_eq!(all.indices, vec![4, 0, 1, 2, 3]);
    }

    #[test]
    fn duplicate_points_are_all_reported() {
        let pts = vec![
            Point3::new(0.5, 0.5, 0.5),
            Point3::new(0.5, 0.5, 0.5),
            Point3::new(0.5, 0.5, 0.5),
            Point3::new(2.0, 0.0, 0.0),
        ];
        let index = SpatialIndex::build(&cloud_from(pts)).unwrap();
        let r = index.radius(&Point3::new(0.5, 0.5, 0.5), 0.0).unwrap();
        assert_eq!(r.indices, vec![0, 1, 2]);
        assert_eq!(r.distances, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn radius_boundary_is_inclusive() {
        let pts = vec![Point3::new(3.0, 4.0, 0.0), Point3::new(3.0, 4.1, 0.0)];
        let index = SpatialIndex::build(&cloud_from(pts)).unwrap();
        let r = index.radius(&Point3::origin(), 5.0).unwrap();
        assert_eq!(r.indices, vec![0]);
        assert_eq!(r.distances, vec![5.0]);
    }

    #[test]
    fn deep_tree_stays_exact() {
        // Enough points to force several split levels, on a lattice so that
        // identical coordinates land on both sides of split planes.
        let mut pts = Vec::new();
        for i in 0..11 {
            for j in 0..11 {
                for k in 0..4 {
                    pts.push(Point3::new(i as f64 * 0.5, j as f64 * 0.5, k as f64 * 0.5));
                }
            }
        }
        let index = SpatialIndex::build(&cloud_from(pts.clone())).unwrap();
        for (qi, q) in pts.iter().enumerate().step_by(37) {
            for k in [1, 2, 7, 40] {
                assert_same(&index.knn(q, k).unwrap(), &brute_knn(&pts, q, k));
            }
            for r in [0.0, 0.5, 0.75, 2.0] {
                assert_same(&index.radius(q, r).unwrap(), &brute_radius(&pts, q, r));
            }
            let _ = qi;
        }
        let off = Point3::new(0.26, 1.74, -0.3);
        assert_same(&index.knn(&off, 12).unwrap(), &brute_knn(&pts, &off, 12));
        assert_same(
            &index.radius(&off, 1.3).unwrap(),
            &brute_radius(&pts, &off, 1.3),
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(96))]

        #[test]
        fn knn_matches_brute_force(
            coords in prop::collection::vec((-6i32..6, -6i32..6, -6i32..6), 1..80),
            query in (-7i32..7, -7i32..7, -7i32..7),
            k in 1usize..12,
        ) {
            // Lattice coordinates provoke distance ties; correctness demands
            // the same tie handling as the reference scan.
            let pts: Vec<Point3<f64>> = coords
                .iter()
                .map(|&(x, y, z)| Point3::new(x as f64 * 0.37, y as f64 * 0.37, z as f64 * 0.37))
                .collect();
            let q = Point3::new(query.0 as f64 * 0.37, query.1 as f64 * 0.37, query.2 as f64 * 0.37);
            let index = SpatialIndex::build(&cloud_from(pts.clone())).unwrap();
            let got = index.knn(&q, k).unwrap();
            assert_same(&got, &brute_knn(&pts, &q, k));
        }

        #[test]
        fn radius_matches_brute_force(
            coords in prop::collection::vec((-6i32..6, -6i32..6, -6i32..6), 1..80),
            query in (-7i32..7, -7i32..7, -7i32..7),
            r_steps in 0u32..16,
        ) {
            let pts: Vec<Point3<f64>> = coords
                .iter()
                .map(|&(x, y, z)| Point3::new(x as f64 * 0.37, y as f64 * 0.37, z as f64 * 0.37))
                .collect();
            let q = Point3::new(query.0 as f64 * 0.37, query.1 as f64 * 0.37, query.2 as f64 * 0.37);
            let r = r_steps as f64 * 0.37;
            let index = SpatialIndex::build(&cloud_from(pts.clone())).unwrap();
            let got = index.radius(&q, r).unwrap();
            assert_same(&got, &brute_radius(&pts, &q, r));
        }
    }
}
