//! Point-bucket octree over a cubic root region.
//!
//! A node keeps splitting into eight octants while it holds more points
//! than `split_threshold` and sits above `max_depth`. Leaves keep the
//! points that fell into them, so a coarse leaf can still report which
//! resolution-sized voxels are actually hit.
//!
//! Boxes are half-open `[lo, hi)` on every axis, except that the maximal
//! faces of the root are closed. Child `i` takes the upper half of the x,
//! y and z axes when bit 0, 1 and 2 of `i` are set, respectively.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use thiserror::Error;

use crate::pointcloud::{bounding_box, Aabb, PcdError, Point3, PointCloud};

/// Largest supported depth; keeps per-axis voxel indices well inside `u64`.
pub const MAX_SUPPORTED_DEPTH: u32 = 20;

#[derive(Debug, Error, PartialEq)]
pub enum OctreeError {
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("cloud extent {extent} exceeds root cube edge {edge}")]
    CloudExceedsRootCube { extent: f64, edge: f64 },
    #[error("invalid octree config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OctreeConfig {
    pub resolution: f64,
    pub max_depth: u32,
    pub split_threshold: usize,
}

impl Default for OctreeConfig {
    fn default() -> Self {
        OctreeConfig {
            resolution: 1.0,
            max_depth: 8,
            split_threshold: 1,
        }
    }
}

impl OctreeConfig {
    pub fn new(
        resolution: f64,
        max_depth: u32,
        split_threshold: usize,
    ) -> Result<Self, OctreeError> {
        let cfg = OctreeConfig {
            resolution,
            max_depth,
            split_threshold,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), OctreeError> {
        if !(self.resolution.is_finite() && self.resolution > 0.0) {
            return Err(OctreeError::InvalidConfig(format!(
                "resolution must be a positive number, got {}",
                self.resolution
            )));
        }
        if !(1..=MAX_SUPPORTED_DEPTH).contains(&self.max_depth) {
            return Err(OctreeError::InvalidConfig(format!(
                "max_depth must be in 1..={MAX_SUPPORTED_DEPTH}, got {}",
                self.max_depth
            )));
        }
        if self.split_threshold == 0 {
            return Err(OctreeError::InvalidConfig(
                "split_threshold must be >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Edge of the root cube: `resolution * 2^max_depth`.
    pub fn root_edge(&self) -> f64 {
        self.resolution * (1u64 << self.max_depth) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VoxelState {
    Occupied,
    Free,
    Outside,
}

#[derive(Debug, Clone)]
enum NodeKind {
    Internal([usize; 8]),
    Leaf(Vec<Point3>),
}

#[derive(Debug, Clone)]
struct Node {
    lo: [f64; 3],
    hi: [f64; 3],
    depth: u32,
    kind: NodeKind,
}

impl Node {
    fn mid(&self) -> [f64; 3] {
        std::array::from_fn(|i| self.lo[i] + 0.5 * (self.hi[i] - self.lo[i]))
    }

    fn aabb(&self) -> Aabb {
        Aabb {
            min: Point3::new(self.lo[0], self.lo[1], self.lo[2]),
            max: Point3::new(self.hi[0], self.hi[1], self.hi[2]),
        }
    }
}

/// Read-only view of one leaf.
#[derive(Debug, Clone, Copy)]
pub struct LeafView<'a> {
    pub bounds: Aabb,
    pub depth: u32,
    pub points: &'a [Point3],
}

impl LeafView<'_> {
    pub fn count(&self) -> usize {
        self.points.len()
    }

    pub fn is_occupied(&self) -> bool {
        !self.points.is_empty()
    }

    pub fn edge(&self) -> f64 {
        self.bounds.max.x - self.bounds.min.x
    }
}

#[derive(Debug, Clone)]
pub struct OctoMap {
    config: OctreeConfig,
    nodes: Vec<Node>,
    n_points: usize,
}

fn octant(p: &Point3, mid: &[f64; 3]) -> usize {
    (0..3).fold(0, |acc, i| acc | (usize::from(p.axis(i) >= mid[i]) << i))
}

/// Picks the root corner: the cube is centred on the bounding box and then
/// snapped down to a multiple of the resolution, nudged up one cell if the
/// snap pushed the cloud's max corner out.
fn root_lo(bb: &Aabb, cfg: &OctreeConfig) -> Result<[f64; 3], OctreeError> {
    let edge = cfg.root_edge();
    let res = cfg.resolution;
    let mut lo = [0.0; 3];
    for (i, slot) in lo.iter_mut().enumerate() {
        let (min, max) = (bb.min.axis(i), bb.max.axis(i));
        let extent = max - min;
        let centre = 0.5 * (min + max);
        let snapped = ((centre - 0.5 * edge) / res).floor() * res;
        *slot = [snapped, snapped + res]
            .into_iter()
            .find(|&l| l <= min && max <= l + edge)
            .ok_or(OctreeError::CloudExceedsRootCube { extent, edge })?;
    }
    Ok(lo)
}

pub fn build_octree(cloud: &PointCloud, cfg: &OctreeConfig) -> Result<OctoMap, OctreeError> {
    cfg.validate()?;
    let bb = bounding_box(cloud).map_err(|e| match e {
        PcdError::EmptyCloud => OctreeError::EmptyCloud,
        other => OctreeError::InvalidConfig(other.to_string()),
    })?;
    let lo = root_lo(&bb, cfg)?;
    let edge = cfg.root_edge();
    let hi = [lo[0] + edge, lo[1] + edge, lo[2] + edge];

    let mut map = OctoMap {
        config: *cfg,
        nodes: Vec::new(),
        n_points: cloud.len(),
    };
    map.nodes.push(Node {
        lo,
        hi,
        depth: 0,
        kind: NodeKind::Leaf(Vec::new()),
    });
    map.subdivide(0, cloud.points.clone());
    Ok(map)
}

impl OctoMap {
    fn subdivide(&mut self, idx: usize, points: Vec<Point3>) {
        let depth = self.nodes[idx].depth;
        if points.len() <= self.config.split_threshold || depth >= self.config.max_depth {
            self.nodes[idx].kind = NodeKind::Leaf(points);
            return;
        }
        let (lo, hi, mid) = {
            let n = &self.nodes[idx];
            (n.lo, n.hi, n.mid())
        };
        let mut buckets: [Vec<Point3>; 8] = Default::default();
        for p in points {
            buckets[octant(&p, &mid)].push(p);
        }
        let first = self.nodes.len();
        for child in 0..8 {
            let mut clo = lo;
            let mut chi = mid;
            for axis in 0..3 {
                if child >> axis & 1 == 1 {
                    clo[axis] = mid[axis];
                    chi[axis] = hi[axis];
                }
            }
            self.nodes.push(Node {
                lo: clo,
                hi: chi,
                depth: depth + 1,
                kind: NodeKind::Leaf(Vec::new()),
            });
        }
        self.nodes[idx].kind = NodeKind::Internal(std::array::from_fn(|c| first + c));
        for (child, bucket) in buckets.into_iter().enumerate() {
            self.subdivide(first + child, bucket);
        }
    }

    pub fn config(&self) -> &OctreeConfig {
        &self.config
    }

    pub fn root_bounds(&self) -> Aabb {
        self.nodes[0].aabb()
    }

    pub fn point_count(&self) -> usize {
        self.n_points
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Every leaf, occupied or free, in depth-first child order.
    pub fn leaves(&self) -> Vec<LeafView<'_>> {
        let mut out = Vec::new();
        let mut stack = vec![0usize];
        while let Some(idx) = stack.pop() {
            let node = &self.nodes[idx];
            match &node.kind {
                NodeKind::Internal(children) => stack.extend(children.iter().rev()),
                NodeKind::Leaf(points) => out.push(LeafView {
                    bounds: node.aabb(),
                    depth: node.depth,
                    points,
                }),
            }
        }
        out
    }

    /// Leaves holding at least one point, in depth-first child order.
    pub fn occupied_leaves(&self) -> Vec<LeafView<'_>> {
        self.leaves()
            .into_iter()
            .filter(LeafView::is_occupied)
            .collect()
    }

    pub fn query_voxel(&self, p: &Point3) -> VoxelState {
        if !self.root_bounds().contains(p) {
            return VoxelState::Outside;
        }
        let mut idx = 0;
        loop {
            let node = &self.nodes[idx];
            match &node.kind {
                NodeKind::Internal(children) => idx = children[octant(p, &node.mid())],
                NodeKind::Leaf(points) if points.is_empty() => return VoxelState::Free,
                NodeKind::Leaf(_) => return VoxelState::Occupied,
            }
        }
    }

    /// Resolution-sized voxels (integer indices from the root corner) that
    /// contain at least one point. Points in coarse leaves are refined by
    /// continuing the octant descent down to `max_depth`.
    pub fn occupied_voxels(&self) -> BTreeSet<[u64; 3]> {
        let max_depth = self.config.max_depth;
        let mut out = BTreeSet::new();
        for leaf in self.occupied_leaves() {
            let edge = self.config.root_edge() / (1u64 << leaf.depth) as f64;
            let base: [u64; 3] = std::array::from_fn(|i| {
                ((leaf.bounds.min.axis(i) - self.nodes[0].lo[i]) / edge).round() as u64
            });
            for p in leaf.points {
                let mut key = base;
                let mut lo = [leaf.bounds.min.x, leaf.bounds.min.y, leaf.bounds.min.z];
                let mut hi = [leaf.bounds.max.x, leaf.bounds.max.y, leaf.bounds.max.z];
                for _ in leaf.depth..max_depth {
                    for axis in 0..3 {
                        let mid = lo[axis] + 0.5 * (hi[axis] - lo[axis]);
                        key[axis] <<= 1;
                        if p.axis(axis) >= mid {
                            key[axis] |= 1;
                            lo[axis] = mid;
                        } else {
                            hi[axis] = mid;
                        }
                    }
                }
                out.insert(key);
            }
        }
        out
    }

    /// One line per occupied leaf: `lo_x lo_y lo_z edge depth`.
    pub fn dump_occupied(&self) -> String {
        let mut s = String::new();
        for leaf in self.occupied_leaves() {
            let b = leaf.bounds.min;
            let _ = writeln!(s, "{} {} {} {} {}", b.x, b.y, b.z, leaf.edge(), leaf.depth);
        }
        s
    }

    #[cfg(test)]
    fn check_partition(&self) -> bool {
        self.nodes.iter().all(|n| match &n.kind {
            NodeKind::Leaf(_) => true,
            NodeKind::Internal(ch) => {
                let mid = n.mid();
                ch.iter().enumerate().all(|(c, &ci)| {
                    let child = &self.nodes[ci];
                    (0..3).all(|a| {
                        let upper = c >> a & 1 == 1;
                        let (elo, ehi) = if upper {
                            (mid[a], n.hi[a])
                        } else {
                            (n.lo[a], mid[a])
                        };
                        child.lo[a] == elo && child.hi[a] == ehi
                    })
                })
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud(pts: &[(f64, f64, f64)]) -> PointCloud {
        PointCloud::new(pts.iter().map(|&(x, y, z)| Point3::new(x, y, z)).collect())
    }

    #[test]
    fn single_point_stays_at_root() {
        let cfg = OctreeConfig::new(1.0, 4, 1).unwrap();
        let map = build_octree(&cloud(&[(3.2, 1.1, 0.5)]), &cfg).unwrap();
        let occ = map.occupied_leaves();
        assert_eq!(occ.len(), 1);
        assert_eq!(occ[0].depth, 0);
        assert_eq!(map.node_count(), 1);
        assert_eq!(occ[0].edge(), 16.0);
    }

    #[test]
    fn two_points_same_octant_split_to_max_depth() {
        // Root edge 4 at depth 0. Both points sit in one depth-2 voxel, so the
        // root splits (2 > 1), the depth-1 octant splits again and stops at
        // depth 2 = max_depth holding both points.
        let cfg = OctreeConfig::new(1.0, 2, 1).unwrap();
        let map = build_octree(&cloud(&[(0.2, 0.2, 0.2), (0.3, 0.3, 0.3)]), &cfg).unwrap();
        let occ = map.occupied_leaves();
        assert_eq!(occ.len(), 1);
        assert_eq!(occ[0].depth, 2);
        assert_eq!(occ[0].count(), 2);
        assert_eq!(map.node_count(), 1 + 8 + 8);
        assert!(map.check_partition());
    }

    #[test]
    fn rejects_cloud_larger_than_root() {
        let cfg = OctreeConfig::new(1.0, 2, 1).unwrap();
        assert!(matches!(
            build_octree(&cloud(&[(0.0, 0.0, 0.0), (10.0, 0.0, 0.0)]), &cfg),
            Err(OctreeError::CloudExceedsRootCube { .. })
        ));
        assert_eq!(
            build_octree(&PointCloud::default(), &cfg).unwrap_err(),
            OctreeError::EmptyCloud
        );
    }

    #[test]
    fn bad_configs() {
        assert!(OctreeConfig::new(0.0, 4, 1).is_err());
        assert!(OctreeConfig::new(1.0, 0, 1).is_err());
        assert!(OctreeConfig::new(1.0, 4, 0).is_err());
        assert!(OctreeConfig::new(f64::NAN, 4, 1).is_err());
    }

    #[test]
    fn queries() {
        let cfg = OctreeConfig::new(1.0, 3, 1).unwrap();
        let pts = [(0.5, 0.5, 0.5), (6.5, 6.5, 6.5), (6.7, 0.1, 3.3)];
        let map = build_octree(&cloud(&pts), &cfg).unwrap();
        for &(x, y, z) in &pts {
            assert_eq!(map.query_voxel(&Point3::new(x, y, z)), VoxelState::Occupied);
        }
        let root = map.root_bounds();
        let outside = Point3::new(root.max.x + 0.1, root.min.y, root.min.z);
        assert_eq!(map.query_voxel(&outside), VoxelState::Outside);
        // the root's max corner is closed
        assert_ne!(map.query_voxel(&root.max), VoxelState::Outside);
    }

    #[test]
    fn root_corner_is_resolution_aligned() {
        let cfg = OctreeConfig::new(0.5, 4, 1).unwrap();
        let map = build_octree(&cloud(&[(1.3, -2.1, 0.4), (2.0, 2.0, 2.0)]), &cfg).unwrap();
        let lo = map.root_bounds().min;
        for v in [lo.x, lo.y, lo.z] {
            assert_eq!((v / 0.5).fract(), 0.0);
        }
        assert_eq!(map.root_bounds().max.x - lo.x, 8.0);
    }

    #[test]
    fn dump_format() {
        let cfg = OctreeConfig::new(1.0, 1, 1).unwrap();
        let map = build_octree(&cloud(&[(0.5, 0.5, 0.5), (1.5, 1.5, 1.5)]), &cfg).unwrap();
        let dump = map.dump_occupied();
        assert_eq!(dump.lines().count(), 2);
        assert!(dump
            .lines()
            .all(|l| l.split(' ').count() == 5 && l.ends_with(" 1 1")));
    }
}
