//! Octree checked against brute-force voxelization and point-in-box scans.

use std::collections::BTreeSet;

use gridnav::octree::{build_octree, OctreeConfig, VoxelState};
use gridnav::{Point3, PointCloud};
use proptest::prelude::*;

// Coordinates on a 1/1024 lattice and power-of-two resolutions keep every
// voxel boundary exactly representable, so the oracle has no rounding slack.
fn lattice_point() -> impl Strategy<Value = Point3> {
    (-8192i32..8192, -8192i32..8192, -4096i32..4096)
        .prop_map(|(x, y, z)| Point3::new(x as f64 / 1024.0, y as f64 / 1024.0, z as f64 / 1024.0))
}

fn cloud(max: usize) -> impl Strategy<Value = PointCloud> {
    prop::collection::vec(lattice_point(), 1..max).prop_map(PointCloud::new)
}

fn resolution() -> impl Strategy<Value = f64> {
    prop::sample::select(vec![0.125, 0.25, 0.5, 1.0])
}

/// `floor((p - root_lo) / resolution)`, clamped onto the closed max face.
fn brute_voxels(cloud: &PointCloud, lo: Point3, res: f64, cells: u64) -> BTreeSet<[u64; 3]> {
    cloud
        .points
        .iter()
        .map(|p| {
            let idx = |v: f64, o: f64| (((v - o) / res).floor() as u64).min(cells - 1);
            [idx(p.x, lo.x), idx(p.y, lo.y), idx(p.z, lo.z)]
        })
        .collect()
}

fn config(res: f64) -> OctreeConfig {
    // 2^7 voxels per edge: at least 16 units, enough for the ±8 lattice
    OctreeConfig::new(res, 7 + (1.0 / res).log2() as u32, 1).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn occupied_voxels_match_brute_force(c in cloud(300), res in resolution(), threshold in 1usize..6) {
        let cfg = OctreeConfig { split_threshold: threshold, ..config(res) };
        let map = build_octree(&c, &cfg).unwrap();
        let cells = 1u64 << cfg.max_depth;
        prop_assert_eq!(map.occupied_voxels(), brute_voxels(&c, map.root_bounds().min, res, cells));
    }

    #[test]
    fn leaves_partition_the_points(c in cloud(200), res in resolution(), threshold in 1usize..4) {
        let cfg = OctreeConfig { split_threshold: threshold, ..config(res) };
        let map = build_octree(&c, &cfg).unwrap();
        let leaves = map.occupied_leaves();
        prop_assert!(leaves.len() <= c.len());
        prop_assert_eq!(leaves.iter().map(|l| l.count()).sum::<usize>(), c.len());
        for leaf in &leaves {
            prop_assert!(leaf.depth <= cfg.max_depth);
            // a leaf above max depth only stops splitting when it is small
            prop_assert!(leaf.depth == cfg.max_depth || leaf.count() <= threshold);
            for p in leaf.points {
                prop_assert!(leaf.bounds.contains(p));
            }
        }
    }

    #[test]
    fn queries_agree_with_leaf_scan(c in cloud(100), res in resolution(), q in prop::collection::vec(lattice_point(), 50)) {
        let map = build_octree(&c, &config(res)).unwrap();
        let root = map.root_bounds();
        let leaves = map.occupied_leaves();
        // half-open boxes, except where the box touches the root's max face
        let inside = |b: &gridnav::pointcloud::Aabb, p: &Point3| {
            (0..3).all(|i| {
                let (lo, hi, v) = (b.min.axis(i), b.max.axis(i), p.axis(i));
                lo <= v && (v < hi || (hi == root.max.axis(i) && v == hi))
            })
        };
        for p in c.points.iter().chain(&q) {
            let expected = if !root.contains(p) {
                VoxelState::Outside
            } else if leaves.iter().any(|l| inside(&l.bounds, p)) {
                VoxelState::Occupied
            } else {
                VoxelState::Free
            };
            prop_assert_eq!(map.query_voxel(p), expected);
        }
        for p in &c.points {
            prop_assert_eq!(map.query_voxel(p), VoxelState::Occupied);
        }
    }

    #[test]
    fn adding_a_point_keeps_occupancy(c in cloud(100), extra in lattice_point(), res in resolution()) {
        let cfg = config(res);
        let before = build_octree(&c, &cfg).unwrap();
        let mut grown = c.clone();
        grown.points.push(extra);
        let after = build_octree(&grown, &cfg).unwrap();
        // the root may move with the bounding box; compare in world terms
        for p in &c.points {
            prop_assert_eq!(after.query_voxel(p), VoxelState::Occupied);
        }
        for leaf in before.occupied_leaves() {
            prop_assert_eq!(after.query_voxel(&leaf.points[0]), VoxelState::Occupied);
        }
    }
}

#[test]
fn boundary_points_land_in_one_voxel() {
    // points exactly on voxel faces, including the root's closed max face
    let pts: Vec<Point3> = (0..=8)
        .flat_map(|i| (0..=8).map(move |j| Point3::new(i as f64, j as f64, ((i + j) % 9) as f64)))
        .collect();
    let c = PointCloud::new(pts);
    let cfg = OctreeConfig::new(1.0, 4, 1).unwrap();
    let map = build_octree(&c, &cfg).unwrap();
    assert_eq!(
        map.occupied_voxels(),
        brute_voxels(&c, map.root_bounds().min, 1.0, 16)
    );
    assert_eq!(map.occupied_voxels().len(), 81);
}
