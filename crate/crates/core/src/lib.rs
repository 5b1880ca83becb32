//! Point clouds to occupancy grids, and reinforcement-learning path
//! planning on those grids.
//!
//! The mapping side turns an ASCII point cloud into an octree, flattens it
//! to a 2D occupancy grid and persists the grid as PGM plus metadata. The
//! planning side models the grid as a deterministic MDP with eight moves
//! and trains tabular Q-learning, SARSA or a small deep Q-network on it,
//! with an exact Dijkstra baseline for checking the learned paths.

pub mod agents;
pub mod env;
pub mod gridmap;
pub mod octree;
pub mod oracle;
pub mod pointcloud;
pub mod svg;
pub mod trainer;

pub use agents::{Model, QTable};
pub use env::{default_layout, Action, AgentState, EnvConfig};
pub use gridmap::{CellState, OccupancyGrid, ZBand};
pub use octree::{build_octree, OctoMap, OctreeConfig};
pub use pointcloud::{Point3, PointCloud};
pub use trainer::{train, Algo, PathTrace, TrainConfig};
