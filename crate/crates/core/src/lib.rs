//! Scene-aware long-horizon path planning.
//!
//! The planner turns a 3D scene (heightmap terrain, static walls, low-ceiling
//! "top" obstacles, rule-driven dynamic obstacles, named landmarks) and
//! templated text instructions into executable trajectories: 2D position,
//! head height and speed at a fixed control rate.
//!
//! Pipeline: [`instruct`] parses instructions into routing triplets,
//! [`route_graph`] runs slope-aware multi-goal A* on the pruned grid,
//! [`refiner`] smooths and resamples the coarse path and assigns head
//! heights under top obstacles, [`speed_profile`] solves the minimum-time
//! speed QP and converts to fixed-rate waypoints, and [`sim`] tracks the
//! result with a kinematic pure-pursuit agent and runs the benchmarks.

pub mod geom;
pub mod instruct;
pub mod refiner;
pub mod route_graph;
pub mod scene;
pub mod sim;
pub mod speed_profile;

pub use instruct::{Instruction, LocomotionType, RouteRequest};
pub use refiner::GeometricPath;
pub use scene::{HeightMap, Landmark, Scene};
pub use speed_profile::{SpeedProfile, Trajectory};
