//! Stage 2 of the planner: turns the coarse grid path into a smooth,
//! clearance-respecting, arc-length-resampled 3D path with a head-height
//! profile, and forecasts dynamic-obstacle collisions for re-planning.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{menger_curvature, Vec2};
use crate::instruct::LocomotionType;
use crate::route_graph::{astar_to_landmark, CoarsePath, GraphError, GridGraph};
use crate::scene::{Landmark, Scene, SceneError};
use crate::speed_profile::SpeedProfile;

#[derive(Debug, Error)]
pub enum RefineError {
    #[error("scene error: {0}")]
    Scene(#[from] SceneError),
    #[error(
        "impassable top obstacle: clearance minus margin is {available:.2} m (< 0.40 m floor) \
         around arc length {s:.2} m"
    )]
    ImpassableTopObstacle { s: f64, available: f64 },
    #[error("coarse path needs at least 2 nodes, got {0}")]
    TooShort(usize),
}

/// One sample of a refined path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub position: Vec2,
    /// Terrain elevation at the sample, m.
    pub ground_z: f64,
    /// Target head height above ground, m (in [0.4, 1.47]).
    pub head_z: f64,
    /// Cumulative arc length, m.
    pub s: f64,
    /// Discrete three-point curvature, 1/m.
    pub curvature: f64,
}

/// Smoothed, uniformly resampled 3D path with a head-height profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometricPath {
    pub samples: Vec<PathSample>,
    /// Actual sample spacing, m (nominal spacing adjusted so the path
    /// length divides evenly).
    pub spacing: f64,
    pub locomotion: LocomotionType,
    /// Set when the corridor was too narrow to smooth with the requested
    /// clearance margin; the path is resampled but unsmoothed.
    pub degraded: bool,
}

impl GeometricPath {
    pub fn total_length(&self) -> f64 {
        self.samples.last().map_or(0.0, |p| p.s)
    }

    /// Position, ground elevation and head height at arc length `s`
    /// (clamped to the path).
    pub fn state_at(&self, s: f64) -> (Vec2, f64, f64) {
        let n = self.samples.len();
        if s <= 0.0 || n == 1 {
            let p = &self.samples[0];
            return (p.position, p.ground_z, p.head_z);
        }
        if s >= self.total_length() {
            let p = &self.samples[n - 1];
            return (p.position, p.ground_z, p.head_z);
        }
        let i = ((s / self.spacing) as usize).min(n - 2);
        let a = &self.samples[i];
        let b = &self.samples[i + 1];
        let f = ((s - a.s) / (b.s - a.s)).clamp(0.0, 1.0);
        (
            a.position.lerp(b.position, f),
            a.ground_z + (b.ground_z - a.ground_z) * f,
            a.head_z + (b.head_z - a.head_z) * f,
        )
    }

    /// Sum of absolute heading changes along the samples, radians.
    pub fn total_turning(&self) -> f64 {
        total_turning(&self.samples.iter().map(|p| p.position).collect::<Vec<_>>())
    }

    /// CSV dump with columns `s,x,y,ground_z,head_z,curvature`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,x,y,ground_z,head_z,curvature\n");
        for p in &self.samples {
            out.push_str(&format!(
                "{:.4},{:.4},{:.4},{:.4},{:.4},{:.6}\n",
                p.s, p.position.x, p.position.y, p.ground_z, p.head_z, p.curvature
            ));
        }
        out
    }
}

pub fn total_turning(points: &[Vec2]) -> f64 {
    let mut sum = 0.0;
    for w in points.windows(3) {
        let u = w[1].sub(w[0]);
        let v = w[2].sub(w[1]);
        if u.norm() < 1e-9 || v.norm() < 1e-9 {
            continue;
        }
        let cross = u.cross(v);
        let dot = u.dot(v);
        sum += cross.atan2(dot).abs();
    }
    sum
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RefineParams {
    /// Nominal resample spacing, m.
    pub spacing: f64,
    /// Required distance from every sample to every static obstacle, m.
    pub clearance_margin: f64,
    /// Laplacian smoothing passes; 0 disables smoothing.
    pub smoothing_passes: usize,
    /// Per-pass blend toward the neighbor midpoint, in (0, 1].
    pub smoothing_weight: f64,
    /// Safety margin below a top obstacle's clearance, m.
    pub head_margin: f64,
    /// Distance before/after a top obstacle over which head height ramps, m.
    pub lead_distance: f64,
    /// |d head_z / ds| bound, m per m.
    pub max_height_rate: f64,
    /// Smoothing may not move a vertex to terrain more than this far (in
    /// elevation) from the coarse vertex it came from; keeps smoothing from
    /// cutting through hills the grid search paid to avoid.
    pub max_terrain_shift: f64,
}

impl Default for RefineParams {
    fn default() -> Self {
        Self {
            spacing: 0.25,
            clearance_margin: 0.4,
            smoothing_passes: 50,
            smoothing_weight: 0.5,
            head_margin: 0.1,
            lead_distance: 1.5,
            max_height_rate: 0.5,
            max_terrain_shift: 0.1,
        }
    }
}

fn min_obstacle_distance(scene: &Scene, p: Vec2) -> f64 {
    scene
        .static_obstacles
        .iter()
        .map(|o| o.polygon.distance_to_point(p))
        .fold(f64::INFINITY, f64::min)
}

/// Laplacian smoothing with clearance rejection, then uniform resampling;
/// ground heights, head heights and curvature are filled in afterwards.
pub fn smooth_and_resample(
    coarse: &CoarsePath,
    scene: &Scene,
    params: &RefineParams,
    locomotion: &LocomotionType,
) -> Result<GeometricPath, RefineError> {
    smooth_and_resample_with_keepout(coarse, scene, params, locomotion, &[])
}

/// As [`smooth_and_resample`], but smoothing also stays out of the given
/// disks (center, radius); used when re-planning around the predicted
/// positions of dynamic obstacles.
pub fn smooth_and_resample_with_keepout(
    coarse: &CoarsePath,
    scene: &Scene,
    params: &RefineParams,
    locomotion: &LocomotionType,
    keepout: &[(Vec2, f64)],
) -> Result<GeometricPath, RefineError> {
    if coarse.positions.len() < 2 {
        return Err(RefineError::TooShort(coarse.positions.len()));
    }
    let mut points = coarse.positions.clone();

    // corridor narrower than the margin allows: skip smoothing, flag
    let degraded = points
        .iter()
        .any(|&p| min_obstacle_distance(scene, p) < params.clearance_margin);

    if !degraded {
        let coarse_heights: Vec<f64> = points
            .iter()
            .map(|&p| scene.terrain_height(p).unwrap_or(0.0))
            .collect();
        for _ in 0..params.smoothing_passes {
            let mut moved = false;
            for i in 1..points.len() - 1 {
                let mid = points[i - 1].lerp(points[i + 1], 0.5);
                let candidate = points[i].lerp(mid, params.smoothing_weight);
                // the moved vertex and both new half-edges must keep clearance
                let ok = [
                    candidate,
                    points[i - 1].lerp(candidate, 0.5),
                    candidate.lerp(points[i + 1], 0.5),
                ]
                .iter()
                .all(|&q| {
                    min_obstacle_distance(scene, q) >= params.clearance_margin
                        && keepout.iter().all(|(c, r)| q.dist(*c) >= *r)
                })
                    && scene.heightmap.in_extent(candidate)
                    && scene
                        .terrain_height(candidate)
                        .map(|h| (h - coarse_heights[i]).abs() <= params.max_terrain_shift)
                        .unwrap_or(false);
                if ok && candidate.dist(points[i]) > 1e-12 {
                    points[i] = candidate;
                    moved = true;
                }
            }
            if !moved {
                break;
            }
        }
    }

    // uniform resampling: spacing adjusted so the length divides evenly
    let mut cumulative = vec![0.0];
    for w in points.windows(2) {
        cumulative.push(cumulative.last().unwrap() + w[0].dist(w[1]));
    }
    let length = *cumulative.last().unwrap();
    let intervals = ((length / params.spacing).round() as usize).max(1);
    let spacing = length / intervals as f64;

    let mut samples = Vec::with_capacity(intervals + 1);
    let mut seg = 0usize;
    for k in 0..=intervals {
        let s = k as f64 * spacing;
        while seg + 2 < cumulative.len() && cumulative[seg + 1] < s {
            seg += 1;
        }
        let seg_len = cumulative[seg + 1] - cumulative[seg];
        let f = if seg_len > 0.0 {
            ((s - cumulative[seg]) / seg_len).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let position = points[seg].lerp(points[seg + 1], f);
        let ground_z = scene.terrain_height(position)?;
        samples.push(PathSample {
            position,
            ground_z,
            head_z: locomotion.head_height.clamp(0.4, 1.47),
            s,
            curvature: 0.0,
        });
    }

    fill_curvature(&mut samples);
    Ok(GeometricPath {
        samples,
        spacing,
        locomotion: locomotion.clone(),
        degraded,
    })
}

fn fill_curvature(samples: &mut [PathSample]) {
    let n = samples.len();
    for i in 1..n - 1 {
        samples[i].curvature = menger_curvature(
            samples[i - 1].position,
            samples[i].position,
            samples[i + 1].position,
        );
    }
    if n >= 2 {
        samples[0].curvature = samples[1].curvature;
        samples[n - 1].curvature = samples[n - 2].curvature;
    }
}

/// Lower head height under top obstacles (clearance minus margin, floored
/// at crawl height), with a rate-limited ramp that starts `lead_distance`
/// before each constrained region.
pub fn assign_head_height(
    mut path: GeometricPath,
    scene: &Scene,
    params: &RefineParams,
) -> Result<GeometricPath, RefineError> {
    let n = path.samples.len();
    let nominal = path.locomotion.head_height.clamp(0.4, 1.47);
    let mut target = vec![nominal; n];
    for i in 0..n {
        let clearance = scene.clearance_at(path.samples[i].position)?;
        if clearance.is_finite() {
            let available = clearance - params.head_margin;
            if available < 0.4 - 1e-9 {
                return Err(RefineError::ImpassableTopObstacle {
                    s: path.samples[i].s,
                    available,
                });
            }
            target[i] = target[i].min(available);
        }
    }

    // extend each constrained region by the lead distance
    let lead_steps = (params.lead_distance / path.spacing).ceil() as usize;
    let mut extended = target.clone();
    for i in 0..n {
        let lo = i.saturating_sub(lead_steps);
        let hi = (i + lead_steps).min(n - 1);
        for j in lo..=hi {
            extended[i] = extended[i].min(target[j]);
        }
    }

    // rate-limit the ramp in both directions
    let step = params.max_height_rate * path.spacing;
    for i in 1..n {
        extended[i] = extended[i].min(extended[i - 1] + step).max(0.4);
    }
    for i in (0..n - 1).rev() {
        extended[i] = extended[i].min(extended[i + 1] + step).max(0.4);
    }

    for (sample, h) in path.samples.iter_mut().zip(extended) {
        sample.head_z = h;
    }
    Ok(path)
}

/// Predicted collision between the planned motion and a dynamic obstacle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionForecast {
    pub obstacle_id: String,
    /// Seconds from `t_now` to the predicted first contact.
    pub time_to_collision: f64,
    /// Obstacle position at the predicted contact.
    pub position: Vec2,
    /// Arc length along the path at the predicted contact, m.
    pub s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForecastParams {
    /// Lookahead window, s.
    pub horizon: f64,
    /// Sweep resolution, s (the control rate).
    pub time_step: f64,
    pub agent_radius: f64,
    pub safety_margin: f64,
}

impl Default for ForecastParams {
    fn default() -> Self {
        Self {
            horizon: 1.5,
            time_step: 1.0 / 30.0,
            agent_radius: 0.4,
            safety_margin: 0.0,
        }
    }
}

/// Arc length as a function of time on this (path, profile), piecewise
/// constant-acceleration per segment.
pub fn arc_at_time(path: &GeometricPath, profile: &SpeedProfile, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let mut elapsed = 0.0;
    for i in 0..profile.v.len() - 1 {
        let v0 = profile.v[i];
        let v1 = profile.v[i + 1];
        let pair = v0 + v1;
        if pair <= 0.0 {
            return path.samples[i].s;
        }
        let seg_t = 2.0 * path.spacing / pair;
        if elapsed + seg_t >= t {
            let tau = t - elapsed;
            let a = (v1 * v1 - v0 * v0) / (2.0 * path.spacing);
            return (path.samples[i].s + v0 * tau + 0.5 * a * tau * tau)
                .min(path.total_length());
        }
        elapsed += seg_t;
    }
    path.total_length()
}

/// Sweep the planned motion and every obstacle's motion rule on a fixed
/// time grid; report the first predicted contact per obstacle within the
/// horizon. `t_now` is elapsed time on this (path, profile); `scene_t0`
/// is the scene clock at which the profile started.
pub fn forecast_collisions(
    path: &GeometricPath,
    profile: &SpeedProfile,
    scene: &Scene,
    t_now: f64,
    scene_t0: f64,
    params: &ForecastParams,
) -> Vec<CollisionForecast> {
    let mut forecasts = Vec::new();
    for obstacle in &scene.dynamic_obstacles {
        let threshold = params.agent_radius + obstacle.radius + params.safety_margin;
        let steps = (params.horizon / params.time_step).ceil() as usize;
        for k in 0..=steps {
            let dt = (k as f64 * params.time_step).min(params.horizon);
            let t = t_now + dt;
            let s = arc_at_time(path, profile, t);
            let (agent, _, _) = path.state_at(s);
            let obstacle_pos = obstacle.rule.position(scene_t0 + t);
            if agent.dist(obstacle_pos) < threshold {
                forecasts.push(CollisionForecast {
                    obstacle_id: obstacle.id.clone(),
                    time_to_collision: dt,
                    position: obstacle_pos,
                    s,
                });
                break;
            }
        }
    }
    forecasts
}

/// Outcome of re-planning around forecast obstacle positions.
#[derive(Debug)]
pub enum ReplanOutcome {
    /// New coarse path avoiding every predicted obstacle disk.
    Replanned(CoarsePath),
    /// No path exists once the predicted disks are inserted; the caller
    /// keeps its old path and should slow or stop.
    Unavoidable,
}

/// Re-run A* on a copy of the graph with edges near each obstacle's
/// predicted disk removed.
pub fn replan_with_forecast(
    graph: &GridGraph,
    start: Vec2,
    goal: &Landmark,
    forecasts: &[CollisionForecast],
    scene: &Scene,
    params: &ForecastParams,
) -> Result<ReplanOutcome, GraphError> {
    let disks: Vec<(Vec2, f64)> = forecasts
        .iter()
        .map(|f| {
            let radius = scene
                .dynamic_obstacles
                .iter()
                .find(|o| o.id == f.obstacle_id)
                .map_or(0.0, |o| o.radius);
            (
                f.position,
                radius + params.agent_radius + params.safety_margin,
            )
        })
        .collect();
    let constrained = graph.with_disks_removed(&disks);
    match astar_to_landmark(&constrained, start, goal) {
        Ok(path) => Ok(ReplanOutcome::Replanned(path)),
        Err(GraphError::Unreachable { .. }) | Err(GraphError::DeadStart(..)) => {
            Ok(ReplanOutcome::Unavoidable)
        }
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Polygon;
    use crate::route_graph::{build_graph, GraphParams};
    use crate::scene::{
        DynamicObstacle, HeightMap, MotionRule, StaticObstacle, TopObstacle,
    };
    use crate::speed_profile::{solve_min_time_qp, EnvelopeParams};
    use approx::assert_relative_eq;

    fn flat_scene(rows: usize, cols: usize) -> Scene {
        Scene {
            heightmap: HeightMap::flat([0.0, 0.0], 1.0, rows, cols, 0.0),
            static_obstacles: vec![],
            top_obstacles: vec![],
            dynamic_obstacles: vec![],
            landmarks: vec![Landmark {
                name: "goal".into(),
                cells: vec![[0.0, 0.0]],
            }],
        }
    }

    fn coarse_from(points: &[[f64; 2]]) -> CoarsePath {
        CoarsePath {
            nodes: (0..points.len()).collect(),
            positions: points.iter().map(|&p| Vec2::from(p)).collect(),
            total_cost: 0.0,
        }
    }

    fn constant_profile(path: &GeometricPath, v: f64) -> SpeedProfile {
        let caps = vec![v; path.samples.len()];
        solve_min_time_qp(path, &caps, &EnvelopeParams::default(), v, Some(v)).unwrap()
    }

    #[test]
    fn straight_path_stays_straight() {
        let scene = flat_scene(4, 12);
        let coarse = coarse_from(&[[0.0, 1.0], [5.0, 1.0], [10.0, 1.0]]);
        let path =
            smooth_and_resample(&coarse, &scene, &RefineParams::default(), &LocomotionType::walk())
                .unwrap();
        assert!(!path.degraded);
        for p in &path.samples {
            assert_relative_eq!(p.position.y, 1.0, epsilon = 1e-9);
            assert_relative_eq!(p.curvature, 0.0, epsilon = 1e-9);
        }
        // uniform spacing
        for w in path.samples.windows(2) {
            assert!((w[1].s - w[0].s - path.spacing).abs() <= 1e-9);
        }
    }

    #[test]
    fn l_shape_smooths_and_keeps_clearance() {
        let mut scene = flat_scene(12, 12);
        scene.static_obstacles.push(StaticObstacle {
            polygon: Polygon::rect(4.0, 4.0, 11.0, 11.0),
        });
        // coarse path hugging the corner of the block
        let coarse = coarse_from(&[
            [1.0, 1.0],
            [2.0, 1.0],
            [3.0, 1.0],
            [3.0, 2.0],
            [3.0, 3.0],
            [3.0, 6.0],
            [3.0, 9.0],
        ]);
        let params = RefineParams::default();
        let path =
            smooth_and_resample(&coarse, &scene, &params, &LocomotionType::walk()).unwrap();
        assert!(!path.degraded);
        // brute-force clearance check at every sample
        for p in &path.samples {
            assert!(
                min_obstacle_distance(&scene, p.position) >= params.clearance_margin - 1e-9,
                "sample at {:?} violates the margin",
                p.position
            );
        }
        // smoothing reduces turning and does not lengthen
        let linear = coarse.linear_length();
        assert!(path.total_length() <= 1.05 * linear);
        assert!(path.total_turning() <= total_turning(&coarse.positions) + 1e-9);
        // endpoints preserved
        assert!(path.samples[0].position.dist(coarse.positions[0]) < 1.0);
        assert!(
            path.samples.last().unwrap().position.dist(*coarse.positions.last().unwrap()) < 1.0
        );
        // corner is actually rounded
        let max_curvature = path
            .samples
            .iter()
            .map(|p| p.curvature)
            .fold(0.0, f64::max);
        assert!(max_curvature < 1.0 / params.clearance_margin);
    }

    #[test]
    fn narrow_corridor_degrades() {
        let mut scene = flat_scene(8, 8);
        // corridor along y=2 exactly 2 * margin = 0.8 m wide
        scene.static_obstacles.push(StaticObstacle {
            polygon: Polygon::rect(0.0, 0.0, 7.0, 1.65),
        });
        scene.static_obstacles.push(StaticObstacle {
            polygon: Polygon::rect(0.0, 2.35, 7.0, 7.0),
        });
        let coarse = coarse_from(&[[1.0, 2.0], [3.0, 2.0], [5.0, 2.0]]);
        let path = smooth_and_resample(
            &coarse,
            &scene,
            &RefineParams::default(),
            &LocomotionType::walk(),
        )
        .unwrap();
        assert!(path.degraded);
        // still collision-free (distance 0.4, not inside)
        for p in &path.samples {
            assert!(min_obstacle_distance(&scene, p.position) > 0.0);
        }
    }

    #[test]
    fn head_height_flat_walk() {
        let scene = flat_scene(4, 12);
        let coarse = coarse_from(&[[0.0, 1.0], [10.0, 1.0]]);
        let path =
            smooth_and_resample(&coarse, &scene, &RefineParams::default(), &LocomotionType::walk())
                .unwrap();
        let path = assign_head_height(path, &scene, &RefineParams::default()).unwrap();
        for p in &path.samples {
            assert_relative_eq!(p.head_z, 1.47);
        }
    }

    #[test]
    fn head_height_under_low_ceiling() {
        let mut scene = flat_scene(4, 22);
        scene.top_obstacles.push(TopObstacle {
            polygon: Polygon::rect(9.0, 0.0, 12.0, 3.0),
            clearance_height: 0.9,
        });
        let coarse = coarse_from(&[[0.0, 1.0], [20.0, 1.0]]);
        let params = RefineParams::default();
        let path =
            smooth_and_resample(&coarse, &scene, &params, &LocomotionType::walk()).unwrap();
        let path = assign_head_height(path, &scene, &params).unwrap();
        for p in &path.samples {
            // crouch height under the obstacle (0.9 clearance - 0.1 margin)
            if p.position.x >= 9.0 && p.position.x <= 12.0 {
                assert_relative_eq!(p.head_z, 0.8, epsilon = 1e-9);
            }
            assert!(p.head_z >= 0.4 && p.head_z <= 1.47);
        }
        // the ramp starts at least lead_distance before the obstacle
        let before = path
            .samples
            .iter()
            .find(|p| (p.position.x - (9.0 - params.lead_distance)).abs() < path.spacing)
            .unwrap();
        assert!(before.head_z <= 0.8 + 1e-9);
        // rate bound everywhere
        for w in path.samples.windows(2) {
            assert!(
                (w[1].head_z - w[0].head_z).abs() / path.spacing
                    <= params.max_height_rate + 1e-9
            );
        }
    }

    #[test]
    fn impassable_ceiling_is_an_error() {
        let mut scene = flat_scene(4, 12);
        scene.top_obstacles.push(TopObstacle {
            polygon: Polygon::rect(4.0, 0.0, 6.0, 3.0),
            clearance_height: 0.45,
        });
        let coarse = coarse_from(&[[0.0, 1.0], [10.0, 1.0]]);
        let params = RefineParams::default();
        let path =
            smooth_and_resample(&coarse, &scene, &params, &LocomotionType::walk()).unwrap();
        let err = assign_head_height(path, &scene, &params).unwrap_err();
        assert!(matches!(err, RefineError::ImpassableTopObstacle { .. }));
    }

    #[test]
    fn forecast_head_on_collision() {
        // agent at x=2 moving +x at 1 m/s; obstacle at x=4.5 moving -x at
        // 1 m/s, radius 0.3, agent radius 0.4: gap 2.5 m closes at 2 m/s,
        // contact when 0.7 m apart => t ~ 0.9 s
        let mut scene = flat_scene(4, 22);
        scene.dynamic_obstacles.push(DynamicObstacle {
            id: "runner".into(),
            radius: 0.3,
            rule: MotionRule::Linear {
                start: Vec2::new(4.5, 1.0),
                velocity: Vec2::new(-1.0, 0.0),
            },
        });
        let coarse = coarse_from(&[[2.0, 1.0], [20.0, 1.0]]);
        let path = smooth_and_resample(
            &coarse,
            &scene,
            &RefineParams::default(),
            &LocomotionType::walk(),
        )
        .unwrap();
        let profile = constant_profile(&path, 1.0);
        let params = ForecastParams::default();
        let forecasts = forecast_collisions(&path, &profile, &scene, 0.0, 0.0, &params);
        assert_eq!(forecasts.len(), 1);
        let f = &forecasts[0];
        assert_eq!(f.obstacle_id, "runner");
        assert!(
            (f.time_to_collision - 0.9).abs() <= 2.0 * params.time_step,
            "ttc {}",
            f.time_to_collision
        );

        // same obstacle starting 6 m away: contact after the 1.5 s window
        scene.dynamic_obstacles[0].rule = MotionRule::Linear {
            start: Vec2::new(8.0, 1.0),
            velocity: Vec2::new(-1.0, 0.0),
        };
        let forecasts = forecast_collisions(&path, &profile, &scene, 0.0, 0.0, &params);
        assert!(forecasts.is_empty());
    }

    #[test]
    fn no_dynamic_obstacles_no_forecasts() {
        let scene = flat_scene(4, 12);
        let coarse = coarse_from(&[[0.0, 1.0], [10.0, 1.0]]);
        let path = smooth_and_resample(
            &coarse,
            &scene,
            &RefineParams::default(),
            &LocomotionType::walk(),
        )
        .unwrap();
        let profile = constant_profile(&path, 1.0);
        assert!(forecast_collisions(
            &path,
            &profile,
            &scene,
            0.0,
            0.0,
            &ForecastParams::default()
        )
        .is_empty());
    }

    #[test]
    fn replan_sidesteps_predicted_disk() {
        let mut scene = flat_scene(9, 22);
        scene.dynamic_obstacles.push(DynamicObstacle {
            id: "cart".into(),
            radius: 0.3,
            rule: MotionRule::Linear {
                start: Vec2::new(10.0, 4.0),
                velocity: Vec2::new(-1.0, 0.0),
            },
        });
        scene.landmarks[0].cells = vec![[20.0, 4.0]];
        let graph = build_graph(&scene, &GraphParams::default()).unwrap();
        let goal = &scene.landmarks[0];
        let start = Vec2::new(8.0, 4.0);
        let coarse = astar_to_landmark(&graph, start, goal).unwrap();
        let refine = RefineParams::default();
        let path =
            smooth_and_resample(&coarse, &scene, &refine, &LocomotionType::walk()).unwrap();
        let profile = constant_profile(&path, 1.0);
        let params = ForecastParams::default();
        let forecasts = forecast_collisions(&path, &profile, &scene, 0.0, 0.0, &params);
        assert!(!forecasts.is_empty());

        match replan_with_forecast(&graph, start, goal, &forecasts, &scene, &params).unwrap() {
            ReplanOutcome::Replanned(new_coarse) => {
                // fixed point: the new path has no forecast collisions
                // against the same predictions
                let disk_r = 0.3 + params.agent_radius + params.safety_margin;
                let keepout: Vec<(Vec2, f64)> =
                    forecasts.iter().map(|f| (f.position, disk_r)).collect();
                let new_path = smooth_and_resample_with_keepout(
                    &new_coarse,
                    &scene,
                    &refine,
                    &LocomotionType::walk(),
                    &keepout,
                )
                .unwrap();
                for f in &forecasts {
                    // the new geometric path clears the predicted disk
                    let closest = new_path
                        .samples
                        .iter()
                        .map(|p| p.position.dist(f.position))
                        .fold(f64::INFINITY, f64::min);
                    assert!(closest >= disk_r - new_path.spacing);
                }
            }
            ReplanOutcome::Unavoidable => panic!("corridor is wide enough to sidestep"),
        }
    }

    #[test]
    fn fully_blocked_corridor_is_unavoidable() {
        let mut scene = flat_scene(4, 22);
        // 1-cell corridor walls above and below y=1 leave no sidestep room
        scene.static_obstacles.push(StaticObstacle {
            polygon: Polygon::rect(0.0, -0.2, 21.0, 0.35),
        });
        scene.static_obstacles.push(StaticObstacle {
            polygon: Polygon::rect(0.0, 1.65, 21.0, 3.2),
        });
        scene.dynamic_obstacles.push(DynamicObstacle {
            id: "blocker".into(),
            radius: 0.4,
            rule: MotionRule::Linear {
                start: Vec2::new(4.0, 1.0),
                velocity: Vec2::new(-1.0, 0.0),
            },
        });
        scene.landmarks[0].cells = vec![[20.0, 1.0]];
        let graph = build_graph(&scene, &GraphParams::default()).unwrap();
        let goal = &scene.landmarks[0];
        let start = Vec2::new(1.0, 1.0);
        let coarse = astar_to_landmark(&graph, start, goal).unwrap();
        let refine = RefineParams::default();
        let path =
            smooth_and_resample(&coarse, &scene, &refine, &LocomotionType::walk()).unwrap();
        let profile = constant_profile(&path, 1.0);
        let params = ForecastParams::default();
        let forecasts = forecast_collisions(&path, &profile, &scene, 0.0, 0.0, &params);
        assert!(!forecasts.is_empty());
        match replan_with_forecast(&graph, start, goal, &forecasts, &scene, &params).unwrap() {
            ReplanOutcome::Unavoidable => {}
            ReplanOutcome::Replanned(_) => panic!("expected unavoidable"),
        }
    }
}
