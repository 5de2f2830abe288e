//! Kinematic stand-in for the locomotion controller plus the experiment
//! harness: a pure-pursuit tracker with slew limits, the closed planning/
//! tracking/re-planning loop, the slalom and pyramid scenes, and the
//! benchmark drivers.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Polygon, Vec2};
use crate::instruct::{LocomotionType, RouteRequest};
use crate::refiner::{
    assign_head_height, forecast_collisions, smooth_and_resample_with_keepout, ForecastParams,
    GeometricPath, RefineParams,
};
use crate::route_graph::{astar_to_landmark, build_graph, GraphParams, GridGraph};
use crate::scene::{HeightMap, Landmark, Scene, SceneError, StaticObstacle};
use crate::speed_profile::{
    envelope_vmax, point_speed_caps, solve_min_time_qp, to_trajectory, EnvelopeParams,
    SpeedProfile, Trajectory,
};

pub const CONTROL_RATE: f64 = 30.0;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("planning segment {index} (`{instruction}`): {message}")]
    Planning {
        index: usize,
        instruction: String,
        message: String,
    },
    #[error("scene error: {0}")]
    Scene(#[from] SceneError),
}

/// Planar agent state tracked by the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub position: Vec2,
    pub heading: f64,
    /// m/s, always >= 0.
    pub speed: f64,
    /// Head height above ground, m, in [0.4, 1.47].
    pub head_z: f64,
    pub t: f64,
}

impl AgentState {
    pub fn at_rest(position: Vec2, heading: f64, head_z: f64) -> Self {
        Self {
            position,
            heading,
            speed: 0.0,
            head_z: head_z.clamp(0.4, 1.47),
            t: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrackerParams {
    /// Waypoints ahead of the current one to pursue.
    pub lookahead: usize,
    /// rad/s.
    pub turn_rate_max: f64,
    /// Lateral disturbance sigma, m/sqrt(s); 0 disables noise.
    pub disturbance: f64,
    pub agent_radius: f64,
    /// Distance to the segment goal that counts as arrival, m.
    pub goal_tolerance: f64,
    /// Give up after this multiple of the planned time.
    pub timeout_factor: f64,
    /// |d head_z / ds| bound while tracking, m per m.
    pub max_height_rate: f64,
    pub envelope: EnvelopeParams,
}

impl Default for TrackerParams {
    fn default() -> Self {
        Self {
            lookahead: 3,
            turn_rate_max: std::f64::consts::PI,
            disturbance: 0.0,
            agent_radius: 0.4,
            goal_tolerance: 0.5,
            timeout_factor: 3.0,
            max_height_rate: 0.5,
            envelope: EnvelopeParams::default(),
        }
    }
}

/// Everything run_route needs to plan and track one route.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlannerConfig {
    pub graph: GraphParams,
    pub refine: RefineParams,
    pub tracker: TrackerParams,
    pub forecast: ForecastParams,
    /// When set, replaces the QP with this constant speed at every sample
    /// (the paper's constant-speed baseline).
    pub constant_speed: Option<f64>,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            graph: GraphParams::default(),
            refine: RefineParams {
                // the geometric default keeps exactly the agent radius from
                // walls; closed-loop tracking needs an extra allowance or
                // every corner cut becomes a contact
                clearance_margin: 0.55,
                ..RefineParams::default()
            },
            tracker: TrackerParams::default(),
            forecast: ForecastParams {
                // closed-loop tracking needs slack beyond the raw contact
                // threshold (pure pursuit cuts corners); detours are
                // planned half a meter wider than contact
                safety_margin: 0.5,
                ..ForecastParams::default()
            },
            constant_speed: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CollisionKind {
    Static,
    Dynamic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionEvent {
    pub t: f64,
    pub kind: CollisionKind,
    /// Dynamic obstacle id; empty for static contacts.
    pub obstacle_id: String,
    pub position: Vec2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentReport {
    pub instruction: String,
    pub success: bool,
    pub planned_time: f64,
    pub elapsed_time: f64,
    pub replan_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub success: bool,
    /// None when the run never failed.
    pub failure: Option<String>,
    pub completion_time: f64,
    /// Mean planar tracking error, m.
    pub xy_err: f64,
    /// Mean absolute head-height tracking error, m.
    pub z_err: f64,
    /// Mean 3D disposition error, m.
    pub disposition_err: f64,
    /// Mean of exp(-2*|dxy|^2) + exp(-10*dz^2) over all steps.
    pub adherence_score: f64,
    pub collision_events: Vec<CollisionEvent>,
    pub replan_count: usize,
    pub segments: Vec<SegmentReport>,
}

fn sample_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; one draw per call keeps the stream simple to reason about
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    (-2.0 * u1.ln()).sqrt() * u2.cos()
}

/// One 30 Hz pure-pursuit step: turn toward the lookahead waypoint with a
/// clamped turn rate, slew speed toward the commanded speed within the
/// acceleration band and the height envelope, slew head height with the
/// rate limit, then advance (plus optional lateral disturbance).
pub fn step(
    state: &AgentState,
    trajectory: &Trajectory,
    scene: &Scene,
    params: &TrackerParams,
    dt: f64,
    rng: &mut ChaCha8Rng,
) -> AgentState {
    let idx = trajectory.index_at(state.t);
    let target = &trajectory.waypoints[(idx + params.lookahead).min(trajectory.waypoints.len() - 1)];
    let reference = &trajectory.waypoints[idx.min(trajectory.waypoints.len() - 1)];

    let mut heading = state.heading;
    let to_target = Vec2::new(target.x, target.y).sub(state.position);
    if to_target.norm() > 1e-9 {
        let desired = to_target.y.atan2(to_target.x);
        let mut delta = desired - heading;
        while delta > std::f64::consts::PI {
            delta -= std::f64::consts::TAU;
        }
        while delta < -std::f64::consts::PI {
            delta += std::f64::consts::TAU;
        }
        heading += delta.clamp(-params.turn_rate_max * dt, params.turn_rate_max * dt);
    }

    // head height command from the reference waypoint (absolute -> relative)
    let ref_ground = scene
        .terrain_height(Vec2::new(reference.x, reference.y))
        .unwrap_or(0.0);
    let target_head = (reference.head_z - ref_ground).clamp(0.4, 1.47);
    let dz_max = params.max_height_rate * state.speed.max(0.1) * dt;
    let head_z = (state.head_z + (target_head - state.head_z).clamp(-dz_max, dz_max))
        .clamp(0.4, 1.47);

    let envelope_cap = envelope_vmax(head_z, &params.envelope).unwrap_or(1.0);
    let commanded = target.v.min(envelope_cap);
    let dv = commanded - state.speed;
    let speed = (state.speed
        + dv.clamp(params.envelope.a_min * dt, params.envelope.a_max * dt))
    .clamp(0.0, envelope_cap);

    let mut position = state
        .position
        .add(Vec2::new(heading.cos(), heading.sin()).scale(speed * dt));
    if params.disturbance > 0.0 {
        let lateral = params.disturbance * dt.sqrt() * sample_normal(rng);
        position = position.add(Vec2::new(-heading.sin(), heading.cos()).scale(lateral));
    }

    AgentState {
        position,
        heading,
        speed,
        head_z,
        t: state.t + dt,
    }
}

/// Keepout disks covering each forecast obstacle's predicted positions
/// across the horizon, inflated by agent radius and safety margin.
fn swept_keepout(
    scene: &Scene,
    forecasts: &[crate::refiner::CollisionForecast],
    t_now_scene: f64,
    params: &ForecastParams,
) -> Vec<(Vec2, f64)> {
    let mut disks = Vec::new();
    let step = 0.25;
    let steps = (params.horizon / step).ceil() as usize;
    for f in forecasts {
        let Some(o) = scene.dynamic_obstacles.iter().find(|o| o.id == f.obstacle_id) else {
            continue;
        };
        // strictly wider than the forecast threshold, so the replanned
        // path silences the forecast instead of re-triggering it forever
        let r = o.radius + params.agent_radius + params.safety_margin + 0.25;
        for k in 0..=steps {
            disks.push((o.rule.position(t_now_scene + k as f64 * step), r));
        }
    }
    disks
}

struct PlannedSegment {
    path: GeometricPath,
    profile: SpeedProfile,
    trajectory: Trajectory,
}

fn plan_error(index: usize, instruction: &str, e: impl std::fmt::Display) -> SimError {
    SimError::Planning {
        index,
        instruction: instruction.to_string(),
        message: e.to_string(),
    }
}

#[allow(clippy::too_many_arguments)]
fn plan_segment(
    graph: &GridGraph,
    scene: &Scene,
    goal: &Landmark,
    start: Vec2,
    v_start: f64,
    final_segment: bool,
    locomotion: &LocomotionType,
    config: &PlannerConfig,
    keepout: &[(Vec2, f64)],
) -> Result<Option<PlannedSegment>, String> {
    let coarse = astar_to_landmark(graph, start, goal).map_err(|e| e.to_string())?;
    if coarse.positions.len() < 2 {
        return Ok(None); // already on the goal cell
    }
    let path = smooth_and_resample_with_keepout(
        &coarse,
        scene,
        &config.refine,
        locomotion,
        keepout,
    )
    .map_err(|e| e.to_string())?;
    let path = assign_head_height(path, scene, &config.refine).map_err(|e| e.to_string())?;

    let envelope = &config.tracker.envelope;
    let profile = match config.constant_speed {
        Some(c) => {
            let n = path.samples.len();
            constant_profile(&path, c, n)
        }
        None => {
            let caps = point_speed_caps(&path, envelope, locomotion).map_err(|e| e.to_string())?;
            let v_end = if final_segment { Some(0.0) } else { None };
            // clamp the entry speed to the tightest backward braking bound
            // over the whole path, so chained segments never start faster
            // than the next curve or cap allows them to brake for
            let brake_slack = 2.0 * envelope.a_min.abs() * path.spacing;
            let mut bound = match v_end {
                Some(v) => v * v,
                None => caps[caps.len() - 1] * caps[caps.len() - 1],
            };
            for i in (0..caps.len() - 1).rev() {
                bound = (caps[i] * caps[i]).min(bound + brake_slack);
            }
            let v0 = v_start.min(bound.max(0.0).sqrt());
            solve_min_time_qp(&path, &caps, envelope, v0, v_end).map_err(|e| e.to_string())?
        }
    };
    let trajectory = to_trajectory(&path, &profile, CONTROL_RATE).map_err(|e| e.to_string())?;
    Ok(Some(PlannedSegment {
        path,
        profile,
        trajectory,
    }))
}

fn constant_profile(path: &GeometricPath, speed: f64, n: usize) -> SpeedProfile {
    let v = vec![speed.max(1e-6); n];
    let time = path.total_length() / speed.max(1e-6);
    SpeedProfile {
        beta: v.iter().map(|x| x * x).collect(),
        v,
        completion_time: time,
        diagnostics: Default::default(),
    }
}

struct MetricAccumulator {
    steps: usize,
    xy_sum: f64,
    z_sum: f64,
    disp_sum: f64,
    adherence_sum: f64,
}

impl MetricAccumulator {
    fn new() -> Self {
        Self {
            steps: 0,
            xy_sum: 0.0,
            z_sum: 0.0,
            disp_sum: 0.0,
            adherence_sum: 0.0,
        }
    }

    fn record(&mut self, dxy: f64, dz: f64) {
        self.steps += 1;
        self.xy_sum += dxy;
        self.z_sum += dz.abs();
        self.disp_sum += (dxy * dxy + dz * dz).sqrt();
        self.adherence_sum += (-2.0 * dxy * dxy).exp() + (-10.0 * dz * dz).exp();
    }
}

/// One planned (not simulated) route segment, for inspection and rendering.
pub struct PlannedRoute {
    pub instruction: String,
    pub path: GeometricPath,
    pub profile: SpeedProfile,
    pub trajectory: Trajectory,
}

/// Plan every instruction of a route without simulating it; segment entry
/// speeds chain (each segment starts at the previous profile's end speed).
pub fn plan_route(
    scene: &Scene,
    request: &RouteRequest,
    config: &PlannerConfig,
) -> Result<Vec<PlannedRoute>, SimError> {
    let graph = build_graph(scene, &config.graph).map_err(|e| plan_error(0, "<graph>", e))?;
    let mut out = Vec::with_capacity(request.instructions.len());
    let mut position = match request.instructions.first() {
        Some(i) => scene
            .landmark(&i.source)
            .expect("parser validated landmarks")
            .centroid(),
        None => return Ok(out),
    };
    let mut v = 0.0;
    for (index, instr) in request.instructions.iter().enumerate() {
        let goal = scene
            .landmark(&instr.target)
            .expect("parser validated landmarks");
        let text = instr.render();
        let final_segment = index + 1 == request.instructions.len();
        let planned = plan_segment(
            &graph,
            scene,
            goal,
            position,
            v,
            final_segment,
            &instr.locomotion,
            config,
            &[],
        )
        .map_err(|m| plan_error(index, &text, m))?;
        if let Some(seg) = planned {
            let end = seg.path.samples.last().expect("non-empty path");
            position = end.position;
            v = *seg.profile.v.last().unwrap_or(&0.0);
            out.push(PlannedRoute {
                instruction: text,
                path: seg.path,
                profile: seg.profile,
                trajectory: seg.trajectory,
            });
        }
    }
    Ok(out)
}

/// One realized simulator step, for trace output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    /// Absolute head height (terrain + head offset), m.
    pub head_z: f64,
    pub speed: f64,
}

/// Close the full loop: plan every instruction (grid search, refinement,
/// speed profile), track it at 30 Hz with per-step collision forecasting,
/// and on a forecast re-plan around the predicted obstacle disks and
/// splice. Metrics are averaged over every simulated step of the route,
/// including failed portions.
pub fn run_route(
    scene: &Scene,
    request: &RouteRequest,
    config: &PlannerConfig,
    seed: u64,
) -> Result<RunReport, SimError> {
    run_route_impl(scene, request, config, seed, None)
}

/// As [`run_route`], but also records the realized state at every step.
pub fn run_route_traced(
    scene: &Scene,
    request: &RouteRequest,
    config: &PlannerConfig,
    seed: u64,
    trace: &mut Vec<TraceRow>,
) -> Result<RunReport, SimError> {
    run_route_impl(scene, request, config, seed, Some(trace))
}

fn run_route_impl(
    scene: &Scene,
    request: &RouteRequest,
    config: &PlannerConfig,
    seed: u64,
    mut trace: Option<&mut Vec<TraceRow>>,
) -> Result<RunReport, SimError> {
    let graph = build_graph(scene, &config.graph)
        .map_err(|e| plan_error(0, "<graph>", e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dt = 1.0 / CONTROL_RATE;

    let mut metrics = MetricAccumulator::new();
    let mut collision_events = Vec::new();
    let mut segments = Vec::new();
    let mut replan_total = 0usize;
    let mut failure: Option<String> = None;
    let mut global_t = 0.0;

    let start_pos = request
        .instructions
        .first()
        .and_then(|i| scene.landmark(&i.source))
        .map(|l| l.centroid());
    let Some(start_pos) = start_pos else {
        return Ok(RunReport {
            success: true,
            failure: None,
            completion_time: 0.0,
            xy_err: 0.0,
            z_err: 0.0,
            disposition_err: 0.0,
            adherence_score: 0.0,
            collision_events,
            replan_count: 0,
            segments,
        });
    };
    let first_head = request.instructions[0].locomotion.head_height;
    let mut state = AgentState::at_rest(start_pos, 0.0, first_head);

    'route: for (index, instr) in request.instructions.iter().enumerate() {
        let goal = scene
            .landmark(&instr.target)
            .expect("parser validated landmarks");
        let final_segment = index + 1 == request.instructions.len();
        let text = instr.render();

        let planned = plan_segment(
            &graph,
            scene,
            goal,
            state.position,
            state.speed,
            final_segment,
            &instr.locomotion,
            config,
            &[],
        )
        .map_err(|m| plan_error(index, &text, m))?;
        let Some(mut seg) = planned else {
            segments.push(SegmentReport {
                instruction: text,
                success: true,
                planned_time: 0.0,
                elapsed_time: 0.0,
                replan_count: 0,
            });
            continue;
        };

        let planned_time = seg.profile.completion_time;
        let mut replan_count = 0usize;
        let mut budget = config.tracker.timeout_factor * planned_time + 2.0;
        let mut seg_elapsed = 0.0;
        let mut profile_t0 = global_t; // scene clock when the profile started
        let mut unavoidable_since: Option<f64> = None;
        state.t = 0.0;

        let seg_success = loop {
            // forecast against the planned motion and re-plan if needed
            if !scene.dynamic_obstacles.is_empty() {
                let forecasts = forecast_collisions(
                    &seg.path,
                    &seg.profile,
                    scene,
                    state.t,
                    profile_t0,
                    &config.forecast,
                );
                if !forecasts.is_empty() {
                    // keep out of the whole predicted track over the
                    // horizon, not just the first contact disk, so the
                    // detour cannot cut behind a moving obstacle
                    let keepout = swept_keepout(scene, &forecasts, global_t, &config.forecast);
                    match plan_segment(
                        &graph.with_disks_removed(&keepout),
                        scene,
                        goal,
                        state.position,
                        state.speed,
                        final_segment,
                        &instr.locomotion,
                        config,
                        &keepout,
                    ) {
                        Ok(Some(new_seg)) => {
                            seg = new_seg;
                            replan_count += 1;
                            budget = seg_elapsed
                                + config.tracker.timeout_factor * seg.profile.completion_time
                                + 2.0;
                            profile_t0 = global_t;
                            state.t = 0.0;
                            unavoidable_since = None;
                        }
                        Ok(None) | Err(_) => {
                            unavoidable_since.get_or_insert(global_t);
                        }
                    }
                } else {
                    unavoidable_since = None;
                }
            }

            if let Some(since) = unavoidable_since {
                if global_t - since > 3.0 {
                    failure = Some("unavoidable-obstacle".into());
                    break false;
                }
            }

            // emergency stop while boxed in: track a zero-speed command
            let next = if unavoidable_since.is_some() {
                let mut s = state;
                s.speed = (s.speed + config.tracker.envelope.a_min * dt).max(0.0);
                s.t += dt;
                s.position = s
                    .position
                    .add(Vec2::new(s.heading.cos(), s.heading.sin()).scale(s.speed * dt));
                s
            } else {
                step(&state, &seg.trajectory, scene, &config.tracker, dt, &mut rng)
            };
            state = next;
            seg_elapsed += dt;
            global_t += dt;

            // metrics against the reference waypoint for this step
            let reference = &seg.trajectory.waypoints[seg.trajectory.index_at(state.t)];
            let dxy = state.position.dist(Vec2::new(reference.x, reference.y));
            let ground = scene.terrain_height(state.position).unwrap_or(0.0);
            let dz = (ground + state.head_z) - reference.head_z;
            metrics.record(dxy, dz);
            if let Some(rows) = trace.as_deref_mut() {
                rows.push(TraceRow {
                    t: global_t,
                    x: state.position.x,
                    y: state.position.y,
                    head_z: ground + state.head_z,
                    speed: state.speed,
                });
            }

            // collisions
            for o in &scene.static_obstacles {
                if o.polygon.distance_to_point(state.position) < config.tracker.agent_radius
                    || o.polygon.contains(state.position)
                {
                    collision_events.push(CollisionEvent {
                        t: global_t,
                        kind: CollisionKind::Static,
                        obstacle_id: String::new(),
                        position: state.position,
                    });
                    failure = Some("wall-contact".into());
                    break;
                }
            }
            if failure.is_some() {
                break false;
            }
            for o in &scene.dynamic_obstacles {
                let p = o.rule.position(global_t);
                if state.position.dist(p) < config.tracker.agent_radius + o.radius {
                    collision_events.push(CollisionEvent {
                        t: global_t,
                        kind: CollisionKind::Dynamic,
                        obstacle_id: o.id.clone(),
                        position: state.position,
                    });
                }
            }

            // arrival / timeout
            let end = seg.trajectory.waypoints.last().unwrap();
            if state.t >= seg.trajectory.duration()
                && state.position.dist(Vec2::new(end.x, end.y)) <= config.tracker.goal_tolerance
            {
                break true;
            }
            if seg_elapsed > budget {
                failure = Some("timeout".into());
                break false;
            }
        };

        replan_total += replan_count;
        segments.push(SegmentReport {
            instruction: text,
            success: seg_success,
            planned_time,
            elapsed_time: seg_elapsed,
            replan_count,
        });
        if !seg_success {
            break 'route;
        }
    }

    let n = metrics.steps.max(1) as f64;
    Ok(RunReport {
        success: failure.is_none(),
        failure,
        completion_time: global_t,
        xy_err: metrics.xy_sum / n,
        z_err: metrics.z_sum / n,
        disposition_err: metrics.disp_sum / n,
        adherence_score: metrics.adherence_sum / n,
        collision_events,
        replan_count: replan_total,
        segments,
    })
}

// ---------------------------------------------------------------------------
// Benchmark scenes
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SlalomParams {
    /// Corridor width, m.
    pub width: f64,
    pub baffle_count: usize,
    /// Opening left between a baffle and the far wall, m.
    pub gap: f64,
    /// Distance between consecutive baffles, m.
    pub baffle_spacing: f64,
}

impl Default for SlalomParams {
    fn default() -> Self {
        Self {
            width: 2.0,
            baffle_count: 5,
            gap: 1.2,
            baffle_spacing: 3.0,
        }
    }
}

/// Flat corridor with alternating baffle walls; landmarks `start` and
/// `end` at the two ends.
pub fn make_slalom(params: &SlalomParams) -> Scene {
    let cell = 0.25;
    let length = params.baffle_spacing * (params.baffle_count as f64 + 1.0) + 2.0;
    let w = params.width;
    let cols = (length / cell).round() as usize + 1;
    let rows = ((w + 1.0) / cell).round() as usize + 1;
    let wall = 0.3;

    let mut static_obstacles = vec![
        StaticObstacle {
            polygon: Polygon::rect(0.0, -wall, length, 0.0),
        },
        StaticObstacle {
            polygon: Polygon::rect(0.0, w, length, w + wall),
        },
    ];
    for i in 0..params.baffle_count {
        let x = params.baffle_spacing * (i as f64 + 1.0);
        let polygon = if i % 2 == 0 {
            // from the bottom wall, opening at the top
            Polygon::rect(x, -wall, x + wall, w - params.gap)
        } else {
            Polygon::rect(x, params.gap, x + wall, w + wall)
        };
        static_obstacles.push(StaticObstacle { polygon });
    }

    let mid = w / 2.0;
    Scene {
        heightmap: HeightMap::flat([0.0, -0.5], cell, rows, cols, 0.0),
        static_obstacles,
        top_obstacles: vec![],
        dynamic_obstacles: vec![],
        landmarks: vec![
            Landmark {
                name: "start".into(),
                cells: vec![[1.0, mid]],
            },
            Landmark {
                name: "end".into(),
                cells: vec![[length - 1.0, mid]],
            },
        ],
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PyramidParams {
    /// Scene side length, m.
    pub size: f64,
    /// Half-width of the square hill footprint, m.
    pub half_width: f64,
    /// Peak height, m.
    pub peak: f64,
}

impl Default for PyramidParams {
    fn default() -> Self {
        Self {
            size: 20.0,
            half_width: 4.0,
            peak: 2.0,
        }
    }
}

impl PyramidParams {
    /// Does `p` fall on the hill footprint?
    pub fn in_footprint(&self, p: Vec2) -> bool {
        let c = self.size / 2.0;
        (p.x - c).abs() <= self.half_width && (p.y - c).abs() <= self.half_width
    }
}

/// Flat apron around a central square hill (tent profile); landmarks west
/// and east of the hill.
pub fn make_pyramid(params: &PyramidParams) -> Scene {
    let cell = 0.25;
    let n = (params.size / cell).round() as usize + 1;
    let c = params.size / 2.0;
    let mut hm = HeightMap::flat([0.0, 0.0], cell, n, n, 0.0);
    for row in 0..n {
        for col in 0..n {
            let x = col as f64 * cell;
            let y = row as f64 * cell;
            let d = (x - c).abs().max((y - c).abs());
            if d < params.half_width {
                hm.set(row, col, params.peak * (1.0 - d / params.half_width));
            }
        }
    }
    Scene {
        heightmap: hm,
        static_obstacles: vec![],
        top_obstacles: vec![],
        dynamic_obstacles: vec![],
        landmarks: vec![
            Landmark {
                name: "west".into(),
                cells: vec![[2.0, c]],
            },
            Landmark {
                name: "east".into(),
                cells: vec![[params.size - 2.0, c]],
            },
        ],
    }
}

// ---------------------------------------------------------------------------
// Benchmarks
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub label: String,
    pub runs: usize,
    pub mean_time: f64,
    pub failure_rate: f64,
    pub mean_disposition_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoTable {
    pub schema_version: u32,
    pub rows: Vec<BenchRow>,
    /// (adaptive label, constant label) pairs with the closest mean times.
    pub matched_pairs: Vec<(String, String)>,
}

impl ParetoTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("label,runs,mean_time,failure_rate,mean_disposition_err\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{:.4},{:.4},{:.4}\n",
                r.label, r.runs, r.mean_time, r.failure_rate, r.mean_disposition_err
            ));
        }
        out
    }
}

fn slalom_request(scene: &Scene) -> RouteRequest {
    crate::instruct::parse_route(&["run from the start to the end"], "start", scene)
        .expect("slalom landmarks exist")
}

fn bench_config(base: &PlannerConfig, constant: Option<f64>) -> PlannerConfig {
    let mut cfg = base.clone();
    cfg.constant_speed = constant;
    cfg
}

fn run_bench_rows(
    scene: &Scene,
    request: &RouteRequest,
    configs: &[(String, PlannerConfig)],
    n_runs: usize,
    seed: u64,
) -> Vec<BenchRow> {
    let mut rows = Vec::with_capacity(configs.len());
    for (ci, (label, cfg)) in configs.iter().enumerate() {
        let mut times = 0.0;
        let mut fails = 0usize;
        let mut disp = 0.0;
        for run in 0..n_runs {
            let run_seed = seed
                .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                .wrapping_add((ci * 100_000 + run) as u64);
            let report = run_route(scene, request, cfg, run_seed)
                .expect("bench scenes always plan");
            times += report.completion_time;
            disp += report.disposition_err;
            if !report.success || !report.collision_events.is_empty() {
                fails += 1;
            }
        }
        let n = n_runs.max(1) as f64;
        rows.push(BenchRow {
            label: label.clone(),
            runs: n_runs,
            mean_time: times / n,
            failure_rate: fails as f64 / n,
            mean_disposition_err: disp / n,
        });
    }
    rows
}

/// Slalom Pareto study: adaptive QP configurations against constant-speed
/// baselines, `n_runs` disturbed runs each. `qp_configs` are (label,
/// config) pairs with `constant_speed` unset.
pub fn slalom_bench(
    qp_configs: &[(String, PlannerConfig)],
    constant_speeds: &[f64],
    n_runs: usize,
    seed: u64,
) -> ParetoTable {
    let scene = make_slalom(&SlalomParams::default());
    let request = slalom_request(&scene);

    let mut configs: Vec<(String, PlannerConfig)> = qp_configs.to_vec();
    let base = qp_configs
        .first()
        .map(|(_, c)| c.clone())
        .unwrap_or_default();
    for &c in constant_speeds {
        configs.push((format!("const-{c:.1}"), bench_config(&base, Some(c))));
    }

    let rows = run_bench_rows(&scene, &request, &configs, n_runs, seed);

    // matched-time pairing: for each adaptive row, the constant row whose
    // mean completion time is closest
    let n_adaptive = qp_configs.len();
    let mut matched_pairs = Vec::new();
    for a in &rows[..n_adaptive] {
        if let Some(best) = rows[n_adaptive..]
            .iter()
            .min_by(|x, y| {
                (x.mean_time - a.mean_time)
                    .abs()
                    .total_cmp(&(y.mean_time - a.mean_time).abs())
            })
        {
            matched_pairs.push((a.label.clone(), best.label.clone()));
        }
    }

    ParetoTable {
        schema_version: 1,
        rows,
        matched_pairs,
    }
}

/// Default family of adaptive configurations for the Pareto study: the
/// same planner with increasingly aggressive lateral-acceleration and
/// speed settings.
pub fn default_qp_configs() -> Vec<(String, PlannerConfig)> {
    [(1.0, 2.5), (2.0, 3.5), (3.0, 4.5), (4.0, 5.0)]
        .iter()
        .map(|&(a_lat, v_hi)| {
            let mut cfg = PlannerConfig {
                tracker: TrackerParams {
                    disturbance: 0.02,
                    ..TrackerParams::default()
                },
                ..PlannerConfig::default()
            };
            cfg.tracker.envelope.a_lat_max = a_lat;
            cfg.tracker.envelope.v_max = v_hi;
            (format!("qp-alat{a_lat:.1}-v{v_hi:.1}"), cfg)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomBenchReport {
    pub schema_version: u32,
    pub scenes: usize,
    pub full_success: usize,
    pub success_rate: f64,
    /// Failure label -> count; labels sorted for stable output.
    pub failure_taxonomy: std::collections::BTreeMap<String, usize>,
}

/// Randomized-route study: per scene, a random order over the landmarks
/// with a random locomotion verb per segment.
pub fn randomized_route_bench(
    n_scenes: usize,
    seed: u64,
    scene_cfg: &crate::scene::RandomSceneConfig,
    planner: &PlannerConfig,
) -> Result<RandomBenchReport, SimError> {
    let mut taxonomy = std::collections::BTreeMap::new();
    let mut full_success = 0usize;
    for i in 0..n_scenes {
        let scene_seed = seed.wrapping_add(i as u64);
        let scene = crate::scene::randomize_scene(scene_seed, scene_cfg)?;
        let mut rng = ChaCha8Rng::seed_from_u64(scene_seed ^ 0xABCD_EF01);

        // random landmark visiting order
        let mut order: Vec<usize> = (0..scene.landmarks.len()).collect();
        for j in (1..order.len()).rev() {
            order.swap(j, rng.gen_range(0..=j));
        }
        let verbs = ["walk", "run", "crouch", "crawl"];
        let texts: Vec<String> = order
            .windows(2)
            .map(|w| {
                format!(
                    "{} from the {} to the {}",
                    verbs[rng.gen_range(0..verbs.len())],
                    scene.landmarks[w[0]].name,
                    scene.landmarks[w[1]].name
                )
            })
            .collect();
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        let request =
            crate::instruct::parse_route(&refs, &scene.landmarks[order[0]].name, &scene)
                .expect("generated instructions are well-formed");

        match run_route(&scene, &request, planner, scene_seed) {
            Ok(report) if report.success => full_success += 1,
            Ok(report) => {
                let label = report.failure.unwrap_or_else(|| "unknown".into());
                *taxonomy.entry(label).or_insert(0) += 1;
            }
            Err(e) => {
                *taxonomy.entry(format!("planning: {e}")).or_insert(0) += 1;
            }
        }
    }
    Ok(RandomBenchReport {
        schema_version: 1,
        scenes: n_scenes,
        full_success,
        success_rate: full_success as f64 / n_scenes.max(1) as f64,
        failure_taxonomy: taxonomy,
    })
}
