//! Stage 3 of the planner: per-point speed caps from the motion envelope,
//! curvature and slope, and the minimum-time speed profile along the path.
//!
//! Two independent routes compute the profile: an iterative QP solve over
//! beta = v^2 and a classical two-pass forward-backward profiler. Both must
//! agree; the tests cross-check them on randomized instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Vec2;
use crate::instruct::LocomotionType;
use crate::refiner::{GeometricPath, PathSample};

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("head height {0} outside the envelope range [0.4, 1.47]")]
    HeightOutOfRange(f64),
    #[error("infeasible boundary conditions: {0}")]
    InfeasibleBoundary(String),
    #[error("profile has zero speed at interior arc length {0:.3} m; cannot advance")]
    StuckAtZeroSpeed(f64),
    #[error("path needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
}

/// Motion envelope and acceleration limits of the agent.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvelopeParams {
    /// Minimal head height (crawl), m.
    pub z_min: f64,
    /// Absolute speed ceiling, m/s.
    pub v_max: f64,
    /// Longitudinal acceleration limit, m/s^2.
    pub a_max: f64,
    /// Longitudinal deceleration limit (negative), m/s^2.
    pub a_min: f64,
    /// Lateral acceleration limit, m/s^2.
    pub a_lat_max: f64,
    /// Uphill speed-derating factor (per unit slope).
    pub k_slope_up: f64,
    /// Downhill speed-derating factor (per unit slope).
    pub k_slope_down: f64,
}

impl Default for EnvelopeParams {
    fn default() -> Self {
        Self {
            z_min: 0.4,
            v_max: 5.0,
            a_max: 0.5,
            a_min: -0.1,
            a_lat_max: 2.0,
            k_slope_up: 1.0,
            k_slope_down: 0.5,
        }
    }
}

/// Height-coupled speed ceiling: linear from 1 m/s at crawl height up to
/// `v_max` at 1.2 m and above.
pub fn envelope_vmax(z: f64, params: &EnvelopeParams) -> Result<f64, ProfileError> {
    if !(params.z_min..=1.47).contains(&z) {
        return Err(ProfileError::HeightOutOfRange(z));
    }
    Ok((1.0 + 4.0 * (z - params.z_min) / (1.2 - params.z_min)).min(params.v_max))
}

/// Per-sample speed assignment along a path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedProfile {
    /// Speed at each path sample, m/s.
    pub v: Vec<f64>,
    /// Squared speeds (the QP decision variables).
    pub beta: Vec<f64>,
    pub completion_time: f64,
    pub diagnostics: SolverDiagnostics,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverDiagnostics {
    pub iterations: usize,
    pub max_constraint_violation: f64,
    /// Segment indices excluded from the time integral because both end
    /// speeds are zero.
    pub zero_segments: Vec<usize>,
}

/// Trapezoidal travel-time integral over the per-segment speeds.
fn completion_time(v: &[f64], spacing: f64) -> (f64, Vec<f64>, Vec<usize>) {
    let mut t = 0.0;
    let mut cumulative = Vec::with_capacity(v.len());
    let mut zero_segments = Vec::new();
    cumulative.push(0.0);
    for i in 0..v.len() - 1 {
        let pair = v[i] + v[i + 1];
        if pair <= 0.0 {
            zero_segments.push(i);
        } else {
            t += 2.0 * spacing / pair;
        }
        cumulative.push(t);
    }
    (t, cumulative, zero_segments)
}

fn profile_from_beta(beta: Vec<f64>, spacing: f64, diagnostics: SolverDiagnostics) -> SpeedProfile {
    let v: Vec<f64> = beta.iter().map(|b| b.max(0.0).sqrt()).collect();
    let (t, _, zero_segments) = completion_time(&v, spacing);
    SpeedProfile {
        v,
        beta,
        completion_time: t,
        diagnostics: SolverDiagnostics {
            zero_segments,
            ..diagnostics
        },
    }
}

/// Per-sample speed caps: locomotion range, height envelope, curvature
/// (lateral acceleration) and slope derating.
pub fn point_speed_caps(
    path: &GeometricPath,
    params: &EnvelopeParams,
    locomotion: &LocomotionType,
) -> Result<Vec<f64>, ProfileError> {
    let n = path.samples.len();
    let mut caps = Vec::with_capacity(n);
    for i in 0..n {
        let sample = &path.samples[i];
        let mut cap = locomotion.speed_range[1].min(envelope_vmax(sample.head_z, params)?);
        if sample.curvature > 0.0 {
            cap = cap.min((params.a_lat_max / sample.curvature).sqrt());
        }
        // slope from ground elevation differences
        let slope = if i + 1 < n {
            (path.samples[i + 1].ground_z - sample.ground_z)
                / (path.samples[i + 1].s - sample.s)
        } else if i > 0 {
            (sample.ground_z - path.samples[i - 1].ground_z) / (sample.s - path.samples[i - 1].s)
        } else {
            0.0
        };
        let derate = 1.0
            + params.k_slope_up * slope.max(0.0)
            + params.k_slope_down * (-slope).max(0.0);
        caps.push(cap / derate);
    }
    Ok(caps)
}

fn check_boundary(
    caps: &[f64],
    v_start: f64,
    v_end: Option<f64>,
) -> Result<(), ProfileError> {
    const TOL: f64 = 1e-9;
    if caps.len() < 2 {
        return Err(ProfileError::TooFewSamples(caps.len()));
    }
    if v_start > caps[0] + TOL {
        return Err(ProfileError::InfeasibleBoundary(format!(
            "start speed {v_start} exceeds the first sample cap {}",
            caps[0]
        )));
    }
    if let Some(v_end) = v_end {
        if v_end > caps[caps.len() - 1] + TOL {
            return Err(ProfileError::InfeasibleBoundary(format!(
                "end speed {v_end} exceeds the last sample cap {}",
                caps[caps.len() - 1]
            )));
        }
    }
    Ok(())
}

/// Classical two-pass speed profiler. The forward pass enforces the
/// acceleration bound, the backward pass the braking bound; the result is
/// the pointwise-maximal feasible profile and hence time-minimal.
pub fn forward_backward_oracle(
    path: &GeometricPath,
    caps: &[f64],
    params: &EnvelopeParams,
    v_start: f64,
    v_end: Option<f64>,
) -> Result<SpeedProfile, ProfileError> {
    check_boundary(caps, v_start, v_end)?;
    let n = caps.len();
    let ds = path.spacing;
    let mut beta: Vec<f64> = caps.iter().map(|c| c * c).collect();
    beta[0] = beta[0].min(v_start * v_start);
    for i in 1..n {
        beta[i] = beta[i].min(beta[i - 1] + 2.0 * params.a_max * ds);
    }
    if let Some(v_end) = v_end {
        if beta[n - 1] + 1e-9 < v_end * v_end {
            return Err(ProfileError::InfeasibleBoundary(format!(
                "end speed {v_end} unreachable: acceleration-limited maximum at the path end is {}",
                beta[n - 1].sqrt()
            )));
        }
        beta[n - 1] = v_end * v_end;
    }
    for i in (0..n - 1).rev() {
        beta[i] = beta[i].min(beta[i + 1] + 2.0 * params.a_min.abs() * ds);
    }
    if beta[0] + 1e-9 < v_start * v_start {
        return Err(ProfileError::InfeasibleBoundary(format!(
            "start speed {v_start} too high to brake within the path at a_min={}",
            params.a_min
        )));
    }
    beta[0] = v_start * v_start;
    Ok(profile_from_beta(beta, ds, SolverDiagnostics::default()))
}

/// Minimum-time QP over beta = v^2: maximize speeds toward the caps
/// (objective sum (cap^2 - beta)^2) subject to box, boundary and
/// acceleration-band constraints. Solved by fixed-point iteration on the
/// active constraint set; converges to the componentwise-maximal feasible
/// point, which minimizes travel time.
pub fn solve_min_time_qp(
    path: &GeometricPath,
    caps: &[f64],
    params: &EnvelopeParams,
    v_start: f64,
    v_end: Option<f64>,
) -> Result<SpeedProfile, ProfileError> {
    check_boundary(caps, v_start, v_end)?;
    let n = caps.len();
    let ds = path.spacing;
    let accel_slack = 2.0 * params.a_max * ds;
    let brake_slack = 2.0 * params.a_min.abs() * ds;
    const TOL: f64 = 1e-8;
    const MAX_ITERS: usize = 1_000_000;

    let mut beta: Vec<f64> = caps.iter().map(|c| c * c).collect();
    beta[0] = v_start * v_start;
    let end_fixed = v_end.map(|v| v * v);
    if let Some(b) = end_fixed {
        beta[n - 1] = b.min(beta[n - 1]);
    }

    // Jacobi iteration: each variable drops to the tightest bound implied
    // by its neighbors. Monotone non-increasing and bounded below by the
    // true solution, so it converges.
    let mut iterations = 0;
    let mut next = beta.clone();
    loop {
        iterations += 1;
        let mut max_change: f64 = 0.0;
        for i in 0..n {
            let mut b = caps[i] * caps[i];
            // the pinned endpoints never drop: infeasibility must surface
            // as a violated band, not a silently relaxed boundary
            if i == 0 {
                b = v_start * v_start;
            } else {
                b = b.min(beta[i - 1] + accel_slack);
                if i == n - 1 {
                    if let Some(fixed) = end_fixed {
                        b = fixed;
                    }
                }
            }
            if i > 0 && i < n - 1 {
                b = b.min(beta[i + 1] + brake_slack);
            }
            max_change = max_change.max((beta[i] - b).abs());
            next[i] = b;
        }
        std::mem::swap(&mut beta, &mut next);
        if max_change < TOL * 1e-2 || iterations >= MAX_ITERS {
            break;
        }
    }

    // boundary feasibility: the equality-pinned endpoints must sit inside
    // the acceleration band implied by their neighbors
    let mut max_violation: f64 = 0.0;
    if n >= 2 {
        let brake_need = beta[0] - (beta[1] + brake_slack);
        if brake_need > TOL {
            return Err(ProfileError::InfeasibleBoundary(format!(
                "start speed {v_start} too high to brake within the path at a_min={}",
                params.a_min
            )));
        }
        if end_fixed.is_some() {
            let reach_need = beta[n - 1] - (beta[n - 2] + accel_slack);
            if reach_need > TOL {
                return Err(ProfileError::InfeasibleBoundary(format!(
                    "end speed {} unreachable under a_max={}",
                    v_end.unwrap(),
                    params.a_max
                )));
            }
            max_violation = max_violation.max(reach_need.max(0.0));
        }
        max_violation = max_violation.max(brake_need.max(0.0));
    }
    for i in 0..n - 1 {
        let d = beta[i + 1] - beta[i];
        max_violation = max_violation
            .max(d - accel_slack)
            .max(-brake_slack - d)
            .max(0.0);
    }

    Ok(profile_from_beta(
        beta,
        ds,
        SolverDiagnostics {
            iterations,
            max_constraint_violation: max_violation,
            zero_segments: vec![],
        },
    ))
}

/// Time-stamped waypoint consumed by the tracker. `head_z` is absolute
/// (terrain elevation plus head height above ground).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub head_z: f64,
    pub v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub rate: f64,
    pub waypoints: Vec<Waypoint>,
}

impl Trajectory {
    pub fn duration(&self) -> f64 {
        self.waypoints.last().map_or(0.0, |w| w.t)
    }

    /// Waypoint index active at time `t` (clamped to the last one).
    pub fn index_at(&self, t: f64) -> usize {
        // waypoints sit on the dt grid; the epsilon absorbs accumulated
        // rounding in t so k*dt maps to index k
        ((t * self.rate + 1e-9).floor() as usize).min(self.waypoints.len() - 1)
    }
}

/// Convert (path, profile) into waypoints at a fixed control rate.
/// Within a profile segment, beta is linear in s (constant acceleration),
/// so arc length advances in closed form; waypoint states are linearly
/// interpolated along the path.
pub fn to_trajectory(
    path: &GeometricPath,
    profile: &SpeedProfile,
    rate: f64,
) -> Result<Trajectory, ProfileError> {
    let n = path.samples.len();
    if n < 2 {
        return Err(ProfileError::TooFewSamples(n));
    }
    let (total_time, cumulative, zero_segments) = completion_time(&profile.v, path.spacing);
    // an interior all-zero segment means the agent can never pass it
    for &i in &zero_segments {
        if i + 1 < n - 1 || profile.v[n - 1] > 0.0 {
            return Err(ProfileError::StuckAtZeroSpeed(path.samples[i].s));
        }
    }
    let dt = 1.0 / rate;
    let count = (total_time * rate).ceil() as usize + 1;
    let mut waypoints = Vec::with_capacity(count);
    let mut seg = 0usize;
    for k in 0..count {
        let t = k as f64 * dt;
        let (s, v) = if t >= total_time {
            (path.total_length(), profile.v[n - 1])
        } else {
            while seg + 2 < n && cumulative[seg + 1] <= t {
                seg += 1;
            }
            let tau = t - cumulative[seg];
            let v0 = profile.v[seg];
            let v1 = profile.v[seg + 1];
            let a = (v1 * v1 - v0 * v0) / (2.0 * path.spacing);
            let s = path.samples[seg].s + v0 * tau + 0.5 * a * tau * tau;
            (s.min(path.total_length()), v0 + a * tau)
        };
        let (pos, ground_z, head_z) = path.state_at(s);
        waypoints.push(Waypoint {
            t,
            x: pos.x,
            y: pos.y,
            head_z: ground_z + head_z,
            v,
        });
    }
    // final waypoint lands on the path end
    if let Some(last) = waypoints.last_mut() {
        let (pos, ground_z, head_z) = path.state_at(path.total_length());
        last.x = pos.x;
        last.y = pos.y;
        last.head_z = ground_z + head_z;
    }
    Ok(Trajectory { rate, waypoints })
}

#[derive(Debug, Clone)]
pub struct TrainingPathParams {
    pub length: f64,
    pub spacing: f64,
    /// |d head_z / ds| bound, m per m.
    pub max_height_rate: f64,
}

impl Default for TrainingPathParams {
    fn default() -> Self {
        Self {
            length: 20.0,
            spacing: 0.25,
            max_height_rate: 0.5,
        }
    }
}

/// Random training path: smooth random head heights in [0.4, 1.47] and a
/// per-sample speed drawn uniformly below the height envelope.
pub fn sample_training_path(
    seed: u64,
    params: &TrainingPathParams,
    envelope: &EnvelopeParams,
) -> (GeometricPath, SpeedProfile) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = (params.length / params.spacing).round() as usize + 1;
    let mut head_z = rng.gen_range(0.4..=1.47);
    let mut samples = Vec::with_capacity(n);
    let mut speeds = Vec::with_capacity(n);
    for i in 0..n {
        let s = i as f64 * params.spacing;
        let vmax = envelope_vmax(head_z, envelope).expect("head height stays in range");
        speeds.push(rng.gen_range(0.0..=vmax));
        samples.push(PathSample {
            position: Vec2::new(s, 0.0),
            ground_z: 0.0,
            head_z,
            s,
            curvature: 0.0,
        });
        let step = params.max_height_rate * params.spacing;
        head_z = (head_z + rng.gen_range(-step..=step)).clamp(0.4, 1.47);
    }
    let path = GeometricPath {
        samples,
        spacing: params.spacing,
        locomotion: LocomotionType::walk(),
        degraded: false,
    };
    let beta = speeds.iter().map(|v| v * v).collect();
    let profile = profile_from_beta(beta, params.spacing, SolverDiagnostics::default());
    (path, profile)
}
