//! The 3D scene model: heightmap terrain, static walls, height-limiting
//! ("top") obstacles, rule-driven dynamic obstacles and named landmarks,
//! plus the JSON document format and the randomized scene generator.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::geom::{Polygon, Vec2};

pub const SCENE_FORMAT_VERSION: u64 = 1;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("scene parse error: {0}")]
    Parse(String),
    #[error("scene validation error at {path}: {message}")]
    Validation { path: String, message: String },
    #[error("query point ({0}, {1}) outside heightmap extent")]
    OutOfExtent(f64, f64),
    #[error("unknown dynamic obstacle id `{0}`")]
    UnknownObstacle(String),
    #[error("scene randomization exhausted {0} retries without a fully reachable landmark set")]
    RetryBudgetExhausted(usize),
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> SceneError {
    SceneError::Validation {
        path: path.into(),
        message: message.into(),
    }
}

/// Regular grid of terrain elevations. Samples sit at
/// `origin + (col, row) * cell_size`; queries between samples are
/// bilinearly interpolated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeightMap {
    pub origin: [f64; 2],
    pub cell_size: f64,
    pub rows: usize,
    pub cols: usize,
    pub heights: Vec<f64>,
}

impl HeightMap {
    pub fn flat(origin: [f64; 2], cell_size: f64, rows: usize, cols: usize, height: f64) -> Self {
        Self {
            origin,
            cell_size,
            rows,
            cols,
            heights: vec![height; rows * cols],
        }
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.heights[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, h: f64) {
        self.heights[row * self.cols + col] = h;
    }

    /// World position of a grid sample.
    pub fn node_position(&self, row: usize, col: usize) -> Vec2 {
        Vec2::new(
            self.origin[0] + col as f64 * self.cell_size,
            self.origin[1] + row as f64 * self.cell_size,
        )
    }

    pub fn extent(&self) -> ([f64; 2], [f64; 2]) {
        (
            self.origin,
            [
                self.origin[0] + (self.cols - 1) as f64 * self.cell_size,
                self.origin[1] + (self.rows - 1) as f64 * self.cell_size,
            ],
        )
    }

    pub fn in_extent(&self, p: Vec2) -> bool {
        let (lo, hi) = self.extent();
        p.x >= lo[0] && p.x <= hi[0] && p.y >= lo[1] && p.y <= hi[1]
    }

    /// Bilinear interpolation of the four surrounding samples.
    pub fn height_at(&self, p: Vec2) -> Result<f64, SceneError> {
        if !self.in_extent(p) {
            return Err(SceneError::OutOfExtent(p.x, p.y));
        }
        let fx = (p.x - self.origin[0]) / self.cell_size;
        let fy = (p.y - self.origin[1]) / self.cell_size;
        let c0 = (fx.floor() as usize).min(self.cols - 2);
        let r0 = (fy.floor() as usize).min(self.rows - 2);
        let tx = fx - c0 as f64;
        let ty = fy - r0 as f64;
        let h00 = self.at(r0, c0);
        let h01 = self.at(r0, c0 + 1);
        let h10 = self.at(r0 + 1, c0);
        let h11 = self.at(r0 + 1, c0 + 1);
        Ok(h00 * (1.0 - tx) * (1.0 - ty)
            + h01 * tx * (1.0 - ty)
            + h10 * (1.0 - tx) * ty
            + h11 * tx * ty)
    }

    fn validate(&self) -> Result<(), SceneError> {
        if self.cell_size <= 0.0 || !self.cell_size.is_finite() {
            return Err(invalid("heightmap.cell_size", "must be positive and finite"));
        }
        if self.rows < 2 || self.cols < 2 {
            return Err(invalid("heightmap", "grid must be at least 2x2"));
        }
        if self.heights.len() != self.rows * self.cols {
            return Err(invalid(
                "heightmap.heights",
                format!(
                    "expected {} samples ({} rows x {} cols), got {}",
                    self.rows * self.cols,
                    self.rows,
                    self.cols,
                    self.heights.len()
                ),
            ));
        }
        if let Some(i) = self.heights.iter().position(|h| !h.is_finite()) {
            return Err(invalid(
                format!("heightmap.heights[{i}]"),
                "height sample is not finite",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaticObstacle {
    pub polygon: Polygon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopObstacle {
    pub polygon: Polygon,
    /// Vertical free space above ground beneath the obstacle, in meters.
    pub clearance_height: f64,
}

/// Deterministic motion rule: position(t) is fully determined for t >= 0.
#[derive(Debug, Clone, PartialEq)]
pub enum MotionRule {
    Linear {
        start: Vec2,
        velocity: Vec2,
    },
    WaypointLoop {
        waypoints: Vec<Vec2>,
        speed: f64,
    },
    Bounce {
        start: Vec2,
        velocity: Vec2,
        bounds: [[f64; 2]; 2], // [[x_min, x_max], [y_min, y_max]]
    },
}

impl MotionRule {
    pub fn position(&self, t: f64) -> Vec2 {
        match self {
            MotionRule::Linear { start, velocity } => start.add(velocity.scale(t)),
            MotionRule::WaypointLoop { waypoints, speed } => {
                let n = waypoints.len();
                if n == 1 || *speed == 0.0 {
                    return waypoints[0];
                }
                let legs: Vec<f64> = (0..n)
                    .map(|i| waypoints[i].dist(waypoints[(i + 1) % n]))
                    .collect();
                let perimeter: f64 = legs.iter().sum();
                if perimeter == 0.0 {
                    return waypoints[0];
                }
                let mut d = (speed * t) % perimeter;
                for i in 0..n {
                    if d <= legs[i] || i == n - 1 {
                        let f = if legs[i] > 0.0 { d / legs[i] } else { 0.0 };
                        return waypoints[i].lerp(waypoints[(i + 1) % n], f);
                    }
                    d -= legs[i];
                }
                unreachable!()
            }
            MotionRule::Bounce {
                start,
                velocity,
                bounds,
            } => Vec2::new(
                reflect_walk(start.x + velocity.x * t, bounds[0][0], bounds[0][1]),
                reflect_walk(start.y + velocity.y * t, bounds[1][0], bounds[1][1]),
            ),
        }
    }

    fn validate(&self, path: &str) -> Result<(), SceneError> {
        match self {
            MotionRule::Linear { .. } => Ok(()),
            MotionRule::WaypointLoop { waypoints, speed } => {
                if waypoints.is_empty() {
                    return Err(invalid(format!("{path}.waypoints"), "must be non-empty"));
                }
                if *speed < 0.0 {
                    return Err(invalid(format!("{path}.speed"), "must be non-negative"));
                }
                Ok(())
            }
            MotionRule::Bounce { start, bounds, .. } => {
                for (axis, b) in bounds.iter().enumerate() {
                    if b[0] >= b[1] {
                        return Err(invalid(
                            format!("{path}.bounds[{axis}]"),
                            "lower bound must be below upper bound",
                        ));
                    }
                }
                if start.x < bounds[0][0]
                    || start.x > bounds[0][1]
                    || start.y < bounds[1][0]
                    || start.y > bounds[1][1]
                {
                    return Err(invalid(format!("{path}.start"), "start outside bounds"));
                }
                Ok(())
            }
        }
    }
}

/// Map an unbounded 1D coordinate into [lo, hi] by reflection (triangle wave).
fn reflect_walk(u: f64, lo: f64, hi: f64) -> f64 {
    let span = hi - lo;
    if span <= 0.0 {
        return lo;
    }
    let period = 2.0 * span;
    let mut v = (u - lo).rem_euclid(period);
    if v > span {
        v = period - v;
    }
    lo + v
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicObstacle {
    pub id: String,
    pub radius: f64,
    pub rule: MotionRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Landmark {
    pub name: String,
    pub cells: Vec<[f64; 2]>,
}

impl Landmark {
    /// Centroid of the landmark cells, used as goal-reached reference.
    pub fn centroid(&self) -> Vec2 {
        let n = self.cells.len() as f64;
        let (sx, sy) = self
            .cells
            .iter()
            .fold((0.0, 0.0), |(sx, sy), c| (sx + c[0], sy + c[1]));
        Vec2::new(sx / n, sy / n)
    }
}

/// Immutable after validation; all planner stages take `&Scene`.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub heightmap: HeightMap,
    pub static_obstacles: Vec<StaticObstacle>,
    pub top_obstacles: Vec<TopObstacle>,
    pub dynamic_obstacles: Vec<DynamicObstacle>,
    pub landmarks: Vec<Landmark>,
}

impl Scene {
    pub fn validate(&self) -> Result<(), SceneError> {
        self.heightmap.validate()?;
        for (i, o) in self.static_obstacles.iter().enumerate() {
            if !o.polygon.is_simple() {
                return Err(invalid(
                    format!("static_obstacles[{i}].polygon"),
                    "polygon must be simple with at least 3 vertices",
                ));
            }
        }
        for (i, o) in self.top_obstacles.iter().enumerate() {
            if !o.polygon.is_simple() {
                return Err(invalid(
                    format!("top_obstacles[{i}].polygon"),
                    "polygon must be simple with at least 3 vertices",
                ));
            }
            if o.clearance_height <= 0.0 {
                return Err(invalid(
                    format!("top_obstacles[{i}].clearance_height"),
                    "must be positive",
                ));
            }
        }
        let mut ids = HashSet::new();
        for (i, o) in self.dynamic_obstacles.iter().enumerate() {
            if o.radius <= 0.0 {
                return Err(invalid(
                    format!("dynamic_obstacles[{i}].radius"),
                    "must be positive",
                ));
            }
            if !ids.insert(o.id.as_str()) {
                return Err(invalid(
                    format!("dynamic_obstacles[{i}].id"),
                    format!("duplicate id `{}`", o.id),
                ));
            }
            o.rule.validate(&format!("dynamic_obstacles[{i}].rule"))?;
        }
        if self.landmarks.is_empty() {
            return Err(invalid("landmarks", "at least one landmark is required"));
        }
        let mut names = HashSet::new();
        for (i, lm) in self.landmarks.iter().enumerate() {
            if lm.name.is_empty() {
                return Err(invalid(format!("landmarks[{i}].name"), "must be non-empty"));
            }
            if !names.insert(lm.name.as_str()) {
                return Err(invalid(
                    format!("landmarks[{i}].name"),
                    format!("duplicate landmark name `{}`", lm.name),
                ));
            }
            if lm.cells.is_empty() {
                return Err(invalid(
                    format!("landmarks[{i}].cells"),
                    "must be non-empty",
                ));
            }
            for (j, cell) in lm.cells.iter().enumerate() {
                let p = Vec2::from(*cell);
                if !self.heightmap.in_extent(p) {
                    return Err(invalid(
                        format!("landmarks[{i}].cells[{j}]"),
                        format!("landmark `{}` cell outside heightmap extent", lm.name),
                    ));
                }
                for (k, o) in self.static_obstacles.iter().enumerate() {
                    if o.polygon.contains(p) {
                        return Err(invalid(
                            format!("landmarks[{i}].cells[{j}]"),
                            format!(
                                "landmark `{}` cell lies inside static_obstacles[{k}]",
                                lm.name
                            ),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn terrain_height(&self, p: Vec2) -> Result<f64, SceneError> {
        self.heightmap.height_at(p)
    }

    /// Minimum clearance over all top obstacles covering `p`; +inf when none.
    pub fn clearance_at(&self, p: Vec2) -> Result<f64, SceneError> {
        if !self.heightmap.in_extent(p) {
            return Err(SceneError::OutOfExtent(p.x, p.y));
        }
        Ok(self
            .top_obstacles
            .iter()
            .filter(|o| o.polygon.contains(p))
            .map(|o| o.clearance_height)
            .fold(f64::INFINITY, f64::min))
    }

    pub fn obstacle_position(&self, id: &str, t: f64) -> Result<Vec2, SceneError> {
        let o = self
            .dynamic_obstacles
            .iter()
            .find(|o| o.id == id)
            .ok_or_else(|| SceneError::UnknownObstacle(id.to_string()))?;
        Ok(o.rule.position(t))
    }

    pub fn landmark(&self, name: &str) -> Option<&Landmark> {
        self.landmarks
            .iter()
            .find(|l| l.name.eq_ignore_ascii_case(name))
    }
}

// ---------------------------------------------------------------------------
// JSON document format (version 1)
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneDoc {
    version: u64,
    heightmap: HeightMap,
    static_obstacles: Vec<StaticObstacle>,
    top_obstacles: Vec<TopObstacle>,
    dynamic_obstacles: Vec<DynamicObstacleDoc>,
    landmarks: Vec<Landmark>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DynamicObstacleDoc {
    id: String,
    radius: f64,
    rule: Value,
}

fn rule_to_value(rule: &MotionRule) -> Value {
    match rule {
        MotionRule::Linear { start, velocity } => serde_json::json!({
            "kind": "linear",
            "start": [start.x, start.y],
            "velocity": [velocity.x, velocity.y],
        }),
        MotionRule::WaypointLoop { waypoints, speed } => serde_json::json!({
            "kind": "waypoint-loop",
            "waypoints": waypoints.iter().map(|w| [w.x, w.y]).collect::<Vec<_>>(),
            "speed": speed,
        }),
        MotionRule::Bounce {
            start,
            velocity,
            bounds,
        } => serde_json::json!({
            "kind": "bounce",
            "start": [start.x, start.y],
            "velocity": [velocity.x, velocity.y],
            "bounds": bounds,
        }),
    }
}

fn rule_from_value(value: &Value, path: &str) -> Result<MotionRule, SceneError> {
    let obj = value
        .as_object()
        .ok_or_else(|| SceneError::Parse(format!("{path}: rule must be an object")))?;
    let kind = obj
        .get("kind")
        .and_then(Value::as_str)
        .ok_or_else(|| SceneError::Parse(format!("{path}.kind: missing or not a string")))?;
    let allowed: &[&str] = match kind {
        "linear" => &["kind", "start", "velocity"],
        "waypoint-loop" => &["kind", "waypoints", "speed"],
        "bounce" => &["kind", "start", "velocity", "bounds"],
        other => {
            return Err(SceneError::Parse(format!(
                "{path}.kind: unknown motion rule kind `{other}`"
            )))
        }
    };
    for key in obj.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(SceneError::Parse(format!(
                "{path}.{key}: unknown key for `{kind}` rule"
            )));
        }
    }
    let get_vec2 = |field: &str| -> Result<Vec2, SceneError> {
        let v: [f64; 2] = serde_json::from_value(
            obj.get(field)
                .cloned()
                .ok_or_else(|| SceneError::Parse(format!("{path}.{field}: missing")))?,
        )
        .map_err(|e| SceneError::Parse(format!("{path}.{field}: {e}")))?;
        Ok(v.into())
    };
    match kind {
        "linear" => Ok(MotionRule::Linear {
            start: get_vec2("start")?,
            velocity: get_vec2("velocity")?,
        }),
        "waypoint-loop" => {
            let waypoints: Vec<[f64; 2]> = serde_json::from_value(
                obj.get("waypoints")
                    .cloned()
                    .ok_or_else(|| SceneError::Parse(format!("{path}.waypoints: missing")))?,
            )
            .map_err(|e| SceneError::Parse(format!("{path}.waypoints: {e}")))?;
            let speed = obj
                .get("speed")
                .and_then(Value::as_f64)
                .ok_or_else(|| SceneError::Parse(format!("{path}.speed: missing or not a number")))?;
            Ok(MotionRule::WaypointLoop {
                waypoints: waypoints.into_iter().map(Vec2::from).collect(),
                speed,
            })
        }
        "bounce" => {
            let bounds: [[f64; 2]; 2] = serde_json::from_value(
                obj.get("bounds")
                    .cloned()
                    .ok_or_else(|| SceneError::Parse(format!("{path}.bounds: missing")))?,
            )
            .map_err(|e| SceneError::Parse(format!("{path}.bounds: {e}")))?;
            Ok(MotionRule::Bounce {
                start: get_vec2("start")?,
                velocity: get_vec2("velocity")?,
                bounds,
            })
        }
        _ => unreachable!(),
    }
}

pub fn load_scene(source: &[u8]) -> Result<Scene, SceneError> {
    let doc: SceneDoc =
        serde_json::from_slice(source).map_err(|e| SceneError::Parse(e.to_string()))?;
    if doc.version != SCENE_FORMAT_VERSION {
        return Err(SceneError::Parse(format!(
            "version: unsupported scene format version {} (expected {})",
            doc.version, SCENE_FORMAT_VERSION
        )));
    }
    let mut dynamic_obstacles = Vec::with_capacity(doc.dynamic_obstacles.len());
    for (i, o) in doc.dynamic_obstacles.into_iter().enumerate() {
        dynamic_obstacles.push(DynamicObstacle {
            rule: rule_from_value(&o.rule, &format!("dynamic_obstacles[{i}].rule"))?,
            id: o.id,
            radius: o.radius,
        });
    }
    let scene = Scene {
        heightmap: doc.heightmap,
        static_obstacles: doc.static_obstacles,
        top_obstacles: doc.top_obstacles,
        dynamic_obstacles,
        landmarks: doc.landmarks,
    };
    scene.validate()?;
    Ok(scene)
}

pub fn save_scene(scene: &Scene) -> Result<Vec<u8>, SceneError> {
    scene.validate()?;
    let doc = SceneDoc {
        version: SCENE_FORMAT_VERSION,
        heightmap: scene.heightmap.clone(),
        static_obstacles: scene.static_obstacles.clone(),
        top_obstacles: scene.top_obstacles.clone(),
        dynamic_obstacles: scene
            .dynamic_obstacles
            .iter()
            .map(|o| DynamicObstacleDoc {
                id: o.id.clone(),
                radius: o.radius,
                rule: rule_to_value(&o.rule),
            })
            .collect(),
        landmarks: scene.landmarks.clone(),
    };
    let mut out = serde_json::to_vec_pretty(&doc).map_err(|e| SceneError::Parse(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

// ---------------------------------------------------------------------------
// Randomized scene generator
// ---------------------------------------------------------------------------

/// Terrain patch classes mirrored from the experiment scenes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TerrainClass {
    Flat,
    Slope,
    Rough,
    Stairs,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RandomSceneConfig {
    /// Side length of the square scene, m.
    pub size: f64,
    /// Heightmap resolution, m per cell.
    pub cell_size: f64,
    /// Side length of one terrain patch tile, m.
    pub patch_size: f64,
    /// Terrain classes to draw patches from.
    pub terrain_mix: Vec<TerrainClass>,
    /// Rough terrain noise amplitude, m.
    pub rough_amplitude: f64,
    /// Stair riser height and tread depth, m.
    pub stair_height: f64,
    pub stair_depth: f64,
    /// Slope patch grade (rise over run).
    pub slope_grade: f64,
    pub wall_count: usize,
    pub top_obstacle_count: usize,
    pub dynamic_obstacle_count: usize,
    pub landmark_count: usize,
    /// Regeneration attempts before giving up on mutual reachability.
    pub retry_budget: usize,
}

impl Default for RandomSceneConfig {
    fn default() -> Self {
        Self {
            size: 24.0,
            cell_size: 0.25,
            patch_size: 6.0,
            terrain_mix: vec![
                TerrainClass::Flat,
                TerrainClass::Slope,
                TerrainClass::Rough,
                TerrainClass::Stairs,
            ],
            rough_amplitude: 0.06,
            stair_height: 0.17,
            stair_depth: 0.30,
            slope_grade: 0.3,
            wall_count: 6,
            top_obstacle_count: 2,
            dynamic_obstacle_count: 0,
            landmark_count: 4,
            retry_budget: 20,
        }
    }
}

const LANDMARK_NAMES: [&str; 8] = [
    "tree", "lake", "car", "swing", "bench", "rock", "gate", "well",
];

/// Patch elevation profile: zero at the tile border so patches join
/// without infeasible cliffs.
fn patch_height(
    class: TerrainClass,
    local_x: f64,
    local_y: f64,
    patch: f64,
    cfg: &RandomSceneConfig,
) -> f64 {
    // tent coordinate: 0 at the border, 1 at the tile center
    let tent = |u: f64| 1.0 - (2.0 * u / patch - 1.0).abs();
    match class {
        TerrainClass::Flat => 0.0,
        TerrainClass::Slope => cfg.slope_grade * 0.5 * patch * tent(local_x) * tent(local_y),
        TerrainClass::Rough => 0.0, // noise added per cell by the caller
        TerrainClass::Stairs => {
            let ramp = 0.5 * patch * tent(local_x) * tent(local_y) * cfg.slope_grade;
            (ramp / cfg.stair_height).floor() * cfg.stair_height
        }
    }
}

use rand::Rng as _;
use rand::SeedableRng as _;

/// Deterministic randomized scene: terrain patches, walls, top obstacles
/// and mutually reachable landmarks. Regenerates internally until the
/// landmarks share a connected component, up to the retry budget.
pub fn randomize_scene(seed: u64, cfg: &RandomSceneConfig) -> Result<Scene, SceneError> {
    use crate::route_graph::{build_graph, reachability, GraphParams};

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let cells = (cfg.size / cfg.cell_size).round() as usize + 1;
    let patches = (cfg.size / cfg.patch_size).ceil() as usize;

    for _ in 0..cfg.retry_budget {
        let mut hm = HeightMap::flat([0.0, 0.0], cfg.cell_size, cells, cells, 0.0);
        // assign a terrain class per patch tile
        let classes: Vec<TerrainClass> = (0..patches * patches)
            .map(|_| {
                if cfg.terrain_mix.is_empty() {
                    TerrainClass::Flat
                } else {
                    cfg.terrain_mix[rng.gen_range(0..cfg.terrain_mix.len())]
                }
            })
            .collect();
        for row in 0..cells {
            for col in 0..cells {
                let x = col as f64 * cfg.cell_size;
                let y = row as f64 * cfg.cell_size;
                let px = ((x / cfg.patch_size) as usize).min(patches - 1);
                let py = ((y / cfg.patch_size) as usize).min(patches - 1);
                let class = classes[py * patches + px];
                let mut h = patch_height(
                    class,
                    x - px as f64 * cfg.patch_size,
                    y - py as f64 * cfg.patch_size,
                    cfg.patch_size,
                    cfg,
                );
                if class == TerrainClass::Rough {
                    h += rng.gen_range(-cfg.rough_amplitude..=cfg.rough_amplitude);
                }
                hm.set(row, col, h);
            }
        }

        let mut static_obstacles = Vec::with_capacity(cfg.wall_count);
        for _ in 0..cfg.wall_count {
            let along_x = rng.gen_bool(0.5);
            let len = rng.gen_range(2.0..6.0);
            let thickness = 0.3;
            let x = rng.gen_range(1.0..cfg.size - len - 1.0);
            let y = rng.gen_range(1.0..cfg.size - len - 1.0);
            let poly = if along_x {
                Polygon::rect(x, y, x + len, y + thickness)
            } else {
                Polygon::rect(x, y, x + thickness, y + len)
            };
            static_obstacles.push(StaticObstacle { polygon: poly });
        }

        let mut top_obstacles = Vec::with_capacity(cfg.top_obstacle_count);
        for _ in 0..cfg.top_obstacle_count {
            let w = rng.gen_range(1.5..4.0);
            let d = rng.gen_range(1.5..4.0);
            let x = rng.gen_range(1.0..cfg.size - w - 1.0);
            let y = rng.gen_range(1.0..cfg.size - d - 1.0);
            top_obstacles.push(TopObstacle {
                polygon: Polygon::rect(x, y, x + w, y + d),
                clearance_height: rng.gen_range(0.6..1.2),
            });
        }

        let mut dynamic_obstacles = Vec::with_capacity(cfg.dynamic_obstacle_count);
        for i in 0..cfg.dynamic_obstacle_count {
            let speed = rng.gen_range(0.5..1.5);
            let angle: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            dynamic_obstacles.push(DynamicObstacle {
                id: format!("mover-{i}"),
                radius: rng.gen_range(0.2..0.5),
                rule: MotionRule::Bounce {
                    start: Vec2::new(
                        rng.gen_range(1.0..cfg.size - 1.0),
                        rng.gen_range(1.0..cfg.size - 1.0),
                    ),
                    velocity: Vec2::new(speed * angle.cos(), speed * angle.sin()),
                    bounds: [[0.5, cfg.size - 0.5], [0.5, cfg.size - 0.5]],
                },
            });
        }

        // landmarks on free ground, away from walls
        let mut landmarks = Vec::with_capacity(cfg.landmark_count);
        let mut placed = 0usize;
        let mut attempts = 0usize;
        while placed < cfg.landmark_count && attempts < 500 {
            attempts += 1;
            let p = Vec2::new(
                rng.gen_range(1.0..cfg.size - 1.0),
                rng.gen_range(1.0..cfg.size - 1.0),
            );
            let clear = static_obstacles
                .iter()
                .all(|o| o.polygon.distance_to_point(p) > 1.0)
                && top_obstacles.iter().all(|o| !o.polygon.contains(p))
                && landmarks
                    .iter()
                    .all(|l: &Landmark| l.centroid().dist(p) > 3.0);
            if !clear {
                continue;
            }
            // snap a small cluster of cells around the point
            let snap = |v: f64| (v / cfg.cell_size).round() * cfg.cell_size;
            let cells = vec![
                [snap(p.x), snap(p.y)],
                [snap(p.x) + cfg.cell_size, snap(p.y)],
                [snap(p.x), snap(p.y) + cfg.cell_size],
                [snap(p.x) + cfg.cell_size, snap(p.y) + cfg.cell_size],
            ];
            landmarks.push(Landmark {
                name: LANDMARK_NAMES[placed % LANDMARK_NAMES.len()].to_string(),
                cells,
            });
            placed += 1;
        }
        if placed < cfg.landmark_count {
            continue;
        }

        let scene = Scene {
            heightmap: hm,
            static_obstacles,
            top_obstacles,
            dynamic_obstacles,
            landmarks,
        };
        if scene.validate().is_err() {
            continue;
        }
        let Ok(graph) = build_graph(&scene, &GraphParams::default()) else {
            continue;
        };
        let matrix = reachability(&graph, &scene.landmarks);
        if matrix.iter().all(|row| row.iter().all(|&v| v)) {
            return Ok(scene);
        }
    }
    Err(SceneError::RetryBudgetExhausted(cfg.retry_budget))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    pub fn flat_scene(rows: usize, cols: usize, landmarks: Vec<Landmark>) -> Scene {
        Scene {
            heightmap: HeightMap::flat([0.0, 0.0], 1.0, rows, cols, 0.0),
            static_obstacles: vec![],
            top_obstacles: vec![],
            dynamic_obstacles: vec![],
            landmarks,
        }
    }

    fn two_landmarks() -> Vec<Landmark> {
        vec![
            Landmark {
                name: "tree".into(),
                cells: vec![[0.0, 0.0]],
            },
            Landmark {
                name: "lake".into(),
                cells: vec![[3.0, 3.0]],
            },
        ]
    }

    #[test]
    fn minimal_document_loads() {
        let doc = serde_json::json!({
            "version": 1,
            "heightmap": {
                "origin": [0.0, 0.0], "cell_size": 1.0,
                "rows": 4, "cols": 4, "heights": vec![0.0; 16],
            },
            "static_obstacles": [],
            "top_obstacles": [],
            "dynamic_obstacles": [],
            "landmarks": [
                {"name": "tree", "cells": [[0.0, 0.0]]},
                {"name": "lake", "cells": [[3.0, 3.0]]},
            ],
        });
        let scene = load_scene(doc.to_string().as_bytes()).unwrap();
        assert_eq!(scene.static_obstacles.len(), 0);
        assert_eq!(scene.top_obstacles.len(), 0);
        assert_eq!(scene.landmarks.len(), 2);
    }

    #[test]
    fn unknown_key_rejected() {
        let doc = serde_json::json!({
            "version": 1,
            "heightmap": {
                "origin": [0.0, 0.0], "cell_size": 1.0,
                "rows": 2, "cols": 2, "heights": [0.0, 0.0, 0.0, 0.0],
            },
            "static_obstacles": [],
            "top_obstacles": [],
            "dynamic_obstacles": [],
            "landmarks": [{"name": "a", "cells": [[0.0, 0.0]]}],
            "textures": [],
        });
        assert!(matches!(
            load_scene(doc.to_string().as_bytes()),
            Err(SceneError::Parse(_))
        ));
    }

    #[test]
    fn landmark_inside_wall_rejected() {
        let mut scene = flat_scene(4, 4, two_landmarks());
        scene.static_obstacles.push(StaticObstacle {
            polygon: Polygon::rect(2.0, 2.0, 3.5, 3.5),
        });
        let err = scene.validate().unwrap_err();
        match err {
            SceneError::Validation { path, message } => {
                assert!(path.contains("landmarks[1]"), "path was {path}");
                assert!(message.contains("lake"), "message was {message}");
            }
            other => panic!("expected validation error, got {other}"),
        }
    }

    #[test]
    fn save_load_round_trip() {
        let mut scene = flat_scene(4, 4, two_landmarks());
        scene.dynamic_obstacles.push(DynamicObstacle {
            id: "ball".into(),
            radius: 0.3,
            rule: MotionRule::Bounce {
                start: Vec2::new(1.0, 1.0),
                velocity: Vec2::new(0.5, 0.0),
                bounds: [[0.0, 3.0], [0.0, 3.0]],
            },
        });
        scene.top_obstacles.push(TopObstacle {
            polygon: Polygon::rect(1.0, 1.0, 2.0, 2.0),
            clearance_height: 0.9,
        });
        let bytes = save_scene(&scene).unwrap();
        let reloaded = load_scene(&bytes).unwrap();
        assert_eq!(scene, reloaded);
        // the motion rule survives verbatim in the document
        let text = String::from_utf8(bytes).unwrap();
        assert!(text.contains("\"bounce\""));
    }

    #[test]
    fn empty_landmarks_rejected_on_save() {
        let scene = flat_scene(4, 4, vec![]);
        assert!(matches!(
            save_scene(&scene),
            Err(SceneError::Validation { .. })
        ));
    }

    #[test]
    fn bilinear_interpolation() {
        let mut scene = flat_scene(4, 4, two_landmarks());
        assert_relative_eq!(scene.terrain_height(Vec2::new(1.3, 2.7)).unwrap(), 0.0);
        // grid node exact
        scene.heightmap.set(2, 1, 3.5);
        assert_relative_eq!(scene.terrain_height(Vec2::new(1.0, 2.0)).unwrap(), 3.5);
        // cell with corner heights (0, 0, 0, 4): center averages to 1
        let mut hm = HeightMap::flat([0.0, 0.0], 1.0, 2, 2, 0.0);
        hm.set(1, 1, 4.0);
        let scene2 = Scene {
            heightmap: hm,
            ..flat_scene(2, 2, vec![two_landmarks()[0].clone()])
        };
        assert_relative_eq!(scene2.terrain_height(Vec2::new(0.5, 0.5)).unwrap(), 1.0);
    }

    #[test]
    fn out_of_extent_is_error() {
        let scene = flat_scene(4, 4, two_landmarks());
        assert!(matches!(
            scene.terrain_height(Vec2::new(-0.1, 0.0)),
            Err(SceneError::OutOfExtent(..))
        ));
        assert!(matches!(
            scene.clearance_at(Vec2::new(10.0, 0.0)),
            Err(SceneError::OutOfExtent(..))
        ));
    }

    #[test]
    fn clearance_queries() {
        let mut scene = flat_scene(6, 6, two_landmarks());
        scene.top_obstacles.push(TopObstacle {
            polygon: Polygon::rect(1.0, 1.0, 3.0, 3.0),
            clearance_height: 0.9,
        });
        scene.top_obstacles.push(TopObstacle {
            polygon: Polygon::rect(2.0, 2.0, 4.0, 4.0),
            clearance_height: 0.5,
        });
        assert_eq!(scene.clearance_at(Vec2::new(5.0, 5.0)).unwrap(), f64::INFINITY);
        assert_relative_eq!(scene.clearance_at(Vec2::new(1.5, 1.5)).unwrap(), 0.9);
        // overlap takes the minimum
        assert_relative_eq!(scene.clearance_at(Vec2::new(2.5, 2.5)).unwrap(), 0.5);
    }

    #[test]
    fn linear_obstacle_position() {
        let mut scene = flat_scene(4, 4, two_landmarks());
        scene.dynamic_obstacles.push(DynamicObstacle {
            id: "cart".into(),
            radius: 0.2,
            rule: MotionRule::Linear {
                start: Vec2::new(0.0, 0.0),
                velocity: Vec2::new(1.0, 0.0),
            },
        });
        let p = scene.obstacle_position("cart", 2.0).unwrap();
        assert_relative_eq!(p.x, 2.0);
        assert_relative_eq!(p.y, 0.0);
        assert!(matches!(
            scene.obstacle_position("ghost", 0.0),
            Err(SceneError::UnknownObstacle(_))
        ));
    }

    /// Independent reflect-walk oracle: step the position in tiny increments,
    /// flipping velocity at the walls.
    fn bounce_oracle_1d(start: f64, v: f64, lo: f64, hi: f64, t: f64) -> f64 {
        let dt = 1e-5;
        let mut x = start;
        let mut v = v;
        let steps = (t / dt).round() as usize;
        for _ in 0..steps {
            x += v * dt;
            if x > hi {
                x = hi - (x - hi);
                v = -v;
            } else if x < lo {
                x = lo + (lo - x);
                v = -v;
            }
        }
        x
    }

    #[test]
    fn bounce_obstacle_position() {
        let rule = MotionRule::Bounce {
            start: Vec2::new(0.0, 0.0),
            velocity: Vec2::new(1.0, 0.0),
            bounds: [[0.0, 3.0], [-1.0, 1.0]],
        };
        let p = rule.position(4.0);
        assert_relative_eq!(p.x, 2.0, epsilon = 1e-9);
        for t in [0.5, 1.7, 3.0, 4.0, 7.25, 12.0] {
            let expect = bounce_oracle_1d(0.0, 1.0, 0.0, 3.0, t);
            assert_relative_eq!(rule.position(t).x, expect, epsilon = 1e-3);
        }
    }

    #[test]
    fn waypoint_loop_position() {
        let rule = MotionRule::WaypointLoop {
            waypoints: vec![Vec2::new(0.0, 0.0), Vec2::new(0.0, 2.0)],
            speed: 1.0,
        };
        // arc-length walk: 2 m out, then back; t=3 is 1 m into the return leg
        let p = rule.position(3.0);
        assert_relative_eq!(p.x, 0.0);
        assert_relative_eq!(p.y, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn linear_and_bounce_rules_preserve_speed() {
        let rules = [
            MotionRule::Linear {
                start: Vec2::new(0.5, 0.5),
                velocity: Vec2::new(0.7, -0.3),
            },
            MotionRule::Bounce {
                start: Vec2::new(0.5, 0.5),
                velocity: Vec2::new(0.7, -0.3),
                bounds: [[0.0, 2.0], [0.0, 2.0]],
            },
        ];
        let speed = Vec2::new(0.7, -0.3).norm();
        let dt = 1e-6;
        for rule in &rules {
            for t in [0.1, 0.9, 2.3, 5.7] {
                let v = rule.position(t + dt).sub(rule.position(t)).norm() / dt;
                // skip measure-zero bounce instants
                if (v - speed).abs() > 0.5 * speed {
                    continue;
                }
                assert_relative_eq!(v, speed, epsilon = 1e-3);
            }
        }
    }
}
