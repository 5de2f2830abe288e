//! Command implementations and SVG rendering for the `scenewalk` binary.
//!
//! Everything here is deterministic under an explicit seed, and all output
//! (CSV, JSON, SVG) is byte-stable: fixed float formatting, no timestamps,
//! no hash-map iteration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use scenewalk::geom::Vec2;
use scenewalk::instruct::parse_route_file;
use scenewalk::refiner::GeometricPath;
use scenewalk::scene::{load_scene, randomize_scene, save_scene, RandomSceneConfig, Scene};
use scenewalk::sim::{
    default_qp_configs, make_pyramid, plan_route, randomized_route_bench, run_route_traced,
    slalom_bench, PlannerConfig, PlannedRoute, PyramidParams,
};
use scenewalk::route_graph::{astar_to_landmark, build_graph};

/// Process failure carrying the exit code contract:
/// 1 usage, 2 planning failure, 3 IO/parse.
#[derive(Debug)]
pub enum AppError {
    Usage(String),
    Planning(String),
    Io(String),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Usage(_) => 1,
            AppError::Planning(_) => 2,
            AppError::Io(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            AppError::Usage(m) | AppError::Planning(m) | AppError::Io(m) => m,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

/// Flags shared by every command.
pub struct Common {
    pub scene: Option<PathBuf>,
    pub route: Option<PathBuf>,
    pub seed: u64,
    pub config: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub format: Format,
}

impl Common {
    /// Config-file values, overridden per-command by explicit flags.
    pub fn planner_config(&self) -> Result<PlannerConfig, AppError> {
        match &self.config {
            None => Ok(PlannerConfig::default()),
            Some(path) => {
                let bytes = read(path)?;
                serde_json::from_slice(&bytes)
                    .map_err(|e| AppError::Io(format!("{}: {e}", path.display())))
            }
        }
    }

    pub fn load_scene(&self) -> Result<Scene, AppError> {
        let path = self
            .scene
            .as_ref()
            .ok_or_else(|| AppError::Usage("--scene is required for this command".into()))?;
        load_scene(&read(path)?).map_err(|e| AppError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load_route(&self, scene: &Scene) -> Result<scenewalk::RouteRequest, AppError> {
        let path = self
            .route
            .as_ref()
            .ok_or_else(|| AppError::Usage("--route is required for this command".into()))?;
        let text = String::from_utf8(read(path)?)
            .map_err(|e| AppError::Io(format!("{}: {e}", path.display())))?;
        parse_route_file(&text, scene)
            .map_err(|e| AppError::Io(format!("{}: {e}", path.display())))
    }
}

fn read(path: &Path) -> Result<Vec<u8>, AppError> {
    std::fs::read(path).map_err(|e| AppError::Io(format!("{}: {e}", path.display())))
}

fn write_out(dir: &Path, name: &str, contents: &[u8]) -> Result<(), AppError> {
    std::fs::create_dir_all(dir).map_err(|e| AppError::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, contents)
        .map_err(|e| AppError::Io(format!("{}: {e}", path.display())))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn json_pretty<T: serde::Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("serializable output");
    bytes.push(b'\n');
    bytes
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct RenderSpec {
    /// Pixels per meter.
    pub scale: f64,
    /// Canvas margin, px.
    pub margin: f64,
    /// Speed at and below which the path is pure blue, m/s.
    pub blue_at: f64,
    /// Speed at and above which the path is pure red, m/s.
    pub red_at: f64,
}

impl Default for RenderSpec {
    fn default() -> Self {
        Self {
            scale: 30.0,
            margin: 20.0,
            blue_at: 1.0,
            red_at: 3.5,
        }
    }
}

/// Linear hue sweep blue (240 deg) -> red (0 deg) between the anchors.
pub fn speed_color(v: f64, spec: &RenderSpec) -> String {
    let t = ((v - spec.blue_at) / (spec.red_at - spec.blue_at)).clamp(0.0, 1.0);
    let hue = 240.0 * (1.0 - t);
    let (r, g, b) = hsv_to_rgb(hue, 1.0, 0.85);
    format!("#{r:02x}{g:02x}{b:02x}")
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> (u8, u8, u8) {
    let c = v * s;
    let hp = h / 60.0;
    let x = c * (1.0 - (hp % 2.0 - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    (
        ((r + m) * 255.0).round() as u8,
        ((g + m) * 255.0).round() as u8,
        ((b + m) * 255.0).round() as u8,
    )
}

/// Scene + speed-colored paths + dashed reference paths as an SVG document.
pub fn render_svg(
    scene: &Scene,
    paths: &[(&GeometricPath, &[f64])],
    references: &[&GeometricPath],
    spec: &RenderSpec,
) -> String {
    let hm = &scene.heightmap;
    let w_m = (hm.cols - 1) as f64 * hm.cell_size;
    let h_m = (hm.rows - 1) as f64 * hm.cell_size;
    let width = w_m * spec.scale + 2.0 * spec.margin;
    let height = h_m * spec.scale + 2.0 * spec.margin;
    // world -> pixel, y up
    let px = |p: Vec2| -> (f64, f64) {
        (
            spec.margin + (p.x - hm.origin[0]) * spec.scale,
            height - spec.margin - (p.y - hm.origin[1]) * spec.scale,
        )
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"#
    );
    let _ = writeln!(
        svg,
        r##"<rect width="{width:.0}" height="{height:.0}" fill="#ebebeb"/>"##
    );

    // terrain shading: darker with elevation; flat cells stay background
    let h_max = hm.heights.iter().cloned().fold(0.0_f64, f64::max);
    if h_max > 1e-9 {
        let _ = writeln!(svg, r#"<g class="terrain">"#);
        for row in 0..hm.rows - 1 {
            for col in 0..hm.cols - 1 {
                let h = hm.at(row, col);
                if h <= 1e-9 {
                    continue;
                }
                let shade = 235 - (120.0 * h / h_max).round() as i32;
                let (x, y) = px(Vec2::new(
                    hm.origin[0] + col as f64 * hm.cell_size,
                    hm.origin[1] + (row + 1) as f64 * hm.cell_size,
                ));
                let side = hm.cell_size * spec.scale;
                let _ = writeln!(
                    svg,
                    r##"<rect x="{x:.2}" y="{y:.2}" width="{side:.2}" height="{side:.2}" fill="rgb({shade},{shade},{shade})"/>"##
                );
            }
        }
        let _ = writeln!(svg, "</g>");
    }

    let polygon_points = |poly: &scenewalk::geom::Polygon| -> String {
        poly.vertices
            .iter()
            .map(|v| {
                let (x, y) = px(Vec2::new(v[0], v[1]));
                format!("{x:.2},{y:.2}")
            })
            .collect::<Vec<_>>()
            .join(" ")
    };

    let _ = writeln!(svg, r#"<g class="static-obstacles">"#);
    for o in &scene.static_obstacles {
        let _ = writeln!(
            svg,
            r##"<polygon points="{}" fill="#444444"/>"##,
            polygon_points(&o.polygon)
        );
    }
    let _ = writeln!(svg, "</g>");

    let _ = writeln!(svg, r#"<g class="top-obstacles">"#);
    for o in &scene.top_obstacles {
        let _ = writeln!(
            svg,
            r##"<polygon points="{}" fill="#5577aa" fill-opacity="0.35" stroke="#335588" stroke-width="1.5"/>"##,
            polygon_points(&o.polygon)
        );
    }
    let _ = writeln!(svg, "</g>");

    let _ = writeln!(svg, r#"<g class="landmarks">"#);
    for lm in &scene.landmarks {
        let (x, y) = px(lm.centroid());
        let _ = writeln!(
            svg,
            r##"<circle cx="{x:.2}" cy="{y:.2}" r="5" fill="#117711"/><text x="{:.2}" y="{:.2}" font-size="12" font-family="sans-serif" fill="#113311">{}</text>"##,
            x + 7.0,
            y + 4.0,
            lm.name
        );
    }
    let _ = writeln!(svg, "</g>");

    for reference in references {
        let points: String = reference
            .samples
            .iter()
            .map(|s| {
                let (x, y) = px(s.position);
                format!("{x:.2},{y:.2}")
            })
            .collect::<Vec<_>>()
            .join(" ");
        let _ = writeln!(
            svg,
            r##"<polyline class="reference" points="{points}" fill="none" stroke="#000000" stroke-width="1.5" stroke-dasharray="6 4"/>"##
        );
    }

    for (path, speeds) in paths {
        let _ = writeln!(svg, r#"<g class="path">"#);
        for i in 0..path.samples.len().saturating_sub(1) {
            let (x1, y1) = px(path.samples[i].position);
            let (x2, y2) = px(path.samples[i + 1].position);
            let v = speeds.get(i).copied().unwrap_or(0.0);
            let _ = writeln!(
                svg,
                r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="{}" stroke-width="3" stroke-linecap="round"/>"#,
                speed_color(v, spec)
            );
        }
        let _ = writeln!(svg, "</g>");
    }

    svg.push_str("</svg>\n");
    svg
}

/// Minimal scatter plot (labels + circles) for the Pareto figures.
pub fn scatter_svg(points: &[(String, f64, f64)], x_label: &str, y_label: &str) -> String {
    let (w, h, m) = (480.0, 360.0, 50.0);
    let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(_, x, y) in points {
        x_min = x_min.min(x);
        x_max = x_max.max(x);
        y_min = y_min.min(y);
        y_max = y_max.max(y);
    }
    if points.is_empty() {
        x_min = 0.0;
        x_max = 1.0;
        y_min = 0.0;
        y_max = 1.0;
    }
    let pad = |lo: &mut f64, hi: &mut f64| {
        let span = (*hi - *lo).max(1e-9);
        *lo -= 0.08 * span;
        *hi += 0.08 * span;
    };
    pad(&mut x_min, &mut x_max);
    pad(&mut y_min, &mut y_max);
    let sx = |x: f64| m + (x - x_min) / (x_max - x_min) * (w - 2.0 * m);
    let sy = |y: f64| h - m - (y - y_min) / (y_max - y_min) * (h - 2.0 * m);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}">"#
    );
    let _ = writeln!(svg, r##"<rect width="{w:.0}" height="{h:.0}" fill="#ffffff"/>"##);
    let _ = writeln!(
        svg,
        r##"<line x1="{m:.0}" y1="{:.0}" x2="{:.0}" y2="{:.0}" stroke="#000"/><line x1="{m:.0}" y1="{m:.0}" x2="{m:.0}" y2="{:.0}" stroke="#000"/>"##,
        h - m,
        w - m,
        h - m,
        h - m
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.0}" y="{:.0}" font-size="12" font-family="sans-serif" text-anchor="middle">{x_label}</text>"#,
        w / 2.0,
        h - 12.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="14" y="{:.0}" font-size="12" font-family="sans-serif" text-anchor="middle" transform="rotate(-90 14 {:.0})">{y_label}</text>"#,
        h / 2.0,
        h / 2.0
    );
    for (label, x, y) in points {
        let is_const = label.starts_with("const");
        let color = if is_const { "#cc3333" } else { "#3355cc" };
        let _ = writeln!(
            svg,
            r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="{color}"/><text x="{:.2}" y="{:.2}" font-size="9" font-family="sans-serif">{label}</text>"#,
            sx(*x),
            sy(*y),
            sx(*x) + 6.0,
            sy(*y) - 4.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

fn profile_csv(planned: &PlannedRoute) -> String {
    let mut out = String::from("s,v\n");
    for (sample, v) in planned.path.samples.iter().zip(&planned.profile.v) {
        let _ = writeln!(out, "{:.4},{:.4}", sample.s, v);
    }
    out
}

fn trajectory_csv(planned: &PlannedRoute) -> String {
    let mut out = String::from("t,x,y,head_z,v\n");
    for w in &planned.trajectory.waypoints {
        let _ = writeln!(
            out,
            "{:.4},{:.4},{:.4},{:.4},{:.4}",
            w.t, w.x, w.y, w.head_z, w.v
        );
    }
    out
}

fn trace_csv(rows: &[scenewalk::sim::TraceRow]) -> String {
    let mut out = String::from("t,x,y,head_z,speed\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{:.4},{:.4},{:.4},{:.4},{:.4}",
            r.t, r.x, r.y, r.head_z, r.speed
        );
    }
    out
}

pub fn cmd_plan(common: &Common, c_slope: Option<f64>) -> Result<(), AppError> {
    let scene = common.load_scene()?;
    let request = common.load_route(&scene)?;
    let mut config = common.planner_config()?;
    if let Some(c) = c_slope {
        config.graph.c_slope = c;
    }
    let planned =
        plan_route(&scene, &request, &config).map_err(|e| AppError::Planning(e.to_string()))?;

    #[derive(serde::Serialize)]
    struct SegmentSummary {
        instruction: String,
        length: f64,
        planned_time: f64,
        samples: usize,
        degraded: bool,
    }
    #[derive(serde::Serialize)]
    struct Summary {
        schema_version: u32,
        completion_time: f64,
        segments: Vec<SegmentSummary>,
    }

    let mut segments = Vec::new();
    for (i, seg) in planned.iter().enumerate() {
        write_out(&common.out_dir, &format!("path_{i}.csv"), seg.path.to_csv().as_bytes())?;
        write_out(
            &common.out_dir,
            &format!("profile_{i}.csv"),
            profile_csv(seg).as_bytes(),
        )?;
        match common.format {
            Format::Csv => write_out(
                &common.out_dir,
                &format!("trajectory_{i}.csv"),
                trajectory_csv(seg).as_bytes(),
            )?,
            Format::Json => write_out(
                &common.out_dir,
                &format!("trajectory_{i}.json"),
                &json_pretty(&seg.trajectory),
            )?,
        }
        segments.push(SegmentSummary {
            instruction: seg.instruction.clone(),
            length: seg.path.total_length(),
            planned_time: seg.profile.completion_time,
            samples: seg.path.samples.len(),
            degraded: seg.path.degraded,
        });
    }
    let summary = Summary {
        schema_version: 1,
        completion_time: segments.iter().map(|s| s.planned_time).sum(),
        segments,
    };
    write_out(&common.out_dir, "summary.json", &json_pretty(&summary))
}

pub fn cmd_simulate(
    common: &Common,
    sigma: Option<f64>,
    constant_speed: Option<f64>,
) -> Result<(), AppError> {
    let scene = common.load_scene()?;
    let request = common.load_route(&scene)?;
    let mut config = common.planner_config()?;
    if let Some(s) = sigma {
        config.tracker.disturbance = s;
    }
    if constant_speed.is_some() {
        config.constant_speed = constant_speed;
    }
    let mut trace = Vec::new();
    let report = run_route_traced(&scene, &request, &config, common.seed, &mut trace)
        .map_err(|e| AppError::Planning(e.to_string()))?;
    write_out(&common.out_dir, "report.json", &json_pretty(&report))?;
    match common.format {
        Format::Csv => write_out(&common.out_dir, "trace.csv", trace_csv(&trace).as_bytes()),
        Format::Json => write_out(&common.out_dir, "trace.json", &json_pretty(&trace)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchKind {
    Slalom,
    Pyramid,
    Random,
}

pub fn cmd_bench(
    common: &Common,
    kind: BenchKind,
    runs: usize,
    scenes: usize,
) -> Result<(), AppError> {
    match kind {
        BenchKind::Slalom => {
            let configs = default_qp_configs();
            let speeds = [1.0, 1.5, 2.0, 2.5, 3.0, 3.5];
            let table = slalom_bench(&configs, &speeds, runs, common.seed);
            match common.format {
                Format::Csv => {
                    write_out(&common.out_dir, "pareto.csv", table.to_csv().as_bytes())?
                }
                Format::Json => write_out(&common.out_dir, "pareto.json", &json_pretty(&table))?,
            }
            let fail_points: Vec<(String, f64, f64)> = table
                .rows
                .iter()
                .map(|r| (r.label.clone(), r.mean_time, r.failure_rate))
                .collect();
            let disp_points: Vec<(String, f64, f64)> = table
                .rows
                .iter()
                .map(|r| (r.label.clone(), r.mean_time, r.mean_disposition_err))
                .collect();
            write_out(
                &common.out_dir,
                "pareto_time_failure.svg",
                scatter_svg(&fail_points, "mean completion time [s]", "failure rate").as_bytes(),
            )?;
            write_out(
                &common.out_dir,
                "pareto_time_disposition.svg",
                scatter_svg(&disp_points, "mean completion time [s]", "mean disposition error [m]")
                    .as_bytes(),
            )
        }
        BenchKind::Pyramid => {
            let pp = PyramidParams::default();
            let scene = make_pyramid(&pp);
            let request = scenewalk::instruct::parse_route(
                &["walk from the west to the east"],
                "west",
                &scene,
            )
            .expect("pyramid landmarks exist");
            let mut out = String::from("c_slope,path_length,hill_arc_length,max_ground\n");
            for c_slope in [0.0, 0.6, 1.2, 1.8, 2.4, 3.0] {
                let mut config = common.planner_config()?;
                config.graph.c_slope = c_slope;
                let planned = plan_route(&scene, &request, &config)
                    .map_err(|e| AppError::Planning(e.to_string()))?;
                let path = &planned[0].path;
                let hill_arc = path
                    .samples
                    .iter()
                    .filter(|s| s.ground_z > 0.125 * pp.peak)
                    .count() as f64
                    * path.spacing;
                let max_ground = path.samples.iter().fold(0.0, |m, s| s.ground_z.max(m));
                let _ = writeln!(
                    out,
                    "{:.1},{:.4},{:.4},{:.4}",
                    c_slope,
                    path.total_length(),
                    hill_arc,
                    max_ground
                );
            }
            write_out(&common.out_dir, "pyramid_sweep.csv", out.as_bytes())
        }
        BenchKind::Random => {
            let config = common.planner_config()?;
            let report = randomized_route_bench(
                scenes,
                common.seed,
                &RandomSceneConfig::default(),
                &config,
            )
            .map_err(|e| AppError::Planning(e.to_string()))?;
            write_out(&common.out_dir, "random_bench.json", &json_pretty(&report))
        }
    }
}

pub fn cmd_randomize(common: &Common) -> Result<(), AppError> {
    let scene = randomize_scene(common.seed, &RandomSceneConfig::default())
        .map_err(|e| AppError::Planning(e.to_string()))?;
    let bytes = save_scene(&scene).map_err(|e| AppError::Io(e.to_string()))?;
    write_out(&common.out_dir, "scene.json", &bytes)
}

pub fn cmd_render(common: &Common) -> Result<(), AppError> {
    let scene = common.load_scene()?;
    let spec = RenderSpec::default();
    let svg = match &common.route {
        Some(_) => {
            let request = common.load_route(&scene)?;
            let config = common.planner_config()?;
            let planned = plan_route(&scene, &request, &config)
                .map_err(|e| AppError::Planning(e.to_string()))?;
            let layers: Vec<(&GeometricPath, &[f64])> = planned
                .iter()
                .map(|p| (&p.path, p.profile.v.as_slice()))
                .collect();
            let references: Vec<&GeometricPath> = planned.iter().map(|p| &p.path).collect();
            render_svg(&scene, &layers, &references, &spec)
        }
        None => render_svg(&scene, &[], &[], &spec),
    };
    write_out(&common.out_dir, "scene.svg", svg.as_bytes())
}

/// Sanity helper for tests: plan start -> each landmark must be reachable.
pub fn check_reachable(scene: &Scene, from: &str, to: &str) -> bool {
    let Ok(graph) = build_graph(scene, &Default::default()) else {
        return false;
    };
    let (Some(a), Some(b)) = (scene.landmark(from), scene.landmark(to)) else {
        return false;
    };
    astar_to_landmark(&graph, a.centroid(), b).is_ok()
}
