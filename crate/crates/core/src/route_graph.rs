//! Stage 1 of the planner: an 8-connected grid graph over the heightmap,
//! pruned by walls, low clearance and infeasible slopes, with multi-goal A*
//! to the nearest coordinate of a landmark.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Vec2;
use crate::scene::{Landmark, Scene, SceneError};

pub const SQRT2: f64 = std::f64::consts::SQRT_2;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("heightmap too small to build a graph ({0}x{1}, need at least 2x2)")]
    DegenerateHeightmap(usize, usize),
    #[error("scene error: {0}")]
    Scene(#[from] SceneError),
    #[error("start point ({0:.2}, {1:.2}) does not map to a live graph node")]
    DeadStart(f64, f64),
    #[error("landmark `{name}` unreachable; removed edges near the explored frontier: {frontier}")]
    Unreachable { name: String, frontier: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RemovalReason {
    Wall,
    LowClearance,
    InfeasibleSlope,
}

impl RemovalReason {
    pub fn label(self) -> &'static str {
        match self {
            RemovalReason::Wall => "wall",
            RemovalReason::LowClearance => "low-clearance",
            RemovalReason::InfeasibleSlope => "infeasible-slope",
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum EdgeState {
    Open,
    Removed(RemovalReason),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphParams {
    /// Maximum traversable |dh| / horizontal length. Default 1.0 (45 deg).
    pub slope_limit: f64,
    /// Static obstacle footprints are inflated by this radius.
    pub agent_radius: f64,
    /// Nodes under a top obstacle with less clearance than this are removed.
    pub min_crawl_clearance: f64,
    /// Slope cost exponent: edge cost = d * exp(c_slope * slope).
    pub c_slope: f64,
}

impl Default for GraphParams {
    fn default() -> Self {
        Self {
            slope_limit: 1.0,
            agent_radius: 0.4,
            min_crawl_clearance: 0.5,
            c_slope: 0.0,
        }
    }
}

/// Neighbor offsets (dcol, drow) for 8-connectivity.
pub const DIRECTIONS: [(i32, i32); 8] = [
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
];

/// Immutable pruned grid graph. One node per heightmap sample; edges to
/// the 8 neighbors unless removed by a wall, low clearance or slope.
pub struct GridGraph {
    pub rows: usize,
    pub cols: usize,
    pub cell_size: f64,
    pub origin: [f64; 2],
    pub c_slope: f64,
    heights: Vec<f64>,
    node_live: Vec<bool>,
    /// Per node, per direction: edge state. Mirrored on both endpoints.
    edges: Vec<[EdgeState; 8]>,
}

impl GridGraph {
    pub fn node_count(&self) -> usize {
        self.rows * self.cols
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    pub fn row_col(&self, node: usize) -> (usize, usize) {
        (node / self.cols, node % self.cols)
    }

    pub fn position(&self, node: usize) -> Vec2 {
        let (row, col) = self.row_col(node);
        Vec2::new(
            self.origin[0] + col as f64 * self.cell_size,
            self.origin[1] + row as f64 * self.cell_size,
        )
    }

    pub fn height(&self, node: usize) -> f64 {
        self.heights[node]
    }

    pub fn is_live(&self, node: usize) -> bool {
        self.node_live[node]
    }

    fn neighbor(&self, node: usize, dir: usize) -> Option<usize> {
        let (row, col) = self.row_col(node);
        let (dc, dr) = DIRECTIONS[dir];
        let nc = col as i32 + dc;
        let nr = row as i32 + dr;
        if nc < 0 || nr < 0 || nc >= self.cols as i32 || nr >= self.rows as i32 {
            return None;
        }
        Some(self.index(nr as usize, nc as usize))
    }

    pub fn edge_open(&self, node: usize, dir: usize) -> bool {
        matches!(self.edges[node][dir], EdgeState::Open)
    }

    pub fn open_neighbors<'a>(&'a self, node: usize) -> impl Iterator<Item = (usize, usize)> + 'a {
        (0..8).filter_map(move |dir| {
            if self.edge_open(node, dir) {
                self.neighbor(node, dir).map(|n| (dir, n))
            } else {
                None
            }
        })
    }

    /// Cost of the open edge from `node` in direction `dir`:
    /// 3D length scaled by exp(c_slope * slope).
    pub fn edge_weight(&self, node: usize, dir: usize) -> f64 {
        let other = self.neighbor(node, dir).expect("edge within bounds");
        let (dc, dr) = DIRECTIONS[dir];
        let horizontal = if dc != 0 && dr != 0 {
            SQRT2 * self.cell_size
        } else {
            self.cell_size
        };
        let dh = (self.heights[other] - self.heights[node]).abs();
        let d3 = (horizontal * horizontal + dh * dh).sqrt();
        let slope = dh / horizontal;
        d3 * (self.c_slope * slope).exp()
    }

    /// Node whose cell contains the point, only if live. Goal cells use
    /// this: a landmark cell buried by pruning does not remap elsewhere.
    pub fn node_at_exact(&self, p: Vec2) -> Option<usize> {
        let col = ((p.x - self.origin[0]) / self.cell_size).round() as i32;
        let row = ((p.y - self.origin[1]) / self.cell_size).round() as i32;
        if col < 0 || row < 0 || col >= self.cols as i32 || row >= self.rows as i32 {
            return None;
        }
        let node = self.index(row as usize, col as usize);
        self.node_live[node].then_some(node)
    }

    /// Nearest live node to a world point.
    pub fn node_at(&self, p: Vec2) -> Option<usize> {
        let col = ((p.x - self.origin[0]) / self.cell_size).round() as i32;
        let row = ((p.y - self.origin[1]) / self.cell_size).round() as i32;
        if col < 0 || row < 0 || col >= self.cols as i32 || row >= self.rows as i32 {
            return None;
        }
        let node = self.index(row as usize, col as usize);
        if self.node_live[node] {
            Some(node)
        } else {
            // scan outward a few rings for the nearest live node
            for ring in 1..=3i32 {
                let mut best: Option<(f64, usize)> = None;
                for dr in -ring..=ring {
                    for dc in -ring..=ring {
                        if dr.abs() != ring && dc.abs() != ring {
                            continue;
                        }
                        let (r, c) = (row + dr, col + dc);
                        if r < 0 || c < 0 || r >= self.rows as i32 || c >= self.cols as i32 {
                            continue;
                        }
                        let cand = self.index(r as usize, c as usize);
                        if self.node_live[cand] {
                            let d = self.position(cand).dist(p);
                            if best.map_or(true, |(bd, bn)| d < bd || (d == bd && cand < bn)) {
                                best = Some((d, cand));
                            }
                        }
                    }
                }
                if let Some((_, n)) = best {
                    return Some(n);
                }
            }
            None
        }
    }

    /// Remove (as walls) all edges that pass within `radius` of disk
    /// centers; used for dynamic-obstacle replanning.
    pub fn with_disks_removed(&self, disks: &[(Vec2, f64)]) -> GridGraph {
        let mut edges = self.edges.clone();
        let mut node_live = self.node_live.clone();
        for node in 0..self.node_count() {
            let a = self.position(node);
            for (center, radius) in disks {
                if a.dist(*center) <= *radius {
                    node_live[node] = false;
                }
            }
            for dir in 0..8 {
                if !matches!(edges[node][dir], EdgeState::Open) {
                    continue;
                }
                let Some(other) = self.neighbor(node, dir) else {
                    continue;
                };
                let b = self.position(other);
                for (center, radius) in disks {
                    if crate::geom::point_segment_distance(*center, a, b) <= *radius {
                        edges[node][dir] = EdgeState::Removed(RemovalReason::Wall);
                        break;
                    }
                }
            }
        }
        GridGraph {
            rows: self.rows,
            cols: self.cols,
            cell_size: self.cell_size,
            origin: self.origin,
            c_slope: self.c_slope,
            heights: self.heights.clone(),
            node_live,
            edges,
        }
    }

    /// Debug dump: CSV edge list `node_a,node_b,weight,removal_reason`.
    pub fn dump_csv(&self) -> String {
        let mut out = String::from("node_a,node_b,weight,removal_reason\n");
        for node in 0..self.node_count() {
            for dir in 0..4 {
                // forward directions only, each undirected edge once
                let Some(other) = self.neighbor(node, dir) else {
                    continue;
                };
                match self.edges[node][dir] {
                    EdgeState::Open => {
                        let _ = writeln!(
                            out,
                            "{},{},{:.6},",
                            node,
                            other,
                            self.edge_weight(node, dir)
                        );
                    }
                    EdgeState::Removed(reason) => {
                        let _ = writeln!(out, "{},{},,{}", node, other, reason.label());
                    }
                }
            }
        }
        out
    }
}

/// Build the pruned grid graph for a scene.
pub fn build_graph(scene: &Scene, params: &GraphParams) -> Result<GridGraph, GraphError> {
    let hm = &scene.heightmap;
    if hm.rows < 2 || hm.cols < 2 {
        return Err(GraphError::DegenerateHeightmap(hm.rows, hm.cols));
    }
    let n = hm.rows * hm.cols;
    let mut node_live = vec![true; n];
    let mut edges = vec![[EdgeState::Open; 8]; n];

    // precompute inflated bounding boxes for the static obstacles
    let inflated: Vec<_> = scene
        .static_obstacles
        .iter()
        .map(|o| {
            let (lo, hi) = o.polygon.bounding_box();
            let r = params.agent_radius;
            (
                &o.polygon,
                [lo[0] - r, lo[1] - r],
                [hi[0] + r, hi[1] + r],
            )
        })
        .collect();

    let graph_pos = |row: usize, col: usize| hm.node_position(row, col);
    let blocked_by_wall = |p: Vec2| -> bool {
        inflated.iter().any(|(poly, lo, hi)| {
            p.x >= lo[0]
                && p.x <= hi[0]
                && p.y >= lo[1]
                && p.y <= hi[1]
                && poly.distance_to_point(p) <= params.agent_radius
        })
    };

    for row in 0..hm.rows {
        for col in 0..hm.cols {
            let node = row * hm.cols + col;
            let p = graph_pos(row, col);
            let clearance = scene.clearance_at(p)?;
            if clearance < params.min_crawl_clearance || blocked_by_wall(p) {
                node_live[node] = false;
            }
        }
    }

    for row in 0..hm.rows {
        for col in 0..hm.cols {
            let node = row * hm.cols + col;
            for (dir, (dc, dr)) in DIRECTIONS.iter().enumerate() {
                let nc = col as i32 + dc;
                let nr = row as i32 + dr;
                if nc < 0 || nr < 0 || nc >= hm.cols as i32 || nr >= hm.rows as i32 {
                    edges[node][dir] = EdgeState::Removed(RemovalReason::Wall);
                    continue;
                }
                let other = nr as usize * hm.cols + nc as usize;
                if other < node {
                    continue; // mirrored below
                }
                let a = graph_pos(row, col);
                let b = graph_pos(nr as usize, nc as usize);
                let horizontal = a.dist(b);
                let state = if !node_live[node] || !node_live[other] {
                    // distinguish the cause by the blocking endpoint
                    let cause_p = if !node_live[node] { a } else { b };
                    if blocked_by_wall(cause_p) {
                        EdgeState::Removed(RemovalReason::Wall)
                    } else {
                        EdgeState::Removed(RemovalReason::LowClearance)
                    }
                } else if inflated.iter().any(|(poly, lo, hi)| {
                    a.x.max(b.x) >= lo[0]
                        && a.x.min(b.x) <= hi[0]
                        && a.y.max(b.y) >= lo[1]
                        && a.y.min(b.y) <= hi[1]
                        && poly.distance_to_segment(a, b) <= params.agent_radius
                }) {
                    EdgeState::Removed(RemovalReason::Wall)
                } else if (hm.heights[other] - hm.heights[node]).abs() / horizontal
                    > params.slope_limit
                {
                    EdgeState::Removed(RemovalReason::InfeasibleSlope)
                } else {
                    EdgeState::Open
                };
                edges[node][dir] = state;
                edges[other][(dir + 4) % 8] = state;
            }
        }
    }

    Ok(GridGraph {
        rows: hm.rows,
        cols: hm.cols,
        cell_size: hm.cell_size,
        origin: hm.origin,
        c_slope: params.c_slope,
        heights: hm.heights.clone(),
        node_live,
        edges,
    })
}

/// Coarse grid path from A*.
#[derive(Debug, Clone)]
pub struct CoarsePath {
    pub nodes: Vec<usize>,
    pub positions: Vec<Vec2>,
    pub total_cost: f64,
}

impl CoarsePath {
    pub fn linear_length(&self) -> f64 {
        self.positions
            .windows(2)
            .map(|w| w[0].dist(w[1]))
            .sum()
    }
}

// ---------------------------------------------------------------------------
// KD-tree over goal cells (octile metric) for the multi-goal heuristic
// ---------------------------------------------------------------------------

/// Static 2D KD-tree answering nearest-neighbor queries under the octile
/// distance. Axis distance lower-bounds octile distance, so standard
/// plane pruning stays exact.
pub struct GoalIndex {
    // flattened tree: points reordered in place, median splits
    points: Vec<Vec2>,
}

pub fn octile_distance(a: Vec2, b: Vec2) -> f64 {
    let dx = (a.x - b.x).abs();
    let dy = (a.y - b.y).abs();
    dx.max(dy) + (SQRT2 - 1.0) * dx.min(dy)
}

impl GoalIndex {
    pub fn build(mut points: Vec<Vec2>) -> Self {
        fn split(points: &mut [Vec2], axis: usize) {
            if points.len() <= 1 {
                return;
            }
            let mid = points.len() / 2;
            points.sort_by(|a, b| {
                let (ka, kb) = if axis == 0 { (a.x, b.x) } else { (a.y, b.y) };
                ka.total_cmp(&kb).then(a.y.total_cmp(&b.y)).then(a.x.total_cmp(&b.x))
            });
            let (lo, hi) = points.split_at_mut(mid);
            let hi = &mut hi[1..];
            split(lo, 1 - axis);
            split(hi, 1 - axis);
        }
        split(&mut points, 0);
        Self { points }
    }

    pub fn nearest(&self, query: Vec2) -> Option<(Vec2, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = (self.points[0], f64::INFINITY);
        self.search(0, self.points.len(), 0, query, &mut best);
        Some(best)
    }

    fn search(&self, lo: usize, hi: usize, axis: usize, query: Vec2, best: &mut (Vec2, f64)) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let node = self.points[mid];
        let d = octile_distance(query, node);
        if d < best.1 {
            *best = (node, d);
        }
        let delta = if axis == 0 {
            query.x - node.x
        } else {
            query.y - node.y
        };
        let (near, far) = if delta < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.search(near.0, near.1, 1 - axis, query, best);
        // axis distance lower-bounds octile distance across the plane
        if delta.abs() < best.1 {
            self.search(far.0, far.1, 1 - axis, query, best);
        }
    }
}

// ---------------------------------------------------------------------------
// A*
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
struct QueueEntry {
    f: f64,
    h: f64,
    node: usize,
}

impl PartialEq for QueueEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for QueueEntry {}
impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for QueueEntry {
    // reversed for a min-heap; lexicographic (f, h, node) for determinism
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then(other.h.total_cmp(&self.h))
            .then(other.node.cmp(&self.node))
    }
}

fn goal_nodes(graph: &GridGraph, goal: &Landmark) -> Vec<usize> {
    let mut nodes: Vec<usize> = goal
        .cells
        .iter()
        .filter_map(|c| graph.node_at_exact(Vec2::from(*c)))
        .collect();
    nodes.sort_unstable();
    nodes.dedup();
    nodes
}

/// Multi-goal A* to the cheapest-reachable cell of a landmark. The
/// heuristic is the octile distance to the nearest goal cell (via the
/// KD-tree), a lower bound on any edge-cost sum for c_slope >= 0.
pub fn astar_to_landmark(
    graph: &GridGraph,
    start: Vec2,
    goal: &Landmark,
) -> Result<CoarsePath, GraphError> {
    let start_node = graph
        .node_at(start)
        .ok_or(GraphError::DeadStart(start.x, start.y))?;
    let goals = goal_nodes(graph, goal);
    if goals.is_empty() {
        return Err(GraphError::Unreachable {
            name: goal.name.clone(),
            frontier: "no goal cell maps to a live node".into(),
        });
    }
    let goal_set: std::collections::HashSet<usize> = goals.iter().copied().collect();
    let index = GoalIndex::build(goals.iter().map(|&g| graph.position(g)).collect());
    let heuristic = |node: usize| -> f64 {
        // the relative shrink keeps the octile bound admissible *in float
        // arithmetic*: the mathematical bound can be tight, and rounding
        // would otherwise overshoot it by an ULP and break consistency
        index
            .nearest(graph.position(node))
            .map(|(_, d)| d * (1.0 - 1e-12))
            .unwrap_or(0.0)
    };

    let n = graph.node_count();
    let mut g_cost = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut heap = BinaryHeap::new();
    g_cost[start_node] = 0.0;
    let h0 = heuristic(start_node);
    heap.push(QueueEntry {
        f: h0,
        h: h0,
        node: start_node,
    });

    while let Some(QueueEntry { node, .. }) = heap.pop() {
        if closed[node] {
            continue;
        }
        closed[node] = true;
        if goal_set.contains(&node) {
            let mut nodes = vec![node];
            let mut cur = node;
            while parent[cur] != usize::MAX {
                cur = parent[cur];
                nodes.push(cur);
            }
            nodes.reverse();
            let positions = nodes.iter().map(|&n| graph.position(n)).collect();
            return Ok(CoarsePath {
                positions,
                total_cost: g_cost[node],
                nodes,
            });
        }
        for (dir, next) in graph.open_neighbors(node) {
            let tentative = g_cost[node] + graph.edge_weight(node, dir);
            if tentative < g_cost[next] {
                // re-open on improvement so the result stays exactly
                // optimal even at floating-point tie margins
                closed[next] = false;
                g_cost[next] = tentative;
                parent[next] = node;
                let h = heuristic(next);
                heap.push(QueueEntry {
                    f: tentative + h,
                    h,
                    node: next,
                });
            }
        }
    }

    // unreachable: count removal reasons on edges leaving the explored set
    let mut counts = [0usize; 3];
    for node in 0..n {
        if !closed[node] {
            continue;
        }
        for dir in 0..8 {
            if let EdgeState::Removed(reason) = graph.edges[node][dir] {
                counts[match reason {
                    RemovalReason::Wall => 0,
                    RemovalReason::LowClearance => 1,
                    RemovalReason::InfeasibleSlope => 2,
                }] += 1;
            }
        }
    }
    Err(GraphError::Unreachable {
        name: goal.name.clone(),
        frontier: format!(
            "wall={} low-clearance={} infeasible-slope={}",
            counts[0], counts[1], counts[2]
        ),
    })
}

/// Pairwise landmark reachability on the pruned graph (shared connected
/// component between any pair of goal cells).
pub fn reachability(graph: &GridGraph, landmarks: &[Landmark]) -> Vec<Vec<bool>> {
    // label components by BFS over open edges
    let n = graph.node_count();
    let mut component = vec![usize::MAX; n];
    let mut next_label = 0;
    let mut queue = std::collections::VecDeque::new();
    for start in 0..n {
        if component[start] != usize::MAX || !graph.is_live(start) {
            continue;
        }
        component[start] = next_label;
        queue.push_back(start);
        while let Some(node) = queue.pop_front() {
            for (_, next) in graph.open_neighbors(node) {
                if component[next] == usize::MAX {
                    component[next] = next_label;
                    queue.push_back(next);
                }
            }
        }
        next_label += 1;
    }

    let labels: Vec<Vec<usize>> = landmarks
        .iter()
        .map(|lm| {
            goal_nodes(graph, lm)
                .into_iter()
                .map(|n| component[n])
                .filter(|&c| c != usize::MAX)
                .collect()
        })
        .collect();

    let k = landmarks.len();
    let mut matrix = vec![vec![false; k]; k];
    for i in 0..k {
        for j in 0..k {
            matrix[i][j] = i == j
                || labels[i]
                    .iter()
                    .any(|a| labels[j].iter().any(|b| a == b));
        }
    }
    matrix
}
