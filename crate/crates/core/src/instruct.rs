//! Templated text instructions: "<verb> from the <landmark> to the
//! <landmark>" (or the continuation form "<verb> to the <landmark>"),
//! parsed into routing triplets of (source, target, locomotion type).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scene::Scene;
use crate::speed_profile::{envelope_vmax, EnvelopeParams};

#[derive(Debug, Error, PartialEq)]
pub enum InstructError {
    #[error("unknown verb `{0}`")]
    UnknownVerb(String),
    #[error("unknown landmark `{0}`")]
    UnknownLandmark(String),
    #[error("instruction `{0}` does not match `<verb> [from the <landmark>] to the <landmark>`")]
    Malformed(String),
    #[error("continuation form `{0}` has no source: no previous instruction or explicit start")]
    MissingSource(String),
    #[error("source and target are both `{0}`")]
    DegenerateRoute(String),
    #[error("instruction {index}: {source}")]
    AtIndex {
        index: usize,
        source: Box<InstructError>,
    },
    #[error("instruction {index} starts at `{found}` but the previous target is `{expected}`")]
    ChainBreak {
        index: usize,
        expected: String,
        found: String,
    },
    #[error("route file: missing `start: <landmark>` header line")]
    MissingStart,
}

/// Named movement mode characterized by head height and speed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocomotionType {
    pub name: String,
    /// Target head height above ground, in meters.
    pub head_height: f64,
    /// Nominal speed, m/s.
    pub cruise_speed: f64,
    /// [min, max] speed, m/s; always within the motion envelope.
    pub speed_range: [f64; 2],
}

impl LocomotionType {
    fn canonical(name: &str, head_height: f64, cruise_speed: f64) -> Self {
        // default range is +/-50% of cruise, clipped to the height envelope
        let vmax = envelope_vmax(head_height, &EnvelopeParams::default())
            .expect("canonical head heights are in range");
        Self {
            name: name.to_string(),
            head_height,
            cruise_speed,
            speed_range: [
                (cruise_speed * 0.5).min(vmax),
                (cruise_speed * 1.5).min(vmax),
            ],
        }
    }

    pub fn walk() -> Self {
        Self::canonical("walk", 1.47, 2.0)
    }

    pub fn run() -> Self {
        Self::canonical("run", 1.47, 4.0)
    }

    pub fn crouch_walk() -> Self {
        Self::canonical("crouch-walk", 0.8, 2.0)
    }

    pub fn crawl() -> Self {
        Self::canonical("crawl", 0.4, 1.0)
    }

    /// Verb lookup with aliases ("sprint" -> run, "walk crouching" -> crouch-walk).
    pub fn from_verb(verb: &str) -> Option<Self> {
        match verb.to_ascii_lowercase().as_str() {
            "walk" => Some(Self::walk()),
            "run" | "sprint" => Some(Self::run()),
            "crouch-walk" | "crouch walk" | "walk crouching" | "crouch" => Some(Self::crouch_walk()),
            "crawl" => Some(Self::crawl()),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instruction {
    pub source: String,
    pub target: String,
    pub locomotion: LocomotionType,
}

impl Instruction {
    /// Canonical text form; re-parsing it yields an equal instruction.
    pub fn render(&self) -> String {
        format!(
            "{} from the {} to the {}",
            self.locomotion.name, self.source, self.target
        )
    }
}

/// Chained sequence of instructions: each source equals the previous target.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RouteRequest {
    pub instructions: Vec<Instruction>,
}

fn check_landmark(name: &str, scene: &Scene) -> Result<String, InstructError> {
    scene
        .landmark(name)
        .map(|l| l.name.clone())
        .ok_or_else(|| InstructError::UnknownLandmark(name.to_string()))
}

/// Parse one instruction. `prior_target` supplies the source for the
/// continuation form "<verb> to the <landmark>".
pub fn parse_instruction(
    text: &str,
    prior_target: Option<&str>,
    scene: &Scene,
) -> Result<Instruction, InstructError> {
    let trimmed = text.trim().trim_end_matches(['.', '!']);
    let lower = trimmed.to_ascii_lowercase();
    let (verb, source, target) = if let Some((head, tail)) = split_once_str(&lower, " from the ") {
        let (src, tgt) = split_once_str(tail, " to the ")
            .ok_or_else(|| InstructError::Malformed(trimmed.to_string()))?;
        (head.to_string(), Some(src.to_string()), tgt.to_string())
    } else if let Some((head, tgt)) = split_once_str(&lower, " to the ") {
        (head.to_string(), None, tgt.to_string())
    } else {
        return Err(InstructError::Malformed(trimmed.to_string()));
    };

    let locomotion =
        LocomotionType::from_verb(&verb).ok_or(InstructError::UnknownVerb(verb.clone()))?;
    let source = match source {
        Some(s) => check_landmark(&s, scene)?,
        None => match prior_target {
            Some(s) => check_landmark(s, scene)?,
            None => return Err(InstructError::MissingSource(trimmed.to_string())),
        },
    };
    let target = check_landmark(&target, scene)?;
    if source == target {
        return Err(InstructError::DegenerateRoute(source));
    }
    Ok(Instruction {
        source,
        target,
        locomotion,
    })
}

fn split_once_str<'a>(s: &'a str, sep: &str) -> Option<(&'a str, &'a str)> {
    s.find(sep).map(|i| (&s[..i], &s[i + sep.len()..]))
}

/// Parse a chained route: instruction i's source must equal instruction
/// i-1's target (or `start` for the first one).
pub fn parse_route(
    texts: &[&str],
    start: &str,
    scene: &Scene,
) -> Result<RouteRequest, InstructError> {
    let start = check_landmark(start, scene)?;
    let mut instructions = Vec::with_capacity(texts.len());
    let mut prev_target = start;
    for (index, text) in texts.iter().enumerate() {
        let instr =
            parse_instruction(text, Some(&prev_target), scene).map_err(|e| match e {
                e @ InstructError::ChainBreak { .. } => e,
                other => InstructError::AtIndex {
                    index,
                    source: Box::new(other),
                },
            })?;
        if instr.source != prev_target {
            return Err(InstructError::ChainBreak {
                index,
                expected: prev_target,
                found: instr.source,
            });
        }
        prev_target = instr.target.clone();
        instructions.push(instr);
    }
    Ok(RouteRequest { instructions })
}

/// Route file format: first line `start: <landmark>`, then one instruction
/// per line. Blank lines and `#` comments are skipped.
pub fn parse_route_file(contents: &str, scene: &Scene) -> Result<RouteRequest, InstructError> {
    let mut lines = contents
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    let header = lines.next().ok_or(InstructError::MissingStart)?;
    let start = header
        .strip_prefix("start:")
        .map(str::trim)
        .ok_or(InstructError::MissingStart)?;
    let texts: Vec<&str> = lines.collect();
    parse_route(&texts, start, scene)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{HeightMap, Landmark};

    fn scene() -> Scene {
        Scene {
            heightmap: HeightMap::flat([0.0, 0.0], 1.0, 8, 8, 0.0),
            static_obstacles: vec![],
            top_obstacles: vec![],
            dynamic_obstacles: vec![],
            landmarks: ["tree", "lake", "car", "swing", "bench"]
                .iter()
                .enumerate()
                .map(|(i, name)| Landmark {
                    name: name.to_string(),
                    cells: vec![[i as f64, i as f64]],
                })
                .collect(),
        }
    }

    #[test]
    fn canonical_defaults() {
        assert_eq!(LocomotionType::crawl().head_height, 0.4);
        assert_eq!(LocomotionType::crawl().cruise_speed, 1.0);
        assert_eq!(LocomotionType::crouch_walk().head_height, 0.8);
        assert_eq!(LocomotionType::crouch_walk().cruise_speed, 2.0);
        assert_eq!(LocomotionType::walk().head_height, 1.47);
        assert_eq!(LocomotionType::walk().cruise_speed, 2.0);
        assert_eq!(LocomotionType::run().head_height, 1.47);
        assert_eq!(LocomotionType::run().cruise_speed, 4.0);
        // ranges clipped to the envelope
        assert_eq!(LocomotionType::crawl().speed_range, [0.5, 1.0]);
        assert_eq!(LocomotionType::run().speed_range, [2.0, 5.0]);
    }

    #[test]
    fn full_form() {
        let s = scene();
        let i = parse_instruction("Run from the tree to the lake", None, &s).unwrap();
        assert_eq!(i.source, "tree");
        assert_eq!(i.target, "lake");
        assert_eq!(i.locomotion.name, "run");
    }

    #[test]
    fn continuation_form() {
        let s = scene();
        let i = parse_instruction("walk crouching to the bench", Some("car"), &s).unwrap();
        assert_eq!(i.source, "car");
        assert_eq!(i.target, "bench");
        assert_eq!(i.locomotion.name, "crouch-walk");

        assert_eq!(
            parse_instruction("walk to the bench", None, &s),
            Err(InstructError::MissingSource("walk to the bench".into()))
        );
    }

    #[test]
    fn sprint_aliases_to_run() {
        let s = scene();
        let i = parse_instruction("sprint to the car", Some("bench"), &s).unwrap();
        assert_eq!(i.locomotion.name, "run");
    }

    #[test]
    fn unknown_verb_and_landmark() {
        let s = scene();
        assert_eq!(
            parse_instruction("Fly from the tree to the lake", None, &s),
            Err(InstructError::UnknownVerb("fly".into()))
        );
        assert_eq!(
            parse_instruction("Run from the tree to the volcano", None, &s),
            Err(InstructError::UnknownLandmark("volcano".into()))
        );
    }

    #[test]
    fn chained_route() {
        let s = scene();
        let r = parse_route(&["Run to the car", "walk to the swing"], "tree", &s).unwrap();
        assert_eq!(r.instructions.len(), 2);
        assert_eq!(r.instructions[0].source, "tree");
        assert_eq!(r.instructions[0].target, "car");
        assert_eq!(r.instructions[0].locomotion.name, "run");
        assert_eq!(r.instructions[1].source, "car");
        assert_eq!(r.instructions[1].target, "swing");
        assert_eq!(r.instructions[1].locomotion.name, "walk");
    }

    #[test]
    fn empty_route() {
        let s = scene();
        let r = parse_route(&[], "tree", &s).unwrap();
        assert!(r.instructions.is_empty());
    }

    #[test]
    fn chain_break() {
        let s = scene();
        let err = parse_route(&["Run from the lake to the car"], "tree", &s).unwrap_err();
        assert_eq!(
            err,
            InstructError::ChainBreak {
                index: 0,
                expected: "tree".into(),
                found: "lake".into(),
            }
        );
    }

    #[test]
    fn error_carries_instruction_index() {
        let s = scene();
        let err =
            parse_route(&["Run to the car", "teleport to the swing"], "tree", &s).unwrap_err();
        assert!(matches!(err, InstructError::AtIndex { index: 1, .. }));
    }

    #[test]
    fn render_round_trip() {
        let s = scene();
        for text in [
            "Run from the tree to the lake",
            "crawl from the car to the bench",
            "walk crouching from the lake to the swing",
        ] {
            let i = parse_instruction(text, None, &s).unwrap();
            let again = parse_instruction(&i.render(), None, &s).unwrap();
            assert_eq!(i, again);
        }
    }

    #[test]
    fn route_file() {
        let s = scene();
        let contents = "start: tree\n# comment\nRun to the car\nwalk to the swing\n";
        let r = parse_route_file(contents, &s).unwrap();
        assert_eq!(r.instructions.len(), 2);
        assert!(matches!(
            parse_route_file("Run to the car\n", &s),
            Err(InstructError::MissingStart)
        ));
    }
}
