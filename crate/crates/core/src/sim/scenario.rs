use std::path::Path;

use serde::{Deserialize, Serialize};

use super::grid::{Dir, Pos};
use crate::error::{invalid, Error, Result};
use crate::runtime::ledger::Difficulty;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// Repaints the frame with the alternate palette; may add walls.
    SceneChange,
    /// Runner feedback reports no progress while the agent still moves.
    StallZone,
    /// Movement actions are swallowed without any feedback.
    RepetitionTrap,
    /// The action fails with an execution error.
    HardFailure,
}

impl EventKind {
    pub fn default_duration(self) -> u32 {
        match self {
            EventKind::StallZone => 4,
            EventKind::RepetitionTrap => 2,
            EventKind::SceneChange | EventKind::HardFailure => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedEvent {
    pub kind: EventKind,
    /// 1-based step index. Scene changes alter the observation seen at this
    /// step; the other kinds affect the action executed at this step.
    pub step: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration: Option<u32>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub add_walls: Vec<Pos>,
}

impl ScriptedEvent {
    pub fn new(kind: EventKind, step: u32) -> Self {
        ScriptedEvent { kind, step, duration: None, add_walls: Vec::new() }
    }

    pub fn duration(&self) -> u32 {
        self.duration.unwrap_or(self.kind.default_duration())
    }
}

/// Declarative scenario file.
///
/// `map` rows use `#` for walls, `.` for floor, `A` for the agent, `T` for
/// the goal and `*` for a collectible item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub map: Vec<String>,
    #[serde(default = "default_facing")]
    pub facing: Dir,
    #[serde(default)]
    pub tools: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub required_tool: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selected_tool: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub difficulty: Option<Difficulty>,
    #[serde(default)]
    pub events: Vec<ScriptedEvent>,
}

fn default_facing() -> Dir {
    Dir::East
}

/// Parsed map layout.
#[derive(Debug, Clone)]
pub(crate) struct Layout {
    pub width: usize,
    pub height: usize,
    pub walls: Vec<bool>,
    pub agent: Pos,
    pub target: Pos,
    pub items: Vec<Pos>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let scenario: Scenario = serde_json::from_str(text)?;
        scenario.layout()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| match e {
            Error::InvalidInput(m) => Error::InvalidInput(format!("{}: {m}", path.display())),
            Error::Json(j) => Error::Parse { path: path.display().to_string(), line: j.line(), message: j.to_string() },
            other => other,
        })
    }

    /// Grade from the larger map side: up to 8 easy, up to 12 medium, else hard.
    pub fn difficulty(&self) -> Difficulty {
        if let Some(d) = self.difficulty {
            return d;
        }
        let height = self.map.len();
        let width = self.map.iter().map(|r| r.chars().count()).max().unwrap_or(0);
        match width.max(height) {
            0..=8 => Difficulty::Easy,
            9..=12 => Difficulty::Medium,
            _ => Difficulty::Hard,
        }
    }

    pub(crate) fn layout(&self) -> Result<Layout> {
        let height = self.map.len();
        if height == 0 {
            return Err(invalid("scenario map is empty"));
        }
        let width = self.map[0].chars().count();
        if width == 0 {
            return Err(invalid("scenario map rows are empty"));
        }
        let mut walls = Vec::with_capacity(width * height);
        let (mut agent, mut target, mut items) = (None, None, Vec::new());
        for (y, row) in self.map.iter().enumerate() {
            if row.chars().count() != width {
                return Err(invalid(format!("map row {y} has a different width")));
            }
            for (x, ch) in row.chars().enumerate() {
                let pos = Pos::new(x, y);
                walls.push(ch == '#');
                match ch {
                    '#' | '.' => {}
                    'A' if agent.is_none() => agent = Some(pos),
                    'T' if target.is_none() => target = Some(pos),
                    '*' => items.push(pos),
                    'A' | 'T' => return Err(invalid(format!("duplicate {ch:?} in map"))),
                    other => return Err(invalid(format!("unknown map character {other:?}"))),
                }
            }
        }
        let agent = agent.ok_or_else(|| invalid("map has no agent 'A'"))?;
        let target = target.ok_or_else(|| invalid("map has no goal 'T'"))?;
        if let Some(tool) = &self.required_tool {
            if !self.tools.contains(tool) {
                return Err(invalid(format!("required tool {tool:?} is not in the tool list")));
            }
        }
        if let Some(tool) = &self.selected_tool {
            if !self.tools.contains(tool) {
                return Err(invalid(format!("selected tool {tool:?} is not in the tool list")));
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for ev in &self.events {
            validate_event(ev, width, height, target)?;
            if !seen.insert((ev.kind, ev.step)) {
                return Err(invalid(format!("duplicate {:?} event at step {}", ev.kind, ev.step)));
            }
        }
        Ok(Layout { width, height, walls, agent, target, items })
    }
}

pub(crate) fn validate_event(ev: &ScriptedEvent, width: usize, height: usize, target: Pos) -> Result<()> {
    if ev.step == 0 {
        return Err(invalid("event steps are 1-based"));
    }
    if ev.duration == Some(0) {
        return Err(invalid("event duration must be at least 1"));
    }
    if !ev.add_walls.is_empty() && ev.kind != EventKind::SceneChange {
        return Err(invalid("only scene_change events may add walls"));
    }
    for w in &ev.add_walls {
        if w.x >= width || w.y >= height {
            return Err(invalid(format!("added wall {w} is outside the map")));
        }
        if *w == target {
            return Err(invalid("an added wall may not cover the goal"));
        }
    }
    Ok(())
}
