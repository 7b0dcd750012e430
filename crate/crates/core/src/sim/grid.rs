use std::collections::BTreeSet;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::render::{render, Palette};
use super::scenario::{validate_event, EventKind, Scenario, ScriptedEvent};
use super::{EnvError, EnvStep, Environment};
use crate::action::ActionId;
use crate::error::{invalid, Result};
use crate::runtime::ledger::Difficulty;
use crate::trigger::RunnerFeedback;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct Pos {
    pub x: usize,
    pub y: usize,
}

impl Pos {
    pub fn new(x: usize, y: usize) -> Self {
        Pos { x, y }
    }

    pub fn manhattan(self, other: Pos) -> usize {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y)
    }
}

impl From<[usize; 2]> for Pos {
    fn from([x, y]: [usize; 2]) -> Self {
        Pos { x, y }
    }
}

impl From<Pos> for [usize; 2] {
    fn from(p: Pos) -> Self {
        [p.x, p.y]
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Compass direction; north is towards row 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dir {
    North,
    East,
    South,
    West,
}

impl Dir {
    pub const ALL: [Dir; 4] = [Dir::North, Dir::East, Dir::South, Dir::West];

    pub fn name(self) -> &'static str {
        match self {
            Dir::North => "north",
            Dir::East => "east",
            Dir::South => "south",
            Dir::West => "west",
        }
    }

    pub fn parse(s: &str) -> Option<Dir> {
        Dir::ALL.into_iter().find(|d| d.name() == s)
    }

    pub fn opposite(self) -> Dir {
        match self {
            Dir::North => Dir::South,
            Dir::East => Dir::West,
            Dir::South => Dir::North,
            Dir::West => Dir::East,
        }
    }

    /// The two directions at right angles, clockwise first.
    pub fn lateral(self) -> [Dir; 2] {
        match self {
            Dir::North | Dir::South => [Dir::East, Dir::West],
            Dir::East | Dir::West => [Dir::South, Dir::North],
        }
    }

    pub fn move_action(self) -> ActionId {
        ActionId::new(format!("move:{}", self.name()))
    }

    pub fn face_action(self) -> ActionId {
        ActionId::new(format!("face:{}", self.name()))
    }
}

impl fmt::Display for Dir {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Read-only snapshot of the world for scripted controllers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridView {
    pub width: usize,
    pub height: usize,
    pub walls: Vec<bool>,
    pub agent: Pos,
    pub facing: Dir,
    pub target: Pos,
    pub tools: Vec<String>,
    pub selected: Option<String>,
    pub required_tool: Option<String>,
}

impl GridView {
    pub fn is_free(&self, p: Pos) -> bool {
        p.x < self.width && p.y < self.height && !self.walls[p.y * self.width + p.x]
    }

    pub fn neighbor(&self, p: Pos, dir: Dir) -> Option<Pos> {
        let (x, y) = (p.x as isize, p.y as isize);
        let (nx, ny) = match dir {
            Dir::North => (x, y - 1),
            Dir::South => (x, y + 1),
            Dir::East => (x + 1, y),
            Dir::West => (x - 1, y),
        };
        (nx >= 0 && ny >= 0 && (nx as usize) < self.width && (ny as usize) < self.height).then(|| Pos::new(nx as usize, ny as usize))
    }

    /// Free neighbour in `dir`, if any.
    pub fn step_to(&self, p: Pos, dir: Dir) -> Option<Pos> {
        self.neighbor(p, dir).filter(|&n| self.is_free(n))
    }

    pub fn tool_ready(&self) -> bool {
        match &self.required_tool {
            Some(t) => self.selected.as_ref() == Some(t),
            None => true,
        }
    }
}

/// Parsed form of an action string.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum GridAction {
    Move(Dir),
    Face(Dir),
    Select(String),
    Wait,
}

pub(crate) fn parse_action(a: &ActionId) -> Option<GridAction> {
    match (a.name(), a.argument()) {
        ("move", Some(d)) => Dir::parse(d).map(GridAction::Move),
        ("face", Some(d)) => Dir::parse(d).map(GridAction::Face),
        ("select", Some(t)) if !t.is_empty() => Some(GridAction::Select(t.to_string())),
        ("wait", None) => Some(GridAction::Wait),
        _ => None,
    }
}

#[derive(Debug, Clone)]
pub struct GridWorld {
    scenario: Scenario,
    rng_seed: u64,
    view: GridView,
    items: BTreeSet<Pos>,
    inventory: u32,
    floor_shade: Vec<i16>,
    palette: Palette,
    /// Number of executed steps.
    step_index: u32,
    stall_until: u32,
    trap_until: u32,
    events: Vec<ScriptedEvent>,
    done: bool,
}

impl GridWorld {
    pub fn new(scenario: Scenario, rng_seed: u64) -> Result<Self> {
        let layout = scenario.layout()?;
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let floor_shade = (0..layout.width * layout.height).map(|_| rng.random_range(-6i16..=6)).collect();
        let mut events = scenario.events.clone();
        events.sort_by_key(|e| (e.step, e.kind));
        let view = GridView {
            width: layout.width,
            height: layout.height,
            walls: layout.walls,
            agent: layout.agent,
            facing: scenario.facing,
            target: layout.target,
            tools: scenario.tools.clone(),
            selected: scenario.selected_tool.clone(),
            required_tool: scenario.required_tool.clone(),
        };
        Ok(GridWorld {
            items: layout.items.into_iter().collect(),
            scenario,
            rng_seed,
            view,
            inventory: 0,
            floor_shade,
            palette: Palette::Day,
            step_index: 0,
            stall_until: 0,
            trap_until: 0,
            events,
            done: false,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    pub fn step_index(&self) -> u32 {
        self.step_index
    }

    pub fn events(&self) -> &[ScriptedEvent] {
        &self.events
    }

    pub fn inventory(&self) -> u32 {
        self.inventory
    }

    /// Queue an event. Scene changes must land on an observation not yet
    /// produced, i.e. at least two steps ahead of the executed count.
    pub fn inject_event(&mut self, event: ScriptedEvent) -> Result<()> {
        validate_event(&event, self.view.width, self.view.height, self.view.target)?;
        let earliest = match event.kind {
            EventKind::SceneChange => self.step_index + 2,
            _ => self.step_index + 1,
        };
        if event.step < earliest {
            return Err(invalid(format!("event at step {} is in the past (earliest {earliest})", event.step)));
        }
        if self.events.iter().any(|e| e.kind == event.kind && e.step == event.step) {
            return Err(invalid(format!("duplicate {:?} event at step {}", event.kind, event.step)));
        }
        let at = self.events.partition_point(|e| (e.step, e.kind) <= (event.step, event.kind));
        self.events.insert(at, event);
        Ok(())
    }

    /// Agent on the goal with the required tool selected.
    pub fn evaluate_success(&self) -> bool {
        self.view.agent == self.view.target && self.view.tool_ready()
    }

    fn apply_scene_changes(&mut self, step: u32) {
        let changes: Vec<_> = self.events.iter().filter(|e| e.kind == EventKind::SceneChange && e.step == step).cloned().collect();
        for ev in changes {
            self.palette = self.palette.flipped();
            for w in ev.add_walls {
                if w != self.view.agent {
                    self.view.walls[w.y * self.view.width + w.x] = true;
                }
            }
        }
    }

    fn observe(&self, feedback: RunnerFeedback) -> EnvStep {
        let v = &self.view;
        let tool = v.selected.as_deref().unwrap_or("none");
        let mut ui_text =
            format!("step {} pos {} {} facing {} tool {} items {}", self.step_index, v.agent.x, v.agent.y, v.facing, tool, self.inventory);
        if !feedback.structured_message.is_empty() {
            ui_text.push_str(" | ");
            ui_text.push_str(&feedback.structured_message);
        }
        EnvStep { frame: render(v, &self.items, &self.floor_shade, self.palette), ui_text, feedback }
    }

    fn execute(&mut self, action: &ActionId, step: u32) -> RunnerFeedback {
        let mut fb = RunnerFeedback::default();
        let Some(parsed) = parse_action(action) else {
            fb.invalid_action = true;
            fb.structured_message = format!("unknown action {action}");
            return fb;
        };
        if self.events.iter().any(|e| e.kind == EventKind::HardFailure && e.step == step) {
            fb.execution_error = true;
            fb.structured_message = format!("{action} failed to execute");
            return fb;
        }
        match parsed {
            GridAction::Move(dir) => {
                if step < self.trap_until {
                    return fb;
                }
                match self.view.step_to(self.view.agent, dir) {
                    Some(next) => {
                        self.view.agent = next;
                        self.view.facing = dir;
                        fb.position_or_facing_changed = true;
                        if self.items.remove(&next) {
                            self.inventory += 1;
                            fb.inventory_delta = true;
                            fb.productive_execution_confirmed = true;
                        }
                    }
                    None => {
                        fb.invalid_action = true;
                        fb.structured_message = format!("move {dir} blocked");
                    }
                }
            }
            GridAction::Face(dir) => {
                if self.view.facing != dir {
                    self.view.facing = dir;
                    fb.position_or_facing_changed = true;
                }
            }
            GridAction::Select(tool) => {
                if !self.view.tools.contains(&tool) {
                    fb.invalid_action = true;
                    fb.structured_message = format!("no tool named {tool}");
                } else if self.view.selected.as_ref() != Some(&tool) {
                    self.view.selected = Some(tool);
                    fb.selected_item_changed = true;
                }
            }
            GridAction::Wait => {}
        }
        fb
    }
}

impl Environment for GridWorld {
    type View = GridView;

    fn reset(&mut self) -> std::result::Result<EnvStep, EnvError> {
        let seed = self.rng_seed;
        *self = GridWorld::new(self.scenario.clone(), seed).map_err(|e| EnvError::Terminal(e.to_string()))?;
        self.apply_scene_changes(1);
        Ok(self.observe(RunnerFeedback::default()))
    }

    fn step(&mut self, action: &ActionId) -> std::result::Result<EnvStep, EnvError> {
        if self.done {
            return Err(EnvError::Finished);
        }
        let step = self.step_index + 1;
        for ev in self.events.iter().filter(|e| e.step == step) {
            let until = step + ev.duration();
            match ev.kind {
                EventKind::StallZone => self.stall_until = self.stall_until.max(until),
                EventKind::RepetitionTrap => self.trap_until = self.trap_until.max(until),
                EventKind::SceneChange | EventKind::HardFailure => {}
            }
        }
        let mut fb = self.execute(action, step);
        if step < self.stall_until {
            let message = std::mem::take(&mut fb.structured_message);
            fb = RunnerFeedback { invalid_action: fb.invalid_action, execution_error: fb.execution_error, ..Default::default() };
            fb.structured_message = message;
        }
        if self.evaluate_success() {
            fb.task_or_subgoal_completed = true;
            self.done = true;
        }
        self.step_index = step;
        self.apply_scene_changes(step + 1);
        Ok(self.observe(fb))
    }

    fn view(&self) -> GridView {
        self.view.clone()
    }

    fn valid_actions(&self) -> Vec<ActionId> {
        let mut out: Vec<ActionId> = Dir::ALL.iter().map(|d| d.move_action()).collect();
        out.extend(Dir::ALL.iter().map(|d| d.face_action()));
        out.extend(self.view.tools.iter().map(|t| ActionId::new(format!("select:{t}"))));
        out.push(ActionId::new("wait"));
        out
    }

    fn is_success(&self) -> bool {
        self.evaluate_success()
    }

    fn state_summary(&self) -> String {
        let v = &self.view;
        format!(
            "cell {} {} facing {} holding {} goal {} {}",
            v.agent.x,
            v.agent.y,
            v.facing,
            v.selected.as_deref().unwrap_or("nothing"),
            v.target.x,
            v.target.y
        )
    }

    fn task(&self) -> String {
        let v = &self.view;
        match &v.required_tool {
            Some(t) => format!("reach the goal at {} {} holding the {t}", v.target.x, v.target.y),
            None => format!("reach the goal at {} {}", v.target.x, v.target.y),
        }
    }

    fn difficulty(&self) -> Difficulty {
        self.scenario.difficulty()
    }
}
