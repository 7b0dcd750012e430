#![allow(dead_code)]

use deliberate::sim::{Dir, EventKind, Scenario, ScriptedEvent};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random solvable-or-not room with random events, reproducible from `seed`.
pub fn random_scenario(seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = rng.random_range(5..=12usize);
    let h = rng.random_range(5..=12usize);
    let mut cells = vec![vec!['.'; w]; h];
    for (y, row) in cells.iter_mut().enumerate() {
        for (x, c) in row.iter_mut().enumerate() {
            if x == 0 || y == 0 || x == w - 1 || y == h - 1 || rng.random_bool(0.18) {
                *c = '#';
            }
        }
    }
    let mut free: Vec<(usize, usize)> = (1..h - 1).flat_map(|y| (1..w - 1).map(move |x| (x, y))).collect();
    free.shuffle(&mut rng);
    let (ax, ay) = free[0];
    let (tx, ty) = free[1];
    cells[ay][ax] = 'A';
    cells[ty][tx] = 'T';
    for &(x, y) in free.iter().skip(2).take(rng.random_range(0..3)) {
        cells[y][x] = '*';
    }
    let tools: Vec<String> = ["axe", "hoe", "rod"][..rng.random_range(0..=3)].iter().map(|s| s.to_string()).collect();
    let required_tool = if tools.is_empty() || rng.random_bool(0.3) { None } else { Some(tools[0].clone()) };
    let kinds = [EventKind::SceneChange, EventKind::StallZone, EventKind::RepetitionTrap, EventKind::HardFailure];
    let mut events: Vec<ScriptedEvent> = Vec::new();
    for _ in 0..rng.random_range(0..5) {
        let ev = ScriptedEvent::new(kinds[rng.random_range(0..4)], rng.random_range(1..=25));
        if !events.iter().any(|e| e.kind == ev.kind && e.step == ev.step) {
            events.push(ev);
        }
    }
    Scenario {
        name: format!("random-{seed}"),
        description: String::new(),
        map: cells.into_iter().map(|r| r.into_iter().collect()).collect(),
        facing: Dir::ALL[rng.random_range(0..4)],
        tools,
        required_tool,
        selected_tool: None,
        difficulty: None,
        events,
    }
}
