use std::collections::BTreeSet;

use super::grid::{Dir, GridView, Pos};
use crate::visual::Frame;

pub(crate) const CELL_PX: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Palette {
    Day,
    Night,
}

struct Shades {
    floor: i16,
    wall: u8,
    target: u8,
    item: u8,
    agent: u8,
    marker: u8,
}

impl Palette {
    pub fn flipped(self) -> Palette {
        match self {
            Palette::Day => Palette::Night,
            Palette::Night => Palette::Day,
        }
    }

    fn shades(self) -> Shades {
        match self {
            Palette::Day => Shades { floor: 200, wall: 50, target: 120, item: 165, agent: 150, marker: 240 },
            Palette::Night => Shades { floor: 55, wall: 205, target: 135, item: 90, agent: 105, marker: 15 },
        }
    }
}

/// Flat-shaded grayscale rendering, `CELL_PX` pixels per cell.
pub(crate) fn render(view: &GridView, items: &BTreeSet<Pos>, floor_shade: &[i16], palette: Palette) -> Frame {
    let s = palette.shades();
    let (w, h) = (view.width * CELL_PX, view.height * CELL_PX);
    let mut px = vec![0u8; w * h];
    for cy in 0..view.height {
        for cx in 0..view.width {
            let idx = cy * view.width + cx;
            let base = if view.walls[idx] { s.wall } else { (s.floor + floor_shade[idx]).clamp(0, 255) as u8 };
            fill(&mut px, w, cx * CELL_PX, cy * CELL_PX, CELL_PX, CELL_PX, base);
            let pos = Pos::new(cx, cy);
            if pos == view.target {
                fill(&mut px, w, cx * CELL_PX + 1, cy * CELL_PX + 1, CELL_PX - 2, CELL_PX - 2, s.target);
            } else if items.contains(&pos) {
                fill(&mut px, w, cx * CELL_PX + 3, cy * CELL_PX + 3, 2, 2, s.item);
            }
        }
    }
    let (ax, ay) = (view.agent.x * CELL_PX, view.agent.y * CELL_PX);
    fill(&mut px, w, ax + 2, ay + 2, CELL_PX - 4, CELL_PX - 4, s.agent);
    let (mx, my) = match view.facing {
        Dir::North => (ax + 3, ay + 2),
        Dir::South => (ax + 3, ay + CELL_PX - 4),
        Dir::East => (ax + CELL_PX - 4, ay + 3),
        Dir::West => (ax + 2, ay + 3),
    };
    fill(&mut px, w, mx, my, 2, 2, s.marker);
    Frame::gray(w, h, px).expect("rendered frame dimensions are consistent")
}

fn fill(px: &mut [u8], stride: usize, x0: usize, y0: usize, w: usize, h: usize, value: u8) {
    for y in y0..y0 + h {
        px[y * stride + x0..y * stride + x0 + w].fill(value);
    }
}
