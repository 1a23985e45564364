use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::SQRT_2;

use super::{Cell, RiskCostMap};
use crate::error::{Error, Result};

/// An 8-connected path with its accumulated cost (start cell excluded).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Path {
    pub cells: Vec<Cell>,
    pub cost: f64,
}

impl Path {
    /// Consecutive cells differ by one king move.
    pub fn is_connected(&self) -> bool {
        self.cells.windows(2).all(|w| {
            let dx = w[0].0.abs_diff(w[1].0);
            let dy = w[0].1.abs_diff(w[1].1);
            dx <= 1 && dy <= 1 && dx + dy > 0
        })
    }
}

pub(crate) fn step_weight(from: Cell, to: Cell) -> f64 {
    if from.0 != to.0 && from.1 != to.1 {
        SQRT_2
    } else {
        1.0
    }
}

pub fn octile_distance(a: Cell, b: Cell) -> f64 {
    let dx = a.0.abs_diff(b.0) as f64;
    let dy = a.1.abs_diff(b.1) as f64;
    dx.max(dy) + (SQRT_2 - 1.0) * dx.min(dy)
}

pub(crate) fn neighbors(cell: Cell, width: usize, height: usize) -> impl Iterator<Item = Cell> {
    let (x, y) = (cell.0 as isize, cell.1 as isize);
    (-1isize..=1)
        .flat_map(move |dy| (-1isize..=1).map(move |dx| (x + dx, y + dy)))
        .filter(move |&(nx, ny)| {
            (nx, ny) != (x, y) && nx >= 0 && ny >= 0 && (nx as usize) < width && (ny as usize) < height
        })
        .map(|(nx, ny)| (nx as usize, ny as usize))
}

#[derive(PartialEq)]
struct Entry {
    f: f64,
    seq: u64,
    index: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.f.total_cmp(&self.f).then_with(|| other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub(crate) fn check_endpoints(map: &RiskCostMap, start: Cell, goal: Cell) -> Result<()> {
    for (name, cell) in [("start", start), ("goal", goal)] {
        if !map.contains(cell) {
            return Err(Error::input(format!("{name} {cell:?} is outside the map")));
        }
        if !map.cost(cell).is_finite() {
            return Err(Error::input(format!("{name} {cell:?} has infinite cost")));
        }
    }
    Ok(())
}

pub fn astar(map: &RiskCostMap, start: Cell, goal: Cell) -> Result<Path> {
    check_endpoints(map, start, goal)?;
    let (w, h) = (map.width(), map.height());
    let idx = |c: Cell| c.1 * w + c.0;
    let scale = map.min_finite_cost().unwrap_or(0.0);
    let heuristic = |c: Cell| octile_distance(c, goal) * scale;

    let mut g = vec![f64::INFINITY; w * h];
    let mut parent = vec![usize::MAX; w * h];
    let mut closed = vec![false; w * h];
    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    g[idx(start)] = 0.0;
    heap.push(Entry { f: heuristic(start), seq, index: idx(start) });

    while let Some(Entry { index, .. }) = heap.pop() {
        if closed[index] {
            continue;
        }
        closed[index] = true;
        let cell = (index % w, index / w);
        if cell == goal {
            let mut cells = vec![cell];
            let mut cur = index;
            while parent[cur] != usize::MAX {
                cur = parent[cur];
                cells.push((cur % w, cur / w));
            }
            cells.reverse();
            return Ok(Path { cells, cost: g[index] });
        }
        for next in neighbors(cell, w, h) {
            let ni = idx(next);
            let c = map.cost(next);
            if closed[ni] || !c.is_finite() {
                continue;
            }
            let tentative = g[index] + c * step_weight(cell, next);
            if tentative < g[ni] {
                g[ni] = tentative;
                parent[ni] = index;
                seq += 1;
                heap.push(Entry { f: tentative + heuristic(next), seq, index: ni });
            }
        }
    }
    Err(Error::Unreachable { start, goal })
}
