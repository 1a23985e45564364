use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{Cell, RiskCostMap};
use crate::error::{Error, Result};

pub const DEFAULT_SWITCH_WINDOW: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClearanceStatus {
    Clear,
    Blocked,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlannerChoice {
    Classical,
    Reactive,
}

/// Every cell touched by the segment joining the centers of `a` and `b`.
/// When the segment passes exactly through a cell corner both side cells are included.
pub fn supercover_line(a: (i64, i64), b: (i64, i64)) -> Vec<(i64, i64)> {
    let (dx, dy) = ((b.0 - a.0).abs(), (b.1 - a.1).abs());
    let (sx, sy) = ((b.0 - a.0).signum(), (b.1 - a.1).signum());
    // Walk along the major axis; `minor` maps (major, minor) back to (x, y).
    let (major_len, minor_len, swap) = if dx >= dy { (dx, dy, false) } else { (dy, dx, true) };
    let (smaj, smin) = if swap { (sy, sx) } else { (sx, sy) };
    let to_xy = |maj: i64, min: i64| if swap { (min, maj) } else { (maj, min) };
    let (mut maj, mut min) = if swap { (a.1, a.0) } else { (a.0, a.1) };

    let mut out = vec![a];
    let (dd_maj, dd_min) = (2 * major_len, 2 * minor_len);
    let mut error = major_len;
    let mut error_prev = error;
    for _ in 0..major_len {
        maj += smaj;
        error += dd_min;
        if error > dd_maj {
            min += smin;
            error -= dd_maj;
            match (error + error_prev).cmp(&dd_maj) {
                std::cmp::Ordering::Less => out.push(to_xy(maj, min - smin)),
                std::cmp::Ordering::Greater => out.push(to_xy(maj - smaj, min)),
                std::cmp::Ordering::Equal => {
                    out.push(to_xy(maj, min - smin));
                    out.push(to_xy(maj - smaj, min));
                }
            }
        }
        out.push(to_xy(maj, min));
        error_prev = error;
    }
    out
}

/// Blocked iff a rasterized cell is outside the map or costs at least `block_threshold`.
pub fn clearance_check(waypoints: &[Cell], local_map: &RiskCostMap, block_threshold: f64) -> Result<ClearanceStatus> {
    if waypoints.len() < 2 {
        return Err(Error::input("clearance check needs at least two waypoints"));
    }
    let blocked = |(x, y): (i64, i64)| {
        if x < 0 || y < 0 || !local_map.contains((x as usize, y as usize)) {
            return true;
        }
        local_map.cost((x as usize, y as usize)) >= block_threshold
    };
    let as_i = |c: Cell| (c.0 as i64, c.1 as i64);
    for seg in waypoints.windows(2) {
        if supercover_line(as_i(seg[0]), as_i(seg[1])).into_iter().any(blocked) {
            return Ok(ClearanceStatus::Blocked);
        }
    }
    Ok(ClearanceStatus::Clear)
}

/// Hysteresis switch: reactive only while the last `n` statuses are all blocked.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchFilter {
    window: VecDeque<ClearanceStatus>,
    current: PlannerChoice,
}

impl Default for SwitchFilter {
    fn default() -> Self {
        SwitchFilter::new(DEFAULT_SWITCH_WINDOW).expect("default window is positive")
    }
}

impl SwitchFilter {
    /// A fresh filter whose window is padded with `Clear`.
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::input("switch window must hold at least one status"));
        }
        Ok(SwitchFilter { window: vec![ClearanceStatus::Clear; n].into(), current: PlannerChoice::Classical })
    }

    pub fn update(&mut self, status: ClearanceStatus) -> PlannerChoice {
        self.window.pop_front();
        self.window.push_back(status);
        self.current = if self.window.iter().all(|s| *s == ClearanceStatus::Blocked) {
            PlannerChoice::Reactive
        } else {
            PlannerChoice::Classical
        };
        self.current
    }

    pub fn current(&self) -> PlannerChoice {
        self.current
    }

    pub fn window(&self) -> impl Iterator<Item = ClearanceStatus> + '_ {
        self.window.iter().copied()
    }
}
