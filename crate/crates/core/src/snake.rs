//! Grid simulation of the Brownian snake under the excursion measure
//! conditioned on `sup ζ > ε`.
//!
//! The lifetime excursion is sampled on an s-grid. Between consecutive grid
//! times the current path is cut back to the (bridge-refined) minimum `m` of
//! the lifetime and then extended by a fresh Brownian piece up to the next
//! lifetime. Each piece carries its exact minimum and its location as a
//! checkpoint, and later cuts inside a piece are drawn from the bridge
//! conditioned to stay above that minimum, so `W_*` carries no error beyond
//! the s-grid. Paths are stored as a tree of checkpoints: every checkpoint
//! keeps a parent link, so any `W_{s_i}` is rebuilt by walking from its tip
//! to the root and two consecutive paths share exactly the checkpoints below
//! their common level.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::excursion::{sample_ito_excursion_on, ExcursionGrid, LifetimeExcursion};
use crate::path::FinitePath;
use crate::rng::std_normal;
use crate::sde::{
    bridge_argmin_fraction, bridge_minimum_value, bridge_point_above, bridge_point_unchecked,
};

const NO_PARENT: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnakeConfig {
    /// Height threshold `ε` of the conditioning `sup ζ > ε`.
    pub eps: f64,
    pub grid: ExcursionGrid,
    /// Maximal lifetime length of one Brownian extension piece.
    pub dt: f64,
    /// Draw bridge minima for the lifetime and for every extension piece.
    pub refine_minimum: bool,
    /// Halve a grid step while the tip is within `refine_k · span^{1/4}`
    /// of the relevant level; 0 turns local refinement off.
    pub refine_k: f64,
    pub refine_depth: u32,
    pub max_nodes: usize,
}

impl SnakeConfig {
    pub fn new(eps: f64, ds: f64, dt: f64) -> Self {
        Self {
            eps,
            grid: ExcursionGrid {
                ds,
                min_steps: 200.0,
                max_steps: 4e6,
            },
            dt,
            refine_minimum: true,
            refine_k: 6.0,
            refine_depth: 16,
            max_nodes: 40_000_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if !(self.eps > 0.0) || !(self.dt > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "snake needs eps > 0 and dt > 0, got eps={} dt={}",
                self.eps, self.dt
            )));
        }
        Ok(())
    }
}

/// When to stop simulating a snake excursion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StopRule {
    /// Run the whole excursion.
    Complete,
    /// Stop as soon as the running minimum is at or below the level.
    AtOrBelow(f64),
    /// Stop once the running minimum is at or below `lower`; otherwise run
    /// to the end, resolving the minimum finely once it is below `upper`.
    Window { upper: f64, lower: f64 },
}

impl StopRule {
    fn stop_level(&self) -> Option<f64> {
        match *self {
            StopRule::Complete => None,
            StopRule::AtOrBelow(level) => Some(level),
            StopRule::Window { lower, .. } => Some(lower),
        }
    }

    /// Level near which grid steps are refined.
    fn target(&self, wstar: f64) -> f64 {
        match *self {
            StopRule::Complete => wstar,
            StopRule::AtOrBelow(level) => level,
            StopRule::Window { upper, .. } => wstar.min(upper),
        }
    }
}

/// Extra level near which the grid is refined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Watch {
    /// Refine near the level until the running minimum reaches it.
    FirstPassage(f64),
    /// Once the running minimum is at or below `from`, refine on both sides
    /// of `origin + frac·(W_* - origin)` for the rest of the run, so that
    /// every subtree crossing that level is resolved.
    Band { frac: f64, from: f64 },
}

impl Watch {
    fn near(&self, tip: f64, wstar: f64, origin: f64, reach: f64) -> bool {
        match *self {
            Watch::FirstPassage(l) => wstar > l && tip - l <= reach,
            Watch::Band { frac, from } => {
                wstar <= from && (tip - (origin + frac * (wstar - origin))).abs() <= reach
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Node {
    lifetime: f64,
    value: f64,
    /// Minimum of the Brownian piece the incoming edge belongs to; the edge
    /// is a bridge conditioned to stay above it.
    floor: f64,
    parent: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    /// Branches off the minimizing path after `s_m`.
    Hat,
    /// Branches off the minimizing path before `s_m`.
    Check,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubtreeRecord {
    pub side: Side,
    /// Lifetime at which the subtree leaves the minimizing path.
    pub branch_level: f64,
    /// Spatial value of the minimizing path at `branch_level`.
    pub attach_value: f64,
    pub min_value: f64,
    /// Maximal lifetime above `branch_level`.
    pub height: f64,
    pub duration: f64,
}

/// Indices of consecutive grid points whose tips lie in the same subtree.
#[derive(Debug, Clone, PartialEq)]
pub struct ExcursionInterval {
    pub side: Side,
    pub level: f64,
    pub attach_value: f64,
    pub first: usize,
    pub last: usize,
}

#[derive(Debug, Clone)]
pub struct SnakeTrajectory {
    excursion: LifetimeExcursion,
    /// `levels[i]`: minimum of the lifetime on `[s_i, s_{i+1}]`.
    levels: Vec<f64>,
    tip_node: Vec<u32>,
    /// `trunc_node[i]`: checkpoint at lifetime `levels[i-1]` on `W_{s_i}`.
    trunc_node: Vec<u32>,
    /// Nodes created while moving to grid index `i` are
    /// `node_start[i]..node_start[i+1]`.
    node_start: Vec<u32>,
    nodes: Vec<Node>,
    origin: f64,
    wstar: f64,
    min_node: u32,
    sm_index: usize,
    complete: bool,
    reversed: bool,
}

/// One snake excursion from the trivial path at 0.
pub fn simulate_snake<R: Rng + ?Sized>(
    eps: f64,
    ds: f64,
    dt: f64,
    rng: &mut R,
) -> Result<SnakeTrajectory> {
    simulate_snake_with(0.0, &SnakeConfig::new(eps, ds, dt), StopRule::Complete, rng)
}

/// One snake excursion from the trivial path at `origin`.
pub fn simulate_snake_with<R: Rng + ?Sized>(
    origin: f64,
    cfg: &SnakeConfig,
    stop: StopRule,
    rng: &mut R,
) -> Result<SnakeTrajectory> {
    simulate_snake_watching(origin, cfg, stop, &[], rng)
}

/// As [`simulate_snake_with`], additionally resolving finely whether the
/// minimum falls below each of the `watch` levels.
pub fn simulate_snake_watching<R: Rng + ?Sized>(
    origin: f64,
    cfg: &SnakeConfig,
    stop: StopRule,
    watch: &[Watch],
    rng: &mut R,
) -> Result<SnakeTrajectory> {
    cfg.validate()?;
    let excursion = sample_ito_excursion_on(cfg.eps, &cfg.grid, rng)?;
    run_snake(origin, excursion, cfg, stop, watch, rng)
}

struct Builder {
    nodes: Vec<Node>,
    levels: Vec<f64>,
    tip_node: Vec<u32>,
    trunc_node: Vec<u32>,
    node_start: Vec<u32>,
    sgrid: Vec<f64>,
    zeta: Vec<f64>,
    wstar: f64,
    min_node: u32,
    sm_index: usize,
    cur: u32,
}

impl Builder {
    fn new(origin: f64, capacity: usize) -> Self {
        let mut nodes = Vec::with_capacity(2 * capacity + 8);
        nodes.push(Node {
            lifetime: 0.0,
            value: origin,
            floor: f64::NEG_INFINITY,
            parent: NO_PARENT,
        });
        Self {
            nodes,
            levels: Vec::with_capacity(capacity),
            tip_node: vec![0],
            trunc_node: vec![0],
            node_start: vec![0],
            sgrid: vec![0.0],
            zeta: vec![0.0],
            wstar: origin,
            min_node: 0,
            sm_index: 0,
            cur: 0,
        }
    }

    fn tip(&self) -> f64 {
        self.nodes[self.cur as usize].value
    }

    fn record_low(&mut self, value: f64, node: u32, step: usize) {
        if value < self.wstar {
            self.wstar = value;
            self.min_node = node;
            self.sm_index = step;
        }
    }

    /// Move the snake from the last grid point to `(s1, z1)`.
    fn step<R: Rng + ?Sized>(&mut self, s1: f64, z1: f64, cfg: &SnakeConfig, rng: &mut R) {
        let refine = cfg.refine_minimum;
        let step = self.tip_node.len();
        self.node_start.push(self.nodes.len() as u32);
        let z0 = *self.zeta.last().unwrap();
        let span = s1 - *self.sgrid.last().unwrap();
        let lower = z0.min(z1);
        let m = if refine {
            bridge_minimum_value(z0, z1, span, rng).clamp(0.0, lower)
        } else {
            lower
        };
        self.levels.push(m);
        self.sgrid.push(s1);
        self.zeta.push(z1);

        // cut the current path back to lifetime m
        let nodes = &mut self.nodes;
        let mut node = self.cur;
        let mut child = NO_PARENT;
        while nodes[node as usize].lifetime > m {
            child = node;
            node = nodes[node as usize].parent;
        }
        let attach = if child == NO_PARENT || nodes[node as usize].lifetime == m {
            node
        } else {
            let a = nodes[node as usize];
            let c = nodes[child as usize];
            let v = if c.floor.is_finite() {
                bridge_point_above(a.lifetime, a.value, c.lifetime, c.value, c.floor, m, rng)
            } else {
                bridge_point_unchecked(a.lifetime, a.value, c.lifetime, c.value, m, rng)
            };
            nodes.push(Node {
                lifetime: m,
                value: v,
                floor: c.floor,
                parent: node,
            });
            let id = (nodes.len() - 1) as u32;
            nodes[child as usize].parent = id;
            self.record_low(v, id, step);
            id
        };
        self.trunc_node.push(attach);

        // grow a fresh Brownian piece from m up to the next lifetime
        let mut prev = attach;
        let length = z1 - m;
        if length > 1e-15 {
            let pieces = (length / cfg.dt).ceil().max(1.0) as usize;
            let piece = length / pieces as f64;
            let sd = piece.sqrt();
            for p in 0..pieces {
                let base = self.nodes[prev as usize];
                let lifetime = if p + 1 == pieces {
                    z1
                } else {
                    base.lifetime + piece
                };
                let span = lifetime - base.lifetime;
                let v = base.value + sd * std_normal(rng);
                let mut parent = prev;
                let mut floor = f64::NEG_INFINITY;
                if refine {
                    let low = bridge_minimum_value(base.value, v, span, rng);
                    let frac = bridge_argmin_fraction(base.value - low, v - low, span, rng);
                    let at = base.lifetime + frac * span;
                    if at > base.lifetime && at < lifetime {
                        self.nodes.push(Node {
                            lifetime: at,
                            value: low,
                            floor: low,
                            parent: prev,
                        });
                        parent = (self.nodes.len() - 1) as u32;
                        floor = low;
                        self.record_low(low, parent, step);
                    }
                }
                self.nodes.push(Node {
                    lifetime,
                    value: v,
                    floor,
                    parent,
                });
                prev = (self.nodes.len() - 1) as u32;
                self.record_low(v, prev, step);
            }
        }
        self.cur = prev;
        self.tip_node.push(prev);
    }
}

/// Drive the snake along a given lifetime excursion.
///
/// With `refine_k > 0` a grid step is halved (up to `refine_depth` times)
/// while the current tip lies within `refine_k · span^{1/4}` of the level
/// that matters: the stopping level, or the running minimum otherwise, or a
/// [`Watch`] level. New lifetime values come from the BES(3)
/// bridge between the grid points.
pub fn run_snake<R: Rng + ?Sized>(
    origin: f64,
    excursion: LifetimeExcursion,
    cfg: &SnakeConfig,
    stop: StopRule,
    watch: &[Watch],
    rng: &mut R,
) -> Result<SnakeTrajectory> {
    let m_pts = excursion.len();
    let mut b = Builder::new(origin, m_pts);
    b.sgrid[0] = excursion.sgrid[0];
    b.zeta[0] = excursion.zeta[0];
    let mut complete = true;
    let mut next = 1;
    // (s, ζ, remaining halvings) still to be reached, innermost last
    let mut pending: Vec<(f64, f64, u32)> = Vec::new();

    'outer: while next < m_pts {
        pending.push((
            excursion.sgrid[next],
            excursion.zeta[next],
            cfg.refine_depth,
        ));
        next += 1;
        while let Some(&(s1, z1, depth)) = pending.last() {
            if stop.stop_level().is_some_and(|level| b.wstar <= level) {
                complete = false;
                break 'outer;
            }
            let target = stop.target(b.wstar);
            if b.nodes.len() > cfg.max_nodes {
                return Err(Error::ResourceLimit(format!(
                    "snake exceeded {} checkpoints",
                    cfg.max_nodes
                )));
            }
            let s0 = *b.sgrid.last().unwrap();
            let z0 = *b.zeta.last().unwrap();
            let span = s1 - s0;
            let reach = cfg.refine_k * span.sqrt().sqrt();
            let tip = b.tip();
            let near =
                tip - target <= reach || watch.iter().any(|w| w.near(tip, b.wstar, origin, reach));
            if depth > 0 && cfg.refine_k > 0.0 && near {
                let mid = 0.5 * (s0 + s1);
                let mut zm = bridge_point_above(s0, z0, s1, z1, 0.0, mid, rng);
                let mut tries = 0;
                while zm > excursion.height && tries < 16 {
                    zm = bridge_point_above(s0, z0, s1, z1, 0.0, mid, rng);
                    tries += 1;
                }
                pending.last_mut().unwrap().2 = depth - 1;
                pending.push((mid, zm.min(excursion.height), depth - 1));
                continue;
            }
            pending.pop();
            b.step(s1, z1, cfg, rng);
        }
    }
    if let Some(level) = stop.stop_level() {
        if b.wstar <= level && (next < m_pts || !pending.is_empty()) {
            complete = false;
        }
    }
    b.node_start.push(b.nodes.len() as u32);

    let mut sgrid = b.sgrid;
    let mut zeta = b.zeta;
    if !complete {
        while let Some((s, z, _)) = pending.pop() {
            sgrid.push(s);
            zeta.push(z);
        }
        sgrid.extend_from_slice(&excursion.sgrid[next..]);
        zeta.extend_from_slice(&excursion.zeta[next..]);
    }
    Ok(SnakeTrajectory {
        excursion: LifetimeExcursion {
            sgrid,
            zeta,
            height: excursion.height,
            ds: excursion.ds,
        },
        levels: b.levels,
        tip_node: b.tip_node,
        trunc_node: b.trunc_node,
        node_start: b.node_start,
        nodes: b.nodes,
        origin,
        wstar: b.wstar,
        min_node: b.min_node,
        sm_index: b.sm_index,
        complete,
        reversed: false,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimumInfo {
    pub wstar: f64,
    pub sm_index: usize,
    pub min_path: FinitePath,
}

impl SnakeTrajectory {
    /// Number of grid points simulated (the whole excursion when complete).
    pub fn len(&self) -> usize {
        self.tip_node.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tip_node.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        self.complete
    }

    pub fn is_reversed(&self) -> bool {
        self.reversed
    }

    pub fn excursion(&self) -> &LifetimeExcursion {
        &self.excursion
    }

    pub fn height(&self) -> f64 {
        self.excursion.height
    }

    /// `σ`.
    pub fn duration(&self) -> f64 {
        self.excursion.duration()
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    fn original_index(&self, i: usize) -> usize {
        if self.reversed {
            self.len() - 1 - i
        } else {
            i
        }
    }

    pub fn sgrid(&self) -> Vec<f64> {
        let n = self.len();
        if self.reversed {
            let sigma = self.excursion.sgrid[n - 1];
            (0..n)
                .map(|i| sigma - self.excursion.sgrid[n - 1 - i])
                .collect()
        } else {
            self.excursion.sgrid[..n].to_vec()
        }
    }

    pub fn zeta(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| self.excursion.zeta[self.original_index(i)])
            .collect()
    }

    /// Tip values `Ŵ_{s_i}`.
    pub fn tips(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| self.nodes[self.tip_node[self.original_index(i)] as usize].value)
            .collect()
    }

    /// `levels()[i]`: bridge-refined minimum of the lifetime on `[s_i, s_{i+1}]`.
    pub fn levels(&self) -> Vec<f64> {
        let mut l = self.levels.clone();
        if self.reversed {
            l.reverse();
        }
        l
    }

    /// `W_*`, including the bridge minima of every extension piece.
    pub fn wstar(&self) -> f64 {
        self.wstar
    }

    /// Grid index whose path contains the minimizing point.
    pub fn sm_index(&self) -> usize {
        self.original_index(self.sm_index)
    }

    pub fn sm_time(&self) -> f64 {
        self.sgrid()[self.sm_index()]
    }

    /// Lifetime `ζ_{s_m}` of the minimizing path.
    pub fn sm_lifetime(&self) -> f64 {
        self.nodes[self.min_node as usize].lifetime
    }

    fn path_to(&self, node: u32) -> FinitePath {
        let mut grid = Vec::new();
        let mut values = Vec::new();
        let mut k = node;
        while k != NO_PARENT {
            let n = &self.nodes[k as usize];
            grid.push(n.lifetime);
            values.push(n.value);
            k = n.parent;
        }
        grid.reverse();
        values.reverse();
        FinitePath::new(grid, values).expect("checkpoint lifetimes increase along a path")
    }

    fn ancestry(&self, node: u32) -> Vec<u32> {
        let mut out = Vec::new();
        let mut k = node;
        while k != NO_PARENT {
            out.push(k);
            k = self.nodes[k as usize].parent;
        }
        out.reverse();
        out
    }

    /// Rebuild `W_{s_i}` from the checkpoint tree.
    pub fn path_at(&self, i: usize) -> FinitePath {
        self.path_to(self.tip_node[self.original_index(i)])
    }

    /// Lifetime of the last checkpoint shared by `W_{s_i}` and `W_{s_j}`.
    pub fn shared_lifetime(&self, i: usize, j: usize) -> f64 {
        let a = self.ancestry(self.tip_node[self.original_index(i)]);
        let b = self.ancestry(self.tip_node[self.original_index(j)]);
        let common = a.iter().zip(&b).take_while(|(x, y)| x == y).count();
        self.nodes[a[common - 1] as usize].lifetime
    }

    /// `(W_*, s_m, W_{s_m})`; the path ends exactly at the minimizing point.
    pub fn extract_minimum(&self) -> MinimumInfo {
        MinimumInfo {
            wstar: self.wstar,
            sm_index: self.sm_index(),
            min_path: self.path_to(self.min_node),
        }
    }

    /// `W_{S_b}` for the first time the tip reaches `-b`, if it does.
    pub fn first_hit_path(&self, b: f64) -> Option<FinitePath> {
        if !(b > 0.0) {
            return None;
        }
        let level = -b;
        let hit = if self.reversed {
            (0..self.len()).find_map(|i| {
                let tip = self.tip_node[self.original_index(i)];
                self.ancestry(tip)
                    .into_iter()
                    .find(|&k| self.nodes[k as usize].value <= level)
            })?
        } else {
            self.nodes.iter().position(|n| n.value <= level)? as u32
        };
        let path = self.path_to(hit);
        let t_hit = path.first_time_at_or_below(level)?;
        let grid = path.grid();
        let k = grid.partition_point(|&g| g < t_hit);
        let mut g: Vec<f64> = grid[..k].to_vec();
        let mut v: Vec<f64> = path.values()[..k].to_vec();
        if g.is_empty() || t_hit > *g.last().unwrap() {
            g.push(t_hit);
            v.push(level);
        } else {
            *v.last_mut().unwrap() = level;
        }
        Some(FinitePath::new(g, v).expect("prefix of a valid path"))
    }

    /// Reverse the trajectory in s: `s ↦ σ - s`.
    pub fn time_reverse(&self) -> Result<SnakeTrajectory> {
        if !self.complete {
            return Err(Error::InvalidArgument(
                "only complete trajectories can be reversed".into(),
            ));
        }
        let mut out = self.clone();
        out.reversed = !self.reversed;
        Ok(out)
    }

    fn record_extent(&self, first: usize, last: usize, level: f64) -> Option<(f64, f64, f64)> {
        let mut min_value = f64::INFINITY;
        let mut max_lifetime = f64::NEG_INFINITY;
        for j in first..=last {
            let range = self.node_start[j] as usize..self.node_start[j + 1] as usize;
            for node in &self.nodes[range] {
                if node.lifetime <= level {
                    continue;
                }
                min_value = min_value.min(node.value);
                max_lifetime = max_lifetime.max(node.lifetime);
            }
        }
        if min_value.is_finite() {
            Some((min_value, max_lifetime - level, 0.0))
        } else {
            None
        }
    }

    /// Group grid indices by the subtree of the minimizing path their tips
    /// belong to (forward orientation).
    fn intervals_forward(&self) -> Vec<ExcursionInterval> {
        let n = self.len();
        let i = self.sm_index;
        let tau = self.nodes[self.min_node as usize].lifetime;
        let mut out = Vec::new();

        // after s_m
        let mut rm = tau;
        let mut current = ExcursionInterval {
            side: Side::Hat,
            level: tau,
            attach_value: self.wstar,
            first: i,
            last: i,
        };
        for j in i + 1..n {
            let lvl = self.levels[j - 1];
            if lvl < rm {
                out.push(current.clone());
                rm = lvl;
                current = ExcursionInterval {
                    side: Side::Hat,
                    level: lvl,
                    attach_value: self.nodes[self.trunc_node[j] as usize].value,
                    first: j,
                    last: j,
                };
            } else {
                current.last = j;
            }
        }
        out.push(current);

        // before s_m, scanning backwards
        let mut rm = tau;
        let mut open: Option<ExcursionInterval> = None;
        for j in (0..i).rev() {
            let lvl = self.levels[j];
            if lvl < rm || open.is_none() {
                if let Some(done) = open.take() {
                    out.push(done);
                }
                rm = rm.min(lvl);
                open = Some(ExcursionInterval {
                    side: Side::Check,
                    level: lvl,
                    attach_value: self.nodes[self.trunc_node[j + 1] as usize].value,
                    first: j,
                    last: j,
                });
            } else if let Some(cur) = open.as_mut() {
                cur.first = j;
            }
        }
        if let Some(done) = open {
            out.push(done);
        }
        out
    }

    /// Excursion intervals of the lifetime above its running minimum, read
    /// forward and backward from `s_m`, as index ranges (`first ≤ last`).
    pub fn excursion_intervals(&self) -> Result<Vec<ExcursionInterval>> {
        if !self.complete {
            return Err(Error::InvalidArgument(
                "subtree decomposition needs a complete trajectory".into(),
            ));
        }
        let mut out = self.intervals_forward();
        if self.reversed {
            let n = self.len();
            for iv in out.iter_mut() {
                iv.side = flip(iv.side);
                let (f, l) = (n - 1 - iv.last, n - 1 - iv.first);
                iv.first = f;
                iv.last = l;
            }
        }
        Ok(out)
    }

    /// One record per subtree branching off the minimizing path.
    pub fn subtree_decomposition(&self) -> Result<Vec<SubtreeRecord>> {
        if !self.complete {
            return Err(Error::InvalidArgument(
                "subtree decomposition needs a complete trajectory".into(),
            ));
        }
        let s = &self.excursion.sgrid;
        let n = self.len();
        let mut out = Vec::new();
        let tau = self.nodes[self.min_node as usize].lifetime;
        // the group at level tau is the stub of W_{s_m} above its minimizing point
        for iv in self
            .intervals_forward()
            .into_iter()
            .filter(|iv| iv.level < tau)
        {
            let Some((min_value, height, _)) = self.record_extent(iv.first, iv.last, iv.level)
            else {
                continue;
            };
            let duration = match iv.side {
                Side::Hat => s[iv.last] - s[iv.first.saturating_sub(1)],
                Side::Check => s[(iv.last + 1).min(n - 1)] - s[iv.first],
            };
            let side = if self.reversed {
                flip(iv.side)
            } else {
                iv.side
            };
            out.push(SubtreeRecord {
                side,
                branch_level: iv.level,
                attach_value: iv.attach_value,
                min_value,
                height,
                duration,
            });
        }
        Ok(out)
    }
}

fn flip(side: Side) -> Side {
    match side {
        Side::Hat => Side::Check,
        Side::Check => Side::Hat,
    }
}

/// Depth band used to count deep subtrees: subtrees whose minimum falls
/// within `depth` of the global minimum `-a`, attached to the minimizing
/// path where it is still more than `attach_depth` above `-a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeepBand {
    pub depth: f64,
    pub attach_depth: f64,
}

impl DeepBand {
    pub fn new(depth: f64, attach_depth: f64) -> Result<Self> {
        if !(depth > 0.0 && attach_depth > depth) {
            return Err(Error::InvalidArgument(format!(
                "deep band needs 0 < depth < attach_depth, got {depth} and {attach_depth}"
            )));
        }
        Ok(Self {
            depth,
            attach_depth,
        })
    }

    pub fn is_deep(&self, record: &SubtreeRecord, a: f64) -> bool {
        record.min_value <= -a + self.depth && record.attach_value > -a + self.attach_depth
    }
}

/// Number of `side` records in the deep band below `-a`.
pub fn count_deep(records: &[SubtreeRecord], side: Side, a: f64, band: &DeepBand) -> usize {
    records
        .iter()
        .filter(|r| r.side == side && band.is_deep(r, a))
        .count()
}
