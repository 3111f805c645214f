//! First-hit visibility by voxel ray traversal, and the occlusion-free
//! footprint used by the proximity ablation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::rules::{BlockId, WorldRules};
use super::state::{AgentState, Pos, WorldState};

/// Visible or nearby blocks keyed by position.
pub type Visible = BTreeMap<Pos, BlockId>;

/// Eye height above the floor of the agent's voxel.
pub const EYE_HEIGHT: f64 = 0.62;

/// Horizontal footprint offsets for the proximity set: an 8x8 square has no
/// center cell, so it spans `[-4, 3]` on each axis.
pub const FOOTPRINT: (i32, i32) = (-4, 3);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViewConfig {
    pub fov_deg: f64,
    pub max_dist: f64,
    /// Rays per degree along each axis of the angular grid.
    pub rays_per_degree: f64,
}

impl Default for ViewConfig {
    fn default() -> Self {
        ViewConfig { fov_deg: 90.0, max_dist: 32.0, rays_per_degree: 1.0 }
    }
}

impl ViewConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.fov_deg > 0.0 && self.fov_deg <= 180.0) {
            return Err(format!("fov_deg must be in (0, 180], got {}", self.fov_deg));
        }
        if !(self.max_dist >= 1.0 && self.max_dist <= 256.0) {
            return Err(format!("max_dist must be in [1, 256], got {}", self.max_dist));
        }
        if !(self.rays_per_degree > 0.0 && self.rays_per_degree <= 8.0) {
            return Err(format!("rays_per_degree must be in (0, 8], got {}", self.rays_per_degree));
        }
        Ok(())
    }

    /// Rays per axis of the square angular grid.
    pub fn rays_per_axis(&self) -> usize {
        ((self.fov_deg * self.rays_per_degree).round() as usize).max(1)
    }

    /// Angular offsets, in degrees, of ray centers along one axis.
    pub fn offsets(&self) -> Vec<f64> {
        let n = self.rays_per_axis();
        let step = self.fov_deg / n as f64;
        (0..n).map(|i| -self.fov_deg / 2.0 + (i as f64 + 0.5) * step).collect()
    }
}

pub fn eye(agent: &AgentState) -> [f64; 3] {
    let p = agent.position;
    [p.x as f64 + 0.5, p.y as f64 + EYE_HEIGHT, p.z as f64 + 0.5]
}

/// Unit view direction. Yaw 0 faces +x, yaw 90 faces +z; positive pitch looks up.
pub fn gaze(yaw_deg: f64, pitch_deg: f64) -> [f64; 3] {
    let (y, p) = (yaw_deg.to_radians(), pitch_deg.to_radians());
    [p.cos() * y.cos(), p.sin(), p.cos() * y.sin()]
}

/// Parameter along the ray where it crosses the axis plane at `plane`.
#[inline]
fn plane_t(plane: i32, origin: f64, dir: f64) -> f64 {
    (plane as f64 - origin) / dir
}

/// Blocks hit along every ray of the angular grid. Each ray records every
/// non-air voxel it passes through and stops after the first opaque one or
/// once it enters a voxel farther than `max_dist`.
pub fn visible_set(rules: &WorldRules, world: &WorldState, agent: &AgentState, cfg: &ViewConfig) -> Visible {
    let origin = eye(agent);
    let offsets = cfg.offsets();
    let mut out = Visible::new();
    for &dp in &offsets {
        for &dy in &offsets {
            let dir = gaze(agent.yaw + dy, agent.pitch + dp);
            cast(rules, world, origin, dir, cfg.max_dist, &mut out);
        }
    }
    out
}

fn cast(rules: &WorldRules, world: &WorldState, o: [f64; 3], d: [f64; 3], max_dist: f64, out: &mut Visible) {
    let mut v = [o[0].floor() as i32, o[1].floor() as i32, o[2].floor() as i32];
    let step: [i32; 3] = std::array::from_fn(|a| if d[a] > 0.0 { 1 } else if d[a] < 0.0 { -1 } else { 0 });
    let next_t = |v: &[i32; 3], a: usize| -> f64 {
        match step[a] {
            0 => f64::INFINITY,
            1 => plane_t(v[a] + 1, o[a], d[a]),
            _ => plane_t(v[a], o[a], d[a]),
        }
    };
    let mut t_enter = 0.0f64;
    loop {
        let p = Pos::new(v[0], v[1], v[2]);
        if !world.dims.contains(p) || t_enter > max_dist {
            return;
        }
        let t: [f64; 3] = std::array::from_fn(|a| next_t(&v, a));
        let t_exit = t[0].min(t[1]).min(t[2]);
        let block = world.get(p);
        // Voxels grazed at a single edge or corner are not seen.
        if !block.is_air() && t_exit > t_enter {
            out.insert(p, block);
            if rules.block_type(block).opaque {
                return;
            }
        }
        for a in 0..3 {
            if t[a] == t_exit {
                v[a] += step[a];
            }
        }
        t_enter = t_exit;
    }
}

/// Every non-air block in the 8x8 column footprint around the agent.
pub fn proximity_set(world: &WorldState, agent: &AgentState) -> Visible {
    let p = agent.position;
    let mut out = Visible::new();
    for y in 0..world.dims.y as i32 {
        for dz in FOOTPRINT.0..=FOOTPRINT.1 {
            for dx in FOOTPRINT.0..=FOOTPRINT.1 {
                let q = Pos::new(p.x + dx, y, p.z + dz);
                let b = world.get(q);
                if world.dims.contains(q) && !b.is_air() {
                    out.insert(q, b);
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{generate_world, Dims, Scenario};

    fn setup() -> (WorldRules, WorldState, AgentState) {
        let rules = WorldRules::shipped();
        let world = generate_world(&rules, 1, Scenario::Empty, Dims::new(16, 8, 16)).unwrap();
        let agent = AgentState::spawn(&world);
        (rules, world, agent)
    }

    #[test]
    fn block_ahead_is_seen_and_behind_is_not() {
        let (rules, mut world, agent) = setup();
        let log = rules.block("log").unwrap();
        let ahead = agent.position.offset(3, 0, 0);
        let behind = agent.position.offset(-3, 0, 0);
        world.set(ahead, log);
        world.set(behind, log);
        let seen = visible_set(&rules, &world, &agent, &ViewConfig::default());
        assert_eq!(seen.get(&ahead), Some(&log));
        assert!(!seen.contains_key(&behind));
    }

    #[test]
    fn wall_occludes() {
        let (rules, mut world, agent) = setup();
        let stone = rules.block("stone").unwrap();
        let diamond = rules.block("diamond_ore").unwrap();
        let p = agent.position;
        for dy in -1..=1 {
            for dz in -1..=1 {
                world.set(p.offset(2, dy, dz), stone);
            }
        }
        let hidden = p.offset(4, 0, 0);
        world.set(hidden, diamond);
        let cfg = ViewConfig { fov_deg: 30.0, ..ViewConfig::default() };
        let seen = visible_set(&rules, &world, &agent, &cfg);
        assert!(!seen.contains_key(&hidden));
        assert!(seen.contains_key(&p.offset(2, 0, 0)));
    }

    #[test]
    fn leaves_do_not_occlude() {
        let (rules, mut world, agent) = setup();
        let leaves = rules.block("leaves").unwrap();
        let log = rules.block("log").unwrap();
        let p = agent.position;
        world.set(p.offset(2, 0, 0), leaves);
        world.set(p.offset(4, 0, 0), log);
        let seen = visible_set(&rules, &world, &agent, &ViewConfig::default());
        assert!(seen.contains_key(&p.offset(2, 0, 0)));
        assert!(seen.contains_key(&p.offset(4, 0, 0)));
    }

    #[test]
    fn proximity_footprint() {
        let rules = WorldRules::shipped();
        let mut world = generate_world(&rules, 1, Scenario::Empty, Dims::new(32, 8, 32)).unwrap();
        let agent = AgentState::spawn(&world);
        let above: Vec<_> = proximity_set(&world, &agent)
            .into_keys()
            .filter(|q| q.y >= rules.scenarios.surface_y)
            .collect();
        assert!(above.is_empty());
        let diamond = rules.block("diamond_ore").unwrap();
        let p = agent.position;
        let inside = p.offset(3, 0, 3);
        let outside = p.offset(9, 0, 0);
        world.set(inside, diamond);
        world.set(outside, diamond);
        // Bury the inside block so it is occluded from every direction.
        for q in [inside.offset(-1, 0, 0), inside.offset(0, 0, -1), inside.offset(0, 1, 0)] {
            world.set(q, rules.block("stone").unwrap());
        }
        let near = proximity_set(&world, &agent);
        assert_eq!(near.get(&inside), Some(&diamond));
        assert!(!near.contains_key(&outside));
    }

    #[test]
    fn grid_offsets_are_centered() {
        let cfg = ViewConfig { fov_deg: 4.0, max_dist: 8.0, rays_per_degree: 1.0 };
        assert_eq!(cfg.offsets(), vec![-1.5, -0.5, 0.5, 1.5]);
        assert!(ViewConfig { fov_deg: 0.0, ..cfg }.validate().is_err());
        assert!(ViewConfig { max_dist: 0.5, ..cfg }.validate().is_err());
    }
}
