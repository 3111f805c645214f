use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::rules::{BlockId, WorldRules};
use super::scenario::Scenario;

/// Integer voxel coordinate. Serialized as `[x, y, z]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "[i32; 3]", into = "[i32; 3]")]
pub struct Pos {
    pub x: i32,
    pub y: i32,
    pub z: i32,
}

impl Pos {
    pub const fn new(x: i32, y: i32, z: i32) -> Self {
        Pos { x, y, z }
    }

    pub fn offset(self, dx: i32, dy: i32, dz: i32) -> Self {
        Pos::new(self.x + dx, self.y + dy, self.z + dz)
    }

    pub fn step(self, dir: Dir) -> Self {
        let (dx, dy, dz) = dir.delta();
        self.offset(dx, dy, dz)
    }

    pub fn center(self) -> [f64; 3] {
        [self.x as f64 + 0.5, self.y as f64 + 0.5, self.z as f64 + 0.5]
    }

    /// Euclidean distance between voxel centers.
    pub fn distance(self, other: Pos) -> f64 {
        let dx = (self.x - other.x) as f64;
        let dy = (self.y - other.y) as f64;
        let dz = (self.z - other.z) as f64;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    pub fn distance_sq(self, other: Pos) -> i64 {
        let dx = (self.x - other.x) as i64;
        let dy = (self.y - other.y) as i64;
        let dz = (self.z - other.z) as i64;
        dx * dx + dy * dy + dz * dz
    }
}

impl From<[i32; 3]> for Pos {
    fn from(v: [i32; 3]) -> Self {
        Pos::new(v[0], v[1], v[2])
    }
}

impl From<Pos> for [i32; 3] {
    fn from(p: Pos) -> Self {
        [p.x, p.y, p.z]
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.x, self.y, self.z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[u32; 3]", into = "[u32; 3]")]
pub struct Dims {
    pub x: u32,
    pub y: u32,
    pub z: u32,
}

impl Dims {
    pub const fn new(x: u32, y: u32, z: u32) -> Self {
        Dims { x, y, z }
    }

    pub fn volume(self) -> usize {
        self.x as usize * self.y as usize * self.z as usize
    }

    pub fn contains(self, p: Pos) -> bool {
        p.x >= 0
            && p.y >= 0
            && p.z >= 0
            && (p.x as u32) < self.x
            && (p.y as u32) < self.y
            && (p.z as u32) < self.z
    }
}

impl From<[u32; 3]> for Dims {
    fn from(v: [u32; 3]) -> Self {
        Dims::new(v[0], v[1], v[2])
    }
}

impl From<Dims> for [u32; 3] {
    fn from(d: Dims) -> Self {
        [d.x, d.y, d.z]
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.x, self.y, self.z)
    }
}

/// Unit moves. East is +x, south is +z.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dir {
    North,
    South,
    East,
    West,
    Up,
    Down,
}

impl Dir {
    pub const ALL: [Dir; 6] = [Dir::East, Dir::West, Dir::South, Dir::North, Dir::Up, Dir::Down];

    pub fn delta(self) -> (i32, i32, i32) {
        match self {
            Dir::North => (0, 0, -1),
            Dir::South => (0, 0, 1),
            Dir::East => (1, 0, 0),
            Dir::West => (-1, 0, 0),
            Dir::Up => (0, 1, 0),
            Dir::Down => (0, -1, 0),
        }
    }

    /// Yaw that faces along this direction, for horizontal moves.
    pub fn yaw(self) -> Option<f64> {
        match self {
            Dir::East => Some(0.0),
            Dir::South => Some(90.0),
            Dir::West => Some(180.0),
            Dir::North => Some(270.0),
            Dir::Up | Dir::Down => None,
        }
    }

    pub fn parse(s: &str) -> Option<Dir> {
        Some(match s {
            "north" => Dir::North,
            "south" => Dir::South,
            "east" => Dir::East,
            "west" => Dir::West,
            "up" => Dir::Up,
            "down" => Dir::Down,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Dir::North => "north",
            Dir::South => "south",
            Dir::East => "east",
            Dir::West => "west",
            Dir::Up => "up",
            Dir::Down => "down",
        }
    }
}

/// The voxel grid. Voxels are stored x-fastest, then z, then y.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorldState {
    pub dims: Dims,
    voxels: Vec<BlockId>,
    pub rng_seed: u64,
    pub scenario: Scenario,
    pub tick: u64,
    pub spawn: Pos,
}

impl WorldState {
    pub(crate) fn filled(dims: Dims, seed: u64, scenario: Scenario) -> Self {
        WorldState {
            dims,
            voxels: vec![BlockId::AIR; dims.volume()],
            rng_seed: seed,
            scenario,
            tick: 0,
            spawn: Pos::new(0, 0, 0),
        }
    }

    fn index(&self, p: Pos) -> usize {
        (p.y as usize * self.dims.z as usize + p.z as usize) * self.dims.x as usize + p.x as usize
    }

    /// Block at `p`; out-of-bounds positions read as air.
    pub fn get(&self, p: Pos) -> BlockId {
        if self.dims.contains(p) {
            self.voxels[self.index(p)]
        } else {
            BlockId::AIR
        }
    }

    /// Overwrites one voxel, for building test and editor worlds. Returns
    /// false if `p` is outside the world.
    pub fn put(&mut self, p: Pos, block: BlockId) -> bool {
        if !self.dims.contains(p) {
            return false;
        }
        self.set(p, block);
        true
    }

    pub(crate) fn set(&mut self, p: Pos, block: BlockId) {
        debug_assert!(self.dims.contains(p));
        let i = self.index(p);
        self.voxels[i] = block;
    }

    pub fn voxel_bytes(&self) -> Vec<u8> {
        self.voxels.iter().map(|b| b.0).collect()
    }

    pub fn positions(&self) -> impl Iterator<Item = Pos> + '_ {
        let d = self.dims;
        (0..d.y as i32).flat_map(move |y| {
            (0..d.z as i32).flat_map(move |z| (0..d.x as i32).map(move |x| Pos::new(x, y, z)))
        })
    }

    /// All non-air blocks with their positions, in storage order.
    pub fn solid_blocks(&self) -> impl Iterator<Item = (Pos, BlockId)> + '_ {
        self.positions().map(|p| (p, self.get(p))).filter(|(_, b)| !b.is_air())
    }

    pub fn count(&self, block: BlockId) -> usize {
        self.voxels.iter().filter(|&&b| b == block).count()
    }

    pub fn all_registered(&self, rules: &WorldRules) -> bool {
        self.voxels.iter().all(|&b| rules.is_registered(b))
    }

    /// True if `p` is in bounds and has at least one in-bounds air neighbour.
    pub fn is_exposed(&self, p: Pos) -> bool {
        Dir::ALL.iter().any(|&d| {
            let n = p.step(d);
            self.dims.contains(n) && self.get(n).is_air()
        })
    }
}

pub const MAX_VITAL: u8 = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub position: Pos,
    pub yaw: f64,
    pub pitch: f64,
    pub health: u8,
    pub hunger: u8,
    pub inventory: BTreeMap<String, u32>,
    pub equipped: Option<String>,
}

impl AgentState {
    pub fn spawn(world: &WorldState) -> Self {
        AgentState {
            position: world.spawn,
            yaw: 0.0,
            pitch: 0.0,
            health: MAX_VITAL,
            hunger: MAX_VITAL,
            inventory: BTreeMap::new(),
            equipped: None,
        }
    }

    pub fn count(&self, item: &str) -> u32 {
        self.inventory.get(item).copied().unwrap_or(0)
    }

    pub(crate) fn add(&mut self, item: &str, n: u32) {
        if n > 0 {
            *self.inventory.entry(item.to_string()).or_insert(0) += n;
        }
    }

    /// Removes `n` of `item`; callers check availability first.
    pub(crate) fn remove(&mut self, item: &str, n: u32) {
        let left = self.count(item).saturating_sub(n);
        if left == 0 {
            self.inventory.remove(item);
            if self.equipped.as_deref() == Some(item) {
                self.equipped = None;
            }
        } else {
            self.inventory.insert(item.to_string(), left);
        }
    }

    pub fn tool_tier(&self, rules: &WorldRules) -> u8 {
        self.equipped.as_deref().and_then(|i| rules.tool_tier(i)).unwrap_or(0)
    }

    pub fn check_invariants(&self, world: &WorldState) -> bool {
        world.dims.contains(self.position)
            && self.health <= MAX_VITAL
            && self.hunger <= MAX_VITAL
            && self.inventory.values().all(|&n| n > 0)
    }
}
