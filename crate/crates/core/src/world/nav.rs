use std::collections::{BTreeMap, VecDeque};

use super::action::in_reach;
use super::rules::{BlockId, WorldRules};
use super::state::{AgentState, Dir, Pos, WorldState};

/// Nearest block of type `block` with an air neighbour, within the search
/// radius. Ties break on position order.
pub fn nearest_exposed(rules: &WorldRules, world: &WorldState, from: Pos, block: BlockId) -> Option<Pos> {
    let r = rules.interaction.search_radius as i64;
    world
        .solid_blocks()
        .filter(|&(p, b)| b == block && from.distance_sq(p) <= r * r && world.is_exposed(p))
        .map(|(p, _)| (from.distance_sq(p), p))
        .min()
        .map(|(_, p)| p)
}

/// Shortest sequence of unit moves through air that ends within interaction
/// range of `target`. Empty when already in range; `None` if unreachable.
pub fn find_path(rules: &WorldRules, world: &WorldState, agent: &AgentState, target: Pos) -> Option<Vec<Dir>> {
    let start = agent.position;
    let reach = |p: Pos| {
        let probe = AgentState { position: p, ..agent.clone() };
        in_reach(rules, &probe, target)
    };
    if reach(start) {
        return Some(Vec::new());
    }
    let mut prev: BTreeMap<Pos, (Pos, Dir)> = BTreeMap::new();
    let mut queue = VecDeque::from([start]);
    prev.insert(start, (start, Dir::Up));
    while let Some(p) = queue.pop_front() {
        for d in Dir::ALL {
            let n = p.step(d);
            if !world.dims.contains(n) || !world.get(n).is_air() || prev.contains_key(&n) {
                continue;
            }
            prev.insert(n, (p, d));
            if reach(n) {
                let mut path = vec![d];
                let mut cur = p;
                while cur != start {
                    let (back, dir) = prev[&cur];
                    path.push(dir);
                    cur = back;
                }
                path.reverse();
                return Some(path);
            }
            queue.push_back(n);
        }
    }
    None
}

/// An air cell next to the agent where a block can be placed. Horizontal
/// neighbours come first so stations end up at eye level.
pub fn placement_spot(world: &WorldState, agent: &AgentState) -> Option<Pos> {
    let p = agent.position;
    Dir::ALL
        .into_iter()
        .map(|d| p.step(d))
        .find(|&n| world.dims.contains(n) && world.get(n).is_air())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{generate_world, Dims, Scenario};

    #[test]
    fn path_reaches_far_block() {
        let rules = WorldRules::shipped();
        let mut world = generate_world(&rules, 1, Scenario::Empty, Dims::new(16, 8, 16)).unwrap();
        let agent = AgentState::spawn(&world);
        let log = rules.block("log").unwrap();
        let target = Pos::new(1, 3, 1);
        world.set(target, log);
        assert_eq!(nearest_exposed(&rules, &world, agent.position, log), Some(target));
        let path = find_path(&rules, &world, &agent, target).unwrap();
        let mut p = agent.position;
        for d in &path {
            p = p.step(*d);
            assert!(world.get(p).is_air());
        }
        assert!(p.distance(target) <= rules.interaction.range);
        // BFS is shortest: the start is 7 steps away on both x and z.
        let d = agent.position.distance(target);
        assert!(path.len() as f64 >= d - rules.interaction.range - 1e-9);
    }

    #[test]
    fn enclosed_target_is_unreachable() {
        let rules = WorldRules::shipped();
        let mut world = generate_world(&rules, 1, Scenario::Empty, Dims::new(16, 8, 16)).unwrap();
        let stone = rules.block("stone").unwrap();
        let mut agent = AgentState::spawn(&world);
        agent.position = Pos::new(1, 3, 1);
        for d in Dir::ALL {
            let n = agent.position.step(d);
            world.set(n, stone);
        }
        assert_eq!(find_path(&rules, &world, &agent, Pos::new(14, 3, 14)), None);
        assert_eq!(placement_spot(&world, &agent), None);
    }
}
