//! Block registry, tool tiers and the recipe graph, loaded from a versioned
//! TOML file. The shipped file lives in `assets/world.toml`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::WorldError;

pub const SUPPORTED_VERSION: u32 = 1;
pub const SHIPPED_WORLD_TOML: &str = include_str!("../../assets/world.toml");

/// Index into the block registry. `BlockId::AIR` is always 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BlockId(pub u8);

impl BlockId {
    pub const AIR: BlockId = BlockId(0);

    pub fn is_air(self) -> bool {
        self == Self::AIR
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockType {
    pub id: String,
    pub tier: u8,
    pub opaque: bool,
    /// Item added to the inventory when the block is mined.
    pub drop: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Station {
    None,
    CraftingTable,
    Furnace,
}

impl Station {
    pub fn block_id(self) -> Option<&'static str> {
        match self {
            Station::None => None,
            Station::CraftingTable => Some("crafting_table"),
            Station::Furnace => Some("furnace"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Recipe {
    pub output: String,
    pub count: u32,
    pub station: Station,
    pub inputs: BTreeMap<String, u32>,
}

impl Recipe {
    pub fn is_smelting(&self) -> bool {
        self.station == Station::Furnace
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionConfig {
    pub range: f64,
    pub hunger_decay_ticks: u64,
    pub search_radius: i32,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExploreConfig {
    pub lane_spacing: i32,
    pub lane_offset: i32,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlatSearchConfig {
    pub lattice_spacing: i32,
    pub target: String,
    pub obstacles: u32,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TechTreeConfig {
    pub trees: u32,
    pub boulders: u32,
    pub coal_ore: u32,
    pub iron_ore: u32,
    pub diamond_ore: u32,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub surface_y: i32,
    pub flat_search: FlatSearchConfig,
    pub tech_tree_plains: TechTreeConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BlockSpec {
    id: String,
    tier: u8,
    opaque: bool,
    drop: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ToolSpec {
    item: String,
    tier: u8,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FoodSpec {
    item: String,
    restore: u8,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecipeSpec {
    output: String,
    count: u32,
    station: Station,
    inputs: BTreeMap<String, u32>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct WorldFile {
    version: u32,
    interaction: InteractionConfig,
    explore: ExploreConfig,
    scenarios: ScenarioConfig,
    blocks: Vec<BlockSpec>,
    tools: Vec<ToolSpec>,
    food: Vec<FoodSpec>,
    recipes: Vec<RecipeSpec>,
    #[serde(default)]
    aliases: BTreeMap<String, String>,
}

/// Validated, read-only world configuration. Shared between episodes.
#[derive(Debug, Clone)]
pub struct WorldRules {
    pub interaction: InteractionConfig,
    pub explore: ExploreConfig,
    pub scenarios: ScenarioConfig,
    blocks: Vec<BlockType>,
    block_index: BTreeMap<String, BlockId>,
    tools: BTreeMap<String, u8>,
    food: BTreeMap<String, u8>,
    recipes: BTreeMap<String, Recipe>,
    aliases: BTreeMap<String, String>,
}

impl WorldRules {
    pub fn shipped() -> Self {
        Self::from_toml(SHIPPED_WORLD_TOML).expect("shipped world config is valid")
    }

    pub fn load(path: &Path) -> Result<Self, WorldError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| WorldError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, WorldError> {
        let file: WorldFile =
            toml::from_str(text).map_err(|e| WorldError::Config(e.to_string()))?;
        if file.version != SUPPORTED_VERSION {
            return Err(WorldError::Config(format!(
                "unsupported world config version {} (expected {SUPPORTED_VERSION})",
                file.version
            )));
        }
        if file.blocks.first().map(|b| b.id.as_str()) != Some("air") {
            return Err(WorldError::Config("first block must be `air`".into()));
        }
        if file.blocks.len() > u8::MAX as usize {
            return Err(WorldError::Config("too many block types".into()));
        }

        let mut blocks = Vec::with_capacity(file.blocks.len());
        let mut block_index = BTreeMap::new();
        for (i, spec) in file.blocks.into_iter().enumerate() {
            if spec.tier > 4 {
                return Err(WorldError::Config(format!("block `{}` tier > 4", spec.id)));
            }
            if i == 0 && (spec.tier != 0 || spec.opaque) {
                return Err(WorldError::Config("air must have tier 0 and be transparent".into()));
            }
            if block_index.insert(spec.id.clone(), BlockId(i as u8)).is_some() {
                return Err(WorldError::Config(format!("duplicate block id `{}`", spec.id)));
            }
            let drop = spec.drop.unwrap_or_else(|| spec.id.clone());
            blocks.push(BlockType { id: spec.id, tier: spec.tier, opaque: spec.opaque, drop });
        }

        let mut tools = BTreeMap::new();
        for t in file.tools {
            if t.tier == 0 || t.tier > 4 {
                return Err(WorldError::Config(format!("tool `{}` tier must be 1..=4", t.item)));
            }
            tools.insert(t.item, t.tier);
        }
        let food = file.food.into_iter().map(|f| (f.item, f.restore)).collect();

        let mut recipes = BTreeMap::new();
        for r in file.recipes {
            if r.count == 0 {
                return Err(WorldError::Config(format!("recipe `{}` has zero output", r.output)));
            }
            if r.inputs.is_empty() || r.inputs.values().any(|&n| n == 0) {
                return Err(WorldError::Config(format!("recipe `{}` has empty inputs", r.output)));
            }
            let recipe = Recipe { output: r.output, count: r.count, station: r.station, inputs: r.inputs };
            if recipes.insert(recipe.output.clone(), recipe.clone()).is_some() {
                return Err(WorldError::Config(format!(
                    "more than one recipe produces `{}`",
                    recipe.output
                )));
            }
        }

        let rules = WorldRules {
            interaction: file.interaction,
            explore: file.explore,
            scenarios: file.scenarios,
            blocks,
            block_index,
            tools,
            food,
            recipes,
            aliases: file.aliases,
        };
        rules.check_graph()?;
        Ok(rules)
    }

    /// Every recipe input must be craftable or mineable, the graph must be
    /// acyclic, and every station must be a registered block.
    fn check_graph(&self) -> Result<(), WorldError> {
        for r in self.recipes.values() {
            if let Some(station) = r.station.block_id() {
                if self.block(station).is_none() {
                    return Err(WorldError::Config(format!("station `{station}` is not a block")));
                }
            }
            for input in r.inputs.keys() {
                if !self.recipes.contains_key(input) && self.source_block(input).is_none() {
                    return Err(WorldError::Config(format!(
                        "recipe `{}` input `{input}` can be neither crafted nor mined",
                        r.output
                    )));
                }
            }
        }
        // DFS cycle check over craft edges.
        fn visit<'a>(
            rules: &'a WorldRules,
            item: &'a str,
            state: &mut BTreeMap<&'a str, bool>,
        ) -> Result<(), WorldError> {
            match state.get(item) {
                Some(true) => return Ok(()),
                Some(false) => {
                    return Err(WorldError::Config(format!("recipe cycle through `{item}`")))
                }
                None => {}
            }
            state.insert(item, false);
            if let Some(r) = rules.recipes.get(item) {
                for input in r.inputs.keys() {
                    visit(rules, input, state)?;
                }
            }
            state.insert(item, true);
            Ok(())
        }
        let mut state = BTreeMap::new();
        for item in self.recipes.keys() {
            visit(self, item, &mut state)?;
        }
        Ok(())
    }

    pub fn blocks(&self) -> &[BlockType] {
        &self.blocks
    }

    pub fn block(&self, id: &str) -> Option<BlockId> {
        self.block_index.get(id).copied()
    }

    pub fn block_type(&self, id: BlockId) -> &BlockType {
        &self.blocks[id.0 as usize]
    }

    pub fn block_name(&self, id: BlockId) -> &str {
        &self.blocks[id.0 as usize].id
    }

    pub fn is_registered(&self, id: BlockId) -> bool {
        (id.0 as usize) < self.blocks.len()
    }

    pub fn tool_tier(&self, item: &str) -> Option<u8> {
        self.tools.get(item).copied()
    }

    pub fn tools(&self) -> impl Iterator<Item = (&str, u8)> {
        self.tools.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn food_value(&self, item: &str) -> Option<u8> {
        self.food.get(item).copied()
    }

    pub fn recipe(&self, output: &str) -> Option<&Recipe> {
        self.recipes.get(output)
    }

    pub fn recipes(&self) -> impl Iterator<Item = &Recipe> {
        self.recipes.values()
    }

    /// The block whose drop is `item`, preferring the lowest tier when several
    /// blocks drop the same item. Placed-only blocks (planks, tables) still
    /// count, which is why crafted items are checked first by callers.
    pub fn source_block(&self, item: &str) -> Option<BlockId> {
        self.blocks
            .iter()
            .enumerate()
            .skip(1)
            .filter(|(_, b)| b.drop == item)
            .min_by_key(|(i, b)| (b.tier, *i))
            .map(|(i, _)| BlockId(i as u8))
    }

    pub fn is_known_item(&self, name: &str) -> bool {
        self.block_index.contains_key(name)
            || self.recipes.contains_key(name)
            || self.tools.contains_key(name)
            || self.food.contains_key(name)
            || self.blocks.iter().any(|b| b.drop == name)
    }

    /// Known item and block names, sorted.
    pub fn vocabulary(&self) -> Vec<String> {
        let mut names: Vec<String> = self.block_index.keys().cloned().collect();
        names.extend(self.recipes.keys().cloned());
        names.extend(self.tools.keys().cloned());
        names.extend(self.food.keys().cloned());
        names.extend(self.blocks.iter().map(|b| b.drop.clone()));
        names.retain(|n| n != "air");
        names.sort();
        names.dedup();
        names
    }

    pub fn alias(&self, word: &str) -> Option<&str> {
        self.aliases.get(word).map(String::as_str)
    }

    /// True if a tool of tier `tool_tier` may mine `block`.
    pub fn can_mine(&self, tool_tier: u8, block: BlockId) -> bool {
        tool_tier >= self.block_type(block).tier
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_rules_load() {
        let rules = WorldRules::shipped();
        assert_eq!(rules.block("air"), Some(BlockId::AIR));
        let air = rules.block_type(BlockId::AIR);
        assert_eq!(air.tier, 0);
        assert!(!air.opaque);
        let diamond = rules.block("diamond_ore").unwrap();
        assert_eq!(rules.block_type(diamond).tier, 3);
        assert_eq!(rules.tool_tier("iron_pickaxe"), Some(3));
        assert_eq!(rules.block_type(rules.block("log").unwrap()).tier, 0);
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = SHIPPED_WORLD_TOML.replace("[interaction]", "[interaction]\nbogus = 1");
        assert!(matches!(WorldRules::from_toml(&text), Err(WorldError::Config(_))));
    }

    #[test]
    fn wrong_version_rejected() {
        let text = SHIPPED_WORLD_TOML.replacen("version = 1", "version = 2", 1);
        let err = WorldRules::from_toml(&text).unwrap_err();
        assert!(err.to_string().contains("version"));
    }

    #[test]
    fn duplicate_recipe_output_rejected() {
        let text = format!(
            "{SHIPPED_WORLD_TOML}\n[[recipes]]\noutput = \"plank\"\ncount = 2\nstation = \"none\"\ninputs = {{ log = 1 }}\n"
        );
        assert!(WorldRules::from_toml(&text).is_err());
    }

    #[test]
    fn cycle_rejected() {
        let text = format!(
            "{SHIPPED_WORLD_TOML}\n[[recipes]]\noutput = \"log\"\ncount = 1\nstation = \"none\"\ninputs = {{ plank = 4 }}\n"
        );
        let err = WorldRules::from_toml(&text).unwrap_err();
        assert!(err.to_string().contains("cycle"), "{err}");
    }

    #[test]
    fn monotone_tiers() {
        let rules = WorldRules::shipped();
        for (i, _) in rules.blocks().iter().enumerate() {
            let b = BlockId(i as u8);
            for t in 0..=4u8 {
                if rules.can_mine(t, b) {
                    assert!((t..=4).all(|u| rules.can_mine(u, b)));
                }
            }
        }
    }

    #[test]
    fn sources() {
        let rules = WorldRules::shipped();
        assert_eq!(rules.source_block("cobblestone"), rules.block("stone"));
        assert_eq!(rules.source_block("diamond"), rules.block("diamond_ore"));
        assert_eq!(rules.source_block("log"), rules.block("log"));
        assert_eq!(rules.source_block("stick"), None);
    }
}
