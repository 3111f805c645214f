pub mod backends;
pub mod datasets;
pub mod eval;
pub mod instruction;
pub mod perception;
pub mod skills;
pub mod world;
