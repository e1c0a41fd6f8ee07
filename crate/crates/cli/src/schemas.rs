//! JSON Schemas for the file formats, bundled from `schemas/`.

pub const VOXEL: &str = include_str!("../../../schemas/voxel.schema.json");
pub const SHAPE_SET: &str = include_str!("../../../schemas/shape_set.schema.json");
pub const GRAMMAR: &str = include_str!("../../../schemas/grammar.schema.json");
pub const PRODUCTION: &str = include_str!("../../../schemas/production.schema.json");

/// Looks a schema up by format name (`voxel`, `shape_set`, `grammar`,
/// `production`).
pub fn by_name(name: &str) -> Option<&'static str> {
    match name {
        "voxel" => Some(VOXEL),
        "shape_set" => Some(SHAPE_SET),
        "grammar" => Some(GRAMMAR),
        "production" => Some(PRODUCTION),
        _ => None,
    }
}
