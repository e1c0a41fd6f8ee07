//! Blocks, grid positions and voxel models, plus the Voxel JSON format.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Sub};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// An opaque block type token such as `"stone"` or `"glass"`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BlockType(Arc<str>);

impl BlockType {
    /// Panics on an empty token; use [`BlockType::try_new`] for untrusted input.
    pub fn new(token: &str) -> Self {
        Self::try_new(token).expect("block type token must be non-empty")
    }

    pub fn try_new(token: &str) -> Result<Self, VoxelError> {
        if token.is_empty() {
            return Err(VoxelError::EmptyBlockType);
        }
        Ok(Self(Arc::from(token)))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for BlockType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.0)
    }
}

impl fmt::Display for BlockType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for BlockType {
    fn from(s: &str) -> Self {
        Self::new(s)
    }
}

/// One of the three grid axes. `Z` is vertical.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    /// The axis this one becomes under a rotation by `quarter_turns · π/2` about z.
    pub fn rotated(self, quarter_turns: u8) -> Axis {
        match (self, quarter_turns % 2) {
            (Axis::Z, _) | (_, 0) => self,
            (Axis::X, _) => Axis::Y,
            (Axis::Y, _) => Axis::X,
        }
    }
}

/// An integer grid cell. Ordered by `(z, y, x)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(from = "[i32; 3]", into = "[i32; 3]")]
pub struct GridPos {
    pub x: i32,
    pub y: i32,
    pub z: i32,
}

impl GridPos {
    pub const ORIGIN: GridPos = GridPos { x: 0, y: 0, z: 0 };

    pub const fn new(x: i32, y: i32, z: i32) -> Self {
        Self { x, y, z }
    }

    pub fn get(self, axis: Axis) -> i32 {
        match axis {
            Axis::X => self.x,
            Axis::Y => self.y,
            Axis::Z => self.z,
        }
    }

    pub fn with(mut self, axis: Axis, value: i32) -> Self {
        match axis {
            Axis::X => self.x = value,
            Axis::Y => self.y = value,
            Axis::Z => self.z = value,
        }
        self
    }

    /// This position moved `amount` cells along `axis`.
    pub fn shifted(self, axis: Axis, amount: i32) -> Self {
        self.with(axis, self.get(axis) + amount)
    }

    pub fn component_min(self, other: Self) -> Self {
        Self::new(self.x.min(other.x), self.y.min(other.y), self.z.min(other.z))
    }

    pub fn component_max(self, other: Self) -> Self {
        Self::new(self.x.max(other.x), self.y.max(other.y), self.z.max(other.z))
    }

    pub fn manhattan(self, other: Self) -> u32 {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y) + self.z.abs_diff(other.z)
    }
}

impl Ord for GridPos {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.z, self.y, self.x).cmp(&(other.z, other.y, other.x))
    }
}

impl PartialOrd for GridPos {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl From<[i32; 3]> for GridPos {
    fn from([x, y, z]: [i32; 3]) -> Self {
        Self { x, y, z }
    }
}

impl From<GridPos> for [i32; 3] {
    fn from(p: GridPos) -> Self {
        [p.x, p.y, p.z]
    }
}

impl Add for GridPos {
    type Output = GridPos;
    fn add(self, o: GridPos) -> GridPos {
        GridPos::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for GridPos {
    type Output = GridPos;
    fn sub(self, o: GridPos) -> GridPos {
        GridPos::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

/// Unit offsets in the order `+x, -x, +y, -y, +z, -z`.
pub const FACE_OFFSETS: [GridPos; 6] = [
    GridPos::new(1, 0, 0),
    GridPos::new(-1, 0, 0),
    GridPos::new(0, 1, 0),
    GridPos::new(0, -1, 0),
    GridPos::new(0, 0, 1),
    GridPos::new(0, 0, -1),
];

/// The six face-adjacent cells of `p`, ordered `+x, -x, +y, -y, +z, -z`.
pub fn neighbors6(p: GridPos) -> [GridPos; 6] {
    FACE_OFFSETS.map(|d| p + d)
}

/// A typed cell at a grid position.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Block {
    #[serde(rename = "t")]
    pub ty: BlockType,
    #[serde(rename = "p")]
    pub pos: GridPos,
}

impl Block {
    pub fn new(ty: impl Into<BlockType>, pos: GridPos) -> Self {
        Self { ty: ty.into(), pos }
    }
}

#[derive(Debug, Error)]
pub enum VoxelError {
    #[error("malformed voxel document: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("two blocks at position {0:?}")]
    DuplicatePosition(GridPos),
    #[error("example model {0:?} has no blocks")]
    EmptyModel(String),
    #[error("block type token is empty")]
    EmptyBlockType,
}

/// A named set of blocks with at most one block per position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoxelModel {
    name: String,
    blocks: BTreeMap<GridPos, BlockType>,
}

impl Serialize for VoxelModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.doc().serialize(s)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VoxelDoc {
    name: String,
    blocks: Vec<Block>,
}

impl VoxelModel {
    pub fn empty(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            blocks: BTreeMap::new(),
        }
    }

    /// Builds a model, rejecting duplicate positions.
    pub fn from_blocks(
        name: impl Into<String>,
        blocks: impl IntoIterator<Item = Block>,
    ) -> Result<Self, VoxelError> {
        let mut map = BTreeMap::new();
        for b in blocks {
            if map.insert(b.pos, b.ty).is_some() {
                return Err(VoxelError::DuplicatePosition(b.pos));
            }
        }
        Ok(Self {
            name: name.into(),
            blocks: map,
        })
    }

    /// Parses a Voxel JSON document. Empty models are accepted here; see
    /// [`VoxelModel::load_example`].
    pub fn from_json(bytes: &[u8]) -> Result<Self, VoxelError> {
        let doc: VoxelDoc = serde_json::from_slice(bytes)?;
        if doc.blocks.iter().any(|b| b.ty.as_str().is_empty()) {
            return Err(VoxelError::EmptyBlockType);
        }
        Self::from_blocks(doc.name, doc.blocks)
    }

    /// Parses a Voxel JSON document that must hold at least one block.
    pub fn load_example(bytes: &[u8]) -> Result<Self, VoxelError> {
        let m = Self::from_json(bytes)?;
        if m.is_empty() {
            return Err(VoxelError::EmptyModel(m.name));
        }
        Ok(m)
    }

    /// Serializes to Voxel JSON with blocks sorted by `(z, y, x)`.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.doc()).expect("voxel documents always serialize")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.doc()).expect("voxel documents always serialize")
    }

    fn doc(&self) -> VoxelDoc {
        VoxelDoc {
            name: self.name.clone(),
            blocks: self.blocks().collect(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn set_name(&mut self, name: impl Into<String>) {
        self.name = name.into();
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn get(&self, p: GridPos) -> Option<&BlockType> {
        self.blocks.get(&p)
    }

    pub fn contains(&self, p: GridPos) -> bool {
        self.blocks.contains_key(&p)
    }

    /// Blocks in `(z, y, x)` order.
    pub fn blocks(&self) -> impl Iterator<Item = Block> + '_ {
        self.blocks.iter().map(|(p, t)| Block {
            ty: t.clone(),
            pos: *p,
        })
    }

    pub fn cells(&self) -> &BTreeMap<GridPos, BlockType> {
        &self.blocks
    }

    /// Component-wise minimum and maximum over block positions.
    pub fn bounding_box(&self) -> Option<(GridPos, GridPos)> {
        bounding_box(self.blocks.keys().copied())
    }

    /// Distinct block types, sorted.
    pub fn block_types(&self) -> Vec<BlockType> {
        let mut v: Vec<_> = self.blocks.values().cloned().collect();
        v.sort();
        v.dedup();
        v
    }

    pub fn translated(&self, delta: GridPos) -> Self {
        Self {
            name: self.name.clone(),
            blocks: self.blocks.iter().map(|(p, t)| (*p + delta, t.clone())).collect(),
        }
    }
}

/// Component-wise bounds of a position set, `None` when it is empty.
pub fn bounding_box(positions: impl IntoIterator<Item = GridPos>) -> Option<(GridPos, GridPos)> {
    let mut it = positions.into_iter();
    let first = it.next()?;
    Some(it.fold((first, first), |(lo, hi), p| {
        (lo.component_min(p), hi.component_max(p))
    }))
}
