//! Shapes, shape specifications, canonical forms and matching.
//!
//! A shape is a non-empty, face-connected subset of an example's blocks.
//! Two shapes *match* when one is carried onto the other, block for block and
//! type for type, by a [`GridTransform`]. Matching is decided through a
//! canonical form: the lexicographically smallest serialization among the
//! four z-rotations of the shape, each translated so that its bounding-box
//! minimum sits at the origin.

use std::collections::{BTreeMap, HashSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::transform::{rotate_z, GridTransform};
use crate::voxel::{bounding_box, neighbors6, Axis, Block, BlockType, GridPos};

/// Structural class a shape must satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ShapeSpec {
    /// A filled axis-aligned rectangle lying in one plane.
    #[serde(rename = "rect")]
    Rectangular,
    /// Any connected block set lying in one plane.
    #[serde(rename = "2d")]
    Planar2D,
    /// Any connected block set.
    #[serde(rename = "3d")]
    Free3D,
}

impl ShapeSpec {
    pub const ALL: [ShapeSpec; 3] = [ShapeSpec::Rectangular, ShapeSpec::Planar2D, ShapeSpec::Free3D];

    pub fn is_planar(self) -> bool {
        !matches!(self, ShapeSpec::Free3D)
    }

    pub fn token(self) -> &'static str {
        match self {
            ShapeSpec::Rectangular => "rect",
            ShapeSpec::Planar2D => "2d",
            ShapeSpec::Free3D => "3d",
        }
    }
}

impl fmt::Display for ShapeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl std::str::FromStr for ShapeSpec {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "rect" | "rectangular" => Ok(ShapeSpec::Rectangular),
            "2d" | "planar" => Ok(ShapeSpec::Planar2D),
            "3d" | "free" => Ok(ShapeSpec::Free3D),
            other => Err(format!("unknown shape spec {other:?} (expected rect, 2d or 3d)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ShapeId(pub u32);

impl fmt::Display for ShapeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ShapeViolation {
    #[error("shape has no blocks")]
    Empty,
    #[error("two blocks share position {0:?}")]
    DuplicatePosition(GridPos),
    #[error("blocks are not face-connected")]
    Incoherent,
    #[error("blocks do not lie in a single axis-aligned plane")]
    NotPlanar,
    #[error("blocks do not fill an axis-aligned rectangle")]
    NotRectangular,
    #[error("blocks do not lie in the requested {0:?} plane")]
    WrongPlane(Axis),
}

/// Checks coherence and the specification's geometric constraint.
pub fn check_shape(blocks: &[Block], spec: ShapeSpec) -> Result<(), ShapeViolation> {
    let mut seen = HashSet::with_capacity(blocks.len());
    for b in blocks {
        if !seen.insert(b.pos) {
            return Err(ShapeViolation::DuplicatePosition(b.pos));
        }
    }
    check_positions(&seen, spec)
}

fn check_positions(positions: &HashSet<GridPos>, spec: ShapeSpec) -> Result<(), ShapeViolation> {
    let (lo, hi) = bounding_box(positions.iter().copied()).ok_or(ShapeViolation::Empty)?;
    if !is_connected(positions) {
        return Err(ShapeViolation::Incoherent);
    }
    let flat = Axis::ALL.iter().any(|&a| lo.get(a) == hi.get(a));
    match spec {
        ShapeSpec::Free3D => Ok(()),
        _ if !flat => Err(ShapeViolation::NotPlanar),
        ShapeSpec::Planar2D => Ok(()),
        ShapeSpec::Rectangular => {
            if box_volume(lo, hi) == positions.len() as u64 {
                Ok(())
            } else {
                Err(ShapeViolation::NotRectangular)
            }
        }
    }
}

pub(crate) fn box_volume(lo: GridPos, hi: GridPos) -> u64 {
    Axis::ALL
        .iter()
        .map(|&a| (hi.get(a) - lo.get(a) + 1) as u64)
        .product()
}

/// Face connectivity of a position set. The empty set counts as connected.
pub fn is_connected(positions: &HashSet<GridPos>) -> bool {
    let Some(&start) = positions.iter().next() else {
        return true;
    };
    let mut seen = HashSet::with_capacity(positions.len());
    seen.insert(start);
    let mut queue = VecDeque::from([start]);
    while let Some(p) = queue.pop_front() {
        for q in neighbors6(p) {
            if positions.contains(&q) && seen.insert(q) {
                queue.push_back(q);
            }
        }
    }
    seen.len() == positions.len()
}

/// A validated shape.
///
/// Planar shapes carry the axis their plane is fixed on. For single blocks and
/// straight lines several axes qualify; the caller chooses one (see
/// [`Shape::with_plane`]), otherwise the first flat axis in `z, y, x` order is
/// used.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Shape {
    id: ShapeId,
    spec: ShapeSpec,
    plane: Option<Axis>,
    blocks: BTreeMap<GridPos, BlockType>,
}

impl Shape {
    pub fn new(
        id: ShapeId,
        spec: ShapeSpec,
        blocks: impl IntoIterator<Item = Block>,
    ) -> Result<Self, ShapeViolation> {
        let mut map = BTreeMap::new();
        for b in blocks {
            if map.insert(b.pos, b.ty).is_some() {
                return Err(ShapeViolation::DuplicatePosition(b.pos));
            }
        }
        let positions: HashSet<GridPos> = map.keys().copied().collect();
        check_positions(&positions, spec)?;
        let plane = if spec.is_planar() {
            flat_axes(map.keys().copied()).first().copied()
        } else {
            None
        };
        Ok(Self {
            id,
            spec,
            plane,
            blocks: map,
        })
    }

    /// Fixes the plane axis of a planar shape. Fails if the shape is not flat
    /// on `axis`; a no-op for free 3D shapes.
    pub fn with_plane(mut self, axis: Axis) -> Result<Self, ShapeViolation> {
        if !self.spec.is_planar() {
            return Ok(self);
        }
        if !self.flat_axes().contains(&axis) {
            return Err(ShapeViolation::WrongPlane(axis));
        }
        self.plane = Some(axis);
        Ok(self)
    }

    pub fn with_id(mut self, id: ShapeId) -> Self {
        self.id = id;
        self
    }

    pub fn id(&self) -> ShapeId {
        self.id
    }

    pub fn spec(&self) -> ShapeSpec {
        self.spec
    }

    pub fn plane(&self) -> Option<Axis> {
        self.plane
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn blocks(&self) -> impl Iterator<Item = Block> + '_ {
        self.blocks.iter().map(|(p, t)| Block {
            ty: t.clone(),
            pos: *p,
        })
    }

    pub fn cells(&self) -> &BTreeMap<GridPos, BlockType> {
        &self.blocks
    }

    pub fn positions(&self) -> impl Iterator<Item = GridPos> + '_ {
        self.blocks.keys().copied()
    }

    pub fn contains(&self, p: GridPos) -> bool {
        self.blocks.contains_key(&p)
    }

    pub fn bounding_box(&self) -> (GridPos, GridPos) {
        bounding_box(self.positions()).expect("shapes are non-empty")
    }

    /// Axes on which every block shares one coordinate.
    pub fn flat_axes(&self) -> Vec<Axis> {
        flat_axes(self.positions())
    }

    /// True when every block of `self` is also a block of `other`.
    pub fn is_subset_of(&self, other: &Shape) -> bool {
        self.len() <= other.len() && self.blocks.keys().all(|p| other.contains(*p))
    }

    /// The image under `t`; the plane axis follows the rotation.
    pub fn transformed(&self, t: &GridTransform) -> Shape {
        Shape {
            id: self.id,
            spec: self.spec,
            plane: self.plane.map(|a| a.rotated(t.rot())),
            blocks: self
                .blocks
                .iter()
                .map(|(p, ty)| (t.apply(*p), ty.clone()))
                .collect(),
        }
    }

    pub fn canonicalize(&self) -> (CanonicalForm, GridTransform) {
        canonicalize(self.blocks())
    }

    /// Shannon entropy (bits) of the block-type distribution.
    pub fn entropy(&self) -> f64 {
        let mut counts: BTreeMap<&BlockType, usize> = BTreeMap::new();
        for t in self.blocks.values() {
            *counts.entry(t).or_default() += 1;
        }
        crate::cost::entropy_of_counts(counts.values().copied())
    }

    pub fn distinct_types(&self) -> usize {
        let mut v: Vec<&BlockType> = self.blocks.values().collect();
        v.sort();
        v.dedup();
        v.len()
    }
}

/// Axes (in `z, y, x` preference order) on which all positions coincide.
pub(crate) fn flat_axes(positions: impl IntoIterator<Item = GridPos>) -> Vec<Axis> {
    let Some((lo, hi)) = bounding_box(positions) else {
        return Vec::new();
    };
    [Axis::Z, Axis::Y, Axis::X]
        .into_iter()
        .filter(|&a| lo.get(a) == hi.get(a))
        .collect()
}

/// Applies `t` to every block of `s`.
pub fn apply_transform(t: &GridTransform, s: &Shape) -> Shape {
    s.transformed(t)
}

/// A block of a canonical form; ordered by position `(z, y, x)` then type.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CanonBlock {
    pub pos: GridPos,
    pub ty: BlockType,
}

/// Translation- and z-rotation-invariant key of a block set.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CanonicalForm(Vec<CanonBlock>);

impl CanonicalForm {
    pub fn blocks(&self) -> &[CanonBlock] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The canonical blocks mapped by `t`.
    pub fn place(&self, t: &GridTransform) -> Vec<Block> {
        self.0
            .iter()
            .map(|b| Block {
                ty: b.ty.clone(),
                pos: t.apply(b.pos),
            })
            .collect()
    }
}

/// Returns the canonical form of a block set and the transform that carries
/// the canonical form back onto the original blocks.
pub fn canonicalize(blocks: impl IntoIterator<Item = Block>) -> (CanonicalForm, GridTransform) {
    let blocks: Vec<Block> = blocks.into_iter().collect();
    let mut best: Option<(Vec<CanonBlock>, GridTransform)> = None;
    for k in 0..4u8 {
        let rotated: Vec<GridPos> = blocks.iter().map(|b| rotate_z(b.pos, k)).collect();
        let Some((lo, _)) = bounding_box(rotated.iter().copied()) else {
            return (CanonicalForm(Vec::new()), GridTransform::IDENTITY);
        };
        let mut form: Vec<CanonBlock> = rotated
            .iter()
            .zip(&blocks)
            .map(|(p, b)| CanonBlock {
                pos: *p - lo,
                ty: b.ty.clone(),
            })
            .collect();
        form.sort();
        if best.as_ref().map_or(true, |(f, _)| form < *f) {
            // canonical = R^k·p − lo, so p = (R^k, −lo)⁻¹ applied to canonical
            let to_canonical = GridTransform::new(k, GridPos::ORIGIN - lo);
            best = Some((form, to_canonical.inverse()));
        }
    }
    let (form, t) = best.expect("four rotations were tried");
    (CanonicalForm(form), t)
}

/// The transform carrying `si` onto `sj`, if they match.
pub fn shapes_match(si: &Shape, sj: &Shape) -> Option<GridTransform> {
    if si.len() != sj.len() {
        return None;
    }
    let (ci, ti) = si.canonicalize();
    let (cj, tj) = sj.canonicalize();
    (ci == cj).then(|| tj.compose(&ti.inverse()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassId(pub u32);

/// An equivalence class of mutually matching shapes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchClass {
    pub id: ClassId,
    /// Sorted by id.
    pub members: Vec<ShapeId>,
    pub canonical: CanonicalForm,
    /// For each member, the transform placing `canonical` onto it.
    pub rep_transforms: BTreeMap<ShapeId, GridTransform>,
}

impl MatchClass {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, id: ShapeId) -> bool {
        self.rep_transforms.contains_key(&id)
    }

    /// The transform carrying member `from` onto member `to`.
    pub fn match_transform(&self, from: ShapeId, to: ShapeId) -> Option<GridTransform> {
        let a = self.rep_transforms.get(&from)?;
        let b = self.rep_transforms.get(&to)?;
        Some(b.compose(&a.inverse()))
    }
}

/// Partitions shapes into match classes, ordered by canonical form with
/// members ordered by id. Class ids are positions in the returned list.
pub fn match_classes<'a>(shapes: impl IntoIterator<Item = &'a Shape>) -> Vec<MatchClass> {
    let mut groups: BTreeMap<CanonicalForm, Vec<(ShapeId, GridTransform)>> = BTreeMap::new();
    for s in shapes {
        let (form, t) = s.canonicalize();
        groups.entry(form).or_default().push((s.id(), t));
    }
    groups
        .into_iter()
        .enumerate()
        .map(|(i, (canonical, mut members))| {
            members.sort_by_key(|(id, _)| *id);
            MatchClass {
                id: ClassId(i as u32),
                members: members.iter().map(|(id, _)| *id).collect(),
                canonical,
                rep_transforms: members.into_iter().collect(),
            }
        })
        .collect()
}
