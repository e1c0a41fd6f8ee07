//! Shape inference: segment an example model into a [`ShapeSet`] by
//! hill-climbing on the shape-set cost with merge and split operations.

mod search;
mod seed;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost;
use crate::shape::{flat_axes, Shape, ShapeId, ShapeSpec, ShapeViolation};
use crate::voxel::{Axis, Block, BlockType, GridPos, VoxelError, VoxelModel};

pub use search::{hill_climb, hill_climb_traced, SearchStep, SearchTrace, StepKind};
pub use seed::initialize;

/// Which local-search operations the hill climber may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchOps {
    #[serde(rename = "merge")]
    MergeOnly,
    #[serde(rename = "split")]
    SplitOnly,
    Both,
}

impl SearchOps {
    pub const ALL: [SearchOps; 3] = [SearchOps::MergeOnly, SearchOps::SplitOnly, SearchOps::Both];

    pub fn merges(self) -> bool {
        self != SearchOps::SplitOnly
    }

    pub fn splits(self) -> bool {
        self != SearchOps::MergeOnly
    }

    pub fn token(self) -> &'static str {
        match self {
            SearchOps::MergeOnly => "merge",
            SearchOps::SplitOnly => "split",
            SearchOps::Both => "both",
        }
    }
}

impl fmt::Display for SearchOps {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl std::str::FromStr for SearchOps {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "merge" => Ok(SearchOps::MergeOnly),
            "split" => Ok(SearchOps::SplitOnly),
            "both" => Ok(SearchOps::Both),
            other => Err(format!("unknown operation set {other:?} (expected merge, split or both)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InferenceParams {
    pub spec: ShapeSpec,
    /// Weight of the shape count in the cost; must be finite and non-negative.
    pub alpha: f64,
    pub ops: SearchOps,
    /// Start merges from three single-block shapes per block, one per plane.
    /// Only meaningful for planar specs.
    pub overlap: bool,
    /// Also accept merges that leave the cost unchanged.
    pub plateau_merges: bool,
    pub max_steps: Option<usize>,
}

impl Default for InferenceParams {
    fn default() -> Self {
        Self {
            spec: ShapeSpec::Rectangular,
            alpha: 1.0,
            ops: SearchOps::Both,
            overlap: false,
            plateau_merges: true,
            max_steps: None,
        }
    }
}

impl InferenceParams {
    pub fn new(spec: ShapeSpec, alpha: f64, ops: SearchOps) -> Self {
        Self {
            spec,
            alpha,
            ops,
            ..Self::default()
        }
    }

    pub fn with_overlap(mut self, overlap: bool) -> Self {
        self.overlap = overlap;
        self
    }

    pub fn with_plateau_merges(mut self, on: bool) -> Self {
        self.plateau_merges = on;
        self
    }

    pub fn with_max_steps(mut self, steps: usize) -> Self {
        self.max_steps = Some(steps);
        self
    }

    pub fn validate(&self) -> Result<(), InferenceError> {
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(InferenceError::InvalidParams(format!(
                "alpha must be a finite non-negative number, got {}",
                self.alpha
            )));
        }
        if self.max_steps == Some(0) {
            return Err(InferenceError::InvalidParams(
                "max_steps must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Whether the overlap flag takes effect for this spec.
    pub fn effective_overlap(&self) -> bool {
        self.overlap && self.spec.is_planar()
    }

    /// Whether initialization uses one single-block shape per plane.
    pub(crate) fn three_plane(&self) -> bool {
        self.effective_overlap() && self.ops.merges()
    }
}

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("invalid inference parameters: {0}")]
    InvalidParams(String),
    #[error("cannot infer shapes for an empty model")]
    EmptyModel,
    #[error("no shape with id {0}")]
    UnknownShape(ShapeId),
    #[error("cannot merge a shape with itself")]
    SameShape,
    #[error("split part must be a non-empty proper subset of the shape")]
    BadSplitPart,
    #[error("illegal operation: {0}")]
    Illegal(ShapeViolation),
    #[error("illegal merge: shapes lie in different planes")]
    DifferentPlanes,
    #[error("block at {0:?} is not part of the source model")]
    NotInSource(GridPos),
    #[error("block at {0:?} has a different type in the source model")]
    TypeMismatch(GridPos),
    #[error("shape {0} does not use the set's shape spec")]
    SpecMismatch(ShapeId),
    #[error("shape {0} appears twice")]
    DuplicateId(ShapeId),
    #[error("shape {id}: {violation}")]
    InvalidShape { id: ShapeId, violation: ShapeViolation },
    #[error("malformed shape-set document: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Voxel(#[from] VoxelError),
}

/// A collection of shapes covering a source model.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeSet {
    source: VoxelModel,
    spec: ShapeSpec,
    overlap: bool,
    shapes: Vec<Shape>,
}

/// A broken [`ShapeSet`] invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SetViolation {
    Uncovered(GridPos),
    Overlapping(GridPos),
    Redundant { covered: ShapeId, by: ShapeId },
}

impl ShapeSet {
    /// Builds a set, checking every shape against the source model and the
    /// spec. Coverage and redundancy are not checked here; see
    /// [`ShapeSet::violations`].
    pub fn new(
        source: VoxelModel,
        spec: ShapeSpec,
        overlap: bool,
        shapes: Vec<Shape>,
    ) -> Result<Self, InferenceError> {
        let mut ids = HashSet::new();
        for s in &shapes {
            if !ids.insert(s.id()) {
                return Err(InferenceError::DuplicateId(s.id()));
            }
            if s.spec() != spec {
                return Err(InferenceError::SpecMismatch(s.id()));
            }
            for b in s.blocks() {
                match source.get(b.pos) {
                    None => return Err(InferenceError::NotInSource(b.pos)),
                    Some(t) if *t != b.ty => return Err(InferenceError::TypeMismatch(b.pos)),
                    _ => {}
                }
            }
        }
        Ok(Self {
            source,
            spec,
            overlap,
            shapes,
        })
    }

    pub fn source(&self) -> &VoxelModel {
        &self.source
    }

    pub fn spec(&self) -> ShapeSpec {
        self.spec
    }

    pub fn overlap(&self) -> bool {
        self.overlap
    }

    pub fn shapes(&self) -> &[Shape] {
        &self.shapes
    }

    pub fn len(&self) -> usize {
        self.shapes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shapes.is_empty()
    }

    pub fn get(&self, id: ShapeId) -> Option<&Shape> {
        self.shapes.iter().find(|s| s.id() == id)
    }

    pub fn cost(&self, alpha: f64) -> f64 {
        cost::cost(&self.shapes, alpha)
    }

    pub fn log_cost(&self, alpha: f64) -> f64 {
        let (n, sum) = cost::entropy_total(&self.shapes);
        cost::log_cost(n, sum, alpha)
    }

    fn next_id(&self) -> ShapeId {
        ShapeId(self.shapes.iter().map(|s| s.id().0 + 1).max().unwrap_or(0))
    }

    fn index_of(&self, id: ShapeId) -> Result<usize, InferenceError> {
        self.shapes
            .iter()
            .position(|s| s.id() == id)
            .ok_or(InferenceError::UnknownShape(id))
    }

    /// Replaces shapes `i` and `j` with their union, which takes the smaller id.
    ///
    /// In overlap mode both shapes must be tagged with the same plane and the
    /// union must stay in it.
    pub fn merge(&self, i: ShapeId, j: ShapeId) -> Result<ShapeSet, InferenceError> {
        if i == j {
            return Err(InferenceError::SameShape);
        }
        let (ii, jj) = (self.index_of(i)?, self.index_of(j)?);
        let (a, b) = (&self.shapes[ii], &self.shapes[jj]);
        let union: BTreeMap<GridPos, BlockType> = a
            .cells()
            .iter()
            .chain(b.cells())
            .map(|(p, t)| (*p, t.clone()))
            .collect();
        let blocks = union.into_iter().map(|(pos, ty)| Block { ty, pos });
        let mut merged =
            Shape::new(i.min(j), self.spec, blocks).map_err(InferenceError::Illegal)?;
        if self.overlap && self.spec.is_planar() {
            let plane = a.plane().filter(|p| Some(*p) == b.plane());
            let plane = plane.ok_or(InferenceError::DifferentPlanes)?;
            merged = merged
                .with_plane(plane)
                .map_err(|_| InferenceError::DifferentPlanes)?;
        }
        let mut shapes = self.shapes.clone();
        shapes[ii.min(jj)] = merged;
        shapes.remove(ii.max(jj));
        Ok(ShapeSet {
            shapes,
            ..self.clone_empty()
        })
    }

    /// Replaces shape `i` by `part` (keeping id `i`) and the remainder (with a
    /// fresh id). Both halves must be valid shapes.
    pub fn split(&self, i: ShapeId, part: &[GridPos]) -> Result<ShapeSet, InferenceError> {
        let ii = self.index_of(i)?;
        let s = &self.shapes[ii];
        let part: HashSet<GridPos> = part.iter().copied().collect();
        if part.is_empty() || part.len() >= s.len() || !part.iter().all(|p| s.contains(*p)) {
            return Err(InferenceError::BadSplitPart);
        }
        let (inside, outside): (Vec<Block>, Vec<Block>) =
            s.blocks().partition(|b| part.contains(&b.pos));
        let keep_plane = |shape: Shape| match s.plane() {
            Some(axis) if self.spec.is_planar() => shape.with_plane(axis),
            _ => Ok(shape),
        };
        let first = Shape::new(i, self.spec, inside)
            .and_then(keep_plane)
            .map_err(InferenceError::Illegal)?;
        let second = Shape::new(self.next_id(), self.spec, outside)
            .and_then(keep_plane)
            .map_err(InferenceError::Illegal)?;
        let mut shapes = self.shapes.clone();
        shapes[ii] = first;
        shapes.push(second);
        Ok(ShapeSet {
            shapes,
            ..self.clone_empty()
        })
    }

    fn clone_empty(&self) -> ShapeSet {
        ShapeSet {
            source: self.source.clone(),
            spec: self.spec,
            overlap: self.overlap,
            shapes: Vec::new(),
        }
    }

    /// Adds a single-block shape for every uncovered source block, then drops
    /// every shape whose blocks are a subset of another shape's (of two equal
    /// shapes the later id goes). Surviving shapes are renumbered from zero in
    /// id order.
    pub fn postprocess(&self) -> ShapeSet {
        let mut shapes = self.shapes.clone();
        let covered: HashSet<GridPos> = shapes.iter().flat_map(|s| s.positions()).collect();
        let mut next = self.next_id().0;
        for b in self.source.blocks() {
            if !covered.contains(&b.pos) {
                let s = Shape::new(ShapeId(next), self.spec, [b])
                    .expect("a single block is a valid shape under every spec");
                shapes.push(s);
                next += 1;
            }
        }
        shapes.sort_by_key(|s| s.id());
        let redundant = redundant_shapes(&shapes);
        let mut kept: Vec<Shape> = shapes
            .into_iter()
            .enumerate()
            .filter(|(k, _)| !redundant.contains(k))
            .map(|(_, s)| s)
            .collect();
        for (k, s) in kept.iter_mut().enumerate() {
            *s = s.clone().with_id(ShapeId(k as u32));
        }
        ShapeSet {
            shapes: kept,
            ..self.clone_empty()
        }
    }

    /// All broken invariants: uncovered blocks, shared blocks when overlap is
    /// off, and shapes contained in another shape.
    pub fn violations(&self) -> Vec<SetViolation> {
        let mut out = Vec::new();
        let mut owners: HashMap<GridPos, usize> = HashMap::new();
        for s in &self.shapes {
            for p in s.positions() {
                *owners.entry(p).or_default() += 1;
            }
        }
        for p in self.source.cells().keys() {
            match owners.get(p).copied().unwrap_or(0) {
                0 => out.push(SetViolation::Uncovered(*p)),
                1 => {}
                _ if !self.overlap => out.push(SetViolation::Overlapping(*p)),
                _ => {}
            }
        }
        let mut sorted: Vec<&Shape> = self.shapes.iter().collect();
        sorted.sort_by_key(|s| s.id());
        let owned: Vec<Shape> = sorted.iter().map(|s| (*s).clone()).collect();
        for k in redundant_shapes(&owned) {
            let by = owned
                .iter()
                .enumerate()
                .find(|(j, t)| *j != k && owned[k].is_subset_of(t))
                .map(|(_, t)| t.id())
                .expect("redundant shapes have a cover");
            out.push(SetViolation::Redundant {
                covered: owned[k].id(),
                by,
            });
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.doc()).expect("shape sets always serialize")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.doc()).expect("shape sets always serialize")
    }

    fn doc(&self) -> ShapeSetDoc {
        ShapeSetDoc {
            model: Some(self.source.name().to_string()),
            spec: self.spec,
            overlap: self.overlap,
            shapes: self
                .shapes
                .iter()
                .map(|s| ShapeDoc {
                    id: s.id(),
                    plane: s.plane(),
                    blocks: s.blocks().collect(),
                })
                .collect(),
        }
    }

    /// Parses a shape-set document. The source model is rebuilt as the union
    /// of all shape blocks, so the document must describe a covering set.
    pub fn from_json(bytes: &[u8]) -> Result<Self, InferenceError> {
        let doc: ShapeSetDoc = serde_json::from_slice(bytes)?;
        let mut cells: BTreeMap<GridPos, BlockType> = BTreeMap::new();
        let mut shapes = Vec::with_capacity(doc.shapes.len());
        for sd in doc.shapes {
            for b in &sd.blocks {
                if let Some(prev) = cells.insert(b.pos, b.ty.clone()) {
                    if prev != b.ty {
                        return Err(InferenceError::TypeMismatch(b.pos));
                    }
                }
            }
            let id = sd.id;
            let invalid = |violation| InferenceError::InvalidShape { id, violation };
            let mut s = Shape::new(id, doc.spec, sd.blocks).map_err(invalid)?;
            if let Some(axis) = sd.plane {
                s = s.with_plane(axis).map_err(invalid)?;
            }
            shapes.push(s);
        }
        let name = doc.model.unwrap_or_default();
        let source = VoxelModel::from_blocks(
            name,
            cells.into_iter().map(|(pos, ty)| Block { ty, pos }),
        )?;
        ShapeSet::new(source, doc.spec, doc.overlap, shapes)
    }
}

/// Indices (into `shapes`, sorted by id) of shapes contained in another shape.
fn redundant_shapes(shapes: &[Shape]) -> HashSet<usize> {
    let mut by_pos: HashMap<GridPos, Vec<usize>> = HashMap::new();
    for (k, s) in shapes.iter().enumerate() {
        for p in s.positions() {
            by_pos.entry(p).or_default().push(k);
        }
    }
    let mut out = HashSet::new();
    for (k, s) in shapes.iter().enumerate() {
        let first = s.positions().next().expect("shapes are non-empty");
        let covered = by_pos[&first].iter().any(|&j| {
            j != k
                && s.is_subset_of(&shapes[j])
                && (s.len() < shapes[j].len() || j < k)
        });
        if covered {
            out.insert(k);
        }
    }
    out
}

/// Chooses the plane for a planar shape that is flat on several axes: the
/// axis whose two sides have the fewest occupied cells in `source`, ties
/// broken in `z, y, x` order.
pub(crate) fn preferred_plane(
    positions: &[GridPos],
    source: &VoxelModel,
) -> Option<Axis> {
    let candidates = flat_axes(positions.iter().copied());
    if candidates.len() <= 1 {
        return candidates.first().copied();
    }
    candidates.into_iter().min_by_key(|&axis| {
        positions
            .iter()
            .flat_map(|p| [p.shifted(axis, 1), p.shifted(axis, -1)])
            .filter(|q| source.contains(*q))
            .count()
    })
}

impl Serialize for ShapeSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.doc().serialize(s)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ShapeSetDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    model: Option<String>,
    spec: ShapeSpec,
    overlap: bool,
    shapes: Vec<ShapeDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ShapeDoc {
    id: ShapeId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    plane: Option<Axis>,
    blocks: Vec<Block>,
}
