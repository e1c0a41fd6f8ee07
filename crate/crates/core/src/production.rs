//! Deriving new buildings from a grammar.
//!
//! A [`Production`] starts from one shape at its example pose and grows by
//! applying rules to shapes already placed. Randomized derivation is
//! [`generate`]; co-creative derivation lists [`Production::step_choices`]
//! and applies one by index.

use std::collections::{BTreeMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::enclosure::{self, EnclosureError, EnclosureReport};
use crate::grammar::ShapeGrammar;
use crate::shape::{ClassId, ShapeId, ShapeSpec};
use crate::transform::GridTransform;
use crate::voxel::{Axis, Block, BlockType, GridPos, VoxelModel};

#[derive(Debug, Error)]
pub enum ProductionError {
    #[error("no shape with id {0} in the grammar")]
    UnknownShape(ShapeId),
    #[error("choice {index} does not exist ({available} available)")]
    StaleChoice { index: usize, available: usize },
    #[error("placement conflicts with a different block type at {0:?}")]
    ConflictingPlacement(GridPos),
    #[error("nothing to undo")]
    NothingToUndo,
    #[error("history does not replay: {0}")]
    InvalidHistory(String),
    #[error(transparent)]
    Enclosure(#[from] EnclosureError),
    #[error("malformed production document: {0}")]
    Malformed(#[from] serde_json::Error),
}

/// What to do when a rule would write a different block type into an
/// occupied cell.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConflictPolicy {
    /// Never place conflicting shapes. Keeps occupancy consistent.
    #[default]
    Reject,
    /// Place them anyway; cells keep the type written first. Placed shapes
    /// may then disagree with the occupancy map.
    KeepExisting,
}

impl std::str::FromStr for ConflictPolicy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "reject" => Ok(Self::Reject),
            "keep_existing" | "keep-existing" => Ok(Self::KeepExisting),
            _ => Err(format!("unknown conflict policy {s:?} (expected reject or keep-existing)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlacedShape {
    pub shape: ShapeId,
    pub class: ClassId,
    pub pose: GridTransform,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plane: Option<Axis>,
    pub spec: ShapeSpec,
    /// The class's canonical form under `pose`, sorted by position.
    pub blocks: Vec<Block>,
}

impl PlacedShape {
    fn new(g: &ShapeGrammar, shape: ShapeId, pose: GridTransform) -> Result<Self, ProductionError> {
        let class = g.class_of(shape).ok_or(ProductionError::UnknownShape(shape))?;
        let mut blocks = g.realize(shape, &pose).ok_or(ProductionError::UnknownShape(shape))?;
        blocks.sort_by_key(|b| b.pos);
        Ok(Self {
            shape,
            class,
            pose,
            plane: g.placed_plane(shape, &pose),
            spec: g.spec_of(shape).expect("shape exists"),
            blocks,
        })
    }

    fn key(&self) -> PlacementKey {
        (self.class, self.blocks.iter().map(|b| (b.pos, b.ty.clone())).collect())
    }
}

/// Two placements are duplicates when they put the same class on the same
/// typed cells. This also catches symmetric shapes placed with different
/// rotations that land on identical blocks.
type PlacementKey = (ClassId, Vec<(GridPos, BlockType)>);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HistoryStep {
    Rule {
        target: usize,
        rule: usize,
        shape: ShapeId,
        pose: GridTransform,
        /// Placed over cells of another type under [`ConflictPolicy::KeepExisting`].
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        forced: bool,
    },
    /// Placed shapes removed by the enclosure constraint, as indices at the
    /// time of removal.
    Enclosure { removed: Vec<usize> },
}

/// One applicable (placed shape, rule) option.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Choice {
    pub target: usize,
    pub rule: usize,
    pub shape: ShapeId,
    pub class: ClassId,
    pub pose: GridTransform,
    /// Some target cell holds a different block type.
    pub conflict: bool,
    /// The same class already sits on exactly these blocks.
    pub duplicate: bool,
    /// Where the right-hand shape would go.
    pub blocks: Vec<Block>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Production {
    initial: ShapeId,
    seed: u64,
    placed: Vec<PlacedShape>,
    occupancy: BTreeMap<GridPos, BlockType>,
    history: Vec<HistoryStep>,
    keys: HashSet<PlacementKey>,
}

/// Outcome of [`Production::apply`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Applied {
    /// Index of the new placed shape.
    Placed(usize),
    /// The choice duplicated an existing placement; nothing changed.
    Duplicate,
}

impl Production {
    /// A production holding only `initial` (the grammar's initial shape by
    /// default) at its example pose.
    pub fn start(g: &ShapeGrammar, initial: Option<ShapeId>, seed: u64) -> Result<Self, ProductionError> {
        let initial = initial.unwrap_or(g.initial());
        let label = g.label(initial).ok_or(ProductionError::UnknownShape(initial))?;
        let mut p = Self {
            initial,
            seed,
            placed: Vec::new(),
            occupancy: BTreeMap::new(),
            history: Vec::new(),
            keys: HashSet::new(),
        };
        p.push(PlacedShape::new(g, initial, label.pose)?);
        Ok(p)
    }

    pub fn initial(&self) -> ShapeId {
        self.initial
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn placed(&self) -> &[PlacedShape] {
        &self.placed
    }

    pub fn occupancy(&self) -> &BTreeMap<GridPos, BlockType> {
        &self.occupancy
    }

    pub fn history(&self) -> &[HistoryStep] {
        &self.history
    }

    pub fn is_empty(&self) -> bool {
        self.placed.is_empty()
    }

    fn push(&mut self, s: PlacedShape) {
        for b in &s.blocks {
            self.occupancy.entry(b.pos).or_insert_with(|| b.ty.clone());
        }
        self.keys.insert(s.key());
        self.placed.push(s);
    }

    /// Every placed block agrees with the occupancy map, and every occupied
    /// cell belongs to some placed shape.
    pub fn is_consistent(&self) -> bool {
        let mut covered = HashSet::new();
        for s in &self.placed {
            for b in &s.blocks {
                if self.occupancy.get(&b.pos) != Some(&b.ty) {
                    return false;
                }
                covered.insert(b.pos);
            }
        }
        covered.len() == self.occupancy.len()
    }

    fn conflict_at(&self, blocks: &[Block]) -> Option<GridPos> {
        blocks
            .iter()
            .find(|b| self.occupancy.get(&b.pos).is_some_and(|t| *t != b.ty))
            .map(|b| b.pos)
    }

    /// All (placed shape, applicable rule) options, by placed index and then
    /// rule order.
    pub fn step_choices(&self, g: &ShapeGrammar) -> Vec<Choice> {
        let mut out = Vec::new();
        for (target, s) in self.placed.iter().enumerate() {
            let apps = g.applicable_rules(s.class, &s.pose).expect("placed classes come from the grammar");
            for app in apps {
                let shape = g.rules()[app.rule].rhs;
                let placed = PlacedShape::new(g, shape, app.rhs_pose).expect("rule shapes exist");
                let conflict = self.conflict_at(&placed.blocks).is_some();
                let duplicate = self.keys.contains(&placed.key());
                out.push(Choice {
                    target,
                    rule: app.rule,
                    shape,
                    class: placed.class,
                    pose: app.rhs_pose,
                    conflict,
                    duplicate,
                    blocks: placed.blocks,
                });
            }
        }
        out
    }

    /// Applies choice `index` of [`Self::step_choices`], rejecting conflicts.
    pub fn apply(&mut self, g: &ShapeGrammar, index: usize) -> Result<Applied, ProductionError> {
        let choices = self.step_choices(g);
        let choice = choices.get(index).ok_or(ProductionError::StaleChoice {
            index,
            available: choices.len(),
        })?;
        self.apply_choice(g, choice, ConflictPolicy::Reject)
    }

    fn apply_choice(
        &mut self,
        g: &ShapeGrammar,
        c: &Choice,
        policy: ConflictPolicy,
    ) -> Result<Applied, ProductionError> {
        if c.duplicate {
            return Ok(Applied::Duplicate);
        }
        let placed = PlacedShape::new(g, c.shape, c.pose)?;
        let conflict = self.conflict_at(&placed.blocks);
        if let (Some(pos), ConflictPolicy::Reject) = (conflict, policy) {
            return Err(ProductionError::ConflictingPlacement(pos));
        }
        self.history.push(HistoryStep::Rule {
            target: c.target,
            rule: c.rule,
            shape: c.shape,
            pose: c.pose,
            forced: conflict.is_some(),
        });
        self.push(placed);
        Ok(Applied::Placed(self.placed.len() - 1))
    }

    /// Removes the last history step by replaying the rest.
    pub fn undo(&mut self, g: &ShapeGrammar) -> Result<(), ProductionError> {
        let mut history = self.history.clone();
        history.pop().ok_or(ProductionError::NothingToUndo)?;
        *self = Self::replay(g, self.initial, self.seed, &history)?;
        Ok(())
    }

    /// Rebuilds a production from its history, checking every rule step
    /// against the grammar.
    pub fn replay(
        g: &ShapeGrammar,
        initial: ShapeId,
        seed: u64,
        history: &[HistoryStep],
    ) -> Result<Self, ProductionError> {
        let mut p = Self::start(g, Some(initial), seed)?;
        for (k, step) in history.iter().enumerate() {
            let bad = |why: String| ProductionError::InvalidHistory(format!("step {k}: {why}"));
            match step {
                HistoryStep::Rule { target, rule, shape, pose, forced } => {
                    let s = p.placed.get(*target).ok_or_else(|| bad(format!("no placed shape {target}")))?;
                    let apps = g.applicable_rules(s.class, &s.pose).map_err(|e| bad(e.to_string()))?;
                    let app = apps
                        .iter()
                        .find(|a| a.rule == *rule)
                        .ok_or_else(|| bad(format!("rule {rule} does not apply to placed shape {target}")))?;
                    if g.rules()[*rule].rhs != *shape || app.rhs_pose != *pose {
                        return Err(bad("recorded placement differs from the rule's".into()));
                    }
                    let placed = PlacedShape::new(g, *shape, *pose)?;
                    if p.keys.contains(&placed.key()) {
                        return Err(bad("duplicate placement".into()));
                    }
                    if p.conflict_at(&placed.blocks).is_some() != *forced {
                        return Err(bad("conflict flag does not match".into()));
                    }
                    p.history.push(step.clone());
                    p.push(placed);
                }
                HistoryStep::Enclosure { removed } => {
                    if removed.iter().any(|&i| i >= p.placed.len()) {
                        return Err(bad("removed index out of range".into()));
                    }
                    p.remove(removed);
                    p.history.push(step.clone());
                }
            }
        }
        Ok(p)
    }

    /// Drops the placed shapes at `indices` and rebuilds occupancy from the
    /// survivors.
    pub(crate) fn remove(&mut self, indices: &[usize]) {
        let drop: HashSet<usize> = indices.iter().copied().collect();
        let kept: Vec<PlacedShape> = std::mem::take(&mut self.placed)
            .into_iter()
            .enumerate()
            .filter(|(k, _)| !drop.contains(k))
            .map(|(_, s)| s)
            .collect();
        self.occupancy.clear();
        self.keys.clear();
        for s in kept {
            self.push(s);
        }
    }

    /// Applies the enclosure constraint and records it in the history.
    pub fn enclose(&mut self) -> Result<EnclosureReport, ProductionError> {
        let report = enclosure::plan(self)?;
        let removed = report.removed_indices();
        if !removed.is_empty() {
            self.remove(&removed);
            self.history.push(HistoryStep::Enclosure { removed });
        }
        Ok(report)
    }

    pub fn to_model(&self, name: &str) -> VoxelModel {
        VoxelModel::from_blocks(
            name,
            self.occupancy.iter().map(|(p, t)| Block { ty: t.clone(), pos: *p }),
        )
        .expect("occupancy positions are unique")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.doc()).expect("productions always serialize")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.doc()).expect("productions always serialize")
    }

    fn doc(&self) -> ProductionDoc {
        ProductionDoc {
            initial: self.initial,
            seed: self.seed,
            placed: self.placed.clone(),
            history: self.history.clone(),
        }
    }

    /// Hex SHA-256 of the compact JSON form.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }

    /// Parses a production document by replaying its history and checking
    /// that the recorded placements match.
    pub fn from_json(g: &ShapeGrammar, bytes: &[u8]) -> Result<Self, ProductionError> {
        let doc: ProductionDoc = serde_json::from_slice(bytes)?;
        let p = Self::replay(g, doc.initial, doc.seed, &doc.history)?;
        if p.placed != doc.placed {
            return Err(ProductionError::InvalidHistory(
                "placed shapes differ from the replayed history".into(),
            ));
        }
        Ok(p)
    }
}

impl Serialize for Production {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.doc().serialize(s)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProductionDoc {
    initial: ShapeId,
    seed: u64,
    placed: Vec<PlacedShape>,
    history: Vec<HistoryStep>,
}

/// Random derivation: starting from the grammar's initial shape, apply up to
/// `max_steps` rules, each drawn uniformly from the options that are neither
/// duplicates nor (under [`ConflictPolicy::Reject`]) conflicts. Stops early
/// when no option is left.
pub fn generate(
    g: &ShapeGrammar,
    seed: u64,
    max_steps: usize,
    policy: ConflictPolicy,
) -> Result<Production, ProductionError> {
    generate_from(g, None, seed, max_steps, policy)
}

/// [`generate`] from a chosen initial shape.
pub fn generate_from(
    g: &ShapeGrammar,
    initial: Option<ShapeId>,
    seed: u64,
    max_steps: usize,
    policy: ConflictPolicy,
) -> Result<Production, ProductionError> {
    let mut p = Production::start(g, initial, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..max_steps {
        let open: Vec<Choice> = p
            .step_choices(g)
            .into_iter()
            .filter(|c| !c.duplicate && (policy == ConflictPolicy::KeepExisting || !c.conflict))
            .collect();
        if open.is_empty() {
            break;
        }
        let c = &open[rng.random_range(0..open.len())];
        p.apply_choice(g, c, policy)?;
    }
    Ok(p)
}

/// Derives the example that contains `start`: beginning with `start` at its
/// example pose, apply only rules that place shapes at their own example
/// poses until none is left.
pub fn reconstruct(g: &ShapeGrammar, start: ShapeId) -> Result<Production, ProductionError> {
    let mut p = Production::start(g, Some(start), 0)?;
    loop {
        let next = p.step_choices(g).into_iter().find(|c| {
            !c.duplicate && !c.conflict && g.label(c.shape).is_some_and(|l| l.pose == c.pose)
        });
        match next {
            Some(c) => {
                p.apply_choice(g, &c, ConflictPolicy::Reject)?;
            }
            None => return Ok(p),
        }
    }
}
