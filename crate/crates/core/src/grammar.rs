//! Shape grammar induction.
//!
//! Every pair of shapes with face-adjacent blocks in the same example yields
//! two rules, `a → a b` and `b → b a`. A rule is stored once, keyed by the
//! match class of its left-hand shape, which makes it applicable to every
//! member of that class: the right-hand shape is carried along by the
//! transform relating the rule's anchor to the class member it is applied at.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::inference::ShapeSet;
use crate::shape::{match_classes, ClassId, MatchClass, Shape, ShapeId, ShapeSpec, ShapeViolation};
use crate::transform::GridTransform;
use crate::voxel::{neighbors6, Axis, Block, GridPos};

#[derive(Debug, Error)]
pub enum GrammarError {
    #[error("grammar induction needs at least one shape set")]
    EmptyInput,
    #[error("no shape with id {0}")]
    UnknownShape(ShapeId),
    #[error("no match class with id {0:?}")]
    UnknownClass(ClassId),
    #[error("dangling reference: {0}")]
    DanglingReference(String),
    #[error("shape ids must be 0..n without gaps")]
    NonContiguousIds,
    #[error("shape {id}: {violation}")]
    InvalidShape { id: ShapeId, violation: ShapeViolation },
    #[error("label of shape {0} does not reproduce its blocks")]
    BadLabel(ShapeId),
    #[error("match classes in the document differ from the shapes' match classes")]
    ClassMismatch,
    #[error("malformed grammar document: {0}")]
    Malformed(#[from] serde_json::Error),
}

/// Where a shape sits in its source example.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShapeLabel {
    pub shape: ShapeId,
    /// Maps the class's canonical form onto the shape's blocks in the example.
    pub pose: GridTransform,
    pub model: String,
}

/// `lhs_class → lhs_class rhs`: wherever a member of `lhs_class` is placed,
/// `rhs` may be added with the offset it had from `lhs_anchor` in the example.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ShapeRule {
    pub lhs_class: ClassId,
    pub lhs_anchor: ShapeId,
    pub rhs: ShapeId,
}

/// A rule resolved against a placed shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RuleApplication {
    /// Index into [`ShapeGrammar::rules`].
    pub rule: usize,
    /// Maps the example frame of the rule's anchor onto the placed shape.
    pub carry: GridTransform,
    /// Pose of the right-hand shape: `carry ∘ origin pose of rhs`.
    pub rhs_pose: GridTransform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapeGrammar {
    /// Indexed by shape id.
    shapes: Vec<Shape>,
    labels: Vec<ShapeLabel>,
    classes: Vec<MatchClass>,
    class_of: Vec<ClassId>,
    rules: Vec<ShapeRule>,
    /// Rule indices per class.
    rules_by_class: Vec<Vec<usize>>,
    initial: ShapeId,
}

/// Induces a grammar from shape sets, with shape 0 as the initial shape.
pub fn induce(sets: &[ShapeSet]) -> Result<ShapeGrammar, GrammarError> {
    induce_with_initial(sets, None)
}

/// Induces a grammar from shape sets.
///
/// Shapes are renumbered globally in input order. Rules only come from
/// adjacencies within one set, but match classes span all sets, so rules
/// learned in one example apply to matching shapes from another.
pub fn induce_with_initial(
    sets: &[ShapeSet],
    initial: Option<ShapeId>,
) -> Result<ShapeGrammar, GrammarError> {
    if sets.is_empty() || sets.iter().all(|s| s.is_empty()) {
        return Err(GrammarError::EmptyInput);
    }
    let mut shapes = Vec::new();
    let mut models = Vec::new();
    let mut pairs = BTreeSet::new();
    for set in sets {
        let offset = shapes.len() as u32;
        let mut local: Vec<&Shape> = set.shapes().iter().collect();
        local.sort_by_key(|s| s.id());
        for (k, s) in local.iter().enumerate() {
            shapes.push((*s).clone().with_id(ShapeId(offset + k as u32)));
            models.push(set.source().name().to_string());
        }
        let globals = &shapes[offset as usize..];
        pairs.extend(adjacent_pairs(globals));
    }
    let classes = match_classes(&shapes);
    let labels = shapes
        .iter()
        .zip(models)
        .map(|(s, model)| {
            let class = classes.iter().find(|c| c.contains(s.id())).expect("every shape has a class");
            ShapeLabel {
                shape: s.id(),
                pose: class.rep_transforms[&s.id()],
                model,
            }
        })
        .collect();
    let mut class_of = vec![ClassId(0); shapes.len()];
    for c in &classes {
        for m in &c.members {
            class_of[m.0 as usize] = c.id;
        }
    }
    let mut rules: Vec<ShapeRule> = pairs
        .into_iter()
        .flat_map(|(a, b)| {
            [
                ShapeRule { lhs_class: class_of[a.0 as usize], lhs_anchor: a, rhs: b },
                ShapeRule { lhs_class: class_of[b.0 as usize], lhs_anchor: b, rhs: a },
            ]
        })
        .collect();
    rules.sort();
    let initial = initial.unwrap_or(ShapeId(0));
    if initial.0 as usize >= shapes.len() {
        return Err(GrammarError::UnknownShape(initial));
    }
    Ok(ShapeGrammar::assemble(shapes, labels, classes, rules, initial))
}

/// Unordered pairs of shapes with at least one pair of face-adjacent blocks.
pub fn adjacent_pairs(shapes: &[Shape]) -> BTreeSet<(ShapeId, ShapeId)> {
    let mut owners: HashMap<GridPos, Vec<ShapeId>> = HashMap::new();
    for s in shapes {
        for p in s.positions() {
            owners.entry(p).or_default().push(s.id());
        }
    }
    let mut out = BTreeSet::new();
    for s in shapes {
        for p in s.positions() {
            for q in neighbors6(p) {
                for &other in owners.get(&q).map(Vec::as_slice).unwrap_or(&[]) {
                    if other != s.id() {
                        out.insert((s.id().min(other), s.id().max(other)));
                    }
                }
            }
        }
    }
    out
}

impl ShapeGrammar {
    fn assemble(
        shapes: Vec<Shape>,
        labels: Vec<ShapeLabel>,
        mut classes: Vec<MatchClass>,
        rules: Vec<ShapeRule>,
        initial: ShapeId,
    ) -> Self {
        let mut class_of = vec![ClassId(0); shapes.len()];
        for c in &mut classes {
            for m in &c.members {
                class_of[m.0 as usize] = c.id;
                c.rep_transforms.insert(*m, labels[m.0 as usize].pose);
            }
        }
        let mut rules_by_class = vec![Vec::new(); classes.len()];
        for (k, r) in rules.iter().enumerate() {
            rules_by_class[r.lhs_class.0 as usize].push(k);
        }
        Self {
            shapes,
            labels,
            classes,
            class_of,
            rules,
            rules_by_class,
            initial,
        }
    }

    pub fn shapes(&self) -> &[Shape] {
        &self.shapes
    }

    pub fn shape(&self, id: ShapeId) -> Option<&Shape> {
        self.shapes.get(id.0 as usize)
    }

    pub fn labels(&self) -> &[ShapeLabel] {
        &self.labels
    }

    pub fn label(&self, id: ShapeId) -> Option<&ShapeLabel> {
        self.labels.get(id.0 as usize)
    }

    pub fn classes(&self) -> &[MatchClass] {
        &self.classes
    }

    pub fn class(&self, id: ClassId) -> Option<&MatchClass> {
        self.classes.get(id.0 as usize)
    }

    pub fn class_of(&self, id: ShapeId) -> Option<ClassId> {
        self.class_of.get(id.0 as usize).copied()
    }

    pub fn rules(&self) -> &[ShapeRule] {
        &self.rules
    }

    pub fn initial(&self) -> ShapeId {
        self.initial
    }

    pub fn with_initial(mut self, id: ShapeId) -> Result<Self, GrammarError> {
        if self.shape(id).is_none() {
            return Err(GrammarError::UnknownShape(id));
        }
        self.initial = id;
        Ok(self)
    }

    /// The shape's spec; all shapes of one set share it, but grammars built
    /// from several sets may mix specs.
    pub fn spec_of(&self, id: ShapeId) -> Option<ShapeSpec> {
        self.shape(id).map(Shape::spec)
    }

    /// Plane axis of a shape placed with `pose`.
    pub fn placed_plane(&self, id: ShapeId, pose: &GridTransform) -> Option<Axis> {
        let shape = self.shape(id)?;
        let origin = self.label(id)?.pose;
        let turn = (pose.rot() + 4 - origin.rot()) % 4;
        shape.plane().map(|a| a.rotated(turn))
    }

    /// The blocks of shape `id` placed with `pose`.
    pub fn realize(&self, id: ShapeId, pose: &GridTransform) -> Option<Vec<Block>> {
        let class = self.class(self.class_of(id)?)?;
        Some(class.canonical.place(pose))
    }

    /// Rules whose left-hand class is `class`, resolved for a member of that
    /// class placed with `pose`, in rule order.
    pub fn applicable_rules(
        &self,
        class: ClassId,
        pose: &GridTransform,
    ) -> Result<Vec<RuleApplication>, GrammarError> {
        let indices = self
            .rules_by_class
            .get(class.0 as usize)
            .ok_or(GrammarError::UnknownClass(class))?;
        Ok(indices
            .iter()
            .map(|&k| {
                let r = &self.rules[k];
                let anchor = self.labels[r.lhs_anchor.0 as usize].pose;
                let carry = pose.compose(&anchor.inverse());
                let rhs_pose = carry.compose(&self.labels[r.rhs.0 as usize].pose);
                RuleApplication {
                    rule: k,
                    carry,
                    rhs_pose,
                }
            })
            .collect())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.doc()).expect("grammars always serialize")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.doc()).expect("grammars always serialize")
    }

    fn doc(&self) -> GrammarDoc {
        GrammarDoc {
            shapes: self
                .shapes
                .iter()
                .map(|s| GrammarShapeDoc {
                    id: s.id(),
                    spec: s.spec(),
                    plane: s.plane(),
                    blocks: s.blocks().collect(),
                })
                .collect(),
            labels: self.labels.clone(),
            classes: self.classes.iter().map(|c| c.members.clone()).collect(),
            rules: self.rules.clone(),
            initial: self.initial,
        }
    }

    /// Parses and fully validates a grammar document.
    pub fn from_json(bytes: &[u8]) -> Result<Self, GrammarError> {
        let doc: GrammarDoc = serde_json::from_slice(bytes)?;
        let mut shapes = Vec::with_capacity(doc.shapes.len());
        for (k, sd) in doc.shapes.into_iter().enumerate() {
            if sd.id.0 as usize != k {
                return Err(GrammarError::NonContiguousIds);
            }
            let id = sd.id;
            let invalid = |violation| GrammarError::InvalidShape { id, violation };
            let mut s = Shape::new(id, sd.spec, sd.blocks).map_err(invalid)?;
            if let Some(axis) = sd.plane {
                s = s.with_plane(axis).map_err(invalid)?;
            }
            shapes.push(s);
        }
        let n = shapes.len();
        let exists = |id: ShapeId| (id.0 as usize) < n;
        if doc.labels.len() != n || doc.labels.iter().enumerate().any(|(k, l)| l.shape.0 as usize != k) {
            return Err(GrammarError::DanglingReference("labels must list shapes 0..n in order".into()));
        }
        let classes = match_classes(&shapes);
        let listed: Vec<Vec<ShapeId>> = classes.iter().map(|c| c.members.clone()).collect();
        if listed != doc.classes {
            if doc.classes.iter().flatten().any(|id| !exists(*id)) {
                return Err(GrammarError::DanglingReference("class lists a missing shape".into()));
            }
            return Err(GrammarError::ClassMismatch);
        }
        for (s, l) in shapes.iter().zip(&doc.labels) {
            let class = &classes[classes.iter().position(|c| c.contains(s.id())).expect("classified")];
            let mut placed = class.canonical.place(&l.pose);
            placed.sort_by_key(|b| b.pos);
            if placed != s.blocks().collect::<Vec<_>>() {
                return Err(GrammarError::BadLabel(s.id()));
            }
        }
        for r in &doc.rules {
            for id in [r.lhs_anchor, r.rhs] {
                if !exists(id) {
                    return Err(GrammarError::DanglingReference(format!("rule references missing shape {id}")));
                }
            }
            let class = classes
                .get(r.lhs_class.0 as usize)
                .ok_or_else(|| GrammarError::DanglingReference(format!("rule references missing class {}", r.lhs_class.0)))?;
            if !class.contains(r.lhs_anchor) {
                return Err(GrammarError::DanglingReference(format!(
                    "rule anchor {} is not in class {}",
                    r.lhs_anchor, r.lhs_class.0
                )));
            }
        }
        if !exists(doc.initial) {
            return Err(GrammarError::DanglingReference(format!("initial shape {} is missing", doc.initial)));
        }
        Ok(Self::assemble(shapes, doc.labels, classes, doc.rules, doc.initial))
    }
}

impl Serialize for ShapeGrammar {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.doc().serialize(s)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GrammarDoc {
    shapes: Vec<GrammarShapeDoc>,
    labels: Vec<ShapeLabel>,
    classes: Vec<Vec<ShapeId>>,
    rules: Vec<ShapeRule>,
    initial: ShapeId,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GrammarShapeDoc {
    id: ShapeId,
    spec: ShapeSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    plane: Option<Axis>,
    blocks: Vec<Block>,
}
