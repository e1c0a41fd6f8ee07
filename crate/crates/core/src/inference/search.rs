//! First-improvement hill climbing over merge and split operations.
//!
//! Each pass scans merges by `(id_i, id_j)` ascending, then splits by
//! `(id, candidate index)`, and applies the first acceptable operation. A
//! merge is acceptable if it strictly lowers the cost, or leaves it unchanged
//! when plateau merges are on; a split must strictly lower it. The search
//! stops when a full pass finds nothing, or after `max_steps` operations.
//!
//! Costs are compared as [`log_cost`] of a correctly rounded entropy sum, so
//! the cost of a state does not depend on the path that reached it. This
//! rules out cycles between a split and the merge that undoes it.

use std::collections::HashMap;

use crate::cost::{entropy_of_counts, log_cost, ExactSum};
use crate::shape::{ShapeId, ShapeSpec};
use crate::voxel::{Axis, GridPos, VoxelModel, FACE_OFFSETS};

use super::seed::{build_shape, initialize};
use super::{InferenceError, InferenceParams, ShapeSet};

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    /// `kept` absorbed `removed`.
    Merge { kept: ShapeId, removed: ShapeId },
    /// `shape` was split; the remainder became `created`.
    Split { shape: ShapeId, created: ShapeId },
}

/// State after one accepted operation.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchStep {
    pub kind: StepKind,
    pub shapes: usize,
    pub entropy_sum: f64,
    pub log_cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchTrace {
    pub initial_shapes: usize,
    pub initial_log_cost: f64,
    pub steps: Vec<SearchStep>,
    /// Cost of the returned set, after post-processing.
    pub final_cost: f64,
}

/// Infers a shape set for `m`.
pub fn hill_climb(m: &VoxelModel, params: &InferenceParams) -> Result<ShapeSet, InferenceError> {
    hill_climb_traced(m, params).map(|(set, _)| set)
}

/// [`hill_climb`], also returning every accepted step.
pub fn hill_climb_traced(
    m: &VoxelModel,
    params: &InferenceParams,
) -> Result<(ShapeSet, SearchTrace), InferenceError> {
    let init = initialize(m, params)?;
    let mut search = Search::new(m, params, &init);
    let initial_shapes = search.alive;
    let initial_log_cost = search.current();
    let mut steps = Vec::new();
    while params.max_steps.map_or(true, |cap| steps.len() < cap) {
        let kind = match search.step() {
            Some(k) => k,
            None => break,
        };
        let sum = search.sum.value();
        steps.push(SearchStep {
            kind,
            shapes: search.alive,
            entropy_sum: sum,
            log_cost: log_cost(search.alive, sum, params.alpha),
        });
    }
    let set = search.finish().postprocess();
    let final_cost = set.cost(params.alpha);
    Ok((
        set,
        SearchTrace {
            initial_shapes,
            initial_log_cost,
            steps,
            final_cost,
        },
    ))
}

struct Piece {
    layer: usize,
    tag: Option<Axis>,
    /// Block indices, ascending.
    blocks: Vec<u32>,
    counts: Vec<u32>,
    entropy: f64,
    lo: GridPos,
    hi: GridPos,
}

struct Search<'m> {
    model: &'m VoxelModel,
    spec: ShapeSpec,
    params: InferenceParams,
    pos: Vec<GridPos>,
    ty: Vec<u16>,
    nbr: Vec<[u32; 6]>,
    n_types: usize,
    pieces: Vec<Option<Piece>>,
    /// `owner[layer][block]` is the piece holding `block` in that layer.
    owner: Vec<Vec<u32>>,
    alive: usize,
    sum: ExactSum,
    mark: Vec<u32>,
    mark_gen: u32,
}

fn entropy(counts: &[u32]) -> f64 {
    entropy_of_counts(counts.iter().map(|&c| c as usize))
}

fn bounds(pos: &[GridPos], blocks: &[u32]) -> (GridPos, GridPos) {
    let first = pos[blocks[0] as usize];
    blocks.iter().fold((first, first), |(lo, hi), &b| {
        let p = pos[b as usize];
        (lo.component_min(p), hi.component_max(p))
    })
}

fn volume(lo: GridPos, hi: GridPos) -> u64 {
    crate::shape::box_volume(lo, hi)
}

fn is_flat(lo: GridPos, hi: GridPos) -> bool {
    Axis::ALL.iter().any(|&a| lo.get(a) == hi.get(a))
}

impl<'m> Search<'m> {
    fn new(model: &'m VoxelModel, params: &InferenceParams, init: &ShapeSet) -> Self {
        let pos: Vec<GridPos> = model.cells().keys().copied().collect();
        let index: HashMap<GridPos, u32> =
            pos.iter().enumerate().map(|(i, p)| (*p, i as u32)).collect();
        let mut type_ids = HashMap::new();
        let ty: Vec<u16> = model
            .cells()
            .values()
            .map(|t| {
                let next = type_ids.len() as u16;
                *type_ids.entry(t.clone()).or_insert(next)
            })
            .collect();
        let n_types = type_ids.len();
        let nbr = pos
            .iter()
            .map(|p| FACE_OFFSETS.map(|d| index.get(&(*p + d)).copied().unwrap_or(NONE)))
            .collect();
        let three_plane = params.three_plane();
        let layers = if three_plane { 3 } else { 1 };
        let mut search = Search {
            model,
            spec: params.spec,
            params: *params,
            pos,
            ty,
            nbr,
            n_types,
            pieces: Vec::new(),
            owner: vec![vec![NONE; index.len()]; layers],
            alive: 0,
            sum: ExactSum::default(),
            mark: vec![0; index.len()],
            mark_gen: 0,
        };
        for s in init.shapes() {
            debug_assert_eq!(s.id().0 as usize, search.pieces.len());
            let tag = if three_plane { s.plane() } else { None };
            let layer = tag.map_or(0, Axis::index);
            let mut blocks: Vec<u32> = s.positions().map(|p| index[&p]).collect();
            blocks.sort_unstable();
            let piece = search.make_piece(layer, tag, blocks);
            search.insert(piece);
        }
        search
    }

    fn make_piece(&self, layer: usize, tag: Option<Axis>, blocks: Vec<u32>) -> Piece {
        let mut counts = vec![0u32; self.n_types];
        for &b in &blocks {
            counts[self.ty[b as usize] as usize] += 1;
        }
        let (lo, hi) = bounds(&self.pos, &blocks);
        Piece {
            layer,
            tag,
            entropy: entropy(&counts),
            blocks,
            counts,
            lo,
            hi,
        }
    }

    fn insert(&mut self, piece: Piece) -> u32 {
        let id = self.pieces.len() as u32;
        for &b in &piece.blocks {
            self.owner[piece.layer][b as usize] = id;
        }
        self.sum.add(piece.entropy);
        self.alive += 1;
        self.pieces.push(Some(piece));
        id
    }

    fn current(&self) -> f64 {
        log_cost(self.alive, self.sum.value(), self.params.alpha)
    }

    fn candidate(&self, shapes: usize, removed: &[f64], added: &[f64]) -> f64 {
        let mut sum = self.sum.clone();
        for &e in removed {
            sum.add(-e);
        }
        for &e in added {
            sum.add(e);
        }
        log_cost(shapes, sum.value(), self.params.alpha)
    }

    fn step(&mut self) -> Option<StepKind> {
        let current = self.current();
        if self.params.ops.merges() {
            if let Some((i, j)) = self.first_merge(current) {
                self.apply_merge(i, j);
                return Some(StepKind::Merge {
                    kept: ShapeId(i),
                    removed: ShapeId(j),
                });
            }
        }
        if self.params.ops.splits() {
            if let Some((i, part)) = self.first_split(current) {
                let created = self.apply_split(i, part);
                return Some(StepKind::Split {
                    shape: ShapeId(i),
                    created: ShapeId(created),
                });
            }
        }
        None
    }

    fn merge_legal(&self, a: &Piece, b: &Piece) -> bool {
        let lo = a.lo.component_min(b.lo);
        let hi = a.hi.component_max(b.hi);
        if let Some(axis) = a.tag {
            if lo.get(axis) != hi.get(axis) {
                return false;
            }
        }
        match self.spec {
            // pieces of one layer are disjoint and adjacent, so the union is
            // connected; only the spec's geometry remains to check
            ShapeSpec::Free3D => true,
            ShapeSpec::Planar2D => is_flat(lo, hi),
            ShapeSpec::Rectangular => {
                is_flat(lo, hi) && volume(lo, hi) == (a.blocks.len() + b.blocks.len()) as u64
            }
        }
    }

    fn first_merge(&self, current: f64) -> Option<(u32, u32)> {
        let mut partners = Vec::new();
        for (i, a) in self.pieces.iter().enumerate() {
            let Some(a) = a else { continue };
            partners.clear();
            for &blk in &a.blocks {
                for &n in &self.nbr[blk as usize] {
                    if n == NONE {
                        continue;
                    }
                    let j = self.owner[a.layer][n as usize];
                    if j as usize > i {
                        partners.push(j);
                    }
                }
            }
            partners.sort_unstable();
            partners.dedup();
            for &j in &partners {
                let b = self.pieces[j as usize].as_ref().expect("owners are alive");
                if !self.merge_legal(a, b) {
                    continue;
                }
                let counts: Vec<u32> = a.counts.iter().zip(&b.counts).map(|(x, y)| x + y).collect();
                let next = self.candidate(self.alive - 1, &[a.entropy, b.entropy], &[entropy(&counts)]);
                if next < current || (self.params.plateau_merges && next <= current) {
                    return Some((i as u32, j));
                }
            }
        }
        None
    }

    fn apply_merge(&mut self, i: u32, j: u32) {
        let b = self.pieces[j as usize].take().expect("merge partner is alive");
        let layer = b.layer;
        for &blk in &b.blocks {
            self.owner[layer][blk as usize] = i;
        }
        let a = self.pieces[i as usize].as_mut().expect("merge target is alive");
        let old_a = a.entropy;
        let mut blocks = std::mem::take(&mut a.blocks);
        blocks.extend_from_slice(&b.blocks);
        blocks.sort_unstable();
        a.blocks = blocks;
        for (x, y) in a.counts.iter_mut().zip(&b.counts) {
            *x += y;
        }
        a.entropy = entropy(&a.counts);
        a.lo = a.lo.component_min(b.lo);
        a.hi = a.hi.component_max(b.hi);
        let new_e = a.entropy;
        self.sum.add(-old_a);
        self.sum.add(-b.entropy);
        self.sum.add(new_e);
        self.alive -= 1;
    }

    /// Split candidates of a piece, in scan order: axis-aligned cuts (`x`,
    /// then `y`, then `z`, lower half first), then for non-rectangular specs
    /// single-block peels in block order.
    fn split_candidates(&self, p: &Piece) -> Vec<Vec<u32>> {
        let mut out = Vec::new();
        for axis in Axis::ALL {
            for c in p.lo.get(axis)..p.hi.get(axis) {
                let part: Vec<u32> = p
                    .blocks
                    .iter()
                    .copied()
                    .filter(|&b| self.pos[b as usize].get(axis) <= c)
                    .collect();
                if !part.is_empty() && part.len() < p.blocks.len() {
                    out.push(part);
                }
            }
        }
        if self.spec != ShapeSpec::Rectangular && p.blocks.len() > 1 {
            out.extend(p.blocks.iter().map(|&b| vec![b]));
        }
        out
    }

    fn first_split(&mut self, current: f64) -> Option<(u32, Vec<u32>)> {
        for i in 0..self.pieces.len() {
            let Some(p) = self.pieces[i].as_ref() else { continue };
            if p.blocks.len() < 2 {
                continue;
            }
            for part in self.split_candidates(p) {
                let p = self.pieces[i].as_ref().expect("alive");
                let mut counts = vec![0u32; self.n_types];
                for &b in &part {
                    counts[self.ty[b as usize] as usize] += 1;
                }
                let rest: Vec<u32> = p.counts.iter().zip(&counts).map(|(x, y)| x - y).collect();
                let next = self.candidate(
                    self.alive + 1,
                    &[p.entropy],
                    &[entropy(&counts), entropy(&rest)],
                );
                if next < current && self.split_legal(i, &part) {
                    return Some((i as u32, part));
                }
            }
        }
        None
    }

    /// Both halves must be connected. Cuts of rectangles are always legal,
    /// and halves of planar pieces stay in their plane.
    fn split_legal(&mut self, i: usize, part: &[u32]) -> bool {
        if self.spec == ShapeSpec::Rectangular {
            return true;
        }
        let blocks = self.pieces[i].as_ref().expect("alive").blocks.clone();
        self.mark_gen += 2;
        let (in_part, in_rest) = (self.mark_gen, self.mark_gen + 1);
        for &b in &blocks {
            self.mark[b as usize] = in_rest;
        }
        for &b in part {
            self.mark[b as usize] = in_part;
        }
        let rest_start = blocks
            .iter()
            .copied()
            .find(|&b| self.mark[b as usize] == in_rest)
            .expect("part is a proper subset");
        self.connected(part[0], in_part, part.len()) && self.connected(rest_start, in_rest, blocks.len() - part.len())
    }

    fn connected(&self, start: u32, label: u32, expected: usize) -> bool {
        let mut seen = vec![start];
        let mut visited = std::collections::HashSet::from([start]);
        while let Some(b) = seen.pop() {
            for &n in &self.nbr[b as usize] {
                if n != NONE && self.mark[n as usize] == label && visited.insert(n) {
                    seen.push(n);
                }
            }
        }
        visited.len() == expected
    }

    fn apply_split(&mut self, i: u32, part: Vec<u32>) -> u32 {
        let old = self.pieces[i as usize].take().expect("split target is alive");
        let in_part: std::collections::HashSet<u32> = part.iter().copied().collect();
        let rest: Vec<u32> = old.blocks.iter().copied().filter(|b| !in_part.contains(b)).collect();
        let first = self.make_piece(old.layer, old.tag, part);
        let second = self.make_piece(old.layer, old.tag, rest);
        self.sum.add(-old.entropy);
        self.sum.add(first.entropy);
        for &b in &first.blocks {
            self.owner[first.layer][b as usize] = i;
        }
        self.pieces[i as usize] = Some(first);
        self.insert(second)
    }

    fn finish(self) -> ShapeSet {
        let shapes = self
            .pieces
            .iter()
            .enumerate()
            .filter_map(|(k, p)| {
                let p = p.as_ref()?;
                let positions: Vec<GridPos> =
                    p.blocks.iter().map(|&b| self.pos[b as usize]).collect();
                Some(build_shape(self.model, self.spec, ShapeId(k as u32), &positions, p.tag))
            })
            .collect();
        ShapeSet::new(
            self.model.clone(),
            self.spec,
            self.params.effective_overlap(),
            shapes,
        )
        .expect("search pieces are drawn from the model")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::SearchOps;
    use crate::voxel::Block;

    fn model(cells: &[((i32, i32, i32), &str)]) -> VoxelModel {
        VoxelModel::from_blocks(
            "m",
            cells
                .iter()
                .map(|&((x, y, z), t)| Block::new(t, GridPos::new(x, y, z))),
        )
        .unwrap()
    }

    #[test]
    fn two_types_stay_apart() {
        let m = model(&[((0, 0, 0), "a"), ((1, 0, 0), "b")]);
        let p = InferenceParams::new(ShapeSpec::Rectangular, 1.0, SearchOps::MergeOnly);
        let (set, trace) = hill_climb_traced(&m, &p).unwrap();
        assert_eq!(set.len(), 2);
        assert!(trace.steps.is_empty());
    }

    #[test]
    fn monochrome_wall_merges_on_plateau_only() {
        let cells: Vec<((i32, i32, i32), &str)> =
            (0..4).flat_map(|y| (0..3).map(move |z| ((0, y, z), "stone"))).collect();
        let m = model(&cells);
        let p = InferenceParams::new(ShapeSpec::Rectangular, 1.0, SearchOps::MergeOnly);
        assert_eq!(hill_climb(&m, &p).unwrap().len(), 1);
        let strict = p.with_plateau_merges(false);
        assert_eq!(hill_climb(&m, &strict).unwrap().len(), 12);
    }

    #[test]
    fn splits_separate_materials() {
        // a 4x1 bar, half glass half stone, starting from one maximal shape
        let m = model(&[((0, 0, 0), "glass"), ((1, 0, 0), "glass"), ((2, 0, 0), "stone"), ((3, 0, 0), "stone")]);
        let p = InferenceParams::new(ShapeSpec::Rectangular, 1.0, SearchOps::SplitOnly);
        let (set, trace) = hill_climb_traced(&m, &p).unwrap();
        assert_eq!(trace.initial_shapes, 1);
        assert_eq!(set.len(), 2);
        assert_eq!(set.cost(1.0), 0.0);
    }

    #[test]
    fn max_steps_caps_the_search() {
        let cells: Vec<((i32, i32, i32), &str)> = (0..6).map(|x| ((x, 0, 0), "a")).collect();
        let m = model(&cells);
        let p = InferenceParams::new(ShapeSpec::Rectangular, 1.0, SearchOps::MergeOnly).with_max_steps(2);
        let (set, trace) = hill_climb_traced(&m, &p).unwrap();
        assert_eq!(trace.steps.len(), 2);
        assert_eq!(set.len(), 4);
    }

    #[test]
    fn peels_break_free_shapes() {
        // an L of stone with a glass block at the tip; only a peel isolates it
        let m = model(&[((0, 0, 0), "stone"), ((1, 0, 0), "stone"), ((1, 1, 0), "stone"), ((1, 2, 0), "glass")]);
        let p = InferenceParams::new(ShapeSpec::Planar2D, 0.0, SearchOps::SplitOnly);
        let set = hill_climb(&m, &p).unwrap();
        assert_eq!(set.cost(0.0), 0.0);
        assert!(set.violations().is_empty());
    }
}
