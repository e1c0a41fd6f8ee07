//! The enclosure constraint.
//!
//! A planar shape has two sides: its blocks shifted one cell either way along
//! the plane's normal. A side is reachable when some side cell can be reached
//! from outside the structure through empty cells. Shapes with both sides
//! reachable separate nothing and are removed; removal can open new paths, so
//! this repeats until no shape is removed.

use std::collections::{HashSet, VecDeque};

use serde::Serialize;
use thiserror::Error;

use crate::production::{PlacedShape, Production};
use crate::shape::{ShapeId, ShapeSpec};
use crate::voxel::{bounding_box, neighbors6, Axis, GridPos};

#[derive(Debug, Error)]
pub enum EnclosureError {
    #[error("placed shape {index} (shape {shape}) is not planar; enclosure needs planar shapes")]
    Unsupported { index: usize, shape: ShapeId },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SideSet {
    pub axis: Axis,
    /// Blocks shifted by +1 along `axis`.
    pub side1: Vec<GridPos>,
    /// Blocks shifted by −1 along `axis`.
    pub side2: Vec<GridPos>,
}

pub fn sides(s: &PlacedShape) -> Option<SideSet> {
    if s.spec == ShapeSpec::Free3D {
        return None;
    }
    let axis = s.plane?;
    let shift = |d| s.blocks.iter().map(|b| b.pos.shifted(axis, d)).collect();
    Some(SideSet {
        axis,
        side1: shift(1),
        side2: shift(-1),
    })
}

fn all_sides(shapes: &[PlacedShape]) -> Result<Vec<SideSet>, EnclosureError> {
    shapes
        .iter()
        .enumerate()
        .map(|(index, s)| sides(s).ok_or(EnclosureError::Unsupported { index, shape: s.shape }))
        .collect()
}

/// Empty cells connected to the outside: a flood fill through unoccupied
/// cells of the bounding box inflated by one, started from its boundary.
#[derive(Debug, Clone)]
pub struct Exterior {
    lo: GridPos,
    hi: GridPos,
    reached: HashSet<GridPos>,
}

impl Exterior {
    pub fn flood(occupied: &HashSet<GridPos>) -> Self {
        let Some((lo, hi)) = bounding_box(occupied.iter().copied()) else {
            return Self {
                lo: GridPos::ORIGIN,
                hi: GridPos::ORIGIN,
                reached: HashSet::new(),
            };
        };
        let one = GridPos::new(1, 1, 1);
        let (lo, hi) = (lo - one, hi + one);
        let inside = |p: GridPos| {
            Axis::ALL
                .iter()
                .all(|&a| (lo.get(a)..=hi.get(a)).contains(&p.get(a)))
        };
        let on_boundary = |p: GridPos| Axis::ALL.iter().any(|&a| p.get(a) == lo.get(a) || p.get(a) == hi.get(a));
        let mut reached = HashSet::new();
        let mut queue = VecDeque::new();
        for z in lo.z..=hi.z {
            for y in lo.y..=hi.y {
                for x in lo.x..=hi.x {
                    let p = GridPos::new(x, y, z);
                    // the inflated shell is empty by construction
                    if on_boundary(p) && reached.insert(p) {
                        queue.push_back(p);
                    }
                }
            }
        }
        while let Some(p) = queue.pop_front() {
            for q in neighbors6(p) {
                if inside(q) && !occupied.contains(&q) && reached.insert(q) {
                    queue.push_back(q);
                }
            }
        }
        Self { lo, hi, reached }
    }

    /// Cells outside the inflated box count as exterior; occupied cells never do.
    pub fn contains(&self, p: GridPos) -> bool {
        let outside = Axis::ALL
            .iter()
            .any(|&a| p.get(a) < self.lo.get(a) || p.get(a) > self.hi.get(a));
        outside || self.reached.contains(&p)
    }

    pub fn reaches_any(&self, cells: &[GridPos]) -> bool {
        cells.iter().any(|&p| self.contains(p))
    }
}

/// Per placed shape: whether side 1 and side 2 are reachable from outside.
pub fn reachable_sides(p: &Production) -> Result<Vec<(bool, bool)>, EnclosureError> {
    let sides = all_sides(p.placed())?;
    let occupied: HashSet<GridPos> = p.occupancy().keys().copied().collect();
    let ext = Exterior::flood(&occupied);
    Ok(sides
        .iter()
        .map(|s| (ext.reaches_any(&s.side1), ext.reaches_any(&s.side2)))
        .collect())
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct EnclosureReport {
    /// Placed-shape indices (into the production as it was before
    /// enforcement) removed in each round. Only rounds that removed
    /// something are listed.
    pub rounds: Vec<Vec<usize>>,
}

impl EnclosureReport {
    pub fn removed(&self) -> usize {
        self.rounds.iter().map(Vec::len).sum()
    }

    pub fn removed_indices(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self.rounds.iter().flatten().copied().collect();
        all.sort_unstable();
        all
    }
}

/// Computes which shapes the constraint removes, round by round, without
/// changing the production.
pub fn plan(p: &Production) -> Result<EnclosureReport, EnclosureError> {
    let placed = p.placed();
    let sides = all_sides(placed)?;
    let mut alive: Vec<usize> = (0..placed.len()).collect();
    let mut report = EnclosureReport::default();
    loop {
        let occupied: HashSet<GridPos> = alive
            .iter()
            .flat_map(|&k| placed[k].blocks.iter().map(|b| b.pos))
            .collect();
        let ext = Exterior::flood(&occupied);
        let (gone, kept): (Vec<usize>, Vec<usize>) = alive
            .iter()
            .partition(|&&k| ext.reaches_any(&sides[k].side1) && ext.reaches_any(&sides[k].side2));
        if gone.is_empty() {
            return Ok(report);
        }
        report.rounds.push(gone);
        alive = kept;
    }
}

/// The production with the constraint applied, plus what was removed.
pub fn enforce(p: &Production) -> Result<(Production, EnclosureReport), EnclosureError> {
    let mut out = p.clone();
    let report = out.enclose().map_err(|e| match e {
        crate::production::ProductionError::Enclosure(e) => e,
        other => unreachable!("enclosure only fails on non-planar shapes: {other}"),
    })?;
    Ok((out, report))
}
