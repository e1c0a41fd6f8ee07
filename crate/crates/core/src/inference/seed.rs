//! Initial shape sets for the hill climber.

use std::collections::{BTreeSet, HashSet, VecDeque};

use crate::shape::{Shape, ShapeId, ShapeSpec};
use crate::voxel::{neighbors6, Axis, GridPos, VoxelModel};

use super::{preferred_plane, InferenceError, InferenceParams, ShapeSet};

/// Builds the starting shape set for `params`:
///
/// * merges (alone or with splits), overlap on, planar spec: three
///   single-block shapes per block, one tagged with each plane;
/// * merges otherwise: one single-block shape per block;
/// * splits only: a greedy partition into maximal shapes.
pub fn initialize(m: &VoxelModel, params: &InferenceParams) -> Result<ShapeSet, InferenceError> {
    params.validate()?;
    if m.is_empty() {
        return Err(InferenceError::EmptyModel);
    }
    if params.overlap && !params.spec.is_planar() {
        log::warn!("overlap is only supported for planar shape specs; ignoring it for 3d shapes");
    }
    let spec = params.spec;
    let groups: Vec<(Vec<GridPos>, Option<Axis>)> = if params.three_plane() {
        m.cells()
            .keys()
            .flat_map(|&p| [Axis::X, Axis::Y, Axis::Z].map(|a| (vec![p], Some(a))))
            .collect()
    } else if params.ops.merges() {
        m.cells().keys().map(|&p| (vec![p], None)).collect()
    } else {
        maximal_partition(m, spec)
    };
    let shapes = groups
        .into_iter()
        .enumerate()
        .map(|(k, (positions, tag))| build_shape(m, spec, ShapeId(k as u32), &positions, tag))
        .collect();
    ShapeSet::new(m.clone(), spec, params.effective_overlap(), shapes)
}

/// Builds a shape from positions already known to satisfy `spec`. Untagged
/// planar shapes get the plane chosen by [`preferred_plane`].
pub(super) fn build_shape(
    m: &VoxelModel,
    spec: ShapeSpec,
    id: ShapeId,
    positions: &[GridPos],
    tag: Option<Axis>,
) -> Shape {
    let blocks = positions.iter().map(|p| crate::voxel::Block {
        ty: m.get(*p).expect("positions come from the model").clone(),
        pos: *p,
    });
    let shape = Shape::new(id, spec, blocks).expect("search only produces valid shapes");
    if !spec.is_planar() {
        return shape;
    }
    let axis = tag.or_else(|| preferred_plane(positions, m));
    match axis {
        Some(a) => shape.with_plane(a).expect("chosen plane is flat"),
        None => shape,
    }
}

/// Greedy decomposition into the largest spec-valid pieces: whole connected
/// components for 3d, the largest connected plane slice for 2d, and the
/// largest filled axis-aligned rectangle for rectangles. Ties go to the piece
/// found first scanning axes `x, y, z` and coordinates upward.
fn maximal_partition(m: &VoxelModel, spec: ShapeSpec) -> Vec<(Vec<GridPos>, Option<Axis>)> {
    let mut uncovered: BTreeSet<GridPos> = m.cells().keys().copied().collect();
    let mut out = Vec::new();
    match spec {
        ShapeSpec::Free3D => {
            while let Some(&start) = uncovered.iter().next() {
                let comp = component(start, &uncovered, None);
                for p in &comp {
                    uncovered.remove(p);
                }
                out.push((comp, None));
            }
        }
        ShapeSpec::Planar2D => {
            while !uncovered.is_empty() {
                let (axis, comp) = largest_slice_component(&uncovered);
                for p in &comp {
                    uncovered.remove(p);
                }
                out.push((comp, Some(axis)));
            }
        }
        ShapeSpec::Rectangular => {
            while !uncovered.is_empty() {
                let (axis, rect) = largest_rectangle(&uncovered);
                for p in &rect {
                    uncovered.remove(p);
                }
                out.push((rect, Some(axis)));
            }
        }
    }
    // Lines and single blocks lie in several planes; let the caller choose.
    for (g, axis) in &mut out {
        if crate::shape::flat_axes(g.iter().copied()).len() > 1 {
            *axis = None;
        }
    }
    out
}

/// Face-connected component of `start` within `set`, optionally restricted to
/// the plane through `start` normal to the given axis. Sorted.
fn component(start: GridPos, set: &BTreeSet<GridPos>, plane: Option<Axis>) -> Vec<GridPos> {
    let mut seen = HashSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some(p) = queue.pop_front() {
        for q in neighbors6(p) {
            if plane.is_some_and(|a| q.get(a) != start.get(a)) {
                continue;
            }
            if set.contains(&q) && seen.insert(q) {
                queue.push_back(q);
            }
        }
    }
    let mut v: Vec<GridPos> = seen.into_iter().collect();
    v.sort();
    v
}

fn largest_slice_component(set: &BTreeSet<GridPos>) -> (Axis, Vec<GridPos>) {
    let mut best: Option<(Axis, Vec<GridPos>)> = None;
    for axis in Axis::ALL {
        let mut slices: Vec<GridPos> = set.iter().copied().collect();
        slices.sort_by_key(|p| (p.get(axis), *p));
        let mut visited: HashSet<GridPos> = HashSet::new();
        for p in slices {
            if visited.contains(&p) {
                continue;
            }
            let comp = component(p, set, Some(axis));
            visited.extend(comp.iter().copied());
            if best.as_ref().map_or(true, |(_, b)| comp.len() > b.len()) {
                best = Some((axis, comp));
            }
        }
    }
    best.expect("set is non-empty")
}

/// The two in-plane axes for a slice normal to `axis`.
fn in_plane(axis: Axis) -> (Axis, Axis) {
    match axis {
        Axis::X => (Axis::Y, Axis::Z),
        Axis::Y => (Axis::X, Axis::Z),
        Axis::Z => (Axis::X, Axis::Y),
    }
}

/// Largest filled rectangle over all axis-aligned slices, via the histogram
/// method on each slice.
fn largest_rectangle(set: &BTreeSet<GridPos>) -> (Axis, Vec<GridPos>) {
    let (lo, hi) = crate::voxel::bounding_box(set.iter().copied()).expect("set is non-empty");
    // (area, axis, rectangle corners)
    let mut best: Option<(usize, Axis, GridPos, GridPos)> = None;
    for axis in Axis::ALL {
        let (u, v) = in_plane(axis);
        let width = (hi.get(u) - lo.get(u) + 1) as usize;
        for c in lo.get(axis)..=hi.get(axis) {
            let mut heights = vec![0usize; width];
            for row in lo.get(v)..=hi.get(v) {
                for (k, h) in heights.iter_mut().enumerate() {
                    let p = GridPos::ORIGIN
                        .with(axis, c)
                        .with(u, lo.get(u) + k as i32)
                        .with(v, row);
                    *h = if set.contains(&p) { *h + 1 } else { 0 };
                }
                for (area, start, end, h) in histogram_rectangles(&heights) {
                    if best.as_ref().map_or(true, |b| area > b.0) {
                        let a = GridPos::ORIGIN
                            .with(axis, c)
                            .with(u, lo.get(u) + start as i32)
                            .with(v, row - h as i32 + 1);
                        let b = a.with(u, lo.get(u) + end as i32).with(v, row);
                        best = Some((area, axis, a, b));
                    }
                }
            }
        }
    }
    let (_, axis, a, b) = best.expect("set is non-empty");
    let mut rect = Vec::new();
    for z in a.z..=b.z {
        for y in a.y..=b.y {
            for x in a.x..=b.x {
                rect.push(GridPos::new(x, y, z));
            }
        }
    }
    (axis, rect)
}

/// Maximal rectangles under a histogram as `(area, first column, last column,
/// height)`, in the order the stack algorithm closes them.
fn histogram_rectangles(heights: &[usize]) -> Vec<(usize, usize, usize, usize)> {
    let mut out = Vec::new();
    let mut stack: Vec<(usize, usize)> = Vec::new(); // (start column, height)
    for (i, &h) in heights.iter().chain(std::iter::once(&0)).enumerate() {
        let mut start = i;
        while let Some(&(s, sh)) = stack.last() {
            if sh < h {
                break;
            }
            stack.pop();
            if sh > 0 {
                out.push((sh * (i - s), s, i - 1, sh));
            }
            start = s;
        }
        stack.push((start, h));
    }
    out
}
