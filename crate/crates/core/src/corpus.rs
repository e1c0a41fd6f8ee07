//! A small synthetic corpus of example buildings.
//!
//! The models are generated in code so they stay in sync with the JSON copies
//! under `corpus/` at the repository root. Every model in [`all`] is
//! face-connected, has 50 to 500 blocks and 2 to 8 block types.

use crate::voxel::{Block, GridPos, VoxelModel};

/// Names of the models returned by [`all`], in order.
pub const NAMES: [&str; 7] = [
    "flat_facade",
    "hollow_box_house",
    "two_window_facade",
    "monochrome_wall",
    "tower",
    "row_houses",
    "ziggurat",
];

/// All corpus models, in [`NAMES`] order.
pub fn all() -> Vec<VoxelModel> {
    vec![
        flat_facade(),
        hollow_box_house(),
        two_window_facade(),
        monochrome_wall(),
        tower(),
        row_houses(),
        ziggurat(),
    ]
}

/// Looks up a corpus model, including [`small_facade`], by name.
pub fn by_name(name: &str) -> Option<VoxelModel> {
    match name {
        "flat_facade" => Some(flat_facade()),
        "hollow_box_house" => Some(hollow_box_house()),
        "two_window_facade" => Some(two_window_facade()),
        "monochrome_wall" => Some(monochrome_wall()),
        "tower" => Some(tower()),
        "row_houses" => Some(row_houses()),
        "ziggurat" => Some(ziggurat()),
        "small_facade" => Some(small_facade()),
        _ => None,
    }
}

/// Later writes win, so details are painted over a base volume.
#[derive(Default)]
struct Builder {
    cells: std::collections::BTreeMap<GridPos, &'static str>,
}

impl Builder {
    fn fill(&mut self, ty: &'static str, lo: (i32, i32, i32), hi: (i32, i32, i32)) -> &mut Self {
        for z in lo.2..=hi.2 {
            for y in lo.1..=hi.1 {
                for x in lo.0..=hi.0 {
                    self.cells.insert(GridPos::new(x, y, z), ty);
                }
            }
        }
        self
    }

    fn set(&mut self, ty: &'static str, p: (i32, i32, i32)) -> &mut Self {
        self.fill(ty, p, p)
    }

    /// The four walls of a box between `lo` and `hi`, without floor or roof.
    fn walls(&mut self, ty: &'static str, lo: (i32, i32, i32), hi: (i32, i32, i32)) -> &mut Self {
        self.fill(ty, lo, (hi.0, lo.1, hi.2))
            .fill(ty, (lo.0, hi.1, lo.2), hi)
            .fill(ty, lo, (lo.0, hi.1, hi.2))
            .fill(ty, (hi.0, lo.1, lo.2), hi)
    }

    fn build(&self, name: &str) -> VoxelModel {
        VoxelModel::from_blocks(
            name,
            self.cells.iter().map(|(p, t)| Block::new(*t, *p)),
        )
        .expect("builder positions are unique")
    }
}

/// A brick wall with a door, two ground-floor windows and three matching
/// upper windows under a stone cornice.
pub fn flat_facade() -> VoxelModel {
    let mut b = Builder::default();
    b.fill("brick", (0, 0, 0), (11, 0, 7))
        .fill("stone", (0, 0, 7), (11, 0, 7))
        .fill("wood", (5, 0, 0), (6, 0, 2))
        .fill("glass", (1, 0, 1), (2, 0, 2))
        .fill("glass", (9, 0, 1), (10, 0, 2));
    for x in [1, 5, 9] {
        b.fill("glass", (x, 0, 4), (x + 1, 0, 5));
    }
    b.build("flat_facade")
}

/// A closed 7×7×5 box: stone floor, plank walls with a window on three
/// sides and a door on the front, slate roof. The interior is sealed.
pub fn hollow_box_house() -> VoxelModel {
    let mut b = Builder::default();
    b.fill("stone", (0, 0, 0), (6, 6, 0))
        .walls("planks", (0, 0, 1), (6, 6, 3))
        .fill("slate", (0, 0, 4), (6, 6, 4))
        .fill("wood", (3, 0, 1), (3, 0, 2))
        .set("glass", (3, 6, 2))
        .set("glass", (0, 3, 2))
        .set("glass", (6, 3, 2));
    b.build("hollow_box_house")
}

/// A brick facade with two identical windows. Only the left window has a
/// planter in front of its lower pane.
pub fn two_window_facade() -> VoxelModel {
    let mut b = Builder::default();
    b.fill("brick", (0, 0, 0), (9, 0, 5))
        .fill("glass", (2, 0, 2), (3, 0, 3))
        .fill("glass", (6, 0, 2), (7, 0, 3))
        .fill("leaves", (2, -1, 2), (3, -1, 2));
    b.build("two_window_facade")
}

/// A single-material stone wall standing on a one-row cobblestone footing.
pub fn monochrome_wall() -> VoxelModel {
    let mut b = Builder::default();
    b.fill("cobblestone", (0, 0, 0), (11, 0, 0))
        .fill("stone", (0, 0, 1), (11, 0, 5));
    b.build("monochrome_wall")
}

/// A hollow 5×5 stone tower with slit windows on every side at two levels,
/// a plank floor, a slate roof and corner battlements.
pub fn tower() -> VoxelModel {
    let mut b = Builder::default();
    b.fill("planks", (0, 0, 0), (4, 4, 0))
        .walls("stone", (0, 0, 1), (4, 4, 9))
        .fill("slate", (0, 0, 10), (4, 4, 10));
    for z in [3, 6] {
        b.fill("glass", (2, 0, z), (2, 0, z + 1))
            .fill("glass", (2, 4, z), (2, 4, z + 1))
            .fill("glass", (0, 2, z), (0, 2, z + 1))
            .fill("glass", (4, 2, z), (4, 2, z + 1));
    }
    for (x, y) in [(0, 0), (4, 0), (0, 4), (4, 4)] {
        b.set("stone", (x, y, 11));
    }
    b.build("tower")
}

/// Two identical cottages joined by a fence post; only the first has a
/// chimney.
pub fn row_houses() -> VoxelModel {
    let mut b = Builder::default();
    for dx in [0, 6] {
        b.fill("stone", (dx, 0, 0), (dx + 4, 4, 0))
            .walls("planks", (dx, 0, 1), (dx + 4, 4, 2))
            .fill("slate", (dx, 0, 3), (dx + 4, 4, 3))
            .set("glass", (dx + 2, 0, 2))
            .set("wood", (dx + 2, 0, 1));
    }
    b.set("fence", (5, 2, 1)).set("brick", (1, 1, 4));
    b.build("row_houses")
}

/// Three stepped sandstone tiers with smooth rims and a gold cap.
pub fn ziggurat() -> VoxelModel {
    let mut b = Builder::default();
    for (k, r) in [4, 3, 2].into_iter().enumerate() {
        let z = k as i32;
        b.fill("smooth_sandstone", (-r, -r, z), (r, r, z))
            .fill("sandstone", (-r + 1, -r + 1, z), (r - 1, r - 1, z));
    }
    b.fill("gold", (0, 0, 3), (0, 0, 4));
    b.build("ziggurat")
}

/// A 5×3 facade of two materials: a stone wall with a central glass column.
/// Small enough for exhaustive search over rectangle partitions.
pub fn small_facade() -> VoxelModel {
    let mut b = Builder::default();
    b.fill("stone", (0, 0, 0), (4, 0, 2))
        .fill("glass", (2, 0, 1), (2, 0, 2));
    b.build("small_facade")
}
