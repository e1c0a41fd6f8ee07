//! Rigid grid transforms: a quarter-turn rotation about the vertical axis
//! followed by an integer translation.

use serde::{Deserialize, Serialize};

use crate::voxel::GridPos;

/// `p ↦ R(rot·π/2)·p + delta`, where `R` rotates about the z axis.
///
/// The four rotations form a cyclic group; reflections are not representable,
/// so mirrored shapes never match.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "RawTransform", into = "RawTransform")]
pub struct GridTransform {
    rot: u8,
    pub delta: GridPos,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTransform {
    rot: u8,
    delta: [i32; 3],
}

impl TryFrom<RawTransform> for GridTransform {
    type Error = String;
    fn try_from(r: RawTransform) -> Result<Self, String> {
        if r.rot > 3 {
            return Err(format!("rotation {} out of range 0..=3", r.rot));
        }
        Ok(GridTransform::new(r.rot, r.delta.into()))
    }
}

impl From<GridTransform> for RawTransform {
    fn from(t: GridTransform) -> Self {
        RawTransform {
            rot: t.rot,
            delta: t.delta.into(),
        }
    }
}

impl Default for GridTransform {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl GridTransform {
    pub const IDENTITY: GridTransform = GridTransform {
        rot: 0,
        delta: GridPos::ORIGIN,
    };

    /// `rot` is taken modulo 4.
    pub fn new(rot: u8, delta: GridPos) -> Self {
        Self {
            rot: rot % 4,
            delta,
        }
    }

    pub fn translation(delta: GridPos) -> Self {
        Self::new(0, delta)
    }

    pub fn rotation(rot: u8) -> Self {
        Self::new(rot, GridPos::ORIGIN)
    }

    pub fn rot(&self) -> u8 {
        self.rot
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::IDENTITY
    }

    /// Applies only the rotational part.
    pub fn rotate(&self, p: GridPos) -> GridPos {
        rotate_z(p, self.rot)
    }

    pub fn apply(&self, p: GridPos) -> GridPos {
        self.rotate(p) + self.delta
    }

    /// `self ∘ inner`: apply `inner` first, then `self`.
    pub fn compose(&self, inner: &GridTransform) -> GridTransform {
        GridTransform::new(self.rot + inner.rot, self.rotate(inner.delta) + self.delta)
    }

    pub fn inverse(&self) -> GridTransform {
        let back = (4 - self.rot) % 4;
        let d = rotate_z(self.delta, back);
        GridTransform::new(back, GridPos::new(-d.x, -d.y, -d.z))
    }
}

/// Rotation by `k·π/2` about z: `(x, y) ↦ (x cos θ − y sin θ, x sin θ + y cos θ)`.
pub fn rotate_z(p: GridPos, k: u8) -> GridPos {
    match k % 4 {
        0 => p,
        1 => GridPos::new(-p.y, p.x, p.z),
        2 => GridPos::new(-p.x, -p.y, p.z),
        _ => GridPos::new(p.y, -p.x, p.z),
    }
}
