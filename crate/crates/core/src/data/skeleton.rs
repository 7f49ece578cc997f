//! The 18-joint body layout shared by every sample.

use crate::error::{Error, Result};

/// Number of joints retained after selection.
pub const NUM_JOINTS: usize = 18;

/// Number of joints in a raw export before selection.
pub const NUM_RAW_JOINTS: usize = 20;

/// Canonical joint order. Index 8 (`Spine1`) is the default body root.
pub const JOINT_NAMES: [&str; NUM_JOINTS] = [
    "Head",
    "Neck",
    "RightShoulder",
    "RightElbow",
    "RightWrist",
    "LeftShoulder",
    "LeftElbow",
    "LeftWrist",
    "Spine1",
    "Spine2",
    "Spine3",
    "Spine4",
    "RightHip",
    "RightKnee",
    "RightHeel",
    "LeftHip",
    "LeftKnee",
    "LeftHeel",
];

pub const DEFAULT_ROOT: usize = 8;

/// Parent/child pairs of the canonical tree, rooted at `Spine1`.
pub const BONES: [(usize, usize); NUM_JOINTS - 1] = [
    (8, 9),
    (9, 10),
    (10, 11),
    (11, 1),
    (1, 0),
    (1, 2),
    (2, 3),
    (3, 4),
    (1, 5),
    (5, 6),
    (6, 7),
    (8, 12),
    (12, 13),
    (13, 14),
    (8, 15),
    (15, 16),
    (16, 17),
];

/// Raw export order: the canonical joints with a hand end-effector after
/// each wrist. Those two are dropped by the default mapping.
pub const RAW_JOINT_NAMES: [&str; NUM_RAW_JOINTS] = [
    "Head",
    "Neck",
    "RightShoulder",
    "RightElbow",
    "RightWrist",
    "RightHand",
    "LeftShoulder",
    "LeftElbow",
    "LeftWrist",
    "LeftHand",
    "Spine1",
    "Spine2",
    "Spine3",
    "Spine4",
    "RightHip",
    "RightKnee",
    "RightHeel",
    "LeftHip",
    "LeftKnee",
    "LeftHeel",
];

/// Raw index for each canonical joint.
pub const DEFAULT_RAW_MAPPING: [usize; NUM_JOINTS] =
    [0, 1, 2, 3, 4, 6, 7, 8, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19];

#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton {
    pub joint_names: Vec<String>,
    pub root_index: usize,
    pub bone_edges: Vec<(usize, usize)>,
}

impl Default for Skeleton {
    fn default() -> Self {
        Skeleton {
            joint_names: JOINT_NAMES.iter().map(|s| s.to_string()).collect(),
            root_index: DEFAULT_ROOT,
            bone_edges: BONES.to_vec(),
        }
    }
}

impl Skeleton {
    pub fn with_root(root_index: usize) -> Result<Self> {
        let skel = Skeleton {
            root_index,
            ..Skeleton::default()
        };
        skel.validate()?;
        Ok(skel)
    }

    pub fn num_joints(&self) -> usize {
        self.joint_names.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.joint_names.len();
        if n != NUM_JOINTS {
            return Err(Error::Structure(format!(
                "skeleton must have {NUM_JOINTS} joints, got {n}"
            )));
        }
        if self.root_index >= n {
            return Err(Error::Structure(format!(
                "root index {} out of range",
                self.root_index
            )));
        }
        if !is_spanning_tree(n, &self.bone_edges) {
            return Err(Error::Structure(
                "bone edges do not form a connected tree".into(),
            ));
        }
        Ok(())
    }
}

/// True when `edges` connect all `n` nodes with exactly `n - 1` edges.
pub fn is_spanning_tree(n: usize, edges: &[(usize, usize)]) -> bool {
    if n == 0 || edges.len() != n - 1 {
        return false;
    }
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for &(a, b) in edges {
        if a >= n || b >= n {
            return false;
        }
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra == rb {
            return false;
        }
        parent[ra] = rb;
    }
    true
}

/// Bone list for an arbitrary joint count: the canonical tree for 18 joints,
/// otherwise a chain. Used by reduced model configurations.
pub fn bones_for(num_joints: usize) -> Vec<(usize, usize)> {
    if num_joints == NUM_JOINTS {
        BONES.to_vec()
    } else {
        (1..num_joints).map(|j| (j - 1, j)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_skeleton_is_valid() {
        let s = Skeleton::default();
        s.validate().unwrap();
        assert_eq!(s.joint_names[17], "LeftHeel");
        assert_eq!(s.joint_names[s.root_index], "Spine1");
    }

    #[test]
    fn mapping_keeps_canonical_names() {
        for (canon, &raw) in DEFAULT_RAW_MAPPING.iter().enumerate() {
            assert_eq!(JOINT_NAMES[canon], RAW_JOINT_NAMES[raw]);
        }
    }

    #[test]
    fn rejects_bad_root_and_cycles() {
        assert!(Skeleton::with_root(18).is_err());
        let mut s = Skeleton::default();
        s.bone_edges[0] = (1, 0);
        assert!(s.validate().is_err());
        assert!(is_spanning_tree(4, &bones_for(4)));
    }
}
