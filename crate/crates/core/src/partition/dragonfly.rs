//! Hop counts on a dragonfly network.
//!
//! Nodes are enumerated in nested units: 4 nodes per blade, 64 per chassis,
//! 192 per cabinet and 384 per local all-to-all group, with 2,304 nodes per
//! tier of the global network. Messages within a local group take one hop,
//! within a global tier two, and three otherwise.

use crate::error::{Error, Result};

pub const NODES_PER_BLADE: usize = 4;
pub const NODES_PER_CHASSIS: usize = 64;
pub const NODES_PER_CABINET: usize = 192;
pub const NODES_PER_GROUP: usize = 384;
pub const NODES_PER_GLOBAL_TIER: usize = 2304;

/// Placement of ranks onto nodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DragonflyMap {
    pub nranks: usize,
    pub ranks_per_node: usize,
    /// Node index distance between consecutive occupied nodes.
    pub node_stride: usize,
}

/// Position of a node in the network hierarchy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NodeCoords {
    pub node: usize,
    pub blade: usize,
    pub chassis: usize,
    pub cabinet: usize,
    pub group: usize,
    pub tier: usize,
}

impl DragonflyMap {
    pub fn new(nranks: usize, ranks_per_node: usize, node_stride: usize) -> Result<Self> {
        if ranks_per_node == 0 || node_stride == 0 {
            return Err(Error::Config("ranks per node and node stride must be positive".into()));
        }
        Ok(Self {
            nranks,
            ranks_per_node,
            node_stride,
        })
    }

    /// One rank per node, spread so that `groups_spanned` local groups are used.
    pub fn spread(nranks: usize, groups_spanned: usize) -> Result<Self> {
        let per_group = nranks.div_ceil(groups_spanned.max(1)).max(1);
        Self::new(nranks, 1, (NODES_PER_GROUP / per_group).max(1))
    }

    pub fn node(&self, rank: usize) -> Result<usize> {
        if rank >= self.nranks {
            return Err(Error::Topology(alloc::format!("rank {rank} is not mapped")));
        }
        Ok(rank / self.ranks_per_node * self.node_stride)
    }

    pub fn coords(&self, rank: usize) -> Result<NodeCoords> {
        let node = self.node(rank)?;
        Ok(NodeCoords {
            node,
            blade: node / NODES_PER_BLADE,
            chassis: node / NODES_PER_CHASSIS,
            cabinet: node / NODES_PER_CABINET,
            group: node / NODES_PER_GROUP,
            tier: node / NODES_PER_GLOBAL_TIER,
        })
    }

    /// Local all-to-all group of a rank.
    pub fn group(&self, rank: usize) -> Result<usize> {
        Ok(self.coords(rank)?.group)
    }

    pub fn groups_spanned(&self) -> usize {
        if self.nranks == 0 {
            return 0;
        }
        self.group(self.nranks - 1).unwrap_or(0) - self.group(0).unwrap_or(0) + 1
    }
}

pub fn dragonfly_hops(map: &DragonflyMap, a: usize, b: usize) -> Result<u32> {
    let (ca, cb) = (map.coords(a)?, map.coords(b)?);
    Ok(if ca.node == cb.node {
        0
    } else if ca.group == cb.group {
        1
    } else if ca.tier == cb.tier {
        2
    } else {
        3
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_hops() {
        let m = DragonflyMap::new(20_000, 2, 1).unwrap();
        assert_eq!(dragonfly_hops(&m, 0, 1).unwrap(), 0);
        // Nodes 0 and 4: same chassis, different blades.
        assert_eq!(dragonfly_hops(&m, 0, 8).unwrap(), 1);
        assert_eq!(dragonfly_hops(&m, 0, 2 * 500).unwrap(), 2);
        assert_eq!(dragonfly_hops(&m, 0, 2 * 5000).unwrap(), 3);
        assert!(dragonfly_hops(&m, 0, 20_000).is_err());
    }

    #[test]
    fn spread_spans_groups() {
        let m = DragonflyMap::spread(64, 8).unwrap();
        assert_eq!(m.groups_spanned(), 8);
        assert_eq!(m.group(7).unwrap(), 0);
        assert_eq!(m.group(8).unwrap(), 1);
    }
}
