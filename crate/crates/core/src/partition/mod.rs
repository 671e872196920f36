//! Domain decomposition for a distributed FMM, simulated in one process:
//! weighted recursive bisection, locally essential trees, hierarchical
//! sparse data exchange and a dragonfly network cost model.

pub mod balance;
pub mod distributed;
pub mod dragonfly;
pub mod exchange;
pub mod orb;
pub mod weight;

pub use distributed::{extract_let, graft_let, local_trees, DistributedFmm, LetForest, LetPayload, RankTree};
pub use dragonfly::{dragonfly_hops, DragonflyMap};
pub use exchange::{alltoall_baseline, hsdx_exchange, CommGraph, Demand, ExchangeStats, Item, TraceRecord};
pub use orb::{orb_partition, Aabb, PartitionPlan};
pub use weight::{compute_weight, update_alpha};
