//! Hierarchical sparse data exchange and its all-to-all baseline.
//!
//! Ranks are arranged in groups. A rank talks directly to the other members
//! of its group and to the rank holding the same index in every other
//! group. Data for a rank that is neither goes first to the same-index rank
//! of the destination's group, bundled with everything else the sender has
//! for that group and with duplicate items removed, and is then forwarded
//! inside the group.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Largest payload sent as one message; bigger payloads are split.
pub const MAX_MESSAGE_BYTES: u64 = 1 << 31;
/// Bytes per routing-table entry in a bundled message.
pub const ROUTE_ENTRY_BYTES: u64 = 8;

/// One piece of data identified within its source rank.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Item {
    pub id: u64,
    pub bytes: u64,
}

/// Items rank `src` must deliver to rank `dst`.
#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Demand {
    pub src: usize,
    pub dst: usize,
    pub items: Vec<Item>,
}

/// Demands with a single item of the given size for every non-zero entry
/// of `sizes[src][dst]`.
pub fn demands_from_sizes(sizes: &[Vec<u64>]) -> Vec<Demand> {
    let mut out = Vec::new();
    for (s, row) in sizes.iter().enumerate() {
        for (d, &b) in row.iter().enumerate() {
            if s != d && b > 0 {
                out.push(Demand {
                    src: s,
                    dst: d,
                    items: vec![Item { id: d as u64, bytes: b }],
                });
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CommGraph {
    group_of: Vec<usize>,
    index_of: Vec<usize>,
    members: Vec<Vec<usize>>,
}

impl CommGraph {
    /// Groups given by label; a rank's index is its position among the ranks
    /// sharing its label, in rank order.
    pub fn from_groups(labels: &[usize]) -> Result<Self> {
        let mut ids: BTreeMap<usize, usize> = BTreeMap::new();
        for &l in labels {
            let n = ids.len();
            ids.entry(l).or_insert(n);
        }
        let mut members = vec![Vec::new(); ids.len()];
        let mut group_of = Vec::with_capacity(labels.len());
        let mut index_of = Vec::with_capacity(labels.len());
        for (r, l) in labels.iter().enumerate() {
            let g = ids[l];
            group_of.push(g);
            index_of.push(members[g].len());
            members[g].push(r);
        }
        Ok(Self {
            group_of,
            index_of,
            members,
        })
    }

    /// `groups × per_group` ranks, rank `g·per_group + m` at `(g, m)`.
    pub fn grid(groups: usize, per_group: usize) -> Result<Self> {
        if groups == 0 || per_group == 0 {
            return Err(Error::Topology("empty communication grid".into()));
        }
        let labels: Vec<usize> = (0..groups * per_group).map(|r| r / per_group).collect();
        Self::from_groups(&labels)
    }

    pub fn len(&self) -> usize {
        self.group_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.group_of.is_empty()
    }

    pub fn groups(&self) -> usize {
        self.members.len()
    }

    pub fn position(&self, r: usize) -> (usize, usize) {
        (self.group_of[r], self.index_of[r])
    }

    pub fn is_neighbour(&self, a: usize, b: usize) -> bool {
        a != b && (self.group_of[a] == self.group_of[b] || self.index_of[a] == self.index_of[b])
    }

    pub fn neighbours(&self, r: usize) -> Vec<usize> {
        (0..self.len()).filter(|&o| self.is_neighbour(r, o)).collect()
    }

    /// The intermediate rank on the way from `s` to `d`, or `None` when they
    /// are neighbours.
    pub fn relay(&self, s: usize, d: usize) -> Result<Option<usize>> {
        if s >= self.len() || d >= self.len() {
            return Err(Error::Topology(alloc::format!("rank out of range in route {s} -> {d}")));
        }
        if s == d || self.is_neighbour(s, d) {
            return Ok(None);
        }
        let (gs, ms) = self.position(s);
        let (gd, md) = self.position(d);
        if let Some(&r) = self.members[gd].get(ms) {
            return Ok(Some(r));
        }
        if let Some(&r) = self.members[gs].get(md) {
            return Ok(Some(r));
        }
        Err(Error::Topology(alloc::format!("no route from {s} to {d}")))
    }
}

/// One message of an exchange.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TraceRecord {
    pub stage: u8,
    pub src: usize,
    pub dst: usize,
    pub bytes: u64,
    pub hops: u32,
    /// Number of physical messages after splitting at [`MAX_MESSAGE_BYTES`].
    pub chunks: u64,
}

#[derive(Clone, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExchangeStats {
    pub ranks: usize,
    pub messages: u64,
    pub bytes: u64,
    /// `Σ bytes × hops` over all messages.
    pub hop_bytes: u64,
    pub max_send_bytes: u64,
    pub max_recv_bytes: u64,
    /// Max over mean of the per-rank received bytes.
    pub recv_imbalance: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Exchange {
    pub stats: ExchangeStats,
    pub trace: Vec<TraceRecord>,
    /// `(source rank, item id)` pairs that ended up at every rank.
    pub delivered: Vec<BTreeSet<(usize, u64)>>,
}

impl Exchange {
    fn new(ranks: usize) -> Self {
        Self {
            stats: ExchangeStats {
                ranks,
                ..Default::default()
            },
            trace: Vec::new(),
            delivered: vec![BTreeSet::new(); ranks],
        }
    }

    fn send(&mut self, stage: u8, src: usize, dst: usize, bytes: u64, hops: u32) {
        let chunks = bytes.div_ceil(MAX_MESSAGE_BYTES).max(1);
        self.trace.push(TraceRecord {
            stage,
            src,
            dst,
            bytes,
            hops,
            chunks,
        });
    }

    fn finish(mut self) -> Self {
        let n = self.stats.ranks;
        let mut sent = vec![0u64; n];
        let mut recv = vec![0u64; n];
        for t in &self.trace {
            self.stats.messages += t.chunks;
            self.stats.bytes += t.bytes;
            self.stats.hop_bytes += t.bytes * t.hops as u64;
            sent[t.src] += t.bytes;
            recv[t.dst] += t.bytes;
        }
        self.stats.max_send_bytes = sent.iter().copied().max().unwrap_or(0);
        self.stats.max_recv_bytes = recv.iter().copied().max().unwrap_or(0);
        let mean = recv.iter().sum::<u64>() as f64 / n.max(1) as f64;
        self.stats.recv_imbalance = if mean > 0.0 {
            self.stats.max_recv_bytes as f64 / mean
        } else {
            1.0
        };
        self
    }
}

fn check_demands(n: usize, demands: &[Demand]) -> Result<()> {
    for d in demands {
        if d.src >= n || d.dst >= n {
            return Err(Error::Topology(alloc::format!("demand {} -> {} outside {n} ranks", d.src, d.dst)));
        }
    }
    Ok(())
}

/// Every rank sends one message to every other rank, carrying whatever it
/// owes that rank.
pub fn alltoall_baseline(
    nranks: usize,
    demands: &[Demand],
    hops: impl Fn(usize, usize) -> Result<u32>,
) -> Result<Exchange> {
    check_demands(nranks, demands)?;
    let mut sizes: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut ex = Exchange::new(nranks);
    for d in demands.iter().filter(|d| d.src != d.dst) {
        *sizes.entry((d.src, d.dst)).or_default() += d.items.iter().map(|i| i.bytes).sum::<u64>();
        ex.delivered[d.dst].extend(d.items.iter().map(|i| (d.src, i.id)));
    }
    for s in 0..nranks {
        for t in (0..nranks).filter(|&t| t != s) {
            let b = sizes.get(&(s, t)).copied().unwrap_or(0);
            ex.send(0, s, t, b, hops(s, t)?);
        }
    }
    Ok(ex.finish())
}

/// Deliver `demands` over `graph`.
///
/// Stage 1 sends one message from every rank to each neighbour it has data
/// for, carrying the union of the items for that neighbour and for all
/// destinations relayed through it, plus a routing table. Stage 2 forwards
/// relayed items, one message per (relay, destination) pair.
pub fn hsdx_exchange(
    graph: &CommGraph,
    demands: &[Demand],
    hops: impl Fn(usize, usize) -> Result<u32>,
) -> Result<Exchange> {
    let n = graph.len();
    check_demands(n, demands)?;
    // (src, next hop) -> (item id -> bytes, routing entries (final dst, id))
    type Bundle = (BTreeMap<u64, u64>, BTreeSet<(usize, u64)>);
    let mut bundles: BTreeMap<(usize, usize), Bundle> = BTreeMap::new();
    for d in demands.iter().filter(|d| d.src != d.dst && !d.items.is_empty()) {
        let next = graph.relay(d.src, d.dst)?.unwrap_or(d.dst);
        let b = bundles.entry((d.src, next)).or_default();
        for it in &d.items {
            b.0.insert(it.id, it.bytes);
            b.1.insert((d.dst, it.id));
        }
    }
    let mut ex = Exchange::new(n);
    // (relay, dst) -> (src, id) -> bytes
    let mut forwards: BTreeMap<(usize, usize), BTreeMap<(usize, u64), u64>> = BTreeMap::new();
    for (&(s, next), (items, routes)) in &bundles {
        let relayed = routes.iter().filter(|(d, _)| *d != next).count() as u64;
        let bytes = items.values().sum::<u64>() + relayed * ROUTE_ENTRY_BYTES;
        ex.send(1, s, next, bytes, hops(s, next)?);
        for &(d, id) in routes {
            if d == next {
                ex.delivered[d].insert((s, id));
            } else {
                forwards.entry((next, d)).or_default().insert((s, id), items[&id]);
            }
        }
    }
    for ((relay, d), items) in forwards {
        ex.send(2, relay, d, items.values().sum(), hops(relay, d)?);
        ex.delivered[d].extend(items.keys().copied());
    }
    Ok(ex.finish())
}

/// The `(source, item)` pairs each rank should receive.
pub fn required_deliveries(nranks: usize, demands: &[Demand]) -> Vec<BTreeSet<(usize, u64)>> {
    let mut out = vec![BTreeSet::new(); nranks];
    for d in demands.iter().filter(|d| d.src != d.dst) {
        out[d.dst].extend(d.items.iter().map(|i| (d.src, i.id)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(_: usize, _: usize) -> Result<u32> {
        Ok(1)
    }

    fn full(n: usize, bytes: u64) -> Vec<Demand> {
        demands_from_sizes(&vec![vec![bytes; n]; n])
    }

    #[test]
    fn two_ranks_swap() {
        let g = CommGraph::grid(1, 2).unwrap();
        let ex = hsdx_exchange(&g, &full(2, 10), unit).unwrap();
        assert_eq!(ex.stats.messages, 2);
        assert_eq!(ex.stats.bytes, 20);
        let one = CommGraph::grid(1, 1).unwrap();
        assert_eq!(hsdx_exchange(&one, &[], unit).unwrap().stats.messages, 0);
    }

    #[test]
    fn baseline_message_count() {
        let ex = alltoall_baseline(6, &[], unit).unwrap();
        assert_eq!(ex.stats.messages, 30);
    }

    #[test]
    fn grid_routes_through_destination_group() {
        let g = CommGraph::grid(3, 4).unwrap();
        assert_eq!(g.neighbours(0), vec![1, 2, 3, 4, 8]);
        assert_eq!(g.relay(0, 5).unwrap(), Some(4));
        assert_eq!(g.relay(0, 4).unwrap(), None);
        let ex = hsdx_exchange(&g, &full(12, 5), unit).unwrap();
        assert_eq!(ex.delivered, required_deliveries(12, &full(12, 5)));
    }

    #[test]
    fn shared_items_are_sent_once_to_the_relay() {
        let g = CommGraph::grid(2, 3).unwrap();
        let item = Item { id: 7, bytes: 1000 };
        let demands: Vec<Demand> = (3..6).map(|d| Demand { src: 0, dst: d, items: vec![item] }).collect();
        let ex = hsdx_exchange(&g, &demands, unit).unwrap();
        let first: Vec<_> = ex.trace.iter().filter(|t| t.stage == 1).collect();
        assert_eq!(first.len(), 1);
        assert_eq!(first[0].bytes, 1000 + 2 * ROUTE_ENTRY_BYTES);
        assert_eq!(ex.delivered, required_deliveries(6, &demands));
    }

    #[test]
    fn ragged_groups_still_route() {
        let g = CommGraph::from_groups(&[0, 0, 0, 1, 2, 2]).unwrap();
        let ex = hsdx_exchange(&g, &full(6, 3), unit).unwrap();
        assert_eq!(ex.delivered, required_deliveries(6, &full(6, 3)));
    }

    #[test]
    fn large_payloads_are_chunked() {
        let ex = alltoall_baseline(2, &demands_from_sizes(&[vec![0, 5 << 30], vec![0, 0]]), unit).unwrap();
        assert_eq!(ex.stats.messages, 3 + 1);
    }
}
