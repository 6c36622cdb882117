//! Communication/interference graphs, collection trees and per-node
//! traffic loads.
//!
//! Without link qualities the communication graph is a unit disk at the
//! communication range and the tree is shortest-hop. With link qualities
//! the usable links are exactly the pairs with a quality entry and the tree
//! minimizes expected transmissions (edge cost `1/quality`). Both builds
//! break ties toward the smallest node id, so results are deterministic.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use thiserror::Error;

use crate::NodeId;

pub type Adjacency = BTreeMap<NodeId, Vec<NodeId>>;

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("topology has no nodes")]
    Empty,
    #[error("sink {0} is not among the node positions")]
    SinkMissing(NodeId),
    #[error("interference range {interference} is smaller than communication range {comm}")]
    RangeOrder { comm: f64, interference: f64 },
    #[error("link quality for ({u},{v}) must be in (0,1], got {q}")]
    BadQuality { u: NodeId, v: NodeId, q: f64 },
    #[error("nodes unreachable from the sink: {}", format_ids(.0))]
    Unreachable(Vec<NodeId>),
    #[error("tx rate given for unknown node {0}")]
    UnknownNode(NodeId),
    #[error("missing tx rate for node {0}")]
    MissingRate(NodeId),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

fn format_ids(ids: &[NodeId]) -> String {
    ids.iter()
        .map(|n| n.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

/// Node positions plus radio ranges and optional link qualities.
#[derive(Debug, Clone)]
pub struct Topology {
    positions: BTreeMap<NodeId, (f64, f64)>,
    pub sink: NodeId,
    pub comm_range_m: f64,
    pub interference_range_m: f64,
    link_quality: Option<BTreeMap<(NodeId, NodeId), f64>>,
}

impl Topology {
    pub fn new(
        positions: BTreeMap<NodeId, (f64, f64)>,
        sink: NodeId,
        comm_range_m: f64,
        interference_range_m: f64,
    ) -> Result<Self, TopologyError> {
        if positions.is_empty() {
            return Err(TopologyError::Empty);
        }
        if !positions.contains_key(&sink) {
            return Err(TopologyError::SinkMissing(sink));
        }
        if interference_range_m < comm_range_m {
            return Err(TopologyError::RangeOrder {
                comm: comm_range_m,
                interference: interference_range_m,
            });
        }
        Ok(Topology {
            positions,
            sink,
            comm_range_m,
            interference_range_m,
            link_quality: None,
        })
    }

    /// Attaches delivery probabilities; keys are stored symmetrically.
    pub fn with_link_quality(
        mut self,
        entries: impl IntoIterator<Item = ((NodeId, NodeId), f64)>,
    ) -> Result<Self, TopologyError> {
        let mut map = BTreeMap::new();
        for ((u, v), q) in entries {
            if !(q > 0.0 && q <= 1.0) {
                return Err(TopologyError::BadQuality { u, v, q });
            }
            map.insert(edge_key(u, v), q);
        }
        self.link_quality = Some(map);
        Ok(self)
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.positions.keys().copied()
    }

    pub fn position(&self, n: NodeId) -> Option<(f64, f64)> {
        self.positions.get(&n).copied()
    }

    pub fn node_count(&self) -> usize {
        self.positions.len()
    }

    pub fn has_link_quality(&self) -> bool {
        self.link_quality.is_some()
    }

    pub fn quality(&self, u: NodeId, v: NodeId) -> Option<f64> {
        self.link_quality
            .as_ref()
            .and_then(|m| m.get(&edge_key(u, v)).copied())
    }

    /// Communication adjacency: quality entries when provided, otherwise the
    /// unit disk at the communication range.
    pub fn comm_adjacency(&self) -> Adjacency {
        match &self.link_quality {
            Some(map) => {
                let mut adj: Adjacency =
                    self.positions.keys().map(|&n| (n, Vec::new())).collect();
                for &(u, v) in map.keys() {
                    if self.positions.contains_key(&u) && self.positions.contains_key(&v) {
                        adj.get_mut(&u).unwrap().push(v);
                        adj.get_mut(&v).unwrap().push(u);
                    }
                }
                for list in adj.values_mut() {
                    list.sort();
                    list.dedup();
                }
                adj
            }
            None => disk_adjacency(&self.positions, self.comm_range_m),
        }
    }

    /// Interference adjacency, always positional. Kept for reporting; the
    /// energy model only consumes communication-range neighborhoods.
    pub fn interference_adjacency(&self) -> Adjacency {
        disk_adjacency(&self.positions, self.interference_range_m)
    }

    /// Renders the `node_id,x,y` CSV format with header comments.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# sink={}\n", self.sink));
        out.push_str(&format!("# comm_range_m={}\n", self.comm_range_m));
        out.push_str(&format!(
            "# interference_range_m={}\n",
            self.interference_range_m
        ));
        out.push_str("node_id,x,y\n");
        for (n, (x, y)) in &self.positions {
            out.push_str(&format!("{n},{x},{y}\n"));
        }
        out
    }
}

fn edge_key(u: NodeId, v: NodeId) -> (NodeId, NodeId) {
    if u <= v {
        (u, v)
    } else {
        (v, u)
    }
}

fn distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

fn disk_adjacency(positions: &BTreeMap<NodeId, (f64, f64)>, range: f64) -> Adjacency {
    let mut adj: Adjacency = positions.keys().map(|&n| (n, Vec::new())).collect();
    let nodes: Vec<(NodeId, (f64, f64))> = positions.iter().map(|(&n, &p)| (n, p)).collect();
    for i in 0..nodes.len() {
        for j in (i + 1)..nodes.len() {
            if distance(nodes[i].1, nodes[j].1) <= range {
                adj.get_mut(&nodes[i].0).unwrap().push(nodes[j].0);
                adj.get_mut(&nodes[j].0).unwrap().push(nodes[i].0);
            }
        }
    }
    adj
}

/// Builds the unit-disk communication and interference graphs directly from
/// positions.
pub fn unit_disk_graph(
    positions: &BTreeMap<NodeId, (f64, f64)>,
    comm_range: f64,
    interference_range: f64,
) -> Result<(Adjacency, Adjacency), TopologyError> {
    if positions.is_empty() {
        return Err(TopologyError::Empty);
    }
    Ok((
        disk_adjacency(positions, comm_range),
        disk_adjacency(positions, interference_range),
    ))
}

/// Routing tree toward the sink.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CollectionTree {
    /// Uplink parent per node; the sink has none.
    pub parent: BTreeMap<NodeId, NodeId>,
    /// Hop count to the sink; 0 for the sink itself.
    pub depth: BTreeMap<NodeId, u32>,
    /// Strict descendant count per node.
    pub subtree_size: BTreeMap<NodeId, usize>,
}

impl CollectionTree {
    pub fn max_depth(&self) -> u32 {
        self.depth.values().copied().max().unwrap_or(0)
    }

    pub fn children(&self, n: NodeId) -> Vec<NodeId> {
        self.parent
            .iter()
            .filter_map(|(&c, &p)| (p == n).then_some(c))
            .collect()
    }

    /// Depth histogram as (depth, node count), sorted by depth.
    pub fn depth_histogram(&self) -> Vec<(u32, usize)> {
        let mut hist: BTreeMap<u32, usize> = BTreeMap::new();
        for &d in self.depth.values() {
            *hist.entry(d).or_default() += 1;
        }
        hist.into_iter().collect()
    }
}

/// Builds the collection tree: shortest-hop BFS without link qualities,
/// minimum expected-transmissions (Dijkstra over cost `1/quality`) with
/// them. Parent ties go to the smallest node id.
pub fn build_tree(topo: &Topology) -> Result<CollectionTree, TopologyError> {
    let adj = topo.comm_adjacency();
    let (depth, cost) = if topo.has_link_quality() {
        dijkstra_etx(topo, &adj)
    } else {
        (bfs_depths(topo.sink, &adj), None)
    };

    let unreachable: Vec<NodeId> = topo
        .node_ids()
        .filter(|n| !depth.contains_key(n))
        .collect();
    if !unreachable.is_empty() {
        return Err(TopologyError::Unreachable(unreachable));
    }

    let mut parent = BTreeMap::new();
    for n in topo.node_ids() {
        if n == topo.sink {
            continue;
        }
        // smallest-id neighbor on an optimal path; adjacency lists are sorted
        let best = adj[&n]
            .iter()
            .find(|&&u| match &cost {
                Some(c) => c[&u] + 1.0 / topo.quality(u, n).unwrap_or(1.0) == c[&n],
                None => depth[&u] + 1 == depth[&n],
            })
            .copied()
            .expect("reachable node has an optimal predecessor");
        parent.insert(n, best);
    }

    let mut subtree_size: BTreeMap<NodeId, usize> = topo.node_ids().map(|n| (n, 0)).collect();
    for &child in parent.keys() {
        let mut cur = child;
        while let Some(&p) = parent.get(&cur) {
            *subtree_size.get_mut(&p).unwrap() += 1;
            cur = p;
        }
    }

    // with ETX costs the tree depth is the hop count along chosen parents
    let mut hop_depth: BTreeMap<NodeId, u32> = BTreeMap::new();
    hop_depth.insert(topo.sink, 0);
    let mut pending: Vec<NodeId> = parent.keys().copied().collect();
    while !pending.is_empty() {
        pending.retain(|&n| {
            if let Some(&d) = hop_depth.get(&parent[&n]) {
                hop_depth.insert(n, d + 1);
                false
            } else {
                true
            }
        });
    }

    Ok(CollectionTree {
        parent,
        depth: hop_depth,
        subtree_size,
    })
}

fn bfs_depths(sink: NodeId, adj: &Adjacency) -> BTreeMap<NodeId, u32> {
    let mut depth = BTreeMap::new();
    depth.insert(sink, 0u32);
    let mut queue = VecDeque::from([sink]);
    while let Some(n) = queue.pop_front() {
        let d = depth[&n];
        for &next in &adj[&n] {
            if let std::collections::btree_map::Entry::Vacant(e) = depth.entry(next) {
                e.insert(d + 1);
                queue.push_back(next);
            }
        }
    }
    depth
}

/// Dijkstra over expected transmissions; returns hop depths (recomputed by
/// the caller from parents) plus the cost map used for parent selection.
fn dijkstra_etx(
    topo: &Topology,
    adj: &Adjacency,
) -> (BTreeMap<NodeId, u32>, Option<BTreeMap<NodeId, f64>>) {
    let mut cost: BTreeMap<NodeId, f64> = BTreeMap::new();
    cost.insert(topo.sink, 0.0);
    let mut done: BTreeSet<NodeId> = BTreeSet::new();
    loop {
        // linear extraction keeps ordering fully deterministic; networks here
        // are tens of nodes
        let next = cost
            .iter()
            .filter(|(n, _)| !done.contains(n))
            .min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(b.0)))
            .map(|(&n, &c)| (n, c));
        let Some((n, c)) = next else { break };
        done.insert(n);
        for &next in &adj[&n] {
            let q = topo.quality(n, next).unwrap_or(1.0);
            let cand = c + 1.0 / q;
            let better = cost.get(&next).is_none_or(|&old| cand < old);
            if better {
                cost.insert(next, cand);
            }
        }
    }
    let depth = done.iter().map(|&n| (n, 0)).collect();
    (depth, Some(cost))
}

/// Per-node traffic rates in events per second.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeLoads {
    /// Packets this node itself produces.
    pub originated_per_s: f64,
    /// Packets relayed for strict descendants.
    pub forwarded_per_s: f64,
    /// Uplink transmissions of neighbors this node is not the parent of.
    pub overheard_per_s: f64,
    /// Receptions of packets this node must route (equals forwarded).
    pub intended_rx_per_s: f64,
    /// Expected link-level transmissions per logical packet on the uplink.
    pub link_tx_multiplier: f64,
}

impl NodeLoads {
    /// Link-level uplink transmission rate visible to neighbors.
    pub fn uplink_tx_per_s(&self) -> f64 {
        (self.originated_per_s + self.forwarded_per_s) * self.link_tx_multiplier
    }
}

/// Derives per-node loads from the tree and per-node packet rates. The sink
/// is mains-powered and excluded from the result.
pub fn node_loads(
    tree: &CollectionTree,
    topo: &Topology,
    per_node_tx_rate: &BTreeMap<NodeId, f64>,
) -> Result<BTreeMap<NodeId, NodeLoads>, TopologyError> {
    for &n in per_node_tx_rate.keys() {
        if topo.position(n).is_none() {
            return Err(TopologyError::UnknownNode(n));
        }
    }
    let rate_of = |n: NodeId| -> Result<f64, TopologyError> {
        per_node_tx_rate
            .get(&n)
            .copied()
            .ok_or(TopologyError::MissingRate(n))
    };

    let mut loads: BTreeMap<NodeId, NodeLoads> = BTreeMap::new();
    for n in topo.node_ids() {
        if n == topo.sink {
            continue;
        }
        let originated = rate_of(n)?;
        let multiplier = match tree.parent.get(&n) {
            Some(&p) => topo.quality(n, p).map_or(1.0, |q| 1.0 / q),
            None => 1.0,
        };
        loads.insert(
            n,
            NodeLoads {
                originated_per_s: originated,
                forwarded_per_s: 0.0,
                overheard_per_s: 0.0,
                intended_rx_per_s: 0.0,
                link_tx_multiplier: multiplier,
            },
        );
    }

    // forwarded: each node's own packets climb the parent chain
    for n in topo.node_ids() {
        if n == topo.sink {
            continue;
        }
        let originated = rate_of(n)?;
        let mut cur = n;
        while let Some(&p) = tree.parent.get(&cur) {
            if p != topo.sink {
                let entry = loads.get_mut(&p).unwrap();
                entry.forwarded_per_s += originated;
                entry.intended_rx_per_s += originated;
            }
            cur = p;
        }
    }

    // overheard: uplink transmissions of communication-range neighbors whose
    // parent is someone else
    let adj = topo.comm_adjacency();
    let uplink: BTreeMap<NodeId, f64> = loads
        .iter()
        .map(|(&n, l)| (n, l.uplink_tx_per_s()))
        .collect();
    for n in topo.node_ids() {
        if n == topo.sink {
            continue;
        }
        let mut overheard = 0.0;
        for &u in &adj[&n] {
            if u == topo.sink {
                continue;
            }
            if tree.parent.get(&u) == Some(&n) {
                continue; // we are the intended receiver
            }
            overheard += uplink.get(&u).copied().unwrap_or(0.0);
        }
        loads.get_mut(&n).unwrap().overheard_per_s = overheard;
    }

    Ok(loads)
}

/// Parses the topology CSV format: `# sink=`, `# comm_range_m=`,
/// `# interference_range_m=` header comments followed by `node_id,x,y`
/// records.
pub fn parse_topology(text: &str) -> Result<Topology, TopologyError> {
    let mut sink = None;
    let mut comm = None;
    let mut interference = None;
    let mut positions = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        let lineno = idx + 1;
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            if let Some((k, v)) = rest.split_once('=') {
                match k.trim() {
                    "sink" => {
                        sink = Some(v.trim().parse().map_err(|_| TopologyError::Parse {
                            line: lineno,
                            message: format!("bad sink id `{v}`"),
                        })?)
                    }
                    "comm_range_m" => {
                        comm = Some(v.trim().parse().map_err(|_| TopologyError::Parse {
                            line: lineno,
                            message: format!("bad comm range `{v}`"),
                        })?)
                    }
                    "interference_range_m" => {
                        interference =
                            Some(v.trim().parse().map_err(|_| TopologyError::Parse {
                                line: lineno,
                                message: format!("bad interference range `{v}`"),
                            })?)
                    }
                    _ => {}
                }
            }
            continue;
        }
        if line == "node_id,x,y" {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(TopologyError::Parse {
                line: lineno,
                message: format!("expected `node_id,x,y`, got `{line}`"),
            });
        }
        let id: NodeId = fields[0].parse().map_err(|_| TopologyError::Parse {
            line: lineno,
            message: format!("bad node id `{}`", fields[0]),
        })?;
        let x: f64 = fields[1].trim().parse().map_err(|_| TopologyError::Parse {
            line: lineno,
            message: format!("bad x `{}`", fields[1]),
        })?;
        let y: f64 = fields[2].trim().parse().map_err(|_| TopologyError::Parse {
            line: lineno,
            message: format!("bad y `{}`", fields[2]),
        })?;
        positions.insert(id, (x, y));
    }
    let sink = sink.ok_or(TopologyError::Parse {
        line: 0,
        message: "missing `# sink=` header".into(),
    })?;
    let comm = comm.ok_or(TopologyError::Parse {
        line: 0,
        message: "missing `# comm_range_m=` header".into(),
    })?;
    let interference = interference.unwrap_or(2.0 * comm);
    Topology::new(positions, sink, comm, interference)
}

/// One `(u, v) -> delivery probability` entry from a link-quality file.
pub type LinkQualityEntry = ((NodeId, NodeId), f64);

/// Parses the `u,v,quality` link CSV (optional header).
pub fn parse_link_quality(text: &str) -> Result<Vec<LinkQualityEntry>, TopologyError> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line == "u,v,quality" {
            continue;
        }
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(TopologyError::Parse {
                line: lineno,
                message: format!("expected `u,v,quality`, got `{line}`"),
            });
        }
        let u: NodeId = fields[0].parse().map_err(|_| TopologyError::Parse {
            line: lineno,
            message: format!("bad node id `{}`", fields[0]),
        })?;
        let v: NodeId = fields[1].parse().map_err(|_| TopologyError::Parse {
            line: lineno,
            message: format!("bad node id `{}`", fields[1]),
        })?;
        let q: f64 = fields[2].trim().parse().map_err(|_| TopologyError::Parse {
            line: lineno,
            message: format!("bad quality `{}`", fields[2]),
        })?;
        out.push(((u, v), q));
    }
    Ok(out)
}
