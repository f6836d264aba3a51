//! Physical network graph, topology files, link-length scaling and
//! k-shortest-path enumeration.
//!
//! Routes are totally ordered by `(length_km, hop count, link-id sequence)`.
//! Both Yen's algorithm and the Dijkstra spur search honour that order so the
//! output of [`Topology::k_shortest_paths`] is a deterministic prefix of the
//! sorted list of all simple paths.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Built-in 17-node, 26-link German reference network (reconstructed lengths).
pub const GERMAN17_JSON: &str = include_str!("../data/german17.json");

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub type LinkId = usize;

#[derive(Clone, Debug, PartialEq)]
pub struct Link {
    pub id: LinkId,
    pub a: NodeId,
    pub b: NodeId,
    pub length_km: f64,
}

impl Link {
    pub fn other(&self, n: NodeId) -> NodeId {
        if n == self.a {
            self.b
        } else {
            self.a
        }
    }
}

/// On-disk topology representation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TopologyFile {
    pub nodes: Vec<String>,
    pub links: Vec<LinkSpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LinkSpec {
    pub a: String,
    pub b: String,
    pub length_km: f64,
}

/// Undirected, connected, weighted fiber graph. Immutable once built.
#[derive(Clone, Debug)]
pub struct Topology {
    names: Vec<String>,
    links: Vec<Link>,
    adjacency: Vec<Vec<LinkId>>,
}

/// A simple path through the topology.
#[derive(Clone, Debug, PartialEq)]
pub struct Route {
    pub src: NodeId,
    pub dst: NodeId,
    pub links: Vec<LinkId>,
    pub nodes: Vec<NodeId>,
    pub length_km: f64,
}

impl Route {
    pub fn hops(&self) -> usize {
        self.links.len()
    }

    pub fn link_set(&self) -> BTreeSet<LinkId> {
        self.links.iter().copied().collect()
    }

    pub fn is_link_disjoint(&self, other: &Route) -> bool {
        self.links.iter().all(|l| !other.links.contains(l))
    }
}

/// The canonical route order: length, then hops, then link ids.
pub fn route_order(a: &Route, b: &Route) -> Ordering {
    a.length_km
        .total_cmp(&b.length_km)
        .then(a.links.len().cmp(&b.links.len()))
        .then_with(|| a.links.cmp(&b.links))
}

impl Topology {
    /// Builds a validated topology from node names and `(a, b, length_km)` triples.
    pub fn new(names: Vec<String>, links: Vec<(usize, usize, f64)>) -> Result<Self> {
        if names.len() < 2 {
            return Err(Error::TooFewNodes);
        }
        let mut seen = BTreeSet::new();
        let mut out = Vec::with_capacity(links.len());
        let mut adjacency = vec![Vec::new(); names.len()];
        for (id, &(a, b, length_km)) in links.iter().enumerate() {
            for n in [a, b] {
                if n >= names.len() {
                    return Err(Error::UnknownNode(n.to_string()));
                }
            }
            if a == b {
                return Err(Error::SelfLoop(names[a].clone()));
            }
            if !(length_km > 0.0) || !length_km.is_finite() {
                return Err(Error::NonPositiveLength {
                    a: names[a].clone(),
                    b: names[b].clone(),
                });
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return Err(Error::DuplicateLink {
                    a: names[a].clone(),
                    b: names[b].clone(),
                });
            }
            adjacency[a].push(id);
            adjacency[b].push(id);
            out.push(Link {
                id,
                a: NodeId(a),
                b: NodeId(b),
                length_km,
            });
        }
        let topo = Topology {
            names,
            links: out,
            adjacency,
        };
        if !topo.is_connected() {
            return Err(Error::Disconnected);
        }
        Ok(topo)
    }

    pub fn from_file_repr(file: &TopologyFile) -> Result<Self> {
        let index: HashMap<&str, usize> = file
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i))
            .collect();
        if index.len() != file.nodes.len() {
            return Err(Error::Parse("duplicate node name".into()));
        }
        let lookup = |name: &str| {
            index
                .get(name)
                .copied()
                .ok_or_else(|| Error::UnknownNode(name.to_string()))
        };
        let links = file
            .links
            .iter()
            .map(|l| Ok((lookup(&l.a)?, lookup(&l.b)?, l.length_km)))
            .collect::<Result<Vec<_>>>()?;
        Topology::new(file.nodes.clone(), links)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: TopologyFile =
            serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_file_repr(&file)
    }

    pub fn to_file_repr(&self) -> TopologyFile {
        TopologyFile {
            nodes: self.names.clone(),
            links: self
                .links
                .iter()
                .map(|l| LinkSpec {
                    a: self.names[l.a.0].clone(),
                    b: self.names[l.b.0].clone(),
                    length_km: l.length_km,
                })
                .collect(),
        }
    }

    pub fn german17() -> Self {
        Self::from_json_str(GERMAN17_JSON).expect("embedded German-17 topology is valid")
    }

    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        (0..self.names.len()).map(NodeId)
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn link(&self, id: LinkId) -> &Link {
        &self.links[id]
    }

    pub fn name(&self, n: NodeId) -> &str {
        &self.names[n.0]
    }

    pub fn node_by_name(&self, name: &str) -> Option<NodeId> {
        self.names.iter().position(|n| n == name).map(NodeId)
    }

    pub fn incident(&self, n: NodeId) -> &[LinkId] {
        &self.adjacency[n.0]
    }

    pub fn max_link_km(&self) -> f64 {
        self.links.iter().map(|l| l.length_km).fold(0.0, f64::max)
    }

    pub fn min_link_km(&self) -> f64 {
        self.links
            .iter()
            .map(|l| l.length_km)
            .fold(f64::INFINITY, f64::min)
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.names.len()];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(n) = stack.pop() {
            for &l in &self.adjacency[n] {
                let m = self.links[l].other(NodeId(n)).0;
                if !seen[m] {
                    seen[m] = true;
                    stack.push(m);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Multiplies every link length so the longest link becomes `target_max_km`.
    pub fn scale_link_lengths(&self, target_max_km: f64) -> Result<Topology> {
        if !(target_max_km > 0.0) || !target_max_km.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "target max link length must be positive, got {target_max_km}"
            )));
        }
        let current = self.max_link_km();
        let mut out = self.clone();
        if current == target_max_km {
            return Ok(out);
        }
        // l / max is exactly 1.0 for the longest link, so it lands on the target exactly.
        for l in &mut out.links {
            l.length_km = l.length_km / current * target_max_km;
        }
        Ok(out)
    }

    /// Builds a [`Route`] from a link sequence starting at `src`.
    pub fn route_from_links(&self, src: NodeId, links: &[LinkId]) -> Result<Route> {
        let mut nodes = vec![src];
        let mut at = src;
        let mut length_km = 0.0;
        for &l in links {
            let link = self
                .links
                .get(l)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown link {l}")))?;
            if link.a != at && link.b != at {
                return Err(Error::InvalidArgument(format!(
                    "link {l} does not continue the route at node {at}"
                )));
            }
            at = link.other(at);
            if nodes.contains(&at) {
                return Err(Error::InvalidArgument(format!("route revisits node {at}")));
            }
            nodes.push(at);
            length_km += link.length_km;
        }
        Ok(Route {
            src,
            dst: at,
            links: links.to_vec(),
            nodes,
            length_km,
        })
    }

    pub fn k_shortest_paths(&self, src: NodeId, dst: NodeId, k: usize) -> Result<Vec<Route>> {
        self.k_shortest_paths_excluding(src, dst, k, &BTreeSet::new())
    }

    /// Yen's algorithm on the graph with `excluded` links removed.
    pub fn k_shortest_paths_excluding(
        &self,
        src: NodeId,
        dst: NodeId,
        k: usize,
        excluded: &BTreeSet<LinkId>,
    ) -> Result<Vec<Route>> {
        if src.0 >= self.node_count() || dst.0 >= self.node_count() {
            return Err(Error::InvalidArgument("node outside topology".into()));
        }
        if src == dst {
            return Err(Error::InvalidArgument("source equals destination".into()));
        }
        if k == 0 {
            return Ok(Vec::new());
        }
        let no_nodes = vec![false; self.node_count()];
        let Some(first) = self.spur_path(src, dst, excluded, &BTreeSet::new(), &no_nodes) else {
            return Err(Error::NoPath(src, dst));
        };
        let mut found = vec![self.route_from_links(src, &first)?];
        let mut candidates: BinaryHeap<Candidate> = BinaryHeap::new();

        while found.len() < k {
            let prev = found.last().expect("non-empty").clone();
            for j in 0..prev.links.len() {
                let spur_node = prev.nodes[j];
                let root = &prev.links[..j];
                let banned_links: BTreeSet<LinkId> = found
                    .iter()
                    .filter(|p| p.links.len() > j && &p.links[..j] == root)
                    .map(|p| p.links[j])
                    .collect();
                let mut banned_nodes = no_nodes.clone();
                for n in &prev.nodes[..j] {
                    banned_nodes[n.0] = true;
                }
                if let Some(spur) =
                    self.spur_path(spur_node, dst, excluded, &banned_links, &banned_nodes)
                {
                    let mut links = root.to_vec();
                    links.extend(spur);
                    let route = self.route_from_links(src, &links)?;
                    if !found.iter().any(|p| p.links == route.links)
                        && !candidates.iter().any(|c| c.0.links == route.links)
                    {
                        candidates.push(Candidate(route));
                    }
                }
            }
            match candidates.pop() {
                Some(Candidate(next)) => found.push(next),
                None => break,
            }
        }
        Ok(found)
    }

    /// Dijkstra returning the minimal path under the canonical route order,
    /// avoiding `excluded` and `banned` links and `banned_nodes`.
    fn spur_path(
        &self,
        src: NodeId,
        dst: NodeId,
        excluded: &BTreeSet<LinkId>,
        banned: &BTreeSet<LinkId>,
        banned_nodes: &[bool],
    ) -> Option<Vec<LinkId>> {
        let mut best: Vec<Option<Label>> = vec![None; self.node_count()];
        let mut done = vec![false; self.node_count()];
        let mut heap = BinaryHeap::new();
        let start = Label {
            length: 0.0,
            links: Vec::new(),
            node: src,
        };
        best[src.0] = Some(start.clone());
        heap.push(std::cmp::Reverse(start));
        while let Some(std::cmp::Reverse(label)) = heap.pop() {
            let n = label.node;
            if done[n.0] {
                continue;
            }
            done[n.0] = true;
            if n == dst {
                return Some(label.links);
            }
            for &l in &self.adjacency[n.0] {
                if excluded.contains(&l) || banned.contains(&l) {
                    continue;
                }
                let m = self.links[l].other(n);
                if done[m.0] || banned_nodes[m.0] {
                    continue;
                }
                let mut links = label.links.clone();
                links.push(l);
                let next = Label {
                    length: label.length + self.links[l].length_km,
                    links,
                    node: m,
                };
                if best[m.0].as_ref().is_none_or(|b| next < *b) {
                    best[m.0] = Some(next.clone());
                    heap.push(std::cmp::Reverse(next));
                }
            }
        }
        None
    }
}

#[derive(Clone, Debug)]
struct Label {
    length: f64,
    links: Vec<LinkId>,
    node: NodeId,
}

impl PartialEq for Label {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Label {}
impl PartialOrd for Label {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Label {
    fn cmp(&self, other: &Self) -> Ordering {
        self.length
            .total_cmp(&other.length)
            .then(self.links.len().cmp(&other.links.len()))
            .then_with(|| self.links.cmp(&other.links))
            .then(self.node.cmp(&other.node))
    }
}

// Min-heap adapter: BinaryHeap pops the greatest, so the order is reversed.
struct Candidate(Route);

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        route_order(&self.0, &other.0) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        route_order(&other.0, &self.0)
    }
}

pub fn load_topology(path: impl AsRef<Path>) -> Result<Topology> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Topology::from_json_str(&text)
}
