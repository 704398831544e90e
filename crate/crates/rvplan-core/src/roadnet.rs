//! Road-network graph for the ground vehicle: shortest-path distances,
//! point geometry, and positions along edges.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{euclidean, lerp, Point};

/// Slack allowed before a road edge shorter than the straight line between
/// its endpoints is reported (roads cannot beat the Euclidean distance).
pub const EDGE_LENGTH_TOLERANCE_M: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum RoadError {
    #[error("unknown road node id {0}")]
    UnknownNode(u32),
    #[error("duplicate road node id {0}")]
    DuplicateNode(u32),
    #[error("edge ({0}, {1}) has negative length {2}")]
    NegativeEdgeLength(u32, u32, f64),
    #[error("no road path between nodes {from} and {to}")]
    NoPath { from: u32, to: u32 },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RoadNode {
    pub id: u32,
    pub pos: Point,
}

#[derive(Debug, Clone, Copy)]
pub struct RoadEdge {
    /// Internal index of the first endpoint.
    pub u: usize,
    /// Internal index of the second endpoint.
    pub v: usize,
    pub length: f64,
}

/// A position along a road edge. Fraction is measured from endpoint `u`;
/// 0 and 1 coincide with the endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoutePosition {
    pub edge: usize,
    pub frac: f64,
}

/// Any place the ground vehicle can occupy on the network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RoadPoint {
    Node(usize),
    OnEdge(RoutePosition),
}

/// Undirected road graph. Read-only after construction; queries are safe
/// to run concurrently.
#[derive(Debug, Clone)]
pub struct RoadNetwork {
    nodes: Vec<RoadNode>,
    edges: Vec<RoadEdge>,
    /// Per node: (edge index, neighbor node index), in insertion order.
    adjacency: Vec<Vec<(usize, usize)>>,
    id_to_index: HashMap<u32, usize>,
    warnings: Vec<String>,
}

impl RoadNetwork {
    /// Builds the graph from `(id, x, y)` node records and `(u, v, length)`
    /// edge records keyed by node id. Edge lengths come from the mission
    /// file, not from geometry (roads curve); an edge shorter than the
    /// straight line is recorded as a warning, not an error.
    pub fn new(nodes: &[(u32, f64, f64)], edges: &[(u32, u32, f64)]) -> Result<Self, RoadError> {
        let mut id_to_index = HashMap::with_capacity(nodes.len());
        let mut node_list = Vec::with_capacity(nodes.len());
        for &(id, x, y) in nodes {
            if id_to_index.insert(id, node_list.len()).is_some() {
                return Err(RoadError::DuplicateNode(id));
            }
            node_list.push(RoadNode {
                id,
                pos: Point::new(x, y),
            });
        }

        let mut edge_list = Vec::with_capacity(edges.len());
        let mut adjacency = vec![Vec::new(); node_list.len()];
        let mut warnings = Vec::new();
        for &(uid, vid, length) in edges {
            let u = *id_to_index.get(&uid).ok_or(RoadError::UnknownNode(uid))?;
            let v = *id_to_index.get(&vid).ok_or(RoadError::UnknownNode(vid))?;
            if length < 0.0 {
                return Err(RoadError::NegativeEdgeLength(uid, vid, length));
            }
            let straight = euclidean(node_list[u].pos, node_list[v].pos);
            if length + EDGE_LENGTH_TOLERANCE_M < straight {
                warnings.push(format!(
                    "edge ({uid}, {vid}) length {length} m is shorter than the straight-line \
                     distance {straight:.6} m"
                ));
            }
            let edge_idx = edge_list.len();
            edge_list.push(RoadEdge { u, v, length });
            adjacency[u].push((edge_idx, v));
            adjacency[v].push((edge_idx, u));
        }

        Ok(RoadNetwork {
            nodes: node_list,
            edges: edge_list,
            adjacency,
            id_to_index,
            warnings,
        })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[RoadNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[RoadEdge] {
        &self.edges
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn index_of(&self, id: u32) -> Result<usize, RoadError> {
        self.id_to_index
            .get(&id)
            .copied()
            .ok_or(RoadError::UnknownNode(id))
    }

    pub fn node_pos(&self, index: usize) -> Point {
        self.nodes[index].pos
    }

    pub fn point_of(&self, place: RoadPoint) -> Point {
        match place {
            RoadPoint::Node(i) => self.nodes[i].pos,
            RoadPoint::OnEdge(rp) => {
                let e = self.edges[rp.edge];
                lerp(self.nodes[e.u].pos, self.nodes[e.v].pos, rp.frac)
            }
        }
    }

    /// Single-source shortest paths by node index. Returns per-node distance
    /// (infinity where unreachable) and predecessor (usize::MAX at the source
    /// and unreachable nodes). Equal-length paths resolve to the predecessor
    /// with the lowest node id.
    pub fn dijkstra(&self, source: usize) -> (Vec<f64>, Vec<usize>) {
        let n = self.nodes.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut pred = vec![usize::MAX; n];
        let mut settled = vec![false; n];
        dist[source] = 0.0;

        let mut heap = BinaryHeap::new();
        heap.push(HeapEntry {
            dist: 0.0,
            node: source,
        });
        while let Some(HeapEntry { dist: d, node }) = heap.pop() {
            if settled[node] {
                continue;
            }
            settled[node] = true;
            for &(edge_idx, neighbor) in &self.adjacency[node] {
                if settled[neighbor] {
                    continue;
                }
                let candidate = d + self.edges[edge_idx].length;
                if candidate < dist[neighbor] {
                    dist[neighbor] = candidate;
                    pred[neighbor] = node;
                    heap.push(HeapEntry {
                        dist: candidate,
                        node: neighbor,
                    });
                } else if candidate == dist[neighbor]
                    && pred[neighbor] != usize::MAX
                    && self.nodes[node].id < self.nodes[pred[neighbor]].id
                {
                    pred[neighbor] = node;
                }
            }
        }
        (dist, pred)
    }

    /// Shortest edge directly connecting two nodes, if any. Parallel edges
    /// resolve to the shortest one, then the lowest edge index.
    pub fn best_edge_between(&self, a: usize, b: usize) -> Option<usize> {
        let mut best: Option<usize> = None;
        for &(edge_idx, neighbor) in &self.adjacency[a] {
            if neighbor != b {
                continue;
            }
            match best {
                None => best = Some(edge_idx),
                Some(cur) if self.edges[edge_idx].length < self.edges[cur].length => {
                    best = Some(edge_idx)
                }
                _ => {}
            }
        }
        best
    }

    /// Shortest road distance between two nodes identified by their ids.
    pub fn shortest_path_length(&self, a: u32, b: u32) -> Result<f64, RoadError> {
        let ai = self.index_of(a)?;
        let bi = self.index_of(b)?;
        let (dist, _) = self.dijkstra(ai);
        if dist[bi].is_infinite() {
            return Err(RoadError::NoPath { from: a, to: b });
        }
        Ok(dist[bi])
    }
}

/// Min-heap entry ordered by distance, then node index for deterministic
/// settle order on ties.
struct HeapEntry {
    dist: f64,
    node: usize,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.dist == other.dist && self.node == other.node
    }
}
impl Eq for HeapEntry {}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// All-pairs shortest-path table, cached once per mission. Also keeps the
/// predecessor matrix so paths can be walked without re-running searches.
#[derive(Debug, Clone)]
pub struct RoadDistances {
    n: usize,
    dist: Vec<f64>,
    pred: Vec<usize>,
    pub disconnected: bool,
}

impl RoadDistances {
    pub fn build(net: &RoadNetwork) -> Self {
        let n = net.node_count();
        let per_source = crate::par::map_indices(n, |s| net.dijkstra(s));
        let mut dist = Vec::with_capacity(n * n);
        let mut pred = Vec::with_capacity(n * n);
        let mut disconnected = false;
        for (d, p) in per_source {
            disconnected |= d.iter().any(|x| x.is_infinite());
            dist.extend_from_slice(&d);
            pred.extend_from_slice(&p);
        }
        RoadDistances {
            n,
            dist,
            pred,
            disconnected,
        }
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.dist[a * self.n + b]
    }

    /// Node-index sequence of the shortest path from `a` to `b`, inclusive.
    pub fn path(&self, a: usize, b: usize) -> Option<Vec<usize>> {
        if self.get(a, b).is_infinite() {
            return None;
        }
        let mut path = vec![b];
        let mut cur = b;
        while cur != a {
            cur = self.pred[a * self.n + cur];
            path.push(cur);
        }
        path.reverse();
        Some(path)
    }

    /// Road distance from an arbitrary place to a node. Mid-edge positions
    /// may leave through either endpoint.
    pub fn place_to_node(&self, net: &RoadNetwork, from: RoadPoint, target: usize) -> f64 {
        match from {
            RoadPoint::Node(i) => self.get(i, target),
            RoadPoint::OnEdge(rp) => {
                let e = net.edges()[rp.edge];
                let via_u = rp.frac * e.length + self.get(e.u, target);
                let via_v = (1.0 - rp.frac) * e.length + self.get(e.v, target);
                via_u.min(via_v)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> RoadNetwork {
        // a=0, b=1, c=2 with lengths (a-b)=3, (b-c)=4, (a-c)=5; coordinates
        // scaled down so lengths stay >= Euclidean.
        RoadNetwork::new(
            &[(0, 0.0, 0.0), (1, 1.0, 0.0), (2, 1.0, 1.0)],
            &[(0, 1, 3.0), (1, 2, 4.0), (0, 2, 5.0)],
        )
        .unwrap()
    }

    #[test]
    fn triangle_direct_edge_wins() {
        let net = triangle();
        assert_eq!(net.shortest_path_length(0, 2).unwrap(), 5.0);
    }

    #[test]
    fn self_distance_zero() {
        let net = triangle();
        assert_eq!(net.shortest_path_length(0, 0).unwrap(), 0.0);
    }

    #[test]
    fn disconnected_components_report_no_path() {
        let net = RoadNetwork::new(
            &[(0, 0.0, 0.0), (1, 1.0, 0.0), (2, 10.0, 0.0), (3, 11.0, 0.0)],
            &[(0, 1, 1.0), (2, 3, 1.0)],
        )
        .unwrap();
        assert_eq!(
            net.shortest_path_length(0, 3),
            Err(RoadError::NoPath { from: 0, to: 3 })
        );
        let dist = RoadDistances::build(&net);
        assert!(dist.disconnected);
        assert!(dist.get(0, 3).is_infinite());
    }

    #[test]
    fn unknown_node_rejected() {
        let net = triangle();
        assert_eq!(
            net.shortest_path_length(0, 99),
            Err(RoadError::UnknownNode(99))
        );
    }

    #[test]
    fn path_graph_sums_lengths() {
        let net = RoadNetwork::new(
            &[(0, 0.0, 0.0), (1, 2.0, 0.0), (2, 5.0, 0.0)],
            &[(0, 1, 2.0), (1, 2, 3.0)],
        )
        .unwrap();
        let dist = RoadDistances::build(&net);
        assert_eq!(dist.get(0, 2), 5.0);
        assert_eq!(dist.path(0, 2).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn single_node_table() {
        let net = RoadNetwork::new(&[(7, 3.0, 3.0)], &[]).unwrap();
        let dist = RoadDistances::build(&net);
        assert_eq!(dist.get(0, 0), 0.0);
        assert!(!dist.disconnected);
    }

    #[test]
    fn all_pairs_matches_per_pair_queries() {
        let net = triangle();
        let dist = RoadDistances::build(&net);
        for a in 0..3u32 {
            for b in 0..3u32 {
                assert_eq!(
                    dist.get(a as usize, b as usize),
                    net.shortest_path_length(a, b).unwrap()
                );
            }
        }
    }

    #[test]
    fn short_edge_only_warns() {
        let net = RoadNetwork::new(
            &[(0, 0.0, 0.0), (1, 10.0, 0.0)],
            &[(0, 1, 4.0)], // straight line is 10 m
        )
        .unwrap();
        assert_eq!(net.warnings().len(), 1);
    }

    #[test]
    fn duplicate_node_rejected() {
        let err = RoadNetwork::new(&[(0, 0.0, 0.0), (0, 1.0, 0.0)], &[]).unwrap_err();
        assert_eq!(err, RoadError::DuplicateNode(0));
    }

    #[test]
    fn mid_edge_distance_uses_best_endpoint() {
        let net = RoadNetwork::new(
            &[(0, 0.0, 0.0), (1, 100.0, 0.0), (2, 200.0, 0.0)],
            &[(0, 1, 100.0), (1, 2, 100.0)],
        )
        .unwrap();
        let dist = RoadDistances::build(&net);
        let place = RoadPoint::OnEdge(RoutePosition { edge: 0, frac: 0.25 });
        // 25 m back to node 0, or 75 m forward to node 1.
        assert_eq!(dist.place_to_node(&net, place, 0), 25.0);
        assert_eq!(dist.place_to_node(&net, place, 2), 175.0);
    }

    proptest::proptest! {
        /// Random connected graphs: road metric obeys the triangle inequality
        /// and never beats the straight line when built from geometry.
        #[test]
        fn road_metric_properties(seed in 0u64..200) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(2usize..12);
            let mut nodes = Vec::new();
            for i in 0..n {
                nodes.push((i as u32, rng.random_range(-500.0..500.0), rng.random_range(-500.0..500.0)));
            }
            // Random spanning chain plus extra chords keeps it connected.
            let mut edges = Vec::new();
            for i in 1..n {
                let j = rng.random_range(0..i);
                let p = Point::new(nodes[i].1, nodes[i].2);
                let q = Point::new(nodes[j].1, nodes[j].2);
                let detour = 1.0 + rng.random_range(0.0..0.5);
                edges.push((i as u32, j as u32, euclidean(p, q) * detour));
            }
            for _ in 0..n / 2 {
                let i = rng.random_range(0..n);
                let j = rng.random_range(0..n);
                if i == j { continue; }
                let p = Point::new(nodes[i].1, nodes[i].2);
                let q = Point::new(nodes[j].1, nodes[j].2);
                edges.push((i as u32, j as u32, euclidean(p, q) * 1.2));
            }
            let net = RoadNetwork::new(&nodes, &edges).unwrap();
            proptest::prop_assert!(net.warnings().is_empty());
            let dist = RoadDistances::build(&net);
            proptest::prop_assert!(!dist.disconnected);
            for a in 0..n {
                proptest::prop_assert_eq!(dist.get(a, a), 0.0);
                for b in 0..n {
                    // Symmetry and the Euclidean lower bound.
                    proptest::prop_assert!((dist.get(a, b) - dist.get(b, a)).abs() < 1e-9);
                    let straight = euclidean(net.node_pos(a), net.node_pos(b));
                    proptest::prop_assert!(dist.get(a, b) >= straight - 1e-6);
                    for c in 0..n {
                        proptest::prop_assert!(
                            dist.get(a, b) + dist.get(b, c) >= dist.get(a, c) - 1e-9
                        );
                    }
                }
            }
        }
    }
}
