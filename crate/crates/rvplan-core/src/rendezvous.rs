//! Rendezvous-point selection: given both vehicle positions and the
//! aircraft's next task node, pick the road node that minimizes the detour
//! time. The meet time is set by whichever vehicle arrives later; the second
//! step is the flight back to the task route.

use thiserror::Error;

use crate::geom::{euclidean, Point};
use crate::roadnet::{RoadDistances, RoadNetwork, RoadPoint};

#[derive(Debug, Error, PartialEq)]
pub enum RendezvousError {
    #[error("ground vehicle cannot reach any road node from its position")]
    NoReachableNode,
}

/// A solved rendezvous: the chosen node plus the timing breakdown.
/// Recharge time is constant and added by the caller, so it never affects
/// which node wins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RendezvousPlan {
    /// Internal road-node index of the meeting point.
    pub node: usize,
    /// First-step meet time: max of the two arrival times, seconds.
    pub delta_s: f64,
    /// Ground-vehicle travel time to the node, seconds.
    pub ugv_time_s: f64,
    /// Aircraft distance to the node, meters.
    pub uav_first_leg_m: f64,
    /// Straight-line distance from the node to the next task point, meters.
    pub second_leg_m: f64,
    /// Flight time of the second step, seconds.
    pub second_leg_s: f64,
}

impl RendezvousPlan {
    /// The quantity minimized when picking the node.
    pub fn objective(&self) -> f64 {
        self.delta_s + self.second_leg_s
    }

    /// Full detour duration once the constant recharge time is known.
    pub fn total_detour_s(&self, recharge_s: f64) -> f64 {
        self.delta_s + recharge_s + self.second_leg_s
    }
}

fn plan_at(
    node: usize,
    uav_pos: Point,
    ugv_pos: RoadPoint,
    next_uav_node: Point,
    v_air: f64,
    v_ground: f64,
    net: &RoadNetwork,
    dist: &RoadDistances,
) -> Option<RendezvousPlan> {
    let ugv_m = dist.place_to_node(net, ugv_pos, node);
    if ugv_m.is_infinite() {
        return None;
    }
    let node_pos = net.node_pos(node);
    let uav_first_leg_m = euclidean(uav_pos, node_pos);
    let ugv_time_s = ugv_m / v_ground;
    let delta_s = ugv_time_s.max(uav_first_leg_m / v_air);
    let second_leg_m = euclidean(node_pos, next_uav_node);
    Some(RendezvousPlan {
        node,
        delta_s,
        ugv_time_s,
        uav_first_leg_m,
        second_leg_m,
        second_leg_s: second_leg_m / v_air,
    })
}

/// Scans every road node and returns the plan with the smallest detour
/// objective. Ties break toward the lowest node id.
pub fn solve_rendezvous(
    uav_pos: Point,
    ugv_pos: RoadPoint,
    next_uav_node: Point,
    v_air: f64,
    v_ground: f64,
    net: &RoadNetwork,
    dist: &RoadDistances,
) -> Result<RendezvousPlan, RendezvousError> {
    assert!(v_air > 0.0 && v_ground > 0.0);
    let mut best: Option<(RendezvousPlan, u32)> = None;
    for node in 0..net.node_count() {
        let Some(plan) = plan_at(node, uav_pos, ugv_pos, next_uav_node, v_air, v_ground, net, dist)
        else {
            continue;
        };
        let id = net.nodes()[node].id;
        let better = match &best {
            None => true,
            Some((cur, cur_id)) => {
                plan.objective() < cur.objective()
                    || (plan.objective() == cur.objective() && id < *cur_id)
            }
        };
        if better {
            best = Some((plan, id));
        }
    }
    best.map(|(p, _)| p).ok_or(RendezvousError::NoReachableNode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::roadnet::RoutePosition;

    /// Independent scan of the objective at every candidate, recomputed from
    /// raw geometry.
    fn brute_force(
        uav: Point,
        ugv: RoadPoint,
        next: Point,
        v_a: f64,
        v_g: f64,
        net: &RoadNetwork,
        dist: &RoadDistances,
    ) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        for node in 0..net.node_count() {
            let ugv_m = dist.place_to_node(net, ugv, node);
            if ugv_m.is_infinite() {
                continue;
            }
            let p = net.node_pos(node);
            let delta = (ugv_m / v_g).max(euclidean(uav, p) / v_a);
            let objective = delta + euclidean(p, next) / v_a;
            if objective < best.1 {
                best = (node, objective);
            }
        }
        best
    }

    fn line_net() -> (RoadNetwork, RoadDistances) {
        let net = RoadNetwork::new(
            &[(0, 0.0, 0.0), (1, 100.0, 0.0), (2, 200.0, 0.0)],
            &[(0, 1, 100.0), (1, 2, 100.0)],
        )
        .unwrap();
        let dist = RoadDistances::build(&net);
        (net, dist)
    }

    #[test]
    fn single_node_colocated() {
        let net = RoadNetwork::new(&[(0, 0.0, 0.0)], &[]).unwrap();
        let dist = RoadDistances::build(&net);
        let plan = solve_rendezvous(
            Point::new(0.0, 0.0),
            RoadPoint::Node(0),
            Point::new(140.0, 0.0),
            14.0,
            4.5,
            &net,
            &dist,
        )
        .unwrap();
        assert_eq!(plan.node, 0);
        assert_eq!(plan.delta_s, 0.0);
        assert!((plan.second_leg_s - 10.0).abs() < 1e-12);
        assert!((plan.total_detour_s(300.0) - 310.0).abs() < 1e-12);
    }

    #[test]
    fn line_matches_brute_force() {
        let (net, dist) = line_net();
        let uav = Point::new(100.0, 50.0);
        let next = Point::new(200.0, 50.0);
        let plan =
            solve_rendezvous(uav, RoadPoint::Node(0), next, 14.0, 4.5, &net, &dist).unwrap();
        let (node, objective) = brute_force(uav, RoadPoint::Node(0), next, 14.0, 4.5, &net, &dist);
        assert_eq!(plan.node, node);
        assert!((plan.objective() - objective).abs() < 1e-12);
        assert_eq!(
            plan.delta_s,
            plan.ugv_time_s.max(plan.uav_first_leg_m / 14.0)
        );
    }

    #[test]
    fn infinite_ground_speed_reduces_to_two_leg_flight() {
        let (net, dist) = line_net();
        let uav = Point::new(100.0, 50.0);
        let next = Point::new(200.0, 50.0);
        let plan =
            solve_rendezvous(uav, RoadPoint::Node(0), next, 14.0, 1e9, &net, &dist).unwrap();
        // With the ground term gone the best node minimizes the two flight legs.
        let mut best = (usize::MAX, f64::INFINITY);
        for node in 0..net.node_count() {
            let p = net.node_pos(node);
            let t = euclidean(uav, p) / 14.0 + euclidean(p, next) / 14.0;
            if t < best.1 {
                best = (node, t);
            }
        }
        assert_eq!(plan.node, best.0);
        assert!((plan.objective() - best.1).abs() < 1e-9);
    }

    #[test]
    fn unreachable_candidates_error() {
        // UGV stranded on an isolated component with no nodes of its own is
        // impossible, so model it as a mid-edge position in a component
        // disconnected from... every candidate is reachable there. Instead:
        // an empty-adjacency node pair where the UGV sits on the far side.
        let net = RoadNetwork::new(&[(0, 0.0, 0.0), (1, 500.0, 0.0)], &[]).unwrap();
        let dist = RoadDistances::build(&net);
        // From node 0 only node 0 is reachable; a plan still exists.
        let plan = solve_rendezvous(
            Point::new(0.0, 10.0),
            RoadPoint::Node(0),
            Point::new(0.0, 20.0),
            14.0,
            4.5,
            &net,
            &dist,
        )
        .unwrap();
        assert_eq!(plan.node, 0);
    }

    #[test]
    fn mid_edge_ugv_uses_best_exit() {
        let (net, dist) = line_net();
        let ugv = RoadPoint::OnEdge(RoutePosition { edge: 1, frac: 0.5 });
        let uav = Point::new(150.0, 10.0);
        let next = Point::new(0.0, 10.0);
        let plan = solve_rendezvous(uav, ugv, next, 14.0, 4.5, &net, &dist).unwrap();
        let (node, objective) = brute_force(uav, ugv, next, 14.0, 4.5, &net, &dist);
        assert_eq!(plan.node, node);
        assert!((plan.objective() - objective).abs() < 1e-12);
    }

    proptest::proptest! {
        /// On random connected networks the returned objective is never
        /// beaten by any candidate node, and relabeling node ids leaves the
        /// chosen geometry unchanged.
        #[test]
        fn optimal_and_label_invariant(seed in 0u64..150) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(2usize..30);
            let mut nodes = Vec::new();
            for i in 0..n {
                nodes.push((i as u32, rng.random_range(-1000.0..1000.0), rng.random_range(-1000.0..1000.0)));
            }
            let mut edges = Vec::new();
            for i in 1..n {
                let j = rng.random_range(0..i);
                let len = euclidean(
                    Point::new(nodes[i].1, nodes[i].2),
                    Point::new(nodes[j].1, nodes[j].2),
                ) * 1.3 + 1.0;
                edges.push((i as u32, j as u32, len));
            }
            let net = RoadNetwork::new(&nodes, &edges).unwrap();
            let dist = RoadDistances::build(&net);
            let uav = Point::new(rng.random_range(-1000.0..1000.0), rng.random_range(-1000.0..1000.0));
            let next = Point::new(rng.random_range(-1000.0..1000.0), rng.random_range(-1000.0..1000.0));
            let ugv = RoadPoint::Node(rng.random_range(0..n));
            let plan = solve_rendezvous(uav, ugv, next, 14.0, 4.5, &net, &dist).unwrap();
            for node in 0..n {
                let ugv_m = dist.place_to_node(&net, ugv, node);
                let p = net.node_pos(node);
                let objective = (ugv_m / 4.5).max(euclidean(uav, p) / 14.0)
                    + euclidean(p, next) / 14.0;
                proptest::prop_assert!(plan.objective() <= objective + 1e-9);
            }

            // Relabel ids in reverse; positions and edges unchanged.
            let relabeled: Vec<(u32, f64, f64)> = nodes
                .iter()
                .map(|&(id, x, y)| ((n as u32 - 1) - id, x, y))
                .collect();
            let redges: Vec<(u32, u32, f64)> = edges
                .iter()
                .map(|&(u, v, l)| ((n as u32 - 1) - u, (n as u32 - 1) - v, l))
                .collect();
            let net2 = RoadNetwork::new(&relabeled, &redges).unwrap();
            let dist2 = RoadDistances::build(&net2);
            let plan2 = solve_rendezvous(uav, ugv, next, 14.0, 4.5, &net2, &dist2).unwrap();
            proptest::prop_assert!((plan.objective() - plan2.objective()).abs() < 1e-9);
        }
    }
}
