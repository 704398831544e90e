//! Ground-vehicle patrol dynamics. The vehicle cycles through its task
//! nodes along shortest road paths at fixed speed; during a rendezvous it
//! deviates, then resumes toward the task node it was already heading to.
//!
//! The same continuous `advance` drives both the model build (followed by a
//! snap onto the waypoint set) and the Monte-Carlo simulator (un-snapped).

use crate::geom::{euclidean, Point};
use crate::roadnet::{RoadDistances, RoadNetwork, RoadPoint, RoutePosition};

/// Patrol context: the cyclic task-node list plus the road structures
/// needed to walk it.
pub struct UgvContext<'a> {
    pub net: &'a RoadNetwork,
    pub dist: &'a RoadDistances,
    pub tasks: &'a [usize],
    pub speed_ms: f64,
    cycle_len_m: f64,
}

impl<'a> UgvContext<'a> {
    pub fn new(
        net: &'a RoadNetwork,
        dist: &'a RoadDistances,
        tasks: &'a [usize],
        speed_ms: f64,
    ) -> Self {
        let cycle_len_m = if tasks.len() < 2 {
            0.0
        } else {
            (0..tasks.len())
                .map(|i| dist.get(tasks[i], tasks[(i + 1) % tasks.len()]))
                .sum()
        };
        UgvContext {
            net,
            dist,
            tasks,
            speed_ms,
            cycle_len_m,
        }
    }

    /// True when every patrol leg is road-reachable.
    pub fn connected(&self) -> bool {
        self.cycle_len_m.is_finite()
            && (0..self.tasks.len()).all(|i| {
                self.dist
                    .get(self.tasks[i], self.tasks[(i + 1) % self.tasks.len()])
                    .is_finite()
            })
    }

    /// Drives the vehicle for `dt` seconds from `place` while it is heading
    /// to `tasks[task_idx]`, following shortest road paths and rolling over
    /// to subsequent task nodes as they are reached. Returns the final
    /// position and the task index it is heading to afterwards.
    pub fn advance(&self, place: RoadPoint, task_idx: usize, dt: f64) -> (RoadPoint, usize) {
        assert!(dt >= 0.0 && self.speed_ms > 0.0);
        let mut place = place;
        let mut task = task_idx;
        let mut remaining_m = dt * self.speed_ms;
        let mut reduced = false;
        loop {
            let target = self.tasks[task];
            let to_target = self.dist.place_to_node(self.net, place, target);
            if remaining_m < to_target {
                return (self.walk_toward(place, target, remaining_m), task);
            }
            remaining_m -= to_target;
            place = RoadPoint::Node(target);
            task = (task + 1) % self.tasks.len();
            // Once on the cycle, collapse whole laps in one step.
            if !reduced {
                reduced = true;
                if self.cycle_len_m <= 0.0 {
                    return (place, task);
                }
                remaining_m %= self.cycle_len_m;
            }
        }
    }

    /// Moves `advance_m` meters from `place` along the shortest road path
    /// toward `target`. Caller guarantees `advance_m` is below the full
    /// distance.
    fn walk_toward(&self, place: RoadPoint, target: usize, advance_m: f64) -> RoadPoint {
        let mut remaining = advance_m;
        let start_node = match place {
            RoadPoint::Node(n) => n,
            RoadPoint::OnEdge(rp) => {
                let e = self.net.edges()[rp.edge];
                let via_u = rp.frac * e.length + self.dist.get(e.u, target);
                let via_v = (1.0 - rp.frac) * e.length + self.dist.get(e.v, target);
                // Matches the min() used for distances: ties exit through u.
                let (exit, along) = if via_u <= via_v {
                    (e.u, rp.frac * e.length)
                } else {
                    (e.v, (1.0 - rp.frac) * e.length)
                };
                if remaining < along {
                    let t = remaining / e.length;
                    let frac = if exit == e.u { rp.frac - t } else { rp.frac + t };
                    return RoadPoint::OnEdge(RoutePosition {
                        edge: rp.edge,
                        frac: frac.clamp(0.0, 1.0),
                    });
                }
                remaining -= along;
                exit
            }
        };

        let path = self
            .dist
            .path(start_node, target)
            .expect("walk_toward requires a reachable target");
        for pair in path.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let edge_idx = self
                .net
                .best_edge_between(a, b)
                .expect("shortest path uses existing edges");
            let e = self.net.edges()[edge_idx];
            if remaining < e.length {
                let t = remaining / e.length;
                let frac = if e.u == a { t } else { 1.0 - t };
                return RoadPoint::OnEdge(RoutePosition {
                    edge: edge_idx,
                    frac,
                });
            }
            remaining -= e.length;
        }
        RoadPoint::Node(target)
    }
}

/// The discrete position set used in model states: one entry per road node
/// followed by positions spaced along each patrol leg.
#[derive(Debug, Clone)]
pub struct Waypoints {
    pub places: Vec<RoadPoint>,
    pub coords: Vec<Point>,
}

impl Waypoints {
    pub fn build(
        net: &RoadNetwork,
        dist: &RoadDistances,
        tasks: &[usize],
        spacing_m: f64,
    ) -> Self {
        let mut places: Vec<RoadPoint> = (0..net.node_count()).map(RoadPoint::Node).collect();
        let mut seen_mid: Vec<(usize, f64)> = Vec::new();

        let legs = if tasks.len() < 2 { 0 } else { tasks.len() };
        for i in 0..legs {
            let (a, b) = (tasks[i], tasks[(i + 1) % tasks.len()]);
            let Some(path) = dist.path(a, b) else { continue };
            for pair in path.windows(2) {
                let Some(edge_idx) = net.best_edge_between(pair[0], pair[1]) else {
                    continue;
                };
                let e = net.edges()[edge_idx];
                if e.length <= 0.0 {
                    continue;
                }
                let mut s = spacing_m;
                while s < e.length {
                    let along = if e.u == pair[0] { s } else { e.length - s };
                    let frac = along / e.length;
                    let key = (edge_idx, (frac * 1e6).round() / 1e6);
                    if !seen_mid.contains(&key) {
                        seen_mid.push(key);
                        places.push(RoadPoint::OnEdge(RoutePosition {
                            edge: edge_idx,
                            frac,
                        }));
                    }
                    s += spacing_m;
                }
            }
        }

        let coords = places.iter().map(|&p| net.point_of(p)).collect();
        Waypoints { places, coords }
    }

    pub fn len(&self) -> usize {
        self.places.len()
    }

    pub fn is_empty(&self) -> bool {
        self.places.is_empty()
    }

    /// Nearest waypoint by straight-line distance; ties go to the lowest id.
    pub fn snap(&self, p: Point) -> usize {
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (i, &c) in self.coords.iter().enumerate() {
            let d = euclidean(p, c);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::roadnet::RoadNetwork;

    /// Square loop 0-1-2-3 with 100 m sides; patrol visits 0 -> 2 via 1.
    fn square() -> (RoadNetwork, RoadDistances) {
        let net = RoadNetwork::new(
            &[
                (0, 0.0, 0.0),
                (1, 100.0, 0.0),
                (2, 100.0, 100.0),
                (3, 0.0, 100.0),
            ],
            &[
                (0, 1, 100.0),
                (1, 2, 100.0),
                (2, 3, 100.0),
                (3, 0, 100.0),
            ],
        )
        .unwrap();
        let dist = RoadDistances::build(&net);
        (net, dist)
    }

    #[test]
    fn advance_partial_leg() {
        let (net, dist) = square();
        let tasks = [0usize, 2];
        let ctx = UgvContext::new(&net, &dist, &tasks, 5.0);
        // Heading to node 2 (200 m away): 10 s at 5 m/s covers 50 m.
        let (place, task) = ctx.advance(RoadPoint::Node(0), 1, 10.0);
        match place {
            RoadPoint::OnEdge(rp) => {
                assert_eq!(net.point_of(RoadPoint::OnEdge(rp)), Point::new(50.0, 0.0));
            }
            other => panic!("expected mid-edge, got {other:?}"),
        }
        assert_eq!(task, 1);
    }

    #[test]
    fn advance_rolls_over_task_nodes() {
        let (net, dist) = square();
        let tasks = [0usize, 2];
        let ctx = UgvContext::new(&net, &dist, &tasks, 5.0);
        // 200 m to node 2, then 100 m back toward node 0: 60 s covers 300 m,
        // ending exactly at a loop corner.
        let (place, task) = ctx.advance(RoadPoint::Node(0), 1, 60.0);
        let p = net.point_of(place);
        let corner_01 = Point::new(100.0, 0.0);
        let corner_03 = Point::new(0.0, 100.0);
        assert!(
            euclidean(p, corner_01) < 1e-9 || euclidean(p, corner_03) < 1e-9,
            "unexpected position {p:?}"
        );
        assert_eq!(task, 0);
    }

    #[test]
    fn advance_whole_laps_terminate() {
        let (net, dist) = square();
        let tasks = [0usize, 2];
        let ctx = UgvContext::new(&net, &dist, &tasks, 5.0);
        // Cycle is 400 m = 80 s; 1000 laps later it is still somewhere sane.
        let (place, task) = ctx.advance(RoadPoint::Node(0), 1, 80.0 * 1000.0 + 10.0);
        let p = net.point_of(place);
        assert!(p.x >= 0.0 && p.x <= 100.0 && p.y >= 0.0 && p.y <= 100.0);
        assert!(task < tasks.len());
    }

    #[test]
    fn single_task_node_is_static() {
        let (net, dist) = square();
        let tasks = [3usize];
        let ctx = UgvContext::new(&net, &dist, &tasks, 5.0);
        let (place, task) = ctx.advance(RoadPoint::Node(3), 0, 500.0);
        assert_eq!(place, RoadPoint::Node(3));
        assert_eq!(task, 0);
    }

    #[test]
    fn waypoints_cover_patrol_legs() {
        let (net, dist) = square();
        let tasks = [0usize, 2];
        let wp = Waypoints::build(&net, &dist, &tasks, 30.0);
        // 4 road nodes plus mid-edge samples on the two legs of the cycle.
        assert!(wp.len() > 4);
        // Snapping a point next to node 1 returns node 1's waypoint.
        assert_eq!(wp.snap(Point::new(101.0, -1.0)), 1);
    }

    #[test]
    fn snap_ties_break_low() {
        let (net, dist) = square();
        let wp = Waypoints::build(&net, &dist, &[0, 2], 1000.0);
        // Equidistant from nodes 0 and 1.
        assert_eq!(wp.snap(Point::new(50.0, 0.0)), 0);
    }
}
