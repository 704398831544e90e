//! Deterministic synthetic mission family for tests and benches: a grid
//! road network, a 12-point aircraft loop around it, and a three-node
//! ground patrol. Vehicle and energy parameters are the library defaults;
//! the geometry is sized so the route needs several recharges and the risk
//! tolerance genuinely shapes the policy.

use rand::Rng;

use crate::mission::{
    Discretization, EnergySection, MissionFile, MissionSpec, RiskSection, RoadSection, UavSection,
    UgvSection,
};

#[derive(Debug, Clone, Copy)]
pub struct BenchmarkParams {
    /// Aircraft task points around the ring.
    pub uav_nodes: usize,
    pub ring_rx_m: f64,
    pub ring_ry_m: f64,
    /// Relative radius jitter applied per point.
    pub jitter: f64,
    pub grid_nx: usize,
    pub grid_ny: usize,
    pub grid_spacing_m: f64,
    pub waypoint_spacing_m: f64,
    pub energy_samples: u32,
    pub soc_bins: u16,
    pub seed: u64,
    pub delta: f64,
}

impl Default for BenchmarkParams {
    fn default() -> Self {
        BenchmarkParams {
            uav_nodes: 12,
            ring_rx_m: 10_500.0,
            ring_ry_m: 8_000.0,
            jitter: 0.16,
            grid_nx: 7,
            grid_ny: 6,
            grid_spacing_m: 3_600.0,
            waypoint_spacing_m: 400.0,
            energy_samples: 10_000,
            soc_bins: 101,
            seed: 0,
            delta: 0.1,
        }
    }
}

impl BenchmarkParams {
    /// Smaller instance for fast unit tests.
    pub fn small() -> Self {
        BenchmarkParams {
            uav_nodes: 6,
            ring_rx_m: 6_000.0,
            ring_ry_m: 5_000.0,
            grid_nx: 4,
            grid_ny: 4,
            grid_spacing_m: 4_000.0,
            waypoint_spacing_m: 1_000.0,
            energy_samples: 2_000,
            ..Default::default()
        }
    }
}

/// Generates the mission document. Identical parameters always produce an
/// identical document.
pub fn generate(params: &BenchmarkParams) -> MissionFile {
    assert!(params.uav_nodes >= 2 && params.grid_nx >= 2 && params.grid_ny >= 2);
    let mut rng = crate::streams::stream(params.seed, 4242, params.uav_nodes as u64, 0);

    let mut nodes = Vec::new();
    for j in 0..params.grid_ny {
        for i in 0..params.grid_nx {
            let id = (j * params.grid_nx + i) as u32;
            nodes.push((
                id,
                i as f64 * params.grid_spacing_m,
                j as f64 * params.grid_spacing_m,
            ));
        }
    }
    let mut edges = Vec::new();
    for j in 0..params.grid_ny {
        for i in 0..params.grid_nx {
            let id = (j * params.grid_nx + i) as u32;
            if i + 1 < params.grid_nx {
                edges.push((id, id + 1, params.grid_spacing_m));
            }
            if j + 1 < params.grid_ny {
                edges.push((id, id + params.grid_nx as u32, params.grid_spacing_m));
            }
        }
    }

    let cx = (params.grid_nx - 1) as f64 * params.grid_spacing_m / 2.0;
    let cy = (params.grid_ny - 1) as f64 * params.grid_spacing_m / 2.0;

    let mut route = Vec::with_capacity(params.uav_nodes);
    for i in 0..params.uav_nodes {
        let theta = std::f64::consts::TAU * i as f64 / params.uav_nodes as f64
            + rng.random_range(-0.5..0.5) * std::f64::consts::TAU / params.uav_nodes as f64 * 0.5;
        let stretch = 1.0 + rng.random_range(-params.jitter..params.jitter);
        let x = cx + params.ring_rx_m * stretch * theta.cos();
        let y = cy + params.ring_ry_m * stretch * theta.sin();
        route.push(((x * 10.0).round() / 10.0, (y * 10.0).round() / 10.0));
    }

    // Ground patrol: the grid nodes nearest to three ring bearings.
    let nearest_node = |x: f64, y: f64| -> u32 {
        let mut best = 0u32;
        let mut best_d = f64::INFINITY;
        for &(id, nx, ny) in &nodes {
            let d = (nx - x).hypot(ny - y);
            if d < best_d {
                best_d = d;
                best = id;
            }
        }
        best
    };
    let mut patrol = Vec::new();
    for bearing_deg in [90.0f64, 210.0, 330.0] {
        let t = bearing_deg.to_radians();
        let id = nearest_node(
            cx + params.ring_rx_m * 0.55 * t.cos(),
            cy + params.ring_ry_m * 0.55 * t.sin(),
        );
        if !patrol.contains(&id) {
            patrol.push(id);
        }
    }

    MissionFile {
        schema: 1,
        vehicles: Default::default(),
        battery: crate::energy::BatterySpec {
            bin_count: params.soc_bins,
            ..Default::default()
        },
        energy: EnergySection::default(),
        stochastic: Default::default(),
        discretization: Discretization {
            ugv_waypoint_spacing_m: params.waypoint_spacing_m,
            energy_samples: params.energy_samples,
            seed: params.seed,
        },
        risk: RiskSection {
            delta: params.delta,
        },
        road: RoadSection { nodes, edges },
        uav: UavSection { route },
        ugv: UgvSection {
            route: patrol,
            start_node: None,
        },
    }
}

/// Generates and validates in one step.
pub fn benchmark_mission(params: &BenchmarkParams) -> MissionSpec {
    MissionSpec::from_file(generate(params)).expect("generated benchmark must validate")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_benchmark_validates_and_is_deterministic() {
        let a = generate(&BenchmarkParams::default());
        let b = generate(&BenchmarkParams::default());
        assert_eq!(a, b);
        let spec = MissionSpec::from_file(a).unwrap();
        assert_eq!(spec.uav_route.len(), 12);
        assert_eq!(spec.ugv_route.len(), 3);
        assert!(spec.net.warnings().is_empty());
        // Reference parameters flow through.
        assert_eq!(spec.vehicles().v_br_ms, 14.0);
        assert_eq!(spec.energy.battery.capacity_j, 240_000.0);
    }

    #[test]
    fn route_needs_multiple_charges() {
        let spec = benchmark_mission(&BenchmarkParams::default());
        let total: f64 = spec.uav_leg_lengths().iter().sum();
        // Full-battery range at best-range speed in calm air is about 21.6 km;
        // the route must span several charges to exercise the planner.
        let range_m = 240_000.0 / spec.energy.coefficients.power(14.0, 2.3) * 14.0;
        assert!(
            total / range_m > 2.0 && total / range_m < 4.5,
            "route takes {:.2} charges",
            total / range_m
        );
        for leg in spec.uav_leg_lengths() {
            assert!(leg > 1_000.0 && leg < 12_000.0, "leg {leg} m out of band");
        }
    }

    #[test]
    fn different_seeds_move_the_route() {
        let a = generate(&BenchmarkParams::default());
        let b = generate(&BenchmarkParams {
            seed: 1,
            ..Default::default()
        });
        assert_ne!(a.uav.route, b.uav.route);
        assert_eq!(a.road, b.road);
    }
}
