//! Mission-file ingestion: a sectioned, human-editable TOML document holding
//! the road network, task routes, vehicle and energy parameters, and the
//! planner discretization. Parsing validates every cross-field invariant and
//! applies documented defaults for omitted stochastic sections.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::energy::{BatterySpec, EnergyModel, PowerCoefficients, StochasticParams};
use crate::geom::Point;
use crate::roadnet::{RoadError, RoadNetwork};

pub const MISSION_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum MissionError {
    #[error("failed to read mission file: {0}")]
    Io(#[from] std::io::Error),
    #[error("mission file parse error: {0}")]
    Parse(String),
    #[error("mission validation failed: {0}")]
    Validation(String),
    #[error(transparent)]
    Road(#[from] RoadError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleParams {
    /// Best-endurance airspeed, m/s (minimum power draw).
    pub v_be_ms: f64,
    /// Best-range airspeed, m/s (maximum distance per joule, faster).
    pub v_br_ms: f64,
    /// Ground-vehicle road speed, m/s.
    pub v_ugv_ms: f64,
    /// Constant rendezvous service time: landing, swap, takeoff. Seconds.
    pub recharge_s: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        VehicleParams {
            v_be_ms: 9.8,
            v_br_ms: 14.0,
            v_ugv_ms: 4.5,
            recharge_s: 300.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Discretization {
    /// Spacing of ground-vehicle state waypoints along its patrol loop, m.
    pub ugv_waypoint_spacing_m: f64,
    /// Monte-Carlo draws per leg when building transition distributions.
    pub energy_samples: u32,
    /// Master seed for all derived RNG streams.
    pub seed: u64,
}

impl Default for Discretization {
    fn default() -> Self {
        Discretization {
            ugv_waypoint_spacing_m: 50.0,
            energy_samples: 10_000,
            seed: 0,
        }
    }
}

fn default_schema() -> u32 {
    MISSION_SCHEMA_VERSION
}

/// The on-disk mission document. This struct round-trips through TOML
/// byte-for-byte-equivalently: `parse(write(m)) == m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionFile {
    #[serde(default = "default_schema")]
    pub schema: u32,
    #[serde(default)]
    pub vehicles: VehicleParams,
    #[serde(default)]
    pub battery: BatterySpec,
    /// Power polynomial coefficients b0..b5.
    #[serde(default)]
    pub energy: EnergySection,
    #[serde(default)]
    pub stochastic: StochasticParams,
    #[serde(default)]
    pub discretization: Discretization,
    pub risk: RiskSection,
    pub road: RoadSection,
    pub uav: UavSection,
    pub ugv: UgvSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergySection {
    pub coefficients: [f64; 6],
}

impl Default for EnergySection {
    fn default() -> Self {
        EnergySection {
            coefficients: PowerCoefficients::default().to_array(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskSection {
    /// Tolerated probability of running out of charge, in (0, 1].
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadSection {
    /// Node records `(id, x, y)`, meters.
    pub nodes: Vec<(u32, f64, f64)>,
    /// Edge records `(u, v, length)`, meters, undirected.
    pub edges: Vec<(u32, u32, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UavSection {
    /// Ordered task points the aircraft must visit.
    pub route: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UgvSection {
    /// Ordered road-node ids the ground vehicle patrols, cyclically.
    pub route: Vec<u32>,
    /// Road node the ground vehicle starts at. Defaults to the first
    /// route entry.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_node: Option<u32>,
}

/// A parsed and validated mission: the raw document plus resolved structures.
#[derive(Debug, Clone)]
pub struct MissionSpec {
    pub file: MissionFile,
    pub net: RoadNetwork,
    pub uav_route: Vec<Point>,
    /// Patrol task nodes as internal road indices.
    pub ugv_route: Vec<usize>,
    /// Internal road index where the ground vehicle starts.
    pub ugv_start_node: usize,
    /// Index into `ugv_route` of the task node it heads to first.
    pub ugv_first_task: usize,
    pub energy: EnergyModel,
}

impl MissionSpec {
    pub fn parse_str(text: &str) -> Result<Self, MissionError> {
        let file: MissionFile =
            toml::from_str(text).map_err(|e| MissionError::Parse(e.to_string()))?;
        Self::from_file(file)
    }

    pub fn load(path: &Path) -> Result<Self, MissionError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_str(&text)
    }

    pub fn from_file(file: MissionFile) -> Result<Self, MissionError> {
        if file.schema != MISSION_SCHEMA_VERSION {
            return Err(MissionError::Validation(format!(
                "unsupported schema version {} (expected {})",
                file.schema, MISSION_SCHEMA_VERSION
            )));
        }
        let v = &file.vehicles;
        if !(v.v_be_ms > 0.0 && v.v_br_ms > 0.0 && v.v_ugv_ms > 0.0) {
            return Err(MissionError::Validation(
                "all speeds must be strictly positive".into(),
            ));
        }
        if v.v_be_ms >= v.v_br_ms {
            return Err(MissionError::Validation(format!(
                "best-endurance speed {} must be below best-range speed {}",
                v.v_be_ms, v.v_br_ms
            )));
        }
        if v.recharge_s < 0.0 {
            return Err(MissionError::Validation("recharge time must be >= 0".into()));
        }
        if !(file.risk.delta > 0.0 && file.risk.delta <= 1.0) {
            return Err(MissionError::Validation(format!(
                "risk tolerance delta {} must lie in (0, 1]",
                file.risk.delta
            )));
        }
        if file.battery.capacity_j <= 0.0 {
            return Err(MissionError::Validation("battery capacity must be > 0".into()));
        }
        if file.battery.bin_count < 2 {
            return Err(MissionError::Validation("battery needs at least 2 SOC bins".into()));
        }
        if !(file.battery.initial_soc_pct > 0.0 && file.battery.initial_soc_pct <= 100.0) {
            return Err(MissionError::Validation(
                "initial SOC percentage must lie in (0, 100]".into(),
            ));
        }
        let st = &file.stochastic;
        if st.weight_std_kg < 0.0 || st.wind_scale_ms < 0.0 || st.wind_shape <= 0.0 {
            return Err(MissionError::Validation(
                "stochastic parameters out of range (stddev >= 0, scale >= 0, shape > 0)".into(),
            ));
        }
        let d = &file.discretization;
        if d.ugv_waypoint_spacing_m <= 0.0 {
            return Err(MissionError::Validation("waypoint spacing must be > 0".into()));
        }
        if d.energy_samples == 0 {
            return Err(MissionError::Validation("energy sample count must be >= 1".into()));
        }
        if file.uav.route.len() < 2 {
            return Err(MissionError::Validation(
                "aircraft route needs at least two points".into(),
            ));
        }
        if file.ugv.route.is_empty() {
            return Err(MissionError::Validation(
                "ground-vehicle route needs at least one node".into(),
            ));
        }

        let coefficients = PowerCoefficients::from_array(file.energy.coefficients);
        let v_hi = v.v_br_ms + 3.0 * st.wind_scale_ms;
        if !coefficients.positive_over(v.v_be_ms, v_hi, st.weight_mean_kg) {
            return Err(MissionError::Validation(format!(
                "power polynomial is not strictly positive over airspeeds [{}, {v_hi}] at mean weight",
                v.v_be_ms
            )));
        }

        let net = RoadNetwork::new(&file.road.nodes, &file.road.edges)?;
        let ugv_route: Vec<usize> = file
            .ugv
            .route
            .iter()
            .map(|&id| net.index_of(id))
            .collect::<Result<_, _>>()?;
        let start_id = file.ugv.start_node.unwrap_or(file.ugv.route[0]);
        let ugv_start_node = net.index_of(start_id)?;
        // If the start coincides with a task node, head for the one after it.
        let ugv_first_task = match ugv_route.iter().position(|&n| n == ugv_start_node) {
            Some(i) => (i + 1) % ugv_route.len(),
            None => 0,
        };

        let uav_route = file
            .uav
            .route
            .iter()
            .map(|&(x, y)| Point::new(x, y))
            .collect();
        let energy = EnergyModel {
            coefficients,
            stochastic: file.stochastic,
            battery: file.battery,
        };

        Ok(MissionSpec {
            file,
            net,
            uav_route,
            ugv_route,
            ugv_start_node,
            ugv_first_task,
            energy,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(&self.file).expect("mission file serialization cannot fail")
    }

    pub fn save(&self, path: &Path) -> Result<(), MissionError> {
        std::fs::write(path, self.to_toml_string())?;
        Ok(())
    }

    /// Content hash over the canonical serialized document, for provenance
    /// stamps in every derived artifact.
    pub fn hash_hex(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.to_toml_string().as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn delta(&self) -> f64 {
        self.file.risk.delta
    }

    pub fn vehicles(&self) -> &VehicleParams {
        &self.file.vehicles
    }

    pub fn discretization(&self) -> &Discretization {
        &self.file.discretization
    }

    /// Leg lengths along the aircraft task route.
    pub fn uav_leg_lengths(&self) -> Vec<f64> {
        self.uav_route
            .windows(2)
            .map(|w| crate::geom::euclidean(w[0], w[1]))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_toml() -> String {
        r#"
schema = 1

[risk]
delta = 0.1

[road]
nodes = [[0, 0.0, 0.0], [1, 1000.0, 0.0]]
edges = [[0, 1, 1000.0]]

[uav]
route = [[0.0, 100.0], [1000.0, 100.0]]

[ugv]
route = [0, 1]
"#
        .to_string()
    }

    #[test]
    fn defaults_mirror_reference_parameters() {
        let spec = MissionSpec::parse_str(&minimal_toml()).unwrap();
        assert_eq!(spec.vehicles().v_be_ms, 9.8);
        assert_eq!(spec.vehicles().v_br_ms, 14.0);
        assert_eq!(spec.vehicles().v_ugv_ms, 4.5);
        assert_eq!(spec.vehicles().recharge_s, 300.0);
        assert_eq!(spec.energy.battery.capacity_j, 240_000.0);
        assert_eq!(
            spec.energy.coefficients.to_array(),
            [-88.77, 3.53, -0.42, 0.043, 107.5, -2.74]
        );
        assert_eq!(spec.energy.stochastic.weight_mean_kg, 2.3);
        assert_eq!(spec.energy.stochastic.wind_scale_ms, 1.5);
        assert_eq!(spec.energy.stochastic.wind_shape, 3.0);
        assert_eq!(spec.discretization().energy_samples, 10_000);
    }

    #[test]
    fn speed_ordering_is_enforced() {
        let bad = minimal_toml() + "\n[vehicles]\nv_be_ms = 15.0\nv_br_ms = 14.0\nv_ugv_ms = 4.5\nrecharge_s = 300.0\n";
        let err = MissionSpec::parse_str(&bad).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("best-endurance"), "unexpected error: {msg}");
    }

    #[test]
    fn unknown_ugv_node_is_rejected() {
        let bad = minimal_toml().replace("route = [0, 1]", "route = [0, 9]");
        let err = MissionSpec::parse_str(&bad).unwrap_err();
        assert!(matches!(err, MissionError::Road(RoadError::UnknownNode(9))));
    }

    #[test]
    fn delta_range_is_enforced() {
        let bad = minimal_toml().replace("delta = 0.1", "delta = 0.0");
        assert!(MissionSpec::parse_str(&bad).is_err());
        let bad = minimal_toml().replace("delta = 0.1", "delta = 1.5");
        assert!(MissionSpec::parse_str(&bad).is_err());
    }

    #[test]
    fn round_trip_preserves_document() {
        let spec = MissionSpec::parse_str(&minimal_toml()).unwrap();
        let text = spec.to_toml_string();
        let reparsed = MissionSpec::parse_str(&text).unwrap();
        assert_eq!(spec.file, reparsed.file);
        assert_eq!(spec.hash_hex(), reparsed.hash_hex());
    }

    #[test]
    fn ugv_start_defaults_to_first_task() {
        let spec = MissionSpec::parse_str(&minimal_toml()).unwrap();
        assert_eq!(spec.ugv_start_node, 0);
        assert_eq!(spec.ugv_first_task, 1); // heading to route[1]
        let with_start = minimal_toml().replace("route = [0, 1]", "route = [0, 1]\nstart_node = 1");
        let spec = MissionSpec::parse_str(&with_start).unwrap();
        assert_eq!(spec.ugv_start_node, 1);
        assert_eq!(spec.ugv_first_task, 0); // wraps around
    }
}
