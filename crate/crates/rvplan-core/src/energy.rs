//! Stochastic power/energy model of the aircraft and its reduction to
//! discretized state-of-charge transition distributions per flight leg.
//!
//! Power is a polynomial in airspeed and vehicle weight. Airspeed is ground
//! speed plus the longitudinal component of a random wind; weight is normally
//! distributed. Per-leg energy draws map to SOC bins by flooring, so the
//! binned charge never overestimates the continuous charge.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rand::Rng;
use rand_distr::{Distribution, Normal, Weibull};
use serde::{Deserialize, Serialize};

use crate::streams::{self, DOMAIN_LEG_ENERGY};

/// Coefficients of the power polynomial, watts given airspeed in m/s and
/// weight in kg: `P = b0 + b1 v + b2 v^2 + b3 v^3 + b4 w + b5 v w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerCoefficients {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub b4: f64,
    pub b5: f64,
}

impl Default for PowerCoefficients {
    fn default() -> Self {
        PowerCoefficients {
            b0: -88.77,
            b1: 3.53,
            b2: -0.42,
            b3: 0.043,
            b4: 107.5,
            b5: -2.74,
        }
    }
}

impl PowerCoefficients {
    pub fn from_array(b: [f64; 6]) -> Self {
        PowerCoefficients {
            b0: b[0],
            b1: b[1],
            b2: b[2],
            b3: b[3],
            b4: b[4],
            b5: b[5],
        }
    }

    pub fn to_array(self) -> [f64; 6] {
        [self.b0, self.b1, self.b2, self.b3, self.b4, self.b5]
    }

    /// Unclamped polynomial value; may go negative outside the fitted range.
    pub fn power_raw(&self, v_inf: f64, weight_kg: f64) -> f64 {
        self.b0
            + self.b1 * v_inf
            + self.b2 * v_inf * v_inf
            + self.b3 * v_inf * v_inf * v_inf
            + self.b4 * weight_kg
            + self.b5 * v_inf * weight_kg
    }

    /// Power draw in watts, clamped below at zero to guard against
    /// extrapolating the cubic fit at low airspeeds.
    pub fn power(&self, v_inf: f64, weight_kg: f64) -> f64 {
        self.power_raw(v_inf, weight_kg).max(0.0)
    }

    /// Checks that the fit stays strictly positive over the airspeed range
    /// the planner will exercise, at the mean weight.
    pub fn positive_over(&self, v_lo: f64, v_hi: f64, weight_kg: f64) -> bool {
        let steps = 256;
        (0..=steps).all(|i| {
            let v = v_lo + (v_hi - v_lo) * i as f64 / steps as f64;
            self.power_raw(v, weight_kg) > 0.0
        })
    }
}

/// Sources of randomness in per-leg energy use: payload weight (normal) and
/// wind (Weibull speed, uniform heading). A scale of exactly zero disables
/// wind, and a zero stddev fixes the weight; both are used by degenerate
/// test missions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StochasticParams {
    pub weight_mean_kg: f64,
    pub weight_std_kg: f64,
    pub wind_scale_ms: f64,
    pub wind_shape: f64,
    /// When set, the simulator draws the weight once per trial instead of
    /// once per leg. Transition-model construction always draws per leg.
    #[serde(default)]
    pub weight_per_trial: bool,
}

impl Default for StochasticParams {
    fn default() -> Self {
        StochasticParams {
            weight_mean_kg: 2.3,
            weight_std_kg: 0.05,
            wind_scale_ms: 1.5,
            wind_shape: 3.0,
            weight_per_trial: false,
        }
    }
}

impl StochasticParams {
    /// Point-mass parameters: fixed weight, no wind.
    pub fn degenerate(weight_kg: f64) -> Self {
        StochasticParams {
            weight_mean_kg: weight_kg,
            weight_std_kg: 0.0,
            wind_scale_ms: 0.0,
            wind_shape: 3.0,
            weight_per_trial: false,
        }
    }

    pub fn sample_weight<R: Rng>(&self, rng: &mut R) -> f64 {
        if self.weight_std_kg == 0.0 {
            // Keep the draw so sequences stay aligned with the stochastic case.
            let _ = rng.random::<f64>();
            return self.weight_mean_kg;
        }
        let normal = Normal::new(self.weight_mean_kg, self.weight_std_kg)
            .expect("weight distribution parameters already validated");
        normal.sample(rng)
    }

    pub fn sample_wind<R: Rng>(&self, rng: &mut R) -> (f64, f64) {
        let heading_deg = rng.random_range(0.0..360.0);
        if self.wind_scale_ms == 0.0 {
            let _ = rng.random::<f64>();
            return (0.0, heading_deg);
        }
        let weibull = Weibull::new(self.wind_scale_ms, self.wind_shape)
            .expect("wind distribution parameters already validated");
        (weibull.sample(rng), heading_deg)
    }
}

/// Airspeed seen by the airframe: ground speed plus the longitudinal wind
/// component. `wind_heading_deg` is the wind heading relative to the ground
/// track.
pub fn airspeed(v_ground: f64, wind_speed: f64, wind_heading_deg: f64) -> f64 {
    (v_ground + wind_heading_deg.to_radians().cos() * wind_speed).abs()
}

/// Battery capacity and the uniform SOC discretization. Bin `k` of
/// `bin_count` levels stands for the charge fraction `k / (bin_count - 1)`;
/// the top bin is a full battery.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatterySpec {
    pub capacity_j: f64,
    pub bin_count: u16,
    /// Charge at mission start, percent of capacity.
    #[serde(default = "full_charge")]
    pub initial_soc_pct: f64,
}

fn full_charge() -> f64 {
    100.0
}

impl Default for BatterySpec {
    fn default() -> Self {
        BatterySpec {
            capacity_j: 240_000.0,
            bin_count: 101,
            initial_soc_pct: 100.0,
        }
    }
}

impl BatterySpec {
    pub fn top_bin(&self) -> u16 {
        self.bin_count - 1
    }

    /// Charge at mission start, joules.
    pub fn initial_energy_j(&self) -> f64 {
        self.capacity_j * self.initial_soc_pct / 100.0
    }

    /// SOC bin at mission start (floored, like every other binning).
    pub fn initial_bin(&self) -> u16 {
        self.bin_of_energy(self.initial_energy_j())
    }

    /// Energy available at a bin, joules.
    pub fn bin_energy(&self, bin: u16) -> f64 {
        self.capacity_j * bin as f64 / self.top_bin() as f64
    }

    /// Floors a continuous charge (joules) to its SOC bin.
    pub fn bin_of_energy(&self, joules: f64) -> u16 {
        let levels = self.top_bin() as f64;
        let value = (joules / self.capacity_j * levels).floor();
        value.clamp(0.0, levels) as u16
    }
}

/// One per-leg energy draw.
#[derive(Debug, Clone, Copy)]
pub struct LegDraw {
    pub joules: f64,
    /// True when the polynomial went negative and was clamped to 0 W.
    pub clamped: bool,
}

/// Empirical end-of-leg SOC distribution. Masses are keyed by bin, sorted
/// ascending; `failure` is the probability that the draw exceeds the charge
/// available at the start bin.
#[derive(Debug, Clone, PartialEq)]
pub struct SocDistribution {
    pub masses: Vec<(u16, f64)>,
    pub failure: f64,
    pub clamp_events: u64,
}

impl SocDistribution {
    pub fn total_mass(&self) -> f64 {
        self.failure + self.masses.iter().map(|&(_, m)| m).sum::<f64>()
    }

    /// Point mass on a single bin.
    pub fn point(bin: u16) -> Self {
        SocDistribution {
            masses: vec![(bin, 1.0)],
            failure: 0.0,
            clamp_events: 0,
        }
    }
}

/// Sorted per-leg energy draws for one (length, speed) pair. The same draw
/// set serves every start bin, which keeps one-step failure mass exactly
/// non-increasing in SOC.
#[derive(Debug, Clone)]
pub struct LegSamples {
    /// Ascending.
    pub energies_j: Vec<f64>,
    pub clamp_events: u64,
}

impl LegSamples {
    pub fn mean_j(&self) -> f64 {
        if self.energies_j.is_empty() {
            return 0.0;
        }
        self.energies_j.iter().sum::<f64>() / self.energies_j.len() as f64
    }
}

/// The full stochastic energy model of the aircraft.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyModel {
    pub coefficients: PowerCoefficients,
    pub stochastic: StochasticParams,
    pub battery: BatterySpec,
}

impl EnergyModel {
    /// Draws (weight, wind speed, wind heading) once and prices the leg.
    /// Zero-length legs cost nothing but still consume the draws.
    pub fn sample_leg_energy<R: Rng>(&self, length_m: f64, speed_ms: f64, rng: &mut R) -> LegDraw {
        let weight = self.stochastic.sample_weight(rng);
        let (wind, heading) = self.stochastic.sample_wind(rng);
        let v_inf = airspeed(speed_ms, wind, heading);
        let raw = self.coefficients.power_raw(v_inf, weight);
        let clamped = raw < 0.0;
        let watts = raw.max(0.0);
        LegDraw {
            joules: watts * (length_m / speed_ms),
            clamped,
        }
    }

    /// Builds the sorted draw set for a leg. The stream is keyed by the leg
    /// geometry so any worker reconstructs the identical set.
    pub fn leg_samples(&self, length_m: f64, speed_ms: f64, n: u32, master_seed: u64) -> LegSamples {
        let mut rng = streams::stream(
            master_seed,
            DOMAIN_LEG_ENERGY,
            length_m.to_bits(),
            speed_ms.to_bits(),
        );
        let mut energies = Vec::with_capacity(n as usize);
        let mut clamp_events = 0u64;
        for _ in 0..n {
            let draw = self.sample_leg_energy(length_m, speed_ms, &mut rng);
            if draw.clamped {
                clamp_events += 1;
            }
            energies.push(draw.joules);
        }
        energies.sort_by(f64::total_cmp);
        LegSamples {
            energies_j: energies,
            clamp_events,
        }
    }

    /// Maps a draw set to an end-SOC distribution from a given start bin.
    /// Draws above the available charge feed the failure mass; the rest land
    /// on `floor(start - spent)` bins.
    pub fn soc_distribution(&self, samples: &LegSamples, start_bin: u16) -> SocDistribution {
        let n = samples.energies_j.len();
        assert!(n > 0, "cannot build a distribution from zero samples");
        let available = self.battery.bin_energy(start_bin);
        let survivors = samples
            .energies_j
            .partition_point(|&e| e <= available);
        let levels = self.battery.top_bin() as f64;
        let per_sample = 1.0 / n as f64;

        // Energies are ascending, so end bins are non-increasing: runs of
        // equal bins collapse into one mass each.
        let mut masses: Vec<(u16, f64)> = Vec::new();
        for &e in &samples.energies_j[..survivors] {
            let value = (start_bin as f64 - e * levels / self.battery.capacity_j).floor();
            let bin = value.max(0.0) as u16;
            match masses.last_mut() {
                Some(last) if last.0 == bin => last.1 += per_sample,
                _ => masses.push((bin, per_sample)),
            }
        }
        masses.reverse(); // ascending bin order
        SocDistribution {
            masses,
            failure: (n - survivors) as f64 * per_sample,
            clamp_events: samples.clamp_events,
        }
    }

    /// One-call form: sample the leg `n` times and bin from `start_bin`.
    pub fn leg_soc_distribution(
        &self,
        length_m: f64,
        speed_ms: f64,
        start_bin: u16,
        n: u32,
        master_seed: u64,
    ) -> SocDistribution {
        let samples = self.leg_samples(length_m, speed_ms, n, master_seed);
        self.soc_distribution(&samples, start_bin)
    }
}

type LegKey = (u64, u64);

/// Memoizes draw sets and binned distributions per (length, speed) so the
/// model build prices each distinct leg once. Safe to share across workers;
/// values are pure functions of their keys, so racing inserts are benign.
pub struct TransitionSampler {
    pub model: EnergyModel,
    pub n_samples: u32,
    pub master_seed: u64,
    samples: Mutex<HashMap<LegKey, Arc<LegSamples>>>,
    distributions: Mutex<HashMap<(LegKey, u16), Arc<SocDistribution>>>,
}

impl TransitionSampler {
    pub fn new(model: EnergyModel, n_samples: u32, master_seed: u64) -> Self {
        TransitionSampler {
            model,
            n_samples,
            master_seed,
            samples: Mutex::new(HashMap::new()),
            distributions: Mutex::new(HashMap::new()),
        }
    }

    pub fn samples(&self, length_m: f64, speed_ms: f64) -> Arc<LegSamples> {
        let key = (length_m.to_bits(), speed_ms.to_bits());
        if let Some(hit) = self.samples.lock().unwrap().get(&key) {
            return Arc::clone(hit);
        }
        let built = Arc::new(
            self.model
                .leg_samples(length_m, speed_ms, self.n_samples, self.master_seed),
        );
        let mut map = self.samples.lock().unwrap();
        Arc::clone(map.entry(key).or_insert(built))
    }

    pub fn distribution(&self, length_m: f64, speed_ms: f64, start_bin: u16) -> Arc<SocDistribution> {
        let key = ((length_m.to_bits(), speed_ms.to_bits()), start_bin);
        if let Some(hit) = self.distributions.lock().unwrap().get(&key) {
            return Arc::clone(hit);
        }
        let samples = self.samples(length_m, speed_ms);
        let built = Arc::new(self.model.soc_distribution(&samples, start_bin));
        let mut map = self.distributions.lock().unwrap();
        Arc::clone(map.entry(key).or_insert(built))
    }

    /// Total clamp events across all cached draw sets.
    pub fn clamp_events(&self) -> u64 {
        self.samples
            .lock()
            .unwrap()
            .values()
            .map(|s| s.clamp_events)
            .sum()
    }
}
