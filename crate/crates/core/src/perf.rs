//! Tracking-task performance model and scenario generation.
//!
//! Units: range in kilometers, speed in meters per second, dwell and
//! transmit durations in milliseconds, transmit power in kilowatts.
//!
//! The chain is `config -> snr -> track error -> utility`:
//!
//! * `snr = K * power * tx_duration / range^4`, with `K` calibrated so that a
//!   2 kW, 6 ms transmission at 50 km gives an SNR of 20.
//! * `track_error = (C_M / sqrt(snr)) * sqrt(1 + (speed * dwell / L)^2)`; the
//!   dwell length acts as the revisit period over which the target drifts.
//! * `utility = weight(type) / (1 + track_error / E0)`.

use serde::{Deserialize, Serialize};

use crate::error::{QramError, Result};
use crate::problem::Configuration;
use crate::rng::Prng;

/// SNR at the calibration point.
pub const SNR_REF: f64 = 20.0;
const REF_POWER_KW: f64 = 2.0;
const REF_TX_MS: f64 = 6.0;
const REF_RANGE_KM: f64 = 50.0;

/// Measurement error scale, meters.
pub const C_M: f64 = 100.0;
/// Drift length scale, meters.
pub const DRIFT_SCALE: f64 = 1000.0;
/// Track error at which utility halves, meters.
pub const E0: f64 = 50.0;

pub const RANGE_KM: (f64, f64) = (5.0, 150.0);
/// Normalization for the speed feature, m/s.
pub const MAX_SPEED: f64 = 1000.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TargetType {
    Helicopter,
    Fighter,
    Missile,
}

impl TargetType {
    pub const ALL: [TargetType; 3] = [TargetType::Helicopter, TargetType::Fighter, TargetType::Missile];

    pub fn index(self) -> usize {
        match self {
            TargetType::Helicopter => 0,
            TargetType::Fighter => 1,
            TargetType::Missile => 2,
        }
    }

    /// Utility weight, the ceiling of this type's task utility.
    pub fn weight(self) -> f64 {
        match self {
            TargetType::Helicopter => 1.0,
            TargetType::Fighter => 1.2,
            TargetType::Missile => 1.5,
        }
    }

    /// Speed generation interval in m/s.
    pub fn speed_interval(self) -> (f64, f64) {
        match self {
            TargetType::Helicopter => (0.0, 100.0),
            TargetType::Fighter => (100.0, 450.0),
            TargetType::Missile => (300.0, 1000.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub id: u32,
    pub ttype: TargetType,
    /// Kilometers.
    pub range: f64,
    /// Meters per second.
    pub speed: f64,
}

impl Target {
    /// Draws one target: type uniform over the three kinds, range uniform in
    /// [5, 150] km, speed uniform in the type's interval.
    pub fn sample(id: u32, rng: &mut Prng) -> Target {
        let ttype = TargetType::ALL[rng.below(3) as usize];
        let range = rng.uniform_in(RANGE_KM.0, RANGE_KM.1);
        let (lo, hi) = ttype.speed_interval();
        let speed = rng.uniform_in(lo, hi);
        Target { id, ttype, range, speed }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScenarioDoc", into = "ScenarioDoc")]
pub struct Scenario {
    pub targets: Vec<Target>,
    pub seed: u64,
}

pub const SCENARIO_FORMAT: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ScenarioDoc {
    format: u32,
    seed: u64,
    targets: Vec<Target>,
}

impl TryFrom<ScenarioDoc> for Scenario {
    type Error = QramError;

    fn try_from(doc: ScenarioDoc) -> Result<Self> {
        if doc.format != SCENARIO_FORMAT {
            return Err(QramError::argument(format!("unsupported scenario format {}", doc.format)));
        }
        Scenario::new(doc.targets, doc.seed)
    }
}

impl From<Scenario> for ScenarioDoc {
    fn from(s: Scenario) -> Self {
        ScenarioDoc { format: SCENARIO_FORMAT, seed: s.seed, targets: s.targets }
    }
}

impl Scenario {
    pub fn new(targets: Vec<Target>, seed: u64) -> Result<Self> {
        let mut ids: Vec<u32> = targets.iter().map(|t| t.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(QramError::argument("duplicate target id"));
        }
        if let Some(t) = targets.iter().find(|t| !(t.range > 0.0) || !(t.speed >= 0.0)) {
            return Err(QramError::argument(format!("target {} has invalid kinematics", t.id)));
        }
        Ok(Scenario { targets, seed })
    }

    pub fn target(&self, id: u32) -> Option<&Target> {
        self.targets.iter().find(|t| t.id == id)
    }
}

/// `n_targets` random targets with ids `0..n_targets`, reproducible per seed.
pub fn generate_scenario(n_targets: usize, seed: u64) -> Result<Scenario> {
    if n_targets == 0 {
        return Err(QramError::argument("a scenario needs at least one target"));
    }
    let mut rng = Prng::new(seed);
    let targets = (0..n_targets as u32).map(|id| Target::sample(id, &mut rng)).collect();
    Ok(Scenario { targets, seed })
}

/// Radar-equation constant in kW^-1 ms^-1 km^4.
pub fn snr_constant() -> f64 {
    let r2 = REF_RANGE_KM * REF_RANGE_KM;
    SNR_REF * r2 * r2 / (REF_POWER_KW * REF_TX_MS)
}

pub fn snr(config: &Configuration, target: &Target) -> f64 {
    let r2 = target.range * target.range;
    snr_constant() * config.transmit_power * config.transmit_duration / (r2 * r2)
}

/// Expected steady-state tracking error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityValue {
    /// Meters.
    pub track_error: f64,
}

pub fn quality(config: &Configuration, target: &Target) -> QualityValue {
    let sigma = C_M / snr(config, target).sqrt();
    let drift = target.speed * (config.dwell_length / 1000.0) / DRIFT_SCALE;
    QualityValue { track_error: sigma * (1.0 + drift * drift).sqrt() }
}

pub fn utility_from_quality(q: QualityValue, target: &Target) -> f64 {
    target.ttype.weight() / (1.0 + q.track_error / E0)
}

/// Utility of tracking `target` with `config`.
pub fn task_utility(config: &Configuration, target: &Target) -> f64 {
    utility_from_quality(quality(config, target), target)
}
