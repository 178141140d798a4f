//! One-photon detectors and the coincidence circuit.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{check_probability, Error, Result};
use crate::qcore::bernoulli;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DetectorId {
    D0,
    DPlus0,
    DMinus0,
    D1,
    D2,
    DPlus3,
    DMinus3,
}

impl DetectorId {
    pub const ALL: [DetectorId; 7] = [
        DetectorId::D0,
        DetectorId::DPlus0,
        DetectorId::DMinus0,
        DetectorId::D1,
        DetectorId::D2,
        DetectorId::DPlus3,
        DetectorId::DMinus3,
    ];

    /// Lower-case name used in config keys (`d0`, `dplus3`, ...).
    pub fn key(self) -> &'static str {
        match self {
            DetectorId::D0 => "d0",
            DetectorId::DPlus0 => "dplus0",
            DetectorId::DMinus0 => "dminus0",
            DetectorId::D1 => "d1",
            DetectorId::D2 => "d2",
            DetectorId::DPlus3 => "dplus3",
            DetectorId::DMinus3 => "dminus3",
        }
    }
}

impl fmt::Display for DetectorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DetectorId::D0 => "D0",
            DetectorId::DPlus0 => "D+0",
            DetectorId::DMinus0 => "D-0",
            DetectorId::D1 => "D1",
            DetectorId::D2 => "D2",
            DetectorId::DPlus3 => "D+3",
            DetectorId::DMinus3 => "D-3",
        })
    }
}

impl FromStr for DetectorId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        DetectorId::ALL
            .into_iter()
            .find(|d| d.key() == lower || d.to_string().to_ascii_lowercase() == lower)
            .ok_or_else(|| Error::Invalid(format!("unknown detector `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorConfig {
    pub id: DetectorId,
    pub efficiency: f64,
    /// Expected dark counts per pulse slot.
    pub dark_rate: f64,
}

impl DetectorConfig {
    pub fn ideal(id: DetectorId) -> Self {
        DetectorConfig {
            id,
            efficiency: 1.0,
            dark_rate: 0.0,
        }
    }

    pub fn new(id: DetectorId, efficiency: f64, dark_rate: f64) -> Result<Self> {
        check_probability("efficiency", efficiency)?;
        if !(dark_rate >= 0.0 && dark_rate.is_finite()) {
            return Err(Error::Invalid(format!(
                "dark_rate must be finite and non-negative, got {dark_rate}"
            )));
        }
        Ok(DetectorConfig {
            id,
            efficiency,
            dark_rate,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionEvent {
    pub detector: DetectorId,
    pub time: f64,
    /// False for dark counts. Diagnostic only; matching ignores it.
    pub true_hit: bool,
}

/// A single photon arriving at `arrival.1` on detector `arrival.0`.
pub fn detect<R: Rng + ?Sized>(
    arrival: (DetectorId, f64),
    cfg: &DetectorConfig,
    rng: &mut R,
) -> Option<DetectionEvent> {
    bernoulli(rng, cfg.efficiency).then_some(DetectionEvent {
        detector: arrival.0,
        time: arrival.1,
        true_hit: true,
    })
}

/// Photons reaching one detector in the same pulse slot.
///
/// A threshold detector gives at most one click, at the earliest detected
/// arrival. A number-resolving detector clicks once per detected photon.
pub fn detect_burst<R: Rng + ?Sized>(
    arrivals: &[f64],
    cfg: &DetectorConfig,
    number_resolving: bool,
    rng: &mut R,
) -> Vec<DetectionEvent> {
    let hits = arrivals
        .iter()
        .filter_map(|&t| detect((cfg.id, t), cfg, rng));
    if number_resolving {
        hits.collect()
    } else {
        hits.min_by(|a, b| a.time.total_cmp(&b.time))
            .into_iter()
            .collect()
    }
}

/// Poisson number of spurious clicks spread uniformly over
/// `[start, start + n_slots)`.
pub fn dark_counts<R: Rng + ?Sized>(
    cfg: &DetectorConfig,
    start: f64,
    n_slots: u64,
    rng: &mut R,
) -> Vec<DetectionEvent> {
    let mean = cfg.dark_rate * n_slots as f64;
    if mean <= 0.0 {
        return Vec::new();
    }
    let n = Poisson::new(mean).expect("positive mean").sample(rng) as u64;
    (0..n)
        .map(|_| DetectionEvent {
            detector: cfg.id,
            time: start + rng.random::<f64>() * n_slots as f64,
            true_hit: false,
        })
        .collect()
}

/// Per-detector delay added to every event time before matching.
pub type Delays = BTreeMap<DetectorId, f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct CoincidenceRecord {
    pub pattern: Vec<DetectorId>,
    /// Pulse slot of the earliest member (raw time, rounded).
    pub pulse_id: i64,
    /// Raw member times, in pattern order.
    pub times: Vec<f64>,
    /// Indices into the matched event list, in pattern order.
    pub events: Vec<usize>,
}

/// Greedy chronological matching.
///
/// Events on pattern detectors are visited in order of delay-adjusted time.
/// Each unused event anchors a candidate record; every other pattern member
/// takes the earliest unused event on its detector within `window` after the
/// anchor. A complete candidate becomes a record, an incomplete anchor is
/// discarded. No event is used twice.
pub fn match_coincidences(
    events: &[DetectionEvent],
    pattern: &[DetectorId],
    window: f64,
    delays: &Delays,
) -> Result<Vec<CoincidenceRecord>> {
    if pattern.is_empty() {
        return Err(Error::EmptyPattern);
    }
    if !(window > 0.0 && window.is_finite()) {
        return Err(Error::BadWindow(window));
    }
    let adjusted =
        |i: usize| events[i].time + delays.get(&events[i].detector).copied().unwrap_or(0.0);
    let mut order: Vec<usize> = (0..events.len())
        .filter(|&i| pattern.contains(&events[i].detector))
        .collect();
    order.sort_by(|&a, &b| adjusted(a).total_cmp(&adjusted(b)).then(a.cmp(&b)));
    let mut used = vec![false; events.len()];
    let mut records = Vec::new();
    for (pos, &anchor) in order.iter().enumerate() {
        if used[anchor] {
            continue;
        }
        used[anchor] = true;
        let t0 = adjusted(anchor);
        let mut slots: Vec<Option<usize>> = vec![None; pattern.len()];
        let first = pattern
            .iter()
            .position(|&d| d == events[anchor].detector)
            .expect("filtered to pattern detectors");
        slots[first] = Some(anchor);
        let mut complete = true;
        for (k, &det) in pattern.iter().enumerate() {
            if slots[k].is_some() {
                continue;
            }
            let found = order[pos + 1..]
                .iter()
                .copied()
                .take_while(|&j| adjusted(j) <= t0 + window)
                .find(|&j| !used[j] && events[j].detector == det && !slots.contains(&Some(j)));
            match found {
                Some(j) => slots[k] = Some(j),
                None => {
                    complete = false;
                    break;
                }
            }
        }
        if !complete {
            continue;
        }
        let members: Vec<usize> = slots.into_iter().map(|s| s.expect("complete")).collect();
        for &m in &members {
            used[m] = true;
        }
        let times: Vec<f64> = members.iter().map(|&m| events[m].time).collect();
        let earliest = times.iter().copied().fold(f64::INFINITY, f64::min);
        records.push(CoincidenceRecord {
            pattern: pattern.to_vec(),
            pulse_id: earliest.round() as i64,
            times,
            events: members,
        });
    }
    Ok(records)
}

/// Expected rate (per unit time) of accidental `k`-fold coincidences between
/// independent Poisson streams with rates `rates` and window `window`, to
/// first order in `rate × window`.
pub fn accidental_rate(rates: &[f64], window: f64) -> f64 {
    let k = rates.len();
    if k == 0 {
        return 0.0;
    }
    k as f64 * window.powi(k as i32 - 1) * rates.iter().product::<f64>()
}
