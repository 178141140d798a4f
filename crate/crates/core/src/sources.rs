//! Pulsed SPDC source and the double-pass pumping geometry.
//!
//! Each pump pulse crosses the crystal twice: on the way in (pass 1, pair
//! `{0, 1}`) and after reflection from the mirror (pass 2, pair `{2, 3}`).
//! Each pass emits at most one EPR pair.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::elementary::{EsArena, EsId};
use crate::qcore::{bernoulli, PhotonId};

/// Time units are abstract; one unit is the pulse spacing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PumpPulse {
    pub pulse_id: u64,
    pub time: f64,
}

impl PumpPulse {
    /// Pulse `id` of a regular train.
    pub fn nth(id: u64) -> Self {
        PumpPulse {
            pulse_id: id,
            time: id as f64,
        }
    }
}

/// Where the photon's physical state lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EngineHandle {
    /// Label inside the trial's shared state vector.
    Qm(PhotonId),
    /// Entry in the trial's elementary-state arena.
    Es(EsId),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonRecord {
    pub photon_id: PhotonId,
    /// Last element the photon passed.
    pub path: &'static str,
    pub arrival_time: f64,
    pub handle: EngineHandle,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmissionEvent {
    /// 1 for the first crossing of the crystal, 2 after the mirror.
    pub pass_index: u8,
    pub pair: [PhotonRecord; 2],
    pub emission_time: f64,
}

impl EmissionEvent {
    pub fn photon(&self, id: PhotonId) -> Option<&PhotonRecord> {
        self.pair.iter().find(|p| p.photon_id == id)
    }
}

/// Something that can hold a freshly emitted EPR pair.
pub trait PairFactory {
    fn prepare_pair(&mut self, ids: [PhotonId; 2]) -> [EngineHandle; 2];
}

impl PairFactory for EsArena {
    fn prepare_pair(&mut self, _ids: [PhotonId; 2]) -> [EngineHandle; 2] {
        let (a, b) = self.prepare_epr_pair();
        [EngineHandle::Es(a), EngineHandle::Es(b)]
    }
}

fn jitter_sample<R: Rng + ?Sized>(jitter: f64, rng: &mut R) -> f64 {
    if jitter > 0.0 {
        Normal::new(0.0, jitter).expect("finite jitter").sample(rng)
    } else {
        0.0
    }
}

fn emit<F: PairFactory + ?Sized, R: Rng + ?Sized>(
    time: f64,
    pass_index: u8,
    p_pair: f64,
    jitter: f64,
    ids: [PhotonId; 2],
    factory: &mut F,
    rng: &mut R,
) -> Option<EmissionEvent> {
    if !bernoulli(rng, p_pair) {
        return None;
    }
    let emission_time = time + jitter_sample(jitter, rng);
    let handles = factory.prepare_pair(ids);
    let record = |i: usize| PhotonRecord {
        photon_id: ids[i],
        path: "crystal",
        arrival_time: emission_time,
        handle: handles[i],
    };
    Some(EmissionEvent {
        pass_index,
        pair: [record(0), record(1)],
        emission_time,
    })
}

/// One crossing of the crystal: with probability `p_pair` an EPR pair
/// labelled `ids`, emitted at the pulse time plus Gaussian jitter.
pub fn spdc_emit<F: PairFactory + ?Sized, R: Rng + ?Sized>(
    pulse: PumpPulse,
    p_pair: f64,
    jitter: f64,
    ids: [PhotonId; 2],
    factory: &mut F,
    rng: &mut R,
) -> Option<EmissionEvent> {
    emit(pulse.time, 1, p_pair, jitter, ids, factory, rng)
}

/// Both crossings of one pulse. Pass 2 is offset by `mirror_delay`; the two
/// draws are independent.
pub fn double_pass_emit<F: PairFactory + ?Sized, R: Rng + ?Sized>(
    pulse: PumpPulse,
    p_pair: f64,
    mirror_delay: f64,
    jitter: f64,
    factory: &mut F,
    rng: &mut R,
) -> (Option<EmissionEvent>, Option<EmissionEvent>) {
    let first = emit(
        pulse.time,
        1,
        p_pair,
        jitter,
        [PhotonId(0), PhotonId(1)],
        factory,
        rng,
    );
    let second = emit(
        pulse.time + mirror_delay,
        2,
        p_pair,
        jitter,
        [PhotonId(2), PhotonId(3)],
        factory,
        rng,
    );
    (first, second)
}
