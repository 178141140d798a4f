//! End-to-end protocols, each runnable under either engine.
//!
//! Pulse-driven runs split the pulse range into fixed blocks. Block `b` draws
//! from `ChaCha8Rng::seed_from_u64(seed)` on stream `b`, detection events are
//! matched inside the block, and block results are merged in block order.
//! The output therefore does not depend on the number of worker threads. A
//! coincidence whose members fall in two different blocks is not counted;
//! with the default jitter and window this needs a > 4σ timing excursion at
//! a block edge.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::detection::{
    dark_counts, detect_burst, match_coincidences, Delays, DetectionEvent, DetectorConfig,
    DetectorId,
};
use crate::elementary::{analyze_bell, EsArena};
use crate::engine::{EngineKind, EsWorld, QmWorld, World};
use crate::error::{check_probability, Error, Result};
use crate::optics::{path_delay, visibility, BeamSplitterOutcome, PbsBranch, PbsSetting, Port};
use crate::qcore::{
    apply_correction, bell_measure, bell_state, tensor, BellKind, PhotonId, Qubit, Spin, C64,
};
use crate::sources::{double_pass_emit, PumpPulse};

const P0: PhotonId = PhotonId(0);
const P1: PhotonId = PhotonId(1);
const P2: PhotonId = PhotonId(2);
const P3: PhotonId = PhotonId(3);

pub const GATE_FIG3: [DetectorId; 3] = [DetectorId::D0, DetectorId::D1, DetectorId::D2];
pub const PATTERN_MINUS: [DetectorId; 4] = [
    DetectorId::D0,
    DetectorId::D1,
    DetectorId::D2,
    DetectorId::DMinus3,
];
pub const PATTERN_PLUS: [DetectorId; 4] = [
    DetectorId::D0,
    DetectorId::D1,
    DetectorId::D2,
    DetectorId::DPlus3,
];
pub const GATE_SWAP: [DetectorId; 2] = [DetectorId::D1, DetectorId::D2];

/// Source, interference and detector parameters shared by all pulse-driven
/// experiments. Times are in pulse spacings.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicsConfig {
    /// Probability of a pair per crossing of the crystal.
    pub p_pair: f64,
    /// Standard deviation of the emission time.
    pub jitter: f64,
    /// Coherence time τ of the two-photon overlap.
    pub coherence_time: f64,
    /// Mirror round trip, also the length of photon 1's delay arm.
    pub round_trip: f64,
    /// Pair-quasispin deviation scale of the elementary-state engine.
    pub epsilon: f64,
    pub window: f64,
    pub detectors: BTreeMap<DetectorId, DetectorConfig>,
    pub delays: Delays,
    pub number_resolving: bool,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        PhysicsConfig {
            p_pair: 0.05,
            jitter: 0.1,
            coherence_time: 0.01,
            round_trip: 0.05,
            epsilon: 0.0,
            window: 0.5,
            detectors: DetectorId::ALL
                .map(|d| (d, DetectorConfig::ideal(d)))
                .into(),
            delays: Delays::new(),
            number_resolving: false,
        }
    }
}

impl PhysicsConfig {
    /// Defaults with perfect timing (no jitter).
    pub fn ideal() -> Self {
        PhysicsConfig {
            jitter: 0.0,
            ..PhysicsConfig::default()
        }
    }

    pub fn detector(&self, id: DetectorId) -> DetectorConfig {
        self.detectors
            .get(&id)
            .copied()
            .unwrap_or(DetectorConfig::ideal(id))
    }

    pub fn set_efficiency(&mut self, efficiency: f64) {
        for d in DetectorId::ALL {
            self.detectors
                .entry(d)
                .or_insert(DetectorConfig::ideal(d))
                .efficiency = efficiency;
        }
    }

    pub fn set_dark_rate(&mut self, dark_rate: f64) {
        for d in DetectorId::ALL {
            self.detectors
                .entry(d)
                .or_insert(DetectorConfig::ideal(d))
                .dark_rate = dark_rate;
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_probability("p_pair", self.p_pair)?;
        check_probability("epsilon", self.epsilon)?;
        let finite_nonneg = |name: &str, x: f64| {
            if x.is_finite() && x >= 0.0 {
                Ok(())
            } else {
                Err(Error::Invalid(format!(
                    "{name} must be finite and non-negative, got {x}"
                )))
            }
        };
        finite_nonneg("jitter", self.jitter)?;
        finite_nonneg("coherence_time", self.coherence_time)?;
        finite_nonneg("round_trip", self.round_trip)?;
        if !(self.window > 0.0 && self.window.is_finite()) {
            return Err(Error::BadWindow(self.window));
        }
        for cfg in self.detectors.values() {
            DetectorConfig::new(cfg.id, cfg.efficiency, cfg.dark_rate)?;
        }
        for (d, x) in &self.delays {
            if !x.is_finite() {
                return Err(Error::Invalid(format!(
                    "delay of {d} must be finite, got {x}"
                )));
            }
        }
        Ok(())
    }
}

/// Seed and thread count of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Runner {
    pub seed: u64,
    pub workers: usize,
    pub block_size: u64,
}

impl Runner {
    pub const DEFAULT_BLOCK: u64 = 4096;

    pub fn new(seed: u64) -> Self {
        Runner {
            seed,
            workers: 1,
            block_size: Self::DEFAULT_BLOCK,
        }
    }

    pub fn with_workers(self, workers: usize) -> Self {
        Runner {
            workers: workers.max(1),
            ..self
        }
    }

    /// Independent runner for the `k`-th point of a scan.
    pub fn child(&self, k: u64) -> Runner {
        let mut z = self.seed ^ k.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        Runner {
            seed: z ^ (z >> 31),
            ..*self
        }
    }

    fn blocks<T, F>(&self, n: u64, job: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(Range<u64>, &mut ChaCha8Rng) -> Result<T> + Sync,
    {
        let size = self.block_size.max(1);
        let count = n.div_ceil(size);
        let run = |b: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            rng.set_stream(b);
            job(b * size..((b + 1) * size).min(n), &mut rng)
        };
        if self.workers <= 1 {
            return (0..count).map(run).collect();
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| Error::Invalid(format!("cannot start worker pool: {e}")))?;
        pool.install(|| (0..count).into_par_iter().map(run).collect())
    }
}

/// Fate of each pump pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PulseTally {
    pub total: u64,
    /// Pulses with at least one gate coincidence.
    pub accepted: u64,
    /// Pulses that emitted something but produced no gate.
    pub rejected: u64,
    pub no_emission: u64,
}

impl PulseTally {
    fn add(&mut self, other: &PulseTally) {
        self.total += other.total;
        self.accepted += other.accepted;
        self.rejected += other.rejected;
        self.no_emission += other.no_emission;
    }

    pub fn is_conserved(&self) -> bool {
        self.accepted + self.rejected + self.no_emission == self.total
    }
}

fn tally(range: &Range<u64>, emitted: &[bool], gate_pulses: &BTreeSet<i64>) -> PulseTally {
    let mut t = PulseTally {
        total: range.end - range.start,
        ..PulseTally::default()
    };
    for (i, &e) in range.clone().zip(emitted) {
        if gate_pulses.contains(&(i as i64)) {
            t.accepted += 1;
        } else if e {
            t.rejected += 1;
        } else {
            t.no_emission += 1;
        }
    }
    t
}

/// Binomial standard error of `k / n`.
pub fn rate_se(k: u64, n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = k as f64 / n as f64;
    (p * (1.0 - p) / n as f64).sqrt()
}

fn ratio(k: u64, n: u64) -> f64 {
    if n == 0 {
        0.0
    } else {
        k as f64 / n as f64
    }
}

/// Photon arrivals of one block, turned into detector clicks.
struct Clicks<'a> {
    cfg: &'a PhysicsConfig,
    events: Vec<DetectionEvent>,
}

impl<'a> Clicks<'a> {
    fn new(cfg: &'a PhysicsConfig) -> Self {
        Clicks {
            cfg,
            events: Vec::new(),
        }
    }

    fn pulse<R: Rng + ?Sized>(&mut self, arrivals: &[(DetectorId, f64)], rng: &mut R) {
        for d in DetectorId::ALL {
            let times: Vec<f64> = arrivals.iter().filter(|a| a.0 == d).map(|a| a.1).collect();
            if !times.is_empty() {
                let cfg = self.cfg.detector(d);
                self.events
                    .extend(detect_burst(&times, &cfg, self.cfg.number_resolving, rng));
            }
        }
    }

    fn finish<R: Rng + ?Sized>(mut self, range: &Range<u64>, rng: &mut R) -> Vec<DetectionEvent> {
        for d in DetectorId::ALL {
            let cfg = self.cfg.detector(d);
            self.events.extend(dark_counts(
                &cfg,
                range.start as f64 - 0.5,
                range.end - range.start,
                rng,
            ));
        }
        self.events
    }
}

fn port_detector(port: Port) -> DetectorId {
    match port {
        Port::Up => DetectorId::D1,
        Port::Down => DetectorId::D2,
    }
}

fn random_port<R: Rng + ?Sized>(rng: &mut R) -> Port {
    if rng.random::<bool>() {
        Port::Up
    } else {
        Port::Down
    }
}

/// Shared front end of both four-photon experiments: emission, coder (if
/// any) and the simple beam splitter. Returns the arrivals at D1/D2 plus the
/// emission records of both passes.
fn front_end<W: World, R: Rng + ?Sized>(
    world: &mut W,
    pulse: PumpPulse,
    coder_angle: Option<f64>,
    delta: f64,
    cfg: &PhysicsConfig,
    arrivals: &mut Vec<(DetectorId, f64)>,
    rng: &mut R,
) -> Result<(Option<f64>, Option<f64>)> {
    let (first, second) = double_pass_emit(
        pulse,
        cfg.p_pair,
        cfg.round_trip + delta,
        cfg.jitter,
        world,
        rng,
    );
    let photon1 = first.map(|e| path_delay(e.pair[1], cfg.round_trip));
    let photon2 = second.map(|e| e.pair[0]);
    if let (Some(_), Some(angle)) = (photon1, coder_angle) {
        world.code(P1, angle, rng)?;
    }
    match (photon1, photon2) {
        (Some(a), Some(b)) => {
            let v = visibility(delta, cfg.coherence_time);
            let o: BeamSplitterOutcome = world.beam_splitter(P1, P2, true, v, rng)?;
            for rec in [a, b] {
                let port = o.port_of(rec.photon_id).expect("routed photon");
                arrivals.push((port_detector(port), rec.arrival_time));
            }
        }
        (Some(x), None) | (None, Some(x)) => {
            arrivals.push((port_detector(random_port(rng)), x.arrival_time));
        }
        (None, None) => {}
    }
    Ok((
        first.map(|e| e.pair[0].arrival_time),
        second.map(|e| e.pair[1].arrival_time),
    ))
}

/// Aggregate of a complete-analyzer teleportation run.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TeleportStats {
    /// Announced Bell outcomes, indexed by [`BellKind::index`].
    pub counts: [u64; 4],
    pub n_trials: u64,
    pub fidelity_sum: f64,
    pub min_fidelity: f64,
}

impl TeleportStats {
    pub fn count(&self, kind: BellKind) -> u64 {
        self.counts[kind.index()]
    }

    pub fn frequency(&self, kind: BellKind) -> f64 {
        ratio(self.count(kind), self.n_trials)
    }

    /// Mean fidelity of the corrected photon 3 with the input.
    pub fn post_correction_fidelity(&self) -> f64 {
        if self.n_trials == 0 {
            0.0
        } else {
            self.fidelity_sum / self.n_trials as f64
        }
    }

    fn merge(mut self, other: &TeleportStats) -> Self {
        for (a, b) in self.counts.iter_mut().zip(other.counts) {
            *a += b;
        }
        self.n_trials += other.n_trials;
        self.fidelity_sum += other.fidelity_sum;
        self.min_fidelity = self.min_fidelity.min(other.min_fidelity);
        self
    }

    fn record(&mut self, kind: BellKind, fidelity: f64) {
        self.counts[kind.index()] += 1;
        self.n_trials += 1;
        self.fidelity_sum += fidelity;
        self.min_fidelity = self.min_fidelity.min(fidelity);
    }
}

/// Ideal teleportation with a complete Bell analyzer: photon 1 carries
/// `α|+⟩ + β|−⟩`, photons 2-3 are an EPR pair, the analyzer outcome is sent
/// to photon 3 which is corrected and compared with the input.
///
/// The elementary-state engine needs a linear polarization (real amplitudes
/// up to a global phase).
pub fn run_teleport_ideal(
    alpha: C64,
    beta: C64,
    n: u64,
    engine: EngineKind,
    runner: &Runner,
) -> Result<TeleportStats> {
    let input = Qubit::new(alpha, beta)?;
    let empty = TeleportStats {
        min_fidelity: 1.0,
        ..TeleportStats::default()
    };
    let parts = match engine {
        EngineKind::StandardQm => {
            let joint = tensor(&input.to_state(P1), &bell_state(BellKind::PsiMinus, P2, P3))?;
            runner.blocks(n, |range, rng| {
                let mut s = empty;
                for _ in range {
                    let m = bell_measure(&joint, P1, P2, rng)?;
                    let q3 = m
                        .residual
                        .extract_qubit(P3)
                        .ok_or_else(|| Error::Invalid("photon 3 is not in a pure state".into()))?;
                    s.record(m.kind, announce(m.kind, &q3).fidelity(&input));
                }
                Ok(s)
            })?
        }
        EngineKind::ElementaryState => {
            let angle = input.linear_angle().ok_or(Error::NotLinearPolarization)?;
            runner.blocks(n, |range, rng| {
                let mut s = empty;
                for _ in range {
                    let mut arena = EsArena::new();
                    let one = arena.prepare_single(angle);
                    let (two, three) = arena.prepare_epr_pair();
                    let kind =
                        analyze_bell(&mut arena, one, two, rng).expect("photon 1 is prepared");
                    let q3 = arena
                        .class_state(three, rng)
                        .expect("photon 3 learned its class");
                    s.record(kind, announce(kind, &q3).fidelity(&input));
                }
                Ok(s)
            })?
        }
    };
    Ok(parts.iter().fold(empty, |acc, p| acc.merge(p)))
}

/// The receiving side: only the two classical bits and its own photon.
fn announce(kind: BellKind, photon3: &Qubit) -> Qubit {
    apply_correction(kind, photon3)
}

/// Counts of one run of the single-pair teleportation experiment.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Fig3Stats {
    pub coder_angle: f64,
    /// Mirror displacement away from simultaneous arrival at the beam splitter.
    pub mirror_delay: f64,
    pub visibility: f64,
    /// D0-D1-D2 coincidences.
    pub n_gates: u64,
    /// D0-D1-D2-D−3 coincidences.
    pub n_minus: u64,
    /// D0-D1-D2-D+3 coincidences.
    pub n_plus: u64,
    pub pulses: PulseTally,
}

impl Fig3Stats {
    pub fn minus_rate(&self) -> f64 {
        ratio(self.n_minus, self.n_gates)
    }

    pub fn plus_rate(&self) -> f64 {
        ratio(self.n_plus, self.n_gates)
    }

    pub fn minus_rate_se(&self) -> f64 {
        rate_se(self.n_minus, self.n_gates)
    }

    pub fn plus_rate_se(&self) -> f64 {
        rate_se(self.n_plus, self.n_gates)
    }

    fn merge(mut self, other: &Fig3Stats) -> Self {
        self.n_gates += other.n_gates;
        self.n_minus += other.n_minus;
        self.n_plus += other.n_plus;
        self.pulses.add(&other.pulses);
        self
    }
}

fn fig3_block<W: World>(
    range: Range<u64>,
    coder_angle: f64,
    delta: f64,
    cfg: &PhysicsConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Fig3Stats> {
    let setting = PbsSetting::new(coder_angle);
    let mut clicks = Clicks::new(cfg);
    let mut emitted = Vec::with_capacity((range.end - range.start) as usize);
    let mut arrivals = Vec::with_capacity(4);
    for i in range.clone() {
        let mut world = W::new(cfg.epsilon);
        arrivals.clear();
        let (t0, t3) = front_end(
            &mut world,
            PumpPulse::nth(i),
            Some(coder_angle),
            delta,
            cfg,
            &mut arrivals,
            rng,
        )?;
        if let Some(t) = t0 {
            arrivals.push((DetectorId::D0, t));
        }
        if let Some(t) = t3 {
            let d = match world.pbs(P3, setting, rng)? {
                PbsBranch::TransmitH => DetectorId::DPlus3,
                PbsBranch::ReflectV => DetectorId::DMinus3,
            };
            arrivals.push((d, t));
        }
        emitted.push(t0.is_some() || t3.is_some());
        clicks.pulse(&arrivals, rng);
    }
    let events = clicks.finish(&range, rng);
    let gates = match_coincidences(&events, &GATE_FIG3, cfg.window, &cfg.delays)?;
    let minus = match_coincidences(&events, &PATTERN_MINUS, cfg.window, &cfg.delays)?;
    let plus = match_coincidences(&events, &PATTERN_PLUS, cfg.window, &cfg.delays)?;
    let gate_pulses = gates.iter().map(|r| r.pulse_id).collect();
    Ok(Fig3Stats {
        coder_angle,
        mirror_delay: delta,
        visibility: visibility(delta, cfg.coherence_time),
        n_gates: gates.len() as u64,
        n_minus: minus.len() as u64,
        n_plus: plus.len() as u64,
        pulses: tally(&range, &emitted, &gate_pulses),
    })
}

/// The single-pair teleportation experiment: two passes of the pump, photon 1
/// through the coder at `coder_angle`, photons 1 and 2 on the beam splitter,
/// photon 3 on a PBS whose `+` output D+3 corresponds to the coder
/// polarization. `mirror_delay` shifts the second pair away from
/// simultaneous arrival.
pub fn run_fig3(
    coder_angle: f64,
    mirror_delay: f64,
    engine: EngineKind,
    cfg: &PhysicsConfig,
    n_pulses: u64,
    runner: &Runner,
) -> Result<Fig3Stats> {
    cfg.validate()?;
    let parts = match engine {
        EngineKind::StandardQm => runner.blocks(n_pulses, |r, rng| {
            fig3_block::<QmWorld>(r, coder_angle, mirror_delay, cfg, rng)
        })?,
        EngineKind::ElementaryState => runner.blocks(n_pulses, |r, rng| {
            fig3_block::<EsWorld>(r, coder_angle, mirror_delay, cfg, rng)
        })?,
    };
    let empty = Fig3Stats {
        coder_angle,
        mirror_delay,
        visibility: visibility(mirror_delay, cfg.coherence_time),
        ..Fig3Stats::default()
    };
    Ok(parts.iter().fold(empty, |acc, p| acc.merge(p)))
}

/// One [`run_fig3`] per mirror delay. Point `k` uses `runner.child(k)`.
pub fn scan_dip(
    coder_angle: f64,
    delays: &[f64],
    engine: EngineKind,
    cfg: &PhysicsConfig,
    n_pulses: u64,
    runner: &Runner,
) -> Result<Vec<Fig3Stats>> {
    if delays.is_empty() {
        return Err(Error::Invalid("delay list is empty".into()));
    }
    delays
        .iter()
        .enumerate()
        .map(|(k, &d)| {
            run_fig3(
                coder_angle,
                d,
                engine,
                cfg,
                n_pulses,
                &runner.child(k as u64),
            )
        })
        .collect()
}

/// The ratio `N−(45) / N−(90)` at matched totals `N− + N+`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoEstimate {
    /// `None` when the rescaled `N−(90)` is zero.
    pub rho: Option<f64>,
    pub standard_error: Option<f64>,
    pub n_minus_45: u64,
    pub n_plus_45: u64,
    pub n_minus_90: u64,
    pub n_plus_90: u64,
    /// Factor applied to the 90° counts so both totals agree.
    pub scale: f64,
}

impl RhoEstimate {
    pub fn is_defined(&self) -> bool {
        self.rho.is_some()
    }
}

pub fn compute_rho(stats45: &Fig3Stats, stats90: &Fig3Stats) -> Result<RhoEstimate> {
    let t45 = stats45.n_minus + stats45.n_plus;
    let t90 = stats90.n_minus + stats90.n_plus;
    if t45 == 0 || t90 == 0 {
        return Err(Error::Invalid(
            "both runs need at least one fourfold coincidence".into(),
        ));
    }
    let scale = t45 as f64 / t90 as f64;
    let mut est = RhoEstimate {
        rho: None,
        standard_error: None,
        n_minus_45: stats45.n_minus,
        n_plus_45: stats45.n_plus,
        n_minus_90: stats90.n_minus,
        n_plus_90: stats90.n_plus,
        scale,
    };
    if stats90.n_minus == 0 {
        return Ok(est);
    }
    let p45 = stats45.n_minus as f64 / t45 as f64;
    let p90 = stats90.n_minus as f64 / t90 as f64;
    let rho = p45 / p90;
    let var45 = p45 * (1.0 - p45) / t45 as f64;
    let var90 = p90 * (1.0 - p90) / t90 as f64;
    est.rho = Some(rho);
    est.standard_error = Some((var45 / (p90 * p90) + rho * rho * var90 / (p90 * p90)).sqrt());
    Ok(est)
}

/// Fourfold counts of the entanglement-swapping experiment.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SwapStats {
    pub theta0: f64,
    pub theta3: f64,
    /// `cells[i][j]`: photon 0 in branch `i`, photon 3 in branch `j`
    /// (0 = `+`, 1 = `−`).
    pub cells: [[u64; 2]; 2],
    /// D1-D2 coincidences.
    pub n_gates: u64,
    pub pulses: PulseTally,
}

fn spin_index(s: Spin) -> usize {
    match s {
        Spin::Plus => 0,
        Spin::Minus => 1,
    }
}

impl SwapStats {
    pub fn cell(&self, photon0: Spin, photon3: Spin) -> u64 {
        self.cells[spin_index(photon0)][spin_index(photon3)]
    }

    pub fn fourfold(&self) -> u64 {
        self.cells.iter().flatten().sum()
    }

    /// `(+,−)` and `(−,+)`.
    pub fn opposite(&self) -> u64 {
        self.cells[0][1] + self.cells[1][0]
    }

    /// `(+,+)` and `(−,−)`.
    pub fn same(&self) -> u64 {
        self.cells[0][0] + self.cells[1][1]
    }

    /// Depth of the extrema, `(opposite − same) / fourfold`.
    pub fn contrast(&self) -> f64 {
        let n = self.fourfold();
        if n == 0 {
            return 0.0;
        }
        (self.opposite() as f64 - self.same() as f64) / n as f64
    }

    pub fn contrast_se(&self) -> f64 {
        2.0 * rate_se(self.opposite(), self.fourfold())
    }

    pub fn min_cell(&self) -> u64 {
        self.cells.iter().flatten().copied().min().unwrap_or(0)
    }

    pub fn max_cell(&self) -> u64 {
        self.cells.iter().flatten().copied().max().unwrap_or(0)
    }

    fn merge(mut self, other: &SwapStats) -> Self {
        for i in 0..2 {
            for j in 0..2 {
                self.cells[i][j] += other.cells[i][j];
            }
        }
        self.n_gates += other.n_gates;
        self.pulses.add(&other.pulses);
        self
    }
}

fn swap_pattern(s0: Spin, s3: Spin) -> [DetectorId; 4] {
    let d0 = match s0 {
        Spin::Plus => DetectorId::DPlus0,
        Spin::Minus => DetectorId::DMinus0,
    };
    let d3 = match s3 {
        Spin::Plus => DetectorId::DPlus3,
        Spin::Minus => DetectorId::DMinus3,
    };
    [DetectorId::D1, DetectorId::D2, d0, d3]
}

fn swap_block<W: World>(
    range: Range<u64>,
    theta0: f64,
    theta3: f64,
    cfg: &PhysicsConfig,
    rng: &mut ChaCha8Rng,
) -> Result<SwapStats> {
    let (pbs0, pbs3) = (PbsSetting::new(theta0), PbsSetting::new(theta3));
    let mut clicks = Clicks::new(cfg);
    let mut emitted = Vec::with_capacity((range.end - range.start) as usize);
    let mut arrivals = Vec::with_capacity(4);
    for i in range.clone() {
        let mut world = W::new(cfg.epsilon);
        arrivals.clear();
        let (t0, t3) = front_end(
            &mut world,
            PumpPulse::nth(i),
            None,
            0.0,
            cfg,
            &mut arrivals,
            rng,
        )?;
        if let Some(t) = t0 {
            let d = match world.pbs(P0, pbs0, rng)? {
                PbsBranch::TransmitH => DetectorId::DPlus0,
                PbsBranch::ReflectV => DetectorId::DMinus0,
            };
            arrivals.push((d, t));
        }
        if let Some(t) = t3 {
            let d = match world.pbs(P3, pbs3, rng)? {
                PbsBranch::TransmitH => DetectorId::DPlus3,
                PbsBranch::ReflectV => DetectorId::DMinus3,
            };
            arrivals.push((d, t));
        }
        emitted.push(t0.is_some() || t3.is_some());
        clicks.pulse(&arrivals, rng);
    }
    let events = clicks.finish(&range, rng);
    let gates = match_coincidences(&events, &GATE_SWAP, cfg.window, &cfg.delays)?;
    let mut cells = [[0; 2]; 2];
    for s0 in [Spin::Plus, Spin::Minus] {
        for s3 in [Spin::Plus, Spin::Minus] {
            cells[spin_index(s0)][spin_index(s3)] =
                match_coincidences(&events, &swap_pattern(s0, s3), cfg.window, &cfg.delays)?.len()
                    as u64;
        }
    }
    let gate_pulses = gates.iter().map(|r| r.pulse_id).collect();
    Ok(SwapStats {
        theta0,
        theta3,
        cells,
        n_gates: gates.len() as u64,
        pulses: tally(&range, &emitted, &gate_pulses),
    })
}

/// Entanglement swapping: two EPR pairs, photons 1 and 2 on the beam
/// splitter (D1-D2 coincidence selects PsiMinus), photons 0 and 3 on PBSs at
/// `theta0` and `theta3`.
pub fn run_swap(
    theta0: f64,
    theta3: f64,
    engine: EngineKind,
    cfg: &PhysicsConfig,
    n_pulses: u64,
    runner: &Runner,
) -> Result<SwapStats> {
    cfg.validate()?;
    let parts = match engine {
        EngineKind::StandardQm => runner.blocks(n_pulses, |r, rng| {
            swap_block::<QmWorld>(r, theta0, theta3, cfg, rng)
        })?,
        EngineKind::ElementaryState => runner.blocks(n_pulses, |r, rng| {
            swap_block::<EsWorld>(r, theta0, theta3, cfg, rng)
        })?,
    };
    let empty = SwapStats {
        theta0,
        theta3,
        ..SwapStats::default()
    };
    Ok(parts.iter().fold(empty, |acc, p| acc.merge(p)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationRow {
    pub angle: f64,
    pub stats: SwapStats,
}

/// [`run_swap`] with both PBSs rotated by each common angle from the base
/// orientation `(theta0, theta3)`. Point `k` uses `runner.child(k)`.
#[allow(clippy::too_many_arguments)]
pub fn rotation_scan(
    common_angles: &[f64],
    theta0: f64,
    theta3: f64,
    engine: EngineKind,
    cfg: &PhysicsConfig,
    n_pulses: u64,
    runner: &Runner,
) -> Result<Vec<RotationRow>> {
    if common_angles.is_empty() {
        return Err(Error::Invalid("angle list is empty".into()));
    }
    common_angles
        .iter()
        .enumerate()
        .map(|(k, &phi)| {
            run_swap(
                theta0 + phi,
                theta3 + phi,
                engine,
                cfg,
                n_pulses,
                &runner.child(k as u64),
            )
            .map(|stats| RotationRow { angle: phi, stats })
        })
        .collect()
}
