//! Passive optical elements: the simple beam splitter, the polarization beam
//! splitter, the polarization coder and path delays.
//!
//! The beam splitter uses the real convention
//! `u → (u + d)/√2`, `d → (u − d)/√2` on the spatial mode with polarization
//! untouched. With this choice a two-photon input leaves through different
//! ports exactly when its polarization part is antisymmetric (PsiMinus), and
//! through one port when it is symmetric.

use std::fmt;

use rand::Rng;

use crate::error::{check_probability, Error, Result};
use crate::qcore::{
    bell_projector, bell_state, bernoulli, measure_projective, snap_probability, BellKind,
    PhotonId, Qubit, Spin, StateVector, C64,
};
use crate::sources::PhotonRecord;

const S: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Upper (`u`) or lower (`d`) beam of the simple beam splitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Port {
    Up,
    Down,
}

impl fmt::Display for Port {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Port::Up => "u",
            Port::Down => "d",
        })
    }
}

/// Spatial-mode matrix: column = input port, row = output port, order `(u, d)`.
pub const BEAM_SPLITTER: [[f64; 2]; 2] = [[S, S], [S, -S]];

/// Amplitudes of one photon after the beam splitter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinglePhotonOutput {
    pub up: C64,
    pub down: C64,
    pub polarization: Qubit,
}

impl SinglePhotonOutput {
    pub fn probability(&self, port: Port) -> f64 {
        match port {
            Port::Up => self.up.norm_sqr(),
            Port::Down => self.down.norm_sqr(),
        }
    }
}

pub fn bs_single(in_port: Port, pol: Qubit) -> SinglePhotonOutput {
    let col = match in_port {
        Port::Up => 0,
        Port::Down => 1,
    };
    SinglePhotonOutput {
        up: C64::new(BEAM_SPLITTER[0][col], 0.0),
        down: C64::new(BEAM_SPLITTER[1][col], 0.0),
        polarization: pol,
    }
}

/// Where each photon of a pair left the beam splitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BeamSplitterOutcome {
    pub ports: [(PhotonId, Port); 2],
    pub same_side: bool,
    /// Whether this trial was routed by two-photon interference.
    pub coherent: bool,
}

impl BeamSplitterOutcome {
    fn new(ports: [(PhotonId, Port); 2], coherent: bool) -> Self {
        BeamSplitterOutcome {
            ports,
            same_side: ports[0].1 == ports[1].1,
            coherent,
        }
    }

    pub fn port_of(&self, photon: PhotonId) -> Option<Port> {
        self.ports
            .iter()
            .find(|(p, _)| *p == photon)
            .map(|(_, port)| *port)
    }
}

/// Joint exit-port probabilities. `ud` means the photon that entered up
/// leaves up and the one that entered down leaves down.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PortProbabilities {
    pub uu: f64,
    pub ud: f64,
    pub du: f64,
    pub dd: f64,
}

impl PortProbabilities {
    pub fn total(&self) -> f64 {
        self.uu + self.ud + self.du + self.dd
    }

    pub fn different(&self) -> f64 {
        self.ud + self.du
    }
}

/// Two-photon indistinguishability for arrival-time mismatch `delta` and
/// coherence time `tau`: `exp(−δ²/2τ²)`.
pub fn visibility(delta: f64, tau: f64) -> f64 {
    if tau <= 0.0 {
        return if delta == 0.0 { 1.0 } else { 0.0 };
    }
    (-delta * delta / (2.0 * tau * tau)).exp()
}

/// Weight of the antisymmetric (PsiMinus) polarization component of photons
/// `up` and `down`.
pub fn singlet_weight(state: &StateVector, up: PhotonId, down: PhotonId) -> Result<f64> {
    let (_, u) = state.contract(&bell_state(BellKind::PsiMinus, up, down))?;
    Ok(u.iter().map(|x| x.norm_sqr()).sum::<f64>() / state.norm_sqr())
}

pub fn bs_pair_probabilities(
    state: &StateVector,
    up: PhotonId,
    down: PhotonId,
    visibility: f64,
) -> Result<PortProbabilities> {
    check_probability("visibility", visibility)?;
    let w = snap_probability(singlet_weight(state, up, down)?);
    let v = visibility;
    let cross = v * w / 2.0 + (1.0 - v) / 4.0;
    let same = v * (1.0 - w) / 2.0 + (1.0 - v) / 4.0;
    Ok(PortProbabilities {
        uu: same,
        ud: cross,
        du: cross,
        dd: same,
    })
}

fn random_port<R: Rng + ?Sized>(rng: &mut R) -> Port {
    if rng.random::<bool>() {
        Port::Up
    } else {
        Port::Down
    }
}

fn triplet_projector() -> [[C64; 4]; 4] {
    let singlet = bell_projector(BellKind::PsiMinus);
    let mut m = [[C64::new(0.0, 0.0); 4]; 4];
    for r in 0..4 {
        for c in 0..4 {
            let id = if r == c { 1.0 } else { 0.0 };
            m[r][c] = C64::new(id, 0.0) - singlet[r][c];
        }
    }
    m
}

/// Route photons `up` and `down` of a (possibly larger) state through the
/// beam splitter. Returns the outcome and the post-selection state.
///
/// With probability `visibility` (and only if `simultaneous`) the pair
/// interferes: the polarization state is projected onto its antisymmetric or
/// symmetric part, which exits through different ports or a common port
/// respectively. Otherwise each photon picks a port independently and the
/// state is left untouched.
pub fn bs_pair_in<R: Rng + ?Sized>(
    state: &StateVector,
    up: PhotonId,
    down: PhotonId,
    simultaneous: bool,
    visibility: f64,
    rng: &mut R,
) -> Result<(BeamSplitterOutcome, StateVector)> {
    check_probability("visibility", visibility)?;
    if up == down {
        return Err(Error::DuplicateLabel(up));
    }
    state.position(up)?;
    state.position(down)?;
    let coherent = simultaneous && bernoulli(rng, visibility);
    if !coherent {
        let ports = [(up, random_port(rng)), (down, random_port(rng))];
        return Ok((BeamSplitterOutcome::new(ports, false), state.clone()));
    }
    let w = singlet_weight(state, up, down)?;
    if bernoulli(rng, w) {
        let projected = state
            .apply_pair_raw(up, down, &bell_projector(BellKind::PsiMinus))?
            .normalize()
            .expect("nonzero singlet weight");
        let ports = if rng.random::<bool>() {
            [(up, Port::Up), (down, Port::Down)]
        } else {
            [(up, Port::Down), (down, Port::Up)]
        };
        Ok((BeamSplitterOutcome::new(ports, true), projected))
    } else {
        let projected = state
            .apply_pair_raw(up, down, &triplet_projector())?
            .normalize()
            .expect("nonzero triplet weight");
        let port = random_port(rng);
        Ok((
            BeamSplitterOutcome::new([(up, port), (down, port)], true),
            projected,
        ))
    }
}

/// Route a two-photon state whose first label enters the upper port.
pub fn bs_pair<R: Rng + ?Sized>(
    joint: &StateVector,
    simultaneous: bool,
    visibility: f64,
    rng: &mut R,
) -> Result<BeamSplitterOutcome> {
    if joint.photon_count() != 2 {
        return Err(Error::PhotonCount(joint.photon_count()));
    }
    let (up, down) = (joint.labels()[0], joint.labels()[1]);
    bs_pair_in(joint, up, down, simultaneous, visibility, rng).map(|(o, _)| o)
}

/// Orientation of a polarization beam splitter, reduced modulo 180°.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PbsSetting {
    angle: f64,
}

impl PbsSetting {
    pub fn new(angle: f64) -> Self {
        PbsSetting {
            angle: angle.rem_euclid(180.0),
        }
    }

    pub fn angle(&self) -> f64 {
        self.angle
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PbsBranch {
    /// Polarized along the PBS axis (`+`).
    TransmitH,
    /// Polarized perpendicular to it (`−`).
    ReflectV,
}

impl From<Spin> for PbsBranch {
    fn from(s: Spin) -> Self {
        match s {
            Spin::Plus => PbsBranch::TransmitH,
            Spin::Minus => PbsBranch::ReflectV,
        }
    }
}

pub fn pbs_route<R: Rng + ?Sized>(
    pol: &Qubit,
    setting: PbsSetting,
    rng: &mut R,
) -> (PbsBranch, Qubit) {
    let id = PhotonId(0);
    let m = measure_projective(&pol.to_state(id), id, setting.angle, rng)
        .expect("single-photon measurement");
    let branch = PbsBranch::from(m.outcome);
    let collapsed = match branch {
        PbsBranch::TransmitH => Qubit::linear(setting.angle),
        PbsBranch::ReflectV => Qubit::linear(setting.angle + 90.0),
    };
    (branch, collapsed)
}

/// PBS acting on one photon of a multi-photon state.
pub fn pbs_route_in<R: Rng + ?Sized>(
    state: &StateVector,
    photon: PhotonId,
    setting: PbsSetting,
    rng: &mut R,
) -> Result<(PbsBranch, StateVector)> {
    let m = measure_projective(state, photon, setting.angle, rng)?;
    Ok((m.outcome.into(), m.collapsed))
}

/// The coder S: linear polarization at `angle` in the original basis.
pub fn coder(angle: f64) -> Qubit {
    Qubit::linear(angle)
}

pub fn path_delay(photon: PhotonRecord, delta_t: f64) -> PhotonRecord {
    PhotonRecord {
        arrival_time: photon.arrival_time + delta_t,
        ..photon
    }
}
