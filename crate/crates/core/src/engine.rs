//! The two interchangeable physics engines behind the experiments.
//!
//! A [`World`] holds the photons of one trial (one pump pulse) and answers
//! what the optical elements do to them. [`QmWorld`] keeps a joint state
//! vector and samples the Born rule; [`EsWorld`] keeps elementary states.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::elementary::{EsArena, EsId};
use crate::error::{Error, Result};
use crate::optics::{bs_pair_in, pbs_route_in, BeamSplitterOutcome, PbsBranch, PbsSetting};
use crate::qcore::{
    bell_state, measure_projective, tensor, BellKind, PhotonId, Spin, StateVector, C64,
};
use crate::sources::{EngineHandle, PairFactory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum EngineKind {
    #[default]
    StandardQm,
    ElementaryState,
}

impl fmt::Display for EngineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EngineKind::StandardQm => "qm",
            EngineKind::ElementaryState => "es",
        })
    }
}

impl FromStr for EngineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "qm" | "standardqm" | "standard" => Ok(EngineKind::StandardQm),
            "es" | "elementarystate" | "elementary" | "hv" => Ok(EngineKind::ElementaryState),
            _ => Err(Error::Invalid(format!(
                "unknown engine `{s}` (expected qm or es)"
            ))),
        }
    }
}

/// Photons of one trial.
pub trait World: PairFactory {
    /// Fresh, empty trial. `epsilon` is the pair-quasispin deviation scale
    /// (ignored by the quantum engine).
    fn new(epsilon: f64) -> Self;

    /// Pass `photon` through the polarization coder: it leaves polarized
    /// along `angle`.
    fn code<R: Rng + ?Sized>(&mut self, photon: PhotonId, angle: f64, rng: &mut R) -> Result<()>;

    /// Two photons on the simple beam splitter.
    fn beam_splitter<R: Rng + ?Sized>(
        &mut self,
        up: PhotonId,
        down: PhotonId,
        simultaneous: bool,
        visibility: f64,
        rng: &mut R,
    ) -> Result<BeamSplitterOutcome>;

    /// `photon` through a polarization beam splitter.
    fn pbs<R: Rng + ?Sized>(
        &mut self,
        photon: PhotonId,
        setting: PbsSetting,
        rng: &mut R,
    ) -> Result<PbsBranch>;
}

#[derive(Debug, Clone, Default)]
pub struct QmWorld {
    state: Option<StateVector>,
}

impl QmWorld {
    pub fn state(&self) -> Option<&StateVector> {
        self.state.as_ref()
    }

    fn state_mut(&mut self) -> Result<&mut StateVector> {
        self.state
            .as_mut()
            .ok_or_else(|| Error::Invalid("no photons in this trial".into()))
    }
}

impl PairFactory for QmWorld {
    fn prepare_pair(&mut self, ids: [PhotonId; 2]) -> [EngineHandle; 2] {
        let pair = bell_state(BellKind::PsiMinus, ids[0], ids[1]);
        self.state = Some(match self.state.take() {
            Some(s) => tensor(&s, &pair).expect("pair labels are fresh"),
            None => pair,
        });
        ids.map(EngineHandle::Qm)
    }
}

impl World for QmWorld {
    fn new(_epsilon: f64) -> Self {
        QmWorld::default()
    }

    /// Measures the photon along `angle` and, on `−`, rotates it by −90° so
    /// it always leaves along `angle`.
    fn code<R: Rng + ?Sized>(&mut self, photon: PhotonId, angle: f64, rng: &mut R) -> Result<()> {
        let state = self.state_mut()?;
        let m = measure_projective(state, photon, angle, rng)?;
        *state = match m.outcome {
            Spin::Plus => m.collapsed,
            Spin::Minus => {
                let z = C64::new(0.0, 0.0);
                let one = C64::new(1.0, 0.0);
                m.collapsed.apply_single(photon, &[[z, one], [-one, z]])?
            }
        };
        Ok(())
    }

    fn beam_splitter<R: Rng + ?Sized>(
        &mut self,
        up: PhotonId,
        down: PhotonId,
        simultaneous: bool,
        visibility: f64,
        rng: &mut R,
    ) -> Result<BeamSplitterOutcome> {
        let state = self.state_mut()?;
        let (outcome, after) = bs_pair_in(state, up, down, simultaneous, visibility, rng)?;
        *state = after;
        Ok(outcome)
    }

    fn pbs<R: Rng + ?Sized>(
        &mut self,
        photon: PhotonId,
        setting: PbsSetting,
        rng: &mut R,
    ) -> Result<PbsBranch> {
        let state = self.state_mut()?;
        let (branch, after) = pbs_route_in(state, photon, setting, rng)?;
        *state = after;
        Ok(branch)
    }
}

#[derive(Debug, Clone, Default)]
pub struct EsWorld {
    arena: EsArena,
    photons: [Option<EsId>; 4],
    epsilon: f64,
}

impl EsWorld {
    pub fn arena(&self) -> &EsArena {
        &self.arena
    }

    pub fn id(&self, photon: PhotonId) -> Result<EsId> {
        self.photons
            .get(photon.0 as usize)
            .copied()
            .flatten()
            .ok_or(Error::UnknownLabel(photon))
    }
}

impl PairFactory for EsWorld {
    fn prepare_pair(&mut self, ids: [PhotonId; 2]) -> [EngineHandle; 2] {
        let (a, b) = self.arena.prepare_epr_pair();
        self.photons[ids[0].0 as usize] = Some(a);
        self.photons[ids[1].0 as usize] = Some(b);
        [EngineHandle::Es(a), EngineHandle::Es(b)]
    }
}

impl World for EsWorld {
    fn new(epsilon: f64) -> Self {
        EsWorld {
            epsilon,
            ..EsWorld::default()
        }
    }

    fn code<R: Rng + ?Sized>(&mut self, photon: PhotonId, angle: f64, rng: &mut R) -> Result<()> {
        let id = self.id(photon)?;
        self.arena.prepare_in_place(id, angle, rng);
        Ok(())
    }

    /// An `S² = 0` pair of photons whose partners are elsewhere hands its
    /// anticorrelation over to those partners.
    fn beam_splitter<R: Rng + ?Sized>(
        &mut self,
        up: PhotonId,
        down: PhotonId,
        simultaneous: bool,
        visibility: f64,
        rng: &mut R,
    ) -> Result<BeamSplitterOutcome> {
        let (a, b) = (self.id(up)?, self.id(down)?);
        let (outcome, s2) = self.arena.route_pair(
            (up, a),
            (down, b),
            simultaneous,
            visibility,
            self.epsilon,
            rng,
        )?;
        if s2.is_some_and(|s| s.is_singlet()) {
            self.arena.transfer_correlation(a, b, self.epsilon, rng);
        }
        Ok(outcome)
    }

    fn pbs<R: Rng + ?Sized>(
        &mut self,
        photon: PhotonId,
        setting: PbsSetting,
        rng: &mut R,
    ) -> Result<PbsBranch> {
        let id = self.id(photon)?;
        Ok(self.arena.perturb(id, setting.angle(), rng).into())
    }
}
