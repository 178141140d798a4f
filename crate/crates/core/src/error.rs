use thiserror::Error;

use crate::qcore::PhotonId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("state is not normalized (squared norm {0})")]
    NotNormalized(f64),
    #[error("photon {0} appears in both operands of a tensor product")]
    DuplicateLabel(PhotonId),
    #[error("photon {0} is not part of this state")]
    UnknownLabel(PhotonId),
    #[error("expected a two-photon state, got {0} photons")]
    PhotonCount(usize),
    #[error("resource pair must be the PsiMinus Bell state (fidelity {0})")]
    NotPsiMinus(f64),
    #[error("coincidence pattern is empty")]
    EmptyPattern,
    #[error("coincidence window must be positive, got {0}")]
    BadWindow(f64),
    #[error("probability `{name}` must lie in [0, 1], got {value}")]
    Probability { name: &'static str, value: f64 },
    #[error("the elementary-state engine needs a linearly polarized input (real amplitudes up to a global phase)")]
    NotLinearPolarization,
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_probability(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::Probability { name, value })
    }
}
