//! Contextual hidden-variable engine.
//!
//! Each photon carries an [`ElementaryState`]: a partial map from measurement
//! direction to a definite quasispin value `±1/2`. Values are drawn lazily the
//! first time a direction is queried and then never change (until a direct
//! measurement perturbs the state). The draw is Malus-law distributed around
//! the most recent definite value the photon is known to have, either its own
//! or, for a linked partner, the partner's value mapped through the pair
//! correlation. An EPR pair is two states linked as PsiMinus, so each is the
//! negative copy of the other in every direction.
//!
//! States live in an [`EsArena`] and refer to each other by [`EsId`]; a linked
//! pair must stay inside one arena (one trial).
//!
//! Direction keys are polarization angles reduced modulo 180° and quantized to
//! 10⁻⁶ degree. Querying `θ + 180°` returns the negated value of `θ`: the
//! direction is oriented, so its reverse reads the opposite projection.

use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{check_probability, Result};
use crate::optics::{BeamSplitterOutcome, Port};
use crate::qcore::{bernoulli, BellKind, PhotonId, Qubit, Spin};

const MICRO: f64 = 1e6;
const HALF_TURN: i64 = 180_000_000;
const QUARTER_TURN: i64 = 90_000_000;

/// Index of an elementary state inside its arena.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EsId(usize);

/// Canonical direction key in `[0, 180)` micro-degrees plus whether the query
/// reads the reversed orientation.
fn canonical(direction: f64) -> (i64, bool) {
    let t = direction.rem_euclid(360.0);
    let (t, reversed) = if t >= 180.0 {
        (t - 180.0, true)
    } else {
        (t, false)
    };
    let mut key = (t * MICRO).round() as i64;
    let mut reversed = reversed;
    if key >= HALF_TURN {
        key -= HALF_TURN;
        reversed = !reversed;
    }
    (key, reversed)
}

fn key_degrees(key: i64) -> f64 {
    key as f64 / MICRO
}

fn reflect(key: i64) -> i64 {
    (HALF_TURN - key).rem_euclid(HALF_TURN)
}

/// Probability of `+` at `key` given a definite `value` at `reference`.
fn malus_plus(key: i64, reference: i64, value: Spin) -> f64 {
    let diff = (key - reference).rem_euclid(HALF_TURN);
    let aligned = match diff {
        0 => 1.0,
        QUARTER_TURN => 0.0,
        _ => key_degrees(diff).to_radians().cos().powi(2),
    };
    if value.is_plus() {
        aligned
    } else {
        1.0 - aligned
    }
}

/// A definite value at a direction, stamped with the arena clock.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Mark {
    key: i64,
    value: Spin,
    tick: u64,
}

/// Correlation between two linked states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub partner: EsId,
    /// Bell state the pair was prepared in; PsiMinus for EPR pairs.
    pub kind: BellKind,
    /// Probability scale of a pair-quasispin deviation when a value is
    /// transferred across the link along a direction outside the original
    /// basis (see [`s2_deviation`]).
    pub fluctuation: f64,
}

/// Definite value `value` along `key` of one photon seen from its partner.
fn map_through(kind: BellKind, key: i64, value: Spin) -> (i64, Spin) {
    match kind {
        BellKind::PsiMinus => (key, -value),
        BellKind::PhiPlus => (key, value),
        BellKind::PhiMinus => (reflect(key), value),
        BellKind::PsiPlus => (reflect(key), -value),
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ElementaryState {
    preparation: Option<(f64, Spin)>,
    revealed: BTreeMap<i64, Spin>,
    latest: Option<Mark>,
    link: Option<Link>,
    perturbations: u32,
}

impl ElementaryState {
    /// Preparation angle (degrees, `[0, 180)`) if the photon was polarized by
    /// a preparation or a direct measurement.
    pub fn preparation_angle(&self) -> Option<f64> {
        self.preparation.map(|(a, s)| match s {
            Spin::Plus => a,
            Spin::Minus => (a + 90.0).rem_euclid(180.0),
        })
    }

    pub fn partner(&self) -> Option<EsId> {
        self.link.map(|l| l.partner)
    }

    pub fn link(&self) -> Option<Link> {
        self.link
    }

    /// Directions (degrees) with a fixed value.
    pub fn revealed(&self) -> impl Iterator<Item = (f64, Spin)> + '_ {
        self.revealed.iter().map(|(&k, &v)| (key_degrees(k), v))
    }

    /// Value at `direction` if already fixed, without drawing.
    pub fn peek(&self, direction: f64) -> Option<Spin> {
        let (key, reversed) = canonical(direction);
        self.revealed
            .get(&key)
            .map(|&v| if reversed { -v } else { v })
    }

    pub fn perturbation_count(&self) -> u32 {
        self.perturbations
    }
}

/// Value of the pair's squared total quasispin in one event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairQuasispin {
    /// 0 or 2 (units of ħ² = 1).
    pub s_squared: u8,
    /// Probability with which the value 0 was drawn.
    pub epsilon: f64,
}

impl PairQuasispin {
    pub fn is_singlet(&self) -> bool {
        self.s_squared == 0
    }
}

/// Draw `S² = 0` with probability `epsilon`, otherwise `S² = 2`.
pub fn pair_s2_sample<R: Rng + ?Sized>(epsilon: f64, rng: &mut R) -> Result<PairQuasispin> {
    check_probability("epsilon", epsilon)?;
    let s_squared = if bernoulli(rng, epsilon) { 0 } else { 2 };
    Ok(PairQuasispin { s_squared, epsilon })
}

/// Effective deviation probability for a pair compared along `direction`.
///
/// Pairs compared in the original H/V basis have a value of `S²` fixed by the
/// source and never deviate; the deviation grows to `epsilon` at 45°.
pub fn s2_deviation(epsilon: f64, direction: f64) -> f64 {
    let (key, _) = canonical(direction);
    if key % QUARTER_TURN == 0 {
        return 0.0;
    }
    epsilon * (2.0 * key_degrees(key)).to_radians().sin().powi(2)
}

/// All elementary states of one trial.
#[derive(Debug, Clone, Default)]
pub struct EsArena {
    states: Vec<ElementaryState>,
    clock: u64,
}

impl EsArena {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, id: EsId) -> &ElementaryState {
        &self.states[id.0]
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    fn tick(&mut self) -> u64 {
        self.clock += 1;
        self.clock
    }

    fn push(&mut self, state: ElementaryState) -> EsId {
        self.states.push(state);
        EsId(self.states.len() - 1)
    }

    fn fix(&mut self, id: EsId, key: i64, value: Spin) {
        let tick = self.tick();
        let s = &mut self.states[id.0];
        s.revealed.insert(key, value);
        s.latest = Some(Mark { key, value, tick });
    }

    /// Photon polarized along `angle`; that direction reads `+1/2`.
    pub fn prepare_single(&mut self, angle: f64) -> EsId {
        let id = self.push(ElementaryState::default());
        self.polarize(id, angle, Spin::Plus);
        id
    }

    /// Two linked states, negative copies of each other, nothing revealed.
    pub fn prepare_epr_pair(&mut self) -> (EsId, EsId) {
        self.prepare_bell_pair(BellKind::PsiMinus)
    }

    /// Two states linked with the correlation of the Bell state `kind`.
    pub fn prepare_bell_pair(&mut self, kind: BellKind) -> (EsId, EsId) {
        let a = self.push(ElementaryState::default());
        let b = self.push(ElementaryState::default());
        self.link(a, b, kind, 0.0);
        (a, b)
    }

    fn link(&mut self, a: EsId, b: EsId, kind: BellKind, fluctuation: f64) {
        self.states[a.0].link = Some(Link {
            partner: b,
            kind,
            fluctuation,
        });
        self.states[b.0].link = Some(Link {
            partner: a,
            kind,
            fluctuation,
        });
    }

    /// Partner's definite value at `key`, seen through the link.
    fn transferred<R: Rng + ?Sized>(
        &self,
        link: Link,
        key: i64,
        value: Spin,
        rng: &mut R,
    ) -> (i64, Spin) {
        let (k, v) = map_through(link.kind, key, value);
        if link.fluctuation > 0.0
            && bernoulli(rng, s2_deviation(link.fluctuation, key_degrees(key)))
        {
            (k, -v)
        } else {
            (k, v)
        }
    }

    /// Most recent definite value available to `id`, own or via its partner.
    fn reference<R: Rng + ?Sized>(&self, id: EsId, rng: &mut R) -> Option<(i64, Spin)> {
        let s = &self.states[id.0];
        let own = s.latest;
        let remote = s
            .link
            .and_then(|l| self.states[l.partner.0].latest.map(|m| (l, m)));
        match (own, remote) {
            (Some(o), Some((l, m))) if m.tick > o.tick => {
                Some(self.transferred(l, m.key, m.value, rng))
            }
            (Some(o), _) => Some((o.key, o.value)),
            (None, Some((l, m))) => Some(self.transferred(l, m.key, m.value, rng)),
            (None, None) => None,
        }
    }

    fn respond_key<R: Rng + ?Sized>(&mut self, id: EsId, key: i64, rng: &mut R) -> Spin {
        if let Some(&v) = self.states[id.0].revealed.get(&key) {
            return v;
        }
        let s = &self.states[id.0];
        let forced = s
            .link
            .and_then(|l| self.states[l.partner.0].revealed.get(&key).map(|&v| (l, v)));
        let reference = match forced {
            Some((l, v)) => Some(self.transferred(l, key, v, rng)),
            None => self.reference(id, rng),
        };
        let p_plus = match reference {
            Some((rk, rv)) => malus_plus(key, rk, rv),
            None => 0.5,
        };
        let value = if bernoulli(rng, p_plus) {
            Spin::Plus
        } else {
            Spin::Minus
        };
        self.fix(id, key, value);
        value
    }

    /// Value of the quasispin projection along `direction`.
    pub fn respond<R: Rng + ?Sized>(&mut self, id: EsId, direction: f64, rng: &mut R) -> Spin {
        let (key, reversed) = canonical(direction);
        let v = self.respond_key(id, key, rng);
        if reversed {
            -v
        } else {
            v
        }
    }

    /// Copy every value `id` has fixed into its partner (as the partner sees
    /// it), then drop the link on both sides.
    fn sever<R: Rng + ?Sized>(&mut self, id: EsId, rng: &mut R) {
        let Some(link) = self.states[id.0].link else {
            return;
        };
        let mut marks: Vec<Mark> = self.states[id.0]
            .revealed
            .iter()
            .map(|(&key, &value)| Mark {
                key,
                value,
                tick: 0,
            })
            .collect();
        // Keep the clock order so the partner's most recent reference matches.
        if let Some(latest) = self.states[id.0].latest {
            marks.retain(|m| m.key != latest.key);
            marks.push(latest);
        }
        for m in marks {
            let (k, v) = self.transferred(link, m.key, m.value, rng);
            if !self.states[link.partner.0].revealed.contains_key(&k) {
                self.fix(link.partner, k, v);
            }
        }
        self.states[id.0].link = None;
        self.states[link.partner.0].link = None;
    }

    fn polarize(&mut self, id: EsId, angle: f64, value: Spin) {
        let (key, reversed) = canonical(angle);
        let value = if reversed { -value } else { value };
        let s = &mut self.states[id.0];
        s.revealed.clear();
        s.latest = None;
        s.preparation = Some((key_degrees(key), value));
        self.fix(id, key, value);
    }

    /// Re-prepare an existing photon along `angle` (the coder S). Any link is
    /// severed first so the former partner keeps what it already implied.
    pub fn prepare_in_place<R: Rng + ?Sized>(&mut self, id: EsId, angle: f64, rng: &mut R) {
        self.sever(id, rng);
        self.polarize(id, angle, Spin::Plus);
    }

    /// Direct measurement along `measured_direction`: the measured value stays,
    /// everything else is forgotten and the photon stops being a negative
    /// copy of its partner.
    pub fn perturb<R: Rng + ?Sized>(
        &mut self,
        id: EsId,
        measured_direction: f64,
        rng: &mut R,
    ) -> Spin {
        let value = self.respond(id, measured_direction, rng);
        self.sever(id, rng);
        self.polarize(id, measured_direction, value);
        self.states[id.0].perturbations += 1;
        value
    }

    /// After the pair `(a, b)` was found with `S² = 0`, their former partners
    /// become linked as PsiMinus: each is the negative copy of a member of an
    /// anticorrelated pair. `fluctuation` is the deviation scale carried by the
    /// new link.
    pub fn transfer_correlation<R: Rng + ?Sized>(
        &mut self,
        a: EsId,
        b: EsId,
        fluctuation: f64,
        rng: &mut R,
    ) -> Option<(EsId, EsId)> {
        let pa = self.states[a.0].partner()?;
        let pb = self.states[b.0].partner()?;
        if pa == b {
            return None;
        }
        self.sever(a, rng);
        self.sever(b, rng);
        self.link(pa, pb, BellKind::PsiMinus, fluctuation);
        Some((pa, pb))
    }

    /// Pure polarization state of the equivalence class the photon is known
    /// to belong to, from its most recent definite value.
    pub fn class_state<R: Rng + ?Sized>(&self, id: EsId, rng: &mut R) -> Option<Qubit> {
        self.reference(id, rng).map(|(k, v)| match v {
            Spin::Plus => Qubit::linear(key_degrees(k)),
            Spin::Minus => Qubit::linear(key_degrees(k) + 90.0),
        })
    }

    fn comparison_direction(&self, up: EsId, down: EsId) -> f64 {
        let dir = |id: EsId| {
            let s = &self.states[id.0];
            s.latest.map(|m| m.key).or_else(|| {
                s.link.and_then(|l| {
                    self.states[l.partner.0]
                        .latest
                        .map(|m| map_through(l.kind, m.key, m.value).0)
                })
            })
        };
        dir(up)
            .or_else(|| dir(down))
            .map(key_degrees)
            .unwrap_or(0.0)
    }

    /// Beam-splitter routing of two photons.
    ///
    /// Interfering pairs (probability `visibility` when `simultaneous`) exit
    /// through different ports iff their pair quasispin is `S² = 0`:
    /// - a linked pair has `S²` fixed by its Bell kind (0 only for PsiMinus);
    /// - otherwise both photons are read along a common direction (the first
    ///   one's reference axis, or H). Orthogonal values give `S² = 0` half the
    ///   time; parallel values give `S² = 2` except for a deviation with
    ///   probability [`s2_deviation`]`(epsilon, direction)`.
    ///
    /// Non-interfering photons pick ports independently and reveal nothing.
    #[allow(clippy::too_many_arguments)]
    pub fn route_pair<R: Rng + ?Sized>(
        &mut self,
        up: (PhotonId, EsId),
        down: (PhotonId, EsId),
        simultaneous: bool,
        visibility: f64,
        epsilon: f64,
        rng: &mut R,
    ) -> Result<(BeamSplitterOutcome, Option<PairQuasispin>)> {
        check_probability("visibility", visibility)?;
        check_probability("epsilon", epsilon)?;
        let port = |rng: &mut R| {
            if rng.random::<bool>() {
                Port::Up
            } else {
                Port::Down
            }
        };
        if !(simultaneous && bernoulli(rng, visibility)) {
            let ports = [(up.0, port(rng)), (down.0, port(rng))];
            return Ok((outcome(ports, false), None));
        }
        let s2 = match self.states[up.1 .0].link {
            Some(l) if l.partner == down.1 => PairQuasispin {
                s_squared: if l.kind == BellKind::PsiMinus { 0 } else { 2 },
                epsilon: 0.0,
            },
            _ => {
                let dir = self.comparison_direction(up.1, down.1);
                let a = self.respond(up.1, dir, rng);
                let b = self.respond(down.1, dir, rng);
                if a == b {
                    pair_s2_sample(s2_deviation(epsilon, dir), rng)?
                } else {
                    pair_s2_sample(0.5, rng)?
                }
            }
        };
        let ports = if s2.is_singlet() {
            if rng.random::<bool>() {
                [(up.0, Port::Up), (down.0, Port::Down)]
            } else {
                [(up.0, Port::Down), (down.0, Port::Up)]
            }
        } else {
            let p = port(rng);
            [(up.0, p), (down.0, p)]
        };
        Ok((outcome(ports, true), Some(s2)))
    }
}

fn outcome(ports: [(PhotonId, Port); 2], coherent: bool) -> BeamSplitterOutcome {
    BeamSplitterOutcome {
        ports,
        same_side: ports[0].1 == ports[1].1,
        coherent,
    }
}

/// Complete Bell analysis of an input photon `one` (polarized at `angle`)
/// together with the EPR photon `two`, read as a measurement of `two`.
///
/// The analyzer probes `two` along the input axis or its mirror image (its
/// context, chosen at random), which fixes the outcome:
///
/// | context | value of `two` | announced |
/// |---------|----------------|-----------|
/// | `θ`     | `−`            | PsiMinus  |
/// | `θ`     | `+`            | PhiPlus   |
/// | `−θ`    | `−`            | PsiPlus   |
/// | `−θ`    | `+`            | PhiMinus  |
///
/// `two`'s partner is not touched; it learns the opposite value only through
/// the link.
pub fn analyze_bell<R: Rng + ?Sized>(
    arena: &mut EsArena,
    one: EsId,
    two: EsId,
    rng: &mut R,
) -> Option<BellKind> {
    let angle = arena.get(one).preparation_angle()?;
    let mirrored = rng.random::<bool>();
    let context = if mirrored {
        (-angle).rem_euclid(180.0)
    } else {
        angle
    };
    let value = arena.respond(two, context, rng);
    Some(match (mirrored, value) {
        (false, Spin::Minus) => BellKind::PsiMinus,
        (false, Spin::Plus) => BellKind::PhiPlus,
        (true, Spin::Minus) => BellKind::PsiPlus,
        (true, Spin::Plus) => BellKind::PhiMinus,
    })
}
