//! Pure states of a few polarization qubits.
//!
//! Basis convention: `|+⟩` (horizontal, H) is bit 0 and `|−⟩` (vertical, V) is
//! bit 1. In a multi-photon [`StateVector`] the leftmost label is the most
//! significant bit, so for labels `[1, 2]` the amplitudes are ordered
//! `(++, +−, −+, −−)`.
//!
//! Angles are polarization angles in degrees, H = 0°, counterclockwise. The
//! linear polarization state at angle θ is `cos θ |+⟩ + sin θ |−⟩`.

use std::fmt;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Tolerance for analytic identities (normalization, reconstruction).
pub const NORM_TOL: f64 = 1e-12;

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Role label of a photon in an experiment: `{0}`, `{1}`, `{2}`, `{3}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PhotonId(pub u8);

impl fmt::Display for PhotonId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.0)
    }
}

/// A measured quasispin projection, `+1/2` or `−1/2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Spin {
    Plus,
    Minus,
}

impl Spin {
    pub fn value(self) -> f64 {
        match self {
            Spin::Plus => 0.5,
            Spin::Minus => -0.5,
        }
    }

    pub fn flip(self) -> Spin {
        match self {
            Spin::Plus => Spin::Minus,
            Spin::Minus => Spin::Plus,
        }
    }

    pub fn is_plus(self) -> bool {
        self == Spin::Plus
    }
}

impl std::ops::Neg for Spin {
    type Output = Spin;
    fn neg(self) -> Spin {
        self.flip()
    }
}

/// Clamp a Born weight that is analytically 0 or 1 but carries rounding noise.
pub(crate) fn snap_probability(p: f64) -> f64 {
    if p < 1e-14 {
        0.0
    } else if p > 1.0 - 1e-14 {
        1.0
    } else {
        p
    }
}

/// Draw `true` with probability `p`, never consuming randomness for the
/// degenerate cases.
pub(crate) fn bernoulli<R: Rng + ?Sized>(rng: &mut R, p: f64) -> bool {
    let p = snap_probability(p);
    if p == 0.0 {
        false
    } else if p == 1.0 {
        true
    } else {
        rng.random::<f64>() < p
    }
}

/// Single-photon polarization state `α|+⟩ + β|−⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Qubit {
    alpha: C64,
    beta: C64,
}

impl Qubit {
    pub fn new(alpha: C64, beta: C64) -> Result<Self> {
        let n = alpha.norm_sqr() + beta.norm_sqr();
        if (n - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(n));
        }
        Ok(Qubit { alpha, beta })
    }

    /// Scale `(alpha, beta)` to unit norm. Fails only for the zero vector.
    pub fn normalized(alpha: C64, beta: C64) -> Result<Self> {
        let n = (alpha.norm_sqr() + beta.norm_sqr()).sqrt();
        if n < 1e-300 || !n.is_finite() {
            return Err(Error::NotNormalized(n * n));
        }
        Ok(Qubit {
            alpha: alpha / n,
            beta: beta / n,
        })
    }

    pub fn real(alpha: f64, beta: f64) -> Result<Self> {
        Qubit::new(C64::new(alpha, 0.0), C64::new(beta, 0.0))
    }

    pub fn plus() -> Self {
        Qubit {
            alpha: C64::new(1.0, 0.0),
            beta: C64::new(0.0, 0.0),
        }
    }

    pub fn minus() -> Self {
        Qubit {
            alpha: C64::new(0.0, 0.0),
            beta: C64::new(1.0, 0.0),
        }
    }

    /// Linear polarization at `angle` degrees from horizontal.
    pub fn linear(angle: f64) -> Self {
        let (s, c) = angle.to_radians().sin_cos();
        Qubit {
            alpha: C64::new(c, 0.0),
            beta: C64::new(s, 0.0),
        }
    }

    pub fn alpha(&self) -> C64 {
        self.alpha
    }

    pub fn beta(&self) -> C64 {
        self.beta
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &Qubit) -> C64 {
        self.alpha.conj() * other.alpha + self.beta.conj() * other.beta
    }

    /// `|⟨self|other⟩|²`, insensitive to global phase.
    pub fn fidelity(&self, other: &Qubit) -> f64 {
        self.inner(other).norm_sqr()
    }

    pub fn scaled(&self, phase: C64) -> Qubit {
        Qubit {
            alpha: self.alpha * phase,
            beta: self.beta * phase,
        }
    }

    pub fn apply(&self, m: &[[C64; 2]; 2]) -> Qubit {
        Qubit {
            alpha: m[0][0] * self.alpha + m[0][1] * self.beta,
            beta: m[1][0] * self.alpha + m[1][1] * self.beta,
        }
    }

    /// Polarization angle in `[0, 180)` if the state is linear (real amplitudes
    /// after removing a global phase).
    pub fn linear_angle(&self) -> Option<f64> {
        let pivot = if self.alpha.norm() >= self.beta.norm() {
            self.alpha
        } else {
            self.beta
        };
        let phase = pivot.conj() / pivot.norm();
        let a = self.alpha * phase;
        let b = self.beta * phase;
        if a.im.abs() > 1e-9 || b.im.abs() > 1e-9 {
            return None;
        }
        Some(b.re.atan2(a.re).to_degrees().rem_euclid(180.0))
    }

    pub fn to_state(&self, label: PhotonId) -> StateVector {
        StateVector {
            labels: vec![label],
            amps: vec![self.alpha, self.beta],
        }
    }
}

/// The four Bell states of a photon pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BellKind {
    PsiMinus,
    PsiPlus,
    PhiMinus,
    PhiPlus,
}

impl BellKind {
    pub const ALL: [BellKind; 4] = [
        BellKind::PsiMinus,
        BellKind::PsiPlus,
        BellKind::PhiMinus,
        BellKind::PhiPlus,
    ];

    /// Amplitudes over `(++, +−, −+, −−)`.
    pub fn amplitudes(self) -> [C64; 4] {
        let s = FRAC_1_SQRT_2;
        let (a, b, c, d) = match self {
            BellKind::PsiMinus => (0.0, s, -s, 0.0),
            BellKind::PsiPlus => (0.0, s, s, 0.0),
            BellKind::PhiMinus => (s, 0.0, 0.0, -s),
            BellKind::PhiPlus => (s, 0.0, 0.0, s),
        };
        [a, b, c, d].map(|x| C64::new(x, 0.0))
    }

    pub fn name(self) -> &'static str {
        match self {
            BellKind::PsiMinus => "psi_minus",
            BellKind::PsiPlus => "psi_plus",
            BellKind::PhiMinus => "phi_minus",
            BellKind::PhiPlus => "phi_plus",
        }
    }

    pub fn index(self) -> usize {
        match self {
            BellKind::PsiMinus => 0,
            BellKind::PsiPlus => 1,
            BellKind::PhiMinus => 2,
            BellKind::PhiPlus => 3,
        }
    }
}

impl fmt::Display for BellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Normalized amplitude vector over an ordered set of photon labels.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    labels: Vec<PhotonId>,
    amps: Vec<C64>,
}

impl StateVector {
    pub fn from_amplitudes(labels: Vec<PhotonId>, amps: Vec<C64>) -> Result<Self> {
        check_distinct(&labels)?;
        if amps.len() != 1usize << labels.len() {
            return Err(Error::Invalid(format!(
                "{} amplitudes for {} photons",
                amps.len(),
                labels.len()
            )));
        }
        let n: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (n - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(n));
        }
        Ok(StateVector { labels, amps })
    }

    /// Product basis state, one [`Spin`] per label.
    pub fn basis(labels: Vec<PhotonId>, bits: &[Spin]) -> Result<Self> {
        check_distinct(&labels)?;
        if bits.len() != labels.len() {
            return Err(Error::Invalid("one spin per label required".into()));
        }
        let index = bits
            .iter()
            .fold(0usize, |acc, s| (acc << 1) | usize::from(*s == Spin::Minus));
        let mut amps = vec![C64::new(0.0, 0.0); 1 << labels.len()];
        amps[index] = C64::new(1.0, 0.0);
        Ok(StateVector { labels, amps })
    }

    pub fn labels(&self) -> &[PhotonId] {
        &self.labels
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn photon_count(&self) -> usize {
        self.labels.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn contains(&self, label: PhotonId) -> bool {
        self.labels.contains(&label)
    }

    pub fn position(&self, label: PhotonId) -> Result<usize> {
        self.labels
            .iter()
            .position(|&l| l == label)
            .ok_or(Error::UnknownLabel(label))
    }

    fn shift(&self, pos: usize) -> usize {
        self.labels.len() - 1 - pos
    }

    /// Same state with the labels permuted into `order`.
    pub fn reorder(&self, order: &[PhotonId]) -> Result<StateVector> {
        if order.len() != self.labels.len() {
            return Err(Error::Invalid("reorder needs the same label set".into()));
        }
        check_distinct(order)?;
        let shifts = order
            .iter()
            .map(|&l| self.position(l).map(|p| self.shift(p)))
            .collect::<Result<Vec<_>>>()?;
        let n = order.len();
        let mut amps = vec![C64::new(0.0, 0.0); self.amps.len()];
        for (new_index, amp) in amps.iter_mut().enumerate() {
            let mut old_index = 0usize;
            for (k, &s) in shifts.iter().enumerate() {
                let bit = (new_index >> (n - 1 - k)) & 1;
                old_index |= bit << s;
            }
            *amp = self.amps[old_index];
        }
        Ok(StateVector {
            labels: order.to_vec(),
            amps,
        })
    }

    /// `⟨self|other⟩`, matching labels by identity rather than position.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        let other = other.reorder(&self.labels)?;
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub fn fidelity(&self, other: &StateVector) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }

    /// Largest amplitude difference after aligning label order.
    pub fn max_amplitude_error(&self, other: &StateVector) -> Result<f64> {
        let other = other.reorder(&self.labels)?;
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// Apply a 2×2 operator to one photon. The result is not renormalized.
    pub(crate) fn apply_single_raw(
        &self,
        label: PhotonId,
        m: &[[C64; 2]; 2],
    ) -> Result<StateVector> {
        let s = self.shift(self.position(label)?);
        let mut amps = self.amps.clone();
        for i in 0..self.amps.len() {
            if (i >> s) & 1 == 0 {
                let j = i | (1 << s);
                let (a0, a1) = (self.amps[i], self.amps[j]);
                amps[i] = m[0][0] * a0 + m[0][1] * a1;
                amps[j] = m[1][0] * a0 + m[1][1] * a1;
            }
        }
        Ok(StateVector {
            labels: self.labels.clone(),
            amps,
        })
    }

    /// Apply a unitary to one photon.
    pub fn apply_single(&self, label: PhotonId, m: &[[C64; 2]; 2]) -> Result<StateVector> {
        self.apply_single_raw(label, m)
    }

    /// Apply a 4×4 operator to photons `(a, b)` (basis `++, +−, −+, −−` with
    /// `a` the more significant bit). The result is not renormalized.
    pub(crate) fn apply_pair_raw(
        &self,
        a: PhotonId,
        b: PhotonId,
        m: &[[C64; 4]; 4],
    ) -> Result<StateVector> {
        if a == b {
            return Err(Error::DuplicateLabel(a));
        }
        let sa = self.shift(self.position(a)?);
        let sb = self.shift(self.position(b)?);
        let mask = (1 << sa) | (1 << sb);
        let mut amps = self.amps.clone();
        for base in (0..self.amps.len()).filter(|i| i & mask == 0) {
            let idx = [
                base,
                base | (1 << sb),
                base | (1 << sa),
                base | (1 << sa) | (1 << sb),
            ];
            let v = idx.map(|i| self.amps[i]);
            for (r, &out) in idx.iter().enumerate() {
                amps[out] = (0..4).map(|c| m[r][c] * v[c]).sum();
            }
        }
        Ok(StateVector {
            labels: self.labels.clone(),
            amps,
        })
    }

    pub(crate) fn normalize(mut self) -> Option<StateVector> {
        let n = self.norm_sqr().sqrt();
        if n < 1e-300 {
            return None;
        }
        for a in &mut self.amps {
            *a /= n;
        }
        Some(self)
    }

    /// Partial inner product `⟨probe|ψ⟩` over the probe's labels. Returns the
    /// unnormalized vector over the remaining labels, in their original order.
    pub fn contract(&self, probe: &StateVector) -> Result<(Vec<PhotonId>, Vec<C64>)> {
        let probe_shifts = probe
            .labels
            .iter()
            .map(|&l| self.position(l).map(|p| self.shift(p)))
            .collect::<Result<Vec<_>>>()?;
        let rest: Vec<PhotonId> = self
            .labels
            .iter()
            .copied()
            .filter(|l| !probe.labels.contains(l))
            .collect();
        let rest_shifts: Vec<usize> = rest
            .iter()
            .map(|&l| self.shift(self.labels.iter().position(|&x| x == l).unwrap()))
            .collect();
        let k = probe.labels.len();
        let r = rest.len();
        let mut out = vec![C64::new(0.0, 0.0); 1 << r];
        for (i, amp) in self.amps.iter().enumerate() {
            let mut pi = 0usize;
            for &s in &probe_shifts {
                pi = (pi << 1) | ((i >> s) & 1);
            }
            let mut ri = 0usize;
            for &s in &rest_shifts {
                ri = (ri << 1) | ((i >> s) & 1);
            }
            debug_assert!(pi < 1 << k);
            out[ri] += probe.amps[pi].conj() * amp;
        }
        Ok((rest, out))
    }

    /// Factor out photon `label` if it is in a product state with the rest.
    pub fn extract_qubit(&self, label: PhotonId) -> Option<Qubit> {
        let s = self.shift(self.position(label).ok()?);
        // Pick the rest-configuration with the largest weight as reference.
        let (ref_i, _) = self
            .amps
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm_sqr().total_cmp(&b.1.norm_sqr()))?;
        let base = ref_i & !(1 << s);
        let q = Qubit::normalized(self.amps[base], self.amps[base | (1 << s)]).ok()?;
        // Verify factorization: ψ = q ⊗ rest.
        let (_, rest) = self.contract(&q.to_state(label)).ok()?;
        let rebuilt = tensor_raw(&q.to_state(label), &rest, label, self)?;
        let err = self
            .amps
            .iter()
            .zip(&rebuilt)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        (err < 1e-9).then_some(q)
    }
}

// Rebuild q ⊗ rest in the label order of `like`.
fn tensor_raw(
    q: &StateVector,
    rest: &[C64],
    label: PhotonId,
    like: &StateVector,
) -> Option<Vec<C64>> {
    let s = like.shift(like.position(label).ok()?);
    let n = like.labels.len();
    let mut out = vec![C64::new(0.0, 0.0); like.amps.len()];
    for (i, amp) in out.iter_mut().enumerate() {
        let bit = (i >> s) & 1;
        // Remaining bits in original order with the label's bit removed.
        let high = i >> (s + 1);
        let low = i & ((1 << s) - 1);
        let ri = (high << s) | low;
        debug_assert!(ri < 1 << (n - 1));
        *amp = q.amps[bit] * rest[ri];
    }
    Some(out)
}

fn check_distinct(labels: &[PhotonId]) -> Result<()> {
    for (i, l) in labels.iter().enumerate() {
        if labels[..i].contains(l) {
            return Err(Error::DuplicateLabel(*l));
        }
    }
    Ok(())
}

/// The Bell state `kind` of photons `a` (first) and `b` (second).
pub fn bell_state(kind: BellKind, a: PhotonId, b: PhotonId) -> StateVector {
    assert_ne!(a, b, "Bell state needs two distinct photons");
    StateVector {
        labels: vec![a, b],
        amps: kind.amplitudes().to_vec(),
    }
}

/// Kronecker product; labels of `a` come first.
pub fn tensor(a: &StateVector, b: &StateVector) -> Result<StateVector> {
    if let Some(l) = b.labels.iter().find(|l| a.labels.contains(l)) {
        return Err(Error::DuplicateLabel(*l));
    }
    let mut labels = a.labels.clone();
    labels.extend_from_slice(&b.labels);
    let amps = a
        .amps
        .iter()
        .flat_map(|x| b.amps.iter().map(move |y| x * y))
        .collect();
    Ok(StateVector { labels, amps })
}

/// One term `coefficient · |kind⟩₁₂ ⊗ |residual⟩₃` of a teleportation
/// decomposition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BellBranch {
    pub kind: BellKind,
    pub coefficient: C64,
    pub residual: Qubit,
}

fn require_psi_minus(pair: &StateVector) -> Result<()> {
    if pair.photon_count() != 2 {
        return Err(Error::PhotonCount(pair.photon_count()));
    }
    let psi = bell_state(BellKind::PsiMinus, pair.labels[0], pair.labels[1]);
    let f = psi.fidelity(pair)?;
    if (f - 1.0).abs() > 1e-9 {
        return Err(Error::NotPsiMinus(f));
    }
    Ok(())
}

/// Expand `|input⟩₁ ⊗ |pair⟩₂₃` in the Bell basis of photons `{1}` and the
/// first photon of `pair`.
///
/// The input photon is labeled `{1}`; `pair` must not use that label. Each
/// branch carries a positive real coefficient (½ for the PsiMinus resource)
/// and the normalized residual of the second pair photon, signs included.
pub fn bell_decompose_12(input: &Qubit, pair: &StateVector) -> Result<[BellBranch; 4]> {
    Qubit::new(input.alpha, input.beta)?;
    require_psi_minus(pair)?;
    let one = PhotonId(1);
    let joint = tensor(&input.to_state(one), pair)?;
    let partner = pair.labels[0];
    let mut out = [BellBranch {
        kind: BellKind::PsiMinus,
        coefficient: C64::new(0.0, 0.0),
        residual: Qubit::plus(),
    }; 4];
    for (slot, kind) in out.iter_mut().zip(BellKind::ALL) {
        let (_, u) = joint.contract(&bell_state(kind, one, partner))?;
        let weight = (u[0].norm_sqr() + u[1].norm_sqr()).sqrt();
        *slot = BellBranch {
            kind,
            coefficient: C64::new(weight, 0.0),
            residual: Qubit::normalized(u[0], u[1])?,
        };
    }
    Ok(out)
}

/// Rebuild `Σ c_k |k⟩₁₂ ⊗ |r_k⟩₃` from teleportation branches.
pub fn reconstruct_12(
    branches: &[BellBranch],
    one: PhotonId,
    two: PhotonId,
    three: PhotonId,
) -> Result<StateVector> {
    let mut amps = vec![C64::new(0.0, 0.0); 8];
    for b in branches {
        let term = tensor(&bell_state(b.kind, one, two), &b.residual.to_state(three))?;
        for (acc, x) in amps.iter_mut().zip(&term.amps) {
            *acc += b.coefficient * x;
        }
    }
    Ok(StateVector {
        labels: vec![one, two, three],
        amps,
    })
}

/// One term `coefficient · |kind_03⟩ ⊗ |kind_12⟩` of the four-photon
/// entanglement-swapping expansion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwapBranch {
    pub kind_12: BellKind,
    pub kind_03: BellKind,
    pub coefficient: C64,
}

/// Expand `|pair01⟩ ⊗ |pair23⟩` in the Bell bases of the inner photons
/// (second of `pair01`, first of `pair23`) and the outer photons.
pub fn bell_decompose_swap(pair01: &StateVector, pair23: &StateVector) -> Result<[SwapBranch; 4]> {
    require_psi_minus(pair01)?;
    require_psi_minus(pair23)?;
    let (zero, one) = (pair01.labels[0], pair01.labels[1]);
    let (two, three) = (pair23.labels[0], pair23.labels[1]);
    let joint = tensor(pair01, pair23)?;
    let mut out = Vec::with_capacity(4);
    for kind_12 in BellKind::ALL {
        let (rest, u) = joint.contract(&bell_state(kind_12, one, two))?;
        debug_assert_eq!(rest, vec![zero, three]);
        let best = BellKind::ALL
            .into_iter()
            .map(|k| {
                let c: C64 = k
                    .amplitudes()
                    .iter()
                    .zip(&u)
                    .map(|(a, b)| a.conj() * b)
                    .sum();
                (k, c)
            })
            .max_by(|a, b| a.1.norm_sqr().total_cmp(&b.1.norm_sqr()))
            .expect("four candidates");
        out.push(SwapBranch {
            kind_12,
            kind_03: best.0,
            coefficient: best.1,
        });
    }
    Ok(out.try_into().expect("four branches"))
}

/// Rebuild the four-photon state from swap branches in label order
/// `[zero, one, two, three]`.
pub fn reconstruct_swap(branches: &[SwapBranch], labels: [PhotonId; 4]) -> Result<StateVector> {
    let [zero, one, two, three] = labels;
    let mut amps = vec![C64::new(0.0, 0.0); 16];
    for b in branches {
        let term = tensor(
            &bell_state(b.kind_03, zero, three),
            &bell_state(b.kind_12, one, two),
        )?
        .reorder(&labels)?;
        for (acc, x) in amps.iter_mut().zip(&term.amps) {
            *acc += b.coefficient * x;
        }
    }
    Ok(StateVector {
        labels: labels.to_vec(),
        amps,
    })
}

/// Outcome of a projective polarization measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub outcome: Spin,
    pub collapsed: StateVector,
    pub probability: f64,
}

/// Projectors onto `|θ⟩` and `|θ+90°⟩`.
pub(crate) fn basis_projectors(angle: f64) -> ([[C64; 2]; 2], [[C64; 2]; 2]) {
    let (s, c) = angle.to_radians().sin_cos();
    let r = |x: f64| C64::new(x, 0.0);
    let plus = [[r(c * c), r(c * s)], [r(c * s), r(s * s)]];
    let minus = [[r(s * s), r(-c * s)], [r(-c * s), r(c * c)]];
    (plus, minus)
}

/// Born-rule measurement of photon `label` in the basis rotated by `angle`
/// degrees (`+` along `angle`, `−` along `angle + 90°`).
pub fn measure_projective<R: Rng + ?Sized>(
    state: &StateVector,
    label: PhotonId,
    angle: f64,
    rng: &mut R,
) -> Result<Measurement> {
    let (p_plus_op, p_minus_op) = basis_projectors(angle);
    let plus = state.apply_single_raw(label, &p_plus_op)?;
    let p_plus = snap_probability(plus.norm_sqr() / state.norm_sqr());
    let (outcome, raw, probability) = if bernoulli(rng, p_plus) {
        (Spin::Plus, plus, p_plus)
    } else {
        let minus = state.apply_single_raw(label, &p_minus_op)?;
        (Spin::Minus, minus, 1.0 - p_plus)
    };
    let collapsed = raw
        .normalize()
        .ok_or_else(|| Error::Invalid("measurement branch has zero weight".into()))?;
    Ok(Measurement {
        outcome,
        collapsed,
        probability,
    })
}

/// Bob's correction for the announced Bell outcome. Only the tag and the
/// photon's own state enter, never the analyzed photons.
pub fn apply_correction(kind: BellKind, q: &Qubit) -> Qubit {
    let (a, b) = (q.alpha, q.beta);
    let (alpha, beta) = match kind {
        BellKind::PsiMinus => (a, b),
        BellKind::PsiPlus => (-a, b),
        BellKind::PhiMinus => (b, a),
        BellKind::PhiPlus => (b, -a),
    };
    Qubit { alpha, beta }
}

/// Projector `|kind⟩⟨kind|` on a photon pair.
pub(crate) fn bell_projector(kind: BellKind) -> [[C64; 4]; 4] {
    let v = kind.amplitudes();
    let mut m = [[C64::new(0.0, 0.0); 4]; 4];
    for r in 0..4 {
        for c in 0..4 {
            m[r][c] = v[r] * v[c].conj();
        }
    }
    m
}

/// Outcome of a complete Bell-state analysis on two photons.
#[derive(Debug, Clone, PartialEq)]
pub struct BellMeasurement {
    pub kind: BellKind,
    pub probability: f64,
    /// Normalized state of the photons that were not analyzed.
    pub residual: StateVector,
}

/// Sample one of the four Bell projections of photons `(a, b)`.
pub fn bell_measure<R: Rng + ?Sized>(
    state: &StateVector,
    a: PhotonId,
    b: PhotonId,
    rng: &mut R,
) -> Result<BellMeasurement> {
    let mut weights = [0.0; 4];
    let mut residuals = Vec::with_capacity(4);
    for kind in BellKind::ALL {
        let (rest, u) = state.contract(&bell_state(kind, a, b))?;
        weights[kind.index()] = u.iter().map(|x| x.norm_sqr()).sum();
        residuals.push((rest, u));
    }
    let total: f64 = weights.iter().sum();
    let mut x = rng.random::<f64>() * total;
    let mut pick = 3;
    for (i, w) in weights.iter().enumerate() {
        if *w > 0.0 && x < *w {
            pick = i;
            break;
        }
        x -= w;
    }
    while weights[pick] == 0.0 {
        pick -= 1;
    }
    let (rest, u) = residuals.swap_remove(pick);
    let residual = StateVector {
        labels: rest,
        amps: u,
    }
    .normalize()
    .expect("sampled branch has weight");
    Ok(BellMeasurement {
        kind: BellKind::ALL[pick],
        probability: weights[pick] / total,
        residual,
    })
}
