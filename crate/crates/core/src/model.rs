//! Physical parameterization of the driven Jaynes-Cummings model in the frame
//! rotating with the drive: system constants, piecewise-constant drive
//! protocols, truncated bare-basis states, the matrix-free Hamiltonian and the
//! laser-dressed-state (LDS) transform.
//!
//! Units: ħ = 1 and all frequencies are expressed in the same unit as `g`
//! (conventionally `g = 1`, so times are `g t`).

use std::{f64::consts::FRAC_1_SQRT_2, fmt, str::FromStr};

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Number of top photon levels whose occupation defines the truncation tail.
pub const TAIL_LEVELS: usize = 5;

/// Default tail occupation above which a state counts as under-truncated.
pub const DEFAULT_TAIL_THRESHOLD: f64 = 1e-10;

/// Coupling `g` and cavity-drive detuning `delta = ω_C − ω_L`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SystemParams {
    g: f64,
    delta: f64,
}

impl SystemParams {
    /// Negative detuning is rejected: the turning-point and class-boundary
    /// closed forms only cover `delta >= 0`.
    pub fn new(g: f64, delta: f64) -> Result<Self> {
        if !(g.is_finite() && g > 0.0) {
            return Err(Error::InvalidParameter(format!("coupling g must be finite and > 0, got {g}")));
        }
        if !delta.is_finite() {
            return Err(Error::InvalidParameter(format!("detuning must be finite, got {delta}")));
        }
        if delta < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "negative detuning {delta} is not supported"
            )));
        }
        Ok(Self { g, delta })
    }

    /// `g = 1` units.
    pub fn with_detuning(delta: f64) -> Result<Self> {
        Self::new(1.0, delta)
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Skips validation; lets unit tests switch the coupling off.
    #[cfg(test)]
    pub(crate) fn raw(g: f64, delta: f64) -> Self {
        Self { g, delta }
    }
}

/// One level of a piecewise-constant drive: `f` applies from `tau` until the
/// next step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriveStep {
    pub tau: f64,
    pub f: f64,
}

/// Piecewise-constant driving strength `f(t)`.
///
/// The first level always starts at `tau = 0`. Intervals are right-open, so
/// at a step time the new level is already in effect.
#[derive(Clone, Debug, PartialEq)]
pub struct DriveProtocol {
    levels: Vec<DriveStep>,
}

impl DriveProtocol {
    pub fn constant(f: f64) -> Result<Self> {
        Self::new(vec![DriveStep { tau: 0.0, f }])
    }

    /// Builds a protocol from its levels; the first must start at 0, step
    /// times must be strictly increasing and all levels non-negative.
    pub fn new(levels: Vec<DriveStep>) -> Result<Self> {
        let first = levels
            .first()
            .ok_or_else(|| Error::InvalidProtocol("protocol has no levels".into()))?;
        if first.tau != 0.0 {
            return Err(Error::InvalidProtocol(format!(
                "first level must start at tau = 0, got {}",
                first.tau
            )));
        }
        for (k, step) in levels.iter().enumerate() {
            if !step.tau.is_finite() || !step.f.is_finite() {
                return Err(Error::InvalidProtocol(format!("level {k} is not finite")));
            }
            if step.f < 0.0 {
                return Err(Error::InvalidProtocol(format!(
                    "level {k} has negative driving strength {}",
                    step.f
                )));
            }
        }
        for pair in levels.windows(2) {
            if pair[1].tau <= pair[0].tau {
                return Err(Error::InvalidProtocol(format!(
                    "step times must be strictly increasing ({} after {})",
                    pair[1].tau, pair[0].tau
                )));
            }
        }
        Ok(Self { levels })
    }

    /// Appends a new level starting at `tau`.
    pub fn push_step(&mut self, tau: f64, f: f64) -> Result<()> {
        let mut levels = self.levels.clone();
        levels.push(DriveStep { tau, f });
        *self = Self::new(levels)?;
        Ok(())
    }

    pub fn levels(&self) -> &[DriveStep] {
        &self.levels
    }

    /// Step times after the initial level.
    pub fn step_times(&self) -> impl Iterator<Item = f64> + '_ {
        self.levels.iter().skip(1).map(|s| s.tau)
    }

    pub fn initial_level(&self) -> f64 {
        self.levels[0].f
    }

    pub fn last_level(&self) -> DriveStep {
        *self.levels.last().unwrap()
    }

    pub fn f_max(&self) -> f64 {
        self.levels.iter().map(|s| s.f).fold(0.0, f64::max)
    }

    /// Index of the level in effect at time `t`.
    pub fn level_index(&self, t: f64) -> usize {
        self.levels.partition_point(|s| s.tau <= t).saturating_sub(1)
    }

    /// Driving strength at time `t`.
    pub fn f_at(&self, t: f64) -> f64 {
        self.levels[self.level_index(t)].f
    }
}

/// TLS basis label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Tls {
    Ground,
    Excited,
}

/// Initial-state presets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum InitialKind {
    /// `|G,0⟩`
    Ground,
    /// `|Φ⁺,0⟩ = (|G,0⟩ + |X,0⟩)/√2`
    LdsPlus,
    /// `|Φ⁻,0⟩ = (|G,0⟩ − |X,0⟩)/√2`
    LdsMinus,
}

impl InitialKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Ground => "ground",
            Self::LdsPlus => "lds_plus",
            Self::LdsMinus => "lds_minus",
        }
    }
}

impl fmt::Display for InitialKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InitialKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "ground" => Ok(Self::Ground),
            "lds_plus" => Ok(Self::LdsPlus),
            "lds_minus" => Ok(Self::LdsMinus),
            other => Err(Error::Config(format!(
                "unknown initial state '{other}' (expected ground, lds_plus or lds_minus)"
            ))),
        }
    }
}

/// State vector in the truncated bare basis `{|G,n⟩, |X,n⟩ : n = 0..=n_max}`.
///
/// Amplitudes are stored interleaved: index `2n` holds `⟨G,n|Ψ⟩` and index
/// `2n + 1` holds `⟨X,n|Ψ⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct FockState {
    n_max: usize,
    amps: Vec<C64>,
    pub time: f64,
}

impl FockState {
    pub fn zeros(n_max: usize) -> Self {
        Self { n_max, amps: vec![C64::new(0.0, 0.0); 2 * (n_max + 1)], time: 0.0 }
    }

    /// Single bare basis state `|tls, n⟩`.
    pub fn basis(tls: Tls, n: usize, n_max: usize) -> Result<Self> {
        if n > n_max {
            return Err(Error::InvalidParameter(format!("photon number {n} exceeds truncation {n_max}")));
        }
        let mut state = Self::zeros(n_max);
        *state.amp_mut(tls, n) = C64::new(1.0, 0.0);
        Ok(state)
    }

    /// Builds a state from the two amplitude ladders (equal lengths).
    pub fn from_ladders(ground: &[C64], excited: &[C64]) -> Result<Self> {
        if ground.len() != excited.len() || ground.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "ladders must be non-empty with equal lengths ({} vs {})",
                ground.len(),
                excited.len()
            )));
        }
        let amps = ground.iter().zip(excited).flat_map(|(&a, &b)| [a, b]).collect();
        Ok(Self { n_max: ground.len() - 1, amps, time: 0.0 })
    }

    /// Wraps an interleaved amplitude vector.
    pub fn from_interleaved(amps: Vec<C64>, time: f64) -> Result<Self> {
        if amps.len() < 2 || amps.len() % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "interleaved amplitude vector must have even length >= 2, got {}",
                amps.len()
            )));
        }
        Ok(Self { n_max: amps.len() / 2 - 1, amps, time })
    }

    /// Product of the TLS state `alpha |G⟩ + beta |X⟩` with the coherent state
    /// of amplitude `z`, truncated at `n_max` (not renormalized).
    pub fn coherent_product(alpha: C64, beta: C64, z: C64, n_max: usize) -> Self {
        let photon = coherent_amplitudes(z, n_max);
        let mut state = Self::zeros(n_max);
        for (n, c) in photon.into_iter().enumerate() {
            *state.amp_mut(Tls::Ground, n) = alpha * c;
            *state.amp_mut(Tls::Excited, n) = beta * c;
        }
        state
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn amps(&self) -> &[C64] {
        &self.amps
    }

    pub fn amps_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn amp(&self, tls: Tls, n: usize) -> C64 {
        self.amps[index(tls, n)]
    }

    pub fn amp_mut(&mut self, tls: Tls, n: usize) -> &mut C64 {
        &mut self.amps[index(tls, n)]
    }

    pub fn ground_ladder(&self) -> Vec<C64> {
        self.amps.iter().step_by(2).copied().collect()
    }

    pub fn excited_ladder(&self) -> Vec<C64> {
        self.amps.iter().skip(1).step_by(2).copied().collect()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `⟨self|other⟩`; both states must share the truncation.
    pub fn inner(&self, other: &Self) -> C64 {
        debug_assert_eq!(self.n_max, other.n_max);
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn normalize(&mut self) {
        let norm = self.norm_sqr().sqrt();
        if norm > 0.0 {
            self.amps.iter_mut().for_each(|a| *a /= norm);
        }
    }

    /// `a * self + b * other`, keeping the time of `self`.
    pub fn linear_combination(&self, a: C64, other: &Self, b: C64) -> Self {
        debug_assert_eq!(self.n_max, other.n_max);
        let amps = self.amps.iter().zip(&other.amps).map(|(x, y)| a * x + b * y).collect();
        Self { n_max: self.n_max, amps, time: self.time }
    }

    /// Occupation `Σ P_n` of the top [`TAIL_LEVELS`] photon levels.
    pub fn tail_occupation(&self) -> f64 {
        let start = (self.n_max + 1).saturating_sub(TAIL_LEVELS);
        self.amps[2 * start..].iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn is_under_truncated(&self, threshold: f64) -> bool {
        self.tail_occupation() > threshold
    }
}

#[inline]
fn index(tls: Tls, n: usize) -> usize {
    match tls {
        Tls::Ground => 2 * n,
        Tls::Excited => 2 * n + 1,
    }
}

/// Fock amplitudes `e^{-|z|²/2} zⁿ/√n!` for `n = 0..=n_max`, built outward
/// from the Poisson peak so large `|z|` neither underflows nor overflows.
pub fn coherent_amplitudes(z: C64, n_max: usize) -> Vec<C64> {
    let r = z.norm();
    if r == 0.0 {
        let mut out = vec![C64::new(0.0, 0.0); n_max + 1];
        out[0] = C64::new(1.0, 0.0);
        return out;
    }
    // magnitudes via the ratio r/√n outward from the peak, normalized against
    // the untruncated series so the truncated norm stays below one
    let peak = (r * r).floor() as usize;
    let upper = peak.max(n_max) + 40 + (20.0 * r) as usize;
    let mut mag = vec![0.0f64; upper + 1];
    mag[peak] = 1.0;
    for n in peak + 1..=upper {
        mag[n] = mag[n - 1] * r / (n as f64).sqrt();
    }
    for n in (0..peak).rev() {
        mag[n] = mag[n + 1] * ((n + 1) as f64).sqrt() / r;
    }
    let total = mag.iter().map(|m| m * m).sum::<f64>().sqrt();
    let phase = z.arg();
    (0..=n_max).map(|n| C64::from_polar(mag[n] / total, n as f64 * phase)).collect()
}

/// Standard initial states.
pub fn make_initial_state(kind: InitialKind, n_max: usize) -> Result<FockState> {
    if n_max < 1 {
        return Err(Error::InvalidParameter("truncation n_max must be >= 1".into()));
    }
    let mut state = FockState::zeros(n_max);
    let (g0, x0) = match kind {
        InitialKind::Ground => (1.0, 0.0),
        InitialKind::LdsPlus => (FRAC_1_SQRT_2, FRAC_1_SQRT_2),
        InitialKind::LdsMinus => (FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
    };
    *state.amp_mut(Tls::Ground, 0) = C64::new(g0, 0.0);
    *state.amp_mut(Tls::Excited, 0) = C64::new(x0, 0.0);
    Ok(state)
}

/// Result of applying `H` to a truncated state.
#[derive(Clone, Debug)]
pub struct HamiltonianAction {
    pub vector: FockState,
    /// `|g √(N+1) ⟨X,N|Ψ⟩|²`, the squared weight of the coupling into
    /// `|G,N+1⟩` that the truncation drops.
    pub boundary_leak: f64,
}

impl HamiltonianAction {
    pub fn is_under_truncated(&self, threshold: f64) -> bool {
        self.boundary_leak > threshold
    }
}

/// `H Ψ` for `H = δ a†a + g (a σ₊ + a† σ₋) − f (σ₊ + σ₋)`.
pub fn apply_hamiltonian(state: &FockState, params: &SystemParams, f: f64) -> Result<HamiltonianAction> {
    if !(f.is_finite() && f >= 0.0) {
        return Err(Error::InvalidParameter(format!("driving strength must be >= 0, got {f}")));
    }
    let mut vector = FockState::zeros(state.n_max);
    vector.time = state.time;
    apply_hamiltonian_into(&state.amps, params, f, &mut vector.amps);
    let top = state.amp(Tls::Excited, state.n_max);
    let boundary_leak = params.g * params.g * (state.n_max + 1) as f64 * top.norm_sqr();
    Ok(HamiltonianAction { vector, boundary_leak })
}

/// Matrix-free `out = H psi` on interleaved amplitude slices.
///
/// Matrix elements: `δ n` on both ladders, `g √n` between `|X,n−1⟩` and
/// `|G,n⟩`, and `−f` between `|G,n⟩` and `|X,n⟩`.
pub fn apply_hamiltonian_into(psi: &[C64], params: &SystemParams, f: f64, out: &mut [C64]) {
    debug_assert_eq!(psi.len(), out.len());
    let levels = psi.len() / 2;
    let (g, delta) = (params.g, params.delta);
    for n in 0..levels {
        let (pg, px) = (psi[2 * n], psi[2 * n + 1]);
        let diag = delta * n as f64;
        let mut hg = diag * pg - f * px;
        let mut hx = diag * px - f * pg;
        if n > 0 {
            hg += g * (n as f64).sqrt() * psi[2 * n - 1];
        }
        if n + 1 < levels {
            hx += g * ((n + 1) as f64).sqrt() * psi[2 * n + 2];
        }
        out[2 * n] = hg;
        out[2 * n + 1] = hx;
    }
}

/// Amplitudes in the laser-dressed basis `⟨Φ±,n|Ψ⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct LdsAmplitudes {
    pub plus: Vec<C64>,
    pub minus: Vec<C64>,
}

impl LdsAmplitudes {
    pub fn norm_sqr(&self) -> f64 {
        self.plus.iter().chain(&self.minus).map(|a| a.norm_sqr()).sum()
    }
}

/// `⟨Φ±,n|Ψ⟩ = (⟨G,n|Ψ⟩ ± ⟨X,n|Ψ⟩)/√2`.
pub fn to_lds(state: &FockState) -> LdsAmplitudes {
    let (plus, minus) = state
        .amps
        .chunks_exact(2)
        .map(|p| ((p[0] + p[1]) * FRAC_1_SQRT_2, (p[0] - p[1]) * FRAC_1_SQRT_2))
        .unzip();
    LdsAmplitudes { plus, minus }
}

/// Inverse of [`to_lds`].
pub fn from_lds(lds: &LdsAmplitudes, time: f64) -> Result<FockState> {
    let ground: Vec<C64> = lds.plus.iter().zip(&lds.minus).map(|(p, m)| (p + m) * FRAC_1_SQRT_2).collect();
    let excited: Vec<C64> = lds.plus.iter().zip(&lds.minus).map(|(p, m)| (p - m) * FRAC_1_SQRT_2).collect();
    let mut state = FockState::from_ladders(&ground, &excited)?;
    state.time = time;
    Ok(state)
}
