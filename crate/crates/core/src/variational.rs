//! Adiabatic coherent-state model of a single packet.
//!
//! Each packet is a product of a TLS state and a coherent state `|z⟩`. The TLS
//! part follows one instantaneous eigenvector `φ₁` or `φ₂` of
//!
//! ```text
//! H_TLS(z) = [[0, g z* − f], [g z − f, 0]]
//! ```
//!
//! with eigenfrequencies `ω₁/₂ = ∓|g z − f|`, and the coherent amplitude obeys
//!
//! ```text
//! i dz/dt = δ z ∓ (g/2) (z − f/g)/|z − f/g|
//! ```
//!
//! which conserves `E = δ|z|² ∓ |g z − f|`.

use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};

use num_complex::Complex64 as C64;

use crate::{
    classifier::{classify, DynamicalClass},
    error::{Error, Result},
    model::SystemParams,
};

/// Eigenbranch label: `One` has `ω = −|g z − f|`, `Two` has `ω = +|g z − f|`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Branch {
    One,
    Two,
}

impl Branch {
    /// `−1` for branch 1, `+1` for branch 2 (the lower/upper sign of `∓`).
    pub fn sign(self) -> f64 {
        match self {
            Self::One => -1.0,
            Self::Two => 1.0,
        }
    }

    pub fn index(self) -> u8 {
        match self {
            Self::One => 1,
            Self::Two => 2,
        }
    }

    pub fn from_index(j: u8) -> Result<Self> {
        match j {
            1 => Ok(Self::One),
            2 => Ok(Self::Two),
            other => Err(Error::InvalidParameter(format!("branch must be 1 or 2, got {other}"))),
        }
    }

    pub fn other(self) -> Self {
        match self {
            Self::One => Self::Two,
            Self::Two => Self::One,
        }
    }

    pub const BOTH: [Branch; 2] = [Branch::One, Branch::Two];
}

/// One packet of the reduced model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BranchState {
    pub branch: Branch,
    pub z: C64,
    pub weight: f64,
    /// Accumulated adiabatic phase `∫ ω_j dt`.
    pub phase: f64,
}

impl BranchState {
    pub fn origin(branch: Branch, weight: f64) -> Self {
        Self { branch, z: C64::new(0.0, 0.0), weight, phase: 0.0 }
    }
}

/// Instantaneous eigenpair of `H_TLS(z)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TlsEigenpair {
    pub omega: f64,
    pub phi_g: C64,
    pub phi_x: C64,
}

impl TlsEigenpair {
    /// `λ = |⟨Φ⁺|φ⟩|² − |⟨Φ⁻|φ⟩|² = 2 Re(φ_G* φ_X)`.
    pub fn lds_overlap(&self) -> f64 {
        2.0 * (self.phi_g.conj() * self.phi_x).re
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> C64 {
        self.phi_g.conj() * other.phi_g + self.phi_x.conj() * other.phi_x
    }
}

/// Default radius of the disk around `z = f/g` (in units of `|g z − f|`)
/// treated as the degenerate point.
pub fn degeneracy_floor(f: f64, params: &SystemParams) -> f64 {
    if f > 0.0 {
        1e-9 * f
    } else {
        1e-9 * params.g()
    }
}

/// Eigenpair of `H_TLS(z)` for the given branch, with `φ_G` real positive and
/// `φ_G* φ_X = ∓ (1/2) (g z − f)/|g z − f|`.
pub fn tls_eigenpair(z: C64, f: f64, params: &SystemParams, branch: Branch) -> Result<TlsEigenpair> {
    tls_eigenpair_with_floor(z, f, params, branch, degeneracy_floor(f, params))
}

pub fn tls_eigenpair_with_floor(
    z: C64,
    f: f64,
    params: &SystemParams,
    branch: Branch,
    floor: f64,
) -> Result<TlsEigenpair> {
    let c = params.g() * z - f;
    let gap = c.norm();
    if gap <= floor {
        return Err(Error::DegeneratePoint { z, gap });
    }
    let s = branch.sign();
    Ok(TlsEigenpair {
        omega: s * gap,
        phi_g: C64::new(FRAC_1_SQRT_2, 0.0),
        phi_x: s * c / gap * FRAC_1_SQRT_2,
    })
}

/// `λ₁/₂(z) = ∓ sgn(Re z − f/g) (1 + Im(z)²/(Re z − f/g)²)^{−1/2}`.
pub fn lambda_of_z(z: C64, f: f64, params: &SystemParams, branch: Branch) -> Result<f64> {
    let g = params.g();
    let gap = (g * z - f).norm();
    if gap <= degeneracy_floor(f, params) {
        return Err(Error::DegeneratePoint { z, gap });
    }
    let x = z.re - f / g;
    if x == 0.0 {
        return Ok(0.0);
    }
    // written as s·x/|z − f/g| to stay finite when |x| ≪ |Im z|
    Ok(branch.sign() * x / x.hypot(z.im))
}

/// `|⟨φ_from(f0), φ_to(f1)⟩|²` evaluated at `z`.
pub fn overlap(z: C64, f0: f64, from: Branch, f1: f64, to: Branch, params: &SystemParams) -> Result<f64> {
    let a = tls_eigenpair(z, f0, params, from)?;
    let b = tls_eigenpair(z, f1, params, to)?;
    Ok(a.inner(&b).norm_sqr())
}

/// Split fraction `S(f0, f1) = |⟨φ₂(f0), φ₁(f1)⟩|²` at `z`.
pub fn overlap_s(f0: f64, f1: f64, z: C64, params: &SystemParams) -> Result<f64> {
    overlap(z, f0, Branch::Two, f1, Branch::One, params)
}

/// Branch energy `δ|z|² ∓ |g z − f|`.
pub fn branch_energy(z: C64, f: f64, params: &SystemParams, branch: Branch) -> f64 {
    params.delta() * z.norm_sqr() + branch.sign() * (params.g() * z - f).norm()
}

/// Right-hand side `dz/dt` of the adiabatic equation of motion.
pub fn adiabatic_rhs(z: C64, f: f64, params: &SystemParams, branch: Branch, floor: f64) -> Option<C64> {
    let g = params.g();
    let w = z - f / g;
    let r = w.norm();
    if g * r <= floor {
        return None;
    }
    let rhs = params.delta() * z + branch.sign() * 0.5 * g * w / r;
    Some(C64::new(rhs.im, -rhs.re))
}

/// Integration settings for [`evolve_branch`].
#[derive(Clone, Debug, Default)]
pub struct BranchOptions {
    /// `None` selects [`default_branch_dt`].
    pub dt: Option<f64>,
    /// Record every `stride`-th step (0 is treated as 1).
    pub stride: usize,
    /// Degeneracy disk radius in units of `|g z − f|`; `None` selects
    /// [`degeneracy_floor`].
    pub floor: Option<f64>,
}

/// Step size `1e-3 × min(2π/δ, 4π f/g²)`.
pub fn default_branch_dt(f: f64, params: &SystemParams) -> f64 {
    let g = params.g();
    let mut period = f64::INFINITY;
    if params.delta() > 0.0 {
        period = period.min(TAU / params.delta());
    }
    if f > 0.0 {
        period = period.min(2.0 * TAU * f / (g * g));
    }
    if !period.is_finite() {
        period = TAU / g;
    }
    1e-3 * period
}

/// Sampled solution of the adiabatic equation for one branch at constant `f`.
#[derive(Clone, Debug)]
pub struct BranchTrajectory {
    pub branch: Branch,
    pub f: f64,
    pub dt: f64,
    pub times: Vec<f64>,
    pub z: Vec<C64>,
    /// `E(z(t)) − E(z(t₀))`.
    pub energy_residual: Vec<f64>,
    /// Adiabatic phase at each sample.
    pub phase: Vec<f64>,
}

impl BranchTrajectory {
    pub fn last_state(&self, weight: f64) -> BranchState {
        BranchState {
            branch: self.branch,
            z: *self.z.last().unwrap(),
            weight,
            phase: *self.phase.last().unwrap(),
        }
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn lambda(&self, params: &SystemParams) -> Vec<f64> {
        self.z
            .iter()
            .map(|&z| lambda_of_z(z, self.f, params, self.branch).unwrap_or(0.0))
            .collect()
    }

    pub fn max_abs2(&self) -> f64 {
        self.z.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max)
    }

    /// Times at which `Im z` changes sign (linear interpolation), skipping
    /// the initial sample.
    pub fn real_axis_crossings(&self) -> Vec<(f64, C64)> {
        let mut out = Vec::new();
        for k in 1..self.z.len().saturating_sub(1) {
            let (a, b) = (self.z[k], self.z[k + 1]);
            if a.im == 0.0 && k > 1 {
                out.push((self.times[k], a));
            } else if a.im * b.im < 0.0 {
                let s = a.im / (a.im - b.im);
                out.push((self.times[k] + s * (self.times[k + 1] - self.times[k]), a + (b - a) * s));
            }
        }
        out
    }

    /// First return of the trajectory to the real axis, i.e. the time from
    /// `z(t₀)` to the opposite turning point when started on the real axis.
    pub fn first_real_axis_return(&self) -> Option<(f64, C64)> {
        self.real_axis_crossings().into_iter().next()
    }
}

/// Integrates the adiabatic equation with classic RK4 from `z0` at `t = 0`.
pub fn evolve_branch(
    z0: C64,
    branch: Branch,
    f: f64,
    params: &SystemParams,
    t_end: f64,
    opts: &BranchOptions,
) -> Result<BranchTrajectory> {
    evolve_branch_from(&BranchState { branch, z: z0, weight: 1.0, phase: 0.0 }, 0.0, f, params, t_end, opts)
}

/// Integrates from `start` at time `t0` for `duration`.
///
/// Fails with [`Error::NearDegeneracy`] the first time any RK stage gets
/// within the degeneracy floor of `z = f/g`.
pub fn evolve_branch_from(
    start: &BranchState,
    t0: f64,
    f: f64,
    params: &SystemParams,
    duration: f64,
    opts: &BranchOptions,
) -> Result<BranchTrajectory> {
    if !(duration.is_finite() && duration >= 0.0) {
        return Err(Error::InvalidParameter(format!("duration must be >= 0, got {duration}")));
    }
    let floor = opts.floor.unwrap_or_else(|| degeneracy_floor(f, params));
    let dt_target = match opts.dt {
        Some(dt) if dt.is_finite() && dt > 0.0 => dt,
        Some(dt) => return Err(Error::InvalidParameter(format!("dt must be > 0, got {dt}"))),
        None => default_branch_dt(f, params),
    };
    let n_steps = (duration / dt_target).ceil() as usize;
    let dt = if n_steps > 0 { duration / n_steps as f64 } else { dt_target };
    let stride = opts.stride.max(1);
    let branch = start.branch;
    let e0 = branch_energy(start.z, f, params, branch);

    let rhs = |z: C64, t: f64| -> Result<(C64, f64)> {
        let dz = adiabatic_rhs(z, f, params, branch, floor).ok_or(Error::NearDegeneracy { time: t, z })?;
        Ok((dz, branch.sign() * (params.g() * z - f).norm()))
    };

    let mut traj = BranchTrajectory {
        branch,
        f,
        dt,
        times: vec![t0],
        z: vec![start.z],
        energy_residual: vec![0.0],
        phase: vec![start.phase],
    };
    let (mut z, mut phase) = (start.z, start.phase);
    for k in 0..n_steps {
        let t = t0 + k as f64 * dt;
        let (k1, p1) = rhs(z, t)?;
        let (k2, p2) = rhs(z + k1 * (0.5 * dt), t + 0.5 * dt)?;
        let (k3, p3) = rhs(z + k2 * (0.5 * dt), t + 0.5 * dt)?;
        let (k4, p4) = rhs(z + k3 * dt, t + dt)?;
        z += (k1 + 2.0 * k2 + 2.0 * k3 + k4) * (dt / 6.0);
        phase += (p1 + 2.0 * p2 + 2.0 * p3 + p4) * (dt / 6.0);
        if (k + 1) % stride == 0 || k + 1 == n_steps {
            traj.times.push(t0 + (k + 1) as f64 * dt);
            traj.z.push(z);
            traj.energy_residual.push(branch_energy(z, f, params, branch) - e0);
            traj.phase.push(phase);
        }
    }
    Ok(traj)
}

/// Real turning point `z̃` of the trajectory started at `z = 0`.
pub fn turning_point(branch: Branch, f: f64, params: &SystemParams) -> f64 {
    let (g, delta) = (params.g(), params.delta());
    if delta == 0.0 {
        return 2.0 * f / g;
    }
    let x = 8.0 * f * delta / (g * g);
    match branch {
        Branch::One if delta <= g * g / (8.0 * f) => g / (2.0 * delta) * (1.0 - (1.0 - x).sqrt()),
        Branch::One => -g / delta,
        Branch::Two if delta <= g * g / f => g / (2.0 * delta) * ((1.0 + x).sqrt() - 1.0),
        Branch::Two => g / delta,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrequencyEstimate {
    pub omega: f64,
    /// `false` outside class D, where the expansion does not apply.
    pub valid: bool,
}

/// Packet oscillation frequency `Ω₁/₂ = δ/√(1 ± g²/(2fδ))`.
pub fn oscillation_frequency(branch: Branch, f: f64, params: &SystemParams) -> FrequencyEstimate {
    let (g, delta) = (params.g(), params.delta());
    let a = g * g / (2.0 * f * delta);
    let omega = match branch {
        Branch::One => delta / (1.0 + a).sqrt(),
        Branch::Two => delta / (1.0 - a).sqrt(),
    };
    let valid = omega.is_finite()
        && f > 0.0
        && matches!(classify(f, delta, params), Ok(rc) if rc.label == DynamicalClass::D);
    FrequencyEstimate { omega, valid }
}

/// Exact resonant (`δ = 0`) solution `z(t) = (f/g)(1 − exp(±i g² t/(2f)))`.
pub fn closed_form_resonant(t: f64, f: f64, params: &SystemParams, branch: Branch) -> C64 {
    let g = params.g();
    let angle = -branch.sign() * g * g * t / (2.0 * f);
    (f / g) * (1.0 - C64::from_polar(1.0, angle))
}

/// Large-detuning limit `z(t) = ∓ (g/2δ)(1 − e^{−iδt})`.
pub fn closed_form_large_detuning(t: f64, params: &SystemParams, branch: Branch) -> Result<C64> {
    let (g, delta) = (params.g(), params.delta());
    if delta <= 0.0 {
        return Err(Error::DomainViolation {
            quantity: "large-detuning solution",
            reason: "requires delta > 0".into(),
        });
    }
    Ok(branch.sign() * g / (2.0 * delta) * (1.0 - C64::from_polar(1.0, -delta * t)))
}

/// Half period `π/Ω` predicted by [`oscillation_frequency`].
pub fn predicted_half_period(branch: Branch, f: f64, params: &SystemParams) -> f64 {
    PI / oscillation_frequency(branch, f, params).omega
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(delta: f64) -> SystemParams {
        SystemParams::new(1.0, delta).unwrap()
    }

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn eigenpairs_at_origin_are_the_lds() {
        let params = p(0.1);
        let e1 = tls_eigenpair(c(0.0, 0.0), 5.0, &params, Branch::One).unwrap();
        assert_eq!(e1.omega, -5.0);
        assert!((e1.phi_x - c(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
        let e2 = tls_eigenpair(c(0.0, 0.0), 5.0, &params, Branch::Two).unwrap();
        assert_eq!(e2.omega, 5.0);
        assert!((e2.phi_x + c(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn eigenpair_solves_the_tls_problem() {
        let params = p(0.2);
        let (z, f) = (c(1.3, -2.1), 4.0);
        for b in Branch::BOTH {
            let e = tls_eigenpair(z, f, &params, b).unwrap();
            let c_ = params.g() * z - f;
            // H φ = ω φ with H = [[0, c*], [c, 0]]
            assert!((c_.conj() * e.phi_x - e.omega * e.phi_g).norm() < 1e-14);
            assert!((c_ * e.phi_g - e.omega * e.phi_x).norm() < 1e-14);
            assert!((e.phi_g.norm() - FRAC_1_SQRT_2).abs() < 1e-15);
            assert!((e.phi_x.norm() - FRAC_1_SQRT_2).abs() < 1e-15);
            assert!((e.lds_overlap() - lambda_of_z(z, f, &params, b).unwrap()).abs() < 1e-14);
        }
    }

    #[test]
    fn roles_reverse_beyond_f_over_g() {
        let params = p(0.1);
        let e = tls_eigenpair(c(7.0, 0.0), 5.0, &params, Branch::One).unwrap();
        // φ₁ = Φ⁻ = (1, −1)/√2
        assert!((e.phi_x + c(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn degenerate_point_is_rejected() {
        let params = p(0.1);
        let err = tls_eigenpair(c(5.0, 0.0), 5.0, &params, Branch::One).unwrap_err();
        assert!(matches!(err, Error::DegeneratePoint { .. }));
        assert!(lambda_of_z(c(5.0, 0.0), 5.0, &params, Branch::Two).is_err());
    }

    #[test]
    fn lambda_examples() {
        let params = p(0.1);
        let f = 5.0;
        assert_eq!(lambda_of_z(c(2.0, 0.0), f, &params, Branch::One).unwrap(), 1.0);
        assert_eq!(lambda_of_z(c(2.0, 0.0), f, &params, Branch::Two).unwrap(), -1.0);
        assert_eq!(lambda_of_z(c(5.0, 3.0), f, &params, Branch::One).unwrap(), 0.0);
        let l = lambda_of_z(c(7.0, 2.0), f, &params, Branch::One).unwrap();
        assert!((l + FRAC_1_SQRT_2).abs() < 1e-15);
        // Re z = 0, Im z = f/g: magnitude 1/√2
        let l = lambda_of_z(c(0.0, f), f, &params, Branch::One).unwrap();
        assert!((l.abs() - FRAC_1_SQRT_2).abs() < 1e-15);
        let e = tls_eigenpair(c(0.0, f), f, &params, Branch::One).unwrap();
        assert!(((e.phi_g.conj() * e.phi_x).norm() - 0.5).abs() < 1e-15);
        assert!(((e.phi_g.conj() * e.phi_x).re.abs() - 0.5 * FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn overlap_examples() {
        let params = p(0.1);
        assert!(overlap_s(5.0, 15.0, c(0.0, 0.0), &params).unwrap() < 1e-30);
        assert!((overlap_s(5.0, 15.0, c(8.0, 0.0), &params).unwrap() - 1.0).abs() < 1e-15);
        assert!(overlap_s(5.0, 15.0, c(3.0, 0.0), &params).unwrap() < 1e-30);
        assert!(overlap_s(5.0, 5.0, c(3.0, 1.0), &params).unwrap() < 1e-30);
    }

    #[test]
    fn turning_point_examples() {
        let params = p(0.2);
        // δ = g²/f exactly: z̃₂ = f/g
        assert!((turning_point(Branch::Two, 5.0, &params) - 5.0).abs() < 1e-12);
        assert_eq!(turning_point(Branch::One, 5.0, &p(0.1)), -10.0);
        assert_eq!(turning_point(Branch::Two, 15.0, &p(0.1)), 10.0);
        assert_eq!(turning_point(Branch::One, 7.0, &p(0.0)), 14.0);
        for b in Branch::BOTH {
            assert!((turning_point(b, 5.0, &p(1e-9)) - 10.0).abs() < 1e-6);
        }
    }

    #[test]
    fn frequency_examples() {
        let params = p(0.1);
        let o1 = oscillation_frequency(Branch::One, 15.0, &params);
        let o2 = oscillation_frequency(Branch::Two, 15.0, &params);
        assert!((o1.omega - 0.1 / (4.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((o2.omega - 0.1 / (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!(o1.valid && o2.valid);
        assert!((o1.omega - 0.0866).abs() < 1e-4 && (o2.omega - 0.1225).abs() < 1e-4);
        let big = p(1e6);
        for b in Branch::BOTH {
            assert!((oscillation_frequency(b, 15.0, &big).omega / 1e6 - 1.0).abs() < 1e-7);
        }
        let a = oscillation_frequency(Branch::Two, 5.0, &p(0.007));
        assert!(!a.valid);
    }

    #[test]
    fn closed_form_examples() {
        let params = p(0.0);
        let f = 5.0;
        let top = closed_form_resonant(TAU * f, f, &params, Branch::One);
        assert!((top - c(2.0 * f, 0.0)).norm() < 1e-12);
        assert_eq!(closed_form_resonant(0.0, f, &params, Branch::Two), c(0.0, 0.0));
        let params = p(0.5);
        let z = closed_form_large_detuning(PI / 0.5, &params, Branch::Two).unwrap();
        assert!((z - c(2.0, 0.0)).norm() < 1e-12);
        assert_eq!(closed_form_large_detuning(0.0, &params, Branch::One).unwrap(), c(0.0, 0.0));
        assert!(closed_form_large_detuning(1.0, &p(0.0), Branch::One).is_err());
    }

    #[test]
    fn resonant_integration_tracks_the_circle() {
        let params = p(0.0);
        let f = 5.0;
        let traj = evolve_branch(c(0.0, 0.0), Branch::One, f, &params, 2.0 * TAU * 2.0 * f, &BranchOptions::default()).unwrap();
        for (&t, &z) in traj.times.iter().zip(&traj.z) {
            assert!((z - closed_form_resonant(t, f, &params, Branch::One)).norm() < 1e-6 * f);
            assert!(((z - f).norm() - f).abs() < 1e-8);
        }
    }

    #[test]
    fn near_degeneracy_is_reported() {
        let params = p(0.0);
        // start on the degenerate point itself
        let err = evolve_branch(c(5.0, 0.0), Branch::One, 5.0, &params, 1.0, &BranchOptions::default()).unwrap_err();
        assert!(matches!(err, Error::NearDegeneracy { time, .. } if time == 0.0));
        // a generous floor turns a close pass into a reported contact
        let opts = BranchOptions { floor: Some(2.0), ..Default::default() };
        let err = evolve_branch(c(2.0, 0.0), Branch::Two, 5.0, &p(0.1), 50.0, &opts).unwrap_err();
        assert!(matches!(err, Error::NearDegeneracy { .. }));
    }

    #[test]
    fn adiabatic_phase_matches_eigenfrequency_at_rest() {
        // δ = 0, large f: z stays close to 0 for a short time, ω ≈ ∓f
        let params = p(0.0);
        let traj = evolve_branch(c(0.0, 0.0), Branch::Two, 100.0, &params, 0.1, &BranchOptions::default()).unwrap();
        assert!((traj.phase.last().unwrap() - 10.0).abs() < 1e-3);
    }
}
