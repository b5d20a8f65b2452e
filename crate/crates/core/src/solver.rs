//! Fixed-step RK4 integration of `i dΨ/dt = H(t) Ψ` in the truncated bare
//! basis, plus the exact-model observables.

use num_complex::Complex64 as C64;

use crate::{
    error::{Error, Result},
    model::{apply_hamiltonian_into, to_lds, DriveProtocol, FockState, SystemParams, Tls, DEFAULT_TAIL_THRESHOLD},
};

/// Target value of `dt * ω_max` for the automatic step size.
pub const DT_SAFETY: f64 = 0.05;

/// Default spacing of recorded samples, in units of 1/g.
pub const DEFAULT_SAMPLE_STRIDE: f64 = 0.1;

/// Default floor on `P_n` below which `ℓ_n` is left undefined.
pub const DEFAULT_LDS_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct EvolveOptions {
    pub t_end: f64,
    /// `None` picks `DT_SAFETY / ω_max`, rounded down so that the sample
    /// stride is an integer number of steps.
    pub dt: Option<f64>,
    pub sample_stride: f64,
    /// Times at which full states are kept (snapped to the step grid).
    pub snapshot_times: Vec<f64>,
    pub record_distribution: bool,
    pub record_lds_measure: bool,
    pub tail_threshold: f64,
    pub norm_tolerance: f64,
    pub lds_floor: f64,
}

impl EvolveOptions {
    pub fn new(t_end: f64) -> Self {
        Self {
            t_end,
            dt: None,
            sample_stride: DEFAULT_SAMPLE_STRIDE,
            snapshot_times: Vec::new(),
            record_distribution: true,
            record_lds_measure: false,
            tail_threshold: DEFAULT_TAIL_THRESHOLD,
            norm_tolerance: 1e-6,
            lds_floor: DEFAULT_LDS_FLOOR,
        }
    }
}

/// Per-sample observables.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observables {
    pub t: f64,
    pub norm: f64,
    pub energy: f64,
    pub mean_n: f64,
    pub lds_inversion: f64,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub observables: Vec<Observables>,
    /// `P_n` per sample, if requested.
    pub distribution: Option<Vec<Vec<f64>>>,
    /// `ℓ_n` per sample, if requested; `None` where `P_n` is below the floor.
    pub lds_measure: Option<Vec<Vec<Option<f64>>>>,
    pub snapshots: Vec<FockState>,
    pub final_state: FockState,
    pub dt: f64,
    pub n_max: usize,
    /// Step times as realized on the integration grid.
    pub step_times: Vec<f64>,
    pub max_norm_drift: f64,
    pub max_tail: f64,
    pub warnings: Vec<String>,
}

/// Rough upper bound on the spectral radius of `H` in the truncated basis.
pub fn omega_max(params: &SystemParams, f_max: f64, n_max: usize) -> f64 {
    let n = n_max as f64;
    2.0 * f_max + params.delta() * n + 2.0 * params.g() * n.sqrt()
}

/// Automatic step size: `DT_SAFETY / ω_max`, shrunk so that `stride` is a
/// whole number of steps.
pub fn default_dt(params: &SystemParams, protocol: &DriveProtocol, n_max: usize, stride: f64) -> f64 {
    let target = DT_SAFETY / omega_max(params, protocol.f_max(), n_max).max(1e-12);
    let per_sample = (stride / target).ceil().max(1.0);
    stride / per_sample
}

/// Integrates the Schrödinger equation from `initial` over `[initial.time,
/// initial.time + t_end]` under `protocol`.
///
/// Step times are snapped to the nearest grid point; the new level is used for
/// the whole step starting there.
pub fn evolve(
    initial: &FockState,
    params: &SystemParams,
    protocol: &DriveProtocol,
    opts: &EvolveOptions,
) -> Result<Trajectory> {
    if !(opts.t_end.is_finite() && opts.t_end >= 0.0) {
        return Err(Error::InvalidParameter(format!("t_end must be >= 0, got {}", opts.t_end)));
    }
    if !(opts.sample_stride.is_finite() && opts.sample_stride > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sample stride must be > 0, got {}",
            opts.sample_stride
        )));
    }
    let n_max = initial.n_max();
    let mut warnings = Vec::new();
    let dt = match opts.dt {
        Some(dt) if dt.is_finite() && dt > 0.0 => dt,
        Some(dt) => return Err(Error::InvalidParameter(format!("dt must be > 0, got {dt}"))),
        None => default_dt(params, protocol, n_max, opts.sample_stride),
    };
    let w_max = omega_max(params, protocol.f_max(), n_max);
    if dt * w_max > 2.5 {
        warnings.push(format!("dt * omega_max = {:.3} is beyond the RK4 stability limit", dt * w_max));
    }

    let t0 = initial.time;
    let n_steps = (opts.t_end / dt).round() as usize;
    if ((n_steps as f64) * dt - opts.t_end).abs() > 1e-9 * dt.max(opts.t_end) {
        warnings.push(format!("t_end {} snapped to {}", opts.t_end, n_steps as f64 * dt));
    }
    let stride_steps = ((opts.sample_stride / dt).round() as usize).max(1);
    if ((stride_steps as f64) * dt - opts.sample_stride).abs() > 1e-9 * opts.sample_stride {
        warnings.push(format!(
            "sample stride {} snapped to {}",
            opts.sample_stride,
            stride_steps as f64 * dt
        ));
    }

    // drive level changes, as step indices on the grid
    let mut level_changes: Vec<(usize, f64)> = Vec::new();
    let mut step_times = Vec::new();
    for step in protocol.levels().iter().skip(1) {
        let rel = step.tau - t0;
        if rel <= 0.0 {
            continue;
        }
        let k = (rel / dt).round() as usize;
        let adjust = (k as f64 * dt - rel).abs();
        if adjust > 1e-9 * dt.max(rel) {
            warnings.push(format!("step time {} snapped to grid point {}", step.tau, t0 + k as f64 * dt));
        }
        step_times.push(t0 + k as f64 * dt);
        level_changes.push((k, step.f));
    }
    let mut f = protocol.f_at(t0);

    let mut snapshot_steps: Vec<usize> = opts
        .snapshot_times
        .iter()
        .map(|&t| (((t - t0) / dt).round().max(0.0) as usize).min(n_steps))
        .collect();
    snapshot_steps.sort_unstable();

    let mut psi = initial.amps().to_vec();
    let mut rk = Rk4Buffers::new(psi.len());
    let mut traj = Trajectory {
        times: Vec::new(),
        observables: Vec::new(),
        distribution: opts.record_distribution.then(Vec::new),
        lds_measure: opts.record_lds_measure.then(Vec::new),
        snapshots: Vec::new(),
        final_state: initial.clone(),
        dt,
        n_max,
        step_times,
        max_norm_drift: 0.0,
        max_tail: 0.0,
        warnings,
    };

    let mut change = level_changes.iter().peekable();
    let mut next_snapshot = snapshot_steps.iter().peekable();
    for k in 0..=n_steps {
        while let Some(&&(kc, fc)) = change.peek() {
            if kc <= k {
                f = fc;
                change.next();
            } else {
                break;
            }
        }
        let t = t0 + k as f64 * dt;
        let is_sample = k % stride_steps == 0 || k == n_steps;
        let wants_snapshot = next_snapshot.peek().is_some_and(|&&ks| ks == k);
        if is_sample || wants_snapshot {
            let state = FockState::from_interleaved(psi.clone(), t)?;
            if is_sample {
                record_sample(&mut traj, &state, params, f, opts)?;
            }
            while next_snapshot.peek().is_some_and(|&&ks| ks == k) {
                traj.snapshots.push(state.clone());
                next_snapshot.next();
            }
        }
        if k == n_steps {
            break;
        }
        rk.step(&mut psi, params, f, dt);
    }
    traj.final_state = FockState::from_interleaved(psi, t0 + n_steps as f64 * dt)?;
    for w in &traj.warnings {
        log::warn!("{w}");
    }
    Ok(traj)
}

fn record_sample(
    traj: &mut Trajectory,
    state: &FockState,
    params: &SystemParams,
    f: f64,
    opts: &EvolveOptions,
) -> Result<()> {
    let t = state.time;
    let dist = photon_distribution(state);
    let norm: f64 = dist.iter().sum();
    let drift = (1.0 - norm).abs();
    traj.max_norm_drift = traj.max_norm_drift.max(drift);
    if drift > opts.norm_tolerance {
        return Err(Error::NormDrift { time: t, drift, tolerance: opts.norm_tolerance });
    }
    let tail = state.tail_occupation();
    traj.max_tail = traj.max_tail.max(tail);
    if tail > opts.tail_threshold {
        return Err(Error::UnderTruncated { time: t, tail, threshold: opts.tail_threshold });
    }
    let mean_n = dist.iter().enumerate().map(|(n, p)| n as f64 * p).sum();
    traj.times.push(t);
    traj.observables.push(Observables {
        t,
        norm,
        energy: expectation_h(state, params, f)?,
        mean_n,
        lds_inversion: lds_inversion(state),
    });
    if let Some(m) = traj.lds_measure.as_mut() {
        m.push(lds_measure(state, opts.lds_floor));
    }
    if let Some(d) = traj.distribution.as_mut() {
        d.push(dist);
    }
    Ok(())
}

struct Rk4Buffers {
    k: Vec<C64>,
    acc: Vec<C64>,
    tmp: Vec<C64>,
}

impl Rk4Buffers {
    fn new(len: usize) -> Self {
        let zero = C64::new(0.0, 0.0);
        Self { k: vec![zero; len], acc: vec![zero; len], tmp: vec![zero; len] }
    }

    /// Classic RK4 for `dψ/dt = −i H ψ`.
    fn step(&mut self, psi: &mut [C64], params: &SystemParams, f: f64, dt: f64) {
        let Self { k, acc, tmp } = self;
        // k1
        derivative(psi, params, f, k);
        for ((a, t), (p, kk)) in acc.iter_mut().zip(tmp.iter_mut()).zip(psi.iter().zip(k.iter())) {
            *a = *kk;
            *t = p + kk * (0.5 * dt);
        }
        // k2
        derivative(tmp, params, f, k);
        for ((a, t), (p, kk)) in acc.iter_mut().zip(tmp.iter_mut()).zip(psi.iter().zip(k.iter())) {
            *a += kk * 2.0;
            *t = p + kk * (0.5 * dt);
        }
        // k3
        derivative(tmp, params, f, k);
        for ((a, t), (p, kk)) in acc.iter_mut().zip(tmp.iter_mut()).zip(psi.iter().zip(k.iter())) {
            *a += kk * 2.0;
            *t = p + kk * dt;
        }
        // k4
        derivative(tmp, params, f, k);
        for ((p, a), kk) in psi.iter_mut().zip(acc.iter()).zip(k.iter()) {
            *p += (a + kk) * (dt / 6.0);
        }
    }
}

#[inline]
fn derivative(psi: &[C64], params: &SystemParams, f: f64, out: &mut [C64]) {
    apply_hamiltonian_into(psi, params, f, out);
    for v in out.iter_mut() {
        // −i (a + ib) = b − ia
        *v = C64::new(v.im, -v.re);
    }
}

/// `P_n = |⟨G,n|Ψ⟩|² + |⟨X,n|Ψ⟩|²`.
pub fn photon_distribution(state: &FockState) -> Vec<f64> {
    state.amps().chunks_exact(2).map(|p| p[0].norm_sqr() + p[1].norm_sqr()).collect()
}

/// `⟨a†a⟩ = Σ n P_n`.
pub fn mean_photon_number(state: &FockState) -> f64 {
    photon_distribution(state).iter().enumerate().map(|(n, p)| n as f64 * p).sum()
}

/// `Σ_n (|⟨Φ⁺,n|Ψ⟩|² − |⟨Φ⁻,n|Ψ⟩|²)`, which equals `2 Σ_n Re(⟨G,n|Ψ⟩* ⟨X,n|Ψ⟩)`.
pub fn lds_inversion(state: &FockState) -> f64 {
    state.amps().chunks_exact(2).map(|p| 2.0 * (p[0].conj() * p[1]).re).sum()
}

/// Photon-number-resolved LDS imbalance `ℓ_n`; `None` where `P_n <= floor`.
pub fn lds_measure(state: &FockState, floor: f64) -> Vec<Option<f64>> {
    let lds = to_lds(state);
    lds.plus
        .iter()
        .zip(&lds.minus)
        .map(|(p, m)| {
            let (pp, mm) = (p.norm_sqr(), m.norm_sqr());
            let total = pp + mm;
            (total > floor).then(|| ((pp - mm) / total).clamp(-1.0, 1.0))
        })
        .collect()
}

/// `⟨Ψ|H|Ψ⟩` at driving strength `f`.
pub fn expectation_h(state: &FockState, params: &SystemParams, f: f64) -> Result<f64> {
    let mut h = vec![C64::new(0.0, 0.0); state.amps().len()];
    apply_hamiltonian_into(state.amps(), params, f, &mut h);
    let value: C64 = state.amps().iter().zip(&h).map(|(a, b)| a.conj() * b).sum();
    let scale = value.norm().max(state.norm_sqr()).max(1.0);
    if value.im.abs() > 1e-10 * scale {
        return Err(Error::InvalidParameter(format!(
            "expectation value of H has imaginary part {:.3e}",
            value.im
        )));
    }
    Ok(value.re)
}

/// `|⟨tls, n|Ψ⟩|²` convenience accessor.
pub fn occupation(state: &FockState, tls: Tls, n: usize) -> f64 {
    state.amp(tls, n).norm_sqr()
}
