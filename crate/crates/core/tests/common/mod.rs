//! Property checks shared by the proptest suite and the acceptance runner.
//! Each returns the measured deviation; callers compare against the
//! tolerance constants.

#![allow(dead_code)]

use num_complex::Complex64 as C64;
use photon_packets::{
    analysis::{centred_power, spectrum, wigner, wigner_point, GridSpec, Window},
    model::{apply_hamiltonian, make_initial_state, DriveProtocol, FockState, InitialKind, SystemParams},
    protocol::{BranchTree, TreeOptions},
    solver::{evolve, EvolveOptions},
    variational::{evolve_branch, lambda_of_z, overlap, Branch, BranchOptions},
};

pub const HERMITICITY_TOL: f64 = 1e-12;
pub const LINEARITY_TOL: f64 = 1e-12;
/// Admissible band for the fitted RK4 convergence order.
pub const RK4_ORDER_BAND: (f64, f64) = (3.7, 4.3);
pub const LAMBDA_TOL: f64 = 1e-12;
pub const OVERLAP_SUM_TOL: f64 = 1e-12;
pub const WEIGHT_TOL: f64 = 1e-12;
pub const MIRROR_TOL: f64 = 1e-7;
pub const WIGNER_NORM_TOL: f64 = 1e-2;
pub const PARSEVAL_TOL: f64 = 1e-9;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Deterministic pseudo-random state from a seed (splitmix64).
pub fn seeded_state(seed: u64, n_max: usize) -> FockState {
    let mut s = seed.wrapping_add(0x9e3779b97f4a7c15);
    let mut next = move || {
        s = s.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = s;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        ((z ^ (z >> 31)) >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let amps: Vec<C64> = (0..2 * (n_max + 1)).map(|_| c(next(), next())).collect();
    let mut st = FockState::from_interleaved(amps, 0.0).unwrap();
    st.normalize();
    st
}

/// `|⟨φ|Hψ⟩ − conj⟨ψ|Hφ⟩|`, relative to `‖H‖`-scale.
pub fn hermiticity_defect(a: &FockState, b: &FockState, params: &SystemParams, f: f64) -> f64 {
    let ha = apply_hamiltonian(a, params, f).unwrap().vector;
    let hb = apply_hamiltonian(b, params, f).unwrap().vector;
    let lhs = b.inner(&ha);
    let rhs = a.inner(&hb).conj();
    let scale = 1.0 + f + params.delta() * a.n_max() as f64 + params.g() * (a.n_max() as f64).sqrt();
    (lhs - rhs).norm() / scale
}

fn final_state(initial: &FockState, params: &SystemParams, protocol: &DriveProtocol, t_end: f64, dt: f64) -> FockState {
    let mut o = EvolveOptions::new(t_end);
    o.dt = Some(dt);
    o.sample_stride = t_end;
    o.record_distribution = false;
    o.tail_threshold = f64::INFINITY;
    o.norm_tolerance = f64::INFINITY;
    evolve(initial, params, protocol, &o).unwrap().final_state
}

fn distance(a: &FockState, b: &FockState) -> f64 {
    a.amps().iter().zip(b.amps()).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

/// `‖U(aψ + bφ) − (aUψ + bUφ)‖` for the fixed-step propagator.
pub fn linearity_defect(psi: &FockState, phi: &FockState, a: C64, b: C64, params: &SystemParams, f: f64) -> f64 {
    let p = DriveProtocol::new(vec![
        photon_packets::model::DriveStep { tau: 0.0, f },
        photon_packets::model::DriveStep { tau: 0.5, f: 0.5 * f },
    ])
    .unwrap();
    let combined = psi.linear_combination(a, phi, b);
    let lhs = final_state(&combined, params, &p, 1.0, 0.01);
    let rhs = final_state(psi, params, &p, 1.0, 0.01).linear_combination(a, &final_state(phi, params, &p, 1.0, 0.01), b);
    distance(&lhs, &rhs) / (a.norm() + b.norm())
}

/// Convergence order of RK4 estimated from step sizes `h` and `h/2` against a
/// reference at `h/16`.
pub fn rk4_order(params: &SystemParams, f: f64, n_max: usize, h: f64) -> f64 {
    let p = DriveProtocol::constant(f).unwrap();
    let init = make_initial_state(InitialKind::Ground, n_max).unwrap();
    let t = 2.0;
    let reference = final_state(&init, params, &p, t, h / 16.0);
    let e1 = distance(&final_state(&init, params, &p, t, h), &reference);
    let e2 = distance(&final_state(&init, params, &p, t, h / 2.0), &reference);
    (e1 / e2).log2()
}

/// Largest of `|λ₁ + λ₂|` and the excess of `|λ|` over 1.
pub fn lambda_defect(z: C64, f: f64, params: &SystemParams) -> f64 {
    let l1 = lambda_of_z(z, f, params, Branch::One).unwrap();
    let l2 = lambda_of_z(z, f, params, Branch::Two).unwrap();
    (l1 + l2).abs().max(l1.abs() - 1.0).max(l2.abs() - 1.0).max(0.0)
}

/// `|S + S̄ − 1|` for a packet on `branch` when the drive jumps `f0 → f1`.
pub fn overlap_sum_defect(z: C64, f0: f64, f1: f64, branch: Branch, params: &SystemParams) -> f64 {
    let s = overlap(z, f0, branch, f1, branch.other(), params).unwrap();
    let sbar = overlap(z, f0, branch, f1, branch, params).unwrap();
    (s + sbar - 1.0).abs()
}

/// `|Σ w − 1|` over the leaves after replaying `protocol` without pruning.
pub fn weight_defect(protocol: &DriveProtocol, params: &SystemParams, initial: InitialKind, t_end: f64) -> f64 {
    let opts = TreeOptions { prune_threshold: 0.0, drop_degenerate: false, ..Default::default() };
    let tree = BranchTree::replay(protocol, *params, initial, t_end, opts).unwrap();
    (tree.total_weight() - 1.0).abs()
}

/// `max |z(T − t) − conj z(t)|`, relative to the orbit diameter, for the
/// closed orbit started at `z0` on the real axis with period `T`. The second
/// run uses a step that divides the half period exactly. `None` when there is
/// no return or the orbit passes within 0.5 of `f/g`.
pub fn mirror_defect(z0: f64, branch: Branch, f: f64, params: &SystemParams) -> Option<f64> {
    let probe = evolve_branch(c(z0, 0.0), branch, f, params, 1e4, &BranchOptions { stride: 1, ..Default::default() }).ok()?;
    let (estimate, _) = probe.first_real_axis_return()?;
    let m = (estimate / probe.dt).ceil() as usize;
    // orbits grazing the degeneracy point are outside the adiabatic model
    let closest = probe.z[..(2 * m).min(probe.z.len())].iter().map(|w| (w - f / params.g()).norm()).fold(f64::INFINITY, f64::min);
    if closest < 0.5 {
        return None;
    }
    // nudged up so that the integrator takes exactly `steps` steps
    let run = |span: f64, steps: usize| {
        let opts = BranchOptions { dt: Some(span / steps as f64 * (1.0 + 1e-9)), stride: 1, floor: None };
        evolve_branch(c(z0, 0.0), branch, f, params, span, &opts).ok()
    };
    let end_im = |half: f64| run(half, m).map(|t| t.z.last().unwrap().im);
    // secant refinement of the return time on the step grid
    let (mut a, mut b) = (estimate, estimate * (1.0 + 1e-6));
    let (mut fa, mut fb) = (end_im(a)?, end_im(b)?);
    for _ in 0..4 {
        if fb == fa {
            break;
        }
        let next = b - fb * (b - a) / (fb - fa);
        (a, fa) = (b, fb);
        b = next;
        fb = end_im(b)?;
    }
    let traj = run(2.0 * b, 2 * m)?;
    let z = &traj.z;
    let last = (2 * m).min(z.len() - 1);
    let diam = z.iter().map(|w| (w - z[0]).norm()).fold(0.0, f64::max);
    let worst = (0..=last).map(|k| (z[last - k] - z[k].conj()).norm()).fold(0.0, f64::max);
    Some(worst / diam)
}

/// `(|∫W − 1|, max|W| − 2/π)` for `state` on a grid covering radius `r`.
pub fn wigner_defects(state: &FockState, r: f64, n: usize) -> (f64, f64) {
    let grid = wigner(state, &GridSpec::covering(r, n), 1.0);
    let bound = grid.abs_max().1.abs() - 2.0 / std::f64::consts::PI;
    let extra = [c(0.0, 0.0), c(0.3, -0.2)].iter().map(|z| wigner_point(state, *z).abs()).fold(0.0, f64::max)
        - 2.0 / std::f64::consts::PI;
    ((grid.integral() - 1.0).abs(), bound.max(extra))
}

/// Relative mismatch between the time- and frequency-domain power.
pub fn parseval_defect(series: &[f64], dt: f64) -> f64 {
    let t: Vec<f64> = (0..series.len()).map(|k| k as f64 * dt).collect();
    let s = spectrum(series, &t, Window::Rectangular).unwrap();
    let a = centred_power(series);
    (a - s.total_power()).abs() / a.max(f64::MIN_POSITIVE)
}
