//! Wigner function of the photonic reduced state.
//!
//! `W(z) = (2/π) Tr[P D†(z) ρ D(z)] = (2/π) Σ_{mn} ρ_{nm} ⟨m|D(2z)|n⟩ (−1)ⁿ`,
//! where `ρ` is the cavity density matrix with the TLS traced out and `P` the
//! photon-number parity. The displacement matrix elements are generated along
//! each diagonal `m − n = k` from the normalized Laguerre functions
//!
//! ```text
//! f_j^k(x) = √(j!/(j+k)!) x^{k/2} e^{−x/2} L_j^k(x),   x = |2z|²
//! ```
//!
//! whose forward recurrence in `j` is stable; a running exponent keeps the
//! start value `f_0^k` representable when `e^{−x/2}` underflows.

use std::f64::consts::{FRAC_2_PI, LN_10};

use num_complex::Complex64 as C64;

use crate::{
    error::{Error, Result},
    model::FockState,
};

/// Default tolerance on `|∫W d²z − 1|` before a truncation-leak warning.
pub const DEFAULT_NORMALIZATION_TOLERANCE: f64 = 1e-2;

/// Diagonals of the photonic density matrix multiplied by the parity of the
/// column: `c_k[j] = (−1)^j ρ_{j, j+k} = (−1)^j Σ_s ψ_s[j] ψ_s[j+k]*`.
#[derive(Clone, Debug)]
pub struct PhotonDensity {
    diagonals: Vec<Vec<C64>>,
}

impl PhotonDensity {
    pub fn from_state(state: &FockState) -> Self {
        let ladders = [state.ground_ladder(), state.excited_ladder()];
        let n = state.n_max();
        let diagonals = (0..=n)
            .map(|k| {
                (0..=n - k)
                    .map(|j| {
                        let sum: C64 = ladders.iter().map(|l| l[j] * l[j + k].conj()).sum();
                        if j % 2 == 0 {
                            sum
                        } else {
                            -sum
                        }
                    })
                    .collect()
            })
            .collect();
        Self { diagonals }
    }

    pub fn n_max(&self) -> usize {
        self.diagonals.len() - 1
    }

    /// `W(z)`.
    pub fn wigner_at(&self, z: C64) -> f64 {
        let a = 2.0 * z;
        let x = a.norm_sqr();
        let rot = if x > 0.0 { a / a.norm() } else { C64::new(1.0, 0.0) };
        let half_ln_x = 0.5 * x.ln();
        let mut total = 0.0;
        let mut rot_k = C64::new(1.0, 0.0);
        let mut ln_fact_k = 0.0;
        for (k, diag) in self.diagonals.iter().enumerate() {
            if k > 0 {
                rot_k *= rot;
                ln_fact_k += (k as f64).ln();
                if x == 0.0 {
                    break;
                }
            }
            let kf = k as f64;
            let mut ln_scale = -0.5 * x + if k > 0 { kf * half_ln_x - 0.5 * ln_fact_k } else { 0.0 };
            let mut scale = ln_scale.exp();
            let (mut f_prev, mut f) = (0.0, 1.0);
            let mut acc = C64::new(0.0, 0.0);
            for (j, c) in diag.iter().enumerate() {
                if scale > 0.0 {
                    acc += c * (f * scale);
                }
                let jf = j as f64;
                let next = ((2.0 * jf + 1.0 + kf - x) * f - (jf * (jf + kf)).sqrt() * f_prev)
                    / ((jf + 1.0) * (jf + kf + 1.0)).sqrt();
                f_prev = f;
                f = next;
                if f.abs() > 1e100 {
                    f *= 1e-100;
                    f_prev *= 1e-100;
                    ln_scale += 100.0 * LN_10;
                    scale = ln_scale.exp();
                }
            }
            total += if k == 0 { acc.re } else { 2.0 * (rot_k * acc).re };
        }
        FRAC_2_PI * total
    }
}

/// `W(z)` for a single point.
pub fn wigner_point(state: &FockState, z: C64) -> f64 {
    PhotonDensity::from_state(state).wigner_at(z)
}

/// Rectangular sampling grid in phase space (axes inclusive of both ends).
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    pub n_re: usize,
    pub n_im: usize,
}

impl GridSpec {
    pub fn square(center: C64, half_width: f64, n: usize) -> Self {
        Self {
            re_min: center.re - half_width,
            re_max: center.re + half_width,
            im_min: center.im - half_width,
            im_max: center.im + half_width,
            n_re: n,
            n_im: n,
        }
    }

    /// Square of half-width `z_max + 3` about the origin.
    pub fn covering(z_max: f64, n: usize) -> Self {
        Self::square(C64::new(0.0, 0.0), z_max + 3.0, n)
    }

    fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        match n {
            0 => Vec::new(),
            1 => vec![0.5 * (lo + hi)],
            _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct WignerGrid {
    pub re_axis: Vec<f64>,
    pub im_axis: Vec<f64>,
    /// Row-major with the imaginary axis outer: `values[i_im * n_re + i_re]`.
    pub values: Vec<f64>,
    pub time: f64,
    pub warnings: Vec<String>,
}

impl WignerGrid {
    pub fn value(&self, i_re: usize, i_im: usize) -> f64 {
        self.values[i_im * self.re_axis.len() + i_re]
    }

    fn spacing(axis: &[f64]) -> f64 {
        if axis.len() > 1 {
            axis[1] - axis[0]
        } else {
            0.0
        }
    }

    /// Riemann sum of `W` over the grid.
    pub fn integral(&self) -> f64 {
        let cell = Self::spacing(&self.re_axis) * Self::spacing(&self.im_axis);
        self.values.iter().sum::<f64>() * cell
    }

    /// Grid point with the largest `|W|` and its value.
    pub fn abs_max(&self) -> (C64, f64) {
        let (idx, &w) = self
            .values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .expect("empty grid");
        let n_re = self.re_axis.len();
        (C64::new(self.re_axis[idx % n_re], self.im_axis[idx / n_re]), w)
    }
}

/// Samples `W` on a grid and warns when its integral misses 1 by more than
/// `tolerance`.
pub fn wigner(state: &FockState, spec: &GridSpec, tolerance: f64) -> WignerGrid {
    let rho = PhotonDensity::from_state(state);
    let re_axis = GridSpec::axis(spec.re_min, spec.re_max, spec.n_re);
    let im_axis = GridSpec::axis(spec.im_min, spec.im_max, spec.n_im);
    let mut values = Vec::with_capacity(re_axis.len() * im_axis.len());
    for &y in &im_axis {
        for &x in &re_axis {
            values.push(rho.wigner_at(C64::new(x, y)));
        }
    }
    let mut grid = WignerGrid { re_axis, im_axis, values, time: state.time, warnings: Vec::new() };
    if spec.n_re > 1 && spec.n_im > 1 {
        let integral = grid.integral();
        if (integral - 1.0).abs() > tolerance {
            let msg = format!(
                "Wigner integral {integral:.6} at t = {} deviates from 1 by more than {tolerance:e}",
                state.time
            );
            log::warn!("{msg}");
            grid.warnings.push(msg);
        }
    }
    grid
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrackOptions {
    /// Largest allowed move of a maximum between consecutive snapshots.
    pub search_radius: f64,
    pub initial_step: f64,
    pub tolerance: f64,
}

impl Default for TrackOptions {
    fn default() -> Self {
        Self { search_radius: 2.0, initial_step: 0.25, tolerance: 1e-4 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrackPoint {
    pub t: f64,
    pub z: C64,
    pub w: f64,
}

/// Compass search for a local maximum of `|W|` starting from `start`.
pub fn local_abs_max(rho: &PhotonDensity, start: C64, opts: &TrackOptions) -> (C64, f64) {
    let mut z = start;
    let mut best = rho.wigner_at(z).abs();
    let mut h = opts.initial_step;
    let dirs = [C64::new(1.0, 0.0), C64::new(-1.0, 0.0), C64::new(0.0, 1.0), C64::new(0.0, -1.0)];
    let mut guard = 0;
    while h > opts.tolerance && guard < 10_000 {
        guard += 1;
        let mut moved = false;
        for d in dirs {
            let cand = z + d * h;
            let v = rho.wigner_at(cand).abs();
            if v > best {
                best = v;
                z = cand;
                moved = true;
                break;
            }
        }
        if !moved {
            h *= 0.5;
        }
    }
    (z, rho.wigner_at(z))
}

/// Follows the local maxima of `|W|` through a sequence of snapshots, one
/// track per seed, each continuing from its previous position.
pub fn wigner_max_track(snapshots: &[FockState], seeds: &[C64], opts: &TrackOptions) -> Result<Vec<Vec<TrackPoint>>> {
    let mut tracks: Vec<Vec<TrackPoint>> = vec![Vec::with_capacity(snapshots.len()); seeds.len()];
    let mut current: Vec<C64> = seeds.to_vec();
    for state in snapshots {
        let rho = PhotonDensity::from_state(state);
        for (track, pos) in tracks.iter_mut().zip(current.iter_mut()) {
            let (z, w) = local_abs_max(&rho, *pos, opts);
            if (z - *pos).norm() > opts.search_radius {
                return Err(Error::LostTrack { time: state.time });
            }
            *pos = z;
            track.push(TrackPoint { t: state.time, z, w });
        }
    }
    Ok(tracks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Tls;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn vacuum_is_a_gaussian() {
        let s = FockState::basis(Tls::Ground, 0, 10).unwrap();
        for z in [c(0.0, 0.0), c(0.3, -0.4), c(1.2, 0.7)] {
            let want = 2.0 / PI * (-2.0 * z.norm_sqr()).exp();
            assert!((wigner_point(&s, z) - want).abs() < 1e-15);
        }
    }

    #[test]
    fn coherent_state_peaks_at_its_amplitude() {
        let z0 = c(2.0, -1.5);
        let s = FockState::coherent_product(c(FRAC_1_SQRT_2, 0.0), c(0.0, FRAC_1_SQRT_2), z0, 60);
        let rho = PhotonDensity::from_state(&s);
        assert!((rho.wigner_at(z0) - 2.0 / PI).abs() < 1e-12);
        let (z, w) = local_abs_max(&rho, c(1.5, -1.0), &TrackOptions::default());
        assert!((z - z0).norm() < 1e-3);
        assert!((w - 2.0 / PI).abs() < 1e-6);
    }

    #[test]
    fn fock_superposition_at_origin() {
        let mut g = vec![c(0.0, 0.0); 11];
        g[0] = c(FRAC_1_SQRT_2, 0.0);
        g[4] = c(FRAC_1_SQRT_2, 0.0);
        let s = FockState::from_ladders(&g, &vec![c(0.0, 0.0); 11]).unwrap();
        assert!((wigner_point(&s, c(0.0, 0.0)) - 2.0 / PI).abs() < 1e-15);
    }

    #[test]
    fn matches_laguerre_series_oracle() {
        // reference values from an extended-precision Laguerre-series sum
        let n = 30;
        let mut g: Vec<C64> = (0..=n)
            .map(|k| c((0.7 * k as f64).cos(), (1.3 * k as f64 + 0.2).sin()) / (k + 1) as f64)
            .collect();
        let norm = g.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        g.iter_mut().for_each(|a| *a /= norm);
        let s = FockState::from_ladders(&g, &vec![c(0.0, 0.0); n + 1]).unwrap();
        let rho = PhotonDensity::from_state(&s);
        let cases = [
            (c(0.0, 0.0), 0.2453960314341699),
            (c(0.4, -0.2), 0.35403507692987797),
            (c(1.5, 2.0), -0.032972341138876846),
            (c(3.0, 0.0), 0.00062911649775990981),
            (c(-2.2, 0.7), -0.001047432762254439),
        ];
        for (z, want) in cases {
            assert!((rho.wigner_at(z) - want).abs() < 1e-13, "z = {z}");
        }
    }

    #[test]
    fn far_displacements_do_not_underflow() {
        // |2z|² ≈ 1900: e^{−x/2} alone underflows
        let z0 = c(21.0, 6.0);
        let s = FockState::coherent_product(c(1.0, 0.0), c(0.0, 0.0), z0, 800);
        let rho = PhotonDensity::from_state(&s);
        for dz in [c(0.0, 0.0), c(0.5, 0.0), c(0.0, -1.0)] {
            let want = 2.0 / PI * (-2.0 * dz.norm_sqr()).exp();
            assert!((rho.wigner_at(z0 + dz) - want).abs() < 1e-11);
        }
    }

    #[test]
    fn grid_integrates_to_one() {
        let s = FockState::coherent_product(c(1.0, 0.0), c(0.0, 0.0), c(1.0, 1.0), 40);
        let grid = wigner(&s, &GridSpec::covering(1.5, 81), DEFAULT_NORMALIZATION_TOLERANCE);
        assert!((grid.integral() - 1.0).abs() < 1e-6);
        assert!(grid.warnings.is_empty());
        let (z, _) = grid.abs_max();
        assert!((z - c(1.0, 1.0)).norm() < 0.07);
    }

    #[test]
    fn coarse_grid_warns() {
        let s = FockState::coherent_product(c(1.0, 0.0), c(0.0, 0.0), c(3.0, 0.0), 40);
        let grid = wigner(&s, &GridSpec::square(c(0.0, 0.0), 1.0, 5), 1e-2);
        assert_eq!(grid.warnings.len(), 1);
    }

    #[test]
    fn static_track_stays_put() {
        let z0 = c(-1.0, 2.0);
        let s = FockState::coherent_product(c(1.0, 0.0), c(0.0, 0.0), z0, 50);
        let tracks = wigner_max_track(&[s.clone(), s.clone(), s], &[c(-0.8, 1.8)], &TrackOptions::default()).unwrap();
        for p in &tracks[0] {
            assert!((p.z - z0).norm() < 1e-3);
        }
    }

    #[test]
    fn jump_beyond_radius_loses_track() {
        let a = FockState::coherent_product(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), 60);
        let b = FockState::coherent_product(c(1.0, 0.0), c(0.0, 0.0), c(5.0, 0.0), 60);
        let opts = TrackOptions { search_radius: 0.5, initial_step: 2.0, tolerance: 1e-3 };
        let err = wigner_max_track(&[a, b], &[c(0.0, 0.0)], &opts).unwrap_err();
        assert!(matches!(err, Error::LostTrack { .. }));
    }
}
