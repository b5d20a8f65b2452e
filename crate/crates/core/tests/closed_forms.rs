//! The large-detuning closed form is the leading term in `g²/(fδ)`; its
//! error over one cycle falls off as `1/(fδ)`.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use photon_packets::{
    model::SystemParams,
    variational::{closed_form_large_detuning, evolve_branch, Branch, BranchOptions},
};

fn cycle_error(f: f64, delta: f64, branch: Branch) -> f64 {
    let params = SystemParams::new(1.0, delta).unwrap();
    let opts = BranchOptions { stride: 1, ..Default::default() };
    let traj = evolve_branch(C64::new(0.0, 0.0), branch, f, &params, 2.0 * PI / delta, &opts).unwrap();
    traj.times
        .iter()
        .zip(&traj.z)
        .map(|(t, z)| (z - closed_form_large_detuning(*t, &params, branch).unwrap()).norm() * delta)
        .fold(0.0, f64::max)
}

#[test]
fn large_detuning_error_scales_inversely_with_f_delta() {
    for branch in Branch::BOTH {
        let scaled: Vec<f64> = [10.0, 40.0, 160.0].iter().map(|fd| cycle_error(fd / 0.5, 0.5, branch) * fd).collect();
        for s in &scaled {
            assert!((0.5..1.1).contains(s), "{branch:?}: error * f delta = {scaled:?}");
        }
        assert!(cycle_error(160.0 / 0.5, 0.5, branch) < 0.01);
    }
}

#[test]
fn error_depends_on_the_product_only() {
    let a = cycle_error(20.0, 0.5, Branch::One);
    let b = cycle_error(10.0, 1.0, Branch::One);
    assert!((a - b).abs() < 0.05 * a, "{a} vs {b}");
}
