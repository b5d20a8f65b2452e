//! Subcommand implementations. Each returns the paths it wrote, in order.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;
use serde::Serialize;
use serde_json::json;

use crate::{
    analysis::{
        detect_packets, peak_report, spectrum, wigner, GridSpec, PeakOptions, PeakReport, Spectrum, WignerGrid,
        DEFAULT_NORMALIZATION_TOLERANCE,
    },
    classifier::{classify, max_lambda2, min_lambda1, RegimeClass},
    error::{Error, Result},
    model::{make_initial_state, DriveProtocol, FockState, InitialKind, SystemParams},
    protocol::{suggest_n_max, synthesize, validate_protocol, Synthesis, ValidateOptions, ValidationMode},
    solver::{evolve, photon_distribution, EvolveOptions, Trajectory},
    variational::{
        evolve_branch, oscillation_frequency, predicted_half_period, turning_point, Branch, BranchOptions,
    },
};

use super::{
    config::{Overrides, ReducedSection, RunConfig},
    output::{
        write_branch, write_classes, write_json, write_json_lines, write_matrix, write_observables, write_spectrum,
        write_wigner,
    },
    protocol_file::{parse_protocol, write_protocol},
    series::read_series,
};

fn create(out: &Path, name: &str, written: &mut Vec<PathBuf>) -> Result<BufWriter<File>> {
    std::fs::create_dir_all(out)?;
    let path = out.join(name);
    let file = File::create(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    written.push(path);
    Ok(BufWriter::new(file))
}

fn initial_kind(cfg: &RunConfig, ov: &Overrides) -> Result<InitialKind> {
    match ov.seed_state {
        Some(k) => Ok(k),
        None => cfg.initial(),
    }
}

/// The configured drive, or the result of `[synth]` when no drive is given.
fn resolve_protocol(cfg: &RunConfig, params: &SystemParams) -> Result<(DriveProtocol, Option<Synthesis>)> {
    if let Some(p) = cfg.protocol()? {
        return Ok((p, None));
    }
    match cfg.synthesis()? {
        Some((target, opts)) => {
            let s = synthesize(&target, params, &opts)?;
            Ok((s.protocol.clone(), Some(s)))
        }
        None => Err(Error::Config("a [drive] or [synth] table is required".into())),
    }
}

#[derive(Serialize)]
struct RunSummary {
    n_max: usize,
    dt: f64,
    initial: String,
    step_times: Vec<f64>,
    max_norm_drift: f64,
    max_tail: f64,
    peaks: Option<PeakReport>,
    warnings: Vec<String>,
}

fn sorted_times(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut t: Vec<f64> = a.iter().chain(b).copied().collect();
    t.sort_by(f64::total_cmp);
    t.dedup();
    t
}

fn snapshot_at(traj: &Trajectory, t: f64) -> Option<&FockState> {
    let tol = 0.5 * traj.dt + 1e-9 * t.abs();
    traj.snapshots.iter().find(|s| (s.time - t).abs() <= tol)
}

/// Radius beyond which the photon distribution holds less than `1e-8`.
fn support_radius(state: &FockState) -> f64 {
    let p = photon_distribution(state);
    let top = p.iter().rposition(|x| *x >= 1e-8).unwrap_or(0);
    (top as f64).sqrt()
}

fn wigner_grid(cfg: &RunConfig, state: &FockState) -> WignerGrid {
    let n = cfg.analysis.wigner_points;
    let spec = match cfg.analysis.wigner_half_width {
        Some(h) => GridSpec::square(C64::new(0.0, 0.0), h, n),
        None => GridSpec::covering(support_radius(state), n),
    };
    wigner(state, &spec, DEFAULT_NORMALIZATION_TOLERANCE)
}

/// Expected packet frequencies: configured, or `Ω₁, Ω₂` of the last drive
/// level when it lies in class D.
fn expected_frequencies(cfg: &RunConfig, params: &SystemParams, protocol: &DriveProtocol) -> Vec<f64> {
    if let Some(e) = &cfg.analysis.expected {
        return e.clone();
    }
    let f = protocol.last_level().f;
    let est: Vec<_> = Branch::BOTH.iter().map(|&b| oscillation_frequency(b, f, params)).collect();
    if est.iter().all(|e| e.valid) {
        est.iter().map(|e| e.omega).collect()
    } else {
        Vec::new()
    }
}

pub fn cmd_simulate(cfg: &RunConfig, ov: &Overrides, out: &Path) -> Result<Vec<PathBuf>> {
    let params = cfg.params()?;
    let initial = initial_kind(cfg, ov)?;
    let (protocol, synthesis) = resolve_protocol(cfg, &params)?;
    let t_end = cfg.run.t_end;
    let n_max = match ov.n_max.or(cfg.run.n_max) {
        Some(n) => n,
        None => suggest_n_max(&protocol, &params, initial, t_end)?,
    };
    let mut written = Vec::new();
    write_protocol_file(&protocol, out, &mut written)?;
    if let Some(s) = &synthesis {
        write_synthesis(s, out, &mut written)?;
    }
    let want_spectrum = cfg.analysis.spectrum;
    let snapshot_times = sorted_times(&cfg.analysis.wigner_times, &cfg.analysis.packet_times);

    if t_end == 0.0 {
        write_observables(create(out, "observables.csv", &mut written)?, &[])?;
        if cfg.run.distribution {
            write_matrix(create(out, "distribution.csv", &mut written)?, "p", n_max, &[], &[])?;
        }
        if cfg.run.lds_measure {
            write_matrix(create(out, "lds_measure.csv", &mut written)?, "l", n_max, &[], &[])?;
        }
        if !cfg.analysis.wigner_times.is_empty() {
            write_wigner(create(out, "wigner.csv", &mut written)?, &[])?;
        }
        if want_spectrum {
            write_spectrum(create(out, "spectrum.csv", &mut written)?, None)?;
        }
        if !cfg.analysis.packet_times.is_empty() {
            write_json_lines::<_, serde_json::Value>(create(out, "packets.jsonl", &mut written)?, &[])?;
        }
        return Ok(written);
    }

    let state = make_initial_state(initial, n_max)?;
    let mut opts = EvolveOptions::new(t_end);
    opts.dt = ov.dt.or(cfg.run.dt);
    opts.sample_stride = cfg.run.sample_stride;
    opts.snapshot_times = snapshot_times;
    opts.record_distribution = cfg.run.distribution;
    opts.record_lds_measure = cfg.run.lds_measure;
    opts.tail_threshold = cfg.run.tail_threshold;
    opts.norm_tolerance = cfg.run.norm_tolerance;
    opts.lds_floor = cfg.run.lds_floor;
    let traj = evolve(&state, &params, &protocol, &opts)?;
    let mut warnings = traj.warnings.clone();

    write_observables(create(out, "observables.csv", &mut written)?, &traj.observables)?;
    if let Some(dist) = &traj.distribution {
        let rows: Vec<Vec<Option<f64>>> = dist.iter().map(|r| r.iter().map(|x| Some(*x)).collect()).collect();
        write_matrix(create(out, "distribution.csv", &mut written)?, "p", n_max, &traj.times, &rows)?;
    }
    if let Some(lds) = &traj.lds_measure {
        write_matrix(create(out, "lds_measure.csv", &mut written)?, "l", n_max, &traj.times, lds)?;
    }
    if !cfg.analysis.wigner_times.is_empty() {
        let mut grids = Vec::new();
        for &t in &cfg.analysis.wigner_times {
            match snapshot_at(&traj, t) {
                Some(s) => {
                    let g = wigner_grid(cfg, s);
                    warnings.extend(g.warnings.iter().cloned());
                    grids.push(g);
                }
                None => warnings.push(format!("no state at wigner time {t}")),
            }
        }
        write_wigner(create(out, "wigner.csv", &mut written)?, &grids)?;
    }
    if !cfg.analysis.packet_times.is_empty() {
        let opts = cfg.packet_options();
        let mut records = Vec::new();
        for &t in &cfg.analysis.packet_times {
            match snapshot_at(&traj, t) {
                Some(s) => {
                    let r = detect_packets(&photon_distribution(s), &opts);
                    records.push(json!({ "t": s.time, "packets": r.packets, "residue": r.residue }));
                }
                None => warnings.push(format!("no state at packet time {t}")),
            }
        }
        write_json_lines(create(out, "packets.jsonl", &mut written)?, &records)?;
    }
    let mut peaks = None;
    if want_spectrum {
        let series: Vec<f64> = traj.observables.iter().map(|o| o.mean_n).collect();
        let spec = spectrum(&series, &traj.times, cfg.window()?)?;
        write_spectrum(create(out, "spectrum.csv", &mut written)?, Some(&spec))?;
        let expected = expected_frequencies(cfg, &params, &protocol);
        if !expected.is_empty() {
            match peak_report(&spec, &expected, &PeakOptions::default()) {
                Ok(r) => peaks = Some(r),
                Err(e) => warnings.push(e.to_string()),
            }
        }
    }
    let summary = RunSummary {
        n_max,
        dt: traj.dt,
        initial: initial.to_string(),
        step_times: traj.step_times.clone(),
        max_norm_drift: traj.max_norm_drift,
        max_tail: traj.max_tail,
        peaks,
        warnings,
    };
    write_json(create(out, "run.json", &mut written)?, &summary)?;
    Ok(written)
}

fn write_protocol_file(protocol: &DriveProtocol, out: &Path, written: &mut Vec<PathBuf>) -> Result<()> {
    use std::io::Write;
    let mut w = create(out, "protocol.txt", written)?;
    w.write_all(write_protocol(protocol).as_bytes())?;
    w.flush()?;
    Ok(())
}

fn write_synthesis(s: &Synthesis, out: &Path, written: &mut Vec<PathBuf>) -> Result<()> {
    let leaves: Vec<_> = s
        .tree
        .leaves()
        .map(|n| json!({ "label": n.label, "weight": n.state.weight, "z_re": n.state.z.re, "z_im": n.state.z.im }))
        .collect();
    let value = json!({
        "step_times": s.protocol.step_times().collect::<Vec<_>>(),
        "levels": s.protocol.levels().iter().map(|l| l.f).collect::<Vec<_>>(),
        "targets": s.targets,
        "steps": s.tree.steps(),
        "leaves": leaves,
        "warnings": s.warnings,
    });
    write_json(create(out, "synthesis.json", written)?, &value)
}

/// Constant drive used by the reduced model.
fn reduced_drive(cfg: &RunConfig, r: &ReducedSection) -> Result<f64> {
    if let Some(f) = r.f {
        return Ok(f);
    }
    match cfg.protocol()? {
        Some(p) if p.levels().len() == 1 => Ok(p.initial_level()),
        Some(_) => Err(Error::Config("reduced model needs reduced.f for a stepped drive".into())),
        None => Err(Error::Config("reduced model needs reduced.f or a constant [drive] f".into())),
    }
}

pub fn cmd_reduced(cfg: &RunConfig, ov: &Overrides, out: &Path) -> Result<Vec<PathBuf>> {
    let params = cfg.params()?;
    let r = cfg.reduced.clone().unwrap_or_default();
    let f = reduced_drive(cfg, &r)?;
    let branches = cfg.reduced_branches(&r)?;
    let opts = BranchOptions { dt: ov.dt.or(r.dt), stride: r.stride, floor: None };
    let z0 = C64::new(r.z0[0], r.z0[1]);
    let mut written = Vec::new();
    let mut summary = Vec::new();
    for b in branches {
        let traj = evolve_branch(z0, b, f, &params, r.t_end, &opts)?;
        write_branch(create(out, &format!("branch{}.csv", b.index()), &mut written)?, &traj, &params)?;
        let est = oscillation_frequency(b, f, &params);
        summary.push(json!({
            "branch": b.index(),
            "f": f,
            "dt": traj.dt,
            "turning_point": turning_point(b, f, &params),
            "max_abs2": traj.max_abs2(),
            "omega": est.omega,
            "omega_valid": est.valid,
            "half_period": est.valid.then(|| predicted_half_period(b, f, &params)),
        }));
    }
    write_json(create(out, "reduced.json", &mut written)?, &summary)?;
    Ok(written)
}

#[derive(Clone, Debug, Serialize)]
pub struct ClassifyRecord {
    pub f: f64,
    pub delta: f64,
    pub class: String,
    pub boundary_distances: [f64; 3],
    pub min_lambda1: Option<f64>,
    pub max_lambda2: Option<f64>,
}

pub fn cmd_classify(f: f64, params: &SystemParams) -> Result<ClassifyRecord> {
    let delta = params.delta();
    let rc: RegimeClass = classify(f, delta, params)?;
    Ok(ClassifyRecord {
        f,
        delta,
        class: rc.label.to_string(),
        boundary_distances: rc.boundary_distances,
        min_lambda1: min_lambda1(f, delta, params).ok(),
        max_lambda2: max_lambda2(f, delta, params).ok(),
    })
}

/// Evenly spaced axis `lo..=hi` with `n` points.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

pub fn cmd_classify_grid(f_axis: &[f64], delta_axis: &[f64], g: f64, out: &Path) -> Result<Vec<PathBuf>> {
    let mut rows = Vec::with_capacity(f_axis.len() * delta_axis.len());
    for &f in f_axis {
        for &delta in delta_axis {
            let params = SystemParams::new(g, delta)?;
            rows.push((f, delta, classify(f, delta, &params)?));
        }
    }
    let mut written = Vec::new();
    write_classes(create(out, "classify.csv", &mut written)?, &rows)?;
    Ok(written)
}

pub fn cmd_protocol_synth(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let params = cfg.params()?;
    let (target, opts) = cfg.synthesis()?.ok_or_else(|| Error::Config("protocol synth needs a [synth] table".into()))?;
    let s = synthesize(&target, &params, &opts)?;
    let mut written = Vec::new();
    write_protocol_file(&s.protocol, out, &mut written)?;
    write_synthesis(&s, out, &mut written)?;
    Ok(written)
}

pub fn cmd_protocol_validate(
    cfg: &RunConfig,
    ov: &Overrides,
    protocol_path: Option<&Path>,
    out: &Path,
) -> Result<Vec<PathBuf>> {
    let params = cfg.params()?;
    let protocol = match protocol_path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
            parse_protocol(&text)?
        }
        None => resolve_protocol(cfg, &params)?.0,
    };
    let v = cfg.validate.clone().unwrap_or_default();
    let mode: ValidationMode = v.mode.parse().map_err(|e: Error| Error::Config(e.to_string()))?;
    let t_end = match v.t_end {
        Some(t) => t,
        None if cfg.run.t_end > 0.0 => cfg.run.t_end,
        None => return Err(Error::Config("validation needs validate.t_end or run.t_end".into())),
    };
    let mut opts = ValidateOptions::new(t_end);
    opts.initial = initial_kind(cfg, ov)?;
    if !v.report_times.is_empty() {
        opts.report_times = v.report_times.clone();
    }
    opts.n_max = ov.n_max.or(cfg.run.n_max);
    opts.dt = ov.dt.or(cfg.run.dt);
    opts.packets = cfg.packet_options();
    let report = validate_protocol(&protocol, &params, mode, &opts);
    let mut written = Vec::new();
    write_json(create(out, "validation.json", &mut written)?, &report)?;
    if let Some(exact) = &report.exact {
        write_json_lines(create(out, "packets.jsonl", &mut written)?, &exact.snapshots)?;
    }
    Ok(written)
}

#[derive(Clone, Debug)]
pub struct SpectrumArgs {
    pub column: String,
    pub window: crate::analysis::Window,
    pub expected: Vec<f64>,
}

pub fn cmd_spectrum(inputs: &[PathBuf], args: &SpectrumArgs, out: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for (k, input) in inputs.iter().enumerate() {
        let file = File::open(input).map_err(|e| Error::Io(format!("{}: {e}", input.display())))?;
        let (t, x) = read_series(std::io::BufReader::new(file), &args.column)?;
        let spec: Spectrum = spectrum(&x, &t, args.window)?;
        let stem = if inputs.len() == 1 { "spectrum".to_string() } else { format!("spectrum{k}") };
        write_spectrum(create(out, &format!("{stem}.csv"), &mut written)?, Some(&spec))?;
        if !args.expected.is_empty() {
            let r = peak_report(&spec, &args.expected, &PeakOptions::default())?;
            write_json(create(out, &format!("{stem}_peaks.json"), &mut written)?, &r)?;
        }
    }
    Ok(written)
}
