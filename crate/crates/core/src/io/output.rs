//! Deterministic CSV and JSON-lines writers.
//!
//! Floats are written with 17 significant digits so that every value reads
//! back bit-for-bit.

use std::io::Write;

use serde::Serialize;

use crate::{
    analysis::{Spectrum, WignerGrid},
    classifier::RegimeClass,
    error::{Error, Result},
    model::SystemParams,
    solver::Observables,
    variational::BranchTrajectory,
};

pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().from_writer(w)
}

fn row<W: Write>(w: &mut csv::Writer<W>, values: impl IntoIterator<Item = String>) -> Result<()> {
    w.write_record(values.into_iter().collect::<Vec<_>>()).map_err(csv_err)
}

pub const OBSERVABLE_COLUMNS: [&str; 5] = ["t", "norm", "energy", "mean_n", "lds_inversion"];

pub fn write_observables<W: Write>(w: W, obs: &[Observables]) -> Result<()> {
    let mut w = writer(w);
    w.write_record(OBSERVABLE_COLUMNS).map_err(csv_err)?;
    for o in obs {
        row(&mut w, [o.t, o.norm, o.energy, o.mean_n, o.lds_inversion].map(fmt_f64))?;
    }
    w.flush()?;
    Ok(())
}

/// One row per sample: `t, p0, …, pN` (or `l0, …` for the LDS measure).
pub fn write_matrix<W: Write>(w: W, prefix: &str, n_max: usize, times: &[f64], rows: &[Vec<Option<f64>>]) -> Result<()> {
    let mut w = writer(w);
    row(&mut w, std::iter::once("t".to_string()).chain((0..=n_max).map(|n| format!("{prefix}{n}"))))?;
    for (t, r) in times.iter().zip(rows) {
        row(&mut w, std::iter::once(fmt_f64(*t)).chain(r.iter().map(|x| fmt_f64(x.unwrap_or(f64::NAN)))))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_wigner<W: Write>(w: W, grids: &[WignerGrid]) -> Result<()> {
    let mut w = writer(w);
    w.write_record(["t", "re", "im", "w"]).map_err(csv_err)?;
    for g in grids {
        for (j, im) in g.im_axis.iter().enumerate() {
            for (i, re) in g.re_axis.iter().enumerate() {
                row(&mut w, [g.time, *re, *im, g.value(i, j)].map(fmt_f64))?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_spectrum<W: Write>(w: W, spec: Option<&Spectrum>) -> Result<()> {
    let mut w = writer(w);
    w.write_record(["freq", "magnitude"]).map_err(csv_err)?;
    if let Some(s) = spec {
        for (f, m) in s.freqs.iter().zip(&s.magnitudes) {
            row(&mut w, [*f, *m].map(fmt_f64))?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_branch<W: Write>(w: W, traj: &BranchTrajectory, params: &SystemParams) -> Result<()> {
    let mut w = writer(w);
    w.write_record(["t", "re", "im", "abs2", "lambda", "energy_residual"]).map_err(csv_err)?;
    let lambda = traj.lambda(params);
    for k in 0..traj.times.len() {
        let z = traj.z[k];
        row(&mut w, [traj.times[k], z.re, z.im, z.norm_sqr(), lambda[k], traj.energy_residual[k]].map(fmt_f64))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_classes<W: Write>(w: W, rows: &[(f64, f64, RegimeClass)]) -> Result<()> {
    let mut w = writer(w);
    w.write_record(["f", "delta", "class", "d0", "d1", "d2"]).map_err(csv_err)?;
    for (f, delta, c) in rows {
        let [d0, d1, d2] = c.boundary_distances;
        row(
            &mut w,
            [fmt_f64(*f), fmt_f64(*delta), c.label.to_string(), fmt_f64(d0), fmt_f64(d1), fmt_f64(d2)],
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Writes one compact JSON document per line.
pub fn write_json_lines<W: Write, T: Serialize>(mut w: W, items: &[T]) -> Result<()> {
    for item in items {
        serde_json::to_writer(&mut w, item).map_err(|e| Error::Io(e.to_string()))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<W: Write, T: Serialize>(mut w: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Io(e.to_string()))?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}
