//! File formats: trajectory, forecast, error and slice CSVs, campaign logs.
//! Floats are written with 17 significant digits so every file reads back
//! bit-exact.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::dataset::{FeatureMode, Group, Sample};
use crate::ensemble::{EnsembleForecast, ErrorReport};
use crate::error::{Error, Result};
use crate::hyperopt::Trial;
use crate::tdvp::{DensityRow, Trajectory};

pub const TRAJECTORY_HEADER: [&str; 5] = ["t_fs", "rho11", "rho22", "re_rho12", "im_rho12"];

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("bad number `{s}` in column {what}")))
}

fn check_header(found: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    if found.iter().ne(expected.iter().copied()) {
        return Err(Error::Parse(format!(
            "expected header `{}`, found `{}`",
            expected.join(","),
            found.iter().collect::<Vec<_>>().join(",")
        )));
    }
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

pub fn write_trajectory_to<W: Write>(w: W, traj: &Trajectory) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(TRAJECTORY_HEADER)?;
    for (t, r) in traj.times.iter().zip(&traj.rows) {
        out.write_record([*t, r.rho11, r.rho22, r.re_rho12, r.im_rho12].map(fmt_f64))?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_trajectory_from<R: Read>(r: R) -> Result<Trajectory> {
    let mut rd = csv::Reader::from_reader(r);
    check_header(rd.headers()?, &TRAJECTORY_HEADER)?;
    let mut traj = Trajectory::default();
    for rec in rd.records() {
        let rec = rec?;
        let v: Vec<f64> = rec
            .iter()
            .zip(TRAJECTORY_HEADER)
            .map(|(s, name)| parse_f64(s, name))
            .collect::<Result<_>>()?;
        if v.len() != 5 {
            return Err(Error::Parse(format!("trajectory row has {} fields", v.len())));
        }
        traj.push(
            v[0],
            DensityRow {
                rho11: v[1],
                rho22: v[2],
                re_rho12: v[3],
                im_rho12: v[4],
            },
        );
    }
    Ok(traj)
}

pub fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<()> {
    write_trajectory_to(create(path)?, traj)
}

pub fn read_trajectory(path: &Path) -> Result<Trajectory> {
    read_trajectory_from(File::open(path)?)
}

const FEATURE_SUFFIX: [&str; 3] = ["delta", "re12", "im12"];

pub fn forecast_header(mode: FeatureMode) -> Vec<String> {
    let mut h = vec!["t_fs".to_string()];
    for f in &FEATURE_SUFFIX[..mode.dim()] {
        h.push(format!("mean_{f}"));
        h.push(format!("std_{f}"));
    }
    h.push("n_members".into());
    h
}

pub fn write_forecast_to<W: Write>(w: W, f: &EnsembleForecast) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(forecast_header(f.mode))?;
    for (k, t) in f.times.iter().enumerate() {
        let mut rec = vec![fmt_f64(*t)];
        for j in 0..f.mode.dim() {
            rec.push(fmt_f64(f.mean[[k, j]]));
            rec.push(fmt_f64(f.std[[k, j]]));
        }
        rec.push(f.n_members.to_string());
        out.write_record(rec)?;
    }
    out.flush()?;
    Ok(())
}

fn mode_from_header(h: &csv::StringRecord, base: usize, per_feature: usize) -> Result<FeatureMode> {
    match h.len() {
        n if n == base + per_feature * 3 => Ok(FeatureMode::Full),
        n if n == base + per_feature => Ok(FeatureMode::Population),
        n => Err(Error::Parse(format!("unexpected column count {n}"))),
    }
}

pub fn read_forecast_from<R: Read>(r: R) -> Result<EnsembleForecast> {
    let mut rd = csv::Reader::from_reader(r);
    let header = rd.headers()?.clone();
    let mode = mode_from_header(&header, 2, 2)?;
    let expected = forecast_header(mode);
    check_header(&header, &expected.iter().map(String::as_str).collect::<Vec<_>>())?;
    let d = mode.dim();
    let mut times = Vec::new();
    let mut mean = Vec::new();
    let mut std = Vec::new();
    let mut n_members = 0;
    for rec in rd.records() {
        let rec = rec?;
        times.push(parse_f64(&rec[0], "t_fs")?);
        for j in 0..d {
            mean.push(parse_f64(&rec[1 + 2 * j], &expected[1 + 2 * j])?);
            std.push(parse_f64(&rec[2 + 2 * j], &expected[2 + 2 * j])?);
        }
        n_members = rec[1 + 2 * d]
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad member count `{}`", &rec[1 + 2 * d])))?;
    }
    let n = times.len();
    Ok(EnsembleForecast {
        mode,
        times,
        mean: Array2::from_shape_vec((n, d), mean).expect("row-major"),
        std: Array2::from_shape_vec((n, d), std).expect("row-major"),
        n_members,
    })
}

pub fn write_forecast(path: &Path, f: &EnsembleForecast) -> Result<()> {
    write_forecast_to(create(path)?, f)
}

pub fn read_forecast(path: &Path) -> Result<EnsembleForecast> {
    read_forecast_from(File::open(path)?)
}

pub fn error_header(mode: FeatureMode) -> Vec<String> {
    std::iter::once("t_fs".to_string())
        .chain(FEATURE_SUFFIX[..mode.dim()].iter().map(|f| format!("err_{f}")))
        .collect()
}

pub fn write_errors_to<W: Write>(w: W, report: &ErrorReport) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(error_header(report.mode))?;
    for (k, t) in report.times.iter().enumerate() {
        let rec: Vec<String> = std::iter::once(*t)
            .chain(report.signed.row(k).iter().copied())
            .map(fmt_f64)
            .collect();
        out.write_record(rec)?;
    }
    out.flush()?;
    Ok(())
}

/// (mode, times, signed errors)
pub fn read_errors_from<R: Read>(r: R) -> Result<(FeatureMode, Vec<f64>, Array2<f64>)> {
    let mut rd = csv::Reader::from_reader(r);
    let header = rd.headers()?.clone();
    let mode = mode_from_header(&header, 1, 1)?;
    check_header(&header, &error_header(mode).iter().map(String::as_str).collect::<Vec<_>>())?;
    let mut times = Vec::new();
    let mut vals = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        times.push(parse_f64(&rec[0], "t_fs")?);
        for j in 0..mode.dim() {
            vals.push(parse_f64(&rec[1 + j], "err")?);
        }
    }
    let n = times.len();
    Ok((mode, times, Array2::from_shape_vec((n, mode.dim()), vals).expect("row-major")))
}

/// Error CSV plus the JSON summary next to it.
pub fn write_error_report(csv_path: &Path, summary_path: &Path, report: &ErrorReport) -> Result<()> {
    write_errors_to(create(csv_path)?, report)?;
    let mut w = create(summary_path)?;
    serde_json::to_writer_pretty(&mut w, &report.summary)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub const SLICE_HEADER: [&str; 6] = ["group", "start", "end", "target", "t_start_fs", "t_target_fs"];

/// One row per sample: group, input rows `start..end`, target row.
pub fn write_slices_to<W: Write>(w: W, tagged: &[(Group, Sample)], times: &[f64]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(SLICE_HEADER)?;
    for (g, s) in tagged {
        let t_target = times
            .get(s.target())
            .ok_or_else(|| Error::Shape(format!("sample {s:?} runs past the series")))?;
        out.write_record([
            g.to_string(),
            s.start.to_string(),
            (s.start + s.len).to_string(),
            s.target().to_string(),
            fmt_f64(times[s.start]),
            fmt_f64(*t_target),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_slices_from<R: Read>(r: R) -> Result<Vec<(Group, Sample)>> {
    let mut rd = csv::Reader::from_reader(r);
    check_header(rd.headers()?, &SLICE_HEADER)?;
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let group = match &rec[0] {
            "A1" => Group::A1,
            "A2" => Group::A2,
            "B" => Group::B,
            g => return Err(Error::Parse(format!("unknown group `{g}`"))),
        };
        let idx = |k: usize| -> Result<usize> {
            rec[k]
                .parse()
                .map_err(|_| Error::Parse(format!("bad index `{}` in column {}", &rec[k], SLICE_HEADER[k])))
        };
        let (start, end) = (idx(1)?, idx(2)?);
        if end <= start {
            return Err(Error::Parse(format!("empty window {start}..{end}")));
        }
        out.push((group, Sample { start, len: end - start }));
    }
    Ok(out)
}

pub fn write_trials_to<W: Write>(mut w: W, trials: &[Trial]) -> Result<()> {
    for t in trials {
        serde_json::to_writer(&mut w, t)?;
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trials_from<R: Read>(r: R) -> Result<Vec<Trial>> {
    BufReader::new(r)
        .lines()
        .filter(|l| l.as_ref().map_or(true, |s| !s.trim().is_empty()))
        .map(|l| Ok(serde_json::from_str(&l?)?))
        .collect()
}

pub fn write_trials(path: &Path, trials: &[Trial]) -> Result<()> {
    write_trials_to(create(path)?, trials)
}

pub fn read_trials(path: &Path) -> Result<Vec<Trial>> {
    read_trials_from(File::open(path)?)
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}
