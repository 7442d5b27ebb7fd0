//! Feature vectors, sliding windows and the chronological / random splits.

use std::fmt;
use std::str::FromStr;

use ndarray::{s, Array2, Array3, ArrayView2};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tdvp::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureMode {
    /// [Δ, Re ρ₁₂, Im ρ₁₂]
    #[default]
    Full,
    /// [Δ]
    Population,
}

impl FeatureMode {
    pub fn dim(self) -> usize {
        match self {
            FeatureMode::Full => 3,
            FeatureMode::Population => 1,
        }
    }
}

impl FromStr for FeatureMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "full" => Ok(FeatureMode::Full),
            "population" | "population-only" => Ok(FeatureMode::Population),
            _ => Err(Error::Parse(format!("feature mode must be `full` or `population`, got `{s}`"))),
        }
    }
}

impl fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureMode::Full => "full",
            FeatureMode::Population => "population",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSeries {
    pub mode: FeatureMode,
    pub times: Vec<f64>,
    /// One row per time, `mode.dim()` columns.
    pub rows: Array2<f64>,
}

impl FeatureSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.rows.ncols()
    }

    /// First `n` rows.
    pub fn prefix(&self, n: usize) -> FeatureSeries {
        let n = n.min(self.len());
        FeatureSeries {
            mode: self.mode,
            times: self.times[..n].to_vec(),
            rows: self.rows.slice(s![..n, ..]).to_owned(),
        }
    }

    pub fn time_step(&self) -> Option<f64> {
        (self.times.len() >= 2).then(|| self.times[1] - self.times[0])
    }
}

pub fn vectorize(traj: &Trajectory, mode: FeatureMode) -> FeatureSeries {
    let d = mode.dim();
    let mut rows = Array2::<f64>::zeros((traj.len(), d));
    for (mut out, r) in rows.outer_iter_mut().zip(&traj.rows) {
        out[0] = r.rho11 - r.rho22;
        if mode == FeatureMode::Full {
            out[1] = r.re_rho12;
            out[2] = r.im_rho12;
        }
    }
    FeatureSeries {
        mode,
        times: traj.times.clone(),
        rows,
    }
}

/// Input rows `start .. start + len`, target row `start + len`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Sample {
    pub start: usize,
    pub len: usize,
}

impl Sample {
    pub fn target(&self) -> usize {
        self.start + self.len
    }
}

pub fn slice_windows(series: &FeatureSeries, window: usize) -> Result<Vec<Sample>> {
    if window == 0 {
        return Err(Error::Config("window length must be >= 1".into()));
    }
    let n = series.len();
    if n <= window {
        return Err(Error::InsufficientData(format!(
            "series of {n} rows cannot hold a window of {window} steps plus a target"
        )));
    }
    Ok((0..n - window).map(|start| Sample { start, len: window }).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Group {
    A1,
    A2,
    B,
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Group::A1 => "A1",
            Group::A2 => "A2",
            Group::B => "B",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowedDataset {
    pub window_length: usize,
    /// A1, shuffled.
    pub train: Vec<Sample>,
    /// A2, shuffled.
    pub validation: Vec<Sample>,
    /// B, chronological.
    pub external: Vec<Sample>,
}

impl WindowedDataset {
    pub fn len(&self) -> usize {
        self.train.len() + self.validation.len() + self.external.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// A1 ∪ A2 in chronological order.
    pub fn group_a(&self) -> Vec<Sample> {
        let mut a: Vec<Sample> = self.train.iter().chain(&self.validation).copied().collect();
        a.sort();
        a
    }

    pub fn tagged(&self) -> Vec<(Group, Sample)> {
        let mut out: Vec<(Group, Sample)> = self
            .train
            .iter()
            .map(|&s| (Group::A1, s))
            .chain(self.validation.iter().map(|&s| (Group::A2, s)))
            .chain(self.external.iter().map(|&s| (Group::B, s)))
            .collect();
        out.sort_by_key(|(_, s)| *s);
        out
    }
}

/// Smallest sample count [`split_groups`] accepts.
pub const MIN_SAMPLES: usize = 8;

/// First ⌊3n/4⌋ samples by start time form A, the rest B. A is shuffled with
/// `seed` and cut ⌊7|A|/10⌋ : remainder into A1 : A2.
pub fn split_groups(samples: &[Sample], seed: u64) -> Result<WindowedDataset> {
    if samples.len() < MIN_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "{} samples; splitting needs at least {MIN_SAMPLES}",
            samples.len()
        )));
    }
    let window_length = samples[0].len;
    if samples.iter().any(|s| s.len != window_length) {
        return Err(Error::Shape("samples have differing window lengths".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort();
    let n_a = sorted.len() * 3 / 4;
    let external = sorted.split_off(n_a);
    let mut a = sorted;
    a.shuffle(&mut crate::seed::rng(seed));
    let validation = a.split_off(a.len() * 7 / 10);
    Ok(WindowedDataset {
        window_length,
        train: a,
        validation,
        external,
    })
}

pub fn memory_time_to_steps(tau: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("time step must be > 0, got {dt}")));
    }
    if !(tau >= dt * (1.0 - 1e-9)) {
        return Err(Error::Domain(format!("memory time {tau} fs is shorter than the step {dt} fs")));
    }
    Ok((tau / dt).round() as usize)
}

/// Dense tensors for a set of samples: inputs (n, L, d) and targets (n, d).
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub inputs: Array3<f64>,
    pub targets: Array2<f64>,
}

impl SampleSet {
    pub fn gather(series: &FeatureSeries, samples: &[Sample]) -> Result<Self> {
        let d = series.dim();
        let l = samples.first().map_or(0, |s| s.len);
        let mut inputs = Array3::<f64>::zeros((samples.len(), l, d));
        let mut targets = Array2::<f64>::zeros((samples.len(), d));
        for (k, smp) in samples.iter().enumerate() {
            if smp.len != l || smp.target() >= series.len() {
                return Err(Error::Shape(format!("sample {smp:?} does not fit the series")));
            }
            inputs
                .slice_mut(s![k, .., ..])
                .assign(&series.rows.slice(s![smp.start..smp.target(), ..]));
            targets.row_mut(k).assign(&series.rows.row(smp.target()));
        }
        Ok(Self { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.targets.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn window_length(&self) -> usize {
        self.inputs.shape()[1]
    }

    pub fn dim(&self) -> usize {
        self.targets.ncols()
    }

    pub fn select(&self, idx: &[usize]) -> SampleSet {
        SampleSet {
            inputs: self.inputs.select(ndarray::Axis(0), idx),
            targets: self.targets.select(ndarray::Axis(0), idx),
        }
    }

    pub fn concat(&self, other: &SampleSet) -> Result<SampleSet> {
        if self.inputs.shape()[1..] != other.inputs.shape()[1..] {
            return Err(Error::Shape("sample sets differ in window or feature size".into()));
        }
        Ok(SampleSet {
            inputs: ndarray::concatenate(ndarray::Axis(0), &[self.inputs.view(), other.inputs.view()])
                .expect("matching shapes"),
            targets: ndarray::concatenate(ndarray::Axis(0), &[self.targets.view(), other.targets.view()])
                .expect("matching shapes"),
        })
    }

    /// Input window of sample `k`.
    pub fn window(&self, k: usize) -> ArrayView2<'_, f64> {
        self.inputs.slice(s![k, .., ..])
    }
}
