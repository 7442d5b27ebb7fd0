//! Bootstrap and MC-dropout ensembles, ensemble forecasts with per-step
//! standard deviations, and forecast errors against a reference trajectory.

use std::fmt;
use std::str::FromStr;

use ndarray::{s, Array2, ArrayView2};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{slice_windows, split_groups, FeatureMode, FeatureSeries, Sample, SampleSet};
use crate::error::{Error, Result};
use crate::hyperopt::{HyperPoint, Method, TaskResult};
use crate::lstm::{self, Architecture, DropoutMask, LstmNetwork, TrainConfig};
use crate::seed;
use crate::tdvp::Trajectory;

pub const DEFAULT_DROPOUT_RATE: f64 = 0.5;

/// `(OPT-Hk)×BTn×MCm`, either factor optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub method: Method,
    pub structures: usize,
    pub bootstrap: Option<usize>,
    pub dropout: Option<usize>,
    pub dropout_rate: f64,
}

impl EnsembleSpec {
    pub fn new(method: Method, structures: usize, bootstrap: Option<usize>, dropout: Option<usize>) -> Result<Self> {
        let spec = Self {
            method,
            structures,
            bootstrap,
            dropout,
            dropout_rate: DEFAULT_DROPOUT_RATE,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.structures == 0 || self.bootstrap == Some(0) || self.dropout == Some(0) {
            return Err(Error::Config(format!("ensemble counts must be >= 1 in {self}")));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!("dropout rate must lie in [0, 1), got {}", self.dropout_rate)));
        }
        Ok(())
    }

    /// k · max(n, 1) · max(m, 1)
    pub fn member_count(&self) -> usize {
        self.structures * self.bootstrap.unwrap_or(1) * self.dropout.unwrap_or(1)
    }
}

impl fmt::Display for EnsembleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}-H{})", self.method, self.structures)?;
        if let Some(n) = self.bootstrap {
            write!(f, "×BT{n}")?;
        }
        if let Some(m) = self.dropout {
            write!(f, "×MC{m}")?;
        }
        Ok(())
    }
}

fn parse_count(s: &str, what: &str, label: &str) -> Result<usize> {
    s.parse::<usize>()
        .map_err(|_| Error::Parse(format!("bad {what} count `{s}` in ensemble label `{label}`")))
}

impl FromStr for EnsembleSpec {
    type Err = Error;

    /// Accepts `×`, `x`, `X` or `*` between factors, whitespace anywhere and
    /// optional parentheses: `(SA-H10)×BT100`, `sa-h1 x bt50 x mc50`.
    fn from_str(label: &str) -> Result<Self> {
        let compact: String = label.chars().filter(|c| !c.is_whitespace()).collect();
        let upper = compact.to_ascii_uppercase().replace('×', "*");
        let (head, rest) = match upper.strip_prefix('(') {
            Some(inner) => {
                let close = inner
                    .find(')')
                    .ok_or_else(|| Error::Parse(format!("unbalanced parenthesis in `{label}`")))?;
                (inner[..close].to_string(), inner[close + 1..].to_string())
            }
            None => match upper.find(['*', 'X']) {
                // the method name cannot contain X, so the first separator ends the head
                Some(i) => (upper[..i].to_string(), upper[i..].to_string()),
                None => (upper.clone(), String::new()),
            },
        };
        let (method, k) = head
            .split_once("-H")
            .ok_or_else(|| Error::Parse(format!("expected `METHOD-Hk` in `{label}`")))?;
        let mut spec = EnsembleSpec {
            method: method.parse()?,
            structures: parse_count(k, "structure", label)?,
            bootstrap: None,
            dropout: None,
            dropout_rate: DEFAULT_DROPOUT_RATE,
        };
        for part in rest.split(['*', 'X']).filter(|p| !p.is_empty()) {
            if let Some(n) = part.strip_prefix("BT") {
                if spec.bootstrap.replace(parse_count(n, "bootstrap", label)?).is_some() {
                    return Err(Error::Parse(format!("BT given twice in `{label}`")));
                }
            } else if let Some(m) = part.strip_prefix("MC") {
                if spec.dropout.replace(parse_count(m, "dropout", label)?).is_some() {
                    return Err(Error::Parse(format!("MC given twice in `{label}`")));
                }
            } else {
                return Err(Error::Parse(format!("unknown factor `{part}` in `{label}`")));
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// m draws with replacement from m items.
pub fn bootstrap_resample<T: Clone, R: Rng>(data: &[T], rng: &mut R) -> Result<Vec<T>> {
    if data.is_empty() {
        return Err(Error::InsufficientData("cannot resample an empty dataset".into()));
    }
    Ok((0..data.len()).map(|_| data[rng.random_range(0..data.len())].clone()).collect())
}

/// Resample A1 ∪ A2 and cut the draw 7:3 into training and early-stopping sets.
pub fn bootstrap_split(group_a: &[Sample], seed: u64) -> Result<(Vec<Sample>, Vec<Sample>)> {
    let mut draw = bootstrap_resample(group_a, &mut seed::rng(seed))?;
    let validation = draw.split_off(draw.len() * 7 / 10);
    if draw.is_empty() || validation.is_empty() {
        return Err(Error::InsufficientData(format!(
            "{} samples are too few for a 7:3 bootstrap split",
            group_a.len()
        )));
    }
    Ok((draw, validation))
}

/// Architecture with the last hidden layer doubled.
pub fn doubled_last_layer(arch: &Architecture) -> Architecture {
    let mut out = arch.clone();
    if let Some(w) = out.hidden.last_mut() {
        *w *= 2;
    }
    out
}

/// `m` copies of the doubled architecture, each with its own fixed mask.
pub fn mc_dropout_variants(
    base: &Architecture,
    m: usize,
    rate: f64,
    seed: u64,
) -> Result<Vec<(Architecture, DropoutMask)>> {
    if m == 0 {
        return Err(Error::Config("need at least one dropout variant".into()));
    }
    let arch = doubled_last_layer(base);
    let width = *arch.hidden.last().ok_or_else(|| Error::Config("no hidden layer".into()))?;
    (0..m)
        .map(|j| {
            let mask = DropoutMask::random(width, rate, &mut seed::rng(seed::derive(seed, "mask", j as u64)))?;
            Ok((arch.clone(), mask))
        })
        .collect()
}

/// Fresh initialization from `seed`, then full training.
pub fn retrain(
    arch: &Architecture,
    mask: Option<DropoutMask>,
    series: &FeatureSeries,
    train: &[Sample],
    validation: &[Sample],
    cfg: &TrainConfig,
    seed: u64,
) -> Result<LstmNetwork> {
    let mut net = LstmNetwork::new(arch.clone(), &mut seed::rng(seed::derive(seed, "init", 0)))?;
    net.set_mask(mask)?;
    let a1 = SampleSet::gather(series, train)?;
    let a2 = SampleSet::gather(series, validation)?;
    let cfg = TrainConfig {
        seed: seed::derive(seed, "shuffle", 0),
        ..cfg.clone()
    };
    lstm::train(&mut net, &a1, &a2, &cfg)?;
    Ok(net)
}

/// A network structure selected by a campaign, with the network its trial trained.
#[derive(Debug, Clone)]
pub struct Structure {
    pub x: HyperPoint,
    pub network: Option<LstmNetwork>,
}

impl Structure {
    pub fn from_task(task: &TaskResult) -> Self {
        Self {
            x: task.best_trial().x.clone(),
            network: task.best_network.clone(),
        }
    }

    pub fn architecture(&self, series: &FeatureSeries) -> Result<Architecture> {
        let dt = series
            .time_step()
            .ok_or_else(|| Error::InsufficientData("series needs two rows".into()))?;
        Ok(Architecture {
            input_dim: series.dim(),
            hidden: self.x.neurons.clone(),
            output_dim: series.dim(),
            window_length: crate::dataset::memory_time_to_steps(self.x.memory_time, dt)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemberInfo {
    pub index: usize,
    pub structure: usize,
    pub resample: Option<usize>,
    pub variant: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct Member {
    pub info: MemberInfo,
    pub network: LstmNetwork,
}

#[derive(Debug, Clone)]
pub struct Ensemble {
    pub spec: EnsembleSpec,
    pub members: Vec<Member>,
    /// Members whose training diverged, with the reason.
    pub discarded: Vec<(MemberInfo, String)>,
}

impl Ensemble {
    pub fn networks(&self) -> Vec<&LstmNetwork> {
        self.members.iter().map(|m| &m.network).collect()
    }
}

/// Every (structure, resample, variant) combination the spec asks for, in
/// member-index order.
pub fn member_plan(spec: &EnsembleSpec) -> Vec<MemberInfo> {
    let n = spec.bootstrap.unwrap_or(1);
    let m = spec.dropout.unwrap_or(1);
    let mut out = Vec::with_capacity(spec.member_count());
    for s in 0..spec.structures {
        for i in 0..n {
            for j in 0..m {
                out.push(MemberInfo {
                    index: out.len(),
                    structure: s,
                    resample: spec.bootstrap.map(|_| i),
                    variant: spec.dropout.map(|_| j),
                });
            }
        }
    }
    out
}

/// Train every member of `spec` on `history`. Without BT and MC a member is
/// the structure's campaign network when one is available. Diverged members
/// are dropped and listed in [`Ensemble::discarded`].
pub fn build_ensemble(
    spec: &EnsembleSpec,
    structures: &[Structure],
    history: &FeatureSeries,
    cfg: &TrainConfig,
    master_seed: u64,
) -> Result<Ensemble> {
    spec.validate()?;
    if structures.len() < spec.structures {
        return Err(Error::Config(format!(
            "{spec} needs {} structures, the campaign supplied {}",
            spec.structures,
            structures.len()
        )));
    }
    let n = spec.bootstrap.unwrap_or(1);
    let plan = member_plan(spec);
    let results: Vec<Result<LstmNetwork>> = plan
        .par_iter()
        .map(|info| {
            let structure = &structures[info.structure];
            let arch = structure.architecture(history)?;
            if info.resample.is_none() && info.variant.is_none() {
                if let Some(net) = &structure.network {
                    return Ok(net.clone());
                }
            }
            let draw = (info.structure * n + info.resample.unwrap_or(0)) as u64;
            let samples = slice_windows(history, arch.window_length)?;
            let (train, validation) = match info.resample {
                Some(_) => {
                    let split = split_groups(&samples, 0)?;
                    bootstrap_split(&split.group_a(), seed::derive(master_seed, "ensemble/resample", draw))?
                }
                None => {
                    let split = split_groups(&samples, seed::derive(master_seed, "ensemble/split", draw))?;
                    (split.train, split.validation)
                }
            };
            let (arch, mask) = match info.variant {
                Some(j) => {
                    let mut variants = mc_dropout_variants(
                        &arch,
                        j + 1,
                        spec.dropout_rate,
                        seed::derive(master_seed, "ensemble/masks", draw),
                    )?;
                    let (a, m) = variants.pop().expect("j + 1 variants");
                    (a, Some(m))
                }
                None => (arch, None),
            };
            retrain(
                &arch,
                mask,
                history,
                &train,
                &validation,
                cfg,
                seed::derive(master_seed, "ensemble/member", info.index as u64),
            )
        })
        .collect();
    let mut members = Vec::new();
    let mut discarded = Vec::new();
    for (info, res) in plan.into_iter().zip(results) {
        match res {
            Ok(network) => members.push(Member { info, network }),
            Err(e @ Error::Divergence { .. }) => {
                log::warn!("ensemble member {} dropped: {e}", info.index);
                discarded.push((info, e.to_string()));
            }
            Err(e) => return Err(e),
        }
    }
    if members.is_empty() {
        return Err(Error::Numerical(format!("every member of {spec} diverged")));
    }
    Ok(Ensemble {
        spec: spec.clone(),
        members,
        discarded,
    })
}

/// Mean and population standard deviation of member rollouts.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleForecast {
    pub mode: FeatureMode,
    pub times: Vec<f64>,
    pub mean: Array2<f64>,
    pub std: Array2<f64>,
    pub n_members: usize,
}

impl EnsembleForecast {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Seed every member with the last L rows of `history` (its own window
/// length), roll out `times.len()` steps and reduce per step. Deviations are
/// taken from the first member's value so identical members give exactly
/// zero spread.
pub fn ensemble_predict(
    members: &[&LstmNetwork],
    history: ArrayView2<'_, f64>,
    times: &[f64],
    mode: FeatureMode,
) -> Result<EnsembleForecast> {
    if members.is_empty() {
        return Err(Error::InsufficientData("an ensemble forecast needs at least one member".into()));
    }
    if history.ncols() != mode.dim() {
        return Err(Error::Shape(format!(
            "history has {} features, mode {mode} has {}",
            history.ncols(),
            mode.dim()
        )));
    }
    let n = history.nrows();
    if let Some(bad) = members.iter().find(|m| m.window_length() > n) {
        return Err(Error::Shape(format!(
            "member window of {} steps is longer than the {n}-row history",
            bad.window_length()
        )));
    }
    let rollouts = members
        .par_iter()
        .map(|m| m.predict_autoregressive(history.slice(s![n - m.window_length().., ..]), times.len()))
        .collect::<Result<Vec<_>>>()?;
    let (mean, std) = rollout_statistics(&rollouts);
    Ok(EnsembleForecast {
        mode,
        times: times.to_vec(),
        mean,
        std,
        n_members: members.len(),
    })
}

/// Element-wise mean and population standard deviation over member rollouts.
/// Panics on an empty slice.
pub fn rollout_statistics(rollouts: &[Array2<f64>]) -> (Array2<f64>, Array2<f64>) {
    let n = rollouts.len() as f64;
    let base = &rollouts[0];
    let mut shift = Array2::<f64>::zeros(base.raw_dim());
    for r in rollouts {
        shift += &(r - base);
    }
    shift /= n;
    let mean = base + &shift;
    let mut var = Array2::<f64>::zeros(base.raw_dim());
    for r in rollouts {
        let d = r - &mean;
        var += &(&d * &d);
    }
    var /= n;
    (mean, var.mapv(f64::sqrt))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    /// max |error in Δ| over the horizon
    pub max_abs_err: f64,
    pub mean_abs_err: f64,
    pub horizon_fs: f64,
    /// Mean σ of Δ over the horizon.
    pub mean_std: f64,
    /// Fraction of steps with |error in Δ| ≤ 2σ.
    pub coverage_2sigma: f64,
    pub n_members: usize,
}

/// Signed errors (forecast − reference) per step and feature.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub mode: FeatureMode,
    pub times: Vec<f64>,
    pub signed: Array2<f64>,
    pub summary: ErrorSummary,
}

impl ErrorReport {
    pub fn abs(&self) -> Array2<f64> {
        self.signed.mapv(f64::abs)
    }
}

/// Reference rows on the forecast's time grid.
pub fn aligned_reference(times: &[f64], reference: &Trajectory, mode: FeatureMode) -> Result<Array2<f64>> {
    let series = crate::dataset::vectorize(reference, mode);
    let tol = 1e-6;
    let t0 = *times.first().ok_or_else(|| Error::InsufficientData("empty forecast".into()))?;
    let start = series
        .times
        .iter()
        .position(|t| (t - t0).abs() < tol)
        .ok_or_else(|| Error::Shape(format!("reference has no sample at t = {t0} fs")))?;
    if start + times.len() > series.len() {
        return Err(Error::Shape(format!(
            "reference ends at {} fs, forecast runs to {} fs",
            series.times.last().copied().unwrap_or(0.0),
            times.last().copied().unwrap_or(0.0)
        )));
    }
    for (k, t) in times.iter().enumerate() {
        if (series.times[start + k] - t).abs() > tol {
            return Err(Error::Shape(format!(
                "time grids differ at step {k}: forecast {t} fs, reference {} fs",
                series.times[start + k]
            )));
        }
    }
    Ok(series.rows.slice(s![start..start + times.len(), ..]).to_owned())
}

pub fn prediction_error(forecast: &EnsembleForecast, reference: &Trajectory) -> Result<ErrorReport> {
    let truth = aligned_reference(&forecast.times, reference, forecast.mode)?;
    let signed = &forecast.mean - &truth;
    let n = forecast.len().max(1) as f64;
    let delta_err = signed.column(0);
    let delta_std = forecast.std.column(0);
    let covered = delta_err
        .iter()
        .zip(delta_std)
        .filter(|(e, s)| e.abs() <= 2.0 * *s)
        .count();
    let summary = ErrorSummary {
        max_abs_err: delta_err.iter().fold(0.0, |m, e| m.max(e.abs())),
        mean_abs_err: delta_err.iter().map(|e| e.abs()).sum::<f64>() / n,
        horizon_fs: match (forecast.times.first(), forecast.times.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        },
        mean_std: delta_std.sum() / n,
        coverage_2sigma: covered as f64 / n,
        n_members: forecast.n_members,
    };
    Ok(ErrorReport {
        mode: forecast.mode,
        times: forecast.times.clone(),
        signed,
        summary,
    })
}
