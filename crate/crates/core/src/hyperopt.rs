//! Hyperparameter search over layer count, per-layer widths and memory time:
//! random search, simulated annealing and tree-structured Parzen estimators,
//! plus the multi-task campaign driver and top-K selection.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{memory_time_to_steps, slice_windows, split_groups, FeatureSeries, SampleSet};
use crate::error::{Error, Result};
use crate::lstm::{self, Architecture, LstmNetwork, TrainConfig};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "RS")]
    RandomSearch,
    #[serde(rename = "SA")]
    SimulatedAnnealing,
    /// BO-TPE
    #[serde(rename = "BO")]
    Tpe,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::SimulatedAnnealing, Method::Tpe, Method::RandomSearch];

    pub fn label(self) -> &'static str {
        match self {
            Method::RandomSearch => "RS",
            Method::SimulatedAnnealing => "SA",
            Method::Tpe => "BO",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "RS" | "RANDOM" => Ok(Method::RandomSearch),
            "SA" | "ANNEALING" => Ok(Method::SimulatedAnnealing),
            "BO" | "TPE" | "BO-TPE" => Ok(Method::Tpe),
            _ => Err(Error::Parse(format!("unknown search method `{s}` (expected SA, BO/TPE or RS)"))),
        }
    }
}

/// Discrete search grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub layer_counts: Vec<usize>,
    pub neuron_grid: Vec<usize>,
    /// Memory times in fs, all multiples of the series step.
    pub memory_times: Vec<f64>,
}

/// 10, 30, ..., 510
pub fn paper_neuron_grid() -> Vec<usize> {
    (0..26).map(|k| 10 + 20 * k).collect()
}

/// Multiples of `dt` from `lo` to `hi` fs inclusive, every `stride` steps.
pub fn memory_time_grid(lo: f64, hi: f64, dt: f64, stride: usize) -> Result<Vec<f64>> {
    if !(dt > 0.0) || stride == 0 {
        return Err(Error::Config("memory-time grid needs dt > 0 and stride >= 1".into()));
    }
    let first = (lo / dt - 1e-9).ceil() as usize;
    let last = (hi / dt + 1e-9).floor() as usize;
    let grid: Vec<f64> = (first.max(1)..=last).step_by(stride).map(|k| k as f64 * dt).collect();
    if grid.is_empty() {
        return Err(Error::Config(format!("no memory time between {lo} and {hi} fs")));
    }
    Ok(grid)
}

impl SearchSpace {
    pub fn new(layer_counts: Vec<usize>, neuron_grid: Vec<usize>, memory_times: Vec<f64>) -> Result<Self> {
        let space = Self {
            layer_counts,
            neuron_grid,
            memory_times,
        };
        space.validate()?;
        Ok(space)
    }

    /// Layers {2,3,4}, widths 10..=510 by 20, memory time 5 fs ..= T_hist/4
    /// in steps of `dt`.
    pub fn paper(t_hist: f64, dt: f64) -> Result<Self> {
        Self::new(vec![2, 3, 4], paper_neuron_grid(), memory_time_grid(5.0, t_hist / 4.0, dt, 1)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_counts.is_empty() || self.neuron_grid.is_empty() || self.memory_times.is_empty() {
            return Err(Error::Config("search grids must be non-empty".into()));
        }
        if self.layer_counts.contains(&0) || self.neuron_grid.contains(&0) {
            return Err(Error::Config("layer counts and widths must be >= 1".into()));
        }
        if self.memory_times.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::Config("memory times must be > 0".into()));
        }
        Ok(())
    }

    pub fn max_layers(&self) -> usize {
        *self.layer_counts.iter().max().expect("validated")
    }

    /// Number of distinct architectures × memory times.
    pub fn cardinality(&self) -> f64 {
        let w = self.neuron_grid.len() as f64;
        let per_tau: f64 = self.layer_counts.iter().map(|&l| w.powi(l as i32)).sum();
        per_tau * self.memory_times.len() as f64
    }

    pub fn contains(&self, x: &HyperPoint) -> bool {
        self.layer_counts.contains(&x.layers)
            && x.neurons.len() == x.layers
            && x.neurons.iter().all(|n| self.neuron_grid.contains(n))
            && self.memory_times.iter().any(|t| (t - x.memory_time).abs() < 1e-9)
    }

    fn decode(&self, c: &Coords) -> HyperPoint {
        let layers = self.layer_counts[c.layer];
        HyperPoint {
            layers,
            neurons: c.neurons[..layers].iter().map(|&i| self.neuron_grid[i]).collect(),
            memory_time: self.memory_times[c.tau],
        }
    }

    fn random_coords<R: Rng>(&self, rng: &mut R) -> Coords {
        Coords {
            layer: rng.random_range(0..self.layer_counts.len()),
            neurons: (0..self.max_layers())
                .map(|_| rng.random_range(0..self.neuron_grid.len()))
                .collect(),
            tau: rng.random_range(0..self.memory_times.len()),
        }
    }

    /// Uniform draw over the discrete space.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> HyperPoint {
        self.decode(&self.random_coords(rng))
    }
}

/// One point of the search space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperPoint {
    pub layers: usize,
    pub neurons: Vec<usize>,
    /// fs
    pub memory_time: f64,
}

impl fmt::Display for HyperPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let widths: Vec<String> = self.neurons.iter().map(ToString::to_string).collect();
        write!(f, "[{}] tau={} fs", widths.join("-"), self.memory_time)
    }
}

/// Grid indices. Widths of layers beyond the active count are kept so that
/// growing the network later restores them.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Coords {
    layer: usize,
    neurons: Vec<usize>,
    tau: usize,
}

/// Objective value and, for trained objectives, the trained network.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub loss: f64,
    pub network: Option<LstmNetwork>,
}

pub trait Objective: Sync {
    fn evaluate(&self, x: &HyperPoint, seed: u64) -> Result<Evaluation>;
}

/// f = (n₁ − 170)² + 100·|layers − 3| + (τ − 50)², minimum 0.
#[derive(Debug, Clone, Copy, Default)]
pub struct SyntheticObjective;

impl SyntheticObjective {
    pub fn value(x: &HyperPoint) -> f64 {
        let n1 = x.neurons[0] as f64 - 170.0;
        n1 * n1 + 100.0 * (x.layers as f64 - 3.0).abs() + (x.memory_time - 50.0).powi(2)
    }
}

impl Objective for SyntheticObjective {
    fn evaluate(&self, x: &HyperPoint, _seed: u64) -> Result<Evaluation> {
        Ok(Evaluation {
            loss: Self::value(x),
            network: None,
        })
    }
}

/// Train an LSTM at x on the A1/A2 split of the history, roll it out over
/// group B and score the rollout MSE.
#[derive(Debug, Clone)]
pub struct LstmObjective {
    pub history: FeatureSeries,
    pub train: TrainConfig,
}

/// Everything one trained candidate produced.
#[derive(Debug, Clone)]
pub struct TrainedCandidate {
    pub network: LstmNetwork,
    pub report: lstm::TrainReport,
    pub external_loss: f64,
}

impl LstmObjective {
    pub fn new(history: FeatureSeries, train: TrainConfig) -> Result<Self> {
        if history.time_step().is_none() {
            return Err(Error::InsufficientData("history needs at least two rows".into()));
        }
        Ok(Self { history, train })
    }

    pub fn window_length(&self, x: &HyperPoint) -> Result<usize> {
        memory_time_to_steps(x.memory_time, self.history.time_step().expect("checked"))
    }

    pub fn fit(&self, x: &HyperPoint, seed: u64) -> Result<TrainedCandidate> {
        let l = self.window_length(x)?;
        let samples = slice_windows(&self.history, l)?;
        let split = split_groups(&samples, seed::derive(seed, "split", 0))?;
        let a1 = SampleSet::gather(&self.history, &split.train)?;
        let a2 = SampleSet::gather(&self.history, &split.validation)?;
        let arch = Architecture {
            input_dim: self.history.dim(),
            hidden: x.neurons.clone(),
            output_dim: self.history.dim(),
            window_length: l,
        };
        let mut net = LstmNetwork::new(arch, &mut seed::rng(seed::derive(seed, "init", 0)))?;
        let cfg = TrainConfig {
            seed: seed::derive(seed, "shuffle", 0),
            ..self.train.clone()
        };
        let report = lstm::train(&mut net, &a1, &a2, &cfg)?;
        let external_loss = external_rollout_loss(&net, &self.history, split.external[0].start)?;
        Ok(TrainedCandidate {
            network: net,
            report,
            external_loss,
        })
    }
}

/// Seed with the L true rows before `start + L`, roll out to the end of the
/// series and return the MSE against it.
pub fn external_rollout_loss(net: &LstmNetwork, series: &FeatureSeries, start: usize) -> Result<f64> {
    let l = net.window_length();
    let first_target = start + l;
    if first_target >= series.len() {
        return Err(Error::InsufficientData("no external targets to score".into()));
    }
    let seed = series.rows.slice(ndarray::s![start..first_target, ..]);
    let pred = net.predict_autoregressive(seed, series.len() - first_target)?;
    let truth = series.rows.slice(ndarray::s![first_target.., ..]).to_owned();
    Ok(lstm::mse(&pred, &truth))
}

impl Objective for LstmObjective {
    fn evaluate(&self, x: &HyperPoint, seed: u64) -> Result<Evaluation> {
        match self.fit(x, seed) {
            Ok(c) if c.external_loss.is_finite() => Ok(Evaluation {
                loss: c.external_loss,
                network: Some(c.network),
            }),
            Ok(_) | Err(Error::Divergence { .. }) => Ok(Evaluation {
                loss: f64::INFINITY,
                network: None,
            }),
            Err(e) => Err(e),
        }
    }
}

mod loss_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// One evaluated point. Diverged trainings carry `loss = +∞` (`null` in JSON).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub task: usize,
    pub iter: usize,
    pub x: HyperPoint,
    #[serde(with = "loss_serde")]
    pub loss: f64,
    pub wall_ms: u64,
    pub checkpoint_path: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SaConfig {
    pub warmup_probes: usize,
    pub cooling: f64,
}

impl Default for SaConfig {
    fn default() -> Self {
        Self {
            warmup_probes: 10,
            cooling: 0.97,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TpeConfig {
    pub gamma: f64,
    pub n_startup: usize,
    pub n_candidates: usize,
}

impl Default for TpeConfig {
    fn default() -> Self {
        Self {
            gamma: 0.25,
            n_startup: 20,
            n_candidates: 24,
        }
    }
}

/// Metropolis rule: always accept improvements, otherwise accept when
/// `u < exp(−Δf/T)` for a uniform `u` in [0, 1).
pub fn sa_accept(delta: f64, temperature: f64, u: f64) -> bool {
    delta < 0.0 || u < (-delta / temperature).exp()
}

/// EI ∝ (γ + (g/l)(1 − γ))⁻¹.
pub fn expected_improvement(gamma: f64, l: f64, g: f64) -> f64 {
    1.0 / (gamma + (g / l) * (1.0 - gamma))
}

/// Size of the TPE good set for `n` observations.
pub fn good_set_size(gamma: f64, n: usize) -> usize {
    ((gamma * n as f64 - 1e-9).ceil() as usize).clamp(1, n.max(1))
}

/// Result of one search task.
#[derive(Debug, Clone)]
pub struct TaskResult {
    pub task: usize,
    pub seed: u64,
    pub trials: Vec<Trial>,
    /// Index into `trials` of the lowest loss (first on ties).
    pub best: usize,
    pub best_network: Option<LstmNetwork>,
}

impl TaskResult {
    pub fn best_trial(&self) -> &Trial {
        &self.trials[self.best]
    }

    /// Running minimum of the loss after each trial.
    pub fn best_trace(&self) -> Vec<f64> {
        self.trials
            .iter()
            .scan(f64::INFINITY, |m, t| {
                *m = m.min(t.loss);
                Some(*m)
            })
            .collect()
    }
}

struct Recorder<'a, O: Objective + ?Sized> {
    objective: &'a O,
    task: usize,
    task_seed: u64,
    trials: Vec<Trial>,
    best: Option<usize>,
    best_network: Option<LstmNetwork>,
}

impl<'a, O: Objective + ?Sized> Recorder<'a, O> {
    fn new(objective: &'a O, task: usize, task_seed: u64) -> Self {
        Self {
            objective,
            task,
            task_seed,
            trials: Vec::new(),
            best: None,
            best_network: None,
        }
    }

    fn eval(&mut self, x: HyperPoint) -> Result<f64> {
        let iter = self.trials.len();
        let t0 = Instant::now();
        let ev = self
            .objective
            .evaluate(&x, seed::derive(self.task_seed, "trial", iter as u64))?;
        if ev.loss.is_nan() || ev.loss < 0.0 {
            return Err(Error::Numerical(format!("objective returned {} at {x}", ev.loss)));
        }
        if self.best.is_none_or(|b| ev.loss < self.trials[b].loss) {
            self.best = Some(iter);
            self.best_network = ev.network;
        }
        self.trials.push(Trial {
            task: self.task,
            iter,
            x,
            loss: ev.loss,
            wall_ms: t0.elapsed().as_millis() as u64,
            checkpoint_path: None,
        });
        Ok(ev.loss)
    }

    fn finish(self) -> TaskResult {
        TaskResult {
            task: self.task,
            seed: self.task_seed,
            best: self.best.expect("budget >= 1"),
            best_network: self.best_network,
            trials: self.trials,
        }
    }
}

fn check_budget(budget: usize) -> Result<()> {
    if budget == 0 {
        return Err(Error::Config("search budget must be >= 1".into()));
    }
    Ok(())
}

/// `budget` i.i.d. uniform draws.
pub fn random_search<O: Objective + ?Sized>(
    space: &SearchSpace,
    objective: &O,
    budget: usize,
    task: usize,
    task_seed: u64,
) -> Result<TaskResult> {
    space.validate()?;
    check_budget(budget)?;
    let mut rng = seed::rng(seed::derive(task_seed, "search", 0));
    let mut rec = Recorder::new(objective, task, task_seed);
    for _ in 0..budget {
        rec.eval(space.sample(&mut rng))?;
    }
    Ok(rec.finish())
}

/// Move one active coordinate to a neighbouring grid value.
fn neighbor<R: Rng>(space: &SearchSpace, c: &Coords, rng: &mut R) -> Option<Coords> {
    let layers = space.layer_counts[c.layer];
    let sizes: Vec<usize> = std::iter::once(space.layer_counts.len())
        .chain(std::iter::repeat_n(space.neuron_grid.len(), layers))
        .chain(std::iter::once(space.memory_times.len()))
        .collect();
    let movable: Vec<usize> = (0..sizes.len()).filter(|&k| sizes[k] > 1).collect();
    if movable.is_empty() {
        return None;
    }
    let k = movable[rng.random_range(0..movable.len())];
    let mut out = c.clone();
    let slot = match k {
        0 => &mut out.layer,
        k if k <= layers => &mut out.neurons[k - 1],
        _ => &mut out.tau,
    };
    *slot = if *slot == 0 {
        1
    } else if *slot + 1 == sizes[k] || rng.random_bool(0.5) {
        *slot - 1
    } else {
        *slot + 1
    };
    Some(out)
}

/// Simulated annealing. The first evaluation is a random start, the next
/// `warmup_probes` are neighbours of it whose median |Δf| sets T₀; after that
/// T_k = T₀·cooling^k.
pub fn sa_search<O: Objective + ?Sized>(
    space: &SearchSpace,
    objective: &O,
    budget: usize,
    cfg: &SaConfig,
    task: usize,
    task_seed: u64,
) -> Result<TaskResult> {
    space.validate()?;
    check_budget(budget)?;
    if !(cfg.cooling > 0.0 && cfg.cooling <= 1.0) {
        return Err(Error::Config("cooling factor must lie in (0, 1]".into()));
    }
    let mut rng = seed::rng(seed::derive(task_seed, "search", 0));
    let mut rec = Recorder::new(objective, task, task_seed);
    let mut current = space.random_coords(&mut rng);
    let mut f_current = rec.eval(space.decode(&current))?;

    let n_probe = cfg.warmup_probes.min(budget - 1);
    let mut deltas = Vec::with_capacity(n_probe);
    for _ in 0..n_probe {
        let Some(probe) = neighbor(space, &current, &mut rng) else { break };
        let f = rec.eval(space.decode(&probe))?;
        if (f - f_current).is_finite() {
            deltas.push((f - f_current).abs());
        }
    }
    let t0 = initial_temperature(&mut deltas);

    let mut k = 0;
    while rec.trials.len() < budget {
        let Some(next) = neighbor(space, &current, &mut rng) else {
            rec.eval(space.decode(&current))?;
            continue;
        };
        let f = rec.eval(space.decode(&next))?;
        let temperature = t0 * cfg.cooling.powi(k);
        let delta = if f.is_infinite() { f64::INFINITY } else { f - f_current };
        let accept = if f_current.is_infinite() && f.is_finite() {
            true
        } else {
            sa_accept(delta, temperature, rng.random::<f64>())
        };
        if accept {
            current = next;
            f_current = f;
        }
        k += 1;
    }
    Ok(rec.finish())
}

/// Median of the non-zero probe differences; 1 if there are none.
fn initial_temperature(deltas: &mut [f64]) -> f64 {
    deltas.sort_by(f64::total_cmp);
    let med = match deltas.len() {
        0 => 0.0,
        n if n % 2 == 1 => deltas[n / 2],
        n => 0.5 * (deltas[n / 2 - 1] + deltas[n / 2]),
    };
    if med > 0.0 {
        return med;
    }
    let nonzero: Vec<f64> = deltas.iter().copied().filter(|d| *d > 0.0).collect();
    if nonzero.is_empty() {
        1.0
    } else {
        nonzero.iter().sum::<f64>() / nonzero.len() as f64
    }
}

/// Add-one smoothed categorical densities for one coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct Parzen {
    pub probs: Vec<f64>,
}

impl Parzen {
    pub fn fit(values: impl IntoIterator<Item = usize>, n_categories: usize) -> Self {
        let mut counts = vec![1.0; n_categories];
        for v in values {
            counts[v] += 1.0;
        }
        let total: f64 = counts.iter().sum();
        Self {
            probs: counts.into_iter().map(|c| c / total).collect(),
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        self.probs.len() - 1
    }
}

struct TpeModel {
    layer: Parzen,
    neurons: Vec<Parzen>,
    tau: Parzen,
}

impl TpeModel {
    fn fit(space: &SearchSpace, history: &[&Coords]) -> Self {
        Self {
            layer: Parzen::fit(history.iter().map(|c| c.layer), space.layer_counts.len()),
            neurons: (0..space.max_layers())
                .map(|j| {
                    let active = history
                        .iter()
                        .filter(|c| space.layer_counts[c.layer] > j)
                        .map(|c| c.neurons[j]);
                    Parzen::fit(active, space.neuron_grid.len())
                })
                .collect(),
            tau: Parzen::fit(history.iter().map(|c| c.tau), space.memory_times.len()),
        }
    }

    fn log_density(&self, space: &SearchSpace, c: &Coords) -> f64 {
        let layers = space.layer_counts[c.layer];
        self.layer.probs[c.layer].ln()
            + (0..layers).map(|j| self.neurons[j].probs[c.neurons[j]].ln()).sum::<f64>()
            + self.tau.probs[c.tau].ln()
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> Coords {
        Coords {
            layer: self.layer.sample(rng),
            neurons: self.neurons.iter().map(|p| p.sample(rng)).collect(),
            tau: self.tau.sample(rng),
        }
    }
}

/// Indices of the good set: the ⌈γn⌉ lowest losses, ties by order.
pub fn tpe_split(losses: &[f64], gamma: f64) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..losses.len()).collect();
    order.sort_by(|&a, &b| losses[a].total_cmp(&losses[b]).then(a.cmp(&b)));
    let n_good = good_set_size(gamma, losses.len());
    let poor = order.split_off(n_good);
    (order, poor)
}

/// TPE: `n_startup` random draws, then per iteration `n_candidates` draws
/// from l(x) ranked by l(x)/g(x).
pub fn tpe_search<O: Objective + ?Sized>(
    space: &SearchSpace,
    objective: &O,
    budget: usize,
    cfg: &TpeConfig,
    task: usize,
    task_seed: u64,
) -> Result<TaskResult> {
    space.validate()?;
    check_budget(budget)?;
    if !(cfg.gamma > 0.0 && cfg.gamma < 1.0) || cfg.n_candidates == 0 {
        return Err(Error::Config("TPE needs 0 < gamma < 1 and at least one candidate".into()));
    }
    let mut rng = seed::rng(seed::derive(task_seed, "search", 0));
    let mut rec = Recorder::new(objective, task, task_seed);
    let mut coords: Vec<Coords> = Vec::with_capacity(budget);
    while rec.trials.len() < budget {
        let losses: Vec<f64> = rec.trials.iter().map(|t| t.loss).collect();
        let degenerate = losses.windows(2).all(|w| w[0] == w[1]);
        let next = if rec.trials.len() < cfg.n_startup.max(1) || degenerate {
            space.random_coords(&mut rng)
        } else {
            let (good, poor) = tpe_split(&losses, cfg.gamma);
            let l = TpeModel::fit(space, &good.iter().map(|&i| &coords[i]).collect::<Vec<_>>());
            let g = TpeModel::fit(space, &poor.iter().map(|&i| &coords[i]).collect::<Vec<_>>());
            let mut best: Option<(f64, Coords)> = None;
            for _ in 0..cfg.n_candidates {
                let c = l.sample(&mut rng);
                let score = l.log_density(space, &c) - g.log_density(space, &c);
                if best.as_ref().is_none_or(|(s, _)| score > *s) {
                    best = Some((score, c));
                }
            }
            best.expect("n_candidates >= 1").1
        };
        rec.eval(space.decode(&next))?;
        coords.push(next);
    }
    Ok(rec.finish())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub method: Method,
    pub n_tasks: usize,
    pub iters: usize,
    pub master_seed: u64,
    pub sa: SaConfig,
    pub tpe: TpeConfig,
}

impl CampaignConfig {
    /// 20 tasks × 100 iterations.
    pub fn paper(method: Method, master_seed: u64) -> Self {
        Self {
            method,
            n_tasks: 20,
            iters: 100,
            master_seed,
            sa: SaConfig::default(),
            tpe: TpeConfig::default(),
        }
    }

    /// 4 tasks × 25 iterations.
    pub fn desk(method: Method, master_seed: u64) -> Self {
        Self {
            n_tasks: 4,
            iters: 25,
            ..Self::paper(method, master_seed)
        }
    }

    pub fn total_trials(&self) -> usize {
        self.n_tasks * self.iters
    }

    pub fn task_seed(&self, task: usize) -> u64 {
        seed::derive(self.master_seed, "hpo/task", task as u64)
    }
}

pub fn run_task<O: Objective + ?Sized>(
    space: &SearchSpace,
    objective: &O,
    cfg: &CampaignConfig,
    task: usize,
) -> Result<TaskResult> {
    let s = cfg.task_seed(task);
    match cfg.method {
        Method::RandomSearch => random_search(space, objective, cfg.iters, task, s),
        Method::SimulatedAnnealing => sa_search(space, objective, cfg.iters, &cfg.sa, task, s),
        Method::Tpe => tpe_search(space, objective, cfg.iters, &cfg.tpe, task, s),
    }
}

#[derive(Debug, Clone)]
pub struct CampaignResult {
    pub method: Method,
    pub tasks: Vec<TaskResult>,
}

impl CampaignResult {
    pub fn total_trials(&self) -> usize {
        self.tasks.iter().map(|t| t.trials.len()).sum()
    }

    /// All trials in (task, iter) order.
    pub fn trials(&self) -> impl Iterator<Item = &Trial> {
        self.tasks.iter().flat_map(|t| t.trials.iter())
    }

    /// Task bests sorted by ascending loss, ties by task index.
    pub fn ranked(&self) -> Vec<&TaskResult> {
        let mut out: Vec<&TaskResult> = self.tasks.iter().collect();
        out.sort_by(|a, b| {
            a.best_trial()
                .loss
                .total_cmp(&b.best_trial().loss)
                .then(a.task.cmp(&b.task))
        });
        out
    }

    /// The `k` best task results (the H-k selection).
    pub fn top_k(&self, k: usize) -> Result<Vec<&TaskResult>> {
        if k > self.tasks.len() {
            return Err(Error::Config(format!(
                "requested the best {k} structures but the campaign ran {} tasks",
                self.tasks.len()
            )));
        }
        Ok(self.ranked().into_iter().take(k).collect())
    }
}

/// Independent tasks, run on the rayon pool; results come back in task order.
pub fn run_campaign<O: Objective + ?Sized>(space: &SearchSpace, objective: &O, cfg: &CampaignConfig) -> Result<CampaignResult> {
    if cfg.n_tasks == 0 {
        return Err(Error::Config("a campaign needs at least one task".into()));
    }
    let tasks = (0..cfg.n_tasks)
        .into_par_iter()
        .map(|task| run_task(space, objective, cfg, task))
        .collect::<Result<Vec<_>>>()?;
    Ok(CampaignResult { method: cfg.method, tasks })
}
