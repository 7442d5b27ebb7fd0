//! The stages behind the subcommands, and the files each one writes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use qdml::dataset::{vectorize, FeatureMode, FeatureSeries};
use qdml::ensemble::{
    build_ensemble, ensemble_predict, prediction_error, Ensemble, EnsembleForecast, EnsembleSpec, ErrorReport,
    Member, MemberInfo, Structure,
};
use qdml::hyperopt::{CampaignConfig, CampaignResult, HyperPoint, LstmObjective, Method, SearchSpace, Trial};
use qdml::io;
use qdml::lstm::{Checkpoint, LstmNetwork};
use qdml::seed;
use qdml::tdvp::{propagate, Trajectory};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::plot;
use crate::CliError;

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const CAMPAIGN_LOG: &str = "campaign.jsonl";
pub const CAMPAIGN_SUMMARY: &str = "campaign.json";
pub const ENSEMBLE_DIR: &str = "ensemble";
pub const ENSEMBLE_INDEX: &str = "ensemble/ensemble.json";
pub const FORECAST_FILE: &str = "forecast.csv";
pub const ERRORS_FILE: &str = "errors.csv";
pub const ERROR_SUMMARY: &str = "error_summary.json";
pub const PLOT_DATA: &str = "plot_data.csv";
pub const PLOT_SVG: &str = "forecast.svg";

pub fn hpo_seed(cfg: &RunConfig) -> u64 {
    seed::derive(cfg.seed, "hpo", 0)
}

pub fn ensemble_seed(cfg: &RunConfig) -> u64 {
    seed::derive(cfg.seed, "ensemble", 0)
}

pub fn seed_table(cfg: &RunConfig) -> BTreeMap<String, u64> {
    let mut seeds = BTreeMap::new();
    seeds.insert("master".into(), cfg.seed);
    seeds.insert("hpo".into(), hpo_seed(cfg));
    seeds.insert("ensemble".into(), ensemble_seed(cfg));
    let campaign = campaign_config(cfg);
    for t in 0..cfg.campaign.tasks {
        seeds.insert(format!("hpo/task/{t}"), campaign.task_seed(t));
    }
    seeds
}

pub fn generate(cfg: &RunConfig) -> Result<Trajectory, CliError> {
    Ok(propagate(&cfg.model()?, &cfg.propagation())?)
}

/// Spacing of the recorded trajectory, fs.
pub fn sample_dt(cfg: &RunConfig) -> f64 {
    cfg.propagation.dt * cfg.propagation.record_stride as f64
}

/// Number of samples on [0, t_hist].
pub fn history_rows(cfg: &RunConfig, t_hist: f64) -> usize {
    (t_hist / sample_dt(cfg)).round() as usize + 1
}

/// Feature rows for t ≤ t_hist.
pub fn history(cfg: &RunConfig, traj: &Trajectory, t_hist: f64, mode: FeatureMode) -> Result<FeatureSeries, CliError> {
    let n = history_rows(cfg, t_hist);
    if traj.len() < n {
        return Err(CliError::Usage(format!(
            "trajectory has {} rows, a {t_hist} fs history needs {n}",
            traj.len()
        )));
    }
    let series = vectorize(traj, mode).prefix(n);
    match series.time_step() {
        Some(dt) if (dt - sample_dt(cfg)).abs() < 1e-9 => Ok(series),
        _ => Err(CliError::Usage(format!(
            "trajectory step does not match the configured sampling of {} fs",
            sample_dt(cfg)
        ))),
    }
}

/// Forecast grid: t_hist + dt, ..., t_end.
pub fn forecast_times(cfg: &RunConfig, t_hist: f64) -> Vec<f64> {
    let dt = sample_dt(cfg);
    let first = history_rows(cfg, t_hist);
    let last = (cfg.propagation.t_end / dt).round() as usize;
    (first..=last).map(|k| k as f64 * dt).collect()
}

pub fn campaign_config(cfg: &RunConfig) -> CampaignConfig {
    CampaignConfig {
        method: cfg.campaign.method,
        n_tasks: cfg.campaign.tasks,
        iters: cfg.campaign.iters,
        master_seed: hpo_seed(cfg),
        sa: cfg.campaign.sa,
        tpe: cfg.campaign.tpe,
    }
}

pub fn run_hpo(cfg: &RunConfig, history: &FeatureSeries, t_hist: f64) -> Result<(SearchSpace, CampaignResult), CliError> {
    let space = cfg.space(t_hist)?;
    let objective = LstmObjective::new(history.clone(), cfg.training.clone())?;
    let campaign = qdml::hyperopt::run_campaign(&space, &objective, &campaign_config(cfg))?;
    Ok((space, campaign))
}

pub fn build(cfg: &RunConfig, spec: &EnsembleSpec, structures: &[Structure], history: &FeatureSeries) -> Result<Ensemble, CliError> {
    Ok(build_ensemble(spec, structures, history, &cfg.training, ensemble_seed(cfg))?)
}

pub fn forecast(
    cfg: &RunConfig,
    ensemble: &Ensemble,
    history: &FeatureSeries,
    reference: &Trajectory,
    t_hist: f64,
) -> Result<(EnsembleForecast, ErrorReport), CliError> {
    let nets = ensemble.networks();
    let f = ensemble_predict(&nets, history.rows.view(), &forecast_times(cfg, t_hist), history.mode)?;
    let err = prediction_error(&f, reference)?;
    Ok((f, err))
}

/// Everything one history length produced.
#[derive(Debug, Clone)]
pub struct ForecastRun {
    pub t_hist: f64,
    pub space: SearchSpace,
    pub campaign: CampaignResult,
    pub ensemble: Ensemble,
    pub forecast: EnsembleForecast,
    pub errors: ErrorReport,
}

/// Search, ensemble and forecast for one history length.
pub fn forecast_run(cfg: &RunConfig, reference: &Trajectory, t_hist: f64) -> Result<ForecastRun, CliError> {
    let spec = cfg.ensemble_spec()?;
    if spec.method != cfg.campaign.method {
        return Err(CliError::Usage(format!(
            "ensemble {spec} names {} but the campaign runs {}",
            spec.method, cfg.campaign.method
        )));
    }
    let hist = history(cfg, reference, t_hist, cfg.feature_mode)?;
    let (space, campaign) = run_hpo(cfg, &hist, t_hist)?;
    let structures: Vec<Structure> = campaign
        .top_k(spec.structures)?
        .into_iter()
        .map(Structure::from_task)
        .collect();
    let ensemble = build(cfg, &spec, &structures, &hist)?;
    let (forecast, errors) = forecast(cfg, &ensemble, &hist, reference, t_hist)?;
    Ok(ForecastRun {
        t_hist,
        space,
        campaign,
        ensemble,
        forecast,
        errors,
    })
}

/// One ranked task best in `campaign.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub task: usize,
    pub iter: usize,
    pub x: HyperPoint,
    pub loss: Option<f64>,
    pub checkpoint_path: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignSummary {
    pub method: Method,
    pub n_tasks: usize,
    pub iters: usize,
    pub master_seed: u64,
    pub task_seeds: Vec<u64>,
    pub t_hist_fs: f64,
    pub feature_mode: FeatureMode,
    pub space: SearchSpace,
    pub total_trials: usize,
    pub ranked: Vec<RankedEntry>,
}

fn rel(path: &Path) -> String {
    path.to_string_lossy().replace('\\', "/")
}

fn save_checkpoint(dir: &Path, rel_path: &str, ck: &Checkpoint) -> Result<(), CliError> {
    let path = dir.join(rel_path);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    ck.save(&path)?;
    Ok(())
}

/// campaign.jsonl, campaign.json and one checkpoint per task best. Returns the
/// files written, relative to `dir`.
pub fn write_campaign(
    dir: &Path,
    cfg: &RunConfig,
    t_hist: f64,
    mode: FeatureMode,
    space: &SearchSpace,
    campaign: &CampaignResult,
) -> Result<Vec<String>, CliError> {
    let mut files = Vec::new();
    let mut trials: Vec<Trial> = Vec::with_capacity(campaign.total_trials());
    for task in &campaign.tasks {
        let mut task_trials = task.trials.clone();
        if let Some(net) = &task.best_network {
            let best = task.best_trial();
            let path = rel(&PathBuf::from("checkpoints").join(format!("task{:02}.json", task.task)));
            let meta = serde_json::json!({
                "task": task.task,
                "iter": best.iter,
                "x": best.x,
                "external_loss": best.loss,
                "task_seed": task.seed,
            });
            save_checkpoint(dir, &path, &net.to_checkpoint(meta))?;
            task_trials[task.best].checkpoint_path = Some(path.clone());
            files.push(path);
        }
        trials.extend(task_trials);
    }
    io::write_trials(&dir.join(CAMPAIGN_LOG), &trials)?;
    files.push(CAMPAIGN_LOG.into());
    let ccfg = campaign_config(cfg);
    let summary = CampaignSummary {
        method: campaign.method,
        n_tasks: campaign.tasks.len(),
        iters: cfg.campaign.iters,
        master_seed: ccfg.master_seed,
        task_seeds: (0..campaign.tasks.len()).map(|t| ccfg.task_seed(t)).collect(),
        t_hist_fs: t_hist,
        feature_mode: mode,
        space: space.clone(),
        total_trials: trials.len(),
        ranked: campaign
            .ranked()
            .into_iter()
            .map(|t| {
                let best = &trials[campaign.tasks[..t.task].iter().map(|x| x.trials.len()).sum::<usize>() + t.best];
                RankedEntry {
                    task: t.task,
                    iter: best.iter,
                    x: best.x.clone(),
                    loss: best.loss.is_finite().then_some(best.loss),
                    checkpoint_path: best.checkpoint_path.clone(),
                }
            })
            .collect(),
    };
    io::write_json(&dir.join(CAMPAIGN_SUMMARY), &summary)?;
    files.push(CAMPAIGN_SUMMARY.into());
    Ok(files)
}

/// The `k` best structures of a campaign directory, with their networks.
pub fn load_structures(dir: &Path, k: usize) -> Result<(CampaignSummary, Vec<Structure>), CliError> {
    let summary: CampaignSummary = io::read_json(&dir.join(CAMPAIGN_SUMMARY))
        .map_err(|e| CliError::Usage(format!("cannot read campaign in {}: {e}", dir.display())))?;
    if summary.ranked.len() < k {
        return Err(CliError::Usage(format!(
            "ensemble needs {k} structures, campaign in {} has {}",
            dir.display(),
            summary.ranked.len()
        )));
    }
    let structures = summary.ranked[..k]
        .iter()
        .map(|e| {
            let network = match &e.checkpoint_path {
                Some(p) => Some(LstmNetwork::from_checkpoint(&Checkpoint::load(&dir.join(p))?)?),
                None => None,
            };
            Ok(Structure { x: e.x.clone(), network })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok((summary, structures))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleIndex {
    pub spec: String,
    pub members: Vec<(MemberInfo, String)>,
    pub discarded: Vec<(MemberInfo, String)>,
}

pub fn write_ensemble(dir: &Path, ensemble: &Ensemble) -> Result<Vec<String>, CliError> {
    let mut files = Vec::new();
    let mut index = EnsembleIndex {
        spec: ensemble.spec.to_string(),
        members: Vec::new(),
        discarded: ensemble.discarded.clone(),
    };
    for m in &ensemble.members {
        let path = format!("{ENSEMBLE_DIR}/member{:04}.json", m.info.index);
        save_checkpoint(dir, &path, &m.network.to_checkpoint(serde_json::to_value(m.info).expect("info")))?;
        index.members.push((m.info, path.clone()));
        files.push(path);
    }
    io::write_json(&dir.join(ENSEMBLE_INDEX), &index)?;
    files.push(ENSEMBLE_INDEX.into());
    Ok(files)
}

pub fn load_ensemble(dir: &Path) -> Result<Ensemble, CliError> {
    let index: EnsembleIndex = io::read_json(&dir.join(ENSEMBLE_INDEX))
        .map_err(|e| CliError::Usage(format!("cannot read ensemble in {}: {e}", dir.display())))?;
    let spec: EnsembleSpec = index.spec.parse().map_err(|e| CliError::Usage(format!("{e}")))?;
    let members = index
        .members
        .iter()
        .map(|(info, path)| {
            Ok(Member {
                info: *info,
                network: LstmNetwork::from_checkpoint(&Checkpoint::load(&dir.join(path))?)?,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(Ensemble {
        spec,
        members,
        discarded: index.discarded,
    })
}

/// Forecast and error CSVs, error summary, plot data and SVG.
pub fn write_forecast_bundle(
    dir: &Path,
    reference: &Trajectory,
    t_hist: f64,
    forecast: &EnsembleForecast,
    errors: &ErrorReport,
    title: &str,
) -> Result<Vec<String>, CliError> {
    std::fs::create_dir_all(dir)?;
    io::write_forecast(&dir.join(FORECAST_FILE), forecast)?;
    io::write_error_report(&dir.join(ERRORS_FILE), &dir.join(ERROR_SUMMARY), errors)?;
    let data = plot::PlotData::new(reference, t_hist, forecast)?;
    data.write_csv(&dir.join(PLOT_DATA))?;
    std::fs::write(dir.join(PLOT_SVG), plot::render_svg(&data, title))?;
    Ok([FORECAST_FILE, ERRORS_FILE, ERROR_SUMMARY, PLOT_DATA, PLOT_SVG]
        .map(String::from)
        .to_vec())
}
