use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgAction, Parser, Subcommand};
use qdml::dataset::{slice_windows, split_groups, FeatureMode};
use qdml::hyperopt::{HyperPoint, LstmObjective, Method};
use qdml::io;
use qdml::seed;
use qdml_cli::config::RunConfig;
use qdml_cli::manifest::{RunManifest, MANIFEST_FILE};
use qdml_cli::pipeline::{self, ForecastRun};
use qdml_cli::CliError;
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "qdml", version, about = "Exciton dynamics: reference propagation, LSTM campaigns, ensemble forecasts")]
struct Cli {
    /// TOML config, or a manifest.json from an earlier run.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Start from the published settings instead of the desk defaults.
    #[arg(long, global = true)]
    paper_scale: bool,
    #[arg(long, global = true, value_parser = ["full", "population"])]
    feature_mode: Option<String>,
    /// -v info, -vv debug
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Propagate the reference dynamics and write trajectory.csv.
    Generate,
    /// Cut the training history into windows and write the group of each.
    Slice {
        #[arg(long)]
        trajectory: PathBuf,
        /// fs
        #[arg(long)]
        memory_time: f64,
    },
    /// Run the hyperparameter campaign on the training history.
    Hpo {
        #[arg(long)]
        trajectory: PathBuf,
        #[arg(long, value_parser = parse_method)]
        method: Option<Method>,
        #[arg(long)]
        tasks: Option<usize>,
        #[arg(long)]
        iters: Option<usize>,
    },
    /// Train one network at a fixed hyperparameter point.
    Train {
        #[arg(long)]
        trajectory: PathBuf,
        /// Hidden widths, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        neurons: Vec<usize>,
        /// fs
        #[arg(long)]
        memory_time: f64,
    },
    /// Build the ensemble and forecast to the end of the trajectory.
    Forecast {
        #[arg(long)]
        trajectory: PathBuf,
        /// Directory of an earlier `hpo` run; without it the campaign runs here.
        #[arg(long)]
        campaign: Option<PathBuf>,
        /// Ensemble label, e.g. "(SA-H3)×BT10".
        #[arg(long)]
        ensemble: Option<String>,
    },
    /// Repeat campaign and forecast for several history lengths.
    SweepHistory {
        #[arg(long)]
        trajectory: PathBuf,
        /// fs, comma separated. Defaults to the config's list.
        #[arg(long, value_delimiter = ',')]
        lengths: Vec<f64>,
    },
    /// Check an output directory against its manifest and summarize it.
    Report {
        /// Defaults to --out.
        dir: Option<PathBuf>,
    },
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: qdml::Error| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let base = if cli.paper_scale { RunConfig::paper() } else { RunConfig::desk() };
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path, base)?,
        None => base,
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(m) = &cli.feature_mode {
        cfg.feature_mode = m.parse::<FeatureMode>()?;
    }
    Ok(cfg)
}

fn command_line() -> String {
    std::env::args().skip(1).collect::<Vec<_>>().join(" ")
}

fn read_reference(path: &Path) -> Result<qdml::tdvp::Trajectory, CliError> {
    if !path.is_file() {
        return Err(CliError::Usage(format!("trajectory file {} not found", path.display())));
    }
    Ok(io::read_trajectory(path)?)
}

fn finish(dir: &Path, mut manifest: RunManifest, files: &[String]) -> Result<(), CliError> {
    for f in files {
        manifest.add(dir, f)?;
    }
    manifest.write(dir)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if let Command::Report { dir } = &cli.command {
        return report(dir.as_deref().unwrap_or(&cli.out));
    }
    let mut cfg = load_config(cli)?;
    match &cli.command {
        Command::Forecast {
            ensemble: Some(label), ..
        } => cfg.ensemble = label.clone(),
        Command::Hpo { method, tasks, iters, .. } => {
            if let Some(m) = method {
                cfg.campaign.method = *m;
            }
            if let Some(t) = tasks {
                cfg.campaign.tasks = *t;
            }
            if let Some(i) = iters {
                cfg.campaign.iters = *i;
            }
        }
        _ => {}
    }
    cfg.validate()?;
    let out = &cli.out;
    std::fs::create_dir_all(out)?;
    let mut manifest = RunManifest::new(&command_line(), &cfg, pipeline::seed_table(&cfg));

    match &cli.command {
        Command::Generate => {
            let traj = pipeline::generate(&cfg)?;
            io::write_trajectory(&out.join(pipeline::TRAJECTORY_FILE), &traj)?;
            finish(out, manifest, &[pipeline::TRAJECTORY_FILE.into()])?;
            let worst = traj.rows.iter().map(|r| (r.trace() - 1.0).abs()).fold(0.0, f64::max);
            if worst > 1e-6 {
                log::warn!("trace deviates from 1 by up to {worst:.3e}");
            }
            traj.validate(1e-3)?;
        }
        Command::Slice {
            trajectory,
            memory_time,
        } => {
            let reference = read_reference(trajectory)?;
            manifest.add_input(trajectory)?;
            let hist = pipeline::history(&cfg, &reference, cfg.t_hist_fs, cfg.feature_mode)?;
            let l = qdml::dataset::memory_time_to_steps(*memory_time, pipeline::sample_dt(&cfg))?;
            let samples = slice_windows(&hist, l)?;
            let split_seed = seed::derive(cfg.seed, "slice", 0);
            manifest.seeds.insert("slice".into(), split_seed);
            let groups = split_groups(&samples, split_seed)?;
            let w = std::io::BufWriter::new(std::fs::File::create(out.join("slices.csv"))?);
            io::write_slices_to(w, &groups.tagged(), &hist.times)?;
            finish(out, manifest, &["slices.csv".into()])?;
        }
        Command::Hpo { trajectory, .. } => {
            let reference = read_reference(trajectory)?;
            manifest.add_input(trajectory)?;
            let hist = pipeline::history(&cfg, &reference, cfg.t_hist_fs, cfg.feature_mode)?;
            let (space, campaign) = pipeline::run_hpo(&cfg, &hist, cfg.t_hist_fs)?;
            let files = pipeline::write_campaign(out, &cfg, cfg.t_hist_fs, cfg.feature_mode, &space, &campaign)?;
            finish(out, manifest, &files)?;
            if let Some(best) = campaign.ranked().first() {
                let t = best.best_trial();
                println!("best: task {} iter {} {} loss {:.6e}", best.task, t.iter, t.x, t.loss);
            }
        }
        Command::Train {
            trajectory,
            neurons,
            memory_time,
        } => {
            let reference = read_reference(trajectory)?;
            manifest.add_input(trajectory)?;
            let hist = pipeline::history(&cfg, &reference, cfg.t_hist_fs, cfg.feature_mode)?;
            let x = HyperPoint {
                layers: neurons.len(),
                neurons: neurons.clone(),
                memory_time: *memory_time,
            };
            let train_seed = seed::derive(cfg.seed, "train", 0);
            manifest.seeds.insert("train".into(), train_seed);
            let fit = LstmObjective::new(hist, cfg.training.clone())?.fit(&x, train_seed)?;
            #[derive(Serialize)]
            struct Summary<'a> {
                x: &'a HyperPoint,
                seed: u64,
                external_loss: f64,
                report: &'a qdml::lstm::TrainReport,
            }
            let summary = Summary {
                x: &x,
                seed: train_seed,
                external_loss: fit.external_loss,
                report: &fit.report,
            };
            fit.network
                .to_checkpoint(serde_json::to_value(&x).expect("point"))
                .save(&out.join("model.json"))?;
            io::write_json(&out.join("train_report.json"), &summary)?;
            finish(out, manifest, &["model.json".into(), "train_report.json".into()])?;
            println!("{x}: external loss {:.6e}", fit.external_loss);
        }
        Command::Forecast {
            trajectory, campaign, ..
        } => {
            let reference = read_reference(trajectory)?;
            manifest.add_input(trajectory)?;
            let t_hist = cfg.t_hist_fs;
            let files = match campaign {
                None => {
                    let run = pipeline::forecast_run(&cfg, &reference, t_hist)?;
                    write_run(out, &cfg, &reference, &run)?
                }
                Some(dir) => forecast_from_campaign(out, &cfg, &reference, dir, &mut manifest)?,
            };
            finish(out, manifest, &files)?;
            let s: qdml::ensemble::ErrorSummary = io::read_json(&out.join(pipeline::ERROR_SUMMARY))?;
            print_summary(t_hist, &s);
        }
        Command::SweepHistory { trajectory, lengths } => {
            let reference = read_reference(trajectory)?;
            manifest.add_input(trajectory)?;
            let lengths = if lengths.is_empty() {
                cfg.history_lengths.clone()
            } else {
                lengths.clone()
            };
            for &t in &lengths {
                if !(t > 0.0 && t < cfg.propagation.t_end) {
                    return Err(CliError::Usage(format!(
                        "history length {t} fs must lie in (0, t_end = {} fs)",
                        cfg.propagation.t_end
                    )));
                }
            }
            let (files, first_err) = sweep(out, &cfg, &reference, &lengths, &manifest)?;
            finish(out, manifest, &files)?;
            if let Some(e) = first_err {
                return Err(e);
            }
        }
        Command::Report { .. } => unreachable!(),
    }
    Ok(())
}

fn print_summary(t_hist: f64, s: &qdml::ensemble::ErrorSummary) {
    println!(
        "history {t_hist} fs, {} members: max |err| {:.4}, mean |err| {:.4}, mean sigma {:.4}, 2-sigma coverage {:.1}%",
        s.n_members,
        s.max_abs_err,
        s.mean_abs_err,
        s.mean_std,
        100.0 * s.coverage_2sigma
    );
}

fn write_run(dir: &Path, cfg: &RunConfig, reference: &qdml::tdvp::Trajectory, run: &ForecastRun) -> Result<Vec<String>, CliError> {
    std::fs::create_dir_all(dir)?;
    let mut files = pipeline::write_campaign(dir, cfg, run.t_hist, cfg.feature_mode, &run.space, &run.campaign)?;
    files.extend(pipeline::write_ensemble(dir, &run.ensemble)?);
    files.extend(pipeline::write_forecast_bundle(
        dir,
        reference,
        run.t_hist,
        &run.forecast,
        &run.errors,
        &format!("{}, {} fs history, {} mode", run.ensemble.spec, run.t_hist, cfg.feature_mode),
    )?);
    Ok(files)
}

fn forecast_from_campaign(
    out: &Path,
    cfg: &RunConfig,
    reference: &qdml::tdvp::Trajectory,
    campaign_dir: &Path,
    manifest: &mut RunManifest,
) -> Result<Vec<String>, CliError> {
    let spec = cfg.ensemble_spec()?;
    let summary_path = campaign_dir.join(pipeline::CAMPAIGN_SUMMARY);
    manifest.add_input(&summary_path)?;
    let (summary, structures) = pipeline::load_structures(campaign_dir, spec.structures)?;
    let mismatch = |what: String| CliError::Usage(format!("ensemble {spec} does not match the campaign: {what}"));
    if summary.method != spec.method {
        return Err(mismatch(format!("campaign ran {}", summary.method)));
    }
    if summary.feature_mode != cfg.feature_mode {
        return Err(mismatch(format!("campaign used {} features", summary.feature_mode)));
    }
    if (summary.t_hist_fs - cfg.t_hist_fs).abs() > 1e-9 {
        return Err(mismatch(format!("campaign history is {} fs", summary.t_hist_fs)));
    }
    let hist = pipeline::history(cfg, reference, cfg.t_hist_fs, cfg.feature_mode)?;
    let ensemble = pipeline::build(cfg, &spec, &structures, &hist)?;
    let (forecast, errors) = pipeline::forecast(cfg, &ensemble, &hist, reference, cfg.t_hist_fs)?;
    let mut files = pipeline::write_ensemble(out, &ensemble)?;
    files.extend(pipeline::write_forecast_bundle(
        out,
        reference,
        cfg.t_hist_fs,
        &forecast,
        &errors,
        &format!("{spec}, {} fs history, {} mode", cfg.t_hist_fs, cfg.feature_mode),
    )?);
    Ok(files)
}

#[derive(Serialize)]
struct SweepEntry {
    t_hist_fs: f64,
    dir: String,
    summary: Option<qdml::ensemble::ErrorSummary>,
    error: Option<String>,
}

fn sweep(
    out: &Path,
    cfg: &RunConfig,
    reference: &qdml::tdvp::Trajectory,
    lengths: &[f64],
    parent: &RunManifest,
) -> Result<(Vec<String>, Option<CliError>), CliError> {
    let mut files = Vec::new();
    let mut entries = Vec::new();
    let mut first_err = None;
    let mut curves = String::from("t_hist_fs,t_fs,abs_err_delta,std_delta\n");
    for &t_hist in lengths {
        let sub = format!("hist_{t_hist}fs");
        let dir = out.join(&sub);
        let run_cfg = RunConfig {
            t_hist_fs: t_hist,
            ..cfg.clone()
        };
        let result = pipeline::forecast_run(&run_cfg, reference, t_hist)
            .and_then(|run| write_run(&dir, &run_cfg, reference, &run).map(|f| (run, f)));
        match result {
            Ok((run, sub_files)) => {
                let mut sub_manifest = RunManifest::new(&command_line(), &run_cfg, pipeline::seed_table(&run_cfg));
                sub_manifest.inputs = parent.inputs.clone();
                finish(&dir, sub_manifest, &sub_files)?;
                files.extend(sub_files.iter().map(|f| format!("{sub}/{f}")));
                files.push(format!("{sub}/{MANIFEST_FILE}"));
                for (k, t) in run.forecast.times.iter().enumerate() {
                    curves.push_str(&format!(
                        "{},{},{},{}\n",
                        io::fmt_f64(t_hist),
                        io::fmt_f64(*t),
                        io::fmt_f64(run.errors.signed[[k, 0]].abs()),
                        io::fmt_f64(run.forecast.std[[k, 0]])
                    ));
                }
                print_summary(t_hist, &run.errors.summary);
                entries.push(SweepEntry {
                    t_hist_fs: t_hist,
                    dir: sub,
                    summary: Some(run.errors.summary),
                    error: None,
                });
            }
            Err(e) => {
                log::error!("history {t_hist} fs failed: {e}");
                entries.push(SweepEntry {
                    t_hist_fs: t_hist,
                    dir: sub,
                    summary: None,
                    error: Some(e.to_string()),
                });
                first_err.get_or_insert(e);
            }
        }
    }
    let mut table = String::from("t_hist_fs,status,mean_abs_err,max_abs_err,mean_std,coverage_2sigma,n_members\n");
    for e in &entries {
        match &e.summary {
            Some(s) => table.push_str(&format!(
                "{},ok,{},{},{},{},{}\n",
                io::fmt_f64(e.t_hist_fs),
                io::fmt_f64(s.mean_abs_err),
                io::fmt_f64(s.max_abs_err),
                io::fmt_f64(s.mean_std),
                io::fmt_f64(s.coverage_2sigma),
                s.n_members
            )),
            None => table.push_str(&format!("{},failed,,,,,\n", io::fmt_f64(e.t_hist_fs))),
        }
    }
    std::fs::write(out.join("sweep.csv"), table)?;
    std::fs::write(out.join("sweep_curves.csv"), curves)?;
    io::write_json(&out.join("sweep.json"), &entries)?;
    files.extend(["sweep.csv", "sweep_curves.csv", "sweep.json"].map(String::from));
    Ok((files, first_err))
}

fn report(dir: &Path) -> Result<(), CliError> {
    let manifest = RunManifest::read(dir)
        .map_err(|e| CliError::Usage(format!("no readable manifest in {}: {e}", dir.display())))?;
    println!("{}: qdml {} `{}`", dir.display(), manifest.tool_version, manifest.command);
    println!("config {}", manifest.config_hash);
    println!("seed {}", manifest.config.seed);
    let bad = manifest.verify(dir);
    println!("{} files, {} modified or missing", manifest.files.len(), bad.len());
    for f in &bad {
        println!("  changed: {f}");
    }
    for rel in manifest.files.keys().filter(|f| f.ends_with(pipeline::ERROR_SUMMARY)) {
        let s: qdml::ensemble::ErrorSummary = io::read_json(&dir.join(rel))?;
        let sub = dir.join(Path::new(rel).parent().unwrap_or(Path::new("")));
        let t_hist = RunManifest::read(&sub).map_or(manifest.config.t_hist_fs, |m| m.config.t_hist_fs);
        print_summary(t_hist, &s);
    }
    if bad.is_empty() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{} files do not match the manifest", bad.len())))
    }
}
