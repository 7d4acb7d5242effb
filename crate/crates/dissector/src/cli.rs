//! `dissector` command line: train, rollout, dissect, analyze-training,
//! play, serve and spectrogram.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use dissector_core::dissect::{build_evoked_map, DissectConfig, FrequencyCriterion, PhaseMean};
use dissector_core::dynamics::{learning_dynamics, DynamicsConfig};
use dissector_core::envs::{EnvKind, EnvPreset};
use dissector_core::policy::{Activation, PolicyShape, PortablePolicy, UnitAddr};
use dissector_core::runtime::{episode_seed, rollout, ResolvedSchedule, Session, SessionConfig};
use dissector_core::spectral::{StftConfig, StftPlan};
use dissector_core::trace::{RolloutRecord, SeriesSelector};
use dissector_core::trainer::{train, EsConfig};
use dissector_core::dissect::standardize;
use serde_json::json;

use crate::checkpoints::{load_checkpoint_policy, read_checkpoints, read_manifest, CheckpointWriter, TrainManifest};
use crate::config::Config;
use crate::error::{write_string, Error, Result};
use crate::mapfile::{load_map, save_map};
use crate::policyfile::{fingerprint, load_policy, save_policy};
use crate::presetfile::load_preset;
use crate::schedule::load_schedule;
use crate::tracefile::{read_rollout, spectrogram_csv, write_rollout};

#[derive(Debug, Parser)]
#[command(name = "dissector", version, about = "Find and stimulate the hidden units behind a control policy's kinematics")]
pub struct Cli {
    /// TOML file overriding built-in defaults; flags override the file
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// More log output (-v info, -vv debug)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a policy with evolution strategies, writing one checkpoint per generation
    Train(TrainArgs),
    /// Record unstimulated episodes as episode_<i>.jsonl
    Rollout(RolloutArgs),
    /// Match hidden units to kinematic attributes and write the evoked map
    Dissect(DissectArgs),
    /// Discrepancy of the final primitive across all checkpoints, as CSV
    AnalyzeTraining(AnalyzeArgs),
    /// Run one episode with a stimulation schedule and record it
    Play(PlayArgs),
    /// Serve a live shared-control session over websockets
    Serve(ServeArgs),
    /// Dump the power spectrogram of one channel or unit as CSV
    Spectrogram(SpectrogramArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Environment: car or ant
    #[arg(long)]
    pub env: EnvKind,
    /// Training seed (default: config seed, then DISSECTOR_SEED, then 0)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Generations (default 300; config train.generations)
    #[arg(long)]
    pub generations: Option<u64>,
    /// Candidates per generation, even (default 32; config train.population)
    #[arg(long)]
    pub population: Option<usize>,
    /// Perturbation scale (default 0.1; config train.sigma)
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Update step (default 0.05; config train.step_size)
    #[arg(long)]
    pub step_size: Option<f64>,
    /// Episodes per fitness evaluation (default 2; config train.episodes_per_eval)
    #[arg(long)]
    pub episodes_per_eval: Option<usize>,
    /// Episodes behind each checkpoint's metrics (default 20; config train.eval_episodes)
    #[arg(long)]
    pub eval_episodes: Option<usize>,
    /// Hidden widths, comma separated (default 64,64; config policy.hidden)
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    /// Output directory for checkpoints, metrics.jsonl and policy.json
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RolloutArgs {
    #[arg(long)]
    pub policy: PathBuf,
    #[arg(long)]
    pub env: EnvKind,
    /// Episodes to record (default 5; config rollout.episodes)
    #[arg(long)]
    pub episodes: Option<usize>,
    /// Seed of episode 0; episode i uses seed + i
    #[arg(long)]
    pub seed: Option<u64>,
    /// Step cap per episode, 0 for the environment timeout (default 0; config rollout.max_steps)
    #[arg(long)]
    pub max_steps: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DissectArgs {
    /// Directory of .jsonl rollouts
    #[arg(long)]
    pub rollouts: PathBuf,
    #[arg(long)]
    pub policy: PathBuf,
    /// Attributes, comma separated (default: every recorded channel)
    #[arg(long, value_delimiter = ',')]
    pub attrs: Option<Vec<String>>,
    /// Predominant-frequency criterion: as_written or shared_energy (default as_written; config dissect.criterion)
    #[arg(long)]
    pub criterion: Option<FrequencyCriterion>,
    /// Phase averaging: circular or arithmetic (default circular; config dissect.phase_mean)
    #[arg(long)]
    pub phase_mean: Option<PhaseMean>,
    /// Window length M (default 64; config dissect.window)
    #[arg(long)]
    pub window: Option<usize>,
    /// Hop H (default 16; config dissect.hop)
    #[arg(long)]
    pub hop: Option<usize>,
    /// Skip per-episode standardization (default: standardize; config dissect.standardize)
    #[arg(long)]
    pub no_standardize: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Checkpoint directory written by `train`
    #[arg(long)]
    pub ckpts: PathBuf,
    #[arg(long)]
    pub attr: String,
    /// Environment (default: the one recorded in train.json)
    #[arg(long)]
    pub env: Option<EnvKind>,
    /// Episodes per checkpoint (default 5; config analyze.episodes)
    #[arg(long)]
    pub episodes: Option<usize>,
    /// Seed of episode 0
    #[arg(long)]
    pub seed: Option<u64>,
    /// Checkpoint metric to include (default mean_return; config analyze.metric)
    #[arg(long)]
    pub metric: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PlayArgs {
    #[arg(long)]
    pub policy: PathBuf,
    #[arg(long)]
    pub map: PathBuf,
    #[arg(long)]
    pub env: EnvKind,
    /// Schedule file; without it the episode runs unstimulated
    #[arg(long)]
    pub schedule: Option<PathBuf>,
    /// Preset file with command definitions (default: built-in preset for --env)
    #[arg(long)]
    pub preset: Option<PathBuf>,
    /// Environment seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Step cap, 0 for the environment timeout (default 0; config rollout.max_steps)
    #[arg(long)]
    pub max_steps: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub policy: PathBuf,
    #[arg(long)]
    pub map: PathBuf,
    #[arg(long)]
    pub env: EnvKind,
    /// Port (default 8080; config serve.port)
    #[arg(long)]
    pub port: Option<u16>,
    /// Bind address (default 127.0.0.1; config serve.host)
    #[arg(long)]
    pub host: Option<String>,
    /// Ticks per second (default 20; config serve.tick_hz)
    #[arg(long)]
    pub tick_hz: Option<f64>,
    /// Unmapped units, by variance, added to z_sample (default 8; config serve.top_k)
    #[arg(long)]
    pub top_k: Option<usize>,
    /// Send every hidden unit in z_sample (config serve.full_dump)
    #[arg(long)]
    pub full_dump: bool,
    /// Preset file (default: built-in preset for --env)
    #[arg(long)]
    pub preset: Option<PathBuf>,
    /// Seed of the first episode
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SpectrogramArgs {
    /// Rollout .jsonl file
    #[arg(long)]
    pub rollout: PathBuf,
    /// Kinematic channel
    #[arg(long, conflicts_with = "unit", required_unless_present = "unit")]
    pub channel: Option<String>,
    /// Hidden unit as LAYER,INDEX
    #[arg(long, value_name = "LAYER,INDEX", value_parser = parse_unit)]
    pub unit: Option<UnitAddr>,
    /// Window length M (default 64; config dissect.window)
    #[arg(long)]
    pub window: Option<usize>,
    /// Hop H (default 16; config dissect.hop)
    #[arg(long)]
    pub hop: Option<usize>,
    /// Analyse the series as recorded instead of standardized
    #[arg(long)]
    pub raw: bool,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_unit(s: &str) -> std::result::Result<UnitAddr, String> {
    let (l, i) = s.split_once(',').ok_or("expected LAYER,INDEX")?;
    let num = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("{v:?}: {e}"));
    Ok(UnitAddr::new(num(l)?, num(i)?))
}

/// Parses `args` (including the program name), runs the subcommand and
/// returns the exit code. Errors are reported as one JSON line on stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let _ = e.print();
            report(&Error::Usage(e.kind().to_string()));
            return 2;
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::from_default_env().filter_level(level).try_init();
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            report(&e);
            e.exit_code()
        }
    }
}

fn report(e: &Error) {
    eprintln!("{}", json!({"error": {"kind": e.kind(), "message": e.to_string()}}));
}

pub fn execute(cli: &Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    match &cli.command {
        Command::Train(a) => cmd_train(&cfg, a),
        Command::Rollout(a) => cmd_rollout(&cfg, a),
        Command::Dissect(a) => cmd_dissect(&cfg, a),
        Command::AnalyzeTraining(a) => cmd_analyze(&cfg, a),
        Command::Play(a) => cmd_play(&cfg, a),
        Command::Serve(a) => cmd_serve(&cfg, a),
        Command::Spectrogram(a) => cmd_spectrogram(&cfg, a),
    }
}

fn parse_activation(name: &str) -> Result<Activation> {
    name.parse().map_err(|e: dissector_core::Error| Error::Usage(e.to_string()))
}

fn check_policy_fits(policy: &PortablePolicy, kind: EnvKind, path: &Path) -> Result<()> {
    if policy.obs_dim() != kind.obs_dim() || policy.act_dim() != kind.act_dim() {
        return Err(Error::Usage(format!(
            "{} maps {} -> {} but {kind} needs {} -> {}",
            path.display(),
            policy.obs_dim(),
            policy.act_dim(),
            kind.obs_dim(),
            kind.act_dim()
        )));
    }
    Ok(())
}

fn max_steps(flag: Option<u64>, cfg: &Config, kind: EnvKind) -> u64 {
    match flag.unwrap_or(cfg.rollout.max_steps) {
        0 => kind.timeout() as u64,
        n => n,
    }
}

fn cmd_train(cfg: &Config, a: &TrainArgs) -> Result<()> {
    let es = EsConfig {
        population: a.population.unwrap_or(cfg.train.population),
        sigma: a.sigma.unwrap_or(cfg.train.sigma),
        step_size: a.step_size.unwrap_or(cfg.train.step_size),
        generations: a.generations.unwrap_or(cfg.train.generations),
        episodes_per_eval: a.episodes_per_eval.unwrap_or(cfg.train.episodes_per_eval),
        eval_episodes: a.eval_episodes.unwrap_or(cfg.train.eval_episodes),
        seed: cfg.resolve_seed(a.seed)?,
    };
    es.validate().map_err(|e| Error::Usage(e.to_string()))?;
    let shape = PolicyShape {
        obs_dim: a.env.obs_dim(),
        hidden: a.hidden.clone().unwrap_or_else(|| cfg.policy.hidden.clone()),
        act_dim: a.env.act_dim(),
        hidden_activation: parse_activation(&cfg.policy.activation)?,
        output_activation: parse_activation(&cfg.policy.output_activation)?,
    };
    let manifest = TrainManifest {
        env: a.env.name().to_string(),
        seed: es.seed,
        population: es.population,
        sigma: es.sigma,
        step_size: es.step_size,
        generations: es.generations,
        episodes_per_eval: es.episodes_per_eval,
        eval_episodes: es.eval_episodes,
        hidden: shape.hidden.clone(),
        activation: shape.hidden_activation.name().to_string(),
        output_activation: shape.output_activation.name().to_string(),
    };
    let mut writer = CheckpointWriter::create(&a.out, &manifest)?;
    let mut last = None;
    let policy = train(a.env, &shape, &es, |c| {
        log::info!("generation {} mean_return {:.3}", c.generation, c.metrics.mean_return);
        last = Some(c.metrics.clone());
        writer.write(c).map_err(|e| dissector_core::Error::Sink(e.to_string()))
    })?;
    save_policy(&policy, &a.out.join("policy.json"))?;
    if let Some(m) = last {
        println!("trained {} generations on {}: {}", es.generations, a.env, json!(m.to_map()));
    }
    Ok(())
}

fn cmd_rollout(cfg: &Config, a: &RolloutArgs) -> Result<()> {
    let policy = load_policy(&a.policy)?;
    check_policy_fits(&policy, a.env, &a.policy)?;
    let seed = cfg.resolve_seed(a.seed)?;
    let episodes = a.episodes.unwrap_or(cfg.rollout.episodes);
    if episodes == 0 {
        return Err(Error::Usage("--episodes must be at least 1".into()));
    }
    let steps = max_steps(a.max_steps, cfg, a.env);
    let schedule = ResolvedSchedule::empty();
    for i in 0..episodes as u64 {
        let record = rollout(&policy, a.env, episode_seed(seed, i), steps, &schedule, i)?;
        let path = a.out.join(format!("episode_{i}.jsonl"));
        write_rollout(&record, &path)?;
        println!("{}: {} steps", path.display(), record.len());
    }
    Ok(())
}

/// Every `.jsonl` file in `dir`, ordered by episode id then file name.
pub fn read_rollout_dir(dir: &Path) -> Result<Vec<RolloutRecord>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Usage(format!("no .jsonl rollouts in {}", dir.display())));
    }
    let mut records = paths.iter().map(|p| read_rollout(p)).collect::<Result<Vec<_>>>()?;
    records.sort_by_key(RolloutRecord::episode_id);
    Ok(records)
}

fn dissect_config(cfg: &Config, window: Option<usize>, hop: Option<usize>) -> Result<DissectConfig> {
    let stft = StftConfig::new(window.unwrap_or(cfg.dissect.window), hop.unwrap_or(cfg.dissect.hop))
        .map_err(|e| Error::Usage(e.to_string()))?;
    Ok(DissectConfig {
        stft,
        criterion: cfg.dissect.criterion.parse().map_err(|e: dissector_core::Error| Error::Usage(e.to_string()))?,
        phase_mean: cfg.dissect.phase_mean.parse().map_err(|e: dissector_core::Error| Error::Usage(e.to_string()))?,
        standardize: cfg.dissect.standardize,
    })
}

fn cmd_dissect(cfg: &Config, a: &DissectArgs) -> Result<()> {
    let policy = load_policy(&a.policy)?;
    let records = read_rollout_dir(&a.rollouts)?;
    let channels = records[0].kinematic_names().to_vec();
    let attrs = a.attrs.clone().unwrap_or_else(|| channels.clone());
    for attr in &attrs {
        if !channels.contains(attr) {
            return Err(Error::Usage(format!(
                "unknown attribute {attr:?}; available channels: {}",
                channels.join(", ")
            )));
        }
    }
    let mut dcfg = dissect_config(cfg, a.window, a.hop)?;
    if let Some(c) = a.criterion {
        dcfg.criterion = c;
    }
    if let Some(p) = a.phase_mean {
        dcfg.phase_mean = p;
    }
    if a.no_standardize {
        dcfg.standardize = false;
    }
    let map = build_evoked_map(&policy.hidden_widths(), &fingerprint(&policy), &records, &attrs, &dcfg)?;
    save_map(&map, &a.out)?;
    for p in map.primitives() {
        println!("{:<16} unit {} rho {:+.3} bin {}", p.attribute, p.unit, p.rho, p.omega_star_bin);
    }
    for (attr, reason) in &map.failures {
        println!("{attr:<16} no primitive: {reason}");
    }
    Ok(())
}

fn cmd_analyze(cfg: &Config, a: &AnalyzeArgs) -> Result<()> {
    let series = read_checkpoints(&a.ckpts)?;
    let kind = match (a.env, read_manifest(&a.ckpts)?) {
        (Some(k), _) => k,
        (None, Some(m)) => m.env.parse().map_err(|e: dissector_core::Error| Error::format(&a.ckpts, e.to_string()))?,
        (None, None) => return Err(Error::Usage("no train.json in the checkpoint directory; pass --env".into())),
    };
    let dcfg = DynamicsConfig {
        kind,
        episodes: a.episodes.unwrap_or(cfg.analyze.episodes),
        seed: cfg.resolve_seed(a.seed)?,
        max_steps: kind.timeout() as u64,
        metric: a.metric.clone().unwrap_or_else(|| cfg.analyze.metric.clone()),
        dissect: dissect_config(cfg, None, None)?,
    };
    if !kind.kinematic_channels().contains(&a.attr.as_str()) {
        return Err(Error::Usage(format!(
            "unknown attribute {:?}; available channels: {}",
            a.attr,
            kind.kinematic_channels().join(", ")
        )));
    }
    let dyns = learning_dynamics(&series, &a.attr, &dcfg, |e| {
        load_checkpoint_policy(&a.ckpts, e).map_err(|err| dissector_core::Error::Sink(err.to_string()))
    })?;
    let mut csv = format!("iteration,discrepancy,discrepancy_per_frame,episodes_used,{}\n", dcfg.metric);
    for p in &dyns.points {
        let metric = p.metric.map(|m| m.to_string()).unwrap_or_default();
        let _ = writeln!(csv, "{},{},{},{},{metric}", p.iteration, p.discrepancy, p.discrepancy_per_frame, p.episodes_used);
    }
    write_string(&a.out, &csv)?;
    println!("{} tracked at unit {} over {} checkpoints", dyns.attribute, dyns.unit, dyns.points.len());
    for (it, why) in &dyns.skipped {
        println!("checkpoint {it} skipped: {why}");
    }
    Ok(())
}

fn load_matching_map(policy: &PortablePolicy, path: &Path) -> Result<dissector_core::StimulationEvokedMap> {
    let map = load_map(path)?;
    let fp = fingerprint(policy);
    if map.policy_fingerprint != fp {
        return Err(Error::Usage(format!(
            "{} was built for policy {} but the given policy is {fp}",
            path.display(),
            map.policy_fingerprint
        )));
    }
    Ok(map)
}

fn load_env_preset(path: Option<&Path>, kind: EnvKind) -> Result<EnvPreset> {
    let preset = match path {
        Some(p) => load_preset(p)?,
        None => EnvPreset::builtin(kind),
    };
    if preset.kind != kind {
        return Err(Error::Usage(format!("preset {:?} is for {}, not {kind}", preset.name, preset.kind)));
    }
    Ok(preset)
}

fn cmd_play(cfg: &Config, a: &PlayArgs) -> Result<()> {
    let policy = load_policy(&a.policy)?;
    check_policy_fits(&policy, a.env, &a.policy)?;
    let map = load_matching_map(&policy, &a.map)?;
    let preset = load_env_preset(a.preset.as_deref(), a.env)?;
    let schedule = match &a.schedule {
        Some(p) => load_schedule(p, &preset, &map)?.resolve(&map)?,
        None => ResolvedSchedule::empty(),
    };
    let seed = cfg.resolve_seed(a.seed)?;
    let record = rollout(&policy, a.env, seed, max_steps(a.max_steps, cfg, a.env), &schedule, seed)?;
    write_rollout(&record, &a.out)?;
    println!("{}: {} steps", a.out.display(), record.len());
    Ok(())
}

fn cmd_serve(cfg: &Config, a: &ServeArgs) -> Result<()> {
    let policy = load_policy(&a.policy)?;
    check_policy_fits(&policy, a.env, &a.policy)?;
    let map = load_matching_map(&policy, &a.map)?;
    let preset = load_env_preset(a.preset.as_deref(), a.env)?;
    let scfg = SessionConfig {
        kind: a.env,
        seed: cfg.resolve_seed(a.seed)?,
        max_steps: a.env.timeout() as u64,
        top_k: a.top_k.unwrap_or(cfg.serve.top_k),
        full_dump: a.full_dump || cfg.serve.full_dump,
    };
    let session = Session::new(policy, map.clone(), preset, scfg)?;
    let host = a.host.clone().unwrap_or_else(|| cfg.serve.host.clone());
    crate::server::serve_blocking(session, map, &host, a.port.unwrap_or(cfg.serve.port), a.tick_hz.unwrap_or(cfg.serve.tick_hz))
}

fn cmd_spectrogram(cfg: &Config, a: &SpectrogramArgs) -> Result<()> {
    let record = read_rollout(&a.rollout)?;
    let selector = match (&a.channel, &a.unit) {
        (Some(c), _) => SeriesSelector::Kinematic(c.clone()),
        (None, Some(u)) => SeriesSelector::Unit(*u),
        (None, None) => return Err(Error::Usage("give --channel or --unit".into())),
    };
    let series = record.extract_series(&selector).map_err(|e| Error::Usage(e.to_string()))?;
    let dcfg = dissect_config(cfg, a.window, a.hop)?;
    let series = if a.raw || !dcfg.standardize { series } else { standardize(&series)?.values };
    let sg = StftPlan::new(dcfg.stft)?.spectrogram(&series)?;
    write_string(&a.out, &spectrogram_csv(&sg, &dcfg.stft, record.dt()))?;
    println!("{}: {} frames x {} bins", a.out.display(), sg.frames(), sg.bins());
    Ok(())
}
