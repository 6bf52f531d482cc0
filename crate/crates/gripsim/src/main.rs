//! `gripsim`: CLI driver for the EMI force-sensor testbed.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use gripsim::config::Config;
use gripsim::error::{Error, Result};
use gripsim::grasp::{run_scenario, SimTrace};
use gripsim::report::{emit_report, render_table, write_plot_csv};
use gripsim::{calibrate, datagen, detect, emi, learn, pipeline};

#[derive(Parser)]
#[command(name = "gripsim", version, about = "EMI attack testbed for Hall-effect force sensing")]
struct Cli {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Suppress progress output on stdout.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct DataArgs {
    /// Dataset directory (defaults to <out>/dataset).
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the labeled press dataset.
    GenData {
        /// Perturb readings with the configured (or calibrated) profile.
        #[arg(long)]
        attack: bool,
    },
    /// Train the random-forest weight classifier.
    Train(DataArgs),
    /// Evaluate a trained forest on a dataset's test split.
    Eval {
        #[command(flatten)]
        data: DataArgs,
        /// Forest JSON (defaults to <out>/forest.json).
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Run the closed-loop grip scenario and record the trace.
    Simulate,
    /// Characterize the coupling resonance over the configured band.
    Sweep,
    /// Run the anomaly detector over a recorded scenario trace.
    Detect {
        /// Trace CSV (defaults to <out>/trace.csv).
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Full benign-vs-attack comparison table.
    Report,
    /// Search for an attack profile matching the fidelity targets.
    Calibrate,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    subcommand: &'a str,
    config_path: Option<String>,
    config_hash: &'a str,
    seed: u64,
    tool_version: &'a str,
    outputs: Vec<String>,
    wall_time_ms: u128,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let json = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Config(format!("serialization: {e}")))?;
    write_atomic(path, json.as_bytes())
}

struct Ctx {
    config: Config,
    config_path: Option<PathBuf>,
    config_hash: String,
    seed: u64,
    out: PathBuf,
    quiet: bool,
}

impl Ctx {
    fn say(&self, msg: &str) {
        if !self.quiet {
            println!("{msg}");
        }
    }

    fn data_dir(&self, arg: &Option<PathBuf>) -> PathBuf {
        arg.clone().unwrap_or_else(|| self.out.join("dataset"))
    }
}

fn run(cli: Cli) -> Result<()> {
    let start = Instant::now();
    let (config, config_hash) = match &cli.config {
        Some(path) => Config::load(path)?,
        None => (Config::default(), "default".to_string()),
    };
    let ctx = Ctx {
        seed: config.effective_seed(cli.seed),
        config,
        config_path: cli.config.clone(),
        config_hash,
        out: cli.out.clone(),
        quiet: cli.quiet,
    };
    fs::create_dir_all(&ctx.out).map_err(|e| Error::io(&ctx.out, e))?;

    let (name, outputs) = match &cli.command {
        Command::GenData { attack } => cmd_gen_data(&ctx, *attack)?,
        Command::Train(data) => cmd_train(&ctx, data)?,
        Command::Eval { data, model } => cmd_eval(&ctx, data, model)?,
        Command::Simulate => cmd_simulate(&ctx)?,
        Command::Sweep => cmd_sweep(&ctx)?,
        Command::Detect { trace } => cmd_detect(&ctx, trace)?,
        Command::Report => cmd_report(&ctx)?,
        Command::Calibrate => cmd_calibrate(&ctx)?,
    };

    let manifest = RunManifest {
        subcommand: name,
        config_path: ctx.config_path.as_ref().map(|p| p.display().to_string()),
        config_hash: &ctx.config_hash,
        seed: ctx.seed,
        tool_version: env!("CARGO_PKG_VERSION"),
        outputs,
        wall_time_ms: start.elapsed().as_millis(),
    };
    write_json(&ctx.out.join("run-manifest.json"), &manifest)
}

fn rel(ctx: &Ctx, path: &Path) -> String {
    path.strip_prefix(&ctx.out)
        .unwrap_or(path)
        .display()
        .to_string()
}

fn cmd_gen_data(ctx: &Ctx, attack: bool) -> Result<(&'static str, Vec<String>)> {
    let protocol = datagen::PressProtocol {
        seed: ctx.seed,
        ..ctx.config.protocol.clone()
    };
    let layers = if attack {
        pipeline::attack_layers(&ctx.config)?
    } else {
        Vec::new()
    };
    let dataset = datagen::build_dataset(&protocol, &ctx.config.sensor, &layers)?;
    let dir = ctx.out.join("dataset");
    datagen::save_dataset(&dataset, &dir)?;
    ctx.say(&format!(
        "wrote {} traces ({}) to {}",
        dataset.traces.len(),
        if attack { "attacked" } else { "benign" },
        dir.display()
    ));
    Ok(("gen-data", vec![rel(ctx, &dir)]))
}

fn cmd_train(ctx: &Ctx, data: &DataArgs) -> Result<(&'static str, Vec<String>)> {
    let dataset = datagen::load_dataset(&ctx.data_dir(&data.data))?;
    let forest = pipeline::train_on_dataset(&dataset, &ctx.config.window, &ctx.config, ctx.seed)?;
    let path = ctx.out.join("forest.json");
    write_json(&path, &forest)?;
    ctx.say(&format!(
        "trained {} trees on {} traces -> {}",
        forest.trees.len(),
        dataset.train_indices.len(),
        path.display()
    ));
    Ok(("train", vec![rel(ctx, &path)]))
}

fn cmd_eval(
    ctx: &Ctx,
    data: &DataArgs,
    model: &Option<PathBuf>,
) -> Result<(&'static str, Vec<String>)> {
    let dataset = datagen::load_dataset(&ctx.data_dir(&data.data))?;
    let model_path = model
        .clone()
        .unwrap_or_else(|| ctx.out.join("forest.json"));
    let text = fs::read_to_string(&model_path).map_err(|e| Error::io(&model_path, e))?;
    let forest: learn::Forest =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("forest parse: {e}")))?;
    if forest.version != learn::FOREST_FORMAT_VERSION {
        return Err(Error::Config(format!(
            "unsupported forest format version {}",
            forest.version
        )));
    }
    let evaluation = pipeline::evaluate_on_dataset(&forest, &dataset, &ctx.config.window)?;
    let label = if dataset.attacked { "attack" } else { "non-attack" };
    let case = pipeline::case_report(
        label,
        &dataset,
        Some(&evaluation),
        ctx.config.metrics.min_true_force,
    );
    let path = ctx.out.join("evaluation.json");
    write_json(&path, &serde_json::json!({ "case": case, "evaluation": evaluation }))?;
    ctx.say(&format!(
        "{label}: cos {:.3} amp {:.3} macro P {:.3} R {:.3}",
        case.fidelity.cosine_similarity.mean,
        case.fidelity.amplitude_ratio.mean,
        evaluation.macro_precision,
        evaluation.macro_recall,
    ));
    Ok(("eval", vec![rel(ctx, &path)]))
}

fn cmd_simulate(ctx: &Ctx) -> Result<(&'static str, Vec<String>)> {
    let trace = run_scenario(&ctx.config.scenario, &ctx.config.sensor)?;
    let trace_path = ctx.out.join("trace.csv");
    let mut buf = Vec::new();
    trace
        .write_csv(&mut buf)
        .map_err(|e| Error::io(&trace_path, e))?;
    write_atomic(&trace_path, &buf)?;
    let plot_path = ctx.out.join("plot.csv");
    write_plot_csv(&trace, &plot_path)?;
    let summary = scenario_summary(&trace);
    let summary_path = ctx.out.join("scenario.json");
    write_json(&summary_path, &summary)?;
    ctx.say(&format!(
        "{} frames; attack_on@{:?} drop@{:?} crush@{:?}",
        trace.frames.len(),
        summary.first_attack_frame,
        summary.first_drop_frame,
        summary.first_crush_frame
    ));
    Ok((
        "simulate",
        vec![rel(ctx, &trace_path), rel(ctx, &plot_path), rel(ctx, &summary_path)],
    ))
}

#[derive(Serialize)]
struct ScenarioSummary {
    n_frames: usize,
    first_attack_frame: Option<u64>,
    first_slip_frame: Option<u64>,
    first_drop_frame: Option<u64>,
    first_crush_frame: Option<u64>,
    max_commanded_grip: f64,
}

fn scenario_summary(trace: &SimTrace) -> ScenarioSummary {
    let first = |pick: fn(&gripsim::grasp::SimStep) -> bool| {
        trace.frames.iter().find(|s| pick(s)).map(|s| s.frame_index)
    };
    ScenarioSummary {
        n_frames: trace.frames.len(),
        first_attack_frame: first(|s| s.events.attack_on),
        first_slip_frame: first(|s| s.events.slip),
        first_drop_frame: first(|s| s.events.drop),
        first_crush_frame: first(|s| s.events.crush),
        max_commanded_grip: trace
            .frames
            .iter()
            .map(|s| s.commanded_grip)
            .fold(0.0, f64::max),
    }
}

fn cmd_sweep(ctx: &Ctx) -> Result<(&'static str, Vec<String>)> {
    let s = &ctx.config.sweep;
    let (best, curve) = emi::frequency_sweep(
        &ctx.config.coupling,
        s.f_start,
        s.f_end,
        s.step,
        s.probe_distance,
    )?;
    let path = ctx.out.join("sweep.csv");
    let mut text = String::from("freq_hz,coupling_gain\n");
    for (f, g) in &curve {
        text.push_str(&format!("{f},{g}\n"));
    }
    write_atomic(&path, text.as_bytes())?;
    // The resonance estimate is the one line tools can parse.
    println!("{best}");
    Ok(("sweep", vec![rel(ctx, &path)]))
}

fn cmd_detect(ctx: &Ctx, trace_arg: &Option<PathBuf>) -> Result<(&'static str, Vec<String>)> {
    let trace_path = trace_arg
        .clone()
        .unwrap_or_else(|| ctx.out.join("trace.csv"));
    let f = fs::File::open(&trace_path).map_err(|e| Error::io(&trace_path, e))?;
    let trace = SimTrace::read_csv(std::io::BufReader::new(f))?;
    let result = detect::detect(&trace.sensor_frames(), &ctx.config.detector)?;
    let path = ctx.out.join("detection.json");
    write_json(&path, &result.summary)?;
    ctx.say(&format!(
        "first flag: {:?}; flagged {}/{} frames",
        result.summary.first_flag, result.summary.n_flagged, result.summary.n_frames
    ));
    Ok(("detect", vec![rel(ctx, &path)]))
}

fn cmd_report(ctx: &Ctx) -> Result<(&'static str, Vec<String>)> {
    let cmp = pipeline::run_comparison(&ctx.config, ctx.seed, &ctx.config_hash)?;
    emit_report(&cmp.report, &ctx.out)?;
    if !ctx.quiet {
        print!("{}", render_table(&cmp.report));
    }
    Ok((
        "report",
        vec!["report.json".into(), "report.txt".into()],
    ))
}

#[derive(Serialize)]
struct ProfileFile {
    attack: Vec<emi::AttackLayer>,
}

fn cmd_calibrate(ctx: &Ctx) -> Result<(&'static str, Vec<String>)> {
    let result = calibrate::calibrate(
        &ctx.config.protocol,
        &ctx.config.coupling,
        &ctx.config.calibration,
    )?;
    let json_path = ctx.out.join("calibration.json");
    write_json(&json_path, &result)?;
    let profile = ProfileFile {
        attack: result.layers.clone(),
    };
    let toml = toml::to_string_pretty(&profile)
        .map_err(|e| Error::Config(format!("profile serialization: {e}")))?;
    let cfg_path = ctx.out.join("attack-profile.cfg");
    write_atomic(&cfg_path, toml.as_bytes())?;
    ctx.say(&format!(
        "profile: gain {:.3}, offset z {:.3} N, xy {:.3} N -> amp {:.3}, cos {:.3}",
        result.profile.gain_factor,
        result.profile.offset_z,
        result.profile.offset_xy,
        result.predicted_amplitude_ratio,
        result.predicted_cosine_similarity
    ));
    Ok((
        "calibrate",
        vec![rel(ctx, &json_path), rel(ctx, &cfg_path)],
    ))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gripsim: error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
