use std::fs;
use std::io::Write;
use std::net::{SocketAddr, UdpSocket};
use std::path::{Path, PathBuf};
use std::thread;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use equilivest::pipeline::{analyze as analyze_samples, Pipeline, PipelineReport};
use equilivest::riskmodel::{label_windows, metrics_at, predict, train_with_history, RiskModel};
use equilivest::telemetry::{encode_packet, read_recording_file, replay_session, write_recording, RecordedSample};
use equilivest::{Error, ImuSample};

use crate::config::RunConfig;
use crate::live::{print_stats, LiveSession, OrderGate};
use crate::output::{
    sink, truth_path, write_commands, write_events, write_report, write_series, TruthFile, COMMANDS_HEADER,
};
use crate::scenario::{Scenario, ScenarioKind};
use crate::Common;

fn load_config(common: &Common) -> Result<RunConfig> {
    let cfg = RunConfig::load(common.config.as_deref(), &common.overrides)?;
    Ok(cfg)
}

fn load_model(path: Option<&Path>) -> Result<Option<RiskModel>> {
    path.map(|p| {
        let text = fs::read_to_string(p).with_context(|| format!("cannot read model {}", p.display()))?;
        Ok(RiskModel::from_text(&text)?)
    })
    .transpose()
}

fn samples_of(recorded: &[RecordedSample]) -> Vec<ImuSample> {
    recorded.iter().map(|r| r.sample).collect()
}

fn idle(timeout_ms: Option<u64>) -> Option<Duration> {
    timeout_ms.map(Duration::from_millis)
}

fn write_to(path: &Path, what: &str, f: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    let mut out = sink(Some(path)).with_context(|| format!("cannot create {what} {}", path.display()))?;
    f(&mut out).with_context(|| format!("cannot write {what} {}", path.display()))
}

fn save_recording(path: &Path, recorded: &[RecordedSample]) -> Result<()> {
    let file = fs::File::create(path).with_context(|| format!("cannot create recording {}", path.display()))?;
    write_recording(std::io::BufWriter::new(file), recorded)?.flush()?;
    Ok(())
}

#[derive(Args, Debug)]
pub struct ListenArgs {
    #[command(flatten)]
    common: Common,
    /// UDP port; 0 picks a free one.
    #[arg(long)]
    port: Option<u16>,
    /// Recording file to write.
    #[arg(long)]
    output: PathBuf,
    /// Stop after this long without packets.
    #[arg(long)]
    timeout_ms: Option<u64>,
}

pub fn listen(args: ListenArgs) -> Result<()> {
    let cfg = load_config(&args.common)?;
    let port = args.port.unwrap_or(cfg.telemetry.port);
    let session = LiveSession::start(cfg.telemetry.bind, port, idle(args.timeout_ms), cfg.telemetry.queue_capacity)?;
    let mut gate = OrderGate::default();
    let mut recorded = Vec::new();
    while let Some((sample, orientation)) = session.next() {
        if gate.admit(&sample) {
            recorded.push(RecordedSample { sample, orientation });
        }
    }
    let (stats, overflowed) = session.finish()?;
    save_recording(&args.output, &recorded)?;
    print_stats(&stats, overflowed, gate.skipped, recorded.len());
    Ok(())
}

/// Outputs shared by `analyze` and `run`.
#[derive(Args, Debug, Clone, Default)]
pub struct Logs {
    /// Event log, `t_ms,kind,value`.
    #[arg(long)]
    events: Option<PathBuf>,
    /// Motor command log, `t_ms,frequency_hz,intensity,duration_ms`.
    #[arg(long)]
    commands: Option<PathBuf>,
    /// Plot series, `t_ms,roll,pitch,yaw,gx,gz`.
    #[arg(long)]
    series: Option<PathBuf>,
    /// Risk estimates, `t_ms,risk`.
    #[arg(long)]
    risk: Option<PathBuf>,
}

impl Logs {
    fn write(&self, samples: &[ImuSample], report: &PipelineReport) -> Result<()> {
        if let Some(p) = &self.events {
            write_to(p, "event log", |out| write_events(out, &report.events))?;
        }
        if let Some(p) = &self.commands {
            write_to(p, "command log", |out| write_commands(out, &report.commands))?;
        }
        if let Some(p) = &self.series {
            write_to(p, "series", |out| write_series(out, samples, report))?;
        }
        if let Some(p) = &self.risk {
            write_to(p, "risk series", |out| {
                writeln!(out, "t_ms,risk")?;
                for (t, r) in &report.risk {
                    writeln!(out, "{t},{r}")?;
                }
                out.flush()
            })?;
        }
        Ok(())
    }
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    common: Common,
    /// Recording to analyze.
    #[arg(long)]
    input: PathBuf,
    /// Report file; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Risk model for risk estimates and alerts.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Feedback strategies to enable, overriding the configuration.
    #[arg(long, value_enum, value_delimiter = ',')]
    feedback: Option<Vec<Feedback>>,
    #[command(flatten)]
    logs: Logs,
}

pub fn analyze(args: AnalyzeArgs) -> Result<()> {
    let mut cfg = load_config(&args.common)?;
    apply_feedback(&mut cfg, args.feedback.as_deref());
    let model = load_model(args.model.as_deref())?;
    let recorded = read_recording_file(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let samples = samples_of(&recorded);
    let report = analyze_samples(&samples, &cfg.pipeline(), model, args.logs.series.is_some())?;
    let mut out = sink(args.output.as_deref())?;
    write_report(&mut out, &samples, &report)?;
    args.logs.write(&samples, &report)
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    /// Scenario file.
    #[arg(long, alias = "input", conflicts_with = "kind")]
    scenario: Option<PathBuf>,
    /// Default scenario of this kind when no file is given.
    #[arg(long)]
    kind: Option<String>,
    /// Recording path, or `udp://host:port` to stream packets.
    #[arg(long)]
    output: String,
    #[arg(long)]
    seed: Option<u64>,
    /// Stream as fast as possible.
    #[arg(long, conflicts_with = "rate")]
    fast: bool,
    /// Streaming pace as a multiple of real time.
    #[arg(long)]
    rate: Option<f64>,
}

pub fn simulate(args: SimulateArgs) -> Result<()> {
    let scenario = match (&args.scenario, &args.kind) {
        (Some(p), _) => Scenario::from_file(p).with_context(|| format!("scenario {}", p.display()))?,
        (None, Some(k)) => Scenario::with_kind(ScenarioKind::parse(k)?),
        (None, None) => bail!(Error::InvalidArgument("simulate needs --scenario or --kind".into())),
    };
    let seed = args.seed.or(scenario.seed).unwrap_or(0);
    let sim = scenario.generate(seed)?;
    if let Some(target) = args.output.strip_prefix("udp://") {
        let rate = if args.fast { 0.0 } else { args.rate.unwrap_or(1.0) };
        if !(rate >= 0.0 && rate.is_finite()) {
            bail!(Error::InvalidArgument(format!("rate {rate} must be >= 0")));
        }
        let target: SocketAddr =
            target.parse().map_err(|_| Error::InvalidArgument(format!("bad udp target `{target}`")))?;
        let sent = stream_udp(&sim.samples, target, rate)?;
        println!("packets_sent = {sent}");
    } else {
        let path = PathBuf::from(&args.output);
        let recorded: Vec<RecordedSample> = sim.samples.iter().copied().map(RecordedSample::from).collect();
        save_recording(&path, &recorded)?;
        TruthFile { scenario: scenario.kind.as_str().into(), seed, truth: sim.truth }.write(&truth_path(&path))?;
        println!("samples = {}", recorded.len());
    }
    Ok(())
}

fn stream_udp(samples: &[ImuSample], target: SocketAddr, rate: f64) -> Result<usize> {
    let bind: SocketAddr = if target.is_ipv4() { "0.0.0.0:0".parse()? } else { "[::]:0".parse()? };
    let socket = UdpSocket::bind(bind).map_err(Error::Transport)?;
    let start = Instant::now();
    let t0 = samples.first().map_or(0, |s| s.t_ms);
    for s in samples {
        if rate > 0.0 {
            let due = Duration::from_secs_f64((s.t_ms - t0) as f64 / 1000.0 / rate);
            if let Some(wait) = due.checked_sub(start.elapsed()) {
                thread::sleep(wait);
            }
        }
        socket.send_to(&encode_packet(s, None), target).map_err(Error::Transport)?;
    }
    Ok(samples.len())
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    common: Common,
    /// Recordings or directories of `.csv` recordings, each with a `.truth`
    /// sidecar holding its fall onset.
    #[arg(long, required = true, num_args = 1..)]
    input: Vec<PathBuf>,
    /// Model file to write.
    #[arg(long)]
    output: PathBuf,
}

fn expand_inputs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "csv"))
                .collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

pub fn train(args: TrainArgs) -> Result<()> {
    let cfg = load_config(&args.common)?;
    let files = expand_inputs(&args.input)?;
    let mut data = Vec::new();
    for f in &files {
        let recorded = read_recording_file(f).with_context(|| format!("reading {}", f.display()))?;
        let truth = TruthFile::read(&truth_path(f))?;
        let windows = label_windows(&samples_of(&recorded), truth.truth.fall_onset_ms, &cfg.windows, &cfg.filter)
            .with_context(|| format!("labeling {}", f.display()))?;
        data.extend(windows);
    }
    let (model, loss) = train_with_history(&data, &cfg.train)?;
    fs::write(&args.output, model.to_text())
        .with_context(|| format!("cannot write model {}", args.output.display()))?;
    let scored = data.iter().map(|w| Ok((predict(&model, &w.features)?, w))).collect::<equilivest::Result<Vec<_>>>()?;
    let m = metrics_at(&scored, cfg.feedback.risk.threshold);
    println!("recordings = {}", files.len());
    println!("windows = {}", data.len());
    println!("positives = {}", data.iter().filter(|w| w.label == 1).count());
    println!("final_loss = {:.6}", loss.last().copied().unwrap_or(f64::NAN));
    println!("threshold = {}", m.threshold);
    println!("train_sensitivity = {:.4}", m.sensitivity);
    println!("train_specificity = {:.4}", m.specificity);
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Feedback {
    Vestibular,
    Pacemaker,
    Risk,
    None,
}

fn apply_feedback(cfg: &mut RunConfig, selected: Option<&[Feedback]>) {
    let Some(sel) = selected else { return };
    let fb = &mut cfg.feedback;
    fb.vestibular_enabled = sel.contains(&Feedback::Vestibular);
    fb.pacemaker_enabled = sel.contains(&Feedback::Pacemaker);
    fb.risk_enabled = sel.contains(&Feedback::Risk);
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Recording to replay; without it packets are read from UDP.
    #[arg(long, conflicts_with = "port")]
    input: Option<PathBuf>,
    /// UDP port for live input; 0 picks a free one.
    #[arg(long)]
    port: Option<u16>,
    /// Replay pace for `--input`, as a multiple of real time; 0 is unpaced.
    #[arg(long, default_value_t = 0.0)]
    rate: f64,
    /// Stop live input after this long without packets.
    #[arg(long)]
    timeout_ms: Option<u64>,
    #[arg(long)]
    model: Option<PathBuf>,
    /// Feedback strategies to enable, overriding the configuration.
    #[arg(long, value_enum, value_delimiter = ',')]
    feedback: Option<Vec<Feedback>>,
    /// Write the accepted live samples as a recording.
    #[arg(long)]
    record: Option<PathBuf>,
    /// Analysis report; stderr summary only when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    logs: Logs,
}

pub fn run(args: RunArgs) -> Result<()> {
    let mut cfg = load_config(&args.common)?;
    apply_feedback(&mut cfg, args.feedback.as_deref());
    let model = load_model(args.model.as_deref())?;
    let mut pipeline = Pipeline::new(cfg.pipeline(), model)?;
    if args.logs.series.is_some() {
        pipeline = pipeline.with_series();
    }

    // commands go to stdout as they are produced unless a log file is given
    let live_channel = args.logs.commands.is_none();
    let mut channel = std::io::stdout().lock();
    if live_channel {
        writeln!(channel, "{COMMANDS_HEADER}")?;
    }
    let mut emitted = 0;
    let mut samples = Vec::new();
    let mut step = |pipeline: &mut Pipeline, s: ImuSample| -> Result<()> {
        pipeline.push(&s)?;
        samples.push(s);
        if live_channel {
            for c in &pipeline.commands()[emitted..] {
                writeln!(channel, "{c}")?;
            }
        }
        emitted = pipeline.commands().len();
        Ok(())
    };

    if let Some(input) = &args.input {
        for r in replay_session(input, args.rate).with_context(|| format!("reading {}", input.display()))? {
            step(&mut pipeline, r.sample)?;
        }
    } else {
        let port = args.port.unwrap_or(cfg.telemetry.port);
        let session =
            LiveSession::start(cfg.telemetry.bind, port, idle(args.timeout_ms), cfg.telemetry.queue_capacity)?;
        let mut gate = OrderGate::default();
        let mut recorded = Vec::new();
        while let Some((sample, orientation)) = session.next() {
            if gate.admit(&sample) {
                step(&mut pipeline, sample)?;
                recorded.push(RecordedSample { sample, orientation });
            }
        }
        let (stats, overflowed) = session.finish()?;
        if let Some(p) = &args.record {
            save_recording(p, &recorded)?;
        }
        let mut err = std::io::stderr();
        writeln!(
            err,
            "received {} dropped {} reordered {} rejected {} overflowed {} skipped {}",
            stats.packets_received,
            stats.packets_dropped,
            stats.packets_reordered,
            stats.packets_rejected,
            overflowed,
            gate.skipped
        )?;
    }
    channel.flush()?;

    let report = pipeline.finish();
    if let Some(p) = &args.output {
        write_to(p, "report", |out| write_report(out, &samples, &report))?;
    }
    eprintln!(
        "samples {} steps {} breakpoints {} falls {} commands {}",
        report.samples_processed,
        report.steps().len(),
        report.count(equilivest::GaitEventKind::BreakpointCrossed),
        report.count(equilivest::GaitEventKind::FallDetected),
        report.commands.len()
    );
    args.logs.write(&samples, &report)
}
