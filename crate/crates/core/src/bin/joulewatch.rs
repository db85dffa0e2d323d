use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use joulewatch::alert::{AlertSink, LineSink, WebhookSink};
use joulewatch::baseline::DeviceStatus;
use joulewatch::commands::{
    cmd_learn, cmd_monitor, cmd_replay, cmd_report, cmd_simulate, describe_profile, LearnOptions, Overrides,
    ReplayOptions,
};
use joulewatch::sim::{Regime, RegimeSpec, ScenarioConfig};
use joulewatch::{Protocol, Scope, SourceConfig};

#[derive(Parser)]
#[command(name = "joulewatch", version, about = "Detect energy-consumption attacks from packet rates and energy footprints")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long, default_value_t = 180.0)]
    slot_secs: f64,
    #[arg(long, default_value_t = 10)]
    window_slots: usize,
    #[arg(long, default_value_t = 3)]
    counter_limit: u32,
    /// Joules per one-second sample [default: 1.42, or the profile's value]
    #[arg(long)]
    energy_threshold: Option<f64>,
    #[arg(long, default_value = "tcp,udp,mqtt,aggregate")]
    scope: String,
    #[arg(long, default_value_t = 1.0)]
    time_compression: f64,
}

impl Common {
    fn overrides(&self) -> joulewatch::Result<Overrides> {
        Ok(Overrides {
            slot_secs: self.slot_secs,
            window_slots: self.window_slots,
            counter_limit: self.counter_limit,
            energy_threshold: self.energy_threshold,
            scopes: Scope::parse_list(&self.scope)?,
            time_compression: self.time_compression,
        })
    }
}

#[derive(Args)]
struct DetectArgs {
    #[arg(long)]
    sensor: Option<PathBuf>,
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    profile: Option<PathBuf>,
    #[arg(long)]
    store: Option<PathBuf>,
    #[arg(long)]
    device: Option<String>,
    /// POST each alert as JSON to this URL
    #[arg(long)]
    webhook: Option<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Clone, Copy, ValueEnum)]
enum SimProtocol {
    Tcp,
    Udp,
    Mqtt,
    Mix,
}

#[derive(Clone, Copy, ValueEnum)]
enum Status {
    Idle,
    Active,
}

#[derive(Subcommand)]
enum Command {
    /// Learn a normal-behaviour profile from attack-free traffic
    Learn {
        replay: PathBuf,
        #[arg(long)]
        sensor: Option<PathBuf>,
        #[arg(long, default_value = "profile.json")]
        profile: PathBuf,
        #[arg(long)]
        store: Option<PathBuf>,
        #[arg(long)]
        device: Option<String>,
        #[arg(long, value_enum, default_value = "active")]
        status: Status,
        #[arg(long, default_value_t = 0.10)]
        margin: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Run detection over a recorded replay file
    Replay {
        replay: PathBuf,
        #[command(flatten)]
        args: DetectArgs,
    },
    /// Run detection over replay-format lines read from stdin
    Monitor {
        #[command(flatten)]
        args: DetectArgs,
    },
    /// Generate a seeded scenario: traffic.csv, energy.csv, labels.csv
    Simulate {
        #[arg(long, value_enum, default_value = "tcp")]
        protocol: SimProtocol,
        #[arg(long)]
        attack: bool,
        /// Attack onset in virtual seconds
        #[arg(long, default_value_t = 0.0)]
        onset: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 1800.0)]
        duration: f64,
        #[arg(long, default_value = "rpi-0")]
        device: String,
        #[arg(long, default_value = "scenario")]
        out: PathBuf,
        #[arg(long, default_value_t = 180.0)]
        slot_secs: f64,
        #[arg(long, default_value_t = 1.0)]
        time_compression: f64,
    },
    /// Write figure-data series and a summary table for a stored run
    Report {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        run: Option<String>,
        #[arg(long, default_value = "report")]
        out: PathBuf,
    },
}

fn sinks(webhook: Option<&str>) -> Vec<Box<dyn AlertSink>> {
    let mut sinks: Vec<Box<dyn AlertSink>> = vec![Box::new(LineSink::stdout())];
    if let Some(url) = webhook {
        sinks.push(Box::new(WebhookSink::new(url)));
    }
    sinks
}

fn replay_options(replay: PathBuf, args: &DetectArgs) -> joulewatch::Result<ReplayOptions> {
    Ok(ReplayOptions {
        replay,
        sensor: args.sensor.clone(),
        labels: args.labels.clone(),
        profile: args.profile.clone(),
        store: args.store.clone(),
        device: args.device.clone(),
        overrides: args.common.overrides()?,
    })
}

fn run(cli: Cli) -> joulewatch::Result<i32> {
    match cli.command {
        Command::Learn {
            replay,
            sensor,
            profile,
            store,
            device,
            status,
            margin,
            common,
        } => {
            let opts = LearnOptions {
                replay,
                sensor,
                profile_out: profile.clone(),
                store,
                device,
                status: match status {
                    Status::Idle => DeviceStatus::Idle,
                    Status::Active => DeviceStatus::Active,
                },
                margin,
                overrides: common.overrides()?,
            };
            let learned = cmd_learn(&opts)?;
            print!("{}", describe_profile(&learned));
            println!("written to {}", profile.display());
            Ok(0)
        }
        Command::Replay { replay, args } => {
            let opts = replay_options(replay, &args)?;
            let summary = cmd_replay(&opts, sinks(args.webhook.as_deref()))?;
            eprintln!(
                "{}: {} slots, {} detection events",
                summary.run_id,
                summary.slots,
                summary.detection_events().count()
            );
            Ok(summary.exit_code())
        }
        Command::Monitor { args } => {
            let opts = replay_options(PathBuf::from("-"), &args)?;
            let source = SourceConfig::live_stdin().with_time_compression(opts.overrides.time_compression);
            let summary = cmd_monitor(&source, &opts, sinks(args.webhook.as_deref()))?;
            Ok(summary.exit_code())
        }
        Command::Simulate {
            protocol,
            attack,
            onset,
            seed,
            duration,
            device,
            out,
            slot_secs,
            time_compression,
        } => {
            let regime = if attack { Regime::Attack } else { Regime::Normal };
            let mut config = match protocol {
                SimProtocol::Tcp => ScenarioConfig::single(Protocol::Tcp, regime, seed),
                SimProtocol::Udp => ScenarioConfig::single(Protocol::Udp, regime, seed),
                SimProtocol::Mqtt => ScenarioConfig::single(Protocol::MqttSub, regime, seed),
                SimProtocol::Mix => ScenarioConfig::mixed(regime, seed),
            };
            for spec in config.regimes.values_mut() {
                *spec = RegimeSpec::attack_from(onset);
            }
            config.duration = duration;
            config.device_id = device;
            config.slot_length = slot_secs;
            config.time_compression = time_compression;
            let files = cmd_simulate(&config, &out)?;
            println!("{}", files.replay.display());
            println!("{}", files.sensor.display());
            println!("{}", files.labels.display());
            Ok(0)
        }
        Command::Report { store, run, out } => {
            let report = cmd_report(&store, run.as_deref(), &out)?;
            print!("{}", report.summary);
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
