use std::fs;
use std::io::{self, Read};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use twtsim::harness::{run_scenario, run_sweep, AccessMode, ModeSpec, ScenarioConfig, SweepSpec};
use twtsim::overhead::{table_csv, table_report};
use twtsim::twt::{decode_element, encode_element, TwtMessage};

#[derive(Parser)]
#[command(name = "twtsim", version, about = "802.11ax DCF vs TWT uplink simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its JSON report.
    Run(RunArgs),
    /// Run a load x mode x replication sweep into a CSV table.
    Sweep(SweepArgs),
    /// Print the TWT management overhead table.
    OverheadTable(TableArgs),
    /// Encode or decode TWT elements as hex.
    #[command(subcommand)]
    Codec(CodecCommand),
}

#[derive(Args)]
struct ScenarioArgs {
    /// TOML scenario file; missing keys take preset values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named parameter set used when no config file is given.
    #[arg(long, default_value = twtsim::harness::PRESET_DEFAULT)]
    preset: String,
    #[arg(long)]
    seed: Option<u64>,
    /// Simulated seconds.
    #[arg(long)]
    duration: Option<f64>,
}

impl ScenarioArgs {
    fn load(&self) -> Result<ScenarioConfig, String> {
        let mut c = match &self.config {
            Some(p) => ScenarioConfig::parse(&read(p)?).map_err(|e| format!("{}: {e}", p.display()))?,
            None => ScenarioConfig::preset(&self.preset).map_err(|e| e.to_string())?,
        };
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(d) = self.duration {
            c.duration_s = d;
        }
        Ok(c)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Access {
    Dcf,
    Twt,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, value_enum)]
    access: Option<Access>,
    /// Per-station load in Mbit/s.
    #[arg(long)]
    load: Option<f64>,
    #[arg(long)]
    sessions: Option<usize>,
    /// Report destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// TOML sweep spec (base config under [base]).
    #[arg(long, conflicts_with = "config")]
    spec: Option<PathBuf>,
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Comma-separated loads in Mbit/s.
    #[arg(long, value_delimiter = ',')]
    loads: Option<Vec<f64>>,
    /// Comma-separated modes: dcf, twt-<sessions>.
    #[arg(long, value_delimiter = ',')]
    modes: Option<Vec<ModeSpec>>,
    #[arg(long)]
    replications: Option<usize>,
    /// CSV destination; an existing file is resumed.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum TableFormat {
    Csv,
    Json,
}

#[derive(Args)]
struct TableArgs {
    #[arg(long, value_delimiter = ',', default_value = "10,100")]
    n: Vec<u64>,
    #[arg(long, value_delimiter = ',', default_value = "10,100")]
    k: Vec<u64>,
    #[arg(long, value_enum, default_value = "csv")]
    format: TableFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum CodecCommand {
    /// Read a JSON message (file or stdin) and print the element as hex.
    Encode {
        /// JSON file; stdin when absent.
        input: Option<PathBuf>,
    },
    /// Decode a hex element and print the message as JSON.
    Decode { hex: String },
}

fn read(p: &Path) -> Result<String, String> {
    fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), String> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| format!("{}: {e}", p.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn run(args: RunArgs) -> Result<(), String> {
    let mut c = args.scenario.load()?;
    if let Some(a) = args.access {
        c.access = match a {
            Access::Dcf => AccessMode::Dcf,
            Access::Twt => AccessMode::Twt,
        };
    }
    if let Some(l) = args.load {
        c.load_mbps = l;
    }
    if let Some(k) = args.sessions {
        c.twt.num_sessions = k;
    }
    let report = run_scenario(&c).map_err(|e| e.to_string())?;
    emit(args.out.as_deref(), &report.to_json())
}

fn sweep(args: SweepArgs) -> Result<(), String> {
    let mut spec = match &args.spec {
        Some(p) => SweepSpec::parse(&read(p)?).map_err(|e| format!("{}: {e}", p.display()))?,
        None => SweepSpec {
            base: args.scenario.load()?,
            ..SweepSpec::default()
        },
    };
    if args.spec.is_some() {
        if let Some(s) = args.scenario.seed {
            spec.base.seed = s;
        }
        if let Some(d) = args.scenario.duration {
            spec.base.duration_s = d;
        }
    }
    if let Some(l) = args.loads {
        spec.loads_mbps = l;
    }
    if let Some(m) = args.modes {
        spec.modes = m;
    }
    if let Some(r) = args.replications {
        spec.replications = r;
    }
    let rows = run_sweep(&spec, args.out.as_deref()).map_err(|e| e.to_string())?;
    if args.out.is_none() {
        let mut w = csv::Writer::from_writer(io::stdout());
        for r in &rows {
            w.serialize(r).map_err(|e| e.to_string())?;
        }
        w.flush().map_err(|e| e.to_string())?;
    } else {
        log::info!("{} rows written", rows.len());
    }
    Ok(())
}

fn table(args: TableArgs) -> Result<(), String> {
    let rows = table_report(&args.n, &args.k);
    let text = match args.format {
        TableFormat::Csv => table_csv(&rows).trim_end().to_string(),
        TableFormat::Json => serde_json::to_string_pretty(&rows).map_err(|e| e.to_string())?,
    };
    emit(args.out.as_deref(), &text)
}

fn codec(cmd: CodecCommand) -> Result<(), String> {
    match cmd {
        CodecCommand::Encode { input } => {
            let text = match input {
                Some(p) => read(&p)?,
                None => {
                    let mut s = String::new();
                    io::stdin().read_to_string(&mut s).map_err(|e| e.to_string())?;
                    s
                }
            };
            let m: TwtMessage = serde_json::from_str(&text).map_err(|e| format!("message JSON: {e}"))?;
            let bytes = encode_element(&m).map_err(|e| e.to_string())?;
            println!("{}", hex::encode(bytes));
        }
        CodecCommand::Decode { hex: h } => {
            let bytes = hex::decode(h.trim()).map_err(|e| format!("hex: {e}"))?;
            let m = decode_element(&bytes).map_err(|e| e.to_string())?;
            println!("{}", serde_json::to_string_pretty(&m).expect("message serializes"));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Sweep(a) => sweep(a),
        Command::OverheadTable(a) => table(a),
        Command::Codec(c) => codec(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
