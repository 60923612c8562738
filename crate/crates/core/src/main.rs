use std::fs;
use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use specbeam::error::{Error, Result};
use specbeam::harness::{
    run_bench, run_decode, run_sweep, DecodeOptions, ModeKind, ModelKind, PolicyKind, SweepPlan,
};
use specbeam::policy::load_schedule;
use specbeam::scorer::{HashModel, TabularModel};

const SEED_ENV: &str = "SIMUL_DECODE_SEED";

#[derive(Parser)]
#[command(
    name = "specbeam",
    version,
    about = "Streaming sequence decoding with speculative beam search"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Decode input sentences under a simultaneous policy.
    Decode(DecodeArgs),
    /// Run a (mode, k, b, w) cross-product and emit a metrics CSV.
    Sweep(SweepArgs),
    /// Measure per-token speculative-step latency on a hash model.
    Bench(BenchArgs),
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// Tabular model file.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Seed for the built-in hash model (needs --vocab).
    #[arg(long)]
    hash_seed: Option<u64>,
    /// Vocabulary size of the hash model.
    #[arg(long)]
    vocab: Option<usize>,
    /// Sharpness exponent of the hash model.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Multiplier on the hash model's eos weight.
    #[arg(long, default_value_t = 1.0)]
    eos_weight: f64,
}

impl ModelArgs {
    fn seed(&self) -> u64 {
        self.hash_seed.unwrap_or_else(|| {
            std::env::var(SEED_ENV)
                .ok()
                .and_then(|s| s.parse().ok())
                .unwrap_or(0)
        })
    }

    fn load(&self) -> Result<ModelKind> {
        if let Some(path) = &self.model {
            if self.hash_seed.is_some() || self.vocab.is_some() {
                return Err(Error::Usage(
                    "--model conflicts with --hash-seed/--vocab".into(),
                ));
            }
            return Ok(ModelKind::Tabular(TabularModel::load(path)?));
        }
        match self.vocab {
            Some(vocab) => Ok(ModelKind::Hash(HashModel::with_params(
                self.seed(),
                vocab,
                self.alpha,
                self.eos_weight,
            )?)),
            None => Err(Error::Usage(
                "a model is required: pass --model <file>, or --hash-seed <int> with --vocab <int>"
                    .into(),
            )),
        }
    }
}

#[derive(Args, Clone)]
struct SharedDecodeArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// READ/WRITE policy.
    #[arg(long, default_value = "wait-k")]
    policy: String,
    /// Wait-k offset.
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Log-prob threshold for --policy threshold.
    #[arg(long, default_value_t = -2.0, allow_hyphen_values = true)]
    rho: f64,
    /// Schedule file of R/W characters for --policy schedule.
    #[arg(long)]
    schedule: Option<PathBuf>,
    /// Beam size.
    #[arg(long, default_value_t = 5)]
    beam: usize,
    /// Speculative window.
    #[arg(long, default_value_t = 2)]
    window: usize,
    /// Allow committing eos before the source has fully arrived.
    #[arg(long)]
    allow_early_eos: bool,
    /// Content-length cap: floor(ratio * source_len) + offset.
    #[arg(long, default_value_t = 2.0)]
    max_len_ratio: f64,
    #[arg(long, default_value_t = 5, allow_hyphen_values = true)]
    max_len_offset: i64,
    /// Per-token bonus when selecting the final tail hypothesis.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    length_reward: f64,
    /// Write decode traces (JSONL) to this file.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Input file of whitespace-tokenized sentences, or `-` for stdin.
    #[arg(long, default_value = "-")]
    input: String,
}

impl SharedDecodeArgs {
    fn options(&self, mode: ModeKind) -> Result<DecodeOptions> {
        let policy = PolicyKind::parse(&self.policy)?;
        let schedule = match &self.schedule {
            Some(path) => Some(load_schedule(path)?),
            None => None,
        };
        if policy == PolicyKind::Schedule && schedule.is_none() {
            return Err(Error::Usage(
                "--policy schedule requires --schedule <file>".into(),
            ));
        }
        Ok(DecodeOptions {
            policy,
            k: self.k,
            rho: self.rho,
            schedule,
            mode,
            b: self.beam,
            w: self.window,
            allow_early_eos: self.allow_early_eos,
            max_len_ratio: self.max_len_ratio,
            max_len_offset: self.max_len_offset,
            length_reward: self.length_reward,
        })
    }

    fn read_input(&self) -> Result<String> {
        if self.input == "-" {
            let mut buf = String::new();
            std::io::stdin().read_to_string(&mut buf)?;
            Ok(buf)
        } else {
            Ok(fs::read_to_string(&self.input)?)
        }
    }
}

#[derive(Args)]
struct DecodeArgs {
    #[command(flatten)]
    shared: SharedDecodeArgs,
    /// Commit mode.
    #[arg(long, default_value = "sbs")]
    mode: String,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    shared: SharedDecodeArgs,
    /// Comma-separated commit modes.
    #[arg(long, default_value = "sbs")]
    mode_list: String,
    /// Comma-separated wait-k offsets.
    #[arg(long, default_value = "1,3,5")]
    k_list: String,
    /// Comma-separated beam sizes.
    #[arg(long, default_value = "1,5")]
    beam_list: String,
    /// Comma-separated window sizes.
    #[arg(long, default_value = "0,2")]
    window_list: String,
    /// Reference translations, one per input line, for BLEU.
    #[arg(long)]
    refs: Option<PathBuf>,
    /// Number of seed-shifted hash-model instances to aggregate over.
    #[arg(long, default_value_t = 1)]
    num_instances: u64,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Vocabulary size of the benchmark hash model.
    #[arg(long)]
    vocab: usize,
    #[arg(long, default_value_t = 10)]
    beam: usize,
    #[arg(long, default_value_t = 5)]
    window: usize,
    /// Number of speculative steps to time.
    #[arg(long, default_value_t = 200)]
    steps: usize,
    #[arg(long)]
    hash_seed: Option<u64>,
    /// Append a CSV row with tokens_per_sec to this file.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for part in text.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        out.push(
            part.parse::<T>()
                .map_err(|_| Error::Usage(format!("invalid {what} entry {part:?}")))?,
        );
    }
    if out.is_empty() {
        return Err(Error::Usage(format!("{what} must not be empty")));
    }
    Ok(out)
}

fn cmd_decode(args: DecodeArgs) -> Result<()> {
    let mode = ModeKind::parse(&args.mode)?;
    let model = args.shared.model.load()?;
    let opts = args.shared.options(mode)?;
    let input = args.shared.read_input()?;
    let result = run_decode(&model, &input, &opts)?;
    for line in &result.lines {
        println!("{line}");
    }
    if let Some(path) = &args.shared.trace {
        fs::write(path, result.traces)?;
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let modes = parse_list::<String>(&args.mode_list, "--mode-list")?
        .iter()
        .map(|m| ModeKind::parse(m))
        .collect::<Result<Vec<_>>>()?;
    let plan = SweepPlan {
        base: args.shared.options(ModeKind::Sbs)?,
        modes,
        k_list: parse_list(&args.k_list, "--k-list")?,
        b_list: parse_list(&args.beam_list, "--beam-list")?,
        w_list: parse_list(&args.window_list, "--window-list")?,
        num_instances: args.num_instances,
        references: match &args.refs {
            Some(path) => Some(
                fs::read_to_string(path)?
                    .lines()
                    .map(|l| l.split_whitespace().map(String::from).collect())
                    .collect(),
            ),
            None => None,
        },
    };
    let model = args.shared.model.load()?;
    let input = args.shared.read_input()?;
    let output = run_sweep(&model, &input, &plan)?;
    match &args.csv {
        Some(path) => fs::write(path, &output.csv)?,
        None => print!("{}", output.csv),
    }
    if let Some(path) = &args.shared.trace {
        fs::write(path, output.traces)?;
    }
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    let seed = args.hash_seed.unwrap_or_else(|| {
        std::env::var(SEED_ENV)
            .ok()
            .and_then(|s| s.parse().ok())
            .unwrap_or(0)
    });
    let report = run_bench(seed, args.vocab, args.beam, args.window, args.steps)?;
    print!("{}", report.format_text());
    if let Some(path) = &args.csv {
        fs::write(path, report.csv(args.beam, args.window))?;
    }
    Ok(())
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::ModelParse { .. }
        | Error::ModelValidation { .. }
        | Error::ModelVocab { .. }
        | Error::UnknownInputToken { .. }
        | Error::ScheduleParse { .. }
        | Error::InvalidTokenId { .. }
        | Error::TraceParse { .. } => 2,
        Error::PolicyContract(_) => 3,
        Error::Usage(_) => 64,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 64,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.cmd {
        Cmd::Decode(args) => cmd_decode(args),
        Cmd::Sweep(args) => cmd_sweep(args),
        Cmd::Bench(args) => cmd_bench(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
