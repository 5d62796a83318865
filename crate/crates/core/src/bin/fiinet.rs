use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use fiinet::cli::{self, InputFormat, PrepareArgs, RunConfig, SWEEP_DIMS};
use fiinet::network::Variant;
use fiinet::synthetic::PlantedConfig;
use fiinet::Result;

#[derive(Parser)]
#[command(
    name = "fiinet",
    version,
    about = "CTR prediction with attention over explicit feature crosses"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Tsv,
    Semicolon,
    Bookcrossing,
}

#[derive(Subcommand)]
enum Command {
    /// Encode a raw table into vocabulary and train/valid/test splits.
    Prepare {
        #[arg(long)]
        input: PathBuf,
        /// LABEL:FIELD,FIELD,... with optional FIELD#BINS bucketizing.
        #[arg(long)]
        schema: Option<String>,
        /// Scores strictly above this are positives.
        #[arg(long)]
        threshold: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        #[arg(long, default_value_t = 2023)]
        seed: u64,
    },
    /// Write planted-interaction data as a prepared directory.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20_000)]
        examples: usize,
        #[arg(long, default_value_t = 6)]
        fields: usize,
        #[arg(long, default_value_t = 10)]
        vocab: usize,
        #[arg(long, default_value_t = 2023)]
        seed: u64,
    },
    /// Train the configured variant.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Evaluate a checkpoint on the validation and test splits.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Train FiiNet and the listed ablation variants with one seed.
    Ablate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "sh,s,h")]
        variants: Vec<Variant>,
    },
    /// Train once per embedding dimension.
    SweepK {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',')]
        dims: Option<Vec<usize>>,
    },
    /// Per-channel attention weights before and after training.
    ExportAttention {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Finite-difference check of all parameter gradients.
    Gradcheck {
        #[arg(long)]
        config: PathBuf,
        /// Variants to check; defaults to the configured one.
        #[arg(long, value_delimiter = ',')]
        variants: Vec<Variant>,
    },
}

fn run(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Prepare {
            input,
            schema,
            threshold,
            out: dir,
            format,
            seed,
        } => {
            let format = match format {
                Format::Csv => InputFormat::Delimited(b','),
                Format::Tsv => InputFormat::Delimited(b'\t'),
                Format::Semicolon => InputFormat::Delimited(b';'),
                Format::Bookcrossing => InputFormat::BookCrossing,
            };
            let args = PrepareArgs {
                input,
                schema,
                threshold,
                out: dir,
                format,
                seed,
            };
            cli::cmd_prepare(&args, out).map(drop)
        }
        Command::Synth {
            out: dir,
            examples,
            fields,
            vocab,
            seed,
        } => {
            let cfg = PlantedConfig {
                num_examples: examples,
                num_fields: fields,
                vocab_per_field: vocab,
                seed,
                ..PlantedConfig::default()
            };
            cli::cmd_synth(&cfg, &dir, out).map(drop)
        }
        Command::Train { config } => cli::cmd_train(&RunConfig::read(&config)?, out).map(drop),
        Command::Eval { config, checkpoint } => {
            cli::cmd_eval(&RunConfig::read(&config)?, &checkpoint, out).map(drop)
        }
        Command::Ablate { config, variants } => {
            cli::cmd_ablate(&RunConfig::read(&config)?, &variants, out).map(drop)
        }
        Command::SweepK { config, dims } => {
            let dims = dims.unwrap_or_else(|| SWEEP_DIMS.to_vec());
            cli::cmd_sweep_k(&RunConfig::read(&config)?, &dims, out).map(drop)
        }
        Command::ExportAttention { config, checkpoint } => {
            cli::cmd_export_attention(&RunConfig::read(&config)?, &checkpoint, out).map(drop)
        }
        Command::Gradcheck { config, variants } => {
            cli::cmd_gradcheck(&RunConfig::read(&config)?, &variants, out).map(drop)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Cli::parse();
    let stdout = std::io::stdout();
    match run(args.command, &mut stdout.lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", cli::error_line(&e));
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}
