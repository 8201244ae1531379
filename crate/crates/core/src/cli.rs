use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::corpus::Source;
use crate::error::Error;
use crate::harness::{self, report::CSV_COLUMNS, ExperimentConfig, PreparedDataset, ResultsMatrix};
use crate::models::{target_form, Architecture, Representation};
use crate::textprep::porter_stem;
use crate::verify;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "fakenews", version, about = "Text representation and neural classifier benchmark for fake-news corpora")]
pub struct Cli {
    /// TOML configuration file; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides `seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides `report.threads`.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Enables the desk-scale profile.
    #[arg(long, global = true)]
    pub desk_scale: bool,
    /// Overrides `report.output_dir`.
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Prints the tokens of each line of a text file after preprocessing.
    Prep { input: PathBuf },
    /// Builds the one-hot vocabulary from a dataset's training side.
    Vocab {
        #[arg(long)]
        dataset: Source,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Trains and evaluates one grid cell and prints its CSV row.
    Train {
        #[arg(long)]
        dataset: Source,
        #[arg(long)]
        representation: Representation,
        #[arg(long)]
        architecture: Architecture,
    },
    /// Runs the configured grid and writes results.csv and results.md.
    Grid,
    /// Renders a results CSV as markdown tables.
    Report {
        input: PathBuf,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Runs the finite-difference gradient checks.
    Gradcheck {
        #[arg(long, default_value_t = 20)]
        shapes: usize,
    },
    /// Prints the Porter stem of each word.
    Stem {
        #[arg(required = true)]
        words: Vec<String>,
    },
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { .. }
        | Error::UnknownLabel(_)
        | Error::EmptyCorpus
        | Error::Format { .. }
        | Error::Csv(_)
        | Error::Json(_) => EXIT_DATA,
        _ => EXIT_USAGE,
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path).map_err(|e| match e {
            Error::Io { path, source } => {
                Error::Config(format!("cannot read config {}: {source}", path.display()))
            }
            other => other,
        })?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(threads) = cli.threads {
        cfg.report.threads = threads;
    }
    if cli.desk_scale {
        cfg.desk_scale.enabled = true;
    }
    if let Some(dir) = &cli.output_dir {
        cfg.report.output_dir = dir.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_or_print(text: &str, out: Option<&Path>, stdout: &mut dyn Write) -> Result<(), Error> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Error::io(path, e)),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| Error::io("<stdout>", e)),
    }
}

fn execute(cli: &Cli, stdout: &mut dyn Write) -> Result<i32, Error> {
    let out_err = |e| Error::io("<stdout>", e);
    if let Command::Stem { words } = &cli.command {
        for w in words {
            writeln!(stdout, "{}", porter_stem(&w.to_lowercase())).map_err(out_err)?;
        }
        return Ok(EXIT_OK);
    }
    if let Command::Report { input, out } = &cli.command {
        let matrix = ResultsMatrix::load_csv(input)?;
        write_or_print(&matrix.to_markdown(), out.as_deref(), stdout)?;
        return Ok(EXIT_OK);
    }
    if let Command::Gradcheck { shapes } = &cli.command {
        let cfg = load_config(cli)?;
        let report = verify::run_suite(*shapes, cfg.seed)?;
        for e in &report.entries {
            writeln!(stdout, "{e}").map_err(out_err)?;
        }
        return Ok(if report.passed() { EXIT_OK } else { EXIT_VERIFY });
    }

    let cfg = load_config(cli)?;
    let pre = harness::preprocessor(&cfg)?;
    match &cli.command {
        Command::Prep { input } => {
            let text = fs::read_to_string(input).map_err(|e| Error::io(input, e))?;
            for line in text.lines() {
                writeln!(stdout, "{}", pre.preprocess(line).join(" ")).map_err(out_err)?;
            }
        }
        Command::Vocab { dataset, out } => {
            let train = harness::data::load_train(&cfg, *dataset)?;
            let side = harness::Side::from_corpus(&train, &pre);
            let vocab = crate::vectorizers::Vocabulary::build(&side.tokens, Some(cfg.vectorizers.onehot_vocab))?;
            write_or_print(&vocab.to_text(), out.as_deref(), stdout)?;
        }
        Command::Train {
            dataset,
            representation,
            architecture,
        } => {
            let data = PreparedDataset::load(&cfg, *dataset, &pre)?;
            let row = if *architecture == Architecture::Baseline {
                harness::baseline_row(&cfg, &data)?
            } else {
                if cfg.report.checkpoints {
                    let dir = cfg.report.output_dir.join("checkpoints");
                    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
                }
                let fitted = harness::fit(&cfg, &data, *representation)?;
                let form = target_form(*representation, *architecture)?;
                let (train, test) = fitted.encode(&data, form, &cfg);
                harness::run_cell(&cfg, &data, &fitted, *architecture, &train, &test)?
            };
            let mut matrix = ResultsMatrix::default();
            matrix.insert(row)?;
            let csv = matrix.to_csv();
            let header = CSV_COLUMNS.join(",");
            let body = csv.split_once(&format!("{header}\n")).map_or("", |(_, b)| b);
            write!(stdout, "{header}\n{body}").map_err(out_err)?;
        }
        Command::Grid => {
            let matrix = harness::run_grid(&cfg)?;
            let (csv, md) = harness::write_reports(&matrix, &cfg.report.output_dir)?;
            writeln!(
                stdout,
                "{} cells, {} absent; wrote {} and {}",
                matrix.len(),
                matrix.absent().count(),
                csv.display(),
                md.display()
            )
            .map_err(out_err)?;
        }
        Command::Stem { .. } | Command::Report { .. } | Command::Gradcheck { .. } => unreachable!(),
    }
    Ok(EXIT_OK)
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            if code == EXIT_OK {
                let _ = stdout.write_all(text.as_bytes());
            } else {
                let _ = stderr.write_all(text.as_bytes());
            }
            return code;
        }
    };
    match execute(&cli, stdout) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}
