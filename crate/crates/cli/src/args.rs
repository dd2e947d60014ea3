use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use mteval_core::correlation::Level;
use mteval_core::metrics::{MeteorPenalty, Metric};

#[derive(Debug, Parser)]
#[command(
    name = "mteval",
    version,
    about = "Machine translation evaluation toolkit"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score a hypothesis file against a reference file.
    Score(ScoreArgs),
    /// Correlate a score report with human judgments.
    Correlate(CorrelateArgs),
    /// Export per-segment human scores from a judgment file.
    AnnotateExport(ExportArgs),
    /// Run the annotation HTTP service.
    Serve(ServeArgs),
    /// Print normalized, tokenized text, one segment per line.
    Tokenize(TokenizeArgs),
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub hyp: PathBuf,
    #[arg(long = "ref")]
    pub reference: PathBuf,
    /// Document manifest: `name<TAB>first<TAB>last` per line, 1-based.
    #[arg(long)]
    pub docs: Option<PathBuf>,
    #[arg(long)]
    pub stems: Option<PathBuf>,
    #[arg(long)]
    pub synonyms: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "bleu,gtm,meteor,atec")]
    pub metrics: Vec<Metric>,
    /// Highest BLEU n-gram order.
    #[arg(long = "n", default_value_t = 4)]
    pub max_n: usize,
    #[arg(long, default_value = "paper")]
    pub meteor_penalty: MeteorPenalty,
    #[arg(long, default_value_t = 4.0)]
    pub atec_coefficient: f64,
    /// Add-epsilon smoothing for zero BLEU precisions: `--smooth`,
    /// `--smooth 1e-6` or `--smooth epsilon=1e-6`.
    #[arg(long, num_args = 0..=1, default_missing_value = "1e-9", value_parser = parse_epsilon)]
    pub smooth: Option<f64>,
    #[arg(long)]
    pub no_strip_punctuation: bool,
    #[arg(long)]
    pub strip_diacritics: bool,
    /// Worker threads (0: one per core).
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    #[arg(long)]
    pub system: Option<String>,
    /// Include per-segment alignments.
    #[arg(long)]
    pub verbose: bool,
    /// Report path; the report goes to standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CorrelateArgs {
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long)]
    pub judgments: PathBuf,
    #[arg(long, default_value = "sentence")]
    pub level: Level,
    /// Systems to correlate (default: every system in the judgments).
    #[arg(long, value_delimiter = ',')]
    pub system: Vec<String>,
    /// Metrics to correlate (default: every metric in the report).
    #[arg(long, value_delimiter = ',')]
    pub metric: Vec<Metric>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub judgments: PathBuf,
    #[arg(long)]
    pub system: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// One output file per system, as `name=path`.
    #[arg(long = "system", required = true, value_parser = parse_system)]
    pub systems: Vec<(String, PathBuf)>,
    /// Source-language text shown alongside each output.
    #[arg(long)]
    pub source: Option<PathBuf>,
    #[arg(long)]
    pub judgments: PathBuf,
    #[arg(long, env = "MTEVAL_PORT", default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Directory with the built annotation UI.
    #[arg(long)]
    pub ui: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TokenizeArgs {
    /// Input file (default: standard input).
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub strip_diacritics: bool,
    /// Drop punctuation tokens, as the metrics do by default.
    #[arg(long)]
    pub strip_punctuation: bool,
}

fn parse_system(s: &str) -> Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => {
            Ok((name.to_string(), PathBuf::from(path)))
        }
        _ => Err(format!("expected name=path, got {s:?}")),
    }
}

fn parse_epsilon(s: &str) -> Result<f64, String> {
    let value = s.strip_prefix("epsilon=").unwrap_or(s);
    match value.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!(
            "expected a positive number or epsilon=<number>, got {s:?}"
        )),
    }
}
