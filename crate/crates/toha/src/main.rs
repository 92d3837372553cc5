use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use toha::cache::load_table;
use toha::error::{Error, Result};
use toha::io::write_atomic;
use toha::manifest::read_manifest_unchecked;
use toha::pipeline::{self, ScoreVariant, SelectionReport};
use toha::synth::{SyntheticGenerator, SyntheticSpec};
use toha_core::DEFAULT_N_MAX;

#[derive(Parser)]
#[command(
    name = "toha",
    version,
    about = "Attention-graph topological divergence and hallucination scoring"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    /// Normalized MTop-Div (prompt/response split)
    Mtop,
    /// MST length of the complete graph (ablation)
    Mst,
}

impl From<VariantArg> for ScoreVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Mtop => ScoreVariant::MtopDivNormalized,
            VariantArg::Mst => ScoreVariant::MstFullGraph,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Compute the per-(sample, layer, head) divergence cache.
    Divergence {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker count or "auto"; TOHA_THREADS overrides.
        #[arg(long)]
        threads: Option<String>,
        #[arg(long, value_enum, default_value = "mtop")]
        variant: VariantArg,
    },
    /// Rank heads on a labeled probe set and choose how many to average.
    Select {
        #[arg(long)]
        cache: PathBuf,
        /// Probe ids: a file with one id per line or a comma-separated list.
        #[arg(long, required_unless_present = "split", conflicts_with = "split")]
        probe: Option<String>,
        /// SEED:FRACTION. Draws a test set of FRACTION of the labeled samples
        /// and a probe set of --probe-size from the rest, writes both next to
        /// --out, then selects on the probe set.
        #[arg(long)]
        split: Option<String>,
        #[arg(long, default_value_t = 100)]
        probe_size: usize,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, default_value_t = DEFAULT_N_MAX)]
        n_max: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score test samples with the selected heads.
    Score {
        #[arg(long)]
        cache: PathBuf,
        #[arg(long)]
        selection: PathBuf,
        #[arg(long)]
        test: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// AUROC of a scores file against manifest labels.
    Eval {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-head deltas on two datasets, for scatter plots.
    Analyze {
        #[arg(long)]
        cache_a: PathBuf,
        #[arg(long)]
        cache_b: PathBuf,
        #[arg(long)]
        labels_a: PathBuf,
        #[arg(long)]
        labels_b: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic dataset with planted heads.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn json_bytes<T: serde::Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s.into_bytes()
}

/// Returns `true` when some samples failed.
fn run(command: Command) -> Result<bool> {
    match command {
        Command::Divergence {
            manifest,
            out,
            threads,
            variant,
        } => {
            let threads = pipeline::resolve_threads(threads.as_deref())?;
            let run = pipeline::run_divergence(&manifest, &out, variant.into(), threads)?;
            if !run.failures.is_empty() {
                eprintln!(
                    "{} sample(s) failed; see {}",
                    run.failures.len(),
                    pipeline::error_log_path(&out).display()
                );
            }
            Ok(!run.failures.is_empty())
        }
        Command::Select {
            cache,
            probe,
            split,
            probe_size,
            labels,
            n_max,
            seed,
            out,
        } => {
            let manifest = read_manifest_unchecked(&labels)?;
            let table = load_table(&cache, Some(&manifest))?;
            let (probe_ids, seed) = match (probe, split) {
                (Some(p), _) => (pipeline::parse_ids(&p)?, seed),
                (None, Some(s)) => {
                    let (split_seed, fraction) = pipeline::parse_split_arg(&s)?;
                    let labeled: Vec<String> = table
                        .sample_ids()
                        .iter()
                        .zip(table.labels())
                        .filter(|(_, l)| l.is_some())
                        .map(|(id, _)| id.clone())
                        .collect();
                    let (probe, test) =
                        pipeline::make_split(&labeled, split_seed, fraction, probe_size)?;
                    let dir = out
                        .parent()
                        .filter(|d| !d.as_os_str().is_empty())
                        .unwrap_or(Path::new("."));
                    write_atomic(
                        &dir.join("probe_ids.txt"),
                        pipeline::ids_to_text(&probe).as_bytes(),
                    )?;
                    write_atomic(
                        &dir.join("test_ids.txt"),
                        pipeline::ids_to_text(&test).as_bytes(),
                    )?;
                    (probe, split_seed)
                }
                (None, None) => unreachable!("clap requires --probe or --split"),
            };
            let digest = pipeline::sha256_hex(&read_file(&cache)?);
            let report = pipeline::select(&table, &probe_ids, n_max, seed, &digest)?;
            write_atomic(&out, report.to_json().as_bytes())?;
            Ok(false)
        }
        Command::Score {
            cache,
            selection,
            test,
            out,
        } => {
            let report: SelectionReport = serde_json::from_slice(&read_file(&selection)?)?;
            let test_ids = pipeline::parse_ids(&test)?;
            if let Some(id) = test_ids.iter().find(|id| report.probe_ids.contains(id)) {
                return Err(Error::Invalid(format!(
                    "test sample {id:?} is also a probe sample"
                )));
            }
            let table = load_table(&cache, None)?;
            let scores = pipeline::score(&table, &test_ids, &report)?;
            write_atomic(&out, &pipeline::scores_to_bytes(&scores)?)?;
            Ok(false)
        }
        Command::Eval {
            scores,
            labels,
            out,
        } => {
            let manifest = read_manifest_unchecked(&labels)?;
            let scores = pipeline::parse_scores(&read_file(&scores)?)?;
            let metrics = pipeline::evaluate(&scores, &manifest)?;
            write_atomic(&out, &json_bytes(&metrics))?;
            Ok(false)
        }
        Command::Analyze {
            cache_a,
            cache_b,
            labels_a,
            labels_b,
            out,
        } => {
            let a = load_table(&cache_a, Some(&read_manifest_unchecked(&labels_a)?))?;
            let b = load_table(&cache_b, Some(&read_manifest_unchecked(&labels_b)?))?;
            let rows = pipeline::analyze(&a, &b)?;
            write_atomic(&out, &pipeline::deltas_to_bytes(&rows)?)?;
            Ok(false)
        }
        Command::Synth { spec, out } => {
            let spec: SyntheticSpec = serde_json::from_slice(&read_file(&spec)?)?;
            SyntheticGenerator::new(spec)?.write(&out)?;
            Ok(false)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
