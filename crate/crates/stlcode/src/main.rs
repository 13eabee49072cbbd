//! `stlcode` — sparse-coding toolkit CLI.
//!
//! One subcommand per pipeline stage (`synth`, `train-dict`, `encode`,
//! `predict`, `eval`) plus `train`, which runs the whole self-taught path:
//! dictionary from unlabeled data, sparse features for the labeled data,
//! then the neural classifier. Options resolve as flag > config file >
//! default, and every artifact records the resolved configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;

use stlcode::config::{ConfigFile, RunConfig};
use stlcode::dataset::{self, ParsedDataset};
use stlcode::dict::LearnParams;
use stlcode::error::{Error, Result};
use stlcode::irls::EncodeConfig;
use stlcode::metrics;
use stlcode::model_io::{self, Artifact};
use stlcode::pipeline::{self, PipelineConfig, UnlabeledDataset};
use stlcode::synth::{self, SynthParams};
use stlcode::threads;
use stlcode::Family;

#[derive(Parser)]
#[command(
    name = "stlcode",
    version,
    about = "Sparse coding for exponential-family data: dictionary learning and self-taught classification",
    after_help = "Exit codes: 0 success, 2 input error, 3 numerical failure.\n\
                  STLCODE_THREADS caps row-encoding parallelism (0 or absent = serial)."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic benchmark with a known ground-truth dictionary
    Synth(SynthCmd),
    /// Learn a dictionary from an unlabeled CSV
    TrainDict(TrainDictCmd),
    /// Encode a CSV into sparse features against a saved dictionary or model
    Encode(EncodeCmd),
    /// Full pipeline: dictionary, labeled features, PCA (optional), classifier
    Train(TrainCmd),
    /// Predict labels and class probabilities for a CSV
    Predict(PredictCmd),
    /// Evaluate a model on a labeled CSV
    Eval(EvalCmd),
}

#[derive(Args)]
struct CommonOpts {
    /// RNG seed
    #[arg(long)]
    seed: Option<u64>,
    /// Config file with `key = value` lines (flags take precedence)
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SynthCmd {
    #[command(flatten)]
    common: CommonOpts,
    /// Observation dimension k
    #[arg(long)]
    dim: Option<usize>,
    /// Number of ground-truth atoms
    #[arg(long)]
    basis: Option<usize>,
    /// Number of examples
    #[arg(long)]
    examples: Option<usize>,
    /// Nonzero activations per example
    #[arg(long)]
    sparsity: Option<usize>,
    /// Observation family: gaussian | bernoulli | poisson
    #[arg(long)]
    family: Option<String>,
    /// Emit exact means instead of sampled observations (gaussian only)
    #[arg(long)]
    noiseless: bool,
    /// Output directory for X.csv, B_true.csv, S_true.csv, manifest.txt
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainDictCmd {
    #[command(flatten)]
    common: CommonOpts,
    /// Unlabeled input CSV
    #[arg(long)]
    data: PathBuf,
    /// Skip the first CSV line
    #[arg(long)]
    has_header: bool,
    #[arg(long)]
    beta: Option<f64>,
    /// Per-example encoding stop threshold
    #[arg(long)]
    epsilon: Option<f64>,
    /// Number of basis vectors
    #[arg(long)]
    basis: Option<usize>,
    /// Squared-norm bound C on each basis vector
    #[arg(long)]
    norm_bound: Option<f64>,
    #[arg(long)]
    family: Option<String>,
    /// Maximum alternation sweeps
    #[arg(long)]
    sweeps: Option<usize>,
    /// Relative objective decrease that ends the alternation
    #[arg(long)]
    sweep_tol: Option<f64>,
    /// Output dictionary file
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EncodeCmd {
    #[command(flatten)]
    common: CommonOpts,
    /// Dictionary or model file
    #[arg(long)]
    model: PathBuf,
    /// Input CSV to encode
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    has_header: bool,
    /// Encoding penalty (defaults to the artifact's value)
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Output features CSV
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainCmd {
    #[command(flatten)]
    common: CommonOpts,
    /// Unlabeled CSV for dictionary learning
    #[arg(long)]
    unlabeled: PathBuf,
    /// Labeled CSV for classifier training
    #[arg(long)]
    labeled: PathBuf,
    /// 1-based label column in the labeled CSV
    #[arg(long)]
    label_column: usize,
    /// Skip the first line of both CSVs
    #[arg(long)]
    has_header: bool,
    #[arg(long)]
    beta: Option<f64>,
    /// Encoding penalty override for labeled features
    #[arg(long)]
    encode_beta: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    basis: Option<usize>,
    #[arg(long)]
    norm_bound: Option<f64>,
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    sweeps: Option<usize>,
    #[arg(long)]
    sweep_tol: Option<f64>,
    /// Hidden-layer width
    #[arg(long)]
    hidden: Option<usize>,
    /// PCA components to keep, or `off`
    #[arg(long)]
    pca: Option<String>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    init_scale: Option<f64>,
    #[arg(long)]
    l2_decay: Option<f64>,
    /// Output model file
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictCmd {
    #[command(flatten)]
    common: CommonOpts,
    /// Model file
    #[arg(long)]
    model: PathBuf,
    /// Input CSV
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    has_header: bool,
    /// Output CSV: label,p1,...,pC per row
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalCmd {
    #[command(flatten)]
    common: CommonOpts,
    /// Model file
    #[arg(long)]
    model: PathBuf,
    /// Labeled CSV
    #[arg(long)]
    data: PathBuf,
    /// 1-based label column
    #[arg(long)]
    label_column: usize,
    #[arg(long)]
    has_header: bool,
    /// Machine-readable JSON report path (optional)
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(cmd) => run_synth(cmd),
        Command::TrainDict(cmd) => run_train_dict(cmd),
        Command::Encode(cmd) => run_encode(cmd),
        Command::Train(cmd) => run_train(cmd),
        Command::Predict(cmd) => run_predict(cmd),
        Command::Eval(cmd) => run_eval(cmd),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn load_config_file(path: &Option<PathBuf>) -> Result<ConfigFile> {
    match path {
        Some(p) => ConfigFile::load(p),
        None => Ok(ConfigFile::empty()),
    }
}

fn resolve_family(rc: &mut RunConfig, flag: Option<String>, file: &ConfigFile) -> Result<Family> {
    let name = rc.resolve("family", flag, file, "gaussian".to_string())?;
    name.parse()
}

fn parse_pca(value: &str) -> Result<Option<usize>> {
    if value == "off" {
        return Ok(None);
    }
    value
        .parse::<usize>()
        .map(Some)
        .map_err(|_| Error::invalid(format!("--pca expects a component count or 'off', got '{value}'")))
}

fn require_unlabeled(parsed: ParsedDataset, path: &Path) -> Result<DMatrix<f64>> {
    match parsed {
        ParsedDataset::Unlabeled(x) => {
            println!("loaded {}x{} from {}", x.nrows(), x.ncols(), path.display());
            Ok(x)
        }
        ParsedDataset::Labeled(_) => Err(Error::invalid("expected an unlabeled dataset")),
    }
}

fn run_synth(cmd: SynthCmd) -> Result<()> {
    let file = load_config_file(&cmd.common.config)?;
    let mut rc = RunConfig::new();
    let params = SynthParams {
        seed: rc.resolve("seed", cmd.common.seed, &file, 0)?,
        obs_dim: rc.resolve("dim", cmd.dim, &file, 16)?,
        n_basis: rc.resolve("basis", cmd.basis, &file, 8)?,
        examples: rc.resolve("examples", cmd.examples, &file, 200)?,
        sparsity: rc.resolve("sparsity", cmd.sparsity, &file, 2)?,
        family: resolve_family(&mut rc, cmd.family, &file)?,
        noiseless: cmd.noiseless,
    };
    rc.record("noiseless", cmd.noiseless);
    rc.record("command", "synth");
    rc.record("out", cmd.out.display());

    let data = synth::synth_generate(&params)?;
    std::fs::create_dir_all(&cmd.out)?;
    dataset::write_matrix_csv(&cmd.out.join("X.csv"), &data.x)?;
    dataset::write_matrix_csv(&cmd.out.join("B_true.csv"), &data.basis_true)?;
    dataset::write_matrix_csv(&cmd.out.join("S_true.csv"), &data.codes_true)?;
    model_io::atomic_write(&cmd.out.join("manifest.txt"), &rc.manifest())?;
    println!(
        "wrote {} examples of dimension {} ({} atoms, sparsity {}) to {}",
        params.examples,
        params.obs_dim,
        params.n_basis,
        params.sparsity,
        cmd.out.display()
    );
    Ok(())
}

fn run_train_dict(cmd: TrainDictCmd) -> Result<()> {
    let file = load_config_file(&cmd.common.config)?;
    let mut rc = RunConfig::new();
    let params = LearnParams {
        n_basis: rc.resolve("basis", cmd.basis, &file, 8)?,
        beta: rc.resolve("beta", cmd.beta, &file, 0.1)?,
        norm_bound: rc.resolve("norm-bound", cmd.norm_bound, &file, 1.0)?,
        family: resolve_family(&mut rc, cmd.family, &file)?,
        sweeps: rc.resolve("sweeps", cmd.sweeps, &file, 50)?,
        seed: rc.resolve("seed", cmd.common.seed, &file, 0)?,
        tol: rc.resolve("sweep-tol", cmd.sweep_tol, &file, 1e-5)?,
        encode_epsilon: rc.resolve("epsilon", cmd.epsilon, &file, 1e-6)?,
    };
    rc.record("command", "train-dict");
    rc.record("data", cmd.data.display());
    rc.record("has-header", cmd.has_header);
    rc.record("out", cmd.out.display());

    let x = require_unlabeled(
        dataset::parse_dataset(&cmd.data, cmd.has_header, None)?,
        &cmd.data,
    )?;
    let unlabeled = UnlabeledDataset::new(x, params.family)?;
    let (dictionary, _) = stlcode::dict::learn_dictionary(&unlabeled.x, &params)?;
    model_io::save_dictionary(&dictionary, &cmd.out, &rc.entries())?;
    println!(
        "learned {} atoms over dimension {} in {} sweeps (objective {}); saved to {}",
        dictionary.n_basis(),
        dictionary.input_dim(),
        dictionary.meta.iterations,
        dictionary.meta.final_objective,
        cmd.out.display()
    );
    Ok(())
}

fn run_encode(cmd: EncodeCmd) -> Result<()> {
    let file = load_config_file(&cmd.common.config)?;
    let mut rc = RunConfig::new();
    let artifact = model_io::load_artifact(&cmd.model)?;
    let dictionary = artifact.dictionary();

    let default_beta = match &artifact {
        Artifact::Model(m) => m.config.effective_encode_beta(),
        Artifact::Dictionary(d) => d.beta,
    };
    let default_epsilon = match &artifact {
        Artifact::Model(m) => m.config.epsilon,
        Artifact::Dictionary(_) => 1e-6,
    };
    let beta = rc.resolve("beta", cmd.beta, &file, default_beta)?;
    let epsilon = rc.resolve("epsilon", cmd.epsilon, &file, default_epsilon)?;
    rc.record("command", "encode");
    rc.record("model", cmd.model.display());
    rc.record("data", cmd.data.display());
    rc.record("has-header", cmd.has_header);
    rc.record("out", cmd.out.display());

    let x = require_unlabeled(
        dataset::parse_dataset(&cmd.data, cmd.has_header, None)?,
        &cmd.data,
    )?;
    let config = EncodeConfig {
        beta,
        epsilon,
        ..EncodeConfig::default()
    };
    let features =
        pipeline::encode_features_opts(dictionary, &x, &config, threads::row_encode_threads())?;
    dataset::write_matrix_csv(&cmd.out, &features)?;
    write_sidecar_manifest(&cmd.out, &rc)?;
    println!(
        "encoded {} rows into {} features each; saved to {}",
        features.nrows(),
        features.ncols(),
        cmd.out.display()
    );
    Ok(())
}

fn run_train(cmd: TrainCmd) -> Result<()> {
    let file = load_config_file(&cmd.common.config)?;
    let mut rc = RunConfig::new();

    let pca = parse_pca(&rc.resolve("pca", cmd.pca, &file, "off".to_string())?)?;
    let encode_beta = match cmd.encode_beta {
        Some(v) => Some(v),
        None => match file.get("encode-beta") {
            Some(raw) => Some(raw.parse::<f64>().map_err(|_| {
                Error::invalid(format!("config key 'encode-beta': bad value '{raw}'"))
            })?),
            None => None,
        },
    };
    if let Some(v) = encode_beta {
        rc.record("encode-beta", v);
    }

    let config = PipelineConfig {
        family: resolve_family(&mut rc, cmd.family, &file)?,
        seed: rc.resolve("seed", cmd.common.seed, &file, 0)?,
        n_basis: rc.resolve("basis", cmd.basis, &file, 8)?,
        beta: rc.resolve("beta", cmd.beta, &file, 0.1)?,
        encode_beta,
        epsilon: rc.resolve("epsilon", cmd.epsilon, &file, 1e-6)?,
        norm_bound: rc.resolve("norm-bound", cmd.norm_bound, &file, 1.0)?,
        sweeps: rc.resolve("sweeps", cmd.sweeps, &file, 50)?,
        dict_tol: rc.resolve("sweep-tol", cmd.sweep_tol, &file, 1e-5)?,
        pca,
        hidden: rc.resolve("hidden", cmd.hidden, &file, 32)?,
        learning_rate: rc.resolve("learning-rate", cmd.learning_rate, &file, 0.5)?,
        epochs: rc.resolve("epochs", cmd.epochs, &file, 200)?,
        batch_size: rc.resolve("batch-size", cmd.batch_size, &file, 32)?,
        init_scale: rc.resolve("init-scale", cmd.init_scale, &file, 0.1)?,
        l2_decay: rc.resolve("l2-decay", cmd.l2_decay, &file, 0.0)?,
    };
    rc.record("command", "train");
    rc.record("unlabeled", cmd.unlabeled.display());
    rc.record("labeled", cmd.labeled.display());
    rc.record("label-column", cmd.label_column);
    rc.record("has-header", cmd.has_header);
    rc.record("out", cmd.out.display());

    let xu = require_unlabeled(
        dataset::parse_dataset(&cmd.unlabeled, cmd.has_header, None)?,
        &cmd.unlabeled,
    )?;
    let unlabeled = UnlabeledDataset::new(xu, config.family)?;
    let labeled = match dataset::parse_dataset(&cmd.labeled, cmd.has_header, Some(cmd.label_column))? {
        ParsedDataset::Labeled(d) => {
            println!(
                "loaded {}x{} labeled rows ({} classes) from {}",
                d.x.nrows(),
                d.x.ncols(),
                d.num_classes,
                cmd.labeled.display()
            );
            d
        }
        ParsedDataset::Unlabeled(_) => unreachable!("label column was requested"),
    };

    let model = pipeline::self_taught_train(&unlabeled, &labeled, &config)?;
    model_io::save_model(&model, &cmd.out, &rc.entries())?;

    let report = metrics::run_eval(&model, &labeled)?;
    println!(
        "trained: {} atoms, {} classes, training accuracy {:.4}; saved to {}",
        model.dictionary.n_basis(),
        model.num_classes(),
        report.accuracy,
        cmd.out.display()
    );
    Ok(())
}

fn run_predict(cmd: PredictCmd) -> Result<()> {
    let file = load_config_file(&cmd.common.config)?;
    let mut rc = RunConfig::new();
    // recorded for the manifest even though prediction draws nothing
    let _ = rc.resolve("seed", cmd.common.seed, &file, 0)?;
    rc.record("command", "predict");
    rc.record("model", cmd.model.display());
    rc.record("data", cmd.data.display());
    rc.record("has-header", cmd.has_header);
    rc.record("out", cmd.out.display());

    let model = model_io::load_model(&cmd.model)?;
    let x = require_unlabeled(
        dataset::parse_dataset(&cmd.data, cmd.has_header, None)?,
        &cmd.data,
    )?;

    let c = model.num_classes();
    let mut out = DMatrix::zeros(x.nrows(), 1 + c);
    for i in 0..x.nrows() {
        let (label, probs) = pipeline::predict(&model, &x.row(i).transpose())?;
        out[(i, 0)] = label as f64;
        for j in 0..c {
            out[(i, 1 + j)] = probs[j];
        }
    }
    dataset::write_matrix_csv(&cmd.out, &out)?;
    write_sidecar_manifest(&cmd.out, &rc)?;
    println!(
        "predicted {} rows over {} classes; saved to {}",
        x.nrows(),
        c,
        cmd.out.display()
    );
    Ok(())
}

fn run_eval(cmd: EvalCmd) -> Result<()> {
    let file = load_config_file(&cmd.common.config)?;
    let mut rc = RunConfig::new();
    let _ = rc.resolve("seed", cmd.common.seed, &file, 0)?;
    rc.record("command", "eval");
    rc.record("model", cmd.model.display());
    rc.record("data", cmd.data.display());
    rc.record("label-column", cmd.label_column);
    rc.record("has-header", cmd.has_header);

    let model = model_io::load_model(&cmd.model)?;
    let labeled = match dataset::parse_dataset(&cmd.data, cmd.has_header, Some(cmd.label_column))? {
        ParsedDataset::Labeled(d) => d,
        ParsedDataset::Unlabeled(_) => unreachable!("label column was requested"),
    };
    let report = metrics::run_eval(&model, &labeled)?;
    print!("{}", report.human_table());

    if let Some(out) = &cmd.out {
        rc.record("out", out.display());
        let config: BTreeMap<String, String> = rc.entries().into_iter().collect();
        let artifact = serde_json::json!({
            "config": config,
            "report": report,
        });
        model_io::atomic_write(out, &format!("{:#}\n", artifact))?;
        println!("report written to {}", out.display());
    }
    Ok(())
}

/// CSV outputs cannot carry the configuration inline, so it rides in a
/// sibling `<name>.manifest` file.
fn write_sidecar_manifest(out: &Path, rc: &RunConfig) -> Result<()> {
    let mut manifest = out.as_os_str().to_owned();
    manifest.push(".manifest");
    model_io::atomic_write(&PathBuf::from(manifest), &rc.manifest())
}
