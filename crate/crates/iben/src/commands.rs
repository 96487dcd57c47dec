//! Subcommands. Results go to standard output or the named files; progress
//! and diagnostics go to standard error.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use iben_core::autodiff::{grad_check, GradCheckOptions, Tensor};
use iben_core::bertfuse::{pseudo_encode, LayerStack};
use iben_core::corpus::{grade_histogram, TokenSequence, PAD};
use iben_core::model::{IbenModel, ModelConfig, ModelInput};
use iben_core::train::{baseline_rmse, evaluate, mean_baseline, train_with, EvalReport};
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::checkpoint;
use crate::config::{FeatureSpec, RunConfig, VariantName};
use crate::dataset::parse_dataset;
use crate::error::{Error, Result};
use crate::hsfile::{read_hs_file, write_hs_file};
use crate::pipeline::{load_stoplist, record_tokens, Pipeline};

#[derive(Debug, Parser)]
#[command(name = "iben", version, about = "Headline funniness regression")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tokenize a dataset into a token file.
    Preprocess(PreprocessArgs),
    /// Histogram of mean grades.
    Stats(StatsArgs),
    /// Deterministic stand-in hidden states for a token file.
    PseudoEncode(PseudoEncodeArgs),
    /// Train a model from a run config.
    Train(TrainArgs),
    /// RMSE of a checkpoint on a dataset.
    Evaluate(EvalArgs),
    /// Predictions of a checkpoint on a dataset.
    Predict(EvalArgs),
    /// RMSE of always predicting the training mean.
    Baseline(BaselineArgs),
    /// Finite-difference check of the model gradients.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TokenFormat {
    Tsv,
    Jsonl,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "edited")]
    pub variant: VariantArg,
    /// Keep stopwords.
    #[arg(long)]
    pub no_stopwords: bool,
    /// Stopword list replacing the bundled one.
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
    #[arg(long, default_value_t = 40)]
    pub max_len: usize,
    #[arg(long, value_enum, default_value = "tsv")]
    pub format: TokenFormat,
    /// Output file, `-` for standard output.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Original,
    Edited,
}

impl From<VariantArg> for VariantName {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Original => VariantName::Original,
            VariantArg::Edited => VariantName::Edited,
        }
    }
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 0.2)]
    pub bin_width: f64,
}

#[derive(Debug, Args)]
pub struct PseudoEncodeArgs {
    #[arg(long)]
    pub tokens: PathBuf,
    #[arg(long, default_value_t = 24)]
    pub layers: usize,
    #[arg(long, default_value_t = 1024)]
    pub hidden: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Override a config key, e.g. `--set train.epochs=5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Hidden-state file for the records (encoder branch).
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Clamp predictions to [0, 3].
    #[arg(long)]
    pub clamp: bool,
    /// Predictions CSV; `predict` writes to standard output without it.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub eval: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Dims {
    Small,
    Default,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, value_enum, default_value = "small")]
    pub dims: Dims,
    #[arg(long, default_value_t = 1e-4)]
    pub threshold: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Coordinates checked per parameter; defaults to all for `small` and
    /// 3 for `default`.
    #[arg(long)]
    pub max_coords: Option<usize>,
}

pub fn run(cli: Cli) -> Result<()> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Preprocess(a) => preprocess(&a, &mut out),
        Command::Stats(a) => stats(&a, &mut out),
        Command::PseudoEncode(a) => pseudo_encode_cmd(&a),
        Command::Train(a) => train(&a, &mut out),
        Command::Evaluate(a) => evaluate_cmd(&a, false, &mut out),
        Command::Predict(a) => evaluate_cmd(&a, true, &mut out),
        Command::Baseline(a) => baseline(&a, &mut out),
        Command::Gradcheck(a) => gradcheck(&a, &mut out),
    }
}

fn out_err(e: io::Error) -> Error {
    Error::io("<output>", e)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn finish(w: &mut impl Write, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Serialize, Deserialize)]
struct TokenLine {
    id: String,
    tokens: Vec<String>,
}

pub fn preprocess(a: &PreprocessArgs, stdout: &mut dyn Write) -> Result<()> {
    let records = parse_dataset(&a.data)?;
    let mut spec = FeatureSpec::default();
    spec.preprocess.remove_stopwords = !a.no_stopwords;
    spec.preprocess.stopword_file = a.stopwords.clone();
    let stoplist = load_stoplist(&spec)?;
    let variant = VariantName::from(a.variant).into();
    let mut text = String::new();
    for rec in &records {
        let seq = record_tokens(rec, variant, stoplist.as_ref(), a.max_len)?;
        match a.format {
            TokenFormat::Tsv => {
                text.push_str(&rec.id);
                text.push('\t');
                text.push_str(&seq.tokens.join(" "));
            }
            TokenFormat::Jsonl => text.push_str(
                &serde_json::to_string(&TokenLine {
                    id: rec.id.clone(),
                    tokens: seq.tokens,
                })
                .expect("token line serializes"),
            ),
        }
        text.push('\n');
    }
    if a.out.as_os_str() == "-" {
        stdout.write_all(text.as_bytes()).map_err(out_err)
    } else {
        std::fs::write(&a.out, text).map_err(|e| Error::io(&a.out, e))
    }
}

/// Decimal places needed to print multiples of `w` exactly (at most 9).
fn decimals(w: f64) -> usize {
    (0..9)
        .find(|&d| {
            let s = w * 10f64.powi(d as i32);
            (s - s.round()).abs() < 1e-9 * s.abs().max(1.0)
        })
        .unwrap_or(9)
        .max(1)
}

pub fn stats(a: &StatsArgs, out: &mut dyn Write) -> Result<()> {
    let records = parse_dataset(&a.data)?;
    let means: Vec<f64> = records.iter().map(|r| r.mean_grade).collect();
    let hist = grade_histogram(&means, a.bin_width)?;
    let d = decimals(a.bin_width);
    let mut s = String::from("bin,count\n");
    for (lo, n) in &hist {
        s.push_str(&format!("{lo:.d$},{n}\n"));
    }
    s.push_str(&format!("total,{}\n", means.len()));
    out.write_all(s.as_bytes()).map_err(out_err)
}

/// Reads a token file (TSV or JSON lines, detected per line).
pub fn read_token_file(path: &Path) -> Result<Vec<(String, TokenSequence)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path.display().to_string();
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| Error::Format {
            source_name: name.clone(),
            line: i + 1,
            message,
        };
        let (id, tokens) = if line.trim_start().starts_with('{') {
            let t: TokenLine = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
            (t.id, t.tokens)
        } else {
            let (id, rest) = line
                .split_once('\t')
                .ok_or_else(|| bad("expected `id<TAB>tokens`".into()))?;
            (id.to_string(), rest.split(' ').filter(|t| !t.is_empty()).map(str::to_string).collect())
        };
        let effective_len = tokens.iter().position(|t| t == PAD).unwrap_or(tokens.len());
        if effective_len == 0 {
            return Err(bad(format!("record {id:?} has no tokens")));
        }
        out.push((id, TokenSequence { tokens, effective_len }));
    }
    Ok(out)
}

pub fn pseudo_encode_cmd(a: &PseudoEncodeArgs) -> Result<()> {
    if a.layers == 0 || a.hidden == 0 {
        return Err(Error::Check("--layers and --hidden must be positive".into()));
    }
    let seqs = read_token_file(&a.tokens)?;
    let mut stacks: Vec<LayerStack> = Vec::with_capacity(seqs.len());
    for (id, seq) in seqs {
        let mut s = pseudo_encode(&seq, a.layers, a.hidden, a.seed)?;
        s.id = id;
        stacks.push(s);
    }
    write_hs_file(&a.out, &stacks)?;
    eprintln!("wrote {} records to {}", stacks.len(), a.out.display());
    Ok(())
}

fn read_stacks(cfg_branch_bert: bool, path: Option<&PathBuf>) -> Result<Option<(Vec<LayerStack>, String)>> {
    if !cfg_branch_bert {
        return Ok(None);
    }
    let p = path.ok_or_else(|| Error::Config("the encoder branch needs a hidden-state file".into()))?;
    Ok(Some((read_hs_file(p)?, p.display().to_string())))
}

pub fn history_csv(history: &iben_core::train::History) -> String {
    let mut s = String::from("epoch,train_loss,dev_rmse\n");
    for e in &history.epochs {
        let dev = e.dev_rmse.map(|v| v.to_string()).unwrap_or_default();
        s.push_str(&format!("{},{},{}\n", e.epoch, e.train_loss, dev));
    }
    s
}

pub fn predictions_csv(report: &EvalReport) -> String {
    let mut s = String::from("id,y,y_hat\n");
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    for p in &report.predictions {
        w.write_record([p.id.as_str(), &p.target.to_string(), &p.predicted.to_string()])
            .expect("in-memory csv");
    }
    s.push_str(std::str::from_utf8(&w.into_inner().expect("in-memory csv")).expect("utf-8 csv"));
    s
}

pub fn train(a: &TrainArgs, out: &mut dyn Write) -> Result<()> {
    let mut overrides = a.overrides.clone();
    if let Some(s) = a.seed {
        overrides.push(format!("seed={s}"));
    }
    if let Some(e) = a.epochs {
        overrides.push(format!("train.epochs={e}"));
    }
    let mut cfg = RunConfig::load(&a.config, &overrides)?;
    if let Some(d) = &a.out_dir {
        cfg.output_dir = d.clone();
    }
    let train_path = cfg
        .data
        .train
        .clone()
        .ok_or_else(|| Error::Config("data.train is required for training".into()))?;
    let records = parse_dataset(&train_path)?;
    if records.is_empty() {
        return Err(Error::Check(format!("{} has no records", train_path.display())));
    }
    let dev_records = match &cfg.data.dev {
        Some(p) => parse_dataset(p)?,
        None => Vec::new(),
    };
    let bert = cfg.branches().bert();
    let stacks = read_stacks(bert, cfg.data.features.as_ref())?;
    let dev_stacks = if dev_records.is_empty() {
        None
    } else {
        read_stacks(bert, cfg.data.dev_features.as_ref().or(cfg.data.features.as_ref()))?
    };

    let spec = cfg.features();
    let pipeline = Pipeline::new(&spec, cfg.branches(), &[&records, &dev_records])?;
    let samples = pipeline.samples(&records, stacks.as_ref().map(|(s, n)| (s.as_slice(), n.as_str())))?;
    let dev = pipeline.samples(&dev_records, dev_stacks.as_ref().map(|(s, n)| (s.as_slice(), n.as_str())))?;
    let fused_shape = samples[0].input.fused.as_ref().map(|t| (t.shape()[0], t.shape()[1]));
    let model_cfg = pipeline.model_config(&cfg.model, fused_shape)?;
    let mut model = IbenModel::new(model_cfg, cfg.seed)?;
    eprintln!(
        "training on {} records ({} dev), {} parameters",
        samples.len(),
        dev.len(),
        model.params().num_values()
    );
    let history = train_with(
        &mut model,
        &samples,
        if dev.is_empty() { None } else { Some(&dev) },
        &cfg.train_config(),
        |e| match e.dev_rmse {
            Some(d) => eprintln!("epoch {:>3}  loss {:.6}  dev rmse {:.6}", e.epoch, e.train_loss, d),
            None => eprintln!("epoch {:>3}  loss {:.6}", e.epoch, e.train_loss),
        },
    )?;

    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let ckpt = dir.join("checkpoint.bin");
    checkpoint::save(&ckpt, &model, cfg.seed, Some(&spec))?;
    let hist = dir.join("history.csv");
    std::fs::write(&hist, history_csv(&history)).map_err(|e| Error::io(&hist, e))?;
    let echo = dir.join("config.resolved.json");
    std::fs::write(&echo, cfg.to_json()).map_err(|e| Error::io(&echo, e))?;
    writeln!(out, "checkpoint,{}\nhistory,{}\nconfig,{}", ckpt.display(), hist.display(), echo.display())
        .map_err(out_err)
}

pub fn evaluate_cmd(a: &EvalArgs, predict_only: bool, out: &mut dyn Write) -> Result<()> {
    let ck = checkpoint::load(&a.checkpoint)?;
    let spec = ck
        .features
        .clone()
        .ok_or_else(|| Error::Config("checkpoint carries no feature settings".into()))?;
    let records = parse_dataset(&a.data)?;
    let branches = ck.model.config().branches;
    let pipeline = Pipeline::new(&spec, branches, &[&records])?;
    let stacks = read_stacks(branches.bert(), a.features.as_ref())?;
    let samples = pipeline.samples(&records, stacks.as_ref().map(|(s, n)| (s.as_slice(), n.as_str())))?;
    if samples.is_empty() {
        return Err(Error::Check(format!("{} has no records", a.data.display())));
    }
    let report = evaluate(&ck.model, &samples, a.clamp)?;
    let csv = predictions_csv(&report);
    match &a.out {
        Some(p) => {
            let mut w = create(p)?;
            w.write_all(csv.as_bytes()).map_err(|e| Error::io(p, e))?;
            finish(&mut w, p)?;
        }
        None if predict_only => out.write_all(csv.as_bytes()).map_err(out_err)?,
        None => {}
    }
    if !predict_only {
        writeln!(out, "rmse,{}\nn,{}", report.rmse, report.n).map_err(out_err)?;
    }
    Ok(())
}

pub fn baseline(a: &BaselineArgs, out: &mut dyn Write) -> Result<()> {
    let train: Vec<f64> = parse_dataset(&a.train)?.iter().map(|r| r.mean_grade).collect();
    let eval: Vec<f64> = parse_dataset(&a.eval)?.iter().map(|r| r.mean_grade).collect();
    let mean = mean_baseline(&train)?.mean;
    let rmse = baseline_rmse(&train, &eval)?;
    writeln!(out, "mean,{mean}\nrmse,{rmse}\nn,{}", eval.len()).map_err(out_err)
}

fn gradcheck_setup(dims: Dims) -> (ModelConfig, usize) {
    match dims {
        Dims::Small => (
            ModelConfig {
                bert_input_dim: 8,
                n_pairs: 2,
                emb_input_dim: 4,
                gru_hidden: 3,
                dense_width: 4,
                filters_per_kernel: 2,
                ..ModelConfig::default()
            },
            5,
        ),
        Dims::Default => (ModelConfig::default(), 40),
    }
}

pub fn gradcheck(a: &GradcheckArgs, out: &mut dyn Write) -> Result<()> {
    let (cfg, seq_len) = gradcheck_setup(a.dims);
    let mut model = IbenModel::new(cfg.clone(), a.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed ^ 0x9e37_79b9_7f4a_7c15);
    let dist = Uniform::new(-0.5, 0.5);
    // random values everywhere, so biases and gates are exercised away from zero
    for p in model.params_mut().iter_mut() {
        p.value.data_mut().iter_mut().for_each(|v| *v = dist.sample(&mut rng));
    }
    let mut tensor = |shape: [usize; 2]| {
        Tensor::new(shape.to_vec(), (0..shape[0] * shape[1]).map(|_| 2.0 * dist.sample(&mut rng)).collect())
    };
    let input = ModelInput {
        fused: Some(tensor([cfg.n_pairs, cfg.bert_input_dim])?),
        emb: Some(tensor([seq_len, cfg.emb_input_dim])?),
    };
    let max_coords = a.max_coords.or(match a.dims {
        Dims::Small => None,
        Dims::Default => Some(3),
    });
    let opts = GradCheckOptions {
        max_coords,
        seed: a.seed,
        ..GradCheckOptions::default()
    };
    let structure = model.clone();
    let report = grad_check(model.params_mut(), opts, |tape, b| {
        let pred = structure.forward_on_tape(tape, b, &input)?;
        let y = tape.constant(Tensor::scalar(1.3));
        tape.mse_loss(pred, y)
    })?;
    let mut s = String::from("param,checked,max_rel_error\n");
    for p in &report.params {
        s.push_str(&format!("{},{},{:e}\n", p.name, p.checked, p.max_rel_error));
    }
    s.push_str(&format!("max,,{:e}\n", report.max_rel_error));
    out.write_all(s.as_bytes()).map_err(out_err)?;
    if report.max_rel_error > a.threshold {
        return Err(Error::Check(format!(
            "max relative error {:e} exceeds {:e}",
            report.max_rel_error, a.threshold
        )));
    }
    Ok(())
}
