//! `qmt`: corpus generation, parsing, circuit compilation, simulation,
//! entropy matching and seq2seq training from the command line.
//!
//! Every subcommand writes its artifacts plus a `manifest.json` into `--out`.

mod manifest;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use qmt_core::circuit::{bind, init_params, BoundCircuit, ParamRegistry};
use qmt_core::corpus::{compile_text, default_lexicon, diagram_text, gen_corpus, Corpus, CorpusError};
use qmt_core::diagram::wire_report;
use qmt_core::encode::{bind_corpus, build_dataset, Dataset, EncodeError};
use qmt_core::entropy::{heatmap_export, run_matching_experiment, CircuitPair, EntropyError, ExperimentConfig, OffsetMode};
use qmt_core::grammar::{assign_text, reduce, GrammarError, Lexicon};
use qmt_core::seq2seq::{
    train, translate, translate_tokens, Checkpoint, Example, Model, ModelConfig, Optimizer, OptimizerConfig, OptimizerKind,
    TargetMeta, TrainConfig, TrainHistory, Variant,
};
use qmt_core::sim::{exact_distribution, postselect, sample};

use manifest::Manifest;

#[derive(Parser)]
#[command(name = "qmt", version, about = "Quantum-circuit sentence encodings and their translation")]
struct Cli {
    /// Directory for outputs and the run manifest.
    #[arg(long, global = true, default_value = "qmt-out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded parallel corpus from the lexicon templates.
    GenCorpus(GenCorpusArgs),
    /// Assign types and print the reduction of one sentence.
    Parse(SentenceArgs),
    /// Lay out the string diagram of one sentence.
    Diagram(SentenceArgs),
    /// Compile one sentence to a parameterized and a bound circuit.
    Compile(CompileArgs),
    /// Measurement distribution of a bound circuit file.
    Simulate(SimulateArgs),
    /// Entropy of every corpus sentence.
    Entropy(ExperimentArgs),
    /// Entropy match matrix between the two languages of a corpus.
    Match(MatchArgs),
    /// Encode and tokenize a corpus into a training dataset.
    Encode(EncodeArgs),
    /// Train a seq2seq model on a dataset.
    Train(TrainArgs),
    /// Translate a source circuit with a trained model.
    Translate(TranslateArgs),
    /// Markdown summary of earlier runs.
    Report(ReportArgs),
}

#[derive(Args, Serialize)]
struct LexiconArg {
    /// Lexicon JSON; the bundled lexicon when omitted.
    #[arg(long)]
    lexicon: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct GenCorpusArgs {
    #[arg(long, default_value_t = 80)]
    pairs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    lexicon: LexiconArg,
}

#[derive(Args, Serialize)]
struct SentenceArgs {
    text: String,
    #[arg(long, default_value = "en")]
    lang: String,
    #[command(flatten)]
    lexicon: LexiconArg,
}

#[derive(Args, Serialize)]
struct ParamArgs {
    #[arg(long, default_value_t = 2)]
    layers: usize,
    /// Seed for fresh parameter values.
    #[arg(long, default_value_t = 0)]
    param_seed: u64,
    /// Existing parameter registry; overrides `--param-seed`.
    #[arg(long)]
    registry: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct CompileArgs {
    #[command(flatten)]
    sentence: SentenceArgs,
    #[command(flatten)]
    params: ParamArgs,
}

#[derive(Args, Serialize)]
struct SimulateArgs {
    /// Bound circuit JSON, as written by `compile` or `translate`.
    circuit: PathBuf,
    /// Shot count; exact probabilities when omitted.
    #[arg(long)]
    shots: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Condition on the circuit's post-selected qubits reading 0.
    #[arg(long)]
    postselect: bool,
}

#[derive(Args, Serialize)]
struct ExperimentArgs {
    /// Corpus TSV; generated with `--pairs` and `--corpus-seed` when omitted.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pairs: usize,
    #[arg(long, default_value_t = 0)]
    corpus_seed: u64,
    #[command(flatten)]
    lexicon: LexiconArg,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long)]
    shots: Option<u64>,
    /// Sampling seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Permute each source circuit's angles before measuring.
    #[arg(long)]
    swapped: bool,
    #[arg(long, default_value_t = 0)]
    swap_seed: u64,
}

#[derive(Args, Serialize)]
struct MatchArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    /// Fixed entropy offset subtracted from every difference.
    #[arg(long, conflicts_with = "calibrate")]
    offset: Option<f64>,
    /// Use the median paired gap as the offset.
    #[arg(long)]
    calibrate: bool,
}

#[derive(Args, Serialize)]
struct EncodeArgs {
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long, default_value_t = 80)]
    pairs: usize,
    #[arg(long, default_value_t = 0)]
    corpus_seed: u64,
    #[command(flatten)]
    lexicon: LexiconArg,
    #[command(flatten)]
    params: ParamArgs,
    /// Angle bins per full turn.
    #[arg(long, default_value_t = 32)]
    bins: usize,
}

#[derive(Args, Serialize)]
struct TrainArgs {
    /// Dataset JSONL written by `encode`.
    dataset: PathBuf,
    #[arg(long, default_value = "m3")]
    variant: String,
    #[arg(long, default_value = "adam")]
    optimizer: String,
    /// Learning rate; the optimizer default when omitted.
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    epochs: usize,
    #[arg(long, default_value_t = 16)]
    batch_size: usize,
    #[arg(long, default_value_t = 0.2)]
    val_split: f64,
    /// Drives initialization, the split and shuffling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    clip: Option<f64>,
}

#[derive(Args, Serialize)]
struct TranslateArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Dataset the model was trained on.
    #[arg(long)]
    dataset: PathBuf,
    /// Translate this dataset record.
    #[arg(long, conflicts_with = "text")]
    id: Option<String>,
    /// Translate a new source sentence instead; needs `--registry`.
    #[arg(long)]
    text: Option<String>,
    #[arg(long, default_value = "en")]
    lang: String,
    #[arg(long)]
    registry: Option<PathBuf>,
    /// Target language whose lexicon types fix the cups.
    #[arg(long, default_value = "fa")]
    target_lang: String,
    #[command(flatten)]
    lexicon: LexiconArg,
}

#[derive(Args, Serialize)]
struct ReportArgs {
    /// Run directories to summarize.
    #[arg(required = true)]
    runs: Vec<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    let mut m = Manifest::new(&cli.out)?;
    match &cli.command {
        Command::GenCorpus(a) => gen_corpus_cmd(&mut m, a),
        Command::Parse(a) => parse_cmd(&mut m, a),
        Command::Diagram(a) => diagram_cmd(&mut m, a),
        Command::Compile(a) => compile_cmd(&mut m, a),
        Command::Simulate(a) => simulate_cmd(&mut m, a),
        Command::Entropy(a) => entropy_cmd(&mut m, a),
        Command::Match(a) => match_cmd(&mut m, a),
        Command::Encode(a) => encode_cmd(&mut m, a),
        Command::Train(a) => train_cmd(&mut m, a),
        Command::Translate(a) => translate_cmd(&mut m, a),
        Command::Report(a) => report_cmd(&mut m, a),
    }
}

/// 2 for sentences outside the grammar, 3 for capacity and precondition
/// failures, 4 for I/O.
fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.is::<std::io::Error>() || cause.is::<serde_json::Error>() {
            return 4;
        }
        let grammar = cause
            .downcast_ref::<GrammarError>()
            .or_else(|| match cause.downcast_ref() {
                Some(CorpusError::Grammar(g)) => Some(g),
                _ => None,
            })
            .or_else(|| match cause.downcast_ref() {
                Some(EncodeError::Corpus(CorpusError::Grammar(g))) => Some(g),
                _ => None,
            });
        if let Some(g) = grammar {
            return match g {
                GrammarError::InvalidLexicon(_) => 3,
                _ => 2,
            };
        }
        if let Some(EntropyError::Io { .. }) = cause.downcast_ref() {
            return 4;
        }
    }
    3
}

fn read(m: &mut Manifest, path: &Path) -> Result<String> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    m.input(path, text.as_bytes());
    Ok(text)
}

fn load_lexicon(m: &mut Manifest, a: &LexiconArg) -> Result<Lexicon> {
    match &a.lexicon {
        Some(p) => Ok(Lexicon::from_json(&read(m, p)?)?),
        None => Ok(default_lexicon()),
    }
}

fn load_registry(m: &mut Manifest, a: &ParamArgs, lex: &Lexicon) -> Result<ParamRegistry> {
    if a.layers == 0 {
        bail!("--layers must be at least 1");
    }
    match &a.registry {
        Some(p) => Ok(ParamRegistry::from_json(&read(m, p)?)?),
        None => Ok(init_params(lex, a.layers, a.param_seed)),
    }
}

fn load_corpus(m: &mut Manifest, path: &Option<PathBuf>, pairs: usize, seed: u64, lex: &Lexicon) -> Result<Corpus> {
    match path {
        Some(p) => Ok(Corpus::from_tsv(&read(m, p)?)?),
        None => Ok(gen_corpus(lex, pairs, seed)?),
    }
}

fn gen_corpus_cmd(m: &mut Manifest, a: &GenCorpusArgs) -> Result<()> {
    m.config(a);
    let lex = load_lexicon(m, &a.lexicon)?;
    let corpus = gen_corpus(&lex, a.pairs, a.seed)?;
    m.write("corpus.tsv", corpus.to_tsv())?;
    println!("{} pairs", corpus.pairs.len());
    m.finish("gen-corpus")
}

fn parse_cmd(m: &mut Manifest, a: &SentenceArgs) -> Result<()> {
    m.config(a);
    let lex = load_lexicon(m, &a.lexicon)?;
    let ts = assign_text(&a.text, &lex, &a.lang)?;
    let proof = reduce(&ts)?;
    for w in &ts.words {
        println!("{:<16} {}", w.surface, w.ty);
    }
    let cups: Vec<String> = proof.cups.iter().map(|(l, r)| format!("({l},{r})")).collect();
    println!("cups {} survivor {}", cups.join(" "), proof.survivor);
    #[derive(Serialize)]
    struct Parsed<'a> {
        sentence: &'a qmt_core::grammar::TypedSentence,
        proof: &'a qmt_core::grammar::ReductionProof,
    }
    m.write("parse.json", serde_json::to_string_pretty(&Parsed { sentence: &ts, proof: &proof })?)?;
    m.finish("parse")
}

fn diagram_cmd(m: &mut Manifest, a: &SentenceArgs) -> Result<()> {
    m.config(a);
    let lex = load_lexicon(m, &a.lexicon)?;
    let d = diagram_text(&a.text, &lex, &a.lang)?;
    for (word, wires) in wire_report(&d) {
        println!("{word:<16} {wires} wire(s)");
    }
    println!("{} wires, cups {:?}, open wire {}", d.total_wires, d.cups, d.sentence_wire);
    m.write("diagram.json", d.to_json())?;
    m.finish("diagram")
}

fn compile_cmd(m: &mut Manifest, a: &CompileArgs) -> Result<()> {
    m.config(a);
    let lex = load_lexicon(m, &a.sentence.lexicon)?;
    let reg = load_registry(m, &a.params, &lex)?;
    let c = compile_text(&a.sentence.text, &lex, &a.sentence.lang, &reg, a.params.layers)?;
    let bound = bind(&c, &reg)?;
    println!("{} qubits, {} gates, post-select {:?}", c.n_qubits, c.gates.len(), c.postselect);
    m.write("circuit.json", c.to_json())?;
    m.write("bound.json", bound.to_json())?;
    m.write("registry.json", reg.to_json())?;
    m.finish("compile")
}

fn simulate_cmd(m: &mut Manifest, a: &SimulateArgs) -> Result<()> {
    m.config(a);
    let c: BoundCircuit = serde_json::from_str(&read(m, &a.circuit)?).context("parsing circuit")?;
    c.validate()?;
    let mut d = match a.shots {
        Some(n) => sample(&c, n, a.seed)?,
        None => exact_distribution(&c)?,
    };
    if a.postselect {
        d = postselect(&d, &c.postselect)?;
    }
    let h = qmt_core::entropy::shannon_entropy(&d);
    println!("{} outcomes with mass, entropy {h:.6} bits", d.mass.len());
    m.write("distribution.csv", d.to_csv())?;
    m.finish("simulate")
}

fn circuit_pairs(corpus: &Corpus, lex: &Lexicon, reg: &ParamRegistry, layers: usize) -> Result<Vec<CircuitPair>> {
    corpus
        .pairs
        .iter()
        .map(|p| {
            Ok(CircuitPair {
                id: p.id.clone(),
                src: compile_text(&p.src, lex, &corpus.src_lang, reg, layers)?,
                tgt: compile_text(&p.tgt, lex, &corpus.tgt_lang, reg, layers)?,
            })
        })
        .collect()
}

fn experiment(m: &mut Manifest, a: &ExperimentArgs, offset: OffsetMode) -> Result<qmt_core::entropy::ExperimentResult> {
    let lex = load_lexicon(m, &a.lexicon)?;
    let reg = load_registry(m, &a.params, &lex)?;
    let corpus = load_corpus(m, &a.corpus, a.pairs, a.corpus_seed, &lex)?;
    let pairs = circuit_pairs(&corpus, &lex, &reg, a.params.layers)?;
    let cfg = ExperimentConfig {
        shots: a.shots.map_or(qmt_core::sim::Shots::Exact, qmt_core::sim::Shots::Count),
        seed: a.seed,
        swap_seed: a.swapped.then_some(a.swap_seed),
        offset,
    };
    let result = run_matching_experiment(&pairs, &reg, &cfg)?;
    m.write("entropy_src.csv", result.src.to_csv())?;
    m.write("entropy_tgt.csv", result.tgt.to_csv())?;
    Ok(result)
}

fn entropy_cmd(m: &mut Manifest, a: &ExperimentArgs) -> Result<()> {
    m.config(a);
    let r = experiment(m, a, OffsetMode::Fixed(0.0))?;
    for (s, t) in r.src.rows.iter().zip(&r.tgt.rows) {
        println!("{:<6} {:.6} {:.6}", s.id, s.entropy, t.entropy);
    }
    m.finish("entropy")
}

fn match_cmd(m: &mut Manifest, a: &MatchArgs) -> Result<()> {
    m.config(a);
    let offset = match (a.offset, a.calibrate) {
        (_, true) => OffsetMode::Calibrated,
        (Some(x), false) => OffsetMode::Fixed(x),
        (None, false) => OffsetMode::Fixed(0.0),
    };
    let r = experiment(m, &a.experiment, offset)?;
    heatmap_export(&r.matrix, m.dir())?;
    for name in ["matrix.csv", "heatmap.pgm", "best_matches.csv"] {
        m.output(name);
    }
    let summary = serde_json::json!({
        "offset": r.matrix.offset,
        "diagonal_accuracy": r.matrix.diagonal_accuracy(),
        "mean_diagonal": r.matrix.mean_diagonal(),
        "max_value": r.matrix.max_value(),
    });
    m.write("summary.json", serde_json::to_string_pretty(&summary)?)?;
    println!(
        "offset {:.6}, diagonal accuracy {:.3}, mean diagonal {:.6}",
        r.matrix.offset,
        r.matrix.diagonal_accuracy(),
        r.matrix.mean_diagonal()
    );
    m.finish("match")
}

fn encode_cmd(m: &mut Manifest, a: &EncodeArgs) -> Result<()> {
    m.config(a);
    let lex = load_lexicon(m, &a.lexicon)?;
    let reg = load_registry(m, &a.params, &lex)?;
    let corpus = load_corpus(m, &a.corpus, a.pairs, a.corpus_seed, &lex)?;
    let ds = build_dataset(&bind_corpus(&corpus, &lex, &reg, a.params.layers)?, a.bins, a.params.layers)?;
    let h = &ds.header;
    println!(
        "{} records, shape ({}, {}), vocab {}, sequence length {}",
        ds.records.len(),
        h.shape.t_max,
        h.shape.g_max,
        h.vocab_size,
        h.seq_len
    );
    m.write("dataset.jsonl", ds.to_jsonl())?;
    m.write("registry.json", reg.to_json())?;
    m.finish("encode")
}

fn examples(ds: &Dataset) -> Vec<Example> {
    ds.records
        .iter()
        .map(|r| Example {
            src: r.src_tokens.clone(),
            tgt: r.tgt_tokens.clone(),
        })
        .collect()
}

fn train_cmd(m: &mut Manifest, a: &TrainArgs) -> Result<()> {
    m.config(a);
    let ds = Dataset::from_jsonl(&read(m, &a.dataset)?)?;
    let variant: Variant = a.variant.parse().map_err(|e: String| anyhow!(e))?;
    let kind: OptimizerKind = a.optimizer.parse().map_err(|e: String| anyhow!(e))?;
    let mut opt_cfg = OptimizerConfig::default_for(kind);
    if let Some(lr) = a.lr {
        opt_cfg = opt_cfg.with_lr(lr);
    }
    let mut model = Model::build(ModelConfig::new(variant, ds.header.vocab_size, ds.header.seq_len), a.seed);
    let mut opt = Optimizer::new(opt_cfg);
    let cfg = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch_size,
        val_split: a.val_split,
        seed: a.seed,
        clip: a.clip,
    };
    let history = train(&mut model, &examples(&ds), &mut opt, &cfg)?;
    let last = history.last().ok_or_else(|| anyhow!("no epochs were run"))?;
    println!(
        "epoch {}: train loss {:.5}, validation loss {:.5}, MAE {:.5}",
        last.epoch, last.train_loss, last.val_loss, last.mae
    );
    m.write("history.csv", history.to_csv())?;
    m.write("checkpoint.json", Checkpoint::new(&model, Some(&opt), a.epochs).to_json())?;
    m.finish("train")
}

fn translate_cmd(m: &mut Manifest, a: &TranslateArgs) -> Result<()> {
    m.config(a);
    let model = Checkpoint::from_json(&read(m, &a.checkpoint)?)?.model()?;
    let ds = Dataset::from_jsonl(&read(m, &a.dataset)?)?;
    let lex = load_lexicon(m, &a.lexicon)?;
    let t = match (&a.id, &a.text) {
        (Some(id), _) => {
            let r = ds.records.iter().find(|r| &r.id == id).ok_or_else(|| anyhow!("no record {id:?} in the dataset"))?;
            let out = translate_tokens(&model, &r.src_tokens, &ds.header, &TargetMeta::Known(r.meta_tgt.clone()), None)?;
            let hits = out.decoded.tokens.iter().zip(&r.tgt_tokens).filter(|(a, b)| a == b).count();
            let total = out.decoded.tokens.len().max(r.tgt_tokens.len());
            println!("{hits}/{total} tokens match the reference");
            out
        }
        (None, Some(text)) => {
            let path = a.registry.as_ref().ok_or_else(|| anyhow!("--text needs --registry"))?;
            let reg = ParamRegistry::from_json(&read(m, path)?)?;
            let src = bind(&compile_text(text, &lex, &a.lang, &reg, ds.header.iqp_layers)?, &reg)?;
            let target = TargetMeta::Infer {
                language: a.target_lang.clone(),
            };
            translate(&model, &src, &ds.header, &target, Some(&lex))?
        }
        (None, None) => bail!("pass --id or --text"),
    };
    println!(
        "{} qubits, {} gates, {} repaired tokens, {} inserted Hadamards",
        t.circuit.n_qubits,
        t.circuit.gates.len(),
        t.decoded.repairs,
        t.inserted_h
    );
    m.write("tokens.json", serde_json::to_string(&t.decoded)?)?;
    m.write("translation.json", t.circuit.to_json())?;
    m.finish("translate")
}

fn report_cmd(m: &mut Manifest, a: &ReportArgs) -> Result<()> {
    m.config(a);
    let mut md = String::from("# Run report\n");
    for dir in &a.runs {
        let manifest_path = dir.join("manifest.json");
        let text = read(m, &manifest_path)?;
        let run: serde_json::Value = serde_json::from_str(&text)?;
        let command = run["command"].as_str().unwrap_or("?");
        md.push_str(&format!("\n## {} (`{command}`)\n", dir.display()));
        md.push_str(&format!("\nConfiguration: `{}`\n", run["config"]));
        if let (Ok(src), Ok(tgt)) = (
            fs::read_to_string(dir.join("entropy_src.csv")),
            fs::read_to_string(dir.join("entropy_tgt.csv")),
        ) {
            md.push_str("\n| id | source entropy | target entropy |\n|---|---|---|\n");
            for (s, t) in src.lines().skip(1).zip(tgt.lines().skip(1)) {
                let s: Vec<&str> = s.split(',').collect();
                let entropy = |row: &[&str]| row.last().and_then(|v| v.parse::<f64>().ok()).unwrap_or(f64::NAN);
                let t: Vec<&str> = t.split(',').collect();
                md.push_str(&format!("| {} | {:.6} | {:.6} |\n", s[0], entropy(&s), entropy(&t)));
            }
        }
        if let Ok(summary) = fs::read_to_string(dir.join("summary.json")) {
            let s: serde_json::Value = serde_json::from_str(&summary)?;
            md.push_str(&format!(
                "\nMatch accuracy {} with offset {}; matrix in [matrix.csv]({}).\n",
                s["diagonal_accuracy"],
                s["offset"],
                dir.join("matrix.csv").display()
            ));
        }
        if let Ok(csv) = fs::read_to_string(dir.join("history.csv")) {
            let history = parse_history(&csv);
            if let Some(last) = history.epochs.last() {
                md.push_str(&format!(
                    "\nTraining curve: [history.csv]({}). Final epoch {}: train loss {:.5}, validation loss {:.5}, MAE {:.5}.\n",
                    dir.join("history.csv").display(),
                    last.epoch,
                    last.train_loss,
                    last.val_loss,
                    last.mae
                ));
            }
        }
    }
    print!("{md}");
    m.write("report.md", md)?;
    m.finish("report")
}

fn parse_history(csv: &str) -> TrainHistory {
    let mut h = TrainHistory::default();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    let col = |name: &str| header.iter().position(|&c| c == name);
    let (Some(e), Some(tr), Some(v), Some(mae)) = (col("epoch"), col("train_loss"), col("val_loss"), col("mae")) else {
        return h;
    };
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        let num = |i: usize| f.get(i).and_then(|s| s.parse::<f64>().ok());
        if let (Some(epoch), Some(train_loss), Some(val_loss), Some(m)) = (num(e), num(tr), num(v), num(mae)) {
            h.epochs.push(qmt_core::seq2seq::EpochStats {
                epoch: epoch as usize,
                train_loss,
                val_loss,
                mae: m,
                mse: col("mse").and_then(num).unwrap_or(f64::NAN),
            });
        }
    }
    h
}
