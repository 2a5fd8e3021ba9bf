use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use srbrcnn::depgraph::{parse_conllu, DependencyTree};
use srbrcnn::harness::dataset::{load_dataset, write_dataset};
use srbrcnn::harness::dict::{parse_dictionary, to_standoff, Matcher};
use srbrcnn::harness::synth::{synth_generate, synth_schema, SynthSpec};
use srbrcnn::harness::train::{evaluate, train, write_metrics_log, ExperimentConfig, ModelBundle};
use srbrcnn::harness::{HarnessError, LabelSchema};
use srbrcnn::model::read_word_vectors;
use srbrcnn::structreg::{extract_sr_sdp, regularize, CutRule};

#[derive(Parser)]
#[command(
    name = "srbrcnn",
    version,
    about = "Relation classification over regularized dependency paths"
)]
struct Cli {
    /// TOML file: an experiment config for train/eval, a corpus spec for synth.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    cut_rule: Option<RuleName>,
    /// Cut probability for `--cut-rule random`.
    #[arg(long, global = true, default_value_t = 0.5)]
    cut_p: f64,
    /// Weight of the forward head when decoding.
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[arg(long, global = true)]
    epochs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleName {
    None,
    Punct,
    Random,
    Prep,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Jsonl,
}

#[derive(Subcommand)]
enum Command {
    /// Print the (regularized) shortest dependency path for entity pairs.
    ExtractSdp {
        /// CoNLL-U file; used with --pairs.
        #[arg(long, conflicts_with = "dataset", requires = "pairs")]
        conllu: Option<PathBuf>,
        /// Lines of `sentence e1 e2`, or `e1 e2` for the sentence at that line.
        #[arg(long)]
        pairs: Option<PathBuf>,
        /// JSON-lines dataset; entity heads come from the spans.
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long, default_value = "semeval")]
        schema: String,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Generate a synthetic corpus.
    Synth {
        #[arg(long)]
        size: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        prep_density: Option<f64>,
        #[arg(long)]
        output: PathBuf,
        /// Also write the matching label schema here.
        #[arg(long)]
        schema_out: Option<PathBuf>,
    },
    /// Train a model and write its checkpoint and metrics log.
    Train {
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long)]
        schema: Option<String>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        metrics_log: Option<PathBuf>,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        validation_size: Option<usize>,
    },
    /// Score a checkpoint on a dataset.
    Eval {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        /// Try alpha = 0.0, 0.1, ..., 1.0 and report each.
        #[arg(long)]
        sweep_alpha: bool,
        /// Write one predicted label per line.
        #[arg(long)]
        predictions: Option<PathBuf>,
    },
    /// Annotate text with dictionary entities in brat standoff format.
    DictMatch {
        #[arg(long)]
        dict: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: &Cli) -> Result<(), HarnessError> {
    if let Some(alpha) = cli.alpha {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(HarnessError::Config(format!("alpha {alpha} is outside [0, 1]")));
        }
    }
    match &cli.command {
        Command::ExtractSdp {
            conllu,
            pairs,
            dataset,
            schema,
            format,
            output,
        } => extract_sdp(
            cli,
            conllu.as_deref(),
            pairs.as_deref(),
            dataset.as_deref(),
            schema,
            *format,
            output.as_deref(),
        ),
        Command::Synth {
            size,
            k,
            prep_density,
            output,
            schema_out,
        } => synth(cli, *size, *k, *prep_density, output, schema_out.as_deref()),
        Command::Train {
            train,
            schema,
            checkpoint,
            metrics_log,
            embeddings,
            validation_size,
        } => {
            let mut config = experiment(cli)?;
            let p = &mut config.paths;
            override_with(&mut p.train, train);
            override_with(&mut p.checkpoint, checkpoint);
            override_with(&mut p.metrics_log, metrics_log);
            override_with(&mut p.embeddings, embeddings);
            if let Some(s) = schema {
                config.schema = s.clone();
            }
            if let Some(n) = validation_size {
                config.validation_size = *n;
            }
            run_train(&config)
        }
        Command::Eval {
            checkpoint,
            data,
            sweep_alpha,
            predictions,
        } => {
            let mut config = experiment(cli)?;
            override_with(&mut config.paths.checkpoint, checkpoint);
            override_with(&mut config.paths.test, data);
            run_eval(cli, &config, *sweep_alpha, predictions.as_deref())
        }
        Command::DictMatch { dict, input, output } => dict_match(dict, input, output.as_deref()),
    }
}

fn override_with(slot: &mut Option<PathBuf>, value: &Option<PathBuf>) {
    if value.is_some() {
        slot.clone_from(value);
    }
}

fn read(path: &Path) -> Result<String, HarnessError> {
    fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>, HarnessError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| HarnessError::io(path, e))
}

/// Output file, or stdout.
fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, HarnessError> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn io_err(path: Option<&Path>) -> impl Fn(io::Error) -> HarnessError + '_ {
    move |e| HarnessError::io(path.unwrap_or(Path::new("<stdout>")), e)
}

fn cut_rule(cli: &Cli, fallback: &CutRule) -> Result<CutRule, HarnessError> {
    let seed = cli.seed.unwrap_or(0);
    Ok(match cli.cut_rule {
        None => fallback.clone(),
        Some(RuleName::None) => CutRule::None,
        Some(RuleName::Punct) => CutRule::Punctuation,
        Some(RuleName::Random) => CutRule::random(cli.cut_p, seed)?,
        Some(RuleName::Prep) => CutRule::preposition(),
    })
}

/// The experiment config after command-line overrides.
fn experiment(cli: &Cli) -> Result<ExperimentConfig, HarnessError> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::from_path(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(epochs) = cli.epochs {
        config.epochs = epochs;
    }
    if let Some(alpha) = cli.alpha {
        config.model.alpha = alpha;
    }
    config.cut = cut_rule(cli, &config.cut)?;
    config.validate()?;
    Ok(config)
}

fn required<'a>(value: &'a Option<PathBuf>, what: &str) -> Result<&'a Path, HarnessError> {
    value
        .as_deref()
        .ok_or_else(|| HarnessError::Config(format!("no {what} path given (flag or config)")))
}

#[derive(Serialize)]
struct PathLine<'a> {
    sentence: usize,
    e1: usize,
    e2: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    id: Option<&'a str>,
    nodes: Vec<usize>,
    words: Vec<&'a str>,
    edges: Vec<(&'a str, &'static str)>,
}

fn extract_sdp(
    cli: &Cli,
    conllu: Option<&Path>,
    pairs: Option<&Path>,
    dataset: Option<&Path>,
    schema: &str,
    format: Format,
    output: Option<&Path>,
) -> Result<(), HarnessError> {
    let rule = cut_rule(cli, &CutRule::None)?;
    let mut out = sink(output)?;
    let emit = |out: &mut dyn Write, tree: &DependencyTree, sentence: usize, a: usize, b: usize, id: Option<&str>| {
        let rt = regularize(tree, &rule.for_sentence(sentence as u64 - 1));
        let path = extract_sr_sdp(&rt, a, b);
        match format {
            Format::Text => {
                let words: Vec<String> = path
                    .nodes
                    .iter()
                    .enumerate()
                    .map(|(i, &n)| {
                        let w = &tree.token(n).form;
                        match path.edges.get(i) {
                            Some(e) => format!("{w} {}:{}", e.direction.as_str(), e.deprel),
                            None => w.clone(),
                        }
                    })
                    .collect();
                writeln!(out, "{sentence}\t{a}\t{b}\t{}", words.join(" "))
            }
            Format::Jsonl => {
                let line = PathLine {
                    sentence,
                    e1: a,
                    e2: b,
                    id,
                    nodes: path.nodes.clone(),
                    words: path.nodes.iter().map(|&n| tree.token(n).form.as_str()).collect(),
                    edges: path
                        .edges
                        .iter()
                        .map(|e| (e.deprel.as_str(), e.direction.as_str()))
                        .collect(),
                };
                serde_json::to_writer(&mut *out, &line)?;
                writeln!(out)
            }
        }
    };

    if let Some(path) = dataset {
        let schema = LabelSchema::resolve(schema)?;
        let data = load_dataset(path, &schema, true)?;
        for (i, inst) in data.instances.iter().enumerate() {
            let (a, b) = inst.entity_heads();
            emit(&mut *out, &inst.tree, i + 1, a, b, Some(&inst.id)).map_err(io_err(output))?;
        }
    } else {
        let conllu = conllu.ok_or_else(|| HarnessError::Config("give --dataset, or --conllu with --pairs".into()))?;
        let pairs = pairs.expect("clap requires --pairs with --conllu");
        let trees =
            parse_conllu(&read(conllu)?).map_err(|e| HarnessError::Config(format!("{}: {e}", conllu.display())))?;
        for (lineno, line) in read(pairs)?.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |why: &str| HarnessError::Config(format!("{}:{}: {why}", pairs.display(), lineno + 1));
            let nums: Vec<usize> = line
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| bad("expected integers")))
                .collect::<Result<_, _>>()?;
            let (sentence, a, b) = match nums[..] {
                [a, b] => (lineno + 1, a, b),
                [s, a, b] => (s, a, b),
                _ => return Err(bad("expected `e1 e2` or `sentence e1 e2`")),
            };
            let tree = sentence
                .checked_sub(1)
                .and_then(|s| trees.get(s))
                .ok_or_else(|| bad("no such sentence"))?;
            if a == 0 || b == 0 || a > tree.len() || b > tree.len() {
                return Err(bad("token index out of range"));
            }
            emit(&mut *out, tree, sentence, a, b, None).map_err(io_err(output))?;
        }
    }
    out.flush().map_err(io_err(output))
}

fn synth(
    cli: &Cli,
    size: Option<usize>,
    k: Option<usize>,
    prep_density: Option<f64>,
    output: &Path,
    schema_out: Option<&Path>,
) -> Result<(), HarnessError> {
    let mut spec: SynthSpec = match &cli.config {
        Some(path) => toml::from_str(&read(path)?).map_err(|e| HarnessError::Config(e.to_string()))?,
        None => SynthSpec::default(),
    };
    if let Some(v) = size {
        spec.size = v;
    }
    if let Some(v) = k {
        spec.k = v;
    }
    if let Some(v) = prep_density {
        spec.prep_density = v;
    }
    if let Some(v) = cli.seed {
        spec.seed = v;
    }
    if spec.size == 0 || spec.k == 0 {
        return Err(HarnessError::Config("size and k must be positive".into()));
    }
    for (name, p) in [
        ("prep_density", spec.prep_density),
        ("decoy_rate", spec.decoy_rate),
        ("residual_rate", spec.residual_rate),
        ("clause_rate", spec.clause_rate),
    ] {
        if !(0.0..=1.0).contains(&p) {
            return Err(HarnessError::Config(format!("{name} {p} is outside [0, 1]")));
        }
    }
    let schema = synth_schema(spec.k);
    let data = synth_generate(&spec);
    let mut w = create(output)?;
    write_dataset(&mut w, &data, &schema).map_err(|e| HarnessError::io(output, e))?;
    w.flush().map_err(|e| HarnessError::io(output, e))?;
    if let Some(path) = schema_out {
        let text = serde_json::to_string_pretty(&schema).expect("schema serializes");
        fs::write(path, text + "\n").map_err(|e| HarnessError::io(path, e))?;
    }
    log::info!("wrote {} instances to {}", data.len(), output.display());
    Ok(())
}

fn run_train(config: &ExperimentConfig) -> Result<(), HarnessError> {
    let schema = LabelSchema::resolve(&config.schema)?;
    let train_path = required(&config.paths.train, "training data")?;
    let checkpoint = required(&config.paths.checkpoint, "checkpoint")?;
    let data = load_dataset(train_path, &schema, config.fail_fast)?;
    let vectors = match &config.paths.embeddings {
        Some(p) => {
            let f = File::open(p).map_err(|e| HarnessError::io(p, e))?;
            Some(read_word_vectors(BufReader::new(f)).map_err(|e| HarnessError::io(p, e))?)
        }
        None => None,
    };
    let outcome = train(config, &schema, &data.instances, vectors.as_ref())?;
    ModelBundle::new(&outcome.model, &schema, &config.cut).save(checkpoint)?;
    if let Some(path) = &config.paths.metrics_log {
        let mut w = create(path)?;
        write_metrics_log(&mut w, &outcome.log).map_err(|e| HarnessError::io(path, e))?;
        w.flush().map_err(|e| HarnessError::io(path, e))?;
    }
    if let Some(last) = outcome.log.last() {
        println!(
            "trained {} epochs; best epoch {}; final loss {:.6}; {} macro-F1 {:.4}",
            outcome.log.len(),
            outcome.best_epoch,
            last.loss,
            last.split,
            last.macro_f1
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct TypeReport<'a> {
    relation: &'a str,
    precision: f64,
    recall: f64,
    f1: f64,
    gold: u64,
    predicted: u64,
}

#[derive(Serialize)]
struct EvalReport<'a> {
    alpha: f64,
    instances: usize,
    macro_f1: f64,
    accuracy: f64,
    per_type: Vec<TypeReport<'a>>,
}

fn run_eval(cli: &Cli, config: &ExperimentConfig, sweep: bool, predictions: Option<&Path>) -> Result<(), HarnessError> {
    let checkpoint = required(&config.paths.checkpoint, "checkpoint")?;
    let data_path = required(&config.paths.test, "evaluation data")?;
    let (model, schema, trained_cut) = ModelBundle::load(checkpoint)?.into_model()?;
    let rule = cut_rule(cli, &trained_cut)?;
    let data = load_dataset(data_path, &schema, config.fail_fast)?;
    let default_alpha = cli.alpha.unwrap_or(model.config().alpha);
    let alphas: Vec<f64> = if sweep {
        (0..=10).map(|i| i as f64 / 10.0).collect()
    } else {
        vec![default_alpha]
    };
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let mut last = None;
    for alpha in alphas {
        let ev = evaluate(&model, &schema, &data.instances, &rule, alpha)?;
        let report = EvalReport {
            alpha,
            instances: data.instances.len(),
            macro_f1: ev.metrics.macro_f1,
            accuracy: ev.metrics.accuracy,
            per_type: ev
                .metrics
                .per_type
                .iter()
                .zip(&schema.relations)
                .map(|(s, name)| TypeReport {
                    relation: name,
                    precision: s.precision,
                    recall: s.recall,
                    f1: s.f1,
                    gold: s.gold,
                    predicted: s.predicted,
                })
                .collect(),
        };
        serde_json::to_writer(&mut out, &report).expect("report serializes");
        writeln!(out).map_err(io_err(None))?;
        if alpha == default_alpha || last.is_none() {
            last = Some(ev);
        }
    }
    if let (Some(path), Some(ev)) = (predictions, last) {
        let mut w = create(path)?;
        for label in ev.predictions {
            writeln!(w, "{}", schema.format_label(label)).map_err(|e| HarnessError::io(path, e))?;
        }
        w.flush().map_err(|e| HarnessError::io(path, e))?;
    }
    Ok(())
}

fn dict_match(dict: &Path, input: &Path, output: Option<&Path>) -> Result<(), HarnessError> {
    let matcher = Matcher::new(&parse_dictionary(&read(dict)?));
    let spans = matcher.find(&read(input)?);
    let mut out = sink(output)?;
    out.write_all(to_standoff(&spans, 1).as_bytes())
        .map_err(io_err(output))?;
    out.flush().map_err(io_err(output))
}
