//! Command-line pipeline: prepare -> train -> evaluate -> summarize, plus
//! a selfcheck command running the invariant suites.
//!
//! Exit codes: 0 ok, 1 internal/selfcheck failure, 2 parse or validation
//! error, 3 degenerate labels, 4 missing gold summary, 5 empty review.
//! All randomness flows from --seed (fallback: the MPSUM_SEED env var).

use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};

use mpsum_core::checkpoint::Checkpoint;
use mpsum_core::classifier::{train_head, train_lora, write_trace_csv};
use mpsum_core::config::RunConfig;
use mpsum_core::encoder::{init_params, build_vocab};
use mpsum_core::error::Error;
use mpsum_core::rouge::{corpus_rouge, rouge_l, rouge_n, rouge_tokens};
use mpsum_core::selfcheck::{run_selfcheck, Fault};
use mpsum_core::text::{
    annotate, load_prepared, load_reviews, save_prepared, summarize, summarize_prepared,
    Paraphraser, PreparedReview, PreparedSentence, Review,
};

#[derive(Parser)]
#[command(name = "mpsum", version, about = "Extractive review summarization pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TrainMode {
    Head,
    Lora,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FaultName {
    /// Flip a sign inside the discretization (bug-planting hook).
    DiscretizationSign,
}

#[derive(Subcommand)]
enum Command {
    /// Annotate a raw JSONL review file into a prepared dataset.
    Prepare {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        tau_rouge: Option<f64>,
        #[arg(long)]
        tau_sim: Option<f64>,
        /// Also mark sentences relevant by cosine similarity to the review.
        #[arg(long)]
        use_sim: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train on a prepared dataset and write a checkpoint (plus a loss
    /// trace CSV alongside it).
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_enum)]
        mode: TrainMode,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lora_epochs: Option<usize>,
        #[arg(long)]
        batch: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        weight_decay: Option<f64>,
        #[arg(long)]
        dropout: Option<f64>,
        #[arg(long)]
        n_clusters: Option<usize>,
        #[arg(long)]
        d_model: Option<usize>,
        #[arg(long)]
        n_layers: Option<usize>,
        #[arg(long)]
        d_state: Option<usize>,
        #[arg(long)]
        max_len: Option<usize>,
        #[arg(long)]
        lora_rank: Option<usize>,
        #[arg(long)]
        lora_alpha: Option<f64>,
        #[arg(long)]
        lora_dropout: Option<f64>,
        #[arg(long)]
        tau_rouge: Option<f64>,
    },
    /// Generate summaries for a prepared dataset and report corpus ROUGE.
    Evaluate {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        top_k: Option<usize>,
        #[arg(long)]
        paraphrase_url: Option<String>,
        #[arg(long, default_value_t = 30)]
        paraphrase_timeout_secs: u64,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Summarize one review (a text file or stdin) with a checkpoint.
    Summarize {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long, conflicts_with = "stdin")]
        text: Option<PathBuf>,
        #[arg(long)]
        stdin: bool,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        top_k: Option<usize>,
        #[arg(long)]
        paraphrase_url: Option<String>,
        #[arg(long, default_value_t = 30)]
        paraphrase_timeout_secs: u64,
        /// Also print per-sentence probabilities (stderr).
        #[arg(long)]
        verbose: bool,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Run the invariant suites; nonzero exit on any failure.
    Selfcheck {
        #[arg(long, value_enum)]
        inject_fault: Option<FaultName>,
    },
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Parse { .. } | Error::InvalidConfig(_) => 2,
        Error::DegenerateLabels => 3,
        Error::NoGold(_) => 4,
        Error::EmptyReview => 5,
        _ => 1,
    }
}

fn env_seed() -> Option<u64> {
    std::env::var("MPSUM_SEED").ok().and_then(|v| v.parse().ok())
}

/// defaults < config file < MPSUM_SEED < --seed
fn load_config(path: Option<&Path>, seed_flag: Option<u64>) -> Result<RunConfig, Error> {
    let mut config = match path {
        Some(p) => RunConfig::from_toml_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = env_seed() {
        config.seed = seed;
    }
    if let Some(seed) = seed_flag {
        config.seed = seed;
    }
    Ok(config)
}

fn cmd_prepare(
    input: &Path,
    output: &Path,
    tau_rouge: Option<f64>,
    tau_sim: Option<f64>,
    use_sim: bool,
    seed: Option<u64>,
    config_path: Option<&Path>,
) -> Result<(), Error> {
    let mut config = load_config(config_path, seed)?;
    if let Some(t) = tau_rouge {
        config.tau_rouge = t;
    }
    if let Some(t) = tau_sim {
        config.tau_sim = t;
    }
    config.use_sim = use_sim;
    config.validate()?;

    let reviews = load_reviews(input)?;

    // The similarity disjunct needs an encoder over this corpus.
    let sim_assets = if use_sim {
        let texts: Vec<String> = reviews
            .iter()
            .flat_map(|r| mpsum_core::text::split_sentences(&r.text))
            .map(|s| mpsum_core::text::preprocess(&s))
            .collect();
        let vocab = build_vocab(&texts)?;
        let params = init_params(&config.encoder, vocab.len(), config.seed)?;
        Some((vocab, params))
    } else {
        None
    };

    let mut prepared = Vec::with_capacity(reviews.len());
    let mut positives = 0usize;
    let mut negatives = 0usize;
    let mut unlabeled = 0usize;
    for review in &reviews {
        let ctx = sim_assets
            .as_ref()
            .map(|(vocab, params)| mpsum_core::text::SimContext {
                vocab,
                params,
                config: &config.encoder,
            });
        let labeled = annotate(
            review,
            ctx.as_ref(),
            config.tau_rouge,
            config.tau_sim,
            config.use_sim,
        )?;
        for s in &labeled {
            match s.label {
                Some(1) => positives += 1,
                Some(_) => negatives += 1,
                None => unlabeled += 1,
            }
        }
        println!("{}: {} sentences", review.review_id, labeled.len());
        prepared.push(PreparedReview {
            review_id: review.review_id.clone(),
            summary: review.summary.clone(),
            sentences: labeled.iter().map(PreparedSentence::from).collect(),
        });
    }
    save_prepared(output, &prepared)?;
    println!(
        "prepared {} reviews: {} relevant / {} irrelevant / {} unlabeled sentences",
        prepared.len(),
        positives,
        negatives,
        unlabeled
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_train(
    dataset: &Path,
    mode: TrainMode,
    out: &Path,
    config_path: Option<&Path>,
    overrides: TrainOverrides,
) -> Result<(), Error> {
    let mut config = load_config(config_path, overrides.seed)?;
    if let Some(v) = overrides.epochs {
        config.epochs = v;
    }
    if overrides.lora_epochs.is_some() {
        config.lora_epochs = overrides.lora_epochs;
    }
    if let Some(v) = overrides.batch {
        config.batch = v;
    }
    if let Some(v) = overrides.lr {
        config.lr = v;
    }
    if let Some(v) = overrides.weight_decay {
        config.weight_decay = v;
    }
    if let Some(v) = overrides.dropout {
        config.dropout = v;
    }
    if let Some(v) = overrides.n_clusters {
        config.n_clusters = v;
    }
    if let Some(v) = overrides.d_model {
        config.encoder.d_model = v;
    }
    if let Some(v) = overrides.n_layers {
        config.encoder.n_layers = v;
    }
    if let Some(v) = overrides.d_state {
        config.encoder.d_state = v;
    }
    if let Some(v) = overrides.max_len {
        config.encoder.max_len = v;
    }
    if let Some(v) = overrides.lora_rank {
        config.lora.rank = v;
    }
    if let Some(v) = overrides.lora_alpha {
        config.lora.alpha = v;
    }
    if let Some(v) = overrides.lora_dropout {
        config.lora.dropout = v;
    }
    if let Some(v) = overrides.tau_rouge {
        config.tau_rouge = v;
    }
    config.lora.enabled = mode == TrainMode::Lora;
    config.validate()?;

    let prepared = load_prepared(dataset)?;
    let outcome = match mode {
        TrainMode::Head => train_head(&prepared, &config)?,
        TrainMode::Lora => train_lora(&prepared, &config)?,
    };
    outcome.checkpoint.save(out)?;
    let trace_path = trace_path_for(out);
    write_trace_csv(&trace_path, &outcome.trace)?;

    let last_epoch = outcome.trace.iter().rev().find(|r| r.kind == "epoch");
    if let Some(row) = last_epoch {
        println!(
            "trained ({} mode): final epoch loss {:.6}, train accuracy {:.3}",
            match mode {
                TrainMode::Head => "head",
                TrainMode::Lora => "lora",
            },
            row.loss,
            row.accuracy.unwrap_or(f64::NAN)
        );
    }
    println!("checkpoint: {}", out.display());
    println!("trace: {}", trace_path.display());
    Ok(())
}

struct TrainOverrides {
    seed: Option<u64>,
    epochs: Option<usize>,
    lora_epochs: Option<usize>,
    batch: Option<usize>,
    lr: Option<f64>,
    weight_decay: Option<f64>,
    dropout: Option<f64>,
    n_clusters: Option<usize>,
    d_model: Option<usize>,
    n_layers: Option<usize>,
    d_state: Option<usize>,
    max_len: Option<usize>,
    lora_rank: Option<usize>,
    lora_alpha: Option<f64>,
    lora_dropout: Option<f64>,
    tau_rouge: Option<f64>,
}

fn trace_path_for(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".trace.csv");
    out.with_file_name(name)
}

fn paraphraser_from(url: Option<&str>, timeout_secs: u64) -> Paraphraser {
    match url {
        Some(endpoint) => Paraphraser::Remote {
            endpoint: endpoint.to_string(),
            timeout: Duration::from_secs(timeout_secs),
        },
        None => Paraphraser::Identity,
    }
}

#[derive(serde::Serialize)]
struct ReportPerReview {
    review_id: String,
    rouge1: f64,
    rouge2: f64,
    #[serde(rename = "rougeL")]
    rouge_l: f64,
    generated: String,
}

#[derive(serde::Serialize)]
struct Report {
    rouge1: f64,
    rouge2: f64,
    #[serde(rename = "rougeL")]
    rouge_l: f64,
    per_review: Vec<ReportPerReview>,
}

#[allow(clippy::too_many_arguments)]
fn cmd_evaluate(
    dataset: &Path,
    ckpt: &Path,
    report_path: &Path,
    threshold: Option<f64>,
    top_k: Option<usize>,
    paraphrase_url: Option<&str>,
    timeout_secs: u64,
    jobs: usize,
) -> Result<(), Error> {
    let prepared = load_prepared(dataset)?;
    let checkpoint = Checkpoint::load(ckpt)?;
    let threshold = threshold.unwrap_or(checkpoint.config.threshold);
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidConfig(format!(
            "threshold must be in [0, 1], got {threshold}"
        )));
    }
    let top_k = top_k.or(checkpoint.config.top_k);
    let paraphraser = paraphraser_from(paraphrase_url, timeout_secs);

    for review in &prepared {
        let has_gold = review
            .summary
            .as_ref()
            .is_some_and(|s| !rouge_tokens(s).is_empty());
        if !has_gold {
            return Err(Error::NoGold(review.review_id.clone()));
        }
    }

    let mut pairs = Vec::with_capacity(prepared.len());
    let mut per_review = Vec::with_capacity(prepared.len());
    for review in &prepared {
        let result = summarize_prepared(review, &checkpoint, &paraphraser, threshold, top_k, jobs)?;
        let gold = review.summary.clone().unwrap_or_default();
        let cand_tokens = rouge_tokens(&result.final_summary);
        let gold_tokens = rouge_tokens(&gold);
        per_review.push(ReportPerReview {
            review_id: review.review_id.clone(),
            rouge1: rouge_n(&cand_tokens, &gold_tokens, 1).f1,
            rouge2: rouge_n(&cand_tokens, &gold_tokens, 2).f1,
            rouge_l: rouge_l(&cand_tokens, &gold_tokens).f1,
            generated: result.final_summary.clone(),
        });
        pairs.push((result.final_summary, gold));
    }

    let corpus = corpus_rouge(&pairs)?;
    let report = Report {
        rouge1: corpus.rouge1,
        rouge2: corpus.rouge2,
        rouge_l: corpus.rouge_l,
        per_review,
    };
    let mut bytes = serde_json::to_vec(&report)?;
    bytes.push(b'\n');
    std::fs::write(report_path, bytes)?;

    println!("metric      R1     R2     RL");
    println!(
        "corpus   {:>6.3} {:>6.3} {:>6.3}",
        corpus.rouge1, corpus.rouge2, corpus.rouge_l
    );
    println!("report: {}", report_path.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_summarize(
    ckpt: &Path,
    text: Option<&Path>,
    use_stdin: bool,
    threshold: Option<f64>,
    top_k: Option<usize>,
    paraphrase_url: Option<&str>,
    timeout_secs: u64,
    verbose: bool,
    jobs: usize,
) -> Result<(), Error> {
    let checkpoint = Checkpoint::load(ckpt)?;
    let raw = match (text, use_stdin) {
        (Some(path), false) => std::fs::read_to_string(path)?,
        (None, true) => {
            let mut buf = String::new();
            std::io::stdin().read_to_string(&mut buf)?;
            buf
        }
        _ => {
            return Err(Error::InvalidConfig(
                "pass exactly one of --text PATH or --stdin".into(),
            ))
        }
    };
    let threshold = threshold.unwrap_or(checkpoint.config.threshold);
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidConfig(format!(
            "threshold must be in [0, 1], got {threshold}"
        )));
    }
    let top_k = top_k.or(checkpoint.config.top_k);
    let paraphraser = paraphraser_from(paraphrase_url, timeout_secs);
    let review = Review {
        review_id: "input".into(),
        text: raw,
        summary: None,
    };
    let result = summarize(&review, &checkpoint, &paraphraser, threshold, top_k, jobs)?;
    if verbose {
        for (i, (score, text)) in result.scores.iter().zip(&result.sentences).enumerate() {
            eprintln!("[{i}] p={score:.4} {text}");
        }
    }
    println!("{}", result.final_summary);
    Ok(())
}

fn cmd_selfcheck(fault: Option<FaultName>) -> i32 {
    let fault = fault.map(|f| match f {
        FaultName::DiscretizationSign => Fault::DiscretizationSign,
    });
    let results = run_selfcheck(fault);
    let mut failed = false;
    for r in &results {
        if r.passed {
            println!("ok   {:<20} {}", r.name, r.detail);
        } else {
            failed = true;
            println!("FAIL {:<20} {}", r.name, r.detail);
        }
    }
    if failed {
        1
    } else {
        0
    }
}

fn run(cli: Cli) -> Result<i32, Error> {
    match cli.command {
        Command::Prepare {
            input,
            output,
            tau_rouge,
            tau_sim,
            use_sim,
            seed,
            config,
        } => {
            cmd_prepare(
                &input,
                &output,
                tau_rouge,
                tau_sim,
                use_sim,
                seed,
                config.as_deref(),
            )?;
            Ok(0)
        }
        Command::Train {
            dataset,
            mode,
            out,
            config,
            seed,
            epochs,
            lora_epochs,
            batch,
            lr,
            weight_decay,
            dropout,
            n_clusters,
            d_model,
            n_layers,
            d_state,
            max_len,
            lora_rank,
            lora_alpha,
            lora_dropout,
            tau_rouge,
        } => {
            cmd_train(
                &dataset,
                mode,
                &out,
                config.as_deref(),
                TrainOverrides {
                    seed,
                    epochs,
                    lora_epochs,
                    batch,
                    lr,
                    weight_decay,
                    dropout,
                    n_clusters,
                    d_model,
                    n_layers,
                    d_state,
                    max_len,
                    lora_rank,
                    lora_alpha,
                    lora_dropout,
                    tau_rouge,
                },
            )?;
            Ok(0)
        }
        Command::Evaluate {
            dataset,
            ckpt,
            report,
            threshold,
            top_k,
            paraphrase_url,
            paraphrase_timeout_secs,
            jobs,
        } => {
            cmd_evaluate(
                &dataset,
                &ckpt,
                &report,
                threshold,
                top_k,
                paraphrase_url.as_deref(),
                paraphrase_timeout_secs,
                jobs,
            )?;
            Ok(0)
        }
        Command::Summarize {
            ckpt,
            text,
            stdin,
            threshold,
            top_k,
            paraphrase_url,
            paraphrase_timeout_secs,
            verbose,
            jobs,
        } => {
            cmd_summarize(
                &ckpt,
                text.as_deref(),
                stdin,
                threshold,
                top_k,
                paraphrase_url.as_deref(),
                paraphrase_timeout_secs,
                verbose,
                jobs,
            )?;
            Ok(0)
        }
        Command::Selfcheck { inject_fault } => Ok(cmd_selfcheck(inject_fault)),
    }
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            let code = exit_code(&err);
            eprintln!("ERROR {code}: {err}");
            std::process::exit(code);
        }
    }
}
