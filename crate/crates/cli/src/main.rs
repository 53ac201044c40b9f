//! `headscope`: find next-token neurons, attribute them to attention heads,
//! explain and score the heads, and ablate them.
//!
//! Every stage reads and writes a run directory; see `headscope --help`.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use headscope_core::model_io::synthetic::{planted_circuit, random_gpt2, reference_gpt2_small, SyntheticScales};
use headscope_core::model_io::{save_model, TensorNames};
use headscope_core::pipeline::artifacts::ReportFile;
use headscope_core::pipeline::{Pipeline, RunConfig, RunOptions, Stage, StageOutcome};
use headscope_core::{ModelConfig, Tokenizer, TokenizerTables};
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "headscope", version, about = "Attention heads behind next-token neurons")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct StageArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Run directory; defaults to `run_dir` in the config, else
    /// `<config dir>/runs/<config name>`.
    #[arg(long)]
    run_dir: Option<PathBuf>,
    /// Use the offline stub instead of the configured chat backend.
    #[arg(long)]
    stub_backend: bool,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Rerun even though later stages were built from the old outputs;
    /// those stages are invalidated.
    #[arg(long)]
    force: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Rank MLP neurons by output-weight / unembedding congruence.
    Scout(StageArgs),
    /// Collect and truncate each neuron's top corpus prompts.
    Mine(StageArgs),
    /// Score head contributions to each neuron and pick explainable heads.
    Attribute(StageArgs),
    /// Ask the chat backend to explain each explainable head.
    Explain(StageArgs),
    /// Score explanations by zero-shot classification of held-out prompts.
    Score(StageArgs),
    /// Ablate explainable heads and test the next-token probability shift.
    Ablate(StageArgs),
    /// Summarise score distributions, comparisons and ablations.
    Report {
        #[command(flatten)]
        args: StageArgs,
        /// Compare against the scores of another run directory.
        #[arg(long)]
        baseline: Option<PathBuf>,
    },
    /// Every stage in order, skipping up-to-date ones.
    All {
        #[command(flatten)]
        args: StageArgs,
        #[arg(long)]
        baseline: Option<PathBuf>,
    },
    /// Write a synthetic checkpoint (safetensors plus model config).
    Synth {
        #[arg(value_enum)]
        kind: SynthKind,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Planted circuit: trigger byte.
        #[arg(long, default_value_t = '@')]
        trigger: char,
        /// Planted circuit: target byte.
        #[arg(long, default_value_t = '!')]
        target: char,
    },
    /// Print the token ids and pieces of a text under a config's tokenizer.
    Tokenize {
        #[arg(long)]
        config: PathBuf,
        text: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthKind {
    /// GPT-2 Small shapes with seeded weights.
    Gpt2Small,
    /// Two-layer byte-vocabulary model with one planted head → neuron path.
    Planted,
    /// A small random GPT-2 (2 layers, byte vocabulary).
    Tiny,
}

fn main() {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Scout(a) => stages(&a, None, &[Stage::Scout]),
        Command::Mine(a) => stages(&a, None, &[Stage::Mine]),
        Command::Attribute(a) => stages(&a, None, &[Stage::Attribute]),
        Command::Explain(a) => stages(&a, None, &[Stage::Explain]),
        Command::Score(a) => stages(&a, None, &[Stage::Score]),
        Command::Ablate(a) => stages(&a, None, &[Stage::Ablate]),
        Command::Report { args, baseline } => stages(&args, baseline, &[Stage::Report]),
        Command::All { args, baseline } => stages(&args, baseline, &Stage::ALL),
        Command::Synth { kind, out, seed, trigger, target } => synth(kind, &out, seed, trigger, target),
        Command::Tokenize { config, text } => tokenize(&config, &text),
    }
}

fn stages(args: &StageArgs, baseline: Option<PathBuf>, list: &[Stage]) -> Result<()> {
    let options = RunOptions { force: args.force, stub_backend: args.stub_backend, seed: args.seed, baseline_run: baseline };
    let mut pipeline = Pipeline::from_config_file(&args.config, args.run_dir.clone(), options)
        .with_context(|| format!("opening run for {}", args.config.display()))?;
    for &stage in list {
        let started = std::time::Instant::now();
        let outcome = pipeline.run_stage(stage).with_context(|| format!("stage {stage} failed"))?;
        match outcome {
            StageOutcome::Ran => println!("{stage}: done in {:.1}s", started.elapsed().as_secs_f64()),
            StageOutcome::UpToDate => println!("{stage}: up to date"),
        }
    }
    if list.contains(&Stage::Report) {
        print_report(&pipeline.run_dir().join("report.json"))?;
    }
    Ok(())
}

fn print_report(path: &Path) -> Result<()> {
    let report: ReportFile = serde_json::from_slice(&std::fs::read(path)?).context("reading report.json")?;
    println!(
        "{} explainable pairs at {} prompts: {} scored, {} discarded",
        report.explainable_pairs, report.primary_count, report.scored_pairs, report.discarded_pairs
    );
    for d in &report.distributions {
        let skew = d.skewness.map_or("n/a".to_owned(), |s| format!("{s:.3}"));
        println!("  {:<24} n={:<4} mean={:.3} skew={skew}", d.label, d.n, d.mean);
    }
    for c in &report.comparisons {
        println!(
            "  {} vs {}: mean diff {:+.3}, KS D={:.3} p={:.3e}",
            c.primary, c.baseline, c.mean_difference, c.ks.statistic, c.ks.p_value
        );
    }
    for a in &report.ablation {
        if let Some(s) = &a.summary {
            println!(
                "  ablation {}: {} active / {} inactive, mean delta {:.2e} vs {:.2e}, KS p={:.3e}",
                a.group.label(),
                s.n_active,
                s.n_inactive,
                s.mean_delta_active,
                s.mean_delta_inactive,
                s.ks.p_value
            );
        }
    }
    Ok(())
}

fn byte(c: char, what: &str) -> Result<u32> {
    if !c.is_ascii() {
        bail!("{what} must be an ASCII character");
    }
    Ok(u32::from(c))
}

fn synth(kind: SynthKind, out: &Path, seed: u64, trigger: char, target: char) -> Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let (name, bundle) = match kind {
        SynthKind::Gpt2Small if seed == 7 => ("gpt2-small", reference_gpt2_small()),
        SynthKind::Gpt2Small => ("gpt2-small", random_gpt2(&ModelConfig::gpt2_small(), seed, &SyntheticScales::default())),
        SynthKind::Planted => {
            let (bundle, circuit) = planted_circuit(256, byte(trigger, "trigger")?, byte(target, "target")?, seed);
            println!("planted head L{}H{} drives neuron {}", circuit.head.layer, circuit.head.head, circuit.neuron);
            ("planted", bundle)
        }
        SynthKind::Tiny => {
            let config = ModelConfig {
                n_layers: 2,
                n_heads: 4,
                d_model: 32,
                d_head: 8,
                d_mlp: 64,
                vocab_size: 256,
                max_positions: 256,
                layer_norm_eps: 1e-5,
            };
            ("tiny", random_gpt2(&config, seed, &SyntheticScales::default()))
        }
    };
    let weights = out.join(format!("{name}.safetensors"));
    let config = out.join(format!("{name}.toml"));
    save_model(&bundle, &TensorNames::default(), &weights, &config)?;
    println!("wrote {} and {}", weights.display(), config.display());
    Ok(())
}

fn tokenize(config_path: &Path, text: &str) -> Result<()> {
    let (config, _) = RunConfig::load(config_path)?;
    let tables = match (&config.model.vocab, &config.model.merges) {
        (Some(v), Some(m)) => TokenizerTables::from_files(v, m)?,
        _ => TokenizerTables::byte_level(),
    };
    let tok = Tokenizer::new(tables);
    for id in tok.encode(text) {
        println!("{id}\t{:?}", tok.token_text(id)?);
    }
    Ok(())
}
