use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use intentforge_core::config::RunConfig;
use intentforge_core::index::{load_index, save_index};
use intentforge_core::metrics::{
    aggregate_outcomes, cms, coverage_rates, coverage_relation, parse_coverage_report, parse_mutation_report,
};
use intentforge_core::pipeline::{dry_run, generate, GenerationTask};
use intentforge_core::promptgen::{parse_intention, synthesize_intention, Ablation, Granularity};
use intentforge_core::retrieval::{referability_curve, threshold_grid, TokenizedDoc};
use intentforge_core::source::{discover_tests, mine_pairs, parse_project};
use intentforge_core::trace::write_trace;
use intentforge_core::{GenerationOutcome, ValidationIntention};

#[derive(Parser)]
#[command(name = "intentforge", version, about = "Intention-driven unit test generation for Java projects")]
struct Cli {
    /// TOML configuration; defaults to ./intentforge.toml when present.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one setting, `section.key=value`. Repeatable.
    #[arg(long = "set", global = true, value_name = "SECTION.KEY=VALUE", value_parser = parse_override)]
    overrides: Vec<(String, String)>,
    /// Report failures on stderr as a JSON object.
    #[arg(long, global = true)]
    json_errors: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a project and write its code graph and method-test pairs.
    Index(IndexArgs),
    /// Reference availability and referability level over the threshold grid, as CSV.
    Referability(ReferabilityArgs),
    /// Ask the model for a validation intention of an existing test.
    Describe(DescribeArgs),
    /// Generate a test for a focal method.
    Generate(GenerateArgs),
    /// Outcome breakdown, mutation overlap and coverage relation.
    Evaluate(EvaluateArgs),
}

#[derive(Args)]
struct IndexArgs {
    #[arg(long)]
    root: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// JSON object mapping test ids to intentions. Tests without one get a placeholder.
    #[arg(long)]
    intentions: Option<PathBuf>,
}

#[derive(Args)]
struct ReferabilityArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DescribeArgs {
    #[arg(long)]
    index: PathBuf,
    /// Test method id.
    #[arg(long)]
    test: String,
    /// Focal method id; defaults to the one the test is paired with.
    #[arg(long)]
    focal: Option<String>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    max_attempts: usize,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    focal: String,
    /// Intention as JSON, or as `# Objective:` / `# Preconditions:` / `# Expected Results:` text.
    #[arg(long)]
    intention: PathBuf,
    #[arg(long, value_parser = parse_granularity)]
    granularity: Option<Granularity>,
    #[arg(long, value_delimiter = ',', value_parser = parse_ablation)]
    ablate: Vec<Ablation>,
    #[arg(long)]
    facts_topk: Option<usize>,
    #[arg(long)]
    facts_depth: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    /// Outcome JSON, or the first prompt with `--dry-run`.
    #[arg(long)]
    out: PathBuf,
    /// JSON Lines stage trace.
    #[arg(long)]
    trace: PathBuf,
    /// Render the first prompt and stop; no model or build is contacted.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Directory of outcome JSON files written by `generate`.
    #[arg(long)]
    outcomes: PathBuf,
    #[arg(long, requires = "mutation_truth")]
    mutation_gen: Option<PathBuf>,
    #[arg(long, requires = "mutation_gen")]
    mutation_truth: Option<PathBuf>,
    #[arg(long, requires_all = ["coverage_truth", "focal", "index"])]
    coverage_gen: Option<PathBuf>,
    #[arg(long, requires = "coverage_gen")]
    coverage_truth: Option<PathBuf>,
    /// Focal method whose lines are compared.
    #[arg(long)]
    focal: Option<String>,
    /// Index holding the focal method's span.
    #[arg(long)]
    index: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn parse_override(s: &str) -> std::result::Result<(String, String), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected SECTION.KEY=VALUE, got {s:?}"))?;
    if !k.contains('.') {
        return Err(format!("expected SECTION.KEY=VALUE, got {s:?}"));
    }
    Ok((k.trim().to_string(), v.trim().to_string()))
}

fn parse_granularity(s: &str) -> std::result::Result<Granularity, String> {
    s.parse().map_err(|e: intentforge_core::Error| e.to_string())
}

fn parse_ablation(s: &str) -> std::result::Result<Ablation, String> {
    s.parse().map_err(|e: intentforge_core::Error| e.to_string())
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn read_intention(path: &Path) -> Result<ValidationIntention> {
    let text = read(path)?;
    let desc = match serde_json::from_str::<ValidationIntention>(&text) {
        Ok(d) => d,
        Err(_) => parse_intention(&text)?,
    };
    desc.validate()?;
    Ok(desc)
}

fn run_index(config: &RunConfig, args: &IndexArgs) -> Result<()> {
    let intentions: BTreeMap<String, ValidationIntention> = match &args.intentions {
        Some(p) => serde_json::from_str(&read(p)?).with_context(|| format!("parsing {}", p.display()))?,
        None => BTreeMap::new(),
    };
    let graph = parse_project(&args.root, &config.adapter)?;
    let pairs = mine_pairs(&graph, &config.adapter, &intentions);
    save_index(&graph, &pairs, &args.out)?;
    log::info!(
        "indexed {} nodes, {} edges, {} pairs into {}",
        graph.nodes().len(),
        graph.edges().len(),
        pairs.len(),
        args.out.display()
    );
    Ok(())
}

fn run_referability(config: &RunConfig, args: &ReferabilityArgs) -> Result<()> {
    let (graph, _) = load_index(&args.index)?;
    let docs: Vec<TokenizedDoc> = discover_tests(&graph, &config.adapter)
        .iter()
        .filter_map(|t| graph.node(&t.node))
        .map(|n| TokenizedDoc::new(n.id.clone(), &n.body_text))
        .collect();
    let mut csv = String::from("threshold,ra,rl\n");
    for (th, ra, rl) in referability_curve(&docs, &threshold_grid())? {
        csv.push_str(&format!("{th:.1},{ra},{rl}\n"));
    }
    write(&args.out, &csv)
}

fn run_describe(config: &RunConfig, args: &DescribeArgs) -> Result<()> {
    let (graph, pairs) = load_index(&args.index)?;
    let test = graph.require(&args.test)?;
    let focal_id = match &args.focal {
        Some(f) => f.clone(),
        None => match pairs.iter().find(|p| p.test == args.test) {
            Some(p) => p.focal.clone(),
            None => bail!("{} has no paired focal method; pass --focal", args.test),
        },
    };
    let focal = graph.require(&focal_id)?;
    let pipeline = config.pipeline_config()?;
    let llm = config.completion_provider()?;
    let synthesis = synthesize_intention(
        llm.as_ref(),
        &pipeline.model_id,
        pipeline.system_prompt.as_deref(),
        &test.body_text,
        &focal.body_text,
        args.max_attempts,
    )?;
    if let Some(p) = &args.trace {
        write_trace(p, &synthesis.trace)?;
    }
    write(&args.out, &serde_json::to_string_pretty(&synthesis.intention)?)
}

fn run_generate(config: &RunConfig, args: &GenerateArgs) -> Result<()> {
    let mut pipeline = config.pipeline_config()?;
    if let Some(g) = args.granularity {
        pipeline.granularity = g;
    }
    if !args.ablate.is_empty() {
        pipeline.ablations = args.ablate.iter().copied().collect();
    }
    if let Some(k) = args.facts_topk {
        pipeline.top_k = k;
    }
    if let Some(d) = args.facts_depth {
        pipeline.depth = d;
    }
    if let Some(b) = args.beta {
        pipeline.beta = b;
    }
    pipeline.validate()?;
    let (graph, pairs) = load_index(&args.index)?;
    let task = GenerationTask {
        focal: args.focal.clone(),
        desc: read_intention(&args.intention)?,
        config: pipeline,
    };
    let embedder = config.embedder()?;
    if args.dry_run {
        let (prompt, trace) = dry_run(&task, &graph, &pairs, embedder.as_ref())?;
        write_trace(&args.trace, &trace)?;
        let mut text = String::new();
        if let Some(system) = &prompt.system {
            text.push_str(&format!("--- system\n{system}\n--- user\n"));
        }
        text.push_str(&prompt.user);
        return write(&args.out, &text);
    }
    let llm = config.completion_provider()?;
    let outcome = generate(&task, &graph, &pairs, llm.as_ref(), embedder.as_ref())?;
    write_trace(&args.trace, &outcome.trace)?;
    write(&args.out, &serde_json::to_string_pretty(&outcome)?)?;
    log::info!(
        "{}: {} after {} outer iterations",
        args.focal,
        outcome.status,
        outcome.outer_iterations
    );
    Ok(())
}

fn read_outcomes(dir: &Path) -> Result<Vec<GenerationOutcome>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    paths.retain(|p| p.extension().is_some_and(|x| x == "json"));
    paths.sort();
    paths
        .iter()
        .map(|p| serde_json::from_str(&read(p)?).with_context(|| format!("parsing outcome {}", p.display())))
        .collect()
}

fn run_evaluate(args: &EvaluateArgs) -> Result<()> {
    let outcomes = read_outcomes(&args.outcomes)?;
    let mut report = serde_json::json!({
        "breakdown": aggregate_outcomes(&outcomes),
        "cms": null,
        "cms_pair": null,
        "exact_match_rate": null,
        "full_cover_rate": null,
    });
    if let (Some(g), Some(t)) = (&args.mutation_gen, &args.mutation_truth) {
        let gen = parse_mutation_report(&read(g)?)?;
        let truth = parse_mutation_report(&read(t)?)?;
        report["cms"] = cms(&gen.killed, &truth.killed).into();
        report["cms_pair"] = serde_json::json!({
            "killed_gen": gen.killed.len(),
            "killed_truth": truth.killed.len(),
            "killed_both": gen.killed.intersection(&truth.killed).count(),
        });
    }
    if let (Some(g), Some(t), Some(focal), Some(index)) =
        (&args.coverage_gen, &args.coverage_truth, &args.focal, &args.index)
    {
        let (graph, _) = load_index(index)?;
        let node = graph.require(focal)?;
        let gen = parse_coverage_report(&read(g)?, node)?;
        let truth = parse_coverage_report(&read(t)?, node)?;
        let relation = coverage_relation(&gen, &truth);
        let rates = coverage_rates(&[relation])?;
        report["coverage_relation"] = serde_json::to_value(relation)?;
        report["exact_match_rate"] = rates.exact_match_rate.into();
        report["full_cover_rate"] = rates.full_cover_rate.into();
    }
    write(&args.out, &serde_json::to_string_pretty(&report)?)
}

fn run(cli: &Cli) -> Result<()> {
    let config = RunConfig::load(cli.config.as_deref(), &cli.overrides)?;
    match &cli.command {
        Command::Index(a) => run_index(&config, a),
        Command::Referability(a) => run_referability(&config, a),
        Command::Describe(a) => run_describe(&config, a),
        Command::Generate(a) => run_generate(&config, a),
        Command::Evaluate(a) => run_evaluate(a),
    }
}

fn report_error(err: &anyhow::Error, json: bool) {
    let kind = err
        .chain()
        .find_map(|e| e.downcast_ref::<intentforge_core::Error>())
        .map_or("Error", intentforge_core::Error::kind);
    if json {
        let causes: Vec<String> = err.chain().map(ToString::to_string).collect();
        let body = serde_json::json!({"error": {"kind": kind, "message": err.to_string(), "causes": causes}});
        eprintln!("{body}");
    } else {
        eprintln!("error: {err:#}");
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report_error(&e, cli.json_errors);
            ExitCode::from(1)
        }
    }
}
