//! The `adg` command line.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use adg_feedback::alignment::{align_cue, AlignConfig, AlignmentResult, ProviderSpec, SimilarityProvider};
use adg_feedback::corpus::{cue_text, load_corpus_path, Corpus};
use adg_feedback::evalstats::dist::{chi_square_sf, t_two_sided};
use adg_feedback::evalstats::tables::{count_table, likert_table, t_table, RowOutcome};
use adg_feedback::evalstats::{alignment_accuracy, ChiSquareOptions, MarkerScale};
use adg_feedback::feedback::{generate_batch, validate_registry, FeedbackConfig, TemplateRegistry};
use adg_feedback::graph::{load_adg, parse_adg, validate_graph_with};
use adg_feedback::report::{Finding, Severity, Subject};
use adg_feedback::{Adg, FeedbackReport, ValidationReport};
use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::app::{App, ServiceConfig};
use crate::store::{build_provider, json_files};

#[derive(Debug, Parser)]
#[command(name = "adg", version, about = "Answer diagnostic graph feedback: validate, align, generate, stats, serve")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check graphs, a template registry and a corpus; exit 1 on any error finding.
    Validate(ValidateArgs),
    /// Align justification cues to graph nodes; with --oracle, score against gold nodes.
    Align(AlignArgs),
    /// Render feedback reports for one or all responses of a corpus.
    Generate(GenerateArgs),
    /// Significance tests on published tables; exit 1 if a published marker is not reproduced.
    Stats(StatsArgs),
    /// Two-sided t and upper-tail chi-square p-values for `kind<TAB>statistic<TAB>df` rows.
    Dist(DistArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Graph documents or directories of them.
    #[arg(long = "adg", value_name = "PATH")]
    pub adg: Vec<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub templates: Option<PathBuf>,
    /// Corpus file or split directory; its prompts are used for registry checks.
    #[arg(long, value_name = "PATH")]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ProviderArgs {
    /// JSON provider spec, or a list of specs tried in order.
    #[arg(long, value_name = "FILE")]
    pub provider_config: Option<PathBuf>,
    /// Similarity below which a cue counts as unaligned.
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct AlignArgs {
    #[arg(long, value_name = "PATH")]
    pub corpus: PathBuf,
    #[arg(long = "adg", value_name = "PATH", required = true)]
    pub adg: Vec<PathBuf>,
    /// Report top-1 accuracy against the corpus's oracle nodes.
    #[arg(long)]
    pub oracle: bool,
    #[command(flatten)]
    pub provider: ProviderArgs,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
    Both,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_name = "PATH")]
    pub corpus: PathBuf,
    #[arg(long = "adg", value_name = "PATH", required = true)]
    pub adg: Vec<PathBuf>,
    /// Template registry; the built-in templates when omitted.
    #[arg(long, value_name = "FILE")]
    pub templates: Option<PathBuf>,
    /// Only these responses (repeatable).
    #[arg(long = "response", value_name = "ID")]
    pub responses: Vec<String>,
    /// Write one file per report instead of printing.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, default_value = "en")]
    pub language: String,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Generate one response at a time instead of in parallel.
    #[arg(long)]
    pub sequential: bool,
    #[command(flatten)]
    pub provider: ProviderArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scale {
    ThreeLevel,
    TwoLevel,
}

impl From<Scale> for MarkerScale {
    fn from(s: Scale) -> Self {
        match s {
            Scale::ThreeLevel => MarkerScale::ThreeLevel,
            Scale::TwoLevel => MarkerScale::TwoLevel,
        }
    }
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Welch t rows (questionnaire means by condition).
    #[arg(long, value_name = "FILE")]
    pub table1: Option<PathBuf>,
    /// Chi-square rows over category counts.
    #[arg(long, value_name = "FILE")]
    pub table2: Option<PathBuf>,
    /// Six-point Likert rows, trichotomized and tested pairwise; two-level markers.
    #[arg(long, value_name = "FILE")]
    pub table3: Option<PathBuf>,
    /// Welch t rows (score improvements by condition).
    #[arg(long, value_name = "FILE")]
    pub table5: Option<PathBuf>,
    /// Marker scale for every table, overriding the per-table default.
    #[arg(long, value_enum)]
    pub scale: Option<Scale>,
    /// Continuity correction for two-category chi-square tests.
    #[arg(long)]
    pub yates: bool,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct DistArgs {
    /// Point file, `-` for stdin.
    #[arg(long, value_name = "FILE")]
    pub points: PathBuf,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// JSON service configuration; flags below override it.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    pub data_dir: Option<PathBuf>,
    #[arg(long, value_name = "ADDR")]
    pub listen: Option<std::net::SocketAddr>,
    #[arg(long)]
    pub language: Option<String>,
    /// Static bearer token for `/v1` routes.
    #[arg(long, env = "ADG_AUTH_TOKEN")]
    pub token: Option<String>,
    #[arg(long, value_name = "FILE")]
    pub provider_config: Option<PathBuf>,
}

/// Parses arguments and runs; returns the process exit status.
pub fn run(args: impl IntoIterator<Item = OsString>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Validate(a) => validate(a),
        Command::Align(a) => align(a),
        Command::Generate(a) => generate(a),
        Command::Stats(a) => stats(a),
        Command::Dist(a) => dist(a),
        Command::Serve(a) => serve(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// Files named directly plus the `*.json` files of named directories.
fn expand(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            out.extend(json_files(p)?);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

fn load_graphs(paths: &[PathBuf]) -> Result<Vec<Adg>> {
    let mut graphs: Vec<Adg> = Vec::new();
    for path in expand(paths)? {
        let adg = load_adg(&read(&path)?).with_context(|| format!("loading {}", path.display()))?;
        if graphs.iter().any(|g| g.prompt_id == adg.prompt_id) {
            bail!("{}: a second graph for prompt {:?}", path.display(), adg.prompt_id);
        }
        graphs.push(adg);
    }
    Ok(graphs)
}

fn load_corpus(path: &Path) -> Result<Corpus> {
    load_corpus_path(path).with_context(|| format!("loading {}", path.display()))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ProviderFile {
    One(ProviderSpec),
    Many(Vec<ProviderSpec>),
}

impl ProviderArgs {
    fn specs(&self) -> Result<Vec<ProviderSpec>> {
        let Some(path) = &self.provider_config else { return Ok(Vec::new()) };
        let file: ProviderFile =
            serde_json::from_str(&read(path)?).with_context(|| format!("parsing {}", path.display()))?;
        Ok(match file {
            ProviderFile::One(s) => vec![s],
            ProviderFile::Many(v) => v,
        })
    }

    fn align_config(&self) -> Result<AlignConfig> {
        let mut config = AlignConfig::default();
        if let Some(t) = self.threshold {
            config.threshold = t;
        }
        config.check()?;
        Ok(config)
    }

    fn provider(&self, graphs: &[Adg]) -> Result<Arc<dyn SimilarityProvider>> {
        let documents: Vec<&str> = graphs.iter().flat_map(|g| g.nodes.iter().map(|n| n.text.as_str())).collect();
        Ok(build_provider(&self.specs()?, &documents)?)
    }
}

#[derive(Serialize)]
struct FileReport {
    path: String,
    report: ValidationReport,
}

fn validate(args: ValidateArgs) -> Result<i32> {
    if args.adg.is_empty() && args.templates.is_none() && args.corpus.is_none() {
        bail!("nothing to validate: give --adg, --templates or --corpus");
    }
    let load_failure = |code: &str, message: String| {
        ValidationReport::from_findings(vec![Finding::error(code, Subject::Graph, message)])
    };
    let mut files: Vec<FileReport> = Vec::new();

    let mut prompts = Vec::new();
    if let Some(path) = &args.corpus {
        let report = match load_corpus_path(path) {
            Ok(corpus) => {
                let report = ValidationReport::from_findings(corpus.warnings());
                prompts = corpus.prompts;
                report
            }
            Err(e) => load_failure(e.code(), e.to_string()),
        };
        files.push(FileReport { path: path.display().to_string(), report });
    }

    let registry = match &args.templates {
        Some(path) => match TemplateRegistry::parse(&read(path)?) {
            Ok(r) => Some((path, r)),
            Err(e) => {
                files.push(FileReport {
                    path: path.display().to_string(),
                    report: load_failure(e.code(), e.to_string()),
                });
                None
            }
        },
        None => None,
    };

    let mut registry_report: Option<ValidationReport> = None;
    for path in expand(&args.adg)? {
        let report = match parse_adg(&read(&path)?) {
            Ok(adg) => {
                let graph_report = match &registry {
                    Some((_, r)) => {
                        let has_key = |key: &str| r.has_key(key);
                        validate_graph_with(&adg, Some(&has_key))
                    }
                    None => validate_graph_with(&adg, None),
                };
                if let Some((_, r)) = &registry {
                    let found = validate_registry(r, &adg, &prompts);
                    registry_report = Some(match registry_report.take() {
                        // the same registry defect seen from two graphs is one finding
                        Some(prev) => dedup(prev.merge(found)),
                        None => found,
                    });
                }
                graph_report
            }
            Err(e) => load_failure(e.code(), e.to_string()),
        };
        files.push(FileReport { path: path.display().to_string(), report });
    }
    if let (Some((path, _)), Some(report)) = (&registry, registry_report) {
        files.push(FileReport { path: path.display().to_string(), report });
    }

    let errors: usize = files.iter().map(|f| f.report.errors().count()).sum();
    let warnings: usize = files.iter().map(|f| f.report.warnings().count()).sum();
    if args.json {
        println!("{}", serde_json::to_string_pretty(&json!({ "ok": errors == 0, "files": files }))?);
    } else {
        for f in &files {
            for finding in &f.report.findings {
                println!("{}: {finding}", f.path);
            }
        }
        if errors == 0 {
            println!("ok ({warnings} warning(s))");
        } else {
            println!("failed: {errors} error(s), {warnings} warning(s)");
        }
    }
    Ok(if errors == 0 { 0 } else { 1 })
}

fn dedup(report: ValidationReport) -> ValidationReport {
    let mut findings = report.findings;
    findings.dedup();
    ValidationReport::from_findings(findings)
}

fn graph_for<'a>(graphs: &'a [Adg], prompt_id: &str) -> Result<&'a Adg> {
    graphs.iter().find(|g| g.prompt_id == prompt_id).ok_or_else(|| anyhow!("no graph for prompt {prompt_id:?}"))
}

fn align(args: AlignArgs) -> Result<i32> {
    let corpus = load_corpus(&args.corpus)?;
    let graphs = load_graphs(&args.adg)?;
    let provider = args.provider.provider(&graphs)?;
    let config = args.provider.align_config()?;

    let mut results: Vec<AlignmentResult> = Vec::new();
    for response in &corpus.responses {
        let adg = graph_for(&graphs, &response.prompt_id)?;
        for criterion in response.per_criterion.keys() {
            if let Some(cue) = cue_text(response, criterion)? {
                results.push(
                    align_cue(adg, &cue, provider.as_ref(), &config)
                        .with_context(|| format!("response {} criterion {criterion}", response.response_id))?
                        .with_subject(&response.response_id, criterion),
                );
            }
        }
    }
    let accuracy =
        if args.oracle { Some(alignment_accuracy(&corpus, &graphs, provider.as_ref(), &config)?) } else { None };

    if args.json {
        println!("{}", serde_json::to_string_pretty(&json!({ "alignments": results, "accuracy": accuracy }))?);
        return Ok(0);
    }
    for r in &results {
        println!(
            "{}\t{}\t{}\t{:.4}\t{:.4}\t{}",
            r.response_id,
            r.criterion_id,
            r.node_id,
            r.similarity,
            r.margin,
            if r.aligned { "aligned" } else { "unaligned" }
        );
    }
    if let Some(a) = accuracy {
        let top1 = a.top1.map_or_else(|| "n/a".to_string(), |t| format!("{t:.4}"));
        let margin = a.mean_margin.map_or_else(|| "n/a".to_string(), |m| format!("{m:.4}"));
        println!(
            "top1={top1} correct={} evaluated={} skipped={} mean_margin={margin}",
            a.correct, a.evaluated, a.skipped
        );
        for (cell, n) in &a.confusion {
            println!("confusion {cell}\t{n}");
        }
    }
    Ok(0)
}

/// File stem for a response id; anything outside `[A-Za-z0-9._-]` becomes `_`.
fn file_stem(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || "._-".contains(c) { c } else { '_' }).collect()
}

fn generate(args: GenerateArgs) -> Result<i32> {
    let corpus = load_corpus(&args.corpus)?;
    let graphs = load_graphs(&args.adg)?;
    let registry = match &args.templates {
        Some(path) => TemplateRegistry::load(&read(path)?).with_context(|| format!("loading {}", path.display()))?,
        None => TemplateRegistry::builtin(),
    };
    let provider = args.provider.provider(&graphs)?;
    let config = FeedbackConfig { align: args.provider.align_config()?, language: args.language.clone() };

    for id in &args.responses {
        if corpus.response(id).is_none() {
            bail!("unknown response {id:?}");
        }
    }
    let selected: Vec<_> = corpus
        .responses
        .iter()
        .filter(|r| args.responses.is_empty() || args.responses.contains(&r.response_id))
        .collect();

    let mut reports: Vec<FeedbackReport> = Vec::with_capacity(selected.len());
    // responses are grouped by prompt, keeping corpus order within a prompt
    let mut by_prompt: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in selected.iter().enumerate() {
        by_prompt.entry(r.prompt_id.as_str()).or_default().push(i);
    }
    let mut slots: Vec<Option<FeedbackReport>> = vec![None; selected.len()];
    for (prompt_id, indices) in by_prompt {
        let adg = graph_for(&graphs, prompt_id)?;
        let prompt = corpus.prompt(prompt_id).ok_or_else(|| anyhow!("unknown prompt {prompt_id:?}"))?;
        let group: Vec<_> = indices.iter().map(|&i| selected[i]).collect();
        let out = if args.sequential {
            group
                .iter()
                .map(|r| adg_feedback::generate_feedback(adg, &registry, prompt, r, provider.as_ref(), &config))
                .collect::<Result<Vec<_>, _>>()?
        } else {
            generate_batch(adg, &registry, prompt, group.iter().copied(), provider.as_ref(), &config)?
        };
        for (i, report) in indices.into_iter().zip(out) {
            slots[i] = Some(report);
        }
    }
    reports.extend(slots.into_iter().map(|r| r.expect("every response has a report")));

    match &args.out {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            for report in &reports {
                let stem = file_stem(&report.response_id);
                if matches!(args.format, Format::Json | Format::Both) {
                    fs::write(dir.join(format!("{stem}.json")), report.to_json() + "\n")?;
                }
                if matches!(args.format, Format::Text | Format::Both) {
                    fs::write(dir.join(format!("{stem}.txt")), report.to_text())?;
                }
            }
            println!("wrote {} report(s) to {}", reports.len(), dir.display());
        }
        None => match args.format {
            Format::Text => {
                for report in &reports {
                    println!("== {}", report.response_id);
                    print!("{}", report.to_text());
                }
            }
            Format::Json | Format::Both => println!("{}", serde_json::to_string_pretty(&reports)?),
        },
    }
    Ok(0)
}

#[derive(Serialize)]
struct TableOutcome {
    table: String,
    rows: Vec<RowOutcome>,
}

fn stats(args: StatsArgs) -> Result<i32> {
    let options = ChiSquareOptions { expected: None, yates: args.yates };
    let scale = |default: MarkerScale| args.scale.map_or(default, MarkerScale::from);
    let mut tables = Vec::new();
    let mut run = |name: &str, path: &Option<PathBuf>, f: &dyn Fn(&str) -> Result<Vec<RowOutcome>>| -> Result<()> {
        if let Some(path) = path {
            let rows = f(&read(path)?).with_context(|| format!("{name}: {}", path.display()))?;
            tables.push(TableOutcome { table: name.to_string(), rows });
        }
        Ok(())
    };
    run("table1", &args.table1, &|t| Ok(t_table(t, scale(MarkerScale::ThreeLevel))?))?;
    run("table2", &args.table2, &|t| Ok(count_table(t, scale(MarkerScale::ThreeLevel), &options)?))?;
    // the Likert table's legend only distinguishes ** from ns
    run("table3", &args.table3, &|t| Ok(likert_table(t, scale(MarkerScale::TwoLevel), &options)?))?;
    run("table5", &args.table5, &|t| Ok(t_table(t, scale(MarkerScale::ThreeLevel))?))?;
    if tables.is_empty() {
        bail!("no table given: use --table1, --table2, --table3 or --table5");
    }

    let compared: Vec<bool> = tables.iter().flat_map(|t| t.rows.iter().filter_map(RowOutcome::matches)).collect();
    let matched = compared.iter().filter(|m| **m).count();
    let all_match = matched == compared.len();
    if args.json {
        println!("{}", serde_json::to_string_pretty(&json!({ "tables": tables, "all_match": all_match }))?);
    } else {
        for t in &tables {
            println!("# {}", t.table);
            for row in &t.rows {
                println!("{}", row.line());
            }
        }
        println!("reproduced {matched}/{} published row(s)", compared.len());
    }
    Ok(if all_match { 0 } else { 1 })
}

#[derive(Serialize)]
struct PointValue {
    kind: String,
    statistic: f64,
    df: f64,
    p_value: f64,
}

fn dist(args: DistArgs) -> Result<i32> {
    let text = if args.points.as_os_str() == "-" {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s)?;
        s
    } else {
        read(&args.points)?
    };
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        let [kind, stat, df] = f[..] else { bail!("line {}: expected kind, statistic, df", i + 1) };
        let statistic: f64 = stat.parse().with_context(|| format!("line {}: statistic", i + 1))?;
        let df: f64 = df.parse().with_context(|| format!("line {}: df", i + 1))?;
        if df.is_nan() || df <= 0.0 {
            bail!("line {}: df must be positive", i + 1);
        }
        let p_value = match kind {
            "t" => t_two_sided(statistic, df),
            "chi2" if statistic >= 0.0 => chi_square_sf(statistic, df),
            "chi2" => bail!("line {}: chi-square statistic must be non-negative", i + 1),
            other => bail!("line {}: unknown distribution {other:?} (t or chi2)", i + 1),
        };
        values.push(PointValue { kind: kind.to_string(), statistic, df, p_value });
    }
    if args.json {
        println!("{}", serde_json::to_string_pretty(&values)?);
    } else {
        let stdout = io::stdout();
        let mut out = stdout.lock();
        for v in &values {
            writeln!(out, "{}\t{}\t{}\t{:.15e}", v.kind, v.statistic, v.df, v.p_value)?;
        }
    }
    Ok(0)
}

fn serve(args: ServeArgs) -> Result<i32> {
    let mut config = match &args.config {
        Some(path) => serde_json::from_str::<ServiceConfig>(&read(path)?)
            .with_context(|| format!("parsing {}", path.display()))?,
        None => {
            let dir = args.data_dir.as_ref().ok_or_else(|| anyhow!("give --config or --data-dir"))?;
            ServiceConfig::new(dir)
        }
    };
    if let Some(dir) = args.data_dir {
        config.data_dir = dir;
    }
    if let Some(listen) = args.listen {
        config.listen = listen;
    }
    if let Some(language) = args.language {
        config.language = language;
    }
    if args.token.is_some() {
        config.auth_token = args.token;
    }
    if args.provider_config.is_some() {
        let p = ProviderArgs { provider_config: args.provider_config, threshold: None };
        config.providers = p.specs()?;
    }

    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .with_writer(io::stderr)
        .init();
    let (app, warnings) = App::open(config)?;
    for w in warnings.findings.iter().filter(|f| f.severity == Severity::Warning) {
        tracing::warn!("{w}");
    }
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(crate::api::serve(Arc::new(app)))?;
    Ok(0)
}
