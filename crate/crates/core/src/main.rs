//! Command-line entry point.
//!
//! Exit codes: 0 success, 2 config error, 3 data error, 4 partial grid.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use graphaug::augment::{apply, AugmenterSpec};
use graphaug::contrastive::{linear_eval_f1, train_contrastive, ContrastiveConfig};
use graphaug::error::Error;
use graphaug::harness::{
    benchmark_grid, emit_table, load_report, parse_config, parse_grid,
    run_experiment_with_artifacts, save_report, TableFormat,
};
use graphaug::io::{load_graph, save_graph, GraphFormat};
use graphaug::synthetic::{GraphDatasetParams, GraphSample, SbmParams};

#[derive(Parser)]
#[command(name = "graphaug", version, about = "Graph data augmentation toolkit and GNN benchmark harness")]
struct Cli {
    /// Config file for the chosen subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (reports, traces, tables). Given before the
    /// subcommand; `augment` and `gen-synthetic` take their own `--out`
    /// file argument after the subcommand name.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads for multi-seed runs (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Apply one augmentation spec to a graph file.
    Augment(AugmentArgs),
    /// Run a supervised multi-seed experiment from a config.
    Train,
    /// Run the contrastive pipeline from a config.
    Contrastive,
    /// Run a models x augmentations x datasets grid from a config.
    Benchmark,
    /// Generate a synthetic dataset.
    GenSynthetic(GenArgs),
    /// Re-render stored report JSON files as a table.
    Report(ReportArgs),
}

#[derive(Args)]
struct AugmentArgs {
    /// Input graph file.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = GraphFormat::GraphJson)]
    format: GraphFormat,
    /// Augmentation spec JSON file.
    #[arg(long)]
    spec: PathBuf,
    /// Output graph file (same format as input).
    #[arg(long = "out")]
    output: PathBuf,
}

#[derive(Args)]
struct GenArgs {
    /// "node" for one SBM node-classification graph, "graphs" for a
    /// graph-classification directory.
    #[arg(long, default_value = "node")]
    kind: String,
    /// Destination: a graph-json path for "node", a directory for "graphs".
    #[arg(long = "out")]
    output: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Report JSON files or directories containing them.
    #[arg(long = "in", required = true, num_args = 1..)]
    inputs: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = TableFormat::Markdown)]
    format: TableFormat,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        _ => 3,
    }
}

fn require_config(cli: &Cli) -> graphaug::Result<&Path> {
    cli.config
        .as_deref()
        .ok_or_else(|| Error::Config("this subcommand needs --config <path>".into()))
}

fn run(cli: Cli) -> graphaug::Result<ExitCode> {
    fs::create_dir_all(&cli.out).map_err(|e| Error::io(cli.out.display().to_string(), e))?;
    match &cli.command {
        Command::Augment(args) => {
            let loaded = load_graph(&args.input, args.format)?;
            for w in &loaded.warnings {
                eprintln!("warning: {w}");
            }
            let spec_text = fs::read_to_string(&args.spec)
                .map_err(|e| Error::io(args.spec.display().to_string(), e))?;
            let spec: AugmenterSpec = serde_json::from_str(&spec_text)
                .map_err(|e| Error::Config(format!("{}: {e}", args.spec.display())))?;
            let augmented = apply(&spec, &loaded.graph)?;
            save_graph(&augmented, &args.output, args.format)?;
            println!(
                "augmented {} -> {} ({} nodes, {} edges)",
                args.input.display(),
                args.output.display(),
                augmented.num_nodes(),
                augmented.num_edges()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Train => {
            let mut cfg = parse_config(require_config(&cli)?)?;
            if let Some(seed) = cli.seed {
                cfg.base_seed = seed;
            }
            let traces = cli.out.join("traces");
            let report = with_jobs(cli.jobs, || {
                run_experiment_with_artifacts(&cfg, Some(&traces))
            })?;
            for w in &report.metadata.dataset_warnings {
                eprintln!("warning: {w}");
            }
            let report_dir = cli.out.join("reports");
            fs::create_dir_all(&report_dir)
                .map_err(|e| Error::io(report_dir.display().to_string(), e))?;
            let name = format!(
                "{}_{}_{}.json",
                report.model_name, report.method_name, report.dataset_name
            );
            let report_path = report_dir.join(name);
            save_report(&report, &report_path)?;
            println!(
                "{} {} on {}: {} (report: {})",
                report.model_name,
                report.method_name,
                report.dataset_name,
                graphaug::harness::format_cell(report.mean, report.std),
                report_path.display()
            );
            if report.partial {
                eprintln!("warning: some seeds failed; report marked partial");
                return Ok(ExitCode::from(4));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Contrastive => {
            let path = require_config(&cli)?;
            let text =
                fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
            let mut file_cfg: ContrastiveFileConfig = serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            if let Some(seed) = cli.seed {
                file_cfg.pipeline.seed = seed;
            }
            let dataset = file_cfg.dataset.realize()?;
            let outcome = train_contrastive(&dataset, &file_cfg.pipeline)?;
            let f1 = linear_eval_f1(&outcome.model, &dataset, file_cfg.pipeline.seed)?;

            let trace_path = cli.out.join("contrastive_loss.csv");
            let mut csv = String::from("epoch,loss\n");
            for (epoch, loss) in outcome.loss_trace.iter().enumerate() {
                csv.push_str(&format!("{epoch},{loss}\n"));
            }
            fs::write(&trace_path, csv)
                .map_err(|e| Error::io(trace_path.display().to_string(), e))?;

            let pair: Vec<&str> = file_cfg.pipeline.pool.iter().map(|s| s.kind_name()).collect();
            let result = serde_json::json!({
                "f1": f1,
                "pair": pair,
                "seed": file_cfg.pipeline.seed,
            });
            let result_path = cli.out.join("contrastive_result.json");
            let mut text = serde_json::to_string_pretty(&result).expect("result serializes");
            text.push('\n');
            fs::write(&result_path, text)
                .map_err(|e| Error::io(result_path.display().to_string(), e))?;
            println!(
                "contrastive f1 {:.4} (loss {:.4} -> {:.4}); results in {}",
                f1,
                outcome.loss_trace.first().unwrap_or(&0.0),
                outcome.loss_trace.last().unwrap_or(&0.0),
                cli.out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Benchmark => {
            let mut grid = parse_grid(require_config(&cli)?)?;
            if let Some(seed) = cli.seed {
                grid.base_seed = seed;
            }
            let (reports, partial) = with_jobs(cli.jobs, || Ok(benchmark_grid(&grid)))?;
            let report_dir = cli.out.join("reports");
            fs::create_dir_all(&report_dir)
                .map_err(|e| Error::io(report_dir.display().to_string(), e))?;
            for report in &reports {
                let name = format!(
                    "{}_{}_{}.json",
                    report.model_name, report.method_name, report.dataset_name
                );
                save_report(report, report_dir.join(name))?;
            }
            for (format, file) in [
                (TableFormat::Markdown, "table.md"),
                (TableFormat::Csv, "table.csv"),
                (TableFormat::Json, "table.json"),
            ] {
                let table = emit_table(&reports, format)?;
                let path = cli.out.join(file);
                fs::write(&path, table).map_err(|e| Error::io(path.display().to_string(), e))?;
            }
            println!("{}", emit_table(&reports, TableFormat::Markdown)?);
            println!("{} cells -> {}", reports.len(), cli.out.display());
            if partial {
                eprintln!("warning: grid partially failed");
                return Ok(ExitCode::from(4));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::GenSynthetic(args) => {
            let path = require_config(&cli)?;
            let text =
                fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
            match args.kind.as_str() {
                "node" => {
                    let mut params: SbmParams = serde_json::from_str(&text)
                        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                    if let Some(seed) = cli.seed {
                        params.seed = seed;
                    }
                    let g = params.generate()?;
                    save_graph(&g, &args.output, GraphFormat::GraphJson)?;
                    println!(
                        "wrote {} ({} nodes, {} edges)",
                        args.output.display(),
                        g.num_nodes(),
                        g.num_edges()
                    );
                }
                "graphs" => {
                    let mut params: GraphDatasetParams = serde_json::from_str(&text)
                        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                    if let Some(seed) = cli.seed {
                        params.seed = seed;
                    }
                    let samples = params.generate()?;
                    fs::create_dir_all(&args.output)
                        .map_err(|e| Error::io(args.output.display().to_string(), e))?;
                    for (i, s) in samples.iter().enumerate() {
                        let p = args.output.join(format!("graph_{i:04}.json"));
                        save_graph(&s.graph, &p, GraphFormat::GraphJson)?;
                    }
                    println!("wrote {} graphs to {}", samples.len(), args.output.display());
                }
                other => {
                    return Err(Error::Config(format!(
                        "unknown synthetic kind `{other}` (expected node|graphs)"
                    )))
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Report(args) => {
            let mut reports = Vec::new();
            for input in &args.inputs {
                if input.is_dir() {
                    let mut files: Vec<PathBuf> = fs::read_dir(input)
                        .map_err(|e| Error::io(input.display().to_string(), e))?
                        .filter_map(|entry| entry.ok().map(|e| e.path()))
                        .filter(|p| p.extension().is_some_and(|x| x == "json"))
                        .collect();
                    files.sort();
                    for f in files {
                        reports.push(load_report(&f)?);
                    }
                } else {
                    reports.push(load_report(input)?);
                }
            }
            let table = emit_table(&reports, args.format)?;
            let file = match args.format {
                TableFormat::Markdown => "table.md",
                TableFormat::Csv => "table.csv",
                TableFormat::Json => "table.json",
            };
            let path = cli.out.join(file);
            fs::write(&path, &table).map_err(|e| Error::io(path.display().to_string(), e))?;
            print!("{table}");
            Ok(ExitCode::SUCCESS)
        }
    }
}

/// Runs `f` inside a rayon pool sized by `--jobs` (0 keeps the default).
fn with_jobs<T>(jobs: usize, f: impl FnOnce() -> graphaug::Result<T> + Send) -> graphaug::Result<T>
where
    T: Send,
{
    if jobs == 0 {
        f()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
        pool.install(f)
    }
}

/// Contrastive run description: a dataset source plus the pipeline config.
#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct ContrastiveFileConfig {
    dataset: ContrastiveDataset,
    pipeline: ContrastiveConfig,
}

#[derive(serde::Deserialize)]
#[serde(rename_all = "snake_case")]
enum ContrastiveDataset {
    /// Directory of graph-json files; the graph label is the (uniform) node
    /// label each file carries.
    Dir(PathBuf),
    Synthetic(GraphDatasetParams),
}

impl ContrastiveDataset {
    fn realize(&self) -> graphaug::Result<Vec<GraphSample>> {
        match self {
            ContrastiveDataset::Dir(dir) => {
                let mut files: Vec<PathBuf> = fs::read_dir(dir)
                    .map_err(|e| Error::io(dir.display().to_string(), e))?
                    .filter_map(|entry| entry.ok().map(|e| e.path()))
                    .filter(|p| p.extension().is_some_and(|x| x == "json"))
                    .collect();
                files.sort();
                if files.is_empty() {
                    return Err(Error::Validation(format!(
                        "no graph-json files in {}",
                        dir.display()
                    )));
                }
                files
                    .iter()
                    .map(|f| {
                        let loaded = load_graph(f, GraphFormat::GraphJson)?;
                        let label = loaded
                            .graph
                            .labels()
                            .and_then(|ls| ls.first().copied())
                            .ok_or_else(|| {
                                Error::Validation(format!(
                                    "{}: graph-level label missing (node labels empty)",
                                    f.display()
                                ))
                            })?;
                        Ok(GraphSample {
                            graph: loaded.graph,
                            label,
                        })
                    })
                    .collect()
            }
            ContrastiveDataset::Synthetic(params) => params.generate(),
        }
    }
}
