//! Subcommands of the `voxgram` binary.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{ArgAction, Args, Parser, Subcommand};
use voxgram::grammar;
use voxgram::inference;
use voxgram::metrics::{self, Grid};
use voxgram::production::{self, ConflictPolicy};
use voxgram::{corpus, InferenceParams, SearchOps, ShapeGrammar, ShapeId, ShapeSet, ShapeSpec, VoxelModel};

use crate::api;

#[derive(Debug, Parser)]
#[command(name = "voxgram", version, about = "Learn shape grammars from voxel buildings and generate new ones")]
pub struct Cli {
    /// More log output (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Infer a shape set from a voxel model.
    Infer(InferArgs),
    /// Induce a grammar from one or more shape sets.
    Induce(InduceArgs),
    /// Derive a new model from a grammar.
    Generate(GenerateArgs),
    /// Sweep inference parameters over a corpus and write CSV statistics.
    Stats(StatsArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
    /// Write the bundled corpus as voxel JSON files.
    Corpus(CorpusArgs),
}

fn non_negative(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if !v.is_finite() || v < 0.0 {
        return Err(format!("must be a finite number >= 0, got {s}"));
    }
    Ok(v)
}

#[derive(Debug, Args)]
pub struct InferArgs {
    /// Voxel JSON file.
    pub model: PathBuf,
    /// Shape specification: rect, 2d or 3d.
    #[arg(long, default_value = "rect")]
    pub spec: ShapeSpec,
    /// Weight of the shape-count term in the cost.
    #[arg(long, default_value = "1", value_parser = non_negative, allow_negative_numbers = true)]
    pub alpha: f64,
    /// Search operations: merge, split or both.
    #[arg(long, default_value = "both")]
    pub ops: SearchOps,
    /// Let shapes share blocks (planar specs only).
    #[arg(long)]
    pub overlap: bool,
    /// Accept merges that leave the cost unchanged.
    #[arg(long, default_value_t = true, action = ArgAction::Set)]
    pub plateau: bool,
    /// Stop after this many accepted operations.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub max_steps: Option<u64>,
    /// Output file; stdout if omitted.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InduceArgs {
    /// Shape-set JSON files.
    #[arg(required = true)]
    pub shape_sets: Vec<PathBuf>,
    /// Initial shape id; the first shape by default.
    #[arg(long)]
    pub initial: Option<u32>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Grammar JSON file.
    pub grammar: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 50)]
    pub max_steps: usize,
    /// Start from this shape instead of the grammar's initial shape.
    #[arg(long)]
    pub initial: Option<u32>,
    /// Apply the enclosure constraint after generation.
    #[arg(long)]
    pub enclosure: bool,
    /// reject or keep-existing.
    #[arg(long, default_value = "reject")]
    pub policy: ConflictPolicy,
    /// Output voxel model; stdout if omitted.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Also write the production (placements and history) here.
    #[arg(long)]
    pub production: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Directory of voxel JSON files; the bundled corpus if omitted.
    pub corpus: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_values = ["rect", "2d", "3d"])]
    pub spec: Vec<ShapeSpec>,
    #[arg(long, value_delimiter = ',', default_values = ["0", "0.5", "1", "2", "5", "100"], value_parser = non_negative, allow_negative_numbers = true)]
    pub alpha: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values = ["merge", "split", "both"])]
    pub ops: Vec<SearchOps>,
    #[arg(long, value_delimiter = ',', default_values = ["false", "true"], action = ArgAction::Set)]
    pub overlap: Vec<bool>,
    /// Write 0 for wall time so the CSV is reproducible.
    #[arg(long)]
    pub no_timing: bool,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "VOXGRAM_PORT", default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Directory of voxel JSON files served under /corpus; the bundled corpus
    /// if omitted.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    /// Directory to write into; created if missing.
    #[arg(short, long)]
    pub output: PathBuf,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Infer(a) => infer(a),
        Command::Induce(a) => induce(a),
        Command::Generate(a) => generate(a),
        Command::Stats(a) => stats(a),
        Command::Serve(a) => serve(a),
        Command::Corpus(a) => write_corpus(a),
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, format!("{text}\n")).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            writeln!(out, "{text}")?;
            Ok(())
        }
    }
}

fn infer(a: InferArgs) -> Result<()> {
    let m = VoxelModel::load_example(&read(&a.model)?).with_context(|| format!("loading {}", a.model.display()))?;
    let mut params = InferenceParams::new(a.spec, a.alpha, a.ops)
        .with_overlap(a.overlap)
        .with_plateau_merges(a.plateau);
    if let Some(n) = a.max_steps {
        params = params.with_max_steps(n as usize);
    }
    let set = inference::hill_climb(&m, &params)?;
    log::info!("{}: {} shapes, cost {}", m.name(), set.len(), set.cost(a.alpha));
    write_out(a.output.as_deref(), &set.to_json_pretty())
}

fn induce(a: InduceArgs) -> Result<()> {
    let sets = a
        .shape_sets
        .iter()
        .map(|p| ShapeSet::from_json(&read(p)?).with_context(|| format!("loading {}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    let g = grammar::induce_with_initial(&sets, a.initial.map(ShapeId))?;
    log::info!(
        "{} shapes, {} classes, {} rules",
        g.shapes().len(),
        g.classes().len(),
        g.rules().len()
    );
    write_out(a.output.as_deref(), &g.to_json_pretty())
}

fn generate(a: GenerateArgs) -> Result<()> {
    let g = ShapeGrammar::from_json(&read(&a.grammar)?).with_context(|| format!("loading {}", a.grammar.display()))?;
    let mut p = production::generate_from(&g, a.initial.map(ShapeId), a.seed, a.max_steps, a.policy)?;
    eprintln!("seed {}: placed {} shapes", a.seed, p.placed().len());
    if a.enclosure {
        let report = p.enclose()?;
        eprintln!(
            "enclosure removed {} shapes in {} rounds",
            report.removed(),
            report.rounds.len()
        );
    }
    if let Some(path) = &a.production {
        write_out(Some(path), &p.to_json_pretty())?;
    }
    let model = p.to_model(&format!("generated-{}", a.seed));
    write_out(a.output.as_deref(), &model.to_json_pretty())
}

/// Loads every `*.json` file in `dir`, in file-name order.
pub fn load_corpus_dir(dir: &Path) -> Result<Vec<VoxelModel>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("no .json models in {}", dir.display());
    }
    paths
        .iter()
        .map(|p| VoxelModel::load_example(&read(p)?).with_context(|| format!("loading {}", p.display())))
        .collect()
}

fn stats(a: StatsArgs) -> Result<()> {
    let models = match &a.corpus {
        Some(dir) => load_corpus_dir(dir)?,
        None => corpus::all(),
    };
    let grid = Grid {
        specs: a.spec,
        alphas: a.alpha,
        ops: a.ops,
        overlaps: a.overlap,
        timing: !a.no_timing,
    };
    let report = metrics::run_grid(&models, &grid)?;
    let csv = report.to_csv()?;
    match &a.output {
        Some(p) => fs::write(p, csv).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().lock().write_all(csv.as_bytes())?;
            Ok(())
        }
    }
}

fn serve(a: ServeArgs) -> Result<()> {
    let models = match &a.corpus {
        Some(dir) => load_corpus_dir(dir)?,
        None => corpus::all(),
    };
    let state = Arc::new(api::AppState::new(models));
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let addr = format!("{}:{}", a.host, a.port);
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .with_context(|| format!("binding {addr}"))?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        axum::serve(listener, api::router(state)).await?;
        Ok(())
    })
}

fn write_corpus(a: CorpusArgs) -> Result<()> {
    fs::create_dir_all(&a.output).with_context(|| format!("creating {}", a.output.display()))?;
    let mut models = corpus::all();
    models.push(corpus::small_facade());
    for m in models {
        let path = a.output.join(format!("{}.json", m.name()));
        write_out(Some(&path), &m.to_json_pretty())?;
    }
    Ok(())
}
