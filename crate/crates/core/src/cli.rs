//! Command-line front end. Artifacts go to files under `--out-dir`, logs to
//! stderr, and a JSON or text summary to stdout.
//!
//! Exit codes: 0 success, 1 a stage failed, 2 bad usage or configuration.

use crate::asset_library::{ingest, load_library, IngestOptions, LibraryManifest};
use crate::embedding_store::VectorIndex;
use crate::evaluation::{
    bradley_terry, load_trials, to_elo, top_k_accuracy, win_matrix, win_rates, BtOptions, JudgmentSet,
    DEFAULT_BT_MAX_ITER, DEFAULT_BT_TOLERANCE,
};
use crate::geometry::{Aabb, DEFAULT_COLLISION_BUFFER};
use crate::layout::{audit_to_jsonl, build_scene, BuildOptions};
use crate::model_provider::{LiveBackend, LiveConfig, PromptFrame, PromptLibrary, Provider, ScriptedFixture};
use crate::retrieval::{retrieve_scene_assets, RetrievalOptions, RetrievalReport, DEFAULT_SHORTLIST_K};
use crate::scene_model::{export_gltf, validate, SceneDocument, Tolerances};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::json;
use std::ffi::OsString;
use std::path::{Component, Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_STAGE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "sceneforge", version, about = "Build 3D scenes from text with a captioned asset library")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML run configuration; flags override it
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Directory for every file this run writes [default: out]
    #[arg(long, global = true, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
    /// Model backend
    #[arg(long, global = true, value_enum)]
    pub provider: Option<ProviderKind>,
    /// Scripted replies (JSON) for the scripted provider
    #[arg(long, global = true, value_name = "FILE")]
    pub fixture: Option<PathBuf>,
    /// Asset library directory, relative to the output directory [default: library]
    #[arg(long, global = true, value_name = "DIR")]
    pub library: Option<PathBuf>,
    /// Coordinate convention used in prompts
    #[arg(long, global = true, value_enum)]
    pub frame: Option<FrameArg>,
    /// error, warn, info, debug or trace [default: warn]
    #[arg(long, global = true, value_name = "LEVEL")]
    pub log_level: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Measure, orient, caption and embed every mesh in a directory
    Ingest {
        /// Directory of .obj/.gltf/.glb files with their rendered views
        #[arg(long, value_name = "DIR")]
        assets: PathBuf,
        /// Keep every asset's front offset at zero
        #[arg(long)]
        skip_orientation: bool,
        /// Assets processed concurrently
        #[arg(long, default_value_t = 4)]
        concurrency: usize,
    },
    /// Select library assets for a scene description
    Retrieve {
        #[arg(long)]
        prompt: String,
        /// Shortlist size per object
        #[arg(long)]
        k: Option<usize>,
        /// Keep at most this many object types
        #[arg(long, value_name = "N")]
        objects: Option<usize>,
    },
    /// Retrieve assets, then place and refine them into scene.json
    Build {
        #[arg(long)]
        prompt: String,
        /// Room size as WIDTHxDEPTHxHEIGHT, e.g. 5x5x3
        #[arg(long, value_name = "WxDxH")]
        bounds: String,
        /// Reuse a retrieval.json instead of retrieving
        #[arg(long, value_name = "FILE")]
        retrieval: Option<PathBuf>,
        #[arg(long)]
        k: Option<usize>,
        /// Collision buffer in scene units
        #[arg(long)]
        buffer: Option<f64>,
        /// Refinement sweeps, 1 to 3
        #[arg(long)]
        sweeps: Option<u32>,
        #[arg(long)]
        skip_refinement: bool,
    },
    /// Check a scene's constraints against its geometry
    Validate {
        scene: PathBuf,
        /// Print the report as JSON instead of a table
        #[arg(long)]
        json: bool,
    },
    /// Write a scene as binary glTF
    ExportGltf {
        scene: PathBuf,
        /// File name inside the output directory
        #[arg(long, default_value = "scene.glb")]
        output: PathBuf,
    },
    /// Evaluation metrics
    #[command(subcommand)]
    Eval(EvalCommand),
}

#[derive(Debug, Subcommand)]
pub enum EvalCommand {
    /// Win rates, Bradley-Terry strengths and Elo from pairwise judgments
    Elo {
        /// CSV with columns item_id,model_a,model_b,winner
        #[arg(long, value_name = "FILE")]
        judgments: PathBuf,
        /// Model pinned at 1500
        #[arg(long, value_name = "NAME")]
        baseline: String,
        #[arg(long, default_value_t = DEFAULT_BT_TOLERANCE)]
        tolerance: f64,
        #[arg(long, default_value_t = DEFAULT_BT_MAX_ITER)]
        max_iter: usize,
    },
    /// Top-k accuracy of retrieval trials
    Retrieval {
        /// JSON array of {"target": id, "ranked": [ids]}
        #[arg(long, value_name = "FILE")]
        trials: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1,5,10")]
        ks: Vec<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    #[default]
    Scripted,
    Live,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FrameArg {
    ZUp,
    YUpLeft,
}

impl From<FrameArg> for PromptFrame {
    fn from(f: FrameArg) -> Self {
        match f {
            FrameArg::ZUp => PromptFrame::ZUpRightHanded,
            FrameArg::YUpLeft => PromptFrame::YUpLeftHanded,
        }
    }
}

/// The TOML run configuration. Every section and key is optional.
#[derive(Debug, Clone, PartialEq, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub out_dir: Option<PathBuf>,
    pub library: Option<PathBuf>,
    pub log_level: Option<String>,
    pub provider: ProviderConfig,
    pub retrieval: RetrievalConfig,
    pub layout: LayoutConfig,
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    pub fixture: Option<PathBuf>,
    pub frame: PromptFrame,
    pub retries: Option<u32>,
    /// Directory of `<name>.txt` files replacing built-in prompt templates.
    pub prompt_dir: Option<PathBuf>,
    /// Per-call usage log, inside the output directory.
    pub usage_log: Option<PathBuf>,
    pub live: LiveConfig,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrievalConfig {
    pub k: usize,
    pub objects: Option<usize>,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            k: DEFAULT_SHORTLIST_K,
            objects: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LayoutConfig {
    pub buffer: f64,
    pub sweeps: u32,
    pub skip_refinement: bool,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        Self {
            buffer: DEFAULT_COLLISION_BUFFER,
            sweeps: 1,
            skip_refinement: false,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }

    pub fn check(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Usage(m));
        if self.retrieval.k == 0 {
            return bad("retrieval.k must be at least 1".into());
        }
        if !(self.layout.buffer >= 0.0 && self.layout.buffer.is_finite()) {
            return bad(format!("layout.buffer must be a non-negative number, got {}", self.layout.buffer));
        }
        if !(1..=3).contains(&self.layout.sweeps) {
            return bad(format!("layout.sweeps must be 1 to 3, got {}", self.layout.sweeps));
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("vertical", t.vertical),
            ("adjacent_gap", t.adjacent_gap),
            ("facing_deg", t.facing_deg),
            ("aligned_deg", t.aligned_deg),
            ("pose_position", t.pose_position),
            ("pose_angle_deg", t.pose_angle_deg),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("tolerances.{name} must be a non-negative number, got {v}"));
            }
        }
        if let Some(level) = &self.log_level {
            level
                .parse::<log::LevelFilter>()
                .map_err(|_| CliError::Usage(format!("unknown log level {level:?}")))?;
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Stage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Stage(_) => EXIT_STAGE,
        }
    }
}

fn stage<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Stage(e.to_string())
}

/// Parses `WxDxH` into a room with its floor corner at the origin.
pub fn parse_bounds(text: &str) -> Result<Aabb, CliError> {
    let parts: Vec<&str> = text.split(['x', 'X']).collect();
    let dims: Option<Vec<f64>> = (parts.len() == 3)
        .then(|| parts.iter().map(|p| p.trim().parse::<f64>().ok()).collect())
        .flatten();
    match dims.as_deref() {
        Some([w, d, h]) => Aabb::room(*w, *d, *h).map_err(|e| CliError::Usage(format!("bad --bounds {text:?}: {e}"))),
        _ => Err(CliError::Usage(format!("bad --bounds {text:?}: expected WIDTHxDEPTHxHEIGHT"))),
    }
}

fn lexical(path: &Path) -> Option<PathBuf> {
    let mut out = PathBuf::new();
    for c in path.components() {
        match c {
            Component::ParentDir => {
                if !out.pop() {
                    return None;
                }
            }
            Component::CurDir => {}
            other => out.push(other.as_os_str()),
        }
    }
    Some(out)
}

/// Lexically resolves `path` against `root` (already normalized) and
/// refuses anything that would land outside it.
pub fn confine(root: &Path, path: &Path) -> Result<PathBuf, CliError> {
    let joined = if path.is_absolute() { path.to_path_buf() } else { root.join(path) };
    match lexical(&joined) {
        Some(out) if out.starts_with(root) => Ok(out),
        _ => Err(CliError::Usage(format!(
            "{} is outside the output directory {}",
            path.display(),
            root.display()
        ))),
    }
}

/// Everything a subcommand needs, resolved from config and flags.
pub struct Context {
    pub config: RunConfig,
    pub out_dir: PathBuf,
    pub library: PathBuf,
}

impl Context {
    pub fn resolve(global: &GlobalArgs) -> Result<Self, CliError> {
        let mut config = match &global.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(v) = &global.out_dir {
            config.out_dir = Some(v.clone());
        }
        if let Some(v) = &global.library {
            config.library = Some(v.clone());
        }
        if let Some(v) = &global.log_level {
            config.log_level = Some(v.clone());
        }
        if let Some(v) = global.provider {
            config.provider.kind = v;
        }
        if let Some(v) = &global.fixture {
            config.provider.fixture = Some(v.clone());
        }
        if let Some(v) = global.frame {
            config.provider.frame = v.into();
        }
        config.check()?;
        let out = config.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
        let out = if out.is_absolute() {
            out
        } else {
            std::env::current_dir().map_err(stage)?.join(out)
        };
        let out_dir = lexical(&out).ok_or_else(|| CliError::Usage(format!("bad output directory {}", out.display())))?;
        let library = match &config.library {
            Some(p) if p.is_absolute() => p.clone(),
            Some(p) => out_dir.join(p),
            None => out_dir.join("library"),
        };
        Ok(Self {
            config,
            out_dir,
            library,
        })
    }

    pub fn provider(&self) -> Result<Provider, CliError> {
        let pc = &self.config.provider;
        let mut provider = match pc.kind {
            ProviderKind::Scripted => {
                let fixture = match &pc.fixture {
                    Some(p) => ScriptedFixture::load(p).map_err(|e| CliError::Usage(e.to_string()))?,
                    None => ScriptedFixture::default(),
                };
                Provider::scripted(fixture)
            }
            ProviderKind::Live => {
                let cfg = pc.live.clone().with_env().map_err(|e| CliError::Usage(e.to_string()))?;
                Provider::new(Box::new(LiveBackend::new(cfg)))
            }
        }
        .with_frame(pc.frame);
        if let Some(r) = pc.retries {
            provider = provider.with_retries(r);
        }
        if let Some(dir) = &pc.prompt_dir {
            let lib = PromptLibrary::with_overrides(dir).map_err(|e| CliError::Usage(e.to_string()))?;
            provider = provider.with_templates(lib);
        }
        if let Some(log) = &pc.usage_log {
            let path = self.output(log)?;
            self.ensure_out_dir()?;
            provider = provider.with_usage_log(&path).map_err(|e| CliError::Usage(e.to_string()))?;
        }
        Ok(provider)
    }

    pub fn output(&self, name: &Path) -> Result<PathBuf, CliError> {
        confine(&self.out_dir, name)
    }

    fn ensure_out_dir(&self) -> Result<(), CliError> {
        std::fs::create_dir_all(&self.out_dir)
            .map_err(|e| CliError::Stage(format!("cannot create {}: {e}", self.out_dir.display())))
    }

    fn write(&self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.output(Path::new(name))?;
        self.ensure_out_dir()?;
        std::fs::write(&path, bytes).map_err(|e| CliError::Stage(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }

    fn library(&self) -> Result<(LibraryManifest, VectorIndex), CliError> {
        load_library(&self.library).map_err(stage)
    }
}

fn print_json(v: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("summary serializes"));
}

fn init_logging(level: Option<&str>) {
    let filter = level.and_then(|l| l.parse().ok()).unwrap_or(log::LevelFilter::Warn);
    let _ = env_logger::Builder::new()
        .filter_level(filter)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .try_init();
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let ctx = Context::resolve(&cli.global)?;
    init_logging(ctx.config.log_level.as_deref());
    match &cli.command {
        Command::Ingest {
            assets,
            skip_orientation,
            concurrency,
        } => cmd_ingest(&ctx, assets, *skip_orientation, *concurrency),
        Command::Retrieve { prompt, k, objects } => {
            let provider = ctx.provider()?;
            let report = run_retrieval(&ctx, &provider, prompt, *k, *objects)?;
            print_json(&json!({
                "retrieval": ctx.output(Path::new("retrieval.json"))?,
                "selected": report.decisions.iter().map(|d| json!({
                    "name": d.required.name, "asset_id": d.selected(), "degraded": d.degraded
                })).collect::<Vec<_>>(),
                "warnings": report.warnings,
            }));
            Ok(())
        }
        Command::Build {
            prompt,
            bounds,
            retrieval,
            k,
            buffer,
            sweeps,
            skip_refinement,
        } => {
            let bounds = parse_bounds(bounds)?;
            let options = BuildOptions {
                buffer: buffer.unwrap_or(ctx.config.layout.buffer),
                sweeps: sweeps.unwrap_or(ctx.config.layout.sweeps),
                skip_refinement: *skip_refinement || ctx.config.layout.skip_refinement,
            };
            if !(options.buffer >= 0.0 && options.buffer.is_finite()) || !(1..=3).contains(&options.sweeps) {
                return Err(CliError::Usage("--buffer must be non-negative and --sweeps 1 to 3".into()));
            }
            cmd_build(&ctx, prompt, bounds, retrieval.as_deref(), *k, &options)
        }
        Command::Validate { scene, json } => {
            let doc = SceneDocument::import_json(scene).map_err(stage)?;
            let report = validate(&doc, &ctx.config.tolerances);
            let text = serde_json::to_string_pretty(&report).expect("report serializes");
            ctx.write("validation.json", format!("{text}\n").as_bytes())?;
            if *json {
                println!("{text}");
            } else {
                print!("{}", report.to_table());
            }
            Ok(())
        }
        Command::ExportGltf { scene, output } => {
            let doc = SceneDocument::import_json(scene).map_err(stage)?;
            let (manifest, _) = ctx.library()?;
            let path = ctx.output(output)?;
            export_gltf(&doc, &manifest, &path).map_err(stage)?;
            print_json(&json!({"gltf": path, "nodes": doc.placements.len() + 1}));
            Ok(())
        }
        Command::Eval(EvalCommand::Elo {
            judgments,
            baseline,
            tolerance,
            max_iter,
        }) => {
            let set = JudgmentSet::load_csv(judgments).map_err(stage)?;
            let matrix = win_matrix(&set).map_err(stage)?;
            let options = BtOptions {
                tolerance: *tolerance,
                max_iter: *max_iter,
            };
            let fit = bradley_terry(&matrix, &options).map_err(stage)?;
            let table = to_elo(&fit, baseline).map_err(stage)?;
            let rates = win_rates(&matrix);
            let out = json!({"win_matrix": matrix, "win_rates": rates, "elo": table});
            ctx.write("elo.json", format!("{}\n", serde_json::to_string_pretty(&out).unwrap()).as_bytes())?;
            print!("{}\n{}", rates.to_table(), table.to_table());
            Ok(())
        }
        Command::Eval(EvalCommand::Retrieval { trials, ks }) => {
            let trials = load_trials(trials).map_err(stage)?;
            let acc = top_k_accuracy(&trials, ks).map_err(stage)?;
            let out = json!({
                "trials": trials.len(),
                "accuracy": acc.iter().map(|(k, a)| json!({"k": k, "accuracy": a})).collect::<Vec<_>>(),
            });
            ctx.write(
                "retrieval_accuracy.json",
                format!("{}\n", serde_json::to_string_pretty(&out).unwrap()).as_bytes(),
            )?;
            println!("{:>4}  {:>8}", "k", "top-k");
            for (k, a) in acc {
                println!("{k:>4}  {:>7.1}%", 100.0 * a);
            }
            Ok(())
        }
    }
}

fn cmd_ingest(ctx: &Context, assets: &Path, skip_orientation: bool, concurrency: usize) -> Result<(), CliError> {
    let library = confine(&ctx.out_dir, &ctx.library)?;
    let provider = ctx.provider()?;
    let options = IngestOptions {
        skip_orientation,
        concurrency,
    };
    let report = ingest(assets, &library, &provider, &options).map_err(stage)?;
    print_json(&json!({
        "library": library,
        "records": report.manifest.records.len(),
        "indexed": report.index.len(),
        "errors": report.errors.iter().map(|e| e.to_string()).collect::<Vec<_>>(),
        "warnings": report.warnings,
    }));
    Ok(())
}

fn run_retrieval(
    ctx: &Context,
    provider: &Provider,
    prompt: &str,
    k: Option<usize>,
    objects: Option<usize>,
) -> Result<RetrievalReport, CliError> {
    let options = RetrievalOptions {
        k: k.unwrap_or(ctx.config.retrieval.k),
        override_count: objects.or(ctx.config.retrieval.objects),
    };
    if options.k == 0 {
        return Err(CliError::Usage("--k must be at least 1".into()));
    }
    let (manifest, index) = ctx.library()?;
    let report = retrieve_scene_assets(prompt, &manifest, &index, provider, &options).map_err(stage)?;
    let text = serde_json::to_string_pretty(&report).expect("retrieval report serializes");
    ctx.write("retrieval.json", format!("{text}\n").as_bytes())?;
    Ok(report)
}

fn cmd_build(
    ctx: &Context,
    prompt: &str,
    bounds: Aabb,
    retrieval: Option<&Path>,
    k: Option<usize>,
    options: &BuildOptions,
) -> Result<(), CliError> {
    let provider = ctx.provider()?;
    let report = match retrieval {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| stage(format!("cannot read {}: {e}", p.display())))?;
            serde_json::from_str::<RetrievalReport>(&text).map_err(|e| stage(format!("{}: {e}", p.display())))?
        }
        None => run_retrieval(ctx, &provider, prompt, k, None)?,
    };
    let (manifest, _) = ctx.library()?;
    match build_scene(prompt, bounds, &report.decisions, &manifest, &provider, options) {
        Ok(out) => {
            let scene = ctx.output(Path::new("scene.json"))?;
            ctx.ensure_out_dir()?;
            out.document.export_json(&scene).map_err(stage)?;
            let audit = ctx.write("audit.jsonl", audit_to_jsonl(&out.audit).as_bytes())?;
            print_json(&json!({
                "scene": scene,
                "audit": audit,
                "placements": out.document.placements.len(),
                "non_benign_overlaps": out.document.collision_report.non_benign().count(),
                "warnings": out.document.warnings,
            }));
            Ok(())
        }
        Err(e) => {
            ctx.write("audit.jsonl", audit_to_jsonl(&e.audit).as_bytes())?;
            if let Some(doc) = &e.partial {
                ctx.write("scene.partial.json", doc.to_json().as_bytes())?;
            }
            Err(stage(e))
        }
    }
}
