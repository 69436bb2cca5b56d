use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use geoagg_core::datagen;
use geoagg_core::io::{self, ConfigFile, Report, RunManifest};
use geoagg_core::metrics::evaluate;
use geoagg_core::model::{AdcSeed, LogBase, PlacementApproach, SiteCountApproach};
use geoagg_core::pipeline::{run_pipeline, Stage};
use geoagg_core::render::{render_svg, MapOptions};
use geoagg_core::Error;

const EXIT_VALIDATION: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_WARNINGS: u8 = 3;

#[derive(Parser)]
#[command(
    name = "geoagg",
    version,
    about = "Aggregate geographic regions until microdata is k-anonymous"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Aggregate regions and publish the k-anonymous records.
    Anonymize(AnonymizeArgs),
    /// Generate synthetic regions and records from per-stratum distributions.
    Generate(GenerateArgs),
    /// Recompute metrics for the outputs of an earlier run.
    Evaluate(EvaluateArgs),
    /// Draw the outputs of an earlier run as SVG.
    Render(RenderArgs),
}

#[derive(Args)]
struct InputArgs {
    #[arg(long)]
    regions: PathBuf,
    #[arg(long)]
    records: PathBuf,
    #[arg(long)]
    schema: PathBuf,
}

impl InputArgs {
    fn paths(&self) -> [&Path; 3] {
        [&self.regions, &self.records, &self.schema]
    }
}

#[derive(Args)]
struct AnonymizeArgs {
    #[command(flatten)]
    inputs: InputArgs,
    /// TOML file with pipeline settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    k: Option<u64>,
    /// entropy, maxcombs or fixed:<n>
    #[arg(long)]
    site_count: Option<SiteCountApproach>,
    /// balanced or adc
    #[arg(long)]
    placement: Option<PlacementApproach>,
    /// balanced or random
    #[arg(long)]
    adc_seed: Option<AdcSeed>,
    /// western, central or eastern
    #[arg(long, conflicts_with_all = ["gaps_multiplier", "gaps_exponent"])]
    gaps_preset: Option<String>,
    #[arg(long, requires = "gaps_exponent")]
    gaps_multiplier: Option<f64>,
    #[arg(long, requires = "gaps_multiplier")]
    gaps_exponent: Option<f64>,
    /// e, 2 or 10
    #[arg(long)]
    log_base: Option<LogBase>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_moves: Option<usize>,
    #[arg(long)]
    classical_discernibility: bool,
    #[arg(long)]
    out_dir: PathBuf,
    /// Also write map.svg.
    #[arg(long)]
    map: bool,
}

impl AnonymizeArgs {
    fn flags(&self) -> ConfigFile {
        ConfigFile {
            k: self.k,
            site_count: self.site_count,
            placement: self.placement,
            adc_seed: self.adc_seed,
            gaps_preset: self.gaps_preset.clone(),
            gaps_multiplier: self.gaps_multiplier,
            gaps_exponent: self.gaps_exponent,
            log_base: self.log_base,
            seed: self.seed,
            max_moves: self.max_moves,
            classical_discernibility: self.classical_discernibility.then_some(true),
        }
    }
}

#[derive(Args)]
struct GenerateArgs {
    /// Regions file; a population column pins that region's size.
    #[arg(long)]
    templates: PathBuf,
    #[arg(long)]
    distributions: PathBuf,
    #[arg(long)]
    schema: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    inputs: InputArgs,
    /// Directory holding published.csv, region_mapping.csv and sites.csv.
    #[arg(long)]
    run_dir: PathBuf,
    #[arg(long)]
    k: u64,
    #[arg(long)]
    classical_discernibility: bool,
    /// Defaults to standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RenderArgs {
    #[command(flatten)]
    inputs: InputArgs,
    #[arg(long)]
    run_dir: PathBuf,
    /// Draw Voronoi cell boundaries.
    #[arg(long)]
    edges: bool,
    #[arg(long)]
    out: PathBuf,
}

/// A failed command: where it failed and the exit code it maps to.
struct Failure {
    stage: String,
    error: Box<dyn std::error::Error>,
    code: u8,
}

impl Failure {
    fn at(stage: &str) -> impl Fn(Error) -> Failure + '_ {
        move |e| Failure {
            stage: stage.to_string(),
            code: if e.is_validation() {
                EXIT_VALIDATION
            } else {
                EXIT_RUNTIME
            },
            error: Box::new(e),
        }
    }

    /// Unreadable or malformed inputs are the caller's to fix.
    fn input(e: Error) -> Failure {
        Failure {
            code: EXIT_VALIDATION,
            ..Failure::at("load")(e)
        }
    }
}

fn report_failure(f: &Failure) {
    eprintln!("error: {}", f.error);
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(EXIT_VALIDATION);
        }
    };
    let code = match cli.command {
        Command::Anonymize(a) => anonymize(a),
        Command::Generate(a) => generate(a),
        Command::Evaluate(a) => simple(evaluate_run(a)),
        Command::Render(a) => simple(render(a)),
    };
    ExitCode::from(code)
}

fn simple(r: Result<(), Failure>) -> u8 {
    match r {
        Ok(()) => 0,
        Err(f) => {
            report_failure(&f);
            f.code
        }
    }
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| {
        Failure::at("output")(Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })
    })
}

/// Write the manifest and turn the outcome into an exit code.
fn finish(mut manifest: RunManifest, out_dir: &Path, outcome: Result<(), Failure>) -> u8 {
    let code = match &outcome {
        Ok(()) if manifest.warnings.is_empty() => {
            manifest.status = "success".into();
            0
        }
        Ok(()) => {
            manifest.status = "success_with_warnings".into();
            EXIT_WARNINGS
        }
        Err(f) => {
            report_failure(f);
            manifest.status = "failed".into();
            manifest.failed_stage = Some(f.stage.clone());
            manifest.error = Some(f.error.to_string());
            f.code
        }
    };
    for w in &manifest.warnings {
        eprintln!("warning: {w}");
    }
    if out_dir.is_dir() {
        let path = out_dir.join(io::MANIFEST_FILE);
        let written = io::to_json(&manifest).and_then(|json| io::write_text(&path, &json));
        if let Err(e) = written {
            eprintln!("error: could not write the run manifest: {e}");
            return code.max(EXIT_RUNTIME);
        }
    }
    code
}

fn anonymize(args: AnonymizeArgs) -> u8 {
    let mut manifest = RunManifest::new("anonymize");
    for p in args
        .inputs
        .paths()
        .into_iter()
        .chain(args.config.as_deref())
    {
        manifest.add_input(p);
    }
    let outcome = create_dir(&args.out_dir).and_then(|()| anonymize_inner(&args, &mut manifest));
    finish(manifest, &args.out_dir, outcome)
}

fn anonymize_inner(args: &AnonymizeArgs, manifest: &mut RunManifest) -> Result<(), Failure> {
    let base = match &args.config {
        Some(p) => ConfigFile::read(p).map_err(Failure::at("config"))?,
        None => ConfigFile::default(),
    };
    let config = base
        .overlay(args.flags())
        .resolve()
        .map_err(Failure::at("config"))?;
    manifest.config = Some(config.clone());

    let i = &args.inputs;
    let dataset = io::load_inputs(&i.regions, &i.records, &i.schema).map_err(Failure::input)?;
    let out = run_pipeline(&config, &dataset).map_err(|e| Failure {
        stage: e.stage.to_string(),
        code: if e.stage == Stage::Validation {
            EXIT_VALIDATION
        } else {
            EXIT_RUNTIME
        },
        error: Box::new(e),
    })?;
    manifest.timings = Some(out.timings.clone());
    manifest.warnings = out.warnings.clone();

    let dir = &args.out_dir;
    let write = Failure::at("output");
    let mut written = Vec::new();
    let mut emit = |name: &str, f: &mut dyn FnMut(&Path) -> geoagg_core::Result<()>| {
        let path = dir.join(name);
        f(&path).map_err(&write)?;
        written.push(path);
        Ok::<(), Failure>(())
    };
    emit(io::PUBLISHED_FILE, &mut |p| {
        io::write_with(p, |w| {
            io::write_published(w, dataset.schema(), &out.result.published)
        })
    })?;
    emit(io::MAPPING_FILE, &mut |p| {
        io::write_with(p, |w| {
            io::write_mapping(w, &dataset, &out.result.region_mapping)
        })
    })?;
    emit(io::SITES_FILE, &mut |p| {
        io::write_with(p, |w| io::write_sites(w, &out.result.sites))
    })?;
    let mut report = Report::new(&dataset, &out.result, out.metrics.clone());
    report.adc = out.adc.clone();
    report.warnings = out.warnings.clone();
    emit(io::REPORT_FILE, &mut |p| {
        io::write_text(p, &io::to_json(&report)?)
    })?;
    if args.map {
        emit(io::MAP_FILE, &mut |p| {
            io::write_text(
                p,
                &render_svg(
                    &dataset,
                    &out.result,
                    MapOptions {
                        voronoi_edges: true,
                    },
                )?,
            )
        })?;
    }
    manifest.outputs = written;
    Ok(())
}

fn generate(args: GenerateArgs) -> u8 {
    let mut manifest = RunManifest::new("generate");
    for p in [&args.templates, &args.distributions, &args.schema] {
        manifest.add_input(p);
    }
    let outcome = create_dir(&args.out_dir).and_then(|()| {
        let schema = io::read_schema(&args.schema).map_err(Failure::input)?;
        let templates = io::read_regions(&args.templates).map_err(Failure::input)?;
        let spec = io::read_distributions(&args.distributions).map_err(Failure::input)?;
        let data = datagen::generate(&templates, &spec, &schema, args.seed)
            .map_err(Failure::at("generate"))?;
        let write = Failure::at("output");
        let regions = args.out_dir.join("regions.csv");
        let records = args.out_dir.join("records.csv");
        io::write_with(&regions, |w| io::write_regions(w, &data.regions)).map_err(&write)?;
        io::write_with(&records, |w| io::write_records(w, &schema, &data.records))
            .map_err(&write)?;
        manifest.outputs = vec![regions, records];
        Ok(())
    });
    finish(manifest, &args.out_dir, outcome)
}

fn evaluate_run(args: EvaluateArgs) -> Result<(), Failure> {
    let i = &args.inputs;
    let dataset = io::load_inputs(&i.regions, &i.records, &i.schema).map_err(Failure::input)?;
    let result = io::reconstruct_result(&dataset, &args.run_dir, args.k).map_err(Failure::input)?;
    let metrics = evaluate(dataset.regions(), &result, args.classical_discernibility);
    let json =
        io::to_json(&Report::new(&dataset, &result, metrics)).map_err(Failure::at("output"))?;
    match &args.out {
        Some(p) => io::write_text(p, &json).map_err(Failure::at("output")),
        None => {
            print!("{json}");
            Ok(())
        }
    }
}

fn render(args: RenderArgs) -> Result<(), Failure> {
    let i = &args.inputs;
    let dataset = io::load_inputs(&i.regions, &i.records, &i.schema).map_err(Failure::input)?;
    // k only affects the suppression bookkeeping, which is not drawn
    let result = io::reconstruct_result(&dataset, &args.run_dir, 0).map_err(Failure::input)?;
    let svg = render_svg(
        &dataset,
        &result,
        MapOptions {
            voronoi_edges: args.edges,
        },
    )
    .map_err(Failure::at("render"))?;
    io::write_text(&args.out, &svg).map_err(Failure::at("output"))
}
