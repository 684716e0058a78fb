//! `lek`: command-line front end for the lesion segmentation toolkit.
//!
//! Exit status is 0 on success, 1 on data errors (each failure listed on
//! stderr) and 2 on usage errors. Every output file is written to a
//! temporary sibling and renamed into place; when any input fails nothing is
//! written at all.

use std::fs;
use std::io::{IsTerminal, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand};
use lek::color_constancy::{preprocess, ColorConstancyConfig, DEFAULT_MINKOWSKI_P};
use lek::evaluation::{
    evaluate_cases, load_manifest, parse_report, render_report, AggregationMode, EvalConfig,
    ReportFormat, Selector,
};
use lek::fixtures::{generate_fixtures, FixtureSpec};
use lek::ingest::{
    decode_probability_map, load_instance_set, select_highest_confidence,
    threshold_probability_map, ThresholdConfig, DEFAULT_CUTOFF,
};
use lek::postprocess::{clean, MinArea, MorphologyConfig};
use lek::raster::{decode_image, decode_mask, encode_image, encode_mask, DEFAULT_LESION_THRESHOLD};
use lek::{aggregate, fuse, metrics, EnsembleStrategy, Error};

#[derive(Parser, Debug)]
#[command(
    name = "lek",
    version,
    about = "Lesion segmentation fusion and scoring toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Resize images and apply Shades of Gray colour constancy.
    Preprocess(PreprocessArgs),
    /// Fill holes in and remove artifacts from predicted masks.
    Postprocess(PostprocessArgs),
    /// Binarise probability maps, or pick the most confident instance from a sidecar CSV.
    Threshold(ThresholdArgs),
    /// Fuse two sets of predicted masks.
    Ensemble(EnsembleArgs),
    /// Score one predicted mask against a ground truth; prints one JSON line.
    Score(ScoreArgs),
    /// Run the benchmark harness over a dataset manifest.
    Evaluate(EvaluateArgs),
    /// Re-render a JSON report in another format.
    Report(ReportArgs),
    /// Write the synthetic fixture dataset.
    #[command(name = "generate-fixtures", hide = true)]
    GenerateFixtures(GenerateArgs),
}

#[derive(Args, Debug)]
struct PreprocessArgs {
    /// Image file or directory of images.
    input: PathBuf,
    /// Minkowski norm order.
    #[arg(long = "p", default_value_t = DEFAULT_MINKOWSKI_P)]
    p: f64,
    /// Output size as WxH, or `native` to keep the input size.
    #[arg(long, default_value = "500x375")]
    size: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct MorphologyArgs {
    /// Smallest kept component: pixels (`25`), fraction (`0.001`) or percent (`0.1%`).
    #[arg(long = "min-area", default_value = "0.1%")]
    min_area: String,
    /// Keep only the largest lesion component.
    #[arg(long = "keep-largest", default_value_t = true, action = clap::ArgAction::Set)]
    keep_largest: bool,
}

impl MorphologyArgs {
    fn config(&self) -> lek::Result<MorphologyConfig> {
        let cfg = MorphologyConfig {
            min_component_area: self.min_area.parse::<MinArea>()?,
            keep_largest_only: self.keep_largest,
            ..MorphologyConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
struct PostprocessArgs {
    /// Mask file or directory of masks.
    input: PathBuf,
    #[command(flatten)]
    morphology: MorphologyArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ThresholdArgs {
    /// Probability map PNG, directory of maps, or instance sidecar CSV.
    input: PathBuf,
    #[arg(long, default_value_t = DEFAULT_CUTOFF)]
    cutoff: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EnsembleArgs {
    /// First model's mask (file or directory); wins area ties.
    first: PathBuf,
    /// Second model's mask (file or directory).
    second: PathBuf,
    /// add, large or small.
    #[arg(long)]
    strategy: EnsembleStrategy,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ScoreArgs {
    prediction: PathBuf,
    truth: PathBuf,
    #[arg(long, default_value_t = DEFAULT_CUTOFF)]
    cutoff: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Ensemble strategy: add, large or small.
    #[arg(long, conflicts_with = "model", required_unless_present = "model")]
    strategy: Option<EnsembleStrategy>,
    /// Score a single model from the manifest instead of an ensemble.
    #[arg(long)]
    model: Option<String>,
    #[arg(long, default_value_t = DEFAULT_CUTOFF)]
    cutoff: f64,
    #[command(flatten)]
    morphology: MorphologyArgs,
    #[arg(long, default_value = "json")]
    format: ReportFormat,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 0 means one per logical core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// JSON report written by `evaluate`.
    input: PathBuf,
    #[arg(long, default_value = "markdown")]
    format: ReportFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    out: PathBuf,
    #[arg(long, default_value_t = 10)]
    cases: usize,
    #[arg(long, default_value_t = 2017)]
    seed: u64,
}

/// Failure of a whole command, mapped to an exit status.
enum Failure {
    Usage(String),
    Data(Vec<Error>),
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        match err {
            Error::Cases(errs) => Failure::Data(errs),
            other => Failure::Data(vec![other]),
        }
    }
}

type CmdResult = Result<(), Failure>;

/// Buffered output: nothing touches the filesystem until every input succeeded.
#[derive(Default)]
struct Outputs(Vec<(PathBuf, Vec<u8>)>);

impl Outputs {
    fn push(&mut self, path: PathBuf, bytes: Vec<u8>) {
        self.0.push((path, bytes));
    }

    fn commit(self) -> lek::Result<()> {
        for (path, bytes) in self.0 {
            write_atomic(&path, &bytes)?;
        }
        Ok(())
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_owned(),
        source,
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> lek::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_err(dir, e))?;
    tmp.write_all(bytes).map_err(|e| io_err(path, e))?;
    tmp.persist(path).map_err(|e| io_err(path, e.error))?;
    Ok(())
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> lek::Result<()> {
    match out {
        Some(path) => write_atomic(path, bytes),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| io_err(Path::new("<stdout>"), e)),
    }
}

fn read(path: &Path) -> lek::Result<Vec<u8>> {
    fs::read(path).map_err(|e| io_err(path, e))
}

/// Input files for a file-or-directory argument, with their output paths.
/// Directory inputs are matched by extension and processed in name order.
fn plan(input: &Path, out: &Path, extensions: &[&str]) -> Result<Vec<(PathBuf, PathBuf)>, Failure> {
    if input.is_file() {
        return Ok(vec![(input.to_owned(), out.to_owned())]);
    }
    if !input.is_dir() {
        return Err(Failure::Usage(format!(
            "input `{}` does not exist",
            input.display()
        )));
    }
    let mut files: Vec<PathBuf> = fs::read_dir(input)
        .map_err(|e| io_err(input, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .is_some_and(|e| extensions.iter().any(|x| e.eq_ignore_ascii_case(x)))
        })
        .collect();
    files.sort();
    Ok(files
        .into_iter()
        .map(|f| {
            let name = f.file_name().expect("listed file has a name").to_owned();
            (f, out.join(name))
        })
        .collect())
}

/// Run `f` over every planned file, collecting all failures before writing anything.
fn batch(
    jobs: Vec<(PathBuf, PathBuf)>,
    mut f: impl FnMut(&Path) -> lek::Result<Vec<u8>>,
) -> CmdResult {
    let mut outputs = Outputs::default();
    let mut errors = Vec::new();
    for (input, output) in jobs {
        match f(&input) {
            Ok(bytes) => outputs.push(output, bytes),
            Err(e) => errors.push(Error::Case {
                case_id: input.display().to_string(),
                source: Box::new(e),
            }),
        }
    }
    if !errors.is_empty() {
        return Err(Failure::Data(errors));
    }
    outputs.commit()?;
    Ok(())
}

fn parse_size(s: &str) -> Result<Option<(u32, u32)>, Failure> {
    if s.eq_ignore_ascii_case("native") {
        return Ok(None);
    }
    let bad = || Failure::Usage(format!("invalid size `{s}` (expected WxH or native)"));
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let (w, h) = (w.parse().map_err(|_| bad())?, h.parse().map_err(|_| bad())?);
    if w == 0 || h == 0 {
        return Err(bad());
    }
    Ok(Some((w, h)))
}

fn usage<T>(r: lek::Result<T>) -> Result<T, Failure> {
    r.map_err(|e| Failure::Usage(e.to_string()))
}

fn run_preprocess(args: PreprocessArgs) -> CmdResult {
    let cfg = usage(ColorConstancyConfig::with_p(args.p))?;
    let size = parse_size(&args.size)?;
    let mut clipped = 0;
    let jobs = plan(&args.input, &args.out, &["png", "jpg", "jpeg"])?;
    let single = args.input.is_file();
    let jobs = jobs
        .into_iter()
        .map(|(i, o)| (i, if single { o } else { o.with_extension("png") }))
        .collect();
    batch(jobs, |path| {
        let (img, report) = preprocess(&decode_image(&read(path)?)?, size, &cfg)?;
        clipped += report.clipped;
        Ok(encode_image(&img))
    })?;
    if clipped > 0 {
        eprintln!("note: {clipped} channel values clipped to 255");
    }
    Ok(())
}

fn run_postprocess(args: PostprocessArgs) -> CmdResult {
    let cfg = usage(args.morphology.config())?;
    let jobs = plan(&args.input, &args.out, &["png"])?;
    batch(jobs, |path| {
        let mask = decode_mask(&read(path)?, DEFAULT_LESION_THRESHOLD)?;
        Ok(encode_mask(&clean(&mask, &cfg)))
    })
}

fn run_threshold(args: ThresholdArgs) -> CmdResult {
    let cfg = usage(ThresholdConfig::new(args.cutoff))?;
    let is_sidecar = args
        .input
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_sidecar {
        let instances = load_instance_set(&args.input)?;
        let declared = instances
            .first()
            .map(|i| i.mask.dimensions())
            .unwrap_or((1, 1));
        let mask = select_highest_confidence(&instances, declared)?;
        write_atomic(&args.out, &encode_mask(&mask))?;
        return Ok(());
    }
    let jobs = plan(&args.input, &args.out, &["png"])?;
    batch(jobs, |path| {
        let map = decode_probability_map(&read(path)?)?;
        Ok(encode_mask(&threshold_probability_map(&map, &cfg)))
    })
}

fn run_ensemble(args: EnsembleArgs) -> CmdResult {
    let jobs: Vec<(PathBuf, PathBuf)> = if args.first.is_file() {
        vec![(args.first.clone(), args.out.clone())]
    } else {
        plan(&args.first, &args.out, &["png"])?
    };
    let second_is_file = args.second.is_file();
    if !second_is_file && !args.second.is_dir() {
        return Err(Failure::Usage(format!(
            "input `{}` does not exist",
            args.second.display()
        )));
    }
    batch(jobs, |first| {
        let second = if second_is_file {
            args.second.clone()
        } else {
            args.second
                .join(first.file_name().expect("planned file has a name"))
        };
        let a = decode_mask(&read(first)?, DEFAULT_LESION_THRESHOLD)?;
        let b = decode_mask(&read(&second)?, DEFAULT_LESION_THRESHOLD)?;
        Ok(encode_mask(&fuse(&a, &b, args.strategy)?))
    })
}

fn run_score(args: ScoreArgs) -> CmdResult {
    let cfg = usage(ThresholdConfig::new(args.cutoff))?;
    let pred = threshold_probability_map(&decode_probability_map(&read(&args.prediction)?)?, &cfg);
    let truth = decode_mask(&read(&args.truth)?, DEFAULT_LESION_THRESHOLD)?;
    let m = metrics::score(&pred, &truth)?;
    let mut line = serde_json::to_vec(&m).expect("metrics serialise");
    line.push(b'\n');
    emit(args.out.as_deref(), &line)?;
    Ok(())
}

fn run_evaluate(args: EvaluateArgs) -> CmdResult {
    let selector = match (args.strategy, args.model) {
        (Some(s), None) => Selector::Ensemble(s),
        (None, Some(m)) => Selector::Single(m),
        _ => {
            return Err(Failure::Usage(
                "give exactly one of --strategy or --model".into(),
            ))
        }
    };
    let cfg = EvalConfig {
        threshold: usage(ThresholdConfig::new(args.cutoff))?,
        morphology: usage(args.morphology.config())?,
        ..EvalConfig::default()
    };
    let manifest = load_manifest(&args.manifest)?;
    if let Selector::Single(name) = &selector {
        usage(manifest.model_index(name))?;
    }
    let mut cases = Vec::new();
    let mut errors = Vec::new();
    for result in evaluate_cases(&manifest, &selector, &cfg, args.workers)? {
        match result {
            Ok(c) => cases.push(c),
            Err(e) => errors.push(e),
        }
    }
    if !errors.is_empty() {
        return Err(Failure::Data(errors));
    }
    let mut report = aggregate(cases, &selector.label(), AggregationMode::PerImage)?;
    report.dataset = manifest.name.clone();
    emit(args.out.as_deref(), &render_report(&report, args.format))?;
    Ok(())
}

fn run_report(args: ReportArgs) -> CmdResult {
    let report = parse_report(&read(&args.input)?)?;
    emit(args.out.as_deref(), &render_report(&report, args.format))?;
    Ok(())
}

fn run_generate(args: GenerateArgs) -> CmdResult {
    let spec = FixtureSpec {
        cases: args.cases,
        seed: args.seed,
        ..FixtureSpec::default()
    };
    let manifest = generate_fixtures(&spec, &args.out)?;
    eprintln!(
        "wrote {} cases to {}",
        manifest.records.len(),
        args.out.display()
    );
    Ok(())
}

fn error_prefix() -> &'static str {
    let color = std::env::var_os("LEK_NO_COLOR").is_none() && std::io::stderr().is_terminal();
    if color {
        "\x1b[1;31merror\x1b[0m"
    } else {
        "error"
    }
}

/// Usage line of the subcommand named on the command line, or of the whole tool.
fn usage_text() -> clap::builder::StyledStr {
    let mut cmd = Cli::command();
    cmd.build();
    let name = std::env::args().nth(1).unwrap_or_default();
    match cmd.find_subcommand_mut(&name) {
        Some(sub) => sub.render_usage(),
        None => cmd.render_usage(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if !e.use_stderr() {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let mut text = e.render().to_string();
            if !text.contains("Usage:") {
                text = text.replace(
                    "\n\nFor more information",
                    &format!("\n\n{}\n\nFor more information", usage_text()),
                );
            }
            eprint!("{text}");
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::Preprocess(a) => run_preprocess(a),
        Command::Postprocess(a) => run_postprocess(a),
        Command::Threshold(a) => run_threshold(a),
        Command::Ensemble(a) => run_ensemble(a),
        Command::Score(a) => run_score(a),
        Command::Evaluate(a) => run_evaluate(a),
        Command::Report(a) => run_report(a),
        Command::GenerateFixtures(a) => run_generate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("{}: {msg}", error_prefix());
            eprintln!("\nFor more information, try '--help'.");
            ExitCode::from(2)
        }
        Err(Failure::Data(errors)) => {
            let prefix = error_prefix();
            for e in &errors {
                eprintln!("{prefix}: {e}");
            }
            ExitCode::from(1)
        }
    }
}
