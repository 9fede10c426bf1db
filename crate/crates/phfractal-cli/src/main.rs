//! Batch front-end for the exact and numerical invariant pipelines.
//!
//! Exit codes are a stable contract: 0 success, 2 bad arguments, 3
//! non-convergence (diagnostics still written), 4 resource limits, 5 barcode
//! mismatch, 6 estimator not applicable to the input.

use clap::{Args, Parser, Subcommand};
use phfractal::barcodes::write_barcode_csv;
use phfractal::families::{builtin_spec, FractalSpec};
use phfractal::invariants::{
    euler_opts, lw_average_euler, ReportParams, SeqStep, DEFAULT_J_MAX, DEFAULT_SEQ_TOL,
};
use phfractal::numerical::{
    calibrate, cubical_filtration, edt, match_report, persistence, prefractal_bitmap, MemoryBudget,
};
use phfractal::{Error, PersistenceDiagram, Result};
use serde::Serialize;
use std::fs;
use std::io::Write as _;
use std::path::PathBuf;
use std::time::Instant;

#[derive(Parser)]
#[command(
    name = "phfractal",
    version,
    about = "Average ph-fractal Betti and Euler numbers, exactly and numerically"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Exact invariants from the symbolic barcode families
    Exact(ExactArgs),
    /// Rasterize a pre-fractal and run cubical persistence on its
    /// parallel-set filtration
    Numeric(NumericArgs),
    /// Run both routes and match the numerical barcode against the symbolic
    /// one
    Compare(CompareArgs),
    /// Finite-δ single-exponent Euler estimate against the exact value
    Lw(LwArgs),
}

#[derive(Args)]
struct SpecSelect {
    /// Built-in fractal: cantor, sierpinski_carpet, cantor_dust or menger
    fractal: Option<String>,
    /// JSON spec file instead of a built-in name
    #[arg(long, value_name = "PATH")]
    spec_file: Option<PathBuf>,
}

#[derive(Args)]
struct OutputOpts {
    /// Directory for report files
    #[arg(long, default_value = ".", value_name = "DIR")]
    out: PathBuf,
    /// Omit the volatile metadata block (timestamps, runtimes) so reruns are
    /// byte-identical
    #[arg(long)]
    no_meta: bool,
}

#[derive(Args)]
struct ExactArgs {
    #[command(flatten)]
    select: SpecSelect,
    /// Step limit for the sequence method
    #[arg(long, default_value_t = DEFAULT_J_MAX)]
    j_max: u32,
    /// Convergence tolerance on consecutive extrapolated increments
    #[arg(long, default_value_t = DEFAULT_SEQ_TOL)]
    tol: f64,
    /// Print the full report as JSON instead of the table
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    output: OutputOpts,
}

#[derive(Args)]
struct NumericArgs {
    #[command(flatten)]
    select: SpecSelect,
    /// Pre-fractal iteration depth
    #[arg(long)]
    depth: u32,
    /// Grid cells per axis
    #[arg(long)]
    res: usize,
    /// Drop bars shorter than this many cells
    #[arg(long, default_value_t = 2.0)]
    floor_factor: f64,
    /// Also print the Betti numbers at this radius
    #[arg(long, value_name = "EPS")]
    curve_eps: Option<f64>,
    /// Points on the logarithmic ε grid of the Betti-curve file
    #[arg(long, default_value_t = 200)]
    curve_points: usize,
    /// Worker threads (default: all cores); output does not depend on it
    #[arg(long)]
    workers: Option<usize>,
    #[command(flatten)]
    output: OutputOpts,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    select: SpecSelect,
    #[arg(long)]
    depth: u32,
    #[arg(long)]
    res: usize,
    /// Matching tolerance on (birth, death); default 2h
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    workers: Option<usize>,
    #[command(flatten)]
    output: OutputOpts,
}

#[derive(Args)]
struct LwArgs {
    #[command(flatten)]
    select: SpecSelect,
    /// Lifetime cutoff δ of the finite estimate
    #[arg(long, default_value_t = 1e-6)]
    delta: f64,
    #[command(flatten)]
    output: OutputOpts,
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    };
    std::process::exit(code);
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NonConvergence { .. } => 3,
        Error::Resource(_) | Error::Io(_) => 4,
        Error::Inapplicable(_) => 6,
        _ => 2,
    }
}

fn run(cli: Cli) -> Result<i32> {
    match cli.cmd {
        Cmd::Exact(a) => run_exact(a),
        Cmd::Numeric(a) => run_numeric(a),
        Cmd::Compare(a) => run_compare(a),
        Cmd::Lw(a) => run_lw(a),
    }
}

fn load_spec(select: &SpecSelect) -> Result<FractalSpec> {
    match (&select.fractal, &select.spec_file) {
        (Some(name), None) => Ok(builtin_spec(name.parse()?)),
        (None, Some(path)) => FractalSpec::from_json(&fs::read_to_string(path)?),
        _ => Err(Error::argument("give exactly one of a fractal name or --spec-file")),
    }
}

fn init_workers(workers: Option<usize>) -> Result<()> {
    if let Some(n) = workers {
        if n == 0 {
            return Err(Error::argument("worker count must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::argument(format!("worker pool: {e}")))?;
    }
    Ok(())
}

/// Files written so far, so a failing subcommand can remove its partial
/// output.
struct OutFiles {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl OutFiles {
    fn new(dir: &PathBuf) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(OutFiles { dir: dir.clone(), written: Vec::new() })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, bytes)?;
        self.written.push(path.clone());
        Ok(path)
    }

    fn discard(&mut self) {
        for path in self.written.drain(..) {
            let _ = fs::remove_file(path);
        }
    }
}

#[derive(Serialize)]
struct Meta {
    unix_time: u64,
    runtime_ms: u128,
    workers: usize,
}

fn meta(no_meta: bool, started: Instant) -> Option<Meta> {
    if no_meta {
        return None;
    }
    Some(Meta {
        unix_time: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        runtime_ms: started.elapsed().as_millis(),
        workers: rayon::current_num_threads(),
    })
}

#[derive(Serialize)]
struct Enveloped<T: Serialize> {
    #[serde(flatten)]
    body: T,
    #[serde(skip_serializing_if = "Option::is_none")]
    meta: Option<Meta>,
}

fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Human-table rounding: ~6 significant digits, plain decimal where readable.
fn fmt6(x: f64) -> String {
    if x == 0.0 {
        "0".into()
    } else if x.abs() >= 1e-4 && x.abs() < 1e6 {
        format!("{x:.6}")
    } else {
        format!("{x:.5e}")
    }
}

fn run_exact(a: ExactArgs) -> Result<i32> {
    let spec = load_spec(&a.select)?;
    let started = Instant::now();
    let mut out = OutFiles::new(&a.output.out)?;
    match euler_opts(&spec, a.j_max, a.tol) {
        Ok(report) => {
            let doc = Enveloped { body: report, meta: meta(a.output.no_meta, started) };
            let bytes = to_json(&doc)?;
            let path = out.write(&format!("{}_report.json", spec.name), &bytes)?;
            let report = doc.body;
            if a.json {
                std::io::stdout().write_all(&bytes)?;
            } else {
                println!("fractal   {}", report.fractal);
                println!("diameter  {}", fmt6(report.diameter));
                println!("degree  sigma        beta(closed)   beta(sequence)  |difference|");
                for d in &report.degrees {
                    println!(
                        "{:<7} {:<12} {:<14} {:<15} {}",
                        d.i,
                        fmt6(d.sigma),
                        fmt6(d.beta_closed),
                        fmt6(d.beta_sequence),
                        fmt6(d.discrepancy)
                    );
                }
                println!("chi_phf   {}", fmt6(report.euler_phf));
                println!("report    {}", path.display());
            }
            Ok(0)
        }
        Err(Error::NonConvergence { j_max, last, trace }) => {
            #[derive(Serialize)]
            struct Diagnostics<'a> {
                fractal: &'a str,
                error: &'static str,
                j_max: u32,
                last: Option<f64>,
                trace: &'a [SeqStep],
                parameters: ReportParams,
            }
            let doc = Diagnostics {
                fractal: &spec.name,
                error: "non_convergence",
                j_max,
                last,
                trace: &trace,
                parameters: ReportParams { j_max: a.j_max, tol: a.tol },
            };
            let path = out.write(&format!("{}_report.json", spec.name), &to_json(&doc)?)?;
            eprintln!("diagnostics written to {}", path.display());
            Err(Error::NonConvergence { j_max, last, trace })
        }
        Err(e) => Err(e),
    }
}

struct PipelineRun {
    spec: FractalSpec,
    diagram: PersistenceDiagram,
    spacing: f64,
    occupied_cells: usize,
    complex_cells: usize,
}

fn run_pipeline(spec: FractalSpec, depth: u32, res: usize, floor_factor: f64) -> Result<PipelineRun> {
    let budget = MemoryBudget::from_env();
    let bitmap = prefractal_bitmap(&spec, depth, res, &budget)?;
    let spacing = bitmap.spacing;
    let occupied_cells = bitmap.occupied_count();
    let field = edt(&bitmap)?;
    let complex = cubical_filtration(&field, &budget)?;
    let complex_cells = complex.len();
    let raw = persistence(&complex)?;
    let diagram = calibrate(&raw, spacing, spec.diameter.value(), floor_factor)?;
    Ok(PipelineRun { spec, diagram, spacing, occupied_cells, complex_cells })
}

fn betti_curve_csv(diagram: &PersistenceDiagram, spacing: f64, points: usize) -> Result<Vec<u8>> {
    if points < 2 {
        return Err(Error::argument(format!("curve needs at least 2 points, got {points}")));
    }
    let mut csv = Vec::new();
    write!(csv, "eps")?;
    for i in 0..=diagram.ambient_dim() {
        write!(csv, ",b{i}")?;
    }
    writeln!(csv)?;
    let ratio = diagram.diameter() / spacing;
    for k in 0..points {
        let eps = spacing * ratio.powf(k as f64 / (points - 1) as f64);
        write!(csv, "{eps:.16e}")?;
        for i in 0..=diagram.ambient_dim() {
            write!(csv, ",{}", diagram.betti_at(i, eps))?;
        }
        writeln!(csv)?;
    }
    Ok(csv)
}

fn run_numeric(a: NumericArgs) -> Result<i32> {
    let spec = load_spec(&a.select)?;
    init_workers(a.workers)?;
    let started = Instant::now();
    let mut out = OutFiles::new(&a.output.out)?;
    let result = numeric_inner(&a, spec, started, &mut out);
    if result.is_err() {
        out.discard();
    }
    result
}

fn numeric_inner(
    a: &NumericArgs,
    spec: FractalSpec,
    started: Instant,
    out: &mut OutFiles,
) -> Result<i32> {
    let run = run_pipeline(spec, a.depth, a.res, a.floor_factor)?;
    let base = format!("{}_d{}_n{}", run.spec.name, a.depth, a.res);

    let mut diagram_csv = Vec::new();
    write_barcode_csv(run.diagram.bars(), &mut diagram_csv)?;
    out.write(&format!("{base}_diagram.csv"), &diagram_csv)?;

    let curve_csv = betti_curve_csv(&run.diagram, run.spacing, a.curve_points)?;
    out.write(&format!("{base}_betti_curves.csv"), &curve_csv)?;

    #[derive(Serialize)]
    struct Summary {
        fractal: String,
        depth: u32,
        resolution: usize,
        spacing: f64,
        diameter: f64,
        floor_factor: f64,
        occupied_cells: usize,
        complex_cells: usize,
        /// Bar multiplicity totals by degree.
        bars_by_degree: Vec<u64>,
        /// Sibling file names, relative to the summary's own directory.
        diagram_csv: String,
        betti_curves_csv: String,
    }
    let summary = Summary {
        fractal: run.spec.name.clone(),
        depth: a.depth,
        resolution: a.res,
        spacing: run.spacing,
        diameter: run.diagram.diameter(),
        floor_factor: a.floor_factor,
        occupied_cells: run.occupied_cells,
        complex_cells: run.complex_cells,
        bars_by_degree: (0..=run.diagram.ambient_dim())
            .map(|i| run.diagram.bars_in_dim(i).iter().map(|b| b.multiplicity).sum())
            .collect(),
        diagram_csv: format!("{base}_diagram.csv"),
        betti_curves_csv: format!("{base}_betti_curves.csv"),
    };
    let doc = Enveloped { body: summary, meta: meta(a.output.no_meta, started) };
    let summary_path = out.write(&format!("{base}_summary.json"), &to_json(&doc)?)?;

    println!("fractal    {}", run.spec.name);
    println!("grid       {}^{} cells at h = {}", a.res, run.spec.ambient_dim, fmt6(run.spacing));
    println!("occupied   {}", run.occupied_cells);
    for (i, count) in doc.body.bars_by_degree.iter().enumerate() {
        println!("bars H{i}    {count}");
    }
    if let Some(eps) = a.curve_eps {
        if !(eps >= 0.0) {
            return Err(Error::argument(format!("curve radius must be ≥ 0, got {eps}")));
        }
        for i in 0..=run.diagram.ambient_dim() {
            println!("b{i} = {} at eps = {eps}", run.diagram.betti_at(i, eps));
        }
    }
    println!("summary    {}", summary_path.display());
    Ok(0)
}

fn run_compare(a: CompareArgs) -> Result<i32> {
    let spec = load_spec(&a.select)?;
    init_workers(a.workers)?;
    let started = Instant::now();
    let mut out = OutFiles::new(&a.output.out)?;
    let run = run_pipeline(spec, a.depth, a.res, 2.0)?;
    let tol = match a.tol {
        Some(t) if t >= 0.0 => t,
        Some(t) => return Err(Error::argument(format!("tolerance must be ≥ 0, got {t}"))),
        None => 2.0 * run.spacing,
    };
    let lifetime_cut = 4.0 * run.spacing;

    #[derive(Serialize)]
    struct DegreeMatch {
        degree: usize,
        symbolic_bars: u64,
        matched: usize,
        unmatched_numeric: usize,
        unmatched_symbolic: usize,
        max_displacement: f64,
    }
    let mut per_degree = Vec::new();
    let mut all_matched = true;
    for degree in 0..=run.spec.ambient_dim {
        let sym = run.spec.enumerate(degree, lifetime_cut)?;
        let numeric = PersistenceDiagram::new(
            run.diagram.ambient_dim(),
            run.diagram.diameter(),
            run.diagram.bars_in_dim(degree).to_vec(),
            run.diagram.resolution_floor(),
        )?;
        let r = match_report(&numeric, sym.bars(), tol)?;
        all_matched &= r.unmatched_symbolic == 0;
        per_degree.push(DegreeMatch {
            degree,
            symbolic_bars: sym.bars().iter().map(|b| b.multiplicity).sum(),
            matched: r.matched,
            unmatched_numeric: r.unmatched_numeric,
            unmatched_symbolic: r.unmatched_symbolic,
            max_displacement: r.max_displacement,
        });
    }

    #[derive(Serialize)]
    struct CompareDoc {
        fractal: String,
        depth: u32,
        resolution: usize,
        tol: f64,
        lifetime_cut: f64,
        per_degree: Vec<DegreeMatch>,
        all_matched: bool,
    }
    let doc = Enveloped {
        body: CompareDoc {
            fractal: run.spec.name.clone(),
            depth: a.depth,
            resolution: a.res,
            tol,
            lifetime_cut,
            per_degree,
            all_matched,
        },
        meta: meta(a.output.no_meta, started),
    };
    let path = out.write(
        &format!("{}_d{}_n{}_match.json", run.spec.name, a.depth, a.res),
        &to_json(&doc)?,
    )?;

    for d in &doc.body.per_degree {
        println!(
            "H{}: {} of {} symbolic bars matched (max displacement {})",
            d.degree,
            d.matched,
            d.symbolic_bars,
            fmt6(d.max_displacement)
        );
    }
    println!("report    {}", path.display());
    if all_matched {
        println!("all symbolic bars with lifetime > {} matched", fmt6(lifetime_cut));
        Ok(0)
    } else {
        eprintln!("mismatch: some symbolic bars have no numerical partner within {}", fmt6(tol));
        Ok(5)
    }
}

fn run_lw(a: LwArgs) -> Result<i32> {
    let spec = load_spec(&a.select)?;
    let started = Instant::now();
    let mut out = OutFiles::new(&a.output.out)?;
    let lw = lw_average_euler(&spec, a.delta)?;
    let mut report = euler_opts(&spec, DEFAULT_J_MAX, DEFAULT_SEQ_TOL)?;
    let discrepancy = (lw.chi_estimate - report.euler_phf).abs();

    println!("fractal        {}", report.fractal);
    println!("delta          {:e}", a.delta);
    println!("chi_estimate   {}", fmt6(lw.chi_estimate));
    println!("chi_phf        {}", fmt6(report.euler_phf));
    println!("|difference|   {}", fmt6(discrepancy));

    report.lw_comparison = Some(lw);
    let doc = Enveloped { body: report, meta: meta(a.output.no_meta, started) };
    let path = out.write(&format!("{}_lw.json", doc.body.fractal), &to_json(&doc)?)?;
    println!("report         {}", path.display());
    Ok(0)
}
