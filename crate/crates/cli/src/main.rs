//! `htlab` command-line front end.
//!
//! Exit codes: 0 success, 1 a theorem hypothesis fails, 2 configuration
//! error, 3 I/O error.

mod config;

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use htlab::basin::{self, AttractorRegistry, BasinError, BasinLabel};
use htlab::io as csvio;
use htlab::manifold::{self, Contact};
use htlab::orbit::{scan_srk, OrbitOptions};
use htlab::stability::StabilityClass;
use htlab::theory::{full_report, tau_growth_experiment};
use htlab::{Execution, MapParams};

use config::{ConfigError, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "htlab",
    version,
    about = "Coexisting stable periodic orbits near a homoclinic tangency"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding the config's output_dir.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for the parallel stages.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Basin raster size as <nx>x<ny>, overriding the config.
    #[arg(long, global = true)]
    resolution: Option<String>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Scan for single-round orbits and write the orbit table.
    FindOrbits,
    /// Check the theorem hypotheses and run growth experiments.
    CheckTheory,
    /// Trace the stable and unstable sets of the origin.
    Manifolds,
    /// Rasterize the basins of attraction.
    Basins,
}

enum Failure {
    Config(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Io(m) => m,
        }
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| Failure::Io(format!("{}: {e}", path.display()))
}

fn csv_err(path: &Path) -> impl Fn(csvio::IoError) -> Failure + '_ {
    move |e| Failure::Io(format!("{}: {e}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(io_err(path))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn run(cli: &Cli) -> Result<u8, Failure> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Failure::Config("--config <path> is required".into()))?;
    let mut cfg = config::load(path).map_err(|e| match e {
        ConfigError::Io(m) => Failure::Config(format!("cannot read config {m}")),
        ConfigError::Invalid(m) => Failure::Config(m),
    })?;
    if let Some(r) = &cli.resolution {
        cfg.basins.resolution = config::parse_resolution(r).map_err(Failure::Config)?;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if cli.threads == Some(0) {
        return Err(Failure::Config("--threads must be at least 1".into()));
    }
    std::fs::create_dir_all(&cfg.output_dir).map_err(io_err(&cfg.output_dir))?;
    with_threads(cli.threads, || match cli.command {
        Command::FindOrbits => find_orbits(&cfg),
        Command::CheckTheory => check_theory(&cfg),
        Command::Manifolds => manifolds(&cfg),
        Command::Basins => basins(&cfg),
    })
}

#[cfg(feature = "parallel")]
fn with_threads<R: Send>(threads: Option<usize>, job: impl FnOnce() -> R + Send) -> R {
    match threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(job),
            Err(e) => {
                eprintln!("warning: could not build a {n}-thread pool ({e}); using the default pool");
                job()
            }
        },
        None => job(),
    }
}

#[cfg(not(feature = "parallel"))]
fn with_threads<R: Send>(threads: Option<usize>, job: impl FnOnce() -> R + Send) -> R {
    if threads.is_some_and(|n| n > 1) {
        eprintln!("warning: built without the `parallel` feature; --threads is ignored");
    }
    job()
}

fn find_orbits(cfg: &ExperimentConfig) -> Result<u8, Failure> {
    let sec = &cfg.orbits;
    let scan = scan_srk(
        &cfg.params,
        sec.k_min,
        sec.k_max,
        &OrbitOptions::default(),
        Execution::Parallel,
    );
    let orbits_path = cfg.output_dir.join("orbits.csv");
    csvio::write_orbits_csv(create(&orbits_path)?, scan.iter().flat_map(|e| e.orbits()))
        .map_err(csv_err(&orbits_path))?;
    let summary_path = cfg.output_dir.join("orbit_summary.csv");
    csvio::write_scan_summary_csv(create(&summary_path)?, &scan).map_err(csv_err(&summary_path))?;

    println!(
        "{:>3}  {:<5}  {:<20}  {:>14}  {:>14}",
        "k", "root", "stability", "trace", "det"
    );
    for e in &scan {
        for (name, outcome) in [("minus", &e.minus), ("plus", &e.plus)] {
            match outcome.orbit() {
                Some(o) => println!(
                    "{:>3}  {:<5}  {:<20}  {:>14.6e}  {:>14.6e}",
                    e.k,
                    name,
                    o.stability.as_str(),
                    o.trace,
                    o.det
                ),
                None => println!("{:>3}  {:<5}  {:<20}", e.k, name, "-"),
            }
        }
    }
    let stable: Vec<u32> = scan.iter().filter(|e| e.stable().is_some()).map(|e| e.k).collect();
    println!("stable orbits at k = {stable:?}");
    println!("wrote {} and {}", orbits_path.display(), summary_path.display());
    Ok(0)
}

fn check_theory(cfg: &ExperimentConfig) -> Result<u8, Failure> {
    let report = full_report(&cfg.params);
    println!("{report}");
    let report_path = cfg.output_dir.join("theory_report.json");
    write_text(&report_path, &report.to_json())?;

    let sec = &cfg.theory;
    let mut growth = Vec::new();
    for changes in &sec.perturbations {
        let params = config::apply_perturbation(&cfg.params, changes).map_err(Failure::Config)?;
        let label: Vec<String> = changes.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let label = label.join(",");
        match tau_growth_experiment(&params, sec.growth_k_min..=sec.growth_k_max) {
            Ok(g) => {
                println!(
                    "growth [{label}] k = {}..{}: fitted ratio {:.6} (|sigma| = {}, sqrt|sigma| = {:.6}){}",
                    sec.growth_k_min,
                    sec.growth_k_max,
                    g.fitted_ratio,
                    params.sigma.abs(),
                    params.sigma.abs().sqrt(),
                    if g.degenerate { " [trace identically zero]" } else { "" }
                );
                growth.push(serde_json::json!({ "perturbation": changes, "diagnostic": g }));
            }
            Err(e) => {
                println!("growth [{label}]: {e}");
                growth.push(serde_json::json!({ "perturbation": changes, "error": e.to_string() }));
            }
        }
    }
    if !growth.is_empty() {
        let path = cfg.output_dir.join("growth.json");
        let text = serde_json::to_string_pretty(&growth).expect("growth table serialises");
        write_text(&path, &text)?;
    }
    if report.all_hypotheses_pass() {
        Ok(0)
    } else {
        eprintln!("failed conditions: {:?}", report.failed_conditions());
        Ok(1)
    }
}

fn manifolds(cfg: &ExperimentConfig) -> Result<u8, Failure> {
    let sec = &cfg.manifolds;
    let p = &cfg.params;
    let n_images = sec
        .n_images
        .unwrap_or_else(|| manifold::default_image_count(p, sec.refinement.seed_size));
    let config_err = |e: manifold::ManifoldError| Failure::Config(e.to_string());
    let unstable = manifold::trace_unstable(p, n_images, sec.clip, &sec.refinement).map_err(config_err)?;
    let stable =
        manifold::trace_stable(p, sec.depth, sec.clip, &sec.refinement, Execution::Parallel).map_err(config_err)?;
    let hits = manifold::detect_tangencies(&unstable, sec.axis_tol);

    for c in std::iter::once(&unstable).chain(&stable) {
        if c.truncated {
            eprintln!("warning: point budget exhausted; curve {:?} is partial", c.label);
        }
    }
    let unstable_path = cfg.output_dir.join("unstable.csv");
    csvio::write_curves_csv(create(&unstable_path)?, std::slice::from_ref(&unstable), 0)
        .map_err(csv_err(&unstable_path))?;
    let stable_path = cfg.output_dir.join("stable.csv");
    csvio::write_curves_csv(create(&stable_path)?, &stable, 0).map_err(csv_err(&stable_path))?;
    let hits_path = cfg.output_dir.join("tangencies.csv");
    csvio::write_tangencies_csv(create(&hits_path)?, &hits).map_err(csv_err(&hits_path))?;

    println!(
        "unstable: {} images, {} points in {} pieces, arc length {:.4}",
        n_images,
        unstable.points.len(),
        unstable.piece_starts.len(),
        unstable.arc_length
    );
    println!(
        "stable: {} branches to depth {}, {} points",
        stable.len(),
        sec.depth,
        stable.iter().map(|c| c.points.len()).sum::<usize>()
    );
    for h in &hits {
        if h.contact == Contact::Tangential {
            println!(
                "tangency at ({}, {}) from side {}",
                h.location.x, h.location.y, h.curvature_sign
            );
        }
    }
    let crossings = hits.iter().filter(|h| h.contact == Contact::Transversal).count();
    println!("{crossings} transversal crossings of the x-axis");
    Ok(0)
}

fn load_registry(cfg: &ExperimentConfig) -> Result<AttractorRegistry, Failure> {
    let sec = &cfg.basins;
    let p = &cfg.params;
    let reg_err = |e: BasinError| Failure::Config(format!("attractor registry: {e}"));
    if sec.registry == "auto" {
        let scan = scan_srk(p, sec.k_min, sec.k_max, &OrbitOptions::default(), Execution::Parallel);
        return AttractorRegistry::from_srk_orbits(p, scan.iter().filter_map(|e| e.stable())).map_err(reg_err);
    }
    let path = Path::new(&sec.registry);
    let file = File::open(path).map_err(io_err(path))?;
    let records = csvio::read_orbits_csv(file).map_err(|e| match e {
        csvio::IoError::Io(e) => Failure::Io(format!("{}: {e}", path.display())),
        other => Failure::Config(format!("{}: {other}", path.display())),
    })?;
    let mut reg = AttractorRegistry::new();
    for r in records {
        if r.stability == StabilityClass::AsymptoticallyStable && reg.get(r.k).is_none() {
            reg.register(p, r.k, format!("SR_{}", r.k), r.points, None)
                .map_err(reg_err)?;
        }
    }
    Ok(reg)
}

/// Registers attractors of the configured periods found from unclassified
/// cells of a coarse preview raster.
fn discover(cfg: &ExperimentConfig, reg: &mut AttractorRegistry) -> Result<(), Failure> {
    const PREVIEW: (usize, usize) = (50, 50);
    let sec = &cfg.basins;
    for &period in &sec.discover_periods {
        let preview = basin::raster(&cfg.params, reg, sec.window, PREVIEW, &sec.limits, Execution::Parallel)
            .map_err(|e| Failure::Config(e.to_string()))?;
        match basin::discover_attractor(
            &cfg.params,
            &preview,
            reg,
            period,
            sec.limits.max_iter,
            &OrbitOptions::default(),
        ) {
            Ok(orbit) => {
                let id = reg.next_id();
                match reg.register(&cfg.params, id, format!("P{period}"), orbit.points, None) {
                    Ok(_) => println!("registered period-{period} attractor as id {id}"),
                    Err(e) => eprintln!("warning: period-{period} attractor not registered: {e}"),
                }
            }
            Err(e) => eprintln!("warning: no period-{period} attractor found: {e}"),
        }
    }
    Ok(())
}

fn basins(cfg: &ExperimentConfig) -> Result<u8, Failure> {
    let sec = &cfg.basins;
    let [nx, ny] = sec.resolution;
    if nx < 2 || ny < 2 {
        return Err(Failure::Config(format!(
            "resolution must be at least 2x2 (got {nx}x{ny})"
        )));
    }
    if !sec.window.is_valid() {
        return Err(Failure::Config(
            "basins.window must have positive width and height".into(),
        ));
    }
    let mut reg = load_registry(cfg)?;
    if reg.is_empty() {
        return Err(Failure::Config("attractor registry is empty".into()));
    }
    discover(cfg, &mut reg)?;
    let grid = basin::raster(
        &cfg.params,
        &reg,
        sec.window,
        (nx, ny),
        &sec.limits,
        Execution::Parallel,
    )
    .map_err(|e| Failure::Config(e.to_string()))?;

    let ppm_path = cfg.output_dir.join("basins.ppm");
    basin::write_ppm(&grid, &reg, &ppm_path).map_err(|e| Failure::Io(format!("{}: {e}", ppm_path.display())))?;
    let legend_path = cfg.output_dir.join("basin_legend.csv");
    csvio::write_legend_csv(create(&legend_path)?, &reg).map_err(csv_err(&legend_path))?;
    let stats_path = cfg.output_dir.join("basin_stats.csv");
    csvio::write_basin_stats_csv(create(&stats_path)?, &grid).map_err(csv_err(&stats_path))?;
    if sec.labels_csv {
        let labels_path = cfg.output_dir.join("basin_labels.csv");
        csvio::write_basin_labels_csv(create(&labels_path)?, &grid).map_err(csv_err(&labels_path))?;
    }

    let missed = self_check(&cfg.params, &reg, &grid);
    println!("{}x{} raster over {:?}, {} attractors", nx, ny, sec.window, reg.len());
    for (label, count) in grid.counts() {
        let name = match label {
            BasinLabel::Attractor(id) => reg.get(id).map_or(id.to_string(), |a| a.label.clone()),
            other => other.to_string(),
        };
        println!(
            "  {name:<10} {count:>8}  {:>8.4}%",
            100.0 * count as f64 / grid.labels.len() as f64
        );
    }
    if missed > 0 {
        eprintln!("warning: {missed} attractor points inside the window did not classify to their own attractor");
    }
    println!("wrote {}", ppm_path.display());
    Ok(0)
}

/// Attractor points inside the window whose own classification disagrees
/// with their attractor.
fn self_check(params: &MapParams, reg: &AttractorRegistry, grid: &basin::BasinGrid) -> usize {
    let limits = basin::BasinLimits::default();
    reg.entries()
        .iter()
        .flat_map(|a| a.points.iter().map(move |p| (a.id, *p)))
        .filter(|(_, p)| grid.window.contains(*p))
        .filter(|(id, p)| basin::classify_point(params, reg, *p, &limits) != BasinLabel::Attractor(*id))
        .count()
}
