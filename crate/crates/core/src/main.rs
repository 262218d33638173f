use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use isopart::bench::{
    cluster_bound_check, density_check, glueing_suite, perimeter_growth_check, steiner_report, volume_fixing_suite,
    BenchReport,
};
use isopart::constructions::{ConstructionKind, ConstructionSpec};
use isopart::grid::{anneal_replicas, best_replica, grid_energy, GridPartition};
use isopart::io::{load_partition, partition_to_json, render_svg, to_canonical_json, PartitionFile, RunConfig, SvgStyle};
use isopart::minimizer::{jitter, minimize, ConstraintMode, DescentOptions};
use isopart::network::{ArcPartition, StationarityTolerances};
use isopart::sphere::{make_equidistant_sites, SampleDomain, SpherePartition};
use isopart::{Error, Result};

#[derive(Parser)]
#[command(name = "isopart", version, about = "Locally isoperimetric planar partitions")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Seed for every randomized step.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Uniform stationarity tolerance (angles, curvature sums, pressures).
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Output file; relative paths are resolved against the configured
    /// output directory. Standard output when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Halfplane,
    TripleJunction,
    Lens,
    Peanut,
    Reuleaux,
    DoubleBubble,
    Disk,
}

impl From<Kind> for ConstructionKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Halfplane => ConstructionKind::Halfplane,
            Kind::TripleJunction => ConstructionKind::TripleJunction,
            Kind::Lens => ConstructionKind::Lens,
            Kind::Peanut => ConstructionKind::Peanut,
            Kind::Reuleaux => ConstructionKind::Reuleaux,
            Kind::DoubleBubble => ConstructionKind::DoubleBubble,
            Kind::Disk => ConstructionKind::Disk,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Lemma {
    Steiner,
    Glueing,
    Growth,
    Cluster,
    Density,
    VolumeFixing,
}

#[derive(Subcommand)]
enum Command {
    /// Build a standard partition and write its partition file.
    Construct {
        kind: Kind,
        /// Prescribed area of each finite region, in order.
        #[arg(long = "area")]
        areas: Vec<f64>,
        #[arg(long)]
        window_radius: Option<f64>,
    },
    /// Topology and stationarity report; exit status 1 if it fails.
    Verify { file: PathBuf },
    /// Areas, interface lengths and perimeter inside a disk around the origin.
    Measure {
        file: PathBuf,
        /// Defaults to the window radius.
        #[arg(long)]
        radius: Option<f64>,
    },
    /// Constrained perimeter minimization from a partition file.
    Minimize {
        file: PathBuf,
        #[arg(long, default_value_t = 200)]
        max_iterations: usize,
        /// Randomly displace interior vertices by up to this much first.
        #[arg(long)]
        jitter: Option<f64>,
        /// Leave every area free.
        #[arg(long)]
        unconstrained: bool,
        /// Also write the minimized partition file here.
        #[arg(long)]
        partition_out: Option<PathBuf>,
    },
    /// Lattice annealing cross-check of a partition's energy.
    Anneal {
        file: PathBuf,
        /// Cells per side; defaults to the configured grid size.
        #[arg(long)]
        n: Option<usize>,
        /// Side of the square window; defaults to `max(5, 3 * extent)`.
        #[arg(long)]
        side: Option<f64>,
        /// Proposals per free cell; defaults to the configured schedule.
        #[arg(long)]
        sweeps: Option<usize>,
        /// Parallel chains with seeds `seed, seed + 1, ...`.
        #[arg(long, default_value_t = 1)]
        replicas: usize,
        /// Start from the rasterized partition instead of round blobs.
        #[arg(long)]
        from_raster: bool,
        /// Write the best final labels as an ASCII PGM raster.
        #[arg(long)]
        raster: Option<PathBuf>,
    },
    /// Stereographic projection of the equidistant partition of a sphere.
    ProjectSphere {
        /// Number of cells N.
        #[arg(long, default_value_t = 3)]
        regions: usize,
        /// Sphere dimension d (cells of S^d, projected to R^d).
        #[arg(long, default_value_t = 2)]
        dim: usize,
        /// Put the pole inside this cell.
        #[arg(long)]
        pole_region: Option<usize>,
        /// Angular distance of the pole from that cell's site.
        #[arg(long, default_value_t = 0.0)]
        angle: f64,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
    },
    /// Lemma checks; prints a JSON array of reports, exit status 1 if any fails.
    Bench {
        lemma: Lemma,
        #[arg(long, default_value_t = 0.1)]
        rho: f64,
        /// Randomized instances for suite checks.
        #[arg(long, default_value_t = 50)]
        count: usize,
        /// Partition file for growth, cluster and density checks.
        #[arg(long)]
        file: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![2.0, 5.0, 10.0])]
        radii: Vec<f64>,
        /// Include wall-clock runtimes (makes output non-reproducible).
        #[arg(long)]
        timing: bool,
    },
    /// SVG drawing of a partition.
    Render {
        file: PathBuf,
        #[arg(long, default_value_t = 600.0)]
        size: f64,
        /// Half side of the drawn square in model units.
        #[arg(long)]
        view: Option<f64>,
    },
}

/// What a subcommand produced and whether it counts as a pass.
struct Outcome {
    text: String,
    ok: bool,
}

fn json_out(v: &impl serde::Serialize, ok: bool) -> Result<Outcome> {
    Ok(Outcome { text: to_canonical_json(v)?, ok })
}

fn tolerances(cfg: &RunConfig, g: &Global) -> StationarityTolerances {
    g.tol.map(StationarityTolerances::uniform).unwrap_or(cfg.tolerances)
}

fn run(cli: &Cli) -> Result<Outcome> {
    let g = &cli.global;
    let mut cfg = match &g.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    match &cli.command {
        Command::Construct { kind, areas, window_radius } => {
            let spec = ConstructionSpec { kind: (*kind).into(), areas: areas.clone(), window_radius: *window_radius };
            Ok(Outcome { text: partition_to_json(&spec.build()?)?, ok: true })
        }
        Command::Verify { file } => {
            let p = load_partition(file)?;
            let report = p.check_stationarity(&tolerances(&cfg, g));
            let ok = report.pass;
            json_out(&report, ok)
        }
        Command::Measure { file, radius } => {
            let p = load_partition(file)?;
            let r = radius.unwrap_or(p.window_radius);
            let m = p.region_measures(r)?;
            json_out(&json!({ "measures": m, "finite_areas": p.finite_areas() }), true)
        }
        Command::Minimize { file, max_iterations, jitter: amount, unconstrained, partition_out } => {
            let mut p = load_partition(file)?;
            if let Some(a) = amount {
                p = jitter(&p, *a, cfg.seed);
            }
            let mode = if *unconstrained { ConstraintMode::none() } else { ConstraintMode::all_finite(&p) };
            let opts = DescentOptions { max_iterations: *max_iterations, ..DescentOptions::default() };
            let res = minimize(&p, &mode, &opts, cfg.seed)?;
            if let Some(path) = partition_out {
                std::fs::write(cfg.resolve(path), partition_to_json(&res.partition)?)?;
            }
            let st = res.partition.check_stationarity(&g.tol.map(StationarityTolerances::uniform).unwrap_or_else(StationarityTolerances::relaxed));
            let report = json!({
                "energy": res.energy,
                "converged": res.converged,
                "iterations": res.iterations,
                "multipliers": res.multipliers,
                "pressures": res.partition.solve_pressures().p,
                "kkt_residual": res.kkt_residual,
                "stationary": st.pass,
                "trace": res.trace,
                "partition": PartitionFile::from_partition(&res.partition),
            });
            json_out(&report, res.converged)
        }
        Command::Anneal { file, n, side, sweeps, replicas, from_raster, raster } => {
            let p = load_partition(file)?;
            let n = n.unwrap_or(cfg.grid_size);
            let side = side.unwrap_or((3.0 * p.extent()).max(5.0));
            let mut schedule = cfg.schedule;
            if let Some(s) = sweeps {
                schedule.sweeps = *s;
            }
            let mut grid = GridPartition::rasterize(&p, n, side)?;
            let raster_energy = grid_energy(&grid);
            if !from_raster {
                let seeds = grid.centroids();
                grid.reseed(&seeds)?;
            }
            let seeds: Vec<u64> = (0..*replicas.max(&1) as u64).map(|k| cfg.seed.wrapping_add(k)).collect();
            let results = anneal_replicas(&grid, &schedule, &seeds)?;
            let best = best_replica(&results).expect("at least one replica");
            if let Some(path) = raster {
                std::fs::write(cfg.resolve(path), results[best].grid.to_pgm())?;
            }
            let reference = p.length_in_square(side / 2.0);
            let chains: Vec<Value> = results
                .iter()
                .map(|r| json!({ "seed": r.seed, "energy": r.energy, "initial_energy": r.initial_energy, "accepted": r.accepted }))
                .collect();
            json_out(
                &json!({
                    "n": n,
                    "h": grid.h,
                    "side": side,
                    "schedule": schedule,
                    "network_energy_in_square": reference,
                    "rasterized_energy": raster_energy,
                    "chains": chains,
                    "best": best,
                    "relative_gap": results[best].energy / reference - 1.0,
                    "trace": results[best].trace,
                    "counts": results[best].grid.counts(),
                    "targets": results[best].grid.targets,
                }),
                true,
            )
        }
        Command::ProjectSphere { regions, dim, pole_region, angle, samples } => {
            let sites = make_equidistant_sites(*regions, *dim)?;
            let gram = sites.gram_defect();
            let sp = match pole_region {
                Some(j) => SpherePartition::pole_in_region(sites, *j, *angle)?,
                None => SpherePartition::new(sites),
            };
            let mc = sp.monte_carlo_measures(SampleDomain::Sphere, *samples, cfg.seed)?;
            let far = if *dim == 2 {
                json!(sp.classify_projected(1e4, 4000, cfg.seed, 1e-3)?)
            } else {
                Value::Null
            };
            json_out(
                &json!({ "regions": regions, "dim": dim, "gram_defect": gram, "far_field": far, "sphere_measures": mc }),
                true,
            )
        }
        Command::Bench { lemma, rho, count, file, radii, timing } => {
            let need_file = || -> Result<ArcPartition> {
                let f = file.as_ref().ok_or_else(|| Error::InvalidArgument("this check needs --file".into()))?;
                load_partition(f)
            };
            let mut reports: Vec<BenchReport> = vec![match lemma {
                Lemma::Steiner => steiner_report(*rho)?,
                Lemma::Glueing => glueing_suite(*count, cfg.seed)?,
                Lemma::Growth => perimeter_growth_check(&need_file()?, radii)?,
                Lemma::Cluster => cluster_bound_check(&need_file()?)?,
                Lemma::Density => {
                    let r: Vec<f64> = radii.clone();
                    density_check(&need_file()?, *count, &r)?
                }
                Lemma::VolumeFixing => volume_fixing_suite(*count, 128, cfg.seed)?,
            }];
            if !timing {
                for r in &mut reports {
                    r.runtime_seconds = None;
                }
            }
            let ok = reports.iter().all(|r| r.pass);
            json_out(&reports, ok)
        }
        Command::Render { file, size, view } => {
            let p = load_partition(file)?;
            let style = SvgStyle { size: *size, view_half: *view, ..SvgStyle::default() };
            Ok(Outcome { text: render_svg(&p, &style), ok: true })
        }
    }
    .and_then(|outcome| {
        if let Some(path) = &g.out {
            let path = cfg.resolve(path);
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(&path, &outcome.text)?;
            Ok(Outcome { text: String::new(), ok: outcome.ok })
        } else {
            Ok(outcome)
        }
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(&cli) {
        Ok(outcome) => {
            print!("{}", outcome.text);
            if outcome.ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            // Bad argument values are usage errors, like unknown flags.
            ExitCode::from(if matches!(e, Error::InvalidArgument(_)) { 2 } else { 1 })
        }
    }
}
