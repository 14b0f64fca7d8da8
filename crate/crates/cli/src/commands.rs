//! The four subcommands. Each validates its settings, runs the solver(s)
//! and writes `<prefix>_<kind>.csv` (plus a plot script for `price`).

use std::fmt;
use std::path::{Path, PathBuf};

use rapm_fem::elements::NonlinearVariant;
use rapm_fem::mesh::{uniform_mesh, ElementOrder, Mesh1D};
use rapm_fem::model::{bs_call_price, RapmParams};
use rapm_fem::reference_fdm::{fdm_solve, FdmConfig};
use rapm_fem::report::{price_plot_script, run_metadata, CsvTable, PriceTable};
use rapm_fem::solver::{solve_nonlinear_phase, variant_label, SolutionSurface, SolverConfig};
use rapm_fem::{Error, NonFiniteFailure};
use rayon::prelude::*;

use crate::settings::{ConfigError, Settings};

/// Why a run stopped; decides the exit status.
#[derive(Debug)]
pub enum Failure {
    Config(ConfigError),
    Numerical(Error),
    Io { path: PathBuf, source: std::io::Error },
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Numerical(_) => 3,
            Failure::Io { .. } => 1,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(e) => write!(f, "configuration error: {e}"),
            Failure::Numerical(e) => write!(f, "numerical failure: {e}"),
            Failure::Io { path, source } => write!(f, "cannot write {}: {source}", path.display()),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

/// Solver errors that stem from the configuration rather than the numerics.
fn classify(e: Error) -> Failure {
    match e {
        Error::InvalidParameter { name, .. } => {
            let msg = e.to_string();
            Failure::Config(ConfigError::new(name.replace('_', "-"), msg))
        }
        Error::InvalidSpacing { .. } => Failure::Config(ConfigError::new("dx", e.to_string())),
        Error::SpotOutOfDomain { .. } => Failure::Config(ConfigError::new("spots", e.to_string())),
        Error::InvalidConfig(_) => Failure::Config(ConfigError::new("config", e.to_string())),
        other => Failure::Numerical(other),
    }
}

fn path_for(prefix: &str, suffix: &str) -> PathBuf {
    PathBuf::from(format!("{prefix}_{suffix}"))
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    let io = |source| Failure::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    std::fs::write(path, contents).map_err(io)
}

/// Writes the last finite state of a diverged run next to the requested
/// outputs and describes it on stderr.
pub fn dump_failure(prefix: &str, failure: &Failure) {
    let Failure::Numerical(err) = failure else {
        return;
    };
    match err {
        Error::NonFiniteState(state) => {
            let NonFiniteFailure {
                step,
                tau,
                u,
                v,
                dtau_dx2,
            } = state.as_ref();
            let max_abs = |xs: &[f64]| xs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            eprintln!("  failed macro step: {step}");
            eprintln!("  last finite tau:   {tau}");
            eprintln!("  dtau/dx^2:         {dtau_dx2}");
            eprintln!("  max |u|, max |v|:  {:e}, {:e}", max_abs(u), max_abs(v));
            eprintln!("  hint: reduce --dtau or raise --theta towards 1");
            let mut table = CsvTable::new(["node", "u", "v"]);
            table
                .meta("error", "non-finite state")
                .meta("step", step)
                .meta_f64("tau", *tau)
                .meta_f64("dtau_over_dx2", *dtau_dx2);
            for (i, (ui, vi)) in u.iter().zip(v).enumerate() {
                table.push_row(vec![
                    i.to_string(),
                    rapm_fem::report::fmt_f64(*ui),
                    rapm_fem::report::fmt_f64(*vi),
                ]);
            }
            let path = path_for(prefix, "failure.csv");
            match write_file(&path, &table.to_csv_string()) {
                Ok(()) => eprintln!("  last finite state written to {}", path.display()),
                Err(e) => eprintln!("  {e}"),
            }
        }
        Error::LinearSolveFailure { row, pivot, dtau_dx2 } => {
            eprintln!("  singular pivot {pivot:e} at row {row}");
            if let Some(r) = dtau_dx2 {
                eprintln!("  dtau/dx^2: {r}");
            }
        }
        _ => {}
    }
}

struct Prepared {
    params: RapmParams,
    solver: SolverConfig,
}

fn prepare(s: &Settings) -> Result<Prepared, Failure> {
    Ok(Prepared {
        params: s.params()?,
        solver: s.solver()?,
    })
}

fn mesh(s: &Settings, dx: f64, order: ElementOrder) -> Result<Mesh1D, Failure> {
    uniform_mesh(s.radius, dx, order).map_err(classify)
}

fn solve(p: &RapmParams, mesh: &Mesh1D, cfg: &SolverConfig) -> Result<SolutionSurface, Failure> {
    solve_nonlinear_phase(p, mesh, cfg).map_err(classify)
}

fn metadata(s: &Settings, p: &RapmParams, cfg: &SolverConfig, surface: &SolutionSurface) -> Vec<(String, String)> {
    let mut table = CsvTable::default();
    run_metadata(&mut table, p, s.radius, cfg, s.order, &surface.diagnostics);
    table.metadata
}

pub fn run_price(s: &Settings) -> Result<(), Failure> {
    let Prepared { params, solver } = prepare(s)?;
    let spots = s.spot_values();
    s.check_spots(&spots)?;
    let surface = solve(&params, &mesh(s, s.dx, s.order)?, &solver)?;
    let prices = spots
        .iter()
        .map(|&x| surface.price_at_spot(x).map(|v| (x, v)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(classify)?;
    let table = PriceTable::new(metadata(s, &params, &solver, &surface), &prices, &params).map_err(classify)?;
    let csv = path_for(&s.out, "price.csv");
    write_file(&csv, &table.to_csv().to_csv_string())?;
    let csv_name = csv
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let title = format!("{} European call, t = 0", variant_label(s.order, solver.nonlinearity));
    write_file(
        &path_for(&s.out, "price.gp"),
        &price_plot_script(&csv_name, params.strike(), &title),
    )?;
    let k = params.strike();
    let at_strike = surface.price_at_spot(k).map_err(classify)?;
    println!(
        "V(K={k}, 0) = {at_strike:.6} (Black-Scholes {:.6}); {} rows written to {}",
        bs_call_price(k, 0.0, &params),
        table.rows.len(),
        csv.display()
    );
    Ok(())
}

pub fn run_surface(s: &Settings) -> Result<(), Failure> {
    let Prepared { params, solver } = prepare(s)?;
    let spots = s.spot_values();
    s.check_spots(&spots)?;
    let times = s.time_values()?;
    let surface = solve(&params, &mesh(s, s.dx, s.order)?, &solver)?;
    let mut table = CsvTable::new(["S", "t", "V"]);
    table.metadata = metadata(s, &params, &solver, &surface);
    for &t in &times {
        for &x in &spots {
            let v = surface.price(x, t).map_err(classify)?;
            table.push_numeric(&[x, t, v]);
        }
    }
    let csv = path_for(&s.out, "surface.csv");
    write_file(&csv, &table.to_csv_string())?;
    println!(
        "{} rows ({} times x {} spots) written to {}",
        table.rows.len(),
        times.len(),
        spots.len(),
        csv.display()
    );
    Ok(())
}

const VARIANTS: [(ElementOrder, NonlinearVariant); 4] = [
    (ElementOrder::P1, NonlinearVariant::GroupFe),
    (ElementOrder::P1, NonlinearVariant::Quadrature),
    (ElementOrder::P2, NonlinearVariant::GroupFe),
    (ElementOrder::P2, NonlinearVariant::Quadrature),
];

fn shared_metadata(table: &mut CsvTable, s: &Settings, p: &RapmParams, cfg: &SolverConfig) {
    let dc = p.derived();
    table
        .meta_f64("rate", p.rate())
        .meta_f64("sigma", p.sigma())
        .meta_f64("strike", p.strike())
        .meta_f64("expiry", p.expiry())
        .meta_f64("risk_premium", p.risk_premium())
        .meta_f64("txn_cost", p.txn_cost())
        .meta_f64("t_star", dc.t_star)
        .meta_f64("tau_star", dc.tau_star)
        .meta_f64("tau_max", dc.tau_max)
        .meta_f64("c_r", dc.c_r)
        .meta_f64("radius", s.radius)
        .meta("mass", cfg.mass_mode)
        .meta("power", cfg.power_mode)
        .meta("boundary_v", cfg.boundary_v)
        .meta("boundary_weighting", cfg.boundary_weighting)
        .meta_f64("theta", cfg.theta)
        .meta("rannacher", cfg.rannacher_substeps);
}

pub fn run_converge(s: &Settings) -> Result<(), Failure> {
    let Prepared { params, solver } = prepare(s)?;
    let cfg = SolverConfig {
        history_stride: usize::MAX,
        ..solver
    };
    let k = params.strike();
    let jobs: Vec<(ElementOrder, NonlinearVariant, f64)> = VARIANTS
        .iter()
        .flat_map(|&(o, v)| s.dx_ladder.iter().map(move |&dx| (o, v, dx)))
        .collect();
    // meshes first so configuration errors surface before any solve
    let meshes = jobs
        .iter()
        .map(|&(order, _, dx)| mesh(s, dx, order))
        .collect::<Result<Vec<_>, _>>()?;
    let results = jobs
        .par_iter()
        .zip(meshes.par_iter())
        .map(|(&(_, variant, _), m)| {
            let cfg = SolverConfig {
                nonlinearity: variant,
                ..cfg
            };
            let surface = solve(&params, m, &cfg)?;
            let v = surface.price_at_spot(k).map_err(classify)?;
            Ok((surface.diagnostics.dx, surface.diagnostics.dtau, v))
        })
        .collect::<Result<Vec<_>, Failure>>()?;

    let mut table = CsvTable::new(["variant", "dx", "V_K", "change"]);
    shared_metadata(&mut table, s, &params, &cfg);
    if let Some(&(_, dtau, _)) = results.first() {
        table.meta_f64("dtau_effective", dtau);
    }
    table.meta_f64("V_bs_K", bs_call_price(k, 0.0, &params));
    let per_variant = s.dx_ladder.len();
    for (chunk, &(order, variant)) in results.chunks(per_variant).zip(VARIANTS.iter()) {
        let label = variant_label(order, variant);
        let mut previous = None;
        for &(dx, _, v) in chunk {
            let change = previous.map_or(0.0, |p: f64| v - p);
            previous = Some(v);
            table.push_row(vec![
                label.clone(),
                rapm_fem::report::fmt_f64(dx),
                rapm_fem::report::fmt_f64(v),
                rapm_fem::report::fmt_f64(change),
            ]);
            println!("{label:<14} dx = {dx:<10.6} V(K,0) = {v:.8}  change = {change:+.3e}");
        }
    }
    let csv = path_for(&s.out, "converge.csv");
    write_file(&csv, &table.to_csv_string())?;
    println!("written to {}", csv.display());
    Ok(())
}

pub fn run_compare(s: &Settings) -> Result<(), Failure> {
    let Prepared { params, solver } = prepare(s)?;
    let fem_mesh = mesh(s, s.dx, s.order)?;
    let fdm_dx = s.fdm_dx.unwrap_or(s.dx);
    let fdm_cfg = FdmConfig {
        dx: fdm_dx,
        dtau: s.fdm_dtau.unwrap_or(fdm_dx * fdm_dx),
        radius: s.radius,
        theta: solver.theta,
        power_mode: solver.power_mode,
        rannacher_substeps: solver.rannacher_substeps,
    };
    // also rejects an unusable FDM spacing before solving
    let fdm_mesh = mesh(s, fdm_dx, ElementOrder::P1).map_err(|f| match f {
        Failure::Config(e) => Failure::Config(ConfigError::new("fdm-dx", e.message)),
        other => other,
    })?;
    let (fem, fdm) = rayon::join(
        || solve(&params, &fem_mesh, &solver),
        || fdm_solve(&params, &fdm_cfg).map_err(classify),
    );
    let (fem, fdm) = (fem?, fdm?);

    // rows at the nodes of the coarser grid inside [K/2, 2K]
    let k = params.strike();
    let coarse = if fdm.diagnostics.dx >= fem.diagnostics.dx {
        &fdm_mesh
    } else {
        &fem_mesh
    };
    let (lo, hi) = (0.5 * k, 2.0 * k);
    let spots: Vec<f64> = coarse
        .nodes()
        .iter()
        .map(|x| k * x.exp())
        .filter(|&sp| sp >= lo * (1.0 - 1e-12) && sp <= hi * (1.0 + 1e-12))
        .collect();
    let mut rows = Vec::with_capacity(spots.len());
    for &sp in &spots {
        let a = fem.price_at_spot(sp).map_err(classify)?;
        let b = fdm.price_at_spot(sp).map_err(classify)?;
        rows.push([sp, a, b, (a - b).abs()]);
    }
    let max = rows.iter().fold(0.0f64, |m, r| m.max(r[3]));
    let mean = rows.iter().map(|r| r[3]).sum::<f64>() / rows.len().max(1) as f64;

    let mut table = CsvTable::new(["S", "V_fem", "V_fdm", "absdiff"]);
    shared_metadata(&mut table, s, &params, &solver);
    table
        .meta("fem_variant", variant_label(s.order, solver.nonlinearity))
        .meta_f64("fem_dx_effective", fem.diagnostics.dx)
        .meta_f64("fem_dtau_effective", fem.diagnostics.dtau)
        .meta_f64("fdm_dx_effective", fdm.diagnostics.dx)
        .meta_f64("fdm_dtau_effective", fdm.diagnostics.dtau)
        .meta_f64("max_abs_diff", max)
        .meta_f64("mean_abs_diff", mean);
    for r in &rows {
        table.push_numeric(r);
    }
    let csv = path_for(&s.out, "compare.csv");
    write_file(&csv, &table.to_csv_string())?;
    println!(
        "max |V_fem - V_fdm| = {max:.6e}, mean = {mean:.6e} over {} points in [{lo}, {hi}]; written to {}",
        rows.len(),
        csv.display()
    );
    Ok(())
}
