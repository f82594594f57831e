//! Command-line driver: parses flags and the run configuration, executes one
//! pipeline inside a sized worker pool and writes a result bundle.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use tmdl::circuitmap::{composites, effective_params, tune_degenerate, CircuitParams, LjReading};
use tmdl::io::{ResultBundle, RunConfig, Table, Value};
use tmdl::meanfield::Phase;
use tmdl::perturbation::{boundary_curve, PhaseBoundary};
use tmdl::phasescan::{compare_boundaries, scan, ScanMethod, ScanOptions};
use tmdl::spectra::{dicke_curve, low_lying_gap_profile, staircase, SweepVariable};
use tmdl::spinmap::{lobe_pair_states, project_operators, xx_parameters};
use tmdl::{Error, ErrorKind, Result};

#[derive(Debug, Parser)]
#[command(name = "tmdl", version, about = "Two-mode Dicke-lattice toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
enum Command {
    /// Ground-state <N_e> along a g or mu sweep, with jump locations.
    Staircase,
    /// Perturbative critical hopping along a g or mu sweep.
    Boundary,
    /// Phase diagram on a (t, g) or (t, mu) grid.
    Scan,
    /// Effective XX spin-model parameters at one point.
    Spinmap,
    /// Effective model parameters of a circuit, optionally tuned to degeneracy.
    Circuit,
    /// Low-lying excitation gaps along a coupling sweep.
    Gapprofile,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Staircase => "staircase",
            Command::Boundary => "boundary",
            Command::Scan => "scan",
            Command::Spinmap => "spinmap",
            Command::Circuit => "circuit",
            Command::Gapprofile => "gapprofile",
        }
    }
}

#[derive(Debug, Default, Args)]
struct Flags {
    /// TOML configuration file (JSON when the extension is .json).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; a fresh timestamped directory under runs/ otherwise.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true)]
    n_atoms: Option<usize>,
    /// Sets omega1 = omega2.
    #[arg(long, global = true)]
    omega: Option<f64>,
    #[arg(long, global = true)]
    omega1: Option<f64>,
    #[arg(long, global = true)]
    omega2: Option<f64>,
    #[arg(long, global = true)]
    omega0: Option<f64>,
    /// Sets g1 = g2.
    #[arg(long, global = true)]
    g: Option<f64>,
    #[arg(long, global = true)]
    g1: Option<f64>,
    #[arg(long, global = true)]
    g2: Option<f64>,
    /// Sets g2 = ratio * g1 after the other coupling flags.
    #[arg(long, global = true)]
    ratio: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    mu: Option<f64>,
    #[arg(long, global = true)]
    z: Option<usize>,
    #[arg(long, global = true)]
    t: Option<f64>,
    /// Fixed photon cutoff; converged automatically otherwise.
    #[arg(long, global = true)]
    n_max: Option<usize>,
    /// var:lo:hi:count with var g or mu.
    #[arg(long, global = true, allow_hyphen_values = true)]
    sweep: Option<String>,
    /// lo:hi:count hopping grid of the scan.
    #[arg(long, global = true)]
    t_grid: Option<String>,
    /// meanfield, perturbation or both.
    #[arg(long, global = true)]
    method: Option<String>,
    /// Bisect the mean-field frontier inside each bracket.
    #[arg(long, global = true)]
    refine: bool,
    /// Number of excitation gaps in the gap profile.
    #[arg(long, global = true)]
    levels: Option<usize>,
    /// Junction composite reading: as_printed or deduplicated.
    #[arg(long, global = true)]
    reading: Option<String>,
}

/// Exit code of an error class.
pub fn exit_code(kind: ErrorKind) -> i32 {
    match kind {
        ErrorKind::Config => 2,
        ErrorKind::Numerical => 3,
        ErrorKind::Io => 4,
    }
}

fn kind_name(kind: ErrorKind) -> &'static str {
    match kind {
        ErrorKind::Config => "config",
        ErrorKind::Numerical => "numerical",
        ErrorKind::Io => "io",
    }
}

fn report_error(kind: ErrorKind, code: &str, message: &str) -> i32 {
    let body = json!({
        "status": "error",
        "kind": kind_name(kind),
        "code": code,
        "message": message,
    });
    eprintln!("{body}");
    exit_code(kind)
}

/// Runs the command line `argv` (program name first) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return 0;
        }
        Err(e) => {
            let msg = e.to_string();
            return report_error(ErrorKind::Config, "usage", msg.trim());
        }
    };
    match execute(&cli) {
        Ok(dir) => {
            println!("{}", json!({ "status": "ok", "output": dir }));
            0
        }
        Err(e) => report_error(e.kind(), e.code(), &e.to_string()),
    }
}

fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.flags.config {
        Some(p) => RunConfig::from_path(p)?,
        None => RunConfig::default(),
    };
    let name = cli.command.name();
    if let Some(s) = &cfg.subcommand {
        if s != name {
            return Err(Error::Config(format!(
                "configuration is for subcommand '{s}', not '{name}'"
            )));
        }
    }
    cfg.subcommand = Some(name.to_string());
    let f = &cli.flags;
    let m = &mut cfg.model;
    if let Some(v) = f.n_atoms {
        m.n_atoms = v;
    }
    if let Some(v) = f.omega {
        m.omega1 = v;
        m.omega2 = v;
    }
    if let Some(v) = f.omega1 {
        m.omega1 = v;
    }
    if let Some(v) = f.omega2 {
        m.omega2 = v;
    }
    if let Some(v) = f.omega0 {
        m.omega0 = v;
    }
    if let Some(v) = f.g {
        m.g1 = v;
        m.g2 = v;
    }
    if let Some(v) = f.g1 {
        m.g1 = v;
    }
    if let Some(v) = f.g2 {
        m.g2 = v;
    }
    if let Some(r) = f.ratio {
        if !(m.g1 > 0.0) {
            return Err(Error::Config("--ratio needs g1 > 0; set --g or --g1".into()));
        }
        m.g2 = r * m.g1;
    }
    if let Some(v) = f.mu {
        m.mu = v;
    }
    if let Some(v) = f.z {
        m.z = v;
    }
    if let Some(v) = f.t {
        m.t = v;
    }
    if let Some(v) = f.n_max {
        cfg.cutoff.n_max = Some(v);
    }
    if let Some(v) = &f.sweep {
        cfg.sweep = v.clone();
    }
    if let Some(v) = &f.t_grid {
        cfg.t_grid = v.clone();
    }
    if let Some(v) = &f.method {
        cfg.scan.method = v.parse::<ScanMethod>()?;
    }
    if f.refine {
        cfg.scan.refine_frontier = true;
    }
    if let Some(v) = f.levels {
        cfg.gapprofile.levels = v;
    }
    if let Some(v) = &f.reading {
        let reading = match v.as_str() {
            "as_printed" => LjReading::AsPrinted,
            "deduplicated" => LjReading::Deduplicated,
            other => return Err(Error::Config(format!("unknown reading '{other}'"))),
        };
        match cfg.circuit.as_mut() {
            Some(c) => c.reading = reading,
            None => return Err(Error::Config("--reading needs a [circuit] block".into())),
        }
    }
    if let Some(v) = &f.output {
        cfg.output = Some(v.clone());
    }
    if let Some(v) = f.workers {
        cfg.workers = Some(v);
    }
    cfg.validate()?;
    Ok(cfg)
}

/// `runs/<subcommand>-<local time>`, suffixed until it does not exist yet.
fn fresh_directory(name: &str) -> PathBuf {
    let stamp = chrono::Local::now().format("%Y%m%d-%H%M%S%.3f");
    let base = PathBuf::from("runs").join(format!("{name}-{stamp}"));
    let mut dir = base.clone();
    let mut k = 1;
    while dir.exists() {
        dir = PathBuf::from(format!("{}-{k}", base.display()));
        k += 1;
    }
    dir
}

fn execute(cli: &Cli) -> Result<PathBuf> {
    let cfg = resolve_config(cli)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cfg.workers {
        pool = pool.num_threads(w);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let dir = cfg
        .output
        .clone()
        .unwrap_or_else(|| fresh_directory(cli.command.name()));
    let mut bundle = ResultBundle::create(&dir, cli.command.name())?;
    pool.install(|| match cli.command {
        Command::Staircase => run_staircase(&cfg, &mut bundle),
        Command::Boundary => run_boundary(&cfg, &mut bundle),
        Command::Scan => run_scan(&cfg, &mut bundle),
        Command::Spinmap => run_spinmap(&cfg, &mut bundle),
        Command::Circuit => run_circuit(&cfg, &mut bundle),
        Command::Gapprofile => run_gapprofile(&cfg, &mut bundle),
    })?;
    bundle.finish(&cfg)?;
    Ok(dir)
}

fn run_staircase(cfg: &RunConfig, out: &mut ResultBundle) -> Result<()> {
    let sweep = cfg.sweep()?;
    let curve = staircase(&cfg.model, &sweep, &cfg.cutoff)?;
    let var = sweep.variable.name();
    let mut t = Table::new(&[var, "n", "jump_flag"]);
    for i in 0..curve.grid.len() {
        t.push(vec![curve.grid[i].into(), curve.n[i].into(), curve.jump_flags[i].into()])?;
    }
    out.write_table("staircase.csv", &t)?;
    let mut j = Table::new(&["lower", "upper", "location", "n_before", "n_after"]);
    for jump in &curve.jumps {
        j.push(vec![
            jump.lower.into(),
            jump.upper.into(),
            jump.location().into(),
            jump.n_before.into(),
            jump.n_after.into(),
        ])?;
    }
    out.write_table("jumps.csv", &j)?;
    out.cutoff("staircase", curve.n_max);
    out.summary("jump_count", curve.jumps.len());
    if sweep.variable == SweepVariable::G {
        let d = dicke_curve(&cfg.model, &sweep.grid, &cfg.cutoff)?;
        let mut t = Table::new(&["g", "n_s", "variance"]);
        for i in 0..d.grid.len() {
            t.push(vec![d.grid[i].into(), d.n_s[i].into(), d.variance[i].into()])?;
        }
        out.write_table("dicke.csv", &t)?;
        out.cutoff("dicke", d.n_max);
    }
    Ok(())
}

fn boundary_table(b: &PhaseBoundary) -> Result<Table> {
    let mut t = Table::new(&[b.variable.name(), "t_c", "n_lobe", "zt_c", "pinched"]);
    for p in &b.points {
        t.push(vec![p.x.into(), p.t_c.into(), p.n_lobe.into(), p.zt_c.into(), p.pinched.into()])?;
    }
    Ok(t)
}

fn run_boundary(cfg: &RunConfig, out: &mut ResultBundle) -> Result<()> {
    let sweep = cfg.sweep()?;
    let b = boundary_curve(&cfg.model, sweep.variable, &sweep.grid, cfg.model.z, &cfg.cutoff)?;
    out.write_table("boundary.csv", &boundary_table(&b)?)?;
    out.cutoff("boundary", b.n_max);
    out.summary("lobe_count", b.lobe_count());
    out.summary("pinch_points", b.pinch_points());
    Ok(())
}

fn run_scan(cfg: &RunConfig, out: &mut ResultBundle) -> Result<()> {
    let sweep = cfg.sweep()?;
    let t_grid = cfg.t_values()?;
    let opts = ScanOptions {
        meanfield: cfg.meanfield,
        cutoff: cfg.cutoff,
        refine_frontier: cfg.scan.refine_frontier,
    };
    let d = scan(&cfg.model, &t_grid, sweep.variable, &sweep.grid, cfg.scan.method, &opts)?;
    let var = d.axis2.name();
    let mut grid = Table::new(&["t", var, "phase", "psi1", "psi2", "n", "boundary_hit", "error"]);
    for c in &d.cells {
        grid.push(vec![
            c.t.into(),
            c.x.into(),
            c.phase.map(|p| p.label()).unwrap_or("").into(),
            c.psi1.into(),
            c.psi2.into(),
            c.n.into(),
            c.boundary_hit.into(),
            c.error.clone().unwrap_or_default().into(),
        ])?;
    }
    out.write_table("grid.csv", &grid)?;
    out.cutoff("scan", d.n_max);
    out.summary("failed_cells", d.failed_cells());
    out.summary("boundary_hits", d.boundary_hits());
    if d.failed_cells() > 0 {
        out.warn(format!("{} cells failed; see the error column of grid.csv", d.failed_cells()));
    }
    if d.cells.iter().any(|c| c.phase == Some(Phase::Mi)) {
        out.summary("mi_components", d.mi_components());
    }
    if let Some(b) = &d.boundary {
        out.write_table("boundary.csv", &boundary_table(b)?)?;
        out.summary("lobe_count", b.lobe_count());
    }
    if let Some(f) = &d.frontier {
        let mut t = Table::new(&[var, "t_c", "lower", "upper"]);
        for p in f {
            t.push(vec![p.x.into(), p.t_c.into(), p.lower.into(), p.upper.into()])?;
        }
        out.write_table("frontier.csv", &t)?;
        let cols = d.non_monotone_columns();
        if !cols.is_empty() {
            out.warn(format!("non-monotone columns at {var} = {cols:?}"));
        }
    }
    if d.boundary.is_some() && d.frontier.is_some() {
        let cmp = compare_boundaries(&d)?;
        let mut t = Table::new(&[var, "t_c_pt", "t_c_mf", "relative", "boundary_hits"]);
        for r in &cmp.rows {
            t.push(vec![
                r.x.into(),
                r.t_c_pt.into(),
                r.t_c_mf.into(),
                r.relative.into(),
                r.boundary_hits.into(),
            ])?;
        }
        out.write_table("comparison.csv", &t)?;
        out.summary("discrepancy_max", cmp.max);
        out.summary("discrepancy_median", cmp.median);
    }
    Ok(())
}

fn run_spinmap(cfg: &RunConfig, out: &mut ResultBundle) -> Result<()> {
    let pair = lobe_pair_states(&cfg.model, &cfg.spinmap, &cfg.cutoff)?;
    let proj = project_operators(&pair, cfg.spinmap.selection_tol)?;
    let xx = xx_parameters(pair.lower.label.value(), proj.alpha, proj.beta, pair.delta, cfg.model.t);
    let mut t = Table::new(&[
        "n_lobe",
        "delta",
        "alpha",
        "beta",
        "j",
        "t",
        "gap_ratio",
        "selection_residual",
    ]);
    t.push(vec![
        xx.n_lobe.into(),
        xx.delta.into(),
        xx.alpha.into(),
        xx.beta.into(),
        xx.j.into(),
        xx.t.into(),
        pair.gap_ratio.into(),
        proj.selection.max().into(),
    ])?;
    out.write_table("spinmap.csv", &t)?;
    let mut levels = Table::new(&["level", "energy", "n"]);
    for (i, s) in pair.states.iter().enumerate() {
        levels.push(vec![i.into(), s.energy.into(), s.label.value().into()])?;
    }
    out.write_table("levels.csv", &levels)?;
    out.cutoff("spinmap", pair.n_max);
    Ok(())
}

fn circuit_rows(t: &mut Table, c: &CircuitParams, reading: LjReading) -> Result<()> {
    let k = composites(c, reading)?;
    let e = effective_params(c, reading)?;
    let rows: [(&str, f64); 10] = [
        ("c_sigma", k.c_sigma),
        ("l_sigma", k.l_sigma),
        ("lt_j", k.lt_j),
        ("lt_s", k.lt_s),
        ("lt_c", k.lt_c),
        ("e_q", k.e_q),
        ("omega1", e.omega1),
        ("omega2", e.omega2),
        ("g1", e.g1),
        ("g2", e.g2),
    ];
    for (name, v) in rows {
        t.push(vec![name.into(), v.into()])?;
    }
    Ok(())
}

fn parameter_rows(c: &CircuitParams) -> [(&'static str, f64); 10] {
    [
        ("l1", c.l1),
        ("l2", c.l2),
        ("la", c.la),
        ("lb", c.lb),
        ("ca", c.ca),
        ("cb", c.cb),
        ("cg", c.cg),
        ("cj", c.cj),
        ("d", c.d),
        ("xs", c.xs),
    ]
}

fn run_circuit(cfg: &RunConfig, out: &mut ResultBundle) -> Result<()> {
    let Some(block) = &cfg.circuit else {
        return Err(Error::Config("the circuit subcommand needs a [circuit] block".into()));
    };
    let mut t = Table::new(&["quantity", "value"]);
    circuit_rows(&mut t, &block.params, block.reading)?;
    out.write_table("circuit.csv", &t)?;
    if let Some(tune) = &block.tune {
        let r = tune_degenerate(&block.params, &tune.targets(), &tune.free, block.reading)?;
        let mut p = Table::new(&["parameter", "seed", "tuned"]);
        for ((name, a), (_, b)) in parameter_rows(&block.params).iter().zip(parameter_rows(&r.circuit)) {
            p.push(vec![Value::from(*name), (*a).into(), b.into()])?;
        }
        out.write_table("tuned_parameters.csv", &p)?;
        let mut q = Table::new(&["quantity", "value"]);
        circuit_rows(&mut q, &r.circuit, block.reading)?;
        out.write_table("tuned_circuit.csv", &q)?;
        out.summary("omega_mismatch", r.omega_mismatch);
        out.summary("g_mismatch", r.g_mismatch);
        out.summary("iterations", r.iterations);
    }
    Ok(())
}

fn run_gapprofile(cfg: &RunConfig, out: &mut ResultBundle) -> Result<()> {
    let sweep = cfg.sweep()?;
    if sweep.variable != SweepVariable::G {
        return Err(Error::Config("the gap profile sweeps g".into()));
    }
    let (rows, n_max) = low_lying_gap_profile(&cfg.model, &sweep.grid, cfg.gapprofile.levels + 1, &cfg.cutoff)?;
    let mut t = Table::new(&["g", "level", "gap", "n"]);
    for r in &rows {
        for (i, gap) in r.gaps.iter().enumerate() {
            t.push(vec![r.g.into(), (i + 1).into(), (*gap).into(), r.n[i + 1].into()])?;
        }
    }
    out.write_table("gaps.csv", &t)?;
    out.cutoff("gapprofile", n_max);
    Ok(())
}

/// Reads back the metadata sidecar of a finished run.
pub fn read_metadata(dir: &Path) -> Result<tmdl::io::Metadata> {
    let text = std::fs::read_to_string(dir.join(tmdl::io::bundle::METADATA_FILE))?;
    serde_json::from_str(&text).map_err(|e| Error::Io(std::io::Error::other(e)))
}
