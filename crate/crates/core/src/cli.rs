//! Command-line driver: flat `key = value` configuration, one subcommand per
//! study, one output directory per run.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use crate::assembly::assemble_static;
use crate::benchmark::{beta_sweep, run_contraction, sweep_csv, ContractionParams, Snapshot};
use crate::error::{Error, Result};
use crate::femspace::MiniSpace;
use crate::memory_kernel::{build_soe, gronwall_verify, positivity_check, regime_report, RegimeParams, TemperedKernel};
use crate::mesh::TriMesh;
use crate::sparsela::SaddleSystem;
use crate::timestepper::{ConvectionMode, LocalMemory};
use crate::verification::{convergence_study, decay_study, fmt17, projection_study, ManufacturedCase, StudySettings};
use crate::vtk::{write_vtk_file, PointData};

#[derive(Parser, Debug)]
#[command(
    name = "viscoflow",
    version,
    about = "Viscoelastic flow with a tempered power-law memory kernel"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    /// Flat `key = value` config file; command-line overrides win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// `key=value` overrides.
    pub overrides: Vec<String>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Spatial convergence table of the manufactured solution.
    Convergence(RunArgs),
    /// Exponential decay of the manufactured-solution errors.
    Decay(RunArgs),
    /// Single four-to-one contraction run.
    Contraction(RunArgs),
    /// Contraction runs over a list of β values.
    Sweep(RunArgs),
    /// Volterra-Stokes projection rates.
    Project(RunArgs),
    /// SOE certification, kernel moments and discrete positivity.
    KernelCheck(RunArgs),
    /// Smallness conditions of the decay theory.
    Regime(RunArgs),
    /// Convolution Grönwall bound against the discrete fixed point.
    Gronwall(RunArgs),
    /// Writes a mesh file.
    MeshGen(RunArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Convergence(_) => "convergence",
            Command::Decay(_) => "decay",
            Command::Contraction(_) => "contraction",
            Command::Sweep(_) => "sweep",
            Command::Project(_) => "project",
            Command::KernelCheck(_) => "kernel-check",
            Command::Regime(_) => "regime",
            Command::Gronwall(_) => "gronwall",
            Command::MeshGen(_) => "mesh-gen",
        }
    }

    pub fn args(&self) -> &RunArgs {
        match self {
            Command::Convergence(a)
            | Command::Decay(a)
            | Command::Contraction(a)
            | Command::Sweep(a)
            | Command::Project(a)
            | Command::KernelCheck(a)
            | Command::Regime(a)
            | Command::Gronwall(a)
            | Command::MeshGen(a) => a,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    F64,
    Usize,
    U64,
    Bool,
    F64List,
    UsizeList,
    Text,
}

/// Known keys, their value kinds and global defaults (`""` = unset).
const SCHEMA: &[(&str, Kind, &str)] = &[
    ("mu", Kind::F64, "1"),
    ("rho", Kind::F64, "16"),
    ("beta", Kind::F64, "0.5"),
    ("delta", Kind::F64, "10"),
    ("lambda1", Kind::F64, ""),
    ("lambda2", Kind::F64, ""),
    ("alpha", Kind::F64, "0"),
    ("gamma0", Kind::F64, "1"),
    ("c_star", Kind::F64, "1"),
    ("n", Kind::Usize, "16"),
    ("mesh", Kind::Text, ""),
    ("n_list", Kind::UsizeList, "4,8,16,32"),
    ("tau", Kind::F64, "1e-4"),
    ("t_final", Kind::F64, "0.5"),
    ("soe_tol", Kind::F64, "1e-8"),
    ("convection", Kind::Text, "semi-implicit"),
    ("local_memory", Kind::Text, "explicit"),
    ("stride", Kind::Usize, "100"),
    ("fit_start", Kind::F64, "0.1"),
    ("beta_list", Kind::F64List, "0,0.25,0.5,0.75"),
    ("include_newtonian", Kind::Bool, "true"),
    ("grading", Kind::F64, "0.1"),
    ("base_h", Kind::F64, "1"),
    ("ramp_time", Kind::F64, "0.1"),
    ("vtk_stride", Kind::Usize, "0"),
    ("mesh_kind", Kind::Text, "unit_square"),
    ("c", Kind::F64, "0.5"),
    ("c0", Kind::F64, "1"),
    ("beta_hat", Kind::F64, "0.5"),
    ("delta_hat", Kind::F64, "10"),
    ("alpha_hat", Kind::F64, "0"),
    ("trials", Kind::Usize, "1000"),
    ("seed", Kind::U64, "42"),
    ("dump_coo", Kind::Bool, "false"),
    ("out", Kind::Text, ""),
];

/// Per-subcommand defaults layered over [`SCHEMA`].
fn subcommand_defaults(cmd: &str) -> &'static [(&'static str, &'static str)] {
    match cmd {
        "decay" => &[("t_final", "1"), ("stride", "100")],
        "contraction" | "sweep" => &[("tau", "2e-3"), ("t_final", "5"), ("local_memory", "implicit")],
        "project" => &[("n_list", "4,8,16"), ("tau", "1e-3")],
        "kernel-check" => &[("tau", "1e-3"), ("t_final", "1")],
        "gronwall" => &[("tau", "1e-3"), ("t_final", "2")],
        _ => &[],
    }
}

/// Fully resolved flat configuration.
#[derive(Clone, Debug)]
pub struct StudyConfig {
    values: BTreeMap<String, String>,
    explicit: BTreeSet<String>,
}

fn kind_of(key: &str) -> Option<Kind> {
    SCHEMA.iter().find(|(k, _, _)| *k == key).map(|(_, kind, _)| *kind)
}

fn config_err(key: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("key={key}: {msg}"))
}

fn check_value(key: &str, kind: Kind, v: &str) -> Result<()> {
    let ok = match kind {
        Kind::F64 => v.parse::<f64>().map(|x| x.is_finite()).unwrap_or(false),
        Kind::Usize => v.parse::<usize>().is_ok(),
        Kind::U64 => v.parse::<u64>().is_ok(),
        Kind::Bool => matches!(v, "true" | "false" | "1" | "0"),
        Kind::F64List => {
            !v.is_empty()
                && v.split(',')
                    .all(|x| x.trim().parse::<f64>().map(|x| x.is_finite()).unwrap_or(false))
        }
        Kind::UsizeList => !v.is_empty() && v.split(',').all(|x| x.trim().parse::<usize>().is_ok()),
        Kind::Text => true,
    };
    if ok {
        Ok(())
    } else {
        Err(config_err(key, format!("cannot parse {v:?} as {kind:?}")))
    }
}

impl StudyConfig {
    pub fn defaults(cmd: &str) -> Self {
        let mut values: BTreeMap<String, String> =
            SCHEMA.iter().map(|(k, _, d)| (k.to_string(), d.to_string())).collect();
        for (k, v) in subcommand_defaults(cmd) {
            values.insert(k.to_string(), v.to_string());
        }
        Self {
            values,
            explicit: BTreeSet::new(),
        }
    }

    /// Sets one key, validating its type. `T` is accepted for `t_final`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = if key == "T" { "t_final" } else { key };
        let kind = kind_of(key).ok_or_else(|| config_err(key, "unknown key"))?;
        let value = value.trim();
        check_value(key, kind, value)?;
        self.values.insert(key.to_string(), value.to_string());
        self.explicit.insert(key.to_string());
        Ok(())
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    pub fn apply_override(&mut self, kv: &str) -> Result<()> {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override {kv:?}: expected key=value")))?;
        self.set(k.trim(), v)
    }

    /// Config file (if any), then overrides, then cross-key validation.
    pub fn load(cmd: &str, args: &RunArgs) -> Result<Self> {
        let mut cfg = Self::defaults(cmd);
        if let Some(path) = &args.config {
            let text =
                fs::read_to_string(path).map_err(|e| Error::Config(format!("config {}: {e}", path.display())))?;
            cfg.apply_text(&text)?;
        }
        for kv in &args.overrides {
            cfg.apply_override(kv)?;
        }
        cfg.resolve()?;
        Ok(cfg)
    }

    fn raw(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or("")
    }

    pub fn f64(&self, key: &str) -> f64 {
        self.raw(key).parse().expect("validated on set")
    }

    pub fn usize(&self, key: &str) -> usize {
        self.raw(key).parse().expect("validated on set")
    }

    pub fn u64(&self, key: &str) -> u64 {
        self.raw(key).parse().expect("validated on set")
    }

    pub fn bool(&self, key: &str) -> bool {
        matches!(self.raw(key), "true" | "1")
    }

    pub fn f64_list(&self, key: &str) -> Vec<f64> {
        self.raw(key)
            .split(',')
            .map(|x| x.trim().parse().expect("validated on set"))
            .collect()
    }

    pub fn usize_list(&self, key: &str) -> Vec<usize> {
        self.raw(key)
            .split(',')
            .map(|x| x.trim().parse().expect("validated on set"))
            .collect()
    }

    pub fn text(&self, key: &str) -> Option<&str> {
        Some(self.raw(key)).filter(|s| !s.is_empty())
    }

    /// Derives ρ, δ from relaxation times and checks ranges.
    fn resolve(&mut self) -> Result<()> {
        let l1 = self.text("lambda1").map(|_| self.f64("lambda1"));
        let l2 = self.text("lambda2").map(|_| self.f64("lambda2"));
        match (l1, l2) {
            (Some(l1), Some(l2)) => {
                for k in ["rho", "delta"] {
                    if self.explicit.contains(k) {
                        return Err(config_err(k, "conflicts with lambda1/lambda2"));
                    }
                }
                if !(l1 > 0.0) {
                    return Err(config_err("lambda1", "must be positive"));
                }
                if !(l2 > 0.0 && l2 <= l1) {
                    return Err(config_err("lambda2", "must satisfy 0 < lambda2 <= lambda1"));
                }
                let mu = self.f64("mu");
                let k = TemperedKernel::from_relaxation_times(mu, l1, l2, 0.0).map_err(|e| config_err("lambda1", e))?;
                self.values.insert("rho".into(), fmt17(k.rho()));
                self.values.insert("delta".into(), fmt17(k.delta()));
            }
            (Some(_), None) => return Err(config_err("lambda2", "required together with lambda1")),
            (None, Some(_)) => return Err(config_err("lambda1", "required together with lambda2")),
            (None, None) => {}
        }
        let beta = self.f64("beta");
        if !(0.0..1.0).contains(&beta) {
            return Err(config_err("beta", "must lie in [0, 1)"));
        }
        for k in ["mu", "tau", "t_final", "soe_tol", "grading", "base_h", "ramp_time"] {
            if !(self.f64(k) > 0.0) {
                return Err(config_err(k, "must be positive"));
            }
        }
        for k in ["rho", "delta", "alpha"] {
            if !(self.f64(k) >= 0.0) {
                return Err(config_err(k, "must be nonnegative"));
            }
        }
        if self.f64("t_final") < self.f64("tau") {
            return Err(config_err("t_final", "must be at least tau"));
        }
        if !matches!(self.raw("convection"), "semi-implicit" | "off") {
            return Err(config_err("convection", "expected semi-implicit or off"));
        }
        if !matches!(self.raw("local_memory"), "explicit" | "implicit") {
            return Err(config_err("local_memory", "expected explicit or implicit"));
        }
        if !matches!(self.raw("mesh_kind"), "unit_square" | "contraction") {
            return Err(config_err("mesh_kind", "expected unit_square or contraction"));
        }
        for b in self.f64_list("beta_list") {
            if !(0.0..1.0).contains(&b) {
                return Err(config_err("beta_list", format!("{b} outside [0, 1)")));
            }
        }
        Ok(())
    }

    /// `key = value` lines of every resolved key, sorted.
    pub fn manifest(&self, cmd: &str) -> String {
        let mut s = format!("subcommand = {cmd}\nversion = {}\n", env!("CARGO_PKG_VERSION"));
        for (k, v) in &self.values {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    pub fn kernel(&self) -> Result<TemperedKernel> {
        TemperedKernel::new(self.f64("beta"), self.f64("delta"), self.f64("rho")).map_err(|e| config_err("beta", e))
    }

    fn case(&self) -> Result<ManufacturedCase> {
        ManufacturedCase::new(self.f64("mu"), self.kernel()?)
    }

    fn settings(&self) -> StudySettings {
        let mut s = StudySettings::new(self.f64("tau"), self.f64("t_final"));
        s.soe_tol = self.f64("soe_tol");
        if self.raw("convection") == "off" {
            s.convection = ConvectionMode::Off;
        }
        s
    }

    fn contraction_params(&self) -> ContractionParams {
        ContractionParams {
            mu: self.f64("mu"),
            rho: self.f64("rho"),
            beta: self.f64("beta"),
            delta: self.f64("delta"),
            tau: self.f64("tau"),
            t_final: self.f64("t_final"),
            ramp_time: self.f64("ramp_time"),
            grading: self.f64("grading"),
            base_h: self.f64("base_h"),
            soe_tol: self.f64("soe_tol"),
            local_memory: if self.raw("local_memory") == "implicit" {
                LocalMemory::Implicit
            } else {
                LocalMemory::Explicit
            },
            snapshot_stride: self.usize("vtk_stride"),
            ..ContractionParams::default()
        }
    }

    fn study_mesh(&self) -> Result<TriMesh> {
        if let Some(path) = self.text("mesh") {
            return Ok(TriMesh::read(path)?);
        }
        Ok(match self.raw("mesh_kind") {
            "contraction" => TriMesh::contraction(self.f64("grading"), self.f64("base_h"))?,
            _ => TriMesh::unit_square(self.usize("n"))?,
        })
    }
}

/// Picks `out=` or a fresh `<subcommand>-<unix seconds>[-k]` directory.
fn output_dir(cmd: &str, cfg: &StudyConfig) -> Result<PathBuf> {
    let dir = match cfg.text("out") {
        Some(p) => PathBuf::from(p),
        None => {
            let secs = std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0);
            let base = format!("{cmd}-{secs}");
            let mut dir = PathBuf::from(&base);
            let mut k = 1;
            while dir.exists() {
                dir = PathBuf::from(format!("{base}-{k}"));
                k += 1;
            }
            dir
        }
    };
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn write(dir: &Path, name: &str, text: &str) -> Result<()> {
    fs::write(dir.join(name), text)?;
    Ok(())
}

fn write_snapshot_vtk(dir: &Path, name: &str, s: &Snapshot) -> Result<()> {
    let mesh = s.velocity.space().mesh().clone();
    let u = s.velocity.vertex_vectors();
    let p = &s.pressure.coeffs()[..mesh.n_vertices()];
    let psi = &s.psi.coeffs()[..mesh.n_vertices()];
    write_vtk_file(
        dir.join(name),
        &mesh,
        &format!("t = {}", s.t),
        &[
            PointData::Vectors("velocity", &u),
            PointData::Scalars("pressure", p),
            PointData::Scalars("psi", psi),
        ],
    )?;
    Ok(())
}

/// Writes the Stokes-type saddle matrix `[[M/τ + μK, −Bᵀ], [−B, 0]]` of the
/// study mesh in COO form (debugging aid).
fn dump_coo(dir: &Path, cfg: &StudyConfig, mesh: TriMesh) -> Result<()> {
    let space = MiniSpace::new(Arc::new(mesh));
    let ops = assemble_static(&space);
    let mut a = ops.mass.clone();
    a.scale(1.0 / cfg.f64("tau"));
    a.add_assign_scaled_subpattern(&ops.stiffness, cfg.f64("mu"))?;
    let pin = if space.pressure_has_null_space() { Some(0) } else { None };
    let sys = SaddleSystem::new(&a, &ops.divergence, space.dirichlet_mask(), pin)?;
    let mut f = std::io::BufWriter::new(fs::File::create(dir.join("system.coo"))?);
    sys.matrix().write_coo(&mut f)?;
    Ok(())
}

fn pass(b: bool) -> &'static str {
    if b {
        "PASS"
    } else {
        "FAIL"
    }
}

/// Runs one subcommand; returns the summary printed to stdout.
pub fn execute(cmd: &Command) -> Result<String> {
    let name = cmd.name();
    let cfg = StudyConfig::load(name, cmd.args())?;
    let dir = output_dir(name, &cfg)?;
    write(&dir, "run-manifest", &cfg.manifest(name))?;
    if cfg.bool("dump_coo") {
        let mesh = match name {
            "contraction" | "sweep" => cfg.contraction_params().mesh()?,
            _ => cfg.study_mesh()?,
        };
        dump_coo(&dir, &cfg, mesh)?;
    }
    let mut out = String::new();
    match cmd {
        Command::Convergence(_) => {
            let table = convergence_study(&cfg.case()?, &cfg.usize_list("n_list"), &cfg.settings())?;
            let csv = table.to_csv();
            write(&dir, "convergence.csv", &csv)?;
            out.push_str(&csv);
        }
        Command::Decay(_) => {
            let r = decay_study(
                &cfg.case()?,
                cfg.usize("n"),
                &cfg.settings(),
                cfg.usize("stride"),
                cfg.f64("fit_start"),
            )?;
            write(&dir, "decay.csv", &r.to_csv())?;
            let mut fit = String::new();
            for (k, f) in r.fits() {
                let _ = writeln!(
                    fit,
                    "{k}.slope = {}\n{k}.r_squared = {}\n{k}.status = {}",
                    fmt17(f.slope),
                    fmt17(f.r_squared),
                    pass(f.slope < 0.0 && f.r_squared >= 0.99)
                );
            }
            write(&dir, "fit.txt", &fit)?;
            out.push_str(&fit);
        }
        Command::Contraction(_) => {
            let params = cfg.contraction_params();
            let run = run_contraction(&params)?;
            let mut series = String::from("t,vortex_area,max_speed\n");
            for s in &run.snapshots {
                let _ = writeln!(series, "{},{},{}", fmt17(s.t), fmt17(s.vortex_area), fmt17(s.max_speed));
                write_snapshot_vtk(&dir, &format!("contraction_{:06}.vtk", s.step), s)?;
            }
            write(&dir, "contraction.csv", &series)?;
            let last = run.final_snapshot();
            let _ = write!(
                out,
                "vortex_area = {}\nmax_speed = {}\ninflow_flux = {}\noutflow_flux = {}\nflux_imbalance = {}\ninflow_profile_flux_error = {}\n",
                fmt17(last.vortex_area),
                fmt17(last.max_speed),
                fmt17(run.final_flux.inflow),
                fmt17(run.final_flux.outflow),
                fmt17(run.final_flux.imbalance()),
                fmt17(run.inflow_flux_error)
            );
            write(&dir, "summary.txt", &out)?;
        }
        Command::Sweep(_) => {
            let params = cfg.contraction_params();
            let rows = beta_sweep(&cfg.f64_list("beta_list"), &params, cfg.bool("include_newtonian"))?;
            let csv = sweep_csv(&rows);
            write(&dir, "sweep.csv", &csv)?;
            for r in &rows {
                match &r.outcome {
                    Ok(res) => write_snapshot_vtk(
                        &dir,
                        &format!("sweep_beta{}_rho{}.vtk", r.beta, r.rho),
                        res.run.final_snapshot(),
                    )?,
                    Err(e) => {
                        let _ = writeln!(out, "case beta={} rho={} failed: {e}", r.beta, r.rho);
                    }
                }
            }
            out.push_str(&csv);
        }
        Command::Project(_) => {
            let table = projection_study(
                &cfg.case()?,
                &cfg.usize_list("n_list"),
                cfg.f64("tau"),
                cfg.f64("t_final"),
                cfg.f64("soe_tol"),
            )?;
            let csv = table.to_csv();
            write(&dir, "projection.csv", &csv)?;
            out.push_str(&csv);
        }
        Command::KernelCheck(_) => {
            let k = cfg.kernel()?;
            let tol = cfg.f64("soe_tol");
            let soe = build_soe(&k, cfg.f64("tau"), cfg.f64("t_final"), tol)?;
            let mut modes = String::from("rate,weight\n");
            for (l, w) in soe.rates().iter().zip(soe.weights()) {
                let _ = writeln!(modes, "{},{}", fmt17(*l), fmt17(*w));
            }
            write(&dir, "soe.csv", &modes)?;
            let mass = k.moment(0.0, f64::INFINITY)?;
            let mass_err = (mass - k.total_mass()).abs() / k.total_mass();
            let pos = positivity_check(&k, cfg.f64("tau"), 64, cfg.usize("trials"), cfg.u64("seed"))?;
            let _ = write!(
                out,
                "soe_modes = {}\nsoe_certified_rel_err = {}\nsoe_certification = {}\nmoment_total_rel_err = {}\nmoment_check = {}\npositivity_min_normalized = {}\npositivity = {}\n",
                soe.n_modes(),
                fmt17(soe.certified_rel_err()),
                pass(soe.certified_rel_err() <= tol),
                fmt17(mass_err),
                pass(mass_err <= 1e-10),
                fmt17(pos.min_normalized),
                pass(pos.passed)
            );
            write(&dir, "kernel.txt", &out)?;
        }
        Command::Regime(_) => {
            let p = RegimeParams::new(
                cfg.f64("mu"),
                cfg.f64("rho"),
                cfg.f64("beta"),
                cfg.f64("delta"),
                cfg.f64("alpha"),
                cfg.f64("gamma0"),
                cfg.f64("c_star"),
            )?;
            out = regime_report(&p).to_string();
            if !out.ends_with('\n') {
                out.push('\n');
            }
            write(&dir, "regime.txt", &out)?;
        }
        Command::Gronwall(_) => {
            let r = gronwall_verify(
                cfg.f64("c"),
                cfg.f64("c0"),
                cfg.f64("beta_hat"),
                cfg.f64("delta_hat"),
                cfg.f64("alpha_hat"),
                cfg.f64("tau"),
                cfg.f64("t_final"),
            )?;
            let _ = write!(
                out,
                "status = {:?}\nthreshold = {}\nmax_ratio = {}\ny_final = {}\nsweeps = {}\nsteps = {}\n",
                r.status,
                fmt17(r.threshold),
                fmt17(r.max_ratio),
                fmt17(r.y_final),
                r.sweeps,
                r.steps
            );
            write(&dir, "gronwall.txt", &out)?;
        }
        Command::MeshGen(_) => {
            let mesh = cfg.study_mesh()?;
            mesh.write(dir.join("mesh.txt"))?;
            write_vtk_file(dir.join("mesh.vtk"), &mesh, "mesh", &[])?;
            let _ = write!(
                out,
                "vertices = {}\ntriangles = {}\nh_max = {}\narea = {}\n",
                mesh.n_vertices(),
                mesh.n_triangles(),
                fmt17(mesh.h_max()),
                fmt17(mesh.area())
            );
        }
    }
    let _ = writeln!(out, "output = {}", dir.display());
    Ok(out)
}

/// Parses `args` and runs; prints the summary or a one-line error.
/// Returns the process exit code.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(summary) => {
            print!("{summary}");
            0
        }
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error: {msg}");
            1
        }
    }
}
