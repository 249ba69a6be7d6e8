//! The `sliprelax` command-line front end.
//!
//! Exit codes: 0 success, 1 usage/config error (or a failed verification
//! suite), 2 infeasible side condition, 3 budget or guard failure.

pub mod config;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

pub use config::{Scenario, ScenarioConfig};

use crate::energy::total_energy;
use crate::error::{Error, Result};
use crate::fields::io::{read_raw, write_raw_scalar, write_vtk_scalar, write_vtk_vector, AnyField};
use crate::fields::{Grid3, ScalarField3};
use crate::geometry::Region;
use crate::lamination::{boundary_tent, default_tent_width, Laminate, LaminateStudy, Quadrature};
use crate::smoothing::{smooth_pipeline, PatchGeometry};
use crate::verify::run_verify;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "sliprelax", version, about = "Relaxation by lamination for single-slip plasticity")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Scenario file (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Seed for randomized commands (overrides the scenario's `seed`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Omit the timestamp from reports so identical runs are byte-identical.
    #[arg(long, global = true)]
    pub deterministic: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Itemized energy of the relaxed state.
    Energy,
    /// Laminate convergence study.
    Laminate,
    /// Smoothing pipeline for every patch.
    Smooth,
    /// Randomized property suites.
    Verify,
    /// Convert raw fields (and optionally a laminate) to VTK.
    Export,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Energy => "energy",
            Command::Laminate => "laminate",
            Command::Smooth => "smooth",
            Command::Verify => "verify",
            Command::Export => "export",
        }
    }

    pub fn parse_name(s: &str) -> Option<Self> {
        Some(match s {
            "energy" => Command::Energy,
            "laminate" => Command::Laminate,
            "smooth" => Command::Smooth,
            "verify" => Command::Verify,
            "export" => Command::Export,
            _ => return None,
        })
    }
}

/// Options shared by every command.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub deterministic: bool,
}

/// What a command produced: the main JSON report, extra text files, and
/// the exit status.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Value,
    pub exit_code: i32,
    pub files: Vec<PathBuf>,
}

/// Exit status for a failed command.
pub fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::Guard { .. } | Error::Budget { .. } => EXIT_BUDGET,
        _ => EXIT_ERROR,
    }
}

fn stamp(report: &mut Value, deterministic: bool) {
    if !deterministic {
        if let Value::Object(map) = report {
            map.insert(
                "generated_at".into(),
                Value::String(chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)),
            );
        }
    }
}

fn to_value<T: Serialize>(x: &T) -> Result<Value> {
    Ok(serde_json::to_value(x)?)
}

struct Writer<'a> {
    out: Option<&'a Path>,
    files: Vec<PathBuf>,
}

impl<'a> Writer<'a> {
    fn path(&mut self, name: &str) -> Result<Option<PathBuf>> {
        let Some(dir) = self.out else { return Ok(None) };
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let p = dir.join(name);
        self.files.push(p.clone());
        Ok(Some(p))
    }

    fn text(&mut self, name: &str, body: &str) -> Result<()> {
        if let Some(p) = self.path(name)? {
            std::fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }

    fn json(&mut self, name: &str, v: &Value) -> Result<()> {
        let mut s = serde_json::to_string_pretty(v)?;
        s.push('\n');
        self.text(name, &s)
    }
}

/// Runs `command` on a parsed scenario.
pub fn run_command(command: Command, scenario: &Scenario, opts: &RunOptions) -> Result<Outcome> {
    let mut w = Writer {
        out: opts.out.as_deref(),
        files: Vec::new(),
    };
    let (mut report, exit_code) = match command {
        Command::Energy => cmd_energy(scenario)?,
        Command::Laminate => cmd_laminate(scenario, &mut w)?,
        Command::Smooth => cmd_smooth(scenario, &mut w)?,
        Command::Verify => cmd_verify(scenario, opts.seed)?,
        Command::Export => cmd_export(scenario, &mut w)?,
    };
    stamp(&mut report, opts.deterministic);
    w.json(&format!("{}_report.json", command.name()), &report)?;
    Ok(Outcome {
        report,
        exit_code,
        files: w.files,
    })
}

fn cmd_energy(s: &Scenario) -> Result<(Value, i32)> {
    let state = s.relaxed_state()?;
    let report = total_energy(&state, &s.config.energy)?;
    let code = if report.feasible { EXIT_OK } else { EXIT_INFEASIBLE };
    let mut v = json!({ "command": "energy", "status": if report.feasible { "FEASIBLE" } else { "INFEASIBLE" } });
    v["report"] = to_value(&report)?;
    Ok((v, code))
}

fn laminate_study(s: &Scenario) -> Result<LaminateStudy> {
    let lc = &s.config.laminate;
    let i = lc.patch;
    let frame = s.patch_frame(i)?;
    let mut slip = s.analytic_slip(i)?;
    let pc = &s.config.patches[i];
    match &pc.region {
        Some(Region::All) => {}
        Some(r) if frame.approx_eq(&crate::fields::PatchFrame::identity()) => slip = slip.with_support(r.clone())?,
        Some(_) => {
            return Err(Error::Config {
                key: format!("patches[{i}].region"),
                reason: "laminating a rotated patch needs region `all` (profiles carry the support)".into(),
            })
        }
        None => {
            return Err(Error::Config {
                key: format!("patches[{i}].indicator_file"),
                reason: "the laminate command needs an analytic region".into(),
            })
        }
    }
    let mut grid = s.patch_grid(&frame)?;
    if let Some(res) = lc.evaluation_resolution {
        grid = Grid3::new(grid.extents(), res, grid.origin())?;
    }
    Ok(LaminateStudy {
        slip,
        system: s.systems()?[pc.system],
        displacement: s.displacement()?,
        params: s.config.energy,
        quadrature: Quadrature::new(grid, lc.nodes_per_slice)?,
    })
}

fn cmd_laminate(s: &Scenario, w: &mut Writer) -> Result<(Value, i32)> {
    let lc = &s.config.laminate;
    let study = laminate_study(s)?;
    let table = study.run(&lc.n_list)?;
    w.text("convergence.csv", &table.to_csv())?;
    let grid = study.quadrature.grid().clone();
    let mut tents = Vec::new();
    for &n in &lc.vtk_levels {
        let lam = study.laminate(n)?;
        let r = lam.rasterize(&grid)?;
        if let Some(p) = w.path(&format!("laminate_n{n}_slip.vtk"))? {
            write_vtk_vector(&p, &r.slip, "slip")?;
        }
        if let Some(p) = w.path(&format!("laminate_n{n}_corrector.vtk"))? {
            write_vtk_vector(&p, &r.corrector, "corrector")?;
        }
        if let Some(t) = lc.tent {
            let support = s.patch_indicator(lc.patch)?;
            let delta = default_tent_width(n, grid.extents()[0], t.scale);
            let (tented, report) = boundary_tent(&r.corrector, &support, lam.thickness(), delta)?;
            if let Some(p) = w.path(&format!("laminate_n{n}_corrector_tent.vtk"))? {
                write_vtk_vector(&p, &tented, "corrector")?;
            }
            tents.push(json!({ "n": n, "tent": to_value(&report)? }));
        }
    }
    let mut v = json!({ "command": "laminate" });
    v["table"] = to_value(&table)?;
    v["csv"] = Value::String(table.to_csv());
    if !tents.is_empty() {
        v["tents"] = Value::Array(tents);
    }
    Ok((v, EXIT_OK))
}

fn cmd_smooth(s: &Scenario, w: &mut Writer) -> Result<(Value, i32)> {
    let mut patches = Vec::new();
    for i in 0..s.config.patches.len() {
        let patch = s.slip_patch(i)?;
        let geom = PatchGeometry::from_patch(&patch)?;
        let ([c1, c2], report) = smooth_pipeline(patch.c1(), patch.c2(), &geom, &s.config.smooth)?;
        for (name, f) in [("c1", &c1), ("c2", &c2)] {
            if let Some(p) = w.path(&format!("patch{i}_{name}.raw"))? {
                write_raw_scalar(&p, f)?;
            }
        }
        patches.push(to_value(&report)?);
    }
    Ok((json!({ "command": "smooth", "patches": patches }), EXIT_OK))
}

fn cmd_verify(s: &Scenario, seed: Option<u64>) -> Result<(Value, i32)> {
    let seed = seed.or(s.config.seed).ok_or_else(|| Error::Config {
        key: "seed".into(),
        reason: "verify is randomized: pass --seed or set `seed`".into(),
    })?;
    let report = run_verify(&s.config.verify, seed)?;
    let code = if report.passed { EXIT_OK } else { EXIT_ERROR };
    let mut v = json!({ "command": "verify" });
    v["report"] = to_value(&report)?;
    Ok((v, code))
}

fn cmd_export(s: &Scenario, w: &mut Writer) -> Result<(Value, i32)> {
    let mut written = Vec::new();
    for f in &s.config.export.fields {
        let path = s.resolve(f);
        let field = read_raw(&path)?;
        let stem = path.file_stem().and_then(|x| x.to_str()).unwrap_or("field").to_string();
        if let Some(p) = w.path(&format!("{stem}.vtk"))? {
            match &field {
                AnyField::Scalar(x) => write_vtk_scalar(&p, x, &stem)?,
                AnyField::Vector(x) => write_vtk_vector(&p, x, &stem)?,
            }
            written.push(p.display().to_string());
        }
    }
    if let Some(n) = s.config.export.laminate_level {
        let study = laminate_study(s)?;
        let grid = study.quadrature.grid().clone();
        let lam: Laminate = study.laminate(n)?;
        let r = lam.rasterize(&grid)?;
        let magnitude = ScalarField3::new(
            grid.clone(),
            *r.slip.frame(),
            r.slip.values().iter().map(|v| crate::linalg::norm(*v)).collect(),
        )?;
        if let Some(p) = w.path(&format!("laminate_n{n}_slip_magnitude.vtk"))? {
            write_vtk_scalar(&p, &magnitude, "slip_magnitude")?;
            written.push(p.display().to_string());
        }
        if let Some(p) = w.path(&format!("laminate_n{n}.json"))? {
            let body = serde_json::to_string_pretty(&lam.dump())? + "\n";
            std::fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
        }
    }
    Ok((json!({ "command": "export", "written": written }), EXIT_OK))
}

fn error_report(command: Option<Command>, e: &Error, deterministic: bool) -> Value {
    let mut v = json!({
        "command": command.map(|c| c.name()),
        "status": match exit_code_for(e) { EXIT_BUDGET => "GUARD_OR_BUDGET", _ => "ERROR" },
        "error": e.to_string(),
    });
    stamp(&mut v, deterministic);
    v
}

/// Full CLI entry point; returns the process exit code.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(stderr, "{e}");
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_ERROR,
            };
        }
    };
    let Some(config) = cli.config.as_deref() else {
        let _ = writeln!(stderr, "error: --config <file> is required");
        return EXIT_ERROR;
    };
    let opts = RunOptions {
        out: Some(cli.out.clone()),
        seed: cli.seed,
        deterministic: cli.deterministic,
    };
    let result = Scenario::load(config).and_then(|s| run_command(cli.command, &s, &opts));
    match result {
        Ok(outcome) => {
            let _ = writeln!(stdout, "{}", serde_json::to_string_pretty(&outcome.report).unwrap_or_default());
            if outcome.exit_code == EXIT_INFEASIBLE {
                let _ = writeln!(stderr, "INFEASIBLE: side condition violated");
            }
            outcome.exit_code
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            let report = error_report(Some(cli.command), &e, cli.deterministic);
            let _ = writeln!(stdout, "{}", serde_json::to_string_pretty(&report).unwrap_or_default());
            exit_code_for(&e)
        }
    }
}
