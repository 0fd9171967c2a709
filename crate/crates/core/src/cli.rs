//! Command implementations for the workbench binary.
//!
//! Exit codes: 0 = success, 1 = validation failure (invalid model, failed
//! identity checks, rejected reduction), 2 = configuration error (bad JSON,
//! unknown keys, unusable paths), 3 = solver failure.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::config::RunConfig;
use crate::evolution::{
    self, CausalityTracker, CompiledForcing, EnergyRow, EnergyTracker, EvoProblem, ForcingSpec,
    Observer, StepRecord, System, DEFAULT_SOLVE_TOL,
};
use crate::grid::Grid;
use crate::material::{BlockDesc, Validity};
use crate::reduction::{conjugate_problem, MapKind};
use crate::zoo;
use crate::{Error, Result};

#[derive(Parser)]
#[command(
    name = "microelast",
    version,
    about = "Structure-preserving workbench for linear models of micro-structured elastic solids"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Subcommand)]
pub enum Cmd {
    /// Check a configuration and its model for structural validity.
    Validate {
        /// Path to a JSON run configuration.
        config: PathBuf,
    },
    /// Integrate the configured model and write the requested outputs.
    Run {
        /// Path to a JSON run configuration.
        config: PathBuf,
        /// Integrate even when the structural verdict is invalid.
        #[arg(long)]
        force: bool,
    },
    /// Build the descendant along the configured reduction edge and verify
    /// that conjugation and direct construction agree.
    Derive {
        /// Path to a JSON run configuration with an `edge` section.
        config: PathBuf,
    },
    /// Model catalog queries.
    Zoo {
        #[command(subcommand)]
        action: ZooCmd,
    },
}

#[derive(Subcommand)]
pub enum ZooCmd {
    /// Print the model catalog (state blocks, defaults, reduction edges).
    List,
}

/// Maps an error to the process exit code.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Json(_) | Error::Io(_) | Error::Shape(_) => 2,
        Error::InvalidModel(_) | Error::Reduction(_) => 1,
        Error::Solver { .. } | Error::Singular(_) => 3,
    }
}

/// Parses process arguments, runs the command, and returns the exit code.
pub fn run_cli() -> i32 {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cmd: Cmd) -> Result<i32> {
    match cmd {
        Cmd::Validate { config } => cmd_validate(&config),
        Cmd::Run { config, force } => cmd_run(&config, force),
        Cmd::Derive { config } => cmd_derive(&config),
        Cmd::Zoo { action: ZooCmd::List } => cmd_zoo_list(),
    }
}

/// Builds the grid-level problem a configuration describes.
pub fn build_problem(cfg: &RunConfig) -> Result<EvoProblem> {
    let built = zoo::build(cfg.model.name, cfg.model.params.as_ref())?;
    let grid = cfg.grid.grid()?;
    let ops = built.instantiate(&grid)?;
    let forcing = match &cfg.forcing {
        Some(spec) => CompiledForcing::compile(spec, &ops.layout, &grid)?,
        None => CompiledForcing::zero(ops.m0.nrows()),
    };
    Ok(EvoProblem {
        layout: ops.layout,
        grid,
        m0: ops.m0,
        m1: ops.m1,
        m2: ops.m2,
        a: ops.a,
        forcing,
        validity: built.validity,
    })
}

fn cmd_validate(path: &Path) -> Result<i32> {
    let cfg = RunConfig::from_path(path)?;
    let built = zoo::build(cfg.model.name, cfg.model.params.as_ref())?;
    let grid = cfg.grid.grid()?;
    if let Some(spec) = &cfg.forcing {
        CompiledForcing::compile(spec, built.layout(), &grid)?;
    }
    let per_node: usize = built.layout().iter().map(|b| b.dim()).sum();
    let report = json!({
        "model": built.name,
        "verdict": built.validity,
        "state_blocks": built.layout().iter().map(|b| json!({
            "label": b.label, "order": b.order, "tag": b.tag, "dim_per_node": b.dim(),
        })).collect::<Vec<_>>(),
        "dim_per_node": per_node,
        "dim": per_node * grid.nodes(),
        "steps": cfg.steps(),
    });
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(if built.validity.is_valid() { 0 } else { 1 })
}

/// Euclidean norm tracker for the exponentially weighted diagnostics.
#[derive(Default)]
struct NormTracker {
    ts: Vec<f64>,
    xs: Vec<f64>,
}

fn norm2(u: &[f64]) -> f64 {
    u.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl Observer for NormTracker {
    fn begin(&mut self, t0: f64, u0: &[f64], _v0: &[f64], _sys: &System) {
        self.ts.push(t0);
        self.xs.push(norm2(u0));
    }
    fn observe(&mut self, rec: &StepRecord<'_>, _sys: &System) {
        self.ts.push(rec.t);
        self.xs.push(norm2(rec.u));
    }
}

/// Buffers state frames at a fixed step cadence (0 disables buffering).
struct SnapshotBuffer {
    every: usize,
    frames: Vec<(usize, f64, Vec<f64>)>,
}

impl Observer for SnapshotBuffer {
    fn begin(&mut self, t0: f64, u0: &[f64], _v0: &[f64], _sys: &System) {
        if self.every > 0 {
            self.frames.push((0, t0, u0.to_vec()));
        }
    }
    fn observe(&mut self, rec: &StepRecord<'_>, _sys: &System) {
        if self.every > 0 && rec.step % self.every == 0 {
            self.frames.push((rec.step, rec.t, rec.u.to_vec()));
        }
    }
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    Ok(())
}

fn write_energy_csv(path: &Path, rows: &[EnergyRow]) -> Result<()> {
    ensure_parent(path)?;
    let mut out = String::with_capacity(rows.len() * 160 + 64);
    out.push_str("t,E_total,E_M0,E_M2,work_integral,residual\n");
    for r in rows {
        out.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            r.t, r.e_total, r.e_m0, r.e_m2, r.work_integral, r.residual
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn snapshot_path(prefix: &Path, step: usize, ext: &str) -> PathBuf {
    let stem = prefix
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "snapshot".to_string());
    prefix.with_file_name(format!("{stem}_{step:06}.{ext}"))
}

/// Writes buffered frames as text (node-major, slot-minor: for each node,
/// each state block's slots in layout order, one value per line) plus a JSON
/// sidecar per frame describing the ordering.
fn write_snapshots(
    prefix: &Path,
    layout: &[BlockDesc],
    grid: &Grid,
    dt: f64,
    frames: &[(usize, f64, Vec<f64>)],
) -> Result<()> {
    ensure_parent(prefix)?;
    let nodes = grid.nodes();
    let dims: Vec<usize> = layout.iter().map(|b| b.dim()).collect();
    let mut offsets = Vec::with_capacity(dims.len());
    let mut acc = 0usize;
    for d in &dims {
        offsets.push(acc);
        acc += d * nodes;
    }
    for (step, t, u) in frames {
        let mut text = String::with_capacity(u.len() * 25);
        for node in 0..nodes {
            for (bi, d) in dims.iter().enumerate() {
                let base = offsets[bi] + node * d;
                for s in 0..*d {
                    text.push_str(&format!("{:.16e}\n", u[base + s]));
                }
            }
        }
        std::fs::write(snapshot_path(prefix, *step, "txt"), text)?;
        let sidecar = json!({
            "step": step,
            "time": t,
            "dt": dt,
            "grid": {"n": grid.n, "h": grid.h},
            "ordering": "node-major, slot-minor",
            "format": "one value per line, 17 significant digits",
            "values_per_node": dims.iter().sum::<usize>(),
            "blocks": layout.iter().map(|b| json!({
                "label": b.label, "order": b.order, "tag": b.tag, "dim_per_node": b.dim(),
            })).collect::<Vec<_>>(),
        });
        let mut doc = serde_json::to_string_pretty(&sidecar)?;
        doc.push('\n');
        std::fs::write(snapshot_path(prefix, *step, "json"), doc)?;
    }
    Ok(())
}

fn cmd_run(path: &Path, force: bool) -> Result<i32> {
    let cfg = RunConfig::from_path(path)?;
    let problem = build_problem(&cfg)?;
    if !problem.validity.is_valid() && !force {
        if let Validity::Invalid { reason } = &problem.validity {
            return Err(Error::InvalidModel(format!(
                "{reason} (pass --force to integrate anyway)"
            )));
        }
    }
    let sys = problem.system();
    let steps = cfg.steps();
    let n = problem.dim();
    let onset = cfg.forcing.as_ref().map(|f| f.onset()).unwrap_or(f64::INFINITY);

    let mut energy = EnergyTracker::new(cfg.scheme, cfg.dt);
    let mut causality = CausalityTracker::new(onset);
    let mut norms = NormTracker::default();
    let mut snaps = SnapshotBuffer { every: cfg.outputs.snapshot_every, frames: Vec::new() };
    {
        let mut forcing = problem.forcing.as_fn();
        let mut observers: Vec<&mut dyn Observer> =
            vec![&mut energy, &mut causality, &mut norms, &mut snaps];
        evolution::run_with(
            &sys,
            problem.grid.nodes(),
            cfg.scheme,
            cfg.dt,
            steps,
            0.0,
            vec![0.0; n],
            vec![0.0; n],
            DEFAULT_SOLVE_TOL,
            &mut forcing,
            &mut observers,
        )?;
    }

    if let Some(csv) = &cfg.outputs.energy_csv {
        write_energy_csv(csv, &energy.rows)?;
    }
    if let Some(prefix) = &cfg.outputs.snapshot_prefix {
        if cfg.outputs.snapshot_every > 0 {
            write_snapshots(prefix, &problem.layout, &problem.grid, cfg.dt, &snaps.frames)?;
        }
    }

    let first = energy.rows.first().copied().expect("at least the initial row");
    let last = energy.rows.last().copied().expect("at least the initial row");
    let max_residual = energy.rows.iter().map(|r| r.residual).fold(0.0f64, f64::max);
    let report = json!({
        "model": cfg.model.name,
        "scheme": cfg.scheme,
        "grid": {"n": cfg.grid.n, "h": cfg.grid.h},
        "dt": cfg.dt,
        "T": cfg.horizon,
        "steps": steps,
        "dim": n,
        "verdict": problem.validity,
        "energy": {
            "initial": first.e_total,
            "final": last.e_total,
            "final_work_integral": last.work_integral,
            "final_balance_residual": last.residual,
            "max_balance_residual": max_residual,
        },
        "causality": {
            "onset": onset,
            "pre_onset_max_abs": causality.pre_onset_max_abs,
            "exactly_zero_before_onset": causality.exactly_zero,
        },
        "weighted_norm": {
            "rho": cfg.rho,
            "value": evolution::weighted_norm_series(&norms.ts, &norms.xs, cfg.rho),
        },
    });
    let pretty = serde_json::to_string_pretty(&report)?;
    println!("{pretty}");
    if let Some(rp) = &cfg.outputs.report_json {
        ensure_parent(rp)?;
        std::fs::write(rp, pretty + "\n")?;
    }
    Ok(0)
}

/// Label-free operator comparison through the assembled sparse form.
fn op_diff(a: &crate::blocks::BlockOperator, b: &crate::blocks::BlockOperator) -> Result<f64> {
    if (a.nrows(), a.ncols()) != (b.nrows(), b.ncols()) {
        return Err(Error::Shape(format!(
            "conjugated operator is {}x{} but the direct child is {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    Ok(a.to_csr().add(&b.to_csr().scale(-1.0))?.max_norm())
}

fn cmd_derive(path: &Path) -> Result<i32> {
    let cfg = RunConfig::from_path(path)?;
    let edge = cfg
        .edge
        .as_ref()
        .ok_or_else(|| Error::Config("derive requires an 'edge' section".into()))?;
    let from = cfg.model.name;
    let to = edge.to;
    let mother = zoo::build(from, cfg.model.params.as_ref())?;
    let eb = zoo::derive_child(from, cfg.model.params.as_ref(), to)?;
    let grid = cfg.grid.grid()?;
    let nodes = grid.nodes();
    let mops = mother.instantiate(&grid)?;
    let cops = eb.child.instantiate(&grid)?;
    let msys = mops.system();
    let conj = conjugate_problem(mother.layout(), &msys, &eb.map, nodes)?;

    let scale = [mops.m0.max_norm(), mops.m1.max_norm(), mops.m2.max_norm(), mops.a.max_norm()]
        .into_iter()
        .fold(1.0f64, f64::max);
    let d0 = op_diff(&conj.m0, &cops.m0)?;
    let d1 = op_diff(&conj.m1, &cops.m1)?;
    let d2 = op_diff(&conj.m2, &cops.m2)?;
    let da = op_diff(&conj.a, &cops.a)?;
    let tol = 1e-10 * scale;
    let pass = d0 <= tol
        && d1 <= tol
        && d2 <= tol
        && da <= tol
        && conj.a_coincidence_defect <= tol;

    let dynamics = if eb.map.kind == MapKind::Descendant {
        let spec = cfg.forcing.clone().unwrap_or(ForcingSpec::GaussianPulse {
            target: "velocity".to_string(),
            amplitude: 1.0,
            onset: 0.0,
            center: 10.0 * cfg.dt,
            width: 5.0 * cfg.dt,
        });
        let child_forcing = CompiledForcing::compile(&spec, &cops.layout, &grid)?;
        let dyn_steps = cfg.steps().min(50);
        match crate::reduction::verify_descendant_dynamics(
            &mother.law,
            &msys,
            &cops.system(),
            &eb.map,
            nodes,
            cfg.scheme,
            cfg.dt,
            dyn_steps,
            &child_forcing,
            DEFAULT_SOLVE_TOL,
        ) {
            Ok(rep) => json!({
                "status": "ok",
                "decoupling_defect": rep.decoupling_defect,
                "discrepancy": rep.discrepancy,
                "steps": rep.steps,
            }),
            Err(Error::Reduction(msg)) => json!({ "status": "refused", "reason": msg }),
            Err(e) => return Err(e),
        }
    } else {
        json!({ "status": "not_applicable",
                "reason": "change of variables, not an elimination" })
    };

    let report = json!({
        "from": from,
        "to": to,
        "map": {"kind": eb.map.kind, "actions": eb.map.action_names()},
        "kept": conj.kept.iter().map(|(l, d)| json!({"label": l, "dim_per_node": d}))
            .collect::<Vec<_>>(),
        "tombstones": conj.tombstones,
        "identity_checks": {
            "scale": scale,
            "tolerance": tol,
            "m0_defect": d0,
            "m1_defect": d1,
            "m2_defect": d2,
            "a_defect": da,
            "a_mirror_coincidence_defect": conj.a_coincidence_defect,
            "pass": pass,
        },
        "mother_verdict": mother.validity,
        "child_verdict": eb.child.validity,
        "dynamics": dynamics,
    });
    let pretty = serde_json::to_string_pretty(&report)?;
    println!("{pretty}");
    if let Some(rp) = &cfg.outputs.report_json {
        ensure_parent(rp)?;
        std::fs::write(rp, pretty + "\n")?;
    }
    Ok(if pass { 0 } else { 1 })
}

fn cmd_zoo_list() -> Result<i32> {
    let info = zoo::catalog_info()?;
    let edges = zoo::edge_catalog();
    let doc = json!({
        "models": info,
        "edges": edges.iter().map(|(f, t)| json!({"from": f, "to": t})).collect::<Vec<_>>(),
    });
    println!("{}", serde_json::to_string_pretty(&doc)?);
    Ok(0)
}
