//! Subcommands and their output files. Every CSV starts with a fixed header
//! row; nothing written here depends on the wall clock.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde_json::{json, Value};

use nematic::control::{optimize as run_optimizer, ControlLogRow, ControlProblem};
use nematic::fields::{read_snapshot, write_snapshot};
use nematic::relative_energy::{certificate, CertificateOptions, Equilibrium, TestTrajectory, TraceTrajectory};
use nematic::scheme::{
    energy_report as report, integrate, EnergyReportRow, FieldState, ResidualQuadrature, SimulationTrace, StepDiagnostics,
};
use nematic::tensor::Vec3;
use nematic::VectorField;

use crate::config::{RunConfig, Setup, TestSpec};
use crate::error::CliError;

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn write_csv<I: IntoIterator<Item = String>>(path: &Path, header: &str, rows: I) -> Result<(), CliError> {
    let mut s = String::from(header);
    s.push('\n');
    for r in rows {
        s.push_str(&r);
        s.push('\n');
    }
    write_text(path, &s)
}

fn write_json(path: &Path, v: &Value) -> Result<(), CliError> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| CliError::run("json", e))?;
    s.push('\n');
    write_text(path, &s)
}

fn write_field(path: &Path, f: &VectorField) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    write_snapshot(BufWriter::new(file), f).map_err(|e| CliError::io(path, e))
}

fn read_field(path: &Path) -> Result<VectorField, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    read_snapshot(BufReader::new(file)).map_err(|e| CliError::io(path, e))
}

fn write_trace_csv(path: &Path, trace: &SimulationTrace<f64>) -> Result<(), CliError> {
    write_csv(path, StepDiagnostics::CSV_HEADER, trace.diagnostics.iter().map(|d| d.csv_row()))
}

fn run(setup: &Setup) -> Result<SimulationTrace<f64>, CliError> {
    integrate(&setup.initial, &setup.params, &setup.scheme).map_err(|e| CliError::run("simulation", e))
}

pub const CHECKPOINT_HEADER: &str = "index,t,v_file,d_file";

fn write_checkpoints(out: &Path, trace: &SimulationTrace<f64>, every: usize) -> Result<usize, CliError> {
    let dir = out.join("checkpoints");
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let last = trace.len() - 1;
    let mut rows = Vec::new();
    for (i, st) in trace.states.iter().enumerate() {
        let keep = i == last || (every > 0 && i % every == 0);
        if !keep {
            continue;
        }
        let (vf, df) = (format!("checkpoints/v_{i:06}.nlcf"), format!("checkpoints/d_{i:06}.nlcf"));
        write_field(&out.join(&vf), &st.v)?;
        write_field(&out.join(&df), &st.d)?;
        rows.push(format!("{i},{:e},{vf},{df}", st.t));
    }
    let n = rows.len();
    write_csv(&out.join("checkpoints.csv"), CHECKPOINT_HEADER, rows)?;
    Ok(n)
}

/// Rebuilds a trace from the checkpoints of an earlier `simulate`.
pub fn load_trace(dir: &Path, dt: f64) -> Result<SimulationTrace<f64>, CliError> {
    let index = dir.join("checkpoints.csv");
    let text = fs::read_to_string(&index).map_err(|e| CliError::io(&index, e))?;
    let mut lines = text.lines();
    if lines.next() != Some(CHECKPOINT_HEADER) {
        return Err(CliError::io(&index, "unexpected header"));
    }
    let mut times = Vec::new();
    let mut states: Vec<FieldState<f64>> = Vec::new();
    for line in lines.filter(|l| !l.is_empty()) {
        let cols: Vec<&str> = line.split(',').collect();
        let bad = || CliError::io(&index, format!("malformed row `{line}`"));
        if cols.len() != 4 {
            return Err(bad());
        }
        let t: f64 = cols[1].parse().map_err(|_| bad())?;
        let v = read_field(&dir.join(cols[2]))?;
        let d = read_field(&dir.join(cols[3]))?;
        states.push(FieldState::new(v, d, t).map_err(|e| CliError::io(&index, e))?);
        times.push(t);
    }
    if states.is_empty() {
        return Err(CliError::io(&index, "no checkpoints"));
    }
    let n0: Vec<f64> = states[0].d.data().iter().map(|x| x.norm()).collect();
    let dev = states
        .iter()
        .flat_map(|s| s.d.data().iter().zip(&n0).map(|(x, r)| (x.norm() - r).abs()))
        .fold(0.0, f64::max);
    Ok(SimulationTrace { times, states, diagnostics: Vec::new(), steps: 0, max_norm_deviation: dev, dt })
}

pub fn simulate(cfg: &RunConfig, out: &Path) -> Result<Value, CliError> {
    let setup = cfg.setup()?;
    let trace = run(&setup)?;
    write_trace_csv(&out.join("trace.csv"), &trace)?;
    let checkpoints = write_checkpoints(out, &trace, cfg.output.checkpoint_every)?;
    let last = trace.diagnostics.last().copied().unwrap_or_default();
    let summary = json!({
        "samples": trace.len(),
        "steps": trace.steps,
        "checkpoints": checkpoints,
        "max_abs_energy_residual": trace.max_abs_residual(),
        "max_norm_deviation": trace.max_norm_deviation,
        "final_time": last.t,
        "final_kinetic": last.kinetic,
        "final_free_energy": last.energy.total,
    });
    write_json(&out.join("simulate.json"), &summary)?;
    Ok(summary)
}

pub fn certify(cfg: &RunConfig, out: &Path) -> Result<Value, CliError> {
    let setup = cfg.setup()?;
    let c = &cfg.certify;
    let trace = match &c.trace_dir {
        Some(dir) => load_trace(dir, setup.scheme.dt)?,
        None => run(&setup)?,
    };
    let test: Box<dyn TestTrajectory<f64>> = match &c.test {
        TestSpec::Equilibrium { director } => Box::new(
            Equilibrium::new(Vec3(*director)).map_err(|e| CliError::Config { key: "certify.test.director".into(), message: e.to_string() })?,
        ),
        TestSpec::SelfTrace => Box::new(
            TraceTrajectory::from_trace(&trace, &setup.params, &setup.scheme).map_err(|e| CliError::run("test trajectory", e))?,
        ),
    };
    let opts = CertificateOptions { c: c.c, tol: c.tol, c_max: c.c_max, variant: c.variant, extra_terms: c.extra_terms };
    let rep = certificate(&trace, &setup.params, &setup.scheme, test.as_ref(), &opts).map_err(|e| CliError::run("certificate", e))?;
    write_csv(&out.join("certificate.csv"), nematic::relative_energy::CertificateReport::CSV_HEADER, rep.csv_rows())?;
    write_csv(
        &out.join("certificate_terms.csv"),
        "t,rel_energy,field_gap,rel_dissipation,regularity,pairing,extra",
        rep.samples.iter().map(|s| {
            format!(
                "{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                s.t, s.rel_energy, s.field_gap, s.rel_dissipation, s.regularity, s.pairing, s.extra
            )
        }),
    )?;
    let mut summary = serde_json::to_value(rep.summary()).map_err(|e| CliError::run("json", e))?;
    summary["initial_distance"] = json!(rep.initial_distance);
    write_json(&out.join("certificate.json"), &summary)?;
    Ok(summary)
}

pub fn optimize(cfg: &RunConfig, out: &Path) -> Result<Value, CliError> {
    let setup = cfg.setup()?;
    let spec = cfg.control.as_ref().ok_or_else(|| CliError::Config {
        key: "control".into(),
        message: "the optimize subcommand needs a [control] table".into(),
    })?;
    let mut target_cfg = setup.scheme.clone();
    target_cfg.h = VectorField::constant(&setup.grid, Vec3(spec.target_field));
    let target = integrate(&setup.initial, &setup.params, &target_cfg).map_err(|e| CliError::run("target simulation", e))?;
    let problem = ControlProblem {
        params: setup.params.clone(),
        scheme: setup.scheme.clone(),
        initial: setup.initial.clone(),
        v_target: target.final_state().v.clone(),
        d_target: target.final_state().d.clone(),
        gamma: spec.gamma,
        c_h: spec.c_h,
        parametrization: spec.parametrization,
        theta0: spec.theta0.clone(),
        options: spec.options.clone(),
    };
    let r = run_optimizer(&problem).map_err(|e| match e {
        nematic::control::ControlError::Invalid(m) => CliError::Config { key: "control".into(), message: m },
        other => CliError::run("optimization", other),
    })?;
    write_csv(&out.join("optimization_log.csv"), ControlLogRow::CSV_HEADER, r.log.iter().map(|l| l.csv_row()))?;
    write_field(&out.join("h_opt.nlcf"), &r.h_opt)?;
    write_trace_csv(&out.join("trace.csv"), &r.final_trace)?;
    let summary = json!({
        "theta": r.theta,
        "final_j": r.j_history.last(),
        "j_history": r.j_history,
        "iterations": r.log.len().saturating_sub(1),
        "state_solves": r.evaluations,
        "stop": r.stop,
        "h_l3": r.h_opt.lp_norm(3.0),
        "c_h": spec.c_h,
    });
    write_json(&out.join("control.json"), &summary)?;
    Ok(summary)
}

pub fn energy_report(cfg: &RunConfig, out: &Path) -> Result<Value, CliError> {
    let setup = cfg.setup()?;
    let trace = run(&setup)?;
    let rep = report(&trace, &setup.params, &setup.scheme, ResidualQuadrature::Integrator)
        .map_err(|e| CliError::run("energy report", e))?;
    write_csv(&out.join("energy_report.csv"), EnergyReportRow::CSV_HEADER, rep.rows.iter().map(|r| r.csv_row()))?;
    let summary = json!({
        "samples": rep.rows.len(),
        "max_abs_residual": rep.max_abs_residual,
        "eta_gradient": rep.eta_gradient,
        "eta_h1": rep.eta_h1,
        "poincare_constant": rep.poincare_constant,
        "coercivity_violations": rep.coercivity_violations,
        "sup_v_l2": rep.sup_v_l2,
        "sup_d_h1": rep.sup_d_h1,
    });
    write_json(&out.join("energy_report.json"), &summary)?;
    Ok(summary)
}
