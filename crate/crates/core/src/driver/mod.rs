//! Configuration, time loop, output files and parameter studies.

mod config;
pub mod initial;
mod output;
mod study;

use std::path::PathBuf;

pub use config::{Experiment, RunConfig};
pub use output::{vtk_file_name, write_vtk, CsvWriter};
pub use study::{
    compare_states, default_eoc_final_time, eoc_rate, eoc_study, epsilon_sweep, EocErrors, EocReport, SweepRow,
};

use crate::diagnostics::{record, DiagRecord};
use crate::error::{Error, Result};
pub use crate::linsys::set_threads;
use crate::mesh::Mesh;
use crate::schemes::{State, StepReport, Stepper};

pub const CSV_FILE: &str = "diagnostics.csv";

/// Result of a completed run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub final_state: State,
    /// One record per time level, including the initial one.
    pub records: Vec<DiagRecord>,
    pub files: Vec<PathBuf>,
}

/// Data passed to a run observer after each accepted step.
pub struct StepEvent<'a> {
    pub step: usize,
    pub stepper: &'a Stepper,
    pub prev: &'a State,
    pub next: &'a State,
    pub report: &'a StepReport,
    pub record: &'a DiagRecord,
}

pub fn run(config: &RunConfig) -> Result<RunOutput> {
    run_with_observer(config, |_| Ok(()))
}

/// Runs the configured experiment, calling `observer` after every step.
pub fn run_with_observer(
    config: &RunConfig,
    mut observer: impl FnMut(&StepEvent<'_>) -> Result<()>,
) -> Result<RunOutput> {
    config.validate()?;
    let steps = config.num_steps()?;
    let mesh = Mesh::structured(config.n)?;
    let params = config.params();
    let (phi0, u0) = initial::initial_fields(&mesh, config);
    let mut stepper = Stepper::new(mesh, params.clone())?;
    let mut state = stepper.initial_state(phi0, u0)?;

    let mut files = Vec::new();
    let mut csv = match &config.out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            let w = CsvWriter::create(dir.join(CSV_FILE))?;
            files.push(w.path().to_path_buf());
            Some(w)
        }
        None => None,
    };
    let mut emit = |step: usize, state: &State, rec: &DiagRecord, mesh: &Mesh| -> Result<()> {
        if step % config.cadence != 0 {
            return Ok(());
        }
        if let (Some(w), Some(dir)) = (csv.as_mut(), &config.out_dir) {
            w.write(rec)?;
            let path = dir.join(vtk_file_name(step));
            write_vtk(&path, mesh, state)?;
            files.push(path);
        }
        Ok(())
    };

    let rec0 = record(stepper.mesh(), 0, &state, None, &params, 0)?;
    emit(0, &state, &rec0, stepper.mesh())?;
    let mut records = vec![rec0];

    for step in 1..=steps {
        let (mut next, report) = stepper.step(&state)?;
        // accumulated t drifts; pin it to the uniform grid
        next.t = step as f64 * config.dt;
        let rec = record(stepper.mesh(), step, &next, Some(&state), &params, report.iterations)?;
        emit(step, &next, &rec, stepper.mesh())?;
        observer(&StepEvent { step, stepper: &stepper, prev: &state, next: &next, report: &report, record: &rec })?;
        records.push(rec);
        state = next;
    }
    drop(emit);
    Ok(RunOutput { final_state: state, records, files })
}
