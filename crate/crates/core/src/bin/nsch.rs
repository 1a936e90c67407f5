use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nsch::diagnostics::format_g17;
use nsch::driver::{self, RunConfig};
use nsch::Error;

#[derive(Parser)]
#[command(name = "nsch", version, about = "Navier-Stokes-Cahn-Hilliard simulator with degenerate mobility")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation.
    Run { config: PathBuf },
    /// Time-step convergence study against a fine reference run.
    Eoc {
        config: PathBuf,
        #[arg(long, num_args = 1.., value_delimiter = ',', required = true)]
        dts: Vec<f64>,
        #[arg(long)]
        ref_dt: f64,
        /// Common final time; defaults to a common multiple of all steps.
        #[arg(long)]
        t_end: Option<f64>,
    },
    /// Maximal bound violations for several eps values.
    SweepEps {
        config: PathBuf,
        #[arg(long, num_args = 1.., value_delimiter = ',', required = true)]
        eps: Vec<f64>,
    },
}

fn exec(cli: Cli) -> nsch::Result<()> {
    match cli.command {
        Command::Run { config } => {
            let cfg = RunConfig::from_file(&config)?;
            let out = driver::run(&cfg)?;
            let last = out.records.last().expect("initial record");
            println!(
                "steps={} t={} E_total={} volume={} phi_min={} phi_max={}",
                last.step,
                format_g17(last.time),
                format_g17(last.e_total),
                format_g17(last.volume),
                format_g17(last.phi_min),
                format_g17(last.phi_max)
            );
            for f in &out.files {
                eprintln!("wrote {}", f.display());
            }
        }
        Command::Eoc { config, dts, ref_dt, t_end } => {
            let mut cfg = RunConfig::from_file(&config)?;
            cfg.t_end = match t_end {
                Some(t) => t,
                None => driver::default_eoc_final_time(&dts, ref_dt)?,
            };
            let rep = driver::eoc_study(&cfg, &dts, ref_dt)?;
            let csv = rep.to_csv();
            print!("{csv}");
            if let Some(dir) = &cfg.out_dir {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                let path = dir.join("eoc.csv");
                std::fs::write(&path, csv).map_err(|e| Error::io(&path, e))?;
            }
        }
        Command::SweepEps { config, eps } => {
            let cfg = RunConfig::from_file(&config)?;
            let rows = driver::epsilon_sweep(&cfg, &eps)?;
            println!("eps,max_neg_sq,max_over_sq,phi_min,phi_max");
            for r in rows {
                println!(
                    "{},{},{},{},{}",
                    format_g17(r.eps),
                    format_g17(r.max_neg_sq),
                    format_g17(r.max_over_sq),
                    format_g17(r.phi_min),
                    format_g17(r.phi_max)
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match exec(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::NonConvergence { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
