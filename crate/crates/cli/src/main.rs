mod args;
mod commands;
mod output;
mod sweep;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Result;
use clap::Parser;
use pvbs_core::PvbsError;

use args::{Cli, Command};
use commands::ProjectionArgs;
use output::Output;

const EXIT_INVALID: u8 = 2;
const EXIT_BUDGET: u8 = 3;

fn dispatch(cli: &Cli) -> Result<Output> {
    let c = &cli.common;
    match &cli.command {
        Command::Classify { halfspace } => commands::classify(c, halfspace.as_deref()),
        Command::Census { region } => commands::census(c, region),
        Command::Gap => commands::gap(c),
        Command::Certify => commands::certify_cmd(c),
        Command::VerifyLemmas { ell, n } => commands::verify_lemmas(c, *ell, *n),
        Command::VerifyProjection { n, ell, direction, transverse, dense } => commands::verify_projection(
            c,
            &ProjectionArgs {
                n: *n,
                ell: *ell,
                direction: *direction,
                transverse: *transverse,
                dense: *dense,
            },
        ),
        Command::Scaling { sizes, numeric_cap } => commands::scaling(c, sizes.as_deref(), *numeric_cap),
        Command::Sweep { axis, values, sizes, data } => {
            let fixed = if axis == "a" { &c.lambda_b } else { &c.lambda_a };
            let fixed = fixed
                .clone()
                .ok_or_else(|| PvbsError::InvalidArgument(format!("sweeping lambda_{axis} needs the other species' lambda")))?;
            let dim = match c.dim {
                Some(d) => d,
                None => fixed.split(',').count(),
            };
            let spec = sweep::SweepSpec {
                axis: axis.clone(),
                values: values.split(',').map(|s| s.trim().to_string()).collect(),
                fixed,
                dim,
                sizes: commands::usize_list(sizes)?,
                options: commands::gap_options(c),
            };
            let dir = c.cache_dir.clone().unwrap_or_else(|| PathBuf::from(".pvbs-cache"));
            let cache = sweep::Cache::open(&dir).map_err(|e| PvbsError::InvalidArgument(format!("{e:#}")))?;
            let data = data.clone().unwrap_or_else(|| dir.join("sweep.dat"));
            let report = sweep::run(&spec, &cache, &data)?;
            eprintln!(
                "pvbs: sweep {} points, {} cache hits, {} solves, {} failed",
                report.rows.len(),
                report.cache_hits,
                report.solves,
                report.failures
            );
            Ok(Output::new(&report)?
                .with_csv(sweep::render_csv(&report.rows))
                .with_table(sweep::render_table(&report.rows)))
        }
        Command::Info => commands::info(),
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<PvbsError>() {
        Some(p) if p.is_budget() => EXIT_BUDGET,
        _ => EXIT_INVALID,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.common.workers {
        if n == 0 {
            eprintln!("pvbs: --workers must be positive");
            return ExitCode::from(EXIT_INVALID);
        }
        // only fails if a pool already exists, which cannot happen this early
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let t0 = Instant::now();
    let result = dispatch(&cli).and_then(|out| out.render(cli.common.format));
    match result {
        Ok(text) => {
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()).is_err() {
                return ExitCode::from(EXIT_INVALID);
            }
            eprintln!("pvbs: done in {:.3}s", t0.elapsed().as_secs_f64());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("pvbs: error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
