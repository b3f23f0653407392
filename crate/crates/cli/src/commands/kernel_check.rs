use cardex_core::kernels::gradcheck::{run_all, KernelSet, FAULTS};

use crate::failure::{CmdResult, Failure};

#[derive(clap::Args)]
pub struct Args {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random points per check
    #[arg(long, default_value_t = 100)]
    samples: usize,
    /// Print the reports as JSON instead of a table
    #[arg(long)]
    json: bool,
    /// Swap in a deliberately broken kernel (self-test of the harness)
    #[arg(long, hide = true)]
    inject_fault: Option<String>,
}

pub fn run(args: Args) -> CmdResult {
    if args.samples == 0 {
        return Err(Failure::usage("--samples must be positive"));
    }
    let kernels = match &args.inject_fault {
        None => KernelSet::default(),
        Some(name) => KernelSet::with_fault(name).ok_or_else(|| {
            Failure::usage(format!(
                "unknown fault {name:?}; known: {}",
                FAULTS.join(", ")
            ))
        })?,
    };
    let reports = run_all(&kernels, args.seed, args.samples);
    if args.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&reports).expect("reports serialize")
        );
    } else {
        println!(
            "{:<10} {:<50} {:>7} {:>12} {:>10}  result",
            "kernel", "check", "samples", "worst", "tolerance"
        );
        for r in &reports {
            println!(
                "{:<10} {:<50} {:>7} {:>12.3e} {:>10.1e}  {}",
                r.kernel,
                r.name,
                r.samples,
                r.worst,
                r.tolerance,
                if r.passed { "PASS" } else { "FAIL" }
            );
            if !r.passed {
                println!("           {}", r.detail);
            }
        }
    }
    let failed = reports.iter().filter(|r| !r.passed).count();
    if failed == 0 {
        Ok(())
    } else {
        Err(Failure::Runtime(anyhow::anyhow!(
            "{failed} of {} kernel checks failed",
            reports.len()
        )))
    }
}
