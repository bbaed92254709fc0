use std::path::PathBuf;

use anyhow::Result;
use clap::Args;

use diglacian_core::verify::{run as run_suite, VerifyConfig};

use crate::exit::{self, with_code};
use crate::manifest::write_json;

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Smaller instance counts; same checks and tolerances.
    #[arg(long)]
    pub quick: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Report JSON destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Adds this mass to the first stationary entry of every chain (negative control).
    #[arg(long, hide = true)]
    pub perturb_stationary: Option<f64>,
}

pub fn run(args: &VerifyArgs) -> Result<()> {
    let mut cfg = if args.quick { VerifyConfig::quick(args.seed) } else { VerifyConfig::full(args.seed) };
    cfg.perturb_stationary = args.perturb_stationary;
    let report = run_suite(&cfg).map_err(|e| with_code(exit::PRECONDITION, e))?;
    for c in &report.checks {
        let status = match (c.passed, c.advisory) {
            (true, _) => "pass",
            (false, true) => "fail (advisory)",
            (false, false) => "FAIL",
        };
        eprintln!(
            "{status:>16}  {:<32} max {:.3e} (tol {:.0e}, {} instances)",
            c.name, c.max_residual, c.tolerance, c.instances
        );
    }
    eprintln!("fundamental sparse vs dense, max residual: {:.3e}", report.fundamental_max_residual);
    match &args.out {
        Some(p) => write_json(p, &report)?,
        None => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    if report.passed {
        Ok(())
    } else {
        let failed: Vec<&str> =
            report.checks.iter().filter(|c| !c.passed && !c.advisory).map(|c| c.name.as_str()).collect();
        eprintln!("verify failed: {}", failed.join(", "));
        Err(with_code(exit::VERIFY_FAILED, anyhow::anyhow!("verification failed")))
    }
}
