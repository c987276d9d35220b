use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, ValueEnum};
use irsr::verify::{self, SuiteReport};

use crate::util::write_json;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum GradTarget {
    Cdconv,
    Lsta,
    Residual,
    NetToy,
}

impl GradTarget {
    pub fn name(self) -> &'static str {
        match self {
            GradTarget::Cdconv => "cdconv",
            GradTarget::Lsta => "lsta",
            GradTarget::Residual => "residual",
            GradTarget::NetToy => "net-toy",
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct GradcheckArgs {
    #[arg(long, value_enum)]
    pub target: GradTarget,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn gradcheck(a: &GradcheckArgs) -> Result<SuiteReport> {
    let report = verify::run(a.target.name(), a.seed)?;
    match &a.out {
        Some(p) => write_json(p, &report)?,
        None => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    eprintln!(
        "{}: {} (max relative error {:.3e}, tol {:.0e})",
        report.component,
        if report.passed { "PASS" } else { "FAIL" },
        report.max_rel_err,
        report.tol
    );
    Ok(report)
}
