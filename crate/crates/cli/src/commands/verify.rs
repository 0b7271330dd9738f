use std::fs;

use lipbound::certify::{assess, LmiMode, ValidationOptions, ValidationReport};
use lipbound::{BoundReport, Error};
use serde::{Deserialize, Serialize};

use super::{load, pool, write_json};
use crate::args::VerifyArgs;
use crate::error::{exit, CliError};
use crate::manifest::{path_string, CommandKind, RunManifest};

/// The JSON written by `verify`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyOutput {
    #[serde(flatten)]
    pub validation: ValidationReport,
    pub manifest: RunManifest,
}

fn read_report(path: &std::path::Path) -> Result<BoundReport, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::input(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::input(path, e))
}

pub(super) fn run(a: VerifyArgs, arguments: Vec<String>) -> Result<(), CliError> {
    let mut manifest = RunManifest::start(CommandKind::Verify, arguments);
    manifest.network = path_string(Some(&a.net));
    manifest.report = path_string(Some(&a.report));
    manifest.output = path_string(a.output.as_deref());
    manifest.seeds = vec![a.seed];

    let net = load(&a.net)?;
    let report = read_report(&a.report)?;
    manifest.methods = vec![report.method];
    manifest.certified = report.config.certified;

    let opts = ValidationOptions {
        samples: a.samples,
        seed: a.seed,
        radius: a.radius,
        dimension_cap: a.lmi_cap,
        lmi: if a.no_lmi {
            LmiMode::Skip
        } else if a.lmi {
            LmiMode::Required
        } else {
            LmiMode::Auto
        },
    };
    let validation = pool(a.jobs)?
        .install(|| assess(&net, &report, &opts))
        .map_err(|e| match e {
            Error::DimensionMismatch(msg) => CliError::new(
                exit::VALIDATION_FAILED,
                format!("report does not match the network: {msg}"),
            ),
            other => other.into(),
        })?;

    if opts.lmi == LmiMode::Required {
        if let Some(reason) = &validation.lmi_skipped {
            eprintln!("warning: LMI check not run: {reason}");
        }
    }
    let lmi = match &validation.lmi {
        Some(c) if c.psd => "psd",
        Some(_) => "not psd",
        None => "skipped",
    };
    println!(
        "bound={:?} empirical={:?} margin={:?} lmi={lmi} {}",
        validation.bound,
        validation.empirical_lower,
        validation.margin,
        if validation.passed {
            "PASSED"
        } else {
            "FAILED"
        }
    );

    let passed = validation.passed;
    let failures = validation.failures.join("; ");
    let out = VerifyOutput {
        validation,
        manifest: manifest.finish(),
    };
    match &a.output {
        Some(path) => write_json(&out, path)?,
        None => println!(
            "{}",
            serde_json::to_string_pretty(&out).map_err(|e| CliError::io(e.to_string()))?
        ),
    }
    if passed {
        Ok(())
    } else {
        Err(CliError::new(exit::VALIDATION_FAILED, failures))
    }
}
