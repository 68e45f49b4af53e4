//! Merging verification artifacts into one summary.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::manifest::{ExperimentManifest, SCHEMA_VERSION};
use super::CliError;
use crate::verify::VerificationReport;

/// One run found among the report inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub experiment: String,
    pub dir: String,
    pub reports: Vec<ReportLine>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportLine {
    pub statistic: String,
    pub estimate: f64,
    pub std_error: f64,
    pub pass: bool,
    pub unreliable: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedGroup {
    pub seed: u64,
    pub runs: Vec<RunSummary>,
    pub all_pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub groups: Vec<SeedGroup>,
}

/// Run directory and its manifest for an input that is either a run
/// directory or a file inside one.
fn locate(input: &Path) -> Result<(PathBuf, ExperimentManifest), String> {
    let dir = if input.is_dir() {
        input.to_path_buf()
    } else {
        input.parent().map(Path::to_path_buf).unwrap_or_default()
    };
    let text = std::fs::read_to_string(dir.join("manifest.json")).map_err(|e| format!("{}: {e}", input.display()))?;
    let m: ExperimentManifest =
        serde_json::from_str(&text).map_err(|e| format!("{}: manifest does not parse: {e}", input.display()))?;
    if m.schema_version != SCHEMA_VERSION {
        return Err(format!(
            "{}: schema version {} (expected {SCHEMA_VERSION})",
            input.display(),
            m.schema_version
        ));
    }
    Ok((dir, m))
}

/// Loaded runs and their full reports, grouped by seed.
pub fn collect(inputs: &[PathBuf]) -> Result<BTreeMap<u64, Vec<(String, PathBuf, Vec<VerificationReport>)>>, CliError> {
    let mut groups: BTreeMap<u64, Vec<_>> = BTreeMap::new();
    let mut bad = Vec::new();
    for input in inputs {
        match locate(input) {
            Ok((dir, m)) => {
                let path = dir.join("reports.json");
                let reports: Vec<VerificationReport> = if path.exists() {
                    let text = std::fs::read_to_string(&path)?;
                    match serde_json::from_str(&text) {
                        Ok(r) => r,
                        Err(e) => {
                            bad.push(format!("{}: {e}", path.display()));
                            continue;
                        }
                    }
                } else {
                    Vec::new()
                };
                groups.entry(m.seed).or_default().push((m.experiment, dir, reports));
            }
            Err(e) => bad.push(e),
        }
    }
    if !bad.is_empty() {
        return Err(CliError::Artifacts(bad));
    }
    Ok(groups)
}

pub fn summarize(groups: &BTreeMap<u64, Vec<(String, PathBuf, Vec<VerificationReport>)>>) -> Summary {
    Summary {
        schema_version: SCHEMA_VERSION,
        groups: groups
            .iter()
            .map(|(seed, runs)| {
                let runs: Vec<RunSummary> = runs
                    .iter()
                    .map(|(exp, dir, reports)| RunSummary {
                        experiment: exp.clone(),
                        dir: dir.display().to_string(),
                        reports: reports
                            .iter()
                            .map(|r| ReportLine {
                                statistic: r.statistic.clone(),
                                estimate: r.estimate,
                                std_error: r.std_error,
                                pass: r.pass,
                                unreliable: r.unreliable,
                            })
                            .collect(),
                    })
                    .collect();
                let all_pass = runs.iter().flat_map(|r| &r.reports).all(|l| l.pass);
                SeedGroup {
                    seed: *seed,
                    runs,
                    all_pass,
                }
            })
            .collect(),
    }
}

/// ε-sweeps and other sweep rows, one line each.
pub fn write_sweeps<W: Write>(
    mut out: W,
    groups: &BTreeMap<u64, Vec<(String, PathBuf, Vec<VerificationReport>)>>,
) -> std::io::Result<()> {
    writeln!(out, "seed,statistic,param_name,param,estimate,std_error")?;
    for (seed, runs) in groups {
        for (_, _, reports) in runs {
            for r in reports {
                let name = r.sweep_param.as_deref().unwrap_or("param");
                for row in &r.sweep {
                    writeln!(
                        out,
                        "{seed},{},{name},{},{},{}",
                        r.statistic, row.param, row.estimate, row.std_error
                    )?;
                }
            }
        }
    }
    Ok(())
}

/// Fitted constants and exponents.
pub fn write_fits<W: Write>(
    mut out: W,
    groups: &BTreeMap<u64, Vec<(String, PathBuf, Vec<VerificationReport>)>>,
) -> std::io::Result<()> {
    writeln!(out, "seed,statistic,name,value,std_error")?;
    for (seed, runs) in groups {
        for (_, _, reports) in runs {
            for r in reports {
                for f in &r.fitted {
                    let se = f.std_error.map(|s| s.to_string()).unwrap_or_default();
                    writeln!(out, "{seed},{},{},{},{se}", r.statistic, f.name, f.value)?;
                }
            }
        }
    }
    Ok(())
}

/// Criterion values against thresholds, with the signed margin.
pub fn write_residuals<W: Write>(
    mut out: W,
    groups: &BTreeMap<u64, Vec<(String, PathBuf, Vec<VerificationReport>)>>,
) -> std::io::Result<()> {
    writeln!(out, "seed,statistic,criterion,value,threshold,margin,pass")?;
    for (seed, runs) in groups {
        for (_, _, reports) in runs {
            for r in reports {
                for c in &r.criteria {
                    let margin = match c.op {
                        crate::verify::Comparison::Le | crate::verify::Comparison::Lt => c.threshold - c.value,
                        _ => c.value - c.threshold,
                    };
                    writeln!(
                        out,
                        "{seed},{},{},{},{},{margin},{}",
                        r.statistic,
                        c.name,
                        c.value,
                        c.threshold,
                        u8::from(c.pass)
                    )?;
                }
            }
        }
    }
    Ok(())
}
