//! Statistical checks of bridge, kernel and distance properties on
//! simulated ensembles and grid kernels.
//!
//! Every check returns a [`VerificationReport`] whose pass flag can be
//! recomputed from the stored comparisons.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::bridge::BridgeError;
use crate::heatkernel::KernelError;
use crate::models::ModelError;

pub mod analytic;
pub mod energy;
pub mod lemma;
pub mod suite;

pub use analytic::{
    caoyau_check, expectation_identity_check, flat_torus_drift_integral, gradient_log_bound_check, CaoYauOptions,
};
pub use energy::{energy_distance, energy_test, EnergyTest};
pub use suite::{run_suite, Suite, SuiteOptions};
pub use lemma::{
    kolmogorov_fit, path_drift_integral, semimartingale_integral, time_reversal_check,
    weighted_law_check, Duality, Functional, KolmogorovOptions,
};

#[derive(Debug, thiserror::Error)]
pub enum VerifyError {
    #[error("need at least {need} usable {what}, found {found}")]
    TooFew { what: &'static str, need: usize, found: usize },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Bridge(#[from] BridgeError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    Le,
    Lt,
    Ge,
    Gt,
}

impl Comparison {
    pub fn holds(self, value: f64, threshold: f64) -> bool {
        match self {
            Comparison::Le => value <= threshold,
            Comparison::Lt => value < threshold,
            Comparison::Ge => value >= threshold,
            Comparison::Gt => value > threshold,
        }
    }
}

/// A declared criterion `value <op> threshold` and its outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub name: String,
    pub value: f64,
    pub op: Comparison,
    pub threshold: f64,
    pub pass: bool,
}

impl Criterion {
    pub fn new(name: impl Into<String>, value: f64, op: Comparison, threshold: f64) -> Self {
        Criterion {
            name: name.into(),
            value,
            op,
            threshold,
            pass: op.holds(value, threshold),
        }
    }
}

/// Named fitted quantity with an optional normal interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fitted {
    pub name: String,
    pub value: f64,
    pub std_error: Option<f64>,
    pub ci: Option<(f64, f64)>,
}

impl Fitted {
    pub fn plain(name: impl Into<String>, value: f64) -> Self {
        Fitted {
            name: name.into(),
            value,
            std_error: None,
            ci: None,
        }
    }

    pub fn with_se(name: impl Into<String>, value: f64, se: f64) -> Self {
        Fitted {
            name: name.into(),
            value,
            std_error: Some(se),
            ci: Some((value - 1.96 * se, value + 1.96 * se)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: f64,
    pub estimate: f64,
    pub std_error: f64,
    /// Extra named columns of the row.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extra: Vec<(String, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub statistic: String,
    pub estimate: f64,
    pub std_error: f64,
    pub fitted: Vec<Fitted>,
    pub sweep_param: Option<String>,
    pub sweep: Vec<SweepRow>,
    pub criteria: Vec<Criterion>,
    pub pass: bool,
    /// Set when an input-quality condition (excluded paths, effective
    /// sample size) makes the statistic untrustworthy; an unreliable report
    /// does not pass.
    pub unreliable: bool,
    pub excluded_fraction: f64,
    pub notes: Vec<String>,
}

impl VerificationReport {
    pub fn new(statistic: impl Into<String>, estimate: f64, std_error: f64) -> Self {
        VerificationReport {
            statistic: statistic.into(),
            estimate,
            std_error: std_error.max(0.0),
            fitted: Vec::new(),
            sweep_param: None,
            sweep: Vec::new(),
            criteria: Vec::new(),
            pass: false,
            unreliable: false,
            excluded_fraction: 0.0,
            notes: Vec::new(),
        }
    }

    pub fn criterion(&mut self, c: Criterion) -> &mut Self {
        self.criteria.push(c);
        self
    }

    pub fn fit(&mut self, f: Fitted) -> &mut Self {
        self.fitted.push(f);
        self
    }

    pub fn note(&mut self, s: impl Into<String>) -> &mut Self {
        self.notes.push(s.into());
        self
    }

    /// Pass flag implied by the stored criteria and reliability.
    pub fn rederive(&self) -> bool {
        !self.unreliable
            && !self.criteria.is_empty()
            && self.criteria.iter().all(|c| c.op.holds(c.value, c.threshold))
    }

    pub fn finish(mut self) -> Self {
        for c in &mut self.criteria {
            c.pass = c.op.holds(c.value, c.threshold);
        }
        self.pass = self.rederive();
        self
    }

    pub fn fitted_value(&self, name: &str) -> Option<f64> {
        self.fitted.iter().find(|f| f.name == name).map(|f| f.value)
    }
}

impl std::fmt::Display for Comparison {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Comparison::Le => "<=",
            Comparison::Lt => "<",
            Comparison::Ge => ">=",
            Comparison::Gt => ">",
        })
    }
}

/// One headline line, then one line per fitted value and criterion.
impl std::fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let flag = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "{flag} {} = {:.6} (se {:.2e})", self.statistic, self.estimate, self.std_error)?;
        if self.unreliable {
            write!(f, " [unreliable]")?;
        }
        for x in &self.fitted {
            write!(f, "\n    {} = {:.6}", x.name, x.value)?;
        }
        for c in &self.criteria {
            let mark = if c.pass { "ok" } else { "!!" };
            write!(f, "\n  {mark} {}: {:.6} {} {}", c.name, c.value, c.op, c.threshold)?;
        }
        Ok(())
    }
}

/// Flat CSV: one row per estimate, fitted value, sweep row and criterion.
pub fn write_reports_csv<W: Write>(mut out: W, reports: &[VerificationReport]) -> std::io::Result<()> {
    writeln!(out, "statistic,kind,name,param,value,std_error,threshold,pass")?;
    for r in reports {
        writeln!(
            out,
            "{},estimate,{},,{},{},,{}",
            r.statistic,
            r.statistic,
            r.estimate,
            r.std_error,
            u8::from(r.pass)
        )?;
        for f in &r.fitted {
            let se = f.std_error.map(|s| s.to_string()).unwrap_or_default();
            writeln!(out, "{},fitted,{},,{},{},,", r.statistic, f.name, f.value, se)?;
        }
        let sp = r.sweep_param.as_deref().unwrap_or("param");
        for row in &r.sweep {
            writeln!(
                out,
                "{},sweep,{},{},{},{},,",
                r.statistic, sp, row.param, row.estimate, row.std_error
            )?;
            for (name, v) in &row.extra {
                writeln!(out, "{},sweep,{},{},{},,,", r.statistic, name, row.param, v)?;
            }
        }
        for c in &r.criteria {
            writeln!(
                out,
                "{},criterion,{},,{},,{},{}",
                r.statistic,
                c.name,
                c.value,
                c.threshold,
                u8::from(c.pass)
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_flag_follows_criteria() {
        let mut r = VerificationReport::new("x", 1.0, 0.1);
        r.criterion(Criterion::new("small", 1.0, Comparison::Le, 2.0));
        let r = r.finish();
        assert!(r.pass && r.rederive());

        let mut bad = r.clone();
        bad.criteria.push(Criterion::new("big", 1.0, Comparison::Gt, 2.0));
        assert!(!bad.finish().pass);

        let mut unreliable = r.clone();
        unreliable.unreliable = true;
        assert!(!unreliable.finish().pass);

        assert!(!VerificationReport::new("empty", 0.0, 0.0).finish().pass);
    }

    #[test]
    fn csv_has_one_header_and_rows() {
        let mut r = VerificationReport::new("s", 2.0, 0.5);
        r.fit(Fitted::with_se("c", 1.0, 0.1));
        r.sweep.push(SweepRow {
            param: 0.1,
            estimate: 1.0,
            std_error: 0.0,
            extra: vec![],
        });
        r.criterion(Criterion::new("k", 1.0, Comparison::Ge, 0.0));
        let r = r.finish();
        let mut buf = Vec::new();
        write_reports_csv(&mut buf, &[r]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.lines().all(|l| l.split(',').count() == 8));
    }
}
