//! Attack outcome records with explicit statistical gates.
//!
//! Every adversary driver reduces to counts: trials attempted, successes
//! observed, sometimes a detection rate. A report pins the analytic rate
//! the design promises, the tolerance the measurement is held to, and the
//! resulting pass/fail — so a harness run is auditable line by line.

use serde::{Deserialize, Serialize};

/// How `measured_rate` is compared against `analytic_rate`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateKind {
    /// `|measured - analytic| <= tolerance`.
    TwoSided,
    /// `measured <= analytic + tolerance`.
    UpperBound,
    /// `measured >= analytic - tolerance`.
    LowerBound,
}

impl GateKind {
    pub fn as_str(self) -> &'static str {
        match self {
            GateKind::TwoSided => "two_sided",
            GateKind::UpperBound => "upper_bound",
            GateKind::LowerBound => "lower_bound",
        }
    }
}

/// One measured attack outcome against its analytic expectation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    /// Attack name, plus a suffix when one attack yields several reports.
    pub name: String,
    pub trials: u64,
    pub successes: u64,
    pub measured_rate: f64,
    /// The rate the design analysis promises.
    pub analytic_rate: f64,
    /// Allowed deviation under the gate.
    pub tolerance: f64,
    pub gate: GateKind,
    pub pass: bool,
    /// Free-form context (parameters, margins). No commas by convention;
    /// the CSV writer quotes anyway.
    pub notes: String,
}

impl AttackReport {
    /// Build a report whose tolerance is three binomial standard deviations
    /// of the analytic rate at this trial count.
    pub fn binomial(
        name: impl Into<String>,
        trials: u64,
        successes: u64,
        analytic_rate: f64,
        gate: GateKind,
        notes: impl Into<String>,
    ) -> Self {
        let sigma = (analytic_rate * (1.0 - analytic_rate) / trials.max(1) as f64).sqrt();
        Self::with_tolerance(name, trials, successes, analytic_rate, 3.0 * sigma, gate, notes)
    }

    /// Build a report with an explicit tolerance.
    pub fn with_tolerance(
        name: impl Into<String>,
        trials: u64,
        successes: u64,
        analytic_rate: f64,
        tolerance: f64,
        gate: GateKind,
        notes: impl Into<String>,
    ) -> Self {
        let measured_rate = if trials == 0 { 0.0 } else { successes as f64 / trials as f64 };
        // A report with no trials demonstrates nothing: fail closed rather
        // than letting an empty run clear its gate.
        let pass = trials > 0
            && match gate {
                GateKind::TwoSided => (measured_rate - analytic_rate).abs() <= tolerance,
                GateKind::UpperBound => measured_rate <= analytic_rate + tolerance,
                GateKind::LowerBound => measured_rate >= analytic_rate - tolerance,
            };
        Self {
            name: name.into(),
            trials,
            successes,
            measured_rate,
            analytic_rate,
            tolerance,
            gate,
            pass,
            notes: notes.into(),
        }
    }

    pub fn csv_header() -> &'static str {
        "name,trials,successes,measured_rate,analytic_rate,tolerance,gate,pass,notes"
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},\"{}\"",
            self.name,
            self.trials,
            self.successes,
            self.measured_rate,
            self.analytic_rate,
            self.tolerance,
            self.gate.as_str(),
            self.pass,
            self.notes.replace('"', "\"\"")
        )
    }
}

/// Render a whole batch as a CSV document.
pub fn reports_to_csv(reports: &[AttackReport]) -> String {
    let mut out = String::from(AttackReport::csv_header());
    out.push('\n');
    for r in reports {
        out.push_str(&r.to_csv_row());
        out.push('\n');
    }
    out
}
