//! Verification records shared by every subcommand.

use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Pass,
    Fail,
    Skip,
}

/// One executed (or skipped) check.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub id: String,
    /// Acceptance criterion this check belongs to, if any.
    pub criterion: Option<u8>,
    pub inputs: Value,
    /// What has to hold, in words.
    pub contract: String,
    pub residual: Option<f64>,
    pub outcome: Outcome,
    /// Where each number came from (input, oracle, product_formula, ...).
    pub provenance: Vec<String>,
    /// Reason for a skip or failure; diagnostics otherwise.
    pub note: Option<String>,
}

impl Check {
    pub fn new(id: impl Into<String>, contract: impl Into<String>, inputs: Value) -> Self {
        Check {
            id: id.into(),
            criterion: None,
            inputs,
            contract: contract.into(),
            residual: None,
            outcome: Outcome::Skip,
            provenance: Vec::new(),
            note: None,
        }
    }

    pub fn criterion(mut self, c: u8) -> Self {
        self.criterion = Some(c);
        self
    }

    pub fn provenance<I, S>(mut self, p: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: ToString,
    {
        self.provenance.extend(p.into_iter().map(|s| s.to_string()));
        self.provenance.sort();
        self.provenance.dedup();
        self
    }

    pub fn residual(mut self, r: f64) -> Self {
        self.residual = Some(r);
        self
    }

    pub fn passed(mut self, ok: bool) -> Self {
        self.outcome = if ok { Outcome::Pass } else { Outcome::Fail };
        self
    }

    pub fn note(mut self, n: impl Into<String>) -> Self {
        self.note = Some(n.into());
        self
    }

    pub fn failed(self, why: impl ToString) -> Self {
        self.passed(false).note(why.to_string())
    }

    pub fn skipped(mut self, why: impl Into<String>) -> Self {
        self.outcome = Outcome::Skip;
        self.note = Some(why.into());
        self
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Summary {
    pub passed: usize,
    pub failed: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub suite: String,
    pub checks: Vec<Check>,
    pub summary: Summary,
}

impl VerificationReport {
    /// Sorts the checks by id so the report does not depend on scheduling.
    pub fn new(suite: impl Into<String>, mut checks: Vec<Check>) -> Self {
        checks.sort_by(|a, b| a.id.cmp(&b.id));
        let mut summary = Summary::default();
        for c in &checks {
            match c.outcome {
                Outcome::Pass => summary.passed += 1,
                Outcome::Fail => summary.failed += 1,
                Outcome::Skip => summary.skipped += 1,
            }
        }
        VerificationReport {
            suite: suite.into(),
            checks,
            summary,
        }
    }

    pub fn ok(&self) -> bool {
        self.summary.failed == 0
    }

    pub fn exit_code(&self) -> i32 {
        if self.ok() {
            0
        } else {
            1
        }
    }

    pub fn to_json(&self) -> String {
        cuspforms::json::to_string(self)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let tag = match c.outcome {
                Outcome::Pass => "PASS",
                Outcome::Fail => "FAIL",
                Outcome::Skip => "SKIP",
            };
            out.push_str(&format!("{tag} {}", c.id));
            if let Some(r) = c.residual {
                out.push_str(&format!("  residual {r:.3e}"));
            }
            if !c.provenance.is_empty() {
                out.push_str(&format!("  [{}]", c.provenance.join(", ")));
            }
            if let Some(n) = &c.note {
                out.push_str(&format!("  ({n})"));
            }
            out.push('\n');
        }
        let s = &self.summary;
        out.push_str(&format!(
            "{}: {} passed, {} failed, {} skipped\n",
            self.suite, s.passed, s.failed, s.skipped
        ));
        out
    }
}
