//! Pinned tolerances, budgets and reporting for the acceptance suite.
//!
//! The criteria themselves live in `tests/acceptance.rs`; every number they
//! compare against is defined here so a change shows up in one place.

use std::fmt;
use std::time::{Duration, Instant};

/// Relative error of the linear closed-form spectrum.
pub const C1_REL_TOL: f64 = 1e-9;
pub const C1_N: [usize; 3] = [8, 32, 128];
pub const C1_BUDGET: Duration = Duration::from_secs(5);

/// Absolute error for the symbol identities.
pub const C2_TOL: f64 = 1e-12;
pub const C2_SAMPLES: usize = 1000;
pub const C2_BUDGET: Duration = Duration::from_secs(5);

/// Pairwise agreement of the three counting-function methods.
pub const C3_TOL: f64 = 2e-3;
pub const C3_PROBES: usize = 32;
pub const C3_BUDGET: Duration = Duration::from_secs(120);

/// `Ψ(√ξ(x)) = πx` on the sample.
pub const C4_ROUND_TRIP_TOL: f64 = 1e-9;
/// `√ξ(x) = √e_1(πx)` for the identity map.
pub const C4_IDENTITY_TOL: f64 = 1e-8;
pub const C4_SAMPLES: usize = 1000;
pub const C4_BUDGET: Duration = Duration::from_secs(30);

/// `|Ψ'(0) - 1|` for degree 1.
pub const C5_P1_SLOPE_TOL: f64 = 0.02;
/// Slack on the slope window for degrees 2 and 3.
pub const C5_SLACK: f64 = 0.05;
pub const C5_X_SMALL: f64 = 1e-3;
/// `|√ξ(x)/(γx) - 1|` at `x = C5_X_SMALL`.
pub const C5_LINEAR_TOL: f64 = 0.05;
pub const C5_BUDGET: Duration = Duration::from_secs(60);

pub const LADDER: [usize; 4] = [64, 128, 256, 512];

/// Absolute sampling error of the inliers at the top of the ladder.
pub const C6_ABS_TOL: f64 = 0.02;
pub const C6_BUDGET: Duration = Duration::from_secs(300);

/// Sup Weyl error at the top of the ladder.
pub const C7_SUP_TOL: f64 = 0.05;
pub const C7_BUDGET: Duration = Duration::from_secs(600);

pub const C8_N: usize = 256;
pub const C8_PROBES: usize = 64;
pub const C8_BUDGET: Duration = Duration::from_secs(120);

pub const C9_N: usize = 512;
pub const C9_CELLS: usize = 8;
pub const C9_BUDGET: Duration = Duration::from_secs(60);

pub const C10_N: [usize; 3] = [32, 64, 128];
pub const C10_BUDGET: Duration = Duration::from_secs(60);

/// Family parameters shared by most criteria.
pub const FAMILY_A: f64 = 1.0;
pub const FAMILY_GAMMA: f64 = 0.5;

/// Outcome of one criterion.
#[derive(Debug, Clone)]
pub struct Verdict {
    pub id: u32,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
    pub budget: Duration,
}

impl Verdict {
    /// Whether both the numerical check and the time budget held.
    pub fn ok(&self) -> bool {
        self.passed && self.elapsed <= self.budget
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.ok() { "PASS" } else { "FAIL" };
        let over = if self.elapsed > self.budget {
            " (over budget)"
        } else {
            ""
        };
        write!(
            f,
            "{status} criterion {:>2} {}: {} [{:.2}s of {}s{over}]",
            self.id,
            self.title,
            self.detail,
            self.elapsed.as_secs_f64(),
            self.budget.as_secs()
        )
    }
}

/// Collects the failure messages of one criterion.
#[derive(Debug, Default)]
pub struct Findings {
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Findings {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records a failure message unless `cond` holds.
    pub fn require(&mut self, cond: bool, msg: impl FnOnce() -> String) {
        if !cond {
            self.failures.push(msg());
        }
    }

    /// Records a measured value shown on the report line.
    pub fn note(&mut self, msg: impl Into<String>) {
        self.notes.push(msg.into());
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn summary(&self) -> String {
        let mut parts = self.notes.clone();
        parts.extend(self.failures.iter().map(|f| format!("violated: {f}")));
        parts.join("; ")
    }
}

/// Runs `body` under a timer and turns its findings into a verdict.
pub fn run_criterion(
    id: u32,
    title: &'static str,
    budget: Duration,
    body: impl FnOnce(&mut Findings),
) -> Verdict {
    let start = Instant::now();
    let mut findings = Findings::new();
    body(&mut findings);
    Verdict {
        id,
        title,
        passed: findings.passed(),
        detail: findings.summary(),
        elapsed: start.elapsed(),
        budget,
    }
}
