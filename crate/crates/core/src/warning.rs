use std::fmt;

use serde::Serialize;

/// Non-fatal diagnostics attached to computed results.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Warning {
    /// Pump peaks closer than four widths; the multipeak kernel no longer
    /// factorizes peak by peak.
    ModesOverlap { k0: f64, limit: f64 },
    /// Pump spectrum looked up outside its grid; those samples were set to zero.
    PumpCoverage { missed: usize },
    /// Truncated decomposition discards more than 1e-3 of the weight.
    TruncationDeficit { deficit: f64 },
    /// Scan positions outside the kernel grid were dropped.
    ScanTruncated { dropped: usize },
    /// Grid holds less than 1 - 1e-6 of a sampled mode's energy.
    GridEnergy { captured: f64 },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::ModesOverlap { k0, limit } => write!(
                f,
                "modes overlap; factorization invalid (k0 = {k0:.4e} <= {limit:.4e} um^-1)"
            ),
            Warning::PumpCoverage { missed } => write!(
                f,
                "{missed} pump spectrum lookups fell outside its grid and were treated as zero"
            ),
            Warning::TruncationDeficit { deficit } => {
                write!(f, "truncation discards {deficit:.3e} of the total weight")
            }
            Warning::ScanTruncated { dropped } => {
                write!(f, "{dropped} scan positions outside the kernel grid were dropped")
            }
            Warning::GridEnergy { captured } => {
                write!(f, "grid captures only {captured:.9} of the mode energy")
            }
        }
    }
}
