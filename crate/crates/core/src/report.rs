//! Uniform run reports for the command-line interface.

use serde::Serialize;
use serde_json::Value;

/// Everything a run prints: what was asked, what was concluded, and the
/// engine-specific payload.
#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub command: String,
    pub config: Value,
    pub verdict: String,
    pub details: Value,
    pub wall_clock_ms: u128,
}

/// Process exit codes shared by all subcommands.
pub mod exit_code {
    pub const PROVED: i32 = 0;
    pub const REFUTED: i32 = 1;
    pub const CONFIG_ERROR: i32 = 2;
    pub const INCONCLUSIVE: i32 = 3;
}

impl RunReport {
    pub fn render_human(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("command: {}\n", self.command));
        out.push_str(&format!(
            "config: {}\n",
            serde_json::to_string(&self.config).unwrap_or_default()
        ));
        out.push_str(&format!("verdict: {}\n", self.verdict));
        if !self.details.is_null() {
            out.push_str(&format!(
                "details: {}\n",
                serde_json::to_string_pretty(&self.details).unwrap_or_default()
            ));
        }
        out.push_str(&format!("wall_clock_ms: {}\n", self.wall_clock_ms));
        out
    }

    pub fn render_json(&self) -> String {
        serde_json::to_string_pretty(self).unwrap_or_else(|_| "{}".into())
    }
}
