//! Scenario runner for the ISAC analysis core: config loading, parallel
//! evaluation, CSV/JSON output and the oracle suites behind `mimo-isac oracle`.

pub mod config;
pub mod emit;
pub mod oracle;
pub mod scenario;
