use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

/// Machine-readable summary of one command.
#[derive(Debug, Serialize)]
pub struct Report {
    pub command: String,
    pub version: &'static str,
    pub parameters: Value,
    pub timings_ms: BTreeMap<String, f64>,
    pub result: Value,
}

impl Report {
    pub fn new(command: &str, parameters: Value) -> Self {
        Report {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION"),
            parameters,
            timings_ms: BTreeMap::new(),
            result: Value::Null,
        }
    }

    /// Runs `f` and records its wall time under `name`.
    pub fn time<T>(&mut self, name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f();
        self.timings_ms.insert(name.to_string(), start.elapsed().as_secs_f64() * 1e3);
        log::info!("{name}: {:.1} ms", self.timings_ms[name]);
        out
    }

    pub fn set_result(&mut self, result: impl Serialize) -> Result<()> {
        self.result = serde_json::to_value(result)?;
        Ok(())
    }

    pub fn emit(&self, path: Option<&Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        match path {
            Some(p) => std::fs::write(p, text + "\n").with_context(|| format!("writing report {}", p.display())),
            None => {
                println!("{text}");
                Ok(())
            }
        }
    }
}
