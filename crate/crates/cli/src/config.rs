//! Flat `key = value` configuration files with `#` comments.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use enkcf::SchedulerConfig;

/// Applies every `key = value` line of `text` on top of `config`.
pub fn apply(config: &mut SchedulerConfig, text: &str) -> Result<()> {
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("line {}: expected key = value, got {:?}", i + 1, raw);
        };
        config
            .set(key.trim(), value)
            .with_context(|| format!("line {}", i + 1))?;
    }
    Ok(())
}

pub fn load(path: &Path) -> Result<SchedulerConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut config = SchedulerConfig::default();
    apply(&mut config, &text).with_context(|| format!("in {}", path.display()))?;
    Ok(config)
}

/// The whole configuration as an editable document.
pub fn render(config: &SchedulerConfig) -> String {
    let mut out = String::from("# enkcf tracker configuration\n");
    for (k, v) in config.entries() {
        out.push_str(&format!("{} = {}\n", k, v));
    }
    out
}
