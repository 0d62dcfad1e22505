use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{Map, Value};

/// Where a command's primary output goes.
#[derive(Debug, Clone)]
pub enum Target {
    Stdout,
    File(PathBuf),
}

impl Target {
    /// Explicit paths win; relative ones land under `out_dir` when it is set.
    /// Without a path the output goes to `out_dir/default_name`, else stdout.
    pub fn resolve(explicit: Option<&Path>, out_dir: Option<&Path>, default_name: &str) -> Self {
        match (explicit, out_dir) {
            (Some(p), _) if p == Path::new("-") => Target::Stdout,
            (Some(p), Some(dir)) if p.is_relative() => Target::File(dir.join(p)),
            (Some(p), _) => Target::File(p.to_path_buf()),
            (None, Some(dir)) => Target::File(dir.join(default_name)),
            (None, None) => Target::Stdout,
        }
    }

    pub fn open(&self) -> Result<Box<dyn Write>> {
        Ok(match self {
            Target::Stdout => Box::new(BufWriter::new(io::stdout().lock())),
            Target::File(path) => {
                if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                    fs::create_dir_all(parent)
                        .with_context(|| format!("creating {}", parent.display()))?;
                }
                let f =
                    File::create(path).with_context(|| format!("creating {}", path.display()))?;
                Box::new(BufWriter::new(f))
            }
        })
    }
}

/// `#config` line echoed at the top of CSV outputs.
pub fn config_comment(config: &Value) -> Vec<String> {
    vec![format!("config {config}")]
}

/// Writes `value` as a JSON object with a leading `config` key.
pub fn write_json<T: Serialize>(target: &Target, config: &Value, value: &T) -> Result<()> {
    let mut doc = Map::new();
    doc.insert("config".into(), config.clone());
    match serde_json::to_value(value)? {
        Value::Object(fields) => doc.extend(fields),
        other => {
            doc.insert("result".into(), other);
        }
    }
    let mut out = target.open()?;
    serde_json::to_writer_pretty(&mut out, &Value::Object(doc))?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

/// Runs a CSV writer against `target` and flushes.
pub fn write_with<F>(target: &Target, f: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> mpcert::Result<()>,
{
    let mut out = target.open()?;
    f(&mut out)?;
    out.flush()?;
    Ok(())
}
