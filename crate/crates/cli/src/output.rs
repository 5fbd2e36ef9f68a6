use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;

/// Provenance stamped into every artifact.
#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config_hash: String,
}

impl Meta {
    pub fn new(command: &'static str, config_hash: String) -> Meta {
        Meta {
            tool: "vortex",
            version: env!("CARGO_PKG_VERSION"),
            command,
            config_hash,
        }
    }
}

pub struct Writer {
    dir: PathBuf,
    meta: Meta,
    written: Vec<PathBuf>,
}

impl Writer {
    pub fn new(dir: &Path, meta: Meta) -> anyhow::Result<Writer> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Writer {
            dir: dir.to_path_buf(),
            meta,
            written: Vec::new(),
        })
    }

    pub fn meta(&self) -> &Meta {
        &self.meta
    }

    /// `{"meta": ..., "data": ...}`, pretty printed.
    pub fn json<T: Serialize>(&mut self, name: &str, data: &T) -> anyhow::Result<()> {
        #[derive(Serialize)]
        struct Doc<'a, T> {
            meta: &'a Meta,
            data: &'a T,
        }
        let mut text = serde_json::to_string_pretty(&Doc { meta: &self.meta, data })?;
        text.push('\n');
        self.write(name, &text)
    }

    /// CSV body preceded by a `#` comment line carrying the metadata.
    pub fn csv(&mut self, name: &str, body: &str) -> anyhow::Result<()> {
        let m = &self.meta;
        let text = format!("# {} {} {} config_sha256={}\n{body}", m.tool, m.version, m.command, m.config_hash);
        self.write(name, &text)
    }

    fn write(&mut self, name: &str, text: &str) -> anyhow::Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        self.written.push(path);
        Ok(())
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}
