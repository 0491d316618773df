use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use chrono::{DateTime, SecondsFormat, Utc};
use longform_core::judge::{judge_from_spec, Judge};
use longform_core::{load_config, TrainConfig};

/// Flags shared by every subcommand.
#[derive(Debug, Clone)]
pub struct Global {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub judge: Option<String>,
    pub out: Option<PathBuf>,
}

impl Global {
    /// The config file (or defaults), with relative paths inside it resolved
    /// against the file's directory.
    pub fn load_config(&self) -> Result<TrainConfig> {
        let Some(path) = &self.config else {
            return Ok(TrainConfig::default());
        };
        let mut cfg = load_config(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.prompts, &mut cfg.writing_rm].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn judge(&self) -> Result<Option<Arc<dyn Judge>>> {
        self.judge
            .as_deref()
            .map(|spec| judge_from_spec(spec).with_context(|| format!("cannot set up judge `{spec}`")))
            .transpose()
    }

    pub fn require_judge(&self) -> Result<Arc<dyn Judge>> {
        match self.judge()? {
            Some(j) => Ok(j),
            None => bail!("this command needs --judge (mock:<script>, live or rules)"),
        }
    }

    pub fn require_out(&self, command: &str) -> Result<&Path> {
        match &self.out {
            Some(p) => Ok(p),
            None => bail!("`{command}` needs --out <dir>"),
        }
    }
}

/// Creates `dir` and checks that files can be written there.
pub fn prepare_out_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
    let probe = dir.join(".write-test");
    std::fs::write(&probe, b"").with_context(|| format!("output directory {} is not writable", dir.display()))?;
    std::fs::remove_file(&probe).ok();
    Ok(())
}

/// Current UTC time, or `SOURCE_DATE_EPOCH` when set so that reruns can
/// produce identical manifests.
pub fn timestamp() -> String {
    let fixed = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok())
        .and_then(|secs| DateTime::<Utc>::from_timestamp(secs, 0));
    fixed
        .unwrap_or_else(Utc::now)
        .to_rfc3339_opts(SecondsFormat::Secs, true)
}
