//! `agora.conf`: `key = value` lines, `#` comments.

use std::path::{Path, PathBuf};
use std::time::Duration;

use agora_core::resolver::DEFAULT_TIMEOUT;
use agora_core::{Iri, OmdocType, RenderMode};

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectConfig {
    /// Directory holding the config file; relative paths are resolved
    /// against it.
    pub root: PathBuf,
    /// Directories of `.creole` narratives.
    pub narratives: Vec<PathBuf>,
    /// Formal HTML that already carries annotations; copied and harvested.
    pub formal: Vec<PathBuf>,
    /// Coqdoc HTML to run through the annotator.
    pub annotate: Vec<PathBuf>,
    pub out_dir: PathBuf,
    pub cache_dir: PathBuf,
    /// Base IRI under which local pages are published.
    pub site_base: Option<Iri>,
    pub prefixes: Vec<(String, Iri)>,
    pub type_overrides: Vec<(String, OmdocType)>,
    pub mode: RenderMode,
    pub timeout: Duration,
    /// Directories named explicitly in the file; these must exist.
    explicit_dirs: Vec<PathBuf>,
}

impl ProjectConfig {
    /// The configuration of a project without a config file.
    pub fn defaults(root: &Path) -> Self {
        ProjectConfig {
            root: root.to_path_buf(),
            narratives: vec![root.join("narratives")],
            formal: Vec::new(),
            annotate: Vec::new(),
            out_dir: root.join("site"),
            cache_dir: root.join(".agora-cache"),
            site_base: None,
            prefixes: Vec::new(),
            type_overrides: Vec::new(),
            mode: RenderMode::Inline,
            timeout: DEFAULT_TIMEOUT,
            explicit_dirs: Vec::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let root = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        Self::parse(&text, root)
    }

    pub fn parse(text: &str, root: &Path) -> Result<Self, CliError> {
        let mut cfg = Self::defaults(root);
        let mut narratives = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| CliError::Config(format!("line {}: {msg}", n + 1));
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| err(format!("expected `key = value`, found {line:?}")))?;
            if value.is_empty() {
                return Err(err(format!("empty value for {key:?}")));
            }
            let dir = || root.join(value);
            match key {
                "narratives" => {
                    narratives.push(dir());
                    cfg.explicit_dirs.push(dir());
                }
                "formal" => {
                    cfg.formal.push(dir());
                    cfg.explicit_dirs.push(dir());
                }
                "annotate" => {
                    cfg.annotate.push(dir());
                    cfg.explicit_dirs.push(dir());
                }
                "out_dir" => cfg.out_dir = dir(),
                "cache_dir" => cfg.cache_dir = dir(),
                "site_base" => {
                    cfg.site_base = Some(Iri::new(value).map_err(|e| err(e.to_string()))?);
                }
                "mode" => cfg.mode = parse_mode(value).map_err(err)?,
                "timeout" => {
                    let secs: f64 = value
                        .parse()
                        .ok()
                        .filter(|s: &f64| s.is_finite() && *s > 0.0)
                        .ok_or_else(|| err(format!("timeout must be a positive number of seconds, found {value:?}")))?;
                    cfg.timeout = Duration::from_secs_f64(secs);
                }
                _ => {
                    if let Some(name) = key.strip_prefix("prefix.") {
                        let base = Iri::new(normalize_prefix_base(value)).map_err(|e| err(e.to_string()))?;
                        let mut probe = agora_core::PrefixEnv::builtins();
                        probe.bind(name, base.clone()).map_err(|e| err(e.to_string()))?;
                        cfg.prefixes.retain(|(p, _)| p != name);
                        cfg.prefixes.push((name.to_string(), base));
                    } else if let Some(token) = key.strip_prefix("type.") {
                        let ty = OmdocType::from_name(value)
                            .ok_or_else(|| err(format!("unknown OMDoc type {value:?}")))?;
                        cfg.type_overrides.push((token.to_string(), ty));
                    } else {
                        return Err(err(format!("unknown key {key:?}")));
                    }
                }
            }
        }
        if !narratives.is_empty() {
            cfg.narratives = narratives;
        }
        Ok(cfg)
    }

    /// Fails when a directory named in the file does not exist.
    pub fn check_paths(&self) -> Result<(), CliError> {
        match self.explicit_dirs.iter().find(|d| !d.is_dir()) {
            Some(d) => Err(CliError::Config(format!("directory {} does not exist", d.display()))),
            None => Ok(()),
        }
    }
}

pub fn parse_mode(s: &str) -> Result<RenderMode, String> {
    match s {
        "inline" => Ok(RenderMode::Inline),
        "placeholder" => Ok(RenderMode::Placeholder),
        other => Err(format!("mode must be `inline` or `placeholder`, found {other:?}")),
    }
}

/// Appends `/` to a declared prefix base whose last path segment has no
/// separator, so `mml:binom.html` lands inside the declared directory.
/// Bases ending in `/`, `#` or `:` and bases with a fragment are kept.
pub fn normalize_prefix_base(base: &str) -> String {
    if base.ends_with(['/', '#', ':']) || base.contains('#') || base.contains('?') {
        base.to_string()
    } else {
        format!("{base}/")
    }
}
