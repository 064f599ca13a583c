//! Run configuration: the TOML surface, override merging, validation, the
//! config digest that gates resume, and backend construction.

use std::fs;
use std::path::{Path, PathBuf};

use manbench_core::{
    Backend, CachedBackend, CompletionParams, DefenseKind, LiveBackend, Protocol, ResponseCache,
    ScriptedBackend,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::RunnerError;

pub const SNAPSHOT_FILE: &str = "config.snapshot";

/// Long-term protocols ask the subject for an answer plus a memory summary;
/// below this many tokens the second half gets truncated off.
const MEMORY_TOKEN_FLOOR: u32 = 256;

/// Decoding settings for one agent seat. A `scripted:` prefixed model name
/// selects a deterministic offline policy instead of the live endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl ModelConfig {
    pub fn params(&self) -> CompletionParams {
        CompletionParams {
            model: self.model.clone(),
            temperature: self.temperature,
            max_tokens: self.max_tokens,
            extra: Default::default(),
        }
    }
}

/// A fully resolved run configuration. This exact struct is snapshotted next
/// to the ledger, so every field it carries is reproducible state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub run_id: String,
    pub datasets: Vec<PathBuf>,
    pub protocols: Vec<Protocol>,
    pub group_sizes: Vec<usize>,
    pub subject: ModelConfig,
    pub narrator: ModelConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub defense: Option<DefenseKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question_limit: Option<usize>,
    pub seed: u64,
    pub runs_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
    pub max_parallel: usize,
}

/// The serialized view the digest covers: everything that shapes ledger
/// content. Where runs live, whether responses are cached, and how many
/// workers run are operational knobs a resume may legitimately change.
#[derive(Serialize)]
struct DigestView<'a> {
    run_id: &'a str,
    datasets: Vec<String>,
    protocols: &'a [Protocol],
    group_sizes: &'a [usize],
    subject: &'a ModelConfig,
    narrator: &'a ModelConfig,
    defense: &'a Option<DefenseKind>,
    question_limit: &'a Option<usize>,
    seed: u64,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), RunnerError> {
        let fail = |msg: String| Err(RunnerError::Config(msg));
        if self.run_id.is_empty() {
            return fail("run_id must not be empty".into());
        }
        if !self
            .run_id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
        {
            return fail(format!(
                "run_id '{}' may only use letters, digits, '-', '_', '.'",
                self.run_id
            ));
        }
        if self.datasets.is_empty() {
            return fail("at least one dataset path is required".into());
        }
        if self.protocols.is_empty() {
            return fail("at least one protocol is required".into());
        }
        for (i, p) in self.protocols.iter().enumerate() {
            if self.protocols[..i].contains(p) {
                return fail(format!("protocol {p} listed more than once"));
            }
        }
        if self.group_sizes.is_empty() {
            return fail("at least one group size is required".into());
        }
        for (i, size) in self.group_sizes.iter().enumerate() {
            if *size < 1 {
                return fail("group sizes must be at least 1".into());
            }
            if self.group_sizes[..i].contains(size) {
                return fail(format!("group size {size} listed more than once"));
            }
        }
        if self.max_parallel < 1 {
            return fail("max_parallel must be at least 1".into());
        }
        let long_term = self.protocols.iter().any(|p| p.is_long_term());
        if long_term && self.subject.max_tokens < MEMORY_TOKEN_FLOOR {
            return fail(format!(
                "GL/RL need subject max_tokens >= {MEMORY_TOKEN_FLOOR} to fit the answer plus memory response (got {})",
                self.subject.max_tokens
            ));
        }
        Ok(())
    }

    /// Hex SHA-256 over the canonical serialization of the digest view.
    pub fn digest(&self) -> String {
        let view = DigestView {
            run_id: &self.run_id,
            datasets: self.datasets.iter().map(|p| p.display().to_string()).collect(),
            protocols: &self.protocols,
            group_sizes: &self.group_sizes,
            subject: &self.subject,
            narrator: &self.narrator,
            defense: &self.defense,
            question_limit: &self.question_limit,
            seed: self.seed,
        };
        let canonical = serde_json::to_vec(&view).expect("digest view serializes");
        hex::encode(Sha256::digest(&canonical))
    }

    pub fn run_dir(&self) -> PathBuf {
        self.runs_dir.join(&self.run_id)
    }

    pub fn write_snapshot(&self, run_dir: &Path) -> Result<PathBuf, RunnerError> {
        let path = run_dir.join(SNAPSHOT_FILE);
        let body = toml::to_string_pretty(self)
            .map_err(|e| RunnerError::Config(format!("serialize snapshot: {e}")))?;
        fs::write(&path, body)
            .map_err(|source| RunnerError::Io { path: path.display().to_string(), source })?;
        Ok(path)
    }

    pub fn read_snapshot(run_dir: &Path) -> Result<RunConfig, RunnerError> {
        let path = run_dir.join(SNAPSHOT_FILE);
        let body = fs::read_to_string(&path)
            .map_err(|_| RunnerError::MissingRun(path.display().to_string()))?;
        toml::from_str(&body).map_err(|e| {
            RunnerError::Config(format!("snapshot {} unreadable: {e}", path.display()))
        })
    }
}

/// The optional-field layer config files and CLI flags both parse into.
/// Merging layers field-wise (later wins) then [`RawConfig::finish`] applies
/// defaults and validation.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub run_id: Option<String>,
    pub datasets: Option<Vec<PathBuf>>,
    pub protocols: Option<Vec<String>>,
    pub group_size: Option<usize>,
    pub group_sizes: Option<Vec<usize>>,
    pub subject: Option<RawModel>,
    pub narrator: Option<RawModel>,
    pub defense: Option<String>,
    pub question_limit: Option<usize>,
    pub seed: Option<u64>,
    pub runs_dir: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub max_parallel: Option<usize>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawModel {
    pub model: Option<String>,
    pub temperature: Option<f64>,
    pub max_tokens: Option<u32>,
}

impl RawModel {
    fn finish(self, default_temperature: f64) -> Result<ModelConfig, RunnerError> {
        Ok(ModelConfig {
            model: self
                .model
                .ok_or_else(|| RunnerError::Config("model name is required".into()))?,
            temperature: self.temperature.unwrap_or(default_temperature),
            max_tokens: self.max_tokens.unwrap_or(1024),
        })
    }

    fn merge(base: Option<RawModel>, over: Option<RawModel>) -> Option<RawModel> {
        match (base, over) {
            (Some(b), Some(o)) => Some(RawModel {
                model: o.model.or(b.model),
                temperature: o.temperature.or(b.temperature),
                max_tokens: o.max_tokens.or(b.max_tokens),
            }),
            (base, over) => over.or(base),
        }
    }
}

impl RawConfig {
    pub fn from_file(path: &Path) -> Result<RawConfig, RunnerError> {
        let body = fs::read_to_string(path)
            .map_err(|source| RunnerError::Io { path: path.display().to_string(), source })?;
        toml::from_str(&body)
            .map_err(|e| RunnerError::Config(format!("{}: {e}", path.display())))
    }

    /// Field-wise merge; `over` wins wherever it is set.
    pub fn merge(base: RawConfig, over: RawConfig) -> RawConfig {
        RawConfig {
            run_id: over.run_id.or(base.run_id),
            datasets: over.datasets.or(base.datasets),
            protocols: over.protocols.or(base.protocols),
            group_size: over.group_size.or(base.group_size),
            group_sizes: over.group_sizes.or(base.group_sizes),
            subject: RawModel::merge(base.subject, over.subject),
            narrator: RawModel::merge(base.narrator, over.narrator),
            defense: over.defense.or(base.defense),
            question_limit: over.question_limit.or(base.question_limit),
            seed: over.seed.or(base.seed),
            runs_dir: over.runs_dir.or(base.runs_dir),
            cache_dir: over.cache_dir.or(base.cache_dir),
            max_parallel: over.max_parallel.or(base.max_parallel),
        }
    }

    pub fn finish(self) -> Result<RunConfig, RunnerError> {
        let protocols = match self.protocols {
            None => Protocol::ALL.to_vec(),
            Some(names) => names
                .iter()
                .map(|name| {
                    name.parse::<Protocol>().map_err(RunnerError::Config)
                })
                .collect::<Result<Vec<_>, _>>()?,
        };
        let group_sizes = match (self.group_size, self.group_sizes) {
            (Some(_), Some(_)) => {
                return Err(RunnerError::Config(
                    "set either group_size or group_sizes, not both".into(),
                ))
            }
            (Some(size), None) => vec![size],
            (None, Some(sizes)) => sizes,
            (None, None) => vec![5],
        };
        let defense = match self.defense.as_deref() {
            None | Some("none") => None,
            Some(name) => Some(name.parse::<DefenseKind>().map_err(RunnerError::Config)?),
        };
        let config = RunConfig {
            run_id: self
                .run_id
                .ok_or_else(|| RunnerError::Config("run_id is required".into()))?,
            datasets: self
                .datasets
                .ok_or_else(|| RunnerError::Config("datasets are required".into()))?,
            protocols,
            group_sizes,
            subject: self
                .subject
                .ok_or_else(|| RunnerError::Config("[subject] section is required".into()))?
                .finish(0.0)?,
            narrator: self
                .narrator
                .ok_or_else(|| RunnerError::Config("[narrator] section is required".into()))?
                .finish(0.7)?,
            defense,
            question_limit: self.question_limit,
            seed: self.seed.unwrap_or(0),
            runs_dir: self.runs_dir.unwrap_or_else(|| PathBuf::from("runs")),
            cache_dir: self.cache_dir,
            max_parallel: self.max_parallel.unwrap_or(4),
        };
        config.validate()?;
        Ok(config)
    }
}

/// Builds the backend a model name denotes: `scripted:<policy>` selects the
/// offline policy engine, anything else the live OpenAI-compatible client
/// (endpoint and credential from MANBENCH_BASE_URL / MANBENCH_API_KEY).
/// With a cache directory, responses are content-addressed on disk.
pub fn build_backend(
    model: &str,
    cache_dir: Option<&Path>,
) -> Result<Box<dyn Backend>, RunnerError> {
    let inner: Box<dyn Backend> = match model.strip_prefix("scripted:") {
        Some(policy) => {
            Box::new(ScriptedBackend::policy(policy.parse().map_err(RunnerError::Config)?))
        }
        None => Box::new(LiveBackend::new(None)?),
    };
    Ok(match cache_dir {
        Some(dir) => Box::new(CachedBackend::new(inner, ResponseCache::new(dir)?)),
        None => inner,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_raw() -> RawConfig {
        toml::from_str(
            r#"
            run_id = "demo"
            datasets = ["data/sample.json"]

            [subject]
            model = "scripted:echo-baseline"

            [narrator]
            model = "scripted:echo-target"
            "#,
        )
        .unwrap()
    }

    #[test]
    fn defaults_fill_in_around_a_minimal_file() {
        let config = minimal_raw().finish().unwrap();
        assert_eq!(config.protocols, Protocol::ALL.to_vec());
        assert_eq!(config.group_sizes, vec![5]);
        assert_eq!(config.subject.temperature, 0.0);
        assert_eq!(config.narrator.temperature, 0.7);
        assert_eq!(config.subject.max_tokens, 1024);
        assert_eq!(config.max_parallel, 4);
        assert_eq!(config.seed, 0);
        assert!(config.defense.is_none());
    }

    #[test]
    fn overrides_win_field_by_field() {
        let over = RawConfig {
            seed: Some(7),
            protocols: Some(vec!["B".into(), "gs".into()]),
            defense: Some("anchoring".into()),
            ..RawConfig::default()
        };
        let config = RawConfig::merge(minimal_raw(), over).finish().unwrap();
        assert_eq!(config.seed, 7);
        assert_eq!(config.protocols, vec![Protocol::B, Protocol::GS]);
        assert_eq!(config.defense, Some(DefenseKind::Anchoring));
        assert_eq!(config.run_id, "demo");
    }

    #[test]
    fn defense_none_clears_a_file_level_defense() {
        let mut base = minimal_raw();
        base.defense = Some("scrutiny".into());
        let over = RawConfig { defense: Some("none".into()), ..RawConfig::default() };
        let config = RawConfig::merge(base, over).finish().unwrap();
        assert!(config.defense.is_none());
    }

    #[test]
    fn group_size_scalar_and_list_are_mutually_exclusive() {
        let mut raw = minimal_raw();
        raw.group_size = Some(5);
        raw.group_sizes = Some(vec![1, 5]);
        assert!(matches!(raw.finish(), Err(RunnerError::Config(_))));
    }

    #[test]
    fn duplicate_protocols_and_sizes_are_rejected() {
        let mut raw = minimal_raw();
        raw.protocols = Some(vec!["GS".into(), "gs".into()]);
        assert!(matches!(raw.finish(), Err(RunnerError::Config(_))));

        let mut raw = minimal_raw();
        raw.group_sizes = Some(vec![5, 5]);
        assert!(matches!(raw.finish(), Err(RunnerError::Config(_))));
    }

    #[test]
    fn long_term_protocols_need_memory_headroom() {
        let mut raw = minimal_raw();
        raw.protocols = Some(vec!["GL".into()]);
        raw.subject = Some(RawModel {
            model: Some("scripted:echo-baseline".into()),
            temperature: None,
            max_tokens: Some(64),
        });
        assert!(matches!(raw.finish(), Err(RunnerError::Config(_))));
    }

    #[test]
    fn digest_ignores_operational_knobs_only() {
        let base = minimal_raw().finish().unwrap();
        let mut moved = base.clone();
        moved.runs_dir = PathBuf::from("elsewhere");
        moved.cache_dir = Some(PathBuf::from(".cache"));
        moved.max_parallel = 32;
        assert_eq!(base.digest(), moved.digest());

        let mut reseeded = base.clone();
        reseeded.seed = 99;
        assert_ne!(base.digest(), reseeded.digest());

        let mut limited = base;
        limited.question_limit = Some(3);
        assert_ne!(limited.digest(), reseeded.digest());
    }

    #[test]
    fn snapshot_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let config = minimal_raw().finish().unwrap();
        config.write_snapshot(dir.path()).unwrap();
        let back = RunConfig::read_snapshot(dir.path()).unwrap();
        assert_eq!(back, config);
        assert_eq!(back.digest(), config.digest());
    }

    #[test]
    fn unknown_config_keys_are_errors() {
        let err = toml::from_str::<RawConfig>("run_idd = \"typo\"");
        assert!(err.is_err());
    }

    #[test]
    fn scripted_backend_names_resolve() {
        let backend = build_backend("scripted:echo-baseline", None).unwrap();
        assert_eq!(backend.id(), "scripted:echo-baseline");
        assert!(build_backend("scripted:nonsense", None).is_err());
    }
}
