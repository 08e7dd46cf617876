//! Run configuration: a JSON file merged with command-line overrides.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use skillweak::embeddings::TokenKeying;
use skillweak::{CandidateEncoding, MatchConfig, MatchMode, Split};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Keying {
    #[default]
    Form,
    Position,
}

impl From<Keying> for TokenKeying {
    fn from(k: Keying) -> Self {
        match k {
            Keying::Form => TokenKeying::Form,
            Keying::Position => TokenKeying::Position,
        }
    }
}

/// Deterministic hash vectors in place of exported model stores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HashEmbeddings {
    pub dim: usize,
    #[serde(default)]
    pub keying: Keying,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalSplit {
    Train,
    Dev,
    #[default]
    Test,
}

impl fmt::Display for EvalSplit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EvalSplit::Train => "train",
            EvalSplit::Dev => "dev",
            EvalSplit::Test => "test",
        })
    }
}

impl From<EvalSplit> for Split {
    fn from(s: EvalSplit) -> Self {
        match s {
            EvalSplit::Train => Split::Train,
            EvalSplit::Dev => Split::Dev,
            EvalSplit::Test => Split::Test,
        }
    }
}

pub fn default_taus() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub skills: Option<PathBuf>,
    pub phrase_store: Option<PathBuf>,
    pub context_store: Option<PathBuf>,
    pub hash_embeddings: Option<HashEmbeddings>,
    pub predictions: Option<PathBuf>,
    pub method: String,
    pub tau: f64,
    pub n_max: usize,
    pub mode: MatchMode,
    pub candidate_encoding: CandidateEncoding,
    pub eval_split: EvalSplit,
    /// Map KNOWLEDGE spans to SKILL before anything else.
    pub simplify_labels: bool,
    pub pos_max_len: usize,
    pub pos_top_k: Option<usize>,
    /// Force (true) or suppress (false) POS statistics; by default they are
    /// computed when the inventory carries POS tags.
    pub pos_stats: Option<bool>,
    pub taus: Vec<f64>,
    pub out: PathBuf,
    pub seed: u64,
    pub workers: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let m = MatchConfig::default();
        RunConfig {
            train: None,
            dev: None,
            test: None,
            skills: None,
            phrase_store: None,
            context_store: None,
            hash_embeddings: None,
            predictions: None,
            method: "exact".into(),
            tau: m.tau,
            n_max: m.n_max,
            mode: m.mode,
            candidate_encoding: m.candidate_encoding,
            eval_split: EvalSplit::Test,
            simplify_labels: true,
            pos_max_len: 4,
            pos_top_k: None,
            pos_stats: None,
            taus: default_taus(),
            out: PathBuf::from("out"),
            seed: 0,
            workers: None,
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub skills: Option<PathBuf>,
    pub phrase_store: Option<PathBuf>,
    pub context_store: Option<PathBuf>,
    pub hash_dim: Option<usize>,
    pub predictions: Option<PathBuf>,
    pub method: Option<String>,
    pub tau: Option<f64>,
    pub n_max: Option<usize>,
    pub mode: Option<MatchMode>,
    pub candidate_encoding: Option<CandidateEncoding>,
    pub eval_split: Option<EvalSplit>,
    pub taus: Option<Vec<f64>>,
    pub pos_top_k: Option<usize>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
}

impl RunConfig {
    /// Reads a config file; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in cfg.paths_mut().into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if cfg.out.is_relative() {
            cfg.out = base.join(&cfg.out);
        }
        Ok(cfg)
    }

    fn paths_mut(&mut self) -> [&mut Option<PathBuf>; 7] {
        [
            &mut self.train,
            &mut self.dev,
            &mut self.test,
            &mut self.skills,
            &mut self.phrase_store,
            &mut self.context_store,
            &mut self.predictions,
        ]
    }

    pub fn apply(&mut self, o: Overrides) {
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = o.$f { self.$f = Some(v); } )* };
        }
        set!(train, dev, test, skills, phrase_store, context_store, predictions, pos_top_k, workers);
        macro_rules! put {
            ($($f:ident),*) => { $( if let Some(v) = o.$f { self.$f = v; } )* };
        }
        put!(method, tau, n_max, mode, candidate_encoding, eval_split, taus, out, seed);
        if let Some(dim) = o.hash_dim {
            let keying = self.hash_embeddings.map(|h| h.keying).unwrap_or_default();
            self.hash_embeddings = Some(HashEmbeddings { dim, keying });
        }
    }

    pub fn match_config(&self) -> MatchConfig {
        MatchConfig {
            tau: self.tau,
            n_max: self.n_max,
            mode: self.mode,
            candidate_encoding: self.candidate_encoding,
        }
    }

    pub fn split_path(&self, split: EvalSplit) -> Option<&Path> {
        match split {
            EvalSplit::Train => self.train.as_deref(),
            EvalSplit::Dev => self.dev.as_deref(),
            EvalSplit::Test => self.test.as_deref(),
        }
    }

    /// Checks values and that every referenced path exists.
    pub fn validate(&self) -> anyhow::Result<()> {
        self.match_config().validate()?;
        for t in &self.taus {
            if !(0.0..=1.0).contains(t) {
                bail!("tau {t} in taus is outside [0, 1]");
            }
        }
        if let Some(h) = self.hash_embeddings {
            if h.dim == 0 {
                bail!("hash_embeddings.dim must be positive");
            }
        }
        if self.workers == Some(0) {
            bail!("workers must be positive");
        }
        if self.pos_max_len == 0 {
            bail!("pos_max_len must be positive");
        }
        let named = [
            ("train", &self.train),
            ("dev", &self.dev),
            ("test", &self.test),
            ("skills", &self.skills),
            ("phrase_store", &self.phrase_store),
            ("context_store", &self.context_store),
            ("predictions", &self.predictions),
        ];
        for (name, p) in named {
            if let Some(p) = p {
                if !p.exists() {
                    bail!("{name} path {} does not exist", p.display());
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_paths_are_relative_to_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.json");
        std::fs::write(&p, r#"{"test": "data/test.conll", "method": "wse", "hash_embeddings": {"dim": 8}}"#).unwrap();
        let cfg = RunConfig::load(&p).unwrap();
        assert_eq!(cfg.test.unwrap(), dir.path().join("data/test.conll"));
        assert_eq!(cfg.out, dir.path().join("out"));
        assert_eq!(cfg.hash_embeddings.unwrap().keying, Keying::Form);
        assert_eq!(cfg.tau, 0.8);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"methd": "exact"}"#).is_err());
    }

    #[test]
    fn overrides_win() {
        let mut cfg = RunConfig::default();
        cfg.apply(Overrides {
            tau: Some(0.5),
            method: Some("aoc".into()),
            hash_dim: Some(16),
            ..Default::default()
        });
        assert_eq!((cfg.tau, cfg.method.as_str()), (0.5, "aoc"));
        assert_eq!(cfg.hash_embeddings.unwrap().dim, 16);
    }

    #[test]
    fn missing_paths_fail_validation() {
        let cfg = RunConfig {
            skills: Some("/nonexistent/skills.txt".into()),
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        assert!(RunConfig::default().validate().is_ok());
    }

    #[test]
    fn default_taus_cover_the_unit_interval() {
        let t = default_taus();
        assert_eq!(t.len(), 11);
        assert_eq!((t[0], t[3], t[10]), (0.0, 0.3, 1.0));
    }
}
