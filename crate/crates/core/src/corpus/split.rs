use std::collections::{BTreeSet, HashSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Dataset, Example};
use crate::error::{Error, Result};

const DEFAULT_ALLOWLIST: &str = include_str!("../../data/stdlib_allowlist.txt");

/// Standard-library module names, loaded from a versioned text file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Allowlist {
    pub version: String,
    modules: BTreeSet<String>,
}

impl Allowlist {
    /// Parses one module per line. `#` starts a comment; a `# version: <v>`
    /// comment sets the version tag.
    pub fn parse(text: &str) -> Self {
        let mut version = String::from("unversioned");
        let mut modules = BTreeSet::new();
        for line in text.lines() {
            let line = line.trim();
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(v) = comment.trim().strip_prefix("version:") {
                    version = v.trim().to_string();
                }
                continue;
            }
            let name = line.split('#').next().unwrap_or("").trim();
            if !name.is_empty() {
                modules.insert(name.to_string());
            }
        }
        Allowlist { version, modules }
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(Self::parse(&std::fs::read_to_string(path)?))
    }

    pub fn contains(&self, module: &str) -> bool {
        self.modules.contains(module)
    }
}

impl Default for Allowlist {
    fn default() -> Self {
        Self::parse(DEFAULT_ALLOWLIST)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LibraryClass {
    Builtin,
    Stdlib,
    ThirdParty,
}

/// Classifies a library tag. Prefixed tags must agree with the allowlist;
/// bare names are accepted only when the allowlist knows them.
pub fn classify_library(library: &str, allowlist: &Allowlist) -> Option<LibraryClass> {
    let top = |name: &str| name.split('.').next().unwrap_or(name).to_string();
    if library == "builtin" {
        return Some(LibraryClass::Builtin);
    }
    if let Some(name) = library.strip_prefix("stdlib:") {
        return allowlist.contains(&top(name)).then_some(LibraryClass::Stdlib);
    }
    if let Some(name) = library.strip_prefix("thirdparty:") {
        let name = top(name);
        return (!name.is_empty() && !allowlist.contains(&name)).then_some(LibraryClass::ThirdParty);
    }
    if !library.contains(':') && allowlist.contains(&top(library)) {
        return Some(LibraryClass::Stdlib);
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitKind {
    Random,
    Library,
}

impl std::str::FromStr for SplitKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(SplitKind::Random),
            "library" => Ok(SplitKind::Library),
            other => Err(Error::InvalidConfig(format!("unknown split kind {other:?}"))),
        }
    }
}

/// Partition sizes. The library split uses only `dev_size` (test gets the
/// remaining third-party examples); the random split uses both.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitConfig {
    pub dev_size: usize,
    pub test_size: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            dev_size: 200,
            test_size: 499,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub kind: SplitKind,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stdlib_allowlist_version: Option<String>,
    pub train: Vec<String>,
    pub dev: Vec<String>,
    pub test: Vec<String>,
}

impl SplitManifest {
    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    /// Checks disjointness and coverage against `dataset`.
    pub fn validate(&self, dataset: &Dataset) -> Result<()> {
        let mut seen = HashSet::new();
        for id in self.train.iter().chain(&self.dev).chain(&self.test) {
            if dataset.get(id).is_none() {
                return Err(Error::Missing(format!("manifest id {id:?} not in dataset")));
            }
            if !seen.insert(id.as_str()) {
                return Err(Error::Format(format!("id {id:?} appears in two partitions")));
            }
        }
        if seen.len() != dataset.len() {
            return Err(Error::Format(format!(
                "manifest covers {} of {} examples",
                seen.len(),
                dataset.len()
            )));
        }
        Ok(())
    }
}

fn sort_by_dataset_order(ids: &mut [String], dataset: &Dataset) {
    ids.sort_by_key(|id| dataset.by_id.get(id).copied().unwrap_or(usize::MAX));
}

fn is_builtin_only(ex: &Example, allowlist: &Allowlist) -> bool {
    ex.libraries.iter().all(|lib| {
        matches!(
            classify_library(lib, allowlist),
            Some(LibraryClass::Builtin | LibraryClass::Stdlib)
        )
    })
}

/// Partitions `dataset` into train/dev/test.
pub fn plan_split(
    dataset: &Dataset,
    kind: SplitKind,
    seed: u64,
    allowlist: &Allowlist,
    config: SplitConfig,
) -> Result<SplitManifest> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut dev, mut test);
    match kind {
        SplitKind::Library => {
            let unknown: BTreeSet<String> = dataset
                .examples()
                .iter()
                .flat_map(|ex| ex.libraries.iter())
                .filter(|lib| classify_library(lib, allowlist).is_none())
                .cloned()
                .collect();
            if !unknown.is_empty() {
                return Err(Error::UnclassifiableLibrary(unknown.into_iter().collect()));
            }
            let (inside, outside): (Vec<&Example>, Vec<&Example>) = dataset
                .examples()
                .iter()
                .partition(|ex| is_builtin_only(ex, allowlist));
            train = inside.iter().map(|e| e.id.clone()).collect::<Vec<_>>();
            let mut rest: Vec<String> = outside.iter().map(|e| e.id.clone()).collect();
            if rest.is_empty() {
                log::warn!("library split: no third-party examples, dev and test are empty");
            }
            rest.shuffle(&mut rng);
            let n_dev = config.dev_size.min(rest.len());
            test = rest.split_off(n_dev);
            dev = rest;
        }
        SplitKind::Random => {
            if config.dev_size + config.test_size > dataset.len() {
                return Err(Error::InvalidConfig(format!(
                    "dev ({}) + test ({}) exceed dataset size {}",
                    config.dev_size,
                    config.test_size,
                    dataset.len()
                )));
            }
            let mut ids: Vec<String> = dataset.examples().iter().map(|e| e.id.clone()).collect();
            ids.shuffle(&mut rng);
            train = ids.split_off(config.dev_size + config.test_size);
            test = ids.split_off(config.dev_size);
            dev = ids;
        }
    }
    for part in [&mut train, &mut dev, &mut test] {
        sort_by_dataset_order(part, dataset);
    }
    Ok(SplitManifest {
        kind,
        seed,
        stdlib_allowlist_version: (kind == SplitKind::Library).then(|| allowlist.version.clone()),
        train,
        dev,
        test,
    })
}
