//! `key = value` configuration files and overrides for experiment settings.
//!
//! Keys name fields of the experiment, training or model configuration,
//! either bare (`lr`, `encoder_hidden`) or qualified (`train.lr`,
//! `model.encoder_hidden`). `beam_size` exists at both the experiment and
//! model level; a bare key sets both. Values are read as JSON when they
//! parse (`0.3`, `true`, `null`) and as plain strings otherwise.

use anyhow::{anyhow, bail, Context, Result};
use docread_core::evaltrain::ExperimentConfig;
use serde_json::Value;
use std::path::Path;

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_pairs(text: &str, origin: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("{origin}:{}: expected `key = value`, got {raw:?}", i + 1))?;
        let key = k.trim();
        if key.is_empty() {
            bail!("{origin}:{}: empty key", i + 1);
        }
        pairs.push((key.to_string(), v.trim().to_string()));
    }
    Ok(pairs)
}

pub fn read_pairs(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_pairs(&text, &path.display().to_string())
}

/// Splits a `--set key=value` flag.
pub fn parse_assignment(s: &str) -> Result<(String, String)> {
    let (k, v) = s.split_once('=').ok_or_else(|| anyhow!("expected key=value, got {s:?}"))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

fn parse_value(v: &str) -> Value {
    serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()))
}

fn set_in(obj: &mut Value, path: &[&str], key: &str, value: &Value) -> bool {
    let mut node = obj;
    for p in path {
        node = match node.get_mut(*p) {
            Some(n) => n,
            None => return false,
        };
    }
    match node.as_object_mut() {
        Some(map) if map.contains_key(key) => {
            map.insert(key.to_string(), value.clone());
            true
        }
        _ => false,
    }
}

/// Applies `pairs` in order; later pairs win. Unknown keys are rejected.
pub fn apply(base: &ExperimentConfig, pairs: &[(String, String)]) -> Result<ExperimentConfig> {
    let mut doc = serde_json::to_value(base)?;
    for (key, raw) in pairs {
        let value = parse_value(raw);
        let hit = match key.split_once('.') {
            Some(("train", k)) => set_in(&mut doc, &["train"], k, &value),
            Some(("model", k)) => set_in(&mut doc, &["train", "model"], k, &value),
            Some(_) => false,
            None => {
                let a = set_in(&mut doc, &[], key, &value);
                let b = set_in(&mut doc, &["train"], key, &value);
                let c = set_in(&mut doc, &["train", "model"], key, &value);
                (a || b || c) && key != "model" && key != "train"
            }
        };
        if !hit {
            bail!("unknown configuration key {key:?}");
        }
    }
    let config: ExperimentConfig =
        serde_json::from_value(doc).context("configuration value has the wrong type")?;
    config.train.validate()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(text: &str) -> Vec<(String, String)> {
        parse_pairs(text, "test").unwrap()
    }

    #[test]
    fn reads_comments_and_blank_lines() {
        let p = pairs("# header\n\nlr = 0.01  # step\nencoder_hidden=128\n");
        assert_eq!(p, vec![("lr".into(), "0.01".into()), ("encoder_hidden".into(), "128".into())]);
    }

    #[test]
    fn malformed_line_names_its_position() {
        let err = parse_pairs("lr = 1\noops\n", "cfg.txt").unwrap_err().to_string();
        assert!(err.contains("cfg.txt:2"), "{err}");
    }

    #[test]
    fn later_values_win() {
        let cfg = apply(
            &ExperimentConfig::default(),
            &pairs("lr = 0.1\nmodel.dropout = 0.5\ntrain.lr = 0.2\ndoc_mode = none"),
        )
        .unwrap();
        assert_eq!(cfg.train.lr, 0.2);
        assert_eq!(cfg.train.model.dropout, 0.5);
    }

    #[test]
    fn bare_beam_size_sets_both_levels() {
        let cfg = apply(&ExperimentConfig::default(), &pairs("beam_size = 3")).unwrap();
        assert_eq!(cfg.beam_size, 3);
        assert_eq!(cfg.train.model.beam_size, 3);
    }

    #[test]
    fn unknown_keys_and_bad_types_fail() {
        let base = ExperimentConfig::default();
        assert!(apply(&base, &pairs("learning_rate = 0.1")).is_err());
        assert!(apply(&base, &pairs("model = 3")).is_err());
        assert!(apply(&base, &pairs("lr = fast")).is_err());
        assert!(apply(&base, &pairs("batch_size = 0")).is_err());
    }
}
