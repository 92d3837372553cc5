//! JSON index of a dataset: one entry per sample pointing at its container.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::container::{
    read_container_file, read_header_file, AttentionContainer, ContainerHeader,
};
use crate::error::{Error, IoContext, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleEntry {
    pub id: String,
    /// Relative to the manifest's directory.
    pub path: PathBuf,
    /// 1 = hallucinated, 0 = grounded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<u8>,
    pub n_tokens: u32,
    pub prompt_len: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub model_name: String,
    pub n_layers: u32,
    pub n_heads: u32,
    pub samples: Vec<SampleEntry>,
    /// Directory sample paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Manifest {
    /// Parses and checks ids and labels. Paths are not touched.
    pub fn from_json(text: &str) -> Result<Self> {
        let m: Manifest = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::with_capacity(self.samples.len());
        for s in &self.samples {
            if !seen.insert(s.id.as_str()) {
                return Err(Error::DuplicateId(s.id.clone()));
            }
            if let Some(l) = s.label {
                if l > 1 {
                    return Err(Error::Manifest(format!(
                        "sample {:?} has label {l}, expected 0 or 1",
                        s.id
                    )));
                }
            }
            if s.prompt_len == 0 || s.prompt_len >= s.n_tokens {
                return Err(Error::Manifest(format!(
                    "sample {:?}: need 0 < prompt_len < n_tokens, got {} and {}",
                    s.id, s.prompt_len, s.n_tokens
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn sample(&self, id: &str) -> Option<&SampleEntry> {
        self.samples.iter().find(|s| s.id == id)
    }

    pub fn label(&self, id: &str) -> Option<u8> {
        self.sample(id).and_then(|s| s.label)
    }

    pub fn resolve(&self, sample: &SampleEntry) -> PathBuf {
        self.base_dir.join(&sample.path)
    }

    fn check_header(&self, sample: &SampleEntry, h: &ContainerHeader) -> Result<()> {
        let checks = [
            ("n_layers", self.n_layers, h.n_layers),
            ("n_heads", self.n_heads, h.n_heads),
            ("n_tokens", sample.n_tokens, h.n_tokens),
            ("prompt_len", sample.prompt_len, h.prompt_len),
        ];
        for (field, manifest, container) in checks {
            if manifest != container {
                return Err(Error::HeaderMismatch {
                    id: sample.id.clone(),
                    field,
                    manifest,
                    container,
                });
            }
        }
        Ok(())
    }

    /// Reads a sample's container and checks it against the manifest.
    pub fn open_container(&self, sample: &SampleEntry) -> Result<AttentionContainer> {
        let c = read_container_file(&self.resolve(sample))?;
        self.check_header(sample, &c.header())?;
        Ok(c)
    }

    /// Header-only agreement check for one sample.
    pub fn check_sample_header(&self, sample: &SampleEntry) -> Result<()> {
        let h = read_header_file(&self.resolve(sample))?;
        self.check_header(sample, &h)
    }
}

/// Reads a manifest and checks that every referenced container exists.
/// Header agreement is checked when a container is opened.
pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let m = read_manifest_unchecked(path)?;
    for s in &m.samples {
        let p = m.resolve(s);
        if !p.is_file() {
            return Err(Error::DanglingPath {
                id: s.id.clone(),
                path: p,
            });
        }
    }
    Ok(m)
}

/// Reads a manifest for its labels only; container paths are not checked.
pub fn read_manifest_unchecked(path: &Path) -> Result<Manifest> {
    let text = std::fs::read_to_string(path).at(path)?;
    let mut m = Manifest::from_json(&text)?;
    m.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(m)
}

pub fn write_manifest(m: &Manifest, path: &Path) -> Result<()> {
    m.validate()?;
    crate::io::write_atomic(path, m.to_json().as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO: &str = r#"{
        "model_name": "tiny",
        "n_layers": 1,
        "n_heads": 1,
        "extra": "ignored",
        "samples": [
            {"id": "a", "path": "a.attg", "label": 1, "n_tokens": 2, "prompt_len": 1, "note": "x"},
            {"id": "b", "path": "b.attg", "n_tokens": 3, "prompt_len": 2}
        ]
    }"#;

    #[test]
    fn labels_present_and_absent() {
        let m = Manifest::from_json(TWO).unwrap();
        assert_eq!(m.samples[0].label, Some(1));
        assert_eq!(m.samples[1].label, None);
        assert_eq!(m.label("a"), Some(1));
        assert!(!m.to_json().contains("\"label\": null"));
    }

    #[test]
    fn duplicate_id_rejected() {
        let text = TWO.replace("\"id\": \"b\"", "\"id\": \"a\"");
        assert!(matches!(Manifest::from_json(&text), Err(Error::DuplicateId(id)) if id == "a"));
    }

    #[test]
    fn bad_label_and_split_rejected() {
        let text = TWO.replace("\"label\": 1", "\"label\": 2");
        assert!(matches!(
            Manifest::from_json(&text),
            Err(Error::Manifest(_))
        ));
        let text = TWO.replace("\"prompt_len\": 2", "\"prompt_len\": 3");
        assert!(matches!(
            Manifest::from_json(&text),
            Err(Error::Manifest(_))
        ));
    }

    #[test]
    fn json_round_trip() {
        let m = Manifest::from_json(TWO).unwrap();
        assert_eq!(Manifest::from_json(&m.to_json()).unwrap(), m);
    }
}
