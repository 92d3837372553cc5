//! Synthetic attention dumps with planted hallucination-aware heads.
//!
//! Every response row `i` puts weight `1 - t` on one random prompt token
//! (its anchor) and `t / i` on each other token up to and including
//! itself, so the row sums to 1. With `t <= i / (i + 1)` the anchor edge,
//! at distance exactly `t`, is the cheapest way to attach the token, and
//! the normalized divergence of the head is the mean of its `t` values.
//!
//! `t` is drawn around a per-(sample, head) level: `base_level` plus a
//! uniform head offset, plus `separation` on planted heads of hallucinated
//! samples. Non-planted heads look the same for both classes. Prompt rows
//! put a per-sample share `c` in `[0, prompt_noise]` on the previous token
//! and spread the rest evenly, which changes prompt-prompt distances
//! without touching the divergence.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::container::{write_container_file, AttentionContainer};
use crate::error::{Error, Result};
use crate::manifest::{write_manifest, Manifest, SampleEntry};

fn default_base_level() -> f64 {
    0.3
}
fn default_head_noise() -> f64 {
    0.25
}
fn default_token_noise() -> f64 {
    0.05
}
fn default_model_name() -> String {
    "synthetic".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_layers: u32,
    pub n_heads: u32,
    pub n_samples: usize,
    /// Inclusive `[min, max]`.
    pub n_tokens: [u32; 2],
    /// Inclusive `[min, max]`; capped at `n_tokens - 1` per sample.
    pub prompt_len: [u32; 2],
    /// `[layer, head]` pairs.
    pub planted_heads: Vec<[u32; 2]>,
    /// Shift of the planted heads' divergence on hallucinated samples.
    pub separation: f64,
    /// Fraction of hallucinated samples.
    pub label_balance: f64,
    pub seed: u64,
    #[serde(default = "default_base_level")]
    pub base_level: f64,
    /// Half-width of the uniform per-(sample, head) level offset.
    #[serde(default = "default_head_noise")]
    pub head_noise: f64,
    /// Half-width of the uniform per-token jitter.
    #[serde(default = "default_token_noise")]
    pub token_noise: f64,
    /// Upper bound of the per-sample previous-token share in prompt rows.
    #[serde(default)]
    pub prompt_noise: f64,
    #[serde(default = "default_model_name")]
    pub model_name: String,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Synth(m));
        if self.n_layers == 0 || self.n_heads == 0 {
            return bad("head grid must be non-empty".into());
        }
        if self.n_samples == 0 {
            return bad("n_samples must be positive".into());
        }
        let [nmin, nmax] = self.n_tokens;
        let [pmin, pmax] = self.prompt_len;
        if nmin > nmax || pmin > pmax {
            return bad("ranges must be [min, max]".into());
        }
        if pmin == 0 || pmin >= nmin {
            return bad(format!(
                "need 1 <= prompt_len min < n_tokens min, got {pmin} and {nmin}"
            ));
        }
        for &[l, h] in &self.planted_heads {
            if l >= self.n_layers || h >= self.n_heads {
                return bad(format!("planted head ({l}, {h}) outside the grid"));
            }
        }
        if !(0.0..1.0).contains(&self.separation) {
            return bad(format!("separation {} not in [0, 1)", self.separation));
        }
        if !(self.label_balance > 0.0 && self.label_balance < 1.0) {
            return bad(format!(
                "label_balance {} not in (0, 1)",
                self.label_balance
            ));
        }
        if !(0.0..=1.0).contains(&self.base_level) {
            return bad(format!("base_level {} not in [0, 1]", self.base_level));
        }
        if self.base_level + self.separation > 1.0 {
            return bad(format!(
                "infeasible: base_level + separation = {} > 1",
                self.base_level + self.separation
            ));
        }
        for (name, v) in [
            ("head_noise", self.head_noise),
            ("token_noise", self.token_noise),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be finite and non-negative"));
            }
        }
        if !(0.0..=1.0).contains(&self.prompt_noise) {
            return bad(format!("prompt_noise {} not in [0, 1]", self.prompt_noise));
        }
        Ok(())
    }

    fn is_planted(&self, layer: u32, head: u32) -> bool {
        self.planted_heads.contains(&[layer, head])
    }
}

/// One generated sample.
#[derive(Debug, Clone)]
pub struct SyntheticSample {
    pub entry: SampleEntry,
    pub container: AttentionContainer,
}

pub struct SyntheticGenerator {
    spec: SyntheticSpec,
    labels: Vec<u8>,
}

pub fn sample_id(index: usize) -> String {
    format!("s{index:05}")
}

impl SyntheticGenerator {
    pub fn new(spec: SyntheticSpec) -> Result<Self> {
        spec.validate()?;
        let n = spec.n_samples;
        let n_hallu = ((n as f64 * spec.label_balance).round() as usize).min(n);
        let mut labels: Vec<u8> = (0..n).map(|i| u8::from(i < n_hallu)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        labels.shuffle(&mut rng);
        Ok(Self { spec, labels })
    }

    pub fn spec(&self) -> &SyntheticSpec {
        &self.spec
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.spec.n_samples
    }

    pub fn is_empty(&self) -> bool {
        self.spec.n_samples == 0
    }

    /// Generates sample `index`; depends only on the spec and the index.
    pub fn sample(&self, index: usize) -> SyntheticSample {
        let spec = &self.spec;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(index as u64 + 1);

        let hallucinated = self.labels[index] == 1;
        let n = rng.gen_range(spec.n_tokens[0]..=spec.n_tokens[1]);
        let p = rng.gen_range(spec.prompt_len[0]..=spec.prompt_len[1].min(n - 1));
        let share = if spec.prompt_noise > 0.0 {
            rng.gen_range(0.0..=spec.prompt_noise)
        } else {
            0.0
        };

        let (n_us, p_us) = (n as usize, p as usize);
        let map_len = n_us * (n_us + 1) / 2;
        let mut weights =
            Vec::with_capacity(spec.n_layers as usize * spec.n_heads as usize * map_len);
        for layer in 0..spec.n_layers {
            for head in 0..spec.n_heads {
                let mut level = spec.base_level;
                if spec.head_noise > 0.0 {
                    level += rng.gen_range(-spec.head_noise..=spec.head_noise);
                }
                if hallucinated && spec.is_planted(layer, head) {
                    level += spec.separation;
                }
                weights.push(1.0f32);
                for i in 1..p_us {
                    let even = (1.0 - share) / (i + 1) as f64;
                    for j in 0..=i {
                        let w = if j + 1 == i { even + share } else { even };
                        weights.push(w as f32);
                    }
                }
                for i in p_us..n_us {
                    let jitter = if spec.token_noise > 0.0 {
                        rng.gen_range(-spec.token_noise..=spec.token_noise)
                    } else {
                        0.0
                    };
                    let cap = i as f64 / (i + 1) as f64;
                    let t = (level + jitter).clamp(0.0, cap);
                    let anchor = rng.gen_range(0..p_us);
                    let spread = (t / i as f64) as f32;
                    let start = weights.len();
                    weights.resize(start + i + 1, spread);
                    weights[start + anchor] = (1.0 - t) as f32;
                }
            }
        }

        let id = sample_id(index);
        let container = AttentionContainer::new(spec.n_layers, spec.n_heads, n, p, weights)
            .expect("generated weights satisfy container invariants");
        SyntheticSample {
            entry: SampleEntry {
                path: PathBuf::from(format!("{id}.attg")),
                id,
                label: Some(self.labels[index]),
                n_tokens: n,
                prompt_len: p,
            },
            container,
        }
    }

    pub fn manifest_entries(&self) -> Vec<SampleEntry> {
        (0..self.len()).map(|i| self.sample(i).entry).collect()
    }

    /// Writes every container plus `manifest.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Manifest> {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let samples = (0..self.len())
            .into_par_iter()
            .map(|i| {
                let s = self.sample(i);
                write_container_file(&s.container, &dir.join(&s.entry.path))?;
                Ok(s.entry)
            })
            .collect::<Result<Vec<_>>>()?;
        let manifest = Manifest {
            model_name: self.spec.model_name.clone(),
            n_layers: self.spec.n_layers,
            n_heads: self.spec.n_heads,
            samples,
            base_dir: dir.to_path_buf(),
        };
        write_manifest(&manifest, &dir.join("manifest.json"))?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn small_spec() -> SyntheticSpec {
        SyntheticSpec {
            n_layers: 2,
            n_heads: 3,
            n_samples: 20,
            n_tokens: [12, 16],
            prompt_len: [6, 9],
            planted_heads: vec![[1, 2]],
            separation: 0.3,
            label_balance: 0.5,
            seed: 7,
            base_level: 0.3,
            head_noise: 0.25,
            token_noise: 0.05,
            prompt_noise: 0.0,
            model_name: "synthetic".into(),
        }
    }

    #[test]
    fn rows_sum_to_one() {
        let g = SyntheticGenerator::new(small_spec()).unwrap();
        let s = g.sample(3);
        let n = s.container.n_tokens() as usize;
        let map = s.container.map(1, 2);
        let mut k = 0;
        for i in 0..n {
            let sum: f64 = map[k..k + i + 1].iter().map(|&w| f64::from(w)).sum();
            assert!((sum - 1.0).abs() < 1e-5, "row {i} sums to {sum}");
            k += i + 1;
        }
    }

    #[test]
    fn labels_follow_balance() {
        let mut spec = small_spec();
        spec.label_balance = 0.25;
        let g = SyntheticGenerator::new(spec).unwrap();
        assert_eq!(g.labels().iter().filter(|&&l| l == 1).count(), 5);
    }

    #[test]
    fn deterministic_per_index() {
        let g = SyntheticGenerator::new(small_spec()).unwrap();
        assert_eq!(g.sample(5).container, g.sample(5).container);
        assert_ne!(g.sample(5).container, g.sample(6).container);
    }

    #[test]
    fn spec_errors() {
        let mut s = small_spec();
        s.base_level = 0.8;
        s.separation = 0.3;
        assert!(
            matches!(SyntheticGenerator::new(s), Err(Error::Synth(m)) if m.contains("infeasible"))
        );
        let mut s = small_spec();
        s.planted_heads = vec![[2, 0]];
        assert!(SyntheticGenerator::new(s).is_err());
        let mut s = small_spec();
        s.prompt_len = [12, 14];
        assert!(SyntheticGenerator::new(s).is_err());
        let mut s = small_spec();
        s.label_balance = 1.0;
        assert!(SyntheticGenerator::new(s).is_err());
    }

    #[test]
    fn spec_json_defaults() {
        let text = r#"{"n_layers":1,"n_heads":1,"n_samples":2,"n_tokens":[4,5],
            "prompt_len":[2,3],"planted_heads":[[0,0]],"separation":0.2,
            "label_balance":0.5,"seed":1}"#;
        let s: SyntheticSpec = serde_json::from_str(text).unwrap();
        assert_eq!(s.base_level, 0.3);
        assert_eq!(s.prompt_noise, 0.0);
        assert_eq!(s.model_name, "synthetic");
    }
}
