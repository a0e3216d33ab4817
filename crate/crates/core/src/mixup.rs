//! Token-level cross-modal mixup.
//!
//! Position `i` keeps its speech token unless a uniform draw `u_i` falls at
//! or below `p*`, in which case it takes the aligned text token. Draws come
//! from a ChaCha8 stream, one per position in ascending index order. They
//! are taken from `(0, 1]` so that `p* = 0` and `p* = 1` are exact.

use std::fs;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::relaxed_ot::Alignment;
use crate::rng;
use crate::sequences::{parse_table, write_table, EmbeddingSequence};

/// Default probability of taking the text token.
pub const DEFAULT_MIXUP_PROB: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Origin {
    Speech,
    Text,
}

impl Origin {
    pub fn tag(self) -> &'static str {
        match self {
            Origin::Speech => "S",
            Origin::Text => "T",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixupConfig {
    pub p_star: f64,
    pub seed: u64,
}

impl MixupConfig {
    pub fn new(p_star: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_star) {
            return Err(Error::InvalidValue(format!("mixup probability {p_star} not in [0, 1]")));
        }
        Ok(Self { p_star, seed })
    }
}

impl Default for MixupConfig {
    fn default() -> Self {
        Self {
            p_star: DEFAULT_MIXUP_PROB,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixupSequence {
    pub sequence: EmbeddingSequence,
    pub origin: Vec<Origin>,
}

impl MixupSequence {
    pub fn len(&self) -> usize {
        self.origin.len()
    }

    pub fn is_empty(&self) -> bool {
        self.origin.is_empty()
    }

    pub fn text_fraction(&self) -> f64 {
        let text = self.origin.iter().filter(|o| **o == Origin::Text).count();
        text as f64 / self.len() as f64
    }

    /// Embedding TSV with a trailing `S`/`T` origin column.
    pub fn to_tsv(&self) -> String {
        let tags: Vec<&str> = self.origin.iter().map(|o| o.tag()).collect();
        write_table(&self.sequence, Some(&tags))
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let (sequence, tags) = parse_table(text, true)?;
        let origin = tags
            .iter()
            .enumerate()
            .map(|(i, t)| match t.as_str() {
                "S" => Ok(Origin::Speech),
                "T" => Ok(Origin::Text),
                other => Err(Error::format(i + 2, format!("origin must be S or T, got {other:?}"))),
            })
            .collect::<Result<_>>()?;
        Ok(Self { sequence, origin })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_tsv())?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_tsv(&fs::read_to_string(path)?)
    }
}

fn validate(speech: &EmbeddingSequence, text: &EmbeddingSequence, align: &Alignment) -> Result<()> {
    if speech.dim() != text.dim() {
        return Err(Error::ShapeMismatch(format!(
            "speech dim {} differs from text dim {}",
            speech.dim(),
            text.dim()
        )));
    }
    if align.len() != speech.len() {
        return Err(Error::ShapeMismatch(format!(
            "alignment has {} entries for {} speech tokens",
            align.len(),
            speech.len()
        )));
    }
    align.check_bounds(text.len())
}

fn mix_with(
    speech: &EmbeddingSequence,
    text: &EmbeddingSequence,
    align: &Alignment,
    p_star: f64,
    rng: &mut ChaCha8Rng,
) -> Result<MixupSequence> {
    let mut data = Vec::with_capacity(speech.len() * speech.dim());
    let mut origin = Vec::with_capacity(speech.len());
    for i in 0..speech.len() {
        let u = 1.0 - rng.random::<f64>();
        if u <= p_star {
            data.extend_from_slice(text.row(align.get(i)));
            origin.push(Origin::Text);
        } else {
            data.extend_from_slice(speech.row(i));
            origin.push(Origin::Speech);
        }
    }
    Ok(MixupSequence {
        sequence: EmbeddingSequence::from_flat(speech.len(), speech.dim(), data)?,
        origin,
    })
}

pub fn mixup(
    speech: &EmbeddingSequence,
    text: &EmbeddingSequence,
    align: &Alignment,
    cfg: &MixupConfig,
) -> Result<MixupSequence> {
    MixupConfig::new(cfg.p_star, cfg.seed)?;
    validate(speech, text, align)?;
    mix_with(speech, text, align, cfg.p_star, &mut rng::seeded(cfg.seed))
}

/// Mixes a batch in parallel. Item `k` draws from ChaCha stream `k` of
/// `cfg.seed`, so the output does not depend on thread scheduling.
pub fn mixup_batch(
    items: &[(EmbeddingSequence, EmbeddingSequence, Alignment)],
    cfg: &MixupConfig,
) -> Result<Vec<MixupSequence>> {
    MixupConfig::new(cfg.p_star, cfg.seed)?;
    items
        .par_iter()
        .enumerate()
        .map(|(k, (speech, text, align))| {
            validate(speech, text, align)?;
            let mut rng = rng::seeded_stream(cfg.seed, k as u64);
            mix_with(speech, text, align, cfg.p_star, &mut rng)
        })
        .collect()
}
