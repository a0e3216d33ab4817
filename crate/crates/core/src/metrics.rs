//! Alignment accuracy and modality-gap measures.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::relaxed_ot::Alignment;
use crate::sequences::{l2_distance, EmbeddingSequence};

/// Fraction of positions where `pred` and `reference` agree.
pub fn a_score(pred: &Alignment, reference: &Alignment) -> Result<f64> {
    if pred.len() != reference.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: reference.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::InvalidValue("alignments are empty".into()));
    }
    let hits = pred
        .targets()
        .iter()
        .zip(reference.targets())
        .filter(|(p, r)| p == r)
        .count();
    Ok(hits as f64 / pred.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    /// Distance between the unweighted token means of the two sequences.
    pub sentence_gap: f64,
    /// Mean distance between each speech token and its aligned text token.
    pub word_gap: f64,
}

impl GapReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("gap report serializes")
    }
}

fn mean_row(seq: &EmbeddingSequence) -> Vec<f64> {
    let mut acc = vec![0.0; seq.dim()];
    for row in seq.rows() {
        for (a, v) in acc.iter_mut().zip(row) {
            *a += v;
        }
    }
    let n = seq.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}

pub fn modality_gap(
    speech: &EmbeddingSequence,
    text: &EmbeddingSequence,
    align: &Alignment,
) -> Result<GapReport> {
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
    align.check_bounds(text.len())?;
    let sentence_gap = l2_distance(&mean_row(speech), &mean_row(text));
    let word_gap = (0..speech.len())
        .map(|i| l2_distance(speech.row(i), text.row(align.get(i))))
        .sum::<f64>()
        / speech.len() as f64;
    Ok(GapReport {
        sentence_gap,
        word_gap,
    })
}
