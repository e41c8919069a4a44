//! Corpus-level BLEU over multiple references.
//!
//! Modified n-gram precision up to n = 4 with per-corpus clipping, no
//! smoothing: a zero precision at any order zeroes the score. The brevity
//! penalty compares against the reference length closest to each
//! hypothesis, ties going to the shorter reference; that convention varies
//! between implementations, so reports state it.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct BleuReport {
    pub bleu: f64,
    /// Clipped n-gram precisions for n = 1..=4.
    pub precisions: [f64; 4],
    pub matched: [usize; 4],
    pub total: [usize; 4],
    pub brevity_penalty: f64,
    pub hypothesis_len: usize,
    pub reference_len: usize,
    pub lowercased: bool,
}

impl fmt::Display for BleuReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "BLEU = {:.4}{}",
            self.bleu,
            if self.lowercased { " (lowercased)" } else { "" }
        )?;
        for n in 0..4 {
            writeln!(
                f,
                "{}-gram precision: {}/{} = {:.4}",
                n + 1,
                self.matched[n],
                self.total[n],
                self.precisions[n]
            )?;
        }
        writeln!(
            f,
            "brevity penalty: {:.4} (hyp len {}, ref len {})",
            self.brevity_penalty, self.hypothesis_len, self.reference_len
        )?;
        writeln!(f, "reference length: closest to each hypothesis, ties favor the shorter")
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BleuError {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("{hypotheses} hypotheses but {references} reference sets")]
    CountMismatch { hypotheses: usize, references: usize },
    #[error("sentence {sentence} has no references")]
    NoReferences { sentence: usize },
}

fn lowercase_tokens(tokens: &[String]) -> Vec<String> {
    tokens.iter().map(|t| t.to_lowercase()).collect()
}

/// Count n-grams of one order in a token sequence.
fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Corpus BLEU of hypotheses against parallel reference sets; token
/// sequences are compared verbatim unless `lowercase` folds both sides.
pub fn bleu(
    hypotheses: &[Vec<String>],
    references: &[Vec<Vec<String>>],
    lowercase: bool,
) -> Result<BleuReport, BleuError> {
    if hypotheses.len() != references.len() {
        return Err(BleuError::CountMismatch {
            hypotheses: hypotheses.len(),
            references: references.len(),
        });
    }
    if hypotheses.is_empty() {
        return Err(BleuError::EmptyCorpus);
    }

    let mut matched = [0usize; 4];
    let mut total = [0usize; 4];
    let mut hypothesis_len = 0usize;
    let mut reference_len = 0usize;

    for (i, (hyp, refs)) in hypotheses.iter().zip(references).enumerate() {
        if refs.is_empty() {
            return Err(BleuError::NoReferences { sentence: i });
        }
        let hyp = if lowercase { lowercase_tokens(hyp) } else { hyp.clone() };
        let refs: Vec<Vec<String>> = if lowercase {
            refs.iter().map(|r| lowercase_tokens(r)).collect()
        } else {
            refs.clone()
        };

        hypothesis_len += hyp.len();
        // Closest reference length; ties favor the shorter reference.
        reference_len += refs
            .iter()
            .map(Vec::len)
            .min_by_key(|&len| (len.abs_diff(hyp.len()), len))
            .expect("at least one reference");

        for n in 1..=4 {
            let hyp_counts = ngram_counts(&hyp, n);
            total[n - 1] += hyp_counts.values().sum::<usize>();
            let mut ref_counts: HashMap<&[String], usize> = HashMap::new();
            for r in &refs {
                for (gram, count) in ngram_counts(r, n) {
                    let best = ref_counts.entry(gram).or_insert(0);
                    *best = (*best).max(count);
                }
            }
            for (gram, count) in hyp_counts {
                matched[n - 1] += count.min(ref_counts.get(gram).copied().unwrap_or(0));
            }
        }
    }

    let mut precisions = [0.0f64; 4];
    for n in 0..4 {
        if total[n] > 0 {
            precisions[n] = matched[n] as f64 / total[n] as f64;
        }
    }
    let brevity_penalty = if hypothesis_len == 0 {
        0.0
    } else if hypothesis_len >= reference_len {
        1.0
    } else {
        (1.0 - reference_len as f64 / hypothesis_len as f64).exp()
    };
    let bleu = if precisions.iter().all(|&p| p > 0.0) {
        brevity_penalty * (precisions.iter().map(|p| p.ln()).sum::<f64>() / 4.0).exp()
    } else {
        0.0
    };

    Ok(BleuReport {
        bleu,
        precisions,
        matched,
        total,
        brevity_penalty,
        hypothesis_len,
        reference_len,
        lowercased: lowercase,
    })
}
