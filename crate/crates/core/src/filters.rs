//! Prefix, length and positional filters.
//!
//! Prefix lengths assume the incremental self-join order: sets are probed in
//! ascending size, so an indexed set is never larger than the probe. The probe
//! prefix must then cover the smallest admissible partner, while the index
//! prefix only needs to cover partners at least as large as the set itself.

use crate::similarity::SimilarityPredicate;

/// Probe and index prefix lengths for a set of a given size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrefixLengths {
    pub probe: usize,
    pub index: usize,
}

/// Positions of a shared token in the probe (`pos_r`) and candidate (`pos_s`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatchPosition {
    pub pos_r: usize,
    pub pos_s: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterDecision {
    Keep,
    Prune,
}

impl FilterDecision {
    fn keep_if(cond: bool) -> Self {
        if cond {
            FilterDecision::Keep
        } else {
            FilterDecision::Prune
        }
    }

    pub fn is_keep(self) -> bool {
        self == FilterDecision::Keep
    }
}

fn prefix_for(size: usize, required: usize) -> usize {
    (size + 1).saturating_sub(required).clamp(1, size.max(1))
}

pub fn prefix_lengths(pred: &SimilarityPredicate, size: usize) -> PrefixLengths {
    let min_partner = pred.size_bounds(size).min.min(size);
    PrefixLengths {
        probe: prefix_for(size, pred.equivalent_overlap(size, min_partner)),
        index: prefix_for(size, pred.equivalent_overlap(size, size)),
    }
}

pub fn length_filter(pred: &SimilarityPredicate, size_r: usize, size_s: usize) -> FilterDecision {
    FilterDecision::keep_if(pred.size_bounds(size_r).contains(size_s))
}

/// `current_overlap` already counts the token at `at`; only tokens strictly
/// after the match positions can still contribute.
pub fn positional_filter(
    pred: &SimilarityPredicate,
    size_r: usize,
    size_s: usize,
    at: MatchPosition,
    current_overlap: usize,
) -> FilterDecision {
    let rest = (size_r - at.pos_r - 1).min(size_s - at.pos_s - 1);
    FilterDecision::keep_if(current_overlap + rest >= pred.equivalent_overlap(size_r, size_s))
}
