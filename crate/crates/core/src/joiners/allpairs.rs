use super::index::{CandidateMarks, InvertedIndex, Mark};
use super::{CandidateSink, GenerationStats};
use crate::collection::Collection;
use crate::filters::{positional_filter, prefix_lengths, MatchPosition};
use crate::similarity::SimilarityPredicate;

/// Prefix + length filtering.
pub fn allpairs_generate(
    collection: &Collection,
    pred: &SimilarityPredicate,
    sink: &mut dyn CandidateSink,
) -> GenerationStats {
    index_nested_loop(collection, pred, sink, false)
}

/// AllPairs plus the positional filter at the first index match of each
/// pre-candidate.
pub fn ppjoin_generate(
    collection: &Collection,
    pred: &SimilarityPredicate,
    sink: &mut dyn CandidateSink,
) -> GenerationStats {
    index_nested_loop(collection, pred, sink, true)
}

fn index_nested_loop(
    collection: &Collection,
    pred: &SimilarityPredicate,
    sink: &mut dyn CandidateSink,
    positional: bool,
) -> GenerationStats {
    let n = collection.len();
    let mut stats = GenerationStats::default();
    let token_count = collection.max_token().map_or(0, |t| t as usize + 1);
    let mut index = InvertedIndex::with_tokens(token_count);
    let mut marks = CandidateMarks::new(n);
    let mut batch: Vec<u32> = Vec::new();
    let size_of = |id: u32| collection.set_len(id as usize);

    for probe in 0..n {
        let tokens = collection.set(probe);
        let size = tokens.len();
        let prefixes = prefix_lengths(pred, size);
        // Indexed sets are never larger than the probe: only the lower size
        // bound can prune.
        let min_size = pred.size_bounds(size).min;

        marks.next_probe();
        batch.clear();
        for (pos_r, &token) in tokens[..prefixes.probe].iter().enumerate() {
            for posting in index.postings_from(token, min_size, size_of) {
                stats.pre_candidates += 1;
                let cand = posting.id as usize;
                if marks.get(posting.id) != Mark::Unseen || !collection.joinable(probe, cand) {
                    continue;
                }
                let keep = !positional
                    || positional_filter(
                        pred,
                        size,
                        collection.set_len(cand),
                        MatchPosition { pos_r, pos_s: posting.pos as usize },
                        1,
                    )
                    .is_keep();
                if keep {
                    marks.set(posting.id, Mark::Accepted);
                    batch.push(posting.id);
                } else {
                    marks.set(posting.id, Mark::Pruned);
                }
            }
        }
        stats.candidates += batch.len() as u64;
        sink.push_batch(probe as u32, &batch);

        for (pos, &token) in tokens[..prefixes.index].iter().enumerate() {
            index.insert(token, probe as u32, pos as u32);
        }
    }
    stats
}
