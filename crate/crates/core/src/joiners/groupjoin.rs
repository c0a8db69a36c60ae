use std::ops::Range;

use super::index::{CandidateMarks, InvertedIndex, Mark};
use super::{CandidateSink, GenerationStats, HostVerifier};
use crate::collection::Collection;
use crate::filters::{positional_filter, prefix_lengths, MatchPosition};
use crate::similarity::SimilarityPredicate;

/// Sets sharing size and probe prefix. Members are contiguous in the
/// collection because sets are ordered by size and then lexicographically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Group {
    pub size: usize,
    pub members: Range<u32>,
}

impl Group {
    pub fn representative(&self) -> usize {
        self.members.start as usize
    }
}

pub fn form_groups(collection: &Collection, pred: &SimilarityPredicate) -> Vec<Group> {
    let mut groups: Vec<Group> = Vec::new();
    for i in 0..collection.len() {
        let set = collection.set(i);
        let prefix = &set[..prefix_lengths(pred, set.len()).probe];
        if let Some(last) = groups.last_mut() {
            let rep = collection.set(last.representative());
            if rep.len() == set.len() && rep[..prefix.len()] == *prefix {
                last.members.end = i as u32 + 1;
                continue;
            }
        }
        groups.push(Group { size: set.len(), members: i as u32..i as u32 + 1 });
    }
    groups
}

/// Group-level PPJoin.
///
/// Member pairs of distinct candidate groups go to `sink` for parallel
/// verification. Pairs inside a group only appear when the group is expanded
/// and are verified by `host`.
pub fn groupjoin_generate(
    collection: &Collection,
    pred: &SimilarityPredicate,
    sink: &mut dyn CandidateSink,
    host: &mut dyn HostVerifier,
) -> GenerationStats {
    let groups = form_groups(collection, pred);
    let mut stats = GenerationStats::default();
    let token_count = collection.max_token().map_or(0, |t| t as usize + 1);
    let mut index = InvertedIndex::with_tokens(token_count);
    let mut marks = CandidateMarks::new(groups.len());
    let mut candidate_groups: Vec<u32> = Vec::new();
    let mut batch: Vec<u32> = Vec::new();
    let size_of = |gid: u32| groups[gid as usize].size;

    for (gid, group) in groups.iter().enumerate() {
        let tokens = collection.set(group.representative());
        let size = group.size;
        let prefixes = prefix_lengths(pred, size);
        let min_size = pred.size_bounds(size).min;

        marks.next_probe();
        candidate_groups.clear();
        for (pos_r, &token) in tokens[..prefixes.probe].iter().enumerate() {
            for posting in index.postings_from(token, min_size, size_of) {
                stats.pre_candidates += 1;
                if marks.get(posting.id) != Mark::Unseen {
                    continue;
                }
                let at = MatchPosition { pos_r, pos_s: posting.pos as usize };
                if positional_filter(pred, size, groups[posting.id as usize].size, at, 1).is_keep() {
                    marks.set(posting.id, Mark::Accepted);
                    candidate_groups.push(posting.id);
                } else {
                    marks.set(posting.id, Mark::Pruned);
                }
            }
        }

        // Inter-group pairs: every member sees the members of every
        // candidate group.
        for probe in group.members.clone() {
            batch.clear();
            for &cg in &candidate_groups {
                batch.extend(
                    groups[cg as usize]
                        .members
                        .clone()
                        .filter(|&m| collection.joinable(probe as usize, m as usize)),
                );
            }
            stats.candidates += batch.len() as u64;
            sink.push_batch(probe, &batch);
        }

        // Intra-group pairs, verified on the producer side.
        for probe in group.members.clone() {
            for other in group.members.start..probe {
                if collection.joinable(probe as usize, other as usize) {
                    stats.host_pairs += 1;
                    host.verify(probe, other);
                }
            }
        }

        for (pos, &token) in tokens[..prefixes.index].iter().enumerate() {
            index.insert(token, gid as u32, pos as u32);
        }
    }
    stats
}
