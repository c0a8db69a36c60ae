#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Posting {
    /// Set (or group) index.
    pub id: u32,
    /// Position of the token inside that set.
    pub pos: u32,
}

/// Per-token postings lists, appended in id order.
///
/// Ids are appended in probe order, so sizes are non-decreasing along a list.
/// Each list keeps a start cursor that skips entries already too small for
/// every future probe; the entries themselves are never removed.
#[derive(Debug, Default)]
pub struct InvertedIndex {
    lists: Vec<Vec<Posting>>,
    starts: Vec<usize>,
}

impl InvertedIndex {
    pub fn with_tokens(token_count: usize) -> Self {
        InvertedIndex { lists: vec![Vec::new(); token_count], starts: vec![0; token_count] }
    }

    pub fn insert(&mut self, token: u32, id: u32, pos: u32) {
        let t = token as usize;
        if t >= self.lists.len() {
            self.lists.resize_with(t + 1, Vec::new);
            self.starts.resize(t + 1, 0);
        }
        debug_assert!(self.lists[t].last().is_none_or(|p| p.id < id));
        self.lists[t].push(Posting { id, pos });
    }

    /// Postings for `token` whose set size (per `size_of`) is at least
    /// `min_size`. Probes must come with non-decreasing `min_size`.
    pub fn postings_from(&mut self, token: u32, min_size: usize, size_of: impl Fn(u32) -> usize) -> &[Posting] {
        let t = token as usize;
        let Some(list) = self.lists.get(t) else {
            return &[];
        };
        let start = &mut self.starts[t];
        while *start < list.len() && size_of(list[*start].id) < min_size {
            *start += 1;
        }
        &list[*start..]
    }

    pub fn postings(&self, token: u32) -> &[Posting] {
        self.lists.get(token as usize).map_or(&[], Vec::as_slice)
    }

    pub fn total_postings(&self) -> usize {
        self.lists.iter().map(Vec::len).sum()
    }
}

/// Epoch-stamped per-id state, reset in O(1) between probes.
#[derive(Debug)]
pub(crate) struct CandidateMarks {
    epoch: u32,
    stamps: Vec<u32>,
    pruned: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Mark {
    Unseen,
    Accepted,
    Pruned,
}

impl CandidateMarks {
    pub(crate) fn new(len: usize) -> Self {
        CandidateMarks { epoch: 0, stamps: vec![0; len], pruned: vec![false; len] }
    }

    pub(crate) fn next_probe(&mut self) {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamps.fill(0);
            self.epoch = 1;
        }
    }

    #[inline]
    pub(crate) fn get(&self, id: u32) -> Mark {
        let i = id as usize;
        match (self.stamps[i] == self.epoch, self.pruned[i]) {
            (false, _) => Mark::Unseen,
            (true, false) => Mark::Accepted,
            (true, true) => Mark::Pruned,
        }
    }

    #[inline]
    pub(crate) fn set(&mut self, id: u32, mark: Mark) {
        let i = id as usize;
        self.stamps[i] = self.epoch;
        self.pruned[i] = mark == Mark::Pruned;
    }
}
