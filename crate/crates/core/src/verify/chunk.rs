use std::ops::Range;

use crate::{Error, Result};

/// Bytes per candidate id and per offset/probe entry.
pub const INDEX_BYTES: usize = 4;
/// Bytes per output flag.
pub const FLAG_BYTES: usize = 1;
/// Smallest workable budget: one probe entry (id + offset) plus one candidate.
pub const MIN_CHUNK_BUDGET: usize = 3 * INDEX_BYTES;

/// Serialized candidates: `C` holds candidate set ids, `C_O` interleaves
/// probe ids (even positions) with cumulative end offsets into `C` (odd
/// positions).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CandidateChunk {
    c: Vec<u32>,
    c_o: Vec<u32>,
}

/// One `(probe, candidates)` slice of a chunk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChunkEntry {
    pub probe: u32,
    pub range: Range<usize>,
}

impl CandidateChunk {
    pub fn from_parts(c: Vec<u32>, c_o: Vec<u32>) -> Result<Self> {
        if c_o.len() % 2 != 0 {
            return Err(Error::InvalidConfig("C_O must hold (probe, offset) pairs".into()));
        }
        let mut prev = 0u32;
        for &end in c_o.iter().skip(1).step_by(2) {
            if end < prev {
                return Err(Error::InvalidConfig("C_O offsets must be non-decreasing".into()));
            }
            prev = end;
        }
        if prev as usize != c.len() {
            return Err(Error::InvalidConfig(format!("last C_O offset {prev} != |C| = {}", c.len())));
        }
        Ok(CandidateChunk { c, c_o })
    }

    pub fn candidates(&self) -> &[u32] {
        &self.c
    }

    pub fn offsets(&self) -> &[u32] {
        &self.c_o
    }

    pub fn candidate_count(&self) -> usize {
        self.c.len()
    }

    pub fn entry_count(&self) -> usize {
        self.c_o.len() / 2
    }

    pub fn is_empty(&self) -> bool {
        self.c_o.is_empty()
    }

    /// `||C||`
    pub fn candidate_bytes(&self) -> usize {
        self.c.len() * INDEX_BYTES
    }

    /// `||C_O||`
    pub fn offset_bytes(&self) -> usize {
        self.c_o.len() * INDEX_BYTES
    }

    /// `||C|| + ||C_O||`, the amount charged against the chunk budget.
    pub fn byte_size(&self) -> usize {
        self.candidate_bytes() + self.offset_bytes()
    }

    /// `||O||` for a flag array over this chunk.
    pub fn output_bytes(&self) -> usize {
        self.c.len() * FLAG_BYTES
    }

    pub fn entries(&self) -> impl Iterator<Item = ChunkEntry> + '_ {
        let mut start = 0usize;
        self.c_o.chunks_exact(2).map(move |pair| {
            let end = pair[1] as usize;
            let entry = ChunkEntry { probe: pair[0], range: start..end };
            start = end;
            entry
        })
    }

    pub fn batches(&self) -> impl Iterator<Item = (u32, &[u32])> + '_ {
        self.entries().map(move |e| (e.probe, &self.c[e.range]))
    }

    fn clear(&mut self) {
        self.c.clear();
        self.c_o.clear();
    }
}

/// Accumulates batches into a chunk and seals it when the byte budget
/// (`||C|| + ||C_O||`) would be exceeded. A batch larger than the remaining
/// space is split, so a probe may appear in several consecutive entries and
/// chunks.
#[derive(Debug)]
pub struct ChunkBuilder {
    budget: usize,
    open: CandidateChunk,
}

impl ChunkBuilder {
    pub fn new(budget: usize) -> Result<Self> {
        ChunkBuilder::with_buffer(budget, CandidateChunk::default())
    }

    /// Starts from a recycled buffer; its contents are discarded.
    pub fn with_buffer(budget: usize, mut buffer: CandidateChunk) -> Result<Self> {
        if budget < MIN_CHUNK_BUDGET {
            return Err(Error::InvalidConfig(format!(
                "chunk budget of {budget} bytes is below the minimum of {MIN_CHUNK_BUDGET}"
            )));
        }
        buffer.clear();
        Ok(ChunkBuilder { budget, open: buffer })
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn open_bytes(&self) -> usize {
        self.open.byte_size()
    }

    pub fn is_empty(&self) -> bool {
        self.open.is_empty()
    }

    /// Appends a batch. Whenever the open chunk is full it is sealed and
    /// passed to `swap`, which returns the buffer to continue with.
    pub fn push<F>(&mut self, probe: u32, candidates: &[u32], mut swap: F)
    where
        F: FnMut(CandidateChunk) -> CandidateChunk,
    {
        let mut rest = candidates;
        loop {
            let room = self.budget.saturating_sub(self.open.byte_size());
            let id_room = (u32::MAX as usize).saturating_sub(self.open.c.len());
            let fit = if room >= MIN_CHUNK_BUDGET {
                rest.len().min((room - 2 * INDEX_BYTES) / INDEX_BYTES).min(id_room)
            } else {
                0
            };
            let needs_seal = if rest.is_empty() { room < 2 * INDEX_BYTES } else { fit == 0 };
            if needs_seal {
                debug_assert!(!self.open.is_empty());
                let sealed = self.take_sealed();
                self.open = swap(sealed);
                self.open.clear();
                continue;
            }
            self.open.c.extend_from_slice(&rest[..fit]);
            self.open.c_o.push(probe);
            self.open.c_o.push(self.open.c.len() as u32);
            rest = &rest[fit..];
            if rest.is_empty() {
                return;
            }
        }
    }

    /// Convenience for callers that just want every sealed chunk.
    pub fn push_collect(&mut self, probe: u32, candidates: &[u32], out: &mut Vec<CandidateChunk>) {
        self.push(probe, candidates, |sealed| {
            out.push(sealed);
            CandidateChunk::default()
        });
    }

    /// Seals whatever is open. `None` when nothing was pushed since the last
    /// seal.
    pub fn seal(&mut self) -> Option<CandidateChunk> {
        if self.open.is_empty() {
            None
        } else {
            Some(self.take_sealed())
        }
    }

    fn take_sealed(&mut self) -> CandidateChunk {
        let sealed = std::mem::take(&mut self.open);
        debug_assert!(sealed.byte_size() <= self.budget);
        debug_assert_eq!(sealed.c_o.last().map(|&o| o as usize), Some(sealed.c.len()));
        sealed
    }
}
