//! Record ingestion, frequency coding and the linearized token/offset layout.

use std::collections::HashMap;
use std::io::BufRead;
use std::ops::Range;

use crate::{Error, Result};

/// One input set before preprocessing. Tokens may repeat.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RawRecord {
    pub tokens: Vec<String>,
}

impl RawRecord {
    pub fn new<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        RawRecord { tokens: tokens.into_iter().map(Into::into).collect() }
    }

    pub fn from_line(line: &str) -> Self {
        RawRecord::new(line.split_ascii_whitespace())
    }
}

/// Reads one record per line. Blank lines become empty records so that line
/// numbers stay aligned with record ids.
pub fn read_records<R: BufRead>(reader: R) -> Result<Vec<RawRecord>> {
    reader
        .lines()
        .map(|line| Ok(RawRecord::from_line(&line?)))
        .collect()
}

/// Reads records whose tokens are already frequency-coded integers.
pub fn read_coded_records<R: BufRead>(reader: R) -> Result<Vec<Vec<u32>>> {
    let mut out = Vec::new();
    for (number, line) in reader.lines().enumerate() {
        let line = line?;
        let set = line
            .split_ascii_whitespace()
            .map(|tok| {
                tok.parse::<u32>().map_err(|_| Error::Parse {
                    line: number + 1,
                    reason: format!("token {tok:?} is not a 32-bit unsigned integer"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(set);
    }
    Ok(out)
}

/// Token to code mapping. Less frequent tokens get smaller codes.
#[derive(Debug, Clone)]
pub struct Dictionary {
    codes: HashMap<String, u32>,
    tokens: Vec<String>,
    frequencies: Vec<u64>,
}

impl Dictionary {
    pub fn code(&self, token: &str) -> Option<u32> {
        self.codes.get(token).copied()
    }

    pub fn token(&self, code: u32) -> Option<&str> {
        self.tokens.get(code as usize).map(String::as_str)
    }

    pub fn frequency(&self, token: &str) -> Option<u64> {
        self.code(token).map(|c| self.frequencies[c as usize])
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Assigns codes `0..k` by ascending raw occurrence count, ties broken by
/// lexicographic token order.
pub fn build_dictionary<'a, I>(records: I) -> Result<Dictionary>
where
    I: IntoIterator<Item = &'a RawRecord>,
{
    let mut counts: HashMap<&str, u64> = HashMap::new();
    let mut seen_any = false;
    for record in records {
        seen_any = true;
        for token in &record.tokens {
            *counts.entry(token.as_str()).or_default() += 1;
        }
    }
    if !seen_any {
        return Err(Error::EmptyCollection);
    }
    let mut ordered: Vec<(&str, u64)> = counts.into_iter().collect();
    ordered.sort_unstable_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.cmp(b.0)));

    let mut codes = HashMap::with_capacity(ordered.len());
    let mut tokens = Vec::with_capacity(ordered.len());
    let mut frequencies = Vec::with_capacity(ordered.len());
    for (code, (token, freq)) in ordered.into_iter().enumerate() {
        codes.insert(token.to_string(), code as u32);
        tokens.push(token.to_string());
        frequencies.push(freq);
    }
    Ok(Dictionary { codes, tokens, frequencies })
}

/// Which input a set came from in a two-collection join.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    R,
    S,
}

/// Preprocessed sets in linearized form: set `i` occupies
/// `tokens[offsets[i]..offsets[i + 1]]`.
///
/// Sets are sorted by size, then lexicographically on their coded tokens.
/// Tokens within a set are strictly increasing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Collection {
    tokens: Vec<u32>,
    offsets: Vec<usize>,
    original_ids: Vec<u32>,
    sides: Option<Vec<Side>>,
}

struct PendingSet {
    tokens: Vec<u32>,
    original_id: u32,
    side: Side,
}

impl Collection {
    /// Builds a self-join collection from sets that are already coded.
    pub fn from_coded(sets: Vec<Vec<u32>>) -> Self {
        let pending = sets
            .into_iter()
            .enumerate()
            .map(|(id, tokens)| PendingSet { tokens, original_id: id as u32, side: Side::R })
            .collect();
        Collection::assemble(pending, false)
    }

    /// Builds a two-collection (R-S) layout from already coded sets.
    pub fn from_coded_pair(r: Vec<Vec<u32>>, s: Vec<Vec<u32>>) -> Self {
        let tag = |sets: Vec<Vec<u32>>, side: Side| {
            sets.into_iter()
                .enumerate()
                .map(move |(id, tokens)| PendingSet { tokens, original_id: id as u32, side })
        };
        let pending = tag(r, Side::R).chain(tag(s, Side::S)).collect();
        Collection::assemble(pending, true)
    }

    fn assemble(mut pending: Vec<PendingSet>, two_sided: bool) -> Self {
        for set in &mut pending {
            set.tokens.sort_unstable();
            set.tokens.dedup();
        }
        let before = pending.len();
        pending.retain(|set| !set.tokens.is_empty());
        let dropped = before - pending.len();
        if dropped > 0 {
            log::info!("dropped {dropped} empty sets during preprocessing");
        }
        pending.sort_by(|a, b| {
            a.tokens
                .len()
                .cmp(&b.tokens.len())
                .then_with(|| a.tokens.cmp(&b.tokens))
                .then_with(|| (a.side as u8).cmp(&(b.side as u8)))
                .then_with(|| a.original_id.cmp(&b.original_id))
        });

        let total: usize = pending.iter().map(|s| s.tokens.len()).sum();
        let mut tokens = Vec::with_capacity(total);
        let mut offsets = Vec::with_capacity(pending.len() + 1);
        let mut original_ids = Vec::with_capacity(pending.len());
        let mut sides = Vec::with_capacity(if two_sided { pending.len() } else { 0 });
        offsets.push(0);
        for set in pending {
            tokens.extend_from_slice(&set.tokens);
            offsets.push(tokens.len());
            original_ids.push(set.original_id);
            if two_sided {
                sides.push(set.side);
            }
        }
        Collection { tokens, offsets, original_ids, sides: two_sided.then_some(sides) }
    }

    pub fn len(&self) -> usize {
        self.original_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.original_ids.is_empty()
    }

    /// The flat token array `R_T`.
    pub fn token_array(&self) -> &[u32] {
        &self.tokens
    }

    /// The offset array `R_O`.
    pub fn offset_array(&self) -> &[usize] {
        &self.offsets
    }

    /// `(start, length)` of set `index` inside the token array.
    pub fn set_view(&self, index: usize) -> Result<(usize, usize)> {
        if index >= self.len() {
            return Err(Error::SetIndexOutOfRange { index, len: self.len() });
        }
        let range = self.range(index);
        Ok((range.start, range.len()))
    }

    #[inline]
    fn range(&self, index: usize) -> Range<usize> {
        self.offsets[index]..self.offsets[index + 1]
    }

    /// Panics when `index` is out of range.
    #[inline]
    pub fn set(&self, index: usize) -> &[u32] {
        &self.tokens[self.range(index)]
    }

    #[inline]
    pub fn set_len(&self, index: usize) -> usize {
        self.offsets[index + 1] - self.offsets[index]
    }

    pub fn original_id(&self, index: usize) -> u32 {
        self.original_ids[index]
    }

    pub fn is_two_sided(&self) -> bool {
        self.sides.is_some()
    }

    pub fn side(&self, index: usize) -> Side {
        self.sides.as_ref().map_or(Side::R, |s| s[index])
    }

    /// Whether a pair of sets belongs in the join output at all. In a
    /// self-join every pair does; in an R-S join only cross pairs do.
    #[inline]
    pub fn joinable(&self, a: usize, b: usize) -> bool {
        match &self.sides {
            None => true,
            Some(sides) => sides[a] != sides[b],
        }
    }

    /// Output form of a pair of set indices: original line numbers, larger
    /// id first for self-joins, `(R id, S id)` for R-S joins.
    pub fn output_pair(&self, a: usize, b: usize) -> (u32, u32) {
        let (ia, ib) = (self.original_ids[a], self.original_ids[b]);
        match &self.sides {
            None => (ia.max(ib), ia.min(ib)),
            Some(sides) if sides[a] == Side::R => (ia, ib),
            Some(_) => (ib, ia),
        }
    }

    pub fn average_set_size(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.tokens.len() as f64 / self.len() as f64
        }
    }

    pub fn max_token(&self) -> Option<u32> {
        self.tokens.iter().copied().max()
    }

    /// Decodes set `index` back to its tokens.
    pub fn decode(&self, index: usize, dictionary: &Dictionary) -> Vec<String> {
        self.set(index)
            .iter()
            .map(|&c| dictionary.token(c).unwrap_or("?").to_string())
            .collect()
    }
}

fn encode(records: &[RawRecord], dictionary: &Dictionary) -> Result<Vec<Vec<u32>>> {
    records
        .iter()
        .map(|record| {
            record
                .tokens
                .iter()
                .map(|t| dictionary.code(t).ok_or_else(|| Error::UnknownToken(t.clone())))
                .collect()
        })
        .collect()
}

/// Deduplicates, codes and orders `records`. Empty sets are dropped.
pub fn preprocess(records: &[RawRecord], dictionary: &Dictionary) -> Result<Collection> {
    Ok(Collection::from_coded(encode(records, dictionary)?))
}

/// Preprocesses two inputs for an R-S join against a shared dictionary.
pub fn preprocess_pair(r: &[RawRecord], s: &[RawRecord], dictionary: &Dictionary) -> Result<Collection> {
    Ok(Collection::from_coded_pair(encode(r, dictionary)?, encode(s, dictionary)?))
}
