//! Intersect Path: cooperative intersection counting over the merge matrix.
//!
//! The merge path runs from `(0, 0)` to `(|r|, |s|)`; each hop consumes one
//! element of `r` or `s`. On ties the `s` element is consumed first, so an
//! equal pair is the two-hop diagonal move `s[j]` then `r[i]`, counted once
//! when `r[i]` is consumed. Cross diagonals `i + j = k * spacing` with
//! `spacing = ceil((|r| + |s|) / lanes)` cut the path into at most `lanes`
//! partitions whose start points are found by binary search.

/// A segment of the merge path: start point and number of hops to walk.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Partition {
    pub start_r: usize,
    pub start_s: usize,
    pub hops: usize,
}

/// Number of `r` elements consumed when the path crosses diagonal `diag`.
pub fn path_split(r: &[u32], s: &[u32], diag: usize) -> usize {
    let mut lo = diag.saturating_sub(s.len());
    let mut hi = diag.min(r.len());
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        // r[mid] precedes s[diag - mid - 1] in merge order only if strictly
        // smaller.
        if r[mid] < s[diag - mid - 1] {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    lo
}

pub fn diagonal_spacing(total: usize, lanes: usize) -> usize {
    total.div_ceil(lanes.max(1))
}

pub fn intersect_path_partitions(r: &[u32], s: &[u32], lanes: usize) -> Vec<Partition> {
    let mut out = Vec::with_capacity(lanes);
    intersect_path_partitions_into(r, s, lanes, &mut out);
    out
}

/// Like [`intersect_path_partitions`] but reuses `out`.
pub fn intersect_path_partitions_into(r: &[u32], s: &[u32], lanes: usize, out: &mut Vec<Partition>) {
    let lanes = lanes.max(1);
    let total = r.len() + s.len();
    let spacing = diagonal_spacing(total, lanes);
    out.clear();
    let mut diag = 0;
    let mut i = 0;
    for _ in 0..lanes {
        let next = (diag + spacing).min(total);
        out.push(Partition { start_r: i, start_s: diag - i, hops: next - diag });
        i = if next == total { r.len() } else { path_split(r, s, next) };
        diag = next;
    }
}

/// Equal-element moves inside one partition.
pub fn partition_count(r: &[u32], s: &[u32], part: &Partition) -> usize {
    let (mut i, mut j) = (part.start_r, part.start_s);
    let mut count = 0;
    for _ in 0..part.hops {
        if j < s.len() && (i == r.len() || s[j] <= r[i]) {
            j += 1;
        } else {
            count += usize::from(j > 0 && s[j - 1] == r[i]);
            i += 1;
        }
    }
    count
}
