//! Similarity functions, equivalent overlaps and size bounds.
//!
//! Thresholds are stored as reduced ratios of integers and every ceiling,
//! floor and comparison is done in integer arithmetic, so that
//! `score >= threshold` and `overlap >= equivalent_overlap` agree exactly.
//! Cosine's square root is handled by comparing squared quantities.

use std::fmt;
use std::str::FromStr;

use num_integer::Integer;
use serde::Serialize;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SimilarityFunction {
    Jaccard,
    Cosine,
    Dice,
    Overlap,
}

impl SimilarityFunction {
    pub fn is_normalized(self) -> bool {
        !matches!(self, SimilarityFunction::Overlap)
    }

    pub fn name(self) -> &'static str {
        match self {
            SimilarityFunction::Jaccard => "jaccard",
            SimilarityFunction::Cosine => "cosine",
            SimilarityFunction::Dice => "dice",
            SimilarityFunction::Overlap => "overlap",
        }
    }
}

impl FromStr for SimilarityFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jaccard" => Ok(SimilarityFunction::Jaccard),
            "cosine" => Ok(SimilarityFunction::Cosine),
            "dice" => Ok(SimilarityFunction::Dice),
            "overlap" => Ok(SimilarityFunction::Overlap),
            other => Err(Error::InvalidConfig(format!("unknown similarity function {other:?}"))),
        }
    }
}

/// A non-negative rational `num / den` in lowest terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Threshold {
    num: u64,
    den: u64,
}

impl Threshold {
    pub fn new(num: u64, den: u64) -> Result<Self> {
        if den == 0 {
            return Err(Error::InvalidThreshold(format!("{num}/{den}")));
        }
        let g = num.gcd(&den).max(1);
        Ok(Threshold { num: num / g, den: den / g })
    }

    pub fn integer(value: u64) -> Self {
        Threshold { num: value, den: 1 }
    }

    pub fn numer(&self) -> u64 {
        self.num
    }

    pub fn denom(&self) -> u64 {
        self.den
    }

    pub fn is_integer(&self) -> bool {
        self.den == 1
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Parses `"0.8"`, `"4/5"` or `"3"` without going through floating point.
    pub fn parse(text: &str) -> Result<Self> {
        let bad = || Error::InvalidThreshold(text.to_string());
        let text = text.trim();
        if let Some((n, d)) = text.split_once('/') {
            let n: u64 = n.trim().parse().map_err(|_| bad())?;
            let d: u64 = d.trim().parse().map_err(|_| bad())?;
            return Threshold::new(n, d).map_err(|_| bad());
        }
        let (whole, frac) = text.split_once('.').unwrap_or((text, ""));
        if whole.is_empty() && frac.is_empty() {
            return Err(bad());
        }
        if !whole.chars().all(|c| c.is_ascii_digit()) || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        if whole.len() > 9 || frac.len() > 9 {
            return Err(bad());
        }
        let whole: u64 = if whole.is_empty() { 0 } else { whole.parse().map_err(|_| bad())? };
        let scale = 10u64.pow(frac.len() as u32);
        let frac: u64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
        Threshold::new(whole * scale + frac, scale)
    }

    /// Exact decimal rendering when the denominator divides a power of ten.
    pub fn to_decimal_string(&self) -> String {
        if self.den == 1 {
            return self.num.to_string();
        }
        for digits in 1..=18u32 {
            let scale = 10u64.pow(digits);
            if scale % self.den == 0 {
                let scaled = self.num * (scale / self.den);
                let whole = scaled / scale;
                let frac = format!("{:0width$}", scaled % scale, width = digits as usize);
                return format!("{whole}.{}", frac.trim_end_matches('0'));
            }
        }
        format!("{}/{}", self.num, self.den)
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_decimal_string())
    }
}

/// An exact similarity value. Cosine scores are irrational in general, so
/// they are kept as the square of the score.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Score {
    Ratio { num: u64, den: u64 },
    SqrtRatio { num: u64, den: u64 },
}

impl Score {
    fn ratio(num: u64, den: u64) -> Self {
        let g = num.gcd(&den).max(1);
        Score::Ratio { num: num / g, den: den / g }
    }

    fn sqrt_ratio(num: u64, den: u64) -> Self {
        let g = num.gcd(&den).max(1);
        Score::SqrtRatio { num: num / g, den: den / g }
    }

    pub fn meets(&self, threshold: &Threshold) -> bool {
        let (tn, td) = (threshold.num as u128, threshold.den as u128);
        match *self {
            Score::Ratio { num, den } => num as u128 * td >= tn * den as u128,
            Score::SqrtRatio { num, den } => num as u128 * td * td >= tn * tn * den as u128,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match *self {
            Score::Ratio { num, den } => num as f64 / den as f64,
            Score::SqrtRatio { num, den } => (num as f64 / den as f64).sqrt(),
        }
    }
}

/// Inclusive interval of admissible partner sizes. `max == usize::MAX` means
/// unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SizeBounds {
    pub min: usize,
    pub max: usize,
}

impl SizeBounds {
    pub fn contains(&self, size: usize) -> bool {
        self.min <= size && size <= self.max
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimilarityPredicate {
    function: SimilarityFunction,
    threshold: Threshold,
}

fn ceil_div(num: u128, den: u128) -> u128 {
    num.div_ceil(den)
}

fn clamp_usize(value: u128) -> usize {
    usize::try_from(value).unwrap_or(usize::MAX)
}

impl SimilarityPredicate {
    /// Normalized functions take `threshold` in (0, 1]; `Overlap` takes an
    /// integer `t >= 1`.
    pub fn new(function: SimilarityFunction, threshold: Threshold) -> Result<Self> {
        let valid = if function.is_normalized() {
            threshold.num > 0 && threshold.num <= threshold.den
        } else {
            threshold.num >= 1 && threshold.is_integer()
        };
        if !valid {
            return Err(Error::InvalidThreshold(format!("{threshold} for {}", function.name())));
        }
        Ok(SimilarityPredicate { function, threshold })
    }

    pub fn parse(function: SimilarityFunction, threshold: &str) -> Result<Self> {
        Self::new(function, Threshold::parse(threshold)?)
    }

    pub fn jaccard(threshold: &str) -> Result<Self> {
        Self::parse(SimilarityFunction::Jaccard, threshold)
    }

    pub fn function(&self) -> SimilarityFunction {
        self.function
    }

    pub fn threshold(&self) -> Threshold {
        self.threshold
    }

    /// Minimum number of shared tokens for a pair of the given sizes to
    /// satisfy the predicate.
    pub fn equivalent_overlap(&self, size_r: usize, size_s: usize) -> usize {
        let (p, q) = (self.threshold.num as u128, self.threshold.den as u128);
        let (a, b) = (size_r as u128, size_s as u128);
        let value = match self.function {
            // ceil(t / (1 + t) * (a + b)) with t = p / q
            SimilarityFunction::Jaccard => ceil_div(p * (a + b), p + q),
            // smallest k with k * q >= p * sqrt(a * b)
            SimilarityFunction::Cosine => {
                let target = p * p * a * b;
                let q2 = q * q;
                let mut k = (target / q2).isqrt();
                while k * k * q2 < target {
                    k += 1;
                }
                while k > 0 && (k - 1) * (k - 1) * q2 >= target {
                    k -= 1;
                }
                k
            }
            SimilarityFunction::Dice => ceil_div(p * (a + b), 2 * q),
            SimilarityFunction::Overlap => p,
        };
        clamp_usize(value)
    }

    /// Sizes a partner of a `size_r` set may have and still satisfy the
    /// predicate for some overlap.
    pub fn size_bounds(&self, size_r: usize) -> SizeBounds {
        let (p, q) = (self.threshold.num as u128, self.threshold.den as u128);
        let n = size_r as u128;
        let (min, max) = match self.function {
            // t|r| <= |s| <= |r|/t
            SimilarityFunction::Jaccard => (ceil_div(p * n, q), (q * n) / p),
            // t^2 |r| <= |s| <= |r| / t^2
            SimilarityFunction::Cosine => (ceil_div(p * p * n, q * q), (q * q * n) / (p * p)),
            // t / (2 - t) |r| <= |s| <= (2 - t) / t |r|
            SimilarityFunction::Dice => (ceil_div(p * n, 2 * q - p), ((2 * q - p) * n) / p),
            // no partner at all when |r| < t
            SimilarityFunction::Overlap if n < p => (p, 0),
            SimilarityFunction::Overlap => (p, usize::MAX as u128),
        };
        SizeBounds { min: clamp_usize(min), max: clamp_usize(max) }
    }

    pub fn similarity_score(&self, overlap: usize, size_r: usize, size_s: usize) -> Score {
        let (o, a, b) = (overlap as u64, size_r as u64, size_s as u64);
        match self.function {
            SimilarityFunction::Jaccard => Score::ratio(o, a + b - o),
            SimilarityFunction::Cosine => Score::sqrt_ratio(o * o, a * b),
            SimilarityFunction::Dice => Score::ratio(2 * o, a + b),
            SimilarityFunction::Overlap => Score::ratio(o, 1),
        }
    }

    pub fn is_similar(&self, overlap: usize, size_r: usize, size_s: usize) -> bool {
        self.similarity_score(overlap, size_r, size_s).meets(&self.threshold)
    }
}

impl fmt::Display for SimilarityPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}>={}", self.function.name(), self.threshold)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const NORMALIZED: [SimilarityFunction; 3] =
        [SimilarityFunction::Jaccard, SimilarityFunction::Cosine, SimilarityFunction::Dice];

    fn pred(function: SimilarityFunction, t: &str) -> SimilarityPredicate {
        SimilarityPredicate::parse(function, t).unwrap()
    }

    /// Smallest overlap whose exact score meets the threshold, found by
    /// scanning. Independent of the closed-form ceilings.
    fn scan_min_overlap(p: &SimilarityPredicate, a: usize, b: usize) -> Option<usize> {
        (0..=a.min(b)).find(|&o| p.is_similar(o, a, b))
    }

    fn grid() -> Vec<Threshold> {
        (1..=20).map(|k| Threshold::new(k * 5, 100).unwrap()).collect()
    }

    #[test]
    fn threshold_parsing() {
        assert_eq!(Threshold::parse("0.8").unwrap(), Threshold::new(4, 5).unwrap());
        assert_eq!(Threshold::parse("4/5").unwrap(), Threshold::new(4, 5).unwrap());
        assert_eq!(Threshold::parse("1").unwrap(), Threshold::integer(1));
        assert_eq!(Threshold::parse(".5").unwrap(), Threshold::new(1, 2).unwrap());
        assert!(Threshold::parse("abc").is_err());
        assert!(Threshold::parse("0.8e1").is_err());
        assert!(Threshold::parse("1/0").is_err());
        assert_eq!(Threshold::parse("0.95").unwrap().to_string(), "0.95");
        assert_eq!(Threshold::new(1, 3).unwrap().to_string(), "1/3");
    }

    #[test]
    fn predicate_validation() {
        assert!(SimilarityPredicate::jaccard("0").is_err());
        assert!(SimilarityPredicate::jaccard("1.2").is_err());
        assert!(SimilarityPredicate::jaccard("1").is_ok());
        assert!(SimilarityPredicate::parse(SimilarityFunction::Overlap, "0.5").is_err());
        assert!(SimilarityPredicate::parse(SimilarityFunction::Overlap, "0").is_err());
        assert!(SimilarityPredicate::parse(SimilarityFunction::Overlap, "3").is_ok());
    }

    #[test]
    fn equivalent_overlap_examples() {
        assert_eq!(pred(SimilarityFunction::Jaccard, "0.8").equivalent_overlap(10, 10), 9);
        for n in 1..60 {
            assert_eq!(pred(SimilarityFunction::Jaccard, "1").equivalent_overlap(n, n), n);
        }
        assert_eq!(pred(SimilarityFunction::Cosine, "0.5").equivalent_overlap(4, 9), 3);
        assert_eq!(pred(SimilarityFunction::Overlap, "4").equivalent_overlap(2, 100), 4);
    }

    #[test]
    fn size_bounds_examples() {
        let j = pred(SimilarityFunction::Jaccard, "0.8");
        assert_eq!(j.size_bounds(10), SizeBounds { min: 8, max: 12 });
        assert_eq!(j.size_bounds(6), SizeBounds { min: 5, max: 7 });
        for n in 1..40 {
            assert_eq!(pred(SimilarityFunction::Jaccard, "1").size_bounds(n), SizeBounds { min: n, max: n });
        }
        let o = pred(SimilarityFunction::Overlap, "3");
        assert_eq!(o.size_bounds(10), SizeBounds { min: 3, max: usize::MAX });
    }

    #[test]
    fn score_examples() {
        let j = pred(SimilarityFunction::Jaccard, "0.5");
        assert_eq!(j.similarity_score(3, 3, 3), Score::Ratio { num: 1, den: 1 });
        assert_eq!(j.similarity_score(0, 4, 7), Score::Ratio { num: 0, den: 1 });
        let d = pred(SimilarityFunction::Dice, "0.5");
        assert_eq!(d.similarity_score(2, 4, 4), Score::Ratio { num: 1, den: 2 });
        let c = pred(SimilarityFunction::Cosine, "0.5");
        assert_eq!(c.similarity_score(3, 4, 9).to_f64(), 0.5);
    }

    #[test]
    fn overlap_consistency_exhaustive() {
        for function in NORMALIZED {
            for t in grid() {
                let p = SimilarityPredicate::new(function, t).unwrap();
                for a in 1..=50 {
                    for b in 1..=50 {
                        let required = p.equivalent_overlap(a, b);
                        for o in 0..=a.min(b) {
                            assert_eq!(
                                p.is_similar(o, a, b),
                                o >= required,
                                "{p} sizes ({a},{b}) overlap {o} required {required}"
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn size_bounds_are_exactly_the_feasible_sizes() {
        for function in NORMALIZED {
            for t in grid() {
                let p = SimilarityPredicate::new(function, t).unwrap();
                for a in 1..=50 {
                    let bounds = p.size_bounds(a);
                    for b in 1..=200 {
                        let feasible = scan_min_overlap(&p, a, b).is_some();
                        assert_eq!(bounds.contains(b), feasible, "{p} |r|={a} |s|={b} {bounds:?}");
                    }
                }
            }
        }
        for t in 1..=10u64 {
            let p = SimilarityPredicate::new(SimilarityFunction::Overlap, Threshold::integer(t)).unwrap();
            for a in 1..=30 {
                for b in 1..=30 {
                    let feasible = scan_min_overlap(&p, a, b).is_some();
                    assert_eq!(p.size_bounds(a).contains(b), feasible && a >= t as usize);
                }
            }
        }
    }

    #[test]
    fn bounds_are_symmetric() {
        for function in NORMALIZED {
            for t in grid() {
                let p = SimilarityPredicate::new(function, t).unwrap();
                for a in 1..=60 {
                    for b in 1..=60 {
                        assert_eq!(p.size_bounds(a).contains(b), p.size_bounds(b).contains(a));
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn equivalent_overlap_is_monotone(
            f in 0usize..3,
            k in 1u64..20,
            a in 1usize..500,
            b in 1usize..500,
        ) {
            let function = NORMALIZED[f];
            let lo = SimilarityPredicate::new(function, Threshold::new(k * 5, 100).unwrap()).unwrap();
            let hi = SimilarityPredicate::new(function, Threshold::new(k * 5 + 5, 100).unwrap()).unwrap();
            prop_assert!(lo.equivalent_overlap(a, b) <= hi.equivalent_overlap(a, b));
            prop_assert!(lo.equivalent_overlap(a, b) <= lo.equivalent_overlap(a + 1, b));
            prop_assert!(lo.equivalent_overlap(a, b) <= lo.equivalent_overlap(a, b + 1));
        }

        #[test]
        fn cosine_ceiling_matches_squared_comparison(
            num in 1u64..1000,
            a in 1usize..100_000,
            b in 1usize..100_000,
        ) {
            let t = Threshold::new(num, 1000).unwrap();
            let p = SimilarityPredicate::new(SimilarityFunction::Cosine, t).unwrap();
            let k = p.equivalent_overlap(a, b) as u128;
            let target = (num as u128).pow(2) * a as u128 * b as u128;
            prop_assert!(k * k * 1_000_000 >= target);
            prop_assert!(k == 0 || (k - 1) * (k - 1) * 1_000_000 < target);
        }
    }
}
