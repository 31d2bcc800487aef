//! Spacing statistics of finite point sets on `R/Z`.
//!
//! Points are stored as integers `0 <= x < scale`, standing for `x / scale`,
//! so every threshold comparison below is exact. Residues mod `q` use
//! `scale = q`.
//!
//! Conventions: an `r`-tuple has diameter `< x` when its points fit in an
//! arc shorter than `x` (strict); `N_{i,j}` uses "at most" for both spans.
//! The joint gap count `g(x, y)` uses "at most" as well, which is the
//! convention under which its alternating identity is exact.

use std::collections::BTreeMap;
use std::io::Write;

use num_bigint::{BigInt, BigUint};
use num_rational::Ratio;
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::{is_prime, make_modulus, enumerate_squares, ResidueSet};
use crate::error::{Error, Result};

/// Sample size below which KS statistics are flagged as unreliable.
pub const MIN_KS_POINTS: usize = 100;

/// Grid for CDF tables and the joint KS statistic: `x = 1/4, 2/4, ..., 5`.
pub const GRID_STEPS: u64 = 20;
const GRID_DEN: u64 = 4;

/// Smallest prime accepted by [`davenport_histogram`].
pub const DAVENPORT_MIN_PRIME: u64 = 10_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CirclePointSet {
    scale: u64,
    points: Vec<u64>,
}

impl CirclePointSet {
    /// `points` must be strictly increasing and below `scale`.
    pub fn new(scale: u64, points: Vec<u64>) -> Result<Self> {
        if scale == 0 {
            return Err(Error::Invalid("scale must be positive".into()));
        }
        if points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Invalid("points must be strictly increasing".into()));
        }
        if points.last().is_some_and(|&x| x >= scale) {
            return Err(Error::Invalid("points must lie in [0, scale)".into()));
        }
        Ok(CirclePointSet { scale, points })
    }

    /// Sorts and deduplicates (after reduction mod `scale`).
    pub fn from_unsorted(scale: u64, points: impl IntoIterator<Item = u64>) -> Result<Self> {
        if scale == 0 {
            return Err(Error::Invalid("scale must be positive".into()));
        }
        let mut v: Vec<u64> = points.into_iter().map(|x| x % scale).collect();
        v.sort_unstable();
        v.dedup();
        Self::new(scale, v)
    }

    pub fn from_residues(set: &ResidueSet) -> Self {
        CirclePointSet {
            scale: set.modulus().q(),
            points: set.residues().to_vec(),
        }
    }

    pub fn scale(&self) -> u64 {
        self.scale
    }

    pub fn points(&self) -> &[u64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Counter-clockwise distance from point `i` to point `j`, in units of `1/scale`.
    fn forward(&self, i: usize, j: usize) -> u64 {
        (self.points[j] + self.scale - self.points[i]) % self.scale
    }

    /// `d / scale < x` (strict) or `<= x`.
    fn below(&self, d: u64, x: &Ratio<u64>, strict: bool) -> bool {
        let lhs = d as u128 * *x.denom() as u128;
        let rhs = *x.numer() as u128 * self.scale as u128;
        if strict {
            lhs < rhs
        } else {
            lhs <= rhs
        }
    }

    /// For each point, how many other points lie ahead of it at distance
    /// below `x`. Needs `x < 1/2` so no arc wraps onto itself.
    fn ahead_counts(&self, x: &Ratio<u64>, strict: bool) -> Vec<usize> {
        let n = self.len();
        let mut out = vec![0; n];
        let mut end = 0; // offset of the first point past the window, relative to i
        for (i, slot) in out.iter_mut().enumerate() {
            end = end.max(1);
            while end < n && self.below(self.forward(i, (i + end) % n), x, strict) {
                end += 1;
            }
            *slot = end - 1;
            end = end.saturating_sub(1);
        }
        out
    }

    /// As [`Self::ahead_counts`], looking backwards.
    fn behind_counts(&self, x: &Ratio<u64>, strict: bool) -> Vec<usize> {
        let n = self.len();
        let mut out = vec![0; n];
        let mut end = 0;
        for k in 0..n {
            let i = n - 1 - k;
            end = end.max(1);
            while end < n && self.below(self.forward((i + n - end) % n, i), x, strict) {
                end += 1;
            }
            out[i] = end - 1;
            end = end.saturating_sub(1);
        }
        out
    }
}

fn require_half(x: &Ratio<u64>) -> Result<()> {
    if x.denom().is_zero() || 2 * *x.numer() as u128 >= *x.denom() as u128 {
        Err(Error::Invalid(format!("threshold {x} must be below 1/2")))
    } else {
        Ok(())
    }
}

/// Circular gaps `points[i+1] - points[i]` (with wrap), in units of `1/scale`.
pub fn gaps(s: &CirclePointSet) -> Result<Vec<u64>> {
    let n = s.len();
    if n < 2 {
        return Err(Error::Invalid(format!("need at least two points, got {n}")));
    }
    Ok((0..n).map(|i| s.forward(i, (i + 1) % n)).collect())
}

/// Gaps multiplied by `N`, exactly.
pub fn normalized_gaps(s: &CirclePointSet) -> Result<Vec<Ratio<u64>>> {
    let n = s.len() as u64;
    Ok(gaps(s)?.into_iter().map(|g| Ratio::new(g * n, s.scale)).collect())
}

fn binomial(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    (0..k).fold(BigUint::one(), |acc, i| acc * (n - i) / (i + 1))
}

/// `sum_m count[m] * C(m, k)` over a histogram of window populations.
fn binomial_sum(hist: &BTreeMap<usize, u64>, k: usize) -> BigUint {
    hist.iter()
        .map(|(&m, &c)| binomial(m, k) * c)
        .fold(BigUint::zero(), |a, b| a + b)
}

fn histogram(values: &[usize]) -> BTreeMap<usize, u64> {
    let mut h = BTreeMap::new();
    for &v in values {
        *h.entry(v).or_insert(0) += 1;
    }
    h
}

/// `N_k(x)` for `k = 2..=k_max`: the number of `k`-subsets fitting in an
/// arc shorter than `x`.
pub fn nk_counts(s: &CirclePointSet, x: &Ratio<u64>, k_max: usize) -> Result<Vec<BigUint>> {
    require_half(x)?;
    let hist = histogram(&s.ahead_counts(x, true));
    Ok((2..=k_max).map(|k| binomial_sum(&hist, k - 1)).collect())
}

/// Exact gap count and alternating-sum brackets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sandwich {
    /// Counted directly from the gaps.
    pub direct: u64,
    /// The full alternating sum of tuple counts.
    pub alternating: BigInt,
    /// `(n, lower, upper)` for each requested truncation depth.
    pub brackets: Vec<(usize, BigInt, BigInt)>,
}

impl Sandwich {
    pub fn identity_holds(&self) -> bool {
        self.alternating == BigInt::from(self.direct)
    }

    pub fn brackets_hold(&self) -> bool {
        let g = BigInt::from(self.direct);
        self.brackets.iter().all(|(_, lo, hi)| lo <= &g && &g <= hi)
    }
}

/// Partial sums of `sign * terms[t]`, alternating from `+`.
fn alternating_prefix(terms: &[BigUint]) -> Vec<BigInt> {
    let mut acc = BigInt::zero();
    terms
        .iter()
        .enumerate()
        .map(|(t, v)| {
            if t % 2 == 0 {
                acc += BigInt::from(v.clone());
            } else {
                acc -= BigInt::from(v.clone());
            }
            acc.clone()
        })
        .collect()
}

/// `g(x)`, the number of consecutive pairs with gap `< x`, against
/// `sum_{k>=2} (-1)^k N_k(x)`. Truncating after `k = 2n+1` gives a lower
/// bound and after `k = 2n` an upper bound.
pub fn sandwich_g(s: &CirclePointSet, x: &Ratio<u64>, depths: &[usize]) -> Result<Sandwich> {
    require_half(x)?;
    let direct = gaps(s)?.into_iter().filter(|&g| s.below(g, x, true)).count() as u64;
    let hist = histogram(&s.ahead_counts(x, true));
    let k_top = hist.keys().next_back().map_or(1, |&m| m + 1);
    let need = depths.iter().map(|&n| 2 * n + 1).max().unwrap_or(0).max(k_top);
    // terms[t] = N_{t+2}
    let terms: Vec<BigUint> = (2..=need.max(2)).map(|k| binomial_sum(&hist, k - 1)).collect();
    let prefix = alternating_prefix(&terms);
    let at = |k: usize| prefix[k - 2].clone();
    let alternating = prefix.last().cloned().unwrap_or_default();
    let brackets = depths
        .iter()
        .filter(|&&n| n >= 1)
        .map(|&n| (n, at(2 * n + 1), at(2 * n)))
        .collect();
    Ok(Sandwich {
        direct,
        alternating,
        brackets,
    })
}

fn require_joint(x: &Ratio<u64>, y: &Ratio<u64>) -> Result<()> {
    let sum = x + y;
    require_half(&sum).map_err(|_| Error::Invalid(format!("x + y = {sum} must be below 1/2")))
}

/// `N_{i,j}(x, y)`: tuples `p_1 < ... < p_{i+j}` (counter-clockwise) with
/// `p_1..p_i` spanning at most `x` and `p_i..p_{i+j}` spanning at most `y`.
///
/// With `b = p_i` fixed, the first span picks `i - 1` of the points within
/// `x` behind `b`, and the second picks `j` of those within `y` ahead.
pub fn nij_counts(s: &CirclePointSet, x: &Ratio<u64>, y: &Ratio<u64>, i: usize, j: usize) -> Result<BigUint> {
    if i < 2 || j < 1 {
        return Err(Error::Invalid(format!("need i >= 2 and j >= 1 (i = {i}, j = {j})")));
    }
    require_joint(x, y)?;
    let behind = s.behind_counts(x, false);
    let ahead = s.ahead_counts(y, false);
    Ok(joint_hist(&behind, &ahead)
        .iter()
        .map(|(&(m1, m2), &c)| binomial(m1, i - 1) * binomial(m2, j) * c)
        .fold(BigUint::zero(), |a, b| a + b))
}

fn joint_hist(behind: &[usize], ahead: &[usize]) -> BTreeMap<(usize, usize), u64> {
    let mut h = BTreeMap::new();
    for pair in behind.iter().copied().zip(ahead.iter().copied()) {
        *h.entry(pair).or_insert(0) += 1;
    }
    h
}

/// `g(x, y)`, consecutive triples with first gap at most `x` and second at
/// most `y`, against `sum_{k>=3} (-1)^(k+1) A_k` with
/// `A_k = sum_{i+j=k} N_{i,j}`. Truncating after `k = 2n+1` gives an upper
/// bound and after `k = 2n+2` a lower bound.
pub fn joint_sandwich_g(s: &CirclePointSet, x: &Ratio<u64>, y: &Ratio<u64>, depths: &[usize]) -> Result<Sandwich> {
    require_joint(x, y)?;
    let g = gaps(s)?;
    let n = g.len();
    let direct = (0..n)
        .filter(|&t| s.below(g[t], x, false) && s.below(g[(t + 1) % n], y, false))
        .count() as u64;
    let hist = joint_hist(&s.behind_counts(x, false), &s.ahead_counts(y, false));
    let k_top = hist.keys().map(|&(a, b)| a + b + 1).max().unwrap_or(3);
    let need = depths.iter().map(|&d| 2 * d + 2).max().unwrap_or(0).max(k_top).max(3);
    // terms[t] = A_{t+3}
    let terms: Vec<BigUint> = (3..=need)
        .map(|k| {
            hist.iter()
                .map(|(&(m1, m2), &c)| {
                    (2..k)
                        .map(|i| binomial(m1, i - 1) * binomial(m2, k - i))
                        .fold(BigUint::zero(), |a, b| a + b)
                        * c
                })
                .fold(BigUint::zero(), |a, b| a + b)
        })
        .collect();
    let prefix = alternating_prefix(&terms);
    let at = |k: usize| prefix[k - 3].clone();
    let alternating = prefix.last().cloned().unwrap_or_default();
    let brackets = depths
        .iter()
        .filter(|&&d| d >= 1)
        .map(|&d| (d, at(2 * d + 2), at(2 * d + 1)))
        .collect();
    Ok(Sandwich {
        direct,
        alternating,
        brackets,
    })
}

/// One row of an empirical-vs-limit CDF table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CdfRow {
    pub x: f64,
    pub empirical: f64,
    pub theoretical: f64,
    pub diff: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpacingReport {
    pub n: usize,
    pub scale: u64,
    /// Gap lengths in units of `1/scale`, with multiplicities.
    pub gap_histogram: BTreeMap<u64, u64>,
    pub cdf: Vec<CdfRow>,
    /// `sup_x |F_N(x) - (1 - e^-x)|`, evaluated at the jumps of `F_N`.
    pub ks_exponential: f64,
    /// Where the supremum is attained.
    pub ks_argmax: f64,
    /// `max |F_N(x, y) - (1 - e^-x)(1 - e^-y)|` over the 20 x 20 grid.
    pub joint_ks: f64,
    pub warning: Option<String>,
}

impl SpacingReport {
    /// Sum of normalized gaps divided by `N`; 1 for every point set.
    pub fn mean_normalized_gap(&self) -> Ratio<u128> {
        let total: u128 = self.gap_histogram.iter().map(|(&g, &c)| g as u128 * c as u128).sum();
        Ratio::new(total * self.n as u128, self.scale as u128 * self.n as u128)
    }
}

fn exp_cdf(x: f64) -> f64 {
    -(-x).exp_m1()
}

/// Grid cell of a normalized gap `g * n / scale`: the smallest `t` with
/// value `<= (t + 1) / 4`, capped at `GRID_STEPS` (beyond the grid).
fn grid_cell(g: u64, n: u64, scale: u64) -> usize {
    let v = GRID_DEN as u128 * g as u128 * n as u128;
    let t = v.div_ceil(scale as u128).saturating_sub(1);
    t.min(GRID_STEPS as u128) as usize
}

/// KS distances of the normalized gaps against `1 - e^-x`, and of
/// consecutive gap pairs `(s_n, s_{n+1})` (cyclically) against the product law.
pub fn exponential_fit(s: &CirclePointSet) -> Result<SpacingReport> {
    let g = gaps(s)?;
    let n = g.len();
    let (nn, scale) = (n as u64, s.scale);
    let mut gap_histogram = BTreeMap::new();
    for &v in &g {
        *gap_histogram.entry(v).or_insert(0u64) += 1;
    }

    // jumps of the ECDF: distinct gap values in increasing order
    let mut below = 0u64;
    let (mut ks, mut arg) = (0.0f64, 0.0f64);
    for (&v, &c) in &gap_histogram {
        let x = v as f64 * nn as f64 / scale as f64;
        let target = exp_cdf(x);
        let before = below as f64 / nn as f64;
        below += c;
        let after = below as f64 / nn as f64;
        let d = (target - before).abs().max((after - target).abs());
        if d > ks {
            ks = d;
            arg = x;
        }
    }

    let cells: Vec<usize> = g.par_iter().map(|&v| grid_cell(v, nn, scale)).collect();
    let side = GRID_STEPS as usize + 1;
    let mut marginal = vec![0u64; side];
    let mut joint = vec![0u64; side * side];
    for t in 0..n {
        let (a, b) = (cells[t], cells[(t + 1) % n]);
        marginal[a] += 1;
        joint[a * side + b] += 1;
    }
    // cumulative in both directions
    for a in 0..side {
        for b in 0..side {
            let mut v = joint[a * side + b];
            if a > 0 {
                v += joint[(a - 1) * side + b];
            }
            if b > 0 {
                v += joint[a * side + b - 1];
            }
            if a > 0 && b > 0 {
                v -= joint[(a - 1) * side + b - 1];
            }
            joint[a * side + b] = v;
        }
    }
    let grid = |t: usize| (t + 1) as f64 / GRID_DEN as f64;
    let mut joint_ks = 0.0f64;
    for a in 0..GRID_STEPS as usize {
        for b in 0..GRID_STEPS as usize {
            let emp = joint[a * side + b] as f64 / nn as f64;
            joint_ks = joint_ks.max((emp - exp_cdf(grid(a)) * exp_cdf(grid(b))).abs());
        }
    }
    let mut cdf = vec![CdfRow {
        x: 0.0,
        empirical: 0.0,
        theoretical: 0.0,
        diff: 0.0,
    }];
    let mut acc = 0;
    for (t, &c) in marginal.iter().take(GRID_STEPS as usize).enumerate() {
        acc += c;
        let (x, emp) = (grid(t), acc as f64 / nn as f64);
        cdf.push(CdfRow {
            x,
            empirical: emp,
            theoretical: exp_cdf(x),
            diff: emp - exp_cdf(x),
        });
    }
    let warning = (n < MIN_KS_POINTS)
        .then(|| format!("only {n} points; KS distances are not meaningful below {MIN_KS_POINTS}"));
    Ok(SpacingReport {
        n,
        scale,
        gap_histogram,
        cdf,
        ks_exponential: ks,
        ks_argmax: arg,
        joint_ks,
        warning,
    })
}

/// Spacing report for the squares mod `q`.
pub fn residue_spacings(q: u64) -> Result<SpacingReport> {
    let set = enumerate_squares(&make_modulus(q)?)?;
    exponential_fit(&CirclePointSet::from_residues(&set))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DavenportRow {
    pub h: u64,
    pub count: u64,
    pub observed: f64,
    pub expected: f64,
    pub deviation: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DavenportHistogram {
    pub p: u64,
    /// Number of gaps, i.e. of squares mod `p` (including 0).
    pub n: u64,
    pub rows: Vec<DavenportRow>,
}

impl DavenportHistogram {
    pub fn row(&self, h: u64) -> Option<&DavenportRow> {
        self.rows.iter().find(|r| r.h == h)
    }
}

/// Distribution of the integer gaps between consecutive squares mod a
/// prime `p`, against `2^-h`.
pub fn davenport_histogram(p: u64) -> Result<DavenportHistogram> {
    if p < DAVENPORT_MIN_PRIME || !is_prime(p) {
        return Err(Error::Invalid(format!("need a prime p >= {DAVENPORT_MIN_PRIME}, got {p}")));
    }
    let set = enumerate_squares(&make_modulus(p)?)?;
    let report_gaps = gaps(&CirclePointSet::from_residues(&set))?;
    let mut counts = BTreeMap::new();
    for g in report_gaps {
        *counts.entry(g).or_insert(0u64) += 1;
    }
    let n = set.len() as u64;
    let rows = counts
        .into_iter()
        .map(|(h, count)| {
            let observed = count as f64 / n as f64;
            let expected = 0.5f64.powi(h.min(1074) as i32);
            DavenportRow {
                h,
                count,
                observed,
                expected,
                deviation: (observed - expected).abs(),
            }
        })
        .collect();
    Ok(DavenportHistogram { p, n, rows })
}

pub fn write_cdf_csv<W: Write>(report: &SpacingReport, mut w: W) -> std::io::Result<()> {
    writeln!(w, "x,empirical,theoretical,diff")?;
    for r in &report.cdf {
        writeln!(w, "{},{:.6},{:.6},{:.6}", r.x, r.empirical, r.theoretical, r.diff)?;
    }
    Ok(())
}

/// Gap lengths normalized by `N`, with counts.
pub fn write_gap_histogram_csv<W: Write>(report: &SpacingReport, mut w: W) -> std::io::Result<()> {
    writeln!(w, "gap,normalized,count")?;
    for (&g, &c) in &report.gap_histogram {
        let norm = g as f64 * report.n as f64 / report.scale as f64;
        writeln!(w, "{g},{norm:.6},{c}")?;
    }
    Ok(())
}

pub fn write_davenport_csv<W: Write>(hist: &DavenportHistogram, mut w: W) -> std::io::Result<()> {
    writeln!(w, "h,count,observed,expected,abs_deviation")?;
    for r in &hist.rows {
        writeln!(w, "{},{},{:.6},{:.6},{:.6}", r.h, r.count, r.observed, r.expected, r.deviation)?;
    }
    Ok(())
}

/// A gnuplot script plotting columns `x:y` of a CSV file against `f(x)`.
pub fn gnuplot_script(data_file: &str, title: &str, columns: (usize, usize), limit: &str) -> String {
    format!(
        "set datafile separator ','\n\
         set key autotitle columnhead\n\
         set title \"{title}\"\n\
         plot '{data_file}' using {}:{} with linespoints, {limit} title 'limit'\n",
        columns.0, columns.1
    )
}
