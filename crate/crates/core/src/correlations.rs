//! `r`-level correlations of the squares mod `q`, computed three ways.
//!
//! * `definition`: `R_r(C, q) = (1/N_q) sum_{h in sC} N(h, q)`, with the
//!   chain counts multiplied across primes.
//! * `formula`: the exact expansion over divisors `c | q` and partition
//!   tuples `G` supported on `q/c`,
//!   `s / 2^(r omega) sum_c (1/c) sum_G lambda(G) sum_{h in sC cap L(G)} a(h,c) Delta(h,c)`.
//! * `circle`: counting `r`-tuples of residues on `R/Z` whose signed
//!   consecutive distances, scaled by `N_q`, land in `C`.
//!
//! All three are exact rationals and agree identically on wall-free regions.

use std::time::Instant;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::{enumerate_squares, make_modulus, reduce_even, ResidueSet, SquareFreeModulus};
use crate::counting::{sum_a_delta, sum_lemma_closed_form, ModulusCounter};
use crate::error::{Error, Result};
use crate::lattices::{
    avoid_walls_prune, format_rational, ConvexRegion, PartitionTuple, ScaledDomain, DEFAULT_BUDGET,
};
use crate::partitions::{check_r, PartitionPoset, SetPartition};

/// Largest `omega(q)` accepted by the divisor/partition expansions.
pub const MAX_FORMULA_OMEGA: usize = 12;

/// `S(p) = sum_h a(h,p) Delta(h,p)` is summed directly while `p^(r-1)` stays
/// below this; beyond it the closed form is used.
const DIRECT_SUM_LIMIT: u64 = 5_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    DefinitionHSum,
    LatticeFormula,
    CircleTuples,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::DefinitionHSum => "definition_h_sum",
            Method::LatticeFormula => "lattice_formula",
            Method::CircleTuples => "circle_tuples",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorrelationResult {
    pub q: u64,
    pub r: usize,
    pub region: String,
    pub method: Method,
    pub value: BigRational,
    pub volume: BigRational,
}

impl CorrelationResult {
    pub fn deviation(&self) -> BigRational {
        &self.value - &self.volume
    }

    pub fn deviation_f64(&self) -> f64 {
        self.deviation().to_f64().unwrap_or(f64::NAN)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CorrelationOptions {
    /// Cap on lattice candidates visited per enumeration.
    pub budget: u64,
    /// Skip partition tuples whose lattice provably misses `sC` off the walls.
    pub prune: bool,
}

impl Default for CorrelationOptions {
    fn default() -> Self {
        CorrelationOptions {
            budget: DEFAULT_BUDGET,
            prune: true,
        }
    }
}

fn check_inputs(r: usize, region: &ConvexRegion) -> Result<()> {
    check_r(r)?;
    if region.dim() != r - 1 {
        return Err(Error::Dimension {
            expected: r - 1,
            got: region.dim(),
        });
    }
    region.require_wall_free()
}

fn check_odd(m: &SquareFreeModulus) -> Result<()> {
    if m.is_even() {
        Err(Error::EvenModulus(m.q()))
    } else {
        Ok(())
    }
}

fn result(m: &SquareFreeModulus, r: usize, region: &ConvexRegion, method: Method, value: BigRational) -> CorrelationResult {
    CorrelationResult {
        q: m.q(),
        r,
        region: region.to_string(),
        method,
        value,
        volume: region.volume(),
    }
}

fn integer_points(region: &ConvexRegion, s: &BigRational, r: usize, budget: u64) -> Result<Vec<Vec<i64>>> {
    let trivial = PartitionTuple::trivial(r)?.lattice();
    crate::lattices::lattice_points(region, s, &trivial, budget)
}

/// `(1/N_q) sum_{h in sC cap Z^(r-1)} N(h, q)` for odd square-free `q`.
pub fn correlation_definition(
    m: &SquareFreeModulus,
    r: usize,
    region: &ConvexRegion,
    opts: &CorrelationOptions,
) -> Result<CorrelationResult> {
    check_inputs(r, region)?;
    check_odd(m)?;
    let points = integer_points(region, m.mean_spacing(), r, opts.budget)?;
    let counter = ModulusCounter::new(m, r)?;
    let total = points
        .par_iter()
        .map(|h| counter.n_solutions(h))
        .reduce(BigUint::zero, |a, b| a + b);
    let value = BigRational::new(BigInt::from(total), BigInt::from(m.n_residues()));
    Ok(result(m, r, region, Method::DefinitionHSum, value))
}

/// Calls `f(mask, tuple)` for each divisor mask and each assignment of a
/// partition from `choices` to every prime outside the mask. The finest
/// partition stands for "no constraint at this prime".
fn for_each_divisor_and_tuple(
    m: &SquareFreeModulus,
    r: usize,
    choices: &[SetPartition],
    mut f: impl FnMut(u64, PartitionTuple),
) -> Result<()> {
    let primes = m.primes();
    let omega = primes.len();
    for mask in 0..1u64 << omega {
        let free: Vec<u64> = (0..omega).filter(|i| mask >> i & 1 == 0).map(|i| primes[i]).collect();
        let mut digits = vec![0usize; free.len()];
        loop {
            let tuple = PartitionTuple::new(
                r,
                free.iter().zip(&digits).map(|(&p, &d)| (p, choices[d].clone())),
            )?;
            f(mask, tuple);
            // odometer over choices^free
            let mut i = 0;
            while i < digits.len() {
                digits[i] += 1;
                if digits[i] < choices.len() {
                    break;
                }
                digits[i] = 0;
                i += 1;
            }
            if i == digits.len() {
                break;
            }
        }
    }
    Ok(())
}

fn check_formula_omega(m: &SquareFreeModulus) -> Result<()> {
    if m.omega() > MAX_FORMULA_OMEGA {
        Err(Error::TooManyPrimes {
            omega: m.omega(),
            limit: MAX_FORMULA_OMEGA,
        })
    } else {
        Ok(())
    }
}

fn divisor_of_mask(m: &SquareFreeModulus, mask: u64) -> u64 {
    m.primes()
        .iter()
        .enumerate()
        .filter(|(i, _)| mask >> i & 1 == 1)
        .map(|(_, p)| p)
        .product()
}

/// The divisor/lattice expansion of `R_r(C, q)`, evaluated exactly.
pub fn correlation_formula(
    m: &SquareFreeModulus,
    r: usize,
    region: &ConvexRegion,
    opts: &CorrelationOptions,
) -> Result<CorrelationResult> {
    check_inputs(r, region)?;
    check_odd(m)?;
    check_formula_omega(m)?;
    let poset = PartitionPoset::new(r)?;
    let s = m.mean_spacing();
    // lambda(G) = 0 terms vanish identically
    let choices: Vec<SetPartition> = poset
        .partitions()
        .iter()
        .enumerate()
        .filter(|&(g, _)| poset.lambda_idx(g) != 0)
        .map(|(_, p)| p.clone())
        .collect();
    let mut jobs = Vec::new();
    for_each_divisor_and_tuple(m, r, &choices, |mask, tuple| {
        if !(opts.prune && avoid_walls_prune(&tuple, region, s)) {
            jobs.push((mask, tuple));
        }
    })?;
    let counter = ModulusCounter::new(m, r)?;
    let domain = region.scaled_domain(s)?;
    let terms: Vec<BigRational> = jobs
        .par_iter()
        .map(|(mask, tuple)| -> Result<BigRational> {
            let lattice = tuple.lattice();
            let mut inner = BigInt::zero();
            lattice.for_each_point(
                &domain,
                opts.budget,
                || "unknown".into(),
                |h| inner += counter.a_delta(h, *mask),
            )?;
            let c = divisor_of_mask(m, *mask);
            Ok(BigRational::new(inner * tuple.lambda(&poset), BigInt::from(c)))
        })
        .collect::<Result<_>>()?;
    let total = terms.into_iter().fold(BigRational::zero(), |a, b| a + b);
    let scale = s / BigRational::from_integer(BigInt::one() << (r * m.omega()));
    Ok(result(m, r, region, Method::LatticeFormula, total * scale))
}

/// Signed residue in `[-q/2, q/2)`.
fn signed_distance(d: u64, q: u64) -> i64 {
    if 2 * d < q {
        d as i64
    } else {
        d as i64 - q as i64
    }
}

struct TupleScan<'a> {
    residues: &'a [u64],
    q: u64,
    domain: &'a ScaledDomain,
    cap_of: Vec<Option<usize>>,
}

impl TupleScan<'_> {
    /// Number of continuations of a chain ending at `x` with `k` differences
    /// already fixed.
    fn count(&self, x: u64, k: usize, block_sums: &mut [i64]) -> u64 {
        if k == self.domain.dim() {
            return 1;
        }
        let lo = self.domain.lo[k];
        let mut hi = self.domain.hi[k];
        if let Some(b) = self.cap_of[k] {
            let (_, end, cap) = self.domain.caps[b];
            let reserved: i64 = self.domain.lo[k + 1..end].iter().sum();
            hi = hi.min(cap - block_sums[b] - reserved);
        }
        if lo > hi {
            return 0;
        }
        // next point y has x - y in [lo, hi], so y runs over the arc
        // [x - hi, x - lo] mod q
        let q = self.q as i64;
        let start = (x as i64 - hi).rem_euclid(q) as u64;
        let width = (hi - lo + 1) as u64;
        let n = self.residues.len();
        let mut idx = self.residues.partition_point(|&v| v < start) % n;
        let mut total = 0;
        for _ in 0..n {
            let y = self.residues[idx];
            if (y + self.q - start) % self.q >= width {
                break;
            }
            let h = signed_distance((x + self.q - y) % self.q, self.q);
            if let Some(b) = self.cap_of[k] {
                block_sums[b] += h;
            }
            total += self.count(y, k + 1, block_sums);
            if let Some(b) = self.cap_of[k] {
                block_sums[b] -= h;
            }
            idx = (idx + 1) % n;
        }
        total
    }
}

/// `(1/N) #{x in S^r : D(x) in C/N}` over the residues placed on `R/Z`,
/// with `D` the vector of signed consecutive distances.
pub fn correlation_circle(residues: &ResidueSet, r: usize, region: &ConvexRegion) -> Result<CorrelationResult> {
    check_inputs(r, region)?;
    let m = residues.modulus();
    let s = m.mean_spacing();
    if !region.fits_half_circle(s, m.q())? {
        return Err(Error::RegionTooLarge);
    }
    let domain = region.scaled_domain(s)?;
    let mut cap_of = vec![None; domain.dim()];
    for (b, &(start, end, _)) in domain.caps.iter().enumerate() {
        for slot in &mut cap_of[start..end] {
            *slot = Some(b);
        }
    }
    let scan = TupleScan {
        residues: residues.residues(),
        q: m.q(),
        domain: &domain,
        cap_of,
    };
    let count: u64 = if domain.is_empty() {
        0
    } else {
        residues
            .residues()
            .par_iter()
            .map(|&x| scan.count(x, 0, &mut vec![0; domain.caps.len()]))
            .sum()
    };
    let value = BigRational::new(BigInt::from(count), BigInt::from(residues.len()));
    Ok(result(m, r, region, Method::CircleTuples, value))
}

/// `S(p) = sum_{h mod p} a(h,p) Delta(h,p)`.
fn prime_error_sum(p: u64, r: usize, poset: &PartitionPoset) -> Result<BigRational> {
    if (p as u128).pow(r as u32 - 1) <= DIRECT_SUM_LIMIT as u128 {
        Ok(BigRational::from_integer(sum_a_delta(p, r)?))
    } else {
        Ok(sum_lemma_closed_form(poset, p))
    }
}

/// `A(p) = sum_G lambda(G) / disc(G)`.
fn lambda_over_disc(p: u64, poset: &PartitionPoset) -> BigRational {
    let pr = BigRational::from_integer(p.into());
    poset
        .partitions()
        .iter()
        .enumerate()
        .fold(BigRational::zero(), |acc, (g, part)| {
            acc + BigRational::from_integer(poset.lambda_idx(g).into()) / pr.pow(part.codim() as i32)
        })
}

/// Main term of the expansion: every lattice sum replaced by
/// `vol(sC) / (c^(r-1) disc(G))` times the complete sum of `a Delta` mod `c`.
///
/// Evaluated through the factorisation over primes: the divisor sum of
/// `c^(-r) A(q/c) prod_{p|c} S(p)` is the product of `A(p) + S(p)/p^r`.
pub fn main_term(m: &SquareFreeModulus, r: usize, region: &ConvexRegion) -> Result<BigRational> {
    check_r(r)?;
    check_odd(m)?;
    check_formula_omega(m)?;
    let poset = PartitionPoset::new(r)?;
    let mut product = BigRational::one();
    for &p in m.primes() {
        let pr = BigRational::from_integer(p.into());
        product *= lambda_over_disc(p, &poset) + prime_error_sum(p, r, &poset)? / pr.pow(r as i32);
    }
    let s = m.mean_spacing();
    let scale = s.pow(r as i32) / BigRational::from_integer(BigInt::one() << (r * m.omega()));
    Ok(region.volume() * scale * product)
}

/// The same main term summed term by term over every divisor `c` and every
/// partition tuple on `q/c` (including `lambda = 0` tuples).
pub fn main_term_expanded(m: &SquareFreeModulus, r: usize, region: &ConvexRegion) -> Result<BigRational> {
    check_r(r)?;
    check_odd(m)?;
    check_formula_omega(m)?;
    let poset = PartitionPoset::new(r)?;
    let s = m.mean_spacing();
    let error_sums: Vec<BigRational> = m
        .primes()
        .iter()
        .map(|&p| prime_error_sum(p, r, &poset))
        .collect::<Result<_>>()?;
    let vol_scaled = region.volume() * s.pow(r as i32 - 1);
    let mut total = BigRational::zero();
    for_each_divisor_and_tuple(m, r, poset.partitions(), |mask, tuple| {
        let c = BigRational::from_integer(divisor_of_mask(m, mask).into());
        let complete: BigRational = (0..m.omega())
            .filter(|i| mask >> i & 1 == 1)
            .fold(BigRational::one(), |acc, i| acc * &error_sums[i]);
        let lattice_share = &vol_scaled
            / (c.pow(r as i32 - 1) * BigRational::from_integer(tuple.disc().into()));
        total += BigRational::from_integer(tuple.lambda(&poset)) * lattice_share * complete / c;
    })?;
    let scale = s / BigRational::from_integer(BigInt::one() << (r * m.omega()));
    Ok(total * scale)
}

/// One row of a pair-correlation sweep over moduli.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub q: u64,
    pub omega: usize,
    pub s: BigRational,
    pub r2: BigRational,
    /// `|R_2 - |I||`.
    pub deviation: f64,
    pub sqrt_s_deviation: f64,
    pub s_deviation: f64,
}

/// `R_2(I, q)` by the definition for each modulus in `moduli`; even moduli
/// are replaced by their odd half, which has the same correlations.
pub fn pair_correlation_sweep(moduli: &[u64], interval: &ConvexRegion, opts: &CorrelationOptions) -> Result<Vec<SweepRow>> {
    check_inputs(2, interval)?;
    moduli
        .iter()
        .map(|&q| {
            let m = make_modulus(q)?;
            let odd = if m.is_even() { reduce_even(q)?.odd } else { m.clone() };
            let res = correlation_definition(&odd, 2, interval, opts)?;
            let dev = res.deviation().abs().to_f64().unwrap_or(f64::NAN);
            let s = m.mean_spacing().clone();
            let sf = s.to_f64().unwrap_or(f64::NAN);
            Ok(SweepRow {
                q,
                omega: m.omega(),
                r2: res.value,
                deviation: dev,
                sqrt_s_deviation: sf.sqrt() * dev,
                s_deviation: sf * dev,
                s,
            })
        })
        .collect()
}

/// Runs one method on any square-free `q`. `definition` and `formula`
/// work on the odd part of an even modulus; `circle` always uses the
/// residues mod `q` itself.
pub fn correlate(q: u64, r: usize, region: &ConvexRegion, method: Method, opts: &CorrelationOptions) -> Result<CorrelationResult> {
    let m = make_modulus(q)?;
    let odd = if m.is_even() { reduce_even(q)?.odd } else { m.clone() };
    let mut res = match method {
        Method::DefinitionHSum => correlation_definition(&odd, r, region, opts)?,
        Method::LatticeFormula => correlation_formula(&odd, r, region, opts)?,
        Method::CircleTuples => correlation_circle(&enumerate_squares(&m)?, r, region)?,
    };
    res.q = q;
    Ok(res)
}

/// JSON record for one correlation; field order is fixed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRecord {
    pub schema: u32,
    pub q: u64,
    pub r: usize,
    pub region: String,
    pub method: Method,
    pub value: String,
    pub value_num: String,
    pub value_den: String,
    pub value_float: f64,
    pub vol_num: String,
    pub vol_den: String,
    pub deviation_float: f64,
    pub wall_check: bool,
    pub runtime_ms: u64,
}

impl CorrelationRecord {
    pub fn new(res: &CorrelationResult, started: Option<Instant>) -> Self {
        CorrelationRecord {
            schema: 1,
            q: res.q,
            r: res.r,
            region: res.region.clone(),
            method: res.method,
            value: format_rational(&res.value),
            value_num: res.value.numer().to_string(),
            value_den: res.value.denom().to_string(),
            value_float: res.value.to_f64().unwrap_or(f64::NAN),
            vol_num: res.volume.numer().to_string(),
            vol_den: res.volume.denom().to_string(),
            deviation_float: res.deviation_f64(),
            wall_check: true,
            runtime_ms: started.map_or(0, |t| t.elapsed().as_millis() as u64),
        }
    }
}
