//! Exact counts of chains of squares with prescribed differences.
//!
//! For an odd prime `p` and `h` in `(Z/pZ)^(r-1)`, `N_r(h, p)` counts the
//! `r`-tuples of squares mod `p` (zero included) with `y_i - y_(i+1) = h_i`.
//! The error term is defined by `2^r_eff * N_r(h, p) = p + a(h, p)`, so the
//! interesting content is the size of `a`, which stays of order `sqrt(p)`.
//! Over a square-free modulus the counts multiply across primes.

use std::collections::HashMap;
use std::io::Write;
use std::sync::{Arc, OnceLock, RwLock};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Zero};
use rayon::prelude::*;

use crate::arith::{require_odd_prime, SquareFreeModulus};
use crate::error::{Error, Result};
use crate::partitions::{check_r, partial_sums_mod, PartitionPoset};

/// Dense per-prime tables are built when `p^r` stays below this.
const TABLE_WORK_LIMIT: u64 = 50_000_000;

/// Squares mod an odd prime, as a membership bitmap plus the sorted list.
#[derive(Debug)]
pub struct QrBitmap {
    p: u64,
    is_square: Vec<bool>,
    squares: Vec<u64>,
}

impl QrBitmap {
    fn build(p: u64) -> Self {
        let mut is_square = vec![false; p as usize];
        for x in 0..=p / 2 {
            is_square[(x * x % p) as usize] = true;
        }
        let squares = (0..p).filter(|&y| is_square[y as usize]).collect();
        QrBitmap {
            p,
            is_square,
            squares,
        }
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn is_square(&self, y: u64) -> bool {
        self.is_square[(y % self.p) as usize]
    }

    pub fn squares(&self) -> &[u64] {
        &self.squares
    }
}

fn bitmap_cache() -> &'static RwLock<HashMap<u64, Arc<QrBitmap>>> {
    static CACHE: OnceLock<RwLock<HashMap<u64, Arc<QrBitmap>>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// Shared square bitmap for an odd prime, built on first use.
pub fn qr_bitmap(p: u64) -> Result<Arc<QrBitmap>> {
    if let Some(b) = bitmap_cache().read().unwrap().get(&p) {
        return Ok(b.clone());
    }
    require_odd_prime(p)?;
    let built = Arc::new(QrBitmap::build(p));
    let mut guard = bitmap_cache().write().unwrap();
    Ok(guard.entry(p).or_insert(built).clone())
}

/// Distinct partial sums `sigma_1j(h) mod p`, `j = 2..r`, excluding zero.
fn nonzero_offsets(sums: &[u64]) -> Vec<u64> {
    let mut offs: Vec<u64> = sums.iter().copied().filter(|&s| s != 0).collect();
    offs.sort_unstable();
    offs.dedup();
    offs
}

/// Returns `(N_r(h, p), r_eff)` by scanning the squares `y_1`.
fn count_raw(bitmap: &QrBitmap, h: &[i64]) -> (u64, usize) {
    let p = bitmap.p;
    let sums = partial_sums_mod(h, p);
    let offs = nonzero_offsets(&sums);
    let n = bitmap
        .squares
        .iter()
        .filter(|&&y| offs.iter().all(|&o| bitmap.is_square[((y + p - o) % p) as usize]))
        .count() as u64;
    (n, offs.len() + 1)
}

/// One solution count together with its derived error term.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrimeCountRecord {
    pub p: u64,
    pub r: usize,
    /// `h` reduced into `[0, p)`.
    pub h: Vec<u64>,
    pub n_solutions: u64,
    pub r_eff: usize,
    /// `2^r_eff * n_solutions - p`.
    pub a: i64,
}

impl PrimeCountRecord {
    fn new(p: u64, r: usize, h: &[i64], n: u64, r_eff: usize) -> Self {
        PrimeCountRecord {
            p,
            r,
            h: h.iter().map(|x| x.rem_euclid(p as i64) as u64).collect(),
            n_solutions: n,
            r_eff,
            a: ((n as i64) << r_eff) - p as i64,
        }
    }

    /// `Delta(h, p) = 2^(r - r_eff)`.
    pub fn delta(&self) -> u64 {
        1 << (self.r - self.r_eff)
    }

    /// `|a| <= 2^r (r sqrt(p) + r)`, decided in integers.
    pub fn within_bound(&self) -> bool {
        a_bound_holds(self.a, self.p, self.r)
    }
}

/// `|a| <= 2^r (r sqrt(p) + r)` without floating point.
pub fn a_bound_holds(a: i64, p: u64, r: usize) -> bool {
    let scale = (1i128 << r) * r as i128;
    let excess = a.unsigned_abs() as i128 - scale;
    excess <= 0 || excess * excess <= scale * scale * p as i128
}

fn check_h(h: &[i64], r: usize) -> Result<()> {
    check_r(r)?;
    if h.len() + 1 != r {
        return Err(Error::Dimension {
            expected: r - 1,
            got: h.len(),
        });
    }
    Ok(())
}

pub fn count_prime(h: &[i64], p: u64, r: usize) -> Result<PrimeCountRecord> {
    check_h(h, r)?;
    let bitmap = qr_bitmap(p)?;
    let (n, r_eff) = count_raw(&bitmap, h);
    Ok(PrimeCountRecord::new(p, r, h, n, r_eff))
}

/// Index of `h mod p` in base `p`, first coordinate least significant.
fn encode(h: &[i64], p: u64) -> usize {
    h.iter()
        .rev()
        .fold(0u64, |acc, &x| acc * p + x.rem_euclid(p as i64) as u64) as usize
}

/// Inverse of [`encode`].
pub(crate) fn decode(mut index: u64, p: u64, dim: usize) -> Vec<i64> {
    (0..dim)
        .map(|_| {
            let d = index % p;
            index /= p;
            d as i64
        })
        .collect()
}

/// Solution counts for one prime and tuple length, optionally tabulated over
/// all of `(Z/pZ)^(r-1)`.
#[derive(Debug, Clone)]
pub struct PrimeCounter {
    p: u64,
    r: usize,
    bitmap: Arc<QrBitmap>,
    table: Option<Arc<Vec<(u32, u8)>>>,
}

impl PrimeCounter {
    pub fn new(p: u64, r: usize) -> Result<Self> {
        check_r(r)?;
        let bitmap = qr_bitmap(p)?;
        let fits = (p as u128).pow(r as u32) <= TABLE_WORK_LIMIT as u128;
        let table = fits.then(|| {
            let size = p.pow(r as u32 - 1);
            let t: Vec<(u32, u8)> = (0..size)
                .into_par_iter()
                .map(|i| {
                    let (n, e) = count_raw(&bitmap, &decode(i, p, r - 1));
                    (n as u32, e as u8)
                })
                .collect();
            Arc::new(t)
        });
        Ok(PrimeCounter {
            p,
            r,
            bitmap,
            table,
        })
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn is_tabulated(&self) -> bool {
        self.table.is_some()
    }

    /// `(N_r(h, p), r_eff(h))`.
    pub fn lookup(&self, h: &[i64]) -> (u64, usize) {
        match &self.table {
            Some(t) => {
                let (n, e) = t[encode(h, self.p)];
                (n as u64, e as usize)
            }
            None => count_raw(&self.bitmap, h),
        }
    }

    pub fn record(&self, h: &[i64]) -> PrimeCountRecord {
        let (n, e) = self.lookup(h);
        PrimeCountRecord::new(self.p, self.r, h, n, e)
    }

    /// `a(h, p) * Delta(h, p)`.
    pub fn a_delta(&self, h: &[i64]) -> i64 {
        let (n, e) = self.lookup(h);
        (((n as i64) << e) - self.p as i64) << (self.r - e)
    }

    /// Every record over `(Z/pZ)^(r-1)` in encoding order.
    pub fn all_records(&self) -> Vec<PrimeCountRecord> {
        let size = self.p.pow(self.r as u32 - 1);
        (0..size)
            .map(|i| self.record(&decode(i, self.p, self.r - 1)))
            .collect()
    }

    /// Writes `h_1..h_(r-1),N,r_eff,a` rows for every `h mod p`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let head: Vec<String> = (1..self.r).map(|i| format!("h{i}")).collect();
        writeln!(w, "{},N,r_eff,a", head.join(","))?;
        for rec in self.all_records() {
            let hs: Vec<String> = rec.h.iter().map(|x| x.to_string()).collect();
            writeln!(w, "{},{},{},{}", hs.join(","), rec.n_solutions, rec.r_eff, rec.a)?;
        }
        Ok(())
    }
}

/// Per-prime counters for every prime of an odd square-free modulus.
#[derive(Debug, Clone)]
pub struct ModulusCounter {
    r: usize,
    counters: Vec<PrimeCounter>,
}

impl ModulusCounter {
    pub fn new(m: &SquareFreeModulus, r: usize) -> Result<Self> {
        if m.is_even() {
            return Err(Error::EvenModulus(m.q()));
        }
        let counters = m
            .primes()
            .iter()
            .map(|&p| PrimeCounter::new(p, r))
            .collect::<Result<_>>()?;
        Ok(ModulusCounter { r, counters })
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn counters(&self) -> &[PrimeCounter] {
        &self.counters
    }

    /// `N(h, q) = prod_p N(h, p)`.
    pub fn n_solutions(&self, h: &[i64]) -> BigUint {
        let mut acc = BigUint::one();
        let mut small: u64 = 1;
        for c in &self.counters {
            let n = c.lookup(h).0;
            if n == 0 {
                return BigUint::zero();
            }
            match small.checked_mul(n) {
                Some(v) => small = v,
                None => {
                    acc *= small;
                    small = n;
                }
            }
        }
        acc * small
    }

    /// `a(h, c) Delta(h, c)` for the divisor `c` given by a bit mask over
    /// this modulus' primes.
    pub fn a_delta(&self, h: &[i64], mask: u64) -> BigInt {
        let mut acc = BigInt::one();
        for (i, c) in self.counters.iter().enumerate() {
            if mask >> i & 1 == 1 {
                let v = c.a_delta(h);
                if v == 0 {
                    return BigInt::zero();
                }
                acc *= v;
            }
        }
        acc
    }
}

/// `N(h, q)` for odd square-free `q` as a product of per-prime counts.
pub fn count_composite(h: &[i64], m: &SquareFreeModulus, r: usize) -> Result<BigUint> {
    check_h(h, r)?;
    if m.is_even() {
        return Err(Error::EvenModulus(m.q()));
    }
    m.primes().iter().try_fold(BigUint::one(), |acc, &p| {
        Ok(acc * count_prime(h, p, r)?.n_solutions)
    })
}

/// `a(h, c) = prod_{p | c} a(h, p)`.
pub fn a_composite(h: &[i64], c: &SquareFreeModulus, r: usize) -> Result<BigInt> {
    check_h(h, r)?;
    if c.is_even() {
        return Err(Error::EvenModulus(c.q()));
    }
    c.primes()
        .iter()
        .try_fold(BigInt::one(), |acc, &p| Ok(acc * count_prime(h, p, r)?.a))
}

/// `Delta(h, c) = prod_{p | c} Delta(h, p)`.
pub fn delta_composite(h: &[i64], c: &SquareFreeModulus, r: usize) -> Result<BigUint> {
    check_h(h, r)?;
    if c.is_even() {
        return Err(Error::EvenModulus(c.q()));
    }
    c.primes()
        .iter()
        .try_fold(BigUint::one(), |acc, &p| Ok(acc * count_prime(h, p, r)?.delta()))
}

/// `sum_{h mod p} a(h, p) Delta(h, p)` by direct summation.
pub fn sum_a_delta(p: u64, r: usize) -> Result<BigInt> {
    let counter = PrimeCounter::new(p, r)?;
    let size = p.pow(r as u32 - 1);
    let total: i128 = (0..size)
        .into_par_iter()
        .map(|i| counter.a_delta(&decode(i, p, r - 1)) as i128)
        .sum();
    Ok(BigInt::from(total))
}

/// Both sides of the identity
/// `sum_h a(h,p) Delta(h,p) = (p+1)^r - p^r sum_G lambda(G) p^(-codim G)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SumLemmaCheck {
    pub p: u64,
    pub r: usize,
    pub direct: BigRational,
    pub closed_form: BigRational,
}

impl SumLemmaCheck {
    pub fn holds(&self) -> bool {
        self.direct == self.closed_form
    }
}

/// `(p+1)^r - p^r sum_G lambda(G) / p^codim(G)`.
pub fn sum_lemma_closed_form(poset: &PartitionPoset, p: u64) -> BigRational {
    let r = poset.r();
    let pr = BigRational::from_integer(BigInt::from(p));
    let weighted = poset
        .partitions()
        .iter()
        .enumerate()
        .fold(BigRational::zero(), |acc, (g, part)| {
            acc + BigRational::from_integer(poset.lambda_idx(g).into()) / pr.pow(part.codim() as i32)
        });
    BigRational::from_integer(BigInt::from(p + 1).pow(r as u32)) - pr.pow(r as i32) * weighted
}

pub fn verify_sum_lemma(p: u64, r: usize) -> Result<SumLemmaCheck> {
    let poset = PartitionPoset::new(r)?;
    let direct = BigRational::from_integer(sum_a_delta(p, r)?);
    Ok(SumLemmaCheck {
        p,
        r,
        direct,
        closed_form: sum_lemma_closed_form(&poset, p),
    })
}

/// Worst-case error term over all `h mod p`.
#[derive(Clone, Debug, PartialEq)]
pub struct ABoundScan {
    pub p: u64,
    pub r: usize,
    pub max_abs_a: i64,
    /// `max |a| / sqrt(p)`.
    pub max_ratio: f64,
    pub violations: Vec<PrimeCountRecord>,
}

pub fn scan_a_bound(p: u64, r: usize) -> Result<ABoundScan> {
    let counter = PrimeCounter::new(p, r)?;
    let records = counter.all_records();
    let max_abs_a = records.iter().map(|rec| rec.a.abs()).max().unwrap_or(0);
    let violations = records.into_iter().filter(|rec| !rec.within_bound()).collect();
    Ok(ABoundScan {
        p,
        r,
        max_abs_a,
        max_ratio: max_abs_a as f64 / (p as f64).sqrt(),
        violations,
    })
}
