//! Square-free moduli, their quadratic residues, and divisor utilities.
//!
//! A residue counts as a square when it is `x^2 mod q` for some `x`; zero is
//! always included. For square-free `q` the squares are exactly the residues
//! that are squares modulo every prime factor, so there are
//! `N_q = prod (p+1)/2` of them for odd `q` (and twice the odd count when
//! `2 | q`, since every residue mod 2 is a square).

use std::sync::atomic::{AtomicU64, Ordering};

use num_bigint::{BigInt, BigUint};
use num_rational::{BigRational, Ratio};
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Largest modulus accepted by [`factorize`].
pub const FACTOR_LIMIT: u64 = 1_000_000_000_000;

/// Default largest modulus for the residue bit-sieve (`q` bits of memory).
pub const DEFAULT_SIEVE_LIMIT: u64 = 1 << 31;

/// Largest modulus for which [`squares_by_crt`] will build the product set.
pub const CRT_LIMIT: u64 = 10_000_000;

/// Hard wall for walks over the `2^omega` divisors of `q`.
pub const MAX_DIVISOR_OMEGA: usize = 40;

const SIEVE_CHUNK: u64 = 1 << 20;

/// Prime factors of `q` with multiplicity, ascending.
///
/// Trial division up to `sqrt(q)`; for `q <= 10^12` that is at most `10^6`
/// candidate divisors.
pub fn factorize(q: u64) -> Result<Vec<u64>> {
    if q == 0 {
        return Err(Error::ZeroModulus);
    }
    if q > FACTOR_LIMIT {
        return Err(Error::ModulusTooLarge {
            q,
            limit: FACTOR_LIMIT,
        });
    }
    let mut n = q;
    let mut out = Vec::new();
    while n % 2 == 0 {
        out.push(2);
        n /= 2;
    }
    let mut d = 3u64;
    while d * d <= n {
        while n % d == 0 {
            out.push(d);
            n /= d;
        }
        d += 2;
    }
    if n > 1 {
        out.push(n);
    }
    Ok(out)
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n % 2 == 0 {
        return n == 2;
    }
    let mut d = 3u64;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

pub(crate) fn require_odd_prime(p: u64) -> Result<()> {
    if p % 2 == 1 && is_prime(p) {
        Ok(())
    } else {
        Err(Error::NotOddPrime(p))
    }
}

/// First `k` odd primes, ascending.
pub fn odd_primes(k: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(k);
    let mut n = 3u64;
    while out.len() < k {
        if is_prime(n) {
            out.push(n);
        }
        n += 2;
    }
    out
}

/// Product of the first `k` odd primes (`3*5*7*...`).
pub fn odd_primorial(k: usize) -> Result<u64> {
    odd_primes(k).into_iter().try_fold(1u64, |acc, p| {
        acc.checked_mul(p)
            .filter(|v| *v <= FACTOR_LIMIT)
            .ok_or(Error::ModulusTooLarge {
                q: u64::MAX,
                limit: FACTOR_LIMIT,
            })
    })
}

/// A factored square-free modulus together with its exact residue statistics.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SquareFreeModulus {
    q: u64,
    primes: Vec<u64>,
    n_residues: u64,
    sigma_minus1: BigRational,
    mean_spacing: BigRational,
}

impl SquareFreeModulus {
    pub fn new(q: u64) -> Result<Self> {
        let factors = factorize(q)?;
        for w in factors.windows(2) {
            if w[0] == w[1] {
                return Err(Error::NotSquareFree {
                    q,
                    prime: w[0],
                    square: w[0] * w[0],
                });
            }
        }
        Ok(Self::from_primes_unchecked(factors))
    }

    /// Builds a modulus from distinct ascending primes.
    pub(crate) fn from_primes_unchecked(primes: Vec<u64>) -> Self {
        let q: u64 = primes.iter().product();
        let n_residues: u64 = primes.iter().map(|&p| squares_mod_prime_count(p)).product();
        let sigma_minus1 = primes.iter().fold(BigRational::one(), |acc, &p| {
            acc * BigRational::new(BigInt::from(p + 1), BigInt::from(p))
        });
        let mean_spacing = BigRational::new(BigInt::from(q), BigInt::from(n_residues));
        SquareFreeModulus {
            q,
            primes,
            n_residues,
            sigma_minus1,
            mean_spacing,
        }
    }

    /// The divisor of `self` whose primes are `primes` (a subset of ours).
    pub fn divisor(&self, primes: &[u64]) -> SquareFreeModulus {
        debug_assert!(primes.iter().all(|p| self.primes.contains(p)));
        Self::from_primes_unchecked(primes.to_vec())
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    pub fn omega(&self) -> usize {
        self.primes.len()
    }

    pub fn is_even(&self) -> bool {
        self.q % 2 == 0
    }

    /// `N_q`, the number of squares mod `q` (zero included).
    pub fn n_residues(&self) -> u64 {
        self.n_residues
    }

    /// `sigma_{-1}(q) = prod (1 + 1/p)`.
    pub fn sigma_minus1(&self) -> &BigRational {
        &self.sigma_minus1
    }

    /// Mean spacing `s = q / N_q`.
    pub fn mean_spacing(&self) -> &BigRational {
        &self.mean_spacing
    }

    pub fn mean_spacing_f64(&self) -> f64 {
        self.q as f64 / self.n_residues as f64
    }
}

fn squares_mod_prime_count(p: u64) -> u64 {
    if p == 2 {
        2
    } else {
        (p + 1) / 2
    }
}

pub fn make_modulus(q: u64) -> Result<SquareFreeModulus> {
    SquareFreeModulus::new(q)
}

/// The sorted squares modulo a square-free `q`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResidueSet {
    modulus: SquareFreeModulus,
    residues: Vec<u64>,
}

impl ResidueSet {
    pub fn modulus(&self) -> &SquareFreeModulus {
        &self.modulus
    }

    pub fn residues(&self) -> &[u64] {
        &self.residues
    }

    pub fn len(&self) -> usize {
        self.residues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.residues.is_empty()
    }

    pub fn contains(&self, x: u64) -> bool {
        self.residues.binary_search(&(x % self.modulus.q)).is_ok()
    }
}

/// Squares mod `q` by bit-sieve, with the default memory limit.
pub fn enumerate_squares(m: &SquareFreeModulus) -> Result<ResidueSet> {
    enumerate_squares_with_limit(m, DEFAULT_SIEVE_LIMIT)
}

/// Marks `x^2 mod q` for `x` in `[0, q/2]` in a shared bitset. Chunks of the
/// `x` range run in parallel; the resulting bits do not depend on the
/// schedule.
pub fn enumerate_squares_with_limit(m: &SquareFreeModulus, limit: u64) -> Result<ResidueSet> {
    let q = m.q();
    if q > limit {
        return Err(Error::SieveLimit { q, limit });
    }
    let words: Vec<AtomicU64> = (0..q.div_ceil(64)).map(|_| AtomicU64::new(0)).collect();
    let last = q / 2;
    let chunks = last / SIEVE_CHUNK + 1;
    (0..chunks).into_par_iter().for_each(|c| {
        let start = c * SIEVE_CHUNK;
        let end = (start + SIEVE_CHUNK - 1).min(last);
        let mut v = ((start as u128 * start as u128) % q as u128) as u64;
        let mut x = start;
        loop {
            words[(v / 64) as usize].fetch_or(1 << (v % 64), Ordering::Relaxed);
            if x == end {
                break;
            }
            // (x+1)^2 = x^2 + 2x + 1
            let step = (2 * (x as u128) + 1) % q as u128;
            v = ((v as u128 + step) % q as u128) as u64;
            x += 1;
        }
    });
    let mut residues = Vec::with_capacity(m.n_residues() as usize);
    for (i, w) in words.iter().enumerate() {
        let mut bits = w.load(Ordering::Relaxed);
        while bits != 0 {
            let b = bits.trailing_zeros() as u64;
            residues.push(i as u64 * 64 + b);
            bits &= bits - 1;
        }
    }
    Ok(ResidueSet {
        modulus: m.clone(),
        residues,
    })
}

fn squares_mod_prime(p: u64) -> Vec<u64> {
    let mut v: Vec<u64> = (0..=p / 2).map(|x| x * x % p).collect();
    v.sort_unstable();
    v.dedup();
    v
}

fn mod_inverse(a: u64, m: u64) -> u64 {
    let (mut old_r, mut r) = (a as i128 % m as i128, m as i128);
    let (mut old_s, mut s) = (1i128, 0i128);
    while r != 0 {
        let quot = old_r / r;
        (old_r, r) = (r, old_r - quot * r);
        (old_s, s) = (s, old_s - quot * s);
    }
    debug_assert_eq!(old_r, 1);
    old_s.rem_euclid(m as i128) as u64
}

/// Squares mod `q` by Chinese-remainder merge of the per-prime square sets.
pub fn squares_by_crt(m: &SquareFreeModulus) -> Result<ResidueSet> {
    if m.q() > CRT_LIMIT {
        return Err(Error::SieveLimit {
            q: m.q(),
            limit: CRT_LIMIT,
        });
    }
    let mut acc = vec![0u64];
    let mut modulus = 1u64;
    for &p in m.primes() {
        let inv = mod_inverse(modulus % p, p);
        let local = squares_mod_prime(p);
        let mut next = Vec::with_capacity(acc.len() * local.len());
        for &a in &acc {
            for &b in &local {
                let t = ((b + p - a % p) % p) * inv % p;
                next.push(a + modulus * t);
            }
        }
        acc = next;
        modulus *= p;
    }
    acc.sort_unstable();
    Ok(ResidueSet {
        modulus: m.clone(),
        residues: acc,
    })
}

/// Certificate that an even square-free modulus has the same mean spacing as
/// its odd half.
#[derive(Clone, Debug)]
pub struct EvenReduction {
    pub even: SquareFreeModulus,
    pub odd: SquareFreeModulus,
}

impl EvenReduction {
    pub fn odd_part(&self) -> u64 {
        self.odd.q()
    }

    /// `s_q == s_{q'}` and `N_q == 2 N_{q'}`, checked exactly.
    pub fn holds(&self) -> bool {
        self.even.mean_spacing() == self.odd.mean_spacing()
            && self.even.n_residues() == 2 * self.odd.n_residues()
    }
}

pub fn reduce_even(q: u64) -> Result<EvenReduction> {
    let even = SquareFreeModulus::new(q)?;
    if !even.is_even() {
        return Err(Error::NotEven(q));
    }
    let odd = SquareFreeModulus::from_primes_unchecked(even.primes()[1..].to_vec());
    Ok(EvenReduction { even, odd })
}

fn check_divisor_omega(m: &SquareFreeModulus) -> Result<()> {
    if m.omega() > MAX_DIVISOR_OMEGA {
        Err(Error::TooManyPrimes {
            omega: m.omega(),
            limit: MAX_DIVISOR_OMEGA,
        })
    } else {
        Ok(())
    }
}

/// Calls `f` on every divisor of `q`; order follows the binary subset index.
pub fn for_each_divisor(m: &SquareFreeModulus, mut f: impl FnMut(u64)) -> Result<()> {
    check_divisor_omega(m)?;
    fn walk(primes: &[u64], d: u64, f: &mut impl FnMut(u64)) {
        match primes.split_first() {
            None => f(d),
            Some((&p, rest)) => {
                walk(rest, d, f);
                walk(rest, d * p, f);
            }
        }
    }
    walk(m.primes(), 1, &mut f);
    Ok(())
}

/// All divisors of `q`, ascending.
pub fn divisors(m: &SquareFreeModulus) -> Result<Vec<u64>> {
    let mut out = Vec::with_capacity(1usize << m.omega().min(24));
    for_each_divisor(m, |d| out.push(d))?;
    out.sort_unstable();
    Ok(out)
}

fn check_alpha(alpha: Ratio<u32>) -> Result<()> {
    if *alpha.numer() == 0 || *alpha.denom() == 0 {
        Err(Error::Invalid(format!("alpha must be positive, got {alpha}")))
    } else {
        Ok(())
    }
}

/// Largest integer `t` with `t < s^alpha`, for `s = q / N_q`.
fn floor_below_power(m: &SquareFreeModulus, alpha: Ratio<u32>) -> u64 {
    let (u, v) = (*alpha.numer(), *alpha.denom());
    let lhs_scale = BigUint::from(m.n_residues()).pow(u);
    let rhs = BigUint::from(m.q()).pow(u);
    // t < s^(u/v)  <=>  t^v * N^u < q^u
    let below = |t: u64| BigUint::from(t).pow(v) * &lhs_scale < rhs;
    if !below(1) {
        return 0;
    }
    let mut lo = 1u64;
    let mut hi = 2u64;
    while below(hi) {
        lo = hi;
        hi = hi.saturating_mul(2);
        if hi == u64::MAX {
            return u64::MAX;
        }
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if below(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Number of divisors `d | q` with `d < s^alpha`, decided exactly.
pub fn count_small_divisors(m: &SquareFreeModulus, alpha: Ratio<u32>) -> Result<u64> {
    check_alpha(alpha)?;
    let bound = floor_below_power(m, alpha);
    let mut count = 0;
    for_each_divisor(m, |d| {
        if d <= bound {
            count += 1;
        }
    })?;
    Ok(count)
}

/// `sum_{d | q, d > s} d^(-alpha)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DivisorTailSum {
    /// Exact value; present when `alpha` is an integer.
    pub exact: Option<BigRational>,
    pub value: f64,
    /// `value / s^(-alpha)`.
    pub ratio_to_bound: f64,
}

pub fn divisor_tail_sum(m: &SquareFreeModulus, alpha: Ratio<u32>) -> Result<DivisorTailSum> {
    check_alpha(alpha)?;
    let mut tail = Vec::new();
    let (q, n) = (m.q() as u128, m.n_residues() as u128);
    for_each_divisor(m, |d| {
        if d as u128 * n > q {
            tail.push(d);
        }
    })?;
    tail.sort_unstable();
    let a = alpha.to_f64().unwrap_or(f64::NAN);
    let exact = alpha.is_integer().then(|| {
        let e = *alpha.numer();
        tail.iter().fold(BigRational::zero(), |acc, &d| {
            acc + BigRational::new(BigInt::one(), BigInt::from(d).pow(e))
        })
    });
    let value = match &exact {
        Some(v) => v.to_f64().unwrap_or(f64::NAN),
        None => tail.iter().map(|&d| (d as f64).powf(-a)).sum(),
    };
    let ratio_to_bound = value * m.mean_spacing_f64().powf(a);
    Ok(DivisorTailSum {
        exact,
        value,
        ratio_to_bound,
    })
}
