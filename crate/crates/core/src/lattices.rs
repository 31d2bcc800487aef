//! Regions in `R^(r-1)`, congruence lattices cut out by tuples of set
//! partitions, and exact lattice-point enumeration in dilated regions.
//!
//! Boxes are half-open, `[a_k, b_k)`, so disjoint unions count exactly.
//! Simplices `t Delta^(k-1) = {y_i > 0, sum y_i < t}` are open; the product
//! `t1 Delta^(i-1) x t2 Delta^j` constrains the first `i-1` coordinates and
//! the last `j` coordinates separately.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::arith::is_prime;
use crate::error::{Error, Result};
use crate::partitions::{PartitionPoset, SetPartition};

/// Default cap on candidate points visited by one enumeration.
pub const DEFAULT_BUDGET: u64 = 100_000_000;

fn factorial(n: usize) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * k)
}

fn ceil_i64(x: &BigRational) -> Result<i64> {
    x.ceil()
        .to_integer()
        .to_i64()
        .ok_or_else(|| Error::Invalid(format!("{x} is out of the i64 range")))
}

/// Formats a rational as `n` or `n/d`.
pub fn format_rational(x: &BigRational) -> String {
    if x.is_integer() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

/// Parses `n`, `n/d` or a decimal literal such as `-1.25` exactly.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let bad = || Error::RegionSyntax(s.to_string());
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(n, d));
    }
    if let Some((whole, frac)) = s.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let digits: BigInt = format!("{whole}{frac}").parse().map_err(|_| bad())?;
        return Ok(BigRational::new(digits, BigInt::from(10).pow(frac.len() as u32)));
    }
    Ok(BigRational::from_integer(s.parse().map_err(|_| bad())?))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Shape {
    /// Half-open box `prod [a_k, b_k)`.
    Box(Vec<(BigRational, BigRational)>),
    /// Open simplex `t Delta^(k-1)` of dimension `k - 1`.
    Simplex { t: BigRational, k: usize },
    /// `t1 Delta^(i-1) x t2 Delta^j`, dimension `i - 1 + j`.
    Product {
        t1: BigRational,
        i: usize,
        t2: BigRational,
        j: usize,
    },
}

/// A bounded convex region with exact rational parameters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConvexRegion {
    shape: Shape,
}

/// Sides of the walls `sigma_ij = 0` met by the closure of a region.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct WallReport {
    /// 1-based `(i, j)` with `i < j`.
    pub violated: Vec<(usize, usize)>,
}

impl WallReport {
    pub fn passes(&self) -> bool {
        self.violated.is_empty()
    }
}

impl ConvexRegion {
    pub fn new_box(bounds: Vec<(BigRational, BigRational)>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::Invalid("a box needs at least one coordinate".into()));
        }
        Ok(ConvexRegion {
            shape: Shape::Box(bounds),
        })
    }

    /// `t Delta^(k-1)`.
    pub fn new_simplex(t: BigRational, k: usize) -> Result<Self> {
        if k < 2 || t.is_negative() {
            return Err(Error::Invalid(format!("simplex needs k >= 2 and t >= 0 (k = {k}, t = {t})")));
        }
        Ok(ConvexRegion {
            shape: Shape::Simplex { t, k },
        })
    }

    /// `t1 Delta^(i-1) x t2 Delta^j`.
    pub fn new_product(t1: BigRational, i: usize, t2: BigRational, j: usize) -> Result<Self> {
        if i < 1 || j < 1 || t1.is_negative() || t2.is_negative() {
            return Err(Error::Invalid(format!("product needs i, j >= 1 and t1, t2 >= 0 (i = {i}, j = {j})")));
        }
        Ok(ConvexRegion {
            shape: Shape::Product { t1, i, t2, j },
        })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn dim(&self) -> usize {
        match &self.shape {
            Shape::Box(b) => b.len(),
            Shape::Simplex { k, .. } => k - 1,
            Shape::Product { i, j, .. } => i - 1 + j,
        }
    }

    pub fn volume(&self) -> BigRational {
        match &self.shape {
            Shape::Box(b) => b.iter().fold(BigRational::one(), |acc, (lo, hi)| {
                if hi > lo {
                    acc * (hi - lo)
                } else {
                    BigRational::zero()
                }
            }),
            Shape::Simplex { t, k } => t.pow(*k as i32 - 1) / BigRational::from_integer(factorial(k - 1)),
            Shape::Product { t1, i, t2, j } => {
                t1.pow(*i as i32 - 1) * t2.pow(*j as i32)
                    / BigRational::from_integer(factorial(i - 1) * factorial(*j))
            }
        }
    }

    /// `sup sum |x_k|` over the region.
    pub fn diam1(&self) -> BigRational {
        match &self.shape {
            Shape::Box(b) => b
                .iter()
                .fold(BigRational::zero(), |acc, (lo, hi)| acc + lo.abs().max(hi.abs())),
            Shape::Simplex { t, .. } => t.clone(),
            Shape::Product { t1, i, t2, .. } => {
                if *i == 1 {
                    t2.clone()
                } else {
                    t1 + t2
                }
            }
        }
    }

    /// Lists the roots `sigma_ij` that vanish somewhere on the closure.
    /// Simplices and their products keep every root positive.
    pub fn wall_check(&self) -> WallReport {
        let Shape::Box(b) = &self.shape else {
            return WallReport::default();
        };
        let r = b.len() + 1;
        let mut violated = Vec::new();
        for i in 1..r {
            let (mut lo, mut hi) = (BigRational::zero(), BigRational::zero());
            for j in i + 1..=r {
                lo += &b[j - 2].0;
                hi += &b[j - 2].1;
                if !lo.is_positive() && !hi.is_negative() {
                    violated.push((i, j));
                }
            }
        }
        WallReport { violated }
    }

    pub fn require_wall_free(&self) -> Result<()> {
        let report = self.wall_check();
        if report.passes() {
            Ok(())
        } else {
            Err(Error::WallViolation(report.violated))
        }
    }

    /// Integer description of `sC`.
    pub fn scaled_domain(&self, s: &BigRational) -> Result<ScaledDomain> {
        let n = self.dim();
        let cap = |t: &BigRational| -> Result<i64> { Ok(ceil_i64(&(t * s))? - 1) };
        let mut caps = Vec::new();
        let (lo, hi) = match &self.shape {
            Shape::Box(b) => {
                let mut lo = Vec::with_capacity(n);
                let mut hi = Vec::with_capacity(n);
                for (a, bb) in b {
                    lo.push(ceil_i64(&(a * s))?);
                    hi.push(ceil_i64(&(bb * s))? - 1);
                }
                (lo, hi)
            }
            Shape::Simplex { t, .. } => {
                let c = cap(t)?;
                caps.push((0, n, c));
                (vec![1; n], vec![c - (n as i64 - 1); n])
            }
            Shape::Product { t1, i, t2, j } => {
                let (n1, n2) = (i - 1, *j);
                let c1 = cap(t1)?;
                let c2 = cap(t2)?;
                let mut hi = vec![c1 - (n1 as i64 - 1); n1];
                hi.extend(vec![c2 - (n2 as i64 - 1); n2]);
                if n1 > 0 {
                    caps.push((0, n1, c1));
                }
                caps.push((n1, n, c2));
                (vec![1; n], hi)
            }
        };
        Ok(ScaledDomain { lo, hi, caps })
    }

    /// Whether the closure of `(1/N) C` lies inside the open cube
    /// `(-1/2, 1/2)^(r-1)` once scaled to residues mod `q`, i.e. whether
    /// every integer point of `sC` has coordinates in `(-q/2, q/2)`.
    pub fn fits_half_circle(&self, s: &BigRational, q: u64) -> Result<bool> {
        let d = self.scaled_domain(s)?;
        if d.is_empty() {
            return Ok(true);
        }
        let q = q as i128;
        Ok(d.lo.iter().zip(&d.hi).all(|(&l, &h)| 2 * (l as i128) > -q && 2 * (h as i128) < q))
    }

    /// Exact membership of a real point of `sC` given as rationals.
    pub fn contains_scaled(&self, x: &[BigRational], s: &BigRational) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        match &self.shape {
            Shape::Box(b) => x
                .iter()
                .zip(b)
                .all(|(v, (lo, hi))| &(lo * s) <= v && v < &(hi * s)),
            Shape::Simplex { t, .. } => {
                x.iter().all(|v| v.is_positive())
                    && x.iter().fold(BigRational::zero(), |a, v| a + v) < t * s
            }
            Shape::Product { t1, i, t2, .. } => {
                let (first, second) = x.split_at(i - 1);
                let sum = |v: &[BigRational]| v.iter().fold(BigRational::zero(), |a, w| a + w);
                x.iter().all(|v| v.is_positive())
                    && (first.is_empty() || sum(first) < t1 * s)
                    && sum(second) < t2 * s
            }
        }
    }
}

impl fmt::Display for ConvexRegion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.shape {
            Shape::Box(b) => {
                let parts: Vec<String> = b
                    .iter()
                    .map(|(lo, hi)| format!("{},{}", format_rational(lo), format_rational(hi)))
                    .collect();
                write!(f, "box:{}", parts.join(";"))
            }
            Shape::Simplex { t, k } => write!(f, "simplex:{},{k}", format_rational(t)),
            Shape::Product { t1, i, t2, j } => {
                write!(f, "prod:{},{i};{},{j}", format_rational(t1), format_rational(t2))
            }
        }
    }
}

impl FromStr for ConvexRegion {
    type Err = Error;

    /// `box:a1,b1;a2,b2;...`, `simplex:t,k` or `prod:t1,i;t2,j`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::RegionSyntax(s.to_string());
        let (kind, body) = s.trim().split_once(':').ok_or_else(bad)?;
        let pairs: Vec<(&str, &str)> = body
            .split(';')
            .map(|p| p.split_once(',').ok_or_else(bad))
            .collect::<Result<_>>()?;
        let count = |x: &str| x.trim().parse::<usize>().map_err(|_| bad());
        match kind.trim() {
            "box" => ConvexRegion::new_box(
                pairs
                    .iter()
                    .map(|(a, b)| Ok((parse_rational(a)?, parse_rational(b)?)))
                    .collect::<Result<_>>()?,
            ),
            "simplex" if pairs.len() == 1 => {
                ConvexRegion::new_simplex(parse_rational(pairs[0].0)?, count(pairs[0].1)?)
            }
            "prod" if pairs.len() == 2 => ConvexRegion::new_product(
                parse_rational(pairs[0].0)?,
                count(pairs[0].1)?,
                parse_rational(pairs[1].0)?,
                count(pairs[1].1)?,
            ),
            _ => Err(bad()),
        }
    }
}

/// Integer points of a dilated region: inclusive per-coordinate bounds plus
/// upper bounds on sums over coordinate blocks `[start, end)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScaledDomain {
    pub lo: Vec<i64>,
    pub hi: Vec<i64>,
    pub caps: Vec<(usize, usize, i64)>,
}

impl ScaledDomain {
    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lo.iter().zip(&self.hi).any(|(l, h)| l > h)
            || self
                .caps
                .iter()
                .any(|&(a, b, c)| self.lo[a..b].iter().sum::<i64>() > c)
    }

    pub fn contains(&self, h: &[i64]) -> bool {
        h.len() == self.dim()
            && h.iter().zip(self.lo.iter().zip(&self.hi)).all(|(x, (l, u))| l <= x && x <= u)
            && self.caps.iter().all(|&(a, b, c)| h[a..b].iter().sum::<i64>() <= c)
    }
}

/// An assignment of a set partition to each of finitely many primes.
/// Primes carrying the all-singletons partition impose nothing and are
/// dropped.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartitionTuple {
    r: usize,
    parts: BTreeMap<u64, SetPartition>,
}

impl PartitionTuple {
    pub fn new(r: usize, assignments: impl IntoIterator<Item = (u64, SetPartition)>) -> Result<Self> {
        crate::partitions::check_r(r)?;
        let mut parts = BTreeMap::new();
        for (p, g) in assignments {
            if !is_prime(p) {
                return Err(Error::Invalid(format!("{p} is not prime")));
            }
            if g.r() != r {
                return Err(Error::Dimension { expected: r, got: g.r() });
            }
            if !g.is_finest() && parts.insert(p, g).is_some() {
                return Err(Error::Invalid(format!("prime {p} assigned twice")));
            }
        }
        Ok(PartitionTuple { r, parts })
    }

    pub fn trivial(r: usize) -> Result<Self> {
        Self::new(r, [])
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn assignments(&self) -> &BTreeMap<u64, SetPartition> {
        &self.parts
    }

    /// Product of the primes with a nontrivial partition.
    pub fn supp(&self) -> u64 {
        self.parts.keys().product()
    }

    /// `prod p^codim(G_p)`, the index of the lattice in `Z^(r-1)`.
    pub fn disc(&self) -> BigUint {
        self.parts
            .iter()
            .fold(BigUint::one(), |acc, (&p, g)| acc * BigUint::from(p).pow(g.codim() as u32))
    }

    /// `prod lambda(G_p)`; primes not listed contribute `lambda(finest) = 1`.
    pub fn lambda(&self, poset: &PartitionPoset) -> BigInt {
        self.parts.values().fold(BigInt::one(), |acc, g| {
            acc * poset.lambda(g).expect("partition belongs to the poset")
        })
    }

    pub fn lattice(&self) -> CongruenceLattice {
        CongruenceLattice::new(self.clone())
    }
}

/// Idempotent for one prime inside the CRT modulus of a coordinate.
#[derive(Clone, Debug)]
struct CrtTerm {
    p: u64,
    leader: usize,
    idempotent: u128,
}

/// `L(G)`: integer vectors whose reduction mod each listed prime lies in
/// the subspace `H_G`. Stored as congruence constraints, never as a basis.
#[derive(Clone, Debug)]
pub struct CongruenceLattice {
    tuple: PartitionTuple,
    leaders: Vec<(u64, Vec<usize>)>,
    // Per coordinate k: h_k is fixed modulo stride[k] by the partial sums
    // already chosen.
    stride: Vec<u64>,
    terms: Vec<Vec<CrtTerm>>,
}

fn inverse_mod(a: u64, m: u64) -> u64 {
    let (mut old_r, mut r) = ((a % m) as i128, m as i128);
    let (mut old_s, mut s) = (1i128, 0i128);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
    }
    old_s.rem_euclid(m as i128) as u64
}

impl CongruenceLattice {
    pub fn new(tuple: PartitionTuple) -> Self {
        let dim = tuple.r - 1;
        let leaders: Vec<(u64, Vec<usize>)> = tuple
            .parts
            .iter()
            .map(|(&p, g)| (p, g.block_leaders()))
            .collect();
        let mut stride = vec![1u64; dim];
        let mut terms = vec![Vec::new(); dim];
        for k in 0..dim {
            // element k+1 (0-based) must match its block leader mod p
            let constrained: Vec<(u64, usize)> = leaders
                .iter()
                .filter(|(_, l)| l[k + 1] < k + 1)
                .map(|(p, l)| (*p, l[k + 1]))
                .collect();
            let m: u64 = constrained.iter().map(|(p, _)| p).product();
            stride[k] = m;
            terms[k] = constrained
                .into_iter()
                .map(|(p, leader)| {
                    let co = m / p;
                    let idempotent = co as u128 * inverse_mod(co % p, p) as u128 % m as u128;
                    CrtTerm { p, leader, idempotent }
                })
                .collect();
        }
        CongruenceLattice {
            tuple,
            leaders,
            stride,
            terms,
        }
    }

    pub fn tuple(&self) -> &PartitionTuple {
        &self.tuple
    }

    pub fn dim(&self) -> usize {
        self.tuple.r - 1
    }

    pub fn disc(&self) -> BigUint {
        self.tuple.disc()
    }

    pub fn contains(&self, h: &[i64]) -> bool {
        if h.len() != self.dim() {
            return false;
        }
        self.leaders.iter().all(|(p, lead)| {
            let sums = crate::partitions::partial_sums_mod(h, *p);
            lead.iter().enumerate().all(|(i, &l)| sums[i] == sums[l])
        })
    }

    /// Upper bound on the number of candidates visited in `domain`.
    fn candidate_bound(&self, domain: &ScaledDomain) -> u128 {
        if domain.is_empty() {
            return 0;
        }
        domain
            .lo
            .iter()
            .zip(&domain.hi)
            .zip(&self.stride)
            .fold(1u128, |acc, ((&l, &h), &m)| {
                let width = (h - l + 1) as u128;
                acc.saturating_mul(width.div_ceil(m as u128))
            })
    }

    /// Visits every point of `domain` in the lattice, lexicographically.
    pub fn for_each_point(
        &self,
        domain: &ScaledDomain,
        budget: u64,
        estimate: impl Fn() -> String,
        mut visit: impl FnMut(&[i64]),
    ) -> Result<()> {
        if domain.dim() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: domain.dim(),
            });
        }
        if domain.is_empty() {
            return Ok(());
        }
        if self.candidate_bound(domain) > budget as u128 {
            return Err(Error::BudgetExceeded {
                estimate: estimate(),
                budget,
            });
        }
        let mut cap_of = vec![None; self.dim()];
        for (b, &(start, end, _)) in domain.caps.iter().enumerate() {
            for slot in &mut cap_of[start..end] {
                *slot = Some(b);
            }
        }
        let mut walk = Walk {
            lattice: self,
            domain,
            cap_of,
            block_sums: vec![0; domain.caps.len()],
            h: vec![0; self.dim()],
            sums: vec![0; self.dim() + 1],
        };
        walk.run(0, &mut visit);
        Ok(())
    }

    pub fn count_points(&self, domain: &ScaledDomain, budget: u64) -> Result<u64> {
        let mut n = 0u64;
        self.for_each_point(domain, budget, || "unknown".into(), |_| n += 1)?;
        Ok(n)
    }

    /// `(k * supp)^(r-1) / #(L cap [0, k * supp)^(r-1))`, which equals the
    /// index of the lattice because it is periodic modulo `supp`.
    pub fn index_by_counting(&self, tiles: u64) -> Result<BigRational> {
        let side = self.tuple.supp() as i64 * tiles as i64;
        let domain = ScaledDomain {
            lo: vec![0; self.dim()],
            hi: vec![side - 1; self.dim()],
            caps: vec![],
        };
        let count = self.count_points(&domain, u64::MAX)?;
        Ok(BigRational::new(
            BigInt::from(side).pow(self.dim() as u32),
            BigInt::from(count),
        ))
    }
}

struct Walk<'a> {
    lattice: &'a CongruenceLattice,
    domain: &'a ScaledDomain,
    cap_of: Vec<Option<usize>>,
    block_sums: Vec<i64>,
    h: Vec<i64>,
    sums: Vec<i64>,
}

impl Walk<'_> {
    fn run(&mut self, k: usize, visit: &mut impl FnMut(&[i64])) {
        if k == self.h.len() {
            visit(&self.h);
            return;
        }
        let m = self.lattice.stride[k];
        let mut hi = self.domain.hi[k];
        if let Some(b) = self.cap_of[k] {
            let (_, end, cap) = self.domain.caps[b];
            let reserved: i64 = self.domain.lo[k + 1..end].iter().sum();
            hi = hi.min(cap - self.block_sums[b] - reserved);
        }
        let lo = self.domain.lo[k];
        if lo > hi {
            return;
        }
        let target = self.target_residue(k);
        let first = lo + (target as i128 - lo as i128).rem_euclid(m as i128) as i64;
        let mut v = first;
        while v <= hi {
            self.h[k] = v;
            self.sums[k + 1] = self.sums[k] + v;
            if let Some(b) = self.cap_of[k] {
                self.block_sums[b] += v;
            }
            self.run(k + 1, visit);
            if let Some(b) = self.cap_of[k] {
                self.block_sums[b] -= v;
            }
            v += m as i64;
        }
    }

    /// Residue of `h_k` modulo `stride[k]` forced by the chosen partial sums.
    fn target_residue(&self, k: usize) -> u64 {
        let m = self.lattice.stride[k] as u128;
        if m == 1 {
            return 0;
        }
        let mut acc = 0u128;
        for t in &self.lattice.terms[k] {
            let want = (self.sums[t.leader] - self.sums[k]).rem_euclid(t.p as i64) as u128;
            acc = (acc + want * t.idempotent % m) % m;
        }
        acc as u64
    }
}

/// Expected lattice count `vol(sC) / disc(L)`.
pub fn expected_count(region: &ConvexRegion, s: &BigRational, lattice: &CongruenceLattice) -> BigRational {
    region.volume() * s.pow(region.dim() as i32) / BigRational::from_integer(lattice.disc().into())
}

/// Integer points of `sC` lying in `L`, in lexicographic order.
pub fn lattice_points(
    region: &ConvexRegion,
    s: &BigRational,
    lattice: &CongruenceLattice,
    budget: u64,
) -> Result<Vec<Vec<i64>>> {
    let domain = region.scaled_domain(s)?;
    let mut out = Vec::new();
    lattice.for_each_point(
        &domain,
        budget,
        || format!("{:.1}", expected_count(region, s, lattice).to_f64().unwrap_or(f64::INFINITY)),
        |h| out.push(h.to_vec()),
    )?;
    Ok(out)
}

pub fn count_lattice_points(
    region: &ConvexRegion,
    s: &BigRational,
    lattice: &CongruenceLattice,
    budget: u64,
) -> Result<u64> {
    let domain = region.scaled_domain(s)?;
    let mut n = 0u64;
    lattice.for_each_point(
        &domain,
        budget,
        || format!("{:.1}", expected_count(region, s, lattice).to_f64().unwrap_or(f64::INFINITY)),
        |_| n += 1,
    )?;
    Ok(n)
}

/// True when `supp(G) > diam1(sC)^(r(r-1)/2)`; then every point of
/// `sC cap L(G)` sits on a wall, so a wall-free `C` meets `L(G)` nowhere.
pub fn avoid_walls_prune(tuple: &PartitionTuple, region: &ConvexRegion, s: &BigRational) -> bool {
    let r = tuple.r() as i32;
    let reach = s * region.diam1();
    BigRational::from_integer(tuple.supp().into()) > reach.pow(r * (r - 1) / 2)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LipschitzRow {
    pub s: BigRational,
    pub count: u64,
    /// `vol(sC) / disc(L)`.
    pub expected: BigRational,
    /// `count - expected`.
    pub residual: BigRational,
    /// `residual / s^(r-2)`.
    pub scaled_residual: f64,
}

/// Lattice counts against `vol(sC)/disc` over a list of dilations.
pub fn lipschitz_check(
    region: &ConvexRegion,
    s_values: &[BigRational],
    lattice: &CongruenceLattice,
    budget: u64,
) -> Result<Vec<LipschitzRow>> {
    s_values
        .iter()
        .map(|s| {
            let count = count_lattice_points(region, s, lattice, budget)?;
            let expected = expected_count(region, s, lattice);
            let residual = BigRational::from_integer(count.into()) - &expected;
            let scale = s.to_f64().unwrap_or(f64::NAN).powi(region.dim() as i32 - 1);
            Ok(LipschitzRow {
                s: s.clone(),
                count,
                scaled_residual: residual.to_f64().unwrap_or(f64::NAN) / scale,
                expected,
                residual,
            })
        })
        .collect()
}

/// Rigorous residual bound for a box and a lattice periodic modulo `m`:
/// `sC` sits between the unions of whole and of touched `m`-cubes, each of
/// which holds exactly `m^(r-1)/disc` lattice points.
pub fn box_residual_bound(region: &ConvexRegion, s: &BigRational, lattice: &CongruenceLattice) -> Option<BigRational> {
    let Shape::Box(bounds) = region.shape() else {
        return None;
    };
    let m = BigRational::from_integer(lattice.tuple().supp().into());
    let (mut outer, mut inner) = (BigRational::one(), BigRational::one());
    for (lo, hi) in bounds {
        let len = ((hi - lo) * s).max(BigRational::zero());
        outer *= &len + &m;
        inner *= (&len - &m).max(BigRational::zero());
    }
    Some((outer - inner) / BigRational::from_integer(lattice.disc().into()))
}
