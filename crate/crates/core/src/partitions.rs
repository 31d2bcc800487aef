//! Set partitions of `{1..r}` ordered by refinement, the poset's Möbius
//! function, and the weights `lambda(G)` that expand `2^(r - r_eff(h))` as a
//! combination of subspace indicators.
//!
//! A partition `G` cuts out the subgroup `H_G` of `(Z/pZ)^(r-1)` on which
//! `sigma_ij(h) = h_i + ... + h_(j-1)` vanishes whenever `i` and `j` share a
//! block. Writing `P_1 = 0`, `P_j = sigma_1j(h)`, membership just says the
//! partial sums are constant on each block.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;

use crate::error::{Error, Result};

pub const MIN_R: usize = 2;
pub const MAX_R: usize = 6;

pub(crate) fn check_r(r: usize) -> Result<()> {
    if (MIN_R..=MAX_R).contains(&r) {
        Ok(())
    } else {
        Err(Error::TupleLength {
            r,
            min: MIN_R,
            max: MAX_R,
        })
    }
}

/// A partition of `{1..r}` in restricted-growth form: `labels[i]` is the
/// block of element `i+1`, and blocks are numbered by first appearance, so
/// they come out sorted by their minimum element.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SetPartition {
    labels: Vec<u8>,
}

impl SetPartition {
    /// Builds a partition from restricted-growth labels.
    pub fn from_labels(labels: Vec<u8>) -> Result<Self> {
        check_r(labels.len())?;
        let mut next = 0u8;
        for &l in &labels {
            if l > next {
                return Err(Error::Invalid(format!(
                    "labels {labels:?} are not a restricted-growth string"
                )));
            }
            if l == next {
                next += 1;
            }
        }
        Ok(SetPartition { labels })
    }

    /// Builds a partition from 1-based blocks, e.g. `[[1, 2], [3]]`.
    pub fn from_blocks(r: usize, blocks: &[&[usize]]) -> Result<Self> {
        check_r(r)?;
        let mut raw = vec![u8::MAX; r];
        for (b, block) in blocks.iter().enumerate() {
            for &e in *block {
                if e == 0 || e > r || raw[e - 1] != u8::MAX {
                    return Err(Error::Invalid(format!("bad block list {blocks:?} for r = {r}")));
                }
                raw[e - 1] = b as u8;
            }
        }
        if raw.contains(&u8::MAX) {
            return Err(Error::Invalid(format!("blocks {blocks:?} do not cover 1..{r}")));
        }
        Ok(Self::canonical(&raw))
    }

    fn canonical(raw: &[u8]) -> Self {
        let mut map = HashMap::new();
        let labels = raw
            .iter()
            .map(|l| {
                let n = map.len() as u8;
                *map.entry(*l).or_insert(n)
            })
            .collect();
        SetPartition { labels }
    }

    /// All singletons, the minimal element.
    pub fn finest(r: usize) -> Self {
        SetPartition {
            labels: (0..r as u8).collect(),
        }
    }

    /// One block, the maximal element.
    pub fn coarsest(r: usize) -> Self {
        SetPartition { labels: vec![0; r] }
    }

    pub fn r(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn n_blocks(&self) -> usize {
        self.labels.iter().copied().max().map_or(0, |m| m as usize + 1)
    }

    /// `r - |G|`, the codimension of `H_G` (and of `V_G`).
    pub fn codim(&self) -> usize {
        self.r() - self.n_blocks()
    }

    pub fn is_finest(&self) -> bool {
        self.n_blocks() == self.r()
    }

    /// Blocks as 1-based element lists, sorted by minimum.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_blocks()];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l as usize].push(i + 1);
        }
        out
    }

    /// For each 0-based element, the 0-based minimum of its block.
    pub(crate) fn block_leaders(&self) -> Vec<usize> {
        let mut first = [usize::MAX; MAX_R];
        self.labels
            .iter()
            .enumerate()
            .map(|(i, &l)| {
                let f = &mut first[l as usize];
                if *f == usize::MAX {
                    *f = i;
                }
                *f
            })
            .collect()
    }

    /// Whether every block of `self` lies inside some block of `other`.
    pub fn refines(&self, other: &SetPartition) -> Result<bool> {
        if self.r() != other.r() {
            return Err(Error::Dimension {
                expected: self.r(),
                got: other.r(),
            });
        }
        // F refines G iff F's label determines G's label.
        let mut image = [u8::MAX; MAX_R];
        for (&f, &g) in self.labels.iter().zip(&other.labels) {
            let slot = &mut image[f as usize];
            if *slot == u8::MAX {
                *slot = g;
            } else if *slot != g {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

impl fmt::Display for SetPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for block in self.blocks() {
            let inner: Vec<String> = block.iter().map(|e| e.to_string()).collect();
            write!(f, "{{{}}}", inner.join(","))?;
        }
        Ok(())
    }
}

/// All partitions of `{1..r}` in lexicographic restricted-growth order.
pub fn enumerate_partitions(r: usize) -> Result<Vec<SetPartition>> {
    check_r(r)?;
    fn extend(prefix: &mut Vec<u8>, max: u8, r: usize, out: &mut Vec<SetPartition>) {
        if prefix.len() == r {
            out.push(SetPartition {
                labels: prefix.clone(),
            });
            return;
        }
        for l in 0..=max + 1 {
            prefix.push(l);
            extend(prefix, max.max(l), r, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    // element 1 always opens block 0
    extend(&mut vec![0u8], 0, r, &mut out);
    Ok(out)
}

/// Partial sums `P_1 = 0, P_j = h_1 + ... + h_(j-1)` reduced mod `p`.
pub(crate) fn partial_sums_mod(h: &[i64], p: u64) -> Vec<u64> {
    let p = p as i64;
    let mut out = Vec::with_capacity(h.len() + 1);
    let mut acc = 0i64;
    out.push(0);
    for &x in h {
        acc = (acc + x.rem_euclid(p)) % p;
        out.push(acc as u64);
    }
    out
}

/// Number of distinct values among the roots `sigma_1j(h) mod p`, i.e. the
/// number of distinct coordinates of any solution of `y_i - y_(i+1) = h_i`.
pub fn r_eff(h: &[i64], p: u64) -> usize {
    let mut sums = partial_sums_mod(h, p);
    sums.sort_unstable();
    sums.dedup();
    sums.len()
}

/// The partition of `{1..r}` into classes of equal partial sums: the unique
/// `F` with `h` in the regular part of `H_F`.
pub fn kernel_partition(h: &[i64], p: u64) -> Result<SetPartition> {
    let sums = partial_sums_mod(h, p);
    check_r(sums.len())?;
    let mut seen: Vec<u64> = Vec::new();
    let labels = sums
        .iter()
        .map(|s| match seen.iter().position(|x| x == s) {
            Some(i) => i as u8,
            None => {
                seen.push(*s);
                (seen.len() - 1) as u8
            }
        })
        .collect();
    Ok(SetPartition { labels })
}

/// Indicator of `h mod p` lying in `H_G`.
pub fn delta_g(h: &[i64], p: u64, g: &SetPartition) -> Result<bool> {
    if h.len() + 1 != g.r() {
        return Err(Error::Dimension {
            expected: g.r() - 1,
            got: h.len(),
        });
    }
    let sums = partial_sums_mod(h, p);
    Ok(g
        .block_leaders()
        .iter()
        .enumerate()
        .all(|(i, &lead)| sums[i] == sums[lead]))
}

/// `Delta(h, p) = 2^(r - r_eff(h))`.
pub fn delta(h: &[i64], p: u64, r: usize) -> Result<u64> {
    if h.len() + 1 != r {
        return Err(Error::Dimension {
            expected: r - 1,
            got: h.len(),
        });
    }
    Ok(1 << (r - r_eff(h, p)))
}

/// Partitions of `{1..r}` with their refinement order, Möbius function and
/// lambda weights.
#[derive(Clone, Debug)]
pub struct PartitionPoset {
    r: usize,
    parts: Vec<SetPartition>,
    index: HashMap<SetPartition, usize>,
    leq: Vec<Vec<bool>>,
    mobius: Vec<Vec<i64>>,
    lambda: Vec<i64>,
}

impl PartitionPoset {
    pub fn new(r: usize) -> Result<Self> {
        let parts = enumerate_partitions(r)?;
        let n = parts.len();
        let index = parts.iter().cloned().enumerate().map(|(i, p)| (p, i)).collect();
        let leq: Vec<Vec<bool>> = parts
            .iter()
            .map(|f| parts.iter().map(|g| f.refines(g).unwrap()).collect())
            .collect();

        // Strict refinement lowers the block count, so visiting G in order of
        // decreasing block count sees every K < G before G itself.
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&i| std::cmp::Reverse(parts[i].n_blocks()));
        let mut mobius = vec![vec![0i64; n]; n];
        for f in 0..n {
            for &g in &order {
                if !leq[f][g] {
                    continue;
                }
                mobius[f][g] = if f == g {
                    1
                } else {
                    -(0..n)
                        .filter(|&k| k != g && leq[f][k] && leq[k][g])
                        .map(|k| mobius[f][k])
                        .sum::<i64>()
                };
            }
        }
        let lambda = (0..n)
            .map(|g| {
                (0..n)
                    .filter(|&f| leq[f][g])
                    .map(|f| mobius[f][g] << parts[f].codim())
                    .sum()
            })
            .collect();
        Ok(PartitionPoset {
            r,
            parts,
            index,
            leq,
            mobius,
            lambda,
        })
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn partitions(&self) -> &[SetPartition] {
        &self.parts
    }

    pub fn index_of(&self, g: &SetPartition) -> Option<usize> {
        self.index.get(g).copied()
    }

    pub fn refines_idx(&self, f: usize, g: usize) -> bool {
        self.leq[f][g]
    }

    /// `mu(F, G)`; zero when `F` does not refine `G`.
    pub fn mobius(&self, f: &SetPartition, g: &SetPartition) -> i64 {
        match (self.index_of(f), self.index_of(g)) {
            (Some(i), Some(j)) => self.mobius[i][j],
            _ => 0,
        }
    }

    pub fn mobius_idx(&self, f: usize, g: usize) -> i64 {
        self.mobius[f][g]
    }

    /// `lambda(G) = sum_{F <= G} mu(F, G) 2^codim(F)`.
    pub fn lambda(&self, g: &SetPartition) -> Option<i64> {
        self.index_of(g).map(|i| self.lambda[i])
    }

    pub fn lambda_idx(&self, g: usize) -> i64 {
        self.lambda[g]
    }

    /// `sum_G lambda(G) delta_G(h)`.
    pub fn delta_decomposition(&self, h: &[i64], p: u64) -> Result<i64> {
        let mut total = 0;
        for (g, part) in self.parts.iter().enumerate() {
            if delta_g(h, p, part)? {
                total += self.lambda[g];
            }
        }
        Ok(total)
    }

    /// Writes `r,partition,blocks,codim,lambda,mu_finest` rows.
    pub fn write_lambda_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "r,partition,blocks,codim,lambda,mu_from_finest")?;
        let finest = self.index_of(&SetPartition::finest(self.r)).unwrap();
        for (g, part) in self.parts.iter().enumerate() {
            writeln!(
                w,
                "{},\"{}\",{},{},{},{}",
                self.r,
                part,
                part.n_blocks(),
                part.codim(),
                self.lambda[g],
                self.mobius[finest][g]
            )?;
        }
        Ok(())
    }

    /// Writes the full Möbius table as `r,F,G,mu` rows over comparable pairs.
    pub fn write_mobius_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "r,lower,upper,mu")?;
        for (f, pf) in self.parts.iter().enumerate() {
            for (g, pg) in self.parts.iter().enumerate() {
                if self.leq[f][g] {
                    writeln!(w, "{},\"{}\",\"{}\",{}", self.r, pf, pg, self.mobius[f][g])?;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn part(r: usize, blocks: &[&[usize]]) -> SetPartition {
        SetPartition::from_blocks(r, blocks).unwrap()
    }

    #[test]
    fn bell_numbers() {
        let counts: Vec<usize> = (2..=6).map(|r| enumerate_partitions(r).unwrap().len()).collect();
        assert_eq!(counts, vec![2, 5, 15, 52, 203]);
        let two = enumerate_partitions(2).unwrap();
        assert_eq!(two[0], part(2, &[&[1, 2]]));
        assert_eq!(two[1], part(2, &[&[1], &[2]]));
        assert!(enumerate_partitions(1).is_err());
        assert!(enumerate_partitions(7).is_err());
    }

    #[test]
    fn partitions_are_distinct_and_canonical() {
        for r in 2..=6 {
            let all = enumerate_partitions(r).unwrap();
            let mut dedup = all.clone();
            dedup.sort();
            dedup.dedup();
            assert_eq!(dedup.len(), all.len());
            for p in &all {
                assert_eq!(&SetPartition::from_labels(p.labels().to_vec()).unwrap(), p);
                let mins: Vec<usize> = p.blocks().iter().map(|b| b[0]).collect();
                assert!(mins.windows(2).all(|w| w[0] < w[1]));
            }
        }
    }

    #[test]
    fn refinement_examples() {
        let fine = SetPartition::finest(3);
        let a = part(3, &[&[1, 2], &[3]]);
        let b = part(3, &[&[1, 3], &[2]]);
        assert!(fine.refines(&a).unwrap());
        assert!(!a.refines(&b).unwrap());
        for p in enumerate_partitions(4).unwrap() {
            assert!(p.refines(&p).unwrap());
        }
        assert!(a.refines(&SetPartition::finest(4)).is_err());
    }

    #[test]
    fn mobius_examples() {
        let p2 = PartitionPoset::new(2).unwrap();
        assert_eq!(p2.mobius(&SetPartition::finest(2), &SetPartition::coarsest(2)), -1);
        let p3 = PartitionPoset::new(3).unwrap();
        assert_eq!(p3.mobius(&SetPartition::finest(3), &SetPartition::coarsest(3)), 2);
        for g in p3.partitions() {
            assert_eq!(p3.mobius(g, g), 1);
        }
        let a = part(3, &[&[1, 2], &[3]]);
        let b = part(3, &[&[1, 3], &[2]]);
        assert_eq!(p3.mobius(&a, &b), 0);
    }

    #[test]
    fn mobius_inversion_identity() {
        for r in 2..=5 {
            let poset = PartitionPoset::new(r).unwrap();
            let n = poset.len();
            for f in 0..n {
                for g in 0..n {
                    if !poset.refines_idx(f, g) {
                        continue;
                    }
                    let s: i64 = (0..n)
                        .filter(|&k| poset.refines_idx(f, k) && poset.refines_idx(k, g))
                        .map(|k| poset.mobius_idx(k, g))
                        .sum();
                    assert_eq!(s, (f == g) as i64, "r={r} f={f} g={g}");
                }
            }
        }
    }

    #[test]
    fn lambda_examples() {
        let p2 = PartitionPoset::new(2).unwrap();
        assert_eq!(p2.lambda(&SetPartition::finest(2)), Some(1));
        assert_eq!(p2.lambda(&SetPartition::coarsest(2)), Some(1));
        let p3 = PartitionPoset::new(3).unwrap();
        assert_eq!(p3.lambda(&SetPartition::coarsest(3)), Some(0));
        assert_eq!(p3.lambda(&part(3, &[&[1, 2], &[3]])), Some(1));
        assert_eq!(p3.lambda(&SetPartition::finest(3)), Some(1));
    }

    #[test]
    fn r_eff_examples() {
        assert_eq!(r_eff(&[0], 7), 1);
        assert_eq!(r_eff(&[0, 2], 7), 2);
        assert_eq!(r_eff(&[3, 4], 7), 2);
        assert_eq!(r_eff(&[1, 1], 7), 3);
        assert_eq!(r_eff(&[-3, 3], 7), 2);
    }

    #[test]
    fn delta_g_examples() {
        let fine = SetPartition::finest(3);
        for h in [[0i64, 0], [1, 2], [5, 6]] {
            assert!(delta_g(&h, 7, &fine).unwrap());
        }
        assert!(delta_g(&[0, 0], 7, &SetPartition::coarsest(3)).unwrap());
        assert!(delta_g(&[7, 3], 7, &part(3, &[&[1, 2], &[3]])).unwrap());
        assert!(!delta_g(&[7, 3], 7, &part(3, &[&[1, 3], &[2]])).unwrap());
        assert!(delta_g(&[1], 7, &fine).is_err());
    }

    #[test]
    fn delta_examples() {
        assert_eq!(delta(&[1], 5, 2).unwrap(), 1);
        assert_eq!(delta(&[0], 5, 2).unwrap(), 2);
        assert_eq!(delta(&[0, 2], 7, 3).unwrap(), 2);
        let p3 = PartitionPoset::new(3).unwrap();
        assert_eq!(p3.delta_decomposition(&[0, 2], 7).unwrap(), 2);
    }

    #[test]
    fn kernel_partition_matches_r_eff() {
        let k = kernel_partition(&[3, 4], 7).unwrap();
        assert_eq!(k, part(3, &[&[1, 3], &[2]]));
        assert_eq!(k.n_blocks(), r_eff(&[3, 4], 7));
    }

    #[test]
    fn csv_dump_has_one_row_per_partition() {
        let poset = PartitionPoset::new(3).unwrap();
        let mut buf = Vec::new();
        poset.write_lambda_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 6);
        assert!(text.contains("3,\"{1,2,3}\",1,2,0,2"));
    }
}
