use std::collections::BTreeSet;

use num_bigint::BigUint;
use num_rational::{BigRational, Ratio};
use proptest::prelude::*;

use qr_spacings::arith::{enumerate_squares, make_modulus, squares_by_crt, SquareFreeModulus};
use qr_spacings::correlations::{correlate, correlation_circle, CorrelationOptions, CorrelationRecord, Method};
use qr_spacings::lattices::{ConvexRegion, PartitionTuple};
use qr_spacings::partitions::{delta, enumerate_partitions, PartitionPoset};
use qr_spacings::spacings::{
    joint_sandwich_g, nij_counts, nk_counts, normalized_gaps, sandwich_g, CirclePointSet,
};

fn square_free(q: u64) -> Option<SquareFreeModulus> {
    make_modulus(q).ok()
}

fn point_set(max_n: usize, scale: u64) -> impl Strategy<Value = CirclePointSet> {
    prop::collection::btree_set(0..scale, 2..=max_n)
        .prop_map(move |pts| CirclePointSet::new(scale, pts.into_iter().collect()).unwrap())
}

/// `(i, j)`-tuples by definition: `i + j` points in counter-clockwise order
/// from some start, first `i` spanning at most `x`, last `j + 1` at most `y`.
fn brute_nij(s: &CirclePointSet, x: Ratio<u64>, y: Ratio<u64>, i: usize, j: usize) -> u64 {
    let n = s.len();
    let scale = s.scale();
    let pts = s.points();
    let fwd = |a: usize, b: usize| (pts[b] + scale - pts[a]) % scale;
    let le = |d: u64, t: Ratio<u64>| d as u128 * *t.denom() as u128 <= *t.numer() as u128 * scale as u128;
    let mut count = 0;
    for a in 0..n {
        // other points ahead of a, nearest first, within x + y
        let ahead: Vec<usize> = (1..n).map(|o| (a + o) % n).filter(|&b| le(fwd(a, b), x + y)).collect();
        let k = i + j - 1;
        if ahead.len() < k {
            continue;
        }
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            let chosen: Vec<usize> = std::iter::once(a).chain(idx.iter().map(|&t| ahead[t])).collect();
            if le(fwd(chosen[0], chosen[i - 1]), x) && le(fwd(chosen[i - 1], chosen[i + j - 1]), y) {
                count += 1;
            }
            // next k-combination of 0..ahead.len()
            let m = ahead.len();
            let mut t = k;
            while t > 0 && idx[t - 1] == m - k + t - 1 {
                t -= 1;
            }
            if t == 0 {
                break;
            }
            idx[t - 1] += 1;
            for u in t..k {
                idx[u] = idx[u - 1] + 1;
            }
        }
    }
    count
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn residue_count_matches_product(q in 1u64..2_000_000) {
        if let Some(m) = square_free(q) {
            prop_assert_eq!(enumerate_squares(&m).unwrap().len() as u64, m.n_residues());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn crt_matches_brute_force(q in 1u64..3000) {
        if let Some(m) = square_free(q) {
            let brute: BTreeSet<u64> = (0..q).map(|x| x * x % q).collect();
            let crt = squares_by_crt(&m).unwrap();
            prop_assert_eq!(crt.residues(), &brute.into_iter().collect::<Vec<_>>()[..]);
        }
    }

    #[test]
    fn delta_decomposition(r in 2usize..=5, pi in 0usize..6, seed in any::<u64>()) {
        let p = [3u64, 5, 7, 11, 13, 17][pi];
        let poset = PartitionPoset::new(r).unwrap();
        let h: Vec<i64> = (0..r - 1).map(|k| ((seed >> (8 * k)) % p) as i64).collect();
        prop_assert_eq!(poset.delta_decomposition(&h, p).unwrap(), delta(&h, p, r).unwrap() as i64);
    }

    #[test]
    fn lattice_closed_under_addition(r in 2usize..=4, seed in any::<u64>(), a in prop::collection::vec(-60i64..60, 3), b in prop::collection::vec(-60i64..60, 3)) {
        let parts: Vec<_> = enumerate_partitions(r).unwrap().into_iter().filter(|p| !p.is_finest()).collect();
        let chosen = [3u64, 5, 7]
            .iter()
            .enumerate()
            .map(|(k, &p)| (p, parts[(seed >> (8 * k)) as usize % parts.len()].clone()));
        let lattice = PartitionTuple::new(r, chosen).unwrap().lattice();
        let supp = lattice.tuple().supp() as i64;
        // project arbitrary vectors into L by scaling with supp, then test sums of members
        let (a, b) = (&a[..r - 1], &b[..r - 1]);
        let ma: Vec<i64> = a.iter().map(|v| v * supp).collect();
        prop_assert!(lattice.contains(&ma));
        let members: Vec<Vec<i64>> = (0..supp.pow(r as u32 - 1).min(400))
            .map(|i| (0..r - 1).map(|k| (i / supp.pow(k as u32)) % supp + b[k]).collect::<Vec<i64>>())
            .filter(|h| lattice.contains(h))
            .collect();
        for u in members.iter().take(20) {
            for v in members.iter().take(20) {
                let sum: Vec<i64> = u.iter().zip(v).map(|(x, y)| x + y).collect();
                let neg: Vec<i64> = u.iter().map(|x| -x).collect();
                prop_assert!(lattice.contains(&sum));
                prop_assert!(lattice.contains(&neg));
            }
        }
    }

    #[test]
    fn pair_sandwich_on_random_sets(s in point_set(200, 100_000), x in 1u64..50_000) {
        let sw = sandwich_g(&s, &Ratio::new(x, 100_000), &[1, 2, 3]).unwrap();
        prop_assert!(sw.identity_holds());
        prop_assert!(sw.brackets_hold());
    }

    #[test]
    fn joint_sandwich_on_random_sets(s in point_set(200, 100_000), x in 1u64..25_000, y in 1u64..25_000) {
        let sw = joint_sandwich_g(&s, &Ratio::new(x, 100_000), &Ratio::new(y, 100_000), &[1, 2, 3]).unwrap();
        prop_assert!(sw.identity_holds());
        prop_assert!(sw.brackets_hold());
    }

    #[test]
    fn normalized_gaps_have_mean_one(s in point_set(300, 1_000_003)) {
        let total = normalized_gaps(&s).unwrap().into_iter().fold(Ratio::from_integer(0u64), |a, b| a + b);
        prop_assert_eq!(total, Ratio::from_integer(s.len() as u64));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn nij_windowed_matches_definition(s in point_set(30, 1000), x in 1u64..250, y in 1u64..250, i in 2usize..=4, j in 1usize..=3) {
        let (x, y) = (Ratio::new(x, 1000), Ratio::new(y, 1000));
        prop_assert_eq!(nij_counts(&s, &x, &y, i, j).unwrap(), BigUint::from(brute_nij(&s, x, y, i, j)));
    }

    #[test]
    fn nk_monotone_in_x(s in point_set(60, 1000), x in 1u64..498) {
        let a = nk_counts(&s, &Ratio::new(x, 1000), 5).unwrap();
        let b = nk_counts(&s, &Ratio::new(x + 1, 1000), 5).unwrap();
        prop_assert!(a.iter().zip(&b).all(|(u, v)| u <= v));
    }

    #[test]
    fn record_json_round_trips(qi in 0usize..3, lo in 1i64..4, len in 1i64..4) {
        let q = [15u64, 21, 105][qi];
        let c: ConvexRegion = format!("box:{lo}/2,{}/2", lo + len).parse().unwrap();
        let res = correlate(q, 2, &c, Method::LatticeFormula, &CorrelationOptions::default()).unwrap();
        let text = serde_json::to_string(&CorrelationRecord::new(&res, None)).unwrap();
        let back: CorrelationRecord = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(serde_json::to_string(&back).unwrap(), text);
    }
}

#[test]
fn mobius_inverts_zeta() {
    for r in 2..=5 {
        let poset = PartitionPoset::new(r).unwrap();
        let n = poset.len();
        for f in 0..n {
            for g in 0..n {
                if !poset.refines_idx(f, g) {
                    continue;
                }
                let sum: i64 = (0..n)
                    .filter(|&h| poset.refines_idx(f, h) && poset.refines_idx(h, g))
                    .map(|h| poset.mobius_idx(f, h))
                    .sum();
                assert_eq!(sum, (f == g) as i64, "r={r}");
            }
        }
    }
}

#[test]
fn pair_counts_match_circle_correlation() {
    for q in [15u64, 105] {
        let set = enumerate_squares(&make_modulus(q).unwrap()).unwrap();
        let pts = CirclePointSet::from_residues(&set);
        let n = set.len() as u64;
        for x in [1u64, 2] {
            // N_2(x/N)/N against R_2(x Delta^1)
            let n2 = nk_counts(&pts, &Ratio::new(x, n), 2).unwrap()[0].clone();
            let region: ConvexRegion = format!("simplex:{x},2").parse().unwrap();
            let r2 = correlation_circle(&set, 2, &region).unwrap().value;
            assert_eq!(r2, BigRational::new(n2.into(), n.into()), "q={q} x={x}");
        }
    }
}
