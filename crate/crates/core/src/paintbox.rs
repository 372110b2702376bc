//! Paintbox samplers: the univariate paintbox, the outer-dislocation
//! paintbox acting on inner-block indices, and the distinguished bivariate
//! paintbox resolving an inner dislocation. Plus the empirical estimators
//! that invert them at large n.

use crate::error::Result;
use crate::mass::{canonicalize_bivariate, validate_mass, BivariateMassPartition, MassPartition};
use crate::partitions::{DistinguishedNestedPartition, NestedPartition, Partition};
use crate::rng::RngHandle;

/// Where one element of a fragmenting inner block lands. Indices are 0-based
/// into the atom's `u` / `s_bar` / row vectors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum InnerLabel {
    /// Piece l of the mother outer block.
    MotherBlock(usize),
    /// Singleton inner block, stays in the mother outer block.
    MotherDust,
    /// Piece l inside new outer block k.
    New(usize, usize),
    /// Singleton inner block inside new outer block k.
    NewDust(usize),
    /// Singleton inner block in its own fresh outer block.
    Isolated,
}

/// Result of one inner dislocation on a block of size m, before it is
/// grafted back into the ambient state: labels parallel to the block's
/// elements and the induced split on [m] with the mother marked.
#[derive(Clone, Debug)]
pub struct InnerSplitOutcome {
    pub block: Vec<usize>,
    pub labels: Vec<InnerLabel>,
    pub split: DistinguishedNestedPartition,
}

/// Interval index for a uniform draw against right endpoints `cum`
/// (ascending); returns `cum.len()` for the dust region beyond them.
fn locate(cum: &[f64], u: f64) -> usize {
    cum.partition_point(|&e| e <= u)
}

/// Interval of the part layout of s that u falls into, None for dust.
pub fn univariate_label_of(s: &MassPartition, u: f64) -> Option<usize> {
    let mut acc = 0.0;
    for (i, &x) in s.parts().iter().enumerate() {
        acc += x;
        if u < acc {
            return Some(i);
        }
    }
    None
}

/// Drop n i.i.d. uniforms into the intervals of s; same interval, same
/// block; dust draws become singletons.
pub fn sample_univariate(s: &MassPartition, n: usize, rng: &mut RngHandle) -> Partition {
    assert!(n >= 1);
    let mut cum = Vec::with_capacity(s.parts().len());
    let mut acc = 0.0;
    for &x in s.parts() {
        acc += x;
        cum.push(acc);
    }
    let k = cum.len();
    // Provisional labels: interval index for shared intervals, fresh labels
    // for dust; canonicalized by the constructor.
    let mut interval_label: Vec<Option<usize>> = vec![None; k];
    let mut next = 0usize;
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let idx = locate(&cum, rng.uniform());
        let label = if idx < k {
            *interval_label[idx].get_or_insert_with(|| {
                let l = next;
                next += 1;
                l
            })
        } else {
            let l = next;
            next += 1;
            l
        };
        labels.push(label);
    }
    Partition::from_assignment(&labels)
}

/// Outer dislocation: regroup the k_inner inner blocks of one outer block.
/// Identical mechanics to the univariate paintbox on the index set.
pub fn sample_outer(s: &MassPartition, k_inner: usize, rng: &mut RngHandle) -> Partition {
    sample_univariate(s, k_inner, rng)
}

/// One uniform draw against the full bivariate layout:
/// [0, ū) mother (pieces then dust), then per new block k its pieces and
/// dust, then isolated elements on [ū + Σ s̄, 1].
pub fn inner_label_of(p: &BivariateMassPartition, u: f64) -> InnerLabel {
    if u < p.u_bar() {
        let cum_u: Vec<f64> = p
            .u()
            .iter()
            .scan(0.0, |a, &x| {
                *a += x;
                Some(*a)
            })
            .collect();
        let l = locate(&cum_u, u);
        if l < cum_u.len() {
            return InnerLabel::MotherBlock(l);
        }
        return InnerLabel::MotherDust;
    }
    let mut left = p.u_bar();
    for (k, &bar) in p.s_bar().iter().enumerate() {
        let right = left + bar;
        if u < right {
            let mut acc = left;
            for (l, &x) in p.row(k).iter().enumerate() {
                acc += x;
                if u < acc {
                    return InnerLabel::New(k, l);
                }
            }
            return InnerLabel::NewDust(k);
        }
        left = right;
    }
    InnerLabel::Isolated
}

/// Resolve one inner dislocation: label each element of `block` (uniforms in
/// the given element order) and build the induced split on the block.
pub fn sample_inner(
    p: &BivariateMassPartition,
    block: &[usize],
    rng: &mut RngHandle,
) -> InnerSplitOutcome {
    assert!(!block.is_empty());
    let labels: Vec<InnerLabel> = block
        .iter()
        .map(|_| inner_label_of(p, rng.uniform()))
        .collect();
    let split = split_from_labels(&labels);
    InnerSplitOutcome {
        block: block.to_vec(),
        labels,
        split,
    }
}

/// Build the DistinguishedNestedPartition on [m] induced by per-element
/// labels: inner blocks group equal shareable labels, outer blocks group by
/// destination, the mother outer block is the starred one.
pub fn split_from_labels(labels: &[InnerLabel]) -> DistinguishedNestedPartition {
    let m = labels.len();
    let mut zeta = vec![0usize; m];
    let mut xi = vec![0usize; m];
    let mut zeta_next = 0usize;
    let mut xi_next = 0usize;
    let mut zeta_seen: std::collections::HashMap<InnerLabel, usize> =
        std::collections::HashMap::new();
    // Outer destinations: mother, New k, or fresh per isolated element.
    #[derive(PartialEq, Eq, Hash)]
    enum Dest {
        Mother,
        NewBlock(usize),
    }
    let mut xi_seen: std::collections::HashMap<Dest, usize> = std::collections::HashMap::new();
    let mut star: Option<usize> = None;
    for (i, &lab) in labels.iter().enumerate() {
        let shareable = matches!(lab, InnerLabel::MotherBlock(_) | InnerLabel::New(_, _));
        zeta[i] = if shareable {
            *zeta_seen.entry(lab).or_insert_with(|| {
                let z = zeta_next;
                zeta_next += 1;
                z
            })
        } else {
            let z = zeta_next;
            zeta_next += 1;
            z
        };
        let dest = match lab {
            InnerLabel::MotherBlock(_) | InnerLabel::MotherDust => Some(Dest::Mother),
            InnerLabel::New(k, _) | InnerLabel::NewDust(k) => Some(Dest::NewBlock(k)),
            InnerLabel::Isolated => None,
        };
        xi[i] = match dest {
            Some(d) => *xi_seen.entry(d).or_insert_with(|| {
                let x = xi_next;
                xi_next += 1;
                x
            }),
            None => {
                let x = xi_next;
                xi_next += 1;
                x
            }
        };
        if matches!(lab, InnerLabel::MotherBlock(_) | InnerLabel::MotherDust) && star.is_none() {
            star = Some(xi[i]);
        }
    }
    let zp = Partition::from_assignment(&zeta);
    let xp = Partition::from_assignment(&xi);
    // Provisional xi labels were issued in first-occurrence order, which is
    // exactly the canonical order, so the star index carries over.
    debug_assert_eq!(xp.assignment(), xi.as_slice());
    let nested = NestedPartition::new(zp, xp).expect("labels induce a nested pair");
    DistinguishedNestedPartition::new(nested, star).expect("star within range")
}

/// Block frequencies of a single partition: non-singleton blocks become mass
/// entries, singletons are dust (indistinguishable from it at finite n).
pub fn empirical_frequencies(pi: &Partition) -> MassPartition {
    let n = pi.n() as f64;
    let parts: Vec<f64> = pi
        .block_sizes()
        .iter()
        .filter(|&&c| c >= 2)
        .map(|&c| c as f64 / n)
        .collect();
    validate_mass(&parts).expect("count frequencies are a valid mass partition")
}

/// Bivariate analogue for an inner-split outcome: the starred outer block
/// estimates (ū, u), every other multi-element outer block contributes an
/// (s̄_k, row k) pair, singleton outer blocks are isolated dust.
pub fn empirical_frequencies_bivariate(
    d: &DistinguishedNestedPartition,
) -> Result<BivariateMassPartition> {
    let pi = d.inner();
    let n = pi.n() as f64;
    let mut u = Vec::new();
    let mut u_bar = 0.0;
    let mut s_bar = Vec::new();
    let mut rows = Vec::new();
    for (ci, c_elems) in pi.xi().blocks().iter().enumerate() {
        let inner_sizes: Vec<f64> = pi
            .zeta_blocks_in_xi_block(ci)
            .iter()
            .map(|&z| pi.zeta().block_size(z))
            .filter(|&c| c >= 2)
            .map(|c| c as f64 / n)
            .collect();
        if Some(ci) == d.star_xi_block() {
            u_bar = c_elems.len() as f64 / n;
            u = inner_sizes;
        } else if c_elems.len() >= 2 {
            s_bar.push(c_elems.len() as f64 / n);
            rows.push(inner_sizes);
        }
    }
    canonicalize_bivariate(u, rows, u_bar, s_bar)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mass::canonicalize_bivariate;

    fn mass(s: &[f64]) -> MassPartition {
        validate_mass(s).unwrap()
    }

    #[test]
    fn univariate_degenerate_atoms() {
        let mut rng = RngHandle::new(1);
        assert_eq!(
            sample_univariate(&mass(&[1.0]), 5, &mut rng),
            Partition::one(5)
        );
        assert_eq!(
            sample_univariate(&mass(&[]), 5, &mut rng),
            Partition::singletons(5)
        );
    }

    #[test]
    fn univariate_pair_probability() {
        // P(1 ~ 2) = Σ s_k² = 0.5 for s = (0.5, 0.5); 3σ ≈ 0.0047 at 10^5.
        let s = mass(&[0.5, 0.5]);
        let mut rng = RngHandle::new(42);
        let reps = 100_000;
        let together = (0..reps)
            .filter(|_| sample_univariate(&s, 2, &mut rng).num_blocks() == 1)
            .count();
        let freq = together as f64 / reps as f64;
        assert!((freq - 0.5).abs() < 0.0047 * 3.0, "freq {freq}");
    }

    #[test]
    fn sampler_is_deterministic() {
        let s = mass(&[0.4, 0.3, 0.2]);
        let a = sample_univariate(&s, 50, &mut RngHandle::with_stream(9, 4));
        let b = sample_univariate(&s, 50, &mut RngHandle::with_stream(9, 4));
        assert_eq!(a, b);
    }

    #[test]
    fn outer_degenerate_atoms() {
        let mut rng = RngHandle::new(3);
        assert_eq!(sample_outer(&mass(&[1.0]), 4, &mut rng), Partition::one(4));
        assert_eq!(
            sample_outer(&mass(&[]), 4, &mut rng),
            Partition::singletons(4)
        );
    }

    #[test]
    fn inner_identity_atom() {
        let one = BivariateMassPartition::one();
        let mut rng = RngHandle::new(4);
        let out = sample_inner(&one, &[2, 5, 9], &mut rng);
        assert!(out.labels.iter().all(|&l| l == InnerLabel::MotherBlock(0)));
        let split = out.split.inner();
        assert_eq!(split.zeta(), &Partition::one(3));
        assert_eq!(split.xi(), &Partition::one(3));
        assert_eq!(out.split.star_xi_block(), Some(0));
    }

    #[test]
    fn inner_wholesale_migration_atom() {
        let p = canonicalize_bivariate(vec![], vec![vec![1.0]], 0.0, vec![1.0]).unwrap();
        let mut rng = RngHandle::new(5);
        let out = sample_inner(&p, &[1, 2, 3, 4], &mut rng);
        assert!(out.labels.iter().all(|&l| l == InnerLabel::New(0, 0)));
        assert_eq!(out.split.star_xi_block(), None);
        assert_eq!(out.split.inner().zeta(), &Partition::one(4));
    }

    #[test]
    fn inner_singleton_block_interval_masses() {
        // ū=0.5 with u=(0.5), s̄=(0.5) with row (0.5): a lone element lands
        // MOTHER_BLOCK(1) or NEW(1,1) with probability 1/2 each.
        let p = canonicalize_bivariate(vec![0.5], vec![vec![0.5]], 0.5, vec![0.5]).unwrap();
        let mut rng = RngHandle::new(6);
        let reps = 10_000;
        let mut mother = 0;
        for _ in 0..reps {
            let out = sample_inner(&p, &[7], &mut rng);
            match out.labels[0] {
                InnerLabel::MotherBlock(0) => mother += 1,
                InnerLabel::New(0, 0) => {}
                other => panic!("unexpected label {other:?}"),
            }
        }
        let freq = mother as f64 / reps as f64;
        assert!((freq - 0.5).abs() < 0.015, "freq {freq}");
    }

    #[test]
    fn inner_split_respects_nesting_and_star() {
        let p = canonicalize_bivariate(
            vec![0.2, 0.1],
            vec![vec![0.15, 0.05], vec![0.1]],
            0.4,
            vec![0.25, 0.15],
        )
        .unwrap();
        let mut rng = RngHandle::new(7);
        for _ in 0..200 {
            let out = sample_inner(&p, &[1, 2, 3, 4, 5, 6], &mut rng);
            let np = out.split.inner();
            assert!(np.zeta().is_finer(np.xi()).unwrap());
            // star block holds exactly the MOTHER-labeled elements
            let mother_elems: Vec<usize> = out
                .labels
                .iter()
                .enumerate()
                .filter(|(_, l)| matches!(l, InnerLabel::MotherBlock(_) | InnerLabel::MotherDust))
                .map(|(i, _)| i + 1)
                .collect();
            match out.split.star_xi_block() {
                Some(b) => assert_eq!(np.xi().block_elements(b), mother_elems),
                None => assert!(mother_elems.is_empty()),
            }
        }
    }

    #[test]
    fn empirical_univariate_examples() {
        let mut blocks = vec![Vec::new(), Vec::new()];
        for e in 1..=50 {
            blocks[0].push(e);
        }
        for e in 51..=100 {
            blocks[1].push(e);
        }
        let pi = crate::partitions::make_partition(&blocks).unwrap();
        assert_eq!(empirical_frequencies(&pi).parts(), &[0.5, 0.5]);

        let dustless = empirical_frequencies(&Partition::singletons(40));
        assert_eq!(dustless.parts(), &[] as &[f64]);
        assert_eq!(dustless.dust(), 1.0);
    }

    #[test]
    fn empirical_univariate_lln_smoke() {
        let s = mass(&[0.6, 0.3]);
        let mut rng = RngHandle::new(11);
        let pi = sample_univariate(&s, 10_000, &mut rng);
        let est = empirical_frequencies(&pi);
        assert_eq!(est.parts().len(), 2);
        assert!((est.parts()[0] - 0.6).abs() < 0.015);
        assert!((est.parts()[1] - 0.3).abs() < 0.015);
    }

    #[test]
    fn empirical_bivariate_recovers_fixture_atom() {
        let p = canonicalize_bivariate(vec![0.5], vec![vec![0.5]], 0.5, vec![0.5]).unwrap();
        let mut rng = RngHandle::new(12);
        let block: Vec<usize> = (1..=10_000).collect();
        let out = sample_inner(&p, &block, &mut rng);
        let est = empirical_frequencies_bivariate(&out.split).unwrap();
        assert!((est.u_bar() - 0.5).abs() < 0.02);
        assert_eq!(est.u().len(), 1);
        assert!((est.u()[0] - 0.5).abs() < 0.02);
        assert_eq!(est.s_bar().len(), 1);
        assert!((est.s_bar()[0] - 0.5).abs() < 0.02);
        assert_eq!(est.rows()[0].len(), 1);
        assert!((est.rows()[0][0] - 0.5).abs() < 0.02);
    }
}
