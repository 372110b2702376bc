//! Exact transition rates of the restricted chain: erosion event
//! enumeration, analytic dislocation split probabilities for atomic
//! measures, the merged generator row, and the closed-form rate formula for
//! binary branching. These are the oracles every sampler is tested against.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::mass::{BinaryMeasures, FragmentationParams, MassPartition};
use crate::paintbox::InnerLabel;
use crate::partitions::{NestedPartition, Partition};

/// Largest ground set / inner block the exact enumerations accept.
pub const ORACLE_CAP: usize = 6;

#[derive(Clone, Debug)]
pub struct JumpTarget {
    pub from: NestedPartition,
    pub to: NestedPartition,
    pub rate: f64,
}

fn merge_targets(from: &NestedPartition, map: HashMap<NestedPartition, f64>) -> Vec<JumpTarget> {
    let mut out: Vec<JumpTarget> = map
        .into_iter()
        .filter(|(_, r)| *r > 0.0)
        .map(|(to, rate)| JumpTarget {
            from: from.clone(),
            to,
            rate,
        })
        .collect();
    out.sort_by(|a, b| a.to.cmp(&b.to));
    out
}

fn add(map: &mut HashMap<NestedPartition, f64>, to: NestedPartition, rate: f64) {
    if rate > 0.0 {
        *map.entry(to).or_insert(0.0) += rate;
    }
}

/// ζ keeps its blocks; inner block `zeta_idx` moves to a fresh outer block.
pub(crate) fn detach_inner_block(pi: &NestedPartition, zeta_idx: usize) -> NestedPartition {
    let mut xnew = pi.xi().assignment().to_vec();
    let fresh = pi.xi().num_blocks();
    for e in pi.zeta().block_elements(zeta_idx) {
        xnew[e - 1] = fresh;
    }
    NestedPartition::new(pi.zeta().clone(), Partition::from_assignment(&xnew))
        .expect("moving a whole inner block preserves nesting")
}

/// Element e becomes a singleton inner block; ξ unchanged.
pub(crate) fn detach_element_inner(pi: &NestedPartition, e: usize) -> NestedPartition {
    let mut znew = pi.zeta().assignment().to_vec();
    znew[e - 1] = pi.zeta().num_blocks();
    NestedPartition::new(Partition::from_assignment(&znew), pi.xi().clone())
        .expect("splitting an inner block preserves nesting")
}

/// Element e becomes a singleton inner block in its own outer block.
pub(crate) fn detach_element_both(pi: &NestedPartition, e: usize) -> NestedPartition {
    let mut znew = pi.zeta().assignment().to_vec();
    let mut xnew = pi.xi().assignment().to_vec();
    znew[e - 1] = pi.zeta().num_blocks();
    xnew[e - 1] = pi.xi().num_blocks();
    NestedPartition::new(
        Partition::from_assignment(&znew),
        Partition::from_assignment(&xnew),
    )
    .expect("isolating an element preserves nesting")
}

/// All erosion events at state pi, identity outcomes dropped, duplicate
/// targets merged. Singleton inner blocks still generate element erosions;
/// their restricted outcomes are the identity (e_in1) or a genuine species
/// isolation (e_in2).
pub fn erosion_jumps(pi: &NestedPartition, params: &FragmentationParams) -> Vec<JumpTarget> {
    let mut map = HashMap::new();
    if params.c_out > 0.0 {
        for zb in 0..pi.zeta().num_blocks() {
            let to = detach_inner_block(pi, zb);
            if to != *pi {
                add(&mut map, to, params.c_out);
            }
        }
    }
    if params.c_in1 > 0.0 {
        for e in 1..=pi.n() {
            let to = detach_element_inner(pi, e);
            if to != *pi {
                add(&mut map, to, params.c_in1);
            }
        }
    }
    if params.c_in2 > 0.0 {
        for e in 1..=pi.n() {
            let to = detach_element_both(pi, e);
            if to != *pi {
                add(&mut map, to, params.c_in2);
            }
        }
    }
    merge_targets(pi, map)
}

/// Probability that a paintbox draw from s produces the given children of
/// one block: the sum over index vectors assigning each child a distinct
/// interval (or dust, allowed only for flagged singleton children) of the
/// product of interval masses.
pub fn exact_split_probability_univariate(s: &MassPartition, children: &[(usize, bool)]) -> f64 {
    assert!(
        s.parts().len() <= 64,
        "interval bookkeeping uses a 64-bit mask"
    );
    let dust = s.dust();
    let mut total = 0.0;
    fn rec(
        parts: &[f64],
        dust: f64,
        children: &[(usize, bool)],
        j: usize,
        used: u64,
        acc: f64,
        total: &mut f64,
    ) {
        if j == children.len() {
            *total += acc;
            return;
        }
        let (nj, dust_ok) = children[j];
        if nj == 1 && dust_ok && dust > 0.0 {
            rec(parts, dust, children, j + 1, used, acc * dust, total);
        }
        for (idx, &sv) in parts.iter().enumerate() {
            if used & (1 << idx) != 0 {
                continue;
            }
            rec(
                parts,
                dust,
                children,
                j + 1,
                used | (1 << idx),
                acc * sv.powi(nj as i32),
                total,
            );
        }
    }
    rec(s.parts(), dust, children, 0, 0, 1.0, &mut total);
    total
}

/// Regroup the inner blocks of outer block `xi_idx` according to `grouping`
/// (a partition of their canonical index sequence, 1-based).
pub(crate) fn split_xi_block(
    pi: &NestedPartition,
    xi_idx: usize,
    grouping: &Partition,
) -> NestedPartition {
    let inner = pi.zeta_blocks_in_xi_block(xi_idx);
    debug_assert_eq!(inner.len(), grouping.n());
    let mut xnew = pi.xi().assignment().to_vec();
    let off = pi.xi().num_blocks();
    for (pos, &zb) in inner.iter().enumerate() {
        let part = grouping.block_of(pos + 1);
        for e in pi.zeta().block_elements(zb) {
            xnew[e - 1] = off + part;
        }
    }
    NestedPartition::new(pi.zeta().clone(), Partition::from_assignment(&xnew))
        .expect("regrouping whole inner blocks preserves nesting")
}

/// All outer dislocation events: for each outer block with at least two
/// inner blocks and each ν_out atom, every regrouping of the inner blocks
/// weighted by its exact paintbox probability. Singleton groups may be dust.
pub fn exact_outer_dislocation_jumps(
    pi: &NestedPartition,
    params: &FragmentationParams,
) -> Result<Vec<JumpTarget>> {
    let mut map = HashMap::new();
    for xi_idx in 0..pi.xi().num_blocks() {
        let r = pi.zeta_blocks_in_xi_block(xi_idx).len();
        if r < 2 {
            continue;
        }
        if r > ORACLE_CAP {
            return Err(Error::TooLarge {
                n: r,
                cap: ORACLE_CAP,
            });
        }
        for grouping in crate::partitions::enumerate_partitions(r)? {
            if grouping.num_blocks() == 1 {
                continue;
            }
            let children: Vec<(usize, bool)> = grouping
                .block_sizes()
                .iter()
                .map(|&c| (c, c == 1))
                .collect();
            let to = split_xi_block(pi, xi_idx, &grouping);
            debug_assert_ne!(to, *pi);
            for a in &params.nu_out {
                let p = exact_split_probability_univariate(&a.atom, &children);
                add(&mut map, to.clone(), a.rate * p);
            }
        }
    }
    Ok(merge_targets(pi, map))
}

/// Graft an inner-split outcome back into the ambient state: the pieces of
/// inner block `zeta_idx` are relabeled per `labels`; everything else in its
/// outer block stays with the mother.
pub(crate) fn apply_inner_split(
    pi: &NestedPartition,
    zeta_idx: usize,
    labels: &[InnerLabel],
) -> NestedPartition {
    let elems = pi.zeta().block_elements(zeta_idx);
    debug_assert_eq!(elems.len(), labels.len());
    let mut znew = pi.zeta().assignment().to_vec();
    let mut xnew = pi.xi().assignment().to_vec();
    let mut znext = pi.zeta().num_blocks();
    let mut xnext = pi.xi().num_blocks();
    let mut zshared: HashMap<InnerLabel, usize> = HashMap::new();
    let mut xshared: HashMap<usize, usize> = HashMap::new();
    for (&e, &lab) in elems.iter().zip(labels) {
        znew[e - 1] = match lab {
            InnerLabel::MotherBlock(_) | InnerLabel::New(_, _) => {
                *zshared.entry(lab).or_insert_with(|| {
                    let v = znext;
                    znext += 1;
                    v
                })
            }
            _ => {
                let v = znext;
                znext += 1;
                v
            }
        };
        match lab {
            InnerLabel::MotherBlock(_) | InnerLabel::MotherDust => {}
            InnerLabel::New(k, _) | InnerLabel::NewDust(k) => {
                xnew[e - 1] = *xshared.entry(k).or_insert_with(|| {
                    let v = xnext;
                    xnext += 1;
                    v
                });
            }
            InnerLabel::Isolated => {
                xnew[e - 1] = xnext;
                xnext += 1;
            }
        }
    }
    NestedPartition::new(
        Partition::from_assignment(&znew),
        Partition::from_assignment(&xnew),
    )
    .expect("per-element relabeling preserves nesting")
}

/// All inner dislocation events: for each inner block B and each ν_in atom,
/// enumerate every assignment of B's elements to the positive-mass paintbox
/// labels, weight by the product of interval masses, and graft the outcome.
pub fn exact_inner_dislocation_jumps(
    pi: &NestedPartition,
    params: &FragmentationParams,
) -> Result<Vec<JumpTarget>> {
    let mut map = HashMap::new();
    for zb in 0..pi.zeta().num_blocks() {
        let m = pi.zeta().block_size(zb);
        if m > ORACLE_CAP {
            return Err(Error::TooLarge {
                n: m,
                cap: ORACLE_CAP,
            });
        }
        for a in &params.nu_in {
            let p = &a.atom;
            let mut alphabet: Vec<(InnerLabel, f64)> = Vec::new();
            for (l, &ul) in p.u().iter().enumerate() {
                alphabet.push((InnerLabel::MotherBlock(l), ul));
            }
            if p.mother_dust() > 0.0 {
                alphabet.push((InnerLabel::MotherDust, p.mother_dust()));
            }
            for k in 0..p.s_bar().len() {
                for (l, &skl) in p.row(k).iter().enumerate() {
                    alphabet.push((InnerLabel::New(k, l), skl));
                }
                if p.row_dust(k) > 0.0 {
                    alphabet.push((InnerLabel::NewDust(k), p.row_dust(k)));
                }
            }
            if p.isolated_mass() > 0.0 {
                alphabet.push((InnerLabel::Isolated, p.isolated_mass()));
            }
            // odometer over alphabet^m
            let mut choice = vec![0usize; m];
            loop {
                let prob: f64 = choice.iter().map(|&c| alphabet[c].1).product();
                let labels: Vec<InnerLabel> = choice.iter().map(|&c| alphabet[c].0).collect();
                let to = apply_inner_split(pi, zb, &labels);
                if to != *pi {
                    add(&mut map, to, a.rate * prob);
                }
                let mut pos = 0;
                loop {
                    if pos == m {
                        break;
                    }
                    choice[pos] += 1;
                    if choice[pos] < alphabet.len() {
                        break;
                    }
                    choice[pos] = 0;
                    pos += 1;
                }
                if pos == m {
                    break;
                }
            }
        }
    }
    Ok(merge_targets(pi, map))
}

/// The complete rate row of the restricted chain at pi.
pub fn generator_row(
    pi: &NestedPartition,
    params: &FragmentationParams,
) -> Result<Vec<JumpTarget>> {
    if pi.n() > ORACLE_CAP {
        return Err(Error::TooLarge {
            n: pi.n(),
            cap: ORACLE_CAP,
        });
    }
    let mut map = HashMap::new();
    for t in erosion_jumps(pi, params) {
        add(&mut map, t.to, t.rate);
    }
    for t in exact_outer_dislocation_jumps(pi, params)? {
        add(&mut map, t.to, t.rate);
    }
    for t in exact_inner_dislocation_jumps(pi, params)? {
        add(&mut map, t.to, t.rate);
    }
    Ok(merge_targets(pi, map))
}

/// Closed-form rate evaluation for binary branching.
#[derive(Clone, Debug, PartialEq)]
pub struct BinaryRate {
    pub rate: f64,
    /// pi_prime is not reachable by one binary fragmentation of pi (or the
    /// participating blocks sit in unrelated regions); the rate is 0.
    pub not_binary_jump: bool,
    /// Symmetric ambiguity left open by the closed form: the event-level
    /// count doubles an erosion coefficient the formula counts once. When
    /// set, the returned rate is the literal formula value.
    pub ambiguity: Option<String>,
}

impl BinaryRate {
    fn zero() -> BinaryRate {
        BinaryRate {
            rate: 0.0,
            not_binary_jump: true,
            ambiguity: None,
        }
    }
}

/// How one partition refines another at a single parent block.
enum SplitShape {
    Unchanged,
    Binary { parent: usize, kids: [usize; 2] },
    NotBinary,
}

fn sole_binary_split(child: &Partition, parent: &Partition) -> SplitShape {
    let mut kids_of: Vec<Vec<usize>> = vec![Vec::new(); parent.num_blocks()];
    let mut seen = vec![false; child.num_blocks()];
    for i in 0..child.n() {
        let cb = child.assignment()[i];
        if !seen[cb] {
            seen[cb] = true;
            kids_of[parent.assignment()[i]].push(cb);
        }
    }
    let mut split: Option<(usize, [usize; 2])> = None;
    for (pb, kids) in kids_of.iter().enumerate() {
        match kids.len() {
            1 => {}
            2 => {
                if split.is_some() {
                    return SplitShape::NotBinary;
                }
                split = Some((pb, [kids[0], kids[1]]));
            }
            _ => return SplitShape::NotBinary,
        }
    }
    match split {
        None => SplitShape::Unchanged,
        Some((parent, kids)) => SplitShape::Binary { parent, kids },
    }
}

fn weighted_sum(atoms: &[(f64, f64)], f: impl Fn(f64) -> f64) -> f64 {
    atoms.iter().map(|&(rate, x)| rate * f(x)).sum()
}

fn union_sorted(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut v: Vec<usize> = a.iter().chain(b.iter()).copied().collect();
    v.sort_unstable();
    v
}

/// Evaluate the binary closed form for the transition pi -> pi_prime.
///
/// The c_in2 indicator "X_i = Y_i = 1" is evaluated under the generic block
/// naming B_i ⊆ C_i, i.e. it requires the piece B_i to BE the outer piece
/// C_i (a detached element alone in its own species); the literal reading
/// would misfire on targets where both inner pieces stay on one side while
/// an unrelated block departs, which no single event produces.
pub fn binary_rate(
    pi: &NestedPartition,
    pi_prime: &NestedPartition,
    measures: &BinaryMeasures,
    c_out: f64,
    c_in1: f64,
    c_in2: f64,
) -> Result<BinaryRate> {
    if pi_prime == pi || !pi_prime.nested_leq(pi)? {
        return Ok(BinaryRate::zero());
    }
    let zeta_shape = sole_binary_split(pi_prime.zeta(), pi.zeta());
    let xi_shape = sole_binary_split(pi_prime.xi(), pi.xi());

    // Per-side data under the naming B_1 ⊆ C_1: element sets (empty = no
    // split), cardinalities X_i, inner-block counts Y_i.
    let zeta_unchanged: bool;
    let xi_unchanged: bool;
    let (b1, b2): (Vec<usize>, Vec<usize>);
    let (c1, c2): (Vec<usize>, Vec<usize>);
    let (y1, y2): (usize, usize);

    match (zeta_shape, xi_shape) {
        (SplitShape::NotBinary, _) | (_, SplitShape::NotBinary) => return Ok(BinaryRate::zero()),
        (SplitShape::Unchanged, SplitShape::Unchanged) => unreachable!("pi_prime != pi"),
        (SplitShape::Binary { parent, kids }, SplitShape::Unchanged) => {
            zeta_unchanged = false;
            xi_unchanged = true;
            let min_b = pi.zeta().block_elements(parent)[0];
            let first = pi_prime.zeta().block_of(min_b);
            let (ka, kb) = if kids[0] == first {
                (kids[0], kids[1])
            } else {
                (kids[1], kids[0])
            };
            b1 = pi_prime.zeta().block_elements(ka);
            b2 = pi_prime.zeta().block_elements(kb);
            let c_idx = pi.xi().block_of(min_b);
            c1 = pi.xi().block_elements(c_idx);
            c2 = Vec::new();
            y1 = pi_prime.zeta_blocks_in_xi_block(c_idx).len();
            y2 = 0;
        }
        (SplitShape::Unchanged, SplitShape::Binary { parent, kids }) => {
            zeta_unchanged = true;
            xi_unchanged = false;
            let inner_a = pi_prime.zeta_blocks_in_xi_block(kids[0]);
            let inner_b = pi_prime.zeta_blocks_in_xi_block(kids[1]);
            // B is the block departing alone when one side has a single
            // inner block; with no such side B's identity is immaterial
            // (every term naming it vanishes). With two such sides the
            // min-element piece is taken.
            let (ca, cb, inner_ca) = match (inner_a.len(), inner_b.len()) {
                (1, n) if n > 1 => (kids[0], kids[1], inner_a),
                (n, 1) if n > 1 => (kids[1], kids[0], inner_b),
                _ => {
                    let min_c = pi.xi().block_elements(parent)[0];
                    if pi_prime.xi().block_of(min_c) == kids[0] {
                        (kids[0], kids[1], inner_a)
                    } else {
                        (kids[1], kids[0], inner_b)
                    }
                }
            };
            b1 = pi_prime.zeta().block_elements(inner_ca[0]);
            b2 = Vec::new();
            c1 = pi_prime.xi().block_elements(ca);
            c2 = pi_prime.xi().block_elements(cb);
            y1 = pi_prime.zeta_blocks_in_xi_block(ca).len();
            y2 = pi_prime.zeta_blocks_in_xi_block(cb).len();
        }
        (
            SplitShape::Binary {
                parent: pz,
                kids: kz,
            },
            SplitShape::Binary {
                parent: px,
                kids: kx,
            },
        ) => {
            zeta_unchanged = false;
            xi_unchanged = false;
            let min_b = pi.zeta().block_elements(pz)[0];
            // B must fragment inside the fragmenting outer block.
            if pi.xi().block_of(min_b) != px {
                return Ok(BinaryRate::zero());
            }
            let first = pi_prime.zeta().block_of(min_b);
            let (ka, kb) = if kz[0] == first {
                (kz[0], kz[1])
            } else {
                (kz[1], kz[0])
            };
            b1 = pi_prime.zeta().block_elements(ka);
            b2 = pi_prime.zeta().block_elements(kb);
            let c1_idx = pi_prime.xi().block_of(b1[0]);
            debug_assert!(c1_idx == kx[0] || c1_idx == kx[1]);
            let c2_idx = if c1_idx == kx[0] { kx[1] } else { kx[0] };
            c1 = pi_prime.xi().block_elements(c1_idx);
            c2 = pi_prime.xi().block_elements(c2_idx);
            y1 = pi_prime.zeta_blocks_in_xi_block(c1_idx).len();
            y2 = pi_prime.zeta_blocks_in_xi_block(c2_idx).len();
        }
    }

    let x1 = b1.len();
    let x2 = b2.len();
    let is_subset = |a: &[usize], b: &[usize]| a.iter().all(|e| b.binary_search(e).is_ok());

    // Symmetric targets reachable by two distinct events: the closed form
    // names one participant, the event count sums both. Flagged only when a
    // naming-sensitive parameter is actually present.
    let mut ambiguity: Option<String> = None;
    if zeta_unchanged
        && y1 == 1
        && y2 == 1
        && (c_out > 0.0 || !measures.nu_bar_in2.is_empty() || !measures.nu_bar_in3.is_empty())
    {
        ambiguity = Some(
            "symmetric outer split: either inner block may be the one that \
             departed (events double c_out and sum both wholesale departures; \
             the formula names one side)"
                .to_string(),
        );
    }
    if xi_unchanged && x1 == 1 && x2 == 1 && c_in1 > 0.0 {
        ambiguity = Some(
            "symmetric inner split: two element erosions share this target \
             (event count 2*c_in1, formula c_in1)"
                .to_string(),
        );
    }

    let mut rate = 0.0;
    // erosion of one inner block out of its outer block
    if zeta_unchanged && y1.min(y2) == 1 {
        rate += c_out;
    }
    // erosion of one element out of its inner block
    if xi_unchanged && x1.min(x2) == 1 {
        rate += c_in1;
    }
    // erosion of one element into its own species
    let e_in2_side1 = x1 == 1 && y1 == 1 && b1 == c1;
    let e_in2_side2 = x2 == 1 && y2 == 1 && !b2.is_empty() && b2 == c2;
    if e_in2_side1 || e_in2_side2 {
        rate += c_in2;
        if e_in2_side1 && e_in2_side2 && c_in2 > 0.0 {
            ambiguity = Some(
                "symmetric element isolation: both elements erode to the same \
                 target (event count 2*c_in2, formula c_in2)"
                    .to_string(),
            );
        }
    }
    if zeta_unchanged {
        rate += weighted_sum(&measures.nu_bar_out, |x| {
            x.powi(y1 as i32) * (1.0 - x).powi(y2 as i32)
        });
    }
    if xi_unchanged {
        rate += weighted_sum(&measures.nu_bar_in1, |x| {
            x.powi(x1 as i32) * (1.0 - x).powi(x2 as i32)
        });
    }
    if union_sorted(&b1, &b2) == c1 {
        rate += weighted_sum(&measures.nu_bar_in2, |x| {
            x.powi(x1 as i32) * (1.0 - x).powi(x2 as i32)
        });
    }
    if zeta_unchanged || !is_subset(&b2, &c1) {
        let b2_is_c2 = !b2.is_empty() && b2 == c2;
        let b1_is_c1 = b1 == c1;
        if b2_is_c2 || b1_is_c1 {
            rate += weighted_sum(&measures.nu_bar_in3, |x| {
                let fwd = x.powi(x1 as i32) * (1.0 - x).powi(x2 as i32);
                let rev = x.powi(x2 as i32) * (1.0 - x).powi(x1 as i32);
                (if b2_is_c2 { fwd } else { 0.0 }) + (if b1_is_c1 { rev } else { 0.0 })
            });
        }
    }

    Ok(BinaryRate {
        rate,
        not_binary_jump: false,
        ambiguity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mass::{binary_project, canonicalize_bivariate, validate_mass};

    fn np(s: &str) -> NestedPartition {
        s.parse().unwrap()
    }

    fn erosion_only(c_out: f64, c_in1: f64, c_in2: f64) -> FragmentationParams {
        FragmentationParams::new(c_out, c_in1, c_in2, vec![], vec![]).unwrap()
    }

    fn rate_to(jumps: &[JumpTarget], to: &NestedPartition) -> f64 {
        jumps
            .iter()
            .find(|j| j.to == *to)
            .map(|j| j.rate)
            .unwrap_or(0.0)
    }

    #[test]
    fn erosion_outer_example() {
        let pi = np("1|2|3 ; 1,2,3");
        let jumps = erosion_jumps(&pi, &erosion_only(1.0, 0.0, 0.0));
        assert_eq!(jumps.len(), 3);
        assert_eq!(rate_to(&jumps, &np("1|2|3 ; 1|2,3")), 1.0);
        assert_eq!(rate_to(&jumps, &np("1|2|3 ; 1,3|2")), 1.0);
        assert_eq!(rate_to(&jumps, &np("1|2|3 ; 1,2|3")), 1.0);
    }

    #[test]
    fn erosion_inner_example() {
        let pi = NestedPartition::coarsest(3);
        let jumps = erosion_jumps(&pi, &erosion_only(0.0, 1.0, 0.0));
        assert_eq!(rate_to(&jumps, &np("1,2|3 ; 1,2,3")), 1.0);
        assert_eq!(jumps.len(), 3);
    }

    #[test]
    fn erosion_isolation_merges_duplicates() {
        let pi = NestedPartition::coarsest(2);
        let jumps = erosion_jumps(&pi, &erosion_only(0.0, 0.0, 1.0));
        assert_eq!(jumps.len(), 1);
        assert_eq!(rate_to(&jumps, &NestedPartition::finest(2)), 2.0);
    }

    #[test]
    fn erosion_identity_outcomes_dropped() {
        // a lone inner block in its outer block produces no e_out jump
        let pi = np("1,2 ; 1,2");
        assert!(erosion_jumps(&pi, &erosion_only(1.0, 0.0, 0.0)).is_empty());
        // singleton inner blocks produce no e_in1 jump
        let pi = np("1|2 ; 1,2");
        assert!(erosion_jumps(&pi, &erosion_only(0.0, 1.0, 0.0)).is_empty());
        // e_in2 on a singleton inner block still moves it out of its species
        let jumps = erosion_jumps(&pi, &erosion_only(0.0, 0.0, 1.0));
        assert_eq!(rate_to(&jumps, &NestedPartition::finest(2)), 2.0);
    }

    #[test]
    fn split_probability_examples() {
        let s1 = validate_mass(&[1.0]).unwrap();
        assert!((exact_split_probability_univariate(&s1, &[(4, true)]) - 1.0).abs() < 1e-12);

        let half = validate_mass(&[0.5, 0.5]).unwrap();
        let p = exact_split_probability_univariate(&half, &[(1, true), (1, true)]);
        assert!((p - 0.5).abs() < 1e-12);

        let s = validate_mass(&[0.5, 0.3]).unwrap();
        let p = exact_split_probability_univariate(&s, &[(1, true), (1, true)]);
        assert!((p - 0.66).abs() < 1e-12);

        // dust disallowed: only the interval assignments remain
        let p = exact_split_probability_univariate(&s, &[(1, false), (1, false)]);
        assert!((p - 0.3).abs() < 1e-12);
    }

    fn outer_atom_params(rate: f64, s: &[f64]) -> FragmentationParams {
        FragmentationParams::new(
            0.0,
            0.0,
            0.0,
            vec![(rate, validate_mass(s).unwrap())],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn outer_dislocation_two_blocks() {
        let pi = np("1|2 ; 1,2");
        let jumps =
            exact_outer_dislocation_jumps(&pi, &outer_atom_params(1.0, &[0.5, 0.5])).unwrap();
        assert_eq!(jumps.len(), 1);
        assert!((rate_to(&jumps, &np("1|2 ; 1|2")) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn outer_dislocation_needs_siblings() {
        let pi = np("1,2 ; 1,2");
        assert!(
            exact_outer_dislocation_jumps(&pi, &outer_atom_params(1.0, &[0.5, 0.3]))
                .unwrap()
                .is_empty()
        );
    }

    fn inner_atom_params(
        rate: f64,
        u: &[f64],
        rows: &[&[f64]],
        u_bar: f64,
        s_bar: &[f64],
    ) -> FragmentationParams {
        let atom = canonicalize_bivariate(
            u.to_vec(),
            rows.iter().map(|r| r.to_vec()).collect(),
            u_bar,
            s_bar.to_vec(),
        )
        .unwrap();
        FragmentationParams::new(0.0, 0.0, 0.0, vec![], vec![(rate, atom)]).unwrap()
    }

    #[test]
    fn inner_dislocation_wholesale_migration() {
        let params = inner_atom_params(1.0, &[], &[&[1.0]], 0.0, &[1.0]);
        // either inner block departing wholesale yields the same target
        let pi = np("1,2|3 ; 1,2,3");
        let jumps = exact_inner_dislocation_jumps(&pi, &params).unwrap();
        assert!((rate_to(&jumps, &np("1,2|3 ; 1,2|3")) - 2.0).abs() < 1e-12);
        // B alone in its outer block: departure is the identity
        let pi = np("1,2 ; 1,2");
        assert!(exact_inner_dislocation_jumps(&pi, &params)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn inner_dislocation_mother_split() {
        let params = inner_atom_params(1.0, &[0.5, 0.5], &[], 1.0, &[]);
        let pi = np("1,2 ; 1,2");
        let jumps = exact_inner_dislocation_jumps(&pi, &params).unwrap();
        assert_eq!(jumps.len(), 1);
        assert!((rate_to(&jumps, &np("1|2 ; 1,2")) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn generator_row_zero_params_and_merging() {
        let pi = NestedPartition::coarsest(3);
        assert!(generator_row(&pi, &FragmentationParams::zero())
            .unwrap()
            .is_empty());

        // pure c_out on singleton-inner state equals erosion enumeration
        let pi = np("1|2|3 ; 1,2,3");
        let params = erosion_only(0.7, 0.0, 0.0);
        let row = generator_row(&pi, &params).unwrap();
        let ero = erosion_jumps(&pi, &params);
        assert_eq!(row.len(), ero.len());
        for (a, b) in row.iter().zip(&ero) {
            assert_eq!(a.to, b.to);
            assert!((a.rate - b.rate).abs() < 1e-12);
        }
    }

    #[test]
    fn generator_row_caps_ground_set() {
        assert!(matches!(
            generator_row(&NestedPartition::coarsest(7), &FragmentationParams::zero()),
            Err(Error::TooLarge { .. })
        ));
    }

    fn binary_measures(params: &FragmentationParams) -> BinaryMeasures {
        binary_project(params).unwrap()
    }

    #[test]
    fn binary_rate_erosion_out() {
        let pi = np("1|2|3 ; 1,2,3");
        let to = np("1|2|3 ; 1|2,3");
        let m = BinaryMeasures::default();
        let r = binary_rate(&pi, &to, &m, 1.0, 0.0, 0.0).unwrap();
        assert!(!r.not_binary_jump);
        assert!((r.rate - 1.0).abs() < 1e-12);
        // both sides single inner blocks: flagged
        let pi2 = np("1|2 ; 1,2");
        let r2 = binary_rate(&pi2, &np("1|2 ; 1|2"), &m, 1.0, 0.0, 0.0).unwrap();
        assert!(r2.ambiguity.is_some());
        assert!((r2.rate - 1.0).abs() < 1e-12);
    }

    #[test]
    fn binary_rate_outer_atom() {
        let params = outer_atom_params(1.0, &[0.5, 0.5]);
        let m = binary_measures(&params);
        let pi = np("1|2|3 ; 1,2,3");
        let to = np("1|2|3 ; 1|2,3");
        let r = binary_rate(&pi, &to, &m, 0.0, 0.0, 0.0).unwrap();
        assert!((r.rate - 0.25).abs() < 1e-12);
    }

    #[test]
    fn binary_rate_inner_shape1() {
        let params = inner_atom_params(1.0, &[0.5, 0.5], &[], 1.0, &[]);
        let m = binary_measures(&params);
        let pi = NestedPartition::coarsest(3);
        let to = np("1,2|3 ; 1,2,3");
        let r = binary_rate(&pi, &to, &m, 0.0, 0.0, 0.0).unwrap();
        assert!((r.rate - 0.25).abs() < 1e-12);
    }

    #[test]
    fn binary_rate_rejects_non_binary_targets() {
        let pi = NestedPartition::coarsest(4);
        let m = BinaryMeasures::default();
        // three-way inner split
        let r = binary_rate(&pi, &np("1|2|3,4 ; 1,2,3,4"), &m, 1.0, 1.0, 1.0).unwrap();
        assert!(r.not_binary_jump);
        // unrelated regions: zeta splits in one outer block, xi in another
        let pi = np("1,2|3|4 ; 1,2|3,4");
        let r = binary_rate(&pi, &np("1|2|3|4 ; 1,2|3|4"), &m, 1.0, 1.0, 1.0).unwrap();
        assert!(r.not_binary_jump);
        assert_eq!(r.rate, 0.0);
    }

    #[test]
    fn binary_rate_bystander_departure_is_zero() {
        // zeta splits inside C_1 while a bystander block forms C_2: no
        // single event produces this; the refined c_in2 indicator stays off.
        let pi = np("1,2|3|4 ; 1,2,3,4");
        let to = np("1|2|3|4 ; 1,2,3|4");
        let m = BinaryMeasures::default();
        let r = binary_rate(&pi, &to, &m, 1.0, 1.0, 1.0).unwrap();
        assert!(!r.not_binary_jump);
        assert_eq!(r.rate, 0.0);
    }

    #[test]
    fn binary_rate_element_isolation() {
        let pi = NestedPartition::coarsest(3);
        let to = np("1,2|3 ; 1,2|3");
        let m = BinaryMeasures::default();
        let r = binary_rate(&pi, &to, &m, 0.0, 0.0, 1.0).unwrap();
        assert!((r.rate - 1.0).abs() < 1e-12);
        assert!(r.ambiguity.is_none());

        // two-element case: both isolations share the target, flagged
        let pi = NestedPartition::coarsest(2);
        let r = binary_rate(&pi, &NestedPartition::finest(2), &m, 0.0, 0.0, 1.0).unwrap();
        assert!((r.rate - 1.0).abs() < 1e-12);
        assert!(r.ambiguity.is_some());
    }

    #[test]
    fn binary_rate_wholesale_departure_terms() {
        // B = {1,2} departs intact from C = {1,2,3,4}, leaving two inner
        // blocks behind (no symmetric ambiguity): nu_bar_in2 contributes
        // x^2 per atom and nu_bar_in3 contributes (1-x)^2.
        let pi = np("1,2|3|4 ; 1,2,3,4");
        let to = np("1,2|3|4 ; 1,2|3,4");

        let shape2 = inner_atom_params(1.0, &[], &[&[0.6, 0.4]], 0.0, &[1.0]);
        let m2 = binary_measures(&shape2);
        let r = binary_rate(&pi, &to, &m2, 0.0, 0.0, 0.0).unwrap();
        assert!(r.ambiguity.is_none());
        let expect = 0.6f64.powi(2) + 0.4f64.powi(2);
        assert!((r.rate - expect).abs() < 1e-12, "rate {}", r.rate);
        let oracle = exact_inner_dislocation_jumps(&pi, &shape2).unwrap();
        assert!((rate_to(&oracle, &to) - expect).abs() < 1e-12);

        let shape3 = inner_atom_params(1.0, &[0.4], &[&[0.6]], 0.4, &[0.6]);
        let m3 = binary_measures(&shape3);
        let r = binary_rate(&pi, &to, &m3, 0.0, 0.0, 0.0).unwrap();
        assert!(r.ambiguity.is_none());
        let expect = 0.6f64.powi(2);
        assert!((r.rate - expect).abs() < 1e-12, "rate {}", r.rate);
        let oracle = exact_inner_dislocation_jumps(&pi, &shape3).unwrap();
        assert!((rate_to(&oracle, &to) - expect).abs() < 1e-12);
    }

    #[test]
    fn binary_rate_symmetric_departure_is_flagged() {
        // Both sides of the outer split are single inner blocks: either may
        // be the one that departed. The formula names the min-element side;
        // the oracle sums both interpretations.
        let shape2 = inner_atom_params(1.0, &[], &[&[0.6, 0.4]], 0.0, &[1.0]);
        let m2 = binary_measures(&shape2);
        let pi = np("1,2|3 ; 1,2,3");
        let to = np("1,2|3 ; 1,2|3");
        let r = binary_rate(&pi, &to, &m2, 0.0, 0.0, 0.0).unwrap();
        assert!(r.ambiguity.is_some());
        // named side B = {1,2}: x^2 terms
        let named = 0.6f64.powi(2) + 0.4f64.powi(2);
        assert!((r.rate - named).abs() < 1e-12, "rate {}", r.rate);
        // events: {1,2} departs (0.36 + 0.16) plus {3} departs (0.6 + 0.4)
        let oracle = exact_inner_dislocation_jumps(&pi, &shape2).unwrap();
        assert!((rate_to(&oracle, &to) - (named + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn binary_rate_both_orientations_accumulate() {
        // B = C = {1,2} splitting into two isolated singletons: both
        // orientation indicators hold and the closed form matches the
        // two label assignments of the construction.
        let shape3 = inner_atom_params(1.0, &[0.4], &[&[0.6]], 0.4, &[0.6]);
        let m3 = binary_measures(&shape3);
        let pi = np("1,2 ; 1,2");
        let to = np("1|2 ; 1|2");
        let r = binary_rate(&pi, &to, &m3, 0.0, 0.0, 0.0).unwrap();
        let expect = 2.0 * 0.4 * 0.6;
        assert!((r.rate - expect).abs() < 1e-12, "rate {}", r.rate);
        // without c_in2 there is no naming sensitivity here
        assert!(r.ambiguity.is_none());
        let oracle = exact_inner_dislocation_jumps(&pi, &shape3).unwrap();
        assert!((rate_to(&oracle, &to) - expect).abs() < 1e-12);
    }
}
