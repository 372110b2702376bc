//! Set partitions of `[n] = {1, …, n}` and nested pairs of them.
//!
//! A partition is stored as a canonical assignment vector: `assignment[i]` is
//! the block index of element `i+1`, blocks are numbered `0..k` in order of
//! least element. This makes equality, hashing, restriction and the injection
//! action cheap, which the generator oracles rely on.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const PARTITION_ENUM_CAP: usize = 8;
pub const NESTED_ENUM_CAP: usize = 6;

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Partition {
    n: usize,
    assignment: Vec<usize>,
}

/// Relabel an arbitrary label vector into canonical form: first occurrence
/// order, labels contiguous from 0. Input labels are unrestricted.
fn canonical(labels: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    let mut next = 0usize;
    let mut out = Vec::with_capacity(labels.len());
    for &l in labels {
        let c = *map.entry(l).or_insert_with(|| {
            let c = next;
            next += 1;
            c
        });
        out.push(c);
    }
    out
}

impl Partition {
    /// Build from any label vector (labels need not be canonical).
    ///
    /// Panics on empty input; partitions of the empty set are not modeled.
    pub fn from_assignment(labels: &[usize]) -> Partition {
        assert!(!labels.is_empty(), "partition of [0] is not supported");
        Partition {
            n: labels.len(),
            assignment: canonical(labels),
        }
    }

    /// `{{1..n}}`, the coarsest partition.
    pub fn one(n: usize) -> Partition {
        Partition::from_assignment(&vec![0; n])
    }

    /// `{{1},…,{n}}`, the finest partition.
    pub fn singletons(n: usize) -> Partition {
        let labels: Vec<usize> = (0..n).collect();
        Partition::from_assignment(&labels)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn num_blocks(&self) -> usize {
        self.assignment.iter().copied().max().unwrap() + 1
    }

    /// Block index (0-based, least-element order) of element `e` (1-based).
    pub fn block_of(&self, e: usize) -> usize {
        self.assignment[e - 1]
    }

    /// Blocks as ascending element lists, in canonical block order.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_blocks()];
        for (i, &b) in self.assignment.iter().enumerate() {
            out[b].push(i + 1);
        }
        out
    }

    pub fn block_elements(&self, b: usize) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|(_, &x)| x == b)
            .map(|(i, _)| i + 1)
            .collect()
    }

    pub fn block_size(&self, b: usize) -> usize {
        self.assignment.iter().filter(|&&x| x == b).count()
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        let mut out = vec![0usize; self.num_blocks()];
        for &b in &self.assignment {
            out[b] += 1;
        }
        out
    }

    /// `π|[m]`: intersect every block with `[m]`, drop empties, canonicalize.
    pub fn restrict(&self, m: usize) -> Result<Partition> {
        if m == 0 || m > self.n {
            return Err(Error::BadRange { m, n: self.n });
        }
        Ok(Partition {
            n: m,
            assignment: canonical(&self.assignment[..m]),
        })
    }

    /// `π^σ`: element `i` of the result sits where `σ(i)` sat in `π`.
    /// `sigma[i-1]` is the 1-based image of `i`; `sigma` must be injective.
    pub fn apply_injection(&self, sigma: &[usize]) -> Result<Partition> {
        if sigma.is_empty() {
            return Err(Error::BadRange { m: 0, n: self.n });
        }
        let mut seen = vec![false; self.n + 1];
        let mut labels = Vec::with_capacity(sigma.len());
        for &v in sigma {
            if v == 0 || v > self.n {
                return Err(Error::Range {
                    value: v,
                    n: self.n,
                });
            }
            if seen[v] {
                return Err(Error::NotInjective(v));
            }
            seen[v] = true;
            labels.push(self.assignment[v - 1]);
        }
        Ok(Partition {
            n: sigma.len(),
            assignment: canonical(&labels),
        })
    }

    /// True iff every block of `self` is contained in a block of `other`.
    pub fn is_finer(&self, other: &Partition) -> Result<bool> {
        if self.n != other.n {
            return Err(Error::SizeMismatch(self.n, other.n));
        }
        let mut rep: Vec<Option<usize>> = vec![None; self.num_blocks()];
        for i in 0..self.n {
            let mine = self.assignment[i];
            let theirs = other.assignment[i];
            match rep[mine] {
                None => rep[mine] = Some(theirs),
                Some(r) if r != theirs => return Ok(false),
                _ => {}
            }
        }
        Ok(true)
    }

    /// `1/sup{k : a|[k] = b|[k]}`, and 0 when `a = b` on the full ground set.
    pub fn distance(&self, other: &Partition) -> Result<f64> {
        if self.n != other.n {
            return Err(Error::SizeMismatch(self.n, other.n));
        }
        if self == other {
            return Ok(0.0);
        }
        // Canonical labels are assigned in first-occurrence order, so the
        // restriction to [k] is exactly the length-k prefix: depth of
        // agreement = common prefix length (≥ 1, both prefixes start at 0).
        let agree = self
            .assignment
            .iter()
            .zip(&other.assignment)
            .take_while(|(x, y)| x == y)
            .count();
        Ok(1.0 / agree as f64)
    }

    /// Number of singleton blocks.
    pub fn singleton_count(&self) -> usize {
        self.block_sizes().iter().filter(|&&s| s == 1).count()
    }
}

/// Canonical constructor from explicit blocks, 1-based elements.
/// The union of the blocks must be exactly `{1, …, max}`.
pub fn make_partition(blocks: &[Vec<usize>]) -> Result<Partition> {
    for b in blocks {
        if b.is_empty() {
            return Err(Error::EmptyBlock);
        }
    }
    let n = blocks
        .iter()
        .flat_map(|b| b.iter().copied())
        .max()
        .ok_or(Error::MissingElement(1))?;
    let mut label: Vec<Option<usize>> = vec![None; n + 1];
    for (bi, b) in blocks.iter().enumerate() {
        for &e in b {
            if e == 0 || e > n {
                return Err(Error::Range { value: e, n });
            }
            if label[e].is_some() {
                return Err(Error::Overlap(e));
            }
            label[e] = Some(bi);
        }
    }
    let mut labels = Vec::with_capacity(n);
    for (e, slot) in label.iter().enumerate().skip(1) {
        match slot {
            Some(l) => labels.push(*l),
            None => return Err(Error::MissingElement(e)),
        }
    }
    Ok(Partition {
        n,
        assignment: canonical(&labels),
    })
}

/// All partitions of `[n]` in lexicographic restricted-growth order.
pub fn enumerate_partitions(n: usize) -> Result<Vec<Partition>> {
    enumerate_partitions_capped(n, PARTITION_ENUM_CAP)
}

pub fn enumerate_partitions_capped(n: usize, cap: usize) -> Result<Vec<Partition>> {
    if n == 0 || n > cap {
        return Err(Error::TooLarge { n, cap });
    }
    let mut out = Vec::new();
    let mut labels = vec![0usize; n];
    fn rec(labels: &mut Vec<usize>, i: usize, max_used: usize, out: &mut Vec<Partition>) {
        let n = labels.len();
        if i == n {
            out.push(Partition {
                n,
                assignment: labels.clone(),
            });
            return;
        }
        for l in 0..=max_used + 1 {
            labels[i] = l;
            rec(labels, i + 1, max_used.max(l), out);
        }
    }
    // assignment[0] = 0 always; recurse from element 2.
    if n == 1 {
        out.push(Partition {
            n: 1,
            assignment: vec![0],
        });
    } else {
        rec(&mut labels, 1, 0, &mut out);
    }
    Ok(out)
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let blocks = self.blocks();
        let parts: Vec<String> = blocks
            .iter()
            .map(|b| {
                b.iter()
                    .map(|e| e.to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            })
            .collect();
        write!(f, "{}", parts.join("|"))
    }
}

impl fmt::Debug for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Partition({})", self)
    }
}

impl FromStr for Partition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Partition> {
        let mut blocks = Vec::new();
        for part in s.split('|') {
            let part = part.trim();
            if part.is_empty() {
                return Err(Error::EmptyBlock);
            }
            let mut block = Vec::new();
            for tok in part.split(',') {
                let tok = tok.trim();
                let e: usize = tok
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad element '{tok}'")))?;
                block.push(e);
            }
            blocks.push(block);
        }
        make_partition(&blocks)
    }
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NestedPartition {
    zeta: Partition,
    xi: Partition,
}

impl NestedPartition {
    pub fn new(zeta: Partition, xi: Partition) -> Result<NestedPartition> {
        if zeta.n() != xi.n() {
            return Err(Error::SizeMismatch(zeta.n(), xi.n()));
        }
        if !zeta.is_finer(&xi)? {
            return Err(Error::NotNested);
        }
        Ok(NestedPartition { zeta, xi })
    }

    /// `((1_n), (1_n))`: one species, one gene lineage.
    pub fn coarsest(n: usize) -> NestedPartition {
        NestedPartition {
            zeta: Partition::one(n),
            xi: Partition::one(n),
        }
    }

    /// `((0_n), (0_n))`: everything isolated; the absorbing state.
    pub fn finest(n: usize) -> NestedPartition {
        NestedPartition {
            zeta: Partition::singletons(n),
            xi: Partition::singletons(n),
        }
    }

    pub fn zeta(&self) -> &Partition {
        &self.zeta
    }

    pub fn xi(&self) -> &Partition {
        &self.xi
    }

    pub fn n(&self) -> usize {
        self.zeta.n()
    }

    pub fn restrict(&self, m: usize) -> Result<NestedPartition> {
        Ok(NestedPartition {
            zeta: self.zeta.restrict(m)?,
            xi: self.xi.restrict(m)?,
        })
    }

    pub fn apply_injection(&self, sigma: &[usize]) -> Result<NestedPartition> {
        Ok(NestedPartition {
            zeta: self.zeta.apply_injection(sigma)?,
            xi: self.xi.apply_injection(sigma)?,
        })
    }

    /// `self ⪯ other`: finer in both coordinates.
    pub fn nested_leq(&self, other: &NestedPartition) -> Result<bool> {
        Ok(self.zeta.is_finer(&other.zeta)? && self.xi.is_finer(&other.xi)?)
    }

    pub fn distance(&self, other: &NestedPartition) -> Result<f64> {
        if self.n() != other.n() {
            return Err(Error::SizeMismatch(self.n(), other.n()));
        }
        if self == other {
            return Ok(0.0);
        }
        // Agreement depth of the pair is the min of the coordinate depths,
        // so the distance is the max of the coordinate distances.
        let dz = self.zeta.distance(&other.zeta)?;
        let dx = self.xi.distance(&other.xi)?;
        Ok(dz.max(dx))
    }

    /// Indices of the ζ-blocks inside ξ-block `xi_idx`, in canonical order.
    pub fn zeta_blocks_in_xi_block(&self, xi_idx: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut seen = vec![false; self.zeta.num_blocks()];
        for i in 0..self.n() {
            if self.xi.assignment()[i] == xi_idx {
                let zb = self.zeta.assignment()[i];
                if !seen[zb] {
                    seen[zb] = true;
                    out.push(zb);
                }
            }
        }
        out
    }
}

impl fmt::Display for NestedPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ; {}", self.zeta, self.xi)
    }
}

impl fmt::Debug for NestedPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Nested({} ; {})", self.zeta, self.xi)
    }
}

impl FromStr for NestedPartition {
    type Err = Error;

    fn from_str(s: &str) -> Result<NestedPartition> {
        let mut it = s.split(';');
        let z = it
            .next()
            .ok_or_else(|| Error::Parse("missing zeta".into()))?;
        let x = it
            .next()
            .ok_or_else(|| Error::Parse("missing xi (expected \"zeta ; xi\")".into()))?;
        if it.next().is_some() {
            return Err(Error::Parse("too many ';' separators".into()));
        }
        NestedPartition::new(z.trim().parse()?, x.trim().parse()?)
    }
}

/// All nested pairs on `[n]`: for every ξ, every choice of a partition of each
/// ξ-block assembles a distinct ζ. Each pair is produced exactly once.
pub fn enumerate_nested(n: usize) -> Result<Vec<NestedPartition>> {
    if n == 0 || n > NESTED_ENUM_CAP {
        return Err(Error::TooLarge {
            n,
            cap: NESTED_ENUM_CAP,
        });
    }
    let mut out = Vec::new();
    for xi in enumerate_partitions(n)? {
        let xi_blocks = xi.blocks();
        let per_block: Vec<Vec<Partition>> = xi_blocks
            .iter()
            .map(|b| enumerate_partitions(b.len()).expect("block size under cap"))
            .collect();
        let mut choice = vec![0usize; xi_blocks.len()];
        loop {
            let mut zeta_blocks: Vec<Vec<usize>> = Vec::new();
            for (bi, b) in xi_blocks.iter().enumerate() {
                for sub in per_block[bi][choice[bi]].blocks() {
                    zeta_blocks.push(sub.iter().map(|&j| b[j - 1]).collect());
                }
            }
            let zeta = make_partition(&zeta_blocks).expect("valid blocks");
            out.push(NestedPartition {
                zeta,
                xi: xi.clone(),
            });
            // odometer over per-block choices
            let mut pos = 0;
            loop {
                if pos == choice.len() {
                    break;
                }
                choice[pos] += 1;
                if choice[pos] < per_block[pos].len() {
                    break;
                }
                choice[pos] = 0;
                pos += 1;
            }
            if pos == choice.len() {
                break;
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Nested pair with the mother species marked out-of-band: `star_xi_block` is
/// the index of the ξ-block that contains the distinguished symbol ⋆, or
/// `None` when ⋆'s ξ-block is {⋆} alone. ⋆ itself is always a singleton in ζ.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct DistinguishedNestedPartition {
    inner: NestedPartition,
    star_xi_block: Option<usize>,
}

impl DistinguishedNestedPartition {
    pub fn new(
        inner: NestedPartition,
        star_xi_block: Option<usize>,
    ) -> Result<DistinguishedNestedPartition> {
        if let Some(b) = star_xi_block {
            let nb = inner.xi().num_blocks();
            if b >= nb {
                return Err(Error::Range { value: b, n: nb });
            }
        }
        Ok(DistinguishedNestedPartition {
            inner,
            star_xi_block,
        })
    }

    pub fn inner(&self) -> &NestedPartition {
        &self.inner
    }

    pub fn star_xi_block(&self) -> Option<usize> {
        self.star_xi_block
    }
}

impl fmt::Display for DistinguishedNestedPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.star_xi_block {
            Some(b) => write!(f, "{} @ {}", self.inner, b + 1),
            None => write!(f, "{} @ -", self.inner),
        }
    }
}
