//! Event-driven simulation of the restricted chain. Every event source
//! (an element, an inner block, an outer block, crossed with a mechanism
//! and an atom) owns a Poisson clock keyed by a stable structural identity,
//! and dislocation paintbox uniforms are keyed per element or per block.
//! A block's identity is its least element, which a restriction to a
//! smaller ground set preserves; this makes the restriction of a run the
//! run of the restriction, arrival for arrival.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::mass::FragmentationParams;
use crate::paintbox::{inner_label_of, univariate_label_of, InnerLabel};
use crate::partitions::{NestedPartition, Partition};
use crate::rates::{
    apply_inner_split, detach_element_both, detach_element_inner, detach_inner_block,
    split_xi_block,
};
use crate::rng::RngHandle;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum ClockKey {
    /// Inner block (by least element) leaves its outer block.
    ErodeOut { block: u32 },
    /// Element becomes a singleton inner block.
    ErodeIn1 { elem: u32 },
    /// Element becomes a singleton inner block in its own outer block.
    ErodeIn2 { elem: u32 },
    /// One outer dislocation atom acting on an outer block.
    DisOut { atom: u32, block: u32 },
    /// One inner dislocation atom acting on an inner block.
    DisIn { atom: u32, block: u32 },
}

const TAG_ERODE_OUT: u8 = 1;
const TAG_ERODE_IN1: u8 = 2;
const TAG_ERODE_IN2: u8 = 3;
const TAG_DIS_OUT: u8 = 4;
const TAG_DIS_IN: u8 = 5;
/// Paintbox uniform domains, disjoint from the clock domains above.
const TAG_PAINT_OUT: u8 = 6;
const TAG_PAINT_IN: u8 = 7;

fn pack(tag: u8, atom: u32, a: u32, b: u32) -> u128 {
    ((tag as u128) << 96) | ((atom as u128) << 64) | ((a as u128) << 32) | (b as u128)
}

impl ClockKey {
    fn code(self) -> u128 {
        match self {
            ClockKey::ErodeOut { block } => pack(TAG_ERODE_OUT, 0, block, 0),
            ClockKey::ErodeIn1 { elem } => pack(TAG_ERODE_IN1, 0, elem, 0),
            ClockKey::ErodeIn2 { elem } => pack(TAG_ERODE_IN2, 0, elem, 0),
            ClockKey::DisOut { atom, block } => pack(TAG_DIS_OUT, atom, block, 0),
            ClockKey::DisIn { atom, block } => pack(TAG_DIS_IN, atom, block, 0),
        }
    }

    fn rate(self, params: &FragmentationParams) -> f64 {
        match self {
            ClockKey::ErodeOut { .. } => params.c_out,
            ClockKey::ErodeIn1 { .. } => params.c_in1,
            ClockKey::ErodeIn2 { .. } => params.c_in2,
            ClockKey::DisOut { atom, .. } => params.nu_out[atom as usize].rate,
            ClockKey::DisIn { atom, .. } => params.nu_in[atom as usize].rate,
        }
    }
}

/// One Poisson arrival stream. The sequence of arrival times is fixed by
/// (seed, key) alone, whether or not the addressed structure currently
/// exists; arrivals that fall while it does not exist are skipped.
struct Clock {
    rng: RngHandle,
    next: f64,
    /// 1-based index of `next` in this key's arrival sequence.
    arrival: u64,
    rate: f64,
}

impl Clock {
    fn new(seed: u64, key: ClockKey, params: &FragmentationParams) -> Clock {
        let rate = key.rate(params);
        let mut rng = RngHandle::keyed(seed, key.code(), 0);
        let next = rng.exponential(rate);
        Clock {
            rng,
            next,
            arrival: 1,
            rate,
        }
    }

    fn consume(&mut self) {
        self.next += self.rng.exponential(self.rate);
        self.arrival += 1;
    }

    fn advance_past(&mut self, t: f64) {
        while self.next <= t {
            self.consume();
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mechanism {
    ErodeOut,
    ErodeIn1,
    ErodeIn2,
    DislocateOut { atom: usize },
    DislocateIn { atom: usize },
}

impl Mechanism {
    pub fn label(&self) -> &'static str {
        match self {
            Mechanism::ErodeOut => "erode_out",
            Mechanism::ErodeIn1 => "erode_in1",
            Mechanism::ErodeIn2 => "erode_in2",
            Mechanism::DislocateOut { .. } => "dislocate_out",
            Mechanism::DislocateIn { .. } => "dislocate_in",
        }
    }

    pub fn atom(&self) -> Option<usize> {
        match self {
            Mechanism::DislocateOut { atom } | Mechanism::DislocateIn { atom } => Some(*atom),
            _ => None,
        }
    }

    pub fn from_parts(label: &str, atom: Option<usize>) -> Result<Mechanism> {
        Ok(match (label, atom) {
            ("erode_out", None) => Mechanism::ErodeOut,
            ("erode_in1", None) => Mechanism::ErodeIn1,
            ("erode_in2", None) => Mechanism::ErodeIn2,
            ("dislocate_out", Some(atom)) => Mechanism::DislocateOut { atom },
            ("dislocate_in", Some(atom)) => Mechanism::DislocateIn { atom },
            _ => return Err(Error::Parse(format!("unknown mechanism {label:?}"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryEvent {
    pub t: f64,
    pub mechanism: Mechanism,
    /// Elements of the block the event acted on (the pre-state block).
    pub block: Vec<usize>,
    /// State after the event.
    pub state: NestedPartition,
    /// The event consumed an arrival but left the state unchanged.
    pub null: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub seed: u64,
    pub initial: NestedPartition,
    pub horizon: f64,
    /// Time up to which the trajectory is defined: the horizon, or the last
    /// event time when the event cap cut the run short.
    pub end_time: f64,
    pub events: Vec<TrajectoryEvent>,
}

impl Trajectory {
    pub fn n(&self) -> usize {
        self.initial.n()
    }

    pub fn final_state(&self) -> &NestedPartition {
        self.events
            .last()
            .map(|e| &e.state)
            .unwrap_or(&self.initial)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct RunOptions {
    pub horizon: f64,
    pub max_events: Option<u64>,
    /// Record events whose outcome is the identity instead of dropping
    /// them; also keeps clocks alive whose outcome is certainly the
    /// identity. Null events never count toward max_events.
    pub log_null: bool,
}

impl RunOptions {
    pub fn to_horizon(horizon: f64) -> RunOptions {
        RunOptions {
            horizon,
            max_events: None,
            log_null: false,
        }
    }
}

/// Append the keys active at `state` in a deterministic order. Keys whose
/// outcome is certainly the identity are suppressed unless `log_null`.
fn active_keys(
    state: &NestedPartition,
    params: &FragmentationParams,
    log_null: bool,
    keys: &mut Vec<ClockKey>,
) {
    keys.clear();
    let zeta = state.zeta();
    let xi = state.xi();
    for xb in 0..xi.num_blocks() {
        let inner = state.zeta_blocks_in_xi_block(xb);
        let siblings = inner.len() >= 2;
        let cmin = xi.block_elements(xb)[0] as u32;
        if siblings || log_null {
            for atom in 0..params.nu_out.len() {
                keys.push(ClockKey::DisOut {
                    atom: atom as u32,
                    block: cmin,
                });
            }
            if params.c_out > 0.0 {
                for &zb in &inner {
                    keys.push(ClockKey::ErodeOut {
                        block: zeta.block_elements(zb)[0] as u32,
                    });
                }
            }
        }
        for &zb in &inner {
            let elems = zeta.block_elements(zb);
            let lone_singleton = elems.len() == 1 && !siblings;
            if !lone_singleton || log_null {
                for atom in 0..params.nu_in.len() {
                    keys.push(ClockKey::DisIn {
                        atom: atom as u32,
                        block: elems[0] as u32,
                    });
                }
                if params.c_in2 > 0.0 {
                    for &e in &elems {
                        keys.push(ClockKey::ErodeIn2 { elem: e as u32 });
                    }
                }
            }
            if params.c_in1 > 0.0 && (elems.len() >= 2 || log_null) {
                for &e in &elems {
                    keys.push(ClockKey::ErodeIn1 { elem: e as u32 });
                }
            }
        }
    }
}

/// Resolve the state after the arrival `arrival` of `key` fires at `state`.
/// Returns the post-state and the block the event acted on.
fn apply_event(
    state: &NestedPartition,
    params: &FragmentationParams,
    key: ClockKey,
    seed: u64,
    arrival: u64,
) -> (NestedPartition, Mechanism, Vec<usize>) {
    match key {
        ClockKey::ErodeOut { block } => {
            let zb = state.zeta().block_of(block as usize);
            let elems = state.zeta().block_elements(zb);
            (detach_inner_block(state, zb), Mechanism::ErodeOut, elems)
        }
        ClockKey::ErodeIn1 { elem } => (
            detach_element_inner(state, elem as usize),
            Mechanism::ErodeIn1,
            vec![elem as usize],
        ),
        ClockKey::ErodeIn2 { elem } => (
            detach_element_both(state, elem as usize),
            Mechanism::ErodeIn2,
            vec![elem as usize],
        ),
        ClockKey::DisOut { atom, block } => {
            let s = &params.nu_out[atom as usize].atom;
            let xb = state.xi().block_of(block as usize);
            let inner = state.zeta_blocks_in_xi_block(xb);
            // one uniform per inner block, keyed by the block's identity
            let mut labels = Vec::with_capacity(inner.len());
            let mut shared: HashMap<usize, usize> = HashMap::new();
            let mut next = 0usize;
            for &zb in &inner {
                let bmin = state.zeta().block_elements(zb)[0] as u32;
                let mut rng =
                    RngHandle::keyed(seed, pack(TAG_PAINT_OUT, atom, block, bmin), arrival);
                let lab = match univariate_label_of(s, rng.uniform()) {
                    Some(i) => *shared.entry(i).or_insert_with(|| {
                        let v = next;
                        next += 1;
                        v
                    }),
                    None => {
                        let v = next;
                        next += 1;
                        v
                    }
                };
                labels.push(lab);
            }
            let grouping = Partition::from_assignment(&labels);
            (
                split_xi_block(state, xb, &grouping),
                Mechanism::DislocateOut {
                    atom: atom as usize,
                },
                state.xi().block_elements(xb),
            )
        }
        ClockKey::DisIn { atom, block } => {
            let p = &params.nu_in[atom as usize].atom;
            let zb = state.zeta().block_of(block as usize);
            let elems = state.zeta().block_elements(zb);
            // one uniform per element, keyed by the element's identity
            let labels: Vec<InnerLabel> = elems
                .iter()
                .map(|&e| {
                    let mut rng =
                        RngHandle::keyed(seed, pack(TAG_PAINT_IN, atom, block, e as u32), arrival);
                    inner_label_of(p, rng.uniform())
                })
                .collect();
            (
                apply_inner_split(state, zb, &labels),
                Mechanism::DislocateIn {
                    atom: atom as usize,
                },
                elems,
            )
        }
    }
}

/// Simulate the chain from `initial` until the horizon, the event cap, or
/// absorption, whichever comes first.
pub fn run(
    params: &FragmentationParams,
    initial: &NestedPartition,
    opts: &RunOptions,
    seed: u64,
) -> Result<Trajectory> {
    if opts.horizon.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::HorizonNonpositive(opts.horizon));
    }
    let mut clocks: HashMap<ClockKey, Clock> = HashMap::new();
    let mut keys: Vec<ClockKey> = Vec::new();
    let mut state = initial.clone();
    let mut t = 0.0f64;
    let mut events = Vec::new();
    let mut real_events = 0u64;
    let end_time;
    loop {
        if let Some(cap) = opts.max_events {
            if real_events >= cap {
                end_time = t;
                break;
            }
        }
        active_keys(&state, params, opts.log_null, &mut keys);
        if keys.is_empty() {
            end_time = opts.horizon;
            break;
        }
        let mut best: Option<(f64, ClockKey)> = None;
        for &k in &keys {
            let c = clocks
                .entry(k)
                .or_insert_with(|| Clock::new(seed, k, params));
            c.advance_past(t);
            let better = match best {
                None => true,
                Some((bt, bk)) => c.next < bt || (c.next == bt && k < bk),
            };
            if better {
                best = Some((c.next, k));
            }
        }
        let (tw, kw) = best.expect("non-empty key set");
        if tw > opts.horizon {
            end_time = opts.horizon;
            break;
        }
        t = tw;
        let arrival = {
            let c = clocks.get_mut(&kw).expect("winning clock exists");
            let a = c.arrival;
            c.consume();
            a
        };
        let (to, mechanism, block) = apply_event(&state, params, kw, seed, arrival);
        let null = to == state;
        if !null {
            state = to;
            real_events += 1;
        }
        if !null || opts.log_null {
            events.push(TrajectoryEvent {
                t,
                mechanism,
                block,
                state: state.clone(),
                null,
            });
        }
    }
    Ok(Trajectory {
        seed,
        initial: initial.clone(),
        horizon: opts.horizon,
        end_time,
        events,
    })
}

/// Run the chain from `initial` and, with the same seed, from the
/// restriction of `initial` to [n]. The per-identity clock keying makes the
/// second run the exact restriction of the first.
pub fn coupled_run(
    params: &FragmentationParams,
    initial: &NestedPartition,
    n: usize,
    opts: &RunOptions,
    seed: u64,
) -> Result<(Trajectory, Trajectory)> {
    let small_init = initial.restrict(n)?;
    let big = run(params, initial, opts, seed)?;
    let small = run(params, &small_init, opts, seed)?;
    Ok((big, small))
}

/// The sequence of (time, state) pairs visible at level n: events whose
/// restriction changes the restricted state.
pub fn restricted_jump_chain(traj: &Trajectory, n: usize) -> Result<Vec<(f64, NestedPartition)>> {
    let mut out = Vec::new();
    let mut cur = traj.initial.restrict(n)?;
    for ev in &traj.events {
        let s = ev.state.restrict(n)?;
        if s != cur {
            cur = s.clone();
            out.push((ev.t, s));
        }
    }
    Ok(out)
}

fn split_parent_count(pre: &Partition, post: &Partition) -> usize {
    let post_blocks: std::collections::HashSet<Vec<usize>> = (0..post.num_blocks())
        .map(|b| post.block_elements(b))
        .collect();
    (0..pre.num_blocks())
        .filter(|&b| !post_blocks.contains(&pre.block_elements(b)))
        .count()
}

/// Number of events whose change is not confined to one outer block and
/// one inner block of the pre-state.
pub fn branching_violations(traj: &Trajectory) -> usize {
    let mut prev = traj.initial.clone();
    let mut bad = 0;
    for ev in &traj.events {
        if split_parent_count(prev.xi(), ev.state.xi()) > 1
            || split_parent_count(prev.zeta(), ev.state.zeta()) > 1
        {
            bad += 1;
        }
        prev = ev.state.clone();
    }
    bad
}

/// Number of events whose post-state fails to refine the pre-state.
pub fn monotonicity_violations(traj: &Trajectory) -> usize {
    let mut prev = traj.initial.clone();
    let mut bad = 0;
    for ev in &traj.events {
        match ev.state.nested_leq(&prev) {
            Ok(true) => {}
            _ => bad += 1,
        }
        prev = ev.state.clone();
    }
    bad
}
