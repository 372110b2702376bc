//! Trajectory serialization: a JSONL stream (config header, one line per
//! event, end-time trailer) plus Newick trees for both partition levels and
//! a leaf map tying gene lineages to the species that contain them.

use std::collections::HashMap;
use std::fs;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mass::FragmentationParams;
use crate::partitions::{NestedPartition, Partition};
use crate::simulator::{Mechanism, RunOptions, Trajectory, TrajectoryEvent};

/// Everything needed to reproduce a run byte for byte.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunConfig {
    pub n: usize,
    pub seed: u64,
    /// None means unbounded (the run is stopped by `max_events`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_events: Option<u64>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub log_null: bool,
    /// Initial state in text form, e.g. "1,3|2 ; 1,2,3".
    pub initial: String,
    pub params: FragmentationParams,
}

fn is_false(b: &bool) -> bool {
    !*b
}

impl RunConfig {
    pub fn new(
        params: &FragmentationParams,
        initial: &NestedPartition,
        opts: &RunOptions,
        seed: u64,
    ) -> RunConfig {
        RunConfig {
            n: initial.n(),
            seed,
            horizon: if opts.horizon.is_finite() {
                Some(opts.horizon)
            } else {
                None
            },
            max_events: opts.max_events,
            log_null: opts.log_null,
            initial: initial.to_string(),
            params: params.clone(),
        }
    }

    pub fn options(&self) -> RunOptions {
        RunOptions {
            horizon: self.horizon.unwrap_or(f64::INFINITY),
            max_events: self.max_events,
            log_null: self.log_null,
        }
    }

    pub fn initial_state(&self) -> Result<NestedPartition> {
        self.initial.parse()
    }
}

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    version: String,
    config: RunConfig,
}

#[derive(Serialize, Deserialize)]
struct EventLine {
    t: f64,
    mech: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    atom: Option<usize>,
    block: Vec<usize>,
    zeta: String,
    xi: String,
    #[serde(default, skip_serializing_if = "is_false")]
    null: bool,
}

#[derive(Serialize, Deserialize)]
struct TrailerLine {
    /// None means the run never terminated in finite time.
    end_time: Option<f64>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Line {
    Header(HeaderLine),
    Event(EventLine),
    Trailer(TrailerLine),
}

/// One JSON object per line: header, then events in order, then trailer.
pub fn trajectory_to_jsonl(config: &RunConfig, traj: &Trajectory) -> Result<String> {
    let mut out = String::new();
    let header = HeaderLine {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
    };
    out.push_str(&serde_json::to_string(&header)?);
    out.push('\n');
    for ev in &traj.events {
        let line = EventLine {
            t: ev.t,
            mech: ev.mechanism.label().to_string(),
            atom: ev.mechanism.atom(),
            block: ev.block.clone(),
            zeta: ev.state.zeta().to_string(),
            xi: ev.state.xi().to_string(),
            null: ev.null,
        };
        out.push_str(&serde_json::to_string(&line)?);
        out.push('\n');
    }
    let trailer = TrailerLine {
        end_time: if traj.end_time.is_finite() {
            Some(traj.end_time)
        } else {
            None
        },
    };
    out.push_str(&serde_json::to_string(&trailer)?);
    out.push('\n');
    Ok(out)
}

/// Inverse of [`trajectory_to_jsonl`]. States are revalidated on the way in,
/// so a hand-edited file that breaks nesting is rejected.
pub fn trajectory_from_jsonl(text: &str) -> Result<(RunConfig, Trajectory)> {
    let mut config: Option<RunConfig> = None;
    let mut events: Vec<TrajectoryEvent> = Vec::new();
    let mut end_time: Option<f64> = None;
    for (idx, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let line: Line = serde_json::from_str(raw)
            .map_err(|e| Error::Parse(format!("line {}: {e}", idx + 1)))?;
        match line {
            Line::Header(h) => {
                if config.is_some() {
                    return Err(Error::Parse(format!("line {}: duplicate header", idx + 1)));
                }
                config = Some(h.config);
            }
            Line::Event(ev) => {
                let zeta: Partition = ev.zeta.parse()?;
                let xi: Partition = ev.xi.parse()?;
                events.push(TrajectoryEvent {
                    t: ev.t,
                    mechanism: Mechanism::from_parts(&ev.mech, ev.atom)?,
                    block: ev.block,
                    state: NestedPartition::new(zeta, xi)?,
                    null: ev.null,
                });
            }
            Line::Trailer(tr) => {
                end_time = Some(tr.end_time.unwrap_or(f64::INFINITY));
            }
        }
    }
    let config = config.ok_or_else(|| Error::Parse("missing config header line".into()))?;
    let end_time = end_time.ok_or_else(|| Error::Parse("missing end_time trailer line".into()))?;
    let initial = config.initial_state()?;
    let traj = Trajectory {
        seed: config.seed,
        initial,
        horizon: config.horizon.unwrap_or(f64::INFINITY),
        end_time,
        events,
    };
    Ok((config, traj))
}

/// One lineage of a single partition level: born at `birth` with the given
/// block, either still alive at the end or split at a known time into the
/// listed child lineages.
struct Lineage {
    birth: f64,
    block: Vec<usize>,
    split: Option<(f64, Vec<usize>)>,
}

/// Replays a refining sequence of partitions into a forest of lineages.
/// Children appear in canonical (least-element) order. Errors if some step
/// is not a refinement of the previous one.
fn build_lineages(initial: &Partition, steps: &[(f64, Partition)]) -> Result<Vec<Lineage>> {
    let mut nodes: Vec<Lineage> = Vec::new();
    let mut open: Vec<usize> = Vec::new();
    for block in initial.blocks() {
        open.push(nodes.len());
        nodes.push(Lineage {
            birth: 0.0,
            block,
            split: None,
        });
    }
    for (t, part) in steps {
        let mut next_open: Vec<usize> = Vec::new();
        let mut splits: Vec<(usize, Vec<usize>)> = Vec::new();
        for nb in part.blocks() {
            let pid = open
                .iter()
                .copied()
                .find(|&id| nodes[id].block.binary_search(&nb[0]).is_ok())
                .expect("open blocks cover every element");
            if !nb.iter().all(|e| nodes[pid].block.binary_search(e).is_ok()) {
                return Err(Error::Parse(format!(
                    "state at t = {t} is not a refinement of its predecessor"
                )));
            }
            if nodes[pid].block == nb {
                next_open.push(pid);
            } else {
                let cid = nodes.len();
                nodes.push(Lineage {
                    birth: *t,
                    block: nb,
                    split: None,
                });
                match splits.iter_mut().find(|(p, _)| *p == pid) {
                    Some(entry) => entry.1.push(cid),
                    None => splits.push((pid, vec![cid])),
                }
                next_open.push(cid);
            }
        }
        for (pid, kids) in splits {
            nodes[pid].split = Some((*t, kids));
        }
        open = next_open;
    }
    Ok(nodes)
}

fn render_newick(
    nodes: &[Lineage],
    id: usize,
    end_time: f64,
    names: &HashMap<usize, String>,
) -> String {
    let node = &nodes[id];
    match &node.split {
        Some((ts, kids)) => {
            let inner: Vec<String> = kids
                .iter()
                .map(|&k| render_newick(nodes, k, end_time, names))
                .collect();
            format!("({}):{}", inner.join(","), ts - node.birth)
        }
        None => format!("{}:{}", names[&id], end_time - node.birth),
    }
}

/// Leaf names paired with their element sets, in naming order.
type NamedLeaves = Vec<(String, Vec<usize>)>;

/// Newick text (one tree per line, roots in least-element order) together
/// with the named leaves in naming order.
fn newick_forest(
    initial: &Partition,
    steps: &[(f64, Partition)],
    end_time: f64,
    prefix: &str,
) -> Result<(String, NamedLeaves)> {
    let nodes = build_lineages(initial, steps)?;
    let roots: Vec<usize> = (0..initial.num_blocks()).collect();
    let mut leaf_ids: Vec<usize> = (0..nodes.len())
        .filter(|&i| nodes[i].split.is_none())
        .collect();
    leaf_ids.sort_by_key(|&i| nodes[i].block[0]);
    let mut names: HashMap<usize, String> = HashMap::new();
    let mut leaves: NamedLeaves = Vec::new();
    for (k, &id) in leaf_ids.iter().enumerate() {
        let name = format!("{prefix}{}", k + 1);
        names.insert(id, name.clone());
        leaves.push((name, nodes[id].block.clone()));
    }
    let mut text = String::new();
    for root in roots {
        text.push_str(&render_newick(&nodes, root, end_time, &names));
        text.push_str(";\n");
    }
    Ok((text, leaves))
}

#[derive(Serialize, Deserialize)]
struct SpeciesLeaf {
    name: String,
    elements: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct GeneLeaf {
    name: String,
    elements: Vec<usize>,
    species: String,
}

#[derive(Serialize, Deserialize)]
struct LeafMap {
    species: Vec<SpeciesLeaf>,
    genes: Vec<GeneLeaf>,
}

#[derive(Debug)]
pub struct TreeExport {
    /// Newick forest of the outer (species) level.
    pub species: String,
    /// Newick forest of the inner (gene) level.
    pub gene: String,
    /// JSON map from leaf names to element sets and containing species.
    pub map_json: String,
}

/// Builds both trees from a trajectory. Leaves are the final blocks, named
/// s1, s2, ... and g1, g2, ... by least element; edge lengths are lifetimes,
/// with still-open lineages cut at the trajectory's end time.
pub fn export_trees(traj: &Trajectory) -> Result<TreeExport> {
    let xi_steps = level_steps(traj, |s| s.xi());
    let zeta_steps = level_steps(traj, |s| s.zeta());
    let (species, species_leaves) =
        newick_forest(traj.initial.xi(), &xi_steps, traj.end_time, "s")?;
    let (gene, gene_leaves) = newick_forest(traj.initial.zeta(), &zeta_steps, traj.end_time, "g")?;

    let species_entries: Vec<SpeciesLeaf> = species_leaves
        .iter()
        .map(|(name, elements)| SpeciesLeaf {
            name: name.clone(),
            elements: elements.clone(),
        })
        .collect();
    let gene_entries: Vec<GeneLeaf> = gene_leaves
        .iter()
        .map(|(name, elements)| {
            let species = species_leaves
                .iter()
                .find(|(_, sb)| sb.binary_search(&elements[0]).is_ok())
                .map(|(sn, _)| sn.clone())
                .expect("every gene block sits inside a species block");
            GeneLeaf {
                name: name.clone(),
                elements: elements.clone(),
                species,
            }
        })
        .collect();
    let map_json = serde_json::to_string_pretty(&LeafMap {
        species: species_entries,
        genes: gene_entries,
    })?;
    Ok(TreeExport {
        species,
        gene,
        map_json,
    })
}

/// Times at which the chosen level actually changes, with the new partition.
fn level_steps(
    traj: &Trajectory,
    pick: impl Fn(&NestedPartition) -> &Partition,
) -> Vec<(f64, Partition)> {
    let mut steps: Vec<(f64, Partition)> = Vec::new();
    let mut current = pick(&traj.initial).clone();
    for ev in &traj.events {
        let next = pick(&ev.state);
        if *next != current {
            current = next.clone();
            steps.push((ev.t, current.clone()));
        }
    }
    steps
}

/// Writes `<stem>.jsonl`, `<stem>.species.nwk`, `<stem>.gene.nwk` and
/// `<stem>.map.json`; returns the paths in that order.
pub fn write_run(stem: &str, config: &RunConfig, traj: &Trajectory) -> Result<Vec<PathBuf>> {
    let jsonl = trajectory_to_jsonl(config, traj)?;
    let trees = export_trees(traj)?;
    let files = [
        (format!("{stem}.jsonl"), jsonl),
        (format!("{stem}.species.nwk"), trees.species),
        (format!("{stem}.gene.nwk"), trees.gene),
        (format!("{stem}.map.json"), trees.map_json),
    ];
    let mut paths = Vec::new();
    for (name, contents) in files {
        let path = PathBuf::from(name);
        fs::write(&path, contents)?;
        paths.push(path);
    }
    Ok(paths)
}

/// Reads a `.jsonl` file produced by [`write_run`].
pub fn read_run_file(path: &std::path::Path) -> Result<(RunConfig, Trajectory)> {
    let text = fs::read_to_string(path)?;
    trajectory_from_jsonl(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::simulator::run;

    fn mixed_run(seed: u64, log_null: bool) -> (RunConfig, Trajectory) {
        let params = fixtures::mixed();
        let initial = NestedPartition::coarsest(5);
        let opts = RunOptions {
            horizon: 3.0,
            max_events: None,
            log_null,
        };
        let traj = run(&params, &initial, &opts, seed).unwrap();
        (RunConfig::new(&params, &initial, &opts, seed), traj)
    }

    #[test]
    fn jsonl_round_trips_byte_for_byte() {
        let (config, traj) = mixed_run(11, true);
        assert!(traj.events.iter().any(|e| e.null), "want nulls in fixture");
        let text = trajectory_to_jsonl(&config, &traj).unwrap();
        let (config2, traj2) = trajectory_from_jsonl(&text).unwrap();
        assert_eq!(traj2, traj);
        let text2 = trajectory_to_jsonl(&config2, &traj2).unwrap();
        assert_eq!(text2, text);
    }

    #[test]
    fn jsonl_is_deterministic_across_runs() {
        let (ca, ta) = mixed_run(7, false);
        let (cb, tb) = mixed_run(7, false);
        assert_eq!(
            trajectory_to_jsonl(&ca, &ta).unwrap(),
            trajectory_to_jsonl(&cb, &tb).unwrap()
        );
    }

    #[test]
    fn jsonl_missing_trailer_rejected() {
        let (config, traj) = mixed_run(3, false);
        let text = trajectory_to_jsonl(&config, &traj).unwrap();
        let truncated: String = text
            .lines()
            .take(text.lines().count() - 1)
            .map(|l| format!("{l}\n"))
            .collect();
        let err = trajectory_from_jsonl(&truncated).unwrap_err();
        assert_eq!(err.code(), "PARSE");
    }

    #[test]
    fn zero_event_tree_is_single_leaf_per_root() {
        let traj = Trajectory {
            seed: 0,
            initial: NestedPartition::coarsest(4),
            horizon: 2.5,
            end_time: 2.5,
            events: vec![],
        };
        let trees = export_trees(&traj).unwrap();
        assert_eq!(trees.species, "s1:2.5;\n");
        assert_eq!(trees.gene, "g1:2.5;\n");
        let map: LeafMap = serde_json::from_str(&trees.map_json).unwrap();
        assert_eq!(map.genes[0].species, "s1");
        assert_eq!(map.species[0].elements, vec![1, 2, 3, 4]);
    }

    #[test]
    fn forest_renders_one_tree_per_root() {
        let traj = Trajectory {
            seed: 0,
            initial: "1|2 ; 1|2".parse().unwrap(),
            horizon: 1.5,
            end_time: 1.5,
            events: vec![],
        };
        let trees = export_trees(&traj).unwrap();
        assert_eq!(trees.species, "s1:1.5;\ns2:1.5;\n");
    }

    #[test]
    fn split_times_become_edge_lengths() {
        let e1 = TrajectoryEvent {
            t: 1.0,
            mechanism: Mechanism::ErodeIn1,
            block: vec![2],
            state: "1,3|2 ; 1,2,3".parse().unwrap(),
            null: false,
        };
        let e2 = TrajectoryEvent {
            t: 2.0,
            mechanism: Mechanism::ErodeOut,
            block: vec![2],
            state: "1,3|2 ; 1,3|2".parse().unwrap(),
            null: false,
        };
        let traj = Trajectory {
            seed: 0,
            initial: NestedPartition::coarsest(3),
            horizon: 3.0,
            end_time: 3.0,
            events: vec![e1, e2],
        };
        let trees = export_trees(&traj).unwrap();
        assert_eq!(trees.species, "(s1:1,s2:1):2;\n");
        assert_eq!(trees.gene, "(g1:2,g2:2):1;\n");
        let map: LeafMap = serde_json::from_str(&trees.map_json).unwrap();
        assert_eq!(map.species.len(), 2);
        assert_eq!(map.genes.len(), 2);
        assert_eq!(map.genes[0].elements, vec![1, 3]);
        assert_eq!(map.genes[0].species, "s1");
        assert_eq!(map.genes[1].elements, vec![2]);
        assert_eq!(map.genes[1].species, "s2");
    }

    #[test]
    fn non_refining_sequence_rejected() {
        let e1 = TrajectoryEvent {
            t: 1.0,
            mechanism: Mechanism::ErodeIn1,
            block: vec![2],
            state: "1,3|2 ; 1,3|2".parse().unwrap(),
            null: false,
        };
        let e2 = TrajectoryEvent {
            t: 2.0,
            mechanism: Mechanism::ErodeIn1,
            block: vec![2],
            state: "1,2,3 ; 1,2,3".parse().unwrap(),
            null: false,
        };
        let traj = Trajectory {
            seed: 0,
            initial: NestedPartition::coarsest(3),
            horizon: 3.0,
            end_time: 3.0,
            events: vec![e1, e2],
        };
        let err = export_trees(&traj).unwrap_err();
        assert_eq!(err.code(), "PARSE");
    }

    #[test]
    fn simulated_trees_are_deterministic_and_named_consistently() {
        let (_, traj) = mixed_run(42, false);
        let a = export_trees(&traj).unwrap();
        let b = export_trees(&traj).unwrap();
        assert_eq!(a.species, b.species);
        assert_eq!(a.gene, b.gene);
        assert_eq!(a.map_json, b.map_json);
        let map: LeafMap = serde_json::from_str(&a.map_json).unwrap();
        let final_state = traj.final_state();
        assert_eq!(map.species.len(), final_state.xi().num_blocks());
        assert_eq!(map.genes.len(), final_state.zeta().num_blocks());
        for g in &map.genes {
            let s = map.species.iter().find(|s| s.name == g.species).unwrap();
            assert!(g.elements.iter().all(|e| s.elements.contains(e)));
        }
    }
}
