//! Hard constraints, extension cost, and the grow/prune coarse path search.

use std::cmp::Ordering;

use rayon::prelude::*;

use crate::array::ArrayModel;
use crate::error::{Error, Result};
use crate::params::GpParams;

use super::features::CoiSet;
use super::Coi;

/// Seed penalty when the first contact's blob response is weak.
pub const SEED_PENALTY: f64 = 100.0;

/// A partial or complete path of candidate ids, basal-first.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidatePath {
    pub nodes: Vec<usize>,
    /// Sum of the per-extension costs, seed included.
    pub cost: f64,
}

fn normalized_deficit(max: f64, v: f64) -> f64 {
    if max > 0.0 {
        (max - v) / max
    } else {
        0.0
    }
}

/// Strict Heaviside step: `H(0) = 0`.
fn step(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Everything the coarse search needs, with neighbor lists precomputed.
pub struct SearchContext<'a> {
    pub set: &'a CoiSet,
    pub params: &'a GpParams,
    /// Spacings from the basal end; extension to node `i + 1` uses `spacings[i - 1]`.
    pub spacings: Vec<f64>,
    pub n: usize,
    pub e_half: usize,
    pub bend: (f64, f64),
    pub t_b_seed: f64,
    /// `neighbors[s][u]`: candidates admissible by distance and group for spacing slot `s`.
    neighbors: Vec<Vec<Vec<usize>>>,
    /// Spacing slot of each distinct spacing value.
    slot_values: Vec<f64>,
}

impl<'a> SearchContext<'a> {
    pub fn new(set: &'a CoiSet, array: &ArrayModel, params: &'a GpParams, t_b_seed: f64) -> Self {
        let spacings = array.basal_first_spacings();
        let mut slot_values: Vec<f64> = Vec::new();
        for &d in &spacings {
            if !slot_values.iter().any(|&s| (s - d).abs() < 1e-9) {
                slot_values.push(d);
            }
        }
        let cois = &set.cois;
        let neighbors = slot_values
            .iter()
            .map(|&d| {
                let group = set.esd.iter().position(|&e| (e - d).abs() < 1e-9);
                let (lo, hi) = (params.gamma1 * d, params.gamma2 * d);
                (0..cois.len())
                    .into_par_iter()
                    .map(|u| match group {
                        Some(g) => (0..cois.len())
                            .filter(|&v| {
                                if cois[v].group != g {
                                    return false;
                                }
                                let dist = (cois[v].pos - cois[u].pos).norm();
                                lo < dist && dist < hi
                            })
                            .collect(),
                        None => Vec::new(),
                    })
                    .collect()
            })
            .collect();
        let n = array.contact_count();
        SearchContext {
            set,
            params,
            spacings,
            n,
            e_half: n.div_ceil(2),
            bend: array.family.bend_thresholds(),
            t_b_seed,
            neighbors,
            slot_values,
        }
    }

    fn slot(&self, d: f64) -> usize {
        self.slot_values.iter().position(|&s| (s - d).abs() < 1e-9).unwrap()
    }

    fn coi(&self, id: usize) -> &Coi {
        &self.set.cois[id]
    }

    /// Group index of spacing `d`, if the array has it.
    fn group_of(&self, d: f64) -> Option<usize> {
        self.set.esd.iter().position(|&e| (e - d).abs() < 1e-9)
    }

    /// The five hard constraints for appending `c` to `path` (nonempty).
    pub fn reachable(&self, c: usize, path: &[usize]) -> bool {
        let i = path.len() + 1;
        if path.is_empty() || i > self.n {
            return false;
        }
        let d = self.spacings[i - 2];
        let cc = self.coi(c);
        let last = self.coi(path[i - 2]);
        let dist = (cc.pos - last.pos).norm();
        if !(self.params.gamma1 * d < dist && dist < self.params.gamma2 * d) {
            return false;
        }
        if self.group_of(d) != Some(cc.group) {
            return false;
        }
        if path.iter().any(|&q| self.coi(q).same_site(cc)) {
            return false;
        }
        let region = cc.region();
        if last.region() != region && path[..i - 2].iter().any(|&q| self.coi(q).region() == region) {
            return false;
        }
        if i >= 3 {
            let prev = self.coi(path[i - 3]);
            if prev.region() == region && last.region() == region {
                let inc = prev.k < last.k && last.k < cc.k;
                let dec = prev.k > last.k && last.k > cc.k;
                if !(inc || dec) {
                    return false;
                }
            }
        }
        true
    }

    /// Bending measure `1 - cos` of the turn at the path end.
    pub fn bend_measure(&self, c: usize, last: usize, prev: usize) -> f64 {
        let a = self.coi(c).pos - self.coi(last).pos;
        let b = self.coi(last).pos - self.coi(prev).pos;
        1.0 - a.dot(&b) / (a.norm() * b.norm())
    }

    /// Threshold on the bending measure at extension index `i - 1`.
    pub fn bend_threshold(&self, i_minus_1: usize) -> f64 {
        if i_minus_1 <= self.e_half {
            self.bend.0
        } else {
            self.bend.1
        }
    }

    /// Intensity part of the extension cost (before the `rho` weight).
    pub fn intensity_cost(&self, c: usize, i: usize) -> f64 {
        let cc = self.coi(c);
        let d = self.set.esd[cc.group];
        let omega = if i == 1 && cc.blob < self.t_b_seed { SEED_PENALTY } else { 1.0 };
        omega
            * (normalized_deficit(self.set.i_max, cc.intensity)
                + self.params.lambda_b(d) * normalized_deficit(self.set.ib_max, cc.blob)
                + self.params.lambda_i(d) * normalized_deficit(self.set.iv_max, cc.vessel))
    }

    /// Shape part of the extension cost.
    pub fn shape_cost(&self, c: usize, path: &[usize]) -> f64 {
        let i = path.len() + 1;
        if i == 1 {
            return 0.0;
        }
        let p = self.params;
        let d = self.spacings[i - 2];
        let cc = self.coi(c);
        let last = self.coi(path[i - 2]);
        let dist = (cc.pos - last.pos).norm();
        let mu_d = if dist < d { p.mu_d1 } else { p.mu_d2 };
        let c_d = (dist - d).abs();
        let c_a = if i >= 3 {
            let z = self.bend_threshold(i - 1);
            (self.bend_measure(c, path[i - 2], path[i - 3]) - z).max(0.0)
        } else {
            0.0
        };
        let dd = cc.doi - last.doi;
        let c_ins = step(-dd) + step(dd.abs() - 180.0);
        mu_d * c_d + p.mu_s * (c_a + c_ins)
    }

    /// Cost of appending `c` to `path` (or seeding with `c` when `path` is empty).
    pub fn extension_cost(&self, c: usize, path: &[usize]) -> f64 {
        self.params.rho * self.intensity_cost(c, path.len() + 1) + self.shape_cost(c, path)
    }

    /// Seed candidates: members of the first spacing's group.
    pub fn seeds(&self) -> Vec<usize> {
        match self.group_of(self.spacings[0]) {
            Some(g) => (0..self.set.cois.len()).filter(|&c| self.set.cois[c].group == g).collect(),
            None => Vec::new(),
        }
    }

    /// Candidates admissible by distance and group after `last` at extension index `i`.
    fn candidates(&self, last: usize, i: usize) -> &[usize] {
        &self.neighbors[self.slot(self.spacings[i - 2])][last]
    }

    /// Recomputes a path's cost from scratch.
    pub fn path_cost(&self, nodes: &[usize]) -> f64 {
        let mut cost = 0.0;
        for i in 0..nodes.len() {
            cost += self.extension_cost(nodes[i], &nodes[..i]);
        }
        cost
    }

    /// True when every extension of `nodes` satisfies the hard constraints.
    pub fn admissible(&self, nodes: &[usize]) -> bool {
        (1..nodes.len()).all(|i| self.reachable(nodes[i], &nodes[..i]))
    }

    /// Beam search keeping the `beam` cheapest paths after each grow stage.
    pub fn beam_search(&self, beam: usize) -> Result<CandidatePath> {
        let mut paths: Vec<CandidatePath> = self
            .seeds()
            .into_iter()
            .map(|c| CandidatePath { nodes: vec![c], cost: self.extension_cost(c, &[]) })
            .collect();
        if paths.is_empty() {
            return Err(Error::NoFixedLengthPath { reached: 0, wanted: self.n });
        }
        prune(&mut paths, beam);
        for i in 2..=self.n {
            let mut order: Vec<usize> = (0..paths.len()).collect();
            order.sort_by(|&a, &b| paths[a].nodes.cmp(&paths[b].nodes));
            let mut lex = vec![0usize; paths.len()];
            for (r, &p) in order.iter().enumerate() {
                lex[p] = r;
            }
            let children: Vec<(f64, usize, usize, usize)> = paths
                .par_iter()
                .enumerate()
                .flat_map_iter(|(pi, path)| {
                    let last = *path.nodes.last().unwrap();
                    self.candidates(last, i)
                        .iter()
                        .filter(|&&c| self.reachable(c, &path.nodes))
                        .map(|&c| (path.cost + self.extension_cost(c, &path.nodes), lex[pi], c, pi))
                        .collect::<Vec<_>>()
                })
                .collect();
            if children.is_empty() {
                return Err(Error::NoFixedLengthPath { reached: i - 1, wanted: self.n });
            }
            let cmp = |a: &(f64, usize, usize, usize), b: &(f64, usize, usize, usize)| {
                a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2))
            };
            let mut children = children;
            if children.len() > beam {
                children.select_nth_unstable_by(beam - 1, cmp);
                children.truncate(beam);
            }
            children.sort_by(cmp);
            paths = children
                .into_iter()
                .map(|(cost, _, c, pi)| {
                    let mut nodes = paths[pi].nodes.clone();
                    nodes.push(c);
                    CandidatePath { nodes, cost }
                })
                .collect();
        }
        Ok(paths.swap_remove(0))
    }

    /// Exhaustive enumeration of admissible length-N paths (test oracle).
    pub fn exhaustive(&self) -> Result<CandidatePath> {
        let mut best: Option<CandidatePath> = None;
        let mut stack = Vec::new();
        for s in self.seeds() {
            stack.clear();
            stack.push(s);
            let cost = self.extension_cost(s, &[]);
            self.dfs(&mut stack, cost, &mut best);
        }
        best.ok_or(Error::NoFixedLengthPath { reached: 0, wanted: self.n })
    }

    fn dfs(&self, stack: &mut Vec<usize>, cost: f64, best: &mut Option<CandidatePath>) {
        if stack.len() == self.n {
            let better = match best {
                None => true,
                Some(b) => match cost.total_cmp(&b.cost) {
                    Ordering::Less => true,
                    Ordering::Equal => stack.as_slice() < b.nodes.as_slice(),
                    Ordering::Greater => false,
                },
            };
            if better {
                *best = Some(CandidatePath { nodes: stack.clone(), cost });
            }
            return;
        }
        for c in 0..self.set.cois.len() {
            if self.reachable(c, stack) {
                let next = cost + self.extension_cost(c, stack);
                stack.push(c);
                self.dfs(stack, next, best);
                stack.pop();
            }
        }
    }
}

fn prune(paths: &mut Vec<CandidatePath>, beam: usize) {
    paths.sort_by(|a, b| a.cost.total_cmp(&b.cost).then(a.nodes.cmp(&b.nodes)));
    paths.truncate(beam);
}
