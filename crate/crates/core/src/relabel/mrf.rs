//! Pairwise Potts MRF over the face graph, min-sum loopy belief propagation
//! and an exhaustive reference solver.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::Label;

/// Unary costs per node and label plus Potts edges. Label `l` is stored at
/// index `l - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct MrfProblem {
    num_labels: usize,
    /// `num_nodes * num_labels`, label fastest.
    unary: Vec<f64>,
    /// `(f, g, w)` with `f < g`: cost `w` when the labels of `f` and `g` differ.
    edges: Vec<(usize, usize, f64)>,
    neighbors: Vec<Vec<(usize, usize)>>,
}

impl MrfProblem {
    pub fn new(num_labels: usize, unary: Vec<f64>, edges: Vec<(usize, usize, f64)>) -> Result<Self> {
        if num_labels == 0 {
            return Err(Error::Config("MRF needs at least one label".into()));
        }
        if !unary.len().is_multiple_of(num_labels) {
            return Err(Error::Config(format!(
                "{} unary costs do not divide into {num_labels} labels",
                unary.len()
            )));
        }
        if let Some(i) = unary.iter().position(|c| !c.is_finite()) {
            return Err(Error::Config(format!("unary cost {i} is not finite")));
        }
        let n = unary.len() / num_labels;
        let mut neighbors = vec![Vec::new(); n];
        let mut canon = Vec::with_capacity(edges.len());
        for (e, &(a, b, w)) in edges.iter().enumerate() {
            if a >= n || b >= n || a == b {
                return Err(Error::Config(format!("edge {e} ({a}, {b}) is invalid for {n} nodes")));
            }
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::Config(format!("edge {e} has weight {w}")));
            }
            let (f, g) = (a.min(b), a.max(b));
            neighbors[f].push((g, e));
            neighbors[g].push((f, e));
            canon.push((f, g, w));
        }
        Ok(MrfProblem {
            num_labels,
            unary,
            edges: canon,
            neighbors,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.unary.len() / self.num_labels
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    pub fn unary(&self, node: usize) -> &[f64] {
        &self.unary[node * self.num_labels..(node + 1) * self.num_labels]
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    /// Energy of a labeling (labels `1..=L`).
    pub fn energy(&self, labels: &[Label]) -> f64 {
        assert_eq!(labels.len(), self.num_nodes());
        let mut e: f64 = labels
            .iter()
            .enumerate()
            .map(|(f, &l)| self.unary(f)[l as usize - 1])
            .sum();
        for &(f, g, w) in &self.edges {
            if labels[f] != labels[g] {
                e += w;
            }
        }
        e
    }

    fn assignment(&self, labels: Vec<Label>) -> LabelAssignment {
        let energy = self.energy(&labels);
        LabelAssignment { labels, energy }
    }
}

/// A labeling with its MRF energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelAssignment {
    pub labels: Vec<Label>,
    pub energy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BpOptions {
    pub max_iters: usize,
    pub damping: f64,
    pub tol: f64,
}

impl Default for BpOptions {
    fn default() -> Self {
        BpOptions {
            max_iters: 100,
            damping: 0.5,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BpResult {
    /// Lowest-energy decoded labeling over all sweeps.
    pub assignment: LabelAssignment,
    pub converged: bool,
    pub iterations: usize,
}

fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] {
            best = i;
        }
    }
    best
}

/// Min-sum loopy belief propagation with synchronous damped updates.
pub fn loopy_bp(problem: &MrfProblem, opts: &BpOptions) -> BpResult {
    let n = problem.num_nodes();
    let nl = problem.num_labels;
    // messages[2 e] flows f -> g, messages[2 e + 1] flows g -> f
    let mut msgs = vec![0.0; problem.edges.len() * 2 * nl];
    let mut next = msgs.clone();
    let slot = |e: usize, from_low: bool| (2 * e + usize::from(!from_low)) * nl;

    let decode = |msgs: &[f64]| -> Vec<Label> {
        let mut belief = vec![0.0; nl];
        (0..n)
            .map(|f| {
                belief.copy_from_slice(problem.unary(f));
                for &(g, e) in &problem.neighbors[f] {
                    let s = slot(e, g < f);
                    for l in 0..nl {
                        belief[l] += msgs[s + l];
                    }
                }
                argmin(&belief) as Label + 1
            })
            .collect()
    };

    let mut best = problem.assignment(decode(&msgs));
    let mut converged = false;
    let mut iterations = 0;
    let mut h = vec![0.0; nl];
    for _ in 0..opts.max_iters {
        iterations += 1;
        let mut change: f64 = 0.0;
        for (e, &(f, g, w)) in problem.edges.iter().enumerate() {
            for (src, dst) in [(f, g), (g, f)] {
                h.copy_from_slice(problem.unary(src));
                for &(k, ek) in &problem.neighbors[src] {
                    if k == dst && ek == e {
                        continue;
                    }
                    let s = slot(ek, k < src);
                    for l in 0..nl {
                        h[l] += msgs[s + l];
                    }
                }
                let hmin = h.iter().copied().fold(f64::INFINITY, f64::min);
                let out = slot(e, src < dst);
                for l in 0..nl {
                    let m = h[l].min(hmin + w) - hmin;
                    let damped = opts.damping * msgs[out + l] + (1.0 - opts.damping) * m;
                    change = change.max((damped - msgs[out + l]).abs());
                    next[out + l] = damped;
                }
            }
        }
        std::mem::swap(&mut msgs, &mut next);
        let cand = problem.assignment(decode(&msgs));
        if cand.energy < best.energy {
            best = cand;
        }
        if change < opts.tol {
            converged = true;
            break;
        }
    }
    BpResult {
        assignment: best,
        converged,
        iterations,
    }
}

/// Exact minimizer by enumeration in lexicographic order; the first minimum
/// found wins ties.
pub fn brute_force_map(problem: &MrfProblem) -> Result<LabelAssignment> {
    let n = problem.num_nodes();
    let nl = problem.num_labels;
    let states = (nl as f64).powi(n as i32);
    if states > (1u64 << 24) as f64 {
        return Err(Error::ProblemTooLarge { states });
    }
    let mut labels: Vec<Label> = vec![1; n];
    let mut best = problem.assignment(labels.clone());
    loop {
        // increment the last position fastest
        let mut pos = n;
        loop {
            if pos == 0 {
                return Ok(best);
            }
            pos -= 1;
            if (labels[pos] as usize) < nl {
                labels[pos] += 1;
                break;
            }
            labels[pos] = 1;
        }
        let e = problem.energy(&labels);
        if e < best.energy {
            best = LabelAssignment {
                labels: labels.clone(),
                energy: e,
            };
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn chain(n: usize, nl: usize, w: f64, seed: u64) -> MrfProblem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let unary = (0..n * nl).map(|_| rng.random::<f64>()).collect();
        let edges = (0..n - 1).map(|i| (i, i + 1, w)).collect();
        MrfProblem::new(nl, unary, edges).unwrap()
    }

    /// Viterbi on a chain as an independent oracle.
    fn chain_dp(p: &MrfProblem, w: f64) -> f64 {
        let nl = p.num_labels();
        let mut cost = p.unary(0).to_vec();
        for f in 1..p.num_nodes() {
            let m = cost.iter().copied().fold(f64::INFINITY, f64::min);
            cost = (0..nl).map(|l| p.unary(f)[l] + cost[l].min(m + w)).collect();
        }
        cost.into_iter().fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn single_node() {
        let p = MrfProblem::new(3, vec![0.5, 0.2, 0.9], vec![]).unwrap();
        assert_eq!(brute_force_map(&p).unwrap().labels, vec![2]);
        assert_eq!(loopy_bp(&p, &BpOptions::default()).assignment.labels, vec![2]);
    }

    #[test]
    fn chain_matches_dynamic_programming() {
        for seed in 0..5 {
            let p = chain(8, 3, 0.3, seed);
            let bf = brute_force_map(&p).unwrap();
            assert!((bf.energy - chain_dp(&p, 0.3)).abs() < 1e-12);
            let bp = loopy_bp(&p, &BpOptions::default());
            assert!(bp.assignment.energy <= bf.energy + 1e-9);
        }
    }

    #[test]
    fn separable_without_edges() {
        let p = chain(5, 4, 0.0, 7);
        let bf = brute_force_map(&p).unwrap();
        for f in 0..5 {
            assert_eq!(bf.labels[f] as usize, argmin(p.unary(f)) + 1);
        }
    }

    #[test]
    fn uniform_costs_pick_label_one() {
        let p = MrfProblem::new(4, vec![0.3; 12], vec![(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap();
        assert_eq!(loopy_bp(&p, &BpOptions::default()).assignment.labels, vec![1, 1, 1]);
        assert_eq!(brute_force_map(&p).unwrap().labels, vec![1, 1, 1]);
    }

    #[test]
    fn strong_coupling_agrees() {
        let p = MrfProblem::new(2, vec![0.0, 1.0, 1.5, 0.0], vec![(0, 1, 100.0)]).unwrap();
        let bf = brute_force_map(&p).unwrap();
        assert_eq!(bf.labels, vec![2, 2]);
        assert_eq!(loopy_bp(&p, &BpOptions::default()).assignment.labels, vec![2, 2]);
    }

    #[test]
    fn too_large_is_refused() {
        let p = chain(13, 4, 0.1, 0);
        assert!(matches!(brute_force_map(&p), Err(Error::ProblemTooLarge { .. })));
    }

    #[test]
    fn stored_energy_matches_reevaluation() {
        let p = chain(6, 4, 0.25, 3);
        let a = loopy_bp(&p, &BpOptions::default()).assignment;
        assert!((p.energy(&a.labels) - a.energy).abs() < 1e-12);
    }
}
