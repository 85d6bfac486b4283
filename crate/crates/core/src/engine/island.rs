use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::candidate::{best_index, rank_cmp, Candidate};

pub const DEFAULT_POPULATION_CAP: usize = 16;
pub const SOFTMAX_TEMPERATURE: f64 = 1.0;

/// Probabilities of the three parent-selection branches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingMix {
    pub p_random: f64,
    pub p_best: f64,
    pub p_weighted: f64,
}

impl Default for SamplingMix {
    fn default() -> Self {
        SamplingMix {
            p_random: 0.2,
            p_best: 0.4,
            p_weighted: 0.4,
        }
    }
}

impl SamplingMix {
    pub fn validate(&self) -> Result<(), String> {
        let ps = [self.p_random, self.p_best, self.p_weighted];
        if ps.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(format!("sampling probabilities must be nonnegative: {ps:?}"));
        }
        if (ps.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(format!("sampling probabilities must sum to 1: {ps:?}"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Island {
    pub index: usize,
    pub population: Vec<Candidate>,
    pub rng_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InsertOutcome {
    Inserted,
    DuplicateRejected,
    OutcompetedRejected,
}

impl Island {
    pub fn new(index: usize, rng_seed: u64) -> Self {
        Island {
            index,
            population: Vec::new(),
            rng_seed,
        }
    }

    pub fn best(&self) -> Option<&Candidate> {
        best_index(&self.population).map(|i| &self.population[i])
    }

    pub fn contains_hash(&self, hash: &str) -> bool {
        self.population.iter().any(|c| c.source_hash == hash)
    }
}

/// Picks a parent index: uniform, best, or softmax over totals.
pub fn sample_parent<R: Rng + ?Sized>(island: &Island, mix: &SamplingMix, rng: &mut R) -> usize {
    let pop = &island.population;
    assert!(!pop.is_empty(), "sampling from an empty island");
    let r: f64 = rng.gen();
    if r < mix.p_random {
        rng.gen_range(0..pop.len())
    } else if r < mix.p_random + mix.p_best {
        best_index(pop).expect("nonempty")
    } else {
        softmax_pick(pop, rng)
    }
}

fn softmax_pick<R: Rng + ?Sized>(pop: &[Candidate], rng: &mut R) -> usize {
    let max = pop.iter().map(Candidate::total).fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = pop
        .iter()
        .map(|c| ((c.total() - max) / SOFTMAX_TEMPERATURE).exp())
        .collect();
    let sum: f64 = weights.iter().sum();
    let mut x = rng.gen::<f64>() * sum;
    for (i, w) in weights.iter().enumerate() {
        if x < *w {
            return i;
        }
        x -= w;
    }
    pop.len() - 1
}

/// Indices of the two context programs and the inspiration for `parent`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContextPick {
    pub parent: usize,
    pub best_two: [usize; 2],
    pub inspiration: usize,
}

/// Top two by total excluding the parent, then one uniform inspiration not
/// already chosen. Small populations reuse members.
pub fn build_context<R: Rng + ?Sized>(island: &Island, parent: usize, rng: &mut R) -> ContextPick {
    let pop = &island.population;
    let mut ranked: Vec<usize> = (0..pop.len()).filter(|&i| i != parent).collect();
    ranked.sort_by(|&a, &b| rank_cmp(&pop[a], &pop[b]).then(a.cmp(&b)));
    ranked.push(parent);
    let best_two = [ranked[0], *ranked.get(1).unwrap_or(&ranked[0])];

    let fresh: Vec<usize> = (0..pop.len())
        .filter(|i| *i != parent && !best_two.contains(i))
        .collect();
    let inspiration = if !fresh.is_empty() {
        fresh[rng.gen_range(0..fresh.len())]
    } else {
        let others: Vec<usize> = (0..pop.len()).filter(|&i| i != parent).collect();
        if others.is_empty() {
            parent
        } else {
            others[rng.gen_range(0..others.len())]
        }
    };
    ContextPick {
        parent,
        best_two,
        inspiration,
    }
}

/// Adds `child` if it is novel and, on a full island, beats the current minimum.
pub fn insert_child(island: &mut Island, child: Candidate, cap: usize) -> InsertOutcome {
    if island.contains_hash(&child.source_hash) {
        return InsertOutcome::DuplicateRejected;
    }
    if island.population.len() < cap {
        island.population.push(child);
        return InsertOutcome::Inserted;
    }
    let worst = (0..island.population.len())
        .max_by(|&a, &b| rank_cmp(&island.population[a], &island.population[b]).then(a.cmp(&b)))
        .expect("full island");
    if child.total() > island.population[worst].total() {
        island.population[worst] = child;
        InsertOutcome::Inserted
    } else {
        InsertOutcome::OutcompetedRejected
    }
}

/// Ring migration on period boundaries: each island's best (taken before any
/// transfer) is offered to the next island. Returns the outcomes in ring order.
pub fn migrate(
    islands: &mut [Island],
    period: usize,
    iter: usize,
    cap: usize,
    mut clone_id: impl FnMut(usize, usize) -> String,
) -> Vec<(usize, usize, InsertOutcome)> {
    let n = islands.len();
    if n < 2 || period == 0 || !iter.is_multiple_of(period) {
        return Vec::new();
    }
    let bests: Vec<Option<Candidate>> = islands.iter().map(|i| i.best().cloned()).collect();
    let mut out = Vec::new();
    for (from, best) in bests.into_iter().enumerate() {
        let Some(best) = best else { continue };
        let to = (from + 1) % n;
        let migrant = best.clone_as(clone_id(from, to), to);
        out.push((from, to, insert_child(&mut islands[to], migrant, cap)));
    }
    out
}
