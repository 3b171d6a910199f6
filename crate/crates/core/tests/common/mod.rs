//! Independent oracles shared by the integration and acceptance tests.
//!
//! Nothing here calls into the library's probability code; the library is
//! only used for plain data types and for replaying a chosen draw sequence.

#![allow(dead_code)]

use std::collections::BTreeMap;

use acs_core::dist::PriorConfig;
use acs_core::grid::{Cell, GridSpec};
use acs_core::population::PopulationGrid;
use acs_core::survey::{replay_draws, SampleLog, SamplingMode, StageWeights};

pub fn ln_fact(n: usize) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

pub fn ln_choose(n: usize, k: usize) -> f64 {
    ln_fact(n) - ln_fact(k) - ln_fact(n - k)
}

/// Kolmogorov-Smirnov distance between draws and a density known up to a
/// constant on `[lo, hi]`, integrated by the midpoint rule on `points` cells.
pub fn ks_against_density(draws: &[f64], lo: f64, hi: f64, points: usize, ln_f: impl Fn(f64) -> f64) -> f64 {
    let h = (hi - lo) / points as f64;
    let ln_vals: Vec<f64> = (0..points).map(|i| ln_f(lo + (i as f64 + 0.5) * h)).collect();
    let top = ln_vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut cdf = Vec::with_capacity(points + 1);
    cdf.push(0.0);
    let mut acc = 0.0;
    for v in &ln_vals {
        acc += (v - top).exp();
        cdf.push(acc);
    }
    for c in &mut cdf {
        *c /= acc;
    }
    let at = |x: f64| {
        let pos = ((x - lo) / h).clamp(0.0, points as f64);
        let i = (pos.floor() as usize).min(points - 1);
        cdf[i] + (cdf[i + 1] - cdf[i]) * (pos - i as f64)
    };
    let mut sorted = draws.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = at(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Truncated binomial pmf on `1..=n`.
pub fn trunc_binom_pmf(k: usize, n: usize, p: f64) -> f64 {
    if k == 0 || k > n {
        return 0.0;
    }
    let ln = ln_choose(n, k) + k as f64 * p.ln() + (n - k) as f64 * (1.0 - p).ln();
    ln.exp() / (1.0 - (1.0 - p).powi(n as i32))
}

pub fn beta_pdf_unnorm(x: f64, a: f64, b: f64) -> f64 {
    x.powf(a - 1.0) * (1.0 - x).powf(b - 1.0)
}

/// `E[trunc_binom_pmf(k; n, q)]` for `q ~ Beta(a, b)`, by midpoint quadrature.
pub fn beta_mixed_trunc_binom(k: usize, n: usize, a: f64, b: f64) -> f64 {
    let points = 10_000;
    let h = 1.0 / points as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..points {
        let q = (i as f64 + 0.5) * h;
        let w = beta_pdf_unnorm(q, a, b);
        num += w * trunc_binom_pmf(k, n, q);
        den += w;
    }
    num / den
}

/// Probability of each size class of the draws in `log` when the unobserved
/// nonempty networks are exactly `hidden`.
pub fn selection_prob(log: &SampleLog, hidden: &[Vec<Cell>]) -> f64 {
    let cells = log.grid.cells();
    let weights: Vec<Vec<f64>> = log.stage_weights.iter().map(|w| w.expand(cells)).collect();
    let known = log.observed().known;
    if hidden.iter().flatten().any(|&c| known[c]) {
        return 0.0;
    }
    let mut removed = vec![false; cells];
    let mut prob = 1.0;
    for (j, draw) in log.draws.iter().enumerate() {
        let w = &weights[usize::from(draw.stage) - 1];
        let den: f64 = (0..cells).filter(|&c| !removed[c]).map(|c| w[c]).sum();
        // networks still unselected before this draw, as (size, mass)
        let mut pending: Vec<(usize, f64)> = log.draws[j..]
            .iter()
            .filter(|d| d.is_nonempty())
            .map(|d| {
                let members = network_members(d);
                (members.len(), members.iter().map(|&c| w[c]).sum())
            })
            .collect();
        pending.extend(hidden.iter().map(|net| (net.len(), net.iter().map(|&c| w[c]).sum())));
        let num = if draw.is_nonempty() {
            pending.iter().filter(|(y, _)| *y == draw.size()).map(|(_, mass)| mass).sum::<f64>()
        } else {
            den - pending.iter().map(|(_, mass)| mass).sum::<f64>()
        };
        prob *= num / den;
        for &c in &draw.removed_cells {
            removed[c] = true;
        }
    }
    prob
}

fn network_members(draw: &acs_core::survey::Draw) -> Vec<Cell> {
    match &draw.outcome {
        acs_core::survey::DrawOutcome::Network { members, .. } => members.clone(),
        acs_core::survey::DrawOutcome::Empty => Vec::new(),
    }
}

/// Class of a draw: `0` for an empty cell, otherwise the network size.
pub type ClassKey = Vec<usize>;

/// One leaf of the class tree: the cells selected and the path probability.
#[derive(Debug, Clone)]
pub struct Leaf {
    pub seeds: Vec<Cell>,
    pub classes: ClassKey,
    pub prob: f64,
}

struct TreeWalk<'a> {
    pop: &'a PopulationGrid,
    mode: SamplingMode,
    weights: Vec<Vec<f64>>,
    m1: usize,
    m: usize,
}

impl TreeWalk<'_> {
    fn removal(&self, cell: Cell) -> Vec<Cell> {
        if self.pop.counts[cell] == 0 {
            return vec![cell];
        }
        let members = self.pop.networks.network_of(cell).members.clone();
        let mut out = members.clone();
        if self.mode == SamplingMode::Cluster {
            for &c in &members {
                out.extend(self.pop.grid.adjacent(c).filter(|&nb| self.pop.counts[nb] == 0));
            }
        }
        out
    }

    fn grow(&self, removed: &mut Vec<bool>, seeds: &mut Vec<Cell>, classes: &mut ClassKey, prob: f64, out: &mut Vec<Leaf>) {
        let j = seeds.len();
        if j == self.m {
            out.push(Leaf { seeds: seeds.clone(), classes: classes.clone(), prob });
            return;
        }
        let w = &self.weights[if j < self.m1 { 0 } else { 1 }];
        let cells = self.pop.grid.cells();
        let den: f64 = (0..cells).filter(|&c| !removed[c]).map(|c| w[c]).sum();
        assert!(den > 0.0, "population too small for {} draws", self.m);
        // class -> (mass, representative cell)
        let mut classes_here: BTreeMap<usize, (f64, Option<Cell>)> = BTreeMap::new();
        for c in 0..cells {
            if removed[c] {
                continue;
            }
            let class = if self.pop.counts[c] == 0 { 0 } else { self.pop.networks.network_of(c).size() };
            let entry = classes_here.entry(class).or_insert((0.0, None));
            entry.0 += w[c];
            if entry.1.is_none() && w[c] > 0.0 {
                entry.1 = Some(c);
            }
        }
        for (class, (mass, rep)) in classes_here {
            let Some(rep) = rep else { continue };
            let gone: Vec<Cell> = self.removal(rep).into_iter().filter(|&c| !removed[c]).collect();
            for &c in &gone {
                removed[c] = true;
            }
            seeds.push(rep);
            classes.push(class);
            self.grow(removed, seeds, classes, prob * mass / den, out);
            seeds.pop();
            classes.pop();
            for &c in &gone {
                removed[c] = false;
            }
        }
    }
}

/// Every class sequence of `m` draws, continued from a canonical
/// representative of each class.
pub fn class_tree(pop: &PopulationGrid, mode: SamplingMode, weights: &[StageWeights], m1: usize, m: usize) -> Vec<Leaf> {
    let cells = pop.grid.cells();
    let mut expanded: Vec<Vec<f64>> = weights.iter().map(|w| w.expand(cells)).collect();
    if expanded.len() == 1 {
        expanded.push(expanded[0].clone());
    }
    let walk = TreeWalk { pop, mode, weights: expanded, m1, m };
    let mut out = Vec::new();
    walk.grow(&mut vec![false; cells], &mut Vec::new(), &mut Vec::new(), 1.0, &mut out);
    out
}

/// Probability of every class sequence, summing over every individual cell
/// sequence.
pub fn class_sequence_probs(pop: &PopulationGrid, mode: SamplingMode, weights: &[f64], m: usize) -> BTreeMap<ClassKey, f64> {
    let cells = pop.grid.cells();
    let tw = TreeWalk { pop, mode, weights: vec![weights.to_vec(); 2], m1: m, m };
    let mut out = BTreeMap::new();
    fn rec(tw: &TreeWalk<'_>, removed: &mut Vec<bool>, classes: &mut ClassKey, prob: f64, out: &mut BTreeMap<ClassKey, f64>) {
        if classes.len() == tw.m {
            *out.entry(classes.clone()).or_insert(0.0) += prob;
            return;
        }
        let w = &tw.weights[0];
        let cells = tw.pop.grid.cells();
        let den: f64 = (0..cells).filter(|&c| !removed[c]).map(|c| w[c]).sum();
        for c in 0..cells {
            if removed[c] || w[c] <= 0.0 {
                continue;
            }
            let class = if tw.pop.counts[c] == 0 { 0 } else { tw.pop.networks.network_of(c).size() };
            let gone: Vec<Cell> = tw.removal(c).into_iter().filter(|&x| !removed[x]).collect();
            for &x in &gone {
                removed[x] = true;
            }
            classes.push(class);
            rec(tw, removed, classes, prob * w[c] / den, out);
            classes.pop();
            for &x in &gone {
                removed[x] = false;
            }
        }
    }
    rec(&tw, &mut vec![false; cells], &mut Vec::new(), 1.0, &mut out);
    out
}

/// Every individual cell sequence of `m` single-stage draws with its probability.
pub fn cell_sequences(pop: &PopulationGrid, mode: SamplingMode, weights: &[f64], m: usize) -> Vec<(Vec<Cell>, f64)> {
    let cells = pop.grid.cells();
    let tw = TreeWalk { pop, mode, weights: vec![weights.to_vec(); 2], m1: m, m };
    let mut out = Vec::new();
    fn rec(tw: &TreeWalk<'_>, removed: &mut Vec<bool>, seeds: &mut Vec<Cell>, prob: f64, out: &mut Vec<(Vec<Cell>, f64)>) {
        if seeds.len() == tw.m {
            out.push((seeds.clone(), prob));
            return;
        }
        let w = &tw.weights[0];
        let cells = tw.pop.grid.cells();
        let den: f64 = (0..cells).filter(|&c| !removed[c]).map(|c| w[c]).sum();
        for c in 0..cells {
            if removed[c] || w[c] <= 0.0 {
                continue;
            }
            let gone: Vec<Cell> = tw.removal(c).into_iter().filter(|&x| !removed[x]).collect();
            for &x in &gone {
                removed[x] = true;
            }
            seeds.push(c);
            rec(tw, removed, seeds, prob * w[c] / den, out);
            seeds.pop();
            for &x in &gone {
                removed[x] = false;
            }
        }
    }
    rec(&tw, &mut vec![false; cells], &mut Vec::new(), 1.0, &mut out);
    out
}

/// Replay a leaf and list the nonempty networks it did not observe.
pub fn replay_leaf(
    pop: &PopulationGrid,
    mode: SamplingMode,
    weights: &[StageWeights],
    m1: usize,
    seeds: &[Cell],
) -> (SampleLog, Vec<Vec<Cell>>) {
    let log = replay_draws(pop, mode, weights.to_vec(), m1, seeds).expect("replayable leaf");
    let observed: Vec<Cell> = log.observed().nonempty_cells.iter().map(|c| c.0).collect();
    let hidden = pop
        .networks
        .nonempty()
        .filter(|net| !observed.contains(&net.members[0]))
        .map(|net| net.members.clone())
        .collect();
    (log, hidden)
}

/// Outcome distribution of placing one network of size `size`.
///
/// Returns each reachable cell set with its probability per attempt, and
/// the probability that an attempt dead-ends.
fn one_attempt(size: usize, weights: &[f64], available: &[bool], grid: &GridSpec) -> (BTreeMap<Vec<Cell>, f64>, f64) {
    let mut sets = BTreeMap::new();
    let mut dead = 0.0;
    let total: f64 = (0..grid.cells()).filter(|&c| available[c]).map(|c| weights[c]).sum();
    if total <= 0.0 {
        return (sets, 1.0);
    }
    #[allow(clippy::too_many_arguments)]
    fn grow(
        comp: &mut Vec<Cell>,
        prob: f64,
        size: usize,
        weights: &[f64],
        available: &[bool],
        grid: &GridSpec,
        sets: &mut BTreeMap<Vec<Cell>, f64>,
        dead: &mut f64,
    ) {
        if comp.len() == size {
            let mut key = comp.clone();
            key.sort_unstable();
            *sets.entry(key).or_insert(0.0) += prob;
            return;
        }
        let mut frontier: Vec<Cell> = Vec::new();
        for &c in comp.iter() {
            for nb in grid.adjacent(c) {
                if available[nb] && !comp.contains(&nb) && !frontier.contains(&nb) {
                    frontier.push(nb);
                }
            }
        }
        let mass: f64 = frontier.iter().map(|&c| weights[c]).sum();
        if mass <= 0.0 {
            *dead += prob;
            return;
        }
        for &f in &frontier {
            comp.push(f);
            grow(comp, prob * weights[f] / mass, size, weights, available, grid, sets, dead);
            comp.pop();
        }
    }
    for c in 0..grid.cells() {
        if available[c] && weights[c] > 0.0 {
            grow(&mut vec![c], weights[c] / total, size, weights, available, grid, &mut sets, &mut dead);
        }
    }
    (sets, dead)
}

/// Every placement of `sizes` (descending) with its probability under
/// largest-first growth with `retries` restarts per network.
pub fn placements(
    sizes: &[usize],
    weights: &[f64],
    forbidden: &[bool],
    grid: &GridSpec,
    retries: usize,
) -> Vec<(Vec<Vec<Cell>>, f64)> {
    let available: Vec<bool> = (0..grid.cells()).map(|c| !forbidden[c] && weights[c] > 0.0).collect();
    let mut out = Vec::new();
    #[allow(clippy::too_many_arguments)]
    fn rec(
        rest: &[usize],
        available: &[bool],
        weights: &[f64],
        grid: &GridSpec,
        retries: usize,
        placed: &mut Vec<Vec<Cell>>,
        prob: f64,
        out: &mut Vec<(Vec<Vec<Cell>>, f64)>,
    ) {
        let Some((&size, tail)) = rest.split_first() else {
            out.push((placed.clone(), prob));
            return;
        };
        let (sets, dead) = one_attempt(size, weights, available, grid);
        if sets.is_empty() {
            return;
        }
        // success on some attempt within the budget
        let boost = if dead < 1.0 { (1.0 - dead.powi(retries as i32)) / (1.0 - dead) } else { 0.0 };
        for (set, p) in sets {
            let mut next = available.to_vec();
            for &c in &set {
                next[c] = false;
                for nb in grid.adjacent(c) {
                    next[nb] = false;
                }
            }
            placed.push(set);
            rec(tail, &next, weights, grid, retries, placed, prob * p * boost, out);
            placed.pop();
        }
    }
    rec(sizes, &available, weights, grid, retries.max(1), &mut Vec::new(), 1.0, &mut out);
    out
}

/// Descending compositions of `total` into `parts` positive sizes.
pub fn descending_partitions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    fn rec(total: usize, parts: usize, cap: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 0 {
            if total == 0 {
                out.push(cur.clone());
            }
            return;
        }
        for y in (1..=cap.min(total)).rev() {
            if total - y < parts - 1 {
                continue;
            }
            cur.push(y);
            rec(total - y, parts - 1, y, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(total, parts, total, &mut Vec::new(), &mut out);
    out
}

/// Posterior of `(X, P)` for the hidden part of a sample with the count
/// coefficients fixed and `alpha`, `beta` integrated over their priors.
///
/// Hidden sizes enter as a multiset and placements follow the growth law
/// with restarts, matching the sampler's target.
pub fn latent_xp_posterior(log: &SampleLog, alloc_weights: &[f64], retries: usize, priors: &PriorConfig) -> BTreeMap<(usize, usize), f64> {
    let cells = log.grid.cells();
    let mut mixed_x: BTreeMap<usize, f64> = BTreeMap::new();
    latent_xp_posterior_with(log, alloc_weights, retries, |x, p| {
        let px = *mixed_x.entry(x).or_insert_with(|| beta_mixed_trunc_binom(x, cells, priors.a_alpha, priors.b_alpha));
        px * beta_mixed_trunc_binom(p, x, priors.a_beta, priors.b_beta)
    })
}

/// As [`latent_xp_posterior`] with `alpha` and `beta` held fixed.
pub fn latent_xp_posterior_fixed(log: &SampleLog, alloc_weights: &[f64], retries: usize, alpha: f64, beta: f64) -> BTreeMap<(usize, usize), f64> {
    let cells = log.grid.cells();
    latent_xp_posterior_with(log, alloc_weights, retries, |x, p| trunc_binom_pmf(x, cells, alpha) * trunc_binom_pmf(p, x, beta))
}

/// Enumeration behind the two public forms; `structure(x, p)` is the
/// weight of the totals.
pub fn latent_xp_posterior_with(
    log: &SampleLog,
    alloc_weights: &[f64],
    retries: usize,
    mut structure: impl FnMut(usize, usize) -> f64,
) -> BTreeMap<(usize, usize), f64> {
    let obs = log.observed();
    let cells = log.grid.cells();
    let free = obs.known.iter().filter(|k| !**k).count();
    let mut post: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for x_bar in 0..=free {
        let x = obs.x_s + x_bar;
        if x >= cells {
            break;
        }
        let p_range: Vec<usize> = if x_bar == 0 { vec![0] } else { (1..=x_bar).collect() };
        for p_bar in p_range {
            let p = obs.p_s + p_bar;
            let prior = structure(x, p);
            let partitions = if x_bar == 0 { vec![Vec::new()] } else { descending_partitions(x_bar, p_bar) };
            for sizes in partitions {
                let full: Vec<usize> = obs.y_s.iter().chain(&sizes).copied().collect();
                let ln_sizes = ln_fact(x - p) - (x - p) as f64 * (p as f64).ln()
                    - full.iter().map(|&y| ln_fact(y - 1)).sum::<f64>();
                let mut multiplicity: BTreeMap<usize, usize> = BTreeMap::new();
                for &y in &sizes {
                    *multiplicity.entry(y).or_insert(0) += 1;
                }
                let ln_orders = ln_fact(p_bar) - multiplicity.values().map(|&k| ln_fact(k)).sum::<f64>();
                let base = (ln_sizes + ln_orders).exp() * prior;
                let mass: f64 = if sizes.is_empty() {
                    selection_prob(log, &[])
                } else {
                    placements(&sizes, alloc_weights, &obs.known, &log.grid, retries)
                        .iter()
                        .map(|(alloc, a)| a * selection_prob(log, alloc))
                        .sum()
                };
                if mass > 0.0 {
                    *post.entry((x, p)).or_insert(0.0) += base * mass;
                }
            }
        }
    }
    let z: f64 = post.values().sum();
    post.values_mut().for_each(|v| *v /= z);
    post
}

/// Total-variation distance between two distributions on the same keys.
pub fn total_variation<K: Ord + Clone>(a: &BTreeMap<K, f64>, b: &BTreeMap<K, f64>) -> f64 {
    let mut keys: Vec<K> = a.keys().cloned().collect();
    keys.extend(b.keys().cloned());
    keys.sort();
    keys.dedup();
    0.5 * keys.iter().map(|k| (a.get(k).unwrap_or(&0.0) - b.get(k).unwrap_or(&0.0)).abs()).sum::<f64>()
}

/// Population from explicit counts with an intercept-only covariate field.
pub fn population(rows: usize, cols: usize, counts: &[u64]) -> PopulationGrid {
    let grid = GridSpec::new(rows, cols).unwrap();
    let cov = acs_core::covariate::CovariateField::intercept_only(grid.cells());
    PopulationGrid::new(grid, cov, counts.to_vec(), None).unwrap()
}

/// Micro-populations with at most six cells.
pub fn selection_corpus() -> Vec<(usize, usize, Vec<u64>)> {
    vec![
        (2, 2, vec![1, 0, 0, 0]),
        (2, 2, vec![3, 0, 0, 1]),
        (2, 3, vec![1, 0, 0, 0, 0, 2]),
        (2, 3, vec![1, 1, 0, 0, 0, 3]),
        (2, 3, vec![1, 0, 1, 0, 1, 0]),
        (1, 6, vec![2, 0, 1, 1, 0, 0]),
        (3, 2, vec![0, 4, 0, 0, 1, 0]),
        (1, 5, vec![0, 2, 0, 0, 0]),
    ]
}

pub fn per_cell(cells: usize) -> StageWeights {
    StageWeights::PerCell((0..cells).map(|c| 0.5 + ((c * 7) % 5) as f64 * 0.4).collect())
}

/// 3x3 grid: a corner network seen in stage 1, an empty far corner seen in
/// stage 2 with uneven weights.
pub fn corner_log() -> SampleLog {
    let pop = population(3, 3, &[2, 0, 0, 0, 0, 0, 0, 0, 0]);
    let omega = vec![0.0, 0.0, 1.0, 0.0, 2.0, 0.5, 1.5, 1.0, 0.7];
    let weights = vec![StageWeights::Constant(1.0), StageWeights::PerCell(omega)];
    replay_draws(&pop, SamplingMode::Network, weights, 1, &[0, 8]).unwrap()
}

pub const CORNER_LAMBDA: [f64; 9] = [1.0, 1.0, 0.6, 1.0, 2.5, 1.2, 0.4, 1.8, 1.0];

/// 4x4 populations with a few networks each.
pub fn raj_corpus() -> Vec<Vec<u64>> {
    let mut a = vec![0u64; 16];
    a[0] = 4;
    a[1] = 1;
    a[10] = 7;
    let mut b = vec![0u64; 16];
    b[5] = 2;
    b[6] = 3;
    b[9] = 1;
    b[15] = 9;
    let mut c = vec![0u64; 16];
    c[3] = 1;
    c[12] = 12;
    c[13] = 1;
    c[14] = 2;
    vec![a, b, c]
}

/// `ln` of `q^(k+a-1) (1-q)^(n-k+b-1) / (1-(1-q)^n)`.
pub fn trunc_beta_ln(q: f64, k: usize, n: usize, a: f64, b: f64) -> f64 {
    (k as f64 + a - 1.0) * q.ln() + ((n - k) as f64 + b - 1.0) * (1.0 - q).ln() - (1.0 - (1.0 - q).powi(n as i32)).ln()
}

/// Zero-truncated Poisson log-likelihood of counts at a common intensity
/// `exp(t)`, with a normal prior on `t`.
pub fn intercept_ln(t: f64, counts: &[u64], sigma2: f64) -> f64 {
    let lambda = t.exp();
    counts
        .iter()
        .map(|&k| k as f64 * t - lambda - (1.0 - (-lambda).exp()).ln() - ln_fact(k as usize))
        .sum::<f64>()
        - t * t / (2.0 * sigma2)
}
