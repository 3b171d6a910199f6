//! Spatial placement of hypothesized networks.
//!
//! Networks are placed largest first. Each one starts from an available cell
//! drawn with probability proportional to its weight and grows by repeatedly
//! drawing an available cell adjacent to the partial network, again with
//! probability proportional to weight. Once a network reaches its size it and
//! every cell touching it are withdrawn, so later networks can never merge
//! with it and each placed network is a maximal component.

use rand::Rng;

use crate::grid::{Cell, GridSpec};

/// Placement gave up on a network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AllocationFailure {
    /// Size of the network that could not be placed.
    pub size: usize,
    /// Position of that network in descending size order.
    pub rank: usize,
}

impl std::fmt::Display for AllocationFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "could not place network #{} of size {}", self.rank, self.size)
    }
}

/// Sizes in the order they are allocated: descending, stable.
pub fn allocation_order(sizes: &[usize]) -> Vec<usize> {
    let mut s = sizes.to_vec();
    s.sort_by(|a, b| b.cmp(a));
    s
}

/// Place networks of the given sizes on the grid.
///
/// `forbidden` marks cells that must stay empty (sampled cells and visited
/// borders). A network whose growth dead-ends is restarted from a fresh seed
/// up to `retry_budget` times. The returned cell sets follow
/// [`allocation_order`], each sorted ascending.
pub fn allocate_networks<R: Rng + ?Sized>(
    sizes: &[usize],
    weights: &[f64],
    forbidden: &[bool],
    grid: &GridSpec,
    retry_budget: usize,
    rng: &mut R,
) -> Result<Vec<Vec<Cell>>, AllocationFailure> {
    let m = grid.cells();
    debug_assert_eq!(weights.len(), m);
    debug_assert_eq!(forbidden.len(), m);
    let mut available: Vec<bool> = (0..m).map(|c| !forbidden[c] && weights[c] > 0.0).collect();
    let mut placed = Vec::with_capacity(sizes.len());
    let mut in_comp = vec![false; m];
    let mut frontier: Vec<Cell> = Vec::new();

    for (rank, &size) in allocation_order(sizes).iter().enumerate() {
        let fail = AllocationFailure { size, rank };
        if size == 0 {
            return Err(fail);
        }
        let mut done = None;
        for _ in 0..retry_budget.max(1) {
            let Some(seed) = pick_weighted(
                (0..m).filter(|&c| available[c]),
                weights,
                rng,
            ) else {
                // nothing left to seed from; retrying cannot help
                return Err(fail);
            };
            let mut comp = vec![seed];
            in_comp[seed] = true;
            while comp.len() < size {
                frontier.clear();
                for &c in &comp {
                    for nb in grid.adjacent(c) {
                        if available[nb] && !in_comp[nb] && !frontier.contains(&nb) {
                            frontier.push(nb);
                        }
                    }
                }
                match pick_weighted(frontier.iter().copied(), weights, rng) {
                    Some(next) => {
                        in_comp[next] = true;
                        comp.push(next);
                    }
                    None => break,
                }
            }
            for &c in &comp {
                in_comp[c] = false;
            }
            if comp.len() == size {
                done = Some(comp);
                break;
            }
        }
        let Some(mut comp) = done else { return Err(fail) };
        for &c in &comp {
            available[c] = false;
            for nb in grid.adjacent(c) {
                available[nb] = false;
            }
        }
        comp.sort_unstable();
        placed.push(comp);
    }
    Ok(placed)
}

/// Draw one candidate with probability proportional to its weight.
pub(crate) fn pick_weighted<R, I>(candidates: I, weights: &[f64], rng: &mut R) -> Option<Cell>
where
    R: Rng + ?Sized,
    I: Iterator<Item = Cell> + Clone,
{
    let total: f64 = candidates.clone().map(|c| weights[c]).sum();
    if !(total > 0.0) {
        return None;
    }
    let u = rng.random::<f64>() * total;
    let mut cum = 0.0;
    let mut last = None;
    for c in candidates {
        let w = weights[c];
        if w <= 0.0 {
            continue;
        }
        cum += w;
        last = Some(c);
        if u < cum {
            return Some(c);
        }
    }
    last
}
