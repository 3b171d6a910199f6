//! Lattice geometry and network extraction.
//!
//! Cells are numbered `0..rows*cols` in row-major order. Two cells are
//! contiguous when they share an edge (rook adjacency). A *network* is a
//! maximal set of contiguous nonempty cells; every empty cell is a one-sized
//! empty network of its own. The *border* of a nonempty network is the set of
//! empty cells that touch it.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Cell index in row-major order.
pub type Cell = usize;

/// Shape of a regular `rows x cols` lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
}

impl GridSpec {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return domain(format!("grid must be non-degenerate, got {rows}x{cols}"));
        }
        Ok(Self { rows, cols })
    }

    /// Number of cells `M`.
    #[inline]
    pub fn cells(&self) -> usize {
        self.rows * self.cols
    }

    #[inline]
    pub fn row_col(&self, cell: Cell) -> (usize, usize) {
        (cell / self.cols, cell % self.cols)
    }

    #[inline]
    pub fn cell_at(&self, row: usize, col: usize) -> Cell {
        row * self.cols + col
    }

    /// The 4-adjacent cells of `cell` that lie on the grid.
    pub fn neighbors(&self, cell: Cell) -> Result<Vec<Cell>> {
        if cell >= self.cells() {
            return domain(format!("cell {cell} outside grid of {} cells", self.cells()));
        }
        Ok(self.adjacent(cell).collect())
    }

    /// Unchecked neighbor iterator for hot loops; `cell` must be in range.
    #[inline]
    pub fn adjacent(&self, cell: Cell) -> impl Iterator<Item = Cell> {
        let (r, c) = self.row_col(cell);
        let cols = self.cols;
        let up = (r > 0).then(|| cell - cols);
        let down = (r + 1 < self.rows).then(|| cell + cols);
        let left = (c > 0).then(|| cell - 1);
        let right = (c + 1 < cols).then(|| cell + 1);
        [up, left, right, down].into_iter().flatten()
    }
}

/// One network of the partition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Network {
    pub id: usize,
    /// Member cells, ascending.
    pub members: Vec<Cell>,
    /// Empty cells adjacent to a member, ascending. Empty for empty networks.
    pub border: Vec<Cell>,
    pub nonempty: bool,
}

impl Network {
    /// Number of member cells (`Y_i` for nonempty networks, 1 otherwise).
    pub fn size(&self) -> usize {
        self.members.len()
    }
}

/// The full partition of a grid into networks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkPartition {
    /// All `M - X + P` networks, ids ascending by smallest member cell.
    pub networks: Vec<Network>,
    /// Network id of each cell.
    pub cell_network: Vec<usize>,
    /// Number of nonempty cells.
    pub x: usize,
    /// Number of nonempty networks.
    pub p: usize,
}

impl NetworkPartition {
    pub fn nonempty(&self) -> impl Iterator<Item = &Network> {
        self.networks.iter().filter(|n| n.nonempty)
    }

    /// Sizes of the nonempty networks in id order.
    pub fn sizes(&self) -> Vec<usize> {
        self.nonempty().map(Network::size).collect()
    }

    pub fn network_of(&self, cell: Cell) -> &Network {
        &self.networks[self.cell_network[cell]]
    }
}

/// Partition the grid into networks using 4-adjacency.
pub fn extract_networks(counts: &[u64], grid: &GridSpec) -> Result<NetworkPartition> {
    let m = grid.cells();
    if counts.len() != m {
        return domain(format!("counts has length {} but grid has {m} cells", counts.len()));
    }
    const UNSET: usize = usize::MAX;
    let mut cell_network = vec![UNSET; m];
    let mut networks = Vec::new();
    let mut stack = Vec::new();
    let (mut x, mut p) = (0, 0);

    // Scanning cells in ascending order makes ids follow the smallest member.
    for start in 0..m {
        if cell_network[start] != UNSET {
            continue;
        }
        let id = networks.len();
        cell_network[start] = id;
        if counts[start] == 0 {
            networks.push(Network { id, members: vec![start], border: Vec::new(), nonempty: false });
            continue;
        }
        let mut members = vec![start];
        stack.push(start);
        while let Some(cell) = stack.pop() {
            for nb in grid.adjacent(cell) {
                if counts[nb] > 0 && cell_network[nb] == UNSET {
                    cell_network[nb] = id;
                    members.push(nb);
                    stack.push(nb);
                }
            }
        }
        members.sort_unstable();
        let border = border_of(&members, counts, grid);
        x += members.len();
        p += 1;
        networks.push(Network { id, members, border, nonempty: true });
    }
    Ok(NetworkPartition { networks, cell_network, x, p })
}

/// Empty cells adjacent to a nonempty network.
pub fn network_border(network: &Network, counts: &[u64], grid: &GridSpec) -> Result<Vec<Cell>> {
    if !network.nonempty {
        return domain(format!("network {} is empty and has no border", network.id));
    }
    if counts.len() != grid.cells() {
        return domain("counts length does not match grid");
    }
    Ok(border_of(&network.members, counts, grid))
}

fn border_of(members: &[Cell], counts: &[u64], grid: &GridSpec) -> Vec<Cell> {
    let mut border: Vec<Cell> = members
        .iter()
        .flat_map(|&c| grid.adjacent(c))
        .filter(|&nb| counts[nb] == 0)
        .collect();
    border.sort_unstable();
    border.dedup();
    border
}

/// Cells adjacent to any of `members` that are not members themselves.
pub fn outer_ring(members: &[Cell], grid: &GridSpec) -> Vec<Cell> {
    let mut ring: Vec<Cell> = members.iter().flat_map(|&c| grid.adjacent(c)).collect();
    ring.sort_unstable();
    ring.dedup();
    ring.retain(|c| members.binary_search(c).is_err());
    ring
}

/// True when `cells` forms one 4-connected component.
pub fn is_connected(cells: &[Cell], grid: &GridSpec) -> bool {
    if cells.is_empty() {
        return false;
    }
    let mut sorted = cells.to_vec();
    sorted.sort_unstable();
    let mut seen = vec![false; sorted.len()];
    let mut stack = vec![0usize];
    seen[0] = true;
    let mut reached = 1;
    while let Some(i) = stack.pop() {
        for nb in grid.adjacent(sorted[i]) {
            if let Ok(j) = sorted.binary_search(&nb) {
                if !seen[j] {
                    seen[j] = true;
                    reached += 1;
                    stack.push(j);
                }
            }
        }
    }
    reached == sorted.len()
}
