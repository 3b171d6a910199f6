//! Adaptive cluster sampling, one network per draw, without replacement.
//!
//! Each draw picks a cell with probability proportional to the current
//! weights. An empty cell is recorded on its own; a nonempty cell reveals its
//! whole network together with the border around it. The drawn cells are then
//! withdrawn. In [`SamplingMode::Network`] the visited border stays in the
//! frame and may be drawn again as an empty cell; in
//! [`SamplingMode::Cluster`] it is withdrawn along with the network.

mod selection;
mod two_stage;

pub use selection::{selection_log_prob, SelectionContext};
pub use two_stage::{stage_sizes, two_stage_sample, TwoStageOutcome, STAGE1_RETRY_BUDGET};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::allocation::pick_weighted;
use crate::error::{domain, AcsError, Result};
use crate::grid::{Cell, GridSpec};
use crate::population::PopulationGrid;

/// What is withdrawn after a nonempty draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingMode {
    /// Only the network; its border may be drawn later.
    #[default]
    Network,
    /// The network and its border.
    Cluster,
}

/// Sampling weights `pi(c)` for one stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightField {
    pub values: Vec<f64>,
    pub stage: u8,
}

impl WeightField {
    pub fn constant(cells: usize, value: f64) -> Self {
        Self { values: vec![value; cells], stage: 1 }
    }

    fn validate(&self, cells: usize) -> Result<()> {
        if self.values.len() != cells {
            return domain("weight field does not match grid");
        }
        if self.values.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return domain("weights must be finite and nonnegative");
        }
        Ok(())
    }
}

/// Weights of one stage as stored in a log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageWeights {
    Constant(f64),
    PerCell(Vec<f64>),
}

impl StageWeights {
    fn from_values(values: &[f64]) -> Self {
        match values.first() {
            Some(&v) if values.iter().all(|&w| w == v) => StageWeights::Constant(v),
            _ => StageWeights::PerCell(values.to_vec()),
        }
    }

    pub fn expand(&self, cells: usize) -> Vec<f64> {
        match self {
            StageWeights::Constant(v) => vec![*v; cells],
            StageWeights::PerCell(v) => v.clone(),
        }
    }
}

/// What a draw revealed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DrawOutcome {
    Empty,
    Network {
        /// Member cells, ascending.
        members: Vec<Cell>,
        /// Counts aligned with `members`.
        counts: Vec<u64>,
        /// Visited border cells, ascending.
        border: Vec<Cell>,
    },
}

/// One step of the survey.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Draw {
    /// 1-based draw index.
    pub index: usize,
    pub stage: u8,
    pub seed_cell: Cell,
    pub outcome: DrawOutcome,
    /// Cells withdrawn by this draw, ascending.
    pub removed_cells: Vec<Cell>,
}

impl Draw {
    /// Size of the revealed network; 1 for empty draws.
    pub fn size(&self) -> usize {
        match &self.outcome {
            DrawOutcome::Empty => 1,
            DrawOutcome::Network { members, .. } => members.len(),
        }
    }

    pub fn is_nonempty(&self) -> bool {
        matches!(self.outcome, DrawOutcome::Network { .. })
    }
}

/// Ordered record of every draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleLog {
    pub grid: GridSpec,
    pub mode: SamplingMode,
    pub m1: usize,
    pub m2: usize,
    /// Weights of stage 1 and, when present, stage 2.
    pub stage_weights: Vec<StageWeights>,
    pub draws: Vec<Draw>,
    /// Stage-1 samples discarded for holding only empty networks.
    #[serde(default)]
    pub stage1_retries: usize,
}

/// Observed quantities derived from a log.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedSample {
    pub grid: GridSpec,
    pub x_s: usize,
    pub p_s: usize,
    /// Sizes of the observed nonempty networks in draw order.
    pub y_s: Vec<usize>,
    /// `(cell, count)` for every observed nonempty cell.
    pub nonempty_cells: Vec<(Cell, u64)>,
    pub total: u64,
    /// Cells whose content is known: withdrawn cells and visited borders.
    pub known: Vec<bool>,
    /// Withdrawn cells.
    pub sampled: Vec<bool>,
    /// Visited border cells.
    pub border: Vec<bool>,
}

impl ObservedSample {
    pub fn cells(&self) -> usize {
        self.known.len()
    }

    /// Known cells with an occupancy indicator.
    pub fn occupancy(&self) -> Vec<(Cell, bool)> {
        let mut occ = vec![false; self.cells()];
        for &(c, _) in &self.nonempty_cells {
            occ[c] = true;
        }
        (0..self.cells()).filter(|&c| self.known[c]).map(|c| (c, occ[c])).collect()
    }
}

impl SampleLog {
    pub fn m(&self) -> usize {
        self.draws.len()
    }

    pub fn nonempty_networks(&self) -> usize {
        self.draws.iter().filter(|d| d.is_nonempty()).count()
    }

    /// Stage weights expanded to per-cell vectors.
    pub fn expanded_weights(&self) -> Vec<Vec<f64>> {
        self.stage_weights.iter().map(|w| w.expand(self.grid.cells())).collect()
    }

    /// The first `m1` draws as a stand-alone single-stage log.
    pub fn stage1(&self) -> SampleLog {
        SampleLog {
            grid: self.grid,
            mode: self.mode,
            m1: self.m1,
            m2: 0,
            stage_weights: self.stage_weights[..1].to_vec(),
            draws: self.draws[..self.m1].to_vec(),
            stage1_retries: self.stage1_retries,
        }
    }

    pub fn observed(&self) -> ObservedSample {
        let m = self.grid.cells();
        let mut known = vec![false; m];
        let mut sampled = vec![false; m];
        let mut border = vec![false; m];
        let mut y_s = Vec::new();
        let mut nonempty_cells = Vec::new();
        for d in &self.draws {
            for &c in &d.removed_cells {
                sampled[c] = true;
                known[c] = true;
            }
            if let DrawOutcome::Network { members, counts, border: b } = &d.outcome {
                y_s.push(members.len());
                nonempty_cells.extend(members.iter().copied().zip(counts.iter().copied()));
                for &c in b {
                    border[c] = true;
                    known[c] = true;
                }
            }
        }
        nonempty_cells.sort_unstable();
        let total = nonempty_cells.iter().map(|(_, k)| k).sum();
        SampleLog::check_disjoint(&self.draws);
        ObservedSample {
            grid: self.grid,
            x_s: nonempty_cells.len(),
            p_s: y_s.len(),
            y_s,
            nonempty_cells,
            total,
            known,
            sampled,
            border,
        }
    }

    fn check_disjoint(draws: &[Draw]) {
        if cfg!(debug_assertions) {
            let mut all: Vec<Cell> = draws.iter().flat_map(|d| d.removed_cells.iter().copied()).collect();
            let n = all.len();
            all.sort_unstable();
            all.dedup();
            debug_assert_eq!(n, all.len(), "removed cells of distinct draws overlap");
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Mutable survey state shared across stages.
#[derive(Debug, Clone)]
pub(crate) struct Survey<'a> {
    pop: &'a PopulationGrid,
    mode: SamplingMode,
    removed: Vec<bool>,
    pub(crate) draws: Vec<Draw>,
}

impl<'a> Survey<'a> {
    pub(crate) fn new(pop: &'a PopulationGrid, mode: SamplingMode) -> Self {
        Self { pop, mode, removed: vec![false; pop.grid.cells()], draws: Vec::new() }
    }

    /// Perform `m` draws with the given weights.
    pub(crate) fn run_stage<R: Rng + ?Sized>(
        &mut self,
        weights: &[f64],
        stage: u8,
        m: usize,
        rng: &mut R,
    ) -> Result<()> {
        let cells = self.pop.grid.cells();
        let target = self.draws.len() + m;
        for _ in 0..m {
            let removed = &self.removed;
            let Some(seed_cell) = pick_weighted((0..cells).filter(|&c| !removed[c]), weights, rng) else {
                return Err(AcsError::SamplingExhausted { completed: self.draws.len(), requested: target });
            };
            self.apply(seed_cell, stage);
        }
        Ok(())
    }
}

impl Survey<'_> {
    /// Record a draw whose selected cell is `seed_cell`.
    fn apply(&mut self, seed_cell: Cell, stage: u8) {
        let (outcome, mut removed_cells) = if self.pop.counts[seed_cell] == 0 {
            (DrawOutcome::Empty, vec![seed_cell])
        } else {
            let net = self.pop.networks.network_of(seed_cell);
            let counts = net.members.iter().map(|&c| self.pop.counts[c]).collect();
            let mut removed = net.members.clone();
            if self.mode == SamplingMode::Cluster {
                removed.extend(net.border.iter().copied().filter(|&c| !self.removed[c]));
            }
            let outcome = DrawOutcome::Network { members: net.members.clone(), counts, border: net.border.clone() };
            (outcome, removed)
        };
        removed_cells.sort_unstable();
        for &c in &removed_cells {
            self.removed[c] = true;
        }
        self.draws.push(Draw { index: self.draws.len() + 1, stage, seed_cell, outcome, removed_cells });
    }
}

/// Rebuild a log from the cells selected at each draw.
///
/// Draws after the first `m1` belong to stage 2.
pub fn replay_draws(
    population: &PopulationGrid,
    mode: SamplingMode,
    stage_weights: Vec<StageWeights>,
    m1: usize,
    seed_cells: &[Cell],
) -> Result<SampleLog> {
    let cells = population.grid.cells();
    let expected = if seed_cells.len() > m1 { 2 } else { 1 };
    if stage_weights.len() != expected {
        return domain(format!("expected weights for {expected} stage(s)"));
    }
    let weights: Vec<Vec<f64>> = stage_weights.iter().map(|w| w.expand(cells)).collect();
    let mut survey = Survey::new(population, mode);
    for (j, &cell) in seed_cells.iter().enumerate() {
        let stage = if j < m1 { 1 } else { 2 };
        if cell >= cells || survey.removed[cell] || !(weights[usize::from(stage) - 1][cell] > 0.0) {
            return domain(format!("cell {cell} cannot be selected at draw {}", j + 1));
        }
        survey.apply(cell, stage);
    }
    Ok(SampleLog {
        grid: population.grid,
        mode,
        m1: m1.min(seed_cells.len()),
        m2: seed_cells.len().saturating_sub(m1),
        stage_weights,
        draws: survey.draws,
        stage1_retries: 0,
    })
}

/// Single-stage adaptive cluster sample of `m` networks.
pub fn acs_draw(
    population: &PopulationGrid,
    weights: &WeightField,
    m: usize,
    mode: SamplingMode,
    seed: u64,
) -> Result<SampleLog> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    acs_draw_with(population, weights, m, mode, &mut rng)
}

pub(crate) fn acs_draw_with<R: Rng + ?Sized>(
    population: &PopulationGrid,
    weights: &WeightField,
    m: usize,
    mode: SamplingMode,
    rng: &mut R,
) -> Result<SampleLog> {
    if m == 0 {
        return domain("at least one draw is required");
    }
    weights.validate(population.grid.cells())?;
    let mut survey = Survey::new(population, mode);
    survey.run_stage(&weights.values, 1, m, rng)?;
    Ok(SampleLog {
        grid: population.grid,
        mode,
        m1: m,
        m2: 0,
        stage_weights: vec![StageWeights::from_values(&weights.values)],
        draws: survey.draws,
        stage1_retries: 0,
    })
}
