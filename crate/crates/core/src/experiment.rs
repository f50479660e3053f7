//! The maze transfer-learning experiment: a seeded corpus of random mazes,
//! three behaviour-policy variants, per-episode learning curves and CSV
//! output.
//!
//! Mazes within one method are independent except for the undo matrix `g`,
//! which the `1-2-prior` method carries from maze to maze. Independent mazes
//! run in parallel when the `parallel` feature is on; the `g` chain is
//! resolved by speculative batches that are validated against the sequential
//! order, so output never depends on the execution mode.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::learner::{run_episode, BayesBehaviour, LearnerConfig, LearnerState};
use crate::maze::{generate_maze, Maze, DEFAULT_GOAL_REWARD, DEFAULT_STEP_REWARD};
use crate::prior::{PriorMemory, PriorRules};

pub const CSV_HEADER: &str = "method,episode_index,mean_length,stderr_length,num_mazes";

const MAZE_STREAM: u64 = 0x6d61_7a65;
const LEARN_STREAM: u64 = 0x6c65_6172;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    NoPrior,
    FirstOrderPrior,
    FirstAndSecondOrderPrior,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::NoPrior, Method::FirstOrderPrior, Method::FirstAndSecondOrderPrior];

    pub fn name(self) -> &'static str {
        match self {
            Method::NoPrior => "no-prior",
            Method::FirstOrderPrior => "1-prior",
            Method::FirstAndSecondOrderPrior => "1-2-prior",
        }
    }

    /// Prior rules used by the method, `None` for the prior-free variant.
    pub fn rules(self) -> Option<PriorRules> {
        match self {
            Method::NoPrior => None,
            Method::FirstOrderPrior => Some(PriorRules::FIRST_ORDER),
            Method::FirstAndSecondOrderPrior => Some(PriorRules::BOTH),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "no-prior" => Ok(Method::NoPrior),
            "1-prior" => Ok(Method::FirstOrderPrior),
            "1-2-prior" | "1&2-prior" => Ok(Method::FirstAndSecondOrderPrior),
            other => {
                Err(Error::InvalidConfig(format!("unknown method {other:?} (expected no-prior, 1-prior or 1-2-prior)")))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Rayon across mazes; identical to `Sequential` without the `parallel`
    /// feature.
    #[default]
    Parallel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub num_mazes: usize,
    pub width: usize,
    pub height: usize,
    pub episodes_per_maze: usize,
    pub methods: Vec<Method>,
    pub master_seed: u64,
    pub step_reward: f64,
    pub goal_reward: f64,
    pub learner: LearnerConfig,
    pub execution: Execution,
    /// Starting `g` for the `1-2-prior` method, in undo-matrix text format.
    pub initial_undo_matrix: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            num_mazes: 100,
            width: 10,
            height: 10,
            episodes_per_maze: 50,
            methods: Method::ALL.to_vec(),
            master_seed: 0,
            step_reward: DEFAULT_STEP_REWARD,
            goal_reward: DEFAULT_GOAL_REWARD,
            learner: LearnerConfig::default(),
            execution: Execution::default(),
            initial_undo_matrix: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_mazes == 0 || self.episodes_per_maze == 0 {
            return Err(Error::InvalidConfig("maze and episode counts must be at least 1".into()));
        }
        if self.width < 2 || self.height < 2 {
            return Err(Error::InvalidConfig(format!("maze size {}x{} below 2x2", self.width, self.height)));
        }
        if !(self.step_reward.is_finite() && self.goal_reward.is_finite()) {
            return Err(Error::InvalidConfig("rewards must be finite".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("no methods selected".into()));
        }
        let mut sorted = self.methods.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != self.methods.len() {
            return Err(Error::InvalidConfig("duplicate method".into()));
        }
        self.learner.validate()?;
        self.initial_memory(Method::FirstAndSecondOrderPrior)?;
        Ok(())
    }

    fn initial_memory(&self, method: Method) -> Result<Option<PriorMemory>> {
        let Some(rules) = method.rules() else { return Ok(None) };
        let mut mem = PriorMemory::new(4, rules);
        if rules.second_order {
            if let Some(text) = &self.initial_undo_matrix {
                mem.load_undo_matrix(text)?;
            }
        }
        Ok(Some(mem))
    }
}

/// SplitMix64 finaliser.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for a given stream and maze, a pure function of its inputs.
pub fn derive_seed(master_seed: u64, stream: u64, maze_index: usize) -> u64 {
    splitmix64(splitmix64(master_seed ^ splitmix64(stream)) ^ maze_index as u64)
}

pub fn maze_seed(master_seed: u64, maze_index: usize) -> u64 {
    derive_seed(master_seed, MAZE_STREAM, maze_index)
}

/// The mazes every method is evaluated on.
pub fn maze_corpus(config: &ExperimentConfig) -> Result<Vec<Maze>> {
    map_indices(0..config.num_mazes, config.execution, |i| {
        generate_maze(config.width, config.height, maze_seed(config.master_seed, i))
    })
    .into_iter()
    .collect()
}

#[cfg(feature = "parallel")]
fn map_indices<T, F>(range: Range<usize>, execution: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    match execution {
        Execution::Parallel => range.into_par_iter().map(f).collect(),
        Execution::Sequential => range.map(f).collect(),
    }
}

/// Number of mazes worth running at once.
#[cfg(feature = "parallel")]
fn batch_width(execution: Execution) -> usize {
    match execution {
        Execution::Parallel => rayon::current_num_threads().max(1),
        Execution::Sequential => 1,
    }
}

#[cfg(not(feature = "parallel"))]
fn batch_width(_execution: Execution) -> usize {
    1
}

#[cfg(not(feature = "parallel"))]
fn map_indices<T, F>(range: Range<usize>, _execution: Execution, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    range.map(f).collect()
}

/// Episode lengths of one method over the corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodRun {
    pub method: Method,
    /// `lengths[maze][episode]`.
    pub lengths: Vec<Vec<usize>>,
    /// Memory after the last maze; carries the learned `g`.
    pub final_memory: Option<PriorMemory>,
}

struct MazeOutcome {
    lengths: Vec<usize>,
    memory: Option<PriorMemory>,
}

fn run_maze(
    config: &ExperimentConfig,
    maze: &Maze,
    index: usize,
    mut memory: Option<PriorMemory>,
) -> Result<MazeOutcome> {
    let mm = maze.to_mdp(config.step_reward, config.goal_reward)?;
    let mut learner = LearnerState::new(&mm.mdp, config.learner)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.master_seed, LEARN_STREAM, index));
    let mut lengths = Vec::with_capacity(config.episodes_per_maze);
    for _ in 0..config.episodes_per_maze {
        let rec = run_episode(&mm.mdp, &mut learner, &BayesBehaviour, memory.as_mut(), &mut rng)?;
        lengths.push(rec.len());
    }
    Ok(MazeOutcome { lengths, memory })
}

/// Runs one method on the whole corpus. Deterministic given the config.
pub fn run_method(config: &ExperimentConfig, method: Method) -> Result<MethodRun> {
    config.validate()?;
    let mazes = maze_corpus(config)?;
    run_method_on(config, method, &mazes)
}

fn run_method_on(config: &ExperimentConfig, method: Method, mazes: &[Maze]) -> Result<MethodRun> {
    let initial = config.initial_memory(method)?;
    let carries_g = method.rules().is_some_and(|r| r.second_order);
    if !carries_g {
        let outcomes = map_indices(0..mazes.len(), config.execution, |i| {
            run_maze(config, &mazes[i], i, initial.as_ref().map(PriorMemory::transfer))
        });
        let mut lengths = Vec::with_capacity(mazes.len());
        let mut final_memory = None;
        for o in outcomes {
            let o = o?;
            lengths.push(o.lengths);
            final_memory = o.memory;
        }
        return Ok(MethodRun { method, lengths, final_memory });
    }

    // `g` after maze k seeds maze k + 1. Run a batch of mazes all starting
    // from the current `g`, then accept results in order for as long as the
    // chained `g` has not changed. Batches are one pool-width wide, so a
    // change of `g` wastes at most that many maze runs.
    let width = batch_width(config.execution);
    let mut carried = initial.expect("second-order methods have a memory");
    let mut lengths = Vec::with_capacity(mazes.len());
    let mut next = 0;
    while next < mazes.len() {
        let end = (next + width).min(mazes.len());
        let start_mem = carried.transfer();
        let batch =
            map_indices(next..end, config.execution, |i| run_maze(config, &mazes[i], i, Some(start_mem.transfer())));
        for outcome in batch {
            let outcome = outcome?;
            let memory = outcome.memory.expect("memory threaded through run_maze");
            lengths.push(outcome.lengths);
            next += 1;
            let changed = memory.undo_matrix() != start_mem.undo_matrix();
            carried = memory;
            if changed {
                break;
            }
        }
    }
    Ok(MethodRun { method, lengths, final_memory: Some(carried) })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRecord {
    pub method: Method,
    pub episode_index: usize,
    pub mean_length: f64,
    pub stderr_length: f64,
    pub num_mazes: usize,
}

/// Mean and standard error (sample standard deviation over `sqrt(n)`) of
/// episode length across mazes, per episode index.
pub fn aggregate_curves(lengths: &[Vec<usize>], method: Method) -> Result<Vec<CurveRecord>> {
    let Some(first) = lengths.first() else { return Ok(Vec::new()) };
    let episodes = first.len();
    for (maze, row) in lengths.iter().enumerate() {
        if row.len() != episodes {
            return Err(Error::RaggedCurves { maze, got: row.len(), expected: episodes });
        }
    }
    let n = lengths.len();
    Ok((0..episodes)
        .map(|e| {
            let mean = lengths.iter().map(|r| r[e] as f64).sum::<f64>() / n as f64;
            let stderr = if n > 1 {
                let var = lengths.iter().map(|r| (r[e] as f64 - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                (var / n as f64).sqrt()
            } else {
                0.0
            };
            CurveRecord { method, episode_index: e, mean_length: mean, stderr_length: stderr, num_mazes: n }
        })
        .collect())
}

/// Writes the CSV header and one row per record, ordered by method then
/// episode index.
pub fn write_csv<W: Write>(records: &[CurveRecord], mut out: W) -> Result<()> {
    let mut sorted: Vec<&CurveRecord> = records.iter().collect();
    sorted.sort_by_key(|r| (r.method, r.episode_index));
    writeln!(out, "{CSV_HEADER}")?;
    for r in sorted {
        writeln!(out, "{},{},{},{},{}", r.method, r.episode_index, r.mean_length, r.stderr_length, r.num_mazes)?;
    }
    out.flush()?;
    Ok(())
}

pub fn emit_csv(records: &[CurveRecord], path: &Path) -> Result<()> {
    let file = File::create(path)?;
    write_csv(records, BufWriter::new(file))
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub runs: Vec<MethodRun>,
    pub curves: Vec<CurveRecord>,
}

impl ExperimentOutput {
    pub fn run(&self, method: Method) -> Option<&MethodRun> {
        self.runs.iter().find(|r| r.method == method)
    }
}

/// Runs every configured method on the same corpus and aggregates curves.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let mazes = maze_corpus(config)?;
    let mut runs = Vec::with_capacity(config.methods.len());
    let mut curves = Vec::new();
    for &method in &config.methods {
        let run = run_method_on(config, method, &mazes)?;
        curves.extend(aggregate_curves(&run.lengths, method)?);
        runs.push(run);
    }
    Ok(ExperimentOutput { runs, curves })
}

/// Mean episode length over the episode index range `episodes` (0-based),
/// averaged across mazes.
pub fn mean_length_over(curves: &[CurveRecord], method: Method, episodes: Range<usize>) -> f64 {
    let picked: Vec<f64> = curves
        .iter()
        .filter(|r| r.method == method && episodes.contains(&r.episode_index))
        .map(|r| r.mean_length)
        .collect();
    picked.iter().sum::<f64>() / picked.len() as f64
}
