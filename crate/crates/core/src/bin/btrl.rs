use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use btrl::experiment::{maze_seed, run_experiment, write_csv, Execution, ExperimentConfig, Method};
use btrl::learner::{LearnerConfig, Schedule};
use btrl::maze::{generate_maze, Maze, DEFAULT_GOAL_REWARD, DEFAULT_STEP_REWARD};
use btrl::{Error, Result};

#[derive(Parser)]
#[command(name = "btrl", version, about = "Bayesian transfer RL on random mazes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the maze experiment and write per-episode learning curves as CSV.
    Run(RunArgs),
    /// Generate or inspect maze text files.
    #[command(subcommand)]
    Maze(MazeCommand),
}

/// `WIDTHxHEIGHT`, e.g. `10x10`.
#[derive(Debug, Clone, Copy)]
struct Size {
    width: usize,
    height: usize,
}

impl FromStr for Size {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (w, h) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected WIDTHxHEIGHT, got {s:?}"))?;
        let width = w.trim().parse().map_err(|e| format!("bad width {w:?}: {e}"))?;
        let height = h.trim().parse().map_err(|e| format!("bad height {h:?}: {e}"))?;
        Ok(Size { width, height })
    }
}

#[derive(Args)]
struct RunArgs {
    /// Method to run; repeat or comma-separate for several. Defaults to all three.
    #[arg(long = "method", value_delimiter = ',', value_parser = parse_method)]
    methods: Vec<Method>,
    /// Number of mazes in the corpus.
    #[arg(long, default_value_t = 100)]
    mazes: usize,
    #[arg(long, default_value = "10x10")]
    size: Size,
    /// Inverse temperature.
    #[arg(long, default_value_t = 1000.0)]
    beta: f64,
    /// Episodes per maze.
    #[arg(long, default_value_t = 50)]
    episodes: usize,
    /// Master seed; maze layouts and learning runs are derived from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_STEP_REWARD, allow_hyphen_values = true)]
    step_reward: f64,
    #[arg(long, default_value_t = DEFAULT_GOAL_REWARD, allow_hyphen_values = true)]
    goal_reward: f64,
    /// Step cap per episode.
    #[arg(long, default_value_t = 10_000)]
    max_steps: usize,
    /// Initial learning rate.
    #[arg(long, default_value_t = 1.0)]
    rho0: f64,
    /// Learning-rate decay constant (visits until the rate halves).
    #[arg(long, default_value_t = 100.0)]
    tau: f64,
    /// Leave entries of blocked actions at the value from the bump that blocked them.
    #[arg(long)]
    no_refresh_blocked: bool,
    /// Run mazes one after another instead of in parallel.
    #[arg(long)]
    sequential: bool,
    /// Starting undo matrix for 1-2-prior.
    #[arg(long, value_name = "FILE")]
    g_in: Option<PathBuf>,
    /// Write the undo matrix learned by 1-2-prior here.
    #[arg(long, value_name = "FILE")]
    g_out: Option<PathBuf>,
    /// CSV destination; stdout when omitted.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum MazeCommand {
    /// Print a random maze in text form.
    Generate {
        #[arg(long, default_value = "10x10")]
        size: Size,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Reproduce maze number K of the experiment corpus for master seed `--seed`.
        #[arg(long, value_name = "K")]
        corpus_index: Option<usize>,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Validate a maze file and print summary statistics.
    Check { file: PathBuf },
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn write_output(path: Option<&PathBuf>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => fs::write(p, bytes)?,
        None => io::stdout().lock().write_all(bytes)?,
    }
    Ok(())
}

fn run(args: RunArgs) -> Result<()> {
    let methods = if args.methods.is_empty() { Method::ALL.to_vec() } else { args.methods };
    let initial_undo_matrix = args.g_in.as_ref().map(fs::read_to_string).transpose()?;
    let config = ExperimentConfig {
        num_mazes: args.mazes,
        width: args.size.width,
        height: args.size.height,
        episodes_per_maze: args.episodes,
        methods,
        master_seed: args.seed,
        step_reward: args.step_reward,
        goal_reward: args.goal_reward,
        learner: LearnerConfig {
            beta: args.beta,
            schedule: Schedule { rho0: args.rho0, tau: args.tau },
            max_steps_per_episode: args.max_steps,
            init_log_b: None,
            refresh_blocked: !args.no_refresh_blocked,
        },
        execution: if args.sequential { Execution::Sequential } else { Execution::Parallel },
        initial_undo_matrix,
    };
    let output = run_experiment(&config)?;
    let mut csv = Vec::new();
    write_csv(&output.curves, &mut csv)?;
    write_output(args.out.as_ref(), &csv)?;

    if let Some(path) = &args.g_out {
        let memory = output
            .run(Method::FirstAndSecondOrderPrior)
            .and_then(|r| r.final_memory.as_ref())
            .ok_or_else(|| Error::InvalidConfig("--g-out needs the 1-2-prior method".into()))?;
        fs::write(path, memory.undo_matrix_text())?;
    }
    Ok(())
}

fn maze(cmd: MazeCommand) -> Result<()> {
    match cmd {
        MazeCommand::Generate { size, seed, corpus_index, out } => {
            let seed = corpus_index.map_or(seed, |k| maze_seed(seed, k));
            let maze = generate_maze(size.width, size.height, seed)?;
            let mut text = maze.serialize();
            text.push('\n');
            write_output(out.as_ref(), text.as_bytes())
        }
        MazeCommand::Check { file } => {
            let maze = Maze::parse(&fs::read_to_string(&file)?)?;
            let goal_dist = maze.distances_from(maze.start())[maze.goal().row * maze.width() + maze.goal().col]
                .expect("parsed mazes are solvable");
            println!("size: {}x{}", maze.width(), maze.height());
            println!("free cells: {}", maze.free_cells().count());
            println!("shortest start-goal path: {goal_dist}");
            println!("longest optimal path: {}", maze.longest_optimal_path());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Maze(cmd) => maze(cmd),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("btrl: {e}");
            ExitCode::FAILURE
        }
    }
}
