//! Grid mazes with cell walls, their text format, and compilation to a
//! [`TabularMdp`].
//!
//! Text format: newline-separated rows over `#` (wall), `.` (free), `S`
//! (start) and `G` (goal), exactly one `S` and one `G`.

use std::collections::VecDeque;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mdp::{ActionId, StateId, TabularMdp};

pub const DEFAULT_STEP_REWARD: f64 = -0.001;
pub const DEFAULT_GOAL_REWARD: f64 = 1.0;

const MAX_GENERATION_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

/// The four moves, in action-index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Up = 0,
    Down = 1,
    Right = 2,
    Left = 3,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::Up, Direction::Down, Direction::Right, Direction::Left];

    pub fn action(self) -> ActionId {
        ActionId(self as usize)
    }

    pub fn from_action(a: ActionId) -> Option<Self> {
        Self::ALL.get(a.0).copied()
    }

    pub fn opposite(self) -> Self {
        match self {
            Direction::Up => Direction::Down,
            Direction::Down => Direction::Up,
            Direction::Right => Direction::Left,
            Direction::Left => Direction::Right,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Direction::Up => "up",
            Direction::Down => "down",
            Direction::Right => "right",
            Direction::Left => "left",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Maze {
    width: usize,
    height: usize,
    walls: Vec<bool>,
    start: Cell,
    goal: Cell,
}

impl Maze {
    /// Validates and builds a maze. `walls` is row-major, `true` = wall.
    pub fn new(width: usize, height: usize, walls: Vec<bool>, start: Cell, goal: Cell) -> Result<Self> {
        if width == 0 || height == 0 || walls.len() != width * height {
            return Err(Error::InvalidMaze(format!("{width}x{height} grid with {} cells", walls.len())));
        }
        let maze = Self { width, height, walls, start, goal };
        for (name, c) in [("start", start), ("goal", goal)] {
            if !maze.in_bounds(c) {
                return Err(Error::InvalidMaze(format!("{name} out of bounds")));
            }
            if maze.is_wall(c) {
                return Err(Error::InvalidMaze(format!("{name} is a wall")));
            }
        }
        if start == goal {
            return Err(Error::InvalidMaze("start and goal coincide".into()));
        }
        if !maze.is_solvable() {
            return Err(Error::InvalidMaze("goal unreachable from start".into()));
        }
        Ok(maze)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn start(&self) -> Cell {
        self.start
    }

    pub fn goal(&self) -> Cell {
        self.goal
    }

    fn in_bounds(&self, c: Cell) -> bool {
        c.row < self.height && c.col < self.width
    }

    pub fn is_wall(&self, c: Cell) -> bool {
        self.walls[c.row * self.width + c.col]
    }

    pub fn free_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.height)
            .flat_map(move |row| (0..self.width).map(move |col| Cell::new(row, col)))
            .filter(|&c| !self.is_wall(c))
    }

    /// The cell reached by moving from `c`, or `None` when the move leaves
    /// the grid or hits a wall.
    pub fn neighbor(&self, c: Cell, dir: Direction) -> Option<Cell> {
        let n = offset(c, dir, self.width, self.height)?;
        (!self.is_wall(n)).then_some(n)
    }

    /// BFS distances (in moves) from `from` to every free cell.
    pub fn distances_from(&self, from: Cell) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.width * self.height];
        let mut queue = VecDeque::new();
        dist[from.row * self.width + from.col] = Some(0);
        queue.push_back(from);
        while let Some(c) = queue.pop_front() {
            let d = dist[c.row * self.width + c.col].unwrap();
            for dir in Direction::ALL {
                if let Some(n) = self.neighbor(c, dir) {
                    let slot = &mut dist[n.row * self.width + n.col];
                    if slot.is_none() {
                        *slot = Some(d + 1);
                        queue.push_back(n);
                    }
                }
            }
        }
        dist
    }

    pub fn is_solvable(&self) -> bool {
        self.distances_from(self.start)[self.goal.row * self.width + self.goal.col].is_some()
    }

    /// Length of the longest shortest path to the goal over all cells that
    /// can reach it.
    pub fn longest_optimal_path(&self) -> usize {
        self.distances_from(self.goal).into_iter().flatten().max().unwrap_or(0)
    }

    /// Compiles the maze: one state per free cell (row-major order), four
    /// actions, blocked moves leave the state unchanged, the goal is the only
    /// terminal and entering it earns `step_reward + goal_reward`.
    pub fn to_mdp(&self, step_reward: f64, goal_reward: f64) -> Result<MazeMdp> {
        let mut index = vec![usize::MAX; self.width * self.height];
        let mut cells = Vec::new();
        for c in self.free_cells() {
            index[c.row * self.width + c.col] = cells.len();
            cells.push(c);
        }
        let state_of = |c: Cell| StateId(index[c.row * self.width + c.col]);
        let goal = state_of(self.goal);
        let n_actions = Direction::ALL.len();
        let mut next = Vec::with_capacity(cells.len() * n_actions);
        let mut reward = Vec::with_capacity(cells.len() * n_actions);
        for &c in &cells {
            let s = state_of(c);
            for dir in Direction::ALL {
                if s == goal {
                    next.push(s);
                    reward.push(0.0);
                    continue;
                }
                let sp = self.neighbor(c, dir).map(state_of).unwrap_or(s);
                next.push(sp);
                reward.push(if sp == goal { step_reward + goal_reward } else { step_reward });
            }
        }
        let mdp = TabularMdp::deterministic(cells.len(), n_actions, next, reward, &[goal], state_of(self.start))?;
        Ok(MazeMdp { mdp, cells })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let lines: Vec<&str> = text.trim_end_matches('\n').split('\n').collect();
        if lines.is_empty() || lines[0].is_empty() {
            return Err(Error::MazeParse { line: 1, msg: "empty grid".into() });
        }
        let width = lines[0].chars().count();
        let height = lines.len();
        let mut walls = Vec::with_capacity(width * height);
        let mut start = None;
        let mut goal = None;
        for (row, line) in lines.iter().enumerate() {
            let lineno = row + 1;
            if line.chars().count() != width {
                return Err(Error::MazeParse {
                    line: lineno,
                    msg: format!("row has {} cells, expected {width}", line.chars().count()),
                });
            }
            for (col, ch) in line.chars().enumerate() {
                let cell = Cell::new(row, col);
                match ch {
                    '#' => walls.push(true),
                    '.' => walls.push(false),
                    'S' | 'G' => {
                        let slot = if ch == 'S' { &mut start } else { &mut goal };
                        if slot.is_some() {
                            return Err(Error::MazeParse { line: lineno, msg: format!("second '{ch}'") });
                        }
                        *slot = Some(cell);
                        walls.push(false);
                    }
                    other => return Err(Error::MazeParse { line: lineno, msg: format!("unknown symbol {other:?}") }),
                }
            }
        }
        let start = start.ok_or(Error::MazeParse { line: height, msg: "missing 'S'".into() })?;
        let goal = goal.ok_or(Error::MazeParse { line: height, msg: "missing 'G'".into() })?;
        Self::new(width, height, walls, start, goal)
    }

    /// Text form without a trailing newline.
    pub fn serialize(&self) -> String {
        let mut out = String::with_capacity((self.width + 1) * self.height);
        for row in 0..self.height {
            if row > 0 {
                out.push('\n');
            }
            for col in 0..self.width {
                let c = Cell::new(row, col);
                out.push(if c == self.start {
                    'S'
                } else if c == self.goal {
                    'G'
                } else if self.is_wall(c) {
                    '#'
                } else {
                    '.'
                });
            }
        }
        out
    }
}

impl fmt::Display for Maze {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.serialize())
    }
}

fn offset(c: Cell, dir: Direction, width: usize, height: usize) -> Option<Cell> {
    let (row, col) = match dir {
        Direction::Up => (c.row.checked_sub(1)?, c.col),
        Direction::Down => (c.row + 1, c.col),
        Direction::Right => (c.row, c.col + 1),
        Direction::Left => (c.row, c.col.checked_sub(1)?),
    };
    (row < height && col < width).then_some(Cell::new(row, col))
}

/// A compiled maze plus the state-to-cell map.
#[derive(Debug, Clone)]
pub struct MazeMdp {
    pub mdp: TabularMdp,
    pub cells: Vec<Cell>,
}

impl MazeMdp {
    pub fn cell(&self, s: StateId) -> Cell {
        self.cells[s.0]
    }

    pub fn state(&self, c: Cell) -> Option<StateId> {
        self.cells.iter().position(|&x| x == c).map(StateId)
    }
}

/// Generates a perfect maze (free cells form a spanning tree under
/// 4-adjacency) by randomised depth-first carving, start top-left and goal
/// bottom-right.
///
/// A wall cell is carved only when its sole free neighbour is the cell being
/// extended, which keeps the free region a tree. The goal is carved as soon as
/// it becomes eligible; carvings that leave the goal enclosed are discarded
/// and redrawn from the same random stream.
pub fn generate_maze(width: usize, height: usize, seed: u64) -> Result<Maze> {
    if width < 2 || height < 2 {
        return Err(Error::InvalidMaze(format!("{width}x{height} is below the 2x2 minimum")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = Cell::new(0, 0);
    let goal = Cell::new(height - 1, width - 1);
    for _ in 0..MAX_GENERATION_ATTEMPTS {
        let walls = carve(width, height, start, goal, &mut rng);
        if !walls[goal.row * width + goal.col] {
            return Maze::new(width, height, walls, start, goal);
        }
    }
    Err(Error::InvalidMaze(format!("no solvable {width}x{height} carving after {MAX_GENERATION_ATTEMPTS} attempts")))
}

fn carve(width: usize, height: usize, start: Cell, goal: Cell, rng: &mut ChaCha8Rng) -> Vec<bool> {
    let mut walls = vec![true; width * height];
    let at = |c: Cell| c.row * width + c.col;
    let free_neighbors = |walls: &[bool], c: Cell| {
        Direction::ALL.iter().filter_map(|&d| offset(c, d, width, height)).filter(|&n| !walls[at(n)]).count()
    };
    walls[at(start)] = false;
    let mut stack = vec![start];
    let mut candidates = Vec::with_capacity(4);
    while let Some(&cur) = stack.last() {
        candidates.clear();
        candidates.extend(
            Direction::ALL
                .iter()
                .filter_map(|&d| offset(cur, d, width, height))
                .filter(|&n| walls[at(n)] && free_neighbors(&walls, n) == 1),
        );
        let next = if candidates.contains(&goal) { Some(goal) } else { candidates.choose(rng).copied() };
        match next {
            Some(n) => {
                walls[at(n)] = false;
                stack.push(n);
            }
            None => {
                stack.pop();
            }
        }
    }
    walls
}
