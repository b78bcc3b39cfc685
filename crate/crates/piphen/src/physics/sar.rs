//! Partially observable search-and-rescue grid world: wildfires that spread
//! by intensity, missing persons that take two agents to carry, and
//! class-matched extinguishing resources.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::PhysicsError;

pub type AgentId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cell {
    Empty,
    Flammable,
    Obstacle,
    FireA(u8),
    FireB(u8),
    Person,
    DropOff,
    WaterReservoir,
    SandReservoir,
}

impl Cell {
    pub fn name(&self) -> &'static str {
        match self {
            Cell::Empty => "Empty",
            Cell::Flammable => "Flammable",
            Cell::Obstacle => "Obstacle",
            Cell::FireA(_) => "FireA",
            Cell::FireB(_) => "FireB",
            Cell::Person => "Person",
            Cell::DropOff => "DropOff",
            Cell::WaterReservoir => "WaterReservoir",
            Cell::SandReservoir => "SandReservoir",
        }
    }

    fn passable(&self) -> bool {
        !matches!(self, Cell::Obstacle | Cell::WaterReservoir | Cell::SandReservoir)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Resource {
    Water,
    Sand,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dir {
    Up,
    Down,
    Left,
    Right,
}

impl Dir {
    pub const ALL: [Dir; 4] = [Dir::Up, Dir::Down, Dir::Left, Dir::Right];

    fn delta(&self) -> (i64, i64) {
        match self {
            Dir::Up => (0, -1),
            Dir::Down => (0, 1),
            Dir::Left => (-1, 0),
            Dir::Right => (1, 0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SarAction {
    Move(Dir),
    PickResource,
    Extinguish(Dir),
    LiftPerson,
    CarryMove(Dir),
    Drop,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SarAgent {
    pub id: AgentId,
    pub position: (u32, u32),
    pub carried_resource: Option<Resource>,
    pub carrying_person_with: Option<AgentId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SarGrid {
    pub width: u32,
    pub height: u32,
    /// Row-major cells, index = y * width + x.
    pub cells: Vec<Cell>,
    pub agents: Vec<SarAgent>,
    pub seed: u64,
    pub step_index: u64,
    /// Fire spread constant κ: spread probability = clamp(κ·intensity, 0, 1).
    pub spread_kappa: f64,
    pub rescued: u32,
}

pub const MAX_FIRE_INTENSITY: u8 = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionFailure {
    pub agent: AgentId,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SarStepResult {
    pub grid: SarGrid,
    pub failures: Vec<ActionFailure>,
    /// Agents whose action this step was applied (not a no-op failure).
    pub succeeded: Vec<AgentId>,
}

/// Global / local / name observation triple for one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SarObservation {
    /// Unoccluded visible objects with their attributes.
    pub global: Vec<VisibleObject>,
    /// Categories of (up, down, left, right, center).
    pub local: [String; 5],
    /// Names of visible interactable objects.
    pub names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisibleObject {
    pub name: String,
    pub position: (u32, u32),
    pub intensity: Option<u8>,
}

impl SarGrid {
    pub fn new(width: u32, height: u32, seed: u64) -> Self {
        SarGrid {
            width,
            height,
            cells: vec![Cell::Empty; (width * height) as usize],
            agents: Vec::new(),
            seed,
            step_index: 0,
            spread_kappa: 0.1,
            rescued: 0,
        }
    }

    pub fn cell(&self, x: u32, y: u32) -> Cell {
        self.cells[(y * self.width + x) as usize]
    }

    pub fn set_cell(&mut self, x: u32, y: u32, c: Cell) {
        self.cells[(y * self.width + x) as usize] = c;
    }

    pub fn in_bounds(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && (x as u32) < self.width && (y as u32) < self.height
    }

    fn neighbor(&self, pos: (u32, u32), dir: Dir) -> Option<(u32, u32)> {
        let (dx, dy) = dir.delta();
        let (nx, ny) = (pos.0 as i64 + dx, pos.1 as i64 + dy);
        if self.in_bounds(nx, ny) {
            Some((nx as u32, ny as u32))
        } else {
            None
        }
    }

    fn agent_index(&self, id: AgentId) -> Option<usize> {
        self.agents.iter().position(|a| a.id == id)
    }
}

fn step_rng(grid: &SarGrid) -> ChaCha8Rng {
    let mut seed_bytes = [0u8; 32];
    seed_bytes[..8].copy_from_slice(&grid.seed.to_le_bytes());
    seed_bytes[8..16].copy_from_slice(&grid.step_index.to_le_bytes());
    ChaCha8Rng::from_seed(seed_bytes)
}

/// Apply one action per agent, then run fire dynamics. Pure function of
/// (grid, actions, seed): identical inputs give identical outputs.
pub fn step_sar(grid: &SarGrid, actions: &[(AgentId, SarAction)]) -> Result<SarStepResult, PhysicsError> {
    for (id, _) in actions {
        if grid.agent_index(*id).is_none() {
            return Err(PhysicsError::UnknownAgent(*id));
        }
    }
    let mut g = grid.clone();
    let mut failures = Vec::new();
    let mut succeeded = Vec::new();

    // Two-agent verbs need the whole action set in view.
    for (id, action) in actions {
        let idx = g.agent_index(*id).unwrap();
        let ok = match action {
            SarAction::Move(dir) => apply_move(&mut g, idx, *dir, &mut failures),
            SarAction::PickResource => apply_pick(&mut g, idx, &mut failures),
            SarAction::Extinguish(dir) => apply_extinguish(&mut g, idx, *dir, &mut failures),
            SarAction::LiftPerson => apply_lift(&mut g, idx, actions, &mut failures),
            SarAction::CarryMove(dir) => apply_carry_move(&mut g, idx, *dir, actions, &mut failures),
            SarAction::Drop => apply_drop(&mut g, idx, &mut failures),
        };
        if ok {
            succeeded.push(*id);
        }
    }

    spread_fires(&mut g);
    g.step_index += 1;
    Ok(SarStepResult { grid: g, failures, succeeded })
}

fn fail(failures: &mut Vec<ActionFailure>, agent: AgentId, reason: impl Into<String>) -> bool {
    failures.push(ActionFailure { agent, reason: reason.into() });
    false
}

fn apply_move(g: &mut SarGrid, idx: usize, dir: Dir, failures: &mut Vec<ActionFailure>) -> bool {
    let agent = g.agents[idx].clone();
    if agent.carrying_person_with.is_some() {
        return fail(failures, agent.id, "cannot Move while carrying a person (use CarryMove)");
    }
    match g.neighbor(agent.position, dir) {
        Some((nx, ny)) if g.cell(nx, ny).passable() => {
            g.agents[idx].position = (nx, ny);
            true
        }
        Some((nx, ny)) => fail(
            failures,
            agent.id,
            format!("move blocked by {} at ({nx},{ny})", g.cell(nx, ny).name()),
        ),
        None => fail(failures, agent.id, "move off the grid"),
    }
}

fn apply_pick(g: &mut SarGrid, idx: usize, failures: &mut Vec<ActionFailure>) -> bool {
    let agent = g.agents[idx].clone();
    if agent.carried_resource.is_some() {
        return fail(failures, agent.id, "already carrying a resource");
    }
    for dir in Dir::ALL {
        if let Some((nx, ny)) = g.neighbor(agent.position, dir) {
            match g.cell(nx, ny) {
                Cell::WaterReservoir => {
                    g.agents[idx].carried_resource = Some(Resource::Water);
                    return true;
                }
                Cell::SandReservoir => {
                    g.agents[idx].carried_resource = Some(Resource::Sand);
                    return true;
                }
                _ => {}
            }
        }
    }
    fail(failures, agent.id, "no adjacent reservoir")
}

fn apply_extinguish(g: &mut SarGrid, idx: usize, dir: Dir, failures: &mut Vec<ActionFailure>) -> bool {
    let agent = g.agents[idx].clone();
    let Some((nx, ny)) = g.neighbor(agent.position, dir) else {
        return fail(failures, agent.id, "extinguish target off the grid");
    };
    match (g.cell(nx, ny), agent.carried_resource) {
        (Cell::FireA(_), Some(Resource::Water)) | (Cell::FireB(_), Some(Resource::Sand)) => {
            g.set_cell(nx, ny, Cell::Empty);
            g.agents[idx].carried_resource = None;
            true
        }
        (Cell::FireA(_), _) => fail(failures, agent.id, "class A fire needs water"),
        (Cell::FireB(_), _) => fail(failures, agent.id, "class B fire needs sand"),
        (other, _) => fail(failures, agent.id, format!("no fire at target ({})", other.name())),
    }
}

fn apply_lift(
    g: &mut SarGrid,
    idx: usize,
    actions: &[(AgentId, SarAction)],
    failures: &mut Vec<ActionFailure>,
) -> bool {
    let agent = g.agents[idx].clone();
    if agent.carrying_person_with.is_some() {
        // partner already completed the pairing this step
        return true;
    }
    let pos = agent.position;
    if g.cell(pos.0, pos.1) != Cell::Person {
        return fail(failures, agent.id, "no person at this cell");
    }
    // another co-located agent must issue LiftPerson in the same step
    let partner = actions.iter().find_map(|(other_id, act)| {
        if *other_id == agent.id || !matches!(act, SarAction::LiftPerson) {
            return None;
        }
        let oidx = g.agent_index(*other_id)?;
        let other = &g.agents[oidx];
        (other.position == pos && other.carrying_person_with.is_none()).then_some(*other_id)
    });
    match partner {
        Some(pid) => {
            let pidx = g.agent_index(pid).unwrap();
            g.agents[idx].carrying_person_with = Some(pid);
            g.agents[pidx].carrying_person_with = Some(agent.id);
            g.set_cell(pos.0, pos.1, Cell::Empty);
            true
        }
        None => fail(failures, agent.id, "lifting a person requires two co-located agents"),
    }
}

fn apply_carry_move(
    g: &mut SarGrid,
    idx: usize,
    dir: Dir,
    actions: &[(AgentId, SarAction)],
    failures: &mut Vec<ActionFailure>,
) -> bool {
    let agent = g.agents[idx].clone();
    let Some(pid) = agent.carrying_person_with else {
        return fail(failures, agent.id, "not carrying a person");
    };
    let partner_agrees = actions
        .iter()
        .any(|(other_id, act)| *other_id == pid && matches!(act, SarAction::CarryMove(d) if *d == dir));
    if !partner_agrees {
        return fail(failures, agent.id, "carry partner did not issue the same CarryMove");
    }
    let pidx = g.agent_index(pid).unwrap();
    if g.agents[pidx].position != agent.position {
        return fail(failures, agent.id, "carry partners are not co-located");
    }
    if agent.id > pid {
        // the lower-id partner moves the pair; this half is a no-op success
        return true;
    }
    match g.neighbor(agent.position, dir) {
        Some((nx, ny)) if g.cell(nx, ny).passable() => {
            g.agents[idx].position = (nx, ny);
            g.agents[pidx].position = (nx, ny);
            true
        }
        Some((nx, ny)) => fail(
            failures,
            agent.id,
            format!("carry move blocked by {} at ({nx},{ny})", g.cell(nx, ny).name()),
        ),
        None => fail(failures, agent.id, "carry move off the grid"),
    }
}

fn apply_drop(g: &mut SarGrid, idx: usize, failures: &mut Vec<ActionFailure>) -> bool {
    let agent = g.agents[idx].clone();
    let Some(pid) = agent.carrying_person_with else {
        return fail(failures, agent.id, "nothing to drop");
    };
    let pos = agent.position;
    let pidx = g.agent_index(pid).unwrap();
    g.agents[idx].carrying_person_with = None;
    g.agents[pidx].carrying_person_with = None;
    if g.cell(pos.0, pos.1) == Cell::DropOff {
        g.rescued += 1;
    } else {
        g.set_cell(pos.0, pos.1, Cell::Person);
    }
    true
}

fn spread_fires(g: &mut SarGrid) {
    let mut rng = step_rng(g);
    let mut ignitions: Vec<(u32, u32, Cell)> = Vec::new();
    let mut grown = g.cells.clone();
    for y in 0..g.height {
        for x in 0..g.width {
            let cell = g.cell(x, y);
            let (intensity, class_a) = match cell {
                Cell::FireA(i) => (i, true),
                Cell::FireB(i) => (i, false),
                _ => continue,
            };
            let p = (g.spread_kappa * intensity as f64).clamp(0.0, 1.0);
            for dir in Dir::ALL {
                if let Some((nx, ny)) = g.neighbor((x, y), dir) {
                    // fire only ever enters Flammable cells
                    if g.cell(nx, ny) == Cell::Flammable && rng.gen::<f64>() < p {
                        let new = if class_a { Cell::FireA(1) } else { Cell::FireB(1) };
                        ignitions.push((nx, ny, new));
                    }
                }
            }
            let next_i = (intensity + 1).min(MAX_FIRE_INTENSITY);
            grown[(y * g.width + x) as usize] =
                if class_a { Cell::FireA(next_i) } else { Cell::FireB(next_i) };
        }
    }
    g.cells = grown;
    for (x, y, c) in ignitions {
        if g.cell(x, y) == Cell::Flammable {
            g.set_cell(x, y, c);
        }
    }
}

const INTERACTABLE: [&str; 6] = ["FireA", "FireB", "Person", "DropOff", "WaterReservoir", "SandReservoir"];

/// Bresenham line; the target is visible unless an Obstacle sits strictly
/// between the two endpoints.
fn line_of_sight(g: &SarGrid, from: (u32, u32), to: (u32, u32)) -> bool {
    let (mut x0, mut y0) = (from.0 as i64, from.1 as i64);
    let (x1, y1) = (to.0 as i64, to.1 as i64);
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    loop {
        if (x0, y0) != (from.0 as i64, from.1 as i64)
            && (x0, y0) != (x1, y1)
            && g.cell(x0 as u32, y0 as u32) == Cell::Obstacle
        {
            return false;
        }
        if x0 == x1 && y0 == y1 {
            return true;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x0 += sx;
        }
        if e2 <= dx {
            err += dx;
            y0 += sy;
        }
    }
}

/// (O_G, O_L, O_N) for one agent: ray-cast global view, 5-cell local view,
/// and visible interactable names.
pub fn observe_sar(grid: &SarGrid, agent: AgentId) -> Result<SarObservation, PhysicsError> {
    let a = grid
        .agents
        .iter()
        .find(|a| a.id == agent)
        .ok_or(PhysicsError::UnknownAgent(agent))?;
    let pos = a.position;

    let mut global = Vec::new();
    let mut names = Vec::new();
    for y in 0..grid.height {
        for x in 0..grid.width {
            let cell = grid.cell(x, y);
            if !INTERACTABLE.contains(&cell.name()) {
                continue;
            }
            if line_of_sight(grid, pos, (x, y)) {
                let intensity = match cell {
                    Cell::FireA(i) | Cell::FireB(i) => Some(i),
                    _ => None,
                };
                global.push(VisibleObject { name: cell.name().to_string(), position: (x, y), intensity });
                if !names.contains(&cell.name().to_string()) {
                    names.push(cell.name().to_string());
                }
            }
        }
    }

    let look = |dir: Option<Dir>| -> String {
        let p = match dir {
            None => Some(pos),
            Some(d) => grid.neighbor(pos, d),
        };
        match p {
            Some((x, y)) => grid.cell(x, y).name().to_string(),
            None => "Obstacle".to_string(), // the world edge reads as a wall
        }
    };
    let local = [
        look(Some(Dir::Up)),
        look(Some(Dir::Down)),
        look(Some(Dir::Left)),
        look(Some(Dir::Right)),
        look(None),
    ];

    Ok(SarObservation { global, local, names })
}
