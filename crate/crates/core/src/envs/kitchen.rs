//! A two-chef gridworld kitchen with deterministic, player-permutation
//! invariant dynamics.
//!
//! Chefs move on floor tiles and interact with adjacent stations to collect
//! tomatoes and plates, cook, pass items over a table, and deliver soups.
//! Both chefs spawn on the same start tile; afterwards they can never
//! overlap. All transitions are deterministic, so every transition row of the
//! exported game tensor is one-hot.
//!
//! State components: both positions, both carried items, the pot state, and
//! one slot per table. Actions: `0` up, `1` down, `2` left, `3` right,
//! `4` interact.

use std::collections::HashMap;

use ndarray::{Array1, Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::RewardlessGame;

/// Number of per-chef actions (four moves plus interact).
pub const KITCHEN_ACTIONS: usize = 5;

const INTERACT: usize = 4;
const MOVES: [(isize, isize); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];

/// Compact reference layout: tomato stand on the left, pass-over table and
/// pot along the top, plate stand and delivery on the right.
pub const REFERENCE_LAYOUT: &str = "##BO#\nTS..P\n###D#";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Tile {
    Floor,
    Wall,
    TomatoStand,
    PlateStand,
    Pot,
    Table,
    Delivery,
}

/// Parsed kitchen grid.
#[derive(Debug, Clone)]
pub struct KitchenLayout {
    grid: Vec<Vec<Tile>>,
    rows: Vec<String>,
    start: (usize, usize),
    tables: Vec<(usize, usize)>,
}

impl KitchenLayout {
    /// Parse an ASCII grid: `#` wall, `.` floor, `S` start (floor), `T`
    /// tomato stand, `P` plate stand, `O` pot, `B` table, `D` delivery.
    pub fn parse(text: &str) -> Result<Self> {
        let rows: Vec<String> = text
            .lines()
            .map(|l| l.trim_end_matches('\r').to_string())
            .filter(|l| !l.is_empty())
            .collect();
        if rows.is_empty() {
            return Err(Error::InvalidLayout("empty layout".into()));
        }
        let width = rows[0].len();
        let mut grid = Vec::with_capacity(rows.len());
        let mut start = None;
        let mut pots = 0usize;
        let mut tomato = 0usize;
        let mut plates = 0usize;
        let mut deliveries = 0usize;
        let mut tables = Vec::new();
        for (r, line) in rows.iter().enumerate() {
            if line.len() != width {
                return Err(Error::InvalidLayout(format!(
                    "row {r} has width {}, expected {width}",
                    line.len()
                )));
            }
            let mut row = Vec::with_capacity(width);
            for (c, ch) in line.chars().enumerate() {
                let tile = match ch {
                    '#' => Tile::Wall,
                    '.' => Tile::Floor,
                    'S' => {
                        if start.replace((r, c)).is_some() {
                            return Err(Error::InvalidLayout("multiple start cells".into()));
                        }
                        Tile::Floor
                    }
                    'T' => {
                        tomato += 1;
                        Tile::TomatoStand
                    }
                    'P' => {
                        plates += 1;
                        Tile::PlateStand
                    }
                    'O' => {
                        pots += 1;
                        Tile::Pot
                    }
                    'B' => {
                        tables.push((r, c));
                        Tile::Table
                    }
                    'D' => {
                        deliveries += 1;
                        Tile::Delivery
                    }
                    other => {
                        return Err(Error::InvalidLayout(format!(
                            "unknown tile '{other}' at ({r}, {c})"
                        )));
                    }
                };
                row.push(tile);
            }
            grid.push(row);
        }
        let start = start.ok_or_else(|| Error::InvalidLayout("no start cell".into()))?;
        if pots != 1 {
            return Err(Error::InvalidLayout(format!("expected exactly one pot, found {pots}")));
        }
        if tomato == 0 || plates == 0 {
            return Err(Error::InvalidLayout(
                "need at least one tomato stand and one plate stand".into(),
            ));
        }
        if deliveries == 0 {
            return Err(Error::InvalidLayout("need at least one delivery tile".into()));
        }
        let layout = Self {
            grid,
            rows,
            start,
            tables,
        };
        layout.check_connected()?;
        Ok(layout)
    }

    fn check_connected(&self) -> Result<()> {
        let floors: Vec<(usize, usize)> = self.floor_cells();
        if floors.is_empty() {
            return Err(Error::InvalidLayout("no walkable cells".into()));
        }
        let mut seen = vec![self.start];
        let mut queue = vec![self.start];
        while let Some((r, c)) = queue.pop() {
            for (dr, dc) in MOVES {
                let nr = r as isize + dr;
                let nc = c as isize + dc;
                if nr < 0 || nc < 0 {
                    continue;
                }
                let cell = (nr as usize, nc as usize);
                if self.is_floor(cell) && !seen.contains(&cell) {
                    seen.push(cell);
                    queue.push(cell);
                }
            }
        }
        if seen.len() != floors.len() {
            return Err(Error::InvalidLayout(
                "walkable region is not connected".into(),
            ));
        }
        Ok(())
    }

    fn floor_cells(&self) -> Vec<(usize, usize)> {
        let mut cells = Vec::new();
        for (r, row) in self.grid.iter().enumerate() {
            for (c, &tile) in row.iter().enumerate() {
                if tile == Tile::Floor {
                    cells.push((r, c));
                }
            }
        }
        cells
    }

    fn is_floor(&self, (r, c): (usize, usize)) -> bool {
        self.grid
            .get(r)
            .and_then(|row| row.get(c))
            .is_some_and(|&t| t == Tile::Floor)
    }

    fn tile(&self, (r, c): (usize, usize)) -> Tile {
        self.grid[r][c]
    }

    fn table_index(&self, cell: (usize, usize)) -> usize {
        self.tables.iter().position(|&t| t == cell).expect("known table")
    }

    pub fn start(&self) -> (usize, usize) {
        self.start
    }

    pub fn num_tables(&self) -> usize {
        self.tables.len()
    }

    /// The original ASCII rows.
    pub fn rows(&self) -> &[String] {
        &self.rows
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Carry {
    Nothing,
    Plate,
    Tomato,
    Soup,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PotState {
    Empty,
    Ready,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SlotState {
    Empty,
    Tomato,
    Plate,
}

/// Full kitchen configuration: per-chef positions and carried items, the pot,
/// and one slot per table.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KitchenState {
    /// `(row, col)` per chef. Distinct except when both sit on the start.
    pub positions: [(usize, usize); 2],
    pub carries: [Carry; 2],
    pub pot: PotState,
    pub slots: Vec<SlotState>,
}

impl KitchenState {
    fn swapped(&self) -> Self {
        Self {
            positions: [self.positions[1], self.positions[0]],
            carries: [self.carries[1], self.carries[0]],
            pot: self.pot,
            slots: self.slots.clone(),
        }
    }
}

/// Events fired during one joint step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepEvents {
    pub cooked: [bool; 2],
    pub delivered: [bool; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Claim {
    TakeTomato,
    TakePlate,
    Cook,
    TakeSoup,
    TableTake(usize),
    TablePlace(usize, SlotState),
    Deliver,
}

/// Which events reward a chef.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChefTask {
    Deliver,
    Cook,
    Both,
}

/// Enumerated reachable state space with precomputed deterministic
/// transitions and event flags.
#[derive(Debug, Clone)]
pub struct KitchenCodec {
    layout: KitchenLayout,
    states: Vec<KitchenState>,
    index: HashMap<KitchenState, usize>,
    /// Seat-swap relabeling: `swap[s]` is the state with both chefs'
    /// components exchanged.
    swap: Vec<usize>,
    /// Per state, per joint action `(a0 * 5 + a1)`: next state and events.
    next: Vec<Vec<(usize, StepEvents)>>,
}

impl KitchenCodec {
    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn state(&self, idx: usize) -> &KitchenState {
        &self.states[idx]
    }

    pub fn index_of(&self, state: &KitchenState) -> Option<usize> {
        self.index.get(state).copied()
    }

    /// Index of the start configuration.
    pub fn initial_state(&self) -> usize {
        0
    }

    /// Apply a joint action; returns the next state index and the events.
    pub fn step(&self, state: usize, actions: [usize; 2]) -> (usize, StepEvents) {
        self.next[state][actions[0] * KITCHEN_ACTIONS + actions[1]]
    }

    /// Did chef `player` fire a cook event on this joint step?
    pub fn cooked(&self, state: usize, actions: [usize; 2], player: usize) -> bool {
        self.step(state, actions).1.cooked[player]
    }

    /// Did chef `player` fire a delivery event on this joint step?
    pub fn delivered(&self, state: usize, actions: [usize; 2], player: usize) -> bool {
        self.step(state, actions).1.delivered[player]
    }

    /// Would interacting cook, judged against the pre-state alone (the other
    /// chef's simultaneous claim is ignored). This is the per-chef reward
    /// predicate; rewards must depend only on own state-action pairs.
    pub fn would_cook(&self, state: usize, player: usize) -> bool {
        let st = &self.states[state];
        st.carries[player] == Carry::Tomato
            && st.pot == PotState::Empty
            && self.adjacent_tile(st.positions[player], Tile::Pot)
    }

    /// Would interacting deliver, judged against the pre-state alone.
    pub fn would_deliver(&self, state: usize, player: usize) -> bool {
        let st = &self.states[state];
        st.carries[player] == Carry::Soup
            && self.adjacent_tile(st.positions[player], Tile::Delivery)
    }

    /// Seat-swapped state index.
    pub fn swap_state(&self, state: usize) -> usize {
        self.swap[state]
    }

    /// Full swap relabeling, usable as a seat frame for compositions.
    pub fn swap_frame(&self) -> Vec<usize> {
        self.swap.clone()
    }

    pub fn layout(&self) -> &KitchenLayout {
        &self.layout
    }

    fn adjacent_tile(&self, pos: (usize, usize), tile: Tile) -> bool {
        self.neighbours(pos).any(|cell| self.layout.tile(cell) == tile)
    }

    fn neighbours(&self, (r, c): (usize, usize)) -> impl Iterator<Item = (usize, usize)> + '_ {
        MOVES.iter().filter_map(move |&(dr, dc)| {
            let nr = r as isize + dr;
            let nc = c as isize + dc;
            if nr < 0
                || nc < 0
                || nr as usize >= self.layout.grid.len()
                || nc as usize >= self.layout.grid[0].len()
            {
                None
            } else {
                Some((nr as usize, nc as usize))
            }
        })
    }

    /// JSON manifest of the state indexing, for debugging.
    pub fn manifest(&self) -> serde_json::Value {
        serde_json::json!({
            "num_states": self.num_states(),
            "num_actions": KITCHEN_ACTIONS,
            "layout": self.layout.rows(),
            "states": self.states,
        })
    }
}

fn claim_for(layout: &KitchenLayout, state: &KitchenState, player: usize) -> Option<Claim> {
    let pos = state.positions[player];
    let carry = state.carries[player];
    let adjacent: Vec<(usize, usize)> = MOVES
        .iter()
        .filter_map(|&(dr, dc)| {
            let nr = pos.0 as isize + dr;
            let nc = pos.1 as isize + dc;
            if nr < 0
                || nc < 0
                || nr as usize >= layout.grid.len()
                || nc as usize >= layout.grid[0].len()
            {
                None
            } else {
                Some((nr as usize, nc as usize))
            }
        })
        .collect();
    let has = |tile: Tile| adjacent.iter().any(|&cell| layout.tile(cell) == tile);

    // Rule order is fixed: stands, pot, table, delivery; first match wins.
    if carry == Carry::Nothing && has(Tile::TomatoStand) {
        return Some(Claim::TakeTomato);
    }
    if carry == Carry::Nothing && has(Tile::PlateStand) {
        return Some(Claim::TakePlate);
    }
    if carry == Carry::Tomato && state.pot == PotState::Empty && has(Tile::Pot) {
        return Some(Claim::Cook);
    }
    if carry == Carry::Plate && state.pot == PotState::Ready && has(Tile::Pot) {
        return Some(Claim::TakeSoup);
    }
    for &cell in &adjacent {
        if layout.tile(cell) != Tile::Table {
            continue;
        }
        let t = layout.table_index(cell);
        let slot = state.slots[t];
        if carry == Carry::Nothing && slot != SlotState::Empty {
            return Some(Claim::TableTake(t));
        }
        if slot == SlotState::Empty {
            match carry {
                Carry::Tomato => return Some(Claim::TablePlace(t, SlotState::Tomato)),
                Carry::Plate => return Some(Claim::TablePlace(t, SlotState::Plate)),
                _ => {}
            }
        }
    }
    if carry == Carry::Soup && has(Tile::Delivery) {
        return Some(Claim::Deliver);
    }
    None
}

/// Claims on the same exclusive resource (the pot, one table slot) cancel
/// each other so the dynamics stay symmetric under seat swaps.
fn claims_conflict(a: Claim, b: Claim) -> bool {
    use Claim::*;
    match (a, b) {
        (Cook, Cook) | (TakeSoup, TakeSoup) => true,
        (TableTake(x), TableTake(y)) => x == y,
        (TablePlace(x, _), TablePlace(y, _)) => x == y,
        _ => false,
    }
}

fn step_state(layout: &KitchenLayout, state: &KitchenState, actions: [usize; 2]) -> (KitchenState, StepEvents) {
    let mut next = state.clone();
    let mut events = StepEvents::default();

    // Interactions resolve against the pre-state.
    let claims: Vec<Option<Claim>> = (0..2)
        .map(|p| {
            if actions[p] == INTERACT {
                claim_for(layout, state, p)
            } else {
                None
            }
        })
        .collect();
    for p in 0..2 {
        let claim = match claims[p] {
            Some(c) => c,
            None => continue,
        };
        if let Some(other) = claims[1 - p] {
            if claims_conflict(claim, other) {
                continue;
            }
        }
        match claim {
            Claim::TakeTomato => next.carries[p] = Carry::Tomato,
            Claim::TakePlate => next.carries[p] = Carry::Plate,
            Claim::Cook => {
                next.carries[p] = Carry::Nothing;
                next.pot = PotState::Ready;
                events.cooked[p] = true;
            }
            Claim::TakeSoup => {
                next.carries[p] = Carry::Soup;
                next.pot = PotState::Empty;
            }
            Claim::TableTake(t) => {
                next.carries[p] = match state.slots[t] {
                    SlotState::Tomato => Carry::Tomato,
                    SlotState::Plate => Carry::Plate,
                    SlotState::Empty => unreachable!("take requires a full slot"),
                };
                next.slots[t] = SlotState::Empty;
            }
            Claim::TablePlace(t, item) => {
                next.slots[t] = item;
                next.carries[p] = Carry::Nothing;
            }
            Claim::Deliver => {
                next.carries[p] = Carry::Nothing;
                events.delivered[p] = true;
            }
        }
    }

    // Simultaneous movement with symmetric conflict resolution: walking into
    // a wall or station stays put; same-target and swap attempts leave both
    // chefs in place.
    let mut targets = state.positions;
    for p in 0..2 {
        if actions[p] < INTERACT {
            let (dr, dc) = MOVES[actions[p]];
            let nr = state.positions[p].0 as isize + dr;
            let nc = state.positions[p].1 as isize + dc;
            if nr >= 0 && nc >= 0 {
                let cell = (nr as usize, nc as usize);
                if layout.is_floor(cell) {
                    targets[p] = cell;
                }
            }
        }
    }
    let swap_attempt = targets[0] == state.positions[1]
        && targets[1] == state.positions[0]
        && state.positions[0] != state.positions[1];
    if targets[0] == targets[1] || swap_attempt {
        targets = state.positions;
    }
    next.positions = targets;

    (next, events)
}

/// Enumerate the reachable kitchen and materialise it as a rewardless game
/// (dense one-hot transition tensor, point-mass initial distribution on the
/// start configuration).
pub fn build_kitchen(layout: &KitchenLayout, discount: f64) -> Result<(RewardlessGame, KitchenCodec)> {
    let initial = KitchenState {
        positions: [layout.start, layout.start],
        carries: [Carry::Nothing, Carry::Nothing],
        pot: PotState::Empty,
        slots: vec![SlotState::Empty; layout.tables.len()],
    };

    let mut states = vec![initial.clone()];
    let mut index = HashMap::new();
    index.insert(initial, 0usize);
    let mut next: Vec<Vec<(usize, StepEvents)>> = Vec::new();
    let mut cursor = 0usize;
    while cursor < states.len() {
        let current = states[cursor].clone();
        let mut row = Vec::with_capacity(KITCHEN_ACTIONS * KITCHEN_ACTIONS);
        for a0 in 0..KITCHEN_ACTIONS {
            for a1 in 0..KITCHEN_ACTIONS {
                let (succ, events) = step_state(layout, &current, [a0, a1]);
                let id = match index.get(&succ) {
                    Some(&id) => id,
                    None => {
                        let id = states.len();
                        index.insert(succ.clone(), id);
                        states.push(succ);
                        id
                    }
                };
                row.push((id, events));
            }
        }
        next.push(row);
        cursor += 1;
    }

    let mut swap = vec![usize::MAX; states.len()];
    for (i, st) in states.iter().enumerate() {
        swap[i] = *index.get(&st.swapped()).ok_or_else(|| {
            Error::InvalidLayout("reachable set is not closed under seat swaps".into())
        })?;
    }

    let s_count = states.len();
    let j_count = KITCHEN_ACTIONS * KITCHEN_ACTIONS;
    let mut transition = Array3::<f64>::zeros((s_count, j_count, s_count));
    for s in 0..s_count {
        for j in 0..j_count {
            transition[[s, j, next[s][j].0]] = 1.0;
        }
    }
    let mut initial_dist = Array1::<f64>::zeros(s_count);
    initial_dist[0] = 1.0;
    let game = RewardlessGame::new(s_count, KITCHEN_ACTIONS, 2, transition, discount, initial_dist)?;
    let codec = KitchenCodec {
        layout: layout.clone(),
        states,
        index,
        swap,
        next,
    };
    Ok((game, codec))
}

/// Intrinsic reward table in the canonical (seat 0) frame: 1 on every
/// `(state, interact)` pair whose pre-state lets the chef fire the task's
/// event. Seat 1 usage goes through the codec's swap frame.
pub fn chef_intrinsic_reward(codec: &KitchenCodec, task: ChefTask) -> Array2<f64> {
    let mut table = Array2::<f64>::zeros((codec.num_states(), KITCHEN_ACTIONS));
    for s in 0..codec.num_states() {
        let fires = match task {
            ChefTask::Deliver => codec.would_deliver(s, 0),
            ChefTask::Cook => codec.would_cook(s, 0),
            ChefTask::Both => codec.would_deliver(s, 0) || codec.would_cook(s, 0),
        };
        if fires {
            table[[s, INTERACT]] = 1.0;
        }
    }
    table
}
