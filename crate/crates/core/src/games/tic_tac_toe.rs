//! m×n k-in-a-row. `tic_tac_toe` is 3×3 with three in a row;
//! `generalized_tic_tac_toe` defaults to a 6×6 board with four in a row.
//!
//! Actions are `"r,c"`. Player 0 moves first.

use serde::Serialize;
use serde_json::{json, Value};

use super::Rules;
use crate::inprocess::Fault;
use crate::model::{GameSpec, InfoKind, PlayerId, TERMINAL_PLAYER};

pub const EMPTY: i8 = -1;

#[derive(Debug, Clone)]
pub struct TicTacToe {
    spec: GameSpec,
    rows: usize,
    cols: usize,
    line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct BoardState {
    pub board: Vec<Vec<i8>>,
    pub current_player: i8,
    pub winner: Option<u8>,
    pub moves: usize,
}

impl TicTacToe {
    pub fn new(name: &str, rows: i64, cols: i64, line: i64) -> Result<Self, String> {
        if rows < 1 || cols < 1 || line < 1 {
            return Err("board dimensions and line length must be positive".into());
        }
        if rows > 64 || cols > 64 {
            return Err("boards are limited to 64×64".into());
        }
        if line > rows.max(cols) {
            return Err(format!("line length {line} does not fit a {rows}×{cols} board"));
        }
        let mut spec = GameSpec::new(name, 2, InfoKind::Perfect).map_err(|e| e.to_string())?;
        spec.max_walk_steps = 200;
        Ok(TicTacToe {
            spec,
            rows: rows as usize,
            cols: cols as usize,
            line: line as usize,
        })
    }

    pub fn classic() -> Self {
        TicTacToe::new("tic_tac_toe", 3, 3, 3).expect("valid dimensions")
    }

    pub fn generalized() -> Self {
        TicTacToe::new("generalized_tic_tac_toe", 6, 6, 4).expect("valid dimensions")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn line_length(&self) -> usize {
        self.line
    }

    fn is_over(&self, s: &BoardState) -> bool {
        s.winner.is_some() || s.moves == self.rows * self.cols
    }

    pub fn parse_cell(&self, action: &str) -> Option<(usize, usize)> {
        let (r, c) = action.split_once(',')?;
        let r: usize = r.trim().parse().ok()?;
        let c: usize = c.trim().parse().ok()?;
        (r < self.rows && c < self.cols).then_some((r, c))
    }

    fn completes_line(&self, board: &[Vec<i8>], r: usize, c: usize) -> bool {
        let mark = board[r][c];
        let count = |dr: isize, dc: isize| {
            let mut n = 0;
            let (mut i, mut j) = (r as isize + dr, c as isize + dc);
            while i >= 0
                && j >= 0
                && (i as usize) < self.rows
                && (j as usize) < self.cols
                && board[i as usize][j as usize] == mark
            {
                n += 1;
                i += dr;
                j += dc;
            }
            n
        };
        [(0, 1), (1, 0), (1, 1), (1, -1)]
            .iter()
            .any(|&(dr, dc)| 1 + count(dr, dc) + count(-dr, -dc) >= self.line)
    }
}

impl Rules for TicTacToe {
    type State = BoardState;

    fn spec(&self) -> &GameSpec {
        &self.spec
    }

    fn initial(&self) -> BoardState {
        BoardState {
            board: vec![vec![EMPTY; self.cols]; self.rows],
            current_player: 0,
            winner: None,
            moves: 0,
        }
    }

    fn current_player(&self, s: &BoardState) -> PlayerId {
        if self.is_over(s) {
            TERMINAL_PLAYER
        } else {
            s.current_player as PlayerId
        }
    }

    fn legal_actions(&self, s: &BoardState) -> Vec<String> {
        if self.is_over(s) {
            return Vec::new();
        }
        let mut out = Vec::new();
        for (r, row) in s.board.iter().enumerate() {
            for (c, cell) in row.iter().enumerate() {
                if *cell == EMPTY {
                    out.push(format!("{r},{c}"));
                }
            }
        }
        out
    }

    fn apply(&self, s: &BoardState, action: &str) -> Result<BoardState, Fault> {
        if self.is_over(s) {
            return Err(Fault::new("ValueError", "game is over"));
        }
        let (r, c) = self
            .parse_cell(action)
            .ok_or_else(|| Fault::new("ValueError", format!("bad action {action:?}")))?;
        if s.board[r][c] != EMPTY {
            return Err(Fault::new("ValueError", format!("cell {action} is occupied")));
        }
        let mut next = s.clone();
        next.board[r][c] = s.current_player;
        next.moves += 1;
        if self.completes_line(&next.board, r, c) {
            next.winner = Some(s.current_player as u8);
        }
        next.current_player = 1 - s.current_player;
        Ok(next)
    }

    fn rewards(&self, s: &BoardState) -> Vec<f64> {
        match s.winner {
            Some(0) => vec![1.0, -1.0],
            Some(_) => vec![-1.0, 1.0],
            None => vec![0.0, 0.0],
        }
    }

    fn observation(&self, s: &BoardState, _player: usize) -> Value {
        json!({
            "board": s.board,
            "current_player": self.current_player(s),
        })
    }
}
