//! Plain-text serialization for goal patterns, states, and action logs.
//!
//! Patterns and states share one format: a header line `rows cols types`
//! followed by `rows` lines of space-separated integers. Action logs are CSV
//! with the header `step,from_row,from_col,to_row,to_col,reward`.

use super::types::{Dims, GoalPattern, RackState, Slot};
use super::RackError;

pub fn write_pattern(goal: &GoalPattern) -> String {
    write_grid(goal.dims(), goal.tube_types(), goal.grid())
}

pub fn write_state(state: &RackState, tube_types: u8) -> String {
    write_grid(state.dims(), tube_types, state.grid())
}

fn write_grid(dims: Dims, types: u8, grid: &[u8]) -> String {
    let mut out = format!("{} {} {}\n", dims.rows, dims.cols, types);
    for r in 0..dims.rows {
        let row: Vec<String> = (0..dims.cols)
            .map(|c| grid[r * dims.cols + c].to_string())
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn parse_pattern(text: &str) -> Result<GoalPattern, RackError> {
    let (dims, types, grid) = parse_grid(text)?;
    GoalPattern::new(dims, types, grid)
}

/// Parse a state block; returns the state and the declared tube type count.
pub fn parse_state(text: &str) -> Result<(RackState, u8), RackError> {
    let (dims, types, grid) = parse_grid(text)?;
    for &v in &grid {
        if v > types {
            return Err(RackError::EntryOutOfRange { value: v, types });
        }
    }
    Ok((RackState::from_grid(dims, grid), types))
}

fn parse_grid(text: &str) -> Result<(Dims, u8, Vec<u8>), RackError> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (lno, header) = lines.next().ok_or(RackError::Parse {
        line: 1,
        msg: "empty input".into(),
    })?;
    let head: Vec<usize> = header
        .split_whitespace()
        .map(|t| {
            t.parse::<usize>().map_err(|_| RackError::Parse {
                line: lno + 1,
                msg: format!("bad header token {t:?}"),
            })
        })
        .collect::<Result<_, _>>()?;
    if head.len() != 3 {
        return Err(RackError::Parse {
            line: lno + 1,
            msg: "header must be `rows cols types`".into(),
        });
    }
    let dims = Dims::new(head[0], head[1]);
    let types = head[2] as u8;
    let mut grid = Vec::with_capacity(dims.slots());
    for _ in 0..dims.rows {
        let (lno, row) = lines.next().ok_or(RackError::Parse {
            line: 0,
            msg: format!("expected {} grid rows", dims.rows),
        })?;
        let vals: Vec<u8> = row
            .split_whitespace()
            .map(|t| {
                t.parse::<u8>().map_err(|_| RackError::Parse {
                    line: lno + 1,
                    msg: format!("bad grid token {t:?}"),
                })
            })
            .collect::<Result<_, _>>()?;
        if vals.len() != dims.cols {
            return Err(RackError::Parse {
                line: lno + 1,
                msg: format!("expected {} columns, got {}", dims.cols, vals.len()),
            });
        }
        grid.extend(vals);
    }
    Ok((dims, types, grid))
}

/// One executed or planned swap in an action log.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionLogRow {
    pub step: usize,
    pub from: Slot,
    pub to: Slot,
    pub reward: f64,
}

pub const ACTION_LOG_HEADER: &str = "step,from_row,from_col,to_row,to_col,reward";

pub fn write_action_log(rows: &[ActionLogRow]) -> String {
    let mut out = String::from(ACTION_LOG_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.step, r.from.row, r.from.col, r.to.row, r.to.col, r.reward
        ));
    }
    out
}

pub fn parse_action_log(text: &str) -> Result<Vec<ActionLogRow>, RackError> {
    let mut rows = Vec::new();
    for (lno, line) in text.lines().enumerate() {
        if lno == 0 {
            if line.trim() != ACTION_LOG_HEADER {
                return Err(RackError::Parse {
                    line: 1,
                    msg: format!("unexpected action log header {line:?}"),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 6 {
            return Err(RackError::Parse {
                line: lno + 1,
                msg: "expected 6 comma-separated fields".into(),
            });
        }
        let mut nums = parts.iter();
        let mut next_usize = |what: &str| -> Result<usize, RackError> {
            nums.next().unwrap().trim().parse().map_err(|_| {
                RackError::Parse {
                    line: lno + 1,
                    msg: format!("bad {what}"),
                }
            })
        };
        let step = next_usize("step")?;
        let fr = next_usize("from_row")?;
        let fc = next_usize("from_col")?;
        let tr = next_usize("to_row")?;
        let tc = next_usize("to_col")?;
        let reward: f64 = parts[5].trim().parse().map_err(|_| RackError::Parse {
            line: lno + 1,
            msg: "bad reward".into(),
        })?;
        rows.push(ActionLogRow {
            step,
            from: Slot::new(fr, fc),
            to: Slot::new(tr, tc),
            reward,
        });
    }
    Ok(rows)
}
