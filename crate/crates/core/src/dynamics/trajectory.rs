//! Density trajectory dumps.
//!
//! Text format, one token group per line:
//!
//! ```text
//! slgate-trajectory 1
//! grid <x_min> <x_max> <n_points>
//! units <length_m> <time_s>
//! states <m>
//! frame <t>
//! <n densities of state 0>
//! ...
//! <n densities of state m-1>
//! frame <t>
//! ...
//! ```
//!
//! Positions and times are in the stated units; densities are |psi|^2 in
//! inverse length units.

use std::io::{BufRead, Write};

use super::{Grid, Wavefunction};
use crate::{Error, Result};

pub const TRAJECTORY_VERSION: u32 = 1;

pub struct TrajectoryWriter<W: Write> {
    out: W,
    grid: Grid,
    states: usize,
}

impl<W: Write> TrajectoryWriter<W> {
    pub fn new(mut out: W, grid: Grid, states: usize, length_unit: f64, time_unit: f64) -> Result<Self> {
        writeln!(out, "slgate-trajectory {TRAJECTORY_VERSION}")?;
        writeln!(out, "grid {:.17e} {:.17e} {}", grid.x_min, grid.x_max, grid.n_points)?;
        writeln!(out, "units {length_unit:.17e} {time_unit:.17e}")?;
        writeln!(out, "states {states}")?;
        Ok(TrajectoryWriter { out, grid, states })
    }

    pub fn frame(&mut self, t: f64, states: &[Wavefunction]) -> Result<()> {
        if states.len() != self.states || states.iter().any(|s| !s.grid.same_as(&self.grid)) {
            return Err(Error::GridMismatch);
        }
        writeln!(self.out, "frame {t:.17e}")?;
        for s in states {
            let line: Vec<String> = s.amplitudes.iter().map(|a| format!("{:.9e}", a.norm_sqr())).collect();
            writeln!(self.out, "{}", line.join(" "))?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: Grid,
    pub length_unit: f64,
    pub time_unit: f64,
    pub times: Vec<f64>,
    /// `densities[frame][state][point]`
    pub densities: Vec<Vec<Vec<f64>>>,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Parse(msg.into())
}

pub fn read_trajectory<R: BufRead>(input: R) -> Result<Trajectory> {
    let mut lines = input.lines();
    let mut next = || -> Result<String> {
        lines
            .next()
            .ok_or_else(|| bad("unexpected end of trajectory"))?
            .map_err(Error::from)
    };
    let header = next()?;
    let version: u32 = header
        .strip_prefix("slgate-trajectory ")
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| bad("missing trajectory header"))?;
    if version != TRAJECTORY_VERSION {
        return Err(bad(format!("unsupported trajectory version {version}")));
    }
    let num = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("bad number '{s}'")));
    let g = next()?;
    let f: Vec<&str> = g.split_whitespace().collect();
    if f.len() != 4 || f[0] != "grid" {
        return Err(bad("missing grid line"));
    }
    let n: usize = f[3].parse().map_err(|_| bad("bad grid size"))?;
    let grid = Grid::new(num(f[1])?, num(f[2])?, n)?;
    let u = next()?;
    let f: Vec<&str> = u.split_whitespace().collect();
    if f.len() != 3 || f[0] != "units" {
        return Err(bad("missing units line"));
    }
    let (length_unit, time_unit) = (num(f[1])?, num(f[2])?);
    let s = next()?;
    let m: usize = s
        .strip_prefix("states ")
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| bad("missing states line"))?;
    let mut times = Vec::new();
    let mut densities = Vec::new();
    while let Ok(line) = next() {
        if line.trim().is_empty() {
            continue;
        }
        let t = line
            .strip_prefix("frame ")
            .ok_or_else(|| bad(format!("expected frame line, got '{line}'")))?;
        times.push(num(t.trim())?);
        let mut frame = Vec::with_capacity(m);
        for _ in 0..m {
            let row: Result<Vec<f64>> = next()?.split_whitespace().map(num).collect();
            let row = row?;
            if row.len() != n {
                return Err(bad(format!("frame row has {} values, expected {n}", row.len())));
            }
            frame.push(row);
        }
        densities.push(frame);
    }
    Ok(Trajectory {
        grid,
        length_unit,
        time_unit,
        times,
        densities,
    })
}
