use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which lens stages solved which puzzles; rows are puzzles, columns are
/// stages `-1..N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveMatrix {
    pub stages: Vec<i32>,
    pub solved: Vec<Vec<bool>>,
}

impl SolveMatrix {
    pub fn new(stages: Vec<i32>, solved: Vec<Vec<bool>>) -> Result<Self> {
        if let Some(bad) = solved.iter().position(|r| r.len() != stages.len()) {
            return Err(Error::Argument(format!(
                "row {bad} has {} entries for {} stages",
                solved[bad].len(),
                stages.len()
            )));
        }
        Ok(Self { stages, solved })
    }

    pub fn puzzles(&self) -> usize {
        self.solved.len()
    }

    pub fn column(&self, k: usize) -> Vec<bool> {
        self.solved.iter().map(|r| r[k]).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveDynamics {
    pub stages: Vec<i32>,
    pub current: Vec<f64>,
    pub cumulative: Vec<f64>,
    pub converged: Vec<f64>,
    pub first: Vec<f64>,
}

impl SolveDynamics {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("stage,current,cumulative,converged,first\n");
        for (i, s) in self.stages.iter().enumerate() {
            out.push_str(&format!(
                "{s},{},{},{},{}\n",
                self.current[i], self.cumulative[i], self.converged[i], self.first[i]
            ));
        }
        out
    }
}

/// Per-stage rates computed in one prefix/suffix scan per puzzle.
pub fn solve_dynamics(m: &SolveMatrix) -> Result<SolveDynamics> {
    let n = m.puzzles();
    if n == 0 || m.stages.is_empty() {
        return Err(Error::Input("empty solve matrix".into()));
    }
    let s = m.stages.len();
    let mut counts = vec![[0usize; 4]; s];
    for row in &m.solved {
        let mut seen = false;
        for (k, &hit) in row.iter().enumerate() {
            if hit {
                counts[k][0] += 1;
                if !seen {
                    counts[k][3] += 1;
                }
            }
            seen |= hit;
            if seen {
                counts[k][1] += 1;
            }
        }
        let mut stable = true;
        for (k, &hit) in row.iter().enumerate().rev() {
            stable &= hit;
            if stable {
                counts[k][2] += 1;
            }
        }
    }
    let rate = |j: usize| counts.iter().map(|c| c[j] as f64 / n as f64).collect();
    Ok(SolveDynamics {
        stages: m.stages.clone(),
        current: rate(0),
        cumulative: rate(1),
        converged: rate(2),
        first: rate(3),
    })
}
