//! Maximum-a-posteriori Elo ratings under the BayesElo draw model.
//!
//! With `x = r_white − r_black + advantage` and `f(x) = 1/(1+10^(−x/400))`:
//! P(white wins) = f(x − drawElo), P(black wins) = f(−x − drawElo), draws
//! take the rest. The prior scores `prior_games` virtual games against the
//! anchor as half won, half lost. Ratings are fitted as offsets from the
//! anchor by cyclic one-dimensional Newton steps, so moving the anchor value
//! moves every rating by the same amount.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::tournament::{GameResult, GameResultSet};

const C: f64 = std::f64::consts::LN_10 / 400.0;
pub const GRADIENT_TOL: f64 = 1e-9;
pub const MAX_SWEEPS: usize = 100_000;
const BRACKET_LIMIT: f64 = 1e7;

fn f(x: f64) -> f64 {
    1.0 / (1.0 + (-C * x).exp())
}

/// `ln f(x)` without overflow.
fn ln_f(x: f64) -> f64 {
    let z = -C * x;
    if z > 0.0 {
        -(z + (-z).exp().ln_1p())
    } else {
        -z.exp().ln_1p()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EloParams {
    pub draw_elo: f64,
    pub advantage: f64,
    pub prior_games: f64,
}

impl Default for EloParams {
    fn default() -> Self {
        Self {
            draw_elo: 100.0,
            advantage: 0.0,
            prior_games: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub id: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EloEstimate {
    pub ids: Vec<String>,
    pub ratings: Vec<f64>,
    /// Offsets from the anchor; independent of the anchor value.
    pub offsets: Vec<f64>,
    pub plus: Vec<f64>,
    pub minus: Vec<f64>,
    pub games: Vec<usize>,
    pub score: Vec<f64>,
    pub draws: Vec<usize>,
    pub params: EloParams,
    pub anchor: Anchor,
    /// Log-posterior after each sweep, starting from all offsets zero.
    pub log_posterior: Vec<f64>,
}

impl EloEstimate {
    pub fn rating(&self, id: &str) -> Option<f64> {
        self.ids.iter().position(|x| x == id).map(|i| self.ratings[i])
    }

    /// `Rank,Model,Elo,+,-,Games,Score%,Draws%`, strongest first.
    pub fn to_table_csv(&self) -> String {
        let mut order: Vec<usize> = (0..self.ids.len()).collect();
        order.sort_by(|&a, &b| self.ratings[b].total_cmp(&self.ratings[a]).then(a.cmp(&b)));
        let mut wtr = csv::Writer::from_writer(Vec::new());
        wtr.write_record(["Rank", "Model", "Elo", "+", "-", "Games", "Score%", "Draws%"])
            .expect("in-memory write");
        for (rank, &i) in order.iter().enumerate() {
            let g = self.games[i].max(1) as f64;
            wtr.write_record([
                (rank + 1).to_string(),
                self.ids[i].clone(),
                format!("{:.1}", self.ratings[i]),
                format!("{:.1}", self.plus[i]),
                format!("{:.1}", self.minus[i]),
                self.games[i].to_string(),
                format!("{:.1}", 100.0 * self.score[i] / g),
                format!("{:.1}", 100.0 * self.draws[i] as f64 / g),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(wtr.into_inner().expect("flush")).expect("utf8")
    }
}

/// Win/draw/loss counts for one ordered (white, black) pairing.
#[derive(Debug, Clone, Copy, Default)]
struct PairCounts {
    white: usize,
    black: usize,
    wins: f64,
    draws: f64,
    losses: f64,
}

struct Model {
    pairs: Vec<PairCounts>,
    /// Pair indices touching each player.
    touching: Vec<Vec<usize>>,
    anchor: usize,
    params: EloParams,
}

impl Model {
    /// Log-likelihood of one pairing and its first two derivatives in `x`.
    fn pair_terms(&self, p: &PairCounts, x: f64) -> (f64, f64, f64) {
        let d = self.params.draw_elo;
        let (a, b) = (x - d, -x - d);
        let (fa, fb) = (f(a), f(b));
        let (fna, fnb) = (f(-a), f(-b));
        let mut v = p.wins * ln_f(a) + p.losses * ln_f(b);
        let mut g = C * (p.wins * fna - p.losses * fnb);
        let mut h = -C * C * (p.wins * fa * fna + p.losses * fb * fnb);
        if p.draws > 0.0 {
            // 1 − f(a) − f(b) = f(−a) − f(b)
            let q = fna - fb;
            let dq = C * (-fa * fna + fb * fnb);
            let ddq = -C * C * (fa * fna * (fna - fa) + fb * fnb * (fnb - fb));
            v += p.draws * q.ln();
            g += p.draws * dq / q;
            h += p.draws * (ddq * q - dq * dq) / (q * q);
        }
        (v, g, h)
    }

    fn prior_terms(&self, o: f64) -> (f64, f64, f64) {
        let w = 0.5 * self.params.prior_games;
        let (fo, fno) = (f(o), f(-o));
        (
            w * (ln_f(o) + ln_f(-o)),
            w * C * (fno - fo),
            -2.0 * w * C * C * fo * fno,
        )
    }

    fn x(&self, p: &PairCounts, o: &[f64]) -> f64 {
        o[p.white] - o[p.black] + self.params.advantage
    }

    fn log_posterior(&self, o: &[f64]) -> f64 {
        let like: f64 = self.pairs.iter().map(|p| self.pair_terms(p, self.x(p, o)).0).sum();
        let prior: f64 = (0..o.len())
            .filter(|&i| i != self.anchor)
            .map(|i| self.prior_terms(o[i]).0)
            .sum();
        like + prior
    }

    /// First and second derivative of the log-posterior along `o[i]`.
    fn coord_derivs(&self, o: &[f64], i: usize) -> (f64, f64) {
        let (mut g, mut h) = if i == self.anchor {
            (0.0, 0.0)
        } else {
            let (_, g, h) = self.prior_terms(o[i]);
            (g, h)
        };
        for &k in &self.touching[i] {
            let p = &self.pairs[k];
            let (_, pg, ph) = self.pair_terms(p, self.x(p, o));
            let sign = if p.white == i { 1.0 } else { -1.0 };
            g += sign * pg;
            h += ph;
        }
        (g, h)
    }

    /// Root of the coordinate gradient by Newton steps kept inside a
    /// sign-change bracket.
    fn maximize_coord(&self, o: &mut [f64], i: usize) -> Result<()> {
        let start = o[i];
        let grad_at = |o: &mut [f64], t: f64| {
            o[i] = t;
            self.coord_derivs(o, i)
        };
        let (g0, _) = grad_at(o, start);
        if g0 == 0.0 {
            o[i] = start;
            return Ok(());
        }
        let dir = g0.signum();
        let (mut lo, mut hi) = (start, start);
        let mut step = 100.0;
        loop {
            let t = start + dir * step;
            let (g, _) = grad_at(o, t);
            // An exact zero means the likelihood has flattened out, not a root.
            if g != 0.0 && g.signum() != dir {
                if dir > 0.0 { hi = t } else { lo = t }
                break;
            }
            if dir > 0.0 { lo = t } else { hi = t }
            step *= 2.0;
            if step > BRACKET_LIMIT {
                return Err(Error::Numeric(format!(
                    "rating {i} diverges; results need a prior or games with mixed outcomes"
                )));
            }
        }
        let mut t = start;
        for _ in 0..200 {
            let (g, h) = grad_at(o, t);
            if g.abs() <= 1e-13 {
                break;
            }
            if g > 0.0 { lo = t } else { hi = t }
            let newton = t - g / h;
            t = if h < 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            if hi - lo <= 1e-12 * (1.0 + t.abs()) {
                break;
            }
        }
        o[i] = t;
        Ok(())
    }
}

pub fn fit_elo(r: &GameResultSet, params: EloParams, anchor: &Anchor) -> Result<EloEstimate> {
    let n = r.participants.len();
    let index = |id: &str| -> Result<usize> {
        r.participants
            .iter()
            .position(|p| p == id)
            .ok_or_else(|| Error::Input(format!("unknown participant {id:?}")))
    };
    let anchor_idx = index(&anchor.id)?;
    if !(params.prior_games >= 0.0) || !params.draw_elo.is_finite() || !params.advantage.is_finite() {
        return Err(Error::Argument("prior_games must be ≥ 0 and parameters finite".into()));
    }

    let mut games = vec![0usize; n];
    let mut score = vec![0.0; n];
    let mut draws = vec![0usize; n];
    let mut pairs: Vec<PairCounts> = Vec::new();
    for g in &r.games {
        let (w, b) = (index(&g.white)?, index(&g.black)?);
        if w == b {
            return Err(Error::Input(format!("{} plays itself", g.white)));
        }
        games[w] += 1;
        games[b] += 1;
        score[w] += g.result.white_score();
        score[b] += 1.0 - g.result.white_score();
        let k = match pairs.iter().position(|p| p.white == w && p.black == b) {
            Some(k) => k,
            None => {
                pairs.push(PairCounts { white: w, black: b, ..Default::default() });
                pairs.len() - 1
            }
        };
        match g.result {
            GameResult::WhiteWin => pairs[k].wins += 1.0,
            GameResult::BlackWin => pairs[k].losses += 1.0,
            GameResult::Draw => {
                pairs[k].draws += 1.0;
                draws[w] += 1;
                draws[b] += 1;
            }
        }
    }
    if let Some(i) = games.iter().position(|&g| g == 0) {
        return Err(Error::Input(format!("{} has no games", r.participants[i])));
    }
    if params.draw_elo <= 0.0 && draws.iter().any(|&d| d > 0) {
        return Err(Error::Argument("draws are impossible with drawElo ≤ 0".into()));
    }

    let mut touching = vec![Vec::new(); n];
    for (k, p) in pairs.iter().enumerate() {
        touching[p.white].push(k);
        touching[p.black].push(k);
    }
    let model = Model { pairs, touching, anchor: anchor_idx, params };

    let mut o = vec![0.0; n];
    let mut trace = vec![model.log_posterior(&o)];
    let free: Vec<usize> = (0..n).filter(|&i| i != anchor_idx).collect();
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let grad = free.iter().map(|&i| model.coord_derivs(&o, i).0.abs()).fold(0.0, f64::max);
        if grad <= GRADIENT_TOL {
            converged = true;
            break;
        }
        for &i in &free {
            model.maximize_coord(&mut o, i)?;
        }
        trace.push(model.log_posterior(&o));
    }
    if !converged {
        return Err(Error::Numeric(format!("Elo fit did not converge in {MAX_SWEEPS} sweeps")));
    }

    let half_width: Vec<f64> = (0..n)
        .map(|i| {
            if i == anchor_idx {
                0.0
            } else {
                1.96 / (-model.coord_derivs(&o, i).1).sqrt()
            }
        })
        .collect();
    Ok(EloEstimate {
        ids: r.participants.clone(),
        ratings: o.iter().map(|x| anchor.value + x).collect(),
        offsets: o,
        plus: half_width.clone(),
        minus: half_width,
        games,
        score,
        draws,
        params,
        anchor: anchor.clone(),
        log_posterior: trace,
    })
}
