use std::path::Path;

use postln_lens::arena::{
    self, fit_elo, generate_puzzles, positions_from_jsonl, positions_to_jsonl, prepare_state,
    puzzles_from_jsonl, puzzles_to_jsonl, random_positions, round_robin, Anchor, EloParams,
    GameResultSet, LensPlayer, PuzzleGenConfig, TournamentConfig,
};
use postln_lens::decomp::verify_identity;
use postln_lens::lens::{lens_sweep, report_from_jsonl, report_to_jsonl, stage_label, PreparedPosition};
use postln_lens::metrics::{compute_metrics, mlp_norm_series, solve_dynamics};
use postln_lens::model::{io, LensMode, ModelConfig, WeightSet};
use postln_lens::{Error, Result};

use crate::args::*;
use crate::chart::{render, BandRow};
use crate::output::Run;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    VerificationFailed,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))
}

fn load_weights(run: &mut Run, path: &Path) -> Result<WeightSet> {
    run.input(path);
    io::from_json_str(&read(path)?)
}

fn load_positions(run: &mut Run, w: &WeightSet, path: &Path) -> Result<Vec<PreparedPosition>> {
    run.input(path);
    let states = positions_from_jsonl(&read(path)?)?;
    let pe = arena::posenc();
    states.iter().map(|s| prepare_state(w, s, &pe)).collect()
}

/// `all`, or a comma-separated list of stages in `-1..N`.
pub fn parse_stages(spec: &str, layers: usize) -> Result<Vec<i32>> {
    if spec.trim() == "all" {
        return Ok((-1..layers as i32).collect());
    }
    spec.split(',')
        .map(|t| {
            let k: i32 = t
                .trim()
                .parse()
                .map_err(|_| Error::Argument(format!("bad stage {t:?}")))?;
            if k < -1 || k >= layers as i32 {
                return Err(Error::Argument(format!("stage {k} outside -1..{}", layers as i32 - 1)));
            }
            Ok(k)
        })
        .collect()
}

pub fn run(cli: Cli) -> Result<Status> {
    match cli.command {
        Command::Model(ModelCmd::Init { config, seed, out }) => model_init(config.as_deref(), seed, &out.out),
        Command::Positions(PositionsCmd::Gen { count, seed, min_ply, max_ply, out }) => {
            let mut run = Run::new("positions gen", &out.out)?;
            run.seed(seed);
            run.param("count", count);
            run.param("min_ply", min_ply);
            run.param("max_ply", max_ply);
            let states = random_positions(count, seed, min_ply, max_ply)?;
            run.write("positions.jsonl", &positions_to_jsonl(&states))?;
            run.finish()?;
            Ok(Status::Ok)
        }
        Command::Lens(LensCmd::Sweep { weights, positions, mode, out }) => {
            let mut run = Run::new("lens sweep", &out.out)?;
            let mode = LensMode::from(mode);
            run.param("mode", mode);
            let w = load_weights(&mut run, &weights)?;
            let pos = load_positions(&mut run, &w, &positions)?;
            let report = lens_sweep(&w, &pos, mode)?;
            run.write("lens_report.jsonl", &report_to_jsonl(&report))?;
            run.finish()?;
            Ok(Status::Ok)
        }
        Command::Decomp(DecompCmd::Verify { weights, positions, tol, mode, out }) => {
            decomp_verify(&weights, &positions, tol, mode.into(), &out.out)
        }
        Command::Metrics(MetricsCmd::Compute { report, top_k, out }) => {
            let mut run = Run::new("metrics compute", &out.out)?;
            run.input(&report);
            run.param("top_k", top_k);
            let r = report_from_jsonl(&read(&report)?)?;
            run.param("mode", r.mode);
            for s in compute_metrics(&r, top_k)? {
                run.write(&format!("{}.csv", s.name), &s.to_csv())?;
            }
            run.finish()?;
            Ok(Status::Ok)
        }
        Command::Metrics(MetricsCmd::MlpNorm { weights, positions, out }) => {
            let mut run = Run::new("metrics mlp-norm", &out.out)?;
            let w = load_weights(&mut run, &weights)?;
            let pos = load_positions(&mut run, &w, &positions)?;
            let s = mlp_norm_series(&w, &pos)?;
            run.write("mlp_norm.csv", &s.to_csv().replacen("stage,", "layer,", 1))?;
            run.finish()?;
            Ok(Status::Ok)
        }
        Command::Puzzles(PuzzlesCmd::Gen { count, seed, depth, out }) => {
            let mut run = Run::new("puzzles gen", &out.out)?;
            run.seed(seed);
            run.param("count", count);
            run.param("depth", depth);
            let cfg = PuzzleGenConfig { count, seed, min_depth: depth, max_depth: depth, ..Default::default() };
            run.write("puzzles.jsonl", &puzzles_to_jsonl(&generate_puzzles(&cfg)?))?;
            run.finish()?;
            Ok(Status::Ok)
        }
        Command::Puzzles(PuzzlesCmd::Eval { weights, puzzles, stages, mode, out }) => {
            let mut run = Run::new("puzzles eval", &out.out)?;
            let mode = LensMode::from(mode);
            run.param("mode", mode);
            let w = load_weights(&mut run, &weights)?;
            run.input(&puzzles);
            let ps = puzzles_from_jsonl(&read(&puzzles)?)?;
            if ps.is_empty() {
                return Err(Error::Input("no puzzles".into()));
            }
            let stages = parse_stages(&stages, w.n_layers())?;
            run.param("stages", &stages);
            let m = arena::eval_puzzles(&LensPlayer::new(&w, mode), &ps, &stages)?;
            let mut csv = String::from("puzzle");
            for &s in &stages {
                csv.push(',');
                csv.push_str(&stage_label(s, w.n_layers()));
            }
            csv.push('\n');
            for (i, row) in m.solved.iter().enumerate() {
                csv.push_str(&i.to_string());
                for &b in row {
                    csv.push_str(if b { ",1" } else { ",0" });
                }
                csv.push('\n');
            }
            run.write("solve_matrix.csv", &csv)?;
            run.write("solve_dynamics.csv", &solve_dynamics(&m)?.to_csv())?;
            run.finish()?;
            Ok(Status::Ok)
        }
        Command::Tournament(a) => {
            let mut run = Run::new("tournament", &a.out.out)?;
            let mode = LensMode::from(a.mode);
            run.seed(a.seed);
            run.param("mode", mode);
            run.param("games", a.games);
            run.param("opening_plies", a.opening_plies);
            run.param("temperature", a.temperature);
            let w = load_weights(&mut run, &a.weights)?;
            let stages = parse_stages(&a.stages, w.n_layers())?;
            run.param("stages", &stages);
            let cfg = TournamentConfig {
                games_per_pair: a.games,
                opening_plies: a.opening_plies,
                temperature: a.temperature,
                seed: a.seed,
            };
            let results = round_robin(&LensPlayer::new(&w, mode), &stages, w.n_layers(), &cfg)?;
            run.write("results.csv", &results.to_csv())?;
            run.finish()?;
            Ok(Status::Ok)
        }
        Command::Elo(a) => {
            let mut run = Run::new("elo", &a.out.out)?;
            run.input(&a.results);
            let results = GameResultSet::from_csv(&read(&a.results)?)?;
            let anchor = Anchor {
                id: match a.anchor {
                    Some(id) => id,
                    None => results
                        .participants
                        .first()
                        .cloned()
                        .ok_or_else(|| Error::Input("results file has no games".into()))?,
                },
                value: a.anchor_value,
            };
            let params = EloParams { draw_elo: a.draw_elo, advantage: a.advantage, prior_games: a.prior_games };
            run.param("anchor", &anchor);
            run.param("elo_params", params);
            let est = fit_elo(&results, params, &anchor)?;
            run.write("ratings.csv", &est.to_table_csv())?;
            run.write("elo.json", &serde_json::to_string_pretty(&est).expect("serializable"))?;
            run.finish()?;
            Ok(Status::Ok)
        }
        Command::Chart(a) => chart(&a.metrics, &a.out.out),
    }
}

fn model_init(config: Option<&Path>, seed: Option<u64>, out: &Path) -> Result<Status> {
    let mut run = Run::new("model init", out)?;
    let mut cfg = match config {
        Some(p) => {
            run.config(p);
            serde_json::from_str::<ModelConfig>(&read(p)?)
                .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
        }
        None => ModelConfig::toy(0),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    run.seed(cfg.seed);
    run.param("model_config", &cfg);
    let w = WeightSet::init(&cfg)?;
    run.write("weights.json", &io::to_json_string(&w))?;
    run.finish()?;
    Ok(Status::Ok)
}

fn decomp_verify(weights: &Path, positions: &Path, tol: f64, mode: LensMode, out: &Path) -> Result<Status> {
    let mut run = Run::new("decomp verify", out)?;
    run.param("tol", tol);
    run.param("mode", mode);
    let w = load_weights(&mut run, weights)?;
    let pos = load_positions(&mut run, &w, positions)?;
    if pos.is_empty() {
        return Err(Error::Input("no positions to verify".into()));
    }
    let mut csv = String::from("position_id,stage,max_abs_err,max_rel_err,norm_i,norm_z_mha,norm_z_ffn,norm_b,norm_m\n");
    let mut offending = Vec::new();
    for (id, p) in pos.iter().enumerate() {
        for stage in -1..w.n_layers() as i32 {
            let r = verify_identity(&w, &p.h0, stage, mode)
                .map_err(|e| Error::Position { index: id, source: Box::new(e) })?;
            let n = &r.norms;
            let row = format!(
                "{id},{stage},{:e},{:e},{},{},{},{},{}",
                r.max_abs_err, r.max_rel_err, n.i, n.z_mha, n.z_ffn, n.b, n.m
            );
            if !(r.max_rel_err <= tol) {
                offending.push(row.clone());
            }
            csv.push_str(&row);
            csv.push('\n');
        }
    }
    run.param("violations", offending.len());
    run.write("decomp.csv", &csv)?;
    run.finish()?;
    if offending.is_empty() {
        Ok(Status::Ok)
    } else {
        eprintln!("{} rows exceed max_rel_err tolerance {tol:e}:", offending.len());
        for r in &offending {
            eprintln!("  {r}");
        }
        Ok(Status::VerificationFailed)
    }
}

/// Reads a band CSV as written by [`MetricSeries::to_csv`].
pub fn read_band_csv(text: &str) -> Result<Vec<BandRow>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| Error::Format(e.to_string()))?.clone();
    if header.len() != 7 || header.iter().skip(1).take(5).ne(["p5", "p25", "p50", "p75", "p95"]) {
        return Err(Error::Format("not a percentile band file".into()));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Format(e.to_string()))?;
        let num = |i: usize| -> Result<Option<f64>> {
            if rec[i].is_empty() {
                Ok(None)
            } else {
                rec[i].parse().map(Some).map_err(|_| Error::Format(format!("bad number {:?}", &rec[i])))
            }
        };
        let stage: i32 = rec[0].parse().map_err(|_| Error::Format(format!("bad stage {:?}", &rec[0])))?;
        let vals = [num(1)?, num(2)?, num(3)?, num(4)?, num(5)?];
        let band = if vals.iter().all(Option::is_some) { Some(vals.map(|v| v.unwrap())) } else { None };
        rows.push(BandRow { stage, band });
    }
    Ok(rows)
}

fn chart(metrics_dir: &Path, out: &Path) -> Result<Status> {
    let mut run = Run::new("chart", out)?;
    let mut files: Vec<_> = std::fs::read_dir(metrics_dir)
        .map_err(|e| Error::Input(format!("cannot read {}: {e}", metrics_dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    let mut drawn = 0;
    for path in files {
        let rows = match read_band_csv(&read(&path)?) {
            Ok(rows) => rows,
            Err(_) => continue,
        };
        run.input(&path);
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("metric").to_string();
        let layers = rows.iter().map(|r| r.stage + 1).max().unwrap_or(0).max(0) as usize;
        run.write(&format!("{name}.svg"), &render(&name, &rows, layers))?;
        drawn += 1;
    }
    if drawn == 0 {
        return Err(Error::Input(format!("no metric CSVs in {}", metrics_dir.display())));
    }
    run.finish()?;
    Ok(Status::Ok)
}

