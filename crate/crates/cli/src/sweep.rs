//! Grid runner: evaluates the bounds, the closed-form protocol analysis and
//! (optionally) the Monte Carlo simulator at every grid point and writes one
//! CSV row per point.
//!
//! Rows are emitted in a fixed nesting order (m, b, rho, lambda, mu, l, db).
//! Grid points are dispatched in parallel but collected and written in grid
//! order, and each point draws its Monte Carlo seed from a deterministic
//! per-row stream, so the artifact is byte-identical across runs and
//! schedules.

use crate::config::{Mode, SweepConfig};
use anyhow::Context;
use fbmac::bounds::{self, BoundReport};
use fbmac::protocol::{self, EnergyBudget};
use fbmac::sim::{ProtocolSim, Z99};
use fbmac::source::{QuantizerSpec, SourceConfig, SourceFamily};
use fbmac::Error as CoreError;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::io::Write;
use std::path::PathBuf;

/// CSV schema, in column order.
pub const CSV_COLUMNS: &[&str] = &[
    "m",
    "b",
    "rho",
    "lambda",
    "mu",
    "l",
    "ebn0_db",
    "e_d1",
    "e_c1",
    "e_d2",
    "lower_bound_u",
    "lower_bound_clipped",
    "regime_index",
    "mmse_floor",
    "upper_bound_total",
    "d_q",
    "one_shot_bound",
    "avg_energy_exact",
    "avg_energy_bound",
    "empirical_mse",
    "mse_ci_low",
    "mse_ci_high",
    "empirical_energy",
    "round2_rate",
    "flag",
];

/// Closed-form protocol columns (analysis and simulate modes).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisColumns {
    pub upper_bound_total: f64,
    pub d_q: f64,
    pub one_shot_bound: f64,
    pub avg_energy_exact: f64,
    pub avg_energy_bound: f64,
}

/// Monte Carlo columns (simulate mode), at 99% confidence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalColumns {
    pub mse: f64,
    pub mse_ci_low: f64,
    pub mse_ci_high: f64,
    pub energy: f64,
    pub round2_rate: f64,
}

/// One grid point's results.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub sensors: usize,
    pub bits: u32,
    pub rho: f64,
    pub lambda: f64,
    pub mu: f64,
    pub l: usize,
    pub db: f64,
    pub e_d1: f64,
    pub e_c1: f64,
    pub e_d2: f64,
    /// Wideband lower bound, evaluated at the protocol's per-sensor energy
    /// ceiling `(e_d1 + e_c1 + e_d2) / m` so it bounds anything the protocol
    /// can spend.
    pub lower_bound: BoundReport,
    pub mmse_floor: f64,
    pub analysis: Option<AnalysisColumns>,
    pub empirical: Option<EmpiricalColumns>,
    /// Empty on clean rows; `infeasible` when the detector cap blocked the
    /// simulation (analytic columns are still filled).
    pub flag: String,
}

/// Sweep result: all rows in grid order.
#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    /// Count of rows whose simulation was skipped as infeasible.
    pub infeasible: usize,
    pub csv_path: PathBuf,
}

struct GridPoint {
    sensors: usize,
    bits: u32,
    rho: f64,
    lambda: f64,
    mu: f64,
    l: usize,
    db: f64,
    seed: u64,
}

fn grid_points(cfg: &SweepConfig) -> Vec<GridPoint> {
    let mut seeder = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut points = Vec::with_capacity(cfg.grid_size());
    for &sensors in &cfg.sensors {
        for &bits in &cfg.bits {
            for &rho in &cfg.rho {
                for &lambda in &cfg.lambda {
                    for &mu in &cfg.mu {
                        for &l in &cfg.l {
                            for &db in &cfg.db {
                                points.push(GridPoint {
                                    sensors,
                                    bits,
                                    rho,
                                    lambda,
                                    mu,
                                    l,
                                    db,
                                    seed: seeder.next_u64(),
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    points
}

fn compute_row(p: &GridPoint, cfg: &SweepConfig) -> anyhow::Result<SweepRow> {
    let e_d1 = 10f64.powf(p.db / 10.0);
    let bud = EnergyBudget::from_relations(e_d1, p.lambda, p.mu, 1.0, p.l)?;
    let source = SourceConfig::new(p.sensors, p.rho, SourceFamily::Uniform)?;
    let per_sensor_ceiling = bud.total() / p.sensors as f64;
    let lower_bound = bounds::lower_bound_u_asymptotic(&source, per_sensor_ceiling)?;
    let mmse_floor = bounds::mmse_observation(p.sensors, p.rho);

    let mut row = SweepRow {
        sensors: p.sensors,
        bits: p.bits,
        rho: p.rho,
        lambda: p.lambda,
        mu: p.mu,
        l: p.l,
        db: p.db,
        e_d1: bud.e_d1,
        e_c1: bud.e_c1,
        e_d2: bud.e_d2,
        lower_bound,
        mmse_floor,
        analysis: None,
        empirical: None,
        flag: String::new(),
    };
    if cfg.mode == Mode::Bounds {
        return Ok(row);
    }

    let upper = protocol::upper_bound_distortion(p.bits, p.rho, p.sensors, &bud)?;
    let energy = protocol::average_energy(p.bits, p.rho, p.sensors, &bud)?;
    let one_shot = protocol::one_shot_baseline(p.bits, p.rho, p.sensors, e_d1, 1.0)?;
    row.analysis = Some(AnalysisColumns {
        upper_bound_total: upper.total,
        d_q: upper.terms.d_q,
        one_shot_bound: one_shot,
        avg_energy_exact: energy.exact,
        avg_energy_bound: energy.bound,
    });
    if cfg.mode == Mode::Analysis {
        return Ok(row);
    }

    let quantizer = QuantizerSpec::build(p.bits, p.rho)?;
    match ProtocolSim::new(source, quantizer, bud, cfg.detect_cap) {
        Ok(sim) => {
            let mc = sim.monte_carlo(cfg.trials, p.seed)?;
            let (lo, hi) = mc.mse_ci(Z99);
            row.empirical = Some(EmpiricalColumns {
                mse: mc.mean_mse,
                mse_ci_low: lo,
                mse_ci_high: hi,
                energy: mc.mean_energy,
                round2_rate: mc.round2_rate,
            });
        }
        Err(CoreError::InfeasibleConfig(_)) => {
            row.flag = "infeasible".into();
        }
        Err(e) => return Err(e.into()),
    }
    Ok(row)
}

/// Evaluates every grid point. Rows come back in grid order.
pub fn compute_rows(cfg: &SweepConfig) -> anyhow::Result<Vec<SweepRow>> {
    cfg.validate()?;
    let points = grid_points(cfg);
    points
        .par_iter()
        .map(|p| compute_row(p, cfg))
        .collect::<anyhow::Result<Vec<_>>>()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Serializes rows in the fixed schema.
pub fn write_csv<W: Write>(rows: &[SweepRow], out: W) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for r in rows {
        let a = r.analysis.as_ref();
        let e = r.empirical.as_ref();
        w.write_record([
            r.sensors.to_string(),
            r.bits.to_string(),
            r.rho.to_string(),
            r.lambda.to_string(),
            r.mu.to_string(),
            r.l.to_string(),
            r.db.to_string(),
            r.e_d1.to_string(),
            r.e_c1.to_string(),
            r.e_d2.to_string(),
            r.lower_bound.value.to_string(),
            r.lower_bound.clipped().to_string(),
            r.lower_bound.regime_index.to_string(),
            r.mmse_floor.to_string(),
            fmt_opt(a.map(|a| a.upper_bound_total)),
            fmt_opt(a.map(|a| a.d_q)),
            fmt_opt(a.map(|a| a.one_shot_bound)),
            fmt_opt(a.map(|a| a.avg_energy_exact)),
            fmt_opt(a.map(|a| a.avg_energy_bound)),
            fmt_opt(e.map(|e| e.mse)),
            fmt_opt(e.map(|e| e.mse_ci_low)),
            fmt_opt(e.map(|e| e.mse_ci_high)),
            fmt_opt(e.map(|e| e.energy)),
            fmt_opt(e.map(|e| e.round2_rate)),
            r.flag.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Runs the sweep and writes the CSV artifact to `cfg.out`.
pub fn run_sweep(cfg: &SweepConfig) -> anyhow::Result<SweepOutcome> {
    let rows = compute_rows(cfg)?;
    let file = std::fs::File::create(&cfg.out)
        .with_context(|| format!("cannot create {}", cfg.out.display()))?;
    write_csv(&rows, std::io::BufWriter::new(file))?;
    let infeasible = rows.iter().filter(|r| r.flag == "infeasible").count();
    Ok(SweepOutcome {
        rows,
        infeasible,
        csv_path: cfg.out.clone(),
    })
}
