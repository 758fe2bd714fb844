//! Scenario execution and output files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, anyhow};
use granular_core::collision::QuadratureConfig;
use granular_core::dsmc::{DsmcError, Ensemble, TrajectoryRecord, init_ensemble, run};
use granular_core::moments::{
    CoolingVerdict, MomentOdeSystem, MomentVector, classify_cooling, half_integer_grid, haff_fit, integrate_moment_bounds,
    moments,
};
use granular_core::orlicz::{DensityGrid, GronwallSnapshot, assemble_c_k, build_young_from_density, gronwall_envelope};
use serde::Serialize;

use crate::Failure;
use crate::config::ExperimentConfig;

pub const SUMMARY_SCHEMA: &str = "granular-run-summary/1";

#[derive(Debug, Clone, Serialize)]
pub struct VerdictJson {
    pub verdict: &'static str,
    pub rationale: &'static str,
    pub bound: Option<f64>,
}

impl From<&CoolingVerdict<f64>> for VerdictJson {
    fn from(v: &CoolingVerdict<f64>) -> Self {
        Self { verdict: v.verdict.tag(), rationale: v.rationale.tag(), bound: v.bound }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HaffJson {
    pub e0: f64,
    pub tau: f64,
    pub kappa: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentBoundsJson {
    pub available: bool,
    pub p_max: f64,
    pub p0: Option<f64>,
    /// Records where some `m_p` exceeds its bound by more than two standard errors.
    pub violations: usize,
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GronwallJson {
    pub young: String,
    pub c_k: Option<f64>,
    pub c_k_source: &'static str,
    pub band: f64,
    pub snapshots: usize,
    pub crossings: Vec<usize>,
    pub minimal_c_k: f64,
    pub minimal_c_k_banded: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub schema: &'static str,
    pub scenario: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub verdict: VerdictJson,
    pub cooling_time: Option<f64>,
    pub initial_energy: f64,
    pub final_energy: f64,
    pub final_time: f64,
    pub collisions: u64,
    pub records: usize,
    pub haff_fit: Option<HaffJson>,
    pub moment_bounds: MomentBoundsJson,
    pub gronwall: Option<GronwallJson>,
    pub warnings: Vec<String>,
}

/// Everything a run produces before it is written out.
pub struct RunOutput {
    pub record: TrajectoryRecord<f64>,
    pub moments: Vec<(f64, MomentVector<f64>)>,
    pub bounds: Option<Vec<Vec<f64>>>,
    pub summary: RunSummary,
}

fn numeric(e: DsmcError) -> Failure {
    match e {
        DsmcError::InvalidConfig(_) => Failure::Config(anyhow!(e)),
        other => Failure::Numeric(anyhow!(other)),
    }
}

/// `∫ f (1 + |v|)` for the empirical measure.
pub fn l1_1(ens: &Ensemble<f64>) -> f64 {
    ens.speeds().map(|s| 1.0 + s).sum::<f64>() / ens.len() as f64
}

/// Piecewise-linear interpolation of a recorded series, constant outside.
pub fn interpolate(times: &[f64], values: &[f64], t: f64) -> f64 {
    if t <= times[0] {
        return values[0];
    }
    let k = times.partition_point(|&s| s <= t);
    if k >= times.len() {
        return values[values.len() - 1];
    }
    let (t0, t1) = (times[k - 1], times[k]);
    let w = (t - t0) / (t1 - t0);
    values[k - 1] * (1.0 - w) + values[k] * w
}

pub fn execute(cfg: &ExperimentConfig, seed: u64) -> Result<RunOutput, Failure> {
    cfg.validate().map_err(Failure::Config)?;
    let kernel = cfg.kernel().map_err(Failure::Config)?;
    let ens = init_ensemble(cfg.dim, &cfg.initial_distribution().map_err(Failure::Config)?, cfg.n, seed, Some(cfg.initial_energy))
        .map_err(numeric)?;
    let verdict = classify_cooling(&kernel, cfg.tail(), ens.energy()).map_err(|e| Failure::Config(anyhow!(e)))?;
    let grid = half_integer_grid(cfg.moment_p_max);
    let mut warnings = Vec::new();

    let mut mom = Vec::new();
    let mut snaps: Vec<(usize, Ensemble<f64>)> = Vec::new();
    let every = cfg.orlicz_every;
    let record = run(cfg.sim_config(seed).map_err(Failure::Config)?, ens, &cfg.schedule(seed), |idx, e| {
        mom.push(moments(e, &grid, cfg.moment_scale));
        if every > 0 && idx % every == 0 {
            snaps.push((idx, e.clone()));
        }
    })
    .map_err(numeric)?;
    let times: Vec<f64> = record.rows.iter().map(|r| r.t).collect();
    let energies: Vec<f64> = record.rows.iter().map(|r| r.energy).collect();
    let moments: Vec<(f64, MomentVector<f64>)> = times.iter().copied().zip(mom).collect();
    for (t, mv) in &moments {
        for w in &mv.warnings {
            if !warnings.iter().any(|x: &String| x.ends_with(w)) {
                warnings.push(format!("t = {t}: {w}"));
            }
        }
    }

    let haff = if !kernel.restitution.is_elastic() {
        let (t, e): (Vec<f64>, Vec<f64>) = times.iter().zip(&energies).filter(|(_, e)| **e > 0.0).map(|(a, b)| (*a, *b)).unzip();
        match haff_fit(&t, &e) {
            Ok(f) => Some(HaffJson { e0: f.e0, tau: f.tau, kappa: f.kappa, residual: f.residual }),
            Err(err) => {
                warnings.push(format!("Haff fit unavailable: {err}"));
                None
            }
        }
    } else {
        None
    };

    let (bounds, moment_json) = moment_bounds(cfg, &kernel, &times, &energies, &moments);
    let gronwall = if snaps.is_empty() { None } else { Some(gronwall(cfg, &kernel, &record, &snaps, &mut warnings)?) };

    let last = record.rows.last().ok_or_else(|| Failure::Numeric(anyhow!("run produced no records")))?;
    let summary = RunSummary {
        schema: SUMMARY_SCHEMA,
        scenario: cfg.scenario.clone(),
        seed,
        config: cfg.clone(),
        verdict: (&verdict).into(),
        cooling_time: record.cooling_time,
        initial_energy: record.initial_energy,
        final_energy: last.energy,
        final_time: record.final_time,
        collisions: last.collisions,
        records: record.rows.len(),
        haff_fit: haff,
        moment_bounds: moment_json,
        gronwall,
        warnings,
    };
    Ok(RunOutput { record, moments, bounds, summary })
}

fn moment_bounds(
    cfg: &ExperimentConfig,
    kernel: &granular_core::collision::KernelSpec<f64>,
    times: &[f64],
    energies: &[f64],
    moments: &[(f64, MomentVector<f64>)],
) -> (Option<Vec<Vec<f64>>>, MomentBoundsJson) {
    let mut json = MomentBoundsJson { available: false, p_max: cfg.moment_p_max, p0: None, violations: 0, note: None };
    let sys = match MomentOdeSystem::new(cfg.moment_scale, cfg.gamma_scale, cfg.moment_p_max, kernel.intensity) {
        Ok(s) => s,
        Err(e) => {
            json.note = Some(e.to_string());
            return (None, json);
        }
    };
    json.p0 = Some(sys.p0());
    let energy = |t: f64| interpolate(times, energies, t);
    let out_times: Vec<f64> = times.iter().copied().filter(|&t| t > 0.0).collect();
    let b = match integrate_moment_bounds(&sys, &moments[0].1, energy, &out_times) {
        Ok(b) => b,
        Err(e) => {
            json.note = Some(e.to_string());
            return (None, json);
        }
    };
    let mut table = Vec::with_capacity(moments.len());
    for (k, (t, mv)) in moments.iter().enumerate() {
        let row: Vec<f64> = mv
            .indices
            .iter()
            .map(|&p| {
                if *t <= 0.0 {
                    return if p >= 1.5 { mv.get(p).unwrap_or(f64::NAN) } else { f64::NAN };
                }
                b.m_bound(k - (moments.len() - out_times.len()), p).unwrap_or(f64::NAN)
            })
            .collect();
        let violated = mv
            .values
            .iter()
            .zip(&mv.std_errors)
            .zip(&row)
            .any(|((&m, &s), &bd)| bd.is_finite() && m - 2.0 * s > bd);
        if violated {
            json.violations += 1;
        }
        table.push(row);
    }
    json.available = true;
    (Some(table), json)
}

fn gronwall(
    cfg: &ExperimentConfig,
    kernel: &granular_core::collision::KernelSpec<f64>,
    record: &TrajectoryRecord<f64>,
    snaps: &[(usize, Ensemble<f64>)],
    warnings: &mut Vec<String>,
) -> Result<GronwallJson, Failure> {
    let mut grids = Vec::new();
    for (idx, e) in snaps {
        if e.energy() <= 0.0 {
            break;
        }
        let g = DensityGrid::from_ensemble(e, cfg.orlicz_resolution).map_err(|e| Failure::Numeric(anyhow!(e)))?;
        grids.push(GronwallSnapshot { time: record.rows[*idx].t, grid: g, l1_1: Some(l1_1(e)) });
    }
    if grids.is_empty() {
        return Err(Failure::Numeric(anyhow!("no snapshot with positive energy for the Gronwall check")));
    }
    let (young, name) = match cfg.young().map_err(Failure::Config)? {
        Some(y) => (y, cfg.orlicz_young.clone()),
        None => (build_young_from_density(&grids[0].grid).map_err(|e| Failure::Numeric(anyhow!(e)))?, "built".to_string()),
    };
    let (c_k, source) = match cfg.c_k {
        Some(c) => (Some(c), "config"),
        None => {
            let l11 = grids.iter().filter_map(|s| s.l1_1).fold(0.0, f64::max);
            let energies: Vec<f64> = {
                let step = (snaps.len() / 8).max(1);
                snaps.iter().step_by(step).map(|(_, e)| e.energy()).filter(|&e| e > 0.0).collect()
            };
            match assemble_c_k(kernel, &energies, l11, &QuadratureConfig::new(kernel.dim, 64)) {
                Ok(c) => (Some(c), "assembled"),
                Err(e) => {
                    warnings.push(format!("C_K could not be assembled: {e}"));
                    (None, "unavailable")
                }
            }
        }
    };
    let rep = gronwall_envelope(&grids, &young, c_k.unwrap_or(0.0), cfg.gronwall_band).map_err(|e| Failure::Numeric(anyhow!(e)))?;
    Ok(GronwallJson {
        young: name,
        c_k,
        c_k_source: source,
        band: cfg.gronwall_band,
        snapshots: grids.len(),
        crossings: if c_k.is_some() { rep.crossings } else { Vec::new() },
        minimal_c_k: rep.minimal_c_k,
        minimal_c_k_banded: rep.minimal_c_k_banded,
    })
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn trajectory_csv(record: &TrajectoryRecord<f64>) -> String {
    let mut out = String::from("t,E,m_3/2,m_2,m_3,collisions,dEdt_measured,D_estimate\n");
    for r in &record.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            num(r.t),
            num(r.energy),
            num(r.m_3_2),
            num(r.m_2),
            num(r.m_3),
            r.collisions,
            num(r.dedt_measured),
            num(r.d_estimate)
        );
    }
    out
}

pub fn moments_csv(moments: &[(f64, MomentVector<f64>)], bounds: Option<&Vec<Vec<f64>>>) -> String {
    let mut out = String::from("t,p,m_p,std_error,bound\n");
    for (k, (t, mv)) in moments.iter().enumerate() {
        for (i, &p) in mv.indices.iter().enumerate() {
            let bound = bounds.and_then(|b| b.get(k)).and_then(|row| row.get(i)).copied().unwrap_or(f64::NAN);
            let _ = writeln!(out, "{},{},{},{},{}", num(*t), num(p), num(mv.values[i]), num(mv.std_errors[i]), num(bound));
        }
    }
    out
}

pub fn write_outputs(dir: &Path, out: &RunOutput) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    fs::write(dir.join("trajectory.csv"), trajectory_csv(&out.record))?;
    fs::write(dir.join("moments.csv"), moments_csv(&out.moments, out.bounds.as_ref()))?;
    let mut json = serde_json::to_string_pretty(&out.summary)?;
    json.push('\n');
    fs::write(dir.join("summary.json"), json)?;
    Ok(())
}

/// Reads `t` and `E` columns from a trajectory CSV.
pub fn read_trajectory(text: &str) -> anyhow::Result<(Vec<f64>, Vec<f64>)> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().ok_or_else(|| anyhow!("empty CSV"))?.split(',').map(str::trim).collect();
    let col = |name: &str| header.iter().position(|h| *h == name).ok_or_else(|| anyhow!("CSV lacks a `{name}` column"));
    let (it, ie) = (col("t")?, col("E")?);
    let (mut t, mut e) = (Vec::new(), Vec::new());
    for (k, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let cells: Vec<&str> = line.split(',').collect();
        let get = |i: usize| -> anyhow::Result<f64> {
            cells
                .get(i)
                .ok_or_else(|| anyhow!("line {}: missing column", k + 2))?
                .trim()
                .parse()
                .with_context(|| format!("line {}", k + 2))
        };
        t.push(get(it)?);
        e.push(get(ie)?);
    }
    Ok((t, e))
}
