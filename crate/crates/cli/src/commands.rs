use std::path::Path;

use adiabat_core::experiments::{self, run_cell, CellReport, Scenario, SweepResult, SWEEP_HEADER};
use adiabat_core::oracle::{convention_checks, OracleCheck};
use adiabat_core::grid::GridSpec;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{sigma_note, Loaded};
use crate::output::{sci, Stamp, Writer};
use crate::CliError;

pub struct Options<'a> {
    pub out: Option<&'a Path>,
    pub workers: usize,
}

fn writer(loaded: &Loaded, command: &str, scenario: Option<&Scenario>, opts: &Options) -> Result<Writer, CliError> {
    let (rule, note) = match scenario {
        Some(s) => (s.sigma_rule.describe(), sigma_note(&s.sigma_rule)),
        None => ("fixed sigma=0".to_string(), "few-mode grid without infrared cutoff".to_string()),
    };
    let stamp = Stamp {
        command: command.into(),
        config_sha256: loaded.hash.clone(),
        sigma_rule: rule,
        sigma_note: note,
        version: env!("CARGO_PKG_VERSION").into(),
    };
    Writer::new(&loaded.config.out_dir(opts.out), stamp)
}

fn pool(workers: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| CliError::Config(format!("flag --workers: {e}")))
}

#[derive(Serialize)]
struct ScenarioInfo<'a> {
    scenario: &'a Scenario,
    grid: GridSpec,
}

#[derive(Serialize)]
struct SimulateReport<'a> {
    #[serde(flatten)]
    info: ScenarioInfo<'a>,
    epsilon: f64,
    sigma: f64,
    err_ad: f64,
    err_su: f64,
    err_su_full: f64,
    rest_reference_gap: f64,
    p_emit: f64,
    /// Largest `|arg⟨Ω_σ, ψ⟩e^{+(i/ε)∫E_σ}|` over the mesh.
    max_residual_phase: f64,
    radiated: &'a experiments::RadiatedEnergy,
    deformation: &'a experiments::DeformationEnergy,
}

pub const SIMULATE_HEADER: &str = "t,err_ad,err_su,err_su_full,p0,p1,energy,e_sigma,phase,residual_phase,norm";

pub fn simulate(loaded: &Loaded, opts: &Options) -> Result<Vec<String>, CliError> {
    let cfg = &loaded.config;
    let scenario = cfg.scenario("simulate")?;
    let eps = cfg.epsilon("simulate")?;
    preflight(&scenario, &[eps])?;
    let w = writer(loaded, "simulate", Some(&scenario), opts)?;
    let cell = pool(opts.workers)?.install(|| run_cell(&scenario, eps)).map_err(CliError::from_core)?;
    let rows = cell.trace.iter().map(|p| {
        [p.t, p.err_ad, p.err_su, p.err_su_full, p.p0, p.p1, p.energy, p.e_sigma, p.phase, p.residual_phase, p.norm]
            .iter()
            .map(|x| sci(*x))
            .collect::<Vec<_>>()
            .join(",")
    });
    let csv = w.csv("simulate.csv", SIMULATE_HEADER, rows)?;
    let report = SimulateReport {
        info: ScenarioInfo { scenario: &scenario, grid: scenario.grid_spec(eps) },
        epsilon: eps,
        sigma: cell.sigma,
        err_ad: cell.err_ad,
        err_su: cell.err_su,
        err_su_full: cell.err_su_full,
        rest_reference_gap: cell.rest_reference_gap,
        p_emit: cell.p_emit,
        max_residual_phase: cell.trace.iter().map(|p| p.residual_phase.abs()).fold(0.0, f64::max),
        radiated: &cell.radiated,
        deformation: &cell.deformation,
    };
    let json = w.json("simulate.json", &report)?;
    Ok(vec![
        format!("simulate {} eps={eps}: err_ad={:.4e} err_su={:.4e}", scenario.name, cell.err_ad, cell.err_su),
        format!("wrote {} and {}", csv.display(), json.display()),
    ])
}

#[derive(Serialize)]
struct SweepReport<'a> {
    #[serde(flatten)]
    info: ScenarioInfo<'a>,
    ladder: Vec<f64>,
    fits: &'a std::collections::BTreeMap<String, Vec<experiments::PowerFit>>,
    checks: &'a [experiments::ExponentCheck],
    deformation: DeformationSummary,
    cells: Vec<CellSummary>,
}

#[derive(Serialize)]
struct DeformationSummary {
    verdict: &'static str,
    /// numeric / ((ε²/4) X) per row.
    ratio_to_quarter_form: Vec<f64>,
    /// numeric(ε) / numeric(ε/2) wherever both are in the ladder.
    halving_ratios: Vec<[f64; 2]>,
}

#[derive(Serialize)]
struct CellSummary {
    epsilon: f64,
    err_su_full: f64,
    rest_reference_gap: f64,
    dressed_form_gap: f64,
    max_residual_phase: f64,
    e_static_check: Option<f64>,
    deformation_formula: f64,
    deformation_alternative: f64,
}

fn deformation_summary(res: &SweepResult) -> DeformationSummary {
    let ratio = res.cells.iter().map(|c| c.deformation.numeric / c.deformation.formula).collect();
    let mut halving = Vec::new();
    for a in &res.cells {
        if let Some(b) = res.cells.iter().find(|b| (b.epsilon * 2.0 - a.epsilon).abs() < 1e-12 * a.epsilon) {
            halving.push([a.epsilon, a.deformation.numeric / b.deformation.numeric]);
        }
    }
    DeformationSummary { verdict: res.deformation_verdict.label(), ratio_to_quarter_form: ratio, halving_ratios: halving }
}

fn cell_summary(c: &CellReport) -> CellSummary {
    CellSummary {
        epsilon: c.epsilon,
        err_su_full: c.err_su_full,
        rest_reference_gap: c.rest_reference_gap,
        dressed_form_gap: c.dressed_form_gap,
        max_residual_phase: c.trace.iter().map(|p| p.residual_phase.abs()).fold(0.0, f64::max),
        e_static_check: c.radiated.e_static_check,
        deformation_formula: c.deformation.formula,
        deformation_alternative: c.deformation.alternative,
    }
}

pub fn sweep(loaded: &Loaded, opts: &Options) -> Result<Vec<String>, CliError> {
    let cfg = &loaded.config;
    let scenario = cfg.scenario("sweep")?;
    let ladder = cfg.ladder()?;
    preflight(&scenario, &ladder)?;
    let w = writer(loaded, "sweep", Some(&scenario), opts)?;
    let res = experiments::run_sweep(&scenario, &ladder, opts.workers).map_err(CliError::from_core)?;
    let csv = w.csv("sweep.csv", SWEEP_HEADER, res.rows.iter().map(|r| r.csv_line()))?;
    let report = SweepReport {
        info: ScenarioInfo { scenario: &scenario, grid: scenario.grid },
        ladder: res.rows.iter().map(|r| r.epsilon).collect(),
        fits: &res.fits,
        checks: &res.checks,
        deformation: deformation_summary(&res),
        cells: res.cells.iter().map(cell_summary).collect(),
    };
    let json = w.json("sweep.json", &report)?;
    let mut lines: Vec<String> = res
        .checks
        .iter()
        .map(|c| {
            format!(
                "{}: exponent {:.3} ± {:.3} (expected {} ± {}) {}",
                c.quantity,
                c.fit.exponent,
                c.fit.half_width,
                c.expected,
                c.tolerance,
                if c.pass { "ok" } else { "off" }
            )
        })
        .collect();
    lines.push(format!("deformation coefficient: {}", res.deformation_verdict.label()));
    lines.push(format!("wrote {} and {}", csv.display(), json.display()));
    Ok(lines)
}

pub const RADIATION_HEADER: &str = "epsilon,t,e_rad_beta,e_rad_double,e_rad_larmor,e_static_check";

#[derive(Serialize)]
struct RadiationRow {
    epsilon: f64,
    #[serde(flatten)]
    energy: experiments::RadiatedEnergy,
    beta_double_rel_diff: f64,
    beta_over_larmor: f64,
}

#[derive(Serialize)]
struct RadiationReport<'a> {
    #[serde(flatten)]
    info: ScenarioInfo<'a>,
    rows: Vec<RadiationRow>,
}

pub fn radiation(loaded: &Loaded, opts: &Options) -> Result<Vec<String>, CliError> {
    let cfg = &loaded.config;
    let scenario = cfg.scenario("radiation")?;
    let ladder = match (cfg.epsilon, &cfg.ladder) {
        (Some(_), None) => vec![cfg.epsilon("radiation")?],
        _ => {
            let mut l = cfg.ladder()?;
            if cfg.epsilon.is_some() {
                l.push(cfg.epsilon("radiation")?);
            }
            l.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
            l.dedup();
            l
        }
    };
    preflight(&scenario, &ladder)?;
    let t = cfg.radiation.as_ref().and_then(|r| r.time).unwrap_or(scenario.t1());
    let w = writer(loaded, "radiation", Some(&scenario), opts)?;
    let energies: Vec<experiments::RadiatedEnergy> = pool(opts.workers)?
        .install(|| ladder.par_iter().map(|&e| experiments::radiated_energy(&scenario, e, t)).collect::<Result<_, _>>())
        .map_err(CliError::from_core)?;
    let rows: Vec<RadiationRow> = ladder
        .iter()
        .zip(energies)
        .map(|(&epsilon, energy)| RadiationRow {
            epsilon,
            beta_double_rel_diff: rel_diff(energy.e_beta, energy.e_double),
            beta_over_larmor: energy.e_beta / energy.e_larmor,
            energy,
        })
        .collect();
    let csv = w.csv(
        "radiation.csv",
        RADIATION_HEADER,
        rows.iter().map(|r| {
            let s = r.energy.e_static_check.map(sci).unwrap_or_default();
            format!("{},{},{},{},{},{}", sci(r.epsilon), sci(r.energy.t), sci(r.energy.e_beta), sci(r.energy.e_double), sci(r.energy.e_larmor), s)
        }),
    )?;
    let lines: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "epsilon = {}: e_rad_beta = {:.4e}, e_rad_double = {:.4e}, e_rad_larmor = {:.4e}, beta/larmor = {:.4}",
                r.epsilon, r.energy.e_beta, r.energy.e_double, r.energy.e_larmor, r.beta_over_larmor
            )
        })
        .collect();
    let txt = w.text("radiation.txt", &lines)?;
    let json = w.json("radiation.json", &RadiationReport { info: ScenarioInfo { scenario: &scenario, grid: scenario.grid }, rows })?;
    let mut out = lines;
    out.push(format!("wrote {}, {} and {}", csv.display(), txt.display(), json.display()));
    Ok(out)
}

fn rel_diff(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

#[derive(Serialize)]
struct OracleReport<'a> {
    n_max: usize,
    epsilons: &'a [f64],
    checks: &'a [OracleCheck],
    all_pass: bool,
}

pub fn oracle_check(loaded: &Loaded, opts: &Options) -> Result<Vec<String>, CliError> {
    let o = loaded.config.oracle.clone().unwrap_or_default();
    for &e in &o.epsilons {
        if !(e > 0.0 && e <= 1.0) {
            return Err(CliError::Config(format!("field `oracle.epsilons`: epsilon must lie in (0, 1], got {e}")));
        }
    }
    let w = writer(loaded, "oracle-check", None, opts)?;
    let checks = convention_checks(o.n_max, &o.epsilons).map_err(CliError::from_core)?;
    let lines: Vec<String> = checks
        .iter()
        .map(|c| format!("{} {}: {:.3e} (threshold {:.0e})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.threshold))
        .collect();
    let all_pass = checks.iter().all(|c| c.pass);
    let txt = w.text("oracle.txt", &lines)?;
    let json = w.json("oracle.json", &OracleReport { n_max: o.n_max, epsilons: &o.epsilons, checks: &checks, all_pass })?;
    if !all_pass {
        return Err(CliError::Oracle(lines.into_iter().filter(|l| l.starts_with("FAIL")).collect::<Vec<_>>().join("; ")));
    }
    let mut out = lines;
    out.push(format!("wrote {} and {}", txt.display(), json.display()));
    Ok(out)
}

/// Builds every grid and checks every panel layout before any evolution.
fn preflight(scenario: &Scenario, ladder: &[f64]) -> Result<(), CliError> {
    for &eps in ladder {
        let grid = scenario.build_grid(eps).map_err(|e| CliError::Config(format!("field `grid`: {e}")))?;
        scenario.params(eps).validate(&scenario.system, &grid).map_err(CliError::from_core)?;
    }
    Ok(())
}

pub fn run(command: &str, cfg: &Loaded, opts: &Options) -> Result<Vec<String>, CliError> {
    match command {
        "simulate" => simulate(cfg, opts),
        "sweep" => sweep(cfg, opts),
        "radiation" => radiation(cfg, opts),
        "oracle-check" => oracle_check(cfg, opts),
        other => Err(CliError::Config(format!("unknown command {other}"))),
    }
}

