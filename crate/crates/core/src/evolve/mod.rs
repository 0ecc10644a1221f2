//! Exact coherent-sector dynamics and the adiabatic, superadiabatic and
//! first-order non-adiabatic reference objects.
//!
//! With `H(t) = H_f + Φ(v(t))` the state `e^{iθ}W(α)Ω₀` stays coherent:
//!
//! * `iε α̇ = |k| α + v/√2`
//! * `ε θ̇ = −Re⟨v, α⟩/√2`
//!
//! Both are integrated panel by panel with `v` replaced by its cubic
//! interpolant in time, so the carrier `e^{−i|k|t/ε}` is handled exactly and
//! the step size only has to resolve the source motion.

pub mod filon;

use std::f64::consts::SQRT_2;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::coherent::{displace_unchecked, CoherentState};
use crate::error::{Error, Result};
use crate::grid::ModeGrid;
use crate::model::{couplings_with, dressed_energy_of, Couplings, Kernel, SourceSystem};

pub use filon::oscillatory_panel_integral;
use filon::{lagrange_to_monomial, PanelWeights, DEGREE, NODES};

/// Panels per shortest motion time scale required by [`EvolutionParams::validate`].
pub const PANELS_PER_SCALE: usize = 64;

/// How the infrared cutoff σ depends on ε.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SigmaRule {
    Fixed { sigma: f64 },
    /// σ = ε^p.
    Power { p: f64 },
}

impl SigmaRule {
    pub fn sigma(&self, epsilon: f64) -> f64 {
        match *self {
            SigmaRule::Fixed { sigma } => sigma,
            SigmaRule::Power { p } => epsilon.powf(p),
        }
    }

    pub fn describe(&self) -> String {
        match *self {
            SigmaRule::Fixed { sigma } => format!("fixed sigma={sigma}"),
            SigmaRule::Power { p } => format!("sigma=epsilon^{p}"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SigmaRule::Fixed { sigma } if !(sigma >= 0.0 && sigma.is_finite()) => Err(Error::InvalidParameter {
                name: "sigma",
                reason: format!("must be finite and nonnegative, got {sigma}"),
            }),
            SigmaRule::Power { p } if !(p > 0.0 && p.is_finite()) => Err(Error::InvalidParameter {
                name: "sigma_rule.p",
                reason: format!("must be positive, got {p}"),
            }),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionParams {
    pub epsilon: f64,
    pub t0: f64,
    pub t1: f64,
    pub step_count: usize,
    pub sigma_rule: SigmaRule,
}

impl EvolutionParams {
    pub fn step(&self) -> f64 {
        (self.t1 - self.t0) / self.step_count as f64
    }

    pub fn time(&self, n: usize) -> f64 {
        if n == self.step_count {
            self.t1
        } else {
            self.t0 + n as f64 * self.step()
        }
    }

    /// Checks ε, the time interval, the σ rule against the grid and the
    /// panel resolution against the source motion.
    pub fn validate(&self, sys: &SourceSystem, grid: &ModeGrid) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "epsilon",
                reason: format!("must lie in (0, 1], got {}", self.epsilon),
            });
        }
        if !(self.t1 > self.t0) || !self.t0.is_finite() || !self.t1.is_finite() {
            return Err(Error::InvalidParameter {
                name: "t1",
                reason: format!("need t0 < t1, got [{}, {}]", self.t0, self.t1),
            });
        }
        if self.step_count == 0 {
            return Err(Error::ZeroCount { what: "step_count" });
        }
        self.sigma_rule.validate()?;
        let sigma = self.sigma_rule.sigma(self.epsilon);
        if (grid.sigma_ir() - sigma).abs() > 1e-12 * sigma.max(1.0) {
            return Err(Error::InvalidParameter {
                name: "sigma_rule",
                reason: format!("grid cutoff {} differs from the rule's {}", grid.sigma_ir(), sigma),
            });
        }
        sys.check_time(self.t0)?;
        sys.check_time(self.t1)?;
        if let Some(scale) = sys.time_scale() {
            let h = self.step();
            if h > scale / PANELS_PER_SCALE as f64 * (1.0 + 1e-12) {
                let required = ((self.t1 - self.t0) * PANELS_PER_SCALE as f64 / scale).ceil() as usize;
                return Err(Error::Resolution { panel: h, scale, required });
            }
        }
        Ok(())
    }
}

/// Exact states at every panel boundary.
#[derive(Debug, Clone)]
pub struct Evolution {
    pub times: Vec<f64>,
    pub states: Vec<CoherentState>,
}

/// One-boson emission amplitude β(k, t).
#[derive(Debug, Clone, PartialEq)]
pub struct OneBosonAmplitude {
    pub beta: Vec<C64>,
    pub t: f64,
    pub epsilon: f64,
}

/// `∫ E_σ` and `∫ E^ε_σ` from `t0` to each panel boundary.
#[derive(Debug, Clone)]
pub struct EnergyIntegrals {
    pub times: Vec<f64>,
    pub e_sigma: Vec<f64>,
    pub e_dressed: Vec<f64>,
}

/// Precomputed per-mode panel weights for a uniform panel length.
pub(crate) struct PanelTable {
    pub weights: Vec<PanelWeights>,
}

impl PanelTable {
    pub fn new(grid: &ModeGrid, h: f64, epsilon: f64) -> Self {
        let basis = lagrange_to_monomial();
        let weights = grid.norms().iter().map(|&r| PanelWeights::new(r * h / epsilon, &basis)).collect();
        Self { weights }
    }
}

/// Evolves `initial` and hands each panel-boundary state to `observe`.
pub fn evolve_observed<F>(
    initial: &CoherentState,
    sys: &SourceSystem,
    grid: &ModeGrid,
    params: &EvolutionParams,
    mut observe: F,
) -> Result<CoherentState>
where
    F: FnMut(usize, f64, &CoherentState),
{
    params.validate(sys, grid)?;
    if initial.grid_id() != grid.id() || initial.amplitude().len() != grid.len() {
        return Err(Error::GridMismatch);
    }
    let eps = params.epsilon;
    let h = params.step();
    let table = PanelTable::new(grid, h, eps);
    let kernel = sys.kernel(grid);
    let n = grid.len();
    let mut alpha = initial.amplitude().to_vec();
    let mut theta = initial.phase();
    let mut samples: Vec<Vec<C64>> = vec![vec![C64::new(0.0, 0.0); n]; DEGREE + 1];
    let mut scratch = Vec::new();
    v_at(sys, grid, &kernel, params.t0, &mut samples[0], &mut scratch);
    observe(0, params.t0, initial);
    let drive_scale = C64::new(0.0, -h / (eps * SQRT_2));
    for step in 0..params.step_count {
        let t = params.time(step);
        for j in 1..=DEGREE {
            let tj = if j == DEGREE { params.time(step + 1) } else { t + h * NODES[j] };
            v_at(sys, grid, &kernel, tj, &mut samples[j], &mut scratch);
        }
        let mut linear = 0.0;
        let mut quadratic = 0.0;
        for i in 0..n {
            let w = &table.weights[i];
            let vs = [samples[0][i], samples[1][i], samples[2][i], samples[3][i]];
            let s: C64 = (0..=DEGREE).map(|j| w.drive[j] * vs[j]).sum();
            let weight = grid.weights()[i];
            linear += weight * (s.conj() * alpha[i]).re;
            let mut pair = C64::new(0.0, 0.0);
            for j in 0..=DEGREE {
                let row: C64 = (0..=DEGREE).map(|l| w.pair[j][l] * vs[l]).sum();
                pair += vs[j].conj() * row;
            }
            quadratic += weight * pair.im;
            alpha[i] = w.carrier * (alpha[i] + drive_scale * s);
        }
        theta += -h / (eps * SQRT_2) * linear - h * h / (2.0 * eps * eps) * quadratic;
        samples.swap(0, DEGREE);
        let state = CoherentState::from_parts(grid.id(), alpha.clone(), theta);
        observe(step + 1, params.time(step + 1), &state);
    }
    Ok(CoherentState::from_parts(grid.id(), alpha, theta))
}

fn v_at(sys: &SourceSystem, grid: &ModeGrid, kernel: &Kernel, t: f64, out: &mut [C64], scratch: &mut Vec<[f64; 3]>) {
    scratch.clear();
    scratch.extend(sys.trajectories.iter().map(|tr| tr.jet(t)[0]));
    kernel.v_into(sys, grid, scratch, out);
}

/// Exact evolution, returning the state at every panel boundary.
pub fn evolve_exact(
    initial: &CoherentState,
    sys: &SourceSystem,
    grid: &ModeGrid,
    params: &EvolutionParams,
) -> Result<Evolution> {
    let mut times = Vec::with_capacity(params.step_count + 1);
    let mut states = Vec::with_capacity(params.step_count + 1);
    evolve_observed(initial, sys, grid, params, |_, t, s| {
        times.push(t);
        states.push(s.clone());
    })?;
    Ok(Evolution { times, states })
}

/// Cumulative `∫ E_σ` and `∫ E^ε_σ` on the panel grid of `params`, each panel
/// integrated with the four-point Newton–Cotes rule on the propagator nodes.
pub fn energy_integrals(sys: &SourceSystem, grid: &ModeGrid, params: &EvolutionParams) -> Result<EnergyIntegrals> {
    params.validate(sys, grid)?;
    let kernel = sys.kernel(grid);
    let h = params.step();
    let eval = |t: f64| {
        let c = couplings_with(sys, grid, &kernel, t);
        let de = dressed_energy_of(sys, grid, &kernel, &c, params.epsilon);
        (de.e_sigma, de.value())
    };
    const W: [f64; 4] = [1.0 / 8.0, 3.0 / 8.0, 3.0 / 8.0, 1.0 / 8.0];
    let mut times = vec![params.t0];
    let mut e_sigma = vec![0.0];
    let mut e_dressed = vec![0.0];
    let mut left = eval(params.t0);
    for step in 0..params.step_count {
        let t = params.time(step);
        let mid1 = eval(t + h * NODES[1]);
        let mid2 = eval(t + h * NODES[2]);
        let right = eval(params.time(step + 1));
        let vals = [left, mid1, mid2, right];
        let a: f64 = vals.iter().zip(&W).map(|(v, w)| w * v.0).sum::<f64>() * h;
        let b: f64 = vals.iter().zip(&W).map(|(v, w)| w * v.1).sum::<f64>() * h;
        times.push(params.time(step + 1));
        e_sigma.push(e_sigma.last().unwrap() + a);
        e_dressed.push(e_dressed.last().unwrap() + b);
        left = right;
    }
    Ok(EnergyIntegrals { times, e_sigma, e_dressed })
}

/// `−v/(√2|k|)`, the amplitude of the dressed ground state.
pub(crate) fn adiabatic_amplitude(grid: &ModeGrid, v: &[C64]) -> Vec<C64> {
    v.iter().zip(grid.norms()).map(|(v, &r)| -v / (SQRT_2 * r)).collect()
}

/// `V_σ(t)* Ω₀` with global phase `accumulated_phase`.
pub fn adiabatic_state(sys: &SourceSystem, grid: &ModeGrid, t: f64, accumulated_phase: f64) -> Result<CoherentState> {
    sys.check_time(t)?;
    let kernel = sys.kernel(grid);
    let c = couplings_with(sys, grid, &kernel, t);
    Ok(adiabatic_from(grid, &c, accumulated_phase))
}

pub(crate) fn adiabatic_from(grid: &ModeGrid, c: &Couplings, phase: f64) -> CoherentState {
    // V_σ* = e^{+iΦ(iv/|k|)} = W(−v/(√2|k|)) applied to the vacuum.
    let vac = CoherentState::vacuum(grid).with_phase(phase);
    displace_unchecked(grid, &vac, &adiabatic_amplitude(grid, &c.v))
}

/// `V_σ(t)* e^{−iεΦ(z₂)} Ω₀` with global phase `accumulated_phase`.
pub fn superadiabatic_state(
    sys: &SourceSystem,
    grid: &ModeGrid,
    t: f64,
    epsilon: f64,
    accumulated_phase: f64,
) -> Result<CoherentState> {
    sys.check_time(t)?;
    let kernel = sys.kernel(grid);
    let c = couplings_with(sys, grid, &kernel, t);
    Ok(superadiabatic_from(grid, &c, epsilon, accumulated_phase))
}

pub(crate) fn superadiabatic_from(grid: &ModeGrid, c: &Couplings, epsilon: f64, phase: f64) -> CoherentState {
    let vac = CoherentState::vacuum(grid).with_phase(phase);
    let tilt = velocity_displacement(&c.z2, epsilon, -1.0);
    let tilted = displace_unchecked(grid, &vac, &tilt);
    displace_unchecked(grid, &tilted, &adiabatic_amplitude(grid, &c.v))
}

/// Displacement of `e^{sign·iεΦ(z₂)}`: `sign·iε z₂/√2`.
fn velocity_displacement(z2: &[C64], epsilon: f64, sign: f64) -> Vec<C64> {
    let s = C64::new(0.0, sign * epsilon / SQRT_2);
    z2.iter().map(|z| s * z).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DressDirection {
    LabToDressed,
    DressedToLab,
}

/// Applies `V^ε_σ(t) = e^{iεΦ(z₂)} V_σ` or its inverse.
pub fn dress_transform(
    state: &CoherentState,
    sys: &SourceSystem,
    grid: &ModeGrid,
    t: f64,
    epsilon: f64,
    direction: DressDirection,
) -> Result<CoherentState> {
    sys.check_time(t)?;
    if state.grid_id() != grid.id() || state.amplitude().len() != grid.len() {
        return Err(Error::GridMismatch);
    }
    let kernel = sys.kernel(grid);
    let c = couplings_with(sys, grid, &kernel, t);
    Ok(dress_with(state, grid, &c, epsilon, direction))
}

pub(crate) fn dress_with(
    state: &CoherentState,
    grid: &ModeGrid,
    c: &Couplings,
    epsilon: f64,
    direction: DressDirection,
) -> CoherentState {
    let ad = adiabatic_amplitude(grid, &c.v);
    match direction {
        DressDirection::LabToDressed => {
            let undressed: Vec<C64> = ad.iter().map(|a| -a).collect();
            let s = displace_unchecked(grid, state, &undressed);
            displace_unchecked(grid, &s, &velocity_displacement(&c.z2, epsilon, 1.0))
        }
        DressDirection::DressedToLab => {
            let s = displace_unchecked(grid, state, &velocity_displacement(&c.z2, epsilon, -1.0));
            displace_unchecked(grid, &s, &ad)
        }
    }
}

/// Per-mode weights `∫₀¹ e^{iνy} g(y) dy = Σ_j w_j g(NODES[j])` for `ν = |k|h/ε`.
pub(crate) fn drive_weights(grid: &ModeGrid, h: f64, epsilon: f64) -> Vec<[C64; DEGREE + 1]> {
    PanelTable::new(grid, h, epsilon).weights.iter().map(|w| w.drive).collect()
}

/// Number of uniform panels covering `[t0, t]` at the panel length of `params`.
pub(crate) fn panels_to(params: &EvolutionParams, t: f64) -> usize {
    (((t - params.t0) / params.step()) - 1e-9).ceil().max(1.0) as usize
}

/// First-order emission amplitude
/// `β(k,t) = −(ε/√2) e^{−i|k|t/ε} ∫_{t0}^t e^{i|k|s/ε} g_rad(k,s) ds`.
pub fn nonadiabatic_beta(
    sys: &SourceSystem,
    grid: &ModeGrid,
    params: &EvolutionParams,
    t: f64,
) -> Result<OneBosonAmplitude> {
    params.validate(sys, grid)?;
    if !(t >= params.t0 && t <= params.t1 + 1e-12) {
        return Err(Error::OutsideDomain { t, start: params.t0, end: params.t1 });
    }
    let eps = params.epsilon;
    let n = grid.len();
    if t == params.t0 {
        return Ok(OneBosonAmplitude { beta: vec![C64::new(0.0, 0.0); n], t, epsilon: eps });
    }
    let panels = panels_to(params, t);
    let h = (t - params.t0) / panels as f64;
    let weights = drive_weights(grid, h, eps);
    let kernel = sys.kernel(grid);
    let mut acc = vec![C64::new(0.0, 0.0); n];
    let mut g: Vec<Vec<C64>> = Vec::with_capacity(DEGREE + 1);
    g.push(couplings_with(sys, grid, &kernel, params.t0).g_rad);
    for p in 0..panels {
        let a = params.t0 + p as f64 * h;
        g.truncate(1);
        for &y in &NODES[1..] {
            let s = if y == 1.0 && p + 1 == panels { t } else { a + h * y };
            g.push(couplings_with(sys, grid, &kernel, s).g_rad);
        }
        for i in 0..n {
            let r = grid.norms()[i];
            let w = &weights[i];
            let local: C64 = (0..=DEGREE).map(|j| w[j] * g[j][i]).sum();
            // Carrier relative to t keeps the exponent small.
            acc[i] += C64::new(0.0, r * (a - t) / eps).exp() * h * local;
        }
        g.swap(0, DEGREE);
    }
    let scale = -eps / SQRT_2;
    let beta = acc.iter().map(|a| a * scale).collect();
    Ok(OneBosonAmplitude { beta, t, epsilon: eps })
}

/// `⟨ψ, H(t) ψ⟩` for a coherent state, with `H = H_f + Φ(v)`.
pub fn energy_expectation(state: &CoherentState, sys: &SourceSystem, grid: &ModeGrid, t: f64) -> Result<f64> {
    sys.check_time(t)?;
    if state.grid_id() != grid.id() {
        return Err(Error::GridMismatch);
    }
    let kernel = sys.kernel(grid);
    let c = couplings_with(sys, grid, &kernel, t);
    Ok(energy_expectation_with(state, grid, &c))
}

pub(crate) fn energy_expectation_with(state: &CoherentState, grid: &ModeGrid, c: &Couplings) -> f64 {
    let alpha = state.amplitude();
    grid.energy_unchecked(alpha) + SQRT_2 * grid.inner_unchecked(&c.v, alpha).re
}
