//! Truncated Fock-space model on a handful of modes, integrated by brute
//! force. It fixes every sign and normalization of the coherent solver.
//!
//! Discrete modes carry weights `w_m`; with `[a_m, a_n†] = δ_mn` the smeared
//! operators are `a(f) = Σ_m √w_m conj(f_m) a_m`, so a coherent amplitude
//! `α_m` corresponds to the eigenvalue `√w_m α_m` of `a_m`.

use std::collections::HashMap;
use std::f64::consts::SQRT_2;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::coherent::CoherentState;
use crate::error::{Error, Result};
use crate::evolve::EvolutionParams;
use crate::grid::ModeGrid;
use crate::model::SourceSystem;

mod checks;
pub use checks::{
    convention_checks, evolution_mismatch, reference_modes, reference_params, reference_system, OracleCheck,
    EVOLUTION_THRESHOLD,
};

/// Largest supported number of modes.
pub const MAX_MODES: usize = 4;
/// Default photon cutoff.
pub const DEFAULT_N_MAX: usize = 14;
/// Largest truncated mass [`coherent_embed`] accepts.
pub const TAIL_BOUND: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct TruncatedFockSpace {
    mode_k: Vec<[f64; 3]>,
    mode_norm: Vec<f64>,
    mode_weight: Vec<f64>,
    n_max: usize,
    basis: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
    /// `raise[m][i] = Some((j, √(n_m+1)))` with `a_m† e_i = √(n_m+1) e_j`.
    raise: Vec<Vec<Option<(usize, f64)>>>,
    grid_id: u64,
}

impl TruncatedFockSpace {
    /// Fock space over the modes of `grid`, which must have at most [`MAX_MODES`] nodes.
    pub fn new(grid: &ModeGrid, n_max: usize) -> Result<Self> {
        let m = grid.len();
        if m > MAX_MODES {
            return Err(Error::InvalidParameter {
                name: "mode_count",
                reason: format!("at most {MAX_MODES} modes, got {m}"),
            });
        }
        if n_max == 0 || n_max > u8::MAX as usize {
            return Err(Error::InvalidParameter { name: "n_max", reason: format!("out of range: {n_max}") });
        }
        let mut basis = Vec::new();
        let mut current = vec![0u8; m];
        enumerate(&mut current, 0, n_max, &mut basis);
        // Total photon number first, then lexicographic: vacuum is index 0.
        basis.sort_by(|a, b| {
            let (sa, sb): (usize, usize) = (a.iter().map(|&x| x as usize).sum(), b.iter().map(|&x| x as usize).sum());
            sa.cmp(&sb).then_with(|| b.cmp(a))
        });
        let index: HashMap<Vec<u8>, usize> = basis.iter().cloned().enumerate().map(|(i, b)| (b, i)).collect();
        let raise = (0..m)
            .map(|mode| {
                basis
                    .iter()
                    .map(|occ| {
                        let total: usize = occ.iter().map(|&x| x as usize).sum();
                        if total == n_max {
                            return None;
                        }
                        let mut up = occ.clone();
                        up[mode] += 1;
                        Some((index[&up], ((occ[mode] as f64) + 1.0).sqrt()))
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            mode_k: grid.nodes().to_vec(),
            mode_norm: grid.norms().to_vec(),
            mode_weight: grid.weights().to_vec(),
            n_max,
            basis,
            index,
            raise,
            grid_id: grid.id(),
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn mode_count(&self) -> usize {
        self.mode_k.len()
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn mode_k(&self) -> &[[f64; 3]] {
        &self.mode_k
    }

    pub fn mode_weight(&self) -> &[f64] {
        &self.mode_weight
    }

    pub fn basis(&self) -> &[Vec<u8>] {
        &self.basis
    }

    pub fn index_of(&self, occupation: &[u8]) -> Option<usize> {
        self.index.get(occupation).copied()
    }

    pub fn photon_count(&self, i: usize) -> usize {
        self.basis[i].iter().map(|&x| x as usize).sum()
    }

    pub fn vacuum(&self) -> Vec<C64> {
        let mut v = vec![C64::new(0.0, 0.0); self.dim()];
        v[0] = C64::new(1.0, 0.0);
        v
    }

    /// `a(f) ψ = Σ_m √w_m conj(f_m) a_m ψ`.
    pub fn annihilate(&self, f: &[C64], psi: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.dim()];
        for (m, fm) in f.iter().enumerate() {
            let c = fm.conj() * self.mode_weight[m].sqrt();
            for (i, r) in self.raise[m].iter().enumerate() {
                if let Some((j, s)) = r {
                    out[i] += c * *s * psi[*j];
                }
            }
        }
        out
    }

    /// `a†(f) ψ = Σ_m √w_m f_m a_m† ψ`, truncated at `n_max`.
    pub fn create(&self, f: &[C64], psi: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.dim()];
        for (m, fm) in f.iter().enumerate() {
            let c = fm * self.mode_weight[m].sqrt();
            for (i, r) in self.raise[m].iter().enumerate() {
                if let Some((j, s)) = r {
                    out[*j] += c * *s * psi[i];
                }
            }
        }
        out
    }

    fn check_grid(&self, grid_id: u64) -> Result<()> {
        if grid_id != self.grid_id {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }
}

fn enumerate(current: &mut Vec<u8>, mode: usize, left: usize, out: &mut Vec<Vec<u8>>) {
    if mode == current.len() {
        out.push(current.clone());
        return;
    }
    for n in 0..=left {
        current[mode] = n as u8;
        enumerate(current, mode + 1, left - n, out);
    }
    current[mode] = 0;
}

/// Sparse operator as a coordinate list.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    pub dim: usize,
    pub entries: Vec<(usize, usize, C64)>,
}

impl SparseOperator {
    pub fn apply(&self, psi: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.dim];
        for &(i, j, z) in &self.entries {
            out[i] += z * psi[j];
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for &(i, j, z) in &self.entries {
            m[(i, j)] += z;
        }
        m
    }
}

/// Matrices of one instant: `H_f` (diagonal), `Φ(v)`, and the mode ladders.
#[derive(Debug, Clone)]
pub struct FockOperators {
    pub h_f: Vec<f64>,
    pub phi_v: SparseOperator,
    pub a: Vec<SparseOperator>,
    pub adag: Vec<SparseOperator>,
}

impl FockOperators {
    pub fn hamiltonian_dense(&self) -> DMatrix<C64> {
        let mut h = self.phi_v.to_dense();
        for (i, e) in self.h_f.iter().enumerate() {
            h[(i, i)] += *e;
        }
        h
    }
}

/// Operators of `H(t) = H_f + Φ(v(t))` on `space`.
pub fn build_operators(space: &TruncatedFockSpace, sys: &SourceSystem, grid: &ModeGrid, t: f64) -> Result<FockOperators> {
    space.check_grid(grid.id())?;
    sys.check_time(t)?;
    let v = coupling(sys, grid, t);
    let dim = space.dim();
    let h_f = free_energies(space);
    let mut a = Vec::new();
    let mut adag = Vec::new();
    let mut phi = Vec::new();
    for m in 0..space.mode_count() {
        let mut am = Vec::new();
        let mut cm = Vec::new();
        let c = v[m] * (space.mode_weight[m].sqrt() / SQRT_2);
        for (i, r) in space.raise[m].iter().enumerate() {
            if let Some((j, s)) = r {
                am.push((i, *j, C64::new(*s, 0.0)));
                cm.push((*j, i, C64::new(*s, 0.0)));
                phi.push((*j, i, c * *s));
                phi.push((i, *j, c.conj() * *s));
            }
        }
        a.push(SparseOperator { dim, entries: am });
        adag.push(SparseOperator { dim, entries: cm });
    }
    Ok(FockOperators { h_f, phi_v: SparseOperator { dim, entries: phi }, a, adag })
}

fn free_energies(space: &TruncatedFockSpace) -> Vec<f64> {
    space
        .basis
        .iter()
        .map(|occ| occ.iter().zip(&space.mode_norm).map(|(&n, &r)| n as f64 * r).sum())
        .collect()
}

fn coupling(sys: &SourceSystem, grid: &ModeGrid, t: f64) -> Vec<C64> {
    let kernel = sys.kernel(grid);
    let positions: Vec<[f64; 3]> = sys.trajectories.iter().map(|tr| tr.jet(t)[0]).collect();
    let mut v = vec![C64::new(0.0, 0.0); grid.len()];
    kernel.v_into(sys, grid, &positions, &mut v);
    v
}

/// `H ψ` with `H = H_f + Φ(v)`.
fn apply_hamiltonian(space: &TruncatedFockSpace, h_f: &[f64], v: &[C64], psi: &[C64], out: &mut [C64]) {
    for (o, (e, p)) in out.iter_mut().zip(h_f.iter().zip(psi)) {
        *o = p * *e;
    }
    for (m, vm) in v.iter().enumerate() {
        let c = vm * (space.mode_weight[m].sqrt() / SQRT_2);
        for (i, r) in space.raise[m].iter().enumerate() {
            if let Some((j, s)) = r {
                out[*j] += c * *s * psi[i];
                out[i] += c.conj() * *s * psi[*j];
            }
        }
    }
}

/// States at the panel boundaries of `params`.
#[derive(Debug, Clone)]
pub struct FockTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<C64>>,
    /// RK4 substeps per panel after step halving converged.
    pub substeps: usize,
}

/// Integrates `iε ψ' = H(t) ψ` with classical RK4, halving the step until the
/// final state moves by less than `1e-9` (at most `max_halvings` times).
pub fn integrate_schrodinger(
    space: &TruncatedFockSpace,
    sys: &SourceSystem,
    grid: &ModeGrid,
    params: &EvolutionParams,
    initial: &[C64],
) -> Result<FockTrajectory> {
    space.check_grid(grid.id())?;
    if initial.len() != space.dim() {
        return Err(Error::LengthMismatch { expected: space.dim(), got: initial.len() });
    }
    if params.epsilon < 0.05 {
        return Err(Error::InvalidParameter {
            name: "epsilon",
            reason: format!("oracle integration needs epsilon >= 0.05, got {}", params.epsilon),
        });
    }
    params.validate(sys, grid)?;
    // Start from an RK4 step of about 0.1/‖H‖ relative to ε.
    let k_max = space.mode_norm.iter().cloned().fold(0.0, f64::max);
    let spectral = space.n_max as f64 * k_max + 1.0;
    let h = params.step();
    let mut substeps = ((h * spectral / params.epsilon) / 0.1).ceil().max(1.0) as usize;
    let mut prev = run_rk4(space, sys, grid, params, initial, substeps);
    let max_halvings = 8;
    for _ in 0..max_halvings {
        substeps *= 2;
        let next = run_rk4(space, sys, grid, params, initial, substeps);
        let change = next.states.last().unwrap().iter().zip(prev.states.last().unwrap()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        if change < 1e-9 {
            return Ok(FockTrajectory { substeps, ..next });
        }
        prev = next;
    }
    Err(Error::Convergence(format!(
        "RK4 endpoint still changing after {max_halvings} halvings ({substeps} substeps per panel)"
    )))
}

fn run_rk4(
    space: &TruncatedFockSpace,
    sys: &SourceSystem,
    grid: &ModeGrid,
    params: &EvolutionParams,
    initial: &[C64],
    substeps: usize,
) -> FockTrajectory {
    let dim = space.dim();
    let h_f = free_energies(space);
    let factor = C64::new(0.0, -1.0 / params.epsilon);
    let mut psi = initial.to_vec();
    let mut times = vec![params.t0];
    let mut states = vec![psi.clone()];
    let mut k = vec![vec![C64::new(0.0, 0.0); dim]; 4];
    let mut tmp = vec![C64::new(0.0, 0.0); dim];
    for panel in 0..params.step_count {
        let a = params.time(panel);
        let b = params.time(panel + 1);
        let dt = (b - a) / substeps as f64;
        for s in 0..substeps {
            let t = a + s as f64 * dt;
            let v0 = coupling(sys, grid, t);
            let vm = coupling(sys, grid, t + 0.5 * dt);
            let v1 = coupling(sys, grid, t + dt);
            apply_hamiltonian(space, &h_f, &v0, &psi, &mut k[0]);
            k[0].iter_mut().for_each(|z| *z *= factor);
            for (x, (p, d)) in tmp.iter_mut().zip(psi.iter().zip(&k[0])) {
                *x = p + d * (0.5 * dt);
            }
            apply_hamiltonian(space, &h_f, &vm, &tmp, &mut k[1]);
            k[1].iter_mut().for_each(|z| *z *= factor);
            for (x, (p, d)) in tmp.iter_mut().zip(psi.iter().zip(&k[1])) {
                *x = p + d * (0.5 * dt);
            }
            apply_hamiltonian(space, &h_f, &vm, &tmp, &mut k[2]);
            k[2].iter_mut().for_each(|z| *z *= factor);
            for (x, (p, d)) in tmp.iter_mut().zip(psi.iter().zip(&k[2])) {
                *x = p + d * dt;
            }
            apply_hamiltonian(space, &h_f, &v1, &tmp, &mut k[3]);
            k[3].iter_mut().for_each(|z| *z *= factor);
            for i in 0..dim {
                psi[i] += (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]) * (dt / 6.0);
            }
        }
        times.push(b);
        states.push(psi.clone());
    }
    FockTrajectory { times, states, substeps }
}

/// `exp(c·A) ψ` for a sparse `A` by a sub-stepped Taylor series.
pub fn exp_apply(op: &SparseOperator, c: C64, psi: &[C64]) -> Vec<C64> {
    // Row-sum bound on ‖A‖.
    let mut rows = vec![0.0; op.dim];
    for &(i, _, z) in &op.entries {
        rows[i] += z.norm();
    }
    let bound = rows.iter().cloned().fold(0.0, f64::max) * c.norm();
    let substeps = (bound / 0.5).ceil().max(1.0) as usize;
    let cs = c / substeps as f64;
    let mut out = psi.to_vec();
    for _ in 0..substeps {
        let mut term = out.clone();
        let mut acc = out.clone();
        for n in 1..60 {
            term = op.apply(&term);
            let scale = cs / n as f64;
            term.iter_mut().for_each(|z| *z *= scale);
            let size: f64 = term.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            acc.iter_mut().zip(&term).for_each(|(a, t)| *a += t);
            if size < 1e-17 {
                break;
            }
        }
        out = acc;
    }
    out
}

/// Sparse form of `Φ(f) = (a†(f) + a(f))/√2`.
pub fn field_operator(space: &TruncatedFockSpace, f: &[C64]) -> SparseOperator {
    let mut entries = Vec::new();
    for (m, fm) in f.iter().enumerate() {
        let c = fm * (space.mode_weight[m].sqrt() / SQRT_2);
        for (i, r) in space.raise[m].iter().enumerate() {
            if let Some((j, s)) = r {
                entries.push((*j, i, c * *s));
                entries.push((i, *j, c.conj() * *s));
            }
        }
    }
    SparseOperator { dim: space.dim(), entries }
}

/// Occupation-basis expansion of a coherent state.
#[derive(Debug, Clone)]
pub struct Embedding {
    pub vector: Vec<C64>,
    /// Probability outside the truncated space before renormalization.
    pub truncated_mass: f64,
}

/// Expands `e^{iθ} W(α) Ω₀`; rejects states whose tail beyond `n_max`
/// exceeds [`TAIL_BOUND`].
pub fn coherent_embed(space: &TruncatedFockSpace, state: &CoherentState) -> Result<Embedding> {
    space.check_grid(state.grid_id())?;
    let amp: Vec<C64> = state
        .amplitude()
        .iter()
        .zip(&space.mode_weight)
        .map(|(a, w)| a * w.sqrt())
        .collect();
    let n: f64 = amp.iter().map(|z| z.norm_sqr()).sum();
    // Total photon number of a coherent state is Poisson(n).
    let kept: f64 = (0..=space.n_max).map(|m| crate::coherent::poisson(n, m)).sum();
    let mass = (1.0 - kept).max(0.0);
    if mass > TAIL_BOUND {
        return Err(Error::TailBound { n_max: space.n_max, mass, bound: TAIL_BOUND });
    }
    let prefactor = C64::new(-0.5 * n, state.phase()).exp();
    let mut vector: Vec<C64> = space
        .basis
        .iter()
        .map(|occ| {
            let mut z = prefactor;
            for (k, &nk) in occ.iter().enumerate() {
                let mut fact = 1.0;
                for j in 1..=nk as usize {
                    fact *= j as f64;
                }
                z *= amp[k].powu(nk as u32) / fact.sqrt();
            }
            z
        })
        .collect();
    let norm: f64 = vector.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    vector.iter_mut().for_each(|z| *z /= norm);
    Ok(Embedding { vector, truncated_mass: mass })
}

/// `⟨u, v⟩`.
pub fn fidelity(u: &[C64], v: &[C64]) -> C64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

/// Population of the sectors with exactly `m` photons.
pub fn sector_population(space: &TruncatedFockSpace, psi: &[C64], m: usize) -> f64 {
    psi.iter().enumerate().filter(|(i, _)| space.photon_count(*i) == m).map(|(_, z)| z.norm_sqr()).sum()
}

#[cfg(test)]
mod tests;
