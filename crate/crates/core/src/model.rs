//! Sources, form factor, coupling functions and the scalar energies built
//! from them.
//!
//! Conventions: every coupling carries the plane wave `e^{+ik·x_j}`, the
//! field operator is `Φ(f) = (a†(f) + a(f))/√2` and `a(f)` is antilinear in
//! `f`. With `pre_j(k) = e_j φ̂_σ(|k|) |k|^{-1/2} e^{ik·x_j}`:
//!
//! * `v      = Σ pre_j`
//! * `z1     = −Σ pre_j (κ·ẋ_j)`              (= d/dt of `i v/|k|`)
//! * `z2     = i Σ pre_j (κ·ẋ_j)/|k|`         (so `z1 = i|k| z2`)
//! * `g_rad  = Σ pre_j (κ·ẍ_j)/|k|`
//! * `z2dot  = i g_rad − Σ pre_j (κ·ẋ_j)²`

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::ModeGrid;
use crate::trajectory::{Jet, Trajectory};

/// φ̂(0) = (2π)^{-3/2}.
pub const FORM_FACTOR_ORIGIN: f64 = 0.063_493_635_934_240_97;

/// Gaussian form factor φ̂(|k|) = (2π)^{-3/2} exp(−|k|²Λ²/2).
pub fn form_factor(k_norm: f64, lambda: f64) -> f64 {
    FORM_FACTOR_ORIGIN * (-0.5 * k_norm * k_norm * lambda * lambda).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSystem {
    pub charges: Vec<f64>,
    pub lambda: f64,
    pub trajectories: Vec<Trajectory>,
    /// Times outside this interval are rejected instead of extrapolated.
    #[serde(default)]
    pub domain: Option<(f64, f64)>,
}

impl SourceSystem {
    pub fn new(charges: Vec<f64>, lambda: f64, trajectories: Vec<Trajectory>) -> Result<Self> {
        let sys = Self { charges, lambda, trajectories, domain: None };
        sys.validate()?;
        Ok(sys)
    }

    pub fn with_domain(mut self, start: f64, end: f64) -> Self {
        self.domain = Some((start, end));
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.charges.is_empty() {
            return Err(Error::InvalidParameter {
                name: "charges",
                reason: "at least one source is required".into(),
            });
        }
        if self.charges.len() != self.trajectories.len() {
            return Err(Error::LengthMismatch {
                expected: self.charges.len(),
                got: self.trajectories.len(),
            });
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "lambda",
                reason: format!("must be positive, got {}", self.lambda),
            });
        }
        if let Some((a, b)) = self.domain {
            if !(a < b) {
                return Err(Error::InvalidParameter {
                    name: "domain",
                    reason: format!("empty interval [{a}, {b}]"),
                });
            }
        }
        self.trajectories.iter().try_for_each(Trajectory::validate)
    }

    pub fn total_charge(&self) -> f64 {
        self.charges.iter().sum()
    }

    pub fn is_neutral(&self) -> bool {
        self.total_charge().abs() < 1e-12
    }

    pub fn check_time(&self, t: f64) -> Result<()> {
        match self.domain {
            Some((start, end)) if t < start - 1e-12 || t > end + 1e-12 => {
                Err(Error::OutsideDomain { t, start, end })
            }
            _ => Ok(()),
        }
    }

    pub(crate) fn jets(&self, t: f64) -> Vec<Jet> {
        self.trajectories.iter().map(|tr| tr.jet(t)).collect()
    }

    /// Shortest motion time scale over all sources, `None` if all are at rest.
    pub fn time_scale(&self) -> Option<f64> {
        self.trajectories.iter().filter_map(Trajectory::time_scale).reduce(f64::min)
    }

    /// Smallest interval outside of which every source is at rest.
    pub fn motion_interval(&self) -> Option<(f64, f64)> {
        self.trajectories
            .iter()
            .filter_map(Trajectory::motion_interval)
            .reduce(|a, b| (a.0.min(b.0), a.1.max(b.1)))
    }

    /// Whether every source has vanishing derivatives of order 1..=4 at `t`.
    pub fn at_rest(&self, t: f64) -> bool {
        self.trajectories.iter().all(|tr| tr.at_rest(t))
    }

    /// Per-node radial prefactor `φ̂_σ(|k|)|k|^{-1/2}`, zero below the cutoff.
    pub fn kernel(&self, grid: &ModeGrid) -> Kernel {
        let sigma = grid.sigma_ir();
        let radial = grid
            .norms()
            .iter()
            .map(|&r| if r < sigma { 0.0 } else { form_factor(r, self.lambda) / r.sqrt() })
            .collect();
        let kappa = grid
            .nodes()
            .iter()
            .zip(grid.norms())
            .map(|(k, &r)| [k[0] / r, k[1] / r, k[2] / r])
            .collect();
        Kernel { radial, kappa, grid_id: grid.id() }
    }
}

/// Time-independent per-node factors shared by all coupling evaluations.
#[derive(Debug, Clone)]
pub struct Kernel {
    pub(crate) radial: Vec<f64>,
    pub(crate) kappa: Vec<[f64; 3]>,
    grid_id: u64,
}

impl Kernel {
    pub fn grid_id(&self) -> u64 {
        self.grid_id
    }

    /// Writes `v(x(t), k)` into `out`.
    pub(crate) fn v_into(&self, sys: &SourceSystem, grid: &ModeGrid, positions: &[[f64; 3]], out: &mut [C64]) {
        debug_assert_eq!(out.len(), grid.len());
        for (i, slot) in out.iter_mut().enumerate() {
            let rad = self.radial[i];
            if rad == 0.0 {
                *slot = C64::new(0.0, 0.0);
                continue;
            }
            let k = grid.nodes()[i];
            let mut acc = C64::new(0.0, 0.0);
            for (e, x) in sys.charges.iter().zip(positions) {
                let (s, c) = (k[0] * x[0] + k[1] * x[1] + k[2] * x[2]).sin_cos();
                acc += C64::new(c, s) * *e;
            }
            *slot = acc * rad;
        }
    }
}

/// Coupling functions on a grid at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Couplings {
    pub t: f64,
    pub v: Vec<C64>,
    pub z1: Vec<C64>,
    pub z2: Vec<C64>,
    pub z2dot: Vec<C64>,
    pub g_rad: Vec<C64>,
}

/// Evaluates all coupling arrays at time `t`.
pub fn couplings_at(sys: &SourceSystem, grid: &ModeGrid, t: f64) -> Result<Couplings> {
    sys.check_time(t)?;
    let kernel = sys.kernel(grid);
    Ok(couplings_with(sys, grid, &kernel, t))
}

pub(crate) fn couplings_with(sys: &SourceSystem, grid: &ModeGrid, kernel: &Kernel, t: f64) -> Couplings {
    let jets = sys.jets(t);
    let n = grid.len();
    let zero = C64::new(0.0, 0.0);
    let mut c = Couplings {
        t,
        v: vec![zero; n],
        z1: vec![zero; n],
        z2: vec![zero; n],
        z2dot: vec![zero; n],
        g_rad: vec![zero; n],
    };
    for i in 0..n {
        let rad = kernel.radial[i];
        if rad == 0.0 {
            continue;
        }
        let k = grid.nodes()[i];
        let r = grid.norms()[i];
        let kap = kernel.kappa[i];
        let mut v = zero;
        let mut vel = zero;
        let mut acc = zero;
        let mut vel2 = zero;
        for (e, jet) in sys.charges.iter().zip(&jets) {
            let x = jet[0];
            let (s, co) = (k[0] * x[0] + k[1] * x[1] + k[2] * x[2]).sin_cos();
            let pre = C64::new(co, s) * (*e * rad);
            let kv = dot(kap, jet[1]);
            let ka = dot(kap, jet[2]);
            v += pre;
            vel += pre * kv;
            acc += pre * ka;
            vel2 += pre * (kv * kv);
        }
        let i_unit = C64::new(0.0, 1.0);
        c.v[i] = v;
        c.z1[i] = -vel;
        c.z2[i] = i_unit * vel / r;
        c.g_rad[i] = acc / r;
        c.z2dot[i] = i_unit * acc / r - vel2;
    }
    c
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// E_σ(t) = −½ ∫ |v_σ|²/|k| dk on the grid.
pub fn ground_energy(sys: &SourceSystem, grid: &ModeGrid, t: f64) -> Result<f64> {
    sys.check_time(t)?;
    let kernel = sys.kernel(grid);
    let mut v = vec![C64::new(0.0, 0.0); grid.len()];
    kernel.v_into(sys, grid, &positions(sys, t), &mut v);
    Ok(ground_energy_of(grid, &v))
}

pub(crate) fn ground_energy_of(grid: &ModeGrid, v: &[C64]) -> f64 {
    -0.5 * v
        .iter()
        .zip(grid.weights())
        .zip(grid.norms())
        .map(|((v, &w), &r)| w * v.norm_sqr() / r)
        .sum::<f64>()
}

pub(crate) fn positions(sys: &SourceSystem, t: f64) -> Vec<[f64; 3]> {
    sys.trajectories.iter().map(|tr| tr.jet(t)[0]).collect()
}

/// Closed form of E for a single charge with the Gaussian form factor and
/// no cutoff: −e²√π/(8π²Λ).
pub fn single_charge_energy(charge: f64, lambda: f64) -> f64 {
    -charge * charge * PI.sqrt() / (8.0 * PI * PI * lambda)
}

/// Superadiabatic energy E^ε_σ and its pieces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DressedEnergy {
    pub epsilon: f64,
    pub e_sigma: f64,
    /// −(ε²/2) Im⟨z₂, z₁⟩ from the coupling inner product.
    pub quadratic_inner: f64,
    /// The same correction from the explicit pairwise double sum
    /// −(ε²/2) Σ_ij e_i e_j ∫ |φ̂|²/|k|² e^{−ik·(x_i−x_j)} (κ·ẋ_j)(κ·ẋ_i).
    pub quadratic_pairwise: f64,
    /// (ε³/2) Im⟨z₂, ż₂⟩.
    pub cubic: f64,
    /// The pairwise sum X itself (so that the quadratic term is −ε²X/2).
    pub velocity_form: f64,
}

impl DressedEnergy {
    /// E_σ − (ε²/2)Im⟨z₂,z₁⟩ + (ε³/2)Im⟨z₂,ż₂⟩.
    pub fn value(&self) -> f64 {
        self.e_sigma + self.quadratic_inner + self.cubic
    }

    /// Same without the ε³ term.
    pub fn second_order(&self) -> f64 {
        self.e_sigma + self.quadratic_inner
    }
}

pub fn dressed_energy(sys: &SourceSystem, grid: &ModeGrid, t: f64, epsilon: f64) -> Result<DressedEnergy> {
    sys.check_time(t)?;
    let kernel = sys.kernel(grid);
    let c = couplings_with(sys, grid, &kernel, t);
    Ok(dressed_energy_of(sys, grid, &kernel, &c, epsilon))
}

pub(crate) fn dressed_energy_of(
    sys: &SourceSystem,
    grid: &ModeGrid,
    kernel: &Kernel,
    c: &Couplings,
    epsilon: f64,
) -> DressedEnergy {
    let e_sigma = ground_energy_of(grid, &c.v);
    let im_z2_z1 = grid.inner_unchecked(&c.z2, &c.z1).im;
    let im_z2_z2dot = grid.inner_unchecked(&c.z2, &c.z2dot).im;
    let pair = velocity_pair_sum(sys, grid, kernel, c.t);
    let e2 = epsilon * epsilon;
    DressedEnergy {
        epsilon,
        e_sigma,
        quadratic_inner: -0.5 * e2 * im_z2_z1,
        quadratic_pairwise: -0.5 * e2 * pair,
        cubic: 0.5 * e2 * epsilon * im_z2_z2dot,
        velocity_form: pair,
    }
}

/// Σ_ij e_i e_j ∫ dk |φ̂_σ|²/|k|² e^{−ik·(x_i−x_j)} (κ·ẋ_j)(κ·ẋ_i), one
/// quadrature per source pair.
pub(crate) fn velocity_pair_sum(sys: &SourceSystem, grid: &ModeGrid, kernel: &Kernel, t: f64) -> f64 {
    let jets = sys.jets(t);
    let mut total = C64::new(0.0, 0.0);
    for (ei, ji) in sys.charges.iter().zip(&jets) {
        for (ej, jj) in sys.charges.iter().zip(&jets) {
            let d = [ji[0][0] - jj[0][0], ji[0][1] - jj[0][1], ji[0][2] - jj[0][2]];
            let mut pair = C64::new(0.0, 0.0);
            for n in 0..grid.len() {
                let rad = kernel.radial[n];
                if rad == 0.0 {
                    continue;
                }
                let r = grid.norms()[n];
                let k = grid.nodes()[n];
                let kap = kernel.kappa[n];
                // rad² / r² = |φ̂|² / |k|³, times |k| from the weight split.
                let amp = rad * rad / r * dot(kap, jj[1]) * dot(kap, ji[1]);
                let (s, co) = (-(k[0] * d[0] + k[1] * d[1] + k[2] * d[2])).sin_cos();
                pair += C64::new(co, s) * (amp * grid.weights()[n]);
            }
            total += pair * (ei * ej);
        }
    }
    total.re
}

/// d̈(t) = Σ e_j ẍ_j(t).
pub fn dipole_ddot(sys: &SourceSystem, t: f64) -> Result<[f64; 3]> {
    sys.check_time(t)?;
    let mut d = [0.0; 3];
    for (e, tr) in sys.charges.iter().zip(&sys.trajectories) {
        let a = tr.jet(t)[2];
        for c in 0..3 {
            d[c] += e * a[c];
        }
    }
    Ok(d)
}
