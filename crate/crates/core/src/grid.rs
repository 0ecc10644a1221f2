//! Product quadrature on momentum space: composite Gauss–Legendre in |k|
//! times Gauss–Legendre in cos θ times the trapezoid rule in azimuth.

use std::collections::hash_map::DefaultHasher;
use std::f64::consts::PI;
use std::hash::{Hash, Hasher};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre, gauss_legendre_on};

/// Inner radius used by the log layout when no infrared cutoff is set,
/// relative to `k_max`.
pub const LOG_FLOOR_FRACTION: f64 = 1e-6;

/// Gauss–Legendre order of each radial panel.
const RADIAL_PANEL_ORDER: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RadialLayout {
    Log,
    Linear,
}

/// Parameters a grid is rebuilt from. Node arrays are never serialized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub sigma_ir: f64,
    pub k_max: f64,
    pub radial_count: usize,
    pub angular_count: usize,
    pub layout: RadialLayout,
}

impl GridSpec {
    pub fn build(&self) -> Result<ModeGrid> {
        ModeGrid::build(
            self.sigma_ir,
            self.k_max,
            self.radial_count,
            self.angular_count,
            self.layout,
        )
    }

    pub fn with_sigma(mut self, sigma_ir: f64) -> Self {
        self.sigma_ir = sigma_ir;
        self
    }
}

/// Quadrature discretization of momentum space with an infrared cutoff.
///
/// Every node satisfies `sigma_ir <= |k| <= k_max` and carries a strictly
/// positive weight approximating the measure d³k.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeGrid {
    nodes: Vec<[f64; 3]>,
    norms: Vec<f64>,
    weights: Vec<f64>,
    sigma_ir: f64,
    k_max: f64,
    radial_count: usize,
    angular_count: usize,
    id: u64,
}

impl ModeGrid {
    /// Builds the product rule.
    ///
    /// `angular_count` is the total number of directions per shell. It is
    /// split as `polar × azimuthal` where the polar count is the largest
    /// divisor not exceeding `sqrt(angular_count / 2)`.
    pub fn build(
        sigma_ir: f64,
        k_max: f64,
        radial_count: usize,
        angular_count: usize,
        layout: RadialLayout,
    ) -> Result<Self> {
        if !(sigma_ir.is_finite() && sigma_ir >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "sigma_ir",
                reason: format!("must be finite and nonnegative, got {sigma_ir}"),
            });
        }
        if !(k_max.is_finite() && k_max > 0.0) {
            return Err(Error::InvalidParameter {
                name: "k_max",
                reason: format!("must be finite and positive, got {k_max}"),
            });
        }
        if sigma_ir >= k_max {
            return Err(Error::EmptyShell { sigma: sigma_ir, k_max });
        }
        if radial_count == 0 {
            return Err(Error::ZeroCount { what: "radial_count" });
        }
        if angular_count == 0 {
            return Err(Error::ZeroCount { what: "angular_count" });
        }

        let (radii, radial_weights) = radial_rule(sigma_ir, k_max, radial_count, layout);
        let directions = angular_rule(angular_count);

        let n = radii.len() * directions.len();
        let mut nodes = Vec::with_capacity(n);
        let mut norms = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for (&r, &wr) in radii.iter().zip(&radial_weights) {
            for &(dir, wa) in &directions {
                nodes.push([r * dir[0], r * dir[1], r * dir[2]]);
                norms.push(r);
                weights.push(wr * r * r * wa);
            }
        }
        Ok(Self::assemble(nodes, norms, weights, sigma_ir, k_max, radial_count, angular_count))
    }

    /// A grid from an explicit mode list, used for few-mode comparisons
    /// against the truncated Fock representation.
    pub fn from_modes(nodes: Vec<[f64; 3]>, weights: Vec<f64>, sigma_ir: f64) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::ZeroCount { what: "mode count" });
        }
        if nodes.len() != weights.len() {
            return Err(Error::LengthMismatch { expected: nodes.len(), got: weights.len() });
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::InvalidParameter {
                name: "weights",
                reason: format!("weights must be positive, got {w}"),
            });
        }
        let norms: Vec<f64> = nodes.iter().map(|k| norm3(*k)).collect();
        if norms.iter().any(|&r| r == 0.0) {
            return Err(Error::InvalidParameter {
                name: "nodes",
                reason: "a mode at |k| = 0 has no defined frequency".into(),
            });
        }
        let k_max = norms.iter().cloned().fold(0.0, f64::max);
        let count = nodes.len();
        Ok(Self::assemble(nodes, norms, weights, sigma_ir, k_max, count, 1))
    }

    fn assemble(
        nodes: Vec<[f64; 3]>,
        norms: Vec<f64>,
        weights: Vec<f64>,
        sigma_ir: f64,
        k_max: f64,
        radial_count: usize,
        angular_count: usize,
    ) -> Self {
        let mut h = DefaultHasher::new();
        for (k, w) in nodes.iter().zip(&weights) {
            k.iter().for_each(|c| c.to_bits().hash(&mut h));
            w.to_bits().hash(&mut h);
        }
        sigma_ir.to_bits().hash(&mut h);
        let id = h.finish();
        Self { nodes, norms, weights, sigma_ir, k_max, radial_count, angular_count, id }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[[f64; 3]] {
        &self.nodes
    }

    /// |k| per node.
    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn sigma_ir(&self) -> f64 {
        self.sigma_ir
    }

    pub fn k_max(&self) -> f64 {
        self.k_max
    }

    pub fn radial_count(&self) -> usize {
        self.radial_count
    }

    pub fn angular_count(&self) -> usize {
        self.angular_count
    }

    /// Identity used to refuse mixing states from different grids.
    pub fn id(&self) -> u64 {
        self.id
    }

    /// Analytic shell volume (4π/3)(k_max³ − σ³).
    pub fn shell_volume(&self) -> f64 {
        4.0 * PI / 3.0 * (self.k_max.powi(3) - self.sigma_ir.powi(3))
    }

    /// Samples `f` at every node.
    pub fn sample<F: Fn([f64; 3]) -> C64>(&self, f: F) -> Vec<C64> {
        self.nodes.iter().map(|&k| f(k)).collect()
    }

    fn check_len(&self, got: usize) -> Result<()> {
        if got == self.len() {
            Ok(())
        } else {
            Err(Error::LengthMismatch { expected: self.len(), got })
        }
    }

    /// Σ wᵢ f(kᵢ).
    pub fn integrate(&self, f: &[C64]) -> Result<C64> {
        self.check_len(f.len())?;
        Ok(f.iter().zip(&self.weights).map(|(v, &w)| v * w).sum())
    }

    pub fn integrate_real(&self, f: &[f64]) -> Result<f64> {
        self.check_len(f.len())?;
        Ok(f.iter().zip(&self.weights).map(|(v, &w)| v * w).sum())
    }

    /// ⟨f, g⟩ = Σ wᵢ conj(fᵢ) gᵢ, antilinear in the first slot.
    pub fn inner(&self, f: &[C64], g: &[C64]) -> Result<C64> {
        self.check_len(f.len())?;
        self.check_len(g.len())?;
        Ok(self.inner_unchecked(f, g))
    }

    pub(crate) fn inner_unchecked(&self, f: &[C64], g: &[C64]) -> C64 {
        debug_assert!(f.len() == self.len() && g.len() == self.len());
        f.iter()
            .zip(g)
            .zip(&self.weights)
            .map(|((a, b), &w)| a.conj() * b * w)
            .sum()
    }

    /// ‖f‖² on the grid.
    pub fn norm_sqr(&self, f: &[C64]) -> Result<f64> {
        self.check_len(f.len())?;
        Ok(self.norm_sqr_unchecked(f))
    }

    pub(crate) fn norm_sqr_unchecked(&self, f: &[C64]) -> f64 {
        f.iter().zip(&self.weights).map(|(a, &w)| a.norm_sqr() * w).sum()
    }

    /// ∫ |k| |f|² dk.
    pub(crate) fn energy_unchecked(&self, f: &[C64]) -> f64 {
        f.iter()
            .zip(&self.weights)
            .zip(&self.norms)
            .map(|((a, &w), &r)| a.norm_sqr() * w * r)
            .sum()
    }
}

pub(crate) fn norm3(k: [f64; 3]) -> f64 {
    (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt()
}

fn radial_rule(sigma: f64, k_max: f64, count: usize, layout: RadialLayout) -> (Vec<f64>, Vec<f64>) {
    let order = RADIAL_PANEL_ORDER.min(count);
    let panels = count.div_ceil(order);
    let inner = match layout {
        RadialLayout::Log if sigma == 0.0 => k_max * LOG_FLOOR_FRACTION,
        _ => sigma,
    };
    let edges: Vec<f64> = (0..=panels)
        .map(|i| {
            let u = i as f64 / panels as f64;
            match layout {
                RadialLayout::Log => inner * (k_max / inner).powf(u),
                RadialLayout::Linear => inner + (k_max - inner) * u,
            }
        })
        .collect();

    // Spread `count` nodes over the panels as evenly as possible.
    let mut radii = Vec::with_capacity(count);
    let mut weights = Vec::with_capacity(count);
    for p in 0..panels {
        let n = count / panels + usize::from(p < count % panels);
        let (x, w) = gauss_legendre_on(n, edges[p], edges[p + 1]);
        radii.extend(x);
        weights.extend(w);
    }
    (radii, weights)
}

fn split_angular(count: usize) -> (usize, usize) {
    let target = (count as f64 / 2.0).sqrt();
    let polar = (1..=count)
        .filter(|d| count % d == 0 && (*d as f64) <= target + 1e-12)
        .max()
        .unwrap_or(1);
    (polar, count / polar)
}

fn angular_rule(count: usize) -> Vec<([f64; 3], f64)> {
    let (polar, azimuthal) = split_angular(count);
    let (cos_nodes, cos_weights) = gauss_legendre(polar);
    let dphi = 2.0 * PI / azimuthal as f64;
    let mut out = Vec::with_capacity(count);
    for (&c, &wc) in cos_nodes.iter().zip(&cos_weights) {
        let s = (1.0 - c * c).max(0.0).sqrt();
        for j in 0..azimuthal {
            let phi = (j as f64 + 0.5) * dphi;
            out.push(([s * phi.cos(), s * phi.sin(), c], wc * dphi));
        }
    }
    out
}
