//! Coherent states `e^{iθ} W(α) Ω₀` with an explicitly tracked phase.
//!
//! `W(β) = exp(a†(β) − a(β))` composes as `W(β)W(α) = e^{−i Im⟨β,α⟩} W(α+β)`,
//! and `e^{±iΦ(f)} = W(±i f/√2)`.

use num_complex::Complex64 as C64;
use serde::Serialize;
use std::f64::consts::SQRT_2;

use crate::error::{Error, Result};
use crate::grid::ModeGrid;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoherentState {
    amplitude: Vec<C64>,
    phase: f64,
    grid_id: u64,
}

/// Exponent `f` of a field-operator exponential `e^{±iΦ(f)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeylGenerator {
    pub f: Vec<C64>,
    pub tag: String,
}

impl WeylGenerator {
    pub fn new(f: Vec<C64>, tag: impl Into<String>) -> Self {
        Self { f, tag: tag.into() }
    }

    pub fn negated(&self) -> Self {
        Self { f: self.f.iter().map(|z| -z).collect(), tag: format!("-{}", self.tag) }
    }
}

impl CoherentState {
    pub fn vacuum(grid: &ModeGrid) -> Self {
        Self { amplitude: vec![C64::new(0.0, 0.0); grid.len()], phase: 0.0, grid_id: grid.id() }
    }

    pub fn new(grid: &ModeGrid, amplitude: Vec<C64>, phase: f64) -> Result<Self> {
        if amplitude.len() != grid.len() {
            return Err(Error::LengthMismatch { expected: grid.len(), got: amplitude.len() });
        }
        if !phase.is_finite() || amplitude.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidParameter { name: "amplitude", reason: "non-finite value".into() });
        }
        Ok(Self { amplitude, phase, grid_id: grid.id() })
    }

    pub(crate) fn from_parts(grid_id: u64, amplitude: Vec<C64>, phase: f64) -> Self {
        Self { amplitude, phase, grid_id }
    }

    pub fn amplitude(&self) -> &[C64] {
        &self.amplitude
    }

    /// Unwrapped phase θ; only θ mod 2π is physical.
    pub fn phase(&self) -> f64 {
        self.phase
    }

    pub fn grid_id(&self) -> u64 {
        self.grid_id
    }

    pub fn with_phase(mut self, phase: f64) -> Self {
        self.phase = phase;
        self
    }

    pub fn add_phase(mut self, delta: f64) -> Self {
        self.phase += delta;
        self
    }

    fn check(&self, grid: &ModeGrid) -> Result<()> {
        if self.grid_id != grid.id() || self.amplitude.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }
}

/// Applies `W(β)` to `state`.
pub fn displace(grid: &ModeGrid, state: &CoherentState, beta: &[C64]) -> Result<CoherentState> {
    state.check(grid)?;
    if beta.len() != grid.len() {
        return Err(Error::LengthMismatch { expected: grid.len(), got: beta.len() });
    }
    Ok(displace_unchecked(grid, state, beta))
}

pub(crate) fn displace_unchecked(grid: &ModeGrid, state: &CoherentState, beta: &[C64]) -> CoherentState {
    let dphase = -grid.inner_unchecked(beta, &state.amplitude).im;
    let amplitude = state.amplitude.iter().zip(beta).map(|(a, b)| a + b).collect();
    CoherentState { amplitude, phase: state.phase + dphase, grid_id: state.grid_id }
}

/// Applies `e^{sign·iΦ(f)}` to `state`.
pub fn weyl_apply(grid: &ModeGrid, state: &CoherentState, gen: &WeylGenerator, sign: i8) -> Result<CoherentState> {
    let s = match sign {
        1 => 1.0,
        -1 => -1.0,
        _ => {
            return Err(Error::InvalidParameter { name: "sign", reason: format!("must be ±1, got {sign}") });
        }
    };
    let scale = C64::new(0.0, s / SQRT_2);
    let beta: Vec<C64> = gen.f.iter().map(|f| scale * f).collect();
    displace(grid, state, &beta)
}

/// `⟨a, b⟩ = e^{i(θ_b−θ_a)} exp(−½‖α‖² − ½‖β‖² + ⟨α,β⟩)`.
pub fn overlap(grid: &ModeGrid, a: &CoherentState, b: &CoherentState) -> Result<C64> {
    a.check(grid)?;
    b.check(grid)?;
    Ok(overlap_unchecked(grid, a, b))
}

pub(crate) fn overlap_unchecked(grid: &ModeGrid, a: &CoherentState, b: &CoherentState) -> C64 {
    // Written via ‖α−β‖² to avoid cancellation between large norms.
    let mut diff = 0.0;
    let mut cross_im = 0.0;
    for ((x, y), &w) in a.amplitude.iter().zip(&b.amplitude).zip(grid.weights()) {
        diff += w * (x - y).norm_sqr();
        cross_im += w * (x.re * y.im - x.im * y.re);
    }
    let exponent = C64::new(-0.5 * diff, cross_im + b.phase - a.phase);
    exponent.exp()
}

/// `√(2 − 2 Re⟨a,b⟩)`.
pub fn state_distance(grid: &ModeGrid, a: &CoherentState, b: &CoherentState) -> Result<f64> {
    Ok(distance_from_overlap(overlap(grid, a, b)?))
}

pub(crate) fn distance_from_overlap(ov: C64) -> f64 {
    // 2 − 2Re(ov) = |1 − ov|² + (1 − |ov|²), both nonnegative and accurate.
    ((1.0 - ov).norm_sqr() + (1.0 - ov.norm_sqr()).max(0.0)).sqrt()
}

/// `∫ |k| |α(k)|² dk`.
pub fn field_energy(grid: &ModeGrid, state: &CoherentState) -> Result<f64> {
    state.check(grid)?;
    Ok(grid.energy_unchecked(&state.amplitude))
}

/// `‖α‖²`.
pub fn photon_number(grid: &ModeGrid, state: &CoherentState) -> Result<f64> {
    state.check(grid)?;
    Ok(grid.norm_sqr_unchecked(&state.amplitude))
}

/// Probability of exactly `m` bosons: `e^{−n} n^m / m!` with `n = ‖α‖²`.
pub fn sector_prob(grid: &ModeGrid, state: &CoherentState, m: usize) -> Result<f64> {
    Ok(poisson(photon_number(grid, state)?, m))
}

pub(crate) fn poisson(n: f64, m: usize) -> f64 {
    if n == 0.0 {
        return if m == 0 { 1.0 } else { 0.0 };
    }
    let log_fact: f64 = (1..=m).map(|j| (j as f64).ln()).sum();
    (-n + m as f64 * n.ln() - log_fact).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::RadialLayout;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_grid() -> ModeGrid {
        ModeGrid::build(0.1, 4.0, 6, 8, RadialLayout::Linear).unwrap()
    }

    fn random_amp(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<C64> {
        (0..n).map(|_| C64::new(rng.gen_range(-scale..scale), rng.gen_range(-scale..scale))).collect()
    }

    fn random_state(rng: &mut ChaCha8Rng, g: &ModeGrid, scale: f64) -> CoherentState {
        let amp = random_amp(rng, g.len(), scale);
        CoherentState::new(g, amp, rng.gen_range(-3.0..3.0)).unwrap()
    }

    /// Rescales an amplitude so that `‖α‖² = target`.
    fn with_norm(g: &ModeGrid, mut amp: Vec<C64>, target: f64) -> Vec<C64> {
        let n = g.norm_sqr(&amp).unwrap();
        let s = (target / n).sqrt();
        amp.iter_mut().for_each(|z| *z *= s);
        amp
    }

    #[test]
    fn self_overlap_is_one() {
        let g = small_grid();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_state(&mut rng, &g, 0.5);
        assert_eq!(overlap(&g, &a, &a).unwrap(), C64::new(1.0, 0.0));
        assert_eq!(state_distance(&g, &a, &a).unwrap(), 0.0);
    }

    #[test]
    fn vacuum_overlap_value() {
        let g = small_grid();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let amp = with_norm(&g, random_amp(&mut rng, g.len(), 1.0), 2.0);
        let b = CoherentState::new(&g, amp, 0.0).unwrap();
        let ov = overlap(&g, &CoherentState::vacuum(&g), &b).unwrap();
        assert!((ov - C64::new((-1.0f64).exp(), 0.0)).norm() < 1e-14);
    }

    #[test]
    fn antipodal_phase_distance() {
        let g = small_grid();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_state(&mut rng, &g, 0.4);
        let b = a.clone().add_phase(std::f64::consts::PI);
        assert!((state_distance(&g, &a, &b).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn orthogonal_generator_adds_no_phase() {
        let g = small_grid();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let amp = random_amp(&mut rng, g.len(), 0.5);
        let state = CoherentState::new(&g, amp.clone(), 0.3).unwrap();
        // β = i f/√2 = c·α with c real gives Im⟨β,α⟩ = 0.
        let f: Vec<C64> = amp.iter().map(|a| a * C64::new(0.0, -0.7 * SQRT_2)).collect();
        let out = weyl_apply(&g, &state, &WeylGenerator::new(f, "parallel"), 1).unwrap();
        assert!((out.phase() - 0.3).abs() < 1e-15);
        for (o, a) in out.amplitude().iter().zip(&amp) {
            assert!((o - a * 1.7).norm() < 1e-14);
        }
    }

    #[test]
    fn vacuum_displacement_amplitude() {
        let g = small_grid();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = random_amp(&mut rng, g.len(), 1.0);
        // e^{−iΦ(i h)} Ω₀ = W(h/√2) Ω₀.
        let f: Vec<C64> = h.iter().map(|z| z * C64::new(0.0, 1.0)).collect();
        let out = weyl_apply(&g, &CoherentState::vacuum(&g), &WeylGenerator::new(f, "ih"), -1).unwrap();
        for (o, z) in out.amplitude().iter().zip(&h) {
            assert!((o - z / SQRT_2).norm() < 1e-15);
        }
        assert_eq!(out.phase(), 0.0);
    }

    #[test]
    fn sign_must_be_unit() {
        let g = small_grid();
        let gen = WeylGenerator::new(vec![C64::new(0.0, 0.0); g.len()], "zero");
        assert!(weyl_apply(&g, &CoherentState::vacuum(&g), &gen, 0).is_err());
    }

    #[test]
    fn grid_mismatch_rejected() {
        let g = small_grid();
        let h = ModeGrid::build(0.1, 5.0, 6, 8, RadialLayout::Linear).unwrap();
        let a = CoherentState::vacuum(&g);
        let b = CoherentState::vacuum(&h);
        assert_eq!(overlap(&g, &a, &b), Err(Error::GridMismatch));
        assert_eq!(field_energy(&h, &a), Err(Error::GridMismatch));
        let gen = WeylGenerator::new(vec![C64::new(0.0, 0.0); g.len()], "zero");
        assert_eq!(weyl_apply(&h, &a, &gen, 1), Err(Error::GridMismatch));
    }

    #[test]
    fn vacuum_observables() {
        let g = small_grid();
        let v = CoherentState::vacuum(&g);
        assert_eq!(field_energy(&g, &v).unwrap(), 0.0);
        assert_eq!(photon_number(&g, &v).unwrap(), 0.0);
        assert_eq!(sector_prob(&g, &v, 0).unwrap(), 1.0);
        assert_eq!(sector_prob(&g, &v, 3).unwrap(), 0.0);
    }

    #[test]
    fn shell_supported_amplitude_has_unit_energy() {
        let g = ModeGrid::build(0.0, 3.0, 120, 32, RadialLayout::Linear).unwrap();
        let amp: Vec<C64> = g
            .norms()
            .iter()
            .map(|&r| C64::new((-(r - 1.0).powi(2) / (2.0 * 0.01f64.powi(2))).exp(), 0.0))
            .collect();
        let amp = with_norm(&g, amp, 1.0);
        let s = CoherentState::new(&g, amp, 0.0).unwrap();
        let e = field_energy(&g, &s).unwrap();
        assert!((e - 1.0).abs() < 1e-3, "{e}");
    }

    #[test]
    fn poisson_values() {
        assert!((poisson(1.0, 0) - (-1.0f64).exp()).abs() < 1e-16);
        assert!((poisson(2.0, 3) - (-2.0f64).exp() * 8.0 / 6.0).abs() < 1e-15);
        for n in [0.1, 1.0, 2.5, 4.0] {
            let total: f64 = (0..=40).map(|m| poisson(n, m)).sum();
            assert!((total - 1.0).abs() < 1e-10);
        }
    }

    fn amp_strategy(n: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n)
    }

    fn to_c(v: &[(f64, f64)]) -> Vec<C64> {
        v.iter().map(|&(a, b)| C64::new(a, b)).collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn overlap_bounded_and_distance_consistent(
            a in amp_strategy(48), b in amp_strategy(48), pa in -4.0f64..4.0, pb in -4.0f64..4.0
        ) {
            let g = small_grid();
            let sa = CoherentState::new(&g, to_c(&a), pa).unwrap();
            let sb = CoherentState::new(&g, to_c(&b), pb).unwrap();
            let ov = overlap(&g, &sa, &sb).unwrap();
            prop_assert!(ov.norm() <= 1.0 + 1e-15);
            let d = state_distance(&g, &sa, &sb).unwrap();
            prop_assert!((d * d - (2.0 - 2.0 * ov.re)).abs() < 1e-12);
            let back = overlap(&g, &sb, &sa).unwrap();
            prop_assert!((back - ov.conj()).norm() < 1e-14);
        }

        #[test]
        fn triangle_inequality(a in amp_strategy(48), b in amp_strategy(48), c in amp_strategy(48), p in -3.0f64..3.0) {
            let g = small_grid();
            let sa = CoherentState::new(&g, to_c(&a), 0.0).unwrap();
            let sb = CoherentState::new(&g, to_c(&b), p).unwrap();
            let sc = CoherentState::new(&g, to_c(&c), -p).unwrap();
            let ab = state_distance(&g, &sa, &sb).unwrap();
            let bc = state_distance(&g, &sb, &sc).unwrap();
            let ac = state_distance(&g, &sa, &sc).unwrap();
            prop_assert!(ac <= ab + bc + 1e-12);
        }

        #[test]
        fn generator_then_inverse_is_identity(a in amp_strategy(48), f in amp_strategy(48), p in -3.0f64..3.0) {
            let g = small_grid();
            let s = CoherentState::new(&g, to_c(&a), p).unwrap();
            let gen = WeylGenerator::new(to_c(&f), "f");
            let there = weyl_apply(&g, &s, &gen, 1).unwrap();
            let back = weyl_apply(&g, &there, &gen, -1).unwrap();
            prop_assert!((back.phase() - p).abs() < 1e-12);
            for (x, y) in back.amplitude().iter().zip(s.amplitude()) {
                prop_assert!((x - y).norm() < 1e-12);
            }
            let back2 = weyl_apply(&g, &there, &gen.negated(), 1).unwrap();
            prop_assert_eq!(back, back2);
        }

        #[test]
        fn composition_law(a in amp_strategy(48), f in amp_strategy(48), h in amp_strategy(48)) {
            let g = small_grid();
            let s = CoherentState::new(&g, to_c(&a), 0.2).unwrap();
            let (f, h) = (to_c(&f), to_c(&h));
            let sum: Vec<C64> = f.iter().zip(&h).map(|(x, y)| x + y).collect();
            let seq = weyl_apply(&g, &weyl_apply(&g, &s, &WeylGenerator::new(f.clone(), "f"), 1).unwrap(),
                                 &WeylGenerator::new(h.clone(), "h"), 1).unwrap();
            let joint = weyl_apply(&g, &s, &WeylGenerator::new(sum, "f+h"), 1).unwrap();
            // e^{iΦ(h)}e^{iΦ(f)} = e^{−(i/2) Im⟨h,f⟩} e^{iΦ(f+h)}.
            let ccr = -0.5 * g.inner(&h, &f).unwrap().im;
            let joint = joint.add_phase(ccr);
            prop_assert!(state_distance(&g, &seq, &joint).unwrap() <= 1e-12);
        }

        #[test]
        fn observables_scale_quadratically(a in amp_strategy(48), c in 0.1f64..3.0) {
            let g = small_grid();
            let s = CoherentState::new(&g, to_c(&a), 0.0).unwrap();
            let scaled = CoherentState::new(&g, s.amplitude().iter().map(|z| z * c).collect(), 1.0).unwrap();
            let (e0, e1) = (field_energy(&g, &s).unwrap(), field_energy(&g, &scaled).unwrap());
            let (n0, n1) = (photon_number(&g, &s).unwrap(), photon_number(&g, &scaled).unwrap());
            prop_assert!((e1 - c * c * e0).abs() <= 1e-12 * e1.max(1.0));
            prop_assert!((n1 - c * c * n0).abs() <= 1e-12 * n1.max(1.0));
        }

        #[test]
        fn observables_ignore_global_phase(a in amp_strategy(48), p in -6.0f64..6.0, m in 0usize..6) {
            let g = small_grid();
            let s = CoherentState::new(&g, to_c(&a), 0.0).unwrap();
            let t = s.clone().add_phase(p);
            prop_assert_eq!(field_energy(&g, &s).unwrap(), field_energy(&g, &t).unwrap());
            prop_assert_eq!(sector_prob(&g, &s, m).unwrap(), sector_prob(&g, &t, m).unwrap());
        }
    }
}
