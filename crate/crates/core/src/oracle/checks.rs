//! Convention-pinning comparisons between the coherent-state calculus and
//! the truncated Fock representation, packaged as pass/fail records.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::*;
use crate::coherent::{overlap, sector_prob, weyl_apply, WeylGenerator};
use crate::evolve::{adiabatic_state, evolve_exact, SigmaRule};
use crate::model::couplings_at;
use crate::trajectory::Trajectory;

/// Worst acceptable `|1 − ⟨ψ_coherent, ψ_fock⟩|` after evolution.
pub const EVOLUTION_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCheck {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl OracleCheck {
    fn new(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, threshold, pass: value <= threshold }
    }
}

/// Three modes with unequal weights and directions.
pub fn reference_modes() -> ModeGrid {
    ModeGrid::from_modes(
        vec![[0.8, 0.0, 0.2], [0.0, 1.1, -0.3], [0.3, -0.4, 1.3]],
        vec![0.9, 1.2, 0.7],
        0.0,
    )
    .expect("reference modes are valid")
}

/// A strongly coupled charge that moves on `[0, 1]` and rests otherwise.
pub fn reference_system() -> SourceSystem {
    let tr = Trajectory::SmoothstepTranslation {
        start: [-0.3, 0.1, 0.0],
        displacement: [0.6, -0.2, 0.4],
        t_start: 0.0,
        duration: 1.0,
    };
    SourceSystem::new(vec![10.0], 1.0, vec![tr]).expect("reference system is valid")
}

/// Panel layout of the evolution comparison.
pub fn reference_params(epsilon: f64) -> EvolutionParams {
    EvolutionParams { epsilon, t0: -0.25, t1: 1.25, step_count: 96, sigma_rule: SigmaRule::Fixed { sigma: 0.0 } }
}

/// Largest `|1 − ⟨embed(coherent), fock⟩|` over the panel boundaries.
pub fn evolution_mismatch(space: &TruncatedFockSpace, sys: &SourceSystem, grid: &ModeGrid, params: &EvolutionParams) -> Result<f64> {
    let init = adiabatic_state(sys, grid, params.t0, 0.7)?;
    let fock = integrate_schrodinger(space, sys, grid, params, &coherent_embed(space, &init)?.vector)?;
    let coh = evolve_exact(&init, sys, grid, params)?;
    let mut worst: f64 = 0.0;
    for (cs, fs) in coh.states.iter().zip(&fock.states) {
        let emb = coherent_embed(space, cs)?.vector;
        worst = worst.max((C64::new(1.0, 0.0) - fidelity(&emb, fs)).norm());
    }
    Ok(worst)
}

/// Runs the whole suite on the reference modes.
pub fn convention_checks(n_max: usize, epsilons: &[f64]) -> Result<Vec<OracleCheck>> {
    let g = reference_modes();
    let s = TruncatedFockSpace::new(&g, n_max)?;
    let sys = reference_system();
    let mut out = Vec::new();

    // e^{±iΦ(f)} against W(±if/√2).
    let f = vec![C64::new(0.3, -0.2), C64::new(-0.1, 0.4), C64::new(0.25, 0.15)];
    let base = CoherentState::new(&g, vec![C64::new(0.1, 0.2), C64::new(-0.2, 0.05), C64::new(0.0, -0.15)], 0.3)?;
    let start = coherent_embed(&s, &base)?.vector;
    let mut worst: f64 = 0.0;
    for sign in [1i8, -1] {
        let fock = exp_apply(&field_operator(&s, &f), C64::new(0.0, sign as f64), &start);
        let coh = weyl_apply(&g, &base, &WeylGenerator::new(f.clone(), "f"), sign)?;
        let emb = coherent_embed(&s, &coh)?.vector;
        worst = worst.max((C64::new(1.0, 0.0) - fidelity(&emb, &fock)).norm());
    }
    out.push(OracleCheck::new("weyl_sign", worst, 1e-9));

    // Ground state of H_f + Φ(v) is V_σ* Ω₀ with energy −½ Σ w |v|²/|k|.
    let t = 0.5;
    let ops = build_operators(&s, &sys, &g, t)?;
    let eig = ops.hamiltonian_dense().symmetric_eigen();
    let (imin, emin) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &e)| if e < acc.1 { (i, e) } else { acc });
    let v = couplings_at(&sys, &g, t)?.v;
    let closed: f64 = -0.5 * v.iter().zip(g.weights()).zip(g.norms()).map(|((z, w), r)| w * z.norm_sqr() / r).sum::<f64>();
    out.push(OracleCheck::new("ground_energy", (emin - closed).abs(), 1e-6));
    let ground: Vec<C64> = eig.eigenvectors.column(imin).iter().cloned().collect();
    let coh = coherent_embed(&s, &adiabatic_state(&sys, &g, t, 0.0)?)?.vector;
    out.push(OracleCheck::new("ground_state_vector", 1.0 - fidelity(&coh, &ground).norm(), 1e-9));

    // ‖α‖² = 1: P₀ = P₁ = e^{-1}; ‖α − β‖² = 2: |⟨α, β⟩| = e^{-1}.
    let inv_e = (-1.0f64).exp();
    let one = CoherentState::new(&g, vec![C64::new(1.0 / 0.9f64.sqrt(), 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)], 0.0)?;
    let e1 = coherent_embed(&s, &one)?.vector;
    let sector = [0, 1]
        .iter()
        .map(|&m| {
            let fock = (sector_population(&s, &e1, m) - inv_e).abs();
            let coh = (sector_prob(&g, &one, m).unwrap_or(f64::NAN) - inv_e).abs();
            fock.max(coh)
        })
        .fold(0.0, f64::max);
    out.push(OracleCheck::new("sector_prob_e_inverse", sector, 1e-10));
    let far = CoherentState::new(&g, one.amplitude().iter().map(|z| z * (1.0 - std::f64::consts::SQRT_2)).collect(), 0.4)?;
    let ef = coherent_embed(&s, &far)?.vector;
    let fock_ov = fidelity(&e1, &ef);
    let coh_ov = overlap(&g, &one, &far)?;
    let ov = (fock_ov.norm() - inv_e).abs().max((fock_ov - coh_ov).norm());
    out.push(OracleCheck::new("overlap_e_inverse", ov, 1e-10));

    for &eps in epsilons {
        let worst = evolution_mismatch(&s, &sys, &g, &reference_params(eps))?;
        out.push(OracleCheck::new(format!("evolution_eps_{eps}"), worst, EVOLUTION_THRESHOLD));
    }
    Ok(out)
}
