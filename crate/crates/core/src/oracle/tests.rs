use super::*;
use crate::coherent::{overlap, sector_prob, weyl_apply, WeylGenerator};
use crate::evolve::{adiabatic_state, evolve_exact, SigmaRule};
use crate::model::{couplings_at, ground_energy};
use crate::trajectory::Trajectory;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn modes() -> ModeGrid {
    reference_modes()
}

fn moving_charge() -> SourceSystem {
    reference_system()
}

fn params(eps: f64) -> EvolutionParams {
    reference_params(eps)
}

fn random_amplitude(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<C64> {
    (0..n).map(|_| C64::new(rng.gen_range(-scale..scale), rng.gen_range(-scale..scale))).collect()
}

fn weyl_operator(space: &TruncatedFockSpace, alpha: &[C64], psi: &[C64]) -> Vec<C64> {
    // W(α) = exp(iΦ(-√2 i α)).
    let f: Vec<C64> = alpha.iter().map(|a| a * C64::new(0.0, -SQRT_2)).collect();
    exp_apply(&field_operator(space, &f), C64::new(0.0, 1.0), psi)
}

fn normalized(mut v: Vec<C64>) -> Vec<C64> {
    let n = fidelity(&v, &v).re.sqrt();
    v.iter_mut().for_each(|z| *z /= n);
    v
}

#[test]
fn basis_size_and_order() {
    let g = modes();
    for n_max in [1, 4, 14] {
        let s = TruncatedFockSpace::new(&g, n_max).unwrap();
        let binom = (1..=3).fold(1usize, |acc, i| acc * (n_max + i) / i);
        assert_eq!(s.dim(), binom);
        assert_eq!(s.basis()[0], vec![0, 0, 0]);
        for i in 1..s.dim() {
            assert!(s.photon_count(i) >= s.photon_count(i - 1));
        }
        for (i, occ) in s.basis().iter().enumerate() {
            assert_eq!(s.index_of(occ), Some(i));
        }
    }
    let four = ModeGrid::from_modes(vec![[1.0, 0.0, 0.0]; 5], vec![1.0; 5], 0.0).unwrap();
    assert!(matches!(TruncatedFockSpace::new(&four, 4), Err(Error::InvalidParameter { .. })));
}

#[test]
fn canonical_commutator_below_cutoff() {
    let g = modes();
    let s = TruncatedFockSpace::new(&g, 6).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let f = random_amplitude(&mut rng, 3, 1.0);
    let h = random_amplitude(&mut rng, 3, 1.0);
    let expected = g.inner(&f, &h).unwrap();
    // A state confined to at most 3 photons never reaches the cutoff.
    let mut psi = vec![C64::new(0.0, 0.0); s.dim()];
    for (i, z) in psi.iter_mut().enumerate() {
        if s.photon_count(i) <= 3 {
            *z = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
    }
    let ac = s.annihilate(&f, &s.create(&h, &psi));
    let ca = s.create(&h, &s.annihilate(&f, &psi));
    for i in 0..s.dim() {
        assert!((ac[i] - ca[i] - expected * psi[i]).norm() < 1e-12);
    }
}

#[test]
fn operators_are_hermitian_and_consistent() {
    let g = modes();
    let s = TruncatedFockSpace::new(&g, 5).unwrap();
    let sys = moving_charge();
    let ops = build_operators(&s, &sys, &g, 0.4).unwrap();
    let h = ops.hamiltonian_dense();
    assert!((&h - h.adjoint()).norm() < 1e-14);
    for m in 0..3 {
        assert!((ops.a[m].to_dense() - ops.adag[m].to_dense().adjoint()).norm() < 1e-14);
    }
    let v = couplings_at(&sys, &g, 0.4).unwrap().v;
    let direct = field_operator(&s, &v).to_dense();
    assert!((direct - ops.phi_v.to_dense()).norm() < 1e-14);
    let other = ModeGrid::from_modes(vec![[1.0, 0.0, 0.0]], vec![1.0], 0.0).unwrap();
    assert!(matches!(build_operators(&s, &sys, &other, 0.4), Err(Error::GridMismatch)));
}

#[test]
fn weyl_sign_matches_coherent_calculus() {
    let g = modes();
    let s = TruncatedFockSpace::new(&g, 14).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..4 {
        let f = random_amplitude(&mut rng, 3, 0.6);
        let base = CoherentState::new(&g, random_amplitude(&mut rng, 3, 0.4), rng.gen_range(-1.0..1.0)).unwrap();
        let start = coherent_embed(&s, &base).unwrap().vector;
        for sign in [1i8, -1] {
            let fock = exp_apply(&field_operator(&s, &f), C64::new(0.0, sign as f64), &start);
            let gen = WeylGenerator::new(f.clone(), "f");
            let coh = weyl_apply(&g, &base, &gen, sign).unwrap();
            let emb = coherent_embed(&s, &coh).unwrap().vector;
            let fid = fidelity(&emb, &fock);
            assert!((fid - 1.0).norm() < 1e-9, "sign {sign}: {fid}");
        }
    }
}

#[test]
fn ground_state_is_the_adiabatic_coherent_state() {
    let g = modes();
    let s = TruncatedFockSpace::new(&g, 14).unwrap();
    let sys = moving_charge();
    for t in [0.0, 0.5] {
        let ops = build_operators(&s, &sys, &g, t).unwrap();
        let eig = ops.hamiltonian_dense().symmetric_eigen();
        let (imin, emin) = eig.eigenvalues.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, &e)| if e < acc.1 { (i, e) } else { acc });
        let v = couplings_at(&sys, &g, t).unwrap().v;
        let closed: f64 = -0.5 * v.iter().zip(g.weights()).zip(g.norms()).map(|((z, w), r)| w * z.norm_sqr() / r).sum::<f64>();
        assert!((emin - closed).abs() < 1e-6, "t={t}: {emin} vs {closed}");
        assert!((ground_energy(&sys, &g, t).unwrap() - closed).abs() < 1e-12);
        let ground: Vec<C64> = eig.eigenvectors.column(imin).iter().cloned().collect();
        let coh = coherent_embed(&s, &adiabatic_state(&sys, &g, t, 0.0).unwrap()).unwrap().vector;
        assert!(fidelity(&coh, &ground).norm() > 1.0 - 1e-9);
    }
}

#[test]
fn overlaps_and_sector_probabilities_agree() {
    let g = modes();
    let s = TruncatedFockSpace::new(&g, 14).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..6 {
        let a = CoherentState::new(&g, random_amplitude(&mut rng, 3, 0.5), rng.gen_range(-3.0..3.0)).unwrap();
        let b = CoherentState::new(&g, random_amplitude(&mut rng, 3, 0.5), rng.gen_range(-3.0..3.0)).unwrap();
        let (ea, eb) = (coherent_embed(&s, &a).unwrap().vector, coherent_embed(&s, &b).unwrap().vector);
        assert!((fidelity(&ea, &eb) - overlap(&g, &a, &b).unwrap()).norm() < 1e-10);
        for m in 0..4 {
            assert!((sector_population(&s, &ea, m) - sector_prob(&g, &a, m).unwrap()).abs() < 1e-10);
        }
    }
    // ‖α‖² = 1 gives P₀ = P₁ = e^{-1}; ‖α - β‖² = 2 gives |⟨α, β⟩| = e^{-1}.
    let one = CoherentState::new(&g, vec![C64::new(1.0 / 0.9f64.sqrt(), 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)], 0.0).unwrap();
    let e1 = coherent_embed(&s, &one).unwrap().vector;
    let inv_e = (-1.0f64).exp();
    assert!((sector_population(&s, &e1, 0) - inv_e).abs() < 1e-10);
    assert!((sector_population(&s, &e1, 1) - inv_e).abs() < 1e-10);
    let far = CoherentState::new(&g, one.amplitude().iter().map(|z| z * (1.0 - SQRT_2)).collect(), 0.0).unwrap();
    let ef = coherent_embed(&s, &far).unwrap().vector;
    assert!((fidelity(&e1, &ef).norm() - inv_e).abs() < 1e-10);
}

#[test]
fn heavy_tail_is_rejected() {
    let g = modes();
    let s = TruncatedFockSpace::new(&g, 6).unwrap();
    let big = CoherentState::new(&g, vec![C64::new(2.0, 0.0); 3], 0.0).unwrap();
    assert!(matches!(coherent_embed(&s, &big), Err(Error::TailBound { n_max: 6, .. })));
    let small = CoherentState::new(&g, vec![C64::new(0.01, 0.0); 3], 0.0).unwrap();
    let emb = coherent_embed(&s, &small).unwrap();
    assert!(emb.truncated_mass < 1e-15);
}

#[test]
fn constant_hamiltonian_matches_matrix_exponential() {
    let g = ModeGrid::from_modes(vec![[0.7, 0.0, 0.0], [0.0, 0.0, 1.2]], vec![1.0, 0.8], 0.0).unwrap();
    let s = TruncatedFockSpace::new(&g, 12).unwrap();
    let sys = SourceSystem::new(vec![8.0], 1.0, vec![Trajectory::Rest { position: [0.1, 0.2, -0.1] }]).unwrap();
    let p = EvolutionParams { epsilon: 0.2, t0: 0.0, t1: 1.0, step_count: 8, sigma_rule: SigmaRule::Fixed { sigma: 0.0 } };
    let run = integrate_schrodinger(&s, &sys, &g, &p, &s.vacuum()).unwrap();
    let h = build_operators(&s, &sys, &g, 0.0).unwrap().hamiltonian_dense();
    let psi0 = nalgebra::DVector::from_vec(s.vacuum());
    for (t, state) in run.times.iter().zip(&run.states) {
        let u = (h.clone() * C64::new(0.0, -t / p.epsilon)).exp();
        let exact = u * &psi0;
        let diff: f64 = exact.iter().zip(state).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        assert!(diff < 1e-8, "t={t}: {diff}");
        let norm = fidelity(state, state).re;
        assert!((norm - 1.0).abs() < 1e-9);
    }
}

#[test]
fn coherent_solver_matches_fock_oracle() {
    let g = modes();
    let s = TruncatedFockSpace::new(&g, 14).unwrap();
    let sys = moving_charge();
    for eps in [0.5, 0.2, 0.1] {
        let worst = evolution_mismatch(&s, &sys, &g, &params(eps)).unwrap();
        assert!(worst < 1e-6, "eps={eps}: {worst}");
    }
}

#[test]
fn convention_suite_passes() {
    let checks = convention_checks(14, &[0.5]).unwrap();
    assert_eq!(checks.len(), 6);
    for c in &checks {
        assert!(c.pass, "{c:?}");
    }
}

#[test]
fn photon_sectors_survive_slow_motion() {
    let g = modes();
    let s = TruncatedFockSpace::new(&g, 14).unwrap();
    let sys = moving_charge();
    let f = vec![C64::new(0.6, 0.2), C64::new(-0.3, 0.5), C64::new(0.4, -0.1)];
    for m in 0..=2usize {
        let mut losses = Vec::new();
        for eps in [0.5, 0.2, 0.1] {
            let p = params(eps);
            let mut dressed = s.vacuum();
            for _ in 0..m {
                dressed = s.create(&f, &dressed);
            }
            let a0 = adiabatic_state(&sys, &g, p.t0, 0.0).unwrap();
            let initial = normalized(weyl_operator(&s, a0.amplitude(), &dressed));
            let run = integrate_schrodinger(&s, &sys, &g, &p, &initial).unwrap();
            let a1 = adiabatic_state(&sys, &g, p.t1, 0.0).unwrap();
            let back: Vec<C64> = a1.amplitude().iter().map(|z| -z).collect();
            let undressed = weyl_operator(&s, &back, run.states.last().unwrap());
            losses.push(1.0 - sector_population(&s, &undressed, m));
        }
        // Losses scale like ε² once ε is small; the constant grows with m.
        let ratio = losses[1] / losses[2];
        assert!((3.0..5.0).contains(&ratio), "m={m}: {losses:?}");
        for (l, eps) in losses[1..].iter().zip([0.2f64, 0.1]) {
            assert!(*l > 0.0 && *l <= 2.0 * (m as f64 + 1.0) * eps * eps, "m={m} eps={eps}: {l}");
        }
        if m == 0 {
            let p = params(0.1);
            let init = adiabatic_state(&sys, &g, p.t0, 0.0).unwrap();
            let end = evolve_exact(&init, &sys, &g, &p).unwrap();
            let last = end.states.last().unwrap();
            let rest = adiabatic_state(&sys, &g, p.t1, 0.0).unwrap();
            let ov = overlap(&g, &rest, last).unwrap();
            assert!((1.0 - ov.norm_sqr() - losses[2]).abs() < 1e-6);
        }
    }
}
