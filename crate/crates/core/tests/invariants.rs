use adiabat_core::coherent::{displace, field_energy, overlap, sector_prob, state_distance, CoherentState};
use adiabat_core::evolve::{
    adiabatic_state, evolve_exact, superadiabatic_state, EvolutionParams, SigmaRule,
};
use adiabat_core::{couplings_at, ModeGrid, RadialLayout, SourceSystem, Trajectory};
use num_complex::Complex64 as C64;
use proptest::prelude::*;

fn layout() -> impl Strategy<Value = RadialLayout> {
    prop_oneof![Just(RadialLayout::Log), Just(RadialLayout::Linear)]
}

fn small_grid() -> ModeGrid {
    ModeGrid::build(0.05, 5.0, 8, 8, RadialLayout::Log).unwrap()
}

fn amplitudes(n: usize, scale: f64) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec((-scale..scale, -scale..scale).prop_map(|(a, b)| C64::new(a, b)), n)
}

fn moving_pair(shift: [f64; 3], duration: f64) -> SourceSystem {
    SourceSystem::new(
        vec![1.0, -1.0],
        1.0,
        vec![
            Trajectory::Rest { position: [0.0, 0.0, 0.3] },
            Trajectory::SmoothstepTranslation { start: [0.0, 0.0, -0.3], displacement: shift, t_start: 0.5, duration },
        ],
    )
    .unwrap()
}

fn params(epsilon: f64, t1: f64, steps: usize) -> EvolutionParams {
    EvolutionParams { epsilon, t0: 0.0, t1, step_count: steps, sigma_rule: SigmaRule::Fixed { sigma: 0.05 } }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn grids_stay_in_shell_with_positive_weights(
        sigma in 0.0f64..0.5, width in 0.5f64..10.0, radial in 1usize..24, angular in 1usize..20, layout in layout(),
    ) {
        let g = ModeGrid::build(sigma, sigma + width, radial, angular, layout).unwrap();
        for (&w, &r) in g.weights().iter().zip(g.norms()) {
            prop_assert!(w > 0.0);
            prop_assert!(r >= sigma && r <= sigma + width);
        }
    }

    #[test]
    fn integration_is_linear(f in amplitudes(512, 2.0), h in amplitudes(512, 2.0), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let g = small_grid();
        let n = g.len();
        let combo: Vec<C64> = f[..n].iter().zip(&h[..n]).map(|(x, y)| a * x + b * y).collect();
        let lhs = g.integrate(&combo).unwrap();
        let rhs = a * g.integrate(&f[..n]).unwrap() + b * g.integrate(&h[..n]).unwrap();
        prop_assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + rhs.norm()));
    }

    #[test]
    fn drive_and_dressing_couplings_are_linked(
        dx in -1.0f64..1.0, dz in -1.0f64..1.0, duration in 0.5f64..3.0, frac in 0.0f64..1.0,
    ) {
        let g = small_grid();
        let sys = moving_pair([dx, 0.2, dz], duration);
        let c = couplings_at(&sys, &g, 0.5 + frac * duration).unwrap();
        for ((z1, z2), &r) in c.z1.iter().zip(&c.z2).zip(g.norms()) {
            prop_assert!((z1 - C64::new(0.0, r) * z2).norm() <= 1e-12 * (1.0 + z1.norm()));
        }
    }

    #[test]
    fn displacements_compose_with_the_ccr_phase(
        a in amplitudes(256, 0.5), b in amplitudes(256, 0.5), c in amplitudes(256, 0.5), theta in -3.0f64..3.0,
    ) {
        let g = small_grid();
        let n = g.len();
        let s = CoherentState::new(&g, c[..n].to_vec(), theta).unwrap();
        let twice = displace(&g, &displace(&g, &s, &a[..n]).unwrap(), &b[..n]).unwrap();
        let sum: Vec<C64> = a[..n].iter().zip(&b[..n]).map(|(x, y)| x + y).collect();
        let ccr = -g.inner(&b[..n], &a[..n]).unwrap().im;
        let once = displace(&g, &s, &sum).unwrap().add_phase(ccr);
        prop_assert!(state_distance(&g, &twice, &once).unwrap() <= 1e-12);
    }

    #[test]
    fn distance_and_overlap_agree(a in amplitudes(256, 0.6), b in amplitudes(256, 0.6), p in -3.0f64..3.0, q in -3.0f64..3.0) {
        let g = small_grid();
        let n = g.len();
        let x = CoherentState::new(&g, a[..n].to_vec(), p).unwrap();
        let y = CoherentState::new(&g, b[..n].to_vec(), q).unwrap();
        let d = state_distance(&g, &x, &y).unwrap();
        let ov = overlap(&g, &x, &y).unwrap();
        prop_assert!((d * d - (2.0 - 2.0 * ov.re)).abs() <= 1e-12);
    }

    #[test]
    fn observables_ignore_the_global_phase(a in amplitudes(256, 0.6), p in -3.0f64..3.0, shift in -6.0f64..6.0) {
        let g = small_grid();
        let n = g.len();
        let x = CoherentState::new(&g, a[..n].to_vec(), p).unwrap();
        let y = x.clone().add_phase(shift);
        for m in 0..3 {
            prop_assert_eq!(sector_prob(&g, &x, m).unwrap(), sector_prob(&g, &y, m).unwrap());
        }
        prop_assert_eq!(field_energy(&g, &x).unwrap(), field_energy(&g, &y).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, ..ProptestConfig::default() })]

    #[test]
    fn evolution_keeps_unit_norm_and_is_phase_covariant(
        dz in -0.8f64..0.8, eps in 0.05f64..0.5, theta in -3.0f64..3.0,
    ) {
        let g = small_grid();
        let sys = moving_pair([0.0, 0.0, dz], 2.0);
        let p = params(eps, 3.0, 96);
        let init = adiabatic_state(&sys, &g, 0.0, 0.0).unwrap();
        let a = evolve_exact(&init, &sys, &g, &p).unwrap();
        let b = evolve_exact(&init.clone().add_phase(theta), &sys, &g, &p).unwrap();
        for (x, y) in a.states.iter().zip(&b.states) {
            prop_assert!((overlap(&g, x, x).unwrap() - 1.0).norm() <= 1e-14);
            prop_assert!(x.amplitude().iter().all(|z| z.re.is_finite() && z.im.is_finite()));
            prop_assert_eq!(x.amplitude(), y.amplitude());
            prop_assert!((y.phase() - x.phase() - theta).abs() <= 1e-12);
        }
    }

    #[test]
    fn no_transitions_after_return_to_rest(dz in -0.8f64..0.8, eps in 0.05f64..0.3) {
        let g = small_grid();
        let sys = moving_pair([0.0, 0.1, dz], 1.5);
        let p = params(eps, 4.0, 192);
        let init = adiabatic_state(&sys, &g, 0.0, 0.0).unwrap();
        let run = evolve_exact(&init, &sys, &g, &p).unwrap();
        // Motion ends at t = 2; compare distances at every later panel boundary.
        let mut distances = Vec::new();
        for (t, s) in run.times.iter().zip(&run.states) {
            if *t >= 2.0 {
                let su = superadiabatic_state(&sys, &g, *t, eps, s.phase()).unwrap();
                let ov = overlap(&g, &su, s).unwrap();
                distances.push(1.0 - ov.norm());
            }
        }
        let lo = distances.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = distances.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(hi - lo <= 1e-8, "{} {}", lo, hi);
    }
}
