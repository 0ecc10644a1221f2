//! Prescribed source trajectories with derivatives up to fourth order.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre_on;

/// Highest derivative order a trajectory provides.
pub const MAX_ORDER: usize = 4;

/// Position followed by its first four time derivatives.
pub type Jet = [[f64; 3]; MAX_ORDER + 1];

/// Scalar function value with its first four derivatives.
type ScalarJet = [f64; MAX_ORDER + 1];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Trajectory {
    Rest {
        position: [f64; 3],
    },
    /// `start + displacement · s((t − t_start)/duration)` with the C^∞
    /// smoothstep `s`; at rest outside `[t_start, t_start + duration]`.
    SmoothstepTranslation {
        start: [f64; 3],
        displacement: [f64; 3],
        t_start: f64,
        duration: f64,
    },
    /// `center + amplitude · w(t) · sin(omega·t + phase)`, where `w` ramps
    /// smoothly from 0 to 1 on `[t_start, t_start + ramp]` and back to 0 on
    /// `[t_end − ramp, t_end]`. Without a window, `w ≡ 1`.
    Oscillation {
        center: [f64; 3],
        amplitude: [f64; 3],
        omega: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default)]
        window: Option<Window>,
    },
    /// Sum of the component trajectories.
    Composite {
        parts: Vec<Trajectory>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Window {
    pub t_start: f64,
    pub t_end: f64,
    pub ramp: f64,
}

impl Window {
    fn jet(&self, t: f64) -> ScalarJet {
        let up = scaled_smoothstep(t, self.t_start, self.ramp);
        let down = scaled_smoothstep(t, self.t_end - self.ramp, self.ramp);
        let mut one_minus_down = down.map(|d| -d);
        one_minus_down[0] += 1.0;
        leibniz(&up, &one_minus_down)
    }
}

impl Trajectory {
    pub fn validate(&self) -> Result<()> {
        match self {
            Trajectory::Rest { .. } => Ok(()),
            Trajectory::SmoothstepTranslation { duration, .. } => {
                if *duration > 0.0 && duration.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter {
                        name: "duration",
                        reason: format!("must be positive, got {duration}"),
                    })
                }
            }
            Trajectory::Oscillation { omega, window, .. } => {
                if !omega.is_finite() {
                    return Err(Error::InvalidParameter { name: "omega", reason: "not finite".into() });
                }
                if let Some(w) = window {
                    if !(w.ramp > 0.0 && w.t_end - w.t_start >= 2.0 * w.ramp) {
                        return Err(Error::InvalidParameter {
                            name: "window",
                            reason: format!("need ramp > 0 and t_end - t_start >= 2 ramp, got {w:?}"),
                        });
                    }
                }
                Ok(())
            }
            Trajectory::Composite { parts } => {
                if parts.is_empty() {
                    return Err(Error::InvalidParameter {
                        name: "parts",
                        reason: "composite trajectory needs at least one part".into(),
                    });
                }
                parts.iter().try_for_each(Trajectory::validate)
            }
        }
    }

    /// Shortest time over which the motion changes appreciably, `None` at rest.
    pub fn time_scale(&self) -> Option<f64> {
        match self {
            Trajectory::Rest { .. } => None,
            Trajectory::SmoothstepTranslation { duration, .. } => Some(*duration),
            Trajectory::Oscillation { omega, window, amplitude, .. } => {
                if amplitude.iter().all(|a| *a == 0.0) {
                    return None;
                }
                let period = (*omega != 0.0).then(|| 2.0 * std::f64::consts::PI / omega.abs());
                match (period, window) {
                    (Some(p), Some(w)) => Some(p.min(w.ramp)),
                    (Some(p), None) => Some(p),
                    (None, Some(w)) => Some(w.ramp),
                    (None, None) => None,
                }
            }
            Trajectory::Composite { parts } => {
                parts.iter().filter_map(Trajectory::time_scale).reduce(f64::min)
            }
        }
    }

    /// Interval outside of which the trajectory is at rest; `None` if it
    /// never moves. Unwindowed oscillations move on the whole real line.
    pub fn motion_interval(&self) -> Option<(f64, f64)> {
        match self {
            Trajectory::Rest { .. } => None,
            Trajectory::SmoothstepTranslation { t_start, duration, .. } => Some((*t_start, t_start + duration)),
            Trajectory::Oscillation { window, .. } => {
                self.time_scale()?;
                Some(window.map_or((f64::NEG_INFINITY, f64::INFINITY), |w| (w.t_start, w.t_end)))
            }
            Trajectory::Composite { parts } => parts
                .iter()
                .filter_map(Trajectory::motion_interval)
                .reduce(|a, b| (a.0.min(b.0), a.1.max(b.1))),
        }
    }

    /// Position (order 0) or a time derivative up to order 4.
    pub fn eval(&self, t: f64, order: usize) -> Result<[f64; 3]> {
        if order > MAX_ORDER {
            return Err(Error::DerivativeOrder(order));
        }
        Ok(self.jet(t)[order])
    }

    /// Position and all derivatives through order 4 at `t`.
    pub fn jet(&self, t: f64) -> Jet {
        match self {
            Trajectory::Rest { position } => {
                let mut j = [[0.0; 3]; MAX_ORDER + 1];
                j[0] = *position;
                j
            }
            Trajectory::SmoothstepTranslation { start, displacement, t_start, duration } => {
                let s = scaled_smoothstep(t, *t_start, *duration);
                let mut j = [[0.0; 3]; MAX_ORDER + 1];
                for (n, row) in j.iter_mut().enumerate() {
                    for c in 0..3 {
                        row[c] = displacement[c] * s[n];
                    }
                }
                for c in 0..3 {
                    j[0][c] += start[c];
                }
                j
            }
            Trajectory::Oscillation { center, amplitude, omega, phase, window } => {
                let arg = omega * t + phase;
                let (sn, cs) = arg.sin_cos();
                let w2 = omega * omega;
                let carrier = [sn, omega * cs, -w2 * sn, -w2 * omega * cs, w2 * w2 * sn];
                let env = match window {
                    Some(w) => leibniz(&w.jet(t), &carrier),
                    None => carrier,
                };
                let mut j = [[0.0; 3]; MAX_ORDER + 1];
                for (n, row) in j.iter_mut().enumerate() {
                    for c in 0..3 {
                        row[c] = amplitude[c] * env[n];
                    }
                }
                for c in 0..3 {
                    j[0][c] += center[c];
                }
                j
            }
            Trajectory::Composite { parts } => {
                let mut j = [[0.0; 3]; MAX_ORDER + 1];
                for p in parts {
                    let pj = p.jet(t);
                    for n in 0..=MAX_ORDER {
                        for c in 0..3 {
                            j[n][c] += pj[n][c];
                        }
                    }
                }
                j
            }
        }
    }

    /// Whether all derivatives of order 1..=4 vanish at `t`.
    pub fn at_rest(&self, t: f64) -> bool {
        self.jet(t)[1..].iter().all(|d| d.iter().all(|&c| c == 0.0))
    }
}

fn leibniz(a: &ScalarJet, b: &ScalarJet) -> ScalarJet {
    const BINOM: [[f64; 5]; 5] = [
        [1.0, 0.0, 0.0, 0.0, 0.0],
        [1.0, 1.0, 0.0, 0.0, 0.0],
        [1.0, 2.0, 1.0, 0.0, 0.0],
        [1.0, 3.0, 3.0, 1.0, 0.0],
        [1.0, 4.0, 6.0, 4.0, 1.0],
    ];
    let mut out = [0.0; MAX_ORDER + 1];
    for n in 0..=MAX_ORDER {
        for m in 0..=n {
            out[n] += BINOM[n][m] * a[m] * b[n - m];
        }
    }
    out
}

/// `s((t − t0)/len)` and its t-derivatives.
fn scaled_smoothstep(t: f64, t0: f64, len: f64) -> ScalarJet {
    let u = (t - t0) / len;
    let s = smoothstep(u);
    let mut out = [0.0; MAX_ORDER + 1];
    let mut scale = 1.0;
    for n in 0..=MAX_ORDER {
        out[n] = s[n] * scale;
        scale /= len;
    }
    out
}

fn bump(u: f64) -> f64 {
    if u <= 0.0 || u >= 1.0 {
        0.0
    } else {
        (-1.0 / (u * (1.0 - u))).exp()
    }
}

fn bump_integral(u: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    let (x, w) = RULE.get_or_init(|| gauss_legendre_on(20, 0.0, 1.0));
    let u = u.min(1.0);
    const PANELS: usize = 16;
    let h = u / PANELS as f64;
    let mut acc = 0.0;
    for p in 0..PANELS {
        let a = p as f64 * h;
        acc += x.iter().zip(w).map(|(&x, &w)| w * bump(a + h * x)).sum::<f64>();
    }
    acc * h
}

fn bump_total() -> f64 {
    static TOTAL: OnceLock<f64> = OnceLock::new();
    *TOTAL.get_or_init(|| bump_integral(1.0))
}

/// The normalized C^∞ smoothstep `s(u) = S(u)/S(1)` with
/// `S(u) = ∫₀ᵘ exp(−1/(v(1−v))) dv`, with derivatives through order 4.
pub fn smoothstep(u: f64) -> ScalarJet {
    if u <= 0.0 {
        return [0.0; MAX_ORDER + 1];
    }
    if u >= 1.0 {
        return [1.0, 0.0, 0.0, 0.0, 0.0];
    }
    let total = bump_total();
    let value = if u <= 0.5 {
        bump_integral(u) / total
    } else {
        1.0 - bump_integral(1.0 - u) / total
    };
    // b = exp(q), q = −1/p, p = u(1 − u).
    let p = u * (1.0 - u);
    let dp = 1.0 - 2.0 * u;
    let ddp = -2.0;
    let q1 = dp / (p * p);
    let q2 = ddp / (p * p) - 2.0 * dp * dp / (p * p * p);
    let q3 = -6.0 * dp * ddp / (p * p * p) + 6.0 * dp.powi(3) / p.powi(4);
    let b = bump(u);
    [
        value,
        b / total,
        q1 * b / total,
        (q2 + q1 * q1) * b / total,
        (q3 + 3.0 * q1 * q2 + q1.powi(3)) * b / total,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fd_check(traj: &Trajectory, t: f64, order: usize) -> (f64, f64) {
        let h = 2e-4;
        let f = |t: f64| traj.eval(t, order - 1).unwrap();
        let d = traj.eval(t, order).unwrap();
        let (fp, fm, fpp, fmm) = (f(t + h), f(t - h), f(t + 2.0 * h), f(t - 2.0 * h));
        let mut err: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for c in 0..3 {
            let fd = (8.0 * (fp[c] - fm[c]) - (fpp[c] - fmm[c])) / (12.0 * h);
            err = err.max((fd - d[c]).abs());
            scale = scale.max(d[c].abs());
        }
        (err, scale)
    }

    fn translation() -> Trajectory {
        Trajectory::SmoothstepTranslation {
            start: [0.1, -0.2, 0.3],
            displacement: [0.0, 0.5, -1.0],
            t_start: 0.0,
            duration: 1.0,
        }
    }

    fn windowed() -> Trajectory {
        Trajectory::Oscillation {
            center: [0.0; 3],
            amplitude: [0.0, 0.0, 0.3],
            omega: 9.0,
            phase: 0.2,
            window: Some(Window { t_start: 0.0, t_end: 2.0, ramp: 0.5 }),
        }
    }

    #[test]
    fn smoothstep_endpoints() {
        assert_eq!(smoothstep(0.0)[0], 0.0);
        assert_eq!(smoothstep(1.0)[0], 1.0);
        assert!((smoothstep(0.5)[0] - 0.5).abs() < 1e-14);
        for u in [0.3, 0.7] {
            let s = smoothstep(u)[0] + smoothstep(1.0 - u)[0];
            assert!((s - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn rest_has_no_derivatives() {
        let r = Trajectory::Rest { position: [1.0, 2.0, 3.0] };
        for order in 1..=4 {
            assert_eq!(r.eval(0.7, order).unwrap(), [0.0; 3]);
        }
        assert_eq!(r.eval(0.7, 0).unwrap(), [1.0, 2.0, 3.0]);
    }

    #[test]
    fn order_above_four_rejected() {
        assert_eq!(translation().eval(0.0, 5), Err(Error::DerivativeOrder(5)));
    }

    #[test]
    fn smoothstep_translation_reaches_displacement() {
        let tr = translation();
        let a = tr.eval(0.0, 0).unwrap();
        let b = tr.eval(1.0, 0).unwrap();
        assert_eq!([b[0] - a[0], b[1] - a[1], b[2] - a[2]], [0.0, 0.5, -1.0]);
        for t in [-0.5, 0.0, 1.0, 1.5] {
            assert!(tr.at_rest(t), "not at rest at {t}");
        }
        assert!(!tr.at_rest(0.5));
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for traj in [translation(), windowed()] {
            for _ in 0..20 {
                let t: f64 = rng.gen_range(0.05..0.95);
                for order in 1..=4 {
                    let (err, scale) = fd_check(&traj, t, order);
                    assert!(err <= 1e-5 * scale.max(1.0), "order {order} t {t}: {err} vs {scale}");
                }
            }
        }
    }

    #[test]
    fn second_derivative_matches_second_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let tr = windowed();
        let h = 1e-4;
        for _ in 0..20 {
            let t: f64 = rng.gen_range(0.1..1.9);
            let x = |t| tr.eval(t, 0).unwrap();
            let a = tr.eval(t, 2).unwrap();
            for c in 0..3 {
                let fd = (x(t + h)[c] - 2.0 * x(t)[c] + x(t - h)[c]) / (h * h);
                assert!((fd - a[c]).abs() <= 1e-5 * a[c].abs().max(1.0));
            }
        }
    }

    #[test]
    fn windowed_oscillation_rests_outside_window() {
        let w = windowed();
        assert!(w.at_rest(-0.1));
        assert!(w.at_rest(2.0));
        assert!(w.at_rest(3.0));
        assert_eq!(w.eval(2.5, 0).unwrap(), [0.0; 3]);
    }

    #[test]
    fn oscillation_dipole_values() {
        let omega = 3.0;
        let amp = 0.4;
        let osc = Trajectory::Oscillation {
            center: [0.0; 3],
            amplitude: [0.0, 0.0, amp],
            omega,
            phase: 0.0,
            window: None,
        };
        assert_eq!(osc.eval(0.0, 2).unwrap(), [0.0, 0.0, 0.0]);
        let a = osc.eval(std::f64::consts::PI / (2.0 * omega), 2).unwrap();
        assert!((a[2] + amp * omega * omega).abs() < 1e-12);
    }

    #[test]
    fn composite_sums_parts() {
        let c = Trajectory::Composite { parts: vec![translation(), windowed()] };
        let (a, b, s) = (translation().jet(0.4), windowed().jet(0.4), c.jet(0.4));
        for n in 0..=4 {
            for k in 0..3 {
                assert!((a[n][k] + b[n][k] - s[n][k]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn invalid_parameters_rejected() {
        let bad = Trajectory::SmoothstepTranslation {
            start: [0.0; 3],
            displacement: [1.0; 3],
            t_start: 0.0,
            duration: 0.0,
        };
        assert!(bad.validate().is_err());
        assert!(Trajectory::Composite { parts: vec![] }.validate().is_err());
    }

    #[test]
    fn time_scales_and_motion_intervals() {
        assert_eq!(Trajectory::Rest { position: [0.0; 3] }.time_scale(), None);
        assert_eq!(translation().time_scale(), Some(1.0));
        assert_eq!(translation().motion_interval(), Some((0.0, 1.0)));
        let w = windowed();
        assert!((w.time_scale().unwrap() - 0.5f64.min(2.0 * std::f64::consts::PI / 9.0)).abs() < 1e-15);
        assert_eq!(w.motion_interval(), Some((0.0, 2.0)));
        let c = Trajectory::Composite { parts: vec![translation(), w, Trajectory::Rest { position: [1.0; 3] }] };
        assert_eq!(c.motion_interval(), Some((0.0, 2.0)));
    }
}
