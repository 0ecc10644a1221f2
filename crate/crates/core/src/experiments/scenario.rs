//! Canonical source configurations and their time discretization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::{EvolutionParams, SigmaRule};
use crate::grid::{GridSpec, ModeGrid, RadialLayout};
use crate::model::SourceSystem;
use crate::quadrature::gauss_legendre_on;
use crate::trajectory::{Trajectory, Window};

/// Points of the fixed time mesh on which error norms are sampled.
pub const MESH_POINTS: usize = 64;

/// Default ε ladder of sweeps.
pub const DEFAULT_LADDER: [f64; 5] = [0.2, 0.1, 0.05, 0.025, 0.0125];

/// Default grid: 200 radial nodes times 64 directions.
pub const DEFAULT_GRID: GridSpec = GridSpec {
    sigma_ir: 0.0,
    k_max: 8.0,
    radial_count: 200,
    angular_count: 64,
    layout: RadialLayout::Log,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub system: SourceSystem,
    /// Simulated interval `[t0, t1]`.
    pub window: [f64; 2],
    /// Intervals on which every source is at rest.
    pub rest_windows: Vec<[f64; 2]>,
    /// Grid parameters; the infrared cutoff comes from `sigma_rule`.
    pub grid: GridSpec,
    pub sigma_rule: SigmaRule,
    /// Propagator panels across the window, a multiple of [`MESH_POINTS`].
    pub step_count: usize,
    /// Time at which the deformation energy is probed, by default the
    /// mesh point closest to the middle of the motion.
    #[serde(default)]
    pub probe_time: Option<f64>,
    #[serde(default)]
    pub notes: String,
}

/// Names accepted by [`Scenario::by_name`].
pub const CANONICAL: [&str; 4] = ["neutral_dipole_step", "charged_step", "dipole_oscillation", "static_pair"];

impl Scenario {
    pub fn by_name(name: &str) -> Result<Scenario> {
        match name {
            "neutral_dipole_step" => Ok(Self::neutral_dipole_step()),
            "charged_step" => Ok(Self::charged_step()),
            "dipole_oscillation" => Ok(Self::dipole_oscillation()),
            "static_pair" => Ok(Self::static_pair()),
            other => Err(Error::InvalidParameter {
                name: "scenario",
                reason: format!("unknown scenario {other:?}, expected one of {CANONICAL:?}"),
            }),
        }
    }

    /// Opposite unit charges; one slides away from the other along z over
    /// `[4, 20]` and both rest on `[0, 4]` and `[20, 24]`. The slow motion
    /// keeps the infrared logarithms small across the default ladder.
    pub fn neutral_dipole_step() -> Scenario {
        let system = SourceSystem::new(
            vec![1.0, -1.0],
            1.0,
            vec![
                Trajectory::Rest { position: [0.0, 0.0, 0.25] },
                Trajectory::SmoothstepTranslation {
                    start: [0.0, 0.0, -0.25],
                    displacement: [0.0, 0.0, -0.5],
                    t_start: 4.0,
                    duration: 16.0,
                },
            ],
        )
        .expect("canonical system is valid");
        Scenario {
            name: "neutral_dipole_step".into(),
            system,
            window: [0.0, 24.0],
            rest_windows: vec![[0.0, 4.0], [20.0, 24.0]],
            grid: DEFAULT_GRID,
            sigma_rule: SigmaRule::Power { p: 2.0 },
            step_count: 192,
            probe_time: None,
            notes: "neutral dipole, smoothstep separation".into(),
        }
    }

    /// A single unit charge translated by 0.5 over `[4, 20]`; needs σ > 0.
    pub fn charged_step() -> Scenario {
        let system = SourceSystem::new(
            vec![1.0],
            1.0,
            vec![Trajectory::SmoothstepTranslation {
                start: [0.0, 0.0, -0.25],
                displacement: [0.0, 0.0, 0.5],
                t_start: 4.0,
                duration: 16.0,
            }],
        )
        .expect("canonical system is valid");
        Scenario {
            name: "charged_step".into(),
            system,
            window: [0.0, 24.0],
            rest_windows: vec![[0.0, 4.0], [20.0, 24.0]],
            grid: DEFAULT_GRID,
            sigma_rule: SigmaRule::Power { p: 2.0 },
            step_count: 192,
            probe_time: None,
            notes: "single charge, smoothstep translation".into(),
        }
    }

    /// Neutral dipole whose negative charge oscillates along z with period 1
    /// inside a smooth window on `[1, 7]`. The amplitude is normalized so that
    /// `∫|d̈|² = 1` over the window.
    pub fn dipole_oscillation() -> Scenario {
        let omega = 2.0 * std::f64::consts::PI;
        let window = Window { t_start: 1.0, t_end: 7.0, ramp: 2.0 };
        let build = |a: f64| {
            SourceSystem::new(
                vec![1.0, -1.0],
                1.0,
                vec![
                    Trajectory::Rest { position: [0.0, 0.0, 0.25] },
                    Trajectory::Oscillation {
                        center: [0.0, 0.0, -0.25],
                        amplitude: [0.0, 0.0, a],
                        omega,
                        phase: 0.0,
                        window: Some(window),
                    },
                ],
            )
            .expect("canonical system is valid")
        };
        let unit = dipole_acceleration_norm(&build(1.0), 1.0, 7.0);
        let system = build(1.0 / unit.sqrt());
        Scenario {
            name: "dipole_oscillation".into(),
            system,
            window: [0.0, 8.0],
            rest_windows: vec![[0.0, 1.0], [7.0, 8.0]],
            grid: DEFAULT_GRID,
            sigma_rule: SigmaRule::Fixed { sigma: 0.0 },
            step_count: 512,
            probe_time: None,
            notes: "windowed dipole oscillation with unit integrated |d''|^2".into(),
        }
    }

    /// Two charges at rest for the whole window.
    pub fn static_pair() -> Scenario {
        let system = SourceSystem::new(
            vec![1.0, -0.4],
            1.0,
            vec![Trajectory::Rest { position: [0.0, 0.0, 0.0] }, Trajectory::Rest { position: [0.3, 0.1, 0.0] }],
        )
        .expect("canonical system is valid");
        Scenario {
            name: "static_pair".into(),
            system,
            window: [0.0, 2.0],
            rest_windows: vec![[0.0, 2.0]],
            grid: DEFAULT_GRID,
            sigma_rule: SigmaRule::Fixed { sigma: 0.0 },
            step_count: 64,
            probe_time: None,
            notes: "static sources".into(),
        }
    }

    pub fn t0(&self) -> f64 {
        self.window[0]
    }

    pub fn t1(&self) -> f64 {
        self.window[1]
    }

    pub fn step(&self) -> f64 {
        (self.t1() - self.t0()) / self.step_count as f64
    }

    pub fn time(&self, index: usize) -> f64 {
        if index == self.step_count {
            self.t1()
        } else {
            self.t0() + index as f64 * self.step()
        }
    }

    pub fn params(&self, epsilon: f64) -> EvolutionParams {
        EvolutionParams {
            epsilon,
            t0: self.t0(),
            t1: self.t1(),
            step_count: self.step_count,
            sigma_rule: self.sigma_rule,
        }
    }

    pub fn grid_spec(&self, epsilon: f64) -> GridSpec {
        self.grid.with_sigma(self.sigma_rule.sigma(epsilon))
    }

    pub fn build_grid(&self, epsilon: f64) -> Result<ModeGrid> {
        self.grid_spec(epsilon).build()
    }

    /// Panel index of a time that must fall on a panel boundary.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let x = (t - self.t0()) / self.step();
        let n = x.round();
        if (x - n).abs() > 1e-9 || n < 0.0 || n > self.step_count as f64 {
            return Err(Error::InvalidParameter {
                name: "time",
                reason: format!("{t} is not a panel boundary of the window {:?} with {} panels", self.window, self.step_count),
            });
        }
        Ok(n as usize)
    }

    /// Boundary indices of the error mesh: 65 evenly spaced points and every
    /// rest-window endpoint, sorted and deduplicated.
    pub fn mesh_indices(&self) -> Result<Vec<usize>> {
        let stride = self.step_count / MESH_POINTS;
        let mut out: Vec<usize> = (0..=MESH_POINTS).map(|i| i * stride).collect();
        for w in &self.rest_windows {
            out.push(self.index_of(w[0])?);
            out.push(self.index_of(w[1])?);
        }
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }

    /// Rest-window endpoints as boundary indices.
    pub fn rest_indices(&self) -> Result<Vec<usize>> {
        let mut out = Vec::new();
        for w in &self.rest_windows {
            out.push(self.index_of(w[0])?);
            out.push(self.index_of(w[1])?);
        }
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }

    /// Boundary index of the deformation probe.
    pub fn probe_index(&self) -> Result<usize> {
        let t = match (self.probe_time, self.system.motion_interval()) {
            (Some(t), _) => t,
            (None, Some((a, b))) if a.is_finite() && b.is_finite() => 0.5 * (a + b),
            _ => 0.5 * (self.t0() + self.t1()),
        };
        let stride = (self.step_count / MESH_POINTS) as f64;
        let n = (((t - self.t0()) / self.step()) / stride).round() * stride;
        Ok((n as usize).min(self.step_count))
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        self.grid.build()?;
        self.sigma_rule.validate()?;
        let [a, b] = self.window;
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::InvalidParameter { name: "window", reason: format!("need t0 < t1, got {:?}", self.window) });
        }
        if self.step_count == 0 || self.step_count % MESH_POINTS != 0 {
            return Err(Error::InvalidParameter {
                name: "step_count",
                reason: format!("must be a positive multiple of {MESH_POINTS}, got {}", self.step_count),
            });
        }
        if let Some((lo, hi)) = self.system.domain {
            if a < lo || b > hi {
                return Err(Error::OutsideDomain { t: if a < lo { a } else { b }, start: lo, end: hi });
            }
        }
        for w in &self.rest_windows {
            if !(w[0] <= w[1] && w[0] >= a && w[1] <= b) {
                return Err(Error::InvalidParameter {
                    name: "rest_windows",
                    reason: format!("{w:?} is not an interval inside the window {:?}", self.window),
                });
            }
            self.index_of(w[0])?;
            self.index_of(w[1])?;
            for j in 0..=16 {
                let t = w[0] + (w[1] - w[0]) * j as f64 / 16.0;
                if !self.system.at_rest(t) {
                    return Err(Error::InvalidParameter {
                        name: "rest_windows",
                        reason: format!("sources move at t = {t} inside the declared rest window {w:?}"),
                    });
                }
            }
        }
        if let Some(t) = self.probe_time {
            if !(t > a && t < b) {
                return Err(Error::InvalidParameter { name: "probe_time", reason: format!("{t} is outside the window") });
            }
        }
        Ok(())
    }

    /// Whether both ends of the window lie in rest windows.
    pub fn rests_at_both_ends(&self) -> bool {
        let starts = self.rest_windows.iter().any(|w| w[0] == self.t0());
        let ends = self.rest_windows.iter().any(|w| w[1] == self.t1());
        starts && ends
    }
}

/// `∫_a^b |d̈(s)|² ds` by composite Gauss–Legendre.
pub fn dipole_acceleration_norm(sys: &SourceSystem, a: f64, b: f64) -> f64 {
    let panels = 256;
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let (nodes, weights) = gauss_legendre_on(8, lo, lo + h);
        for (s, w) in nodes.iter().zip(&weights) {
            let mut d = [0.0; 3];
            for (e, tr) in sys.charges.iter().zip(&sys.trajectories) {
                let acc = tr.jet(*s)[2];
                for c in 0..3 {
                    d[c] += e * acc[c];
                }
            }
            total += w * (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
        }
    }
    total
}
