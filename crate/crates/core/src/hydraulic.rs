//! Single-rod hydraulic cylinder testbed.
//!
//! The piston follows a commanded displacement exactly and the chamber
//! pressures are solved from the force balance
//! `m ẍ + c ẋ + K x + F_d(ẋ) = p₁A₁ − p₂A₂ − F`, so every noiseless record
//! satisfies it to round-off. Sensor noise is added afterwards.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::presets::{JOINT_FRICTION, PISTON_MASS};
use crate::stribeck::{FrictionParams, StribeckParams};

pub const DEFAULT_BORE_AREA: f64 = 1.963e-3;
pub const DEFAULT_ANNULUS_AREA: f64 = 1.374e-3;
pub const DEFAULT_DAMPING: f64 = 2.0;
pub const DEFAULT_STIFFNESS: f64 = 50.0;
pub const DEFAULT_BASE_PRESSURE: f64 = 1e5;
pub const DEFAULT_RATE_HZ: f64 = 50.0;
pub const DEFAULT_AMPLITUDE: f64 = 6.0;
pub const DEFAULT_OMEGA: f64 = 0.05;
pub const DEFAULT_PERIODS: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum FrictionModel {
    Linearized(FrictionParams),
    Full(StribeckParams),
}

impl FrictionModel {
    pub fn force(&self, v: f64) -> f64 {
        match self {
            FrictionModel::Linearized(p) => p.force(v),
            FrictionModel::Full(p) => p.force(v),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CylinderParams {
    pub m: f64,
    pub c: f64,
    pub k: f64,
    pub a1: f64,
    pub a2: f64,
    pub friction: FrictionModel,
}

impl CylinderParams {
    pub fn new(m: f64, c: f64, k: f64, a1: f64, a2: f64, friction: FrictionModel) -> Result<Self> {
        let p = CylinderParams {
            m,
            c,
            k,
            a1,
            a2,
            friction,
        };
        p.validate()?;
        Ok(p)
    }

    /// Piston of joint `joint` (0-based) with its planted friction triple.
    pub fn for_joint(joint: usize) -> Self {
        CylinderParams {
            m: PISTON_MASS[joint],
            c: DEFAULT_DAMPING,
            k: DEFAULT_STIFFNESS,
            a1: DEFAULT_BORE_AREA,
            a2: DEFAULT_ANNULUS_AREA,
            friction: FrictionModel::Linearized(JOINT_FRICTION[joint]),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        let all = [self.m, self.c, self.k, self.a1, self.a2];
        if all.iter().any(|v| !v.is_finite()) {
            return bad("cylinder parameters must be finite".into());
        }
        if self.m <= 0.0 {
            return bad(format!("piston mass must be positive, got {}", self.m));
        }
        if self.a1 == 0.0 {
            return bad("bore area A1 is zero".into());
        }
        if !(self.a1 > self.a2 && self.a2 > 0.0) {
            return bad(format!("need A1 > A2 > 0, got A1={} A2={}", self.a1, self.a2));
        }
        if self.c < 0.0 || self.k < 0.0 {
            return bad(format!(
                "damping and stiffness must be nonnegative (c={}, K={})",
                self.c, self.k
            ));
        }
        if let FrictionModel::Full(s) = self.friction {
            if !(s.v_s > 0.0 && s.delta > 0.0) {
                return bad(format!(
                    "Stribeck shape needs v_s > 0 and delta > 0 (v_s={}, delta={})",
                    s.v_s, s.delta
                ));
            }
        }
        Ok(())
    }

    /// Net piston force `p₁A₁ − p₂A₂ − F` required to follow `(x, ẋ, ẍ)`.
    pub fn required_force(&self, x: f64, dx: f64, ddx: f64) -> f64 {
        self.m * ddx + self.c * dx + self.k * x + self.friction.force(dx)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CylinderRecord {
    pub t: f64,
    pub x: f64,
    pub dx: f64,
    pub ddx: f64,
    pub p1: f64,
    pub p2: f64,
    #[serde(rename = "F")]
    pub f: f64,
}

impl CylinderRecord {
    pub fn is_finite(&self) -> bool {
        [self.t, self.x, self.dx, self.ddx, self.p1, self.p2, self.f]
            .iter()
            .all(|v| v.is_finite())
    }

    /// `p₁A₁ − p₂A₂ − F`.
    pub fn net_force(&self, a1: f64, a2: f64) -> f64 {
        self.p1 * a1 - self.p2 * a2 - self.f
    }
}

/// `(A sin ωt, Aω cos ωt)`.
pub fn excitation_signal(amplitude: f64, omega: f64, t: f64) -> (f64, f64) {
    let (s, c) = (omega * t).sin_cos();
    (amplitude * s, amplitude * omega * c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SineComponent {
    pub amplitude: f64,
    pub omega: f64,
}

/// Sum of sines; an empty list commands a stationary piston.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Excitation {
    pub components: Vec<SineComponent>,
}

impl Default for Excitation {
    fn default() -> Self {
        Excitation {
            components: vec![SineComponent {
                amplitude: DEFAULT_AMPLITUDE,
                omega: DEFAULT_OMEGA,
            }],
        }
    }
}

impl Excitation {
    pub fn single(amplitude: f64, omega: f64) -> Result<Self> {
        let e = Excitation {
            components: vec![SineComponent { amplitude, omega }],
        };
        e.validate()?;
        Ok(e)
    }

    pub fn none() -> Self {
        Excitation { components: vec![] }
    }

    pub fn validate(&self) -> Result<()> {
        for c in &self.components {
            if !(c.amplitude > 0.0 && c.omega > 0.0 && c.amplitude.is_finite() && c.omega.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "excitation needs amplitude > 0 and omega > 0, got {} / {}",
                    c.amplitude, c.omega
                )));
            }
        }
        Ok(())
    }

    /// Period of the slowest component, or `None` when stationary.
    pub fn longest_period(&self) -> Option<f64> {
        self.components
            .iter()
            .map(|c| 2.0 * std::f64::consts::PI / c.omega)
            .max_by(f64::total_cmp)
    }

    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        self.components.iter().fold((0.0, 0.0, 0.0), |(x, dx, ddx), c| {
            let (s, co) = (c.omega * t).sin_cos();
            (
                x + c.amplitude * s,
                dx + c.amplitude * c.omega * co,
                ddx - c.amplitude * c.omega * c.omega * s,
            )
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LoadProfile {
    Constant { force: f64 },
    Sine { amplitude: f64, omega: f64 },
}

impl Default for LoadProfile {
    fn default() -> Self {
        LoadProfile::Constant { force: 0.0 }
    }
}

impl LoadProfile {
    pub fn at(&self, t: f64) -> f64 {
        match *self {
            LoadProfile::Constant { force } => force,
            LoadProfile::Sine { amplitude, omega } => amplitude * (omega * t).sin(),
        }
    }
}

/// Per-channel Gaussian sensor noise standard deviations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorNoise {
    pub x: f64,
    pub dx: f64,
    pub ddx: f64,
    pub p: f64,
    pub load: f64,
}

impl Default for SensorNoise {
    fn default() -> Self {
        SensorNoise {
            x: 1e-5,
            dx: 0.0,
            ddx: 0.0,
            p: 10.0,
            load: 0.0,
        }
    }
}

impl SensorNoise {
    pub const NONE: SensorNoise = SensorNoise {
        x: 0.0,
        dx: 0.0,
        ddx: 0.0,
        p: 0.0,
        load: 0.0,
    };

    pub fn scaled(&self, k: f64) -> Self {
        SensorNoise {
            x: self.x * k,
            dx: self.dx * k,
            ddx: self.ddx * k,
            p: self.p * k,
            load: self.load * k,
        }
    }

    fn validate(&self) -> Result<()> {
        let all = [self.x, self.dx, self.ddx, self.p, self.load];
        if all.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::InvalidParameter(
                "noise levels must be finite and nonnegative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CylinderExperiment {
    pub excitation: Excitation,
    pub duration: f64,
    pub dt: f64,
    pub noise: SensorNoise,
    pub load: LoadProfile,
    pub p_base: f64,
}

impl Default for CylinderExperiment {
    fn default() -> Self {
        let excitation = Excitation::default();
        let period = excitation.longest_period().expect("default excitation moves");
        CylinderExperiment {
            excitation,
            duration: DEFAULT_PERIODS * period,
            dt: 1.0 / DEFAULT_RATE_HZ,
            noise: SensorNoise::default(),
            load: LoadProfile::default(),
            p_base: DEFAULT_BASE_PRESSURE,
        }
    }
}

impl CylinderExperiment {
    pub fn n_samples(&self) -> usize {
        (self.duration / self.dt + 1e-9).floor() as usize + 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CylinderRun {
    pub records: Vec<CylinderRecord>,
    /// Samples where the rod side had to carry the load because the bore
    /// side would otherwise have dropped below the base pressure.
    pub rod_side_samples: usize,
}

/// Split the net force into chamber pressures, both at least `p_base`.
fn split_pressures(net: f64, a1: f64, a2: f64, p_base: f64) -> (f64, f64, bool) {
    let p1 = (net + p_base * a2) / a1;
    if p1 >= p_base {
        (p1, p_base, false)
    } else {
        (p_base, (p_base * a1 - net) / a2, true)
    }
}

pub fn simulate_cylinder(params: &CylinderParams, exp: &CylinderExperiment, seed: u64) -> Result<CylinderRun> {
    params.validate()?;
    exp.excitation.validate()?;
    exp.noise.validate()?;
    if !(exp.dt > 0.0 && exp.dt.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "time step must be positive, got {}",
            exp.dt
        )));
    }
    if !(exp.duration >= 0.0 && exp.duration.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "duration must be nonnegative, got {}",
            exp.duration
        )));
    }
    if !(exp.p_base >= 0.0 && exp.p_base.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "base pressure must be nonnegative, got {}",
            exp.p_base
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noisy = |sigma: f64, rng: &mut ChaCha8Rng| -> f64 {
        if sigma > 0.0 {
            Normal::new(0.0, sigma).expect("sigma validated").sample(rng)
        } else {
            0.0
        }
    };

    let n = exp.n_samples();
    let mut records = Vec::with_capacity(n);
    let mut rod_side_samples = 0;
    for k in 0..n {
        let t = k as f64 * exp.dt;
        let (x, dx, ddx) = exp.excitation.eval(t);
        let f = exp.load.at(t);
        let net = params.required_force(x, dx, ddx) + f;
        let (p1, p2, swapped) = split_pressures(net, params.a1, params.a2, exp.p_base);
        rod_side_samples += swapped as usize;
        let nz = &exp.noise;
        records.push(CylinderRecord {
            t,
            x: x + noisy(nz.x, &mut rng),
            dx: dx + noisy(nz.dx, &mut rng),
            ddx: ddx + noisy(nz.ddx, &mut rng),
            p1: (p1 + noisy(nz.p, &mut rng)).max(0.0),
            p2: (p2 + noisy(nz.p, &mut rng)).max(0.0),
            f: f + noisy(nz.load, &mut rng),
        });
    }
    Ok(CylinderRun {
        records,
        rod_side_samples,
    })
}
