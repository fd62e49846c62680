//! Stribeck friction: the exponential form used to generate ground truth and
//! the linearized Coulomb + viscous + cube-root form that is identified.

use serde::{Deserialize, Serialize};

/// `sgn(v)` with `sgn(0) = 0`.
#[inline]
pub fn sgn(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `sgn(v)·|v|^(1/3)`; odd, so friction opposes motion in both directions.
#[inline]
pub fn signed_cbrt(v: f64) -> f64 {
    v.cbrt()
}

/// Linearized Stribeck coefficients: `f_c·sgn(v) + f_v·v + f_s·sgn(v)|v|^(1/3)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FrictionParams {
    pub f_c: f64,
    pub f_v: f64,
    pub f_s: f64,
}

impl FrictionParams {
    pub const ZERO: FrictionParams = FrictionParams {
        f_c: 0.0,
        f_v: 0.0,
        f_s: 0.0,
    };

    pub const fn new(f_c: f64, f_v: f64, f_s: f64) -> Self {
        FrictionParams { f_c, f_v, f_s }
    }

    pub fn force(&self, v: f64) -> f64 {
        self.f_c * sgn(v) + self.f_v * v + self.f_s * signed_cbrt(v)
    }

    /// Basis functions multiplying `(f_c, f_v, f_s)`.
    pub fn basis(v: f64) -> [f64; 3] {
        [sgn(v), v, signed_cbrt(v)]
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.f_c, self.f_v, self.f_s]
    }
}

/// Exponential Stribeck model with breakaway level `f_m` and shape `(v_s, δ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StribeckParams {
    pub f_c: f64,
    pub f_m: f64,
    pub f_v: f64,
    pub v_s: f64,
    pub delta: f64,
}

impl StribeckParams {
    pub fn force(&self, v: f64) -> f64 {
        let dip = (-(v.abs() / self.v_s).powf(self.delta)).exp();
        sgn(v) * (self.f_c + (self.f_m - self.f_c) * dip) + self.f_v * v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_root_is_odd() {
        assert_eq!(signed_cbrt(-8.0), -2.0);
        assert_eq!(signed_cbrt(27.0), 3.0);
        assert_eq!(signed_cbrt(0.0), 0.0);
    }

    #[test]
    fn full_model_limits() {
        let p = StribeckParams {
            f_c: 10.0,
            f_m: 15.0,
            f_v: 2.0,
            v_s: 0.05,
            delta: 2.0,
        };
        assert_eq!(p.force(0.0), 0.0);
        let v = 50.0;
        assert!((p.force(v) - (10.0 + 2.0 * v)).abs() < 1e-12);
        assert!((p.force(-v) + (10.0 + 2.0 * v)).abs() < 1e-12);
    }

    #[test]
    fn full_model_dips_past_breakaway() {
        let p = StribeckParams {
            f_c: 10.0,
            f_m: 15.0,
            f_v: 2.0,
            v_s: 0.05,
            delta: 2.0,
        };
        let grid: Vec<f64> = (1..=400).map(|k| k as f64 * 1e-3).collect();
        let f: Vec<f64> = grid.iter().map(|&v| p.force(v)).collect();
        assert!(f[0] > p.f_c, "starts above the Coulomb level");
        let min_idx = f.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert!(min_idx > 0 && min_idx < f.len() - 1, "interior minimum");
        assert!(f[min_idx] < f[0] && f[min_idx] < f[f.len() - 1]);
    }
}
