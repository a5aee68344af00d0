//! Time-dependent velocity fields: analytic flows for closed-form checks
//! and frame series interpolating stored solver output.

use crate::field::VectorField2D;
use crate::grid::GridSpec;
use crate::{Error, Result};

/// A velocity field evaluable at arbitrary `(t, x)`.
pub trait VelocityField: Sync {
    fn eval(&self, t: f64, p: [f64; 2]) -> [f64; 2];

    /// Upper bound for the speed over the axis-aligned box `[lo, hi]`,
    /// uniform in time. Drives CFL checks.
    fn max_speed_in(&self, lo: [f64; 2], hi: [f64; 2]) -> f64;
}

pub struct ZeroVelocity;

impl VelocityField for ZeroVelocity {
    fn eval(&self, _t: f64, _p: [f64; 2]) -> [f64; 2] {
        [0.0, 0.0]
    }
    fn max_speed_in(&self, _lo: [f64; 2], _hi: [f64; 2]) -> f64 {
        0.0
    }
}

/// Rigid rotation about a center: `u = rate * (-(x2-c2), x1-c1)`.
pub struct RigidRotation {
    pub center: [f64; 2],
    pub rate: f64,
}

impl VelocityField for RigidRotation {
    fn eval(&self, _t: f64, p: [f64; 2]) -> [f64; 2] {
        [
            -self.rate * (p[1] - self.center[1]),
            self.rate * (p[0] - self.center[0]),
        ]
    }
    fn max_speed_in(&self, lo: [f64; 2], hi: [f64; 2]) -> f64 {
        let mut worst = 0.0f64;
        for &x in &[lo[0], hi[0]] {
            for &y in &[lo[1], hi[1]] {
                worst = worst.max((x - self.center[0]).hypot(y - self.center[1]));
            }
        }
        self.rate.abs() * worst
    }
}

/// Steady shear `u = (rate * x2, 0)`; its flow is the exact linear shear
/// `(x1 + t*rate*x2, x2)`.
pub struct SteadyShear {
    pub rate: f64,
}

impl VelocityField for SteadyShear {
    fn eval(&self, _t: f64, p: [f64; 2]) -> [f64; 2] {
        [self.rate * p[1], 0.0]
    }
    fn max_speed_in(&self, lo: [f64; 2], hi: [f64; 2]) -> f64 {
        self.rate.abs() * lo[1].abs().max(hi[1].abs())
    }
}

/// Stationary Taylor-Green cell flow
/// `u = amp * (-sin x1 cos x2, cos x1 sin x2)`, the velocity of the
/// steady vorticity `-2 amp sin x1 sin x2`.
pub struct TaylorGreenVelocity {
    pub amp: f64,
}

impl VelocityField for TaylorGreenVelocity {
    fn eval(&self, _t: f64, p: [f64; 2]) -> [f64; 2] {
        [
            -self.amp * p[0].sin() * p[1].cos(),
            self.amp * p[0].cos() * p[1].sin(),
        ]
    }
    fn max_speed_in(&self, _lo: [f64; 2], _hi: [f64; 2]) -> f64 {
        self.amp.abs()
    }
}

/// Uniformly spaced velocity frames with linear interpolation in time and
/// bilinear interpolation in space.
pub struct FrameSeries {
    pub grid: GridSpec,
    pub t0: f64,
    pub dt_frame: f64,
    pub frames: Vec<VectorField2D>,
}

impl FrameSeries {
    pub fn new(t0: f64, dt_frame: f64, frames: Vec<VectorField2D>) -> Result<Self> {
        if frames.len() < 2 {
            return Err(Error::TooFewFrames { got: frames.len() });
        }
        let grid = frames[0].grid;
        for f in &frames {
            if f.grid != grid {
                return Err(Error::FamilyGridMismatch);
            }
        }
        Ok(FrameSeries { grid, t0, dt_frame, frames })
    }

    pub fn t_end(&self) -> f64 {
        self.t0 + self.dt_frame * (self.frames.len() - 1) as f64
    }

    pub fn frame_time(&self, k: usize) -> f64 {
        self.t0 + self.dt_frame * k as f64
    }

    /// Frame nearest to `t`; `t` must lie inside the stored range (a small
    /// tolerance absorbs roundoff at the ends).
    pub fn frame_at(&self, t: f64) -> Result<&VectorField2D> {
        let tol = 1e-9 * self.dt_frame.max(1.0);
        if t < self.t0 - tol || t > self.t_end() + tol {
            return Err(Error::TimeOutOfRange { t, t0: self.t0, t1: self.t_end() });
        }
        let k = (((t - self.t0) / self.dt_frame).round() as usize).min(self.frames.len() - 1);
        Ok(&self.frames[k])
    }
}

impl VelocityField for FrameSeries {
    fn eval(&self, t: f64, p: [f64; 2]) -> [f64; 2] {
        // clamp in time: RK4 stage times can poke past the ends by roundoff
        let s = ((t - self.t0) / self.dt_frame).clamp(0.0, (self.frames.len() - 1) as f64);
        let k = (s.floor() as usize).min(self.frames.len() - 2);
        let w = s - k as f64;
        let a = self.frames[k].interp(p);
        let b = self.frames[k + 1].interp(p);
        [a[0] + w * (b[0] - a[0]), a[1] + w * (b[1] - a[1])]
    }
    fn max_speed_in(&self, _lo: [f64; 2], _hi: [f64; 2]) -> f64 {
        self.frames.iter().map(|f| f.max_speed()).fold(0.0, f64::max)
    }
}
