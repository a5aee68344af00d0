//! Analytic measure-preserving plane maps: the test population for
//! composition and modulus checks.
//!
//! Every map here preserves Lebesgue measure by construction (rotations,
//! shears, and polar twists, which rotate each circle rigidly). For linear
//! maps the modulus `‖ψ‖*` has a closed form; for the nonlinear ones a
//! bi-Lipschitz upper bound is available instead.

use serde::{Deserialize, Serialize};

/// An invertible plane map evaluable anywhere.
pub trait PointMap: Sync {
    fn map_point(&self, p: [f64; 2]) -> [f64; 2];
    fn invert_point(&self, p: [f64; 2]) -> [f64; 2];

    /// Exact `‖ψ‖*` when the supremum is known in closed form.
    fn star_exact(&self) -> Option<f64> {
        None
    }

    /// Upper bound for `‖ψ‖*`. For a measure-preserving map that is
    /// bi-Lipschitz with constant `L` both ways, the product branch of Φ is
    /// maximized at separations straddling 1, giving `(1 + ln(L)/2)²`.
    fn star_upper_bound(&self) -> f64 {
        star_of_stretch(self.max_stretch())
    }

    /// Largest singular value of the differential (equals the bi-Lipschitz
    /// constant for the maps in this module).
    fn max_stretch(&self) -> f64;
}

/// `‖ψ‖*` of a map whose separation ratios fill `[1/σ, σ]`:
/// `(1 + ln(σ)/2)²`. Exact for linear measure-preserving maps, an upper
/// bound for bi-Lipschitz ones.
pub fn star_of_stretch(sigma: f64) -> f64 {
    let l = sigma.ln().max(0.0);
    (1.0 + 0.5 * l) * (1.0 + 0.5 * l)
}

/// Largest singular value of the unit shear matrix `[[1, t], [0, 1]]`.
pub fn shear_stretch(t: f64) -> f64 {
    (t.abs() + (t * t + 4.0).sqrt()) / 2.0
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Identity;

impl PointMap for Identity {
    fn map_point(&self, p: [f64; 2]) -> [f64; 2] {
        p
    }
    fn invert_point(&self, p: [f64; 2]) -> [f64; 2] {
        p
    }
    fn star_exact(&self) -> Option<f64> {
        Some(1.0)
    }
    fn max_stretch(&self) -> f64 {
        1.0
    }
}

/// Rigid rotation about a center.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Rotation {
    pub center: [f64; 2],
    pub angle: f64,
}

impl Rotation {
    fn apply(&self, p: [f64; 2], angle: f64) -> [f64; 2] {
        let (s, c) = angle.sin_cos();
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        [self.center[0] + c * dx - s * dy, self.center[1] + s * dx + c * dy]
    }
}

impl PointMap for Rotation {
    fn map_point(&self, p: [f64; 2]) -> [f64; 2] {
        self.apply(p, self.angle)
    }
    fn invert_point(&self, p: [f64; 2]) -> [f64; 2] {
        self.apply(p, -self.angle)
    }
    fn star_exact(&self) -> Option<f64> {
        Some(1.0)
    }
    fn max_stretch(&self) -> f64 {
        1.0
    }
}

/// Linear shear `(x1 + t x2, x2)`. Integer `t` also acts on the 2π torus
/// (non-integer slopes are discontinuous across the seam).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LinearShear {
    pub t: f64,
}

impl PointMap for LinearShear {
    fn map_point(&self, p: [f64; 2]) -> [f64; 2] {
        [p[0] + self.t * p[1], p[1]]
    }
    fn invert_point(&self, p: [f64; 2]) -> [f64; 2] {
        [p[0] - self.t * p[1], p[1]]
    }
    fn star_exact(&self) -> Option<f64> {
        Some(star_of_stretch(shear_stretch(self.t)))
    }
    fn max_stretch(&self) -> f64 {
        shear_stretch(self.t)
    }
}

/// Periodic shear `(x1 + a sin(x2), x2)`: a torus homeomorphism for any
/// amplitude, with local shear slope `a cos(x2)`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SineShear {
    pub amp: f64,
}

impl PointMap for SineShear {
    fn map_point(&self, p: [f64; 2]) -> [f64; 2] {
        [p[0] + self.amp * p[1].sin(), p[1]]
    }
    fn invert_point(&self, p: [f64; 2]) -> [f64; 2] {
        [p[0] - self.amp * p[1].sin(), p[1]]
    }
    fn max_stretch(&self) -> f64 {
        shear_stretch(self.amp)
    }
}

/// Polar twist `(ρ, θ + a(1 - ρ²))` inside the unit disk, identity outside:
/// rotates each circle rigidly, so it preserves measure and fixes `|x|`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PolarTwist {
    pub amp: f64,
}

impl PolarTwist {
    fn twist(&self, p: [f64; 2], sign: f64) -> [f64; 2] {
        let r2 = p[0] * p[0] + p[1] * p[1];
        if r2 >= 1.0 {
            return p;
        }
        let angle = sign * self.amp * (1.0 - r2);
        let (s, c) = angle.sin_cos();
        [c * p[0] - s * p[1], s * p[0] + c * p[1]]
    }
}

impl PointMap for PolarTwist {
    fn map_point(&self, p: [f64; 2]) -> [f64; 2] {
        self.twist(p, 1.0)
    }
    fn invert_point(&self, p: [f64; 2]) -> [f64; 2] {
        self.twist(p, -1.0)
    }
    fn max_stretch(&self) -> f64 {
        // local frame: rigid rotation plus azimuthal shear of slope
        // ρ|ω'(ρ)| = 2 a ρ², maximal at the disk edge
        shear_stretch(2.0 * self.amp)
    }
}
