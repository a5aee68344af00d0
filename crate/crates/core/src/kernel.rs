//! Free-space Biot-Savart quadrature for compactly supported vorticity on
//! a plane window: `u(x) = Σ_j K(x - x_j) ω_j hx hy` with
//! `K(d) = d⊥ / (2π |d|²)`.
//!
//! The singular self-term is dropped: the kernel is odd, so at midpoint
//! symmetry its principal value contributes nothing at leading order. Cost
//! is O(N²) in nodes; this path exists as a desk-scale oracle for the
//! spectral torus inversion, not for production runs.

use rayon::prelude::*;

use crate::field::{ScalarField2D, VectorField2D};
use crate::grid::Topology;
use crate::{Error, Result};

pub const MAX_DIRECT_NODES: usize = 256 * 256;

/// Relative threshold under which a node is treated as outside the support.
const SUPPORT_EPS: f64 = 1e-14;

pub fn velocity_from_vorticity_direct(omega: &ScalarField2D) -> Result<VectorField2D> {
    let grid = &omega.grid;
    if grid.topology != Topology::Window {
        return Err(Error::NotAWindow);
    }
    if grid.len() > MAX_DIRECT_NODES {
        return Err(Error::GridTooLargeForDirect { got: grid.len(), max: MAX_DIRECT_NODES });
    }
    let peak = omega.max_abs();
    let thresh = SUPPORT_EPS * peak;
    if peak > 0.0 {
        // support strictly inside: the outermost node ring must be silent
        for i in 0..grid.nx {
            if omega.get(i, 0).abs() > thresh || omega.get(i, grid.ny - 1).abs() > thresh {
                return Err(Error::SupportTouchesEdge);
            }
        }
        for j in 0..grid.ny {
            if omega.get(0, j).abs() > thresh || omega.get(grid.nx - 1, j).abs() > thresh {
                return Err(Error::SupportTouchesEdge);
            }
        }
    }

    // gather the sources once; skipping silent nodes keeps the O(N²) sum
    // proportional to the actual support
    let cell = grid.hx() * grid.hy();
    let mut sources: Vec<(f64, f64, f64)> = Vec::new();
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let w = omega.get(i, j);
            if w.abs() > thresh {
                let p = grid.node(i, j);
                sources.push((p[0], p[1], w * cell));
            }
        }
    }

    let inv2pi = 1.0 / (2.0 * std::f64::consts::PI);
    let n = grid.len();
    let mut u1 = vec![0.0; n];
    let mut u2 = vec![0.0; n];
    u1.par_iter_mut()
        .zip(u2.par_iter_mut())
        .enumerate()
        .for_each(|(k, (a, b))| {
            let ti = k % grid.nx;
            let tj = k / grid.nx;
            let t = grid.node(ti, tj);
            let mut s1 = 0.0;
            let mut s2 = 0.0;
            for &(sx, sy, w) in &sources {
                let dx = t[0] - sx;
                let dy = t[1] - sy;
                let r2 = dx * dx + dy * dy;
                if r2 == 0.0 {
                    continue; // dropped self-term
                }
                let f = w / r2;
                s1 -= dy * f;
                s2 += dx * f;
            }
            *a = s1 * inv2pi;
            *b = s2 * inv2pi;
        });
    VectorField2D::from_components(*grid, u1, u2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    /// Smooth radial bump supported in |x - c| < r0.
    pub fn bump(p: [f64; 2], c: [f64; 2], r0: f64) -> f64 {
        let d2 = ((p[0] - c[0]) * (p[0] - c[0]) + (p[1] - c[1]) * (p[1] - c[1])) / (r0 * r0);
        if d2 < 1.0 {
            (-1.0 / (1.0 - d2)).exp()
        } else {
            0.0
        }
    }

    #[test]
    fn zero_in_zero_out() {
        let g = GridSpec::centered_window(32, 1.0).unwrap();
        let f = ScalarField2D::constant(g, 0.0).unwrap();
        let u = velocity_from_vorticity_direct(&f).unwrap();
        assert_eq!(u.max_speed(), 0.0);
    }

    #[test]
    fn far_field_matches_circulation_law() {
        // outside a radial patch, |u|(ρ) = m / (2π ρ)
        let g = GridSpec::centered_window(128, 1.0).unwrap();
        let r0 = 0.2;
        let f = ScalarField2D::sample(g, |p| bump(p, [0.0, 0.0], r0)).unwrap();
        let mass: f64 = f.values().iter().sum::<f64>() * g.hx() * g.hy();
        let u = velocity_from_vorticity_direct(&f).unwrap();
        let rho = 3.0 * r0;
        for &query in &[[rho, 0.0], [0.0, -rho], [rho / 2.0f64.sqrt(), rho / 2.0f64.sqrt()]] {
            let v = u.interp(query);
            let speed = v[0].hypot(v[1]);
            let expect = mass / (2.0 * std::f64::consts::PI * rho);
            assert!(
                (speed - expect).abs() <= 0.02 * expect,
                "at {query:?}: {speed} vs {expect}"
            );
            // tangential direction: u ⟂ x for a radial patch
            let dot = (v[0] * query[0] + v[1] * query[1]) / (speed * rho);
            assert!(dot.abs() < 0.02, "radial leakage {dot}");
        }
    }

    #[test]
    fn support_guard_fires() {
        let g = GridSpec::centered_window(32, 1.0).unwrap();
        let f = ScalarField2D::constant(g, 1.0).unwrap();
        assert!(matches!(
            velocity_from_vorticity_direct(&f),
            Err(Error::SupportTouchesEdge)
        ));
    }

    #[test]
    fn size_guard_fires() {
        let g = GridSpec::window(512, 512, 2.0, 2.0, [-1.0, -1.0]).unwrap();
        let f = ScalarField2D::constant(g, 0.0).unwrap();
        assert!(matches!(
            velocity_from_vorticity_direct(&f),
            Err(Error::GridTooLargeForDirect { .. })
        ));
    }
}
