//! Uniform 2D grids on the flat torus or on a plane window.
//!
//! Torus grids cover `[0,lx) x [0,ly)` with periodic wrapping; window grids
//! sample a plane-domain function on `[ox, ox+lx) x [oy, oy+ly)` with plain
//! Euclidean geometry. All dynamics live on the torus; windows exist so that
//! plane-domain functions can be fed to the norm estimators.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Topology {
    Torus,
    Window,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub origin: [f64; 2],
    pub topology: Topology,
}

impl GridSpec {
    pub fn torus(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        Self::validate(nx, ny, lx, ly)?;
        Ok(GridSpec { nx, ny, lx, ly, origin: [0.0, 0.0], topology: Topology::Torus })
    }

    /// Square torus of side 2π, the default dynamics domain.
    pub fn square_torus(n: usize) -> Result<Self> {
        let l = 2.0 * std::f64::consts::PI;
        Self::torus(n, n, l, l)
    }

    pub fn window(nx: usize, ny: usize, lx: f64, ly: f64, origin: [f64; 2]) -> Result<Self> {
        Self::validate(nx, ny, lx, ly)?;
        if !(origin[0].is_finite() && origin[1].is_finite()) {
            return Err(Error::BadGridExtent { lx, ly });
        }
        Ok(GridSpec { nx, ny, lx, ly, origin, topology: Topology::Window })
    }

    /// Square window `[-half, half)^2`.
    pub fn centered_window(n: usize, half: f64) -> Result<Self> {
        Self::window(n, n, 2.0 * half, 2.0 * half, [-half, -half])
    }

    fn validate(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<()> {
        if nx < 8 || ny < 8 {
            return Err(Error::GridTooSmall { nx, ny });
        }
        if !(lx.is_finite() && ly.is_finite()) || lx <= 0.0 || ly <= 0.0 {
            return Err(Error::BadGridExtent { lx, ly });
        }
        Ok(())
    }

    #[inline]
    pub fn hx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    #[inline]
    pub fn hy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.nx && j < self.ny);
        j * self.nx + i
    }

    #[inline]
    pub fn node_x(&self, i: usize) -> f64 {
        self.origin[0] + i as f64 * self.hx()
    }

    #[inline]
    pub fn node_y(&self, j: usize) -> f64 {
        self.origin[1] + j as f64 * self.hy()
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> [f64; 2] {
        [self.node_x(i), self.node_y(j)]
    }

    pub fn is_power_of_two(&self) -> bool {
        self.nx.is_power_of_two() && self.ny.is_power_of_two()
    }

    pub fn is_torus(&self) -> bool {
        self.topology == Topology::Torus
    }

    /// Wrap a coordinate into `[o, o+l)`. `rem_euclid` is an exact float
    /// operation, so values already in range pass through bit-unchanged.
    #[inline]
    fn wrap_coord(x: f64, o: f64, l: f64) -> f64 {
        let t = (x - o).rem_euclid(l);
        // rem_euclid may return l itself when x-o is a tiny negative number.
        if t >= l {
            o
        } else {
            t + o
        }
    }

    pub fn wrap_point(&self, p: [f64; 2]) -> [f64; 2] {
        match self.topology {
            Topology::Window => p,
            Topology::Torus => [
                Self::wrap_coord(p[0], self.origin[0], self.lx),
                Self::wrap_coord(p[1], self.origin[1], self.ly),
            ],
        }
    }

    /// Signed displacement `a - b`, reduced to `[-l/2, l/2)` per coordinate
    /// on the torus, plain difference on a window.
    pub fn delta(&self, a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
        match self.topology {
            Topology::Window => [a[0] - b[0], a[1] - b[1]],
            Topology::Torus => [
                reduce_periodic(a[0] - b[0], self.lx),
                reduce_periodic(a[1] - b[1], self.ly),
            ],
        }
    }

    pub fn distance(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        let d = self.delta(a, b);
        d[0].hypot(d[1])
    }

    /// Whether the closed disk `B(center, r)` fits inside the window.
    /// Always true on the torus (radii are capped elsewhere).
    pub fn ball_fits(&self, center: [f64; 2], radius: f64) -> bool {
        match self.topology {
            Topology::Torus => true,
            Topology::Window => {
                center[0] - radius >= self.origin[0]
                    && center[0] + radius <= self.origin[0] + self.lx
                    && center[1] - radius >= self.origin[1]
                    && center[1] + radius <= self.origin[1] + self.ly
            }
        }
    }

    pub fn id_string(&self) -> String {
        match self.topology {
            Topology::Torus => format!("torus:{}x{}", self.nx, self.ny),
            Topology::Window => format!("window:{}x{}", self.nx, self.ny),
        }
    }
}

/// Reduce a signed difference to `[-l/2, l/2)`.
#[inline]
pub fn reduce_periodic(d: f64, l: f64) -> f64 {
    let mut t = d.rem_euclid(l);
    if t >= l / 2.0 {
        t -= l;
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_tiny_grids() {
        assert!(matches!(GridSpec::torus(4, 64, 1.0, 1.0), Err(Error::GridTooSmall { .. })));
        assert!(matches!(GridSpec::torus(64, 64, -1.0, 1.0), Err(Error::BadGridExtent { .. })));
    }

    #[test]
    fn wrap_is_identity_in_range() {
        let g = GridSpec::square_torus(16).unwrap();
        let p = [1.25, 3.5];
        assert_eq!(g.wrap_point(p), p);
    }

    #[test]
    fn wrap_by_whole_period_is_exact_for_representable_sums() {
        // With a power-of-two period and dyadic coordinates, p + l is exact
        // and the wrap recovers p bit-for-bit.
        let g = GridSpec::torus(16, 16, 2.0, 2.0).unwrap();
        let p = [0.359375, 1.6640625];
        let shifted = [p[0] + 2.0, p[1] + 2.0];
        assert_eq!(g.wrap_point(shifted), p);
    }

    #[test]
    fn periodic_delta_takes_short_way() {
        let g = GridSpec::torus(16, 16, 2.0, 2.0).unwrap();
        let d = g.delta([0.1, 0.0], [1.9, 0.0]);
        assert!((d[0] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn window_ball_fit() {
        let g = GridSpec::centered_window(16, 1.0).unwrap();
        assert!(g.ball_fits([0.0, 0.0], 1.0));
        assert!(!g.ball_fits([0.5, 0.0], 0.75));
    }
}
