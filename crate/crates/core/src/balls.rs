//! Balls on a grid and the dyadic two-scale families behind every
//! BMO-type estimate.
//!
//! The analytic norms take suprema over *all* balls (or ball pairs); the
//! estimators replace that with a deterministic finite family: dyadic radii
//! `2^-j`, low-discrepancy centers, and pairs `(B1, B2)` satisfying the
//! two-ball admissibility condition `|x1-x2| + 2 r2 <= r1` with `r1 <= 1`
//! (equivalently `2 B2 ⊂ B1`). Every estimate is a lower bound of its
//! supremum and grows monotonically as the family is enriched.

use serde::{Deserialize, Serialize};

use crate::field::ScalarField2D;
use crate::grid::{GridSpec, Topology};
use crate::rng::{self, R2};
use crate::{Error, Result};

/// Minimum node count for a trustworthy ball average. Below this the
/// quadrature noise exceeds the signals the estimators compare; 25 keeps
/// the `|x|²` ball-average check inside 1e-3.
pub const MIN_BALL_NODES: usize = 25;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: [f64; 2],
    pub radius: f64,
}

impl Ball {
    pub fn new(center: [f64; 2], radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::BadBallRadius { radius });
        }
        Ok(Ball { center, radius })
    }
}

/// Visit every node of `grid` strictly inside `ball`, row by row, in
/// ascending index order. Returns the node count.
///
/// Rows are scanned as chords: for each admissible row the in-ball columns
/// form one contiguous run (possibly wrapping on the torus), so membership
/// costs index arithmetic per row rather than a distance test per node.
fn for_each_ball_node(grid: &GridSpec, ball: &Ball, mut visit: impl FnMut(usize)) -> usize {
    let (nx, ny) = (grid.nx as isize, grid.ny as isize);
    let (hx, hy) = (grid.hx(), grid.hy());
    let [cx, cy] = ball.center;
    let r = ball.radius;
    let torus = grid.is_torus();

    let jc = ((cy - grid.origin[1]) / hy).floor() as isize;
    let span_j = (r / hy).ceil() as isize + 1;
    let mut count = 0usize;

    for j_raw in (jc - span_j)..=(jc + span_j) {
        if !torus && (j_raw < 0 || j_raw >= ny) {
            continue;
        }
        let y = grid.origin[1] + j_raw as f64 * hy;
        let dy = y - cy;
        let rem = r * r - dy * dy;
        if rem <= 0.0 {
            continue;
        }
        let w = rem.sqrt();
        // strict inequality on both chord ends: |x - cx| < w
        let mut i_lo = ((cx - w - grid.origin[0]) / hx).floor() as isize + 1;
        let mut i_hi = ((cx + w - grid.origin[0]) / hx).ceil() as isize - 1;
        if !torus {
            i_lo = i_lo.max(0);
            i_hi = i_hi.min(nx - 1);
        }
        if i_hi < i_lo {
            continue;
        }
        let j_act = j_raw.rem_euclid(ny) as usize;
        let base = j_act * grid.nx;
        let mut ia = i_lo.rem_euclid(nx) as usize;
        for _ in i_lo..=i_hi {
            visit(base + ia);
            count += 1;
            ia += 1;
            if ia == grid.nx {
                ia = 0;
            }
        }
    }
    count
}

pub fn ball_node_count(grid: &GridSpec, ball: &Ball) -> usize {
    for_each_ball_node(grid, ball, |_| {})
}

fn sparse_err(ball: &Ball, nodes: usize) -> Error {
    Error::BallTooSparse {
        x: ball.center[0],
        y: ball.center[1],
        radius: ball.radius,
        nodes,
        needed: MIN_BALL_NODES,
    }
}

/// Mean of the node values strictly inside the ball (periodic distance on a
/// torus, Euclidean on a window). Errors rather than returning a noisy
/// average when fewer than [`MIN_BALL_NODES`] nodes fall inside.
pub fn ball_average(field: &ScalarField2D, ball: &Ball) -> Result<f64> {
    let values = field.values();
    let mut sum = 0.0;
    let n = for_each_ball_node(&field.grid, ball, |k| sum += values[k]);
    if n < MIN_BALL_NODES {
        return Err(sparse_err(ball, n));
    }
    Ok(sum / n as f64)
}

/// Mean absolute deviation from `center_value` over the ball's nodes.
pub fn ball_mean_abs_dev(field: &ScalarField2D, ball: &Ball, center_value: f64) -> Result<f64> {
    let values = field.values();
    let mut sum = 0.0;
    let n = for_each_ball_node(&field.grid, ball, |k| sum += (values[k] - center_value).abs());
    if n < MIN_BALL_NODES {
        return Err(sparse_err(ball, n));
    }
    Ok(sum / n as f64)
}

/// A deterministic dyadic ball family: the finite surrogate for the norms'
/// suprema. Reproducible from `(grid geometry, j_max, centers_per_scale,
/// seed)`; independent of the grid resolution, so refinement studies share
/// one family.
#[derive(Clone, Debug)]
pub struct BallFamily {
    pub balls: Vec<Ball>,
    /// `(outer, inner)` index pairs; every pair satisfies
    /// `|x1 - x2| + 2 r2 <= r1` with `r1 <= 1`.
    pub pairs: Vec<(usize, usize)>,
    pub scale_range: (f64, f64),
    pub grid: GridSpec,
    pub j_max: u32,
    pub centers_per_scale: usize,
    pub seed: u64,
}

impl BallFamily {
    pub fn compatible_with(&self, grid: &GridSpec) -> bool {
        self.grid == *grid
    }

    /// The family rigidly shifted by whole grid steps (wrapped on a torus).
    pub fn translated(&self, di: usize, dj: usize) -> Self {
        let dx = di as f64 * self.grid.hx();
        let dy = dj as f64 * self.grid.hy();
        let mut out = self.clone();
        for b in &mut out.balls {
            let c = [b.center[0] + dx, b.center[1] + dy];
            b.center = out.grid.wrap_point(c);
        }
        out
    }
}

/// Denominator of the LBMO second term for an admissible radius pair, in
/// the exact algebraic form `1 + ln((1 - ln r2)/(1 - ln r1))`; `>= 1`
/// whenever `r2 <= r1 <= 1`.
#[inline]
pub fn lbmo_denominator(r1: f64, r2: f64) -> f64 {
    1.0 + ((1.0 - r2.ln()) / (1.0 - r1.ln())).ln()
}

fn snap_center(grid: &GridSpec, c: [f64; 2]) -> [f64; 2] {
    let fx = rng::snap_frac(((c[0] - grid.origin[0]) / grid.lx).clamp(0.0, 1.0));
    let fy = rng::snap_frac(((c[1] - grid.origin[1]) / grid.ly).clamp(0.0, 1.0));
    [grid.origin[0] + fx * grid.lx, grid.origin[1] + fy * grid.ly]
}

/// Build the dyadic family: radii `2^-j` for `0 <= j <= j_max`, a
/// low-discrepancy center set per scale (domain midpoint first), concentric
/// pairs for every `(j1, j2)` with `j2 >= j1 + 1`, and one off-center inner
/// ball per outer whenever the admissibility margin allows (`j2 >= j1 + 2`).
///
/// On window grids, scales whose balls cannot fit strictly inside the
/// window are skipped. Centers are snapped to a dyadic sublattice of the
/// domain so whole-step translations stay exactly representable.
pub fn make_ball_family(
    grid: &GridSpec,
    j_max: u32,
    centers_per_scale: usize,
    seed: u64,
) -> Result<BallFamily> {
    let hmax = grid.hx().max(grid.hy());
    let r_min = 0.5f64.powi(j_max as i32);
    if r_min < 5.0 * hmax {
        let max_j = (1.0 / (5.0 * hmax)).log2().floor().max(0.0) as u32;
        return Err(Error::ScaleTooDeep { j_max, max_j });
    }
    let centers_per_scale = centers_per_scale.max(1);

    let mut balls: Vec<Ball> = Vec::new();
    let mut scale_balls: Vec<Vec<usize>> = Vec::with_capacity(j_max as usize + 1);
    let mut r2seq = R2::new(seed, "ball-centers");

    for j in 0..=j_max {
        let r = 0.5f64.powi(j as i32);
        let mut idxs = Vec::new();
        let candidates = center_candidates(grid, r, centers_per_scale, &mut r2seq);
        for c in candidates {
            let ball = Ball { center: c, radius: r };
            let n = ball_node_count(grid, &ball);
            if n < MIN_BALL_NODES {
                return Err(sparse_err(&ball, n));
            }
            idxs.push(balls.len());
            balls.push(ball);
        }
        scale_balls.push(idxs);
    }

    let mut pairs: Vec<(usize, usize)> = Vec::new();
    let mut dir_rng = rng::stream(seed, "ball-offcenter");
    for j1 in 0..=j_max {
        for &outer in &scale_balls[j1 as usize] {
            let r1 = balls[outer].radius;
            let c1 = balls[outer].center;
            for j2 in (j1 + 1)..=j_max {
                let r2 = 0.5f64.powi(j2 as i32);

                // concentric inner ball: displacement 0, always admissible
                let inner = Ball { center: c1, radius: r2 };
                let n = ball_node_count(grid, &inner);
                if n < MIN_BALL_NODES {
                    return Err(sparse_err(&inner, n));
                }
                pairs.push((outer, balls.len()));
                balls.push(inner);

                // off-center inner ball when the margin allows one
                let d_max = r1 - 2.0 * r2;
                if d_max > 0.0 {
                    let theta = rng::range_f64(&mut dir_rng, 0.0, std::f64::consts::TAU);
                    let d = 0.7 * d_max;
                    let raw = [c1[0] + d * theta.cos(), c1[1] + d * theta.sin()];
                    let c2 = snap_center(grid, grid.wrap_point(raw));
                    let shift = grid.distance(c2, c1);
                    if shift + 2.0 * r2 <= r1 {
                        let inner = Ball { center: c2, radius: r2 };
                        let n = ball_node_count(grid, &inner);
                        if n < MIN_BALL_NODES {
                            return Err(sparse_err(&inner, n));
                        }
                        pairs.push((outer, balls.len()));
                        balls.push(inner);
                    }
                }
            }
        }
    }

    for &(o, i) in &pairs {
        let (r1, r2) = (balls[o].radius, balls[i].radius);
        let d = grid.distance(balls[o].center, balls[i].center);
        assert!(r1 <= 1.0 && d + 2.0 * r2 <= r1, "inadmissible pair built: d={d} r1={r1} r2={r2}");
        assert!(lbmo_denominator(r1, r2) >= 1.0);
    }

    Ok(BallFamily {
        balls,
        pairs,
        scale_range: (r_min, 1.0),
        grid: *grid,
        j_max,
        centers_per_scale,
        seed,
    })
}

fn center_candidates(
    grid: &GridSpec,
    r: f64,
    count: usize,
    seq: &mut R2,
) -> Vec<[f64; 2]> {
    let mid = [grid.origin[0] + grid.lx / 2.0, grid.origin[1] + grid.ly / 2.0];
    match grid.topology {
        Topology::Torus => {
            if 2.0 * r > grid.lx.min(grid.ly) {
                return Vec::new();
            }
            let mut out = vec![snap_center(grid, mid)];
            while out.len() < count {
                let f = seq.next_point();
                let c = [grid.origin[0] + f[0] * grid.lx, grid.origin[1] + f[1] * grid.ly];
                out.push(snap_center(grid, c));
            }
            out
        }
        Topology::Window => {
            let margin = 2.0f64.powi(-20) * grid.lx.max(grid.ly);
            let wx = grid.lx - 2.0 * (r + margin);
            let wy = grid.ly - 2.0 * (r + margin);
            if wx < 0.0 || wy < 0.0 {
                // only the midpoint can work, and only if the ball fits
                if grid.ball_fits(mid, r) {
                    return vec![mid];
                }
                return Vec::new();
            }
            let mut out = vec![snap_center(grid, mid)];
            while out.len() < count {
                let f = seq.next_point();
                let c = [
                    grid.origin[0] + r + margin + f[0] * wx,
                    grid.origin[1] + r + margin + f[1] * wy,
                ];
                let c = snap_center(grid, c);
                if grid.ball_fits(c, r) {
                    out.push(c);
                }
            }
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use approx::assert_relative_eq;

    #[test]
    fn scan_matches_naive_membership() {
        // oracle: brute-force distance test over all nodes
        let g = GridSpec::square_torus(64).unwrap();
        let f = ScalarField2D::sample(g, |p| (p[0] - 0.3).sin() + p[1].cos()).unwrap();
        for &(c, r) in &[([1.0, 2.0], 0.8), ([0.1, 6.2], 0.5), ([3.14, 0.0], 1.0)] {
            let ball = Ball { center: c, radius: r };
            let mut naive_sum = 0.0;
            let mut naive_n = 0usize;
            for j in 0..g.ny {
                for i in 0..g.nx {
                    if g.distance(g.node(i, j), c) < r {
                        naive_sum += f.get(i, j);
                        naive_n += 1;
                    }
                }
            }
            let mut scan_sum = 0.0;
            let n = for_each_ball_node(&g, &ball, |k| scan_sum += f.values()[k]);
            assert_eq!(n, naive_n, "node count for ball {ball:?}");
            assert_eq!(scan_sum, naive_sum);
        }
    }

    #[test]
    fn scan_matches_naive_on_window() {
        let g = GridSpec::centered_window(48, 1.0).unwrap();
        let f = ScalarField2D::sample(g, |p| p[0] * p[1] + 0.2).unwrap();
        let ball = Ball { center: [0.25, -0.125], radius: 0.5 };
        let mut naive = 0.0;
        let mut naive_n = 0;
        for j in 0..g.ny {
            for i in 0..g.nx {
                if g.distance(g.node(i, j), ball.center) < ball.radius {
                    naive += f.get(i, j);
                    naive_n += 1;
                }
            }
        }
        let mut s = 0.0;
        let n = for_each_ball_node(&g, &ball, |k| s += f.values()[k]);
        assert_eq!((n, s), (naive_n, naive));
    }

    #[test]
    fn average_of_constant_is_constant() {
        let g = GridSpec::square_torus(64).unwrap();
        let f = ScalarField2D::constant(g, 2.5).unwrap();
        let a = ball_average(&f, &Ball { center: [3.0, 3.0], radius: 0.7 }).unwrap();
        assert_relative_eq!(a, 2.5, max_relative = 1e-14);
    }

    #[test]
    fn average_of_odd_function_vanishes() {
        let g = GridSpec::centered_window(256, 1.0).unwrap();
        let a = 0.25;
        let f = ScalarField2D::sample(g, |p| p[0] - a).unwrap();
        let avg = ball_average(&f, &Ball { center: [a, 0.1], radius: 0.3 }).unwrap();
        assert!(avg.abs() <= 2.0 * g.hx(), "quadrature error {avg}");
    }

    #[test]
    fn average_of_radius_squared() {
        // (1/pi r^2) \int_0^r rho^2 2 pi rho d rho = r^2/2
        let g = GridSpec::centered_window(1024, 1.0).unwrap();
        let f = ScalarField2D::sample(g, |p| p[0] * p[0] + p[1] * p[1]).unwrap();
        let r = 0.5;
        let avg = ball_average(&f, &Ball { center: [0.0, 0.0], radius: r }).unwrap();
        assert!((avg - r * r / 2.0).abs() < 1e-3, "got {avg}");
    }

    #[test]
    fn sparse_ball_errors() {
        let g = GridSpec::square_torus(16).unwrap();
        let f = ScalarField2D::constant(g, 1.0).unwrap();
        let e = ball_average(&f, &Ball { center: [1.0, 1.0], radius: 0.05 });
        assert!(matches!(e, Err(Error::BallTooSparse { .. })));
    }

    #[test]
    fn family_pairs_are_admissible_and_deterministic() {
        let g = GridSpec::square_torus(512).unwrap();
        let fam = make_ball_family(&g, 3, 64, 11).unwrap();
        assert!(!fam.pairs.is_empty());
        // at least one pair for every (j1, j2 >= j1+1) scale combination
        for j1 in 0..3u32 {
            for j2 in (j1 + 1)..=3 {
                let (r1, r2) = (0.5f64.powi(j1 as i32), 0.5f64.powi(j2 as i32));
                assert!(
                    fam.pairs.iter().any(|&(o, i)| {
                        fam.balls[o].radius == r1 && fam.balls[i].radius == r2
                    }),
                    "missing pair scales ({j1}, {j2})"
                );
            }
        }
        let fam2 = make_ball_family(&g, 3, 64, 11).unwrap();
        assert_eq!(fam.balls.len(), fam2.balls.len());
        assert!(fam.balls.iter().zip(&fam2.balls).all(|(a, b)| a == b));
    }

    #[test]
    fn family_j0_has_no_pairs() {
        let g = GridSpec::square_torus(64).unwrap();
        let fam = make_ball_family(&g, 0, 8, 1).unwrap();
        assert!(fam.pairs.is_empty());
        assert!(!fam.balls.is_empty());
    }

    #[test]
    fn family_depth_guard() {
        let g = GridSpec::square_torus(64).unwrap();
        match make_ball_family(&g, 8, 8, 1) {
            Err(Error::ScaleTooDeep { max_j, .. }) => {
                assert!(make_ball_family(&g, max_j, 8, 1).is_ok());
            }
            other => panic!("expected ScaleTooDeep, got {other:?}"),
        }
    }

    #[test]
    fn deep_family_balls_keep_enough_nodes() {
        let g = GridSpec::square_torus(512).unwrap();
        let fam = make_ball_family(&g, 5, 16, 3).unwrap();
        for b in &fam.balls {
            assert!(ball_node_count(&g, b) >= MIN_BALL_NODES);
        }
    }

    #[test]
    fn window_family_skips_oversized_scales() {
        let g = GridSpec::centered_window(512, 1.0).unwrap();
        let fam = make_ball_family(&g, 5, 16, 3).unwrap();
        // r = 1 fits only at the midpoint of [-1,1)^2
        let r1_balls: Vec<&Ball> = fam.balls.iter().filter(|b| b.radius == 1.0).collect();
        assert_eq!(r1_balls.len(), 1);
        for b in &fam.balls {
            assert!(g.ball_fits(b.center, b.radius), "{b:?} leaves the window");
        }
    }
}
