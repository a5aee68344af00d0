//! The logarithmic distortion modulus of a homeomorphism.
//!
//! `phi(r, s)` measures how far apart two separations sit on the
//! `1 + |ln .|` scale: a ratio when both are on the same side of 1, a
//! product when they straddle it. `star_modulus` estimates
//! `‖ψ‖* = sup Φ(|ψx - ψy|, |x - y|)` over stratified pair samples;
//! `distortion_chart` is the increasing chart `g` with
//! `exp|g(a) - g(b)| = Φ(a, b)` on the same-side branch, and
//! `image_ball_radius` is the two-branch radius bound `g_ψ` for images of
//! balls, with its log-of-log estimate.

use rand_core::RngCore;
use serde::{Deserialize, Serialize};

use crate::flow::SampledMap;
use crate::grid::GridSpec;
use crate::maps::PointMap;
use crate::rng;
use crate::{Error, Result};

/// Symmetric two-branch distortion of a separation pair; always `>= 1`.
///
/// Same side of 1: `max{(1+|ln s|)/(1+|ln r|), (1+|ln r|)/(1+|ln s|)}`;
/// straddling 1: `(1+|ln s|)(1+|ln r|)`. Bitwise symmetric in `(r, s)`.
pub fn phi(r: f64, s: f64) -> Result<f64> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::NonpositiveArgument { value: r });
    }
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::NonpositiveArgument { value: s });
    }
    let a = 1.0 + s.ln().abs();
    let b = 1.0 + r.ln().abs();
    if (1.0 - s) * (1.0 - r) >= 0.0 {
        Ok((a / b).max(b / a))
    } else {
        Ok(a * b)
    }
}

/// Strictly increasing chart with `g(1) = 0`: `ln(1 + ln τ)` above 1,
/// `-ln(1 - ln τ)` below. Along a log-Lipschitz flow, `g` of a pair
/// separation moves at unit speed, which is what turns the transport
/// inequality into the exponential flow bound.
pub fn distortion_chart(tau: f64) -> Result<f64> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::NonpositiveArgument { value: tau });
    }
    if tau >= 1.0 {
        Ok(tau.ln().ln_1p())
    } else {
        Ok(-(-tau.ln()).ln_1p())
    }
}

/// Radius bound for the image of a ball of radius `r` under a
/// measure-preserving homeomorphism with modulus `star`:
/// `4 e^star r^star` for `r >= 1`, `4 max{e r^(1/star), e^star r}` below.
/// Monotone nondecreasing in both arguments.
pub fn image_ball_radius(r: f64, star: f64) -> Result<f64> {
    Ok(ln_image_ball_radius(r, star)?.exp())
}

/// `ln` of [`image_ball_radius`], evaluated without forming the (possibly
/// astronomically large) radius itself.
pub fn ln_image_ball_radius(r: f64, star: f64) -> Result<f64> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::NonpositiveArgument { value: r });
    }
    if !(star >= 1.0) {
        return Err(Error::StarBelowOne { star });
    }
    let ln4 = 4.0f64.ln();
    if r >= 1.0 {
        Ok(ln4 + star + star * r.ln())
    } else {
        Ok(ln4 + (1.0 + r.ln() / star).max(star + r.ln()))
    }
}

/// Left side of the log-of-log estimate:
/// `|ln((1 + |ln g_ψ(r)|)/(1 + |ln r|))|`.
pub fn image_radius_log_ratio(r: f64, star: f64) -> Result<f64> {
    let ln_g = ln_image_ball_radius(r, star)?;
    let num = 1.0 + ln_g.abs();
    let den = 1.0 + r.ln().abs();
    Ok((num / den).ln().abs())
}

/// Relative tolerance below which two separations are treated as equal by
/// the star estimators. Float-evaluated isometries (rotations at generic
/// angles) perturb distances by a few ulps; without the snap their Φ would
/// sit at `1 + O(1e-16)` instead of exactly 1. The snap can only lower an
/// estimate by that same margin, so the lower-bound property survives.
pub const SEPARATION_SNAP: f64 = 8.0 * f64::EPSILON;

#[inline]
fn phi_snapped(r: f64, s: f64) -> f64 {
    if (r - s).abs() <= SEPARATION_SNAP * r.abs().max(s.abs()) {
        return 1.0;
    }
    // positivity is the caller's responsibility on this fast path
    let a = 1.0 + s.ln().abs();
    let b = 1.0 + r.ln().abs();
    if (1.0 - s) * (1.0 - r) >= 0.0 {
        (a / b).max(b / a)
    } else {
        a * b
    }
}

/// One correspondence `x -> ψ(x)`, `y -> ψ(y)`; the atom every modulus
/// statistic is computed from.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PairSample {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub fx: [f64; 2],
    pub fy: [f64; 2],
}

impl PairSample {
    #[inline]
    pub fn separations(&self) -> (f64, f64) {
        let s = (self.x[0] - self.y[0]).hypot(self.x[1] - self.y[1]);
        let r = (self.fx[0] - self.fy[0]).hypot(self.fx[1] - self.fy[1]);
        (r, s)
    }

    /// The same correspondence read backwards: a pair sample of `ψ⁻¹`
    /// over the mapped pair set.
    #[inline]
    pub fn swapped(&self) -> PairSample {
        PairSample { x: self.fx, y: self.fy, fx: self.x, fy: self.y }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModulusReport {
    /// Estimated `‖ψ‖*`; a lower bound of the true supremum, `>= 1`.
    pub star: f64,
    pub argmax: PairSample,
    pub pair_count: usize,
}

impl ModulusReport {
    /// Re-evaluate Φ on the stored argmax pair; equals `star` exactly.
    pub fn recompute(&self) -> f64 {
        let (r, s) = self.argmax.separations();
        phi_snapped(r, s)
    }
}

/// Max of Φ over explicit correspondences. Degenerate pairs (either
/// separation zero) are skipped; coincident-point streams therefore cannot
/// fake a supremum.
pub fn star_from_correspondences<I>(pairs: I) -> Result<ModulusReport>
where
    I: IntoIterator<Item = PairSample>,
{
    let mut best: Option<(f64, PairSample)> = None;
    let mut count = 0usize;
    for p in pairs {
        count += 1;
        let (r, s) = p.separations();
        if r <= 0.0 || s <= 0.0 {
            continue;
        }
        let v = phi_snapped(r, s);
        if best.as_ref().map_or(true, |(b, _)| v > *b) {
            best = Some((v, p));
        }
    }
    match best {
        None => Err(Error::TooFewSeeds { got: count }),
        Some((star, argmax)) => Ok(ModulusReport { star, argmax, pair_count: count }),
    }
}

/// Stratified seed-lattice index pairs for a sampled map: adjacent pairs
/// (near-coincident separations, pinning Φ(r,r)=1) plus seeded pairs at
/// dyadic index offsets. The supremum of Φ is scale-sensitive, so pairs are
/// spread across separations rather than drawn uniformly.
pub fn stratified_index_pairs(
    grid: &GridSpec,
    pair_budget: usize,
    seed: u64,
) -> Vec<(usize, usize)> {
    let (nx, ny) = (grid.nx, grid.ny);
    let mut out = Vec::with_capacity(pair_budget);
    // adjacent pairs on a decimated sublattice
    let quota = (pair_budget / 4).max(16);
    let stride = (((2 * nx * ny) as f64 / quota as f64).sqrt().ceil() as usize).max(1);
    for j in (0..ny).step_by(stride) {
        for i in (0..nx).step_by(stride) {
            if i + 1 < nx {
                out.push((grid.idx(i, j), grid.idx(i + 1, j)));
            }
            if j + 1 < ny {
                out.push((grid.idx(i, j), grid.idx(i, j + 1)));
            }
        }
    }
    // dyadic offsets: |Δindex| from the full lattice span down to 1
    let levels: Vec<usize> = std::iter::successors(Some(nx.min(ny) / 2), |&d| {
        if d > 1 {
            Some(d / 2)
        } else {
            None
        }
    })
    .collect();
    let remaining = pair_budget.saturating_sub(out.len());
    let per_level = remaining.div_ceil(levels.len().max(1)).max(1);
    for (li, &d) in levels.iter().enumerate() {
        let mut rs = rng::stream(seed, &format!("star-level-{li}"));
        for _ in 0..per_level {
            let i = (rs.next_u64() % nx as u64) as usize;
            let j = (rs.next_u64() % ny as u64) as usize;
            let theta = rng::range_f64(&mut rs, 0.0, std::f64::consts::TAU);
            let di = (d as f64 * theta.cos()).round() as isize;
            let dj = (d as f64 * theta.sin()).round() as isize;
            if di == 0 && dj == 0 {
                continue;
            }
            let i2 = (i as isize + di).rem_euclid(nx as isize) as usize;
            let j2 = (j as isize + dj).rem_euclid(ny as isize) as usize;
            out.push((grid.idx(i, j), grid.idx(i2, j2)));
        }
    }
    out
}

/// Modulus estimate for a sampled map over stratified seed-lattice pairs.
/// Distances are Euclidean on the (unwrapped) seed window.
pub fn star_modulus_sampled(
    map: &SampledMap,
    pair_budget: usize,
    seed: u64,
) -> Result<ModulusReport> {
    if map.grid.len() < 2 {
        return Err(Error::TooFewSeeds { got: map.grid.len() });
    }
    let pairs = stratified_index_pairs(&map.grid, pair_budget, seed);
    star_from_correspondences(pairs.into_iter().map(|(a, b)| map.pair_sample(a, b)))
}

/// Stratified real-plane point pairs inside a window, at dyadic separations
/// from the window size down to `t_min`, with axis-aligned probes per scale.
pub fn stratified_point_pairs(
    lo: [f64; 2],
    hi: [f64; 2],
    t_min: f64,
    pair_budget: usize,
    seed: u64,
) -> Vec<([f64; 2], [f64; 2])> {
    let span = (hi[0] - lo[0]).min(hi[1] - lo[1]);
    let t_max = 0.5 * span;
    let mut scales = Vec::new();
    let mut t = t_max;
    while t >= t_min {
        scales.push(t);
        t *= 0.5;
    }
    if scales.is_empty() {
        scales.push(t_max);
    }
    let per_scale = pair_budget.div_ceil(scales.len()).max(1);
    let mut out = Vec::with_capacity(scales.len() * (per_scale + 4));
    let mid = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0];
    for (si, &t) in scales.iter().enumerate() {
        for dir in [[1.0f64, 0.0], [0.0, 1.0], [1.0, 1.0]] {
            let n = (dir[0] * dir[0] + dir[1] * dir[1]).sqrt();
            out.push((mid, [mid[0] + t * dir[0] / n, mid[1] + t * dir[1] / n]));
        }
        let mut rs = rng::stream(seed, &format!("pair-scale-{si}"));
        for _ in 0..per_scale {
            let a = [
                rng::range_f64(&mut rs, lo[0], hi[0]),
                rng::range_f64(&mut rs, lo[1], hi[1]),
            ];
            let theta = rng::range_f64(&mut rs, 0.0, std::f64::consts::TAU);
            out.push((a, [a[0] + t * theta.cos(), a[1] + t * theta.sin()]));
        }
    }
    out
}

/// Modulus estimate for an analytic map over a stratified pair set drawn
/// from `[lo, hi]`.
pub fn star_modulus_map(
    map: &dyn PointMap,
    lo: [f64; 2],
    hi: [f64; 2],
    pair_budget: usize,
    seed: u64,
) -> Result<ModulusReport> {
    let pairs = stratified_point_pairs(lo, hi, 1e-5, pair_budget, seed);
    star_from_correspondences(pairs.into_iter().map(|(x, y)| PairSample {
        x,
        y,
        fx: map.map_point(x),
        fy: map.map_point(y),
    }))
}

/// Worst relative violation of the three-case two-sided separation bounds
/// for a homeomorphism of modulus at most `star`:
///
/// * both separations `>= 1`:  `e^-1 s^(1/M) <= r <= e^M s^M`
/// * both separations `<= 1`:  `e^-M s^M <= r <= e s^(1/M)`
/// * straddling:               `e^-M s <= r <= e^M s`
///
/// where `s = |x-y|`, `r = |ψx-ψy|`, `M = star`. Nonpositive return means
/// every sampled pair satisfies its bound. `star` must dominate the true
/// modulus for the bounds to be meaningful.
pub fn check_separation_bounds<I>(pairs: I, star: f64) -> Result<f64>
where
    I: IntoIterator<Item = PairSample>,
{
    if !(star >= 1.0) {
        return Err(Error::StarBelowOne { star });
    }
    let m = star;
    let mut worst = f64::NEG_INFINITY;
    let mut seen = false;
    for p in pairs {
        let (r, s) = p.separations();
        if r <= 0.0 || s <= 0.0 {
            continue;
        }
        seen = true;
        let (lob, hib) = if s >= 1.0 && r >= 1.0 {
            ((-1.0f64).exp() * s.powf(1.0 / m), (m + m * s.ln()).exp())
        } else if s <= 1.0 && r <= 1.0 {
            ((-m + m * s.ln()).exp(), (1.0 + s.ln() / m).exp())
        } else {
            ((-m).exp() * s, m.exp() * s)
        };
        let v = ((lob - r) / lob).max((r - hib) / hib);
        if v > worst {
            worst = v;
        }
    }
    if !seen {
        return Err(Error::TooFewSeeds { got: 0 });
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn phi_identical_arguments() {
        for r in [0.001, 0.5, 1.0, 3.0, 100.0] {
            assert_eq!(phi(r, r).unwrap(), 1.0);
        }
    }

    #[test]
    fn phi_hand_values() {
        // both below 1: ratio branch
        let v = phi((-1.0f64).exp(), (-3.0f64).exp()).unwrap();
        assert_relative_eq!(v, 2.0, max_relative = 1e-12);
        // straddling 1: product branch
        let v = phi(1.0f64.exp(), (-1.0f64).exp()).unwrap();
        assert_relative_eq!(v, 4.0, max_relative = 1e-12);
    }

    #[test]
    fn phi_symmetric_bitwise() {
        let mut rs = rng::stream(5, "phi-sym");
        for _ in 0..1000 {
            let r = (rng::range_f64(&mut rs, -6.0, 6.0)).exp();
            let s = (rng::range_f64(&mut rs, -6.0, 6.0)).exp();
            assert_eq!(phi(r, s).unwrap().to_bits(), phi(s, r).unwrap().to_bits());
            assert!(phi(r, s).unwrap() >= 1.0);
        }
    }

    #[test]
    fn phi_rejects_nonpositive() {
        assert!(phi(0.0, 1.0).is_err());
        assert!(phi(1.0, -2.0).is_err());
    }

    #[test]
    fn chart_values_and_continuity() {
        assert_eq!(distortion_chart(1.0).unwrap(), 0.0);
        assert_relative_eq!(distortion_chart(1.0f64.exp()).unwrap(), 2.0f64.ln(), max_relative = 1e-14);
        // continuous and increasing through 1
        let eps = 1e-8;
        assert!(distortion_chart(1.0 - eps).unwrap() < 0.0);
        assert!(distortion_chart(1.0 + eps).unwrap() > 0.0);
        assert!(distortion_chart(1.0 + eps).unwrap() < 2.0 * eps);
        let mut prev = f64::NEG_INFINITY;
        for k in -40..=40 {
            let v = distortion_chart((k as f64 * 0.25).exp()).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn chart_exponentiates_to_phi_on_same_side() {
        for i in 0..60 {
            for k in 0..60 {
                // both below 1 and both above 1
                let (r, s) = ((-(i as f64) * 0.2 - 0.01).exp(), (-(k as f64) * 0.2 - 0.01).exp());
                let lhs = (distortion_chart(s).unwrap() - distortion_chart(r).unwrap()).abs().exp();
                assert_relative_eq!(lhs, phi(r, s).unwrap(), max_relative = 1e-12);
                let (r, s) = (1.0 / r, 1.0 / s);
                let lhs = (distortion_chart(s).unwrap() - distortion_chart(r).unwrap()).abs().exp();
                assert_relative_eq!(lhs, phi(r, s).unwrap(), max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn image_radius_branches() {
        let e = 1.0f64.exp();
        // star = 1: both branches collapse to 4 e r
        assert_relative_eq!(image_ball_radius(2.0, 1.0).unwrap(), 4.0 * e * 2.0, max_relative = 1e-12);
        assert_relative_eq!(image_ball_radius(0.25, 1.0).unwrap(), 4.0 * e * 0.25, max_relative = 1e-12);
        // monotone in r and star
        let mut prev = 0.0;
        for k in -10..=10 {
            let v = image_ball_radius(2.0f64.powi(k), 3.0).unwrap();
            assert!(v > prev);
            prev = v;
        }
        let mut prev = 0.0;
        for m in 1..=12 {
            let v = image_ball_radius(0.37, m as f64).unwrap();
            assert!(v >= prev);
            prev = v;
        }
        assert!(image_ball_radius(1.0, 0.5).is_err());
    }

    #[test]
    fn log_ratio_estimate_fitted_constant() {
        // fitted K over the dyadic sweep stays well under 4
        let mut k_fit = 0.0f64;
        for e in -20..=10 {
            let r = 2.0f64.powi(e);
            for star in 1..=64 {
                let star = star as f64;
                let lhs = image_radius_log_ratio(r, star).unwrap();
                k_fit = k_fit.max(lhs / (1.0 + (1.0 + star).ln()));
            }
        }
        assert!(k_fit < 4.0, "fitted K = {k_fit}");
    }

    #[test]
    fn identity_correspondences_give_exactly_one() {
        let pairs = (0..32).map(|k| {
            let x = [k as f64 * 0.1, (k as f64 * 0.07).sin()];
            let y = [x[0] + 0.3, x[1] - 0.2];
            PairSample { x, y, fx: x, fy: y }
        });
        let rep = star_from_correspondences(pairs).unwrap();
        assert_eq!(rep.star, 1.0);
        assert_eq!(rep.recompute(), rep.star);
    }

    #[test]
    fn rotation_correspondences_snap_to_one() {
        let (c, s) = (0.6f64.cos(), 0.6f64.sin());
        let rot = |p: [f64; 2]| [c * p[0] - s * p[1], s * p[0] + c * p[1]];
        let pairs = (0..200).map(|k| {
            let x = [(k as f64 * 0.37).sin() * 2.0, (k as f64 * 0.53).cos() * 2.0];
            let y = [x[0] + 1.0 / (k + 1) as f64, x[1] + 0.4];
            PairSample { x, y, fx: rot(x), fy: rot(y) }
        });
        let rep = star_from_correspondences(pairs).unwrap();
        assert_eq!(rep.star, 1.0);
    }

    #[test]
    fn forward_and_inverse_star_agree_exactly_on_mapped_pairs() {
        // shear correspondences; the inverse map over the mapped pair set
        // reads the same atoms backwards, and Φ is bitwise symmetric
        let shear = |p: [f64; 2]| [p[0] + 2.0 * p[1], p[1]];
        let pairs: Vec<PairSample> = (0..500)
            .map(|k| {
                let x = [(k as f64 * 0.11).sin() * 3.0, (k as f64 * 0.29).cos() * 3.0];
                let y = [x[0] + 0.5 * ((k % 7) as f64 - 3.0), x[1] + 0.25];
                PairSample { x, y, fx: shear(x), fy: shear(y) }
            })
            .collect();
        let fwd = star_from_correspondences(pairs.iter().copied()).unwrap();
        let inv = star_from_correspondences(pairs.iter().map(|p| p.swapped())).unwrap();
        assert_eq!(fwd.star.to_bits(), inv.star.to_bits());
        assert!(fwd.star > 1.0);
    }

    #[test]
    fn separation_bounds_identity_and_shear() {
        let pairs: Vec<PairSample> = (0..2000)
            .map(|k| {
                let x = [(k as f64 * 0.013).sin() * 4.0, (k as f64 * 0.041).cos() * 4.0];
                let t = 2.0f64.powi((k % 16) as i32 - 8);
                let y = [x[0] + t, x[1] - t * 0.5];
                PairSample { x, y, fx: x, fy: y }
            })
            .collect();
        // identity with exact star = 1: all cases collapse, no violations
        let worst = check_separation_bounds(pairs.iter().copied(), 1.0).unwrap();
        assert!(worst <= 0.0, "identity violated: {worst}");

        let shear = |p: [f64; 2]| [p[0] + p[1], p[1]];
        let sheared: Vec<PairSample> = pairs
            .iter()
            .map(|p| PairSample { x: p.x, y: p.y, fx: shear(p.x), fy: shear(p.y) })
            .collect();
        // upper bound for the shear's modulus, from the bi-Lipschitz constant
        let sigma = (1.0 + 5.0f64.sqrt()) / 2.0;
        let star = (1.0 + sigma.ln() / 2.0).powi(2);
        let worst = check_separation_bounds(sheared.iter().copied(), star * 1.1).unwrap();
        assert!(worst <= 0.0, "shear violated: {worst}");
        assert!(check_separation_bounds(sheared.iter().copied(), 0.5).is_err());
    }
}
