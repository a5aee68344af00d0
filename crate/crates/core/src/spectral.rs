//! FFT workspace and the periodic Biot-Savart inversion
//! `û(k) = i k⊥ ω̂(k) / |k|²`, `k⊥ = (-k2, k1)`, with the zero mode gauged
//! to zero (mean-free velocity).
//!
//! Plans are cached per grid; scratch lives on the stack of each call, so a
//! workspace is reusable but not meant to be shared across threads.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::field::{ScalarField2D, VectorField2D};
use crate::grid::GridSpec;
use crate::{Error, Result};

pub struct SpectralWorkspace {
    pub spec: GridSpec,
    fft_x: Arc<dyn Fft<f64>>,
    ifft_x: Arc<dyn Fft<f64>>,
    fft_y: Arc<dyn Fft<f64>>,
    ifft_y: Arc<dyn Fft<f64>>,
    /// Signed wavenumbers `2π m / l`; index `n/2` holds the Nyquist mode.
    kx: Vec<f64>,
    ky: Vec<f64>,
    /// Derivative multipliers: as `kx`/`ky` but zero at Nyquist, where the
    /// sign of an odd derivative is not representable.
    dx: Vec<f64>,
    dy: Vec<f64>,
}

fn wavenumbers(n: usize, l: f64) -> Vec<f64> {
    let base = 2.0 * std::f64::consts::PI / l;
    (0..n)
        .map(|i| {
            let m = if i <= n / 2 { i as isize } else { i as isize - n as isize };
            base * m as f64
        })
        .collect()
}

impl SpectralWorkspace {
    pub fn new(spec: &GridSpec) -> Result<Self> {
        if !spec.is_torus() {
            return Err(Error::NotATorus);
        }
        if !spec.is_power_of_two() {
            return Err(Error::NonPowerOfTwoGrid { nx: spec.nx, ny: spec.ny });
        }
        let mut planner = FftPlanner::new();
        let kx = wavenumbers(spec.nx, spec.lx);
        let ky = wavenumbers(spec.ny, spec.ly);
        let mut dx = kx.clone();
        let mut dy = ky.clone();
        dx[spec.nx / 2] = 0.0;
        dy[spec.ny / 2] = 0.0;
        Ok(SpectralWorkspace {
            spec: *spec,
            fft_x: planner.plan_fft_forward(spec.nx),
            ifft_x: planner.plan_fft_inverse(spec.nx),
            fft_y: planner.plan_fft_forward(spec.ny),
            ifft_y: planner.plan_fft_inverse(spec.ny),
            kx,
            ky,
            dx,
            dy,
        })
    }

    fn fft2(&self, data: &mut Vec<Complex<f64>>, inverse: bool) {
        let (nx, ny) = (self.spec.nx, self.spec.ny);
        let (row_fft, col_fft) = if inverse {
            (&self.ifft_x, &self.ifft_y)
        } else {
            (&self.fft_x, &self.fft_y)
        };
        data.par_chunks_mut(nx).for_each_init(
            || vec![Complex::default(); row_fft.get_inplace_scratch_len()],
            |scratch, row| row_fft.process_with_scratch(row, scratch),
        );
        let mut t = vec![Complex::default(); nx * ny];
        transpose(data, nx, ny, &mut t);
        t.par_chunks_mut(ny).for_each_init(
            || vec![Complex::default(); col_fft.get_inplace_scratch_len()],
            |scratch, col| col_fft.process_with_scratch(col, scratch),
        );
        transpose(&t, ny, nx, data);
    }

    /// Normalized DFT coefficients (`ω̂_0` is the discrete mean).
    pub fn forward(&self, field: &ScalarField2D) -> Vec<Complex<f64>> {
        let scale = 1.0 / field.grid.len() as f64;
        let mut data: Vec<Complex<f64>> =
            field.values().iter().map(|&v| Complex::new(v * scale, 0.0)).collect();
        self.fft2(&mut data, false);
        data
    }

    pub fn inverse_real(&self, mut coeffs: Vec<Complex<f64>>) -> Vec<f64> {
        self.fft2(&mut coeffs, true);
        coeffs.into_iter().map(|c| c.re).collect()
    }

    /// 2/3-rule truncation: zero every mode with `|m_x| > nx/3` or
    /// `|m_y| > ny/3`.
    pub fn dealias(&self, coeffs: &mut [Complex<f64>]) {
        let (nx, ny) = (self.spec.nx, self.spec.ny);
        let mx = nx / 3;
        let my = ny / 3;
        for j in 0..ny {
            let wy = if j <= ny / 2 { j } else { ny - j };
            for i in 0..nx {
                let wx = if i <= nx / 2 { i } else { nx - i };
                if wx > mx || wy > my {
                    coeffs[j * nx + i] = Complex::default();
                }
            }
        }
    }

    /// Spectral gradient with Nyquist-stripped odd-derivative multipliers.
    pub fn gradient(&self, field: &ScalarField2D) -> Result<VectorField2D> {
        let what = self.forward(field);
        let (nx, ny) = (self.spec.nx, self.spec.ny);
        let mut gx = vec![Complex::default(); nx * ny];
        let mut gy = vec![Complex::default(); nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                let k = j * nx + i;
                gx[k] = what[k] * Complex::new(0.0, self.dx[i]);
                gy[k] = what[k] * Complex::new(0.0, self.dy[j]);
            }
        }
        VectorField2D::from_components(self.spec, self.inverse_real(gx), self.inverse_real(gy))
    }

    /// Biot-Savart inversion on the torus. The vorticity must be mean-free
    /// (the periodic kernel is undefined otherwise); the zero mode of the
    /// velocity is gauged to zero, and the output is divergence-free with
    /// curl reproducing the resolvable part of `ω`.
    pub fn velocity_from_vorticity(&self, omega: &ScalarField2D) -> Result<VectorField2D> {
        let mean = omega.mean();
        if mean.abs() > 1e-12 * omega.max_abs().max(1e-300) {
            return Err(Error::NonzeroMean { mean });
        }
        let what = self.forward(omega);
        let (u1, u2) = self.velocity_coeffs(&what);
        let vel = VectorField2D::from_components(
            self.spec,
            self.inverse_real(u1),
            self.inverse_real(u2),
        )?;
        #[cfg(debug_assertions)]
        self.debug_check_inversion(&what, &vel);
        Ok(vel)
    }

    fn velocity_coeffs(
        &self,
        what: &[Complex<f64>],
    ) -> (Vec<Complex<f64>>, Vec<Complex<f64>>) {
        let (nx, ny) = (self.spec.nx, self.spec.ny);
        let mut u1 = vec![Complex::default(); nx * ny];
        let mut u2 = vec![Complex::default(); nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                if i == 0 && j == 0 {
                    continue;
                }
                let k = j * nx + i;
                let k2 = self.kx[i] * self.kx[i] + self.ky[j] * self.ky[j];
                let w = what[k] / k2;
                u1[k] = w * Complex::new(0.0, -self.dy[j]);
                u2[k] = w * Complex::new(0.0, self.dx[i]);
            }
        }
        (u1, u2)
    }

    /// Kinetic energy `½ ∫ |u|² = ½ lx ly Σ_{k≠0} |ω̂_k|² / |k|²`.
    pub fn energy(&self, omega: &ScalarField2D) -> f64 {
        let what = self.forward(omega);
        let (nx, ny) = (self.spec.nx, self.spec.ny);
        let mut sum = 0.0;
        for j in 0..ny {
            for i in 0..nx {
                if i == 0 && j == 0 {
                    continue;
                }
                let k2 = self.kx[i] * self.kx[i] + self.ky[j] * self.ky[j];
                sum += what[j * nx + i].norm_sqr() / k2;
            }
        }
        0.5 * self.spec.lx * self.spec.ly * sum
    }

    /// Max spectral-divergence residual of a velocity field, relative to
    /// its largest `|k||û(k)|`.
    pub fn divergence_rel(&self, vel: &VectorField2D) -> f64 {
        let u1 = self.forward(&vel.component(0));
        let u2 = self.forward(&vel.component(1));
        let (nx, ny) = (self.spec.nx, self.spec.ny);
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for j in 0..ny {
            for i in 0..nx {
                let k = j * nx + i;
                let div = self.kx[i] * u1[k] + self.ky[j] * u2[k];
                worst = worst.max(div.norm());
                let kn = (self.kx[i] * self.kx[i] + self.ky[j] * self.ky[j]).sqrt();
                scale = scale.max(kn * (u1[k].norm() + u2[k].norm()));
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            worst / scale
        }
    }

    /// Spectral curl `∂1 u2 - ∂2 u1` as a field.
    pub fn curl(&self, vel: &VectorField2D) -> Result<ScalarField2D> {
        let u1 = self.forward(&vel.component(0));
        let u2 = self.forward(&vel.component(1));
        let (nx, ny) = (self.spec.nx, self.spec.ny);
        let mut c = vec![Complex::default(); nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                let k = j * nx + i;
                c[k] = u2[k] * Complex::new(0.0, self.dx[i]) - u1[k] * Complex::new(0.0, self.dy[j]);
            }
        }
        ScalarField2D::from_values(self.spec, self.inverse_real(c))
    }

    /// `ω` with the mean and the Nyquist lines removed: the part of the
    /// spectrum the inversion can represent.
    pub fn resolvable_part(&self, omega: &ScalarField2D) -> Result<ScalarField2D> {
        let mut what = self.forward(omega);
        let (nx, ny) = (self.spec.nx, self.spec.ny);
        what[0] = Complex::default();
        for j in 0..ny {
            for i in 0..nx {
                if i == nx / 2 || j == ny / 2 {
                    what[j * nx + i] = Complex::default();
                }
            }
        }
        ScalarField2D::from_values(self.spec, self.inverse_real(what))
    }

    #[cfg(debug_assertions)]
    fn debug_check_inversion(&self, what: &[Complex<f64>], vel: &VectorField2D) {
        let div = self.divergence_rel(vel);
        debug_assert!(div <= 1e-10, "spectral divergence {div} out of tolerance");
        let curl = self.forward(&self.curl(vel).expect("curl of finite field"));
        let (nx, ny) = (self.spec.nx, self.spec.ny);
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for j in 0..ny {
            for i in 0..nx {
                let k = j * nx + i;
                scale = scale.max(what[k].norm());
                if (i == 0 && j == 0) || i == nx / 2 || j == ny / 2 {
                    continue;
                }
                worst = worst.max((curl[k] - what[k]).norm());
            }
        }
        debug_assert!(
            scale == 0.0 || worst <= 1e-10 * scale,
            "curl residual {worst} vs scale {scale}"
        );
    }
}

fn transpose(src: &[Complex<f64>], nx: usize, ny: usize, dst: &mut [Complex<f64>]) {
    for j in 0..ny {
        for i in 0..nx {
            dst[i * ny + j] = src[j * nx + i];
        }
    }
}
