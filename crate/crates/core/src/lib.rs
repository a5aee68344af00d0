//! Numerical toolkit for the 2D incompressible Euler equation with
//! vorticity in BMO-type spaces.
//!
//! The crate provides uniform sampled fields on the flat torus and on plane
//! windows, ball-average estimators for the BMO / LBMO / log-Lipschitz
//! norms, a pseudo-spectral vorticity solver with Biot-Savart inversion,
//! flow-map integration for time-dependent velocities, and the logarithmic
//! modulus machinery (`Φ`, `g`, `g_ψ`, `‖ψ‖*`) that controls how
//! measure-preserving flows distort these norms.

pub mod balls;
pub mod error;
pub mod f2d;
pub mod field;
pub mod flow;
pub mod grid;
pub mod kernel;
pub mod maps;
pub mod modulus;
pub mod norms;
pub mod rng;
pub mod solver;
pub mod spectral;
pub mod velocity;

pub use error::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Environment variable capping worker parallelism.
pub const THREADS_ENV: &str = "LBMO_EULER_THREADS";

/// Configure the global worker pool from [`THREADS_ENV`].
///
/// Returns the applied thread count, or an error string if the variable is
/// set to something that is not a positive integer. Unset means the default
/// pool size. Safe to call more than once; later calls are no-ops.
pub fn init_threads_from_env() -> std::result::Result<usize, String> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(rayon::current_num_threads()),
        Ok(raw) => {
            let n: usize = raw
                .trim()
                .parse()
                .map_err(|_| format!("{THREADS_ENV} must be a positive integer, got {raw:?}"))?;
            if n == 0 {
                return Err(format!("{THREADS_ENV} must be a positive integer, got 0"));
            }
            // Ignore AlreadyInitialized: first configuration wins.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            Ok(rayon::current_num_threads())
        }
    }
}
