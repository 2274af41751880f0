//! Numerical kernels shared by the physics modules.

mod eigen;
mod fft;
mod fit;
mod window;

pub use eigen::{eigensolve, EigenSystem, HermitianMatrix};
pub use fft::{bin_frequencies, fft_real, ifft_real};
pub use fit::{linear_fit, nlls_fit, FitResult, JacobianFn, NllsOptions};
pub use window::Window;
