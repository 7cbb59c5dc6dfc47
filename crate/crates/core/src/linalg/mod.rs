pub mod banded;
pub mod eigen;
pub mod scalar;
pub mod sparse;

pub use banded::{BandLu, BandMatrix, SymBandLdl};
pub use eigen::{count_below, kth_eigenvalue, min_eig_sym, EigOptions, EigPair};
pub use scalar::Scalar;
pub use sparse::CsrMatrix;
