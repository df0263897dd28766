//! Concrete payoff problems.

pub mod datagen;
pub mod dictionary;
pub mod libsvm;
pub mod matrix_game;
pub mod matrix_io;
pub mod quadratic_saddle;
pub mod robust;

pub use datagen::{
    dl_generate, random_payoff, random_quadratic_saddle, rc_synthetic, DlData, DlSizes,
    PayoffEntries,
};
pub use dictionary::{lipschitz_dl, DictionaryLearning};
pub use libsvm::{read_libsvm, write_libsvm, Samples, SparseRow};
pub use matrix_game::MatrixGame;
pub use quadratic_saddle::QuadraticSaddle;
pub use robust::{lipschitz_rc, RobustClassification};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Largest singular value.
pub(crate) fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

pub(crate) fn check_finite(what: &str, m: &DMatrix<f64>) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}
