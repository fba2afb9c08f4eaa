//! The embedding matrix: one learned column per vocabulary entry.

use rand::SeedableRng;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::StreamRng;

pub const DEFAULT_EMBEDDING_DIM: usize = 32;
pub const INIT_BOUND: f64 = 0.05;

/// A `d × |V|` matrix; column `i` embeds vocabulary entry `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    values: Matrix,
}

impl EmbeddingMatrix {
    pub fn new(values: Matrix) -> Result<Self> {
        if values.rows() == 0 || values.cols() == 0 {
            return Err(Error::Config("embedding matrix must be non-empty".into()));
        }
        if !values.is_finite() {
            return Err(Error::Input("embedding matrix has non-finite entries".into()));
        }
        Ok(EmbeddingMatrix { values })
    }

    pub fn zeros(d: usize, vocab_size: usize) -> Self {
        EmbeddingMatrix {
            values: Matrix::zeros(d, vocab_size),
        }
    }

    pub fn dim(&self) -> usize {
        self.values.rows()
    }

    pub fn vocab_size(&self) -> usize {
        self.values.cols()
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut Matrix {
        &mut self.values
    }

    /// Column `index`: the embedding of that vocabulary entry.
    pub fn ast2vec(&self, index: usize) -> Result<Vec<f64>> {
        if index >= self.vocab_size() {
            return Err(Error::Contract(format!(
                "vocabulary index {index} out of range for {} entries",
                self.vocab_size()
            )));
        }
        Ok(self.values.column(index))
    }

    pub(crate) fn column_into(&self, index: usize, out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            *o = self.values.get(r, index);
        }
    }
}

/// Uniform `U[-0.05, 0.05]` entries from a generator seeded with `seed`.
pub fn init_embeddings(d: usize, vocab_size: usize, seed: u64) -> Result<EmbeddingMatrix> {
    if d < 1 || vocab_size < 1 {
        return Err(Error::Config(format!(
            "embedding shape {d}x{vocab_size} must be at least 1x1"
        )));
    }
    if d >= vocab_size {
        log::warn!("embedding dimension {d} is not smaller than vocabulary size {vocab_size}");
    }
    let mut rng = StreamRng::seed_from_u64(seed);
    EmbeddingMatrix::new(Matrix::uniform(d, vocab_size, INIT_BOUND, &mut rng))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_init_is_reproducible_and_bounded() {
        let a = init_embeddings(3, 5, 11).unwrap();
        let b = init_embeddings(3, 5, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.values().as_slice().len(), 15);
        assert!(a.values().as_slice().iter().all(|v| v.is_finite() && v.abs() <= INIT_BOUND));
        let c = init_embeddings(3, 5, 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn lookup_returns_stored_column() {
        let mut m = Matrix::zeros(3, 4);
        for (r, v) in [-0.3, -0.6, 0.7].into_iter().enumerate() {
            m.set(r, 2, v);
        }
        let e = EmbeddingMatrix::new(m).unwrap();
        assert_eq!(e.ast2vec(2).unwrap(), vec![-0.3, -0.6, 0.7]);
        assert_eq!(e.ast2vec(0).unwrap(), vec![0.0; 3]);
        assert!(matches!(e.ast2vec(4), Err(Error::Contract(_))));
    }

    #[test]
    fn zero_shape_rejected() {
        assert!(init_embeddings(0, 5, 1).is_err());
        assert!(init_embeddings(2, 0, 1).is_err());
    }
}
