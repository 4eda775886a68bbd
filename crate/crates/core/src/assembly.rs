//! Element loop and boundary-condition plumbing shared by both equations.

use rayon::prelude::*;

use crate::error::{Error, SparseError};
use crate::sparse::{to_csr, CsrMatrix, SparseSystem, TripletBuffer};

const CHUNK: usize = 512;

/// Dense element contribution scattered to global indices.
pub(crate) struct LocalSystem {
    pub dofs: Vec<usize>,
    pub matrix: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl LocalSystem {
    pub fn zeros(dofs: Vec<usize>) -> Self {
        let n = dofs.len();
        Self {
            dofs,
            matrix: vec![0.0; n * n],
            rhs: vec![0.0; n],
        }
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let n = self.dofs.len();
        self.matrix[i * n + j] += v;
    }
}

/// Runs `element` on every cell in parallel chunks and merges the results
/// in cell order, so the assembled matrix does not depend on scheduling.
/// Every local entry is pushed, zeros included.
pub(crate) fn assemble<F>(n_cells: usize, dim: usize, element: F) -> Result<(CsrMatrix, Vec<f64>), Error>
where
    F: Fn(usize) -> Result<LocalSystem, Error> + Sync,
{
    let chunks: Vec<Result<(TripletBuffer, Vec<(usize, f64)>), Error>> = (0..n_cells)
        .collect::<Vec<_>>()
        .par_chunks(CHUNK)
        .map(|cells| {
            let mut buf = TripletBuffer::new(dim);
            let mut rhs = Vec::new();
            for &k in cells {
                let local = element(k)?;
                let n = local.dofs.len();
                for (i, &gi) in local.dofs.iter().enumerate() {
                    for (j, &gj) in local.dofs.iter().enumerate() {
                        buf.push(gi, gj, local.matrix[i * n + j]);
                    }
                    rhs.push((gi, local.rhs[i]));
                }
            }
            Ok((buf, rhs))
        })
        .collect();

    let mut triplets = TripletBuffer::new(dim);
    let mut rhs = vec![0.0; dim];
    for chunk in chunks {
        let (buf, entries) = chunk?;
        triplets.merge(buf);
        for (i, v) in entries {
            rhs[i] += v;
        }
    }
    Ok((to_csr(&triplets, dim)?, rhs))
}

/// Imposes zero values on the flagged unknowns: their rows and columns are
/// cleared, a unit diagonal is inserted and the right-hand side zeroed.
pub fn apply_homogeneous_dirichlet(sys: &SparseSystem, constrained: &[bool]) -> Result<SparseSystem, SparseError> {
    if constrained.len() != sys.dim() {
        return Err(SparseError::DimensionMismatch {
            matrix: sys.dim(),
            vector: constrained.len(),
        });
    }
    let matrix = sys.matrix.filtered(
        sys.dim(),
        |r, c| !constrained[r] && !constrained[c],
        constrained
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| (i, i, 1.0)),
    );
    let rhs = sys
        .rhs
        .iter()
        .zip(constrained)
        .map(|(&b, &fixed)| if fixed { 0.0 } else { b })
        .collect();
    SparseSystem::new(matrix, rhs, sys.blocks.clone())
}
