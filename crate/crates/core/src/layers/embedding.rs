use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};
use crate::numerics::{init_normal, ParamSet, RngState, Tensor1, Tensor2};

/// One learned row per registered patient.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTable {
    pub table: Tensor2,
}

impl EmbeddingTable {
    pub fn init(patients: usize, dim: usize, rng: &mut RngState) -> Result<Self> {
        Ok(EmbeddingTable {
            table: init_normal(patients, dim, rng)?,
        })
    }

    pub fn num_patients(&self) -> usize {
        self.table.rows()
    }

    pub fn dim(&self) -> usize {
        self.table.cols()
    }

    pub fn lookup(&self, patient: usize) -> Result<&[f64]> {
        if patient >= self.table.rows() {
            return Err(Error::UnknownPatient(format!("#{patient}")));
        }
        Ok(self.table.row(patient))
    }

    /// Column mean over all rows; the stand-in for patients never seen in training.
    pub fn mean_row(&self) -> Tensor1 {
        let n = self.table.rows() as f64;
        let mut out = vec![0.0; self.dim()];
        for r in 0..self.table.rows() {
            for (o, v) in out.iter_mut().zip(self.table.row(r)) {
                *o += v;
            }
        }
        out.iter_mut().for_each(|o| *o /= n);
        out
    }

    /// Only the looked-up row receives gradient.
    pub fn backward(&self, patient: usize, d_row: &[f64], grads: &mut EmbeddingTable) -> Result<()> {
        self.lookup(patient)?;
        ensure_len("embedding gradient", self.dim(), d_row.len())?;
        for (g, d) in grads.table.row_mut(patient).iter_mut().zip(d_row) {
            *g += d;
        }
        Ok(())
    }
}

impl ParamSet for EmbeddingTable {
    fn slices(&self) -> Vec<&[f64]> {
        vec![self.table.as_slice()]
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.table.as_mut_slice()]
    }
}
