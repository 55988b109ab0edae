use serde::{Deserialize, Serialize};

/// Dense tensor over a chart of dimension `n`, row-major in its indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    n: usize,
    rank: usize,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(n: usize, rank: usize) -> Self {
        Tensor {
            n,
            rank,
            data: vec![0.0; n.pow(rank as u32)],
        }
    }

    pub fn from_vec(n: usize, rank: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n.pow(rank as u32), "tensor data length");
        Tensor { n, rank, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.rank);
        idx.iter().fold(0, |acc, &i| acc * self.n + i)
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: f64) {
        let o = self.offset(idx);
        self.data[o] = v;
    }

    pub fn max_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sub(&self, other: &Tensor) -> Tensor {
        assert_eq!((self.n, self.rank), (other.n, other.rank));
        Tensor {
            n: self.n,
            rank: self.rank,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn scaled(&self, s: f64) -> Tensor {
        Tensor {
            n: self.n,
            rank: self.rank,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    /// Reorders the indices: `out[idx] = self[idx permuted by perm]`.
    pub fn permuted(&self, perm: &[usize]) -> Tensor {
        assert_eq!(perm.len(), self.rank);
        let mut out = Tensor::zeros(self.n, self.rank);
        let mut idx = vec![0; self.rank];
        let mut src = vec![0; self.rank];
        for flat in 0..self.data.len() {
            let mut r = flat;
            for slot in (0..self.rank).rev() {
                idx[slot] = r % self.n;
                r /= self.n;
            }
            for (slot, &p) in perm.iter().enumerate() {
                src[slot] = idx[p];
            }
            out.data[flat] = self.get(&src);
        }
        out
    }

    /// Rank-2 tensor as a square matrix.
    pub fn to_matrix(&self) -> nalgebra::DMatrix<f64> {
        assert_eq!(self.rank, 2);
        nalgebra::DMatrix::from_row_slice(self.n, self.n, &self.data)
    }
}

/// `|a - b| / (1 + max(|a|, |b|))` in the max norm.
pub fn relative_diff(a: &Tensor, b: &Tensor) -> f64 {
    let scale = 1.0 + a.max_norm().max(b.max_norm());
    a.sub(b).max_norm() / scale
}

/// `|t| / (1 + |t|)` for tensors that should vanish.
pub fn relative_size(t: &Tensor) -> f64 {
    let m = t.max_norm();
    m / (1.0 + m)
}

/// Smallest eigenvalue of the symmetric part of a square matrix.
pub fn min_eigenvalue(m: &Tensor) -> f64 {
    let a = m.to_matrix();
    let sym = (&a + a.transpose()) * 0.5;
    sym.symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |acc, &v| acc.min(v))
}

/// Threshold for the positive-definiteness decision.
pub const PD_THRESHOLD: f64 = 1e-9;

pub fn is_positive_definite(m: &Tensor) -> bool {
    min_eigenvalue(m) > PD_THRESHOLD
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permutation_swaps_indices() {
        let t = Tensor::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]);
        let p = t.permuted(&[1, 0]);
        assert_eq!(p.data(), &[1.0, 3.0, 2.0, 4.0]);
    }

    #[test]
    fn eigen_decision() {
        let pd = Tensor::from_vec(2, 2, vec![2.0, 1.0, 1.0, 2.0]);
        let ind = Tensor::from_vec(2, 2, vec![1.0, 2.0, 2.0, 1.0]);
        assert!((min_eigenvalue(&pd) - 1.0).abs() < 1e-12);
        assert!(is_positive_definite(&pd));
        assert!(!is_positive_definite(&ind));
    }
}
