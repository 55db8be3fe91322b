//! PCA whitening.

use std::io::{Read, Write};

use log::warn;
use nalgebra::{DMatrix, SymmetricEigen};

use crate::binio;
use crate::error::{Error, Result};

/// Trained whitening transform: `y = scales ⊙ (basis · (x − mean))`.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    in_dim: usize,
    out_dim: usize,
    mean: Vec<f64>,
    /// out_dim × in_dim, row-major; rows are principal directions.
    basis: Vec<f64>,
    eigenvalues: Vec<f64>,
    scales: Vec<f64>,
    floored: usize,
}

/// Mean, eigenvalues (descending) and matching eigenvectors (as rows,
/// row-major `dim × dim`) of the sample covariance of `data`.
pub(crate) fn covariance_eigen(data: &[f32], dim: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = data.len() / dim;
    let mut mean = vec![0f64; dim];
    for row in data.chunks_exact(dim) {
        for (m, &x) in mean.iter_mut().zip(row) {
            *m += f64::from(x);
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let centered = DMatrix::from_fn(n, dim, |i, j| f64::from(data[i * dim + j]) - mean[j]);
    let cov = centered.tr_mul(&centered) / n as f64;
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = Vec::with_capacity(dim * dim);
    for &i in &order {
        vectors.extend(eig.eigenvectors.column(i).iter().copied());
    }
    (mean, values, vectors)
}

/// Fits a whitening PCA on row-major `samples` of dimension `in_dim`.
///
/// Eigenvalues below `eig_floor` are raised to it before the inverse square
/// root; when that happens inside the kept components the data is rank
/// deficient and a warning is logged, but training still succeeds.
pub fn pca_train(
    samples: &[f32],
    in_dim: usize,
    out_dim: usize,
    eig_floor: f64,
) -> Result<PcaModel> {
    if in_dim == 0 || samples.len() % in_dim != 0 {
        return Err(Error::invalid(format!(
            "{} values do not form rows of dimension {in_dim}",
            samples.len()
        )));
    }
    if out_dim == 0 || out_dim > in_dim {
        return Err(Error::invalid(format!(
            "output dimension {out_dim} must be in 1..={in_dim}"
        )));
    }
    if !(eig_floor > 0.0) {
        return Err(Error::invalid("eigenvalue floor must be positive"));
    }
    let n = samples.len() / in_dim;
    if n <= out_dim {
        return Err(Error::invalid(format!(
            "PCA to {out_dim} dimensions needs more than {out_dim} samples, got {n}"
        )));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite value in PCA samples"));
    }

    let (mean, values, vectors) = covariance_eigen(samples, in_dim);
    let eigenvalues: Vec<f64> = values[..out_dim].to_vec();
    let floored = eigenvalues.iter().filter(|&&l| l < eig_floor).count();
    if floored > 0 {
        warn!(
            "PCA: {floored} of {out_dim} kept eigenvalues are below the floor {eig_floor:e}; \
             samples are rank deficient"
        );
    }
    let scales = eigenvalues
        .iter()
        .map(|&l| 1.0 / l.max(eig_floor).sqrt())
        .collect();
    Ok(PcaModel {
        in_dim,
        out_dim,
        mean,
        basis: vectors[..out_dim * in_dim].to_vec(),
        eigenvalues,
        scales,
        floored,
    })
}

impl PcaModel {
    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn basis_row(&self, i: usize) -> &[f64] {
        &self.basis[i * self.in_dim..(i + 1) * self.in_dim]
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    /// Number of kept components whose eigenvalue was raised to the floor.
    pub fn floored_components(&self) -> usize {
        self.floored
    }

    /// Centre, project and whiten one descriptor.
    pub fn apply(&self, x: &[f32]) -> Result<Vec<f32>> {
        if x.len() != self.in_dim {
            return Err(Error::invalid(format!(
                "descriptor has {} dimensions, PCA expects {}",
                x.len(),
                self.in_dim
            )));
        }
        let centered: Vec<f64> = x
            .iter()
            .zip(&self.mean)
            .map(|(&v, m)| f64::from(v) - m)
            .collect();
        Ok((0..self.out_dim)
            .map(|i| {
                let p: f64 = self
                    .basis_row(i)
                    .iter()
                    .zip(&centered)
                    .map(|(b, c)| b * c)
                    .sum();
                (p * self.scales[i]) as f32
            })
            .collect())
    }

    /// Projection without whitening, mapped back to the input space.
    pub fn reconstruct(&self, x: &[f32]) -> Result<Vec<f64>> {
        let y = self.apply(x)?;
        let mut out = self.mean.clone();
        for i in 0..self.out_dim {
            let coef = f64::from(y[i]) / self.scales[i];
            for (o, b) in out.iter_mut().zip(self.basis_row(i)) {
                *o += coef * b;
            }
        }
        Ok(out)
    }

    pub(crate) fn write(&self, w: &mut impl Write) -> Result<()> {
        binio::write_u64(w, self.in_dim as u64)?;
        binio::write_u64(w, self.out_dim as u64)?;
        binio::write_u64(w, self.floored as u64)?;
        binio::write_f64s(w, &self.mean)?;
        binio::write_f64s(w, &self.basis)?;
        binio::write_f64s(w, &self.eigenvalues)?;
        binio::write_f64s(w, &self.scales)
    }

    pub(crate) fn read(r: &mut impl Read) -> Result<Self> {
        let in_dim = binio::read_usize(r)?;
        let out_dim = binio::read_usize(r)?;
        let floored = binio::read_usize(r)?;
        if out_dim > in_dim || in_dim == 0 {
            return Err(Error::format(format!("PCA shape {out_dim}x{in_dim}")));
        }
        let mean = binio::read_f64s(r, in_dim)?;
        let basis = binio::read_f64s(r, binio::checked_len(out_dim, in_dim, "PCA basis")?)?;
        let eigenvalues = binio::read_f64s(r, out_dim)?;
        let scales = binio::read_f64s(r, out_dim)?;
        Ok(Self {
            in_dim,
            out_dim,
            mean,
            basis,
            eigenvalues,
            scales,
            floored,
        })
    }
}
