//! Optimized product quantization (non-parametric variant).
//!
//! The rotation starts from the top `d_out` principal directions of the
//! training data. Each alternation solves the orthogonal Procrustes problem
//! for the rotation with codes fixed, then runs Lloyd steps on the rotated
//! data starting from the current codebook. Both steps can only lower the
//! reconstruction error `‖X − Ŷ Rᵀ‖²`.

use nalgebra::DMatrix;

use crate::descriptor::covariance_eigen;
use crate::error::{Error, Result};
use crate::par;

use super::kmeans::kmeans_refine;
use super::pq::{pq_train, sub_columns, Codebook};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpqConfig {
    pub d_out: usize,
    pub m: usize,
    pub bits: u32,
    pub alternations: usize,
    /// Lloyd iterations for the initial product quantizer.
    pub kmeans_iters: usize,
    /// Lloyd iterations per alternation.
    pub refine_iters: usize,
    pub seed: u64,
}

impl Default for OpqConfig {
    fn default() -> Self {
        Self {
            d_out: 256,
            m: 32,
            bits: 8,
            alternations: 20,
            kmeans_iters: 25,
            refine_iters: 2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpqModel {
    d_in: usize,
    d_out: usize,
    /// d_in × d_out, row-major, orthonormal columns.
    rotation: Vec<f64>,
    codebook: Codebook,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpqTraining {
    pub model: OpqModel,
    /// Mean `‖x − R·ŷ‖²` after initialisation and after each alternation.
    pub objective: Vec<f64>,
    /// `‖RᵀR − I‖∞` after initialisation and after each alternation.
    pub orthonormality: Vec<f64>,
}

impl OpqModel {
    pub fn new(d_in: usize, d_out: usize, rotation: Vec<f64>, codebook: Codebook) -> Result<Self> {
        if d_out == 0 || d_out > d_in || rotation.len() != d_in * d_out {
            return Err(Error::invalid(format!(
                "rotation must be {d_in}x{d_out}, got {} values",
                rotation.len()
            )));
        }
        if codebook.dim() != d_out {
            return Err(Error::invalid(
                "codebook dimension must equal the rotated dimension",
            ));
        }
        Ok(Self {
            d_in,
            d_out,
            rotation,
            codebook,
        })
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    pub fn rotation(&self) -> &[f64] {
        &self.rotation
    }

    pub fn codebook(&self) -> &Codebook {
        &self.codebook
    }

    /// `Rᵀ x`.
    pub fn rotate(&self, x: &[f32]) -> Result<Vec<f32>> {
        if x.len() != self.d_in {
            return Err(Error::invalid(format!(
                "vector has {} dimensions, rotation expects {}",
                x.len(),
                self.d_in
            )));
        }
        let mut out = vec![0f64; self.d_out];
        for (i, &xi) in x.iter().enumerate() {
            let row = &self.rotation[i * self.d_out..(i + 1) * self.d_out];
            let xi = f64::from(xi);
            for (o, r) in out.iter_mut().zip(row) {
                *o += xi * r;
            }
        }
        Ok(out.into_iter().map(|v| v as f32).collect())
    }

    pub fn rotate_batch(&self, data: &[f32]) -> Result<Vec<f32>> {
        if data.len() % self.d_in != 0 {
            return Err(Error::invalid(
                "batch is not rows of the rotation input dimension",
            ));
        }
        Ok(par::map_rows(data, self.d_in, |r| {
            self.rotate(r).expect("dimension checked")
        })
        .concat())
    }

    pub fn orthonormality_error(&self) -> f64 {
        orthonormality_error(&self.rotation, self.d_in, self.d_out)
    }
}

pub(crate) fn orthonormality_error(rot: &[f64], d_in: usize, d_out: usize) -> f64 {
    gram_error(&DMatrix::from_row_slice(d_in, d_out, rot))
}

/// `‖RᵀR − I‖∞`.
fn gram_error(r: &DMatrix<f64>) -> f64 {
    let g = r.tr_mul(r) - DMatrix::identity(r.ncols(), r.ncols());
    g.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

struct State {
    rotation: DMatrix<f64>,
    codebook: Codebook,
    objective: f64,
}

/// Rotated data `X R` as f32 rows, and `‖x‖² − ‖xR‖²` summed over rows.
fn project(x: &DMatrix<f64>, rotation: &DMatrix<f64>) -> (Vec<f32>, f64) {
    let y = x * rotation;
    let lost: f64 = (0..x.nrows())
        .map(|i| x.row(i).norm_squared() - y.row(i).norm_squared())
        .sum();
    let mut rows = Vec::with_capacity(y.len());
    for i in 0..y.nrows() {
        rows.extend(y.row(i).iter().map(|&v| v as f32));
    }
    (rows, lost)
}

fn reconstruction(codebook: &Codebook, y: &[f32]) -> Result<(Vec<f32>, f64)> {
    let codes = codebook.encode_batch(y)?;
    let d = codebook.dim();
    let mut rec = Vec::with_capacity(y.len());
    for c in &codes {
        codebook.decode_into(&c.0, &mut rec)?;
    }
    let err: f64 = rec
        .chunks_exact(d)
        .zip(y.chunks_exact(d))
        .map(|(a, b)| {
            a.iter()
                .zip(b)
                .map(|(p, q)| (f64::from(*p) - f64::from(*q)).powi(2))
                .sum::<f64>()
        })
        .sum();
    Ok((rec, err))
}

fn objective(
    x: &DMatrix<f64>,
    rotation: &DMatrix<f64>,
    codebook: &Codebook,
) -> Result<(f64, Vec<f32>)> {
    let (y, lost) = project(x, rotation);
    let (rec, err) = reconstruction(codebook, &y)?;
    Ok(((lost + err) / x.nrows() as f64, rec))
}

fn refine_codebook(codebook: &Codebook, y: &[f32], iters: usize) -> Result<Codebook> {
    let m = codebook.sub_quantizers();
    let d = codebook.dim();
    let subs = par::map_range(m, |s| {
        let cols = sub_columns(y, d, m, s);
        kmeans_refine(&cols, d / m, codebook.sub_codebook(s).to_vec(), iters, 0.0)
    });
    let mut centroids = Vec::with_capacity(codebook.centroids().len());
    for s in subs {
        centroids.extend_from_slice(&s?.centroids);
    }
    Codebook::new(d, m, codebook.bits(), centroids)
}

/// Trains an OPQ rotation `d_in → cfg.d_out` with a product quantizer on the
/// rotated space. With `alternations = 0` this is PCA truncation followed by
/// plain PQ.
pub fn opq_train(data: &[f32], d_in: usize, cfg: &OpqConfig) -> Result<OpqTraining> {
    if d_in == 0 || data.len() % d_in != 0 {
        return Err(Error::invalid(format!(
            "{} values are not rows of {d_in}",
            data.len()
        )));
    }
    if cfg.d_out == 0 || cfg.d_out > d_in {
        return Err(Error::invalid(format!(
            "OPQ output dimension {} must be in 1..={d_in}",
            cfg.d_out
        )));
    }
    let n = data.len() / d_in;
    if n < 1 << cfg.bits {
        return Err(Error::invalid(format!(
            "OPQ with {} bits needs at least {} vectors, got {n}",
            cfg.bits,
            1usize << cfg.bits
        )));
    }

    let (_, _, vectors) = covariance_eigen(data, d_in);
    // columns of R are the leading eigenvectors
    let rotation = DMatrix::from_fn(d_in, cfg.d_out, |i, j| vectors[j * d_in + i]);
    let x = DMatrix::from_row_slice(
        n,
        d_in,
        &data.iter().map(|&v| f64::from(v)).collect::<Vec<_>>(),
    );

    let (y, _) = project(&x, &rotation);
    let codebook = pq_train(&y, cfg.d_out, cfg.m, cfg.bits, cfg.kmeans_iters, cfg.seed)?.codebook;
    let (obj, mut rec) = objective(&x, &rotation, &codebook)?;
    let mut state = State {
        rotation,
        codebook,
        objective: obj,
    };
    let mut trace = vec![obj];
    let mut ortho = vec![gram_error(&state.rotation)];

    for alt in 0..cfg.alternations {
        // Procrustes: R = U Vᵀ from the SVD of Xᵀ Ŷ.
        let y_hat = DMatrix::from_row_slice(
            n,
            cfg.d_out,
            &rec.iter().map(|&v| f64::from(v)).collect::<Vec<_>>(),
        );
        let svd = x.tr_mul(&y_hat).svd(true, true);
        let (u, vt) = match (svd.u, svd.v_t) {
            (Some(u), Some(vt)) => (u, vt),
            _ => {
                return Err(Error::InvalidState(
                    "SVD did not return singular vectors".into(),
                ))
            }
        };
        let rotation = u * vt;
        let (y, _) = project(&x, &rotation);
        let codebook = refine_codebook(&state.codebook, &y, cfg.refine_iters)?;
        let (obj, next_rec) = objective(&x, &rotation, &codebook)?;
        if obj > state.objective {
            log::debug!(
                "OPQ: alternation {alt} did not improve ({obj} > {}); stopping",
                state.objective
            );
            break;
        }
        state = State {
            rotation,
            codebook,
            objective: obj,
        };
        rec = next_rec;
        trace.push(obj);
        ortho.push(gram_error(&state.rotation));
    }

    let model = OpqModel::new(
        d_in,
        cfg.d_out,
        state.rotation.to_row_major(),
        state.codebook,
    )?;
    Ok(OpqTraining {
        model,
        objective: trace,
        orthonormality: ortho,
    })
}

trait RowMajor {
    fn to_row_major(&self) -> Vec<f64>;
}

impl RowMajor for DMatrix<f64> {
    fn to_row_major(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for i in 0..self.nrows() {
            out.extend(self.row(i).iter().copied());
        }
        out
    }
}
