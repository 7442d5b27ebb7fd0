//! Dense complex kernels: pairwise contraction, truncated SVD, QR/LQ.

use ndarray::{Array1, Array2, ArrayBase, ArrayD, ArrayView2, Axis, Data, Dimension, IxDyn};
use ndarray_linalg::{Eigh, JobSvd, QR, SVD, SVDDC, UPLO};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Dense complex tensor in row-major layout.
pub type DenseTensor = ArrayD<C64>;

/// Contract `a` and `b` over the paired axes. The result carries the free
/// axes of `a` (in order) followed by the free axes of `b`.
pub fn contract<S1, S2, D1, D2>(
    a: &ArrayBase<S1, D1>,
    a_axes: &[usize],
    b: &ArrayBase<S2, D2>,
    b_axes: &[usize],
) -> Result<DenseTensor>
where
    S1: Data<Elem = C64>,
    S2: Data<Elem = C64>,
    D1: Dimension,
    D2: Dimension,
{
    let a = a.view().into_dyn();
    let b = b.view().into_dyn();
    if a_axes.len() != b_axes.len() {
        return Err(Error::Shape("contraction axis lists differ in length".into()));
    }
    let mut inner = 1usize;
    for (&i, &j) in a_axes.iter().zip(b_axes) {
        if a.shape()[i] != b.shape()[j] {
            return Err(Error::Shape(format!(
                "contracting axis {i} of {:?} with axis {j} of {:?}",
                a.shape(),
                b.shape()
            )));
        }
        inner *= a.shape()[i];
    }
    let a_free: Vec<usize> = (0..a.ndim()).filter(|k| !a_axes.contains(k)).collect();
    let b_free: Vec<usize> = (0..b.ndim()).filter(|k| !b_axes.contains(k)).collect();

    let a_perm: Vec<usize> = a_free.iter().chain(a_axes).copied().collect();
    let b_perm: Vec<usize> = b_axes.iter().chain(&b_free).copied().collect();
    let a_rows: usize = a_free.iter().map(|&k| a.shape()[k]).product();
    let b_cols: usize = b_free.iter().map(|&k| b.shape()[k]).product();

    let a_mat = as_matrix(a.view().permuted_axes(IxDyn(&a_perm)), a_rows, inner);
    let b_mat = as_matrix(b.view().permuted_axes(IxDyn(&b_perm)), inner, b_cols);
    let out = a_mat.dot(&b_mat);

    let mut shape: Vec<usize> = a_free.iter().map(|&k| a.shape()[k]).collect();
    shape.extend(b_free.iter().map(|&k| b.shape()[k]));
    Ok(out
        .into_shape_with_order(IxDyn(&shape))
        .expect("contiguous gemm output"))
}

fn as_matrix(view: ndarray::ArrayViewD<'_, C64>, rows: usize, cols: usize) -> Array2<C64> {
    let owned = view.as_standard_layout().into_owned();
    owned
        .into_shape_with_order((rows, cols))
        .expect("standard layout reshape")
}

/// Reshape into a matrix, grouping the first `split` axes as rows.
pub fn matricize<S: Data<Elem = C64>, D: Dimension>(t: &ArrayBase<S, D>, split: usize) -> Array2<C64> {
    let rows: usize = t.shape()[..split].iter().product();
    let cols: usize = t.shape()[split..].iter().product();
    as_matrix(t.view().into_dyn(), rows, cols)
}

pub fn permute<S: Data<Elem = C64>, D: Dimension>(t: &ArrayBase<S, D>, axes: &[usize]) -> DenseTensor {
    t.view()
        .into_dyn()
        .permuted_axes(IxDyn(axes))
        .as_standard_layout()
        .into_owned()
}

#[derive(Debug, Clone)]
pub struct SvdTruncation {
    pub u: Array2<C64>,
    pub s: Array1<f64>,
    pub vt: Array2<C64>,
    /// Σ dropped s² / Σ s².
    pub discarded_weight: f64,
}

impl SvdTruncation {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    pub fn reconstruct(&self) -> Array2<C64> {
        let mut us = self.u.clone();
        for (mut col, &s) in us.axis_iter_mut(Axis(1)).zip(&self.s) {
            col.mapv_inplace(|x| x * s);
        }
        us.dot(&self.vt)
    }
}

/// Economy SVD keeping singular values above `cutoff · s_max`, at most
/// `max_bond` of them and at least one.
pub fn svd_truncate(matrix: ArrayView2<'_, C64>, cutoff: f64, max_bond: usize) -> Result<SvdTruncation> {
    if matrix.is_empty() {
        return Err(Error::Shape("svd of an empty matrix".into()));
    }
    if !(cutoff >= 0.0) {
        return Err(Error::Domain(format!("svd cutoff must be >= 0, got {cutoff}")));
    }
    if matrix.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
        return Err(Error::Numerical("non-finite entry passed to svd".into()));
    }
    let owned = matrix.to_owned();
    let (u, s, vt) = match owned.svddc(JobSvd::Some) {
        Ok((Some(u), s, Some(vt))) => (u, s, vt),
        // divide-and-conquer occasionally fails to converge; QR-iteration is slower but sturdier
        _ => match owned.svd(true, true)? {
            (Some(u), s, Some(vt)) => {
                let k = s.len();
                (
                    u.slice(ndarray::s![.., ..k]).to_owned(),
                    s,
                    vt.slice(ndarray::s![..k, ..]).to_owned(),
                )
            }
            _ => return Err(Error::Numerical("svd returned no singular vectors".into())),
        },
    };
    let s_max = s.iter().copied().fold(0.0, f64::max);
    let threshold = cutoff * s_max;
    let mut keep = s.iter().take_while(|&&x| x > threshold).count();
    keep = keep.clamp(1, max_bond.max(1));
    let total: f64 = s.iter().map(|x| x * x).sum();
    let dropped: f64 = s.iter().skip(keep).map(|x| x * x).sum();
    Ok(SvdTruncation {
        u: u.slice(ndarray::s![.., ..keep]).to_owned(),
        s: s.slice(ndarray::s![..keep]).to_owned(),
        vt: vt.slice(ndarray::s![..keep, ..]).to_owned(),
        discarded_weight: if total > 0.0 { dropped / total } else { 0.0 },
    })
}

/// Thin QR: `m = q · r`, with `q` having orthonormal columns.
pub fn qr(m: &Array2<C64>) -> Result<(Array2<C64>, Array2<C64>)> {
    Ok(m.qr()?)
}

/// Thin LQ: `m = l · q`, with `q` having orthonormal rows.
pub fn lq(m: &Array2<C64>) -> Result<(Array2<C64>, Array2<C64>)> {
    let (q, r) = adjoint(m).qr()?;
    Ok((adjoint(&r), adjoint(&q)))
}

/// Eigen-decomposition of a Hermitian matrix, `h = u · diag(w) · u†`.
///
/// The LAPACK binding returns conjugated eigenvectors for complex input in
/// row-major layout, so the matrix is handed over column-major.
pub fn eigh_hermitian(h: &Array2<C64>) -> Result<(Array1<f64>, Array2<C64>)> {
    let column_major = h.t().as_standard_layout().into_owned().reversed_axes();
    Ok(column_major.eigh(UPLO::Lower)?)
}

/// Conjugate transpose, in standard layout.
pub fn adjoint(m: &Array2<C64>) -> Array2<C64> {
    let (r, c) = m.dim();
    Array2::from_shape_fn((c, r), |(i, j)| m[[j, i]].conj())
}

pub fn frobenius(m: &Array2<C64>) -> f64 {
    m.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}
