//! Environment updates and effective-Hamiltonian products that exploit the
//! block sparsity of MPO tensors: each W[w, ·, ·, w'] is stored as a short
//! list of nonzero operator entries.

use ndarray::{s, Array2, Array3, Array4, Array5};
use num_complex::Complex64 as C64;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone)]
struct Block {
    wl: usize,
    wr: usize,
    /// (out, in, value)
    entries: Vec<(usize, usize, C64)>,
}

/// One MPO tensor in block-sparse form.
#[derive(Debug, Clone)]
pub struct SparseSite {
    wl: usize,
    wr: usize,
    blocks: Vec<Block>,
}

impl SparseSite {
    pub fn new(w: &Array4<C64>) -> Self {
        let (wl, d, _, wr) = w.dim();
        let mut blocks = Vec::new();
        for a in 0..wl {
            for b in 0..wr {
                let entries: Vec<_> = (0..d)
                    .flat_map(|o| (0..d).map(move |i| (o, i)))
                    .filter_map(|(o, i)| {
                        let v = w[[a, o, i, b]];
                        (v != ZERO).then_some((o, i, v))
                    })
                    .collect();
                if !entries.is_empty() {
                    blocks.push(Block { wl: a, wr: b, entries });
                }
            }
        }
        Self { wl, wr, blocks }
    }

}

trait IntoShaped {
    fn pipe_shape<Sh: ndarray::ShapeBuilder>(self, shape: Sh) -> ndarray::Array<C64, Sh::Dim>
    where
        Sh: Into<ndarray::StrideShape<Sh::Dim>>;
}

impl IntoShaped for Array2<C64> {
    fn pipe_shape<Sh: ndarray::ShapeBuilder>(self, shape: Sh) -> ndarray::Array<C64, Sh::Dim>
    where
        Sh: Into<ndarray::StrideShape<Sh::Dim>>,
    {
        let a = if self.is_standard_layout() { self } else { self.as_standard_layout().into_owned() };
        ndarray::Array::from_shape_vec(shape, a.into_raw_vec_and_offset().0).expect("tensor reshape")
    }
}

fn mat<'a>(t: &'a ndarray::ArrayBase<impl ndarray::Data<Elem = C64>, impl ndarray::Dimension>, rows: usize, cols: usize) -> ndarray::CowArray<'a, C64, ndarray::Ix2> {
    t.to_shape((rows, cols)).expect("tensor reshape")
}

/// E'[a', w', b'] = Σ conj(A[a,s,a']) E[a,w,b] W[w,s,s',w'] B[b,s',b'].
pub fn extend_left(env: &Array3<C64>, bra: &Array3<C64>, w: &SparseSite, ket: &Array3<C64>) -> Array3<C64> {
    let (da, wl, db) = env.dim();
    let (_, d, kr) = ket.dim();
    let br = bra.shape()[2];
    // t1[a, w, s', b'] = Σ_b E[a, w, b] B[b, s', b']
    let t1 = mat(env, da * wl, db)
        .dot(&mat(ket, db, d * kr))
        .pipe_shape((da, wl, d, kr));
    let mut t2 = Array4::<C64>::zeros((da, d, w.wr, kr));
    for blk in &w.blocks {
        for &(so, si, v) in &blk.entries {
            t2.slice_mut(s![.., so, blk.wr, ..]).scaled_add(v, &t1.slice(s![.., blk.wl, si, ..]));
        }
    }
    let conj = bra.mapv(|x| x.conj());
    mat(&conj, da * d, br)
        .t()
        .dot(&mat(&t2, da * d, w.wr * kr))
        .pipe_shape((br, w.wr, kr))
}

/// E'[a, w, b] = Σ conj(A[a,s,a']) E[a',w',b'] W[w,s,s',w'] B[b,s',b'].
pub fn extend_right(env: &Array3<C64>, bra: &Array3<C64>, w: &SparseSite, ket: &Array3<C64>) -> Array3<C64> {
    let (da, wr, db) = env.dim();
    let (kl, d, _) = ket.dim();
    let bl = bra.shape()[0];
    // t1[b, s', a', w'] = Σ_b' B[b, s', b'] E[a', w', b']
    let t1 = mat(ket, kl * d, db)
        .dot(&mat(env, da * wr, db).t())
        .pipe_shape((kl, d, da, wr));
    let mut t2 = Array4::<C64>::zeros((d, da, w.wl, kl));
    for blk in &w.blocks {
        for &(so, si, v) in &blk.entries {
            t2.slice_mut(s![so, .., blk.wl, ..])
                .scaled_add(v, &t1.slice(s![.., si, .., blk.wr]).t());
        }
    }
    let conj = bra.mapv(|x| x.conj());
    mat(&conj, bl, d * da)
        .dot(&mat(&t2, d * da, w.wl * kl))
        .pipe_shape((bl, w.wl, kl))
}

/// out[a',s',b'] = Σ L[a',w,a] W[w,s',s,w'] R[b',w',b] θ[a,s,b].
pub fn apply_one_site(left: &Array3<C64>, w: &SparseSite, right: &Array3<C64>, theta: &Array3<C64>) -> Array3<C64> {
    let (dl, d, dr) = theta.dim();
    let (lo, wl, _) = left.dim();
    let (ro, wr, _) = right.dim();
    let t1 = mat(left, lo * wl, dl)
        .dot(&mat(theta, dl, d * dr))
        .pipe_shape((lo, wl, d, dr));
    let mut t2 = Array4::<C64>::zeros((lo, d, wr, dr));
    for blk in &w.blocks {
        for &(so, si, v) in &blk.entries {
            t2.slice_mut(s![.., so, blk.wr, ..]).scaled_add(v, &t1.slice(s![.., blk.wl, si, ..]));
        }
    }
    mat(&t2, lo * d, wr * dr)
        .dot(&mat(right, ro, wr * dr).t())
        .pipe_shape((lo, d, ro))
}

/// Two-site analogue of [`apply_one_site`] on θ[a, s1, s2, b].
pub fn apply_two_site(
    left: &Array3<C64>,
    w1: &SparseSite,
    w2: &SparseSite,
    right: &Array3<C64>,
    theta: &Array4<C64>,
) -> Array4<C64> {
    let (dl, d1, d2, dr) = theta.dim();
    let (lo, wl, _) = left.dim();
    let (ro, wr, _) = right.dim();
    let wm = w1.wr;
    let t1 = mat(left, lo * wl, dl)
        .dot(&mat(theta, dl, d1 * d2 * dr))
        .pipe_shape((lo, wl, d1, d2, dr));
    let mut t2 = Array5::<C64>::zeros((lo, d1, wm, d2, dr));
    for blk in &w1.blocks {
        for &(so, si, v) in &blk.entries {
            t2.slice_mut(s![.., so, blk.wr, .., ..])
                .scaled_add(v, &t1.slice(s![.., blk.wl, si, .., ..]));
        }
    }
    drop(t1);
    let mut t3 = Array5::<C64>::zeros((lo, d1, d2, wr, dr));
    for blk in &w2.blocks {
        for &(so, si, v) in &blk.entries {
            t3.slice_mut(s![.., .., so, blk.wr, ..])
                .scaled_add(v, &t2.slice(s![.., .., blk.wl, si, ..]));
        }
    }
    mat(&t3, lo * d1 * d2, wr * dr)
        .dot(&mat(right, ro, wr * dr).t())
        .pipe_shape((lo, d1, d2, ro))
}

/// out[a',b'] = Σ L[a',w,a] C[a,b] R[b',w,b].
pub fn apply_zero_site(left: &Array3<C64>, right: &Array3<C64>, c: &Array2<C64>) -> Array2<C64> {
    let (lo, w, dl) = left.dim();
    let (ro, _, dr) = right.dim();
    let t = mat(left, lo * w, dl).dot(c);
    mat(&t, lo, w * dr).dot(&mat(right, ro, w * dr).t())
}
