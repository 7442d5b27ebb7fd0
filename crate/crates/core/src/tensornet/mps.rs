//! Matrix product states with canonical-center bookkeeping.
//!
//! Site tensors are stored as `(left bond, physical, right bond)`. When a
//! canonical center `c` is recorded, every site left of `c` is left-orthonormal
//! (Σ_{a,s} conj(A[a,s,b]) A[a,s,b'] = δ_{bb'}) and every site right of `c` is
//! right-orthonormal.

use ndarray::{Array1, Array2, Array3, Ix3};
use num_complex::Complex64 as C64;
use rand::Rng;

use super::linalg::{adjoint, contract, lq, matricize, qr};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixProductState {
    sites: Vec<Array3<C64>>,
    center: Option<usize>,
}

impl MatrixProductState {
    pub fn new(sites: Vec<Array3<C64>>) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::Shape("an MPS needs at least one site".into()));
        }
        if sites[0].shape()[0] != 1 || sites[sites.len() - 1].shape()[2] != 1 {
            return Err(Error::Shape("boundary bonds must have dimension 1".into()));
        }
        for (i, pair) in sites.windows(2).enumerate() {
            if pair[0].shape()[2] != pair[1].shape()[0] {
                return Err(Error::Shape(format!(
                    "bond {i}: right dimension {} does not match left dimension {}",
                    pair[0].shape()[2],
                    pair[1].shape()[0]
                )));
            }
        }
        Ok(Self { sites, center: None })
    }

    /// Product state from one normalized-or-not local vector per site.
    pub fn product(locals: &[Array1<C64>]) -> Result<Self> {
        let sites = locals
            .iter()
            .map(|v| Array3::from_shape_fn((1, v.len(), 1), |(_, s, _)| v[s]))
            .collect();
        let mut mps = Self::new(sites)?;
        // a product state with unit-norm factors is canonical about any site
        if locals
            .iter()
            .all(|v| (v.iter().map(|x| x.norm_sqr()).sum::<f64>() - 1.0).abs() < 1e-14)
        {
            mps.center = Some(0);
        }
        Ok(mps)
    }

    /// Random complex MPS with the given local dimensions and bond cap.
    pub fn random<R: Rng>(local_dims: &[usize], max_bond: usize, rng: &mut R) -> Result<Self> {
        let bonds = feasible_bonds(local_dims, max_bond);
        let sites = local_dims
            .iter()
            .enumerate()
            .map(|(i, &d)| {
                Array3::from_shape_fn((bonds[i], d, bonds[i + 1]), |_| {
                    C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                })
            })
            .collect();
        Self::new(sites)
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[Array3<C64>] {
        &self.sites
    }

    pub fn site(&self, i: usize) -> &Array3<C64> {
        &self.sites[i]
    }

    pub fn center(&self) -> Option<usize> {
        self.center
    }

    pub fn local_dims(&self) -> Vec<usize> {
        self.sites.iter().map(|a| a.shape()[1]).collect()
    }

    /// Bond dimensions α₀..α_m, including both boundary bonds.
    pub fn bond_dims(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self.sites.iter().map(|a| a.shape()[0]).collect();
        out.push(1);
        out
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    /// Replace a site tensor. The caller states where the canonical center is
    /// afterwards (`None` if unknown).
    pub(crate) fn set_site(&mut self, i: usize, tensor: Array3<C64>, center: Option<usize>) {
        self.sites[i] = tensor;
        self.center = center;
    }

    /// Left-orthonormalize site `i` by QR and absorb the remainder into `i+1`.
    pub(crate) fn shift_right(&mut self, i: usize) -> Result<()> {
        let (dl, d, _) = self.sites[i].dim();
        let (q, r) = qr(&matricize(&self.sites[i], 2))?;
        let k = q.ncols();
        self.sites[i] = q.into_shape_with_order((dl, d, k)).expect("qr reshape");
        let next = contract(&r, &[1], &self.sites[i + 1], &[0])?;
        self.sites[i + 1] = next.into_dimensionality::<Ix3>().expect("rank 3");
        Ok(())
    }

    /// Right-orthonormalize site `i` by LQ and absorb the remainder into `i−1`.
    pub(crate) fn shift_left(&mut self, i: usize) -> Result<()> {
        let (_, d, dr) = self.sites[i].dim();
        let (l, q) = lq(&matricize(&self.sites[i], 1))?;
        let k = q.nrows();
        self.sites[i] = q.into_shape_with_order((k, d, dr)).expect("lq reshape");
        let prev = contract(&self.sites[i - 1], &[2], &l, &[0])?;
        self.sites[i - 1] = prev.into_dimensionality::<Ix3>().expect("rank 3");
        Ok(())
    }

    /// Bring into mixed-canonical form about `target`, in place.
    pub fn canonicalize_mut(&mut self, target: usize) -> Result<()> {
        if target >= self.len() {
            return Err(Error::Domain(format!(
                "canonical center {target} out of range for {} sites",
                self.len()
            )));
        }
        let (from_left, from_right) = match self.center {
            Some(c) => (c, c),
            None => (0, self.len() - 1),
        };
        for i in from_left..target {
            self.shift_right(i)?;
        }
        for i in (target + 1..=from_right).rev() {
            self.shift_left(i)?;
        }
        self.center = Some(target);
        Ok(())
    }

    pub fn canonicalize(&self, target: usize) -> Result<Self> {
        let mut out = self.clone();
        out.canonicalize_mut(target)?;
        Ok(out)
    }

    pub fn norm(&self) -> f64 {
        match self.center {
            Some(c) => self.sites[c].iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt(),
            None => inner_product(self, self).map(|z| z.re.max(0.0).sqrt()).unwrap_or(f64::NAN),
        }
    }

    pub fn normalize(&mut self) -> Result<()> {
        if self.center.is_none() {
            self.canonicalize_mut(0)?;
        }
        let c = self.center.expect("canonical");
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::Numerical("cannot normalize a zero state".into()));
        }
        self.sites[c].mapv_inplace(|x| x / n);
        Ok(())
    }

    /// Zero-pad every bond up to `bond` (bounded by what the local dimensions
    /// allow). The state is unchanged; the padding gives one-site updates room
    /// to grow entanglement. Leaves the state canonical about site 0.
    pub fn pad_bonds(&mut self, bond: usize) -> Result<()> {
        let target = feasible_bonds(&self.local_dims(), bond);
        for (i, site) in self.sites.iter_mut().enumerate() {
            let (dl, d, dr) = site.dim();
            let (nl, nr) = (target[i].max(dl), target[i + 1].max(dr));
            if (nl, nr) == (dl, dr) {
                continue;
            }
            let mut padded = Array3::<C64>::zeros((nl, d, nr));
            padded
                .slice_mut(ndarray::s![..dl, .., ..dr])
                .assign(site);
            *site = padded;
        }
        self.center = None;
        // sweeping right then back left gives the zero-padded directions an
        // orthonormal completion on every bond
        let last = self.len() - 1;
        self.canonicalize_mut(last)?;
        self.canonicalize_mut(0)
    }

    /// Largest deviation from the orthonormality conditions implied by the
    /// recorded center.
    pub fn orthonormality_residual(&self) -> f64 {
        let Some(c) = self.center else {
            return f64::INFINITY;
        };
        let mut worst = 0.0f64;
        for (i, site) in self.sites.iter().enumerate() {
            if i == c {
                continue;
            }
            let m = if i < c { matricize(site, 2) } else { adjoint(&matricize(site, 1)) };
            let gram = adjoint(&m).dot(&m);
            for ((r, col), x) in gram.indexed_iter() {
                let expect = if r == col { 1.0 } else { 0.0 };
                worst = worst.max((x - C64::new(expect, 0.0)).norm());
            }
        }
        worst
    }

    /// Full state vector (site 0 most significant). Only for small chains.
    pub fn to_dense(&self) -> Array1<C64> {
        let mut acc: Array2<C64> = matricize(&self.sites[0], 2);
        for site in &self.sites[1..] {
            let rows = acc.nrows();
            let (dl, d, dr) = site.dim();
            let m = site.view().into_shape_with_order((dl, d * dr)).expect("contiguous site");
            acc = acc
                .dot(&m)
                .into_shape_with_order((rows * d, dr))
                .expect("reshape");
        }
        acc.into_shape_with_order(acc_len(&self.local_dims())).expect("dense vector")
    }
}

fn acc_len(dims: &[usize]) -> usize {
    dims.iter().product()
}

/// Bond dimensions bounded by `max_bond` and by the Hilbert-space dimension on
/// either side of each bond.
pub fn feasible_bonds(local_dims: &[usize], max_bond: usize) -> Vec<usize> {
    let m = local_dims.len();
    let mut bonds = vec![1usize; m + 1];
    for b in 1..m {
        let left = local_dims[..b].iter().try_fold(1usize, |acc, &d| acc.checked_mul(d)).unwrap_or(usize::MAX);
        let right = local_dims[b..].iter().try_fold(1usize, |acc, &d| acc.checked_mul(d)).unwrap_or(usize::MAX);
        bonds[b] = max_bond.min(left).min(right).max(1);
    }
    bonds
}

/// ⟨a|b⟩ by left-to-right contraction of the transfer matrices.
pub fn inner_product(a: &MatrixProductState, b: &MatrixProductState) -> Result<C64> {
    if a.local_dims() != b.local_dims() {
        return Err(Error::Shape(format!(
            "inner product of MPS with local dimensions {:?} and {:?}",
            a.local_dims(),
            b.local_dims()
        )));
    }
    let mut env = Array2::<C64>::from_elem((1, 1), C64::new(1.0, 0.0));
    for (sa, sb) in a.sites.iter().zip(&b.sites) {
        // env[a, b] · conj(A[a, s, a']) · B[b, s, b']
        let conj_a = sa.mapv(|x| x.conj());
        let t = contract(&env, &[1], sb, &[0])?; // (a, s, b')
        let next = contract(&conj_a, &[0, 1], &t, &[0, 1])?; // (a', b')
        env = next.into_dimensionality().expect("rank 2");
    }
    Ok(env[[0, 0]])
}
