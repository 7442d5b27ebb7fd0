//! Lanczos approximation of exp(∓i H dt/ħ) v for Hermitian H given as a map.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::units::HBAR_EV_FS;

/// Largest Krylov subspace before giving up.
pub const MAX_KRYLOV_DIM: usize = 80;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeDirection {
    /// exp(−i H dt/ħ)
    Forward,
    /// exp(+i H dt/ħ)
    Backward,
}

impl TimeDirection {
    pub fn sign(self) -> f64 {
        match self {
            TimeDirection::Forward => 1.0,
            TimeDirection::Backward => -1.0,
        }
    }
}

fn dot(a: &Array1<C64>, b: &Array1<C64>) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &Array1<C64>) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// exp(−i·s·τ·T) e₁ for the real symmetric tridiagonal T given by (alpha, beta).
fn tridiagonal_exp_e1(alpha: &[f64], beta: &[f64], phase: f64) -> Result<Array1<C64>> {
    let k = alpha.len();
    let mut t = Array2::<f64>::zeros((k, k));
    for i in 0..k {
        t[[i, i]] = alpha[i];
        if i + 1 < k {
            t[[i, i + 1]] = beta[i];
            t[[i + 1, i]] = beta[i];
        }
    }
    let (evals, evecs) = t.eigh(UPLO::Lower)?;
    let mut out = Array1::<C64>::zeros(k);
    for j in 0..k {
        let w = C64::from_polar(evecs[[0, j]], -phase * evals[j]);
        for i in 0..k {
            out[i] += w * evecs[[i, j]];
        }
    }
    Ok(out)
}

/// Apply exp(−i·sign·H·dt/ħ) to `v`, growing the Lanczos basis until the
/// a-posteriori error estimate β_k |cₖ| ‖v‖ falls below `tol`.
pub fn krylov_expm_apply<F>(apply_h: F, v: &Array1<C64>, dt: f64, direction: TimeDirection, tol: f64) -> Result<Array1<C64>>
where
    F: Fn(&Array1<C64>) -> Array1<C64>,
{
    if v.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
        return Err(Error::Numerical("non-finite entry in Krylov start vector".into()));
    }
    let v_norm = norm(v);
    if v_norm == 0.0 {
        return Ok(v.clone());
    }
    let phase = direction.sign() * dt / HBAR_EV_FS;
    let n = v.len();
    let max_dim = MAX_KRYLOV_DIM.min(n);

    let mut basis: Vec<Array1<C64>> = vec![v.mapv(|x| x / v_norm)];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();

    loop {
        let k = basis.len();
        let mut w = apply_h(&basis[k - 1]);
        if w.len() != n {
            return Err(Error::Shape("Krylov operator changed vector length".into()));
        }
        let a = dot(&basis[k - 1], &w).re;
        alpha.push(a);
        // full reorthogonalization, twice
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &w);
                w.scaled_add(-c, q);
            }
        }
        let b = norm(&w);
        if !b.is_finite() || !a.is_finite() {
            return Err(Error::Numerical("Krylov recurrence produced non-finite values".into()));
        }
        let c = tridiagonal_exp_e1(&alpha, &beta, phase)?;
        let scale = alpha.iter().map(|x| x.abs()).fold(0.0, f64::max).max(b).max(1e-300);
        let breakdown = b <= 1e-14 * scale;
        let err_est = b * c[k - 1].norm() * v_norm;
        if breakdown || err_est < tol || k == max_dim {
            if !(breakdown || err_est < tol) && k < n {
                return Err(Error::Numerical(format!(
                    "Krylov expansion did not converge in {k} vectors (error estimate {err_est:.3e})"
                )));
            }
            let mut out = Array1::<C64>::zeros(n);
            for (q, &ci) in basis.iter().zip(c.iter()) {
                out.scaled_add(ci * v_norm, q);
            }
            return Ok(out);
        }
        beta.push(b);
        basis.push(w.mapv(|x| x / b));
    }
}
