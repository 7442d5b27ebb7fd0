//! Matrix product operators and the site-exciton Hamiltonian MPO.
//!
//! Operator tensors are stored as `(left bond, out, in, right bond)`. The
//! Hamiltonian is assembled as a finite-state automaton over the chain and
//! channels that carry no term across a bond are pruned afterwards.

use ndarray::{Array2, Array3, Array4, Ix3};
use num_complex::Complex64 as C64;

use super::effective::{self, SparseSite};
use super::linalg::{contract, permute};
use super::mps::MatrixProductState;
use crate::error::{Error, Result};
use crate::physmodel::{DiscretizedBath, SiteExcitonModel};
use crate::units::cm_to_ev;

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixProductOperator {
    tensors: Vec<Array4<C64>>,
}

impl MatrixProductOperator {
    pub fn new(tensors: Vec<Array4<C64>>) -> Result<Self> {
        if tensors.is_empty() {
            return Err(Error::Shape("an MPO needs at least one site".into()));
        }
        if tensors[0].shape()[0] != 1 || tensors[tensors.len() - 1].shape()[3] != 1 {
            return Err(Error::Shape("MPO boundary bonds must have dimension 1".into()));
        }
        for (i, pair) in tensors.windows(2).enumerate() {
            if pair[0].shape()[3] != pair[1].shape()[0] {
                return Err(Error::Shape(format!("MPO bond {i} mismatch")));
            }
        }
        for (i, w) in tensors.iter().enumerate() {
            if w.shape()[1] != w.shape()[2] {
                return Err(Error::Shape(format!("MPO site {i} is not square")));
            }
        }
        Ok(Self { tensors })
    }

    /// The zero operator on the given local dimensions.
    pub fn zero(local_dims: &[usize]) -> Self {
        Self {
            tensors: local_dims.iter().map(|&d| Array4::zeros((1, d, d, 1))).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn tensors(&self) -> &[Array4<C64>] {
        &self.tensors
    }

    pub fn local_dims(&self) -> Vec<usize> {
        self.tensors.iter().map(|w| w.shape()[1]).collect()
    }

    pub fn bond_dims(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self.tensors.iter().map(|w| w.shape()[0]).collect();
        out.push(1);
        out
    }

    /// Dense matrix (site 0 most significant). Only for small chains.
    pub fn to_dense(&self) -> Array2<C64> {
        // acc: (out, in, bond)
        let w0 = &self.tensors[0];
        let (_, d0, _, b0) = w0.dim();
        let mut acc: Array3<C64> = w0
            .to_shape((d0, d0, b0))
            .expect("boundary tensor")
            .to_owned();
        for w in &self.tensors[1..] {
            let (o, i, _) = acc.dim();
            let (_, d, _, b) = w.dim();
            let t = contract(&acc, &[2], w, &[0]).expect("bond match"); // (o, i, s, s', b)
            let t = permute(&t, &[0, 2, 1, 3, 4]);
            acc = t
                .into_shape_with_order((o * d, i * d, b))
                .expect("reshape")
                .into_dimensionality::<Ix3>()
                .expect("rank 3");
        }
        let (o, i, _) = acc.dim();
        acc.into_shape_with_order((o, i)).expect("closing bond is 1")
    }

    pub fn hermiticity_residual(&self) -> f64 {
        let h = self.to_dense();
        h.indexed_iter()
            .map(|((r, c), x)| (x - h[[c, r]].conj()).norm())
            .fold(0.0, f64::max)
    }
}

/// Left environment step: E'[a', w', b'] = Σ conj(A[a,s,a']) E[a,w,b] W[w,s,s',w'] B[b,s',b'].
pub(crate) fn extend_left(env: &Array3<C64>, bra: &Array3<C64>, w: &Array4<C64>, ket: &Array3<C64>) -> Array3<C64> {
    effective::extend_left(env, bra, &SparseSite::new(w), ket)
}

pub(crate) fn trivial_env() -> Array3<C64> {
    Array3::from_elem((1, 1, 1), C64::new(1.0, 0.0))
}

/// ⟨ψ|O|ψ⟩ / ⟨ψ|ψ⟩ is not taken here: this is the raw ⟨a|O|b⟩.
pub fn expectation(bra: &MatrixProductState, op: &MatrixProductOperator, ket: &MatrixProductState) -> Result<C64> {
    if bra.local_dims() != op.local_dims() || ket.local_dims() != op.local_dims() {
        return Err(Error::Shape("expectation: local dimensions differ".into()));
    }
    let mut env = trivial_env();
    for ((a, w), b) in bra.sites().iter().zip(op.tensors()).zip(ket.sites()) {
        env = extend_left(&env, a, w, b);
    }
    Ok(env[[0, 0, 0]])
}

/// What sits at each chain position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SiteKind {
    Electronic,
    /// Bath mode `index` (ascending frequency) of electronic state `state` (0 or 1).
    Mode { state: usize, index: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SiteOrdering {
    /// State-1 modes by descending frequency, the electronic site, then
    /// state-2 modes by ascending frequency.
    #[default]
    CentralElectronic,
    /// Electronic site first, then all state-1 modes, then all state-2 modes.
    ElectronicFirst,
    Custom(Vec<SiteKind>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainLayout {
    sites: Vec<SiteKind>,
    electronic: usize,
}

impl ChainLayout {
    pub fn new(ordering: &SiteOrdering, bath: &DiscretizedBath) -> Result<Self> {
        let [n1, n2] = [bath.states[0].len(), bath.states[1].len()];
        let sites: Vec<SiteKind> = match ordering {
            SiteOrdering::CentralElectronic => (0..n1)
                .rev()
                .map(|index| SiteKind::Mode { state: 0, index })
                .chain(std::iter::once(SiteKind::Electronic))
                .chain((0..n2).map(|index| SiteKind::Mode { state: 1, index }))
                .collect(),
            SiteOrdering::ElectronicFirst => std::iter::once(SiteKind::Electronic)
                .chain((0..n1).map(|index| SiteKind::Mode { state: 0, index }))
                .chain((0..n2).map(|index| SiteKind::Mode { state: 1, index }))
                .collect(),
            SiteOrdering::Custom(v) => v.clone(),
        };
        let mut seen_e = 0;
        let mut seen = [vec![false; n1], vec![false; n2]];
        for s in &sites {
            match *s {
                SiteKind::Electronic => seen_e += 1,
                SiteKind::Mode { state, index } => {
                    let slot = seen
                        .get_mut(state)
                        .and_then(|v| v.get_mut(index))
                        .ok_or_else(|| Error::Config(format!("ordering names nonexistent mode ({state}, {index})")))?;
                    if *slot {
                        return Err(Error::Config(format!("ordering repeats mode ({state}, {index})")));
                    }
                    *slot = true;
                }
            }
        }
        if seen_e != 1 {
            return Err(Error::Config("ordering must contain exactly one electronic site".into()));
        }
        if seen.iter().flatten().any(|x| !x) {
            return Err(Error::Config("ordering omits some bath modes".into()));
        }
        let electronic = sites.iter().position(|s| *s == SiteKind::Electronic).expect("checked");
        Ok(Self { sites, electronic })
    }

    pub fn sites(&self) -> &[SiteKind] {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn electronic_site(&self) -> usize {
        self.electronic
    }

    pub fn local_dims(&self, n_boson_levels: usize) -> Vec<usize> {
        self.sites
            .iter()
            .map(|s| match s {
                SiteKind::Electronic => 2,
                SiteKind::Mode { .. } => n_boson_levels,
            })
            .collect()
    }
}

// Automaton channels.
const START: usize = 0;
const PENDING_Q: [usize; 2] = [1, 2]; // bath coordinate placed, projector to come
const PENDING_P: [usize; 2] = [3, 4]; // projector placed, bath coordinate to come
const DONE: usize = 5;
const CHANNELS: usize = 6;

fn boson_number(n: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, n), |(i, j)| if i == j { i as f64 } else { 0.0 })
}

/// Q = (b + b†)/√2 in the truncated number basis.
fn boson_position(n: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, n), |(i, j)| {
        if i + 1 == j {
            (j as f64).sqrt() / std::f64::consts::SQRT_2
        } else if j + 1 == i {
            (i as f64).sqrt() / std::f64::consts::SQRT_2
        } else {
            0.0
        }
    })
}

fn put(w: &mut Array4<C64>, from: usize, to: usize, op: &Array2<f64>, scale: f64) {
    for ((s, t), &x) in op.indexed_iter() {
        w[[from, s, t, to]] += C64::new(scale * x, 0.0);
    }
}

/// H = H_S + Σ ω b†b + Σ_k |k⟩⟨k| ⊗ Σ_j κ_kj Q_kj, in eV, zero-point energy dropped.
pub fn build_mpo(
    model: &SiteExcitonModel,
    bath: &DiscretizedBath,
    n_boson_levels: usize,
    layout: &ChainLayout,
) -> Result<MatrixProductOperator> {
    if n_boson_levels < 2 {
        return Err(Error::Config(format!("n_boson_levels must be >= 2, got {n_boson_levels}")));
    }
    let expected = bath.total_modes() + 1;
    if layout.len() != expected {
        return Err(Error::Config(format!(
            "layout has {} sites but the bath needs {expected}",
            layout.len()
        )));
    }
    let e = layout.electronic_site();
    let eye_b = Array2::<f64>::eye(n_boson_levels);
    let number = boson_number(n_boson_levels);
    let position = boson_position(n_boson_levels);
    let eye_e = Array2::<f64>::eye(2);
    let hs = model.system_hamiltonian();
    let h_sys = Array2::from_shape_fn((2, 2), |(i, j)| hs[i][j]);
    let projector = |k: usize| Array2::from_shape_fn((2, 2), |(i, j)| if i == k && j == k { 1.0 } else { 0.0 });

    let mut tensors = Vec::with_capacity(layout.len());
    for (p, site) in layout.sites().iter().enumerate() {
        let d = if matches!(site, SiteKind::Electronic) { 2 } else { n_boson_levels };
        let mut w = Array4::<C64>::zeros((CHANNELS, d, d, CHANNELS));
        match *site {
            SiteKind::Electronic => {
                put(&mut w, START, START, &eye_e, 1.0);
                put(&mut w, DONE, DONE, &eye_e, 1.0);
                put(&mut w, START, DONE, &h_sys, 1.0);
                for k in 0..2 {
                    put(&mut w, PENDING_Q[k], DONE, &projector(k), 1.0);
                    put(&mut w, START, PENDING_P[k], &projector(k), 1.0);
                }
            }
            SiteKind::Mode { state, index } => {
                let omega = cm_to_ev(bath.states[state].frequencies[index]);
                let kappa = cm_to_ev(bath.states[state].couplings[index]);
                put(&mut w, START, START, &eye_b, 1.0);
                put(&mut w, DONE, DONE, &eye_b, 1.0);
                put(&mut w, START, DONE, &number, omega);
                for k in 0..2 {
                    if p < e {
                        put(&mut w, PENDING_Q[k], PENDING_Q[k], &eye_b, 1.0);
                    } else {
                        put(&mut w, PENDING_P[k], PENDING_P[k], &eye_b, 1.0);
                    }
                }
                if p < e {
                    put(&mut w, START, PENDING_Q[state], &position, kappa);
                } else {
                    put(&mut w, PENDING_P[state], DONE, &position, kappa);
                }
            }
        }
        tensors.push(w);
    }
    // boundary vectors
    let first = tensors[0].slice(ndarray::s![START..START + 1, .., .., ..]).to_owned();
    tensors[0] = first;
    let m = tensors.len();
    let last = tensors[m - 1].slice(ndarray::s![.., .., .., DONE..DONE + 1]).to_owned();
    tensors[m - 1] = last;
    prune_channels(&mut tensors);
    MatrixProductOperator::new(tensors)
}

/// Drop bond channels that no term passes through.
fn prune_channels(tensors: &mut [Array4<C64>]) {
    loop {
        let mut changed = false;
        for b in 1..tensors.len() {
            let width = tensors[b].shape()[0];
            let keep: Vec<usize> = (0..width)
                .filter(|&j| {
                    let out_used = tensors[b - 1]
                        .slice(ndarray::s![.., .., .., j])
                        .iter()
                        .any(|x| x.norm() != 0.0);
                    let in_used = tensors[b].slice(ndarray::s![j, .., .., ..]).iter().any(|x| x.norm() != 0.0);
                    out_used && in_used
                })
                .collect();
            if keep.len() < width && !keep.is_empty() {
                tensors[b - 1] = tensors[b - 1].select(ndarray::Axis(3), &keep);
                tensors[b] = tensors[b].select(ndarray::Axis(0), &keep);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
}
