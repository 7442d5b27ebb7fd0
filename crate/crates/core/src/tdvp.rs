//! Time-dependent variational propagation of the site-exciton MPS.
//!
//! One sweep advances time by `dt` with a symmetric splitting: a left-to-right
//! half sweep by `dt/2` followed by a right-to-left half sweep by `dt/2`. Sites
//! (or site pairs) are evolved forward with their effective Hamiltonian, the
//! bond matrices (or single sites, in the two-site scheme) backward.

use ndarray::{Array1, Array2, Array3, Array4, Ix3, Ix4};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physmodel::{discretize_bath, DiscretizedBath, SiteExcitonModel};
use crate::tensornet::linalg::{contract, lq, matricize, qr, svd_truncate};
use crate::tensornet::effective::{apply_one_site, apply_two_site, apply_zero_site, extend_left, extend_right, SparseSite};
use crate::tensornet::mpo::trivial_env;
use crate::tensornet::{
    build_mpo, expectation, krylov_expm_apply, ChainLayout, MatrixProductOperator, MatrixProductState,
    SiteOrdering, TimeDirection,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    OneSite,
    TwoSite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagationConfig {
    /// fs
    pub dt: f64,
    /// fs
    pub t_end: f64,
    pub scheme: Scheme,
    pub svd_cutoff: f64,
    pub max_bond: usize,
    pub krylov_tol: f64,
    pub record_stride: usize,
    pub n_boson_levels: usize,
    /// Initially excited electronic state, 1 or 2.
    pub excited_site: usize,
    /// Bond dimension the initial product state is zero-padded to. Only
    /// meaningful for the one-site scheme, which cannot grow bonds itself.
    pub initial_bond: usize,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        Self {
            dt: 0.5,
            t_end: 1000.0,
            scheme: Scheme::TwoSite,
            svd_cutoff: 1e-13,
            max_bond: 64,
            krylov_tol: 1e-12,
            record_stride: 1,
            n_boson_levels: crate::physmodel::DEFAULT_BOSON_LEVELS,
            excited_site: 1,
            initial_bond: 1,
        }
    }
}

impl PropagationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::Config(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.t_end >= self.dt) {
            return Err(Error::Config(format!("t_end {} must be >= dt {}", self.t_end, self.dt)));
        }
        if !(self.svd_cutoff >= 0.0) {
            return Err(Error::Config("svd_cutoff must be >= 0".into()));
        }
        if self.max_bond == 0 || self.record_stride == 0 {
            return Err(Error::Config("max_bond and record_stride must be >= 1".into()));
        }
        if !(self.krylov_tol > 0.0) {
            return Err(Error::Config("krylov_tol must be > 0".into()));
        }
        if self.n_boson_levels < 2 {
            return Err(Error::Config("n_boson_levels must be >= 2".into()));
        }
        if !(1..=2).contains(&self.excited_site) {
            return Err(Error::Config("excited_site must be 1 or 2".into()));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

/// One row of the electronic reduced density matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityRow {
    pub rho11: f64,
    pub rho22: f64,
    pub re_rho12: f64,
    pub im_rho12: f64,
}

impl DensityRow {
    pub fn from_matrix(rho: &Array2<C64>) -> Self {
        Self {
            rho11: rho[[0, 0]].re,
            rho22: rho[[1, 1]].re,
            re_rho12: rho[[0, 1]].re,
            im_rho12: rho[[0, 1]].im,
        }
    }

    pub fn trace(&self) -> f64 {
        self.rho11 + self.rho22
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub rows: Vec<DensityRow>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn push(&mut self, t: f64, row: DensityRow) {
        self.times.push(t);
        self.rows.push(row);
    }

    /// Check the trace and population-range invariants.
    pub fn validate(&self, tol: f64) -> Result<()> {
        if self.times.len() != self.rows.len() {
            return Err(Error::Shape("trajectory times and rows differ in length".into()));
        }
        for (t, r) in self.times.iter().zip(&self.rows) {
            if (r.trace() - 1.0).abs() > tol {
                return Err(Error::Numerical(format!("trace {} at t = {t} fs", r.trace())));
            }
            for p in [r.rho11, r.rho22] {
                if p < -tol || p > 1.0 + tol {
                    return Err(Error::Numerical(format!("population {p} out of range at t = {t} fs")));
                }
            }
        }
        Ok(())
    }

    /// Rows with t ≤ `t_max` (within half a step of rounding).
    pub fn truncated(&self, t_max: f64) -> Trajectory {
        let n = self.times.iter().take_while(|&&t| t <= t_max + 1e-9).count();
        Trajectory {
            times: self.times[..n].to_vec(),
            rows: self.rows[..n].to_vec(),
        }
    }

    pub fn time_step(&self) -> Option<f64> {
        (self.times.len() >= 2).then(|| self.times[1] - self.times[0])
    }
}

/// Everything needed to propagate one model: bath, chain layout and MPO.
#[derive(Debug, Clone)]
pub struct SystemSetup {
    pub model: SiteExcitonModel,
    pub bath: DiscretizedBath,
    pub layout: ChainLayout,
    pub mpo: MatrixProductOperator,
    pub n_boson_levels: usize,
}

impl SystemSetup {
    pub fn new(model: &SiteExcitonModel, n_boson_levels: usize, ordering: &SiteOrdering) -> Result<Self> {
        let bath = discretize_bath(model)?;
        let layout = ChainLayout::new(ordering, &bath)?;
        let mpo = build_mpo(model, &bath, n_boson_levels, &layout)?;
        Ok(Self {
            model: *model,
            bath,
            layout,
            mpo,
            n_boson_levels,
        })
    }
}

/// Electronic state `excited_site` (1 or 2) times the bath vacuum.
pub fn initial_state(layout: &ChainLayout, n_boson_levels: usize, excited_site: usize) -> Result<MatrixProductState> {
    if !(1..=2).contains(&excited_site) {
        return Err(Error::Config(format!("excited_site must be 1 or 2, got {excited_site}")));
    }
    let locals: Vec<Array1<C64>> = layout
        .local_dims(n_boson_levels)
        .into_iter()
        .enumerate()
        .map(|(i, d)| {
            let mut v = Array1::<C64>::zeros(d);
            let occupied = if i == layout.electronic_site() { excited_site - 1 } else { 0 };
            v[occupied] = C64::new(1.0, 0.0);
            v
        })
        .collect();
    MatrixProductState::product(&locals)
}

/// ρ_ij = Σ M[a,i,b] conj(M[a,j,b]) with M the electronic tensor at the
/// canonical center.
pub fn reduced_density_matrix(mps: &MatrixProductState, electronic_site: usize) -> Result<Array2<C64>> {
    let centered;
    let mps = if mps.center() == Some(electronic_site) {
        mps
    } else {
        centered = mps.canonicalize(electronic_site)?;
        &centered
    };
    let m = mps.site(electronic_site);
    let d = m.shape()[1];
    let mut rho = Array2::<C64>::zeros((d, d));
    for ((a, i, b), x) in m.indexed_iter() {
        for j in 0..d {
            rho[[i, j]] += x * m[[a, j, b]].conj();
        }
    }
    Ok(rho)
}

pub fn hermiticity_error(rho: &Array2<C64>) -> f64 {
    rho.indexed_iter()
        .map(|((i, j), x)| (x - rho[[j, i]].conj()).norm())
        .fold(0.0, f64::max)
}

fn flat<D: ndarray::Dimension>(a: ndarray::Array<C64, D>) -> Array1<C64> {
    let n = a.len();
    a.into_shape_with_order(n).expect("contiguous")
}

/// Running statistics of one sweep.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SweepStats {
    pub discarded_weight: f64,
    pub max_bond: usize,
}

/// TDVP integrator holding the MPS together with its cached environments.
#[derive(Debug, Clone)]
pub struct Tdvp<'a> {
    mpo: &'a MatrixProductOperator,
    sparse: Vec<SparseSite>,
    mps: MatrixProductState,
    left: Vec<Array3<C64>>,
    right: Vec<Array3<C64>>,
    scheme: Scheme,
    svd_cutoff: f64,
    max_bond: usize,
    krylov_tol: f64,
}

impl<'a> Tdvp<'a> {
    pub fn new(
        mut mps: MatrixProductState,
        mpo: &'a MatrixProductOperator,
        scheme: Scheme,
        svd_cutoff: f64,
        max_bond: usize,
        krylov_tol: f64,
    ) -> Result<Self> {
        if mps.local_dims() != mpo.local_dims() {
            return Err(Error::Shape("MPS and MPO local dimensions differ".into()));
        }
        mps.canonicalize_mut(0)?;
        let m = mps.len();
        let sparse: Vec<SparseSite> = mpo.tensors().iter().map(SparseSite::new).collect();
        let mut right = vec![trivial_env(); m];
        for i in (0..m - 1).rev() {
            let s = mps.site(i + 1);
            right[i] = extend_right(&right[i + 1], s, &sparse[i + 1], s);
        }
        Ok(Self {
            mpo,
            sparse,
            mps,
            left: vec![trivial_env(); m],
            right,
            scheme,
            svd_cutoff,
            max_bond,
            krylov_tol,
        })
    }

    pub fn state(&self) -> &MatrixProductState {
        &self.mps
    }

    pub fn into_state(self) -> MatrixProductState {
        self.mps
    }

    /// ⟨ψ|H|ψ⟩ in eV.
    pub fn energy(&self) -> f64 {
        expectation(&self.mps, self.mpo, &self.mps).map(|z| z.re).unwrap_or(f64::NAN)
    }

    /// Advance by `dt` (fs). The state is canonical about site 0 before and after.
    pub fn sweep(&mut self, dt: f64) -> Result<SweepStats> {
        let scheme = if self.mps.len() == 1 { Scheme::OneSite } else { self.scheme };
        match scheme {
            Scheme::OneSite => self.sweep_one_site(dt / 2.0),
            Scheme::TwoSite => self.sweep_two_site(dt / 2.0),
        }
    }

    fn evolve_site(&self, i: usize, theta: &Array3<C64>, tau: f64, dir: TimeDirection) -> Result<Array3<C64>> {
        let (l, w, r) = (&self.left[i], &self.sparse[i], &self.right[i]);
        let shape = theta.raw_dim();
        let out = krylov_expm_apply(
            |v| {
                let th = v.to_shape(shape).expect("site shape").to_owned();
                flat(apply_one_site(l, w, r, &th))
            },
            &flat(theta.clone()),
            tau,
            dir,
            self.krylov_tol,
        )?;
        Ok(out.into_shape_with_order(shape).expect("site shape"))
    }

    /// Bond matrix sitting between sites `i` and `i+1`.
    fn evolve_bond(&self, i: usize, c: &Array2<C64>, tau: f64) -> Result<Array2<C64>> {
        let (l, r) = (&self.left[i + 1], &self.right[i]);
        let shape = c.raw_dim();
        let out = krylov_expm_apply(
            |v| {
                let cm = v.to_shape(shape).expect("bond shape").to_owned();
                flat(apply_zero_site(l, r, &cm))
            },
            &flat(c.clone()),
            tau,
            TimeDirection::Backward,
            self.krylov_tol,
        )?;
        Ok(out.into_shape_with_order(shape).expect("bond shape"))
    }

    fn evolve_pair(&self, i: usize, theta: &Array4<C64>, tau: f64) -> Result<Array4<C64>> {
        let (l, r) = (&self.left[i], &self.right[i + 1]);
        let (w1, w2) = (&self.sparse[i], &self.sparse[i + 1]);
        let shape = theta.raw_dim();
        let out = krylov_expm_apply(
            |v| {
                let th = v.to_shape(shape).expect("pair shape").to_owned();
                flat(apply_two_site(l, w1, w2, r, &th))
            },
            &flat(theta.clone()),
            tau,
            TimeDirection::Forward,
            self.krylov_tol,
        )?;
        Ok(out.into_shape_with_order(shape).expect("pair shape"))
    }

    fn sweep_one_site(&mut self, tau: f64) -> Result<SweepStats> {
        let m = self.mps.len();
        for i in 0..m {
            let theta = self.evolve_site(i, self.mps.site(i), tau, TimeDirection::Forward)?;
            if i + 1 == m {
                self.mps.set_site(i, theta, Some(i));
                break;
            }
            let (dl, d, _) = theta.dim();
            let (q, r) = qr(&matricize(&theta, 2))?;
            let k = q.ncols();
            let q = q.into_shape_with_order((dl, d, k)).expect("qr shape");
            self.left[i + 1] = extend_left(&self.left[i], &q, &self.sparse[i], &q);
            self.mps.set_site(i, q, None);
            let r = self.evolve_bond(i, &r, tau)?;
            let next = contract(&r, &[1], self.mps.site(i + 1), &[0])?
                .into_dimensionality::<Ix3>()
                .expect("rank 3");
            self.mps.set_site(i + 1, next, Some(i + 1));
        }
        for i in (0..m).rev() {
            let theta = self.evolve_site(i, self.mps.site(i), tau, TimeDirection::Forward)?;
            if i == 0 {
                self.mps.set_site(0, theta, Some(0));
                break;
            }
            let (_, d, dr) = theta.dim();
            let (l, q) = lq(&matricize(&theta, 1))?;
            let k = q.nrows();
            let q = q.into_shape_with_order((k, d, dr)).expect("lq shape");
            self.right[i - 1] = extend_right(&self.right[i], &q, &self.sparse[i], &q);
            self.mps.set_site(i, q, None);
            let l = self.evolve_bond(i - 1, &l, tau)?;
            let prev = contract(self.mps.site(i - 1), &[2], &l, &[0])?
                .into_dimensionality::<Ix3>()
                .expect("rank 3");
            self.mps.set_site(i - 1, prev, Some(i - 1));
        }
        Ok(SweepStats {
            discarded_weight: 0.0,
            max_bond: self.mps.max_bond(),
        })
    }

    fn split_pair(&self, theta: &Array4<C64>) -> Result<(Array3<C64>, Array3<C64>, f64, Array1<f64>)> {
        let (dl, d1, d2, dr) = theta.dim();
        let mat = theta.to_shape((dl * d1, d2 * dr)).expect("pair matrix").to_owned();
        let svd = svd_truncate(mat.view(), self.svd_cutoff, self.max_bond)?;
        let k = svd.rank();
        let u = svd.u.into_shape_with_order((dl, d1, k)).expect("u shape");
        let vt = svd.vt.into_shape_with_order((k, d2, dr)).expect("vt shape");
        Ok((u, vt, svd.discarded_weight, svd.s))
    }

    fn sweep_two_site(&mut self, tau: f64) -> Result<SweepStats> {
        let m = self.mps.len();
        let mut stats = SweepStats::default();
        let pair = |mps: &MatrixProductState, i: usize| -> Array4<C64> {
            contract(mps.site(i), &[2], mps.site(i + 1), &[0])
                .expect("pair bond")
                .into_dimensionality::<Ix4>()
                .expect("rank 4")
        };
        for i in 0..m - 1 {
            let theta = self.evolve_pair(i, &pair(&self.mps, i), tau)?;
            let (u, mut vt, discarded, s) = self.split_pair(&theta)?;
            stats.discarded_weight += discarded;
            for (mut row, &sv) in vt.outer_iter_mut().zip(&s) {
                row.mapv_inplace(|x| x * sv);
            }
            self.left[i + 1] = extend_left(&self.left[i], &u, &self.sparse[i], &u);
            self.mps.set_site(i, u, None);
            let next = if i + 2 < m {
                self.evolve_site(i + 1, &vt, tau, TimeDirection::Backward)?
            } else {
                vt
            };
            self.mps.set_site(i + 1, next, Some(i + 1));
        }
        for i in (0..m - 1).rev() {
            let theta = self.evolve_pair(i, &pair(&self.mps, i), tau)?;
            let (mut u, vt, discarded, s) = self.split_pair(&theta)?;
            stats.discarded_weight += discarded;
            for (mut col, &sv) in u.axis_iter_mut(ndarray::Axis(2)).zip(&s) {
                col.mapv_inplace(|x| x * sv);
            }
            self.right[i] = extend_right(&self.right[i + 1], &vt, &self.sparse[i + 1], &vt);
            self.mps.set_site(i + 1, vt, None);
            let prev = if i > 0 {
                self.evolve_site(i, &u, tau, TimeDirection::Backward)?
            } else {
                u
            };
            self.mps.set_site(i, prev, Some(i));
        }
        stats.max_bond = self.mps.max_bond();
        Ok(stats)
    }
}

/// Advance `mps` by one symmetric sweep of length `dt`.
pub fn tdvp_sweep(
    mps: &MatrixProductState,
    mpo: &MatrixProductOperator,
    dt: f64,
    config: &PropagationConfig,
) -> Result<MatrixProductState> {
    if mps.center() != Some(0) {
        return Err(Error::Domain("tdvp_sweep needs the MPS canonical about site 0".into()));
    }
    let mut tdvp = Tdvp::new(
        mps.clone(),
        mpo,
        config.scheme,
        config.svd_cutoff,
        config.max_bond,
        config.krylov_tol,
    )?;
    tdvp.sweep(dt)?;
    Ok(tdvp.into_state())
}

/// Diagnostics recorded alongside each trajectory row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub t: f64,
    pub norm: f64,
    /// eV
    pub energy: f64,
    pub max_bond: usize,
    pub discarded_weight: f64,
    /// max |ρ_ij − conj(ρ_ji)|
    pub hermiticity: f64,
}

#[derive(Debug, Clone)]
pub struct Propagation {
    pub trajectory: Trajectory,
    pub diagnostics: Vec<StepDiagnostics>,
}

/// Propagate from the vertically excited bath vacuum.
pub fn propagate(model: &SiteExcitonModel, config: &PropagationConfig) -> Result<Trajectory> {
    Ok(propagate_detailed(model, config, &SiteOrdering::default(), false)?.trajectory)
}

/// As [`propagate`], optionally recording norm and energy at each sample.
pub fn propagate_detailed(
    model: &SiteExcitonModel,
    config: &PropagationConfig,
    ordering: &SiteOrdering,
    track_energy: bool,
) -> Result<Propagation> {
    config.validate()?;
    let setup = SystemSetup::new(model, config.n_boson_levels, ordering)?;
    propagate_setup(&setup, config, track_energy)
}

pub fn propagate_setup(setup: &SystemSetup, config: &PropagationConfig, track_energy: bool) -> Result<Propagation> {
    config.validate()?;
    let mut psi = initial_state(&setup.layout, setup.n_boson_levels, config.excited_site)?;
    if config.initial_bond > 1 {
        psi.pad_bonds(config.initial_bond.min(config.max_bond))?;
    }
    let e_site = setup.layout.electronic_site();
    let mut tdvp = Tdvp::new(
        psi,
        &setup.mpo,
        config.scheme,
        config.svd_cutoff,
        config.max_bond,
        config.krylov_tol,
    )?;
    let mut out = Propagation {
        trajectory: Trajectory::default(),
        diagnostics: Vec::new(),
    };
    let mut discarded = 0.0;
    let record = |tdvp: &Tdvp, step: usize, discarded: f64, out: &mut Propagation| -> Result<()> {
        let t = step as f64 * config.dt;
        let rho = reduced_density_matrix(tdvp.state(), e_site)?;
        out.trajectory.push(t, DensityRow::from_matrix(&rho));
        out.diagnostics.push(StepDiagnostics {
            t,
            norm: tdvp.state().norm(),
            energy: if track_energy { tdvp.energy() } else { f64::NAN },
            max_bond: tdvp.state().max_bond(),
            discarded_weight: discarded,
            hermiticity: hermiticity_error(&rho),
        });
        Ok(())
    };
    record(&tdvp, 0, 0.0, &mut out)?;
    let n = config.n_steps();
    for step in 1..=n {
        let stats = tdvp.sweep(config.dt).map_err(|e| match e {
            Error::Numerical(msg) => Error::Numerical(format!("step {step}: {msg}")),
            other => other,
        })?;
        discarded += stats.discarded_weight;
        if step % config.record_stride == 0 {
            record(&tdvp, step, discarded, &mut out)?;
        }
    }
    Ok(out)
}
