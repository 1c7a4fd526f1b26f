//! Dynamical systems (mass, damping, restoring force, load) and the implicit
//! symplectic Euler midpoint integrator, plus the two built-in example
//! systems: a mass-spring-damper and a geometrically nonlinear cantilever
//! beam with a Karhunen-Loève elastic-modulus field.

use std::ops::Range;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::randomfield::KLField;

/// Default relative base for the implicit-solve tolerance; the per-step
/// absolute tolerance is `DEFAULT_TOL * (1 + |U_prev|_inf)`.
pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 50;

/// Iterations of plain fixed-point before switching to Newton.
const FIXED_POINT_BUDGET: usize = 10;

/// Which response a quantity of interest or a sensor reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResponseKind {
    Displacement,
    Velocity,
}

/// Where the response is read: a raw dof index or a spatial coordinate
/// resolved through the element shape functions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Location {
    Dof(usize),
    Spatial(f64),
}

/// A scalar quantity of interest on a dynamical system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QoISpec {
    pub kind: ResponseKind,
    pub location: Location,
}

impl QoISpec {
    pub const fn displacement_dof(index: usize) -> Self {
        Self {
            kind: ResponseKind::Displacement,
            location: Location::Dof(index),
        }
    }

    pub const fn velocity_dof(index: usize) -> Self {
        Self {
            kind: ResponseKind::Velocity,
            location: Location::Dof(index),
        }
    }

    pub const fn displacement_at(x: f64) -> Self {
        Self {
            kind: ResponseKind::Displacement,
            location: Location::Spatial(x),
        }
    }

    pub const fn velocity_at(x: f64) -> Self {
        Self {
            kind: ResponseKind::Velocity,
            location: Location::Spatial(x),
        }
    }

    /// Parses a label produced by [`QoISpec::label`].
    pub fn parse(label: &str) -> Result<Self> {
        let bad = || Error::Config(format!("cannot parse quantity-of-interest label '{label}'"));
        let (kind_str, rest) = label.split_once('_').ok_or_else(bad)?;
        let kind = match kind_str {
            "disp" => ResponseKind::Displacement,
            "vel" => ResponseKind::Velocity,
            _ => return Err(bad()),
        };
        let location = if let Some(idx) = rest.strip_prefix("dof") {
            Location::Dof(idx.parse().map_err(|_| bad())?)
        } else if let Some(x) = rest.strip_prefix('x') {
            Location::Spatial(x.parse().map_err(|_| bad())?)
        } else {
            return Err(bad());
        };
        Ok(Self { kind, location })
    }

    /// Stable channel label used in database files and CSV headers.
    pub fn label(&self) -> String {
        let kind = match self.kind {
            ResponseKind::Displacement => "disp",
            ResponseKind::Velocity => "vel",
        };
        match self.location {
            Location::Dof(i) => format!("{kind}_dof{i}"),
            Location::Spatial(x) => format!("{kind}_x{x}"),
        }
    }
}

/// Maps coordinates of the stacked random vector to their physical roles.
#[derive(Debug, Clone)]
pub struct ParamLayout {
    pub eps: Range<usize>,
    pub theta: Range<usize>,
    pub u0: Option<Range<usize>>,
    pub s0: Option<Range<usize>>,
}

impl ParamLayout {
    pub fn eps_only(dim: usize) -> Self {
        Self {
            eps: 0..dim,
            theta: dim..dim,
            u0: None,
            s0: None,
        }
    }

    pub fn eps_slice<'a>(&self, alpha: &'a [f64]) -> &'a [f64] {
        &alpha[self.eps.clone()]
    }

    pub fn theta_slice<'a>(&self, alpha: &'a [f64]) -> &'a [f64] {
        &alpha[self.theta.clone()]
    }
}

type MatrixFn = dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync;
type RestoringFn = dyn Fn(&DVector<f64>, &[f64]) -> DVector<f64> + Send + Sync;
type LoadFn = dyn Fn(f64, &[f64]) -> DVector<f64> + Send + Sync;
type ShapeFn = dyn Fn(&DVector<f64>, f64) -> Result<f64> + Send + Sync;
type EnergyFn = dyn Fn(&DVector<f64>, &[f64]) -> f64 + Send + Sync;

/// A second-order structural system M(e) u'' + C(e) u' + F(u, e) = f(th, t).
pub struct DynamicalSystem {
    pub name: String,
    pub ndof: usize,
    pub param_layout: ParamLayout,
    mass: Box<MatrixFn>,
    damping: Box<MatrixFn>,
    restoring: Box<RestoringFn>,
    load: Box<LoadFn>,
    shape: Option<Box<ShapeFn>>,
    strain_energy: Option<Box<EnergyFn>>,
}

impl DynamicalSystem {
    pub fn new(
        name: impl Into<String>,
        ndof: usize,
        param_layout: ParamLayout,
        mass: Box<MatrixFn>,
        damping: Box<MatrixFn>,
        restoring: Box<RestoringFn>,
        load: Box<LoadFn>,
    ) -> Self {
        Self {
            name: name.into(),
            ndof,
            param_layout,
            mass,
            damping,
            restoring,
            load,
            shape: None,
            strain_energy: None,
        }
    }

    pub fn with_shape(mut self, shape: Box<ShapeFn>) -> Self {
        self.shape = Some(shape);
        self
    }

    pub fn with_strain_energy(mut self, energy: Box<EnergyFn>) -> Self {
        self.strain_energy = Some(energy);
        self
    }

    pub fn mass_at(&self, alpha: &[f64]) -> DMatrix<f64> {
        (self.mass)(self.param_layout.eps_slice(alpha))
    }

    pub fn damping_at(&self, alpha: &[f64]) -> DMatrix<f64> {
        (self.damping)(self.param_layout.eps_slice(alpha))
    }

    pub fn restoring_at(&self, u: &DVector<f64>, alpha: &[f64]) -> DVector<f64> {
        (self.restoring)(u, self.param_layout.eps_slice(alpha))
    }

    pub fn load_at(&self, t: f64, alpha: &[f64]) -> DVector<f64> {
        (self.load)(t, self.param_layout.theta_slice(alpha))
    }

    /// Discrete strain energy, where the system provides one (the beam does).
    pub fn strain_energy_at(&self, u: &DVector<f64>, alpha: &[f64]) -> Option<f64> {
        self.strain_energy
            .as_ref()
            .map(|e| e(u, self.param_layout.eps_slice(alpha)))
    }

    /// Initial state [u0; s0] from alpha, zeros where not randomized.
    pub fn initial_state(&self, alpha: &[f64]) -> DVector<f64> {
        let mut state = DVector::zeros(2 * self.ndof);
        if let Some(range) = &self.param_layout.u0 {
            for (k, idx) in range.clone().enumerate() {
                state[k] = alpha[idx];
            }
        }
        if let Some(range) = &self.param_layout.s0 {
            for (k, idx) in range.clone().enumerate() {
                state[self.ndof + k] = alpha[idx];
            }
        }
        state
    }
}

/// Uniform-step trajectory of state vectors [u; s], one row per time step.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTrajectory {
    pub times: Vec<f64>,
    pub states: DMatrix<f64>,
}

impl StateTrajectory {
    pub fn n_steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn state(&self, k: usize) -> DVector<f64> {
        self.states.row(k).transpose()
    }

    pub fn ndof(&self) -> usize {
        self.states.ncols() / 2
    }
}

/// Caches the constant-per-alpha pieces of one integration run.
struct Stepper<'a> {
    system: &'a DynamicalSystem,
    alpha: &'a [f64],
    m_lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    damping_mat: DMatrix<f64>,
}

impl<'a> Stepper<'a> {
    fn new(system: &'a DynamicalSystem, alpha: &'a [f64]) -> Self {
        let m = system.mass_at(alpha);
        Self {
            system,
            alpha,
            m_lu: m.lu(),
            damping_mat: system.damping_at(alpha),
        }
    }

    /// State derivative H(t, U) = [s; M^-1 (f - C s - F(u))].
    fn vector_field(&self, t: f64, state: &DVector<f64>) -> DVector<f64> {
        let n = self.system.ndof;
        let u = state.rows(0, n).into_owned();
        let s = state.rows(n, n).into_owned();
        let mut rhs = self.system.load_at(t, self.alpha);
        rhs -= &self.damping_mat * &s;
        rhs -= self.system.restoring_at(&u, self.alpha);
        let accel = self.m_lu.solve(&rhs).expect("mass matrix is singular");
        let mut out = DVector::zeros(2 * n);
        out.rows_mut(0, n).copy_from(&s);
        out.rows_mut(n, n).copy_from(&accel);
        out
    }

    /// One implicit midpoint step: solves U = U_prev + dt H(t_mid, (U+U_prev)/2).
    fn step(
        &self,
        u_prev: &DVector<f64>,
        t_prev: f64,
        dt: f64,
        tol: f64,
        max_iter: usize,
    ) -> Result<DVector<f64>> {
        let t_mid = t_prev + 0.5 * dt;
        let propose = |x: &DVector<f64>| -> DVector<f64> {
            let mid = (x + u_prev) * 0.5;
            u_prev + self.vector_field(t_mid, &mid) * dt
        };

        let mut x = u_prev.clone();
        let mut residual = f64::INFINITY;
        let mut iterations = 0usize;

        // Plain fixed point first; cheap when dt * Lipschitz is small. Bail
        // out on residual growth (stiff systems) and let Newton take over.
        let mut prev_residual = f64::INFINITY;
        while iterations < FIXED_POINT_BUDGET.min(max_iter) {
            let next = propose(&x);
            residual = (&next - &x).amax();
            iterations += 1;
            if residual > prev_residual {
                break;
            }
            x = next;
            if residual <= tol {
                return Ok(x);
            }
            prev_residual = residual;
        }
        if !residual.is_finite() || residual > 1.0 + u_prev.amax() {
            // The fixed-point iterate wandered off; restart Newton nearby.
            x = u_prev.clone();
        }

        // Newton on R(X) = X - propose(X) with a finite-difference Jacobian.
        let dim = x.len();
        while iterations < max_iter {
            let r = &x - propose(&x);
            residual = r.amax();
            if residual <= tol {
                return Ok(x);
            }
            let mut jac = DMatrix::zeros(dim, dim);
            for j in 0..dim {
                let h = 1e-7 * (1.0 + x[j].abs());
                let mut xp = x.clone();
                xp[j] += h;
                let rp = &xp - propose(&xp);
                jac.set_column(j, &((rp - &r) / h));
            }
            let delta = jac
                .lu()
                .solve(&r)
                .ok_or(Error::NonConvergence {
                    iterations,
                    residual,
                })?;
            x -= delta;
            iterations += 1;
        }
        let r = &x - propose(&x);
        residual = r.amax();
        if residual <= tol {
            Ok(x)
        } else {
            Err(Error::NonConvergence {
                iterations,
                residual,
            })
        }
    }
}

/// One implicit midpoint step with the absolute residual tolerance `tol`.
pub fn midpoint_step(
    system: &DynamicalSystem,
    alpha: &[f64],
    u_prev: &DVector<f64>,
    t_prev: f64,
    dt: f64,
    tol: f64,
    max_iter: usize,
) -> Result<DVector<f64>> {
    assert!(dt > 0.0, "dt must be positive");
    assert!(u_prev.iter().all(|v| v.is_finite()), "state must be finite");
    Stepper::new(system, alpha).step(u_prev, t_prev, dt, tol, max_iter)
}

/// Integrates `n_steps` midpoint steps from `u0` at t = 0. `tol` is the
/// relative base; each step solves to `tol * (1 + |U_prev|_inf)`.
pub fn integrate(
    system: &DynamicalSystem,
    alpha: &[f64],
    u0: &DVector<f64>,
    dt: f64,
    n_steps: usize,
    tol: f64,
    max_iter: usize,
) -> Result<StateTrajectory> {
    assert!(dt > 0.0);
    let stepper = Stepper::new(system, alpha);
    let dim = 2 * system.ndof;
    let mut states = DMatrix::zeros(n_steps + 1, dim);
    states.row_mut(0).copy_from(&u0.transpose());
    let mut current = u0.clone();
    let mut times = Vec::with_capacity(n_steps + 1);
    times.push(0.0);
    for k in 0..n_steps {
        let t_prev = k as f64 * dt;
        let step_tol = tol * (1.0 + current.amax());
        current = stepper
            .step(&current, t_prev, dt, step_tol, max_iter)
            .map_err(|e| Error::StepFailed {
                step: k + 1,
                source: Box::new(e),
            })?;
        states.row_mut(k + 1).copy_from(&current.transpose());
        times.push((k + 1) as f64 * dt);
    }
    Ok(StateTrajectory { times, states })
}

/// Reads a quantity of interest from a trajectory at step `k`.
pub fn qoi_value(
    traj: &StateTrajectory,
    spec: &QoISpec,
    k: usize,
    system: &DynamicalSystem,
) -> Result<f64> {
    assert!(k < traj.times.len(), "step index within trajectory");
    let n = system.ndof;
    let offset = match spec.kind {
        ResponseKind::Displacement => 0,
        ResponseKind::Velocity => n,
    };
    match spec.location {
        Location::Dof(dof) => {
            if dof >= n {
                return Err(Error::LocationResolution(format!(
                    "dof {dof} outside 0..{n}"
                )));
            }
            Ok(traj.states[(k, offset + dof)])
        }
        Location::Spatial(x) => {
            let shape = system.shape.as_ref().ok_or_else(|| {
                Error::LocationResolution(format!(
                    "system '{}' has no shape functions for spatial locations",
                    system.name
                ))
            })?;
            let part = traj
                .states
                .row(k)
                .columns(offset, n)
                .transpose()
                .into_owned();
            shape(&part, x)
        }
    }
}

/// The mass-spring-damper example: M = 5 kg, C = 5(1+e1) N/(m/s),
/// K = 11(1+e2) N/m, f(t) = 10 sin(3t) N. alpha = [e1, e2].
pub fn make_sdof_system() -> DynamicalSystem {
    DynamicalSystem::new(
        "sdof",
        1,
        ParamLayout::eps_only(2),
        Box::new(|_eps| DMatrix::from_element(1, 1, 5.0)),
        Box::new(|eps| DMatrix::from_element(1, 1, 5.0 * (1.0 + eps[0]))),
        Box::new(|u, eps| DVector::from_element(1, 11.0 * (1.0 + eps[1]) * u[0])),
        Box::new(|t, _theta| DVector::from_element(1, 10.0 * (3.0 * t).sin())),
    )
}

/// Bridge deck pressure history, N/m^2.
pub fn bridge_load(t: f64) -> f64 {
    assert!(t >= 0.0);
    -1.0e5 * ((0.02 * (20.0 - t).powi(2)).sin() - (0.02 * (20.0 + t).powi(2)).sin())
}

/// Rayleigh damping C = aM + bK with a, b fit so the damping ratio equals
/// `zeta` at both angular frequencies.
pub fn rayleigh_damping(
    m: &DMatrix<f64>,
    k_linearized: &DMatrix<f64>,
    zeta: f64,
    mode_pair: (f64, f64),
) -> Result<DMatrix<f64>> {
    let (w1, w2) = mode_pair;
    if !(w1 > 0.0 && w2 > 0.0) || (w1 - w2).abs() < 1e-12 * w1.abs().max(w2.abs()) {
        return Err(Error::DegenerateFrequencies {
            omega1: w1,
            omega2: w2,
        });
    }
    // zeta = (a / w + b w) / 2 at w1 and w2.
    let det = w2 / w1 - w1 / w2;
    let a = 2.0 * zeta * (w2 - w1) / det;
    let b = 2.0 * zeta * (1.0 / w1 - 1.0 / w2) / det;
    Ok(m * a + k_linearized * b)
}

// ---------------------------------------------------------------------------
// Geometrically nonlinear cantilever beam
// ---------------------------------------------------------------------------

/// Reference constants for the cantilever example.
pub mod beam_constants {
    pub const LENGTH: f64 = 3.0;
    pub const SIDE: f64 = 0.1;
    pub const AREA: f64 = SIDE * SIDE;
    pub const INERTIA: f64 = SIDE * SIDE * SIDE * SIDE / 12.0;
    pub const DENSITY_PER_LENGTH: f64 = 100.0;
    pub const DAMPING_PER_LENGTH: f64 = 40.0 * DENSITY_PER_LENGTH;
    pub const LOAD_PER_LENGTH: f64 = 5.0e4;
}

const GAUSS3: [(f64, f64); 3] = [
    (0.112701665379258311, 0.277777777777777778),
    (0.5, 0.444444444444444444),
    (0.887298334620741689, 0.277777777777777778),
];

const GAUSS4: [(f64, f64); 4] = [
    (0.069431844202973712, 0.173927422568726929),
    (0.330009478207571868, 0.326072577431273071),
    (0.669990521792428132, 0.326072577431273071),
    (0.930568155797026288, 0.173927422568726929),
];

/// Hermite basis on [0, 1] scaled to element length `le`:
/// returns (H, dH/dx, d2H/dx2) at parametric xi.
fn hermite(xi: f64, le: f64) -> ([f64; 4], [f64; 4], [f64; 4]) {
    let x2 = xi * xi;
    let x3 = x2 * xi;
    let h = [
        1.0 - 3.0 * x2 + 2.0 * x3,
        le * (xi - 2.0 * x2 + x3),
        3.0 * x2 - 2.0 * x3,
        le * (x3 - x2),
    ];
    let dh = [
        (-6.0 * xi + 6.0 * x2) / le,
        1.0 - 4.0 * xi + 3.0 * x2,
        (6.0 * xi - 6.0 * x2) / le,
        3.0 * x2 - 2.0 * xi,
    ];
    let d2h = [
        (-6.0 + 12.0 * xi) / (le * le),
        (-4.0 + 6.0 * xi) / le,
        (6.0 - 12.0 * xi) / (le * le),
        (6.0 * xi - 2.0) / le,
    ];
    (h, dh, d2h)
}

/// Per-node dofs (u, w, theta); node 0 clamped. Free dof layout: node j >= 1
/// occupies indices 3(j-1)..3(j-1)+2.
struct BeamMesh {
    n_elements: usize,
    le: f64,
}

impl BeamMesh {
    /// Free-dof indices of the element's 6 local dofs (u1,w1,t1,u2,w2,t2);
    /// None marks a clamped dof.
    fn element_dofs(&self, e: usize) -> [Option<usize>; 6] {
        let mut out = [None; 6];
        for (local, node) in [(0usize, e), (3usize, e + 1)] {
            if node >= 1 {
                let base = 3 * (node - 1);
                out[local] = Some(base);
                out[local + 1] = Some(base + 1);
                out[local + 2] = Some(base + 2);
            }
        }
        out
    }

    fn gather(&self, free: &DVector<f64>, e: usize) -> [f64; 6] {
        let mut local = [0.0; 6];
        for (l, dof) in self.element_dofs(e).iter().enumerate() {
            if let Some(idx) = dof {
                local[l] = free[*idx];
            }
        }
        local
    }
}

fn assemble_distributed_matrix(mesh: &BeamMesh, axial_coeff: f64, transverse_coeff: f64) -> DMatrix<f64> {
    let n_free = 3 * mesh.n_elements;
    let le = mesh.le;
    let mut global = DMatrix::zeros(n_free, n_free);
    for e in 0..mesh.n_elements {
        let mut local: DMatrix<f64> = DMatrix::zeros(6, 6);
        for (xi, wq) in GAUSS4 {
            let scale = wq * le;
            let nu = [1.0 - xi, xi];
            let (h, _, _) = hermite(xi, le);
            // Axial dofs: locals 0 and 3.
            for (a, &na) in [(0usize, &nu[0]), (3usize, &nu[1])] {
                for (b, &nb) in [(0usize, &nu[0]), (3usize, &nu[1])] {
                    local[(a, b)] += axial_coeff * na * nb * scale;
                }
            }
            // Transverse dofs: locals 1, 2, 4, 5.
            let tl = [1usize, 2, 4, 5];
            for (i, &a) in tl.iter().enumerate() {
                for (j, &b) in tl.iter().enumerate() {
                    local[(a, b)] += transverse_coeff * h[i] * h[j] * scale;
                }
            }
        }
        let dofs = mesh.element_dofs(e);
        for (a, da) in dofs.iter().enumerate() {
            let Some(ia) = da else { continue };
            for (b, db) in dofs.iter().enumerate() {
                let Some(ib) = db else { continue };
                global[(*ia, *ib)] += local[(a, b)];
            }
        }
    }
    global
}

/// Builds the geometrically nonlinear cantilever beam with the given
/// distributed load (N/m, applied in the negative transverse direction).
/// alpha = the K-L coefficients of the elastic-modulus field.
pub fn make_beam_system_with_load(n_elements: usize, field: KLField, q: f64) -> DynamicalSystem {
    use beam_constants::*;
    assert!(n_elements >= 2, "need at least two elements");
    let le = LENGTH / n_elements as f64;
    let mesh = BeamMesh { n_elements, le };
    let order = field.order;

    // Per-element modulus coefficients: E_e(eps) = E0 (1 + sum eps_i c[e][i]).
    let mode_coeff: Vec<Vec<f64>> = (0..n_elements)
        .map(|e| {
            let x_mid = (e as f64 + 0.5) * le;
            (1..=order)
                .map(|i| field.kappas[i - 1].sqrt() * field.eigenfunction(i, x_mid).unwrap())
                .collect()
        })
        .collect();
    let e0 = field.e0;
    let element_modulus = move |e: usize, eps: &[f64]| -> f64 {
        let fluct: f64 = eps.iter().zip(&mode_coeff[e]).map(|(a, c)| a * c).sum();
        e0 * (1.0 + fluct)
    };
    let element_modulus = Arc::new(element_modulus);

    let mass = assemble_distributed_matrix(&mesh, DENSITY_PER_LENGTH, DENSITY_PER_LENGTH);
    let damping = assemble_distributed_matrix(&mesh, DAMPING_PER_LENGTH, DAMPING_PER_LENGTH);

    // Consistent nodal load for the uniform transverse pressure.
    let n_free = 3 * n_elements;
    let mut load_vec = DVector::zeros(n_free);
    for e in 0..n_elements {
        let dofs = mesh.element_dofs(e);
        for (xi, wq) in GAUSS3 {
            let (h, _, _) = hermite(xi, le);
            let tl = [1usize, 2, 4, 5];
            for (i, &a) in tl.iter().enumerate() {
                if let Some(idx) = dofs[a] {
                    load_vec[idx] += -q * h[i] * wq * le;
                }
            }
        }
    }

    let mesh = Arc::new(mesh);
    let restoring_mesh = Arc::clone(&mesh);
    let energy_mesh = Arc::clone(&mesh);
    let shape_mesh = Arc::clone(&mesh);
    let energy_modulus = Arc::clone(&element_modulus);

    let restoring = move |free: &DVector<f64>, eps: &[f64]| -> DVector<f64> {
        let mesh = &restoring_mesh;
        let mut force = DVector::zeros(free.len());
        for e in 0..mesh.n_elements {
            let local = mesh.gather(free, e);
            let dofs = mesh.element_dofs(e);
            let ea = element_modulus(e, eps) * AREA;
            let ei = element_modulus(e, eps) * INERTIA;
            for (xi, wq) in GAUSS3 {
                let scale = wq * mesh.le;
                let dnu = [-1.0 / mesh.le, 1.0 / mesh.le];
                let (_, dh, d2h) = hermite(xi, mesh.le);
                let u_x = local[0] * dnu[0] + local[3] * dnu[1];
                let tl = [1usize, 2, 4, 5];
                let mut w_x = 0.0;
                let mut w_xx = 0.0;
                for (i, &a) in tl.iter().enumerate() {
                    w_x += local[a] * dh[i];
                    w_xx += local[a] * d2h[i];
                }
                let strain = u_x + 0.5 * w_x * w_x;
                let axial_force = ea * strain;
                let moment = ei * w_xx;
                for (a, dn) in [(0usize, dnu[0]), (3usize, dnu[1])] {
                    if let Some(idx) = dofs[a] {
                        force[idx] += axial_force * dn * scale;
                    }
                }
                for (i, &a) in tl.iter().enumerate() {
                    if let Some(idx) = dofs[a] {
                        force[idx] +=
                            (axial_force * w_x * dh[i] + moment * d2h[i]) * scale;
                    }
                }
            }
        }
        force
    };

    let strain_energy = move |free: &DVector<f64>, eps: &[f64]| -> f64 {
        let mesh = &energy_mesh;
        let mut energy = 0.0;
        for e in 0..mesh.n_elements {
            let local = mesh.gather(free, e);
            let ea = energy_modulus(e, eps) * AREA;
            let ei = energy_modulus(e, eps) * INERTIA;
            for (xi, wq) in GAUSS3 {
                let scale = wq * mesh.le;
                let dnu = [-1.0 / mesh.le, 1.0 / mesh.le];
                let (_, dh, d2h) = hermite(xi, mesh.le);
                let u_x = local[0] * dnu[0] + local[3] * dnu[1];
                let tl = [1usize, 2, 4, 5];
                let mut w_x = 0.0;
                let mut w_xx = 0.0;
                for (i, &a) in tl.iter().enumerate() {
                    w_x += local[a] * dh[i];
                    w_xx += local[a] * d2h[i];
                }
                let strain = u_x + 0.5 * w_x * w_x;
                energy += (0.5 * ea * strain * strain + 0.5 * ei * w_xx * w_xx) * scale;
            }
        }
        energy
    };

    // Transverse deflection (or velocity) interpolated by Hermite shapes.
    let shape = move |part: &DVector<f64>, x: f64| -> Result<f64> {
        let mesh = &shape_mesh;
        if !(0.0..=LENGTH + 1e-12).contains(&x) {
            return Err(Error::LocationResolution(format!(
                "x = {x} outside the beam [0, {LENGTH}]"
            )));
        }
        let e = ((x / mesh.le) as usize).min(mesh.n_elements - 1);
        let xi = (x - e as f64 * mesh.le) / mesh.le;
        let local = mesh.gather(part, e);
        let (h, _, _) = hermite(xi, mesh.le);
        let tl = [1usize, 2, 4, 5];
        Ok(tl
            .iter()
            .enumerate()
            .map(|(i, &a)| local[a] * h[i])
            .sum())
    };

    DynamicalSystem::new(
        format!("beam{n_elements}"),
        n_free,
        ParamLayout::eps_only(order),
        Box::new(move |_eps| mass.clone()),
        Box::new(move |_eps| damping.clone()),
        Box::new(restoring),
        Box::new(move |_t, _theta| load_vec.clone()),
    )
    .with_shape(Box::new(shape))
    .with_strain_energy(Box::new(strain_energy))
}

/// The reference cantilever beam under its uniform distributed load.
pub fn make_beam_system(n_elements: usize, field: KLField) -> DynamicalSystem {
    make_beam_system_with_load(n_elements, field, beam_constants::LOAD_PER_LENGTH)
}
