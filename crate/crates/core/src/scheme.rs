//! Implicit Euler time stepping for the Yosida-regularized coupled system.
//!
//! One step advances `(mu, phi, S)` by solving, in the Galerkin space,
//!
//! ```text
//! alpha (mu' - mu)/h + (phi' - phi)/h + A^{2 rho} mu' = P(phi)(S' - mu') + u_mu(t')
//! beta  (phi' - phi)/h + B^{2 sigma} phi' + f1_yosida(phi') + f2(phi) = mu' + u_phi(t')
//!       (S' - S)/h + C^{2 tau} S' = -P(phi)(S' - mu') + u_S(t')
//! ```
//!
//! with `P` and `f2` lagged at the previous time level and `f1_yosida`
//! implicit. The lagging keeps the per-step system linear plus a diagonal
//! monotone nonlinearity, which a damped Newton iteration on the stacked
//! coefficient vector solves to a prescribed residual tolerance. The pair
//! `(alpha, beta)` may sit anywhere in `[0,1]^2` including the degenerate
//! edges; the limit problems are solved by the same Newton framework, not
//! by small positive surrogates.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::potential::{Potential, PotentialKind, Proliferation, YosidaLevel};
use crate::spectral::{EigenBasis, Field, FractionalOperator, Grid};

/// Newton inner-solve parameters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NewtonParams {
    /// Residual tolerance on the stacked coefficient infinity norm.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonParams {
    fn default() -> Self {
        NewtonParams {
            tol: 1e-10,
            max_iter: 50,
        }
    }
}

/// A known forcing term added to the right-hand side of one equation.
#[derive(Debug, Clone)]
pub enum Forcing {
    Zero,
    /// `amplitude * cos(frequency * t) * e_mode` (mode is 1-based).
    SingleMode {
        mode: usize,
        amplitude: f64,
        frequency: f64,
    },
    /// Coefficient samples at given times; evaluation interpolates linearly
    /// and extrapolates by the boundary samples.
    Samples {
        times: Vec<f64>,
        coeffs: Vec<Vec<f64>>,
    },
}

impl Forcing {
    /// Coefficients of the forcing at time `t` in the given basis, or
    /// `None` when identically zero.
    pub fn eval(&self, t: f64, basis: &EigenBasis) -> Option<Vec<f64>> {
        match self {
            Forcing::Zero => None,
            Forcing::SingleMode {
                mode,
                amplitude,
                frequency,
            } => {
                let mut coeffs = vec![0.0; basis.n_modes()];
                if *mode >= 1 && *mode <= basis.n_modes() {
                    coeffs[mode - 1] = amplitude * (frequency * t).cos();
                }
                Some(coeffs)
            }
            Forcing::Samples { times, coeffs } => {
                if times.is_empty() {
                    return None;
                }
                let n = basis.n_modes();
                let resized = |v: &Vec<f64>| {
                    let mut out = v.clone();
                    out.resize(n, 0.0);
                    out
                };
                if t <= times[0] {
                    return Some(resized(&coeffs[0]));
                }
                if t >= *times.last().unwrap() {
                    return Some(resized(coeffs.last().unwrap()));
                }
                let idx = times.partition_point(|&s| s <= t);
                let (t0, t1) = (times[idx - 1], times[idx]);
                let w = (t - t0) / (t1 - t0);
                let (c0, c1) = (resized(&coeffs[idx - 1]), resized(&coeffs[idx]));
                Some(
                    c0.iter()
                        .zip(&c1)
                        .map(|(a, b)| a * (1.0 - w) + b * w)
                        .collect(),
                )
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Forcing::Zero)
    }
}

/// Full problem description: operators, relaxation pair, nonlinearities,
/// data, time grid, and solver knobs.
#[derive(Debug, Clone)]
pub struct ProblemConfig {
    pub op_a: FractionalOperator,
    pub op_b: FractionalOperator,
    pub op_c: FractionalOperator,
    pub alpha: f64,
    pub beta: f64,
    pub potential: Potential,
    pub yosida: YosidaLevel,
    pub proliferation: Proliferation,
    pub mu0: Field,
    pub phi0: Field,
    pub s0: Field,
    pub forcing_mu: Forcing,
    pub forcing_phi: Forcing,
    pub forcing_s: Forcing,
    pub t_end: f64,
    pub step: f64,
    pub newton: NewtonParams,
    /// When set, the Newton initial guess of every step is perturbed by a
    /// deterministic seeded noise; used by the uniqueness probes.
    pub newton_seed: Option<u64>,
}

impl ProblemConfig {
    /// Validate ranges, basis compatibility, and the data assumptions;
    /// returns preflight warnings (non-fatal structural observations).
    pub fn validate(&self) -> Result<Vec<String>> {
        if !(self.alpha >= 0.0 && self.alpha <= 1.0) {
            return Err(Error::config(format!(
                "alpha must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        if !(self.beta >= 0.0 && self.beta <= 1.0) {
            return Err(Error::config(format!(
                "beta must lie in [0, 1], got {}",
                self.beta
            )));
        }
        if !(self.step > 0.0) || !(self.t_end > 0.0) || self.t_end < self.step {
            return Err(Error::config(format!(
                "time grid must satisfy 0 < h <= T, got h = {}, T = {}",
                self.step, self.t_end
            )));
        }
        if !(self.newton.tol > 0.0) || self.newton.max_iter == 0 {
            return Err(Error::config("newton parameters must be positive"));
        }
        let dom_a = self.op_a.basis();
        if !dom_a.same_domain(self.op_b.basis()) || !dom_a.same_domain(self.op_c.basis()) {
            return Err(Error::config(
                "operators A, B, C must act on the same physical domain",
            ));
        }
        self.mu0
            .check_same_basis(&Field::zero(Arc::clone(self.op_a.basis())))?;
        self.phi0
            .check_same_basis(&Field::zero(Arc::clone(self.op_b.basis())))?;
        self.s0
            .check_same_basis(&Field::zero(Arc::clone(self.op_c.basis())))?;
        if !(self.mu0.is_finite() && self.phi0.is_finite() && self.s0.is_finite()) {
            return Err(Error::config("initial data must be finite"));
        }

        // Data assumption: F1(phi0) must have finite integral on the grid.
        let grid = self.op_b.basis().grid();
        let phi0_values = self.phi0.grid_values();
        let mut f1_integral = 0.0;
        for (v, w) in phi0_values.iter().zip(grid.weights()) {
            let f1 = self.potential.f1_value(*v);
            if !f1.is_finite() {
                return Err(Error::config(format!(
                    "initial phi leaves the effective domain of the convex part \
                     (F1({v}) is not finite); the data assumption requires \
                     F1(phi0) integrable"
                )));
            }
            f1_integral += f1 * w;
        }
        if !f1_integral.is_finite() {
            return Err(Error::config("F1(phi0) has no finite integral"));
        }

        let mut warnings = Vec::new();
        if self.alpha == 0.0 && self.beta == 0.0 && self.op_a.basis().lambda(0) == 0.0 {
            warnings.push(
                "(A7) violated: alpha = beta = 0 with lambda_1(A) = 0; \
                 the joint limit problem needs a positive first eigenvalue"
                    .to_string(),
            );
        }
        Ok(warnings)
    }

    /// Number of time steps, `floor(T/h)` with a guard against roundoff.
    pub fn n_steps(&self) -> usize {
        (self.t_end / self.step + 1e-9).floor() as usize
    }

    /// The initial state. The stored fields realize the case split of the
    /// initial conditions: for `alpha > 0, beta > 0` each field is pinned
    /// individually; for `alpha > 0, beta = 0` only `alpha mu + phi` (and
    /// `S`) are prescribed, which the pair `(mu0, phi0)` realizes; for
    /// `alpha = 0` the stored `phi` equals `phi0` regardless of `beta`.
    pub fn initial_state(&self) -> Result<State> {
        let xi = yosida_field(&self.potential, self.yosida, &self.phi0)?;
        Ok(State {
            time: 0.0,
            mu: self.mu0.clone(),
            phi: self.phi0.clone(),
            s_nutrient: self.s0.clone(),
            xi,
        })
    }
}

/// Evaluate `f1_yosida` pointwise at the synthesized field and analyze the
/// result back into the field's basis.
fn yosida_field(potential: &Potential, level: YosidaLevel, phi: &Field) -> Result<Field> {
    let values = phi.grid_values();
    let mut out = Vec::with_capacity(values.len());
    for v in &values {
        out.push(potential.yosida_f1(level, *v)?);
    }
    Ok(Field::from_grid_values(Arc::clone(phi.basis()), &out))
}

/// One time level of the trajectory. `xi` is the diagnostic selection
/// `f1_yosida(phi)` analyzed into the basis of `B`.
#[derive(Debug, Clone)]
pub struct State {
    pub time: f64,
    pub mu: Field,
    pub phi: Field,
    pub s_nutrient: Field,
    pub xi: Field,
}

impl State {
    pub fn is_finite(&self) -> bool {
        self.mu.is_finite()
            && self.phi.is_finite()
            && self.s_nutrient.is_finite()
            && self.xi.is_finite()
    }
}

/// States at the uniform grid `t_n = n h` together with the configuration
/// snapshot that produced them.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<State>,
    pub config: ProblemConfig,
    pub warnings: Vec<String>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn step(&self) -> f64 {
        self.config.step
    }
}

/// A simulation abort: the error of the failing step plus the partial
/// trajectory computed so far.
#[derive(Debug)]
pub struct SimulationFailure {
    pub error: Error,
    pub partial: Trajectory,
}

impl std::fmt::Display for SimulationFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "simulation aborted after {} states: {}",
            self.partial.len(),
            self.error
        )
    }
}

impl std::error::Error for SimulationFailure {}

/// The assembled stepper: shared collocation grid, synthesis/analysis
/// matrices for the three bases, cross-basis projections, and the diagonal
/// spectral multipliers of the doubled exponents.
pub struct Stepper {
    cfg: ProblemConfig,
    grid: Grid,
    s_a: DMatrix<f64>,
    s_b: DMatrix<f64>,
    s_c: DMatrix<f64>,
    a_a: DMatrix<f64>,
    a_b: DMatrix<f64>,
    a_c: DMatrix<f64>,
    t_ab: DMatrix<f64>,
    t_ba: DMatrix<f64>,
    d_a: DVector<f64>,
    d_b: DVector<f64>,
    d_c: DVector<f64>,
    n_a: usize,
    n_b: usize,
    n_c: usize,
}

fn synthesis_matrix(basis: &EigenBasis, grid: &Grid) -> DMatrix<f64> {
    DMatrix::from_fn(grid.len(), basis.n_modes(), |m, j| {
        basis.eval_mode(j, grid.point(m))
    })
}

fn analysis_matrix(basis: &EigenBasis, grid: &Grid) -> DMatrix<f64> {
    DMatrix::from_fn(basis.n_modes(), grid.len(), |j, m| {
        grid.weights()[m] * basis.eval_mode(j, grid.point(m))
    })
}

/// Scale the rows of `mat` by `diag` in place and return the product
/// `left * diag(diag) * mat` without forming the diagonal matrix.
fn weighted_product(left: &DMatrix<f64>, diag: &DVector<f64>, mat: &DMatrix<f64>) -> DMatrix<f64> {
    let mut scaled = mat.clone();
    for m in 0..scaled.nrows() {
        let f = diag[m];
        for c in 0..scaled.ncols() {
            scaled[(m, c)] *= f;
        }
    }
    left * scaled
}

impl Stepper {
    pub fn new(cfg: &ProblemConfig) -> Result<Stepper> {
        cfg.validate()?;
        let ba = Arc::clone(cfg.op_a.basis());
        let bb = Arc::clone(cfg.op_b.basis());
        let bc = Arc::clone(cfg.op_c.basis());
        // Shared grid fine enough for exact analysis on each basis and for
        // de-aliasing the nonlinear terms.
        let max_n = ba.n_modes().max(bb.n_modes()).max(bc.n_modes());
        let per_axis = (2 * max_n)
            .max(ba.grid_per_axis())
            .max(bb.grid_per_axis())
            .max(bc.grid_per_axis());
        let grid = Grid::midpoint(ba.lengths(), per_axis);

        let s_a = synthesis_matrix(&ba, &grid);
        let s_b = synthesis_matrix(&bb, &grid);
        let s_c = synthesis_matrix(&bc, &grid);
        let a_a = analysis_matrix(&ba, &grid);
        let a_b = analysis_matrix(&bb, &grid);
        let a_c = analysis_matrix(&bc, &grid);
        let t_ab = &a_a * &s_b;
        let t_ba = t_ab.transpose();

        let doubled = |op: &FractionalOperator| DVector::from_vec(op.doubled().multipliers());

        Ok(Stepper {
            cfg: cfg.clone(),
            d_a: doubled(&cfg.op_a),
            d_b: doubled(&cfg.op_b),
            d_c: doubled(&cfg.op_c),
            n_a: ba.n_modes(),
            n_b: bb.n_modes(),
            n_c: bc.n_modes(),
            grid,
            s_a,
            s_b,
            s_c,
            a_a,
            a_b,
            a_c,
            t_ab,
            t_ba,
        })
    }

    pub fn config(&self) -> &ProblemConfig {
        &self.cfg
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Project a field of the B basis into the A basis through the shared
    /// grid (used for the combination `alpha mu + phi` in reports).
    pub fn project_phi_to_a(&self, phi: &Field) -> Vec<f64> {
        let phi_vec = DVector::from_column_slice(phi.coeffs());
        (&self.t_ab * phi_vec).data.into()
    }

    /// Grid values of the three state fields on the shared grid.
    pub fn state_grid_values(&self, st: &State) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let mu = &self.s_a * DVector::from_column_slice(st.mu.coeffs());
        let phi = &self.s_b * DVector::from_column_slice(st.phi.coeffs());
        let s = &self.s_c * DVector::from_column_slice(st.s_nutrient.coeffs());
        (mu.data.into(), phi.data.into(), s.data.into())
    }

    fn split<'a>(&self, z: &'a DVector<f64>) -> (&'a [f64], &'a [f64], &'a [f64]) {
        let s = z.as_slice();
        (
            &s[0..self.n_a],
            &s[self.n_a..self.n_a + self.n_b],
            &s[self.n_a + self.n_b..],
        )
    }

    /// Residual of the three coupled equations at the stacked candidate
    /// `z = [mu', phi', S']`, given the previous state and lagged grid data.
    /// Returns the residual and the Yosida values at the candidate's phi.
    fn residual(
        &self,
        z: &DVector<f64>,
        prev: &State,
        lag: &LaggedData,
    ) -> Result<(DVector<f64>, DVector<f64>)> {
        let cfg = &self.cfg;
        let h = cfg.step;
        let (mu, phi, s) = self.split(z);
        let mu = DVector::from_column_slice(mu);
        let phi = DVector::from_column_slice(phi);
        let s = DVector::from_column_slice(s);

        let mu_grid = &self.s_a * &mu;
        let phi_grid = &self.s_b * &phi;
        let s_grid = &self.s_c * &s;

        let mut y_grid = DVector::zeros(self.grid.len());
        for m in 0..self.grid.len() {
            y_grid[m] = cfg.potential.yosida_f1(cfg.yosida, phi_grid[m])?;
        }

        let reaction = lag.p_grid.component_mul(&(&s_grid - &mu_grid));

        let mu_prev = DVector::from_column_slice(prev.mu.coeffs());
        let phi_prev = DVector::from_column_slice(prev.phi.coeffs());
        let s_prev = DVector::from_column_slice(prev.s_nutrient.coeffs());

        let mut r_mu = (&mu - &mu_prev) * (cfg.alpha / h);
        r_mu += &self.t_ab * ((&phi - &phi_prev) / h);
        r_mu += self.d_a.component_mul(&mu);
        r_mu -= &self.a_a * &reaction;
        r_mu -= &lag.u_mu;

        let mut r_phi = (&phi - &phi_prev) * (cfg.beta / h);
        r_phi += self.d_b.component_mul(&phi);
        r_phi += &self.a_b * &y_grid;
        r_phi += &lag.f2_coeffs;
        r_phi -= &self.t_ba * &mu;
        r_phi -= &lag.u_phi;

        let mut r_s = (&s - &s_prev) / h;
        r_s += self.d_c.component_mul(&s);
        r_s += &self.a_c * &reaction;
        r_s -= &lag.u_s;

        let mut r = DVector::zeros(self.n_a + self.n_b + self.n_c);
        r.rows_mut(0, self.n_a).copy_from(&r_mu);
        r.rows_mut(self.n_a, self.n_b).copy_from(&r_phi);
        r.rows_mut(self.n_a + self.n_b, self.n_c).copy_from(&r_s);
        Ok((r, y_grid))
    }

    /// Jacobian blocks that do not change across Newton iterations for a
    /// given step (everything except the Yosida block).
    fn jacobian_base(&self, p_grid: &DVector<f64>) -> DMatrix<f64> {
        let cfg = &self.cfg;
        let h = cfg.step;
        let n = self.n_a + self.n_b + self.n_c;
        let mut j = DMatrix::zeros(n, n);

        // mu row
        let mut aa = weighted_product(&self.a_a, p_grid, &self.s_a);
        for i in 0..self.n_a {
            aa[(i, i)] += cfg.alpha / h + self.d_a[i];
        }
        j.view_mut((0, 0), (self.n_a, self.n_a)).copy_from(&aa);
        j.view_mut((0, self.n_a), (self.n_a, self.n_b))
            .copy_from(&(&self.t_ab / h));
        let ac = weighted_product(&self.a_a, p_grid, &self.s_c);
        j.view_mut((0, self.n_a + self.n_b), (self.n_a, self.n_c))
            .copy_from(&(-ac));

        // phi row (Yosida block added per iteration)
        j.view_mut((self.n_a, 0), (self.n_b, self.n_a))
            .copy_from(&(-&self.t_ba));
        for i in 0..self.n_b {
            j[(self.n_a + i, self.n_a + i)] += cfg.beta / h + self.d_b[i];
        }

        // S row
        let ca = weighted_product(&self.a_c, p_grid, &self.s_a);
        j.view_mut((self.n_a + self.n_b, 0), (self.n_c, self.n_a))
            .copy_from(&(-ca));
        let mut cc = weighted_product(&self.a_c, p_grid, &self.s_c);
        for i in 0..self.n_c {
            cc[(i, i)] += 1.0 / h + self.d_c[i];
        }
        j.view_mut(
            (self.n_a + self.n_b, self.n_a + self.n_b),
            (self.n_c, self.n_c),
        )
        .copy_from(&cc);

        j
    }

    fn lagged_data(&self, prev: &State, t_next: f64) -> LaggedData {
        let cfg = &self.cfg;
        let phi_prev = DVector::from_column_slice(prev.phi.coeffs());
        let phi_prev_grid = &self.s_b * &phi_prev;
        let mut p_grid = DVector::zeros(self.grid.len());
        let mut f2_grid = DVector::zeros(self.grid.len());
        for m in 0..self.grid.len() {
            p_grid[m] = cfg.proliferation.eval(phi_prev_grid[m]);
            f2_grid[m] = cfg.potential.f2(phi_prev_grid[m]);
        }
        let f2_coeffs = &self.a_b * &f2_grid;
        let force = |f: &Forcing, basis: &EigenBasis| {
            f.eval(t_next, basis)
                .map(DVector::from_vec)
                .unwrap_or_else(|| DVector::zeros(basis.n_modes()))
        };
        LaggedData {
            p_grid,
            f2_coeffs,
            u_mu: force(&cfg.forcing_mu, cfg.op_a.basis()),
            u_phi: force(&cfg.forcing_phi, cfg.op_b.basis()),
            u_s: force(&cfg.forcing_s, cfg.op_c.basis()),
        }
    }

    /// Advance one implicit Euler step from `prev`. `step_index` is the
    /// index of the state being produced; it also feeds the deterministic
    /// Newton-guess perturbation when a seed is configured.
    pub fn advance(&self, prev: &State, step_index: usize) -> Result<State> {
        let cfg = &self.cfg;
        if !prev.is_finite() {
            return Err(Error::Numerical(
                "previous state contains non-finite values".into(),
            ));
        }
        let t_next = (step_index as f64) * cfg.step;
        let lag = self.lagged_data(prev, t_next);

        // Initial guess: previous state, optionally perturbed.
        let n = self.n_a + self.n_b + self.n_c;
        let mut z = DVector::zeros(n);
        z.rows_mut(0, self.n_a).copy_from_slice(prev.mu.coeffs());
        z.rows_mut(self.n_a, self.n_b)
            .copy_from_slice(prev.phi.coeffs());
        z.rows_mut(self.n_a + self.n_b, self.n_c)
            .copy_from_slice(prev.s_nutrient.coeffs());
        if let Some(seed) = cfg.newton_seed {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(
                seed.wrapping_add((step_index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)),
            );
            for i in 0..n {
                let noise: f64 = rng.random_range(-1.0..1.0);
                z[i] += 1e-3 * noise * (1.0 + z[i].abs());
            }
        }

        let j_base = self.jacobian_base(&lag.p_grid);

        let (mut r, mut y_grid) = self.residual(&z, prev, &lag)?;
        let mut r_norm = r.amax();
        let mut iterations = 0;
        while r_norm > cfg.newton.tol {
            if iterations >= cfg.newton.max_iter {
                return Err(Error::Step {
                    time: t_next,
                    residual: r_norm,
                    iterations,
                });
            }
            iterations += 1;

            // Yosida block: a_b * diag(f1_yosida'(phi_grid)) * s_b
            let phi_slice =
                DVector::from_column_slice(&z.as_slice()[self.n_a..self.n_a + self.n_b]);
            let phi_grid = &self.s_b * &phi_slice;
            let mut yprime = DVector::zeros(self.grid.len());
            for m in 0..self.grid.len() {
                yprime[m] = cfg
                    .potential
                    .yosida_f1_derivative(cfg.yosida, phi_grid[m])?;
            }
            let yos_block = weighted_product(&self.a_b, &yprime, &self.s_b);
            let mut j = j_base.clone();
            for bi in 0..self.n_b {
                for bj in 0..self.n_b {
                    j[(self.n_a + bi, self.n_a + bj)] += yos_block[(bi, bj)];
                }
            }

            let delta = j.lu().solve(&(-&r)).ok_or(Error::Step {
                time: t_next,
                residual: r_norm,
                iterations,
            })?;

            // Damped update: halve until the residual improves.
            let mut eta = 1.0;
            loop {
                let candidate = &z + &delta * eta;
                let (r_new, y_new) = self.residual(&candidate, prev, &lag)?;
                let r_new_norm = r_new.amax();
                if r_new_norm < r_norm || eta < 1e-8 {
                    z = candidate;
                    r = r_new;
                    r_norm = r_new_norm;
                    y_grid = y_new;
                    break;
                }
                eta *= 0.5;
            }
        }

        let (mu, phi, s) = self.split(&z);
        let xi_coeffs = &self.a_b * &y_grid;
        Ok(State {
            time: t_next,
            mu: Field::new(Arc::clone(cfg.op_a.basis()), mu.to_vec())?,
            phi: Field::new(Arc::clone(cfg.op_b.basis()), phi.to_vec())?,
            s_nutrient: Field::new(Arc::clone(cfg.op_c.basis()), s.to_vec())?,
            xi: Field::new(Arc::clone(cfg.op_b.basis()), xi_coeffs.data.into())?,
        })
    }
}

struct LaggedData {
    p_grid: DVector<f64>,
    f2_coeffs: DVector<f64>,
    u_mu: DVector<f64>,
    u_phi: DVector<f64>,
    u_s: DVector<f64>,
}

/// Advance a single step (convenience wrapper that assembles a stepper).
pub fn step(prev: &State, cfg: &ProblemConfig) -> Result<State> {
    let stepper = Stepper::new(cfg)?;
    let index = (prev.time / cfg.step + 1e-9).floor() as usize + 1;
    stepper.advance(prev, index)
}

/// Run the full trajectory on the uniform grid `t_n = n h`,
/// `n = 0 .. floor(T/h)`.
pub fn simulate(cfg: &ProblemConfig) -> std::result::Result<Trajectory, Box<SimulationFailure>> {
    let build = |e: Error| {
        Box::new(SimulationFailure {
            error: e,
            partial: Trajectory {
                states: Vec::new(),
                config: cfg.clone(),
                warnings: Vec::new(),
            },
        })
    };
    let warnings = cfg.validate().map_err(&build)?;
    let stepper = Stepper::new(cfg).map_err(&build)?;
    let n_steps = cfg.n_steps();
    let mut states = Vec::with_capacity(n_steps + 1);
    states.push(cfg.initial_state().map_err(&build)?);
    for n in 1..=n_steps {
        match stepper.advance(&states[n - 1], n) {
            Ok(state) => states.push(state),
            Err(error) => {
                return Err(Box::new(SimulationFailure {
                    error,
                    partial: Trajectory {
                        states,
                        config: cfg.clone(),
                        warnings,
                    },
                }))
            }
        }
    }
    Ok(Trajectory {
        states,
        config: cfg.clone(),
        warnings,
    })
}

/// Discrete surrogates of the eight solution-norm quantities of the
/// parameter-uniform a priori estimate, the right-hand-side template built
/// from the data, and the implied constant; plus conservation and residual
/// diagnostics for the trajectory.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EstimateReport {
    /// `|| d_t (alpha mu + phi) ||` in `L^2(V_A^{-rho})` via difference
    /// quotients and the spectral dual norm.
    pub dt_w_dual_l2: f64,
    /// `alpha^{1/2} || mu ||` in `L^inf(H)`.
    pub mu_linf_h_scaled: f64,
    /// `|| A^rho mu ||` in `L^2(H)`.
    pub a_rho_mu_l2: f64,
    /// `beta^{1/2} || d_t phi ||` in `L^2(H)`.
    pub dt_phi_l2_scaled: f64,
    /// `|| phi ||` in `L^inf(V_B^sigma)` (graph norm).
    pub phi_linf_graph: f64,
    /// `|| F_yosida(phi) ||` in `L^inf(L^1)` by grid quadrature.
    pub f_phi_linf_l1: f64,
    /// Nutrient triple: `H^1(V_C^{-tau})`, `L^inf(H)`, `L^2(V_C^tau)`.
    pub s_h1_dual: f64,
    pub s_linf_h: f64,
    pub s_l2_graph: f64,
    /// `|| P^{1/2}(phi) (S - mu) ||` in `L^2(H)`.
    pub reaction_l2: f64,
    /// Data template
    /// `alpha^{1/2}||mu0|| + ||B^sigma phi0|| + ||F(phi0)||_{L^1} + ||S0|| + 1`.
    pub rhs_template: f64,
    /// Ratio of the summed left-hand side to the template (the empirical
    /// stability constant of the run).
    pub implied_k1: f64,
    /// Grid mean of `alpha mu + phi + S` at t = 0 and its maximal drift.
    pub mean_initial: f64,
    pub mean_drift_max: f64,
    pub residuals: ResidualReport,
}

impl EstimateReport {
    /// Sum of all left-hand-side quantities (the nutrient intersection norm
    /// entered as the sum of its three parts).
    pub fn lhs_total(&self) -> f64 {
        self.dt_w_dual_l2
            + self.mu_linf_h_scaled
            + self.a_rho_mu_l2
            + self.dt_phi_l2_scaled
            + self.phi_linf_graph
            + self.f_phi_linf_l1
            + self.s_h1_dual
            + self.s_linf_h
            + self.s_l2_graph
            + self.reaction_l2
    }
}

/// A posteriori residual check of the discrete equations along a stored
/// trajectory.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ResidualReport {
    pub max_residual_mu: f64,
    pub max_residual_phi: f64,
    pub max_residual_s: f64,
    /// Max coefficient deviation of the stored selection `xi` from a
    /// recomputed `f1_yosida(phi)`.
    pub xi_consistency: f64,
    /// Max of `max(|phi| - 1, 0)` on the grid for the constrained
    /// potentials; zero for unconstrained ones by convention.
    pub constraint_violation: f64,
    /// Structural assumptions that legitimize the run, when satisfied.
    pub legitimizing: Vec<String>,
}

impl ResidualReport {
    pub fn max_residual(&self) -> f64 {
        self.max_residual_mu
            .max(self.max_residual_phi)
            .max(self.max_residual_s)
    }
}

fn dual_sq(coeffs: &[f64], multipliers: &[f64]) -> f64 {
    coeffs
        .iter()
        .zip(multipliers)
        .map(|(c, m)| c * c / (1.0 + m * m))
        .sum()
}

fn graph_sq(coeffs: &[f64], multipliers: &[f64]) -> f64 {
    coeffs
        .iter()
        .zip(multipliers)
        .map(|(c, m)| (1.0 + m * m) * c * c)
        .sum()
}

fn semi_sq(coeffs: &[f64], multipliers: &[f64]) -> f64 {
    coeffs
        .iter()
        .zip(multipliers)
        .map(|(c, m)| m * m * c * c)
        .sum()
}

fn h_sq(coeffs: &[f64]) -> f64 {
    coeffs.iter().map(|c| c * c).sum()
}

/// Compute the a-priori-estimate report for a complete trajectory.
/// Time integrals are right-endpoint Riemann sums over the steps; suprema
/// run over all stored states.
pub fn apriori_report(traj: &Trajectory) -> Result<EstimateReport> {
    let cfg = &traj.config;
    let stepper = Stepper::new(cfg)?;
    let h = cfg.step;
    let grid = stepper.grid();

    let mult_a = cfg.op_a.multipliers();
    let mult_b = cfg.op_b.multipliers();
    let mult_c = cfg.op_c.multipliers();

    // Combination w = alpha mu + phi expressed in A coefficients.
    let w_coeffs: Vec<Vec<f64>> = traj
        .states
        .iter()
        .map(|st| {
            let phi_in_a = stepper.project_phi_to_a(&st.phi);
            st.mu
                .coeffs()
                .iter()
                .zip(&phi_in_a)
                .map(|(m, p)| cfg.alpha * m + p)
                .collect()
        })
        .collect();

    let mut dt_w_dual_sq = 0.0;
    let mut a_rho_mu_sq = 0.0;
    let mut dt_phi_sq = 0.0;
    let mut s_dual_sq_sum = 0.0;
    let mut dt_s_dual_sq = 0.0;
    let mut s_graph_sq_sum = 0.0;
    let mut reaction_sq = 0.0;

    let mut mu_linf: f64 = 0.0;
    let mut phi_graph_linf: f64 = 0.0;
    let mut f_l1_linf: f64 = 0.0;
    let mut s_linf: f64 = 0.0;

    let mut mean_initial = 0.0;
    let mut mean_drift_max: f64 = 0.0;

    for (n, st) in traj.states.iter().enumerate() {
        mu_linf = mu_linf.max(st.mu.h_norm());
        phi_graph_linf = phi_graph_linf.max(graph_sq(st.phi.coeffs(), &mult_b).sqrt());
        s_linf = s_linf.max(st.s_nutrient.h_norm());

        let (mu_g, phi_g, s_g) = stepper.state_grid_values(st);

        let mut f_l1 = 0.0;
        for (v, w) in phi_g.iter().zip(grid.weights()) {
            f_l1 += cfg.potential.yosida_value(cfg.yosida, *v)?.abs() * w;
        }
        f_l1_linf = f_l1_linf.max(f_l1);

        // conservation diagnostic: grid mean of alpha mu + phi + S
        let mut mean = 0.0;
        for m in 0..grid.len() {
            mean += grid.weights()[m] * (cfg.alpha * mu_g[m] + phi_g[m] + s_g[m]);
        }
        mean /= grid.volume();
        if n == 0 {
            mean_initial = mean;
        } else {
            mean_drift_max = mean_drift_max.max((mean - mean_initial).abs());
        }

        if n == 0 {
            continue;
        }
        let prev = &traj.states[n - 1];

        let dq_w: Vec<f64> = w_coeffs[n]
            .iter()
            .zip(&w_coeffs[n - 1])
            .map(|(a, b)| (a - b) / h)
            .collect();
        dt_w_dual_sq += h * dual_sq(&dq_w, &mult_a);

        a_rho_mu_sq += h * semi_sq(st.mu.coeffs(), &mult_a);

        let dq_phi: Vec<f64> = st
            .phi
            .coeffs()
            .iter()
            .zip(prev.phi.coeffs())
            .map(|(a, b)| (a - b) / h)
            .collect();
        dt_phi_sq += h * h_sq(&dq_phi);

        s_dual_sq_sum += h * dual_sq(st.s_nutrient.coeffs(), &mult_c);
        let dq_s: Vec<f64> = st
            .s_nutrient
            .coeffs()
            .iter()
            .zip(prev.s_nutrient.coeffs())
            .map(|(a, b)| (a - b) / h)
            .collect();
        dt_s_dual_sq += h * dual_sq(&dq_s, &mult_c);
        s_graph_sq_sum += h * graph_sq(st.s_nutrient.coeffs(), &mult_c);

        // || P^{1/2}(phi)(S - mu) ||^2 on the shared grid
        let mut r = 0.0;
        for m in 0..grid.len() {
            let p = cfg.proliferation.eval(phi_g[m]);
            let d = s_g[m] - mu_g[m];
            r += grid.weights()[m] * p * d * d;
        }
        reaction_sq += h * r;
    }

    // Data template (uses the unregularized potential; the data assumption
    // guarantees it is finite).
    let phi0_grid = cfg.phi0.grid_values();
    let mut f0_l1 = 0.0;
    for (v, w) in phi0_grid.iter().zip(cfg.op_b.basis().grid().weights()) {
        f0_l1 += cfg.potential.value(*v).abs() * w;
    }
    let rhs_template = cfg.alpha.sqrt() * cfg.mu0.h_norm()
        + semi_sq(cfg.phi0.coeffs(), &mult_b).sqrt()
        + f0_l1
        + cfg.s0.h_norm()
        + 1.0;

    let residuals = residual_report(traj)?;

    let mut report = EstimateReport {
        dt_w_dual_l2: dt_w_dual_sq.sqrt(),
        mu_linf_h_scaled: cfg.alpha.sqrt() * mu_linf,
        a_rho_mu_l2: a_rho_mu_sq.sqrt(),
        dt_phi_l2_scaled: cfg.beta.sqrt() * dt_phi_sq.sqrt(),
        phi_linf_graph: phi_graph_linf,
        f_phi_linf_l1: f_l1_linf,
        s_h1_dual: (s_dual_sq_sum + dt_s_dual_sq).sqrt(),
        s_linf_h: s_linf,
        s_l2_graph: s_graph_sq_sum.sqrt(),
        reaction_l2: reaction_sq.sqrt(),
        rhs_template,
        implied_k1: 0.0,
        mean_initial,
        mean_drift_max,
        residuals,
    };
    report.implied_k1 = report.lhs_total() / report.rhs_template;
    Ok(report)
}

/// Recompute the per-step equation residuals of a stored trajectory and
/// collect the consistency and assumption diagnostics.
pub fn residual_report(traj: &Trajectory) -> Result<ResidualReport> {
    let cfg = &traj.config;
    let stepper = Stepper::new(cfg)?;

    let mut max_mu: f64 = 0.0;
    let mut max_phi: f64 = 0.0;
    let mut max_s: f64 = 0.0;
    let mut xi_consistency: f64 = 0.0;
    let mut constraint_violation: f64 = 0.0;

    for (n, st) in traj.states.iter().enumerate() {
        // selection consistency at every level, including t = 0
        let xi_re = yosida_field(&cfg.potential, cfg.yosida, &st.phi)?;
        let diff = xi_re.sub(&st.xi)?;
        xi_consistency = xi_consistency.max(
            diff.coeffs()
                .iter()
                .fold(0.0_f64, |acc, c| acc.max(c.abs())),
        );

        for v in st.phi.grid_values() {
            constraint_violation = constraint_violation.max(v.abs() - 1.0);
        }

        if n == 0 {
            continue;
        }
        let prev = &traj.states[n - 1];
        let lag = stepper.lagged_data(prev, st.time);

        let mut z = DVector::zeros(stepper.n_a + stepper.n_b + stepper.n_c);
        z.rows_mut(0, stepper.n_a).copy_from_slice(st.mu.coeffs());
        z.rows_mut(stepper.n_a, stepper.n_b)
            .copy_from_slice(st.phi.coeffs());
        z.rows_mut(stepper.n_a + stepper.n_b, stepper.n_c)
            .copy_from_slice(st.s_nutrient.coeffs());

        let (r, _) = stepper.residual(&z, prev, &lag)?;
        max_mu = max_mu.max(r.rows(0, stepper.n_a).amax());
        max_phi = max_phi.max(r.rows(stepper.n_a, stepper.n_b).amax());
        max_s = max_s.max(r.rows(stepper.n_a + stepper.n_b, stepper.n_c).amax());
    }

    if matches!(
        cfg.potential.kind(),
        PotentialKind::Logarithmic | PotentialKind::DoubleObstacle
    ) {
        constraint_violation = constraint_violation.max(0.0);
    } else {
        constraint_violation = 0.0;
    }

    let mut legitimizing = Vec::new();
    if cfg.op_a.basis().lambda(0) > 0.0 {
        legitimizing.push("(A5)(i)".to_string());
        legitimizing.push("(A7)".to_string());
    }
    if cfg.proliferation.is_positive_constant() {
        legitimizing.push("(A5)(ii)".to_string());
    }

    Ok(ResidualReport {
        max_residual_mu: max_mu,
        max_residual_phi: max_phi,
        max_residual_s: max_s,
        xi_consistency,
        constraint_violation,
        legitimizing,
    })
}
