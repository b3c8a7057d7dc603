//! Runtime invariant suites behind the `verify` subcommand.
//!
//! Four suites cover the load-bearing identities at desk scale: the
//! operator calculus (composition, resolvent round trip, the Green-type
//! formula, eigenmode norm duality), the Yosida chain over all singular
//! potentials and levels against a brute-force prox oracle, discrete mass
//! conservation of the coupled stepper, and per-mode linear exactness of
//! a full simulation against a dense 2x2 backward-Euler oracle. The
//! acceptance tests run these same suites and pin their runtime budgets.

use std::sync::Arc;

use crate::error::Result;
use crate::potential::{Potential, Proliferation, YosidaLevel};
use crate::scheme::{simulate, Forcing, NewtonParams, ProblemConfig};
use crate::spectral::{norms, BoundaryKind, EigenBasis, Field, FractionalOperator};

/// Outcome of one named check.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// Worst observed error (interpretation depends on the check).
    pub worst: f64,
    pub tolerance: f64,
}

impl CheckResult {
    fn new(name: &str, worst: f64, tolerance: f64) -> CheckResult {
        CheckResult {
            name: name.to_string(),
            passed: worst <= tolerance,
            worst,
            tolerance,
        }
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SuiteResult {
    pub suite: String,
    pub checks: Vec<CheckResult>,
    pub elapsed_seconds: f64,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn random_field(basis: &Arc<EigenBasis>, seed: u64) -> Field {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let coeffs = (0..basis.n_modes())
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    Field::new(Arc::clone(basis), coeffs).unwrap()
}

fn decayed_field(basis: &Arc<EigenBasis>, amplitude: f64, seed: u64) -> Field {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let coeffs = basis
        .eigenvalues()
        .iter()
        .map(|&l| amplitude * rng.random_range(-1.0..1.0) / (1.0 + l))
        .collect();
    Field::new(Arc::clone(basis), coeffs).unwrap()
}

/// Operator-calculus suite: composition of fractional powers, resolvent
/// forward round trip, the Green-type formula, and eigenmode norm/dual
/// duality — all at relative error 1e-10 on a 32-mode desk basis.
pub fn operator_calculus_suite() -> Result<SuiteResult> {
    let start = std::time::Instant::now();
    let tol = 1e-10;
    let mut checks = Vec::new();

    for (label, boundary) in [
        ("dirichlet", BoundaryKind::Dirichlet),
        ("neumann", BoundaryKind::Neumann),
    ] {
        let basis = EigenBasis::interval(boundary, 32, 1.0)?;

        // composition: A^{r1} A^{r2} = A^{r1+r2}
        let mut worst: f64 = 0.0;
        for (r1, r2) in [(0.3, 0.7), (0.5, 0.5), (0.25, 1.25)] {
            let op1 = FractionalOperator::new(Arc::clone(&basis), r1)?;
            let op2 = FractionalOperator::new(Arc::clone(&basis), r2)?;
            let op12 = FractionalOperator::new(Arc::clone(&basis), r1 + r2)?;
            let v = random_field(&basis, 1000 + (r1 * 100.0) as u64);
            let composed = op2.apply(&op1.apply(&v)?)?;
            let direct = op12.apply(&v)?;
            for (a, b) in composed.coeffs().iter().zip(direct.coeffs()) {
                worst = worst.max((a - b).abs() / b.abs().max(1.0));
            }
        }
        checks.push(CheckResult::new(
            &format!("composition[{label}]"),
            worst,
            tol,
        ));

        // resolvent: (eps I + A^r) applied to the resolvent output
        // recovers the input
        let mut worst: f64 = 0.0;
        for eps in [0.5, 1.0, 3.0] {
            let op = FractionalOperator::new(Arc::clone(&basis), 0.5)?;
            let v = random_field(&basis, 2000 + (eps * 10.0) as u64);
            let res = op.resolvent(eps, &v)?;
            let fwd = op.apply(&res)?.add(&res.scaled(eps))?;
            for (a, b) in fwd.coeffs().iter().zip(v.coeffs()) {
                worst = worst.max((a - b).abs() / b.abs().max(1.0));
            }
        }
        checks.push(CheckResult::new(&format!("resolvent[{label}]"), worst, tol));

        // Green-type formula
        let mut worst: f64 = 0.0;
        for (r1, r2) in [(0.4, 0.6), (0.9, 0.35)] {
            let op1 = FractionalOperator::new(Arc::clone(&basis), r1)?;
            let op2 = FractionalOperator::new(Arc::clone(&basis), r2)?;
            let op12 = FractionalOperator::new(Arc::clone(&basis), r1 + r2)?;
            let v = random_field(&basis, 3000 + (r1 * 100.0) as u64);
            let w = random_field(&basis, 4000 + (r2 * 100.0) as u64);
            let lhs = op12.apply(&v)?.inner(&w)?;
            let rhs = op1.apply(&v)?.inner(&op2.apply(&w)?)?;
            worst = worst.max((lhs - rhs).abs() / lhs.abs().max(1.0));
        }
        checks.push(CheckResult::new(&format!("green[{label}]"), worst, tol));

        // eigenmode duality: graph * dual = 1 on every eigenmode
        let op = FractionalOperator::new(Arc::clone(&basis), 0.75)?;
        let mut worst: f64 = 0.0;
        for j in 0..basis.n_modes() {
            let v = Field::eigenmode(Arc::clone(&basis), j);
            let n = norms(&v, &op)?;
            worst = worst.max((n.graph_norm * n.dual_norm - 1.0).abs());
        }
        checks.push(CheckResult::new(&format!("duality[{label}]"), worst, tol));
    }

    Ok(SuiteResult {
        suite: "operator_calculus".into(),
        checks,
        elapsed_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Brute-force prox oracle `min_y F1(y) + (y - s)^2 / (2 lambda)` by
/// ternary search on the effective domain; independent of the resolvent
/// and quadrature code paths.
fn prox_oracle(p: &Potential, lambda: f64, s: f64) -> (f64, f64) {
    let (dlo, dhi) = p.f1_domain();
    let mut lo = dlo.max(-(s.abs() + 2.0));
    let mut hi = dhi.min(s.abs() + 2.0);
    let obj = |y: f64| p.f1_value(y) + (y - s) * (y - s) / (2.0 * lambda);
    for _ in 0..120 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if obj(m1) <= obj(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let y = 0.5 * (lo + hi);
    (y, obj(y))
}

/// Yosida suite over the three double-well potentials, levels
/// `{1e-3, 1e-2, 1e-1}`, and 200 sample points: the regularization
/// inequality chain, monotone `1/lambda`-Lipschitz behavior of the
/// approximation, and prox values against the minimization oracle.
pub fn yosida_suite() -> Result<SuiteResult> {
    let start = std::time::Instant::now();
    let mut checks = Vec::new();

    let potentials = [
        ("regular", Potential::regular()),
        ("logarithmic", Potential::logarithmic(2.0)?),
        ("obstacle", Potential::double_obstacle(1.0)?),
    ];
    let lambdas = [1e-3, 1e-2, 1e-1];
    let n_samples = 200;
    let span = 2.5;

    for (label, p) in &potentials {
        let mut chain_slack: f64 = 0.0; // most negative slack, sign-flipped
        let mut mono_defect: f64 = 0.0;
        let mut lip_excess: f64 = 0.0;
        let mut prox_value_err: f64 = 0.0;

        for &lambda in &lambdas {
            let lv = YosidaLevel::new(lambda, 1.0)?;
            let mut prev: Option<(f64, f64)> = None;
            for i in 0..n_samples {
                let s = -span + 2.0 * span * i as f64 / (n_samples - 1) as f64;
                let j = p.resolvent(lv, s)?;
                let f1j = p.f1_value(j);
                let f1l = p.yosida_f1_primitive(lv, s)?;
                let f1s = p.f1_value(s);
                let yos = p.yosida_f1(lv, s)?;

                // chain 0 <= F1(J) <= F1_yosida <= F1
                chain_slack = chain_slack.max(-f1j).max(f1j - f1l);
                if f1s.is_finite() {
                    chain_slack = chain_slack.max(f1l - f1s);
                }

                if let Some((s_prev, y_prev)) = prev {
                    mono_defect = mono_defect.max(y_prev - yos);
                    lip_excess = lip_excess.max((yos - y_prev).abs() - (s - s_prev) / lambda);
                }
                prev = Some((s, yos));

                let (_, f_star) = prox_oracle(p, lambda, s);
                prox_value_err = prox_value_err.max((f1l - f_star).abs());
            }
        }

        checks.push(CheckResult::new(
            &format!("chain[{label}]"),
            chain_slack,
            1e-9,
        ));
        checks.push(CheckResult::new(
            &format!("monotone[{label}]"),
            mono_defect,
            1e-12,
        ));
        checks.push(CheckResult::new(
            &format!("lipschitz[{label}]"),
            lip_excess,
            1e-9,
        ));
        checks.push(CheckResult::new(
            &format!("prox_oracle[{label}]"),
            prox_value_err,
            1e-8,
        ));
    }

    Ok(SuiteResult {
        suite: "yosida".into(),
        checks,
        elapsed_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Desk-scale conservation configuration: Neumann A and C, regular
/// potential, relaxation pair (1/2, 1/2), nonzero smooth data.
pub fn conservation_config(n_modes: usize, t_end: f64, step: f64) -> Result<ProblemConfig> {
    let ba = EigenBasis::interval(BoundaryKind::Neumann, n_modes, 1.0)?;
    let bb = EigenBasis::interval(BoundaryKind::Neumann, n_modes, 1.0)?;
    let bc = EigenBasis::interval(BoundaryKind::Neumann, n_modes, 1.0)?;
    Ok(ProblemConfig {
        op_a: FractionalOperator::new(Arc::clone(&ba), 0.5)?,
        op_b: FractionalOperator::new(Arc::clone(&bb), 0.5)?,
        op_c: FractionalOperator::new(Arc::clone(&bc), 0.5)?,
        alpha: 0.5,
        beta: 0.5,
        potential: Potential::regular(),
        yosida: YosidaLevel::new(1e-2, 1.0)?,
        proliferation: Proliferation::constant(0.5)?,
        mu0: decayed_field(&ba, 0.3, 101),
        phi0: decayed_field(&bb, 0.6, 102),
        s0: decayed_field(&bc, 0.4, 103),
        forcing_mu: Forcing::Zero,
        forcing_phi: Forcing::Zero,
        forcing_s: Forcing::Zero,
        t_end,
        step,
        newton: NewtonParams::default(),
        newton_seed: None,
    })
}

/// Conservation suite: the grid mean of `alpha mu + phi + S` drifts by at
/// most `n_steps * tol` across the whole run.
pub fn conservation_suite() -> Result<SuiteResult> {
    let start = std::time::Instant::now();
    let cfg = conservation_config(32, 0.25, 1e-3)?;
    let traj = simulate(&cfg).map_err(|f| f.error)?;
    let report = crate::scheme::apriori_report(&traj)?;
    let budget = (cfg.n_steps() as f64) * cfg.newton.tol;
    let checks = vec![CheckResult::new(
        "mean_drift",
        report.mean_drift_max,
        budget,
    )];
    Ok(SuiteResult {
        suite: "conservation".into(),
        checks,
        elapsed_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Linear-exactness configuration: quadratic test potential, zero
/// proliferation, A and B sharing one Neumann basis.
pub fn linear_oracle_config(n_modes: usize, t_end: f64, step: f64) -> Result<ProblemConfig> {
    let ba = EigenBasis::interval(BoundaryKind::Neumann, n_modes, 1.0)?;
    let bc = EigenBasis::interval(BoundaryKind::Dirichlet, n_modes, 1.0)?;
    Ok(ProblemConfig {
        op_a: FractionalOperator::new(Arc::clone(&ba), 0.5)?,
        op_b: FractionalOperator::new(Arc::clone(&ba), 0.5)?,
        op_c: FractionalOperator::new(Arc::clone(&bc), 0.5)?,
        alpha: 0.5,
        beta: 0.5,
        potential: Potential::quadratic_test(),
        yosida: YosidaLevel::new(1e-2, 1.0)?,
        proliferation: Proliferation::constant(0.0)?,
        mu0: decayed_field(&ba, 1.0, 201),
        phi0: decayed_field(&ba, 1.0, 202),
        s0: decayed_field(&bc, 1.0, 203),
        forcing_mu: Forcing::Zero,
        forcing_phi: Forcing::Zero,
        forcing_s: Forcing::Zero,
        t_end,
        step,
        newton: NewtonParams::default(),
        newton_seed: None,
    })
}

/// Per-mode 2x2 backward-Euler oracle for the linear regime. With the
/// quadratic test potential the phi equation carries the factor
/// `1/(1 + lambda_yosida)` from the Yosida approximation of `f1(s) = s`.
#[allow(clippy::too_many_arguments)]
pub fn linear_oracle_step(
    lam_a2: f64,
    lam_b2: f64,
    lam_c2: f64,
    alpha: f64,
    beta: f64,
    h: f64,
    lambda_yosida: f64,
    state: (f64, f64, f64),
) -> (f64, f64, f64) {
    let (mu, phi, s) = state;
    let a11 = alpha / h + lam_a2;
    let a12 = 1.0 / h;
    let a21 = -1.0;
    let a22 = beta / h + lam_b2 + 1.0 / (1.0 + lambda_yosida);
    let b1 = alpha / h * mu + phi / h;
    let b2 = beta / h * phi;
    let det = a11 * a22 - a12 * a21;
    (
        (b1 * a22 - a12 * b2) / det,
        (a11 * b2 - b1 * a21) / det,
        s / (1.0 + h * lam_c2),
    )
}

/// Linear-regime suite: every step of a 250-step run matches the per-mode
/// oracle to 1e-10 relative.
pub fn linear_oracle_suite() -> Result<SuiteResult> {
    let start = std::time::Instant::now();
    let n = 32;
    let cfg = linear_oracle_config(n, 0.25, 1e-3)?;
    let traj = simulate(&cfg).map_err(|f| f.error)?;

    let mut mu: Vec<f64> = cfg.mu0.coeffs().to_vec();
    let mut phi: Vec<f64> = cfg.phi0.coeffs().to_vec();
    let mut s: Vec<f64> = cfg.s0.coeffs().to_vec();
    let mut worst: f64 = 0.0;
    for (k, st) in traj.states.iter().enumerate() {
        if k > 0 {
            for j in 0..n {
                let (m2, p2, s2) = linear_oracle_step(
                    cfg.op_a.basis().lambda(j).powf(2.0 * cfg.op_a.exponent()),
                    cfg.op_b.basis().lambda(j).powf(2.0 * cfg.op_b.exponent()),
                    cfg.op_c.basis().lambda(j).powf(2.0 * cfg.op_c.exponent()),
                    cfg.alpha,
                    cfg.beta,
                    cfg.step,
                    cfg.yosida.lambda,
                    (mu[j], phi[j], s[j]),
                );
                mu[j] = m2;
                phi[j] = p2;
                s[j] = s2;
            }
        }
        for j in 0..n {
            worst = worst.max((st.mu.coeffs()[j] - mu[j]).abs() / mu[j].abs().max(1.0));
            worst = worst.max((st.phi.coeffs()[j] - phi[j]).abs() / phi[j].abs().max(1.0));
            worst = worst.max((st.s_nutrient.coeffs()[j] - s[j]).abs() / s[j].abs().max(1.0));
        }
    }

    Ok(SuiteResult {
        suite: "linear_oracle".into(),
        checks: vec![CheckResult::new("per_mode_2x2", worst, 1e-10)],
        elapsed_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Run all four suites.
pub fn run_all() -> Result<Vec<SuiteResult>> {
    Ok(vec![
        operator_calculus_suite()?,
        yosida_suite()?,
        conservation_suite()?,
        linear_oracle_suite()?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_suites_pass() {
        for suite in run_all().unwrap() {
            for check in &suite.checks {
                assert!(
                    check.passed,
                    "{}::{} failed: {} > {}",
                    suite.suite, check.name, check.worst, check.tolerance
                );
            }
        }
    }
}
