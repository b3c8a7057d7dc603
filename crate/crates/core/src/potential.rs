//! Double-well potentials, their convex/smooth splittings, the
//! proliferation function, and the Moreau--Yosida apparatus.
//!
//! Every potential is split as `F = F1 + F2` with `F1` convex, lower
//! semicontinuous, nonnegative and `F1(0) = 0`, and `F2` a `C^1`
//! perturbation whose derivative `f2` is globally Lipschitz. The supported
//! splittings are
//!
//! - regular: `F1(s) = s^4/4 + s^2/2`, `F2(s) = -s^2 + 1/4`
//! - logarithmic: `F1(s) = (1+s)ln(1+s) + (1-s)ln(1-s)` on `[-1,1]`,
//!   `F2(s) = -c1 s^2` with `c1 > 1`
//! - double obstacle: `F1 = indicator of [-1,1]`, `F2(s) = c2 (1 - s^2)`
//!   with `c2 > 0`
//! - quadratic test: `F1(s) = s^2/2`, `F2 = 0` (linear-regime oracles)
//!
//! The Yosida machinery consists of the resolvent `J(s)` solving
//! `y + lambda f1(y) = s`, the approximation `f1_yosida(s) = (s - J(s)) / lambda`,
//! and the regularized primitive `F1_yosida(s) = int_0^s f1_yosida`.

use crate::error::{Error, Result};

const ROOT_TOL: f64 = 1e-14;
const ROOT_MAX_ITER: usize = 100;
const QUAD_TOL: f64 = 1e-10;

/// Which of the four supported potentials is in use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKind {
    Regular,
    Logarithmic,
    DoubleObstacle,
    QuadraticTest,
}

/// A split potential `F = F1 + F2` together with the metadata the
/// asymptotic checks need (Lipschitz constant of `f2`, strong-monotonicity
/// constant of `f1`, growth constants).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Potential {
    kind: PotentialKind,
    c1: f64,
    c2: f64,
}

/// Pointwise evaluation bundle: `F1` may be `+inf` outside its effective
/// domain, and the minimal section of the subdifferential is `None`
/// outside the domain of `f1`.
#[derive(Debug, Clone, Copy)]
pub struct PotentialEval {
    pub f1_value: f64,
    pub f2_value: f64,
    pub f1_minimal_section: Option<f64>,
    pub f2_slope: f64,
}

/// Yosida regularization level `lambda`, valid below the cap `Lambda`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct YosidaLevel {
    pub lambda: f64,
    pub cap: f64,
}

impl YosidaLevel {
    pub fn new(lambda: f64, cap: f64) -> Result<YosidaLevel> {
        if !(lambda > 0.0 && lambda < cap) {
            return Err(Error::config(format!(
                "yosida level must satisfy 0 < lambda < cap, got lambda = {lambda}, cap = {cap}"
            )));
        }
        Ok(YosidaLevel { lambda, cap })
    }

    pub fn halved(&self) -> YosidaLevel {
        YosidaLevel {
            lambda: self.lambda / 2.0,
            cap: self.cap,
        }
    }
}

impl Potential {
    pub fn regular() -> Potential {
        Potential {
            kind: PotentialKind::Regular,
            c1: 0.0,
            c2: 0.0,
        }
    }

    /// Logarithmic double-well; requires `c1 > 1` for nonconvexity.
    pub fn logarithmic(c1: f64) -> Result<Potential> {
        if !(c1 > 1.0) {
            return Err(Error::config(format!(
                "logarithmic potential requires c1 > 1, got c1 = {c1}"
            )));
        }
        Ok(Potential {
            kind: PotentialKind::Logarithmic,
            c1,
            c2: 0.0,
        })
    }

    /// Double obstacle; requires `c2 > 0` for nonconvexity.
    pub fn double_obstacle(c2: f64) -> Result<Potential> {
        if !(c2 > 0.0) {
            return Err(Error::config(format!(
                "double obstacle potential requires c2 > 0, got c2 = {c2}"
            )));
        }
        Ok(Potential {
            kind: PotentialKind::DoubleObstacle,
            c2,
            c1: 0.0,
        })
    }

    pub fn quadratic_test() -> Potential {
        Potential {
            kind: PotentialKind::QuadraticTest,
            c1: 0.0,
            c2: 0.0,
        }
    }

    pub fn kind(&self) -> PotentialKind {
        self.kind
    }

    pub fn c1(&self) -> f64 {
        self.c1
    }

    pub fn c2(&self) -> f64 {
        self.c2
    }

    /// Convex part `F1(s)`; `+inf` outside the effective domain.
    pub fn f1_value(&self, s: f64) -> f64 {
        match self.kind {
            PotentialKind::Regular => 0.25 * s.powi(4) + 0.5 * s * s,
            PotentialKind::Logarithmic => {
                if s.abs() < 1.0 {
                    (1.0 + s) * (1.0 + s).ln() + (1.0 - s) * (1.0 - s).ln()
                } else if s.abs() == 1.0 {
                    2.0 * 2.0_f64.ln()
                } else {
                    f64::INFINITY
                }
            }
            PotentialKind::DoubleObstacle => {
                if s.abs() <= 1.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            PotentialKind::QuadraticTest => 0.5 * s * s,
        }
    }

    /// Smooth perturbation `F2(s)`.
    pub fn f2_value(&self, s: f64) -> f64 {
        match self.kind {
            PotentialKind::Regular => -s * s + 0.25,
            PotentialKind::Logarithmic => -self.c1 * s * s,
            PotentialKind::DoubleObstacle => self.c2 * (1.0 - s * s),
            PotentialKind::QuadraticTest => 0.0,
        }
    }

    /// Full potential `F(s) = F1(s) + F2(s)`.
    pub fn value(&self, s: f64) -> f64 {
        self.f1_value(s) + self.f2_value(s)
    }

    /// Derivative `f2 = F2'` of the perturbation.
    pub fn f2(&self, s: f64) -> f64 {
        match self.kind {
            PotentialKind::Regular => -2.0 * s,
            PotentialKind::Logarithmic => -2.0 * self.c1 * s,
            PotentialKind::DoubleObstacle => -2.0 * self.c2 * s,
            PotentialKind::QuadraticTest => 0.0,
        }
    }

    /// Element of minimal modulus of the subdifferential `f1(s)`, or `None`
    /// outside `D(f1)`. At the obstacle boundary `s = +/-1` the normal cone
    /// is `[0, inf)` or `(-inf, 0]`, so the minimal section is `0`.
    pub fn f1_minimal_section(&self, s: f64) -> Option<f64> {
        match self.kind {
            PotentialKind::Regular => Some(s.powi(3) + s),
            PotentialKind::Logarithmic => {
                if s.abs() < 1.0 {
                    Some(((1.0 + s) / (1.0 - s)).ln())
                } else {
                    None
                }
            }
            PotentialKind::DoubleObstacle => {
                if s.abs() <= 1.0 {
                    Some(0.0)
                } else {
                    None
                }
            }
            PotentialKind::QuadraticTest => Some(s),
        }
    }

    /// Pointwise evaluation of the split (the `eval` operation).
    pub fn eval(&self, s: f64) -> PotentialEval {
        PotentialEval {
            f1_value: self.f1_value(s),
            f2_value: self.f2_value(s),
            f1_minimal_section: self.f1_minimal_section(s),
            f2_slope: self.f2(s),
        }
    }

    /// Lipschitz constant `L` of `f2`.
    pub fn lipschitz_f2(&self) -> f64 {
        match self.kind {
            PotentialKind::Regular => 2.0,
            PotentialKind::Logarithmic => 2.0 * self.c1,
            PotentialKind::DoubleObstacle => 2.0 * self.c2,
            PotentialKind::QuadraticTest => 0.0,
        }
    }

    /// Strong-monotonicity constant `gamma` of `f1`
    /// (`(f1(s) - f1(s'))(s - s') >= gamma |s - s'|^2`), or `0` when not
    /// available. The regular splitting has `f1'(s) = 3 s^2 + 1 >= 1`.
    pub fn monotonicity_gamma(&self) -> f64 {
        match self.kind {
            PotentialKind::Regular => 1.0,
            PotentialKind::Logarithmic => 2.0,
            PotentialKind::DoubleObstacle => 0.0,
            PotentialKind::QuadraticTest => 1.0,
        }
    }

    /// Cubic-growth constant: `|f1(s)| <= c5 (|s|^3 + 1)` when `F1` is `C^1`
    /// on all of `R`; `None` for the singular potentials.
    pub fn cubic_growth_c5(&self) -> Option<f64> {
        match self.kind {
            PotentialKind::Regular => Some(2.0),
            PotentialKind::QuadraticTest => Some(1.0),
            _ => None,
        }
    }

    /// Constants `(c3, c4)` with `|s'| <= c3 F1(s) + c4` for `s' in f1(s)`,
    /// available only when `D(F1) = R`; excludes the logarithmic and double
    /// obstacle potentials.
    pub fn linear_growth_constants(&self) -> Option<(f64, f64)> {
        match self.kind {
            // |s^3 + s| <= 4 (s^4/4 + s^2/2) + 2
            PotentialKind::Regular => Some((4.0, 2.0)),
            // |s| <= 2 (s^2/2) + 1/2
            PotentialKind::QuadraticTest => Some((2.0, 0.5)),
            _ => None,
        }
    }

    /// Whether `F1` is differentiable on all of `R` (the premise of the
    /// smooth-potential assumptions).
    pub fn is_c1_on_r(&self) -> bool {
        matches!(
            self.kind,
            PotentialKind::Regular | PotentialKind::QuadraticTest
        )
    }

    /// Endpoints of the effective domain of `F1`.
    pub fn f1_domain(&self) -> (f64, f64) {
        match self.kind {
            PotentialKind::Regular | PotentialKind::QuadraticTest => {
                (f64::NEG_INFINITY, f64::INFINITY)
            }
            PotentialKind::Logarithmic | PotentialKind::DoubleObstacle => (-1.0, 1.0),
        }
    }

    /// Fit constants `(c1bar, c2bar)` with `F(s) >= c1bar s^2 - c2bar` on a
    /// sample of the effective domain intersected with `[-span, span]`.
    /// `c1bar` is fixed to half the coercive quadratic coefficient where
    /// known; `c2bar` is the sampled worst defect.
    pub fn quadratic_lower_fit(&self, span: f64) -> (f64, f64) {
        let c1bar = match self.kind {
            PotentialKind::Regular => 0.5,
            // On [-1,1] any positive c1bar works with a suitable offset.
            PotentialKind::Logarithmic | PotentialKind::DoubleObstacle => 1.0,
            PotentialKind::QuadraticTest => 0.25,
        };
        let (lo, hi) = self.f1_domain();
        let lo = lo.max(-span);
        let hi = hi.min(span);
        let n = 2001;
        let mut c2bar: f64 = 0.0;
        for i in 0..n {
            let s = lo + (hi - lo) * i as f64 / (n - 1) as f64;
            let f = self.value(s);
            if f.is_finite() {
                c2bar = c2bar.max(c1bar * s * s - f);
            }
        }
        (c1bar, c2bar)
    }

    /// Resolvent `J(s) = (id + lambda f1)^{-1}(s)`: the unique `y` with
    /// `y + lambda f1(y) contains s`.
    ///
    /// Obstacle: projection onto `[-1,1]`. Quadratic: `s / (1 + lambda)`.
    /// Regular and logarithmic: safeguarded Newton on the monotone scalar
    /// equation, bisection fallback, 100-iteration cap.
    pub fn resolvent(&self, level: YosidaLevel, s: f64) -> Result<f64> {
        let lambda = level.lambda;
        match self.kind {
            PotentialKind::DoubleObstacle => Ok(s.clamp(-1.0, 1.0)),
            PotentialKind::QuadraticTest => Ok(s / (1.0 + lambda)),
            PotentialKind::Regular => {
                // g(y) = y + lambda (y^3 + y) - s, bracket [min(0,s), max(0,s)]
                let g = |y: f64| y + lambda * (y.powi(3) + y) - s;
                let dg = |y: f64| 1.0 + lambda * (3.0 * y * y + 1.0);
                solve_monotone(g, dg, s.min(0.0), s.max(0.0), s)
            }
            PotentialKind::Logarithmic => {
                // g(y) = y + lambda ln((1+y)/(1-y)) - s on (-1, 1)
                let g = |y: f64| y + lambda * ((1.0 + y) / (1.0 - y)).ln() - s;
                let dg = |y: f64| 1.0 + 2.0 * lambda / (1.0 - y * y);
                let eps = 1e-15;
                solve_monotone(g, dg, -1.0 + eps, 1.0 - eps, s)
            }
        }
    }

    /// Yosida approximation `f1_yosida(s) = (s - J(s)) / lambda`.
    pub fn yosida_f1(&self, level: YosidaLevel, s: f64) -> Result<f64> {
        let j = self.resolvent(level, s)?;
        Ok((s - j) / level.lambda)
    }

    /// Generalized derivative of `f1_yosida`, used by the Newton stepper.
    /// For smooth `f1`: `f1'(J) / (1 + lambda f1'(J))`; for the obstacle,
    /// `0` inside `[-1,1]` and `1/lambda` outside.
    pub fn yosida_f1_derivative(&self, level: YosidaLevel, s: f64) -> Result<f64> {
        let lambda = level.lambda;
        match self.kind {
            PotentialKind::DoubleObstacle => Ok(if s.abs() <= 1.0 { 0.0 } else { 1.0 / lambda }),
            PotentialKind::QuadraticTest => Ok(1.0 / (1.0 + lambda)),
            PotentialKind::Regular => {
                let j = self.resolvent(level, s)?;
                let fp = 3.0 * j * j + 1.0;
                Ok(fp / (1.0 + lambda * fp))
            }
            PotentialKind::Logarithmic => {
                let j = self.resolvent(level, s)?;
                let fp = 2.0 / (1.0 - j * j);
                Ok(fp / (1.0 + lambda * fp))
            }
        }
    }

    /// Regularized primitive `F1_yosida(s) = int_0^s f1_yosida(s') ds'`.
    ///
    /// Closed forms: obstacle `dist(s, [-1,1])^2 / (2 lambda)`, quadratic
    /// `s^2 / (2 (1 + lambda))`; otherwise adaptive quadrature of the
    /// Yosida approximation.
    pub fn yosida_f1_primitive(&self, level: YosidaLevel, s: f64) -> Result<f64> {
        let lambda = level.lambda;
        match self.kind {
            PotentialKind::DoubleObstacle => {
                let d = (s.abs() - 1.0).max(0.0);
                Ok(d * d / (2.0 * lambda))
            }
            PotentialKind::QuadraticTest => Ok(s * s / (2.0 * (1.0 + lambda))),
            PotentialKind::Regular | PotentialKind::Logarithmic => {
                adaptive_simpson(&|x| self.yosida_f1(level, x), 0.0, s, QUAD_TOL)
            }
        }
    }

    /// Regularized full potential `F_yosida = F1_yosida + F2`.
    pub fn yosida_value(&self, level: YosidaLevel, s: f64) -> Result<f64> {
        Ok(self.yosida_f1_primitive(level, s)? + self.f2_value(s))
    }
}

/// Safeguarded Newton for a strictly increasing `g` with `g(lo) <= 0 <= g(hi)`;
/// falls back to bisection whenever the Newton step leaves the bracket.
fn solve_monotone(
    g: impl Fn(f64) -> f64,
    dg: impl Fn(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    s: f64,
) -> Result<f64> {
    let scale = s.abs().max(1.0);
    let mut y = 0.5 * (lo + hi);
    for _ in 0..ROOT_MAX_ITER {
        let gy = g(y);
        if gy.abs() <= ROOT_TOL * scale {
            return Ok(y);
        }
        if gy > 0.0 {
            hi = y;
        } else {
            lo = y;
        }
        let step = gy / dg(y);
        let newton = y - step;
        y = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (hi - lo).abs() <= f64::EPSILON * scale {
            return Ok(y);
        }
    }
    Err(Error::Numerical(format!(
        "resolvent root finder did not converge for s = {s}: bracket [{lo}, {hi}], residual {}",
        g(y)
    )))
}

/// Adaptive Simpson quadrature of a smooth integrand on `[0, s]`
/// (handles `s < 0` by orientation).
fn adaptive_simpson(f: &impl Fn(f64) -> Result<f64>, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a)?;
    let fb = f(b)?;
    let m = 0.5 * (a + b);
    let fm = f(m)?;
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_recurse(f, a, b, fa, fb, fm, whole, tol, 40)
}

#[allow(clippy::too_many_arguments)]
fn simpson_recurse(
    f: &impl Fn(f64) -> Result<f64>,
    a: f64,
    b: f64,
    fa: f64,
    fb: f64,
    fm: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm)?;
    let frm = f(rm)?;
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 {
        return Err(Error::Numerical(format!(
            "adaptive quadrature failed to converge on [{a}, {b}]"
        )));
    }
    if delta.abs() <= 15.0 * tol {
        Ok(left + right + delta / 15.0)
    } else {
        let l = simpson_recurse(f, a, m, fa, fm, flm, left, tol / 2.0, depth - 1)?;
        let r = simpson_recurse(f, m, b, fm, fb, frm, right, tol / 2.0, depth - 1)?;
        Ok(l + r)
    }
}

/// Proliferation function kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProliferationKind {
    Constant,
    SmoothBump,
}

/// Nonnegative, bounded, Lipschitz proliferation weight `P`.
///
/// `constant` realizes `P(s) = p0`; `smooth_bump` realizes
/// `P(s) = p0 exp(-(s/width)^2)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Proliferation {
    pub kind: ProliferationKind,
    pub p0: f64,
    pub width: f64,
}

impl Proliferation {
    pub fn constant(p0: f64) -> Result<Proliferation> {
        if !(p0 >= 0.0) || !p0.is_finite() {
            return Err(Error::config("proliferation p0 must be nonnegative"));
        }
        Ok(Proliferation {
            kind: ProliferationKind::Constant,
            p0,
            width: 1.0,
        })
    }

    pub fn smooth_bump(p0: f64, width: f64) -> Result<Proliferation> {
        if !(p0 >= 0.0) || !p0.is_finite() {
            return Err(Error::config("proliferation p0 must be nonnegative"));
        }
        if !(width > 0.0) {
            return Err(Error::config("proliferation width must be positive"));
        }
        Ok(Proliferation {
            kind: ProliferationKind::SmoothBump,
            p0,
            width,
        })
    }

    pub fn eval(&self, s: f64) -> f64 {
        match self.kind {
            ProliferationKind::Constant => self.p0,
            ProliferationKind::SmoothBump => self.p0 * (-(s / self.width).powi(2)).exp(),
        }
    }

    /// Upper bound of `P`.
    pub fn bound(&self) -> f64 {
        self.p0
    }

    /// Lipschitz constant of `P`.
    pub fn lipschitz(&self) -> f64 {
        match self.kind {
            ProliferationKind::Constant => 0.0,
            // max |d/ds exp(-(s/w)^2)| = sqrt(2/e) / w at s = w/sqrt(2)
            ProliferationKind::SmoothBump => {
                self.p0 * (2.0f64 / std::f64::consts::E).sqrt() / self.width
            }
        }
    }

    /// Infimum of `P`: positive only for the positive constant kind.
    pub fn lower_bound(&self) -> f64 {
        match self.kind {
            ProliferationKind::Constant => self.p0,
            ProliferationKind::SmoothBump => 0.0,
        }
    }

    pub fn is_positive_constant(&self) -> bool {
        self.kind == ProliferationKind::Constant && self.p0 > 0.0
    }

    pub fn is_zero(&self) -> bool {
        self.p0 == 0.0
    }
}
