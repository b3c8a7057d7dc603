//! Eigenbases, fractional operator calculus, and norms.
//!
//! Everything here is a finite `N`-mode Galerkin truncation of the spectral
//! framework: a self-adjoint operator is represented by its eigenvalues
//! `0 <= lambda_1 <= lambda_2 <= ...` and an orthonormal system of
//! eigenfunctions, a fractional power acts diagonally as
//! `A^r v = sum_j lambda_j^r (v, e_j) e_j`, and the resolvent inverts
//! `eps*I + A^r` mode by mode. The concrete bases are Laplacian
//! eigenfunctions on an interval or a rectangle with homogeneous Dirichlet
//! or Neumann boundary conditions, for which the spectra are closed-form
//! and every identity is exactly testable.

use std::sync::Arc;

use crate::error::{Error, Result};

/// Boundary condition selecting the eigenfamily.
///
/// Dirichlet gives `lambda_1 > 0`; Neumann gives `lambda_1 = 0` with a
/// constant first eigenfunction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    Dirichlet,
    Neumann,
}

/// A quadrature grid: `n` physical points with positive weights.
///
/// Points are stored interleaved, `dim` coordinates per point. Midpoint
/// grids are exact for products of the trigonometric eigenfunctions up to
/// the aliasing limit, which makes discrete analysis/synthesis an exact
/// inverse pair on the truncation.
#[derive(Debug, Clone)]
pub struct Grid {
    dim: usize,
    coords: Vec<f64>,
    weights: Vec<f64>,
}

impl Grid {
    /// Tensor midpoint grid with `m` points per axis on the box given by `lengths`.
    pub fn midpoint(lengths: &[f64], m: usize) -> Grid {
        let dim = lengths.len();
        assert!(dim == 1 || dim == 2, "only 1D/2D grids are supported");
        assert!(m >= 1);
        let axis_points: Vec<Vec<f64>> = lengths
            .iter()
            .map(|&len| (0..m).map(|i| (i as f64 + 0.5) * len / m as f64).collect())
            .collect();
        let axis_weight: Vec<f64> = lengths.iter().map(|&len| len / m as f64).collect();

        let mut coords = Vec::new();
        let mut weights = Vec::new();
        match dim {
            1 => {
                for &x in &axis_points[0] {
                    coords.push(x);
                    weights.push(axis_weight[0]);
                }
            }
            _ => {
                for &x in &axis_points[0] {
                    for &y in &axis_points[1] {
                        coords.push(x);
                        coords.push(y);
                        weights.push(axis_weight[0] * axis_weight[1]);
                    }
                }
            }
        }
        Grid {
            dim,
            coords,
            weights,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, m: usize) -> &[f64] {
        &self.coords[m * self.dim..(m + 1) * self.dim]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Quadrature of pointwise values: `sum_m w_m v_m`.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        values.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }

    /// L^2 norm of pointwise values under the quadrature weights.
    pub fn l2_norm(&self, values: &[f64]) -> f64 {
        values
            .iter()
            .zip(&self.weights)
            .map(|(v, w)| v * v * w)
            .sum::<f64>()
            .sqrt()
    }

    /// Measure of the domain, `sum_m w_m`.
    pub fn volume(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// An orthonormal eigensystem `{e_j}` with eigenvalues `{lambda_j}` in a
/// finite truncation, together with its collocation grid.
///
/// Invariants established by the constructors:
/// - eigenvalues are nondecreasing and nonnegative;
/// - Dirichlet implies `lambda_1 > 0`; Neumann implies `lambda_1 = 0` with
///   the constant first eigenfunction;
/// - discrete analysis inverts synthesis on coefficient vectors.
#[derive(Debug)]
pub struct EigenBasis {
    boundary: BoundaryKind,
    lengths: Vec<f64>,
    /// Per selected mode, the 1-based index along each axis.
    axis_modes: Vec<Vec<usize>>,
    eigenvalues: Vec<f64>,
    grid: Grid,
    grid_per_axis: usize,
}

impl EigenBasis {
    /// 1D Laplacian eigenbasis on `(0, length)`.
    ///
    /// Neumann: `lambda_j = ((j-1) pi / L)^2` with constant `e_1`;
    /// Dirichlet: `lambda_j = (j pi / L)^2`. The collocation grid is a
    /// midpoint grid with `2 * n_modes` points, on which the discrete
    /// orthonormality `(e_i, e_j) = delta_ij` holds to machine precision.
    pub fn interval(
        boundary: BoundaryKind,
        n_modes: usize,
        length: f64,
    ) -> Result<Arc<EigenBasis>> {
        Self::with_oversampling(boundary, n_modes, &[length], 2)
    }

    /// 2D tensor-product eigenbasis on a rectangle; eigenvalues are sums of
    /// the per-axis eigenvalues and modes are sorted nondecreasing.
    pub fn rectangle(
        boundary: BoundaryKind,
        n_modes: usize,
        lengths: [f64; 2],
    ) -> Result<Arc<EigenBasis>> {
        Self::with_oversampling(boundary, n_modes, &lengths, 2)
    }

    /// General constructor with an explicit grid oversampling factor
    /// (grid points per axis = `oversample * n_modes`, at least 2).
    pub fn with_oversampling(
        boundary: BoundaryKind,
        n_modes: usize,
        lengths: &[f64],
        oversample: usize,
    ) -> Result<Arc<EigenBasis>> {
        if n_modes == 0 {
            return Err(Error::config("n_modes must be at least 1"));
        }
        if lengths.is_empty() || lengths.len() > 2 {
            return Err(Error::config("spatial dimension must be 1 or 2"));
        }
        if lengths.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return Err(Error::config("domain lengths must be positive and finite"));
        }
        if oversample < 2 {
            return Err(Error::config("grid oversampling must be at least 2"));
        }
        let dim = lengths.len();

        // Enumerate candidate modes, sort by eigenvalue (ties by axis index),
        // keep the first n_modes.
        let mut candidates: Vec<(f64, Vec<usize>)> = Vec::new();
        match dim {
            1 => {
                for j in 1..=n_modes {
                    candidates.push((Self::axis_eigenvalue(boundary, j, lengths[0]), vec![j]));
                }
            }
            _ => {
                for j in 1..=n_modes {
                    for k in 1..=n_modes {
                        let ev = Self::axis_eigenvalue(boundary, j, lengths[0])
                            + Self::axis_eigenvalue(boundary, k, lengths[1]);
                        candidates.push((ev, vec![j, k]));
                    }
                }
            }
        }
        candidates.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then_with(|| a.1.cmp(&b.1)));
        candidates.truncate(n_modes);

        let eigenvalues: Vec<f64> = candidates.iter().map(|c| c.0).collect();
        let axis_modes: Vec<Vec<usize>> = candidates.into_iter().map(|c| c.1).collect();

        let grid_per_axis = oversample * n_modes;
        let grid = Grid::midpoint(lengths, grid_per_axis);

        Ok(Arc::new(EigenBasis {
            boundary,
            lengths: lengths.to_vec(),
            axis_modes,
            eigenvalues,
            grid,
            grid_per_axis,
        }))
    }

    fn axis_eigenvalue(boundary: BoundaryKind, j: usize, length: f64) -> f64 {
        let k = match boundary {
            BoundaryKind::Neumann => (j - 1) as f64,
            BoundaryKind::Dirichlet => j as f64,
        };
        let freq = k * std::f64::consts::PI / length;
        freq * freq
    }

    fn axis_eval(boundary: BoundaryKind, j: usize, length: f64, x: f64) -> f64 {
        match boundary {
            BoundaryKind::Neumann => {
                if j == 1 {
                    1.0 / length.sqrt()
                } else {
                    (2.0 / length).sqrt()
                        * (((j - 1) as f64) * std::f64::consts::PI * x / length).cos()
                }
            }
            BoundaryKind::Dirichlet => {
                (2.0 / length).sqrt() * ((j as f64) * std::f64::consts::PI * x / length).sin()
            }
        }
    }

    pub fn boundary(&self) -> BoundaryKind {
        self.boundary
    }

    pub fn dim(&self) -> usize {
        self.lengths.len()
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn n_modes(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Eigenvalue of the `j`-th mode (0-based).
    pub fn lambda(&self, j: usize) -> f64 {
        self.eigenvalues[j]
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn grid_per_axis(&self) -> usize {
        self.grid_per_axis
    }

    /// Value of the `j`-th (0-based) eigenfunction at a physical point.
    pub fn eval_mode(&self, j: usize, point: &[f64]) -> f64 {
        let modes = &self.axis_modes[j];
        let mut v = 1.0;
        for axis in 0..self.lengths.len() {
            v *= Self::axis_eval(self.boundary, modes[axis], self.lengths[axis], point[axis]);
        }
        v
    }

    /// Pointwise values of the expansion `sum_j c_j e_j` on an arbitrary grid.
    pub fn synthesize_on(&self, coeffs: &[f64], grid: &Grid) -> Vec<f64> {
        assert_eq!(coeffs.len(), self.n_modes());
        let mut out = vec![0.0; grid.len()];
        for (m, o) in out.iter_mut().enumerate() {
            let p = grid.point(m);
            let mut acc = 0.0;
            for (j, &c) in coeffs.iter().enumerate() {
                if c != 0.0 {
                    acc += c * self.eval_mode(j, p);
                }
            }
            *o = acc;
        }
        out
    }

    /// Pointwise values on the basis' own collocation grid.
    pub fn synthesize(&self, coeffs: &[f64]) -> Vec<f64> {
        self.synthesize_on(coeffs, &self.grid)
    }

    /// Discrete analysis (quadrature against each eigenfunction) on an
    /// arbitrary grid: `c_j = sum_m w_m e_j(x_m) v_m`.
    pub fn analyze_on(&self, grid: &Grid, values: &[f64]) -> Vec<f64> {
        assert_eq!(values.len(), grid.len());
        let mut coeffs = vec![0.0; self.n_modes()];
        for (j, c) in coeffs.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (m, v) in values.iter().enumerate() {
                acc += grid.weights()[m] * self.eval_mode(j, grid.point(m)) * v;
            }
            *c = acc;
        }
        coeffs
    }

    /// Discrete analysis on the basis' own collocation grid.
    pub fn analyze(&self, values: &[f64]) -> Vec<f64> {
        self.analyze_on(&self.grid, values)
    }

    /// Structural equality: same family, dimension, lengths and mode count.
    pub fn compatible(&self, other: &EigenBasis) -> bool {
        self.boundary == other.boundary
            && self.lengths == other.lengths
            && self.axis_modes == other.axis_modes
    }

    /// Same physical domain (dimension and lengths), possibly different modes.
    pub fn same_domain(&self, other: &EigenBasis) -> bool {
        self.lengths == other.lengths
    }

    /// For a Neumann basis, the constant value of the normalized first
    /// eigenfunction (`1/sqrt(|Omega|)`); `None` when `lambda_1 > 0`.
    pub fn first_eigenfunction_constant(&self) -> Option<f64> {
        if self.eigenvalues[0] == 0.0 {
            let volume: f64 = self.lengths.iter().product();
            Some(1.0 / volume.sqrt())
        } else {
            None
        }
    }
}

/// A state variable stored as coefficients in a named eigenbasis.
#[derive(Debug, Clone)]
pub struct Field {
    basis: Arc<EigenBasis>,
    coeffs: Vec<f64>,
}

impl Field {
    pub fn new(basis: Arc<EigenBasis>, coeffs: Vec<f64>) -> Result<Field> {
        if coeffs.len() != basis.n_modes() {
            return Err(Error::config(format!(
                "coefficient vector length {} does not match basis with {} modes",
                coeffs.len(),
                basis.n_modes()
            )));
        }
        Ok(Field { basis, coeffs })
    }

    pub fn zero(basis: Arc<EigenBasis>) -> Field {
        let n = basis.n_modes();
        Field {
            basis,
            coeffs: vec![0.0; n],
        }
    }

    /// The unit eigenmode `e_j` (0-based index).
    pub fn eigenmode(basis: Arc<EigenBasis>, j: usize) -> Field {
        let mut coeffs = vec![0.0; basis.n_modes()];
        coeffs[j] = 1.0;
        Field { basis, coeffs }
    }

    /// Project pointwise grid values into the basis.
    pub fn from_grid_values(basis: Arc<EigenBasis>, values: &[f64]) -> Field {
        let coeffs = basis.analyze(values);
        Field { basis, coeffs }
    }

    pub fn basis(&self) -> &Arc<EigenBasis> {
        &self.basis
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    /// `H = L^2` norm; by Parseval this is the Euclidean norm of the
    /// coefficients.
    pub fn h_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    pub fn grid_values(&self) -> Vec<f64> {
        self.basis.synthesize(&self.coeffs)
    }

    /// `L^2` inner product of two fields in the same basis.
    pub fn inner(&self, other: &Field) -> Result<f64> {
        self.check_same_basis(other)?;
        Ok(self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a * b)
            .sum())
    }

    pub fn check_same_basis(&self, other: &Field) -> Result<()> {
        if Arc::ptr_eq(&self.basis, &other.basis) || self.basis.compatible(&other.basis) {
            Ok(())
        } else {
            Err(Error::BasisMismatch(
                "fields live in different eigenbases".into(),
            ))
        }
    }

    pub fn scaled(&self, factor: f64) -> Field {
        Field {
            basis: Arc::clone(&self.basis),
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.check_same_basis(other)?;
        Ok(Field {
            basis: Arc::clone(&self.basis),
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.check_same_basis(other)?;
        Ok(Field {
            basis: Arc::clone(&self.basis),
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }
}

/// A fractional power `A^r` of the operator represented by an eigenbasis:
/// it acts on coefficients as multiplication by `lambda_j^r`.
#[derive(Debug, Clone)]
pub struct FractionalOperator {
    basis: Arc<EigenBasis>,
    exponent: f64,
}

impl FractionalOperator {
    pub fn new(basis: Arc<EigenBasis>, exponent: f64) -> Result<FractionalOperator> {
        if !(exponent > 0.0) || !exponent.is_finite() {
            return Err(Error::config(
                "fractional exponent must be a fixed positive real number",
            ));
        }
        Ok(FractionalOperator { basis, exponent })
    }

    pub fn basis(&self) -> &Arc<EigenBasis> {
        &self.basis
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    /// Same operator with the exponent doubled (`A^r -> A^{2r}`), as it
    /// appears in the evolution equations.
    pub fn doubled(&self) -> FractionalOperator {
        FractionalOperator {
            basis: Arc::clone(&self.basis),
            exponent: 2.0 * self.exponent,
        }
    }

    /// Spectral multipliers `lambda_j^r`.
    pub fn multipliers(&self) -> Vec<f64> {
        self.basis
            .eigenvalues()
            .iter()
            .map(|&l| l.powf(self.exponent))
            .collect()
    }

    fn check_field(&self, v: &Field) -> Result<()> {
        if Arc::ptr_eq(&self.basis, v.basis()) || self.basis.compatible(v.basis()) {
            Ok(())
        } else {
            Err(Error::BasisMismatch(
                "field is not expressed in the operator's basis".into(),
            ))
        }
    }

    /// `A^r v = sum_j lambda_j^r (v, e_j) e_j`.
    pub fn apply(&self, v: &Field) -> Result<Field> {
        self.check_field(v)?;
        let coeffs = v
            .coeffs()
            .iter()
            .zip(self.basis.eigenvalues())
            .map(|(c, &l)| c * l.powf(self.exponent))
            .collect();
        Ok(Field {
            basis: Arc::clone(v.basis()),
            coeffs,
        })
    }

    /// Resolvent `(eps I + A^r)^{-1} v`, mode by mode.
    pub fn resolvent(&self, eps: f64, v: &Field) -> Result<Field> {
        if !(eps > 0.0) {
            return Err(Error::config("resolvent parameter eps must be positive"));
        }
        self.check_field(v)?;
        let coeffs = v
            .coeffs()
            .iter()
            .zip(self.basis.eigenvalues())
            .map(|(c, &l)| c / (eps + l.powf(self.exponent)))
            .collect();
        Ok(Field {
            basis: Arc::clone(v.basis()),
            coeffs,
        })
    }

    /// Seminorm `|| A^r v ||`.
    pub fn seminorm(&self, v: &Field) -> Result<f64> {
        self.check_field(v)?;
        Ok(v.coeffs()
            .iter()
            .zip(self.basis.eigenvalues())
            .map(|(c, &l)| {
                let m = l.powf(self.exponent);
                c * c * m * m
            })
            .sum::<f64>()
            .sqrt())
    }
}

/// The four norms attached to a field and a fractional power: the plain `H`
/// norm, the graph norm of the domain `V_A^r`, the dual norm of `V_A^{-r}`
/// under the spectral identification, and the seminorm `||A^r v||`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Norms {
    pub h_norm: f64,
    pub graph_norm: f64,
    pub dual_norm: f64,
    pub seminorm: f64,
}

/// Compute all four norms in one pass:
/// `graph^2 = sum (1 + lambda_j^{2r}) v_j^2`,
/// `dual^2 = sum v_j^2 / (1 + lambda_j^{2r})`,
/// `seminorm^2 = sum lambda_j^{2r} v_j^2`.
pub fn norms(v: &Field, op: &FractionalOperator) -> Result<Norms> {
    op.check_field(v)?;
    let mut h2 = 0.0;
    let mut graph2 = 0.0;
    let mut dual2 = 0.0;
    let mut semi2 = 0.0;
    for (c, &l) in v.coeffs().iter().zip(op.basis().eigenvalues()) {
        let m = l.powf(op.exponent());
        let c2 = c * c;
        h2 += c2;
        graph2 += (1.0 + m * m) * c2;
        dual2 += c2 / (1.0 + m * m);
        semi2 += m * m * c2;
    }
    Ok(Norms {
        h_norm: h2.sqrt(),
        graph_norm: graph2.sqrt(),
        dual_norm: dual2.sqrt(),
        seminorm: semi2.sqrt(),
    })
}

/// Mean value and Poincare ratio for a field in a basis with `lambda_1 = 0`
/// and constant first eigenfunction.
///
/// Returns `(mean, ratio)` where `mean = c_1 * e_1` (the constant value of
/// the first term of the expansion) and
/// `ratio = ||v - mean|| / ||A^r (v - mean)||` for a nonzero zero-mean part,
/// with the convention `ratio = 0` when the zero-mean part vanishes. In the
/// truncation the ratio is bounded by `lambda_2^{-r}`.
pub fn mean_and_poincare(v: &Field, op: &FractionalOperator) -> Result<(f64, f64)> {
    op.check_field(v)?;
    let basis = op.basis();
    let e1 = basis.first_eigenfunction_constant().ok_or_else(|| {
        Error::assumption(
            "(A5)(iii)",
            "mean/Poincare utilities need lambda_1 = 0 with a constant first eigenfunction",
        )
    })?;
    let mean = v.coeffs()[0] * e1;

    let mut num2 = 0.0;
    let mut den2 = 0.0;
    for (j, (&c, &l)) in v.coeffs().iter().zip(basis.eigenvalues()).enumerate() {
        if j == 0 {
            continue;
        }
        let m = l.powf(op.exponent());
        num2 += c * c;
        den2 += m * m * c * c;
    }
    let ratio = if num2 == 0.0 {
        0.0
    } else {
        (num2 / den2).sqrt()
    };
    Ok((mean, ratio))
}

/// Embedding constant of `V_A^{r2} subset V_A^{r1}` for `0 < r1 < r2` in the
/// truncation: the smallest `C` with
/// `graph_norm(v; r1) <= C * graph_norm(v; r2)`, computed as
/// `max_j ((1 + lambda_j^{2 r1}) / (1 + lambda_j^{2 r2}))^{1/2}`.
pub fn embedding_constant(basis: &EigenBasis, r1: f64, r2: f64) -> Result<f64> {
    if !(r1 > 0.0 && r2 > 0.0 && r1 < r2) {
        return Err(Error::config("embedding constant needs 0 < r1 < r2"));
    }
    let c2 = basis
        .eigenvalues()
        .iter()
        .map(|&l| (1.0 + l.powf(2.0 * r1)) / (1.0 + l.powf(2.0 * r2)))
        .fold(0.0_f64, f64::max);
    Ok(c2.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn random_coeffs(n: usize, seed: u64) -> Vec<f64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn neumann_interval_spectrum() {
        let basis = EigenBasis::interval(BoundaryKind::Neumann, 4, 1.0).unwrap();
        let expected = [0.0, PI * PI, 4.0 * PI * PI, 9.0 * PI * PI];
        for (got, want) in basis.eigenvalues().iter().zip(expected) {
            assert_relative_eq!(got, &want, max_relative = 1e-14);
        }
        assert!(basis.first_eigenfunction_constant().is_some());
    }

    #[test]
    fn dirichlet_interval_spectrum() {
        let basis = EigenBasis::interval(BoundaryKind::Dirichlet, 3, 1.0).unwrap();
        let expected = [PI * PI, 4.0 * PI * PI, 9.0 * PI * PI];
        for (got, want) in basis.eigenvalues().iter().zip(expected) {
            assert_relative_eq!(got, &want, max_relative = 1e-14);
        }
        assert!(basis.lambda(0) > 0.0);
    }

    #[test]
    fn length_scaling() {
        let basis = EigenBasis::interval(BoundaryKind::Neumann, 2, 2.0).unwrap();
        assert_relative_eq!(
            basis.lambda(1),
            (PI / 2.0) * (PI / 2.0),
            max_relative = 1e-14
        );
    }

    #[test]
    fn invalid_constructions() {
        assert!(EigenBasis::interval(BoundaryKind::Neumann, 0, 1.0).is_err());
        assert!(EigenBasis::interval(BoundaryKind::Neumann, 4, 0.0).is_err());
        assert!(EigenBasis::interval(BoundaryKind::Neumann, 4, -1.0).is_err());
    }

    #[test]
    fn eigenvalues_nondecreasing_2d() {
        let basis = EigenBasis::rectangle(BoundaryKind::Dirichlet, 12, [1.0, 0.7]).unwrap();
        let ev = basis.eigenvalues();
        for w in ev.windows(2) {
            assert!(w[0] <= w[1] + 1e-12);
        }
        assert!(ev[0] > 0.0);
        // Smallest 2D Dirichlet eigenvalue is pi^2 (1/Lx^2 + 1/Ly^2).
        assert_relative_eq!(
            ev[0],
            PI * PI * (1.0 + 1.0 / (0.7 * 0.7)),
            max_relative = 1e-12
        );
    }

    #[test]
    fn discrete_orthonormality_and_round_trip() {
        for boundary in [BoundaryKind::Neumann, BoundaryKind::Dirichlet] {
            for (n, len) in [(8, 1.0), (16, 2.5)] {
                let basis = EigenBasis::with_oversampling(boundary, n, &[len], 2).unwrap();
                // analysis . synthesis = identity
                let coeffs = random_coeffs(n, 7);
                let values = basis.synthesize(&coeffs);
                let back = basis.analyze(&values);
                for (a, b) in coeffs.iter().zip(&back) {
                    assert!((a - b).abs() <= 1e-12, "round trip failed: {a} vs {b}");
                }
            }
        }
        // 2D round trip
        let basis = EigenBasis::rectangle(BoundaryKind::Neumann, 9, [1.0, 1.3]).unwrap();
        let coeffs = random_coeffs(9, 11);
        let back = basis.analyze(&basis.synthesize(&coeffs));
        for (a, b) in coeffs.iter().zip(&back) {
            assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn parseval_matches_grid_quadrature() {
        let basis = EigenBasis::interval(BoundaryKind::Neumann, 12, 1.5).unwrap();
        let v = Field::new(Arc::clone(&basis), random_coeffs(12, 3)).unwrap();
        let grid_norm = basis.grid().l2_norm(&v.grid_values());
        assert!((grid_norm - v.h_norm()).abs() <= 1e-12);
    }

    #[test]
    fn single_mode_eigenrelation() {
        // A^{1/2} e_2 = 2 pi e_2 for the Dirichlet basis on (0,1).
        let basis = EigenBasis::interval(BoundaryKind::Dirichlet, 4, 1.0).unwrap();
        let op = FractionalOperator::new(Arc::clone(&basis), 0.5).unwrap();
        let v = Field::eigenmode(Arc::clone(&basis), 1);
        let av = op.apply(&v).unwrap();
        assert_relative_eq!(av.coeffs()[1], 2.0 * PI, max_relative = 1e-14);
        for (j, c) in av.coeffs().iter().enumerate() {
            if j != 1 {
                assert_eq!(*c, 0.0);
            }
        }
        // zero maps to zero
        let z = Field::zero(Arc::clone(&basis));
        assert_eq!(op.apply(&z).unwrap().h_norm(), 0.0);
    }

    #[test]
    fn composition_of_fractional_powers() {
        // apply(0.3) then apply(0.7) equals apply(1.0); oracle is the direct
        // multiplier product lambda_j^{0.3} * lambda_j^{0.7}.
        let basis = EigenBasis::interval(BoundaryKind::Dirichlet, 16, 1.0).unwrap();
        let op_a = FractionalOperator::new(Arc::clone(&basis), 0.3).unwrap();
        let op_b = FractionalOperator::new(Arc::clone(&basis), 0.7).unwrap();
        let op_full = FractionalOperator::new(Arc::clone(&basis), 1.0).unwrap();
        let v = Field::new(Arc::clone(&basis), random_coeffs(16, 5)).unwrap();
        let composed = op_b.apply(&op_a.apply(&v).unwrap()).unwrap();
        let direct = op_full.apply(&v).unwrap();
        let ma = op_a.multipliers();
        let mb = op_b.multipliers();
        for j in 0..16 {
            let c = composed.coeffs()[j];
            let d = direct.coeffs()[j];
            let denom = d.abs().max(1.0);
            assert!((c - d).abs() / denom <= 1e-12);
            // oracle: product of the two multipliers reproduces the composition
            let oracle = ma[j] * mb[j] * v.coeffs()[j];
            assert!((c - oracle).abs() / denom <= 1e-12);
        }
    }

    #[test]
    fn resolvent_examples_and_round_trip() {
        // eps=1, v=e_1 in a Neumann basis: (1 + 0)^{-1} e_1 = e_1.
        let neumann = EigenBasis::interval(BoundaryKind::Neumann, 4, 1.0).unwrap();
        let op = FractionalOperator::new(Arc::clone(&neumann), 0.5).unwrap();
        let e1 = Field::eigenmode(Arc::clone(&neumann), 0);
        let r = op.resolvent(1.0, &e1).unwrap();
        assert_relative_eq!(r.coeffs()[0], 1.0, max_relative = 1e-14);

        // eps=2, rho=1/2, v=e_2 Dirichlet on (0,1): coefficient 1/(2 + 2 pi).
        let dirichlet = EigenBasis::interval(BoundaryKind::Dirichlet, 4, 1.0).unwrap();
        let op = FractionalOperator::new(Arc::clone(&dirichlet), 0.5).unwrap();
        let e2 = Field::eigenmode(Arc::clone(&dirichlet), 1);
        let r = op.resolvent(2.0, &e2).unwrap();
        assert_relative_eq!(r.coeffs()[1], 0.1207265035026119, max_relative = 1e-14);

        // forward-apply oracle: (eps I + A^r) resolvent(v) recovers v.
        let v = Field::new(Arc::clone(&dirichlet), random_coeffs(4, 9)).unwrap();
        let res = op.resolvent(0.37, &v).unwrap();
        let forward = op.apply(&res).unwrap().add(&res.scaled(0.37)).unwrap();
        for (a, b) in forward.coeffs().iter().zip(v.coeffs()) {
            assert!((a - b).abs() <= 1e-12);
        }

        assert!(op.resolvent(0.0, &v).is_err());
        assert!(op.resolvent(-1.0, &v).is_err());
    }

    #[test]
    fn basis_mismatch_rejected() {
        let a = EigenBasis::interval(BoundaryKind::Dirichlet, 4, 1.0).unwrap();
        let b = EigenBasis::interval(BoundaryKind::Neumann, 4, 1.0).unwrap();
        let op = FractionalOperator::new(a, 0.5).unwrap();
        let v = Field::zero(b);
        assert!(matches!(op.apply(&v), Err(Error::BasisMismatch(_))));
    }

    #[test]
    fn norm_duality_on_eigenmodes() {
        let basis = EigenBasis::interval(BoundaryKind::Dirichlet, 6, 1.0).unwrap();
        let op = FractionalOperator::new(Arc::clone(&basis), 0.75).unwrap();
        for j in 0..6 {
            let v = Field::eigenmode(Arc::clone(&basis), j);
            let n = norms(&v, &op).unwrap();
            let m = basis.lambda(j).powf(0.75);
            assert_relative_eq!(n.graph_norm, (1.0 + m * m).sqrt(), max_relative = 1e-13);
            assert_relative_eq!(
                n.dual_norm,
                1.0 / (1.0 + m * m).sqrt(),
                max_relative = 1e-13
            );
            assert_relative_eq!(n.graph_norm * n.dual_norm, 1.0, max_relative = 1e-13);
        }
        // zero field: all zero
        let z = Field::zero(Arc::clone(&basis));
        let n = norms(&z, &op).unwrap();
        assert_eq!(
            (n.h_norm, n.graph_norm, n.dual_norm, n.seminorm),
            (0.0, 0.0, 0.0, 0.0)
        );
    }

    #[test]
    fn graph_norm_recomposition() {
        // graph^2 = h^2 + seminorm^2, recomputed by definition.
        let basis = EigenBasis::interval(BoundaryKind::Neumann, 10, 2.0).unwrap();
        let op = FractionalOperator::new(Arc::clone(&basis), 0.4).unwrap();
        let v = Field::new(Arc::clone(&basis), random_coeffs(10, 21)).unwrap();
        let n = norms(&v, &op).unwrap();
        assert_relative_eq!(
            n.graph_norm * n.graph_norm,
            n.h_norm * n.h_norm + n.seminorm * n.seminorm,
            max_relative = 1e-14
        );
    }

    #[test]
    fn green_formula() {
        // (A^{r1+r2} v, w) = (A^{r1} v, A^{r2} w)
        let basis = EigenBasis::interval(BoundaryKind::Dirichlet, 12, 1.0).unwrap();
        let r1 = 0.35;
        let r2 = 0.85;
        let op1 = FractionalOperator::new(Arc::clone(&basis), r1).unwrap();
        let op2 = FractionalOperator::new(Arc::clone(&basis), r2).unwrap();
        let op12 = FractionalOperator::new(Arc::clone(&basis), r1 + r2).unwrap();
        let v = Field::new(Arc::clone(&basis), random_coeffs(12, 31)).unwrap();
        let w = Field::new(Arc::clone(&basis), random_coeffs(12, 32)).unwrap();
        let lhs = op12.apply(&v).unwrap().inner(&w).unwrap();
        let rhs = op1
            .apply(&v)
            .unwrap()
            .inner(&op2.apply(&w).unwrap())
            .unwrap();
        assert!((lhs - rhs).abs() / lhs.abs().max(1.0) <= 1e-12);
    }

    #[test]
    fn monotone_and_self_adjoint() {
        let basis = EigenBasis::interval(BoundaryKind::Neumann, 9, 1.0).unwrap();
        let op = FractionalOperator::new(Arc::clone(&basis), 0.6).unwrap();
        let v = Field::new(Arc::clone(&basis), random_coeffs(9, 41)).unwrap();
        let w = Field::new(Arc::clone(&basis), random_coeffs(9, 42)).unwrap();
        assert!(op.apply(&v).unwrap().inner(&v).unwrap() >= 0.0);
        // the identity is exact at the coefficient level; floating point
        // reorders one multiplication per term
        let lhs = op.apply(&v).unwrap().inner(&w).unwrap();
        let rhs = v.inner(&op.apply(&w).unwrap()).unwrap();
        assert!((lhs - rhs).abs() <= 1e-14 * lhs.abs().max(1.0));
    }

    #[test]
    fn embedding_constant_bounds_graph_norms() {
        let basis = EigenBasis::interval(BoundaryKind::Dirichlet, 14, 1.0).unwrap();
        let (r1, r2) = (0.3, 0.9);
        let c = embedding_constant(&basis, r1, r2).unwrap();
        let op1 = FractionalOperator::new(Arc::clone(&basis), r1).unwrap();
        let op2 = FractionalOperator::new(Arc::clone(&basis), r2).unwrap();
        for seed in 0..5 {
            let v = Field::new(Arc::clone(&basis), random_coeffs(14, 100 + seed)).unwrap();
            let n1 = norms(&v, &op1).unwrap().graph_norm;
            let n2 = norms(&v, &op2).unwrap().graph_norm;
            assert!(n1 <= c * n2 * (1.0 + 1e-12));
        }
        assert!(embedding_constant(&basis, 0.9, 0.3).is_err());
    }

    #[test]
    fn mean_and_poincare_neumann() {
        let basis = EigenBasis::interval(BoundaryKind::Neumann, 8, 1.0).unwrap();
        let op = FractionalOperator::new(Arc::clone(&basis), 0.5).unwrap();

        // e_1: mean only, ratio 0 by convention
        let e1 = Field::eigenmode(Arc::clone(&basis), 0);
        let (mean, ratio) = mean_and_poincare(&e1, &op).unwrap();
        assert_relative_eq!(mean, 1.0, max_relative = 1e-14); // e_1 = 1 on (0,1)
        assert_eq!(ratio, 0.0);

        // e_2: ratio is exactly lambda_2^{-rho}
        let e2 = Field::eigenmode(Arc::clone(&basis), 1);
        let (mean, ratio) = mean_and_poincare(&e2, &op).unwrap();
        assert_eq!(mean, 0.0);
        assert_relative_eq!(ratio, basis.lambda(1).powf(-0.5), max_relative = 1e-13);

        // random zero-mean field: ratio bounded by lambda_2^{-rho}
        let mut coeffs = random_coeffs(8, 77);
        coeffs[0] = 0.0;
        let v = Field::new(Arc::clone(&basis), coeffs).unwrap();
        let (_, ratio) = mean_and_poincare(&v, &op).unwrap();
        assert!(ratio <= basis.lambda(1).powf(-0.5) + 1e-12);

        // Dirichlet basis: operation refused
        let dir = EigenBasis::interval(BoundaryKind::Dirichlet, 8, 1.0).unwrap();
        let opd = FractionalOperator::new(Arc::clone(&dir), 0.5).unwrap();
        let vd = Field::zero(Arc::clone(&dir));
        assert!(mean_and_poincare(&vd, &opd).is_err());
    }

    #[test]
    fn two_dimensional_round_trip_and_norms() {
        // tensor basis: Parseval and analysis/synthesis hold in 2D as well
        let basis = EigenBasis::rectangle(BoundaryKind::Neumann, 10, [1.0, 0.6]).unwrap();
        let op = FractionalOperator::new(Arc::clone(&basis), 0.5).unwrap();
        let v = Field::new(Arc::clone(&basis), random_coeffs(10, 55)).unwrap();
        let grid_norm = basis.grid().l2_norm(&v.grid_values());
        assert!((grid_norm - v.h_norm()).abs() <= 1e-10);
        let n = norms(&v, &op).unwrap();
        assert!(n.graph_norm >= n.h_norm);
        // constant first eigenfunction value is 1/sqrt(|Omega|)
        assert_relative_eq!(
            basis.first_eigenfunction_constant().unwrap(),
            1.0 / 0.6_f64.sqrt(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn mean_matches_grid_average() {
        let basis = EigenBasis::interval(BoundaryKind::Neumann, 8, 2.0).unwrap();
        let op = FractionalOperator::new(Arc::clone(&basis), 0.5).unwrap();
        let v = Field::new(Arc::clone(&basis), random_coeffs(8, 13)).unwrap();
        let (mean, _) = mean_and_poincare(&v, &op).unwrap();
        let grid = basis.grid();
        let grid_mean = grid.integrate(&v.grid_values()) / grid.volume();
        assert!((mean - grid_mean).abs() <= 1e-12);
    }
}
