//! su(2) and su(3) in a fixed antihermitian basis.
//!
//! The basis is `t_a = -i sigma_a / 2` for su(2) and `t_a = -i lambda_a / 2`
//! for su(3), so that `tr(t_a t_b^dagger) = delta_ab / 2` and
//! `[t_a, t_b] = f_abc t_c` with `f_123 = +1` and the usual Gell-Mann
//! constants. The structure constants are not transcribed: they are read off
//! the commutators of the hardcoded matrices when a [`GroupSpec`] is first
//! used.
//!
//! Coefficient vectors are Euclidean under the trace form
//! `<x, y> = 2 Re tr(X Y^dagger) = sum_a x_a y_a`.

use std::ops::{Add, Mul, Neg, Sub};
use std::sync::LazyLock;

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;

/// Largest entrywise deviation of `g g^dagger` from the identity that
/// [`GroupSpec::adjoint_rotate`] accepts.
pub const UNITARITY_TOLERANCE: f64 = 1e-12;

/// Relative cut-off used when growing a subalgebra by Gram-Schmidt.
const CLOSURE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupId {
    Su2,
    Su3,
}

impl GroupId {
    /// The shared, lazily built group data.
    pub fn spec(self) -> &'static GroupSpec {
        match self {
            GroupId::Su2 => &SU2,
            GroupId::Su3 => &SU3,
        }
    }

    /// Dimension of the Lie algebra.
    pub fn dim(self) -> usize {
        match self {
            GroupId::Su2 => 3,
            GroupId::Su3 => 8,
        }
    }

    /// Size of the defining matrices.
    pub fn n(self) -> usize {
        match self {
            GroupId::Su2 => 2,
            GroupId::Su3 => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GroupId::Su2 => "su2",
            GroupId::Su3 => "su3",
        }
    }
}

impl std::fmt::Display for GroupId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

static SU2: LazyLock<GroupSpec> = LazyLock::new(|| GroupSpec::build(GroupId::Su2));
static SU3: LazyLock<GroupSpec> = LazyLock::new(|| GroupSpec::build(GroupId::Su3));

/// Coordinates of a Lie-algebra element in the basis `{t_a}`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraElement {
    pub coeffs: DVector<f64>,
}

impl AlgebraElement {
    pub fn new(coeffs: impl Into<Vec<f64>>) -> Self {
        AlgebraElement {
            coeffs: DVector::from_vec(coeffs.into()),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        AlgebraElement {
            coeffs: DVector::zeros(dim),
        }
    }

    /// The basis generator `t_a` (zero-based index).
    pub fn unit(dim: usize, a: usize) -> Self {
        let mut e = Self::zeros(dim);
        e.coeffs[a] = 1.0;
        e
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.norm()
    }

    pub fn dot(&self, other: &AlgebraElement) -> f64 {
        self.coeffs.dot(&other.coeffs)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }
}

impl Add for &AlgebraElement {
    type Output = AlgebraElement;
    fn add(self, rhs: &AlgebraElement) -> AlgebraElement {
        AlgebraElement {
            coeffs: &self.coeffs + &rhs.coeffs,
        }
    }
}

impl Sub for &AlgebraElement {
    type Output = AlgebraElement;
    fn sub(self, rhs: &AlgebraElement) -> AlgebraElement {
        AlgebraElement {
            coeffs: &self.coeffs - &rhs.coeffs,
        }
    }
}

impl Mul<f64> for &AlgebraElement {
    type Output = AlgebraElement;
    fn mul(self, rhs: f64) -> AlgebraElement {
        AlgebraElement {
            coeffs: &self.coeffs * rhs,
        }
    }
}

impl Neg for &AlgebraElement {
    type Output = AlgebraElement;
    fn neg(self) -> AlgebraElement {
        AlgebraElement {
            coeffs: -&self.coeffs,
        }
    }
}

/// A linear subspace of the algebra with an orthonormal basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Subalgebra {
    ambient_dim: usize,
    basis: Vec<AlgebraElement>,
}

impl Subalgebra {
    pub fn zero(ambient_dim: usize) -> Self {
        Subalgebra {
            ambient_dim,
            basis: Vec::new(),
        }
    }

    pub fn full(ambient_dim: usize) -> Self {
        Subalgebra {
            ambient_dim,
            basis: (0..ambient_dim)
                .map(|a| AlgebraElement::unit(ambient_dim, a))
                .collect(),
        }
    }

    /// Orthonormalises `vectors` in order; near-dependent vectors are dropped.
    pub fn span(ambient_dim: usize, vectors: &[AlgebraElement]) -> Self {
        let scale = vectors.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let mut basis: Vec<DVector<f64>> = Vec::new();
        if scale > 0.0 {
            for v in vectors {
                push_if_new(&mut basis, &v.coeffs, CLOSURE_TOLERANCE * scale);
            }
        }
        Subalgebra::from_vectors(ambient_dim, basis)
    }

    fn from_vectors(ambient_dim: usize, basis: Vec<DVector<f64>>) -> Self {
        Subalgebra {
            ambient_dim,
            basis: basis
                .into_iter()
                .map(|coeffs| AlgebraElement { coeffs })
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn basis_vectors(&self) -> &[AlgebraElement] {
        &self.basis
    }

    /// Orthogonal projection onto the subspace.
    pub fn project(&self, x: &AlgebraElement) -> AlgebraElement {
        let mut p = AlgebraElement::zeros(self.ambient_dim);
        for b in &self.basis {
            p.coeffs.axpy(b.dot(x), &b.coeffs, 1.0);
        }
        p
    }

    /// Norm of the component of `x` orthogonal to the subspace.
    pub fn distance(&self, x: &AlgebraElement) -> f64 {
        (x - &self.project(x)).norm()
    }

    pub fn contains(&self, x: &AlgebraElement, tol: f64) -> bool {
        self.distance(x) <= tol * x.norm().max(1.0)
    }

    pub fn is_subspace_of(&self, other: &Subalgebra, tol: f64) -> bool {
        self.basis.iter().all(|b| other.contains(b, tol))
    }

    pub fn same_span(&self, other: &Subalgebra, tol: f64) -> bool {
        self.dim() == other.dim() && self.is_subspace_of(other, tol)
    }

    /// Largest deviation of the basis Gram matrix from the identity.
    pub fn orthonormality_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, x) in self.basis.iter().enumerate() {
            for (j, y) in self.basis.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((x.dot(y) - target).abs());
            }
        }
        worst
    }

    /// Largest norm of a basis bracket's component outside the subspace.
    pub fn closure_residual(&self, spec: &GroupSpec) -> f64 {
        let mut worst: f64 = 0.0;
        for x in &self.basis {
            for y in &self.basis {
                let z = spec.bracket_unchecked(x, y);
                worst = worst.max(self.distance(&z));
            }
        }
        worst
    }
}

fn push_if_new(basis: &mut Vec<DVector<f64>>, v: &DVector<f64>, tol: f64) -> bool {
    let r = linalg::orthogonalize(v, basis);
    let n = r.norm();
    if n > tol {
        basis.push(r / n);
        true
    } else {
        false
    }
}

/// Matrix realisation and structure constants of su(2) or su(3).
#[derive(Debug, Clone)]
pub struct GroupSpec {
    pub id: GroupId,
    pub n: usize,
    pub dim: usize,
    pub basis: Vec<CMatrix>,
    f: Vec<f64>,
}

fn pauli() -> Vec<CMatrix> {
    let c = |re: f64, im: f64| C64::new(re, im);
    vec![
        CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]),
        CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)]),
        CMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)]),
    ]
}

fn gell_mann() -> Vec<CMatrix> {
    let mut l = vec![CMatrix::zeros(3, 3); 8];
    let one = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    l[0][(0, 1)] = one;
    l[0][(1, 0)] = one;
    l[1][(0, 1)] = -i;
    l[1][(1, 0)] = i;
    l[2][(0, 0)] = one;
    l[2][(1, 1)] = -one;
    l[3][(0, 2)] = one;
    l[3][(2, 0)] = one;
    l[4][(0, 2)] = -i;
    l[4][(2, 0)] = i;
    l[5][(1, 2)] = one;
    l[5][(2, 1)] = one;
    l[6][(1, 2)] = -i;
    l[6][(2, 1)] = i;
    let s = 1.0 / 3f64.sqrt();
    l[7][(0, 0)] = one * s;
    l[7][(1, 1)] = one * s;
    l[7][(2, 2)] = one * (-2.0 * s);
    l
}

impl GroupSpec {
    fn build(id: GroupId) -> Self {
        let hermitian = match id {
            GroupId::Su2 => pauli(),
            GroupId::Su3 => gell_mann(),
        };
        let minus_half_i = C64::new(0.0, -0.5);
        let basis: Vec<CMatrix> = hermitian.into_iter().map(|h| h * minus_half_i).collect();
        let dim = basis.len();
        let mut f = vec![0.0; dim * dim * dim];
        for a in 0..dim {
            for b in 0..dim {
                let comm = &basis[a] * &basis[b] - &basis[b] * &basis[a];
                for c in 0..dim {
                    let v = 2.0 * (&comm * basis[c].adjoint()).trace().re;
                    f[(a * dim + b) * dim + c] = if v.abs() < 1e-14 { 0.0 } else { v };
                }
            }
        }
        GroupSpec {
            id,
            n: id.n(),
            dim,
            basis,
            f,
        }
    }

    /// `f_abc` with zero-based indices.
    #[inline]
    pub fn f(&self, a: usize, b: usize, c: usize) -> f64 {
        self.f[(a * self.dim + b) * self.dim + c]
    }

    /// Nonzero structure constants as `(a, b, c, f_abc)`.
    pub fn nonzero_structure_constants(&self) -> Vec<(usize, usize, usize, f64)> {
        let d = self.dim;
        let mut out = Vec::new();
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    let v = self.f(a, b, c);
                    if v != 0.0 {
                        out.push((a, b, c, v));
                    }
                }
            }
        }
        out
    }

    pub fn zero(&self) -> AlgebraElement {
        AlgebraElement::zeros(self.dim)
    }

    /// Generator `t_a`, zero-based.
    pub fn generator(&self, a: usize) -> AlgebraElement {
        AlgebraElement::unit(self.dim, a)
    }

    fn check(&self, x: &AlgebraElement) -> Result<()> {
        if x.dim() != self.dim {
            return Err(Error::invalid(format!(
                "element of dimension {} used with {} (dimension {})",
                x.dim(),
                self.id,
                self.dim
            )));
        }
        Ok(())
    }

    /// `[x, y]`, coordinates `z_c = sum_ab f_abc x_a y_b`.
    pub fn bracket(&self, x: &AlgebraElement, y: &AlgebraElement) -> Result<AlgebraElement> {
        self.check(x)?;
        self.check(y)?;
        Ok(self.bracket_unchecked(x, y))
    }

    pub(crate) fn bracket_unchecked(&self, x: &AlgebraElement, y: &AlgebraElement) -> AlgebraElement {
        let mut z = AlgebraElement::zeros(self.dim);
        self.bracket_into(x.coeffs.as_slice(), y.coeffs.as_slice(), z.coeffs.as_mut_slice());
        z
    }

    /// Accumulates `[x, y]` into `out` on raw coefficient slices.
    #[inline]
    pub fn bracket_into(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        let d = self.dim;
        for a in 0..d {
            if x[a] == 0.0 {
                continue;
            }
            for b in 0..d {
                let xy = x[a] * y[b];
                if xy == 0.0 {
                    continue;
                }
                let row = &self.f[(a * d + b) * d..(a * d + b + 1) * d];
                for c in 0..d {
                    out[c] += row[c] * xy;
                }
            }
        }
    }

    /// Matrix of `y -> [x, y]`.
    pub fn ad_matrix(&self, x: &AlgebraElement) -> DMatrix<f64> {
        let d = self.dim;
        DMatrix::from_fn(d, d, |c, b| (0..d).map(|a| self.f(a, b, c) * x.coeffs[a]).sum())
    }

    /// `sum_a x_a t_a`.
    pub fn matrix_of(&self, x: &AlgebraElement) -> CMatrix {
        let mut m = CMatrix::zeros(self.n, self.n);
        for (t, &c) in self.basis.iter().zip(x.coeffs.iter()) {
            m += t * C64::new(c, 0.0);
        }
        m
    }

    /// Coordinates of an (assumed antihermitian traceless) matrix.
    pub fn coefficients_of(&self, m: &CMatrix) -> AlgebraElement {
        AlgebraElement::new(
            self.basis
                .iter()
                .map(|t| 2.0 * (m * t.adjoint()).trace().re)
                .collect::<Vec<_>>(),
        )
    }

    /// Smallest bracket-closed subspace containing `gens`.
    pub fn generated_subalgebra(&self, gens: &[AlgebraElement]) -> Subalgebra {
        self.closure(gens, &[])
    }

    /// Smallest bracket-closed subspace containing `gens` that is also
    /// invariant under `ad_d` for every `d` in `derivations`.
    ///
    /// Generators are accepted relative to the largest generator norm, so the
    /// result is invariant under rescaling of the inputs. Brackets are always
    /// formed between unit vectors.
    pub fn closure(&self, gens: &[AlgebraElement], derivations: &[AlgebraElement]) -> Subalgebra {
        let scale = gens.iter().map(|g| g.norm()).fold(0.0, f64::max);
        let mut basis: Vec<DVector<f64>> = Vec::new();
        if scale == 0.0 {
            return Subalgebra::zero(self.dim);
        }
        for g in gens {
            push_if_new(&mut basis, &g.coeffs, CLOSURE_TOLERANCE * scale);
        }
        let dscale = derivations.iter().map(|d| d.norm()).fold(0.0, f64::max);
        let derivs: Vec<AlgebraElement> = derivations
            .iter()
            .filter(|d| d.norm() > CLOSURE_TOLERANCE * dscale)
            .map(|d| d * (1.0 / d.norm()))
            .collect();

        let mut k = 0;
        while k < basis.len() && basis.len() < self.dim {
            let bk = AlgebraElement {
                coeffs: basis[k].clone(),
            };
            for i in 0..k {
                let bi = AlgebraElement {
                    coeffs: basis[i].clone(),
                };
                let z = self.bracket_unchecked(&bi, &bk);
                push_if_new(&mut basis, &z.coeffs, CLOSURE_TOLERANCE);
            }
            for d in &derivs {
                let z = self.bracket_unchecked(d, &bk);
                push_if_new(&mut basis, &z.coeffs, CLOSURE_TOLERANCE);
            }
            k += 1;
        }
        Subalgebra::from_vectors(self.dim, basis)
    }

    /// Elements commuting with every member of `s`, from the SVD nullspace of
    /// the stacked maps `x -> [x, s_k]`.
    pub fn centralizer(&self, s: &[AlgebraElement]) -> Subalgebra {
        if s.is_empty() {
            return Subalgebra::full(self.dim);
        }
        let d = self.dim;
        let mut stacked = DMatrix::zeros(d * s.len(), d);
        for (k, sk) in s.iter().enumerate() {
            // [x, s_k] = -ad_{s_k} x
            let ad = -self.ad_matrix(sk);
            stacked.view_mut((k * d, 0), (d, d)).copy_from(&ad);
        }
        let kernel = linalg::nullspace(&stacked);
        let vectors: Vec<DVector<f64>> = kernel.column_iter().map(|c| c.into_owned()).collect();
        let mut basis = Vec::new();
        for v in &vectors {
            push_if_new(&mut basis, v, CLOSURE_TOLERANCE);
        }
        Subalgebra::from_vectors(d, basis)
    }

    fn check_unitary(&self, g: &CMatrix) -> Result<()> {
        if g.nrows() != self.n || g.ncols() != self.n {
            return Err(Error::invalid(format!(
                "group element must be {n}x{n}, got {}x{}",
                g.nrows(),
                g.ncols(),
                n = self.n
            )));
        }
        let dev = (g * g.adjoint() - CMatrix::identity(self.n, self.n))
            .iter()
            .fold(0.0, |acc: f64, z| acc.max(z.norm()));
        if dev > UNITARITY_TOLERANCE {
            return Err(Error::invalid(format!(
                "group element is not unitary (deviation {dev:e})"
            )));
        }
        Ok(())
    }

    /// Coordinates of `g X g^-1`.
    pub fn adjoint_rotate(&self, x: &AlgebraElement, g: &CMatrix) -> Result<AlgebraElement> {
        self.check(x)?;
        self.check_unitary(g)?;
        Ok(self.coefficients_of(&(g * self.matrix_of(x) * g.adjoint())))
    }

    /// Real `dim x dim` matrix of `Ad_g` acting on coordinate vectors.
    pub fn adjoint_matrix(&self, g: &CMatrix) -> Result<DMatrix<f64>> {
        self.check_unitary(g)?;
        let d = self.dim;
        let mut m = DMatrix::zeros(d, d);
        for (b, t) in self.basis.iter().enumerate() {
            let col = self.coefficients_of(&(g * t * g.adjoint()));
            m.set_column(b, &col.coeffs);
        }
        Ok(m)
    }

    /// `exp(X)` for `X = sum_a x_a t_a`, via the eigenbasis of `iX`.
    pub fn exp(&self, x: &AlgebraElement) -> CMatrix {
        let h = self.matrix_of(x) * C64::new(0.0, 1.0);
        let eig = SymmetricEigen::new(h);
        let phases = CMatrix::from_diagonal(&eig.eigenvalues.map(|w| C64::new(0.0, -w).exp()));
        &eig.eigenvectors * phases * eig.eigenvectors.adjoint()
    }

    /// Element with coordinates uniform in `[-scale, scale]`.
    pub fn random_element<R: Rng + ?Sized>(&self, rng: &mut R, scale: f64) -> AlgebraElement {
        AlgebraElement::new(
            (0..self.dim)
                .map(|_| rng.random_range(-scale..=scale))
                .collect::<Vec<_>>(),
        )
    }

    /// A group element `exp(X)` with `X` drawn from a box wide enough to
    /// reach every conjugacy class.
    pub fn random_group_element<R: Rng + ?Sized>(&self, rng: &mut R) -> CMatrix {
        let x = self.random_element(rng, 2.0 * std::f64::consts::PI);
        self.exp(&x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn su2() -> &'static GroupSpec {
        GroupId::Su2.spec()
    }
    fn su3() -> &'static GroupSpec {
        GroupId::Su3.spec()
    }

    #[test]
    fn commutators_reproduce_structure_constants() {
        for spec in [su2(), su3()] {
            for a in 0..spec.dim {
                for b in 0..spec.dim {
                    let comm = &spec.basis[a] * &spec.basis[b] - &spec.basis[b] * &spec.basis[a];
                    let mut rhs = CMatrix::zeros(spec.n, spec.n);
                    for c in 0..spec.dim {
                        rhs += &spec.basis[c] * C64::new(spec.f(a, b, c), 0.0);
                    }
                    let dev = (comm - rhs).iter().fold(0.0f64, |m, z| m.max(z.norm()));
                    assert!(dev <= 1e-12, "{} [{a},{b}] off by {dev}", spec.id);
                }
            }
        }
    }

    #[test]
    fn structure_constants_are_totally_antisymmetric() {
        for spec in [su2(), su3()] {
            let d = spec.dim;
            for a in 0..d {
                for b in 0..d {
                    for c in 0..d {
                        let f = spec.f(a, b, c);
                        assert_abs_diff_eq!(f, -spec.f(b, a, c), epsilon = 1e-14);
                        assert_abs_diff_eq!(f, -spec.f(a, c, b), epsilon = 1e-14);
                        assert_abs_diff_eq!(f, spec.f(b, c, a), epsilon = 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn basis_is_orthogonal_under_trace() {
        for spec in [su2(), su3()] {
            for a in 0..spec.dim {
                assert_abs_diff_eq!(spec.basis[a].trace().norm(), 0.0, epsilon = 1e-15);
                for b in 0..spec.dim {
                    let tr = (&spec.basis[a] * spec.basis[b].adjoint()).trace();
                    let want = if a == b { 0.5 } else { 0.0 };
                    assert_abs_diff_eq!(tr.re, want, epsilon = 1e-15);
                    assert_abs_diff_eq!(tr.im, 0.0, epsilon = 1e-15);
                }
            }
        }
    }

    #[test]
    fn su2_constants_are_levi_civita() {
        assert_eq!(su2().f(0, 1, 2), 1.0);
        assert_eq!(su2().nonzero_structure_constants().len(), 6);
    }

    #[test]
    fn su3_constants_match_gell_mann_table() {
        let s = 3f64.sqrt() / 2.0;
        let table = [
            (1, 2, 3, 1.0),
            (1, 4, 7, 0.5),
            (1, 5, 6, -0.5),
            (2, 4, 6, 0.5),
            (2, 5, 7, 0.5),
            (3, 4, 5, 0.5),
            (3, 6, 7, -0.5),
            (4, 5, 8, s),
            (6, 7, 8, s),
        ];
        for (a, b, c, v) in table {
            assert_abs_diff_eq!(su3().f(a - 1, b - 1, c - 1), v, epsilon = 1e-14);
        }
        // 9 independent entries, 6 permutations each.
        assert_eq!(su3().nonzero_structure_constants().len(), 54);
    }

    #[test]
    fn bracket_of_t1_t2_is_t3() {
        let z = su2().bracket(&su2().generator(0), &su2().generator(1)).unwrap();
        assert_eq!(z, su2().generator(2));
    }

    #[test]
    fn bracket_t4_t5_in_su3() {
        let z = su3().bracket(&su3().generator(3), &su3().generator(4)).unwrap();
        let mut want = vec![0.0; 8];
        want[2] = 0.5;
        want[7] = 3f64.sqrt() / 2.0;
        for (g, w) in z.coeffs.iter().zip(want) {
            assert_abs_diff_eq!(*g, w, epsilon = 1e-14);
        }
    }

    #[test]
    fn bracket_rejects_mismatched_groups() {
        let err = su2().bracket(&su2().generator(0), &su3().generator(0));
        assert!(matches!(err, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn generated_subalgebra_examples() {
        assert_eq!(su2().generated_subalgebra(&[]).dim(), 0);
        assert_eq!(su2().generated_subalgebra(&[su2().zero()]).dim(), 0);
        let full = su2().generated_subalgebra(&[su2().generator(0), su2().generator(1)]);
        assert_eq!(full.dim(), 3);
        let v = su3().generated_subalgebra(&[su3().generator(3), su3().generator(4)]);
        assert_eq!(v.dim(), 3);
        assert!(v.orthonormality_residual() < 1e-12);
        assert!(v.closure_residual(su3()) < 1e-12);
    }

    /// Bracket-closure oracle: span the generators, then repeatedly add every
    /// pairwise bracket of the current spanning set and recompute the rank.
    fn closure_dim_oracle(spec: &GroupSpec, gens: &[AlgebraElement]) -> usize {
        let mut set: Vec<AlgebraElement> = gens.to_vec();
        let rank_of = |set: &[AlgebraElement]| {
            if set.is_empty() {
                return 0;
            }
            let m = DMatrix::from_fn(spec.dim, set.len(), |i, j| set[j].coeffs[i]);
            linalg::rank(&m)
        };
        let mut r = rank_of(&set);
        loop {
            let mut next = set.clone();
            for x in &set {
                for y in &set {
                    next.push(spec.bracket(x, y).unwrap());
                }
            }
            let nr = rank_of(&next);
            set = next;
            if nr == r {
                return r;
            }
            r = nr;
            if set.len() > 200 {
                let m = DMatrix::from_fn(spec.dim, set.len(), |i, j| set[j].coeffs[i]);
                let b = linalg::range_basis(&m);
                set = b
                    .column_iter()
                    .map(|c| AlgebraElement { coeffs: c.into_owned() })
                    .collect();
            }
        }
    }

    #[test]
    fn generated_subalgebra_agrees_with_closure_oracle() {
        let s3 = su3();
        let cases: Vec<Vec<AlgebraElement>> = vec![
            vec![s3.generator(3), s3.generator(4)],
            vec![s3.generator(0), s3.generator(7)],
            vec![s3.generator(0), s3.generator(3)],
            vec![s3.generator(2), s3.generator(7)],
            vec![&s3.generator(0) + &s3.generator(5)],
        ];
        for gens in cases {
            assert_eq!(
                s3.generated_subalgebra(&gens).dim(),
                closure_dim_oracle(s3, &gens),
                "gens {gens:?}"
            );
        }
    }

    #[test]
    fn centralizer_examples() {
        assert_eq!(su2().centralizer(&[]).dim(), 3);
        assert_eq!(su3().centralizer(&[]).dim(), 8);
        let c = su2().centralizer(&[su2().generator(0)]);
        assert_eq!(c.dim(), 1);
        assert!(c.contains(&su2().generator(0), 1e-12));

        let vspin = su3().generated_subalgebra(&[su3().generator(3), su3().generator(4)]);
        let c = su3().centralizer(vspin.basis_vectors());
        assert_eq!(c.dim(), 1);
        let mut dir = vec![0.0; 8];
        dir[2] = 3f64.sqrt();
        dir[7] = -1.0;
        assert!(c.contains(&AlgebraElement::new(dir), 1e-10));
    }

    #[test]
    fn centralizer_of_cartan_generators() {
        // t3 and t8 each commute with the Cartan subalgebra; t8 also with su(2)_I.
        assert_eq!(su3().centralizer(&[su3().generator(2)]).dim(), 2);
        assert_eq!(su3().centralizer(&[su3().generator(7)]).dim(), 4);
        assert_eq!(
            su3()
                .centralizer(&[su3().generator(2), su3().generator(7)])
                .dim(),
            2
        );
    }

    #[test]
    fn adjoint_rotation_about_t3() {
        let spec = su2();
        let theta: f64 = 0.7;
        let g = spec.exp(&(&spec.generator(2) * theta));
        let r = spec.adjoint_rotate(&spec.generator(0), &g).unwrap();
        assert_abs_diff_eq!(r.coeffs[0], theta.cos(), epsilon = 1e-14);
        assert_abs_diff_eq!(r.coeffs[1], theta.sin(), epsilon = 1e-14);
        assert_abs_diff_eq!(r.coeffs[2], 0.0, epsilon = 1e-14);

        let id = CMatrix::identity(2, 2);
        let x = AlgebraElement::new(vec![0.3, -1.2, 2.0]);
        assert_eq!(spec.adjoint_rotate(&x, &id).unwrap(), x);
    }

    #[test]
    fn adjoint_rotation_rejects_non_unitary() {
        let g = CMatrix::identity(2, 2) * C64::new(1.1, 0.0);
        assert!(su2().adjoint_rotate(&su2().generator(0), &g).is_err());
        let g3 = CMatrix::identity(3, 3);
        assert!(su2().adjoint_rotate(&su2().generator(0), &g3).is_err());
    }

    #[test]
    fn adjoint_matrix_matches_direct_conjugation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for spec in [su2(), su3()] {
            let g = spec.random_group_element(&mut rng);
            let x = spec.random_element(&mut rng, 1.0);
            let via_matrix = spec.adjoint_matrix(&g).unwrap() * &x.coeffs;
            let direct = spec.adjoint_rotate(&x, &g).unwrap();
            assert!((via_matrix - direct.coeffs).norm() < 1e-12);
        }
    }

    #[test]
    fn exp_is_special_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for spec in [su2(), su3()] {
            for _ in 0..10 {
                let g = spec.random_group_element(&mut rng);
                let dev = (&g * g.adjoint() - CMatrix::identity(spec.n, spec.n))
                    .iter()
                    .fold(0.0f64, |m, z| m.max(z.norm()));
                assert!(dev < 1e-13);
                assert_abs_diff_eq!(g.determinant().re, 1.0, epsilon = 1e-12);
            }
        }
    }
}
