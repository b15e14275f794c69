//! Gauss-law constraint operators on a periodic cubic lattice.
//!
//! Fields live on `L^3` sites with flat layout `((site * 3) + i) * dim + a`
//! for tangent data and `site * dim + b` for dual sections; `site` is
//! `x + L (y + L z)`. Inner products carry the cell volume `h^3`, so the
//! transpose of an assembled matrix is the adjoint in the lattice metric.
//!
//! With `D_i` the stencil derivative and `D_i^T` its transpose:
//!
//! ```text
//! Gamma          = sum_i D_i E^i + g sum_i [A^i, E^i]
//! J'(a, e)       = sum_i D_i e^i + g sum_i ([Abar^i, e^i] + [a^i, Ebar^i])
//! J'^*(v)        = (g [Ebar^i, v],  D_i^T v - g [Abar^i, v])
//! gauge_var(da)  = (D_i^T da + g [da, A^i],  g [da, E^i])
//! [a ^ e]        = sum_i [a^i, e^i]
//! ```
//!
//! so that `gauge_var(-v) = JJ J'^*(v)` with `JJ (a, e) = (-e, a)`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::liealg::{AlgebraElement, CMatrix, GroupId, GroupSpec};
use crate::linalg;

pub const DEFAULT_MEMBERSHIP_TOL: f64 = 1e-8;
/// Largest `L` accepted for dense assembly, su(2).
pub const MAX_DENSE_SIZE_SU2: usize = 6;
/// Largest `L` accepted for dense assembly, su(3).
pub const MAX_DENSE_SIZE_SU3: usize = 4;
/// Entry budget for the stacked bilinear system in [`same_symmetry_tangents`].
pub const MAX_STACKED_ENTRIES: usize = 10_000_000;

/// Finite-difference rule used for `D_i`.
///
/// The central rule is antisymmetric (`D^T = -D`) but vanishes identically at
/// `L = 2` and has doubler modes at every even `L`; the forward rule has only
/// constant modes in its kernel on any `L`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stencil {
    #[default]
    Central,
    Forward,
}

impl fmt::Display for Stencil {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stencil::Central => "central",
            Stencil::Forward => "forward",
        })
    }
}

impl FromStr for Stencil {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "central" => Ok(Stencil::Central),
            "forward" => Ok(Stencil::Forward),
            _ => Err(Error::invalid(format!("unknown stencil '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub size: usize,
    pub spacing: f64,
    pub stencil: Stencil,
}

impl Lattice {
    pub fn new(size: usize, spacing: f64) -> Result<Self> {
        if size < 2 {
            return Err(Error::invalid(format!("lattice size must be >= 2, got {size}")));
        }
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::invalid(format!("lattice spacing must be positive, got {spacing}")));
        }
        Ok(Lattice {
            size,
            spacing,
            stencil: Stencil::Central,
        })
    }

    pub fn with_stencil(mut self, stencil: Stencil) -> Self {
        self.stencil = stencil;
        self
    }

    pub fn sites(&self) -> usize {
        self.size.pow(3)
    }

    /// `h^3`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(3)
    }

    pub fn coords(&self, site: usize) -> [usize; 3] {
        let l = self.size;
        [site % l, (site / l) % l, site / (l * l)]
    }

    pub fn site(&self, c: [usize; 3]) -> usize {
        let l = self.size;
        c[0] % l + l * (c[1] % l + l * (c[2] % l))
    }

    /// Periodic neighbour `step` cells along `axis`.
    pub fn shift(&self, site: usize, axis: usize, step: isize) -> usize {
        let mut c = self.coords(site);
        let l = self.size as isize;
        c[axis] = (c[axis] as isize + step).rem_euclid(l) as usize;
        self.site(c)
    }

    pub fn max_dense_size(group: GroupId) -> usize {
        match group {
            GroupId::Su2 => MAX_DENSE_SIZE_SU2,
            GroupId::Su3 => MAX_DENSE_SIZE_SU3,
        }
    }

    fn check_dense(&self, group: GroupId) -> Result<()> {
        let max = Lattice::max_dense_size(group);
        if self.size > max {
            return Err(Error::ResourceLimit(format!(
                "dense assembly for {} is limited to L <= {max}, got L = {}",
                group.name(),
                self.size
            )));
        }
        Ok(())
    }
}

#[inline]
fn field_index(site: usize, i: usize, a: usize, dim: usize) -> usize {
    (site * 3 + i) * dim + a
}

/// `out_b(x) += sum_i (D_i e^i_b)(x)`.
fn divergence_into(lat: &Lattice, dim: usize, e: &[f64], out: &mut [f64]) {
    let h = lat.spacing;
    for site in 0..lat.sites() {
        for i in 0..3 {
            let p = lat.shift(site, i, 1);
            let (m, scale) = match lat.stencil {
                Stencil::Central => (lat.shift(site, i, -1), 0.5 / h),
                Stencil::Forward => (site, 1.0 / h),
            };
            for b in 0..dim {
                out[site * dim + b] +=
                    scale * (e[field_index(p, i, b, dim)] - e[field_index(m, i, b, dim)]);
            }
        }
    }
}

/// `out^i_b(x) += (D_i^T v_b)(x)`.
fn divergence_transpose_into(lat: &Lattice, dim: usize, v: &[f64], out: &mut [f64]) {
    let h = lat.spacing;
    for site in 0..lat.sites() {
        for i in 0..3 {
            let m = lat.shift(site, i, -1);
            let (p, scale) = match lat.stencil {
                Stencil::Central => (lat.shift(site, i, 1), -0.5 / h),
                Stencil::Forward => (site, -1.0 / h),
            };
            for b in 0..dim {
                out[field_index(site, i, b, dim)] += scale * (v[p * dim + b] - v[m * dim + b]);
            }
        }
    }
}

/// `out(x) += scale * sum_i [x^i(x), y^i(x)]` for two tangent-shaped arrays.
fn wedge_into(spec: &GroupSpec, sites: usize, x: &[f64], y: &[f64], scale: f64, out: &mut [f64]) {
    let d = spec.dim;
    let mut tmp = vec![0.0; d];
    for site in 0..sites {
        tmp.fill(0.0);
        for i in 0..3 {
            let k = (site * 3 + i) * d;
            spec.bracket_into(&x[k..k + d], &y[k..k + d], &mut tmp);
        }
        for b in 0..d {
            out[site * d + b] += scale * tmp[b];
        }
    }
}

/// `out^i(x) += scale * [x^i(x), v(x)]` for tangent-shaped `x` and dual `v`.
fn bracket_with_section_into(
    spec: &GroupSpec,
    sites: usize,
    x: &[f64],
    v: &[f64],
    scale: f64,
    out: &mut [f64],
) {
    let d = spec.dim;
    let mut tmp = vec![0.0; d];
    for site in 0..sites {
        let vs = &v[site * d..(site + 1) * d];
        for i in 0..3 {
            let k = (site * 3 + i) * d;
            tmp.fill(0.0);
            spec.bracket_into(&x[k..k + d], vs, &mut tmp);
            for a in 0..d {
                out[k + a] += scale * tmp[a];
            }
        }
    }
}

/// Section of the dual algebra bundle: one `dim` vector per site.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSection {
    pub group: GroupId,
    pub v: DVector<f64>,
}

impl DualSection {
    pub fn new(group: GroupId, v: DVector<f64>) -> Result<Self> {
        if v.len() % group.dim() != 0 {
            return Err(Error::invalid(format!(
                "dual section length {} is not a multiple of {}",
                v.len(),
                group.dim()
            )));
        }
        Ok(DualSection { group, v })
    }

    pub fn zeros(group: GroupId, sites: usize) -> Self {
        DualSection {
            group,
            v: DVector::zeros(sites * group.dim()),
        }
    }

    /// The same algebra element at every site.
    pub fn constant(group: GroupId, sites: usize, x: &AlgebraElement) -> Self {
        let d = group.dim();
        DualSection {
            group,
            v: DVector::from_fn(sites * d, |k, _| x.coeffs[k % d]),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        DualSection {
            group: self.group,
            v: &self.v * c,
        }
    }

    pub fn at(&self, site: usize) -> AlgebraElement {
        let d = self.group.dim();
        AlgebraElement::new(self.v.as_slice()[site * d..(site + 1) * d].to_vec())
    }

    pub fn color_rotated(&self, g: &CMatrix) -> Result<Self> {
        let ad = self.group.spec().adjoint_matrix(g)?;
        Ok(DualSection {
            group: self.group,
            v: rotate_blocks(&ad, &self.v),
        })
    }
}

/// Perturbation `(a, e)` of a background, each shaped `(site, i, a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentPair {
    pub group: GroupId,
    pub a: DVector<f64>,
    pub e: DVector<f64>,
}

impl TangentPair {
    pub fn new(group: GroupId, a: DVector<f64>, e: DVector<f64>) -> Result<Self> {
        let block = 3 * group.dim();
        if a.len() != e.len() || a.len() % block != 0 {
            return Err(Error::invalid(format!(
                "tangent components have lengths {} and {}; both must equal a multiple of {block}",
                a.len(),
                e.len()
            )));
        }
        Ok(TangentPair { group, a, e })
    }

    pub fn zeros(group: GroupId, sites: usize) -> Self {
        let n = sites * 3 * group.dim();
        TangentPair {
            group,
            a: DVector::zeros(n),
            e: DVector::zeros(n),
        }
    }

    /// `[a; e]`.
    pub fn to_vector(&self) -> DVector<f64> {
        let n = self.a.len();
        DVector::from_fn(2 * n, |k, _| if k < n { self.a[k] } else { self.e[k - n] })
    }

    pub fn from_vector(group: GroupId, v: &DVector<f64>) -> Result<Self> {
        if v.len() % 2 != 0 {
            return Err(Error::invalid("tangent vector has odd length"));
        }
        let n = v.len() / 2;
        TangentPair::new(group, v.rows(0, n).into_owned(), v.rows(n, n).into_owned())
    }

    pub fn scaled(&self, c: f64) -> Self {
        TangentPair {
            group: self.group,
            a: &self.a * c,
            e: &self.e * c,
        }
    }

    pub fn sum(&self, other: &TangentPair) -> Result<Self> {
        check_pair_shapes(self, other)?;
        Ok(TangentPair {
            group: self.group,
            a: &self.a + &other.a,
            e: &self.e + &other.e,
        })
    }

    pub fn color_rotated(&self, g: &CMatrix) -> Result<Self> {
        let ad = self.group.spec().adjoint_matrix(g)?;
        Ok(TangentPair {
            group: self.group,
            a: rotate_blocks(&ad, &self.a),
            e: rotate_blocks(&ad, &self.e),
        })
    }
}

fn rotate_blocks(ad: &DMatrix<f64>, x: &DVector<f64>) -> DVector<f64> {
    let d = ad.nrows();
    let mut out = DVector::zeros(x.len());
    for k in 0..x.len() / d {
        let block = ad * x.rows(k * d, d);
        out.rows_mut(k * d, d).copy_from(&block);
    }
    out
}

fn check_pair_shapes(t1: &TangentPair, t2: &TangentPair) -> Result<()> {
    if t1.group != t2.group || t1.a.len() != t2.a.len() {
        return Err(Error::invalid("tangent pairs have different groups or shapes"));
    }
    Ok(())
}

/// Canonical pair `(Abar, Ebar)` on a periodic lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeBackground {
    pub group: GroupId,
    pub lattice: Lattice,
    pub a: DVector<f64>,
    pub e: DVector<f64>,
    pub coupling: f64,
}

impl LatticeBackground {
    pub fn new(group: GroupId, lattice: Lattice, a: DVector<f64>, e: DVector<f64>) -> Result<Self> {
        let n = lattice.sites() * 3 * group.dim();
        if a.len() != n || e.len() != n {
            return Err(Error::invalid(format!(
                "background arrays must have {n} entries (L^3 x 3 x {}), got {} and {}",
                group.dim(),
                a.len(),
                e.len()
            )));
        }
        Ok(LatticeBackground {
            group,
            lattice,
            a,
            e,
            coupling: 1.0,
        })
    }

    pub fn zero(group: GroupId, lattice: Lattice) -> Self {
        let n = lattice.sites() * 3 * group.dim();
        LatticeBackground {
            group,
            lattice,
            a: DVector::zeros(n),
            e: DVector::zeros(n),
            coupling: 1.0,
        }
    }

    /// Spatially constant `A^i` and `E^i`.
    pub fn constant(
        group: GroupId,
        lattice: Lattice,
        a: &[AlgebraElement; 3],
        e: &[AlgebraElement; 3],
    ) -> Result<Self> {
        let d = group.dim();
        if a.iter().chain(e.iter()).any(|x| x.dim() != d) {
            return Err(Error::invalid(format!("constant components must have dimension {d}")));
        }
        let n = lattice.sites() * 3 * d;
        let fill = |x: &[AlgebraElement; 3]| DVector::from_fn(n, |k, _| x[(k / d) % 3].coeffs[k % d]);
        LatticeBackground::new(group, lattice, fill(a), fill(e))
    }

    /// Entries uniform in `[-amplitude, amplitude]`.
    pub fn random<R: Rng + ?Sized>(group: GroupId, lattice: Lattice, rng: &mut R, amplitude: f64) -> Self {
        let n = lattice.sites() * 3 * group.dim();
        let mut draw = || DVector::from_fn(n, |_, _| rng.random_range(-amplitude..=amplitude));
        let a = draw();
        let e = draw();
        LatticeBackground {
            group,
            lattice,
            a,
            e,
            coupling: 1.0,
        }
    }

    pub fn with_coupling(mut self, g: f64) -> Self {
        self.coupling = g;
        self
    }

    pub fn spec(&self) -> &'static GroupSpec {
        self.group.spec()
    }

    pub fn sites(&self) -> usize {
        self.lattice.sites()
    }

    /// Length of `a` (and of `e`) in a tangent pair.
    pub fn field_len(&self) -> usize {
        self.sites() * 3 * self.group.dim()
    }

    pub fn dual_len(&self) -> usize {
        self.sites() * self.group.dim()
    }

    pub fn zero_tangent(&self) -> TangentPair {
        TangentPair::zeros(self.group, self.sites())
    }

    pub fn zero_dual(&self) -> DualSection {
        DualSection::zeros(self.group, self.sites())
    }

    pub fn random_tangent<R: Rng + ?Sized>(&self, rng: &mut R, amplitude: f64) -> TangentPair {
        let n = self.field_len();
        let mut draw = || DVector::from_fn(n, |_, _| rng.random_range(-amplitude..=amplitude));
        let a = draw();
        let e = draw();
        TangentPair { group: self.group, a, e }
    }

    pub fn random_dual<R: Rng + ?Sized>(&self, rng: &mut R, amplitude: f64) -> DualSection {
        DualSection {
            group: self.group,
            v: DVector::from_fn(self.dual_len(), |_, _| rng.random_range(-amplitude..=amplitude)),
        }
    }

    /// `(A + eps a, E + eps e)`.
    pub fn displaced(&self, t: &TangentPair, eps: f64) -> Result<Self> {
        self.check_tangent(t)?;
        Ok(LatticeBackground {
            a: &self.a + &t.a * eps,
            e: &self.e + &t.e * eps,
            ..self.clone()
        })
    }

    pub fn color_rotated(&self, g: &CMatrix) -> Result<Self> {
        let ad = self.spec().adjoint_matrix(g)?;
        Ok(LatticeBackground {
            a: rotate_blocks(&ad, &self.a),
            e: rotate_blocks(&ad, &self.e),
            ..self.clone()
        })
    }

    /// `h^3 (a.a' + e.e')`.
    pub fn tangent_inner(&self, t: &TangentPair, s: &TangentPair) -> f64 {
        self.lattice.cell_volume() * (t.a.dot(&s.a) + t.e.dot(&s.e))
    }

    /// `h^3 v.w`.
    pub fn dual_inner(&self, v: &DualSection, w: &DualSection) -> f64 {
        self.lattice.cell_volume() * v.v.dot(&w.v)
    }

    pub fn dual_norm(&self, v: &DualSection) -> f64 {
        self.dual_inner(v, v).sqrt()
    }

    pub fn tangent_norm(&self, t: &TangentPair) -> f64 {
        self.tangent_inner(t, t).sqrt()
    }

    fn check_tangent(&self, t: &TangentPair) -> Result<()> {
        if t.group != self.group || t.a.len() != self.field_len() || t.e.len() != self.field_len() {
            return Err(Error::invalid(format!(
                "tangent pair does not match the {} background on L = {}",
                self.group.name(),
                self.lattice.size
            )));
        }
        Ok(())
    }

    fn check_dual(&self, v: &DualSection) -> Result<()> {
        if v.group != self.group || v.v.len() != self.dual_len() {
            return Err(Error::invalid(format!(
                "dual section does not match the {} background on L = {}",
                self.group.name(),
                self.lattice.size
            )));
        }
        Ok(())
    }
}

/// `Gamma = D.E + g sum_i [A^i, E^i]`.
pub fn momentum_map(bg: &LatticeBackground) -> DualSection {
    let mut out = bg.zero_dual();
    let d = bg.group.dim();
    divergence_into(&bg.lattice, d, bg.e.as_slice(), out.v.as_mut_slice());
    wedge_into(bg.spec(), bg.sites(), bg.a.as_slice(), bg.e.as_slice(), bg.coupling, out.v.as_mut_slice());
    out
}

/// Linearisation of [`momentum_map`] at `bg` applied to `t`.
pub fn jprime(bg: &LatticeBackground, t: &TangentPair) -> Result<DualSection> {
    bg.check_tangent(t)?;
    let mut out = bg.zero_dual();
    let (spec, n, g) = (bg.spec(), bg.sites(), bg.coupling);
    let v = out.v.as_mut_slice();
    divergence_into(&bg.lattice, spec.dim, t.e.as_slice(), v);
    wedge_into(spec, n, bg.a.as_slice(), t.e.as_slice(), g, v);
    wedge_into(spec, n, t.a.as_slice(), bg.e.as_slice(), g, v);
    Ok(out)
}

/// Adjoint of [`jprime`] in the lattice metrics.
pub fn jprime_adjoint(bg: &LatticeBackground, v: &DualSection) -> Result<TangentPair> {
    bg.check_dual(v)?;
    let mut out = bg.zero_tangent();
    let (spec, n, g) = (bg.spec(), bg.sites(), bg.coupling);
    bracket_with_section_into(spec, n, bg.e.as_slice(), v.v.as_slice(), g, out.a.as_mut_slice());
    divergence_transpose_into(&bg.lattice, spec.dim, v.v.as_slice(), out.e.as_mut_slice());
    bracket_with_section_into(spec, n, bg.a.as_slice(), v.v.as_slice(), -g, out.e.as_mut_slice());
    Ok(out)
}

/// `(a, e) -> (-e, a)`.
pub fn apply_complex_structure(t: &TangentPair) -> TangentPair {
    TangentPair {
        group: t.group,
        a: -&t.e,
        e: t.a.clone(),
    }
}

/// Polarised quadratic term `[a1 ^ e2] + [a2 ^ e1]`.
pub fn quadratic_form(t1: &TangentPair, t2: &TangentPair) -> Result<DualSection> {
    check_pair_shapes(t1, t2)?;
    let spec = t1.group.spec();
    let sites = t1.a.len() / (3 * spec.dim);
    let mut out = DualSection::zeros(t1.group, sites);
    wedge_into(spec, sites, t1.a.as_slice(), t2.e.as_slice(), 1.0, out.v.as_mut_slice());
    wedge_into(spec, sites, t2.a.as_slice(), t1.e.as_slice(), 1.0, out.v.as_mut_slice());
    Ok(out)
}

/// `[a ^ e]`, half the diagonal of [`quadratic_form`].
pub fn wedge(t: &TangentPair) -> DualSection {
    let spec = t.group.spec();
    let sites = t.a.len() / (3 * spec.dim);
    let mut out = DualSection::zeros(t.group, sites);
    wedge_into(spec, sites, t.a.as_slice(), t.e.as_slice(), 1.0, out.v.as_mut_slice());
    out
}

/// Infinitesimal gauge transformation generated by `dalpha`.
pub fn gauge_variation(bg: &LatticeBackground, dalpha: &DualSection) -> Result<TangentPair> {
    bg.check_dual(dalpha)?;
    let mut out = bg.zero_tangent();
    let (spec, n, g) = (bg.spec(), bg.sites(), bg.coupling);
    divergence_transpose_into(&bg.lattice, spec.dim, dalpha.v.as_slice(), out.a.as_mut_slice());
    // [da, X] = -[X, da]
    bracket_with_section_into(spec, n, bg.a.as_slice(), dalpha.v.as_slice(), -g, out.a.as_mut_slice());
    bracket_with_section_into(spec, n, bg.e.as_slice(), dalpha.v.as_slice(), -g, out.e.as_mut_slice());
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintReport {
    /// `|J'(JJ t)|`.
    pub slice_residual: f64,
    /// `|J'(t)|`.
    pub linear_residual: f64,
    /// `|[a ^ e]|`.
    pub quadratic_residual: f64,
    pub tolerance: f64,
    pub member: bool,
}

/// Evaluates the slice, linearised and quadratic conditions on `t`.
pub fn qc_check(bg: &LatticeBackground, t: &TangentPair, tol: f64) -> Result<ConstraintReport> {
    if !(tol >= 0.0) {
        return Err(Error::invalid("tolerance must be non-negative"));
    }
    let slice_residual = bg.dual_norm(&jprime(bg, &apply_complex_structure(t))?);
    let linear_residual = bg.dual_norm(&jprime(bg, t)?);
    let quadratic_residual = bg.dual_norm(&wedge(t));
    Ok(ConstraintReport {
        slice_residual,
        linear_residual,
        quadratic_residual,
        tolerance: tol,
        member: slice_residual <= tol && linear_residual <= tol && quadratic_residual <= tol,
    })
}

/// Dense `J'` (`dual_len x 2 field_len`) on the `[a; e]` coordinates.
pub fn jprime_matrix(bg: &LatticeBackground) -> Result<DMatrix<f64>> {
    bg.lattice.check_dense(bg.group)?;
    let n = bg.field_len();
    let mut m = DMatrix::zeros(bg.dual_len(), 2 * n);
    let mut unit = DVector::zeros(2 * n);
    for k in 0..2 * n {
        unit[k] = 1.0;
        let col = jprime(bg, &TangentPair::from_vector(bg.group, &unit)?)?;
        m.set_column(k, &col.v);
        unit[k] = 0.0;
    }
    Ok(m)
}

/// Dense `J'^*` (`2 field_len x dual_len`), assembled from [`jprime_adjoint`].
pub fn jprime_adjoint_matrix(bg: &LatticeBackground) -> Result<DMatrix<f64>> {
    bg.lattice.check_dense(bg.group)?;
    let mut m = DMatrix::zeros(2 * bg.field_len(), bg.dual_len());
    let mut unit = bg.zero_dual();
    for k in 0..bg.dual_len() {
        unit.v[k] = 1.0;
        m.set_column(k, &jprime_adjoint(bg, &unit)?.to_vector());
        unit.v[k] = 0.0;
    }
    Ok(m)
}

/// Orthonormal (lattice metric) basis of `Ker J'^*`, the infinitesimal
/// symmetries of the background.
pub fn symmetry_space(bg: &LatticeBackground) -> Result<Vec<DualSection>> {
    let adj = jprime_adjoint_matrix(bg)?;
    let kernel = linalg::nullspace(&adj);
    let scale = bg.lattice.cell_volume().powf(-0.5);
    Ok(kernel
        .column_iter()
        .map(|c| DualSection {
            group: bg.group,
            v: c.into_owned() * scale,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplittingReport {
    /// `6 dim L^3`.
    pub dim_total: usize,
    /// `dim L^3`.
    pub dim_dual: usize,
    pub dim_ker_jprime: usize,
    pub dim_im_jprime_adj: usize,
    pub dim_ker_jprime_adj: usize,
    pub dim_im_jprime: usize,
    /// Largest `|<<k, r>>|` over orthonormal bases of `Ker J'` and `Im J'^*`.
    pub orth_residual: f64,
    /// Largest entry of `J'^* - J'^T`.
    pub adjoint_residual: f64,
}

impl SplittingReport {
    pub fn tangent_split_holds(&self) -> bool {
        self.dim_ker_jprime + self.dim_im_jprime_adj == self.dim_total
    }

    pub fn dual_split_holds(&self) -> bool {
        self.dim_ker_jprime_adj + self.dim_im_jprime == self.dim_dual
    }
}

/// Subspace bases behind the splittings.
struct Splitting {
    report: SplittingReport,
    ker_jprime: DMatrix<f64>,
    im_jprime_adj: DMatrix<f64>,
}

fn splitting(bg: &LatticeBackground) -> Result<Splitting> {
    let jp = jprime_matrix(bg)?;
    let adj = jprime_adjoint_matrix(bg)?;
    let ker_jprime = linalg::nullspace(&jp);
    let im_jprime_adj = linalg::range_basis(&adj);
    let ker_adj = linalg::nullspace(&adj);
    let orth = ker_jprime.transpose() * &im_jprime_adj;
    let report = SplittingReport {
        dim_total: jp.ncols(),
        dim_dual: jp.nrows(),
        dim_ker_jprime: ker_jprime.ncols(),
        dim_im_jprime_adj: im_jprime_adj.ncols(),
        dim_ker_jprime_adj: ker_adj.ncols(),
        dim_im_jprime: linalg::rank(&jp),
        orth_residual: linalg::max_abs(&orth),
        adjoint_residual: linalg::max_abs(&(&adj - jp.transpose())),
    };
    Ok(Splitting {
        report,
        ker_jprime,
        im_jprime_adj,
    })
}

/// Ranks and orthogonality of `Ker J' + Im J'^*` and `Ker J'^* + Im J'`.
pub fn verify_splittings(bg: &LatticeBackground) -> Result<SplittingReport> {
    Ok(splitting(bg)?.report)
}

/// Projections of `t` onto `Ker J'` and `Im J'^*`, computed independently.
pub fn split_tangent(bg: &LatticeBackground, t: &TangentPair) -> Result<(TangentPair, TangentPair)> {
    bg.check_tangent(t)?;
    let s = splitting(bg)?;
    let x = t.to_vector();
    let k = &s.ker_jprime * (s.ker_jprime.transpose() * &x);
    let r = &s.im_jprime_adj * (s.im_jprime_adj.transpose() * &x);
    Ok((
        TangentPair::from_vector(bg.group, &k)?,
        TangentPair::from_vector(bg.group, &r)?,
    ))
}

/// Basis of `{t in Ker(J' JJ) & Ker J' : quadratic_form(t, s) = 0 for all such s}`.
pub fn same_symmetry_tangents(bg: &LatticeBackground) -> Result<Vec<TangentPair>> {
    let jp = jprime_matrix(bg)?;
    let (dual, n) = (bg.dual_len(), bg.field_len());
    // J'(JJ (a, e)) = J'(-e, a)
    let mut stacked = DMatrix::zeros(2 * dual, 2 * n);
    stacked.view_mut((0, 0), (dual, n)).copy_from(&jp.columns(n, n));
    stacked.view_mut((0, n), (dual, n)).copy_from(&(-jp.columns(0, n)));
    stacked.view_mut((dual, 0), (dual, 2 * n)).copy_from(&jp);
    let basis = linalg::nullspace(&stacked);
    let k = basis.ncols();
    if k == 0 {
        return Ok(Vec::new());
    }
    let entries = k.saturating_mul(k).saturating_mul(dual);
    if entries > MAX_STACKED_ENTRIES {
        return Err(Error::ResourceLimit(format!(
            "bilinear system has {entries} entries, limit is {MAX_STACKED_ENTRIES}"
        )));
    }
    let pairs: Vec<TangentPair> = basis
        .column_iter()
        .map(|c| TangentPair::from_vector(bg.group, &c.into_owned()))
        .collect::<Result<_>>()?;
    let mut m = DMatrix::zeros(k * dual, k);
    for j in 0..k {
        for c in j..k {
            let q = quadratic_form(&pairs[c], &pairs[j])?;
            m.view_mut((j * dual, c), (dual, 1)).copy_from(&q.v);
            if c != j {
                m.view_mut((c * dual, j), (dual, 1)).copy_from(&q.v);
            }
        }
    }
    let coeffs = linalg::nullspace(&m);
    let solutions = &basis * coeffs;
    solutions
        .column_iter()
        .map(|c| TangentPair::from_vector(bg.group, &c.into_owned()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn lat(l: usize) -> Lattice {
        Lattice::new(l, 1.0).unwrap()
    }

    /// `J'` assembled column by column from central differences of the
    /// momentum map.
    fn numerical_jprime_matrix(bg: &LatticeBackground) -> DMatrix<f64> {
        let n = bg.field_len();
        let mut m = DMatrix::zeros(bg.dual_len(), 2 * n);
        let mut unit = DVector::zeros(2 * n);
        let eps = 1e-6;
        for k in 0..2 * n {
            unit[k] = 1.0;
            let t = TangentPair::from_vector(bg.group, &unit).unwrap();
            let plus = momentum_map(&bg.displaced(&t, eps).unwrap()).v;
            let minus = momentum_map(&bg.displaced(&t, -eps).unwrap()).v;
            m.set_column(k, &((plus - minus) / (2.0 * eps)));
            unit[k] = 0.0;
        }
        m
    }

    #[test]
    fn lattice_validation_and_wrapping() {
        assert!(Lattice::new(1, 1.0).is_err());
        assert!(Lattice::new(3, 0.0).is_err());
        let l = lat(3);
        assert_eq!(l.shift(0, 0, -1), 2);
        assert_eq!(l.shift(2, 0, 1), 0);
        assert_eq!(l.shift(0, 2, -1), 18);
        for s in 0..27 {
            assert_eq!(l.site(l.coords(s)), s);
        }
    }

    #[test]
    fn momentum_map_vanishes_without_e() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut bg = LatticeBackground::random(GroupId::Su2, lat(3), &mut rng, 1.0);
        bg.e.fill(0.0);
        assert!(momentum_map(&bg).v.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn momentum_map_aligned_constant_fields() {
        let t3 = AlgebraElement::unit(3, 2);
        let a = [&t3 * 0.4, &t3 * -1.0, &t3 * 2.0];
        let e = [&t3 * 1.5, &t3 * 0.2, &t3 * 0.0];
        let bg = LatticeBackground::constant(GroupId::Su2, lat(3), &a, &e).unwrap();
        assert!(momentum_map(&bg).v.amax() < 1e-15);
    }

    #[test]
    fn momentum_map_is_color_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for group in [GroupId::Su2, GroupId::Su3] {
            let bg = LatticeBackground::random(group, lat(2), &mut rng, 1.0);
            let g = group.spec().random_group_element(&mut rng);
            let lhs = momentum_map(&bg.color_rotated(&g).unwrap());
            let rhs = momentum_map(&bg).color_rotated(&g).unwrap();
            assert!((lhs.v - rhs.v).amax() < 1e-12);
        }
    }

    #[test]
    fn jprime_matches_finite_difference_linearisation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let bg = LatticeBackground::random(GroupId::Su2, lat(3), &mut rng, 1.0).with_coupling(0.8);
        let t = bg.random_tangent(&mut rng, 1.0);
        let j = jprime(&bg, &t).unwrap();
        let base = momentum_map(&bg);
        let mut last = f64::INFINITY;
        for eps in [1e-2, 1e-3, 1e-4] {
            let moved = momentum_map(&bg.displaced(&t, eps).unwrap());
            let fd = (moved.v - &base.v) / eps;
            let err = (fd - &j.v).norm();
            assert!(err < last);
            // the error is exactly eps * g |[a ^ e]|
            let quad = bg.coupling * eps * wedge(&t).v.norm();
            assert!((err - quad).abs() < 1e-8 * (1.0 + quad));
            last = err;
        }
        let numeric = numerical_jprime_matrix(&bg);
        assert!((numeric - jprime_matrix(&bg).unwrap()).amax() < 1e-8);
    }

    #[test]
    fn zero_background_operators_reduce_to_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let bg = LatticeBackground::zero(GroupId::Su3, lat(3));
        let t = bg.random_tangent(&mut rng, 1.0);
        let mut div = bg.zero_dual();
        divergence_into(&bg.lattice, 8, t.e.as_slice(), div.v.as_mut_slice());
        assert_eq!(jprime(&bg, &t).unwrap(), div);
        let v = bg.random_dual(&mut rng, 1.0);
        let adj = jprime_adjoint(&bg, &v).unwrap();
        assert!(adj.a.iter().all(|&x| x == 0.0));
        // central rule: D^T = -D, a backward-minus-forward gradient
        let l = bg.lattice;
        for site in 0..l.sites() {
            for i in 0..3 {
                for b in 0..8 {
                    let g = (v.v[l.shift(site, i, 1) * 8 + b] - v.v[l.shift(site, i, -1) * 8 + b]) / 2.0;
                    assert!((adj.e[field_index(site, i, b, 8)] + g).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn adjoint_identity_both_stencils_and_spacings() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (group, stencil, h) in [
            (GroupId::Su2, Stencil::Central, 1.0),
            (GroupId::Su2, Stencil::Forward, 0.5),
            (GroupId::Su3, Stencil::Central, 0.7),
            (GroupId::Su3, Stencil::Forward, 1.0),
        ] {
            let l = Lattice::new(3, h).unwrap().with_stencil(stencil);
            let bg = LatticeBackground::random(group, l, &mut rng, 1.0).with_coupling(1.3);
            for _ in 0..5 {
                let t = bg.random_tangent(&mut rng, 1.0);
                let v = bg.random_dual(&mut rng, 1.0);
                let lhs = bg.dual_inner(&jprime(&bg, &t).unwrap(), &v);
                let rhs = bg.tangent_inner(&t, &jprime_adjoint(&bg, &v).unwrap());
                assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()), "{lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn complex_structure_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let bg = LatticeBackground::zero(GroupId::Su2, lat(2));
        let t = bg.random_tangent(&mut rng, 1.0);
        let s = bg.random_tangent(&mut rng, 1.0);
        let jjt = apply_complex_structure(&apply_complex_structure(&t));
        assert_eq!(jjt, t.scaled(-1.0));
        let lhs = bg.tangent_inner(&apply_complex_structure(&t), &apply_complex_structure(&s));
        assert!((lhs - bg.tangent_inner(&t, &s)).abs() < 1e-12);
        let z = bg.zero_tangent();
        assert_eq!(apply_complex_structure(&z).a.amax(), 0.0);
    }

    #[test]
    fn quadratic_form_symmetry_and_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let bg = LatticeBackground::zero(GroupId::Su3, lat(2));
        let t1 = bg.random_tangent(&mut rng, 1.0);
        let t2 = bg.random_tangent(&mut rng, 1.0);
        let q12 = quadratic_form(&t1, &t2).unwrap();
        let q21 = quadratic_form(&t2, &t1).unwrap();
        assert!((q12.v - q21.v).amax() < 1e-14);
        let diag = quadratic_form(&t1, &t1).unwrap();
        assert!((diag.v - wedge(&t1).v * 2.0).amax() < 1e-14);
    }

    #[test]
    fn quadratic_form_of_aligned_pair_vanishes() {
        let l = lat(2);
        let n = l.sites() * 3 * 3;
        let a = DVector::from_fn(n, |k, _| if k % 3 == 2 { (k as f64).sin() } else { 0.0 });
        let e = DVector::from_fn(n, |k, _| if k % 3 == 2 { (k as f64).cos() } else { 0.0 });
        let t = TangentPair::new(GroupId::Su2, a, e).unwrap();
        assert_eq!(quadratic_form(&t, &t).unwrap().v.amax(), 0.0);
    }

    #[test]
    fn qc_check_zero_and_mismatch() {
        let bg = LatticeBackground::zero(GroupId::Su2, lat(3));
        let r = qc_check(&bg, &bg.zero_tangent(), DEFAULT_MEMBERSHIP_TOL).unwrap();
        assert!(r.member);
        assert_eq!(r.slice_residual + r.linear_residual + r.quadratic_residual, 0.0);
        let wrong = TangentPair::zeros(GroupId::Su2, 8);
        assert!(matches!(qc_check(&bg, &wrong, 1e-8), Err(Error::InvalidInput(_))));
        assert!(jprime(&bg, &wrong).is_err());
    }

    /// Plane waves `a^1(y), e^1(z)` are divergence-free for any stencil.
    fn transverse_pair(l: &Lattice, ca: usize, ce: usize) -> TangentPair {
        let d = 3;
        let mut a = DVector::zeros(l.sites() * 3 * d);
        let mut e = a.clone();
        let k = 2.0 * std::f64::consts::PI / l.size as f64;
        for site in 0..l.sites() {
            let [_, y, z] = l.coords(site);
            a[field_index(site, 0, ca, d)] = (k * y as f64).sin() + 0.5;
            e[field_index(site, 0, ce, d)] = (k * z as f64).cos() - 0.25;
        }
        TangentPair::new(GroupId::Su2, a, e).unwrap()
    }

    #[test]
    fn qc_check_discriminates_quadratic_condition() {
        let l = lat(4);
        let bg = LatticeBackground::zero(GroupId::Su2, l);
        let aligned = qc_check(&bg, &transverse_pair(&l, 2, 2), 1e-8).unwrap();
        assert!(aligned.member);
        let crossed = qc_check(&bg, &transverse_pair(&l, 0, 1), 1e-8).unwrap();
        assert!(!crossed.member);
        assert!(crossed.slice_residual <= 1e-8 && crossed.linear_residual <= 1e-8);
        assert!(crossed.quadratic_residual > 1e-2);
    }

    #[test]
    fn symmetry_space_dimensions() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for group in [GroupId::Su2, GroupId::Su3] {
            let zero = LatticeBackground::zero(group, lat(3));
            assert_eq!(symmetry_space(&zero).unwrap().len(), group.dim());
        }
        let generic = LatticeBackground::random(GroupId::Su2, lat(3), &mut rng, 1.0);
        assert_eq!(symmetry_space(&generic).unwrap().len(), 0);

        // A, E proportional to t3 with varying amplitudes
        let l = lat(3);
        let n = l.sites() * 9;
        let mut bg = LatticeBackground::zero(GroupId::Su2, l);
        bg.a = DVector::from_fn(n, |k, _| if k % 3 == 2 { rng.random_range(-1.0..1.0) } else { 0.0 });
        bg.e = DVector::from_fn(n, |k, _| if k % 3 == 2 { rng.random_range(-1.0..1.0) } else { 0.0 });
        let sym = symmetry_space(&bg).unwrap();
        assert_eq!(sym.len(), 1);
        let expected = DualSection::constant(GroupId::Su2, l.sites(), &AlgebraElement::unit(3, 2));
        let overlap = bg.dual_inner(&sym[0], &expected).abs() / bg.dual_norm(&expected);
        assert!((overlap - 1.0).abs() < 1e-10);
        assert!(jprime_adjoint(&bg, &expected).unwrap().to_vector().amax() < 1e-14);
    }

    #[test]
    fn splittings_on_small_zero_background() {
        let bg = LatticeBackground::zero(GroupId::Su2, lat(2).with_stencil(Stencil::Forward));
        let r = verify_splittings(&bg).unwrap();
        assert_eq!(r.dim_total, 144);
        assert_eq!(r.dim_dual, 24);
        assert_eq!(r.dim_ker_jprime_adj, 3);
        assert_eq!(r.dim_im_jprime, 21);
        assert!(r.tangent_split_holds() && r.dual_split_holds());

        // the central rule is identically zero at L = 2
        let central = verify_splittings(&LatticeBackground::zero(GroupId::Su2, lat(2))).unwrap();
        assert_eq!(central.dim_ker_jprime_adj, 24);
    }

    #[test]
    fn splittings_on_random_backgrounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for stencil in [Stencil::Central, Stencil::Forward] {
            let bg = LatticeBackground::random(GroupId::Su2, lat(3).with_stencil(stencil), &mut rng, 1.0);
            let r = verify_splittings(&bg).unwrap();
            assert!(r.tangent_split_holds() && r.dual_split_holds(), "{r:?}");
            assert!(r.orth_residual <= 1e-8);
            assert!(r.adjoint_residual <= 1e-12);
            assert_eq!(r.dim_ker_jprime_adj, 0);
        }
    }

    #[test]
    fn tangent_space_decomposes() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let bg = LatticeBackground::random(GroupId::Su2, lat(2).with_stencil(Stencil::Forward), &mut rng, 1.0);
        let t = bg.random_tangent(&mut rng, 1.0);
        let (k, r) = split_tangent(&bg, &t).unwrap();
        let rest = t.sum(&k.scaled(-1.0)).unwrap().sum(&r.scaled(-1.0)).unwrap();
        assert!(bg.tangent_norm(&rest) <= 1e-9 * bg.tangent_norm(&t));
        assert!(bg.dual_norm(&jprime(&bg, &k).unwrap()) < 1e-9);
    }

    #[test]
    fn dense_size_caps() {
        let bg = LatticeBackground::zero(GroupId::Su3, lat(5));
        assert!(matches!(symmetry_space(&bg), Err(Error::ResourceLimit(_))));
        let bg = LatticeBackground::zero(GroupId::Su2, lat(7));
        assert!(matches!(verify_splittings(&bg), Err(Error::ResourceLimit(_))));
    }

    #[test]
    fn gauge_variation_basics() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let zero = LatticeBackground::zero(GroupId::Su2, lat(3));
        let v = DualSection::constant(GroupId::Su2, 27, &AlgebraElement::new(vec![0.3, -1.0, 2.0]));
        assert_eq!(gauge_variation(&zero, &v).unwrap().to_vector().amax(), 0.0);

        let bg = LatticeBackground::random(GroupId::Su3, lat(2), &mut rng, 1.0).with_coupling(0.9);
        let v = bg.random_dual(&mut rng, 1.0);
        let lhs = gauge_variation(&bg, &v.scaled(-1.0)).unwrap();
        let rhs = apply_complex_structure(&jprime_adjoint(&bg, &v).unwrap());
        assert!((lhs.to_vector() - rhs.to_vector()).amax() < 1e-14);
    }

    #[test]
    fn gauge_orbit_tangents_solve_linearised_constraint() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let spec = GroupId::Su3.spec();
        // E^i = k A^i makes sum_i [A^i, E^i] vanish.
        let a = [
            spec.random_element(&mut rng, 1.0),
            spec.random_element(&mut rng, 1.0),
            spec.random_element(&mut rng, 1.0),
        ];
        let e = [&a[0] * 0.7, &a[1] * 0.7, &a[2] * 0.7];
        let bg = LatticeBackground::constant(GroupId::Su3, lat(3), &a, &e).unwrap();
        assert!(momentum_map(&bg).v.amax() < 1e-14);
        let v = bg.random_dual(&mut rng, 1.0);
        let t = gauge_variation(&bg, &v).unwrap();
        assert!(bg.dual_norm(&jprime(&bg, &t).unwrap()) < 1e-9);
    }

    #[test]
    fn same_symmetry_tangents_zero_background() {
        let bg = LatticeBackground::zero(GroupId::Su2, lat(2));
        assert_eq!(same_symmetry_tangents(&bg).unwrap().len(), 0);
    }

    #[test]
    fn same_symmetry_tangents_abelian_background() {
        // Background along t3 on the forward L = 2 lattice; solutions must
        // satisfy both linear conditions.
        let l = lat(2).with_stencil(Stencil::Forward);
        let t3 = AlgebraElement::unit(3, 2);
        let bg = LatticeBackground::constant(
            GroupId::Su2,
            l,
            &[&t3 * 1.0, &t3 * 0.5, &t3 * -0.3],
            &[&t3 * 0.2, &t3 * 0.0, &t3 * 0.9],
        )
        .unwrap();
        for t in same_symmetry_tangents(&bg).unwrap() {
            assert!(bg.dual_norm(&jprime(&bg, &t).unwrap()) < 1e-10);
            assert!(bg.dual_norm(&jprime(&bg, &apply_complex_structure(&t)).unwrap()) < 1e-10);
        }
    }
}
