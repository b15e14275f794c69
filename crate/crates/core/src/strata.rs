//! Stratum classification of spatially constant gauge fields.
//!
//! The isotropy algebra of a connection is the centralizer of its holonomy
//! algebra. For constant fields the holonomy is built from the curvature
//! `B_i = -(g/2) eps_ijk [A_j, A_k]`, either as the Lie algebra the
//! curvature generates ([`HolonomyMode::CurvatureSpan`]) or additionally
//! closed under `ad A_j` ([`HolonomyMode::AmbroseSinger`]). The isotropy
//! dimension then picks the row of the group's strata table.

use std::fmt;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::liealg::{AlgebraElement, CMatrix, GroupId, GroupSpec, Subalgebra};

/// Three constant spatial components `A_1, A_2, A_3` with coupling and volume.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantField {
    pub group: GroupId,
    pub a: [AlgebraElement; 3],
    pub coupling: f64,
    pub volume: f64,
}

impl ConstantField {
    pub fn new(group: GroupId, a: [AlgebraElement; 3]) -> Result<Self> {
        for (i, ai) in a.iter().enumerate() {
            if ai.dim() != group.dim() {
                return Err(Error::invalid(format!(
                    "component A_{} has {} coefficients, {} needs {}",
                    i + 1,
                    ai.dim(),
                    group,
                    group.dim()
                )));
            }
        }
        Ok(ConstantField {
            group,
            a,
            coupling: 1.0,
            volume: 1.0,
        })
    }

    pub fn zero(group: GroupId) -> Self {
        let z = AlgebraElement::zeros(group.dim());
        ConstantField {
            group,
            a: [z.clone(), z.clone(), z],
            coupling: 1.0,
            volume: 1.0,
        }
    }

    /// From a 3 x dim table of coefficients, one row per spatial direction.
    pub fn from_rows(group: GroupId, rows: &[Vec<f64>]) -> Result<Self> {
        if rows.len() != 3 {
            return Err(Error::invalid(format!(
                "expected 3 spatial rows, got {}",
                rows.len()
            )));
        }
        Self::new(
            group,
            [
                AlgebraElement::new(rows[0].clone()),
                AlgebraElement::new(rows[1].clone()),
                AlgebraElement::new(rows[2].clone()),
            ],
        )
    }

    pub fn random<R: Rng + ?Sized>(group: GroupId, rng: &mut R, scale: f64) -> Self {
        let spec = group.spec();
        ConstantField {
            group,
            a: [
                spec.random_element(rng, scale),
                spec.random_element(rng, scale),
                spec.random_element(rng, scale),
            ],
            coupling: 1.0,
            volume: 1.0,
        }
    }

    pub fn with_coupling(mut self, g: f64) -> Self {
        self.coupling = g;
        self
    }

    pub fn with_volume(mut self, v: f64) -> Self {
        self.volume = v;
        self
    }

    pub fn spec(&self) -> &'static GroupSpec {
        self.group.spec()
    }

    /// `A_i -> g A_i g^-1` for a global group element.
    pub fn color_rotated(&self, g: &CMatrix) -> Result<Self> {
        let spec = self.spec();
        let mut out = self.clone();
        for i in 0..3 {
            out.a[i] = spec.adjoint_rotate(&self.a[i], g)?;
        }
        Ok(out)
    }

    /// `A_i -> sum_j R_ij A_j`.
    pub fn space_rotated(&self, r: &Matrix3<f64>) -> Self {
        let mut out = self.clone();
        for i in 0..3 {
            let mut ai = AlgebraElement::zeros(self.group.dim());
            for j in 0..3 {
                ai.coeffs.axpy(r[(i, j)], &self.a[j].coeffs, 1.0);
            }
            out.a[i] = ai;
        }
        out
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        for ai in out.a.iter_mut() {
            ai.coeffs *= c;
        }
        out
    }

    /// Color Gram matrix `M_ij = sum_alpha A_i^alpha A_j^alpha`.
    pub fn color_gram(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.a[i].dot(&self.a[j]))
    }
}

/// Chromomagnetic field of a constant configuration.
pub fn curvature(field: &ConstantField) -> [AlgebraElement; 3] {
    let spec = field.spec();
    let g = field.coupling;
    let b = |j: usize, k: usize| &spec.bracket_unchecked(&field.a[j], &field.a[k]) * (-g);
    [b(1, 2), b(2, 0), b(0, 1)]
}

/// Which notion of holonomy algebra to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum HolonomyMode {
    /// Lie algebra generated by the curvature components alone.
    #[default]
    #[serde(rename = "curvature")]
    CurvatureSpan,
    /// Curvature algebra closed under `x -> [A_j, x]` as well.
    #[serde(rename = "ambrose-singer")]
    AmbroseSinger,
}

impl HolonomyMode {
    pub fn label(self) -> &'static str {
        match self {
            HolonomyMode::CurvatureSpan => "curvature",
            HolonomyMode::AmbroseSinger => "ambrose-singer",
        }
    }
}

impl fmt::Display for HolonomyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for HolonomyMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "curvature" | "curvature-span" => Ok(HolonomyMode::CurvatureSpan),
            "ambrose-singer" => Ok(HolonomyMode::AmbroseSinger),
            _ => Err(Error::invalid(format!("unknown holonomy mode '{s}'"))),
        }
    }
}

pub fn holonomy_algebra(field: &ConstantField, mode: HolonomyMode) -> Subalgebra {
    let spec = field.spec();
    let b = curvature(field);
    match mode {
        HolonomyMode::CurvatureSpan => spec.generated_subalgebra(&b),
        HolonomyMode::AmbroseSinger => spec.closure(&b, &field.a),
    }
}

/// One row of a strata table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StratumRow {
    pub index: usize,
    pub isotropy_label: &'static str,
    pub subbundle_label: &'static str,
    pub isotropy_dim: usize,
}

const SU2_TABLE: [StratumRow; 3] = [
    StratumRow {
        index: 1,
        isotropy_label: "Z_2",
        subbundle_label: "SU(2)",
        isotropy_dim: 0,
    },
    StratumRow {
        index: 2,
        isotropy_label: "U(1)",
        subbundle_label: "U(1)",
        isotropy_dim: 1,
    },
    StratumRow {
        index: 3,
        isotropy_label: "SU(2)",
        subbundle_label: "Z_2",
        isotropy_dim: 3,
    },
];

const SU3_TABLE: [StratumRow; 5] = [
    StratumRow {
        index: 1,
        isotropy_label: "Z_3",
        subbundle_label: "SU(3)",
        isotropy_dim: 0,
    },
    StratumRow {
        index: 2,
        isotropy_label: "U(1)",
        subbundle_label: "U(2)",
        isotropy_dim: 1,
    },
    StratumRow {
        index: 3,
        isotropy_label: "U(1)xU(1)",
        subbundle_label: "U(1)xU(1)",
        isotropy_dim: 2,
    },
    StratumRow {
        index: 4,
        isotropy_label: "U(2)",
        subbundle_label: "U(1)",
        isotropy_dim: 4,
    },
    StratumRow {
        index: 5,
        isotropy_label: "SU(3)",
        subbundle_label: "Z_3",
        isotropy_dim: 8,
    },
];

/// Isotropy groups and maximal-subbundle structure groups, row 1 generic.
pub fn strata_table(group: GroupId) -> &'static [StratumRow] {
    match group {
        GroupId::Su2 => &SU2_TABLE,
        GroupId::Su3 => &SU3_TABLE,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StratumReport {
    pub group: GroupId,
    pub stratum_index: usize,
    pub isotropy_dim: usize,
    pub isotropy_label: String,
    pub subbundle_label: String,
    pub mode: HolonomyMode,
    pub holonomy_dim: usize,
    pub isotropy: Subalgebra,
}

pub fn classify(field: &ConstantField, mode: HolonomyMode) -> Result<StratumReport> {
    let spec = field.spec();
    let holonomy = holonomy_algebra(field, mode);
    let isotropy = spec.centralizer(holonomy.basis_vectors());
    let row = strata_table(field.group)
        .iter()
        .find(|r| r.isotropy_dim == isotropy.dim())
        .ok_or_else(|| {
            Error::Internal(format!(
                "isotropy dimension {} does not occur in the {} strata table",
                isotropy.dim(),
                field.group
            ))
        })?;
    Ok(StratumReport {
        group: field.group,
        stratum_index: row.index,
        isotropy_dim: isotropy.dim(),
        isotropy_label: row.isotropy_label.to_string(),
        subbundle_label: row.subbundle_label.to_string(),
        mode,
        holonomy_dim: holonomy.dim(),
        isotropy,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TypeOrder {
    Less,
    Greater,
    Equal,
    Incomparable,
}

/// Partial order of types: `r1 <= r2` when the isotropy of `r1` contains
/// (a conjugate of) the isotropy of `r2`.
///
/// Both tables are chains under conjugate containment, with the generic
/// stratum (row 1) maximal and the full group (last row) minimal.
pub fn type_order(r1: &StratumReport, r2: &StratumReport) -> Result<TypeOrder> {
    if r1.group != r2.group {
        return Err(Error::invalid(format!(
            "cannot order strata of {} and {}",
            r1.group, r2.group
        )));
    }
    Ok(match r1.stratum_index.cmp(&r2.stratum_index) {
        std::cmp::Ordering::Equal => TypeOrder::Equal,
        std::cmp::Ordering::Greater => TypeOrder::Less,
        std::cmp::Ordering::Less => TypeOrder::Greater,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalForm {
    pub field: ConstantField,
    /// `R` with `A'_i = sum_j R_ij A_j`; a proper rotation.
    pub spatial_rotation: Matrix3<f64>,
    /// SO(3) matrix applied to su(2) coordinates (the adjoint image of an
    /// SU(2) element). `None` for su(3).
    pub color_rotation: Option<Matrix3<f64>>,
}

const SIGN_EPS: f64 = 1e-12;

/// Rotates space so that `M' = R M R^T` is diagonal with descending entries.
///
/// Each eigenvector is signed so its first non-negligible component is
/// positive, except that the last row is flipped when needed to keep
/// `det R = +1`. For su(2) a color rotation then aligns `A'_i` with `t_i`.
pub fn canonicalize_spatial(field: &ConstantField) -> CanonicalForm {
    let eig = SymmetricEigen::new(field.color_gram());
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let mut r = Matrix3::zeros();
    for (row, &k) in order.iter().enumerate() {
        let mut v: Vector3<f64> = eig.eigenvectors.column(k).into_owned();
        if let Some(first) = v.iter().find(|x| x.abs() > SIGN_EPS) {
            if *first < 0.0 {
                v = -v;
            }
        }
        r.set_row(row, &v.transpose());
    }
    if r.determinant() < 0.0 {
        let last = -r.row(2).into_owned();
        r.set_row(2, &last);
    }
    let rotated = field.space_rotated(&r);

    if field.group != GroupId::Su2 {
        return CanonicalForm {
            field: rotated,
            spatial_rotation: r,
            color_rotation: None,
        };
    }

    let o = aligning_rotation(&rotated);
    let mut aligned = rotated.clone();
    for i in 0..3 {
        let v = Vector3::from_iterator(rotated.a[i].coeffs.iter().cloned());
        aligned.a[i] = AlgebraElement::new((o * v).as_slice().to_vec());
    }
    CanonicalForm {
        field: aligned,
        spatial_rotation: r,
        color_rotation: Some(o),
    }
}

/// SO(3) matrix whose rows are the normalised color vectors of `A_i`,
/// completed to an orthonormal frame when some vanish.
fn aligning_rotation(field: &ConstantField) -> Matrix3<f64> {
    let scale = field.a.iter().map(|x| x.norm()).fold(0.0, f64::max);
    let mut rows: Vec<Option<Vector3<f64>>> = Vec::with_capacity(3);
    let mut frame: Vec<Vector3<f64>> = Vec::new();
    for ai in &field.a {
        let v = Vector3::from_iterator(ai.coeffs.iter().cloned());
        let mut w = v;
        for f in &frame {
            w -= f * f.dot(&w);
        }
        if scale > 0.0 && w.norm() > 1e-9 * scale {
            let u = w.normalize();
            frame.push(u);
            rows.push(Some(u));
        } else {
            rows.push(None);
        }
    }
    let mut filler = (0..3).map(|k| Vector3::ith(k, 1.0));
    let mut completed = [false; 3];
    for (i, row) in rows.iter_mut().enumerate() {
        if row.is_none() {
            for mut e in filler.by_ref() {
                for f in &frame {
                    e -= f * f.dot(&e);
                }
                if e.norm() > 1e-6 {
                    let u = e.normalize();
                    frame.push(u);
                    *row = Some(u);
                    completed[i] = true;
                    break;
                }
            }
        }
    }
    let mut o = Matrix3::zeros();
    for (i, row) in rows.iter().enumerate() {
        o.set_row(i, &row.expect("frame completed").transpose());
    }
    if o.determinant() < 0.0 {
        // Prefer flipping a filler direction; otherwise A_3 ends up along -t3.
        let k = (0..3).rev().find(|&i| completed[i]).unwrap_or(2);
        let flipped = -o.row(k).into_owned();
        o.set_row(k, &flipped);
    }
    o
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::Ansatz;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ridge(eps: f64, k: f64) -> ConstantField {
        Ansatz::Su2Diag.field(&[0.0, eps, k / eps]).unwrap()
    }

    #[test]
    fn zero_field_is_flat() {
        for group in [GroupId::Su2, GroupId::Su3] {
            let f = ConstantField::zero(group);
            assert!(curvature(&f).iter().all(|b| b.is_zero()));
            assert_eq!(holonomy_algebra(&f, HolonomyMode::CurvatureSpan).dim(), 0);
            assert_eq!(holonomy_algebra(&f, HolonomyMode::AmbroseSinger).dim(), 0);
        }
    }

    #[test]
    fn diagonal_su2_curvature() {
        let f = Ansatz::Su2Diag.field(&[1.0, 1.0, 1.0]).unwrap();
        let b = curvature(&f);
        for i in 0..3 {
            for a in 0..3 {
                let want = if i == a { -1.0 } else { 0.0 };
                assert_abs_diff_eq!(b[i].coeffs[a], want, epsilon = 1e-15);
            }
        }
        // general amplitudes and coupling: B_1 = -g a2 a3 t1 etc.
        let f = Ansatz::Su2Diag.field(&[0.5, 2.0, 3.0]).unwrap().with_coupling(1.5);
        let b = curvature(&f);
        assert_abs_diff_eq!(b[0].coeffs[0], -1.5 * 6.0, epsilon = 1e-14);
        assert_abs_diff_eq!(b[1].coeffs[1], -1.5 * 1.5, epsilon = 1e-14);
        assert_abs_diff_eq!(b[2].coeffs[2], -1.5 * 1.0, epsilon = 1e-14);
    }

    #[test]
    fn su3_case_two_curvature() {
        let (a1, a2, a8) = (0.7, -1.3, 2.1);
        let b = curvature(&Ansatz::Su3II.field(&[a1, a2, a8]).unwrap());
        for i in 0..3 {
            for a in 0..8 {
                let want = if (i, a) == (2, 2) { -a1 * a2 } else { 0.0 };
                assert_abs_diff_eq!(b[i].coeffs[a], want, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn su3_case_four_curvature() {
        let (a2, a3) = (0.8, 1.7);
        let b = curvature(&Ansatz::Su3IV.field(&[a2, a3]).unwrap());
        for i in 0..3 {
            for a in 0..8 {
                let want = if (i, a) == (0, 7) { 3f64.sqrt() * a2 * a3 } else { 0.0 };
                assert_abs_diff_eq!(b[i].coeffs[a], want, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn su3_case_three_curvature() {
        let (a4, a5, a8) = (0.9, 1.1, -0.6);
        let b = curvature(&Ansatz::Su3III.field(&[a4, a5, a8]).unwrap());
        let s = 3f64.sqrt() / 2.0;
        assert_abs_diff_eq!(b[0].coeffs[3], -s * a5 * a8, epsilon = 1e-14);
        assert_abs_diff_eq!(b[1].coeffs[4], -s * a4 * a8, epsilon = 1e-14);
        assert_abs_diff_eq!(b[2].coeffs[2], -0.5 * a4 * a5, epsilon = 1e-14);
        assert_abs_diff_eq!(b[2].coeffs[7], -s * a4 * a5, epsilon = 1e-14);
    }

    #[test]
    fn ridge_holonomy_in_both_modes() {
        let f = ridge(1e-3, 1.0);
        let cs = holonomy_algebra(&f, HolonomyMode::CurvatureSpan);
        assert_eq!(cs.dim(), 1);
        assert!(cs.contains(&GroupId::Su2.spec().generator(0), 1e-12));
        assert_eq!(holonomy_algebra(&f, HolonomyMode::AmbroseSinger).dim(), 3);
    }

    #[test]
    fn classify_examples() {
        let r = classify(&ConstantField::zero(GroupId::Su2), HolonomyMode::CurvatureSpan).unwrap();
        assert_eq!((r.stratum_index, r.isotropy_label.as_str(), r.subbundle_label.as_str()), (3, "SU(2)", "Z_2"));

        let r = classify(&ridge(1e-2, 2.0), HolonomyMode::CurvatureSpan).unwrap();
        assert_eq!((r.stratum_index, r.isotropy_label.as_str()), (2, "U(1)"));
        let r = classify(&ridge(1e-2, 2.0), HolonomyMode::AmbroseSinger).unwrap();
        assert_eq!((r.stratum_index, r.isotropy_label.as_str()), (1, "Z_2"));

        let r = classify(&Ansatz::Su3IV.field(&[0.4, 2.5]).unwrap(), HolonomyMode::CurvatureSpan).unwrap();
        assert_eq!((r.stratum_index, r.isotropy_label.as_str(), r.isotropy_dim), (4, "U(2)", 4));

        let r = classify(&Ansatz::Su3II.field(&[0.3, 1.2, -0.7]).unwrap(), HolonomyMode::CurvatureSpan).unwrap();
        assert_eq!((r.stratum_index, r.isotropy_label.as_str()), (3, "U(1)xU(1)"));
    }

    #[test]
    fn type_order_examples() {
        let su2 = |f: &ConstantField| classify(f, HolonomyMode::CurvatureSpan).unwrap();
        let zero = su2(&ConstantField::zero(GroupId::Su2));
        let generic = su2(&Ansatz::Su2Diag.field(&[1.0, 2.0, 3.0]).unwrap());
        assert_eq!(generic.stratum_index, 1);
        assert_eq!(type_order(&zero, &zero).unwrap(), TypeOrder::Equal);
        assert_eq!(type_order(&zero, &generic).unwrap(), TypeOrder::Less);
        assert_eq!(type_order(&generic, &zero).unwrap(), TypeOrder::Greater);

        let z3 = su2(&ConstantField::zero(GroupId::Su3));
        assert!(type_order(&zero, &z3).is_err());
    }

    #[test]
    fn canonical_form_of_aligned_field_is_unchanged() {
        let f = Ansatz::Su2Diag.field(&[3.0, 2.0, 1.0]).unwrap();
        let c = canonicalize_spatial(&f);
        for i in 0..3 {
            for a in 0..3 {
                assert_abs_diff_eq!(c.field.a[i].coeffs[a].abs(), f.a[i].coeffs[a].abs(), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn canonical_form_recovers_squared_amplitudes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let spec = GroupId::Su2.spec();
        let f = Ansatz::Su2Diag.field(&[0.5, -2.0, 1.25]).unwrap();
        let g = spec.random_group_element(&mut rng);
        let r = random_rotation(&mut rng);
        let scrambled = f.color_rotated(&g).unwrap().space_rotated(&r);
        let c = canonicalize_spatial(&scrambled);
        assert_abs_diff_eq!(c.spatial_rotation.determinant(), 1.0, epsilon = 1e-12);
        let m = c.field.color_gram();
        let want = [4.0, 1.5625, 0.25];
        for i in 0..3 {
            assert_abs_diff_eq!(m[(i, i)], want[i], epsilon = 1e-12);
        }
        // axis-aligned su(2) form
        for i in 0..3 {
            for a in 0..3 {
                if a != i {
                    assert_abs_diff_eq!(c.field.a[i].coeffs[a], 0.0, epsilon = 1e-12);
                }
            }
            assert_abs_diff_eq!(c.field.a[i].coeffs[i].abs(), want[i].sqrt(), epsilon = 1e-12);
        }
        let o = c.color_rotation.unwrap();
        assert_abs_diff_eq!(o.determinant(), 1.0, epsilon = 1e-12);
    }

    pub(crate) fn random_rotation<R: Rng>(rng: &mut R) -> Matrix3<f64> {
        let axis = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let angle = rng.random_range(0.0..std::f64::consts::TAU);
        *nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle).matrix()
    }
}
