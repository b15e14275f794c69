//! Leading-order vacuum exponent for constant fields.
//!
//! For a constant field the operator
//! `R_{(n,a),(n',a')} = -g sum_m eps_{n m n'} f_{a a' c} A_m^c`
//! is a real symmetric `3 dim x 3 dim` matrix and the vacuum functional is
//! `psi_0 = exp(-(V g / 2) sigma)` with
//!
//! ```text
//! sigma = B^T (R.R)^(-1/2) B / g
//!       = (1/pi) int_0^inf dl l^(-1/2) B^T (l + R.R)^(-1) B / g
//! ```
//!
//! [`sigma_spectral`] sums over the eigenpairs of `R.R`;
//! [`sigma_quadrature`] integrates the resolvent quadratic form with one
//! linear solve per node. Both report divergence when `B` has weight on the
//! kernel of `R.R`. For constant fields `B = -R A / 2` lies in the range of
//! `R`, so divergence can only be produced through [`SigmaProblem::new`].

use std::f64::consts::PI;
use std::fmt;
use std::io::{self, Write};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::ansatz::Ansatz;
use crate::error::{Error, Result};
use crate::strata::{curvature, ConstantField};

/// Eigenvalues of `R.R` at most `KERNEL_EIGEN_TOL * max(1, |R.R|)` are kernel.
pub const KERNEL_EIGEN_TOL: f64 = 1e-10;
/// A kernel projection above `KERNEL_PROJECTION_TOL * |B|^2` is divergent.
pub const KERNEL_PROJECTION_TOL: f64 = 1e-10;

/// The symmetric operator `R(A)` on the composite index `n * dim + a`.
#[derive(Debug, Clone, PartialEq)]
pub struct ROperator {
    pub matrix: DMatrix<f64>,
    pub dim: usize,
}

impl ROperator {
    /// `R.R`, symmetrised against rounding.
    pub fn squared(&self) -> DMatrix<f64> {
        let rr = &self.matrix * &self.matrix;
        (&rr + rr.transpose()) * 0.5
    }

    pub fn symmetry_residual(&self) -> f64 {
        crate::linalg::max_abs(&(&self.matrix - self.matrix.transpose()))
    }
}

const EPS: [(usize, usize, usize, f64); 6] = [
    (0, 1, 2, 1.0),
    (1, 2, 0, 1.0),
    (2, 0, 1, 1.0),
    (0, 2, 1, -1.0),
    (2, 1, 0, -1.0),
    (1, 0, 2, -1.0),
];

pub fn build_r(field: &ConstantField) -> ROperator {
    let spec = field.spec();
    let d = spec.dim;
    let g = field.coupling;
    let mut r = DMatrix::zeros(3 * d, 3 * d);
    for &(n, m, np, sign) in &EPS {
        let am = &field.a[m].coeffs;
        for a in 0..d {
            for ap in 0..d {
                let mut s = 0.0;
                for c in 0..d {
                    s += spec.f(a, ap, c) * am[c];
                }
                r[(n * d + a, np * d + ap)] += -g * sign * s;
            }
        }
    }
    ROperator { matrix: r, dim: d }
}

/// `B` flattened to the composite index `i * dim + a`.
pub fn curvature_vector(field: &ConstantField) -> DVector<f64> {
    let b = curvature(field);
    let d = field.group.dim();
    DVector::from_fn(3 * d, |k, _| b[k / d].coeffs[k % d])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SigmaMethod {
    Spectral,
    Quadrature,
}

impl fmt::Display for SigmaMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SigmaMethod::Spectral => "spectral",
            SigmaMethod::Quadrature => "quadrature",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SigmaResult {
    /// `+inf` when divergent.
    pub sigma: f64,
    /// Spectrum of `R.R`, ascending.
    pub eigenvalues: Vec<f64>,
    /// `(B . v_i)^2` for the matching eigenvectors.
    pub projections: Vec<f64>,
    pub divergent: bool,
    pub method: SigmaMethod,
    /// Integrand evaluations used (quadrature only).
    pub nodes: usize,
    /// Estimated absolute quadrature error on `sigma` (quadrature only).
    pub error_estimate: f64,
}

impl SigmaResult {
    /// `ln psi_0 = -(V g / 2) sigma`.
    pub fn log_psi0(&self, volume: f64, coupling: f64) -> f64 {
        -0.5 * volume * coupling * self.sigma
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Budget on integrand evaluations.
    pub max_nodes: usize,
    /// `s` in the substitution `lambda = s u^2 / (1 - u)^2`, `u` in (0, 1).
    pub lambda_scale: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            rel_tol: 1e-10,
            abs_tol: 0.0,
            max_nodes: 10_000,
            lambda_scale: 1.0,
        }
    }
}

/// Spectral data of `R.R` relative to `B`.
#[derive(Debug, Clone)]
struct Spectrum {
    eigenvalues: Vec<f64>,
    vectors: Vec<DVector<f64>>,
    projections: Vec<f64>,
    kernel_tol: f64,
    divergent: bool,
}

impl Spectrum {
    fn is_kernel(&self, i: usize) -> bool {
        self.eigenvalues[i] <= self.kernel_tol
    }
}

/// `B`, `R.R` and the coupling: everything the evaluators need.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaProblem {
    pub b: DVector<f64>,
    pub rr: DMatrix<f64>,
    pub coupling: f64,
}

impl SigmaProblem {
    /// `rr` must be square, symmetric and positive semidefinite.
    pub fn new(b: DVector<f64>, rr: DMatrix<f64>, coupling: f64) -> Result<Self> {
        if !rr.is_square() || rr.nrows() != b.len() {
            return Err(Error::invalid(format!(
                "operator is {}x{} but B has {} entries",
                rr.nrows(),
                rr.ncols(),
                b.len()
            )));
        }
        let scale = crate::linalg::max_abs(&rr).max(1.0);
        if crate::linalg::max_abs(&(&rr - rr.transpose())) > 1e-12 * scale {
            return Err(Error::invalid("operator is not symmetric"));
        }
        if !(coupling > 0.0) {
            return Err(Error::invalid("coupling must be positive"));
        }
        Ok(SigmaProblem { b, rr, coupling })
    }

    pub fn from_field(field: &ConstantField) -> Self {
        SigmaProblem {
            b: curvature_vector(field),
            rr: build_r(field).squared(),
            coupling: field.coupling,
        }
    }

    fn spectrum(&self) -> Spectrum {
        let eig = SymmetricEigen::new(self.rr.clone());
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors: Vec<DVector<f64>> = order
            .iter()
            .map(|&i| eig.eigenvectors.column(i).into_owned())
            .collect();
        let projections: Vec<f64> = vectors.iter().map(|v| v.dot(&self.b).powi(2)).collect();
        let norm = eigenvalues.iter().fold(0.0f64, |m, w| m.max(w.abs()));
        let kernel_tol = KERNEL_EIGEN_TOL * norm.max(1.0);
        let weight_tol = KERNEL_PROJECTION_TOL * self.b.norm_squared();
        let divergent = eigenvalues
            .iter()
            .zip(&projections)
            .any(|(&w, &p)| w <= kernel_tol && p > weight_tol);
        Spectrum {
            eigenvalues,
            vectors,
            projections,
            kernel_tol,
            divergent,
        }
    }

    pub fn sigma_spectral(&self) -> SigmaResult {
        let sp = self.spectrum();
        let sigma = if sp.divergent {
            f64::INFINITY
        } else {
            (0..sp.eigenvalues.len())
                .filter(|&i| !sp.is_kernel(i))
                .map(|i| sp.projections[i] / sp.eigenvalues[i].sqrt())
                .sum::<f64>()
                / self.coupling
        };
        SigmaResult {
            sigma,
            eigenvalues: sp.eigenvalues,
            projections: sp.projections,
            divergent: sp.divergent,
            method: SigmaMethod::Spectral,
            nodes: 0,
            error_estimate: 0.0,
        }
    }

    /// Adaptive Gauss-Kronrod integration of the resolvent form over the
    /// compactified variable `u`.
    pub fn sigma_quadrature(&self, cfg: &QuadratureConfig) -> Result<SigmaResult> {
        if !(cfg.lambda_scale > 0.0) || !(cfg.rel_tol >= 0.0) || !(cfg.abs_tol >= 0.0) {
            return Err(Error::invalid("quadrature tolerances and scale must be non-negative"));
        }
        let sp = self.spectrum();
        let mut result = SigmaResult {
            sigma: f64::INFINITY,
            eigenvalues: sp.eigenvalues.clone(),
            projections: sp.projections.clone(),
            divergent: sp.divergent,
            method: SigmaMethod::Quadrature,
            nodes: 0,
            error_estimate: 0.0,
        };
        if sp.divergent {
            return Ok(result);
        }
        // Drop the rounding-level kernel component so the integrand stays
        // bounded as lambda -> 0.
        let mut b = self.b.clone();
        for (i, v) in sp.vectors.iter().enumerate() {
            if sp.is_kernel(i) {
                b.axpy(-v.dot(&self.b), v, 1.0);
            }
        }
        let s = cfg.lambda_scale;
        let integrand = |u: f64| {
            let w = 1.0 - u;
            let lambda = s * u * u / (w * w);
            2.0 * s.sqrt() / (PI * w * w) * resolvent_solve(&self.rr, &b, lambda)
        };
        let q = adaptive_gauss_kronrod(integrand, 0.0, 1.0, cfg);
        result.nodes = q.nodes;
        result.error_estimate = q.error / self.coupling;
        if !q.converged {
            return Err(Error::Numerical {
                message: format!("quadrature did not converge within {} nodes", cfg.max_nodes),
                estimate: q.value / self.coupling,
                error: q.error / self.coupling,
            });
        }
        result.sigma = q.value / self.coupling;
        Ok(result)
    }

    /// `B^T (lambda + R.R)^(-1) B`.
    ///
    /// Positive `lambda` goes through a Cholesky solve. At `lambda = 0` the
    /// form is summed over the nonzero spectrum and is an error when `B`
    /// overlaps the kernel.
    pub fn resolvent_form(&self, lambda: f64) -> Result<f64> {
        if !(lambda >= 0.0) {
            return Err(Error::invalid(format!("lambda must be >= 0, got {lambda}")));
        }
        if lambda > 0.0 {
            return Ok(resolvent_solve(&self.rr, &self.b, lambda));
        }
        let sp = self.spectrum();
        if sp.divergent {
            return Err(Error::Divergent(
                "B overlaps the kernel of R.R at lambda = 0".into(),
            ));
        }
        Ok((0..sp.eigenvalues.len())
            .filter(|&i| !sp.is_kernel(i))
            .map(|i| sp.projections[i] / sp.eigenvalues[i])
            .sum())
    }
}

fn resolvent_solve(rr: &DMatrix<f64>, b: &DVector<f64>, lambda: f64) -> f64 {
    let mut m = rr.clone();
    for i in 0..m.nrows() {
        m[(i, i)] += lambda;
    }
    let x = match m.clone().cholesky() {
        Some(ch) => ch.solve(b),
        None => m.lu().solve(b).unwrap_or_else(|| DVector::from_element(b.len(), f64::NAN)),
    };
    b.dot(&x)
}

pub fn sigma_spectral(field: &ConstantField) -> SigmaResult {
    SigmaProblem::from_field(field).sigma_spectral()
}

pub fn sigma_quadrature(field: &ConstantField, cfg: &QuadratureConfig) -> Result<SigmaResult> {
    SigmaProblem::from_field(field).sigma_quadrature(cfg)
}

pub fn resolvent_form(field: &ConstantField, lambda: f64) -> Result<f64> {
    SigmaProblem::from_field(field).resolvent_form(lambda)
}

struct Quadrature {
    value: f64,
    error: f64,
    nodes: usize,
    converged: bool,
}

// 15-point Kronrod extension of the 7-point Gauss rule.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// One G7-K15 panel: (Kronrod value, error estimate).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut abs_k = kronrod.abs();
    let mut fv = [(0.0, 0.0); 7];
    for (j, fvj) in fv.iter_mut().enumerate() {
        let dx = half * XGK[j];
        let (f1, f2) = (f(center - dx), f(center + dx));
        kronrod += WGK[j] * (f1 + f2);
        abs_k += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
        *fvj = (f1, f2);
    }
    let mean = 0.5 * kronrod;
    let mut asc = WGK[7] * (fc - mean).abs();
    for (j, &(f1, f2)) in fv.iter().enumerate() {
        asc += WGK[j] * ((f1 - mean).abs() + (f2 - mean).abs());
    }
    let result = kronrod * half;
    let asc = asc * half.abs();
    let mut err = ((kronrod - gauss) * half).abs();
    if asc != 0.0 && err != 0.0 {
        err = asc * (200.0 * err / asc).powf(1.5).min(1.0);
    }
    let abs_k = abs_k * half.abs();
    if abs_k > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * abs_k);
    }
    (result, err)
}

/// Globally adaptive bisection on the panel with the largest error.
fn adaptive_gauss_kronrod<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, cfg: &QuadratureConfig) -> Quadrature {
    let (v, e) = gk15(&f, a, b);
    let mut panels = vec![(a, b, v, e)];
    let mut nodes = 15;
    loop {
        let value: f64 = panels.iter().map(|p| p.2).sum();
        let error: f64 = panels.iter().map(|p| p.3).sum();
        if !value.is_finite() {
            return Quadrature { value, error: f64::INFINITY, nodes, converged: false };
        }
        if error <= cfg.abs_tol.max(cfg.rel_tol * value.abs()) {
            return Quadrature { value, error, nodes, converged: true };
        }
        if nodes + 30 > cfg.max_nodes {
            return Quadrature { value, error, nodes, converged: false };
        }
        let (k, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("at least one panel");
        let (pa, pb, _, _) = panels.swap_remove(k);
        let mid = 0.5 * (pa + pb);
        let (v1, e1) = gk15(&f, pa, mid);
        let (v2, e2) = gk15(&f, mid, pb);
        nodes += 30;
        panels.push((pa, mid, v1, e1));
        panels.push((mid, pb, v2, e2));
    }
}

/// Published rational resolvent forms used as regression oracles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ClosedFormCase {
    #[serde(rename = "SU2_DIAG")]
    Su2Diag,
    #[serde(rename = "SU3_II")]
    Su3II,
    #[serde(rename = "SU3_III")]
    Su3III,
    #[serde(rename = "SU3_IV")]
    Su3IV,
    #[serde(rename = "SU3_III_A4ZERO")]
    Su3IIIA4Zero,
    #[serde(rename = "SU3_III_A5ZERO")]
    Su3IIIA5Zero,
    #[serde(rename = "SU3_III_A8ZERO")]
    Su3IIIA8Zero,
}

/// How to read the su(3) case-III denominator, whose `lambda^1` coefficient
/// was typeset with a stray `la` after `16 a5^4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Transcription {
    /// Keep the stray token as an extra factor of lambda.
    Literal,
    /// Drop it; this is the reading that agrees with the resolvent.
    #[default]
    Corrected,
}

impl ClosedFormCase {
    pub const ALL: [ClosedFormCase; 7] = [
        ClosedFormCase::Su2Diag,
        ClosedFormCase::Su3II,
        ClosedFormCase::Su3III,
        ClosedFormCase::Su3IV,
        ClosedFormCase::Su3IIIA4Zero,
        ClosedFormCase::Su3IIIA5Zero,
        ClosedFormCase::Su3IIIA8Zero,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ClosedFormCase::Su2Diag => "SU2_DIAG",
            ClosedFormCase::Su3II => "SU3_II",
            ClosedFormCase::Su3III => "SU3_III",
            ClosedFormCase::Su3IV => "SU3_IV",
            ClosedFormCase::Su3IIIA4Zero => "SU3_III_A4ZERO",
            ClosedFormCase::Su3IIIA5Zero => "SU3_III_A5ZERO",
            ClosedFormCase::Su3IIIA8Zero => "SU3_III_A8ZERO",
        }
    }

    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            ClosedFormCase::Su2Diag => &["a1", "a2", "a3"],
            ClosedFormCase::Su3II => &["a1", "a2", "a8"],
            ClosedFormCase::Su3III => &["a4", "a5", "a8"],
            ClosedFormCase::Su3IV => &["a2", "a3"],
            ClosedFormCase::Su3IIIA4Zero => &["a5", "a8"],
            ClosedFormCase::Su3IIIA5Zero => &["a4", "a8"],
            ClosedFormCase::Su3IIIA8Zero => &["a4", "a5"],
        }
    }

    pub fn arity(self) -> usize {
        self.param_names().len()
    }

    /// Ratio of the published rational function to `B^T (l + R.R)^-1 B` in
    /// the orthonormal `t_a` coordinates used here.
    ///
    /// The su(3) forms built on the `t4, t5` directions come out four times
    /// the resolvent at every `lambda`, including the `a8 = 0` limit where the
    /// field spans a V-spin su(2) and must reproduce the `SU3_II` function.
    pub fn published_scale(self) -> f64 {
        match self {
            ClosedFormCase::Su2Diag | ClosedFormCase::Su3II => 1.0,
            _ => 4.0,
        }
    }

    /// The constant field whose resolvent the form describes (g = V = 1).
    pub fn field(self, params: &[f64]) -> Result<ConstantField> {
        self.check_arity(params)?;
        let p = params;
        match self {
            ClosedFormCase::Su2Diag => Ansatz::Su2Diag.field(p),
            ClosedFormCase::Su3II => Ansatz::Su3II.field(p),
            ClosedFormCase::Su3III => Ansatz::Su3III.field(p),
            ClosedFormCase::Su3IV => Ansatz::Su3IV.field(p),
            ClosedFormCase::Su3IIIA4Zero => Ansatz::Su3III.field(&[0.0, p[0], p[1]]),
            ClosedFormCase::Su3IIIA5Zero => Ansatz::Su3III.field(&[p[0], 0.0, p[1]]),
            ClosedFormCase::Su3IIIA8Zero => Ansatz::Su3III.field(&[p[0], p[1], 0.0]),
        }
    }

    fn check_arity(self, params: &[f64]) -> Result<()> {
        if params.len() != self.arity() {
            return Err(Error::invalid(format!(
                "{} takes {} parameters, got {}",
                self.label(),
                self.arity(),
                params.len()
            )));
        }
        Ok(())
    }
}

impl fmt::Display for ClosedFormCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for ClosedFormCase {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ClosedFormCase::ALL
            .into_iter()
            .find(|c| c.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown closed-form case '{s}'")))
    }
}

/// `num / den`, taking `0/0` as the zero-curvature value 0.
fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else {
        num / den
    }
}

pub fn closed_form(case: ClosedFormCase, params: &[f64], lambda: f64) -> Result<f64> {
    closed_form_with(case, params, lambda, Transcription::Corrected)
}

/// Published rational function for `case`, evaluated as typeset (modulo
/// `reading` for case III). Where the full expression is `0/0` the
/// published limiting form is used.
pub fn closed_form_with(
    case: ClosedFormCase,
    params: &[f64],
    lambda: f64,
    reading: Transcription,
) -> Result<f64> {
    case.check_arity(params)?;
    if !(lambda >= 0.0) {
        return Err(Error::invalid(format!("lambda must be >= 0, got {lambda}")));
    }
    let l = lambda;
    let sq = |x: f64| x * x;
    Ok(match case {
        ClosedFormCase::Su2Diag => {
            let (a1, a2, a3) = (sq(params[0]), sq(params[1]), sq(params[2]));
            let s = a1 + a2 + a3;
            let p2 = a1 * a2 * a3;
            let n1 = a1 * a1 * (a2 + a3) + a2 * a2 * (a1 + a3) + a3 * a3 * (a1 + a2);
            let n2 = a2 * a3 + a1 * a3 + a1 * a2;
            let den = 4.0 * p2 + l * sq(l + s);
            if den == 0.0 {
                // one amplitude zero at lambda = 0: cancel the common lambda
                ratio(n1 + l * n2, sq(l + s))
            } else {
                ratio(p2 * s + l * n1 + l * l * n2, den)
            }
        }
        ClosedFormCase::Su3II => {
            let (a1, a2) = (sq(params[0]), sq(params[1]));
            ratio(a1 * a2, l + a1 + a2)
        }
        ClosedFormCase::Su3IV => {
            let (a2, a3) = (sq(params[0]), sq(params[1]));
            let s = a2 + a3;
            ratio(
                12.0 * a2 * a3 * (4.0 * l * l + 9.0 * l * s + 18.0 * a2 * a3),
                (4.0 * l + 3.0 * s) * (l * l + 3.0 * l * s + 6.0 * a2 * a3),
            )
        }
        ClosedFormCase::Su3IIIA4Zero => {
            let (a5, a8) = (sq(params[0]), sq(params[1]));
            ratio(12.0 * a5 * a8, 4.0 * l + 4.0 * a5 + 3.0 * a8)
        }
        ClosedFormCase::Su3IIIA5Zero => {
            let (a4, a8) = (sq(params[0]), sq(params[1]));
            ratio(12.0 * a4 * a8, 4.0 * l + 4.0 * a4 + 3.0 * a8)
        }
        ClosedFormCase::Su3IIIA8Zero => {
            let (a4, a5) = (sq(params[0]), sq(params[1]));
            ratio(4.0 * a4 * a5, l + a4 + a5)
        }
        ClosedFormCase::Su3III => {
            let (a4, a5, a8) = (sq(params[0]), sq(params[1]), sq(params[2]));
            let num = (16.0 * a4 * a5 + 12.0 * a5 * a8 + 12.0 * a4 * a8) * l * l
                + (16.0 * a4 * a5 * a5
                    + 16.0 * a4 * a4 * a5
                    + 12.0 * a5 * a5 * a8
                    + 9.0 * a5 * a8 * a8
                    + 12.0 * a4 * a4 * a8
                    + 9.0 * a4 * a8 * a8)
                    * l
                + 12.0 * a4 * a4 * a5 * a8
                + 12.0 * a4 * a5 * a5 * a8
                + 9.0 * a4 * a5 * a8 * a8;
            let a5_quartic = match reading {
                Transcription::Literal => 16.0 * a5 * a5 * l,
                Transcription::Corrected => 16.0 * a5 * a5,
            };
            let den = 16.0 * l * l * l
                + (32.0 * a5 + 32.0 * a4 + 24.0 * a8) * l * l
                + (16.0 * a4 * a4
                    + a5_quartic
                    + 9.0 * a8 * a8
                    + 32.0 * a4 * a5
                    + 24.0 * a8 * a4
                    + 24.0 * a5 * a8)
                    * l
                + 48.0 * a5 * a8 * a4;
            if den == 0.0 {
                let limit = if a4 == 0.0 {
                    (ClosedFormCase::Su3IIIA4Zero, [params[1], params[2]])
                } else if a5 == 0.0 {
                    (ClosedFormCase::Su3IIIA5Zero, [params[0], params[2]])
                } else {
                    (ClosedFormCase::Su3IIIA8Zero, [params[0], params[1]])
                };
                return closed_form_with(limit.0, &limit.1, l, reading);
            }
            4.0 * ratio(num, den)
        }
    })
}

/// One scan axis: a pinned value or an inclusive uniform grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Axis {
    Fixed(f64),
    Range { min: f64, max: f64, steps: usize },
}

impl Axis {
    fn values(&self) -> Vec<f64> {
        match *self {
            Axis::Fixed(v) => vec![v],
            Axis::Range { min, max, steps } => (0..steps)
                .map(|k| {
                    if k + 1 == steps {
                        max
                    } else {
                        min + (max - min) * k as f64 / (steps - 1) as f64
                    }
                })
                .collect(),
        }
    }
}

pub const DEFAULT_GRID_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ScanSpec {
    pub ansatz: Ansatz,
    /// One axis per ansatz parameter, in parameter order.
    pub axes: Vec<Axis>,
    pub coupling: f64,
    pub volume: f64,
    pub cap: usize,
}

impl ScanSpec {
    pub fn new(ansatz: Ansatz, axes: Vec<Axis>) -> Self {
        ScanSpec {
            ansatz,
            axes,
            coupling: 1.0,
            volume: 1.0,
            cap: DEFAULT_GRID_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    /// Values of the scanned (non-pinned) parameters.
    pub params: Vec<f64>,
    pub sigma: f64,
    pub divergent: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanTable {
    pub header: Vec<String>,
    pub rows: Vec<ScanRow>,
}

impl ScanTable {
    /// Header line, then one newline-terminated row per grid point.
    pub fn write_delimited<W: Write>(&self, mut w: W, delimiter: char) -> io::Result<()> {
        let d = delimiter.to_string();
        writeln!(w, "{}", self.header.join(&d))?;
        for row in &self.rows {
            let mut cells: Vec<String> = row.params.iter().map(|&x| format_significant(x, 12)).collect();
            cells.push(format_significant(row.sigma, 12));
            cells.push(row.divergent.to_string());
            writeln!(w, "{}", cells.join(&d))?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_delimited(&mut buf, ',').expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }
}

/// `sigma_spectral` over a row-major grid (first scanned axis slowest).
pub fn scan_grid(spec: &ScanSpec) -> Result<ScanTable> {
    let ansatz = spec.ansatz;
    if spec.axes.len() != ansatz.arity() {
        return Err(Error::invalid(format!(
            "{} needs {} axes, got {}",
            ansatz,
            ansatz.arity(),
            spec.axes.len()
        )));
    }
    let mut total: usize = 1;
    for (name, axis) in ansatz.param_names().iter().zip(&spec.axes) {
        match *axis {
            Axis::Fixed(v) if !v.is_finite() => {
                return Err(Error::invalid(format!("axis {name}: value must be finite")))
            }
            Axis::Range { min, max, steps } => {
                if steps < 2 {
                    return Err(Error::invalid(format!("axis {name}: steps must be >= 2")));
                }
                if !min.is_finite() || !max.is_finite() {
                    return Err(Error::invalid(format!("axis {name}: bounds must be finite")));
                }
                total = total.saturating_mul(steps);
            }
            _ => {}
        }
    }
    if total > spec.cap {
        return Err(Error::invalid(format!(
            "grid has {total} points, cap is {}",
            spec.cap
        )));
    }
    let values: Vec<Vec<f64>> = spec.axes.iter().map(Axis::values).collect();
    let scanned: Vec<usize> = spec
        .axes
        .iter()
        .enumerate()
        .filter(|(_, a)| matches!(a, Axis::Range { .. }))
        .map(|(i, _)| i)
        .collect();
    let mut header: Vec<String> = scanned
        .iter()
        .map(|&i| ansatz.param_names()[i].to_string())
        .collect();
    header.push("sigma".into());
    header.push("divergent".into());

    let mut rows = Vec::with_capacity(total);
    let mut index = vec![0usize; values.len()];
    loop {
        let params: Vec<f64> = index.iter().zip(&values).map(|(&k, v)| v[k]).collect();
        let field = ansatz
            .field(&params)?
            .with_coupling(spec.coupling)
            .with_volume(spec.volume);
        let res = sigma_spectral(&field);
        rows.push(ScanRow {
            params: scanned.iter().map(|&i| params[i]).collect(),
            sigma: res.sigma,
            divergent: res.divergent,
        });
        // odometer, last axis fastest
        let mut axis = values.len();
        loop {
            if axis == 0 {
                return Ok(ScanTable { header, rows });
            }
            axis -= 1;
            index[axis] += 1;
            if index[axis] < values[axis].len() {
                break;
            }
            index[axis] = 0;
        }
    }
}

/// `%.{digits}g`-style formatting.
pub fn format_significant(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= digits as i32 {
        format!("{}e{}", trim_zeros(mantissa), exp)
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
