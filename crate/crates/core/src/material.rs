//! Material laws: the coefficient triples (M0, M1, M2) of the evolutionary
//! system, their isotropic constructors, positivity checks, and the
//! stress-elimination algebra for micromorphic and microstretch media.
//!
//! An isotropic stiffness acts channel-wise on the orthogonal decomposition
//! of 2-tensors: `2*mu` on trace-free symmetric tensors, `2*alpha` on
//! antisymmetric ones, and `3*lambda + 2*mu` on multiples of the identity.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::blocks::{self, BlockOperator, Definiteness, Symmetry};
use crate::tensor::{self, SubspaceTag};
use crate::{Error, Result};

/// Scalar triple of an isotropic stiffness on 2-tensors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Iso3 {
    pub alpha: f64,
    pub mu: f64,
    pub lambda: f64,
}

impl Iso3 {
    pub fn new(alpha: f64, mu: f64, lambda: f64) -> Self {
        Iso3 { alpha, mu, lambda }
    }

    /// Channel eigenvalues (trace-free symmetric, antisymmetric, volumetric).
    pub fn channels(&self) -> [f64; 3] {
        [2.0 * self.mu, 2.0 * self.alpha, 3.0 * self.lambda + 2.0 * self.mu]
    }
}

/// `2*mu*sym0 + 2*alpha*skew + (3*lambda + 2*mu)*P` as a 9x9 matrix.
/// Eigenvalues are 2*mu (x5), 2*alpha (x3), 3*lambda + 2*mu (x1).
pub fn isotropic_c(alpha: f64, mu: f64, lambda: f64) -> DMatrix<f64> {
    tensor::sym0_projector().matrix * (2.0 * mu)
        + tensor::skew_projector().matrix * (2.0 * alpha)
        + tensor::p_projector().matrix * (3.0 * lambda + 2.0 * mu)
}

pub fn isotropic_c_iso(p: &Iso3) -> DMatrix<f64> {
    isotropic_c(p.alpha, p.mu, p.lambda)
}

/// Scalar coefficients of the isotropic micromorphic law. `c2` parameterizes
/// the third-order stiffness as the last-two-slot lift of an isotropic map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MicromorphicCoeffs {
    pub mu0: f64,
    pub lambda0: f64,
    pub beta0: f64,
    pub omega0: f64,
    pub mu1: f64,
    pub lambda1: f64,
    pub alpha1: f64,
    pub c2: Iso3,
}

/// The scalar quantities whose strict positivity characterizes positive
/// definiteness of the isotropic micromorphic stress-elimination matrix,
/// with human-readable names for diagnostics.
pub fn micromorphic_positivity_quantities(p: &MicromorphicCoeffs) -> Vec<(&'static str, f64)> {
    let pc = 3.0 * p.lambda1 + 2.0 * p.mu1;
    let pa = 3.0 * (2.0 * p.beta0 + p.lambda0 + p.lambda1)
        + 2.0 * (2.0 * p.omega0 + p.mu0 + p.mu1);
    let pb = 3.0 * (p.beta0 + p.lambda1) + 2.0 * (p.omega0 + p.mu1);
    vec![
        ("mu1", p.mu1),
        ("3*lambda1 + 2*mu1", pc),
        ("alpha1", p.alpha1),
        ("mu0*mu1 - omega0^2", p.mu0 * p.mu1 - p.omega0 * p.omega0),
        ("(3*lambda1+2*mu1)*(3*lambda0+2*mu0) - (3*beta0+2*omega0)^2", pa * pc - pb * pb),
        ("mu2", p.c2.mu),
        ("alpha2", p.c2.alpha),
        ("3*lambda2 + 2*mu2", 3.0 * p.c2.lambda + 2.0 * p.c2.mu),
    ]
}

fn verdict_from_quantities(qs: &[(&'static str, f64)], band: f64) -> Definiteness {
    if qs.iter().any(|(_, q)| *q < -band) {
        Definiteness::Indefinite
    } else if qs.iter().any(|(_, q)| *q <= band) {
        Definiteness::Marginal
    } else {
        Definiteness::PositiveDefinite
    }
}

/// Closed-form positivity verdict for the isotropic micromorphic law
/// (zero coupling to the third-order stress). Equivalent to the eigenvalue
/// test on the assembled 42x42 stress-elimination matrix.
pub fn check_micromorphic_isotropic(p: &MicromorphicCoeffs, band: f64) -> Definiteness {
    verdict_from_quantities(&micromorphic_positivity_quantities(p), band)
}

/// The six hemitropic positivity quantities. `coupling` is the chiral block
/// `E = 2*kappa0*sym0 + 2*nu0*skew + (3*delta0 + 2*kappa0)*P` given as an
/// [`Iso3`] with `mu = kappa0`, `alpha = nu0`, `lambda = delta0`.
pub fn hemitropic_positivity_quantities(
    c0: &Iso3,
    c2: &Iso3,
    coupling: &Iso3,
) -> Vec<(&'static str, f64)> {
    let (mu0, alpha0, lambda0) = (c0.mu, c0.alpha, c0.lambda);
    let (mu2, alpha2, lambda2) = (c2.mu, c2.alpha, c2.lambda);
    let (kappa0, nu0, delta0) = (coupling.mu, coupling.alpha, coupling.lambda);
    vec![
        ("mu0", mu0),
        ("alpha0", alpha0),
        ("lambda0 + (2/3)*mu0", lambda0 + 2.0 / 3.0 * mu0),
        ("mu0*mu2 - kappa0^2", mu0 * mu2 - kappa0 * kappa0),
        ("alpha0*alpha2 - nu0^2", alpha0 * alpha2 - nu0 * nu0),
        (
            "(lambda2+(2/3)mu2)*(lambda0+(2/3)mu0) - (delta0+(2/3)kappa0)^2",
            (lambda2 + 2.0 / 3.0 * mu2) * (lambda0 + 2.0 / 3.0 * mu0)
                - (delta0 + 2.0 / 3.0 * kappa0) * (delta0 + 2.0 / 3.0 * kappa0),
        ),
    ]
}

/// Closed-form positivity verdict for the hemitropic constitutive block
/// `[[C0, E*], [E, C2]]`; equivalent to its eigenvalue test.
pub fn check_hemitropic_isotropic(
    c0: &Iso3,
    c2: &Iso3,
    coupling: &Iso3,
    band: f64,
) -> Definiteness {
    verdict_from_quantities(&hemitropic_positivity_quantities(c0, c2, coupling), band)
}

/// The inverse of the micromorphic stress-elimination matrix, sliced into
/// the blocks used by the mass operator. Row/column groups: combined stress
/// (9), third-order stress (27), symmetric stress part (6).
#[derive(Debug, Clone)]
pub struct MicromorphicW {
    w: DMatrix<f64>,
}

const MM_OFFS: [usize; 4] = [0, 9, 36, 42];

impl MicromorphicW {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn block(&self, i: usize, j: usize) -> DMatrix<f64> {
        self.w
            .view(
                (MM_OFFS[i], MM_OFFS[j]),
                (MM_OFFS[i + 1] - MM_OFFS[i], MM_OFFS[j + 1] - MM_OFFS[j]),
            )
            .into_owned()
    }
}

/// Assembles and inverts the micromorphic elimination matrix
/// ```text
/// [ i C0 i* + G0* i* + i G0 + C1   i F0 + D0    i G0 i + C1 i ]
/// [ F0* i* + D0*                   C2           D0* i         ]
/// [ i* G0* i* + i* C1              i* D0        i* C1 i       ]
/// ```
/// with `i` the symmetric embedding. Shapes: `c0` 6x6, `g0` 6x9, `f0` 6x27,
/// `c1` 9x9, `d0` 9x27, `c2` 27x27. The inverse is symmetrized so its
/// transpose is bitwise equal to itself.
#[allow(clippy::too_many_arguments)]
pub fn micromorphic_t(
    c0: &DMatrix<f64>,
    g0: &DMatrix<f64>,
    f0: &DMatrix<f64>,
    c1: &DMatrix<f64>,
    d0: &DMatrix<f64>,
    c2: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    for (name, m, shape) in [
        ("c0", c0, (6, 6)),
        ("g0", g0, (6, 9)),
        ("f0", f0, (6, 27)),
        ("c1", c1, (9, 9)),
        ("d0", d0, (9, 27)),
        ("c2", c2, (27, 27)),
    ] {
        if (m.nrows(), m.ncols()) != shape {
            return Err(Error::Shape(format!(
                "micromorphic block {} has shape {:?}, expected {:?}",
                name,
                (m.nrows(), m.ncols()),
                shape
            )));
        }
    }
    let iota = tensor::iota_sym();
    let it = iota.transpose();
    let mut t = DMatrix::zeros(42, 42);
    let t00 = &iota * c0 * &it + g0.transpose() * &it + &iota * g0 + c1;
    let t01 = &iota * f0 + d0;
    let t02 = &iota * g0 * &iota + c1 * &iota;
    let t11 = c2.clone();
    let t12 = d0.transpose() * &iota;
    let t22 = &it * c1 * &iota;
    t.view_mut((0, 0), (9, 9)).copy_from(&t00);
    t.view_mut((0, 9), (9, 27)).copy_from(&t01);
    t.view_mut((0, 36), (9, 6)).copy_from(&t02);
    t.view_mut((9, 0), (27, 9)).copy_from(&t01.transpose());
    t.view_mut((9, 9), (27, 27)).copy_from(&t11);
    t.view_mut((9, 36), (27, 6)).copy_from(&t12);
    t.view_mut((36, 0), (6, 9)).copy_from(&t02.transpose());
    t.view_mut((36, 9), (6, 27)).copy_from(&t12.transpose());
    t.view_mut((36, 36), (6, 6)).copy_from(&t22);
    Ok(t)
}

pub fn micromorphic_w(
    c0: &DMatrix<f64>,
    g0: &DMatrix<f64>,
    f0: &DMatrix<f64>,
    c1: &DMatrix<f64>,
    d0: &DMatrix<f64>,
    c2: &DMatrix<f64>,
) -> Result<MicromorphicW> {
    let t = micromorphic_t(c0, g0, f0, c1, d0, c2)?;
    let inv = t
        .clone()
        .lu()
        .solve(&DMatrix::identity(42, 42))
        .ok_or_else(|| Error::Singular("micromorphic stress-elimination matrix".into()))?;
    let w = (&inv + inv.transpose()) * 0.5;
    Ok(MicromorphicW { w })
}

/// Isotropic specialization: zero third-order coupling, the displayed scalar
/// forms of `C0`, `C1`, `G0`, and a last-two-slot lifted isotropic `C2`.
pub fn micromorphic_isotropic_w(p: &MicromorphicCoeffs) -> Result<MicromorphicW> {
    let t = micromorphic_isotropic_t(p)?;
    let inv = t
        .clone()
        .lu()
        .solve(&DMatrix::identity(42, 42))
        .ok_or_else(|| Error::Singular("micromorphic stress-elimination matrix".into()))?;
    let w = (&inv + inv.transpose()) * 0.5;
    Ok(MicromorphicW { w })
}

/// The assembled isotropic elimination matrix without inverting it (cheap
/// positivity oracle).
pub fn micromorphic_isotropic_t(p: &MicromorphicCoeffs) -> Result<DMatrix<f64>> {
    let iota = tensor::iota_sym();
    let it = iota.transpose();
    let c0_core = tensor::sym0_projector().matrix * (2.0 * p.mu0)
        + tensor::p_projector().matrix * (3.0 * p.lambda0 + 2.0 * p.mu0);
    let c0 = &it * c0_core * &iota;
    let c1 = isotropic_c(p.alpha1, p.mu1, p.lambda1);
    let g0_core = tensor::sym0_projector().matrix * (2.0 * p.omega0)
        + tensor::p_projector().matrix * (3.0 * p.beta0 + 2.0 * p.omega0);
    let g0 = &it * g0_core;
    let c2 = tensor::lift_last_two(&isotropic_c_iso(&p.c2));
    micromorphic_t(&c0, &g0, &DMatrix::zeros(6, 27), &c1, &DMatrix::zeros(9, 27), &c2)
}

/// Channel-wise closed form of the isotropic elimination inverse. The
/// antisymmetric channel is decoupled, and each of the trace-free symmetric
/// and volumetric channels reduces to an explicit 2x2 inverse between the
/// stress and the symmetric stress-force. This stays accurate for extreme
/// channel ratios where a general LU inverse loses the small couplings.
pub fn micromorphic_isotropic_w_channels(p: &MicromorphicCoeffs) -> Result<MicromorphicW> {
    let q = micromorphic_positivity_quantities(p);
    let get = |name: &str| q.iter().find(|(n, _)| *n == name).map(|(_, v)| *v).unwrap();
    let ms = get("mu0*mu1 - omega0^2") / p.mu1;
    let p1 = 3.0 * p.lambda1 + 2.0 * p.mu1;
    let p0 = 3.0 * p.lambda0 + 2.0 * p.mu0;
    let pw = 3.0 * p.beta0 + 2.0 * p.omega0;
    let pp = (p0 * p1 - pw * pw) / p1;
    for (name, v) in [
        ("mu1", p.mu1),
        ("3*lambda1 + 2*mu1", p1),
        ("alpha1", p.alpha1),
        ("shear Schur complement", ms),
        ("volumetric Schur complement", pp),
    ] {
        if !(v != 0.0) {
            return Err(Error::Singular(format!(
                "isotropic elimination channel {name} vanishes"
            )));
        }
    }
    let sym0 = &tensor::sym0_projector().matrix;
    let skew = &tensor::skew_projector().matrix;
    let pvol = &tensor::p_projector().matrix;
    let iota = tensor::iota_sym();
    // 2x2 channel inverses of [[a + 2b + c, b + c], [b + c, c]] with
    // determinant c * (a - b^2/c)-style Schur values.
    let s_det = 4.0 * ms * p.mu1; // shear channel determinant
    let v_det = p1 * pp; // volumetric channel determinant
    let w00 = sym0 * (1.0 / (2.0 * ms)) + skew * (1.0 / (2.0 * p.alpha1)) + pvol * (1.0 / pp);
    let s02 = -(2.0 * p.omega0 + 2.0 * p.mu1) / s_det;
    let v02 = -(pw + p1) / v_det;
    let w02 = (sym0 * s02 + pvol * v02) * &iota;
    let s22 = (2.0 * p.mu0 + 4.0 * p.omega0 + 2.0 * p.mu1) / s_det;
    let v22 = (p0 + 2.0 * pw + p1) / v_det;
    let w22 = iota.transpose() * (sym0 * s22 + pvol * v22) * &iota;
    let c2inv = inv_isotropic_c(&p.c2)?;
    let w11 = tensor::lift_last_two(&c2inv);
    let mut w = DMatrix::zeros(42, 42);
    w.view_mut((0, 0), (9, 9)).copy_from(&w00);
    w.view_mut((0, 36), (9, 6)).copy_from(&w02);
    w.view_mut((36, 0), (6, 9)).copy_from(&w02.transpose());
    w.view_mut((9, 9), (27, 27)).copy_from(&w11);
    w.view_mut((36, 36), (6, 6)).copy_from(&w22);
    let w = (&w + w.transpose()) * 0.5;
    Ok(MicromorphicW { w })
}

/// Channel-wise inverse of an isotropic stiffness.
pub fn inv_isotropic_c(p: &Iso3) -> Result<DMatrix<f64>> {
    let [s, k, v] = p.channels();
    for (name, c) in [("2*mu", s), ("2*alpha", k), ("3*lambda + 2*mu", v)] {
        if c == 0.0 {
            return Err(Error::Singular(format!("isotropic channel {name} vanishes")));
        }
    }
    Ok(tensor::sym0_projector().matrix * (1.0 / s)
        + tensor::skew_projector().matrix * (1.0 / k)
        + tensor::p_projector().matrix * (1.0 / v))
}

/// Explicit constitutive blocks of the microstretch law
/// `(tau; mu; sigma; pi) = [[C0,B,D,F],[B*,C1,E,G],[D*,E*,C2,K],[F*,G*,K*,C3]]
/// (e; kappa; phi; zeta)` with a vector micro-rotation and scalar stretch:
/// `e`, `kappa` are 2-tensors (9), `phi` is scalar (1), `zeta` a vector (3).
#[derive(Debug, Clone)]
pub struct MicrostretchBlocks {
    pub c0: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub f: DMatrix<f64>,
    pub c1: DMatrix<f64>,
    pub e: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub c2: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub c3: DMatrix<f64>,
}

impl MicrostretchBlocks {
    pub fn check_shapes(&self) -> Result<()> {
        for (name, m, shape) in [
            ("c0", &self.c0, (9, 9)),
            ("b", &self.b, (9, 9)),
            ("d", &self.d, (9, 1)),
            ("f", &self.f, (9, 3)),
            ("c1", &self.c1, (9, 9)),
            ("e", &self.e, (9, 1)),
            ("g", &self.g, (9, 3)),
            ("c2", &self.c2, (1, 1)),
            ("k", &self.k, (1, 3)),
            ("c3", &self.c3, (3, 3)),
        ] {
            if (m.nrows(), m.ncols()) != shape {
                return Err(Error::Shape(format!(
                    "microstretch block {} has shape {:?}, expected {:?}",
                    name,
                    (m.nrows(), m.ncols()),
                    shape
                )));
            }
        }
        Ok(())
    }

    /// The stretch-force value `(D* E* K) W (D; E; K*)` that makes the
    /// residual stretch stiffness vanish.
    pub fn mother_c2_value(&self) -> Result<f64> {
        let tmp = MicrostretchBlocks { c2: DMatrix::zeros(1, 1), ..self.clone() };
        let red = microstretch_reduce(&tmp)?;
        Ok(-red.m2_block[(0, 0)])
    }
}

/// Output of the microstretch stress elimination: the inverse `W` of the
/// (tau, mu, pi)-stiffness, the residual scalar stretch stiffness entering
/// through the time antiderivative, and the coupling column of the
/// skew-selfadjoint term.
#[derive(Debug, Clone)]
pub struct MicrostretchReduction {
    /// 21x21 inverse of [[C0,B,F],[B*,C1,G],[F*,G*,C3]], bitwise symmetric.
    pub w: DMatrix<f64>,
    /// 1x1 block `C2 - (D* E* K) W (D; E; K*)`.
    pub m2_block: DMatrix<f64>,
    /// 21x1 column `W (D; E; K*)`.
    pub m1_coupling: DMatrix<f64>,
}

pub fn microstretch_reduce(b: &MicrostretchBlocks) -> Result<MicrostretchReduction> {
    b.check_shapes()?;
    let mut t = DMatrix::zeros(21, 21);
    t.view_mut((0, 0), (9, 9)).copy_from(&b.c0);
    t.view_mut((0, 9), (9, 9)).copy_from(&b.b);
    t.view_mut((0, 18), (9, 3)).copy_from(&b.f);
    t.view_mut((9, 0), (9, 9)).copy_from(&b.b.transpose());
    t.view_mut((9, 9), (9, 9)).copy_from(&b.c1);
    t.view_mut((9, 18), (9, 3)).copy_from(&b.g);
    t.view_mut((18, 0), (3, 9)).copy_from(&b.f.transpose());
    t.view_mut((18, 9), (3, 9)).copy_from(&b.g.transpose());
    t.view_mut((18, 18), (3, 3)).copy_from(&b.c3);
    let inv = t
        .clone()
        .lu()
        .solve(&DMatrix::identity(21, 21))
        .ok_or_else(|| Error::Singular("microstretch stress-elimination matrix".into()))?;
    let w = (&inv + inv.transpose()) * 0.5;
    let mut dek = DMatrix::zeros(21, 1);
    dek.view_mut((0, 0), (9, 1)).copy_from(&b.d);
    dek.view_mut((9, 0), (9, 1)).copy_from(&b.e);
    dek.view_mut((18, 0), (3, 1)).copy_from(&b.k.transpose());
    let m1_coupling = &w * &dek;
    let m2_block = &b.c2 - dek.transpose() * &m1_coupling;
    Ok(MicrostretchReduction { w, m2_block, m1_coupling })
}

/// One block of a state layout: a label, the tensor order of the field, and
/// the subspace tag constraining its values. For order-3 fields the tag
/// constrains the last two slots.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockDesc {
    pub label: String,
    pub order: usize,
    pub tag: SubspaceTag,
}

impl BlockDesc {
    pub fn new(label: &str, order: usize, tag: SubspaceTag) -> Self {
        BlockDesc { label: label.to_string(), order, tag }
    }

    /// Coefficient dimension per node. A `Zero` tag annihilates the block
    /// regardless of order (tombstone of a reduction).
    pub fn dim(&self) -> usize {
        if self.tag == SubspaceTag::Zero {
            return 0;
        }
        match self.order {
            0 => 1,
            1 => 3,
            2 => self.tag.dim2(),
            3 => 3 * self.tag.dim2(),
            _ => panic!("tensor order out of range"),
        }
    }
}

pub fn layout_dims(layout: &[BlockDesc]) -> Vec<usize> {
    layout.iter().map(|b| b.dim()).collect()
}

/// Validity verdict of a material law.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum Validity {
    /// All structural conditions hold; records whether the antiderivative
    /// coefficient is nonnegative (if not, well-posedness needs a
    /// sufficiently large exponential weight).
    Valid { m2_definiteness: Definiteness },
    Invalid { reason: String },
}

impl Validity {
    pub fn is_valid(&self) -> bool {
        matches!(self, Validity::Valid { .. })
    }
}

/// A material-law triple over a state layout, at per-node scale.
#[derive(Debug, Clone)]
pub struct MaterialLaw {
    pub layout: Vec<BlockDesc>,
    pub m0: BlockOperator,
    pub m1: BlockOperator,
    pub m2: BlockOperator,
}

/// Structural validation: the mass operator must be selfadjoint and strictly
/// positive definite, the algebraic coupling skew-selfadjoint, and the
/// antiderivative coefficient selfadjoint (indefiniteness is flagged, not
/// rejected).
pub fn validate(law: &MaterialLaw) -> Validity {
    let tol = 1e-12;
    let c0 = match blocks::classify(&law.m0, tol) {
        Ok(c) => c,
        Err(e) => return Validity::Invalid { reason: e.to_string() },
    };
    if c0.symmetry != Symmetry::Selfadjoint {
        return Validity::Invalid { reason: "mass operator is not selfadjoint".into() };
    }
    if !c0.positive_definite {
        return Validity::Invalid { reason: "mass operator is not positive definite".into() };
    }
    if !law.m1.is_zero() {
        let c1 = match blocks::classify(&law.m1, tol) {
            Ok(c) => c,
            Err(e) => return Validity::Invalid { reason: e.to_string() },
        };
        if c1.symmetry != Symmetry::SkewSelfadjoint {
            return Validity::Invalid {
                reason: "algebraic coupling operator is not skew-selfadjoint".into(),
            };
        }
    }
    let m2_definiteness = if law.m2.is_zero() {
        Definiteness::PositiveDefinite
    } else {
        let c2 = match blocks::classify(&law.m2, tol) {
            Ok(c) => c,
            Err(e) => return Validity::Invalid { reason: e.to_string() },
        };
        if c2.symmetry != Symmetry::Selfadjoint {
            return Validity::Invalid {
                reason: "antiderivative coefficient is not selfadjoint".into(),
            };
        }
        match law.m2.per_node_matrix() {
            Some(m) => blocks::definiteness(&m, tol),
            None => blocks::definiteness(&law.m2.to_dense(), tol),
        }
    };
    Validity::Valid { m2_definiteness }
}
