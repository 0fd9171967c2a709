//! The model catalog: nine concrete linear models of micro-structured
//! elastic solids with isotropic coefficients, named positivity checks,
//! the reduction edges connecting them, and derived child parameters.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::blocks::{BlockData, BlockOperator, SpaceSpec};
use crate::grid::{assemble_a, DiffEdge, Grid};
use crate::material::{
    self, BlockDesc, Iso3, MaterialLaw, MicromorphicCoeffs, MicrostretchBlocks, Validity,
};
use crate::reduction::{BlockAction, MapKind, ReductionMap};
use crate::tensor::{self, SubspaceTag};
use crate::{Error, Result};

/// Names of the catalog models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelName {
    Micromorphic,
    Cosserat,
    CosseratRelative,
    Hemitropic,
    Classical,
    SymStress,
    Sym0Variant,
    Sym0SymStress,
    Microstretch,
}

impl ModelName {
    pub const ALL: [ModelName; 9] = [
        ModelName::Micromorphic,
        ModelName::Cosserat,
        ModelName::CosseratRelative,
        ModelName::Hemitropic,
        ModelName::Classical,
        ModelName::SymStress,
        ModelName::Sym0Variant,
        ModelName::Sym0SymStress,
        ModelName::Microstretch,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelName::Micromorphic => "micromorphic",
            ModelName::Cosserat => "cosserat",
            ModelName::CosseratRelative => "cosserat_relative",
            ModelName::Hemitropic => "hemitropic",
            ModelName::Classical => "classical",
            ModelName::SymStress => "sym_stress",
            ModelName::Sym0Variant => "sym0_variant",
            ModelName::Sym0SymStress => "sym0_sym_stress",
            ModelName::Microstretch => "microstretch",
        }
    }
}

impl std::fmt::Display for ModelName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ModelName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelName::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown model name: {s}")))
    }
}

// ---------------------------------------------------------------------------
// Parameter sets
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MicromorphicParams {
    pub rho0: f64,
    pub rho2: f64,
    pub mu0: f64,
    pub lambda0: f64,
    pub beta0: f64,
    pub omega0: f64,
    pub mu1: f64,
    pub lambda1: f64,
    pub alpha1: f64,
    pub c2: Iso3,
}

impl Default for MicromorphicParams {
    fn default() -> Self {
        MicromorphicParams {
            rho0: 1.0,
            rho2: 1.0,
            mu0: 2.0,
            lambda0: 1.0,
            beta0: 0.25,
            omega0: 0.5,
            mu1: 1.0,
            lambda1: 0.5,
            alpha1: 0.8,
            c2: Iso3::new(0.6, 0.9, 0.4),
        }
    }
}

impl MicromorphicParams {
    pub fn coeffs(&self) -> MicromorphicCoeffs {
        MicromorphicCoeffs {
            mu0: self.mu0,
            lambda0: self.lambda0,
            beta0: self.beta0,
            omega0: self.omega0,
            mu1: self.mu1,
            lambda1: self.lambda1,
            alpha1: self.alpha1,
            c2: self.c2,
        }
    }

    /// Shear Schur modulus `(mu0*mu1 - omega0^2) / mu1`.
    pub fn schur_mu(&self) -> f64 {
        (self.mu0 * self.mu1 - self.omega0 * self.omega0) / self.mu1
    }

    /// Volumetric Schur modulus
    /// `((3*lambda0+2*mu0)(3*lambda1+2*mu1) - (3*beta0+2*omega0)^2) / (3*lambda1+2*mu1)`.
    pub fn schur_volumetric(&self) -> f64 {
        let p0 = 3.0 * self.lambda0 + 2.0 * self.mu0;
        let p1 = 3.0 * self.lambda1 + 2.0 * self.mu1;
        let pw = 3.0 * self.beta0 + 2.0 * self.omega0;
        (p0 * p1 - pw * pw) / p1
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CosseratParams {
    pub rho0: f64,
    pub rho1: f64,
    pub c0: Iso3,
    pub c1: Iso3,
}

impl Default for CosseratParams {
    fn default() -> Self {
        CosseratParams {
            rho0: 1.0,
            rho1: 0.8,
            c0: Iso3::new(0.7, 1.0, 0.5),
            c1: Iso3::new(0.5, 0.6, 0.3),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HemitropicParams {
    pub rho0: f64,
    pub rho1: f64,
    pub c0: Iso3,
    pub c2: Iso3,
    /// Coupling stiffness channels: `alpha = nu0`, `mu = kappa0`,
    /// `lambda = delta0`.
    pub coupling: Iso3,
    pub eta0: f64,
    pub eta1: f64,
}

impl Default for HemitropicParams {
    fn default() -> Self {
        HemitropicParams {
            rho0: 1.0,
            rho1: 0.9,
            c0: Iso3::new(0.8, 1.2, 0.4),
            c2: Iso3::new(0.7, 1.0, 0.3),
            coupling: Iso3::new(0.2, 0.3, 0.1),
            eta0: 1.0,
            eta1: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassicalParams {
    pub rho0: f64,
    pub mu: f64,
    pub lambda: f64,
}

impl Default for ClassicalParams {
    fn default() -> Self {
        ClassicalParams { rho0: 1.0, mu: 1.0, lambda: 0.5 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MicrostretchParams {
    pub rho0: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub c0: Iso3,
    pub c1: Iso3,
    /// Scalar multiple of the identity for the stretch-flux stiffness.
    pub c3: f64,
    /// Stress/couple coupling stiffness.
    pub b: Iso3,
    /// Stress/stretch coupling: `d * vec(identity)`.
    pub d: f64,
    /// Couple/stretch coupling: `e * vec(identity)`.
    pub e: f64,
    /// Stress/stretch-flux coupling: `f * axial`.
    pub f: f64,
    /// Couple/stretch-flux coupling: `g * axial`.
    pub g: f64,
    /// Stretch/stretch-flux coupling row.
    pub k: [f64; 3],
    /// Stretch-force stiffness. `null` selects the balanced value that makes
    /// the residual antiderivative coefficient vanish.
    pub c2: Option<f64>,
}

impl Default for MicrostretchParams {
    fn default() -> Self {
        MicrostretchParams {
            rho0: 1.0,
            rho1: 0.8,
            rho2: 0.6,
            c0: Iso3::new(0.7, 1.0, 0.5),
            c1: Iso3::new(0.5, 0.8, 0.3),
            c3: 0.9,
            b: Iso3::new(0.1, 0.15, 0.05),
            d: 0.2,
            e: 0.1,
            f: 0.15,
            g: 0.1,
            k: [0.05, 0.0, 0.0],
            c2: Some(0.8),
        }
    }
}

impl MicrostretchParams {
    /// Constitutive blocks with the stretch-force entry left at zero.
    pub fn blocks_zero_stretch(&self) -> MicrostretchBlocks {
        let mut vec_id = DMatrix::zeros(9, 1);
        vec_id[(0, 0)] = 1.0;
        vec_id[(4, 0)] = 1.0;
        vec_id[(8, 0)] = 1.0;
        let lam = tensor::lambda_matrix();
        MicrostretchBlocks {
            c0: material::isotropic_c_iso(&self.c0),
            b: material::isotropic_c_iso(&self.b),
            d: &vec_id * self.d,
            f: &lam * self.f,
            c1: material::isotropic_c_iso(&self.c1),
            e: &vec_id * self.e,
            g: &lam * self.g,
            c2: DMatrix::zeros(1, 1),
            k: DMatrix::from_row_slice(1, 3, &self.k),
            c3: DMatrix::identity(3, 3) * self.c3,
        }
    }

    /// Constitutive blocks with the configured (or balanced) stretch force.
    pub fn blocks(&self) -> Result<MicrostretchBlocks> {
        let mut b = self.blocks_zero_stretch();
        let value = match self.c2 {
            Some(v) => v,
            None => b.mother_c2_value()?,
        };
        b.c2 = DMatrix::from_element(1, 1, value);
        Ok(b)
    }
}

// ---------------------------------------------------------------------------
// Built models
// ---------------------------------------------------------------------------

/// A constructed model: per-node material law, differential edges, and the
/// structural validity verdict.
#[derive(Debug, Clone)]
pub struct BuiltModel {
    pub name: ModelName,
    pub law: MaterialLaw,
    pub edges: Vec<DiffEdge>,
    pub validity: Validity,
}

/// Grid-level operators of an instantiated model.
pub struct GridOps {
    pub layout: Vec<BlockDesc>,
    pub grid: Grid,
    pub m0: BlockOperator,
    pub m1: BlockOperator,
    pub m2: BlockOperator,
    pub a: BlockOperator,
}

impl GridOps {
    pub fn system(&self) -> crate::evolution::System<'_> {
        crate::evolution::System { m0: &self.m0, m1: &self.m1, m2: &self.m2, a: &self.a }
    }

    pub fn dim(&self) -> usize {
        self.m0.nrows()
    }
}

impl BuiltModel {
    pub fn layout(&self) -> &[BlockDesc] {
        &self.law.layout
    }

    /// Lifts the per-node law onto a grid and assembles the differential
    /// operator.
    pub fn instantiate(&self, grid: &Grid) -> Result<GridOps> {
        let nodes = grid.nodes();
        let lift = |op: &BlockOperator| -> BlockOperator {
            let expand = |sps: &[SpaceSpec]| {
                sps.iter()
                    .map(|s| SpaceSpec { label: s.label.clone(), dim: s.dim * nodes })
                    .collect::<Vec<_>>()
            };
            let mut out = BlockOperator::new(expand(op.row_spaces()), expand(op.col_spaces()));
            for (&(i, j), data) in op.blocks() {
                if let BlockData::Pointwise { mat, .. } = data {
                    out.set_block(i, j, BlockData::Pointwise { nodes, mat: mat.clone() })
                        .expect("per-node shapes scale uniformly");
                }
            }
            out
        };
        let a = assemble_a(&self.law.layout, &self.edges, grid)?;
        Ok(GridOps {
            layout: self.law.layout.clone(),
            grid: *grid,
            m0: lift(&self.law.m0),
            m1: lift(&self.law.m1),
            m2: lift(&self.law.m2),
            a,
        })
    }
}

fn law_spaces(layout: &[BlockDesc]) -> Vec<SpaceSpec> {
    layout
        .iter()
        .map(|b| SpaceSpec { label: b.label.clone(), dim: b.dim() })
        .collect()
}

/// Bitwise-symmetric part: IEEE addition commutes, so `(m + m^T) / 2` has
/// exactly equal mirror entries even when the product that produced `m`
/// does not.
fn sym_part(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn set_pn(op: &mut BlockOperator, i: usize, j: usize, mat: DMatrix<f64>) -> Result<()> {
    op.set_block(i, j, BlockData::Pointwise { nodes: 1, mat })
}

fn finish(
    name: ModelName,
    layout: Vec<BlockDesc>,
    m0: BlockOperator,
    m1: BlockOperator,
    m2: BlockOperator,
    edges: Vec<DiffEdge>,
) -> BuiltModel {
    let law = MaterialLaw { layout, m0, m1, m2 };
    let validity = material::validate(&law);
    BuiltModel { name, law, edges, validity }
}

/// Accumulates named parameter violations for one model.
#[derive(Default)]
struct Checks(Vec<String>);

impl Checks {
    fn positive(&mut self, name: &str, v: f64) {
        if !(v > 0.0) {
            self.0.push(format!("{name} must be positive"));
        }
    }

    fn iso_channels(&mut self, suffix: &str, iso: &Iso3) {
        self.positive(&format!("alpha{suffix}"), iso.alpha);
        self.positive(&format!("mu{suffix}"), iso.mu);
        self.positive(
            &format!("lambda{suffix} + (2/3)*mu{suffix}"),
            iso.lambda + (2.0 / 3.0) * iso.mu,
        );
    }

    fn custom(&mut self, message: &str, ok: bool) {
        if !ok {
            self.0.push(message.to_string());
        }
    }

    fn finish(self, model: ModelName) -> Result<()> {
        if self.0.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidModel(format!("{model}: {}", self.0.join("; "))))
        }
    }
}

// ---------------------------------------------------------------------------
// Builders
// ---------------------------------------------------------------------------

pub fn build_micromorphic(p: &MicromorphicParams) -> Result<BuiltModel> {
    let mut ch = Checks::default();
    ch.positive("rho0", p.rho0);
    ch.positive("rho2", p.rho2);
    let coeffs = p.coeffs();
    for (name, v) in material::micromorphic_positivity_quantities(&coeffs) {
        ch.positive(name, v);
    }
    ch.finish(ModelName::Micromorphic)?;
    let layout = vec![
        BlockDesc::new("velocity", 1, SubspaceTag::Full),
        BlockDesc::new("micro_velocity", 2, SubspaceTag::Full),
        BlockDesc::new("stress", 2, SubspaceTag::Full),
        BlockDesc::new("hyper_stress", 3, SubspaceTag::Full),
        BlockDesc::new("stress_sym", 2, SubspaceTag::Sym),
    ];
    let w = material::micromorphic_isotropic_w_channels(&coeffs)?;
    let sp = law_spaces(&layout);
    let mut m0 = BlockOperator::square(sp.clone());
    set_pn(&mut m0, 0, 0, DMatrix::identity(3, 3) * p.rho0)?;
    set_pn(&mut m0, 1, 1, DMatrix::identity(9, 9) * p.rho2)?;
    for (bi, wi) in [(2usize, 0usize), (3, 1), (4, 2)] {
        for (bj, wj) in [(2usize, 0usize), (3, 1), (4, 2)] {
            let blk = w.block(wi, wj);
            if blk.iter().any(|v| *v != 0.0) {
                set_pn(&mut m0, bi, bj, blk)?;
            }
        }
    }
    let mut m1 = BlockOperator::square(sp.clone());
    let skw = tensor::skew_projector().matrix;
    let isym = tensor::iota_sym();
    set_pn(&mut m1, 1, 2, -&skw)?;
    set_pn(&mut m1, 2, 1, skw)?;
    set_pn(&mut m1, 1, 4, -&isym)?;
    set_pn(&mut m1, 4, 1, isym.transpose())?;
    let m2 = BlockOperator::square(sp);
    let edges = vec![DiffEdge::plain(2, 0, 1), DiffEdge::plain(3, 1, 2)];
    Ok(finish(ModelName::Micromorphic, layout, m0, m1, m2, edges))
}

pub fn build_cosserat(p: &CosseratParams) -> Result<BuiltModel> {
    let mut ch = Checks::default();
    ch.positive("rho0", p.rho0);
    ch.positive("rho1", p.rho1);
    ch.iso_channels("0", &p.c0);
    ch.iso_channels("1", &p.c1);
    ch.finish(ModelName::Cosserat)?;
    let layout = vec![
        BlockDesc::new("velocity", 1, SubspaceTag::Full),
        BlockDesc::new("spin", 1, SubspaceTag::Full),
        BlockDesc::new("stress", 2, SubspaceTag::Full),
        BlockDesc::new("couple_stress", 2, SubspaceTag::Full),
    ];
    let sp = law_spaces(&layout);
    let mut m0 = BlockOperator::square(sp.clone());
    set_pn(&mut m0, 0, 0, DMatrix::identity(3, 3) * p.rho0)?;
    set_pn(&mut m0, 1, 1, DMatrix::identity(3, 3) * p.rho1)?;
    set_pn(&mut m0, 2, 2, material::inv_isotropic_c(&p.c0)?)?;
    set_pn(&mut m0, 3, 3, material::inv_isotropic_c(&p.c1)?)?;
    let mut m1 = BlockOperator::square(sp.clone());
    let lam = tensor::lambda_matrix();
    set_pn(&mut m1, 1, 2, -lam.transpose())?;
    set_pn(&mut m1, 2, 1, lam)?;
    let m2 = BlockOperator::square(sp);
    let edges = vec![DiffEdge::plain(2, 0, 1), DiffEdge::plain(3, 1, 1)];
    Ok(finish(ModelName::Cosserat, layout, m0, m1, m2, edges))
}

/// The rescaled variant of the Cosserat model with antisymmetric coefficient
/// fields: the spin is the axial coefficient vector, and the couple stress
/// carries an axial last slot.
pub fn build_cosserat_relative(p: &CosseratParams) -> Result<BuiltModel> {
    let mut ch = Checks::default();
    ch.positive("rho0", p.rho0);
    ch.positive("rho1", p.rho1);
    ch.iso_channels("0", &p.c0);
    ch.iso_channels("1", &p.c1);
    ch.finish(ModelName::CosseratRelative)?;
    let layout = vec![
        BlockDesc::new("velocity", 1, SubspaceTag::Full),
        BlockDesc::new("spin_skew", 2, SubspaceTag::Skew),
        BlockDesc::new("stress", 2, SubspaceTag::Full),
        BlockDesc::new("couple_stress_skew", 3, SubspaceTag::Skew),
    ];
    let sp = law_spaces(&layout);
    let mut m0 = BlockOperator::square(sp.clone());
    set_pn(&mut m0, 0, 0, DMatrix::identity(3, 3) * p.rho0)?;
    set_pn(&mut m0, 1, 1, DMatrix::identity(3, 3) * (p.rho1 / 2.0))?;
    set_pn(&mut m0, 2, 2, material::inv_isotropic_c(&p.c0)?)?;
    // Couple-stress stiffness in last-slot axial coordinates: half the
    // axial-conjugated stiffness, so its inverse mass doubles.
    let axial = tensor::iota_skew().transpose() * tensor::lambda_matrix();
    let l9 = tensor::lift_last_two(&axial);
    let c2rel = &l9 * material::isotropic_c_iso(&p.c1) * l9.transpose() * 0.5;
    let inv = c2rel
        .clone()
        .lu()
        .solve(&DMatrix::identity(9, 9))
        .ok_or_else(|| Error::Singular("relative couple-stress stiffness".into()))?;
    let inv = (&inv + inv.transpose()) * 0.5;
    set_pn(&mut m0, 3, 3, inv * 2.0)?;
    let mut m1 = BlockOperator::square(sp.clone());
    let iskw = tensor::iota_skew();
    set_pn(&mut m1, 1, 2, -iskw.transpose())?;
    set_pn(&mut m1, 2, 1, iskw.clone())?;
    let m2 = BlockOperator::square(sp);
    let edges = vec![
        DiffEdge::plain(2, 0, 1),
        DiffEdge {
            row: 3,
            col: 1,
            q: 2,
            left: Some(tensor::lift_last_two(&iskw.transpose())),
            right: Some(iskw),
        },
    ];
    Ok(finish(ModelName::CosseratRelative, layout, m0, m1, m2, edges))
}

/// Explicit hemitropic constitutive blocks (used directly for derived
/// children of the microstretch model).
#[derive(Debug, Clone)]
pub struct HemitropicBlocks {
    pub rho0: f64,
    pub rho1: f64,
    pub c0: DMatrix<f64>,
    pub e: DMatrix<f64>,
    pub c2: DMatrix<f64>,
    pub eta0: f64,
    pub eta1: f64,
}

pub fn build_hemitropic_from_blocks(b: &HemitropicBlocks) -> Result<BuiltModel> {
    let mut ch = Checks::default();
    ch.positive("rho0", b.rho0);
    ch.positive("rho1", b.rho1);
    let mut joint = DMatrix::zeros(18, 18);
    joint.view_mut((0, 0), (9, 9)).copy_from(&b.c0);
    joint.view_mut((0, 9), (9, 9)).copy_from(&b.e.transpose());
    joint.view_mut((9, 0), (9, 9)).copy_from(&b.e);
    joint.view_mut((9, 9), (9, 9)).copy_from(&b.c2);
    ch.custom(
        "stress stiffness must be positive definite",
        crate::blocks::min_symmetric_eigenvalue(&joint) > 0.0,
    );
    ch.finish(ModelName::Hemitropic)?;
    let layout = vec![
        BlockDesc::new("velocity", 1, SubspaceTag::Full),
        BlockDesc::new("spin", 1, SubspaceTag::Full),
        BlockDesc::new("stress", 2, SubspaceTag::Full),
        BlockDesc::new("couple_stress", 2, SubspaceTag::Full),
    ];
    let sp = law_spaces(&layout);
    let mut m0 = BlockOperator::square(sp.clone());
    set_pn(&mut m0, 0, 0, DMatrix::identity(3, 3) * b.rho0)?;
    set_pn(&mut m0, 1, 1, DMatrix::identity(3, 3) * b.rho1)?;
    let inv = crate::blocks::block_inverse_2x2(&b.c0, &b.e.transpose(), &b.e, &b.c2)?;
    let tl = (&inv.tl + inv.tl.transpose()) * 0.5;
    let br = (&inv.br + inv.br.transpose()) * 0.5;
    set_pn(&mut m0, 2, 2, tl)?;
    set_pn(&mut m0, 2, 3, inv.tr.clone())?;
    set_pn(&mut m0, 3, 2, inv.tr.transpose())?;
    set_pn(&mut m0, 3, 3, br)?;
    let mut m1 = BlockOperator::square(sp.clone());
    let lam = tensor::lambda_matrix();
    if b.eta0 != 0.0 {
        set_pn(&mut m1, 1, 2, lam.transpose() * (-b.eta0))?;
        set_pn(&mut m1, 2, 1, &lam * b.eta0)?;
    }
    if b.eta1 != 0.0 {
        set_pn(&mut m1, 0, 3, lam.transpose() * (-b.eta1))?;
        set_pn(&mut m1, 3, 0, &lam * b.eta1)?;
    }
    let m2 = BlockOperator::square(sp);
    let edges = vec![DiffEdge::plain(2, 0, 1), DiffEdge::plain(3, 1, 1)];
    Ok(finish(ModelName::Hemitropic, layout, m0, m1, m2, edges))
}

pub fn build_hemitropic(p: &HemitropicParams) -> Result<BuiltModel> {
    let mut ch = Checks::default();
    ch.positive("rho0", p.rho0);
    ch.positive("rho1", p.rho1);
    for (name, v) in material::hemitropic_positivity_quantities(&p.c0, &p.c2, &p.coupling) {
        ch.positive(name, v);
    }
    ch.finish(ModelName::Hemitropic)?;
    build_hemitropic_from_blocks(&HemitropicBlocks {
        rho0: p.rho0,
        rho1: p.rho1,
        c0: material::isotropic_c_iso(&p.c0),
        e: material::isotropic_c_iso(&p.coupling),
        c2: material::isotropic_c_iso(&p.c2),
        eta0: p.eta0,
        eta1: p.eta1,
    })
}

pub fn build_classical(p: &ClassicalParams) -> Result<BuiltModel> {
    let mut ch = Checks::default();
    ch.positive("rho0", p.rho0);
    ch.positive("mu", p.mu);
    ch.positive("lambda + (2/3)*mu", p.lambda + (2.0 / 3.0) * p.mu);
    ch.finish(ModelName::Classical)?;
    let layout = vec![
        BlockDesc::new("velocity", 1, SubspaceTag::Full),
        BlockDesc::new("stress_sym", 2, SubspaceTag::Sym),
    ];
    let sp = law_spaces(&layout);
    let mut m0 = BlockOperator::square(sp.clone());
    set_pn(&mut m0, 0, 0, DMatrix::identity(3, 3) * p.rho0)?;
    let isym = tensor::iota_sym();
    let compliance = tensor::sym0_projector().matrix * (0.5 / p.mu)
        + tensor::p_projector().matrix * (1.0 / (3.0 * p.lambda + 2.0 * p.mu));
    set_pn(&mut m0, 1, 1, sym_part(&(isym.transpose() * compliance * &isym)))?;
    let m1 = BlockOperator::square(sp.clone());
    let m2 = BlockOperator::square(sp);
    let edges = vec![DiffEdge {
        row: 1,
        col: 0,
        q: 1,
        left: Some(isym.transpose()),
        right: None,
    }];
    Ok(finish(ModelName::Classical, layout, m0, m1, m2, edges))
}

/// Shared construction for the three restricted micromorphic variants: the
/// micro-velocity and hyper-stress are restricted to a subspace (`micro`),
/// and the stress either keeps all components or only its symmetric part.
fn build_restricted_micromorphic(
    name: ModelName,
    p: &MicromorphicParams,
    micro: SubspaceTag,
    sym_stress: bool,
) -> Result<BuiltModel> {
    let mut ch = Checks::default();
    ch.positive("rho0", p.rho0);
    ch.positive("rho2", p.rho2);
    let coeffs = p.coeffs();
    for (name_q, v) in material::micromorphic_positivity_quantities(&coeffs) {
        ch.positive(name_q, v);
    }
    ch.finish(name)?;
    let micro_label = match micro {
        SubspaceTag::Skew => "spin_skew",
        SubspaceTag::Sym0 => "micro_velocity_dev",
        _ => return Err(Error::InvalidModel("unsupported micro restriction".into())),
    };
    let flux_label = match micro {
        SubspaceTag::Skew => "couple_stress_skew",
        _ => "hyper_stress_dev",
    };
    let (stress_label, stress_tag) = if sym_stress {
        ("stress_sym", SubspaceTag::Sym)
    } else {
        ("stress", SubspaceTag::Full)
    };
    let layout = vec![
        BlockDesc::new("velocity", 1, SubspaceTag::Full),
        BlockDesc::new(micro_label, 2, micro),
        BlockDesc::new(stress_label, 2, stress_tag),
        BlockDesc::new(flux_label, 3, micro),
    ];
    let w = material::micromorphic_isotropic_w_channels(&coeffs)?;
    let emb = micro.embedding(); // 9 x m
    let lift = tensor::lift_last_two(&emb); // 27 x 3m
    let isym = tensor::iota_sym();
    let sp = law_spaces(&layout);
    let mut m0 = BlockOperator::square(sp.clone());
    set_pn(&mut m0, 0, 0, DMatrix::identity(3, 3) * p.rho0)?;
    set_pn(&mut m0, 1, 1, (emb.transpose() * &emb) * p.rho2)?;
    let w00 = w.block(0, 0);
    let w01 = w.block(0, 1);
    let w11 = w.block(1, 1);
    let (s22, s23) = if sym_stress {
        (sym_part(&(isym.transpose() * &w00 * &isym)), isym.transpose() * &w01 * &lift)
    } else {
        (w00.clone(), &w01 * &lift)
    };
    set_pn(&mut m0, 2, 2, s22)?;
    if s23.iter().any(|v| *v != 0.0) {
        set_pn(&mut m0, 2, 3, s23.clone())?;
        set_pn(&mut m0, 3, 2, s23.transpose())?;
    }
    set_pn(&mut m0, 3, 3, sym_part(&(lift.transpose() * &w11 * &lift)))?;
    // The restricted micro-velocity annihilates both algebraic couplings of
    // the mother model, so there is no skew-selfadjoint part left.
    let m1 = BlockOperator::square(sp.clone());
    let m2 = BlockOperator::square(sp);
    let stress_left = if sym_stress { Some(isym.transpose()) } else { None };
    let edges = vec![
        DiffEdge { row: 2, col: 0, q: 1, left: stress_left, right: None },
        DiffEdge {
            row: 3,
            col: 1,
            q: 2,
            left: Some(tensor::lift_last_two(&emb.transpose())),
            right: Some(emb),
        },
    ];
    Ok(finish(name, layout, m0, m1, m2, edges))
}

pub fn build_sym_stress(p: &MicromorphicParams) -> Result<BuiltModel> {
    build_restricted_micromorphic(ModelName::SymStress, p, SubspaceTag::Skew, true)
}

pub fn build_sym0_variant(p: &MicromorphicParams) -> Result<BuiltModel> {
    build_restricted_micromorphic(ModelName::Sym0Variant, p, SubspaceTag::Sym0, false)
}

pub fn build_sym0_sym_stress(p: &MicromorphicParams) -> Result<BuiltModel> {
    build_restricted_micromorphic(ModelName::Sym0SymStress, p, SubspaceTag::Sym0, true)
}

pub fn build_microstretch(p: &MicrostretchParams) -> Result<BuiltModel> {
    let mut ch = Checks::default();
    ch.positive("rho0", p.rho0);
    ch.positive("rho1", p.rho1);
    ch.positive("rho2", p.rho2);
    let blocks = match p.blocks() {
        Ok(b) => b,
        Err(Error::Singular(_)) => {
            ch.custom("stress stiffness must be positive definite", false);
            ch.finish(ModelName::Microstretch)?;
            unreachable!("finish returned Ok with a recorded violation");
        }
        Err(e) => return Err(e),
    };
    let red = material::microstretch_reduce(&blocks)?;
    ch.custom(
        "stress stiffness must be positive definite",
        crate::blocks::min_symmetric_eigenvalue(&red.w) > 0.0,
    );
    ch.finish(ModelName::Microstretch)?;
    let layout = vec![
        BlockDesc::new("velocity", 1, SubspaceTag::Full),
        BlockDesc::new("spin", 1, SubspaceTag::Full),
        BlockDesc::new("stretch_rate", 0, SubspaceTag::Full),
        BlockDesc::new("stress", 2, SubspaceTag::Full),
        BlockDesc::new("couple_stress", 2, SubspaceTag::Full),
        BlockDesc::new("stretch_flux", 1, SubspaceTag::Full),
    ];
    let sp = law_spaces(&layout);
    let mut m0 = BlockOperator::square(sp.clone());
    set_pn(&mut m0, 0, 0, DMatrix::identity(3, 3) * p.rho0)?;
    set_pn(&mut m0, 1, 1, DMatrix::identity(3, 3) * p.rho1)?;
    set_pn(&mut m0, 2, 2, DMatrix::from_element(1, 1, p.rho2))?;
    let offs = [0usize, 9, 18, 21];
    for (bi, wi) in [(3usize, 0usize), (4, 1), (5, 2)] {
        for (bj, wj) in [(3usize, 0usize), (4, 1), (5, 2)] {
            let blk = red
                .w
                .view((offs[wi], offs[wj]), (offs[wi + 1] - offs[wi], offs[wj + 1] - offs[wj]))
                .into_owned();
            if blk.iter().any(|v| *v != 0.0) {
                set_pn(&mut m0, bi, bj, blk)?;
            }
        }
    }
    let mut m1 = BlockOperator::square(sp.clone());
    let lam = tensor::lambda_matrix();
    set_pn(&mut m1, 1, 3, -lam.transpose())?;
    set_pn(&mut m1, 3, 1, lam)?;
    for (bj, wj) in [(3usize, 0usize), (4, 1), (5, 2)] {
        let col = red
            .m1_coupling
            .view((offs[wj], 0), (offs[wj + 1] - offs[wj], 1))
            .into_owned();
        if col.iter().any(|v| *v != 0.0) {
            set_pn(&mut m1, 2, bj, col.transpose())?;
            set_pn(&mut m1, bj, 2, -col)?;
        }
    }
    let mut m2 = BlockOperator::square(sp);
    if red.m2_block[(0, 0)] != 0.0 {
        set_pn(&mut m2, 2, 2, red.m2_block.clone())?;
    }
    let edges = vec![
        DiffEdge::plain(3, 0, 1),
        DiffEdge::plain(4, 1, 1),
        DiffEdge::plain(5, 2, 0),
    ];
    Ok(finish(ModelName::Microstretch, layout, m0, m1, m2, edges))
}

// ---------------------------------------------------------------------------
// Catalog dispatch
// ---------------------------------------------------------------------------

fn parse_params<T: serde::de::DeserializeOwned>(params: Option<&Value>) -> Result<T>
where
    T: Default,
{
    match params {
        None | Some(Value::Null) => Ok(T::default()),
        Some(v) => serde_json::from_value(v.clone()).map_err(Error::Json),
    }
}

/// Builds a catalog model from its JSON parameter object (or defaults when
/// absent).
pub fn build(name: ModelName, params: Option<&Value>) -> Result<BuiltModel> {
    match name {
        ModelName::Micromorphic => build_micromorphic(&parse_params(params)?),
        ModelName::Cosserat => build_cosserat(&parse_params(params)?),
        ModelName::CosseratRelative => build_cosserat_relative(&parse_params(params)?),
        ModelName::Hemitropic => build_hemitropic(&parse_params(params)?),
        ModelName::Classical => build_classical(&parse_params(params)?),
        ModelName::SymStress => build_sym_stress(&parse_params(params)?),
        ModelName::Sym0Variant => build_sym0_variant(&parse_params(params)?),
        ModelName::Sym0SymStress => build_sym0_sym_stress(&parse_params(params)?),
        ModelName::Microstretch => build_microstretch(&parse_params(params)?),
    }
}

pub fn build_default(name: ModelName) -> Result<BuiltModel> {
    build(name, None)
}

pub fn default_params(name: ModelName) -> Value {
    match name {
        ModelName::Micromorphic | ModelName::SymStress | ModelName::Sym0Variant
        | ModelName::Sym0SymStress => {
            serde_json::to_value(MicromorphicParams::default()).expect("serializable")
        }
        ModelName::Cosserat | ModelName::CosseratRelative => {
            serde_json::to_value(CosseratParams::default()).expect("serializable")
        }
        ModelName::Hemitropic => {
            serde_json::to_value(HemitropicParams::default()).expect("serializable")
        }
        ModelName::Classical => {
            serde_json::to_value(ClassicalParams::default()).expect("serializable")
        }
        ModelName::Microstretch => {
            serde_json::to_value(MicrostretchParams::default()).expect("serializable")
        }
    }
}

// ---------------------------------------------------------------------------
// Reduction edges
// ---------------------------------------------------------------------------

/// The ordered pairs connected by a catalog reduction edge.
pub fn edge_catalog() -> Vec<(ModelName, ModelName)> {
    vec![
        (ModelName::Micromorphic, ModelName::CosseratRelative),
        (ModelName::Micromorphic, ModelName::Classical),
        (ModelName::Micromorphic, ModelName::SymStress),
        (ModelName::Micromorphic, ModelName::Sym0Variant),
        (ModelName::Micromorphic, ModelName::Sym0SymStress),
        (ModelName::Cosserat, ModelName::CosseratRelative),
        (ModelName::Microstretch, ModelName::Hemitropic),
    ]
}

/// The blockwise reduction map of a catalog edge.
pub fn reduction_edge(from: ModelName, to: ModelName) -> Result<ReductionMap> {
    use BlockAction::*;
    let (kind, actions) = match (from, to) {
        (ModelName::Micromorphic, ModelName::CosseratRelative) => {
            (MapKind::Descendant, vec![Identity, SkewT, Identity, LastTwoSkewT, ZeroT])
        }
        (ModelName::Micromorphic, ModelName::Classical) => {
            (MapKind::Descendant, vec![Identity, ZeroT, SymT, ZeroT, ZeroT])
        }
        (ModelName::Micromorphic, ModelName::SymStress) => {
            (MapKind::Descendant, vec![Identity, SkewT, SymT, LastTwoSkewT, ZeroT])
        }
        (ModelName::Micromorphic, ModelName::Sym0Variant) => {
            (MapKind::Descendant, vec![Identity, Sym0T, Identity, LastTwoSym0T, ZeroT])
        }
        (ModelName::Micromorphic, ModelName::Sym0SymStress) => {
            (MapKind::Descendant, vec![Identity, Sym0T, SymT, LastTwoSym0T, ZeroT])
        }
        (ModelName::Cosserat, ModelName::CosseratRelative) => {
            (MapKind::Relative, vec![Identity, AxialHalf, Identity, LastTwoAxial])
        }
        (ModelName::Microstretch, ModelName::Hemitropic) => (
            MapKind::Descendant,
            vec![Identity, Identity, ZeroT, Identity, Identity, ZeroT],
        ),
        _ => {
            return Err(Error::Config(format!(
                "no catalog reduction edge from {from} to {to}"
            )))
        }
    };
    Ok(ReductionMap::new(kind, actions))
}

/// Child Cosserat parameters induced by restricting a micromorphic mother:
/// Schur moduli for the macroscopic stiffness, and an isotropic couple
/// stiffness proportional to the identity in the antisymmetric channel.
pub fn child_cosserat_params(p: &MicromorphicParams) -> CosseratParams {
    let ms = p.schur_mu();
    let pp = p.schur_volumetric();
    CosseratParams {
        rho0: p.rho0,
        rho1: 2.0 * p.rho2,
        c0: Iso3::new(p.alpha1, ms, (pp - 2.0 * ms) / 3.0),
        c1: Iso3::new(2.0 * p.c2.alpha, 2.0 * p.c2.alpha, 0.0),
    }
}

pub fn child_classical_params(p: &MicromorphicParams) -> ClassicalParams {
    let ms = p.schur_mu();
    let pp = p.schur_volumetric();
    ClassicalParams { rho0: p.rho0, mu: ms, lambda: (pp - 2.0 * ms) / 3.0 }
}

/// Child hemitropic blocks induced by eliminating the stretch fields of a
/// microstretch mother: the stretch-flux column is removed by one Schur
/// complement against `C3`.
pub fn child_hemitropic_blocks(p: &MicrostretchParams) -> Result<HemitropicBlocks> {
    let b = p.blocks()?;
    let c3inv = b
        .c3
        .clone()
        .lu()
        .solve(&DMatrix::identity(3, 3))
        .ok_or_else(|| Error::Singular("stretch-flux stiffness".into()))?;
    let c0_hat = &b.c0 - &b.f * &c3inv * b.f.transpose();
    let e_hat = b.b.transpose() - &b.g * &c3inv * b.f.transpose();
    let c2_hat = &b.c1 - &b.g * &c3inv * b.g.transpose();
    Ok(HemitropicBlocks {
        rho0: p.rho0,
        rho1: p.rho1,
        c0: c0_hat,
        e: e_hat,
        c2: c2_hat,
        eta0: 1.0,
        eta1: 0.0,
    })
}

/// A catalog edge resolved against mother parameters: the map plus the
/// directly-built child.
pub struct EdgeBuild {
    pub map: ReductionMap,
    pub child: BuiltModel,
}

pub fn derive_child(from: ModelName, params: Option<&Value>, to: ModelName) -> Result<EdgeBuild> {
    let map = reduction_edge(from, to)?;
    let child = match (from, to) {
        (ModelName::Micromorphic, ModelName::CosseratRelative) => {
            let p: MicromorphicParams = parse_params(params)?;
            build_cosserat_relative(&child_cosserat_params(&p))?
        }
        (ModelName::Micromorphic, ModelName::Classical) => {
            let p: MicromorphicParams = parse_params(params)?;
            build_classical(&child_classical_params(&p))?
        }
        (ModelName::Micromorphic, ModelName::SymStress) => {
            build_sym_stress(&parse_params(params)?)?
        }
        (ModelName::Micromorphic, ModelName::Sym0Variant) => {
            build_sym0_variant(&parse_params(params)?)?
        }
        (ModelName::Micromorphic, ModelName::Sym0SymStress) => {
            build_sym0_sym_stress(&parse_params(params)?)?
        }
        (ModelName::Cosserat, ModelName::CosseratRelative) => {
            build_cosserat_relative(&parse_params(params)?)?
        }
        (ModelName::Microstretch, ModelName::Hemitropic) => {
            let p: MicrostretchParams = parse_params(params)?;
            build_hemitropic_from_blocks(&child_hemitropic_blocks(&p)?)?
        }
        _ => {
            return Err(Error::Config(format!(
                "no catalog reduction edge from {from} to {to}"
            )))
        }
    };
    Ok(EdgeBuild { map, child })
}

// ---------------------------------------------------------------------------
// Catalog metadata
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct BlockInfo {
    pub label: String,
    pub order: usize,
    pub tag: SubspaceTag,
    pub dim_per_node: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelInfo {
    pub name: ModelName,
    pub state_blocks: Vec<BlockInfo>,
    pub default_params: Value,
    pub edges_to: Vec<ModelName>,
}

pub fn catalog_info() -> Result<Vec<ModelInfo>> {
    let edges = edge_catalog();
    ModelName::ALL
        .into_iter()
        .map(|name| {
            let built = build_default(name)?;
            Ok(ModelInfo {
                name,
                state_blocks: built
                    .layout()
                    .iter()
                    .map(|b| BlockInfo {
                        label: b.label.clone(),
                        order: b.order,
                        tag: b.tag,
                        dim_per_node: b.dim(),
                    })
                    .collect(),
                default_params: default_params(name),
                edges_to: edges
                    .iter()
                    .filter(|(f, _)| *f == name)
                    .map(|(_, t)| *t)
                    .collect(),
            })
        })
        .collect()
}
