//! Reflecting-end operators: diagonal K-matrices, reflection-equation
//! residuals, the double-row monodromy, boundary transfer matrix, vacuum
//! eigenvalues, and the two families of boundary commutation coefficients.
//!
//! The double-row monodromy is `U(u) = M(u)·K⁻(u)·M(−u)⁻¹`, describing a
//! row traversed out and back with a reflection at the far end.  The
//! inverse is never formed numerically: since every embedded R-factor is
//! symmetric, the transpose of `M(u)` equals the reversed product
//! `R_{aL}(u)···R_{a1}(u)`, and the 4x4 inverse identity then gives
//! `M(u)ᵀ·M(−u) = (r₁(u)r₁(−u))^L·I` exactly.  The module both uses and
//! independently verifies that identity (the plain product `M(−u)·M(u)`
//! does *not* reduce to a scalar for `L ≥ 2`; the factors only telescope
//! in the reversed order that the transpose supplies).

use num_complex::Complex64;

use crate::dense::{
    embed_one_site, embed_two_site, matmul, matmul_chain, rel_residual, rel_residual_state,
    ComplexMatrix, StateVector,
};
use crate::periodic::{monodromy_full, reference_state, RapiditySet};
use crate::weights::{build_r, build_s, VertexModel};
use crate::{guard_denominator, tol, Error, Result};

/// Left/right reflection parameters (the anisotropy ξ is shared with the
/// bulk [`VertexModel`]).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryParams {
    pub zeta_minus: Complex64,
    pub zeta_plus: Complex64,
}

/// Which end's K-matrix to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KSide {
    Plus,
    Minus,
}

/// The diagonal 2x2 reflection matrix for the chosen end.
///
/// Trigonometric model: `K⁻ = diag(sinh(u+ζ⁻), −sinh(u−ζ⁻))` and
/// `K⁺ = diag(sinh(−u−ξ+ζ⁺), −sinh(−u−ξ−ζ⁺))`.
/// Rational model: `K⁻ = diag(u+ζ⁻, −u+ζ⁻)` and
/// `K⁺ = diag(−u−ξ+ζ⁺, u+ξ+ζ⁺)`.
pub fn build_k(model: &VertexModel, bp: &BoundaryParams, side: KSide, u: Complex64) -> ComplexMatrix {
    use crate::weights::ModelKind;
    let (k11, k22) = match (model.kind(), side) {
        (ModelKind::Xxz, KSide::Minus) => {
            ((u + bp.zeta_minus).sinh(), -((u - bp.zeta_minus).sinh()))
        }
        (ModelKind::Xxz, KSide::Plus) => {
            let xi = model.xi();
            (
                (-u - xi + bp.zeta_plus).sinh(),
                -((-u - xi - bp.zeta_plus).sinh()),
            )
        }
        (ModelKind::Xxx, KSide::Minus) => (u + bp.zeta_minus, -u + bp.zeta_minus),
        (ModelKind::Xxx, KSide::Plus) => {
            let xi = model.xi();
            (-u - xi + bp.zeta_plus, u + xi + bp.zeta_plus)
        }
    };
    ComplexMatrix::diagonal(&[k11, k22])
}

/// Partial transpose on the first factor of a 4x4 two-factor operator:
/// `X^{t₁}[(a,b),(c,d)] = X[(c,b),(a,d)]`.
pub fn partial_transpose_first(m: &ComplexMatrix) -> ComplexMatrix {
    assert!(m.rows() == 4 && m.cols() == 4);
    ComplexMatrix::from_fn(4, 4, |row, col| {
        let (a, b) = (row / 2, row % 2);
        let (c, d) = (col / 2, col % 2);
        m.at(c * 2 + b, a * 2 + d)
    })
}

/// Partial transpose on the second factor:
/// `X^{t₂}[(a,b),(c,d)] = X[(a,d),(c,b)]`.
pub fn partial_transpose_second(m: &ComplexMatrix) -> ComplexMatrix {
    assert!(m.rows() == 4 && m.cols() == 4);
    ComplexMatrix::from_fn(4, 4, |row, col| {
        let (a, b) = (row / 2, row % 2);
        let (c, d) = (col / 2, col % 2);
        m.at(a * 2 + d, c * 2 + b)
    })
}

/// Reflection residual at the far end with caller-suppliedK-matrices
/// `K⁻(u)` and `K⁻(v)` (used by corruption controls):
/// `R(u−v)·K₁⁻(u)·R(u+v)·K₂⁻(v) = K₂⁻(v)·R(u+v)·K₁⁻(u)·R(u−v)` on the
/// four-dimensional two-factor space.
pub fn reflection_residual_minus_with(
    model: &VertexModel,
    ku: &ComplexMatrix,
    kv: &ComplexMatrix,
    u: Complex64,
    v: Complex64,
) -> f64 {
    let i2 = ComplexMatrix::identity(2);
    let k1 = crate::dense::kron(ku, &i2).expect("4x4");
    let k2 = crate::dense::kron(&i2, kv).expect("4x4");
    let r_minus = build_r(model, u - v);
    let r_plus = build_r(model, u + v);
    let lhs = matmul_chain(&[&r_minus, &k1, &r_plus, &k2]).expect("fixed shapes");
    let rhs = matmul_chain(&[&k2, &r_plus, &k1, &r_minus]).expect("fixed shapes");
    rel_residual(&lhs, &rhs).expect("same shapes")
}

/// Reflection residual at the far end with the published K⁻.
pub fn reflection_residual_minus(
    model: &VertexModel,
    bp: &BoundaryParams,
    u: Complex64,
    v: Complex64,
) -> f64 {
    let ku = build_k(model, bp, KSide::Minus, u);
    let kv = build_k(model, bp, KSide::Minus, v);
    reflection_residual_minus_with(model, &ku, &kv, u, v)
}

/// Reflection residual at the near end, with the partial transposes
/// applied as written and the crossing parameter ρ taken from the model:
/// `R(v−u)·[K₁⁺(u)]^{t₁}·R(−u−v−2ρ)·[K₂⁺(v)]^{t₂} =
///  [K₂⁺(v)]^{t₂}·R(−u−v−2ρ)·[K₁⁺(u)]^{t₁}·R(v−u)`.
pub fn reflection_residual_plus(
    model: &VertexModel,
    bp: &BoundaryParams,
    u: Complex64,
    v: Complex64,
) -> f64 {
    let i2 = ComplexMatrix::identity(2);
    let k1 = partial_transpose_first(
        &crate::dense::kron(&build_k(model, bp, KSide::Plus, u), &i2).expect("4x4"),
    );
    let k2 = partial_transpose_second(
        &crate::dense::kron(&i2, &build_k(model, bp, KSide::Plus, v)).expect("4x4"),
    );
    let rho = model.rho();
    let r_vu = build_r(model, v - u);
    let r_cross = build_r(model, -u - v - rho * 2.0);
    let lhs = matmul_chain(&[&r_vu, &k1, &r_cross, &k2]).expect("fixed shapes");
    let rhs = matmul_chain(&[&k2, &r_cross, &k1, &r_vu]).expect("fixed shapes");
    rel_residual(&lhs, &rhs).expect("same shapes")
}

/// Proportionality residual of the crossing isomorphism
/// `K⁺(u) ∝ [K⁻(−u−ρ)]ᵗ` with the reflection parameter carried over
/// (`ζ⁻ ← ζ⁺`).  The scale factor is fitted by least squares; only
/// proportionality is asserted.
pub fn crossing_residual(model: &VertexModel, bp: &BoundaryParams, u: Complex64) -> f64 {
    let kplus = build_k(model, bp, KSide::Plus, u);
    let carried = BoundaryParams {
        zeta_minus: bp.zeta_plus,
        zeta_plus: bp.zeta_plus,
    };
    let kminus_crossed = build_k(model, &carried, KSide::Minus, -u - model.rho()).transpose();
    // Least-squares scale: ⟨crossed, plus⟩ / ⟨crossed, crossed⟩.
    let mut num = Complex64::new(0.0, 0.0);
    let mut den = 0.0;
    for (a, b) in kminus_crossed.entries().iter().zip(kplus.entries()) {
        num += a.conj() * b;
        den += a.norm_sqr();
    }
    if den == 0.0 {
        return kplus.frobenius_norm();
    }
    let scaled = kminus_crossed.scale(num / den);
    rel_residual(&kplus, &scaled).expect("same shapes")
}

/// The shift ratio `f(u) = r₃(2u)/r₁(2u)` that rediagonalizes the
/// double-row `D` operator.
pub fn f_shift(model: &VertexModel, u: Complex64) -> Result<Complex64> {
    let den = guard_denominator(model.r1(u * 2.0), "shift ratio denominator r1(2u)")?;
    Ok(model.r3(u * 2.0) / den)
}

/// Shifted near-end K entries: `κ₁₁⁺ = k₁₁⁺ + f(u)·k₂₂⁺`, `κ₂₂⁺ = k₂₂⁺`.
pub fn kappa_plus(
    model: &VertexModel,
    bp: &BoundaryParams,
    u: Complex64,
) -> Result<(Complex64, Complex64)> {
    let k = build_k(model, bp, KSide::Plus, u);
    let f = f_shift(model, u)?;
    Ok((k.at(0, 0) + f * k.at(1, 1), k.at(1, 1)))
}

/// The four blocks of the double-row monodromy plus their shifted
/// variants `𝒜 = A` and `𝒟 = D − f(u)·A`.
#[derive(Debug, Clone)]
pub struct BoundaryBlocks {
    pub a: ComplexMatrix,
    pub b: ComplexMatrix,
    pub c: ComplexMatrix,
    pub d: ComplexMatrix,
    pub shifted_a: ComplexMatrix,
    pub shifted_d: ComplexMatrix,
    pub sites: usize,
}

/// Scalar `(r₁(u)·r₁(−u))^L` normalizing the double-row construction.
pub fn inverse_normalizer(model: &VertexModel, u: Complex64, sites: usize) -> Result<Complex64> {
    let base = model.r1(u) * model.r1(-u);
    guard_denominator(base, "monodromy inverse normalizer r1(u)r1(-u)")?;
    Ok(base.powu(sites as u32))
}

/// Residual of the transpose-inverse identity
/// `M(u)ᵀ·M(−u) = (r₁(u)r₁(−u))^L·I` on the `2^(L+1)` space.
pub fn monodromy_inverse_residual(model: &VertexModel, u: Complex64, sites: usize) -> Result<f64> {
    let m_u = monodromy_full(model, u, sites)?;
    let m_neg = monodromy_full(model, -u, sites)?;
    let c = inverse_normalizer(model, u, sites)?;
    let prod = matmul(&m_u.transpose(), &m_neg)?;
    let scaled = ComplexMatrix::identity(prod.rows()).scale(c);
    rel_residual(&prod, &scaled)
}

/// Double-row monodromy with an explicit far-end matrix in place of the
/// published K⁻ (corruption controls and reuse):
/// `U = M(u)·(K ⊗ I)·M(u)ᵀ / (r₁(u)r₁(−u))^L`.
pub fn double_monodromy_with_k(
    model: &VertexModel,
    kminus: &ComplexMatrix,
    u: Complex64,
    sites: usize,
) -> Result<BoundaryBlocks> {
    let c = inverse_normalizer(model, u, sites)?;
    let m = monodromy_full(model, u, sites)?;
    let k_embedded = embed_one_site(kminus, 0, sites + 1)?;
    let full = matmul_chain(&[&m, &k_embedded, &m.transpose()])?.scale(1.0 / c);
    let blocks = crate::periodic::MonodromyBlocks::from_full(&full, sites);
    let f = f_shift(model, u)?;
    let shifted_d = blocks.d.sub(&blocks.a.scale(f))?;
    Ok(BoundaryBlocks {
        shifted_a: blocks.a.clone(),
        a: blocks.a,
        b: blocks.b,
        c: blocks.c,
        d: blocks.d,
        shifted_d,
        sites,
    })
}

/// Double-row monodromy with the published far-end K⁻.
pub fn double_monodromy(
    model: &VertexModel,
    bp: &BoundaryParams,
    u: Complex64,
    sites: usize,
) -> Result<BoundaryBlocks> {
    let k = build_k(model, bp, KSide::Minus, u);
    double_monodromy_with_k(model, &k, u, sites)
}

/// Complete homogeneous sum `h_d(x, y) = Σ_{k=0}^{d} x^k·y^{d−k}`.
pub fn homogeneous_sum(x: Complex64, y: Complex64, degree: usize) -> Complex64 {
    let mut total = Complex64::new(0.0, 0.0);
    for k in 0..=degree {
        total += x.powu(k as u32) * y.powu((degree - k) as u32);
    }
    total
}

/// Which closed form to use for the double-row vacuum values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VacuumForm {
    /// `δ` via the complete homogeneous symmetric polynomial in
    /// `(r₁², r₂²)`.
    HomogeneousPoly,
    /// `δ` via the shift decomposition `δ = f·α + 𝔡`.
    ShiftedForm,
}

/// Vacuum eigenvalues of the double-row blocks: `A·Ψ₀ = α·Ψ₀`,
/// `D·Ψ₀ = δ·Ψ₀`, and the shifted pair `𝔞 = α`, `𝔡 = δ − f·α`.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryVacuum {
    pub alpha: Complex64,
    pub delta: Complex64,
    pub frak_a: Complex64,
    pub frak_d: Complex64,
}

/// Evaluates the vacuum values by the chosen closed form.
pub fn boundary_vacuum(
    model: &VertexModel,
    bp: &BoundaryParams,
    u: Complex64,
    sites: usize,
    form: VacuumForm,
) -> Result<BoundaryVacuum> {
    let c = inverse_normalizer(model, u, sites)?;
    let k = build_k(model, bp, KSide::Minus, u);
    let (k11, k22) = (k.at(0, 0), k.at(1, 1));
    let f = f_shift(model, u)?;
    let r1 = model.r1(u);
    let r2 = model.r2(u);
    let l = sites as u32;
    let alpha = k11 * r1.powu(2 * l) / c;
    let delta = match form {
        VacuumForm::HomogeneousPoly => {
            let h = homogeneous_sum(r1 * r1, r2 * r2, sites - 1);
            (k22 * r2.powu(2 * l) + k11 * h * model.r3(u) * model.r3(u)) / c
        }
        VacuumForm::ShiftedForm => f * alpha + (k22 - f * k11) * r2.powu(2 * l) / c,
    };
    Ok(BoundaryVacuum {
        alpha,
        delta,
        frak_a: alpha,
        frak_d: delta - f * alpha,
    })
}

/// Boundary transfer matrix assembled from the raw blocks:
/// `T(u) = k₁₁⁺(u)·A(u) + k₂₂⁺(u)·D(u)`.
pub fn transfer_boundary(
    model: &VertexModel,
    bp: &BoundaryParams,
    u: Complex64,
    sites: usize,
) -> Result<ComplexMatrix> {
    let blocks = double_monodromy(model, bp, u, sites)?;
    let k = build_k(model, bp, KSide::Plus, u);
    blocks
        .a
        .scale(k.at(0, 0))
        .add(&blocks.d.scale(k.at(1, 1)))
}

/// The same transfer matrix assembled through the shifted operators:
/// `T(u) = κ₁₁⁺·𝒜(u) + κ₂₂⁺·𝒟(u)`.
pub fn transfer_boundary_shifted_route(
    model: &VertexModel,
    bp: &BoundaryParams,
    u: Complex64,
    sites: usize,
) -> Result<ComplexMatrix> {
    let blocks = double_monodromy(model, bp, u, sites)?;
    let (k11, k22) = kappa_plus(model, bp, u)?;
    blocks
        .shifted_a
        .scale(k11)
        .add(&blocks.shifted_d.scale(k22))
}

/// Unshifted boundary commutation coefficients at `(u, v)`.
#[derive(Debug, Clone, Copy)]
pub struct UnshiftedBoundaryCoeffs {
    pub a1: Complex64,
    pub a2: Complex64,
    pub a3: Complex64,
    pub d1: Complex64,
    pub d2: Complex64,
    pub d3: Complex64,
    /// Coefficient of the asymmetric `B(v)A(u)` term; the shifted family
    /// has no counterpart (the shift removes the term entirely).
    pub d4: Complex64,
}

/// Shifted boundary commutation coefficients at `(u, v)`; exactly three
/// per family, with no asymmetric fourth term.
#[derive(Debug, Clone, Copy)]
pub struct ShiftedBoundaryCoeffs {
    pub a1: Complex64,
    pub a2: Complex64,
    pub a3: Complex64,
    pub d1: Complex64,
    pub d2: Complex64,
    pub d3: Complex64,
}

/// The published rational expressions for the unshifted coefficients.
pub fn boundary_coeffs_unshifted(
    model: &VertexModel,
    u: Complex64,
    v: Complex64,
) -> Result<UnshiftedBoundaryCoeffs> {
    let r1uv = guard_denominator(model.r1(u + v), "boundary coefficient denominator r1(u+v)")?;
    let r2vu = guard_denominator(model.r2(v - u), "boundary coefficient denominator r2(v-u)")?;
    let r2uv = guard_denominator(model.r2(u - v), "boundary coefficient denominator r2(u-v)")?;
    let r2pl = guard_denominator(model.r2(u + v), "boundary coefficient denominator r2(u+v)")?;

    let r1vu = model.r1(v - u);
    let r1um = model.r1(u - v);
    let r3vu = model.r3(v - u);
    let r3um = model.r3(u - v);
    let r3pl = model.r3(u + v);

    let a1 = r1vu * r2pl / (r1uv * r2vu);
    let a2 = -(r2pl * r3vu) / (r1uv * r2vu);
    let a3 = -r3pl / r1uv;

    let d1 = r1um * r1uv / (r2uv * r2pl) - r1um * r3pl * r3pl / (r1uv * r2uv * r2pl);
    let d2 = r3um * r3pl * r3pl / (r1uv * r2uv * r2pl) - r1uv * r3um / (r2uv * r2pl);
    let d3 = r3pl * r1um * r1um / (r1uv * r2uv * r2uv)
        + r3um * r3vu * r3pl / (r1uv * r2uv * r2vu);
    let d4 = -(r1um * r3um * r3pl) / (r1uv * r2uv * r2uv)
        - (r1vu * r3um * r3pl) / (r1uv * r2uv * r2vu);

    Ok(UnshiftedBoundaryCoeffs {
        a1,
        a2,
        a3,
        d1,
        d2,
        d3,
        d4,
    })
}

/// The shifted coefficients, derived from the unshifted ones and the
/// shift ratio `f`:
/// `𝖺₂ = a₂ + a₃·f(v)`, `𝖽₂ = d₂ − a₃·f(u)`,
/// `𝖽₃ = d₃ − 𝖺₂·f(u) + d₂·f(v)`, everything else carried over.
pub fn boundary_coeffs_shifted(
    model: &VertexModel,
    u: Complex64,
    v: Complex64,
) -> Result<ShiftedBoundaryCoeffs> {
    let raw = boundary_coeffs_unshifted(model, u, v)?;
    let fu = f_shift(model, u)?;
    let fv = f_shift(model, v)?;
    let a2 = raw.a2 + raw.a3 * fv;
    Ok(ShiftedBoundaryCoeffs {
        a1: raw.a1,
        a2,
        a3: raw.a3,
        d1: raw.d1,
        d2: raw.d2 - raw.a3 * fu,
        d3: raw.d3 - a2 * fu + raw.d2 * fv,
    })
}

/// Absolute residuals of the four quadratic identities tying the shifted
/// coefficients together (arguments `(u, w, v)`: probe, bystander,
/// target):
///
/// 1. `𝖺₁(u,w)𝖺₂(u,v) + 𝖺₂(u,w)𝖺₂(w,v) + 𝖺₃(u,w)𝖽₃(w,v) = 𝖺₂(u,v)𝖺₁(v,w)`
/// 2. `𝖺₁(u,w)𝖺₃(u,v) + 𝖺₂(u,w)𝖺₃(w,v) + 𝖺₃(u,w)𝖽₂(w,v) = 𝖺₃(u,v)𝖽₁(v,w)`
/// 3. `𝖽₁(u,w)𝖽₂(u,v) + 𝖽₂(u,w)𝖽₂(w,v) + 𝖽₃(u,w)𝖺₃(w,v) = 𝖽₂(u,v)𝖽₁(v,w)`
/// 4. `𝖽₁(u,w)𝖽₃(u,v) + 𝖽₂(u,w)𝖽₃(w,v) + 𝖽₃(u,w)𝖺₂(w,v) = 𝖽₃(u,v)𝖺₁(v,w)`
pub fn boundary_coefficient_identity_residuals(
    model: &VertexModel,
    u: Complex64,
    w: Complex64,
    v: Complex64,
) -> Result<[f64; 4]> {
    let uw = boundary_coeffs_shifted(model, u, w)?;
    let uv = boundary_coeffs_shifted(model, u, v)?;
    let wv = boundary_coeffs_shifted(model, w, v)?;
    let vw = boundary_coeffs_shifted(model, v, w)?;
    let e1 = uw.a1 * uv.a2 + uw.a2 * wv.a2 + uw.a3 * wv.d3 - uv.a2 * vw.a1;
    let e2 = uw.a1 * uv.a3 + uw.a2 * wv.a3 + uw.a3 * wv.d2 - uv.a3 * vw.d1;
    let e3 = uw.d1 * uv.d2 + uw.d2 * wv.d2 + uw.d3 * wv.a3 - uv.d2 * vw.d1;
    let e4 = uw.d1 * uv.d3 + uw.d2 * wv.d3 + uw.d3 * wv.a2 - uv.d3 * vw.a1;
    Ok([e1.norm(), e2.norm(), e3.norm(), e4.norm()])
}

/// Matrix-level residuals of the unshifted commutation relations at
/// `(u, v)` (the `D`-relation includes the asymmetric `d₄` term) plus the
/// commutativity of the boundary creation operators.
#[derive(Debug, Clone, Copy)]
pub struct UnshiftedCommutationResiduals {
    pub ab: f64,
    pub db: f64,
    pub bb: f64,
}

pub fn unshifted_commutation_residuals(
    model: &VertexModel,
    bp: &BoundaryParams,
    u: Complex64,
    v: Complex64,
    sites: usize,
) -> Result<UnshiftedCommutationResiduals> {
    let co = boundary_coeffs_unshifted(model, u, v)?;
    let bu = double_monodromy(model, bp, u, sites)?;
    let bv = double_monodromy(model, bp, v, sites)?;

    let ab_lhs = matmul(&bu.a, &bv.b)?;
    let ab_rhs = matmul(&bv.b, &bu.a)?
        .scale(co.a1)
        .add(&matmul(&bu.b, &bv.a)?.scale(co.a2))?
        .add(&matmul(&bu.b, &bv.d)?.scale(co.a3))?;

    let db_lhs = matmul(&bu.d, &bv.b)?;
    let db_rhs = matmul(&bv.b, &bu.d)?
        .scale(co.d1)
        .add(&matmul(&bu.b, &bv.d)?.scale(co.d2))?
        .add(&matmul(&bu.b, &bv.a)?.scale(co.d3))?
        .add(&matmul(&bv.b, &bu.a)?.scale(co.d4))?;

    let bb_lhs = matmul(&bu.b, &bv.b)?;
    let bb_rhs = matmul(&bv.b, &bu.b)?;

    Ok(UnshiftedCommutationResiduals {
        ab: rel_residual(&ab_lhs, &ab_rhs)?,
        db: rel_residual(&db_lhs, &db_rhs)?,
        bb: rel_residual(&bb_lhs, &bb_rhs)?,
    })
}

/// Matrix-level residuals of the shifted commutation relations
/// (`𝒜`-relation, `𝒟`-relation); three terms each, no asymmetric term.
pub fn shifted_commutation_residuals(
    model: &VertexModel,
    bp: &BoundaryParams,
    u: Complex64,
    v: Complex64,
    sites: usize,
) -> Result<(f64, f64)> {
    let co = boundary_coeffs_shifted(model, u, v)?;
    let bu = double_monodromy(model, bp, u, sites)?;
    let bv = double_monodromy(model, bp, v, sites)?;

    let ab_lhs = matmul(&bu.shifted_a, &bv.b)?;
    let ab_rhs = matmul(&bv.b, &bu.shifted_a)?
        .scale(co.a1)
        .add(&matmul(&bu.b, &bv.shifted_a)?.scale(co.a2))?
        .add(&matmul(&bu.b, &bv.shifted_d)?.scale(co.a3))?;

    let db_lhs = matmul(&bu.shifted_d, &bv.b)?;
    let db_rhs = matmul(&bv.b, &bu.shifted_d)?
        .scale(co.d1)
        .add(&matmul(&bu.b, &bv.shifted_d)?.scale(co.d2))?
        .add(&matmul(&bu.b, &bv.shifted_a)?.scale(co.d3))?;

    Ok((
        rel_residual(&ab_lhs, &ab_rhs)?,
        rel_residual(&db_lhs, &db_rhs)?,
    ))
}

/// Exchange-relation residual for the double-row monodromy on the
/// `2^(L+2)` space, with S-matrices carrying both argument combinations:
/// `S(u−v)·U(u)·S(u+v)·U(v) = U(v)·S(u+v)·U(u)·S(u−v)`
/// (`U` acts on the first auxiliary factor and the sites; the S-factors
/// couple the two auxiliary factors).
pub fn fundamental_relation_residual_boundary_with_k(
    model: &VertexModel,
    kminus_at: &dyn Fn(Complex64) -> ComplexMatrix,
    u: Complex64,
    v: Complex64,
    sites: usize,
) -> Result<f64> {
    let n = sites + 2;
    let dim = 1usize << n;
    if dim > tol::DIMENSION_CAP {
        return Err(Error::DimensionCap {
            dim,
            cap: tol::DIMENSION_CAP,
        });
    }
    let u_big = |w: Complex64| -> Result<ComplexMatrix> {
        let r = build_r(model, w);
        let mut m = embed_two_site(&r, 0, 2, n)?;
        for q in 3..(sites + 2) {
            m = matmul(&m, &embed_two_site(&r, 0, q, n)?)?;
        }
        let c = inverse_normalizer(model, w, sites)?;
        let k = embed_one_site(&kminus_at(w), 0, n)?;
        Ok(matmul_chain(&[&m, &k, &m.transpose()])?.scale(1.0 / c))
    };
    let s_minus = embed_two_site(&build_s(model, u - v), 0, 1, n)?;
    let s_plus = embed_two_site(&build_s(model, u + v), 0, 1, n)?;
    let uu = u_big(u)?;
    let uv = u_big(v)?;
    let lhs = matmul_chain(&[&s_minus, &uu, &s_plus, &uv])?;
    let rhs = matmul_chain(&[&uv, &s_plus, &uu, &s_minus])?;
    rel_residual(&lhs, &rhs)
}

/// Exchange-relation residual with the published K⁻.
pub fn fundamental_relation_residual_boundary(
    model: &VertexModel,
    bp: &BoundaryParams,
    u: Complex64,
    v: Complex64,
    sites: usize,
) -> Result<f64> {
    let bp = *bp;
    let model_copy = *model;
    fundamental_relation_residual_boundary_with_k(
        model,
        &move |w| build_k(&model_copy, &bp, KSide::Minus, w),
        u,
        v,
        sites,
    )
}

/// Applies a product of double-row `B` operators (rightmost first) to the
/// reference state.
pub fn boundary_creation_product_state(
    model: &VertexModel,
    bp: &BoundaryParams,
    values: &[Complex64],
    sites: usize,
) -> Result<StateVector> {
    let mut psi = reference_state(sites);
    for &u in values.iter().rev() {
        let blocks = double_monodromy(model, bp, u, sites)?;
        psi = blocks.b.matvec(&psi)?;
    }
    Ok(psi)
}

/// The boundary Bethe state `Ψₙ = B(u₁)···B(uₙ)·Ψ₀` from the double-row
/// creation operators.
pub fn boundary_excited_state(
    model: &VertexModel,
    bp: &BoundaryParams,
    rap: &RapiditySet,
    sites: usize,
) -> Result<StateVector> {
    boundary_creation_product_state(model, bp, rap.us(), sites)
}

/// Which shifted diagonal operator a boundary repeated-use formula pulls
/// through the creation string.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftedFamily {
    ShiftedA,
    ShiftedD,
}

/// Closed-formula coefficients for `𝒜(u₀)·∏B(u_k)·Ψ₀` (or `𝒟`):
/// the wanted coefficient plus, per rapidity `u_j`, the pair of exchange
/// coefficients multiplying the `𝒜(u_j)`- and `𝒟(u_j)`-vacuum values of
/// the probe-substituted state.
pub fn boundary_repeated_use_coefficients(
    model: &VertexModel,
    bp: &BoundaryParams,
    rap: &RapiditySet,
    sites: usize,
    family: ShiftedFamily,
) -> Result<(Complex64, Vec<Complex64>)> {
    let u0 = rap.u0();
    let us = rap.us();
    let vac = |u: Complex64| -> Result<(Complex64, Complex64)> {
        let v = boundary_vacuum(model, bp, u, sites, VacuumForm::ShiftedForm)?;
        Ok((v.frak_a, v.frak_d))
    };

    let mut wanted = match family {
        ShiftedFamily::ShiftedA => vac(u0)?.0,
        ShiftedFamily::ShiftedD => vac(u0)?.1,
    };
    for &uk in us {
        let co = boundary_coeffs_shifted(model, u0, uk)?;
        wanted *= match family {
            ShiftedFamily::ShiftedA => co.a1,
            ShiftedFamily::ShiftedD => co.d1,
        };
    }

    let mut exchanged = Vec::with_capacity(us.len());
    for (j, &uj) in us.iter().enumerate() {
        let lead = boundary_coeffs_shifted(model, u0, uj)?;
        let (frak_a_j, frak_d_j) = vac(uj)?;
        let mut same_branch = Complex64::new(1.0, 0.0);
        let mut cross_branch = Complex64::new(1.0, 0.0);
        for (k, &uk) in us.iter().enumerate() {
            if k != j {
                let co = boundary_coeffs_shifted(model, uj, uk)?;
                same_branch *= match family {
                    ShiftedFamily::ShiftedA => co.a1,
                    ShiftedFamily::ShiftedD => co.d1,
                };
                cross_branch *= match family {
                    ShiftedFamily::ShiftedA => co.d1,
                    ShiftedFamily::ShiftedD => co.a1,
                };
            }
        }
        let coeff = match family {
            ShiftedFamily::ShiftedA => lead.a2 * same_branch * frak_a_j + lead.a3 * cross_branch * frak_d_j,
            ShiftedFamily::ShiftedD => lead.d2 * same_branch * frak_d_j + lead.d3 * cross_branch * frak_a_j,
        };
        exchanged.push(coeff);
    }
    Ok((wanted, exchanged))
}

/// Residual of the boundary repeated-use formula against the dense
/// computation.
pub fn repeated_use_residual_boundary(
    model: &VertexModel,
    bp: &BoundaryParams,
    rap: &RapiditySet,
    sites: usize,
    family: ShiftedFamily,
) -> Result<f64> {
    assert!(rap.n() >= 1, "repeated-use formulas start at one rapidity");
    let u0 = rap.u0();
    let us = rap.us();
    let blocks0 = double_monodromy(model, bp, u0, sites)?;
    let diag = match family {
        ShiftedFamily::ShiftedA => &blocks0.shifted_a,
        ShiftedFamily::ShiftedD => &blocks0.shifted_d,
    };
    let psi_n = boundary_creation_product_state(model, bp, us, sites)?;
    let dense = diag.matvec(&psi_n)?;

    let (wanted, exchanged) =
        boundary_repeated_use_coefficients(model, bp, rap, sites, family)?;
    let mut formula = psi_n.scale(wanted);
    for (j, coeff) in exchanged.iter().enumerate() {
        let mut replaced: Vec<Complex64> = us.to_vec();
        replaced[j] = u0;
        let state = boundary_creation_product_state(model, bp, &replaced, sites)?;
        formula = formula.add(&state.scale(*coeff));
    }
    Ok(rel_residual_state(&dense, &formula))
}
