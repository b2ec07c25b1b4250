//! Vertex-weight parameterizations and the 4x4 operator zoo built on them.
//!
//! Two standard symmetric six-vertex parameterizations are supported:
//!
//! * trigonometric (`Xxz`): `r₁ = sinh(u+ξ)`, `r₂ = sinh u`, `r₃ = sinh ξ`;
//! * rational (`Xxx`): `r₁ = u+ξ`, `r₂ = u`, `r₃ = ξ`.
//!
//! Both give an R-matrix with exactly six nonzero entries that solves the
//! Yang-Baxter equation; the module exposes that equation (in three
//! equivalent operator forms), the scalar functional equations underlying
//! it, the anisotropy invariant Δ, and the coefficient functions of the
//! periodic-chain commutation relations.  All parameters are complex; the
//! formulas are holomorphic and the checks benefit from generic complex
//! probes.

use num_complex::Complex64;

use crate::dense::{embed_two_site, matmul, matmul_chain, rel_residual, ComplexMatrix};
use crate::{guard_denominator, Result};

/// Which amplitude parameterization a model uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    /// Rational amplitudes `(u+ξ, u, ξ)`.
    Xxx,
    /// Trigonometric amplitudes `(sinh(u+ξ), sinh u, sinh ξ)`.
    Xxz,
}

/// A six-vertex parameterization: kind, anisotropy parameter ξ, and the
/// crossing parameter ρ entering the reflection checks.
///
/// ρ defaults to ξ, the value validated by the reflection-equation suite;
/// [`VertexModel::with_rho`] exists so that negative controls can probe how
/// sharply that choice is pinned.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VertexModel {
    kind: ModelKind,
    xi: Complex64,
    rho: Complex64,
}

/// The three amplitude values at a spectral parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmplitudeTriple {
    pub r1: Complex64,
    pub r2: Complex64,
    pub r3: Complex64,
}

/// Coefficients of the periodic commutation relations at `(u, v)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicCoeffs {
    pub a1: Complex64,
    pub a2: Complex64,
    pub d1: Complex64,
    pub d2: Complex64,
}

/// Operator form of the Yang-Baxter residual check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum YbeForm {
    /// `R₁₂(u−v) R₁₃(u) R₂₃(v) = R₂₃(v) R₁₃(u) R₁₂(u−v)`.
    Rrr,
    /// `S₁₂(u−v) S₂₃(u) S₁₂(v) = S₂₃(v) S₁₂(u) S₂₃(u−v)`.
    Sss,
    /// `S₁₂(u−v) R₁₃(u) R₂₃(v) = R₁₃(v) R₂₃(u) S₁₂(u−v)`.
    Srr,
}

impl VertexModel {
    /// Rational model with anisotropy ξ (must be nonzero so that the
    /// constant amplitude `r₃ = ξ` does not vanish).  ρ is set to ξ.
    pub fn xxx(xi: Complex64) -> Result<Self> {
        guard_denominator(xi, "anisotropy parameter")?;
        Ok(VertexModel {
            kind: ModelKind::Xxx,
            xi,
            rho: xi,
        })
    }

    /// Trigonometric model with anisotropy ξ (must keep `sinh ξ` nonzero).
    /// ρ is set to ξ.
    pub fn xxz(xi: Complex64) -> Result<Self> {
        guard_denominator(xi.sinh(), "anisotropy parameter")?;
        Ok(VertexModel {
            kind: ModelKind::Xxz,
            xi,
            rho: xi,
        })
    }

    /// Overrides the crossing parameter (used by negative controls).
    pub fn with_rho(mut self, rho: Complex64) -> Self {
        self.rho = rho;
        self
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn xi(&self) -> Complex64 {
        self.xi
    }

    pub fn rho(&self) -> Complex64 {
        self.rho
    }

    /// First amplitude `r₁(u)`.
    pub fn r1(&self, u: Complex64) -> Complex64 {
        match self.kind {
            ModelKind::Xxx => u + self.xi,
            ModelKind::Xxz => (u + self.xi).sinh(),
        }
    }

    /// Second amplitude `r₂(u)`.
    pub fn r2(&self, u: Complex64) -> Complex64 {
        match self.kind {
            ModelKind::Xxx => u,
            ModelKind::Xxz => u.sinh(),
        }
    }

    /// Third amplitude `r₃(u)`; constant in `u` for both parameterizations.
    pub fn r3(&self, _u: Complex64) -> Complex64 {
        match self.kind {
            ModelKind::Xxx => self.xi,
            ModelKind::Xxz => self.xi.sinh(),
        }
    }
}

/// Evaluates the amplitude triple `(r₁, r₂, r₃)` at `u`.
pub fn amplitudes(model: &VertexModel, u: Complex64) -> AmplitudeTriple {
    AmplitudeTriple {
        r1: model.r1(u),
        r2: model.r2(u),
        r3: model.r3(u),
    }
}

/// Builds the 4x4 R-matrix with the six-nonzero-entry layout
/// `diag(r₁, [r₂ r₃; r₃ r₂], r₁)`.
pub fn build_r(model: &VertexModel, u: Complex64) -> ComplexMatrix {
    build_r_from_triple(&amplitudes(model, u))
}

/// Lays out an R-matrix from an explicit amplitude triple.  Exposed so that
/// corruption-style negative controls can probe how sharply the
/// Yang-Baxter residuals pin the amplitudes.
pub fn build_r_from_triple(t: &AmplitudeTriple) -> ComplexMatrix {
    let z = Complex64::new(0.0, 0.0);
    ComplexMatrix::new(
        4,
        4,
        vec![
            t.r1, z, z, z, //
            z, t.r2, t.r3, z, //
            z, t.r3, t.r2, z, //
            z, z, z, t.r1,
        ],
    )
}

/// Builds the twisted matrix `S(u) = P·R(u)`, with the central block
/// `[r₃ r₂; r₂ r₃]`.
pub fn build_s(model: &VertexModel, u: Complex64) -> ComplexMatrix {
    matmul(&permutator(), &build_r(model, u)).expect("4x4 shapes are fixed")
}

/// The 4x4 swap operator: `P (a⊗b) P = b⊗a`.
pub fn permutator() -> ComplexMatrix {
    let z = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    ComplexMatrix::new(
        4,
        4,
        vec![
            one, z, z, z, //
            z, z, one, z, //
            z, one, z, z, //
            z, z, z, one,
        ],
    )
}

/// The anisotropy invariant `Δ = (r₁² + r₂² − r₃²)/(r₁·r₂)`, constant in
/// `u` for both parameterizations (2 for `Xxx`, `2·cosh ξ` for `Xxz`).
pub fn delta_invariant(model: &VertexModel, u: Complex64) -> Result<Complex64> {
    let t = amplitudes(model, u);
    let den = guard_denominator(t.r1 * t.r2, "anisotropy invariant denominator r1*r2")?;
    Ok((t.r1 * t.r1 + t.r2 * t.r2 - t.r3 * t.r3) / den)
}

/// Sign variant of the invariant with `+r₃²` in the numerator.  This
/// expression is *not* constant in `u` for either parameterization; it is
/// retained so that the constancy diagnostic can report both variants side
/// by side.
pub fn delta_invariant_variant(model: &VertexModel, u: Complex64) -> Result<Complex64> {
    let t = amplitudes(model, u);
    let den = guard_denominator(t.r1 * t.r2, "anisotropy invariant denominator r1*r2")?;
    Ok((t.r1 * t.r1 + t.r2 * t.r2 + t.r3 * t.r3) / den)
}

fn ybe_residual_impl(
    r_of: &dyn Fn(Complex64) -> ComplexMatrix,
    s_of: &dyn Fn(Complex64) -> ComplexMatrix,
    u: Complex64,
    v: Complex64,
    form: YbeForm,
) -> f64 {
    let emb = |op: &ComplexMatrix, p: usize, q: usize| {
        embed_two_site(op, p, q, 3).expect("triple space is 8-dimensional")
    };
    let (lhs, rhs) = match form {
        YbeForm::Rrr => {
            let l = [
                emb(&r_of(u - v), 0, 1),
                emb(&r_of(u), 0, 2),
                emb(&r_of(v), 1, 2),
            ];
            let r = [
                emb(&r_of(v), 1, 2),
                emb(&r_of(u), 0, 2),
                emb(&r_of(u - v), 0, 1),
            ];
            (l, r)
        }
        YbeForm::Sss => {
            let l = [
                emb(&s_of(u - v), 0, 1),
                emb(&s_of(u), 1, 2),
                emb(&s_of(v), 0, 1),
            ];
            let r = [
                emb(&s_of(v), 1, 2),
                emb(&s_of(u), 0, 1),
                emb(&s_of(u - v), 1, 2),
            ];
            (l, r)
        }
        YbeForm::Srr => {
            let l = [
                emb(&s_of(u - v), 0, 1),
                emb(&r_of(u), 0, 2),
                emb(&r_of(v), 1, 2),
            ];
            let r = [
                emb(&r_of(v), 0, 2),
                emb(&r_of(u), 1, 2),
                emb(&s_of(u - v), 0, 1),
            ];
            (l, r)
        }
    };
    let left = matmul_chain(&[&lhs[0], &lhs[1], &lhs[2]]).expect("fixed shapes");
    let right = matmul_chain(&[&rhs[0], &rhs[1], &rhs[2]]).expect("fixed shapes");
    rel_residual(&left, &right).expect("same shapes")
}

/// Relative residual of the selected Yang-Baxter form on the
/// 8-dimensional triple space.
pub fn ybe_residual(model: &VertexModel, u: Complex64, v: Complex64, form: YbeForm) -> f64 {
    ybe_residual_impl(
        &|w| build_r(model, w),
        &|w| build_s(model, w),
        u,
        v,
        form,
    )
}

/// Same residual with a caller-supplied amplitude triple per argument;
/// lets corruption controls demonstrate that the residual actually pins
/// the amplitudes.
pub fn ybe_residual_from_triples(
    triple_of: impl Fn(Complex64) -> AmplitudeTriple,
    u: Complex64,
    v: Complex64,
    form: YbeForm,
) -> f64 {
    let r_of = |w: Complex64| build_r_from_triple(&triple_of(w));
    let s_of = |w: Complex64| {
        matmul(&permutator(), &build_r_from_triple(&triple_of(w))).expect("fixed shapes")
    };
    ybe_residual_impl(&r_of, &s_of, u, v, form)
}

/// Absolute residuals of the three scalar functional equations that the
/// amplitude triple satisfies (with `w = u − v`):
///
/// 1. `r₁(w)r₂(u)r₃(v) = r₂(w)r₁(u)r₃(v) + r₃(w)r₃(u)r₂(v)`
/// 2. `r₃(w)r₂(u)r₁(v) = r₃(w)r₁(u)r₂(v) + r₂(w)r₃(u)r₃(v)`
/// 3. `r₁(w)r₃(u)r₁(v) = r₂(w)r₃(u)r₂(v) + r₃(w)r₁(u)r₃(v)`
///
/// These are the only independent scalar constraints the Yang-Baxter
/// equation places on a six-entry symmetric R-matrix; the 8x8 operator
/// checks in [`ybe_residual`] are their redundant matrix form.
pub fn functional_eq_residuals(model: &VertexModel, u: Complex64, v: Complex64) -> [f64; 3] {
    let w = u - v;
    let tw = amplitudes(model, w);
    let tu = amplitudes(model, u);
    let tv = amplitudes(model, v);
    let e1 = tw.r1 * tu.r2 * tv.r3 - tw.r2 * tu.r1 * tv.r3 - tw.r3 * tu.r3 * tv.r2;
    let e2 = tw.r3 * tu.r2 * tv.r1 - tw.r3 * tu.r1 * tv.r2 - tw.r2 * tu.r3 * tv.r3;
    let e3 = tw.r1 * tu.r3 * tv.r1 - tw.r2 * tu.r3 * tv.r2 - tw.r3 * tu.r1 * tv.r3;
    [e1.norm(), e2.norm(), e3.norm()]
}

/// Coefficients of the periodic commutation relations:
///
/// * `A(u)B(v) = a₁ B(v)A(u) + a₂ B(u)A(v)` with
///   `a₁ = r₁(v−u)/r₂(v−u)`, `a₂ = −r₃(v−u)/r₂(v−u)`;
/// * `D(u)B(v) = d₁ B(v)D(u) + d₂ B(u)D(v)` with
///   `d₁ = r₁(u−v)/r₂(u−v)`, `d₂ = −r₃(u−v)/r₂(u−v)`.
pub fn periodic_coeffs(model: &VertexModel, u: Complex64, v: Complex64) -> Result<PeriodicCoeffs> {
    let den_vu = guard_denominator(model.r2(v - u), "periodic coefficient denominator r2(v-u)")?;
    let den_uv = guard_denominator(model.r2(u - v), "periodic coefficient denominator r2(u-v)")?;
    Ok(PeriodicCoeffs {
        a1: model.r1(v - u) / den_vu,
        a2: -model.r3(v - u) / den_vu,
        d1: model.r1(u - v) / den_uv,
        d2: -model.r3(u - v) / den_uv,
    })
}

/// Absolute residuals of the two quadratic coefficient identities used to
/// regroup repeated commutations (arguments `(u, w, v)` play the roles of
/// probe, bystander, and target rapidity):
///
/// * `a₁(u,w)a₂(u,v) + a₂(u,w)a₂(w,v) = a₂(u,v)a₁(v,w)`
/// * `d₁(u,w)d₂(u,v) + d₂(u,w)d₂(w,v) = d₂(u,v)d₁(v,w)`
pub fn periodic_coefficient_identity_residuals(
    model: &VertexModel,
    u: Complex64,
    w: Complex64,
    v: Complex64,
) -> Result<[f64; 2]> {
    let uw = periodic_coeffs(model, u, w)?;
    let uv = periodic_coeffs(model, u, v)?;
    let wv = periodic_coeffs(model, w, v)?;
    let vw = periodic_coeffs(model, v, w)?;
    let ea = uw.a1 * uv.a2 + uw.a2 * wv.a2 - uv.a2 * vw.a1;
    let ed = uw.d1 * uv.d2 + uw.d2 * wv.d2 - uv.d2 * vw.d1;
    Ok([ea.norm(), ed.norm()])
}

/// Relative residual of the 4x4 inverse identity
/// `R(u)·R(−u) = r₁(u)·r₁(−u)·I₄`.
pub fn r_inverse_residual(model: &VertexModel, u: Complex64) -> f64 {
    let prod = matmul(&build_r(model, u), &build_r(model, -u)).expect("fixed shapes");
    let scaled = ComplexMatrix::identity(4).scale(model.r1(u) * model.r1(-u));
    rel_residual(&prod, &scaled).expect("same shapes")
}

/// Spread of a sampled invariant: `max |values − values[0]|`.
///
/// Used by the constancy diagnostics for both Δ variants.
pub fn constancy_spread(values: &[Complex64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let first = values[0];
    values
        .iter()
        .map(|z| (z - first).norm())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::kron;
    use crate::sampling::ParameterSampler;
    use crate::Error;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn xxx1() -> VertexModel {
        VertexModel::xxx(c(1.0, 0.0)).unwrap()
    }

    fn xxz_generic() -> VertexModel {
        VertexModel::xxz(c(0.3, 0.1)).unwrap()
    }

    #[test]
    fn amplitudes_rational_fixture() {
        let t = amplitudes(&xxx1(), c(0.5, 0.0));
        assert!((t.r1 - c(1.5, 0.0)).norm() < 1e-15);
        assert!((t.r2 - c(0.5, 0.0)).norm() < 1e-15);
        assert!((t.r3 - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn amplitudes_vanish_at_origin_in_second_slot() {
        let m = VertexModel::xxx(c(0.3, 0.2)).unwrap();
        let t = amplitudes(&m, c(0.0, 0.0));
        assert_eq!(t.r1, c(0.3, 0.2));
        assert_eq!(t.r2, c(0.0, 0.0));
        assert_eq!(t.r3, c(0.3, 0.2));
    }

    #[test]
    fn amplitudes_trigonometric_quarter_period() {
        let m = VertexModel::xxz(c(0.0, std::f64::consts::FRAC_PI_2)).unwrap();
        let t = amplitudes(&m, c(0.0, 0.0));
        // sinh(iπ/2) = i
        assert!((t.r1 - c(0.0, 1.0)).norm() < 1e-15);
        assert!(t.r2.norm() < 1e-15);
        assert!((t.r3 - c(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn r_matrix_at_origin_is_the_permutator_for_unit_anisotropy() {
        let r0 = build_r(&xxx1(), c(0.0, 0.0));
        assert!(rel_residual(&r0, &permutator()).unwrap() < 1e-15);
    }

    #[test]
    fn r_matrix_has_exactly_six_nonzero_entries() {
        let r = build_r(&xxz_generic(), c(0.7, -0.2));
        let nonzero = r.entries().iter().filter(|z| z.norm() > 0.0).count();
        assert_eq!(nonzero, 6);
    }

    #[test]
    fn r_matrix_is_symmetric() {
        let r = build_r(&xxz_generic(), c(0.4, 0.3));
        assert!(rel_residual(&r, &r.transpose()).unwrap() < 1e-15);
        assert_eq!(r.at(1, 2), r.at(2, 1));
    }

    #[test]
    fn s_matrix_is_permuted_r_with_central_swap_block() {
        let m = xxz_generic();
        let u = c(0.6, 0.1);
        let s = build_s(&m, u);
        let pr = matmul(&permutator(), &build_r(&m, u)).unwrap();
        assert_eq!(s, pr);
        let t = amplitudes(&m, u);
        assert_eq!(s.at(1, 1), t.r3);
        assert_eq!(s.at(1, 2), t.r2);
        assert_eq!(s.at(2, 1), t.r2);
        assert_eq!(s.at(2, 2), t.r3);
    }

    #[test]
    fn s_matrix_at_origin_is_scalar() {
        let m = VertexModel::xxx(c(0.8, -0.4)).unwrap();
        let s0 = build_s(&m, c(0.0, 0.0));
        let expected = ComplexMatrix::identity(4).scale(m.r1(c(0.0, 0.0)));
        assert!(rel_residual(&s0, &expected).unwrap() < 1e-15);
    }

    #[test]
    fn permutator_swaps_tensor_factors() {
        let a = ComplexMatrix::new(
            2,
            2,
            vec![c(0.3, 0.1), c(-0.2, 0.5), c(1.1, 0.0), c(0.4, -0.7)],
        );
        let b = ComplexMatrix::new(
            2,
            2,
            vec![c(0.9, -0.3), c(0.2, 0.2), c(-0.5, 0.1), c(0.0, 1.2)],
        );
        let p = permutator();
        let lhs = matmul_chain(&[&p, &kron(&a, &b).unwrap(), &p]).unwrap();
        let rhs = kron(&b, &a).unwrap();
        assert!(rel_residual(&lhs, &rhs).unwrap() < 1e-12);
        assert_eq!(matmul(&p, &p).unwrap(), ComplexMatrix::identity(4));
        assert!((p.trace() - c(2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn invariant_is_two_for_the_rational_model() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let sampler = ParameterSampler::default();
        let m = xxx1();
        assert!((delta_invariant(&m, c(1.0, 0.0)).unwrap() - c(2.0, 0.0)).norm() < 1e-12);
        for _ in 0..10 {
            let u = sampler.generic_point(&mut rng);
            assert!((delta_invariant(&m, u).unwrap() - c(2.0, 0.0)).norm() < 1e-10);
        }
    }

    #[test]
    fn invariant_is_two_cosh_xi_for_the_trigonometric_model() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let sampler = ParameterSampler::default();
        let m = xxz_generic();
        let expected = (m.xi().cosh()) * 2.0;
        for _ in 0..10 {
            let u = sampler.generic_point(&mut rng);
            assert!((delta_invariant(&m, u).unwrap() - expected).norm() < 1e-10);
        }
    }

    #[test]
    fn invariant_is_constant_and_the_sign_variant_is_not() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let sampler = ParameterSampler::default();
        for m in [xxx1(), xxz_generic()] {
            let mut good = Vec::new();
            let mut variant = Vec::new();
            for _ in 0..100 {
                let u = sampler.generic_point(&mut rng);
                good.push(delta_invariant(&m, u).unwrap());
                variant.push(delta_invariant_variant(&m, u).unwrap());
            }
            assert!(constancy_spread(&good) < 1e-10);
            assert!(constancy_spread(&variant) > 1e-2);
        }
    }

    #[test]
    fn invariant_guards_the_amplitude_zero() {
        let err = delta_invariant(&xxx1(), c(0.0, 0.0)).unwrap_err();
        assert!(matches!(err, Error::PoleProximity { .. }));
    }

    #[test]
    fn ybe_holds_in_all_three_forms() {
        let u = c(0.7, 0.0);
        let v = c(0.3, 0.0);
        for form in [YbeForm::Rrr, YbeForm::Sss, YbeForm::Srr] {
            assert!(ybe_residual(&xxx1(), u, v, form) < 1e-12);
            assert!(ybe_residual(&xxz_generic(), u, v, form) < 1e-12);
        }
    }

    #[test]
    fn ybe_coincident_arguments_stay_consistent() {
        let u = c(0.4, 0.2);
        assert!(ybe_residual(&xxx1(), u, u, YbeForm::Rrr) < 1e-12);
    }

    #[test]
    fn ybe_detects_a_corrupted_amplitude() {
        let m = xxx1();
        let res = ybe_residual_from_triples(
            |w| {
                let mut t = amplitudes(&m, w);
                t.r3 *= 2.0;
                t
            },
            c(0.7, 0.0),
            c(0.3, 0.0),
            YbeForm::Rrr,
        );
        assert!(res > 1e-3);
    }

    #[test]
    fn functional_equations_hold_for_both_models() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let sampler = ParameterSampler::default();
        for m in [xxx1(), xxz_generic()] {
            for _ in 0..20 {
                let u = sampler.generic_point(&mut rng);
                let v = sampler.generic_point(&mut rng);
                for r in functional_eq_residuals(&m, u, v) {
                    assert!(r < 1e-12);
                }
            }
        }
    }

    #[test]
    fn functional_equations_survive_the_degenerate_point() {
        // At v = 0 the second equation collapses onto r₁(0) = r₃(0), which
        // both parameterizations satisfy.
        for m in [xxx1(), xxz_generic()] {
            for r in functional_eq_residuals(&m, c(0.6, 0.2), c(0.0, 0.0)) {
                assert!(r < 1e-12);
            }
        }
    }

    #[test]
    fn periodic_coeffs_rational_fixture() {
        let m = xxx1();
        let pc = periodic_coeffs(&m, c(1.0, 0.0), c(0.5, 0.0)).unwrap();
        // a₁ = r₁(−1/2)/r₂(−1/2) = (1/2)/(−1/2) = −1; a₂ = −1/(−1/2) = 2.
        assert!((pc.a1 - c(-1.0, 0.0)).norm() < 1e-14);
        assert!((pc.a2 - c(2.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn second_family_mirrors_the_first_with_opposite_sign() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let sampler = ParameterSampler::default();
        for m in [xxx1(), xxz_generic()] {
            for _ in 0..20 {
                let (u, v) = sampler.distinct_pair(&m, &mut rng);
                let pc = periodic_coeffs(&m, u, v).unwrap();
                assert!((pc.d2 + pc.a2).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn coefficient_identities_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let sampler = ParameterSampler::default();
        for m in [xxx1(), xxz_generic()] {
            for _ in 0..50 {
                let pts = sampler.distinct_points(&m, 3, &mut rng);
                let res =
                    periodic_coefficient_identity_residuals(&m, pts[0], pts[1], pts[2]).unwrap();
                assert!(res[0] < 1e-12);
                assert!(res[1] < 1e-12);
            }
        }
    }

    #[test]
    fn coefficients_guard_coincident_rapidities() {
        let err = periodic_coeffs(&xxx1(), c(0.5, 0.1), c(0.5, 0.1)).unwrap_err();
        assert!(matches!(err, Error::PoleProximity { .. }));
    }

    #[test]
    fn r_inverse_identity_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let sampler = ParameterSampler::default();
        for m in [xxx1(), xxz_generic()] {
            for _ in 0..10 {
                let u = sampler.generic_point(&mut rng);
                assert!(r_inverse_residual(&m, u) < 1e-10);
            }
        }
    }

    #[test]
    fn model_constructors_reject_vanishing_anisotropy() {
        assert!(VertexModel::xxx(c(0.0, 0.0)).is_err());
        assert!(VertexModel::xxz(c(0.0, 0.0)).is_err());
        // sinh(iπ) = 0 even though ξ ≠ 0.
        assert!(VertexModel::xxz(c(0.0, std::f64::consts::PI)).is_err());
    }
}
