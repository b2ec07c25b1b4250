//! Periodic-chain operators: monodromy blocks, transfer matrix, Bethe
//! states, commutation-relation residuals, and partition-function checks.
//!
//! The quantum space of an `L`-site row is the `2^L`-dimensional register
//! of site factors; monodromy construction adjoins a two-dimensional
//! auxiliary factor in the most significant position, so the four operator
//! blocks `A, B, C, D` are the contiguous quadrants of the full
//! `2^(L+1)`-dimensional matrix.  Spin up is bit value 0; the reference
//! state is basis index 0.

use num_complex::Complex64;

use crate::dense::{
    embed_two_site, kron, matmul, matpow, partial_trace_aux, rel_residual, rel_residual_state,
    ComplexMatrix, StateVector,
};
use crate::weights::{build_r, build_s, periodic_coeffs, VertexModel};
use crate::{tol, Error, Result};

/// The four auxiliary-space blocks of a monodromy matrix.
#[derive(Debug, Clone)]
pub struct MonodromyBlocks {
    pub a: ComplexMatrix,
    pub b: ComplexMatrix,
    pub c: ComplexMatrix,
    pub d: ComplexMatrix,
    /// Number of chain sites; every block is `2^sites` dimensional.
    pub sites: usize,
}

impl MonodromyBlocks {
    /// Slices the four quadrants out of a full `2^(L+1)`-dimensional
    /// monodromy matrix.
    pub fn from_full(full: &ComplexMatrix, sites: usize) -> Self {
        let d = 1usize << sites;
        assert_eq!(full.rows(), 2 * d, "full monodromy has wrong dimension");
        MonodromyBlocks {
            a: full.block(0, 0, d, d),
            b: full.block(0, d, d, d),
            c: full.block(d, 0, d, d),
            d: full.block(d, d, d, d),
            sites,
        }
    }

    /// Reassembles the full matrix from the blocks.
    pub fn to_full(&self) -> ComplexMatrix {
        let d = 1usize << self.sites;
        ComplexMatrix::from_fn(2 * d, 2 * d, |r, c| match (r < d, c < d) {
            (true, true) => self.a.at(r, c),
            (true, false) => self.b.at(r, c - d),
            (false, true) => self.c.at(r - d, c),
            (false, false) => self.d.at(r - d, c - d),
        })
    }
}

/// Probe parameter `u₀` plus rapidities `u₁…uₙ`, all pairwise separated
/// so that every commutation coefficient stays finite.
#[derive(Debug, Clone, PartialEq)]
pub struct RapiditySet {
    u0: Complex64,
    us: Vec<Complex64>,
}

impl RapiditySet {
    /// Validates pairwise separation (probe included) in the `r₂` metric
    /// against the pole guard.
    pub fn new(model: &VertexModel, u0: Complex64, us: Vec<Complex64>) -> Result<Self> {
        let mut all = Vec::with_capacity(us.len() + 1);
        all.push(u0);
        all.extend_from_slice(&us);
        for i in 0..all.len() {
            for j in (i + 1)..all.len() {
                let sep = model.r2(all[i] - all[j]).norm();
                if sep < tol::POLE_GUARD {
                    return Err(Error::PoleProximity {
                        context: "rapidity separation r2(u_i - u_j)",
                        magnitude: sep,
                        guard: tol::POLE_GUARD,
                    });
                }
            }
        }
        Ok(RapiditySet { u0, us })
    }

    pub fn u0(&self) -> Complex64 {
        self.u0
    }

    pub fn us(&self) -> &[Complex64] {
        &self.us
    }

    /// Number of rapidities (excitations).
    pub fn n(&self) -> usize {
        self.us.len()
    }

    /// The same set with `u₁` and `u_k` interchanged (1-based `k`).
    pub fn with_first_swapped(&self, k: usize) -> Self {
        assert!(k >= 1 && k <= self.us.len());
        let mut us = self.us.clone();
        us.swap(0, k - 1);
        RapiditySet { u0: self.u0, us }
    }

    /// The same set with the probe replaced.
    pub fn with_probe(&self, u0: Complex64) -> Self {
        RapiditySet {
            u0,
            us: self.us.clone(),
        }
    }
}

/// How to build the monodromy blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MonodromyMethod {
    /// Ordered product of embedded R-matrices on the `2^(L+1)` space.
    DirectProduct,
    /// Sum over internal auxiliary indices of Kronecker chains of the
    /// four 2x2 single-site blocks.
    LaxFormula,
}

/// The 2x2 single-site block `L_i^j` (auxiliary indices `i, j ∈ {0, 1}`),
/// read directly out of the 4x4 R-matrix.
pub fn lax_block(model: &VertexModel, u: Complex64, i: usize, j: usize) -> ComplexMatrix {
    assert!(i < 2 && j < 2, "auxiliary indices are binary");
    let r = build_r(model, u);
    ComplexMatrix::from_fn(2, 2, |sp, s| r.at(i * 2 + sp, j * 2 + s))
}

/// Full `2^(L+1)`-dimensional monodromy matrix
/// `M_a(u) = R_{a1}·R_{a2}···R_{aL}` (auxiliary factor 0, site `q` at
/// factor `q`).
pub fn monodromy_full(model: &VertexModel, u: Complex64, sites: usize) -> Result<ComplexMatrix> {
    assert!(sites >= 1, "need at least one site");
    let dim = 1usize << (sites + 1);
    if dim > tol::DIMENSION_CAP {
        return Err(Error::DimensionCap {
            dim,
            cap: tol::DIMENSION_CAP,
        });
    }
    let r = build_r(model, u);
    let mut acc = embed_two_site(&r, 0, 1, sites + 1)?;
    for q in 2..=sites {
        acc = matmul(&acc, &embed_two_site(&r, 0, q, sites + 1)?)?;
    }
    Ok(acc)
}

/// Monodromy blocks by either construction.
pub fn monodromy_blocks(
    model: &VertexModel,
    u: Complex64,
    sites: usize,
    method: MonodromyMethod,
) -> Result<MonodromyBlocks> {
    match method {
        MonodromyMethod::DirectProduct => {
            let full = monodromy_full(model, u, sites)?;
            Ok(MonodromyBlocks::from_full(&full, sites))
        }
        MonodromyMethod::LaxFormula => {
            let dim = 1usize << sites;
            if 2 * dim > tol::DIMENSION_CAP {
                return Err(Error::DimensionCap {
                    dim: 2 * dim,
                    cap: tol::DIMENSION_CAP,
                });
            }
            let mut blocks: Vec<ComplexMatrix> = Vec::with_capacity(4);
            for i in 0..2usize {
                for j in 0..2usize {
                    let mut sum = ComplexMatrix::zeros(dim, dim);
                    // Chain over the internal auxiliary indices k₁…k_{L−1}.
                    for chain in 0..(1usize << (sites.saturating_sub(1))) {
                        let mut prev = i;
                        let mut term: Option<ComplexMatrix> = None;
                        for site in 0..sites {
                            let next = if site + 1 == sites {
                                j
                            } else {
                                (chain >> (sites - 2 - site)) & 1
                            };
                            let factor = lax_block(model, u, prev, next);
                            term = Some(match term {
                                None => factor,
                                Some(t) => kron(&t, &factor)?,
                            });
                            prev = next;
                        }
                        sum = sum.add(&term.expect("sites >= 1"))?;
                    }
                    blocks.push(sum);
                }
            }
            let d = blocks.pop().expect("four blocks");
            let c = blocks.pop().expect("four blocks");
            let b = blocks.pop().expect("four blocks");
            let a = blocks.pop().expect("four blocks");
            Ok(MonodromyBlocks { a, b, c, d, sites })
        }
    }
}

/// Periodic transfer matrix `T(u) = A(u) + D(u)`, built as the
/// auxiliary-space partial trace of the monodromy.
pub fn transfer_periodic(
    model: &VertexModel,
    u: Complex64,
    sites: usize,
) -> Result<ComplexMatrix> {
    let full = monodromy_full(model, u, sites)?;
    partial_trace_aux(&full)
}

/// The all-up product reference state.
pub fn reference_state(sites: usize) -> StateVector {
    StateVector::basis(1usize << sites, 0)
}

/// Vacuum eigenvalue of the `A` block: `α(u) = r₁(u)^L`.
pub fn vacuum_alpha(model: &VertexModel, u: Complex64, sites: usize) -> Complex64 {
    model.r1(u).powu(sites as u32)
}

/// Vacuum eigenvalue of the `D` block: `δ(u) = r₂(u)^L`.
pub fn vacuum_delta(model: &VertexModel, u: Complex64, sites: usize) -> Complex64 {
    model.r2(u).powu(sites as u32)
}

/// Applies a product of `B` operators (rightmost factor first) to the
/// reference state: `B(values[0])···B(values[m−1])·Ψ₀`.
pub fn creation_product_state(
    model: &VertexModel,
    values: &[Complex64],
    sites: usize,
) -> Result<StateVector> {
    let mut psi = reference_state(sites);
    for &u in values.iter().rev() {
        let blocks = monodromy_blocks(model, u, sites, MonodromyMethod::DirectProduct)?;
        psi = blocks.b.matvec(&psi)?;
    }
    Ok(psi)
}

/// The Bethe state `Ψₙ = B(u₁)···B(uₙ)·Ψ₀`.
///
/// More than `L` creation operators annihilate the state; callers that
/// care should inspect
/// [`StateVector::zero_state_warning`](crate::dense::StateVector::zero_state_warning)
/// on the result rather than expect an error, so annihilation itself stays
/// observable.
pub fn excited_state(model: &VertexModel, rap: &RapiditySet, sites: usize) -> Result<StateVector> {
    creation_product_state(model, rap.us(), sites)
}

/// Matrix-level residuals of the three periodic commutation relations at
/// `(u, v)`.
#[derive(Debug, Clone, Copy)]
pub struct CommutationResiduals {
    /// `A(u)B(v) = a₁ B(v)A(u) + a₂ B(u)A(v)`
    pub ab: f64,
    /// `D(u)B(v) = d₁ B(v)D(u) + d₂ B(u)D(v)`
    pub db: f64,
    /// `B(u)B(v) = B(v)B(u)`
    pub bb: f64,
}

/// Evaluates the three commutation relations as dense matrix identities.
pub fn commutation_residuals_periodic(
    model: &VertexModel,
    u: Complex64,
    v: Complex64,
    sites: usize,
) -> Result<CommutationResiduals> {
    let pc = periodic_coeffs(model, u, v)?;
    let mu = monodromy_blocks(model, u, sites, MonodromyMethod::DirectProduct)?;
    let mv = monodromy_blocks(model, v, sites, MonodromyMethod::DirectProduct)?;

    let ab_lhs = matmul(&mu.a, &mv.b)?;
    let ab_rhs = matmul(&mv.b, &mu.a)?
        .scale(pc.a1)
        .add(&matmul(&mu.b, &mv.a)?.scale(pc.a2))?;
    let db_lhs = matmul(&mu.d, &mv.b)?;
    let db_rhs = matmul(&mv.b, &mu.d)?
        .scale(pc.d1)
        .add(&matmul(&mu.b, &mv.d)?.scale(pc.d2))?;
    let bb_lhs = matmul(&mu.b, &mv.b)?;
    let bb_rhs = matmul(&mv.b, &mu.b)?;

    Ok(CommutationResiduals {
        ab: rel_residual(&ab_lhs, &ab_rhs)?,
        db: rel_residual(&db_lhs, &db_rhs)?,
        bb: rel_residual(&bb_lhs, &bb_rhs)?,
    })
}

/// Which diagonal operator a repeated-use formula pulls through the string
/// of creation operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagonalFamily {
    A,
    D,
}

/// Closed-formula decomposition of `A(u₀)·∏B(u_k)·Ψ₀` (or the `D`
/// counterpart): the wanted term plus one exchange term per rapidity.
///
/// Returns `(wanted, exchanged)` where `wanted` multiplies
/// `∏B(u_k)·Ψ₀` and `exchanged[j]` multiplies the state with `u_j`
/// replaced by the probe.
pub fn repeated_use_coefficients(
    model: &VertexModel,
    rap: &RapiditySet,
    sites: usize,
    family: DiagonalFamily,
) -> Result<(Complex64, Vec<Complex64>)> {
    let u0 = rap.u0();
    let us = rap.us();
    let vacuum = |u: Complex64| match family {
        DiagonalFamily::A => vacuum_alpha(model, u, sites),
        DiagonalFamily::D => vacuum_delta(model, u, sites),
    };
    let keep = |from: Complex64, to: Complex64| -> Result<Complex64> {
        let pc = periodic_coeffs(model, from, to)?;
        Ok(match family {
            DiagonalFamily::A => pc.a1,
            DiagonalFamily::D => pc.d1,
        })
    };
    let swap = |from: Complex64, to: Complex64| -> Result<Complex64> {
        let pc = periodic_coeffs(model, from, to)?;
        Ok(match family {
            DiagonalFamily::A => pc.a2,
            DiagonalFamily::D => pc.d2,
        })
    };

    let mut wanted = vacuum(u0);
    for &uk in us {
        wanted *= keep(u0, uk)?;
    }
    let mut exchanged = Vec::with_capacity(us.len());
    for (j, &uj) in us.iter().enumerate() {
        let mut coeff = vacuum(uj) * swap(u0, uj)?;
        for (k, &uk) in us.iter().enumerate() {
            if k != j {
                coeff *= keep(uj, uk)?;
            }
        }
        exchanged.push(coeff);
    }
    Ok((wanted, exchanged))
}

/// Residual of the repeated-use formula against the dense computation.
pub fn repeated_use_residual_periodic(
    model: &VertexModel,
    rap: &RapiditySet,
    sites: usize,
    family: DiagonalFamily,
) -> Result<f64> {
    assert!(rap.n() >= 1, "repeated-use formulas start at one rapidity");
    let u0 = rap.u0();
    let us = rap.us();
    let blocks0 = monodromy_blocks(model, u0, sites, MonodromyMethod::DirectProduct)?;
    let diag = match family {
        DiagonalFamily::A => &blocks0.a,
        DiagonalFamily::D => &blocks0.d,
    };
    let psi_n = creation_product_state(model, us, sites)?;
    let dense = diag.matvec(&psi_n)?;

    let (wanted, exchanged) = repeated_use_coefficients(model, rap, sites, family)?;
    let mut formula = psi_n.scale(wanted);
    for (j, coeff) in exchanged.iter().enumerate() {
        let mut replaced: Vec<Complex64> = us.to_vec();
        replaced[j] = u0;
        let state = creation_product_state(model, &replaced, sites)?;
        formula = formula.add(&state.scale(*coeff));
    }
    Ok(rel_residual_state(&dense, &formula))
}

/// Relative residual of the exchange relation
/// `S_ab(u−v)·M_a(u)·M_b(v) = M_a(v)·M_b(u)·S_ab(u−v)` on the
/// `2^(L+2)`-dimensional space (auxiliary factors 0 and 1, sites after).
pub fn fundamental_relation_residual_periodic(
    model: &VertexModel,
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
    let mono = |aux: usize, w: Complex64| -> Result<ComplexMatrix> {
        let r = build_r(model, w);
        let mut acc = embed_two_site(&r, aux, 2, n)?;
        for q in 3..(sites + 2) {
            acc = matmul(&acc, &embed_two_site(&r, aux, q, n)?)?;
        }
        Ok(acc)
    };
    let s_ab = embed_two_site(&build_s(model, u - v), 0, 1, n)?;
    let lhs = matmul(&s_ab, &matmul(&mono(0, u)?, &mono(1, v)?)?)?;
    let rhs = matmul(&matmul(&mono(0, v)?, &mono(1, u)?)?, &s_ab)?;
    rel_residual(&lhs, &rhs)
}

/// Partition value as the trace of the `N`th transfer-matrix power:
/// an `L`-column, `N`-row lattice closed periodically both ways.
pub fn partition_trace(
    model: &VertexModel,
    u: Complex64,
    sites: usize,
    rows: usize,
) -> Result<Complex64> {
    assert!(rows >= 1, "need at least one lattice row");
    let t = transfer_periodic(model, u, sites)?;
    Ok(matpow(&t, rows)?.trace())
}

/// Partition value by direct enumeration of all edge configurations.
///
/// Every horizontal and vertical lattice edge carries a binary state;
/// each vertex contributes the R-matrix entry pairing its incoming
/// (left, top) and outgoing (right, bottom) edges.  Non-ice configurations
/// contribute zero through the structural zeros of the R-matrix.
pub fn partition_bruteforce(
    model: &VertexModel,
    u: Complex64,
    sites: usize,
    rows: usize,
) -> Result<Complex64> {
    let edge_bits = 2 * sites * rows;
    if edge_bits > 20 {
        return Err(Error::EnumerationCap {
            size: 1usize << edge_bits.min(63),
            cap: 1 << 20,
        });
    }
    let r = build_r(model, u);
    let hbits = sites * rows;
    let zero = Complex64::new(0.0, 0.0);
    let mut total = zero;
    for config in 0..(1usize << edge_bits) {
        let h = |row: usize, col: usize| -> usize {
            (config >> (row * sites + col)) & 1
        };
        let v = |row: usize, col: usize| -> usize {
            (config >> (hbits + row * sites + col)) & 1
        };
        let mut weight = Complex64::new(1.0, 0.0);
        'vertices: for row in 0..rows {
            for col in 0..sites {
                let h_in = h(row, (col + sites - 1) % sites);
                let h_out = h(row, col);
                let v_in = v(row, col);
                let v_out = v((row + 1) % rows, col);
                let entry = r.at(2 * h_in + v_in, 2 * h_out + v_out);
                if entry == zero {
                    weight = zero;
                    break 'vertices;
                }
                weight *= entry;
            }
        }
        total += weight;
    }
    Ok(total)
}
