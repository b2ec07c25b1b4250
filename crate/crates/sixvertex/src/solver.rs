//! Multistart damped-Newton solution of the Bethe equations, periodic and
//! reflecting, with built-in dense eigenpair verification.
//!
//! The residual being driven to zero is the vector of simplified
//! unwanted-term coefficients `β₁…βₙ` from the tree expansion: a rapidity
//! set solves the Bethe equations exactly when every coefficient vanishes,
//! and then the corresponding creation-product state is an eigenstate of
//! the transfer matrix.  Because that last statement is checkable against
//! dense operators, every solution this module accepts carries its own
//! end-to-end certificate (`eigen_check`).

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::boundary::{boundary_excited_state, transfer_boundary, BoundaryParams};
use crate::dense::{solve_linear, ComplexMatrix};
use crate::periodic::{excited_state, transfer_periodic, RapiditySet};
use crate::sampling::{standard_normal, ParameterSampler};
use crate::trees::{bethe_coefficient, eigenvalue_tau, BetheForm};
use crate::weights::VertexModel;
use crate::{Error, Result};

/// Tuning knobs for [`solve`].  The defaults reproduce every documented
/// fixture; only `rng_seed` and `probe_u0` routinely need choosing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveConfig {
    /// Newton iteration budget per start.
    pub max_iterations: usize,
    /// Initial step fraction; each iteration halves it while the residual
    /// does not decrease.
    pub step_damping: f64,
    /// Convergence threshold on `max_k |β_k|`.
    pub convergence_tol: f64,
    /// Number of independent Newton starts.
    pub multistart_count: usize,
    /// Seed for the start points and verification probes; start `i` uses
    /// `rng_seed + i`.
    pub rng_seed: u64,
    /// Probe rapidity `u₀` the residuals are evaluated at.
    pub probe_u0: Complex64,
    /// Minimum pairwise rapidity separation, measured as `|r₂(uᵢ−uⱼ)|`,
    /// for an accepted solution.
    pub pole_guard: f64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            max_iterations: 200,
            step_damping: 1.0,
            convergence_tol: 1e-12,
            multistart_count: 64,
            rng_seed: 1,
            probe_u0: Complex64::new(0.83, 0.29),
            pole_guard: 1e-8,
        }
    }
}

impl SolveConfig {
    fn validate(&self) {
        assert!(self.max_iterations >= 1, "need at least one iteration");
        assert!(
            self.step_damping > 0.0 && self.step_damping <= 1.0,
            "step damping must lie in (0, 1]"
        );
        assert!(self.convergence_tol > 0.0, "convergence tolerance must be positive");
        assert!(self.multistart_count >= 1, "need at least one start");
        assert!(self.pole_guard > 0.0, "pole guard must be positive");
    }
}

/// One converged, deduplicated solution of the Bethe equations.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    /// The rapidities, sorted by real then imaginary part.
    pub roots: Vec<Complex64>,
    /// Whether the Newton run met `convergence_tol` (always true for
    /// returned solutions; kept explicit for serialization).
    pub converged: bool,
    /// `max_k |β_k|` at the accepted roots.
    pub residual_max: f64,
    /// Newton iterations used by the earliest start that found this
    /// solution.
    pub iterations: usize,
    /// Max dense-eigenpair residual over the verification probes.
    pub eigen_check: f64,
}

/// The simplified unwanted-term coefficients `β₁…βₙ` at the given
/// rapidity set (probe `u₀` included in the set).  Periodic when `bp` is
/// `None`, reflecting otherwise.
pub fn residual_vector(
    model: &VertexModel,
    bp: Option<&BoundaryParams>,
    rap: &RapiditySet,
    sites: usize,
) -> Result<Vec<Complex64>> {
    (1..=rap.n())
        .map(|k| bethe_coefficient(model, bp, rap, sites, k, BetheForm::Simplified))
        .collect()
}

fn residuals_at(
    model: &VertexModel,
    bp: Option<&BoundaryParams>,
    probe: Complex64,
    us: &[Complex64],
    sites: usize,
) -> Result<Vec<Complex64>> {
    let rap = RapiditySet::new(model, probe, us.to_vec())?;
    residual_vector(model, bp, &rap, sites)
}

fn max_abs(values: &[Complex64]) -> f64 {
    values.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn unpack(x: &[f64]) -> Vec<Complex64> {
    let n = x.len() / 2;
    (0..n).map(|k| Complex64::new(x[k], x[n + k])).collect()
}

fn pack(us: &[Complex64]) -> Vec<f64> {
    let mut x = Vec::with_capacity(2 * us.len());
    x.extend(us.iter().map(|u| u.re));
    x.extend(us.iter().map(|u| u.im));
    x
}

/// One damped-Newton run; `None` when the start diverges, stalls, or
/// walks into a pole.
fn newton_from(
    model: &VertexModel,
    bp: Option<&BoundaryParams>,
    config: &SolveConfig,
    sites: usize,
    start: Vec<Complex64>,
) -> Option<(Vec<Complex64>, usize, f64)> {
    const FD_STEP: f64 = 1e-7;
    const MAX_HALVINGS: usize = 25;
    let n = start.len();
    let mut x = pack(&start);
    let mut f = pack(&residuals_at(model, bp, config.probe_u0, &start, sites).ok()?);
    let mut fmax = max_abs(&unpack(&f));
    for iteration in 0..config.max_iterations {
        if fmax < config.convergence_tol {
            return Some((unpack(&x), iteration, fmax));
        }
        // Central-difference Jacobian on the real-imaginary flattening.
        let dim = 2 * n;
        let mut jac = vec![vec![0.0f64; dim]; dim];
        for j in 0..dim {
            let h = FD_STEP * x[j].abs().max(1.0);
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            let fp = pack(&residuals_at(model, bp, config.probe_u0, &unpack(&xp), sites).ok()?);
            let fm = pack(&residuals_at(model, bp, config.probe_u0, &unpack(&xm), sites).ok()?);
            for i in 0..dim {
                jac[i][j] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        let jmat = ComplexMatrix::from_fn(dim, dim, |r, c| Complex64::new(jac[r][c], 0.0));
        let rhs: Vec<Complex64> = f.iter().map(|&v| Complex64::new(-v, 0.0)).collect();
        let step: Vec<f64> = solve_linear(&jmat, &rhs).ok()?.iter().map(|z| z.re).collect();

        let mut lambda = config.step_damping;
        let mut advanced = false;
        for _ in 0..=MAX_HALVINGS {
            let candidate: Vec<f64> = x.iter().zip(&step).map(|(a, d)| a + lambda * d).collect();
            if let Ok(fc) = residuals_at(model, bp, config.probe_u0, &unpack(&candidate), sites) {
                let fc_flat = pack(&fc);
                let fc_max = max_abs(&fc);
                if fc_max < fmax {
                    x = candidate;
                    f = fc_flat;
                    fmax = fc_max;
                    advanced = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !advanced {
            return None;
        }
    }
    if fmax < config.convergence_tol {
        return Some((unpack(&x), config.max_iterations, fmax));
    }
    None
}

/// Ordering for presentation and deduplication: real part, then
/// imaginary part, with differences inside the dedup tolerance treated
/// as ties so that the order is stable under probe-level rounding
/// (conjugate pairs share a real part only up to roundoff).
fn fuzzy_cmp(a: &Complex64, b: &Complex64) -> std::cmp::Ordering {
    const ORDER_TOL: f64 = 1e-8;
    if (a.re - b.re).abs() > ORDER_TOL {
        return a.re.total_cmp(&b.re);
    }
    if (a.im - b.im).abs() > ORDER_TOL {
        return a.im.total_cmp(&b.im);
    }
    std::cmp::Ordering::Equal
}

fn sort_roots(roots: &mut [Complex64]) {
    roots.sort_by(fuzzy_cmp);
}

fn same_solution(a: &[Complex64], b: &[Complex64]) -> bool {
    const DEDUP_TOL: f64 = 1e-8;
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(x, y)| (x - y).norm() < DEDUP_TOL)
}

fn degenerate_pair(
    model: &VertexModel,
    roots: &[Complex64],
    guard: f64,
) -> Option<(usize, usize)> {
    for i in 0..roots.len() {
        for j in (i + 1)..roots.len() {
            if model.r2(roots[i] - roots[j]).norm() < guard {
                return Some((i, j));
            }
        }
    }
    None
}

/// Deterministic verification probes: admissible sampler points kept away
/// from every root in the `r₂` metric.
fn verification_probes(
    model: &VertexModel,
    roots: &[Complex64],
    count: usize,
    seed: u64,
    guard: f64,
) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x9E37_79B9));
    let sampler = ParameterSampler::default();
    let mut probes = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while probes.len() < count {
        attempts += 1;
        assert!(attempts < 100_000, "probe sampling exhausted its attempt budget");
        let p = sampler.admissible_point(model, &mut rng);
        // Every denominator the exchange coefficients can produce must stay
        // away from zero: r₂ of the difference (both settings) and, for the
        // double-row coefficients, r₁ and r₂ of the sum.
        let clear = roots.iter().all(|r| {
            model.r2(p - *r).norm() >= guard
                && model.r1(p + *r).norm() >= guard
                && model.r2(p + *r).norm() >= guard
        });
        if clear {
            probes.push(p);
        }
    }
    probes
}

/// Solves the Bethe equations for `n` rapidities on `sites` sites by
/// multistart damped Newton; returns every distinct converged solution,
/// each carrying its dense eigenpair residual.  Start points are complex
/// Gaussians at the anisotropy scale `|ξ|`; identical configurations
/// yield bit-identical results.
pub fn solve(
    model: &VertexModel,
    bp: Option<&BoundaryParams>,
    n: usize,
    sites: usize,
    config: &SolveConfig,
) -> Result<Vec<SolveResult>> {
    config.validate();
    assert!(n <= sites, "cannot place more rapidities than sites");

    let scale = model.xi().norm().max(0.25);
    let mut converged: Vec<(Vec<Complex64>, usize, f64)> = Vec::new();
    for index in 0..config.multistart_count {
        let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed.wrapping_add(index as u64));
        let start: Vec<Complex64> = (0..n)
            .map(|_| {
                Complex64::new(
                    scale * standard_normal(&mut rng),
                    scale * standard_normal(&mut rng),
                )
            })
            .collect();
        if let Some((mut roots, iterations, fmax)) =
            newton_from(model, bp, config, sites, start)
        {
            sort_roots(&mut roots);
            converged.push((roots, iterations, fmax));
        }
    }
    if converged.is_empty() {
        return Err(Error::NoConvergence {
            starts: config.multistart_count,
        });
    }

    let mut degenerate: Option<(usize, usize)> = None;
    let mut distinct: Vec<(Vec<Complex64>, usize, f64)> = Vec::new();
    for (roots, iterations, fmax) in converged {
        if let Some(pair) = degenerate_pair(model, &roots, config.pole_guard) {
            degenerate.get_or_insert(pair);
            continue;
        }
        if !distinct.iter().any(|(r, _, _)| same_solution(r, &roots)) {
            distinct.push((roots, iterations, fmax));
        }
    }
    if distinct.is_empty() {
        let (first, second) = degenerate.expect("some converged set must have collided");
        return Err(Error::DegenerateRoots {
            first,
            second,
            guard: config.pole_guard,
        });
    }
    distinct.sort_by(|(a, _, _), (b, _, _)| {
        for (x, y) in a.iter().zip(b) {
            let ord = fuzzy_cmp(x, y);
            if ord != std::cmp::Ordering::Equal {
                return ord;
            }
        }
        std::cmp::Ordering::Equal
    });

    // A converged residual whose creation product annihilates the reference
    // state proves nothing: the zero vector is no eigenstate, so such roots
    // (e.g. the exact root u = 0 of the double-row equations, where the
    // creation block vanishes identically) are discarded as spurious.
    let mut zero_state: Option<Error> = None;
    let mut results = Vec::with_capacity(distinct.len());
    for (roots, iterations, residual_max) in distinct {
        let probes =
            verification_probes(model, &roots, 5, config.rng_seed, config.pole_guard);
        let eigen_check = match verify_eigenpair(model, bp, &roots, sites, &probes) {
            Ok(value) => value,
            Err(err @ Error::ZeroState { .. }) => {
                zero_state.get_or_insert(err);
                continue;
            }
            Err(err) => return Err(err),
        };
        results.push(SolveResult {
            roots,
            converged: true,
            residual_max,
            iterations,
            eigen_check,
        });
    }
    if results.is_empty() {
        return Err(zero_state.expect("every discarded solution recorded its error"));
    }
    Ok(results)
}

/// Max over probes `u` of `‖T(u)·Ψₙ − τₙ(u)·Ψₙ‖ / ‖Ψₙ‖` with dense `T`
/// and tree-computed `τₙ`: the end-to-end certificate that the rapidity
/// set generates a transfer eigenstate.
pub fn verify_eigenpair(
    model: &VertexModel,
    bp: Option<&BoundaryParams>,
    roots: &[Complex64],
    sites: usize,
    probes: &[Complex64],
) -> Result<f64> {
    assert!(!probes.is_empty(), "need at least one probe");
    let mut worst = 0.0f64;
    for &probe in probes {
        let rap = RapiditySet::new(model, probe, roots.to_vec())?;
        let psi = match bp {
            None => excited_state(model, &rap, sites)?,
            Some(bp) => boundary_excited_state(model, bp, &rap, sites)?,
        };
        if let Some(err) = psi.zero_state_warning() {
            return Err(err);
        }
        let transfer = match bp {
            None => transfer_periodic(model, probe, sites)?,
            Some(bp) => transfer_boundary(model, bp, probe, sites)?,
        };
        let tau = eigenvalue_tau(model, bp, &rap, sites)?;
        let image = transfer.matvec(&psi)?;
        let diff = image.sub(&psi.scale(tau));
        worst = worst.max(diff.norm() / psi.norm());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::periodic::{vacuum_alpha, vacuum_delta};
    use crate::weights::periodic_coeffs;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn xxx1() -> VertexModel {
        VertexModel::xxx(c(1.0, 0.0)).unwrap()
    }

    #[test]
    fn single_rapidity_residual_matches_the_hand_formula() {
        let m = xxx1();
        let sites = 2;
        let u0 = c(0.83, 0.29);
        let u1 = c(0.41, -0.23);
        let rap = RapiditySet::new(&m, u0, vec![u1]).unwrap();
        let beta = residual_vector(&m, None, &rap, sites).unwrap();
        let co = periodic_coeffs(&m, u0, u1).unwrap();
        let expected =
            vacuum_alpha(&m, u1, sites) * co.a2 + vacuum_delta(&m, u1, sites) * co.d2;
        assert!((beta[0] - expected).norm() < 1e-13 * expected.norm().max(1.0));
    }

    #[test]
    fn hand_derived_root_annihilates_the_residual() {
        let m = xxx1();
        let rap = RapiditySet::new(&m, c(0.83, 0.29), vec![c(-0.5, 0.0)]).unwrap();
        let beta = residual_vector(&m, None, &rap, 2).unwrap();
        assert!(beta[0].norm() < 1e-12);
    }

    #[test]
    fn generic_rapidities_are_not_roots() {
        let m = xxx1();
        let rap = RapiditySet::new(&m, c(0.83, 0.29), vec![c(0.37, 0.11)]).unwrap();
        let beta = residual_vector(&m, None, &rap, 2).unwrap();
        assert!(beta[0].norm() > 1e-6);
    }

    #[test]
    fn periodic_residual_is_probe_independent_after_normalization() {
        // Dividing β_k by the probe-linking coefficient a₂(u₀, u_k)
        // leaves a function of the candidate rapidities alone.
        let m = xxx1();
        let us = vec![c(0.4, 0.2), c(-0.3, 0.5)];
        let probes = [
            c(0.83, 0.29),
            c(0.5, -0.4),
            c(1.1, 0.15),
            c(-0.7, 0.6),
            c(0.25, 0.9),
            c(1.4, -0.2),
            c(-1.2, -0.35),
            c(0.66, 0.44),
            c(0.9, -0.8),
            c(-0.15, 0.7),
        ];
        let mut reference: Option<Vec<Complex64>> = None;
        for &probe in &probes {
            let rap = RapiditySet::new(&m, probe, us.clone()).unwrap();
            let beta = residual_vector(&m, None, &rap, 3).unwrap();
            let normalized: Vec<Complex64> = beta
                .iter()
                .zip(&us)
                .map(|(b, &uk)| b / periodic_coeffs(&m, probe, uk).unwrap().a2)
                .collect();
            match &reference {
                None => reference = Some(normalized),
                Some(first) => {
                    for (a, b) in first.iter().zip(&normalized) {
                        assert!((a - b).norm() / b.norm().max(1.0) < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn two_site_chain_has_the_half_integer_root() {
        let m = xxx1();
        let config = SolveConfig::default();
        let solutions = solve(&m, None, 1, 2, &config).unwrap();
        assert_eq!(solutions.len(), 1);
        let s = &solutions[0];
        assert!(s.converged);
        assert!((s.roots[0] - c(-0.5, 0.0)).norm() < 1e-10);
        assert!(s.residual_max < config.convergence_tol);
        assert!(s.eigen_check < 1e-9);
    }

    #[test]
    fn most_individual_starts_reach_the_half_integer_root() {
        let m = xxx1();
        let mut hits = 0usize;
        let trials = 20u64;
        for seed in 0..trials {
            let config = SolveConfig {
                multistart_count: 1,
                rng_seed: 1000 + seed,
                ..SolveConfig::default()
            };
            if let Ok(solutions) = solve(&m, None, 1, 2, &config) {
                if solutions
                    .iter()
                    .any(|s| (s.roots[0] - c(-0.5, 0.0)).norm() < 1e-8)
                {
                    hits += 1;
                }
            }
        }
        assert!(hits >= 18, "only {hits}/{trials} starts converged to the root");
    }

    #[test]
    fn three_site_chain_has_the_conjugate_root_pair() {
        let m = xxx1();
        let config = SolveConfig::default();
        let solutions = solve(&m, None, 1, 3, &config).unwrap();
        assert_eq!(solutions.len(), 2);
        let expected_im = 3.0f64.sqrt() / 6.0;
        for s in &solutions {
            assert!((s.roots[0].re - (-0.5)).abs() < 1e-10);
            assert!((s.roots[0].im.abs() - expected_im).abs() < 1e-10);
            assert!(s.eigen_check < 1e-8);
        }
        assert!(solutions[0].roots[0].im * solutions[1].roots[0].im < 0.0);
    }

    #[test]
    fn boundary_chain_solution_is_found_and_certified() {
        let m = xxx1();
        let bp = BoundaryParams {
            zeta_minus: c(0.45, -0.3),
            zeta_plus: c(-0.25, 0.55),
        };
        let config = SolveConfig::default();
        let solutions = solve(&m, Some(&bp), 1, 2, &config).unwrap();
        assert!(!solutions.is_empty());
        let known = c(-0.698040, -0.257767);
        let nearest = solutions
            .iter()
            .map(|s| (s.roots[0] - known).norm())
            .fold(f64::INFINITY, f64::min);
        assert!(nearest < 1e-4, "known root not recovered (distance {nearest})");
        for s in &solutions {
            assert!(s.eigen_check < 1e-8);
        }
    }

    #[test]
    fn vacuum_is_always_an_eigenstate() {
        let m = xxx1();
        let bp = BoundaryParams {
            zeta_minus: c(0.45, -0.3),
            zeta_plus: c(-0.25, 0.55),
        };
        let probes = [c(0.83, 0.29), c(0.4, -0.5), c(1.2, 0.1)];
        assert!(verify_eigenpair(&m, None, &[], 3, &probes).unwrap() < 1e-12);
        assert!(verify_eigenpair(&m, Some(&bp), &[], 3, &probes).unwrap() < 1e-12);
    }

    #[test]
    fn perturbed_root_fails_verification() {
        let m = xxx1();
        let probes = [c(0.83, 0.29), c(0.4, -0.5)];
        let good = verify_eigenpair(&m, None, &[c(-0.5, 0.0)], 2, &probes).unwrap();
        assert!(good < 1e-10);
        let bad = verify_eigenpair(&m, None, &[c(-0.49, 0.0)], 2, &probes).unwrap();
        assert!(bad > 1e-4);
    }

    #[test]
    fn identical_configurations_give_bit_identical_results() {
        let m = VertexModel::xxz(c(0.3, 0.1)).unwrap();
        let config = SolveConfig {
            rng_seed: 77,
            ..SolveConfig::default()
        };
        let first = solve(&m, None, 1, 2, &config).unwrap();
        let second = solve(&m, None, 1, 2, &config).unwrap();
        assert_eq!(first.len(), second.len());
        for (a, b) in first.iter().zip(&second) {
            assert_eq!(a.iterations, b.iterations);
            assert_eq!(a.residual_max.to_bits(), b.residual_max.to_bits());
            assert_eq!(a.eigen_check.to_bits(), b.eigen_check.to_bits());
            for (x, y) in a.roots.iter().zip(&b.roots) {
                assert_eq!(x.re.to_bits(), y.re.to_bits());
                assert_eq!(x.im.to_bits(), y.im.to_bits());
            }
        }
    }

    #[test]
    fn periodic_solutions_do_not_depend_on_the_probe() {
        let m = xxx1();
        let base = SolveConfig::default();
        let moved = SolveConfig {
            probe_u0: c(-0.6, 0.45),
            ..base
        };
        let a = solve(&m, None, 1, 3, &base).unwrap();
        let b = solve(&m, None, 1, 3, &moved).unwrap();
        assert_eq!(a.len(), b.len());
        // Compare as root sets: the probe must not change which solutions
        // exist, while their floating-point images may differ in the last
        // few digits.
        for x in &a {
            let nearest = b
                .iter()
                .map(|y| (x.roots[0] - y.roots[0]).norm())
                .fold(f64::INFINITY, f64::min);
            assert!(nearest < 1e-8, "solution {:?} not reproduced", x.roots[0]);
        }
    }

    #[test]
    fn tree_eigenvalue_matches_the_rayleigh_quotient_at_roots() {
        let m = xxx1();
        let roots = vec![c(-0.5, 0.0)];
        let sites = 2;
        for probe in [c(0.83, 0.29), c(0.4, -0.5)] {
            let rap = RapiditySet::new(&m, probe, roots.clone()).unwrap();
            let tau = eigenvalue_tau(&m, None, &rap, sites).unwrap();
            let psi = excited_state(&m, &rap, sites).unwrap();
            let t = transfer_periodic(&m, probe, sites).unwrap();
            let rayleigh = psi.inner(&t.matvec(&psi).unwrap()) / psi.inner(&psi);
            assert!((tau - rayleigh).norm() / rayleigh.norm().max(1.0) < 1e-8);
        }
    }
}
