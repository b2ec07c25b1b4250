//! Batch front end for the six-vertex verification library.
//!
//! Three subcommands: `verify` runs residual suites and reports each
//! check with its residual, tolerance, and pass/fail; `solve` runs the
//! multistart Bethe solver and reports every distinct certified
//! solution; `trees` exports expansion diagrams as Graphviz DOT text.
//! Reports are single JSON documents with sorted keys; every command is
//! deterministic given its arguments, so repeated runs produce
//! byte-identical output.  Exit codes: 0 on success, 1 on a failed
//! check or an unconverged solve, 2 on a configuration error.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::json;

use sixvertex::boundary::{
    boundary_coefficient_identity_residuals, boundary_creation_product_state,
    boundary_excited_state, boundary_vacuum, crossing_residual,
    fundamental_relation_residual_boundary, monodromy_inverse_residual,
    reflection_residual_minus, reflection_residual_plus, shifted_commutation_residuals,
    transfer_boundary, BoundaryParams, VacuumForm,
};
use sixvertex::dense::{matmul, rel_residual, rel_residual_state, StateVector};
use sixvertex::periodic::{
    commutation_residuals_periodic, creation_product_state, excited_state,
    fundamental_relation_residual_periodic, monodromy_blocks, partition_bruteforce,
    partition_trace, reference_state, transfer_periodic, vacuum_alpha, vacuum_delta,
    MonodromyMethod, RapiditySet,
};
use sixvertex::sampling::ParameterSampler;
use sixvertex::solver::{solve, SolveConfig};
use sixvertex::trees::{
    action_via_trees, bethe_coefficient, enumerate_paths, export_dot, export_dot_weighted,
    identity_suite, BetheForm, Diagram,
};
use sixvertex::weights::{
    constancy_spread, delta_invariant, delta_invariant_variant, functional_eq_residuals,
    periodic_coefficient_identity_residuals, r_inverse_residual, ybe_residual, ModelKind,
    VertexModel, YbeForm,
};
use sixvertex::Error as LibError;

// ---------------------------------------------------------------------------
// Complex literals
// ---------------------------------------------------------------------------

/// Parses `a+bi` literals: `1`, `-0.5`, `0.3+0.1i`, `-2i`, `i`.
/// Exponent forms (`1e-3+2.5e2i`) are accepted; the imaginary unit must
/// be the final character.
fn parse_complex(text: &str) -> Result<Complex64, String> {
    let t = text.trim();
    if t.is_empty() {
        return Err("empty complex literal".into());
    }
    let Some(body) = t.strip_suffix(['i', 'I']) else {
        return t
            .parse::<f64>()
            .map(|re| Complex64::new(re, 0.0))
            .map_err(|_| format!("`{t}` is not a real or complex literal"));
    };
    // Split point: the rightmost +/- that is not an exponent sign.
    let bytes = body.as_bytes();
    let mut split = None;
    for j in (1..bytes.len()).rev() {
        if (bytes[j] == b'+' || bytes[j] == b'-') && !matches!(bytes[j - 1], b'e' | b'E') {
            split = Some(j);
            break;
        }
    }
    let (re_text, im_text) = match split {
        Some(j) => (&body[..j], &body[j..]),
        None => ("0", body),
    };
    let re: f64 = re_text
        .trim()
        .parse()
        .map_err(|_| format!("bad real part in `{t}`"))?;
    let im: f64 = match im_text.trim() {
        "" | "+" => 1.0,
        "-" => -1.0,
        other => other
            .parse()
            .map_err(|_| format!("bad imaginary part in `{t}`"))?,
    };
    Ok(Complex64::new(re, im))
}

/// Renders a complex number in the same `a+bi` form the parser accepts,
/// with shortest-roundtrip float formatting.
fn format_complex(z: Complex64) -> String {
    format!("{}{:+}i", z.re, z.im)
}

// ---------------------------------------------------------------------------
// Command line
// ---------------------------------------------------------------------------

#[derive(Debug, Parser)]
#[command(
    name = "sixvertex",
    about = "Exact verification toolkit for the six-vertex model: residual suites, Bethe solver, expansion-tree export",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run residual verification suites and report pass/fail per check.
    Verify(VerifyArgs),
    /// Solve the Bethe equations and certify each solution spectrally.
    Solve(SolveArgs),
    /// Export an expansion diagram as Graphviz DOT text.
    Trees(TreesArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Parameterization family: `xxx` (rational) or `xxz` (trigonometric).
    #[arg(long)]
    model: Option<String>,
    /// Anisotropy as a complex literal, e.g. `1` or `0.3+0.1i`.
    #[arg(long)]
    xi: Option<String>,
    /// Crossing-shift override (defaults to the anisotropy).
    #[arg(long)]
    rho: Option<String>,
    /// Left reflection coupling (default `0.45-0.3i`).
    #[arg(long)]
    zeta_minus: Option<String>,
    /// Right reflection coupling (default `-0.25+0.55i`).
    #[arg(long)]
    zeta_plus: Option<String>,
    /// TOML file supplying any of the flag keys; explicit flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the result document here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// One of ybe | delta | reflection | commutation | fundamental |
    /// trees-vs-dense | identities | partition | all (default).
    #[arg(long)]
    suite: Option<String>,
    /// Random samples per residual family (default 50; the delta
    /// constancy scan always uses at least 100 points).
    #[arg(long)]
    samples: Option<usize>,
    /// Master seed for every sampled check (default 7).
    #[arg(long)]
    seed: Option<u64>,
    /// Chain length for length-parameterized checks (default 3).
    #[arg(long = "L")]
    sites: Option<usize>,
    /// Spectral-parameter point for single-point checks
    /// (default `0.83+0.29i`).
    #[arg(long)]
    probe: Option<String>,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Periodic chain (the default).
    #[arg(long, conflicts_with = "boundary")]
    periodic: bool,
    /// Reflecting-end chain (uses the reflection couplings).
    #[arg(long)]
    boundary: bool,
    /// Chain length.
    #[arg(long = "L")]
    sites: Option<usize>,
    /// Number of rapidities to solve for.
    #[arg(long)]
    n: Option<usize>,
    /// Seed for start points and verification probes (default 7).
    #[arg(long)]
    seed: Option<u64>,
    /// Probe rapidity the residuals are evaluated at
    /// (default `0.83+0.29i`).
    #[arg(long)]
    probe: Option<String>,
    /// Number of independent Newton starts (default 64).
    #[arg(long)]
    starts: Option<usize>,
    /// Newton iteration budget per start (default 200).
    #[arg(long)]
    max_iterations: Option<usize>,
    /// Convergence threshold on the residual maximum (default 1e-12).
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Debug, Args)]
struct TreesArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Consistency flag: the diagram must be a periodic (binary) one.
    #[arg(long, conflicts_with = "boundary")]
    periodic: bool,
    /// Consistency flag: the diagram must be a reflecting (ternary) one.
    #[arg(long)]
    boundary: bool,
    /// Tree depth (number of creation operators), at most 6.
    #[arg(long)]
    n: Option<usize>,
    /// Diagram: A | D (periodic) or scriptA | scriptD (reflecting).
    #[arg(long)]
    diagram: Option<String>,
    /// Annotate every node with its rapidity value and every leaf with
    /// its numeric path weight (requires a model).
    #[arg(long)]
    values: bool,
    /// Probe rapidity for `--values` (default `0.83+0.29i`).
    #[arg(long)]
    u0: Option<String>,
    /// Comma-separated rapidities for `--values`; exactly `n` of them.
    #[arg(long, value_delimiter = ',')]
    u: Vec<String>,
    /// Chain length entering the leaf weights for `--values`
    /// (default 3).
    #[arg(long = "L")]
    sites: Option<usize>,
}

// ---------------------------------------------------------------------------
// Configuration file (same keys as flags, flags win)
// ---------------------------------------------------------------------------

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    model: Option<String>,
    xi: Option<String>,
    rho: Option<String>,
    zeta_minus: Option<String>,
    zeta_plus: Option<String>,
    suite: Option<String>,
    samples: Option<usize>,
    seed: Option<u64>,
    #[serde(rename = "L")]
    sites: Option<usize>,
    n: Option<usize>,
    probe: Option<String>,
    u0: Option<String>,
    u: Option<Vec<String>>,
    output: Option<String>,
    diagram: Option<String>,
    boundary: Option<bool>,
    values: Option<bool>,
    starts: Option<usize>,
    max_iterations: Option<usize>,
    tol: Option<f64>,
}

fn load_file_config(path: &Option<PathBuf>) -> Result<FileConfig> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let text =
                fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))
        }
    }
}

fn merged<T: Clone>(flag: &Option<T>, file: &Option<T>) -> Option<T> {
    flag.clone().or_else(|| file.clone())
}

fn parse_complex_arg(name: &str, text: &str) -> Result<Complex64> {
    parse_complex(text).map_err(|e| anyhow!("{name}: {e}"))
}

const DEFAULT_ZETA_MINUS: Complex64 = Complex64::new(0.45, -0.3);
const DEFAULT_ZETA_PLUS: Complex64 = Complex64::new(-0.25, 0.55);
const DEFAULT_PROBE: Complex64 = Complex64::new(0.83, 0.29);

/// The model kind, anisotropy, and optional crossing override, parsed
/// and validated.
fn resolve_model(common: &CommonArgs, file: &FileConfig) -> Result<(VertexModel, String)> {
    let kind = merged(&common.model, &file.model)
        .ok_or_else(|| anyhow!("missing model kind: pass --model xxx|xxz"))?
        .to_ascii_lowercase();
    let xi_text = merged(&common.xi, &file.xi)
        .ok_or_else(|| anyhow!("missing anisotropy: pass --xi <complex>"))?;
    let xi = parse_complex_arg("--xi", &xi_text)?;
    let mut model = match kind.as_str() {
        "xxx" => VertexModel::xxx(xi)?,
        "xxz" => VertexModel::xxz(xi)?,
        other => bail!("unknown model kind `{other}` (expected xxx or xxz)"),
    };
    if let Some(rho_text) = merged(&common.rho, &file.rho) {
        model = model.with_rho(parse_complex_arg("--rho", &rho_text)?);
    }
    Ok((model, kind))
}

fn resolve_boundary(common: &CommonArgs, file: &FileConfig) -> Result<BoundaryParams> {
    let zeta_minus = match merged(&common.zeta_minus, &file.zeta_minus) {
        Some(t) => parse_complex_arg("--zeta-minus", &t)?,
        None => DEFAULT_ZETA_MINUS,
    };
    let zeta_plus = match merged(&common.zeta_plus, &file.zeta_plus) {
        Some(t) => parse_complex_arg("--zeta-plus", &t)?,
        None => DEFAULT_ZETA_PLUS,
    };
    Ok(BoundaryParams {
        zeta_minus,
        zeta_plus,
    })
}

fn resolve_output(common: &CommonArgs, file: &FileConfig) -> Option<PathBuf> {
    common
        .output
        .clone()
        .or_else(|| file.output.as_ref().map(PathBuf::from))
}

fn write_output(path: &Option<PathBuf>, content: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, content).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

// ---------------------------------------------------------------------------
// Verification suites
// ---------------------------------------------------------------------------

struct Check {
    name: String,
    residual: f64,
    tolerance: f64,
    pass: bool,
}

/// A residual bounded above by its tolerance.
fn check(name: impl Into<String>, residual: f64, tolerance: f64) -> Check {
    Check {
        name: name.into(),
        residual,
        tolerance,
        pass: residual < tolerance,
    }
}

/// A diagnostic that passes when the residual *exceeds* the threshold —
/// used to demonstrate that a rejected variant is genuinely broken.
fn inverted_check(name: impl Into<String>, residual: f64, tolerance: f64) -> Check {
    Check {
        name: name.into(),
        residual,
        tolerance,
        pass: residual > tolerance,
    }
}

struct VerifyConfig {
    model: VertexModel,
    kind_name: String,
    bp: BoundaryParams,
    samples: usize,
    seed: u64,
    sites: usize,
    probe: Complex64,
}

fn suite_ybe(cfg: &VerifyConfig) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let sampler = ParameterSampler::default();
    let mut forms = [0.0f64; 3];
    let mut functional = [0.0f64; 3];
    let mut inverse = 0.0f64;
    for _ in 0..cfg.samples {
        let (u, v) = sampler.distinct_pair(&cfg.model, &mut rng);
        for (slot, form) in [YbeForm::Rrr, YbeForm::Sss, YbeForm::Srr]
            .into_iter()
            .enumerate()
        {
            forms[slot] = forms[slot].max(ybe_residual(&cfg.model, u, v, form));
        }
        let f = functional_eq_residuals(&cfg.model, u, v);
        for (slot, r) in f.into_iter().enumerate() {
            functional[slot] = functional[slot].max(r);
        }
        inverse = inverse.max(r_inverse_residual(&cfg.model, u));
    }
    Ok(vec![
        check("ybe-rrr", forms[0], 1e-10),
        check("ybe-sss", forms[1], 1e-10),
        check("ybe-srr", forms[2], 1e-10),
        check("functional-eq-1", functional[0], 1e-10),
        check("functional-eq-2", functional[1], 1e-10),
        check("functional-eq-3", functional[2], 1e-10),
        check("r-inverse", inverse, 1e-10),
    ])
}

fn suite_delta(cfg: &VerifyConfig) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(2));
    let sampler = ParameterSampler::default();
    let count = cfg.samples.max(100);
    let mut values = Vec::with_capacity(count);
    let mut variant = Vec::with_capacity(count);
    for _ in 0..count {
        let u = sampler.admissible_point(&cfg.model, &mut rng);
        values.push(delta_invariant(&cfg.model, u)?);
        variant.push(delta_invariant_variant(&cfg.model, u)?);
    }
    let expected = match cfg.model.kind() {
        ModelKind::Xxx => Complex64::new(2.0, 0.0),
        ModelKind::Xxz => cfg.model.xi().cosh() * 2.0,
    };
    let fixture = values
        .iter()
        .map(|d| (d - expected).norm())
        .fold(0.0, f64::max);
    Ok(vec![
        check("delta-constant", constancy_spread(&values), 1e-10),
        check("delta-fixture", fixture, 1e-10),
        inverted_check(
            "delta-printed-variant-nonconstant",
            constancy_spread(&variant),
            1e-2,
        ),
    ])
}

fn suite_reflection(cfg: &VerifyConfig) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(3));
    let sampler = ParameterSampler::default();
    let mut minus = 0.0f64;
    let mut plus = 0.0f64;
    let mut crossing = 0.0f64;
    for _ in 0..cfg.samples {
        let (u, v) = sampler.distinct_pair(&cfg.model, &mut rng);
        minus = minus.max(reflection_residual_minus(&cfg.model, &cfg.bp, u, v));
        plus = plus.max(reflection_residual_plus(&cfg.model, &cfg.bp, u, v));
        crossing = crossing.max(crossing_residual(&cfg.model, &cfg.bp, u));
    }
    Ok(vec![
        check("reflection-minus", minus, 1e-11),
        check("reflection-plus", plus, 1e-11),
        check("crossing-proportionality", crossing, 1e-10),
    ])
}

fn suite_commutation(cfg: &VerifyConfig) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(4));
    let sampler = ParameterSampler::default();
    let sites_p = cfg.sites.min(5);
    let sites_b = cfg.sites.min(4);
    let mut commute_p = 0.0f64;
    let mut commute_b = 0.0f64;
    let mut exchange = [0.0f64; 3];
    let mut shifted = [0.0f64; 2];
    for _ in 0..cfg.samples {
        let (u, v) = sampler.distinct_pair(&cfg.model, &mut rng);
        let tu = transfer_periodic(&cfg.model, u, sites_p)?;
        let tv = transfer_periodic(&cfg.model, v, sites_p)?;
        commute_p = commute_p.max(rel_residual(&matmul(&tu, &tv)?, &matmul(&tv, &tu)?)?);
        let bu = transfer_boundary(&cfg.model, &cfg.bp, u, sites_b)?;
        let bv = transfer_boundary(&cfg.model, &cfg.bp, v, sites_b)?;
        commute_b = commute_b.max(rel_residual(&matmul(&bu, &bv)?, &matmul(&bv, &bu)?)?);
        let cr = commutation_residuals_periodic(&cfg.model, u, v, sites_p)?;
        exchange[0] = exchange[0].max(cr.ab);
        exchange[1] = exchange[1].max(cr.db);
        exchange[2] = exchange[2].max(cr.bb);
        let (sa, sd) = shifted_commutation_residuals(&cfg.model, &cfg.bp, u, v, sites_b)?;
        shifted[0] = shifted[0].max(sa);
        shifted[1] = shifted[1].max(sd);
    }
    Ok(vec![
        check("transfer-commute-periodic", commute_p, 1e-10),
        check("transfer-commute-boundary", commute_b, 1e-10),
        check("exchange-ab", exchange[0], 1e-10),
        check("exchange-db", exchange[1], 1e-10),
        check("exchange-bb", exchange[2], 1e-10),
        check("exchange-boundary-a", shifted[0], 1e-9),
        check("exchange-boundary-d", shifted[1], 1e-9),
    ])
}

fn suite_fundamental(cfg: &VerifyConfig) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(5));
    let sampler = ParameterSampler::default();

    // Construction cross-check over a pinned length grid.
    let mut cross = 0.0f64;
    for sites in 1..=5usize {
        for _ in 0..10 {
            let u = sampler.admissible_point(&cfg.model, &mut rng);
            let direct = monodromy_blocks(&cfg.model, u, sites, MonodromyMethod::DirectProduct)?;
            let lax = monodromy_blocks(&cfg.model, u, sites, MonodromyMethod::LaxFormula)?;
            cross = cross
                .max(rel_residual(&direct.a, &lax.a)?)
                .max(rel_residual(&direct.b, &lax.b)?)
                .max(rel_residual(&direct.c, &lax.c)?)
                .max(rel_residual(&direct.d, &lax.d)?);
        }
    }

    // Exchange relations on the doubled auxiliary space are the costly
    // ones; cap the pair count.
    let heavy = cfg.samples.min(20);
    let sites_big = cfg.sites.min(3);
    let mut fr_p = 0.0f64;
    let mut fr_b = 0.0f64;
    let mut inverse = 0.0f64;
    for _ in 0..heavy {
        let (u, v) = sampler.distinct_pair(&cfg.model, &mut rng);
        fr_p = fr_p.max(fundamental_relation_residual_periodic(
            &cfg.model, u, v, cfg.sites,
        )?);
        fr_b = fr_b.max(fundamental_relation_residual_boundary(
            &cfg.model, &cfg.bp, u, v, sites_big,
        )?);
        inverse = inverse.max(monodromy_inverse_residual(&cfg.model, u, cfg.sites)?);
    }

    // Reference-state eigenvalues, exact forms.
    let mut alpha = 0.0f64;
    let mut delta = 0.0f64;
    for _ in 0..cfg.samples {
        let u = sampler.admissible_point(&cfg.model, &mut rng);
        let blocks = monodromy_blocks(&cfg.model, u, cfg.sites, MonodromyMethod::DirectProduct)?;
        let psi0 = reference_state(cfg.sites);
        alpha = alpha.max(rel_residual_state(
            &blocks.a.matvec(&psi0)?,
            &psi0.scale(vacuum_alpha(&cfg.model, u, cfg.sites)),
        ));
        delta = delta.max(rel_residual_state(
            &blocks.d.matvec(&psi0)?,
            &psi0.scale(vacuum_delta(&cfg.model, u, cfg.sites)),
        ));
    }

    // The two closed forms of the reflecting-end reference eigenvalue.
    let mut forms = 0.0f64;
    for sites in 1..=6usize {
        for _ in 0..5 {
            let u = sampler.admissible_point(&cfg.model, &mut rng);
            let poly = boundary_vacuum(&cfg.model, &cfg.bp, u, sites, VacuumForm::HomogeneousPoly)?;
            let shifted = boundary_vacuum(&cfg.model, &cfg.bp, u, sites, VacuumForm::ShiftedForm)?;
            forms = forms
                .max((poly.delta - shifted.delta).norm() / shifted.delta.norm().max(1.0));
        }
    }

    Ok(vec![
        check("monodromy-cross-construction", cross, 1e-12),
        check("monodromy-transpose-inverse", inverse, 1e-10),
        check("fundamental-periodic", fr_p, 1e-10),
        check("fundamental-boundary", fr_b, 1e-9),
        check("vacuum-alpha", alpha, 1e-12),
        check("vacuum-delta", delta, 1e-12),
        check("boundary-vacuum-forms", forms, 1e-10),
    ])
}

/// `T(u₀)·Ψₙ` against the tree-summed combination of probe-substituted
/// creation states.
fn reconstruction_residual(
    model: &VertexModel,
    bp: Option<&BoundaryParams>,
    rap: &RapiditySet,
    sites: usize,
) -> Result<f64> {
    let n = rap.n();
    let coeffs = action_via_trees(model, bp, rap, sites)?;
    let state = |values: &[Complex64]| -> Result<StateVector> {
        Ok(match bp {
            None => creation_product_state(model, values, sites)?,
            Some(bp) => boundary_creation_product_state(model, bp, values, sites)?,
        })
    };
    let psi = match bp {
        None => excited_state(model, rap, sites)?,
        Some(bp) => boundary_excited_state(model, bp, rap, sites)?,
    };
    let transfer = match bp {
        None => transfer_periodic(model, rap.u0(), sites)?,
        Some(bp) => transfer_boundary(model, bp, rap.u0(), sites)?,
    };
    let lhs = transfer.matvec(&psi)?;
    let mut rhs = psi.scale(coeffs[0]);
    for k in 1..=n {
        let mut values = rap.us().to_vec();
        values[k - 1] = rap.u0();
        rhs = rhs.add(&state(&values)?.scale(coeffs[k]));
    }
    Ok(rel_residual_state(&lhs, &rhs))
}

fn suite_trees_vs_dense(cfg: &VerifyConfig) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(6));
    let sampler = ParameterSampler::default();

    let mut recon_p = 0.0f64;
    let mut recon_b = 0.0f64;
    for n in 0..=3usize {
        for sites in n.max(1)..=4 {
            let (u0, us) = sampler.rapidity_values(&cfg.model, n, &mut rng);
            let rap = RapiditySet::new(&cfg.model, u0, us)?;
            recon_p = recon_p.max(reconstruction_residual(&cfg.model, None, &rap, sites)?);
            recon_b =
                recon_b.max(reconstruction_residual(&cfg.model, Some(&cfg.bp), &rap, sites)?);
        }
    }

    // Direct path sums against their closed forms.
    let mut forms_p = 0.0f64;
    let mut forms_b = 0.0f64;
    for n in 1..=4usize {
        let (u0, us) = sampler.rapidity_values(&cfg.model, n, &mut rng);
        let rap = RapiditySet::new(&cfg.model, u0, us)?;
        for k in 1..=n {
            let direct =
                bethe_coefficient(&cfg.model, None, &rap, 4, k, BetheForm::Unsimplified)?;
            let closed = bethe_coefficient(&cfg.model, None, &rap, 4, k, BetheForm::Simplified)?;
            forms_p = forms_p.max((direct - closed).norm() / closed.norm().max(1.0));
            let direct = bethe_coefficient(
                &cfg.model,
                Some(&cfg.bp),
                &rap,
                4,
                k,
                BetheForm::Unsimplified,
            )?;
            let closed = bethe_coefficient(
                &cfg.model,
                Some(&cfg.bp),
                &rap,
                4,
                k,
                BetheForm::Simplified,
            )?;
            forms_b = forms_b.max((direct - closed).norm() / closed.norm().max(1.0));
        }
    }

    // Exact integer path combinatorics.
    let mut mismatches = 0usize;
    for n in 0..=10usize {
        for arity in [2u8, 3u8] {
            let paths = enumerate_paths(n, arity)?;
            if paths.len() != (arity as usize).pow(n as u32) {
                mismatches += 1;
            }
            let mut per_terminal = vec![0usize; n + 1];
            for code in &paths {
                let terminal = code
                    .eta()
                    .iter()
                    .rposition(|&e| e != 1)
                    .map(|i| i + 1)
                    .unwrap_or(0);
                per_terminal[terminal] += 1;
            }
            if per_terminal[0] != 1 {
                mismatches += 1;
            }
            for (k, &count) in per_terminal.iter().enumerate().skip(1) {
                let expected = (arity as usize - 1) * (arity as usize).pow((k - 1) as u32);
                if count != expected {
                    mismatches += 1;
                }
            }
        }
    }

    Ok(vec![
        check("trees-vs-dense-periodic", recon_p, 1e-8),
        check("trees-vs-dense-boundary", recon_b, 1e-8),
        check("bethe-coefficient-forms-periodic", forms_p, 1e-10),
        check("bethe-coefficient-forms-boundary", forms_b, 1e-10),
        check("path-counts", mismatches as f64, 0.5),
    ])
}

fn suite_identities(cfg: &VerifyConfig) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(7));
    let sampler = ParameterSampler::default();
    let mut direct_p = [0.0f64; 2];
    let mut direct_b = [0.0f64; 4];
    let mut prefix = [0.0f64; 6];
    for _ in 0..cfg.samples {
        let pts = sampler.distinct_points(&cfg.model, 3, &mut rng);
        let dp = periodic_coefficient_identity_residuals(&cfg.model, pts[0], pts[1], pts[2])?;
        for (slot, r) in dp.into_iter().enumerate() {
            direct_p[slot] = direct_p[slot].max(r);
        }
        let db = boundary_coefficient_identity_residuals(&cfg.model, pts[0], pts[1], pts[2])?;
        for (slot, r) in db.into_iter().enumerate() {
            direct_b[slot] = direct_b[slot].max(r);
        }
        let (u0, us) = sampler.rapidity_values(&cfg.model, 4, &mut rng);
        let rap = RapiditySet::new(&cfg.model, u0, us)?;
        for k in 1..=4usize {
            let ir = identity_suite(&cfg.model, &rap, k)?;
            for (slot, r) in [
                ir.periodic_a,
                ir.periodic_d,
                ir.boundary_a_circle,
                ir.boundary_a_square,
                ir.boundary_d_square,
                ir.boundary_d_circle,
            ]
            .into_iter()
            .enumerate()
            {
                prefix[slot] = prefix[slot].max(r);
            }
        }
    }
    Ok(vec![
        check("identity-periodic-coeff-1", direct_p[0], 1e-10),
        check("identity-periodic-coeff-2", direct_p[1], 1e-10),
        check("identity-boundary-coeff-1", direct_b[0], 1e-10),
        check("identity-boundary-coeff-2", direct_b[1], 1e-10),
        check("identity-boundary-coeff-3", direct_b[2], 1e-10),
        check("identity-boundary-coeff-4", direct_b[3], 1e-10),
        check("prefix-sum-periodic-a", prefix[0], 1e-10),
        check("prefix-sum-periodic-d", prefix[1], 1e-10),
        check("prefix-sum-boundary-a-circle", prefix[2], 1e-10),
        check("prefix-sum-boundary-a-square", prefix[3], 1e-10),
        check("prefix-sum-boundary-d-square", prefix[4], 1e-10),
        check("prefix-sum-boundary-d-circle", prefix[5], 1e-10),
    ])
}

fn suite_partition(cfg: &VerifyConfig) -> Result<Vec<Check>> {
    let grid = [(1usize, 1usize), (1, 2), (2, 1), (2, 2), (3, 2), (2, 3)];
    let mut checks = Vec::with_capacity(grid.len());
    for (sites, rows) in grid {
        let trace = partition_trace(&cfg.model, cfg.probe, sites, rows)?;
        let brute = partition_bruteforce(&cfg.model, cfg.probe, sites, rows)?;
        let residual = (trace - brute).norm() / brute.norm().max(1.0);
        checks.push(check(format!("partition-{sites}x{rows}"), residual, 1e-9));
    }
    Ok(checks)
}

type SuiteFn = fn(&VerifyConfig) -> Result<Vec<Check>>;

const SUITES: [(&str, SuiteFn); 8] = [
    ("ybe", suite_ybe),
    ("delta", suite_delta),
    ("reflection", suite_reflection),
    ("commutation", suite_commutation),
    ("fundamental", suite_fundamental),
    ("trees-vs-dense", suite_trees_vs_dense),
    ("identities", suite_identities),
    ("partition", suite_partition),
];

fn cmd_verify(args: VerifyArgs) -> Result<ExitCode> {
    let file = load_file_config(&args.common.config)?;
    let (model, kind_name) = resolve_model(&args.common, &file)?;
    let bp = resolve_boundary(&args.common, &file)?;
    let samples = merged(&args.samples, &file.samples).unwrap_or(50);
    if samples == 0 {
        bail!("--samples must be at least 1");
    }
    let seed = merged(&args.seed, &file.seed).unwrap_or(7);
    let sites = merged(&args.sites, &file.sites).unwrap_or(3);
    if sites == 0 || sites > 8 {
        bail!("--L must be between 1 and 8 for the verification suites");
    }
    let probe = match merged(&args.probe, &file.probe) {
        Some(t) => parse_complex_arg("--probe", &t)?,
        None => DEFAULT_PROBE,
    };
    let suite_name = merged(&args.suite, &file.suite)
        .unwrap_or_else(|| "all".to_string())
        .to_ascii_lowercase()
        .replace('_', "-");

    let cfg = VerifyConfig {
        model,
        kind_name,
        bp,
        samples,
        seed,
        sites,
        probe,
    };

    let selected: Vec<&(&str, SuiteFn)> = if suite_name == "all" {
        SUITES.iter().collect()
    } else {
        let found: Vec<_> = SUITES.iter().filter(|(name, _)| *name == suite_name).collect();
        if found.is_empty() {
            bail!(
                "unknown suite `{suite_name}` (expected one of {}, or all)",
                SUITES.map(|(name, _)| name).join(", ")
            );
        }
        found
    };

    let mut checks: Vec<Check> = Vec::new();
    for (_, suite) in selected {
        checks.extend(suite(&cfg)?);
    }
    checks.sort_by(|a, b| a.name.cmp(&b.name));
    let all_pass = checks.iter().all(|c| c.pass);

    let doc = json!({
        "command": "verify",
        "config": {
            "model": cfg.kind_name,
            "xi": format_complex(cfg.model.xi()),
            "rho": format_complex(cfg.model.rho()),
            "zeta_minus": format_complex(cfg.bp.zeta_minus),
            "zeta_plus": format_complex(cfg.bp.zeta_plus),
            "suite": suite_name,
            "samples": cfg.samples,
            "seed": cfg.seed,
            "L": cfg.sites,
            "probe": format_complex(cfg.probe),
        },
        "checks": checks.iter().map(|c| json!({
            "name": c.name,
            "residual": c.residual,
            "tolerance": c.tolerance,
            "pass": c.pass,
        })).collect::<Vec<_>>(),
        "pass": all_pass,
    });
    let rendered = serde_json::to_string_pretty(&doc)? + "\n";
    write_output(&resolve_output(&args.common, &file), &rendered)?;

    for c in checks.iter().filter(|c| !c.pass) {
        eprintln!(
            "FAIL {}: residual {:e} vs tolerance {:e}",
            c.name, c.residual, c.tolerance
        );
    }
    Ok(if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

// ---------------------------------------------------------------------------
// Solve
// ---------------------------------------------------------------------------

fn cmd_solve(args: SolveArgs) -> Result<ExitCode> {
    let file = load_file_config(&args.common.config)?;
    let (model, kind_name) = resolve_model(&args.common, &file)?;
    let boundary = if args.periodic {
        false
    } else {
        args.boundary || file.boundary.unwrap_or(false)
    };
    let bp = resolve_boundary(&args.common, &file)?;
    let sites = merged(&args.sites, &file.sites)
        .ok_or_else(|| anyhow!("missing chain length: pass --L <sites>"))?;
    let n = merged(&args.n, &file.n)
        .ok_or_else(|| anyhow!("missing excitation count: pass --n <count>"))?;
    if sites == 0 {
        bail!("--L must be at least 1");
    }
    if n > sites {
        bail!("cannot place {n} rapidities on {sites} sites (need n <= L)");
    }
    let seed = merged(&args.seed, &file.seed).unwrap_or(7);
    let probe = match merged(&args.probe, &file.probe) {
        Some(t) => parse_complex_arg("--probe", &t)?,
        None => DEFAULT_PROBE,
    };
    let starts = merged(&args.starts, &file.starts).unwrap_or(64);
    let max_iterations = merged(&args.max_iterations, &file.max_iterations).unwrap_or(200);
    let tol = merged(&args.tol, &file.tol).unwrap_or(1e-12);
    if starts == 0 || max_iterations == 0 || !(tol > 0.0) {
        bail!("--starts and --max-iterations must be positive and --tol must exceed 0");
    }

    let solve_config = SolveConfig {
        max_iterations,
        convergence_tol: tol,
        multistart_count: starts,
        rng_seed: seed,
        probe_u0: probe,
        ..SolveConfig::default()
    };
    let setting = if boundary { Some(&bp) } else { None };
    let solutions = match solve(&model, setting, n, sites, &solve_config) {
        Ok(solutions) => solutions,
        Err(
            err @ (LibError::NoConvergence { .. }
            | LibError::DegenerateRoots { .. }
            | LibError::ZeroState { .. }),
        ) => {
            eprintln!("solve failed: {err}");
            return Ok(ExitCode::from(1));
        }
        Err(err) => return Err(err.into()),
    };

    let doc = json!({
        "command": "solve",
        "config": {
            "model": kind_name,
            "xi": format_complex(model.xi()),
            "rho": format_complex(model.rho()),
            "boundary": boundary,
            "zeta_minus": format_complex(bp.zeta_minus),
            "zeta_plus": format_complex(bp.zeta_plus),
            "L": sites,
            "n": n,
            "seed": seed,
            "probe": format_complex(probe),
            "starts": starts,
            "max_iterations": max_iterations,
            "tol": tol,
        },
        "solutions": solutions.iter().map(|s| json!({
            "converged": s.converged,
            "roots": s.roots.iter().map(|r| format_complex(*r)).collect::<Vec<_>>(),
            "residual_max": s.residual_max,
            "iterations": s.iterations,
            "eigen_check": s.eigen_check,
        })).collect::<Vec<_>>(),
        "pass": true,
    });
    let rendered = serde_json::to_string_pretty(&doc)? + "\n";
    write_output(&resolve_output(&args.common, &file), &rendered)?;
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------
// Trees
// ---------------------------------------------------------------------------

fn parse_diagram(text: &str) -> Result<Diagram> {
    match text.to_ascii_lowercase().as_str() {
        "a" => Ok(Diagram::A),
        "d" => Ok(Diagram::D),
        "scripta" | "script-a" => Ok(Diagram::ScriptA),
        "scriptd" | "script-d" => Ok(Diagram::ScriptD),
        other => bail!("unknown diagram `{other}` (expected A, D, scriptA, or scriptD)"),
    }
}

fn cmd_trees(args: TreesArgs) -> Result<ExitCode> {
    let file = load_file_config(&args.common.config)?;
    let n = merged(&args.n, &file.n)
        .ok_or_else(|| anyhow!("missing tree depth: pass --n <depth>"))?;
    let diagram_text = merged(&args.diagram, &file.diagram)
        .ok_or_else(|| anyhow!("missing diagram: pass --diagram A|D|scriptA|scriptD"))?;
    let diagram = parse_diagram(&diagram_text)?;
    if args.periodic && diagram.is_boundary() {
        bail!("--periodic conflicts with the ternary diagram `{diagram_text}`");
    }
    let boundary_requested = args.boundary || file.boundary.unwrap_or(false);
    if boundary_requested && !diagram.is_boundary() {
        bail!("--boundary conflicts with the binary diagram `{diagram_text}`");
    }
    if n > 6 {
        bail!("tree depth {n} exceeds the rendering cap of 6");
    }

    let values = args.values || file.values.unwrap_or(false);
    let dot = if values {
        let (model, _) = resolve_model(&args.common, &file)?;
        let bp = resolve_boundary(&args.common, &file)?;
        let sites = merged(&args.sites, &file.sites).unwrap_or(3);
        if sites == 0 || sites > 8 {
            bail!("--L must be between 1 and 8 for weight annotation");
        }
        let u0 = match merged(&args.u0, &file.u0) {
            Some(t) => parse_complex_arg("--u0", &t)?,
            None => DEFAULT_PROBE,
        };
        let u_texts = if args.u.is_empty() {
            file.u.clone().unwrap_or_default()
        } else {
            args.u.clone()
        };
        if u_texts.len() != n {
            bail!(
                "--values needs exactly {n} rapidities via --u (got {})",
                u_texts.len()
            );
        }
        let us = u_texts
            .iter()
            .map(|t| parse_complex_arg("--u", t))
            .collect::<Result<Vec<_>>>()?;
        let rap = RapiditySet::new(&model, u0, us)?;
        let setting = diagram.is_boundary().then_some(&bp);
        export_dot_weighted(&model, setting, &rap, sites, diagram)?
    } else {
        export_dot(n, diagram.arity(), diagram, None)?
    };
    write_output(&resolve_output(&args.common, &file), &dot)?;
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Verify(args) => cmd_verify(args),
        Command::Solve(args) => cmd_solve(args),
        Command::Trees(args) => cmd_trees(args),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("configuration error: {err:#}");
            ExitCode::from(2)
        }
    }
}
