//! Scenario execution: traces, invariant reports and convergence tables.

pub mod config;

use std::io::Write;

use crate::error::{Error, Result};
use crate::evolution::{
    bundle_expectation, evolution_transport, lift_with, transport_property_report, EvolutionTransport, LiftOptions,
    PathLifting,
};
use crate::linalg::{self, c, expectation, expm_hermitian_generator, sigma_z, ComplexOperator, StateVector};
use crate::report::{format_real, DefectRecord};
use crate::schrodinger::{build_propagator, HamiltonianFamily, Propagator, PropagatorMethod, Scheme};
use crate::transport::{check_axioms, metric_compatibility_records, TransportLaw};

pub use config::{load_config, load_config_file, parse_config, parse_matrix_literal, Observable, ScenarioConfig};

/// One row of a scenario trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub t: f64,
    pub base_point: Vec<f64>,
    /// `ψ(t)` as interleaved `re, im` pairs.
    pub state_components: Vec<f64>,
    /// `Ψ_γ(t)` as interleaved `re, im` pairs.
    pub fibre_components: Vec<f64>,
    pub norm_sq: f64,
    /// Real part of each observable's expectation, in config order.
    pub expectations: Vec<f64>,
    /// Unitarity defect of `U(t, t₀)`.
    pub unitarity_defect: f64,
}

fn interleave(v: &nalgebra::DVector<linalg::C64>) -> Vec<f64> {
    v.iter().flat_map(|z| [z.re, z.im]).collect()
}

fn build_transport(cfg: &ScenarioConfig) -> Result<EvolutionTransport> {
    evolution_transport(&cfg.hamiltonian, &cfg.path, &cfg.trivialization, cfg.method)
}

fn lift(cfg: &ScenarioConfig, transport: &EvolutionTransport, verify_routes: bool) -> Result<PathLifting> {
    lift_with(transport, &cfg.initial_state, cfg.t0, &cfg.path, LiftOptions { verify_routes })
}

/// One record per path grid time.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<Vec<TraceRecord>> {
    run_inner(cfg).map_err(|e| e.in_scenario(&cfg.name))
}

fn run_inner(cfg: &ScenarioConfig) -> Result<Vec<TraceRecord>> {
    let transport = build_transport(cfg)?;
    let lifting = lift(cfg, &transport, false)?;
    let mut out = Vec::with_capacity(lifting.samples().len());
    for (t, fibre) in lifting.samples() {
        let psi = lifting.state_at(*t)?;
        let expectations = cfg
            .observables
            .iter()
            .map(|o| bundle_expectation(&o.matrix, &lifting, *t, &cfg.trivialization).map(|z| z.re))
            .collect::<Result<Vec<_>>>()?;
        let record = TraceRecord {
            t: *t,
            base_point: fibre.base_point.iter().copied().collect(),
            state_components: interleave(psi.amplitudes()),
            fibre_components: interleave(&fibre.components),
            norm_sq: psi.norm_sq(),
            expectations,
            unitarity_defect: transport.propagator().unitarity_defect_at(*t, cfg.t0)?,
        };
        if record.state_components.iter().chain(&record.fibre_components).any(|x| !x.is_finite()) {
            return Err(Error::Numerical(format!("non-finite state at t = {t}")));
        }
        out.push(record);
    }
    Ok(out)
}

/// Column names; they depend only on `dim`, the base dimension and the
/// observables.
pub fn trace_header(cfg: &ScenarioConfig) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend((0..cfg.path.base_dim()).map(|i| format!("x{i}")));
    for prefix in ["psi", "phi"] {
        for k in 0..cfg.dim {
            h.push(format!("{prefix}{k}_re"));
            h.push(format!("{prefix}{k}_im"));
        }
    }
    h.push("norm_sq".into());
    h.extend(cfg.observables.iter().map(|o| format!("expect_{}", o.name)));
    h.push("unitarity_defect".into());
    h
}

pub fn write_trace<W: Write>(out: W, cfg: &ScenarioConfig, records: &[TraceRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(trace_header(cfg))?;
    for r in records {
        let row = std::iter::once(r.t)
            .chain(r.base_point.iter().copied())
            .chain(r.state_components.iter().copied())
            .chain(r.fibre_components.iter().copied())
            .chain(std::iter::once(r.norm_sq))
            .chain(r.expectations.iter().copied())
            .chain(std::iter::once(r.unitarity_defect))
            .map(format_real);
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Small TOML document recording the source digest and tool version.
pub fn sidecar_text(cfg: &ScenarioConfig, records: usize) -> String {
    let mut t = toml::Table::new();
    t.insert("scenario".into(), cfg.name.clone().into());
    t.insert("config_sha256".into(), cfg.source_digest.clone().into());
    t.insert("tool".into(), env!("CARGO_PKG_NAME").into());
    t.insert("tool_version".into(), env!("CARGO_PKG_VERSION").into());
    t.insert("records".into(), (records as i64).into());
    toml::to_string(&t).expect("a flat table of strings and integers always serializes")
}

pub mod property {
    pub const LIFTING_ROUTES: &str = "lifting_routes";
    pub const NORM_CONSERVATION: &str = "norm_conservation";
    pub const FIBRE_NORM_CONSERVATION: &str = "fibre_norm_conservation";
    pub const HAMILTONIAN_HERMITICITY: &str = "hamiltonian_hermiticity";

    pub fn expectation_invariance(observable: &str) -> String {
        format!("expectation_invariance[{observable}]")
    }
}

#[derive(Debug, Clone)]
pub struct InvariantReport {
    pub scenario: String,
    pub records: Vec<DefectRecord>,
}

impl InvariantReport {
    pub fn passed(&self) -> bool {
        crate::report::all_pass(&self.records)
    }

    pub fn failures(&self) -> impl Iterator<Item = &DefectRecord> {
        self.records.iter().filter(|r| !r.passed())
    }

    /// Process exit status: 0 when every property holds, 1 otherwise.
    pub fn exit_status(&self) -> i32 {
        if self.passed() {
            0
        } else {
            1
        }
    }
}

/// Runs the transport axioms, the evolution-transport identities, the
/// metric predicates and the trace-level conservation checks.
pub fn check_invariants(cfg: &ScenarioConfig, samples: usize, seed: u64) -> Result<InvariantReport> {
    check_inner(cfg, samples, seed).map_err(|e| e.in_scenario(&cfg.name))
}

fn check_inner(cfg: &ScenarioConfig, samples: usize, seed: u64) -> Result<InvariantReport> {
    let tol = cfg.tolerances;
    let transport = build_transport(cfg)?;
    let path = &cfg.path;
    let triv = &cfg.trivialization;
    let label = transport.label();

    let mut records = check_axioms(&transport, path, samples, seed, tol.equality_tol);
    records.extend(transport_property_report(&transport, path, triv, samples, seed, tol.equality_tol));
    records.extend(metric_compatibility_records(&transport, path, triv, samples, seed, tol.equality_tol));

    let mut hermiticity = 0.0_f64;
    for t in transport.propagator().nodes() {
        // includes any deliberate non-Hermitian shift
        hermiticity = hermiticity.max(linalg::hermiticity_defect(&cfg.hamiltonian.eval(t)?));
    }
    records.push(DefectRecord::new(
        &label,
        property::HAMILTONIAN_HERMITICITY,
        hermiticity,
        tol.hermiticity_tol,
    ));

    let lifting = lift(cfg, &transport, true)?;
    records.push(DefectRecord::new(
        &label,
        property::LIFTING_ROUTES,
        lifting.route_defect().unwrap_or(f64::INFINITY),
        tol.equality_tol,
    ));

    let n0 = cfg.initial_state.norm_sq();
    let fibre0 = lifting.at(cfg.t0)?.norm_sq();
    let (mut norm_drift, mut fibre_drift) = (0.0_f64, 0.0_f64);
    let mut invariance = vec![0.0_f64; cfg.observables.len()];
    for (t, fibre) in lifting.samples() {
        let psi = lifting.state_at(*t)?;
        norm_drift = norm_drift.max((psi.norm_sq() - n0).abs());
        fibre_drift = fibre_drift.max((fibre.norm_sq() - fibre0).abs());
        for (k, o) in cfg.observables.iter().enumerate() {
            let in_bundle = bundle_expectation(&o.matrix, &lifting, *t, triv)?;
            let in_space = expectation(&o.matrix, &psi)?;
            invariance[k] = invariance[k].max((in_bundle - in_space).norm());
        }
    }
    records.push(DefectRecord::new(&label, property::NORM_CONSERVATION, norm_drift, tol.unitarity_tol));
    records.push(DefectRecord::new(
        &label,
        property::FIBRE_NORM_CONSERVATION,
        fibre_drift,
        tol.unitarity_tol,
    ));
    for (o, d) in cfg.observables.iter().zip(invariance) {
        records.push(DefectRecord::new(
            &label,
            property::expectation_invariance(&o.name),
            d,
            tol.equality_tol,
        ));
    }
    Ok(InvariantReport {
        scenario: cfg.name.clone(),
        records,
    })
}

/// Exact `U(t, s)` when the family has a closed form.
pub fn closed_form_propagator(cfg: &ScenarioConfig, t: f64, s: f64) -> Option<Result<ComplexOperator>> {
    let h = &cfg.hamiltonian;
    if h.is_corrupted() {
        return None;
    }
    match h.family() {
        HamiltonianFamily::Constant => {
            let m = h.constant_matrix()?;
            Some(expm_hermitian_generator(m, t - s, h.hbar()))
        }
        HamiltonianFamily::PiecewiseConstant => {
            let exact = PropagatorMethod::new(Scheme::ExactConstant, 1);
            let (a, b) = (s.min(t), s.max(t));
            if a == b {
                return Some(Ok(linalg::identity(h.dim())));
            }
            Some(build_propagator(h, a, b, exact).and_then(|p| p.at(t, s)))
        }
        HamiltonianFamily::TwoLevelDrive => {
            let (detuning, rabi, omega) = h.drive_parameters()?;
            Some(two_level_drive_propagator(detuning, rabi, omega, h.hbar(), t, s))
        }
        HamiltonianFamily::Tabulated => None,
    }
}

/// `U(t, s) = R(t) exp(−i(t − s)H'/ħ) R(s)†` with `R(t) = exp(−iωtσ_z/2)`
/// and the constant rotating-frame Hamiltonian
/// `H' = ((Δ − ħω)/2)σ_z + (Ω/2)σ_x`.
pub fn two_level_drive_propagator(
    detuning: f64,
    rabi: f64,
    omega: f64,
    hbar: f64,
    t: f64,
    s: f64,
) -> Result<ComplexOperator> {
    let frame = |time: f64| expm_hermitian_generator(&sigma_z(), omega * time / 2.0, 1.0);
    let h_rot = sigma_z() * c((detuning - hbar * omega) / 2.0, 0.0) + linalg::sigma_x() * c(rabi / 2.0, 0.0);
    let inner = expm_hermitian_generator(&h_rot, t - s, hbar)?;
    Ok(frame(t)? * inner * frame(s)?.adjoint())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub steps: usize,
    /// Max-entry error of `ψ(t_end)` against the reference.
    pub error: f64,
    /// `log(e_prev / e) / log(n / n_prev)`; absent on the first row.
    pub observed_order: Option<f64>,
    pub unitarity_defect: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Reference {
    ClosedForm,
    FinestRung,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub scheme: Scheme,
    pub reference: Reference,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["steps", "error", "observed_order", "unitarity_defect"])?;
        for r in &self.rows {
            w.write_record([
                r.steps.to_string(),
                format_real(r.error),
                r.observed_order.map_or_else(String::new, format_real),
                format_real(r.unitarity_defect),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Error of the final state `ψ(t_end)` for each step count, against the
/// closed form when the family has one and the finest rung otherwise.
pub fn convergence_study(cfg: &ScenarioConfig, ladder: &[usize]) -> Result<ConvergenceTable> {
    if ladder.len() < 3 {
        return Err(Error::InvalidArgument("the step ladder needs at least three rungs".into()));
    }
    if ladder[0] == 0 || ladder.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("the step ladder must be positive and strictly increasing".into()));
    }
    convergence_inner(cfg, ladder).map_err(|e| e.in_scenario(&cfg.name))
}

fn convergence_inner(cfg: &ScenarioConfig, ladder: &[usize]) -> Result<ConvergenceTable> {
    let (a, b) = cfg.path.domain();
    let scheme = cfg.method.scheme;
    let finals = ladder
        .iter()
        .map(|&n| {
            let prop = build_propagator(&cfg.hamiltonian, a, b, PropagatorMethod::new(scheme, n))?;
            let psi = linalg::apply(&prop.at(b, cfg.t0)?, &cfg.initial_state)?;
            Ok((psi, final_unitarity(&prop, b, cfg.t0)?))
        })
        .collect::<Result<Vec<(StateVector, f64)>>>()?;
    let (reference, kind) = match closed_form_propagator(cfg, b, cfg.t0) {
        Some(u) => (linalg::apply(&u?, &cfg.initial_state)?, Reference::ClosedForm),
        None => (finals[finals.len() - 1].0.clone(), Reference::FinestRung),
    };
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(ladder.len());
    for (&steps, (psi, unitarity_defect)) in ladder.iter().zip(finals) {
        let error = linalg::max_abs_vec(&(psi.amplitudes() - reference.amplitudes()));
        let observed_order = rows
            .last()
            .map(|prev| (prev.error / error).ln() / (steps as f64 / prev.steps as f64).ln());
        rows.push(ConvergenceRow {
            steps,
            error,
            observed_order,
            unitarity_defect,
        });
    }
    Ok(ConvergenceTable {
        scheme,
        reference: kind,
        rows,
    })
}

fn final_unitarity(prop: &Propagator, t: f64, s: f64) -> Result<f64> {
    if t == s {
        return Ok(0.0);
    }
    prop.unitarity_defect_at(t, s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rabi_text(scheme: &str, steps: usize) -> String {
        format!(
            r#"
name = "rabi"
dim = 2
initial_state = [[1.0, 0.0], [0.0, 0.0]]

[hamiltonian]
family = "two_level_drive"
detuning = 1.0
rabi = 1.0
drive_frequency = 1.0

[path]
family = "line"
domain = [0.0, 3.0]
grid_points = 31
origin = [0.0, 0.0, 0.0]
velocity = [1.0, 0.0, 0.0]

[trivialization]
family = "rotation_field"
wavevector = [1.0, 0.5, 0.0]

[method]
scheme = "{scheme}"
steps = {steps}

[[observable]]
name = "sz"
matrix = "sigma_z"
"#
        )
    }

    fn rabi(scheme: &str, steps: usize) -> ScenarioConfig {
        parse_config(rabi_text(scheme, steps).as_bytes()).unwrap()
    }

    #[test]
    fn drive_closed_form_matches_fine_integration() {
        let cfg = rabi("magnus_midpoint", 20000);
        let prop = build_propagator(&cfg.hamiltonian, 0.0, 3.0, cfg.method).unwrap();
        let exact = closed_form_propagator(&cfg, 2.7, 0.4).unwrap().unwrap();
        assert!(linalg::distance(&exact, &prop.at(2.7, 0.4).unwrap()) < 1e-8);
    }

    #[test]
    fn resonant_trace_follows_cosine() {
        let cfg = rabi("magnus_midpoint", 4096);
        let trace = run_scenario(&cfg).unwrap();
        assert_eq!(trace.len(), 31);
        for r in &trace {
            assert!((r.expectations[0] - r.t.cos()).abs() < 1e-6, "t = {} err {:e}", r.t, r.expectations[0] - r.t.cos());
            assert!((r.norm_sq - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_hamiltonian_trace_is_constant() {
        let text = rabi_text("magnus_midpoint", 8).replace(
            "family = \"two_level_drive\"\ndetuning = 1.0\nrabi = 1.0\ndrive_frequency = 1.0",
            "family = \"zero\"",
        );
        let cfg = parse_config(text.replace("rotation_field\"\nwavevector = [1.0, 0.5, 0.0]", "identity\"").as_bytes())
            .unwrap();
        let trace = run_scenario(&cfg).unwrap();
        for r in &trace[1..] {
            assert_eq!(r.state_components, trace[0].state_components);
            assert_eq!(r.fibre_components, trace[0].fibre_components);
            assert_eq!(r.expectations, trace[0].expectations);
        }
    }

    #[test]
    fn trace_bytes_are_reproducible() {
        let render = || {
            let cfg = rabi("crank_nicolson", 300);
            let mut buf = Vec::new();
            write_trace(&mut buf, &cfg, &run_scenario(&cfg).unwrap()).unwrap();
            buf
        };
        let first = render();
        assert_eq!(first, render());
        let text = String::from_utf8(first).unwrap();
        assert!(text.starts_with("t,x0,x1,x2,psi0_re,psi0_im,psi1_re,psi1_im,phi0_re,"));
        assert!(text.lines().next().unwrap().ends_with("norm_sq,expect_sz,unitarity_defect"));
    }

    #[test]
    fn invariants_hold_for_hermitian_scenario() {
        let report = check_invariants(&rabi("magnus_midpoint", 512), 50, 3).unwrap();
        assert!(report.passed(), "{:#?}", report.failures().collect::<Vec<_>>());
        assert_eq!(report.exit_status(), 0);
    }

    #[test]
    fn corrupted_hamiltonian_fails_named_identity() {
        let text = rabi_text("magnus_midpoint", 512).replace("drive_frequency = 1.0", "drive_frequency = 1.0\nnon_hermitian_shift = 1e-4");
        let report = check_invariants(&parse_config(text.as_bytes()).unwrap(), 50, 3).unwrap();
        assert_eq!(report.exit_status(), 1);
        assert!(report
            .failures()
            .any(|r| r.property == crate::evolution::property::HERMITIAN_UNITARY_IDENTITY));
    }

    #[test]
    fn observables_are_optional_in_reports() {
        let text = rabi_text("magnus_midpoint", 64).replace("[[observable]]\nname = \"sz\"\nmatrix = \"sigma_z\"\n", "");
        let report = check_invariants(&parse_config(text.as_bytes()).unwrap(), 10, 1).unwrap();
        assert!(report.passed());
        assert!(!report.records.iter().any(|r| r.property.starts_with("expectation_invariance")));
    }

    #[test]
    fn magnus_is_second_order_on_the_drive() {
        let table = convergence_study(&rabi("magnus_midpoint", 1), &[256, 512, 1024, 2048]).unwrap();
        assert_eq!(table.reference, Reference::ClosedForm);
        for r in &table.rows[1..] {
            let p = r.observed_order.unwrap();
            assert!((p - 2.0).abs() < 0.25, "order {p}");
        }
    }

    #[test]
    fn exact_constant_is_at_roundoff() {
        let text = rabi_text("exact_constant", 1).replace(
            "family = \"two_level_drive\"\ndetuning = 1.0\nrabi = 1.0\ndrive_frequency = 1.0",
            "family = \"constant\"\nmatrix = \"sigma_x\"",
        );
        let table = convergence_study(&parse_config(text.as_bytes()).unwrap(), &[1, 2, 4]).unwrap();
        assert!(table.rows.iter().all(|r| r.error < 1e-14), "{table:?}");
    }

    #[test]
    fn euler_is_first_order_and_drifts() {
        let table = convergence_study(&rabi("euler_unstable", 1), &[1000, 2000, 4000, 8000]).unwrap();
        for r in &table.rows[1..] {
            assert!((r.observed_order.unwrap() - 1.0).abs() < 0.2, "{table:?}");
        }
        assert!(table.rows[0].unitarity_defect > table.rows[3].unitarity_defect);
        assert!(table.rows[0].unitarity_defect > 1e-3);
    }

    #[test]
    fn ladder_must_increase() {
        let cfg = rabi("magnus_midpoint", 1);
        assert!(convergence_study(&cfg, &[4, 8]).is_err());
        assert!(convergence_study(&cfg, &[4, 4, 8]).is_err());
        assert!(convergence_study(&cfg, &[0, 4, 8]).is_err());
    }

    #[test]
    fn sidecar_carries_digest() {
        let cfg = rabi("magnus_midpoint", 8);
        let text = sidecar_text(&cfg, 31);
        let parsed: toml::Table = text.parse().unwrap();
        assert_eq!(parsed["config_sha256"].as_str().unwrap(), cfg.source_digest);
        assert_eq!(parsed["records"].as_integer(), Some(31));
    }
}
