//! Scenario configuration: TOML text with one section per building block.
//!
//! ```toml
//! name = "rabi"
//! dim = 2
//! hbar = 1.0            # optional, default 1
//! t0 = 0.0              # optional, default: start of the path domain
//! seed = 7              # optional, default 0
//! initial_state = [[1.0, 0.0], [0.0, 0.0]]
//!
//! [hamiltonian]
//! family = "two_level_drive"
//! detuning = 1.0
//! rabi = 1.0
//! drive_frequency = 1.0
//!
//! [path]
//! family = "line"
//! domain = [0.0, 3.0]
//! grid_points = 31
//! origin = [0.0, 0.0, 0.0]
//! velocity = [1.0, 0.0, 0.0]
//!
//! [trivialization]
//! family = "rotation_field"
//! axis = [0.0, 0.0, 1.0]
//! wavevector = [1.0, 0.0, 0.0]
//!
//! [method]
//! scheme = "magnus_midpoint"
//! steps = 1024
//!
//! [[observable]]
//! name = "sz"
//! matrix = "sigma_z"
//! ```
//!
//! A matrix is either a builtin name (`identity`, `zero`, `sigma_x`,
//! `sigma_y`, `sigma_z`, `spin_x`, `spin_y`, `spin_z`) or an array of rows
//! whose entries are numbers or `[re, im]` pairs. Validation collects every
//! problem before failing.

use std::io::Read;
use std::path::Path;

use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::bundle::{BasePath, PathShape, Trivialization, DEFAULT_BASE_DIM};
use crate::error::{Error, FieldError, Result};
use crate::linalg::{c, hermiticity_defect, identity, sigma_x, sigma_y, sigma_z, spin_matrices};
use crate::linalg::{ComplexOperator, StateVector, ToleranceConfig, C64};
use crate::schrodinger::{HamiltonianFamily, PropagatorMethod, Scheme, Segment, TimeDependentHamiltonian};

/// Largest accepted Hilbert-space dimension.
pub const MAX_DIM: usize = 32;
/// Largest accepted `steps · dim²`, which bounds the propagator cache.
pub const MAX_STEP_WORK: usize = 50_000_000;
/// Largest accepted path grid.
pub const MAX_GRID_POINTS: usize = 1_000_000;

#[derive(Debug, Clone)]
pub struct Observable {
    pub name: String,
    pub matrix: ComplexOperator,
}

/// A validated scenario with every component already constructed.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub name: String,
    pub dim: usize,
    pub hbar: f64,
    pub t0: f64,
    pub seed: u64,
    pub hamiltonian: TimeDependentHamiltonian,
    pub path: BasePath,
    pub trivialization: Trivialization,
    pub method: PropagatorMethod,
    pub initial_state: StateVector,
    pub observables: Vec<Observable>,
    pub tolerances: ToleranceConfig,
    /// Hex SHA-256 of the source text.
    pub source_digest: String,
}

pub fn load_config<R: Read>(mut source: R) -> Result<ScenarioConfig> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    parse_config(&bytes)
}

pub fn load_config_file(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    load_config(std::fs::File::open(path)?)
}

pub fn parse_config(bytes: &[u8]) -> Result<ScenarioConfig> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::ConfigSyntax {
        line: line_of(bytes, e.valid_up_to()),
        message: "input is not valid UTF-8".into(),
    })?;
    let table = parse_table(text)?;
    let mut v = Validator::default();
    let config = v.scenario(&table);
    match config {
        Some(mut config) if v.errors.is_empty() => {
            config.source_digest = hex_digest(bytes);
            Ok(config)
        }
        _ => Err(Error::ConfigValidation(v.errors)),
    }
}

/// Parses one matrix value, e.g. `"sigma_x"` or `[[1, 0], [0, [0, 1]]]`.
pub fn parse_matrix_literal(text: &str, dim: usize) -> Result<ComplexOperator> {
    let table = parse_table(&format!("m = {text}\n"))?;
    if table.len() != 1 {
        return Err(Error::ConfigSyntax {
            line: 1,
            message: "expected a single matrix value".into(),
        });
    }
    let mut v = Validator::default();
    match table.get("m").and_then(|m| v.matrix(m, "matrix", dim)) {
        Some(m) if v.errors.is_empty() => Ok(m),
        _ => Err(Error::ConfigValidation(v.errors)),
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn parse_table(text: &str) -> Result<Table> {
    text.parse::<Table>().map_err(|e| Error::ConfigSyntax {
        line: e.span().map_or(1, |s| line_of(text.as_bytes(), s.start)),
        message: e.message().to_string(),
    })
}

fn line_of(bytes: &[u8], offset: usize) -> usize {
    1 + bytes[..offset.min(bytes.len())].iter().filter(|&&b| b == b'\n').count()
}

fn join(prefix: &str, key: &str) -> String {
    if prefix.is_empty() {
        key.to_string()
    } else {
        format!("{prefix}.{key}")
    }
}

#[derive(Default)]
struct Validator {
    errors: Vec<FieldError>,
}

impl Validator {
    fn fail(&mut self, field: impl Into<String>, message: impl Into<String>) {
        self.errors.push(FieldError {
            field: field.into(),
            message: message.into(),
        });
    }

    fn fail_with(&mut self, field: &str, e: Error) {
        self.fail(field, e.to_string());
    }

    fn reject_unknown(&mut self, table: &Table, prefix: &str, known: &[&str]) {
        for key in table.keys() {
            if !known.contains(&key.as_str()) {
                self.fail(join(prefix, key), "unknown key");
            }
        }
    }

    fn require<'a>(&mut self, table: &'a Table, prefix: &str, key: &str) -> Option<&'a Value> {
        let v = table.get(key);
        if v.is_none() {
            self.fail(join(prefix, key), "missing");
        }
        v
    }

    fn real(&mut self, v: &Value, field: &str) -> Option<f64> {
        let x = match v {
            Value::Float(x) => *x,
            Value::Integer(i) => *i as f64,
            _ => {
                self.fail(field, "expected a number");
                return None;
            }
        };
        if x.is_finite() {
            Some(x)
        } else {
            self.fail(field, "must be finite");
            None
        }
    }

    fn count(&mut self, v: &Value, field: &str) -> Option<u64> {
        match v {
            Value::Integer(i) if *i >= 0 => Some(*i as u64),
            Value::Integer(_) => {
                self.fail(field, "must be non-negative");
                None
            }
            _ => {
                self.fail(field, "expected an integer");
                None
            }
        }
    }

    fn string<'a>(&mut self, v: &'a Value, field: &str) -> Option<&'a str> {
        match v {
            Value::String(s) => Some(s),
            _ => {
                self.fail(field, "expected a string");
                None
            }
        }
    }

    fn table<'a>(&mut self, v: &'a Value, field: &str) -> Option<&'a Table> {
        match v {
            Value::Table(t) => Some(t),
            _ => {
                self.fail(field, "expected a table");
                None
            }
        }
    }

    fn array<'a>(&mut self, v: &'a Value, field: &str) -> Option<&'a [Value]> {
        match v {
            Value::Array(a) => Some(a),
            _ => {
                self.fail(field, "expected an array");
                None
            }
        }
    }

    fn reals(&mut self, v: &Value, field: &str) -> Option<Vec<f64>> {
        let items = self.array(v, field)?;
        let before = self.errors.len();
        let out: Vec<f64> = items
            .iter()
            .enumerate()
            .filter_map(|(i, x)| self.real(x, &format!("{field}[{i}]")))
            .collect();
        (self.errors.len() == before).then_some(out)
    }

    fn opt_real(&mut self, t: &Table, prefix: &str, key: &str, default: f64) -> Option<f64> {
        match t.get(key) {
            Some(v) => self.real(v, &join(prefix, key)),
            None => Some(default),
        }
    }

    fn req_real(&mut self, t: &Table, prefix: &str, key: &str) -> Option<f64> {
        let v = self.require(t, prefix, key)?;
        self.real(v, &join(prefix, key))
    }

    fn complex(&mut self, v: &Value, field: &str) -> Option<C64> {
        match v {
            Value::Array(pair) if pair.len() == 2 => {
                let re = self.real(&pair[0], field);
                let im = self.real(&pair[1], field);
                Some(c(re?, im?))
            }
            Value::Array(_) => {
                self.fail(field, "a complex entry is a [re, im] pair");
                None
            }
            other => self.real(other, field).map(|x| c(x, 0.0)),
        }
    }

    fn matrix(&mut self, v: &Value, field: &str, dim: usize) -> Option<ComplexOperator> {
        if let Value::String(name) = v {
            let m = match name.as_str() {
                "identity" => identity(dim),
                "zero" => ComplexOperator::zeros(dim, dim),
                "sigma_x" | "sigma_y" | "sigma_z" if dim != 2 => {
                    self.fail(field, format!("{name} needs dim = 2, got {dim}"));
                    return None;
                }
                "sigma_x" => sigma_x(),
                "sigma_y" => sigma_y(),
                "sigma_z" => sigma_z(),
                "spin_x" | "spin_y" | "spin_z" if dim == 0 => {
                    self.fail(field, "spin matrices need dim >= 1");
                    return None;
                }
                "spin_x" => spin_matrices(dim)[0].clone(),
                "spin_y" => spin_matrices(dim)[1].clone(),
                "spin_z" => spin_matrices(dim)[2].clone(),
                _ => {
                    self.fail(field, format!("unknown builtin matrix {name:?}"));
                    return None;
                }
            };
            return Some(m);
        }
        let rows = self.array(v, field)?;
        if rows.len() != dim {
            self.fail(field, format!("expected {dim} rows, found {}", rows.len()));
            return None;
        }
        let mut m = ComplexOperator::zeros(dim, dim);
        let before = self.errors.len();
        for (i, row) in rows.iter().enumerate() {
            let row_field = format!("{field}[{i}]");
            let Some(entries) = self.array(row, &row_field) else { continue };
            if entries.len() != dim {
                self.fail(&row_field, format!("expected {dim} entries, found {}", entries.len()));
                continue;
            }
            for (j, e) in entries.iter().enumerate() {
                if let Some(z) = self.complex(e, &format!("{row_field}[{j}]")) {
                    m[(i, j)] = z;
                }
            }
        }
        (self.errors.len() == before).then_some(m)
    }

    fn scenario(&mut self, root: &Table) -> Option<ScenarioConfig> {
        self.reject_unknown(
            root,
            "",
            &[
                "name",
                "dim",
                "hbar",
                "t0",
                "seed",
                "initial_state",
                "hamiltonian",
                "path",
                "trivialization",
                "method",
                "observable",
                "tolerances",
            ],
        );

        let name = self.require(root, "", "name").and_then(|v| self.string(v, "name")).map(str::to_string);
        if let Some(n) = &name {
            if n.trim().is_empty() {
                self.fail("name", "must not be empty");
            }
        }
        let dim = self.require(root, "", "dim").and_then(|v| self.count(v, "dim")).and_then(|d| {
            if d == 0 || d as usize > MAX_DIM {
                self.fail("dim", format!("must lie in 1..={MAX_DIM}"));
                None
            } else {
                Some(d as usize)
            }
        });
        let hbar = self.opt_real(root, "", "hbar", 1.0).and_then(|h| {
            if h > 0.0 {
                Some(h)
            } else {
                self.fail("hbar", "must be positive");
                None
            }
        });
        let seed = match root.get("seed") {
            Some(v) => self.count(v, "seed"),
            None => Some(0),
        };
        let tolerances = match root.get("tolerances") {
            Some(v) => self.tolerances(v),
            None => Some(ToleranceConfig::default()),
        };

        let initial_state = match (root.get("initial_state"), dim) {
            (None, _) => {
                self.fail("initial_state", "missing");
                None
            }
            (Some(v), Some(dim)) => self.state(v, dim),
            (Some(_), None) => None,
        };

        let method = self.require(root, "", "method").and_then(|v| self.method(v, dim));

        let hamiltonian = match (self.require(root, "", "hamiltonian"), dim, hbar, tolerances) {
            (Some(v), Some(dim), Some(hbar), Some(tol)) => self.hamiltonian(v, dim, hbar, tol),
            _ => None,
        };
        let path = self.require(root, "", "path").and_then(|v| self.path(v));
        let trivialization = match (root.get("trivialization"), dim, &path, seed, tolerances) {
            (_, Some(dim), Some(path), Some(seed), Some(tol)) => {
                self.trivialization(root.get("trivialization"), dim, path.base_dim(), seed, tol)
            }
            (Some(v), _, _, _, _) => {
                self.table(v, "trivialization");
                None
            }
            _ => None,
        };
        let observables = match (root.get("observable"), dim, tolerances) {
            (None, _, _) => Some(Vec::new()),
            (Some(v), Some(dim), Some(tol)) => self.observables(v, dim, tol),
            _ => None,
        };

        let t0 = match (root.get("t0"), &path) {
            (Some(v), Some(path)) => self.real(v, "t0").and_then(|t0| {
                if path.contains(t0) {
                    Some(t0)
                } else {
                    let (a, b) = path.domain();
                    self.fail("t0", format!("{t0} lies outside the path domain [{a}, {b}]"));
                    None
                }
            }),
            (Some(v), None) => {
                self.real(v, "t0");
                None
            }
            (None, Some(path)) => Some(path.domain().0),
            (None, None) => None,
        };

        if let (Some(h), Some(path)) = (&hamiltonian, &path) {
            let (lo, hi) = h.domain();
            let (a, b) = path.domain();
            if a < lo || b > hi {
                self.fail(
                    "path.domain",
                    format!("[{a}, {b}] is not covered by the Hamiltonian domain [{lo}, {hi}]"),
                );
            }
        }
        if let (Some(h), Some(m)) = (&hamiltonian, &method) {
            if m.scheme == Scheme::ExactConstant
                && !matches!(
                    h.family(),
                    HamiltonianFamily::Constant | HamiltonianFamily::PiecewiseConstant
                )
            {
                self.fail(
                    "method.scheme",
                    format!("exact_constant cannot integrate a {} Hamiltonian", h.family()),
                );
            }
        }

        Some(ScenarioConfig {
            name: name?,
            dim: dim?,
            hbar: hbar?,
            t0: t0?,
            seed: seed?,
            hamiltonian: hamiltonian?,
            path: path?,
            trivialization: trivialization?,
            method: method?,
            initial_state: initial_state?,
            observables: observables?,
            tolerances: tolerances?,
            source_digest: String::new(),
        })
    }

    fn tolerances(&mut self, v: &Value) -> Option<ToleranceConfig> {
        let t = self.table(v, "tolerances")?;
        self.reject_unknown(t, "tolerances", &["hermiticity_tol", "unitarity_tol", "equality_tol"]);
        let d = ToleranceConfig::default();
        let tol = ToleranceConfig {
            hermiticity_tol: self.opt_real(t, "tolerances", "hermiticity_tol", d.hermiticity_tol)?,
            unitarity_tol: self.opt_real(t, "tolerances", "unitarity_tol", d.unitarity_tol)?,
            equality_tol: self.opt_real(t, "tolerances", "equality_tol", d.equality_tol)?,
        };
        if let Err(e) = tol.validate() {
            self.fail_with("tolerances", e);
            return None;
        }
        Some(tol)
    }

    fn state(&mut self, v: &Value, dim: usize) -> Option<StateVector> {
        let items = self.array(v, "initial_state")?;
        if items.len() != dim {
            self.fail("initial_state", format!("expected {dim} entries, found {}", items.len()));
            return None;
        }
        let before = self.errors.len();
        let amps: Vec<C64> = items
            .iter()
            .enumerate()
            .filter_map(|(i, z)| self.complex(z, &format!("initial_state[{i}]")))
            .collect();
        if self.errors.len() != before {
            return None;
        }
        let psi = StateVector::new(amps);
        if !(psi.norm_sq() > 0.0) || !psi.norm_sq().is_finite() {
            self.fail("initial_state", "must have finite, non-zero norm");
            return None;
        }
        Some(psi)
    }

    fn method(&mut self, v: &Value, dim: Option<usize>) -> Option<PropagatorMethod> {
        let t = self.table(v, "method")?;
        self.reject_unknown(t, "method", &["scheme", "steps"]);
        let scheme = self
            .require(t, "method", "scheme")
            .and_then(|s| self.string(s, "method.scheme"))
            .and_then(|s| {
                let scheme = Scheme::from_name(s);
                if scheme.is_none() {
                    self.fail("method.scheme", format!("unknown scheme {s:?}"));
                }
                scheme
            });
        let steps = self
            .require(t, "method", "steps")
            .and_then(|s| self.count(s, "method.steps"))
            .and_then(|n| {
                let work = (n as usize).saturating_mul(dim.unwrap_or(1).pow(2));
                if n == 0 {
                    self.fail("method.steps", "must be at least 1");
                    None
                } else if work > MAX_STEP_WORK {
                    self.fail("method.steps", format!("steps * dim^2 exceeds {MAX_STEP_WORK}"));
                    None
                } else {
                    Some(n as usize)
                }
            });
        Some(PropagatorMethod::new(scheme?, steps?))
    }

    fn hamiltonian(
        &mut self,
        v: &Value,
        dim: usize,
        hbar: f64,
        tol: ToleranceConfig,
    ) -> Option<TimeDependentHamiltonian> {
        const P: &str = "hamiltonian";
        let t = self.table(v, P)?;
        let family = self.require(t, P, "family").and_then(|f| self.string(f, "hamiltonian.family"))?;
        let shift = self.opt_real(t, P, "non_hermitian_shift", 0.0);
        let built = match family {
            "constant" => {
                self.reject_unknown(t, P, &["family", "non_hermitian_shift", "matrix"]);
                let m = self.require(t, P, "matrix").and_then(|m| self.matrix(m, "hamiltonian.matrix", dim))?;
                TimeDependentHamiltonian::constant(m, hbar)
            }
            "zero" => {
                self.reject_unknown(t, P, &["family", "non_hermitian_shift"]);
                TimeDependentHamiltonian::zero(dim, hbar)
            }
            "piecewise_constant" => {
                self.reject_unknown(t, P, &["family", "non_hermitian_shift", "segment"]);
                let segs = self.require(t, P, "segment").and_then(|s| self.array(s, "hamiltonian.segment"))?;
                let before = self.errors.len();
                let mut segments = Vec::new();
                for (i, s) in segs.iter().enumerate() {
                    let field = format!("hamiltonian.segment[{i}]");
                    let Some(st) = self.table(s, &field) else { continue };
                    self.reject_unknown(st, &field, &["start", "end", "matrix"]);
                    let start = self.req_real(st, &field, "start");
                    let end = self.req_real(st, &field, "end");
                    let matrix = self
                        .require(st, &field, "matrix")
                        .and_then(|m| self.matrix(m, &format!("{field}.matrix"), dim));
                    if let (Some(start), Some(end), Some(matrix)) = (start, end, matrix) {
                        segments.push(Segment { start, end, matrix });
                    }
                }
                if self.errors.len() != before {
                    return None;
                }
                TimeDependentHamiltonian::piecewise_constant(segments, hbar)
            }
            "two_level_drive" => {
                self.reject_unknown(
                    t,
                    P,
                    &["family", "non_hermitian_shift", "detuning", "rabi", "drive_frequency"],
                );
                if dim != 2 {
                    self.fail("hamiltonian.family", format!("two_level_drive needs dim = 2, got {dim}"));
                }
                let detuning = self.req_real(t, P, "detuning");
                let rabi = self.req_real(t, P, "rabi");
                let freq = self.req_real(t, P, "drive_frequency");
                if dim != 2 {
                    return None;
                }
                TimeDependentHamiltonian::two_level_drive(detuning?, rabi?, freq?, hbar)
            }
            "tabulated" => {
                self.reject_unknown(t, P, &["family", "non_hermitian_shift", "sample"]);
                let rows = self.require(t, P, "sample").and_then(|s| self.array(s, "hamiltonian.sample"))?;
                let before = self.errors.len();
                let mut samples = Vec::new();
                for (i, s) in rows.iter().enumerate() {
                    let field = format!("hamiltonian.sample[{i}]");
                    let Some(st) = self.table(s, &field) else { continue };
                    self.reject_unknown(st, &field, &["t", "matrix"]);
                    let time = self.req_real(st, &field, "t");
                    let matrix = self
                        .require(st, &field, "matrix")
                        .and_then(|m| self.matrix(m, &format!("{field}.matrix"), dim));
                    if let (Some(time), Some(matrix)) = (time, matrix) {
                        samples.push((time, matrix));
                    }
                }
                if self.errors.len() != before {
                    return None;
                }
                TimeDependentHamiltonian::tabulated(samples, hbar)
            }
            other => {
                self.fail("hamiltonian.family", format!("unknown family {other:?}"));
                return None;
            }
        };
        let shift = shift?;
        match built {
            Ok(h) if shift != 0.0 => Some(h.with_non_hermitian_shift(shift)),
            Ok(h) => {
                let h = h.with_hermiticity_tol(tol.hermiticity_tol);
                // reject non-Hermitian input up front rather than mid-run
                if let Some(m) = h.constant_matrix() {
                    let defect = hermiticity_defect(m);
                    if !(defect <= tol.hermiticity_tol) {
                        self.fail_with("hamiltonian", Error::Hermiticity { defect });
                        return None;
                    }
                }
                Some(h)
            }
            Err(e) => {
                self.fail_with(P, e);
                None
            }
        }
    }

    fn path(&mut self, v: &Value) -> Option<BasePath> {
        const P: &str = "path";
        let t = self.table(v, P)?;
        let family = self.require(t, P, "family").and_then(|f| self.string(f, "path.family"));
        let domain = self.require(t, P, "domain").and_then(|d| self.reals(d, "path.domain")).and_then(|d| {
            if d.len() == 2 && d[0] < d[1] {
                Some((d[0], d[1]))
            } else {
                self.fail("path.domain", "expected [start, end] with start < end");
                None
            }
        });
        let grid = self
            .require(t, P, "grid_points")
            .and_then(|g| self.count(g, "path.grid_points"))
            .and_then(|g| {
                if (2..=MAX_GRID_POINTS as u64).contains(&g) {
                    Some(g as usize)
                } else {
                    self.fail("path.grid_points", format!("must lie in 2..={MAX_GRID_POINTS}"));
                    None
                }
            });
        let base = ["family", "domain", "grid_points"];
        let with = |extra: &[&'static str]| base.iter().chain(extra).copied().collect::<Vec<_>>();
        let (shape, base_dim) = match family? {
            "line" => {
                self.reject_unknown(t, P, &with(&["origin", "velocity"]));
                let origin = self.require(t, P, "origin").and_then(|o| self.reals(o, "path.origin"));
                let velocity = self.require(t, P, "velocity").and_then(|o| self.reals(o, "path.velocity"));
                let (origin, velocity) = (origin?, velocity?);
                let d = origin.len();
                (PathShape::Line { origin, velocity }, d)
            }
            "circle" => {
                self.reject_unknown(t, P, &with(&["center", "radius", "angular_frequency"]));
                let center = match t.get("center") {
                    Some(v) => self.reals(v, "path.center"),
                    None => Some(vec![0.0; DEFAULT_BASE_DIM]),
                };
                let radius = self.opt_real(t, P, "radius", 1.0);
                let angular_frequency = self.opt_real(t, P, "angular_frequency", 1.0);
                let center = center?;
                let d = center.len();
                (
                    PathShape::Circle {
                        center,
                        radius: radius?,
                        angular_frequency: angular_frequency?,
                    },
                    d,
                )
            }
            "figure_eight" => {
                self.reject_unknown(t, P, &with(&["amplitude", "base_dim"]));
                let amplitude = self.opt_real(t, P, "amplitude", 1.0);
                let d = match t.get("base_dim") {
                    Some(v) => self.count(v, "path.base_dim").map(|d| d as usize),
                    None => Some(DEFAULT_BASE_DIM),
                };
                let d = d.filter(|&d| d <= 64);
                (PathShape::FigureEight { amplitude: amplitude? }, d?)
            }
            other => {
                self.fail("path.family", format!("unknown family {other:?}"));
                return None;
            }
        };
        match BasePath::new(shape, domain?, base_dim, grid?) {
            Ok(p) => Some(p),
            Err(e) => {
                self.fail_with(P, e);
                None
            }
        }
    }

    fn trivialization(
        &mut self,
        v: Option<&Value>,
        dim: usize,
        base_dim: usize,
        seed: u64,
        tol: ToleranceConfig,
    ) -> Option<Trivialization> {
        const P: &str = "trivialization";
        let Some(v) = v else {
            return Some(Trivialization::identity(dim, base_dim));
        };
        let t = self.table(v, P)?;
        let family = self.require(t, P, "family").and_then(|f| self.string(f, "trivialization.family"))?;
        let built = match family {
            "identity" => {
                self.reject_unknown(t, P, &["family"]);
                Ok(Trivialization::identity(dim, base_dim))
            }
            "rotation_field" => {
                self.reject_unknown(t, P, &["family", "axis", "wavevector"]);
                let axis = match t.get("axis") {
                    Some(a) => self.reals(a, "trivialization.axis").and_then(|a| {
                        <[f64; 3]>::try_from(a).ok().or_else(|| {
                            self.fail("trivialization.axis", "expected three components");
                            None
                        })
                    }),
                    None => Some([0.0, 0.0, 1.0]),
                };
                let k = self
                    .require(t, P, "wavevector")
                    .and_then(|k| self.reals(k, "trivialization.wavevector"))
                    .and_then(|k| {
                        if k.len() == base_dim {
                            Some(k)
                        } else {
                            self.fail(
                                "trivialization.wavevector",
                                format!("expected {base_dim} components to match the path, found {}", k.len()),
                            );
                            None
                        }
                    });
                Trivialization::rotation_field(dim, axis?, k?)
            }
            "seeded_random_unitary" => {
                self.reject_unknown(t, P, &["family", "seed", "spread"]);
                let s = match t.get("seed") {
                    Some(v) => self.count(v, "trivialization.seed"),
                    None => Some(seed),
                };
                let spread = self.opt_real(t, P, "spread", 1.0);
                Trivialization::seeded_random_unitary(dim, base_dim, s?, spread?)
            }
            other => {
                self.fail("trivialization.family", format!("unknown family {other:?}"));
                return None;
            }
        };
        match built {
            Ok(t) => Some(t.with_unitarity_tol(tol.unitarity_tol)),
            Err(e) => {
                self.fail_with(P, e);
                None
            }
        }
    }

    fn observables(&mut self, v: &Value, dim: usize, tol: ToleranceConfig) -> Option<Vec<Observable>> {
        let items = self.array(v, "observable")?;
        let before = self.errors.len();
        let mut out: Vec<Observable> = Vec::new();
        for (i, item) in items.iter().enumerate() {
            let field = format!("observable[{i}]");
            let Some(t) = self.table(item, &field) else { continue };
            self.reject_unknown(t, &field, &["name", "matrix"]);
            let name = self
                .require(t, &field, "name")
                .and_then(|n| self.string(n, &format!("{field}.name")))
                .and_then(|n| {
                    let ok = !n.is_empty() && n.chars().all(|ch| ch.is_ascii_alphanumeric() || ch == '_');
                    if !ok {
                        self.fail(format!("{field}.name"), "use letters, digits and underscores");
                        None
                    } else if out.iter().any(|o| o.name == n) {
                        self.fail(format!("{field}.name"), format!("duplicate observable {n:?}"));
                        None
                    } else {
                        Some(n.to_string())
                    }
                });
            let matrix_field = format!("{field}.matrix");
            let matrix = self
                .require(t, &field, "matrix")
                .and_then(|m| self.matrix(m, &matrix_field, dim))
                .and_then(|m| {
                    let defect = hermiticity_defect(&m);
                    if defect <= tol.hermiticity_tol {
                        Some(m)
                    } else {
                        self.fail_with(&matrix_field, Error::Hermiticity { defect });
                        None
                    }
                });
            if let (Some(name), Some(matrix)) = (name, matrix) {
                out.push(Observable { name, matrix });
            }
        }
        (self.errors.len() == before).then_some(out)
    }
}
