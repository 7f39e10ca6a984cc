use thiserror::Error;

/// A single field-level configuration problem.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for FieldError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("operator is not Hermitian (defect {defect:e})")]
    Hermiticity { defect: f64 },

    #[error("operator is not unitary (defect {defect:e})")]
    Unitarity { defect: f64 },

    #[error("invalid units: hbar must be positive and finite, got {hbar}")]
    Units { hbar: f64 },

    #[error("state has zero norm")]
    ZeroNorm,

    #[error("{value} lies outside the domain [{lo}, {hi}]")]
    Domain { value: f64, lo: f64, hi: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("method {method} cannot integrate a {family} Hamiltonian")]
    MethodMismatch {
        method: &'static str,
        family: &'static str,
    },

    #[error("singular frame{}: condition number {condition:e}", at_parameter(.parameter))]
    SingularFrame { parameter: Option<f64>, condition: f64 },

    #[error("fibre vectors or maps live over different base points")]
    BasePoint,

    #[error("bundle morphism must map every fibre into itself")]
    Morphism,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("config syntax error at line {line}: {message}")]
    ConfigSyntax { line: usize, message: String },

    #[error("config validation failed: {}", join_fields(.0))]
    ConfigValidation(Vec<FieldError>),

    #[error("scenario {scenario}: {source}")]
    Scenario {
        scenario: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn at_parameter(p: &Option<f64>) -> String {
    match p {
        Some(s) => format!(" at s = {s}"),
        None => String::new(),
    }
}

fn join_fields(fields: &[FieldError]) -> String {
    fields
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    /// Field names of a validation failure, empty for every other variant.
    pub fn invalid_fields(&self) -> Vec<&str> {
        match self {
            Error::ConfigValidation(fields) => fields.iter().map(|f| f.field.as_str()).collect(),
            Error::Scenario { source, .. } => source.invalid_fields(),
            _ => Vec::new(),
        }
    }

    /// True for errors caused by the configuration text rather than the numerics.
    pub fn is_config_error(&self) -> bool {
        match self {
            Error::ConfigSyntax { .. } | Error::ConfigValidation(_) => true,
            Error::Scenario { source, .. } => source.is_config_error(),
            _ => false,
        }
    }

    pub(crate) fn in_scenario(self, name: &str) -> Error {
        match self {
            e @ Error::Scenario { .. } => e,
            e => Error::Scenario {
                scenario: name.to_string(),
                source: Box::new(e),
            },
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
