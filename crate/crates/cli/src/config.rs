//! Experiment configuration.
//!
//! The file is TOML. Validation walks the raw table and collects every
//! violation instead of stopping at the first one, so `--validate-only` can
//! report them all.

use std::fmt;

use rblab::clifford::ErrorModel;
use rblab::fit::FitModel;
use rblab::rb::default_lengths;
use rblab::superop::Superoperator;
use serde::Serialize;
use toml::{Table, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Simulate,
    Theory,
    Sweep,
    GaugeDemo,
    Counterexample,
}

impl Command {
    const NAMES: [(&'static str, Command); 5] = [
        ("simulate", Command::Simulate),
        ("theory", Command::Theory),
        ("sweep", Command::Sweep),
        ("gauge-demo", Command::GaugeDemo),
        ("counterexample", Command::Counterexample),
    ];

    fn parse(s: &str) -> Option<Command> {
        Self::NAMES.iter().find(|(n, _)| *n == s).map(|(_, c)| *c)
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = Self::NAMES.iter().find(|(_, c)| c == self).map(|(n, _)| *n).unwrap_or("?");
        f.write_str(name)
    }
}

/// Error model by name plus its numeric parameters.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModelSpec {
    pub name: String,
    pub params: Table,
}

struct ModelSchema {
    name: &'static str,
    scalars: &'static [&'static str],
    vectors: &'static [&'static str],
    matrices: &'static [&'static str],
}

const MODELS: &[ModelSchema] = &[
    ModelSchema { name: "perfect", scalars: &[], vectors: &[], matrices: &[] },
    ModelSchema { name: "coherent_z", scalars: &["theta"], vectors: &[], matrices: &[] },
    ModelSchema {
        name: "general_primitive",
        scalars: &["theta_x", "theta_y", "lambda"],
        vectors: &["axis_x", "axis_y"],
        matrices: &[],
    },
    ModelSchema { name: "depolarizing", scalars: &["lambda"], vectors: &[], matrices: &[] },
    ModelSchema { name: "custom", scalars: &[], vectors: &[], matrices: &["x_error", "y_error"] },
];

impl ModelSpec {
    /// Builds the model, with `override_param` replacing one scalar.
    pub fn build(&self, override_param: Option<(&str, f64)>) -> rblab::Result<ErrorModel> {
        let scalar = |k: &str| -> f64 {
            match override_param {
                Some((name, v)) if name == k => v,
                _ => self.params.get(k).and_then(as_f64).unwrap_or(f64::NAN),
            }
        };
        // Axes are normalized, so any non-zero direction is accepted.
        let vector = |k: &str| -> [f64; 3] {
            let v = self.params.get(k).and_then(as_f64_vec).unwrap_or_else(|| vec![f64::NAN; 3]);
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            [v[0] / norm, v[1] / norm, v[2] / norm]
        };
        let matrix = |k: &str| -> rblab::Result<Superoperator> {
            let rows = self.params.get(k).and_then(as_matrix).unwrap_or_default();
            Superoperator::from_rows(2, &rows)
        };
        Ok(match self.name.as_str() {
            "perfect" => ErrorModel::Perfect,
            "coherent_z" => ErrorModel::CoherentZ { theta: scalar("theta") },
            "general_primitive" => ErrorModel::GeneralPrimitive {
                theta_x: scalar("theta_x"),
                axis_x: vector("axis_x"),
                theta_y: scalar("theta_y"),
                axis_y: vector("axis_y"),
                lambda: scalar("lambda"),
            },
            "depolarizing" => ErrorModel::gate_independent_depolarizing(scalar("lambda"))?,
            "custom" => ErrorModel::Custom { x_error: matrix("x_error")?, y_error: matrix("y_error")? },
            other => return Err(rblab::Error::InvalidInput(format!("unknown error model {other}"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RbSection {
    pub lengths: Vec<usize>,
    pub k_per_length: usize,
    pub repeats: usize,
    pub fit_model: FitModel,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepSection {
    pub parameter: String,
    pub grid: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CounterexampleSection {
    pub lambda: f64,
    pub alpha_grid: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GaugeSection {
    pub restarts: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub command: Command,
    pub seed: u64,
    pub error_model: ModelSpec,
    pub rb: RbSection,
    pub sweep: Option<SweepSection>,
    pub counterexample: CounterexampleSection,
    pub gauge: GaugeSection,
    /// Not part of provenance, so reruns into other directories match.
    #[serde(skip)]
    pub output: String,
}

/// `α ∈ [0.99, 1.01]` in steps of `5·10⁻⁴`.
pub fn default_alpha_grid() -> Vec<f64> {
    (-20..=20).map(|k| 1.0 + 5e-4 * f64::from(k)).collect()
}

/// One schema violation, prefixed by the offending key path.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation(pub String);

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn as_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Float(x) => Some(*x),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

fn as_f64_vec(v: &Value) -> Option<Vec<f64>> {
    v.as_array()?.iter().map(as_f64).collect()
}

fn as_matrix(v: &Value) -> Option<Vec<Vec<f64>>> {
    v.as_array()?.iter().map(as_f64_vec).collect()
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

struct Walker {
    violations: Vec<Violation>,
}

impl Walker {
    fn push(&mut self, path: &str, msg: impl fmt::Display) {
        self.violations.push(Violation(format!("{path}: {msg}")));
    }

    fn unknown_keys(&mut self, table: &Table, prefix: &str, allowed: &[&str]) {
        for key in table.keys() {
            if !allowed.contains(&key.as_str()) {
                let path = if prefix.is_empty() { key.clone() } else { format!("{prefix}.{key}") };
                self.push(&path, "unknown key");
            }
        }
    }

    fn table<'a>(&mut self, parent: &'a Table, key: &str) -> Option<&'a Table> {
        match parent.get(key) {
            None => None,
            Some(Value::Table(t)) => Some(t),
            Some(_) => {
                self.push(key, "expected a table");
                None
            }
        }
    }

    fn non_negative(&mut self, table: &Table, path: &str, key: &str, min: i64) -> Option<u64> {
        match table.get(key) {
            None => None,
            Some(Value::Integer(i)) if *i >= min => Some(*i as u64),
            Some(Value::Integer(i)) => {
                self.push(&join(path, key), format!("must be >= {min}, got {i}"));
                None
            }
            Some(_) => {
                self.push(&join(path, key), "expected an integer");
                None
            }
        }
    }

    fn number(&mut self, table: &Table, path: &str, key: &str) -> Option<f64> {
        let v = table.get(key)?;
        match as_f64(v) {
            Some(x) if x.is_finite() => Some(x),
            _ => {
                self.push(&join(path, key), "expected a finite number");
                None
            }
        }
    }

    fn numbers(&mut self, table: &Table, path: &str, key: &str) -> Option<Vec<f64>> {
        let v = table.get(key)?;
        match as_f64_vec(v) {
            Some(xs) if !xs.is_empty() && xs.iter().all(|x| x.is_finite()) => Some(xs),
            _ => {
                self.push(&join(path, key), "expected a non-empty array of finite numbers");
                None
            }
        }
    }
}

/// Parses and validates a config document. Returns all violations on failure.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, Vec<Violation>> {
    let root: Table = match text.parse() {
        Ok(t) => t,
        Err(e) => return Err(vec![Violation(format!("parse error: {}", e.message()))]),
    };
    let mut w = Walker { violations: Vec::new() };
    w.unknown_keys(&root, "", &["command", "seed", "error_model", "rb", "sweep", "counterexample", "gauge", "output"]);

    let command = match root.get("command") {
        None => {
            w.push("command", "missing");
            None
        }
        Some(Value::String(s)) => {
            let c = Command::parse(s);
            if c.is_none() {
                let names: Vec<&str> = Command::NAMES.iter().map(|(n, _)| *n).collect();
                w.push("command", format!("unknown command {s:?}; expected one of {}", names.join(", ")));
            }
            c
        }
        Some(_) => {
            w.push("command", "expected a string");
            None
        }
    };
    let seed = w.non_negative(&root, "", "seed", 0).unwrap_or(0);

    let model = match w.table(&root, "error_model") {
        None => ModelSpec { name: "perfect".into(), params: Table::new() },
        Some(t) => validate_model(&mut w, t),
    };

    let rb_table = w.table(&root, "rb").cloned().unwrap_or_default();
    w.unknown_keys(&rb_table, "rb", &["lengths", "k_per_length", "repeats", "fit_model"]);
    let lengths = match rb_table.get("lengths") {
        None => default_lengths(),
        Some(v) => match v.as_array().map(|a| a.iter().map(|x| x.as_integer()).collect::<Option<Vec<i64>>>()) {
            Some(Some(ls)) if !ls.is_empty() && ls.iter().all(|m| *m >= 1) => ls.iter().map(|m| *m as usize).collect(),
            _ => {
                w.push("rb.lengths", "expected a non-empty array of integers >= 1");
                Vec::new()
            }
        },
    };
    let k_per_length = w.non_negative(&rb_table, "rb", "k_per_length", 1).unwrap_or(500) as usize;
    let repeats = w.non_negative(&rb_table, "rb", "repeats", 1).unwrap_or(50) as usize;
    let fit_model = match rb_table.get("fit_model") {
        None => FitModel::Zeroth,
        Some(Value::String(s)) if s == "zeroth" => FitModel::Zeroth,
        Some(Value::String(s)) if s == "first" => FitModel::First,
        Some(_) => {
            w.push("rb.fit_model", "expected \"zeroth\" or \"first\"");
            FitModel::Zeroth
        }
    };

    let sweep = w.table(&root, "sweep").cloned().map(|t| {
        w.unknown_keys(&t, "sweep", &["parameter", "grid"]);
        let parameter = match t.get("parameter") {
            Some(Value::String(s)) => s.clone(),
            _ => {
                w.push("sweep.parameter", "expected a parameter name");
                String::new()
            }
        };
        if !parameter.is_empty() {
            let scalars = MODELS.iter().find(|m| m.name == model.name).map(|m| m.scalars).unwrap_or(&[]);
            if !scalars.contains(&parameter.as_str()) {
                w.push("sweep.parameter", format!("{parameter:?} is not a scalar parameter of {}", model.name));
            }
        }
        let grid = w.numbers(&t, "sweep", "grid").unwrap_or_default();
        if !t.contains_key("grid") {
            w.push("sweep.grid", "missing");
        }
        SweepSection { parameter, grid }
    });
    if command == Some(Command::Sweep) && sweep.is_none() {
        w.push("sweep", "required for the sweep command");
    }

    let ce = w.table(&root, "counterexample").cloned().unwrap_or_default();
    w.unknown_keys(&ce, "counterexample", &["lambda", "alpha_grid"]);
    let lambda = w.number(&ce, "counterexample", "lambda").unwrap_or(0.99);
    if !(0.0..1.0).contains(&lambda) {
        w.push("counterexample.lambda", format!("must lie in [0, 1), got {lambda}"));
    }
    let alpha_grid = w.numbers(&ce, "counterexample", "alpha_grid").unwrap_or_else(default_alpha_grid);
    if alpha_grid.iter().any(|a| *a <= 0.0) {
        w.push("counterexample.alpha_grid", "alpha values must be positive");
    }

    let gauge = w.table(&root, "gauge").cloned().unwrap_or_default();
    w.unknown_keys(&gauge, "gauge", &["restarts"]);
    let restarts = w.non_negative(&gauge, "gauge", "restarts", 1).unwrap_or(8) as usize;

    let output = match root.get("output") {
        None => "out".to_string(),
        Some(Value::String(s)) => s.clone(),
        Some(Value::Table(t)) => {
            w.unknown_keys(t, "output", &["dir"]);
            match t.get("dir") {
                Some(Value::String(s)) => s.clone(),
                _ => {
                    w.push("output.dir", "expected a path string");
                    String::new()
                }
            }
        }
        Some(_) => {
            w.push("output", "expected a path string or a table with `dir`");
            String::new()
        }
    };

    if let (true, Some(c)) = (w.violations.is_empty(), command) {
        // Catch parameter values the model constructors reject.
        if let Err(e) = model.build(None) {
            w.push("error_model", e);
        }
        if w.violations.is_empty() {
            return Ok(ExperimentConfig {
                command: c,
                seed,
                error_model: model,
                rb: RbSection { lengths, k_per_length, repeats, fit_model },
                sweep,
                counterexample: CounterexampleSection { lambda, alpha_grid },
                gauge: GaugeSection { restarts },
                output,
            });
        }
    }
    Err(w.violations)
}

fn validate_model(w: &mut Walker, t: &Table) -> ModelSpec {
    let name = match t.get("name") {
        Some(Value::String(s)) => s.clone(),
        Some(_) => {
            w.push("error_model.name", "expected a string");
            return ModelSpec { name: "perfect".into(), params: Table::new() };
        }
        None => {
            w.push("error_model.name", "missing");
            return ModelSpec { name: "perfect".into(), params: Table::new() };
        }
    };
    let Some(schema) = MODELS.iter().find(|m| m.name == name) else {
        let names: Vec<&str> = MODELS.iter().map(|m| m.name).collect();
        w.push("error_model.name", format!("unknown error model {name:?}; expected one of {}", names.join(", ")));
        return ModelSpec { name, params: Table::new() };
    };
    let mut allowed = vec!["name"];
    allowed.extend(schema.scalars);
    allowed.extend(schema.vectors);
    allowed.extend(schema.matrices);
    w.unknown_keys(t, "error_model", &allowed);
    for key in schema.scalars {
        if t.contains_key(*key) {
            w.number(t, "error_model", key);
        } else {
            w.push(&format!("error_model.{key}"), "missing");
        }
    }
    for key in schema.vectors {
        match t.get(*key).map(as_f64_vec) {
            Some(Some(v)) if v.len() == 3 && v.iter().any(|x| *x != 0.0) => {}
            Some(_) => w.push(&format!("error_model.{key}"), "expected a non-zero array of 3 numbers"),
            None => w.push(&format!("error_model.{key}"), "missing"),
        }
    }
    for key in schema.matrices {
        match t.get(*key).map(as_matrix) {
            Some(Some(m)) if m.len() == 4 && m.iter().all(|r| r.len() == 4) => {}
            Some(_) => w.push(&format!("error_model.{key}"), "expected a 4x4 array of numbers"),
            None => w.push(&format!("error_model.{key}"), "missing"),
        }
    }
    let mut params = t.clone();
    params.remove("name");
    ModelSpec { name, params }
}
