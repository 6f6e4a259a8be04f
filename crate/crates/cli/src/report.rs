use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Ok,
    Invalid,
    Infeasible,
    NumericalFailure,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Ok => 0,
            RunStatus::Invalid | RunStatus::Infeasible => 1,
            RunStatus::NumericalFailure => 3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
}

/// One residual next to the tolerance it is judged by.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    pub tol: f64,
    pub ok: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, tol: f64) -> Self {
        Self { name: name.into(), value, relation: Relation::AtMost, tol, ok: value <= tol }
    }

    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, relation: Relation::AtLeast, tol: bound, ok: value >= bound }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultFile {
    pub command: Vec<String>,
    pub seed: Option<u64>,
    pub status: RunStatus,
    pub outputs: Map<String, Value>,
    pub checks: Vec<Check>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl ResultFile {
    pub fn new(command: Vec<String>, seed: Option<u64>) -> Self {
        Self { command, seed, status: RunStatus::Ok, outputs: Map::new(), checks: Vec::new(), message: None }
    }

    pub fn output(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).expect("outputs are plain data");
        self.outputs.insert(key.to_string(), v);
    }

    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    /// `Invalid` if any check fails, unless a worse status was already set.
    pub fn settle(mut self) -> Self {
        if self.status == RunStatus::Ok && self.checks.iter().any(|c| !c.ok) {
            self.status = RunStatus::Invalid;
        }
        self
    }
}
