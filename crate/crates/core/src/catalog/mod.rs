//! Benchmark construction: the oracle registry, seeded example generation,
//! train/test splits and on-disk export.

mod domain;
mod export;
pub mod oracles;
mod split;

use std::sync::LazyLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::value::Value;

pub use domain::{InputDomain, Shape};
pub use export::{export_benchmark, load_benchmark, load_task, Manifest, ManifestEntry, GENERATOR_VERSION};
pub use split::{build_split, draw, generate_examples, HIDDEN_COUNT, TEST_SEED, TRAIN_SEED, VISIBLE_COUNT};

use oracles::OracleFn;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    Arithmetic,
    Core,
    Sequence,
    BitParity,
    Newton,
    Geometry,
    Extra,
}

impl Family {
    pub const ALL: [Family; 7] = [
        Family::Arithmetic,
        Family::Core,
        Family::Sequence,
        Family::BitParity,
        Family::Newton,
        Family::Geometry,
        Family::Extra,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Level {
    Base,
    Algorithm,
    Geometry,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::Base, Level::Algorithm, Level::Geometry];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub input: Value,
    pub output: Value,
}

impl Example {
    pub fn new(input: Value, output: Value) -> Self {
        Example { input, output }
    }
}

/// A benchmark task: visible examples drive the search, hidden examples are
/// only ever read by held-out evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Task {
    pub id: String,
    pub family: Family,
    pub level: Level,
    pub oracle_id: String,
    pub function_name: String,
    pub domain: InputDomain,
    pub visible: Vec<Example>,
    hidden: Vec<Example>,
}

impl Task {
    pub fn new(def: &TaskDef, visible: Vec<Example>, hidden: Vec<Example>) -> Task {
        Task {
            id: def.id.to_string(),
            family: def.family,
            level: def.level,
            oracle_id: def.oracle_id.to_string(),
            function_name: def.function_name.to_string(),
            domain: def.domain.clone(),
            visible,
            hidden,
        }
    }

    pub fn hidden(&self) -> &[Example] {
        &self.hidden
    }
}

/// How random inputs are drawn for a task.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampler {
    Domain,
    Rpn,
}

/// Registry entry describing how to build one task.
#[derive(Debug, Clone)]
pub struct TaskDef {
    pub id: &'static str,
    pub family: Family,
    pub level: Level,
    pub oracle_id: &'static str,
    pub function_name: &'static str,
    pub domain: InputDomain,
    pub edge_cases: Vec<Value>,
    /// Tasks whose domain cannot supply disjoint splits may overlap.
    pub small_domain: bool,
    pub sampler: Sampler,
    pub oracle: OracleFn,
}

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("unknown oracle {0:?}")]
    UnknownOracle(String),
    #[error("input outside the domain of {oracle}: {detail}")]
    DomainViolation { oracle: String, detail: String },
    #[error("domain of {task} cannot supply {needed} distinct inputs (found {found})")]
    DomainTooSmall { task: String, needed: usize, found: usize },
    #[error("{task}: count {count} is below its {edge_cases} edge cases")]
    CountBelowEdgeCases {
        task: String,
        count: usize,
        edge_cases: usize,
    },
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed task file {path}: {detail}")]
    Malformed { path: String, detail: String },
}

fn def(
    id: &'static str,
    family: Family,
    level: Level,
    domain: InputDomain,
    edge_cases: Vec<Value>,
    oracle: OracleFn,
) -> TaskDef {
    TaskDef {
        id,
        family,
        level,
        oracle_id: id,
        function_name: "f",
        domain,
        edge_cases,
        small_domain: false,
        sampler: Sampler::Domain,
        oracle,
    }
}

fn pair(a: Value, b: Value) -> Value {
    Value::Tuple(vec![a, b])
}

fn pts(points: &[(i64, i64)]) -> Value {
    Value::List(
        points
            .iter()
            .map(|&(x, y)| pair(Value::Int(x), Value::Int(y)))
            .collect(),
    )
}

fn s(text: &str) -> Value {
    Value::Str(text.to_string())
}

static REGISTRY: LazyLock<Vec<TaskDef>> = LazyLock::new(|| {
    use oracles::*;
    use Family as F;
    use Level as L;
    use Shape::*;
    let seq = InputDomain::seq;
    let il = |xs: &[i64]| Value::int_list(xs.iter().copied());
    vec![
        def(
            "prime_factorization",
            F::Arithmetic,
            L::Base,
            InputDomain::scalar(1, 200),
            vec![Value::Int(1), Value::Int(2)],
            prime_factorization,
        ),
        def(
            "digit_sum",
            F::Arithmetic,
            L::Base,
            InputDomain::scalar(0, 99_999),
            vec![Value::Int(0), Value::Int(9), Value::Int(10)],
            digit_sum,
        ),
        def(
            "gcd_pair",
            F::Arithmetic,
            L::Base,
            seq(IntSeq, (2, 2), (1, 60)),
            vec![il(&[6, 6]), il(&[1, 7])],
            gcd_pair,
        ),
        def(
            "collatz_steps",
            F::Arithmetic,
            L::Base,
            InputDomain::scalar(1, 300),
            vec![Value::Int(1), Value::Int(2)],
            collatz_steps,
        ),
        def(
            "integer_sqrt",
            F::Newton,
            L::Base,
            InputDomain::scalar(0, 10_000),
            vec![Value::Int(0), Value::Int(1), Value::Int(4)],
            integer_sqrt,
        ),
        def(
            "base_k_addition",
            F::Core,
            L::Base,
            seq(IntPairSeq, (3, 10), (0, BASE_K - 1)),
            vec![
                pair(il(&[2, 2, 2]), il(&[1, 0, 0])),
                pair(il(&[0, 0, 0]), il(&[0, 0, 0])),
            ],
            base_k_addition,
        ),
        def(
            "running_sum",
            F::Core,
            L::Base,
            seq(IntSeq, (3, 10), (-20, 20)),
            vec![il(&[0, 0, 0]), il(&[1, -1, 1])],
            running_sum,
        ),
        def(
            "running_max",
            F::Core,
            L::Base,
            seq(IntSeq, (3, 10), (-50, 50)),
            vec![il(&[3, 2, 1])],
            running_max,
        ),
        def(
            "moving_average",
            F::Core,
            L::Base,
            seq(FloatSeq, (3, 10), (-10, 10)),
            vec![Value::List(vec![Value::Float(1.0); 3])],
            moving_average,
        ),
        def(
            "reverse_list",
            F::Sequence,
            L::Base,
            seq(IntSeq, (3, 10), (0, 99)),
            vec![il(&[1, 2, 3])],
            reverse_list,
        ),
        def(
            "pairwise_diff",
            F::Sequence,
            L::Base,
            seq(IntSeq, (3, 10), (-20, 20)),
            vec![il(&[5, 5, 5])],
            pairwise_diff,
        ),
        def(
            "delayed_echo",
            F::Sequence,
            L::Base,
            seq(IntSeq, (3, 10), (1, 9)),
            vec![il(&[1, 2, 3])],
            delayed_echo,
        ),
        def(
            "parity_fold",
            F::BitParity,
            L::Base,
            seq(BitSeq, (3, 10), (0, 1)),
            vec![il(&[0, 0, 0]), il(&[1, 1, 1])],
            parity_fold,
        ),
        def(
            "xor_fold",
            F::BitParity,
            L::Base,
            seq(IntSeq, (3, 10), (0, 15)),
            vec![il(&[0, 0, 0]), il(&[15, 15, 15])],
            xor_fold,
        ),
        def(
            "binary_dot_product",
            F::BitParity,
            L::Base,
            seq(BitPairSeq, (3, 10), (0, 1)),
            vec![
                pair(il(&[1, 1, 1]), il(&[1, 1, 1])),
                pair(il(&[0, 0, 0]), il(&[1, 1, 1])),
            ],
            binary_dot_product,
        ),
        def(
            "majority_bit",
            F::BitParity,
            L::Base,
            seq(BitSeq, (3, 10), (0, 1)),
            vec![il(&[1, 1, 0, 0]), il(&[1, 1, 1])],
            majority_bit,
        ),
        def(
            "sort_list",
            F::Extra,
            L::Base,
            seq(IntSeq, (3, 10), (-50, 50)),
            vec![il(&[3, 2, 1]), il(&[1, 1, 1])],
            sort_list,
        ),
        def(
            "filter_even",
            F::Extra,
            L::Base,
            seq(IntSeq, (3, 10), (0, 50)),
            vec![il(&[1, 3, 5])],
            filter_even,
        ),
        def(
            "count_occurrences",
            F::Extra,
            L::Base,
            InputDomain::str_pair((3, 10), (1, 2), "ab"),
            vec![pair(s("aaa"), s("aa"))],
            count_occurrences,
        ),
        def(
            "run_length_encode",
            F::Extra,
            L::Base,
            InputDomain::text((3, 10), "ab"),
            vec![s("aaa")],
            run_length_encode,
        ),
        def(
            "lis_length",
            F::Extra,
            L::Algorithm,
            seq(IntSeq, (3, 10), (0, 20)),
            vec![il(&[3, 2, 1]), il(&[1, 2, 3])],
            lis_length,
        ),
        def(
            "edit_distance",
            F::Extra,
            L::Algorithm,
            InputDomain::str_pair((1, 6), (1, 6), "abc"),
            vec![pair(s("a"), s("a")), pair(s("abc"), s("cba"))],
            edit_distance,
        ),
        TaskDef {
            sampler: Sampler::Rpn,
            ..def(
                "rpn_eval",
                F::Extra,
                L::Algorithm,
                InputDomain::text((1, 40), "0123456789+-* "),
                vec![s("3 4 +")],
                rpn_eval,
            )
        },
        def(
            "two_sum_exists",
            F::Extra,
            L::Algorithm,
            seq(IntSeq, (3, 10), (-10, 10)),
            vec![il(&[0, 0, 1]), il(&[1, 2, 3])],
            two_sum_exists,
        ),
        def(
            "triangle_area_3pts",
            F::Geometry,
            L::Geometry,
            seq(PointSeq, (3, 3), (-10, 10)),
            vec![pts(&[(0, 0), (1, 1), (2, 2)])],
            triangle_area_3pts,
        ),
        def(
            "max_triangle_area",
            F::Geometry,
            L::Geometry,
            seq(PointSeq, (4, 8), (-10, 10)),
            vec![pts(&[(0, 0), (0, 0), (0, 0), (0, 0)])],
            max_triangle_area,
        ),
        def(
            "manhattan_path_length",
            F::Geometry,
            L::Geometry,
            seq(PointSeq, (2, 8), (-10, 10)),
            vec![pts(&[(0, 0), (0, 0)])],
            manhattan_path_length,
        ),
    ]
});

/// All registered task definitions, in catalog order.
pub fn registry() -> &'static [TaskDef] {
    &REGISTRY
}

pub fn task_def(id: &str) -> Option<&'static TaskDef> {
    REGISTRY.iter().find(|d| d.id == id)
}

pub fn oracle_def(oracle_id: &str) -> Result<&'static TaskDef, CatalogError> {
    REGISTRY
        .iter()
        .find(|d| d.oracle_id == oracle_id)
        .ok_or_else(|| CatalogError::UnknownOracle(oracle_id.to_string()))
}

/// Runs the registered ground-truth function after checking the input
/// against its declared domain.
pub fn oracle_eval(oracle_id: &str, input: &Value) -> Result<Value, CatalogError> {
    let def = oracle_def(oracle_id)?;
    def.label(input)
}

impl TaskDef {
    pub fn label(&self, input: &Value) -> Result<Value, CatalogError> {
        let violation = |detail: String| CatalogError::DomainViolation {
            oracle: self.oracle_id.to_string(),
            detail,
        };
        self.domain.validate(input).map_err(violation)?;
        let out = (self.oracle)(input).map_err(violation)?;
        debug_assert!(out.is_finite());
        Ok(out)
    }
}

/// The generated benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    pub tasks: Vec<Task>,
}

impl Catalog {
    pub fn task(&self, id: &str) -> Option<&Task> {
        self.tasks.iter().find(|t| t.id == id)
    }
}

/// Builds every registered task; tasks are generated in parallel.
pub fn build_catalog() -> Result<Catalog, CatalogError> {
    use rayon::prelude::*;
    let tasks = REGISTRY.par_iter().map(build_split).collect::<Result<Vec<_>, _>>()?;
    Ok(Catalog { tasks })
}
