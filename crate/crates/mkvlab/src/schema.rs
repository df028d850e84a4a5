//! JSON Schema of experiment configs, printed by `--emit-schema`.
//!
//! Parsing does not go through this document; it mirrors the serde types in
//! [`crate::config`], which are what actually validate a config.

use serde_json::{json, Value};

use crate::config::{Kind, SCHEMA_VERSION};

fn num() -> Value {
    json!({"type": "number"})
}

fn pos() -> Value {
    json!({"type": "number", "exclusiveMinimum": 0})
}

fn defs() -> Value {
    json!({
        "ckls_params": {
            "type": "object",
            "additionalProperties": false,
            "required": ["alpha", "delta", "gamma", "theta"],
            "properties": {
                "alpha": {"type": "number", "minimum": 0},
                "delta": num(),
                "gamma": {"type": "number", "minimum": 0},
                "theta": {"type": "number", "minimum": 0.5, "exclusiveMaximum": 1}
            }
        },
        "measure_functional": {
            "type": "object",
            "required": ["kind"],
            "oneOf": [
                {"additionalProperties": false, "required": ["c"],
                 "properties": {"kind": {"const": "constant"}, "c": num()}},
                {"additionalProperties": false, "required": ["a", "c"],
                 "properties": {"kind": {"const": "affine_in_mean"}, "a": num(), "c": num()}},
                {"additionalProperties": false, "required": ["a", "c"],
                 "properties": {"kind": {"const": "affine_in_std"}, "a": num(), "c": num()}}
            ]
        },
        "vasicek_params": {
            "type": "object",
            "additionalProperties": false,
            "required": ["gamma_drift", "beta", "b_fn", "sigma_fn", "lip_b", "lip_sigma", "k_bound"],
            "properties": {
                "gamma_drift": num(),
                "beta": num(),
                "b_fn": {"$ref": "#/$defs/measure_functional"},
                "sigma_fn": {"$ref": "#/$defs/measure_functional"},
                "lip_b": {"type": "number", "minimum": 0},
                "lip_sigma": {"type": "number", "minimum": 0},
                "k_bound": {"type": "number", "minimum": 1}
            }
        },
        "gaussian": {
            "type": "object",
            "additionalProperties": false,
            "required": ["mean", "variance"],
            "properties": {"mean": num(), "variance": {"type": "number", "minimum": 0}}
        },
        "init": {
            "description": "Initial law. `csv` paths resolve against the config's directory.",
            "type": "object",
            "minProperties": 1,
            "maxProperties": 1,
            "additionalProperties": false,
            "properties": {
                "dirac": num(),
                "samples": {"type": "array", "items": num(), "minItems": 1},
                "csv": {"type": "string"},
                "gaussian": {"$ref": "#/$defs/gaussian"}
            }
        },
        "test_function": {
            "type": "object",
            "additionalProperties": false,
            "required": ["family", "c"],
            "properties": {
                "family": {"enum": ["exp_sin", "exp_tanh", "constant"]},
                "c": num()
            }
        },
        "sim": {
            "type": "object",
            "additionalProperties": false,
            "required": ["n_particles", "dt"],
            "properties": {
                "n_particles": {"type": "integer", "minimum": 1},
                "dt": pos(),
                "horizon": pos(),
                "snapshot_times": {"type": "array", "items": {"type": "number", "minimum": 0}},
                "snapshot_every": pos(),
                "scheme": {"enum": ["abs_euler", "abs_euler_projected"], "default": "abs_euler_projected"},
                "mean_field_mode": {"enum": ["empirical", "exact_mean"], "default": "exact_mean"},
                "deterministic_mode": {"type": "boolean", "default": false}
            }
        },
        "series": {"enum": ["summary", "particles"], "default": "summary"}
    })
}

fn kind_body(kind: Kind) -> (Value, Vec<&'static str>) {
    let r = |s: &str| json!({"$ref": format!("#/$defs/{s}")});
    match kind {
        Kind::SimulateCkls => (
            json!({"params": r("ckls_params"), "init": r("init"), "sim": r("sim"), "series": r("series")}),
            vec!["params", "init", "sim"],
        ),
        Kind::SimulateVasicek => (
            json!({"params": r("vasicek_params"), "init": r("init"), "sim": r("sim"),
                   "flow_dt": pos(), "series": r("series")}),
            vec!["params", "init", "sim"],
        ),
        Kind::VerifyHarnackCkls => (
            json!({
                "params": r("ckls_params"),
                "mu0": r("init"),
                "nu0": r("init"),
                "horizons": {"type": "array", "items": pos(), "minItems": 1},
                "test_functions": {"type": "array", "items": r("test_function"), "minItems": 1},
                "sim": r("sim")
            }),
            vec!["params", "mu0", "nu0", "horizons", "test_functions", "sim"],
        ),
        Kind::VerifyHarnackVasicek => (
            json!({
                "params": r("vasicek_params"),
                "cases": {"type": "array", "minItems": 1, "items": {
                    "type": "object",
                    "additionalProperties": false,
                    "required": ["mu0", "nu0", "t", "f"],
                    "properties": {
                        "params": r("vasicek_params"),
                        "mu0": r("init"),
                        "nu0": r("init"),
                        "t": {"type": "number", "minimum": 0},
                        "f": r("test_function")
                    }
                }},
                "flow_dt": {"type": "number", "exclusiveMinimum": 0, "default": 1e-3},
                "quad_nodes": {"type": "integer", "minimum": 1, "default": 96}
            }),
            vec!["params", "cases"],
        ),
        Kind::VerifyW1Contraction => (
            json!({"params": r("ckls_params"), "init_a": r("init"), "init_b": r("init"), "sim": r("sim")}),
            vec!["params", "init_a", "init_b", "sim"],
        ),
        Kind::VerifyW2EntropyContraction => (
            json!({
                "params": r("vasicek_params"),
                "init_a": r("init"),
                "init_b": r("init"),
                "horizon": pos(),
                "dt": {"type": "number", "exclusiveMinimum": 0, "default": 1e-3},
                "tail_start": {"type": "number", "minimum": 0, "exclusiveMaximum": 1, "default": 0.5}
            }),
            vec!["params", "init_a", "init_b", "horizon"],
        ),
        Kind::VerifyInverseMoment => (
            json!({
                "params": r("ckls_params"),
                "x0": pos(),
                "sim": r("sim"),
                "zeta_l2": {"type": "number", "minimum": 0},
                "floor": {"type": "number", "exclusiveMinimum": 0, "default": 1e-8},
                "confidence": {"type": "number", "exclusiveMinimum": 0.5, "exclusiveMaximum": 1, "default": 0.99},
                "max_floored_fraction": {"type": "number", "default": 1e-3}
            }),
            vec!["params", "x0", "sim"],
        ),
        Kind::VerifyYw => (
            json!({
                "epsilons": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                             "default": [0.5, 0.1, 0.01]},
                "points": {"type": "integer", "minimum": 2, "default": 1000},
                "tol": {"type": "number", "default": 1e-10}
            }),
            vec![],
        ),
        Kind::VerifyLemmaIne => (
            json!({
                "k_values": {"type": "array", "items": {"type": "number", "minimum": 1},
                             "default": [1.0, 1.5, 2.0, 5.0, 10.0]},
                "points": {"type": "integer", "minimum": 2, "default": 1000}
            }),
            vec![],
        ),
        Kind::StationaryCkls => (
            json!({
                "params": r("ckls_params"),
                "init": r("init"),
                "burn_in": pos(),
                "sample_horizon": pos(),
                "sample_every": pos(),
                "sim": r("sim")
            }),
            vec!["params", "init", "burn_in", "sample_horizon", "sample_every", "sim"],
        ),
    }
}

pub fn schema() -> Value {
    let variants: Vec<Value> = Kind::ALL
        .iter()
        .map(|&k| {
            let (mut props, required) = kind_body(k);
            let obj = props.as_object_mut().expect("object");
            obj.insert("schema_version".into(), json!({"const": SCHEMA_VERSION}));
            obj.insert("kind".into(), json!({"const": k.name()}));
            obj.insert("seed".into(), json!({"type": "integer", "minimum": 0}));
            let mut req = vec!["schema_version"];
            req.extend(required);
            json!({
                "title": k.name(),
                "type": "object",
                "additionalProperties": false,
                "required": req,
                "properties": props
            })
        })
        .collect();
    json!({
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "title": "mkvlab experiment config",
        "description": "`kind` may be omitted when the command names the experiment.",
        "oneOf": variants,
        "$defs": defs()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_kind_is_described() {
        let s = schema();
        let variants = s["oneOf"].as_array().unwrap();
        assert_eq!(variants.len(), Kind::ALL.len());
        for (v, k) in variants.iter().zip(Kind::ALL) {
            assert_eq!(v["properties"]["kind"]["const"], k.name());
            assert_eq!(v["additionalProperties"], false);
        }
    }
}
