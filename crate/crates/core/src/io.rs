//! JSON reading and writing for measures, partitions, simple functions,
//! traces and decomposition reports. Numbers are exact: `"p/q"` strings or
//! JSON integers.

use serde_json::{json, Map, Value};

use crate::decomposition::Decomposition;
use crate::engine::{Checkpoint, RefinementTrace, RoundRecord, SplitRecord, TerminatedBy};
use crate::error::{Error, Result};
use crate::interval_set::IntervalSet;
use crate::measures::{Atoms, Density, MeasureSpec};
use crate::partition::Partition;
use crate::rational::{self, Rational};
use crate::simple_function::SimpleFunction;

fn parse_err(path: &str, reason: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_string(),
        reason: reason.into(),
    }
}

fn invalid(path: &str, reason: impl Into<String>) -> Error {
    Error::InvalidMeasure {
        path: path.to_string(),
        reason: reason.into(),
    }
}

pub fn number(v: &Value, path: &str) -> Result<Rational> {
    match v {
        Value::String(s) => rational::parse(s).map_err(|e| parse_err(path, e)),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                Ok(rational::int(i))
            } else if let Some(u) = n.as_u64() {
                Ok(Rational::from_integer(u.into()))
            } else {
                Err(parse_err(path, "non-integer JSON number; write it as a \"p/q\" string"))
            }
        }
        _ => Err(parse_err(path, "expected a number")),
    }
}

fn array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| parse_err(path, "expected an array"))
}

fn numbers(v: &Value, path: &str) -> Result<Vec<Rational>> {
    array(v, path)?
        .iter()
        .enumerate()
        .map(|(i, x)| number(x, &format!("{path}[{i}]")))
        .collect()
}

fn field<'a>(obj: &'a Map<String, Value>, key: &str, path: &str) -> Result<&'a Value> {
    obj.get(key)
        .ok_or_else(|| parse_err(path, format!("missing field {key:?}")))
}

fn num(q: &Rational) -> Value {
    Value::String(rational::format(q))
}

fn nums(qs: &[Rational]) -> Value {
    Value::Array(qs.iter().map(num).collect())
}

pub fn parse_measure(text: &str) -> Result<MeasureSpec> {
    let v: Value = serde_json::from_str(text).map_err(|e| parse_err("$", e.to_string()))?;
    measure_from_value(&v, "$")
}

pub fn measure_from_value(v: &Value, path: &str) -> Result<MeasureSpec> {
    let obj = v.as_object().ok_or_else(|| {
        parse_err(
            path,
            "expected an object with one of sum, atoms, density, cantor, scale",
        )
    })?;
    if obj.len() != 1 {
        return Err(parse_err(path, "a measure object has exactly one key"));
    }
    let (key, body) = obj.iter().next().expect("one entry");
    let here = format!("{path}.{key}");
    match key.as_str() {
        "sum" => array(body, &here)?
            .iter()
            .enumerate()
            .map(|(i, part)| measure_from_value(part, &format!("{here}[{i}]")))
            .collect::<Result<Vec<_>>>()
            .map(MeasureSpec::Sum),
        "atoms" => {
            let mut pairs = Vec::new();
            for (i, pair) in array(body, &here)?.iter().enumerate() {
                let p = format!("{here}[{i}]");
                let xs = array(pair, &p)?;
                if xs.len() != 2 {
                    return Err(parse_err(&p, "an atom is [location, weight]"));
                }
                pairs.push((number(&xs[0], &format!("{p}[0]"))?, number(&xs[1], &format!("{p}[1]"))?));
            }
            Atoms::new(pairs, &here).map(MeasureSpec::Atoms)
        }
        "density" => {
            let d = body.as_object().ok_or_else(|| parse_err(&here, "expected an object"))?;
            let breakpoints = numbers(field(d, "breakpoints", &here)?, &format!("{here}.breakpoints"))?;
            let cp = format!("{here}.coeffs");
            let coeffs = array(field(d, "coeffs", &here)?, &cp)?
                .iter()
                .enumerate()
                .map(|(i, c)| numbers(c, &format!("{cp}[{i}]")))
                .collect::<Result<Vec<_>>>()?;
            Density::new(breakpoints, coeffs, &here).map(MeasureSpec::Density)
        }
        "cantor" => {
            let w = number(body, &here)?;
            if w < Rational::from_integer(0.into()) {
                return Err(invalid(&here, "negative Cantor weight"));
            }
            Ok(MeasureSpec::Cantor(w))
        }
        "scale" => {
            let xs = array(body, &here)?;
            if xs.len() != 2 {
                return Err(parse_err(&here, "scale is [factor, measure]"));
            }
            let f = number(&xs[0], &format!("{here}[0]"))?;
            if f < Rational::from_integer(0.into()) {
                return Err(invalid(&format!("{here}[0]"), "negative scale factor"));
            }
            let inner = measure_from_value(&xs[1], &format!("{here}[1]"))?;
            Ok(MeasureSpec::Scale(f, Box::new(inner)))
        }
        other => Err(parse_err(path, format!("unknown measure kind {other:?}"))),
    }
}

pub fn measure_to_value(m: &MeasureSpec) -> Value {
    match m {
        MeasureSpec::Atoms(a) => json!({
            "atoms": a.locations().iter().zip(a.weights()).map(|(l, w)| json!([num(l), num(w)])).collect::<Vec<_>>()
        }),
        MeasureSpec::Density(d) => json!({
            "density": {
                "breakpoints": nums(d.breakpoints()),
                "coeffs": d.pieces().iter().map(|p| nums(p.coeffs())).collect::<Vec<_>>(),
            }
        }),
        MeasureSpec::Cantor(w) => json!({ "cantor": num(w) }),
        MeasureSpec::Sum(parts) => json!({ "sum": parts.iter().map(measure_to_value).collect::<Vec<_>>() }),
        MeasureSpec::Scale(f, inner) => json!({ "scale": [num(f), measure_to_value(inner)] }),
    }
}

fn set_to_value(s: &IntervalSet) -> Value {
    Value::Array(s.pieces().iter().map(|(a, b)| json!([num(a), num(b)])).collect())
}

fn set_from_value(v: &Value, path: &str) -> Result<IntervalSet> {
    let mut pieces = Vec::new();
    for (i, p) in array(v, path)?.iter().enumerate() {
        let here = format!("{path}[{i}]");
        let ends = numbers(p, &here)?;
        if ends.len() != 2 {
            return Err(parse_err(&here, "an interval is [lo, hi]"));
        }
        let [lo, hi]: [Rational; 2] = ends.try_into().expect("two ends");
        pieces.push((lo, hi));
    }
    IntervalSet::new(pieces).map_err(|e| parse_err(path, e.to_string()))
}

/// List of cells, each a list of `[lo, hi]` pieces.
pub fn partition_to_value(p: &Partition) -> Value {
    Value::Array(p.cells().iter().map(set_to_value).collect())
}

pub fn partition_from_value(v: &Value, path: &str) -> Result<Partition> {
    let cells = array(v, path)?
        .iter()
        .enumerate()
        .map(|(i, c)| set_from_value(c, &format!("{path}[{i}]")))
        .collect::<Result<Vec<_>>>()?;
    Partition::new(cells).map_err(|e| parse_err(path, e.to_string()))
}

pub fn simple_function_to_value(f: &SimpleFunction) -> Value {
    json!({ "cells": partition_to_value(f.partition()), "values": nums(f.values()) })
}

pub fn simple_function_from_value(v: &Value, path: &str) -> Result<SimpleFunction> {
    let obj = v.as_object().ok_or_else(|| parse_err(path, "expected an object"))?;
    let p = partition_from_value(field(obj, "cells", path)?, &format!("{path}.cells"))?;
    let values = numbers(field(obj, "values", path)?, &format!("{path}.values"))?;
    SimpleFunction::new(p, values).map_err(|e| parse_err(path, e.to_string()))
}

fn opt_num(q: &Option<Rational>) -> Value {
    q.as_ref().map(num).unwrap_or(Value::Null)
}

pub fn trace_to_value(t: &RefinementTrace) -> Value {
    json!({
        "terminated_by": t.terminated_by.map(|x| x.as_str()),
        "rounds": t.rounds.iter().map(|r| json!({
            "round": r.round,
            "cells": r.cells,
            "a_n": r.a_n,
            "l1_increment": num(&r.l1_increment),
            "seconds": r.seconds,
        })).collect::<Vec<_>>(),
        "splits": t.splits.iter().map(|s| json!({
            "round": s.round,
            "cell": s.cell,
            "point": num(&s.point),
            "gain": s.gain,
            "h_parent": num(&s.h_parent),
            "h_left": opt_num(&s.h_left),
            "h_right": opt_num(&s.h_right),
            "applied": s.applied,
        })).collect::<Vec<_>>(),
        "checkpoints": t.checkpoints.iter().map(|c| json!({
            "round": c.round,
            "f_gamma": simple_function_to_value(&c.f_gamma),
        })).collect::<Vec<_>>(),
    })
}

fn uint(obj: &Map<String, Value>, key: &str, path: &str) -> Result<usize> {
    field(obj, key, path)?
        .as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| parse_err(&format!("{path}.{key}"), "expected a nonnegative integer"))
}

fn float(obj: &Map<String, Value>, key: &str, path: &str) -> Result<f64> {
    field(obj, key, path)?
        .as_f64()
        .ok_or_else(|| parse_err(&format!("{path}.{key}"), "expected a number"))
}

fn exact(obj: &Map<String, Value>, key: &str, path: &str) -> Result<Rational> {
    number(field(obj, key, path)?, &format!("{path}.{key}"))
}

fn opt_exact(obj: &Map<String, Value>, key: &str, path: &str) -> Result<Option<Rational>> {
    match obj.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => number(v, &format!("{path}.{key}")).map(Some),
    }
}

fn objects<'a>(v: &'a Value, key: &str) -> Result<Vec<(String, &'a Map<String, Value>)>> {
    let root = v.as_object().ok_or_else(|| parse_err("$", "expected an object"))?;
    let base = format!("$.{key}");
    array(field(root, key, "$")?, &base)?
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let p = format!("{base}[{i}]");
            x.as_object()
                .map(|o| (p.clone(), o))
                .ok_or_else(|| parse_err(&p, "expected an object"))
        })
        .collect()
}

pub fn trace_from_value(v: &Value) -> Result<RefinementTrace> {
    let root = v.as_object().ok_or_else(|| parse_err("$", "expected an object"))?;
    let terminated_by = match root.get("terminated_by") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => {
            Some(TerminatedBy::parse(s).ok_or_else(|| parse_err("$.terminated_by", format!("unknown value {s:?}")))?)
        }
        Some(_) => return Err(parse_err("$.terminated_by", "expected a string")),
    };
    let rounds = objects(v, "rounds")?
        .into_iter()
        .map(|(p, o)| {
            Ok(RoundRecord {
                round: uint(o, "round", &p)?,
                cells: uint(o, "cells", &p)?,
                a_n: float(o, "a_n", &p)?,
                l1_increment: exact(o, "l1_increment", &p)?,
                seconds: float(o, "seconds", &p)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let splits = objects(v, "splits")?
        .into_iter()
        .map(|(p, o)| {
            Ok(SplitRecord {
                round: uint(o, "round", &p)?,
                cell: uint(o, "cell", &p)?,
                point: exact(o, "point", &p)?,
                gain: float(o, "gain", &p)?,
                h_parent: exact(o, "h_parent", &p)?,
                h_left: opt_exact(o, "h_left", &p)?,
                h_right: opt_exact(o, "h_right", &p)?,
                applied: field(o, "applied", &p)?
                    .as_bool()
                    .ok_or_else(|| parse_err(&format!("{p}.applied"), "expected a boolean"))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let checkpoints = objects(v, "checkpoints")?
        .into_iter()
        .map(|(p, o)| {
            Ok(Checkpoint {
                round: uint(o, "round", &p)?,
                f_gamma: simple_function_from_value(field(o, "f_gamma", &p)?, &format!("{p}.f_gamma"))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RefinementTrace {
        rounds,
        splits,
        checkpoints,
        terminated_by,
    })
}

pub fn decomposition_to_value(d: &Decomposition, trace_ref: Option<&str>) -> Value {
    json!({
        "density": simple_function_to_value(&d.density),
        "singular_mass": num(&d.singular_mass),
        "singular_mass_f64": rational::to_f64(&d.singular_mass),
        "singular_cells": set_to_value(&d.singular_cells),
        "residual": num(&d.residual),
        "g": d.g.iter().map(|x| Value::String(x.to_string())).collect::<Vec<_>>(),
        "trace": trace_ref,
    })
}
