#![allow(dead_code)]

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use regex::Regex;
use serde_json::Value;

pub fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_lnecert"));
    c.env_remove("LNECERT_WORKERS");
    c
}

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn run(args: &[&str]) -> (i32, Value, Output) {
    let out = bin().args(args).output().expect("binary runs");
    let code = out.status.code().expect("exit code");
    let json = serde_json::from_slice(&out.stdout).unwrap_or(Value::Null);
    (code, json, out)
}

/// Strict validator for the subset of JSON Schema used by the shipped schemas.
/// Unknown keywords are reported rather than ignored.
pub struct Schemas {
    docs: HashMap<String, Value>,
}

const ANNOTATIONS: [&str; 5] = ["$schema", "$id", "title", "description", "$defs"];

impl Schemas {
    pub fn load() -> Self {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas");
        let mut docs = HashMap::new();
        for entry in std::fs::read_dir(&dir).expect("schemas directory") {
            let path = entry.unwrap().path();
            let doc: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
            let id = doc["$id"].as_str().expect("schema has $id").to_string();
            assert_eq!(path.file_name().unwrap().to_str().unwrap(), id);
            docs.insert(id, doc);
        }
        Schemas { docs }
    }

    pub fn ids(&self) -> Vec<&String> {
        self.docs.keys().collect()
    }

    pub fn validate(&self, id: &str, value: &Value) -> Vec<String> {
        let mut errs = Vec::new();
        self.check(id, &self.docs[id], value, "$", &mut errs);
        errs
    }

    fn resolve(&self, doc: &str, reference: &str) -> (String, &Value) {
        let (file, pointer) = reference.split_once('#').unwrap_or((reference, ""));
        let doc = if file.is_empty() { doc.to_string() } else { file.to_string() };
        let root = self.docs.get(&doc).unwrap_or_else(|| panic!("unknown schema {doc}"));
        let target = root.pointer(pointer).unwrap_or_else(|| panic!("bad pointer {reference}"));
        (doc, target)
    }

    fn check(&self, doc: &str, schema: &Value, v: &Value, path: &str, errs: &mut Vec<String>) {
        let Some(map) = schema.as_object() else {
            errs.push(format!("{path}: schema is not an object"));
            return;
        };
        for (key, s) in map {
            match key.as_str() {
                k if ANNOTATIONS.contains(&k) => {}
                "$ref" => {
                    let (d, target) = self.resolve(doc, s.as_str().unwrap());
                    self.check(&d, target, v, path, errs);
                }
                "type" => {
                    let types: Vec<&str> = match s {
                        Value::String(t) => vec![t.as_str()],
                        Value::Array(ts) => ts.iter().map(|t| t.as_str().unwrap()).collect(),
                        _ => panic!("bad type keyword"),
                    };
                    if !types.iter().any(|t| type_matches(t, v)) {
                        errs.push(format!("{path}: expected {types:?}, got {v}"));
                    }
                }
                "const" => {
                    if v != s {
                        errs.push(format!("{path}: expected {s}, got {v}"));
                    }
                }
                "enum" => {
                    if !s.as_array().unwrap().contains(v) {
                        errs.push(format!("{path}: {v} not in {s}"));
                    }
                }
                "minimum" => {
                    if v.as_f64().is_some_and(|x| x < s.as_f64().unwrap()) {
                        errs.push(format!("{path}: {v} below {s}"));
                    }
                }
                "minItems" => {
                    if v.as_array().is_some_and(|a| (a.len() as u64) < s.as_u64().unwrap()) {
                        errs.push(format!("{path}: fewer than {s} items"));
                    }
                }
                "pattern" => {
                    let re = Regex::new(s.as_str().unwrap()).unwrap();
                    if v.as_str().is_some_and(|t| !re.is_match(t)) {
                        errs.push(format!("{path}: {v} does not match {s}"));
                    }
                }
                "properties" => {
                    if let Some(o) = v.as_object() {
                        for (k, sub) in s.as_object().unwrap() {
                            if let Some(x) = o.get(k) {
                                self.check(doc, sub, x, &format!("{path}.{k}"), errs);
                            }
                        }
                    }
                }
                "required" => {
                    if let Some(o) = v.as_object() {
                        for k in s.as_array().unwrap() {
                            if !o.contains_key(k.as_str().unwrap()) {
                                errs.push(format!("{path}: missing {k}"));
                            }
                        }
                    }
                }
                "additionalProperties" => {
                    if let Some(o) = v.as_object() {
                        let known = map.get("properties").and_then(Value::as_object);
                        for (k, x) in o {
                            if known.is_some_and(|p| p.contains_key(k)) {
                                continue;
                            }
                            match s {
                                Value::Bool(false) => errs.push(format!("{path}: unexpected property {k}")),
                                Value::Bool(true) => {}
                                sub => self.check(doc, sub, x, &format!("{path}.{k}"), errs),
                            }
                        }
                    }
                }
                "items" => {
                    if let Some(a) = v.as_array() {
                        for (i, x) in a.iter().enumerate() {
                            self.check(doc, s, x, &format!("{path}[{i}]"), errs);
                        }
                    }
                }
                "allOf" => {
                    for sub in s.as_array().unwrap() {
                        self.check(doc, sub, v, path, errs);
                    }
                }
                "anyOf" | "oneOf" => {
                    let passing = s
                        .as_array()
                        .unwrap()
                        .iter()
                        .filter(|sub| {
                            let mut e = Vec::new();
                            self.check(doc, sub, v, path, &mut e);
                            e.is_empty()
                        })
                        .count();
                    let ok = if key == "oneOf" { passing == 1 } else { passing >= 1 };
                    if !ok {
                        errs.push(format!("{path}: {passing} branches of {key} match"));
                    }
                }
                other => errs.push(format!("{path}: unsupported keyword {other}")),
            }
        }
    }
}

fn type_matches(t: &str, v: &Value) -> bool {
    match t {
        "null" => v.is_null(),
        "boolean" => v.is_boolean(),
        "object" => v.is_object(),
        "array" => v.is_array(),
        "string" => v.is_string(),
        "number" => v.is_number(),
        "integer" => v.is_i64() || v.is_u64(),
        _ => panic!("unknown type {t}"),
    }
}

pub fn assert_valid(schemas: &Schemas, id: &str, value: &Value) {
    let errs = schemas.validate(id, value);
    assert!(errs.is_empty(), "{id}: {errs:#?}");
}
