//! The versioned JSON document format: named piecewise functions shared
//! across process definitions, plus bindings, pools, edges, and gates.
//! Loading validates the schema and the model constraints before handing a
//! `Workflow` to the engine; every violation is reported, not just the first.

use bottlemod::model::{DataRequirement, OutputSpec, Process, ResourceRequirement};
use bottlemod::piecewise::{ExtensionMode, PiecewiseFn, Poly};
use bottlemod::tol;
use bottlemod::workflow::{
    DataEdge, Pool, PoolFraction, ProcessSpec, ResourceBinding, Workflow,
};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const SUPPORTED_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Document {
    pub version: u32,
    #[serde(default)]
    pub functions: BTreeMap<String, FunctionDef>,
    pub processes: Vec<ProcessDef>,
    #[serde(default)]
    pub pools: Vec<PoolDef>,
    /// process -> slot -> binding
    #[serde(default)]
    pub bindings: BTreeMap<String, BTreeMap<String, BindingDef>>,
    #[serde(default)]
    pub edges: Vec<EdgeDef>,
    #[serde(default)]
    pub gates: Vec<GateDef>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionDef {
    pub breakpoints: Vec<f64>,
    /// Per piece, coefficients of the local polynomial in (x - b_i),
    /// lowest degree first.
    pub pieces: Vec<Vec<f64>>,
    pub extension: ExtensionDef,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtensionDef {
    Hold,
    Continue,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessDef {
    pub name: String,
    pub target_progress: f64,
    #[serde(default)]
    pub data_requirements: Vec<SlotDef>,
    #[serde(default)]
    pub resource_requirements: Vec<SlotDef>,
    #[serde(default)]
    pub outputs: Vec<SlotDef>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlotDef {
    pub name: String,
    #[serde(rename = "fn")]
    pub fn_: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolDef {
    pub name: String,
    pub capacity_fn: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BindingDef {
    Direct {
        #[serde(rename = "fn")]
        fn_: String,
    },
    Pool {
        pool: String,
        fraction: FractionDef,
        #[serde(default)]
        release_to: Option<String>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FractionDef {
    Fixed(f64),
    Keyword(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeDef {
    pub from: String,
    pub output: String,
    pub to: String,
    pub slot: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateDef {
    pub process: String,
    pub after: Vec<String>,
}

pub fn parse(text: &str) -> Result<Document, String> {
    serde_json::from_str(text).map_err(|e| format!("invalid document: {e}"))
}

pub fn load(path: &std::path::Path) -> Result<Document, Vec<String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| vec![format!("cannot read {}: {e}", path.display())])?;
    parse(&text).map_err(|e| vec![e])
}

fn build_fn(def: &FunctionDef) -> Result<PiecewiseFn, String> {
    let pieces: Vec<Poly> = def.pieces.iter().map(|c| Poly::new(c.clone())).collect();
    let ext = match def.extension {
        ExtensionDef::Hold => ExtensionMode::Hold,
        ExtensionDef::Continue => ExtensionMode::Continue,
    };
    PiecewiseFn::new(def.breakpoints.clone(), pieces, ext).map_err(|e| e.to_string())
}

/// Resolved functions plus every violation found. Resolution is
/// best-effort so that a single bad function yields one violation rather
/// than a cascade.
struct Resolver {
    fns: BTreeMap<String, PiecewiseFn>,
    violations: Vec<String>,
}

impl Resolver {
    fn new(doc: &Document) -> Self {
        let mut fns = BTreeMap::new();
        let mut violations = Vec::new();
        for (name, def) in &doc.functions {
            match build_fn(def) {
                Ok(f) => {
                    fns.insert(name.clone(), f);
                }
                Err(e) => violations.push(format!("function `{name}`: {e}")),
            }
        }
        Resolver { fns, violations }
    }

    fn get(&mut self, name: &str, at: &str) -> Option<PiecewiseFn> {
        match self.fns.get(name) {
            Some(f) => Some(f.clone()),
            None => {
                self.violations
                    .push(format!("{at}: unresolved function name `{name}`"));
                None
            }
        }
    }
}

/// Validate the document and convert it to an engine workflow. On any
/// violation the full list is returned instead.
pub fn to_workflow(doc: &Document) -> Result<Workflow, Vec<String>> {
    let mut r = Resolver::new(doc);
    if doc.version != SUPPORTED_VERSION {
        r.violations.push(format!(
            "unsupported document version {} (expected {SUPPORTED_VERSION})",
            doc.version
        ));
    }

    let mut seen = std::collections::BTreeSet::new();
    for p in &doc.processes {
        if !seen.insert(p.name.as_str()) {
            r.violations.push(format!("duplicate process name `{}`", p.name));
        }
    }
    let find_proc = |name: &str| doc.processes.iter().find(|p| p.name == name);

    // structural references: bindings, edges, gates
    for (proc, slots) in &doc.bindings {
        let Some(pd) = find_proc(proc) else {
            r.violations.push(format!("bindings reference unknown process `{proc}`"));
            continue;
        };
        for slot in slots.keys() {
            let known = pd.data_requirements.iter().any(|s| &s.name == slot)
                || pd.resource_requirements.iter().any(|s| &s.name == slot);
            if !known {
                r.violations
                    .push(format!("binding for unknown slot `{proc}.{slot}`"));
            }
        }
    }
    for e in &doc.edges {
        match find_proc(&e.from) {
            None => r
                .violations
                .push(format!("edge from unknown process `{}`", e.from)),
            Some(pd) if !pd.outputs.iter().any(|o| o.name == e.output) => r
                .violations
                .push(format!("edge from unknown output `{}.{}`", e.from, e.output)),
            _ => {}
        }
        match find_proc(&e.to) {
            None => r.violations.push(format!("edge to unknown process `{}`", e.to)),
            Some(pd) if !pd.data_requirements.iter().any(|s| s.name == e.slot) => r
                .violations
                .push(format!("edge to unknown data slot `{}.{}`", e.to, e.slot)),
            _ => {}
        }
    }
    for g in &doc.gates {
        for name in g.after.iter().chain(std::iter::once(&g.process)) {
            if find_proc(name).is_none() {
                r.violations.push(format!("gate references unknown process `{name}`"));
            }
        }
    }

    // pools and fractions
    let mut pools = Vec::new();
    for pd in &doc.pools {
        if let Some(cap) = r.get(&pd.capacity_fn, &format!("pool `{}`", pd.name)) {
            pools.push(Pool { name: pd.name.clone(), capacity: cap });
        }
    }
    let mut pool_fixed: BTreeMap<&str, f64> = BTreeMap::new();
    let empty = BTreeMap::new();

    let mut specs = Vec::new();
    for pd in &doc.processes {
        let pname = &pd.name;
        if !(pd.target_progress > 0.0) {
            r.violations.push(format!(
                "process `{pname}`: target_progress must be positive (got {})",
                pd.target_progress
            ));
        }

        let mut data_requirements = Vec::new();
        for s in &pd.data_requirements {
            let at = format!("data requirement `{pname}.{}`", s.name);
            let Some(f) = r.get(&s.fn_, &at) else { continue };
            if f.verify_non_decreasing().is_err() {
                r.violations.push(format!("{at}: function `{}` must be non-decreasing", s.fn_));
            }
            data_requirements.push(DataRequirement { name: s.name.clone(), fn_: f });
        }
        let mut resource_requirements = Vec::new();
        for s in &pd.resource_requirements {
            let at = format!("resource requirement `{pname}.{}`", s.name);
            let Some(f) = r.get(&s.fn_, &at) else { continue };
            if f.verify_non_decreasing().is_err() {
                r.violations.push(format!("{at}: function `{}` must be non-decreasing", s.fn_));
            }
            let ctol = tol::eps_abs(f.coeff_scale());
            if f.pieces().iter().any(|p| p.degree(ctol) > 1) {
                r.violations.push(format!(
                    "{at}: function `{}` must be piecewise-linear (resource \
                     requirements above degree 1 are not solvable)",
                    s.fn_
                ));
            }
            resource_requirements.push(ResourceRequirement { name: s.name.clone(), fn_: f });
        }
        let mut outputs = Vec::new();
        for s in &pd.outputs {
            let at = format!("output `{pname}.{}`", s.name);
            let Some(f) = r.get(&s.fn_, &at) else { continue };
            if f.verify_non_decreasing().is_err() {
                r.violations.push(format!("{at}: function `{}` must be non-decreasing", s.fn_));
            }
            outputs.push(OutputSpec { name: s.name.clone(), fn_: f });
        }

        let bindings = doc.bindings.get(pname).unwrap_or(&empty);

        // data slots: explicit function, or exactly one incoming edge
        let mut data_bindings = Vec::new();
        for s in &pd.data_requirements {
            let fed_by_edges = doc
                .edges
                .iter()
                .filter(|e| e.to == *pname && e.slot == s.name)
                .count();
            let bound = bindings.get(&s.name);
            match (bound, fed_by_edges) {
                (Some(BindingDef::Direct { fn_ }), 0) => {
                    let at = format!("data input `{pname}.{}`", s.name);
                    if let Some(f) = r.get(fn_, &at) {
                        if f.verify_non_decreasing().is_err() {
                            r.violations
                                .push(format!("{at}: function `{fn_}` must be non-decreasing"));
                        }
                        data_bindings.push(Some(f));
                    } else {
                        data_bindings.push(None);
                    }
                }
                (Some(BindingDef::Pool { .. }), _) => {
                    r.violations.push(format!(
                        "data slot `{pname}.{}` cannot be bound to a pool",
                        s.name
                    ));
                    data_bindings.push(None);
                }
                (Some(_), _) => {
                    r.violations.push(format!(
                        "data slot `{pname}.{}` is bound and edge-fed at once",
                        s.name
                    ));
                    data_bindings.push(None);
                }
                (None, 1) => data_bindings.push(None),
                (None, 0) => {
                    r.violations
                        .push(format!("data slot `{pname}.{}` has no input", s.name));
                    data_bindings.push(None);
                }
                (None, _) => {
                    r.violations
                        .push(format!("data slot `{pname}.{}` is fed by multiple edges", s.name));
                    data_bindings.push(None);
                }
            }
        }

        // resource slots: direct function or pool share
        let mut resource_bindings = Vec::new();
        for s in &pd.resource_requirements {
            match bindings.get(&s.name) {
                Some(BindingDef::Direct { fn_ }) => {
                    let at = format!("resource input `{pname}.{}`", s.name);
                    if let Some(f) = r.get(fn_, &at) {
                        resource_bindings.push(ResourceBinding::Direct(f));
                    }
                }
                Some(BindingDef::Pool { pool, fraction, release_to }) => {
                    if !doc.pools.iter().any(|p| &p.name == pool) {
                        r.violations.push(format!(
                            "binding `{pname}.{}` references unknown pool `{pool}`",
                            s.name
                        ));
                        continue;
                    }
                    let frac = match fraction {
                        FractionDef::Fixed(f) => {
                            if !(0.0..=1.0).contains(f) {
                                r.violations.push(format!(
                                    "binding `{pname}.{}`: fraction {f} outside [0, 1]",
                                    s.name
                                ));
                            }
                            *pool_fixed.entry(pool.as_str()).or_default() += f;
                            PoolFraction::Fixed(*f)
                        }
                        FractionDef::Keyword(k) if k == "rest" => PoolFraction::Rest,
                        FractionDef::Keyword(k) => {
                            r.violations.push(format!(
                                "binding `{pname}.{}`: fraction must be a number or \"rest\" \
                                 (got \"{k}\")",
                                s.name
                            ));
                            continue;
                        }
                    };
                    if let Some(to) = release_to {
                        if find_proc(to).is_none() {
                            r.violations.push(format!(
                                "binding `{pname}.{}` releases to unknown process `{to}`",
                                s.name
                            ));
                        }
                    }
                    resource_bindings.push(ResourceBinding::Pool {
                        pool: pool.clone(),
                        fraction: frac,
                        release_to: release_to.clone(),
                    });
                }
                None => {
                    r.violations
                        .push(format!("resource slot `{pname}.{}` has no binding", s.name));
                }
            }
        }

        specs.push(ProcessSpec {
            process: Process {
                name: pname.clone(),
                data_requirements,
                resource_requirements,
                outputs,
                target_progress: pd.target_progress,
            },
            data_bindings,
            resource_bindings,
        });
    }

    for (pool, sum) in pool_fixed {
        if sum > 1.0 + 1e-12 {
            r.violations
                .push(format!("pool `{pool}`: fixed fractions sum to {sum}, exceeding 1"));
        }
    }

    if !r.violations.is_empty() {
        return Err(r.violations);
    }
    Ok(Workflow {
        processes: specs,
        pools,
        edges: doc
            .edges
            .iter()
            .map(|e| DataEdge {
                from: e.from.clone(),
                output: e.output.clone(),
                to: e.to.clone(),
                slot: e.slot.clone(),
            })
            .collect(),
        gates: doc
            .gates
            .iter()
            .map(|g| (g.process.clone(), g.after.clone()))
            .collect(),
    })
}

/// Serialize with stable key order and shortest round-trip numbers.
pub fn to_json(doc: &Document) -> String {
    serde_json::to_string_pretty(doc).expect("document serialization cannot fail")
}
