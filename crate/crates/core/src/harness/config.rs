//! Line-oriented experiment configuration.
//!
//! A config is a flat TOML document: one `key = value` per line, `#`
//! comments allowed. [`ExperimentConfig::to_manifest`] writes the same format
//! back, so a run's manifest can be fed straight to [`parse_config`].

use std::collections::BTreeSet;
use std::fmt;
use std::fmt::Write as _;

use thiserror::Error;

use crate::dsr::SourceSignal;
use crate::topology::DiscSampling;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    LatticeInfo,
    Flocking,
    ContinuumSecondOrder,
    ContinuumDiffusion,
    StabilitySweep,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::LatticeInfo => "lattice-info",
            Self::Flocking => "flocking",
            Self::ContinuumSecondOrder => "continuum-second-order",
            Self::ContinuumDiffusion => "continuum-diffusion",
            Self::StabilitySweep => "stability-sweep",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [
            Self::LatticeInfo,
            Self::Flocking,
            Self::ContinuumSecondOrder,
            Self::ContinuumDiffusion,
            Self::StabilitySweep,
        ]
        .into_iter()
        .find(|k| k.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TopologySpec {
    Lattice {
        rows: usize,
        cols: usize,
        spacing: f64,
    },
    Disc {
        n_agents: usize,
        disc_radius: f64,
        sampling: DiscSampling,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum LeaderSpec {
    Index(usize),
    Cell {
        row: usize,
        col: usize,
    },
    /// Agent nearest to a point.
    Near {
        x: f64,
        y: f64,
    },
}

/// Fully resolved experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: Option<String>,
    pub kind: ExperimentKind,
    pub topology: TopologySpec,
    pub leader: LeaderSpec,
    pub sensing_radius: f64,
    pub ks: f64,
    pub beta: f64,
    pub dt: f64,
    pub noise: f64,
    pub source_initial: f64,
    pub source_final: f64,
    pub switch_step: usize,
    /// Information every agent starts from; defaults to `source_initial`.
    pub initial_value: f64,
    pub speed: Option<f64>,
    pub integrator_dt: Option<f64>,
    pub ks_values: Vec<f64>,
    pub n_steps: usize,
    pub seed: Option<u64>,
    pub csv_stride: usize,
    pub band: f64,
    pub threshold: f64,
    pub near_fraction: f64,
    pub expect_divergence: bool,
    /// Extend the horizon until it covers 1.5x the detected settling time.
    pub confirm_settling: bool,
}

impl ExperimentConfig {
    pub fn source(&self) -> SourceSignal<f64> {
        SourceSignal::step(self.source_initial, self.source_final, self.switch_step)
    }

    pub fn uses_randomness(&self) -> bool {
        self.noise > 0.0 || matches!(self.topology, TopologySpec::Disc { .. })
    }

    /// Config document reproducing this experiment exactly.
    pub fn to_manifest(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        if let Some(n) = &self.name {
            line("name", quote(n));
        }
        line("kind", quote(self.kind.as_str()));
        match &self.topology {
            TopologySpec::Lattice {
                rows,
                cols,
                spacing,
            } => {
                line("topology", quote("lattice"));
                line("rows", rows.to_string());
                line("cols", cols.to_string());
                line("spacing", float(*spacing));
            }
            TopologySpec::Disc {
                n_agents,
                disc_radius,
                sampling,
            } => {
                line("topology", quote("disc"));
                line("n_agents", n_agents.to_string());
                line("disc_radius", float(*disc_radius));
                let s = match sampling {
                    DiscSampling::UniformArea => "uniform-area",
                    DiscSampling::Literal => "literal",
                };
                line("disc_sampling", quote(s));
            }
        }
        match &self.leader {
            LeaderSpec::Index(i) => line("leader", i.to_string()),
            LeaderSpec::Cell { row, col } => {
                line("leader_row", row.to_string());
                line("leader_col", col.to_string());
            }
            LeaderSpec::Near { x, y } => {
                line("leader_near_x", float(*x));
                line("leader_near_y", float(*y));
            }
        }
        line("sensing_radius", float(self.sensing_radius));
        line("ks", float(self.ks));
        line("beta", float(self.beta));
        line("dt", float(self.dt));
        line("noise", float(self.noise));
        line("source_initial", float(self.source_initial));
        line("source_final", float(self.source_final));
        line("switch_step", self.switch_step.to_string());
        line("initial_value", float(self.initial_value));
        if let Some(v) = self.speed {
            line("speed", float(v));
        }
        if let Some(v) = self.integrator_dt {
            line("integrator_dt", float(v));
        }
        if !self.ks_values.is_empty() {
            let list: Vec<String> = self.ks_values.iter().map(|&v| float(v)).collect();
            line("ks_values", format!("[{}]", list.join(", ")));
        }
        line("n_steps", self.n_steps.to_string());
        if let Some(s) = self.seed {
            line("seed", s.to_string());
        }
        line("csv_stride", self.csv_stride.to_string());
        line("band", float(self.band));
        line("threshold", float(self.threshold));
        line("near_fraction", float(self.near_fraction));
        line("expect_divergence", self.expect_divergence.to_string());
        line("confirm_settling", self.confirm_settling.to_string());
        out
    }
}

fn quote(s: &str) -> String {
    format!("\"{s}\"")
}

fn float(v: f64) -> String {
    // shortest round-trip representation, always with a float marker
    let s = format!("{v:?}");
    if s.contains(['.', 'e', 'E', 'i', 'N']) {
        s
    } else {
        format!("{s}.0")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub key: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "`{}`: {}", self.key, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid config: {}", .violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
pub struct ConfigError {
    pub violations: Vec<Violation>,
}

impl ConfigError {
    pub fn mentions(&self, key: &str) -> bool {
        self.violations.iter().any(|v| v.key == key)
    }
}

const KNOWN_KEYS: &[&str] = &[
    "name",
    "kind",
    "topology",
    "rows",
    "cols",
    "spacing",
    "n_agents",
    "disc_radius",
    "disc_sampling",
    "leader",
    "leader_row",
    "leader_col",
    "leader_near_x",
    "leader_near_y",
    "sensing_radius",
    "ks",
    "beta",
    "dt",
    "noise",
    "source_initial",
    "source_final",
    "switch_step",
    "initial_value",
    "speed",
    "integrator_dt",
    "ks_values",
    "n_steps",
    "seed",
    "csv_stride",
    "band",
    "threshold",
    "near_fraction",
    "expect_divergence",
    "confirm_settling",
];

struct Reader {
    table: toml::Table,
    used: BTreeSet<String>,
    violations: Vec<Violation>,
}

impl Reader {
    fn fail(&mut self, key: &str, message: impl Into<String>) {
        self.violations.push(Violation {
            key: key.to_string(),
            message: message.into(),
        });
    }

    fn get(&mut self, key: &str) -> Option<toml::Value> {
        self.used.insert(key.to_string());
        self.table.get(key).cloned()
    }

    fn has(&self, key: &str) -> bool {
        self.table.contains_key(key)
    }

    fn float(&mut self, key: &str) -> Option<f64> {
        match self.get(key)? {
            toml::Value::Float(f) => Some(f),
            toml::Value::Integer(i) => Some(i as f64),
            other => {
                self.fail(key, format!("expected a number, got {}", other.type_str()));
                None
            }
        }
    }

    fn req_float(&mut self, key: &str) -> Option<f64> {
        let v = self.float(key);
        if v.is_none() && !self.has(key) {
            self.fail(key, "missing required key");
        }
        v
    }

    fn uint(&mut self, key: &str) -> Option<u64> {
        match self.get(key)? {
            toml::Value::Integer(i) if i >= 0 => Some(i as u64),
            toml::Value::Integer(_) => {
                self.fail(key, "must be non-negative");
                None
            }
            other => {
                self.fail(
                    key,
                    format!("expected an integer, got {}", other.type_str()),
                );
                None
            }
        }
    }

    fn req_uint(&mut self, key: &str) -> Option<u64> {
        let v = self.uint(key);
        if v.is_none() && !self.has(key) {
            self.fail(key, "missing required key");
        }
        v
    }

    fn string(&mut self, key: &str) -> Option<String> {
        match self.get(key)? {
            toml::Value::String(s) => Some(s),
            other => {
                self.fail(key, format!("expected a string, got {}", other.type_str()));
                None
            }
        }
    }

    fn boolean(&mut self, key: &str) -> Option<bool> {
        match self.get(key)? {
            toml::Value::Boolean(b) => Some(b),
            other => {
                self.fail(
                    key,
                    format!("expected true or false, got {}", other.type_str()),
                );
                None
            }
        }
    }

    fn float_list(&mut self, key: &str) -> Option<Vec<f64>> {
        match self.get(key)? {
            toml::Value::Array(items) => {
                let mut out = Vec::with_capacity(items.len());
                for it in items {
                    match it {
                        toml::Value::Float(f) => out.push(f),
                        toml::Value::Integer(i) => out.push(i as f64),
                        other => {
                            self.fail(
                                key,
                                format!("list entries must be numbers, got {}", other.type_str()),
                            );
                            return None;
                        }
                    }
                }
                Some(out)
            }
            other => {
                self.fail(key, format!("expected a list, got {}", other.type_str()));
                None
            }
        }
    }
}

/// Parses and validates a config document, reporting every violation found.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError {
        violations: vec![Violation {
            key: "<document>".into(),
            message: e.message().to_string(),
        }],
    })?;
    let mut r = Reader {
        table,
        used: BTreeSet::new(),
        violations: Vec::new(),
    };

    let unknown: Vec<String> = r
        .table
        .keys()
        .filter(|k| !KNOWN_KEYS.contains(&k.as_str()))
        .cloned()
        .collect();
    for k in unknown {
        r.fail(&k, "unknown key");
    }

    let name = r.string("name");
    let kind = match r.string("kind") {
        Some(s) => match ExperimentKind::parse(&s) {
            Some(k) => Some(k),
            None => {
                r.fail("kind", format!("unknown experiment kind `{s}`"));
                None
            }
        },
        None => {
            if !r.has("kind") {
                r.fail("kind", "missing required key");
            }
            None
        }
    };

    let topology = match r.string("topology").as_deref() {
        Some("lattice") => {
            let rows = r.req_uint("rows");
            let cols = r.req_uint("cols");
            let spacing = r.float("spacing").unwrap_or(1.0);
            if rows == Some(0) {
                r.fail("rows", "must be at least 1");
            }
            if cols == Some(0) {
                r.fail("cols", "must be at least 1");
            }
            if !(spacing > 0.0 && spacing.is_finite()) {
                r.fail("spacing", "must be positive");
            }
            match (rows, cols) {
                (Some(rows), Some(cols)) => Some(TopologySpec::Lattice {
                    rows: rows as usize,
                    cols: cols as usize,
                    spacing,
                }),
                _ => None,
            }
        }
        Some("disc") => {
            let n = r.req_uint("n_agents");
            let rd = r.req_float("disc_radius");
            if let Some(rd) = rd {
                if !(rd > 0.0 && rd.is_finite()) {
                    r.fail("disc_radius", "must be positive");
                }
            }
            let sampling = match r.string("disc_sampling").as_deref() {
                None | Some("uniform-area") => DiscSampling::UniformArea,
                Some("literal") => DiscSampling::Literal,
                Some(other) => {
                    r.fail(
                        "disc_sampling",
                        format!("expected uniform-area or literal, got `{other}`"),
                    );
                    DiscSampling::UniformArea
                }
            };
            match (n, rd) {
                (Some(n), Some(rd)) => Some(TopologySpec::Disc {
                    n_agents: n as usize,
                    disc_radius: rd,
                    sampling,
                }),
                _ => None,
            }
        }
        Some(other) => {
            r.fail(
                "topology",
                format!("expected lattice or disc, got `{other}`"),
            );
            None
        }
        None => {
            if !r.has("topology") {
                r.fail("topology", "missing required key");
            }
            None
        }
    };

    let leader = if r.has("leader") {
        r.uint("leader").map(|i| LeaderSpec::Index(i as usize))
    } else if r.has("leader_row") || r.has("leader_col") {
        match (r.req_uint("leader_row"), r.req_uint("leader_col")) {
            (Some(row), Some(col)) => {
                if let Some(TopologySpec::Lattice { rows, cols, .. }) = &topology {
                    if row as usize >= *rows || col as usize >= *cols {
                        r.fail("leader_row", "leader cell outside the lattice");
                    }
                } else if topology.is_some() {
                    r.fail("leader_row", "leader cells need a lattice topology");
                }
                Some(LeaderSpec::Cell {
                    row: row as usize,
                    col: col as usize,
                })
            }
            _ => None,
        }
    } else if r.has("leader_near_x") || r.has("leader_near_y") {
        match (r.req_float("leader_near_x"), r.req_float("leader_near_y")) {
            (Some(x), Some(y)) => Some(LeaderSpec::Near { x, y }),
            _ => None,
        }
    } else {
        r.fail(
            "leader",
            "missing required key (leader, leader_row/leader_col or leader_near_x/leader_near_y)",
        );
        None
    };
    if let (Some(LeaderSpec::Index(i)), Some(t)) = (&leader, &topology) {
        let n = match t {
            TopologySpec::Lattice { rows, cols, .. } => rows * cols,
            TopologySpec::Disc { n_agents, .. } => *n_agents,
        };
        if *i >= n {
            r.fail("leader", format!("index {i} out of range for {n} agents"));
        }
    }

    let sensing_radius = r.req_float("sensing_radius");
    if let Some(v) = sensing_radius {
        if !(v > 0.0 && v.is_finite()) {
            r.fail("sensing_radius", "must be positive");
        }
    }
    let ks = r.req_float("ks");
    if let Some(v) = ks {
        if !(v >= 0.0 && v.is_finite()) {
            r.fail("ks", "alignment strength must be non-negative");
        }
    }
    let beta = r.float("beta").unwrap_or(0.0);
    if !(beta >= 0.0) {
        r.fail("beta", "DSR gain must be non-negative");
    } else if !(beta < 1.0) {
        r.fail("beta", "DSR gain must be below 1 (beta >= 1 is undamped)");
    }
    if kind == Some(ExperimentKind::ContinuumSecondOrder) && beta == 0.0 {
        r.fail("beta", "second-order model needs beta > 0");
    }
    let dt = r.req_float("dt");
    if let Some(v) = dt {
        if !(v > 0.0 && v.is_finite()) {
            r.fail("dt", "update interval must be positive");
        }
    }
    let noise = r.float("noise").unwrap_or(0.0);
    if !(noise >= 0.0 && noise.is_finite()) {
        r.fail("noise", "noise amplitude must be non-negative");
    }
    let source_initial = r.float("source_initial").unwrap_or(0.0);
    let source_final = r.float("source_final").unwrap_or(1.0);
    let switch_step = r.uint("switch_step").unwrap_or(0) as usize;
    let initial_value = r.float("initial_value").unwrap_or(source_initial);

    let speed = r.float("speed");
    match (kind, speed) {
        (Some(ExperimentKind::Flocking), None) if !r.has("speed") => {
            r.fail("speed", "missing required key")
        }
        (_, Some(v)) if !(v > 0.0 && v.is_finite()) => r.fail("speed", "must be positive"),
        _ => {}
    }
    let integrator_dt = r.float("integrator_dt");
    match (kind, integrator_dt) {
        (Some(ExperimentKind::ContinuumSecondOrder), None) if !r.has("integrator_dt") => {
            r.fail("integrator_dt", "missing required key")
        }
        (_, Some(v)) if !(v > 0.0 && v.is_finite()) => r.fail("integrator_dt", "must be positive"),
        _ => {}
    }
    let ks_values = r.float_list("ks_values").unwrap_or_default();
    if kind == Some(ExperimentKind::StabilitySweep) && ks_values.is_empty() {
        r.fail("ks_values", "stability sweep needs a non-empty list");
    }
    if ks_values.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
        r.fail("ks_values", "entries must be non-negative");
    }

    let n_steps = r.req_uint("n_steps");
    let seed = r.uint("seed");
    let csv_stride = r.uint("csv_stride").unwrap_or(1);
    if csv_stride == 0 {
        r.fail("csv_stride", "must be at least 1");
    }
    let band = r.float("band").unwrap_or(0.02);
    if !(band > 0.0) {
        r.fail("band", "must be positive");
    }
    let threshold = r.float("threshold").unwrap_or(0.1);
    let near_fraction = r.float("near_fraction").unwrap_or(1.0 / 3.0);
    if !(near_fraction > 0.0) {
        r.fail("near_fraction", "must be positive");
    }
    let expect_divergence = r.boolean("expect_divergence").unwrap_or(false);
    let confirm_settling = r.boolean("confirm_settling").unwrap_or(true);

    let random = noise > 0.0 || matches!(topology, Some(TopologySpec::Disc { .. }));
    if random && seed.is_none() && !r.has("seed") {
        r.fail("seed", "required when noise or random placement is used");
    }

    debug_assert!(r.used.iter().all(|k| KNOWN_KEYS.contains(&k.as_str())));

    if !r.violations.is_empty() {
        return Err(ConfigError {
            violations: r.violations,
        });
    }
    Ok(ExperimentConfig {
        name,
        kind: kind.expect("checked"),
        topology: topology.expect("checked"),
        leader: leader.expect("checked"),
        sensing_radius: sensing_radius.expect("checked"),
        ks: ks.expect("checked"),
        beta,
        dt: dt.expect("checked"),
        noise,
        source_initial,
        source_final,
        switch_step,
        initial_value,
        speed,
        integrator_dt,
        ks_values,
        n_steps: n_steps.expect("checked") as usize,
        seed,
        csv_stride: csv_stride as usize,
        band,
        threshold,
        near_fraction,
        expect_divergence,
        confirm_settling,
    })
}
