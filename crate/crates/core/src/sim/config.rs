//! Scenario definition and the `key = value` scenario file format.
//!
//! ```text
//! horizon_s = 120
//! beacon_interval_s = 0.1
//!
//! [node head]
//! [node gateway]
//! ratio = 1.0001
//! offset_s = 1.0
//! [node sensor]
//! ratio = 1.0002
//! offset_s = 0.9
//!
//! [link head gateway]
//! distance_m = 100
//! [link gateway sensor]
//! distance_m = 200
//! ```
//!
//! Nodes are listed head first and sensor last; the listing order is the
//! chain. Every adjacent pair needs exactly one `[link]` block (either
//! orientation).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::MAX_RATIO_DEVIATION;

pub const SPEED_OF_LIGHT_MPS: f64 = 2.998e8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("invalid scenario:\n  - {}", .0.join("\n  - "))]
    Invalid(Vec<String>),
}

impl ConfigError {
    pub fn violations(&self) -> Vec<String> {
        match self {
            ConfigError::Syntax { line, message } => vec![format!("line {line}: {message}")],
            ConfigError::Invalid(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "param_s", rename_all = "lowercase")]
pub enum NoiseModel {
    None,
    /// Zero-mean normal with this standard deviation, truncated at zero by
    /// redrawing negative samples.
    Gaussian(f64),
    /// Exponential with this mean.
    Exponential(f64),
}

impl NoiseModel {
    pub fn param(&self) -> f64 {
        match *self {
            NoiseModel::None => 0.0,
            NoiseModel::Gaussian(p) | NoiseModel::Exponential(p) => p,
        }
    }

    fn with_param(self, p: f64) -> Self {
        match self {
            NoiseModel::None => NoiseModel::None,
            NoiseModel::Gaussian(_) => NoiseModel::Gaussian(p),
            NoiseModel::Exponential(_) => NoiseModel::Exponential(p),
        }
    }
}

impl fmt::Display for NoiseModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseModel::None => write!(f, "none"),
            NoiseModel::Gaussian(s) => write!(f, "gaussian({s})"),
            NoiseModel::Exponential(m) => write!(f, "exponential({m})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixedDelay {
    DistanceM(f64),
    Seconds(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkSpec {
    /// Upstream end (closer to the head).
    pub upstream: String,
    pub downstream: String,
    pub fixed: FixedDelay,
    pub noise: NoiseModel,
    pub prop_speed_mps: f64,
}

impl LinkSpec {
    pub fn fixed_delay_s(&self) -> f64 {
        match self.fixed {
            FixedDelay::DistanceM(d) => d / self.prop_speed_mps,
            FixedDelay::Seconds(s) => s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub name: String,
    pub ratio: f64,
    pub offset_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub horizon_s: f64,
    pub beacon_interval_s: f64,
    pub n_measurements: usize,
    pub seed: u64,
    pub processing_delay_a_s: f64,
    /// Head first, sensor last.
    pub nodes: Vec<NodeSpec>,
    /// `links[i]` joins `nodes[i]` and `nodes[i + 1]`.
    pub links: Vec<LinkSpec>,
}

impl Default for ScenarioConfig {
    /// The two-hop reference experiment: sensor 200 m from the gateway, gateway
    /// 100 m from the head, +200 ppm / 0.9 s and +100 ppm / 1 s clocks,
    /// 100 ms beacons, 100 measurements in 120 s, no delay noise.
    fn default() -> Self {
        let node = |name: &str, ratio: f64, offset_s: f64| NodeSpec {
            name: name.into(),
            ratio,
            offset_s,
        };
        let link = |up: &str, down: &str, m: f64| LinkSpec {
            upstream: up.into(),
            downstream: down.into(),
            fixed: FixedDelay::DistanceM(m),
            noise: NoiseModel::None,
            prop_speed_mps: SPEED_OF_LIGHT_MPS,
        };
        ScenarioConfig {
            horizon_s: 120.0,
            beacon_interval_s: 0.1,
            n_measurements: 100,
            seed: 3,
            processing_delay_a_s: 0.0,
            nodes: vec![
                node("head", 1.0, 0.0),
                node("gateway", 1.0001, 1.0),
                node("sensor", 1.0002, 0.9),
            ],
            links: vec![
                link("head", "gateway", 100.0),
                link("gateway", "sensor", 200.0),
            ],
        }
    }
}

impl ScenarioConfig {
    /// Number of hops between sensor and head.
    pub fn hops(&self) -> usize {
        self.nodes.len().saturating_sub(1)
    }

    /// Collects every violated constraint.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut v = Vec::new();
        if !(self.horizon_s.is_finite() && self.horizon_s > 0.0) {
            v.push(format!("horizon_s must be > 0, got {}", self.horizon_s));
        }
        if !(self.beacon_interval_s.is_finite() && self.beacon_interval_s > 0.0) {
            v.push(format!(
                "beacon_interval_s must be > 0, got {}",
                self.beacon_interval_s
            ));
        }
        if !(self.processing_delay_a_s.is_finite() && self.processing_delay_a_s >= 0.0) {
            v.push(format!(
                "processing_delay_a_s must be >= 0, got {}",
                self.processing_delay_a_s
            ));
        }
        if self.nodes.len() < 2 {
            v.push(format!(
                "chain needs at least 2 nodes (head and sensor), got {}",
                self.nodes.len()
            ));
        }
        for (i, n) in self.nodes.iter().enumerate() {
            if self.nodes[..i].iter().any(|m| m.name == n.name) {
                v.push(format!("duplicate node '{}'", n.name));
            }
            if !(n.ratio.is_finite() && n.offset_s.is_finite()) {
                v.push(format!("node '{}': non-finite clock parameter", n.name));
            } else if (n.ratio - 1.0).abs() > MAX_RATIO_DEVIATION {
                v.push(format!(
                    "node '{}': ratio {} outside [0.99, 1.01]",
                    n.name, n.ratio
                ));
            }
        }
        if let Some(head) = self.nodes.first() {
            if head.ratio != 1.0 || head.offset_s != 0.0 {
                v.push(format!(
                    "head node '{}' is the reference clock: ratio must be 1 and offset_s 0",
                    head.name
                ));
            }
        }
        if self.nodes.len() >= 2 && self.links.len() != self.nodes.len() - 1 {
            v.push(format!(
                "{} nodes need {} links, got {}",
                self.nodes.len(),
                self.nodes.len() - 1,
                self.links.len()
            ));
        }
        for (i, l) in self.links.iter().enumerate() {
            let name = format!("link {} {}", l.upstream, l.downstream);
            if let (Some(a), Some(b)) = (self.nodes.get(i), self.nodes.get(i + 1)) {
                if l.upstream != a.name || l.downstream != b.name {
                    v.push(format!(
                        "{name}: expected a link between '{}' and '{}'",
                        a.name, b.name
                    ));
                }
            }
            match l.fixed {
                FixedDelay::DistanceM(d) if !(d.is_finite() && d >= 0.0) => {
                    v.push(format!("{name}: distance_m must be >= 0, got {d}"))
                }
                FixedDelay::Seconds(s) if !(s.is_finite() && s >= 0.0) => {
                    v.push(format!("{name}: fixed_delay_s must be >= 0, got {s}"))
                }
                _ => {}
            }
            if !(l.prop_speed_mps.is_finite() && l.prop_speed_mps > 0.0) {
                v.push(format!(
                    "{name}: prop_speed_mps must be > 0, got {}",
                    l.prop_speed_mps
                ));
            }
            let p = l.noise.param();
            if !(p.is_finite() && p >= 0.0) {
                v.push(format!("{name}: noise_param_s must be >= 0, got {p}"));
            }
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(v))
        }
    }

    /// Applies one top-level `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "horizon_s" => self.horizon_s = parse_num(key, value)?,
            "beacon_interval_s" => self.beacon_interval_s = parse_num(key, value)?,
            "n_measurements" => self.n_measurements = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "processing_delay_a_s" => self.processing_delay_a_s = parse_num(key, value)?,
            _ => return Err(format!("unknown key '{key}'")),
        }
        Ok(())
    }

    /// Parses `k=v` as given to `--set`.
    pub fn apply_override(&mut self, assignment: &str) -> Result<(), String> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| format!("override '{assignment}' is not of the form key=value"))?;
        self.set(k.trim(), v.trim())
    }

    /// Same chain with every gateway removed: the sensor talks to the head
    /// over a single link whose fixed delay is the sum of the original ones.
    /// The sensor-side link's noise model is kept.
    pub fn single_hop(&self) -> ScenarioConfig {
        let mut out = self.clone();
        if self.nodes.len() <= 2 {
            return out;
        }
        let head = self.nodes[0].clone();
        let sensor = self.nodes[self.nodes.len() - 1].clone();
        let total: f64 = self.links.iter().map(LinkSpec::fixed_delay_s).sum();
        let last = &self.links[self.links.len() - 1];
        out.links = vec![LinkSpec {
            upstream: head.name.clone(),
            downstream: sensor.name.clone(),
            fixed: FixedDelay::Seconds(total),
            noise: last.noise,
            prop_speed_mps: last.prop_speed_mps,
        }];
        out.nodes = vec![head, sensor];
        out
    }
}

fn parse_num<N: FromStr>(key: &str, value: &str) -> Result<N, String> {
    value
        .parse()
        .map_err(|_| format!("{key}: cannot parse '{value}'"))
}

#[derive(Default)]
struct RawLink {
    a: String,
    b: String,
    line: usize,
    distance_m: Option<f64>,
    fixed_delay_s: Option<f64>,
    noise: Option<String>,
    noise_param_s: Option<f64>,
    prop_speed_mps: Option<f64>,
}

enum Section {
    Top,
    Node(usize),
    Link(usize),
}

impl FromStr for ScenarioConfig {
    type Err = ConfigError;

    fn from_str(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = ScenarioConfig {
            nodes: Vec::new(),
            links: Vec::new(),
            ..ScenarioConfig::default()
        };
        let mut raw_links: Vec<RawLink> = Vec::new();
        let mut section = Section::Top;
        let syntax = |line: usize, message: String| ConfigError::Syntax { line, message };

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(header) = line.strip_prefix('[') {
                let header = header
                    .strip_suffix(']')
                    .ok_or_else(|| syntax(line_no, format!("unterminated header '{line}'")))?;
                let words: Vec<&str> = header.split_whitespace().collect();
                section = match words.as_slice() {
                    ["node", name] => {
                        cfg.nodes.push(NodeSpec {
                            name: name.to_string(),
                            ratio: 1.0,
                            offset_s: 0.0,
                        });
                        Section::Node(cfg.nodes.len() - 1)
                    }
                    ["link", a, b] => {
                        raw_links.push(RawLink {
                            a: a.to_string(),
                            b: b.to_string(),
                            line: line_no,
                            ..RawLink::default()
                        });
                        Section::Link(raw_links.len() - 1)
                    }
                    _ => {
                        return Err(syntax(
                            line_no,
                            format!("expected [node <name>] or [link <from> <to>], got '{line}'"),
                        ))
                    }
                };
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| syntax(line_no, format!("expected key = value, got '{line}'")))?;
            let (key, value) = (key.trim(), value.trim());
            let num = |v: &str| parse_num::<f64>(key, v).map_err(|m| syntax(line_no, m));
            match section {
                Section::Top => cfg.set(key, value).map_err(|m| syntax(line_no, m))?,
                Section::Node(i) => match key {
                    "ratio" => cfg.nodes[i].ratio = num(value)?,
                    "offset_s" => cfg.nodes[i].offset_s = num(value)?,
                    _ => return Err(syntax(line_no, format!("unknown node key '{key}'"))),
                },
                Section::Link(i) => {
                    let l = &mut raw_links[i];
                    match key {
                        "distance_m" => l.distance_m = Some(num(value)?),
                        "fixed_delay_s" => l.fixed_delay_s = Some(num(value)?),
                        "noise" => l.noise = Some(value.to_string()),
                        "noise_param_s" => l.noise_param_s = Some(num(value)?),
                        "prop_speed_mps" => l.prop_speed_mps = Some(num(value)?),
                        _ => return Err(syntax(line_no, format!("unknown link key '{key}'"))),
                    }
                }
            }
        }

        let mut problems = Vec::new();
        let mut links: Vec<Option<LinkSpec>> = vec![None; cfg.nodes.len().saturating_sub(1)];
        for raw in raw_links {
            let pos = cfg.nodes.windows(2).position(|w| {
                (w[0].name == raw.a && w[1].name == raw.b)
                    || (w[0].name == raw.b && w[1].name == raw.a)
            });
            let Some(pos) = pos else {
                problems.push(format!(
                    "line {}: link {} {} does not join adjacent nodes",
                    raw.line, raw.a, raw.b
                ));
                continue;
            };
            if links[pos].is_some() {
                problems.push(format!(
                    "line {}: duplicate link {} {}",
                    raw.line, raw.a, raw.b
                ));
                continue;
            }
            let fixed = match (raw.distance_m, raw.fixed_delay_s) {
                (Some(d), None) => FixedDelay::DistanceM(d),
                (None, Some(s)) => FixedDelay::Seconds(s),
                (None, None) => {
                    problems.push(format!(
                        "line {}: link needs distance_m or fixed_delay_s",
                        raw.line
                    ));
                    continue;
                }
                (Some(_), Some(_)) => {
                    problems.push(format!(
                        "line {}: distance_m and fixed_delay_s are mutually exclusive",
                        raw.line
                    ));
                    continue;
                }
            };
            let param = raw.noise_param_s.unwrap_or(0.0);
            let noise = match raw.noise.as_deref().unwrap_or("none") {
                "none" => NoiseModel::None,
                "gaussian" => NoiseModel::Gaussian(param),
                "exponential" => NoiseModel::Exponential(param),
                other => {
                    problems.push(format!("line {}: unknown noise model '{other}'", raw.line));
                    continue;
                }
            };
            links[pos] = Some(LinkSpec {
                upstream: cfg.nodes[pos].name.clone(),
                downstream: cfg.nodes[pos + 1].name.clone(),
                fixed,
                noise: noise.with_param(param),
                prop_speed_mps: raw.prop_speed_mps.unwrap_or(SPEED_OF_LIGHT_MPS),
            });
        }
        for (i, l) in links.iter().enumerate() {
            if l.is_none() {
                problems.push(format!(
                    "missing [link {} {}]",
                    cfg.nodes[i].name,
                    cfg.nodes[i + 1].name
                ));
            }
        }
        if !problems.is_empty() {
            return Err(ConfigError::Invalid(problems));
        }
        cfg.links = links.into_iter().flatten().collect();
        cfg.validate()?;
        Ok(cfg)
    }
}
