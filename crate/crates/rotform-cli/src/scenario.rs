//! Key-value scenario files for the circulation simulator.
//!
//! Format: one `key = value` pair per line, `#` comments, lists separated
//! by commas. See `scenarios/` in the repository root for examples.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use rotform::kelvin::FlowName;
use rotform::spectral::RotationSpec;
use rotform::{rat_from_str, Rat};

#[derive(Clone, Debug, PartialEq)]
pub enum ObjectKind {
    Circuit,
    Chain3,
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub object: ObjectKind,
    pub flow: FlowName,
    pub dim: u32,
    pub rates: Vec<Rat>,
    pub orders: Option<Vec<u32>>,
    pub nodes: usize,
    pub dt: f64,
    pub t_end: f64,
    pub center: Vec<f64>,
    pub radius: f64,
    pub plane: (u32, u32),
    pub frame: Option<(Vec<f64>, Vec<f64>)>,
    pub nodes_file: Option<String>,
    pub drift_tol: f64,
    pub sample_every: usize,
    pub chain_m: usize,
    pub chain_radii: (f64, f64, f64),
    /// The canonical text the scenario was parsed from (for hashing).
    pub canonical: String,
}

impl Scenario {
    pub fn spec(&self) -> Result<RotationSpec> {
        let spec = match &self.orders {
            Some(orders) => {
                RotationSpec::canonical_values_with_orders(self.dim, &self.rates, orders)
            }
            None => RotationSpec::canonical_values(self.dim, &self.rates),
        };
        spec.map_err(|e| anyhow!("invalid rotation layout: {e}"))
    }
}

fn parse_f64_list(v: &str) -> Result<Vec<f64>> {
    v.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| anyhow!("bad number '{x}': {e}")))
        .collect()
}

pub fn parse_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading scenario {}", path.display()))?;
    parse_scenario_str(&text)
}

pub fn parse_scenario_str(text: &str) -> Result<Scenario> {
    let mut map: BTreeMap<String, String> = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected 'key = value'", lineno + 1))?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    let get = |key: &str| -> Result<&String> {
        map.get(key).ok_or_else(|| anyhow!("missing required key '{key}'"))
    };

    let object = match map.get("object").map(String::as_str) {
        None | Some("circuit") => ObjectKind::Circuit,
        Some("chain3") => ObjectKind::Chain3,
        Some(other) => bail!("unknown object kind '{other}'"),
    };
    let flow: FlowName = get("flow")?
        .parse()
        .map_err(|e| anyhow!("bad flow: {e}"))?;
    let dim: u32 = get("dim")?.parse().context("dim")?;
    let rates: Vec<Rat> = get("rates")?
        .split(',')
        .map(|x| rat_from_str(x.trim()).map_err(|e| anyhow!("bad rate: {e}")))
        .collect::<Result<_>>()?;
    let orders: Option<Vec<u32>> = match map.get("orders") {
        Some(v) => Some(
            v.split(',')
                .map(|x| x.trim().parse::<u32>().context("orders"))
                .collect::<Result<_>>()?,
        ),
        None => None,
    };
    let center = match map.get("center") {
        Some(v) => parse_f64_list(v)?,
        None => vec![0.0; dim as usize],
    };
    if center.len() != dim as usize {
        bail!("center has {} entries, dimension is {dim}", center.len());
    }
    let plane = match map.get("plane") {
        Some(v) => {
            let xs = parse_f64_list(v)?;
            if xs.len() != 2 {
                bail!("plane needs exactly two axes");
            }
            (xs[0] as u32, xs[1] as u32)
        }
        None => (1, 2),
    };
    let frame = match (map.get("frame_e"), map.get("frame_f")) {
        (Some(e), Some(f)) => Some((parse_f64_list(e)?, parse_f64_list(f)?)),
        (None, None) => None,
        _ => bail!("frame_e and frame_f must be given together"),
    };
    let chain_radii = match map.get("chain_radii") {
        Some(v) => {
            let xs = parse_f64_list(v)?;
            if xs.len() != 3 {
                bail!("chain_radii needs three entries");
            }
            (xs[0], xs[1], xs[2])
        }
        None => (1.6, 0.8, 0.35),
    };

    let parse_or = |key: &str, default: f64| -> Result<f64> {
        match map.get(key) {
            Some(v) => v.parse::<f64>().with_context(|| key.to_string()),
            None => Ok(default),
        }
    };
    let parse_usize_or = |key: &str, default: usize| -> Result<usize> {
        match map.get(key) {
            Some(v) => v.parse::<usize>().with_context(|| key.to_string()),
            None => Ok(default),
        }
    };

    let nodes = parse_usize_or("nodes", 1024)?;
    if object == ObjectKind::Circuit && nodes < 64 {
        bail!("circuit scenarios need at least 64 nodes, got {nodes}");
    }
    let dt = parse_or("dt", 1e-3)?;
    let t_end = parse_or("t_end", 1.0)?;
    if dt <= 0.0 || t_end < 0.0 {
        bail!("need dt > 0 and t_end ≥ 0");
    }

    // canonical form: sorted key=value lines (drives the config hash)
    let canonical = map
        .iter()
        .map(|(k, v)| format!("{k} = {v}"))
        .collect::<Vec<_>>()
        .join("\n");

    Ok(Scenario {
        object,
        flow,
        dim,
        rates,
        orders,
        nodes,
        dt,
        t_end,
        center,
        radius: parse_or("radius", 1.0)?,
        plane,
        frame,
        nodes_file: map.get("nodes_file").cloned(),
        drift_tol: parse_or("drift_tol", 1e-8)?,
        sample_every: parse_usize_or("sample_every", 100)?,
        chain_m: parse_usize_or("m", 16)?,
        chain_radii,
        canonical,
    })
}
