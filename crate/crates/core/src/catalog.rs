//! Hardware catalog: chips, preset nodes and pods, H100-equivalence, memory
//! limits on model size, and the cluster cost model.
//!
//! The shipped catalog lives in `data/catalog.csv` and is embedded at build
//! time. Set `DTSIM_CATALOG` to a path with the same schema to replace it.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense 16-bit TFLOP/s of one H100, the unit of "H100-equivalents".
pub const H100_EQUIVALENT_TFLOPS: f64 = 990.0;
/// Multiplier from chip price to server price.
pub const CHIP_TO_SERVER: f64 = 1.64;
/// Multiplier from server price to installed cluster price.
pub const SERVER_TO_CLUSTER: f64 = 1.23;
/// Environment variable naming a replacement catalog file.
pub const CATALOG_ENV: &str = "DTSIM_CATALOG";

const BUILTIN_CATALOG: &str = include_str!("../data/catalog.csv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Precision {
    #[serde(rename = "fp16", alias = "bf16", alias = "FP16", alias = "BF16")]
    Fp16,
    #[serde(rename = "fp8", alias = "FP8")]
    Fp8,
}

impl Precision {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fp16" | "bf16" | "16" | "16-bit" | "fp16/bf16" => Some(Precision::Fp16),
            "fp8" | "8" | "8-bit" => Some(Precision::Fp8),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Precision::Fp16 => "FP16",
            Precision::Fp8 => "FP8",
        }
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// One accelerator model. Throughputs are dense TFLOP/s per chip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChipSpec {
    pub name: String,
    pub flops16_tflops: f64,
    #[serde(default)]
    pub flops8_tflops: Option<f64>,
    pub hbm_gb: f64,
    #[serde(default)]
    pub price_usd: Option<f64>,
}

impl ChipSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(key, format!("must be positive, got {v}")))
            }
        };
        positive("flops16_tflops", self.flops16_tflops)?;
        positive("hbm_gb", self.hbm_gb)?;
        if let Some(p) = self.price_usd {
            positive("price_usd", p)?;
        }
        if let Some(f8) = self.flops8_tflops {
            positive("flops8_tflops", f8)?;
            if f8 < self.flops16_tflops {
                return Err(Error::invalid(
                    "flops8_tflops",
                    format!(
                        "8-bit throughput {f8} is below 16-bit throughput {}",
                        self.flops16_tflops
                    ),
                ));
            }
        }
        Ok(())
    }
}

/// A node (or pod): `chips_per_node` identical chips at one site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub name: String,
    pub chip: ChipSpec,
    pub chips_per_node: u32,
}

impl NodeSpec {
    pub fn new(name: impl Into<String>, chip: ChipSpec, chips_per_node: u32) -> Result<Self> {
        let node = NodeSpec {
            name: name.into(),
            chip,
            chips_per_node,
        };
        node.validate()?;
        Ok(node)
    }

    pub fn validate(&self) -> Result<()> {
        if self.chips_per_node == 0 {
            return Err(Error::invalid("chips", "a node needs at least one chip"));
        }
        self.chip.validate()
    }

    pub fn supports(&self, precision: Precision) -> bool {
        match precision {
            Precision::Fp16 => true,
            Precision::Fp8 => self.chip.flops8_tflops.is_some(),
        }
    }

    /// Node throughput in TFLOP/s at the given precision.
    pub fn node_tflops(&self, precision: Precision) -> Result<f64> {
        let per_chip = match precision {
            Precision::Fp16 => self.chip.flops16_tflops,
            Precision::Fp8 => self.chip.flops8_tflops.ok_or_else(|| Error::UnsupportedPrecision {
                node: self.name.clone(),
            })?,
        };
        Ok(per_chip * f64::from(self.chips_per_node))
    }

    /// Node throughput in FLOP/s.
    pub fn node_flops(&self, precision: Precision) -> Result<f64> {
        Ok(self.node_tflops(precision)? * 1e12)
    }

    pub fn node_hbm_gb(&self) -> f64 {
        self.chip.hbm_gb * f64::from(self.chips_per_node)
    }

    /// Always measured at dense 16-bit, whatever precision a run uses.
    pub fn h100_equivalents(&self) -> f64 {
        h100_equivalents(self)
    }

    /// Chips only, before server and cluster markups.
    pub fn node_price(&self) -> Option<f64> {
        self.chip.price_usd.map(|p| p * f64::from(self.chips_per_node))
    }

    /// Short label in the style `16×H100 FP8`.
    pub fn label(&self, precision: Precision) -> String {
        match precision {
            Precision::Fp8 => format!("{}×{} FP8", self.chips_per_node, self.chip.name),
            Precision::Fp16 => format!("{}×{}", self.chips_per_node, self.chip.name),
        }
    }
}

pub fn h100_equivalents(node: &NodeSpec) -> f64 {
    f64::from(node.chips_per_node) * node.chip.flops16_tflops / H100_EQUIVALENT_TFLOPS
}

/// Installed cost of `n_nodes` nodes: chip price × chips × 1.64 × 1.23.
pub fn cluster_cost(node: &NodeSpec, n_nodes: u32) -> Result<f64> {
    let price = node.chip.price_usd.ok_or_else(|| Error::MissingPrice {
        node: node.name.clone(),
    })?;
    Ok(price * f64::from(node.chips_per_node) * f64::from(n_nodes) * CHIP_TO_SERVER * SERVER_TO_CLUSTER)
}

/// Training-memory footprint per parameter (weights, gradients, optimizer state).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BytesPerParam {
    pub fp8: f64,
    pub fp16: f64,
}

impl Default for BytesPerParam {
    fn default() -> Self {
        BytesPerParam { fp8: 14.0, fp16: 16.0 }
    }
}

impl BytesPerParam {
    pub fn get(&self, precision: Precision) -> f64 {
        match precision {
            Precision::Fp8 => self.fp8,
            Precision::Fp16 => self.fp16,
        }
    }
}

/// Largest model (parameters) whose training state fits in `memory_gb`.
pub fn max_model_params(memory_gb: f64, precision: Precision, bytes: &BytesPerParam) -> f64 {
    memory_gb * 1e9 / bytes.get(precision)
}

#[derive(Debug, Deserialize)]
struct CatalogRecord {
    name: String,
    chips: u32,
    flops16_tflops: f64,
    flops8_tflops: Option<f64>,
    hbm_gb: f64,
    price_usd: Option<f64>,
}

/// Immutable after load; `register` is for building a catalog before sharing it.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Catalog {
    nodes: Vec<NodeSpec>,
}

impl Catalog {
    /// The shipped catalog, or the file named by `DTSIM_CATALOG` when set.
    pub fn load() -> Result<Self> {
        match std::env::var_os(CATALOG_ENV) {
            Some(path) => Self::from_path(Path::new(&path)),
            None => Ok(Self::builtin()),
        }
    }

    pub fn builtin() -> Self {
        Self::from_csv(BUILTIN_CATALOG).expect("embedded catalog is valid")
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_csv(&text)
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut catalog = Catalog::default();
        for (i, row) in reader.deserialize::<CatalogRecord>().enumerate() {
            let rec = row.map_err(|e| Error::Catalog(format!("record {}: {e}", i + 1)))?;
            let chip = ChipSpec {
                name: chip_name(&rec.name),
                flops16_tflops: rec.flops16_tflops,
                flops8_tflops: rec.flops8_tflops,
                hbm_gb: rec.hbm_gb,
                price_usd: rec.price_usd,
            };
            let node = NodeSpec::new(rec.name, chip, rec.chips)
                .map_err(|e| Error::Catalog(format!("record {}: {e}", i + 1)))?;
            catalog.register(node)?;
        }
        Ok(catalog)
    }

    pub fn register(&mut self, node: NodeSpec) -> Result<()> {
        node.validate()?;
        let key = normalize(&node.name);
        if self.nodes.iter().any(|n| normalize(&n.name) == key) {
            return Err(Error::Catalog(format!("duplicate preset `{}`", node.name)));
        }
        self.nodes.push(node);
        Ok(())
    }

    pub fn nodes(&self) -> &[NodeSpec] {
        &self.nodes
    }

    /// Presets that carry a price, i.e. the ones the cost optimizer can use.
    pub fn priced(&self) -> impl Iterator<Item = &NodeSpec> {
        self.nodes.iter().filter(|n| n.chip.price_usd.is_some())
    }

    /// Case-, space- and punctuation-insensitive lookup.
    pub fn lookup(&self, name: &str) -> Result<&NodeSpec> {
        let key = normalize(name);
        if let Some(node) = self.nodes.iter().find(|n| normalize(&n.name) == key) {
            return Ok(node);
        }
        let suggestion = self
            .nodes
            .iter()
            .map(|n| (strsim::levenshtein(&normalize(&n.name), &key), &n.name))
            .min_by_key(|(d, _)| *d)
            .map(|(_, name)| name.clone());
        Err(Error::UnknownPreset {
            name: name.to_string(),
            suggestion,
        })
    }

    pub fn lookup_preset(&self, name: &str) -> Result<NodeSpec> {
        self.lookup(name).cloned()
    }
}

fn normalize(name: &str) -> String {
    name.chars()
        .filter_map(|c| match c {
            '×' => Some('x'),
            c if c.is_alphanumeric() => Some(c.to_ascii_lowercase()),
            _ => None,
        })
        .collect()
}

/// `16xH100` → `H100`; pod names are kept whole.
fn chip_name(preset: &str) -> String {
    let digits = preset.chars().take_while(|c| c.is_ascii_digit()).count();
    let rest = &preset[digits..];
    match rest.strip_prefix('x').or_else(|| rest.strip_prefix('×')) {
        Some(chip) if digits > 0 && !chip.is_empty() => chip.trim_end_matches("-FP8").to_string(),
        _ => preset.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        ((a - b) / b).abs() <= rel
    }

    #[test]
    fn h100_equivalence_examples() {
        let cat = Catalog::builtin();
        let a100 = cat.lookup("50xA100").unwrap();
        assert_eq!(format!("{:.2}", a100.h100_equivalents()), "15.76");
        let ascend = cat.lookup("49xAscend910B").unwrap();
        assert_eq!(format!("{:.2}", ascend.h100_equivalents()), "15.84");
        let one = NodeSpec::new("1xH100", cat.lookup("16xH100").unwrap().chip.clone(), 1).unwrap();
        assert!((one.h100_equivalents() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn h100_equivalence_ignores_fp8() {
        let h100 = Catalog::builtin().lookup_preset("16xH100").unwrap();
        assert!((h100.h100_equivalents() - 16.0).abs() < 1e-12);
        assert!((h100.node_tflops(Precision::Fp8).unwrap() - 31_680.0).abs() < 1e-9);
    }

    #[test]
    fn cluster_cost_examples() {
        let cat = Catalog::builtin();
        let h100 = cat.lookup("16xH100").unwrap();
        assert!(close(cluster_cost(h100, 2).unwrap(), 1_613_760.0, 1e-12));
        assert_eq!(cluster_cost(h100, 0).unwrap(), 0.0);
        let a100 = cat.lookup("50xA100").unwrap();
        assert!(close(cluster_cost(a100, 625).unwrap(), 441.3e6, 5e-4));
    }

    #[test]
    fn pods_reject_cost_queries() {
        let cat = Catalog::builtin();
        let pod = cat.lookup("GB200 NVL72").unwrap();
        assert!(matches!(cluster_cost(pod, 1), Err(Error::MissingPrice { .. })));
    }

    #[test]
    fn memory_limited_model_size() {
        let b = BytesPerParam::default();
        assert!(close(max_model_params(1280.0, Precision::Fp8, &b), 91.43e9, 1e-3));
        assert!(close(max_model_params(4000.0, Precision::Fp16, &b), 250e9, 1e-12));
        assert!(close(max_model_params(2304.0, Precision::Fp8, &b), 164.57e9, 1e-3));
    }

    #[test]
    fn preset_lookup() {
        let cat = Catalog::builtin();
        let h100 = cat.lookup("16xH100").unwrap();
        assert_eq!(h100.chips_per_node, 16);
        assert!((h100.node_tflops(Precision::Fp8).unwrap() / 1000.0 - 31.68).abs() < 1e-9);
        assert!((h100.node_tflops(Precision::Fp16).unwrap() / 1000.0 - 15.84).abs() < 1e-9);
        assert_eq!(h100.node_hbm_gb(), 1280.0);
        assert_eq!(h100.chip.price_usd, Some(25_000.0));

        let v5p = cat.lookup("TPU v5p pod").unwrap();
        assert_eq!(v5p.chips_per_node, 8960);
        assert!((v5p.node_tflops(Precision::Fp16).unwrap() / 1000.0 - 4112.64).abs() < 1e-6);
        assert_eq!(v5p.node_hbm_gb(), 851_200.0);

        let nvl72 = cat.lookup("gb200 nvl72").unwrap();
        assert_eq!(nvl72.chips_per_node, 72);
        assert!((nvl72.node_tflops(Precision::Fp16).unwrap() / 1000.0 - 162.0).abs() < 1e-9);
        assert_eq!(nvl72.node_hbm_gb(), 13_824.0);
    }

    #[test]
    fn unknown_preset_names_nearest_match() {
        let cat = Catalog::builtin();
        match cat.lookup("16xH10") {
            Err(Error::UnknownPreset { suggestion, .. }) => assert_eq!(suggestion.as_deref(), Some("16xH100")),
            other => panic!("expected unknown preset, got {other:?}"),
        }
        assert!(cat.lookup("no-such-node").is_err());
    }

    #[test]
    fn fp8_on_16_bit_only_chip_is_rejected() {
        let a100 = Catalog::builtin().lookup_preset("50xA100").unwrap();
        assert!(!a100.supports(Precision::Fp8));
        assert!(matches!(
            a100.node_flops(Precision::Fp8),
            Err(Error::UnsupportedPrecision { .. })
        ));
    }

    #[test]
    fn chip_invariants_enforced() {
        let chip = ChipSpec {
            name: "bad".into(),
            flops16_tflops: 100.0,
            flops8_tflops: Some(50.0),
            hbm_gb: 10.0,
            price_usd: None,
        };
        assert!(NodeSpec::new("bad", chip.clone(), 1).is_err());
        let ok = ChipSpec {
            flops8_tflops: None,
            ..chip
        };
        assert!(NodeSpec::new("ok", ok.clone(), 0).is_err());
        assert!(NodeSpec::new("ok", ok, 4).is_ok());
    }

    #[test]
    fn catalog_from_csv_rejects_duplicates_and_bad_rows() {
        let dup = "name,chips,flops16_tflops,flops8_tflops,hbm_gb,price_usd\na,1,1,,1,\nA,1,1,,1,\n";
        assert!(Catalog::from_csv(dup).is_err());
        let bad = "name,chips,flops16_tflops,flops8_tflops,hbm_gb,price_usd\na,1,-1,,1,\n";
        assert!(Catalog::from_csv(bad).is_err());
    }

    #[test]
    fn chip_names() {
        assert_eq!(chip_name("16xH100"), "H100");
        assert_eq!(chip_name("17xTPUv6e-FP8"), "TPUv6e");
        assert_eq!(chip_name("TPU v4 pod"), "TPU v4 pod");
    }
}
