//! Example networks compiled into the library.
//!
//! The plastics networks carry placeholder flow values; only their structure
//! is meaningful.

/// Names of the bundled networks.
pub const NETWORKS: [&str; 6] = [
    "rankine",
    "fig3b_synthetic_linear",
    "fig3c_synthetic_circular",
    "fig3d_bio_existing",
    "fig3e_bio_reuse",
    "fig3f_bio_repair",
];

/// Names of the bundled variant manifests.
pub const MANIFESTS: [&str; 1] = ["plastics"];

pub fn network_text(name: &str) -> Option<&'static str> {
    let name = name.strip_suffix(".json").unwrap_or(name);
    Some(match name {
        "rankine" => include_str!("../networks/rankine.json"),
        "fig3b_synthetic_linear" => include_str!("../networks/fig3b_synthetic_linear.json"),
        "fig3c_synthetic_circular" => include_str!("../networks/fig3c_synthetic_circular.json"),
        "fig3d_bio_existing" => include_str!("../networks/fig3d_bio_existing.json"),
        "fig3e_bio_reuse" => include_str!("../networks/fig3e_bio_reuse.json"),
        "fig3f_bio_repair" => include_str!("../networks/fig3f_bio_repair.json"),
        _ => return None,
    })
}

pub fn manifest_text(name: &str) -> Option<&'static str> {
    match name.strip_suffix(".json").unwrap_or(name) {
        "plastics" => Some(include_str!("../networks/plastics.json")),
        _ => None,
    }
}

/// Parses and validates a bundled network.
pub fn load(name: &str) -> Result<crate::Network, crate::io::LoadError> {
    let text =
        network_text(name).ok_or_else(|| crate::io::LoadError::UnknownBundled(name.to_string()))?;
    crate::io::parse_network(text, name)
}
