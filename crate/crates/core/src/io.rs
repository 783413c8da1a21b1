//! Reading and writing network specification files.

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bundled;
use crate::compartments::{KindRegistry, ParamError, RankineState};
use crate::network::{
    Compartment, CompartmentId, Connection, MaterialMap, MaterialType, Materials, Network,
    ParamMap,
};
use crate::simulator::SimConfig;
use crate::validate::ValidationReport;

/// Prefix selecting an embedded example instead of a file on disk.
pub const BUNDLED_PREFIX: &str = "bundled:";

/// On-disk layout of a network file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub materials: Vec<MaterialType>,
    pub compartments: Vec<CompartmentEntry>,
    pub connections: Vec<Connection>,
    pub unsustainable: Vec<String>,
    #[serde(rename = "return")]
    pub returns: Vec<String>,
    pub simulation: SimConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rankine: Option<RankineState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompartmentEntry {
    pub k: u32,
    pub i: u32,
    pub j: u32,
    pub kind: String,
    pub params: ParamMap,
    pub initial_mass: MaterialMap,
}

/// A problem located by a field path such as `compartments[3].params.yield`.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

fn list<T: fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(|d| format!("  {d}"))
        .collect::<Vec<_>>()
        .join("\n")
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{origin}:{line}:{column}: syntax error: {message}")]
    Syntax {
        origin: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{origin}:{line}:{column}: at `{path}`: {message}")]
    Schema {
        origin: String,
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{origin}: invalid compartment parameters:\n{}", list(.diagnostics))]
    Params {
        origin: String,
        diagnostics: Vec<Diagnostic>,
    },
    #[error("{origin}: network is invalid:\n{report}")]
    Invalid {
        origin: String,
        report: ValidationReport,
    },
    #[error("unknown bundled network `{0}`")]
    UnknownBundled(String),
    #[error("{origin}: invalid manifest: {message}")]
    Manifest { origin: String, message: String },
}

impl LoadError {
    /// True for errors in the content of a readable file, as opposed to a
    /// missing or unreadable one.
    pub fn is_content_error(&self) -> bool {
        !matches!(self, LoadError::Io { .. } | LoadError::UnknownBundled(_))
    }
}

/// Parses the file layout without building compartment models.
pub fn parse_file(text: &str, origin: &str) -> Result<NetworkFile, LoadError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let file: NetworkFile = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        json_error(inner, origin, Some(path))
    })?;
    de.end().map_err(|e| json_error(e, origin, None))?;
    Ok(file)
}

fn json_error(e: serde_json::Error, origin: &str, path: Option<String>) -> LoadError {
    let (line, column) = (e.line(), e.column());
    let message = strip_position(&e.to_string());
    match (e.classify(), path) {
        (serde_json::error::Category::Data, Some(path)) => LoadError::Schema {
            origin: origin.to_string(),
            path,
            line,
            column,
            message,
        },
        _ => LoadError::Syntax {
            origin: origin.to_string(),
            line,
            column,
            message,
        },
    }
}

fn strip_position(message: &str) -> String {
    match message.rfind(" at line ") {
        Some(i) => message[..i].to_string(),
        None => message.to_string(),
    }
}

fn param_path(index: usize, error: &ParamError) -> String {
    let base = format!("compartments[{index}]");
    match error {
        ParamError::UnknownKind(_) => format!("{base}.kind"),
        ParamError::UnknownMaterial { field, .. }
        | ParamError::OutOfBounds { field, .. }
        | ParamError::NotFinite { field }
        | ParamError::Inconsistent { field, .. } => format!("{base}.params.{field}"),
        ParamError::Schema(_) => format!("{base}.params"),
    }
}

/// Builds the network described by `file` without structural validation.
pub fn build_network(
    file: NetworkFile,
    default_name: &str,
    registry: Arc<KindRegistry>,
    origin: &str,
) -> Result<Network, LoadError> {
    let materials = Materials::new(file.materials);
    let mut compartments = Vec::with_capacity(file.compartments.len());
    let mut diagnostics = Vec::new();
    for (index, entry) in file.compartments.into_iter().enumerate() {
        let id = CompartmentId {
            k: entry.k,
            i: entry.i,
            j: entry.j,
        };
        match Compartment::new(
            id,
            entry.kind,
            entry.params,
            entry.initial_mass,
            &registry,
            &materials,
        ) {
            Ok(c) => compartments.push(c),
            Err(e) => diagnostics.push(Diagnostic {
                path: param_path(index, &e),
                message: format!("c{}: {e}", entry.k),
            }),
        }
    }
    if !diagnostics.is_empty() {
        return Err(LoadError::Params {
            origin: origin.to_string(),
            diagnostics,
        });
    }
    let mut network = Network::new(
        file.name.unwrap_or_else(|| default_name.to_string()),
        materials,
        compartments,
        file.connections,
        file.unsustainable,
        file.returns,
        file.simulation,
        registry,
    );
    network.description = file.description;
    network.rankine = file.rankine;
    Ok(network)
}

/// Parses, builds and validates a network using the built-in kinds.
pub fn parse_network(text: &str, default_name: &str) -> Result<Network, LoadError> {
    parse_network_with(text, default_name, Arc::new(KindRegistry::builtin()))
}

/// Like [`parse_network`] with a caller-supplied kind registry.
pub fn parse_network_with(
    text: &str,
    default_name: &str,
    registry: Arc<KindRegistry>,
) -> Result<Network, LoadError> {
    let file = parse_file(text, default_name)?;
    let network = build_network(file, default_name, registry, default_name)?;
    let report = network.validate();
    if !report.is_valid() {
        return Err(LoadError::Invalid {
            origin: default_name.to_string(),
            report,
        });
    }
    Ok(network)
}

/// Loads a network from disk, or from the embedded examples when `path`
/// starts with `bundled:`.
pub fn load_network(path: &str) -> Result<Network, LoadError> {
    Ok(load_network_source(path)?.0)
}

/// Like [`load_network`], also returning the raw file text.
pub fn load_network_source(path: &str) -> Result<(Network, String), LoadError> {
    if let Some(name) = path.strip_prefix(BUNDLED_PREFIX) {
        let text = bundled::network_text(name)
            .ok_or_else(|| LoadError::UnknownBundled(name.to_string()))?;
        return Ok((parse_network(text, name)?, text.to_string()));
    }
    let p = Path::new(path);
    let text = std::fs::read_to_string(p).map_err(|source| LoadError::Io {
        path: p.to_path_buf(),
        source,
    })?;
    let stem = p
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("network")
        .to_string();
    let network = parse_network(&text, &stem).map_err(|e| relocate(e, path))?;
    Ok((network, text))
}

fn relocate(e: LoadError, path: &str) -> LoadError {
    let origin = path.to_string();
    match e {
        LoadError::Syntax {
            line,
            column,
            message,
            ..
        } => LoadError::Syntax {
            origin,
            line,
            column,
            message,
        },
        LoadError::Schema {
            path,
            line,
            column,
            message,
            ..
        } => LoadError::Schema {
            origin,
            path,
            line,
            column,
            message,
        },
        LoadError::Params { diagnostics, .. } => LoadError::Params {
            origin,
            diagnostics,
        },
        LoadError::Invalid { report, .. } => LoadError::Invalid { origin, report },
        other => other,
    }
}

/// The file layout of a network.
pub fn to_file(network: &Network) -> NetworkFile {
    NetworkFile {
        name: Some(network.name.clone()),
        description: network.description.clone(),
        materials: network.materials.as_slice().to_vec(),
        compartments: network
            .compartments
            .iter()
            .map(|c| CompartmentEntry {
                k: c.id.k,
                i: c.id.i,
                j: c.id.j,
                kind: c.kind.clone(),
                params: c.params.clone(),
                initial_mass: c.initial_mass.clone(),
            })
            .collect(),
        connections: network.connections.clone(),
        unsustainable: network.unsustainable.clone(),
        returns: network.returns.clone(),
        simulation: network.simulation.clone(),
        rankine: network.rankine.clone(),
    }
}

/// Pretty-printed JSON text of a network file.
pub fn serialize_network(network: &Network) -> String {
    let mut text = serde_json::to_string_pretty(&to_file(network)).expect("network serializes");
    text.push('\n');
    text
}

/// A list of network variants to compare.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Paths relative to the manifest, or `bundled:<name>` references.
    pub variants: Vec<String>,
}

/// Loads every variant listed in a manifest file (or `bundled:<name>`).
pub fn load_manifest(path: &str) -> Result<Vec<Network>, LoadError> {
    let (text, base, embedded) = if let Some(name) = path.strip_prefix(BUNDLED_PREFIX) {
        let text = bundled::manifest_text(name)
            .ok_or_else(|| LoadError::UnknownBundled(name.to_string()))?;
        (text.to_string(), None, true)
    } else {
        let p = Path::new(path);
        let text = std::fs::read_to_string(p).map_err(|source| LoadError::Io {
            path: p.to_path_buf(),
            source,
        })?;
        (text, p.parent().map(Path::to_path_buf), false)
    };
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| LoadError::Manifest {
        origin: path.to_string(),
        message: e.to_string(),
    })?;
    if manifest.variants.is_empty() {
        return Err(LoadError::Manifest {
            origin: path.to_string(),
            message: "no variants listed".to_string(),
        });
    }
    manifest
        .variants
        .iter()
        .map(|entry| {
            if entry.starts_with(BUNDLED_PREFIX) {
                load_network(entry)
            } else if embedded {
                let stem = entry.strip_suffix(".json").unwrap_or(entry);
                load_network(&format!("{BUNDLED_PREFIX}{stem}"))
            } else {
                let full = match &base {
                    Some(dir) => dir.join(entry),
                    None => PathBuf::from(entry),
                };
                load_network(&full.to_string_lossy())
            }
        })
        .collect()
}
