//! Image discovery, stem pairing, hashing, manifests and key=value logs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use sha2::{Digest, Sha256};

const IMAGE_EXTENSIONS: &[&str] = &["png", "ppm", "pgm", "pnm"];
const ROLE_SUFFIXES: &[&str] = &["_enhanced", "_low", "_gt"];

fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

/// Expands directories to their image files (sorted, non-recursive).
/// Plain file arguments are kept as given.
pub fn collect_images(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(input)
                .with_context(|| format!("reading directory {}", input.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file() && is_image(p))
                .collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(input.clone());
        }
    }
    Ok(out)
}

pub fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "image".into())
}

/// Stem with trailing role suffixes (`_enhanced`, `_low`, `_gt`) removed,
/// so `x_low_enhanced` and `x_gt` share the key `x`.
pub fn pairing_key(path: &Path) -> String {
    let mut key = file_stem(path);
    while let Some(stripped) = ROLE_SUFFIXES.iter().find_map(|s| key.strip_suffix(s)) {
        if stripped.is_empty() {
            break;
        }
        key = stripped.to_string();
    }
    key
}

/// Matches result images to references by [`pairing_key`]. If the
/// reference directory holds any `_gt` files, only those are references;
/// when both directories are the same, every other image is a result.
/// Every file on both sides must find a partner.
pub fn pair_directories(
    results: &Path,
    references: &Path,
) -> Result<Vec<(String, PathBuf, PathBuf)>> {
    for dir in [results, references] {
        if !dir.is_dir() {
            bail!("{} is not a directory", dir.display());
        }
    }
    let same = fs::canonicalize(results)? == fs::canonicalize(references)?;
    let is_gt = |p: &PathBuf| file_stem(p).ends_with("_gt");
    let mut lhs = collect_images(&[results.to_path_buf()])?;
    let mut rhs = collect_images(&[references.to_path_buf()])?;
    if rhs.iter().any(is_gt) {
        rhs.retain(is_gt);
    }
    if same {
        lhs.retain(|p| !is_gt(p));
    }
    let keyed = |files: Vec<PathBuf>, side: &str| -> Result<BTreeMap<String, PathBuf>> {
        let mut map = BTreeMap::new();
        for p in files {
            if let Some(prev) = map.insert(pairing_key(&p), p.clone()) {
                bail!(
                    "{side} files {} and {} share a pairing key",
                    prev.display(),
                    p.display()
                );
            }
        }
        Ok(map)
    };
    let lhs = keyed(lhs, "result")?;
    let mut rhs = keyed(rhs, "reference")?;
    let mut unpaired: Vec<String> = Vec::new();
    let mut pairs = Vec::new();
    for (key, path) in lhs {
        match rhs.remove(&key) {
            Some(reference) => pairs.push((key, path, reference)),
            None => unpaired.push(path.display().to_string()),
        }
    }
    unpaired.extend(rhs.values().map(|p| p.display().to_string()));
    if !unpaired.is_empty() {
        bail!("unpaired files: {}", unpaired.join(", "));
    }
    if pairs.is_empty() {
        bail!("no image pairs found");
    }
    Ok(pairs)
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Sha256::digest(&bytes)
        .iter()
        .fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        }))
}

/// `out.png` → `out_<tag>.<ext>`.
pub fn sibling(path: &Path, tag: &str, ext: &str) -> PathBuf {
    path.with_file_name(format!("{}_{tag}.{ext}", file_stem(path)))
}

pub fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    Ok(())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    ensure_parent(path)?;
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Run record: the resolved config plus hashes of every input, enough to
/// replay the run.
pub struct Manifest {
    pub command: &'static str,
    pub argv: Vec<String>,
    pub config: Option<serde_json::Value>,
    pub config_hash: Option<String>,
    pub extra: serde_json::Map<String, serde_json::Value>,
    inputs: Vec<serde_json::Value>,
    outputs: Vec<String>,
}

impl Manifest {
    pub fn new(command: &'static str, argv: &[String]) -> Self {
        Self {
            command,
            argv: argv.to_vec(),
            config: None,
            config_hash: None,
            extra: serde_json::Map::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn with_config(mut self, cfg: &pnp_retinex::EnhanceConfig) -> Self {
        self.config = Some(serde_json::to_value(cfg).expect("config serializes"));
        self.config_hash = Some(cfg.hash());
        self
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        let digest = sha256_file(path)?;
        self.inputs.push(serde_json::json!({
            "path": path.display().to_string(),
            "sha256": digest,
        }));
        Ok(())
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut doc = serde_json::json!({
            "tool": "pnp-retinex",
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "argv": self.argv,
            "config": self.config,
            "config_hash": self.config_hash,
            "inputs": self.inputs,
            "outputs": self.outputs,
        });
        if let serde_json::Value::Object(map) = &mut doc {
            map.extend(self.extra.clone());
        }
        let text = serde_json::to_string_pretty(&doc).expect("manifest serializes");
        write_text(path, &(text + "\n"))
    }
}

/// Emits one `event=<name> k=v …` line on stderr. Values containing
/// whitespace, quotes or `=` are double-quoted.
pub fn log(event: &str, fields: &[(&str, String)]) {
    let mut line = format!("event={event}");
    for (k, v) in fields {
        let needs_quotes =
            v.is_empty() || v.chars().any(|c| c.is_whitespace() || c == '"' || c == '=');
        if needs_quotes {
            let _ = write!(
                line,
                " {k}=\"{}\"",
                v.replace('\\', "\\\\").replace('"', "\\\"")
            );
        } else {
            let _ = write!(line, " {k}={v}");
        }
    }
    eprintln!("{line}");
}
