//! Reading and writing patterns, rule sets and library directories.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;

use patternforge::drc::RuleSet;
use patternforge::genloop::{GenerationConfig, PipelineOutput};
use patternforge::grid::{load_pattern, save_pattern, PbmFormat};
use patternforge::metrics::{hash_hex, PatternLibrary, Provenance};
use patternforge::{Error, PatternGrid};

fn with_path(e: std::io::Error, path: &Path) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

pub fn read_text(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| with_path(e, path))
}

fn create_parent(path: &Path) -> Result<(), Error> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => fs::create_dir_all(dir).map_err(|e| with_path(e, dir)),
        _ => Ok(()),
    }
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), Error> {
    create_parent(path)?;
    fs::write(path, bytes).map_err(|e| with_path(e, path))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    write_bytes(path, text.as_bytes())
}

pub fn load_grid(path: &Path) -> Result<PatternGrid, Error> {
    load_pattern(&fs::read(path).map_err(|e| with_path(e, path))?)
}

/// A rule set file, or a preset name when no such file exists.
pub fn load_rules(spec: &str) -> Result<RuleSet, Error> {
    let path = Path::new(spec);
    if path.is_file() {
        return RuleSet::from_json(&read_text(path)?);
    }
    let name = spec.strip_suffix(".json").unwrap_or(spec);
    RuleSet::preset(name).map_err(|_| Error::Config(format!("no rule file or preset named `{spec}`")))
}

pub fn parse_config(text: &str) -> Result<GenerationConfig, Error> {
    serde_json::from_str(text).map_err(|e| Error::Config(format!("generation config: {e}")))
}

pub struct LoadedLibrary {
    pub library: PatternLibrary,
    /// File name of each entry, by id.
    pub names: Vec<String>,
}

/// Every `*.pbm` of `dir` (or of `dir/library` when present), in file-name
/// order. Duplicates are dropped.
pub fn load_library(dir: &Path) -> Result<LoadedLibrary, Error> {
    let nested = dir.join("library");
    let dir = if nested.is_dir() { nested } else { dir.to_path_buf() };
    let mut paths: Vec<PathBuf> = fs::read_dir(&dir)
        .map_err(|e| with_path(e, &dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("pbm")))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::InvalidInput(format!("no .pbm files in {}", dir.display())));
    }
    let mut library = PatternLibrary::new();
    let mut names = Vec::new();
    for p in &paths {
        if library.insert(load_grid(p)?, Provenance::starter("file")).is_new() {
            names.push(p.file_name().unwrap_or_default().to_string_lossy().into_owned());
        }
    }
    Ok(LoadedLibrary { library, names })
}

/// `library/*.pbm`, `manifest.json`, `metrics.csv` and `report.json`.
pub fn write_library_dir(out: &Path, output: &PipelineOutput) -> Result<(), Error> {
    let lib_dir = out.join("library");
    fs::create_dir_all(&lib_dir).map_err(|e| with_path(e, &lib_dir))?;
    let mut manifest = Vec::new();
    for e in output.library.entries() {
        let name = format!("{:06}.pbm", e.id);
        write_bytes(&lib_dir.join(&name), &save_pattern(&e.grid, PbmFormat::P4))?;
        manifest.push(json!({
            "id": e.id,
            "file": name,
            "hash": hash_hex(&e.hash),
            "provenance": e.provenance,
        }));
    }
    write_text(&out.join("manifest.json"), &(serde_json::to_string_pretty(&manifest)? + "\n"))?;

    let mut csv = String::from(
        "iteration,parents,attempted,rejected,backend_failures,legal,success_rate,inserted,unique,h1,h2,mean_density,silhouette\n",
    );
    for s in &output.series {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{:.6},{},{},{:.6},{:.6},{:.6},{}\n",
            s.iteration,
            s.parents,
            s.attempted,
            s.rejected,
            s.backend_failures,
            s.legal,
            s.success_rate,
            s.inserted,
            s.library.unique,
            s.library.h1,
            s.library.h2,
            s.library.mean_density,
            s.library.silhouette.map(|v| format!("{v:.6}")).unwrap_or_default(),
        ));
    }
    write_text(&out.join("metrics.csv"), &csv)?;
    let report = json!({ "starters": output.starters, "series": output.series });
    write_text(&out.join("report.json"), &(serde_json::to_string_pretty(&report)? + "\n"))
}
