//! Artifact catalog: a directory tree plus one JSON manifest.
//!
//! Artifacts are written into a private staging directory, moved under
//! `artifacts/<id>/` and only then added to the manifest, which is replaced
//! atomically (write to a temporary file, then rename). An interrupted
//! command can leave an unreferenced directory behind but never a manifest
//! entry without its files.
//!
//! Ids are `<kind>-<12 hex digits>` derived from the kind, the file
//! contents and the parent ids, so re-running a command with the same
//! inputs reproduces the same ids and reuses the stored artifacts.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, IoContext, Result};
use crate::imageio::{read_json, write_file, write_json};

pub const MANIFEST: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;
const ARTIFACTS: &str = "artifacts";
const STAGING: &str = ".staging";
const LOCK: &str = ".lock";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Spec,
    ImageSet,
    Sinogram,
    Volume,
    Model,
    FeatureMap,
    Report,
    Run,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Spec => "spec",
            Kind::ImageSet => "image-set",
            Kind::Sinogram => "sinogram",
            Kind::Volume => "volume",
            Kind::Model => "model",
            Kind::FeatureMap => "feature-map",
            Kind::Report => "report",
            Kind::Run => "run",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub id: String,
    pub kind: Kind,
    /// Files relative to the workspace root.
    pub paths: Vec<String>,
    /// SHA-256 over the artifact's files (names and contents).
    pub hash: String,
    /// Ids this artifact was derived from, including the producing run.
    pub parents: Vec<String>,
    /// Seconds since the Unix epoch.
    pub created: u64,
    #[serde(default)]
    pub meta: serde_json::Value,
}

impl Entry {
    pub fn run(&self) -> Option<&str> {
        self.parents
            .iter()
            .find(|p| p.starts_with("run-"))
            .map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub entries: Vec<Entry>,
}

impl Default for Manifest {
    fn default() -> Self {
        Manifest {
            version: MANIFEST_VERSION,
            entries: Vec::new(),
        }
    }
}

/// Where committed artifacts go.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Move into the workspace and record in the manifest.
    Commit,
    /// Compute ids only and discard the files (used to replay runs).
    DryRun,
}

/// An artifact under construction.
#[derive(Debug)]
pub struct Staging {
    dir: PathBuf,
    kind: Kind,
    files: BTreeSet<String>,
    parents: Vec<String>,
    meta: serde_json::Value,
}

impl Staging {
    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        write_file(&self.dir.join(name), bytes)?;
        self.files.insert(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        write_json(&self.dir.join(name), value)?;
        self.files.insert(name.to_string());
        Ok(())
    }

    /// Registers files already written into [`Staging::dir`].
    pub fn add_files(&mut self, names: impl IntoIterator<Item = String>) {
        self.files.extend(names);
    }

    pub fn parent(&mut self, id: &str) -> &mut Self {
        if !self.parents.iter().any(|p| p == id) {
            self.parents.push(id.to_string());
        }
        self
    }

    pub fn meta(&mut self, meta: serde_json::Value) -> &mut Self {
        self.meta = meta;
        self
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn hash_files(dir: &Path, files: &BTreeSet<String>) -> Result<String> {
    let mut h = Sha256::new();
    for name in files {
        let path = dir.join(name);
        let bytes = fs::read(&path).at(&path)?;
        h.update(name.as_bytes());
        h.update([0u8]);
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    Ok(hex(&h.finalize()))
}

fn artifact_id(kind: Kind, content: &str, parents: &[String]) -> String {
    let mut sorted: Vec<&String> = parents.iter().collect();
    sorted.sort();
    let mut h = Sha256::new();
    h.update(kind.as_str().as_bytes());
    h.update([0u8]);
    h.update(content.as_bytes());
    for p in sorted {
        h.update([0u8]);
        h.update(p.as_bytes());
    }
    format!("{}-{}", kind, &hex(&h.finalize())[..12])
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

static STAGE_COUNTER: AtomicU64 = AtomicU64::new(0);

#[derive(Debug)]
pub struct Workspace {
    root: PathBuf,
    manifest: Manifest,
    index: HashMap<String, usize>,
    mode: Mode,
    produced: Vec<String>,
    locked: bool,
}

impl Workspace {
    /// Opens (creating if needed) a workspace for writing. Takes the
    /// single-writer lock, released on drop.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(root.join(ARTIFACTS)).at(&root)?;
        fs::create_dir_all(root.join(STAGING)).at(&root)?;
        let lock = root.join(LOCK);
        match fs::OpenOptions::new().write(true).create_new(true).open(&lock) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                return Err(Error::Validation(format!(
                    "workspace {} is locked by another writer (delete {} if that process is gone)",
                    root.display(),
                    lock.display()
                )))
            }
            Err(e) => return Err(Error::io(&lock, e)),
        }
        let mut ws = Self::load(root)?;
        ws.locked = true;
        ws.clear_staging()?;
        Ok(ws)
    }

    /// Drops half-written artifacts of writers that died mid-command.
    fn clear_staging(&self) -> Result<()> {
        let dir = self.root.join(STAGING);
        for entry in fs::read_dir(&dir).at(&dir)? {
            let path = entry.at(&dir)?.path();
            log::warn!("removing stale staging directory {}", path.display());
            fs::remove_dir_all(&path).at(&path)?;
        }
        Ok(())
    }

    /// Opens an existing workspace without taking the lock.
    pub fn open_read_only(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        if !root.join(MANIFEST).exists() {
            return Err(Error::Validation(format!(
                "{} is not a workspace (no {MANIFEST})",
                root.display()
            )));
        }
        Self::load(root)
    }

    fn load(root: PathBuf) -> Result<Self> {
        let path = root.join(MANIFEST);
        let manifest: Manifest = if path.exists() {
            read_json(&path).map_err(|e| match e {
                Error::Parse { .. } => Error::Integrity(format!("unreadable manifest: {e}")),
                e => e,
            })?
        } else {
            Manifest::default()
        };
        if manifest.version != MANIFEST_VERSION {
            return Err(Error::Validation(format!(
                "manifest version {} is not supported",
                manifest.version
            )));
        }
        let index = manifest
            .entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.id.clone(), i))
            .collect();
        Ok(Workspace {
            root,
            manifest,
            index,
            mode: Mode::Commit,
            produced: Vec::new(),
            locked: false,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Ids committed (or, in dry-run mode, computed) since the last call.
    pub fn take_produced(&mut self) -> Vec<String> {
        std::mem::take(&mut self.produced)
    }

    pub fn stage(&self, kind: Kind) -> Result<Staging> {
        let n = STAGE_COUNTER.fetch_add(1, Ordering::Relaxed);
        let nanos = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.subsec_nanos())
            .unwrap_or(0);
        let dir = self
            .root
            .join(STAGING)
            .join(format!("{}-{}-{n}-{nanos}", kind, std::process::id()));
        fs::create_dir_all(&dir).at(&dir)?;
        Ok(Staging {
            dir,
            kind,
            files: BTreeSet::new(),
            parents: Vec::new(),
            meta: serde_json::Value::Null,
        })
    }

    /// Publishes a staged artifact and returns its id. An artifact with the
    /// same id already in the manifest is reused as is.
    pub fn commit(&mut self, mut staging: Staging) -> Result<String> {
        for p in &staging.parents {
            if !self.index.contains_key(p) && !self.produced.contains(p) {
                return Err(Error::not_found("parent artifact", p.clone()));
            }
        }
        let hash = hash_files(&staging.dir, &staging.files)?;
        let id = artifact_id(staging.kind, &hash, &staging.parents);
        self.produced.push(id.clone());
        if self.mode == Mode::DryRun || self.index.contains_key(&id) {
            if self.index.contains_key(&id) {
                log::info!("reusing {id}");
            }
            fs::remove_dir_all(&staging.dir).at(&staging.dir)?;
            return Ok(id);
        }
        let rel = format!("{ARTIFACTS}/{id}");
        let dest = self.root.join(&rel);
        if dest.exists() {
            // left over from an interrupted commit of identical content
            fs::remove_dir_all(&dest).at(&dest)?;
        }
        fs::rename(&staging.dir, &dest).at(&dest)?;
        let entry = Entry {
            id: id.clone(),
            kind: staging.kind,
            paths: staging.files.iter().map(|f| format!("{rel}/{f}")).collect(),
            hash,
            parents: std::mem::take(&mut staging.parents),
            created: now(),
            meta: std::mem::take(&mut staging.meta),
        };
        self.index.insert(id.clone(), self.manifest.entries.len());
        self.manifest.entries.push(entry);
        self.save()?;
        log::info!("committed {id}");
        Ok(id)
    }

    fn save(&self) -> Result<()> {
        let tmp = self.root.join(format!("{MANIFEST}.tmp"));
        let path = self.root.join(MANIFEST);
        let mut bytes = serde_json::to_vec_pretty(&self.manifest)
            .map_err(|e| Error::parse("manifest", None, e.to_string()))?;
        bytes.push(b'\n');
        {
            let mut f = fs::File::create(&tmp).at(&tmp)?;
            f.write_all(&bytes).at(&tmp)?;
            f.sync_all().at(&tmp)?;
        }
        fs::rename(&tmp, &path).at(&path)
    }

    /// Looks up an entry by exact id or unique id prefix.
    pub fn get(&self, id: &str) -> Result<&Entry> {
        if let Some(&i) = self.index.get(id) {
            return Ok(&self.manifest.entries[i]);
        }
        let matches: Vec<&Entry> = self
            .manifest
            .entries
            .iter()
            .filter(|e| e.id.starts_with(id))
            .collect();
        match matches.as_slice() {
            [one] => Ok(one),
            [] => Err(Error::not_found("artifact", id)),
            _ => Err(Error::Validation(format!("id prefix '{id}' is ambiguous"))),
        }
    }

    /// Like [`Workspace::get`], additionally checking the kind.
    pub fn expect(&self, id: &str, kind: Kind) -> Result<&Entry> {
        let e = self.get(id).map_err(|err| match err {
            Error::NotFound { id, .. } => Error::not_found(kind.as_str(), id),
            other => other,
        })?;
        if e.kind != kind {
            return Err(Error::Validation(format!(
                "{} is a {}, expected a {kind}",
                e.id, e.kind
            )));
        }
        Ok(e)
    }

    pub fn artifact_dir(&self, id: &str) -> PathBuf {
        self.root.join(ARTIFACTS).join(id)
    }

    /// Entries listing `run_id` as a parent.
    pub fn outputs_of(&self, run_id: &str) -> Vec<&Entry> {
        self.manifest
            .entries
            .iter()
            .filter(|e| e.parents.iter().any(|p| p == run_id))
            .collect()
    }

    /// Checks files, hashes, parent links and provenance chains.
    pub fn verify(&self) -> VerifyReport {
        let mut problems = Vec::new();
        let mut seen = HashSet::new();
        for e in &self.manifest.entries {
            if !seen.insert(e.id.as_str()) {
                problems.push(format!("duplicate id {}", e.id));
            }
            let dir = self.artifact_dir(&e.id);
            let mut files = BTreeSet::new();
            let mut missing = false;
            for p in &e.paths {
                let full = self.root.join(p);
                if !full.is_file() {
                    problems.push(format!("{}: missing file {p}", e.id));
                    missing = true;
                }
                match full.strip_prefix(&dir) {
                    Ok(rel) => {
                        files.insert(rel.to_string_lossy().into_owned());
                    }
                    Err(_) => problems.push(format!("{}: path {p} outside its artifact directory", e.id)),
                }
            }
            if !missing {
                match hash_files(&dir, &files) {
                    Ok(h) if h == e.hash => {}
                    Ok(_) => problems.push(format!("{}: content hash mismatch", e.id)),
                    Err(err) => problems.push(format!("{}: {err}", e.id)),
                }
            }
            for p in &e.parents {
                if !self.index.contains_key(p) {
                    problems.push(format!("{}: parent {p} not in manifest", e.id));
                }
            }
            if e.kind != Kind::Run && e.run().is_none() {
                problems.push(format!("{}: no producing run recorded", e.id));
            }
            if !matches!(e.kind, Kind::Run | Kind::Spec) && !self.reaches_spec(&e.id) {
                problems.push(format!("{}: provenance does not reach a specimen spec", e.id));
            }
        }
        VerifyReport {
            entries: self.manifest.entries.len(),
            problems,
        }
    }

    fn reaches_spec(&self, id: &str) -> bool {
        let mut stack = vec![id];
        let mut visited = HashSet::new();
        while let Some(cur) = stack.pop() {
            if !visited.insert(cur) {
                continue;
            }
            let Some(&i) = self.index.get(cur) else { continue };
            let e = &self.manifest.entries[i];
            if e.kind == Kind::Spec && cur != id {
                return true;
            }
            stack.extend(e.parents.iter().map(String::as_str));
        }
        false
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        if self.dir.exists() {
            let _ = fs::remove_dir_all(&self.dir);
        }
    }
}

impl Drop for Workspace {
    fn drop(&mut self) {
        if self.locked {
            let _ = fs::remove_file(self.root.join(LOCK));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub entries: usize,
    pub problems: Vec<String>,
}

impl VerifyReport {
    pub fn is_ok(&self) -> bool {
        self.problems.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stage_run(ws: &mut Workspace, tag: &str) -> String {
        let mut s = ws.stage(Kind::Run).unwrap();
        s.write("run.json", tag.as_bytes()).unwrap();
        ws.commit(s).unwrap()
    }

    #[test]
    fn ids_depend_on_content_and_parents() {
        let dir = tempfile::tempdir().unwrap();
        let mut ws = Workspace::open(dir.path()).unwrap();
        let run = stage_run(&mut ws, "a");
        let mut s = ws.stage(Kind::Spec).unwrap();
        s.write("spec.json", b"{}").unwrap();
        s.parent(&run);
        let spec = ws.commit(s).unwrap();
        assert!(spec.starts_with("spec-") && spec.len() == "spec-".len() + 12);
        let mut again = ws.stage(Kind::Spec).unwrap();
        again.write("spec.json", b"{}").unwrap();
        again.parent(&run);
        assert_eq!(ws.commit(again).unwrap(), spec);
        assert_eq!(ws.manifest().entries.len(), 2);
        let other_run = stage_run(&mut ws, "b");
        let mut third = ws.stage(Kind::Spec).unwrap();
        third.write("spec.json", b"{}").unwrap();
        third.parent(&other_run);
        assert_ne!(ws.commit(third).unwrap(), spec);
        assert!(ws.verify().is_ok(), "{:?}", ws.verify());
    }

    #[test]
    fn lock_is_exclusive_and_released() {
        let dir = tempfile::tempdir().unwrap();
        let ws = Workspace::open(dir.path()).unwrap();
        assert_eq!(Workspace::open(dir.path()).unwrap_err().exit_code(), 1);
        drop(ws);
        Workspace::open(dir.path()).unwrap();
    }

    #[test]
    fn dry_run_leaves_no_trace() {
        let dir = tempfile::tempdir().unwrap();
        let mut ws = Workspace::open(dir.path()).unwrap();
        ws.set_mode(Mode::DryRun);
        let id = stage_run(&mut ws, "x");
        assert!(ws.manifest().entries.is_empty());
        assert!(!ws.artifact_dir(&id).exists());
        assert_eq!(ws.take_produced(), vec![id]);
    }

    #[test]
    fn verify_flags_tampering_and_broken_chains() {
        let dir = tempfile::tempdir().unwrap();
        let mut ws = Workspace::open(dir.path()).unwrap();
        let run = stage_run(&mut ws, "r");
        let mut s = ws.stage(Kind::Report).unwrap();
        s.write("r.txt", b"x").unwrap();
        s.parent(&run);
        let rep = ws.commit(s).unwrap();
        let v = ws.verify();
        assert!(v.problems.iter().any(|p| p.contains("does not reach")));
        fs::write(ws.artifact_dir(&rep).join("r.txt"), b"y").unwrap();
        assert!(ws.verify().problems.iter().any(|p| p.contains("hash mismatch")));
        fs::remove_file(ws.artifact_dir(&rep).join("r.txt")).unwrap();
        assert!(ws.verify().problems.iter().any(|p| p.contains("missing file")));
    }

    #[test]
    fn unknown_parent_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut ws = Workspace::open(dir.path()).unwrap();
        let mut s = ws.stage(Kind::Report).unwrap();
        s.write("r.txt", b"x").unwrap();
        s.parent("spec-000000000000");
        assert!(matches!(ws.commit(s), Err(Error::NotFound { .. })));
    }

    #[test]
    fn lookup_by_prefix_and_kind() {
        let dir = tempfile::tempdir().unwrap();
        let mut ws = Workspace::open(dir.path()).unwrap();
        let run = stage_run(&mut ws, "r");
        assert_eq!(ws.get(&run[..8]).unwrap().id, run);
        assert!(matches!(ws.expect(&run, Kind::Model), Err(Error::Validation(_))));
        assert!(matches!(ws.get("model-ffff"), Err(Error::NotFound { .. })));
    }
}
