use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use singmap::cylinder::MapState;
use singmap::grid::{CylinderGrid, Field};

use crate::config::{RenormChoice, RunConfig};
use crate::CliError;

/// Pretty JSON with every float written as `{:.16e}`, i.e. 17 significant
/// digits, so reports are byte-stable and round-trip exactly.
struct FixedFloats(serde_json::ser::PrettyFormatter<'static>);

impl serde_json::ser::Formatter for FixedFloats {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedFloats(Default::default()));
    value.serialize(&mut ser).map_err(|e| CliError::Io(e.to_string()))?;
    buf.push(b'\n');
    Ok(buf)
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// `t,theta,value` rows, θ fastest.
pub fn field_csv(grid: &CylinderGrid, f: &Field) -> Vec<u8> {
    let mut s = String::from("t,theta,value\n");
    for i in 0..grid.n_t {
        let t = grid.t(i);
        for j in 0..grid.n_theta {
            let _ = writeln!(s, "{t:.16e},{:.16e},{:.16e}", grid.theta(j), f.get(i, j));
        }
    }
    s.into_bytes()
}

/// Sphere profiles as `theta,<name>...` columns.
pub fn profiles_csv(theta: &[f64], names: &[String], columns: &[Vec<f64>]) -> Vec<u8> {
    let mut s = String::from("theta");
    for n in names {
        s.push(',');
        s.push_str(n);
    }
    s.push('\n');
    for (j, th) in theta.iter().enumerate() {
        let _ = write!(s, "{th:.16e}");
        for c in columns {
            let _ = write!(s, ",{:.16e}", c[j]);
        }
        s.push('\n');
    }
    s.into_bytes()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Deterministic part of the manifest, embedded in every report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunHeader {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: RunConfig,
}

impl RunHeader {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Self {
            tool: "singmap".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config: config.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FileDigest {
    /// Relative to the output directory.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    #[serde(flatten)]
    pub header: RunHeader,
    pub wall_clock_seconds: f64,
    pub exit_code: i32,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

pub fn digest_file(root: &Path, path: &Path) -> Result<FileDigest, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let rel = path.strip_prefix(root).unwrap_or(path);
    Ok(FileDigest { path: rel.to_string_lossy().into_owned(), bytes: bytes.len() as u64, sha256: sha256_hex(&bytes) })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyEntry {
    pub path: String,
    pub ok: bool,
    pub detail: String,
}

/// Re-hashes every output listed in `dir/manifest.json`.
pub fn verify_dir(dir: &Path) -> Result<Vec<VerifyEntry>, CliError> {
    let path = dir.join("manifest.json");
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let m: RunManifest =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for f in m.outputs.iter().chain(&m.inputs) {
        let p = if Path::new(&f.path).is_absolute() { PathBuf::from(&f.path) } else { dir.join(&f.path) };
        let entry = match std::fs::read(&p) {
            Ok(b) => {
                let d = sha256_hex(&b);
                let ok = d == f.sha256 && b.len() as u64 == f.bytes;
                VerifyEntry { path: f.path.clone(), ok, detail: if ok { "ok".into() } else { format!("digest {d}") } }
            }
            Err(e) => VerifyEntry { path: f.path.clone(), ok: false, detail: e.to_string() },
        };
        out.push(entry);
    }
    Ok(out)
}

/// A solved state handed from `solve` to the fitting commands.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateFile {
    pub grid: CylinderGrid,
    pub renormalizer: RenormChoice,
    pub phi: Field,
    pub v: Field,
    pub traces: (f64, f64),
}

impl StateFile {
    pub fn from_state(s: &MapState, renormalizer: RenormChoice) -> Self {
        Self { grid: s.grid, renormalizer, phi: s.phi.clone(), v: s.v.clone(), traces: s.traces }
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read state {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn into_state(self) -> Result<MapState, CliError> {
        MapState::new(self.grid, self.renormalizer.build(), self.phi, self.v, self.traces).map_err(CliError::config)
    }
}
