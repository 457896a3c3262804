//! Atomic file output, hash-tagged field files and the sweep table.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use flep_core::asymptotics::SweepRow;
use flep_core::io::{decode, encode, StoredField};
use flep_core::Field;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Writes through a temporary file in the same directory and renames it
/// into place, so readers never observe a partial file.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let name = path
        .file_name()
        .with_context(|| format!("{} has no file name", path.display()))?
        .to_string_lossy();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

/// Sidecar stored next to every field file as `<file>.json`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FieldSidecar {
    pub config_hash: String,
    pub sha256: String,
    pub s: f64,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".json");
    PathBuf::from(p)
}

pub fn write_field(path: &Path, field: &Field, s: f64, config_hash: &str) -> Result<()> {
    let bytes = encode(field, s);
    let side = FieldSidecar {
        config_hash: config_hash.to_string(),
        sha256: hex::encode(Sha256::digest(&bytes)),
        s,
    };
    atomic_write(path, &bytes)?;
    atomic_write(&sidecar_path(path), &serde_json::to_vec_pretty(&side)?)?;
    Ok(())
}

/// Reads a field file, refusing it unless its sidecar carries
/// `config_hash` and matches the file contents.
pub fn read_field(path: &Path, config_hash: &str) -> Result<StoredField> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let side_path = sidecar_path(path);
    let side: FieldSidecar = serde_json::from_slice(
        &fs::read(&side_path).with_context(|| format!("reading {}", side_path.display()))?,
    )
    .with_context(|| format!("parsing {}", side_path.display()))?;
    if side.config_hash != config_hash {
        bail!(
            "{} was produced by config {}, not {}",
            path.display(),
            side.config_hash,
            config_hash
        );
    }
    if side.sha256 != hex::encode(Sha256::digest(&bytes)) {
        bail!("{} does not match its recorded checksum", path.display());
    }
    Ok(decode(&bytes)?)
}

pub const CSV_HEADER: &str = "k,a_k,a_star_minus_a,I1,I1_pred,epsilon,eps_pred,lambda_a,eps2s_lambda,zbar_x,zbar_y,profile_err,resolved,trial_bound,t_opt,t_argmin,interaction_limit,el_residual,steps";

/// The sweep table, preceded by a `#` line carrying the config hash.
pub fn sweep_csv(rows: &[SweepRow], config_hash: &str) -> String {
    let mut out = format!("# config_sha256={config_hash}\n{CSV_HEADER}\n");
    for r in rows {
        let k = r.k.map(|k| k.to_string()).unwrap_or_default();
        let fields = [
            k,
            num(r.a),
            num(r.gap),
            num(r.energy),
            num(r.energy_pred),
            num(r.epsilon),
            num(r.epsilon_pred),
            num(r.lambda_a),
            num(r.eps2s_lambda),
            num(r.z_bar[0]),
            num(r.z_bar[1]),
            num(r.profile_err),
            r.resolved.to_string(),
            num(r.trial_bound),
            num(r.t_opt),
            num(r.t_argmin),
            num(r.interaction_limit),
            num(r.el_residual),
            r.steps.to_string(),
        ];
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:e}")
    } else {
        String::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use flep_core::Grid;

    #[test]
    fn field_roundtrip_checks_hash() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/u.fld");
        let g = Grid::new(2, 16, 4.0).unwrap();
        let f = Field::from_fn(g, |x| x[0] * x[1]).unwrap();
        write_field(&path, &f, 0.5, "abc").unwrap();
        let back = read_field(&path, "abc").unwrap();
        assert_eq!(back.field, f);
        assert_eq!(back.s, 0.5);
        assert!(read_field(&path, "other").is_err());
        let mut bytes = fs::read(&path).unwrap();
        *bytes.last_mut().unwrap() ^= 1;
        fs::write(&path, bytes).unwrap();
        assert!(read_field(&path, "abc").is_err());
    }

    #[test]
    fn atomic_write_leaves_no_temporaries() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        atomic_write(&path, b"one").unwrap();
        atomic_write(&path, b"two").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
