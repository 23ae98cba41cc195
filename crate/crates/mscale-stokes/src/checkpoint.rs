//! Binary checkpoints: the expanded run configuration, training progress,
//! parameters, and optimizer state in one little-endian file.
//!
//! Layout (version 1): magic `MSCP`, format version, the configuration as a
//! length-prefixed TOML string, completed epochs, penalty weight, a field
//! kind byte (0 oracle, 1 trained), a per-network manifest (tag, scales,
//! hidden shape, slot range), the flat parameter vector, and one Adam block
//! (step count, first and second moments) per network. The manifest is
//! redundant with the embedded configuration on purpose: a loader rebuilds
//! the networks from the configuration and cross-checks the manifest, so a
//! file paired with the wrong code path fails loudly instead of silently
//! misindexing parameters.

use std::fs;
use std::path::Path;

use crate::autodiff::SlotRange;
use crate::config::RunConfig;
use crate::fields::FieldSet;
use crate::optim::AdamState;
use crate::trainer::TrainState;
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"MSCP";
const VERSION: u32 = 1;
const KIND_ORACLE: u8 = 0;
const KIND_TRAINED: u8 = 1;

/// Everything a checkpoint file holds.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub config: RunConfig,
    /// True when the file captures the exact-solution oracle instead of
    /// trained networks.
    pub oracle: bool,
    pub state: TrainState,
}

impl Checkpoint {
    /// Rebuild the field set the file was written against.
    pub fn fields(&self) -> Result<FieldSet> {
        if self.oracle {
            let solution = self.config.build_solution()?;
            Ok(FieldSet::oracle(solution, self.config.loss.variant.requirements()))
        } else {
            Ok(FieldSet::trained(self.config.build_fields()?))
        }
    }
}

pub fn save(path: &Path, config: &RunConfig, fields: &FieldSet, state: &TrainState) -> Result<()> {
    let mut out = Vec::with_capacity(64 + 8 * state.params.len() * 3);
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, VERSION);
    put_bytes(&mut out, config.to_toml_string().as_bytes());
    put_u64(&mut out, state.epoch);
    out.extend_from_slice(&state.alpha.to_le_bytes());

    match fields {
        FieldSet::Oracle(_) => {
            out.push(KIND_ORACLE);
            put_u32(&mut out, 0);
        }
        FieldSet::Trained(t) => {
            out.push(KIND_TRAINED);
            let nets = t.nets();
            put_u32(&mut out, nets.len() as u32);
            for (tag, net) in &nets {
                put_bytes(&mut out, tag.as_bytes());
                put_u32(&mut out, net.scales.len() as u32);
                for s in &net.scales {
                    out.extend_from_slice(&s.to_le_bytes());
                }
                put_u32(&mut out, net.arch.hidden_layers as u32);
                put_u32(&mut out, net.arch.hidden_width as u32);
                let span = net.slot_span();
                put_u64(&mut out, span.start as u64);
                put_u64(&mut out, span.len as u64);
            }
        }
    }

    put_u64(&mut out, state.params.len() as u64);
    for v in &state.params {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for adam in &state.adams {
        put_u64(&mut out, adam.t);
        for v in adam.m.iter().chain(&adam.v) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }

    // Write-then-rename keeps a crash from leaving a torn file behind.
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, &out).map_err(|e| Error::io(tmp.display().to_string(), e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut r = Reader { bytes: &bytes, pos: 0 };

    if r.take(4, "magic")? != MAGIC {
        return Err(Error::checkpoint("magic bytes do not match a checkpoint file"));
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(Error::checkpoint(format!(
            "version {version} is not supported, this build reads version {VERSION}"
        )));
    }
    let config_text = String::from_utf8(r.bytes_field("config")?.to_vec())
        .map_err(|_| Error::checkpoint("config block is not valid UTF-8"))?;
    let config = crate::config::parse_str(&config_text)?;
    let epoch = r.u64("epoch")?;
    let alpha = f64::from_le_bytes(r.take(8, "alpha")?.try_into().unwrap());

    let kind = r.take(1, "field kind")?[0];
    let oracle = match kind {
        KIND_ORACLE => true,
        KIND_TRAINED => false,
        other => {
            return Err(Error::checkpoint(format!("field kind {other} is not recognized")));
        }
    };
    let n_nets = r.u32("network count")? as usize;

    // Cross-check each manifest entry against the networks the embedded
    // configuration produces.
    let mut adam_ranges = Vec::with_capacity(n_nets);
    if oracle {
        if n_nets != 0 {
            return Err(Error::checkpoint("an oracle checkpoint cannot carry networks"));
        }
    } else {
        let built = config.build_fields()?;
        let nets = built.nets();
        if nets.len() != n_nets {
            return Err(Error::checkpoint(format!(
                "manifest lists {n_nets} networks, the configuration builds {}",
                nets.len()
            )));
        }
        for (tag, net) in &nets {
            let file_tag = String::from_utf8_lossy(r.bytes_field("network tag")?).into_owned();
            if file_tag != *tag {
                return Err(Error::checkpoint(format!(
                    "network tag {file_tag:?} does not match expected {tag:?}"
                )));
            }
            let n_scales = r.u32("scale count")? as usize;
            let mut scales = Vec::with_capacity(n_scales);
            for _ in 0..n_scales {
                scales.push(f64::from_le_bytes(r.take(8, "scale")?.try_into().unwrap()));
            }
            let layers = r.u32("hidden layers")? as usize;
            let width = r.u32("hidden width")? as usize;
            if scales != net.scales
                || layers != net.arch.hidden_layers
                || width != net.arch.hidden_width
            {
                return Err(Error::checkpoint(format!(
                    "network {tag} manifest does not match the configuration"
                )));
            }
            let start = r.u64("slot start")? as usize;
            let len = r.u64("slot length")? as usize;
            let span = net.slot_span();
            if (SlotRange { start, len }) != span {
                return Err(Error::checkpoint(format!(
                    "network {tag} slot range {start}+{len} does not match {}+{}",
                    span.start, span.len
                )));
            }
            adam_ranges.push(span);
        }
    }

    let n_params = r.u64("parameter count")? as usize;
    let expected: usize = adam_ranges.iter().map(|s| s.len).sum();
    if n_params != expected {
        return Err(Error::checkpoint(format!(
            "parameter count {n_params} does not match the manifest total {expected}"
        )));
    }
    let mut params = Vec::with_capacity(n_params);
    for _ in 0..n_params {
        params.push(f64::from_le_bytes(r.take(8, "parameters")?.try_into().unwrap()));
    }
    let mut adams = Vec::with_capacity(adam_ranges.len());
    for range in adam_ranges {
        let t = r.u64("optimizer step count")?;
        let mut moments = [Vec::with_capacity(range.len), Vec::with_capacity(range.len)];
        for half in &mut moments {
            for _ in 0..range.len {
                half.push(f64::from_le_bytes(
                    r.take(8, "optimizer moments")?.try_into().unwrap(),
                ));
            }
        }
        let [m, v] = moments;
        adams.push(AdamState { range, t, m, v });
    }
    if r.pos != bytes.len() {
        return Err(Error::checkpoint(format!(
            "{} trailing bytes after the optimizer state",
            bytes.len() - r.pos
        )));
    }

    Ok(Checkpoint { config, oracle, state: TrainState { params, adams, alpha, epoch } })
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_bytes(out: &mut Vec<u8>, b: &[u8]) {
    put_u64(out, b.len() as u64);
    out.extend_from_slice(b);
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, field: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::checkpoint(format!("file ends inside the {field} field")));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, field: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, field)?.try_into().unwrap()))
    }

    fn u64(&mut self, field: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, field)?.try_into().unwrap()))
    }

    fn bytes_field(&mut self, field: &str) -> Result<&'a [u8]> {
        let n = self.u64(field)? as usize;
        self.take(n, field)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_str;
    use crate::trainer::Trainer;

    fn small_config() -> RunConfig {
        parse_str(
            r#"
            preset = "kovasznay-s4"
            [networks.u]
            scales = [1.0, 2.0]
            hidden_layers = 1
            hidden_width = 5
            [networks.p]
            scales = [1.0]
            hidden_layers = 1
            hidden_width = 5
            [networks.q]
            scales = [1.0]
            hidden_layers = 1
            hidden_width = 5
            [networks.aux]
            scales = [1.0, 2.0]
            hidden_layers = 1
            hidden_width = 5
            [training]
            epochs = 2
            interior_points = 40
            boundary_points = 20
            interior_batch = 20
            boundary_batch = 10
            deterministic = true
            "#,
        )
        .unwrap()
    }

    #[test]
    fn round_trip_preserves_every_bit() {
        let cfg = small_config();
        let tr = Trainer::new(cfg.clone()).unwrap();
        let mut state = tr.initial_state();
        let mut history = Vec::new();
        tr.train(&mut state, &mut history).unwrap();
        state.alpha = 1234.5;

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.ckpt");
        save(&path, &cfg, &tr.fields, &state).unwrap();
        let loaded = load(&path).unwrap();

        assert_eq!(loaded.config, cfg);
        assert!(!loaded.oracle);
        assert_eq!(loaded.state.params, state.params);
        assert_eq!(loaded.state.adams, state.adams);
        assert_eq!(loaded.state.alpha, state.alpha);
        assert_eq!(loaded.state.epoch, 2);
    }

    #[test]
    fn oracle_checkpoints_round_trip_without_parameters() {
        let cfg = small_config();
        let solution = cfg.build_solution().unwrap();
        let fields = FieldSet::oracle(solution, cfg.loss.variant.requirements());
        let state = TrainState { params: vec![], adams: vec![], alpha: 500.0, epoch: 0 };

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("oracle.ckpt");
        save(&path, &cfg, &fields, &state).unwrap();
        let loaded = load(&path).unwrap();
        assert!(loaded.oracle);
        assert!(loaded.state.params.is_empty());
        let rebuilt = loaded.fields().unwrap();
        assert_eq!(rebuilt.param_count(), 0);
    }

    #[test]
    fn unsupported_version_is_named_in_the_error() {
        let cfg = small_config();
        let tr = Trainer::new(cfg.clone()).unwrap();
        let state = tr.initial_state();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.ckpt");
        save(&path, &cfg, &tr.fields, &state).unwrap();

        let mut bytes = fs::read(&path).unwrap();
        bytes[4..8].copy_from_slice(&2u32.to_le_bytes());
        fs::write(&path, &bytes).unwrap();
        let err = load(&path).unwrap_err().to_string();
        assert!(err.contains("version 2"), "{err}");
    }

    #[test]
    fn corruption_is_rejected() {
        let cfg = small_config();
        let tr = Trainer::new(cfg.clone()).unwrap();
        let state = tr.initial_state();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.ckpt");
        save(&path, &cfg, &tr.fields, &state).unwrap();
        let bytes = fs::read(&path).unwrap();

        // Wrong magic.
        let mut bad = bytes.clone();
        bad[0] = b'X';
        fs::write(&path, &bad).unwrap();
        assert!(load(&path).unwrap_err().to_string().contains("magic"));

        // Truncated parameters.
        fs::write(&path, &bytes[..bytes.len() - 9]).unwrap();
        assert!(load(&path).is_err());

        // Trailing garbage.
        let mut long = bytes.clone();
        long.push(0);
        fs::write(&path, &long).unwrap();
        assert!(load(&path).unwrap_err().to_string().contains("trailing"));
    }

    #[test]
    fn manifest_guards_against_a_mismatched_configuration() {
        let cfg = small_config();
        let tr = Trainer::new(cfg.clone()).unwrap();
        let state = tr.initial_state();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.ckpt");
        save(&path, &cfg, &tr.fields, &state).unwrap();

        // Splice in a config whose u network has a different width. The
        // manifest no longer matches what that config builds.
        let mut other = cfg.clone();
        other.networks.u.hidden_width = 7;
        let other_text = other.to_toml_string();
        let bytes = fs::read(&path).unwrap();
        let old_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let mut spliced = bytes[..8].to_vec();
        spliced.extend_from_slice(&(other_text.len() as u64).to_le_bytes());
        spliced.extend_from_slice(other_text.as_bytes());
        spliced.extend_from_slice(&bytes[16 + old_len..]);
        fs::write(&path, &spliced).unwrap();

        let err = load(&path).unwrap_err().to_string();
        assert!(err.contains("does not match"), "{err}");
    }

    #[test]
    fn save_replaces_an_existing_file_atomically() {
        let cfg = small_config();
        let tr = Trainer::new(cfg.clone()).unwrap();
        let mut state = tr.initial_state();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.ckpt");
        save(&path, &cfg, &tr.fields, &state).unwrap();
        state.epoch = 7;
        save(&path, &cfg, &tr.fields, &state).unwrap();
        assert_eq!(load(&path).unwrap().state.epoch, 7);
        assert!(!path.with_extension("tmp").exists());
    }
}
