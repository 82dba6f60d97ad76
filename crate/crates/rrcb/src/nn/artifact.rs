use crate::bytes;
use crate::error::{Error, Result};
use crate::geom::Task;
use crate::nn::{GaussianPolicy, Mlp};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"RRCP";
const VERSION: u32 = 1;

/// The six supported training procedures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlgoId {
    Bc,
    Crr,
    Awac,
    Cql,
    Iql,
    Td3Bc,
}

impl AlgoId {
    pub fn name(self) -> &'static str {
        match self {
            AlgoId::Bc => "bc",
            AlgoId::Crr => "crr",
            AlgoId::Awac => "awac",
            AlgoId::Cql => "cql",
            AlgoId::Iql => "iql",
            AlgoId::Td3Bc => "td3bc",
        }
    }

    pub fn parse(s: &str) -> Result<AlgoId> {
        Ok(match s {
            "bc" => AlgoId::Bc,
            "crr" => AlgoId::Crr,
            "awac" => AlgoId::Awac,
            "cql" => AlgoId::Cql,
            "iql" => AlgoId::Iql,
            "td3bc" => AlgoId::Td3Bc,
            other => return Err(Error::InvalidInput(format!("unknown algorithm '{other}'"))),
        })
    }

    fn to_u8(self) -> u8 {
        match self {
            AlgoId::Bc => 0,
            AlgoId::Crr => 1,
            AlgoId::Awac => 2,
            AlgoId::Cql => 3,
            AlgoId::Iql => 4,
            AlgoId::Td3Bc => 5,
        }
    }

    fn from_u8(v: u8) -> Result<AlgoId> {
        Ok(match v {
            0 => AlgoId::Bc,
            1 => AlgoId::Crr,
            2 => AlgoId::Awac,
            3 => AlgoId::Cql,
            4 => AlgoId::Iql,
            5 => AlgoId::Td3Bc,
            other => return Err(Error::Format(format!("unknown algorithm id {other}"))),
        })
    }
}

/// Actor head of a trained policy.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicyHead {
    /// Clipped network mean (BC, TD3+BC).
    Deterministic(Mlp),
    /// Diagonal Gaussian; evaluation uses the clipped mean.
    Gaussian(GaussianPolicy),
}

impl PolicyHead {
    pub fn mean_net(&self) -> &Mlp {
        match self {
            PolicyHead::Deterministic(m) => m,
            PolicyHead::Gaussian(g) => &g.mean,
        }
    }
}

/// Trained network weights plus the normalization statistics and config
/// fingerprint needed to run the policy at evaluation time.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyArtifact {
    pub algo: AlgoId,
    pub task: Task,
    /// Observation history length the policy was trained with (1 = none).
    pub history: usize,
    /// Raw per-step observation dimension before history stacking.
    pub raw_obs_dim: usize,
    pub act_dim: usize,
    /// Per-dimension mean/std of the (stacked) observation space.
    pub norm_mean: Vec<f64>,
    pub norm_std: Vec<f64>,
    pub head: PolicyHead,
    /// Hash of the training configuration and dataset header.
    pub fingerprint: u64,
}

impl PolicyArtifact {
    /// Stacked observation dimension the network consumes.
    pub fn stacked_obs_dim(&self) -> usize {
        self.history * self.raw_obs_dim + (self.history - 1) * self.act_dim
    }

    /// Action for an already stacked raw observation vector; normalization
    /// happens here.
    pub fn act(&self, stacked_raw: &[f64]) -> Result<Vec<f64>> {
        if stacked_raw.len() != self.norm_mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.norm_mean.len(),
                got: stacked_raw.len(),
            });
        }
        let x: Vec<f64> = stacked_raw
            .iter()
            .zip(self.norm_mean.iter().zip(&self.norm_std))
            .map(|(&v, (&m, &s))| (v - m) / s)
            .collect();
        let mut a = self.head.mean_net().forward(&x)?;
        for v in &mut a {
            *v = v.clamp(-1.0, 1.0);
        }
        Ok(a)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<PolicyArtifact> {
        let mut r = BufReader::new(File::open(path)?);
        let artifact = Self::read_from(&mut r)?;
        // Reject trailing garbage.
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(Error::Format("trailing bytes after policy artifact".into()));
        }
        Ok(artifact)
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(MAGIC)?;
        bytes::write_u32(w, VERSION)?;
        bytes::write_u8(w, self.algo.to_u8())?;
        let (head_kind, arrays): (u8, Vec<&[f64]>) = match &self.head {
            PolicyHead::Deterministic(m) => (0, vec![m.params()]),
            PolicyHead::Gaussian(g) => (1, vec![g.mean.params(), &g.log_std]),
        };
        bytes::write_u8(w, head_kind)?;
        bytes::write_u8(w, match self.task {
            Task::Push => 0,
            Task::Lift => 1,
        })?;
        bytes::write_u32(w, self.history as u32)?;
        bytes::write_u32(w, self.raw_obs_dim as u32)?;
        bytes::write_u32(w, self.act_dim as u32)?;
        bytes::write_u64(w, self.fingerprint)?;
        let dims = self.head.mean_net().dims();
        bytes::write_u32(w, dims.len() as u32)?;
        for &d in dims {
            bytes::write_u32(w, d as u32)?;
        }
        bytes::write_u32(w, self.norm_mean.len() as u32)?;
        bytes::write_f64_slice(w, &self.norm_mean)?;
        bytes::write_f64_slice(w, &self.norm_std)?;
        bytes::write_u32(w, arrays.len() as u32)?;
        for arr in arrays {
            bytes::write_u32(w, arr.len() as u32)?;
            bytes::write_f64_slice(w, arr)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<PolicyArtifact> {
        bytes::expect_magic(r, MAGIC, "policy artifact")?;
        let version = bytes::read_u32(r, "version")?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported policy artifact version {version}")));
        }
        let algo = AlgoId::from_u8(bytes::read_u8(r, "algorithm id")?)?;
        let head_kind = bytes::read_u8(r, "head kind")?;
        let task = match bytes::read_u8(r, "task")? {
            0 => Task::Push,
            1 => Task::Lift,
            other => return Err(Error::Format(format!("unknown task byte {other}"))),
        };
        let history = bytes::read_u32(r, "history")? as usize;
        let raw_obs_dim = bytes::read_u32(r, "raw obs dim")? as usize;
        let act_dim = bytes::read_u32(r, "act dim")? as usize;
        let fingerprint = bytes::read_u64(r, "fingerprint")?;
        let n_dims = bytes::read_u32(r, "architecture rank")? as usize;
        if n_dims < 2 || n_dims > 64 {
            return Err(Error::Format(format!("implausible architecture rank {n_dims}")));
        }
        let mut dims = Vec::with_capacity(n_dims);
        for _ in 0..n_dims {
            dims.push(bytes::read_u32(r, "architecture dim")? as usize);
        }
        let norm_len = bytes::read_u32(r, "normalization length")? as usize;
        let norm_mean = bytes::read_f64_vec(r, norm_len, "normalization means")?;
        let norm_std = bytes::read_f64_vec(r, norm_len, "normalization stds")?;
        let n_arrays = bytes::read_u32(r, "array count")? as usize;
        let mut arrays = Vec::with_capacity(n_arrays);
        for _ in 0..n_arrays {
            let len = bytes::read_u32(r, "array length")? as usize;
            arrays.push(bytes::read_f64_vec(r, len, "parameter array")?);
        }
        let head = match (head_kind, arrays.len()) {
            (0, 1) => PolicyHead::Deterministic(
                Mlp::from_params(&dims, arrays.pop().unwrap())
                    .map_err(|e| Error::Format(format!("inconsistent parameter array: {e}")))?,
            ),
            (1, 2) => {
                let log_std = arrays.pop().unwrap();
                let mean = Mlp::from_params(&dims, arrays.pop().unwrap())
                    .map_err(|e| Error::Format(format!("inconsistent parameter array: {e}")))?;
                if log_std.len() != *dims.last().unwrap() {
                    return Err(Error::Format("log-std length does not match output dim".into()));
                }
                PolicyHead::Gaussian(GaussianPolicy { mean, log_std })
            }
            (k, n) => {
                return Err(Error::Format(format!("head kind {k} with {n} parameter arrays")));
            }
        };
        if norm_len != history * raw_obs_dim + history.saturating_sub(1) * act_dim {
            return Err(Error::Format("normalization length inconsistent with dims".into()));
        }
        Ok(PolicyArtifact {
            algo,
            task,
            history,
            raw_obs_dim,
            act_dim,
            norm_mean,
            norm_std,
            head,
            fingerprint,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    fn sample_artifact() -> PolicyArtifact {
        let mut rng = rng_from_seed(11);
        PolicyArtifact {
            algo: AlgoId::Iql,
            task: Task::Lift,
            history: 2,
            raw_obs_dim: 25,
            act_dim: 9,
            norm_mean: (0..59).map(|i| i as f64 * 0.01).collect(),
            norm_std: (0..59).map(|i| 1.0 + i as f64 * 0.001).collect(),
            head: PolicyHead::Gaussian(GaussianPolicy::new(Mlp::new(&[59, 16, 9], &mut rng), -0.7)),
            fingerprint: 0xdead_beef_1234_5678,
        }
    }

    #[test]
    fn round_trip_is_bitwise() {
        let art = sample_artifact();
        let dir = std::env::temp_dir().join("rrcb_artifact_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("p.rrcp");
        art.save(&path).unwrap();
        let loaded = PolicyArtifact::load(&path).unwrap();
        assert_eq!(art, loaded);

        // Bytes of a re-save are identical.
        let mut a = Vec::new();
        art.write_to(&mut a).unwrap();
        let mut b = Vec::new();
        loaded.write_to(&mut b).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_corruption() {
        let art = sample_artifact();
        let mut buf = Vec::new();
        art.write_to(&mut buf).unwrap();

        // Bad magic.
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(PolicyArtifact::read_from(&mut &bad[..]), Err(Error::Format(_))));

        // Truncation.
        let cut = &buf[..buf.len() / 2];
        assert!(matches!(PolicyArtifact::read_from(&mut &cut[..]), Err(Error::Format(_))));

        // Bad version.
        let mut badv = buf.clone();
        badv[4] = 99;
        assert!(matches!(PolicyArtifact::read_from(&mut &badv[..]), Err(Error::Format(_))));
    }

    #[test]
    fn act_normalizes_and_clips() {
        let mut art = sample_artifact();
        art.history = 1;
        art.norm_mean = vec![0.0; 25];
        art.norm_std = vec![1.0; 25];
        let mut rng = rng_from_seed(3);
        art.head = PolicyHead::Deterministic(Mlp::new(&[25, 8, 9], &mut rng));
        let a = art.act(&vec![0.5; 25]).unwrap();
        assert_eq!(a.len(), 9);
        assert!(a.iter().all(|v| (-1.0..=1.0).contains(v)));
        assert!(art.act(&vec![0.0; 10]).is_err());
    }
}
