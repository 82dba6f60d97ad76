//! Binary dataset format, little-endian throughout:
//!
//! ```text
//! magic "RRCB" | u32 version = 1 | u8 task | u8 quality
//! u32 episodes E | u32 steps per episode T | u32 obs_dim | u32 act_dim
//! E x { u8 behavior tag, f64 goal[7] }
//! f32 observations [E*T*obs_dim] | f32 actions [E*T*act_dim] | f32 rewards [E*T]
//! ```

use super::{BehaviorTag, Dataset, EpisodeMeta, Quality};
use crate::bytes;
use crate::error::{Error, Result};
use crate::geom::Task;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"RRCB";
const VERSION: u32 = 1;

impl Dataset {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Dataset> {
        let mut r = BufReader::new(File::open(path)?);
        let ds = Self::read_from(&mut r)?;
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(Error::Format("trailing bytes after dataset".into()));
        }
        Ok(ds)
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        self.validate()?;
        w.write_all(MAGIC)?;
        bytes::write_u32(w, VERSION)?;
        bytes::write_u8(w, match self.task {
            Task::Push => 0,
            Task::Lift => 1,
        })?;
        bytes::write_u8(w, self.quality.to_u8())?;
        bytes::write_u32(w, self.n_episodes() as u32)?;
        bytes::write_u32(w, self.steps_per_episode as u32)?;
        bytes::write_u32(w, self.obs_dim as u32)?;
        bytes::write_u32(w, self.act_dim as u32)?;
        for ep in &self.episodes {
            bytes::write_u8(w, ep.tag.to_u8())?;
            bytes::write_f64_slice(w, &ep.goal)?;
        }
        bytes::write_f32_slice(w, &self.observations)?;
        bytes::write_f32_slice(w, &self.actions)?;
        bytes::write_f32_slice(w, &self.rewards)?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Dataset> {
        bytes::expect_magic(r, MAGIC, "dataset")?;
        let version = bytes::read_u32(r, "version")?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported dataset version {version}")));
        }
        let task = match bytes::read_u8(r, "task")? {
            0 => Task::Push,
            1 => Task::Lift,
            other => return Err(Error::Format(format!("unknown task byte {other}"))),
        };
        let quality = Quality::from_u8(bytes::read_u8(r, "quality")?)?;
        let episodes = bytes::read_u32(r, "episode count")? as usize;
        let steps = bytes::read_u32(r, "steps per episode")? as usize;
        let obs_dim = bytes::read_u32(r, "obs dim")? as usize;
        let act_dim = bytes::read_u32(r, "act dim")? as usize;
        // Guard against absurd headers before allocating.
        let n = episodes
            .checked_mul(steps)
            .filter(|&n| n <= 1 << 28)
            .ok_or_else(|| Error::Format("implausible transition count".into()))?;
        if obs_dim == 0 || obs_dim > 1 << 20 || act_dim == 0 || act_dim > 1 << 20 {
            return Err(Error::Format("implausible dims".into()));
        }
        let mut metas = Vec::with_capacity(episodes);
        for _ in 0..episodes {
            let tag = BehaviorTag::from_u8(bytes::read_u8(r, "behavior tag")?)?;
            let mut goal = [0.0f64; 7];
            for g in &mut goal {
                *g = bytes::read_f64(r, "goal")?;
            }
            metas.push(EpisodeMeta { tag, goal });
        }
        let observations = bytes::read_f32_vec(r, n * obs_dim, "observations")?;
        let actions = bytes::read_f32_vec(r, n * act_dim, "actions")?;
        let rewards = bytes::read_f32_vec(r, n, "rewards")?;
        let ds = Dataset {
            task,
            quality,
            steps_per_episode: steps,
            obs_dim,
            act_dim,
            episodes: metas,
            observations,
            actions,
            rewards,
        };
        ds.validate()?;
        Ok(ds)
    }
}

#[cfg(test)]
mod tests {
    use super::super::testutil::synthetic;
    use super::*;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("rrcb_format_test");
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn round_trip_is_bitwise() {
        let ds = synthetic(Task::Lift, 4, 6, 5, 3, 9);
        let path = tmp("rt.rrcb");
        ds.save(&path).unwrap();
        let loaded = Dataset::load(&path).unwrap();
        assert_eq!(ds, loaded);
        // Byte-level: saving the loaded dataset reproduces the same file.
        let mut a = Vec::new();
        ds.write_to(&mut a).unwrap();
        let mut b = Vec::new();
        loaded.write_to(&mut b).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn truncated_file_is_rejected_without_partial_data() {
        let ds = synthetic(Task::Push, 3, 4, 4, 2, 10);
        let mut buf = Vec::new();
        ds.write_to(&mut buf).unwrap();
        for cut in [3usize, 9, 20, buf.len() / 2, buf.len() - 1] {
            let sliced = &buf[..cut];
            let err = Dataset::read_from(&mut &sliced[..]);
            assert!(matches!(err, Err(Error::Format(_))), "cut at {cut}: {err:?}");
        }
    }

    #[test]
    fn bad_magic_and_version_are_rejected() {
        let ds = synthetic(Task::Push, 1, 2, 2, 1, 11);
        let mut buf = Vec::new();
        ds.write_to(&mut buf).unwrap();
        let mut bad = buf.clone();
        bad[2] = b'X';
        assert!(matches!(Dataset::read_from(&mut &bad[..]), Err(Error::Format(_))));
        let mut badv = buf.clone();
        badv[4] = 2;
        assert!(matches!(Dataset::read_from(&mut &badv[..]), Err(Error::Format(_))));
    }

    #[test]
    fn inconsistent_mixed_composition_is_rejected() {
        let mut ds = synthetic(Task::Push, 4, 2, 3, 2, 12);
        ds.quality = Quality::Mixed;
        ds.episodes[0].tag = BehaviorTag::Weak;
        ds.episodes[1].tag = BehaviorTag::Weak;
        let mut buf = Vec::new();
        ds.write_to(&mut buf).unwrap();
        // Flip one tag so the header claim (mixed) no longer matches.
        let tag0_offset = 4 + 4 + 1 + 1 + 16;
        assert_eq!(buf[tag0_offset], 1);
        buf[tag0_offset] = 0;
        assert!(matches!(Dataset::read_from(&mut &buf[..]), Err(Error::Format(_))));
    }

    #[test]
    fn trailing_bytes_are_rejected() {
        let ds = synthetic(Task::Push, 2, 2, 2, 1, 13);
        let path = tmp("trail.rrcb");
        let mut buf = Vec::new();
        ds.write_to(&mut buf).unwrap();
        buf.push(0);
        std::fs::write(&path, &buf).unwrap();
        assert!(matches!(Dataset::load(&path), Err(Error::Format(_))));
    }
}
