//! Network snapshot: `"AANN"`, u32 version, the configuration as JSON, the
//! feature dimension, then every branch's wiring, weights and learning state
//! in pool order, and finally the feedback pathway.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::aan::Aan;
use super::config::AanConfig;
use super::NetError;
use crate::binio::{LeReader, LeWriter};

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"AANN";
pub const SNAPSHOT_VERSION: u32 = 1;

impl Aan {
    pub fn write_to<W: Write>(&self, w: W) -> Result<(), NetError> {
        let mut w = LeWriter::new(w);
        w.bytes(SNAPSHOT_MAGIC)?;
        w.u32(SNAPSHOT_VERSION)?;
        w.str(&serde_json::to_string(self.config())?)?;
        w.u32(self.feature_dim() as u32)?;
        w.u32(self.pools().len() as u32)?;
        for pool in self.pools() {
            w.u32(pool.branches.len() as u32)?;
            for b in &pool.branches {
                w.u32_vec(&b.indices)?;
                w.f32_vec(&b.weights)?;
                w.f32_vec(&b.mu)?;
                w.f32_vec(&b.u_avg)?;
                w.f32_vec(&b.v_avg)?;
            }
        }
        w.f32(self.feedback().mu)?;
        w.f32_vec(&self.feedback().weights)?;
        w.flush()?;
        Ok(())
    }

    /// Rebuilds the architecture from the stored configuration and then
    /// restores every array, checking that its length matches.
    pub fn read_from<R: Read>(r: R) -> Result<Self, NetError> {
        let mut r = LeReader::new(r);
        if &r.bytes::<4>()? != SNAPSHOT_MAGIC {
            return Err(NetError::Format("bad magic".into()));
        }
        let version = r.u32()?;
        if version != SNAPSHOT_VERSION {
            return Err(NetError::Format(format!("unsupported snapshot version {version}")));
        }
        let config: AanConfig = serde_json::from_str(&r.str()?)?;
        let dim = r.u32()? as usize;
        let mut aan = Aan::with_feature_dim(config, dim)?;
        let pools = r.u32()? as usize;
        if pools != aan.pools().len() {
            return Err(NetError::Format(format!("{pools} pools, configuration implies {}", aan.pools().len())));
        }
        fn fill<T>(dst: &mut Vec<T>, src: Vec<T>, what: &str) -> Result<(), NetError> {
            if dst.len() != src.len() {
                return Err(NetError::Format(format!("{what}: {} values, expected {}", src.len(), dst.len())));
            }
            *dst = src;
            Ok(())
        }
        for pool in aan.pools_mut() {
            let branches = r.u32()? as usize;
            if branches != pool.branches.len() {
                return Err(NetError::Format(format!("{}: wrong branch count", pool.name)));
            }
            for b in &mut pool.branches {
                fill(&mut b.indices, r.u32_vec()?, "wiring")?;
                fill(&mut b.weights, r.f32_vec()?, "weights")?;
                fill(&mut b.mu, r.f32_vec()?, "learning rates")?;
                fill(&mut b.u_avg, r.f32_vec()?, "input averages")?;
                fill(&mut b.v_avg, r.f32_vec()?, "output averages")?;
            }
            let limit = match pool.branches[0].source {
                super::Source::Features => dim,
                super::Source::Pool(_) => pool.neurons(),
                super::Source::Pair(..) => 2 * pool.neurons(),
            };
            if pool.branches.iter().flat_map(|b| &b.indices).any(|&i| i as usize >= limit.max(pool.neurons())) {
                return Err(NetError::Format(format!("{}: wiring index out of range", pool.name)));
            }
        }
        let fb = aan.feedback_mut();
        fb.mu = r.f32()?;
        fill(&mut fb.weights, r.f32_vec()?, "feedback weights")?;
        if !r.at_end()? {
            return Err(NetError::Format("trailing bytes".into()));
        }
        Ok(aan)
    }

    pub fn save(&self, path: &Path) -> Result<(), NetError> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: &Path) -> Result<Self, NetError> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}
