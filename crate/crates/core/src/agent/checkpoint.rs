//! Binary checkpoints.
//!
//! Layout, all integers and reals little-endian:
//!
//! ```text
//! b"HGGCKPT\0"  u32 version
//! u32 state_dim  u32 goal_dim  u32 action_dim  f64 action_bound
//! 4 × network (actor, critic, actor_target, critic_target):
//!     u32 n_sizes  n_sizes × u32  u64 n_params  n_params × f64
//! 2 × normaliser (state, goal):
//!     u32 dim  f64 count  dim × f64 sum  dim × f64 sum_sq
//! ```
//!
//! Optimiser moments are not stored; a loaded agent restarts Adam.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{AgentConfig, AgentDims, DdpgAgent, DenseNet, Normalizer};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"HGGCKPT\0";
pub const VERSION: u32 = 1;

impl DdpgAgent {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(MAGIC)?;
        put_u32(&mut w, VERSION)?;
        for d in [self.dims.state, self.dims.goal, self.dims.action] {
            put_u32(&mut w, d as u32)?;
        }
        put_f64(&mut w, self.action_bound)?;
        for net in [&self.actor, &self.critic, &self.actor_target, &self.critic_target] {
            put_u32(&mut w, net.sizes().len() as u32)?;
            for &s in net.sizes() {
                put_u32(&mut w, s as u32)?;
            }
            w.write_all(&(net.param_count() as u64).to_le_bytes())?;
            for &p in net.params() {
                put_f64(&mut w, p)?;
            }
        }
        for norm in [&self.state_norm, &self.goal_norm] {
            let (sum, sum_sq, count) = norm.raw_parts();
            put_u32(&mut w, sum.len() as u32)?;
            put_f64(&mut w, count)?;
            for &v in sum.iter().chain(sum_sq) {
                put_f64(&mut w, v)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Loads a checkpoint. Hidden sizes come from the file; every other
    /// hyperparameter comes from `cfg`.
    pub fn load(path: impl AsRef<Path>, mut cfg: AgentConfig) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Checkpoint("not an agent checkpoint".into()));
        }
        let version = get_u32(&mut r)?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let dims = AgentDims {
            state: get_u32(&mut r)? as usize,
            goal: get_u32(&mut r)? as usize,
            action: get_u32(&mut r)? as usize,
        };
        let action_bound = get_f64(&mut r)?;
        let mut nets = Vec::with_capacity(4);
        for _ in 0..4 {
            let n = get_u32(&mut r)? as usize;
            if n > 64 {
                return Err(Error::Checkpoint(format!("implausible layer count {n}")));
            }
            let sizes = (0..n).map(|_| get_u32(&mut r).map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
            let mut count = [0u8; 8];
            r.read_exact(&mut count)?;
            let count = u64::from_le_bytes(count) as usize;
            let expected: usize = sizes.windows(2).map(|p| (p[0] + 1) * p[1]).sum();
            if count != expected {
                return Err(Error::Checkpoint(format!("{count} parameters for layout {sizes:?}")));
            }
            let params = (0..count).map(|_| get_f64(&mut r)).collect::<Result<Vec<_>>>()?;
            let net = DenseNet::from_parts(sizes, params)
                .ok_or_else(|| Error::Checkpoint("malformed network".into()))?;
            nets.push(net);
        }
        let mut norms = Vec::with_capacity(2);
        for _ in 0..2 {
            let dim = get_u32(&mut r)? as usize;
            let count = get_f64(&mut r)?;
            let sum = (0..dim).map(|_| get_f64(&mut r)).collect::<Result<Vec<_>>>()?;
            let sum_sq = (0..dim).map(|_| get_f64(&mut r)).collect::<Result<Vec<_>>>()?;
            norms.push(Normalizer::from_raw_parts(sum, sum_sq, count, cfg.norm_eps, cfg.clip_obs));
        }

        let critic_target = nets.pop().unwrap();
        let actor_target = nets.pop().unwrap();
        let critic = nets.pop().unwrap();
        let actor = nets.pop().unwrap();
        let obs = dims.state + dims.goal;
        let hidden = actor.sizes()[1..actor.sizes().len() - 1].to_vec();
        let shapes_ok = actor.input_dim() == obs
            && actor.output_dim() == dims.action
            && critic.input_dim() == obs + dims.action
            && critic.output_dim() == 1
            && critic.sizes()[1..critic.sizes().len() - 1] == hidden[..]
            && actor_target.sizes() == actor.sizes()
            && critic_target.sizes() == critic.sizes()
            && norms[0].dim() == dims.state
            && norms[1].dim() == dims.goal;
        if !shapes_ok {
            return Err(Error::Checkpoint("inconsistent network shapes".into()));
        }
        cfg.hidden = hidden;
        cfg.validate()?;
        let goal_norm = norms.pop().unwrap();
        let state_norm = norms.pop().unwrap();
        let mut agent = Self::assemble(cfg, dims, action_bound, actor, critic);
        agent.actor_target = actor_target;
        agent.critic_target = critic_target;
        agent.state_norm = state_norm;
        agent.goal_norm = goal_norm;
        Ok(agent)
    }
}

fn put_u32(w: &mut impl Write, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn put_f64(w: &mut impl Write, v: f64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn get_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn get_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}
