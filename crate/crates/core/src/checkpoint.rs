//! Versioned JSON checkpoints of the four networks.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::agent::{ActorParams, CriticParams, DdpgAgent};
use crate::nn::Parameters;
use crate::{Error, Result};

pub const FORMAT: &str = "bottleneck-ddpg-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub name: String,
    pub shape: [usize; 2],
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub tensors: Vec<TensorRecord>,
}

/// Online and target networks as stored in a checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSet {
    pub actor: ActorParams,
    pub critic: CriticParams,
    pub actor_target: ActorParams,
    pub critic_target: CriticParams,
}

impl NetworkSet {
    pub fn zeros() -> Self {
        Self {
            actor: ActorParams::zeros(),
            critic: CriticParams::zeros(),
            actor_target: ActorParams::zeros(),
            critic_target: CriticParams::zeros(),
        }
    }

    pub fn from_agent(agent: &DdpgAgent) -> Self {
        Self {
            actor: agent.actor.clone(),
            critic: agent.critic.clone(),
            actor_target: agent.actor_target.clone(),
            critic_target: agent.critic_target.clone(),
        }
    }
}

fn records<P: Parameters>(prefix: &str, params: &P, out: &mut Vec<TensorRecord>) {
    for (name, m) in params.tensors() {
        out.push(TensorRecord {
            name: format!("{prefix}.{name}"),
            shape: [m.rows(), m.cols()],
            values: m.data().to_vec(),
        });
    }
}

fn restore<P: Parameters>(prefix: &str, params: &mut P, by_name: &BTreeMap<&str, &TensorRecord>) -> Result<()> {
    let names: Vec<(String, (usize, usize))> = params
        .tensors()
        .into_iter()
        .map(|(n, m)| (format!("{prefix}.{n}"), m.shape()))
        .collect();
    for ((name, shape), dst) in names.into_iter().zip(params.tensors_mut()) {
        let rec = by_name
            .get(name.as_str())
            .ok_or_else(|| Error::Checkpoint(format!("missing tensor {name}")))?;
        if rec.shape != [shape.0, shape.1] || rec.values.len() != shape.0 * shape.1 {
            return Err(Error::Checkpoint(format!(
                "tensor {name}: expected shape {}x{}, found {}x{} with {} values",
                shape.0,
                shape.1,
                rec.shape[0],
                rec.shape[1],
                rec.values.len()
            )));
        }
        if let Some(bad) = rec.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Checkpoint(format!("tensor {name}: non-finite value at index {bad}")));
        }
        dst.data_mut().copy_from_slice(&rec.values);
    }
    Ok(())
}

impl Checkpoint {
    pub fn from_networks(nets: &NetworkSet) -> Self {
        let mut tensors = Vec::new();
        records("actor", &nets.actor, &mut tensors);
        records("critic", &nets.critic, &mut tensors);
        records("actor_target", &nets.actor_target, &mut tensors);
        records("critic_target", &nets.critic_target, &mut tensors);
        Self {
            format: FORMAT.to_string(),
            version: VERSION,
            tensors,
        }
    }

    pub fn from_agent(agent: &DdpgAgent) -> Self {
        Self::from_networks(&NetworkSet::from_agent(agent))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ckpt: Checkpoint =
            serde_json::from_str(text).map_err(|e| Error::Checkpoint(format!("unreadable checkpoint: {e}")))?;
        if ckpt.format != FORMAT {
            return Err(Error::Checkpoint(format!("unknown format {:?}", ckpt.format)));
        }
        if ckpt.version != VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported version {} (expected {VERSION})",
                ckpt.version
            )));
        }
        Ok(ckpt)
    }

    /// Rebuilds all four networks, checking every tensor's shape.
    pub fn networks(&self) -> Result<NetworkSet> {
        let by_name: BTreeMap<&str, &TensorRecord> = self.tensors.iter().map(|t| (t.name.as_str(), t)).collect();
        let mut nets = NetworkSet::zeros();
        restore("actor", &mut nets.actor, &by_name)?;
        restore("critic", &mut nets.critic, &by_name)?;
        restore("actor_target", &mut nets.actor_target, &by_name)?;
        restore("critic_target", &mut nets.critic_target, &by_name)?;
        Ok(nets)
    }
}
