use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::neural::Mlp;

/// Leading bytes of a saved agent.
pub const AGENT_MAGIC: &[u8; 8] = b"UAVAGT01";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgentKind {
    Dqn,
    Wolpertinger,
    Sequential,
}

impl AgentKind {
    fn code(self) -> u32 {
        match self {
            AgentKind::Dqn => 1,
            AgentKind::Wolpertinger => 2,
            AgentKind::Sequential => 3,
        }
    }

    fn from_code(code: u32) -> Result<Self> {
        Ok(match code {
            1 => AgentKind::Dqn,
            2 => AgentKind::Wolpertinger,
            3 => AgentKind::Sequential,
            other => return Err(Error::Checkpoint(format!("unknown agent kind {other}"))),
        })
    }
}

/// Trained networks plus the dimensions of the environment they act in.
///
/// Networks are stored in order: the Q-network (DQN); actor then critic
/// (Wolpertinger); one Q-network per cell in training order (sequential,
/// with `cells` holding that order).
#[derive(Debug, Clone, PartialEq)]
pub struct SavedAgent {
    pub kind: AgentKind,
    pub num_cells: usize,
    pub obs_len: usize,
    pub num_actions: u64,
    pub cells: Vec<usize>,
    pub nets: Vec<Mlp>,
}

/// Layout: magic, then `u32` kind, cells, observation length, `u64` action
/// count, `u32` cell-list length and entries, `u32` network count, then each
/// network in the flat MLP format. Integers are little-endian.
pub fn write_agent<W: Write>(w: &mut W, agent: &SavedAgent) -> Result<()> {
    w.write_all(AGENT_MAGIC)?;
    let u32s = [agent.kind.code(), agent.num_cells as u32, agent.obs_len as u32];
    for v in u32s {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&agent.num_actions.to_le_bytes())?;
    w.write_all(&(agent.cells.len() as u32).to_le_bytes())?;
    for &c in &agent.cells {
        w.write_all(&(c as u32).to_le_bytes())?;
    }
    w.write_all(&(agent.nets.len() as u32).to_le_bytes())?;
    for net in &agent.nets {
        net.write_to(w)?;
    }
    Ok(())
}

pub fn read_agent<R: Read>(r: &mut R) -> Result<SavedAgent> {
    use crate::neural::read_u32;
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != AGENT_MAGIC {
        return Err(Error::Checkpoint("bad agent magic".into()));
    }
    let kind = AgentKind::from_code(read_u32(r)?)?;
    let num_cells = read_u32(r)? as usize;
    let obs_len = read_u32(r)? as usize;
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    let num_actions = u64::from_le_bytes(buf);
    let n_cells = read_u32(r)? as usize;
    if n_cells > num_cells {
        return Err(Error::Checkpoint("cell list longer than the network".into()));
    }
    let cells = (0..n_cells)
        .map(|_| read_u32(r).map(|c| c as usize))
        .collect::<Result<Vec<_>>>()?;
    let n_nets = read_u32(r)? as usize;
    if n_nets > 1024 {
        return Err(Error::Checkpoint(format!("implausible network count {n_nets}")));
    }
    let nets = (0..n_nets).map(|_| Mlp::read_from(r)).collect::<Result<Vec<_>>>()?;
    let agent = SavedAgent {
        kind,
        num_cells,
        obs_len,
        num_actions,
        cells,
        nets,
    };
    check_shapes(&agent)?;
    Ok(agent)
}

fn check_shapes(a: &SavedAgent) -> Result<()> {
    let bad = |msg: &str| Err(Error::Checkpoint(msg.into()));
    match a.kind {
        AgentKind::Dqn => {
            if a.nets.len() != 1
                || a.nets[0].input_dim() != a.obs_len
                || a.nets[0].output_dim() as u64 != a.num_actions
            {
                return bad("DQN network does not match the header");
            }
        }
        AgentKind::Wolpertinger => {
            let bits = 2 * a.num_cells;
            if a.nets.len() != 2
                || a.nets[0].input_dim() != a.obs_len
                || a.nets[0].output_dim() != bits
                || a.nets[1].input_dim() != a.obs_len + bits
                || a.nets[1].output_dim() != 1
            {
                return bad("actor/critic networks do not match the header");
            }
        }
        AgentKind::Sequential => {
            if a.nets.len() != a.cells.len()
                || a.nets.iter().any(|n| n.input_dim() != a.obs_len || n.output_dim() as u64 != a.num_actions)
            {
                return bad("per-cell networks do not match the header");
            }
        }
    }
    Ok(())
}
