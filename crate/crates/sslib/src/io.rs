//! Plain-text serialization of state-space systems.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SsError};
use crate::statespace::{ChannelGroup, Channels, StateSpace};

pub const FORMAT_TAG: &str = "statespace-v1";

/// Serializable form: dimensions, row-major matrices and channel labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSpaceRecord {
    pub format: String,
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub inputs: Vec<ChannelGroup>,
    pub outputs: Vec<ChannelGroup>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub d: Vec<f64>,
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().iter().copied().collect()
}

fn from_row_major(r: usize, c: usize, v: &[f64], what: &str) -> Result<DMatrix<f64>> {
    if v.len() != r * c {
        return Err(SsError::Format(format!("{what}: expected {} entries, found {}", r * c, v.len())));
    }
    Ok(DMatrix::from_row_slice(r, c, v))
}

impl From<&StateSpace> for StateSpaceRecord {
    fn from(g: &StateSpace) -> Self {
        StateSpaceRecord {
            format: FORMAT_TAG.to_string(),
            n: g.nstates(),
            m: g.ninputs(),
            p: g.noutputs(),
            inputs: g.inputs.groups().to_vec(),
            outputs: g.outputs.groups().to_vec(),
            a: row_major(&g.a),
            b: row_major(&g.b),
            c: row_major(&g.c),
            d: row_major(&g.d),
        }
    }
}

impl TryFrom<&StateSpaceRecord> for StateSpace {
    type Error = SsError;

    fn try_from(r: &StateSpaceRecord) -> Result<StateSpace> {
        if r.format != FORMAT_TAG {
            return Err(SsError::Format(format!("unsupported format tag `{}`", r.format)));
        }
        let g = StateSpace::new(
            from_row_major(r.n, r.n, &r.a, "a")?,
            from_row_major(r.n, r.m, &r.b, "b")?,
            from_row_major(r.p, r.n, &r.c, "c")?,
            from_row_major(r.p, r.m, &r.d, "d")?,
        )?;
        let labels = |gs: &[ChannelGroup]| Channels::new(gs.iter().map(|g| (g.name.clone(), g.size)));
        g.with_inputs(labels(&r.inputs))?.with_outputs(labels(&r.outputs))
    }
}

pub fn to_toml_string(g: &StateSpace) -> Result<String> {
    toml::to_string(&StateSpaceRecord::from(g)).map_err(|e| SsError::Format(e.to_string()))
}

pub fn from_toml_str(s: &str) -> Result<StateSpace> {
    let rec: StateSpaceRecord = toml::from_str(s).map_err(|e| SsError::Format(e.to_string()))?;
    StateSpace::try_from(&rec)
}
