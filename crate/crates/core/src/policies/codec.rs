use crate::error::{Error, Result};
use crate::simenv::{Choice, JointAction};

/// Mixed-radix index over joint actions: vehicle `i` contributes digit
/// `d_i ∈ 0..=K` at weight `(K+1)^i`, with `0 = Local` and `k+1 = Offload(k)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActionCodec {
    vehicles: usize,
    servers: usize,
    size: usize,
}

/// Largest joint action space the codec accepts (2^24).
pub const MAX_ACTIONS: u128 = 1 << 24;

impl ActionCodec {
    pub fn new(vehicles: usize, servers: usize) -> Result<Self> {
        let size = ((servers + 1) as u128)
            .checked_pow(vehicles as u32)
            .unwrap_or(u128::MAX);
        if size > MAX_ACTIONS {
            return Err(Error::ActionSpaceTooLarge { actions: size });
        }
        Ok(ActionCodec {
            vehicles,
            servers,
            size: size as usize,
        })
    }

    pub fn vehicles(&self) -> usize {
        self.vehicles
    }

    pub fn servers(&self) -> usize {
        self.servers
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn encode(&self, action: &JointAction) -> Result<usize> {
        if action.0.len() != self.vehicles {
            return Err(Error::Action(format!(
                "{} choices for {} vehicles",
                action.0.len(),
                self.vehicles
            )));
        }
        let radix = self.servers + 1;
        let mut idx = 0;
        for c in action.0.iter().rev() {
            let digit = match *c {
                Choice::Local => 0,
                Choice::Offload(k) if k < self.servers => k + 1,
                Choice::Offload(k) => return Err(Error::Action(format!("unknown server {k}"))),
            };
            idx = idx * radix + digit;
        }
        Ok(idx)
    }

    pub fn decode(&self, index: usize) -> Result<JointAction> {
        if index >= self.size {
            return Err(Error::Action(format!(
                "action index {index} outside 0..{}",
                self.size
            )));
        }
        let radix = self.servers + 1;
        let mut rest = index;
        let choices = (0..self.vehicles)
            .map(|_| {
                let d = rest % radix;
                rest /= radix;
                if d == 0 {
                    Choice::Local
                } else {
                    Choice::Offload(d - 1)
                }
            })
            .collect();
        Ok(JointAction(choices))
    }

    /// `mask[a]` is true iff every offload in action `a` targets a server
    /// marked in `allowed[vehicle][server]`.
    pub fn mask(&self, allowed: &[Vec<bool>]) -> Vec<bool> {
        let radix = self.servers + 1;
        (0..self.size)
            .map(|index| {
                let mut rest = index;
                allowed.iter().all(|row| {
                    let d = rest % radix;
                    rest /= radix;
                    d == 0 || row[d - 1]
                })
            })
            .collect()
    }
}
