//! Model parameters: process rates `(p, q, γ)`, error rates `(α, β)`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("{name} = {value} is outside {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
}

fn within(name: &'static str, value: f64, ok: bool, range: &'static str) -> Result<(), ParamError> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(ParamError::OutOfRange { name, value, range })
    }
}

/// Which percolation rule picks the edge at each transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// Uniform choice over the edge or non-edge set.
    Er,
    /// Achlioptas product rule over two uniformly drawn candidates.
    Pr,
}

impl Regime {
    pub const ALL: [Regime; 2] = [Regime::Er, Regime::Pr];

    pub fn name(self) -> &'static str {
        match self {
            Regime::Er => "er",
            Regime::Pr => "pr",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Er => "ER",
            Regime::Pr => "PR",
        })
    }
}

impl std::str::FromStr for Regime {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "er" => Ok(Regime::Er),
            "pr" => Ok(Regime::Pr),
            other => Err(format!("unknown regime {other:?} (expected er or pr)")),
        }
    }
}

/// Birth probability `p`, death probability `q` and event rate `gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcessParams {
    pub p: f64,
    pub q: f64,
    pub gamma: f64,
}

impl ProcessParams {
    /// Interior parameters: `0 < p, q < 1`, `gamma > 0`.
    pub fn new(p: f64, q: f64, gamma: f64) -> Result<Self, ParamError> {
        within("p", p, p > 0.0 && p < 1.0, "(0, 1)")?;
        within("q", q, q > 0.0 && q < 1.0, "(0, 1)")?;
        within("gamma", gamma, gamma > 0.0, "(0, inf)")?;
        Ok(Self { p, q, gamma })
    }

    /// Also admits the boundary `p, q ∈ {0, 1}`, e.g. pure growth with
    /// `p = 1, q = 0`. Such values can be simulated but not estimated.
    pub fn closed(p: f64, q: f64, gamma: f64) -> Result<Self, ParamError> {
        within("p", p, (0.0..=1.0).contains(&p), "[0, 1]")?;
        within("q", q, (0.0..=1.0).contains(&q), "[0, 1]")?;
        within("gamma", gamma, gamma > 0.0, "(0, inf)")?;
        Ok(Self { p, q, gamma })
    }
}

/// Type-I rate `alpha` (false edge) and type-II rate `beta` (missed edge).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub alpha: f64,
    pub beta: f64,
}

impl NoiseParams {
    /// Identifiable error rates: `0 < alpha, beta < 0.5`.
    pub fn new(alpha: f64, beta: f64) -> Result<Self, ParamError> {
        within("alpha", alpha, alpha > 0.0 && alpha < 0.5, "(0, 0.5)")?;
        within("beta", beta, beta > 0.0 && beta < 0.5, "(0, 0.5)")?;
        Ok(Self { alpha, beta })
    }

    /// Any rates in `[0, 1]`. Outside `(0, 0.5)` the model is not
    /// identifiable; this exists for noiseless simulation and for
    /// checking the label-flip symmetry.
    pub fn unrestricted(alpha: f64, beta: f64) -> Result<Self, ParamError> {
        within("alpha", alpha, (0.0..=1.0).contains(&alpha), "[0, 1]")?;
        within("beta", beta, (0.0..=1.0).contains(&beta), "[0, 1]")?;
        Ok(Self { alpha, beta })
    }

    pub fn noiseless() -> Self {
        Self {
            alpha: 0.0,
            beta: 0.0,
        }
    }
}

/// The full parameter vector `Γ = (p, q, γ, α, β)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub process: ProcessParams,
    pub noise: NoiseParams,
}

impl ModelParams {
    pub fn new(p: f64, q: f64, gamma: f64, alpha: f64, beta: f64) -> Result<Self, ParamError> {
        Ok(Self {
            process: ProcessParams::new(p, q, gamma)?,
            noise: NoiseParams::new(alpha, beta)?,
        })
    }

    /// `[p, q, gamma, alpha, beta]`.
    pub fn to_array(&self) -> [f64; 5] {
        [
            self.process.p,
            self.process.q,
            self.process.gamma,
            self.noise.alpha,
            self.noise.beta,
        ]
    }

    /// `||a - b||_2 / ||b||_2` over `[p, q, gamma, alpha, beta]`.
    pub fn relative_change(&self, previous: &ModelParams) -> f64 {
        let a = self.to_array();
        let b = previous.to_array();
        let num: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum();
        let den: f64 = b.iter().map(|y| y * y).sum();
        (num / den).sqrt()
    }
}

impl fmt::Display for ModelParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "p={:.4} q={:.4} gamma={:.4} alpha={:.4} beta={:.4}",
            self.process.p, self.process.q, self.process.gamma, self.noise.alpha, self.noise.beta
        )
    }
}
