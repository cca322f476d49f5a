//! Certificate file: the synthesized quantities plus everything `verify`
//! needs to re-check them (weights, constraints, queried state, noise bound).

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use ddmpc::synthesis::{ConstraintSets, CostWeights, SynthesisResult};

use crate::config::{from_rows, to_rows, Rows};
use crate::error::{io_err, CliError};

fn enabled() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateFile {
    pub status: String,
    pub at_origin: bool,
    pub gamma: f64,
    pub x_t: Vec<f64>,
    pub eps: f64,
    pub state_form: String,
    #[serde(default = "enabled")]
    pub constraints_enabled: bool,
    pub q: Rows,
    pub r: Rows,
    pub s_u: Rows,
    pub s_x: Rows,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<Rows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Rows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<Rows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<Rows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<Vec<f64>>,
}

impl CertificateFile {
    pub fn new(
        res: &SynthesisResult,
        x_t: &DVector<f64>,
        eps: f64,
        weights: &CostWeights,
        cons: &ConstraintSets,
        state_form: &str,
        constraints_enabled: bool,
    ) -> Self {
        let c = res.certificate.as_ref();
        Self {
            status: res.status.to_string(),
            at_origin: res.at_origin,
            gamma: res.gamma().unwrap_or(0.0),
            x_t: x_t.iter().copied().collect(),
            eps,
            state_form: state_form.to_string(),
            constraints_enabled,
            q: to_rows(weights.q()),
            r: to_rows(weights.r()),
            s_u: to_rows(cons.s_u()),
            s_x: to_rows(cons.s_x()),
            f: c.map(|c| to_rows(&c.f)),
            p: c.map(|c| to_rows(&c.p)),
            h: c.map(|c| to_rows(&c.h)),
            l: c.map(|c| to_rows(&c.l)),
            tau: c.map(|c| c.tau.iter().copied().collect()),
        }
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let text = toml::to_string(self).map_err(|e| CliError::Io(e.to_string()))?;
        fs::write(path, text).map_err(|e| io_err(path, e))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn weights(&self) -> Result<CostWeights, CliError> {
        CostWeights::new(
            from_rows("certificate q", &self.q)?,
            from_rows("certificate r", &self.r)?,
        )
        .map_err(|e| CliError::Config(format!("certificate weights: {e}")))
    }

    pub fn constraints(&self) -> Result<ConstraintSets, CliError> {
        ConstraintSets::new(
            from_rows("certificate s_u", &self.s_u)?,
            from_rows("certificate s_x", &self.s_x)?,
        )
        .map_err(|e| CliError::Config(format!("certificate constraints: {e}")))
    }

    pub fn gain(&self) -> Result<Option<DMatrix<f64>>, CliError> {
        self.f.as_ref().map(|f| from_rows("certificate f", f)).transpose()
    }

    pub fn lyapunov(&self) -> Result<Option<DMatrix<f64>>, CliError> {
        self.p.as_ref().map(|p| from_rows("certificate p", p)).transpose()
    }
}
