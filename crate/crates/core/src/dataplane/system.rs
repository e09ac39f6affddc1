use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{DataplaneError, Network, Packet, TraceResult};
use crate::controller::{Controller, RuleDelta};
use crate::model::{TerminalId, TopologyGraph};
use crate::policy::Rspm;

/// Whether a probe may consult the controller on a table miss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeMode {
    #[default]
    WithController,
    TablesOnly,
}

/// A controller wired to the network it programs.
#[derive(Debug, Clone)]
pub struct SdnSystem {
    pub network: Network,
    pub controller: Controller,
}

impl SdnSystem {
    pub fn new(topology: Arc<TopologyGraph>) -> Self {
        SdnSystem { network: Network::new(Arc::clone(&topology)), controller: Controller::new(topology) }
    }

    pub fn topology(&self) -> &Arc<TopologyGraph> {
        self.network.topology()
    }

    pub fn upload(&mut self, rspm: Rspm) -> Result<RuleDelta, DataplaneError> {
        let delta = self.controller.upload_rspm(rspm)?;
        self.network.apply_delta(&delta)?;
        Ok(delta)
    }

    pub fn update(&mut self, rspm: Rspm) -> Result<RuleDelta, DataplaneError> {
        let delta = self.controller.apply_update(rspm)?;
        self.network.apply_delta(&delta)?;
        Ok(delta)
    }

    pub fn install_all_allowed(&mut self) -> Result<RuleDelta, DataplaneError> {
        let delta = self.controller.install_all_allowed()?;
        self.network.apply_delta(&delta)?;
        Ok(delta)
    }

    pub fn inject(&mut self, at: &TerminalId, packet: &Packet) -> Result<TraceResult, DataplaneError> {
        self.network.inject_packet(at, packet, &mut self.controller)
    }

    pub fn probe(&self, at: &TerminalId, packet: &Packet, mode: ProbeMode) -> Result<TraceResult, DataplaneError> {
        let controller = match mode {
            ProbeMode::WithController if self.controller.rspm().is_some() => Some(&self.controller),
            _ => None,
        };
        self.network.probe(at, packet, controller)
    }
}
