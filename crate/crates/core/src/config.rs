//! Scenario configuration.
//!
//! Files are TOML. Parameter groups use dotted keys (`radio.e_elec = 5e-8`)
//! or the equivalent `[radio]` tables. Every key is optional and unknown
//! keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::aco::AcoParams;
use crate::energy::RadioParams;
use crate::error::{Error, Result};
use crate::radio::PropagationParams;
use crate::scalar::{lit, to_f64, Scalar};
use crate::topology::{Lattice, NODES_PER_GRID};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    /// Distant cluster heads route over multiple hops immediately.
    #[default]
    Ehrp,
    /// Distant cluster heads buffer until a sink reaches their grid.
    WaitForSink,
}

impl std::str::FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ehrp" => Ok(Protocol::Ehrp),
            "wait_for_sink" | "wait-for-sink" => Ok(Protocol::WaitForSink),
            other => Err(Error::invalid("protocol", format!("unknown protocol `{other}`"))),
        }
    }
}

impl std::fmt::Display for Protocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Protocol::Ehrp => "ehrp",
            Protocol::WaitForSink => "wait_for_sink",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub node_count: usize,
    /// m
    pub area_width: f64,
    /// m
    pub area_height: f64,
    pub sink_count: usize,
    /// km/h
    pub sink_speed: f64,
    /// bits
    pub message_size: u64,
    /// bits
    pub control_packet_size: u64,
    /// J
    pub initial_energy: f64,
    /// Rounds between energy-order refreshes.
    pub refresh_period: usize,
    /// m
    pub comm_range: f64,
    pub protocol: Protocol,
    pub repetitions: usize,
    pub seed: u64,
    pub max_rounds: usize,
    /// Rounds to keep running after half the nodes have died.
    pub overrun_rounds: usize,
    /// s
    pub hop_time: f64,
    /// Force every transmission to succeed.
    pub lossless: bool,
    /// J drawn by every alive node per round regardless of traffic.
    pub idle_energy: f64,
    /// Only let ants move to a node strictly closer to the destination.
    pub progress_filter: bool,
    /// Keep pheromone between routing requests to the same destination
    /// while the routing graph is unchanged.
    pub persist_pheromones: bool,
    pub radio: RadioParams<f64>,
    pub propagation: PropagationParams<f64>,
    pub aco: AcoParams<f64>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            node_count: 900,
            area_width: 1000.0,
            area_height: 1000.0,
            sink_count: 2,
            sink_speed: 9.0,
            message_size: 4000,
            control_packet_size: 200,
            initial_energy: 0.5,
            refresh_period: 10,
            comm_range: 100.0,
            protocol: Protocol::Ehrp,
            repetitions: 25,
            seed: 1,
            max_rounds: 10_000,
            overrun_rounds: 0,
            hop_time: 0.01,
            lossless: false,
            idle_energy: 0.0,
            progress_filter: true,
            persist_pheromones: false,
            radio: RadioParams::default(),
            propagation: PropagationParams::default(),
            aco: AcoParams::default(),
        }
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(field, "must be positive and finite"))
    }
}

fn non_negative(field: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(field, "must be non-negative and finite"))
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.node_count < NODES_PER_GRID {
            return Err(Error::invalid(
                "node_count",
                format!("must be at least {NODES_PER_GRID}"),
            ));
        }
        positive("area_width", self.area_width)?;
        positive("area_height", self.area_height)?;
        if self.sink_count == 0 {
            return Err(Error::invalid("sink_count", "must be at least 1"));
        }
        positive("sink_speed", self.sink_speed)?;
        if self.message_size == 0 {
            return Err(Error::invalid("message_size", "must be at least 1 bit"));
        }
        if self.control_packet_size == 0 {
            return Err(Error::invalid("control_packet_size", "must be at least 1 bit"));
        }
        non_negative("initial_energy", self.initial_energy)?;
        if self.refresh_period == 0 {
            return Err(Error::invalid("refresh_period", "must be at least 1"));
        }
        positive("comm_range", self.comm_range)?;
        if self.repetitions == 0 {
            return Err(Error::invalid("repetitions", "must be at least 1"));
        }
        if self.max_rounds == 0 {
            return Err(Error::invalid("max_rounds", "must be at least 1"));
        }
        non_negative("hop_time", self.hop_time)?;
        non_negative("idle_energy", self.idle_energy)?;
        self.radio.validate()?;
        self.propagation.validate()?;
        self.aco.validate()?;
        let grids = self.node_count / NODES_PER_GRID;
        Lattice::for_grid_count(grids, self.area_width, self.area_height)?;
        if self.sink_count > grids {
            return Err(Error::TooManySinks {
                sinks: self.sink_count,
                grids,
            });
        }
        Ok(())
    }

    /// Parses and validates TOML text. When `radio.d0` is omitted it is
    /// derived from the amplifier constants actually in effect.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        Self::from_table(table)
    }

    pub fn from_table(table: toml::Table) -> Result<Self> {
        let d0_given = table
            .get("radio")
            .and_then(|r| r.as_table())
            .is_some_and(|r| r.contains_key("d0"));
        let mut cfg: ScenarioConfig = table.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        if !d0_given {
            cfg.radio.d0 = RadioParams::crossover(cfg.radio.eps_freespace, cfg.radio.eps_tworay);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn to_table(&self) -> toml::Table {
        toml::Table::try_from(self).expect("config serializes")
    }

    /// Round length: the time a sink needs to cross one grid pitch.
    pub fn round_duration(&self) -> f64 {
        let grids = self.node_count / NODES_PER_GRID;
        let pitch = Lattice::for_grid_count(grids, self.area_width, self.area_height)
            .map(|l| l.cell_width().min(l.cell_height()))
            .unwrap_or(self.area_width.min(self.area_height));
        pitch / (self.sink_speed / 3.6)
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    ScenarioConfig::from_toml_str(&text)
}

impl<T: Scalar> RadioParams<T> {
    pub fn cast<U: Scalar>(&self) -> RadioParams<U> {
        RadioParams {
            e_elec: lit(to_f64(self.e_elec)),
            eps_freespace: lit(to_f64(self.eps_freespace)),
            eps_tworay: lit(to_f64(self.eps_tworay)),
            e_da: lit(to_f64(self.e_da)),
            d0: lit(to_f64(self.d0)),
        }
    }
}

impl<T: Scalar> PropagationParams<T> {
    pub fn cast<U: Scalar>(&self) -> PropagationParams<U> {
        PropagationParams {
            tx_power: lit(to_f64(self.tx_power)),
            ref_loss: lit(to_f64(self.ref_loss)),
            path_loss_exponent: lit(to_f64(self.path_loss_exponent)),
            shadowing_sigma: lit(to_f64(self.shadowing_sigma)),
            sensitivity_floor: lit(to_f64(self.sensitivity_floor)),
            loss_slope: lit(to_f64(self.loss_slope)),
        }
    }
}

impl<T: Scalar> AcoParams<T> {
    pub fn cast<U: Scalar>(&self) -> AcoParams<U> {
        AcoParams {
            alpha: lit(to_f64(self.alpha)),
            beta: lit(to_f64(self.beta)),
            rho: lit(to_f64(self.rho)),
            q_deposit: lit(to_f64(self.q_deposit)),
            ant_count: self.ant_count,
            max_iterations: self.max_iterations,
            tau_init: lit(to_f64(self.tau_init)),
            tau_min: lit(to_f64(self.tau_min)),
            stall_limit: self.stall_limit,
        }
    }
}
