//! Evaluation metrics and the analytic lifetime cross-check.

use crate::energy::Femtojoules;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::sim::{packet_delay, Packet, RoundOutcome};
use crate::topology::NodeState;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    pub alive: usize,
    /// J consumed since the start.
    pub energy_cum: f64,
    /// Readings delivered since the start.
    pub delivered_cum: u64,
    pub generated_cum: u64,
    /// Mean delay of the messages delivered this round, s; 0 when none.
    pub mean_delay: f64,
    pub mean_hops: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lifetime {
    pub round: usize,
    pub reached: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub series: Vec<RoundRecord>,
    pub rounds_run: usize,
    pub lifetime_hna: usize,
    pub hna_reached: bool,
    pub lifetime_fnd: usize,
    pub fnd_reached: bool,
    /// J
    pub total_energy: f64,
    pub pdr: f64,
    /// s
    pub avg_delay: f64,
    pub avg_hops: f64,
    /// Residual energy left at `lifetime_hna`, J.
    pub wasted_energy: f64,
    pub wasted_energy_fj: u64,
    pub consumed_at_lifetime_fj: u64,
    pub initial_energy_fj: u64,
    /// Mean J/round over the first quartile of the rounds up to the lifetime.
    pub early_energy_rate: f64,
    /// Lifetime predicted from the early energy rate and the wasted energy.
    pub analytic_lifetime: Option<f64>,
    pub generated_readings: u64,
    pub delivered_readings: u64,
    pub dropped_readings: u64,
    pub in_flight_readings: u64,
    pub generated_packets: u64,
    pub delivered_packets: u64,
    pub dropped_packets: u64,
    pub in_flight_packets: u64,
    pub routing_failures: u64,
    /// Energy ledger balanced after every round.
    pub ledger_exact: bool,
    /// Packet ledger balanced after every round.
    pub packets_balanced: bool,
}

/// First round with fewer than `ceil(n / 2)` alive nodes.
pub fn lifetime_hna(alive: &[usize], n: usize, cap: usize) -> Lifetime {
    first_below(alive, n.div_ceil(2), cap)
}

/// First round with fewer than `n` alive nodes.
pub fn lifetime_fnd(alive: &[usize], n: usize, cap: usize) -> Lifetime {
    first_below(alive, n, cap)
}

fn first_below(alive: &[usize], threshold: usize, cap: usize) -> Lifetime {
    match alive.iter().position(|&a| a < threshold) {
        Some(round) => Lifetime { round, reached: true },
        None => Lifetime {
            round: cap,
            reached: false,
        },
    }
}

/// Sum of residual energies, J.
pub fn wasted_energy<T: Scalar>(nodes: &[NodeState<T>]) -> f64 {
    nodes.iter().map(|n| n.residual).sum::<Femtojoules>().joules()
}

/// `(n * e_init - e_wasted) / e_rate` rounds.
pub fn analytic_lifetime(n: usize, e_init: f64, e_rate: f64, e_wasted: f64) -> Result<f64> {
    if !(e_rate > 0.0) {
        return Err(Error::NonPositiveRate(e_rate));
    }
    Ok((n as f64 * e_init - e_wasted) / e_rate)
}

/// Delivered over generated; 1 when nothing was generated.
pub fn pdr(delivered: u64, generated: u64) -> f64 {
    assert!(delivered <= generated, "delivered {delivered} exceeds generated {generated}");
    if generated == 0 {
        1.0
    } else {
        delivered as f64 / generated as f64
    }
}

/// Mean delay over delivered packets; 0 when there are none.
pub fn average_delay(packets: &[Packet], hop_time: f64, round_duration: f64) -> f64 {
    let delays: Vec<f64> = packets
        .iter()
        .filter_map(|p| packet_delay(p, hop_time, round_duration).ok())
        .collect();
    if delays.is_empty() {
        0.0
    } else {
        delays.iter().sum::<f64>() / delays.len() as f64
    }
}

/// Accumulates round outcomes into a report.
pub struct Recorder {
    n: usize,
    initial: Femtojoules,
    hop_time: f64,
    round_duration: f64,
    series: Vec<RoundRecord>,
    consumed: Vec<Femtojoules>,
    delivered: Vec<Packet>,
    last: Option<RoundOutcome>,
    generated_readings: u64,
    delivered_readings: u64,
    dropped_readings: u64,
    generated_packets: u64,
    delivered_packets: u64,
    dropped_packets: u64,
    routing_failures: u64,
    ledger_exact: bool,
    packets_balanced: bool,
}

impl Recorder {
    pub fn new(n: usize, initial: Femtojoules, hop_time: f64, round_duration: f64) -> Self {
        Recorder {
            n,
            initial,
            hop_time,
            round_duration,
            series: Vec::new(),
            consumed: Vec::new(),
            delivered: Vec::new(),
            last: None,
            generated_readings: 0,
            delivered_readings: 0,
            dropped_readings: 0,
            generated_packets: 0,
            delivered_packets: 0,
            dropped_packets: 0,
            routing_failures: 0,
            ledger_exact: true,
            packets_balanced: true,
        }
    }

    pub fn push(&mut self, out: &RoundOutcome) {
        self.generated_readings += out.readings.generated;
        self.delivered_readings += out.readings.delivered;
        self.dropped_readings += out.readings.dropped;
        self.generated_packets += out.packets.generated;
        self.delivered_packets += out.packets.delivered;
        self.dropped_packets += out.packets.dropped;
        self.routing_failures += out.routing_failures;
        self.ledger_exact &= out.ledger_exact;
        self.packets_balanced &= out.packets_balanced;
        let (mean_delay, mean_hops) = if out.delivered.is_empty() {
            (0.0, 0.0)
        } else {
            let k = out.delivered.len() as f64;
            (
                average_delay(&out.delivered, self.hop_time, self.round_duration),
                out.delivered.iter().map(|p| p.hop_count as f64).sum::<f64>() / k,
            )
        };
        self.series.push(RoundRecord {
            round: out.round,
            alive: out.alive,
            energy_cum: out.energy_cum.joules(),
            delivered_cum: self.delivered_readings,
            generated_cum: self.generated_readings,
            mean_delay,
            mean_hops,
        });
        self.consumed.push(out.energy_cum);
        self.delivered.extend(out.delivered.iter().map(|p| Packet {
            relays: Vec::new(),
            ..p.clone()
        }));
        self.last = Some(RoundOutcome {
            energy_spent: Vec::new(),
            delivered: Vec::new(),
            ..out.clone()
        });
    }

    pub fn finish(self, cap: usize) -> MetricsReport {
        let alive: Vec<usize> = self.series.iter().map(|r| r.alive).collect();
        let hna = lifetime_hna(&alive, self.n, cap);
        let fnd = lifetime_fnd(&alive, self.n, cap);
        let rounds_run = self.series.len();
        let at = if hna.reached { hna.round } else { rounds_run.saturating_sub(1) };
        let consumed = self.consumed.get(at).copied().unwrap_or(Femtojoules::ZERO);
        let wasted = self.initial.saturating_sub(consumed);

        let quartile = (at + 1).div_ceil(4).max(1).min(rounds_run.max(1));
        let early = self.consumed.get(quartile - 1).copied().unwrap_or(Femtojoules::ZERO);
        let rate = early.joules::<f64>() / quartile as f64;
        let analytic = if hna.reached && rounds_run > 0 {
            let e_init = self.initial.joules::<f64>() / self.n as f64;
            analytic_lifetime(self.n, e_init, rate, wasted.joules()).ok()
        } else {
            None
        };
        let last = self.last.as_ref();
        let delivered_packets = self.delivered_packets;
        let avg_hops = if self.delivered.is_empty() {
            0.0
        } else {
            self.delivered.iter().map(|p| p.hop_count as f64).sum::<f64>() / self.delivered.len() as f64
        };

        MetricsReport {
            rounds_run,
            lifetime_hna: hna.round,
            hna_reached: hna.reached,
            lifetime_fnd: fnd.round,
            fnd_reached: fnd.reached,
            total_energy: last.map_or(0.0, |l| l.energy_cum.joules()),
            pdr: pdr(self.delivered_readings, self.generated_readings),
            avg_delay: average_delay(&self.delivered, self.hop_time, self.round_duration),
            avg_hops,
            wasted_energy: wasted.joules(),
            wasted_energy_fj: wasted.0,
            consumed_at_lifetime_fj: consumed.0,
            initial_energy_fj: self.initial.0,
            early_energy_rate: rate,
            analytic_lifetime: analytic,
            generated_readings: self.generated_readings,
            delivered_readings: self.delivered_readings,
            dropped_readings: self.dropped_readings,
            in_flight_readings: last.map_or(0, |l| l.in_flight_readings),
            generated_packets: self.generated_packets,
            delivered_packets,
            dropped_packets: self.dropped_packets,
            in_flight_packets: last.map_or(0, |l| l.in_flight_packets),
            routing_failures: self.routing_failures,
            ledger_exact: self.ledger_exact,
            packets_balanced: self.packets_balanced,
            series: self.series,
        }
    }
}

impl MetricsReport {
    /// The per-round series as CSV.
    pub fn series_csv(&self) -> String {
        let mut s = String::from("round,alive,energy_cum,delivered_cum,mean_delay\n");
        for r in &self.series {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                r.round, r.alive, r.energy_cum, r.delivered_cum, r.mean_delay
            ));
        }
        s
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        Some(match name {
            "total_energy" => self.total_energy,
            "lifetime_hna" => self.lifetime_hna as f64,
            "lifetime_fnd" => self.lifetime_fnd as f64,
            "avg_delay" => self.avg_delay,
            "pdr" => self.pdr,
            "avg_hops" => self.avg_hops,
            "wasted_energy" => self.wasted_energy,
            _ => return None,
        })
    }
}
