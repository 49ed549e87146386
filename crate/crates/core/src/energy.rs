//! First-order radio energy model and exact battery accounting.
//!
//! Transmission cost is `l * e_elec + l * eps * d^n` with the free-space
//! amplifier (`n = 2`) below the crossover distance and the two-ray
//! amplifier (`n = 4`) at or above it. Reception costs `l * e_elec`.
//!
//! Batteries are tracked in integer femtojoules so that the per-node
//! residuals and the global debit ledger always balance exactly.

use std::ops::{Add, AddAssign, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Scalar};
use crate::topology::NodeState;

/// Radio constants of the first-order model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(
    default,
    deny_unknown_fields,
    bound(serialize = "T: Serialize", deserialize = "T: Scalar + Deserialize<'de>")
)]
pub struct RadioParams<T> {
    /// Electronics energy per bit, J/bit.
    pub e_elec: T,
    /// Free-space amplifier, J/bit/m^2.
    pub eps_freespace: T,
    /// Two-ray amplifier, J/bit/m^4.
    pub eps_tworay: T,
    /// Data aggregation energy per bit, J/bit.
    pub e_da: T,
    /// Crossover distance, m.
    pub d0: T,
}

impl<T: Scalar> RadioParams<T> {
    /// Crossover distance at which both amplifier branches cost the same.
    pub fn crossover(eps_freespace: T, eps_tworay: T) -> T {
        (eps_freespace / eps_tworay).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("radio.e_elec", self.e_elec),
            ("radio.eps_freespace", self.eps_freespace),
            ("radio.eps_tworay", self.eps_tworay),
            ("radio.e_da", self.e_da),
            ("radio.d0", self.d0),
        ];
        for (name, v) in fields {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::invalid(name, "must be strictly positive"));
            }
        }
        let derived = Self::crossover(self.eps_freespace, self.eps_tworay);
        if ((self.d0 - derived) / derived).abs() > lit(1e-3) {
            return Err(Error::invalid(
                "radio.d0",
                format!(
                    "must equal sqrt(eps_freespace / eps_tworay) = {} within 1e-3 relative",
                    derived
                ),
            ));
        }
        Ok(())
    }
}

impl<T: Scalar> Default for RadioParams<T> {
    /// 50 nJ/bit electronics, 10 pJ/bit/m^2 and 0.0013 pJ/bit/m^4 amplifiers,
    /// 5 nJ/bit aggregation. `d0` is derived from the amplifiers (87.7058 m).
    fn default() -> Self {
        let eps_freespace = lit(10e-12);
        let eps_tworay = lit(0.0013e-12);
        RadioParams {
            e_elec: lit(50e-9),
            eps_freespace,
            eps_tworay,
            e_da: lit(5e-9),
            d0: Self::crossover(eps_freespace, eps_tworay),
        }
    }
}

fn non_negative<T: Scalar>(what: &'static str, v: T) -> Result<()> {
    if v < T::zero() || v.is_nan() {
        Err(Error::Negative {
            what,
            value: to_f64(v),
        })
    } else {
        Ok(())
    }
}

/// Energy to send `bits` over `distance` metres.
pub fn tx_energy<T: Scalar>(bits: T, distance: T, p: &RadioParams<T>) -> Result<T> {
    non_negative("bits", bits)?;
    non_negative("distance", distance)?;
    let amp = if distance < p.d0 {
        p.eps_freespace * distance * distance
    } else {
        let d2 = distance * distance;
        p.eps_tworay * d2 * d2
    };
    Ok(bits * p.e_elec + bits * amp)
}

/// Energy to receive `bits`.
pub fn rx_energy<T: Scalar>(bits: T, p: &RadioParams<T>) -> Result<T> {
    non_negative("bits", bits)?;
    Ok(p.e_elec * bits)
}

/// Energy to aggregate `bits` of received payload.
pub fn aggregation_energy<T: Scalar>(bits: T, p: &RadioParams<T>) -> Result<T> {
    non_negative("bits", bits)?;
    Ok(p.e_da * bits)
}

/// An exact amount of energy in femtojoules (1e-15 J).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Femtojoules(pub u64);

impl Femtojoules {
    pub const ZERO: Femtojoules = Femtojoules(0);
    const PER_JOULE: f64 = 1e15;

    /// Rounds a non-negative joule amount to the nearest femtojoule.
    pub fn from_joules<T: Scalar>(j: T) -> Self {
        let v = to_f64(j);
        if !(v > 0.0) {
            return Femtojoules(0);
        }
        Femtojoules((v * Self::PER_JOULE).round() as u64)
    }

    pub fn joules<T: Scalar>(self) -> T {
        lit(self.0 as f64 / Self::PER_JOULE)
    }

    pub fn saturating_sub(self, rhs: Self) -> Self {
        Femtojoules(self.0.saturating_sub(rhs.0))
    }
}

impl Add for Femtojoules {
    type Output = Femtojoules;
    fn add(self, rhs: Self) -> Self {
        Femtojoules(self.0 + rhs.0)
    }
}

impl AddAssign for Femtojoules {
    fn add_assign(&mut self, rhs: Self) {
        self.0 += rhs.0;
    }
}

impl Sub for Femtojoules {
    type Output = Femtojoules;
    fn sub(self, rhs: Self) -> Self {
        Femtojoules(self.0 - rhs.0)
    }
}

impl std::iter::Sum for Femtojoules {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Femtojoules::ZERO, Add::add)
    }
}

/// Result of a battery debit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Debit {
    /// Energy actually removed from the battery.
    pub charged: Femtojoules,
    /// False when the battery ran dry before the full amount was paid; the
    /// radio operation that requested it did not complete.
    pub complete: bool,
}

/// Removes `amount` joules from `node`, clamping at zero.
///
/// A node that reaches zero is dead. Dead nodes are never charged.
pub fn debit<T: Scalar>(node: &mut NodeState<T>, amount: T) -> Debit {
    debit_exact(node, Femtojoules::from_joules(amount))
}

pub fn debit_exact<T>(node: &mut NodeState<T>, amount: Femtojoules) -> Debit {
    if node.residual == Femtojoules::ZERO {
        return Debit {
            charged: Femtojoules::ZERO,
            complete: amount == Femtojoules::ZERO,
        };
    }
    let charged = amount.min(node.residual);
    node.residual = node.residual - charged;
    Debit {
        charged,
        complete: charged == amount && node.residual > Femtojoules::ZERO,
    }
}

/// What a debit paid for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Charge {
    Transmit,
    Receive,
    Aggregate,
    Control,
    Idle,
}

/// Running totals of every debit, by category.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EnergyLedger {
    pub transmit: Femtojoules,
    pub receive: Femtojoules,
    pub aggregate: Femtojoules,
    pub control: Femtojoules,
    pub idle: Femtojoules,
}

impl EnergyLedger {
    pub fn record(&mut self, kind: Charge, amount: Femtojoules) {
        let slot = match kind {
            Charge::Transmit => &mut self.transmit,
            Charge::Receive => &mut self.receive,
            Charge::Aggregate => &mut self.aggregate,
            Charge::Control => &mut self.control,
            Charge::Idle => &mut self.idle,
        };
        *slot += amount;
    }

    pub fn total(&self) -> Femtojoules {
        self.transmit + self.receive + self.aggregate + self.control + self.idle
    }
}
