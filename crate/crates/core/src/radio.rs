//! Log-distance RSSI with static log-normal shadowing, and the link loss
//! curve derived from it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};
use crate::topology::Position;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(
    default,
    deny_unknown_fields,
    bound(serialize = "T: Serialize", deserialize = "T: Scalar + Deserialize<'de>")
)]
pub struct PropagationParams<T> {
    /// dBm
    pub tx_power: T,
    /// Path loss at 1 m, dB.
    pub ref_loss: T,
    pub path_loss_exponent: T,
    /// Standard deviation of the static shadowing term, dB.
    pub shadowing_sigma: T,
    /// dBm; delivery probability is one half here.
    pub sensitivity_floor: T,
    /// Width of the logistic loss curve, dB.
    pub loss_slope: T,
}

impl<T: Scalar> Default for PropagationParams<T> {
    fn default() -> Self {
        PropagationParams {
            tx_power: lit(0.0),
            ref_loss: lit(40.0),
            path_loss_exponent: lit(2.7),
            shadowing_sigma: lit(4.0),
            sensitivity_floor: lit(-100.0),
            loss_slope: lit(2.0),
        }
    }
}

impl<T: Scalar> PropagationParams<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.path_loss_exponent >= T::one()) {
            return Err(Error::invalid("propagation.path_loss_exponent", "must be >= 1"));
        }
        if !(self.shadowing_sigma >= T::zero()) {
            return Err(Error::invalid("propagation.shadowing_sigma", "must be >= 0"));
        }
        if !(self.sensitivity_floor < self.tx_power - self.ref_loss) {
            return Err(Error::invalid(
                "propagation.sensitivity_floor",
                "must be below tx_power - ref_loss",
            ));
        }
        if !(self.loss_slope > T::zero()) {
            return Err(Error::invalid("propagation.loss_slope", "must be > 0"));
        }
        Ok(())
    }

    /// Received power at the 1 m reference distance, without shadowing.
    pub fn reference_rssi(&self) -> T {
        self.tx_power - self.ref_loss
    }
}

/// Received signal strength in dBm at distance `|a - b|` with the given
/// shadowing offset.
pub fn rssi<T: Scalar>(
    a: Position<T>,
    b: Position<T>,
    p: &PropagationParams<T>,
    shadow: T,
) -> Result<T> {
    let d = a.distance(&b);
    if !(d > T::zero()) {
        return Err(Error::CoincidentPositions);
    }
    Ok(rssi_at(d, p) + shadow)
}

#[inline]
pub(crate) fn rssi_at<T: Scalar>(distance: T, p: &PropagationParams<T>) -> T {
    p.tx_power - p.ref_loss - lit::<T>(10.0) * p.path_loss_exponent * distance.log10()
}

/// Logistic success probability of a single transmission.
pub fn delivery_probability<T: Scalar>(rssi_value: T, p: &PropagationParams<T>) -> T {
    let z = (rssi_value - p.sensitivity_floor) / p.loss_slope;
    T::one() / (T::one() + (-z).exp())
}

/// RSSI above the sensitivity floor, clamped at zero.
pub fn shifted_rssi<T: Scalar>(rssi_value: T, p: &PropagationParams<T>) -> T {
    (rssi_value - p.sensitivity_floor).max(T::zero())
}

/// Shadowing draws frozen per unordered pair of endpoint ids.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShadowField<T> {
    seed: u64,
    sigma: T,
}

impl<T: Scalar> ShadowField<T> {
    pub fn new(seed: u64, sigma: T) -> Self {
        ShadowField { seed, sigma }
    }

    pub fn offset(&self, a: usize, b: usize) -> T {
        if self.sigma == T::zero() {
            return T::zero();
        }
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let key = splitmix(self.seed ^ splitmix((lo as u64) << 32 ^ hi as u64));
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        let z: f64 = StandardNormal.sample(&mut rng);
        self.sigma * lit(z)
    }
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Propagation parameters plus the run's shadowing field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadioModel<T> {
    pub params: PropagationParams<T>,
    pub shadow: ShadowField<T>,
}

impl<T: Scalar> RadioModel<T> {
    pub fn new(params: PropagationParams<T>, seed: u64) -> Self {
        RadioModel {
            params,
            shadow: ShadowField::new(seed, params.shadowing_sigma),
        }
    }

    /// RSSI between two endpoints identified by id (node ids, or ids past
    /// the node range for sinks).
    pub fn rssi_between(
        &self,
        a: usize,
        pa: Position<T>,
        b: usize,
        pb: Position<T>,
    ) -> Result<T> {
        rssi(pa, pb, &self.params, self.shadow.offset(a, b))
    }

    pub fn delivery_probability(&self, rssi_value: T) -> T {
        delivery_probability(rssi_value, &self.params)
    }

    pub fn shifted(&self, rssi_value: T) -> T {
        shifted_rssi(rssi_value, &self.params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn flat() -> PropagationParams<f64> {
        PropagationParams {
            shadowing_sigma: 0.0,
            ..PropagationParams::default()
        }
    }

    #[test]
    fn ten_metres() {
        let r = rssi(Position::new(0.0, 0.0), Position::new(10.0, 0.0), &flat(), 0.0).unwrap();
        assert_relative_eq!(r, -67.0, max_relative = 1e-12);
    }

    #[test]
    fn reference_distance() {
        let p = flat();
        let r = rssi(Position::new(0.0, 0.0), Position::new(0.0, 1.0), &p, 0.0).unwrap();
        assert_relative_eq!(r, p.tx_power - p.ref_loss);
    }

    #[test]
    fn coincident_rejected() {
        let a = Position::new(3.0, 3.0);
        assert_eq!(rssi(a, a, &flat(), 0.0), Err(Error::CoincidentPositions));
    }

    #[test]
    fn shadowing_is_frozen_and_symmetric() {
        let m = RadioModel::new(PropagationParams::<f64>::default(), 99);
        let a = Position::new(0.0, 0.0);
        let b = Position::new(30.0, 40.0);
        let r1 = m.rssi_between(4, a, 9, b).unwrap();
        let r2 = m.rssi_between(4, a, 9, b).unwrap();
        let r3 = m.rssi_between(9, b, 4, a).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(r1, r3);
        assert_ne!(m.shadow.offset(4, 9), m.shadow.offset(4, 10));
    }

    #[test]
    fn loss_curve() {
        let p = flat();
        assert_eq!(delivery_probability(p.sensitivity_floor, &p), 0.5);
        let hi = delivery_probability(p.sensitivity_floor + 20.0, &p);
        assert_relative_eq!(hi, 1.0 / (1.0 + (-10.0f64).exp()), max_relative = 1e-15);
        assert!((hi - 0.99995).abs() < 1e-5);
        assert_eq!(delivery_probability(f64::NEG_INFINITY, &p), 0.0);
    }

    #[test]
    fn shift_clamps() {
        let p = flat();
        assert_eq!(shifted_rssi(-100.0, &p), 0.0);
        assert_eq!(shifted_rssi(-70.0, &p), 30.0);
        assert_eq!(shifted_rssi(-105.0, &p), 0.0);
    }

    #[test]
    fn validation() {
        flat().validate().unwrap();
        let bad = PropagationParams {
            path_loss_exponent: 0.5,
            ..flat()
        };
        assert!(bad.validate().is_err());
        let bad = PropagationParams {
            sensitivity_floor: -30.0,
            ..flat()
        };
        assert!(bad.validate().is_err());
    }
}
