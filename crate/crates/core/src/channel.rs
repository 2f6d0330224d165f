//! Radio link between train transmitters and trackside sensors, modelled as
//! a loss/duplication/fixed-delay process over whole frames.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::controller::SensorId;
use crate::error::ConfigError;
use crate::protocol::EncodedFrame;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelConfig {
    pub loss_prob: f64,
    pub dup_prob: f64,
    pub delay_s: f64,
    pub seed: u64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            loss_prob: 0.0,
            dup_prob: 0.0,
            delay_s: 0.0,
            seed: 0,
        }
    }
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, p) in [("loss_prob", self.loss_prob), ("dup_prob", self.dup_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(ConfigError::new(format!("{name} = {p} not in [0, 1]")));
            }
        }
        if !(self.delay_s.is_finite() && self.delay_s >= 0.0) {
            return Err(ConfigError::new(format!(
                "delay_s = {} must be >= 0",
                self.delay_s
            )));
        }
        Ok(())
    }

    pub fn is_lossless(&self) -> bool {
        self.loss_prob == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Delivery {
    pub frame: EncodedFrame,
    pub sensor: SensorId,
    pub deliver_at: f64,
}

/// One pass of a frame through the link. Returns zero (lost), one or two
/// (duplicated) deliveries, all at `send_time + delay_s`.
pub fn transmit<R: Rng + ?Sized>(
    frame: EncodedFrame,
    sensor: SensorId,
    send_time: f64,
    config: &ChannelConfig,
    rng: &mut R,
) -> Vec<Delivery> {
    // Both draws are always taken so the stream position does not depend on
    // the outcome.
    let lost = rng.random::<f64>() < config.loss_prob;
    let duplicated = rng.random::<f64>() < config.dup_prob;
    if lost {
        return Vec::new();
    }
    let delivery = Delivery {
        frame,
        sensor,
        deliver_at: send_time + config.delay_s,
    };
    if duplicated {
        vec![delivery, delivery]
    } else {
        vec![delivery]
    }
}

/// A configured link with its own seeded random stream.
#[derive(Debug, Clone)]
pub struct Channel {
    config: ChannelConfig,
    rng: ChaCha8Rng,
}

impl Channel {
    pub fn new(config: ChannelConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        Ok(Channel {
            config,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
        })
    }

    pub fn config(&self) -> &ChannelConfig {
        &self.config
    }

    pub fn transmit(
        &mut self,
        frame: EncodedFrame,
        sensor: SensorId,
        send_time: f64,
    ) -> Vec<Delivery> {
        transmit(frame, sensor, send_time, &self.config, &mut self.rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::Side;
    use crate::protocol::{encode_packet, Phase, TrainPacket};
    use proptest::prelude::*;

    fn frame() -> EncodedFrame {
        encode_packet(TrainPacket::new(7, Phase::Head))
    }

    fn sensor() -> SensorId {
        SensorId::new(Side::A, 0)
    }

    fn channel(loss: f64, dup: f64, delay: f64, seed: u64) -> Channel {
        Channel::new(ChannelConfig {
            loss_prob: loss,
            dup_prob: dup,
            delay_s: delay,
            seed,
        })
        .unwrap()
    }

    #[test]
    fn fault_free_link_is_identity_with_delay() {
        let mut ch = channel(0.0, 0.0, 0.25, 1);
        for i in 0..100 {
            let t = i as f64 * 0.5;
            let out = ch.transmit(frame(), sensor(), t);
            assert_eq!(out.len(), 1);
            assert_eq!(out[0].frame, frame());
            assert_eq!(out[0].sensor, sensor());
            assert_eq!(out[0].deliver_at, t + 0.25);
        }
    }

    #[test]
    fn certain_loss_delivers_nothing() {
        let mut ch = channel(1.0, 1.0, 0.0, 9);
        for _ in 0..100 {
            assert!(ch.transmit(frame(), sensor(), 1.0).is_empty());
        }
    }

    #[test]
    fn certain_duplication_delivers_two() {
        let mut ch = channel(0.0, 1.0, 0.0, 9);
        assert_eq!(ch.transmit(frame(), sensor(), 1.0).len(), 2);
    }

    #[test]
    fn loss_rate_matches_configuration() {
        let mut ch = channel(0.3, 0.0, 0.0, 42);
        let n = 10_000;
        let delivered: usize = (0..n)
            .map(|_| ch.transmit(frame(), sensor(), 0.0).len())
            .sum();
        let fraction = delivered as f64 / n as f64;
        assert!(
            (fraction - 0.7).abs() <= 0.02,
            "delivered fraction {fraction}"
        );
    }

    #[test]
    fn rejects_bad_configuration() {
        for cfg in [
            ChannelConfig {
                loss_prob: -0.1,
                ..Default::default()
            },
            ChannelConfig {
                dup_prob: 1.5,
                ..Default::default()
            },
            ChannelConfig {
                delay_s: -1.0,
                ..Default::default()
            },
            ChannelConfig {
                loss_prob: f64::NAN,
                ..Default::default()
            },
        ] {
            assert!(Channel::new(cfg).is_err(), "{cfg:?}");
        }
    }

    proptest! {
        #[test]
        fn deterministic_and_never_early(
            loss in 0.0..=1.0f64,
            dup in 0.0..=1.0f64,
            delay in 0.0..5.0f64,
            seed in any::<u64>(),
            send in 0.0..1000.0f64,
        ) {
            let mut a = channel(loss, dup, delay, seed);
            let mut b = a.clone();
            for _ in 0..20 {
                let da = a.transmit(frame(), sensor(), send);
                let db = b.transmit(frame(), sensor(), send);
                prop_assert_eq!(&da, &db);
                prop_assert!(da.len() <= 2);
                for d in &da {
                    prop_assert!(d.deliver_at >= send);
                    prop_assert_eq!(d.frame, frame());
                }
            }
        }
    }
}
