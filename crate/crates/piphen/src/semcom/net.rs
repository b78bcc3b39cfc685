//! Discrete-event network simulator with exact byte and busy-time
//! accounting. The clock is integer microseconds and only ever advances by
//! processing events, never by wall time.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::SemcomError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkConfig {
    pub latency_us: u64,
    pub bandwidth_bytes_per_sec: u64,
}

impl Default for LinkConfig {
    fn default() -> Self {
        // 10 ms latency, 10 MB/s: the default inter-robot link
        LinkConfig { latency_us: 10_000, bandwidth_bytes_per_sec: 10_000_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LinkStats {
    pub bytes_sent: u64,
    pub bytes_delivered: u64,
    pub busy_us: u64,
    pub messages: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetMessage {
    pub src: u32,
    pub dst: u32,
    pub payload: Vec<u8>,
    pub enqueue_us: u64,
    pub delivery_us: u64,
}

#[derive(Debug, Clone)]
struct Link {
    config: LinkConfig,
    busy_until_us: u64,
    stats: LinkStats,
}

/// Single-threaded event queue over point-to-point links.
#[derive(Debug, Clone, Default)]
pub struct NetSim {
    now_us: u64,
    links: BTreeMap<(u32, u32), Link>,
    /// (delivery time, send sequence, message) — the sort key makes
    /// delivery order deterministic.
    in_flight: Vec<(u64, u64, NetMessage)>,
    seq: u64,
}

impl NetSim {
    pub fn new() -> Self {
        NetSim::default()
    }

    pub fn now_us(&self) -> u64 {
        self.now_us
    }

    pub fn add_link(&mut self, src: u32, dst: u32, config: LinkConfig) -> Result<(), SemcomError> {
        if config.bandwidth_bytes_per_sec == 0 {
            return Err(SemcomError::Invalid("link bandwidth must be positive".into()));
        }
        self.links.insert((src, dst), Link { config, busy_until_us: 0, stats: LinkStats::default() });
        Ok(())
    }

    /// Transmission duration in whole microseconds, rounded up.
    fn tx_us(config: &LinkConfig, bytes: u64) -> u64 {
        (bytes * 1_000_000).div_ceil(config.bandwidth_bytes_per_sec)
    }

    /// Enqueue a message at the current simulated time. The link serializes:
    /// transmission starts when the link is free, and delivery lands at
    /// transmission end plus propagation latency. Returns the delivery time.
    pub fn net_send(&mut self, src: u32, dst: u32, payload: Vec<u8>) -> Result<u64, SemcomError> {
        let link = self
            .links
            .get_mut(&(src, dst))
            .ok_or(SemcomError::NoLink { src, dst })?;
        let enqueue_us = self.now_us;
        let tx_start = enqueue_us.max(link.busy_until_us);
        let tx = Self::tx_us(&link.config, payload.len() as u64);
        let tx_end = tx_start + tx;
        let delivery_us = tx_end + link.config.latency_us;
        link.busy_until_us = tx_end;
        link.stats.bytes_sent += payload.len() as u64;
        link.stats.busy_us += tx;
        link.stats.messages += 1;
        self.in_flight.push((
            delivery_us,
            self.seq,
            NetMessage { src, dst, payload, enqueue_us, delivery_us },
        ));
        self.seq += 1;
        Ok(delivery_us)
    }

    /// Deliver every in-flight message in (time, send order) and advance the
    /// clock to the last delivery.
    pub fn net_run(&mut self) -> Vec<NetMessage> {
        self.in_flight.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut out = Vec::with_capacity(self.in_flight.len());
        for (time, _, msg) in self.in_flight.drain(..) {
            self.now_us = self.now_us.max(time);
            let link = self.links.get_mut(&(msg.src, msg.dst)).expect("link existed at send");
            link.stats.bytes_delivered += msg.payload.len() as u64;
            out.push(msg);
        }
        out
    }

    /// Advance the clock without traffic (local compute time).
    pub fn advance(&mut self, us: u64) {
        self.now_us += us;
    }

    pub fn stats(&self, src: u32, dst: u32) -> Option<LinkStats> {
        self.links.get(&(src, dst)).map(|l| l.stats)
    }

    /// Cumulative stats over all links.
    pub fn total_stats(&self) -> LinkStats {
        let mut total = LinkStats::default();
        for link in self.links.values() {
            total.bytes_sent += link.stats.bytes_sent;
            total.bytes_delivered += link.stats.bytes_delivered;
            total.busy_us += link.stats.busy_us;
            total.messages += link.stats.messages;
        }
        total
    }

    /// Utilized fraction of a link's bandwidth over a trailing window ending
    /// at the current clock. Clamped to [0, 1].
    pub fn load(&self, src: u32, dst: u32, window_us: u64) -> f64 {
        match self.links.get(&(src, dst)) {
            Some(link) if window_us > 0 => {
                let busy = link.busy_until_us.min(self.now_us + window_us);
                let start = self.now_us;
                let pending = busy.saturating_sub(start);
                (pending as f64 / window_us as f64).min(1.0)
            }
            _ => 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sim_with_link(latency_us: u64, bw: u64) -> NetSim {
        let mut sim = NetSim::new();
        sim.add_link(1, 2, LinkConfig { latency_us, bandwidth_bytes_per_sec: bw }).unwrap();
        sim
    }

    #[test]
    fn delivery_time_formula() {
        // 10 ms latency, 2 MB at 1 MB/s -> t + 2010 ms
        let mut sim = sim_with_link(10_000, 1_000_000);
        let t = sim.net_send(1, 2, vec![0u8; 2_000_000]).unwrap();
        assert_eq!(t, 2_010_000);
    }

    #[test]
    fn zero_size_message_takes_latency_only() {
        let mut sim = sim_with_link(5_000, 1_000_000);
        sim.advance(100);
        let t = sim.net_send(1, 2, vec![]).unwrap();
        assert_eq!(t, 100 + 5_000);
    }

    #[test]
    fn one_link_serializes_messages() {
        let mut sim = sim_with_link(1_000, 1_000);
        // each message takes 1 s of transmission
        let t1 = sim.net_send(1, 2, vec![0u8; 1_000]).unwrap();
        let t2 = sim.net_send(1, 2, vec![0u8; 1_000]).unwrap();
        let first_tx_end = t1 - 1_000;
        assert!(t2 - 1_000 >= first_tx_end + 1_000_000);
        assert_eq!(t2, 2_001_000);
    }

    #[test]
    fn accounting_balances_and_ordering_is_deterministic() {
        let mut sim = NetSim::new();
        sim.add_link(1, 2, LinkConfig::default()).unwrap();
        sim.add_link(2, 1, LinkConfig::default()).unwrap();
        sim.net_send(1, 2, vec![1; 100]).unwrap();
        sim.net_send(2, 1, vec![2; 300]).unwrap();
        sim.net_send(1, 2, vec![3; 200]).unwrap();
        let delivered = sim.net_run();
        assert_eq!(delivered.len(), 3);
        assert!(delivered.windows(2).all(|w| w[0].delivery_us <= w[1].delivery_us));
        let total = sim.total_stats();
        assert_eq!(total.bytes_sent, 600);
        assert_eq!(total.bytes_delivered, total.bytes_sent);
        // at 10 MB/s: 100 B = 10 us tx, 300 B = 30 us, 200 B = 20 us (queued)
        assert_eq!(
            delivered.iter().map(|m| m.delivery_us).collect::<Vec<_>>(),
            vec![10_010, 10_030, 10_030]
        );
        // ties broken by send order
        assert_eq!(delivered[1].src, 2);
        assert_eq!(delivered[2].src, 1);
    }

    #[test]
    fn missing_link_and_zero_bandwidth_rejected() {
        let mut sim = NetSim::new();
        assert!(sim
            .add_link(1, 2, LinkConfig { latency_us: 0, bandwidth_bytes_per_sec: 0 })
            .is_err());
        assert!(matches!(
            sim.net_send(3, 4, vec![1]),
            Err(SemcomError::NoLink { src: 3, dst: 4 })
        ));
    }

    #[test]
    fn clock_advances_only_by_events() {
        let mut sim = sim_with_link(1_000, 1_000_000);
        assert_eq!(sim.now_us(), 0);
        sim.net_send(1, 2, vec![0; 500]).unwrap();
        assert_eq!(sim.now_us(), 0);
        sim.net_run();
        assert_eq!(sim.now_us(), 1_500);
    }
}
