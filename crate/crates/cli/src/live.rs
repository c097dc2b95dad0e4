//! Live UDP ingestion shared by `listen` and `run`: one receiver thread, a
//! bounded queue, and an order gate in front of the consumer.

use std::net::{IpAddr, UdpSocket};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, OnceLock};
use std::thread::JoinHandle;
use std::time::Duration;

use anyhow::{Context, Result};
use equilivest::telemetry::{spawn_receiver, IdleTimeoutSource, PacketQueue, StreamStats};
use equilivest::{ImuSample, OrientationState};

/// Raised by Ctrl-C; the receiver polls it.
pub fn stop_flag() -> Arc<AtomicBool> {
    static FLAG: OnceLock<Arc<AtomicBool>> = OnceLock::new();
    FLAG.get_or_init(|| {
        let flag = Arc::new(AtomicBool::new(false));
        let f = flag.clone();
        // a second handler cannot be installed; interruption just stays unavailable
        let _ = ctrlc::set_handler(move || f.store(true, Ordering::Relaxed));
        flag
    })
    .clone()
}

pub struct LiveSession {
    queue: Arc<PacketQueue>,
    receiver: JoinHandle<equilivest::Result<StreamStats>>,
}

impl LiveSession {
    pub fn start(bind: IpAddr, port: u16, idle_timeout: Option<Duration>, capacity: usize) -> Result<Self> {
        let socket = UdpSocket::bind((bind, port)).with_context(|| format!("cannot bind udp {bind}:{port}"))?;
        let local_addr = socket.local_addr()?;
        let source = IdleTimeoutSource::new(socket, idle_timeout, stop_flag()).map_err(equilivest::Error::Transport)?;
        let queue = Arc::new(PacketQueue::new(capacity.max(1)));
        let receiver = spawn_receiver(source, queue.clone());
        eprintln!("listening on {local_addr}");
        Ok(Self { queue, receiver })
    }

    pub fn next(&self) -> Option<(ImuSample, Option<OrientationState>)> {
        self.queue.pop()
    }

    pub fn finish(self) -> Result<(StreamStats, u64)> {
        let stats = self.receiver.join().map_err(|_| anyhow::anyhow!("receiver thread panicked"))??;
        Ok((stats, self.queue.overflowed()))
    }
}

/// Passes samples whose sequence number and timestamp both advance, so the
/// accepted stream is always a valid recording.
#[derive(Debug, Default)]
pub struct OrderGate {
    last: Option<(u32, u64)>,
    pub skipped: u64,
}

impl OrderGate {
    pub fn admit(&mut self, s: &ImuSample) -> bool {
        let ok = self.last.is_none_or(|(seq, t)| s.seq > seq && s.t_ms >= t);
        if ok {
            self.last = Some((s.seq, s.t_ms));
        } else {
            self.skipped += 1;
        }
        ok
    }
}

pub fn print_stats(stats: &StreamStats, overflowed: u64, skipped: u64, accepted: usize) {
    println!("packets_received = {}", stats.packets_received);
    println!("packets_dropped = {}", stats.packets_dropped);
    println!("packets_reordered = {}", stats.packets_reordered);
    println!("packets_rejected = {}", stats.packets_rejected);
    println!("queue_overflowed = {overflowed}");
    println!("samples_skipped = {skipped}");
    println!("samples_accepted = {accepted}");
}
