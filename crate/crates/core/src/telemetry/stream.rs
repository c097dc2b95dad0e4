use std::collections::VecDeque;
use std::io;
use std::net::UdpSocket;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::types::{ImuSample, OrientationState};

use super::packet::decode_packet;

pub const DEFAULT_PORT: u16 = 5005;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StreamStats {
    pub packets_received: u64,
    /// Sum of forward sequence gaps. A late packet that later fills a gap is
    /// counted as reordered and does not reduce this.
    pub packets_dropped: u64,
    /// Packets whose sequence number is not above the highest seen,
    /// duplicates included.
    pub packets_reordered: u64,
    /// Datagrams failing the length, magic, version or CRC checks.
    pub packets_rejected: u64,
}

/// Sequence accounting for an incoming datagram stream.
#[derive(Debug, Clone, Default)]
pub struct StreamTracker {
    stats: StreamStats,
    max_seq: Option<u32>,
}

impl StreamTracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn stats(&self) -> StreamStats {
        self.stats
    }

    /// Decodes one datagram and updates the counters. Returns the decoded
    /// packet, or `None` when it was rejected.
    pub fn ingest(&mut self, datagram: &[u8]) -> Option<(ImuSample, Option<OrientationState>)> {
        match decode_packet(datagram) {
            Ok(decoded) => {
                self.observe_seq(decoded.0.seq);
                Some(decoded)
            }
            Err(_) => {
                self.stats.packets_rejected += 1;
                None
            }
        }
    }

    pub fn observe_seq(&mut self, seq: u32) {
        self.stats.packets_received += 1;
        match self.max_seq {
            None => self.max_seq = Some(seq),
            Some(max) if seq > max => {
                self.stats.packets_dropped += u64::from(seq - max - 1);
                self.max_seq = Some(seq);
            }
            Some(_) => self.stats.packets_reordered += 1,
        }
    }
}

/// Anything that yields datagrams. `Ok(None)` ends the stream (timeout or
/// source exhausted).
pub trait DatagramSource {
    fn recv_datagram(&mut self, buf: &mut [u8]) -> io::Result<Option<usize>>;
}

impl DatagramSource for UdpSocket {
    fn recv_datagram(&mut self, buf: &mut [u8]) -> io::Result<Option<usize>> {
        match self.recv(buf) {
            Ok(n) => Ok(Some(n)),
            Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => Ok(None),
            Err(e) => Err(e),
        }
    }
}

impl<I: Iterator<Item = Vec<u8>>> DatagramSource for std::iter::Fuse<I> {
    fn recv_datagram(&mut self, buf: &mut [u8]) -> io::Result<Option<usize>> {
        Ok(self.next().map(|d| {
            let n = d.len().min(buf.len());
            buf[..n].copy_from_slice(&d[..n]);
            n
        }))
    }
}

/// A UDP socket that ends its stream after `idle` without traffic or once
/// `stop` is raised. Without an idle limit it runs until stopped.
pub struct IdleTimeoutSource {
    socket: UdpSocket,
    idle: Option<Duration>,
    stop: Arc<AtomicBool>,
    last_activity: Instant,
}

const POLL: Duration = Duration::from_millis(50);

impl IdleTimeoutSource {
    pub fn new(socket: UdpSocket, idle: Option<Duration>, stop: Arc<AtomicBool>) -> io::Result<Self> {
        socket.set_read_timeout(Some(idle.map_or(POLL, |d| d.min(POLL).max(Duration::from_millis(1)))))?;
        Ok(Self { socket, idle, stop, last_activity: Instant::now() })
    }
}

impl DatagramSource for IdleTimeoutSource {
    fn recv_datagram(&mut self, buf: &mut [u8]) -> io::Result<Option<usize>> {
        loop {
            if self.stop.load(Ordering::Relaxed) {
                return Ok(None);
            }
            match self.socket.recv_datagram(buf)? {
                Some(n) => {
                    self.last_activity = Instant::now();
                    return Ok(Some(n));
                }
                None => {
                    if self.idle.is_some_and(|idle| self.last_activity.elapsed() >= idle) {
                        return Ok(None);
                    }
                }
            }
        }
    }
}

/// Forwards every valid packet to `sink` in arrival order until the source
/// ends. Malformed datagrams are counted, never fatal.
pub fn receive_stream<S, F>(source: &mut S, mut sink: F) -> Result<StreamStats>
where
    S: DatagramSource + ?Sized,
    F: FnMut(ImuSample, Option<OrientationState>),
{
    let mut tracker = StreamTracker::new();
    // larger than any valid packet so oversized datagrams fail the length check
    let mut buf = [0u8; 2048];
    while let Some(n) = source.recv_datagram(&mut buf).map_err(Error::Transport)? {
        if let Some((sample, orientation)) = tracker.ingest(&buf[..n]) {
            sink(sample, orientation);
        }
    }
    Ok(tracker.stats())
}

#[derive(Debug)]
struct QueueState<T> {
    items: VecDeque<T>,
    closed: bool,
    overflowed: u64,
}

/// Bounded FIFO between the receiver and the processing task. When full,
/// the oldest item is discarded and counted.
#[derive(Debug)]
pub struct DropOldestQueue<T> {
    capacity: usize,
    state: Mutex<QueueState<T>>,
    ready: Condvar,
}

impl<T> DropOldestQueue<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "queue capacity must be positive");
        Self {
            capacity,
            state: Mutex::new(QueueState { items: VecDeque::with_capacity(capacity), closed: false, overflowed: 0 }),
            ready: Condvar::new(),
        }
    }

    pub fn push(&self, item: T) {
        let mut st = self.state.lock().unwrap();
        if st.items.len() == self.capacity {
            st.items.pop_front();
            st.overflowed += 1;
        }
        st.items.push_back(item);
        self.ready.notify_one();
    }

    /// Blocks until an item arrives; `None` once closed and drained.
    pub fn pop(&self) -> Option<T> {
        let mut st = self.state.lock().unwrap();
        loop {
            if let Some(item) = st.items.pop_front() {
                return Some(item);
            }
            if st.closed {
                return None;
            }
            st = self.ready.wait(st).unwrap();
        }
    }

    pub fn close(&self) {
        self.state.lock().unwrap().closed = true;
        self.ready.notify_all();
    }

    pub fn overflowed(&self) -> u64 {
        self.state.lock().unwrap().overflowed
    }
}

pub type PacketQueue = DropOldestQueue<(ImuSample, Option<OrientationState>)>;

/// Runs [`receive_stream`] on its own thread, feeding `queue`. The queue is
/// closed when the source ends or fails.
pub fn spawn_receiver<S>(mut source: S, queue: Arc<PacketQueue>) -> JoinHandle<Result<StreamStats>>
where
    S: DatagramSource + Send + 'static,
{
    thread::spawn(move || {
        let result = receive_stream(&mut source, |s, o| queue.push((s, o)));
        queue.close();
        result
    })
}
