//! Message framing, channel abstractions and byte/frame accounting.
//!
//! The wire format is bit-exact: a 1-byte message type, a 4-byte big-endian
//! payload length, then the payload. Channels come in three kinds: in-memory
//! pairs for tests and single-process runs, TCP streams, and a token-bucket
//! throttled wrapper emulating constrained bandwidth.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::sync::mpsc;
use std::time::{Duration, Instant};
use thiserror::Error;

pub const FRAME_HEADER_BYTES: usize = 5;

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("peer closed the channel")]
    Closed,
    #[error("unknown message type {0:#04x}")]
    UnknownType(u8),
    #[error("truncated frame: need {needed} bytes, have {have}")]
    Truncated { needed: usize, have: usize },
    #[error("payload too large: {0} bytes")]
    PayloadTooLarge(usize),
    #[error("expected {expected:?} frame, got {got:?}")]
    UnexpectedType { expected: MsgType, got: MsgType },
    #[error("peer aborted the protocol: {0}")]
    PeerAbort(String),
}

/// Registered frame types.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum MsgType {
    OtR2S = 0x01,
    OtS2R = 0x02,
    MaskedVec = 0x03,
    Rho2 = 0x04,
    OprfRAndAPrime = 0x05,
    DealerVole = 0x06,
    PrfVec = 0x07,
    ShareVec = 0x08,
    Keyx = 0x09,
    Control = 0x0A,
}

impl MsgType {
    pub fn from_byte(b: u8) -> Option<MsgType> {
        use MsgType::*;
        Some(match b {
            0x01 => OtR2S,
            0x02 => OtS2R,
            0x03 => MaskedVec,
            0x04 => Rho2,
            0x05 => OprfRAndAPrime,
            0x06 => DealerVole,
            0x07 => PrfVec,
            0x08 => ShareVec,
            0x09 => Keyx,
            0x0A => Control,
            _ => return None,
        })
    }

    pub const ALL: [MsgType; 10] = [
        MsgType::OtR2S,
        MsgType::OtS2R,
        MsgType::MaskedVec,
        MsgType::Rho2,
        MsgType::OprfRAndAPrime,
        MsgType::DealerVole,
        MsgType::PrfVec,
        MsgType::ShareVec,
        MsgType::Keyx,
        MsgType::Control,
    ];
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub msg_type: MsgType,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(msg_type: MsgType, payload: Vec<u8>) -> Frame {
        Frame { msg_type, payload }
    }

    pub fn encoded_len(&self) -> usize {
        FRAME_HEADER_BYTES + self.payload.len()
    }
}

pub fn frame_encode(f: &Frame) -> Result<Vec<u8>, TransportError> {
    if f.payload.len() > u32::MAX as usize {
        return Err(TransportError::PayloadTooLarge(f.payload.len()));
    }
    let mut out = Vec::with_capacity(f.encoded_len());
    out.push(f.msg_type as u8);
    out.extend_from_slice(&(f.payload.len() as u32).to_be_bytes());
    out.extend_from_slice(&f.payload);
    Ok(out)
}

/// Decodes one frame, consuming exactly header + length bytes.
pub fn frame_decode(bytes: &[u8]) -> Result<(Frame, usize), TransportError> {
    if bytes.len() < FRAME_HEADER_BYTES {
        return Err(TransportError::Truncated {
            needed: FRAME_HEADER_BYTES,
            have: bytes.len(),
        });
    }
    let msg_type = MsgType::from_byte(bytes[0]).ok_or(TransportError::UnknownType(bytes[0]))?;
    let len = u32::from_be_bytes([bytes[1], bytes[2], bytes[3], bytes[4]]) as usize;
    let total = FRAME_HEADER_BYTES + len;
    if bytes.len() < total {
        return Err(TransportError::Truncated {
            needed: total,
            have: bytes.len(),
        });
    }
    Ok((
        Frame {
            msg_type,
            payload: bytes[FRAME_HEADER_BYTES..total].to_vec(),
        },
        total,
    ))
}

/// Monotone byte and per-type frame counters for one endpoint.
#[derive(Clone, Debug, Default)]
pub struct ChannelStats {
    pub bytes_sent: u64,
    pub bytes_received: u64,
    pub frames_sent: HashMap<MsgType, u64>,
    pub frames_received: HashMap<MsgType, u64>,
    /// Payload bytes (headers excluded) per message type.
    pub payload_sent: HashMap<MsgType, u64>,
    pub payload_received: HashMap<MsgType, u64>,
}

impl ChannelStats {
    fn on_send(&mut self, f: &Frame) {
        self.bytes_sent += f.encoded_len() as u64;
        *self.frames_sent.entry(f.msg_type).or_insert(0) += 1;
        *self.payload_sent.entry(f.msg_type).or_insert(0) += f.payload.len() as u64;
    }

    fn on_recv(&mut self, f: &Frame) {
        self.bytes_received += f.encoded_len() as u64;
        *self.frames_received.entry(f.msg_type).or_insert(0) += 1;
        *self.payload_received.entry(f.msg_type).or_insert(0) += f.payload.len() as u64;
    }

    pub fn payload_sent_of(&self, t: MsgType) -> u64 {
        self.payload_sent.get(&t).copied().unwrap_or(0)
    }

    pub fn payload_received_of(&self, t: MsgType) -> u64 {
        self.payload_received.get(&t).copied().unwrap_or(0)
    }

    pub fn received_of(&self, t: MsgType) -> u64 {
        self.frames_received.get(&t).copied().unwrap_or(0)
    }

    pub fn sent_of(&self, t: MsgType) -> u64 {
        self.frames_sent.get(&t).copied().unwrap_or(0)
    }

    /// Message types ever received on this endpoint.
    pub fn received_types(&self) -> Vec<MsgType> {
        let mut v: Vec<MsgType> = self
            .frames_received
            .iter()
            .filter(|(_, &c)| c > 0)
            .map(|(&t, _)| t)
            .collect();
        v.sort_by_key(|t| *t as u8);
        v
    }
}

/// Ordered, reliable, bidirectional frame delivery.
pub trait Channel: Send {
    fn send(&mut self, frame: Frame) -> Result<(), TransportError>;
    fn recv(&mut self) -> Result<Frame, TransportError>;
    fn stats(&self) -> ChannelStats;
}

/// Receives a frame and insists on its type; a Control frame from the peer
/// is surfaced as a protocol abort.
pub fn expect_frame(chan: &mut dyn Channel, expected: MsgType) -> Result<Vec<u8>, TransportError> {
    let f = chan.recv()?;
    if f.msg_type == MsgType::Control && expected != MsgType::Control {
        return Err(TransportError::PeerAbort(
            String::from_utf8_lossy(&f.payload).into_owned(),
        ));
    }
    if f.msg_type != expected {
        return Err(TransportError::UnexpectedType {
            expected,
            got: f.msg_type,
        });
    }
    Ok(f.payload)
}

/// Sends a Control frame describing why this party is giving up.
pub fn send_abort(chan: &mut dyn Channel, reason: &str) -> Result<(), TransportError> {
    chan.send(Frame::new(MsgType::Control, reason.as_bytes().to_vec()))
}

// ---------------------------------------------------------------------------
// In-memory channel

pub struct MemoryChannel {
    tx: mpsc::Sender<Vec<u8>>,
    rx: mpsc::Receiver<Vec<u8>>,
    stats: ChannelStats,
}

/// Connected pair of in-memory endpoints.
pub fn memory_pair() -> (MemoryChannel, MemoryChannel) {
    let (tx_a, rx_b) = mpsc::channel();
    let (tx_b, rx_a) = mpsc::channel();
    (
        MemoryChannel {
            tx: tx_a,
            rx: rx_a,
            stats: ChannelStats::default(),
        },
        MemoryChannel {
            tx: tx_b,
            rx: rx_b,
            stats: ChannelStats::default(),
        },
    )
}

impl Channel for MemoryChannel {
    fn send(&mut self, frame: Frame) -> Result<(), TransportError> {
        let bytes = frame_encode(&frame)?;
        self.stats.on_send(&frame);
        self.tx.send(bytes).map_err(|_| TransportError::Closed)
    }

    fn recv(&mut self) -> Result<Frame, TransportError> {
        let bytes = self.rx.recv().map_err(|_| TransportError::Closed)?;
        let (frame, consumed) = frame_decode(&bytes)?;
        debug_assert_eq!(consumed, bytes.len());
        self.stats.on_recv(&frame);
        Ok(frame)
    }

    fn stats(&self) -> ChannelStats {
        self.stats.clone()
    }
}

// ---------------------------------------------------------------------------
// TCP channel

pub struct TcpChannel {
    stream: TcpStream,
    stats: ChannelStats,
}

impl TcpChannel {
    pub fn connect<A: ToSocketAddrs>(addr: A) -> Result<TcpChannel, TransportError> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        Ok(TcpChannel {
            stream,
            stats: ChannelStats::default(),
        })
    }

    /// Connects with retries while the listener comes up.
    pub fn connect_retry<A: ToSocketAddrs + Clone>(
        addr: A,
        timeout: Duration,
    ) -> Result<TcpChannel, TransportError> {
        let deadline = Instant::now() + timeout;
        loop {
            match TcpChannel::connect(addr.clone()) {
                Ok(c) => return Ok(c),
                Err(e) if Instant::now() >= deadline => return Err(e),
                Err(_) => std::thread::sleep(Duration::from_millis(50)),
            }
        }
    }

    pub fn accept_one<A: ToSocketAddrs>(addr: A) -> Result<TcpChannel, TransportError> {
        let listener = TcpListener::bind(addr)?;
        let (stream, _) = listener.accept()?;
        stream.set_nodelay(true)?;
        Ok(TcpChannel {
            stream,
            stats: ChannelStats::default(),
        })
    }

    pub fn from_stream(stream: TcpStream) -> Result<TcpChannel, TransportError> {
        stream.set_nodelay(true)?;
        Ok(TcpChannel {
            stream,
            stats: ChannelStats::default(),
        })
    }
}

impl Channel for TcpChannel {
    fn send(&mut self, frame: Frame) -> Result<(), TransportError> {
        let bytes = frame_encode(&frame)?;
        self.stream.write_all(&bytes)?;
        self.stream.flush()?;
        self.stats.on_send(&frame);
        Ok(())
    }

    fn recv(&mut self) -> Result<Frame, TransportError> {
        let mut header = [0u8; FRAME_HEADER_BYTES];
        self.stream.read_exact(&mut header)?;
        let msg_type =
            MsgType::from_byte(header[0]).ok_or(TransportError::UnknownType(header[0]))?;
        let len = u32::from_be_bytes([header[1], header[2], header[3], header[4]]) as usize;
        let mut payload = vec![0u8; len];
        self.stream.read_exact(&mut payload)?;
        let frame = Frame { msg_type, payload };
        self.stats.on_recv(&frame);
        Ok(frame)
    }

    fn stats(&self) -> ChannelStats {
        self.stats.clone()
    }
}

// ---------------------------------------------------------------------------
// Token-bucket throttling

/// Wraps a channel, delaying sends so throughput stays at or below a
/// configured bit rate. Stands in for OS-level traffic control.
pub struct ThrottledChannel<C: Channel> {
    inner: C,
    rate_bits_per_s: u64,
    capacity_bits: f64,
    tokens_bits: f64,
    last_refill: Instant,
}

impl<C: Channel> ThrottledChannel<C> {
    pub fn new(inner: C, rate_bits_per_s: u64) -> ThrottledChannel<C> {
        assert!(rate_bits_per_s > 0);
        // Quarter-second burst capacity.
        let capacity_bits = (rate_bits_per_s as f64 / 4.0).max(8.0 * 64.0 * 1024.0);
        ThrottledChannel {
            inner,
            rate_bits_per_s,
            capacity_bits,
            tokens_bits: capacity_bits,
            last_refill: Instant::now(),
        }
    }

    pub fn rate_bits_per_s(&self) -> u64 {
        self.rate_bits_per_s
    }

    fn take(&mut self, bits: f64) {
        loop {
            let now = Instant::now();
            let elapsed = now.duration_since(self.last_refill).as_secs_f64();
            self.last_refill = now;
            self.tokens_bits =
                (self.tokens_bits + elapsed * self.rate_bits_per_s as f64).min(self.capacity_bits);
            if self.tokens_bits >= bits {
                self.tokens_bits -= bits;
                return;
            }
            let deficit = bits - self.tokens_bits;
            let wait = deficit / self.rate_bits_per_s as f64;
            std::thread::sleep(Duration::from_secs_f64(wait.min(0.05).max(0.0005)));
        }
    }
}

impl<C: Channel> Channel for ThrottledChannel<C> {
    fn send(&mut self, frame: Frame) -> Result<(), TransportError> {
        // Large frames are paid for in chunks so the pacing stays smooth
        // even when a frame exceeds the bucket capacity.
        let total_bits = 8.0 * frame.encoded_len() as f64;
        let chunk = self.capacity_bits / 2.0;
        let mut remaining = total_bits;
        while remaining > 0.0 {
            let step = remaining.min(chunk);
            self.take(step);
            remaining -= step;
        }
        self.inner.send(frame)
    }

    fn recv(&mut self) -> Result<Frame, TransportError> {
        self.inner.recv()
    }

    fn stats(&self) -> ChannelStats {
        self.inner.stats()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_roundtrip_empty_and_large() {
        for payload in [Vec::new(), vec![0xAB; 1 << 20]] {
            let f = Frame::new(MsgType::MaskedVec, payload);
            let bytes = frame_encode(&f).unwrap();
            assert_eq!(bytes.len(), f.encoded_len());
            let (g, consumed) = frame_decode(&bytes).unwrap();
            assert_eq!(consumed, bytes.len());
            assert_eq!(g, f);
        }
    }

    #[test]
    fn frame_decode_rejects_unknown_type_and_truncation() {
        let mut bytes = frame_encode(&Frame::new(MsgType::Rho2, vec![1, 2, 3])).unwrap();
        bytes[0] = 0x7F;
        assert!(matches!(
            frame_decode(&bytes),
            Err(TransportError::UnknownType(0x7F))
        ));
        bytes[0] = MsgType::Rho2 as u8;
        assert!(matches!(
            frame_decode(&bytes[..6]),
            Err(TransportError::Truncated { .. })
        ));
    }

    #[test]
    fn memory_pair_ordered_delivery_and_stats() {
        let (mut a, mut b) = memory_pair();
        assert_eq!(a.stats().bytes_sent, 0);
        for i in 0..100u8 {
            a.send(Frame::new(MsgType::PrfVec, vec![i])).unwrap();
        }
        for i in 0..100u8 {
            assert_eq!(b.recv().unwrap().payload, vec![i]);
        }
        assert_eq!(a.stats().bytes_sent, 100 * 6);
        assert_eq!(b.stats().bytes_received, 100 * 6);
        assert_eq!(b.stats().received_of(MsgType::PrfVec), 100);
    }

    #[test]
    fn empty_frame_costs_header_only() {
        let (mut a, mut b) = memory_pair();
        a.send(Frame::new(MsgType::Control, Vec::new())).unwrap();
        b.recv().unwrap();
        assert_eq!(a.stats().bytes_sent, 5);
        assert_eq!(b.stats().bytes_received, 5);
    }

    #[test]
    fn tcp_loopback_lossless_ordered() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let server = std::thread::spawn(move || {
            let (stream, _) = listener.accept().unwrap();
            let mut chan = TcpChannel::from_stream(stream).unwrap();
            for _ in 0..10_000 {
                let f = chan.recv().unwrap();
                chan.send(f).unwrap();
            }
        });
        let mut chan = TcpChannel::connect(addr).unwrap();
        for i in 0..10_000u32 {
            chan.send(Frame::new(MsgType::OtS2R, i.to_be_bytes().to_vec()))
                .unwrap();
        }
        for i in 0..10_000u32 {
            assert_eq!(chan.recv().unwrap().payload, i.to_be_bytes());
        }
        server.join().unwrap();
    }

    #[test]
    fn throttle_enforces_rate_lower_bound() {
        // 8 Mbit/s with 1 MiB of payload must take at least ~1 second.
        let (a, mut b) = memory_pair();
        let mut t = ThrottledChannel::new(a, 8_000_000);
        let start = Instant::now();
        let sender = std::thread::spawn(move || {
            for _ in 0..16 {
                t.send(Frame::new(MsgType::MaskedVec, vec![0u8; 65536]))
                    .unwrap();
            }
        });
        for _ in 0..16 {
            b.recv().unwrap();
        }
        sender.join().unwrap();
        let elapsed = start.elapsed();
        let total_bits = 16.0 * (65536.0 + 5.0) * 8.0;
        let ideal = total_bits / 8_000_000.0;
        assert!(
            elapsed.as_secs_f64() >= ideal * 0.70,
            "throttle too loose: {elapsed:?} vs ideal {ideal}"
        );
    }

    #[test]
    fn expect_frame_surfaces_abort() {
        let (mut a, mut b) = memory_pair();
        send_abort(&mut a, "prf collision").unwrap();
        let err = expect_frame(&mut b, MsgType::PrfVec).unwrap_err();
        assert!(matches!(err, TransportError::PeerAbort(ref m) if m == "prf collision"));
    }
}
