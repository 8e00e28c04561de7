use core::net::Ipv4Addr;

/// Which gateway bound a packet crosses: `Outgoing` is LAN -> Internet,
/// `Incoming` is Internet -> LAN.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    Outgoing,
    Incoming,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Outgoing => "outgoing",
            Direction::Incoming => "incoming",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Protocol {
    Tcp,
    Udp,
}

impl Protocol {
    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Tcp => "tcp",
            Protocol::Udp => "udp",
        }
    }
}

/// Smallest and largest frame the data path carries, in bytes.
pub const MIN_PACKET: u32 = 64;
pub const MAX_PACKET: u32 = 1500;

/// Simulated time in microseconds.
pub type Micros = u64;

/// One unit of traffic crossing the gateway.
///
/// `flow` is an opaque tag assigned by whoever generates the packet (the
/// simulator uses the source index); the engine never interprets it.
/// `enqueued_at` is stamped by the engine when the packet is accepted into a
/// group queue and stays `None` for packets that never made it that far.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Packet {
    pub src_addr: Ipv4Addr,
    pub dst_addr: Ipv4Addr,
    pub src_port: u16,
    pub dst_port: u16,
    pub protocol: Protocol,
    pub size: u32,
    pub flow: u32,
    pub created_at: Micros,
    pub enqueued_at: Option<Micros>,
}

impl Packet {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        src_addr: Ipv4Addr,
        dst_addr: Ipv4Addr,
        src_port: u16,
        dst_port: u16,
        protocol: Protocol,
        size: u32,
        flow: u32,
        created_at: Micros,
    ) -> Self {
        debug_assert!(
            (MIN_PACKET..=MAX_PACKET).contains(&size),
            "packet size {size} outside {MIN_PACKET}..={MAX_PACKET}"
        );
        Packet {
            src_addr,
            dst_addr,
            src_port,
            dst_port,
            protocol,
            size,
            flow,
            created_at,
            enqueued_at: None,
        }
    }

    /// The well-known (server-side) port of the packet's connection, if any:
    /// the smaller port when both are below 1024, otherwise whichever one is.
    /// Connections between two ephemeral ports have none.
    pub fn well_known_port(&self) -> Option<u16> {
        match (self.src_port < 1024, self.dst_port < 1024) {
            (true, true) => Some(self.src_port.min(self.dst_port)),
            (true, false) => Some(self.src_port),
            (false, true) => Some(self.dst_port),
            (false, false) => None,
        }
    }
}
