//! OSC wire format, message schema and UDP transport.

pub mod codec;
pub mod schema;
pub mod transport;

pub use codec::{decode, encode, DecodeError, EncodeError, OscArg, OscMessage};
pub use schema::{address, AppMessage, OutboundNote, SchemaError};
pub use transport::{process_datagram, OscReceiver, OscSender, StatsSnapshot, TransportStats, MAX_DATAGRAM};
