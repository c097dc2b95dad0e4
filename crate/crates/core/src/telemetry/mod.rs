//! Vest-to-host UDP protocol, datagram reception, and session recordings.

mod packet;
mod recording;
mod stream;

pub use packet::{decode_packet, encode_packet, Packet, MAGIC, PACKET_LEN, VERSION};
pub use recording::{
    read_recording, read_recording_file, record_session, replay_session, write_recording, RecordedSample,
    RecordingWriter, Replay, HEADER, HEADER_WITH_ORIENTATION,
};
pub use stream::{
    receive_stream, spawn_receiver, DatagramSource, DropOldestQueue, IdleTimeoutSource, PacketQueue, StreamStats,
    StreamTracker, DEFAULT_PORT,
};
