//! CAN playback of simulated drives.
//!
//! A small DBC subset describes how vehicle signals are bit-packed into
//! frames. [`convert_trace`] resamples a drive trace and encodes it into
//! timestamped [`PlaybackRecord`]s, which can be stored as CSV and streamed
//! to a byte sink (file or TCP) in a fixed binary framing.

mod codec;
mod convert;
mod dbc;
mod playback;

use thiserror::Error;

pub use codec::{decode_raw, decode_signal, encode_raw, encode_signal, RangePolicy};
pub use convert::{convert_trace, MappingEntry, SignalMapping, TraceField, DEFAULT_SAMPLE_PERIOD_MS};
pub use dbc::{parse_dbc, ByteOrder, CanDatabase, CanMessageDef, CanSignalDef, DEFAULT_DBC, EXTENDED_ID_FLAG};
pub use playback::{
    decode_frames, encode_frames, open_sink, playback, playback_tests, read_playback_csv, read_playback_csv_from,
    write_playback_csv, write_playback_csv_to, LatencyStats, Pacing, PlaybackRecord, TransmissionReport, CSV_HEADER,
};

#[derive(Debug, Error)]
pub enum CanError {
    #[error("dbc line {line}: {message}")]
    DbcSyntax { line: usize, message: String },
    #[error("dbc line {line}: signals {first} and {second} of {message} overlap")]
    OverlappingSignals {
        line: usize,
        message: String,
        first: String,
        second: String,
    },
    #[error("dbc line {line}: signal {signal} does not fit in {dlc} data bytes")]
    SignalOutOfFrame { line: usize, signal: String, dlc: u8 },
    #[error("invalid signal {signal}: {reason}")]
    InvalidSignal { signal: String, reason: String },
    #[error("value {value} of {signal} is outside [{min}, {max}]")]
    ValueOutOfRange { signal: String, value: f64, min: f64, max: f64 },
    #[error("signal mapping: {0}")]
    Mapping(String),
    #[error("playback csv line {line}: {message}")]
    CsvFormat { line: usize, message: String },
    #[error("binary playback at byte {offset}: {message}")]
    FrameFormat { offset: usize, message: String },
    #[error("invalid playback record {index}: {message}")]
    InvalidRecord { index: usize, message: String },
    #[error("sink failed after {frames_sent} frames: {source}")]
    Sink {
        frames_sent: usize,
        #[source]
        source: std::io::Error,
    },
    #[error("unsupported sink target {0:?}; expected file://<path> or tcp://<host>:<port>")]
    SinkTarget(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
