use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::net::TcpStream;
use std::path::Path;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::CanError;

pub const CSV_HEADER: &str = "timestamp_ms,can_id_hex,dlc,data_hex";

/// One timestamped frame; the DLC is `data.len()`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlaybackRecord {
    pub timestamp_ms: u32,
    /// Frame id; extended ids carry [`super::EXTENDED_ID_FLAG`].
    pub can_id: u32,
    pub data: Vec<u8>,
}

impl PlaybackRecord {
    pub fn dlc(&self) -> u8 {
        self.data.len() as u8
    }
}

fn check_records(records: &[PlaybackRecord]) -> Result<(), CanError> {
    for (index, r) in records.iter().enumerate() {
        if r.data.len() > 8 {
            return Err(CanError::InvalidRecord {
                index,
                message: format!("{} data bytes", r.data.len()),
            });
        }
        if index > 0 && r.timestamp_ms < records[index - 1].timestamp_ms {
            return Err(CanError::InvalidRecord {
                index,
                message: "timestamp decreases".into(),
            });
        }
    }
    Ok(())
}

/// Lines look like `1000,100,8,1027000000000000`: decimal timestamp,
/// uppercase hex id, decimal DLC, uppercase hex data.
pub fn write_playback_csv_to<W: Write>(records: &[PlaybackRecord], mut out: W) -> Result<(), CanError> {
    check_records(records)?;
    let mut line = String::with_capacity(48);
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        line.clear();
        write!(line, "{},{:X},{},", r.timestamp_ms, r.can_id, r.dlc()).expect("string write");
        for b in &r.data {
            write!(line, "{b:02X}").expect("string write");
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_playback_csv(records: &[PlaybackRecord], path: impl AsRef<Path>) -> Result<(), CanError> {
    write_playback_csv_to(records, BufWriter::new(File::create(path)?))
}

fn digits(s: &str, radix: u32, max_len: usize) -> bool {
    !s.is_empty() && s.len() <= max_len && s.chars().all(|c| c.is_digit(radix))
}

fn parse_line(text: &str, line: usize) -> Result<PlaybackRecord, CanError> {
    let err = |message: String| CanError::CsvFormat { line, message };
    let fields: Vec<&str> = text.split(',').collect();
    let [ts, id, dlc, data] = fields[..] else {
        return Err(err(format!("expected 4 fields, found {}", fields.len())));
    };
    let timestamp_ms = Some(ts)
        .filter(|s| digits(s, 10, 10))
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| err(format!("bad timestamp {ts:?}")))?;
    let can_id = Some(id)
        .filter(|s| digits(s, 16, 8))
        .and_then(|s| u32::from_str_radix(s, 16).ok())
        .ok_or_else(|| err(format!("bad can id {id:?}")))?;
    let dlc: usize = Some(dlc)
        .filter(|s| digits(s, 10, 1))
        .and_then(|s| s.parse().ok())
        .filter(|&d| d <= 8)
        .ok_or_else(|| err(format!("bad dlc {dlc:?}")))?;
    if data.len() != 2 * dlc || !data.chars().all(|c| c.is_ascii_hexdigit()) {
        return Err(err(format!("data {data:?} is not {dlc} hex bytes")));
    }
    let data = (0..dlc)
        .map(|i| u8::from_str_radix(&data[2 * i..2 * i + 2], 16).expect("hex checked"))
        .collect();
    Ok(PlaybackRecord {
        timestamp_ms,
        can_id,
        data,
    })
}

pub fn read_playback_csv_from<R: BufRead>(input: R) -> Result<Vec<PlaybackRecord>, CanError> {
    let mut lines = input.lines();
    match lines.next().transpose()? {
        Some(h) if h.trim_end_matches('\r') == CSV_HEADER => {}
        Some(h) => {
            return Err(CanError::CsvFormat {
                line: 1,
                message: format!("expected header {CSV_HEADER:?}, found {h:?}"),
            })
        }
        None => {
            return Err(CanError::CsvFormat {
                line: 1,
                message: "missing header".into(),
            })
        }
    }
    let mut records: Vec<PlaybackRecord> = Vec::new();
    for (i, text) in lines.enumerate() {
        let line = i + 2;
        let r = parse_line(text?.trim_end_matches('\r'), line)?;
        if records.last().is_some_and(|p| r.timestamp_ms < p.timestamp_ms) {
            return Err(CanError::CsvFormat {
                line,
                message: "timestamp decreases".into(),
            });
        }
        records.push(r);
    }
    Ok(records)
}

pub fn read_playback_csv(path: impl AsRef<Path>) -> Result<Vec<PlaybackRecord>, CanError> {
    read_playback_csv_from(BufReader::new(File::open(path)?))
}

fn push_frame(r: &PlaybackRecord, out: &mut Vec<u8>) {
    out.extend_from_slice(&r.timestamp_ms.to_le_bytes());
    out.extend_from_slice(&r.can_id.to_le_bytes());
    out.push(r.dlc());
    out.extend_from_slice(&r.data);
}

/// Wire framing: timestamp (u32 LE), id (u32 LE), DLC byte, data.
pub fn encode_frames(records: &[PlaybackRecord]) -> Result<Vec<u8>, CanError> {
    check_records(records)?;
    let mut out = Vec::with_capacity(records.len() * 17);
    for r in records {
        push_frame(r, &mut out);
    }
    Ok(out)
}

pub fn decode_frames(bytes: &[u8]) -> Result<Vec<PlaybackRecord>, CanError> {
    let mut records = Vec::new();
    let mut at = 0;
    while at < bytes.len() {
        let err = |message: &str| CanError::FrameFormat {
            offset: at,
            message: message.into(),
        };
        let header = bytes.get(at..at + 9).ok_or_else(|| err("truncated frame header"))?;
        let dlc = header[8] as usize;
        if dlc > 8 {
            return Err(err("dlc above 8"));
        }
        let data = bytes.get(at + 9..at + 9 + dlc).ok_or_else(|| err("truncated frame data"))?;
        records.push(PlaybackRecord {
            timestamp_ms: u32::from_le_bytes(header[0..4].try_into().expect("4 bytes")),
            can_id: u32::from_le_bytes(header[4..8].try_into().expect("4 bytes")),
            data: data.to_vec(),
        });
        at += 9 + dlc;
    }
    Ok(records)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pacing {
    #[default]
    AsFastAsPossible,
    /// Sleeps so frames leave at their recorded offsets from the first frame.
    RealTime,
}

impl std::str::FromStr for Pacing {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fast" | "as_fast_as_possible" | "as-fast-as-possible" => Ok(Pacing::AsFastAsPossible),
            "realtime" | "real_time" | "real-time" => Ok(Pacing::RealTime),
            other => Err(format!("unknown pacing {other:?}; expected fast or realtime")),
        }
    }
}

/// Per-test wall time of framing plus transmission, in milliseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub tests: usize,
    pub mean_ms: f64,
    pub min_ms: f64,
    pub max_ms: f64,
}

impl LatencyStats {
    pub fn from_samples(ms: &[f64]) -> LatencyStats {
        if ms.is_empty() {
            return LatencyStats::default();
        }
        LatencyStats {
            tests: ms.len(),
            mean_ms: ms.iter().sum::<f64>() / ms.len() as f64,
            min_ms: ms.iter().copied().fold(f64::INFINITY, f64::min),
            max_ms: ms.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TransmissionReport {
    pub frames_sent: usize,
    pub bytes_sent: usize,
    pub conversion_time_stats: LatencyStats,
}

/// Opens `file://<path>` (created or truncated) or `tcp://<host>:<port>`.
pub fn open_sink(target: &str) -> Result<Box<dyn Write + Send>, CanError> {
    if let Some(path) = target.strip_prefix("file://") {
        Ok(Box::new(File::create(path)?))
    } else if let Some(addr) = target.strip_prefix("tcp://") {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        Ok(Box::new(stream))
    } else {
        Err(CanError::SinkTarget(target.to_string()))
    }
}

/// Streams several tests back to back; each test is one latency sample
/// and, under real-time pacing, starts its own clock.
pub fn playback_tests<'a, I>(tests: I, sink: &mut dyn Write, pacing: Pacing) -> Result<TransmissionReport, CanError>
where
    I: IntoIterator<Item = &'a [PlaybackRecord]>,
{
    let mut report = TransmissionReport::default();
    let mut samples = Vec::new();
    let mut frame = Vec::with_capacity(17);
    for records in tests {
        check_records(records)?;
        let Some(first) = records.first() else { continue };
        let started = Instant::now();
        for r in records {
            if pacing == Pacing::RealTime {
                let due = started + Duration::from_millis((r.timestamp_ms - first.timestamp_ms) as u64);
                if let Some(wait) = due.checked_duration_since(Instant::now()) {
                    std::thread::sleep(wait);
                }
            }
            frame.clear();
            push_frame(r, &mut frame);
            sink.write_all(&frame).map_err(|source| CanError::Sink {
                frames_sent: report.frames_sent,
                source,
            })?;
            report.frames_sent += 1;
            report.bytes_sent += frame.len();
        }
        sink.flush().map_err(|source| CanError::Sink {
            frames_sent: report.frames_sent,
            source,
        })?;
        samples.push(started.elapsed().as_secs_f64() * 1000.0);
    }
    report.conversion_time_stats = LatencyStats::from_samples(&samples);
    Ok(report)
}

pub fn playback(records: &[PlaybackRecord], sink: &mut dyn Write, pacing: Pacing) -> Result<TransmissionReport, CanError> {
    playback_tests([records], sink, pacing)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(ts: u32, id: u32, data: &[u8]) -> PlaybackRecord {
        PlaybackRecord {
            timestamp_ms: ts,
            can_id: id,
            data: data.to_vec(),
        }
    }

    #[test]
    fn csv_line_format() {
        let mut out = Vec::new();
        write_playback_csv_to(&[rec(0, 0x100, &[0x10, 0x27, 0, 0, 0, 0, 0, 0]), rec(20, 0x1AB, &[])], &mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "timestamp_ms,can_id_hex,dlc,data_hex\n0,100,8,1027000000000000\n20,1AB,0,\n"
        );
    }

    #[test]
    fn csv_errors_name_the_line() {
        for (text, want) in [
            ("", 1),
            ("ts,id\n", 1),
            ("timestamp_ms,can_id_hex,dlc,data_hex\n5,1,1,00\n4,1,1,00\n", 3),
            ("timestamp_ms,can_id_hex,dlc,data_hex\n5,1,2,00\n", 2),
            ("timestamp_ms,can_id_hex,dlc,data_hex\n5,1,9,000000000000000000\n", 2),
            ("timestamp_ms,can_id_hex,dlc,data_hex\n5,G,1,00\n", 2),
            ("timestamp_ms,can_id_hex,dlc,data_hex\n5,1,1\n", 2),
            ("timestamp_ms,can_id_hex,dlc,data_hex\n-5,1,1,00\n", 2),
        ] {
            match read_playback_csv_from(text.as_bytes()) {
                Err(CanError::CsvFormat { line, .. }) => assert_eq!(line, want, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn unsorted_records_are_refused() {
        let r = [rec(5, 1, &[]), rec(4, 1, &[])];
        assert!(matches!(encode_frames(&r), Err(CanError::InvalidRecord { index: 1, .. })));
        assert!(write_playback_csv_to(&r, Vec::new()).is_err());
    }

    #[test]
    fn binary_framing_layout() {
        let bytes = encode_frames(&[rec(0x0102_0304, 0x8000_0400, &[0xAA, 0xBB])]).unwrap();
        assert_eq!(bytes, [4, 3, 2, 1, 0, 4, 0, 0x80, 2, 0xAA, 0xBB]);
        assert!(matches!(decode_frames(&bytes[..10]), Err(CanError::FrameFormat { offset: 0, .. })));
    }

    #[test]
    fn empty_playback() {
        let mut sink = Vec::new();
        let r = playback(&[], &mut sink, Pacing::AsFastAsPossible).unwrap();
        assert_eq!(r, TransmissionReport::default());
        assert!(sink.is_empty());
    }

    struct Failing {
        budget: usize,
    }

    impl Write for Failing {
        fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
            if self.budget < buf.len() {
                return Err(std::io::Error::new(std::io::ErrorKind::BrokenPipe, "closed"));
            }
            self.budget -= buf.len();
            Ok(buf.len())
        }

        fn flush(&mut self) -> std::io::Result<()> {
            Ok(())
        }
    }

    #[test]
    fn closed_sink_reports_frames_sent() {
        let records: Vec<_> = (0..10).map(|i| rec(i, 0x100, &[0; 8])).collect();
        let mut sink = Failing { budget: 17 * 4 + 5 };
        match playback(&records, &mut sink, Pacing::AsFastAsPossible) {
            Err(CanError::Sink { frames_sent, .. }) => assert_eq!(frames_sent, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn realtime_pacing_honours_gaps() {
        let records = [rec(100, 1, &[1]), rec(130, 1, &[2]), rec(160, 1, &[3])];
        let mut sink = Vec::new();
        let t = Instant::now();
        let r = playback(&records, &mut sink, Pacing::RealTime).unwrap();
        assert!(t.elapsed() >= Duration::from_millis(60));
        assert_eq!(r.frames_sent, 3);
        assert_eq!(decode_frames(&sink).unwrap(), records);
        assert_eq!(r.conversion_time_stats.tests, 1);
    }

    #[test]
    fn file_sink_and_bad_target() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.bin");
        let records = [rec(0, 0x100, &[1, 2, 3])];
        {
            let mut sink = open_sink(&format!("file://{}", path.display())).unwrap();
            playback(&records, &mut *sink, Pacing::AsFastAsPossible).unwrap();
        }
        assert_eq!(std::fs::read(&path).unwrap(), encode_frames(&records).unwrap());
        assert!(matches!(open_sink("can0"), Err(CanError::SinkTarget(_))));
    }
}
