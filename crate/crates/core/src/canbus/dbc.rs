use serde::{Deserialize, Serialize};

use super::codec::bit_position;
use super::CanError;

/// Set on a frame id to mark a 29-bit identifier, as in DBC files.
pub const EXTENDED_ID_FLAG: u32 = 0x8000_0000;

/// Built-in database used when no DBC file is given.
pub const DEFAULT_DBC: &str = r#"VERSION ""

BU_: SIM PLAYER

BO_ 256 VEHICLE_DYNAMICS: 8 SIM
 SG_ speed_kmh : 0|16@1+ (0.01,0) [0|655.35] "km/h" PLAYER

BO_ 257 STEERING: 8 SIM
 SG_ angle_deg : 0|16@1- (0.1,0) [-3276.8|3276.7] "deg" PLAYER

BO_ 258 PEDALS: 8 SIM
 SG_ throttle_pct : 0|8@1+ (0.5,0) [0|100] "%" PLAYER
 SG_ brake_pct : 8|8@1+ (0.5,0) [0|100] "%" PLAYER
"#;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ByteOrder {
    /// Intel: bits fill upward from `start_bit`, LSB first.
    LittleEndian,
    /// Motorola: `start_bit` names the MSB; bits run downward within a
    /// byte and continue at bit 7 of the next byte.
    BigEndian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanSignalDef {
    pub name: String,
    pub start_bit: u8,
    pub bit_length: u8,
    pub byte_order: ByteOrder,
    pub signed: bool,
    pub scale: f64,
    pub offset: f64,
    /// `min == max == 0` means the full raw range, as DBC tools write it.
    pub min: f64,
    pub max: f64,
    pub unit: String,
}

impl CanSignalDef {
    /// Inclusive raw limits of the field.
    pub fn raw_limits(&self) -> (i128, i128) {
        let n = self.bit_length as u32;
        if self.signed {
            (-(1i128 << (n - 1)), (1i128 << (n - 1)) - 1)
        } else {
            (0, (1i128 << n) - 1)
        }
    }

    /// Physical range enforced by the encoder.
    pub fn physical_range(&self) -> (f64, f64) {
        if self.min == 0.0 && self.max == 0.0 {
            let (lo, hi) = self.raw_limits();
            let (a, b) = (lo as f64 * self.scale + self.offset, hi as f64 * self.scale + self.offset);
            (a.min(b), a.max(b))
        } else {
            (self.min, self.max)
        }
    }

    /// Frame bit positions (`byte * 8 + bit`) indexed by raw bit, LSB first;
    /// `None` if the field leaves the 8-byte frame.
    pub fn bit_positions(&self) -> Option<Vec<u32>> {
        (0..self.bit_length as u32).map(|i| bit_position(self, i)).collect()
    }

    /// Checks everything except frame placement.
    pub fn validate(&self) -> Result<(), String> {
        if !(1..=64).contains(&self.bit_length) {
            return Err(format!("bit length {} outside 1..=64", self.bit_length));
        }
        if self.start_bit > 63 {
            return Err(format!("start bit {} outside 0..=63", self.start_bit));
        }
        if !self.scale.is_finite() || self.scale == 0.0 || !self.offset.is_finite() {
            return Err("scale must be finite and non-zero, offset finite".into());
        }
        if !self.min.is_finite() || !self.max.is_finite() || self.min > self.max {
            return Err(format!("invalid range [{}|{}]", self.min, self.max));
        }
        let (lo, hi) = self.raw_limits();
        for v in [self.min, self.max] {
            let raw = ((v - self.offset) / self.scale).round();
            if raw < lo as f64 || raw > hi as f64 {
                return Err(format!(
                    "value {v} needs raw {raw}, outside the {}-bit range",
                    self.bit_length
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanMessageDef {
    /// 11-bit or 29-bit identifier, without the extended flag.
    pub id: u32,
    pub extended: bool,
    pub name: String,
    pub dlc: u8,
    pub sender: String,
    pub signals: Vec<CanSignalDef>,
}

impl CanMessageDef {
    /// Identifier as written to playback files; extended ids carry
    /// [`EXTENDED_ID_FLAG`].
    pub fn frame_id(&self) -> u32 {
        if self.extended {
            self.id | EXTENDED_ID_FLAG
        } else {
            self.id
        }
    }

    pub fn signal(&self, name: &str) -> Option<&CanSignalDef> {
        self.signals.iter().find(|s| s.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanDatabase {
    pub messages: Vec<CanMessageDef>,
}

impl Default for CanDatabase {
    fn default() -> Self {
        parse_dbc(DEFAULT_DBC).expect("built-in database parses")
    }
}

impl CanDatabase {
    pub fn message(&self, name: &str) -> Option<&CanMessageDef> {
        self.messages.iter().find(|m| m.name == name)
    }

    pub fn by_frame_id(&self, frame_id: u32) -> Option<&CanMessageDef> {
        self.messages.iter().find(|m| m.frame_id() == frame_id)
    }
}

fn syntax(line: usize, message: impl Into<String>) -> CanError {
    CanError::DbcSyntax {
        line,
        message: message.into(),
    }
}

/// Parses the `BO_`/`SG_` subset of the DBC format. Other line kinds are
/// skipped; every definition is validated as it is read.
pub fn parse_dbc(text: &str) -> Result<CanDatabase, CanError> {
    let mut messages: Vec<CanMessageDef> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        match trimmed.split_whitespace().next() {
            Some("BO_") => {
                let m = parse_message(&trimmed[3..]).map_err(|e| syntax(line, e))?;
                if messages.iter().any(|o| o.frame_id() == m.frame_id()) {
                    return Err(syntax(line, format!("duplicate message id {}", m.id)));
                }
                if messages.iter().any(|o| o.name == m.name) {
                    return Err(syntax(line, format!("duplicate message name {}", m.name)));
                }
                messages.push(m);
            }
            Some("SG_") => {
                let Some(m) = messages.last_mut() else {
                    return Err(syntax(line, "signal before any message"));
                };
                let s = parse_signal(&trimmed[3..]).map_err(|e| syntax(line, e))?;
                s.validate().map_err(|e| syntax(line, format!("signal {}: {e}", s.name)))?;
                if m.signal(&s.name).is_some() {
                    return Err(syntax(line, format!("duplicate signal {} in {}", s.name, m.name)));
                }
                let bits = match s.bit_positions() {
                    Some(b) if b.iter().all(|&p| p < m.dlc as u32 * 8) => b,
                    _ => {
                        return Err(CanError::SignalOutOfFrame {
                            line,
                            signal: s.name,
                            dlc: m.dlc,
                        })
                    }
                };
                for other in &m.signals {
                    let taken = other.bit_positions().expect("validated");
                    if bits.iter().any(|b| taken.contains(b)) {
                        return Err(CanError::OverlappingSignals {
                            line,
                            message: m.name.clone(),
                            first: other.name.clone(),
                            second: s.name,
                        });
                    }
                }
                m.signals.push(s);
            }
            _ => {}
        }
    }
    Ok(CanDatabase { messages })
}

// `<id> <name>: <dlc> <sender>`
fn parse_message(rest: &str) -> Result<CanMessageDef, String> {
    let (head, tail) = rest.split_once(':').ok_or("expected ':' after the message name")?;
    let head: Vec<&str> = head.split_whitespace().collect();
    let [id, name] = head[..] else {
        return Err("expected `BO_ <id> <name>:`".into());
    };
    let id: u32 = id.parse().map_err(|_| format!("bad message id {id:?}"))?;
    let extended = id & EXTENDED_ID_FLAG != 0;
    let id = id & !EXTENDED_ID_FLAG;
    if (!extended && id > 0x7FF) || id > 0x1FFF_FFFF {
        return Err(format!("message id {id:#X} does not fit its identifier format"));
    }
    let mut tail = tail.split_whitespace();
    let dlc = tail.next().ok_or("missing dlc")?;
    let dlc: u8 = dlc.parse().ok().filter(|&d| d <= 8).ok_or(format!("bad dlc {dlc:?}"))?;
    Ok(CanMessageDef {
        id,
        extended,
        name: name.to_string(),
        dlc,
        sender: tail.next().unwrap_or("").to_string(),
        signals: Vec::new(),
    })
}

fn between<'a>(s: &'a str, open: char, close: char, what: &str) -> Result<(&'a str, &'a str), String> {
    let s = s.trim_start();
    let body = s.strip_prefix(open).ok_or(format!("expected {what}"))?;
    let end = body.find(close).ok_or(format!("unterminated {what}"))?;
    Ok((&body[..end], &body[end + 1..]))
}

fn number(s: &str, what: &str) -> Result<f64, String> {
    s.trim().parse().map_err(|_| format!("bad {what} {s:?}"))
}

// `<name> : <start>|<len>@<endian><sign> (<scale>,<offset>) [<min>|<max>] "<unit>" <receivers>`
fn parse_signal(rest: &str) -> Result<CanSignalDef, String> {
    let (head, tail) = rest.split_once(':').ok_or("expected ':' after the signal name")?;
    let head: Vec<&str> = head.split_whitespace().collect();
    let name = match head[..] {
        [name] => name,
        [_, _] => return Err("multiplexed signals are not supported".into()),
        _ => return Err("expected `SG_ <name> :`".into()),
    };
    let tail = tail.trim_start();
    let layout_end = tail.find(char::is_whitespace).unwrap_or(tail.len());
    let (layout, tail) = tail.split_at(layout_end);
    let bad_layout = || format!("bad bit layout {layout:?}, expected <start>|<len>@<0|1><+|->");
    let (start, rest) = layout.split_once('|').ok_or_else(bad_layout)?;
    let (len, order) = rest.split_once('@').ok_or_else(bad_layout)?;
    let start_bit: u8 = start.parse().map_err(|_| bad_layout())?;
    let bit_length: u8 = len.parse().map_err(|_| bad_layout())?;
    let byte_order = match order.as_bytes().first() {
        Some(b'1') => ByteOrder::LittleEndian,
        Some(b'0') => ByteOrder::BigEndian,
        _ => return Err(bad_layout()),
    };
    let signed = match &order[1..] {
        "+" => false,
        "-" => true,
        _ => return Err(bad_layout()),
    };
    let (factors, tail) = between(tail, '(', ')', "(<scale>,<offset>)")?;
    let (scale, offset) = factors.split_once(',').ok_or("expected (<scale>,<offset>)")?;
    let (range, tail) = between(tail, '[', ']', "[<min>|<max>]")?;
    let (min, max) = range.split_once('|').ok_or("expected [<min>|<max>]")?;
    let (unit, _receivers) = between(tail, '"', '"', "quoted unit")?;
    Ok(CanSignalDef {
        name: name.to_string(),
        start_bit,
        bit_length,
        byte_order,
        signed,
        scale: number(scale, "scale")?,
        offset: number(offset, "offset")?,
        min: number(min, "minimum")?,
        max: number(max, "maximum")?,
        unit: unit.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_single_speed_signal() {
        let db = parse_dbc(
            "BO_ 256 VEHICLE_DYNAMICS: 8 ECU\n SG_ speed_kmh : 0|16@1+ (0.01,0) [0|655.35] \"km/h\" X\n",
        )
        .unwrap();
        assert_eq!(db.messages.len(), 1);
        let m = &db.messages[0];
        assert_eq!((m.id, m.extended, m.dlc, m.sender.as_str()), (0x100, false, 8, "ECU"));
        let s = &m.signals[0];
        assert_eq!(
            (s.start_bit, s.bit_length, s.byte_order, s.signed),
            (0, 16, ByteOrder::LittleEndian, false)
        );
        assert_eq!((s.scale, s.offset, s.min, s.max, s.unit.as_str()), (0.01, 0.0, 0.0, 655.35, "km/h"));
    }

    #[test]
    fn empty_text_is_empty_database() {
        assert!(parse_dbc("").unwrap().messages.is_empty());
    }

    #[test]
    fn unknown_lines_are_skipped() {
        let db = parse_dbc("VERSION \"1\"\nNS_ :\n\tCM_\nBU_: A B\nBO_TX_BU_ 1 : A;\nCM_ \"hi\";\n").unwrap();
        assert!(db.messages.is_empty());
    }

    #[test]
    fn overlapping_signals_rejected() {
        let text = "BO_ 1 M: 8 A\n SG_ a : 0|4@1+ (1,0) [0|15] \"\" B\n SG_ b : 0|1@1+ (1,0) [0|1] \"\" B\n";
        match parse_dbc(text) {
            Err(CanError::OverlappingSignals { line, first, second, .. }) => {
                assert_eq!((line, first.as_str(), second.as_str()), (3, "a", "b"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn signal_beyond_dlc_rejected() {
        let text = "BO_ 1 M: 2 A\n SG_ a : 8|16@1+ (1,0) [0|0] \"\" B\n";
        assert!(matches!(parse_dbc(text), Err(CanError::SignalOutOfFrame { line: 2, dlc: 2, .. })));
        // Motorola field starting at bit 0 runs into the following byte
        let text = "BO_ 1 M: 1 A\n SG_ a : 0|2@0+ (1,0) [0|0] \"\" B\n";
        assert!(matches!(parse_dbc(text), Err(CanError::SignalOutOfFrame { .. })));
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        for (text, want) in [
            ("\n\nBO_ x M: 8 A\n", 3),
            ("BO_ 1 M: 8 A\n SG_ a : 0|16@2+ (1,0) [0|1] \"\" B\n", 2),
            ("BO_ 1 M: 8 A\n SG_ a : 0|16@1+ (1,0) [0|1 \"\" B\n", 2),
            ("SG_ a : 0|8@1+ (1,0) [0|1] \"\" B\n", 1),
            ("BO_ 1 M: 9 A\n", 1),
            ("BO_ 4096 M: 8 A\n", 1),
            ("BO_ 1 M: 8 A\n SG_ a : 0|8@1+ (1,0) [0|300] \"\" B\n", 2),
            ("BO_ 1 M: 8 A\n SG_ a m1 : 0|8@1+ (1,0) [0|1] \"\" B\n", 2),
            ("BO_ 1 M: 8 A\nBO_ 1 N: 8 A\n", 2),
        ] {
            match parse_dbc(text) {
                Err(CanError::DbcSyntax { line, .. }) => assert_eq!(line, want, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn extended_ids_keep_their_flag() {
        let db = parse_dbc("BO_ 2147484672 EXT: 8 A\n").unwrap();
        let m = &db.messages[0];
        assert_eq!((m.id, m.extended, m.frame_id()), (0x400, true, 0x8000_0400));
    }

    #[test]
    fn default_database_layout() {
        let db = CanDatabase::default();
        let ids: Vec<u32> = db.messages.iter().map(|m| m.id).collect();
        assert_eq!(ids, [0x100, 0x101, 0x102]);
        assert!(db.message("STEERING").unwrap().signal("angle_deg").unwrap().signed);
        assert_eq!(db.message("PEDALS").unwrap().signals.len(), 2);
    }

    #[test]
    fn zero_range_means_full_raw_range() {
        let s = CanSignalDef {
            name: "x".into(),
            start_bit: 0,
            bit_length: 8,
            byte_order: ByteOrder::LittleEndian,
            signed: true,
            scale: 0.5,
            offset: 1.0,
            min: 0.0,
            max: 0.0,
            unit: String::new(),
        };
        assert_eq!(s.physical_range(), (-63.0, 64.5));
    }
}
