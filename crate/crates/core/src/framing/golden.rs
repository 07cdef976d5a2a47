//! Golden wire fixtures. The binary files under `fixtures/wire/` are checked
//! in; they must keep decoding to the same fields and re-encoding to the same
//! bytes.

use std::fs;
use std::io;
use std::path::Path;

use super::{decapsulate, decode_ack, encapsulate, encode_ack, NcHeader, PacketKind};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expected {
    Coded { header: NcHeader, segment: Vec<u8> },
    Ack { tid: u8, bid: u8 },
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: &'static str,
    pub expected: Expected,
}

impl Fixture {
    pub fn file_name(&self) -> String {
        format!("{}.bin", self.name)
    }

    pub fn encode(&self) -> Vec<u8> {
        match &self.expected {
            Expected::Coded { header, segment } => {
                encapsulate(header, segment).expect("fixture fields in range")
            }
            Expected::Ack { tid, bid } => encode_ack(*tid, *bid),
        }
    }

    pub fn verify(&self, bytes: &[u8]) -> Result<(), String> {
        match &self.expected {
            Expected::Coded { header, segment } => {
                let (h, s) = decapsulate(bytes).map_err(|e| e.to_string())?;
                if h != *header {
                    return Err(format!("header decoded as {h:?}"));
                }
                if s != &segment[..] {
                    return Err("segment bytes differ".into());
                }
            }
            Expected::Ack { tid, bid } => {
                let got = decode_ack(bytes).map_err(|e| e.to_string())?;
                if got != (*tid, *bid) {
                    return Err(format!("ack decoded as {got:?}"));
                }
            }
        }
        if self.encode() != bytes {
            return Err("re-encoding produced different bytes".into());
        }
        Ok(())
    }
}

fn pattern(len: usize, salt: u8) -> Vec<u8> {
    (0..len)
        .map(|i| (i as u8).wrapping_mul(31).wrapping_add(salt))
        .collect()
}

pub fn fixtures() -> Vec<Fixture> {
    let coded = |name, tid, bid, sid, ns, start, kind, ls, salt| Fixture {
        name,
        expected: Expected::Coded {
            header: NcHeader {
                tid,
                bid,
                sid,
                ns,
                start,
                kind,
            },
            segment: pattern(ls, salt),
        },
    };
    vec![
        coded(
            "systematic_small",
            0,
            0,
            0,
            4,
            Some(0),
            PacketKind::Systematic { segn: 0 },
            11,
            1,
        ),
        coded(
            "systematic_no_start",
            1,
            7,
            2,
            4,
            None,
            PacketKind::Systematic { segn: 2 },
            11,
            2,
        ),
        coded(
            "coded_wrap",
            2,
            255,
            130,
            120,
            None,
            PacketKind::Coded { seed: 1 },
            187,
            3,
        ),
        coded(
            "systematic_1400",
            0,
            42,
            119,
            120,
            Some(1234),
            PacketKind::Systematic { segn: 119 },
            1400,
            4,
        ),
        coded(
            "coded_1400",
            3,
            9,
            200,
            129,
            None,
            PacketKind::Coded { seed: 32_748 },
            1400,
            5,
        ),
        Fixture {
            name: "ack_3_7",
            expected: Expected::Ack { tid: 3, bid: 7 },
        },
    ]
}

/// Checks every fixture file in `dir`; one result per fixture, in manifest order.
pub fn verify_dir(dir: &Path) -> Vec<(&'static str, Result<(), String>)> {
    fixtures()
        .into_iter()
        .map(|f| {
            let r = fs::read(dir.join(f.file_name()))
                .map_err(|e| format!("cannot read: {e}"))
                .and_then(|b| f.verify(&b));
            (f.name, r)
        })
        .collect()
}

/// Checks the copies compiled into the binary.
pub fn verify_embedded() -> Vec<(&'static str, Result<(), String>)> {
    let files = embedded();
    fixtures()
        .into_iter()
        .map(|f| {
            let r = match files.iter().find(|(n, _)| *n == f.name) {
                Some((_, b)) => f.verify(b),
                None => Err("not embedded".into()),
            };
            (f.name, r)
        })
        .collect()
}

/// Writes the binaries plus `MANIFEST.txt`. Only used to regenerate after a
/// deliberate format change.
pub fn write_dir(dir: &Path) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let mut manifest = String::from("# file  bytes  fields\n");
    for f in fixtures() {
        let bytes = f.encode();
        fs::write(dir.join(f.file_name()), &bytes)?;
        let fields = match &f.expected {
            Expected::Coded { header: h, segment } => format!(
                "tid={} bid={} sid={} ns={} start={} kind={:?} ls={}",
                h.tid,
                h.bid,
                h.sid,
                h.ns,
                h.start.map_or("none".into(), |s| s.to_string()),
                h.kind,
                segment.len()
            ),
            Expected::Ack { tid, bid } => format!("ack tid={tid} bid={bid}"),
        };
        manifest.push_str(&format!("{}  {}  {}\n", f.file_name(), bytes.len(), fields));
    }
    fs::write(dir.join("MANIFEST.txt"), manifest)
}

macro_rules! embed {
    ($($name:literal),*) => {
        fn embedded() -> Vec<(&'static str, &'static [u8])> {
            vec![$(($name, include_bytes!(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/wire/", $name, ".bin")))),*]
        }
    };
}

embed!(
    "systematic_small",
    "systematic_no_start",
    "coded_wrap",
    "systematic_1400",
    "coded_1400",
    "ack_3_7"
);
