//! Synthetic stand-ins for the NSL-KDD and UNSW-NB15 split files.
//!
//! The generated files reproduce the distributed file formats (column
//! order, header, label and trailing columns) and the exact per-attack-label
//! row counts of the original splits. Feature values are random draws with
//! roughly realistic shapes: heavy-tailed byte counts, many zeros, constant
//! columns, rates in [0, 1], large TCP sequence numbers, and a few
//! categorical values that only occur in the test split. They carry no
//! real traffic.

use std::io::{self, Write};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ingest::Split;
use crate::schema::{NSLKDD, UNSWNB15};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Replica {
    NslKddTrain,
    NslKddTest,
    UnswTrain,
    UnswTest,
}

impl Replica {
    pub const ALL: [Replica; 4] = [
        Replica::NslKddTrain,
        Replica::NslKddTest,
        Replica::UnswTrain,
        Replica::UnswTest,
    ];

    /// File name of the original distribution.
    pub fn file_name(self) -> &'static str {
        match self {
            Replica::NslKddTrain => "KDDTrain+.txt",
            Replica::NslKddTest => "KDDTest+.txt",
            Replica::UnswTrain => "UNSW_NB15_training-set.csv",
            Replica::UnswTest => "UNSW_NB15_testing-set.csv",
        }
    }

    pub fn dataset_id(self) -> &'static str {
        match self {
            Replica::NslKddTrain | Replica::NslKddTest => NSLKDD,
            Replica::UnswTrain | Replica::UnswTest => UNSWNB15,
        }
    }

    pub fn split(self) -> Split {
        match self {
            Replica::NslKddTrain | Replica::UnswTrain => Split::Train,
            Replica::NslKddTest | Replica::UnswTest => Split::Test,
        }
    }

    /// Raw label → row count of the original file.
    pub fn label_counts(self) -> &'static [(&'static str, usize)] {
        match self {
            Replica::NslKddTrain => &NSL_TRAIN_LABELS,
            Replica::NslKddTest => &NSL_TEST_LABELS,
            Replica::UnswTrain => &UNSW_TRAIN_LABELS,
            Replica::UnswTest => &UNSW_TEST_LABELS,
        }
    }

    pub fn rows(self) -> usize {
        self.label_counts().iter().map(|l| l.1).sum()
    }

    /// Label counts divided by `divisor`, rounded up so every label stays
    /// present.
    pub fn scaled_counts(self, divisor: usize) -> Vec<(&'static str, usize)> {
        self.label_counts()
            .iter()
            .map(|&(l, n)| (l, n.div_ceil(divisor.max(1))))
            .collect()
    }

    pub fn write<W: Write>(self, w: W, seed: u64) -> io::Result<()> {
        self.write_counts(w, self.label_counts(), seed)
    }

    /// Writes a file with the given raw-label counts. Rows of different
    /// labels are interleaved in a seeded random order.
    pub fn write_counts<W: Write>(
        self,
        w: W,
        counts: &[(&str, usize)],
        seed: u64,
    ) -> io::Result<()> {
        let mut rng =
            ChaCha8Rng::seed_from_u64(seed ^ (self as u64).wrapping_mul(0x51_7CC1_B727_220A));
        let mut labels: Vec<&str> = counts
            .iter()
            .flat_map(|&(l, n)| std::iter::repeat_n(l, n))
            .collect();
        labels.shuffle(&mut rng);
        let mut w = io::BufWriter::new(w);
        let test = self.split() == Split::Test;
        match self.dataset_id() {
            NSLKDD => {
                for label in labels {
                    write_nsl_row(&mut w, &mut rng, label, test)?;
                }
            }
            _ => {
                writeln!(w, "{}", UNSW_HEADER.join(","))?;
                for (i, label) in labels.into_iter().enumerate() {
                    write_unsw_row(&mut w, &mut rng, i + 1, label, test)?;
                }
            }
        }
        w.flush()
    }
}

const NSL_TRAIN_LABELS: [(&str, usize); 23] = [
    ("normal", 67343),
    ("neptune", 41214),
    ("satan", 3633),
    ("ipsweep", 3599),
    ("portsweep", 2931),
    ("smurf", 2646),
    ("nmap", 1493),
    ("back", 956),
    ("teardrop", 892),
    ("warezclient", 890),
    ("pod", 201),
    ("guess_passwd", 53),
    ("buffer_overflow", 30),
    ("warezmaster", 20),
    ("land", 18),
    ("imap", 11),
    ("rootkit", 10),
    ("loadmodule", 9),
    ("ftp_write", 8),
    ("multihop", 7),
    ("phf", 4),
    ("perl", 3),
    ("spy", 2),
];

const NSL_TEST_LABELS: [(&str, usize); 38] = [
    ("normal", 9711),
    ("neptune", 4657),
    ("guess_passwd", 1231),
    ("mscan", 996),
    ("warezmaster", 944),
    ("apache2", 737),
    ("satan", 735),
    ("processtable", 685),
    ("smurf", 665),
    ("back", 359),
    ("snmpguess", 331),
    ("saint", 319),
    ("mailbomb", 293),
    ("snmpgetattack", 178),
    ("portsweep", 157),
    ("ipsweep", 141),
    ("httptunnel", 133),
    ("nmap", 73),
    ("pod", 41),
    ("buffer_overflow", 20),
    ("multihop", 18),
    ("named", 17),
    ("ps", 15),
    ("sendmail", 14),
    ("rootkit", 13),
    ("xterm", 13),
    ("teardrop", 12),
    ("xlock", 9),
    ("land", 7),
    ("xsnoop", 4),
    ("ftp_write", 3),
    ("worm", 2),
    ("loadmodule", 2),
    ("perl", 2),
    ("sqlattack", 2),
    ("udpstorm", 2),
    ("phf", 2),
    ("imap", 1),
];

const UNSW_TRAIN_LABELS: [(&str, usize); 10] = [
    ("Normal", 56000),
    ("Generic", 40000),
    ("Exploits", 33393),
    ("Fuzzers", 18184),
    ("DoS", 12264),
    ("Reconnaissance", 10491),
    ("Analysis", 2000),
    ("Backdoor", 1746),
    ("Shellcode", 1133),
    ("Worms", 130),
];

const UNSW_TEST_LABELS: [(&str, usize); 10] = [
    ("Normal", 37000),
    ("Generic", 18871),
    ("Exploits", 11132),
    ("Fuzzers", 6062),
    ("DoS", 4089),
    ("Reconnaissance", 3496),
    ("Analysis", 677),
    ("Backdoor", 583),
    ("Shellcode", 378),
    ("Worms", 44),
];

const NSL_SERVICES: [&str; 24] = [
    "http",
    "private",
    "domain_u",
    "smtp",
    "ftp_data",
    "eco_i",
    "other",
    "ecr_i",
    "telnet",
    "finger",
    "ftp",
    "auth",
    "Z39_50",
    "uucp",
    "courier",
    "bgp",
    "whois",
    "uucp_path",
    "iso_tsap",
    "time",
    "imap4",
    "nnsp",
    "vmnet",
    "urp_i",
];
const NSL_FLAGS: [&str; 11] = [
    "SF", "S0", "REJ", "RSTR", "SH", "RSTO", "S1", "RSTOS0", "S3", "S2", "OTH",
];

/// Rough attack family of a raw label, used to shape a few features.
fn nsl_family(label: &str) -> u8 {
    match label {
        "normal" => 0,
        "neptune" | "smurf" | "back" | "teardrop" | "pod" | "land" | "apache2" | "processtable"
        | "mailbomb" | "udpstorm" | "worm" => 1,
        "satan" | "ipsweep" | "portsweep" | "nmap" | "mscan" | "saint" => 2,
        _ => 3,
    }
}

fn heavy_tail(rng: &mut ChaCha8Rng, p_zero: f64, scale: f64) -> u64 {
    if rng.random_bool(p_zero) {
        0
    } else {
        let u: f64 = rng.random_range(0.0..1.0);
        (scale * (u * 12.0).exp2()).round() as u64
    }
}

fn rate(rng: &mut ChaCha8Rng, p_one: f64) -> String {
    let r: f64 = if rng.random_bool(p_one) {
        1.0
    } else if rng.random_bool(0.6) {
        0.0
    } else {
        rng.random_range(0.0..1.0)
    };
    format!("{:.2}", r)
}

fn write_nsl_row<W: Write>(
    w: &mut W,
    rng: &mut ChaCha8Rng,
    label: &str,
    test: bool,
) -> io::Result<()> {
    let fam = nsl_family(label);
    let proto = match fam {
        1 if rng.random_bool(0.3) => "icmp",
        2 => *["tcp", "icmp", "udp"].choose(rng).unwrap(),
        _ => *["tcp", "tcp", "tcp", "udp", "icmp"].choose(rng).unwrap(),
    };
    let service = NSL_SERVICES.choose(rng).unwrap();
    let flag = match fam {
        1 if rng.random_bool(0.7) => "S0",
        2 if rng.random_bool(0.5) => "REJ",
        _ if rng.random_bool(0.8) => "SF",
        _ => NSL_FLAGS.choose(rng).unwrap(),
    };
    let duration = if rng.random_bool(0.92) {
        0
    } else {
        rng.random_range(1..40_000u64)
    };
    let src = heavy_tail(rng, if fam == 1 { 0.8 } else { 0.15 }, 40.0);
    let dst = heavy_tail(rng, if fam == 0 { 0.3 } else { 0.9 }, 60.0);
    let small = |rng: &mut ChaCha8Rng, p: f64, max: u64| {
        if rng.random_bool(p) {
            rng.random_range(1..=max)
        } else {
            0
        }
    };
    let bit = |rng: &mut ChaCha8Rng, p: f64| u8::from(rng.random_bool(p));
    let count = rng.random_range(1..=if fam == 1 { 511u32 } else { 60 });
    let srv_count = rng.random_range(1..=count);
    let serror = if fam == 1 { 0.8 } else { 0.05 };
    let rerror = if fam == 2 { 0.6 } else { 0.05 };
    let fields: Vec<String> = vec![
        duration.to_string(),
        proto.into(),
        service.to_string(),
        flag.into(),
        src.to_string(),
        dst.to_string(),
        bit(rng, 0.0001).to_string(),
        small(rng, 0.01, 3).to_string(),
        small(rng, 0.001, 3).to_string(),
        small(rng, 0.03, 30).to_string(),
        small(rng, 0.002, 4).to_string(),
        bit(rng, if fam == 0 { 0.7 } else { 0.1 }).to_string(),
        small(rng, 0.02, 800).to_string(),
        bit(rng, 0.002).to_string(),
        small(rng, 0.001, 2).to_string(),
        small(rng, 0.01, 900).to_string(),
        small(rng, 0.005, 40).to_string(),
        small(rng, 0.001, 2).to_string(),
        small(rng, 0.004, 8).to_string(),
        "0".into(), // num_outbound_cmds is constant in both splits
        bit(rng, 0.0001).to_string(),
        bit(rng, 0.01).to_string(),
        count.to_string(),
        srv_count.to_string(),
        rate(rng, serror),
        rate(rng, serror),
        rate(rng, rerror),
        rate(rng, rerror),
        rate(rng, if fam == 0 { 0.8 } else { 0.2 }),
        rate(rng, 0.05),
        rate(rng, 0.05),
        rng.random_range(0..=255u32).to_string(),
        rng.random_range(0..=255u32).to_string(),
        rate(rng, 0.3),
        rate(rng, 0.05),
        rate(rng, 0.1),
        rate(rng, 0.02),
        rate(rng, serror),
        rate(rng, serror),
        rate(rng, rerror),
        rate(rng, rerror),
    ];
    let difficulty = rng.random_range(if test { 0..=21u32 } else { 10..=21 });
    writeln!(w, "{},{label},{difficulty}", fields.join(","))
}

const UNSW_HEADER: [&str; 45] = [
    "id",
    "dur",
    "proto",
    "service",
    "state",
    "spkts",
    "dpkts",
    "sbytes",
    "dbytes",
    "rate",
    "sttl",
    "dttl",
    "sload",
    "dload",
    "sloss",
    "dloss",
    "sinpkt",
    "dinpkt",
    "sjit",
    "djit",
    "swin",
    "stcpb",
    "dtcpb",
    "dwin",
    "tcprtt",
    "synack",
    "ackdat",
    "smean",
    "dmean",
    "trans_depth",
    "response_body_len",
    "ct_srv_src",
    "ct_state_ttl",
    "ct_dst_ltm",
    "ct_src_dport_ltm",
    "ct_dst_sport_ltm",
    "ct_dst_src_ltm",
    "is_ftp_login",
    "ct_ftp_cmd",
    "ct_flw_http_mthd",
    "ct_src_ltm",
    "ct_srv_dst",
    "is_sm_ips_ports",
    "attack_cat",
    "label",
];

const UNSW_PROTOS: [&str; 16] = [
    "tcp", "udp", "unas", "arp", "ospf", "sctp", "any", "gre", "ipv6", "pim", "rsvp", "swipe",
    "sun-nd", "mobile", "sep", "ib",
];
const UNSW_SERVICES: [&str; 13] = [
    "-", "http", "ftp", "ftp-data", "smtp", "pop3", "dns", "snmp", "ssl", "dhcp", "irc", "radius",
    "ssh",
];
const UNSW_STATES_TRAIN: [&str; 8] = ["FIN", "INT", "CON", "REQ", "RST", "ECO", "PAR", "URN"];
const UNSW_STATES_TEST_ONLY: [&str; 2] = ["ACC", "CLO"];

fn fixed(x: f64) -> String {
    let s = format!("{x:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-" {
        "0".into()
    } else {
        s.to_string()
    }
}

fn write_unsw_row<W: Write>(
    w: &mut W,
    rng: &mut ChaCha8Rng,
    id: usize,
    label: &str,
    test: bool,
) -> io::Result<()> {
    let normal = label == "Normal";
    let proto = if rng.random_bool(0.85) {
        if rng.random_bool(0.6) {
            "tcp"
        } else {
            "udp"
        }
    } else {
        UNSW_PROTOS.choose(rng).unwrap()
    };
    let service = if rng.random_bool(0.5) {
        "-"
    } else {
        UNSW_SERVICES.choose(rng).unwrap()
    };
    let state = if test && rng.random_bool(0.002) {
        UNSW_STATES_TEST_ONLY.choose(rng).unwrap()
    } else if rng.random_bool(0.9) {
        ["FIN", "INT", "CON"][rng.random_range(0..3)]
    } else {
        UNSW_STATES_TRAIN.choose(rng).unwrap()
    };
    let dur = if rng.random_bool(0.3) {
        0.0
    } else {
        rng.random_range(0.0..60.0f64).powi(2) / 60.0
    };
    let spkts = 1 + heavy_tail(rng, 0.2, 2.0);
    let dpkts = heavy_tail(rng, 0.4, 2.0);
    let sbytes = 24 + heavy_tail(rng, 0.1, 40.0);
    let dbytes = heavy_tail(rng, 0.45, 60.0);
    let rate = if dur > 0.0 {
        spkts as f64 / dur
    } else {
        rng.random_range(0.0..1.0e6)
    };
    let ttl = |rng: &mut ChaCha8Rng| *[0u32, 29, 31, 60, 62, 252, 254, 255].choose(rng).unwrap();
    let tcp = proto == "tcp";
    let seq = |rng: &mut ChaCha8Rng| {
        if tcp && rng.random_bool(0.7) {
            rng.next_u32()
        } else {
            0
        }
    };
    let win = if tcp && rng.random_bool(0.7) { 255 } else { 0 };
    let jitter = |rng: &mut ChaCha8Rng| {
        if rng.random_bool(0.4) {
            0.0
        } else {
            rng.random_range(0.0..5000.0f64)
        }
    };
    let small = |rng: &mut ChaCha8Rng, p: f64, max: u32| {
        if rng.random_bool(p) {
            rng.random_range(1..=max)
        } else {
            0
        }
    };
    let ct = |rng: &mut ChaCha8Rng| rng.random_range(1..=if normal { 10u32 } else { 60 });
    let tcprtt = if tcp {
        rng.random_range(0.0..0.2f64)
    } else {
        0.0
    };
    let synack = tcprtt * rng.random_range(0.3..0.7);
    let fields: Vec<String> = vec![
        id.to_string(),
        fixed(dur),
        proto.into(),
        service.into(),
        state.into(),
        spkts.to_string(),
        dpkts.to_string(),
        sbytes.to_string(),
        dbytes.to_string(),
        fixed(rate),
        ttl(rng).to_string(),
        ttl(rng).to_string(),
        fixed(sbytes as f64 * 8.0 / dur.max(1e-3)),
        fixed(dbytes as f64 * 8.0 / dur.max(1e-3)),
        small(rng, 0.2, 50).to_string(),
        small(rng, 0.2, 50).to_string(),
        fixed(rng.random_range(0.0..1000.0)),
        fixed(rng.random_range(0.0..1000.0)),
        fixed(jitter(rng)),
        fixed(jitter(rng)),
        win.to_string(),
        seq(rng).to_string(),
        seq(rng).to_string(),
        win.to_string(),
        fixed(tcprtt),
        fixed(synack),
        fixed(tcprtt - synack),
        (sbytes / spkts).to_string(),
        dbytes.checked_div(dpkts).unwrap_or(0).to_string(),
        small(rng, 0.1, 5).to_string(),
        (small(rng, 0.05, 20) * 1000).to_string(),
        ct(rng).to_string(),
        rng.random_range(0..=6u32).to_string(),
        ct(rng).to_string(),
        ct(rng).to_string(),
        ct(rng).to_string(),
        ct(rng).to_string(),
        small(rng, 0.01, 1).to_string(),
        small(rng, 0.01, 1).to_string(),
        small(rng, 0.05, 4).to_string(),
        ct(rng).to_string(),
        ct(rng).to_string(),
        small(rng, 0.01, 1).to_string(),
    ];
    let bin = u8::from(!normal);
    writeln!(w, "{},{label},{bin}", fields.join(","))
}
