//! Plain-text drive protocols: one `tau f` pair per line.
//!
//! Blank lines and `#` comments are ignored. The first step must be at
//! `tau = 0`.

use crate::{
    error::{Error, Result},
    model::{DriveProtocol, DriveStep},
};

use super::output::fmt_f64;

pub fn parse_protocol(text: &str) -> Result<DriveProtocol> {
    let mut steps = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [tau, f] = fields[..] else {
            return Err(Error::Parse { line: i + 1, message: format!("expected two fields, found {}", fields.len()) });
        };
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| Error::Parse { line: i + 1, message: format!("{s:?}: {e}") })
        };
        steps.push(DriveStep { tau: num(tau)?, f: num(f)? });
    }
    if steps.is_empty() {
        return Err(Error::Parse { line: 0, message: "protocol has no steps".into() });
    }
    DriveProtocol::new(steps)
}

pub fn write_protocol(protocol: &DriveProtocol) -> String {
    let mut out = String::from("# tau f\n");
    for s in protocol.levels() {
        out.push_str(&format!("{} {}\n", fmt_f64(s.tau), fmt_f64(s.f)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let p = DriveProtocol::new(vec![
            DriveStep { tau: 0.0, f: 5.0 },
            DriveStep { tau: 10.506653640321524, f: 15.0 },
            DriveStep { tau: 49.38882629595795, f: 0.1 + 0.2 },
        ])
        .unwrap();
        assert_eq!(parse_protocol(&write_protocol(&p)).unwrap(), p);
    }

    #[test]
    fn comments_and_errors() {
        let p = parse_protocol("# header\n0 5 # start\n\n11 15\n").unwrap();
        assert_eq!(p.levels().len(), 2);
        assert!(matches!(parse_protocol("0 5\n11\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_protocol("0 x\n"), Err(Error::Parse { line: 1, .. })));
        assert!(parse_protocol("").is_err());
        assert!(matches!(parse_protocol("0 5\n3 1\n2 1\n"), Err(Error::InvalidProtocol(_))));
    }
}
