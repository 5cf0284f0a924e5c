//! Design files (JSON) and the CSV tables written by the command-line tool.
//!
//! Design files are canonical: keys sorted, floats rounded to 12 significant
//! digits before serialization, so `emit(parse(emit(x))) == emit(x)`.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelParams;
use crate::degree::{CodeEnsemble, DegreeDistribution, Perspective, Side};
use crate::design::{DesignResult, DesignSpec, SweepEntry};
use crate::exit::{ExitTrajectory, Schedule};
use crate::simulate::BerRow;
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL: &str = "gmac-ldpc";

/// Rounds to 12 significant digits.
pub fn canonical(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { 0.0 } else { x };
    }
    format!("{x:.11e}").parse().expect("formatted float parses")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerPair {
    pub p1: f64,
    pub p2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserEnsemble {
    pub dc: u32,
    /// `[degree, edge weight]` pairs in increasing degree.
    pub lambda: Vec<(u32, f64)>,
    pub rate: f64,
}

/// Design settings echoed into the file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignEcho {
    pub v_max: u32,
    pub dc1: [u32; 2],
    pub dc2: [u32; 2],
    pub grid: usize,
    pub slack: f64,
    pub max_alternations: usize,
    pub rate_tol: f64,
    pub max_iters: usize,
    pub threshold: f64,
    pub schedule: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    /// Seconds since the Unix epoch; absent unless requested so that
    /// repeated runs stay byte-identical.
    pub timestamp: Option<u64>,
    pub design: Option<DesignEcho>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignFile {
    pub schema_version: u32,
    pub params: PowerPair,
    pub users: [UserEnsemble; 2],
    pub sum_rate: f64,
    pub capacity: f64,
    pub provenance: Provenance,
}

fn schedule_name(s: Schedule) -> &'static str {
    match s {
        Schedule::Flooding => "flooding",
        Schedule::Alternating => "alternating",
    }
}

fn user_ensemble(e: &CodeEnsemble<f64>) -> UserEnsemble {
    UserEnsemble {
        dc: e.dc(),
        lambda: e.lambda().iter().map(|(d, w)| (d, canonical(w))).collect(),
        rate: canonical(e.rate()),
    }
}

impl DesignFile {
    pub fn from_ensembles(
        params: &ChannelParams<f64>,
        ensembles: [&CodeEnsemble<f64>; 2],
        capacity: f64,
    ) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            params: PowerPair {
                p1: canonical(params.p1()),
                p2: canonical(params.p2()),
            },
            users: [user_ensemble(ensembles[0]), user_ensemble(ensembles[1])],
            sum_rate: canonical(ensembles[0].rate() + ensembles[1].rate()),
            capacity: canonical(capacity),
            provenance: Provenance {
                tool: TOOL.into(),
                version: env!("CARGO_PKG_VERSION").into(),
                timestamp: None,
                design: None,
            },
        }
    }

    pub fn from_result(result: &DesignResult, spec: &DesignSpec, timestamp: Option<u64>) -> Self {
        let mut f = Self::from_ensembles(
            &spec.params,
            [&result.ensembles[0], &result.ensembles[1]],
            result.capacity,
        );
        f.provenance.timestamp = timestamp;
        f.provenance.design = Some(DesignEcho {
            v_max: spec.v_max,
            dc1: [spec.dc_range[0].0, spec.dc_range[0].1],
            dc2: [spec.dc_range[1].0, spec.dc_range[1].1],
            grid: spec.constraint_grid_size,
            slack: canonical(spec.slack),
            max_alternations: spec.max_alternations,
            rate_tol: canonical(spec.rate_tol),
            max_iters: spec.trajectory.max_iters,
            threshold: canonical(spec.trajectory.threshold),
            schedule: schedule_name(spec.trajectory.schedule).into(),
        });
        f
    }

    pub fn params(&self) -> Result<ChannelParams<f64>> {
        ChannelParams::new(self.params.p1, self.params.p2)
    }

    /// Rebuilds both ensembles; the stored rates must agree with the ones
    /// implied by `lambda` and `dc`.
    pub fn ensembles(&self) -> Result<[CodeEnsemble<f64>; 2]> {
        let build = |u: &UserEnsemble| -> Result<CodeEnsemble<f64>> {
            let lambda = DegreeDistribution::with_max_degree(
                u.lambda.iter().copied(),
                Perspective::Edge,
                Side::Variable,
                u32::MAX,
            )?;
            let e = CodeEnsemble::new(lambda, u.dc)?;
            if (e.rate() - u.rate).abs() > 1e-9 {
                return Err(Error::Format(format!(
                    "stored rate {} disagrees with lambda ({})",
                    u.rate,
                    e.rate()
                )));
            }
            Ok(e)
        };
        Ok([build(&self.users[0])?, build(&self.users[1])?])
    }

    /// Canonical JSON text with a trailing newline.
    pub fn to_json(&self) -> Result<String> {
        // serde_json::Value keeps object keys sorted
        let value = serde_json::to_value(self)?;
        let mut s = serde_json::to_string_pretty(&value)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        match value.get("schema_version").and_then(|v| v.as_u64()) {
            Some(v) if v == SCHEMA_VERSION as u64 => {}
            Some(v) => return Err(Error::Format(format!("unsupported schema_version {v}"))),
            None => return Err(Error::Format("missing schema_version".into())),
        }
        let file: Self = serde_json::from_value(value).map_err(|e| Error::Format(e.to_string()))?;
        file.ensembles()?;
        file.params().map_err(|e| Error::Format(e.to_string()))?;
        Ok(file)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

fn num(x: f64) -> String {
    canonical(x).to_string()
}

pub const EXIT_HEADER: [&str; 9] = [
    "iteration",
    "i_sv1",
    "i_vc1",
    "i_cv1",
    "i_vs1",
    "i_sv2",
    "i_vc2",
    "i_cv2",
    "i_vs2",
];
pub const BER_HEADER: [&str; 9] = [
    "offset_db",
    "user",
    "frames",
    "bits",
    "bit_errors",
    "frame_errors",
    "ber",
    "fer",
    "avg_iters",
];
pub const SWEEP_HEADER: [&str; 7] = [
    "dc1",
    "dc2",
    "rate1",
    "rate2",
    "sum_rate",
    "alternations",
    "note",
];

pub fn write_exit_trace<W: Write>(w: W, t: &ExitTrajectory) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(EXIT_HEADER)?;
    for s in &t.states {
        let mut rec = vec![s.iteration.to_string()];
        for u in &s.users {
            rec.extend([u.i_sv, u.i_vc, u.i_cv, u.i_vs].map(num));
        }
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_ber<W: Write>(w: W, rows: &[BerRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(BER_HEADER)?;
    for r in rows {
        out.write_record([
            num(r.offset_db),
            r.user.to_string(),
            r.frames.to_string(),
            r.bits.to_string(),
            r.bit_errors.to_string(),
            r.frame_errors.to_string(),
            num(r.ber),
            num(r.fer),
            num(r.avg_iters),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Infeasible pairs leave the rate columns empty and carry the reason in
/// `note`.
pub fn write_sweep_log<W: Write>(w: W, log: &[SweepEntry]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(SWEEP_HEADER)?;
    for e in log {
        let (r1, r2) = e
            .rates
            .map_or((String::new(), String::new()), |r| (num(r[0]), num(r[1])));
        out.write_record([
            e.dc[0].to_string(),
            e.dc[1].to_string(),
            r1,
            r2,
            e.sum_rate.map(num).unwrap_or_default(),
            e.alternations.to_string(),
            e.note.clone(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> DesignFile {
        let l1 = DegreeDistribution::new(
            [(2, 0.25), (3, 0.35), (12, 0.4)],
            Perspective::Edge,
            Side::Variable,
        )
        .unwrap();
        let l2 = DegreeDistribution::variable_regular(3).unwrap();
        let e1 = CodeEnsemble::new(l1, 7).unwrap();
        let e2 = CodeEnsemble::new(l2, 6).unwrap();
        DesignFile::from_ensembles(&ChannelParams::new(1.5, 1.0).unwrap(), [&e1, &e2], 0.886)
    }

    #[test]
    fn canonical_rounding() {
        assert_eq!(canonical(0.1 + 0.2), 0.3);
        assert_eq!(canonical(1.0 / 3.0), 0.333333333333);
        assert_eq!(canonical(-2.0e-7 / 3.0), -6.66666666667e-8);
        assert_eq!(canonical(0.0), 0.0);
        assert_eq!(canonical(-0.0).to_bits(), 0.0f64.to_bits());
    }

    #[test]
    fn round_trip_is_lossless() {
        let f = sample();
        let text = f.to_json().unwrap();
        let back = DesignFile::from_json(&text).unwrap();
        assert_eq!(back, f);
        assert_eq!(back.to_json().unwrap(), text);
        let e = back.ensembles().unwrap();
        assert_eq!(e[0].dc(), 7);
        assert!((e[1].rate() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn keys_are_sorted() {
        let text = sample().to_json().unwrap();
        let pos = |k: &str| text.find(&format!("\"{k}\"")).unwrap();
        assert!(pos("capacity") < pos("params"));
        assert!(pos("params") < pos("provenance"));
        assert!(pos("provenance") < pos("schema_version"));
        assert!(pos("schema_version") < pos("sum_rate"));
        assert!(pos("sum_rate") < pos("users"));
    }

    #[test]
    fn rejects_unknown_schema_and_bad_weights() {
        let text = sample().to_json().unwrap();
        let v2 = text.replace("\"schema_version\": 1", "\"schema_version\": 2");
        assert!(
            matches!(DesignFile::from_json(&v2), Err(Error::Format(m)) if m.contains("schema_version 2"))
        );
        let bad = text.replace("0.25", "0.3");
        assert!(DesignFile::from_json(&bad).is_err());
        assert!(DesignFile::from_json("{").is_err());
        assert!(DesignFile::from_json("{\"schema_version\": 1}").is_err());
    }

    #[test]
    fn csv_headers() {
        let mut buf = Vec::new();
        write_ber(&mut buf, &[]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "offset_db,user,frames,bits,bit_errors,frame_errors,ber,fer,avg_iters\n"
        );
        let mut buf = Vec::new();
        let log = [SweepEntry {
            dc: [4, 4],
            rates: None,
            sum_rate: None,
            alternations: 0,
            note: "closed, tunnel".into(),
        }];
        write_sweep_log(&mut buf, &log).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "dc1,dc2,rate1,rate2,sum_rate,alternations,note\n4,4,,,,0,\"closed, tunnel\"\n"
        );
    }

    proptest! {
        #[test]
        fn canonical_is_idempotent(x in -1e6f64..1e6) {
            let c = canonical(x);
            prop_assert_eq!(canonical(c), c);
            prop_assert!((c - x).abs() <= 1e-11 * x.abs());
            let text = serde_json::to_string(&c).unwrap();
            prop_assert_eq!(serde_json::from_str::<f64>(&text).unwrap(), c);
        }
    }
}
