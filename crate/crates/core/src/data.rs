//! Panel dataset container and its on-disk text format.
//!
//! The file format is a single CSV with header
//! `subject,time,a,b,y,u_a,u_b,z`. Observation rows carry `subject,time,a,b`
//! and leave the remaining columns empty; each subject additionally gets one
//! summary row with `time` empty carrying `y` and, for simulated data, the
//! true latent triple. Floats are written in shortest round-trip form, so a
//! write/read cycle reproduces the dataset exactly.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::params::LatentState;
use crate::Result;

/// Optional per-phase fixed offsets added to the linear predictors, used to
/// mimic exogenous fixed-effect adjustment without enlarging the free
/// parameter set. Disabled (absent) by default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExogOffsets {
    /// Added to the feedback-phase binary predictor, shape [n_subjects × n_times].
    pub phase1_binary: Vec<f64>,
    /// Added to the feedback-phase continuous mean, shape [n_subjects × n_times].
    pub phase1_continuous: Vec<f64>,
    /// Added to the reversal-phase binary predictor, one per subject.
    pub phase2_binary: Vec<f64>,
    /// Added to the reversal-phase continuous mean, one per subject.
    pub phase2_continuous: Vec<f64>,
    /// Added to the outcome predictor, one per subject.
    pub phase3: Vec<f64>,
}

/// Longitudinal panel: binary series `a`, continuous series `b`, final binary
/// outcome `y`, and (for simulated data) the generating latent states.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelDataset {
    n_subjects: usize,
    n_times: usize,
    /// Row-major [n_subjects × n_times], entries 0/1.
    a: Vec<u8>,
    /// Row-major [n_subjects × n_times], finite reals.
    b: Vec<f64>,
    /// One entry per subject, 0/1.
    y: Vec<u8>,
    true_latents: Option<Vec<LatentState>>,
    exog: Option<ExogOffsets>,
}

impl PanelDataset {
    /// Builds a dataset, enforcing every shape and value invariant.
    pub fn new(
        n_subjects: usize,
        n_times: usize,
        a: Vec<u8>,
        b: Vec<f64>,
        y: Vec<u8>,
        true_latents: Option<Vec<LatentState>>,
    ) -> Result<Self> {
        if n_subjects == 0 {
            return Err(Error::InvalidData("n_subjects must be positive".into()));
        }
        if n_times < 3 {
            return Err(Error::InvalidData(format!(
                "n_times must be at least 3 (one feedback transition plus the reversal time), got {n_times}"
            )));
        }
        if a.len() != n_subjects * n_times {
            return Err(Error::DimensionMismatch {
                expected: n_subjects * n_times,
                got: a.len(),
            });
        }
        if b.len() != n_subjects * n_times {
            return Err(Error::DimensionMismatch {
                expected: n_subjects * n_times,
                got: b.len(),
            });
        }
        if y.len() != n_subjects {
            return Err(Error::DimensionMismatch {
                expected: n_subjects,
                got: y.len(),
            });
        }
        if a.iter().any(|&v| v > 1) {
            return Err(Error::InvalidData("a must contain only 0/1".into()));
        }
        if y.iter().any(|&v| v > 1) {
            return Err(Error::InvalidData("y must contain only 0/1".into()));
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("b must contain only finite reals".into()));
        }
        if let Some(lat) = &true_latents {
            if lat.len() != n_subjects {
                return Err(Error::DimensionMismatch {
                    expected: n_subjects,
                    got: lat.len(),
                });
            }
            if lat.iter().any(|l| !l.is_finite()) {
                return Err(Error::InvalidData("true latents must be finite".into()));
            }
        }
        Ok(Self {
            n_subjects,
            n_times,
            a,
            b,
            y,
            true_latents,
            exog: None,
        })
    }

    /// An empty dataset (no subjects) used for prior-only sampling. Bypasses
    /// the positivity check on `n_subjects` deliberately.
    pub fn empty(n_times: usize) -> Self {
        Self {
            n_subjects: 0,
            n_times: n_times.max(3),
            a: Vec::new(),
            b: Vec::new(),
            y: Vec::new(),
            true_latents: None,
            exog: None,
        }
    }

    pub fn n_subjects(&self) -> usize {
        self.n_subjects
    }

    pub fn n_times(&self) -> usize {
        self.n_times
    }

    #[inline]
    pub fn a(&self, subject: usize, t: usize) -> u8 {
        self.a[subject * self.n_times + t]
    }

    #[inline]
    pub fn b(&self, subject: usize, t: usize) -> f64 {
        self.b[subject * self.n_times + t]
    }

    #[inline]
    pub fn y(&self, subject: usize) -> u8 {
        self.y[subject]
    }

    #[inline]
    pub fn a_row(&self, subject: usize) -> &[u8] {
        &self.a[subject * self.n_times..(subject + 1) * self.n_times]
    }

    #[inline]
    pub fn b_row(&self, subject: usize) -> &[f64] {
        &self.b[subject * self.n_times..(subject + 1) * self.n_times]
    }

    pub fn true_latents(&self) -> Option<&[LatentState]> {
        self.true_latents.as_deref()
    }

    pub fn exog(&self) -> Option<&ExogOffsets> {
        self.exog.as_ref()
    }

    /// Installs exogenous offsets after shape-checking them.
    pub fn set_exog(&mut self, exog: ExogOffsets) -> Result<()> {
        let nt = self.n_subjects * self.n_times;
        if exog.phase1_binary.len() != nt
            || exog.phase1_continuous.len() != nt
            || exog.phase2_binary.len() != self.n_subjects
            || exog.phase2_continuous.len() != self.n_subjects
            || exog.phase3.len() != self.n_subjects
        {
            return Err(Error::InvalidData("exogenous offset shape mismatch".into()));
        }
        self.exog = Some(exog);
        Ok(())
    }

    /// Checks the subject index, for operations indexed by subject.
    pub fn check_subject(&self, subject: usize) -> Result<()> {
        if subject >= self.n_subjects {
            return Err(Error::SubjectIndex {
                index: subject,
                n_subjects: self.n_subjects,
            });
        }
        Ok(())
    }

    /// Writes the documented CSV format.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["subject", "time", "a", "b", "y", "u_a", "u_b", "z"])?;
        for i in 0..self.n_subjects {
            for t in 0..self.n_times {
                wtr.write_record([
                    i.to_string(),
                    (t + 1).to_string(),
                    self.a(i, t).to_string(),
                    format!("{}", self.b(i, t)),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                ])?;
            }
            let lat = self.true_latents.as_ref().map(|l| l[i]);
            wtr.write_record([
                i.to_string(),
                String::new(),
                String::new(),
                String::new(),
                self.y(i).to_string(),
                lat.map(|l| format!("{}", l.u_a)).unwrap_or_default(),
                lat.map(|l| format!("{}", l.u_b)).unwrap_or_default(),
                lat.map(|l| format!("{}", l.z)).unwrap_or_default(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn write_csv_path<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// Reads the documented CSV format back.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut obs: Vec<(usize, usize, u8, f64)> = Vec::new();
        let mut subj: Vec<(usize, u8, Option<LatentState>)> = Vec::new();
        for record in rdr.records() {
            let rec = record?;
            if rec.len() != 8 {
                return Err(Error::InvalidData(format!(
                    "expected 8 columns, got {}",
                    rec.len()
                )));
            }
            let subject: usize = parse_field(&rec[0], "subject")?;
            if rec[1].is_empty() {
                let y: u8 = parse_field(&rec[4], "y")?;
                let lat = if !rec[5].is_empty() {
                    Some(LatentState {
                        u_a: parse_field(&rec[5], "u_a")?,
                        u_b: parse_field(&rec[6], "u_b")?,
                        z: parse_field(&rec[7], "z")?,
                    })
                } else {
                    None
                };
                subj.push((subject, y, lat));
            } else {
                let time: usize = parse_field(&rec[1], "time")?;
                let a: u8 = parse_field(&rec[2], "a")?;
                let b: f64 = parse_field(&rec[3], "b")?;
                obs.push((subject, time, a, b));
            }
        }
        let n_subjects = subj.len();
        if n_subjects == 0 {
            return Err(Error::InvalidData("no subject rows found".into()));
        }
        let n_times = obs.iter().map(|o| o.1).max().unwrap_or(0);
        let mut a = vec![0u8; n_subjects * n_times];
        let mut b = vec![f64::NAN; n_subjects * n_times];
        for (s, t, av, bv) in obs {
            if s >= n_subjects || t == 0 || t > n_times {
                return Err(Error::InvalidData(format!(
                    "observation row out of range: subject {s}, time {t}"
                )));
            }
            a[s * n_times + t - 1] = av;
            b[s * n_times + t - 1] = bv;
        }
        let mut y = vec![0u8; n_subjects];
        let mut latents = Vec::with_capacity(n_subjects);
        let mut any_latents = false;
        for (s, yv, lat) in subj {
            if s >= n_subjects {
                return Err(Error::InvalidData(format!("subject row out of range: {s}")));
            }
            y[s] = yv;
            if let Some(l) = lat {
                any_latents = true;
                latents.push((s, l));
            }
        }
        let true_latents = if any_latents {
            if latents.len() != n_subjects {
                return Err(Error::InvalidData(
                    "latent columns present for only some subjects".into(),
                ));
            }
            latents.sort_by_key(|(s, _)| *s);
            Some(latents.into_iter().map(|(_, l)| l).collect())
        } else {
            None
        };
        Self::new(n_subjects, n_times, a, b, y, true_latents)
    }

    pub fn read_csv_path<P: AsRef<Path>>(path: P) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(file))
    }
}

fn parse_field<T: std::str::FromStr>(s: &str, name: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::InvalidData(format!("cannot parse {name} from {s:?}")))
}
