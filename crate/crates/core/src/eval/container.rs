//! Feature container: every per-utterance quantity of the analysis and
//! closed-loop extraction dataflow, in one file.
//!
//! Layout: `MBGF`, u32 version, a length-prefixed JSON header (analysis and
//! surrogate settings, condition statistics, record count), then one
//! length-prefixed record per utterance. A record is a length-prefixed JSON
//! block of scalars followed by little-endian f32 arrays and the two symbol
//! streams. Every stored real is exactly representable in f32, so
//! serialization round-trips bit for bit.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::audio::Split;
use crate::binio::{Reader, Writer};
use crate::error::{Error, Result};
use crate::excitation::{ExcitationKind, ExcitationTrack};
use crate::features::{ConditionTrack, F0Params, NormStats, PitchFrame};
use crate::lp::{CoeffTrack, FrameGrid, LsfTrack, TrackSource, Window};
use crate::surrogate::SurrogateConfig;

const MAGIC: &[u8; 4] = b"MBGF";
const VERSION: u32 = 1;

/// LP front-end settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub order: usize,
    pub shift_ms: f64,
    pub length_ms: f64,
    pub window: Window,
    pub f0: F0Params,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            order: 16,
            shift_ms: 5.0,
            length_ms: 25.0,
            window: Window::Hann,
            f0: F0Params::default(),
        }
    }
}

impl AnalysisConfig {
    pub fn condition_dim(&self) -> usize {
        self.order + 3
    }

    /// Every violated constraint, for a given sample rate.
    pub fn problems(&self, sample_rate: u32) -> Vec<String> {
        let mut out = Vec::new();
        let rate = sample_rate as f64;
        let shift = (self.shift_ms * 1e-3 * rate).round();
        let length = (self.length_ms * 1e-3 * rate).round();
        if !(shift >= 1.0) {
            out.push(format!("lp.shift_ms {} gives an empty hop", self.shift_ms));
        }
        if !(length >= shift) {
            out.push(format!(
                "lp.length_ms {} must be at least lp.shift_ms {}",
                self.length_ms, self.shift_ms
            ));
        }
        if self.order == 0 || self.order as f64 >= length {
            out.push(format!("lp.order {} must be in 1..frame length", self.order));
        }
        let f0 = &self.f0;
        if !(f0.f0_min_hz > 0.0 && f0.f0_min_hz < f0.f0_max_hz && f0.f0_max_hz < rate / 2.0) {
            out.push(format!(
                "lp.f0 band [{}, {}] Hz invalid at {sample_rate} Hz",
                f0.f0_min_hz, f0.f0_max_hz
            ));
        }
        if !(0.0..=1.0).contains(&f0.voicing_threshold) {
            out.push("lp.f0.voicing_threshold must lie in [0, 1]".into());
        }
        out
    }

    pub fn grid(&self, n_samples: usize, sample_rate: u32) -> Result<FrameGrid> {
        FrameGrid::from_ms(n_samples, sample_rate, self.shift_ms, self.length_ms, self.window)
    }
}

/// All stored fields of one utterance. Condition tracks are unnormalized;
/// excitation tracks are peak-normalized with gain and symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct UtteranceRecord {
    pub id: String,
    pub split: Split,
    pub sample_rate: u32,
    pub waveform: Vec<f64>,
    pub grid: FrameGrid,
    pub lsf_gt: LsfTrack,
    pub alpha_gt: CoeffTrack,
    pub lsf_gen: LsfTrack,
    pub alpha_gen: CoeffTrack,
    pub pitch: Vec<PitchFrame>,
    pub energy: Vec<f64>,
    pub cond_gt: ConditionTrack,
    pub cond_gen: ConditionTrack,
    pub exc_plain: ExcitationTrack,
    pub exc_mbg: ExcitationTrack,
    /// `max |ê - e - e^am|` measured while building.
    pub decomposition_residual: f64,
}

impl UtteranceRecord {
    /// Names of the stored per-utterance fields, in serialization order.
    pub const FIELDS: [&'static str; 13] = [
        "waveform",
        "grid",
        "lsf_gt",
        "alpha_gt",
        "lsf_gen",
        "alpha_gen",
        "pitch",
        "energy",
        "cond_gt",
        "cond_gen",
        "exc_plain",
        "exc_mbg",
        "decomposition_residual",
    ];

    pub fn n_samples(&self) -> usize {
        self.waveform.len()
    }

    pub fn condition(&self, source: TrackSource) -> &ConditionTrack {
        match source {
            TrackSource::GroundTruth => &self.cond_gt,
            TrackSource::Generated => &self.cond_gen,
        }
    }

    pub fn excitation(&self, kind: ExcitationKind) -> Option<&ExcitationTrack> {
        match kind {
            ExcitationKind::Plain => Some(&self.exc_plain),
            ExcitationKind::Mbg => Some(&self.exc_mbg),
            ExcitationKind::Intermediate => None,
        }
    }

    pub fn coeffs(&self, source: TrackSource) -> &CoeffTrack {
        match source {
            TrackSource::GroundTruth => &self.alpha_gt,
            TrackSource::Generated => &self.alpha_gen,
        }
    }

    /// Length and tagging invariants.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| {
            Err(Error::Utterance {
                id: self.id.clone(),
                source: Box::new(Error::Container(msg)),
            })
        };
        let n = self.waveform.len();
        let f = self.grid.n_frames;
        if self.grid.n_samples != n {
            return fail(format!("grid covers {} samples, waveform has {n}", self.grid.n_samples));
        }
        let frame_counts = [
            ("lsf_gt", self.lsf_gt.n_frames()),
            ("alpha_gt", self.alpha_gt.n_frames()),
            ("lsf_gen", self.lsf_gen.n_frames()),
            ("alpha_gen", self.alpha_gen.n_frames()),
            ("pitch", self.pitch.len()),
            ("energy", self.energy.len()),
            ("cond_gt", self.cond_gt.n_frames()),
            ("cond_gen", self.cond_gen.n_frames()),
        ];
        for (name, count) in frame_counts {
            if count != f {
                return fail(format!("{name} has {count} frames, grid has {f}"));
            }
        }
        for (name, track) in [("exc_plain", &self.exc_plain), ("exc_mbg", &self.exc_mbg)] {
            if track.len() != n || track.symbols.as_ref().map(Vec::len) != Some(n) || track.gain.is_none() {
                return fail(format!("{name} is not a normalized {n}-sample track"));
            }
        }
        if self.alpha_gen.source != TrackSource::Generated || self.lsf_gen.source != TrackSource::Generated {
            return fail("generated tracks must be tagged generated".into());
        }
        if self.alpha_gt.source != TrackSource::GroundTruth || self.lsf_gt.source != TrackSource::GroundTruth {
            return fail("analysed tracks must be tagged ground truth".into());
        }
        if self.exc_plain.kind != ExcitationKind::Plain || self.exc_mbg.kind != ExcitationKind::Mbg {
            return fail("excitation kinds mislabelled".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureContainer {
    pub analysis: AnalysisConfig,
    pub surrogate: SurrogateConfig,
    /// Condition statistics over the training split, per condition source.
    pub norm_gt: NormStats,
    pub norm_gen: NormStats,
    pub records: Vec<UtteranceRecord>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    analysis: AnalysisConfig,
    surrogate: SurrogateConfig,
    norm_gt: NormStats,
    norm_gen: NormStats,
    n_records: usize,
}

#[derive(Serialize, Deserialize)]
struct RecordMeta {
    id: String,
    split: String,
    sample_rate: u32,
    grid: FrameGrid,
    order: usize,
    gain_plain: f64,
    gain_mbg: f64,
    decomposition_residual: f64,
}

impl FeatureContainer {
    pub fn norm(&self, source: TrackSource) -> &NormStats {
        match source {
            TrackSource::GroundTruth => &self.norm_gt,
            TrackSource::Generated => &self.norm_gen,
        }
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &UtteranceRecord> {
        self.records.iter().filter(move |r| r.split == split)
    }

    pub fn record(&self, id: &str) -> Option<&UtteranceRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            analysis: self.analysis,
            surrogate: self.surrogate,
            norm_gt: self.norm_gt.clone(),
            norm_gen: self.norm_gen.clone(),
            n_records: self.records.len(),
        };
        let mut w = Writer::default();
        w.bytes(MAGIC);
        w.u32(VERSION);
        w.block(&serde_json::to_vec(&header).expect("header serializes"));
        for r in &self.records {
            w.block(&record_bytes(r));
        }
        w.buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, Error::Container);
        if r.take(4)? != MAGIC {
            return Err(Error::Container("bad magic".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Container(format!("unsupported version {version}")));
        }
        let header: Header = serde_json::from_slice(r.block()?)
            .map_err(|e| Error::Container(format!("header: {e}")))?;
        let records = (0..header.n_records)
            .map(|_| parse_record(r.block()?))
            .collect::<Result<Vec<_>>>()?;
        r.finish()?;
        for rec in &records {
            rec.validate()?;
        }
        Ok(Self {
            analysis: header.analysis,
            surrogate: header.surrogate,
            norm_gt: header.norm_gt,
            norm_gen: header.norm_gen,
            records,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

fn f32s<'a>(vs: impl IntoIterator<Item = &'a f64> + 'a) -> impl Iterator<Item = f32> + 'a {
    vs.into_iter().map(|&v| v as f32)
}

fn rows<'a>(m: &'a [Vec<f64>]) -> impl Iterator<Item = f32> + 'a {
    m.iter().flat_map(|r| r.iter().map(|&v| v as f32))
}

fn record_bytes(r: &UtteranceRecord) -> Vec<u8> {
    let meta = RecordMeta {
        id: r.id.clone(),
        split: r.split.as_str().into(),
        sample_rate: r.sample_rate,
        grid: r.grid,
        order: r.alpha_gt.order,
        gain_plain: r.exc_plain.gain.unwrap_or(0.0),
        gain_mbg: r.exc_mbg.gain.unwrap_or(0.0),
        decomposition_residual: r.decomposition_residual,
    };
    let mut w = Writer::default();
    w.block(&serde_json::to_vec(&meta).expect("record meta serializes"));
    w.f32s(f32s(&r.waveform));
    w.f32s(rows(&r.lsf_gt.frames));
    w.f32s(rows(&r.alpha_gt.coeffs));
    w.f32s(rows(&r.lsf_gen.frames));
    w.f32s(rows(&r.alpha_gen.coeffs));
    w.f32s(r.pitch.iter().map(|p| p.f0_hz as f32));
    w.f32s(r.pitch.iter().map(|p| if p.voiced { 1.0 } else { 0.0 }));
    w.f32s(f32s(&r.energy));
    w.f32s(rows(&r.cond_gt.values));
    w.f32s(rows(&r.cond_gen.values));
    w.f32s(f32s(&r.exc_plain.raw));
    w.f32s(f32s(&r.exc_mbg.raw));
    w.bytes(r.exc_plain.symbols.as_deref().unwrap_or(&[]));
    w.bytes(r.exc_mbg.symbols.as_deref().unwrap_or(&[]));
    w.buf
}

fn widen(v: Vec<f32>) -> Vec<f64> {
    v.into_iter().map(f64::from).collect()
}

fn matrix(r: &mut Reader<'_>, n_rows: usize, n_cols: usize) -> Result<Vec<Vec<f64>>> {
    let flat = r.f32s(n_rows * n_cols)?;
    Ok(flat
        .chunks(n_cols.max(1))
        .take(n_rows)
        .map(|c| c.iter().map(|&v| f64::from(v)).collect())
        .collect())
}

fn parse_record(bytes: &[u8]) -> Result<UtteranceRecord> {
    let mut r = Reader::new(bytes, Error::Container);
    let meta: RecordMeta = serde_json::from_slice(r.block()?)
        .map_err(|e| Error::Container(format!("record meta: {e}")))?;
    let split: Split = meta.split.parse()?;
    let n = meta.grid.n_samples;
    let f = meta.grid.n_frames;
    let p = meta.order;
    let d = p + 3;
    let waveform = widen(r.f32s(n)?);
    let lsf_gt = matrix(&mut r, f, p)?;
    let alpha_gt = matrix(&mut r, f, p)?;
    let lsf_gen = matrix(&mut r, f, p)?;
    let alpha_gen = matrix(&mut r, f, p)?;
    let f0 = r.f32s(f)?;
    let vuv = r.f32s(f)?;
    let energy = widen(r.f32s(f)?);
    let cond_gt = matrix(&mut r, f, d)?;
    let cond_gen = matrix(&mut r, f, d)?;
    let raw_plain = widen(r.f32s(n)?);
    let raw_mbg = widen(r.f32s(n)?);
    let sym_plain = r.take(n)?.to_vec();
    let sym_mbg = r.take(n)?.to_vec();
    r.finish()?;
    let cond = |values| ConditionTrack {
        order: p,
        dim: d,
        values,
        stats: None,
        normalized: false,
    };
    let exc = |kind, raw, gain, symbols| ExcitationTrack {
        kind,
        raw,
        gain: Some(gain),
        symbols: Some(symbols),
    };
    Ok(UtteranceRecord {
        id: meta.id,
        split,
        sample_rate: meta.sample_rate,
        waveform,
        grid: meta.grid,
        lsf_gt: LsfTrack {
            order: p,
            frames: lsf_gt,
            source: TrackSource::GroundTruth,
        },
        alpha_gt: CoeffTrack {
            order: p,
            coeffs: alpha_gt,
            source: TrackSource::GroundTruth,
        },
        lsf_gen: LsfTrack {
            order: p,
            frames: lsf_gen,
            source: TrackSource::Generated,
        },
        alpha_gen: CoeffTrack {
            order: p,
            coeffs: alpha_gen,
            source: TrackSource::Generated,
        },
        pitch: f0
            .iter()
            .zip(&vuv)
            .map(|(&hz, &v)| PitchFrame {
                f0_hz: f64::from(hz),
                voiced: v > 0.5,
            })
            .collect(),
        energy,
        cond_gt: cond(cond_gt),
        cond_gen: cond(cond_gen),
        exc_plain: exc(ExcitationKind::Plain, raw_plain, meta.gain_plain, sym_plain),
        exc_mbg: exc(ExcitationKind::Mbg, raw_mbg, meta.gain_mbg, sym_mbg),
        decomposition_residual: meta.decomposition_residual,
    })
}
