//! Episode outcomes and their aggregation: SR, SPL, steps and modeled time.

use std::io::Write;
use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Cell;
use crate::perception::{vram_total, ModuleKind, PipelineConfig};

/// Call counts per module kind.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModuleCalls {
    pub scorer: u64,
    pub detector: u64,
    pub segmenter: u64,
    pub verifier: u64,
}

impl ModuleCalls {
    pub fn get(&self, kind: ModuleKind) -> u64 {
        match kind {
            ModuleKind::Scorer => self.scorer,
            ModuleKind::Detector => self.detector,
            ModuleKind::Segmenter => self.segmenter,
            ModuleKind::Verifier => self.verifier,
        }
    }

    /// Σ calls × latency over the four kinds.
    pub fn modeled_ms(&self, pipeline: &PipelineConfig) -> f64 {
        ModuleKind::ALL
            .iter()
            .map(|&k| self.get(k) as f64 * pipeline.latency_ms(k))
            .sum()
    }
}

impl AddAssign for ModuleCalls {
    fn add_assign(&mut self, rhs: Self) {
        self.scorer += rhs.scorer;
        self.detector += rhs.detector;
        self.segmenter += rhs.segmenter;
        self.verifier += rhs.verifier;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub success: bool,
    /// Cells actually traversed; turns add no distance.
    pub path_length: u32,
    pub shortest_path_len: u32,
    pub steps: u32,
    pub module_calls: ModuleCalls,
    pub modeled_time_ms: f64,
    /// Diagnostic shaped reward: geodesic progress (meters) minus 0.01 per
    /// step, plus 2.5 on success.
    pub reward: f64,
    pub path: Vec<Cell>,
}

fn non_empty(results: &[EpisodeResult]) -> Result<()> {
    if results.is_empty() {
        Err(Error::EmptyInput)
    } else {
        Ok(())
    }
}

/// Success-weighted path length, percent:
/// `100/N · Σ S_i · l_i / max(p_i, l_i)`.
pub fn spl(results: &[EpisodeResult]) -> Result<f64> {
    non_empty(results)?;
    let mut sum = 0.0;
    for r in results {
        if r.shortest_path_len == 0 {
            return Err(Error::InvalidParams("shortest_path_len must be positive".into()));
        }
        if r.success {
            let l = r.shortest_path_len as f64;
            sum += l / (r.path_length as f64).max(l);
        }
    }
    Ok(100.0 * sum / results.len() as f64)
}

pub fn success_rate(results: &[EpisodeResult]) -> Result<f64> {
    non_empty(results)?;
    let wins = results.iter().filter(|r| r.success).count();
    Ok(100.0 * wins as f64 / results.len() as f64)
}

/// Modeled seconds per module kind.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ComponentTimes {
    pub vlm_s: f64,
    pub det_s: f64,
    pub seg_s: f64,
    pub vqa_s: f64,
}

impl ComponentTimes {
    pub fn get(&self, kind: ModuleKind) -> f64 {
        match kind {
            ModuleKind::Scorer => self.vlm_s,
            ModuleKind::Detector => self.det_s,
            ModuleKind::Segmenter => self.seg_s,
            ModuleKind::Verifier => self.vqa_s,
        }
    }

    pub fn total_s(&self) -> f64 {
        self.vlm_s + self.det_s + self.seg_s + self.vqa_s
    }
}

pub fn modeled_component_time(results: &[EpisodeResult], pipeline: &PipelineConfig) -> ComponentTimes {
    let mut calls = ModuleCalls::default();
    for r in results {
        calls += r.module_calls;
    }
    let secs = |k: ModuleKind| calls.get(k) as f64 * pipeline.latency_ms(k) / 1000.0;
    ComponentTimes {
        vlm_s: secs(ModuleKind::Scorer),
        det_s: secs(ModuleKind::Detector),
        seg_s: secs(ModuleKind::Segmenter),
        vqa_s: secs(ModuleKind::Verifier),
    }
}

/// Module names of a configuration, for table rendering.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineSummary {
    pub vlm: String,
    pub detector: String,
    pub segmenter: String,
    pub vqa: Option<String>,
}

impl From<&PipelineConfig> for PipelineSummary {
    fn from(p: &PipelineConfig) -> Self {
        PipelineSummary {
            vlm: p.scorer().name.clone(),
            detector: p.detector().name.clone(),
            segmenter: p.segmenter().name.clone(),
            vqa: p.verifier().map(|v| v.name.clone()),
        }
    }
}

/// One row of the report. Field names are the CSV/JSON column names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub config: String,
    pub episodes: usize,
    /// Success rate, percent.
    pub sr: f64,
    /// SPL, percent.
    pub spl: f64,
    pub avg_steps: f64,
    pub avg_reward: f64,
    pub vlm_s: f64,
    pub det_s: f64,
    pub seg_s: f64,
    pub vqa_s: f64,
    /// Modeled total including per-step overhead, minutes.
    pub total_min: f64,
    pub vram_mib: u64,
    #[serde(skip)]
    pub pipeline: Option<PipelineSummary>,
}

pub const CSV_HEADER: &str = "config,episodes,sr,spl,avg_steps,avg_reward,vlm_s,det_s,seg_s,vqa_s,total_min,vram_mib";

impl AggregateReport {
    pub fn total_s(&self) -> f64 {
        self.total_min * 60.0
    }
}

pub fn aggregate(results: &[EpisodeResult], pipeline: &PipelineConfig, name: &str) -> Result<AggregateReport> {
    non_empty(results)?;
    let n = results.len() as f64;
    let times = modeled_component_time(results, pipeline);
    let total_ms: f64 = results.iter().map(|r| r.modeled_time_ms).sum();
    Ok(AggregateReport {
        config: name.to_owned(),
        episodes: results.len(),
        sr: success_rate(results)?,
        spl: spl(results)?,
        avg_steps: results.iter().map(|r| r.steps as f64).sum::<f64>() / n,
        avg_reward: results.iter().map(|r| r.reward).sum::<f64>() / n,
        vlm_s: times.vlm_s,
        det_s: times.det_s,
        seg_s: times.seg_s,
        vqa_s: times.vqa_s,
        total_min: total_ms / 1000.0 / 60.0,
        vram_mib: vram_total(pipeline),
        pipeline: Some(pipeline.into()),
    })
}

pub fn write_csv<W: Write>(reports: &[AggregateReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if reports.is_empty() {
        w.write_record(CSV_HEADER.split(','))?;
    }
    for r in reports {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn to_csv(reports: &[AggregateReport]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(reports, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

pub fn from_csv(text: &str) -> Result<Vec<AggregateReport>> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rd.headers()?.iter().map(str::to_owned).collect();
    if header.join(",") != CSV_HEADER {
        return Err(Error::parse("report csv", format!("unexpected header `{}`", header.join(","))));
    }
    rd.deserialize().map(|r| r.map_err(Error::from)).collect()
}

pub fn to_json(reports: &[AggregateReport]) -> Result<String> {
    let mut s = serde_json::to_string_pretty(reports)?;
    s.push('\n');
    Ok(s)
}

pub fn from_json(text: &str) -> Result<Vec<AggregateReport>> {
    Ok(serde_json::from_str(text)?)
}

/// Aligned text table; columns follow VLM, Detector, VQA, Avg. reward, SPL,
/// SR, Time.
pub fn format_table(reports: &[AggregateReport]) -> String {
    let header = [
        "Config", "VLM", "Detector", "VQA", "Avg. reward", "SPL", "SR", "Time, min", "VRAM, MiB",
    ];
    let rows: Vec<[String; 9]> = reports
        .iter()
        .map(|r| {
            let (vlm, det, vqa) = match &r.pipeline {
                Some(p) => (
                    p.vlm.clone(),
                    p.detector.clone(),
                    p.vqa.clone().unwrap_or_else(|| "-".into()),
                ),
                None => ("?".into(), "?".into(), "?".into()),
            };
            [
                r.config.clone(),
                vlm,
                det,
                vqa,
                format!("{:.2}", r.avg_reward),
                format!("{:.2}", r.spl),
                format!("{:.2}", r.sr),
                format!("{:.2}", r.total_min),
                r.vram_mib.to_string(),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: Vec<&str>| {
        cells
            .iter()
            .zip(widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join(" | ")
            .trim_end()
            .to_owned()
    };
    let mut out = line(header.to_vec());
    out.push('\n');
    out.push_str(&widths.map(|w| "-".repeat(w)).join("-+-"));
    out.push('\n');
    for row in &rows {
        out.push_str(&line(row.iter().map(String::as_str).collect()));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perception::{builtin_profiles, DEFAULT_VRAM_BUDGET_MIB};

    pub(crate) fn result(success: bool, p: u32, l: u32, steps: u32) -> EpisodeResult {
        EpisodeResult {
            success,
            path_length: p,
            shortest_path_len: l,
            steps,
            module_calls: ModuleCalls {
                scorer: steps as u64,
                detector: steps as u64,
                segmenter: 0,
                verifier: 0,
            },
            modeled_time_ms: 0.0,
            reward: 0.0,
            path: vec![],
        }
    }

    fn final_pipeline() -> PipelineConfig {
        let r = builtin_profiles();
        PipelineConfig::new(
            r.get("CLIP-ViT-B32").unwrap().clone(),
            r.get("YOLOv7-W6").unwrap().clone(),
            r.get("MobileSAM").unwrap().clone(),
            None,
            DEFAULT_VRAM_BUDGET_MIB,
        )
        .unwrap()
    }

    #[test]
    fn spl_cases() {
        assert_eq!(spl(&[result(true, 10, 10, 20)]).unwrap(), 100.0);
        assert_eq!(spl(&[result(false, 10, 10, 20)]).unwrap(), 0.0);
        assert_eq!(spl(&[result(true, 20, 10, 30), result(false, 5, 10, 9)]).unwrap(), 25.0);
        // shorter than optimal cannot score above 1
        assert_eq!(spl(&[result(true, 5, 10, 9)]).unwrap(), 100.0);
        assert!(matches!(spl(&[]), Err(Error::EmptyInput)));
        assert!(spl(&[result(true, 1, 0, 1)]).is_err());
    }

    #[test]
    fn success_rate_cases() {
        let mut rs: Vec<_> = (0..30).map(|i| result(i < 21, 5, 5, 5)).collect();
        assert!((success_rate(&rs).unwrap() - 70.0).abs() < 1e-12);
        rs.iter_mut().for_each(|r| r.success = false);
        assert_eq!(success_rate(&rs).unwrap(), 0.0);
        rs.iter_mut().for_each(|r| r.success = true);
        assert_eq!(success_rate(&rs).unwrap(), 100.0);
        assert!(matches!(success_rate(&[]), Err(Error::EmptyInput)));
    }

    #[test]
    fn component_time_uses_latency() {
        let p = final_pipeline();
        let rs: Vec<_> = (0..30).map(|_| result(true, 5, 5, 186)).collect();
        let t = modeled_component_time(&rs, &p);
        assert!((t.vlm_s - 418.5).abs() < 1e-9);
        assert!((t.det_s - 30.0 * 186.0 * 0.1676).abs() < 1e-9);
        assert_eq!(t.seg_s, 0.0);
        let none: Vec<EpisodeResult> = vec![result(true, 5, 5, 0)];
        assert_eq!(modeled_component_time(&none, &p).total_s(), 0.0);
    }

    #[test]
    fn aggregate_fields() {
        let p = final_pipeline();
        let one = aggregate(&[result(true, 7, 7, 12)], &p, "final").unwrap();
        assert_eq!((one.sr, one.spl, one.vram_mib), (100.0, 100.0, 2774));
        let rs = [result(true, 7, 7, 12), result(false, 3, 7, 40), result(true, 9, 7, 17)];
        let agg = aggregate(&rs, &p, "final").unwrap();
        assert!((agg.avg_steps - 23.0).abs() < 1e-12);
        assert_eq!(agg.episodes, 3);
        assert!(matches!(aggregate(&[], &p, "x"), Err(Error::EmptyInput)));
    }

    #[test]
    fn csv_and_json_roundtrip() {
        let p = final_pipeline();
        let a = aggregate(&[result(true, 7, 7, 12)], &p, "final").unwrap();
        let b = aggregate(&[result(false, 7, 9, 31)], &p, "other").unwrap();
        let csv = to_csv(&[a.clone(), b.clone()]).unwrap();
        assert!(csv.starts_with(CSV_HEADER));
        assert_eq!(csv.lines().count(), 3);
        let back = from_csv(&csv).unwrap();
        let strip = |mut r: AggregateReport| {
            r.pipeline = None;
            r
        };
        assert_eq!(back, vec![strip(a.clone()), strip(b.clone())]);
        assert_eq!(from_json(&to_json(&back).unwrap()).unwrap(), back);
        assert!(from_csv("a,b\n1,2\n").is_err());
        assert_eq!(to_csv(&[]).unwrap().trim(), CSV_HEADER);
    }

    #[test]
    fn table_has_one_header_and_ordered_columns() {
        let p = final_pipeline();
        let a = aggregate(&[result(true, 7, 7, 12)], &p, "final").unwrap();
        let mut b = a.clone();
        b.config = "other".into();
        let t = format_table(&[a, b]);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 4);
        let h = lines[0];
        let pos = |s: &str| h.find(s).unwrap();
        assert!(pos("VLM") < pos("Detector"));
        assert!(pos("Detector") < pos("VQA"));
        assert!(pos("VQA") < pos("Avg. reward"));
        assert!(pos("Avg. reward") < pos("SPL"));
        assert!(pos("SPL") < pos("SR"));
        assert!(pos("SR") < pos("Time, min"));
        assert!(lines[2].contains("CLIP-ViT-B32"));
    }
}
