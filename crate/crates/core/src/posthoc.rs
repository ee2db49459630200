//! Influence analysis of the reflectance iterations by pixel masking.
//!
//! A probe zeroes one pixel of `R⁽ᵗ⁾`, reruns a single HQS step and
//! measures `Δ = Σ_c |R_masked⁽ᵗ⁺¹⁾ − R⁽ᵗ⁺¹⁾|`. Pixels where `Δ` is large
//! become edges `(t, i) → (t + 1, j)` of a directed influence graph.

use std::collections::HashSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::EnhanceConfig;
use crate::denoise::Denoiser;
use crate::grad::{FftSolverPlan, GradientField};
use crate::pipeline::{enhance_recording, shared_plans, DecompositionResult, EnhanceError};
use crate::raster::{ImagePlane, ImageRgb, PixelCoord};
use crate::reflectance::{channel_gradient_maps, HqsContext, ReflectanceError};

#[derive(Debug, Error)]
pub enum PosthocError {
    #[error("iteration {t} is out of range; {available} HQS steps were recorded")]
    InvalidIteration { t: usize, available: usize },
    #[error("probe ({row}, {col}) is outside the {height}x{width} image")]
    InvalidCoord {
        row: usize,
        col: usize,
        height: usize,
        width: usize,
    },
    #[error("no probe pixels given")]
    EmptyProbes,
    #[error(transparent)]
    Enhance(#[from] EnhanceError),
    #[error(transparent)]
    Reflectance(#[from] ReflectanceError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeOptions {
    /// Maximum number of edges per probe.
    pub top_k: usize,
    /// Edges need `Δ ≥ min_magnitude`.
    pub min_magnitude: f64,
    /// Whether the probed pixel may be its own target.
    pub include_self: bool,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        Self {
            top_k: 5,
            min_magnitude: 1e-4,
            include_self: true,
        }
    }
}

/// Edge from pixel `from` at iteration `t` to pixel `to` at `t + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "EdgeRecord", into = "EdgeRecord")]
pub struct InfluenceEdge {
    pub t: usize,
    pub from: PixelCoord,
    pub to: PixelCoord,
    pub magnitude: f64,
}

#[derive(Serialize, Deserialize)]
struct EdgeRecord {
    t: usize,
    from: [usize; 2],
    to: [usize; 2],
    mag: f64,
}

impl From<EdgeRecord> for InfluenceEdge {
    fn from(e: EdgeRecord) -> Self {
        Self {
            t: e.t,
            from: PixelCoord::new(e.from[0], e.from[1]),
            to: PixelCoord::new(e.to[0], e.to[1]),
            magnitude: e.mag,
        }
    }
}

impl From<InfluenceEdge> for EdgeRecord {
    fn from(e: InfluenceEdge) -> Self {
        Self {
            t: e.t,
            from: [e.from.row, e.from.col],
            to: [e.to.row, e.to.col],
            mag: e.magnitude,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceGraph {
    pub image: String,
    pub config_hash: String,
    pub edges: Vec<InfluenceEdge>,
}

impl InfluenceGraph {
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Graphviz rendering; nodes are named `t<iter>_r<row>_c<col>`.
    pub fn to_dot(&self) -> String {
        let node = |t: usize, p: PixelCoord| format!("t{t}_r{}_c{}", p.row, p.col);
        let mut out = String::from("digraph influence {\n");
        let _ = writeln!(
            out,
            "  label=\"{} {}\";",
            self.image.replace('"', "'"),
            self.config_hash
        );
        let mut seen = HashSet::new();
        for e in &self.edges {
            for (t, p) in [(e.t, e.from), (e.t + 1, e.to)] {
                if seen.insert((t, p)) {
                    let _ = writeln!(
                        out,
                        "  {} [label=\"t={t} ({},{})\"];",
                        node(t, p),
                        p.row,
                        p.col
                    );
                }
            }
        }
        for e in &self.edges {
            let _ = writeln!(
                out,
                "  {} -> {} [label=\"{:.3e}\", mag={}];",
                node(e.t, e.from),
                node(e.t + 1, e.to),
                e.magnitude,
                e.magnitude
            );
        }
        out.push_str("}\n");
        out
    }
}

/// Outcome of one probe.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeResult {
    pub edges: Vec<InfluenceEdge>,
    /// Per-pixel channel-summed absolute change.
    pub delta: ImagePlane,
}

/// Zeroes pixel `coord` of `r_t` (all channels).
pub fn mask_pixel(r_t: &ImageRgb, coord: PixelCoord) -> ImageRgb {
    let mut masked = r_t.clone();
    let i = coord.row * r_t.width() + coord.col;
    for p in masked.planes_mut() {
        p.data_mut()[i] = 0.0;
    }
    masked
}

/// `Σ_c |a − b|` per pixel.
pub fn channel_abs_sum(a: &ImageRgb, b: &ImageRgb) -> ImagePlane {
    let [a0, a1, a2] = a.channels();
    let [b0, b1, b2] = b.channels();
    let d0 = a0.zip_map(b0, |x, y| (x - y).abs());
    let d1 = a1.zip_map(b1, |x, y| (x - y).abs());
    let d2 = a2.zip_map(b2, |x, y| (x - y).abs());
    d0.add(&d1).add(&d2)
}

/// The `top_k` largest entries of `delta` with value `≥ min_magnitude`,
/// ties broken by row-major position.
pub fn select_targets(
    delta: &ImagePlane,
    from: PixelCoord,
    opts: &ProbeOptions,
) -> Vec<(PixelCoord, f64)> {
    let w = delta.width();
    let mut candidates: Vec<(usize, f64)> = delta
        .data()
        .iter()
        .copied()
        .enumerate()
        .filter(|&(i, d)| {
            d >= opts.min_magnitude && (opts.include_self || i != from.row * w + from.col)
        })
        .collect();
    candidates.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    candidates.truncate(opts.top_k);
    candidates
        .into_iter()
        .map(|(i, d)| (PixelCoord::new(i / w, i % w), d))
        .collect()
}

/// One probe against an HQS context and the recorded iterate `r_t`.
pub fn probe_pixel(
    ctx: &HqsContext<'_>,
    r_t: &ImageRgb,
    t: usize,
    coord: PixelCoord,
    opts: &ProbeOptions,
) -> Result<ProbeResult, PosthocError> {
    let (h, w) = r_t.dims();
    if coord.row >= h || coord.col >= w {
        return Err(PosthocError::InvalidCoord {
            row: coord.row,
            col: coord.col,
            height: h,
            width: w,
        });
    }
    let (_, baseline) = ctx.step(r_t, t)?;
    let (_, masked) = ctx.step(&mask_pixel(r_t, coord), t)?;
    let delta = channel_abs_sum(&masked, &baseline);
    let edges = select_targets(&delta, coord, opts)
        .into_iter()
        .map(|(to, magnitude)| InfluenceEdge {
            t,
            from: coord,
            to,
            magnitude,
        })
        .collect();
    Ok(ProbeResult { edges, delta })
}

/// A recorded pipeline run that probes can be replayed against.
pub struct ProbeSession {
    s: ImageRgb,
    cfg: EnhanceConfig,
    denoiser: Box<dyn Denoiser>,
    plan: std::sync::Arc<FftSolverPlan>,
    g: [GradientField; 3],
    result: DecompositionResult,
    snapshots: Vec<ImageRgb>,
}

impl ProbeSession {
    pub fn new(s: &ImageRgb, cfg: &EnhanceConfig) -> Result<Self, PosthocError> {
        cfg.validate().map_err(EnhanceError::from)?;
        let denoiser = cfg.denoiser.build().map_err(EnhanceError::DenoiserSetup)?;
        Self::with_denoiser(s, cfg, denoiser)
    }

    pub fn with_denoiser(
        s: &ImageRgb,
        cfg: &EnhanceConfig,
        denoiser: Box<dyn Denoiser>,
    ) -> Result<Self, PosthocError> {
        let run = enhance_recording(s, cfg, denoiser.as_ref())?;
        let g = channel_gradient_maps(s, cfg.eps, cfg.kappa, cfg.sigma)
            .map_err(ReflectanceError::from)?;
        Ok(Self {
            s: s.clone(),
            cfg: cfg.clone(),
            denoiser,
            plan: shared_plans().get(s.height(), s.width()),
            g,
            result: run.result,
            snapshots: run.snapshots,
        })
    }

    /// Number of HQS steps recorded; valid probe iterations are `0..steps`.
    pub fn steps(&self) -> usize {
        self.snapshots.len() - 1
    }

    pub fn result(&self) -> &DecompositionResult {
        &self.result
    }

    pub fn snapshot(&self, t: usize) -> Option<&ImageRgb> {
        self.snapshots.get(t)
    }

    pub fn config(&self) -> &EnhanceConfig {
        &self.cfg
    }

    fn context(&self) -> HqsContext<'_> {
        HqsContext {
            s: &self.s,
            l: &self.result.l,
            g: self.g.clone(),
            plan: &self.plan,
            denoiser: self.denoiser.as_ref(),
            cfg: &self.cfg,
        }
    }

    pub fn probe(
        &self,
        t: usize,
        coord: PixelCoord,
        opts: &ProbeOptions,
    ) -> Result<ProbeResult, PosthocError> {
        if t >= self.steps() {
            return Err(PosthocError::InvalidIteration {
                t,
                available: self.steps(),
            });
        }
        probe_pixel(&self.context(), &self.snapshots[t], t, coord, opts)
    }
}

/// Probes every `(probe, t)` pair and collects the edges. Repeated
/// `(t, from, to)` triples are kept once.
pub fn build_influence_graph(
    session: &ProbeSession,
    image: &str,
    probes: &[PixelCoord],
    iterations: &[usize],
    opts: &ProbeOptions,
) -> Result<InfluenceGraph, PosthocError> {
    if probes.is_empty() {
        return Err(PosthocError::EmptyProbes);
    }
    let mut seen = HashSet::new();
    let mut edges = Vec::new();
    for &t in iterations {
        for &coord in probes {
            for e in session.probe(t, coord, opts)?.edges {
                if seen.insert((e.t, e.from, e.to)) {
                    edges.push(e);
                }
            }
        }
    }
    Ok(InfluenceGraph {
        image: image.to_string(),
        config_hash: session.config().hash(),
        edges,
    })
}

/// Evenly spaced `rows × cols` grid of probe pixels, away from the border.
pub fn probe_grid(height: usize, width: usize, rows: usize, cols: usize) -> Vec<PixelCoord> {
    let spaced =
        |n: usize, k: usize| -> Vec<usize> { (0..k).map(|i| (2 * i + 1) * n / (2 * k)).collect() };
    let rs = spaced(height, rows);
    let cs = spaced(width, cols);
    rs.iter()
        .flat_map(|&r| cs.iter().map(move |&c| PixelCoord::new(r, c)))
        .collect()
}

/// Heat-map rendering of `delta`, normalized by its maximum: black, red,
/// yellow, white.
pub fn delta_heatmap(delta: &ImagePlane) -> ImageRgb {
    let peak = delta.max();
    let scale = if peak > 0.0 { 1.0 / peak } else { 0.0 };
    ImageRgb::from_fn(delta.height(), delta.width(), |r, c| {
        let v = (delta.get(r, c) * scale).clamp(0.0, 1.0) * 3.0;
        [
            v.min(1.0),
            (v - 1.0).clamp(0.0, 1.0),
            (v - 2.0).clamp(0.0, 1.0),
        ]
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoise::DenoiserSpec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dark_scene(h: usize, w: usize, seed: u64) -> ImageRgb {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ImageRgb::from_fn(h, w, |r, c| {
            let base = 0.05 + 0.1 * ((r as f64 * 0.4).sin() * (c as f64 * 0.3).cos()).abs();
            [0; 3].map(|_| base + rng.random_range(0.0..0.03))
        })
    }

    fn local_cfg() -> EnhanceConfig {
        EnhanceConfig {
            beta: 0.0,
            denoiser: DenoiserSpec::identity(),
            ..Default::default()
        }
    }

    #[test]
    fn identity_probe_is_a_self_loop() {
        let s = dark_scene(16, 16, 1);
        let session = ProbeSession::new(&s, &local_cfg()).unwrap();
        assert_eq!(session.steps(), 1);
        let p = PixelCoord::new(5, 7);
        let res = session.probe(0, p, &ProbeOptions::default()).unwrap();
        assert_eq!(res.edges.len(), 1);
        assert_eq!(res.edges[0].to, p);
        let nonzero = res.delta.data().iter().filter(|&&d| d != 0.0).count();
        assert_eq!(nonzero, 1);
    }

    #[test]
    fn threshold_above_peak_gives_no_edges() {
        let s = dark_scene(16, 16, 2);
        let session = ProbeSession::new(&s, &EnhanceConfig::default()).unwrap();
        let p = PixelCoord::new(8, 8);
        let res = session.probe(0, p, &ProbeOptions::default()).unwrap();
        let opts = ProbeOptions {
            min_magnitude: res.delta.max() * 1.01,
            ..Default::default()
        };
        assert!(session.probe(0, p, &opts).unwrap().edges.is_empty());
    }

    #[test]
    fn edge_magnitudes_match_recomputation() {
        let s = dark_scene(16, 16, 3);
        let cfg = EnhanceConfig::default();
        let session = ProbeSession::new(&s, &cfg).unwrap();
        let p = PixelCoord::new(4, 9);
        let res = session.probe(0, p, &ProbeOptions::default()).unwrap();
        let r0 = session.snapshot(0).unwrap();
        let den = cfg.denoiser.build().unwrap();
        let plan = FftSolverPlan::new(16, 16);
        let ctx = HqsContext::new(&s, &session.result().l, &plan, den.as_ref(), &cfg).unwrap();
        let (_, a) = ctx.step(r0, 0).unwrap();
        let (_, b) = ctx.step(&mask_pixel(r0, p), 0).unwrap();
        for e in &res.edges {
            let direct: f64 = (0..3)
                .map(|k| (a.channel(k).at(e.to) - b.channel(k).at(e.to)).abs())
                .sum();
            assert!((direct - e.magnitude).abs() < 1e-12);
        }
    }

    #[test]
    fn graph_counts_and_errors() {
        let s = dark_scene(16, 16, 4);
        let session = ProbeSession::new(&s, &local_cfg()).unwrap();
        let probes = probe_grid(16, 16, 2, 2);
        let g =
            build_influence_graph(&session, "x", &probes, &[0], &ProbeOptions::default()).unwrap();
        assert_eq!(g.edges.len(), 4);
        assert!(g.edges.iter().all(|e| e.from == e.to));
        assert!(
            build_influence_graph(&session, "x", &probes, &[], &ProbeOptions::default())
                .unwrap()
                .edges
                .is_empty()
        );
        assert!(matches!(
            build_influence_graph(&session, "x", &[], &[0], &ProbeOptions::default()),
            Err(PosthocError::EmptyProbes)
        ));
        assert!(matches!(
            session.probe(1, probes[0], &ProbeOptions::default()),
            Err(PosthocError::InvalidIteration { t: 1, available: 1 })
        ));
        assert!(matches!(
            session.probe(0, PixelCoord::new(16, 0), &ProbeOptions::default()),
            Err(PosthocError::InvalidCoord { .. })
        ));
    }

    #[test]
    fn edge_budget() {
        let s = dark_scene(24, 24, 5);
        let session = ProbeSession::new(&s, &EnhanceConfig::default()).unwrap();
        let iters: Vec<usize> = (0..session.steps().min(2)).collect();
        let g = build_influence_graph(
            &session,
            "x",
            &probe_grid(24, 24, 2, 2),
            &iters,
            &ProbeOptions::default(),
        )
        .unwrap();
        assert!(g.edges.len() <= 4 * iters.len() * 5);
    }

    #[test]
    fn exclude_self_option() {
        let s = dark_scene(16, 16, 6);
        let session = ProbeSession::new(&s, &local_cfg()).unwrap();
        let opts = ProbeOptions {
            include_self: false,
            ..Default::default()
        };
        assert!(session
            .probe(0, PixelCoord::new(3, 3), &opts)
            .unwrap()
            .edges
            .is_empty());
    }

    #[test]
    fn json_and_dot_shapes() {
        let g = InfluenceGraph {
            image: "img".into(),
            config_hash: "abc".into(),
            edges: vec![InfluenceEdge {
                t: 0,
                from: PixelCoord::new(1, 2),
                to: PixelCoord::new(3, 4),
                magnitude: 0.5,
            }],
        };
        let v: serde_json::Value = serde_json::from_str(&g.to_json_pretty()).unwrap();
        assert_eq!(v["edges"][0]["from"], serde_json::json!([1, 2]));
        assert_eq!(v["edges"][0]["to"], serde_json::json!([3, 4]));
        assert_eq!(v["edges"][0]["mag"], serde_json::json!(0.5));
        assert_eq!(InfluenceGraph::from_json(&g.to_json_pretty()).unwrap(), g);
        let dot = g.to_dot();
        assert!(dot.starts_with("digraph influence {"));
        assert!(dot.contains("t0_r1_c2 -> t1_r3_c4"));
    }

    #[test]
    fn heatmap_range() {
        let d = ImagePlane::from_fn(4, 4, |r, c| (r * 4 + c) as f64);
        let hm = delta_heatmap(&d);
        assert_eq!(hm.pixel(0, 0), [0.0; 3]);
        assert_eq!(hm.pixel(3, 3), [1.0; 3]);
        assert_eq!(
            delta_heatmap(&ImagePlane::zeros(2, 2)).pixel(1, 1),
            [0.0; 3]
        );
    }

    #[test]
    fn grid_positions() {
        let g = probe_grid(100, 50, 2, 5);
        assert_eq!(g.len(), 10);
        assert_eq!(g[0], PixelCoord::new(25, 5));
        assert_eq!(g[9], PixelCoord::new(75, 45));
    }
}
