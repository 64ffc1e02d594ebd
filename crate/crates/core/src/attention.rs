//! Reference math for video embedding and answer classification over opaque
//! feature volumes: frame pooling, temporal (single- and multi-step) and
//! spatio-temporal attention, average pooling, a global-context perceptron
//! and the fused classifier. Everything is `f64` and dimension-generic.

use ndarray::{s, Array1, Array2, Array3, Array4, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{ForgeError, Result};
use crate::rng::SimRng;

/// Tolerance used by every invariant check.
pub const TOLERANCE: f64 = 1e-9;

fn shape(msg: String) -> ForgeError {
    ForgeError::Shape(msg)
}

/// A `C x T x H x W` volume.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVolume {
    data: Array4<f64>,
}

impl FeatureVolume {
    pub fn new(data: Array4<f64>) -> Result<Self> {
        if data.shape().contains(&0) {
            return Err(shape(format!("volume dims {:?} must all be at least 1", data.shape())));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(shape("volume has non-finite values".into()));
        }
        Ok(Self { data })
    }

    /// Row-major `(C, T, H, W)` values.
    pub fn from_flat(dims: [usize; 4], values: Vec<f64>) -> Result<Self> {
        let data = Array4::from_shape_vec(dims, values).map_err(|e| shape(format!("volume: {e}")))?;
        Self::new(data)
    }

    pub fn dims(&self) -> [usize; 4] {
        let s = self.data.shape();
        [s[0], s[1], s[2], s[3]]
    }

    pub fn data(&self) -> &Array4<f64> {
        &self.data
    }

    /// Flattening in canonical `(C, T, H, W)` row-major order.
    pub fn flatten(&self) -> Array1<f64> {
        self.data.iter().copied().collect()
    }
}

/// Fully connected layer `y = W x + b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Dense {
    pub fn new(w: Array2<f64>, b: Array1<f64>) -> Result<Self> {
        if w.nrows() != b.len() {
            return Err(shape(format!("dense: {} rows but bias of {}", w.nrows(), b.len())));
        }
        Ok(Self { w, b })
    }

    pub fn inputs(&self) -> usize {
        self.w.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.w.nrows()
    }

    pub fn forward(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        if x.len() != self.inputs() {
            return Err(shape(format!(
                "dense expects {} inputs, got {}",
                self.inputs(),
                x.len()
            )));
        }
        Ok(self.w.dot(&x) + &self.b)
    }

    fn random(rng: &mut SimRng, outputs: usize, inputs: usize) -> Self {
        let scale = 1.0 / (inputs as f64).sqrt();
        Self {
            w: Array2::from_shape_fn((outputs, inputs), |_| (2.0 * rng.next_f64() - 1.0) * scale),
            b: Array1::from_shape_fn(outputs, |_| 2.0 * rng.next_f64() - 1.0),
        }
    }
}

fn relu(x: Array1<f64>) -> Array1<f64> {
    x.mapv(|v| v.max(0.0))
}

/// `att(x, q)`: one ReLU hidden layer over the concatenation `[x; q]` and a
/// scalar output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionMlp {
    pub hidden: Dense,
    pub out: Dense,
}

impl AttentionMlp {
    pub fn new(hidden: Dense, out: Dense) -> Result<Self> {
        if out.outputs() != 1 || out.inputs() != hidden.outputs() {
            return Err(shape(format!(
                "attention output layer is {}x{}, expected 1x{}",
                out.outputs(),
                out.inputs(),
                hidden.outputs()
            )));
        }
        Ok(Self { hidden, out })
    }

    pub fn score(&self, x: ArrayView1<f64>, q: ArrayView1<f64>) -> Result<f64> {
        let mut input = Array1::zeros(x.len() + q.len());
        input.slice_mut(s![..x.len()]).assign(&x);
        input.slice_mut(s![x.len()..]).assign(&q);
        let h = relu(self.hidden.forward(input.view())?);
        Ok(self.out.forward(h.view())?[0])
    }
}

/// Numerically stable softmax.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let sum: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / sum).collect()
}

/// Spatial mean of each time step: a `T x C` matrix.
pub fn frame_features(v: &FeatureVolume) -> Array2<f64> {
    let [c, t, h, w] = v.dims();
    let cells = (h * w) as f64;
    let mut out = Array2::zeros((t, c));
    for ti in 0..t {
        for ci in 0..c {
            out[[ti, ci]] = v.data.slice(s![ci, ti, .., ..]).sum() / cells;
        }
    }
    out
}

fn weighted_frames(frames: &Array2<f64>, alpha: &[f64]) -> Array1<f64> {
    let mut out = Array1::zeros(frames.ncols());
    for (t, a) in alpha.iter().enumerate() {
        out.scaled_add(*a, &frames.row(t));
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct TemporalAttention {
    pub embedding: Array1<f64>,
    /// Attention over time, one vector per step.
    pub alphas: Vec<Vec<f64>>,
}

/// Single-step temporal attention: scores `att(f_t, q)`, softmax over time,
/// weighted sum of frame features.
pub fn temporal_attention_single(v: &FeatureVolume, q: &Array1<f64>, att: &AttentionMlp) -> Result<TemporalAttention> {
    let frames = frame_features(v);
    let scores = frames
        .rows()
        .into_iter()
        .map(|f| att.score(f, q.view()))
        .collect::<Result<Vec<_>>>()?;
    let alpha = softmax(&scores);
    Ok(TemporalAttention {
        embedding: weighted_frames(&frames, &alpha),
        alphas: vec![alpha],
    })
}

/// Multi-step temporal attention. Step `k` scores frames against
/// `q + e_{k-1}` where `e_0` is zero, so `steps > 1` needs the question and
/// frame features to share a dimension.
pub fn temporal_attention(
    v: &FeatureVolume,
    q: &Array1<f64>,
    att: &AttentionMlp,
    steps: usize,
) -> Result<TemporalAttention> {
    if steps == 0 {
        return Err(shape("temporal attention needs at least one step".into()));
    }
    let frames = frame_features(v);
    let c = frames.ncols();
    if steps > 1 && q.len() != c {
        return Err(shape(format!(
            "multi-step attention adds the {c}-dim embedding to a {}-dim question",
            q.len()
        )));
    }
    let mut previous: Option<Array1<f64>> = None;
    let mut alphas = Vec::with_capacity(steps);
    for _ in 0..steps {
        let probe = match &previous {
            Some(e) => q + e,
            None => q.clone(),
        };
        let scores = frames
            .rows()
            .into_iter()
            .map(|f| att.score(f, probe.view()))
            .collect::<Result<Vec<_>>>()?;
        let alpha = softmax(&scores);
        previous = Some(weighted_frames(&frames, &alpha));
        alphas.push(alpha);
    }
    Ok(TemporalAttention {
        embedding: previous.expect("at least one step"),
        alphas,
    })
}

/// Sum of `alpha[t,i,j] * f[:, t, i, j]`.
pub fn attend_with_weights(v: &FeatureVolume, alpha: &Array3<f64>) -> Result<Array1<f64>> {
    let [c, t, h, w] = v.dims();
    if alpha.shape() != [t, h, w] {
        return Err(shape(format!("weights {:?} do not cover {t}x{h}x{w}", alpha.shape())));
    }
    let mut out = Array1::zeros(c);
    for ci in 0..c {
        out[ci] = (&v.data.index_axis(Axis(0), ci) * alpha).sum();
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpatioTemporalAttention {
    pub embedding: Array1<f64>,
    pub alpha: Array3<f64>,
}

/// Attention over every `(t, i, j)` cell of the volume.
pub fn spatiotemporal_attention(
    v: &FeatureVolume,
    q: &Array1<f64>,
    att: &AttentionMlp,
) -> Result<SpatioTemporalAttention> {
    let [_, t, h, w] = v.dims();
    let mut scores = Vec::with_capacity(t * h * w);
    for ti in 0..t {
        for i in 0..h {
            for j in 0..w {
                scores.push(att.score(v.data.slice(s![.., ti, i, j]), q.view())?);
            }
        }
    }
    let alpha = Array3::from_shape_vec((t, h, w), softmax(&scores)).expect("one weight per cell");
    Ok(SpatioTemporalAttention {
        embedding: attend_with_weights(v, &alpha)?,
        alpha,
    })
}

/// Per-channel mean over time and space.
pub fn average_pool_embed(v: &FeatureVolume) -> Array1<f64> {
    let [c, t, h, w] = v.dims();
    let n = (t * h * w) as f64;
    Array1::from_shape_fn(c, |ci| v.data.index_axis(Axis(0), ci).sum() / n)
}

/// Uniform weights over a `T x H x W` grid.
pub fn uniform_weights(t: usize, h: usize, w: usize) -> Array3<f64> {
    Array3::from_elem((t, h, w), 1.0 / (t * h * w) as f64)
}

/// Perceptron over the flattened volume with a ReLU after every layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlobalContextMlp {
    pub layers: Vec<Dense>,
}

impl GlobalContextMlp {
    pub fn new(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(shape("global context perceptron has no layers".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(shape(format!(
                    "layer with {} outputs feeds a layer with {} inputs",
                    pair[0].outputs(),
                    pair[1].inputs()
                )));
            }
        }
        Ok(Self { layers })
    }
}

pub fn global_context_embed(v: &FeatureVolume, mlp: &GlobalContextMlp) -> Result<Array1<f64>> {
    let mut x = v.flatten();
    for layer in &mlp.layers {
        x = relu(layer.forward(x.view())?);
    }
    Ok(x)
}

/// Question projection and answer classifier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    /// `D_emb x D_q`.
    pub w_q: Array2<f64>,
    /// `classes x D_emb`.
    pub w_cls: Array2<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_cls: Option<Array1<f64>>,
}

impl Projection {
    pub fn new(w_q: Array2<f64>, w_cls: Array2<f64>, b_cls: Option<Array1<f64>>) -> Result<Self> {
        if w_q.nrows() != w_cls.ncols() {
            return Err(shape(format!(
                "question projection gives {} dims, classifier takes {}",
                w_q.nrows(),
                w_cls.ncols()
            )));
        }
        if let Some(b) = &b_cls {
            if b.len() != w_cls.nrows() {
                return Err(shape(format!(
                    "classifier bias has {} entries for {} classes",
                    b.len(),
                    w_cls.nrows()
                )));
            }
        }
        Ok(Self { w_q, w_cls, b_cls })
    }

    pub fn classes(&self) -> usize {
        self.w_cls.nrows()
    }
}

/// `W_cls (e ⊙ relu(W_q q)) + b`.
pub fn logits(v_emb: &Array1<f64>, q: &Array1<f64>, proj: &Projection) -> Result<Array1<f64>> {
    if q.len() != proj.w_q.ncols() {
        return Err(shape(format!(
            "question has {} dims, projection takes {}",
            q.len(),
            proj.w_q.ncols()
        )));
    }
    if v_emb.len() != proj.w_q.nrows() {
        return Err(shape(format!(
            "video embedding has {} dims, projection gives {}",
            v_emb.len(),
            proj.w_q.nrows()
        )));
    }
    let q_hat = relu(proj.w_q.dot(q));
    let mut z = proj.w_cls.dot(&(v_emb * &q_hat));
    if let Some(b) = &proj.b_cls {
        z += b;
    }
    Ok(z)
}

/// Answer distribution.
pub fn classify(v_emb: &Array1<f64>, q: &Array1<f64>, proj: &Projection) -> Result<Array1<f64>> {
    let z = logits(v_emb, q, proj)?;
    Ok(Array1::from(softmax(z.as_slice().expect("contiguous logits"))))
}

/// Dimensions of a fixture. `hidden` is the attention MLP width, `gc` the
/// global-context layer widths; the embedding dimension equals `c`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureDims {
    pub c: usize,
    pub t: usize,
    pub h: usize,
    pub w: usize,
    pub dq: usize,
    pub hidden: usize,
    pub classes: usize,
    pub steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fixture {
    pub dims: FixtureDims,
    /// Row-major `(C, T, H, W)`.
    pub volume: Vec<f64>,
    pub question: Vec<f64>,
    pub att: AttentionMlp,
    pub proj: Projection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gc: Option<GlobalContextMlp>,
}

impl Fixture {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let fixture: Fixture = serde_json::from_str(text).map_err(|e| ForgeError::json(e.line(), &e))?;
        fixture.check_shapes()?;
        Ok(fixture)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ForgeError::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn volume(&self) -> Result<FeatureVolume> {
        let d = self.dims;
        FeatureVolume::from_flat([d.c, d.t, d.h, d.w], self.volume.clone())
    }

    pub fn question(&self) -> Array1<f64> {
        Array1::from(self.question.clone())
    }

    fn check_shapes(&self) -> Result<()> {
        let d = self.dims;
        self.volume()?;
        if self.question.len() != d.dq {
            return Err(shape(format!(
                "question has {} values, dims say {}",
                self.question.len(),
                d.dq
            )));
        }
        AttentionMlp::new(self.att.hidden.clone(), self.att.out.clone())?;
        if self.att.hidden.inputs() != d.c + d.dq || self.att.hidden.outputs() != d.hidden {
            return Err(shape(format!(
                "attention hidden layer is {}x{}, dims say {}x{}",
                self.att.hidden.outputs(),
                self.att.hidden.inputs(),
                d.hidden,
                d.c + d.dq
            )));
        }
        Projection::new(self.proj.w_q.clone(), self.proj.w_cls.clone(), self.proj.b_cls.clone())?;
        if self.proj.w_q.dim() != (d.c, d.dq) || self.proj.classes() != d.classes {
            return Err(shape("projection does not match dims".into()));
        }
        if let Some(gc) = &self.gc {
            GlobalContextMlp::new(gc.layers.clone())?;
            if gc.layers[0].inputs() != d.c * d.t * d.h * d.w {
                return Err(shape("global context input is not the flattened volume".into()));
            }
        }
        if d.steps == 0 || (d.steps > 1 && d.dq != d.c) {
            return Err(shape("steps must be 1, or question dim must equal channels".into()));
        }
        Ok(())
    }

    /// Random fixture with every value in `[-1, 1)`. The question dimension
    /// equals `c` so multi-step attention applies.
    pub fn random(seed: u64, c: usize, t: usize, h: usize, w: usize, classes: usize, steps: usize) -> Self {
        let mut rng = SimRng::new(seed);
        let hidden = 1 + rng.below(6) as usize;
        let dq = c;
        let mut uniform = |n: usize| (0..n).map(|_| 2.0 * rng.next_f64() - 1.0).collect::<Vec<_>>();
        let volume = uniform(c * t * h * w);
        let question = uniform(dq);
        let att = AttentionMlp {
            hidden: Dense::random(&mut rng, hidden, c + dq),
            out: Dense::random(&mut rng, 1, hidden),
        };
        let proj = Projection {
            w_q: Dense::random(&mut rng, c, dq).w,
            w_cls: Dense::random(&mut rng, classes, c).w,
            b_cls: None,
        };
        let gc = GlobalContextMlp {
            layers: vec![
                Dense::random(&mut rng, 4, c * t * h * w),
                Dense::random(&mut rng, 4, 4),
                Dense::random(&mut rng, c, 4),
            ],
        };
        Fixture {
            dims: FixtureDims {
                c,
                t,
                h,
                w,
                dq,
                hidden,
                classes,
                steps,
            },
            volume,
            question,
            att,
            proj,
            gc: Some(gc),
        }
    }
}

/// Largest dimensions [`Fixture::random_bounded`] draws.
pub const RANDOM_MAX_DIMS: [usize; 4] = [8, 6, 4, 5];

impl Fixture {
    /// Random fixture with `C x T x H x W` drawn uniformly up to
    /// [`RANDOM_MAX_DIMS`], 2-6 classes and 1-3 attention steps.
    pub fn random_bounded(seed: u64) -> Self {
        let mut rng = SimRng::derive(seed, 0);
        let [c, t, h, w] = RANDOM_MAX_DIMS.map(|m| 1 + rng.below(m as u64) as usize);
        let classes = 2 + rng.below(5) as usize;
        let steps = 1 + rng.below(3) as usize;
        Self::random(rng.next_u64(), c, t, h, w, classes, steps)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvariantCheck {
    pub name: String,
    pub passed: bool,
    /// Largest deviation seen; zero for exact checks that hold.
    pub deviation: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    pub checks: Vec<InvariantCheck>,
}

impl InvariantReport {
    pub fn ok(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn within(&mut self, name: &str, deviation: f64) {
        self.checks.push(InvariantCheck {
            name: name.to_owned(),
            passed: deviation <= TOLERANCE,
            deviation,
        });
    }

    fn exact(&mut self, name: &str, equal: bool, deviation: f64) {
        self.checks.push(InvariantCheck {
            name: name.to_owned(),
            passed: equal,
            deviation,
        });
    }
}

fn distribution_error(p: &[f64]) -> f64 {
    let sum: f64 = p.iter().sum();
    let negative = p.iter().map(|&x| (-x).max(0.0)).fold(0.0, f64::max);
    (sum - 1.0).abs().max(negative)
}

fn max_abs_diff(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Evaluates every attention and classifier invariant on one fixture.
pub fn check_invariants(fixture: &Fixture) -> Result<InvariantReport> {
    fixture.check_shapes()?;
    let v = fixture.volume()?;
    let q = fixture.question();
    let [c, t, h, w] = v.dims();
    let mut report = InvariantReport::default();

    let single = temporal_attention_single(&v, &q, &fixture.att)?;
    let multi = temporal_attention(&v, &q, &fixture.att, fixture.dims.steps)?;
    let st = spatiotemporal_attention(&v, &q, &fixture.att)?;
    let alpha_error = single
        .alphas
        .iter()
        .chain(&multi.alphas)
        .map(|a| distribution_error(a))
        .chain([distribution_error(st.alpha.as_slice().expect("contiguous"))])
        .fold(0.0, f64::max);
    report.within("attention weights form distributions", alpha_error);

    let one_step = temporal_attention(&v, &q, &fixture.att, 1)?;
    report.exact(
        "one-step multi-step equals single-step",
        one_step == single,
        max_abs_diff(&one_step.embedding, &single.embedding),
    );

    let ap = average_pool_embed(&v);
    let uniform = attend_with_weights(&v, &uniform_weights(t, h, w))?;
    report.within("average pooling equals uniform attention", max_abs_diff(&ap, &uniform));

    // reverse the cell order inside each time step
    let mut permuted = v.data.clone();
    for ci in 0..c {
        for ti in 0..t {
            for i in 0..h {
                for j in 0..w {
                    permuted[[ci, ti, i, j]] = v.data[[ci, ti, h - 1 - i, w - 1 - j]];
                }
            }
        }
    }
    let permuted = FeatureVolume::new(permuted)?;
    let moved = temporal_attention(&permuted, &q, &fixture.att, fixture.dims.steps)?;
    report.within(
        "temporal attention ignores spatial order",
        max_abs_diff(&moved.embedding, &multi.embedding),
    );

    let mut classify_error: f64 = 0.0;
    let mut shift_error: f64 = 0.0;
    let mut embeddings = vec![single.embedding, multi.embedding, st.embedding, ap];
    if let Some(gc) = &fixture.gc {
        embeddings.push(global_context_embed(&v, gc)?);
    }
    for e in embeddings.iter().filter(|e| e.len() == c) {
        let z = logits(e, &q, &fixture.proj)?;
        let p = Array1::from(softmax(z.as_slice().expect("contiguous")));
        classify_error = classify_error.max(distribution_error(p.as_slice().expect("contiguous")));
        let shifted = z.mapv(|x| x + 3.7);
        let p2 = Array1::from(softmax(shifted.as_slice().expect("contiguous")));
        shift_error = shift_error.max(max_abs_diff(&p, &p2));
    }
    report.within("classifier outputs a distribution", classify_error);
    report.within("classifier is shift invariant", shift_error);
    Ok(report)
}
