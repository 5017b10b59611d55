//! Per-subject calibration mapping the optical axis to the visual axis.
//!
//! Two interchangeable mappers, both trained on calibration frames only:
//!
//! * [`PolyMapper`] — second-order polynomial over the angular
//!   parameterization, fit in closed form by least squares.
//! * [`DenseGazeNet`] — a five-layer fully connected network
//!   (3 -> 64 -> 96 -> 96 -> 64 -> 3, rectifier activations) applied as a
//!   residual on top of the identity and trained by full-batch gradient
//!   descent with momentum. With the final layer zero-initialized the
//!   untrained network is exactly the identity, which is the right prior
//!   for a map that differs from the identity by a few degrees of kappa.
//!
//! Training minimizes mean squared error between the pre-normalized output
//! and the unit target; evaluation always uses angular error. Applied
//! outputs are unit length.

use std::io::{BufRead, Write};

use nalgebra::{SMatrix, SVector, Unit, Vector3};

use crate::error::{Error, Result};
use crate::gaze::{from_angles, to_angles, GazeFrameSpec, ARCMIN_PER_RAD};
use crate::geom::{Dir3, Point3};
use crate::rng::SplitMix64;

/// Paired (optical axis, true visual axis) directions in the device frame,
/// both unit length.
#[derive(Debug, Clone, Default)]
pub struct CalibrationSet {
    pub pairs: Vec<(Dir3, Dir3)>,
}

impl CalibrationSet {
    pub fn new(pairs: Vec<(Dir3, Dir3)>) -> Self {
        Self { pairs }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

// ---------------------------------------------------------------------------
// Polynomial mapper
// ---------------------------------------------------------------------------

/// Basis terms at angles (x, y) in radians: [1, x, y, x^2, xy, y^2].
fn poly_basis(x: f64, y: f64) -> [f64; 6] {
    [1.0, x, y, x * x, x * y, y * y]
}

/// Second-order polynomial in the angular parameterization; six
/// coefficients per output channel (horizontal, vertical), angles in
/// radians.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyMapper {
    pub coefficients: [[f64; 6]; 2],
}

impl PolyMapper {
    /// The identity map: horizontal = x, vertical = y.
    pub fn identity() -> Self {
        Self {
            coefficients: [
                [0.0, 1.0, 0.0, 0.0, 0.0, 0.0],
                [0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
            ],
        }
    }
}

fn angles_rad(dir: &Dir3, frame: &GazeFrameSpec) -> Result<(f64, f64)> {
    let (h, v) = to_angles(dir, frame)?;
    Ok((h / ARCMIN_PER_RAD, v / ARCMIN_PER_RAD))
}

/// Least-squares fit of the polynomial mapper: the normal equations of the
/// six-term basis are solved per output channel, so the training residual
/// is the global least-squares minimum.
pub fn fit_polynomial(cal: &CalibrationSet, frame: &GazeFrameSpec) -> Result<PolyMapper> {
    if cal.len() < 6 {
        return Err(Error::Underdetermined(cal.len()));
    }
    let mut normal = SMatrix::<f64, 6, 6>::zeros();
    let mut rhs_h = SVector::<f64, 6>::zeros();
    let mut rhs_v = SVector::<f64, 6>::zeros();
    for (optical, visual) in &cal.pairs {
        let (x, y) = angles_rad(optical, frame)?;
        let (tx, ty) = angles_rad(visual, frame)?;
        let phi = SVector::<f64, 6>::from(poly_basis(x, y));
        normal += phi * phi.transpose();
        rhs_h += phi * tx;
        rhs_v += phi * ty;
    }
    let chol = normal.cholesky().ok_or(Error::SingularBasis)?;
    Ok(PolyMapper {
        coefficients: [chol.solve(&rhs_h).into(), chol.solve(&rhs_v).into()],
    })
}

/// Applies the polynomial mapper: optical direction -> angles ->
/// polynomial -> visual direction.
pub fn apply_polynomial(
    mapper: &PolyMapper,
    optical: &Dir3,
    frame: &GazeFrameSpec,
) -> Result<Dir3> {
    let (x, y) = angles_rad(optical, frame)?;
    let phi = poly_basis(x, y);
    let dot = |c: &[f64; 6]| c.iter().zip(&phi).map(|(a, b)| a * b).sum::<f64>();
    let h = dot(&mapper.coefficients[0]);
    let v = dot(&mapper.coefficients[1]);
    Ok(from_angles(h * ARCMIN_PER_RAD, v * ARCMIN_PER_RAD, frame))
}

// ---------------------------------------------------------------------------
// Dense residual network
// ---------------------------------------------------------------------------

pub const LAYER_WIDTHS: [usize; 6] = [3, 64, 96, 96, 64, 3];

// Fixed input encoding applied before the first layer: gaze directions
// cluster tightly around the device forward axis, so feeding raw unit
// vectors would give the network nearly collinear inputs and terrible
// conditioning. Centering on +z and scaling the residual up to O(1)
// disperses the features. Architectural constants, not fitted values.
const ENCODE_CENTER: [f64; 3] = [0.0, 0.0, 1.0];
const ENCODE_SCALE: f64 = 8.0;

fn encode_input(x: &Vector3<f64>) -> [f64; 3] {
    [
        (x.x - ENCODE_CENTER[0]) * ENCODE_SCALE,
        (x.y - ENCODE_CENTER[1]) * ENCODE_SCALE,
        (x.z - ENCODE_CENTER[2]) * ENCODE_SCALE,
    ]
}

#[derive(Debug, Clone, PartialEq)]
struct DenseLayer {
    /// Row-major `rows x cols` weight matrix.
    weights: Vec<f64>,
    biases: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl DenseLayer {
    fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            weights: vec![0.0; rows * cols],
            biases: vec![0.0; rows],
            rows,
            cols,
        }
    }

    fn apply(&self, input: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.rows);
        for r in 0..self.rows {
            let row = &self.weights[r * self.cols..(r + 1) * self.cols];
            let z = row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>() + self.biases[r];
            out.push(z);
        }
        out
    }
}

/// Five-layer fully connected gaze mapping network.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseGazeNet {
    layers: Vec<DenseLayer>,
    residual: bool,
}

/// Fan-in-scaled uniform init for the hidden layers, zero init for the
/// final layer; with the residual flag set the untrained network is the
/// exact identity map. Deterministic in the seed.
pub fn net_init(seed: u64) -> DenseGazeNet {
    let mut rng = SplitMix64::new(seed);
    let mut layers = Vec::with_capacity(LAYER_WIDTHS.len() - 1);
    for i in 0..LAYER_WIDTHS.len() - 1 {
        let (cols, rows) = (LAYER_WIDTHS[i], LAYER_WIDTHS[i + 1]);
        let mut layer = DenseLayer::zeros(rows, cols);
        if i != LAYER_WIDTHS.len() - 2 {
            let scale = 1.0 / (cols as f64).sqrt();
            for w in &mut layer.weights {
                *w = rng.next_range(-scale, scale);
            }
        }
        layers.push(layer);
    }
    DenseGazeNet {
        layers,
        residual: true,
    }
}

/// Per-sample forward cache: activations of every layer (entry 0 is the
/// input) and pre-activations for the backward pass.
struct ForwardCache {
    activations: Vec<Vec<f64>>,
    pre_activations: Vec<Vec<f64>>,
}

impl DenseGazeNet {
    pub fn residual(&self) -> bool {
        self.residual
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    fn forward_cached(&self, input: [f64; 3]) -> ForwardCache {
        let mut activations = vec![input.to_vec()];
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = layer.apply(activations.last().unwrap());
            pre_activations.push(z.clone());
            if i != self.layers.len() - 1 {
                for v in &mut z {
                    *v = v.max(0.0);
                }
            }
            activations.push(z);
        }
        ForwardCache {
            activations,
            pre_activations,
        }
    }

    fn raw_output(&self, x: &Vector3<f64>) -> Vector3<f64> {
        let cache = self.forward_cached(encode_input(x));
        let out = cache.activations.last().unwrap();
        Vector3::new(out[0], out[1], out[2])
    }

    /// Output before renormalization: `input + residual(input)` when the
    /// residual flag is set, else the raw final-layer output. The training
    /// loss is defined on this quantity.
    pub fn forward_pre_normalized(&self, optical: &Dir3) -> Vector3<f64> {
        let x = optical.into_inner();
        let raw = self.raw_output(&x);
        if self.residual {
            x + raw
        } else {
            raw
        }
    }

    /// Unit-length visual axis prediction.
    pub fn forward(&self, optical: &Dir3) -> Result<Dir3> {
        let x = optical.into_inner();
        let raw = self.raw_output(&x);
        if self.residual && raw == Vector3::zeros() {
            // Zero residual (the zero-initialized untrained net): identity,
            // exactly.
            return Ok(*optical);
        }
        let y = if self.residual { x + raw } else { raw };
        let norm = y.norm();
        if norm < 1e-9 {
            return Err(Error::DegenerateOutput(norm));
        }
        Ok(Unit::new_unchecked(y / norm))
    }

    /// Flattened parameters, layer by layer (weights row-major, then
    /// biases).
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        for layer in &self.layers {
            out.extend_from_slice(&layer.weights);
            out.extend_from_slice(&layer.biases);
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.parameter_count());
        let mut offset = 0;
        for layer in &mut self.layers {
            let nw = layer.weights.len();
            layer.weights.copy_from_slice(&params[offset..offset + nw]);
            offset += nw;
            let nb = layer.biases.len();
            layer.biases.copy_from_slice(&params[offset..offset + nb]);
            offset += nb;
        }
    }

    /// Full-batch training loss and its gradient with respect to every
    /// parameter (flattened as in [`params`](Self::params)):
    /// `L = mean_i |y_i - t_i|^2 + (wd/2) sum |W|^2`, weight decay on
    /// weights only. This is exactly the gradient the training step
    /// descends; exposed so backpropagation can be checked against finite
    /// differences.
    pub fn loss_and_gradient(
        &self,
        cal: &CalibrationSet,
        weight_decay: f64,
    ) -> Result<(f64, Vec<f64>)> {
        if cal.is_empty() {
            return Err(Error::EmptyInput);
        }
        let n = cal.len() as f64;
        let mut grads: Vec<DenseLayer> = self
            .layers
            .iter()
            .map(|l| DenseLayer::zeros(l.rows, l.cols))
            .collect();
        let mut loss = 0.0;

        for (optical, visual) in &cal.pairs {
            let x = optical.into_inner();
            let t = visual.into_inner();
            let cache = self.forward_cached(encode_input(&x));
            let out = cache.activations.last().unwrap();
            let raw = Vector3::new(out[0], out[1], out[2]);
            let y = if self.residual { x + raw } else { raw };
            let err = y - t;
            loss += err.norm_squared() / n;

            // d loss / d raw output; the residual add is the identity.
            let mut delta = vec![2.0 * err.x / n, 2.0 * err.y / n, 2.0 * err.z / n];
            for (l, layer) in self.layers.iter().enumerate().rev() {
                let input = &cache.activations[l];
                let grad = &mut grads[l];
                for (r, d) in delta.iter().enumerate() {
                    grad.biases[r] += d;
                    let row = &mut grad.weights[r * layer.cols..(r + 1) * layer.cols];
                    for (c, g) in row.iter_mut().enumerate() {
                        *g += d * input[c];
                    }
                }
                if l == 0 {
                    break;
                }
                let mut prev = vec![0.0; layer.cols];
                for (r, d) in delta.iter().enumerate() {
                    let row = &layer.weights[r * layer.cols..(r + 1) * layer.cols];
                    for (c, p) in prev.iter_mut().enumerate() {
                        *p += row[c] * d;
                    }
                }
                // Rectifier gate of the previous layer.
                for (p, z) in prev.iter_mut().zip(&cache.pre_activations[l - 1]) {
                    if *z <= 0.0 {
                        *p = 0.0;
                    }
                }
                delta = prev;
            }
        }

        if weight_decay > 0.0 {
            // Decay only the final layer: it is zero-initialized, so this
            // penalizes the magnitude of the learned residual map itself
            // and cannot fight the fixed random features of the hidden
            // layers (whose shrinkage would otherwise set a large error
            // floor).
            let layer = self.layers.last().unwrap();
            let grad = grads.last_mut().unwrap();
            for (w, g) in layer.weights.iter().zip(&mut grad.weights) {
                loss += 0.5 * weight_decay * w * w;
                *g += weight_decay * w;
            }
        }

        let mut flat = Vec::with_capacity(self.parameter_count());
        for grad in &grads {
            flat.extend_from_slice(&grad.weights);
            flat.extend_from_slice(&grad.biases);
        }
        Ok((loss, flat))
    }
}

/// Rectifier activation signature over a calibration set: one sign bit per
/// (sample, hidden unit). Finite-difference gradient checks must compare
/// points with the same signature, otherwise they straddle a kink of the
/// piecewise-smooth loss.
fn activation_signature(net: &DenseGazeNet, cal: &CalibrationSet) -> Vec<bool> {
    let mut signature = Vec::new();
    for (optical, _) in &cal.pairs {
        let cache = net.forward_cached(encode_input(&optical.into_inner()));
        for pre in &cache.pre_activations[..cache.pre_activations.len() - 1] {
            signature.extend(pre.iter().map(|&z| z > 0.0));
        }
    }
    signature
}

/// Checks backpropagation against central finite differences and returns
/// the worst relative disagreement found.
///
/// Spot-checks the strongest weight and bias gradient of every layer
/// (descending by magnitude), so each layer's backward path is covered at
/// parameters whose gradients finite differences can resolve. Candidates
/// whose perturbation flips a rectifier unit are skipped: across a kink
/// the two-sided difference does not estimate the one-sided derivative
/// backpropagation computes.
pub fn gradient_check(
    net: &DenseGazeNet,
    cal: &CalibrationSet,
    weight_decay: f64,
    step: f64,
) -> Result<f64> {
    let (_, grad) = net.loss_and_gradient(cal, weight_decay)?;
    let params = net.params();
    let base_signature = activation_signature(net, cal);

    let mut worst: f64 = 0.0;
    let mut offset = 0;
    for i in 0..LAYER_WIDTHS.len() - 1 {
        let (cols, rows) = (LAYER_WIDTHS[i], LAYER_WIDTHS[i + 1]);
        let weight_range = offset..offset + rows * cols;
        let bias_range = weight_range.end..weight_range.end + rows;
        offset = bias_range.end;
        for range in [weight_range, bias_range] {
            let mut candidates: Vec<usize> = range.collect();
            candidates.sort_by(|&a, &b| grad[b].abs().total_cmp(&grad[a].abs()));
            for &idx in candidates.iter().take(50) {
                let mut probe = net.clone();
                let mut p = params.clone();
                p[idx] += step;
                probe.set_params(&p);
                if activation_signature(&probe, cal) != base_signature {
                    continue;
                }
                let (loss_plus, _) = probe.loss_and_gradient(cal, weight_decay)?;
                p[idx] -= 2.0 * step;
                probe.set_params(&p);
                if activation_signature(&probe, cal) != base_signature {
                    continue;
                }
                let (loss_minus, _) = probe.loss_and_gradient(cal, weight_decay)?;
                let fd = (loss_plus - loss_minus) / (2.0 * step);
                let rel =
                    (grad[idx] - fd).abs() / grad[idx].abs().max(fd.abs()).max(1e-12);
                worst = worst.max(rel);
                break;
            }
        }
    }
    Ok(worst)
}

/// Hyperparameters for [`net_train`]. Full batch: calibration sets are
/// tiny and stochasticity would only add variance.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    /// Epoch budget; training may stop earlier at a loss plateau.
    pub epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    /// L2 penalty on the final-layer weights, i.e. on the magnitude of the
    /// learned residual; guards the many-parameters / few-samples regime.
    pub weight_decay: f64,
    /// Stop after this many consecutive epochs without a relative loss
    /// improvement of at least 1e-10 over the running best. Zero disables
    /// early stopping.
    pub plateau_epochs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 5000,
            learning_rate: 0.5,
            momentum: 0.3,
            weight_decay: 1e-4,
            plateau_epochs: 150,
        }
    }
}

const PLATEAU_RELATIVE_IMPROVEMENT: f64 = 1e-10;

/// Full-batch gradient descent with momentum on a private copy of the
/// network. Returns the trained network and the loss curve (the final loss
/// included, so the curve has `epochs + 1` entries). Bit-for-bit
/// deterministic given (net, data, config).
pub fn net_train(
    net: &DenseGazeNet,
    cal: &CalibrationSet,
    cfg: &TrainConfig,
) -> Result<(DenseGazeNet, Vec<f64>)> {
    if cal.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut net = net.clone();
    let mut params = net.params();
    let mut velocity = vec![0.0; params.len()];
    let mut losses = Vec::with_capacity(cfg.epochs + 1);
    let mut initial_loss = None;
    let mut best_loss = f64::INFINITY;
    let mut stalled = 0;

    for _ in 0..cfg.epochs {
        let (loss, grad) = net.loss_and_gradient(cal, cfg.weight_decay)?;
        let initial = *initial_loss.get_or_insert(loss);
        if loss > 10.0 * initial {
            return Err(Error::DivergedTraining { loss, initial });
        }
        losses.push(loss);
        if loss < best_loss * (1.0 - PLATEAU_RELATIVE_IMPROVEMENT) {
            best_loss = loss;
            stalled = 0;
        } else {
            stalled += 1;
            if cfg.plateau_epochs > 0 && stalled >= cfg.plateau_epochs {
                break;
            }
        }
        for ((p, v), g) in params.iter_mut().zip(&mut velocity).zip(&grad) {
            *v = cfg.momentum * *v - cfg.learning_rate * g;
            *p += *v;
        }
        net.set_params(&params);
    }
    let (final_loss, _) = net.loss_and_gradient(cal, cfg.weight_decay)?;
    losses.push(final_loss);
    Ok((net, losses))
}

// ---------------------------------------------------------------------------
// Fitted mapper wrapper and serialization
// ---------------------------------------------------------------------------

/// A fitted optical-to-visual-axis mapper, ready to apply per frame.
#[derive(Debug, Clone)]
pub enum GazeMapper {
    Poly {
        mapper: PolyMapper,
        frame: GazeFrameSpec,
    },
    Dense(DenseGazeNet),
}

impl GazeMapper {
    pub fn apply(&self, optical: &Dir3) -> Result<Dir3> {
        match self {
            GazeMapper::Poly { mapper, frame } => apply_polynomial(mapper, optical, frame),
            GazeMapper::Dense(net) => net.forward(optical),
        }
    }

    pub fn scheme(&self) -> &'static str {
        match self {
            GazeMapper::Poly { .. } => "poly",
            GazeMapper::Dense(_) => "dense",
        }
    }
}

const MAPPER_MAGIC: &str = "gazekit-mapper v1";

fn push_floats(line: &mut String, values: impl IntoIterator<Item = f64>) {
    for v in values {
        line.push(' ');
        line.push_str(&format!("{v}"));
    }
}

/// Serializes a mapper to the versioned text record. Floats are written in
/// shortest round-trip form, so save/load reproduces every value bit for
/// bit.
pub fn write_mapper(mapper: &GazeMapper) -> String {
    let mut out = format!("{MAPPER_MAGIC}\n");
    match mapper {
        GazeMapper::Poly { mapper, frame } => {
            out.push_str("scheme poly\n");
            let mut line = String::from("origin");
            push_floats(&mut line, frame.origin.coords.iter().copied());
            out.push_str(&line);
            out.push('\n');
            let mut line = String::from("reference");
            push_floats(&mut line, frame.reference_dir.into_inner().iter().copied());
            out.push_str(&line);
            out.push('\n');
            for (name, coeffs) in [
                ("channel_h", &mapper.coefficients[0]),
                ("channel_v", &mapper.coefficients[1]),
            ] {
                let mut line = String::from(name);
                push_floats(&mut line, coeffs.iter().copied());
                out.push_str(&line);
                out.push('\n');
            }
        }
        GazeMapper::Dense(net) => {
            out.push_str("scheme dense\n");
            out.push_str(&format!("residual {}\n", u8::from(net.residual)));
            let widths: Vec<String> = LAYER_WIDTHS.iter().map(|w| w.to_string()).collect();
            out.push_str(&format!("widths {}\n", widths.join(" ")));
            for (i, layer) in net.layers.iter().enumerate() {
                let mut line = format!("weights{i}");
                push_floats(&mut line, layer.weights.iter().copied());
                out.push_str(&line);
                out.push('\n');
                let mut line = format!("biases{i}");
                push_floats(&mut line, layer.biases.iter().copied());
                out.push_str(&line);
                out.push('\n');
            }
        }
    }
    out
}

pub fn save_mapper<W: Write>(mapper: &GazeMapper, out: &mut W) -> Result<()> {
    out.write_all(write_mapper(mapper).as_bytes())?;
    Ok(())
}

struct RecordReader<B> {
    lines: std::io::Lines<B>,
    lineno: usize,
}

impl<B: BufRead> RecordReader<B> {
    fn next_line(&mut self) -> Result<String> {
        self.lineno += 1;
        match self.lines.next() {
            Some(line) => Ok(line?),
            None => Err(Error::Parse {
                line: self.lineno,
                message: "unexpected end of file".into(),
            }),
        }
    }

    fn error(&self, message: String) -> Error {
        Error::Parse {
            line: self.lineno,
            message,
        }
    }

    /// Reads a `<keyword> <f64>...` line with exactly `count` values.
    fn floats(&mut self, keyword: &str, count: usize) -> Result<Vec<f64>> {
        let line = self.next_line()?;
        let mut parts = line.split_whitespace();
        let head = parts.next().unwrap_or_default();
        if head != keyword {
            return Err(self.error(format!("expected {keyword:?}, found {head:?}")));
        }
        let values: Vec<f64> = parts
            .map(|f| {
                f.parse()
                    .map_err(|_| self.error(format!("bad float {f:?}")))
            })
            .collect::<Result<_>>()?;
        if values.len() != count {
            return Err(self.error(format!("expected {count} values, got {}", values.len())));
        }
        Ok(values)
    }
}

pub fn load_mapper<R: BufRead>(reader: R) -> Result<GazeMapper> {
    let mut rec = RecordReader {
        lines: reader.lines(),
        lineno: 0,
    };
    let magic = rec.next_line()?;
    if magic.trim() != MAPPER_MAGIC {
        return Err(rec.error(format!("unrecognized header {magic:?}")));
    }
    let scheme = rec.next_line()?;
    match scheme.trim() {
        "scheme poly" => {
            let origin = rec.floats("origin", 3)?;
            let reference = rec.floats("reference", 3)?;
            let ch = rec.floats("channel_h", 6)?;
            let cv = rec.floats("channel_v", 6)?;
            let mut coefficients = [[0.0; 6]; 2];
            coefficients[0].copy_from_slice(&ch);
            coefficients[1].copy_from_slice(&cv);
            Ok(GazeMapper::Poly {
                mapper: PolyMapper { coefficients },
                frame: GazeFrameSpec {
                    origin: Point3::new(origin[0], origin[1], origin[2]),
                    // Stored unit-length; renormalizing would perturb the
                    // low bits and break the exact round trip.
                    reference_dir: Unit::new_unchecked(Vector3::new(
                        reference[0],
                        reference[1],
                        reference[2],
                    )),
                },
            })
        }
        "scheme dense" => {
            let residual = rec.floats("residual", 1)?[0] != 0.0;
            let widths = rec.floats("widths", LAYER_WIDTHS.len())?;
            let expected: Vec<f64> = LAYER_WIDTHS.iter().map(|&w| w as f64).collect();
            if widths != expected {
                return Err(rec.error(format!("unsupported layer widths {widths:?}")));
            }
            let mut layers = Vec::new();
            for i in 0..LAYER_WIDTHS.len() - 1 {
                let (cols, rows) = (LAYER_WIDTHS[i], LAYER_WIDTHS[i + 1]);
                let weights = rec.floats(&format!("weights{i}"), rows * cols)?;
                let biases = rec.floats(&format!("biases{i}"), rows)?;
                layers.push(DenseLayer {
                    weights,
                    biases,
                    rows,
                    cols,
                });
            }
            Ok(GazeMapper::Dense(DenseGazeNet { layers, residual }))
        }
        other => Err(rec.error(format!("unknown scheme line {other:?}"))),
    }
}
