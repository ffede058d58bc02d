//! The small feed-forward regressor every learned node uses to map a location
//! to an ordinal position (a child index or a block index).
//!
//! Architecture: 2 inputs, one sigmoid hidden layer of width
//! `ceil((2 + C) / 2)` for `C` output positions, one linear output. The output
//! is trained against `target / (C - 1)` and scaled back, so it behaves as an
//! ordinal regressor: nearby outputs mean nearby positions.
//!
//! A model can be trained *monotone*: input and output weights are projected
//! onto the non-negative orthant after every step, which makes the prediction
//! non-decreasing in both coordinates. Leaf models rely on this so that the
//! predictions at a window's two corners bracket the prediction of every point
//! inside the window.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, StixError};
use crate::geometry::{Mbr, Point};

pub const INPUT_DIM: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Samples per gradient step; `0` means full-batch gradient descent.
    pub batch_size: usize,
    pub seed: u64,
    pub monotone: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            epochs: 500,
            batch_size: 32,
            seed: 42,
            monotone: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub point: Point,
    pub target: usize,
}

impl Sample {
    pub fn new(point: Point, target: usize) -> Self {
        Self { point, target }
    }
}

/// Maximum under- and over-prediction of a model over its population, in position units.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBounds {
    /// Largest `round(pred) - true`.
    pub eps_lo: u32,
    /// Largest `true - round(pred)`.
    pub eps_hi: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainReport {
    pub initial_loss: f64,
    pub final_loss: f64,
    pub learning_rate: f64,
    pub restarted: bool,
}

pub fn hidden_width(outputs: usize) -> usize {
    (INPUT_DIM + outputs).div_ceil(2).max(1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    outputs: usize,
    monotone: bool,
    input_lo: [f64; 2],
    input_scale: [f64; 2],
    /// Row-major `hidden x 2`.
    w_in: Vec<f64>,
    b_in: Vec<f64>,
    w_out: Vec<f64>,
    b_out: f64,
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl Mlp {
    /// Randomly initialised, untrained model. Weights are uniform in `[-0.5, 0.5]`
    /// (absolute values for a monotone model).
    pub fn new_random(outputs: usize, domain: &Mbr, monotone: bool, rng: &mut impl Rng) -> Result<Self> {
        if outputs == 0 {
            return Err(StixError::InvalidParameter("model needs at least one output position".into()));
        }
        let h = hidden_width(outputs);
        let mut draw = |n: usize| -> Vec<f64> {
            (0..n)
                .map(|_| {
                    let w = rng.gen_range(-0.5..=0.5);
                    if monotone {
                        f64::abs(w)
                    } else {
                        w
                    }
                })
                .collect()
        };
        let w_in = draw(h * INPUT_DIM);
        let w_out = draw(h);
        let b_in = (0..h).map(|_| rng.gen_range(-0.5..=0.5)).collect();
        let b_out = rng.gen_range(-0.5..=0.5);
        let (input_lo, input_scale) = input_transform(domain);
        Ok(Self {
            outputs,
            monotone,
            input_lo,
            input_scale,
            w_in,
            b_in,
            w_out,
            b_out,
        })
    }

    /// A model that predicts `position` everywhere.
    pub fn constant(outputs: usize, position: f64) -> Result<Self> {
        if outputs == 0 {
            return Err(StixError::InvalidParameter("model needs at least one output position".into()));
        }
        let h = hidden_width(outputs);
        let scale = (outputs.saturating_sub(1)).max(1) as f64;
        Ok(Self {
            outputs,
            monotone: true,
            input_lo: [0.0; 2],
            input_scale: [0.0; 2],
            w_in: vec![0.0; h * INPUT_DIM],
            b_in: vec![0.0; h],
            w_out: vec![0.0; h],
            b_out: position / scale,
        })
    }

    /// Assemble a model from explicit parameters. Inputs are used unscaled.
    pub fn from_parameters(outputs: usize, w_in: Vec<[f64; 2]>, b_in: Vec<f64>, w_out: Vec<f64>, b_out: f64) -> Result<Self> {
        let h = w_in.len();
        if outputs == 0 || h == 0 || b_in.len() != h || w_out.len() != h {
            return Err(StixError::InvalidParameter("inconsistent model parameter shapes".into()));
        }
        let monotone = w_in.iter().all(|w| w[0] >= 0.0 && w[1] >= 0.0) && w_out.iter().all(|&v| v >= 0.0);
        Ok(Self {
            outputs,
            monotone,
            input_lo: [0.0; 2],
            input_scale: [1.0; 2],
            w_in: w_in.into_iter().flatten().collect(),
            b_in,
            w_out,
            b_out,
        })
    }

    pub fn train(samples: &[Sample], outputs: usize, config: &TrainConfig) -> Result<Self> {
        Self::train_with_report(samples, outputs, config).map(|(m, _)| m)
    }

    /// Mini-batch gradient descent on the squared error of the scaled output.
    /// A non-finite loss restarts training once at a tenth of the learning rate.
    pub fn train_with_report(samples: &[Sample], outputs: usize, config: &TrainConfig) -> Result<(Self, TrainReport)> {
        if outputs == 0 {
            return Err(StixError::InvalidParameter("model needs at least one output position".into()));
        }
        if samples.is_empty() {
            return Err(StixError::InvalidParameter("cannot train on an empty sample set".into()));
        }
        if let Some(bad) = samples.iter().find(|s| s.target >= outputs) {
            return Err(StixError::InvalidParameter(format!(
                "training target {} outside [0, {outputs})",
                bad.target
            )));
        }
        let domain = Mbr::of_points(samples.iter().map(|s| &s.point));
        match Trainer::new(samples, outputs, &domain, config).run(config.learning_rate) {
            Ok(done) => Ok(done),
            Err(first) => {
                log::warn!("{first}; retrying at learning rate {}", config.learning_rate / 10.0);
                Trainer::new(samples, outputs, &domain, config)
                    .run(config.learning_rate / 10.0)
                    .map(|(m, mut report)| {
                        report.restarted = true;
                        (m, report)
                    })
                    .map_err(|e| StixError::TrainingDiverged(format!("{e} (after restart)")))
            }
        }
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn hidden(&self) -> usize {
        self.b_in.len()
    }

    pub fn is_monotone(&self) -> bool {
        self.monotone
    }

    #[inline]
    fn scale_input(&self, p: &Point) -> [f64; 2] {
        [
            (p.x - self.input_lo[0]) * self.input_scale[0],
            (p.y - self.input_lo[1]) * self.input_scale[1],
        ]
    }

    #[inline]
    fn forward_scaled(&self, u: [f64; 2]) -> f64 {
        let mut out = self.b_out;
        for j in 0..self.b_in.len() {
            let z = self.w_in[2 * j] * u[0] + self.w_in[2 * j + 1] * u[1] + self.b_in[j];
            out += self.w_out[j] * sigmoid(z);
        }
        out
    }

    fn position_scale(&self) -> f64 {
        (self.outputs - 1) as f64
    }

    /// Unclamped output in position units.
    pub fn raw_position(&self, p: &Point) -> f64 {
        self.forward_scaled(self.scale_input(p)) * self.position_scale()
    }

    /// Predicted position clamped to `[0, C-1]`.
    pub fn predict(&self, p: &Point) -> f64 {
        let v = self.raw_position(p);
        if v.is_nan() {
            return 0.0;
        }
        v.clamp(0.0, self.position_scale())
    }

    /// `round(predict(p))`.
    pub fn predict_index(&self, p: &Point) -> usize {
        self.predict(p).round() as usize
    }

    /// Mean squared error against normalised targets.
    pub fn loss(&self, samples: &[Sample]) -> f64 {
        self.loss_and_gradient(samples).0
    }

    /// Mean squared error and its gradient, laid out as [`Mlp::parameters`].
    pub fn loss_and_gradient(&self, samples: &[Sample]) -> (f64, Vec<f64>) {
        let h = self.hidden();
        let mut grad = vec![0.0; parameter_count(h)];
        let mut act = vec![0.0; h];
        let tscale = target_scale(self.outputs);
        let mut sse = 0.0;
        for s in samples {
            let u = self.scale_input(&s.point);
            sse += accumulate(self, u, s.target as f64 * tscale, 1.0, &mut act, &mut grad);
        }
        let n = samples.len().max(1) as f64;
        for g in grad.iter_mut() {
            *g /= n;
        }
        (sse / n, grad)
    }

    /// Flattened parameters: input weights, hidden biases, output weights, output bias.
    pub fn parameters(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(parameter_count(self.hidden()));
        p.extend_from_slice(&self.w_in);
        p.extend_from_slice(&self.b_in);
        p.extend_from_slice(&self.w_out);
        p.push(self.b_out);
        p
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        let h = self.hidden();
        if params.len() != parameter_count(h) {
            return Err(StixError::InvalidParameter(format!(
                "expected {} parameters, got {}",
                parameter_count(h),
                params.len()
            )));
        }
        self.w_in.copy_from_slice(&params[..2 * h]);
        self.b_in.copy_from_slice(&params[2 * h..3 * h]);
        self.w_out.copy_from_slice(&params[3 * h..4 * h]);
        self.b_out = params[4 * h];
        Ok(())
    }

    fn project_monotone(&mut self) {
        for w in self.w_in.iter_mut().chain(self.w_out.iter_mut()) {
            if *w < 0.0 {
                *w = 0.0;
            }
        }
    }

    fn all_finite(&self) -> bool {
        self.b_out.is_finite()
            && self
                .w_in
                .iter()
                .chain(&self.b_in)
                .chain(&self.w_out)
                .all(|v| v.is_finite())
    }

    pub(crate) fn heap_bytes(&self) -> usize {
        parameter_count(self.hidden()) * 8
    }
}

/// Bounds such that every sample's true position lies in
/// `[round(pred) - eps_lo, round(pred) + eps_hi]`.
pub fn compute_error_bounds(model: &Mlp, samples: &[Sample]) -> ErrorBounds {
    let mut b = ErrorBounds::default();
    for s in samples {
        let diff = model.predict_index(&s.point) as i64 - s.target as i64;
        if diff > 0 {
            b.eps_lo = b.eps_lo.max(diff as u32);
        } else {
            b.eps_hi = b.eps_hi.max((-diff) as u32);
        }
    }
    b
}

fn parameter_count(h: usize) -> usize {
    4 * h + 1
}

fn target_scale(outputs: usize) -> f64 {
    if outputs > 1 {
        1.0 / (outputs - 1) as f64
    } else {
        0.0
    }
}

fn input_transform(domain: &Mbr) -> ([f64; 2], [f64; 2]) {
    if domain.is_empty() {
        return ([0.0; 2], [1.0; 2]);
    }
    let scale = |lo: f64, hi: f64| if hi > lo { 1.0 / (hi - lo) } else { 0.0 };
    (
        [domain.lo.x, domain.lo.y],
        [scale(domain.lo.x, domain.hi.x), scale(domain.lo.y, domain.hi.y)],
    )
}

/// Forward + backward for one sample; adds `weight * d(e²)/dθ` into `grad`
/// and returns `e²`.
#[inline]
fn accumulate(m: &Mlp, u: [f64; 2], target: f64, weight: f64, act: &mut [f64], grad: &mut [f64]) -> f64 {
    let h = m.b_in.len();
    let mut out = m.b_out;
    for j in 0..h {
        let z = m.w_in[2 * j] * u[0] + m.w_in[2 * j + 1] * u[1] + m.b_in[j];
        let a = sigmoid(z);
        act[j] = a;
        out += m.w_out[j] * a;
    }
    let e = out - target;
    let g = 2.0 * e * weight;
    let (g_in, rest) = grad.split_at_mut(2 * h);
    let (g_bin, rest) = rest.split_at_mut(h);
    let (g_out, g_bout) = rest.split_at_mut(h);
    g_bout[0] += g;
    for j in 0..h {
        let a = act[j];
        g_out[j] += g * a;
        let delta = g * m.w_out[j] * a * (1.0 - a);
        g_in[2 * j] += delta * u[0];
        g_in[2 * j + 1] += delta * u[1];
        g_bin[j] += delta;
    }
    e * e
}

struct Trainer {
    inputs: Vec<[f64; 2]>,
    targets: Vec<f64>,
    model: Mlp,
    rng: ChaCha8Rng,
    config: TrainConfig,
}

impl Trainer {
    fn new(samples: &[Sample], outputs: usize, domain: &Mbr, config: &TrainConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let model = Mlp::new_random(outputs, domain, config.monotone, &mut rng)
            .expect("outputs validated by caller");
        // Shuffle once so that every contiguous batch is a random draw; epochs
        // then permute batch order only and keep memory access sequential.
        let mut order: Vec<usize> = (0..samples.len()).collect();
        order.shuffle(&mut rng);
        let tscale = target_scale(outputs);
        let inputs = order.iter().map(|&i| model.scale_input(&samples[i].point)).collect();
        let targets = order.iter().map(|&i| samples[i].target as f64 * tscale).collect();
        Self {
            inputs,
            targets,
            model,
            rng,
            config: *config,
        }
    }

    fn full_loss(&self, act: &mut [f64], scratch: &mut [f64]) -> f64 {
        let mut sse = 0.0;
        for (u, &t) in self.inputs.iter().zip(&self.targets) {
            sse += accumulate(&self.model, *u, t, 0.0, act, scratch);
        }
        sse / self.inputs.len() as f64
    }

    fn run(mut self, lr: f64) -> std::result::Result<(Mlp, TrainReport), String> {
        let n = self.inputs.len();
        let h = self.model.hidden();
        let mut act = vec![0.0; h];
        let mut grad = vec![0.0; parameter_count(h)];
        let initial_loss = self.full_loss(&mut act, &mut grad);
        if self.model.outputs == 1 {
            // A single position needs no fitting: the clamp maps everything to 0.
            let report = TrainReport {
                initial_loss,
                final_loss: initial_loss,
                learning_rate: lr,
                restarted: false,
            };
            return Ok((self.model, report));
        }

        let batch = if self.config.batch_size == 0 {
            n
        } else {
            self.config.batch_size.min(n)
        };
        let batches = n.div_ceil(batch);
        let mut batch_order: Vec<usize> = (0..batches).collect();
        let mut params = self.model.parameters();

        for epoch in 0..self.config.epochs {
            batch_order.shuffle(&mut self.rng);
            let mut epoch_sse = 0.0;
            for &b in &batch_order {
                let start = b * batch;
                let end = (start + batch).min(n);
                grad.iter_mut().for_each(|g| *g = 0.0);
                let w = 1.0 / (end - start) as f64;
                for i in start..end {
                    epoch_sse += accumulate(&self.model, self.inputs[i], self.targets[i], w, &mut act, &mut grad);
                }
                for (p, g) in params.iter_mut().zip(&grad) {
                    *p -= lr * g;
                }
                self.model.set_parameters(&params).expect("same shape");
                if self.model.monotone {
                    self.model.project_monotone();
                    params = self.model.parameters();
                }
            }
            if !epoch_sse.is_finite() || !self.model.all_finite() {
                return Err(format!("loss became non-finite at epoch {epoch} (lr {lr})"));
            }
        }
        let final_loss = self.full_loss(&mut act, &mut grad);
        if !final_loss.is_finite() {
            return Err(format!("final loss is non-finite (lr {lr})"));
        }
        let report = TrainReport {
            initial_loss,
            final_loss,
            learning_rate: lr,
            restarted: false,
        };
        Ok((self.model, report))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_samples(targets: &[(f64, f64, usize)]) -> Vec<Sample> {
        targets
            .iter()
            .map(|&(x, y, t)| Sample::new(Point::new(x, y), t))
            .collect()
    }

    #[test]
    fn hidden_width_rule() {
        assert_eq!(hidden_width(4), 3);
        assert_eq!(hidden_width(1), 2);
        assert_eq!(hidden_width(2), 2);
        assert_eq!(hidden_width(100), 51);
    }

    #[test]
    fn rejects_zero_outputs_and_bad_targets() {
        let s = unit_samples(&[(0.0, 0.0, 0)]);
        assert!(Mlp::train(&s, 0, &TrainConfig::default()).is_err());
        let s = unit_samples(&[(0.0, 0.0, 3)]);
        assert!(Mlp::train(&s, 2, &TrainConfig::default()).is_err());
        assert!(Mlp::train(&[], 2, &TrainConfig::default()).is_err());
    }

    #[test]
    fn single_output_predicts_zero() {
        let s = unit_samples(&[(0.1, 0.2, 0), (0.7, 0.9, 0), (0.4, 0.4, 0)]);
        let m = Mlp::train(&s, 1, &TrainConfig::default()).unwrap();
        for p in [Point::new(-3.0, 2.0), Point::new(0.5, 0.5), Point::new(9.0, 9.0)] {
            assert_eq!(m.predict_index(&p), 0);
            assert_eq!(m.predict(&p), 0.0);
        }
    }

    #[test]
    fn constant_model_predicts_constant() {
        let m = Mlp::constant(5, 0.0).unwrap();
        assert!(m.predict(&Point::new(0.3, 0.3)).abs() < 1e-12);
        let p = Point::new(0.25, 0.75);
        assert_eq!(m.predict(&p).to_bits(), m.predict(&p).to_bits());
    }

    #[test]
    fn training_is_deterministic() {
        let s: Vec<Sample> = (0..200)
            .map(|i| {
                let x = i as f64 / 200.0;
                Sample::new(Point::new(x, 1.0 - x), (i * 4) / 200)
            })
            .collect();
        let cfg = TrainConfig {
            epochs: 20,
            ..Default::default()
        };
        let a = Mlp::train(&s, 4, &cfg).unwrap();
        let b = Mlp::train(&s, 4, &cfg).unwrap();
        let bits = |m: &Mlp| m.parameters().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn training_improves_quartile_classification() {
        // y fixed, target = quartile of x.
        let s: Vec<Sample> = (0..400)
            .map(|i| {
                let x = (i as f64 + 0.5) / 400.0;
                Sample::new(Point::new(x, 0.5), i / 100)
            })
            .collect();
        let cfg = TrainConfig::default();
        let accuracy = |m: &Mlp| s.iter().filter(|x| m.predict_index(&x.point) == x.target).count();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let domain = Mbr::of_points(s.iter().map(|x| &x.point));
        let untrained = Mlp::new_random(4, &domain, false, &mut rng).unwrap();
        let (trained, report) = Mlp::train_with_report(&s, 4, &cfg).unwrap();
        assert!(accuracy(&trained) > accuracy(&untrained));
        assert!(report.final_loss <= report.initial_loss);
    }

    #[test]
    fn monotone_training_yields_monotone_model() {
        let s: Vec<Sample> = (0..300)
            .map(|i| {
                let x = (i % 17) as f64 / 17.0;
                let y = (i % 13) as f64 / 13.0;
                Sample::new(Point::new(x, y), ((x + y) * 2.4) as usize)
            })
            .collect();
        let cfg = TrainConfig {
            monotone: true,
            epochs: 50,
            ..Default::default()
        };
        let m = Mlp::train(&s, 5, &cfg).unwrap();
        assert!(m.is_monotone());
        for i in 0..50 {
            let a = Point::new(i as f64 / 50.0, 0.3);
            let b = Point::new(i as f64 / 50.0 + 0.01, 0.35);
            assert!(m.raw_position(&a) <= m.raw_position(&b));
        }
    }

    #[test]
    fn error_bounds_examples() {
        // A constant model at position 3 over samples whose true position is 1
        // over-predicts each of them by exactly 2.
        let m = Mlp::constant(5, 3.0).unwrap();
        let s = unit_samples(&[(0.0, 0.0, 1), (0.5, 0.5, 1), (1.0, 1.0, 1)]);
        assert_eq!(compute_error_bounds(&m, &s), ErrorBounds { eps_lo: 2, eps_hi: 0 });

        let s = unit_samples(&[(0.2, 0.2, 3)]);
        assert_eq!(compute_error_bounds(&m, &s), ErrorBounds::default());

        let s = unit_samples(&[(0.2, 0.2, 4), (0.3, 0.3, 0)]);
        assert_eq!(compute_error_bounds(&m, &s), ErrorBounds { eps_lo: 3, eps_hi: 1 });
    }

    #[test]
    fn error_bounds_are_sound() {
        let s: Vec<Sample> = (0..500)
            .map(|i| {
                let x = ((i * 37) % 500) as f64 / 500.0;
                let y = ((i * 91) % 500) as f64 / 500.0;
                Sample::new(Point::new(x, y), ((x * 3.0).floor() + (y * 3.0).floor() * 3.0) as usize)
            })
            .collect();
        let cfg = TrainConfig {
            epochs: 30,
            ..Default::default()
        };
        let m = Mlp::train(&s, 9, &cfg).unwrap();
        let b = compute_error_bounds(&m, &s);
        for x in &s {
            let pred = m.predict_index(&x.point) as i64;
            assert!(x.target as i64 >= pred - b.eps_lo as i64);
            assert!(x.target as i64 <= pred + b.eps_hi as i64);
        }
    }

    #[test]
    fn set_parameters_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut m = Mlp::new_random(6, &Mbr::unit(), false, &mut rng).unwrap();
        let p = m.parameters();
        assert_eq!(p.len(), 4 * hidden_width(6) + 1);
        m.set_parameters(&p).unwrap();
        assert_eq!(m.parameters(), p);
        assert!(m.set_parameters(&p[1..]).is_err());
    }

    fn max_gradient_error(m: &Mlp, samples: &[Sample]) -> f64 {
        let (_, analytic) = m.loss_and_gradient(samples);
        let base = m.parameters();
        let mut probe = m.clone();
        let mut worst = 0.0f64;
        for i in 0..base.len() {
            let h = 1e-5 * base[i].abs().max(1.0);
            let mut p = base.clone();
            p[i] = base[i] + h;
            probe.set_parameters(&p).unwrap();
            let up = probe.loss(samples);
            p[i] = base[i] - h;
            probe.set_parameters(&p).unwrap();
            let down = probe.loss(samples);
            let numeric = (up - down) / (2.0 * h);
            let err = (analytic[i] - numeric).abs() / analytic[i].abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(err);
        }
        worst
    }

    proptest::proptest! {
        #[test]
        fn gradients_match_finite_differences(seed in 0u64..10_000, outputs in 1usize..9) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = Mlp::new_random(outputs, &Mbr::unit(), false, &mut rng).unwrap();
            let samples: Vec<Sample> = (0..20)
                .map(|_| Sample::new(Point::new(rng.gen(), rng.gen()), rng.gen_range(0..outputs)))
                .collect();
            proptest::prop_assert!(m.hidden() <= 5);
            let err = max_gradient_error(&m, &samples);
            proptest::prop_assert!(err < 1e-4, "relative error {}", err);
        }
    }
}
