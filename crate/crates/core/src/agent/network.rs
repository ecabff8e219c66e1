//! Dueling Q-network on a flat parameter vector with hand-written
//! reverse-mode gradients.

use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetShape {
    pub input: usize,
    /// Width of the shared trunk layer.
    pub hidden: usize,
    /// Width of the hidden layer in each head.
    pub head_hidden: usize,
    pub actions: usize,
    /// Subtract the mean advantage before adding the baseline.
    pub mean_subtract: bool,
}

impl NetShape {
    pub fn new(input: usize, hidden: usize, head_hidden: usize, actions: usize) -> Self {
        Self {
            input,
            hidden,
            head_hidden,
            actions,
            mean_subtract: false,
        }
    }

    fn layout(&self) -> Layout {
        let mut at = 0;
        let mut take = |n: usize| {
            let r = at..at + n;
            at += n;
            r
        };
        let (d, h, k, n) = (self.input, self.hidden, self.head_hidden, self.actions);
        let l = Layout {
            w1: take(h * d),
            b1: take(h),
            wa1: take(k * h),
            ba1: take(k),
            wa2: take(n * k),
            ba2: take(n),
            wv1: take(k * h),
            bv1: take(k),
            wv2: take(k),
            bv2: take(1),
            len: 0,
        };
        Layout { len: at, ..l }
    }

    pub fn param_count(&self) -> usize {
        self.layout().len
    }
}

#[derive(Debug, Clone)]
struct Layout {
    w1: Range<usize>,
    b1: Range<usize>,
    wa1: Range<usize>,
    ba1: Range<usize>,
    wa2: Range<usize>,
    ba2: Range<usize>,
    wv1: Range<usize>,
    bv1: Range<usize>,
    wv2: Range<usize>,
    bv2: Range<usize>,
    len: usize,
}

/// Network parameters. Layer order in `data`: trunk W, b; advantage hidden
/// W, b; advantage out W, b; baseline hidden W, b; baseline out W, b. All
/// weight matrices are row-major `[out][in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QParams {
    pub shape: NetShape,
    pub data: Vec<f64>,
}

/// Intermediate values of one forward pass, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    pub input: Vec<f64>,
    pub h: Vec<f64>,
    pub ha: Vec<f64>,
    pub hv: Vec<f64>,
    pub advantage: Vec<f64>,
    pub baseline: f64,
    pub q: Vec<f64>,
}

fn dense(w: &[f64], b: &[f64], x: &[f64], out: &mut Vec<f64>, relu: bool) {
    out.clear();
    let cols = x.len();
    for (row, &bias) in w.chunks_exact(cols).zip(b) {
        let z = bias + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        out.push(if relu { z.max(0.0) } else { z });
    }
}

/// `g_w += dy ⊗ x`, `g_b += dy`, and optionally `dx = Wᵀ dy`.
fn dense_back(w: &[f64], x: &[f64], dy: &[f64], gw: &mut [f64], gb: &mut [f64], dx: Option<&mut [f64]>) {
    let cols = x.len();
    for ((g_row, gb_i), &d) in gw.chunks_exact_mut(cols).zip(gb.iter_mut()).zip(dy) {
        if d == 0.0 {
            continue;
        }
        *gb_i += d;
        for (g, &xi) in g_row.iter_mut().zip(x) {
            *g += d * xi;
        }
    }
    if let Some(dx) = dx {
        for (row, &d) in w.chunks_exact(cols).zip(dy) {
            if d == 0.0 {
                continue;
            }
            for (o, &wi) in dx.iter_mut().zip(row) {
                *o += d * wi;
            }
        }
    }
}

impl QParams {
    pub fn zeros(shape: NetShape) -> Self {
        Self {
            shape,
            data: vec![0.0; shape.param_count()],
        }
    }

    /// Uniform He-style fan-in initialization; biases start at zero.
    pub fn init(shape: NetShape, rng: &mut impl Rng) -> Self {
        let mut p = Self::zeros(shape);
        let l = shape.layout();
        let (d, h, k) = (shape.input, shape.hidden, shape.head_hidden);
        for (range, fan_in) in [(l.w1, d), (l.wa1, h), (l.wa2, k), (l.wv1, h), (l.wv2, k)] {
            let bound = (6.0 / fan_in as f64).sqrt();
            for x in &mut p.data[range] {
                *x = rng.random_range(-bound..bound);
            }
        }
        p
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Trace> {
        let s = self.shape;
        if x.len() != s.input {
            return Err(Error::Shape {
                expected: s.input,
                got: x.len(),
            });
        }
        let l = s.layout();
        let p = &self.data;
        let mut h = Vec::with_capacity(s.hidden);
        dense(&p[l.w1], &p[l.b1], x, &mut h, true);
        let mut ha = Vec::with_capacity(s.head_hidden);
        dense(&p[l.wa1], &p[l.ba1], &h, &mut ha, true);
        let mut advantage = Vec::with_capacity(s.actions);
        dense(&p[l.wa2], &p[l.ba2], &ha, &mut advantage, false);
        let mut hv = Vec::with_capacity(s.head_hidden);
        dense(&p[l.wv1], &p[l.bv1], &h, &mut hv, true);
        let baseline = p[l.bv2][0] + p[l.wv2].iter().zip(&hv).map(|(a, b)| a * b).sum::<f64>();
        let shift = if s.mean_subtract {
            advantage.iter().sum::<f64>() / s.actions as f64
        } else {
            0.0
        };
        let q = advantage.iter().map(|a| a + baseline - shift).collect();
        Ok(Trace {
            input: x.to_vec(),
            h,
            ha,
            hv,
            advantage,
            baseline,
            q,
        })
    }

    pub fn q_values(&self, obs: &[f32]) -> Result<Vec<f64>> {
        let x: Vec<f64> = obs.iter().map(|&v| v as f64).collect();
        Ok(self.forward(&x)?.q)
    }

    /// Accumulates into `grads` the gradient of `Σ dq·Q` for one traced pass.
    pub fn backward(&self, trace: &Trace, dq: &[f64], grads: &mut [f64]) {
        let s = self.shape;
        let l = s.layout();
        let p = &self.data;
        let mean_dq = dq.iter().sum::<f64>() / s.actions as f64;
        let da: Vec<f64> = if s.mean_subtract {
            dq.iter().map(|d| d - mean_dq).collect()
        } else {
            dq.to_vec()
        };
        let dv: f64 = dq.iter().sum();

        let (gw1, rest) = grads.split_at_mut(l.b1.start);
        let (gb1, rest) = rest.split_at_mut(l.b1.len());
        let (gwa1, rest) = rest.split_at_mut(l.wa1.len());
        let (gba1, rest) = rest.split_at_mut(l.ba1.len());
        let (gwa2, rest) = rest.split_at_mut(l.wa2.len());
        let (gba2, rest) = rest.split_at_mut(l.ba2.len());
        let (gwv1, rest) = rest.split_at_mut(l.wv1.len());
        let (gbv1, rest) = rest.split_at_mut(l.bv1.len());
        let (gwv2, gbv2) = rest.split_at_mut(l.wv2.len());

        // advantage head
        let mut dha = vec![0.0; s.head_hidden];
        dense_back(&p[l.wa2.clone()], &trace.ha, &da, gwa2, gba2, Some(&mut dha));
        for (d, &a) in dha.iter_mut().zip(&trace.ha) {
            if a <= 0.0 {
                *d = 0.0;
            }
        }
        // baseline head
        gbv2[0] += dv;
        let mut dhv = vec![0.0; s.head_hidden];
        for ((g, d), (&w, &hv)) in gwv2.iter_mut().zip(dhv.iter_mut()).zip(p[l.wv2.clone()].iter().zip(&trace.hv)) {
            *g += dv * hv;
            if hv > 0.0 {
                *d = dv * w;
            }
        }
        let mut dh = vec![0.0; s.hidden];
        dense_back(&p[l.wa1.clone()], &trace.h, &dha, gwa1, gba1, Some(&mut dh));
        dense_back(&p[l.wv1.clone()], &trace.h, &dhv, gwv1, gbv1, Some(&mut dh));
        for (d, &h) in dh.iter_mut().zip(&trace.h) {
            if h <= 0.0 {
                *d = 0.0;
            }
        }
        dense_back(&p[l.w1.clone()], &trace.input, &dh, gw1, gb1, None);
    }
}
