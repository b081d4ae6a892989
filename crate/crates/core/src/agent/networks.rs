//! Actor and critic pathways. Both start with their own fusion block:
//! a two-layer FCN encoder over node features followed by one graph
//! convolution over the normalised CAV adjacency.

use rand::Rng;

use crate::nn::{prefixed, Activation, DenseCache, DenseLayer, GraphConvCache, GraphConvLayer, Matrix, Parameters};
use crate::obs::{GraphObservation, FEATURE_DIM};
use crate::sim::ACTION_BOUND;
use crate::{Error, Result};

/// Width of every hidden layer.
pub const HIDDEN: usize = 32;

/// Encoder (Dense 32 + Dense 32) and graph convolution (GraphConv 32).
#[derive(Debug, Clone, PartialEq)]
pub struct Fusion {
    pub encoder: [DenseLayer; 2],
    pub gcn: GraphConvLayer,
}

#[derive(Debug, Clone)]
struct FusionCache {
    encoder: [DenseCache; 2],
    gcn: GraphConvCache,
}

impl Fusion {
    fn init<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self {
            encoder: [
                DenseLayer::init(FEATURE_DIM, HIDDEN, Activation::Relu, rng),
                DenseLayer::init(HIDDEN, HIDDEN, Activation::Relu, rng),
            ],
            gcn: GraphConvLayer::init(HIDDEN, HIDDEN, rng),
        }
    }

    fn zeros() -> Self {
        Self {
            encoder: [
                DenseLayer::zeros(FEATURE_DIM, HIDDEN, Activation::Relu),
                DenseLayer::zeros(HIDDEN, HIDDEN, Activation::Relu),
            ],
            gcn: GraphConvLayer::zeros(HIDDEN, HIDDEN),
        }
    }

    /// `Z = g(φ(X), A)`.
    fn forward(&self, obs: &GraphObservation) -> Result<(Matrix, FusionCache)> {
        let (h1, c1) = self.encoder[0].forward(&obs.features)?;
        let (h2, c2) = self.encoder[1].forward(&h1)?;
        let (z, cg) = self.gcn.forward(&h2, &obs.normalized_adjacency())?;
        Ok((
            z,
            FusionCache {
                encoder: [c1, c2],
                gcn: cg,
            },
        ))
    }

    fn backward(&self, cache: &FusionCache, dz: &Matrix) -> Result<Fusion> {
        let (gcn, dh2) = self.gcn.backward(&cache.gcn, dz)?;
        let (e1, dh1) = self.encoder[1].backward(&cache.encoder[1], &dh2)?;
        let (e0, _) = self.encoder[0].backward(&cache.encoder[0], &dh1)?;
        Ok(Fusion {
            encoder: [e0, e1],
            gcn,
        })
    }
}

impl Parameters for Fusion {
    fn tensors(&self) -> Vec<(String, &Matrix)> {
        let mut out = prefixed("encoder.0", &self.encoder[0]);
        out.extend(prefixed("encoder.1", &self.encoder[1]));
        out.extend(prefixed("gcn", &self.gcn));
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        let [e0, e1] = &mut self.encoder;
        let mut out = e0.tensors_mut();
        out.extend(e1.tensors_mut());
        out.extend(self.gcn.tensors_mut());
        out
    }
}

fn head_tensors(head: &[DenseLayer]) -> Vec<(String, &Matrix)> {
    head.iter()
        .enumerate()
        .flat_map(|(i, l)| prefixed(&format!("head.{i}"), l))
        .collect()
}

fn check_nodes(obs: &GraphObservation, op: &'static str) -> Result<()> {
    let n = obs.node_count();
    if obs.features.rows() != n || obs.adjacency.shape() != (n, n) || obs.features.cols() != FEATURE_DIM {
        return Err(Error::Shape {
            op,
            detail: format!(
                "{} ids, features {:?}, adjacency {:?}",
                n,
                obs.features.shape(),
                obs.adjacency.shape()
            ),
        });
    }
    Ok(())
}

/// Per-node policy `μ`: fusion block, then Dense(32) + Dense(32) + Dense(1)
/// with a linear output, clipped to the action bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct ActorParams {
    pub fusion: Fusion,
    pub head: [DenseLayer; 3],
}

/// Everything an actor backward pass needs, plus the unclipped outputs.
#[derive(Debug, Clone)]
pub struct ActorTrace {
    fusion: FusionCache,
    head: Vec<DenseCache>,
    pub raw: Vec<f64>,
}

impl ActorParams {
    pub fn init<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self {
            fusion: Fusion::init(rng),
            head: [
                DenseLayer::init(HIDDEN, HIDDEN, Activation::Relu, rng),
                DenseLayer::init(HIDDEN, HIDDEN, Activation::Relu, rng),
                DenseLayer::init(HIDDEN, 1, Activation::Linear, rng),
            ],
        }
    }

    pub fn zeros() -> Self {
        Self {
            fusion: Fusion::zeros(),
            head: [
                DenseLayer::zeros(HIDDEN, HIDDEN, Activation::Relu),
                DenseLayer::zeros(HIDDEN, HIDDEN, Activation::Relu),
                DenseLayer::zeros(HIDDEN, 1, Activation::Linear),
            ],
        }
    }

    /// Unclipped per-node outputs and the trace for [`ActorParams::backward`].
    pub fn forward_trace(&self, obs: &GraphObservation) -> Result<ActorTrace> {
        check_nodes(obs, "actor_forward")?;
        let (z, fusion) = self.fusion.forward(obs)?;
        let mut x = z;
        let mut head = Vec::with_capacity(3);
        for layer in &self.head {
            let (y, c) = layer.forward(&x)?;
            head.push(c);
            x = y;
        }
        Ok(ActorTrace {
            fusion,
            head,
            raw: x.into_vec(),
        })
    }

    /// Actions per node in `obs.cav_ids` order, clipped to `[-3, 3]`.
    pub fn forward(&self, obs: &GraphObservation) -> Result<Vec<f64>> {
        if obs.is_empty() {
            return Ok(Vec::new());
        }
        Ok(self.forward_trace(obs)?.raw.into_iter().map(clip_action).collect())
    }

    /// Gradients of `Σ_i d_raw[i] · raw_i` with respect to every parameter.
    pub fn backward(&self, trace: &ActorTrace, d_raw: &[f64]) -> Result<ActorParams> {
        if d_raw.len() != trace.raw.len() {
            return Err(Error::ActionLength {
                expected: trace.raw.len(),
                got: d_raw.len(),
            });
        }
        let mut upstream = Matrix::from_vec(d_raw.len(), 1, d_raw.to_vec())?;
        let mut head_grads = Vec::with_capacity(3);
        for (layer, cache) in self.head.iter().zip(&trace.head).rev() {
            let (g, dx) = layer.backward(cache, &upstream)?;
            head_grads.push(g);
            upstream = dx;
        }
        head_grads.reverse();
        let fusion = self.fusion.backward(&trace.fusion, &upstream)?;
        let head: [DenseLayer; 3] = head_grads.try_into().expect("three head layers");
        Ok(ActorParams { fusion, head })
    }
}

impl Parameters for ActorParams {
    fn tensors(&self) -> Vec<(String, &Matrix)> {
        let mut out = self.fusion.tensors();
        out.extend(head_tensors(&self.head));
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out = self.fusion.tensors_mut();
        for l in &mut self.head {
            out.extend(l.tensors_mut());
        }
        out
    }
}

pub fn clip_action(a: f64) -> f64 {
    a.clamp(-ACTION_BOUND, ACTION_BOUND)
}

/// Centralised critic `Q(s, a)`: fusion block, node-wise concatenation of
/// embedding and action, mean pooling over nodes, then Dense(32) + Dense(1).
#[derive(Debug, Clone, PartialEq)]
pub struct CriticParams {
    pub fusion: Fusion,
    pub head: [DenseLayer; 2],
}

#[derive(Debug, Clone)]
pub struct CriticTrace {
    fusion: FusionCache,
    head: Vec<DenseCache>,
    nodes: usize,
    pub q: f64,
}

impl CriticParams {
    pub fn init<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self {
            fusion: Fusion::init(rng),
            head: [
                DenseLayer::init(HIDDEN + 1, HIDDEN, Activation::Relu, rng),
                DenseLayer::init(HIDDEN, 1, Activation::Linear, rng),
            ],
        }
    }

    pub fn zeros() -> Self {
        Self {
            fusion: Fusion::zeros(),
            head: [
                DenseLayer::zeros(HIDDEN + 1, HIDDEN, Activation::Relu),
                DenseLayer::zeros(HIDDEN, 1, Activation::Linear),
            ],
        }
    }

    pub fn forward_trace(&self, obs: &GraphObservation, actions: &[f64]) -> Result<CriticTrace> {
        check_nodes(obs, "critic_forward")?;
        let n = obs.node_count();
        if n == 0 {
            return Err(Error::NoCavs);
        }
        if actions.len() != n {
            return Err(Error::ActionLength {
                expected: n,
                got: actions.len(),
            });
        }
        let (z, fusion) = self.fusion.forward(obs)?;
        let mut pooled = z.row_mean().into_vec();
        pooled.push(actions.iter().sum::<f64>() / n as f64);
        let mut x = Matrix::row_vector(&pooled);
        let mut head = Vec::with_capacity(2);
        for layer in &self.head {
            let (y, c) = layer.forward(&x)?;
            head.push(c);
            x = y;
        }
        Ok(CriticTrace {
            fusion,
            head,
            nodes: n,
            q: x.get(0, 0),
        })
    }

    pub fn forward(&self, obs: &GraphObservation, actions: &[f64]) -> Result<f64> {
        Ok(self.forward_trace(obs, actions)?.q)
    }

    /// Gradients of `dq · Q` with respect to the parameters and the actions.
    pub fn backward(&self, trace: &CriticTrace, dq: f64) -> Result<(CriticParams, Vec<f64>)> {
        let mut upstream = Matrix::filled(1, 1, dq);
        let mut head_grads = Vec::with_capacity(2);
        for (layer, cache) in self.head.iter().zip(&trace.head).rev() {
            let (g, dx) = layer.backward(cache, &upstream)?;
            head_grads.push(g);
            upstream = dx;
        }
        head_grads.reverse();
        let inv = 1.0 / trace.nodes as f64;
        let d_pooled = upstream.row(0);
        let mut dz = Matrix::zeros(trace.nodes, HIDDEN);
        for i in 0..trace.nodes {
            for (dst, &g) in dz.row_mut(i).iter_mut().zip(&d_pooled[..HIDDEN]) {
                *dst = g * inv;
            }
        }
        let d_actions = vec![d_pooled[HIDDEN] * inv; trace.nodes];
        let fusion = self.fusion.backward(&trace.fusion, &dz)?;
        let head: [DenseLayer; 2] = head_grads.try_into().expect("two head layers");
        Ok((CriticParams { fusion, head }, d_actions))
    }
}

impl Parameters for CriticParams {
    fn tensors(&self) -> Vec<(String, &Matrix)> {
        let mut out = self.fusion.tensors();
        out.extend(head_tensors(&self.head));
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out = self.fusion.tensors_mut();
        for l in &mut self.head {
            out.extend(l.tensors_mut());
        }
        out
    }
}
