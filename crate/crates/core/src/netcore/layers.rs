use super::{softmax, LayerParams, LayerSpec, NetworkSpec, ParamSet, Tensor};
use crate::error::{Error, Result};

/// Intermediate state of one forward pass, consumed by [`backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `inputs[l]` is the input of layer `l`; the last entry holds the logits.
    inputs: Vec<Vec<f64>>,
    shapes: Vec<Vec<usize>>,
    /// Winning input index per output element of each max-pool layer.
    pool_argmax: Vec<Vec<usize>>,
    fingerprint: u64,
}

impl ForwardCache {
    pub fn logits(&self) -> &[f64] {
        self.inputs.last().expect("cache always holds the input")
    }
}

/// Runs every layer except the terminal softmax and returns the logits.
pub fn forward(spec: &NetworkSpec, params: &ParamSet, input: &Tensor) -> Result<(Tensor, ForwardCache)> {
    let shapes = spec.shapes()?;
    if input.shape() != shapes[0].as_slice() {
        return Err(Error::Shape(format!(
            "input shape {:?} does not match network input {:?}",
            input.shape(),
            shapes[0]
        )));
    }
    check_params(spec, params)?;

    let body = spec.layers.len() - 1;
    let mut inputs = Vec::with_capacity(body + 1);
    let mut pool_argmax = vec![Vec::new(); body];
    inputs.push(input.values().to_vec());
    for l in 0..body {
        let x = &inputs[l];
        let out = match spec.layers[l] {
            LayerSpec::Conv2d {
                out_channels,
                kernel,
                stride,
                padding,
            } => conv_forward(
                x,
                &shapes[l],
                &shapes[l + 1],
                &params.layers()[l],
                ConvGeom { kernel, stride, padding, out_channels },
            ),
            LayerSpec::Relu => x.iter().map(|&v| v.max(0.0)).collect(),
            LayerSpec::MaxPool2d { size } => {
                let (out, idx) = maxpool_forward(x, &shapes[l], &shapes[l + 1], size);
                pool_argmax[l] = idx;
                out
            }
            LayerSpec::GlobalAvgPool => {
                let plane = shapes[l][1] * shapes[l][2];
                x.chunks_exact(plane)
                    .map(|c| c.iter().sum::<f64>() / plane as f64)
                    .collect()
            }
            LayerSpec::Dense { units } => dense_forward(x, &params.layers()[l], units),
            LayerSpec::Softmax => unreachable!("softmax is terminal"),
        };
        inputs.push(out);
    }

    let logits = Tensor::new(shapes[body].clone(), inputs[body].clone())
        .map_err(|e| e.context("forward pass produced invalid logits"))?;
    Ok((
        logits,
        ForwardCache {
            inputs,
            shapes,
            pool_argmax,
            fingerprint: params.fingerprint(),
        },
    ))
}

/// Gradient of the cross-entropy loss of one sample w.r.t. every parameter.
/// `target` is the one-hot class vector of that sample.
pub fn backward(spec: &NetworkSpec, params: &ParamSet, cache: &ForwardCache, target: &[f64]) -> Result<ParamSet> {
    let shapes = spec.shapes()?;
    if cache.shapes != shapes {
        return Err(Error::Contract("forward cache was produced by a different network".into()));
    }
    if cache.fingerprint != params.fingerprint() {
        return Err(Error::Contract(
            "forward cache is stale: parameters changed since the forward pass".into(),
        ));
    }
    if target.len() != spec.num_classes {
        return Err(Error::Shape(format!(
            "target has {} entries for {} classes",
            target.len(),
            spec.num_classes
        )));
    }

    let probs = softmax(cache.logits());
    // combined softmax + cross-entropy: dE/dz = p - t
    let mut grad: Vec<f64> = probs.iter().zip(target).map(|(p, t)| p - t).collect();
    let mut grads = ParamSet::zeros(spec)?;

    for l in (0..spec.layers.len() - 1).rev() {
        let x = &cache.inputs[l];
        grad = match spec.layers[l] {
            LayerSpec::Conv2d {
                out_channels,
                kernel,
                stride,
                padding,
            } => conv_backward(
                x,
                &grad,
                &shapes[l],
                &shapes[l + 1],
                &params.layers()[l],
                &mut grads.layers_mut()[l],
                ConvGeom { kernel, stride, padding, out_channels },
            ),
            LayerSpec::Relu => x
                .iter()
                .zip(&grad)
                .map(|(&v, &g)| if v > 0.0 { g } else { 0.0 })
                .collect(),
            LayerSpec::MaxPool2d { .. } => {
                let mut gx = vec![0.0; x.len()];
                for (&i, &g) in cache.pool_argmax[l].iter().zip(&grad) {
                    gx[i] += g;
                }
                gx
            }
            LayerSpec::GlobalAvgPool => {
                let plane = shapes[l][1] * shapes[l][2];
                grad.iter()
                    .flat_map(|&g| std::iter::repeat_n(g / plane as f64, plane))
                    .collect()
            }
            LayerSpec::Dense { units } => {
                dense_backward(x, &grad, &params.layers()[l], &mut grads.layers_mut()[l], units)
            }
            LayerSpec::Softmax => unreachable!("softmax is terminal"),
        };
    }
    Ok(grads)
}

fn check_params(spec: &NetworkSpec, params: &ParamSet) -> Result<()> {
    let template = ParamSet::zeros(spec)?;
    if !template.same_shape(params) {
        return Err(Error::Shape("parameters do not match the network specification".into()));
    }
    Ok(())
}

#[derive(Clone, Copy)]
struct ConvGeom {
    kernel: usize,
    stride: usize,
    padding: usize,
    out_channels: usize,
}

/// Output columns `ox` whose source column `ox * stride + k - padding` lies
/// inside `[0, width)`.
fn valid_range(k: usize, geom: ConvGeom, width: usize, out_len: usize) -> (usize, usize) {
    let (s, p) = (geom.stride, geom.padding);
    let lo = if k >= p { 0 } else { (p - k).div_ceil(s) };
    let hi = if width + p > k { ((width + p - k - 1) / s + 1).min(out_len) } else { 0 };
    (lo, hi.max(lo))
}

fn conv_forward(x: &[f64], in_shape: &[usize], out_shape: &[usize], p: &LayerParams, g: ConvGeom) -> Vec<f64> {
    let (c_in, h, w) = (in_shape[0], in_shape[1], in_shape[2]);
    let (oh, ow) = (out_shape[1], out_shape[2]);
    let k = g.kernel;
    let weights = p.weight.values();
    let mut out = vec![0.0; g.out_channels * oh * ow];
    for oc in 0..g.out_channels {
        let plane = &mut out[oc * oh * ow..(oc + 1) * oh * ow];
        plane.fill(p.bias.values()[oc]);
        for ic in 0..c_in {
            let src = &x[ic * h * w..(ic + 1) * h * w];
            for ky in 0..k {
                let (oy_lo, oy_hi) = valid_range(ky, g, h, oh);
                for kx in 0..k {
                    let wv = weights[((oc * c_in + ic) * k + ky) * k + kx];
                    let (ox_lo, ox_hi) = valid_range(kx, g, w, ow);
                    for oy in oy_lo..oy_hi {
                        let iy = oy * g.stride + ky - g.padding;
                        let row = &src[iy * w..(iy + 1) * w];
                        let dst = &mut plane[oy * ow..(oy + 1) * ow];
                        if g.stride == 1 {
                            let off = ox_lo + kx - g.padding;
                            for (d, s) in dst[ox_lo..ox_hi].iter_mut().zip(&row[off..]) {
                                *d += wv * s;
                            }
                        } else {
                            for ox in ox_lo..ox_hi {
                                dst[ox] += wv * row[ox * g.stride + kx - g.padding];
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

fn conv_backward(
    x: &[f64],
    grad_out: &[f64],
    in_shape: &[usize],
    out_shape: &[usize],
    p: &LayerParams,
    gp: &mut LayerParams,
    g: ConvGeom,
) -> Vec<f64> {
    let (c_in, h, w) = (in_shape[0], in_shape[1], in_shape[2]);
    let (oh, ow) = (out_shape[1], out_shape[2]);
    let k = g.kernel;
    let weights = p.weight.values();
    let mut grad_in = vec![0.0; x.len()];
    for oc in 0..g.out_channels {
        let gplane = &grad_out[oc * oh * ow..(oc + 1) * oh * ow];
        gp.bias.values_mut()[oc] = gplane.iter().sum();
        for ic in 0..c_in {
            let src = &x[ic * h * w..(ic + 1) * h * w];
            let gsrc = &mut grad_in[ic * h * w..(ic + 1) * h * w];
            for ky in 0..k {
                let (oy_lo, oy_hi) = valid_range(ky, g, h, oh);
                for kx in 0..k {
                    let widx = ((oc * c_in + ic) * k + ky) * k + kx;
                    let wv = weights[widx];
                    let (ox_lo, ox_hi) = valid_range(kx, g, w, ow);
                    let mut gw = 0.0;
                    for oy in oy_lo..oy_hi {
                        let iy = oy * g.stride + ky - g.padding;
                        let grow = &gplane[oy * ow..(oy + 1) * ow];
                        for ox in ox_lo..ox_hi {
                            let ix = iy * w + ox * g.stride + kx - g.padding;
                            gw += grow[ox] * src[ix];
                            gsrc[ix] += wv * grow[ox];
                        }
                    }
                    gp.weight.values_mut()[widx] = gw;
                }
            }
        }
    }
    grad_in
}

fn maxpool_forward(x: &[f64], in_shape: &[usize], out_shape: &[usize], size: usize) -> (Vec<f64>, Vec<usize>) {
    let (c, h, w) = (in_shape[0], in_shape[1], in_shape[2]);
    let (oh, ow) = (out_shape[1], out_shape[2]);
    let mut out = Vec::with_capacity(c * oh * ow);
    let mut idx = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = f64::NEG_INFINITY;
                let mut best_i = 0;
                for dy in 0..size {
                    for dx in 0..size {
                        let i = (ch * h + oy * size + dy) * w + ox * size + dx;
                        // strict comparison keeps the first maximum
                        if x[i] > best {
                            best = x[i];
                            best_i = i;
                        }
                    }
                }
                out.push(best);
                idx.push(best_i);
            }
        }
    }
    (out, idx)
}

fn dense_forward(x: &[f64], p: &LayerParams, units: usize) -> Vec<f64> {
    let n = x.len();
    let w = p.weight.values();
    (0..units)
        .map(|o| {
            let row = &w[o * n..(o + 1) * n];
            p.bias.values()[o] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
        })
        .collect()
}

fn dense_backward(x: &[f64], grad_out: &[f64], p: &LayerParams, gp: &mut LayerParams, units: usize) -> Vec<f64> {
    let n = x.len();
    let w = p.weight.values();
    let mut grad_in = vec![0.0; n];
    for o in 0..units {
        let g = grad_out[o];
        gp.bias.values_mut()[o] = g;
        let gw = &mut gp.weight.values_mut()[o * n..(o + 1) * n];
        for ((gwi, &xi), (gi, &wi)) in gw.iter_mut().zip(x).zip(grad_in.iter_mut().zip(&w[o * n..(o + 1) * n])) {
            *gwi = g * xi;
            *gi += g * wi;
        }
    }
    grad_in
}
