use ndarray::{s, Array1, Array2};

use super::encode::{EncodedGraph, ReadoutPlan};
use super::forward::ForwardTrace;
use super::loss::{bce_loss, bce_score_grad};
use super::params::{ModelParams, Scalar};
use crate::error::{Error, Result};

fn outer_add<T: Scalar>(dst: &mut Array2<T>, a: &Array1<T>, b: &Array1<T>, scale: T) {
    for (i, &ai) in a.iter().enumerate() {
        let f = ai * scale;
        if f == T::zero() {
            continue;
        }
        let mut row = dst.row_mut(i);
        for (d, &bj) in row.iter_mut().zip(b.iter()) {
            *d += f * bj;
        }
    }
}

/// Adds `scale * dLoss/dParams` into `grads`; returns the unscaled loss.
pub fn backward_into<T: Scalar>(
    params: &ModelParams<T>,
    g: &EncodedGraph<T>,
    trace: &ForwardTrace<T>,
    y: &[T],
    scale: T,
    grads: &mut ModelParams<T>,
) -> Result<T> {
    if y.len() != trace.scores.len() {
        return Err(Error::Model(format!(
            "length mismatch: {} scores, {} labels",
            trace.scores.len(),
            y.len()
        )));
    }
    let probs = trace.probabilities();
    let loss = bce_loss(&probs, y)?;
    let dscores: Vec<T> = bce_score_grad(&probs, y).into_iter().map(|v| v * scale).collect();

    let d = params.config.dim;
    let layers = params.config.layers;

    // head
    let mut dinputs = Vec::with_capacity(dscores.len());
    for (head, &ds) in trace.heads.iter().zip(&dscores) {
        grads.head_b2[0] += ds;
        let mut dpre = Array1::zeros(d);
        for k in 0..d {
            let a = head.pre[k];
            if a > T::zero() {
                grads.head_w2[k] += ds * a;
                dpre[k] = ds * params.head_w2[k];
            }
        }
        grads.head_b1 += &dpre;
        outer_add(&mut grads.head_w1, &dpre, &head.input, T::one());
        dinputs.push(params.head_w1.t().dot(&dpre));
    }

    // readout
    let n = g.num_nodes();
    let mut dstates: Vec<Array2<T>> = (0..=layers).map(|_| Array2::zeros((n, d))).collect();
    let dreadouts: Vec<Array1<T>> = match &g.readout {
        ReadoutPlan::ClassNodes(_) => dinputs,
        ReadoutPlan::Pooled { noi, .. } => {
            let mut dmean = Array1::zeros(d);
            for di in &dinputs {
                dmean += &di.slice(s![..d]);
            }
            dmean /= T::of(noi.len() as f64);
            vec![dmean; noi.len()]
        }
    };
    for (r, dh) in trace.readouts.iter().zip(&dreadouts) {
        let i = r.node;
        let mut dalpha = Array1::zeros(layers);
        for l in 0..layers {
            dalpha[l] = trace.states[l + 1].row(i).dot(dh);
        }
        let mean = r.alpha.dot(&dalpha);
        let mut du = Array1::<T>::zeros(d);
        for l in 0..layers {
            let dlogit = r.alpha[l] * (dalpha[l] - mean);
            let hl = trace.states[l + 1].row(i);
            let mut dst = dstates[l + 1].row_mut(i);
            for k in 0..d {
                dst[k] += r.alpha[l] * dh[k] + dlogit * r.u[k];
                du[k] += dlogit * hl[k];
            }
        }
        let x = g.x.row(i).to_owned();
        let q = params.w_query.dot(&x);
        outer_add(&mut grads.w_key, &q, &du, T::one());
        let dq = params.w_key.dot(&du);
        outer_add(&mut grads.w_query, &dq, &x, T::one());
    }

    // layers, last to first
    for l in (0..layers).rev() {
        let mut dz = std::mem::replace(&mut dstates[l + 1], Array2::zeros((0, 0)));
        if let Some(m) = &trace.masks[l] {
            dz *= m;
        }
        let h = &trace.states[l];
        grads.w_self[l] += &dz.t().dot(h);
        let want_input = l > 0;
        let mut dh = if want_input {
            dz.dot(&params.w_self[l])
        } else {
            Array2::zeros((0, 0))
        };
        for (grp, agg) in g.groups.iter().zip(&trace.aggregates[l]) {
            let mut dout = Array2::<T>::zeros((grp.receivers.len(), d));
            for (k, &i) in grp.receivers.iter().enumerate() {
                dout.row_mut(k).assign(&dz.row(i));
            }
            grads.w_rel[l][grp.relation] += &dout.t().dot(agg);
            if !want_input {
                continue;
            }
            let dagg = dout.dot(&params.w_rel[l][grp.relation]);
            for &(src, r, f) in &grp.edges {
                let w = grp.inv_degree[r];
                let hs = h.row(src);
                let ef = g.edge_features.row(f);
                let da = dagg.row(r);
                let mut dst = dh.row_mut(src);
                for k in 0..d {
                    if hs[k] + ef[k] > T::zero() {
                        dst[k] += w * da[k];
                    }
                }
            }
        }
        if want_input {
            dstates[l] += &dh;
        }
    }
    Ok(loss)
}

/// Loss and gradients for one prompted graph.
pub fn backward<T: Scalar>(
    params: &ModelParams<T>,
    g: &EncodedGraph<T>,
    trace: &ForwardTrace<T>,
    y: &[T],
    scale: T,
) -> Result<(T, ModelParams<T>)> {
    let mut grads = params.zeros_like();
    let loss = backward_into(params, g, trace, y, scale, &mut grads)?;
    Ok((loss, grads))
}
