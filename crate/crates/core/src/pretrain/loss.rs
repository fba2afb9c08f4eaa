//! Parent-label prediction loss and its exact gradient, obtained by
//! backpropagating through the tree structure.

use rand::Rng;

use super::PretrainHead;
use crate::corpus::EncodedTree;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::treelstm::{forward_trace, GateParams, NodeState, TreeLstmModel, TENSOR_NAMES};

/// Softmax over the head applied to the children's mean hidden state.
pub fn parent_distribution(children: &[NodeState], head: &PretrainHead) -> Result<Vec<f64>> {
    if children.is_empty() {
        return Err(Error::Contract("parent prediction needs at least one child".into()));
    }
    let hd = head.hidden_dim();
    let mut mean = vec![0.0; hd];
    for s in children {
        if s.h.len() != hd {
            return Err(Error::Contract("child state width differs from head".into()));
        }
        for (m, h) in mean.iter_mut().zip(&s.h) {
            *m += h;
        }
    }
    let n = children.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    Ok(softmax(&head.logits(&mean)))
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= total);
    p
}

/// Inverted-dropout multipliers for one tree: `d` per node for the input
/// embeddings and `hidden_dim` per node for the head input.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMasks {
    pub input: Vec<f64>,
    pub head: Vec<f64>,
}

impl DropoutMasks {
    pub fn sample<R: Rng>(tree: &EncodedTree, d: usize, hidden_dim: usize, rate: f64, rng: &mut R) -> Self {
        let keep = 1.0 - rate;
        let mut draw = |n: usize| -> Vec<f64> {
            (0..n)
                .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
                .collect()
        };
        let input = draw(tree.len() * d);
        let head = draw(tree.len() * hidden_dim);
        DropoutMasks { input, head }
    }
}

/// Gradient of the loss, shaped like the trainable parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub embeddings: Matrix,
    pub forget: GateParams,
    pub input: GateParams,
    pub cell: GateParams,
    pub output: GateParams,
    pub head: Matrix,
}

impl Gradients {
    pub fn zeros(model: &TreeLstmModel, head: &PretrainHead) -> Self {
        let (d, hd) = (model.embedding_dim(), model.hidden_dim());
        Gradients {
            embeddings: Matrix::zeros(d, model.vocab().len()),
            forget: GateParams::zeros(hd, d),
            input: GateParams::zeros(hd, d),
            cell: GateParams::zeros(hd, d),
            output: GateParams::zeros(hd, d),
            head: Matrix::zeros(head.u.rows(), head.u.cols()),
        }
    }

    /// Same order as [`TreeLstmModel::tensors`] followed by the head.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = vec![self.embeddings.as_slice()];
        for g in [&self.forget, &self.input, &self.cell, &self.output] {
            out.extend([g.w.as_slice(), g.u.as_slice(), g.b.as_slice()]);
        }
        out.push(self.head.as_slice());
        out
    }

    pub fn named(&self) -> Vec<(&'static str, &[f64])> {
        TENSOR_NAMES
            .iter()
            .copied()
            .chain(std::iter::once("head.u"))
            .zip(self.tensors())
            .collect()
    }

    fn scale(&mut self, factor: f64) {
        let mut all: Vec<&mut [f64]> = vec![self.embeddings.as_mut_slice(), self.head.as_mut_slice()];
        for g in [&mut self.forget, &mut self.input, &mut self.cell, &mut self.output] {
            all.push(g.w.as_mut_slice());
            all.push(g.u.as_mut_slice());
            all.push(g.b.as_mut_slice());
        }
        for t in all {
            t.iter_mut().for_each(|v| *v *= factor);
        }
    }
}

/// Negative log-likelihood summed over the internal nodes of one tree, with
/// the gradient of that sum accumulated into `grads` when given.
pub(crate) fn tree_nll(
    tree: &EncodedTree,
    model: &TreeLstmModel,
    head: &PretrainHead,
    masks: Option<&DropoutMasks>,
    mut grads: Option<&mut Gradients>,
) -> Result<f64> {
    let (d, hd) = (model.embedding_dim(), model.hidden_dim());
    if head.hidden_dim() != hd || head.vocab_size() != model.vocab().len() {
        return Err(Error::Contract("pretraining head does not match the model".into()));
    }
    let trace = forward_trace(tree, model, masks.map(|m| m.input.as_slice()))?;
    let n = tree.len();
    let want_grad = grads.is_some();
    let mut dh = if want_grad { vec![0.0; n * hd] } else { Vec::new() };
    let mut dc = if want_grad { vec![0.0; n * hd] } else { Vec::new() };

    let mut nll = 0.0;
    let mut x = vec![0.0; hd];
    for t in tree.internal_nodes() {
        let kids = tree.children(t);
        x.iter_mut().for_each(|v| *v = 0.0);
        for &k in kids {
            for (xv, h) in x.iter_mut().zip(&trace.nodes[k].h) {
                *xv += h;
            }
        }
        let inv = 1.0 / kids.len() as f64;
        x.iter_mut().for_each(|v| *v *= inv);
        if let Some(m) = masks {
            for (xv, s) in x.iter_mut().zip(&m.head[t * hd..(t + 1) * hd]) {
                *xv *= s;
            }
        }
        let logits = head.logits(&x);
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_total = logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln() + max;
        let target = tree.label(t);
        nll += log_total - logits[target];

        if let Some(g) = grads.as_deref_mut() {
            // dL/dlogits = p − onehot
            let mut dlogits: Vec<f64> = logits.iter().map(|&z| (z - log_total).exp()).collect();
            dlogits[target] -= 1.0;
            g.head.add_outer(&dlogits, &x);
            let mut dx = vec![0.0; hd];
            head.u.mul_t_vec_acc(&dlogits, &mut dx);
            if let Some(m) = masks {
                for (v, s) in dx.iter_mut().zip(&m.head[t * hd..(t + 1) * hd]) {
                    *v *= s;
                }
            }
            for &k in kids {
                for (acc, v) in dh[k * hd..(k + 1) * hd].iter_mut().zip(&dx) {
                    *acc += v * inv;
                }
            }
        }
    }
    if !nll.is_finite() {
        return Err(Error::Internal("non-finite pretraining loss".into()));
    }
    let Some(g) = grads else {
        return Ok(nll);
    };

    let mut dw = vec![0.0; d];
    let mut dh_sum = vec![0.0; hd];
    let mut da = vec![0.0; hd];
    for t in (0..n).rev() {
        let node = &trace.nodes[t];
        let dh_t = dh[t * hd..(t + 1) * hd].to_vec();
        let mut dc_t = dc[t * hd..(t + 1) * hd].to_vec();
        dw.iter_mut().for_each(|v| *v = 0.0);
        dh_sum.iter_mut().for_each(|v| *v = 0.0);

        // h = o ⊙ tanh(c)
        let mut da_o = vec![0.0; hd];
        for j in 0..hd {
            let tc = node.c[j].tanh();
            let o = node.output[j];
            dc_t[j] += dh_t[j] * o * (1.0 - tc * tc);
            da_o[j] = dh_t[j] * tc * o * (1.0 - o);
        }
        // c = i ⊙ c̃ + Σ f_k ⊙ c_k
        let mut da_i = vec![0.0; hd];
        let mut da_c = vec![0.0; hd];
        for j in 0..hd {
            let (i, cand) = (node.input[j], node.candidate[j]);
            da_i[j] = dc_t[j] * cand * i * (1.0 - i);
            da_c[j] = dc_t[j] * i * (1.0 - cand * cand);
        }
        for (params, grad, delta) in [
            (&model.input, &mut g.input, &da_i),
            (&model.cell, &mut g.cell, &da_c),
            (&model.output, &mut g.output, &da_o),
        ] {
            grad.w.add_outer(delta, &node.w);
            grad.u.add_outer(delta, &node.h_sum);
            for (b, v) in grad.b.iter_mut().zip(delta.iter()) {
                *b += v;
            }
            params.w.mul_t_vec_acc(delta, &mut dw);
            params.u.mul_t_vec_acc(delta, &mut dh_sum);
        }
        for (slot, &k) in tree.children(t).iter().enumerate() {
            let f = &node.forget[slot * hd..(slot + 1) * hd];
            let child = &trace.nodes[k];
            for j in 0..hd {
                da[j] = dc_t[j] * child.c[j] * f[j] * (1.0 - f[j]);
                dc[k * hd + j] += dc_t[j] * f[j];
            }
            g.forget.w.add_outer(&da, &node.w);
            g.forget.u.add_outer(&da, &child.h);
            for (b, v) in g.forget.b.iter_mut().zip(&da) {
                *b += v;
            }
            model.forget.w.mul_t_vec_acc(&da, &mut dw);
            let dh_k = &mut dh[k * hd..(k + 1) * hd];
            model.forget.u.mul_t_vec_acc(&da, dh_k);
            for (acc, v) in dh_k.iter_mut().zip(&dh_sum) {
                *acc += v;
            }
        }
        // w = M[:, label] ⊙ mask
        let label = tree.label(t);
        for r in 0..d {
            let scale = masks.map_or(1.0, |m| m.input[t * d + r]);
            let v = g.embeddings.get(r, label) + dw[r] * scale;
            g.embeddings.set(r, label, v);
        }
    }
    Ok(nll)
}

fn total_internal(trees: &[EncodedTree]) -> Result<usize> {
    if trees.is_empty() {
        return Err(Error::Input("loss needs at least one tree".into()));
    }
    let n: usize = trees.iter().map(EncodedTree::internal_count).sum();
    if n == 0 {
        return Err(Error::Input("corpus has no internal nodes to predict".into()));
    }
    Ok(n)
}

/// Mean negative log-probability of the true parent label over every
/// internal node. `masks`, when given, holds one set per tree.
pub fn corpus_loss(
    trees: &[EncodedTree],
    model: &TreeLstmModel,
    head: &PretrainHead,
    masks: Option<&[DropoutMasks]>,
) -> Result<f64> {
    let n = total_internal(trees)?;
    let mut sum = 0.0;
    for (i, tree) in trees.iter().enumerate() {
        sum += tree_nll(tree, model, head, masks.map(|m| &m[i]), None)?;
    }
    Ok(sum / n as f64)
}

/// `corpus_loss` and its gradient with respect to every parameter tensor.
pub fn gradients(
    trees: &[EncodedTree],
    model: &TreeLstmModel,
    head: &PretrainHead,
    masks: Option<&[DropoutMasks]>,
) -> Result<(f64, Gradients)> {
    let n = total_internal(trees)?;
    let mut grads = Gradients::zeros(model, head);
    let mut sum = 0.0;
    for (i, tree) in trees.iter().enumerate() {
        sum += tree_nll(tree, model, head, masks.map(|m| &m[i]), Some(&mut grads))?;
    }
    let inv = 1.0 / n as f64;
    grads.scale(inv);
    Ok((sum * inv, grads))
}

/// `exp` of the dropout-free corpus loss.
pub fn perplexity(model: &TreeLstmModel, head: &PretrainHead, trees: &[EncodedTree]) -> Result<f64> {
    Ok(corpus_loss(trees, model, head, None)?.exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Vocabulary;
    use crate::rng;
    use rand::Rng;

    fn vocab(n: usize) -> Vocabulary {
        let mut t = vec!["<unk>".to_string()];
        t.extend((1..n).map(|i| format!("t{i}")));
        Vocabulary::from_tokens(t).unwrap()
    }

    /// Random tree in post-order with at most `max_nodes` nodes.
    fn random_tree<R: Rng>(rng: &mut R, max_nodes: usize, vocab_size: usize) -> EncodedTree {
        let n = rng.gen_range(2..=max_nodes);
        // every parent index exceeds its children, as post-order requires
        let mut parent = vec![usize::MAX; n];
        for i in 0..n - 1 {
            parent[i] = rng.gen_range(i + 1..n);
        }
        let mut children = vec![Vec::new(); n];
        for i in 0..n - 1 {
            children[parent[i]].push(i);
        }
        let labels = (0..n).map(|_| rng.gen_range(0..vocab_size)).collect();
        EncodedTree::from_parts(labels, children).unwrap()
    }

    fn perturbed_model_and_head(seed: u64, v: usize, d: usize, hd: usize) -> (TreeLstmModel, PretrainHead) {
        let mut model = TreeLstmModel::init(vocab(v), d, hd, seed).unwrap();
        let mut r = rng::stream(seed, "test-perturb");
        for t in model.tensors_mut() {
            t.iter_mut().for_each(|x| *x += r.gen_range(-0.5..0.5));
        }
        let head = PretrainHead::glorot(v, hd, &mut r);
        (model, head)
    }

    #[test]
    fn parent_distribution_closed_form() {
        let mut head = PretrainHead::zeros(2, 1);
        head.u.set(0, 0, 1.0);
        let kids = [NodeState { h: vec![1.0], c: vec![0.0] }];
        let p = parent_distribution(&kids, &head).unwrap();
        let e = std::f64::consts::E;
        assert!((p[0] - e / (e + 1.0)).abs() < 1e-15);
        assert!((p[1] - 1.0 / (e + 1.0)).abs() < 1e-15);
        assert!(parent_distribution(&[], &head).is_err());
    }

    #[test]
    fn zero_head_gives_uniform_loss() {
        let mut r = rng::stream(4, "t");
        let model = TreeLstmModel::init(vocab(6), 3, 3, 2).unwrap();
        let head = PretrainHead::zeros(6, 3);
        let trees: Vec<_> = (0..5).map(|_| random_tree(&mut r, 8, 6)).collect();
        let loss = corpus_loss(&trees, &model, &head, None).unwrap();
        assert!((loss - 6f64.ln()).abs() < 1e-12);
        assert!((perplexity(&model, &head, &trees).unwrap() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn loss_is_mean_over_internal_nodes() {
        // One tree with 1 internal node, one with 3: the pooled loss weights
        // each node, not each tree.
        let (model, head) = perturbed_model_and_head(3, 4, 2, 2);
        let a = EncodedTree::from_parts(vec![1, 2], vec![vec![], vec![0]]).unwrap();
        let b = EncodedTree::from_parts(vec![1, 3, 2, 1], vec![vec![], vec![0], vec![1], vec![2]]).unwrap();
        let la = corpus_loss(&[a.clone()], &model, &head, None).unwrap();
        let lb = corpus_loss(&[b.clone()], &model, &head, None).unwrap();
        let both = corpus_loss(&[a, b], &model, &head, None).unwrap();
        assert!((both - (la + 3.0 * lb) / 4.0).abs() < 1e-12);
    }

    #[test]
    fn leaf_only_corpus_rejected() {
        let model = TreeLstmModel::zeros(vocab(3), 2, 2).unwrap();
        let head = PretrainHead::zeros(3, 2);
        let leaf = EncodedTree::from_parts(vec![1], vec![vec![]]).unwrap();
        assert!(corpus_loss(&[leaf], &model, &head, None).is_err());
        assert!(corpus_loss(&[], &model, &head, None).is_err());
    }

    fn central_difference(
        trees: &[EncodedTree],
        model: &TreeLstmModel,
        head: &PretrainHead,
        masks: Option<&[DropoutMasks]>,
        tensor: usize,
        index: usize,
        step: f64,
    ) -> f64 {
        let eval = |delta: f64| {
            let (mut m, mut h) = (model.clone(), head.clone());
            if tensor < 13 {
                m.tensors_mut()[tensor][index] += delta;
            } else {
                h.u.as_mut_slice()[index] += delta;
            }
            corpus_loss(trees, &m, &h, masks).unwrap()
        };
        (eval(step) - eval(-step)) / (2.0 * step)
    }

    fn max_rel_error(masked: bool) -> f64 {
        let mut r = rng::stream(17, "fd");
        let (model, head) = perturbed_model_and_head(5, 6, 3, 3);
        let trees: Vec<_> = (0..6).map(|_| random_tree(&mut r, 8, 6)).collect();
        let masks: Option<Vec<DropoutMasks>> =
            masked.then(|| trees.iter().map(|t| DropoutMasks::sample(t, 3, 3, 0.3, &mut r)).collect());
        let (_, grads) = gradients(&trees, &model, &head, masks.as_deref()).unwrap();
        let mut worst = 0.0f64;
        for (ti, g) in grads.tensors().iter().enumerate() {
            for (i, &a) in g.iter().enumerate() {
                let n = central_difference(&trees, &model, &head, masks.as_deref(), ti, i, 1e-5);
                let err = (a - n).abs() / a.abs().max(n.abs()).max(1e-6);
                worst = worst.max(err);
            }
        }
        worst
    }

    #[test]
    fn analytic_gradient_matches_central_differences() {
        assert!(max_rel_error(false) < 1e-4);
    }

    #[test]
    fn gradient_with_fixed_dropout_masks_matches() {
        assert!(max_rel_error(true) < 1e-4);
    }

    #[test]
    fn duplicated_corpus_has_same_mean_gradient() {
        let mut r = rng::stream(3, "dup");
        let (model, head) = perturbed_model_and_head(8, 5, 2, 2);
        let trees: Vec<_> = (0..4).map(|_| random_tree(&mut r, 7, 5)).collect();
        let doubled: Vec<_> = trees.iter().chain(&trees).cloned().collect();
        let (l1, g1) = gradients(&trees, &model, &head, None).unwrap();
        let (l2, g2) = gradients(&doubled, &model, &head, None).unwrap();
        assert!((l1 - l2).abs() < 1e-12);
        for (a, b) in g1.tensors().iter().zip(g2.tensors()) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dropout_masks_use_inverted_scaling() {
        let tree = EncodedTree::from_parts(vec![1, 2], vec![vec![], vec![0]]).unwrap();
        let mut r = rng::stream(1, "m");
        let m = DropoutMasks::sample(&tree, 50, 50, 0.5, &mut r);
        assert_eq!(m.input.len(), 100);
        assert!(m.input.iter().chain(&m.head).all(|&v| v == 0.0 || v == 2.0));
        assert!(m.input.iter().any(|&v| v == 0.0) && m.input.iter().any(|&v| v == 2.0));
    }
}
