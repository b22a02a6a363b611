use crate::error::{contract, Result};
use crate::tensor::{Graph, Tensor, Var};

/// Per-block tensor suffixes, in the order [`block_forward`] expects them.
pub const BLOCK_TENSORS: [&str; 16] = [
    "ln1.gain",
    "ln1.bias",
    "attn.q.weight",
    "attn.q.bias",
    "attn.k.weight",
    "attn.k.bias",
    "attn.v.weight",
    "attn.v.bias",
    "attn.out.weight",
    "attn.out.bias",
    "ln2.gain",
    "ln2.bias",
    "mlp.fc1.weight",
    "mlp.fc1.bias",
    "mlp.fc2.weight",
    "mlp.fc2.bias",
];

pub(crate) mod idx {
    pub const LN1_G: usize = 0;
    pub const LN1_B: usize = 1;
    pub const Q_W: usize = 2;
    pub const Q_B: usize = 3;
    pub const K_W: usize = 4;
    pub const K_B: usize = 5;
    pub const V_W: usize = 6;
    pub const V_B: usize = 7;
    pub const OUT_W: usize = 8;
    pub const OUT_B: usize = 9;
    pub const LN2_G: usize = 10;
    pub const LN2_B: usize = 11;
    pub const FC1_W: usize = 12;
    pub const FC1_B: usize = 13;
    pub const FC2_W: usize = 14;
    pub const FC2_B: usize = 15;
}

pub fn block_shape(suffix: &str, dim: usize, hidden: usize) -> Vec<usize> {
    match suffix {
        "attn.q.weight" | "attn.k.weight" | "attn.v.weight" | "attn.out.weight" => vec![dim, dim],
        "mlp.fc1.weight" => vec![dim, hidden],
        "mlp.fc1.bias" => vec![hidden],
        "mlp.fc2.weight" => vec![hidden, dim],
        _ => vec![dim],
    }
}

/// Attention recorded while running one block.
#[derive(Clone, Debug)]
pub struct BlockCapture {
    /// Head-averaged attention, `N x N`, rows are queries.
    pub attention: Tensor,
    pub per_head: Option<Vec<Tensor>>,
}

/// One pre-LN block: `x + Attn(LN1(x))`, then `+ MLP(LN2(.))`.
///
/// `params` are graph nodes in [`BLOCK_TENSORS`] order.
pub fn block_forward(
    g: &mut Graph,
    x: Var,
    params: &[Var],
    heads: usize,
    eps: f64,
    keep_heads: bool,
) -> Result<(Var, BlockCapture)> {
    use idx::*;
    if params.len() != BLOCK_TENSORS.len() {
        return Err(contract!("block needs {} tensors, got {}", BLOCK_TENSORS.len(), params.len()));
    }
    let (n, dim) = g.value(x).dims2()?;
    if heads == 0 || dim % heads != 0 {
        return Err(contract!("dim {dim} not divisible into {heads} heads"));
    }
    let hd = dim / heads;
    let p = params;

    let h = g.layernorm(x, p[LN1_G], p[LN1_B], eps)?;
    let q = g.linear(h, p[Q_W], p[Q_B])?;
    let k = g.linear(h, p[K_W], p[K_B])?;
    let v = g.linear(h, p[V_W], p[V_B])?;
    let scale = 1.0 / (hd as f64).sqrt();

    let mut head_outs = Vec::with_capacity(heads);
    let mut attn_sum = vec![0.0; n * n];
    let mut per_head = keep_heads.then(Vec::new);
    for i in 0..heads {
        let (a, b) = (i * hd, (i + 1) * hd);
        let qh = g.slice(q, 1, a, b)?;
        let kh = g.slice(k, 1, a, b)?;
        let vh = g.slice(v, 1, a, b)?;
        let kt = g.transpose(kh)?;
        let scores = g.matmul(qh, kt)?;
        let scores = g.scale(scores, scale)?;
        let probs = g.softmax_rows(scores)?;
        for (acc, &pv) in attn_sum.iter_mut().zip(g.value(probs).data()) {
            *acc += pv;
        }
        if let Some(ph) = per_head.as_mut() {
            ph.push(g.value(probs).clone());
        }
        head_outs.push(g.matmul(probs, vh)?);
    }
    let merged = if heads == 1 { head_outs[0] } else { g.concat(&head_outs, 1)? };
    let attn_out = g.linear(merged, p[OUT_W], p[OUT_B])?;
    let x1 = g.add(x, attn_out)?;

    let h2 = g.layernorm(x1, p[LN2_G], p[LN2_B], eps)?;
    let m = g.linear(h2, p[FC1_W], p[FC1_B])?;
    let m = g.gelu(m)?;
    let m = g.linear(m, p[FC2_W], p[FC2_B])?;
    let out = g.add(x1, m)?;

    let inv = 1.0 / heads as f64;
    let attention = Tensor::new(vec![n, n], attn_sum.into_iter().map(|v| v * inv).collect())?;
    Ok((out, BlockCapture { attention, per_head }))
}
