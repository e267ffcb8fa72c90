"""Pointer decoder with pairwise ordering context.

An LSTM cell, seeded with the encoder's set vector, emits one hidden state
per output slot; a pointer attention over the (still unselected) candidate
elements turns that state into a distribution over which element to place
next.  The pointer score for candidate j at step i is

    score_j = v . tanh(W1 h_i + W2 M_i[j] + We e_j)

where M_i[j] stacks two learned summaries of j's pairwise relations: a
"future" vector (mean over the other remaining candidates k of
sigmoid(f_score(e_j, e_k)) * f_emb(e_j, e_k)) and a "history" vector (mean
over already-selected u of h_emb(e_u, e_j)); empty means are zero vectors.
Both pair heads are two-layer MLPs on the concatenated pair embedding with
a tanh between, emitting a d_model-wide context embedding and a scalar
precedence logit.  The logits feed an auxiliary binary cross-entropy loss:
future pairs (j, k) are labeled 1 iff j precedes k in the target, history
pairs are always labeled 1.

Because the pair MLPs only see encoder outputs, every pairwise quantity is
precomputed once per instance into (n*n, .) tables and each decoding step
just re-averages them under the current candidate/selected masks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .encoder import EncodedSet
from .numerics import (
    ParameterStore,
    SeededRng,
    Tensor,
    add,
    concat_cols,
    concat_rows,
    dropout,
    future_context,
    history_context,
    masked_log_softmax_rows,
    matmul,
    mean_all,
    mul,
    no_grad,
    repeat_rows,
    sigmoid,
    slice_cols,
    slice_rows,
    softplus,
    sub,
    sum_all,
    take_rows,
    tanh,
    tile_rows,
    transpose,
)


@dataclass
class DecoderConfig:
    d_model: int = 256
    d_att: int | None = None       # pointer attention width; d_model when unset
    pair_hidden: int | None = None  # pair-MLP hidden width; d_model when unset
    dropout: float = 0.1           # applied to the LSTM input during training
    pair_cap: int = 32             # max auxiliary pairs kept per decode step

    def __post_init__(self):
        if self.d_model <= 0:
            raise ValueError(f"d_model must be positive, got {self.d_model}")
        if self.d_att is None:
            self.d_att = self.d_model
        if self.pair_hidden is None:
            self.pair_hidden = self.d_model
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.pair_cap < 1:
            raise ValueError(f"pair_cap must be >= 1, got {self.pair_cap}")


@dataclass
class PairHeadWeights:
    w1: Tensor      # 2*d_model x hidden
    b1: Tensor      # 1 x hidden
    w_emb: Tensor   # hidden x d_model
    b_emb: Tensor   # 1 x d_model
    w_logit: Tensor  # hidden x 1
    b_logit: Tensor  # 1 x 1


@dataclass
class DecoderWeights:
    start: Tensor    # learned first LSTM input, 1 x d_model
    lstm_w_ih: Tensor  # d_model x 4*d_model, gate order (input, forget, cell, output)
    lstm_w_hh: Tensor  # d_model x 4*d_model
    lstm_b: Tensor     # 1 x 4*d_model
    ptr_w1: Tensor   # d_model x d_att   (decoder state)
    ptr_w2: Tensor   # 2*d_model x d_att (pairwise context block)
    ptr_we: Tensor   # d_model x d_att   (candidate embedding)
    ptr_v: Tensor    # d_att x 1
    future: PairHeadWeights
    history: PairHeadWeights


def _build_pair_head(store: ParameterStore, prefix: str, cfg: DecoderConfig) -> PairHeadWeights:
    d, h = cfg.d_model, cfg.pair_hidden
    return PairHeadWeights(
        w1=store.create(f"{prefix}.w1", (2 * d, h)),
        b1=store.create(f"{prefix}.b1", (1, h), kind="zeros"),
        w_emb=store.create(f"{prefix}.w_emb", (h, d)),
        b_emb=store.create(f"{prefix}.b_emb", (1, d), kind="zeros"),
        w_logit=store.create(f"{prefix}.w_logit", (h, 1)),
        b_logit=store.create(f"{prefix}.b_logit", (1, 1), kind="zeros"),
    )


def build_decoder_weights(store: ParameterStore, cfg: DecoderConfig) -> DecoderWeights:
    d = cfg.d_model
    return DecoderWeights(
        start=store.create("decoder.start", (1, d)),
        lstm_w_ih=store.create("decoder.lstm.w_ih", (d, 4 * d)),
        lstm_w_hh=store.create("decoder.lstm.w_hh", (d, 4 * d)),
        lstm_b=store.create("decoder.lstm.b", (1, 4 * d), kind="zeros"),
        ptr_w1=store.create("decoder.ptr.w1", (d, cfg.d_att)),
        ptr_w2=store.create("decoder.ptr.w2", (2 * d, cfg.d_att)),
        ptr_we=store.create("decoder.ptr.we", (d, cfg.d_att)),
        ptr_v=store.create("decoder.ptr.v", (cfg.d_att, 1)),
        future=_build_pair_head(store, "decoder.future", cfg),
        history=_build_pair_head(store, "decoder.history", cfg),
    )


def lstm_step(w: DecoderWeights, x: Tensor, h: Tensor, c: Tensor,
              drop_rate: float = 0.0, rng: SeededRng | None = None) -> tuple[Tensor, Tensor]:
    """One LSTM cell update; gate layout along columns is (i, f, g, o)."""
    d = h.shape[1]
    if x.shape != (1, d):
        raise ValueError(f"lstm input must be 1 x {d}, got {x.shape}")
    if drop_rate > 0.0 and rng is not None:
        x = dropout(x, drop_rate, rng)
    gates = add(add(matmul(x, w.lstm_w_ih), matmul(h, w.lstm_w_hh)), w.lstm_b)
    i = sigmoid(slice_cols(gates, 0, d))
    f = sigmoid(slice_cols(gates, d, 2 * d))
    g = tanh(slice_cols(gates, 2 * d, 3 * d))
    o = sigmoid(slice_cols(gates, 3 * d, 4 * d))
    c_new = add(mul(f, c), mul(i, g))
    h_new = mul(o, tanh(c_new))
    return h_new, c_new


@dataclass
class PairTables:
    """Per-instance pairwise precompute; row j*n + k describes the pair (j, k)."""

    n: int
    future_weighted: Tensor  # n*n x d_model, sigmoid(logit) * embedding
    future_logit: Tensor     # n*n x 1
    hist_emb: Tensor         # n*n x d_model
    hist_logit: Tensor       # n*n x 1


def _pair_head_forward(elements: Tensor, head: PairHeadWeights) -> tuple[Tensor, Tensor]:
    """All-pairs MLP pass: returns (embeddings (n*n, d), logits (n*n, 1)).

    concat(e_j, e_k) @ w1 splits into e_j @ w1_top + e_k @ w1_bottom, so the
    first layer runs once per element instead of once per pair.
    """
    n, d = elements.shape
    w_top = slice_rows(head.w1, 0, d)
    w_bot = slice_rows(head.w1, d, 2 * d)
    left = repeat_rows(matmul(elements, w_top), n)   # row j*n+k <- e_j
    right = tile_rows(matmul(elements, w_bot), n)    # row j*n+k <- e_k
    hidden = tanh(add(add(left, right), head.b1))
    emb = add(matmul(hidden, head.w_emb), head.b_emb)
    logit = add(matmul(hidden, head.w_logit), head.b_logit)
    return emb, logit


def pair_tables(elements: Tensor, w: DecoderWeights) -> PairTables:
    n = elements.shape[0]
    f_emb, f_logit = _pair_head_forward(elements, w.future)
    h_emb, h_logit = _pair_head_forward(elements, w.history)
    return PairTables(
        n=n,
        future_weighted=mul(sigmoid(f_logit), f_emb),
        future_logit=f_logit,
        hist_emb=h_emb,
        hist_logit=h_logit,
    )


def pairwise_context(tables: PairTables, cand_mask: np.ndarray,
                     selected_mask: np.ndarray) -> Tensor:
    """M_i: per-element concat of the future and history summaries (n x 2d)."""
    fut = future_context(tables.future_weighted, cand_mask, tables.n)
    hist = history_context(tables.hist_emb, selected_mask, tables.n)
    return concat_cols([fut, hist])


def pointer_scores(h: Tensor, context: Tensor, we_elements: Tensor, w: DecoderWeights) -> Tensor:
    """Unnormalized pointer scores, one per element row: returns 1 x n.

    we_elements is the precomputed elements @ ptr_we (n x d_att).
    """
    mixed = tanh(add(add(matmul(h, w.ptr_w1), matmul(context, w.ptr_w2)), we_elements))
    return transpose(matmul(mixed, w.ptr_v))


def _pair_batch(n: int, cand: np.ndarray, sel: np.ndarray, pos: np.ndarray,
                pair_cap: int, rng: SeededRng | None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Auxiliary-loss pairs for one step.

    Returns (future row indices, future labels, history row indices); row
    index j*n + k addresses the (j, k) entry of the pair tables.  Future
    pairs are all ordered candidate pairs, labeled by target precedence;
    history pairs are (selected u, candidate j), always labeled 1.  The union
    is subsampled to pair_cap: uniformly without replacement when an rng is
    given, else an even deterministic stride.
    """
    cand_idx = np.flatnonzero(cand)
    sel_idx = np.flatnonzero(sel)
    fut_rows = np.empty(0, dtype=np.intp)
    fut_labels = np.empty(0, dtype=np.float64)
    if cand_idx.size >= 2:
        j = np.repeat(cand_idx, cand_idx.size)
        k = np.tile(cand_idx, cand_idx.size)
        keep = j != k
        j, k = j[keep], k[keep]
        fut_rows = j * n + k
        fut_labels = (pos[j] < pos[k]).astype(np.float64)
    hist_rows = np.empty(0, dtype=np.intp)
    if sel_idx.size and cand_idx.size:
        u = np.repeat(sel_idx, cand_idx.size)
        j2 = np.tile(cand_idx, sel_idx.size)
        hist_rows = u * n + j2
    total = fut_rows.size + hist_rows.size
    if total > pair_cap:
        if rng is not None:
            pick = np.sort(rng.choice(total, size=pair_cap, replace=False))
        else:
            pick = np.unique(np.round(np.linspace(0, total - 1, pair_cap)).astype(np.intp))
        fut_keep = pick[pick < fut_rows.size]
        hist_keep = pick[pick >= fut_rows.size] - fut_rows.size
        fut_rows, fut_labels = fut_rows[fut_keep], fut_labels[fut_keep]
        hist_rows = hist_rows[hist_keep]
    return fut_rows, fut_labels, hist_rows


def teacher_forced_nll(enc: EncodedSet, target, w: DecoderWeights, cfg: DecoderConfig,
                       rng: SeededRng | None = None) -> tuple[Tensor, Tensor]:
    """Teacher-forced decode: returns (total NLL, mean pair BCE) as scalars.

    The first term is -sum_i log p(y_i | y_<i), so an untrained model scores
    about log(n!).  target must be a permutation of the unmasked element
    indices.  The rng, when given, drives LSTM-input dropout and pair
    subsampling (training mode); without it the pass is deterministic.
    """
    n = enc.elements.shape[0]
    y = np.asarray(target, dtype=np.intp).reshape(-1)
    real = np.flatnonzero(enc.mask)
    if sorted(y.tolist()) != sorted(real.tolist()):
        raise ValueError(
            f"target must be a permutation of the {real.size} unmasked indices, got {y.tolist()}")

    tables = pair_tables(enc.elements, w)
    we_elements = matmul(enc.elements, w.ptr_we)
    pos = np.full(n, -1, dtype=np.intp)
    pos[y] = np.arange(y.size)

    cand = enc.mask.copy()
    sel = np.zeros(n, dtype=bool)
    h, c = enc.set_vec, Tensor(np.zeros((1, cfg.d_model), dtype=enc.set_vec.dtype))
    x = w.start

    logp_terms: list[Tensor] = []
    pair_logits: list[Tensor] = []
    pair_labels: list[np.ndarray] = []
    for yi in y:
        h, c = lstm_step(w, x, h, c, drop_rate=cfg.dropout, rng=rng)
        context = pairwise_context(tables, cand, sel)
        scores = pointer_scores(h, context, we_elements, w)
        logp = masked_log_softmax_rows(scores, cand)
        logp_terms.append(slice_cols(logp, int(yi), int(yi) + 1))

        fut_rows, fut_labels, hist_rows = _pair_batch(n, cand, sel, pos, cfg.pair_cap, rng)
        if fut_rows.size:
            pair_logits.append(take_rows(tables.future_logit, fut_rows))
            pair_labels.append(fut_labels)
        if hist_rows.size:
            pair_logits.append(take_rows(tables.hist_logit, hist_rows))
            pair_labels.append(np.ones(hist_rows.size, dtype=np.float64))

        cand[yi] = False
        sel[yi] = True
        x = take_rows(enc.elements, [int(yi)])

    nll = mul(sum_all(concat_rows(logp_terms)), Tensor(np.asarray(-1.0, dtype=enc.set_vec.dtype)))
    if pair_logits:
        z = concat_rows(pair_logits)
        labels = Tensor(np.concatenate(pair_labels).reshape(-1, 1).astype(z.data.dtype))
        # BCE with logits: softplus(z) - y*z == -[y log sig(z) + (1-y) log(1 - sig(z))]
        bce = sub(softplus(z), mul(labels, z))
        l_s = mean_all(bce)
    else:
        l_s = Tensor(np.zeros((1, 1), dtype=enc.set_vec.dtype))
    return nll, l_s


def batch_loss(nlls: list[Tensor], pair_losses: list[Tensor], lambda_pair: float,
               subtract_pair_term: bool = False) -> Tensor:
    """Combine per-instance losses: mean(nll) + lambda * mean(pair BCE).

    subtract_pair_term=True flips the auxiliary term to mean(nll) - lambda *
    mean(pair BCE); the default additive form is the one that penalizes wrong
    precedence predictions, so it is what training uses.
    """
    if len(nlls) != len(pair_losses) or not nlls:
        raise ValueError("need equal, non-empty lists of per-instance loss terms")
    mean_nll = mean_all(concat_rows(nlls))
    mean_pair = mean_all(concat_rows(pair_losses))
    lam = Tensor(np.asarray(lambda_pair, dtype=mean_nll.dtype))
    term = mul(lam, mean_pair)
    return sub(mean_nll, term) if subtract_pair_term else add(mean_nll, term)


def decode_greedy(enc: EncodedSet, w: DecoderWeights, cfg: DecoderConfig) -> list[int]:
    """Greedy pointer decode; ties broken toward the lowest element index."""
    with no_grad():
        n = enc.elements.shape[0]
        tables = pair_tables(enc.elements, w)
        we_elements = matmul(enc.elements, w.ptr_we)
        cand = enc.mask.copy()
        sel = np.zeros(n, dtype=bool)
        h, c = enc.set_vec, Tensor(np.zeros((1, cfg.d_model), dtype=enc.set_vec.dtype))
        x = w.start
        out: list[int] = []
        for _ in range(int(enc.mask.sum())):
            h, c = lstm_step(w, x, h, c)
            context = pairwise_context(tables, cand, sel)
            scores = pointer_scores(h, context, we_elements, w).data.reshape(-1)
            masked = np.where(cand, scores, -np.inf)
            yi = int(np.argmax(masked))  # argmax returns the first (lowest) index on ties
            out.append(yi)
            cand[yi] = False
            sel[yi] = True
            x = take_rows(enc.elements, [yi])
    return out
