"""Seq2seq instruction-to-program translator.

Single-layer encoder LSTM over trainable word embeddings; decoder LSTM
initialized from the encoder's final state; bilinear attention comparing
the decoder state against every encoder state (scores h_t' W_a h_s, softmax
normalized, context = alignment-weighted sum of encoder states); output
head FC -> ReLU -> FC -> softmax over the closed program vocabulary.
Greedy decoding, teacher-forced training with Adam, and a finite-difference
gradient check over every parameter tensor.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .corpus import ENGLISH_WORDS, InstructionLexError, english_tokenize
from .dsl import TOKEN_IDS, VOCABULARY, EOS_TEXT

CHECKPOINT_FORMAT = "roboscript-ckpt"
CHECKPOINT_VERSION = 1


class UnknownSourceToken(Exception):
    pass


class NonFiniteLoss(Exception):
    pass


@dataclass(frozen=True)
class ModelConfig:
    embed_dim: int = 64
    hidden_dim: int = 128
    head_dim: int = 128
    max_decode_len: int = 256
    seed: int = 0

    def __post_init__(self):
        if min(self.embed_dim, self.hidden_dim, self.head_dim) < 1:
            raise ValueError("all dimensions must be >= 1")


@dataclass
class DecoderStep:
    """Everything one decode step produces, for inspection and export."""
    hidden: np.ndarray          # decoder state after consuming prev token
    scores: np.ndarray          # raw alignment scores, one per source position
    alignment: np.ndarray       # softmax-normalized scores
    context: np.ndarray         # alignment-weighted sum of encoder states
    logits: np.ndarray          # over the target vocabulary
    token: str                  # argmax token text


@dataclass
class Translation:
    tokens: list                # emitted token texts, EOS stripped
    attention: np.ndarray       # (steps, source length) alignment rows
    source_words: list
    truncated: bool             # hit max_decode_len without EOS

    @property
    def malformed(self) -> bool:
        return self.truncated


class Translator:
    """Model parameters plus the batched forward passes."""

    def __init__(self, config: ModelConfig,
                 src_vocab=None, tgt_vocab=None, rng=None):
        self.config = config
        self.src_vocab = list(src_vocab) if src_vocab is not None \
            else ["<pad>"] + list(ENGLISH_WORDS)
        self.tgt_vocab = list(tgt_vocab) if tgt_vocab is not None \
            else [t.text for t in VOCABULARY]
        self.src_ids = {w: i for i, w in enumerate(self.src_vocab)}
        self.tgt_ids = {t: i for i, t in enumerate(self.tgt_vocab)}
        self.eos_id = self.tgt_ids[EOS_TEXT]
        if rng is None:
            rng = np.random.default_rng(config.seed)
        E, H, D = config.embed_dim, config.hidden_dim, config.head_dim
        V_src, V_tgt = len(self.src_vocab), len(self.tgt_vocab)
        enc_W, enc_b = nn.lstm_init(rng, E, H)
        dec_W, dec_b = nn.lstm_init(rng, E, H)
        self.params = {
            "src_embed": nn.param(nn.init_uniform(rng, (V_src, E))),
            "enc_W": nn.param(enc_W),
            "enc_b": nn.param(enc_b),
            "tgt_embed": nn.param(nn.init_uniform(rng, (V_tgt, E))),
            "dec_W": nn.param(dec_W),
            "dec_b": nn.param(dec_b),
            "attn_W": nn.param(nn.init_uniform(rng, (H, H))),
            "head_W1": nn.param(nn.init_uniform(rng, (2 * H, D))),
            "head_b1": nn.param(np.zeros(D)),
            "head_W2": nn.param(nn.init_uniform(rng, (D, V_tgt))),
            "head_b2": nn.param(np.zeros(V_tgt)),
        }

    # -- vocabulary -----------------------------------------------------

    def words_to_ids(self, words) -> np.ndarray:
        try:
            return np.array([self.src_ids[w] for w in words], dtype=np.intp)
        except KeyError as exc:
            raise UnknownSourceToken(str(exc))

    def program_to_ids(self, token_texts) -> np.ndarray:
        return np.array([self.tgt_ids[t] for t in token_texts], dtype=np.intp)

    # -- forward passes --------------------------------------------------

    def encode_batch(self, src_ids: np.ndarray, src_mask: np.ndarray):
        """src_ids (B,S) padded with 0; returns (states (B,S,H), h, c)."""
        B, S = src_ids.shape
        H = self.config.hidden_dim
        h = nn.Tensor(np.zeros((B, H)))
        c = nn.Tensor(np.zeros((B, H)))
        per_step = []
        for t in range(S):
            x = nn.rows(self.params["src_embed"], src_ids[:, t])
            h2, c2 = nn.lstm_step(x, h, c, self.params["enc_W"],
                                  self.params["enc_b"], H)
            m = nn.Tensor(src_mask[:, t:t + 1])
            keep = nn.Tensor(1.0 - src_mask[:, t:t + 1])
            h = h2 * m + h * keep
            c = c2 * m + c * keep
            per_step.append(h)
        return nn.stack(per_step, axis=1), h, c

    def attend_batch(self, h_t, enc_states, src_mask):
        """Bilinear scores, masked softmax, context vector."""
        B, S, H = enc_states.shape
        query = h_t @ self.params["attn_W"]              # (B, H)
        scores = nn.sum_axis(nn.reshape(query, (B, 1, H)) * enc_states, 2)
        bias = nn.Tensor((src_mask - 1.0) * 1e9)         # -1e9 at padding
        alignment = nn.softmax(scores + bias, axis=1)
        context = nn.sum_axis(nn.reshape(alignment, (B, S, 1)) * enc_states, 1)
        return alignment, context

    def head(self, context, h_t):
        z = nn.concat([context, h_t], axis=1) @ self.params["head_W1"] \
            + self.params["head_b1"]
        return nn.relu(z) @ self.params["head_W2"] + self.params["head_b2"]

    def decode_step_batch(self, prev_ids, h, c, enc_states, src_mask):
        x = nn.rows(self.params["tgt_embed"], prev_ids)
        h2, c2 = nn.lstm_step(x, h, c, self.params["dec_W"],
                              self.params["dec_b"], self.config.hidden_dim)
        alignment, context = self.attend_batch(h2, enc_states, src_mask)
        logits = self.head(context, h2)
        return logits, alignment, h2, c2

    def batch_loss(self, src_ids, src_mask, dec_in, targets, tgt_mask):
        """Teacher-forced mean cross-entropy per unmasked target token."""
        enc_states, h, c = self.encode_batch(src_ids, src_mask)
        total = None
        for t in range(dec_in.shape[1]):
            logits, _, h, c = self.decode_step_batch(
                dec_in[:, t], h, c, enc_states, src_mask)
            ce = nn.cross_entropy_sum(logits, targets[:, t], tgt_mask[:, t])
            total = ce if total is None else total + ce
        count = tgt_mask.sum()
        return total * nn.Tensor(1.0 / count), count

    # -- greedy decoding -------------------------------------------------

    def translate_ids(self, word_ids: np.ndarray) -> Translation:
        src = word_ids.reshape(1, -1)
        mask = np.ones_like(src, dtype=np.float64)
        enc_states, h, c = self.encode_batch(src, mask)
        prev = np.array([self.eos_id], dtype=np.intp)
        tokens, rows = [], []
        truncated = True
        for _ in range(self.config.max_decode_len):
            logits, alignment, h, c = self.decode_step_batch(
                prev, h, c, enc_states, mask)
            rows.append(alignment.data[0].copy())
            nxt = int(np.argmax(logits.data[0]))
            if nxt == self.eos_id:
                truncated = False
                break
            tokens.append(self.tgt_vocab[nxt])
            prev = np.array([nxt], dtype=np.intp)
        attention = np.vstack(rows) if rows else np.zeros((0, src.shape[1]))
        return Translation(tokens=tokens, attention=attention,
                           source_words=[self.src_vocab[i] for i in word_ids],
                           truncated=truncated)


# --- spec-level operation surface ----------------------------------------


def encode(model: Translator, words) -> list:
    """One encoder state per source token (each a vector of hidden_dim)."""
    if not words:
        raise ValueError("encode needs a nonempty token list")
    ids = model.words_to_ids(words)
    states, _, _ = model.encode_batch(ids.reshape(1, -1),
                                      np.ones((1, len(words))))
    return [states.data[0, t].copy() for t in range(len(words))]


def attend(model: Translator, h_t: np.ndarray, enc_states) -> tuple:
    """Alignment and context for one decoder state (numpy in, numpy out)."""
    states = np.asarray(enc_states, dtype=np.float64)
    a, ctx = model.attend_batch(
        nn.Tensor(h_t.reshape(1, -1)),
        nn.Tensor(states.reshape((1,) + states.shape)),
        np.ones((1, states.shape[0])),
    )
    return a.data[0].copy(), ctx.data[0].copy()


def decode_step(model: Translator, prev_token: str, state, enc_states) -> DecoderStep:
    """Single decode step from a (h, c) state over raw encoder states."""
    h, c = state
    states = np.asarray(enc_states, dtype=np.float64)
    B_states = nn.Tensor(states.reshape((1,) + states.shape))
    prev = np.array([model.tgt_ids[prev_token]], dtype=np.intp)
    mask = np.ones((1, states.shape[0]))
    x = nn.rows(model.params["tgt_embed"], prev)
    h2, c2 = nn.lstm_step(x, nn.Tensor(h.reshape(1, -1)),
                          nn.Tensor(c.reshape(1, -1)),
                          model.params["dec_W"], model.params["dec_b"],
                          model.config.hidden_dim)
    query = h2 @ model.params["attn_W"]
    scores = nn.sum_axis(nn.reshape(query, (1, 1, -1)) * B_states, 2)
    alignment = nn.softmax(scores, axis=1)
    context = nn.sum_axis(
        nn.reshape(alignment, (1, states.shape[0], 1)) * B_states, 1)
    logits = model.head(context, h2)
    return DecoderStep(
        hidden=h2.data[0].copy(),
        scores=scores.data[0].copy(),
        alignment=alignment.data[0].copy(),
        context=context.data[0].copy(),
        logits=logits.data[0].copy(),
        token=model.tgt_vocab[int(np.argmax(logits.data[0]))],
    )


def translate(model: Translator, instruction: str) -> Translation:
    """Instruction text to program tokens plus the attention matrix."""
    words = english_tokenize(instruction)
    return model.translate_ids(model.words_to_ids(words))


def attention_csv(result: Translation) -> str:
    buf = io.StringIO()
    buf.write(",".join(["token"] + result.source_words) + "\n")
    emitted = result.tokens + ([] if result.truncated else [EOS_TEXT])
    for tok, row in zip(emitted, result.attention):
        buf.write(",".join([tok] + [f"{v:.6f}" for v in row]) + "\n")
    return buf.getvalue()


# --- training -------------------------------------------------------------


def _prepare(model: Translator, samples):
    pairs = []
    for s in samples:
        words = english_tokenize(s.instruction)
        tgt = [t.text for t in s.tokens()]  # includes trailing EOS
        pairs.append((model.words_to_ids(words), model.program_to_ids(tgt)))
    return pairs


def _make_batch(model, pairs, idx):
    chosen = [pairs[i] for i in idx]
    S = max(len(p[0]) for p in chosen)
    T = max(len(p[1]) for p in chosen)
    B = len(chosen)
    src = np.zeros((B, S), dtype=np.intp)
    src_mask = np.zeros((B, S))
    dec_in = np.full((B, T), model.eos_id, dtype=np.intp)
    targets = np.zeros((B, T), dtype=np.intp)
    tgt_mask = np.zeros((B, T))
    for b, (ws, ts) in enumerate(chosen):
        src[b, :len(ws)] = ws
        src_mask[b, :len(ws)] = 1.0
        dec_in[b, 1:len(ts)] = ts[:-1]
        targets[b, :len(ts)] = ts
        tgt_mask[b, :len(ts)] = 1.0
    return src, src_mask, dec_in, targets, tgt_mask


def train(config: ModelConfig, samples, epochs: int = 10, batch_size: int = 16,
          lr: float = 1e-3, log=None) -> tuple:
    """Train a fresh model; returns (model, per-epoch mean loss curve)."""
    model = Translator(config)
    pairs = _prepare(model, samples)
    if not pairs:
        raise ValueError("empty training set")
    opt = nn.Adam(model.params.values(), lr=lr)
    rng = np.random.default_rng(config.seed + 1)
    curve = []
    for epoch in range(epochs):
        order = rng.permutation(len(pairs))
        # bucket shuffled samples by target length so batches pad tightly
        order = sorted(order, key=lambda i: len(pairs[i][1]) // 16)
        starts = [s for s in range(0, len(order), batch_size)]
        starts = [starts[i] for i in rng.permutation(len(starts))]
        total, tokens = 0.0, 0.0
        for start in starts:
            idx = order[start:start + batch_size]
            batch = _make_batch(model, pairs, idx)
            opt.zero_grad()
            loss, count = model.batch_loss(*batch)
            if not np.isfinite(loss.data):
                raise NonFiniteLoss(
                    f"epoch {epoch}, batch at {start}: loss={loss.data!r}")
            loss.backward()
            try:
                opt.step()
            except FloatingPointError as exc:
                raise NonFiniteLoss(f"epoch {epoch}: {exc}")
            total += float(loss.data) * count
            tokens += count
        curve.append(total / tokens)
        if log:
            log(f"epoch {epoch + 1}/{epochs}: loss {curve[-1]:.4f}")
    return model, curve


def token_accuracy(model: Translator, samples) -> float:
    """Teacher-forced next-token accuracy over the samples."""
    pairs = _prepare(model, samples)
    correct, total = 0, 0
    for ws, ts in pairs:
        batch = _make_batch(model, [(ws, ts)], [0])
        src, src_mask, dec_in, targets, tgt_mask = batch
        enc_states, h, c = model.encode_batch(src, src_mask)
        for t in range(dec_in.shape[1]):
            logits, _, h, c = model.decode_step_batch(
                dec_in[:, t], h, c, enc_states, src_mask)
            if tgt_mask[0, t]:
                total += 1
                correct += int(np.argmax(logits.data[0]) == targets[0, t])
    return correct / max(total, 1)


def initial_loss(model: Translator, samples) -> float:
    pairs = _prepare(model, samples)
    batch = _make_batch(model, pairs, list(range(len(pairs))))
    loss, _ = model.batch_loss(*batch)
    return float(loss.data)


# --- gradient check --------------------------------------------------------


def grad_check(config: ModelConfig | None = None, fd_step: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    Relative error per tensor is max|g_a - g_fd| / (max|g_a| + max|g_fd|);
    the return value is the worst tensor's error. Uses a tiny double
    -precision model and a couple of synthetic sequences.
    """
    if config is None:
        config = ModelConfig(embed_dim=4, hidden_dim=6, head_dim=5, seed=3)
    rng = np.random.default_rng(7)
    src_vocab = ["<pad>"] + [f"w{i}" for i in range(7)]
    tgt_vocab = [f"y{i}" for i in range(7)] + [EOS_TEXT]
    model = Translator(config, src_vocab=src_vocab, tgt_vocab=tgt_vocab,
                       rng=rng)
    # Check at a generic point: zero biases put relu inputs at the kink,
    # where central differences are meaningless.
    for p in model.params.values():
        p.data = rng.uniform(-0.5, 0.5, size=p.data.shape)

    src = rng.integers(1, 8, size=(2, 5)).astype(np.intp)
    src_mask = np.array([[1, 1, 1, 1, 1], [1, 1, 1, 0, 0]], dtype=np.float64)
    targets = rng.integers(0, 7, size=(2, 6)).astype(np.intp)
    targets[0, -1] = model.eos_id
    dec_in = np.full((2, 6), model.eos_id, dtype=np.intp)
    dec_in[:, 1:] = targets[:, :-1]
    tgt_mask = np.array([[1, 1, 1, 1, 1, 1], [1, 1, 1, 1, 0, 0]],
                        dtype=np.float64)

    def loss_value():
        loss, _ = model.batch_loss(src, src_mask, dec_in, targets, tgt_mask)
        return float(loss.data)

    for p in model.params.values():
        p.grad = None
    loss, _ = model.batch_loss(src, src_mask, dec_in, targets, tgt_mask)
    loss.backward()

    worst = 0.0
    for name, p in model.params.items():
        analytic = p.grad.copy() if p.grad is not None else np.zeros_like(p.data)
        numeric = np.zeros_like(p.data)
        it = np.nditer(p.data, flags=["multi_index"])
        while not it.finished:
            ix = it.multi_index
            orig = p.data[ix]
            p.data[ix] = orig + fd_step
            hi = loss_value()
            p.data[ix] = orig - fd_step
            lo = loss_value()
            p.data[ix] = orig
            numeric[ix] = (hi - lo) / (2 * fd_step)
            it.iternext()
        scale = np.abs(analytic).max() + np.abs(numeric).max()
        err = np.abs(analytic - numeric).max() / max(scale, 1e-12)
        worst = max(worst, err)
    return worst


# --- checkpoints ------------------------------------------------------------


def save_checkpoint(path, kind: str, config_dict: dict, arrays: dict,
                    extra: dict | None = None) -> None:
    meta = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "kind": kind,
        "config": config_dict,
    }
    meta.update(extra or {})
    np.savez_compressed(path, __meta__=np.frombuffer(
        json.dumps(meta).encode("utf-8"), dtype=np.uint8), **arrays)


def load_checkpoint(path) -> tuple:
    with np.load(path) as zf:
        meta = json.loads(bytes(zf["__meta__"]).decode("utf-8"))
        if meta.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"{path} is not a roboscript checkpoint")
        if meta.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta.get('version')}")
        arrays = {k: zf[k] for k in zf.files if k != "__meta__"}
    return meta, arrays


def save_translator(model: Translator, path, task: str) -> None:
    cfg = model.config
    save_checkpoint(
        path, "translator",
        {"embed_dim": cfg.embed_dim, "hidden_dim": cfg.hidden_dim,
         "head_dim": cfg.head_dim, "max_decode_len": cfg.max_decode_len,
         "seed": cfg.seed},
        {k: p.data for k, p in model.params.items()},
        {"task": task, "src_vocab": model.src_vocab,
         "tgt_vocab": model.tgt_vocab},
    )


def load_translator(path) -> tuple:
    meta, arrays = load_checkpoint(path)
    if meta["kind"] != "translator":
        raise ValueError(f"{path} holds a {meta['kind']!r}, not a translator")
    model = Translator(ModelConfig(**meta["config"]),
                       src_vocab=meta["src_vocab"],
                       tgt_vocab=meta["tgt_vocab"])
    for k, p in model.params.items():
        p.data = arrays[k]
    return model, meta["task"]
