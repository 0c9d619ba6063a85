"""Direct-regression baselines that bypass program generation.

Arrange: encoder LSTM compresses the instruction to its final state, which
is concatenated with all object sizes and pushed through fully connected
layers to predict every object's position directly.

Manipulation: encoder-decoder LSTM; at each timestep the decoder state and
attention context are concatenated with all object positions and sizes to
regress the end-effector pose plus grip and stop flags, teacher-forced on
the ground-truth prefix.

Both consume exactly the supervision derived from executing the ground
-truth programs, and both emit the same Placement/Trajectory types the
evaluator compares.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .corpus import ENGLISH_WORDS, english_tokenize
from .interp import Grip, Move
from .nmt import NonFiniteLoss, save_checkpoint, load_checkpoint
from .scene import CLASS_NAMES

N_CLASSES = len(CLASS_NAMES)
ARRANGE_FEATS = 3   # present, w, h
MANIP_FEATS = 6     # present, x, y, w, h, d
POSE_DIMS = 5       # x, y, z, r, grip state
MAX_ROLLOUT_STEPS = 64


@dataclass(frozen=True)
class BaselineConfig:
    embed_dim: int = 64
    hidden_dim: int = 128
    head_dim: int = 128
    seed: int = 0


def arrange_features(scene) -> np.ndarray:
    v = np.zeros(N_CLASSES * ARRANGE_FEATS)
    for i, cls in enumerate(CLASS_NAMES):
        obj = scene.lookup(cls)
        if obj is not None:
            v[i * ARRANGE_FEATS: (i + 1) * ARRANGE_FEATS] = (1.0, obj.w, obj.h)
    return v


def manip_features(scene) -> np.ndarray:
    v = np.zeros(N_CLASSES * MANIP_FEATS)
    for i, cls in enumerate(CLASS_NAMES):
        obj = scene.lookup(cls)
        if obj is not None:
            v[i * MANIP_FEATS: (i + 1) * MANIP_FEATS] = \
                (1.0, obj.x, obj.y, obj.w, obj.h, obj.d)
    return v


def trajectory_to_rows(trajectory) -> np.ndarray:
    """(T, 5) rows of pose + grip state in effect; grip toggles fold into
    the following move's row, which reconstructs exactly for programs that
    do not end on a grip event."""
    rows = []
    grip = 0.0
    for ev in trajectory:
        if isinstance(ev, Grip):
            grip = 1.0 if ev.engaged else 0.0
        else:
            rows.append((ev.x, ev.y, ev.z, ev.r, grip))
    return np.array(rows, dtype=np.float64)


def rows_to_trajectory(rows) -> tuple:
    events = []
    grip = 0.0
    for row in rows:
        if row[4] != grip:
            events.append(Grip(bool(row[4])))
            grip = row[4]
        events.append(Move(float(row[0]), float(row[1]),
                           float(row[2]), float(row[3])))
    return tuple(events)


class _EncoderMixin:
    def _init_encoder(self, rng, config):
        E, H = config.embed_dim, config.hidden_dim
        enc_W, enc_b = nn.lstm_init(rng, E, H)
        return {
            "src_embed": nn.param(nn.init_uniform(rng, (len(self.src_vocab), E))),
            "enc_W": nn.param(enc_W),
            "enc_b": nn.param(enc_b),
        }

    def word_ids(self, instruction: str) -> np.ndarray:
        words = english_tokenize(instruction)
        return np.array([self.src_ids[w] for w in words], dtype=np.intp)

    def encode_batch(self, src_ids, src_mask):
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


class ArrangeBaseline(_EncoderMixin):
    def __init__(self, config: BaselineConfig, src_vocab=None, rng=None):
        self.config = config
        self.src_vocab = list(src_vocab) if src_vocab is not None \
            else ["<pad>"] + list(ENGLISH_WORDS)
        self.src_ids = {w: i for i, w in enumerate(self.src_vocab)}
        if rng is None:
            rng = np.random.default_rng(config.seed)
        H, D = config.hidden_dim, config.head_dim
        feats = N_CLASSES * ARRANGE_FEATS
        self.params = self._init_encoder(rng, config)
        self.params.update({
            "fc1_W": nn.param(nn.init_uniform(rng, (H + feats, D))),
            "fc1_b": nn.param(np.zeros(D)),
            "fc2_W": nn.param(nn.init_uniform(rng, (D, D))),
            "fc2_b": nn.param(np.zeros(D)),
            "out_W": nn.param(nn.init_uniform(rng, (D, N_CLASSES * 2))),
            "out_b": nn.param(np.zeros(N_CLASSES * 2)),
        })

    def forward(self, src_ids, src_mask, feats):
        _, h, _ = self.encode_batch(src_ids, src_mask)
        z = nn.concat([h, nn.Tensor(feats)], axis=1)
        z = nn.relu(z @ self.params["fc1_W"] + self.params["fc1_b"])
        z = nn.relu(z @ self.params["fc2_W"] + self.params["fc2_b"])
        return z @ self.params["out_W"] + self.params["out_b"]  # (B, 2*C)

    def predict(self, instruction: str, scene) -> dict:
        ids = self.word_ids(instruction)
        out = self.forward(ids.reshape(1, -1), np.ones((1, len(ids))),
                           arrange_features(scene).reshape(1, -1))
        coords = out.data[0]
        placement = {}
        for i, cls in enumerate(CLASS_NAMES):
            if scene.lookup(cls) is not None:
                placement[cls] = (float(coords[2 * i]), float(coords[2 * i + 1]))
        return placement


class ManipBaseline(_EncoderMixin):
    def __init__(self, config: BaselineConfig, src_vocab=None, rng=None):
        self.config = config
        self.src_vocab = list(src_vocab) if src_vocab is not None \
            else ["<pad>"] + list(ENGLISH_WORDS)
        self.src_ids = {w: i for i, w in enumerate(self.src_vocab)}
        if rng is None:
            rng = np.random.default_rng(config.seed)
        H, D = config.hidden_dim, config.head_dim
        feats = N_CLASSES * MANIP_FEATS
        dec_W, dec_b = nn.lstm_init(rng, POSE_DIMS, H)
        self.params = self._init_encoder(rng, config)
        self.params.update({
            "dec_W": nn.param(dec_W),
            "dec_b": nn.param(dec_b),
            "attn_W": nn.param(nn.init_uniform(rng, (H, H))),
            "fc1_W": nn.param(nn.init_uniform(rng, (2 * H + feats, D))),
            "fc1_b": nn.param(np.zeros(D)),
            "out_W": nn.param(nn.init_uniform(rng, (D, POSE_DIMS + 1))),
            "out_b": nn.param(np.zeros(POSE_DIMS + 1)),
        })

    def _attend(self, h_t, enc_states, src_mask):
        B, S, H = enc_states.shape
        query = h_t @ self.params["attn_W"]
        scores = nn.sum_axis(nn.reshape(query, (B, 1, H)) * enc_states, 2)
        alignment = nn.softmax(scores + nn.Tensor((src_mask - 1.0) * 1e9), axis=1)
        return nn.sum_axis(nn.reshape(alignment, (B, S, 1)) * enc_states, 1)

    def _step(self, prev_rows, h, c, enc_states, src_mask, feats):
        h2, c2 = nn.lstm_step(nn.Tensor(prev_rows), h, c,
                              self.params["dec_W"], self.params["dec_b"],
                              self.config.hidden_dim)
        context = self._attend(h2, enc_states, src_mask)
        z = nn.concat([h2, context, nn.Tensor(feats)], axis=1)
        z = nn.relu(z @ self.params["fc1_W"] + self.params["fc1_b"])
        out = z @ self.params["out_W"] + self.params["out_b"]
        return out, h2, c2  # out: pose(4), grip logit, stop logit

    def rollout(self, instruction: str, scene) -> tuple:
        ids = self.word_ids(instruction)
        src = ids.reshape(1, -1)
        mask = np.ones((1, len(ids)))
        feats = manip_features(scene).reshape(1, -1)
        enc_states, h, c = self.encode_batch(src, mask)
        prev = np.zeros((1, POSE_DIMS))
        rows = []
        for _ in range(MAX_ROLLOUT_STEPS):
            out, h, c = self._step(prev, h, c, enc_states, mask, feats)
            pose = out.data[0, :4]
            grip = 1.0 if out.data[0, 4] > 0.0 else 0.0  # sigmoid(x)>.5
            rows.append((*pose, grip))
            prev = np.array(rows[-1]).reshape(1, -1)
            if out.data[0, 5] > 0.0:
                break
        return rows_to_trajectory(np.array(rows))

    predict = rollout


def _instruction_batch(model, direct_samples, idx):
    chosen = [direct_samples[i] for i in idx]
    id_lists = [model.word_ids(d.instruction) for d in chosen]
    S = max(len(w) for w in id_lists)
    src = np.zeros((len(chosen), S), dtype=np.intp)
    mask = np.zeros((len(chosen), S))
    for b, w in enumerate(id_lists):
        src[b, :len(w)] = w
        mask[b, :len(w)] = 1.0
    return chosen, src, mask


def train_arrange_baseline(config: BaselineConfig, direct_samples,
                           epochs: int = 10, batch_size: int = 16,
                           lr: float = 1e-3, log=None):
    """MSE on present-object coordinates, Adam, teacher-free single shot."""
    model = ArrangeBaseline(config)
    opt = nn.Adam(model.params.values(), lr=lr)
    rng = np.random.default_rng(config.seed + 1)
    curve = []
    for epoch in range(epochs):
        order = rng.permutation(len(direct_samples))
        total, n = 0.0, 0
        for start in range(0, len(order), batch_size):
            idx = order[start:start + batch_size]
            chosen, src, mask = _instruction_batch(model, direct_samples, idx)
            feats = np.stack([arrange_features(d.scene) for d in chosen])
            target = np.zeros((len(chosen), N_CLASSES * 2))
            tmask = np.zeros((len(chosen), N_CLASSES * 2))
            for b, d in enumerate(chosen):
                for i, cls in enumerate(CLASS_NAMES):
                    if cls in d.target_placement:
                        x, y = d.target_placement[cls]
                        target[b, 2 * i:2 * i + 2] = (x, y)
                        tmask[b, 2 * i:2 * i + 2] = 1.0
            opt.zero_grad()
            out = model.forward(src, mask, feats)
            loss = nn.mse_sum(out, target, tmask) * nn.Tensor(1.0 / max(tmask.sum(), 1))
            if not np.isfinite(loss.data):
                raise NonFiniteLoss(f"arrange baseline epoch {epoch}")
            loss.backward()
            opt.step()
            total += float(loss.data) * tmask.sum()
            n += tmask.sum()
        curve.append(total / n)
        if log:
            log(f"arrange-baseline epoch {epoch + 1}/{epochs}: mse {curve[-1]:.5f}")
    return model, curve


def train_manip_baseline(config: BaselineConfig, direct_samples,
                         epochs: int = 10, batch_size: int = 16,
                         lr: float = 1e-3, log=None):
    """Per-timestep pose MSE + grip/stop binary cross-entropy, teacher
    -forced on the ground-truth prefix."""
    model = ManipBaseline(config)
    opt = nn.Adam(model.params.values(), lr=lr)
    rng = np.random.default_rng(config.seed + 1)
    row_cache = [trajectory_to_rows(d.target_trajectory) for d in direct_samples]
    curve = []
    for epoch in range(epochs):
        order = rng.permutation(len(direct_samples))
        total, n = 0.0, 0
        for start in range(0, len(order), batch_size):
            idx = order[start:start + batch_size]
            chosen, src, mask = _instruction_batch(model, direct_samples, idx)
            feats = np.stack([manip_features(d.scene) for d in chosen])
            rows = [row_cache[i] for i in idx]
            T = max(len(r) for r in rows)
            B = len(chosen)
            target = np.zeros((B, T, POSE_DIMS))
            stop = np.zeros((B, T))
            tmask = np.zeros((B, T))
            for b, r in enumerate(rows):
                target[b, :len(r)] = r
                stop[b, len(r) - 1] = 1.0
                tmask[b, :len(r)] = 1.0
            enc_states, h, c = model.encode_batch(src, mask)
            loss_terms = []
            count = tmask.sum()
            prev = np.zeros((B, POSE_DIMS))
            for t in range(T):
                out, h, c = model._step(prev, h, c, enc_states, mask, feats)
                m = tmask[:, t:t + 1]
                loss_terms.append(nn.mse_sum(nn.cols(out, 0, 4),
                                             target[:, t, :4], m))
                loss_terms.append(nn.bce_logits_sum(nn.cols(out, 4, 5),
                                                    target[:, t, 4:5], m))
                loss_terms.append(nn.bce_logits_sum(nn.cols(out, 5, 6),
                                                    stop[:, t:t + 1], m))
                prev = target[:, t]  # teacher forcing
            opt.zero_grad()
            loss = loss_terms[0]
            for term in loss_terms[1:]:
                loss = loss + term
            loss = loss * nn.Tensor(1.0 / count)
            if not np.isfinite(loss.data):
                raise NonFiniteLoss(f"manip baseline epoch {epoch}")
            loss.backward()
            opt.step()
            total += float(loss.data) * count
            n += count
        curve.append(total / n)
        if log:
            log(f"manip-baseline epoch {epoch + 1}/{epochs}: loss {curve[-1]:.5f}")
    return model, curve


def predict_arrange(model: ArrangeBaseline, instruction: str, scene) -> dict:
    return model.predict(instruction, scene)


def predict_manip(model: ManipBaseline, instruction: str, scene) -> tuple:
    return model.predict(instruction, scene)


# --- checkpoints -----------------------------------------------------------


def _config_dict(config: BaselineConfig) -> dict:
    return {"embed_dim": config.embed_dim, "hidden_dim": config.hidden_dim,
            "head_dim": config.head_dim, "seed": config.seed}


def save_baseline(model, path) -> None:
    kind = "arrange_baseline" if isinstance(model, ArrangeBaseline) \
        else "manip_baseline"
    save_checkpoint(path, kind, _config_dict(model.config),
                    {k: p.data for k, p in model.params.items()},
                    {"src_vocab": model.src_vocab})


def load_baseline(path):
    meta, arrays = load_checkpoint(path)
    cls = {"arrange_baseline": ArrangeBaseline,
           "manip_baseline": ManipBaseline}.get(meta["kind"])
    if cls is None:
        raise ValueError(f"{path} holds a {meta['kind']!r}, not a baseline")
    model = cls(BaselineConfig(**meta["config"]), src_vocab=meta["src_vocab"])
    for k, p in model.params.items():
        p.data = arrays[k]
    return model, meta["kind"]
