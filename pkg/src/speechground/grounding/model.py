"""Audio-guided grounding model: heads, attention, loss, checkpoints.

The model has three branches fed by stub features: an audio classifier
(softmax over classes), a mention detector (independent sigmoid per
class), and a grounding branch that runs audio-guided self-attention
over the target-class candidates plus audio-guided cross-attention
from candidates to relational objects, sums the three per-candidate
streams, and scores each candidate with a shared MLP before a softmax
across candidates.

All gradients are hand-written; `loss_and_grads` is validated against
central finite differences in the test suite.
"""

import struct
from dataclasses import dataclass, field

import numpy as np

from ..errors import DataError, NumericError, UsageError
from .features import object_representation, representation_dim
from .scene import SyntheticScene

CHECKPOINT_MAGIC = b"A3VG"
CHECKPOINT_VERSION = 1


class GroundingFailure(NumericError):
    """Inference cannot proceed (for example: no candidate objects)."""


@dataclass(frozen=True)
class GroundingConfig:
    """Desk-scale architecture and loss weights."""

    num_classes: int
    d_obj: int = 32
    d_label: int = 8
    d_audio: int = 32
    attn_heads: int = 2
    attn_dim: int = 16
    attn_layers: int = 1
    cls_hidden: tuple[int, ...] = (32,)
    omd_hidden: tuple[int, ...] = (32,)
    head_hidden: tuple[int, ...] = (64, 32)
    lambdas: tuple[float, float, float] = (1.0, 1.0, 1.0)
    omd_threshold: float = 0.5
    embed_seed: int = 7

    def __post_init__(self):
        if self.num_classes < 2:
            raise UsageError("need at least two classes")
        if min(self.attn_heads, self.attn_dim, self.attn_layers) < 1:
            raise UsageError("attention geometry must be positive")
        if len(self.lambdas) != 3 or min(self.lambdas) < 0:
            raise UsageError("lambdas must be three non-negative weights")

    @property
    def d_rep(self) -> int:
        return representation_dim(self.d_obj, self.d_label)


@dataclass
class AttentionParams:
    """One audio-guided multi-head attention layer, head-stacked arrays."""

    wq: np.ndarray   # (heads, head_dim, d)
    wk: np.ndarray
    wv: np.ndarray
    wqa: np.ndarray  # (heads, head_dim, d_audio)
    wka: np.ndarray
    wva: np.ndarray
    wo: np.ndarray   # (d, heads * head_dim)

    def __post_init__(self):
        h, dh, d = self.wq.shape
        for name in ("wk", "wv"):
            if getattr(self, name).shape != (h, dh, d):
                raise UsageError(f"{name} shape mismatch")
        da = self.wqa.shape[2]
        for name in ("wqa", "wka", "wva"):
            if getattr(self, name).shape != (h, dh, da):
                raise UsageError(f"{name} shape mismatch")
        if self.wo.shape != (d, h * dh):
            raise UsageError("wo shape mismatch")


@dataclass
class GroundingModel:
    """Configuration plus a flat name -> array parameter store."""

    config: GroundingConfig
    params: dict[str, np.ndarray]


@dataclass
class GroundingResult:
    """Inference outcome for one scene."""

    winner_index: int                 # index into scene.objects
    probs: np.ndarray                 # distribution over candidates
    candidate_indices: tuple[int, ...]
    relational_empty: bool
    predicted_class: int
    predicted_mentions: tuple[int, ...]


@dataclass
class PreparedScene:
    """Ground-truth-grouped tensors for one training scene."""

    audio: np.ndarray
    target_class: int
    mention_hot: np.ndarray
    cand_reprs: np.ndarray   # (N, d_rep)
    rel_reprs: np.ndarray    # (M, d_rep)
    target_pos: int


def _mlp_sizes(d_in: int, hidden: tuple[int, ...], d_out: int):
    dims = [d_in, *hidden, d_out]
    return list(zip(dims[:-1], dims[1:]))


def _init_mlp(params, name, d_in, hidden, d_out, rng):
    for i, (fan_in, fan_out) in enumerate(_mlp_sizes(d_in, hidden, d_out)):
        params[f"{name}.w{i}"] = rng.standard_normal((fan_out, fan_in)) / np.sqrt(fan_in)
        params[f"{name}.b{i}"] = np.zeros(fan_out)


def _init_attention(params, name, cfg: GroundingConfig, rng):
    h, dh, d, da = cfg.attn_heads, cfg.attn_dim, cfg.d_rep, cfg.d_audio
    for layer in range(cfg.attn_layers):
        pre = f"{name}{layer}"
        for key, cols in (("wq", d), ("wk", d), ("wv", d),
                          ("wqa", da), ("wka", da), ("wva", da)):
            params[f"{pre}.{key}"] = rng.standard_normal((h, dh, cols)) / np.sqrt(cols)
        params[f"{pre}.wo"] = rng.standard_normal((d, h * dh)) / np.sqrt(h * dh)


def init_grounding_model(config: GroundingConfig, seed: int = 0) -> GroundingModel:
    """Seeded Gaussian initialization, biases at zero."""
    rng = np.random.default_rng(seed)
    params: dict[str, np.ndarray] = {}
    _init_mlp(params, "cls", config.d_audio, config.cls_hidden, config.num_classes, rng)
    _init_mlp(params, "omd", config.d_audio, config.omd_hidden, config.num_classes, rng)
    _init_mlp(params, "head", config.d_rep, config.head_hidden, 1, rng)
    _init_attention(params, "self", config, rng)
    _init_attention(params, "cross", config, rng)
    return GroundingModel(config, params)


def _num_layers(hidden: tuple[int, ...]) -> int:
    return len(hidden) + 1


def _mlp_forward(params, name, x, n_layers):
    cache = []
    h = x
    for i in range(n_layers):
        z = h @ params[f"{name}.w{i}"].T + params[f"{name}.b{i}"]
        cache.append((h, z))
        h = np.tanh(z) if i < n_layers - 1 else z
    return h, cache


def _mlp_backward(params, name, dout, cache, grads):
    dz = dout
    for i in range(len(cache) - 1, -1, -1):
        h_in, z = cache[i]
        if i < len(cache) - 1:
            dz = dz * (1.0 - np.tanh(z) ** 2)
        grads[f"{name}.w{i}"] = grads.get(f"{name}.w{i}", 0.0) + dz.T @ h_in
        grads[f"{name}.b{i}"] = grads.get(f"{name}.b{i}", 0.0) + dz.sum(axis=0)
        dz = dz @ params[f"{name}.w{i}"]
    return dz


def _attn_forward(wq, wk, wv, wqa, wka, wva, wo, oq, okv, audio):
    if okv.shape[0] == 0:
        return np.zeros((oq.shape[0], wo.shape[0])), None
    dh = wq.shape[1]
    q = np.einsum("hij,nj->nhi", wq, oq) + np.einsum("hij,j->hi", wqa, audio)
    k = np.einsum("hij,mj->mhi", wk, okv) + np.einsum("hij,j->hi", wka, audio)
    v = np.einsum("hij,mj->mhi", wv, okv) + np.einsum("hij,j->hi", wva, audio)
    scores = np.einsum("nhi,mhi->hnm", q, k) / np.sqrt(dh)
    scores = scores - scores.max(axis=2, keepdims=True)
    att = np.exp(scores)
    att /= att.sum(axis=2, keepdims=True)
    ctx = np.einsum("hnm,mhi->nhi", att, v)
    flat = ctx.reshape(oq.shape[0], -1)
    out = flat @ wo.T
    return out, (oq, okv, audio, q, k, v, att, flat)


def _attn_backward(wq, wk, wv, wqa, wka, wva, wo, dout, cache, grads, prefix):
    if cache is None:
        return (np.zeros((dout.shape[0], wq.shape[2])),
                np.zeros((0, wq.shape[2])))
    oq, okv, audio, q, k, v, att, flat = cache
    heads, dh = wq.shape[0], wq.shape[1]

    def bump(key, val):
        grads[key] = grads.get(key, 0.0) + val

    bump(f"{prefix}.wo", dout.T @ flat)
    dctx = (dout @ wo).reshape(oq.shape[0], heads, dh)
    datt = np.einsum("nhi,mhi->hnm", dctx, v)
    dv = np.einsum("hnm,nhi->mhi", att, dctx)
    tmp = datt * att
    dscores = (tmp - att * tmp.sum(axis=2, keepdims=True)) / np.sqrt(dh)
    dq = np.einsum("hnm,mhi->nhi", dscores, k)
    dk = np.einsum("hnm,nhi->mhi", dscores, q)
    bump(f"{prefix}.wq", np.einsum("nhi,nj->hij", dq, oq))
    bump(f"{prefix}.wqa", np.einsum("hi,j->hij", dq.sum(axis=0), audio))
    bump(f"{prefix}.wk", np.einsum("mhi,mj->hij", dk, okv))
    bump(f"{prefix}.wka", np.einsum("hi,j->hij", dk.sum(axis=0), audio))
    bump(f"{prefix}.wv", np.einsum("mhi,mj->hij", dv, okv))
    bump(f"{prefix}.wva", np.einsum("hi,j->hij", dv.sum(axis=0), audio))
    doq = np.einsum("hij,nhi->nj", wq, dq)
    dokv = np.einsum("hij,mhi->mj", wk, dk) + np.einsum("hij,mhi->mj", wv, dv)
    return doq, dokv


def _layer_arrays(params, prefix):
    return tuple(params[f"{prefix}.{key}"]
                 for key in ("wq", "wk", "wv", "wqa", "wka", "wva", "wo"))


def _stack_forward(params, name, layers, x, kv_fixed, audio, self_mode):
    caches = []
    for layer in range(layers):
        arrays = _layer_arrays(params, f"{name}{layer}")
        kv = x if self_mode else kv_fixed
        x, cache = _attn_forward(*arrays, x, kv, audio)
        caches.append((arrays, cache))
    return x, caches


def _stack_backward(params, name, layers, dout, caches, grads, self_mode):
    dx = dout
    for layer in range(layers - 1, -1, -1):
        arrays, cache = caches[layer]
        doq, dokv = _attn_backward(*arrays, dx, cache, grads, f"{name}{layer}")
        dx = doq + dokv if self_mode else doq
    return dx


def audio_guided_attention(objects_q, objects_kv, audio, params: AttentionParams
                           ) -> np.ndarray:
    """One layer of audio-guided multi-head attention.

    Queries, keys and values each mix an object term with a shared
    audio term; per-head contexts are concatenated and projected back
    to the object feature size.  An empty key/value set yields all-zero
    outputs (the flagged no-relational-objects condition).
    """
    oq = np.atleast_2d(np.asarray(objects_q, dtype=np.float64))
    okv = np.asarray(objects_kv, dtype=np.float64)
    if okv.size == 0:
        okv = okv.reshape(0, oq.shape[1])
    okv = np.atleast_2d(okv)
    audio = np.asarray(audio, dtype=np.float64)
    d = params.wq.shape[2]
    if oq.shape[1] != d or (okv.shape[0] and okv.shape[1] != d):
        raise UsageError(f"object features must have width {d}")
    if audio.shape != (params.wqa.shape[2],):
        raise UsageError(f"audio must have width {params.wqa.shape[2]}")
    out, _ = _attn_forward(params.wq, params.wk, params.wv, params.wqa,
                           params.wka, params.wva, params.wo, oq, okv, audio)
    return out


def attention_params_from(model: GroundingModel, name: str, layer: int = 0
                          ) -> AttentionParams:
    """View one attention layer of a model as AttentionParams."""
    return AttentionParams(*_layer_arrays(model.params, f"{name}{layer}"))


def classify_audio(model: GroundingModel, audio) -> np.ndarray:
    """Class distribution for an audio vector (softmax head)."""
    audio = np.asarray(audio, dtype=np.float64)
    logits, _ = _mlp_forward(model.params, "cls", audio[None, :],
                             _num_layers(model.config.cls_hidden))
    z = logits[0] - logits[0].max()
    p = np.exp(z)
    return p / p.sum()


def detect_mentions(model: GroundingModel, audio) -> tuple[np.ndarray, tuple[int, ...]]:
    """Per-class mention probabilities and the thresholded detections."""
    audio = np.asarray(audio, dtype=np.float64)
    logits, _ = _mlp_forward(model.params, "omd", audio[None, :],
                             _num_layers(model.config.omd_hidden))
    with np.errstate(over="ignore"):
        probs = 1.0 / (1.0 + np.exp(-logits[0]))
    detected = tuple(int(c) for c in np.where(probs >= model.config.omd_threshold)[0])
    return probs, detected


def group_objects(objects, target_class: int, mentioned_classes
                  ) -> tuple[list[int], list[int]]:
    """Split object indices into candidates and relational objects.

    Candidates share the target class; relational objects belong to the
    other mentioned classes.  Order is preserved.  Both lists may be
    empty; the caller decides whether that is an error.
    """
    mentioned = set(mentioned_classes) - {target_class}
    cands = [i for i, o in enumerate(objects) if o.class_id == target_class]
    rels = [i for i, o in enumerate(objects) if o.class_id in mentioned]
    return cands, rels


def prepare_scene(config: GroundingConfig, scene: SyntheticScene) -> PreparedScene:
    """Bake ground-truth-grouped training tensors for one scene."""
    cands, rels = group_objects(scene.objects, scene.target_class,
                                scene.mentioned_classes)
    if scene.target_index not in cands:
        raise DataError("scene target is not among its candidates")
    reprs = {i: object_representation(scene.objects[i], config.embed_seed,
                                      config.d_obj, config.d_label)
             for i in set(cands) | set(rels)}
    mention_hot = np.zeros(config.num_classes)
    for c in scene.mentioned_classes:
        if not 0 <= c < config.num_classes:
            raise DataError(f"mentioned class {c} outside the configured classes")
        mention_hot[c] = 1.0
    if not 0 <= scene.target_class < config.num_classes:
        raise DataError("target class outside the configured classes")
    cand_reprs = np.stack([reprs[i] for i in cands])
    rel_reprs = (np.stack([reprs[i] for i in rels]) if rels
                 else np.zeros((0, config.d_rep)))
    if scene.audio.shape != (config.d_audio,):
        raise DataError(f"audio width {scene.audio.shape} != {config.d_audio}")
    return PreparedScene(scene.audio, scene.target_class, mention_hot,
                         cand_reprs, rel_reprs, cands.index(scene.target_index))


def _ground_streams(model: GroundingModel, cand_reprs, rel_reprs, audio):
    cfg = model.config
    o_self, self_caches = _stack_forward(model.params, "self", cfg.attn_layers,
                                         cand_reprs, None, audio, True)
    o_cross, cross_caches = _stack_forward(model.params, "cross", cfg.attn_layers,
                                           cand_reprs, rel_reprs, audio, False)
    fused = cand_reprs + o_self + o_cross
    logits, head_cache = _mlp_forward(model.params, "head", fused,
                                      _num_layers(cfg.head_hidden))
    return logits[:, 0], (self_caches, cross_caches, head_cache)


def _softmax_nll(logits: np.ndarray, target: int) -> tuple[float, np.ndarray]:
    z = logits - logits.max()
    lse = np.log(np.exp(z).sum())
    dlogits = np.exp(z - lse)
    dlogits[target] -= 1.0
    return float(lse - z[target]), dlogits


def _scene_loss(model: GroundingModel, prep: PreparedScene, grads=None):
    cfg = model.config
    parts = np.zeros(3)

    cls_logits, cls_cache = _mlp_forward(model.params, "cls", prep.audio[None, :],
                                         _num_layers(cfg.cls_hidden))
    ce_audio, dcls = _softmax_nll(cls_logits[0], prep.target_class)
    parts[0] = ce_audio

    omd_logits, omd_cache = _mlp_forward(model.params, "omd", prep.audio[None, :],
                                         _num_layers(cfg.omd_hidden))
    x = omd_logits[0]
    y = prep.mention_hot
    bce = np.maximum(x, 0.0) - x * y + np.log1p(np.exp(-np.abs(x)))
    parts[1] = float(bce.mean())
    # exp may overflow to inf for saturated logits; 1/(1+inf) is the
    # correct sigmoid limit, so only the warning needs suppressing
    with np.errstate(over="ignore"):
        domd = (1.0 / (1.0 + np.exp(-x)) - y) / x.shape[0]

    ground_logits, caches = _ground_streams(model, prep.cand_reprs,
                                            prep.rel_reprs, prep.audio)
    ce_ground, dground = _softmax_nll(ground_logits, prep.target_pos)
    parts[2] = ce_ground

    if grads is not None:
        la, lb, lc = cfg.lambdas
        _mlp_backward(model.params, "cls", la * dcls[None, :], cls_cache, grads)
        _mlp_backward(model.params, "omd", lb * domd[None, :], omd_cache, grads)
        self_caches, cross_caches, head_cache = caches
        dfused = _mlp_backward(model.params, "head",
                               lc * dground[:, None], head_cache, grads)
        _stack_backward(model.params, "self", cfg.attn_layers, dfused,
                        self_caches, grads, True)
        _stack_backward(model.params, "cross", cfg.attn_layers, dfused,
                        cross_caches, grads, False)
    return parts


def loss_and_grads(model: GroundingModel, scenes,
                   prepared: list[PreparedScene] | None = None):
    """Mean joint loss, its three parts, and parameter gradients."""
    if prepared is None:
        prepared = [prepare_scene(model.config, s) for s in scenes]
    if not prepared:
        raise UsageError("loss needs at least one scene")
    grads: dict[str, np.ndarray] = {}
    parts = np.zeros(3)
    for prep in prepared:
        parts += _scene_loss(model, prep, grads)
    parts /= len(prepared)
    for key in list(grads):
        grads[key] = grads[key] / len(prepared)
    for key in model.params:
        if key not in grads:
            grads[key] = np.zeros_like(model.params[key])
    total = float(np.dot(model.config.lambdas, parts))
    return total, parts, grads


def joint_loss(model: GroundingModel, scenes) -> tuple[float, np.ndarray]:
    """Weighted sum of audio CE, mention BCE and grounding CE (batch mean)."""
    total, parts, _ = loss_and_grads(model, scenes)
    return total, parts


def ground(model: GroundingModel, scene: SyntheticScene) -> GroundingResult:
    """Run the full inference path on one scene.

    Grouping uses the predicted audio class and detected mentions, not
    the ground truth.  Raises GroundingFailure when no candidate object
    matches the predicted class.
    """
    cfg = model.config
    if scene.audio.shape != (cfg.d_audio,):
        raise DataError(f"audio width {scene.audio.shape} != {cfg.d_audio}")
    cls_probs = classify_audio(model, scene.audio)
    pred_class = int(np.argmax(cls_probs))
    _, mentions = detect_mentions(model, scene.audio)
    cands, rels = group_objects(scene.objects, pred_class, mentions)
    if not cands:
        raise GroundingFailure(
            f"no object of predicted class {pred_class}; cannot ground")
    reprs = {i: object_representation(scene.objects[i], cfg.embed_seed,
                                      cfg.d_obj, cfg.d_label)
             for i in set(cands) | set(rels)}
    cand_reprs = np.stack([reprs[i] for i in cands])
    rel_reprs = (np.stack([reprs[i] for i in rels]) if rels
                 else np.zeros((0, cfg.d_rep)))
    logits, _ = _ground_streams(model, cand_reprs, rel_reprs, scene.audio)
    z = logits - logits.max()
    probs = np.exp(z)
    probs /= probs.sum()
    winner_pos = int(np.argmax(logits))
    return GroundingResult(cands[winner_pos], probs, tuple(cands),
                           len(rels) == 0, pred_class, mentions)


def _config_tensors(cfg: GroundingConfig) -> dict[str, np.ndarray]:
    return {
        "config.num_classes": np.array(float(cfg.num_classes)),
        "config.d_obj": np.array(float(cfg.d_obj)),
        "config.d_label": np.array(float(cfg.d_label)),
        "config.d_audio": np.array(float(cfg.d_audio)),
        "config.attn_heads": np.array(float(cfg.attn_heads)),
        "config.attn_dim": np.array(float(cfg.attn_dim)),
        "config.attn_layers": np.array(float(cfg.attn_layers)),
        "config.cls_hidden": np.array([float(v) for v in cfg.cls_hidden]),
        "config.omd_hidden": np.array([float(v) for v in cfg.omd_hidden]),
        "config.head_hidden": np.array([float(v) for v in cfg.head_hidden]),
        "config.lambdas": np.array(cfg.lambdas, dtype=np.float64),
        "config.omd_threshold": np.array(float(cfg.omd_threshold)),
        "config.embed_seed": np.array(float(cfg.embed_seed)),
    }


def save_checkpoint(path: str, model: GroundingModel) -> None:
    """Named-tensor container: magic, version, then (name, dims, f64 data)."""
    tensors = dict(_config_tensors(model.config))
    tensors.update(model.params)
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        for name in sorted(tensors):
            arr = np.ascontiguousarray(tensors[name], dtype="<f8")
            raw = name.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<I", arr.ndim))
            for dim in arr.shape:
                fh.write(struct.pack("<I", dim))
            fh.write(arr.tobytes())


def _read_exact(fh, n: int, what: str) -> bytes:
    blob = fh.read(n)
    if len(blob) != n:
        raise DataError(f"checkpoint truncated while reading {what}")
    return blob


def load_checkpoint(path: str) -> GroundingModel:
    """Parse a checkpoint, rebuilding the config and verifying shapes."""
    tensors: dict[str, np.ndarray] = {}
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != CHECKPOINT_MAGIC:
            raise DataError(f"bad magic {magic!r}, expected {CHECKPOINT_MAGIC!r}")
        version = struct.unpack("<I", _read_exact(fh, 4, "version"))[0]
        if version != CHECKPOINT_VERSION:
            raise DataError(f"unsupported checkpoint version {version}")
        while True:
            head = fh.read(4)
            if not head:
                break
            name_len = struct.unpack("<I", head)[0]
            if name_len > 4096:
                raise DataError(f"implausible tensor name length {name_len}")
            name = _read_exact(fh, name_len, "tensor name").decode("utf-8")
            rank = struct.unpack("<I", _read_exact(fh, 4, f"{name} rank"))[0]
            if rank > 8:
                raise DataError(f"implausible rank {rank} for tensor {name}")
            dims = [struct.unpack("<I", _read_exact(fh, 4, f"{name} dim"))[0]
                    for _ in range(rank)]
            count = int(np.prod(dims)) if dims else 1
            data = np.frombuffer(_read_exact(fh, 8 * count, f"{name} data"),
                                 dtype="<f8").reshape(dims)
            tensors[name] = data.copy()

    def scalar(name: str) -> float:
        if name not in tensors:
            raise DataError(f"checkpoint missing {name}")
        arr = tensors[name]
        if arr.size != 1:
            raise DataError(f"checkpoint field {name} is not a scalar")
        return float(arr.reshape(()))

    def int_tuple(name: str) -> tuple[int, ...]:
        if name not in tensors:
            raise DataError(f"checkpoint missing {name}")
        return tuple(int(v) for v in np.atleast_1d(tensors[name]))

    try:
        cfg = GroundingConfig(
            num_classes=int(scalar("config.num_classes")),
            d_obj=int(scalar("config.d_obj")),
            d_label=int(scalar("config.d_label")),
            d_audio=int(scalar("config.d_audio")),
            attn_heads=int(scalar("config.attn_heads")),
            attn_dim=int(scalar("config.attn_dim")),
            attn_layers=int(scalar("config.attn_layers")),
            cls_hidden=int_tuple("config.cls_hidden"),
            omd_hidden=int_tuple("config.omd_hidden"),
            head_hidden=int_tuple("config.head_hidden"),
            lambdas=tuple(float(v) for v in tensors["config.lambdas"]),
            omd_threshold=scalar("config.omd_threshold"),
            embed_seed=int(scalar("config.embed_seed")),
        )
    except (KeyError, ValueError, UsageError) as exc:
        raise DataError(f"bad checkpoint config: {exc}") from exc
    params = {k: v for k, v in tensors.items() if not k.startswith("config.")}
    reference = init_grounding_model(cfg, seed=0).params
    if set(params) != set(reference):
        missing = sorted(set(reference) - set(params))
        extra = sorted(set(params) - set(reference))
        raise DataError(f"checkpoint tensors mismatch: missing {missing}, extra {extra}")
    for key, ref in reference.items():
        if params[key].shape != ref.shape:
            raise DataError(
                f"tensor {key} has shape {params[key].shape}, expected {ref.shape}")
    return GroundingModel(cfg, params)
