"""Deterministic stand-in features for objects, labels, and audio.

Real systems would run a point-cloud backbone and a speech encoder
here; at desk scale both are replaced by seeded constructions that
keep the downstream numerics honest: every embedding is a pure
function of (embed_seed, identity), so datasets and models agree on
features without sharing state.
"""

import numpy as np

from ..errors import DataError, UsageError

# sub-stream tags so each table draws from its own seeded stream
_STREAM_SHAPE = 0
_STREAM_LABEL = 1
_STREAM_AUDIO_TARGET = 2
_STREAM_AUDIO_MENTION = 3
_STREAM_AUDIO_RELATION = 4


def object_feature_stub(obj, embed_seed: int, dim: int = 32) -> np.ndarray:
    """Shape feature of one object: a seeded projection of cloud statistics.

    The cloud is normalized into a unit ball (centered on its mean,
    scaled by the largest radius), summarized by per-axis mean, max and
    min plus the mean color, and pushed through a fixed random
    projection.  Translating the object does not change the result.
    """
    if obj.points is None:
        if obj.feature is None:
            raise DataError("object carries neither points nor a baked feature")
        feat = np.asarray(obj.feature, dtype=np.float64)
        if feat.shape != (dim,):
            raise DataError(f"baked feature has length {feat.shape}, expected {dim}")
        return feat
    xyz = obj.points[:, :3]
    rgb = obj.points[:, 3:]
    centered = xyz - xyz.mean(axis=0)
    radius = np.max(np.linalg.norm(centered, axis=1))
    if radius > 0:
        centered = centered / radius
    stats = np.concatenate([centered.mean(axis=0), centered.max(axis=0),
                            centered.min(axis=0), rgb.mean(axis=0)])
    proj = np.random.default_rng([embed_seed, _STREAM_SHAPE]).standard_normal(
        (dim, stats.shape[0])) / np.sqrt(stats.shape[0])
    return proj @ stats


def label_embedding(class_id: int, embed_seed: int, dim: int = 8) -> np.ndarray:
    """Fixed random embedding of a class id."""
    if class_id < 0:
        raise UsageError(f"class_id must be non-negative, got {class_id}")
    rng = np.random.default_rng([embed_seed, _STREAM_LABEL, class_id])
    return rng.standard_normal(dim)


def object_representation(obj, embed_seed: int, d_obj: int = 32,
                          d_label: int = 8) -> np.ndarray:
    """Concatenate shape feature, label embedding, box center and size."""
    return np.concatenate([
        object_feature_stub(obj, embed_seed, d_obj),
        label_embedding(obj.class_id, embed_seed, d_label),
        np.asarray(obj.center, dtype=np.float64),
        np.asarray(obj.size, dtype=np.float64),
    ])


def representation_dim(d_obj: int, d_label: int) -> int:
    return d_obj + d_label + 6


def audio_embedding(target_class: int, mentioned_classes, relation_id: int,
                    num_classes: int, d_audio: int, embed_seed: int) -> np.ndarray:
    """Noise-free audio vector for an utterance record.

    The vector is the sum of a target-class embedding, one mention
    embedding per mentioned class, and a relation embedding, all drawn
    from fixed seeded tables; callers add observation noise on top.
    """
    if not 0 <= target_class < num_classes:
        raise UsageError(f"target_class {target_class} outside 0..{num_classes - 1}")
    targets = np.random.default_rng(
        [embed_seed, _STREAM_AUDIO_TARGET]).standard_normal((num_classes, d_audio))
    mentions = np.random.default_rng(
        [embed_seed, _STREAM_AUDIO_MENTION]).standard_normal((num_classes, d_audio))
    relations = np.random.default_rng(
        [embed_seed, _STREAM_AUDIO_RELATION]).standard_normal((3, d_audio))
    if not 0 <= relation_id < relations.shape[0]:
        raise UsageError(f"relation_id {relation_id} outside 0..{relations.shape[0] - 1}")
    out = targets[target_class] + relations[relation_id]
    for c in mentioned_classes:
        if not 0 <= c < num_classes:
            raise UsageError(f"mentioned class {c} outside 0..{num_classes - 1}")
        out = out + mentions[c]
    return out
