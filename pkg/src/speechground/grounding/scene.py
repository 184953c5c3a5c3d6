"""Synthetic referring-expression scenes with verifiable geometry.

Each scene holds colored point-cloud objects plus a spoken-style
utterance record: a target class, the mentioned classes, and a spatial
relation (left-of / right-of / nearest-to an anchor of a mentioned
class) that picks out exactly one object among the target-class
candidates.  The generator rejects layouts until a geometric verifier
confirms uniqueness, so every emitted scene is solvable.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from ..errors import DataError, UsageError
from .features import audio_embedding, object_feature_stub

RELATIONS = ("left-of", "right-of", "nearest-to")


@dataclass
class SceneObject:
    """A point cloud (K x 6, xyz+rgb) with its class and box summary."""

    points: np.ndarray | None
    class_id: int
    center: np.ndarray
    size: np.ndarray
    feature: np.ndarray | None = None  # baked shape feature when points elided

    @classmethod
    def from_points(cls, points, class_id: int) -> "SceneObject":
        points = np.asarray(points, dtype=np.float64)
        if points.ndim != 2 or points.shape[1] != 6 or points.shape[0] == 0:
            raise DataError("object points must be a non-empty (K, 6) array")
        xyz = points[:, :3]
        return cls(points, int(class_id), xyz.mean(axis=0),
                   xyz.max(axis=0) - xyz.min(axis=0))


@dataclass
class SyntheticScene:
    """Objects plus the utterance record and its audio vector."""

    objects: list[SceneObject]
    audio: np.ndarray
    target_class: int
    mentioned_classes: tuple[int, ...]
    relation_id: int
    target_index: int

    def __post_init__(self):
        self.audio = np.asarray(self.audio, dtype=np.float64)
        self.mentioned_classes = tuple(sorted(int(c) for c in self.mentioned_classes))
        if not 0 <= self.relation_id < len(RELATIONS):
            raise DataError(f"relation_id {self.relation_id} outside 0..{len(RELATIONS) - 1}")
        if not 0 <= self.target_index < len(self.objects):
            raise DataError("target_index outside the object list")
        if self.objects[self.target_index].class_id != self.target_class:
            raise DataError("target_index does not point at a target_class object")


@dataclass(frozen=True)
class GenConfig:
    """Knobs of the synthetic scene generator."""

    num_scenes: int
    num_classes: int = 6
    points_per_object: int = 64
    d_audio: int = 32
    seed: int = 0
    embed_seed: int = 7
    audio_noise: float = 0.05
    class_prior: tuple[float, ...] = field(default=())

    def __post_init__(self):
        if self.num_scenes < 0:
            raise UsageError("num_scenes must be non-negative")
        if self.num_classes < 2:
            raise UsageError("need at least two classes to form a relation")
        if self.points_per_object < 1:
            raise UsageError("each object needs at least one point")
        prior = self.class_prior
        if prior:
            if len(prior) != self.num_classes or min(prior) < 0 or sum(prior) <= 0:
                raise UsageError("class_prior must be num_classes non-negative weights")


def verify_scene(scene: SyntheticScene) -> bool:
    """True when exactly one candidate satisfies the relation: the target.

    Candidates are the target-class objects; anchors are objects of the
    other mentioned classes.  left-of / right-of compare against the
    extreme anchor x; nearest-to asks for the strictly smallest
    distance to any anchor.
    """
    cands = [i for i, o in enumerate(scene.objects)
             if o.class_id == scene.target_class]
    anchor_classes = set(scene.mentioned_classes) - {scene.target_class}
    anchors = [o for o in scene.objects if o.class_id in anchor_classes]
    if len(cands) < 2 or not anchors:
        return False
    relation = RELATIONS[scene.relation_id]
    centers = {i: scene.objects[i].center for i in cands}
    if relation == "left-of":
        bound = min(a.center[0] for a in anchors)
        hits = [i for i in cands if centers[i][0] < bound]
    elif relation == "right-of":
        bound = max(a.center[0] for a in anchors)
        hits = [i for i in cands if centers[i][0] > bound]
    else:
        dist = {i: min(np.linalg.norm(centers[i] - a.center) for a in anchors)
                for i in cands}
        best = min(cands, key=lambda i: dist[i])
        others = [dist[i] for i in cands if i != best]
        hits = [best] if dist[best] < min(others) else []
    return hits == [scene.target_index]


def _sample_object(rng, class_id, center_xy, sizes, colors, num_points):
    size = sizes[class_id] * (1.0 + 0.1 * rng.uniform(-1, 1, size=3))
    center = np.array([center_xy[0], center_xy[1], size[2] / 2])
    xyz = center + (size / 2) * rng.uniform(-1, 1, size=(num_points, 3))
    rgb = np.clip(colors[class_id] + 0.05 * rng.standard_normal((num_points, 3)),
                  0.0, 1.0)
    return SceneObject.from_points(np.concatenate([xyz, rgb], axis=1), class_id)


def _class_tables(config: GenConfig):
    rng = np.random.default_rng([config.embed_seed, 10])
    sizes = 0.3 + 0.9 * rng.uniform(size=(config.num_classes, 3))
    colors = 0.1 + 0.8 * rng.uniform(size=(config.num_classes, 3))
    return sizes, colors


def _build_scene(rng, config: GenConfig, sizes, colors, prior) -> SyntheticScene:
    ncls = config.num_classes
    target_class = int(rng.choice(ncls, p=prior))
    others = [c for c in range(ncls) if c != target_class]
    anchor_class = int(others[rng.integers(len(others))])
    relation_id = int(rng.integers(len(RELATIONS)))
    n_cand = int(rng.integers(2, 5))
    n_anchor = 1 if RELATIONS[relation_id] == "nearest-to" else int(rng.integers(1, 3))
    spare = [c for c in others if c != anchor_class]
    n_distract = int(rng.integers(0, 3)) if spare else 0
    # cap the population at 10 objects
    n_distract = min(n_distract, 10 - n_cand - n_anchor)

    def uniform_xy(low=0.5, high=7.5):
        return rng.uniform(low, high, size=2)

    if RELATIONS[relation_id] == "left-of":
        bound = rng.uniform(3.5, 5.5)
        anchor_xy = [np.array([bound + off, rng.uniform(0.5, 7.5)])
                     for off in [0.0] + list(rng.uniform(0.2, 2.0, size=n_anchor - 1))]
        winner_xy = np.array([rng.uniform(0.5, bound - 1.5), rng.uniform(0.5, 7.5)])
        loser_xy = [np.array([rng.uniform(bound + 0.5, 7.9), rng.uniform(0.5, 7.5)])
                    for _ in range(n_cand - 1)]
    elif RELATIONS[relation_id] == "right-of":
        bound = rng.uniform(2.5, 4.5)
        anchor_xy = [np.array([bound - off, rng.uniform(0.5, 7.5)])
                     for off in [0.0] + list(rng.uniform(0.2, 2.0, size=n_anchor - 1))]
        winner_xy = np.array([rng.uniform(bound + 1.5, 7.5), rng.uniform(0.5, 7.5)])
        loser_xy = [np.array([rng.uniform(0.1, bound - 0.5), rng.uniform(0.5, 7.5)])
                    for _ in range(n_cand - 1)]
    else:
        anchor_xy = [uniform_xy(2.5, 5.5)]
        angle = rng.uniform(0, 2 * np.pi)
        radius = rng.uniform(0.5, 1.2)
        winner_xy = anchor_xy[0] + radius * np.array([np.cos(angle), np.sin(angle)])
        loser_xy = []
        while len(loser_xy) < n_cand - 1:
            xy = uniform_xy(0.1, 7.9)
            if np.linalg.norm(xy - anchor_xy[0]) >= 3.0:
                loser_xy.append(xy)

    entries = [(target_class, winner_xy, True)]
    entries += [(target_class, xy, False) for xy in loser_xy]
    entries += [(anchor_class, xy, False) for xy in anchor_xy]
    for _ in range(n_distract):
        entries.append((int(spare[rng.integers(len(spare))]), uniform_xy(), False))
    order = rng.permutation(len(entries))
    objects, target_index = [], -1
    for slot, src in enumerate(order):
        class_id, xy, is_target = entries[src]
        objects.append(_sample_object(rng, class_id, xy, sizes, colors,
                                      config.points_per_object))
        if is_target:
            target_index = slot
    mentioned = (target_class, anchor_class)
    clean = audio_embedding(target_class, mentioned, relation_id,
                            config.num_classes, config.d_audio, config.embed_seed)
    audio = clean + config.audio_noise * rng.standard_normal(config.d_audio)
    return SyntheticScene(objects, audio, target_class, mentioned,
                          relation_id, target_index)


def generate_scenes(config: GenConfig) -> list[SyntheticScene]:
    """Deterministically generate verified scenes, one rng per scene."""
    sizes, colors = _class_tables(config)
    if config.class_prior:
        prior = np.asarray(config.class_prior, dtype=np.float64)
        prior = prior / prior.sum()
    else:
        prior = np.full(config.num_classes, 1.0 / config.num_classes)
    scenes = []
    for i in range(config.num_scenes):
        rng = np.random.default_rng([config.seed, i])
        while True:
            scene = _build_scene(rng, config, sizes, colors, prior)
            if verify_scene(scene):
                break
        scenes.append(scene)
    return scenes


def write_scenes(path: str, scenes, include_points: bool = True,
                 embed_seed: int | None = None, d_obj: int = 32) -> None:
    """Write scenes as JSON lines.

    With include_points=False the point clouds are elided and each
    object instead carries its baked shape feature (which requires the
    embedding seed used downstream) plus the box summary.
    """
    if not include_points and embed_seed is None:
        raise UsageError("eliding points requires embed_seed to bake features")
    with open(path, "w", encoding="utf-8") as fh:
        for scene in scenes:
            objs = []
            for obj in scene.objects:
                rec = {"class_id": obj.class_id,
                       "bbox": {"center": list(obj.center), "size": list(obj.size)}}
                if include_points:
                    if obj.points is None:
                        raise UsageError("scene object has no points to write")
                    rec["points"] = [list(row) for row in obj.points]
                else:
                    rec["feature"] = list(object_feature_stub(obj, embed_seed, d_obj))
                objs.append(rec)
            fh.write(json.dumps({
                "objects": objs,
                "audio": list(scene.audio),
                "target_class": scene.target_class,
                "mentioned_classes": list(scene.mentioned_classes),
                "relation_id": scene.relation_id,
                "target_index": scene.target_index,
            }) + "\n")


def read_scenes(path: str) -> list[SyntheticScene]:
    """Parse JSON-line scenes, accepting both point and feature forms."""
    scenes = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"line {lineno}: bad JSON: {exc}") from exc
            try:
                objects = []
                for obj in rec["objects"]:
                    if "points" in obj:
                        objects.append(SceneObject.from_points(
                            np.asarray(obj["points"], dtype=np.float64),
                            int(obj["class_id"])))
                    else:
                        bbox = obj["bbox"]
                        objects.append(SceneObject(
                            None, int(obj["class_id"]),
                            np.asarray(bbox["center"], dtype=np.float64),
                            np.asarray(bbox["size"], dtype=np.float64),
                            feature=np.asarray(obj["feature"], dtype=np.float64)))
                scenes.append(SyntheticScene(
                    objects,
                    np.asarray(rec["audio"], dtype=np.float64),
                    int(rec["target_class"]),
                    tuple(rec["mentioned_classes"]),
                    int(rec["relation_id"]),
                    int(rec["target_index"])))
            except (KeyError, TypeError, ValueError) as exc:
                raise DataError(f"line {lineno}: bad scene record: {exc}") from exc
    return scenes
