"""Scene representation, randomized scene generation, and scene file I/O.

A scene is what the perception stage hands to a program: a list of detected
objects, each with a class label, a position on the table, and extents.
Table coordinates are normalized so the table is the square [-1, 1] x [-1, 1].
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

# Fixed registry of detectable object classes. Order matters: it defines the
# canonical feature ordering used by the direct-regression baselines.
CLASS_NAMES = (
    "apple",
    "orange",
    "banana",
    "lemon",
    "bottle",
    "cup",
    "lock",
    "magnet",
    "block",
    "tray-slot",
)
CLASS_INDEX = {name: i for i, name in enumerate(CLASS_NAMES)}

# Generation parameters (table units).
MIN_SEPARATION = 0.25
SIZE_RANGE = (0.08, 0.30)
DEPTH_RANGE = (0.05, 0.25)
MAX_PLACEMENT_ATTEMPTS = 10_000


class SceneError(Exception):
    """Invalid scene construction."""


class PlacementFailure(SceneError):
    """Rejection sampling could not place all objects."""


class SceneParseError(SceneError):
    """Malformed scene file; carries the offending 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


def is_class_name(name: str) -> bool:
    return name in CLASS_INDEX


@dataclass(frozen=True)
class SceneObject:
    """One detected object: class, center position, extents, and height."""

    class_name: str
    x: float
    y: float
    w: float
    h: float
    d: float

    def __post_init__(self):
        if self.class_name not in CLASS_INDEX:
            raise SceneError(f"unknown object class {self.class_name!r}")
        vals = (self.x, self.y, self.w, self.h, self.d)
        if not all(np.isfinite(v) for v in vals):
            raise SceneError(f"non-finite field in {self.class_name}: {vals}")
        if self.w <= 0 or self.h <= 0 or self.d <= 0:
            raise SceneError(f"non-positive extent for {self.class_name}")
        if abs(self.x) + self.w / 2 > 1 or abs(self.y) + self.h / 2 > 1:
            raise SceneError(
                f"{self.class_name} footprint leaves the table: "
                f"x={self.x} y={self.y} w={self.w} h={self.h}"
            )


class Scene:
    """Immutable collection of scene objects, at most one per class."""

    def __init__(self, objects):
        objects = tuple(objects)
        seen = set()
        for obj in objects:
            if obj.class_name in seen:
                raise SceneError(f"duplicate class {obj.class_name!r} in scene")
            seen.add(obj.class_name)
        for i, a in enumerate(objects):
            for b in objects[i + 1 :]:
                dist = float(np.hypot(a.x - b.x, a.y - b.y))
                if dist < MIN_SEPARATION:
                    raise SceneError(
                        f"{a.class_name} and {b.class_name} centers are "
                        f"{dist:.3f} apart (< {MIN_SEPARATION})"
                    )
        self._objects = objects
        self._by_class = {obj.class_name: obj for obj in objects}

    @property
    def objects(self):
        return self._objects

    def lookup(self, class_name: str):
        """Return the object of the given class, or None when absent.

        None is a legitimate binding: dereferencing it is the interpreter's
        error, not ours.
        """
        if class_name not in CLASS_INDEX:
            raise SceneError(f"unknown object class {class_name!r}")
        return self._by_class.get(class_name)

    def class_names(self):
        return tuple(obj.class_name for obj in self._objects)

    def __len__(self):
        return len(self._objects)

    def __eq__(self, other):
        if not isinstance(other, Scene):
            return NotImplemented
        return self._objects == other._objects

    def __hash__(self):
        return hash(self._objects)

    def __repr__(self):
        inner = ", ".join(
            f"{o.class_name}@({o.x:.2f},{o.y:.2f})" for o in self._objects
        )
        return f"Scene({inner})"


def generate_scene(classes, rng_seed: int, max_attempts: int = MAX_PLACEMENT_ATTEMPTS) -> Scene:
    """Randomly place one object per class; deterministic in (classes, seed).

    Positions are uniform over the admissible region (footprint on the table)
    via rejection sampling against the pairwise separation rule; sizes and
    depths are uniform over their fixed ranges.
    """
    classes = list(classes)
    if not 1 <= len(classes) <= 8:
        raise ValueError(f"need 1..8 classes, got {len(classes)}")
    if len(set(classes)) != len(classes):
        raise ValueError("classes must be distinct")
    for c in classes:
        if c not in CLASS_INDEX:
            raise SceneError(f"unknown object class {c!r}")

    rng = np.random.default_rng(rng_seed)
    placed = []
    attempts = 0
    for name in classes:
        w = rng.uniform(*SIZE_RANGE)
        h = rng.uniform(*SIZE_RANGE)
        d = rng.uniform(*DEPTH_RANGE)
        while True:
            attempts += 1
            if attempts > max_attempts:
                raise PlacementFailure(
                    f"gave up after {max_attempts} attempts placing {name}"
                )
            x = rng.uniform(-(1 - w / 2), 1 - w / 2)
            y = rng.uniform(-(1 - h / 2), 1 - h / 2)
            if all(np.hypot(x - p.x, y - p.y) >= MIN_SEPARATION for p in placed):
                placed.append(SceneObject(name, x, y, w, h, d))
                break
    return Scene(placed)


def scene_seed(base_seed: int, sample_id: str, rollout: int) -> int:
    """Stable per-rollout seed derived from (base seed, sample id, index)."""
    tag = zlib.crc32(sample_id.encode("utf-8"))
    return int(np.random.SeedSequence([base_seed, tag, rollout]).generate_state(1)[0])


def format_scene(scene: Scene) -> str:
    lines = ["# scene: one object per line: class x y w h d"]
    for o in scene.objects:
        lines.append(
            f"{o.class_name} {o.x:.6f} {o.y:.6f} {o.w:.6f} {o.h:.6f} {o.d:.6f}"
        )
    return "\n".join(lines) + "\n"


def write_scene(scene: Scene, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_scene(scene))


def parse_scene(text: str) -> Scene:
    objects = []
    seen = set()
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 6:
            raise SceneParseError(line_no, f"expected 6 fields, got {len(fields)}")
        name = fields[0]
        if name not in CLASS_INDEX:
            raise SceneParseError(line_no, f"unknown class {name!r}")
        if name in seen:
            raise SceneParseError(line_no, f"duplicate class {name!r}")
        seen.add(name)
        try:
            x, y, w, h, d = (float(f) for f in fields[1:])
        except ValueError:
            raise SceneParseError(line_no, f"non-numeric field in {fields[1:]}")
        try:
            objects.append(SceneObject(name, x, y, w, h, d))
        except SceneError as exc:
            raise SceneParseError(line_no, str(exc))
    try:
        return Scene(objects)
    except SceneError as exc:
        raise SceneParseError(0, str(exc))


def read_scene(path) -> Scene:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scene(fh.read())
