"""Template-driven parallel corpus: English instructions paired with programs.

Each template family instantiates an instruction and the program an expert
would write for it. Relative placements always pin the referent object with
required constraints (weak-stay objectives tie along whole segments
otherwise, and ground truth must be canonical). Families cover absolute /
relative / between placements, a read-the-intermediate-solution two-phase
form, multi-clause composites, and the manipulation repertoire (reach,
push, push off edges, pick-and-place, topple, pick-and-push).

Object swaps augment the corpus by substituting classes consistently in
text and program; a (family, class-tuple) is never shared across splits.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import dsl, interp
from .scene import CLASS_NAMES, generate_scene, scene_seed

ARRANGE = dsl.ARRANGE
MANIPULATION = dsl.MANIPULATION

ARRANGE_CLASSES = CLASS_NAMES
MANIP_CLASSES = tuple(c for c in CLASS_NAMES if c != "tray-slot")

# English phrase for each class; "tray-slot" is two words in text.
CLASS_PHRASES = {c: c.replace("-", " ") for c in CLASS_NAMES}

REGIONS = {
    "center": (0.0, 0.0, ("center", "middle")),
    "left": (-0.5, 0.0, ("left",)),
    "right": (0.5, 0.0, ("right",)),
    "top": (0.0, 0.5, ("top",)),
    "bottom": (0.0, -0.5, ("bottom",)),
    "top left": (-0.5, 0.5, ("top left", "left top")),
    "top right": (0.5, 0.5, ("top right", "right top")),
    "bottom left": (-0.5, -0.5, ("bottom left", "left bottom")),
    "bottom right": (0.5, -0.5, ("bottom right", "right bottom")),
}
CORNERS = {
    "top right": (1, 1), "top left": (-1, 1),
    "bottom right": (1, -1), "bottom left": (-1, -1),
}
SIDES = ("left", "right", "top", "bottom")

# Word-level paraphrase map used by the synonym-robustness probe.
SYNONYM_MAP = {
    "put": "keep", "keep": "put", "place": "set", "set": "place",
    "towards": "toward", "toward": "towards",
    "tap": "touch", "touch": "tap",
    "shove": "push", "nudge": "push",
    "middle": "center", "center": "middle",
}

_WORDS = set(SYNONYM_MAP) | set(SYNONYM_MAP.values()) | {
    "the", "a", "at", "to", "of", "and", "in", "on", "it", "them", "up",
    "down", "into", "against", "over", ",",
    "left", "right", "top", "bottom", "side", "edge", "corner", "table",
    "between", "next", "nearest", "flush", "tuck", "wedge", "line",
    "reach", "for", "push", "pick", "move", "use", "topple", "knock", "tip",
    "above", "below", "under", "off", "well", "but",
}
for _c in CLASS_NAMES:
    _WORDS.update(CLASS_PHRASES[_c].split())
ENGLISH_WORDS = tuple(sorted(_WORDS))
ENGLISH_WORD_IDS = {w: i + 1 for i, w in enumerate(ENGLISH_WORDS)}  # 0 = pad


class InstructionLexError(Exception):
    def __init__(self, word: str):
        super().__init__(f"unknown instruction word {word!r}")
        self.word = word


def english_tokenize(text: str) -> list[str]:
    """Lowercase, split hyphens and commas, enforce the closed word list."""
    cleaned = text.lower().replace("-", " ").replace(",", " , ")
    words = cleaned.split()
    for w in words:
        if w not in ENGLISH_WORD_IDS:
            raise InstructionLexError(w)
    return words


def mentioned_classes(text: str) -> frozenset:
    words = text.lower().replace("-", " ").replace(",", " , ").split()
    found = set()
    for cls in CLASS_NAMES:
        phrase = CLASS_PHRASES[cls].split()
        n = len(phrase)
        for i in range(len(words) - n + 1):
            if words[i:i + n] == phrase:
                found.add(cls)
    return frozenset(found)


@dataclass(frozen=True)
class ParallelSample:
    id: str
    task: str
    instruction: str
    program_text: str
    template_family: str
    classes: tuple          # role-ordered class names
    split: str = "train"
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def parsed(self) -> dsl.Program:
        if "prog" not in self._cache:
            self._cache["prog"] = dsl.parse_text(self.program_text, self.task)
        return self._cache["prog"]

    def tokens(self):
        return self.parsed().tokens

    def scene_classes(self):
        refs = self.parsed().referenced_classes
        return tuple(c for c in CLASS_NAMES if c in refs)

    @property
    def clause_count(self) -> int:
        if self.template_family.startswith("comp"):
            return int(self.template_family[-1])
        return 1


@dataclass(frozen=True)
class DirectSample:
    sample_id: str
    rollout: int
    task: str
    instruction: str
    scene: object
    target_placement: dict | None = None
    target_trajectory: tuple | None = None
    split: str = "train"
    template_family: str = ""


# --- template instantiation ---------------------------------------------


def _pick(rng, seq):
    return seq[int(rng.integers(0, len(seq)))]


def _classes(rng, pool, k):
    idx = rng.choice(len(pool), size=k, replace=False)
    return tuple(pool[int(i)] for i in idx)


def _art(rng):
    return _pick(rng, ("the ", ""))


def _lit(v: float) -> str:
    if v == int(v):
        return str(int(v))
    return repr(v)


def _region_requires(cls, region):
    x, y, _ = REGIONS[region]
    return [f"require px_{cls} == {_lit(x)}", f"require py_{cls} == {_lit(y)}"]


def _rel_requires(cls, ref, direction, gap="0.1"):
    if direction in ("left", "right"):
        sign = "-" if direction == "left" else "+"
        return [
            f"require px_{cls} == px_{ref} {sign} ( {cls} .w / 2 + {ref} .w / 2 + {gap} )",
            f"require py_{cls} == py_{ref}",
        ]
    sign = "+" if direction == "above" else "-"
    return [
        f"require py_{cls} == py_{ref} {sign} ( {cls} .h / 2 + {ref} .h / 2 + {gap} )",
        f"require px_{cls} == px_{ref}",
    ]


def _t_region(rng):
    (cls,) = _classes(rng, ARRANGE_CLASSES, 1)
    region = _pick(rng, tuple(REGIONS))
    phrase = _pick(rng, REGIONS[region][2])
    verb = _pick(rng, ("place", "put", "keep", "set"))
    inst = f"{verb} {_art(rng)}{CLASS_PHRASES[cls]} at the {phrase}"
    prog = _region_requires(cls, region) + ["solve"]
    return inst, prog, (cls,)


def _t_corner(rng):
    (cls,) = _classes(rng, ARRANGE_CLASSES, 1)
    corner = _pick(rng, tuple(CORNERS))
    sx, sy = CORNERS[corner]
    verb = _pick(rng, ("tuck", "wedge"))
    inst = f"{verb} {_art(rng)}{CLASS_PHRASES[cls]} into the {corner} corner"
    px = f"1 - {cls} .w / 2" if sx > 0 else f"-1 + {cls} .w / 2"
    py = f"1 - {cls} .h / 2" if sy > 0 else f"-1 + {cls} .h / 2"
    prog = [f"require px_{cls} == {px}", f"require py_{cls} == {py}", "solve"]
    return inst, prog, (cls,)


def _t_edge(rng):
    (cls,) = _classes(rng, ARRANGE_CLASSES, 1)
    side = _pick(rng, SIDES)
    verb = _pick(rng, ("line", "set"))
    lead = "line" if verb == "line" else "set"
    mid = "up against" if lead == "line" else "flush against"
    inst = f"{verb} {_art(rng)}{CLASS_PHRASES[cls]} {mid} the {side} edge"
    if side == "right":
        prog = [f"require px_{cls} == 1 - {cls} .w / 2"]
    elif side == "left":
        prog = [f"require px_{cls} == -1 + {cls} .w / 2"]
    elif side == "top":
        prog = [f"require py_{cls} == 1 - {cls} .h / 2"]
    else:
        prog = [f"require py_{cls} == -1 + {cls} .h / 2"]
    return inst, prog + ["solve"], (cls,)


_DIR_PHRASES = {
    "left": ("to the left of", "left of"),
    "right": ("to the right of", "right of"),
    "above": ("above",),
    "below": ("below", "under"),
}


def _t_rel(rng):
    cls, ref = _classes(rng, ARRANGE_CLASSES, 2)
    direction = _pick(rng, tuple(_DIR_PHRASES))
    phrase = _pick(rng, _DIR_PHRASES[direction])
    verb = _pick(rng, ("place", "put", "keep", "set"))
    inst = (f"{verb} {_art(rng)}{CLASS_PHRASES[cls]} {phrase} "
            f"the {CLASS_PHRASES[ref]}")
    prog = [f"require px_{ref} == 0", f"require py_{ref} == 0"]
    prog += _rel_requires(cls, ref, direction)
    return inst, prog + ["solve"], (cls, ref)


def _t_between(rng):
    cls, a, b = _classes(rng, ARRANGE_CLASSES, 3)
    verb = _pick(rng, ("place", "put", "keep", "set"))
    inst = (f"{verb} {_art(rng)}{CLASS_PHRASES[cls]} between the "
            f"{CLASS_PHRASES[a]} and the {CLASS_PHRASES[b]}")
    prog = [
        f"require px_{a} == -0.5", f"require py_{a} == 0",
        f"require px_{b} == 0.5", f"require py_{b} == 0",
        f"require px_{cls} == ( px_{a} + px_{b} ) / 2",
        f"require py_{cls} == ( py_{a} + py_{b} ) / 2",
        "solve",
    ]
    return inst, prog, (cls, a, b)


def _t_twophase(rng):
    cls, ref = _classes(rng, ARRANGE_CLASSES, 2)
    anchor = _pick(rng, ("left", "right"))
    ax = -0.5 if anchor == "left" else 0.5
    verb = _pick(rng, ("place", "put", "set"))
    inst = (f"{verb} {_art(rng)}{CLASS_PHRASES[ref]} at the {anchor} and "
            f"the {CLASS_PHRASES[cls]} next to it")
    # Try the outward side; fall back inward when it would leave the table.
    out_sign, in_sign = ("-", "+") if anchor == "left" else ("+", "-")
    cmp = "<" if anchor == "left" else ">"
    bound = f"-1 + {cls} .w / 2" if anchor == "left" else f"1 - {cls} .w / 2"
    prog = [
        f"require px_{ref} == {_lit(ax)}",
        f"require py_{ref} == 0",
        f"require py_{cls} == 0",
        "solve",
        f"let t0 = {cls} .w / 2 + {ref} .w / 2 + 0.1",
        f"if value ( px_{ref} ) {out_sign} t0 {cmp} {bound}",
        f"require px_{cls} == px_{ref} {in_sign} t0",
        "else",
        f"require px_{cls} == px_{ref} {out_sign} t0",
        "end",
        "solve",
    ]
    return inst, prog, (cls, ref)


def _t_composite(n_clauses):
    def build(rng):
        classes = _classes(rng, ARRANGE_CLASSES, n_clauses)
        verb = _pick(rng, ("place", "put", "set"))
        placed = [classes[0]]
        region0 = _pick(rng, tuple(REGIONS))
        phrases = [f"{_art(rng)}{CLASS_PHRASES[classes[0]]} at the "
                   f"{_pick(rng, REGIONS[region0][2])}"]
        prog = _region_requires(classes[0], region0)
        for cls in classes[1:]:
            roll = rng.random()
            if roll < 0.45 or len(placed) < 2:
                region = _pick(rng, tuple(REGIONS))
                phrases.append(f"the {CLASS_PHRASES[cls]} at the "
                               f"{_pick(rng, REGIONS[region][2])}")
                prog += _region_requires(cls, region)
            elif roll < 0.8:
                ref = _pick(rng, placed)
                direction = _pick(rng, tuple(_DIR_PHRASES))
                phrases.append(f"the {CLASS_PHRASES[cls]} "
                               f"{_pick(rng, _DIR_PHRASES[direction])} "
                               f"the {CLASS_PHRASES[ref]}")
                prog += _rel_requires(cls, ref, direction)
            else:
                a, b = placed[-2], placed[-1]
                if rng.random() < 0.5:
                    phrases.append(f"the {CLASS_PHRASES[cls]} between them")
                else:
                    phrases.append(f"the {CLASS_PHRASES[cls]} between the "
                                   f"{CLASS_PHRASES[a]} and the {CLASS_PHRASES[b]}")
                prog += [
                    f"require px_{cls} == ( px_{a} + px_{b} ) / 2",
                    f"require py_{cls} == ( py_{a} + py_{b} ) / 2",
                ]
            placed.append(cls)
        if len(phrases) == 2:
            inst = f"{verb} {phrases[0]} and {phrases[1]}"
        else:
            inst = f"{verb} " + " , ".join(phrases[:-1]) + f" and {phrases[-1]}"
        return inst, prog + ["solve"], classes
    return build


def _hover_touch(cls):
    return [f"move ( {cls} .x , {cls} .y , 1 , 0 )",
            f"move ( {cls} .x , {cls} .y , {cls} .d , 0 )"]


def _t_reach(rng):
    (cls,) = _classes(rng, MANIP_CLASSES, 1)
    verb = _pick(rng, ("reach for", "touch", "tap"))
    inst = f"{verb} {_art(rng)}{CLASS_PHRASES[cls]}"
    return inst, _hover_touch(cls), (cls,)


def _t_push_toward(rng):
    cls, ref = _classes(rng, MANIP_CLASSES, 2)
    verb = _pick(rng, ("push", "shove", "nudge"))
    to = _pick(rng, ("towards", "toward"))
    inst = (f"{verb} {_art(rng)}{CLASS_PHRASES[cls]} {to} "
            f"the {CLASS_PHRASES[ref]}")
    prog = [
        f"let t0 = {ref} .x - {cls} .x",
        f"let t1 = {ref} .y - {cls} .y",
        "let t2 = hypot ( t0 , t1 )",
        f"let t3 = {cls} .x - t0 / t2 * ( {cls} .w / 2 + 0.15 )",
        f"let t4 = {cls} .y - t1 / t2 * ( {cls} .h / 2 + 0.15 )",
        "let t5 = atan2 ( t1 , t0 )",
        "move ( t3 , t4 , 1 , t5 )",
        "move ( t3 , t4 , 0.05 , t5 )",
        f"let t6 = {ref} .x - t0 / t2 * ( {cls} .w / 2 + {ref} .w / 2 )",
        f"let t7 = {ref} .y - t1 / t2 * ( {cls} .h / 2 + {ref} .h / 2 )",
        "move ( t6 , t7 , 0.05 , t5 )",
        "move ( t6 , t7 , 1 , t5 )",
    ]
    return inst, prog, (cls, ref)


def _push_off_side(cls, side):
    if side in ("left", "right"):
        sign, far, r = ("+", "-1 - 0.25", "180") if side == "left" else ("-", "1 + 0.25", "0")
        approach = f"let t0 = {cls} .x {sign} ( {cls} .w / 2 + 0.15 )"
        moves = [
            f"move ( t0 , {cls} .y , 1 , {r} )",
            f"move ( t0 , {cls} .y , 0.05 , {r} )",
            f"move ( {far} , {cls} .y , 0.05 , {r} )",
            f"move ( {far} , {cls} .y , 1 , {r} )",
        ]
    else:
        sign, far, r = ("+", "-1 - 0.25", "- 90") if side == "bottom" else ("-", "1 + 0.25", "90")
        approach = f"let t0 = {cls} .y {sign} ( {cls} .h / 2 + 0.15 )"
        moves = [
            f"move ( {cls} .x , t0 , 1 , {r} )",
            f"move ( {cls} .x , t0 , 0.05 , {r} )",
            f"move ( {cls} .x , {far} , 0.05 , {r} )",
            f"move ( {cls} .x , {far} , 1 , {r} )",
        ]
    return [approach] + moves


def _t_push_off(rng):
    (cls,) = _classes(rng, MANIP_CLASSES, 1)
    side = _pick(rng, SIDES)
    verb = _pick(rng, ("push", "shove"))
    tail = _pick(rng, (" of the table", ""))
    inst = f"{verb} {_art(rng)}{CLASS_PHRASES[cls]} off the {side} edge{tail}"
    return inst, _push_off_side(cls, side), (cls,)


def _t_push_off_nearest(rng):
    (cls,) = _classes(rng, MANIP_CLASSES, 1)
    verb = _pick(rng, ("push", "shove"))
    tail = _pick(rng, ("side edge", "edge of the table"))
    inst = f"{verb} {_art(rng)}{CLASS_PHRASES[cls]} off the nearest {tail}"
    prog = [f"if {cls} .x >= 0"]
    prog += _push_off_side(cls, "right")
    prog += ["else"]
    prog += _push_off_side(cls, "left")
    prog += ["end"]
    return inst, prog, (cls,)


def _pick_sequence(cls):
    return [
        f"move ( {cls} .x , {cls} .y , 1 , 0 )",
        f"move ( {cls} .x , {cls} .y , {cls} .d , 0 )",
        "grip ( on )",
        f"move ( {cls} .x , {cls} .y , 1 , 0 )",
    ]


def _place_sequence(cls, tx, ty):
    return [
        f"move ( {tx} , {ty} , 1 , 0 )",
        f"move ( {tx} , {ty} , {cls} .d , 0 )",
        "grip ( off )",
        f"move ( {tx} , {ty} , 1 , 0 )",
    ]


def _t_pick_place(rng):
    (cls,) = _classes(rng, MANIP_CLASSES, 1)
    region = _pick(rng, tuple(REGIONS))
    phrase = _pick(rng, REGIONS[region][2])
    form = _pick(rng, ("pick up @ and place it at the R",
                       "move @ to the R",
                       "pick @ and put it at the R",
                       "pick up @ and keep it at the R"))
    inst = form.replace("@", f"{_art(rng)}{CLASS_PHRASES[cls]}").replace("R", phrase)
    x, y, _ = REGIONS[region]
    prog = _pick_sequence(cls) + _place_sequence(cls, _lit(x), _lit(y))
    return inst, prog, (cls,)


def _t_pick_place_rel(rng):
    cls, ref = _classes(rng, MANIP_CLASSES, 2)
    direction = _pick(rng, tuple(_DIR_PHRASES))
    phrase = _pick(rng, _DIR_PHRASES[direction])
    form = _pick(rng, ("pick up @ and place it P the B",
                       "move @ P the B",
                       "pick @ and set it down P the B"))
    inst = (form.replace("@", f"{_art(rng)}{CLASS_PHRASES[cls]}")
            .replace("P", phrase).replace("B", CLASS_PHRASES[ref]))
    if direction in ("left", "right"):
        sign = "-" if direction == "left" else "+"
        tgt = [f"let t0 = {ref} .x {sign} ( {cls} .w / 2 + {ref} .w / 2 + 0.1 )",
               f"let t1 = {ref} .y"]
    else:
        sign = "+" if direction == "above" else "-"
        tgt = [f"let t0 = {ref} .x",
               f"let t1 = {ref} .y {sign} ( {cls} .h / 2 + {ref} .h / 2 + 0.1 )"]
    prog = _pick_sequence(cls) + tgt + _place_sequence(cls, "t0", "t1")
    return inst, prog, (cls, ref)


def _t_topple(rng):
    (cls,) = _classes(rng, MANIP_CLASSES, 1)
    form = _pick(rng, ("topple @", "knock @ over", "tip @ over"))
    inst = form.replace("@", f"{_art(rng)}{CLASS_PHRASES[cls]}")
    prog = [
        f"let t0 = hypot ( {cls} .w , {cls} .d )",
        f"let t1 = atan2 ( {cls} .d , {cls} .w )",
        f"let t2 = {cls} .x + {cls} .w / 2",
        f"move ( t2 - t0 * cos ( t1 ) , {cls} .y , 1 , 0 )",
        f"move ( t2 - t0 * cos ( t1 ) , {cls} .y , t0 * sin ( t1 ) , 0 )",
        "for 4",
        "let t1 = t1 + 90 / 4",
        f"move ( t2 - t0 * cos ( t1 ) , {cls} .y , t0 * sin ( t1 ) , 0 )",
        "end",
        f"move ( t2 , {cls} .y , 1 , 0 )",
    ]
    return inst, prog, (cls,)


def _t_pick_push(rng):
    cls, ref = _classes(rng, MANIP_CLASSES, 2)
    side = _pick(rng, SIDES)
    form = _pick(rng, ("pick up @ and use it to push the B off the S edge",
                       "use @ to push the B off the S edge"))
    inst = (form.replace("@", f"{_art(rng)}{CLASS_PHRASES[cls]}")
            .replace("B", CLASS_PHRASES[ref]).replace("S", side))
    prog = list(_pick_sequence(cls))
    if side in ("left", "right"):
        sign, far, r = ("+", "-1 - 0.25", "180") if side == "left" else ("-", "1 + 0.25", "0")
        prog += [
            f"let t0 = {ref} .x {sign} ( {ref} .w / 2 + {cls} .w / 2 + 0.15 )",
            f"move ( t0 , {ref} .y , 1 , {r} )",
            f"move ( t0 , {ref} .y , {cls} .d , {r} )",
            f"move ( {far} , {ref} .y , {cls} .d , {r} )",
            f"move ( {far} , {ref} .y , 1 , {r} )",
        ]
    else:
        sign, far, r = ("+", "-1 - 0.25", "- 90") if side == "bottom" else ("-", "1 + 0.25", "90")
        prog += [
            f"let t0 = {ref} .y {sign} ( {ref} .h / 2 + {cls} .h / 2 + 0.15 )",
            f"move ( {ref} .x , t0 , 1 , {r} )",
            f"move ( {ref} .x , t0 , {cls} .d , {r} )",
            f"move ( {ref} .x , {far} , {cls} .d , {r} )",
            f"move ( {ref} .x , {far} , 1 , {r} )",
        ]
    return inst, prog, (cls, ref)


ARRANGE_FAMILIES = (
    ("region", _t_region, 30),
    ("corner", _t_corner, 12),
    ("edge", _t_edge, 12),
    ("rel", _t_rel, 20),
    ("between", _t_between, 10),
    ("twophase", _t_twophase, 12),
    ("comp2", _t_composite(2), 14),
    ("comp3", _t_composite(3), 8),
    ("comp4", _t_composite(4), 6),
)
MANIP_FAMILIES = (
    ("reach", _t_reach, 24),
    ("pushto", _t_push_toward, 24),
    ("pushoff", _t_push_off, 22),
    ("pushnear", _t_push_off_nearest, 12),
    ("pickplace", _t_pick_place, 24),
    ("pickrel", _t_pick_place_rel, 20),
    ("topple", _t_topple, 12),
    ("pickpush", _t_pick_push, 8),
)

# Split sizes at the reference corpus sizes; otherwise 82/9/9 percent.
_REFERENCE_SPLITS = {
    (ARRANGE, 124): (102, 11, 11),
    (MANIPULATION, 146): (122, 12, 12),
}


def _largest_remainder(weights, total):
    raw = [w * total / sum(weights) for w in weights]
    counts = [int(x) for x in raw]
    rema = sorted(range(len(raw)), key=lambda i: (raw[i] - counts[i], -i),
                  reverse=True)
    for i in rema[: total - sum(counts)]:
        counts[i] += 1
    return counts


def _split_sizes(task, n_base):
    if (task, n_base) in _REFERENCE_SPLITS:
        return _REFERENCE_SPLITS[(task, n_base)]
    n_dev = max(1, round(n_base * 0.09))
    n_test = max(1, round(n_base * 0.09))
    return n_base - n_dev - n_test, n_dev, n_test


def generate_corpus(task: str, n_base: int, seed: int) -> list[ParallelSample]:
    """Base parallel corpus for one task; deterministic in (task, n_base, seed)."""
    if n_base < 20:
        raise ValueError("n_base must be >= 20")
    families = ARRANGE_FAMILIES if task == ARRANGE else MANIP_FAMILIES
    prefix = "arr" if task == ARRANGE else "man"
    rng = np.random.default_rng(seed)
    counts = _largest_remainder([w for _, _, w in families], n_base)

    samples = []
    used = set()
    for (family, build, _), count in zip(families, counts):
        made = 0
        for attempt in range(count * 300):
            inst, prog_lines, classes = build(rng)
            text = " ".join(prog_lines)
            if (inst, text) in used:
                continue
            used.add((inst, text))
            sample = ParallelSample(
                id=f"{prefix}-{family}-{made:03d}",
                task=task,
                instruction=inst,
                program_text=text,
                template_family=family,
                classes=classes,
            )
            sample.parsed()  # must be grammatical by construction
            samples.append(sample)
            made += 1
            if made == count:
                break
        if made < count:
            raise RuntimeError(f"template space exhausted for {family}")

    return _assign_splits(samples, _split_sizes(task, n_base), rng)


def _assign_splits(samples, sizes, rng):
    """Stratified split: every family lands in every split when it can."""
    n_train, n_dev, n_test = sizes
    by_family = {}
    for s in samples:
        by_family.setdefault(s.template_family, []).append(s)
    families = list(by_family)
    fam_sizes = [len(by_family[f]) for f in families]

    def quotas(total, available):
        q = _largest_remainder(available, total)
        # every family with >= 3 remaining members gets at least one slot
        for i, f in enumerate(families):
            if q[i] == 0 and available[i] >= 3:
                donor = max(range(len(q)), key=lambda j: q[j])
                if q[donor] > 1:
                    q[donor] -= 1
                    q[i] += 1
        return q

    test_q = quotas(n_test, fam_sizes)
    remaining = [fam_sizes[i] - test_q[i] for i in range(len(families))]
    dev_q = quotas(n_dev, remaining)

    out = []
    for i, f in enumerate(families):
        members = by_family[f]
        order = rng.permutation(len(members))
        for rank, idx in enumerate(order):
            if rank < test_q[i]:
                split = "test"
            elif rank < test_q[i] + dev_q[i]:
                split = "dev"
            else:
                split = "train"
            out.append(replace(members[int(idx)], split=split))
    return sorted(out, key=lambda s: s.id)


def _substitute_text(text: str, mapping: dict) -> str:
    words = text.split()
    phrase_of = {cls: CLASS_PHRASES[cls].split() for cls in mapping}
    out = []
    i = 0
    while i < len(words):
        hit = None
        for cls, phrase in phrase_of.items():
            if words[i:i + len(phrase)] == phrase:
                hit = (cls, len(phrase))
                break
        if hit:
            out.append(CLASS_PHRASES[mapping[hit[0]]])
            i += hit[1]
        else:
            out.append(words[i])
            i += 1
    return " ".join(out)


def _substitute_program(text: str, mapping: dict) -> str:
    toks = []
    for t in text.split():
        if t in mapping:
            toks.append(mapping[t])
        elif t.startswith(("px_", "py_")) and t[3:] in mapping:
            toks.append(t[:3] + mapping[t[3:]])
        else:
            toks.append(t)
    return " ".join(toks)


def augment(samples, n_aug_per_sample: int, seed: int) -> list[ParallelSample]:
    """Object-swap augmentation, applied consistently to text and program.

    Swaps are injective over a sample's classes and never the identity. An
    augmented sample may only take a (family, class-tuple) key that no
    *other* split owns, so augmentation never makes a test sample share its
    key with a train sample (base samples of single-object families already
    span splits, as any small corpus over a fixed object set must).
    """
    rng = np.random.default_rng(seed)
    owners = {}
    seen_text = set()
    for s in samples:
        owners.setdefault((s.task, s.template_family, s.classes), set()).add(s.split)
        seen_text.add((s.instruction, s.program_text))
    out = list(samples)
    for s in sorted(samples, key=lambda x: x.id):
        pool = ARRANGE_CLASSES if s.task == ARRANGE else MANIP_CLASSES
        for k in range(n_aug_per_sample):
            for _ in range(100):
                new_classes = _classes(rng, pool, len(s.classes))
                if new_classes == s.classes:
                    continue
                key = (s.task, s.template_family, new_classes)
                if owners.get(key, set()) - {s.split}:
                    continue
                mapping = dict(zip(s.classes, new_classes))
                inst = _substitute_text(s.instruction, mapping)
                text = _substitute_program(s.program_text, mapping)
                if (inst, text) in seen_text:
                    continue
                break
            else:
                continue  # space exhausted for this sample; skip quietly
            owners.setdefault(key, set()).add(s.split)
            seen_text.add((inst, text))
            out.append(replace(
                s,
                id=f"{s.id}-a{k}",
                instruction=inst,
                program_text=text,
                classes=new_classes,
                _cache={},
            ))
    return sorted(out, key=lambda s: s.id)


def derive_direct_dataset(samples, n_scenes: int = 20, seed: int = 0):
    """One DirectSample per (sample, scene), targets from ground-truth
    execution; faulted rollouts are skipped and counted."""
    out = []
    skipped = 0
    for s in sorted(samples, key=lambda x: x.id):
        for i, (scene, outcome) in enumerate(
                interp.execute_ground_truth_batch(s, n_scenes, seed)):
            if not outcome.ok:
                skipped += 1
                continue
            out.append(DirectSample(
                sample_id=s.id, rollout=i, task=s.task,
                instruction=s.instruction, scene=scene,
                target_placement=outcome.placement,
                target_trajectory=outcome.trajectory,
                split=s.split, template_family=s.template_family,
            ))
    return out, skipped


def family_from_id(sample_id: str) -> str:
    return sample_id.split("-")[1]


def write_corpus(samples, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in sorted(samples, key=lambda x: x.id):
            fh.write("\t".join(
                (s.id, s.task, s.split, s.instruction, s.program_text)) + "\n")


def read_corpus(path) -> list[ParallelSample]:
    samples = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 5:
                raise ValueError(f"{path}:{line_no}: expected 5 tab-separated fields")
            sid, task, split, instruction, program_text = fields
            prog = dsl.parse_text(program_text, task)
            ordered = tuple(c for c in CLASS_NAMES if c in prog.referenced_classes)
            samples.append(ParallelSample(
                id=sid, task=task, instruction=instruction,
                program_text=program_text,
                template_family=family_from_id(sid),
                classes=ordered, split=split,
            ))
    return samples


def write_direct_dataset(direct_samples, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# direct dataset v1\n")
        for d in direct_samples:
            fh.write(f"SAMPLE {d.sample_id} {d.rollout} {d.task} {d.split}\n")
            fh.write(f"INSTR {d.instruction}\n")
            for o in d.scene.objects:
                fh.write(f"OBJ {o.class_name} {o.x:.6f} {o.y:.6f} "
                         f"{o.w:.6f} {o.h:.6f} {o.d:.6f}\n")
            if d.target_placement is not None:
                for cls, (x, y) in d.target_placement.items():
                    fh.write(f"TARGET PLACE {cls} {x:.6f} {y:.6f}\n")
            else:
                for ev in d.target_trajectory:
                    if isinstance(ev, interp.Move):
                        fh.write(f"TARGET MOVE {ev.x:.6f} {ev.y:.6f} "
                                 f"{ev.z:.6f} {ev.r:.6f}\n")
                    else:
                        fh.write(f"TARGET GRIP {'ON' if ev.engaged else 'OFF'}\n")
            fh.write("END\n")


def read_direct_dataset(path):
    from .scene import Scene, SceneObject

    out = []
    state = None
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            op, _, rest = line.partition(" ")
            if op == "SAMPLE":
                sid, rollout, task, split = rest.split()
                state = dict(sample_id=sid, rollout=int(rollout), task=task,
                             split=split, objs=[], placement={}, traj=[])
            elif op == "INSTR":
                state["instruction"] = rest
            elif op == "OBJ":
                f = rest.split()
                state["objs"].append(SceneObject(
                    f[0], *(float(v) for v in f[1:])))
            elif op == "TARGET":
                kind, _, args = rest.partition(" ")
                if kind == "PLACE":
                    cls, x, y = args.split()
                    state["placement"][cls] = (float(x), float(y))
                elif kind == "MOVE":
                    state["traj"].append(interp.Move(*(float(v) for v in args.split())))
                else:
                    state["traj"].append(interp.Grip(args == "ON"))
            elif op == "END":
                out.append(DirectSample(
                    sample_id=state["sample_id"], rollout=state["rollout"],
                    task=state["task"], instruction=state["instruction"],
                    scene=Scene(state["objs"]),
                    target_placement=state["placement"] or None,
                    target_trajectory=tuple(state["traj"]) or None,
                    split=state["split"],
                    template_family=family_from_id(state["sample_id"]),
                ))
                state = None
    return out
