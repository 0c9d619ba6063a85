"""Execution-based accuracy metric and the comparison report.

Every prediction is judged by executing against the same seeded scenes as
the ground-truth program: a sample is Correct only when all rollouts match
within tolerance (placements: both axes; trajectories: index-aligned events
with every pose component in tolerance). Generated token sequences that
fail to lex or parse are Malformed; runtime faults are reported separately
as Faulted (both count against accuracy).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import dsl, interp
from .corpus import InstructionLexError
from .nmt import translate as nmt_translate, UnknownSourceToken
from .scene import generate_scene, scene_seed

POSITION_TOL = 0.2   # 10% of the 2.0-wide table
ROTATION_TOL = 18.0  # same 10% fraction applied to the 180-degree scale

CORRECT = "Correct"
INCORRECT = "Incorrect"
MALFORMED = "Malformed"
FAULTED = "Faulted"


def compare_placement(pred: dict, ref: dict) -> bool:
    """True iff same classes and both axes within tolerance everywhere."""
    if pred is None or set(pred) != set(ref):
        return False
    for cls, (rx, ry) in ref.items():
        px, py = pred[cls]
        if not (abs(px - rx) < POSITION_TOL and abs(py - ry) < POSITION_TOL):
            return False
    return True


def compare_trajectory(pred, ref) -> bool:
    """Index-aligned event comparison at the pose tolerance."""
    if pred is None or len(pred) != len(ref):
        return False
    for p, r in zip(pred, ref):
        if type(p) is not type(r):
            return False
        if isinstance(p, interp.Grip):
            if p.engaged != r.engaged:
                return False
        else:
            if not (abs(p.x - r.x) < POSITION_TOL
                    and abs(p.y - r.y) < POSITION_TOL
                    and abs(p.z - r.z) < POSITION_TOL
                    and abs(p.r - r.r) < ROTATION_TOL):
                return False
    return True


@dataclass(frozen=True)
class Verdict:
    sample_id: str
    family: str
    clause_count: int
    status: str
    n_pass: int = 0
    n_fail: int = 0
    n_fault: int = 0
    n_skipped: int = 0


@dataclass(frozen=True)
class Report:
    system: str
    task: str
    seed: int
    n_scenes: int
    verdicts: tuple

    @property
    def n_samples(self) -> int:
        return len(self.verdicts)

    def _pct(self, status) -> float:
        if not self.verdicts:
            return 0.0
        return 100.0 * sum(v.status == status for v in self.verdicts) / len(self.verdicts)

    @property
    def accuracy(self) -> float:
        return self._pct(CORRECT)

    @property
    def malformed_pct(self) -> float:
        return self._pct(MALFORMED)

    @property
    def faulted_pct(self) -> float:
        return self._pct(FAULTED)

    def by_family(self) -> dict:
        out = {}
        for v in self.verdicts:
            out.setdefault(v.family, []).append(v)
        return {
            fam: (100.0 * sum(x.status == CORRECT for x in vs) / len(vs), len(vs))
            for fam, vs in sorted(out.items())
        }

    def by_clause_count(self) -> dict:
        out = {}
        for v in self.verdicts:
            out.setdefault(v.clause_count, []).append(v)
        return {
            n: (100.0 * sum(x.status == CORRECT for x in vs) / len(vs), len(vs))
            for n, vs in sorted(out.items())
        }

    def to_records(self) -> str:
        lines = [
            "REPORT v1",
            f"SYSTEM {self.system}",
            f"TASK {self.task}",
            f"SEED {self.seed}",
            f"N_SCENES {self.n_scenes}",
            f"SAMPLES {self.n_samples}",
            f"ACCURACY {self.accuracy:.2f}",
            f"MALFORMED {self.malformed_pct:.2f}",
            f"FAULTED {self.faulted_pct:.2f}",
        ]
        for fam, (acc, n) in self.by_family().items():
            lines.append(f"FAMILY {fam} n={n} acc={acc:.2f}")
        for cc, (acc, n) in self.by_clause_count().items():
            lines.append(f"CLAUSES {cc} n={n} acc={acc:.2f}")
        for v in self.verdicts:
            lines.append(
                f"SAMPLE {v.sample_id} {v.status} pass={v.n_pass} "
                f"fail={v.n_fail} fault={v.n_fault} skipped={v.n_skipped}")
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        lines = [
            f"system: {self.system}   task: {self.task}   "
            f"seed: {self.seed}   scenes/sample: {self.n_scenes}",
            f"samples: {self.n_samples}   accuracy: {self.accuracy:.2f}%   "
            f"malformed: {self.malformed_pct:.2f}%   "
            f"faulted: {self.faulted_pct:.2f}%",
            "per-family accuracy:",
        ]
        for fam, (acc, n) in self.by_family().items():
            lines.append(f"  {fam:<12s} n={n:<4d} {acc:6.2f}%")
        lines.append("per-clause-count accuracy:")
        for cc, (acc, n) in self.by_clause_count().items():
            lines.append(f"  {cc} clause(s)   n={n:<4d} {acc:6.2f}%")
        return "\n".join(lines) + "\n"


# --- predictors -------------------------------------------------------------


class GroundTruthPredictor:
    """Evaluates the ground-truth programs against themselves."""

    kind = "program"
    name = "ground-truth"

    def predict_program(self, sample):
        return sample.parsed()


class TranslatorPredictor:
    kind = "program"

    def __init__(self, model, name="translator"):
        self.model = model
        self.name = name

    def predict_program(self, sample):
        """Parsed program, or None when the prediction is malformed."""
        try:
            result = nmt_translate(self.model, sample.instruction)
        except (InstructionLexError, UnknownSourceToken):
            return None
        if result.malformed:
            return None
        try:
            tokens = [dsl.token(t) for t in result.tokens] + [dsl.EOS]
            return dsl.parse(tokens, sample.task)
        except (dsl.LexError, dsl.DslSyntaxError):
            return None


class ArrangeBaselinePredictor:
    kind = "arrange"

    def __init__(self, model, name="arrange-baseline"):
        self.model = model
        self.name = name

    def predict(self, sample, scene):
        return self.model.predict(sample.instruction, scene)


class ManipBaselinePredictor:
    kind = "manip"

    def __init__(self, model, name="manip-baseline"):
        self.model = model
        self.name = name

    def predict(self, sample, scene):
        return self.model.predict(sample.instruction, scene)


def _compare_outcome(task, prediction, reference) -> bool:
    if task == dsl.ARRANGE:
        return compare_placement(prediction, reference.placement)
    return compare_trajectory(prediction, reference.trajectory)


def evaluate(predictor, samples, n_scenes: int = 20, seed: int = 0) -> Report:
    """Run the execution metric over samples on shared seeded scenes."""
    verdicts = []
    task = samples[0].task if samples else dsl.ARRANGE
    for sample in sorted(samples, key=lambda s: s.id):
        rollouts = interp.execute_ground_truth_batch(sample, n_scenes, seed)
        program = None
        malformed = False
        if predictor.kind == "program":
            program = predictor.predict_program(sample)
            malformed = program is None
        n_pass = n_fail = n_fault = n_skipped = 0
        if not malformed:
            for i, (scene, reference) in enumerate(rollouts):
                if not reference.ok:
                    n_skipped += 1
                    continue
                if predictor.kind == "program":
                    outcome = interp.execute(program, scene)
                    if not outcome.ok:
                        n_fault += 1
                        continue
                    prediction = outcome.placement if task == dsl.ARRANGE \
                        else outcome.trajectory
                else:
                    prediction = predictor.predict(sample, scene)
                if _compare_outcome(sample.task, prediction, reference):
                    n_pass += 1
                else:
                    n_fail += 1
        if malformed:
            status = MALFORMED
        elif n_fault > 0:
            status = FAULTED
        elif n_fail == 0 and n_pass > 0:
            status = CORRECT
        else:
            status = INCORRECT
        verdicts.append(Verdict(
            sample_id=sample.id, family=sample.template_family,
            clause_count=sample.clause_count, status=status,
            n_pass=n_pass, n_fail=n_fail, n_fault=n_fault,
            n_skipped=n_skipped))
    return Report(system=predictor.name, task=task, seed=seed,
                  n_scenes=n_scenes, verdicts=tuple(verdicts))


def render_comparison(reports) -> str:
    """Side-by-side accuracy table over systems (rows) and tasks (columns)."""
    tasks = sorted({r.task for r in reports})
    by_system = {}
    for r in reports:
        by_system.setdefault(r.system, {})[r.task] = r
    width = max(len(s) for s in by_system) + 2
    header = "model".ljust(width) + "".join(t.ljust(16) for t in tasks)
    lines = [header, "-" * len(header)]
    for system, per_task in by_system.items():
        row = system.ljust(width)
        for t in tasks:
            rep = per_task.get(t)
            row += (f"{rep.accuracy:6.2f}%" if rep else "   -   ").ljust(16)
        lines.append(row)
    return "\n".join(lines) + "\n"
