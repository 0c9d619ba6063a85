"""Deterministic sandboxed interpreter binding a program to a scene.

Arrange programs drive the constraint solver and yield a Placement read
from the final solve; manipulation programs drive a mock robot that records
a Trajectory of move/grip events. Classes absent from the scene bind to
None, and reading their attributes faults. Execution is total: a statement
budget caps runaway loops and every runtime error is reported as a fault
outcome rather than an exception.

Values are affine forms over placement variables so that arrange programs
can mix solver variables with ordinary arithmetic; in manipulation programs
every value is a plain constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from . import dsl, solver as S
from .scene import CLASS_NAMES, Scene, generate_scene, scene_seed

STEP_BUDGET = 10_000
COORD_LIMIT = 1.5  # slight overshoot beyond the table allowed for pushes

FAULT_NULL_OBJECT = "NullObject"
FAULT_DIV_BY_ZERO = "DivByZero"
FAULT_STEP_BUDGET = "StepBudgetExceeded"
FAULT_INFEASIBLE = "InfeasibleConstraints"
FAULT_DOMAIN = "DomainError"


@dataclass(frozen=True)
class Move:
    x: float
    y: float
    z: float
    r: float


@dataclass(frozen=True)
class Grip:
    engaged: bool


@dataclass(frozen=True)
class ExecOutcome:
    status: str  # "placement" | "trajectory" | "fault"
    placement: dict | None = None      # class -> (x, y)
    trajectory: tuple | None = None    # Move/Grip events
    fault_kind: str | None = None
    fault_step: int | None = None

    @property
    def ok(self) -> bool:
        return self.status != "fault"


class _Fault(Exception):
    def __init__(self, kind: str):
        super().__init__(kind)
        self.kind = kind


class _Affine:
    """Value = sum(coef * placement var) + const."""

    __slots__ = ("terms", "const")

    def __init__(self, const=0.0, terms=None):
        self.const = float(const)
        self.terms = terms or {}

    @property
    def is_const(self):
        return not self.terms

    def as_const(self):
        if self.terms:
            raise _Fault(FAULT_DOMAIN)
        if not math.isfinite(self.const):
            raise _Fault(FAULT_DOMAIN)
        return self.const

    def to_expr(self):
        return S.LinearExpr(dict(self.terms), self.const)


def _add(a, b, sign=1.0):
    terms = dict(a.terms)
    for v, c in b.terms.items():
        terms[v] = terms.get(v, 0.0) + sign * c
        if terms[v] == 0.0:
            del terms[v]
    return _Affine(a.const + sign * b.const, terms)


def _mul(a, b):
    if a.is_const:
        a, b = b, a
    if not b.is_const:
        raise _Fault(FAULT_DOMAIN)  # nonlinear in placement variables
    k = b.const
    return _Affine(a.const * k, {v: c * k for v, c in a.terms.items() if c * k != 0.0})


def _div(a, b):
    if not b.is_const:
        raise _Fault(FAULT_DOMAIN)
    if b.const == 0.0:
        raise _Fault(FAULT_DIV_BY_ZERO)
    return _mul(a, _Affine(1.0 / b.const))


class _Interpreter:
    def __init__(self, program: dsl.Program, scene: Scene):
        self.program = program
        self.scene = scene
        self.locals = {}
        self.steps = 0
        self.events = []
        self.grip_state = None
        self.solver = None
        self.place_vars = {}
        if program.task == dsl.ARRANGE:
            self.solver = S.Solver()
            for cls in CLASS_NAMES:
                if cls in program.referenced_classes:
                    for axis in "xy":
                        self.place_vars[(axis, cls)] = \
                            self.solver.add_variable(f"p{axis}_{cls}")

    def tick(self):
        self.steps += 1
        if self.steps > STEP_BUDGET:
            raise _Fault(FAULT_STEP_BUDGET)

    def run(self) -> ExecOutcome:
        try:
            self.exec_block(self.program.body)
        except _Fault as f:
            return ExecOutcome("fault", fault_kind=f.kind, fault_step=self.steps)
        except S.Infeasible:
            return ExecOutcome("fault", fault_kind=FAULT_INFEASIBLE,
                               fault_step=self.steps)
        if self.program.task == dsl.ARRANGE:
            placement = {}
            for cls in sorted(self.program.placed_classes,
                              key=CLASS_NAMES.index):
                placement[cls] = (
                    self.solver.value(self.place_vars[("x", cls)]),
                    self.solver.value(self.place_vars[("y", cls)]),
                )
            return ExecOutcome("placement", placement=placement)
        return ExecOutcome("trajectory", trajectory=tuple(self.events))

    def exec_block(self, body):
        for stmt in body:
            self.exec_stmt(stmt)

    def exec_stmt(self, stmt):
        self.tick()
        if isinstance(stmt, dsl.Let):
            self.locals[stmt.name] = self.eval(stmt.expr)
        elif isinstance(stmt, dsl.Require):
            lhs = self.eval(stmt.lhs)
            rhs = self.eval(stmt.rhs)
            con = S.Constraint(lhs.to_expr().minus(rhs.to_expr()),
                               stmt.relation, S.REQUIRED)
            self.solver.add_constraint(con)
        elif isinstance(stmt, dsl.Solve):
            self.solver.solve()
        elif isinstance(stmt, dsl.MoveStmt):
            x = self.eval(stmt.x).as_const()
            y = self.eval(stmt.y).as_const()
            z = self.eval(stmt.z).as_const()
            r = self.eval(stmt.r).as_const()
            if abs(x) > COORD_LIMIT or abs(y) > COORD_LIMIT:
                raise _Fault(FAULT_DOMAIN)
            if not all(math.isfinite(v) for v in (x, y, z, r)):
                raise _Fault(FAULT_DOMAIN)
            self.events.append(Move(x, y, z, r))
        elif isinstance(stmt, dsl.GripStmt):
            if self.grip_state is None or isinstance(self.events[-1], Move) \
                    or self.events[-1].engaged != stmt.engaged:
                self.events.append(Grip(stmt.engaged))
            self.grip_state = stmt.engaged
        elif isinstance(stmt, dsl.If):
            lhs = self.eval(stmt.lhs).as_const()
            rhs = self.eval(stmt.rhs).as_const()
            taken = {
                "==": lhs == rhs,
                "<=": lhs <= rhs,
                ">=": lhs >= rhs,
                "<": lhs < rhs,
                ">": lhs > rhs,
            }[stmt.relation]
            self.exec_block(stmt.then_body if taken else stmt.else_body)
        elif isinstance(stmt, dsl.For):
            for _ in range(stmt.count):
                self.exec_block(stmt.body)
        else:
            raise TypeError(f"not a statement: {stmt!r}")

    def eval(self, node) -> _Affine:
        if isinstance(node, dsl.Num):
            return _Affine(node.value)
        if isinstance(node, dsl.LocalRef):
            if node.name not in self.locals:
                raise _Fault(FAULT_DOMAIN)  # read before assignment
            return self.locals[node.name]
        if isinstance(node, dsl.PlaceRef):
            var = self.place_vars[(node.axis, node.class_name)]
            return _Affine(0.0, {var: 1.0})
        if isinstance(node, dsl.AttrRef):
            obj = self.scene.lookup(node.class_name)
            if obj is None:
                raise _Fault(FAULT_NULL_OBJECT)
            return _Affine(getattr(obj, node.attr))
        if isinstance(node, dsl.Unary):
            return _mul(self.eval(node.operand), _Affine(-1.0))
        if isinstance(node, dsl.Binary):
            a, b = self.eval(node.left), self.eval(node.right)
            if node.op == "+":
                return _add(a, b)
            if node.op == "-":
                return _add(a, b, sign=-1.0)
            if node.op == "*":
                return _mul(a, b)
            return _div(a, b)
        if isinstance(node, dsl.Call):
            return self.call(node)
        raise TypeError(f"not an expression: {node!r}")

    def call(self, node: dsl.Call) -> _Affine:
        name, args = node.func, node.args
        if name == "value":
            if len(args) != 1 or not isinstance(args[0], dsl.PlaceRef) \
                    or self.solver is None:
                raise _Fault(FAULT_DOMAIN)
            ref = args[0]
            return _Affine(self.solver.value(self.place_vars[(ref.axis, ref.class_name)]))
        vals = [self.eval(a).as_const() for a in args]
        try:
            if name == "sin" and len(vals) == 1:
                return _Affine(math.sin(math.radians(vals[0])))
            if name == "cos" and len(vals) == 1:
                return _Affine(math.cos(math.radians(vals[0])))
            if name == "atan2" and len(vals) == 2:
                # atan2(0, 0) is defined as 0 rather than a fault
                return _Affine(math.degrees(math.atan2(vals[0], vals[1])))
            if name == "hypot" and len(vals) == 2:
                return _Affine(math.hypot(vals[0], vals[1]))
            if name == "abs" and len(vals) == 1:
                return _Affine(abs(vals[0]))
            if name == "min" and len(vals) >= 2:
                return _Affine(min(vals))
            if name == "max" and len(vals) >= 2:
                return _Affine(max(vals))
        except ValueError:
            raise _Fault(FAULT_DOMAIN)
        raise _Fault(FAULT_DOMAIN)  # wrong arity


def execute(program: dsl.Program, scene: Scene) -> ExecOutcome:
    """Run a parsed program against a scene; pure and deterministic."""
    return _Interpreter(program, scene).run()


def execute_ground_truth_batch(sample, n_scenes: int, seed: int):
    """Execute a sample's ground-truth program on n freshly seeded scenes.

    Returns [(scene, outcome)] in rollout order; scene seeds derive from
    (seed, sample id, rollout index) so any stage can regenerate them.
    """
    program = sample.parsed()
    classes = sample.scene_classes()
    out = []
    for i in range(n_scenes):
        sc = generate_scene(classes, scene_seed(seed, sample.id, i))
        out.append((sc, execute(program, sc)))
    return out


def format_outcome(outcome: ExecOutcome) -> str:
    """One event per line; the exact format golden tests and the CLI use."""
    if outcome.status == "fault":
        return f"FAULT {outcome.fault_kind} step={outcome.fault_step}\n"
    lines = []
    if outcome.status == "placement":
        for cls, (x, y) in outcome.placement.items():
            lines.append(f"PLACE {cls} {x:.6f} {y:.6f}")
    else:
        for ev in outcome.trajectory:
            if isinstance(ev, Move):
                lines.append(f"MOVE {ev.x:.6f} {ev.y:.6f} {ev.z:.6f} {ev.r:.6f}")
            else:
                lines.append(f"GRIP {'ON' if ev.engaged else 'OFF'}")
    return "\n".join(lines) + "\n" if lines else "\n"
