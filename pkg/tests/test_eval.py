import pytest

from roboscript import corpus, evaluation as E, interp
from roboscript.interp import Grip, Move


def test_compare_placement_basic():
    ref = {"apple": (0.5, 0.5), "orange": (0.0, 0.0)}
    assert E.compare_placement(dict(ref), ref)
    off = dict(ref, apple=(0.75, 0.5))
    assert not E.compare_placement(off, ref)  # 0.25 > 0.2
    close = {"apple": (0.31, 0.69), "orange": (0.19, -0.19)}
    assert E.compare_placement(close, ref)    # 0.19 < 0.2 strict


def test_compare_placement_class_mismatch():
    assert not E.compare_placement({"apple": (0, 0)}, {"orange": (0, 0)})
    assert not E.compare_placement(None, {"orange": (0, 0)})


def test_compare_trajectory_basic():
    ref = (Move(0.1, 0.2, 1.0, 0.0), Grip(True), Move(0.1, 0.2, 0.1, 90.0))
    assert E.compare_trajectory(ref, ref)
    assert not E.compare_trajectory(ref + (Move(0, 0, 1, 0),), ref)
    bad_z = (Move(0.1, 0.2, 1.0, 0.0), Grip(True), Move(0.1, 0.2, 0.4, 90.0))
    assert not E.compare_trajectory(bad_z, ref)      # dz = 0.3
    bad_grip = (Move(0.1, 0.2, 1.0, 0.0), Grip(False), Move(0.1, 0.2, 0.1, 90.0))
    assert not E.compare_trajectory(bad_grip, ref)
    near_r = (Move(0.1, 0.2, 1.0, 17.0), Grip(True), Move(0.1, 0.2, 0.1, 90.0))
    assert E.compare_trajectory(near_r, ref)         # dr = 17 < 18


def test_compare_symmetry_and_reflexivity():
    a = {"apple": (0.1, 0.1)}
    b = {"apple": (0.25, 0.1)}
    assert E.compare_placement(a, b) == E.compare_placement(b, a)
    assert E.compare_placement(a, a) and E.compare_placement(b, b)


@pytest.fixture(scope="module")
def small_corpus():
    base = corpus.generate_corpus(corpus.ARRANGE, 124, seed=5)
    return [s for s in base if s.split == "dev"][:6]


def test_ground_truth_self_consistency(small_corpus):
    rep = E.evaluate(E.GroundTruthPredictor(), small_corpus, n_scenes=5,
                     seed=3)
    assert rep.accuracy == 100.0
    assert rep.malformed_pct == 0.0 and rep.faulted_pct == 0.0


def test_report_regeneration_is_bit_identical(small_corpus):
    a = E.evaluate(E.GroundTruthPredictor(), small_corpus, n_scenes=5, seed=3)
    b = E.evaluate(E.GroundTruthPredictor(), small_corpus, n_scenes=5, seed=3)
    assert a == b
    assert a.to_records() == b.to_records()
    assert a.to_text() == b.to_text()


def test_report_exposes_family_and_clause_breakdown(small_corpus):
    rep = E.evaluate(E.GroundTruthPredictor(), small_corpus, n_scenes=3,
                     seed=3)
    fams = rep.by_family()
    assert fams and all(n >= 1 for _, n in fams.values())
    assert set(rep.by_clause_count()) >= {1}
    text = rep.to_records()
    assert "FAMILY" in text and "CLAUSES" in text


class _WrongPredictor:
    kind = "arrange"
    name = "wrong"

    def predict(self, sample, scene):
        return {cls: (0.77, -0.77) for cls in scene.class_names()}


class _BrokenProgramPredictor:
    kind = "program"
    name = "broken"

    def predict_program(self, sample):
        return None


def test_incorrect_and_malformed_accounting(small_corpus):
    rep = E.evaluate(_WrongPredictor(), small_corpus, n_scenes=3, seed=3)
    assert rep.accuracy < 100.0
    rep2 = E.evaluate(_BrokenProgramPredictor(), small_corpus, n_scenes=3,
                      seed=3)
    assert rep2.malformed_pct == 100.0 and rep2.accuracy == 0.0


def test_faulting_program_counts_as_faulted(small_corpus):
    from roboscript import dsl

    class FaultingPredictor:
        kind = "program"
        name = "faulting"

        def predict_program(self, sample):
            # reads a class never present in the generated scenes
            missing = next(c for c in corpus.CLASS_NAMES
                           if c not in sample.parsed().referenced_classes)
            return dsl.parse_text(
                f"require px_apple == {missing} .w\nsolve", dsl.ARRANGE)

    rep = E.evaluate(FaultingPredictor(), small_corpus, n_scenes=3, seed=3)
    assert rep.faulted_pct == 100.0


def test_render_comparison_table(small_corpus):
    gt = E.evaluate(E.GroundTruthPredictor(), small_corpus, n_scenes=3, seed=3)
    wrong = E.evaluate(_WrongPredictor(), small_corpus, n_scenes=3, seed=3)
    table = E.render_comparison([gt, wrong])
    assert "ground-truth" in table and "wrong" in table
    assert "100.00%" in table
