import subprocess
import sys

import pytest

from roboscript import baselines, cli, corpus, dsl, nmt
from roboscript.scene import generate_scene, write_scene


def run_cli(*argv, stdin=None):
    proc = subprocess.run(
        [sys.executable, "-m", "roboscript", *argv],
        capture_output=True, text=True, input=stdin, timeout=600)
    return proc


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    base = corpus.generate_corpus(corpus.ARRANGE, 24, seed=3)
    corpus.write_corpus(base, root / "corpus.tsv")

    train = [s for s in base if s.split == "train"
             and s.template_family == "region"][:6]
    model, _ = nmt.train(nmt.ModelConfig(embed_dim=48, hidden_dim=64,
                                         head_dim=64, seed=1),
                         train, epochs=200, batch_size=2, lr=3e-3)
    assert nmt.token_accuracy(model, train) >= 0.99
    nmt.save_translator(model, root / "model.npz", task=dsl.ARRANGE)

    sc = generate_scene(["apple", "orange", "banana"], rng_seed=11)
    write_scene(sc, root / "scene.txt")
    (root / "prog.rsc").write_text(
        "# touch the apple\n"
        "move ( apple .x , apple .y , 1 , 0 )\n"
        "move ( apple .x , apple .y , apple .d , 0 )\n")
    (root / "fault.rsc").write_text("# reach lemon\n"
                                    "move ( lemon .x , lemon .y , 1 , 0 )\n")
    (root / "bad.rsc").write_text("# broken\nmove ( 1 ,\n")
    return root, train


def test_help_lists_all_subcommands():
    proc = run_cli("--help")
    assert proc.returncode == 0
    for name in ("gen-corpus", "train", "train-baseline", "translate", "run",
                 "evaluate", "grad-check", "repl"):
        assert name in proc.stdout
    for flag in ("--seed", "--verbose"):
        assert flag in proc.stdout


def test_every_run_prints_seed(workdir):
    root, _ = workdir
    proc = run_cli("--seed", "9", "run", "--program", str(root / "prog.rsc"),
                   "--scene", str(root / "scene.txt"))
    assert proc.stdout.startswith("seed: 9\n")


def test_run_golden_output(workdir):
    root, _ = workdir
    proc = run_cli("run", "--program", str(root / "prog.rsc"),
                   "--scene", str(root / "scene.txt"))
    assert proc.returncode == 0
    sc = generate_scene(["apple", "orange", "banana"], rng_seed=11)
    a = sc.lookup("apple")
    want = (f"seed: 0\n"
            f"MOVE {a.x:.6f} {a.y:.6f} 1.000000 0.000000\n"
            f"MOVE {a.x:.6f} {a.y:.6f} {a.d:.6f} 0.000000\n")
    assert proc.stdout == want


def test_run_missing_object_exits_4(workdir):
    root, _ = workdir
    proc = run_cli("run", "--program", str(root / "fault.rsc"),
                   "--scene", str(root / "scene.txt"))
    assert proc.returncode == cli.EXIT_FAULT
    assert "NullObject" in proc.stderr


def test_run_malformed_exits_3(workdir):
    root, _ = workdir
    proc = run_cli("run", "--program", str(root / "bad.rsc"),
                   "--scene", str(root / "scene.txt"))
    assert proc.returncode == cli.EXIT_MALFORMED
    assert "Malformed" in proc.stderr


def test_usage_error_exits_2():
    proc = run_cli("train")
    assert proc.returncode == 2


def test_gen_corpus_deterministic(tmp_path):
    a = run_cli("gen-corpus", "--task", "arrange", "--n-base", "24",
                "--out", str(tmp_path / "a.tsv"))
    b = run_cli("gen-corpus", "--task", "arrange", "--n-base", "24",
                "--out", str(tmp_path / "b.tsv"))
    assert a.returncode == 0 and b.returncode == 0
    assert (tmp_path / "a.tsv").read_text() == (tmp_path / "b.tsv").read_text()


def test_translate_trained_instruction(workdir):
    root, train = workdir
    proc = run_cli("translate", "--ckpt", str(root / "model.npz"),
                   "--instruction", train[0].instruction)
    assert proc.returncode == 0
    assert f"# {train[0].instruction}" in proc.stdout
    assert "solve" in proc.stdout


def test_translate_unknown_word_exits_3(workdir):
    root, _ = workdir
    proc = run_cli("translate", "--ckpt", str(root / "model.npz"),
                   "--instruction", "place the flask somewhere")
    assert proc.returncode == cli.EXIT_MALFORMED


def test_translate_emits_attention_csv(workdir, tmp_path):
    root, train = workdir
    csv_path = tmp_path / "attn.csv"
    proc = run_cli("translate", "--ckpt", str(root / "model.npz"),
                   "--instruction", train[0].instruction,
                   "--emit-attention", str(csv_path))
    assert proc.returncode == 0
    header = csv_path.read_text().splitlines()[0]
    assert header.startswith("token,")


def test_evaluate_ground_truth_and_determinism(workdir, tmp_path):
    root, _ = workdir
    out1, out2 = tmp_path / "r1.txt", tmp_path / "r2.txt"
    for out in (out1, out2):
        proc = run_cli("--seed", "4", "evaluate", "--ground-truth",
                       "--corpus", str(root / "corpus.tsv"),
                       "--split", "test", "--n-scenes", "5",
                       "--out", str(out), "--records")
        assert proc.returncode == 0
    assert out1.read_bytes() == out2.read_bytes()
    assert "ACCURACY 100.00" in out1.read_text()


def test_evaluate_translator_checkpoint(workdir):
    root, _ = workdir
    proc = run_cli("evaluate", "--ckpt", str(root / "model.npz"),
                   "--corpus", str(root / "corpus.tsv"),
                   "--split", "train", "--n-scenes", "2")
    assert proc.returncode == 0
    assert "accuracy" in proc.stdout


def test_train_baseline_and_evaluate(workdir, tmp_path):
    root, _ = workdir
    ckpt = tmp_path / "base.npz"
    proc = run_cli("train-baseline", "--task", "arrange",
                   "--corpus", str(root / "corpus.tsv"),
                   "--out", str(ckpt), "--n-scenes", "2", "--epochs", "2",
                   "--embed-dim", "16", "--hidden-dim", "16",
                   "--head-dim", "16")
    assert proc.returncode == 0, proc.stderr
    proc = run_cli("evaluate", "--ckpt", str(ckpt),
                   "--corpus", str(root / "corpus.tsv"),
                   "--split", "test", "--n-scenes", "2")
    assert proc.returncode == 0
    assert "arrange-baseline" in proc.stdout


def test_repl_translates_and_confirms_execution(workdir):
    root, train = workdir
    stdin = f"{train[0].instruction}\ny\n\n"
    proc = run_cli("repl", "--ckpt", str(root / "model.npz"),
                   "--scene", str(root / "scene.txt"), stdin=stdin)
    assert proc.returncode == 0
    assert "attention focus per step:" in proc.stdout
    assert "execute against the loaded scene?" in proc.stdout


def test_repl_declines_execution_without_confirmation(workdir):
    root, train = workdir
    stdin = f"{train[0].instruction}\nn\n\n"
    proc = run_cli("repl", "--ckpt", str(root / "model.npz"),
                   "--scene", str(root / "scene.txt"), stdin=stdin)
    assert proc.returncode == 0
    assert "PLACE" not in proc.stdout
