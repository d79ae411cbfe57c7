import numpy as np
import pytest

from a2lp.cli import main
from a2lp.embeddings import EmbeddingSet, load_embeddings, save_embeddings


def _run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def _toy_file(tmp_path):
    # three unit-ish points: two supports of different classes, one query
    # near the class-0 support
    vectors = np.array([[1.0, 0.05], [0.0, 1.0], [0.9, 0.1], [0.1, 0.9], [0.7, 0.2]])
    labels = np.array([0, 1, 0, 1, 0])
    path = tmp_path / "toy.a2lp"
    save_embeddings(EmbeddingSet(vectors, labels), path)
    return path


def test_help_exits_zero(capsys):
    code, out, _ = _run(capsys, "--help")
    assert code == 0
    assert "bench" in out and "solve" in out and "gradcheck" in out and "synth" in out


def test_unknown_flag_is_hard_error(capsys):
    code, _, err = _run(capsys, "bench", "--synthetic", "--frobnicate")
    assert code == 1
    assert "frobnicate" in err


def test_bench_missing_file_names_path(capsys):
    code, _, err = _run(capsys, "bench", "--embeddings", "/no/such/file.a2lp", "--episodes", "1")
    assert code == 1
    assert "/no/such/file.a2lp" in err


def test_bench_synthetic_paired_table(capsys):
    code, out, err = _run(
        capsys,
        "bench", "--synthetic", "--ways", "3", "--shots", "1", "--queries", "4",
        "--dim", "8", "--episodes", "5", "--seed", "7", "--methods", "lp,a2lp",
        "--steps", "2", "--k", "4",
    )
    assert code == 0
    assert "method=lp" in out and "method=a2lp" in out
    assert "# wall_time" in err


def test_bench_jobs_byte_identical(capsys):
    argv = [
        "bench", "--synthetic", "--ways", "3", "--shots", "1", "--queries", "4",
        "--dim", "8", "--episodes", "8", "--seed", "3", "--methods", "lp,a2lp",
        "--steps", "2", "--k", "4",
    ]
    code1, out1, _ = _run(capsys, *argv, "--jobs", "1")
    code2, out2, _ = _run(capsys, *argv, "--jobs", "4")
    assert code1 == code2 == 0
    assert out1 == out2


def test_bench_expensive_steps_note(capsys):
    code, _, err = _run(
        capsys,
        "bench", "--synthetic", "--ways", "3", "--shots", "1", "--queries", "3",
        "--dim", "8", "--episodes", "1", "--methods", "a2lp", "--steps", "201",
        "--k", "4",
    )
    assert code == 0
    assert "# note: steps=201" in err


def test_solve_toy_task(capsys, tmp_path):
    path = _toy_file(tmp_path)
    code, out, _ = _run(
        capsys,
        "solve", "--embeddings", str(path), "--support", "0,1", "--query", "4",
        "--steps", "0", "--k", "2",
    )
    assert code == 0
    lines = out.strip().splitlines()
    assert len(lines) == 1
    assert lines[0] == "0"


def test_solve_steps_zero_equals_lp_and_trace_counts(capsys, tmp_path):
    path = _toy_file(tmp_path)
    base = ["solve", "--embeddings", str(path), "--support", "0,1",
            "--query", "2,3,4", "--k", "2"]
    code0, out0, _ = _run(capsys, *base, "--steps", "0")
    code1, out1, err1 = _run(capsys, *base, "--steps", "5", "--trace")
    assert code0 == code1 == 0
    assert len(out0.strip().splitlines()) == 3
    trace_lines = [l for l in err1.splitlines() if l.startswith("step=")]
    assert len(trace_lines) == 5

    code2, out2, _ = _run(capsys, *base, "--steps", "0", "--trace")
    assert out2 == out0  # steps=0 output equals plain LP either way


def test_solve_trace_includes_accuracy_when_labels_known(capsys, tmp_path):
    path = _toy_file(tmp_path)  # file carries labels for every row
    code, _, err = _run(
        capsys,
        "solve", "--embeddings", str(path), "--support", "0,1",
        "--query", "2,3,4", "--k", "2", "--steps", "3", "--trace",
    )
    assert code == 0
    trace_lines = [l for l in err.splitlines() if l.startswith("step=")]
    assert len(trace_lines) == 3
    assert all("query_accuracy=" in l for l in trace_lines)


def test_solve_dump_graph_coordinate_format(capsys, tmp_path):
    path = _toy_file(tmp_path)
    dump = tmp_path / "graph.txt"
    code, _, _ = _run(
        capsys,
        "solve", "--embeddings", str(path), "--support", "0,1", "--query", "2,3,4",
        "--steps", "0", "--k", "2", "--dump-graph", str(dump),
    )
    assert code == 0
    text = dump.read_text().splitlines()
    assert "# affinity" in text and "# normalized" in text
    start = text.index("# affinity") + 1
    end = text.index("# normalized")
    affinity_lines = text[start:end]
    assert len(affinity_lines) == 5 * 2  # k entries stored per column
    row, col, value = affinity_lines[0].split()
    assert 0 <= int(row) < 5 and 0 <= int(col) < 5
    assert float(value) >= 0.0
    # normalized section is symmetric: every (i, j) has its (j, i) twin
    pairs = {(l.split()[0], l.split()[1]) for l in text[end + 1 :]}
    assert all((j, i) in pairs for i, j in pairs)


def test_solve_explicit_labels_and_original_ids(capsys, tmp_path):
    path = _toy_file(tmp_path)
    code, out, _ = _run(
        capsys,
        "solve", "--embeddings", str(path), "--support", "0:7,1:9",
        "--query", "2,3", "--steps", "0", "--k", "2",
    )
    assert code == 0
    assert out.strip().splitlines() == ["7", "9"]


def test_solve_unbalanced_support_rejected(capsys, tmp_path):
    path = _toy_file(tmp_path)
    code, _, err = _run(
        capsys,
        "solve", "--embeddings", str(path), "--support", "0,1,2",
        "--query", "3", "--steps", "0", "--k", "2",
    )
    assert code == 1
    assert "shots per class" in err


def test_gradcheck_passes(capsys):
    code, out, _ = _run(capsys, "gradcheck", "--trials", "3", "--seed", "1")
    assert code == 0
    assert "max_rel_err=" in out and "PASS" in out


def test_gradcheck_zero_trials_is_usage_error(capsys):
    code, _, err = _run(capsys, "gradcheck", "--trials", "0")
    assert code == 1
    assert "trials" in err


def test_gradcheck_pathological_tau_reports(capsys):
    code, out, _ = _run(capsys, "gradcheck", "--trials", "2", "--seed", "2", "--tau", "1e6")
    assert code in (0, 2)
    assert "max_rel_err=" in out
    if code == 2:
        assert "trial" in out  # names the failing instance


def test_synth_roundtrip_and_identical_bytes(capsys, tmp_path):
    first = tmp_path / "one.a2lp"
    second = tmp_path / "two.a2lp"
    argv = ["synth", "--ways", "3", "--shots", "1", "--queries", "2",
            "--dim", "5", "--seed", "11"]
    code1, _, _ = _run(capsys, *argv, "--out", str(first))
    code2, _, _ = _run(capsys, *argv, "--out", str(second))
    assert code1 == code2 == 0
    assert first.read_bytes() == second.read_bytes()
    loaded = load_embeddings(first)
    assert loaded.count == 9 and loaded.dim == 5
    assert loaded.labels is not None


def test_synth_zero_noise_benches_perfect(capsys, tmp_path):
    path = tmp_path / "sep.a2lp"
    code, _, _ = _run(
        capsys,
        "synth", "--ways", "3", "--shots", "2", "--queries", "4", "--dim", "8",
        "--within-scale", "0", "--seed", "4", "--out", str(path),
    )
    assert code == 0
    code, out, _ = _run(
        capsys,
        "bench", "--embeddings", str(path), "--ways", "3", "--shots", "2",
        "--queries", "4", "--episodes", "3", "--methods", "proto,imprint,lp,a2lp",
        "--steps", "1", "--k", "3",
    )
    assert code == 0
    for line in out.splitlines():
        if line.startswith("method="):
            assert "mean_accuracy_pct=100.0000" in line
