import json

import pytest

import cli
from schemas.selection_schema import Method
from services.storage import read_embedding

SMALL_RUN = ["run", "--synthetic-items", "30", "--synthetic-users", "20", "--clusters", "3", "--dim", "4",
             "--m-grid", "2,5", "--methods", "max_norm,user_expectation,submodular", "--seed", "7"]


@pytest.fixture
def embeddings(tmp_path):
    items, users = tmp_path / "items.txt", tmp_path / "users.txt"
    code = cli.main(["gen", "--items", "25", "--users", "12", "--dim", "3", "--clusters", "2",
                     "--out-items", str(items), "--out-users", str(users)])
    assert code == cli.EXIT_OK
    return items, users


def test_gen_writes_readable_embeddings(embeddings):
    items, users = embeddings
    assert (read_embedding(items).count, read_embedding(users).count) == (25, 12)


def test_gen_is_seeded(tmp_path, embeddings):
    items, _ = embeddings
    again = tmp_path / "again.txt"
    cli.main(["gen", "--items", "25", "--users", "12", "--dim", "3", "--clusters", "2",
              "--out-items", str(again), "--out-users", str(tmp_path / "u2.txt")])
    assert again.read_bytes() == items.read_bytes()


def test_select_prints_ranked_lines(embeddings, capsys):
    items, users = embeddings
    assert cli.main(["select", "--items", str(items), "--users", str(users), "--method", "submodular",
                     "--m", "4"]) == cli.EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert [line.split("\t")[0] for line in lines] == ["1", "2", "3", "4"]
    assert all(line.split("\t")[1].startswith("i") for line in lines)


def test_select_then_evaluate(tmp_path, embeddings, capsys):
    items, users = embeddings
    ranking = tmp_path / "max_norm.tsv"
    cli.main(["select", "--items", str(items), "--method", "max_norm", "--m", "5", "--out", str(ranking)])
    assert cli.main(["evaluate", "--items", str(items), "--users", str(users), "--ranking", str(ranking)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["method"] == "max_norm" and report["m"] == 5
    assert 0.0 <= report["precision"] <= 1.0 and report["fav_loss_value"] >= 0.0


def test_graph_build_then_select_from_file(tmp_path, embeddings, capsys):
    items, users = embeddings
    graph = tmp_path / "items.graph"
    assert cli.main(["graph-build", "--items", str(items), "--k", "4", "--ef-construction", "20",
                     "--out", str(graph)]) == 0
    assert cli.main(["select", "--items", str(items), "--method", "max_in_degree", "--m", "3",
                     "--graph", str(graph)]) == 0
    assert len(capsys.readouterr().out.splitlines()) == 3


def test_select_needs_users(embeddings, capsys):
    items, _ = embeddings
    assert cli.main(["select", "--items", str(items), "--method", "ipgs", "--m", "3"]) == cli.EXIT_INVALID
    assert "--users" in capsys.readouterr().err


def test_select_rejects_m_beyond_the_catalogue(embeddings, capsys):
    items, users = embeddings
    assert cli.main(["select", "--items", str(items), "--users", str(users), "--method", "submodular",
                     "--m", "26"]) == cli.EXIT_INVALID
    assert "m must be in [1, 25]" in capsys.readouterr().err


def test_external_is_not_a_selectable_method(embeddings):
    items, users = embeddings
    with pytest.raises(SystemExit) as info:
        cli.main(["select", "--items", str(items), "--users", str(users), "--method", "external", "--m", "2"])
    assert info.value.code == 2


def test_ranking_files_are_tagged_external(tmp_path, embeddings):
    items, _ = embeddings
    ranking = tmp_path / "picked.txt"
    ranking.write_text("i3\n\n1\ti0\t0.5\n", encoding="utf-8")
    result = cli._read_ranking(str(ranking), read_embedding(items))
    assert result.method == Method.external
    assert result.ranked_ids == ("i3", "i0")
    assert result.indices == (3, 0)


def test_run_is_deterministic(capsys):
    assert cli.main(SMALL_RUN) == 0
    first = capsys.readouterr().out
    assert cli.main(SMALL_RUN) == 0
    assert capsys.readouterr().out == first
    assert first.splitlines()[0].startswith("method,m,population,fav_loss")
    assert len(first.splitlines()) == 1 + 3 * 2 * 2


def test_run_writes_json_and_figures(tmp_path):
    out = tmp_path / "report.json"
    figures = tmp_path / "figures"
    assert cli.main(SMALL_RUN + ["--format", "json", "--out", str(out), "--figures", str(figures)]) == 0
    assert json.loads(out.read_text())["provenance"]["seed"] == 7
    assert sorted(p.name for p in figures.iterdir()) == ["fav_loss.csv", "ranking_metrics.csv"]


def test_run_reads_config_file(tmp_path, capsys):
    settings = tmp_path / "experiment.env"
    settings.write_text("m_grid=3\nmethods=max_norm\nseed=2\n")
    args = ["run", "--config", str(settings), "--synthetic-items", "10", "--synthetic-users", "5", "--dim", "2"]
    assert cli.main(args) == 0
    rows = capsys.readouterr().out.splitlines()[1:]
    assert [row.split(",")[:3] for row in rows] == [["max_norm", "3", "warm"], ["max_norm", "3", "cold"]]


@pytest.mark.parametrize("extra", [["--m-grid", "500"], ["--graph-k", "0"], ["--methods", "random"],
                                   ["--methods", "max_norm,external"]])
def test_run_rejects_bad_settings(extra, capsys):
    assert cli.main(SMALL_RUN + extra) == cli.EXIT_INVALID
    assert "error:" in capsys.readouterr().err


def test_missing_config_file_is_invalid(tmp_path):
    assert cli.main(["run", "--config", str(tmp_path / "absent.env")]) == cli.EXIT_INVALID


def test_run_can_store_the_report(capsys):
    assert cli.main(SMALL_RUN + ["--store"]) == 0
