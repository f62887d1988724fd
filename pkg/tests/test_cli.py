import json

import pandas as pd
import pytest

from cli import EXIT_FORMAT, EXIT_MISSING, EXIT_OK, main
from setrograde.setdb import MANIFEST, read_manifest


@pytest.fixture(scope="module")
def db_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("databases")
    code = main(["--db", str(root), "--quiet", "build", "--cards", "8", "--suit-mode", "single", "--trump", "NT",
                 "--leader", "all", "--engine", "both", "--workers", "1"])
    assert code == EXIT_OK
    return root


def run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr().out


def test_build_writes_both_kinds_of_database(db_root):
    assert (db_root / "setdb/8/NT/E/2000-2000-2000-2000.sgdb").exists()
    assert (db_root / "setdb/8/NT/E/2000-2000-2000-2000.json").exists()
    assert (db_root / "setdb/4/NT/N/MANIFEST.txt").exists()
    assert (db_root / "retro/8/NT/W/2000-2000-2000-2000.rdb").exists()


@pytest.mark.parametrize(
    "deal,value",
    [
        ("N:98... E:54... S:76... W:32...", "2"),
        ("N:96... E:54... S:32... W:87...", "1"),
    ],
)
def test_query(db_root, capsys, deal, value):
    code, out = run(capsys, "--db", str(db_root), "query", deal, "--leader", "E", "--trump", "NT")
    assert code == EXIT_OK
    assert out.strip() == value


def test_query_retro_as_json(db_root, capsys):
    code, out = run(capsys, "--db", str(db_root), "--json", "query", "N:98... E:32... S:76... W:54... leader=N trump=NT",
                    "--engine", "retro")
    assert code == EXIT_OK
    result = json.loads(out)
    assert result["ns_tricks"] == 2
    assert result["partition"] == "8/NT/N/2000-2000-2000-2000"


def test_malformed_query(db_root, capsys):
    code, _ = run(capsys, "--db", str(db_root), "query", "N:9Z... E:54... S:76... W:32...", "--leader", "E", "--trump", "NT")
    assert code == EXIT_FORMAT


def test_query_outside_the_built_databases(db_root, capsys):
    code, _ = run(capsys, "--db", str(db_root), "query", "N:98... E:54... S:76... W:32...", "--leader", "E", "--trump", "S")
    assert code == EXIT_MISSING


def test_validate_everything_against_retro(db_root, capsys):
    code, out = run(capsys, "--db", str(db_root), "--json", "validate", "--against", "retro", "--mode", "exhaustive")
    assert code == EXIT_OK
    assert json.loads(out)["checked"] == 4 * 2520 + 4 * 24


def test_validate_eight_cards_as_text(db_root, capsys):
    code, out = run(capsys, "--db", str(db_root), "validate", "--cards", "8", "--against", "minimax")
    assert code == EXIT_OK
    assert out.strip() == "10080 deals in 4 partitions agree with minimax (seed 0)"


def test_validate_with_no_samples(db_root, capsys):
    code, out = run(capsys, "--db", str(db_root), "--json", "validate", "--mode", "samples", "--samples", "0")
    assert code == EXIT_OK
    assert json.loads(out)["checked"] == 0


def test_validate_samples(db_root, capsys):
    code, out = run(capsys, "--db", str(db_root), "--json", "validate", "--mode", "samples", "--samples", "25", "--seed", "3")
    assert code == EXIT_OK
    assert json.loads(out)["checked"] == 8 * 25


def test_rebuild_is_a_no_op(db_root, capsys):
    code, out = run(capsys, "--db", str(db_root), "--quiet", "build", "--cards", "8", "--leader", "all", "--workers", "1")
    assert code == EXIT_OK
    assert out.strip() == "Nothing to build; all partitions exist."


def test_stats_json(db_root, capsys):
    code, out = run(capsys, "--db", str(db_root), "--json", "stats")
    assert code == EXIT_OK
    rows = json.loads(out)
    assert len(rows) == 8
    by_cards = {cards: [r for r in rows if r["cards"] == cards] for cards in (4, 8)}
    assert all(r["states_covered"] == 2520 for r in by_cards[8])
    assert all(r["entries"] == 2 for r in by_cards[4])
    density = {cards: sum(r["states_covered"] for r in rs) / sum(r["bytes"] for r in rs) for cards, rs in by_cards.items()}
    assert density[8] > density[4]


def test_stats_exports(db_root, capsys, tmp_path):
    xlsx, pdf = tmp_path / "stats.xlsx", tmp_path / "stats.pdf"
    code, out = run(capsys, "--db", str(db_root), "stats", "--xlsx", str(xlsx), "--pdf", str(pdf))
    assert code == EXIT_OK
    assert "TOTAL" in out
    df = pd.read_excel(xlsx)
    assert list(df["Cards"].astype(str)) == ["4", "8", "TOTAL"]
    assert df["States Covered"].iloc[-1] == 4 * 2520 + 4 * 24
    assert pdf.read_bytes().startswith(b"%PDF")


def test_stats_of_an_empty_root(tmp_path, capsys):
    code, out = run(capsys, "--db", str(tmp_path), "stats")
    assert code == EXIT_OK
    assert out.strip() == "No set databases found."


def test_shapes(capsys):
    code, out = run(capsys, "--json", "shapes", "--cards", "4")
    assert code == EXIT_OK
    counts = json.loads(out)
    assert counts["shapes"] == 256
    assert counts["shape_classes"] == 15


def test_bad_card_count(tmp_path, capsys):
    code, _ = run(capsys, "--db", str(tmp_path), "build", "--cards", "6")
    assert code == EXIT_FORMAT


def test_no_command_prints_help(capsys):
    code, out = run(capsys)
    assert code == EXIT_OK
    assert "usage" in out


def test_builds_are_byte_identical(tmp_path):
    files = []
    for name in ("first", "second"):
        root = tmp_path / name
        assert main(["--db", str(root), "--quiet", "build", "--cards", "4", "--suit-mode", "full",
                     "--workers", "1"]) == EXIT_OK
        files.append({p.relative_to(root): p.read_bytes() for p in sorted(root.glob("setdb/**/*.sgdb"))})
    assert len(files[0]) == 256
    assert files[0] == files[1]


def test_parallel_build_keeps_every_manifest_line(tmp_path):
    images = []
    for workers in ("1", "4"):
        root = tmp_path / f"workers-{workers}"
        assert main(["--db", str(root), "--quiet", "build", "--cards", "4", "--suit-mode", "full",
                     "--leader", "all", "--workers", workers]) == EXIT_OK
        directories = sorted((root / "setdb/4/NT").iterdir())
        assert [d.name for d in directories] == ["E", "N", "S", "W"]
        for directory in directories:
            rows = read_manifest(directory)
            assert len(rows) == 256
            assert set(rows) == {path.stem for path in directory.glob("*.sgdb")}
        images.append({p.relative_to(root): p.read_bytes()
                       for p in sorted(root.glob("setdb/**/*")) if p.suffix == ".sgdb" or p.name == MANIFEST})
    assert images[0] == images[1]


def test_build_json_has_no_nan(tmp_path, capsys):
    code, out = run(capsys, "--db", str(tmp_path), "--json", "--quiet", "build", "--cards", "4", "--engine", "both",
                    "--workers", "1")
    assert code == EXIT_OK

    def reject(constant):
        raise ValueError(f"non-JSON constant {constant}")

    rows = json.loads(out, parse_constant=reject)
    assert [r["Engine"] for r in rows] == ["setro", "retro", ""]
    assert rows[1]["Generated"] is None
    assert rows[-1]["Partition"] == "TOTAL"
    assert rows[-1]["Generated"] == rows[0]["Generated"]


@pytest.mark.parametrize("option,value", [("--leader", "X"), ("--trump", "Z")])
def test_bad_build_choices(tmp_path, capsys, option, value):
    code, _ = run(capsys, "--db", str(tmp_path), "build", "--cards", "4", option, value)
    assert code == EXIT_FORMAT
