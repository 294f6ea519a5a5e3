"""
Tests for the result file sink.
"""
import json
import os
import tempfile

import pytest

from covlearn.core.models import ResultRow
from covlearn.sinks.file import ResultFileSink, emit_results, load_results

HEADER = "solver,L,M,K,trials,p_md,p_md_se,nmse,nmse_se,time_s,iters"


def make_row(solver="cl-sca", K=20, p_md=0.125):
    return ResultRow(
        solver=solver, L=30, M=20, K=K, trials=1000,
        p_md_mean=p_md, p_md_stderr=0.0025, nmse_mean=0.1623, nmse_stderr=0.001,
        mean_solver_time_s=0.0123456789123, mean_iterations=23.5,
    )


@pytest.fixture
def temp_dir():
    """Create a temporary output directory."""
    with tempfile.TemporaryDirectory() as tmp:
        yield tmp


@pytest.mark.asyncio
async def test_file_sink_initialization(temp_dir):
    """Test initializing a file sink."""
    sink = ResultFileSink()
    path = os.path.join(temp_dir, "nested", "out.csv")
    await sink.initialize({"path": path, "format": "csv"})
    assert sink.path == path
    assert sink.format == "csv"
    await sink.shutdown()

    with open(path) as f:
        assert f.read() == HEADER + "\n"


@pytest.mark.asyncio
async def test_file_sink_invalid_config(temp_dir):
    """Test initializing with a missing path or unknown format."""
    sink = ResultFileSink()
    with pytest.raises(ValueError, match="File path is required"):
        await sink.initialize({})
    with pytest.raises(ValueError, match="Invalid format"):
        await sink.initialize({"path": os.path.join(temp_dir, "x"), "format": "xml"})


@pytest.mark.asyncio
async def test_file_sink_csv_batches(temp_dir):
    """Test that several batches are appended under one header."""
    path = os.path.join(temp_dir, "out.csv")
    sink = ResultFileSink()
    await sink.initialize({"path": path})
    await sink.write([make_row(K=20)])
    await sink.write([])
    await sink.write([make_row(K=30), make_row(K=40)])
    await sink.shutdown()

    with open(path) as f:
        lines = f.read().splitlines()
    assert lines[0] == HEADER
    assert len(lines) == 4
    assert lines[1] == "cl-sca,30,20,20,1000,0.125,0.0025,0.1623,0.001,0.0123456789,23.5"


@pytest.mark.asyncio
async def test_file_sink_context_manager_shuts_down(temp_dir):
    """Test leaving the context writes the JSON array and closes the file, even on error."""
    path = os.path.join(temp_dir, "rows.json")
    sink = ResultFileSink()
    await sink.initialize({"path": path, "format": "json"})
    with pytest.raises(RuntimeError):
        async with sink:
            await sink.write([make_row()])
            raise RuntimeError("interrupted")

    assert sink.file is None
    with open(path) as f:
        assert [d["solver"] for d in json.load(f)] == ["cl-sca"]


def test_emit_one_row_csv(temp_dir):
    """Test a single row gives a two-line CSV."""
    path = os.path.join(temp_dir, "one.csv")
    emit_results([make_row()], path, "csv")
    with open(path) as f:
        assert len(f.read().splitlines()) == 2


def test_emit_json(temp_dir):
    """Test JSON output is an array of objects with the CSV keys."""
    path = os.path.join(temp_dir, "rows.json")
    emit_results([make_row(), make_row(solver="cwo")], path, "json")
    with open(path) as f:
        data = json.load(f)
    assert [d["solver"] for d in data] == ["cl-sca", "cwo"]
    assert ",".join(data[0]) == HEADER
    assert data[0]["time_s"] == 0.0123456789


@pytest.mark.parametrize("fmt,name", [("csv", "rows.csv"), ("json", "rows.json")])
def test_emit_then_load(temp_dir, fmt, name):
    """Test rows written with 9 significant digits parse back equal."""
    rows = [make_row(), make_row(solver="msbl-em", K=40, p_md=0.5)]
    rows[0].mean_solver_time_s = 0.0123456789
    rows[1].mean_solver_time_s = 0.0123456789
    path = os.path.join(temp_dir, name)
    emit_results(rows, path, fmt)
    assert load_results(path) == rows


def test_emit_empty_rows(temp_dir):
    """Test that an empty table is rejected."""
    with pytest.raises(ValueError, match="No result rows"):
        emit_results([], os.path.join(temp_dir, "empty.csv"))


def test_emit_unwritable_path(temp_dir):
    """Test that an unwritable path raises an I/O error."""
    blocker = os.path.join(temp_dir, "file")
    with open(blocker, "w") as f:
        f.write("x")
    with pytest.raises(OSError):
        emit_results([make_row()], os.path.join(blocker, "out.csv"))


def test_load_rejects_foreign_header(temp_dir):
    """Test that a CSV with another header is rejected."""
    path = os.path.join(temp_dir, "other.csv")
    with open(path, "w") as f:
        f.write("a,b\n1,2\n")
    with pytest.raises(ValueError, match="Unexpected result header"):
        load_results(path)
