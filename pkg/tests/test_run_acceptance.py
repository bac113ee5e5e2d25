import subprocess
from types import SimpleNamespace

import run_acceptance


def fake_runner(codes, calls):
    def fake(cmd, *args, **kwargs):
        calls.append(cmd)
        return SimpleNamespace(returncode=codes.get(tuple(cmd[3:]), 0))
    return fake


def test_usage_without_range(capsys):
    assert run_acceptance.main([]) == 1
    assert "Usage" in capsys.readouterr().out


def test_empty_range_is_not_an_error(capsys):
    assert run_acceptance.main(["100", "120"]) == 0
    assert "No acceptance runs" in capsys.readouterr().out


def test_batch_runs_the_module_for_each_entry(monkeypatch, capsys):
    calls = []
    monkeypatch.setattr(subprocess, "run", fake_runner({}, calls))
    assert run_acceptance.main(["0", "3"]) == 0
    assert len(calls) == 3
    assert calls[0][1:3] == ["-m", "submersion_curvature"]
    assert calls[0][3:] == run_acceptance.ACCEPTANCE_RUNS[0][1]
    assert "3 of 3 runs matched" in capsys.readouterr().out


def test_expected_nonzero_exit_counts_as_match(monkeypatch):
    index = next(i for i, (_, _, code) in enumerate(run_acceptance.ACCEPTANCE_RUNS) if code == 2)
    args = tuple(run_acceptance.ACCEPTANCE_RUNS[index][1])
    monkeypatch.setattr(subprocess, "run", fake_runner({args: 2}, []))
    assert run_acceptance.main([str(index), str(index + 1)]) == 0


def test_mismatch_is_reported(monkeypatch, capsys):
    args = tuple(run_acceptance.ACCEPTANCE_RUNS[0][1])
    monkeypatch.setattr(subprocess, "run", fake_runner({args: 1}, []))
    assert run_acceptance.main(["0", "2"]) == 1
    out = capsys.readouterr().out
    assert "MISMATCH sphere r=0.5" in out
    assert "1 of 2 runs matched" in out
