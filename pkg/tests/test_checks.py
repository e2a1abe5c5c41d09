from __future__ import annotations

from kbrl_lmp import checks
from kbrl_lmp.cli import main


def test_result_line_format():
    r = checks.CheckResult("x", True, 1e-12, 1e-10, "note")
    assert r.line() == "[PASS] x: worst=1.000e-12 tol=1.0e-10 note"
    assert checks.CheckResult("y", False, 2.0, 1.0).line().startswith("[FAIL] y")


def test_small_suites_pass():
    for suite, kw in (
        (checks.nonexpansiveness_suite, dict(n_instances=5, pairs=3)),
        (checks.kernel_trick_suite, dict(n_instances=3, probes=3)),
        (checks.eta_constraint_suite, dict(n_instances=10)),
        (checks.ald_suite, dict(n_insertions=50)),
        (checks.lmp_special_case_suite, dict(steps=100)),
    ):
        assert all(r.passed for r in suite(**kw))


def test_cli_check_exit_code(capsys):
    assert main(["check"]) == 0
    out = capsys.readouterr().out
    assert "checks passed" in out and "[FAIL]" not in out
