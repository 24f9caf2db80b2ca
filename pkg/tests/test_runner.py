import subprocess
import sys

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import first_failing_command
from profci.model import ExerciseManifest, GivenWhenThen, Status, TaskDef
from profci.runner import (
    MAX_CAPTURE,
    TRUNCATION_NOTICE,
    SpawnFailure,
    bound_output,
    expand_command,
    run_feature_sequence,
    run_student_suite,
)

PY = sys.executable


def sh(script):
    return ("sh", "-c", script)


def make_manifest(commands):
    tasks = tuple(
        TaskDef(
            id=f"t{i}",
            title=f"Task {i}",
            description=GivenWhenThen("g", "w", "t"),
            hints=("hint",),
            command=tuple(cmd),
        )
        for i, cmd in enumerate(commands)
    )
    return ExerciseManifest("stub", tasks, sh("true"))


def test_student_suite_exit_zero(tmp_path):
    assert run_student_suite(tmp_path, sh("true")).exit_status == 0


def test_student_suite_failure_is_a_result(tmp_path):
    run = run_student_suite(tmp_path, sh("echo 'AssertionError: expected 1' >&2; exit 1"))
    assert run.exit_status == 1
    assert "AssertionError: expected 1" in run.captured_output


def test_spawn_failure(tmp_path):
    with pytest.raises(SpawnFailure):
        run_student_suite(tmp_path, ["/nonexistent/binary"])


def test_student_suite_timeout(tmp_path):
    from profci.runner import TimeoutExceeded

    with pytest.raises(TimeoutExceeded):
        run_student_suite(tmp_path, sh("sleep 5"), timeout=0.3)


def test_seeded_heading_test_fails_until_fixed(workspace, subs):
    command = expand_command(
        ["{python}", "-m", "unittest", "discover", "-s", "tests", "-t", ".", "-q"], subs
    )
    broken = workspace(0, heading_fixed=False)
    run = run_student_suite(broken, command)
    assert run.exit_status != 0
    assert "Hello World" in run.captured_output
    fixed = workspace(0, heading_fixed=True)
    assert run_student_suite(fixed, command).exit_status == 0


def test_output_is_bounded_from_the_front(tmp_path):
    run = run_student_suite(tmp_path, [PY, "-c", "print('x' * 100_000 + 'END')"])
    assert len(run.captured_output) <= MAX_CAPTURE
    assert run.captured_output.startswith(TRUNCATION_NOTICE)
    assert run.captured_output.rstrip().endswith("END")


def test_bound_output_passthrough():
    assert bound_output("short") == "short"


def test_fail_fast_stops_after_first_failure(tmp_path):
    marker = tmp_path / "ran"
    manifest = make_manifest([sh("exit 0"), sh("exit 0"), sh("echo nope; exit 1"), sh(f"touch {marker}")])
    run = run_feature_sequence(tmp_path, manifest)
    assert run.first_failure_index == 2
    assert run.executed_count == 3
    assert not marker.exists()
    assert [r.result.status for r in run.per_task] == [Status.PASS, Status.PASS, Status.FAIL]


def test_no_tasks(tmp_path):
    run = run_feature_sequence(tmp_path, make_manifest([]))
    assert run.first_failure_index is None
    assert run.executed_count == 0


def test_task_id_and_merged_streams(tmp_path):
    manifest = make_manifest([sh('echo "out $PROFCI_TASK_ID"; echo "err $PROFCI_TASK_ID" >&2; exit 1')])
    run = run_feature_sequence(tmp_path, manifest)
    message = run.per_task[0].result.message
    assert "out t0" in message and "err t0" in message


def test_fallback_message_is_last_20_lines(tmp_path):
    manifest = make_manifest([[PY, "-c", "import sys\nfor i in range(50): print('line', i)\nsys.exit(1)"]])
    result = run_feature_sequence(tmp_path, manifest).per_task[0].result
    lines = result.message.splitlines()
    assert lines == [f"line {i}" for i in range(30, 50)]
    assert result.description == GivenWhenThen("g", "w", "t")
    assert result.hints == ("hint",)


def test_fallback_message_capped_at_4000_chars(tmp_path):
    manifest = make_manifest([[PY, "-c", "import sys\nfor i in range(20): print(str(i) * 500)\nsys.exit(1)"]])
    result = run_feature_sequence(tmp_path, manifest).per_task[0].result
    assert len(result.message) == 4000
    assert result.message.endswith("19" * 20)


def test_result_line_refines_message(tmp_path):
    script = (
        "import json, sys\n"
        "print('noise')\n"
        "print('##PROFCI## ' + json.dumps({'id': 't0', 'status': 'fail', "
        "'message': \"expected h1 to equal 'Shop'\"}))\n"
        "sys.exit(1)"
    )
    manifest = make_manifest([[PY, "-c", script]])
    result = run_feature_sequence(tmp_path, manifest).per_task[0].result
    assert result.status is Status.FAIL
    assert result.message == "expected h1 to equal 'Shop'"


def test_exit_status_is_authoritative(tmp_path):
    line = '##PROFCI## {"id": "t0", "status": "pass"}'
    manifest = make_manifest([sh(f"echo '{line}'; echo crashed; exit 3")])
    run = run_feature_sequence(tmp_path, manifest)
    assert run.first_failure_index == 0
    assert "crashed" in run.per_task[0].result.message


def test_reported_failure_with_zero_exit_still_fails(tmp_path):
    line = '##PROFCI## {"id": "t0", "status": "error", "message": "boom"}'
    run = run_feature_sequence(tmp_path, make_manifest([sh(f"echo '{line}'")]))
    assert run.per_task[0].result.status is Status.ERROR


def test_timeout_is_a_task_failure(tmp_path):
    manifest = make_manifest([sh("exit 0"), sh("sleep 5")])
    run = run_feature_sequence(tmp_path, manifest, timeout_per_task=0.3)
    assert run.first_failure_index == 1
    assert run.per_task[1].result.message == "timed out after 0.3 s"
    assert run.per_task[1].timed_out


def test_pilot_workspace_solving_seven(workspace, pilot_manifest, subs):
    ws = workspace(7)
    run = run_feature_sequence(ws, pilot_manifest, substitutions=subs)
    codes = [
        subprocess.run(expand_command(t.command, subs), cwd=ws, capture_output=True).returncode
        for t in pilot_manifest.tasks
    ]
    assert first_failing_command(codes) == 7
    assert run.first_failure_index == 7
    assert run.executed_count == 8
    failing = run.per_task[7].result
    assert failing.title == "Sum up the cart"
    assert "cart_total" in failing.message


def test_determinism(workspace, pilot_manifest, subs):
    ws = workspace(3)
    a = run_feature_sequence(ws, pilot_manifest, substitutions=subs)
    b = run_feature_sequence(ws, pilot_manifest, substitutions=subs)
    assert a.comparable() == b.comparable()


@settings(max_examples=30, deadline=None)
@given(st.lists(st.sampled_from([0, 0, 0, 1, 2]), max_size=6))
def test_fail_fast_matches_brute_force(tmp_path_factory, codes):
    tmp = tmp_path_factory.mktemp("ff")
    manifest = make_manifest([sh(f"exit {c}") for c in codes])
    run = run_feature_sequence(tmp, manifest)
    oracle = first_failing_command(
        [subprocess.run(list(t.command), cwd=tmp).returncode for t in manifest.tasks]
    )
    assert run.first_failure_index == oracle
    assert run.executed_count == (len(codes) if oracle is None else oracle + 1)
    assert all(r.result.passed for r in run.per_task[: run.first_failure_index])
