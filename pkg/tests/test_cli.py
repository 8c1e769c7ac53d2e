"""CLI argument plumbing and the sweep acceptance checks."""
import pytest

from convedit.cli import acceptance_violations, build_parser, config_from_args, main


def passing_rows():
    rows = []
    for ser, rule_s, dqn_s in (
        (0.0, 1.0, 1.0),
        (0.1, 0.98, 0.99),
        (0.2, 0.86, 0.96),
        (0.3, 0.62, 0.85),
        (0.4, 0.40, 0.91),
        (0.5, 0.23, 0.92),
    ):
        rows.append({"policy": "rule", "ser": ser, "turn": 7.0, "reward": 10.0, "goal": 2.97, "success": rule_s})
        rows.append({"policy": "dqn", "ser": ser, "turn": 8.0, "reward": 8.0, "goal": 2.97, "success": dqn_s})
    return rows


def test_check_passes_on_reference_shaped_rows():
    assert acceptance_violations(passing_rows()) == []


@pytest.mark.parametrize(
    "mutate, needle",
    [
        (lambda r: r.update(success=0.9) if r["policy"] == "rule" and r["ser"] == 0.0 else None, "rule@0.0 success"),
        (lambda r: r.update(goal=2.5) if r["policy"] == "dqn" and r["ser"] == 0.1 else None, "dqn@0.1 goal"),
        (lambda r: r.update(turn=12.0) if r["policy"] == "dqn" and r["ser"] == 0.0 else None, "turn 12.00 outside"),
        (lambda r: r.update(success=0.5) if r["policy"] == "rule" and r["ser"] == 0.5 else None, "rule@0.5 success"),
        (lambda r: r.update(success=0.6) if r["policy"] == "dqn" and r["ser"] == 0.5 else None, "dqn@0.5 success"),
        (lambda r: r.update(reward=-2.0) if r["policy"] == "dqn" and r["ser"] == 0.5 else None, "not positive"),
        (lambda r: r.update(success=0.3) if r["policy"] == "dqn" and r["ser"] == 0.4 else None, "below rule"),
        (lambda r: r.update(success=0.95) if r["policy"] == "rule" and r["ser"] == 0.3 else None, "rule success rises"),
    ],
)
def test_check_flags_each_band(mutate, needle):
    rows = passing_rows()
    for row in rows:
        mutate(row)
    assert any(needle in line for line in acceptance_violations(rows))


def test_check_reports_missing_cells():
    rows = [r for r in passing_rows() if not (r["policy"] == "dqn" and r["ser"] == 0.5)]
    assert any("missing sweep cell dqn@0.5" in line for line in acceptance_violations(rows))


def test_gap_check():
    rows = passing_rows()
    for row in rows:
        if row["ser"] == 0.5:
            row["success"] = 0.85 if row["policy"] == "dqn" else 0.55
    # hold the trend band steady so only the gap trips
    for row in rows:
        if row["policy"] == "rule" and row["ser"] == 0.4:
            row["success"] = 0.56
    violations = acceptance_violations(rows)
    assert any("gap at 0.5" in line for line in violations)


def test_flags_override_config_file(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("ser: 0.4\nhidden: 64\n")
    args = build_parser().parse_args(
        ["eval", "--config", str(path), "--ser", "0.2", "--no-turn-fraction"]
    )
    config = config_from_args(args)
    assert config.ser == 0.2  # flag wins
    assert config.hidden == 64  # file survives where no flag given
    assert config.turn_fraction is False


def test_main_reports_config_errors_cleanly(tmp_path, capsys):
    path = tmp_path / "bad.yaml"
    path.write_text("serr: 0.4\n")
    code = main(["eval", "--config", str(path)])
    assert code == 2
    assert "unknown config keys" in capsys.readouterr().err


def test_dataset_inspect_rejects_unknown_scene(capsys):
    code = main(["dataset", "inspect", "--root", "/nonexistent", "--scene", "scene_999"])
    assert code == 2
    assert "unknown scene" in capsys.readouterr().err


def test_dataset_inspect_prints_vocabulary(capsys):
    code = main(["dataset", "inspect", "--root", "/nonexistent"])
    assert code == 0
    out = capsys.readouterr().out
    assert "130 scenes (train 100, test 30)" in out
    assert "object vocabulary:" in out
