"""Command-line harness: exit codes, determinism, negative controls."""

import json

import pytest

from trunclog.cli import main

SMALL_DILATION = {
    "lambda_grid": [0.5, 0.25, 0.125, 0.0625],
    "steps_per_unit": 256,
    "sample_points": 6,
}


def write_config(tmp_path, name, data):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return str(p)


def run(tmp_path, command, config=None, sub="out", extra=()):
    args = [command, "--out", str(tmp_path / sub)]
    if config is not None:
        args += ["--config", config]
    args += list(extra)
    return main(args), tmp_path / sub


def load_json(outdir, label):
    return json.loads((outdir / f"{label}.json").read_text())


# ---------------------------------------------------------------------------
# identity suite
# ---------------------------------------------------------------------------

def test_identity_suite_default_passes(tmp_path, capsys):
    cfgp = write_config(tmp_path, "c.json", {"cases": 25, "steps_per_unit": 256})
    rc, outdir = run(tmp_path, "identity-suite", cfgp)
    assert rc == 0
    payload = load_json(outdir, "identity-suite")
    assert payload["passed"] is True
    names = {c["name"] for c in payload["checks"]}
    assert {"exp-log-roundtrip", "magnus-three-way", "flow-composition",
            "nilpotent-flow-exactness", "displacement-bound"} <= names
    for suffix in (".json", ".csv", ".png"):
        assert (outdir / f"identity-suite{suffix}").exists()
    assert "PASS" in capsys.readouterr().out


def test_identity_suite_corrupted_series_is_flagged(tmp_path):
    cfgp = write_config(tmp_path, "c.json",
                        {"cases": 10, "steps_per_unit": 256,
                         "corrupt_psi_minus": True})
    rc, outdir = run(tmp_path, "identity-suite", cfgp)
    assert rc == 1
    payload = load_json(outdir, "identity-suite")
    assert payload["passed"] is False
    bad = {c["name"]: c for c in payload["checks"]}["magnus-three-way"]
    assert not bad["passed"]
    assert bad["measured"] > 1e-4            # a visible defect, not a near-miss
    assert all(c["passed"] for c in payload["checks"]
               if c["name"] != "magnus-three-way")


def test_identity_suite_abelian_fast_path(tmp_path):
    cfgp = write_config(tmp_path, "c.json",
                        {"kappa": 1, "system": {"name": "linear"},
                         "cases": 20, "steps_per_unit": 256})
    rc, _ = run(tmp_path, "identity-suite", cfgp)
    assert rc == 0


# ---------------------------------------------------------------------------
# order experiments
# ---------------------------------------------------------------------------

def test_dilation_order_small_grid(tmp_path):
    cfgp = write_config(tmp_path, "c.json", SMALL_DILATION)
    rc, outdir = run(tmp_path, "dilation-order", cfgp)
    assert rc == 0
    payload = load_json(outdir, "dilation-order")
    assert payload["report"]["slope"] >= 2.7
    assert payload["monitored"]["measured_over_shape"]


def test_csv_output_bit_identical_across_runs(tmp_path):
    cfgp = write_config(tmp_path, "c.json", SMALL_DILATION)
    rc1, out1 = run(tmp_path, "dilation-order", cfgp, sub="a")
    rc2, out2 = run(tmp_path, "dilation-order", cfgp, sub="b")
    assert rc1 == rc2 == 0
    a = (out1 / "dilation-order.csv").read_bytes()
    b = (out2 / "dilation-order.csv").read_bytes()
    assert a == b


def test_dilation_order_exact_system_sits_at_noise_floor(tmp_path):
    cfgp = write_config(tmp_path, "c.json",
                        {**SMALL_DILATION, "system": {"name": "heisenberg"},
                         "expect": "noise_floor"})
    rc, outdir = run(tmp_path, "dilation-order", cfgp)
    assert rc == 0
    payload = load_json(outdir, "dilation-order")
    assert payload["report"]["slope"] is None
    assert payload["checks"][0]["name"] == "distances-at-noise-floor"


def test_bch_order_zero_second_element_is_exact(tmp_path):
    cfgp = write_config(tmp_path, "c.json",
                        {**SMALL_DILATION, "path": {"zero_b": True},
                         "expect": "noise_floor"})
    rc, outdir = run(tmp_path, "bch-order", cfgp)
    assert rc == 0
    payload = load_json(outdir, "bch-order")
    # combined log comes from a numeric exp/mul/log round trip, so the flows
    # can disagree by an ulp even though the composition is exact
    assert max(payload["report"]["distances"]) <= 1e-15


def test_pushforward_order_runs_and_rejects_sphere(tmp_path):
    cfgp = write_config(tmp_path, "c.json",
                        {**SMALL_DILATION, "tangent_samples": 6})
    rc, outdir = run(tmp_path, "pushforward-order", cfgp)
    assert rc == 0
    assert load_json(outdir, "pushforward-order")["report"]["slope"] >= 2.7

    sphere = write_config(tmp_path, "s.json", {"system": {"name": "so3"}})
    rc, _ = run(tmp_path, "pushforward-order", sphere, sub="sph")
    assert rc == 2


# ---------------------------------------------------------------------------
# magnus comparison and w-field
# ---------------------------------------------------------------------------

def test_magnus_compare_abelian_columns_vanish(tmp_path):
    cfgp = write_config(tmp_path, "c.json",
                        {"kappa": 1, "step_counts": [8, 16, 32],
                         "expect": "noise_floor"})
    rc, outdir = run(tmp_path, "magnus-compare", cfgp)
    assert rc == 0
    payload = load_json(outdir, "magnus-compare")
    for row in payload["rows"]:
        assert max(row["ref_vs_ode"], row["ref_vs_code"], row["ode_vs_code"]) <= 1e-14


def test_magnus_compare_halving_ratio(tmp_path):
    cfgp = write_config(tmp_path, "c.json", {"step_counts": [32, 64, 128, 256]})
    rc, outdir = run(tmp_path, "magnus-compare", cfgp)
    assert rc == 0
    payload = load_json(outdir, "magnus-compare")
    ratio = {c["name"]: c for c in payload["checks"]}["step-halving-ratio"]["measured"]
    assert 16 * 0.7 <= ratio <= 16 * 1.3


def test_w_field_check_small(tmp_path):
    cfgp = write_config(tmp_path, "c.json",
                        {"h_grid": [4e-3, 1e-3], "t_samples": [0.35, 0.7],
                         "steps_per_unit": 256, "sample_points": 3})
    rc, outdir = run(tmp_path, "w-field-check", cfgp)
    assert rc == 0
    payload = load_json(outdir, "w-field-check")
    assert 16 * 0.8 <= payload["ratios"][0] <= 16 * 1.2


# ---------------------------------------------------------------------------
# configuration errors and overrides
# ---------------------------------------------------------------------------

def test_invalid_json_is_config_error(tmp_path):
    p = tmp_path / "broken.json"
    p.write_text("not json {")
    rc, _ = run(tmp_path, "identity-suite", str(p))
    assert rc == 2


def test_unknown_key_is_config_error(tmp_path):
    cfgp = write_config(tmp_path, "c.json", {"mystery_knob": 3})
    rc, _ = run(tmp_path, "identity-suite", cfgp)
    assert rc == 2


def test_bad_lambda_grid_is_config_error(tmp_path):
    cfgp = write_config(tmp_path, "c.json", {"lambda_grid": [0.25, 0.5]})
    rc, _ = run(tmp_path, "dilation-order", cfgp)
    assert rc == 2
    cfgp = write_config(tmp_path, "c2.json", {"lambda_grid": [0.5, -0.25]})
    rc, _ = run(tmp_path, "dilation-order", cfgp)
    assert rc == 2


def test_bad_expect_and_system_are_config_errors(tmp_path):
    cfgp = write_config(tmp_path, "c.json", {"expect": "miracle"})
    rc, _ = run(tmp_path, "dilation-order", cfgp)
    assert rc == 2
    cfgp = write_config(tmp_path, "c2.json", {"system": {"name": "nonsense"}})
    rc, _ = run(tmp_path, "dilation-order", cfgp)
    assert rc == 2


def test_missing_config_file_is_config_error(tmp_path):
    rc, _ = run(tmp_path, "identity-suite", str(tmp_path / "absent.json"))
    assert rc == 2


def test_steps_and_seed_flags_override_config(tmp_path):
    cfgp = write_config(tmp_path, "c.json", SMALL_DILATION)
    rc, outdir = run(tmp_path, "dilation-order", cfgp,
                     extra=["--steps", "128", "--seed", "9"])
    assert rc == 0
    echo = load_json(outdir, "dilation-order")["config"]
    assert echo["steps_per_unit"] == 128
    assert echo["seed"] == 9
