#!/usr/bin/env python3
"""Unit tests for run manifests, checks and the consolidated report."""
import sys
from datetime import datetime, timedelta, timezone
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest
from pydantic import ValidationError

# Add rootfs/usr/bin to Python path
sys.path.insert(0, str(Path(__file__).parent.parent.parent / "rootfs" / "usr" / "bin"))

from errors import ManifestError
from manifest import (
    CheckResult,
    RunManifest,
    check,
    consolidate,
    format_number,
    normalise,
    stable_hash,
    write_csv,
)

STARTED = datetime(2024, 6, 1, tzinfo=timezone.utc)


def make_manifest(subcommand="count", checks=None):
    return RunManifest(
        command=[subcommand, "--n", "2"],
        subcommand=subcommand,
        seed=7,
        options={"seed": 7},
        checks=checks or [check("first_moment", Fraction(400, 63), Fraction(400, 63))],
        results={"mean_count": Fraction(400, 63), "ratio": 1 / 3},
    )


class TestFormatting:
    """Tests for number formatting."""

    def test_fraction(self):
        """Rationals are written as num/den."""
        assert format_number(Fraction(400, 63)) == "400/63"

    def test_float_digits(self):
        """Floats keep 12 significant digits."""
        assert format_number(1 / 3) == 0.333333333333

    def test_passthrough(self):
        """Booleans, ints, strings and None are unchanged."""
        assert format_number(True) is True
        assert format_number(None) is None
        assert format_number(12) == 12
        assert format_number("E[Y^2]") == "E[Y^2]"

    def test_nested(self):
        """normalise walks dicts, lists, tuples and numpy scalars."""
        value = {"a": (Fraction(1, 2), np.float64(0.25)), 3: [np.int64(4)]}
        assert normalise(value) == {"a": ["1/2", 0.25], "3": [4]}

    def test_stable_hash_ignores_key_order(self):
        """Canonical JSON sorts keys."""
        assert stable_hash({"a": 1, "b": 2}) == stable_hash({"b": 2, "a": 1})


class TestCheck:
    """Tests for check() and CheckResult."""

    def test_tolerance_pass_and_fail(self):
        """With a tolerance, pass means |value - target| <= tolerance."""
        assert check("x", 1.0005, 1.0, tolerance=1e-3).passed
        failed = check("x", 1.01, 1.0, tolerance=1e-3)
        assert not failed.passed
        assert failed.residual == pytest.approx(0.01)

    def test_exact_equality(self):
        """Without a tolerance the formatted values must be equal."""
        assert check("mean", Fraction(400, 63), Fraction(400, 63)).passed
        assert not check("mean", Fraction(400, 63), Fraction(400, 62)).passed
        assert check("reading", "E[Y^2]", "E[Y^2]").passed

    def test_explicit_verdict(self):
        """A caller-supplied verdict is kept when there is no tolerance."""
        result = check("below", 0.57, 1.14, passed=True)
        assert result.passed
        assert result.target == 1.14

    def test_boolean_values_stay_boolean(self):
        """True is stored as true, not 1, and survives the JSON round trip."""
        result = check("negative_definite", True, True)
        assert result.value is True
        assert result.target is True
        again = CheckResult.model_validate_json(result.model_dump_json())
        assert again.value is True
        assert check("count", 1, 1).value == 1
        assert type(check("count", 1, 1).value) is int

    def test_inconsistent_verdict_rejected(self):
        """A verdict contradicting the tolerance is a validation error."""
        with pytest.raises(ValidationError):
            CheckResult(name="x", value=1.0, target=2.0, tolerance=0.1, passed=True)


class TestRunManifest:
    """Tests for the run manifest."""

    def test_hash_ignores_timing(self):
        """Two runs with the same content but different clocks hash equally."""
        a = make_manifest().seal(STARTED)
        b = make_manifest().seal(STARTED + timedelta(hours=3))
        assert a.determinism_hash == b.determinism_hash
        assert a.timing.started_at != b.timing.started_at

    def test_hash_depends_on_results(self):
        """Changing a result changes the hash."""
        a = make_manifest().seal(STARTED)
        b = make_manifest()
        b.results["ratio"] = 0.5
        assert b.seal(STARTED).determinism_hash != a.determinism_hash

    def test_results_are_formatted(self):
        """Results are normalised on the way in."""
        m = make_manifest()
        assert m.results["mean_count"] == "400/63"
        assert m.results["ratio"] == 0.333333333333

    def test_write_and_load(self, tmp_path):
        """A written manifest loads back with the same hash."""
        m = make_manifest().seal(STARTED)
        path = m.write(tmp_path / "runs" / "count.json")
        loaded = RunManifest.load(path)
        assert loaded.determinism_hash == m.determinism_hash
        assert loaded.compute_hash() == m.determinism_hash
        assert loaded.passed

    def test_load_missing(self, tmp_path):
        """A missing manifest is a ManifestError."""
        with pytest.raises(ManifestError):
            RunManifest.load(tmp_path / "nope.json")

    def test_load_not_a_manifest(self, tmp_path):
        """Other JSON documents are rejected."""
        path = tmp_path / "other.json"
        path.write_text('{"hello": "world"}', encoding="utf-8")
        with pytest.raises(ManifestError):
            RunManifest.load(path)


class TestReport:
    """Tests for consolidation."""

    def test_consolidate(self, tmp_path):
        """Entries from every manifest, in order; printed mismatches listed."""
        first = make_manifest().seal(STARTED).write(tmp_path / "a.json")
        boundary = check(
            "boundary_z0",
            0.5697,
            1.139,
            printed=-0.47,
            passed=True,
            notes=["computed value differs from printed"],
        )
        second = make_manifest("landscape", [boundary]).seal(STARTED).write(tmp_path / "b.json")
        report = consolidate([first, second])
        assert [e.source for e in report.entries] == ["count", "landscape"]
        assert report.passed
        assert [e.name for e in report.discrepancies] == ["boundary_z0"]
        text = report.render_text()
        assert "2/2 checks passed" in text
        assert "printed -0.47" in text

    def test_failed_check_fails_report(self, tmp_path):
        """One failing check fails the report."""
        bad = check("x", 2.0, 1.0, tolerance=0.1)
        path = make_manifest("moments", [bad]).seal(STARTED).write(tmp_path / "m.json")
        report = consolidate([path])
        assert not report.passed
        assert "FAIL" in report.render_text()

    def test_no_manifests(self):
        """An empty list is an error."""
        with pytest.raises(ManifestError):
            consolidate([])


class TestCsv:
    """Tests for CSV tables."""

    def test_write_csv(self, tmp_path):
        """Header then rows; None becomes empty and rationals num/den."""
        path = write_csv(tmp_path / "t.csv", ("k", "mu_k", "mc"), [(1, Fraction(8, 5), None)])
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines == ["k,mu_k,mc", "1,8/5,"]
