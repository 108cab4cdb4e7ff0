"""Test runner script for threeflow."""

import os
import sys

import pytest

# Add src directory to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "rootfs", "usr", "bin"))

# Run the unit and integration suites only; pass --slow to include slow tests
here = os.path.dirname(__file__)
args = [os.path.join(here, subfolder) for subfolder in ["unit", "integration"]]
if "--slow" in sys.argv[1:]:
    args += ["-m", "slow or not slow"]
args += ["-v"]

# Exit with appropriate code
sys.exit(pytest.main(args))
