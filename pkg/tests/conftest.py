"""
Root Test Configuration

Pytest configuration and fixtures.
"""

import os
import sys

import numpy as np
import pytest

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))


@pytest.fixture
def rng():
    """Seeded generator so every property test is reproducible."""
    return np.random.default_rng(20240611)


@pytest.fixture
def cli(capsys, monkeypatch, tmp_path):
    """
    Run the command line in-process.

    RANKLAB_* variables are cleared and the working directory is a fresh
    temporary one, so no .env file leaks in. Returns a callable giving
    (exit code, stdout, stderr).
    """
    from ranklab.main import main

    for name in list(os.environ):
        if name.startswith("RANKLAB_"):
            monkeypatch.delenv(name)
    monkeypatch.chdir(tmp_path)

    def invoke(*argv):
        code = main([str(a) for a in argv])
        captured = capsys.readouterr()
        return code, captured.out, captured.err

    return invoke


@pytest.fixture
def experiment(tmp_path):
    """Write experiment text to a file and return its path."""
    def write(text, name="experiment.cfg"):
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path

    return write
