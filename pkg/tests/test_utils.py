"""Tests for environment settings and seed derivation."""

import random

from utils import derive_seed, get_fixed_point_exponent, get_key_bits, get_out_dir, make_rng


class TestSettings:
    def test_defaults(self, monkeypatch):
        monkeypatch.delenv("FEDBENCH_KEY_BITS", raising=False)
        monkeypatch.delenv("FEDBENCH_FIXED_POINT_EXPONENT", raising=False)
        assert get_key_bits() == 2048
        assert get_fixed_point_exponent() == -40

    def test_environment_wins(self, monkeypatch):
        monkeypatch.setenv("FEDBENCH_KEY_BITS", "512")
        monkeypatch.setenv("FEDBENCH_OUT_DIR", "/tmp/fedbench")
        assert get_key_bits() == 512
        assert get_out_dir() == "/tmp/fedbench"

    def test_bad_integer_falls_back(self, monkeypatch):
        monkeypatch.setenv("FEDBENCH_KEY_BITS", "lots")
        assert get_key_bits() == 2048


class TestSeeds:
    def test_derivation_is_stable(self):
        assert derive_seed(7, "A") == derive_seed(7, "A")
        assert derive_seed(7, "A") != derive_seed(7, "B")
        assert derive_seed(7, "A") != derive_seed(8, "A")

    def test_make_rng(self):
        assert make_rng(3).random() == make_rng(3).random()
        existing = random.Random(1)
        assert make_rng(existing) is existing
