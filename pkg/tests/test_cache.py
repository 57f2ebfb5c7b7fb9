"""Content-addressed cache: round trips, version gating, corruption.

Every expectation here is a direct consequence of the stated contract:
a hit needs version + hash to match, stores are atomic, and anything
that fails integrity checks is evicted rather than returned.
"""

import json

import pytest

from hfbound import __version__
from hfbound.cache import cache_lookup, cache_store, default_cache_dir, request_hash
from hfbound.errors import CacheCorruptError

REQ = {"command": "certify", "params": {"f": "z^2", "target": 2}}
RESULT = {"bound": 0.6931471805599453, "route": "polylike"}


class TestRoundTrip:
    def test_store_then_lookup_hits(self, tmp_path):
        cache_store(REQ, RESULT, tmp_path)
        got = cache_lookup(REQ, tmp_path)
        assert got == RESULT

    def test_hit_bytes_identical(self, tmp_path):
        cache_store(REQ, RESULT, tmp_path)
        got = cache_lookup(REQ, tmp_path)
        assert json.dumps(got, sort_keys=True) == json.dumps(RESULT, sort_keys=True)

    def test_unknown_hash_misses(self, tmp_path):
        assert cache_lookup(REQ, tmp_path) is None

    def test_different_request_misses(self, tmp_path):
        cache_store(REQ, RESULT, tmp_path)
        other = {"command": "certify", "params": {"f": "z^3", "target": 2}}
        assert cache_lookup(other, tmp_path) is None

    def test_store_overwrites(self, tmp_path):
        cache_store(REQ, {"v": 1}, tmp_path)
        cache_store(REQ, {"v": 2}, tmp_path)
        assert cache_lookup(REQ, tmp_path) == {"v": 2}

    def test_store_returns_entry_path(self, tmp_path):
        path = cache_store(REQ, RESULT, tmp_path)
        assert path.exists()
        assert path.name == f"{request_hash(REQ)}.json"

    def test_no_temp_residue(self, tmp_path):
        cache_store(REQ, RESULT, tmp_path)
        names = sorted(p.name for p in tmp_path.iterdir())
        assert names == [f"{request_hash(REQ)}.json"]


class TestVersionGate:
    def test_version_bump_misses(self, tmp_path):
        cache_store(REQ, RESULT, tmp_path, version="0.1.0")
        assert cache_lookup(REQ, tmp_path, version="0.2.0") is None

    def test_stale_entry_not_evicted(self, tmp_path):
        path = cache_store(REQ, RESULT, tmp_path, version="0.0.9")
        assert cache_lookup(REQ, tmp_path) is None
        assert path.exists()  # stale, not corrupt

    def test_restore_after_bump_hits(self, tmp_path):
        cache_store(REQ, RESULT, tmp_path, version="0.0.9")
        cache_store(REQ, RESULT, tmp_path)
        assert cache_lookup(REQ, tmp_path) == RESULT

    def test_default_version_is_package_version(self, tmp_path):
        cache_store(REQ, RESULT, tmp_path)
        entry = json.loads(
            (tmp_path / f"{request_hash(REQ)}.json").read_text()
        )
        assert entry["version"] == __version__


class TestCorruption:
    def entry_path(self, tmp_path):
        return tmp_path / f"{request_hash(REQ)}.json"

    def test_garbage_evicted_and_missed(self, tmp_path):
        path = self.entry_path(tmp_path)
        path.write_text("{ not json")
        assert cache_lookup(REQ, tmp_path) is None
        assert not path.exists()

    def test_missing_fields_evicted(self, tmp_path):
        path = self.entry_path(tmp_path)
        path.write_text(json.dumps({"version": __version__}))
        assert cache_lookup(REQ, tmp_path) is None
        assert not path.exists()

    def test_tampered_request_evicted(self, tmp_path):
        path = cache_store(REQ, RESULT, tmp_path)
        entry = json.loads(path.read_text())
        entry["request"]["params"]["target"] = 9
        path.write_text(json.dumps(entry))
        assert cache_lookup(REQ, tmp_path) is None
        assert not path.exists()

    def test_strict_mode_raises_after_eviction(self, tmp_path):
        path = self.entry_path(tmp_path)
        path.write_text("[]")
        with pytest.raises(CacheCorruptError, match="missing required fields"):
            cache_lookup(REQ, tmp_path, strict=True)
        assert not path.exists()

    def test_corrupt_never_returned(self, tmp_path):
        path = cache_store(REQ, RESULT, tmp_path)
        raw = path.read_text().replace("0.6931", "0.S931")
        path.write_text(raw)
        assert cache_lookup(REQ, tmp_path) is None


class TestKeying:
    def test_key_is_insertion_order_free(self):
        a = {"x": 1, "y": [1, 2]}
        b = {"y": [1, 2], "x": 1}
        assert request_hash(a) == request_hash(b)

    def test_key_is_value_sensitive(self):
        assert request_hash({"x": 1}) != request_hash({"x": 2})

    def test_key_shape(self):
        key = request_hash(REQ)
        assert len(key) == 64
        assert set(key) <= set("0123456789abcdef")


class TestLocation:
    def test_env_override(self, monkeypatch, tmp_path):
        monkeypatch.setenv("HF_CACHE_DIR", str(tmp_path / "alt"))
        assert default_cache_dir() == tmp_path / "alt"

    def test_default_under_home(self, monkeypatch):
        monkeypatch.delenv("HF_CACHE_DIR", raising=False)
        assert default_cache_dir().name == "hfbound"

    def test_store_creates_directory(self, tmp_path):
        target = tmp_path / "a" / "b"
        cache_store(REQ, RESULT, target)
        assert cache_lookup(REQ, target) == RESULT

    def test_env_drives_store_and_lookup(self, monkeypatch, tmp_path):
        monkeypatch.setenv("HF_CACHE_DIR", str(tmp_path / "envcache"))
        cache_store(REQ, RESULT)
        assert (tmp_path / "envcache" / f"{request_hash(REQ)}.json").exists()
        assert cache_lookup(REQ) == RESULT
