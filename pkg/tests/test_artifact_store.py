import os
import stat

import pytest

from src.storage.artifact_store import ArtifactStore


@pytest.fixture
def store() -> ArtifactStore:
    return ArtifactStore()


@pytest.fixture
def umask_022():
    previous = os.umask(0o022)
    yield
    os.umask(previous)


def test_artifact_gets_umask_permissions(store, tmp_path, umask_022):
    """Artifacts are readable like files created with open()"""
    target = tmp_path / "report.json"
    store.write_text(target, "{}")

    assert stat.S_IMODE(target.stat().st_mode) == 0o644


def test_failed_write_leaves_nothing_behind(store, tmp_path):
    target = tmp_path / "out" / "model.json"
    with pytest.raises(RuntimeError):
        with store.open_artifact(target) as handle:
            handle.write("partial")
            raise RuntimeError("interrupted")

    assert not target.exists()
    assert list((tmp_path / "out").iterdir()) == []


def test_replaces_existing_file(store, tmp_path):
    target = tmp_path / "data.csv"
    target.write_text("old")
    store.write_text(target, "new")

    assert store.read_text(target) == "new"
    assert store.manifest_path(target) == tmp_path / "data.csv.manifest.json"
