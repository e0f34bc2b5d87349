"""Regenerate the shipped replay cache from forge_manifest.json.

    python tests/fixtures/record_cache.py

Runs the forge miner online against the in-memory fake server and records
every response into tests/fixtures/replay_cache/forge/.
"""

import json
import shutil
import sys
import tempfile
from pathlib import Path

HERE = Path(__file__).resolve().parent
sys.path.insert(0, str(HERE.parent))

from forkhealth.pipeline import cmd_mine_forge, load_config  # noqa: E402
from support.fakeforge import FakeForge  # noqa: E402


def record(dest: Path) -> None:
    manifest = json.loads((HERE / "forge_manifest.json").read_text())
    if (dest / "forge").exists():
        shutil.rmtree(dest / "forge")
    with tempfile.TemporaryDirectory() as out:
        cfg = load_config(
            {"project_list_path": str(HERE / "forge_projects.csv"), "cache_dir": str(dest), "output_dir": out,
             "tokens": "recording-token"},
            env={},
        )
        cmd_mine_forge(cfg, transport=FakeForge(manifest))


if __name__ == "__main__":
    record(HERE / "replay_cache")
