"""Run manifest and file bookkeeping for one command invocation."""
from __future__ import annotations

import json
import os
import tempfile
import time
from contextlib import contextmanager
from dataclasses import dataclass, field

from . import __version__

MANIFEST_NAME = "manifest.json"


@dataclass
class RunManifest:
    scenario_name: str
    config_hash: str
    command: str
    tool_version: str = __version__
    stages: dict = field(default_factory=dict)  # stage -> wall seconds
    files: list = field(default_factory=list)  # relative to the output directory

    @contextmanager
    def stage(self, name: str):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.stages[name] = self.stages.get(name, 0.0) + (time.perf_counter() - t0)

    def add(self, root, path):
        rel = os.path.relpath(path, root).replace(os.sep, "/")
        if rel not in self.files:
            self.files.append(rel)

    def to_dict(self) -> dict:
        return {
            "scenario_name": self.scenario_name,
            "command": self.command,
            "config_hash": self.config_hash,
            "tool_version": self.tool_version,
            "stage_wall_s": {k: round(v, 6) for k, v in self.stages.items()},
            "files": sorted(self.files),
        }

    def write(self, root) -> str:
        """Write atomically: a temporary file in the same directory, then rename."""
        path = os.path.join(root, MANIFEST_NAME)
        fd, tmp = tempfile.mkstemp(prefix=".manifest-", dir=root)
        try:
            with os.fdopen(fd, "w") as fh:
                json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
                fh.write("\n")
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        return path
