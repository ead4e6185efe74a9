"""Seed a demo workspace, classify it with the mock backend, and serve the
review API. Used by the workbench integration tests and for local UI work.

Usage: python3 seed_and_serve.py <workspace_dir> <port>
"""

from __future__ import annotations

import sys

from adsafety.cli import build_service_context
from adsafety.config import load_config
from adsafety.demo import build_demo_workspace
from adsafety.pipeline import run_pipeline
from adsafety.service import build_server


def main() -> int:
    workspace, port = sys.argv[1], int(sys.argv[2])
    paths = build_demo_workspace(workspace)
    config = load_config(paths["config"])
    result = run_pipeline(config)
    print(f"seeded run {result.run_id}", flush=True)
    ctx = build_service_context(config)
    server = build_server(ctx, "127.0.0.1", port)
    server.run()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
