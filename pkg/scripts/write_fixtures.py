"""Regenerate the canonical JSON files under fixtures/ from the
document dicts in tests/_bundles.py. Run from the repository root:

    python3 scripts/write_fixtures.py
"""

import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "tests"))

from simnet.bundle import canonical_dumps  # noqa: E402

import _bundles  # noqa: E402


def main() -> int:
    out_dir = ROOT / "fixtures"
    out_dir.mkdir(exist_ok=True)
    for name, document in sorted(_bundles.FIXTURES.items()):
        path = out_dir / name
        path.write_text(canonical_dumps(document), encoding="utf-8")
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
