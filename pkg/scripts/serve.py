"""Run the diagnostic HTTP service. From the repository root:

    python3 scripts/serve.py [--host 127.0.0.1] [--port 8000]

Networks are registered by POSTing bundle documents to /networks;
state lives in memory for the lifetime of the process.
"""

import argparse

import uvicorn

from simnet.service import create_app


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8000)
    args = parser.parse_args()
    uvicorn.run(create_app(), host=args.host, port=args.port)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
