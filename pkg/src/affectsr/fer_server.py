"""Host a built-in FER plugin behind the subprocess line protocol.

Usage: python -m affectsr.fer_server --plugin toy:0

Reads one image file path per stdin line and answers one line of
comma-separated class probabilities; exits on EOF.
"""

import argparse
import sys

from .fer import resolve_plugin


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--plugin", default="toy:0", help="plugin spec to host (default toy:0)")
    args = parser.parse_args(argv)
    plugin = resolve_plugin(args.plugin)
    for line in sys.stdin:
        path = line.strip()
        if not path:
            continue
        probs = plugin.classify_file(path)
        print(",".join(repr(float(p)) for p in probs), flush=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
