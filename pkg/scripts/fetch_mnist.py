#!/usr/bin/env python3
"""Fetch the canonical MNIST IDX files into data/mnist/ (gzipped).

Tries, in order: an existing local directory given by --source or
VBDROP_MNIST_DIR, the well-known download mirrors, and finally the npm
package `mnist-data`, which bundles the original IDX files (useful on
networks where only package registries are reachable; requires node/npm).

The four files are verified by magic number and item count before being
installed.
"""

import argparse
import gzip
import os
import shutil
import struct
import subprocess
import sys
import tempfile
import urllib.request
from pathlib import Path

FILES = {
    "train-images-idx3-ubyte": (0x803, 60000),
    "train-labels-idx1-ubyte": (0x801, 60000),
    "t10k-images-idx3-ubyte": (0x803, 10000),
    "t10k-labels-idx1-ubyte": (0x801, 10000),
}

MIRRORS = [
    "https://ossci-datasets.s3.amazonaws.com/mnist/",
    "https://storage.googleapis.com/cvdf-datasets/mnist/",
]


def read_head(path):
    opener = gzip.open if path.suffix == ".gz" or _is_gzip(path) else open
    with opener(path, "rb") as f:
        return struct.unpack(">II", f.read(8))


def _is_gzip(path):
    with open(path, "rb") as f:
        return f.read(2) == b"\x1f\x8b"


def verify(path, stem):
    magic, count = FILES[stem]
    got_magic, got_count = read_head(path)
    if (got_magic, got_count) != (magic, count):
        raise SystemExit(
            f"{path}: expected magic 0x{magic:x} count {count}, "
            f"got 0x{got_magic:x} count {got_count}"
        )


def install(src, dest_dir, stem):
    verify(src, stem)
    dest = dest_dir / f"{stem}.gz"
    if _is_gzip(src):
        shutil.copyfile(src, dest)
    else:
        with open(src, "rb") as fin, gzip.open(dest, "wb", compresslevel=9) as fout:
            shutil.copyfileobj(fin, fout)
    print(f"installed {dest}")


def from_directory(source, dest_dir):
    for stem in FILES:
        found = None
        for name in (stem, stem + ".gz"):
            p = Path(source) / name
            if p.exists():
                found = p
                break
        if found is None:
            return False
        install(found, dest_dir, stem)
    return True


def from_mirrors(dest_dir):
    for base in MIRRORS:
        try:
            with tempfile.TemporaryDirectory() as tmp:
                for stem in FILES:
                    url = base + stem + ".gz"
                    print(f"downloading {url}")
                    target = Path(tmp) / (stem + ".gz")
                    with urllib.request.urlopen(url, timeout=60) as r:
                        target.write_bytes(r.read())
                    install(target, dest_dir, stem)
            return True
        except Exception as e:
            print(f"mirror {base} failed: {e}", file=sys.stderr)
    return False


def from_npm(dest_dir):
    with tempfile.TemporaryDirectory() as tmp:
        try:
            subprocess.run(
                ["npm", "install", "--no-audit", "--no-fund", "mnist-data"],
                cwd=tmp, check=True, capture_output=True,
            )
        except (OSError, subprocess.CalledProcessError) as e:
            print(f"npm fetch failed: {e}", file=sys.stderr)
            return False
        data = Path(tmp) / "node_modules" / "mnist-data" / "data"
        return from_directory(data, dest_dir)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--dest", default="data/mnist")
    parser.add_argument("--source", default=os.environ.get("VBDROP_MNIST_DIR"),
                        help="directory that already has the IDX files")
    args = parser.parse_args()
    dest_dir = Path(args.dest)
    dest_dir.mkdir(parents=True, exist_ok=True)
    if all((dest_dir / f"{stem}.gz").exists() for stem in FILES):
        for stem in FILES:
            verify(dest_dir / f"{stem}.gz", stem)
        print(f"{dest_dir} already populated and verified")
        return 0
    if args.source and from_directory(args.source, dest_dir):
        return 0
    if from_mirrors(dest_dir):
        return 0
    if from_npm(dest_dir):
        return 0
    print("could not obtain MNIST from any source", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
